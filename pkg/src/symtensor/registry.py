"""The session: an ID-keyed store of tensor objects plus session-wide options.

A ``Session`` owns every tensor object and enforces referential integrity:
metric and coordinate references always resolve, and objects that are still
referenced cannot be deleted. Representations other than the one a tensor was
created with are produced lazily by :mod:`symtensor.transform`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import errors
from .errors import (DuplicateId, InvalidId, RoleForbidden, ShapeMismatch, UnknownCoords,
                     UnknownId, UnknownMetric)
from .symexpr import core
from .symexpr.assumptions import Assumptions, is_zero, parse_predicate
from .symexpr.core import Expr, Sym, as_expr
from .symexpr.printer import DisplayOptions
from .symexpr.simplify import simplify

log = logging.getLogger(__name__)

DEFAULT_INDEX_LETTERS = "μνρσκλαβγδεζηθιξπτυφχψω"
DEFAULT_CURVE_PARAMETER = "λ"
FORMAT_VERSION = "1.0"
PLACEHOLDER_SYMBOL = "□"


class Role:
    COORDINATES = "Coordinates"
    METRIC = "Metric"
    TENSOR = "Tensor"
    CHRISTOFFEL = "Christoffel"
    RIEMANN = "Riemann"
    RICCI_TENSOR = "RicciTensor"
    RICCI_SCALAR = "RicciScalar"
    EINSTEIN = "Einstein"
    LAGRANGIAN = "Lagrangian"
    GEODESIC_LAGRANGIAN = "GeodesicFromLagrangian"
    GEODESIC_CHRISTOFFEL = "GeodesicFromChristoffel"
    TEMPORARY = "Temporary"

    ALL = (COORDINATES, METRIC, TENSOR, CHRISTOFFEL, RIEMANN, RICCI_TENSOR, RICCI_SCALAR,
           EINSTEIN, LAGRANGIAN, GEODESIC_LAGRANGIAN, GEODESIC_CHRISTOFFEL, TEMPORARY)
    # roles whose objects are derived from a metric and named after it
    DERIVED = (CHRISTOFFEL, RIEMANN, RICCI_TENSOR, RICCI_SCALAR, EINSTEIN, LAGRANGIAN,
               GEODESIC_LAGRANGIAN, GEODESIC_CHRISTOFFEL)
    CURVE = (LAGRANGIAN, GEODESIC_LAGRANGIAN, GEODESIC_CHRISTOFFEL)


def derived_id(metric_id: str, role: str) -> str:
    return metric_id + role


def to_array(components, rank: int | None = None) -> np.ndarray:
    """Convert nested lists (or an array) of expression-likes to an object array."""
    if isinstance(components, np.ndarray) and components.dtype == object:
        arr = components.copy()
    else:
        arr = np.array(components, dtype=object)
        if rank == 0 and arr.shape == (1,):
            arr = arr.reshape(())
    flat = arr.reshape(-1)
    for i, v in enumerate(flat):
        flat[i] = as_expr(v)
    return flat.reshape(arr.shape)


def diag(*entries) -> list:
    n = len(entries)
    return [[entries[i] if i == j else 0 for j in range(n)] for i in range(n)]


def normalize_indices(indices) -> tuple:
    idx = tuple(int(i) for i in indices)
    if any(i not in (1, -1) for i in idx):
        raise ShapeMismatch(f"index configurations must contain only +1 and -1, got {list(idx)}")
    return idx


@dataclass
class TensorObject:
    id: str
    role: str
    symbol: str
    metric: str | None
    default_indices: tuple
    default_coords: str
    components: dict = field(default_factory=dict)
    # coordinate systems only
    coord_symbols: tuple = ()
    transformations: dict = field(default_factory=dict)
    jacobians: dict = field(default_factory=dict)

    @property
    def rank(self) -> int:
        return len(self.default_indices)

    @property
    def dim(self) -> int:
        arr = next(iter(self.components.values()))
        return arr.shape[0] if arr.ndim else 0


@dataclass
class Options:
    index_letters: str = DEFAULT_INDEX_LETTERS
    reserved_symbols: list = field(default_factory=list)
    assumptions: Assumptions = field(default_factory=Assumptions)
    allow_overwrite: bool = False
    parallelize: bool = False
    workers: int | None = None
    curve_parameter: str = DEFAULT_CURVE_PARAMETER
    format_version: str = FORMAT_VERSION


class Session:
    """Registry of tensor objects and session-wide settings."""

    def __init__(self, on_message: Callable[[str], None] | None = None):
        self.objects: dict = {}
        self.options = Options()
        self.messages: list = []
        self.on_message = on_message
        self.stats = {"christoffel": 0, "riemann": 0, "simplify_calls": 0}
        self._temp_counter = 0

    # -- messages
    def notify(self, text: str):
        self.messages.append(text)
        log.info(text)
        if self.on_message is not None:
            self.on_message(text)

    # -- lookup
    def __contains__(self, tensor_id) -> bool:
        return tensor_id in self.objects

    def get(self, tensor_id: str) -> TensorObject:
        try:
            return self.objects[tensor_id]
        except KeyError:
            raise UnknownId(tensor_id) from None

    def coords(self, coords_id: str) -> TensorObject:
        obj = self.objects.get(coords_id)
        if obj is None or obj.role != Role.COORDINATES:
            raise UnknownCoords(f'The coordinate system "{coords_id}" does not exist.')
        return obj

    def metric(self, metric_id: str) -> TensorObject:
        obj = self.objects.get(metric_id)
        if obj is None or obj.role != Role.METRIC:
            raise UnknownMetric(f'The metric "{metric_id}" does not exist.')
        return obj

    def coord_symbols(self, coords_id: str) -> tuple:
        return self.coords(coords_id).coord_symbols

    def dim_of(self, coords_id: str) -> int:
        return len(self.coord_symbols(coords_id))

    @property
    def assumptions(self) -> Assumptions:
        return self.options.assumptions

    def display_options(self, style: str = "plain") -> DisplayOptions:
        return DisplayOptions(style, frozenset(self.options.reserved_symbols),
                              self.options.curve_parameter)

    # -- simplification helpers bound to the session assumptions
    def simplify(self, e: Expr) -> Expr:
        self.stats["simplify_calls"] += 1
        return simplify(e, self.assumptions)

    def is_zero(self, e: Expr) -> bool:
        return is_zero(e, self.assumptions)

    def simplify_array(self, arr: np.ndarray) -> np.ndarray:
        from .parallel import simplify_array
        return simplify_array(arr, self.assumptions, self.options.parallelize, self.options.workers)

    # -- creation
    def _check_new_id(self, tensor_id: str):
        if not isinstance(tensor_id, str) or not tensor_id:
            raise InvalidId("tensor IDs must be non-empty strings")
        if tensor_id.startswith("$"):
            raise InvalidId(f'"{tensor_id}" is not a valid ID: IDs may not start with "$"')
        if tensor_id in self.objects:
            if not self.options.allow_overwrite:
                raise DuplicateId(tensor_id)
            self.notify(f'Overwriting the tensor "{tensor_id}".')
            return True
        return False

    def _register(self, obj: TensorObject, overwriting: bool):
        old = self.objects.get(obj.id)
        if overwriting and old is not None:
            if old.role == Role.METRIC:
                self._drop_derived(obj.id)
                self._purge_dependent_caches(obj.id)
            if old.role == Role.COORDINATES:
                for o in self.objects.values():
                    if o.id != obj.id:
                        o.components = {k: v for k, v in o.components.items()
                                        if k[1] != obj.id or (k[0] == o.default_indices and o.default_coords == obj.id)}
            # keep insertion position when overwriting
            self.objects[obj.id] = obj
        else:
            self.objects[obj.id] = obj

    def _drop_derived(self, metric_id: str):
        doomed = [derived_id(metric_id, r) for r in Role.DERIVED]
        doomed = [d for d in doomed if d in self.objects and self.objects[d].role in Role.DERIVED]
        if doomed:
            self.notify("All curvature tensors previously calculated from the metric being "
                        "overwritten will be deleted.")
        for d in doomed:
            del self.objects[d]

    def _purge_dependent_caches(self, metric_id: str):
        """Cached non-default representations computed with an old metric are stale."""
        for o in self.objects.values():
            if o.metric == metric_id and o.id != metric_id:
                key = (o.default_indices, o.default_coords)
                if key in o.components:
                    o.components = {key: o.components[key]}

    def new_coordinates(self, coords_id: str, symbols: Iterable) -> str:
        syms = tuple(s if isinstance(s, Sym) else as_expr(s) for s in symbols)
        if not syms:
            raise errors.EmptySymbols("a coordinate system needs at least one symbol")
        if any(not isinstance(s, Sym) for s in syms):
            raise errors.EmptySymbols("coordinates must be plain symbols")
        if len(set(syms)) != len(syms):
            raise ShapeMismatch("coordinate symbols must be distinct")
        if any(s.name == self.options.curve_parameter for s in syms):
            raise errors.CollidesWithCoordinate(
                f'"{self.options.curve_parameter}" is the curve parameter and cannot be a coordinate')
        overwriting = self._check_new_id(coords_id)
        if overwriting:
            old = self.objects[coords_id]
            if old.role == Role.COORDINATES and len(old.coord_symbols) != len(syms) and self._coords_users(coords_id):
                raise RoleForbidden(f'"{coords_id}" is in use and cannot change dimension')
        arr = np.empty(len(syms), dtype=object)
        for i, s in enumerate(syms):
            arr[i] = s
        obj = TensorObject(coords_id, Role.COORDINATES, "x", None, (1,), coords_id,
                           {((1,), coords_id): arr}, coord_symbols=syms)
        self._register(obj, overwriting)
        for s in syms:
            if s.name not in self.options.reserved_symbols:
                self.options.reserved_symbols.append(s.name)
        return coords_id

    def new_metric(self, metric_id: str, coords_id: str, components, symbol: str = "g") -> str:
        dim = self.dim_of(coords_id)
        arr = to_array(components)
        if arr.shape != (dim, dim):
            raise ShapeMismatch(f"a metric in {dim} dimensions needs a {dim}x{dim} matrix, got shape {arr.shape}")
        for i in range(dim):
            for j in range(i + 1, dim):
                if not self.is_zero(core.sub(arr[i, j], arr[j, i])):
                    raise errors.NotSymmetric(f"the metric components are not symmetric (entries {i},{j})")
        from .transform import numerically_singular
        if numerically_singular(arr, self.assumptions):
            raise errors.Singular("the metric components are not invertible (zero determinant)")
        overwriting = self._check_new_id(metric_id)
        obj = TensorObject(metric_id, Role.METRIC, symbol or "g", None, (-1, -1), coords_id,
                           {((-1, -1), coords_id): arr})
        self._register(obj, overwriting)
        return metric_id

    def new_tensor(self, tensor_id: str, metric_id: str, coords_id: str | None, indices,
                   components, symbol: str | None = None, role: str = Role.TENSOR) -> str:
        metric = self.metric(metric_id)
        coords_id = coords_id or metric.default_coords
        dim = self.dim_of(coords_id)
        idx = normalize_indices(indices)
        arr = to_array(components, rank=len(idx))
        expected = (dim,) * len(idx)
        if arr.shape != expected:
            raise ShapeMismatch(
                f"components for rank {len(idx)} in {dim} dimensions must have shape {expected}, got {arr.shape}")
        overwriting = self._check_new_id(tensor_id)
        obj = TensorObject(tensor_id, role, symbol or PLACEHOLDER_SYMBOL, metric_id, idx, coords_id,
                           {(idx, coords_id): arr})
        self._register(obj, overwriting)
        return tensor_id

    def store_derived(self, tensor_id: str, role: str, metric_id: str, coords_id: str, indices,
                      arr: np.ndarray, symbol: str) -> str:
        """Register a computed object, replacing any previous one with that ID."""
        idx = normalize_indices(indices)
        if tensor_id in self.objects and role != Role.TEMPORARY:
            if not self.options.allow_overwrite and self.objects[tensor_id].role not in Role.DERIVED:
                raise DuplicateId(tensor_id)
            if self.objects[tensor_id].role not in Role.DERIVED:
                self.notify(f'Overwriting the tensor "{tensor_id}".')
        obj = TensorObject(tensor_id, role, symbol, metric_id, idx, coords_id, {(idx, coords_id): arr})
        self.objects[tensor_id] = obj
        return tensor_id

    def temp_id(self) -> str:
        self._temp_counter += 1
        return f"$temp{self._temp_counter}"

    # -- deletion and renaming
    def _coords_users(self, coords_id: str) -> list:
        return [o.id for o in self.objects.values()
                if o.default_coords == coords_id and o.id != coords_id and o.role != Role.TEMPORARY]

    def _metric_users(self, metric_id: str) -> list:
        return [o.id for o in self.objects.values()
                if o.metric == metric_id and o.id != metric_id and o.role != Role.TEMPORARY]

    def delete(self, tensor_id: str):
        obj = self.get(tensor_id)
        if obj.role == Role.COORDINATES:
            users = self._coords_users(tensor_id)
            if users:
                raise errors.InUseAsCoords(
                    f'The coordinate system "{tensor_id}" cannot be deleted, as it is the default '
                    f'coordinate system of the tensor "{users[0]}". To delete the coordinate system, '
                    f'first change the default coordinate system of "{users[0]}" and any other relevant tensors.')
            for o in self.objects.values():
                o.components = {k: v for k, v in o.components.items() if k[1] != tensor_id}
                o.transformations.pop(tensor_id, None)
                o.jacobians.pop(tensor_id, None)
        if obj.role == Role.METRIC:
            users = self._metric_users(tensor_id)
            if users:
                raise errors.InUseAsMetric(
                    f'The metric "{tensor_id}" cannot be deleted, as it has been used to define the tensor '
                    f'"{users[0]}". To delete the metric, first delete "{users[0]}" and any other tensors '
                    f'defined using this metric.')
        del self.objects[tensor_id]

    def change_id(self, old_id: str, new_id: str) -> str:
        obj = self.get(old_id)
        if new_id == old_id:
            return new_id
        if new_id in self.objects:
            raise DuplicateId(new_id)
        if not new_id or new_id.startswith("$"):
            raise InvalidId(f'"{new_id}" is not a valid ID')
        del self.objects[old_id]
        obj.id = new_id
        self.objects[new_id] = obj
        for o in self.objects.values():
            if o.metric == old_id:
                o.metric = new_id
            if o.default_coords == old_id:
                o.default_coords = new_id
            if obj.role == Role.COORDINATES:
                o.components = {(k[0], new_id if k[1] == old_id else k[1]): v for k, v in o.components.items()}
                if old_id in o.transformations:
                    o.transformations[new_id] = o.transformations.pop(old_id)
                if old_id in o.jacobians:
                    o.jacobians[new_id] = o.jacobians.pop(old_id)
        return new_id

    def change_symbol(self, tensor_id: str, symbol: str) -> str:
        self.get(tensor_id).symbol = symbol
        return tensor_id

    def change_default_indices(self, tensor_id: str, indices) -> str:
        obj = self.get(tensor_id)
        idx = normalize_indices(indices)
        if obj.role in (Role.COORDINATES, Role.METRIC):
            raise RoleForbidden(f'The default indices of the {obj.role.lower()} "{tensor_id}" cannot be changed.')
        if len(idx) != obj.rank:
            raise errors.RankMismatch(f'"{tensor_id}" has rank {obj.rank}, got {len(idx)} indices')
        obj.default_indices = idx
        return tensor_id

    def change_default_coords(self, tensor_id: str, coords_id: str) -> str:
        obj = self.get(tensor_id)
        self.coords(coords_id)
        if obj.role == Role.COORDINATES:
            raise RoleForbidden(f'The default coordinates of the coordinate system "{tensor_id}" cannot be changed.')
        if self.dim_of(coords_id) != self.dim_of(obj.default_coords):
            raise errors.DimensionMismatch("coordinate systems have different dimensions")
        obj.default_coords = coords_id
        return tensor_id

    # -- options
    def set_reserved_symbols(self, symbols: Iterable | None = None) -> list:
        for s in symbols or ():
            name = s.name if isinstance(s, Sym) else str(s)
            if name not in self.options.reserved_symbols:
                self.options.reserved_symbols.append(name)
        return list(self.options.reserved_symbols)

    def set_assumptions(self, assumptions=(), *, clear: bool = False, real: bool | None = None) -> dict:
        """Append predicates (strings like ``"r >= 0"``); ``clear`` drops user predicates."""
        a = self.options.assumptions
        if clear:
            a = Assumptions(a.assume_real, ())
        if real is not None:
            a = Assumptions(real, a.predicates)
        if isinstance(assumptions, str):
            assumptions = [assumptions]
        preds = [parse_predicate(p) if isinstance(p, str) else p for p in assumptions or ()]
        self.options.assumptions = a.with_predicates(preds)
        return self.options.assumptions.describe()

    def set_index_letters(self, letters: str | None = None) -> str:
        if letters is None:
            letters = DEFAULT_INDEX_LETTERS
        if not letters:
            raise ValueError("index letters cannot be empty")
        # repeated letters would give two slots the same label
        letters = "".join(dict.fromkeys(letters))
        self.options.index_letters = letters
        return letters

    def set_allow_overwrite(self, flag: bool | None = None) -> bool:
        if flag is not None:
            self.options.allow_overwrite = bool(flag)
            self.notify(f"Overwriting tensors turned {'on' if flag else 'off'}.")
        return self.options.allow_overwrite

    def set_parallelize(self, flag: bool | None = None, workers: int | None = None) -> bool:
        if flag is not None:
            self.options.parallelize = bool(flag)
        if workers is not None:
            self.options.workers = workers
        return self.options.parallelize

    # -- access
    def get_components(self, tensor_id: str, indices=None, coords_id: str | None = None) -> np.ndarray:
        obj = self.get(tensor_id)
        if indices is None or coords_id is None:
            idx = obj.default_indices if indices is None else normalize_indices(indices)
            cid = obj.default_coords if coords_id is None else coords_id
            parts = []
            if indices is None:
                parts.append(f"the default index configuration {_fmt_indices(idx)}")
            if coords_id is None:
                parts.append(f'the default coordinate system "{cid}"')
            self.notify("Using " + " and ".join(parts) + ".")
            indices, coords_id = idx, cid
        from .transform import represent
        return represent(self, tensor_id, normalize_indices(indices), coords_id).copy()

    def simplify_tensor(self, tensor_id: str) -> str:
        obj = self.get(tensor_id)
        for key, arr in list(obj.components.items()):
            obj.components[key] = self.simplify_array(arr)
        return tensor_id

    def info(self, tensor_id: str | None = None) -> dict:
        if tensor_id is None:
            visible = [o for o in self.objects.values() if o.role != Role.TEMPORARY]
            coords = [o.id for o in visible if o.role == Role.COORDINATES]
            metrics = sorted(o.id for o in visible if o.role == Role.METRIC)
            return {
                "total": len(visible),
                "coordinates": coords,
                "metrics": {m: self._metric_users(m) for m in metrics},
            }
        obj = self.get(tensor_id)
        out = {"ID": obj.id, "Symbol": obj.symbol, "Role": obj.role}
        if obj.metric is not None:
            out["Metric"] = obj.metric
        if obj.role != Role.COORDINATES:
            out["Default Coordinates"] = obj.default_coords
        out["Default Indices"] = list(obj.default_indices)
        out["Rank"] = obj.rank
        if obj.role == Role.COORDINATES:
            out["Default Coordinates For"] = self._coords_users(obj.id)
        if obj.role == Role.METRIC:
            out["Tensors Using This Metric"] = self._metric_users(obj.id)
        return out

    def clear(self):
        self.objects.clear()

    def check_integrity(self):
        """Raise if any metric or coordinate reference dangles."""
        for o in self.objects.values():
            if o.metric is not None:
                self.metric(o.metric)
            self.coords(o.default_coords)


def _fmt_indices(idx) -> str:
    return "{" + ", ".join(str(i) for i in idx) + "}"


def format_info(report: dict) -> str:
    if "total" in report:
        lines = [f"Total tensors created: {report['total']}", "Coordinate Systems:"]
        lines += [f"{i}. {c}" for i, c in enumerate(report["coordinates"], 1)]
        lines.append("Metrics:")
        for i, (m, users) in enumerate(report["metrics"].items(), 1):
            lines.append(f"{i}. {m} -> {' | '.join(users)}" if users else f"{i}. {m}")
        return "\n".join(lines)
    lines = []
    for k, v in report.items():
        if k == "Rank":
            continue
        if isinstance(v, list) and k != "Default Indices":
            v = ", ".join(v) if v else "(none)"
        elif k == "Default Indices":
            v = _fmt_indices(v)
        lines.append(f"{k}: {v}")
    return "\n".join(lines)
