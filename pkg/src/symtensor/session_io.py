"""Saving and loading sessions, and rendering tensors as text.

A session file is a JSON object with one record per tensor ID plus the
session options under the reserved key ``"$options"``. Expressions are stored
as nested arrays mirroring the expression tree, so a load reproduces the exact
same trees and a second export is byte-identical to the first.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DanglingReference, FileWriteError, SchemaError, VersionUnsupported
from .registry import (FORMAT_VERSION, Options, Role, Session, TensorObject, normalize_indices)
from .symexpr import core
from .symexpr.assumptions import Assumptions, parse_predicate, sign_match
from .symexpr.core import Expr, Sym, SubstitutionRule
from .symexpr.printer import format_expr
from .transform import map_array, represent

OPTIONS_KEY = "$options"
FILE_EXTENSION = ".ogre.json"

_LATEX_NAMES = {
    "α": r"\alpha", "β": r"\beta", "γ": r"\gamma", "δ": r"\delta", "ε": r"\epsilon",
    "ζ": r"\zeta", "η": r"\eta", "θ": r"\theta", "ι": r"\iota", "κ": r"\kappa",
    "λ": r"\lambda", "μ": r"\mu", "ν": r"\nu", "ξ": r"\xi", "π": r"\pi", "ρ": r"\rho",
    "σ": r"\sigma", "τ": r"\tau", "υ": r"\upsilon", "φ": r"\phi", "χ": r"\chi",
    "ψ": r"\psi", "ω": r"\omega", "Γ": r"\Gamma", "Δ": r"\Delta", "Θ": r"\Theta",
    "Λ": r"\Lambda", "Σ": r"\Sigma", "Φ": r"\Phi", "Ψ": r"\Psi", "Ω": r"\Omega",
}


# ---------------------------------------------------------------------------
# expression trees

def encode_expr(e: Expr):
    if isinstance(e, core.Num):
        return ["Num", str(e.value)]
    if isinstance(e, Sym):
        return ["Sym", e.name]
    if isinstance(e, core.Add):
        return ["Add", [encode_expr(t) for t in e.terms]]
    if isinstance(e, core.Mul):
        return ["Mul", [encode_expr(f) for f in e.factors]]
    if isinstance(e, core.Pow):
        return ["Pow", encode_expr(e.base), encode_expr(e.exp)]
    if isinstance(e, core.Func):
        return ["Func", e.name, [encode_expr(a) for a in e.args]]
    if isinstance(e, core.Deriv):
        return ["Deriv", e.name, list(e.orders), [encode_expr(a) for a in e.args]]
    if isinstance(e, core.DeferredD):
        return ["DeferredD", e.param.name, e.order, encode_expr(e.inner)]
    if isinstance(e, core.Abs):
        return ["Abs", encode_expr(e.inner)]
    raise TypeError(f"cannot serialize {type(e).__name__}")


def _str(x, what):
    if not isinstance(x, str):
        raise SchemaError(f"{what} must be a string, got {x!r}")
    return x


def _list(x, what):
    if not isinstance(x, list):
        raise SchemaError(f"{what} must be an array, got {x!r}")
    return x


def decode_expr(data) -> Expr:
    # raw constructors keep the stored tree exactly as written
    if not isinstance(data, list) or not data or not isinstance(data[0], str):
        raise SchemaError(f"malformed expression {data!r}")
    kind, rest = data[0], data[1:]
    try:
        if kind == "Num":
            return core.Num(Fraction(_str(rest[0], "a number")))
        if kind == "Sym":
            return Sym(_str(rest[0], "a symbol name"))
        if kind == "Add":
            return core.Add([decode_expr(t) for t in _list(rest[0], "Add terms")])
        if kind == "Mul":
            return core.Mul([decode_expr(f) for f in _list(rest[0], "Mul factors")])
        if kind == "Pow":
            return core.Pow(decode_expr(rest[0]), decode_expr(rest[1]))
        if kind == "Func":
            return core.Func(_str(rest[0], "a function name"),
                             [decode_expr(a) for a in _list(rest[1], "arguments")])
        if kind == "Deriv":
            orders = tuple(int(o) for o in _list(rest[1], "derivative orders"))
            return core.Deriv(_str(rest[0], "a function name"),
                              [decode_expr(a) for a in _list(rest[2], "arguments")], orders)
        if kind == "DeferredD":
            return core.DeferredD(decode_expr(rest[2]), Sym(_str(rest[0], "a parameter")), int(rest[1]))
        if kind == "Abs":
            return core.Abs(decode_expr(rest[0]))
    except (IndexError, ValueError, ZeroDivisionError, TypeError) as exc:
        raise SchemaError(f"malformed {kind} node {data!r}: {exc}") from None
    raise SchemaError(f"unknown expression node {kind!r}")


def encode_array(arr):
    if isinstance(arr, Expr):
        return encode_expr(arr)
    if arr.ndim == 0:
        return encode_expr(arr[()])
    return [encode_array(a) for a in arr]


def decode_array(data, rank: int) -> np.ndarray:
    def shape_of(d, r):
        if r == 0:
            return ()
        _list(d, "component array")
        if not d:
            raise SchemaError("component arrays must be non-empty")
        inner = {shape_of(x, r - 1) for x in d}
        if len(inner) != 1:
            raise SchemaError("component arrays must be rectangular")
        return (len(d),) + inner.pop()

    shape = shape_of(data, rank)
    if len(set(shape)) > 1:
        raise SchemaError(f"component arrays must be square, got shape {shape}")
    out = np.empty(shape, dtype=object)
    for pos in np.ndindex(shape):
        d = data
        for i in pos:
            d = d[i]
        out[pos] = decode_expr(d)
    return out


def component_key(indices, coords_id: str) -> str:
    return json.dumps([list(indices), coords_id], ensure_ascii=False)


def _parse_component_key(key: str):
    try:
        idx, coords = json.loads(key)
        return normalize_indices(idx), _str(coords, "a component coordinate ID")
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"malformed component key {key!r}: {exc}") from None


# ---------------------------------------------------------------------------
# export

def _record(obj: TensorObject) -> dict:
    rec = {"Components": {component_key(k[0], k[1]): encode_array(v)
                          for k, v in obj.components.items()},
           "DefaultCoords": obj.default_coords,
           "DefaultIndices": list(obj.default_indices)}
    if obj.metric is not None:
        rec["Metric"] = obj.metric
    rec["Role"] = obj.role
    rec["Symbol"] = obj.symbol
    if obj.transformations:
        rec["CoordTransformations"] = {
            tgt: [[encode_expr(r.target), encode_expr(r.replacement)] for r in rules]
            for tgt, rules in obj.transformations.items()}
    if obj.jacobians:
        rec["Jacobians"] = {tgt: {name: encode_array(m) for name, m in jac.items()}
                            for tgt, jac in obj.jacobians.items()}
    rec["FormatVersion"] = FORMAT_VERSION
    return rec


def export_tensor(session: Session, tensor_id: str) -> dict:
    """The record of one tensor as a single-entry mapping ``{id: record}``."""
    return {tensor_id: _record(session.get(tensor_id))}


def options_record(options: Options) -> dict:
    return {
        "AllowOverwrite": options.allow_overwrite,
        "CurveParameter": options.curve_parameter,
        "IndexLetters": options.index_letters,
        "Parallelize": options.parallelize,
        "ReservedSymbols": list(options.reserved_symbols),
        "SimplifyAssumptions": options.assumptions.describe(),
        "FormatVersion": FORMAT_VERSION,
    }


def export_all(session: Session, filename: str | Path | None = None) -> dict:
    """Every tensor record plus the options; written as JSON when ``filename`` is given."""
    data = {OPTIONS_KEY: options_record(session.options)}
    for obj in session.objects.values():
        if obj.role != Role.TEMPORARY:
            data[obj.id] = _record(obj)
    if filename is not None:
        try:
            Path(filename).write_text(dumps(data), encoding="utf-8")
        except OSError as exc:
            raise FileWriteError(f"could not write {filename}: {exc}") from None
    return data


def dumps(data: dict) -> str:
    return json.dumps(data, ensure_ascii=False, indent=1) + "\n"


# ---------------------------------------------------------------------------
# import

def _check_version(rec: dict, where: str):
    v = rec.get("FormatVersion")
    if not isinstance(v, str):
        raise SchemaError(f"{where}: missing FormatVersion")
    major = v.split(".")[0]
    if major != FORMAT_VERSION.split(".")[0]:
        raise VersionUnsupported(f"{where}: format version {v} is not supported (expected {FORMAT_VERSION})")


_REQUIRED = ("Components", "DefaultCoords", "DefaultIndices", "Role", "Symbol")


def _decode_record(tensor_id: str, rec) -> TensorObject:
    if not isinstance(rec, dict):
        raise SchemaError(f'the record of "{tensor_id}" must be an object')
    if not tensor_id or tensor_id.startswith("$"):
        raise SchemaError(f'"{tensor_id}" is not a valid tensor ID')
    _check_version(rec, tensor_id)
    missing = [k for k in _REQUIRED if k not in rec]
    if missing:
        raise SchemaError(f'the record of "{tensor_id}" lacks {", ".join(missing)}')
    role = rec["Role"]
    if role not in Role.ALL or role == Role.TEMPORARY:
        raise SchemaError(f'unknown role {role!r} for "{tensor_id}"')
    try:
        default_idx = normalize_indices(_list(rec["DefaultIndices"], "DefaultIndices"))
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"bad DefaultIndices for {tensor_id}: {exc}") from None
    metric = rec.get("Metric")
    if metric is not None:
        _str(metric, "Metric")
    comps = {}
    comp_data = rec["Components"]
    if not isinstance(comp_data, dict) or not comp_data:
        raise SchemaError(f'"{tensor_id}" has no components')
    for key, val in comp_data.items():
        idx, coords = _parse_component_key(key)
        if len(idx) != len(default_idx):
            raise SchemaError(f'component key {key} of "{tensor_id}" has the wrong rank')
        comps[(idx, coords)] = decode_array(val, len(idx))
    obj = TensorObject(tensor_id, role, _str(rec["Symbol"], "Symbol"), metric, default_idx,
                       _str(rec["DefaultCoords"], "DefaultCoords"), comps)
    if role == Role.COORDINATES:
        own = comps.get(((1,), tensor_id))
        if own is None or own.ndim != 1 or not all(isinstance(s, Sym) for s in own):
            raise SchemaError(f'the coordinate system "{tensor_id}" needs its own symbol list')
        obj.coord_symbols = tuple(own)
    for tgt, rules in (rec.get("CoordTransformations") or {}).items():
        pairs = []
        for pair in _list(rules, "transformation rules"):
            if not isinstance(pair, list) or len(pair) != 2:
                raise SchemaError(f"malformed transformation rule {pair!r}")
            pairs.append(SubstitutionRule(decode_expr(pair[0]), decode_expr(pair[1])))
        obj.transformations[tgt] = pairs
    ranks = {"Jacobian": 2, "InverseJacobian": 2, "ChristoffelJacobian": 3}
    for tgt, jac in (rec.get("Jacobians") or {}).items():
        if not isinstance(jac, dict):
            raise SchemaError("Jacobians must map names to arrays")
        obj.jacobians[tgt] = {name: decode_array(m, ranks.get(name, 2)) for name, m in jac.items()}
    return obj


def _decode_options(rec) -> Options:
    if not isinstance(rec, dict):
        raise SchemaError("the options record must be an object")
    _check_version(rec, OPTIONS_KEY)
    opts = Options()
    try:
        if "IndexLetters" in rec:
            opts.index_letters = _str(rec["IndexLetters"], "IndexLetters")
        if "CurveParameter" in rec:
            opts.curve_parameter = _str(rec["CurveParameter"], "CurveParameter")
        opts.reserved_symbols = [_str(s, "a reserved symbol") for s in rec.get("ReservedSymbols", [])]
        opts.parallelize = bool(rec.get("Parallelize", False))
        opts.allow_overwrite = bool(rec.get("AllowOverwrite", False))
        sa = rec.get("SimplifyAssumptions", {})
        preds = [parse_predicate(p) for p in sa.get("User", [])]
        opts.assumptions = Assumptions(bool(sa.get("AssumeReal", True)), tuple(preds))
    except (AttributeError, TypeError) as exc:
        raise SchemaError(f"malformed options record: {exc}") from None
    return opts


def _load_source(source) -> dict:
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
        try:
            source = json.loads(text)
        except ValueError as exc:
            raise SchemaError(f"{source} is not valid JSON: {exc}") from None
    if not isinstance(source, dict):
        raise SchemaError("a session file must be a JSON object")
    return source


def _check_refs(objects: dict, obj: TensorObject):
    def coords_ok(cid):
        o = objects.get(cid)
        return o is not None and o.role == Role.COORDINATES
    if obj.metric is not None:
        m = objects.get(obj.metric)
        if m is None or m.role != Role.METRIC:
            raise DanglingReference(
                f'The metric "{obj.metric}" of "{obj.id}" does not exist; it must be imported first.')
    for cid in {obj.default_coords} | {k[1] for k in obj.components}:
        if not coords_ok(cid) and cid != obj.id:
            raise DanglingReference(
                f'The coordinate system "{cid}" used by "{obj.id}" does not exist; it must be imported first.')


def import_all(session: Session, source) -> None:
    """Replace every tensor and all options with the contents of ``source``.

    ``source`` is a mapping as returned by :func:`export_all` or a path to a
    session file. Nothing is changed if the input fails validation.
    """
    data = _load_source(source)
    opts = _decode_options(data[OPTIONS_KEY]) if OPTIONS_KEY in data else Options()
    objects = {}
    for tid, rec in data.items():
        if tid == OPTIONS_KEY:
            continue
        objects[tid] = _decode_record(tid, rec)
    for obj in objects.values():
        _check_refs(objects, obj)
    opts.workers = session.options.workers
    session.objects = objects
    session.options = opts


def import_tensor(session: Session, fragment) -> str:
    """Merge one exported record into the session.

    Referenced metrics and coordinate systems must already exist. An existing
    ID is replaced only when overwriting is allowed.
    """
    data = _load_source(fragment)
    entries = [(k, v) for k, v in data.items() if k != OPTIONS_KEY]
    if len(entries) != 1:
        raise SchemaError(f"expected exactly one tensor record, got {len(entries)}")
    tid, rec = entries[0]
    obj = _decode_record(tid, rec)
    merged = dict(session.objects)
    merged[tid] = obj
    _check_refs(merged, obj)
    overwriting = session._check_new_id(tid)
    session._register(obj, overwriting)
    if obj.role == Role.COORDINATES:
        session.set_reserved_symbols(obj.coord_symbols)
    return tid


# ---------------------------------------------------------------------------
# rendering

def _latex_name(s: str) -> str:
    return "".join(_LATEX_NAMES.get(c, c) for c in s)


def index_decoration(symbol: str, labels, positions, style: str = "plain") -> str:
    """``Γ^t_rθ`` style decoration; runs of equal position share one marker."""
    runs = []
    for lab, pos in zip(labels, positions):
        if runs and runs[-1][0] == pos:
            runs[-1][1].append(lab)
        else:
            runs.append((pos, [lab]))
    if style == "latex":
        parts = []
        for pos, labs in runs:
            marker = "^" if pos == 1 else "_"
            body = " ".join(_latex_name(x) for x in labs)
            parts.append(f"{{}}{marker}{{{body}}}" if parts else f"{marker}{{{body}}}")
        return _latex_name(symbol) + "".join(parts)
    out = symbol
    for pos, labs in runs:
        marker = "^" if pos == 1 else "_"
        body = "".join(labs) if all(len(x) == 1 for x in labs) else "{" + " ".join(labs) + "}"
        out += marker + body
    return out


def _representation(session, tensor_id, indices, coords, post_fn):
    obj = session.get(tensor_id)
    idx = obj.default_indices if indices is None else normalize_indices(indices)
    cid = coords or obj.default_coords
    arr = represent(session, tensor_id, idx, cid).copy()
    if post_fn is not None:
        arr = map_array(lambda e: core.as_expr(post_fn(e)), arr)
    return obj, idx, cid, arr


def list_components(session: Session, tensor_id: str, indices=None, coords: str | None = None,
                    post_fn: Callable | None = None, style: str = "plain") -> str:
    """One line per group of components that agree up to sign.

    Labels use the coordinate symbols. Groups appear in row-major order of
    their first member, which also fixes the sign of the value shown.
    """
    obj, idx, cid, arr = _representation(session, tensor_id, indices, coords, post_fn)
    groups = listing_groups(session, arr)
    header = f"{tensor_id}:"
    if not groups:
        return f"{header}\nNo non-zero elements."
    names = [x.name for x in session.coord_symbols(cid)]
    opts = session.display_options(style)
    lines = [header]
    for value, members in groups:
        labels = []
        for pos, sign in members:
            lab = index_decoration(obj.symbol, [names[i] for i in pos], idx, style)
            labels.append(lab if sign > 0 else "-" + lab)
        lines.append(" = ".join(labels) + " = " + format_expr(value, style, opts))
    return "\n".join(lines)


def listing_groups(session: Session, arr: np.ndarray) -> list:
    """``[(value, [(index tuple, ±1), ...]), ...]`` over the nonzero entries."""
    groups = []
    for pos in np.ndindex(arr.shape):
        v = arr[pos]
        if v == core.ZERO:
            continue
        for value, members in groups:
            s = _same_up_to_sign(session, v, value)
            if s:
                members.append((pos, s))
                break
        else:
            groups.append((v, [(pos, 1)]))
    return groups


def _same_up_to_sign(session, a: Expr, b: Expr) -> int:
    if a == b:
        return 1
    if a == core.neg(b):
        return -1
    # the numeric test only when the two could plausibly match
    if core.free_symbols(a) != core.free_symbols(b):
        return 0
    return sign_match(a, b, session.assumptions)


def _grid(cells: list) -> list:
    widths = [max(len(r[j]) for r in cells) for j in range(len(cells[0]))]
    return ["[ " + "  ".join(c.rjust(w) for c, w in zip(row, widths)) + " ]" for row in cells]


def show(session: Session, tensor_id: str, indices=None, coords: str | None = None,
         post_fn: Callable | None = None, style: str = "plain") -> str:
    """Render a tensor with its index letters and coordinate arguments.

    Scalars print inline, vectors as a column and matrices as a grid; higher
    ranks fall back to the component listing.
    """
    obj, idx, cid, arr = _representation(session, tensor_id, indices, coords, post_fn)
    letters = session.options.index_letters
    labels = [letters[i % len(letters)] for i in range(len(idx))]
    xs = session.coord_symbols(cid)
    opts = session.display_options(style)
    head = index_decoration(obj.symbol, labels, idx, style)
    args = ", ".join(format_expr(x, style, opts) for x in xs)
    head = f"{head}({args})" if style == "plain" else rf"{head}\left({args}\right)"
    fmt = lambda e: format_expr(e, style, opts)  # noqa: E731
    if arr.ndim == 0:
        return f"{head} = {fmt(arr[()])}"
    if style == "latex":
        if arr.ndim == 1:
            body = r" \\ ".join(fmt(e) for e in arr)
        elif arr.ndim == 2:
            body = r" \\ ".join(" & ".join(fmt(e) for e in row) for row in arr)
        else:
            return head + "\n" + list_components(session, tensor_id, idx, cid, post_fn, style)
        return rf"{head} = \begin{{pmatrix}} {body} \end{{pmatrix}}"
    if arr.ndim == 1:
        return head + " =\n" + "\n".join(_grid([[fmt(e)] for e in arr]))
    if arr.ndim == 2:
        return head + " =\n" + "\n".join(_grid([[fmt(e) for e in row] for row in arr]))
    listing = list_components(session, tensor_id, idx, cid, post_fn, style)
    return head + " =\n" + listing.split("\n", 1)[1]
