"""The representation engine.

Any (index configuration, coordinate system) representation of a tensor is
produced from a cached one: a coordinate change first, using the Jacobians of
a direct transformation edge, then index moves with the metric in the target
coordinates. Christoffel symbols pick up the inhomogeneous second-derivative
term when changing coordinates.
"""

from __future__ import annotations

import numpy as np

from . import errors
from .errors import NoTransformPath, RankMismatch, Singular
from .registry import Role, Session, TensorObject
from .symexpr import core
from .symexpr.assumptions import Assumptions, Sampler, concretize, is_zero
from .symexpr.core import Expr, Num, Sym, SubstitutionRule, diff, substitute
from .symexpr.numeric import Evaluator
from .symexpr.simplify import simplify
from .errors import DomainError


# ---------------------------------------------------------------------------
# matrix helpers


def identity(n: int) -> np.ndarray:
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            out[i, j] = core.ONE if i == j else core.ZERO
    return out


def zeros(shape) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    out.reshape(-1)[:] = [core.ZERO] * out.size
    return out


def determinant(m: np.ndarray) -> Expr:
    """Symbolic determinant by cofactor expansion over column subsets (memoized)."""
    n = m.shape[0]
    memo: dict = {}

    def minor(row: int, cols: tuple) -> Expr:
        if row == n:
            return core.ONE
        key = (row, cols)
        if key in memo:
            return memo[key]
        terms = []
        for k, c in enumerate(cols):
            a = m[row, c]
            if a == core.ZERO:
                continue
            sub = minor(row + 1, cols[:k] + cols[k + 1:])
            if sub == core.ZERO:
                continue
            term = core.mul(a, sub)
            terms.append(term if k % 2 == 0 else core.neg(term))
        r = core.add(*terms)
        memo[key] = r
        return r

    return minor(0, tuple(range(n)))


def _sample_matrix(m: np.ndarray, assumptions: Assumptions, n_points: int = 12):
    entries = [concretize(e) for e in m.reshape(-1)]
    names = set()
    for e in entries:
        names |= {s.name for s in core.free_symbols(e)}
    sampler = Sampler(assumptions, seed=777)
    for point in sampler.points(names, n_points * 5):
        ev = Evaluator(point)
        try:
            vals = np.array([ev(e) for e in entries], dtype=float).reshape(m.shape)
        except (DomainError, ZeroDivisionError, OverflowError):
            continue
        yield vals
        n_points -= 1
        if n_points == 0:
            return


def numerically_singular(m: np.ndarray, assumptions: Assumptions) -> bool:
    """True if the determinant vanishes at every sampled admissible point."""
    seen = False
    for vals in _sample_matrix(m, assumptions):
        seen = True
        scale = max(1.0, float(np.max(np.abs(vals)))) ** m.shape[0]
        if abs(np.linalg.det(vals)) > 1e-9 * scale:
            return False
    if not seen:
        raise errors.UnresolvableSample("could not find a point where the matrix entries are defined")
    return True


def invert_matrix(g: np.ndarray, assumptions: Assumptions = Assumptions()) -> np.ndarray:
    """Symbolic inverse by Gauss-Jordan elimination with zero-tested pivots."""
    n = g.shape[0]
    a = [[g[i, j] for j in range(n)] for i in range(n)]
    inv = [[core.ONE if i == j else core.ZERO for j in range(n)] for i in range(n)]

    def nonzero(e):
        if isinstance(e, Num):
            return e.value != 0
        return not is_zero(e, assumptions)

    for col in range(n):
        pivot = None
        # prefer numeric pivots, then the structurally smallest nonzero entry
        candidates = [r for r in range(col, n) if a[r][col] != core.ZERO]
        candidates.sort(key=lambda r: (not isinstance(a[r][col], Num), core.node_count(a[r][col])))
        for r in candidates:
            if nonzero(a[r][col]):
                pivot = r
                break
        if pivot is None:
            raise Singular("the matrix is not invertible")
        a[col], a[pivot] = a[pivot], a[col]
        inv[col], inv[pivot] = inv[pivot], inv[col]
        p = a[col][col]
        if p != core.ONE:
            pinv = core.power(p, -1)
            a[col] = [simplify(core.mul(x, pinv), assumptions) for x in a[col]]
            inv[col] = [simplify(core.mul(x, pinv), assumptions) for x in inv[col]]
        for r in range(n):
            if r == col:
                continue
            f = a[r][col]
            if f == core.ZERO:
                continue
            a[r] = [simplify(core.sub(x, core.mul(f, y)), assumptions) for x, y in zip(a[r], a[col])]
            inv[r] = [simplify(core.sub(x, core.mul(f, y)), assumptions) for x, y in zip(inv[r], inv[col])]
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            out[i, j] = inv[i][j]
    return out


def apply_on_slot(m: np.ndarray, arr: np.ndarray, slot: int) -> np.ndarray:
    """new[..., a', ...] = sum_a m[a', a] * arr[..., a, ...] on the given slot."""
    n = m.shape[0]
    moved = np.moveaxis(arr, slot, 0)
    out = np.empty(moved.shape, dtype=object)
    rest = moved.reshape(n, -1)
    flat = out.reshape(n, -1)
    for i in range(n):
        row = [(m[i, k], rest[k]) for k in range(n) if m[i, k] != core.ZERO]
        for c in range(rest.shape[1]):
            terms = [core.mul(coef, vec[c]) for coef, vec in row if vec[c] != core.ZERO]
            flat[i, c] = core.add(*terms)
    return np.moveaxis(out, 0, slot)


def map_array(fn, arr: np.ndarray) -> np.ndarray:
    out = np.empty(arr.shape, dtype=object)
    src = arr.reshape(-1)
    dst = out.reshape(-1)
    for i, e in enumerate(src):
        dst[i] = fn(e)
    return out


# ---------------------------------------------------------------------------
# coordinate transformations


def add_coord_transformation(session: Session, source_id: str, target_id: str, rules) -> None:
    """Store rules expressing the source coordinates in terms of the target ones."""
    src = session.coords(source_id)
    tgt = session.coords(target_id)
    if len(src.coord_symbols) != len(tgt.coord_symbols):
        raise errors.DimensionMismatch(
            f'"{source_id}" and "{target_id}" have different dimensions')
    if isinstance(rules, dict):
        rules = [SubstitutionRule(k, v) for k, v in rules.items()]
    rules = [r if isinstance(r, SubstitutionRule) else SubstitutionRule(*r) for r in rules]
    mapping = {}
    for r in rules:
        target = r.target if not isinstance(r.target, str) else Sym(r.target)
        if target not in src.coord_symbols:
            raise errors.RuleTargetsNonSourceSymbol(
                f'rule target {target} is not a coordinate of "{source_id}"')
        mapping[target] = r.replacement
    exprs = [mapping.get(s, s) for s in src.coord_symbols]
    tsyms = tgt.coord_symbols
    a = session.assumptions
    n = len(exprs)
    jac = np.empty((n, n), dtype=object)
    d2 = np.empty((n, n, n), dtype=object)
    for i, e in enumerate(exprs):
        for j, s in enumerate(tsyms):
            jac[i, j] = simplify(diff(e, s), a)
    for i in range(n):
        for j in range(n):
            for k in range(j, n):
                v = simplify(diff(jac[i, j], tsyms[k]), a)
                d2[i, j, k] = v
                d2[i, k, j] = v
    jinv = invert_matrix(jac, a)
    src.transformations[target_id] = [SubstitutionRule(s, mapping[s]) for s in src.coord_symbols if s in mapping]
    src.jacobians[target_id] = {"Jacobian": jac, "InverseJacobian": jinv, "ChristoffelJacobian": d2}
    session.notify(f'Added a coordinate transformation from "{source_id}" to "{target_id}".')


def transform_array(session: Session, arr: np.ndarray, indices: tuple, source_id: str,
                    target_id: str, christoffel: bool = False) -> np.ndarray:
    src = session.coords(source_id)
    if target_id not in src.transformations:
        raise NoTransformPath(
            f'No transformation rules have been defined from "{source_id}" to "{target_id}".')
    rules = src.transformations[target_id]
    jac = src.jacobians[target_id]
    J, Jinv, d2 = jac["Jacobian"], jac["InverseJacobian"], jac["ChristoffelJacobian"]
    out = map_array(lambda e: substitute(e, rules), arr)
    for slot, pos in enumerate(indices):
        out = apply_on_slot(Jinv if pos == 1 else J.T, out, slot)
    if christoffel:
        n = J.shape[0]
        extra = np.empty(out.shape, dtype=object)
        for lp in range(n):
            for mp in range(n):
                for np_ in range(n):
                    extra[lp, mp, np_] = core.add(*[core.mul(Jinv[lp, l], d2[l, mp, np_])
                                                    for l in range(n) if Jinv[lp, l] != core.ZERO])
        out = out + extra
    return session.simplify_array(out)


# ---------------------------------------------------------------------------
# representations


def _metric_rep(session: Session, metric_id: str, indices: tuple, coords_id: str) -> np.ndarray:
    obj = session.metric(metric_id)
    key = (indices, coords_id)
    if key in obj.components:
        return obj.components[key]
    n = session.dim_of(coords_id)
    if indices in ((1, -1), (-1, 1)):
        arr = identity(n)
    elif indices == (1, 1):
        low = _metric_rep(session, metric_id, (-1, -1), coords_id)
        arr = invert_matrix(low, session.assumptions)
    else:
        arr = _transform_from_cache(session, obj, (-1, -1), coords_id)
    obj.components[key] = arr
    return arr


def _pick_source(session: Session, obj: TensorObject, coords_id: str) -> str:
    cached_coords = list(dict.fromkeys(k[1] for k in obj.components))
    order = [obj.default_coords] if obj.default_coords in cached_coords else []
    order += [c for c in cached_coords if c != obj.default_coords]
    for c in order:
        if c in session.objects and coords_id in session.coords(c).transformations:
            return c
    raise NoTransformPath(
        f'The tensor "{obj.id}" cannot be transformed to "{coords_id}": no direct transformation '
        f'rules lead there from any coordinate system it is stored in.')


def _transform_from_cache(session: Session, obj: TensorObject, indices: tuple, coords_id: str) -> np.ndarray:
    """A representation in ``coords_id`` with index configuration ``indices`` via a coordinate change."""
    src = _pick_source(session, obj, coords_id)
    src_arr = represent(session, obj.id, indices, src)
    return transform_array(session, src_arr, indices, src, coords_id,
                           christoffel=obj.role == Role.CHRISTOFFEL)


def move_indices(session: Session, metric_id: str, arr: np.ndarray, have: tuple, want: tuple,
                 coords_id: str) -> np.ndarray:
    out = arr
    for slot, (h, w) in enumerate(zip(have, want)):
        if h == w:
            continue
        g = _metric_rep(session, metric_id, (w, w), coords_id)
        out = apply_on_slot(g, out, slot)
    return out


def represent(session: Session, tensor_id: str, indices: tuple, coords_id: str) -> np.ndarray:
    """Return (and cache) the components of ``tensor_id`` in the requested representation."""
    obj = session.get(tensor_id)
    indices = tuple(indices)
    if len(indices) != obj.rank:
        raise RankMismatch(
            f'The tensor "{tensor_id}" has rank {obj.rank}, but {len(indices)} indices were requested.')
    session.coords(coords_id)
    key = (indices, coords_id)
    if key in obj.components:
        return obj.components[key]
    if obj.role == Role.COORDINATES:
        raise errors.RoleForbidden(
            f'The coordinate system "{tensor_id}" only has the representation with an upper index '
            f'in its own coordinates.')
    if obj.role == Role.METRIC:
        return _metric_rep(session, tensor_id, indices, coords_id)
    same = [k[0] for k in obj.components if k[1] == coords_id]
    if obj.role == Role.CHRISTOFFEL and not same:
        base = (1, -1, -1)
        arr = _transform_from_cache(session, obj, base, coords_id)
        obj.components[(base, coords_id)] = arr
    elif same:
        base = min(same, key=lambda c: sum(a != b for a, b in zip(c, indices)))
        arr = obj.components[(base, coords_id)]
    else:
        cached_in_src = None
        src = _pick_source(session, obj, coords_id)
        for k in obj.components:
            if k[1] == src:
                cached_in_src = k[0]
                if k[0] == obj.default_indices:
                    break
        base = cached_in_src
        arr = _transform_from_cache(session, obj, base, coords_id)
        obj.components[(base, coords_id)] = arr
    if base != indices:
        if obj.metric is None:
            raise errors.RoleForbidden(f'"{tensor_id}" has no metric to raise or lower indices with')
        arr = session.simplify_array(move_indices(session, obj.metric, arr, base, indices, coords_id))
        obj.components[key] = arr
    return obj.components[key]
