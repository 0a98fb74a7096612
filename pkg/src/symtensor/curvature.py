"""Curvature tensors of a metric, plus line and volume elements.

Conventions (slot order as in the definitions below):

    Γ^λ_{μν}  = ½ g^{λσ} (∂_μ g_{νσ} + ∂_ν g_{σμ} − ∂_σ g_{μν})
    R^ρ_{σμν} = ∂_μ Γ^ρ_{νσ} − ∂_ν Γ^ρ_{μσ} + Γ^ρ_{μλ} Γ^λ_{νσ} − Γ^ρ_{νλ} Γ^λ_{μσ}
    R_{μν}    = R^λ_{μλν}
    R         = g^{μν} R_{μν}
    G_{μν}    = R_{μν} − ½ g_{μν} R

Each stage reuses the previous stage's object when it already exists.
"""

from __future__ import annotations

import numpy as np

from .registry import Role, Session, derived_id
from .symexpr import core
from .symexpr.core import Expr, Sym, diff
from .symexpr.simplify import simplify
from .transform import determinant, represent

SYMBOLS = {
    Role.CHRISTOFFEL: "Γ",
    Role.RIEMANN: "R",
    Role.RICCI_TENSOR: "R",
    Role.RICCI_SCALAR: "R",
    Role.EINSTEIN: "G",
}


def _setup(session: Session, metric_id: str):
    g_obj = session.metric(metric_id)
    coords = g_obj.default_coords
    xs = session.coord_symbols(coords)
    return coords, xs


def _existing(session: Session, metric_id: str, role: str):
    tid = derived_id(metric_id, role)
    obj = session.objects.get(tid)
    if obj is not None and obj.role == role and obj.metric == metric_id:
        return tid
    return None


def christoffel(session: Session, metric_id: str) -> str:
    """Levi-Civita connection coefficients, stored as "<metric>Christoffel"."""
    coords, xs = _setup(session, metric_id)
    g = represent(session, metric_id, (-1, -1), coords)
    ginv = represent(session, metric_id, (1, 1), coords)
    n = len(xs)
    # dg[s, m, v] = ∂_s g_{mv}
    dg = np.empty((n, n, n), dtype=object)
    for s in range(n):
        for m in range(n):
            for v in range(m, n):
                d = diff(g[m, v], xs[s])
                dg[s, m, v] = dg[s, v, m] = d
    out = np.empty((n, n, n), dtype=object)
    for lam in range(n):
        for m in range(n):
            for v in range(m, n):
                terms = []
                for s in range(n):
                    if ginv[lam, s] == core.ZERO:
                        continue
                    inner = core.add(dg[m, v, s], dg[v, s, m], core.neg(dg[s, m, v]))
                    if inner != core.ZERO:
                        terms.append(core.mul(ginv[lam, s], inner))
                out[lam, m, v] = out[lam, v, m] = core.mul(core.HALF, core.add(*terms))
    out = session.simplify_array(out)
    session.stats["christoffel"] = session.stats.get("christoffel", 0) + 1
    tid = derived_id(metric_id, Role.CHRISTOFFEL)
    return session.store_derived(tid, Role.CHRISTOFFEL, metric_id, coords, (1, -1, -1), out,
                                 SYMBOLS[Role.CHRISTOFFEL])


def _christoffel_in(session, metric_id, coords):
    tid = _existing(session, metric_id, Role.CHRISTOFFEL) or christoffel(session, metric_id)
    return represent(session, tid, (1, -1, -1), coords)


def riemann(session: Session, metric_id: str) -> str:
    """Riemann tensor R^ρ_{σμν}, stored as "<metric>Riemann"."""
    coords, xs = _setup(session, metric_id)
    gam = _christoffel_in(session, metric_id, coords)
    n = len(xs)
    # dgam[m, r, v, s] = ∂_m Γ^r_{vs}
    dgam = np.empty((n, n, n, n), dtype=object)
    for m in range(n):
        for r in range(n):
            for v in range(n):
                for s in range(v, n):
                    d = diff(gam[r, v, s], xs[m])
                    dgam[m, r, v, s] = dgam[m, r, s, v] = d
    out = np.empty((n, n, n, n), dtype=object)
    for r in range(n):
        for s in range(n):
            for m in range(n):
                out[r, s, m, m] = core.ZERO
                for v in range(m + 1, n):
                    terms = [dgam[m, r, v, s], core.neg(dgam[v, r, m, s])]
                    for lam in range(n):
                        a, b = gam[r, m, lam], gam[lam, v, s]
                        if a != core.ZERO and b != core.ZERO:
                            terms.append(core.mul(a, b))
                        a, b = gam[r, v, lam], gam[lam, m, s]
                        if a != core.ZERO and b != core.ZERO:
                            terms.append(core.neg(core.mul(a, b)))
                    e = core.add(*terms)
                    out[r, s, m, v] = e
                    out[r, s, v, m] = core.neg(e)
    out = session.simplify_array(out)
    session.stats["riemann"] = session.stats.get("riemann", 0) + 1
    tid = derived_id(metric_id, Role.RIEMANN)
    return session.store_derived(tid, Role.RIEMANN, metric_id, coords, (1, -1, -1, -1), out,
                                 SYMBOLS[Role.RIEMANN])


def ricci_tensor(session: Session, metric_id: str) -> str:
    """R_{μν} = R^λ_{μλν}, stored as "<metric>RicciTensor"."""
    coords, xs = _setup(session, metric_id)
    rid = _existing(session, metric_id, Role.RIEMANN) or riemann(session, metric_id)
    riem = represent(session, rid, (1, -1, -1, -1), coords)
    n = len(xs)
    out = np.empty((n, n), dtype=object)
    for m in range(n):
        for v in range(n):
            out[m, v] = core.add(*[riem[lam, m, lam, v] for lam in range(n)])
    out = session.simplify_array(out)
    session.stats["ricci"] = session.stats.get("ricci", 0) + 1
    tid = derived_id(metric_id, Role.RICCI_TENSOR)
    return session.store_derived(tid, Role.RICCI_TENSOR, metric_id, coords, (-1, -1), out,
                                 SYMBOLS[Role.RICCI_TENSOR])


def _ricci_in(session, metric_id, coords):
    tid = _existing(session, metric_id, Role.RICCI_TENSOR) or ricci_tensor(session, metric_id)
    return represent(session, tid, (-1, -1), coords)


def ricci_scalar(session: Session, metric_id: str) -> str:
    """R = g^{μν} R_{μν}, stored as "<metric>RicciScalar"."""
    coords, xs = _setup(session, metric_id)
    ric = _ricci_in(session, metric_id, coords)
    ginv = represent(session, metric_id, (1, 1), coords)
    n = len(xs)
    terms = [core.mul(ginv[m, v], ric[m, v]) for m in range(n) for v in range(n)
             if ginv[m, v] != core.ZERO and ric[m, v] != core.ZERO]
    arr = np.empty((), dtype=object)
    arr[()] = session.simplify(core.add(*terms))
    tid = derived_id(metric_id, Role.RICCI_SCALAR)
    return session.store_derived(tid, Role.RICCI_SCALAR, metric_id, coords, (), arr,
                                 SYMBOLS[Role.RICCI_SCALAR])


def einstein(session: Session, metric_id: str) -> str:
    """G_{μν} = R_{μν} − ½ g_{μν} R, stored as "<metric>Einstein"."""
    coords, xs = _setup(session, metric_id)
    ric = _ricci_in(session, metric_id, coords)
    sid = _existing(session, metric_id, Role.RICCI_SCALAR) or ricci_scalar(session, metric_id)
    rs = represent(session, sid, (), coords)[()]
    g = represent(session, metric_id, (-1, -1), coords)
    n = len(xs)
    out = np.empty((n, n), dtype=object)
    half_r = core.mul(core.HALF, rs)
    for m in range(n):
        for v in range(n):
            out[m, v] = core.sub(ric[m, v], core.mul(g[m, v], half_r))
    out = session.simplify_array(out)
    tid = derived_id(metric_id, Role.EINSTEIN)
    return session.store_derived(tid, Role.EINSTEIN, metric_id, coords, (-1, -1), out,
                                 SYMBOLS[Role.EINSTEIN])


def differential(x: Sym) -> Sym:
    return Sym("d" + x.name)


def line_element(session: Session, metric_id: str, coords_id: str | None = None) -> Expr:
    """Σ g_{μν} dx^μ dx^ν with the differentials as plain symbols."""
    coords = coords_id or session.metric(metric_id).default_coords
    g = represent(session, metric_id, (-1, -1), coords)
    xs = session.coord_symbols(coords)
    dx = [differential(x) for x in xs]
    terms = []
    n = len(xs)
    for m in range(n):
        for v in range(m, n):
            c = g[m, v] if m == v else core.mul(core.num(2), g[m, v])
            if c == core.ZERO:
                continue
            c = session.simplify(c)
            terms.append(core.mul(c, dx[m], dx[v]))
    return core.add(*terms)


def volume_element_squared(session: Session, metric_id: str, coords_id: str | None = None) -> Expr:
    """The determinant of the metric in the chosen coordinates."""
    coords = coords_id or session.metric(metric_id).default_coords
    g = represent(session, metric_id, (-1, -1), coords)
    return session.simplify(determinant(g))


def _clear_christoffel_caches(session: Session, metric_id: str):
    cid = derived_id(metric_id, Role.CHRISTOFFEL)
    if cid in session.objects and session.objects[cid].role == Role.CHRISTOFFEL:
        del session.objects[cid]
    g = session.metric(metric_id)
    key = (g.default_indices, g.default_coords)
    g.components = {key: g.components[key]}


def benchmark_christoffel(session: Session, metric_id: str, repeat: int = 3,
                          workers: int | None = None) -> dict:
    """Median wall times of the Christoffel computation without and with worker processes.

    Caches are cleared before each run and the session's parallel settings
    are restored afterwards.
    """
    import statistics
    import time

    from .parallel import default_workers, warm_up
    workers = workers or default_workers()
    saved = (session.options.parallelize, session.options.workers)
    times = {}
    try:
        for label, par, w in (("serial", False, 1), ("parallel", True, workers)):
            session.options.parallelize, session.options.workers = par, w
            if par:
                warm_up(w)
            runs = []
            for _ in range(repeat):
                _clear_christoffel_caches(session, metric_id)
                t0 = time.perf_counter()
                christoffel(session, metric_id)
                runs.append(time.perf_counter() - t0)
            times[label] = statistics.median(runs)
    finally:
        session.options.parallelize, session.options.workers = saved
    return {"workers": workers, "serial": times["serial"], "parallel": times["parallel"],
            "ratio": times["parallel"] / times["serial"] if times["serial"] else float("inf")}
