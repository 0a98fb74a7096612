"""Curve Lagrangians and geodesic equations.

Coordinates are promoted to functions of the curve parameter, x -> x(λ), and
their derivatives x'(λ), x''(λ) appear as derivative nodes. The Euler-Lagrange
form keeps the total λ-derivative deferred until activated.
"""

from __future__ import annotations

import numpy as np

from .errors import CollidesWithCoordinate, InvalidId
from .registry import DEFAULT_CURVE_PARAMETER, Role, Session, derived_id
from .symexpr import core
from .symexpr.core import (Expr, Func, Sym, SubstitutionRule, activate_expr, deferred, diff,
                           diff_wrt, substitute)
from .transform import map_array, represent

LAGRANGIAN_SYMBOL = "L"
GEODESIC_SYMBOL = "0"


def curve_parameter(session: Session) -> Sym:
    return Sym(session.options.curve_parameter)


def promotion_rules(xs, lam: Sym) -> list:
    return [SubstitutionRule(x, Func(x.name, (lam,))) for x in xs]


def velocity(x: Sym, lam: Sym, order: int = 1) -> Expr:
    return core.deriv(x.name, (lam,), (order,))


def _coords_for(session: Session, metric_id: str, coords_id: str | None) -> str:
    return coords_id or session.metric(metric_id).default_coords


def _store(session, metric_id, role, coords, indices, arr, symbol):
    tid = derived_id(metric_id, role)
    return session.store_derived(tid, role, metric_id, coords, indices, arr, symbol)


def lagrangian_expr(session: Session, metric_id: str, coords_id: str | None = None) -> Expr:
    coords = _coords_for(session, metric_id, coords_id)
    g = represent(session, metric_id, (-1, -1), coords)
    xs = session.coord_symbols(coords)
    lam = curve_parameter(session)
    rules = promotion_rules(xs, lam)
    vel = [velocity(x, lam) for x in xs]
    n = len(xs)
    terms = []
    for m in range(n):
        for v in range(n):
            if g[m, v] != core.ZERO:
                terms.append(core.mul(substitute(g[m, v], rules), vel[m], vel[v]))
    return session.simplify(core.add(*terms))


def lagrangian(session: Session, metric_id: str, coords_id: str | None = None) -> str:
    """The curve Lagrangian g_{μν} ẋ^μ ẋ^ν, stored as "<metric>Lagrangian"."""
    coords = _coords_for(session, metric_id, coords_id)
    arr = np.empty((), dtype=object)
    arr[()] = lagrangian_expr(session, metric_id, coords)
    return _store(session, metric_id, Role.LAGRANGIAN, coords, (), arr, LAGRANGIAN_SYMBOL)


def geodesic_from_lagrangian(session: Session, metric_id: str, coords_id: str | None = None) -> str:
    """Euler-Lagrange expressions ½∂L/∂x^μ − d/dλ(½∂L/∂ẋ^μ), the λ-derivative deferred."""
    coords = _coords_for(session, metric_id, coords_id)
    L = lagrangian_expr(session, metric_id, coords)
    xs = session.coord_symbols(coords)
    lam = curve_parameter(session)
    out = np.empty((len(xs),), dtype=object)
    for i, x in enumerate(xs):
        pos = session.simplify(core.mul(core.HALF, diff_wrt(L, Func(x.name, (lam,)))))
        mom = session.simplify(core.mul(core.HALF, diff_wrt(L, velocity(x, lam))))
        out[i] = core.sub(pos, deferred(mom, lam)) if mom != core.ZERO else pos
    return _store(session, metric_id, Role.GEODESIC_LAGRANGIAN, coords, (1,), out, GEODESIC_SYMBOL)


def geodesic_from_christoffel(session: Session, metric_id: str, coords_id: str | None = None) -> str:
    """ẍ^σ + Γ^σ_{μν} ẋ^μ ẋ^ν, stored as "<metric>GeodesicFromChristoffel"."""
    from .curvature import christoffel
    coords = _coords_for(session, metric_id, coords_id)
    cid = derived_id(metric_id, Role.CHRISTOFFEL)
    if cid not in session.objects:
        christoffel(session, metric_id)
    gam = represent(session, cid, (1, -1, -1), coords)
    xs = session.coord_symbols(coords)
    lam = curve_parameter(session)
    rules = promotion_rules(xs, lam)
    vel = [velocity(x, lam) for x in xs]
    n = len(xs)
    out = np.empty((n,), dtype=object)
    for s in range(n):
        terms = [velocity(xs[s], lam, 2)]
        for m in range(n):
            for v in range(n):
                if gam[s, m, v] != core.ZERO:
                    terms.append(core.mul(substitute(gam[s, m, v], rules), vel[m], vel[v]))
        out[s] = core.add(*terms)
    out = session.simplify_array(out)
    return _store(session, metric_id, Role.GEODESIC_CHRISTOFFEL, coords, (1,), out, GEODESIC_SYMBOL)


def activate(session: Session, target, rules=None):
    """Evaluate deferred λ-derivatives.

    ``target`` is an expression (returned activated and simplified) or a
    tensor ID, in which case the activated components of its default
    representation are returned without modifying the stored object.
    Optional ``rules`` are substituted first.
    """
    def run(e):
        if rules:
            e = substitute(e, rules)
        return session.simplify(activate_expr(e))

    if isinstance(target, Expr):
        return run(target)
    obj = session.get(target)
    arr = represent(session, target, obj.default_indices, obj.default_coords)
    return map_array(run, arr)


def set_curve_parameter(session: Session, symbol=None) -> str:
    """Change the curve parameter and rewrite existing curve objects; None resets to λ."""
    new = DEFAULT_CURVE_PARAMETER if symbol is None else (symbol.name if isinstance(symbol, Sym) else str(symbol))
    if not new.isidentifier() and not new.replace("_", "a").isalnum():
        raise InvalidId(f"{new!r} is not a valid symbol name")
    for obj in session.objects.values():
        if obj.role == Role.COORDINATES and any(x.name == new for x in obj.coord_symbols):
            raise CollidesWithCoordinate(
                f'The curve parameter "{new}" is a coordinate symbol of "{obj.id}".')
    old = session.options.curve_parameter
    if new == old:
        return new
    rule = [SubstitutionRule(Sym(old), Sym(new))]
    for obj in session.objects.values():
        if obj.role in Role.CURVE:
            obj.components = {k: map_array(lambda e: substitute(e, rule), v)
                              for k, v in obj.components.items()}
    session.options.curve_parameter = new
    if old in session.options.reserved_symbols:
        session.options.reserved_symbols.remove(old)
    if new not in session.options.reserved_symbols:
        session.options.reserved_symbols.append(new)
    return new
