import itertools

import numpy as np
import pytest

from symtensor import curvature
from symtensor.calc import calc
from symtensor.errors import UnknownMetric
from symtensor.registry import Session, diag
from symtensor.symexpr import core, parse_expr
from symtensor.transform import represent
from walkthrough import FLRW, SCHWARZSCHILD

P = parse_expr


def same(s, a, b):
    b = P(b) if isinstance(b, str) else core.as_expr(b)
    return s.is_zero(core.sub(core.as_expr(a), b))


def all_zero(s, arr):
    return all(s.is_zero(e) for e in np.asarray(arr).flat)


def spherical_session():
    s = Session()
    s.new_coordinates("Spherical", ["t", "r", "θ", "φ"])
    s.set_reserved_symbols(["M"])
    s.new_metric("Schwarzschild", "Spherical", SCHWARZSCHILD)
    s.new_metric("FLRW", "Spherical", FLRW)
    return s


@pytest.fixture(scope="module")
def spacetimes():
    s = spherical_session()
    for g in ("Schwarzschild", "FLRW"):
        curvature.einstein(s, g)
    return s


@pytest.fixture
def minkowski():
    s = Session()
    s.new_coordinates("Cartesian", ["t", "x", "y", "z"])
    s.new_metric("Minkowski", "Cartesian", diag(-1, 1, 1, 1), "η")
    return s


T, R, TH, PH = range(4)


def test_schwarzschild_christoffel(spacetimes):
    s = spacetimes
    G = represent(s, "SchwarzschildChristoffel", (1, -1, -1), "Spherical")
    assert s.get("SchwarzschildChristoffel").default_indices == (1, -1, -1)
    assert same(s, G[T, T, R], "M/(r*(r - 2*M))")
    assert G[T, T, R] == G[T, R, T]
    assert same(s, G[R, T, T], "M*(r - 2*M)/r^3")
    assert same(s, G[R, TH, TH], "2*M - r")
    assert same(s, G[TH, PH, PH], "-cos(θ)*sin(θ)")
    assert same(s, G[PH, TH, PH], "cot(θ)")


def test_simple_metric_has_two_unique_symbols():
    s = Session()
    s.new_coordinates("Cartesian", ["t", "x", "y", "z"])
    s.new_metric("SimpleMetric", "Cartesian", diag("-x", 1, 1, 1))
    curvature.christoffel(s, "SimpleMetric")
    G = represent(s, "SimpleMetricChristoffel", (1, -1, -1), "Cartesian")
    nonzero = {(i, min(j, k), max(j, k)): G[i, j, k] for i, j, k in itertools.product(range(4), repeat=3)
               if G[i, j, k] != core.ZERO}
    assert set(nonzero) == {(0, 0, 1), (1, 0, 0)}
    assert same(s, nonzero[(0, 0, 1)], "1/(2*x)")
    assert same(s, nonzero[(1, 0, 0)], "1/2")


def test_flat_space_is_flat(minkowski):
    for fn in (curvature.christoffel, curvature.riemann, curvature.ricci_tensor, curvature.einstein):
        tid = fn(minkowski, "Minkowski")
        obj = minkowski.get(tid)
        assert all_zero(minkowski, represent(minkowski, tid, obj.default_indices, "Cartesian"))
    assert same(minkowski, curvature.line_element(minkowski, "Minkowski"), "-dt^2 + dx^2 + dy^2 + dz^2")
    assert curvature.volume_element_squared(minkowski, "Minkowski") == core.num(-1)


def test_schwarzschild_riemann(spacetimes):
    s = spacetimes
    up = represent(s, "SchwarzschildRiemann", (1, -1, -1, -1), "Spherical")
    assert same(s, up[T, R, T, R], "2*M/(r^2*(r - 2*M))")
    assert same(s, up[T, R, R, T], "-2*M/(r^2*(r - 2*M))")
    low = represent(s, "SchwarzschildRiemann", (-1, -1, -1, -1), "Spherical")
    assert same(s, low[T, R, T, R], "-2*M/r^3")


def test_flrw_riemann(spacetimes):
    up = represent(spacetimes, "FLRWRiemann", (1, -1, -1, -1), "Spherical")
    assert same(spacetimes, up[T, R, T, R], "a(t)*a''(t)/(1 - k*r^2)")


@pytest.mark.parametrize("metric", ["Schwarzschild", "FLRW"])
def test_riemann_symmetries(spacetimes, metric):
    s = spacetimes
    low = represent(s, metric + "Riemann", (-1, -1, -1, -1), "Spherical")
    for a, b, c, d in itertools.product(range(4), repeat=4):
        v = low[a, b, c, d]
        assert s.is_zero(core.add(v, low[b, a, c, d]))
        assert s.is_zero(core.add(v, low[a, b, d, c]))
        assert s.is_zero(core.sub(v, low[c, d, a, b]))


def test_vacuum_ricci_and_einstein(spacetimes):
    s = spacetimes
    assert all_zero(s, represent(s, "SchwarzschildRicciTensor", (-1, -1), "Spherical"))
    assert all_zero(s, represent(s, "SchwarzschildEinstein", (-1, -1), "Spherical"))


def test_flrw_ricci_and_einstein(spacetimes):
    s = spacetimes
    ric = represent(s, "FLRWRicciTensor", (-1, -1), "Spherical")
    assert same(s, ric[T, T], "-3*a''(t)/a(t)")
    assert same(s, ric[R, R], "(2*(k + a'(t)^2) + a(t)*a''(t))/(1 - k*r^2)")
    scalar = represent(s, "FLRWRicciScalar", (), "Spherical")[()]
    assert same(s, scalar, "6*(k + a'(t)^2 + a(t)*a''(t))/a(t)^2")
    G = represent(s, "FLRWEinstein", (-1, -1), "Spherical")
    assert same(s, G[T, T], "3*(k + a'(t)^2)/a(t)^2")
    assert same(s, G[TH, TH], "-r^2*(k + a'(t)^2 + 2*a(t)*a''(t))")


def test_stage_reuse():
    s = spherical_session()
    curvature.christoffel(s, "Schwarzschild")
    assert s.stats["christoffel"] == 1
    curvature.riemann(s, "Schwarzschild")
    curvature.einstein(s, "Schwarzschild")
    assert s.stats["christoffel"] == 1
    assert s.stats["riemann"] == 1


def test_einstein_builds_missing_stages():
    s = spherical_session()
    curvature.einstein(s, "Schwarzschild")
    for role in ("Christoffel", "Riemann", "RicciTensor", "RicciScalar", "Einstein"):
        assert "Schwarzschild" + role in s


def test_manual_christoffel_matches_builtin():
    s = spherical_session()
    curvature.christoffel(s, "Schwarzschild")
    calc(s, '1/2 "Schwarzschild"["λσ"].(PartialD["μ"]."Schwarzschild"["νσ"] + '
            'PartialD["ν"]."Schwarzschild"["σμ"] - PartialD["σ"]."Schwarzschild"["μν"])',
         "Manual", target_indices="λμν")
    manual = represent(s, "Manual", (1, -1, -1), "Spherical")
    builtin = represent(s, "SchwarzschildChristoffel", (1, -1, -1), "Spherical")
    for idx in np.ndindex(manual.shape):
        assert s.is_zero(core.sub(manual[idx], builtin[idx]))


def test_kretschmann_from_scratch(spacetimes):
    calc(spacetimes, '"SchwarzschildRiemann"["ρσμν"]."SchwarzschildRiemann"["ρσμν"]', "KFromScratch")
    k = represent(spacetimes, "KFromScratch", (), "Spherical")[()]
    assert same(spacetimes, k, "48*M^2/r^6")
    spacetimes.delete("KFromScratch")


def test_metric_compatibility(spacetimes):
    for g in ("Schwarzschild", "FLRW"):
        calc(spacetimes, f'CovariantD["μ"]."{g}"["αβ"]', "Compat")
        assert all_zero(spacetimes, represent(spacetimes, "Compat", (-1, -1, -1), "Spherical"))
        spacetimes.delete("Compat")


def test_line_elements(spacetimes):
    s = spacetimes
    le = curvature.line_element(s, "Schwarzschild")
    assert same(s, le, "dr^2/(1 - 2*M/r) + (-1 + 2*M/r)*dt^2 + r^2*dθ^2 + r^2*sin(θ)^2*dφ^2")


def test_alcubierre_line_element():
    s = Session()
    s.new_coordinates("Cartesian", ["t", "x", "y", "z"])
    s.new_metric("Alcubierre", "Cartesian", [["-1 + v(t)^2*f(t,x,y,z)^2", 0, 0, "-v(t)*f(t,x,y,z)"],
                                             [0, 1, 0, 0], [0, 0, 1, 0],
                                             ["-v(t)*f(t,x,y,z)", 0, 0, 1]])
    le = curvature.line_element(s, "Alcubierre")
    expected = "dx^2 + dy^2 + dz^2 - 2*f(t,x,y,z)*v(t)*dt*dz + (-1 + f(t,x,y,z)^2*v(t)^2)*dt^2"
    assert same(s, le, expected)


def test_volume_elements(spacetimes):
    s = spacetimes
    assert same(s, curvature.volume_element_squared(s, "Schwarzschild"), "-r^4*sin(θ)^2")
    assert same(s, curvature.volume_element_squared(s, "FLRW"), "r^4*a(t)^6*sin(θ)^2/(k*r^2 - 1)")


def test_unknown_metric(spacetimes):
    with pytest.raises(UnknownMetric):
        curvature.christoffel(spacetimes, "Spherical")
