import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from symtensor.errors import NoTransformPath, RankMismatch, RoleForbidden
from symtensor.registry import Session, diag
from symtensor.symexpr import core, parse_expr
from symtensor.symexpr.numeric import eval_numeric
from symtensor.transform import add_coord_transformation, determinant, invert_matrix, represent
from walkthrough import basic_session

P = parse_expr


def assert_same_array(s, arr, expected):
    arr = np.asarray(arr, dtype=object)
    expected = np.array(expected, dtype=object)
    for idx in np.ndindex(arr.shape):
        e = expected[idx]
        assert s.is_zero(core.sub(arr[idx], core.as_expr(e))), (idx, arr[idx], e)


def test_jacobian_row_for_x(walk):
    J = walk.get("Cartesian").jacobians["Spherical"]["Jacobian"]
    expected = ["0", "sin(θ)*cos(φ)", "r*cos(θ)*cos(φ)", "-r*sin(θ)*sin(φ)"]
    for j, e in enumerate(expected):
        assert walk.is_zero(core.sub(J[1, j], P(e)))


def test_jacobian_times_inverse_is_identity(walk):
    jac = walk.get("Cartesian").jacobians["Spherical"]
    J, Jinv = jac["Jacobian"], jac["InverseJacobian"]
    n = J.shape[0]
    for i in range(n):
        for k in range(n):
            s = core.add(*[core.mul(J[i, j], Jinv[j, k]) for j in range(n)])
            assert walk.is_zero(core.sub(s, core.ONE if i == k else core.ZERO))


def test_second_derivative_block_is_symmetric(walk):
    d2 = walk.get("Cartesian").jacobians["Spherical"]["ChristoffelJacobian"]
    for idx in np.ndindex(d2.shape):
        i, j, k = idx
        assert d2[i, j, k] == d2[i, k, j]


def test_minkowski_in_spherical(walk):
    arr = represent(walk, "Minkowski", (-1, -1), "Spherical")
    assert_same_array(walk, arr, diag(-1, 1, "r^2", "r^2*sin(θ)^2"))


def test_mixed_metric_is_kronecker(walk):
    assert_same_array(walk, represent(walk, "Schwarzschild", (1, -1), "Spherical"), diag(1, 1, 1, 1))
    assert_same_array(walk, represent(walk, "Minkowski", (-1, 1), "Spherical"), diag(1, 1, 1, 1))


def test_schwarzschild_inverse(walk):
    arr = represent(walk, "Schwarzschild", (1, 1), "Spherical")
    assert_same_array(walk, arr, diag("r/(2*M - r)", "1 - 2*M/r", "1/r^2", "csc(θ)^2/r^2"))


def test_alcubierre_inverse_numerically(walk):
    g = represent(walk, "Alcubierre", (-1, -1), "Cartesian")
    ginv = represent(walk, "Alcubierre", (1, 1), "Cartesian")
    impl = {"v": lambda t: 0.3 + t, "f": lambda t, x, y, z: math.exp(-(x * x + y * y + z * z))}
    for pt in [(0.1, 0.2, -0.3, 0.5), (1.0, 0.0, 0.4, -0.2)]:
        env = dict(zip("txyz", pt))
        G = np.array([[eval_numeric(g[i, j], env, impl) for j in range(4)] for i in range(4)])
        Gi = np.array([[eval_numeric(ginv[i, j], env, impl) for j in range(4)] for i in range(4)])
        np.testing.assert_allclose(G @ Gi, np.eye(4), atol=1e-12)


def test_lowering_the_four_velocity(walk):
    walk.new_tensor("U", "Minkowski", "Cartesian", [1], ["1/sqrt(1-v^2)", "v/sqrt(1-v^2)", 0, 0], "u")
    low = represent(walk, "U", (-1,), "Cartesian")
    assert_same_array(walk, low, ["-1/sqrt(1-v^2)", "v/sqrt(1-v^2)", 0, 0])


def test_perfect_fluid_mixed_and_spherical(walk):
    walk.new_tensor("T", "Minkowski", "Cartesian", [1, 1], diag("ρ", "p", "p", "p"), "T")
    assert_same_array(walk, represent(walk, "T", (1, -1), "Cartesian"), diag("-ρ", "p", "p", "p"))
    assert_same_array(walk, represent(walk, "T", (1, 1), "Spherical"),
                      diag("ρ", "p", "p/r^2", "p*csc(θ)^2/r^2"))


def test_kretschmann_in_cartesian(walk):
    walk.new_tensor("K", "Schwarzschild", "Spherical", [], ["48*M^2/r^6"], "K")
    arr = represent(walk, "K", (), "Cartesian")
    assert walk.is_zero(core.sub(arr[()], P("48*M^2/(x^2+y^2+z^2)^3")))


def test_scalar_round_trip_needs_assumption(walk):
    walk.new_tensor("d", "Minkowski", "Cartesian", [], ["sqrt(x^2+y^2+z^2)"], "d")
    assert represent(walk, "d", (), "Spherical")[()] == core.absval(core.Sym("r"))
    s2 = basic_session()
    s2.set_assumptions("r >= 0")
    s2.new_tensor("d", "Minkowski", "Cartesian", [], ["sqrt(x^2+y^2+z^2)"], "d")
    assert represent(s2, "d", (), "Spherical")[()] == core.Sym("r")


def test_round_trip_vector_returns_original(walk):
    walk.set_assumptions("r >= 0")
    walk.new_tensor("V", "Schwarzschild", "Spherical", [1], ["1", "r", "0", "0"], "V")
    cart = represent(walk, "V", (1,), "Cartesian")
    walk.new_tensor("W", "Minkowski", "Cartesian", [1], list(cart), "W")
    back = represent(walk, "W", (1,), "Spherical")
    # sample away from the coordinate singularities
    for pt in [(0.0, 1.5, 0.7, 0.4), (2.0, 0.8, 2.1, 2.5)]:
        env = dict(zip(["t", "r", "θ", "φ"], pt))
        vals = [eval_numeric(b, env) for b in back]
        np.testing.assert_allclose(vals, [1, pt[1], 0, 0], atol=1e-10)


def test_no_transform_path(session):
    session.new_coordinates("A", ["a", "b"])
    session.new_coordinates("B", ["c", "d"])
    session.new_metric("g", "A", diag(1, 1))
    with pytest.raises(NoTransformPath):
        represent(session, "g", (-1, -1), "B")


def test_rank_mismatch(walk):
    with pytest.raises(RankMismatch):
        represent(walk, "Minkowski", (1,), "Cartesian")


def test_coordinates_only_have_one_representation(walk):
    with pytest.raises(RoleForbidden):
        represent(walk, "Cartesian", (-1,), "Cartesian")


def test_determinant_and_inverse_of_symbolic_matrix(session):
    m = np.array([[P("a"), P("b")], [P("c"), P("d")]], dtype=object)
    assert session.is_zero(core.sub(determinant(m), P("a*d - b*c")))
    inv = invert_matrix(m)
    assert session.is_zero(core.sub(inv[0, 0], P("d/(a*d - b*c)")))


# -- raising and lowering

CONFIGS = st.lists(st.sampled_from([1, -1]), min_size=2, max_size=2).map(tuple)


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(CONFIGS, CONFIGS)
def test_raise_then_lower_is_identity(a, b):
    s = Session()
    s.new_coordinates("S", ["t", "r", "θ", "φ"])
    s.set_reserved_symbols(["M"])
    s.new_metric("g", "S", diag("-(1-2*M/r)", "1/(1-2*M/r)", "r^2", "r^2*sin(θ)^2"))
    s.new_tensor("A", "g", "S", [-1, -1], [["r", 0, "M", 0], [1, 0, 0, 0], [0, 0, "θ", 0], [0, 0, 0, 1]])
    via = represent(s, "A", a, "S")
    s.new_tensor("B", "g", "S", list(a), via)
    out = represent(s, "B", b, "S")
    direct = represent(s, "A", b, "S")
    for idx in np.ndindex(out.shape):
        assert s.is_zero(core.sub(out[idx], direct[idx]))


# -- every cached representation denotes the same tensor


@settings(max_examples=10, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.permutations([((1, 1), "Cartesian"), ((-1, 1), "Spherical"), ((1, -1), "Spherical"),
                        ((-1, -1), "Cartesian"), ((1, 1), "Spherical")]))
def test_cache_coherence_is_order_independent(order):
    ref = basic_session()
    ref.new_tensor("T", "Minkowski", "Cartesian", [1, 1], diag("ρ", "p", "p", "p"), "T")
    s = basic_session()
    s.new_tensor("T", "Minkowski", "Cartesian", [1, 1], diag("ρ", "p", "p", "p"), "T")
    for idx, coords in order:
        represent(s, "T", idx, coords)
    for idx, coords in order:
        a = s.get("T").components[(idx, coords)]
        b = represent(ref, "T", idx, coords)
        for k in np.ndindex(a.shape):
            assert s.is_zero(core.sub(a[k], b[k]))


def test_transformation_requires_equal_dimension(session):
    from symtensor.errors import DimensionMismatch
    session.new_coordinates("A", ["a", "b"])
    session.new_coordinates("B", ["c", "d", "e"])
    with pytest.raises(DimensionMismatch):
        add_coord_transformation(session, "A", "B", {"a": P("c")})
