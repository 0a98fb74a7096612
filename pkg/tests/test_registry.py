import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from symtensor import curvature, geodesic
from symtensor.errors import (DuplicateId, EmptySymbols, InUseAsCoords, InUseAsMetric, InvalidId,
                              NotSymmetric, RankMismatch, RoleForbidden, ShapeMismatch, Singular,
                              TensorError, UnknownCoords, UnknownId, UnknownMetric)
from symtensor.registry import (DEFAULT_INDEX_LETTERS, PLACEHOLDER_SYMBOL, Role, Session, diag,
                                format_info)
from symtensor.symexpr import core, parse_expr
from symtensor.symexpr.core import Sym
from symtensor.transform import represent
from walkthrough import full_walkthrough


def test_new_coordinates(session):
    assert session.new_coordinates("Cartesian", ["t", "x", "y", "z"]) == "Cartesian"
    obj = session.get("Cartesian")
    assert obj.role == Role.COORDINATES
    assert list(obj.components[((1,), "Cartesian")]) == [Sym(s) for s in "txyz"]
    assert session.options.reserved_symbols == ["t", "x", "y", "z"]


def test_spherical_coordinates(session):
    session.new_coordinates("Spherical", ["t", "r", "θ", "φ"])
    assert session.coord_symbols("Spherical") == tuple(Sym(s) for s in ["t", "r", "θ", "φ"])


def test_one_dimensional_system(session):
    session.new_coordinates("C1", ["u"])
    assert session.dim_of("C1") == 1
    assert session.get("C1").components[((1,), "C1")].shape == (1,)


def test_empty_coordinates_rejected(session):
    with pytest.raises(EmptySymbols):
        session.new_coordinates("None", [])


def test_duplicate_id_rejected(coords_session):
    with pytest.raises(DuplicateId):
        coords_session.new_coordinates("Cartesian", ["a", "b", "c", "d"])


def test_dollar_ids_are_reserved(session):
    with pytest.raises(InvalidId):
        session.new_coordinates("$options", ["u"])


def test_new_metric_defaults(walk):
    g = walk.get("Schwarzschild")
    assert g.symbol == "g"
    assert g.default_indices == (-1, -1)
    assert walk.get("Minkowski").symbol == "η"


def test_singular_metric(coords_session):
    with pytest.raises(Singular):
        coords_session.new_metric("Bad", "Cartesian", diag(0, 1, 1, 1))


def test_asymmetric_metric(coords_session):
    m = [[1, 2, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]
    with pytest.raises(NotSymmetric):
        coords_session.new_metric("Bad", "Cartesian", m)


def test_metric_in_unknown_coords(session):
    with pytest.raises(UnknownCoords):
        session.new_metric("M", "Nowhere", diag(1))


def test_new_tensor_examples(walk):
    walk.new_tensor("Kretschmann", "Schwarzschild", "Spherical", [], ["48*M^2/r^6"], "K")
    walk.new_tensor("FourVelocity", "Minkowski", "Cartesian", [1],
                    ["1/sqrt(1-v^2)", "v/sqrt(1-v^2)", 0, 0])
    walk.new_tensor("PerfectFluid", "Minkowski", "Cartesian", [1, 1], diag("ρ", "p", "p", "p"), "T")
    assert walk.get("Kretschmann").rank == 0
    assert walk.get("FourVelocity").symbol == PLACEHOLDER_SYMBOL
    assert walk.get("PerfectFluid").default_indices == (1, 1)


def test_new_tensor_shape_and_metric_errors(walk):
    with pytest.raises(ShapeMismatch):
        walk.new_tensor("V", "Minkowski", "Cartesian", [1], [1, 2, 3])
    with pytest.raises(UnknownMetric):
        walk.new_tensor("V", "Cartesian", "Cartesian", [1], [1, 2, 3, 4])


def test_overwrite_warns_when_allowed(walk):
    walk.new_tensor("V", "Minkowski", None, [1], [1, 0, 0, 0])
    assert walk.set_allow_overwrite(True)
    assert walk.messages[-1] == "Overwriting tensors turned on."
    walk.new_tensor("V", "Minkowski", None, [1], [2, 0, 0, 0])
    assert walk.messages[-1] == 'Overwriting the tensor "V".'
    assert walk.get_components("V", (1,), "Cartesian")[0] == core.num(2)


def test_delete_constraints(walk):
    with pytest.raises(InUseAsCoords) as info:
        walk.delete("Cartesian")
    assert "cannot be deleted, as it is the default coordinate system of" in str(info.value)
    walk.new_tensor("PerfectFluid", "Minkowski", "Cartesian", [1, 1], diag("ρ", "p", "p", "p"), "T")
    with pytest.raises(InUseAsMetric) as info:
        walk.delete("Minkowski")
    assert str(info.value).startswith('The metric "Minkowski" cannot be deleted, as it has been used '
                                      'to define the tensor "PerfectFluid".')


def test_delete_plain_tensor(walk):
    walk.new_tensor("SumResult", "Minkowski", None, [], [1])
    walk.delete("SumResult")
    assert "SumResult" not in walk


def test_change_id_and_symbol(walk):
    walk.new_tensor("FourVelocity", "Minkowski", "Cartesian", [1], [1, 0, 0, 0])
    walk.change_symbol("FourVelocity", "u")
    assert walk.change_id("FourVelocity", "4-Velocity") == "4-Velocity"
    with pytest.raises(UnknownId) as info:
        walk.get("FourVelocity")
    assert str(info.value) == 'The tensor "FourVelocity" does not exist.'
    assert walk.get("4-Velocity").symbol == "u"


def test_change_id_rewrites_references(walk):
    walk.change_id("Cartesian", "Cart")
    assert walk.get("Minkowski").default_coords == "Cart"
    assert "Cart" in walk.get("Spherical").transformations
    walk.check_integrity()


def test_change_id_to_existing(walk):
    with pytest.raises(DuplicateId):
        walk.change_id("Minkowski", "Schwarzschild")


def test_change_default_indices(walk):
    walk.new_tensor("PerfectFluid", "Minkowski", "Cartesian", [1, 1], diag("ρ", "p", "p", "p"), "T")
    walk.change_default_indices("PerfectFluid", (-1, -1))
    arr = walk.get_components("PerfectFluid")
    assert [arr[i, i] for i in range(4)] == [parse_expr(s) for s in ("ρ", "p", "p", "p")]
    assert walk.messages[-1] == ('Using the default index configuration {-1, -1} and the default '
                                 'coordinate system "Cartesian".')


def test_change_default_indices_errors(walk):
    walk.new_tensor("K", "Schwarzschild", None, [], ["48*M^2/r^6"])
    walk.change_default_indices("K", ())
    with pytest.raises(RankMismatch):
        walk.change_default_indices("K", (1,))
    with pytest.raises(RoleForbidden):
        walk.change_default_indices("Minkowski", (1, 1))


def test_change_default_coords(walk):
    walk.new_tensor("PerfectFluid", "Minkowski", "Cartesian", [1, 1], diag("ρ", "p", "p", "p"), "T")
    walk.change_default_indices("PerfectFluid", (-1, -1))
    walk.change_default_coords("PerfectFluid", "Spherical")
    arr = walk.get_components("PerfectFluid")
    assert walk.is_zero(core.sub(arr[2, 2], parse_expr("p*r^2")))
    with pytest.raises(RoleForbidden):
        walk.change_default_coords("Cartesian", "Spherical")
    with pytest.raises(UnknownCoords):
        walk.change_default_coords("PerfectFluid", "Nowhere")


def test_options(walk):
    assert walk.set_assumptions("r >= 0") == {"AssumeReal": True, "User": ["r >= 0"]}
    assert walk.set_assumptions("r >= 0") == {"AssumeReal": True, "User": ["r >= 0"]}
    assert walk.set_assumptions(clear=True) == {"AssumeReal": True, "User": []}
    walk.set_reserved_symbols(["ρ", "p"])
    assert walk.options.reserved_symbols == ["t", "x", "y", "z", "r", "θ", "φ", "M", "v", "f", "ρ", "p"]
    assert walk.set_index_letters("abcdef") == "abcdef"
    assert walk.set_index_letters() == DEFAULT_INDEX_LETTERS
    assert len(set(DEFAULT_INDEX_LETTERS)) == len(DEFAULT_INDEX_LETTERS)
    assert walk.set_index_letters("abca") == "abc"


def test_get_components_inverse_schwarzschild(walk):
    arr = walk.get_components("Schwarzschild", (1, 1), "Spherical")
    expected = diag("r/(2*M - r)", "1 - 2*M/r", "1/r^2", "csc(θ)^2/r^2")
    for i in range(4):
        for j in range(4):
            assert walk.is_zero(core.sub(arr[i, j], core.as_expr(expected[i][j])))


def test_get_components_returns_copy(walk):
    arr = walk.get_components("Minkowski", (-1, -1), "Cartesian")
    arr[0, 0] = core.num(5)
    assert walk.get_components("Minkowski", (-1, -1), "Cartesian")[0, 0] == core.num(-1)


def test_lagrangian_components(walk):
    geodesic.lagrangian(walk, "Minkowski")
    arr = walk.get_components("MinkowskiLagrangian")
    assert arr[()] == parse_expr("-t'(λ)^2 + x'(λ)^2 + y'(λ)^2 + z'(λ)^2")


def test_simplify_tensor_after_assumptions(walk):
    walk.new_tensor("SpatialDistance", "Minkowski", "Cartesian", [], ["sqrt(x^2+y^2+z^2)"], "d")
    assert represent(walk, "SpatialDistance", (), "Spherical")[()] == core.absval(Sym("r"))
    walk.set_assumptions("r >= 0")
    assert represent(walk, "SpatialDistance", (), "Spherical")[()] == core.absval(Sym("r"))
    walk.simplify_tensor("SpatialDistance")
    assert represent(walk, "SpatialDistance", (), "Spherical")[()] == Sym("r")
    before = dict(walk.get("Minkowski").components)
    walk.simplify_tensor("Minkowski")
    for k, v in before.items():
        assert np.array_equal(walk.get("Minkowski").components[k], v)


def test_info_reports():
    s = full_walkthrough()
    report = s.info("Minkowski")
    assert report["Role"] == "Metric"
    assert report["Tensors Using This Metric"] == ["PerfectFluid", "4-Velocity", "SpatialDistance"]
    assert s.info()["total"] == 9
    assert format_info(s.info()).startswith("Total tensors created: 9")
    k = s.info("Kretschmann")
    assert k["Metric"] == "Schwarzschild" and k["Rank"] == 0
    text = format_info(s.info("Cartesian"))
    assert "Default Coordinates For: Minkowski, Alcubierre, 4-Velocity, SpatialDistance" in text


def test_metric_overwrite_deletes_derived(walk):
    curvature.christoffel(walk, "Schwarzschild")
    geodesic.lagrangian(walk, "Schwarzschild")
    walk.new_tensor("SchwarzschildRiemannish", "Schwarzschild", None, [], [1])
    walk.set_allow_overwrite(True)
    walk.new_metric("Schwarzschild", "Spherical", diag(-1, 1, "r^2", "r^2*sin(θ)^2"))
    assert "SchwarzschildChristoffel" not in walk
    assert "SchwarzschildLagrangian" not in walk
    assert "SchwarzschildRiemannish" in walk
    assert ("All curvature tensors previously calculated from the metric being overwritten "
            "will be deleted.") in walk.messages


# -- referential integrity under random operation sequences

OPS = st.lists(st.tuples(st.sampled_from(["tensor", "delete", "rename", "metric", "coords"]),
                         st.integers(0, 5), st.integers(0, 5)), max_size=12)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(OPS)
def test_references_never_dangle(ops):
    s = Session()
    s.new_coordinates("C0", ["u", "w"])
    s.new_metric("M0", "C0", diag(1, 1))
    for kind, a, b in ops:
        ids = list(s.objects)
        try:
            if kind == "tensor":
                metrics = [i for i in ids if s.objects[i].role == Role.METRIC]
                s.new_tensor(f"T{a}", metrics[b % len(metrics)], None, [1], [a, b])
            elif kind == "delete":
                s.delete(ids[a % len(ids)])
            elif kind == "rename":
                s.change_id(ids[a % len(ids)], f"R{b}")
            elif kind == "metric":
                coords = [i for i in ids if s.objects[i].role == Role.COORDINATES]
                if coords:
                    s.new_metric(f"M{a}", coords[b % len(coords)], diag(1, a + 1))
            elif kind == "coords":
                s.new_coordinates(f"C{a}", [f"p{a}", f"q{a}"])
        except TensorError:
            pass
        s.check_integrity()
