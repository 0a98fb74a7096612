import math
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, assume, given, settings

from strategies import bindings, exprs, points, rel_close
from symtensor.errors import DomainError, ExprSyntaxError, UnboundSymbol
from symtensor.symexpr import (DisplayOptions, core, diff, format_expr, parse_expr, parse_rules,
                               substitute)
from symtensor.symexpr.assumptions import Assumptions, is_zero, parse_predicate
from symtensor.symexpr.core import Add, Deriv, Func, Mul, Num, Pow, Sym, activate_expr
from symtensor.symexpr.numeric import eval_numeric
from symtensor.symexpr.simplify import simplify

P = parse_expr
REAL = Assumptions()
R_NONNEG = Assumptions(True, (parse_predicate("r >= 0"),))
SLOW = settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def same(a, b, assumptions=REAL):
    return is_zero(core.sub(a, b), assumptions)


def safe_eval(e, pt):
    try:
        v = eval_numeric(e, bindings(pt))
    except (DomainError, ZeroDivisionError, OverflowError):
        return None
    if not math.isfinite(v) or abs(v) > 1e8:
        return None
    return v


# -- parsing


def test_parse_sum_with_fraction():
    e = P("1 - 2*M/r")
    assert isinstance(e, Add)
    assert Num(1) in e.terms
    other = [t for t in e.terms if t != Num(1)][0]
    assert isinstance(other, Mul)
    assert Num(-2) in other.factors and Sym("M") in other.factors
    assert Pow(Sym("r"), Num(-1)) in other.factors


def test_parse_product_of_powers():
    e = P("r^2*sin(θ)^2")
    assert isinstance(e, Mul)
    assert set(e.factors) == {Pow(Sym("r"), Num(2)), Pow(Func("sin", (Sym("θ"),)), Num(2))}


def test_parse_function_application():
    e = P("f(t,x,y,z)")
    assert e == Func("f", tuple(Sym(s) for s in "txyz"))


def test_parse_error_reports_position():
    with pytest.raises(ExprSyntaxError) as info:
        P("1 + * 2")
    assert info.value.position is not None


def test_rationals_are_reduced():
    e = P("6/4")
    assert e == Num(Fraction(3, 2))
    assert e.value.denominator > 0


# -- differentiation


def test_diff_schwarzschild_tt():
    d = diff(P("-(1 - 2*M/r)"), Sym("r"))
    assert same(d, P("-2*M/r^2"))
    assert eval_numeric(d, {"r": 3, "M": 1}) == pytest.approx(-2 / 9, abs=1e-12)


def test_diff_of_constant_symbol():
    assert diff(Sym("c"), Sym("x")) == Num(0)


def test_diff_abstract_function_records_slot():
    d = diff(P("f(t,x)"), Sym("x"))
    assert isinstance(d, Deriv)
    assert d.name == "f" and d.orders == (0, 1)


@SLOW
@given(exprs, points)
def test_diff_matches_central_differences(e, pt):
    d = diff(e, Sym("x"))
    h = 1e-5
    hi = safe_eval(e, (pt[0] + h, pt[1]))
    lo = safe_eval(e, (pt[0] - h, pt[1]))
    exact = safe_eval(d, pt)
    assume(None not in (hi, lo, exact))
    approx = (hi - lo) / (2 * h)
    assume(abs(approx) < 1e4)
    assert rel_close(exact, approx, 1e-6 * max(1.0, abs(exact)) + 1e-6)


# -- substitution


def test_substitute_closure_for_function_head():
    le = P("-dt^2 + dx^2 + dy^2 + (dz - f(t,x,y,z)*v(t)*dt)^2")
    out = simplify(substitute(le, parse_rules("f -> (0 &)")))
    assert out == simplify(P("-dt^2 + dx^2 + dy^2 + dz^2"))


def test_substitute_merges_like_terms():
    assert substitute(P("x + y"), parse_rules("x -> y")) == P("2*y")


def test_substitute_rewrites_arguments():
    out = substitute(P("v*f(t,x)"), parse_rules("t -> t(λ)"))
    assert out == P("v*f(t(λ),x)")


def test_substitute_is_simultaneous_and_pure():
    e = P("x + 2*y")
    out = substitute(e, parse_rules("x -> y, y -> x"))
    assert out == P("y + 2*x")
    assert e == P("x + 2*y")


# -- simplification


def test_sqrt_square_with_nonnegative_assumption():
    assert simplify(P("sqrt(r^2)"), R_NONNEG) == Sym("r")


def test_sqrt_square_real_only_gives_abs():
    assert simplify(P("sqrt(r^2)"), REAL) == core.absval(Sym("r"))


def test_pythagorean_identity():
    assert simplify(P("sin(θ)^2 + cos(θ)^2")) == Num(1)


def test_rational_normalization_cancels():
    assert simplify(P("(1 - 2*M/r) * 1/(1 - 2*M/r)")) == Num(1)


@SLOW
@given(exprs)
def test_simplify_idempotent(e):
    s = simplify(e)
    assert simplify(s) == s


@SLOW
@given(exprs, points)
def test_simplify_preserves_value(e, pt):
    a = safe_eval(e, pt)
    b = safe_eval(simplify(e), pt)
    assume(a is not None and b is not None)
    assert rel_close(a, b, 1e-9)


# -- zero testing


def test_is_zero_literal():
    assert is_zero(Num(0))


def test_is_zero_cancellation():
    assert is_zero(P("(1 - 2*M/r) * 1/(1 - 2*M/r) - 1"))


def test_is_zero_rejects_nonzero():
    assert not is_zero(P("M/r"))


@SLOW
@given(exprs, points)
def test_is_zero_never_true_for_visibly_nonzero(e, pt):
    v = safe_eval(e, pt)
    assume(v is not None and abs(v) > 1e-6)
    assert not is_zero(e)


# -- numeric evaluation


def test_eval_kretschmann():
    assert eval_numeric(P("48*M^2/r^6"), {"M": 1, "r": 2}) == pytest.approx(0.75)


def test_eval_pythagorean():
    assert eval_numeric(P("sin(θ)^2 + cos(θ)^2"), {"θ": 0.3}) == pytest.approx(1.0, abs=1e-12)


def test_eval_sphere_area_factor():
    assert eval_numeric(P("r^2*sin(θ)^2"), {"r": 2, "θ": math.pi / 2}) == pytest.approx(4.0)


def test_eval_unbound_symbol():
    with pytest.raises(UnboundSymbol):
        eval_numeric(P("x + y"), {"x": 1})


def test_eval_domain_error():
    with pytest.raises(DomainError):
        eval_numeric(P("sqrt(x)"), {"x": -1})


def test_eval_abstract_function_with_implementation():
    v = eval_numeric(diff(P("f(x)"), Sym("x")), {"x": 1.0}, {"f": lambda x: x ** 3})
    assert v == pytest.approx(3.0, rel=1e-5)


# -- printing


def test_derivative_shorthand_for_suppressed_function():
    e = core.deriv("a", (Sym("t"),), (2,))
    assert format_expr(e, "plain", DisplayOptions(suppress_args=frozenset({"a"}))) == "∂t²a"


def test_suppressed_arguments():
    opts = DisplayOptions(suppress_args=frozenset({"f"}))
    assert format_expr(P("f(t,x,y,z)"), "plain", opts) == "f"


def test_power_plain():
    assert format_expr(P("r^2")) == "r^2"


def test_dot_notation_for_curve_functions():
    opts = DisplayOptions(curve_param="λ")
    assert format_expr(core.deriv("t", (Sym("λ"),), (2,)), "plain", opts) == "t\u0308"


def test_deferred_derivative_display():
    lam = Sym("λ")
    e = core.deferred(core.mul(Sym("r"), core.deriv("θ", (lam,), (1,))), lam)
    assert format_expr(e, "plain", DisplayOptions(curve_param="λ")).startswith("∂λ(")


def test_latex_fraction():
    assert format_expr(P("1/(2*x)"), "latex") == r"\frac{1}{2 x}"


@SLOW
@given(exprs)
def test_print_parse_round_trip(e):
    assert parse_expr(format_expr(e)) == e


def test_activate_is_idempotent():
    lam = Sym("λ")
    e = core.deferred(core.mul(core.power(Func("r", (lam,)), 2), core.deriv("θ", (lam,), (1,))), lam)
    once = activate_expr(e)
    assert activate_expr(once) == once
    assert not any(isinstance(x, core.DeferredD) for x in core.walk(once))
