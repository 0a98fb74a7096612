"""Floating-point evaluation of expression trees."""

from __future__ import annotations

import math
from typing import Callable, Mapping

from ..errors import DomainError, UnboundSymbol
from .core import activate_expr, Abs, Add, DeferredD, Deriv, Expr, Func, Mul, Num, Pow, Sym

_UNARY = {
    "sin": math.sin, "cos": math.cos, "tan": math.tan, "exp": math.exp,
    "arctan": math.atan, "sinh": math.sinh, "cosh": math.cosh,
}


def _checked(name, fn, x):
    try:
        return fn(x)
    except (ValueError, OverflowError, ZeroDivisionError) as exc:
        raise DomainError(f"{name}({x!r}) is undefined") from exc


def _builtin(name: str, args: list) -> float:
    if name in _UNARY:
        return _checked(name, _UNARY[name], args[0])
    x = args[0]
    if name == "cot":
        return 1.0 / _nonzero(math.tan(x), "cot")
    if name == "sec":
        return 1.0 / _nonzero(math.cos(x), "sec")
    if name == "csc":
        return 1.0 / _nonzero(math.sin(x), "csc")
    if name == "log":
        if x <= 0:
            raise DomainError(f"log({x!r}) is undefined for real arguments")
        return math.log(x)
    if name == "arcsin":
        if abs(x) > 1:
            raise DomainError(f"arcsin({x!r}) is undefined for real arguments")
        return math.asin(x)
    if name == "arccos":
        if abs(x) > 1:
            raise DomainError(f"arccos({x!r}) is undefined for real arguments")
        return math.acos(x)
    if name == "atan2":
        y, xx = args
        if y == 0 and xx == 0:
            raise DomainError("atan2(0, 0) is undefined")
        return math.atan2(y, xx)
    raise DomainError(f"unknown builtin {name}")


def _nonzero(v, name):
    if v == 0:
        raise DomainError(f"{name} has a pole here")
    return v


def _power(b: float, e: float, exact_exp: Num | None) -> float:
    if exact_exp is not None and exact_exp.is_integer:
        n = int(exact_exp.value)
        if b == 0 and n < 0:
            raise DomainError("division by zero")
        return b ** n
    if b < 0:
        raise DomainError(f"non-integer power of a negative number ({b!r}^{e!r})")
    if b == 0 and e < 0:
        raise DomainError("division by zero")
    try:
        return b ** e
    except OverflowError as exc:
        raise DomainError("overflow") from exc


def central_derivative(fn: Callable, point: tuple, orders: tuple, h: float = 1e-3) -> float:
    """Mixed partial derivative of ``fn`` by nested central differences."""
    for i, n in enumerate(orders):
        if n:
            def lower(*args, _i=i):
                return (fn(*args[:_i], args[_i] + h, *args[_i + 1:])
                        - fn(*args[:_i], args[_i] - h, *args[_i + 1:])) / (2 * h)
            rest = list(orders)
            rest[i] -= 1
            return central_derivative(lower, point, tuple(rest), h)
    return fn(*point)


class Evaluator:
    """Evaluates one or more expressions under fixed bindings, memoizing shared subtrees."""

    def __init__(self, bindings: Mapping, func_impls: Mapping | None = None,
                 deriv_impls: Mapping | None = None):
        self.bindings = {(k.name if isinstance(k, Sym) else k): float(v) for k, v in bindings.items()}
        self.funcs = dict(func_impls or {})
        # optional exact derivatives keyed by (name, orders)
        self.derivs = dict(deriv_impls or {})
        self.memo: dict = {}

    def __call__(self, e: Expr) -> float:
        return self.ev(e)

    def ev(self, e: Expr) -> float:
        m = self.memo.get(e)
        if m is not None:
            return m
        v = self._ev(e)
        if isinstance(v, float) and (math.isnan(v) or math.isinf(v)):
            raise DomainError("non-finite intermediate value")
        self.memo[e] = v
        return v

    def _ev(self, e: Expr) -> float:
        if isinstance(e, Num):
            return float(e.value)
        if isinstance(e, Sym):
            try:
                return self.bindings[e.name]
            except KeyError:
                raise UnboundSymbol(f"symbol {e.name!r} has no value") from None
        if isinstance(e, Add):
            return math.fsum(self.ev(t) for t in e.terms)
        if isinstance(e, Mul):
            r = 1.0
            for f in e.factors:
                r *= self.ev(f)
            return r
        if isinstance(e, Pow):
            b = self.ev(e.base)
            exact = e.exp if isinstance(e.exp, Num) else None
            x = float(exact.value) if exact is not None else self.ev(e.exp)
            return _power(b, x, exact)
        if isinstance(e, Abs):
            return abs(self.ev(e.inner))
        if isinstance(e, Func):
            args = [self.ev(a) for a in e.args]
            if e.name in self.funcs:
                return float(self.funcs[e.name](*args))
            if e.name in _UNARY or e.name in ("cot", "sec", "csc", "log", "arcsin", "arccos", "atan2"):
                return _builtin(e.name, args)
            raise UnboundSymbol(f"function {e.name!r} has no implementation")
        if isinstance(e, Deriv):
            args = tuple(self.ev(a) for a in e.args)
            key = (e.name, e.orders)
            if key in self.derivs:
                return float(self.derivs[key](*args))
            if e.name not in self.funcs:
                raise UnboundSymbol(f"function {e.name!r} has no implementation")
            return central_derivative(self.funcs[e.name], args, e.orders)
        if isinstance(e, DeferredD):
            return self.ev(activate_expr(e))
        raise TypeError(type(e))


def eval_numeric(e: Expr, bindings: Mapping, func_impls: Mapping | None = None) -> float:
    """Evaluate ``e`` to a float.

    ``bindings`` maps symbols (or names) to numbers; ``func_impls`` maps
    abstract function names to Python callables. Derivatives of abstract
    functions are approximated by central differences.
    """
    return Evaluator(bindings, func_impls)(e)
