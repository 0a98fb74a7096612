"""A small computer-algebra kernel: trees, parsing, printing, calculus and simplification."""

from .core import (Abs, Add, DeferredD, Deriv, Expr, Func, Lambda, Mul, Num, Pow,
                   SubstitutionRule, Sym, absval, add, as_expr, deferred, deriv, diff, div,
                   free_symbols, func, mul, neg, num, power, sqrt, sub, substitute, sym, symbols)
from .parser import parse_expr, parse_rules
from .printer import DisplayOptions, format_expr
