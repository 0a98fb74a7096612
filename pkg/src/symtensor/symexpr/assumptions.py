"""Simplification assumptions, sign analysis and probabilistic zero-testing."""

from __future__ import annotations

import hashlib
import math
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction

from ..errors import DomainError, ExprSyntaxError, UnresolvableSample
from . import core
from .core import (Abs, Add, DeferredD, Deriv, Expr, Func, Lambda, Mul, Num, Pow, Sym,
                   activate_expr, free_symbols, substitute, walk)
from .numeric import Evaluator

RELATIONS = (">=", ">", "<=", "<", "==")
_REL_ALIASES = {"≥": ">=", "≤": "<=", "=": "==", "!=": None}


@dataclass(frozen=True)
class Predicate:
    symbol: str
    relation: str
    bound: Expr = core.ZERO

    def __str__(self):
        return f"{self.symbol} {self.relation} {self.bound}"

    def holds(self, value: float) -> bool:
        b = float(self.bound.value) if isinstance(self.bound, Num) else None
        if b is None:
            return True
        return {">=": value >= b, ">": value > b, "<=": value <= b, "<": value < b,
                "==": abs(value - b) < 1e-12}[self.relation]


def parse_predicate(text: str) -> Predicate:
    """Parse ``r >= 0``, ``M > 0``, ``k == 1`` (Unicode ≥/≤ accepted)."""
    from .parser import parse_expr
    m = re.match(r"^\s*(.+?)\s*(>=|<=|==|≥|≤|>|<|=)\s*(.+?)\s*$", text)
    if not m:
        raise ExprSyntaxError(f"cannot read the assumption {text!r}")
    lhs, rel, rhs = m.groups()
    rel = _REL_ALIASES.get(rel, rel)
    left = parse_expr(lhs)
    bound = parse_expr(rhs)
    if not isinstance(left, Sym):
        raise ExprSyntaxError(f"assumptions must constrain a single symbol, got {lhs!r}")
    if not isinstance(bound, Num):
        raise ExprSyntaxError(f"assumption bounds must be numbers, got {rhs!r}")
    return Predicate(left.name, rel, bound)


@dataclass(frozen=True)
class Assumptions:
    """``assume_real`` plus a deduplicated tuple of predicates."""

    assume_real: bool = True
    predicates: tuple = field(default_factory=tuple)

    def with_predicates(self, preds) -> "Assumptions":
        out = list(self.predicates)
        for p in preds:
            if isinstance(p, str):
                p = parse_predicate(p)
            if p not in out:
                out.append(p)
        return Assumptions(self.assume_real, tuple(out))

    def for_symbol(self, name: str) -> list:
        return [p for p in self.predicates if p.symbol == name]

    def describe(self) -> dict:
        return {"AssumeReal": self.assume_real, "User": [str(p) for p in self.predicates]}


NO_ASSUMPTIONS = Assumptions()

# ---------------------------------------------------------------------------
# sign analysis; results: "pos", "nonneg", "neg", "nonpos", "zero" or None


def _sym_sign(name: str, a: Assumptions):
    best = None
    for p in a.for_symbol(name):
        b = p.bound.value
        if p.relation == "==":
            return "pos" if b > 0 else "neg" if b < 0 else "zero"
        if p.relation == ">" and b >= 0 or p.relation == ">=" and b > 0:
            return "pos"
        if p.relation == "<" and b <= 0 or p.relation == "<=" and b < 0:
            return "neg"
        if p.relation == ">=" and b == 0:
            best = "nonneg"
        if p.relation == "<=" and b == 0:
            best = "nonpos"
    return best


def _mul_signs(s1, s2):
    if s1 is None or s2 is None:
        return None
    if "zero" in (s1, s2):
        return "zero"
    neg = (s1 in ("neg", "nonpos")) != (s2 in ("neg", "nonpos"))
    strict = s1 in ("pos", "neg") and s2 in ("pos", "neg")
    if neg:
        return "neg" if strict else "nonpos"
    return "pos" if strict else "nonneg"


def sign_of(e: Expr, a: Assumptions = NO_ASSUMPTIONS):
    if isinstance(e, Num):
        return "pos" if e.value > 0 else "neg" if e.value < 0 else "zero"
    if isinstance(e, Sym):
        return _sym_sign(e.name, a)
    if isinstance(e, Abs):
        s = sign_of(e.inner, a)
        return "pos" if s in ("pos", "neg") else "nonneg"
    if isinstance(e, Pow):
        bs = sign_of(e.base, a)
        if isinstance(e.exp, Num):
            v = e.exp.value
            if v.denominator == 1:
                if v.numerator % 2 == 0:
                    return "pos" if bs in ("pos", "neg") else "nonneg" if a.assume_real else None
                if bs is None:
                    return None
                return _mul_signs(bs, "pos") if v > 0 or bs != "zero" else None
            # principal real root: defined only for non-negative bases
            if a.assume_real:
                return "pos" if bs == "pos" else "nonneg"
            return "pos" if bs == "pos" else "nonneg" if bs == "nonneg" else None
        if bs == "pos":
            return "pos"
        return None
    if isinstance(e, Mul):
        s = "pos"
        for f in e.factors:
            s = _mul_signs(s, sign_of(f, a))
            if s is None:
                return None
        return s
    if isinstance(e, Add):
        signs = [sign_of(t, a) for t in e.terms]
        if all(s in ("pos", "nonneg", "zero") for s in signs):
            return "pos" if "pos" in signs else "nonneg"
        if all(s in ("neg", "nonpos", "zero") for s in signs):
            return "neg" if "neg" in signs else "nonpos"
        return None
    if isinstance(e, Func):
        if e.name in ("exp", "cosh"):
            return "pos"
        if e.name == "arccos":
            return "nonneg"
    return None


def is_nonnegative(e, a):
    return sign_of(e, a) in ("pos", "nonneg", "zero")


def is_positive(e, a):
    return sign_of(e, a) == "pos"


def is_negative(e, a):
    return sign_of(e, a) == "neg"


def is_nonpositive(e, a):
    return sign_of(e, a) in ("neg", "nonpos", "zero")


# ---------------------------------------------------------------------------
# sampling


def _stable_seed(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


def _rand_rational(rng, lo, hi, den=16):
    return Fraction(rng.randint(int(lo * den), int(hi * den)), den)


def random_closure(name: str, arity: int, seed: int = 0) -> Lambda:
    """A concrete stand-in for an abstract function: a quadratic plus a sine term."""
    rng = random.Random(_stable_seed(f"{name}/{arity}/{seed}"))
    params = tuple(Sym(f"#{k}") for k in range(1, arity + 1))
    terms = [Num(_rand_rational(rng, 0.5, 1.5))]
    for i, p in enumerate(params):
        terms.append(core.mul(Num(_rand_rational(rng, -1, 1)), p))
        for q in params[i:]:
            terms.append(core.mul(Num(_rand_rational(rng, -0.5, 0.5)), p, q))
    if params:
        phase = core.add(*[core.mul(Num(_rand_rational(rng, 0.3, 1.2)), p) for p in params],
                         Num(_rand_rational(rng, 0, 1)))
        terms.append(core.mul(Num(_rand_rational(rng, 0.2, 0.6)), core.func("sin", phase)))
    return Lambda(params, core.add(*terms))


def concretize(e: Expr, seed: int = 0) -> Expr:
    """Activate deferred derivatives and replace abstract functions by closures."""
    e = activate_expr(e)
    heads = {}
    for x in walk(e):
        if isinstance(x, (Func, Deriv)) and x.name not in core.BUILTIN_FUNCTIONS:
            heads[x.name] = len(x.args)
    if not heads:
        return e
    rules = [core.SubstitutionRule(n, random_closure(n, k, seed)) for n, k in heads.items()]
    return substitute(e, rules)


class _ScaleEvaluator(Evaluator):
    """Evaluator that tracks the largest intermediate magnitude and tiny denominators."""

    def __init__(self, bindings):
        super().__init__(bindings)
        self.scale = 1.0

    def _ev(self, e):
        v = super()._ev(e)
        if isinstance(e, Pow) and isinstance(e.exp, Num) and e.exp.value < 0:
            b = self.ev(e.base)
            if abs(b) < 1e-6:
                raise DomainError("near-singular denominator")
        if isinstance(e, Add):
            for t in e.terms:
                self.scale = max(self.scale, abs(self.ev(t)))
        return v


class Sampler:
    """Draws admissible sample points under assumptions and evaluates expressions."""

    def __init__(self, assumptions: Assumptions = NO_ASSUMPTIONS, seed: int = 12345,
                 n_points: int = 20, max_tries: int = 400):
        self.assumptions = assumptions
        self.seed = seed
        self.n_points = n_points
        self.max_tries = max_tries

    def draw(self, rng, names) -> dict:
        point = {}
        for name in names:
            preds = self.assumptions.for_symbol(name)
            eq = [p for p in preds if p.relation == "=="]
            if eq:
                point[name] = float(eq[0].bound.value)
                continue
            lo, hi = -2.2, 2.2
            for p in preds:
                b = float(p.bound.value)
                if p.relation in (">", ">="):
                    lo = max(lo, b)
                    hi = max(hi, lo + 2.0)
                elif p.relation in ("<", "<="):
                    hi = min(hi, b)
                    lo = min(lo, hi - 2.0)
            v = 0.0
            while abs(v) < 0.15 or v - lo < 0.05 or hi - v < 0.05:
                v = rng.uniform(lo, hi)
            point[name] = v
        return point

    def values(self, e: Expr, n: int | None = None):
        """Yield (value, scale) at admissible points; raises UnresolvableSample."""
        n = n or self.n_points
        c = concretize(e)
        names = sorted(s.name for s in free_symbols(c))
        rng = random.Random(self.seed)
        got = tries = 0
        while got < n:
            tries += 1
            if tries > self.max_tries:
                raise UnresolvableSample(
                    f"no admissible sample point found for {e} after {self.max_tries} tries")
            ev = _ScaleEvaluator(self.draw(rng, names))
            try:
                v = ev(c)
            except (DomainError, ZeroDivisionError, OverflowError):
                continue
            got += 1
            yield v, ev.scale

    def fingerprint(self, e: Expr, points: list) -> tuple:
        """Values of ``e`` at the given fixed points (None where undefined)."""
        c = concretize(e)
        out = []
        for p in points:
            ev = _ScaleEvaluator(p)
            try:
                out.append(ev(c))
            except (DomainError, ZeroDivisionError, OverflowError):
                out.append(None)
        return tuple(out)

    def points(self, names, n=None) -> list:
        rng = random.Random(self.seed + 1)
        return [self.draw(rng, sorted(names)) for _ in range(n or self.n_points)]


def is_zero(e: Expr, a: Assumptions = NO_ASSUMPTIONS, n_points: int = 20, seed: int = 12345) -> bool:
    """True when ``e`` is zero: literally, or numerically at ``n_points`` admissible points.

    Each sample must satisfy ``|e| < 1e-9 * max(1, scale)`` where ``scale`` is
    the largest magnitude of any summand met during evaluation.
    """
    if isinstance(e, Num):
        return e.value == 0
    c = activate_expr(e)
    if not any(True for _ in free_symbols(c)) and not any(
            isinstance(x, (Func, Deriv)) for x in walk(c)):
        # constant expression: a single evaluation decides
        n_points = 1
    for v, scale in Sampler(a, seed=seed, n_points=n_points).values(c):
        if abs(v) >= 1e-9 * max(1.0, scale):
            return False
    return True


def numerically_equal(a_: Expr, b_: Expr, a: Assumptions = NO_ASSUMPTIONS) -> bool:
    return is_zero(core.sub(a_, b_), a)


def sign_match(x: Expr, y: Expr, a: Assumptions = NO_ASSUMPTIONS):
    """+1 if x == y, -1 if x == -y, else 0 (numerical)."""
    if x == y:
        return 1
    if x == core.neg(y):
        return -1
    if is_zero(core.sub(x, y), a):
        return 1
    if is_zero(core.add(x, y), a):
        return -1
    return 0


def _finite(v):
    return v is not None and math.isfinite(v)
