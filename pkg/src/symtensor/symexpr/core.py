"""Immutable expression trees with canonicalizing constructors.

Every node is built through the module-level constructors (``add``, ``mul``,
``power``, ``func``, ...), which flatten nested sums and products, merge like
terms and powers, fold numeric constants and sort children into a fixed total
order. Two expressions that differ only by these rewrites therefore compare
equal structurally.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable, Iterator

__all__ = [
    "Expr", "Num", "Sym", "Add", "Mul", "Pow", "Func", "Deriv", "DeferredD", "Abs",
    "Lambda", "SubstitutionRule", "num", "sym", "symbols", "add", "mul", "power", "func", "deriv",
    "deferred", "absval", "sqrt", "neg", "sub", "div", "as_expr", "diff", "substitute",
    "free_symbols", "function_names", "walk", "has", "replace_nodes", "ZERO", "ONE",
    "BUILTIN_FUNCTIONS", "node_count", "coeff_and_rest", "activate_expr", "diff_wrt",
]

BUILTIN_FUNCTIONS = frozenset({
    "sin", "cos", "tan", "cot", "sec", "csc", "exp", "log",
    "arcsin", "arccos", "arctan", "atan2", "sinh", "cosh",
})

_KIND_RANK = {"Pow": 0, "Func": 1, "Deriv": 2, "Abs": 3, "DeferredD": 4, "Mul": 5, "Add": 6}


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ("_hash", "_key", "_free")
    kind = "Expr"

    # subclasses define: children (tuple of Expr), payload (hashable)

    @property
    def children(self) -> tuple:
        return ()

    @property
    def payload(self):
        return None

    def _init_cache(self):
        self._hash = hash((self.kind, self.payload, self.children))
        self._key = None
        self._free = None

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr):
            if isinstance(other, (int, Fraction)):
                return isinstance(self, Num) and self.value == other
            return NotImplemented
        return (self._hash == other._hash and self.kind == other.kind
                and self.payload == other.payload and self.children == other.children)

    def __ne__(self, other):
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    def sort_key(self):
        if self._key is None:
            self._key = self._make_key()
        return self._key

    def _make_key(self):
        return (2, _KIND_RANK[self.kind], len(self.children),
                tuple(c.sort_key() for c in self.children), _payload_key(self.payload))

    def __lt__(self, other):
        return self.sort_key() < other.sort_key()

    def __reduce__(self):
        return (_rebuild, (self.kind, self.payload, self.children))

    # arithmetic sugar
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __pow__(self, other):
        return power(self, as_expr(other))

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        from .printer import format_expr
        return f"<{self.kind} {format_expr(self)}>"

    def __str__(self):
        from .printer import format_expr
        return format_expr(self)

    @property
    def is_number(self) -> bool:
        return False


def _payload_key(p):
    if p is None:
        return ()
    if isinstance(p, tuple):
        return tuple(_payload_key(x) for x in p)
    if isinstance(p, Expr):
        return p.sort_key()
    return (p,) if not isinstance(p, (int, Fraction)) else (str(p),)


class Num(Expr):
    __slots__ = ("value",)
    kind = "Num"

    def __init__(self, value):
        self.value = Fraction(value)
        self._init_cache()

    @property
    def payload(self):
        return self.value

    def _make_key(self):
        return (1, self.value)

    @property
    def is_number(self):
        return True

    @property
    def is_integer(self):
        return self.value.denominator == 1


class Sym(Expr):
    __slots__ = ("name",)
    kind = "Sym"

    def __init__(self, name: str):
        self.name = name
        self._init_cache()

    @property
    def payload(self):
        return self.name

    def _make_key(self):
        return (0, self.name)


class Add(Expr):
    __slots__ = ("terms",)
    kind = "Add"

    def __init__(self, terms):
        self.terms = tuple(terms)
        self._init_cache()

    @property
    def children(self):
        return self.terms


class Mul(Expr):
    __slots__ = ("factors",)
    kind = "Mul"

    def __init__(self, factors):
        self.factors = tuple(factors)
        self._init_cache()

    @property
    def children(self):
        return self.factors


class Pow(Expr):
    __slots__ = ("base", "exp")
    kind = "Pow"

    def __init__(self, base, exp):
        self.base = base
        self.exp = exp
        self._init_cache()

    @property
    def children(self):
        return (self.base, self.exp)


class Func(Expr):
    """Application of a builtin or abstract function to arguments."""

    __slots__ = ("name", "args")
    kind = "Func"

    def __init__(self, name, args):
        self.name = name
        self.args = tuple(args)
        self._init_cache()

    @property
    def payload(self):
        return self.name

    @property
    def children(self):
        return self.args

    @property
    def is_abstract(self):
        return self.name not in BUILTIN_FUNCTIONS


class Deriv(Expr):
    """Partial derivative of an abstract function, recorded per argument slot.

    ``orders[i]`` is how many times the function was differentiated with
    respect to its i-th argument; the node is evaluated at ``args``.
    """

    __slots__ = ("name", "args", "orders")
    kind = "Deriv"

    def __init__(self, name, args, orders):
        self.name = name
        self.args = tuple(args)
        self.orders = tuple(orders)
        self._init_cache()

    @property
    def payload(self):
        return (self.name, self.orders)

    @property
    def children(self):
        return self.args


class DeferredD(Expr):
    """Unevaluated total derivative of ``inner`` with respect to ``param``."""

    __slots__ = ("inner", "param", "order")
    kind = "DeferredD"

    def __init__(self, inner, param, order=1):
        self.inner = inner
        self.param = param
        self.order = order
        self._init_cache()

    @property
    def payload(self):
        return (self.param.name, self.order)

    @property
    def children(self):
        return (self.inner,)


class Abs(Expr):
    __slots__ = ("inner",)
    kind = "Abs"

    def __init__(self, inner):
        self.inner = inner
        self._init_cache()

    @property
    def children(self):
        return (self.inner,)


def _rebuild(kind, payload, children):
    if kind == "Num":
        return Num(payload)
    if kind == "Sym":
        return Sym(payload)
    if kind == "Add":
        return Add(children)
    if kind == "Mul":
        return Mul(children)
    if kind == "Pow":
        return Pow(*children)
    if kind == "Func":
        return Func(payload, children)
    if kind == "Deriv":
        return Deriv(payload[0], children, payload[1])
    if kind == "DeferredD":
        return DeferredD(children[0], Sym(payload[0]), payload[1])
    if kind == "Abs":
        return Abs(children[0])
    raise ValueError(kind)


ZERO = Num(0)
ONE = Num(1)
MINUS_ONE = Num(-1)
HALF = Num(Fraction(1, 2))


def num(value) -> Num:
    return Num(value)


def sym(name: str) -> Sym:
    return Sym(name)


def symbols(names: str) -> tuple:
    parts = names.replace(",", " ").split()
    return tuple(Sym(p) for p in parts)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not expressions")
    if isinstance(x, (int, Fraction)):
        return Num(x)
    if isinstance(x, str):
        from .parser import parse_expr
        return parse_expr(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an expression")


# ---------------------------------------------------------------------------
# canonical constructors


def coeff_and_rest(e: Expr):
    """Split ``e`` into a rational coefficient and the remaining factor."""
    if isinstance(e, Num):
        return e.value, ONE
    if isinstance(e, Mul) and isinstance(e.factors[0], Num):
        rest = e.factors[1:]
        return e.factors[0].value, (rest[0] if len(rest) == 1 else Mul(rest))
    return Fraction(1), e


def add(*args) -> Expr:
    constant = Fraction(0)
    coeffs: dict = {}
    order: list = []

    def visit(x):
        nonlocal constant
        if isinstance(x, Add):
            for t in x.terms:
                visit(t)
            return
        if isinstance(x, Num):
            constant += x.value
            return
        c, rest = coeff_and_rest(x)
        if rest in coeffs:
            coeffs[rest] += c
        else:
            coeffs[rest] = c
            order.append(rest)

    for a in args:
        visit(as_expr(a))
    terms = []
    for rest in order:
        c = coeffs[rest]
        if c == 0:
            continue
        terms.append(rest if c == 1 else _scaled(c, rest))
    if constant != 0:
        terms.append(Num(constant))
    if not terms:
        return ZERO
    if len(terms) == 1:
        return terms[0]
    terms.sort(key=Expr.sort_key)
    return Add(terms)


def _scaled(c: Fraction, rest: Expr) -> Expr:
    if isinstance(rest, Mul):
        return Mul((Num(c),) + rest.factors)
    return Mul((Num(c), rest))


def _base_exp(x: Expr):
    if isinstance(x, Pow):
        return x.base, x.exp
    return x, ONE


def mul(*args) -> Expr:
    coeff = Fraction(1)
    exps: dict = {}
    order: list = []

    def visit(x):
        nonlocal coeff
        if isinstance(x, Mul):
            for f in x.factors:
                visit(f)
            return
        if isinstance(x, Num):
            coeff *= x.value
            return
        b, e = _base_exp(x)
        if b in exps:
            exps[b] = add(exps[b], e)
        else:
            exps[b] = e
            order.append(b)

    for a in args:
        visit(as_expr(a))
    if coeff == 0:
        return ZERO
    factors = []
    for b in order:
        f = power(b, exps[b])
        if isinstance(f, Num):
            coeff *= f.value
        elif isinstance(f, Mul):
            # a power that split (e.g. numeric root extraction)
            for g in f.factors:
                if isinstance(g, Num):
                    coeff *= g.value
                else:
                    factors.append(g)
        else:
            factors.append(f)
    if coeff == 0:
        return ZERO
    if not factors:
        return Num(coeff)
    if len(factors) > 1:
        # merging may have produced repeated bases again (rare); re-merge once
        seen = {}
        merged = []
        for f in factors:
            b, e = _base_exp(f)
            if b in seen:
                merged[seen[b]] = power(b, add(_base_exp(merged[seen[b]])[1], e))
            else:
                seen[b] = len(merged)
                merged.append(f)
        factors = [f for f in merged if f != ONE]
        if not factors:
            return Num(coeff)
    factors.sort(key=Expr.sort_key)
    if len(factors) == 1 and isinstance(factors[0], Add) and coeff != 1:
        return add(*[mul(Num(coeff), t) for t in factors[0].terms])
    if coeff == 1:
        return factors[0] if len(factors) == 1 else Mul(factors)
    return Mul([Num(coeff)] + factors)


def _int_root(n: int, q: int):
    """Exact q-th root of a non-negative integer, or None."""
    if n < 0:
        return None
    r = round(n ** (1.0 / q)) if n < 2 ** 52 else int(n ** (1.0 / q))
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand ** q == n:
            return cand
    if n >= 2 ** 52:
        lo, hi = 0, 1
        while hi ** q <= n:
            hi *= 2
        while lo < hi - 1:
            mid = (lo + hi) // 2
            if mid ** q <= n:
                lo = mid
            else:
                hi = mid
        return lo if lo ** q == n else None
    return None


def _num_power(b: Fraction, e: Fraction) -> Expr:
    if e.denominator == 1:
        if b == 0 and e < 0:
            raise ZeroDivisionError("0 raised to a negative power")
        return Num(b ** int(e))
    if b == 0:
        return ZERO
    if b == 1:
        return ONE
    if b > 0:
        q = e.denominator
        p = e.numerator
        rn = _int_root(b.numerator, q)
        rd = _int_root(b.denominator, q)
        if rn is not None and rd is not None:
            return Num(Fraction(rn, rd) ** p)
        # pull the integer part of the exponent out: b^(p/q) = b^k * b^(r/q)
        k, r = divmod(p, q)
        if k != 0:
            return mul(Num(b ** k), Pow(Num(b), Num(Fraction(r, q))))
    return Pow(Num(b), Num(e))


def power(base, exp) -> Expr:
    base = as_expr(base)
    exp = as_expr(exp)
    if isinstance(exp, Num):
        e = exp.value
        if e == 0:
            return ONE
        if e == 1:
            return base
        if isinstance(base, Num):
            return _num_power(base.value, e)
        if isinstance(base, Pow) and isinstance(base.exp, Num):
            be = base.exp.value
            if e.denominator == 1 or be.denominator != 1:
                return power(base.base, Num(be * e))
        if isinstance(base, Mul):
            if e.denominator == 1:
                return mul(*[power(f, exp) for f in base.factors])
            c, rest = coeff_and_rest(base)
            if c > 0 and c != 1:
                return mul(_num_power(c, e), power(rest, exp))
        if isinstance(base, Abs) and e.denominator == 1 and e.numerator % 2 == 0:
            return power(base.inner, exp)
    elif isinstance(base, Num) and base.value == 1:
        return ONE
    return Pow(base, exp)


def neg(x) -> Expr:
    return mul(MINUS_ONE, x)


def sub(a, b) -> Expr:
    return add(a, neg(b))


def div(a, b) -> Expr:
    b = as_expr(b)
    if isinstance(b, Num):
        if b.value == 0:
            raise ZeroDivisionError("division by zero")
        return mul(a, Num(1 / b.value))
    return mul(a, power(b, MINUS_ONE))


def sqrt(x) -> Expr:
    return power(x, HALF)


def func(name: str, *args) -> Expr:
    args = tuple(as_expr(a) for a in args)
    if name in ("sin", "tan") and len(args) == 1 and args[0] == ZERO:
        return ZERO
    if name == "cos" and len(args) == 1 and args[0] == ZERO:
        return ONE
    if name == "exp" and len(args) == 1 and args[0] == ZERO:
        return ONE
    if name == "log" and len(args) == 1 and args[0] == ONE:
        return ZERO
    if name == "abs":
        return absval(args[0])
    if name == "sqrt":
        return sqrt(args[0])
    return Func(name, args)


def deriv(name: str, args, orders) -> Expr:
    args = tuple(as_expr(a) for a in args)
    orders = tuple(int(o) for o in orders)
    if len(orders) != len(args):
        raise ValueError("derivative orders must match the argument count")
    if any(o < 0 for o in orders):
        raise ValueError("derivative orders must be non-negative")
    if not any(orders):
        return Func(name, args)
    return Deriv(name, args, orders)


def deferred(inner, param: Sym, order: int = 1) -> Expr:
    inner = as_expr(inner)
    if order == 0:
        return inner
    if isinstance(inner, DeferredD) and inner.param == param:
        return DeferredD(inner.inner, param, inner.order + order)
    return DeferredD(inner, param, order)


def absval(x) -> Expr:
    x = as_expr(x)
    if isinstance(x, Num):
        return Num(abs(x.value))
    if isinstance(x, Abs):
        return x
    if isinstance(x, Mul):
        c, rest = coeff_and_rest(x)
        if c != 1:
            return mul(Num(abs(c)), absval(rest))
    if isinstance(x, Pow) and isinstance(x.exp, Num) and x.exp.value.denominator == 1 \
            and x.exp.value.numerator % 2 == 0:
        return x
    return Abs(x)


# ---------------------------------------------------------------------------
# traversal


def walk(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        x = stack.pop()
        yield x
        stack.extend(x.children)
        if isinstance(x, DeferredD):
            stack.append(x.param)


def has(e: Expr, pred: Callable[[Expr], bool]) -> bool:
    return any(pred(x) for x in walk(e))


def free_symbols(e: Expr) -> frozenset:
    if e._free is None:
        if isinstance(e, Sym):
            e._free = frozenset((e,))
        else:
            acc = set()
            for c in e.children:
                acc |= free_symbols(c)
            if isinstance(e, DeferredD):
                acc.add(e.param)
            e._free = frozenset(acc)
    return e._free


def function_names(e: Expr) -> set:
    return {x.name for x in walk(e) if isinstance(x, (Func, Deriv)) and x.name not in BUILTIN_FUNCTIONS}


def node_count(e: Expr) -> int:
    return sum(1 for _ in walk(e))


def rebuild(e: Expr, children) -> Expr:
    """Reconstruct ``e`` with new children through the canonical constructors."""
    if isinstance(e, (Num, Sym)):
        return e
    if isinstance(e, Add):
        return add(*children)
    if isinstance(e, Mul):
        return mul(*children)
    if isinstance(e, Pow):
        return power(children[0], children[1])
    if isinstance(e, Func):
        return func(e.name, *children)
    if isinstance(e, Deriv):
        return deriv(e.name, children, e.orders)
    if isinstance(e, DeferredD):
        return deferred(children[0], e.param, e.order)
    if isinstance(e, Abs):
        return absval(children[0])
    raise TypeError(type(e))


def replace_nodes(e: Expr, fn: Callable[[Expr], Expr | None]) -> Expr:
    """Bottom-up rewrite: ``fn`` may return a replacement or None to keep."""
    memo: dict = {}

    def go(x):
        if x in memo:
            return memo[x]
        if x.children:
            new_children = tuple(go(c) for c in x.children)
            y = x if new_children == x.children else rebuild(x, new_children)
        else:
            y = x
        r = fn(y)
        out = y if r is None else r
        memo[x] = out
        return out

    return go(e)


# ---------------------------------------------------------------------------
# substitution


class Lambda:
    """A closure over slot variables, used to replace abstract function heads."""

    __slots__ = ("params", "body")

    def __init__(self, params, body):
        self.params = tuple(params)
        self.body = as_expr(body)

    def __call__(self, *args):
        if len(args) != len(self.params) and self.params:
            raise ValueError(f"closure expects {len(self.params)} arguments, got {len(args)}")
        return substitute(self.body, dict(zip(self.params, args)))

    def derivative(self, orders) -> "Lambda":
        body = self.body
        params = self.params
        if not params:
            return Lambda((), ZERO) if any(orders) else self
        for p, n in zip(params, orders):
            for _ in range(n):
                body = diff(body, p)
        return Lambda(params, body)

    def __eq__(self, other):
        return isinstance(other, Lambda) and self.params == other.params and self.body == other.body

    def __hash__(self):
        return hash((self.params, self.body))

    def __repr__(self):
        return f"Lambda({', '.join(p.name for p in self.params)}: {self.body})"


class SubstitutionRule:
    """``target -> replacement``; a string target names an abstract function head."""

    __slots__ = ("target", "replacement")

    def __init__(self, target, replacement):
        if isinstance(target, str):
            if not isinstance(replacement, Lambda):
                replacement = Lambda((), as_expr(replacement))
        else:
            target = as_expr(target)
            if not isinstance(replacement, Lambda):
                replacement = as_expr(replacement)
        self.target = target
        self.replacement = replacement

    def __repr__(self):
        return f"{self.target} -> {self.replacement}"


def _normalize_rules(rules):
    if isinstance(rules, dict):
        rules = [SubstitutionRule(k, v) for k, v in rules.items()]
    node_rules = {}
    head_rules = {}
    for r in rules:
        if not isinstance(r, SubstitutionRule):
            r = SubstitutionRule(*r)
        if isinstance(r.target, str):
            head_rules[r.target] = r.replacement
        elif isinstance(r.target, Sym) and isinstance(r.replacement, Lambda):
            head_rules[r.target.name] = r.replacement
        else:
            node_rules[r.target] = r.replacement
    return node_rules, head_rules


def substitute(e: Expr, rules) -> Expr:
    """Simultaneous single-pass substitution.

    ``rules`` is a mapping or a sequence of ``SubstitutionRule``/pairs. Node
    targets are matched structurally, top-down; the replacement is not
    revisited. Head rules replace every application (and derivative) of an
    abstract function by the closure evaluated at the substituted arguments.
    """
    node_rules, head_rules = _normalize_rules(rules)
    if not node_rules and not head_rules:
        return e
    memo: dict = {}

    def go(x):
        if x in memo:
            return memo[x]
        if x in node_rules:
            out = node_rules[x]
        elif isinstance(x, (Func, Deriv)) and x.name in head_rules:
            lam = head_rules[x.name]
            args = tuple(go(a) for a in x.args)
            if isinstance(x, Deriv):
                lam = lam.derivative(x.orders)
            out = lam(*args) if lam.params else lam.body
        elif isinstance(x, Sym) and x.name in head_rules and not head_rules[x.name].params:
            out = head_rules[x.name].body
        elif x.children:
            new_children = tuple(go(c) for c in x.children)
            if isinstance(x, DeferredD) and x.param in node_rules and isinstance(node_rules[x.param], Sym):
                out = deferred(new_children[0], node_rules[x.param], x.order)
            else:
                out = x if new_children == x.children else rebuild(x, new_children)
        else:
            out = x
        memo[x] = out
        return out

    return go(e)


# ---------------------------------------------------------------------------
# differentiation


def _unit(n, i, base=None):
    orders = list(base) if base is not None else [0] * n
    orders[i] += 1
    return tuple(orders)


def _builtin_derivative(name: str, args) -> list:
    """Partial derivatives of a builtin function with respect to each argument."""
    a = args[0]
    if name == "sin":
        return [func("cos", a)]
    if name == "cos":
        return [neg(func("sin", a))]
    if name == "tan":
        return [power(func("cos", a), -2)]
    if name == "cot":
        return [neg(power(func("sin", a), -2))]
    if name == "sec":
        return [mul(func("sin", a), power(func("cos", a), -2))]
    if name == "csc":
        return [neg(mul(func("cos", a), power(func("sin", a), -2)))]
    if name == "exp":
        return [func("exp", a)]
    if name == "log":
        return [power(a, -1)]
    if name == "arcsin":
        return [power(sub(ONE, power(a, 2)), Fraction(-1, 2))]
    if name == "arccos":
        return [neg(power(sub(ONE, power(a, 2)), Fraction(-1, 2)))]
    if name == "arctan":
        return [power(add(ONE, power(a, 2)), -1)]
    if name == "sinh":
        return [func("cosh", a)]
    if name == "cosh":
        return [func("sinh", a)]
    if name == "atan2":
        y, x = args
        r2 = power(add(power(x, 2), power(y, 2)), -1)
        return [mul(x, r2), neg(mul(y, r2))]
    raise ValueError(f"no derivative rule for {name}")


def diff(e: Expr, s: Sym, n: int = 1) -> Expr:
    """Derivative of ``e`` with respect to the symbol ``s`` (``n`` times)."""
    for _ in range(n):
        e = _diff(e, s, {})
    return e


def _diff(e: Expr, s: Sym, memo: dict) -> Expr:
    if e in memo:
        return memo[e]
    if isinstance(e, Num):
        r = ZERO
    elif isinstance(e, Sym):
        r = ONE if e == s else ZERO
    elif s not in free_symbols(e):
        r = ZERO
    elif isinstance(e, Add):
        r = add(*[_diff(t, s, memo) for t in e.terms])
    elif isinstance(e, Mul):
        fs = e.factors
        terms = []
        for i, f in enumerate(fs):
            df = _diff(f, s, memo)
            if df != ZERO:
                terms.append(mul(*fs[:i], df, *fs[i + 1:]))
        r = add(*terms)
    elif isinstance(e, Pow):
        b, x = e.base, e.exp
        db = _diff(b, s, memo)
        if isinstance(x, Num) or s not in free_symbols(x):
            r = mul(x, power(b, sub(x, ONE)), db)
        else:
            dx = _diff(x, s, memo)
            r = mul(e, add(mul(dx, func("log", b)), mul(x, db, power(b, MINUS_ONE))))
    elif isinstance(e, Func):
        if e.name in BUILTIN_FUNCTIONS:
            partials = _builtin_derivative(e.name, e.args)
        else:
            k = len(e.args)
            partials = [deriv(e.name, e.args, _unit(k, i)) for i in range(k)]
        r = add(*[mul(p, _diff(a, s, memo)) for p, a in zip(partials, e.args)])
    elif isinstance(e, Deriv):
        k = len(e.args)
        r = add(*[mul(deriv(e.name, e.args, _unit(k, i, e.orders)), _diff(a, s, memo))
                  for i, a in enumerate(e.args)])
    elif isinstance(e, Abs):
        u = e.inner
        r = mul(u, _diff(u, s, memo), power(e, MINUS_ONE))
    elif isinstance(e, DeferredD):
        if s == e.param:
            r = deferred(e.inner, e.param, e.order + 1)
        else:
            r = deferred(_diff(e.inner, s, memo), e.param, e.order)
    else:
        raise TypeError(type(e))
    memo[e] = r
    return r


def activate_expr(e: Expr) -> Expr:
    """Replace every deferred derivative by the actual total derivative."""
    if not has(e, lambda x: isinstance(x, DeferredD)):
        return e

    def fn(x):
        if isinstance(x, DeferredD):
            return diff(x.inner, x.param, x.order)
        return None

    return replace_nodes(e, fn)


def diff_wrt(e: Expr, target: Expr) -> Expr:
    """Derivative with respect to an arbitrary node (e.g. a function value)."""
    if isinstance(target, Sym):
        return diff(e, target)
    names = {x.name for x in walk(e) if isinstance(x, Sym)}
    k = 0
    while f"_d{k}" in names:
        k += 1
    tmp = Sym(f"_d{k}")
    frozen = substitute(e, {target: tmp})
    return substitute(diff(frozen, tmp), {tmp: target})
