"""Assumption-aware simplification.

Pipeline:

1. bottom-up kernel rewrites: trig functions of inverse-trig arguments,
   parity of sin/cos, tan/cot/sec/csc in terms of sin and cos, absolute values
   decided by sign analysis, and extraction of perfect powers from radicals;
2. the expression is mapped into a field of rational functions whose
   generators are the remaining non-rational pieces ("kernels");
3. kernel relations are reduced there: ``s^q -> B`` for ``s = B^(1/q)``,
   ``|u|^2 -> u^2`` and ``cos(a)^2 -> 1 - sin(a)^2``; square roots are cleared
   from denominators;
4. the field element is converted back, picking factored or expanded
   numerator and denominator by node count.

Only step 2's arithmetic (normalization over a common denominator with
cancellation of common factors) is delegated to sympy's sparse polynomials.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

from sympy import QQ
from sympy.polys.fields import field as _sympy_field

from . import core
from .assumptions import NO_ASSUMPTIONS, Assumptions, sign_of
from .core import (Abs, Add, DeferredD, Deriv, Expr, Func, Mul, Num, Pow, Sym,
                   absval, add, func, mul, neg, node_count, power)

__all__ = ["simplify", "expand_rational", "together"]


@lru_cache(maxsize=None)
def _field(n: int):
    names = ",".join(f"g{i}" for i in range(n)) if n else "g0"
    K, *gens = _sympy_field(names, QQ)
    return K, gens


def _qq(v: Fraction):
    return QQ(v.numerator, v.denominator)


def _frac(c) -> Fraction:
    return Fraction(int(c.numerator), int(c.denominator))


# ---------------------------------------------------------------------------
# step 1: kernel rewrites


def _neg_arg(a: Expr):
    """If ``a`` has a negative leading coefficient, return ``-a``."""
    c, _ = core.coeff_and_rest(a)
    if isinstance(a, Add):
        c, _ = core.coeff_and_rest(a.terms[0])
    if c < 0:
        return neg(a)
    return None


def _trig_rewrite(e: Func):
    name, args = e.name, e.args
    if name == "tan":
        return mul(func("sin", args[0]), power(func("cos", args[0]), -1))
    if name == "cot":
        return mul(func("cos", args[0]), power(func("sin", args[0]), -1))
    if name == "sec":
        return power(func("cos", args[0]), -1)
    if name == "csc":
        return power(func("sin", args[0]), -1)
    if name not in ("sin", "cos"):
        return None
    a = args[0]
    if isinstance(a, Func):
        if a.name == "arccos":
            w = a.args[0]
            return w if name == "cos" else core.sqrt(core.sub(1, power(w, 2)))
        if a.name == "arcsin":
            w = a.args[0]
            return w if name == "sin" else core.sqrt(core.sub(1, power(w, 2)))
        if a.name == "arctan":
            w = a.args[0]
            r = power(add(1, power(w, 2)), Fraction(-1, 2))
            return mul(w, r) if name == "sin" else r
        if a.name == "atan2":
            y, x = a.args
            r = power(add(power(x, 2), power(y, 2)), Fraction(-1, 2))
            return mul(y, r) if name == "sin" else mul(x, r)
    m = _neg_arg(a)
    if m is not None:
        return neg(func("sin", m)) if name == "sin" else func("cos", m)
    return None


class Simplifier:
    def __init__(self, assumptions: Assumptions = NO_ASSUMPTIONS):
        self.a = assumptions
        self.memo: dict = {}

    # -- public
    def __call__(self, e: Expr) -> Expr:
        if isinstance(e, (Num, Sym)):
            return e
        r = self.memo.get(e)
        if r is None:
            r = self._simplify(e)
            self.memo[e] = r
        return r

    # -- kernel normalization
    def kernel(self, e: Expr) -> Expr:
        """Simplify the inside of a non-rational node and apply kernel rules."""
        if isinstance(e, Func):
            args = tuple(self(a) for a in e.args)
            f = func(e.name, *args)
            if isinstance(f, Func):
                r = _trig_rewrite(f)
                if r is not None:
                    return self(r)
            return f
        if isinstance(e, Deriv):
            return core.deriv(e.name, [self(a) for a in e.args], e.orders)
        if isinstance(e, DeferredD):
            return core.deferred(self(e.inner), e.param, e.order)
        if isinstance(e, Abs):
            u = self(e.inner)
            s = sign_of(u, self.a)
            if s in ("pos", "nonneg", "zero"):
                return u
            if s in ("neg", "nonpos"):
                return self(neg(u))
            if isinstance(u, Mul) or isinstance(u, Pow):
                # split |a*b| into |a|*|b| so that known-sign factors leave
                parts = u.factors if isinstance(u, Mul) else (u,)
                out = []
                for p in parts:
                    if isinstance(p, Pow) and isinstance(p.exp, Num) and p.exp.value.denominator == 1:
                        out.append(power(self.kernel(Abs(p.base)), p.exp))
                    elif isinstance(p, Num):
                        out.append(Num(abs(p.value)))
                    else:
                        ps = sign_of(p, self.a)
                        if ps in ("pos", "nonneg", "zero"):
                            out.append(p)
                        elif ps in ("neg", "nonpos"):
                            out.append(neg(p))
                        else:
                            out.append(absval(p))
                return mul(*out)
            return absval(u)
        if isinstance(e, Pow):
            return self.radical(e)
        return e

    def radical(self, e: Pow) -> Expr:
        base = self(e.base)
        x = e.exp
        if not isinstance(x, Num):
            return power(base, self(x))
        v = x.value
        if v.denominator == 1:
            return power(base, x)
        q = v.denominator
        p = v.numerator
        root = self.root(base, q)
        return power(root, p)

    def root(self, base: Expr, q: int) -> Expr:
        """Principal q-th root of an already simplified expression."""
        if isinstance(base, Num):
            return power(base, Fraction(1, q))
        num_e, den_e = _numer_denom(base)
        den_sign = sign_of(den_e, self.a)
        if den_e != core.ONE and den_sign not in ("pos", "nonneg"):
            # sqrt(N/D) = sqrt(N*D)/|D|, valid for either sign of D
            inner = self(mul(num_e, power(den_e, q - 1)))
            return mul(self.root(inner, q), power(self(Abs(den_e)), -1))
        outside = []
        inside = []
        for part, sgn in ((num_e, 1), (den_e, -1)):
            for fac, mult in self.factor_parts(part):
                m, r = divmod(mult, q)
                if m:
                    if isinstance(fac, Num):
                        outside.append(power(fac, sgn * m))
                    elif q % 2 == 0 and r % 2 == 0 and sign_of(fac, self.a) not in ("pos", "nonneg", "zero"):
                        outside.append(power(self.kernel(Abs(fac)), sgn * m))
                    else:
                        outside.append(power(fac, sgn * m))
                if r:
                    inside.append(power(fac, sgn * r))
        if not outside and den_e == core.ONE:
            return Pow(base, Num(Fraction(1, q)))
        ins_num = mul(*[f for f in inside if not _is_reciprocal(f)])
        ins_den = mul(*[power(f, -1) for f in inside if _is_reciprocal(f)])
        parts = list(outside)
        for rest, sgn in ((ins_num, 1), (ins_den, -1)):
            if rest == core.ONE:
                continue
            if not isinstance(rest, Num):
                rest = self(rest)
            parts.append(power(Pow(rest, Num(Fraction(1, q))) if not isinstance(rest, Num)
                               else power(rest, Fraction(1, q)), sgn))
        return mul(*parts)

    def factor_parts(self, e: Expr):
        """Factor a polynomial expression in its kernels; yields (factor, multiplicity)."""
        if isinstance(e, Num):
            return [(e, 1)] if e.value != 1 else []
        conv = _Converter(self)
        fe = conv.to_field(e)
        if fe.denom != 1 and fe.denom != fe.numer.ring.one:
            return [(e, 1)]
        content, facs = fe.numer.factor_list()
        out = []
        c = _frac(content)
        if c != 1:
            out.append((Num(c), 1))
        for poly, mult in facs:
            out.append((conv.poly_to_expr(poly), mult))
        return out

    # -- main
    def _simplify(self, e: Expr) -> Expr:
        if isinstance(e, (Func, Deriv, DeferredD, Abs)):
            k = self.kernel(e)
            if k is not e and k != e:
                # a kernel rule fired; the result may need rational normalization
                return self._rational(k) if not _is_atomic_kernel(k) else k
            return k
        return self._rational(e)

    def _rational(self, e: Expr) -> Expr:
        conv = _Converter(self)
        fe = conv.to_field(e)
        fe = conv.reduce(fe)
        best = conv.to_expr(fe)
        alt = conv.sin_to_cos(fe)
        if alt is not None:
            other = conv.to_expr(alt)
            if node_count(other) < node_count(best):
                best = other
        return best


def _is_reciprocal(e):
    return isinstance(e, Pow) and isinstance(e.exp, Num) and e.exp.value < 0


def _is_atomic_kernel(e):
    return isinstance(e, (Sym, Num, Func, Deriv, DeferredD, Abs))


def _numer_denom(e: Expr):
    """Split into numerator and denominator by negative integer exponents."""
    factors = e.factors if isinstance(e, Mul) else (e,)
    num, den = [], []
    for f in factors:
        if isinstance(f, Pow) and isinstance(f.exp, Num) and f.exp.value < 0 and f.exp.value.denominator == 1:
            den.append(power(f.base, -f.exp.value))
        elif isinstance(f, Num) and f.value.denominator != 1:
            num.append(Num(f.value.numerator))
            den.append(Num(f.value.denominator))
        else:
            num.append(f)
    return mul(*num), mul(*den)


# ---------------------------------------------------------------------------
# steps 2-4: rational normalization in kernels


class _Converter:
    def __init__(self, simp: Simplifier):
        self.simp = simp
        self.kernels: list = []
        self.index: dict = {}
        self.pending: list = []

    # collecting kernels first lets the generator order be canonical
    def collect(self, e: Expr, acc: dict) -> Expr:
        """Simplify kernels inside ``e`` and record them in ``acc``."""
        if isinstance(e, Num):
            return e
        if isinstance(e, Add):
            return add(*[self.collect(t, acc) for t in e.terms])
        if isinstance(e, Mul):
            return mul(*[self.collect(f, acc) for f in e.factors])
        if isinstance(e, Pow) and isinstance(e.exp, Num) and e.exp.value.denominator == 1:
            return power(self.collect(e.base, acc), e.exp)
        k = self.simp.kernel(e)
        return self.collect_done(k, acc)

    def collect_done(self, e: Expr, acc: dict) -> Expr:
        """Record kernels of an expression whose kernels are already simplified."""
        if isinstance(e, Num):
            return e
        if isinstance(e, Add):
            for t in e.terms:
                self.collect_done(t, acc)
            return e
        if isinstance(e, Mul):
            for f in e.factors:
                self.collect_done(f, acc)
            return e
        if isinstance(e, Pow) and isinstance(e.exp, Num):
            v = e.exp.value
            if v.denominator == 1:
                self.collect_done(e.base, acc)
            else:
                acc[Pow(e.base, Num(Fraction(1, v.denominator)))] = None
            return e
        acc[e] = None
        return e

    def to_field(self, e: Expr):
        acc: dict = {}
        e = self.collect(e, acc)
        # radical and absolute-value bases may contain further kernels
        todo = list(acc)
        seen = set(todo)
        while todo:
            k = todo.pop()
            inner = None
            if isinstance(k, Pow) and isinstance(k.exp, Num):
                inner = k.base
            elif isinstance(k, Abs):
                inner = k.inner
            if inner is None:
                continue
            sub_acc: dict = {}
            self.collect_done(inner, sub_acc)
            for k2 in sub_acc:
                if k2 not in seen:
                    seen.add(k2)
                    acc[k2] = None
                    todo.append(k2)
        self.kernels = sorted(acc, key=Expr.sort_key)
        self.index = {k: i for i, k in enumerate(self.kernels)}
        self.K, self.gens = _field(len(self.kernels))
        self.memo = {}
        return self.build(e)

    def build(self, e: Expr):
        m = self.memo.get(e)
        if m is not None:
            return m
        K = self.K
        if isinstance(e, Num):
            r = K(_qq(e.value))
        elif isinstance(e, Add):
            r = K.zero
            for t in e.terms:
                r = r + self.build(t)
        elif isinstance(e, Mul):
            r = K.one
            for f in e.factors:
                r = r * self.build(f)
        elif isinstance(e, Pow) and isinstance(e.exp, Num) and e.exp.value.denominator == 1:
            b = self.build(e.base)
            r = b ** int(e.exp.value)
        elif isinstance(e, Pow) and isinstance(e.exp, Num):
            v = e.exp.value
            kern = Pow(e.base, Num(Fraction(1, v.denominator)))
            r = self.gens[self.index[kern]] ** v.numerator
        else:
            r = self.gens[self.index[e]]
        self.memo[e] = r
        return r

    # -- relations
    def relations(self):
        """(generator index, power q, replacement field element) for s^q -> B."""
        rels = []
        for i, k in enumerate(self.kernels):
            if isinstance(k, Pow) and isinstance(k.exp, Num):
                rels.append((i, k.exp.value.denominator, self.build(k.base)))
            elif isinstance(k, Abs):
                rels.append((i, 2, self.build(k.inner) ** 2))
        return rels

    def trig_pairs(self):
        pairs = []
        for i, k in enumerate(self.kernels):
            if isinstance(k, Func) and k.name == "cos":
                s = Func("sin", k.args)
                if s in self.index:
                    pairs.append((self.index[s], i))
        return pairs

    def reduce_poly(self, p, gi: int, q: int, repl):
        """Rewrite g_gi^q -> repl throughout the polynomial p."""
        K = self.K
        out = K.zero
        changed = False
        for monom, c in p.terms():
            e = monom[gi]
            if e >= q:
                changed = True
                m, r = divmod(e, q)
                mono = list(monom)
                mono[gi] = r
                out = out + K(p.ring({tuple(mono): c})) * repl ** m
            else:
                out = out + K(p.ring({monom: c}))
        return out, changed

    def reduce(self, fe):
        rels = self.relations()
        pairs = self.trig_pairs()
        if not rels and not pairs:
            return fe
        for _ in range(8):
            changed = False
            for gi, q, repl in rels:
                n, c1 = self.reduce_poly(fe.numer, gi, q, repl)
                d, c2 = self.reduce_poly(fe.denom, gi, q, repl)
                if c1 or c2:
                    fe = n / d
                    changed = True
            for si, ci in pairs:
                repl = 1 - self.gens[si] ** 2
                n, c1 = self.reduce_poly(fe.numer, ci, 2, repl)
                d, c2 = self.reduce_poly(fe.denom, ci, 2, repl)
                if c1 or c2:
                    fe = n / d
                    changed = True
            fe, c3 = self.rationalize(fe, rels)
            if not (changed or c3):
                break
        return fe

    def sin_to_cos(self, fe):
        """The alternative trig form with sin^2 -> 1 - cos^2, or None if not applicable."""
        pairs = self.trig_pairs()
        if not pairs:
            return None
        changed = False
        for si, ci in pairs:
            repl = 1 - self.gens[ci] ** 2
            n, c1 = self.reduce_poly(fe.numer, si, 2, repl)
            d, c2 = self.reduce_poly(fe.denom, si, 2, repl)
            if c1 or c2:
                fe = n / d
                changed = True
        return fe if changed else None

    def rationalize(self, fe, rels):
        """Clear square-root-like generators (s^2 = B) from the denominator."""
        changed = False
        for gi, q, repl in rels:
            if q != 2:
                continue
            d = fe.denom
            if d.degree(gi) != 1:
                continue
            g = self.gens[gi]
            # d = A + g*C  ->  multiply by A - g*C
            A = self.K.zero
            C = self.K.zero
            for monom, c in d.terms():
                term = self.K(d.ring({tuple(0 if j == gi else e for j, e in enumerate(monom)): c}))
                if monom[gi]:
                    C = C + term
                else:
                    A = A + term
            conj = A - g * C
            new_den = A ** 2 - repl * C ** 2
            if new_den == 0:
                continue
            fe = (self.K(fe.numer) * conj) / new_den
            n, _ = self.reduce_poly(fe.numer, gi, 2, repl)
            dd, _ = self.reduce_poly(fe.denom, gi, 2, repl)
            fe = n / dd
            changed = True
        return fe, changed

    # -- back to trees
    def gen_expr(self, i: int, e: int) -> Expr:
        k = self.kernels[i]
        if isinstance(k, Pow) and isinstance(k.exp, Num):
            return power(k.base, Num(k.exp.value * e))
        return power(k, e)

    def poly_to_expr(self, p) -> Expr:
        terms = []
        for monom, c in p.terms():
            fs = [Num(_frac(c))]
            for i, e in enumerate(monom):
                if e:
                    fs.append(self.gen_expr(i, e))
            terms.append(mul(*fs))
        return add(*terms)

    def poly_best(self, p):
        """(numeric coefficient, expression) for p, factored when that is not larger."""
        expanded = self.poly_to_expr(p)
        if len(p.terms()) <= 1:
            return Fraction(1), expanded
        content, facs = p.factor_list()
        if len(facs) == 1 and facs[0][1] == 1 and abs(content) == 1:
            return Fraction(1), expanded
        sign = 1
        fixed = []
        for poly, mult in facs:
            if _prefer_negated(poly):
                poly = -poly
                sign *= (-1) ** mult
            fixed.append((poly, mult))
        if content * sign < 0:
            # absorb an overall minus sign into a factor: (2*M - r) rather than -(r - 2*M)
            for k, (poly, mult) in enumerate(fixed):
                if mult % 2 == 1 and len(poly.terms()) > 1:
                    fixed[k] = (-poly, mult)
                    sign = -sign
                    break
        coef = _frac(content) * sign
        rest = mul(*[power(self.poly_to_expr(poly), mult) for poly, mult in fixed])
        size = node_count(rest) + (0 if coef == 1 else 1)
        if size <= node_count(expanded):
            return coef, rest
        return Fraction(1), expanded

    def to_expr(self, fe) -> Expr:
        if fe == 0:
            return core.ZERO
        num, den = fe.numer, fe.denom
        R = num.ring
        # pull a sqrt-like generator back into the denominator when that cancels a factor
        extra = []
        for gi, q, repl in self.relations():
            if q != 2 or num.degree(gi) != 1 or repl.denom != 1:
                continue
            if any(m[gi] != 1 for m, _ in num.terms()):
                continue
            B = repl.numer
            qt, rm = den.div([B])
            if rm == 0 and qt[0] != 0:
                g = R.gens[gi]
                num = num.exquo(g)
                den = qt[0]
                kern = self.kernels[gi]
                extra.append(power(kern, -1))
        # choose the overall sign split between numerator and denominator
        if _prefer_negated(den, num):
            num, den = -num, -den
        whole = self._ratio(num, den, extra)
        if not extra and len(den.terms()) > 0 and den != 1:
            # polynomial part plus proper remainder, when that reads shorter
            (q,), rem = num.div([den])
            if q != 0 and not q.is_ground and len(rem.terms()) < len(num.terms()):
                split = add(self.poly_to_expr(q), self._ratio(rem, den, []) if rem != 0 else core.ZERO)
                if node_count(split) < node_count(whole):
                    return split
        return whole

    def _ratio(self, num, den, extra) -> Expr:
        if den.LC < 0 and len(den.terms()) == 1:
            num, den = -num, -den
        cn, n_e = self.poly_best(num)
        cd, d_e = self.poly_best(den)
        return mul(Num(cn / cd), n_e, power(d_e, -1), *extra)


def _prefer_negated(p, other=None) -> bool:
    """Pick the sign of a polynomial (optionally shared with ``other``): fewer
    negative coefficients overall, then a positive term of highest degree in
    ``p``, later generators weighing more."""
    terms = list(p.terms())
    both = terms + (list(other.terms()) if other is not None else [])
    neg = sum(1 for _, c in both if c < 0)
    if 2 * neg != len(both):
        return 2 * neg > len(both)
    lead = max(terms, key=lambda t: (sum(t[0]), tuple(reversed(t[0]))))
    return lead[1] < 0


def _is_radical(e: Pow) -> bool:
    return isinstance(e.exp, Num) and e.exp.value.denominator != 1


def simplify(e: Expr, assumptions: Assumptions = NO_ASSUMPTIONS) -> Expr:
    """Return a canonical simplified form of ``e`` under ``assumptions``."""
    s = Simplifier(assumptions)
    r = s(e)
    # a second pass settles any rewrite that exposed new structure
    r2 = Simplifier(assumptions)(r)
    return r2


def together(e: Expr) -> Expr:
    """Rational normalization only, without assumptions-dependent rules."""
    return Simplifier(Assumptions(assume_real=False))._rational(e)


def expand_rational(e: Expr) -> Expr:
    return together(e)
