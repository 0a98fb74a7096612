"""Plain-text and LaTeX rendering of expressions.

The plain style with default options is a round-trippable format: its output
parses back to the same canonical tree. Display options trade that for
readability (argument suppression, derivative shorthand, dot notation).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .core import (Abs, Add, DeferredD, Deriv, Expr, Func, Mul, Num, Pow, Sym)

_SUPERSCRIPTS = str.maketrans("0123456789-", "⁰¹²³⁴⁵⁶⁷⁸⁹⁻")

_LATEX_FUNCS = {
    "sin": r"\sin", "cos": r"\cos", "tan": r"\tan", "cot": r"\cot", "sec": r"\sec",
    "csc": r"\csc", "exp": r"\exp", "log": r"\log", "arcsin": r"\arcsin",
    "arccos": r"\arccos", "arctan": r"\arctan", "sinh": r"\sinh", "cosh": r"\cosh",
}

_LATEX_GREEK = {
    "α": r"\alpha", "β": r"\beta", "γ": r"\gamma", "δ": r"\delta", "ε": r"\epsilon",
    "ζ": r"\zeta", "η": r"\eta", "θ": r"\theta", "ι": r"\iota", "κ": r"\kappa",
    "λ": r"\lambda", "μ": r"\mu", "ν": r"\nu", "ξ": r"\xi", "π": r"\pi", "ρ": r"\rho",
    "σ": r"\sigma", "τ": r"\tau", "υ": r"\upsilon", "φ": r"\phi", "χ": r"\chi",
    "ψ": r"\psi", "ω": r"\omega", "Γ": r"\Gamma", "Δ": r"\Delta", "Θ": r"\Theta",
    "Λ": r"\Lambda", "Σ": r"\Sigma", "Φ": r"\Phi", "Ψ": r"\Psi", "Ω": r"\Omega",
}

# precedence levels used for parenthesization
_P_ADD, _P_MUL, _P_NEG, _P_POW, _P_ATOM = 1, 2, 3, 4, 5


@dataclass(frozen=True)
class DisplayOptions:
    """How to render expressions.

    ``suppress_args`` names functions printed without their arguments; their
    derivatives use the ``∂t²a`` shorthand. ``curve_param`` turns on dot
    notation for functions of that single parameter.
    """

    style: str = "plain"
    suppress_args: frozenset = field(default_factory=frozenset)
    curve_param: str | None = None


PLAIN = DisplayOptions()


def superscript(n: int) -> str:
    return str(n).translate(_SUPERSCRIPTS)


def format_expr(e: Expr, style: str = "plain", opts: DisplayOptions | None = None) -> str:
    if opts is None:
        opts = DisplayOptions(style=style)
    elif style != opts.style and style != "plain":
        opts = DisplayOptions(style, opts.suppress_args, opts.curve_param)
    if opts.style == "latex":
        return _Latex(opts).fmt(e)
    return _Plain(opts).fmt(e)


def _split_fraction(e: Mul):
    """Split a product into (coefficient, numerator factors, denominator factors)."""
    coeff = Fraction(1)
    num, den = [], []
    for f in e.factors:
        if isinstance(f, Num):
            coeff *= f.value
        elif isinstance(f, Pow) and isinstance(f.exp, Num) and f.exp.value < 0:
            den.append(Pow(f.base, Num(-f.exp.value)) if f.exp.value != -1 else f.base)
        else:
            num.append(f)
    return coeff, num, den


class _Plain:
    mul_sep = "*"

    def __init__(self, opts: DisplayOptions):
        self.opts = opts
        self.shorthand = bool(opts.suppress_args) or opts.curve_param is not None

    def fmt(self, e: Expr) -> str:
        return self.render(e)[0]

    def paren(self, e: Expr, level: int) -> str:
        s, p = self.render(e)
        return f"({s})" if p < level else s

    # -- dispatch; each returns (text, precedence)
    def render(self, e: Expr):
        if isinstance(e, Num):
            return self.number(e.value)
        if isinstance(e, Sym):
            return self.symbol(e.name), _P_ATOM
        if isinstance(e, Add):
            return self.add(e), _P_ADD
        if isinstance(e, Mul):
            return self.mul(e)
        if isinstance(e, Pow):
            return self.pow(e)
        if isinstance(e, Func):
            return self.func(e), _P_ATOM
        if isinstance(e, Deriv):
            return self.deriv(e), _P_ATOM
        if isinstance(e, DeferredD):
            return self.deferred(e), _P_ATOM
        if isinstance(e, Abs):
            return self.abs(e), _P_ATOM
        raise TypeError(type(e))

    def symbol(self, name):
        return name

    def number(self, v: Fraction):
        if v.denominator == 1:
            return str(v.numerator), (_P_ATOM if v >= 0 else _P_NEG)
        s = f"{abs(v.numerator)}/{v.denominator}"
        return ("-" + s if v < 0 else s), (_P_MUL if v > 0 else _P_NEG)

    def add(self, e: Add) -> str:
        out = []
        rendered = [self.render(t)[0] for t in e.terms]
        # lead with a positive term when there is one: "2*M - r" rather than "-r + 2*M"
        if rendered[0].startswith("-"):
            k = next((i for i, s in enumerate(rendered) if not s.startswith("-")), None)
            if k is not None:
                rendered.insert(0, rendered.pop(k))
        for i, s in enumerate(rendered):
            negative = s.startswith("-")
            if i == 0:
                out.append(s)
            elif negative:
                out.append(" - " + s[1:])
            else:
                out.append(" + " + s)
        return "".join(out)

    def join_factors(self, fs) -> str:
        return self.mul_sep.join(self.paren(f, _P_MUL) for f in fs)

    def mul(self, e: Mul):
        coeff, num, den = _split_fraction(e)
        sign = "-" if coeff < 0 else ""
        c = abs(coeff)
        head = []
        if c.numerator != 1 or not num:
            head.append(str(c.numerator))
        numer = self.mul_sep.join(head + ([self.join_factors(num)] if num else []))
        denc = [str(c.denominator)] if c.denominator != 1 else []
        if not den and not denc:
            return sign + numer, (_P_NEG if sign else _P_MUL)
        if len(denc) + len(den) == 1:
            dtext = denc[0] if denc else self.paren(den[0], _P_POW)
        else:
            dtext = "(" + self.mul_sep.join(denc + [self.paren(d, _P_MUL) for d in den]) + ")"
        return f"{sign}{numer}/{dtext}", (_P_NEG if sign else _P_MUL)

    def pow(self, e: Pow):
        b, x = e.base, e.exp
        if isinstance(x, Num):
            v = x.value
            if v < 0:
                inner = Pow(b, Num(-v)) if v != -1 else b
                s = self.paren(inner, _P_POW)
                return f"1/{s}", _P_MUL
            if v == Fraction(1, 2):
                return f"sqrt({self.fmt(b)})", _P_ATOM
            if v.denominator == 1:
                return f"{self.paren(b, _P_ATOM)}^{v.numerator}", _P_POW
            return f"{self.paren(b, _P_ATOM)}^({v.numerator}/{v.denominator})", _P_POW
        return f"{self.paren(b, _P_ATOM)}^{self.paren(x, _P_ATOM)}", _P_POW

    def is_curve_fn(self, e) -> bool:
        cp = self.opts.curve_param
        return (cp is not None and isinstance(e, (Func, Deriv)) and len(e.args) == 1
                and isinstance(e.args[0], Sym) and e.args[0].name == cp and e.name not in _LATEX_FUNCS
                and e.name != "atan2")

    def func(self, e: Func) -> str:
        if self.is_curve_fn(e) or (e.name in self.opts.suppress_args):
            return self.symbol(e.name)
        return f"{e.name}({', '.join(self.fmt(a) for a in e.args)})"

    def slot_label(self, e: Deriv, i: int) -> str:
        return self.fmt(e.args[i])

    def deriv(self, e: Deriv) -> str:
        if self.is_curve_fn(e):
            n = e.orders[0]
            if n == 1:
                return self.symbol(e.name) + "̇"
            if n == 2:
                return self.symbol(e.name) + "̈"
            return f"∂{self.symbol(e.args[0].name)}{superscript(n)}{self.symbol(e.name)}"
        if e.name in self.opts.suppress_args:
            parts = []
            for i, n in enumerate(e.orders):
                if n:
                    lab = self.slot_label(e, i)
                    parts.append(lab + (superscript(n) if n > 1 else ""))
            sub = parts[0] if len(parts) == 1 else "{" + ",".join(parts) + "}"
            return f"∂{sub}{self.symbol(e.name)}"
        orders = ", ".join(str(n) for n in e.orders)
        args = ", ".join(self.fmt(a) for a in e.args)
        return f"Derivative({orders})({e.name})({args})"

    def deferred(self, e: DeferredD) -> str:
        if self.shorthand:
            sup = superscript(e.order) if e.order > 1 else ""
            return f"∂{e.param.name}{sup}({self.fmt(e.inner)})"
        if e.order == 1:
            return f"DeferredD({self.fmt(e.inner)}, {e.param.name})"
        return f"DeferredD({self.fmt(e.inner)}, {e.param.name}, {e.order})"

    def abs(self, e: Abs) -> str:
        if self.shorthand:
            return f"|{self.fmt(e.inner)}|"
        return f"abs({self.fmt(e.inner)})"


class _Latex(_Plain):
    mul_sep = " "

    def __init__(self, opts):
        super().__init__(opts)
        self.shorthand = True

    def symbol(self, name):
        base = name.rstrip("̇̈")
        out = "".join(_LATEX_GREEK.get(ch, ch) + (" " if ch in _LATEX_GREEK else "") for ch in base).strip()
        if len(base) > 1 and base.isascii():
            out = rf"\mathrm{{{base}}}"
        return out

    def number(self, v: Fraction):
        if v.denominator == 1:
            return str(v.numerator), (_P_ATOM if v >= 0 else _P_NEG)
        s = rf"\frac{{{abs(v.numerator)}}}{{{v.denominator}}}"
        return ("-" + s if v < 0 else s), (_P_MUL if v > 0 else _P_NEG)

    def paren(self, e, level):
        s, p = self.render(e)
        return rf"\left({s}\right)" if p < level else s

    def mul(self, e: Mul):
        coeff, num, den = _split_fraction(e)
        sign = "-" if coeff < 0 else ""
        c = abs(coeff)
        nparts = ([str(c.numerator)] if c.numerator != 1 or not num else []) + \
            [self.paren(f, _P_MUL) for f in num]
        dparts = ([str(c.denominator)] if c.denominator != 1 else []) + [self.paren(d, _P_MUL) for d in den]
        numer = " ".join(nparts) if nparts else "1"
        if not dparts:
            return sign + numer, (_P_NEG if sign else _P_MUL)
        return rf"{sign}\frac{{{numer}}}{{{' '.join(dparts)}}}", (_P_NEG if sign else _P_MUL)

    def pow(self, e: Pow):
        b, x = e.base, e.exp
        if isinstance(x, Num):
            v = x.value
            if v < 0:
                inner = Pow(b, Num(-v)) if v != -1 else b
                return rf"\frac{{1}}{{{self.fmt(inner)}}}", _P_MUL
            if v == Fraction(1, 2):
                return rf"\sqrt{{{self.fmt(b)}}}", _P_ATOM
            ex = str(v.numerator) if v.denominator == 1 else rf"{v.numerator}/{v.denominator}"
        else:
            ex = self.fmt(x)
        if isinstance(b, Func) and b.name in _LATEX_FUNCS:
            return rf"{_LATEX_FUNCS[b.name]}^{{{ex}}}\left({self.fmt(b.args[0])}\right)", _P_POW
        return f"{self.paren(b, _P_ATOM)}^{{{ex}}}", _P_POW

    def func(self, e: Func) -> str:
        if self.is_curve_fn(e) or e.name in self.opts.suppress_args:
            return self.symbol(e.name)
        args = ", ".join(self.fmt(a) for a in e.args)
        if e.name in _LATEX_FUNCS:
            return rf"{_LATEX_FUNCS[e.name]}\left({args}\right)"
        if e.name == "atan2":
            return rf"\operatorname{{atan2}}\left({args}\right)"
        return rf"{self.symbol(e.name)}\left({args}\right)"

    def deriv(self, e: Deriv) -> str:
        if self.is_curve_fn(e):
            n = e.orders[0]
            if n <= 2:
                return (r"\dot{" if n == 1 else r"\ddot{") + self.symbol(e.name) + "}"
        parts = []
        for i, n in enumerate(e.orders):
            if n:
                lab = self.fmt(e.args[i])
                parts.append(lab + (f"^{{{n}}}" if n > 1 else ""))
        head = self.symbol(e.name)
        if e.name not in self.opts.suppress_args and not self.is_curve_fn(e):
            head += r"\left(" + ", ".join(self.fmt(a) for a in e.args) + r"\right)"
        return rf"\partial_{{{','.join(parts)}}}{head}"

    def deferred(self, e: DeferredD) -> str:
        sup = f"^{{{e.order}}}" if e.order > 1 else ""
        return rf"\partial_{{{self.symbol(e.param.name)}}}{sup}\left({self.fmt(e.inner)}\right)"

    def abs(self, e: Abs) -> str:
        return rf"\left|{self.fmt(e.inner)}\right|"
