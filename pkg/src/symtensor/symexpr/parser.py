"""Pratt parser for the expression text grammar.

Grammar: infix ``+ - * / ^``, unary minus, parentheses, integer and decimal
literals (kept exact), identifiers made of Unicode letters/digits/underscores,
and function application ``f(x, y)``. Two special forms exist so that printed
output parses back to the same tree:

* ``Derivative(1, 0)(f)(t, x)`` is the derivative of ``f`` once in its first
  slot, evaluated at ``(t, x)``;
* ``DeferredD(expr, λ[, n])`` is an unevaluated total derivative.
"""

from __future__ import annotations

from fractions import Fraction

from ..errors import ExprSyntaxError
from . import core
from .core import Expr, Lambda, SubstitutionRule, Sym

# Mathematica-style capitalized names accepted as aliases
ALIASES = {
    "Sin": "sin", "Cos": "cos", "Tan": "tan", "Cot": "cot", "Sec": "sec", "Csc": "csc",
    "Exp": "exp", "Log": "log", "Sqrt": "sqrt", "Abs": "abs", "ArcSin": "arcsin",
    "ArcCos": "arccos", "ArcTan": "arctan", "arctan2": "atan2", "Sinh": "sinh", "Cosh": "cosh",
}

_OPERATORS = {"+", "-", "*", "/", "^", "(", ")", ",", "&", "[", "]", "{", "}"}
_UNICODE_OPS = {"−": "-", "·": "*", "×": "*", "÷": "/"}


class Token:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind, text, pos):
        self.kind = kind
        self.text = text
        self.pos = pos

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.pos})"


def _is_ident_start(ch):
    return ch.isalpha() or ch == "_" or ch in "□"


def _is_ident_char(ch):
    # combining dot above/diaeresis are allowed so dotted names survive
    return ch.isalnum() or ch == "_" or ch in "̇̈'"


def tokenize(text: str) -> list:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _UNICODE_OPS:
            tokens.append(Token("op", _UNICODE_OPS[ch], i))
            i += 1
            continue
        if ch == "-" and i + 1 < n and text[i + 1] == ">":
            tokens.append(Token("op", "->", i))
            i += 2
            continue
        if ch == "*" and i + 1 < n and text[i + 1] == "*":
            tokens.append(Token("op", "^", i))
            i += 2
            continue
        if ch in _OPERATORS:
            tokens.append(Token("op", ch, i))
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            tokens.append(Token("num", text[i:j], i))
            i = j
            continue
        if ch == "#":
            j = i + 1
            while j < n and text[j].isdigit():
                j += 1
            slot = text[i + 1:j] or "1"
            tokens.append(Token("slot", slot, i))
            i = j
            continue
        if _is_ident_start(ch):
            j = i + 1
            while j < n and _is_ident_char(text[j]):
                j += 1
            tokens.append(Token("ident", text[i:j], i))
            i = j
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(Token("end", "", n))
    return tokens


# binding powers
_INFIX = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_PREFIX_MINUS = 30


class Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0
        self.max_slot = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text):
        t = self.tok
        if t.kind != "op" or t.text != text:
            found = t.text or "end of input"
            raise ExprSyntaxError(f"expected {text!r}, found {found!r}", t.pos)
        return self.advance()

    def at(self, text) -> bool:
        return self.tok.kind == "op" and self.tok.text == text

    def parse(self, rbp: int = 0) -> Expr:
        t = self.advance()
        left = self.nud(t)
        while True:
            t = self.tok
            if t.kind != "op" or t.text not in _INFIX:
                break
            lbp = _INFIX[t.text]
            if lbp <= rbp:
                break
            self.advance()
            left = self.led(t, left)
        return left

    def nud(self, t: Token) -> Expr:
        if t.kind == "num":
            return core.Num(Fraction(t.text))
        if t.kind == "slot":
            k = int(t.text)
            self.max_slot = max(self.max_slot, k)
            return Sym(f"#{k}")
        if t.kind == "ident":
            return self.identifier(t)
        if t.kind == "op":
            if t.text == "-":
                return core.neg(self.parse(_PREFIX_MINUS))
            if t.text == "+":
                return self.parse(_PREFIX_MINUS)
            if t.text == "(":
                e = self.parse()
                self.expect(")")
                return e
        found = t.text or "end of input"
        raise ExprSyntaxError(f"unexpected {found!r}", t.pos)

    def led(self, t: Token, left: Expr) -> Expr:
        op = t.text
        if op == "^":
            # right associative; allow a signed exponent such as x^-1
            right = self.parse(_INFIX["^"] - 1)
            return core.power(left, right)
        right = self.parse(_INFIX[op])
        if op == "+":
            return core.add(left, right)
        if op == "-":
            return core.sub(left, right)
        if op == "*":
            return core.mul(left, right)
        if op == "/":
            if right == core.ZERO:
                raise ExprSyntaxError("division by zero", t.pos)
            return core.div(left, right)
        raise ExprSyntaxError(f"unknown operator {op!r}", t.pos)

    def arglist(self, close=")") -> list:
        args = []
        if self.at(close):
            self.advance()
            return args
        while True:
            args.append(self.parse())
            if self.at(","):
                self.advance()
                continue
            self.expect(close)
            return args

    def identifier(self, t: Token) -> Expr:
        name = ALIASES.get(t.text, t.text)
        bracket = "[" if self.at("[") else "(" if self.at("(") else None
        if bracket is None:
            return Sym(t.text)
        self.advance()
        close = "]" if bracket == "[" else ")"
        if name == "Derivative":
            return self.derivative(t, close)
        args = self.arglist(close)
        if name == "DeferredD":
            if len(args) not in (2, 3) or not isinstance(args[1], Sym):
                raise ExprSyntaxError("DeferredD expects (expr, parameter[, order])", t.pos)
            order = 1
            if len(args) == 3:
                if not (isinstance(args[2], core.Num) and args[2].is_integer and args[2].value > 0):
                    raise ExprSyntaxError("DeferredD order must be a positive integer", t.pos)
                order = int(args[2].value)
            return core.deferred(args[0], args[1], order)
        if not args:
            raise ExprSyntaxError(f"function {t.text!r} needs at least one argument", t.pos)
        stripped = name.rstrip("'")
        if stripped != name and stripped and len(args) == 1:
            # prime notation: t''(λ) is the second derivative of t
            return core.deriv(stripped, args, (len(name) - len(stripped),))
        if name == "arctan" and len(args) == 2:
            # two-argument arctan(x, y) is the angle of the point (x, y)
            return core.func("atan2", args[1], args[0])
        if name in ("abs", "sqrt") and len(args) != 1:
            raise ExprSyntaxError(f"{name} takes one argument", t.pos)
        if name == "atan2" and len(args) != 2:
            raise ExprSyntaxError("atan2 takes two arguments", t.pos)
        if name in core.BUILTIN_FUNCTIONS and name != "atan2" and len(args) != 1:
            raise ExprSyntaxError(f"{name} takes one argument", t.pos)
        return core.func(name, *args)

    def derivative(self, t: Token, close: str) -> Expr:
        orders = self.arglist(close)
        if not all(isinstance(o, core.Num) and o.is_integer and o.value >= 0 for o in orders):
            raise ExprSyntaxError("Derivative orders must be non-negative integers", t.pos)
        self.expect("(")
        head = self.advance()
        if head.kind != "ident":
            raise ExprSyntaxError("Derivative expects a function name", head.pos)
        self.expect(")")
        self.expect("(")
        args = self.arglist(")")
        if len(args) != len(orders):
            raise ExprSyntaxError("Derivative orders do not match the argument count", t.pos)
        return core.deriv(head.text, args, [int(o.value) for o in orders])


def parse_expr(text: str) -> Expr:
    """Parse expression text into a canonical tree."""
    if not isinstance(text, str):
        raise TypeError("parse_expr expects a string")
    p = Parser(text)
    if p.tok.kind == "end":
        raise ExprSyntaxError("empty expression", 0)
    e = p.parse()
    if p.tok.kind != "end":
        raise ExprSyntaxError(f"unexpected {p.tok.text!r}", p.tok.pos)
    return e


def _split_top(text: str, sep: str) -> list:
    parts, depth, start, i = [], 0, 0, 0
    while i < len(text):
        ch = text[i]
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        elif depth == 0 and text.startswith(sep, i):
            parts.append(text[start:i])
            i += len(sep)
            start = i
            continue
        i += 1
    parts.append(text[start:])
    return parts


def parse_replacement(text: str):
    """Parse a rule right-hand side; ``(body &)`` yields a closure over ``#k`` slots."""
    s = text.strip()
    while s.startswith("(") and s.endswith(")") and _balanced(s[1:-1]):
        s = s[1:-1].strip()
    if s.endswith("&"):
        p = Parser(s[:-1])
        body = p.parse()
        if p.tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {p.tok.text!r}", p.tok.pos)
        params = tuple(Sym(f"#{k}") for k in range(1, p.max_slot + 1))
        return Lambda(params, body)
    return parse_expr(s)


def _balanced(s: str) -> bool:
    depth = 0
    for ch in s:
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
            if depth < 0:
                return False
    return depth == 0


def parse_rules(text: str) -> list:
    """Parse ``a -> b, f -> (0 &)`` (optionally wrapped in braces) into rules."""
    s = text.strip()
    if s.startswith("{") and s.endswith("}"):
        s = s[1:-1]
    rules = []
    if not s.strip():
        return rules
    for part in _split_top(s, ","):
        sides = _split_top(part, "->")
        if len(sides) != 2:
            raise ExprSyntaxError(f"rule {part.strip()!r} must have the form target -> replacement")
        lhs = sides[0].strip()
        rhs = parse_replacement(sides[1])
        target = parse_expr(lhs)
        if isinstance(rhs, Lambda) and isinstance(target, Sym):
            rules.append(SubstitutionRule(target.name, rhs))
        else:
            rules.append(SubstitutionRule(target, rhs))
    return rules
