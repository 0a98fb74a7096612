"""Tensor formulas in index notation.

A formula is a sum of terms. Each term is a scalar coefficient times a
dot-chain of operands, where an operand is a tensor reference ``"ID"["μν"]``,
a derivative ``PartialD["μ"]`` / ``CovariantD["μ"]`` acting on the operand to
its right, or a parenthesized sub-formula. Letters shared by two operands of a
chain are contracted; a letter repeated inside one index string is traced.

    "Minkowski"["μν"] + "PerfectFluid"["μν"]
    "Result"["νμ"] = 2 t "Minkowski"["μν"] - 3 x "PerfectFluid"["μν"]
    1/2 "g"["λσ"].(PartialD["μ"]."g"["νσ"] + PartialD["ν"]."g"["σμ"] - PartialD["σ"]."g"["μν"])
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import errors
from .errors import (CoordinateAddition, DanglingDerivative, FormulaSyntaxError,
                     FreeIndexMismatch, MixedMetrics, RankMismatch, TripleIndex)
from .registry import PLACEHOLDER_SYMBOL, Role, Session, derived_id
from .symexpr import core
from .symexpr.core import Expr, diff
from .symexpr.parser import ALIASES
from .transform import _metric_rep, apply_on_slot, represent

DEFAULT_RESULT_ID = "Result"
PARTIAL_HEADS = ("PartialD", "TPartialD")
COVARIANT_HEADS = ("CovariantD", "TCovariantD")

# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Scalar:
    expr: Expr


@dataclass(frozen=True)
class Ref:
    id: str
    letters: tuple


@dataclass(frozen=True)
class DerivOp:
    kind: str  # "partial" or "covariant"
    letter: str


@dataclass(frozen=True)
class Dot:
    items: tuple


@dataclass(frozen=True)
class Scaled:
    coef: Expr
    node: object


@dataclass(frozen=True)
class Sum:
    terms: tuple  # of nodes (signs folded into Scaled coefficients)


@dataclass
class Formula:
    body: object
    target_id: str | None = None
    target_letters: tuple | None = None
    free: tuple = ()
    refs: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# tokenizer

_OPS = {"+", "-", "*", "/", "^", ".", "(", ")", "[", "]", ",", "="}
_UNICODE = {"−": "-", "·": "*", "×": "*", "÷": "/"}


def _tokenize(text: str) -> list:
    out = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        space_before = i > 0 and text[i - 1].isspace()
        if ch.isspace():
            i += 1
            continue
        if ch in "\"“”":
            close = "\"" if ch == "\"" else "”"
            j = i + 1
            while j < n and text[j] not in (close, "\""):
                j += 1
            if j >= n:
                raise FormulaSyntaxError(f"unterminated string at position {i}")
            out.append(("str", text[i + 1:j], i, space_before))
            i = j + 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j + 1 < n and text[j] == "." and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            out.append(("num", text[i:j], i, space_before))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] in "_̇̈'"):
                j += 1
            out.append(("ident", text[i:j], i, space_before))
            i = j
            continue
        ch = _UNICODE.get(ch, ch)
        if ch in _OPS:
            out.append(("op", ch, i, space_before))
            i += 1
            continue
        raise FormulaSyntaxError(f"unexpected character {text[i]!r} at position {i}")
    out.append(("end", "", n, False))
    return out


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text, k=0):
        t = self.peek(k)
        return t[0] == "op" and t[1] == text

    def advance(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text):
        t = self.advance()
        if t[0] != "op" or t[1] != text:
            raise FormulaSyntaxError(f"expected {text!r} at position {t[2]}, found {t[1] or 'end of input'!r}")
        return t

    def string_arg(self):
        self.expect("[")
        t = self.advance()
        if t[0] != "str":
            raise FormulaSyntaxError(f"expected a quoted index string at position {t[2]}")
        self.expect("]")
        return t[1]

    def parse(self) -> Formula:
        target_id = target_letters = None
        # optional leading target: "ID"["idx"] = ... or "ID" = ...
        if self.peek()[0] == "str":
            save = self.i
            tid = self.advance()[1]
            letters = None
            if self.at("["):
                letters = tuple(self.string_arg())
            if self.at("="):
                self.advance()
                target_id, target_letters = tid, letters
            else:
                self.i = save
        body = self.sum()
        t = self.peek()
        if t[0] != "end":
            raise FormulaSyntaxError(f"unexpected {t[1]!r} at position {t[2]}")
        return Formula(body, target_id, target_letters)

    def sum(self):
        terms = []
        sign = 1
        if self.at("+") or self.at("-"):
            sign = -1 if self.advance()[1] == "-" else 1
        terms.append(_scale(core.num(sign), self.product()))
        while self.at("+") or self.at("-"):
            sign = -1 if self.advance()[1] == "-" else 1
            terms.append(_scale(core.num(sign), self.product()))
        if len(terms) == 1:
            return _unscale(terms[0])
        if all(isinstance(t, Scalar) for t in terms):
            return Scalar(core.add(*[t.expr for t in terms]))
        return Sum(tuple(terms))

    def _starts_operand(self):
        t = self.peek()
        if t[0] in ("num", "ident", "str"):
            return True
        return t[0] == "op" and t[1] == "("

    def product(self):
        node = self.dotchain()
        while True:
            if self.at("*"):
                self.advance()
                node = _times(node, self.dotchain())
            elif self.at("/"):
                t = self.advance()
                den = self.dotchain()
                if not isinstance(den, Scalar):
                    raise FormulaSyntaxError(f"cannot divide by a tensor (position {t[2]})")
                node = _times(node, Scalar(core.power(den.expr, -1)))
            elif self._starts_operand():
                node = _times(node, self.dotchain())
            else:
                return node

    def dotchain(self):
        items = [self.power()]
        while self.at("."):
            self.advance()
            items.append(self.power())
        if len(items) == 1:
            if isinstance(items[0], DerivOp):
                raise DanglingDerivative(f"{_deriv_name(items[0])} must act on a tensor to its right")
            return items[0]
        if isinstance(items[-1], DerivOp):
            raise DanglingDerivative(f"{_deriv_name(items[-1])} must act on a tensor to its right")
        return Dot(tuple(items))

    def power(self):
        if self.at("-"):
            self.advance()
            return _times(Scalar(core.MINUS_ONE), self.power())
        base = self.atom()
        if self.at("^"):
            t = self.advance()
            exp = self.power()
            if not (isinstance(base, Scalar) and isinstance(exp, Scalar)):
                raise FormulaSyntaxError(f"powers are only allowed on scalars (position {t[2]})")
            return Scalar(core.power(base.expr, exp.expr))
        return base

    def atom(self):
        t = self.advance()
        kind, text, pos, _ = t
        if kind == "num":
            return Scalar(core.num(Fraction(text)))
        if kind == "str":
            if not self.at("["):
                raise FormulaSyntaxError(f'the tensor "{text}" needs an index string, e.g. "{text}"["μν"]')
            return Ref(text, tuple(self.string_arg()))
        if kind == "ident":
            if text in PARTIAL_HEADS or text in COVARIANT_HEADS:
                letters = self.string_arg()
                if len(letters) != 1:
                    raise FormulaSyntaxError(f"{text} takes exactly one index letter")
                return DerivOp("partial" if text in PARTIAL_HEADS else "covariant", letters)
            nxt = self.peek()
            if nxt[0] == "op" and (nxt[1] == "[" or (nxt[1] == "(" and not nxt[3])):
                close = "]" if nxt[1] == "[" else ")"
                self.advance()
                args = []
                if not self.at(close):
                    args.append(self.scalar_arg())
                    while self.at(","):
                        self.advance()
                        args.append(self.scalar_arg())
                self.expect(close)
                name = ALIASES.get(text, text)
                if name == "arctan" and len(args) == 2:
                    return Scalar(core.func("atan2", args[1], args[0]))
                return Scalar(core.func(name, *args))
            return Scalar(core.sym(text))
        if kind == "op" and text == "(":
            node = self.sum()
            self.expect(")")
            return node
        raise FormulaSyntaxError(f"unexpected {text or 'end of input'!r} at position {pos}")

    def scalar_arg(self):
        node = self.sum()
        if not isinstance(node, Scalar):
            raise FormulaSyntaxError("function arguments must be scalar expressions")
        return node.expr


def _deriv_name(op: DerivOp):
    return ("PartialD" if op.kind == "partial" else "CovariantD") + f'["{op.letter}"]'


def _scale(c: Expr, node):
    if isinstance(node, Scalar):
        return Scalar(core.mul(c, node.expr))
    if isinstance(node, Scaled):
        return Scaled(core.mul(c, node.coef), node.node)
    return Scaled(c, node)


def _unscale(node):
    if isinstance(node, Scaled) and node.coef == core.ONE:
        return node.node
    return node


def _times(a, b):
    if isinstance(a, Scalar):
        return _unscale(_scale(a.expr, b))
    if isinstance(b, Scalar):
        return _unscale(_scale(b.expr, a))
    if isinstance(a, DerivOp) or isinstance(b, DerivOp):
        raise DanglingDerivative("derivative operators must be joined to their operand with '.'")
    raise FormulaSyntaxError("two tensors cannot be multiplied with '*'; use '.' for products and contractions")


# ---------------------------------------------------------------------------
# validation


def _letter_counts(node, refs: list) -> list:
    """Ordered free letters of a node; records every Ref met in ``refs``."""
    if isinstance(node, Scalar):
        return []
    if isinstance(node, Scaled):
        return _letter_counts(node.node, refs)
    if isinstance(node, Ref):
        refs.append(node)
        return _chain_free([list(node.letters)])
    if isinstance(node, DerivOp):
        return [node.letter]
    if isinstance(node, Dot):
        return _chain_free([_letter_counts(x, refs) for x in node.items])
    if isinstance(node, Sum):
        frees = [_letter_counts(t, refs) for t in node.terms]
        first = frees[0]
        for f in frees[1:]:
            if sorted(f) != sorted(first):
                raise FreeIndexMismatch(
                    f"all terms must have the same free indices up to permutation; "
                    f"got {''.join(first) or '(none)'} and {''.join(f) or '(none)'}")
        return first
    raise TypeError(node)


def _chain_free(groups: list) -> list:
    counts: dict = {}
    order = []
    for g in groups:
        for letter in g:
            if letter not in counts:
                order.append(letter)
            counts[letter] = counts.get(letter, 0) + 1
    for letter, c in counts.items():
        if c > 2:
            raise TripleIndex(f'the index "{letter}" appears more than twice in one term')
    return [x for x in order if counts[x] == 1]


def parse_formula(text: str, session: Session | None = None) -> Formula:
    """Parse and validate a formula. Metric and rank checks need a session."""
    f = _Parser(text).parse()
    refs: list = []
    f.free = tuple(_letter_counts(f.body, refs))
    f.refs = refs
    if not refs:
        raise FormulaSyntaxError("the formula does not contain any tensors")
    if f.target_letters is not None and sorted(f.target_letters) != sorted(f.free):
        raise FreeIndexMismatch(
            f'the target indices "{"".join(f.target_letters)}" must be a permutation of the free '
            f'indices "{"".join(f.free)}"')
    if session is not None:
        _validate_refs(f, session)
    return f


def _validate_refs(f: Formula, session: Session):
    metrics = []
    for r in f.refs:
        obj = session.get(r.id)
        if len(r.letters) != obj.rank:
            raise RankMismatch(
                f'the tensor "{r.id}" has rank {obj.rank} but was given {len(r.letters)} indices')
        m = r.id if obj.role == Role.METRIC else obj.metric
        if m is not None and m not in metrics:
            metrics.append(m)
    if len(metrics) > 1:
        raise MixedMetrics(
            f'tensors associated with different metrics cannot be combined: {", ".join(metrics)}')
    if isinstance(f.body, Sum) or _has_sum(f.body):
        _check_coordinate_sums(f.body, session)


def _has_sum(node):
    if isinstance(node, Sum):
        return True
    if isinstance(node, Scaled):
        return _has_sum(node.node)
    if isinstance(node, Dot):
        return any(_has_sum(x) for x in node.items)
    return False


def _check_coordinate_sums(node, session):
    if isinstance(node, Scaled):
        return _check_coordinate_sums(node.node, session)
    if isinstance(node, Dot):
        for x in node.items:
            _check_coordinate_sums(x, session)
    if isinstance(node, Sum):
        for t in node.terms:
            refs: list = []
            _letter_counts(t, refs)
            for r in refs:
                if session.get(r.id).role == Role.COORDINATES:
                    raise CoordinateAddition(
                        f'the coordinate system "{r.id}" cannot be added to other tensors, '
                        f'since coordinates do not transform like tensors')
            _check_coordinate_sums(t, session)


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class Value:
    arr: np.ndarray
    letters: tuple
    pos: tuple
    dummies: frozenset = frozenset()


def scalar_value(e: Expr) -> Value:
    a = np.empty((), dtype=object)
    a[()] = e
    return Value(a, (), ())


def contract_pair(a: Value, b: Value, mover=None) -> Value:
    """Contract every letter shared by ``a`` and ``b``; an outer product if none.

    ``mover(value, slot, position)`` re-expresses one slot of ``b`` with the
    other index position so that each contracted pair is one-up/one-down.
    """
    for letter in b.letters:
        if letter in a.dummies:
            raise TripleIndex(f'the index "{letter}" appears more than twice in one term')
    for letter in a.letters:
        if letter in b.dummies:
            raise TripleIndex(f'the index "{letter}" appears more than twice in one term')
    shared = [x for x in a.letters if x in b.letters]
    ia, ib = [], []
    for letter in shared:
        i, j = a.letters.index(letter), b.letters.index(letter)
        if a.pos[i] == b.pos[j]:
            if mover is None:
                raise errors.RoleForbidden("a metric is needed to contract two indices in the same position")
            b = mover(b, j, -a.pos[i])
        ia.append(i)
        ib.append(j)
    arr = np.tensordot(a.arr, b.arr, axes=(ia, ib)) if (ia or a.arr.ndim or b.arr.ndim) else \
        _scalar_arr(a.arr[()] * b.arr[()])
    if not isinstance(arr, np.ndarray):
        arr = _scalar_arr(arr)
    letters = tuple(x for x in a.letters if x not in shared) + tuple(x for x in b.letters if x not in shared)
    pos = tuple(p for x, p in zip(a.letters, a.pos) if x not in shared) + \
        tuple(p for x, p in zip(b.letters, b.pos) if x not in shared)
    return Value(_normalize(arr), letters, pos, a.dummies | b.dummies | frozenset(shared))


def trace_slots(v: Value, i: int, j: int, mover=None) -> Value:
    """Sum over the slot pair (i, j), arranged one-up/one-down first."""
    if v.pos[i] == v.pos[j]:
        if mover is None:
            raise errors.RoleForbidden("a metric is needed to trace two indices in the same position")
        v = mover(v, j, -v.pos[i])
    arr = np.trace(v.arr, axis1=i, axis2=j)
    if not isinstance(arr, np.ndarray):
        arr = _scalar_arr(arr)
    keep = [k for k in range(len(v.letters)) if k not in (i, j)]
    return Value(_normalize(arr), tuple(v.letters[k] for k in keep), tuple(v.pos[k] for k in keep),
                 v.dummies | {v.letters[i]})


def _scalar_arr(x):
    a = np.empty((), dtype=object)
    a[()] = x
    return a


def _normalize(arr: np.ndarray) -> np.ndarray:
    """Turn plain ints that numpy may introduce into Num nodes."""
    out = np.empty(arr.shape, dtype=object)
    src, dst = arr.reshape(-1), out.reshape(-1)
    for k, x in enumerate(src):
        dst[k] = x if isinstance(x, Expr) else core.num(x)
    return out


def self_traces(v: Value, mover=None) -> Value:
    while True:
        seen = {}
        for k, letter in enumerate(v.letters):
            if letter in seen:
                v = trace_slots(v, seen[letter], k, mover)
                break
            seen[letter] = k
        else:
            return v


class Evaluator:
    """Evaluates a parsed formula in the working coordinates."""

    def __init__(self, session: Session, formula: Formula):
        self.s = session
        self.f = formula
        first = session.get(formula.refs[0].id)
        self.coords = first.default_coords
        self.metric = None
        for r in formula.refs:
            obj = session.get(r.id)
            m = r.id if obj.role == Role.METRIC else obj.metric
            if m is not None:
                self.metric = m
                break
        self.xs = session.coord_symbols(self.coords)
        self._christoffel = None

    # -- index moves with the formula's metric in the working coordinates
    def move(self, v: Value, slot: int, new_pos: int) -> Value:
        if v.pos[slot] == new_pos:
            return v
        if self.metric is None:
            raise errors.RoleForbidden("raising or lowering an index needs a metric, and this formula has none")
        g = _metric_rep(self.s, self.metric, (new_pos, new_pos), self.coords)
        arr = apply_on_slot(g, v.arr, slot)
        pos = v.pos[:slot] + (new_pos,) + v.pos[slot + 1:]
        return Value(arr, v.letters, pos, v.dummies)

    def ev(self, node) -> Value:
        if isinstance(node, Scalar):
            return scalar_value(node.expr)
        if isinstance(node, Ref):
            obj = self.s.get(node.id)
            arr = represent(self.s, node.id, obj.default_indices, self.coords)
            v = Value(arr, node.letters, tuple(obj.default_indices))
            return self_traces(v, self.move)
        if isinstance(node, Scaled):
            v = self.ev(node.node)
            c = node.coef
            return Value(_map(lambda e: core.mul(c, e), v.arr), v.letters, v.pos, v.dummies)
        if isinstance(node, Dot):
            return self.chain(node.items)
        if isinstance(node, Sum):
            return self.sum(node.terms)
        raise TypeError(node)

    def chain(self, items) -> Value:
        # group derivative operators with the operand on their right
        units = []
        ops = []
        for x in items:
            if isinstance(x, DerivOp):
                ops.append(x)
            else:
                units.append((tuple(ops), x))
                ops = []
        acc = None
        for ops, x in units:
            v = self.ev(x)
            for op in reversed(ops):
                v = self.derivative(op, v)
            acc = v if acc is None else contract_pair(acc, v, self.move)
        return acc

    def sum(self, terms) -> Value:
        vals = [self.ev(t) for t in terms]
        first = vals[0]
        total = first.arr
        for v in vals[1:]:
            v = self.align(v, first.letters, first.pos)
            total = total + v.arr
        return Value(total, first.letters, first.pos)

    def align(self, v: Value, letters: tuple, pos: tuple) -> Value:
        if set(v.letters) != set(letters) or len(v.letters) != len(letters):
            raise FreeIndexMismatch(
                f"cannot add tensors with free indices {''.join(letters)} and {''.join(v.letters)}")
        perm = [v.letters.index(x) for x in letters]
        v = Value(np.transpose(v.arr, perm) if perm else v.arr, letters, tuple(v.pos[k] for k in perm), v.dummies)
        for k, p in enumerate(pos):
            v = self.move(v, k, p)
        return v

    # -- derivatives
    def gradient(self, v: Value, letter: str) -> Value:
        n = len(self.xs)
        arr = np.empty((n,) + v.arr.shape, dtype=object)
        for a, x in enumerate(self.xs):
            arr[a, ...] = _map(lambda e: diff(e, x), v.arr)
        return Value(arr, (letter,) + v.letters, (-1,) + v.pos, v.dummies)

    def christoffel(self) -> np.ndarray:
        if self._christoffel is None:
            if self.metric is None:
                raise errors.RoleForbidden("a covariant derivative needs a metric")
            cid = derived_id(self.metric, Role.CHRISTOFFEL)
            if cid not in self.s.objects:
                from .curvature import christoffel
                christoffel(self.s, self.metric)
            self._christoffel = represent(self.s, cid, (1, -1, -1), self.coords)
        return self._christoffel

    def derivative(self, op: DerivOp, v: Value) -> Value:
        letter = op.letter
        if letter in v.dummies:
            raise TripleIndex(f'the index "{letter}" appears more than twice in one term')
        k = v.letters.index(letter) if letter in v.letters else None
        if k is not None and v.pos[k] == -1:
            # divergence: contract with an upper slot of the operand
            v = self.move(v, k, 1)
        g = self.gradient(v, letter)
        if op.kind == "covariant":
            gam = self.christoffel()
            total = g.arr
            for s, p in enumerate(v.pos):
                if p == 1:
                    # + Γ^b_{aλ} V^{..λ..}
                    t = np.tensordot(gam, v.arr, axes=([2], [s]))  # (b, a, rest)
                    t = np.moveaxis(np.swapaxes(t, 0, 1), 1, 1 + s)
                    total = total + t
                else:
                    # - Γ^λ_{ab} V_{..λ..}
                    t = np.tensordot(gam, v.arr, axes=([0], [s]))  # (a, b, rest)
                    t = np.moveaxis(t, 1, 1 + s)
                    total = total - t
            g = Value(_normalize(total), g.letters, g.pos, g.dummies)
        g = Value(self.s.simplify_array(g.arr), g.letters, g.pos, g.dummies)
        if k is not None:
            g = trace_slots(g, 0, k + 1, self.move)
        return g


def _map(fn, arr):
    out = np.empty(arr.shape, dtype=object)
    src, dst = arr.reshape(-1), out.reshape(-1)
    for i, e in enumerate(src):
        dst[i] = fn(e)
    return out


def calc(session: Session, formula: str, target_id: str | None = None,
         target_indices: str | None = None, symbol: str | None = None) -> str:
    """Evaluate ``formula`` and register the result; returns the result ID."""
    f = parse_formula(formula, session)
    if target_indices is not None:
        letters = tuple(target_indices)
        if sorted(letters) != sorted(f.free):
            raise FreeIndexMismatch(
                f'the target indices "{target_indices}" must be a permutation of the free '
                f'indices "{"".join(f.free)}"')
        f.target_letters = letters
    tid = target_id or f.target_id or DEFAULT_RESULT_ID
    ev = Evaluator(session, f)
    v = ev.ev(f.body)
    if f.target_letters is not None and tuple(f.target_letters) != v.letters:
        perm = [v.letters.index(x) for x in f.target_letters]
        v = Value(np.transpose(v.arr, perm), tuple(f.target_letters), tuple(v.pos[k] for k in perm))
    arr = session.simplify_array(_normalize(v.arr))
    if tid == DEFAULT_RESULT_ID and tid in session.objects and not session.options.allow_overwrite \
            and session.objects[tid].role == Role.TENSOR:
        # the default result slot is always reusable
        del session.objects[tid]
    if tid not in session.objects:
        session._check_new_id(tid)
    session.store_derived(tid, Role.TENSOR, ev.metric, ev.coords, v.pos, arr, symbol or PLACEHOLDER_SYMBOL)
    return tid
