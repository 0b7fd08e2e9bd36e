"""Scalar expression trees over named symbols.

Expressions back energy functions and the entries of structure matrices.
They evaluate exactly, differentiate in forward mode, infer their parity
under time reversal, and print back into the infix syntax they parse from::

    >>> e = parse("b.x^2 / (2*L)")
    >>> e.eval({"b.x": 2.0, "L": 1.0})
    2.0
    >>> grad(e, ["b.x"], {"b.x": 2.0, "L": 1.0})
    array([2.])
"""
from __future__ import annotations

import math
import re
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

INDETERMINATE = None  # parity value of mixed-parity sums and the like


class ExprError(ValueError):
    pass


class UnboundSymbol(ExprError, KeyError):
    def __str__(self) -> str:
        return f"unbound symbol {self.args[0]!r}"


class DomainError(ExprError, ArithmeticError):
    pass


class ParseError(ExprError):
    def __init__(self, message: str, pos: int = 0, text: str = ""):
        self.pos = pos
        self.text = text
        super().__init__(f"{message} at column {pos + 1}")


def _wrap(value) -> "Expr":
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return Const(float(value))
    raise TypeError(f"cannot use {value!r} in an expression")


class Expr:
    """Base node.  Subclasses are frozen dataclasses compared structurally."""

    prec = 5

    def __add__(self, other):
        return Add(self, _wrap(other))

    def __radd__(self, other):
        return Add(_wrap(other), self)

    def __sub__(self, other):
        return Sub(self, _wrap(other))

    def __rsub__(self, other):
        return Sub(_wrap(other), self)

    def __mul__(self, other):
        return Mul(self, _wrap(other))

    def __rmul__(self, other):
        return Mul(_wrap(other), self)

    def __truediv__(self, other):
        return Div(self, _wrap(other))

    def __rtruediv__(self, other):
        return Div(_wrap(other), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, exponent):
        if not isinstance(exponent, int) or isinstance(exponent, bool):
            raise TypeError("only integer exponents are supported")
        return Pow(self, exponent)

    def children(self) -> tuple:
        return ()

    def symbols(self) -> frozenset:
        out: set = set()
        stack = [self]
        while stack:
            node = stack.pop()
            if isinstance(node, Var):
                out.add(node.name)
            stack.extend(node.children())
        return frozenset(out)

    def eval(self, bindings: Mapping[str, float]) -> float:
        try:
            return self._eval(bindings)
        except ZeroDivisionError as exc:
            raise DomainError(f"division by zero in {self}") from exc
        except OverflowError as exc:
            raise DomainError(f"overflow in {self}") from exc

    def rename(self, mapping: Mapping[str, str]) -> "Expr":
        return self.substitute({k: Var(v) for k, v in mapping.items()})

    def substitute(self, mapping: Mapping[str, "Expr"]) -> "Expr":
        raise NotImplementedError

    def is_zero(self) -> bool:
        return isinstance(self, Const) and self.value == 0.0

    def __str__(self) -> str:
        return self._str()


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: float

    @property
    def prec(self):
        return 3 if self.value < 0 else 5

    def _eval(self, b):
        return self.value

    def _fwd(self, b, index):
        return self.value, np.zeros(len(index))

    def _parity(self, p):
        return 1

    def substitute(self, mapping):
        return self

    def _str(self):
        v = self.value
        if v == int(v) and abs(v) < 1e15:
            return str(int(v))
        return repr(v)


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str

    def _eval(self, b):
        try:
            return float(b[self.name])
        except KeyError:
            raise UnboundSymbol(self.name) from None

    def _fwd(self, b, index):
        d = np.zeros(len(index))
        i = index.get(self.name)
        if i is not None:
            d[i] = 1.0
        return self._eval(b), d

    def _parity(self, p):
        if self.name not in p:
            return INDETERMINATE
        return p[self.name]

    def substitute(self, mapping):
        return mapping.get(self.name, self)

    def _str(self):
        return self.name


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr
    prec = 3

    def children(self):
        return (self.arg,)

    def _eval(self, b):
        return -self.arg._eval(b)

    def _fwd(self, b, index):
        v, d = self.arg._fwd(b, index)
        return -v, -d

    def _parity(self, p):
        return self.arg._parity(p)

    def substitute(self, mapping):
        return Neg(self.arg.substitute(mapping))

    def _str(self):
        inner = self.arg._str()
        if self.arg.prec < 4 or isinstance(self.arg, Const):
            inner = f"({inner})"
        return "-" + inner


@dataclass(frozen=True, eq=True)
class _Binary(Expr):
    left: Expr
    right: Expr
    op = "?"

    def children(self):
        return (self.left, self.right)

    def substitute(self, mapping):
        return type(self)(self.left.substitute(mapping), self.right.substitute(mapping))

    def _str(self):
        lhs, rhs = self.left._str(), self.right._str()
        if self.left.prec < self.prec:
            lhs = f"({lhs})"
        if self.right.prec <= self.prec:
            rhs = f"({rhs})"
        return f"{lhs} {self.op} {rhs}" if self.prec == 1 else f"{lhs}{self.op}{rhs}"


def _same_parity(a, b):
    if a is INDETERMINATE or b is INDETERMINATE or a != b:
        return INDETERMINATE
    return a


def _product_parity(a, b):
    if a is INDETERMINATE or b is INDETERMINATE:
        return INDETERMINATE
    return a * b


class Add(_Binary):
    op, prec = "+", 1

    def _eval(self, b):
        return self.left._eval(b) + self.right._eval(b)

    def _fwd(self, b, index):
        v1, d1 = self.left._fwd(b, index)
        v2, d2 = self.right._fwd(b, index)
        return v1 + v2, d1 + d2

    def _parity(self, p):
        return _same_parity(self.left._parity(p), self.right._parity(p))


class Sub(_Binary):
    op, prec = "-", 1

    def _eval(self, b):
        return self.left._eval(b) - self.right._eval(b)

    def _fwd(self, b, index):
        v1, d1 = self.left._fwd(b, index)
        v2, d2 = self.right._fwd(b, index)
        return v1 - v2, d1 - d2

    def _parity(self, p):
        return _same_parity(self.left._parity(p), self.right._parity(p))


class Mul(_Binary):
    op, prec = "*", 2

    def _eval(self, b):
        return self.left._eval(b) * self.right._eval(b)

    def _fwd(self, b, index):
        v1, d1 = self.left._fwd(b, index)
        v2, d2 = self.right._fwd(b, index)
        return v1 * v2, d1 * v2 + v1 * d2

    def _parity(self, p):
        return _product_parity(self.left._parity(p), self.right._parity(p))


class Div(_Binary):
    op, prec = "/", 2

    def _eval(self, b):
        return self.left._eval(b) / self.right._eval(b)

    def _fwd(self, b, index):
        v1, d1 = self.left._fwd(b, index)
        v2, d2 = self.right._fwd(b, index)
        q = v1 / v2
        return q, (d1 - q * d2) / v2

    def _parity(self, p):
        return _product_parity(self.left._parity(p), self.right._parity(p))


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: int
    prec = 4

    def children(self):
        return (self.base,)

    def _eval(self, b):
        return self.base._eval(b) ** self.exponent

    def _fwd(self, b, index):
        v, d = self.base._fwd(b, index)
        n = self.exponent
        if n == 0:
            return 1.0, np.zeros(len(index))
        return v ** n, n * v ** (n - 1) * d

    def _parity(self, p):
        par = self.base._parity(p)
        if par is INDETERMINATE:
            return INDETERMINATE
        return par ** (self.exponent % 2)

    def substitute(self, mapping):
        return Pow(self.base.substitute(mapping), self.exponent)

    def _str(self):
        base = self.base._str()
        if self.base.prec < 5:
            base = f"({base})"
        n = self.exponent
        return f"{base}^{n}" if n >= 0 else f"{base}^({n})"


@dataclass(frozen=True, eq=True)
class _Func(Expr):
    arg: Expr
    fname = "?"

    def children(self):
        return (self.arg,)

    def substitute(self, mapping):
        return type(self)(self.arg.substitute(mapping))

    def _parity(self, p):
        return 1 if self.arg._parity(p) == 1 else INDETERMINATE

    def _str(self):
        return f"{self.fname}({self.arg._str()})"


class Exp(_Func):
    fname = "exp"

    def _eval(self, b):
        return math.exp(self.arg._eval(b))

    def _fwd(self, b, index):
        v, d = self.arg._fwd(b, index)
        ev = math.exp(v)
        return ev, ev * d


class Log(_Func):
    fname = "log"

    def _eval(self, b):
        v = self.arg._eval(b)
        if v <= 0:
            raise DomainError(f"log of non-positive value {v} in {self}")
        return math.log(v)

    def _fwd(self, b, index):
        v, d = self.arg._fwd(b, index)
        if v <= 0:
            raise DomainError(f"log of non-positive value {v} in {self}")
        return math.log(v), d / v


FUNCTIONS = {"exp": Exp, "log": Log}


def var(name: str) -> Var:
    return Var(name)


def const(value: float) -> Const:
    return Const(float(value))


# --- evaluation front ends -------------------------------------------------

def evaluate(expr: Expr, bindings: Mapping[str, float]) -> float:
    return expr.eval(bindings)


def grad(expr: Expr, wrt: Sequence[str], bindings: Mapping[str, float]) -> np.ndarray:
    """Forward-mode derivative of ``expr`` with respect to each of ``wrt``."""
    index = {name: i for i, name in enumerate(wrt)}
    try:
        _, d = expr._fwd(bindings, index)
    except ZeroDivisionError as exc:
        raise DomainError(f"division by zero in {expr}") from exc
    except OverflowError as exc:
        raise DomainError(f"overflow in {expr}") from exc
    return np.asarray(d, dtype=float)


def infer_parity(expr: Expr, symbol_parities: Mapping[str, int]) -> Optional[int]:
    """Parity of ``expr`` under time reversal, or ``INDETERMINATE``.

    Unknown symbols are indeterminate; constants are even.
    """
    return expr._parity(symbol_parities)


# --- compilation -----------------------------------------------------------

class _Emitter:
    def __init__(self, args: Sequence[str], wrt: Sequence[str] = ()):
        self.args = {a: i for i, a in enumerate(args)}
        self.wrt = {w: i for i, w in enumerate(wrt)}
        self.lines: list[str] = []
        self.count = 0
        self.memo: dict = {}

    def tmp(self) -> str:
        self.count += 1
        return f"t{self.count}"

    def value(self, node: Expr) -> str:
        key = ("v", node)
        if key in self.memo:
            return self.memo[key]
        if isinstance(node, Const):
            out = f"({node.value!r})"
        elif isinstance(node, Var):
            if node.name not in self.args:
                raise UnboundSymbol(node.name)
            out = f"a[{self.args[node.name]}]"
        else:
            out = self.tmp()
            if isinstance(node, Neg):
                rhs = f"-{self.value(node.arg)}"
            elif isinstance(node, _Binary):
                rhs = f"{self.value(node.left)} {node.op} {self.value(node.right)}"
            elif isinstance(node, Pow):
                rhs = f"{self.value(node.base)} ** {node.exponent}"
            elif isinstance(node, Exp):
                rhs = f"_exp({self.value(node.arg)})"
            elif isinstance(node, Log):
                rhs = f"_log({self.value(node.arg)})"
            else:
                raise TypeError(node)
            self.lines.append(f"{out} = {rhs}")
        self.memo[key] = out
        return out

    def tangent(self, node: Expr) -> dict:
        """Emit tangent code; returns {wrt index: variable name} (sparse)."""
        key = ("d", node)
        if key in self.memo:
            return self.memo[key]
        if isinstance(node, Const):
            out = {}
        elif isinstance(node, Var):
            i = self.wrt.get(node.name)
            out = {} if i is None else {i: "1.0"}
        elif isinstance(node, Neg):
            out = self._combine({i: f"-{d}" for i, d in self.tangent(node.arg).items()})
        elif isinstance(node, (Add, Sub)):
            dl, dr = self.tangent(node.left), self.tangent(node.right)
            terms = {}
            for i in set(dl) | set(dr):
                if i in dl and i in dr:
                    terms[i] = f"{dl[i]} {node.op} {dr[i]}"
                elif i in dl:
                    terms[i] = dl[i]
                else:
                    terms[i] = dr[i] if node.op == "+" else f"-{dr[i]}"
            out = self._combine(terms)
        elif isinstance(node, Mul):
            dl, dr = self.tangent(node.left), self.tangent(node.right)
            vl, vr = self.value(node.left), self.value(node.right)
            terms = {}
            for i in set(dl) | set(dr):
                parts = []
                if i in dl:
                    parts.append(f"{dl[i]} * {vr}")
                if i in dr:
                    parts.append(f"{vl} * {dr[i]}")
                terms[i] = " + ".join(parts)
            out = self._combine(terms)
        elif isinstance(node, Div):
            dl, dr = self.tangent(node.left), self.tangent(node.right)
            vr, q = self.value(node.right), self.value(node)
            terms = {}
            for i in set(dl) | set(dr):
                num = dl.get(i, "0.0")
                if i in dr:
                    num = f"{num} - {q} * {dr[i]}"
                terms[i] = f"({num}) / {vr}"
            out = self._combine(terms)
        elif isinstance(node, Pow):
            db = self.tangent(node.base)
            n = node.exponent
            vb = self.value(node.base)
            if n == 0 or not db:
                out = {}
            else:
                factor = self.tmp()
                self.lines.append(f"{factor} = {n} * {vb} ** {n - 1}")
                out = self._combine({i: f"{factor} * {d}" for i, d in db.items()})
        elif isinstance(node, Exp):
            da = self.tangent(node.arg)
            v = self.value(node)
            out = self._combine({i: f"{v} * {d}" for i, d in da.items()})
        elif isinstance(node, Log):
            da = self.tangent(node.arg)
            va = self.value(node.arg)
            out = self._combine({i: f"{d} / {va}" for i, d in da.items()})
        else:
            raise TypeError(node)
        self.memo[key] = out
        return out

    def _combine(self, terms: dict) -> dict:
        out = {}
        for i, code in sorted(terms.items()):
            name = self.tmp()
            self.lines.append(f"{name} = {code}")
            out[i] = name
        return out


def _log_checked(v):
    if v <= 0:
        raise DomainError(f"log of non-positive value {v}")
    return math.log(v)


_NAMESPACE = {"_exp": math.exp, "_log": _log_checked}


def _build(lines: list[str], ret: str, label: str) -> Callable:
    body = "\n    ".join(lines + [f"return {ret}"])
    src = f"def _f(a):\n    {body}\n"
    ns = dict(_NAMESPACE)
    exec(compile(src, f"<ephs:{label}>", "exec"), ns)
    raw = ns["_f"]

    def fn(a):
        try:
            return raw(a)
        except ZeroDivisionError as exc:
            raise DomainError(f"division by zero in {label}") from exc
        except OverflowError as exc:
            raise DomainError(f"overflow in {label}") from exc

    fn.source = src
    return fn


def compile_many(exprs: Sequence[Expr], args: Sequence[str]) -> Callable:
    """Compile expressions into ``f(a) -> tuple`` where ``a[i]`` binds ``args[i]``."""
    em = _Emitter(args)
    outs = [em.value(e) for e in exprs]
    return _build(em.lines, "(" + "".join(o + ", " for o in outs) + ")", "values")


def compile_grad(expr: Expr, args: Sequence[str], wrt: Sequence[str]) -> Callable:
    """Compile forward-mode code returning ``(value, [d/dw for w in wrt])``."""
    em = _Emitter(args, wrt)
    v = em.value(expr)
    d = em.tangent(expr)
    parts = [d.get(i, "0.0") for i in range(len(wrt))]
    return _build(em.lines, f"{v}, [{', '.join(parts)}]", str(expr))


# --- parsing ---------------------------------------------------------------

_TOKEN = re.compile(
    r"""\s*(?:
        (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
      | (?P<ident>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z0-9_]+)*(?:\[\d+\])?)
      | (?P<op>[-+*/^(),])
    )""",
    re.VERBOSE,
)


def tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            stripped = len(text) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[stripped]!r}", stripped, text)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self, k: int = 0):
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        tok = self.take()
        if tok[1] != value:
            raise ParseError(f"expected {value!r}, found {tok[1] or 'end of input'!r}", tok[2], self.text)
        return tok

    def parse(self) -> Expr:
        e = self.sum()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected {tok[1]!r}", tok[2], self.text)
        return e

    def sum(self) -> Expr:
        e = self.product()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.product()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def product(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def unary(self) -> Expr:
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            nxt, after = self.peek(1), self.peek(2)
            if nxt[0] == "num" and after[1] != "^":
                self.take()
                self.take()
                return Const(-float(nxt[1]))
            self.take()
            return Neg(self.unary())
        if tok[0] == "op" and tok[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.peek()[1] == "^":
            self.take()
            base = Pow(base, self.exponent())
        return base

    def exponent(self) -> int:
        tok = self.take()
        sign = 1
        closing = False
        if tok[1] == "(":
            closing = True
            tok = self.take()
        if tok[1] == "-":
            sign = -1
            tok = self.take()
        if tok[0] != "num" or not re.fullmatch(r"\d+", tok[1]):
            raise ParseError("exponent must be an integer literal", tok[2], self.text)
        if closing:
            self.expect(")")
        return sign * int(tok[1])

    def primary(self) -> Expr:
        tok = self.take()
        kind, value, pos = tok
        if kind == "num":
            return Const(float(value))
        if kind == "ident":
            if value in FUNCTIONS and self.peek()[1] == "(":
                self.take()
                arg = self.sum()
                self.expect(")")
                return FUNCTIONS[value](arg)
            return Var(value)
        if value == "(":
            e = self.sum()
            self.expect(")")
            return e
        raise ParseError(f"unexpected {value or 'end of input'!r}", pos, self.text)


def parse(text: str) -> Expr:
    return _Parser(text).parse()
