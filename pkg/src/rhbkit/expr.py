"""Expression trees for differential systems and the text format that describes them.

A system description looks like::

    system pendulum {
        var theta;
        eq theta'' + sin(theta) = 0;
        conservative true;
        init theta(0) = 1.5;
        init theta'(0) = 0;
    }

Statements end with ``;``. Besides the core statements (``var``, ``eq``,
``conservative``, ``forcing``, ``init``) a ``param NAME = NUMBER;`` statement
binds a named constant that is substituted at parse time. ``#`` starts a
comment. Multiplication may be implicit (``2 x`` or ``(1 - x'^2)^(3/2) x``).
Time may only appear inside a forcing harmonic ``cos(k*w*t)`` / ``sin(w*t)``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

ELEMENTARY = ("exp", "log", "sin", "cos", "tan", "asin", "acos", "atan")
_FUNC_ALIASES = {"arcsin": "asin", "arccos": "acos", "arctan": "atan"}
_KEYWORDS = {"system", "var", "eq", "conservative", "forcing", "init", "param"}


class ParseError(ValueError):
    """Malformed system description; carries the 1-based line and column."""

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        where = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(message + where)


# --------------------------------------------------------------------------
# Nodes

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Deriv:
    name: str
    order: int

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("derivative order must be a positive integer")


@dataclass(frozen=True)
class Harmonic:
    """``amplitude * cos(multiple * base * t)`` (or ``sin``)."""

    multiple: int
    base: str
    phase: str
    amplitude: float = 1.0

    def __post_init__(self):
        if self.phase not in ("cos", "sin"):
            raise ValueError(f"bad harmonic phase {self.phase!r}")


@dataclass(frozen=True)
class Add:
    terms: tuple


@dataclass(frozen=True)
class Mul:
    factors: tuple


@dataclass(frozen=True)
class Pow:
    base: "ExprNode"
    exponent: int


@dataclass(frozen=True)
class RPow:
    """``base ** (q/p)`` with ``p > 1`` and ``gcd(|q|, p) == 1``."""

    base: "ExprNode"
    q: int
    p: int

    def __post_init__(self):
        if self.p < 1 or math.gcd(abs(self.q), self.p) != 1:
            raise ValueError(f"rational power {self.q}/{self.p} is not reduced")


@dataclass(frozen=True)
class Func:
    name: str
    arg: "ExprNode"
    log_base: float | None = None

    def __post_init__(self):
        if self.name not in ELEMENTARY:
            raise ValueError(f"unknown elementary function {self.name!r}")
        if self.name == "log":
            a = self.log_base
            if a is None or not a > 0 or a == 1:
                raise ValueError("logarithm base must be positive and different from 1")


ExprNode = Union[Const, Var, Deriv, Harmonic, Add, Mul, Pow, RPow, Func]


@dataclass(frozen=True)
class _Time:
    """Placeholder for ``t`` while parsing a harmonic argument."""


def add(*terms):
    flat = []
    for term in terms:
        flat.extend(term.terms if isinstance(term, Add) else (term,))
    return flat[0] if len(flat) == 1 else Add(tuple(flat))


def mul(*factors):
    flat = []
    for f in factors:
        flat.extend(f.factors if isinstance(f, Mul) else (f,))
    return flat[0] if len(flat) == 1 else Mul(tuple(flat))


def neg(node):
    if isinstance(node, Const):
        return Const(-node.value)
    return mul(Const(-1.0), node)


def power(base, exponent):
    exponent = Fraction(exponent)
    if exponent.denominator == 1:
        return Pow(base, int(exponent))
    return RPow(base, exponent.numerator, exponent.denominator)


def children(node):
    if isinstance(node, Add):
        return node.terms
    if isinstance(node, Mul):
        return node.factors
    if isinstance(node, (Pow, RPow)):
        return (node.base,)
    if isinstance(node, Func):
        return (node.arg,)
    return ()


def walk(node):
    yield node
    for c in children(node):
        yield from walk(c)


# --------------------------------------------------------------------------
# Systems

@dataclass(frozen=True)
class PointConstraint:
    var: str
    order: int
    value: float
    time: float = 0.0


@dataclass(frozen=True)
class OdeSystem:
    """A square system of residual-form equations ``expr = 0``."""

    name: str
    variables: tuple
    equations: tuple
    forcing: tuple | None = None  # (symbol, angular frequency)
    conservative: bool = False
    constraints: tuple = ()

    def __post_init__(self):
        if len(self.equations) != len(self.variables):
            raise ParseError(
                f"{len(self.equations)} equations for {len(self.variables)} variables")
        known = set(self.variables)
        for eq in self.equations:
            for node in walk(eq):
                if isinstance(node, (Var, Deriv)) and node.name not in known:
                    raise ParseError(f"unknown identifier {node.name!r}")
        for c in self.constraints:
            if c.var not in known:
                raise ParseError(f"constraint on unknown variable {c.var!r}")

    @property
    def forcing_omega(self):
        return None if self.forcing is None else self.forcing[1]

    def max_orders(self):
        """Highest derivative order of each variable over all equations."""
        orders = {v: 0 for v in self.variables}
        for eq in self.equations:
            for node in walk(eq):
                if isinstance(node, Deriv):
                    orders[node.name] = max(orders[node.name], node.order)
        return orders


# --------------------------------------------------------------------------
# Printing

def _num(value):
    text = repr(float(value))
    return f"({text})" if text.startswith("-") else text


def to_text(node):
    """Fully parenthesised text that parses back to the same tree."""
    if isinstance(node, Const):
        return _num(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Deriv):
        return node.name + "'" * node.order
    if isinstance(node, Harmonic):
        arg = f"{node.base}*t" if node.multiple == 1 else f"{node.multiple}*{node.base}*t"
        text = f"{node.phase}({arg})"
        return text if node.amplitude == 1.0 else f"({_num(node.amplitude)} * {text})"
    if isinstance(node, Add):
        return "(" + " + ".join(to_text(t) for t in node.terms) + ")"
    if isinstance(node, Mul):
        return "(" + " * ".join(to_text(f) for f in node.factors) + ")"
    if isinstance(node, (Pow, RPow)):
        base = to_text(node.base)
        if isinstance(node.base, (Pow, RPow)):
            base = f"({base})"
        if isinstance(node, Pow):
            return f"{base}^({node.exponent})"
        return f"{base}^({node.q}/{node.p})"
    if isinstance(node, Func):
        if node.name == "log":
            return f"log({_num(node.log_base)}, {to_text(node.arg)})"
        return f"{node.name}({to_text(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def system_to_text(sys):
    lines = [f"system {sys.name} {{", f"    var {', '.join(sys.variables)};"]
    if sys.forcing is not None:
        lines.append(f"    forcing {sys.forcing[0]} = {float(sys.forcing[1])!r};")
    for eq in sys.equations:
        lines.append(f"    eq {to_text(eq)} = 0;")
    lines.append(f"    conservative {'true' if sys.conservative else 'false'};")
    for c in sys.constraints:
        lines.append(f"    init {c.var}{chr(39) * c.order}({float(c.time)!r}) = {float(c.value)!r};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Tokenizer and parser

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n) | (?P<comment>\#[^\n]*)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),=;{}'])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text):
    toks, line, start, pos = [], 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, start = line + 1, m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, pos - start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - start + 1))
    return toks


class _Parser:
    def __init__(self, toks):
        self.toks = toks
        self.i = 0
        self.variables = []
        self.params = {}
        self.forcing = None

    # token helpers
    @property
    def tok(self):
        return self.toks[self.i]

    def error(self, message, tok=None):
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.col)

    def accept(self, text):
        if self.tok.text == text and self.tok.kind in ("op", "name"):
            self.i += 1
            return True
        return False

    def expect(self, text):
        if not self.accept(text):
            raise self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")

    def name(self):
        if self.tok.kind != "name":
            raise self.error(f"expected a name, found {self.tok.text!r}")
        tok = self.tok
        self.i += 1
        return tok

    def signed_number(self):
        sign = -1.0 if self.accept("-") else 1.0
        if sign > 0:
            self.accept("+")
        if self.tok.kind == "num":
            value = float(self.tok.text)
            self.i += 1
            return sign * value
        if self.tok.kind == "name" and self.tok.text in self.params:
            value = self.params[self.tok.text]
            self.i += 1
            return sign * value
        raise self.error(f"expected a number, found {self.tok.text!r}")

    # statements
    def system(self):
        self.expect("system")
        name = self.name().text
        self.expect("{")
        eq_spans, conservative, inits = [], False, []
        while not self.accept("}"):
            kw = self.name()
            if kw.text == "var":
                while True:
                    tok = self.name()
                    if tok.text in _KEYWORDS or tok.text == "t" or tok.text in self.variables:
                        raise self.error(f"invalid variable name {tok.text!r}", tok)
                    self.variables.append(tok.text)
                    if not self.accept(","):
                        break
            elif kw.text == "param":
                tok = self.name()
                self.expect("=")
                self.params[tok.text] = self.signed_number()
            elif kw.text == "forcing":
                tok = self.name()
                self.expect("=")
                self.forcing = (tok.text, self.signed_number())
            elif kw.text == "conservative":
                flag = self.name().text
                if flag not in ("true", "false"):
                    raise self.error("expected true or false")
                conservative = flag == "true"
            elif kw.text == "eq":
                begin = self.i
                depth = 0
                while not (self.tok.text == ";" and depth == 0):
                    if self.tok.kind == "eof":
                        raise self.error("unterminated equation")
                    depth += {"(": 1, ")": -1}.get(self.tok.text, 0)
                    self.i += 1
                eq_spans.append((begin, self.i))
            elif kw.text == "init":
                tok = self.name()
                order = 0
                while self.accept("'"):
                    order += 1
                self.expect("(")
                time = self.signed_number()
                self.expect(")")
                self.expect("=")
                inits.append((tok, PointConstraint(tok.text, order, self.signed_number(), time)))
            else:
                raise self.error(f"unknown statement {kw.text!r}", kw)
            self.expect(";")
        if self.tok.kind != "eof":
            raise self.error("trailing input after system block")
        end = self.i
        equations = []
        for begin, stop in eq_spans:
            self.i = begin
            lhs = self.expr()
            self.expect("=")
            rhs = self.expr()
            if self.i != stop:
                raise self.error("unexpected token in equation")
            equations.append(lhs if rhs == Const(0.0) else add(lhs, neg(rhs)))
        self.i = end
        for eq in equations:
            for node in walk(eq):
                if isinstance(node, Var) and self.forcing and node.name == self.forcing[0]:
                    raise ParseError(f"forcing symbol {node.name!r} used outside a harmonic")
        for tok, c in inits:
            if c.var not in self.variables:
                raise self.error(f"unknown identifier {c.var!r}", tok)
        if len(equations) != len(self.variables):
            raise ParseError(
                f"{len(equations)} equations for {len(self.variables)} variables")
        return OdeSystem(name, tuple(self.variables), tuple(equations), self.forcing,
                         conservative, tuple(c for _, c in inits))

    # expressions
    def expr(self):
        node = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.tok.text
            self.i += 1
            rhs = self.term()
            node = add(node, rhs if op == "+" else neg(rhs))
        return node

    def term(self):
        node = self.unary()
        while True:
            if self.accept("*"):
                node = mul(node, self.unary())
            elif self.accept("/"):
                node = mul(node, Pow(self.unary(), -1))
            elif self.tok.kind in ("name", "num") or self.tok.text == "(":
                node = mul(node, self.unary())
            else:
                return node

    def unary(self):
        if self.accept("-"):
            return neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self):
        base = self.primary()
        if not self.accept("^"):
            return base
        tok = self.tok
        if self.accept("("):
            exp_node = self.expr()
            self.expect(")")
        else:
            exp_node = self.unary() if self.tok.text == "-" else self.primary()
        exponent = _const_value(exp_node)
        if exponent is None:
            raise self.error("exponent must be a constant", tok)
        frac = Fraction(exponent).limit_denominator(10**6)
        if abs(float(frac) - exponent) > 1e-12 * max(1.0, abs(exponent)):
            raise self.error("exponent must be rational", tok)
        return power(base, frac)

    def primary(self):
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Const(float(tok.text))
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind != "name":
            raise self.error(f"unexpected {tok.text or 'end of input'!r}")
        self.i += 1
        name = _FUNC_ALIASES.get(tok.text, tok.text)
        if name in ELEMENTARY and self.tok.text == "(":
            return self.call(name, tok)
        primes = 0
        while self.accept("'"):
            primes += 1
        if name in self.variables:
            return Deriv(name, primes) if primes else Var(name)
        if primes:
            raise self.error(f"cannot differentiate {name!r}", tok)
        if name in self.params:
            return Const(self.params[name])
        if name == "t":
            return _Time()
        if self.forcing is not None and name == self.forcing[0]:
            return Var(name)
        raise self.error(f"unknown identifier {name!r}", tok)

    def call(self, name, tok):
        self.expect("(")
        first = self.expr()
        if name == "log":
            if self.accept(","):
                a = _const_value(first)
                if a is None:
                    raise self.error("logarithm base must be a constant", tok)
                if not a > 0 or a == 1:
                    raise self.error("logarithm base must be positive and different from 1", tok)
                arg = self.expr()
            else:
                a, arg = math.e, first
            self.expect(")")
            self._check_time_free(arg, tok)
            return Func("log", arg, float(a))
        self.expect(")")
        if name in ("sin", "cos") and any(isinstance(n, _Time) for n in _walk_raw(first)):
            return self._harmonic(name, first, tok)
        self._check_time_free(first, tok)
        return Func(name, first)

    def _check_time_free(self, node, tok):
        for n in _walk_raw(node):
            if isinstance(n, _Time):
                raise self.error("time may only appear inside cos(k*w*t) or sin(k*w*t)", tok)
            if isinstance(n, Var) and self.forcing and n.name == self.forcing[0]:
                raise self.error(f"forcing symbol {n.name!r} used outside a harmonic", tok)

    def _harmonic(self, phase, arg, tok):
        factors = arg.factors if isinstance(arg, Mul) else (arg,)
        multiple, base, times = 1.0, None, 0
        for f in factors:
            if isinstance(f, _Time):
                times += 1
            elif isinstance(f, Var) and self.forcing and f.name == self.forcing[0]:
                if base is not None:
                    raise self.error("forcing symbol repeated in harmonic", tok)
                base = f.name
            elif isinstance(f, Const):
                multiple *= f.value
            else:
                raise self.error("harmonic argument must be k*w*t", tok)
        if times != 1 or base is None or multiple != int(multiple) or multiple < 1:
            raise self.error("harmonic argument must be k*w*t with positive integer k", tok)
        return Harmonic(int(multiple), base, phase)


def _walk_raw(node):
    yield node
    for c in children(node):
        yield from _walk_raw(c)


def _const_value(node):
    """Value of a variable-free expression, else None."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Add):
        vals = [_const_value(t) for t in node.terms]
        return None if None in vals else math.fsum(vals)
    if isinstance(node, Mul):
        vals = [_const_value(f) for f in node.factors]
        return None if None in vals else math.prod(vals)
    if isinstance(node, Pow):
        v = _const_value(node.base)
        return None if v is None else v ** node.exponent
    return None


def parse_system(text):
    """Parse a system description into an :class:`OdeSystem`."""
    return _Parser(_tokenize(text)).system()


# --------------------------------------------------------------------------
# Numeric evaluation (used by the reference integrator)

def evaluate(node, env, t=0.0, omega=None):
    """Evaluate ``node`` numerically.

    ``env`` maps a variable name to the sequence ``[x, x', x'', ...]``; entries
    may be arrays. ``omega`` is the forcing angular frequency.
    """
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return env[node.name][0]
    if isinstance(node, Deriv):
        return env[node.name][node.order]
    if isinstance(node, Harmonic):
        trig = np.cos if node.phase == "cos" else np.sin
        return node.amplitude * trig(node.multiple * omega * t)
    if isinstance(node, Add):
        return sum(evaluate(c, env, t, omega) for c in node.terms)
    if isinstance(node, Mul):
        out = 1.0
        for c in node.factors:
            out = out * evaluate(c, env, t, omega)
        return out
    if isinstance(node, Pow):
        return evaluate(node.base, env, t, omega) ** float(node.exponent)
    if isinstance(node, RPow):
        base = evaluate(node.base, env, t, omega)
        if node.p % 2:
            return np.sign(base) ** node.q * np.abs(base) ** (node.q / node.p)
        return base ** (node.q / node.p)
    if isinstance(node, Func):
        x = evaluate(node.arg, env, t, omega)
        if node.name == "log":
            return np.log(x) / math.log(node.log_base)
        return {"exp": np.exp, "sin": np.sin, "cos": np.cos, "tan": np.tan,
                "asin": np.arcsin, "acos": np.arccos, "atan": np.arctan}[node.name](x)
    raise TypeError(f"not an expression node: {node!r}")
