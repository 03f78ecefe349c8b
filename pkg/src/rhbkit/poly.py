"""Polynomial differential-algebraic systems.

A :class:`PolySystem` holds rows of two kinds:

* ``diff``: ``z_i' = sum of monomials`` for the state variable ``z_i``;
* ``alg``: ``0 = sum of monomials``.

A monomial is ``coeff * prod(z_j^(d) ** e) * [cos|sin](k * w * t)``. Factors
with a derivative order ``d >= 1`` are allowed on the right-hand side; they are
resolved by the harmonic balance engine through the derivative matrix rather
than by new unknowns.
"""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

PHASES = ("cos", "sin")


@dataclass(frozen=True)
class Monomial:
    coeff: float
    factors: tuple = ()  # ((var, deriv_order, exponent), ...) sorted by (var, order)
    forcing: tuple | None = None  # (multiple, phase)

    def __post_init__(self):
        keys = [(v, d) for v, d, _ in self.factors]
        if keys != sorted(keys) or len(set(keys)) != len(keys):
            raise ValueError("monomial factors must be sorted and distinct")
        if any(e < 1 or d < 0 for _, d, e in self.factors):
            raise ValueError("exponents must be >= 1 and derivative orders >= 0")
        if self.forcing is not None:
            k, phase = self.forcing
            if k < 1 or phase not in PHASES:
                raise ValueError(f"bad forcing factor {self.forcing!r}")

    @property
    def degree(self):
        return sum(e for _, _, e in self.factors)

    @property
    def key(self):
        return (self.factors, self.forcing)


@dataclass(frozen=True)
class PolyEquation:
    kind: str  # "diff" or "alg"
    monomials: tuple
    var: int | None = None  # state variable whose derivative is the left side

    def __post_init__(self):
        if self.kind not in ("diff", "alg"):
            raise ValueError(f"unknown equation kind {self.kind!r}")
        if (self.kind == "diff") != (self.var is not None):
            raise ValueError("differential rows need a variable, algebraic rows must not have one")


@dataclass(frozen=True)
class Constraint:
    """``var^(order)(0) = value``."""

    var: str
    order: int
    value: float


@dataclass(frozen=True)
class PolySystem:
    variables: tuple
    equations: tuple
    forcing_omega: float | None = None
    conservative: bool = False
    constraints: tuple = ()
    initial_values: tuple = ()  # ((name, value at t=0), ...) for every state that is known
    originals: tuple = ()  # names of the variables of the source system
    name: str = ""

    def __post_init__(self):
        n = len(self.variables)
        seen = set()
        for eq in self.equations:
            if eq.kind == "diff":
                if not 0 <= eq.var < n or eq.var in seen:
                    raise ValueError(f"bad or duplicate differential row for variable {eq.var}")
                seen.add(eq.var)
            for m in eq.monomials:
                if any(not 0 <= v < n for v, _, _ in m.factors):
                    raise ValueError("monomial references an unknown variable")

    @property
    def degree(self):
        return degree_of(self)

    def index(self, name):
        return self.variables.index(name)

    def differential_row(self, var):
        """Position of the differential row of ``var`` (name or index), or None."""
        if isinstance(var, str):
            var = self.index(var)
        for i, eq in enumerate(self.equations):
            if eq.kind == "diff" and eq.var == var:
                return i
        return None

    def max_deriv_order(self):
        return max((d for eq in self.equations for m in eq.monomials for _, d, _ in m.factors),
                   default=0)

    @property
    def initial(self):
        return dict(self.initial_values)


def degree_of(sys):
    """Nonlinearity degree: the largest monomial degree, at least 1.

    Every derivative factor counts like an ordinary factor, whatever its order.
    """
    deg = max((m.degree for eq in sys.equations for m in eq.monomials), default=1)
    return max(deg, 1)


# --------------------------------------------------------------------------
# Sparse polynomial algebra used while building systems

def _merge(f1, f2):
    acc = defaultdict(int)
    for v, d, e in f1 + f2:
        acc[(v, d)] += e
    return tuple((v, d, e) for (v, d), e in sorted(acc.items()))


def _forcing_product(a, b):
    """Product-to-sum of two forcing factors as [(coeff, forcing-or-None)]."""
    if a is None:
        return [(1.0, b)]
    if b is None:
        return [(1.0, a)]
    (k1, p1), (k2, p2) = a, b
    if p1 == "cos" and p2 == "cos":
        terms = [(0.5, k1 - k2, "cos"), (0.5, k1 + k2, "cos")]
    elif p1 == "sin" and p2 == "sin":
        terms = [(0.5, k1 - k2, "cos"), (-0.5, k1 + k2, "cos")]
    elif p1 == "sin":
        terms = [(0.5, k1 + k2, "sin"), (0.5, k1 - k2, "sin")]
    else:
        terms = [(0.5, k1 + k2, "sin"), (-0.5, k1 - k2, "sin")]
    out = []
    for c, k, p in terms:
        if k < 0:
            k, c = -k, (c if p == "cos" else -c)
        if k == 0:
            if p == "cos":
                out.append((c, None))
        else:
            out.append((c, (k, p)))
    return out


class Poly(dict):
    """Map ``(factors, forcing) -> coeff``."""

    @classmethod
    def const(cls, c):
        return cls({((), None): float(c)}) if c else cls()

    @classmethod
    def var(cls, v, order=0, exponent=1):
        return cls({(((v, order, exponent),), None): 1.0})

    @classmethod
    def harmonic(cls, multiple, phase, amplitude=1.0):
        return cls({((), (multiple, phase)): float(amplitude)})

    def __add__(self, other):
        out = Poly(self)
        for k, c in other.items():
            out[k] = out.get(k, 0.0) + c
        return out._prune()

    def __sub__(self, other):
        return self + other.scale(-1.0)

    def __mul__(self, other):
        out = Poly()
        for (f1, h1), c1 in self.items():
            for (f2, h2), c2 in other.items():
                factors = _merge(f1, f2)
                for c, h in _forcing_product(h1, h2):
                    key = (factors, h)
                    out[key] = out.get(key, 0.0) + c * c1 * c2
        return out._prune()

    def __pow__(self, n):
        out = Poly.const(1.0)
        for _ in range(n):
            out = out * self
        return out

    def scale(self, s):
        return Poly({k: s * c for k, c in self.items()})._prune()

    def _prune(self):
        for k in [k for k, c in self.items() if c == 0.0]:
            del self[k]
        return self

    def frozen_key(self):
        return tuple(sorted(self.items(), key=lambda kv: _sort_key(kv[0])))

    def monomials(self):
        return tuple(Monomial(c, f, h) for (f, h), c in sorted(self.items(), key=lambda kv: _sort_key(kv[0])))

    @classmethod
    def from_monomials(cls, monomials):
        out = cls()
        for m in monomials:
            out[m.key] = out.get(m.key, 0.0) + m.coeff
        return out._prune()


def _sort_key(key):
    factors, forcing = key
    deg = sum(e for _, _, e in factors)
    return (deg, factors, forcing or (0, ""))


def canonical_equation(kind, poly, var=None):
    return PolyEquation(kind, Poly(poly).monomials(), var)


# --------------------------------------------------------------------------
# Evaluation

class CompiledSystem:
    """Vectorised evaluator of a :class:`PolySystem`.

    ``slots`` lists every ``(var, deriv_order)`` pair the right-hand sides
    reference; ``values`` passed to :meth:`rhs` has one row per slot.
    """

    def __init__(self, sys):
        self.sys = sys
        slots = sorted({(v, d) for eq in sys.equations for m in eq.monomials for v, d, _ in m.factors})
        self.slots = slots
        self.slot_index = {s: i for i, s in enumerate(slots)}
        self.rows = []
        for eq in sys.equations:
            terms = []
            for m in eq.monomials:
                facs = tuple((self.slot_index[(v, d)], e) for v, d, e in m.factors)
                terms.append((m.coeff, facs, m.forcing))
            self.rows.append(terms)

    def _forcing(self, forcing, angle):
        k, phase = forcing
        return np.cos(k * angle) if phase == "cos" else np.sin(k * angle)

    def rhs(self, values, angle):
        values = np.asarray(values, dtype=float)
        shape = values.shape[1:]
        out = np.zeros((len(self.rows),) + shape)
        for i, terms in enumerate(self.rows):
            for coeff, facs, forcing in terms:
                term = coeff
                for s, e in facs:
                    term = term * (values[s] if e == 1 else values[s] ** e)
                if forcing is not None:
                    term = term * self._forcing(forcing, angle)
                out[i] += term
        return out

    def partials(self, values, angle):
        values = np.asarray(values, dtype=float)
        shape = values.shape[1:]
        out = np.zeros((len(self.rows), len(self.slots)) + shape)
        for i, terms in enumerate(self.rows):
            for coeff, facs, forcing in terms:
                base = coeff
                if forcing is not None:
                    base = base * self._forcing(forcing, angle)
                for j, (s, e) in enumerate(facs):
                    term = base * (e * values[s] ** (e - 1) if e > 1 else 1.0)
                    for jj, (ss, ee) in enumerate(facs):
                        if jj != j:
                            term = term * (values[ss] if ee == 1 else values[ss] ** ee)
                    out[i, s] += term
        return out

    def dependencies(self):
        """``{(equation, slot)}`` pairs with a structurally nonzero partial."""
        return {(i, s) for i, terms in enumerate(self.rows) for _, facs, _ in terms for s, _ in facs}


def _state_values(sys, compiled, state):
    rows = []
    for v, d in compiled.slots:
        name = sys.variables[v]
        for key in [(v, d), (name, d)] + ([name, v] if d == 0 else []):
            if key in state:
                rows.append(np.asarray(state[key], dtype=float))
                break
        else:
            raise KeyError(f"state is missing {name}" + "'" * d)
    return np.broadcast_arrays(*rows) if rows else []


def eval_rhs(sys, state, t=0.0):
    """Right-hand side (diff rows) or residual (alg rows) of every equation.

    ``state`` maps ``name``, ``index``, ``(name, order)`` or ``(index, order)``
    to a value or an array of samples.
    """
    compiled = CompiledSystem(sys)
    values = _state_values(sys, compiled, state)
    angle = (sys.forcing_omega or 0.0) * np.asarray(t, dtype=float)
    if not values:
        values = np.zeros((0,) + np.shape(angle))
    return compiled.rhs(values, angle)


def eval_partials(sys, state, t=0.0):
    """Exact partial derivatives of every equation.

    Returns ``(slots, D)`` where ``D[i, j]`` is the derivative of equation
    ``i`` with respect to ``slots[j] = (var_index, deriv_order)``.
    """
    compiled = CompiledSystem(sys)
    values = _state_values(sys, compiled, state)
    angle = (sys.forcing_omega or 0.0) * np.asarray(t, dtype=float)
    if not values:
        values = np.zeros((0,) + np.shape(angle))
    return compiled.slots, compiled.partials(values, angle)


# --------------------------------------------------------------------------
# Text and JSON forms

def _fmt_coeff(c):
    return repr(float(c))


def monomial_text(sys, m):
    parts = [_fmt_coeff(m.coeff)]
    for v, d, e in m.factors:
        f = sys.variables[v] + "'" * d
        parts.append(f if e == 1 else f"{f}^{e}")
    if m.forcing is not None:
        k, p = m.forcing
        parts.append(f"{p}({'' if k == 1 else f'{k}*'}w*t)")
    return "*".join(parts)


def to_text(sys):
    """Canonical, human readable listing of the system."""
    lines = [f"# variables: {', '.join(sys.variables)}", f"# degree: {degree_of(sys)}"]
    if sys.forcing_omega is not None:
        lines.append(f"# forcing w = {sys.forcing_omega!r}")
    for eq in sys.equations:
        rhs = " + ".join(monomial_text(sys, m) for m in eq.monomials) or "0.0"
        if eq.kind == "diff":
            lines.append(f"{sys.variables[eq.var]}' = {rhs}")
        else:
            lines.append(f"0 = {rhs}")
    return "\n".join(lines) + "\n"


def to_json(sys):
    doc = {
        "name": sys.name,
        "variables": list(sys.variables),
        "degree": degree_of(sys),
        "forcing_omega": sys.forcing_omega,
        "conservative": sys.conservative,
        "equations": [],
        "constraints": [{"var": c.var, "deriv_order": c.order, "value": c.value}
                        for c in sys.constraints],
        "initial_values": {k: v for k, v in sys.initial_values},
        "originals": list(sys.originals),
    }
    for eq in sys.equations:
        row = {"kind": "differential" if eq.kind == "diff" else "algebraic", "monomials": []}
        if eq.kind == "diff":
            row["var"] = sys.variables[eq.var]
        for m in eq.monomials:
            row["monomials"].append({
                "coeff": m.coeff,
                "factors": [{"var": sys.variables[v], "deriv_order": d, "exponent": e}
                            for v, d, e in m.factors],
                "forcing": None if m.forcing is None
                else {"multiple": m.forcing[0], "phase": m.forcing[1]},
            })
        doc["equations"].append(row)
    return doc


def from_json(doc):
    if isinstance(doc, str):
        doc = json.loads(doc)
    names = list(doc["variables"])
    equations = []
    for row in doc["equations"]:
        monos = []
        for m in row["monomials"]:
            facs = tuple(sorted((names.index(f["var"]), f["deriv_order"], f["exponent"])
                                for f in m["factors"]))
            h = m.get("forcing")
            monos.append(Monomial(float(m["coeff"]), facs,
                                  None if h is None else (h["multiple"], h["phase"])))
        kind = "diff" if row["kind"] == "differential" else "alg"
        equations.append(PolyEquation(kind, tuple(monos),
                                      names.index(row["var"]) if kind == "diff" else None))
    return PolySystem(
        tuple(names), tuple(equations), doc.get("forcing_omega"), doc.get("conservative", False),
        tuple(Constraint(c["var"], c["deriv_order"], c["value"]) for c in doc.get("constraints", [])),
        tuple(doc.get("initial_values", {}).items()), tuple(doc.get("originals", [])),
        doc.get("name", ""))
