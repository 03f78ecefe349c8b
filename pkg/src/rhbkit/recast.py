"""Rewrite a general differential system as a polynomial DAE.

Non-polynomial constructs are replaced by companion variables together with
their defining rows:

============  =====================  =========================================
construct     companions             rows
============  =====================  =========================================
``1/g``       ``w``                  ``0 = g w - 1``
``g^(q/p)``   ``b`` (``b^p = g``)    ``0 = b^p - g``, result ``b^q``
``exp g``     ``u``                  ``u' = g' u``
``log_a g``   ``u``, ``v = 1/g``     ``u' = v g' / ln a``, ``0 = g v - 1``
``sin/cos g`` ``u``, ``v``           ``u' = g' v``, ``v' = -g' u``
``tan g``     ``u``                  ``u' = g' + g' u^2``
``asin g``    ``u``, ``v``, ``w``    ``u' = g' w``, ``0 = w v - 1``, ``0 = v^2 + g^2 - 1``
``acos g``    ``u``, ``v``, ``w``    ``u' = g' w``, ``0 = w v + 1``, ``0 = v^2 + g^2 - 1``
``atan g``    ``u``, ``v``, ``w``    ``u' = g' w``, ``0 = w v - 1``, ``0 = v - g^2 - 1``
============  =====================  =========================================

Higher derivatives are reduced to first order through chain variables
``x__d1, x__d2, ...``. Nested constructs are rewritten inside out.
"""
from __future__ import annotations

import math

from . import expr as ex
from .poly import Constraint, Poly, PolySystem, canonical_equation, degree_of


class RecastError(ValueError):
    """The system contains a construct no rewrite rule covers."""


class _Recaster:
    def __init__(self, sys):
        self.sys = sys
        self.orders = sys.max_orders()
        self.names = list(sys.variables)
        self.chain = {}  # original name -> [index of x, x', ..., x^(k-1)]
        for v in sys.variables:
            self.chain[v] = [self.names.index(v)]
        for v in sys.variables:
            for j in range(1, self.orders[v]):
                self.chain[v].append(self._new(f"{v}__d{j}"))
        self.successor = {}  # chain index -> next chain index
        for v, idx in self.chain.items():
            for a, b in zip(idx, idx[1:]):
                self.successor[a] = b
        self.rows = []  # (kind, poly, var)
        self.cache = {}
        self.values = {}  # index -> value at t = 0
        self.companion_defs = []  # (index, callable over values) in creation order

    def _new(self, base):
        name, k = base, 1
        while name in self.names:
            k += 1
            name = f"{base}{k}"
        self.names.append(name)
        return len(self.names) - 1

    def _label(self, g):
        for (factors, _), _c in sorted(g.items(), key=lambda kv: -len(kv[0][0])):
            if factors:
                return self.names[factors[0][0]]
        return "c"

    # ----------------------------------------------------------------------
    def derivative(self, g):
        """Time derivative of a polynomial."""
        out = Poly()
        omega = self.sys.forcing_omega
        for (factors, forcing), c in g.items():
            rest = Poly({(factors, None): c})
            if forcing is not None:
                k, phase = forcing
                dh = Poly.harmonic(k, "sin", -k * omega) if phase == "cos" \
                    else Poly.harmonic(k, "cos", k * omega)
                out = out + rest * dh
                rest = Poly({(factors, forcing): c})
            for j, (v, d, e) in enumerate(factors):
                others = factors[:j] + ((v, d, e - 1),) + factors[j + 1:] if e > 1 \
                    else factors[:j] + factors[j + 1:]
                term = Poly({(others, forcing): c * e})
                if d == 0 and v in self.successor:
                    dz = Poly.var(self.successor[v])
                else:
                    dz = Poly.var(v, d + 1)
                out = out + term * dz
        return out

    def reciprocal(self, g):
        key = ("inv", g.frozen_key())
        if key not in self.cache:
            w = self._new(f"{self._label(g)}__inv")
            self.rows.append(("alg", g * Poly.var(w) - Poly.const(1.0), None))
            self.companion_defs.append((w, lambda vals, g=g: 1.0 / self._at_zero(g, vals)))
            self.cache[key] = w
        return self.cache[key]

    def root(self, g, p):
        key = ("rt", p, g.frozen_key())
        if key not in self.cache:
            b = self._new(f"{self._label(g)}__rt{p}")
            self.rows.append(("alg", Poly.var(b, 0, p) - g, None))

            def value(vals, g=g, p=p):
                a = self._at_zero(g, vals)
                return math.copysign(abs(a) ** (1.0 / p), a) if p % 2 else a ** (1.0 / p)
            self.companion_defs.append((b, value))
            self.cache[key] = b
        return self.cache[key]

    def elementary(self, name, g, log_base=None):
        key = (name if name not in ("sin", "cos") else "sincos", log_base, g.frozen_key())
        if key in self.cache:
            comp = self.cache[key]
        else:
            comp = self._elementary(name, g, log_base)
            self.cache[key] = comp
        if name == "cos":
            return comp[1]
        return comp[0]

    def _elementary(self, name, g, log_base):
        label = self._label(g)
        dg = self.derivative(g)
        at0 = self._at_zero
        if name in ("sin", "cos"):
            u, v = self._new(f"{label}__sin"), self._new(f"{label}__cos")
            self.rows.append(("diff", dg * Poly.var(v), u))
            self.rows.append(("diff", (dg * Poly.var(u)).scale(-1.0), v))
            self.companion_defs.append((u, lambda vals: math.sin(at0(g, vals))))
            self.companion_defs.append((v, lambda vals: math.cos(at0(g, vals))))
            return (u, v)
        if name == "exp":
            u = self._new(f"{label}__exp")
            self.rows.append(("diff", dg * Poly.var(u), u))
            self.companion_defs.append((u, lambda vals: math.exp(at0(g, vals))))
            return (u,)
        if name == "tan":
            u = self._new(f"{label}__tan")
            self.rows.append(("diff", dg + dg * Poly.var(u, 0, 2), u))
            self.companion_defs.append((u, lambda vals: math.tan(at0(g, vals))))
            return (u,)
        if name == "log":
            u = self._new(f"{label}__log")
            self.companion_defs.append(
                (u, lambda vals: math.log(at0(g, vals)) / math.log(log_base)))
            v = self.reciprocal(g)
            self.rows.append(("diff", (Poly.var(v) * dg).scale(1.0 / math.log(log_base)), u))
            return (u, v)
        # inverse trigonometric functions: u' = g' w with auxiliary v, w
        u = self._new(f"{label}__{name}")
        v = self._new(f"{label}__{name}_v")
        w = self._new(f"{label}__{name}_w")
        one = Poly.const(1.0)
        self.rows.append(("diff", dg * Poly.var(w), u))
        if name == "atan":
            self.rows.append(("alg", Poly.var(w) * Poly.var(v) - one, None))
            self.rows.append(("alg", Poly.var(v) - g * g - one, None))
            fu, fv = math.atan, (lambda a: 1.0 + a * a)
            fw = lambda a: 1.0 / (1.0 + a * a)
        else:
            sign = 1.0 if name == "asin" else -1.0
            self.rows.append(("alg", Poly.var(w) * Poly.var(v) - one.scale(sign), None))
            self.rows.append(("alg", Poly.var(v, 0, 2) + g * g - one, None))
            fu = math.asin if name == "asin" else math.acos
            fv = lambda a: math.sqrt(1.0 - a * a)
            fw = lambda a, s=sign: s / math.sqrt(1.0 - a * a)
        self.companion_defs.append((u, lambda vals: fu(at0(g, vals))))
        self.companion_defs.append((v, lambda vals: fv(at0(g, vals))))
        self.companion_defs.append((w, lambda vals: fw(at0(g, vals))))
        return (u, v, w)

    # ----------------------------------------------------------------------
    def poly(self, node):
        if isinstance(node, ex.Const):
            return Poly.const(node.value)
        if isinstance(node, ex.Var):
            return Poly.var(self.chain[node.name][0])
        if isinstance(node, ex.Deriv):
            idx, k = self.chain[node.name], self.orders[node.name]
            if node.order < k:
                return Poly.var(idx[node.order])
            return Poly.var(idx[k - 1], node.order - k + 1)
        if isinstance(node, ex.Harmonic):
            return Poly.harmonic(node.multiple, node.phase, node.amplitude)
        if isinstance(node, ex.Add):
            out = Poly()
            for t in node.terms:
                out = out + self.poly(t)
            return out
        if isinstance(node, ex.Mul):
            out = Poly.const(1.0)
            for f in node.factors:
                out = out * self.poly(f)
            return out
        if isinstance(node, ex.Pow):
            base = self.poly(node.base)
            if node.exponent >= 0:
                return base ** node.exponent
            return self._recip_power(base, -node.exponent)
        if isinstance(node, ex.RPow):
            b = self.root(self.poly(node.base), node.p)
            if node.q >= 0:
                return Poly.var(b, 0, node.q) if node.q else Poly.const(1.0)
            return Poly.var(self.reciprocal(Poly.var(b)), 0, -node.q)
        if isinstance(node, ex.Func):
            return Poly.var(self.elementary(node.name, self.poly(node.arg), node.log_base))
        raise RecastError(f"unsupported construct {node!r}")

    def _recip_power(self, base, n):
        if len(base) == 1:
            ((factors, forcing), c), = base.items()
            if forcing is None and c != 0 and all(d == 0 for _, d, _ in factors):
                out = Poly.const(1.0 / c ** n)
                for v, _, e in factors:
                    out = out * Poly.var(self.reciprocal(Poly.var(v)), 0, e * n)
                return out
        if not base:
            raise RecastError("division by zero")
        return Poly.var(self.reciprocal(base), 0, n)

    # ----------------------------------------------------------------------
    def _at_zero(self, g, vals):
        total = 0.0
        for (factors, forcing), c in g.items():
            term = c
            for v, d, e in factors:
                if d != 0 or v not in vals:
                    raise KeyError(v)
                term *= vals[v] ** e
            if forcing is not None:
                term *= 1.0 if forcing[1] == "cos" else 0.0
            total += term
        return total

    def leading(self):
        """Assign each equation the variable whose top derivative it determines."""
        eqs = self.sys.equations
        top = {v: ex.Deriv(v, self.orders[v]) for v in self.sys.variables if self.orders[v] >= 1}
        contains = [{n for n in ex.walk(eq) if isinstance(n, ex.Deriv)} for eq in eqs]
        assigned, taken = [None] * len(eqs), set()
        for i, v in enumerate(self.sys.variables):
            if v in top and top[v] in contains[i]:
                assigned[i] = v
                taken.add(v)
        for i in range(len(eqs)):
            if assigned[i] is None:
                for v in self.sys.variables:
                    if v in top and v not in taken and top[v] in contains[i]:
                        assigned[i] = v
                        taken.add(v)
                        break
        missing = [v for v in top if v not in taken]
        if missing:
            raise RecastError(f"no equation determines the highest derivative of {missing}")
        return assigned

    def run(self):
        for v, idx in self.chain.items():
            for a, b in zip(idx, idx[1:]):
                self.rows.append(("diff", Poly.var(b), a))
        for i, (eq, lead) in enumerate(zip(self.sys.equations, self.leading())):
            p = self.poly(eq)
            if lead is None:
                self.rows.append(("alg", p, None))
                continue
            z = self.chain[lead][-1]
            self.rows.append(("diff", self._solve_for(p, z, lead), z))
        return self

    def _solve_for(self, p, z, lead):
        pure = (((z, 1, 1),), None)
        if pure in p:
            c = p[pure]
            rest = Poly(p)
            del rest[pure]
            return rest.scale(-1.0 / c)
        holders = [k for k in p if any(v == z and d == 1 for v, d, _ in k[0])]
        if len(holders) == 1:
            factors, forcing = holders[0]
            (e,) = [e for v, d, e in factors if v == z and d == 1]
            others = tuple(f for f in factors if not (f[0] == z and f[1] == 1))
            if e == 1 and forcing is None and all(d == 0 for _, d, _ in others):
                c = p[holders[0]]
                rest = Poly(p)
                del rest[holders[0]]
                return rest.scale(-1.0) * self._recip_power(Poly({(others, None): c}), 1)
        raise RecastError(
            f"cannot isolate the highest derivative of {lead!r}: it must appear with a "
            "constant coefficient or in a single monomial")

    def initial_values(self):
        vals = {}
        for c in self.sys.constraints:
            idx, k = self.chain[c.var], self.orders[c.var]
            if c.order < max(k, 1):
                vals[idx[c.order]] = c.value
        for idx, fn in self.companion_defs:
            try:
                vals[idx] = fn(vals)
            except (KeyError, ValueError, ZeroDivisionError):
                pass
        return vals


def recast(sys):
    """Polynomial DAE equivalent to ``sys``; a :class:`PolySystem` is returned unchanged."""
    if isinstance(sys, PolySystem):
        return sys
    for c in sys.constraints:
        if c.time != 0.0:
            raise RecastError(f"constraint on {c.var} at t = {c.time}; only t = 0 is supported")
    r = _Recaster(sys).run()
    diff_rows = sorted((row for row in r.rows if row[0] == "diff"), key=lambda row: row[2])
    alg_rows = [row for row in r.rows if row[0] == "alg"]
    equations = tuple(canonical_equation(kind, p, var) for kind, p, var in diff_rows + alg_rows)
    constraints = []
    for c in sys.constraints:
        idx, k = r.chain[c.var], r.orders[c.var]
        if c.order < max(k, 1):
            constraints.append(Constraint(r.names[idx[c.order]], 0, c.value))
        else:
            constraints.append(Constraint(r.names[idx[-1]], c.order - k + 1, c.value))
    vals = r.initial_values()
    return PolySystem(
        tuple(r.names), equations, sys.forcing_omega, sys.conservative, tuple(constraints),
        tuple((r.names[i], v) for i, v in sorted(vals.items())), tuple(sys.variables), sys.name)


__all__ = ["recast", "degree_of", "RecastError"]
