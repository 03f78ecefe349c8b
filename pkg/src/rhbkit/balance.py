"""Assemble the nonlinear algebraic balance equations of a polynomial DAE.

For a differential row ``z' = f`` the balanced harmonics of

    omega A z_hat - E* f(E x_hat)

are kept (dual bases use the absolute-frequency ``A`` and no ``omega``); an
algebraic row ``0 = g`` contributes ``E* g(E x_hat)``. Point constraints at
``t = 0`` add one row each (by default not for forced systems). When the system is conservative and the basis has
a single frequency, ``omega`` is appended to the unknowns.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .harmonic import CollocationGrid, HarmonicBasis, build_A, build_E, build_pinv, variant_grid
from .poly import CompiledSystem, Constraint, PolySystem, degree_of


@dataclass(frozen=True)
class BalanceScheme:
    """Which harmonic rows of each equation are balanced, plus point constraints.

    ``first_harmonic[i]`` is 0 to balance equation ``i`` from the constant term
    up to the truncation, 1 to start at the first harmonic.
    """

    first_harmonic: tuple
    constraints: tuple = ()

    @classmethod
    def full(cls, sys, constraints=()):
        return cls(tuple(0 for _ in sys.equations), tuple(constraints))

    @classmethod
    def build(cls, sys, skip_constant=(), constraints=()):
        """Balance everything except the constant rows of the named variables' equations."""
        first = [0] * len(sys.equations)
        for name in skip_constant:
            row = sys.differential_row(name)
            if row is None:
                raise ValueError(f"{name!r} has no differential row")
            first[row] = 1
        cons = tuple(c if isinstance(c, Constraint) else Constraint(*c) for c in constraints)
        return cls(tuple(first), cons)

    def n_rows(self, basis):
        return sum(basis.size - (1 if f else 0) for f in self.first_harmonic) + len(self.constraints)


@dataclass
class FourierVector:
    """Per-variable coefficient blocks, optionally with an unknown ``omega``."""

    coeffs: np.ndarray  # (n_vars, 2H + 1)
    omega: float | None = None

    @property
    def flat(self):
        x = self.coeffs.ravel()
        return x if self.omega is None else np.append(x, self.omega)

    @classmethod
    def from_flat(cls, x, n_vars, omega_unknown):
        x = np.asarray(x, dtype=float)
        if omega_unknown:
            return cls(x[:-1].reshape(n_vars, -1).copy(), float(x[-1]))
        return cls(x.reshape(n_vars, -1).copy())


@dataclass
class AlgebraicProblem:
    residual: Callable
    jacobian: Callable
    n_unknowns: int
    n_equations: int
    variant: str
    sys: PolySystem = field(repr=False)
    basis: HarmonicBasis = field(repr=False)
    grid: CollocationGrid = field(repr=False)
    scheme: BalanceScheme = field(repr=False)
    omega_unknown: bool = False

    @property
    def square(self):
        return self.n_unknowns == self.n_equations

    def unpack(self, x):
        return FourierVector.from_flat(x, len(self.sys.variables), self.omega_unknown)

    def omega_of(self, x):
        if self.omega_unknown:
            return float(x[-1])
        return self.basis.omega if self.basis.mode == "single" else None

    def zeros(self, omega=None):
        """Flat zero vector; ``omega`` fills the trailing slot when it is unknown."""
        x = np.zeros(self.n_unknowns)
        if self.omega_unknown:
            x[-1] = self.basis.omega if omega is None else omega
        return x

    def index(self, var, harmonic=0, phase="cos"):
        """Flat position of a coefficient: ``harmonic`` 0 is the constant term."""
        v = self.sys.index(var) if isinstance(var, str) else var
        k = 0 if harmonic == 0 else 2 * harmonic - (1 if phase == "cos" else 0)
        return v * self.basis.size + k

    def guess(self, entries, omega=None):
        """Start vector from ``{(var, harmonic, phase): value}`` (or ``(var, 0)`` keys)."""
        x = self.zeros(omega)
        for key, value in entries.items():
            x[self.index(*key)] = value
        return x


def _rows(size, first):
    return np.arange(1 if first else 0, size)


def assemble(sys, basis, scheme=None, variant="rhb", grid=None):
    """Build residual and analytic Jacobian of the balance equations.

    Without a ``scheme`` every harmonic is balanced; the system's point
    constraints are left out for forced systems, since the forcing term already
    fixes the phase of the response.
    """
    if scheme is None:
        scheme = BalanceScheme.full(sys, sys.constraints if sys.forcing_omega is None else ())
    if len(scheme.first_harmonic) != len(sys.equations):
        raise ValueError("scheme does not match the number of equations")
    phi = degree_of(sys)
    if grid is None:
        grid = variant_grid(variant, phi, basis)
    single = basis.mode == "single"
    omega_unknown = bool(sys.conservative and single)
    if omega_unknown and sys.forcing_omega is not None:
        raise ValueError("a forced system cannot have an unknown response frequency")

    n, S = len(sys.variables), basis.size
    E = build_E(basis, grid)
    Es = build_pinv(basis, grid)
    A = build_A(basis)
    e0 = np.zeros(S)
    e0[0] = 1.0
    e0[1::2] = 1.0

    compiled = CompiledSystem(sys)
    slots = compiled.slots
    deps = [[s for s in range(len(slots)) if (i, s) in compiled.dependencies()]
            for i in range(len(sys.equations))]
    max_order = max([d for _, d in slots] + [c.order for c in scheme.constraints] + [0])
    A_pow = [np.eye(S)]
    for _ in range(max_order):
        A_pow.append(A_pow[-1] @ A)
    EA_pow = [E @ Ak for Ak in A_pow]

    if single:
        base_omega = basis.omega
        forcing_scale = (sys.forcing_omega or 0.0)
    else:
        forcing_scale = sys.forcing_omega or 0.0

    rows_per_eq = [_rows(S, f) for f in scheme.first_harmonic]
    cons = [(sys.index(c.var), c.order, c.value) for c in scheme.constraints]
    n_eq = sum(len(r) for r in rows_per_eq) + len(cons)
    n_unk = n * S + (1 if omega_unknown else 0)

    def split(x):
        x = np.asarray(x, dtype=float)
        X = x[: n * S].reshape(n, S)
        w = float(x[-1]) if omega_unknown else (base_omega if single else 1.0)
        return X, w

    def angle(w):
        if not single:
            return forcing_scale * grid.times
        return forcing_scale * grid.times / w

    def samples(X, w):
        vals = np.empty((len(slots), grid.M))
        for s, (v, d) in enumerate(slots):
            vals[s] = (w ** d) * (EA_pow[d] @ X[v])
        return vals

    def residual(x):
        X, w = split(x)
        F = compiled.rhs(samples(X, w), angle(w))
        proj = F @ Es.T  # (n_eq_sys, S)
        out = []
        for i, eq in enumerate(sys.equations):
            r = -proj[i]
            if eq.kind == "diff":
                r = r + w * (A @ X[eq.var])
            out.append(r[rows_per_eq[i]])
        for v, d, value in cons:
            out.append(np.array([(w ** d) * (e0 @ (A_pow[d] @ X[v])) - value]))
        return np.concatenate(out) if out else np.zeros(0)

    def jacobian(x):
        X, w = split(x)
        P = compiled.partials(samples(X, w), angle(w))  # (n_eq_sys, n_slots, M)
        Jm = np.zeros((n_eq, n_unk))
        r0 = 0
        for i, eq in enumerate(sys.equations):
            rows = rows_per_eq[i]
            block = np.zeros((S, n_unk))
            if eq.kind == "diff":
                block[:, eq.var * S:(eq.var + 1) * S] += w * A
                if omega_unknown:
                    block[:, -1] += A @ X[eq.var]
            for s in deps[i]:
                v, d = slots[s]
                p = P[i, s]
                block[:, v * S:(v + 1) * S] -= (w ** d) * (Es @ (p[:, None] * EA_pow[d]))
                if omega_unknown and d > 0:
                    block[:, -1] -= Es @ (p * (d * w ** (d - 1) * (EA_pow[d] @ X[v])))
            Jm[r0:r0 + len(rows)] = block[rows]
            r0 += len(rows)
        for v, d, _ in cons:
            Jm[r0, v * S:(v + 1) * S] = (w ** d) * (e0 @ A_pow[d])
            if omega_unknown and d > 0:
                Jm[r0, -1] = d * w ** (d - 1) * (e0 @ (A_pow[d] @ X[v]))
            r0 += 1
        return Jm

    return AlgebraicProblem(residual, jacobian, n_unk, n_eq, variant.lower(), sys, basis, grid,
                            scheme, omega_unknown)
