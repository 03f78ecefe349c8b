"""Fourier bases, collocation grids and the matrices that connect them.

Coefficient blocks are laid out per variable as ``[a0, a1, b1, ..., aH, bH]``
where ``x(t) = a0 + sum_k a_k cos(f_k t) + b_k sin(f_k t)``.

Single-frequency bases work in the phase ``tau = omega t`` so that the
collocation matrices do not depend on a (possibly unknown) ``omega``; the
derivative matrix is then scaled by ``omega`` where it is used. Dual-frequency
bases work in absolute time and their derivative matrix carries the absolute
frequencies ``m w1 + n w2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

J = np.array([[0.0, 1.0], [-1.0, 0.0]])

# Dual-frequency sampling: rationalisation limits for the commensurate grid
# and the shape of the least-squares fallback grid.
MAX_DENOMINATOR = 64
RATIO_RTOL = 1e-10
MAX_THEOREM_GRID = 20000
FALLBACK_OVERSAMPLE = 4
FALLBACK_BEATS = 32


class IncommensurateError(ValueError):
    """Two base frequencies do not rationalise into a tractable sampling grid."""


@dataclass(frozen=True)
class HarmonicBasis:
    mode: str  # "single" or "dual"
    omegas: tuple  # (omega,) or (omega1, omega2)
    order: int  # N (single) or truncation p (dual)
    lattice: tuple = ()  # ((m, n), ...) for dual mode

    @classmethod
    def single(cls, omega, N):
        if N < 1:
            raise ValueError("harmonic order must be >= 1")
        return cls("single", (float(omega),), int(N))

    @classmethod
    def dual(cls, omega1, omega2, p):
        if p < 1:
            raise ValueError("truncation must be >= 1")
        return cls("dual", (float(omega1), float(omega2)), int(p), dual_lattice(omega1, omega2, p))

    @property
    def omega(self):
        return self.omegas[0]

    @property
    def n_harmonics(self):
        return self.order if self.mode == "single" else len(self.lattice)

    @property
    def size(self):
        return 2 * self.n_harmonics + 1

    @property
    def multipliers(self):
        """Per-harmonic frequency in the basis' own time variable.

        Integers ``1..N`` in single mode (phase ``tau``), absolute angular
        frequencies in dual mode.
        """
        if self.mode == "single":
            return np.arange(1, self.order + 1, dtype=float)
        w1, w2 = self.omegas
        return np.array([m * w1 + n * w2 for m, n in self.lattice])

    @property
    def frequencies(self):
        """Absolute angular frequency of every harmonic."""
        if self.mode == "single":
            return self.omega * self.multipliers
        return self.multipliers

    def with_omega(self, omega):
        if self.mode != "single":
            raise ValueError("only single-frequency bases carry one omega")
        return HarmonicBasis.single(omega, self.order)


def dual_lattice(omega1, omega2, p, rtol=1e-12):
    """Ordered lattice ``{(m, n): |m| + |n| <= p}`` of distinct positive frequencies.

    Pairs are ordered by ``(|m| + |n|, m, n)`` with the first nonzero entry
    positive, then flipped where needed so that ``m w1 + n w2 > 0``. Pairs of
    zero frequency, and pairs repeating an earlier frequency, are dropped.
    """
    pairs = {(m, n) if (m > 0 or (m == 0 and n > 0)) else (-m, -n)
             for m in range(-p, p + 1) for n in range(-p, p + 1)
             if 0 < abs(m) + abs(n) <= p}
    scale = max(abs(omega1), abs(omega2))
    out, seen = [], []
    for m, n in sorted(pairs, key=lambda mn: (abs(mn[0]) + abs(mn[1]), mn[0], mn[1])):
        f = m * omega1 + n * omega2
        if abs(f) <= rtol * scale:
            continue
        if f < 0:
            m, n, f = -m, -n, -f
        if any(abs(f - g) <= rtol * scale for g in seen):
            continue
        seen.append(f)
        out.append((m, n))
    return tuple(out)


def build_A(basis, n_vars=1):
    """Derivative matrix acting on coefficient blocks.

    Single mode: ``diag(0, 1 J, 2 J, ..., N J)`` (multiply by omega to get
    d/dt). Dual mode: blocks scaled by the absolute lattice frequencies.
    """
    blocks = [np.zeros((1, 1))] + [f * J for f in basis.multipliers]
    size = basis.size
    A = np.zeros((size, size))
    pos = 0
    for b in blocks:
        k = b.shape[0]
        A[pos:pos + k, pos:pos + k] = b
        pos += k
    return A if n_vars == 1 else np.kron(np.eye(n_vars), A)


@dataclass(frozen=True)
class CollocationGrid:
    M: int
    T: float  # sampling period in the basis' time variable (2 pi for single mode)
    times: np.ndarray = field(repr=False)
    fallback: bool = False  # least-squares grid instead of the equivalence theorem

    def __post_init__(self):
        t = self.times
        if len(t) != self.M or np.any(np.diff(t) <= 0) or t[0] < 0 or t[-1] >= self.T:
            raise ValueError("collocation times must increase strictly within [0, T)")


def uniform_grid(M, T=2 * math.pi):
    return CollocationGrid(int(M), float(T), np.arange(M) * (T / M))


def build_E(basis, grid):
    """``M x (2H+1)`` matrix sampling a coefficient block on the grid."""
    if grid.M < basis.size:
        raise ValueError(f"{grid.M} collocation points cannot resolve {basis.size} coefficients")
    arg = np.outer(grid.times, basis.multipliers)
    E = np.empty((grid.M, basis.size))
    E[:, 0] = 1.0
    E[:, 1::2] = np.cos(arg)
    E[:, 2::2] = np.sin(arg)
    return E


def build_pinv(basis, grid):
    """Left inverse ``E*`` of :func:`build_E` with ``E* E = I``.

    Closed form ``(2/M) [1/2; cos; sin]`` on uniform grids, least-squares
    pseudo-inverse on fallback grids.
    """
    E = build_E(basis, grid)
    if grid.fallback:
        return np.linalg.pinv(E)
    Es = (2.0 / grid.M) * E.T
    Es[0] *= 0.5
    return Es


def rationalize(omega1, omega2, max_denominator=MAX_DENOMINATOR, rtol=RATIO_RTOL):
    """``(a, b)`` coprime with ``omega1 / omega2 = a / b``, or raise."""
    ratio = omega1 / omega2
    frac = Fraction(ratio).limit_denominator(max_denominator)
    if frac <= 0 or abs(float(frac) - ratio) > rtol * abs(ratio):
        raise IncommensurateError(
            f"omega1/omega2 = {ratio!r} has no rational form with denominator <= {max_denominator}")
    return frac.numerator, frac.denominator


def frequency_gcd(omega1, omega2, **kw):
    a, _ = rationalize(omega1, omega2, **kw)
    return omega1 / a


def min_collocation(phi, basis, **kw):
    """Smallest grid free of aliasing for a degree-``phi`` polynomial system.

    Single mode: ``(phi + 1) N + 1``. Dual mode (commensurate base
    frequencies): ``floor((phi + 1) p max(w1, w2) / gcd(w1, w2)) + 1``.
    """
    if phi < 1:
        raise ValueError("nonlinearity degree must be >= 1")
    if basis.mode == "single":
        return (phi + 1) * basis.order + 1
    w1, w2 = basis.omegas
    a, b = rationalize(w1, w2, **kw)
    M = (phi + 1) * basis.order * max(a, b) + 1
    if M > MAX_THEOREM_GRID:
        raise IncommensurateError(f"equivalence grid would need {M} points")
    return M


def sampling_period(basis, **kw):
    if basis.mode == "single":
        return 2 * math.pi
    return 2 * math.pi / frequency_gcd(*basis.omegas, **kw)


def fallback_grid(phi, basis):
    """Least-squares grid for nearly incommensurate base frequencies.

    Golden-ratio (low discrepancy) sample times over ``FALLBACK_BEATS`` periods
    of the slowest lattice frequency.
    """
    p = basis.order
    M = FALLBACK_OVERSAMPLE * ((phi + 1) * p * (p + 1) + 1)
    M = max(M, 2 * basis.size)
    slow = float(np.min(basis.multipliers))
    window = FALLBACK_BEATS * 2 * math.pi / slow
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    times = np.sort(np.mod(np.arange(M) * golden, 1.0)) * window
    return CollocationGrid(M, window, times, fallback=True)


def variant_grid(variant, phi, basis):
    """Collocation grid of a harmonic balance variant.

    ``hdhb``: ``2N + 1`` points; ``aft``: ``2 phi N + 1``; ``rhb``: the
    equivalence grid (dual mode falls back to a least-squares grid when the
    base frequencies do not rationalise).
    """
    variant = variant.lower()
    if variant in ("hdhb", "aft"):
        if basis.mode != "single":
            raise ValueError(f"{variant} is defined for single-frequency bases only")
        M = basis.size if variant == "hdhb" else 2 * phi * basis.order + 1
        return uniform_grid(M)
    if variant not in ("rhb", "rmhb"):
        raise ValueError(f"unknown variant {variant!r}")
    if basis.mode == "single":
        return uniform_grid(min_collocation(phi, basis))
    try:
        M = min_collocation(phi, basis)
    except IncommensurateError:
        return fallback_grid(phi, basis)
    return uniform_grid(M, sampling_period(basis))


def alias_of(n, L):
    """Harmonic index that ``n`` is mistaken for on a grid with limit wave number ``L``.

    Returns ``n - 2 m L`` in ``(-L, L]``.
    """
    if L < 1:
        raise ValueError("limit wave number must be >= 1")
    return L - (L - n) % (2 * L)


_QUARTER_TURNS = ((1, 0), (0, 1), (-1, 0), (0, -1))


def synthesize(basis, coeffs, t, omega=None, order=0):
    """Evaluate one variable's series (or its ``order``-th time derivative) at ``t``."""
    coeffs = np.asarray(coeffs, dtype=float)
    t = np.asarray(t, dtype=float)
    freqs = basis.frequencies if omega is None or basis.mode != "single" \
        else omega * basis.multipliers
    arg = np.multiply.outer(t, freqs)
    a, b = coeffs[1::2], coeffs[2::2]
    # d^k/dt^k shifts the phase by k quarter turns and scales by f^k
    c, s = _QUARTER_TURNS[order % 4]
    cos, sin = np.cos(arg), np.sin(arg)
    scale = freqs ** order
    out = (cos * c - sin * s) @ (scale * a) + (sin * c + cos * s) @ (scale * b)
    return out + coeffs[0] if order == 0 else out
