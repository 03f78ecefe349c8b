"""
Why the collocation grid size matters
=====================================

Collocation on 2N + 1 points (HDHB) folds the harmonics of a cubic product
above N back onto the retained ones. With (phi + 1) N + 1 points (RHB) the
product of phi truncated series is reconstructed exactly, so the residual is
the classical harmonic balance residual. This script measures both gaps
against quadrature Fourier coefficients.
"""
import numpy as np

from rhbkit import HarmonicBasis, build_E, build_pinv, variant_grid
from rhbkit.oracle import fourier_bruteforce

N, phi = 3, 3
basis = HarmonicBasis.single(1.0, N)
rng = np.random.default_rng(1)
c = rng.uniform(-1, 1, basis.size)


def series(th):
    out = np.full_like(th, c[0])
    for n in range(1, N + 1):
        out += c[2 * n - 1] * np.cos(n * th) + c[2 * n] * np.sin(n * th)
    return out


true = fourier_bruteforce(lambda th: series(th) ** 3, N)

# %%
for variant in ("hdhb", "rhb", "aft"):
    grid = variant_grid(variant, phi, basis)
    E, Es = build_E(basis, grid), build_pinv(basis, grid)
    gap = np.max(np.abs(Es @ (E @ c) ** 3 - true))
    print(f"{variant:5s} M = {grid.M:3d}   max |collocated - quadrature| = {gap:.2e}")

# %%
# Where the folded harmonics land: sampled at M = 2N + 1 points, harmonic n
# is indistinguishable from n' = ((n + N) mod M) - N. A negative n' means the
# cosine part lands on |n'| unchanged and the sine part with its sign flipped.
M = 2 * N + 1
for n in range(N + 1, phi * N + 1):
    a = (n + N) % M - N
    print(f"harmonic {n} -> {abs(a)}" + ("  (sine flipped)" if a < 0 else ""))
