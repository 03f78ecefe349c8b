import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rhbkit import (HarmonicBasis, IncommensurateError, alias_of, build_A, build_E, build_pinv,
                    min_collocation, variant_grid)
from rhbkit.harmonic import synthesize, uniform_grid
from rhbkit.oracle import fourier_bruteforce

J = np.array([[0.0, 1.0], [-1.0, 0.0]])


def test_A_single_first_harmonic():
    A = build_A(HarmonicBasis.single(1.0, 1))
    assert np.array_equal(A, np.block([[np.zeros((1, 1)), np.zeros((1, 2))],
                                       [np.zeros((2, 1)), J]]))


def test_A_single_second_block():
    A = build_A(HarmonicBasis.single(1.0, 2))
    assert np.array_equal(A[3:5, 3:5], 2 * J)


def test_A_dual_blocks_use_lattice_frequencies():
    basis = HarmonicBasis.dual(2.0, 3.0, 1)
    A = build_A(basis)
    freqs = {(1, 0): 2.0, (0, 1): 3.0}
    for k, mn in enumerate(basis.lattice):
        i = 1 + 2 * k
        assert np.array_equal(A[i:i + 2, i:i + 2], freqs[mn] * J)


def test_A_differentiates_the_series():
    basis = HarmonicBasis.single(1.7, 4)
    c = np.random.default_rng(0).normal(size=basis.size)
    t = np.linspace(0, 5, 41)
    lhs = synthesize(basis, 1.7 * build_A(basis) @ c, t)
    assert np.allclose(lhs, synthesize(basis, c, t, order=1), atol=1e-12)


@pytest.mark.parametrize("N, M", [(1, 3), (2, 9), (5, 11), (7, 40)])
def test_pinv_identity_single(N, M):
    basis = HarmonicBasis.single(1.0, N)
    grid = uniform_grid(M)
    G = build_pinv(basis, grid) @ build_E(basis, grid)
    assert np.max(np.abs(G - np.eye(basis.size))) <= 1e-14 * max(M, 10)


def test_pinv_identity_dual_commensurate():
    basis = HarmonicBasis.dual(1.0, 2.0, 2)
    grid = variant_grid("rmhb", 3, basis)
    assert not grid.fallback
    assert grid.T == pytest.approx(2 * math.pi)
    G = build_pinv(basis, grid) @ build_E(basis, grid)
    assert np.max(np.abs(G - np.eye(basis.size))) <= 1e-13


def test_E_rows_are_trig_values():
    basis = HarmonicBasis.single(1.0, 2)
    grid = uniform_grid(5)
    E = build_E(basis, grid)
    t = grid.times
    expect = np.column_stack([np.ones(5), np.cos(t), np.sin(t), np.cos(2 * t), np.sin(2 * t)])
    assert np.allclose(E, expect, atol=1e-15)


def test_too_few_points_rejected():
    with pytest.raises(ValueError, match="cannot resolve"):
        build_E(HarmonicBasis.single(1.0, 2), uniform_grid(4))


@pytest.mark.parametrize("phi, N, M", [(3, 2, 9), (2, 25, 76), (4, 55, 276)])
def test_min_collocation_single(phi, N, M):
    assert min_collocation(phi, HarmonicBasis.single(1.0, N)) == M


def test_min_collocation_dual_commensurate():
    # (phi + 1) p max(w1, w2) / gcd + 1 with w = (1, 2): 4 * 2 * 2 / 1 + 1
    assert min_collocation(3, HarmonicBasis.dual(1.0, 2.0, 2)) == 17
    assert min_collocation(3, HarmonicBasis.dual(0.5, 1.5, 2)) == 4 * 2 * 3 + 1


@pytest.mark.parametrize("variant, phi, N, M", [("hdhb", 3, 4, 9), ("aft", 3, 25, 151),
                                                ("rhb", 3, 25, 101)])
def test_variant_grid_sizes(variant, phi, N, M):
    assert variant_grid(variant, phi, HarmonicBasis.single(1.0, N)).M == M


def test_incommensurate_pair_reports_and_falls_back():
    basis = HarmonicBasis.dual(0.9857, 0.9935, 5)
    with pytest.raises(IncommensurateError):
        min_collocation(3, basis)
    grid = variant_grid("rmhb", 3, basis)
    assert grid.fallback
    assert grid.M == 484
    assert grid.T == pytest.approx(25777.17, abs=0.01)
    G = build_pinv(basis, grid) @ build_E(basis, grid)
    assert np.max(np.abs(G - np.eye(basis.size))) <= 1e-12


def test_dual_lattice_order_and_size():
    basis = HarmonicBasis.dual(0.9857, 0.9935, 5)
    assert basis.lattice[:10] == ((0, 1), (1, 0), (0, 2), (-1, 1), (1, 1), (2, 0), (0, 3),
                                  (-1, 2), (1, 2), (2, -1))
    assert len(basis.lattice) == 30
    assert np.all(basis.frequencies > 0)


@pytest.mark.parametrize("n, L, expect", [(3, 2, -1), (2, 2, 2), (7, 2, -1), (0, 3, 0)])
def test_alias_examples(n, L, expect):
    assert alias_of(n, L) == expect


@given(n=st.integers(-10 ** 6, 10 ** 6), L=st.integers(1, 1000))
def test_alias_is_a_shift_by_multiples_of_2L(n, L):
    a = alias_of(n, L)
    assert -L < a <= L
    assert (n - a) % (2 * L) == 0


def test_hdhb_grid_aliases_cubic_products():
    # cos^3(N t) = 3/4 cos(N t) + 1/4 cos(3N t); on 2N+1 points 3N folds onto N-1
    N = 3
    basis = HarmonicBasis.single(1.0, N)
    grid = variant_grid("hdhb", 3, basis)
    E, Es = build_E(basis, grid), build_pinv(basis, grid)
    c = np.zeros(basis.size)
    c[2 * N - 1] = 1.0
    true = fourier_bruteforce(lambda th: np.cos(N * th) ** 3, N)
    expect = true.copy()
    expect[2 * (N - 1) - 1] += 0.25
    assert np.max(np.abs(Es @ (E @ c) ** 3 - expect)) <= 1e-14
    rhb = variant_grid("rhb", 3, basis)
    E, Es = build_E(basis, rhb), build_pinv(basis, rhb)
    assert np.max(np.abs(Es @ (E @ c) ** 3 - true)) <= 1e-14


@settings(max_examples=40, deadline=None)
@given(N=st.integers(1, 8), phi=st.integers(1, 4), seed=st.integers(0, 1000))
def test_rhb_grid_is_exact_for_products_up_to_phi(N, phi, seed):
    basis = HarmonicBasis.single(1.0, N)
    grid = variant_grid("rhb", phi, basis)
    E, Es = build_E(basis, grid), build_pinv(basis, grid)
    assert np.max(np.abs(Es @ E - np.eye(basis.size))) <= 1e-12
    c = np.random.default_rng(seed).uniform(-1, 1, basis.size)
    got = Es @ (E @ c) ** phi
    true = fourier_bruteforce(lambda th: synthesize(basis, c, th) ** phi, N)
    assert np.max(np.abs(got - true)) <= 1e-11 * max(1.0, np.max(np.abs(true)))


def test_synthesize_derivatives_match_differences():
    basis = HarmonicBasis.dual(1.0, math.sqrt(2), 2)
    c = np.random.default_rng(3).normal(size=basis.size)
    t = np.linspace(0, 3, 9)
    h = 1e-5
    for k in (1, 2, 3):
        up = synthesize(basis, c, t + h, order=k - 1)
        fd = (up - synthesize(basis, c, t - h, order=k - 1)) / (2 * h)
        assert np.allclose(synthesize(basis, c, t, order=k), fd, rtol=1e-7, atol=1e-7)
