import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rhbkit import BalanceScheme, HarmonicBasis, assemble, parse_system, recast
from rhbkit.bench import corpus
from rhbkit.bench.acceptance import (CUBIC_OMEGA, CUBIC_SOURCE, cubic_bruteforce_residual,
                                     hdhb_alias_terms)
from rhbkit.bench.cases import constraint_schemes
from rhbkit.harmonic import build_E, build_pinv, uniform_grid
from rhbkit.oracle import fourier_bruteforce

LINEAR = "system lin { var x; eq x'' + x = 0; }"


def fd_jacobian(problem, x, h=1e-7):
    J = np.empty((problem.n_equations, problem.n_unknowns))
    for j in range(problem.n_unknowns):
        e = np.zeros_like(x)
        e[j] = h * max(1.0, abs(x[j]))
        J[:, j] = (problem.residual(x + e) - problem.residual(x - e)) / (2 * e[j])
    return J


def test_linear_oscillator_exact_solution_has_zero_residual():
    ps = recast(parse_system(LINEAR))
    problem = assemble(ps, HarmonicBasis.single(1.0, 1))
    x = problem.guess({("x", 1, "cos"): 1.0, ("x__d1", 1, "sin"): -1.0})
    assert np.max(np.abs(problem.residual(x))) <= 1e-14


def test_linear_oscillator_in_a_dual_basis():
    ps = recast(parse_system(LINEAR))
    basis = HarmonicBasis.dual(1.0, 2.0, 2)
    problem = assemble(ps, basis, variant="rmhb")
    pos = basis.lattice.index((1, 0)) + 1
    x = problem.guess({("x", pos, "cos"): 1.0, ("x__d1", pos, "sin"): -1.0})
    assert np.max(np.abs(problem.residual(x))) <= 1e-14
    x = problem.guess({("x", pos, "cos"): 1.0, ("x__d1", pos, "sin"): 1.0})
    assert np.max(np.abs(problem.residual(x))) > 0.1


def test_counts_with_unknown_frequency():
    ps = recast(corpus.load_system("pendulum"))
    basis = HarmonicBasis.single(1.0, 25)
    scheme = constraint_schemes(ps)[3][1]
    problem = assemble(ps, basis, scheme)
    assert problem.omega_unknown
    assert problem.n_unknowns == 4 * 51 + 1
    assert problem.n_equations == scheme.n_rows(basis)
    assert problem.square
    assert problem.grid.M == 76


def test_forced_system_ignores_point_constraints_by_default():
    ps = recast(corpus.load_system("rayleigh_plesset"))
    problem = assemble(ps, HarmonicBasis.single(1.0, 4))
    assert problem.square and not problem.omega_unknown


@pytest.mark.parametrize("name, N, scheme", [("pendulum", 5, 3), ("relativistic", 5, 3),
                                             ("duffing", 4, None), ("vdp", 4, None),
                                             ("rayleigh_plesset", 4, None),
                                             ("asym_pendulum", 2, None)])
def test_jacobian_matches_finite_differences(name, N, scheme):
    ps = recast(corpus.load_system(name))
    if name == "asym_pendulum":
        basis = HarmonicBasis.dual(1.0, 1.5, N)
    else:
        basis = HarmonicBasis.single(1.1, N)
    sch = constraint_schemes(ps)[scheme][1] if scheme else None
    problem = assemble(ps, basis, sch)
    rng = np.random.default_rng(2)
    x = rng.uniform(-0.3, 0.3, problem.n_unknowns)
    for v, val in ps.initial_values:
        x[problem.index(v)] += val
    if problem.omega_unknown:
        x[-1] = 0.9
    J = problem.jacobian(x)
    assert J.shape == (problem.n_equations, problem.n_unknowns)
    Jfd = fd_jacobian(problem, x)
    assert np.max(np.abs(J - Jfd)) <= 1e-6 * max(1.0, np.max(np.abs(J)))


@settings(max_examples=30, deadline=None)
@given(N=st.integers(1, 4), seed=st.integers(0, 10 ** 6))
def test_rhb_residual_equals_quadrature_harmonic_balance(N, seed):
    ps = recast(parse_system(CUBIC_SOURCE))
    problem = assemble(ps, HarmonicBasis.single(CUBIC_OMEGA, N))
    x = np.random.default_rng(seed).uniform(-1, 1, problem.n_unknowns)
    X = problem.unpack(x).coeffs
    assert np.max(np.abs(problem.residual(x) - cubic_bruteforce_residual(X, N))) <= 1e-12


def test_hdhb_residual_differs_from_quadrature_by_alias_terms():
    # x' = v, v' = -x^3: the v rows hold omega A v + E* x^3, so the gap is +alias
    src = "system c { var x; eq x'' + x^3 = 0; }"
    ps = recast(parse_system(src))
    basis = HarmonicBasis.single(1.0, 2)
    problem = assemble(ps, basis, variant="hdhb")
    assert problem.grid.M == 5
    rng = np.random.default_rng(4)
    for _ in range(20):
        x = rng.uniform(-1, 1, problem.n_unknowns)
        X = problem.unpack(x).coeffs
        quad = fourier_bruteforce(
            lambda th: -(X[0][0] + X[0][1] * np.cos(th) + X[0][2] * np.sin(th)
                         + X[0][3] * np.cos(2 * th) + X[0][4] * np.sin(2 * th)) ** 3, 2)
        from_quadrature = problem.basis.omega * np.array(
            [0, X[1][2], -X[1][1], 2 * X[1][4], -2 * X[1][3]]) - quad
        gap = problem.residual(x)[5:] - from_quadrature
        assert np.max(np.abs(gap - hdhb_alias_terms(X[0]))) <= 1e-12


def test_alias_terms_vanish_on_rhb_grid():
    basis = HarmonicBasis.single(1.0, 2)
    grid = uniform_grid(9)
    E, Es = build_E(basis, grid), build_pinv(basis, grid)
    x = np.random.default_rng(5).uniform(-1, 1, 5)
    true = fourier_bruteforce(lambda th: (x[0] + x[1] * np.cos(th) + x[2] * np.sin(th)
                                          + x[3] * np.cos(2 * th) + x[4] * np.sin(2 * th)) ** 3, 2)
    assert np.max(np.abs(Es @ (E @ x) ** 3 - true)) <= 1e-14


def test_constraint_rows_evaluate_the_series_at_zero():
    ps = recast(parse_system("system s { var x; eq x'' + x = 0; conservative true; "
                             "init x(0) = 0.7; }"))
    scheme = BalanceScheme.full(ps, ps.constraints)
    problem = assemble(ps, HarmonicBasis.single(1.0, 3), scheme)
    x = problem.guess({("x", 1, "cos"): 0.7, ("x__d1", 1, "sin"): -0.7}, omega=1.0)
    r = problem.residual(x)
    assert np.max(np.abs(r)) <= 1e-14
    x[problem.index("x", 0)] = 0.1
    assert problem.residual(x)[-1] == pytest.approx(0.1, abs=1e-15)


def test_scheme_shape_mismatch_is_rejected():
    ps = recast(corpus.load_system("pendulum"))
    with pytest.raises(ValueError):
        assemble(ps, HarmonicBasis.single(1.0, 2), BalanceScheme((0, 0)))


def test_guess_and_unpack_round_trip():
    ps = recast(corpus.load_system("pendulum"))
    problem = assemble(ps, HarmonicBasis.single(1.0, 3), constraint_schemes(ps)[3][1])
    x = problem.guess({("theta", 1, "cos"): 1.5, ("theta__cos", 0, "cos"): 0.3}, omega=0.8)
    fv = problem.unpack(x)
    assert fv.omega == 0.8
    assert fv.coeffs[0, 1] == 1.5 and fv.coeffs[3, 0] == 0.3
    assert np.array_equal(fv.flat, x)
    assert problem.omega_of(x) == 0.8
    assert math.isclose(problem.zeros()[-1], 1.0)
