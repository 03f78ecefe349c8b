import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rhbkit import parse_system, recast
from rhbkit.bench import corpus
from rhbkit.oracle import (OracleError, Trajectory, agm, convergence_order, ellipk,
                           error_metrics, estimate_base_frequencies, fourier_bruteforce,
                           integrate_reference, measure_period, pendulum_period, write_csv)

LINEAR = "system l { var x; eq x'' + x = 0; init x(0) = 1; }"


def test_linear_oscillator_returns_after_one_period():
    traj = integrate_reference(parse_system(LINEAR), horizon=2 * math.pi, step=1e-3)
    assert traj.t[-1] == pytest.approx(2 * math.pi, abs=1e-3)
    # horizon is rounded to whole steps, so compare with cos at the final time
    assert abs(traj.get("x")[-1] - math.cos(traj.t[-1])) <= 1e-10
    assert np.all(np.diff(traj.t) > 0)
    assert np.allclose(np.diff(traj.t), traj.step, rtol=1e-9)


def test_linear_oscillator_order_four():
    sys = parse_system(LINEAR)

    def run(h):
        n = int(round(100.0 / h))
        return integrate_reference(sys, n_steps=n, step=h, store_every=n).final()[("x", 0)]

    slope, _ = convergence_order(run, [1e-2, 5e-3, 2e-3, 1e-3], math.cos(100.0))
    assert slope == pytest.approx(4.0, abs=0.1)


def test_polysystem_and_original_agree():
    ode = corpus.load_system("pendulum")
    ps = recast(ode)
    a = integrate_reference(ode, horizon=3.0, step=1e-3)
    b = integrate_reference(ps, horizon=3.0, step=1e-3)
    assert np.max(np.abs(a.get("theta") - b.get("theta"))) <= 1e-11


def test_pendulum_period_matches_agm():
    traj = integrate_reference(corpus.load_system("pendulum"), horizon=40.0, step=1e-3)
    T = measure_period(traj.t, traj.get("theta"))
    assert T == pytest.approx(pendulum_period(1.5), rel=1e-8)


def test_agm_and_elliptic_examples():
    assert agm(1.0, 1.0) == 1.0
    assert agm(24.0, 6.0) == pytest.approx(13.458171481725615, rel=1e-15)
    assert ellipk(0.0) == pytest.approx(math.pi / 2, rel=1e-15)
    # small angles recover 2 pi
    assert pendulum_period(1e-6) == pytest.approx(2 * math.pi, rel=1e-12)


def test_asym_pendulum_step_halving():
    sys = corpus.load_system("asym_pendulum")
    finals = []
    for n in (8000, 16000, 32000):
        traj = integrate_reference(sys, n_steps=n, step=200.0 / n, store_every=n)
        finals.append(np.array(list(traj.final().values())))
    d1 = np.max(np.abs(finals[0] - finals[1]))
    d2 = np.max(np.abs(finals[1] - finals[2]))
    assert d2 <= 1e-6
    assert d1 / d2 == pytest.approx(16, rel=0.1)


def test_singular_mass_matrix_is_reported():
    sys = parse_system("system s { var x; eq (1 - x) x'' + x = 0; init x(0) = 1; }")
    with pytest.raises(OracleError, match="singular"):
        integrate_reference(sys, horizon=1.0, step=0.1)


def test_overflow_is_reported():
    sys = parse_system("system s { var x; eq x' = x^2; init x(0) = 1; }")
    with pytest.raises(OracleError, match="overflow"):
        integrate_reference(sys, horizon=2.0, step=0.01)


def test_write_csv_columns(tmp_path):
    sys = corpus.load_system("asym_pendulum")
    traj = integrate_reference(sys, horizon=0.5, step=0.1)
    path = tmp_path / "traj.csv"
    write_csv(traj, path)
    rows = list(csv.reader(open(path, newline="")))
    assert rows[0] == ["t", "x", "y"]
    assert len(rows) == 1 + len(traj.t)
    assert float(rows[1][1]) == 0.1 and float(rows[1][2]) == 0.2
    write_csv(traj, path, derivatives=True)
    assert next(csv.reader(open(path, newline=""))) == ["t", "x", "x'", "y", "y'"]


def test_trajectory_lookup_errors():
    traj = Trajectory(np.arange(3.0), np.zeros((1, 3)), (("x", 0),), 1.0)
    with pytest.raises(KeyError):
        traj.get("y")


# --------------------------------------------------------------------------
# Quadrature Fourier coefficients

def test_cube_of_cosine():
    c = fourier_bruteforce(lambda th: np.cos(th) ** 3, 4)
    expect = np.zeros(9)
    expect[1], expect[5] = 0.75, 0.25
    assert np.max(np.abs(c - expect)) <= 1e-12


def test_constant():
    c = fourier_bruteforce(lambda th: 1.0, 3)
    assert c[0] == pytest.approx(1.0, abs=1e-15)
    assert np.max(np.abs(c[1:])) <= 1e-15


def test_too_few_samples_rejected():
    with pytest.raises(ValueError, match="too few"):
        fourier_bruteforce(np.ones(100), 2)


@settings(max_examples=50, deadline=None)
@given(N=st.integers(1, 6), seed=st.integers(0, 10 ** 6))
def test_recovers_a_trig_polynomial(N, seed):
    c = np.random.default_rng(seed).uniform(-1, 1, 2 * N + 1)

    def f(th):
        out = c[0] * np.ones_like(th)
        for n in range(1, N + 1):
            out += c[2 * n - 1] * np.cos(n * th) + c[2 * n] * np.sin(n * th)
        return out

    assert np.max(np.abs(fourier_bruteforce(f, N) - c)) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(j=st.integers(1, 3), k=st.integers(1, 3), N=st.integers(1, 6))
def test_products_match_product_to_sum(j, k, N):
    # cos(j t) sin(k t) = (sin((j+k) t) - sin((j-k) t)) / 2
    c = fourier_bruteforce(lambda th: np.cos(j * th) * np.sin(k * th), N)
    expect = np.zeros(2 * N + 1)
    for m, w in ((j + k, 0.5), (j - k, -0.5)):
        if m != 0 and abs(m) <= N:
            expect[2 * abs(m)] += w * np.sign(m)
    assert np.max(np.abs(c - expect)) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(a=st.integers(0, 4), b=st.integers(0, 4), N=st.integers(1, 6))
def test_power_products_match_binomial_expansion(a, b, N):
    # cos^a sin^b through the complex exponential expansion
    coeffs = {}
    for p in range(a + 1):
        for q in range(b + 1):
            w = math.comb(a, p) * math.comb(b, q) * (-1) ** (b - q) / (2 ** a * (2j) ** b)
            m = (2 * p - a) + (2 * q - b)
            coeffs[m] = coeffs.get(m, 0) + w
    expect = np.zeros(2 * N + 1)
    expect[0] = coeffs.get(0, 0).real
    for n in range(1, N + 1):
        cp, cm = coeffs.get(n, 0), coeffs.get(-n, 0)
        expect[2 * n - 1] = (cp + cm).real
        expect[2 * n] = (1j * (cp - cm)).real
    got = fourier_bruteforce(lambda th: np.cos(th) ** a * np.sin(th) ** b, N)
    assert np.max(np.abs(got - expect)) <= 1e-12


# --------------------------------------------------------------------------
# Error metrics

def test_identical_signals_have_zero_error():
    t = np.linspace(0, 2 * math.pi, 201)
    rep = error_metrics(np.cos, (t, np.cos(t)), window=2 * math.pi)
    assert rep.amplitude == rep.mean == rep.max == 0.0


def test_constant_offset():
    t = np.linspace(0, 2 * math.pi, 201)
    rep = error_metrics(lambda s: np.cos(s) + 1e-3, (t, np.cos(t)), window=2 * math.pi)
    assert rep.mean == pytest.approx(1e-3, rel=1e-9)
    assert rep.max == pytest.approx(1e-3, rel=1e-9)
    assert rep.amplitude == pytest.approx(1e-3, rel=1e-9)


def test_window_restricts_samples_and_short_horizon_fails():
    t = np.linspace(0, 4, 401)
    rep = error_metrics(lambda s: np.where(s > 2.5, 1.0, 0.0), (t, np.zeros_like(t)), window=2.0)
    assert rep.max == 0.0 and rep.t[-1] == pytest.approx(2.0)
    with pytest.raises(OracleError, match="shorter"):
        error_metrics(np.cos, (t, np.cos(t)), window=5.0)


# --------------------------------------------------------------------------
# Base frequencies

def test_single_tone():
    t = np.arange(0, 200, 0.05)
    (w,) = estimate_base_frequencies((t, np.cos(t)), count=1)
    assert w == pytest.approx(1.0, abs=1e-3)


def test_two_close_tones():
    t = np.arange(0, 4000, 0.25)
    ws = estimate_base_frequencies((t, np.cos(0.9857 * t) + np.cos(0.9935 * t)), count=2)
    assert ws[0] == pytest.approx(0.9857, abs=5e-4)
    assert ws[1] == pytest.approx(0.9935, abs=5e-4)


def test_too_few_peaks():
    t = np.arange(0, 200, 0.05)
    with pytest.raises(OracleError, match="peaks"):
        estimate_base_frequencies((t, np.cos(t)), count=2)


def test_asym_pendulum_trajectory_peaks():
    traj = integrate_reference(corpus.load_system("asym_pendulum"), horizon=4000.0, step=0.05,
                               store_every=5)
    ws = estimate_base_frequencies(traj, count=2)
    assert ws[0] == pytest.approx(0.9857, abs=2e-3)
    assert ws[1] == pytest.approx(0.9935, abs=2e-3)
