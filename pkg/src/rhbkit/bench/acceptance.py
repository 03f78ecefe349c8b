"""Measurements behind the acceptance suite, shared by ``rhbkit bench`` and the tests."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..balance import assemble
from ..expr import parse_system
from ..harmonic import (HarmonicBasis, alias_of, build_A, build_E, build_pinv, uniform_grid,
                        variant_grid)
from ..oracle import (convergence_order, fourier_bruteforce, integrate_reference, measure_period,
                      pendulum_period)
from ..recast import recast
from ..solvers import SolverConfig
from . import corpus
from .cases import builtin_case, run_case, run_monte_carlo, run_scheme_study


@dataclass
class Criterion:
    number: int
    title: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number}. {self.title}: {self.detail}"


# --------------------------------------------------------------------------
# Cubic test system for the equivalence checks

CUBIC_OMEGA = 1.3
CUBIC_SOURCE = f"""\
system cubic {{
    forcing w = {CUBIC_OMEGA};
    var x;
    eq x'' + 0.1 x' + x + x^3 = cos(w*t);
}}
"""


def cubic_bruteforce_residual(X, N, omega=CUBIC_OMEGA):
    """Classical harmonic balance residual of the recast cubic by quadrature.

    ``X`` holds the blocks of ``x`` and ``v = x'``; the right-hand sides are
    written out here rather than taken from the polynomial system.
    """
    K = 64 * 4 * N + 64
    th = 2 * np.pi * np.arange(K) / K
    basis = HarmonicBasis.single(omega, N)

    def series(c):
        out = np.full(K, c[0])
        for n in range(1, N + 1):
            out += c[2 * n - 1] * np.cos(n * th) + c[2 * n] * np.sin(n * th)
        return out

    x, v = series(X[0]), series(X[1])
    f_x = v
    f_v = -0.1 * v - x - x ** 3 + np.cos(th)
    A = build_A(basis)
    r_x = omega * A @ X[0] - fourier_bruteforce(f_x, N)
    r_v = omega * A @ X[1] - fourier_bruteforce(f_v, N)
    return np.concatenate([r_x, r_v])


def hdhb_alias_terms(x):
    """Extra frequency-domain terms of ``x^3`` on the five-point grid (two harmonics)."""
    x0, x1, x2, x3, x4 = x
    return np.array([
        0.75 * (x3 ** 2 - x4 ** 2) * x1 - 1.5 * x2 * x3 * x4,
        0.75 * (x1 ** 2 - x2 ** 2) * x3 + 1.5 * (x3 ** 2 - x4 ** 2) * x0 + 0.25 * x3 ** 3
        - 0.75 * x3 * x4 ** 2 - 1.5 * x1 * x2 * x4,
        -0.75 * (x1 ** 2 - x2 ** 2) * x4 - 0.25 * x4 ** 3 + 0.75 * x3 ** 2 * x4
        - 1.5 * x1 * x2 * x3 - 3 * x0 * x3 * x4,
        0.25 * x1 ** 3 + 0.75 * (x3 ** 2 - x4 ** 2) * x1 - 0.75 * x1 * x2 ** 2
        + 1.5 * x2 * x3 * x4 + 3 * x0 * x1 * x3 - 3 * x0 * x2 * x4,
        0.25 * x2 ** 3 + 0.75 * (x3 ** 2 - x4 ** 2) * x2 - 0.75 * x1 ** 2 * x2
        - 1.5 * x1 * x3 * x4 - 3 * x0 * x2 * x3 - 3 * x0 * x1 * x4,
    ])


def equivalence_gap(orders=range(1, 7), points=50, seed=0):
    """Largest gap between the assembled residual and the quadrature residual."""
    ps = recast(parse_system(CUBIC_SOURCE))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for N in orders:
        problem = assemble(ps, HarmonicBasis.single(CUBIC_OMEGA, N))
        for _ in range(points):
            x = rng.uniform(-1, 1, problem.n_unknowns)
            X = problem.unpack(x).coeffs
            gap = np.max(np.abs(problem.residual(x) - cubic_bruteforce_residual(X, N)))
            worst = max(worst, float(gap))
    return worst


def hdhb_alias_gap(points=50, seed=0):
    """Largest gap between HDHB's cubic coefficients minus the true ones and the alias terms."""
    basis = HarmonicBasis.single(1.0, 2)
    grid = uniform_grid(basis.size)
    E, Es = build_E(basis, grid), build_pinv(basis, grid)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(points):
        x = rng.uniform(-1, 1, 5)
        x0, x1, x2, x3, x4 = x
        true = fourier_bruteforce(
            lambda th: (x0 + x1 * np.cos(th) + x2 * np.sin(th) + x3 * np.cos(2 * th)
                        + x4 * np.sin(2 * th)) ** 3, 2)
        worst = max(worst, float(np.max(np.abs(Es @ (E @ x) ** 3 - true - hdhb_alias_terms(x)))))
    return worst


def alias_mismatches(n_range=range(-50, 51), L_range=range(1, 11)):
    """Pairs where :func:`alias_of` differs from a search over the shifts ``m``."""
    bad = []
    for L in L_range:
        for n in n_range:
            found = [n - 2 * m * L for m in range(-60, 61) if -L < n - 2 * m * L <= L]
            if len(found) != 1 or alias_of(n, L) != found[0]:
                bad.append((n, L))
    return bad


def pseudo_inverse_gap():
    """Largest ``|E* E - I|`` over every grid used by the acceptance cases."""
    configs = []
    for N, phi in [(25, 4), (35, 4), (55, 4)]:
        configs.append((HarmonicBasis.single(1.0, N), phi, "rhb"))
    configs.append((HarmonicBasis.single(1.0, 25), 2, "rhb"))
    for N in range(1, 7):
        configs.append((HarmonicBasis.single(CUBIC_OMEGA, N), 3, "rhb"))
    configs.append((HarmonicBasis.single(1.0, 2), 3, "hdhb"))
    configs.append((HarmonicBasis.single(2.0, 9), 3, "rhb"))
    configs.append((HarmonicBasis.single(2.0, 9), 3, "hdhb"))
    configs.append((HarmonicBasis.dual(0.9857, 0.9935, 5), 3, "rmhb"))
    configs.append((HarmonicBasis.dual(1.0, 2.0, 2), 3, "rmhb"))
    worst = 0.0
    for basis, phi, variant in configs:
        grid = variant_grid(variant, phi, basis)
        G = build_pinv(basis, grid) @ build_E(basis, grid)
        worst = max(worst, float(np.max(np.abs(G - np.eye(basis.size)))))
    return worst, len(configs)


def rk4_slope():
    lin = parse_system("system lin { var x; eq x'' + x = 0; init x(0) = 1; }")
    horizon = 100.0
    steps = [1e-2, 5e-3, 2e-3, 1e-3]
    run = lambda h: integrate_reference(lin, horizon=horizon, n_steps=int(round(horizon / h))).get("x")[-1]  # noqa: E731
    slope, _ = convergence_order(run, steps, math.cos(horizon))
    return slope


def pendulum_period_error(theta0=1.5):
    T = pendulum_period(theta0)
    ode = corpus.load_system("pendulum")
    traj = integrate_reference(ode, {"theta": theta0, ("theta", 1): 0.0}, horizon=2.2 * T,
                               n_steps=int(2.2 * 2 ** 16))
    measured = measure_period(traj.t, traj.get("theta", 1), direction=-1)
    return abs(measured / T - 1.0)


def newton_vs_lm():
    """Newton and L-M on pendulum scheme 3 from the published start."""
    spec = builtin_case("pendulum")
    lm = run_case(spec)
    nt = run_case(replace(spec, solver=SolverConfig(method="newton")))
    return lm, nt


# --------------------------------------------------------------------------

def run_all(mc_trials=1000, seed=0, progress=None):
    """Evaluate every acceptance criterion; ``progress(line)`` is called per criterion."""
    out = []

    def emit(c):
        out.append(c)
        if progress is not None:
            progress(c.line())

    # 1
    amps, walls, ok = {}, {}, True
    for N, limit in [(25, 1e-5), (35, 1e-7), (55, 1e-10)]:
        rep = run_case(builtin_case("relativistic", order=N))
        amps[N] = rep.errors.get("amplitude", math.inf)
        walls[N] = rep.solve_report.wall_time if rep.solve_report is not None else math.inf
        ok &= rep.passed and amps[N] <= limit and walls[N] <= 10.0
    emit(Criterion(1, "relativistic amplitude error vs N", ok,
                   ", ".join(f"N={N}: {amps[N]:.2e} ({walls[N]:.2f}s)" for N in amps),
                   {"amplitude": amps, "wall": walls}))

    # 2
    rep = run_case(builtin_case("pendulum"))
    M = rep.grid.get("M")
    mean = rep.errors.get("mean", math.inf)
    wall = rep.solve_report.wall_time if rep.solve_report is not None else math.inf
    emit(Criterion(2, "pendulum M and mean error", M == 76 and mean <= 1e-10 and wall <= 5.0,
                   f"M={M}, mean={mean:.2e}, solve {wall:.2f}s", {"M": M, "mean": mean, "wall": wall}))

    # 3
    gap = equivalence_gap()
    agap = hdhb_alias_gap()
    emit(Criterion(3, "equivalence with quadrature HB; HDHB alias terms", gap <= 1e-10 and agap <= 1e-12,
                   f"RHB gap {gap:.1e}, alias gap {agap:.1e}", {"gap": gap, "alias_gap": agap}))

    # 4
    bad = alias_mismatches()
    emit(Criterion(4, "mixing rule", not bad, f"{len(bad)} mismatches over n in [-50, 50], L in [1, 10]",
                   {"mismatches": bad}))

    # 5
    mc = run_monte_carlo(trials=mc_trials, seed=seed)
    f_rhb, f_hdhb = mc.non_physical_fraction("rhb"), mc.non_physical_fraction("hdhb")
    conv_rhb = sum(mc.counts["rhb"][b] for b in ("upper", "lower", "unstable", "non_physical"))
    emit(Criterion(5, "Monte-Carlo non-physical fractions", f_rhb == 0 and f_hdhb > 0 and conv_rhb > 0,
                   f"RHB {100 * f_rhb:.2f}% of {conv_rhb} converged, HDHB {100 * f_hdhb:.2f}%",
                   {"counts": mc.counts}))

    # 6
    study = run_scheme_study("pendulum")
    e1, e2, e3 = (study.mean_error(k) for k in (1, 2, 3))
    emit(Criterion(6, "pendulum scheme ordering", e1 >= 1e2 * e3 and e3 <= e2,
                   f"scheme1 {e1:.2e}, scheme2 {e2:.2e}, scheme3 {e3:.2e}", {"means": (e1, e2, e3)}))

    # 7
    rep = run_case(builtin_case("asym_pendulum"))
    byv = rep.errors.get("by_variable", {})
    ax = byv.get("x", {}).get("amplitude", math.inf)
    ay = byv.get("y", {}).get("amplitude", math.inf)
    wall = rep.solve_report.wall_time if rep.solve_report is not None else math.inf
    lm, nt = newton_vs_lm()
    nt_singular = nt.solver.get("status") == "singular"
    nt_worse = nt.errors.get("mean", math.inf) >= 1e4 * lm.errors.get("mean", math.inf)
    ok = ax <= 2e-2 and ay <= 1e-5 and wall <= 60 and lm.passed and (nt_singular or nt_worse)
    emit(Criterion(7, "RMHB asymmetric pendulum; Newton vs L-M", ok,
                   f"x amp {ax:.2e}, y amp {ay:.2e}, solve {wall:.2f}s; Newton {nt.solver.get('status')}, "
                   f"L-M mean {lm.errors.get('mean', math.inf):.1e}",
                   {"x": ax, "y": ay, "wall": wall, "newton_status": nt.solver.get("status"),
                    "newton_mean": nt.errors.get("mean", math.inf),
                    "lm_mean": lm.errors.get("mean", math.inf), "lm_passed": lm.passed}))

    # 8
    slope = rk4_slope()
    perr = pendulum_period_error()
    pgap, nconf = pseudo_inverse_gap()
    emit(Criterion(8, "oracle self-checks", abs(slope - 4.0) <= 0.1 and perr <= 1e-8 and pgap <= 1e-12,
                   f"RK4 slope {slope:.3f}, period rel err {perr:.1e}, |E*E-I| {pgap:.1e} over {nconf} grids",
                   {"slope": slope, "period": perr, "pinv": pgap}))
    return out
