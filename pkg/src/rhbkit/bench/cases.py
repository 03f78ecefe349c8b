"""Benchmark cases: parse, recast, assemble, solve and compare with the oracle."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from ..balance import BalanceScheme, assemble
from ..expr import parse_system
from ..harmonic import HarmonicBasis, synthesize
from ..oracle import error_metrics, integrate_reference
from ..poly import Constraint
from ..recast import RecastError, recast
from ..solvers import SolverConfig, solve
from . import corpus

STAGES = ("parse", "recast", "assemble", "solve", "oracle")


@dataclass(frozen=True)
class CaseSpec:
    """Everything needed to run one benchmark.

    ``thresholds`` holds ``(metric, limit)`` pairs; a metric is ``amplitude``,
    ``mean`` or ``max`` (worst compared variable) or ``metric:var``.
    ``scheme`` is a scheme number understood by :func:`constraint_schemes`
    or None for full balance with the system's own constraints.
    """

    name: str
    source: str
    variant: str = "rhb"
    order: int = 10
    omegas: tuple = ()  # two base frequencies selects the dual basis
    scheme: int | None = None
    solver: SolverConfig = SolverConfig()
    start: tuple = ()  # ((var, harmonic, phase), value) pairs
    omega0: float | None = None
    compare: tuple = ()
    thresholds: tuple = ()
    oracle_steps: int = 2 ** 16

    def __post_init__(self):
        for metric, limit in self.thresholds:
            if not limit > 0:
                raise ValueError(f"threshold for {metric} must be positive")


@dataclass
class BenchReport:
    case: str
    variant: str
    basis: dict
    grid: dict
    solver: dict
    errors: dict
    passed: bool
    failures: list = field(default_factory=list)
    wall_ms: float = 0.0
    stage: str | None = None  # stage that raised, if any
    message: str = ""
    solve_report: object = field(default=None, repr=False)
    problem: object = field(default=None, repr=False)
    extra: dict = field(default_factory=dict)

    def to_dict(self, timing=True):
        out = {"case": self.case, "variant": self.variant, "basis": self.basis,
               "grid": self.grid, "solver": self.solver, "errors": self.errors,
               "pass": self.passed}
        if self.failures:
            out["failures"] = list(self.failures)
        if self.stage is not None:
            out["stage"] = self.stage
            out["message"] = self.message
        if self.extra:
            out.update(self.extra)
        if timing:
            out["wall_ms"] = round(self.wall_ms, 3)
        return out


# --------------------------------------------------------------------------
# Constraint schemes

def _chain_names(ps):
    return {f"{o}__d{k}" for o in ps.originals for k in range(1, 8)}


def constraint_schemes(ps):
    """Numbered point-constraint schemes for a conservative recast system.

    With companion variables that have differential rows (``s = sin theta``):

    1. full balance of every equation plus the displacement constraints;
    2. the constant rows of the companions' equations are dropped and
       replaced by their initial values, displacement constraints kept;
    3. as 2 with the velocity constraints in place of the displacement ones.

    Without such companions the schemes are 1 displacement, 2 velocity and
    3 both.
    """
    chain = _chain_names(ps)
    disp = tuple(c for c in ps.constraints if c.var in ps.originals)
    vel = tuple(c for c in ps.constraints if c.var in chain)
    init = ps.initial
    companions = [v for v in ps.variables
                  if v not in ps.originals and v not in chain
                  and ps.differential_row(v) is not None and v in init]
    if companions:
        comp = tuple(Constraint(v, 0, init[v]) for v in companions)
        return {
            1: ("full+displacement", BalanceScheme.full(ps, disp)),
            2: ("companions+displacement", BalanceScheme.build(ps, companions, disp + comp)),
            3: ("companions+velocity", BalanceScheme.build(ps, companions, vel + comp)),
        }
    return {
        1: ("displacement", BalanceScheme.full(ps, disp)),
        2: ("velocity", BalanceScheme.full(ps, vel)),
        3: ("both", BalanceScheme.full(ps, disp + vel)),
    }


# --------------------------------------------------------------------------
# Oracle comparison

def solution_series(problem, report, var):
    """Callable evaluating ``var`` (name) of a converged solution."""
    X = problem.unpack(report.x).coeffs[problem.sys.index(var)]
    basis = problem.basis
    w = report.omega if basis.mode == "single" else None
    return lambda t, order=0: synthesize(basis, X, t, omega=w, order=order)


def comparison_window(problem, report):
    """One response period, or one slow beat period for dual bases."""
    if problem.basis.mode == "single":
        return 2 * math.pi / report.omega
    return 2 * math.pi / float(np.min(problem.basis.multipliers))


def compare_with_oracle(ode, problem, report, variables=(), steps=2 ** 16):
    """Integrate the original system over one window and measure the errors.

    Conservative and quasi-periodic responses start from the system's own
    point constraints. Forced responses start from the solution's state at
    ``t = 0``.
    """
    variables = tuple(variables) or tuple(ode.variables)
    window = comparison_window(problem, report)
    initial = None
    if ode.forcing is not None:
        orders = ode.max_orders()
        initial = {}
        for v in ode.variables:
            series = solution_series(problem, report, v)
            for d in range(orders[v]):
                initial[(v, d)] = float(series(0.0, d))
    traj = integrate_reference(ode, initial, horizon=window, n_steps=steps)
    out = {}
    for v in variables:
        out[v] = error_metrics(solution_series(problem, report, v), (traj.t, traj.get(v)), window=window)
    return out, traj


def _check(thresholds, errors):
    failures = []
    for metric, limit in thresholds:
        name, _, var = metric.partition(":")
        value = errors["by_variable"][var][name] if var else errors[name]
        if not value <= limit:
            failures.append(f"{metric}={value:.3e}>{limit:.1e}")
    return failures


def run_case(spec):
    """parse -> recast -> assemble -> solve -> oracle compare -> report."""
    t0 = time.perf_counter()
    stage = "parse"
    basis_info, grid_info, solver_info, errors = {}, {}, {}, {}
    rep = problem = None
    try:
        ode = parse_system(spec.source)
        stage = "recast"
        ps = recast(ode)
        stage = "assemble"
        if len(spec.omegas) == 2:
            basis = HarmonicBasis.dual(spec.omegas[0], spec.omegas[1], spec.order)
        else:
            w = spec.omegas[0] if spec.omegas else (ps.forcing_omega or spec.omega0 or 1.0)
            basis = HarmonicBasis.single(w, spec.order)
        scheme = None
        if spec.scheme is not None:
            table = constraint_schemes(ps)
            if spec.scheme not in table:
                raise ValueError(f"scheme {spec.scheme} is not defined for {spec.name}")
            scheme = table[spec.scheme][1]
        problem = assemble(ps, basis, scheme, variant=spec.variant)
        basis_info = {"mode": basis.mode,
                      ("N" if basis.mode == "single" else "p"): basis.order,
                      "omegas": list(basis.omegas)}
        grid_info = {"M": problem.grid.M, "T": problem.grid.T, "fallback": problem.grid.fallback}
        stage = "solve"
        x0 = problem.guess(dict(spec.start), spec.omega0)
        rep = solve(problem, x0, spec.solver)
        if rep.omega is not None and basis.mode == "single":
            basis_info["omegas"] = [rep.omega]
        solver_info = {"method": rep.method, "iters": rep.iterations, "residual": rep.residual,
                       "converged": rep.converged, "status": rep.status}
        # a least-squares grid has no exact root; its minimum is the answer
        accepted = rep.converged or (problem.grid.fallback and rep.status == "stationary")
        if not accepted:
            return BenchReport(spec.name, spec.variant, basis_info, grid_info, solver_info, {},
                               False, [f"solver:{rep.status}"], 1e3 * (time.perf_counter() - t0),
                               solve_report=rep, problem=problem)
        stage = "oracle"
        per_var, _ = compare_with_oracle(ode, problem, rep, spec.compare, spec.oracle_steps)
        errors = {"amplitude": max(e.amplitude for e in per_var.values()),
                  "mean": max(e.mean for e in per_var.values()),
                  "max": max(e.max for e in per_var.values())}
        if len(per_var) > 1:
            errors["by_variable"] = {v: {"amplitude": e.amplitude, "mean": e.mean, "max": e.max}
                                     for v, e in per_var.items()}
        else:
            (v, e), = per_var.items()
            errors["by_variable"] = {v: {"amplitude": e.amplitude, "mean": e.mean, "max": e.max}}
        failures = _check(spec.thresholds, errors)
        if len(per_var) == 1:
            errors.pop("by_variable")
        return BenchReport(spec.name, spec.variant, basis_info, grid_info, solver_info, errors,
                           not failures, failures, 1e3 * (time.perf_counter() - t0),
                           solve_report=rep, problem=problem)
    except Exception as exc:  # any stage failure becomes data
        return BenchReport(spec.name, spec.variant, basis_info, grid_info, solver_info, errors,
                           False, [f"stage:{stage}"], 1e3 * (time.perf_counter() - t0),
                           stage=stage, message=f"{type(exc).__name__}: {exc}",
                           solve_report=rep, problem=problem)


# --------------------------------------------------------------------------
# Builtin cases

RELATIVISTIC_LIMITS = ((25, 1e-5), (35, 1e-7), (55, 1e-10))
ASYM_OMEGAS = (0.9857, 0.9935)


def _relativistic_limit(N):
    limit = RELATIVISTIC_LIMITS[0][1]
    for n, lim in RELATIVISTIC_LIMITS:
        if N >= n:
            limit = lim
    return limit


def duffing_source(forcing=1.0, omega=2.0):
    return (corpus.DUFFING.replace("param F = 1.0;", f"param F = {forcing!r};")
            .replace("forcing w = 2.0;", f"forcing w = {omega!r};"))


def duffing_branches(forcing=1.0, omega=2.0, damping=0.1):
    """Single-harmonic amplitudes of ``x'' + c x' + x + x^3 = F cos(w t)``, ascending.

    Roots of ``((1 - w^2 + 3/4 A^2)^2 + (c w)^2) A^2 = F^2`` in ``A^2``.
    """
    z = np.poly1d([1.0, 0.0])
    poly = ((1 - omega ** 2 + 0.75 * z) ** 2 + (damping * omega) ** 2) * z - forcing ** 2
    roots = [r.real for r in poly.roots if abs(r.imag) < 1e-9 and r.real > 0]
    return sorted(math.sqrt(r) for r in roots)


def duffing_start(amplitude, forcing=1.0, omega=2.0, damping=0.1):
    """Single-harmonic start ``a1 cos + b1 sin`` on the branch of ``amplitude``."""
    k = 1 - omega ** 2 + 0.75 * amplitude ** 2
    c = damping * omega
    a1, b1 = np.linalg.solve([[k, c], [-c, k]], [forcing, 0.0])
    return ((("x", 1, "cos"), float(a1)), (("x", 1, "sin"), float(b1)),
            (("x__d1", 1, "cos"), float(omega * b1)), (("x__d1", 1, "sin"), float(-omega * a1)))


def builtin_case(name, order=None, variant=None, scheme=None, solver=None):
    """Case for a builtin system with optional overrides."""
    src = corpus.source_of(name)
    name = name.removeprefix("builtin:")
    cfg = solver or SolverConfig()
    if name == "relativistic":
        N = order or 55
        return CaseSpec(name, src, variant or "rhb", N, scheme=3 if scheme is None else scheme,
                        solver=cfg, omega0=1.0,
                        start=((("x", 1, "sin"), 1.0), (("x__d1__rt2", 0, "cos"), 0.7)),
                        compare=("x",), thresholds=(("amplitude", _relativistic_limit(N)),))
    if name == "pendulum":
        return CaseSpec(name, src, variant or "rhb", order or 25, scheme=3 if scheme is None else scheme,
                        solver=cfg, omega0=1.0,
                        start=((("theta", 1, "cos"), 1.423), (("theta__sin", 1, "cos"), 1.065),
                               (("theta__cos", 0, "cos"), 1.028)),
                        compare=("theta",), thresholds=(("mean", 1e-10),))
    if name == "asym_pendulum":
        # main tone plus the nearest sideband in each direction, matching the
        # initial displacements
        basis = HarmonicBasis.dual(*ASYM_OMEGAS, order or 5)
        pos = {mn: i + 1 for i, mn in enumerate(basis.lattice)}
        start = ((("x", pos[(1, 0)], "cos"), 0.15), (("x", pos[(2, -1)], "cos"), -0.05),
                 (("y", pos[(0, 1)], "cos"), 0.15), (("y", pos[(-1, 2)], "cos"), 0.05))
        return CaseSpec(name, src, variant or "rmhb", order or 5, omegas=ASYM_OMEGAS, scheme=scheme,
                        solver=cfg, start=start, compare=("x", "y"),
                        thresholds=(("amplitude:x", 2e-2), ("amplitude:y", 1e-5)))
    if name == "duffing":
        upper = duffing_branches()[-1]
        return CaseSpec(name, src, variant or "rhb", order or 9, scheme=scheme, solver=cfg,
                        start=duffing_start(upper), compare=("x",), thresholds=(("mean", 1e-6),),
                        oracle_steps=2 ** 12)
    return generic_case(name, src, order, variant, scheme, cfg)


def generic_case(name, src, order=None, variant=None, scheme=None, solver=None):
    """Case for an arbitrary system.

    The start puts the recast initial values (``R(0)`` and companions such as
    ``1/R``) in the constant terms and a first harmonic on the first
    variable: unit size, or 0.1 around a given constant state.
    """
    ode = parse_system(src)
    first = ode.variables[0]
    try:
        init = recast(ode).initial_values
    except RecastError:
        init = ()  # run_case reports it at the recast stage
    consts = tuple(((v, 0, "cos"), float(val)) for v, val in init)
    start = consts + (((first, 1, "cos"), 0.1 if consts else 1.0),)
    return CaseSpec(name, src, variant or "rhb", order or 10, scheme=scheme,
                    solver=solver or SolverConfig(), omega0=1.0 if ode.conservative else None,
                    start=start, compare=tuple(ode.variables),
                    oracle_steps=2 ** 12)


# --------------------------------------------------------------------------
# Studies

@dataclass
class SchemeStudy:
    case: str
    rows: list  # (scheme number, label, BenchReport), sorted by mean error

    def to_dict(self, timing=True):
        return {"case": self.case,
                "schemes": [dict(scheme=k, label=label, **rep.to_dict(timing)) for k, label, rep in self.rows]}

    def mean_error(self, scheme):
        for k, _, rep in self.rows:
            if k == scheme:
                return rep.errors.get("mean", math.inf)
        raise KeyError(scheme)


def run_scheme_study(name="pendulum", order=None, solver=None):
    """Run a conservative builtin under each constraint scheme."""
    base = builtin_case(name, order=order, solver=solver)
    ps = recast(parse_system(base.source))
    rows = []
    for k, (label, _) in constraint_schemes(ps).items():
        spec = replace(base, name=f"{base.name}/scheme{k}", scheme=k, thresholds=())
        rows.append((k, label, run_case(spec)))
    rows.sort(key=lambda r: r[2].errors.get("mean", math.inf))
    return SchemeStudy(base.name, rows)


BUCKETS = ("upper", "lower", "unstable", "non_physical", "not_converged")


@dataclass
class MonteCarloReport:
    trials: int
    seed: int
    order: int
    forcing: float
    omega: float
    counts: dict  # variant -> {bucket: count}
    amplitudes: dict = field(default_factory=dict, repr=False)  # variant -> list per converged trial

    def percentages(self, variant):
        """Share of each solution bucket among converged trials."""
        c = self.counts[variant]
        conv = sum(c[b] for b in BUCKETS[:4])
        return {b: (100.0 * c[b] / conv if conv else 0.0) for b in BUCKETS[:4]}

    def non_physical_fraction(self, variant):
        c = self.counts[variant]
        conv = sum(c[b] for b in BUCKETS[:4])
        return c["non_physical"] / conv if conv else 0.0

    def to_dict(self, timing=True):
        return {"case": "duffing", "study": "monte_carlo", "trials": self.trials, "seed": self.seed,
                "N": self.order, "forcing": self.forcing, "omega": self.omega,
                "counts": self.counts,
                "percent": {v: self.percentages(v) for v in self.counts}}


def classify_solution(ode, problem, report, branches, rel_tol=1e-6, steps=2 ** 10):
    """Physical-branch label of a converged forced response.

    The solution is compared with a time integration started from its own
    state at ``t = 0`` over one period; mean deviation at most ``rel_tol``
    times the amplitude counts as physical, and the label is the nearest of
    the single-harmonic branch amplitudes.
    """
    per_var, traj = compare_with_oracle(ode, problem, report, ("x",), steps)
    series = solution_series(problem, report, "x")
    amp = float(np.max(np.abs(series(traj.t))))
    if not per_var["x"].mean <= rel_tol * amp:
        return "non_physical", amp
    lower, unstable, upper = branches
    label = min((("lower", lower), ("unstable", unstable), ("upper", upper)),
                key=lambda kv: abs(math.log(amp / kv[1])))[0]
    return label, amp


def monte_carlo_trial(problem, x0, newton_iters=40):
    """Newton from a random start, then Levenberg-Marquardt from the same start."""
    rep = solve(problem, x0, SolverConfig(method="newton", max_iter=newton_iters))
    if not rep.converged:
        rep = solve(problem, x0, SolverConfig(method="lm"))
    return rep


def run_monte_carlo(trials=1000, seed=0, order=9, variants=("rhb", "hdhb"), forcing=1.0,
                    omega=2.0, starts=None, low=-2.0, high=2.0):
    """Random-start study of the forced Duffing section.

    Trial ``i`` draws every unknown uniformly from ``[low, high]`` with the
    generator seeded by ``(seed, i)``, so results do not depend on the order
    in which trials run. ``starts`` replaces the random draws.
    """
    if starts is None and trials < 1:
        raise ValueError("need at least one trial")
    ode = parse_system(duffing_source(forcing, omega))
    ps = recast(ode)
    branches = duffing_branches(forcing, omega)
    if len(branches) != 3:
        raise ValueError(f"forcing {forcing} at omega {omega} does not give three responses")
    basis = HarmonicBasis.single(omega, order)
    counts, amps = {}, {}
    n = len(starts) if starts is not None else trials
    for variant in variants:
        problem = assemble(ps, basis, variant=variant)
        c = dict.fromkeys(BUCKETS, 0)
        a = []
        for i in range(n):
            if starts is not None:
                x0 = np.asarray(starts[i], dtype=float)
            else:
                x0 = np.random.default_rng([seed, i]).uniform(low, high, problem.n_unknowns)
            rep = monte_carlo_trial(problem, x0)
            if not rep.converged:
                c["not_converged"] += 1
                continue
            label, amp = classify_solution(ode, problem, rep, branches)
            c[label] += 1
            a.append(amp)
        counts[variant], amps[variant] = c, a
    return MonteCarloReport(n, seed, order, forcing, omega, counts, amps)


@dataclass
class SweepPoint:
    param: float
    amplitude: float
    converged: bool
    iterations: int
    residual: float
    restarted: bool = False


def run_sweep(name_or_source, params, order=9, variant="rhb", x0_entries=None, solver=None):
    """Warm-started sweep of the forcing frequency of a forced system.

    Each point starts from the last converged solution. When that fails (past
    a fold the branch ends) the point is retried from the initial start and
    from ten times it, which lets the sweep jump to the surviving branch.
    """
    src = corpus.source_of(name_or_source) if "{" not in name_or_source else name_or_source
    ps = recast(parse_system(src))
    if ps.forcing_omega is None:
        raise ValueError("sweeps vary the forcing frequency; the system has none")
    first = ps.originals[0]
    entries = dict(x0_entries or {((first, 1, "cos")): 0.1})
    points = []
    last_good = None
    for w in params:
        problem = assemble(replace(ps, forcing_omega=float(w)), HarmonicBasis.single(w, order),
                           variant=variant)
        colds = [problem.guess({k: scale * v for k, v in entries.items()}) for scale in (1, 10)]
        rep = solve(problem, colds[0] if last_good is None else last_good, solver)
        restarted = False
        for cold in colds[0 if last_good is not None else 1:]:
            if rep.converged:
                break
            rep, restarted = solve(problem, cold, solver), True
        amp = float("nan")
        if rep.converged:
            series = solution_series(problem, rep, first)
            amp = float(np.max(np.abs(series(np.linspace(0, 2 * math.pi / w, 512, endpoint=False)))))
            last_good = rep.x
        points.append(SweepPoint(float(w), amp, rep.converged, rep.iterations, rep.residual,
                                 restarted))
    return points
