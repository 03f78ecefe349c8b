"""Newton-Raphson and Levenberg-Marquardt for assembled balance problems."""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

LAMBDA_FLOOR = 1e-12
LAMBDA_CEILING = 1e12


@dataclass(frozen=True)
class SolverConfig:
    method: str = "lm"
    max_iter: int = 200
    tol: float = 1e-12  # residual 2-norm
    step_tol: float = 1e-12  # step infinity norm
    lambda0: float = 1e-3
    factor: float = 10.0
    # Overdetermined problems stop at a least-squares minimum once the
    # relative gradient |J^T F| / (|J| |F|) drops below this; such reports are
    # not converged (their residual exceeds tol) but carry status "stationary".
    gtol: float = 1e-10

    def __post_init__(self):
        if self.method not in ("newton", "lm"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.tol <= 0 or self.step_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.factor <= 1:
            raise ValueError("damping factor must exceed 1")


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual: float
    x: np.ndarray = field(repr=False)
    omega: float | None = None
    wall_time: float = 0.0
    method: str = ""
    status: str = ""
    message: str = ""
    history: list = field(default_factory=list, repr=False)  # residual norm per iteration
    meta: dict = field(default_factory=dict)


def _finish(problem, x, converged, it, res, t0, method, status, message, history):
    return SolveReport(converged, it, res, x, problem.omega_of(x), time.perf_counter() - t0,
                       method, status, message, history,
                       {"variant": problem.variant, "M": problem.grid.M,
                        "fallback": problem.grid.fallback})


def _singular(lu, n):
    d = np.abs(np.diag(lu))
    return d.size == 0 or d.min() <= n * np.finfo(float).eps * d.max()


def solve_newton(problem, x0, cfg=None):
    """Full Newton steps ``x <- x - J^{-1} F``; the problem must be square."""
    cfg = cfg or SolverConfig(method="newton")
    if not problem.square:
        raise ValueError(
            f"Newton needs a square problem, got {problem.n_equations} equations "
            f"for {problem.n_unknowns} unknowns")
    t0 = time.perf_counter()
    x = np.array(x0, dtype=float)
    F = problem.residual(x)
    res = float(np.linalg.norm(F))
    history = [res]
    if res <= cfg.tol:
        return _finish(problem, x, True, 0, res, t0, "newton", "residual", "", history)
    for it in range(1, cfg.max_iter + 1):
        Jm = problem.jacobian(x)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", la.LinAlgWarning)
            lu, piv = la.lu_factor(Jm, check_finite=False)
        if _singular(lu, len(x)):
            return _finish(problem, x, False, it - 1, res, t0, "newton", "singular",
                           "Jacobian is singular", history)
        step = la.lu_solve((lu, piv), F, check_finite=False)
        x = x - step
        F = problem.residual(x)
        res = float(np.linalg.norm(F))
        history.append(res)
        if not np.isfinite(res):
            return _finish(problem, x, False, it, res, t0, "newton", "diverged",
                           "residual is not finite", history)
        if res <= cfg.tol:
            return _finish(problem, x, True, it, res, t0, "newton", "residual", "", history)
    return _finish(problem, x, False, cfg.max_iter, res, t0, "newton", "max_iter",
                   "maximum iterations exceeded", history)


def solve_lm(problem, x0, cfg=None):
    """Levenberg-Marquardt with Marquardt's diagonal scaling.

    Steps solve ``(J^T J + lam diag(J^T J)) dx = J^T F``. A step that does not
    decrease ``|F|`` is rejected and ``lam`` grows tenfold; an accepted step
    shrinks it tenfold. Zero diagonal entries (columns the residual does not
    depend on) are scaled by one so such unknowns stay put.
    """
    cfg = cfg or SolverConfig(method="lm")
    t0 = time.perf_counter()
    x = np.array(x0, dtype=float)
    F = problem.residual(x)
    res = float(np.linalg.norm(F))
    history = [res]
    if res <= cfg.tol:
        return _finish(problem, x, True, 0, res, t0, "lm", "residual", "", history)
    lam = cfg.lambda0
    Jm = problem.jacobian(x)
    for it in range(1, cfg.max_iter + 1):
        JtJ = Jm.T @ Jm
        g = Jm.T @ F
        if problem.n_equations > problem.n_unknowns:
            scale = np.linalg.norm(Jm) * res
            if scale > 0 and np.linalg.norm(g) <= cfg.gtol * scale:
                return _finish(problem, x, False, it - 1, res, t0, "lm", "stationary",
                               "least-squares minimum with nonzero residual", history)
        diag = np.diag(JtJ).copy()
        diag[diag == 0.0] = 1.0
        while True:
            try:
                c, low = la.cho_factor(JtJ + lam * np.diag(diag), check_finite=False)
                step = la.cho_solve((c, low), g, check_finite=False)
                ok = np.all(np.isfinite(step))
            except la.LinAlgError:
                ok = False
            if ok:
                x_new = x - step
                F_new = problem.residual(x_new)
                res_new = float(np.linalg.norm(F_new))
                if np.isfinite(res_new) and res_new < res:
                    break
            lam *= cfg.factor
            if lam > LAMBDA_CEILING:
                status = "stalled"
                return _finish(problem, x, False, it - 1, res, t0, "lm", status,
                               "no decreasing step up to the damping ceiling", history)
        x, F, res = x_new, F_new, res_new
        history.append(res)
        lam = max(lam / cfg.factor, LAMBDA_FLOOR)
        small_step = np.max(np.abs(step)) <= cfg.step_tol * max(1.0, np.max(np.abs(x)))
        if res <= cfg.tol and (small_step or res <= 1e-3 * cfg.tol):
            return _finish(problem, x, True, it, res, t0, "lm", "residual", "", history)
        Jm = problem.jacobian(x)
        if res <= cfg.tol:
            continue
    converged = res <= cfg.tol
    return _finish(problem, x, converged, cfg.max_iter, res, t0, "lm",
                   "residual" if converged else "max_iter",
                   "" if converged else "maximum iterations exceeded", history)


def solve(problem, x0, cfg=None):
    cfg = cfg or SolverConfig()
    return (solve_newton if cfg.method == "newton" else solve_lm)(problem, x0, cfg)


def sweep(make_problem, params, x0, cfg=None, on_point=None):
    """Solve a family of problems along ``params``, warm-starting each point.

    ``make_problem(param)`` returns an :class:`AlgebraicProblem`. After a
    failure the last converged solution is reused as the start.
    """
    reports = []
    start = np.array(x0, dtype=float)
    for param in params:
        problem = make_problem(param)
        rep = solve(problem, start, cfg)
        rep.meta["param"] = param
        reports.append(rep)
        if rep.converged:
            start = rep.x
        if on_point is not None:
            on_point(param, rep, problem)
    return reports
