"""Independent ground truth: time integration, quadrature Fourier coefficients,
error metrics and spectral frequency estimation.

Nothing here is used by the harmonic balance solver path; tests and the
benchmark compare against it.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .expr import Add, Const, Deriv, Func, Harmonic, Mul, Pow, RPow, Var
from .poly import PolySystem


class OracleError(RuntimeError):
    pass


@dataclass
class Trajectory:
    t: np.ndarray
    values: np.ndarray  # (n_states, n_t)
    labels: tuple  # ((name, derivative order), ...)
    step: float
    method: str = "rk4"

    def get(self, name, order=0):
        try:
            return self.values[self.labels.index((name, order))]
        except ValueError:
            raise KeyError(f"trajectory has no state {name!r} of order {order}") from None

    @property
    def variables(self):
        return tuple(n for n, d in self.labels if d == 0)

    def final(self):
        return {lab: float(self.values[i, -1]) for i, lab in enumerate(self.labels)}


@dataclass
class ErrorReport:
    amplitude: float
    mean: float
    max: float
    t: np.ndarray = field(repr=False)
    curve: np.ndarray = field(repr=False)  # approx - reference


# --------------------------------------------------------------------------
# Code generation for fast right-hand sides

_MATH = {"exp": "math.exp", "sin": "math.sin", "cos": "math.cos", "tan": "math.tan",
         "asin": "math.asin", "acos": "math.acos", "atan": "math.atan"}


def _rpow(b, q, p):
    if p % 2 and b < 0:
        return (-1.0) ** q * (-b) ** (q / p)
    return b ** (q / p)


def _expr_code(node, names, omega):
    """Python source for ``node``; ``names[(var, order)]`` gives the slot text."""
    rec = lambda n: _expr_code(n, names, omega)  # noqa: E731
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, Var):
        return names[(node.name, 0)]
    if isinstance(node, Deriv):
        return names[(node.name, node.order)]
    if isinstance(node, Harmonic):
        trig = "math.cos" if node.phase == "cos" else "math.sin"
        return f"({node.amplitude!r}*{trig}({node.multiple * omega!r}*t))"
    if isinstance(node, Add):
        return "(" + " + ".join(rec(c) for c in node.terms) + ")"
    if isinstance(node, Mul):
        return "(" + "*".join(rec(c) for c in node.factors) + ")"
    if isinstance(node, Pow):
        return f"({rec(node.base)}**{node.exponent})"
    if isinstance(node, RPow):
        return f"_rpow({rec(node.base)}, {node.q}, {node.p})"
    if isinstance(node, Func):
        if node.name == "log":
            return f"(math.log({rec(node.arg)})/{math.log(node.log_base)!r})"
        return f"{_MATH[node.name]}({rec(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def _compile(exprs):
    src = "lambda y, a, t: (" + ", ".join(exprs) + ",)"
    return eval(src, {"math": math, "_rpow": _rpow})  # noqa: S307 - generated from a typed tree


class _Implicit:
    """``F(y, a, t) = 0`` with ``a`` the highest derivatives, affine in ``a``."""

    def __init__(self, labels, tops, func):
        self.labels = labels  # state slots (name, order)
        self.tops = tops  # (name, order) of the highest derivatives
        self.func = func

    def accelerations(self, y, t):
        n = len(self.tops)
        zero = [0.0] * n
        try:
            F0 = self.func(y, zero, t)
            if not all(math.isfinite(v) for v in F0):
                raise OverflowError
            # probe with a step of the residual's size so the affine part
            # is not lost to cancellation
            s = max(1.0, max(abs(v) for v in F0))
            cols = []
            for j in range(n):
                e = list(zero)
                e[j] = s
                Fj = self.func(y, e, t)
                cols.append([(Fj[i] - F0[i]) / s for i in range(n)])
        except OverflowError:
            raise OracleError(f"state overflow at t = {t}") from None
        if n == 1:
            m = cols[0][0]
            if not math.isfinite(m):
                raise OracleError(f"state overflow at t = {t}")
            if m == 0.0:
                raise OracleError(f"singular mass matrix at t = {t}")
            return [-F0[0] / m]
        if n == 2:
            m00, m10 = cols[0]
            m01, m11 = cols[1]
            det = m00 * m11 - m01 * m10
            scale = max(abs(m00), abs(m01), abs(m10), abs(m11))
            if not abs(det) > 1e-14 * scale * scale:
                raise OracleError(f"singular mass matrix at t = {t}")
            return [(-F0[0] * m11 + F0[1] * m01) / det, (-F0[1] * m00 + F0[0] * m10) / det]
        Mm = np.array(cols).T
        try:
            return list(np.linalg.solve(Mm, -np.asarray(F0)))
        except np.linalg.LinAlgError:
            raise OracleError(f"singular mass matrix at t = {t}") from None

    def derivative(self, y, t):
        """Time derivative of the state vector."""
        acc = self.accelerations(y, t)
        out = []
        pos = {lab: i for i, lab in enumerate(self.labels)}
        tops = dict(zip(self.tops, acc))
        for name, d in self.labels:
            nxt = (name, d + 1)
            out.append(y[pos[nxt]] if nxt in pos else tops[nxt])
        return out


def _implicit_ode(sys):
    orders = sys.max_orders()
    labels = tuple((v, d) for v in sys.variables for d in range(max(orders[v], 1)))
    tops = tuple((v, max(orders[v], 1)) for v in sys.variables)
    names = {lab: f"y[{i}]" for i, lab in enumerate(labels)}
    names.update({lab: f"a[{j}]" for j, lab in enumerate(tops)})
    if any(orders[v] == 0 for v in sys.variables):
        raise OracleError("every variable must appear differentiated")
    omega = sys.forcing_omega or 0.0
    func = _compile([_expr_code(eq, names, omega) for eq in sys.equations])
    return _Implicit(labels, tops, func)


def _implicit_poly(sys):
    if any(eq.kind != "diff" for eq in sys.equations):
        raise OracleError("algebraic rows cannot be integrated directly; integrate the original system")
    labels = tuple((sys.variables[eq.var], 0) for eq in sys.equations)
    tops = tuple((n, 1) for n, _ in labels)
    names = {lab: f"y[{i}]" for i, lab in enumerate(labels)}
    names.update({lab: f"a[{j}]" for j, lab in enumerate(tops)})
    wf = sys.forcing_omega or 0.0
    exprs = []
    for j, eq in enumerate(sys.equations):
        terms = []
        for m in eq.monomials:
            parts = [repr(m.coeff)]
            for v, d, e in m.factors:
                key = (sys.variables[v], d)
                if key not in names:
                    raise OracleError(f"state {key} is not part of the integrated state")
                parts.append(f"{names[key]}**{e}")
            if m.forcing is not None:
                k, phase = m.forcing
                parts.append(f"math.{phase}({k * wf!r}*t)")
            terms.append("*".join(parts))
        exprs.append(f"a[{j}] - (" + (" + ".join(terms) or "0.0") + ")")
    return _Implicit(labels, tops, _compile(exprs))


def integrate_reference(sys, initial=None, horizon=None, step=None, *, n_steps=None,
                        store_every=1, t0=0.0):
    """Classical fixed-step fourth-order Runge-Kutta.

    Parameters
    ----------
    sys : OdeSystem or PolySystem
        Original system (highest derivatives may be coupled, e.g. through
        ``x y y''`` terms; each stage solves the small linear system for them)
        or a purely differential polynomial system.
    initial : dict, optional
        Keys ``name`` or ``(name, order)``; missing entries default to the
        system's own point constraints (and, for a recast system, the
        companion values at t = 0), then zero.
    horizon, step : float
        Integration length and step; ``horizon / step`` is rounded to an
        integer number of steps (or pass ``n_steps``).
    store_every : int
        Keep every ``store_every``-th sample.
    """
    imp = _implicit_poly(sys) if isinstance(sys, PolySystem) else _implicit_ode(sys)
    init = {(name, 0): value for name, value in getattr(sys, "initial_values", ())}
    for c in sys.constraints:
        init[(c.var, c.order)] = c.value
    for key, value in (initial or {}).items():
        init[key if isinstance(key, tuple) else (key, 0)] = float(value)
    y = [float(init.get(lab, 0.0)) for lab in imp.labels]

    if n_steps is None:
        if horizon is None or step is None:
            raise ValueError("give horizon and step, or n_steps with step")
        n_steps = max(1, int(round(horizon / step)))
    if step is None:
        step = horizon / n_steps
    h = float(step)
    f = imp.derivative
    n = len(y)
    keep = [list(y)]
    t = t0
    for k in range(1, n_steps + 1):
        k1 = f(y, t)
        k2 = f([y[i] + 0.5 * h * k1[i] for i in range(n)], t + 0.5 * h)
        k3 = f([y[i] + 0.5 * h * k2[i] for i in range(n)], t + 0.5 * h)
        k4 = f([y[i] + h * k3[i] for i in range(n)], t + h)
        y = [y[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]) for i in range(n)]
        t = t0 + k * h
        if not all(math.isfinite(v) and abs(v) < 1e150 for v in y):
            raise OracleError(f"state overflow at t = {t}")
        if k % store_every == 0:
            keep.append(list(y))
    times = t0 + h * store_every * np.arange(len(keep))
    return Trajectory(times, np.array(keep).T, imp.labels, h)


def write_csv(traj, path, derivatives=False):
    """Columns ``t`` then the variables in declared order."""
    rows = [i for i, (_, d) in enumerate(traj.labels) if derivatives or d == 0]
    head = ["t"] + [n + "'" * d for n, d in (traj.labels[i] for i in rows)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(head)
        for j, tj in enumerate(traj.t):
            w.writerow([repr(float(tj))] + [repr(float(traj.values[i, j])) for i in rows])


# --------------------------------------------------------------------------
# Fourier coefficients by quadrature

def fourier_bruteforce(samples, N, min_per_harmonic=64):
    """Classical harmonic balance coefficients by periodic trapezoid quadrature.

    ``samples`` is either a callable of the phase ``theta`` or an array of
    values at ``theta_j = 2 pi j / K`` (endpoint excluded). Returns
    ``[r0, a1, b1, ..., aN, bN]``.
    """
    if callable(samples):
        K = min_per_harmonic * max(N, 1) * 2
        theta = 2 * np.pi * np.arange(K) / K
        vals = np.asarray(samples(theta), dtype=float) * np.ones(K)
    else:
        vals = np.asarray(samples, dtype=float)
        K = len(vals)
        theta = 2 * np.pi * np.arange(K) / K
    if K < min_per_harmonic * N:
        raise ValueError(f"{K} samples are too few for {N} harmonics")
    out = np.empty(2 * N + 1)
    out[0] = vals.mean()
    for n in range(1, N + 1):
        out[2 * n - 1] = 2.0 * np.mean(vals * np.cos(n * theta))
        out[2 * n] = 2.0 * np.mean(vals * np.sin(n * theta))
    return out


# --------------------------------------------------------------------------
# Errors and periods

def error_metrics(approx, reference, window=None):
    """Compare a series against a reference trajectory.

    Parameters
    ----------
    approx : callable
        ``approx(t)`` evaluating the harmonic balance solution.
    reference : (t, values) pair or 1-D signal paired with ``Trajectory.t``
    window : float
        Comparison length (one period for periodic responses).

    Amplitude error is ``| max|approx| - max|ref| |`` over the window; mean and
    max are over ``|approx(t_j) - ref(t_j)|`` at the reference sample times.
    """
    t, ref = reference
    t = np.asarray(t)
    if window is not None:
        if t[-1] - t[0] < window * (1 - 1e-12):
            raise OracleError("reference horizon is shorter than the comparison window")
        mask = t <= t[0] + window * (1 + 1e-12)
        t, ref = t[mask], np.asarray(ref)[mask]
    a = np.asarray(approx(t), dtype=float)
    diff = a - ref
    return ErrorReport(float(abs(np.max(np.abs(a)) - np.max(np.abs(ref)))),
                       float(np.mean(np.abs(diff))), float(np.max(np.abs(diff))), t, diff)


def agm(a, b):
    while abs(a - b) > 4 * np.finfo(float).eps * max(a, b):
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return 0.5 * (a + b)


def ellipk(k):
    """Complete elliptic integral of the first kind with modulus ``k``."""
    return math.pi / (2.0 * agm(1.0, math.sqrt(1.0 - k * k)))


def pendulum_period(theta0):
    return 4.0 * ellipk(math.sin(0.5 * theta0))


def crossing_times(t, y, direction=1):
    """Zero crossings of ``y`` located by a local cubic through four samples."""
    y = np.asarray(y)
    s = np.sign(y)
    idx = np.nonzero((s[:-1] < 0) & (s[1:] >= 0) if direction > 0 else (s[:-1] > 0) & (s[1:] <= 0))[0]
    out = []
    for i in idx:
        lo = min(max(i - 1, 0), len(t) - 4)
        tt, yy = t[lo:lo + 4], y[lo:lo + 4]
        c = np.polyfit(tt - t[i], yy, 3)
        roots = [r.real - 0 for r in np.roots(c) if abs(r.imag) < 1e-12]
        h = t[i + 1] - t[i]
        roots = [r for r in roots if -1e-9 * h <= r <= h * (1 + 1e-9)]
        if roots:
            out.append(t[i] + min(roots, key=lambda r: abs(r - 0.5 * h)))
    return np.array(out)


def measure_period(t, y, direction=1):
    c = crossing_times(t, y, direction)
    if len(c) < 2:
        raise OracleError("signal has fewer than two crossings in the horizon")
    return float(np.mean(np.diff(c)))


def convergence_order(run, steps, exact):
    """Least-squares slope of ``log error`` against ``log step``.

    ``run(step)`` returns the numeric value compared with ``exact``.
    """
    errs = np.array([abs(run(h) - exact) for h in steps])
    slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    return float(slope), errs


# --------------------------------------------------------------------------
# Base frequency estimation

def estimate_base_frequencies(traj, count=2, variables=None, pad=8, floor=0.05):
    """Largest spectral peaks of a sampled response, in rad per time unit.

    Parameters
    ----------
    traj : Trajectory or (t, signal) pair
        Uniformly sampled; the signal may be 2-D (channels by samples).
    count : int
        Number of distinct peaks to return (sorted by frequency).
    variables : names to combine when ``traj`` is a Trajectory (default all
        order-0 states).

    Magnitudes of Hann-windowed, zero-padded spectra are summed over channels
    and each local maximum is refined by a parabola through the three log
    magnitudes around it. Peaks below ``floor`` times the strongest one are
    window leakage (the first Hann sidelobe sits at about 0.027).
    """
    if isinstance(traj, Trajectory):
        names = variables or traj.variables
        t, sig = traj.t, np.array([traj.get(n) for n in names])
    else:
        t, sig = traj
        sig = np.atleast_2d(np.asarray(sig, dtype=float))
    dt = float(t[1] - t[0])
    n = sig.shape[1]
    nfft = int(2 ** math.ceil(math.log2(n * pad)))
    win = np.hanning(n)
    mag = np.zeros(nfft // 2 + 1)
    for row in sig:
        mag += np.abs(np.fft.rfft((row - row.mean()) * win, nfft))
    mag[0] = 0.0
    logm = np.log(mag + 1e-300)
    inner = np.arange(1, len(mag) - 1)
    peaks = inner[(mag[inner] > mag[inner - 1]) & (mag[inner] >= mag[inner + 1])]
    peaks = peaks[np.argsort(mag[peaks])[::-1]]
    if len(peaks):
        peaks = peaks[mag[peaks] >= floor * mag[peaks[0]]]
    # distinct: separated by more than the Hann main-lobe half width
    min_sep = 2.0 * nfft / n
    chosen = []
    for k in peaks:
        if all(abs(k - c) > min_sep for c in chosen):
            chosen.append(k)
        if len(chosen) == count:
            break
    if len(chosen) < count:
        raise OracleError(f"found {len(chosen)} distinct peaks, {count} requested")
    out = []
    for k in chosen:
        a, b, c = logm[k - 1], logm[k], logm[k + 1]
        denom = a - 2 * b + c
        shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
        out.append(2 * math.pi * (k + shift) / (nfft * dt))
    return sorted(out)
