"""Derivative-free minimization with evaluation and wall-clock budgets.

The default method maintains 2*dim+1 interpolation points and fits the
minimum-Frobenius-norm quadratic through them (Hessian restricted to the
span of outer products of the shifted points).  Steps come from a Steihaug
truncated-CG solve of the trust-region subproblem; the radius follows the
usual actual-vs-predicted reduction rules, with geometry steps that pull
stray points back onto the trust-region sphere.  A Nelder-Mead simplex
fallback lives behind the same interface.

Both methods are deterministic: same x0, config and cost give the same
trace, evaluation for evaluation.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

STOP_TOLERANCE = "tolerance"
STOP_BUDGET_EVALS = "budget_evals"
STOP_BUDGET_TIME = "budget_time"

METHODS = ("quadratic", "nelder-mead")


@dataclass
class OptimizerConfig:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-9
    max_evals: int = 5000
    wall_clock_budget: float | None = None
    initial_trust_radius: float = 1.0
    seed: int = 0
    method: str = "quadratic"

    def validate(self, dim: int) -> None:
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_evals < 2 * dim + 1:
            raise ValueError(f"max_evals must be at least 2*dim+1 = {2 * dim + 1}")
        if self.initial_trust_radius <= 0:
            raise ValueError("initial_trust_radius must be positive")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")


@dataclass
class OptimResult:
    best_params: np.ndarray
    best_cost: float
    evals_used: int
    stop_reason: str
    trace: list[tuple[int, float]] = field(default_factory=list)

    def improvements(self) -> list[tuple[int, float]]:
        """Subsequence of the trace where a new best was found."""
        out, best = [], np.inf
        for i, c in self.trace:
            if c < best:
                best = c
                out.append((i, c))
        return out


class CostEvaluationError(RuntimeError):
    """Cost returned a non-finite value; carries the partial trace."""

    def __init__(self, message: str, trace, evals_used: int):
        super().__init__(message)
        self.trace = trace
        self.evals_used = evals_used


class _Stop(Exception):
    def __init__(self, reason: str):
        self.reason = reason


class _Tracker:
    """Wraps the cost callable: trace, best-so-far, budgets, stall detection."""

    def __init__(self, fun, cfg: OptimizerConfig, dim: int):
        self._fun = fun
        self._cfg = cfg
        self._cycle = 2 * dim + 1
        self._deadline = (time.monotonic() + cfg.wall_clock_budget
                          if cfg.wall_clock_budget else None)
        self.trace: list[tuple[int, float]] = []
        self.evals = 0
        self.best_x: np.ndarray | None = None
        self.best_f = np.inf
        self._cycle_start_best = np.inf
        self._stalled_cycles = 0

    def __call__(self, x: np.ndarray) -> float:
        if self.evals >= self._cfg.max_evals:
            raise _Stop(STOP_BUDGET_EVALS)
        if self._deadline is not None and time.monotonic() > self._deadline:
            raise _Stop(STOP_BUDGET_TIME)
        f = float(self._fun(np.asarray(x, dtype=float)))
        self.trace.append((self.evals, f))
        self.evals += 1
        if not np.isfinite(f):
            raise CostEvaluationError(
                f"cost returned {f!r} at evaluation {self.evals - 1}",
                self.trace, self.evals)
        if f < self.best_f:
            self.best_f = f
            self.best_x = np.array(x, dtype=float)
        self._check_stall()
        return f

    def _check_stall(self) -> None:
        # a "cycle" is 2*dim+1 evaluations, one model's worth of information
        if self.evals % self._cycle != 0:
            return
        gain = self._cycle_start_best - self.best_f
        threshold = max(self._cfg.abs_tol, self._cfg.rel_tol * abs(self.best_f))
        if gain < threshold:
            self._stalled_cycles += 1
        else:
            self._stalled_cycles = 0
        self._cycle_start_best = self.best_f
        if self._stalled_cycles >= 2:
            raise _Stop(STOP_TOLERANCE)


def minimize(fun, x0, cfg: OptimizerConfig | None = None) -> OptimResult:
    """Minimize a scalar cost over parameter vectors, derivative-free.

    Stops on stalled improvement (below max(abs_tol, rel_tol*|best|) across
    trust-region cycles), on the evaluation budget, or on the wall clock.
    Non-finite cost values raise CostEvaluationError with the partial trace.
    """
    x0 = np.asarray(x0, dtype=float)
    cfg = cfg or OptimizerConfig()
    cfg.validate(len(x0))
    tracker = _Tracker(fun, cfg, len(x0))
    try:
        if cfg.method == "quadratic":
            _quadratic_loop(tracker, x0, cfg)
        else:
            _nelder_mead_loop(tracker, x0, cfg)
        reason = STOP_TOLERANCE
    except _Stop as stop:
        reason = stop.reason
    if tracker.best_x is None:
        raise CostEvaluationError("no finite evaluation recorded",
                                  tracker.trace, tracker.evals)
    return OptimResult(best_params=tracker.best_x, best_cost=tracker.best_f,
                       evals_used=tracker.evals, stop_reason=reason,
                       trace=tracker.trace)


def _fit_model(u_pts: np.ndarray, f_vals: np.ndarray):
    """Min-Frobenius-norm quadratic through (u_pts, f_vals).

    Returns (g, lam) with model(u) = c + g.u + 1/2 sum_j lam_j (u_j.u)^2;
    the Hessian acts as H v = U^T (lam * (U v)).
    """
    npt, dim = u_pts.shape
    gram = u_pts @ u_pts.T
    a_block = 0.5 * gram * gram
    x_block = np.hstack([np.ones((npt, 1)), u_pts])
    kkt = np.zeros((npt + dim + 1, npt + dim + 1))
    kkt[:npt, :npt] = a_block
    kkt[:npt, npt:] = x_block
    kkt[npt:, :npt] = x_block.T
    rhs = np.concatenate([f_vals, np.zeros(dim + 1)])
    try:
        with warnings.catch_warnings():
            # near convergence the points cluster and the system is expected
            # to look singular; the lstsq fallback covers actual breakdowns
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            sol = scipy.linalg.solve(kkt, rhs, assume_a="sym", check_finite=False)
        if not np.all(np.isfinite(sol)):
            raise scipy.linalg.LinAlgError
    except (scipy.linalg.LinAlgError, ValueError):
        sol = scipy.linalg.lstsq(kkt, rhs, check_finite=False, lapack_driver="gelsd")[0]
    lam = sol[:npt]
    g = sol[npt + 1:]
    return g, lam


def _trs_step(g: np.ndarray, lam: np.ndarray, u_pts: np.ndarray,
              radius: float = 1.0) -> np.ndarray:
    """Steihaug truncated CG for min g.s + 1/2 s.H s, ||s|| <= radius."""

    def hess_v(v):
        return u_pts.T @ (lam * (u_pts @ v))

    def to_boundary(s, p):
        # positive tau with ||s + tau p|| = radius
        pp = p @ p
        sp = s @ p
        ss = s @ s
        disc = max(sp * sp - pp * (ss - radius * radius), 0.0)
        return (-sp + np.sqrt(disc)) / pp

    s = np.zeros_like(g)
    r = -g
    rr = r @ r
    if rr == 0.0:
        return s
    p = r.copy()
    tol = 1e-10 * np.sqrt(rr)
    for _ in range(2 * len(g)):
        hp = hess_v(p)
        php = p @ hp
        if php <= 0:
            return s + to_boundary(s, p) * p
        alpha = rr / php
        s_next = s + alpha * p
        if s_next @ s_next >= radius * radius:
            return s + to_boundary(s, p) * p
        s = s_next
        r = r - alpha * hp
        rr_next = r @ r
        if np.sqrt(rr_next) < tol:
            break
        p = r + (rr_next / rr) * p
        rr = rr_next
    return s


def _quadratic_loop(tracker: _Tracker, x0: np.ndarray, cfg: OptimizerConfig) -> None:
    dim = len(x0)
    npt = 2 * dim + 1
    delta = cfg.initial_trust_radius
    delta_min = max(1e-8 * cfg.initial_trust_radius, 1e-12)

    pts = np.empty((npt, dim))
    vals = np.empty(npt)
    pts[0] = x0
    vals[0] = tracker(x0)
    for i in range(dim):
        step = np.zeros(dim)
        step[i] = delta
        pts[1 + 2 * i] = x0 + step
        vals[1 + 2 * i] = tracker(pts[1 + 2 * i])
        pts[2 + 2 * i] = x0 - step
        vals[2 + 2 * i] = tracker(pts[2 + 2 * i])

    while True:
        kb = int(np.argmin(vals))
        xb, fb = pts[kb], vals[kb]
        u_pts = (pts - xb) / delta
        g, lam = _fit_model(u_pts, vals)
        s = _trs_step(g, lam, u_pts)
        hs = u_pts.T @ (lam * (u_pts @ s))
        predicted = -(g @ s + 0.5 * s @ hs)
        dists = np.linalg.norm(pts - xb, axis=1)
        dists[kb] = 0.0
        far = int(np.argmax(dists))

        if predicted <= 0 or np.linalg.norm(s) < 0.01:
            # model locally stationary: fix geometry if spread out, else refine
            if dists[far] > 2.0 * delta:
                _geometry_step(tracker, pts, vals, kb, far, delta)
                continue
            delta *= 0.5
            if delta < delta_min:
                raise _Stop(STOP_TOLERANCE)
            continue

        x_new = xb + delta * s
        f_new = tracker(x_new)
        ratio = (fb - f_new) / predicted

        center = x_new if f_new < fb else xb
        drop_d = np.linalg.norm(pts - center, axis=1)
        drop_d[kb] = -np.inf  # never drop the incumbent best
        t = int(np.argmax(drop_d))
        pts[t] = x_new
        vals[t] = f_new

        if ratio >= 0.1:
            if ratio > 0.75 and np.linalg.norm(s) > 0.9:
                delta *= 2.0
        elif dists[far] > 2.0 * delta and far != t:
            _geometry_step(tracker, pts, vals, kb, far, delta)
        else:
            delta *= 0.5
            if delta < delta_min:
                raise _Stop(STOP_TOLERANCE)


def _geometry_step(tracker, pts, vals, kb, far, delta) -> None:
    """Replace a stray point by its projection onto the trust-region sphere."""
    direction = pts[far] - pts[kb]
    norm = np.linalg.norm(direction)
    if norm == 0.0:
        return
    candidate = pts[kb] + (delta / norm) * direction
    vals[far] = tracker(candidate)
    pts[far] = candidate


def _nelder_mead_loop(tracker: _Tracker, x0: np.ndarray, cfg: OptimizerConfig) -> None:
    scipy.optimize.minimize(
        tracker, x0, method="Nelder-Mead",
        options={"maxfev": 10 * cfg.max_evals, "xatol": 1e-12, "fatol": cfg.abs_tol,
                 "initial_simplex": _initial_simplex(x0, cfg.initial_trust_radius)})


def _initial_simplex(x0: np.ndarray, radius: float) -> np.ndarray:
    simplex = np.tile(x0, (len(x0) + 1, 1))
    for i in range(len(x0)):
        simplex[i + 1, i] += radius
    return simplex
