"""Solvers: Newton, depth-1 Newton-Anderson with optional gamma-safeguarding
and Armijo line search, and a projected Levenberg-Marquardt comparator.

The Newton-Anderson iteration computes the Newton update w_{k+1}, the
extrapolation coefficient gamma minimizing ||w_{k+1} - g (w_{k+1} - w_k)||,
and combines

    x_{k+1} = x_k + w_{k+1} - gamma * (x_k - x_{k-1} + w_{k+1} - w_k).

Safeguarding rescales gamma by lam in (0,1] so |lam*g| / |1 - lam*g| stays
below beta = r ||w_{k+1}|| / ||w_k||, which keeps iterates inside the region
where the Jacobian is invertible when the root is singular.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from .core import IterationRecord, NonlinearProblem, SolveOutcome, SolverConfig
from .linalg import DegenerateSteps, SingularMatrix, lstsq_gamma


class MethodId(str, Enum):
    """The compared methods."""

    newton = "newton"
    n_anderson = "n_anderson"
    gamma_n_anderson = "gamma_n_anderson"
    armijo_n_anderson = "armijo_n_anderson"
    gamma_armijo_n_anderson = "gamma_armijo_n_anderson"
    proj_lm = "proj_lm"

    def __str__(self):
        return self.value


@dataclass
class SafeguardDecision:
    """Outcome of the gamma-safeguard: either take a plain Newton step, or
    scale gamma by ``lam`` (1.0 when no scaling was needed)."""

    lam: float
    took_newton_step: bool
    beta: float


class LineSearchExhausted(Exception):
    """Armijo search ran out of backtracking trials.

    Carries the deepest trial point so a tolerant caller can proceed from it.
    """

    def __init__(self, evals: int, x_last: np.ndarray, f_last: np.ndarray):
        super().__init__(f"no acceptable step after {evals} trials")
        self.evals = evals
        self.x_last = x_last
        self.f_last = f_last


def newton_step(p: NonlinearProblem, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Newton update w solving f'(x) w = -f(x); also returns f(x) for reuse."""
    res = p.residual(x)
    w = p.jacobian(x).solve(-res)
    return w, res


def anderson_combine(x_k, x_km1, w_next, w_prev, gamma: float) -> np.ndarray:
    """Depth-1 Anderson recombination of the two most recent iterates/updates."""
    return x_k + w_next - gamma * (x_k - x_km1 + w_next - w_prev)


def gamma_safeguard(
    gamma: float, w_next_norm: float, w_prev_norm: float, r: float
) -> SafeguardDecision:
    """Decide how to rescale gamma before combining.

    Case law: gamma == 0 or gamma >= 1 means take a plain Newton step.
    Otherwise, when |gamma| / |1-gamma| exceeds beta = r*w_next_norm/w_prev_norm,
    lam is chosen so that |lam*gamma| / |1 - lam*gamma| == beta:
    lam = beta/(gamma(1+beta)) for gamma > 0, beta/(gamma(beta-1)) for gamma < 0.
    """
    beta = r * w_next_norm / w_prev_norm
    if gamma == 0.0 or gamma >= 1.0:
        return SafeguardDecision(lam=1.0, took_newton_step=True, beta=beta)
    lam = 1.0
    if abs(gamma) / abs(1.0 - gamma) > beta:
        if gamma > 0.0:
            cand = beta / (gamma * (1.0 + beta))
            if cand < 1.0:
                lam = cand
        else:
            cand = beta / (gamma * (beta - 1.0))
            if 0.0 <= cand < 1.0:
                lam = cand
    return SafeguardDecision(lam=lam, took_newton_step=False, beta=beta)


def _merit_slope(fx: np.ndarray, jac, d: np.ndarray) -> float:
    # directional derivative of g(x) = ||f(x)||^2 along d
    return 2.0 * float(fx @ jac.matvec(d))


def _armijo(p, x, d, fx, jac, cfg: SolverConfig, step0: float, j_max: int):
    """Backtracking on g(x) = ||f||^2; returns (x_new, f_new, evals).

    Raises LineSearchExhausted when no trial step in {step0 * shrink^j,
    j = 0..j_max} satisfies the sufficient-decrease condition.
    """
    g0 = float(fx @ fx)
    slope = _merit_slope(fx, jac, d)
    evals = 0
    s = step0
    trial, f_trial = x, fx
    for _ in range(j_max + 1):
        trial = x + s * d
        f_trial = p.residual(trial)
        evals += 1
        if float(f_trial @ f_trial) <= g0 + cfg.ls_damping * s * slope:
            return trial, f_trial, evals
        s *= cfg.ls_shrink
    raise LineSearchExhausted(evals, trial, f_trial)


def armijo_search(
    p: NonlinearProblem,
    x: np.ndarray,
    d: np.ndarray,
    cfg: SolverConfig,
    step0: float,
    j_max: int = 30,
) -> tuple[np.ndarray, int]:
    """Armijo backtracking along d from x.

    Finds the smallest j with g(x + s d) <= g(x) + damping * s * g'(x)^T d,
    s = step0 * shrink^j.  Returns the accepted point and the number of
    merit-function evaluations spent on trials (the baseline g(x) is assumed
    already known by the caller and is not counted).
    """
    fx = p.residual(x)
    jac = p.jacobian(x)
    x_new, _, evals = _armijo(p, x, d, fx, jac, cfg, step0, j_max)
    return x_new, evals


def _outcome(converged, trace, final_res, x, history, t0):
    return SolveOutcome(
        converged=converged,
        iterations=len(trace),
        final_res=final_res,
        x=x,
        trace=trace,
        iterate_history=history,
        wall_time=time.perf_counter() - t0,
    )


def newton_solve(
    p: NonlinearProblem, cfg: SolverConfig, keep_history: bool = False
) -> SolveOutcome:
    """Plain Newton iteration x_{k+1} = x_k + w_{k+1} until ||f|| < tol.

    A singular Jacobian or the iteration cap yields a normal non-converged
    outcome rather than an error.
    """
    t0 = time.perf_counter()
    x = p.start.copy()
    fx = p.residual(x)
    res = float(np.linalg.norm(fx))
    trace: list[IterationRecord] = []
    history = [x.copy()] if keep_history else None
    if res < cfg.tol:
        return _outcome(True, trace, res, x, history, t0)
    for k in range(cfg.max_iters):
        try:
            w = p.jacobian(x).solve(-fx)
        except SingularMatrix:
            break
        trace.append(
            IterationRecord(
                k=k, res_norm=res, step_norm=float(np.linalg.norm(w)),
                gamma_raw=0.0, lam=1.0, gamma_used=0.0, theta=1.0,
                step_kind="newton", ls_evals=0,
            )
        )
        x = x + w
        fx = p.residual(x)
        res = float(np.linalg.norm(fx))
        if history is not None:
            history.append(x.copy())
        if res < cfg.tol:
            return _outcome(True, trace, res, x, history, t0)
    return _outcome(False, trace, res, x, history, t0)


def newton_anderson_solve(
    p: NonlinearProblem,
    cfg: SolverConfig,
    safeguard: bool = False,
    linesearch: bool = False,
    keep_history: bool = False,
) -> SolveOutcome:
    """Depth-1 Newton-Anderson; the first step is always plain Newton.

    With ``safeguard`` the extrapolation coefficient is rescaled per
    gamma_safeguard; degenerate steps (w_{k+1} == w_k) silently fall back to
    Newton.  With ``linesearch`` a step at k >= 1 that fails to reduce the
    residual by the trigger factor is replaced by an Armijo search along the
    combined direction; a search that exhausts its trials proceeds from its
    deepest trial point (the search direction requires the previous iterate
    pair, so the mandatory first Newton step is never searched).
    """
    t0 = time.perf_counter()
    x = p.start.copy()
    fx = p.residual(x)
    res = float(np.linalg.norm(fx))
    trace: list[IterationRecord] = []
    history = [x.copy()] if keep_history else None
    if res < cfg.tol:
        return _outcome(True, trace, res, x, history, t0)

    x_prev: np.ndarray | None = None
    w_prev: np.ndarray | None = None
    for k in range(cfg.max_iters):
        try:
            jac = p.jacobian(x)
            w = jac.solve(-fx)
        except SingularMatrix:
            break
        w_norm = float(np.linalg.norm(w))

        gamma_raw, lam, gamma_used, theta, kind = 0.0, 1.0, 0.0, 1.0, "newton"
        if k > 0:
            try:
                gamma_raw = lstsq_gamma(w, w_prev)
            except DegenerateSteps:
                gamma_raw = 0.0  # stagnated direction: plain Newton step
            else:
                if safeguard:
                    dec = gamma_safeguard(
                        gamma_raw, w_norm, float(np.linalg.norm(w_prev)), cfg.r
                    )
                    if not dec.took_newton_step:
                        lam = dec.lam
                        gamma_used = lam * gamma_raw
                        kind = "anderson"
                else:
                    gamma_used = gamma_raw
                    kind = "anderson"

        if kind == "anderson":
            x_new = anderson_combine(x, x_prev, w, w_prev, gamma_used)
            theta = float(np.linalg.norm(w - gamma_used * (w - w_prev))) / w_norm
            d = w - gamma_used * (x - x_prev + w - w_prev)
        else:
            x_new = x + w
            d = w

        f_new = p.residual(x_new)
        res_new = float(np.linalg.norm(f_new))
        ls_evals = 0
        # the search direction needs the (x_{k-1}, w_k) history, so the
        # mandatory first Newton step is never line-searched
        if linesearch and k > 0 and res_new > cfg.ls_trigger * res:
            try:
                x_new, f_new, ls_evals = _armijo(
                    p, x, d, fx, jac, cfg, cfg.ls_step0, j_max=30
                )
            except LineSearchExhausted as exc:
                # tolerant harness behavior: proceed from the deepest trial
                x_new, f_new, ls_evals = exc.x_last, exc.f_last, exc.evals
            res_new = float(np.linalg.norm(f_new))
            if kind == "anderson":
                kind = "anderson_linesearch"

        trace.append(
            IterationRecord(
                k=k, res_norm=res, step_norm=w_norm,
                gamma_raw=gamma_raw, lam=lam, gamma_used=gamma_used, theta=theta,
                step_kind=kind, ls_evals=ls_evals,
            )
        )
        x_prev, w_prev = x, w
        x, fx, res = x_new, f_new, res_new
        if history is not None:
            history.append(x.copy())
        if res < cfg.tol:
            return _outcome(True, trace, res, x, history, t0)
    return _outcome(False, trace, res, x, history, t0)


MU_FLOOR = 1e-16  # keeps the regularized normal equations positive definite
# far from the root the step must stay near Gauss-Newton or large residuals
# over-damp it into stagnation; full ||f||^2 damping returns via the retry
# ladder when conditioning requires it
MU_SCALE = 1e-8


def projected_lm_solve(
    p: NonlinearProblem,
    cfg: SolverConfig,
    keep_history: bool = False,
    mu_scale: float = MU_SCALE,
) -> SolveOutcome:
    """Projected Levenberg-Marquardt with line-search and projected-gradient
    fallbacks, for problems with (optional) box constraints.

    Each iteration solves (J^T J + mu I) d = -J^T f with mu proportional to
    ||f||^2 and projects the candidate onto the box.  When the regularized
    normal equations are still numerically singular the solve retries with
    full ||f||^2 damping.  The candidate is accepted as an LM step when it
    reduces the merit g = ||f||^2 by the factor trigger^2; otherwise an
    Armijo search runs along the projected direction, and if that direction
    is not a descent direction a projected gradient step is taken instead.
    LM backtracking uses the classical halving schedule.
    """
    t0 = time.perf_counter()
    if p.bounds is not None:
        lo, hi = p.bounds
    else:
        lo, hi = -np.inf, np.inf

    def project(v):
        return np.clip(v, lo, hi)

    x = project(p.start.copy())
    fx = p.residual(x)
    res = float(np.linalg.norm(fx))
    trace: list[IterationRecord] = []
    history = [x.copy()] if keep_history else None
    if res < cfg.tol:
        return _outcome(True, trace, res, x, history, t0)

    for k in range(cfg.max_iters):
        jac = p.jacobian(x).to_dense()
        grad = 2.0 * (jac.T @ fx)
        normal = jac.T @ jac
        rhs = -(jac.T @ fx)
        # the subproblem matrix is positive definite for mu > 0, so factor by
        # Cholesky and bump the damping if conditioning defeats it numerically
        d = None
        for mu in (max(mu_scale * res * res, MU_FLOOR), res * res, 1.0):
            try:
                c, low = scipy.linalg.cho_factor(
                    normal + mu * np.eye(p.dim), check_finite=False
                )
                d = scipy.linalg.cho_solve((c, low), rhs, check_finite=False)
                break
            except np.linalg.LinAlgError:
                continue

        ls_evals = 0
        x_new = f_new = None
        if d is not None:
            cand = project(x + d)
            f_cand = p.residual(cand)
            if float(np.linalg.norm(f_cand)) <= cfg.ls_trigger * res:
                kind = "lm"
                x_new, f_new = cand, f_cand
            else:
                step = cand - x  # feasible direction: the box is convex
                slope = float(grad @ step)
                if slope < 0.0:
                    kind = "lm_linesearch"
                    x_new, f_new, ls_evals = _lm_backtrack(
                        p, x, step, slope, res * res, cfg.ls_damping
                    )
                else:
                    kind = "projected_gradient"
        else:
            kind = "projected_gradient"

        if x_new is None:
            x_new, f_new, ls_evals = _projected_gradient_step(
                p, x, grad, project, res * res, cfg.ls_damping
            )

        trace.append(
            IterationRecord(
                k=k, res_norm=res, step_norm=float(np.linalg.norm(x_new - x)),
                gamma_raw=0.0, lam=1.0, gamma_used=0.0, theta=1.0,
                step_kind=kind, ls_evals=ls_evals,
            )
        )
        x, fx = x_new, f_new
        res = float(np.linalg.norm(fx))
        if history is not None:
            history.append(x.copy())
        if res < cfg.tol:
            return _outcome(True, trace, res, x, history, t0)
    return _outcome(False, trace, res, x, history, t0)


def _lm_backtrack(p, x, step, slope, g0, damping, j_max=30):
    """Halving backtracking along a feasible descent direction.

    Keeps the best trial seen if no trial passes the sufficient-decrease test.
    """
    s = 0.5
    evals = 0
    best = None
    for _ in range(j_max):
        trial = x + s * step
        f_trial = p.residual(trial)
        evals += 1
        g_trial = float(f_trial @ f_trial)
        if g_trial <= g0 + damping * s * slope:
            return trial, f_trial, evals
        if best is None or g_trial < best[2]:
            best = (trial, f_trial, g_trial)
        s *= 0.5
    return best[0], best[1], evals


def _projected_gradient_step(p, x, grad, project, g0, damping, j_max=60):
    """Backtracked step along the projected steepest-descent arc."""
    t = 1.0
    evals = 0
    best = None
    for _ in range(j_max):
        trial = project(x - t * grad)
        f_trial = p.residual(trial)
        evals += 1
        g_trial = float(f_trial @ f_trial)
        if g_trial <= g0 + damping * float(grad @ (trial - x)):
            return trial, f_trial, evals
        if best is None or g_trial < best[2]:
            best = (trial, f_trial, g_trial)
        t *= 0.5
    return best[0], best[1], evals


def solve(
    p: NonlinearProblem,
    method: MethodId,
    cfg: SolverConfig | None = None,
    keep_history: bool = False,
) -> SolveOutcome:
    """Dispatch a solve by method id."""
    cfg = cfg or SolverConfig()
    method = MethodId(method)
    if method is MethodId.newton:
        return newton_solve(p, cfg, keep_history)
    if method is MethodId.proj_lm:
        return projected_lm_solve(p, cfg, keep_history)
    safeguard = method in (MethodId.gamma_n_anderson, MethodId.gamma_armijo_n_anderson)
    linesearch = method in (MethodId.armijo_n_anderson, MethodId.gamma_armijo_n_anderson)
    return newton_anderson_solve(p, cfg, safeguard, linesearch, keep_history)
