"""Runtime diagnostics for problems with a known root and null-space basis.

Everything here works from quantities a solver already has (iterates and
Newton updates); in particular the curvature term entering the pair-type
classification is replaced by the second-derivative-free proxy
P_N(e + w) - (1/2) P_N e, which is accurate to second order in the error.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import IterationRecord, NonlinearProblem, SolveOutcome
from .linalg import DegenerateSteps, SingularMatrix, lstsq_gamma


class MissingGroundTruth(Exception):
    """Known root and/or null basis required but absent from the problem."""


class ZeroStep(Exception):
    """The Newton update vanished; the gain is undefined (already converged)."""


class InsufficientTail(Exception):
    """Too few usable entries to estimate a contraction rate."""


class OutOfRange(Exception):
    """Contraction ratio outside (0,1); no root order can be inferred."""


@dataclass
class ErrorSplit:
    """Error e = x - x* split into null and range components.

    sigma = ||pr|| / ||pn|| measures the angle to the null space; it is the
    infinity sentinel when the null component vanishes.
    """

    e: np.ndarray
    pn: np.ndarray
    pr: np.ndarray
    sigma: float


class PairKind(str, Enum):
    N_pair = "N_pair"
    R_pair = "R_pair"
    NR_pair = "NR_pair"
    RN_pair = "RN_pair"
    undominated = "undominated"


@dataclass
class PairLabel:
    kind: PairKind
    strong: bool


@dataclass
class NuRatio:
    nu: float


def _require_truth(p: NonlinearProblem):
    if p.known_root is None or p.null_basis is None:
        raise MissingGroundTruth(f"{p.name}: known_root and null_basis required")


def split_error(x: np.ndarray, p: NonlinearProblem) -> ErrorSplit:
    """Orthogonal split of x - x* into null and range components."""
    _require_truth(p)
    basis = p.null_basis
    e = np.asarray(x, dtype=float) - p.known_root
    pn = basis @ (basis.T @ e)
    pr = e - pn
    npn = float(np.linalg.norm(pn))
    sigma = float("inf") if npn == 0.0 else float(np.linalg.norm(pr)) / npn
    return ErrorSplit(e=e, pn=pn, pr=pr, sigma=sigma)


def theta_gain(w_next: np.ndarray, w_prev: np.ndarray, gamma_used: float) -> float:
    """Optimization gain ||w_next - gamma*(w_next - w_prev)|| / ||w_next||."""
    w_next = np.asarray(w_next, dtype=float)
    nw = float(np.linalg.norm(w_next))
    if nw == 0.0:
        raise ZeroStep("||w_next|| = 0")
    return float(np.linalg.norm(w_next - gamma_used * (w_next - np.asarray(w_prev)))) / nw


def nu_ratio(gamma_used: float, a: float, b: float) -> NuRatio:
    """min/max balance of the two safeguard products |1-g| a and |g| b."""
    p1 = abs(1.0 - gamma_used) * a
    p2 = abs(gamma_used) * b
    lo, hi = min(p1, p2), max(p1, p2)
    if lo == 0.0:
        return NuRatio(nu=0.0)
    return NuRatio(nu=lo / hi)


def _pn(basis: np.ndarray, v: np.ndarray) -> np.ndarray:
    return basis @ (basis.T @ v)


def classify_pair(
    split_k: ErrorSplit,
    split_km1: ErrorSplit,
    w_next: np.ndarray,
    w_k: np.ndarray,
    p: NonlinearProblem,
    rho_dom: float = 3.0,
) -> PairLabel:
    """Classify the iterate pair by which error-expansion term dominates.

    Per index i, the competing terms are (1/2)||P_N e_i|| and the proxy
    ||P_N(e_i + w_{i+1}) - (1/2) P_N e_i|| for the curvature contribution;
    one side must exceed the other by the factor rho_dom to count as
    dominant.  The strong flag checks whether the corresponding recombined
    sum dominates the remaining expansion terms by the same factor.
    """
    _require_truth(p)
    basis = p.null_basis

    labels = []
    for split, w in ((split_k, w_next), (split_km1, w_k)):
        t_n = 0.5 * float(np.linalg.norm(split.pn))
        t_r = float(np.linalg.norm(_pn(basis, split.e + w) - 0.5 * split.pn))
        if t_n == 0.0 and t_r == 0.0:
            labels.append(None)
        elif t_n >= rho_dom * t_r:
            labels.append("N")
        elif t_r >= rho_dom * t_n:
            labels.append("R")
        else:
            labels.append(None)

    composed = {
        ("N", "N"): PairKind.N_pair,
        ("R", "R"): PairKind.R_pair,
        ("N", "R"): PairKind.NR_pair,
        ("R", "N"): PairKind.RN_pair,
    }.get((labels[0], labels[1]), PairKind.undominated)
    if composed is PairKind.undominated:
        return PairLabel(kind=composed, strong=False)

    try:
        gamma = lstsq_gamma(np.asarray(w_next, float), np.asarray(w_k, float))
    except DegenerateSteps:
        return PairLabel(kind=composed, strong=False)

    t1 = (1.0 - gamma) * 0.5 * split_k.pn
    t2 = gamma * 0.5 * split_km1.pn
    t3 = (1.0 - gamma) * (_pn(basis, split_k.e + w_next) - 0.5 * split_k.pn)
    t4 = gamma * (_pn(basis, split_km1.e + w_k) - 0.5 * split_km1.pn)
    combined = {
        PairKind.N_pair: t1 + t2,
        PairKind.R_pair: t3 + t4,
        PairKind.NR_pair: t1 + t4,
        PairKind.RN_pair: t3 + t2,
    }[composed]
    rest = (t1 + t2 + t3 + t4) - combined
    strong = float(np.linalg.norm(combined)) >= rho_dom * float(np.linalg.norm(rest))
    return PairLabel(kind=composed, strong=strong)


def compatibility_monitor(
    trace: list[IterationRecord],
    splits: list[ErrorSplit],
    C: float = 2.0,
) -> list[bool]:
    """Flag steps where ||P_N e_{k+1}|| <= C * theta_{k+1} * ||w_{k+1}||.

    ``splits`` must hold one entry per iterate (len(trace) + 1 of them).
    """
    flags = []
    for rec in trace:
        lhs = float(np.linalg.norm(splits[rec.k + 1].pn))
        flags.append(lhs <= C * rec.theta * rec.step_norm)
    return flags


def estimate_rate(norms) -> float:
    """Geometric-mean contraction ratio of an ordered tail of norms.

    Leading/trailing non-positive entries are trimmed; at least four usable
    entries are required.  The geometric mean of successive ratios
    telescopes to (last/first)^(1/(m-1)).
    """
    vals = [float(v) for v in norms]
    while vals and not (np.isfinite(vals[0]) and vals[0] > 0.0):
        vals.pop(0)
    while vals and not (np.isfinite(vals[-1]) and vals[-1] > 0.0):
        vals.pop()
    if any(not (np.isfinite(v) and v > 0.0) for v in vals):
        raise InsufficientTail("non-positive entry inside the tail")
    if len(vals) < 4:
        raise InsufficientTail(f"need >= 4 usable entries, got {len(vals)}")
    m = len(vals)
    return float((vals[-1] / vals[0]) ** (1.0 / (m - 1)))


def estimate_root_order(rho: float) -> float:
    """Invert the null-component Newton contraction rho = d/(d+1)."""
    if not 0.0 < rho < 1.0:
        raise OutOfRange(f"need rho in (0,1), got {rho}")
    return rho / (1.0 - rho)


@dataclass
class StepDiagnostics:
    k: int
    sigma: float
    pn_norm: float
    pr_norm: float
    theta: float
    pair: PairLabel | None
    compatible: bool


@dataclass
class DiagnosticsReport:
    """Per-step analysis quantities plus tail rate / root-order estimates."""

    steps: list[StepDiagnostics]
    rate: float | None
    root_order: float | None


def diagnose_run(
    p: NonlinearProblem,
    outcome: SolveOutcome,
    C: float = 2.0,
    rho_dom: float = 3.0,
    noise_floor: float = 1e-13,
) -> DiagnosticsReport:
    """Build the full diagnostics report for a solve with retained iterates.

    Newton updates are recomputed from the iterate history (they are
    deterministic), so the solver does not need to retain step vectors.
    Entries whose null component is below the noise floor are excluded from
    the rate fit; the estimates are None when the tail is too short.
    """
    from .solvers import newton_step  # local import to avoid a cycle

    _require_truth(p)
    if outcome.iterate_history is None:
        raise MissingGroundTruth("outcome has no iterate history; solve with keep_history")

    history = outcome.iterate_history
    splits = [split_error(xk, p) for xk in history]
    updates: list[np.ndarray | None] = []
    for rec in outcome.trace:
        try:
            w, _ = newton_step(p, history[rec.k])
        except SingularMatrix:
            w = None
        updates.append(w)

    flags = compatibility_monitor(outcome.trace, splits, C)
    steps = []
    for rec, flag in zip(outcome.trace, flags):
        k = rec.k
        pair = None
        if k >= 1 and updates[k] is not None and updates[k - 1] is not None:
            pair = classify_pair(
                splits[k], splits[k - 1], updates[k], updates[k - 1], p, rho_dom
            )
        steps.append(
            StepDiagnostics(
                k=k,
                sigma=splits[k].sigma,
                pn_norm=float(np.linalg.norm(splits[k].pn)),
                pr_norm=float(np.linalg.norm(splits[k].pr)),
                theta=rec.theta,
                pair=pair,
                compatible=flag,
            )
        )

    scale = noise_floor * (1.0 + float(np.linalg.norm(p.known_root)))
    tail = [float(np.linalg.norm(s.pn)) for s in splits]
    tail = [v for v in tail if v > scale]
    rate = order = None
    try:
        rate = estimate_rate(tail[-12:])
        order = estimate_root_order(rate)
    except (InsufficientTail, OutOfRange):
        pass
    return DiagnosticsReport(steps=steps, rate=rate, root_order=order)
