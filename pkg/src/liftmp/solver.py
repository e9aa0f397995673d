"""Projected gradient descent on the penalized loss.

One iteration is a simultaneous update of every row followed by row
normalization; because the gradient only mixes rows that share an edge or
a clause, the iteration is a message-passing pass over the constraint
graph.  An optional stochastic perturbation kicks in when an update stalls
below a threshold, to escape flat regions; it is off by default.

Step sizes either come from a fixed eta (exact message-passing semantics)
or from Armijo backtracking, which is the default schedule: it halves a
trial step until the sufficient-decrease test accepts, so the loss trace
is monotone on accepted steps.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .embeddings import normalize_rows
from .errors import InvalidInstanceError, NumericError
from .problems import Problem
from .rng import Rng

ARMIJO_C = 1e-4
BACKTRACK_ETA0 = 0.5
BACKTRACK_MAX_HALVINGS = 30


@dataclass(frozen=True)
class SolverConfig:
    """Iteration budget, step rule, perturbation, and stopping rule.

    ``step`` is either a positive float (fixed step) or the string
    "backtracking".  When ``noise_sigma`` > 0, a full-matrix Gaussian
    perturbation of that scale is injected whenever the Frobenius norm of
    an update falls to ``noise_threshold`` or below.  The solve stops
    early once the tangent-projected gradient Frobenius norm (which is at
    most the ambient one) drops to ``stop_tol`` times the row count.
    """

    max_iters: int = 2000
    step: float | str = "backtracking"
    noise_threshold: float = 0.0
    noise_sigma: float = 0.0
    stop_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 0:
            raise InvalidInstanceError("max_iters must be nonnegative")
        if isinstance(self.step, str):
            if self.step != "backtracking":
                raise InvalidInstanceError(f"unknown step rule {self.step!r}")
        elif not (np.isfinite(self.step) and self.step >= 0):
            raise InvalidInstanceError("step must be finite and nonnegative")
        if self.noise_sigma < 0 or self.noise_threshold < 0 or self.stop_tol < 0:
            raise InvalidInstanceError("noise and tolerance values must be >= 0")
        if self.noise_sigma > 0 and self.noise_threshold <= 0:
            raise InvalidInstanceError(
                "noise_sigma > 0 requires noise_threshold > 0")


PERTURBED_DEFAULTS = dict(noise_threshold=1e-6, noise_sigma=1e-4)


@dataclass
class SolveResult:
    """Final embeddings plus the per-iteration diagnostic trace."""

    embeddings: np.ndarray
    loss_trace: list
    records: list  # dicts {iter, loss, violation, grad_norm, eta}
    violation: float
    iterations: int
    wall_s: float
    non_monotone_steps: int = 0
    stopped_on_tol: bool = False

    @property
    def final_loss(self) -> float:
        return self.loss_trace[-1]

    def trace_jsonl(self) -> str:
        import json

        return "\n".join(json.dumps(r) for r in self.records) + "\n"


def _check_grad_finite(G: np.ndarray):
    if not np.all(np.isfinite(G)):
        bad = int(np.flatnonzero(~np.isfinite(G).all(axis=1))[0])
        raise NumericError(f"non-finite gradient at row {bad}", row=bad)


def projected_grad_norm(V: np.ndarray, G: np.ndarray) -> float:
    """Frobenius norm of the gradient projected onto the row tangent spaces.

    This is the stationarity measure of the projected iteration: it
    vanishes exactly when every row's gradient is parallel to the row.
    It never exceeds the ambient gradient norm.
    """
    tang = G - np.einsum("ij,ij->i", G, V)[:, None] * V
    return float(np.linalg.norm(tang))


def pgd_step(problem: Problem, V: np.ndarray, eta: float) -> np.ndarray:
    """One projected gradient step: normalize_rows(V - eta * grad)."""
    G = problem.grad(V)
    _check_grad_finite(G)
    return normalize_rows(V - eta * G)


def _backtrack(problem: Problem, V: np.ndarray, G: np.ndarray, loss0: float):
    # sufficient decrease is measured against the tangent-projected
    # gradient: the ambient norm stays bounded away from zero at
    # sphere-stationary points, which would deadlock the search there
    pg2 = projected_grad_norm(V, G) ** 2
    eta = BACKTRACK_ETA0
    V2 = V
    loss2 = loss0
    for _ in range(BACKTRACK_MAX_HALVINGS + 1):
        V2 = normalize_rows(V - eta * G)
        loss2 = problem.loss(V2)
        if loss2 <= loss0 - ARMIJO_C * eta * pg2:
            return V2, loss2, eta, True
        eta *= 0.5
    return V2, loss2, eta * 2.0, False


def backtracking_step(problem: Problem, V: np.ndarray):
    """Armijo line search along the projected gradient step.

    Halves the trial step from BACKTRACK_ETA0 until
    loss(V') <= loss(V) - c * eta * ||proj grad||_F^2; if no trial accepts
    within BACKTRACK_MAX_HALVINGS, the last trial is returned and flagged.

    Returns (V', eta_used, accepted).
    """
    G = problem.grad(V)
    _check_grad_finite(G)
    V2, _, eta, accepted = _backtrack(problem, V, G, problem.loss(V))
    return V2, eta, accepted


def solve(problem: Problem, V0: np.ndarray, config: SolverConfig) -> SolveResult:
    """Run the message-passing iteration from V0 under the given config.

    The trace records one entry per iteration plus the entry point, so its
    length is iterations + 1.  Identical (problem, V0, config) inputs give
    bit-identical results.
    """
    t_start = time.perf_counter()
    V = normalize_rows(np.asarray(V0, dtype=np.float64))
    noise_rng = Rng(config.seed).split("noise")
    noise_stream = noise_rng.generator() if config.noise_sigma > 0 else None
    stop_at = config.stop_tol * V.shape[0]

    fixed_eta = None if config.step == "backtracking" else float(config.step)
    records = []
    loss_trace = []
    non_monotone = 0

    def record(it, loss, gnorm, eta):
        loss_trace.append(loss)
        records.append({
            "iter": it, "loss": loss,
            "violation": problem.violation(V),
            "grad_norm": gnorm, "eta": eta,
        })

    G = problem.grad(V)
    _check_grad_finite(G)
    gnorm = projected_grad_norm(V, G)
    loss = problem.loss(V)
    record(0, loss, gnorm, None)

    iterations = 0
    stopped = gnorm <= stop_at
    while not stopped and iterations < config.max_iters:
        V_prev = V
        if fixed_eta is None:
            V, loss, eta_used, accepted = _backtrack(problem, V_prev, G, loss)
            if not accepted:
                non_monotone += 1
        else:
            V = normalize_rows(V_prev - fixed_eta * G)
            eta_used = fixed_eta
            loss = None
        if config.noise_sigma > 0:
            delta = float(np.linalg.norm(V - V_prev))
            if delta <= config.noise_threshold:
                V = normalize_rows(
                    V + config.noise_sigma
                    * noise_stream.standard_normal(V.shape))
                loss = None
        if loss is None:
            loss = problem.loss(V)
        iterations += 1
        G = problem.grad(V)
        _check_grad_finite(G)
        gnorm = projected_grad_norm(V, G)
        record(iterations, loss, gnorm, eta_used)
        stopped = gnorm <= stop_at

    return SolveResult(
        embeddings=V,
        loss_trace=loss_trace,
        records=records,
        violation=problem.violation(V),
        iterations=iterations,
        wall_s=time.perf_counter() - t_start,
        non_monotone_steps=non_monotone,
        stopped_on_tol=stopped,
    )
