"""Trainable layered message passing over the penalized loss.

Each layer applies one learnable matrix M_t of shape (r, 2r) to the
stacked per-row pair [v_i ; g_i], where g_i is that row's analytic
gradient of the penalized loss, then projects rows back to the unit
sphere:

    V <- row_normalize([V | grad(V)] @ M_t^T).

Initializing M_t = [I | -eta0 * I] (plus optional small noise) makes the
untrained forward pass coincide exactly with fixed-step projected
gradient descent, which anchors the architecture: training can only move
away from a solver that already works.

Training is unsupervised: each step samples a fresh batch of instances
from the configured distribution, runs the forward pass on the autodiff
tape, and Adam-updates all layers against the mean final-layer loss.
Validation rounds a fixed held-out set periodically and the best
validation model is retained.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import instances as inst
from .autodiff import Tape, backward
from .embeddings import init_uniform_sphere, normalize_rows
from .errors import (CheckpointError, InvalidInstanceError, ShapeError,
                     TrainError)
from .problems import Problem, make_problem
from .rng import Rng
from .rounding import best_of_rounds

MODEL_FORMAT = "liftmp-model-v1"
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
INIT_ETA0 = 0.1
INIT_NOISE = 1e-2


@dataclass
class Model:
    """Layer matrices plus the problem kind they were trained for."""

    rank: int
    layers: int
    matrices: list  # layers arrays of shape (rank, 2*rank)
    problem_kind: str = "maxcut"
    metadata: dict = field(default_factory=dict)

    def copy(self) -> "Model":
        return Model(self.rank, self.layers,
                     [M.copy() for M in self.matrices],
                     self.problem_kind, dict(self.metadata))


def model_init(rank: int, layers: int, seed: int,
               problem_kind: str = "maxcut",
               noise_scale: float = INIT_NOISE,
               eta0: float = INIT_ETA0) -> Model:
    """Model whose zero-noise forward pass is fixed-step descent with eta0."""
    if rank < 1 or layers < 1:
        raise InvalidInstanceError("rank and layers must be positive")
    g = Rng(seed).split("model-init").generator()
    base = np.hstack([np.eye(rank), -eta0 * np.eye(rank)])
    mats = [base + noise_scale * g.standard_normal((rank, 2 * rank))
            for _ in range(layers)]
    return Model(rank, layers, mats, problem_kind,
                 metadata={"seed": int(seed), "eta0": eta0,
                           "init_noise": noise_scale, "steps": 0})


def forward(model: Model, problem: Problem, V0: np.ndarray) -> np.ndarray:
    """Run the layered iteration from V0; returns the final embeddings."""
    V = np.asarray(V0, dtype=np.float64)
    if V.shape != (problem.num_rows, model.rank):
        raise ShapeError(
            f"expected ({problem.num_rows}, {model.rank}) embeddings, "
            f"got {V.shape}")
    for M in model.matrices:
        G = problem.grad(V)
        V = normalize_rows(np.hstack([V, G]) @ M.T)
    return V


def _build_forward(tape: Tape, problem: Problem, v, weights):
    """Tape version of forward(); weights are (W1, W2) leaf pairs (=M^T halves)."""
    for w1, w2 in weights:
        g = problem.build_grad(tape, v)
        v = tape.row_normalize(tape.add(tape.matmul(v, w1), tape.matmul(g, w2)))
    return v


@dataclass(frozen=True)
class InstanceDistribution:
    """Sampling spec for training/validation instances.

    Graph models draw the node count uniformly from [n_min, n_max];
    3-SAT draws the clause count uniformly from [clauses_min, clauses_max].
    """

    model: str  # er | ba | ws | hk | 3sat
    n_min: int = 0
    n_max: int = 0
    p: float = 0.0
    m: int = 0
    k: int = 0
    num_vars: int = 0
    clauses_min: int = 0
    clauses_max: int = 0

    def __post_init__(self):
        if self.model not in ("er", "ba", "ws", "hk", "3sat"):
            raise InvalidInstanceError(f"unknown instance model {self.model!r}")

    def sample(self, rng: Rng):
        g = rng.generator()
        if self.model == "3sat":
            c = int(g.integers(self.clauses_min, self.clauses_max + 1))
            return inst.gen_random_3sat(self.num_vars, c, rng.split("gen"))
        n = int(g.integers(self.n_min, self.n_max + 1))
        if self.model == "er":
            return inst.gen_er(n, self.p, rng.split("gen"))
        if self.model == "ba":
            return inst.gen_ba(n, self.m, rng.split("gen"))
        if self.model == "ws":
            return inst.gen_ws(n, self.k, self.p, rng.split("gen"))
        return inst.gen_hk(n, self.m, self.p, rng.split("gen"))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "model", "n_min", "n_max", "p", "m", "k",
            "num_vars", "clauses_min", "clauses_max")}


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters and the instance distribution."""

    distribution: InstanceDistribution
    steps: int
    learning_rate: float = 0.001
    batch_size: int = 16
    val_frequency: int = 100
    val_size: int = 32
    val_hyperplanes: int = 100
    rho: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0 or self.batch_size < 1 or self.val_frequency < 1:
            raise InvalidInstanceError("non-positive training parameter")
        if self.learning_rate < 0:
            raise InvalidInstanceError("learning rate must be >= 0")


def _val_score(model: Model, problems, inits, round_rngs, k: int) -> float:
    vals = []
    for problem, V0, rr in zip(problems, inits, round_rngs):
        V = forward(model, problem, V0)
        rep = best_of_rounds(problem, V, k, rr)
        vals.append(rep.best_objective)
    return float(np.mean(vals))


def train(model: Model, config: TrainConfig):
    """Adam-train all layers; returns (best validation model, history).

    History is one record per step {step, train_loss, val_score} with
    val_score present on validation steps (and after the last step).
    Identical config and seeds reproduce the history exactly.
    """
    root = Rng(config.seed)
    kind = model.problem_kind
    rank = model.rank
    current = model.copy()

    # fixed held-out validation set with fixed initializations and
    # rounding streams, so scores are comparable across steps
    val_problems, val_inits, val_rrngs = [], [], []
    for i in range(config.val_size):
        instance = config.distribution.sample(root.split(("val", i)))
        problem = make_problem(kind, instance, config.rho)
        val_problems.append(problem)
        val_inits.append(init_uniform_sphere(
            problem.num_rows, rank, root.split(("val-init", i))))
        val_rrngs.append(root.split(("val-round", i)))

    adam_m = [np.zeros_like(M) for M in current.matrices]
    adam_v = [np.zeros_like(M) for M in current.matrices]
    adam_t = 0
    sense_max = kind == "maxcut"

    def score_now():
        return _val_score(current, val_problems, val_inits, val_rrngs,
                          config.val_hyperplanes)

    best_score = score_now()
    best_model = current.copy()
    history = [{"step": 0, "train_loss": None, "val_score": best_score}]

    for step in range(1, config.steps + 1):
        tape = Tape()
        weights = [(tape.leaf(M[:, :rank].T), tape.leaf(M[:, rank:].T))
                   for M in current.matrices]
        per_instance = []
        batch_seeds = []
        for b in range(config.batch_size):
            data_rng = root.split(("data", step, b))
            batch_seeds.append(data_rng.seed)
            instance = config.distribution.sample(data_rng)
            problem = make_problem(kind, instance, config.rho)
            v0 = tape.constant(init_uniform_sphere(
                problem.num_rows, rank, root.split(("init", step, b))))
            v_final = _build_forward(tape, problem, v0, weights)
            per_instance.append(problem.build_loss(tape, v_final))
        total = per_instance[0]
        for li in per_instance[1:]:
            total = tape.add(total, li)
        mean_loss = tape.scale(total, 1.0 / config.batch_size)
        loss_val = float(mean_loss.value[0, 0])
        if not np.isfinite(loss_val):
            bad = next((i for i, li in enumerate(per_instance)
                        if not np.isfinite(li.value[0, 0])), 0)
            raise TrainError(
                f"non-finite loss at step {step}",
                step=step, instance_seed=batch_seeds[bad])

        grads = backward(tape, mean_loss)
        adam_t += 1
        bc1 = 1.0 - ADAM_BETA1 ** adam_t
        bc2 = 1.0 - ADAM_BETA2 ** adam_t
        for li, (w1, w2) in enumerate(weights):
            dM = np.hstack([grads[w1.id].T, grads[w2.id].T])
            adam_m[li] = ADAM_BETA1 * adam_m[li] + (1 - ADAM_BETA1) * dM
            adam_v[li] = ADAM_BETA2 * adam_v[li] + (1 - ADAM_BETA2) * dM ** 2
            mhat = adam_m[li] / bc1
            vhat = adam_v[li] / bc2
            current.matrices[li] -= (config.learning_rate * mhat
                                     / (np.sqrt(vhat) + ADAM_EPS))

        rec = {"step": step, "train_loss": loss_val, "val_score": None}
        if step % config.val_frequency == 0 or step == config.steps:
            score = score_now()
            rec["val_score"] = score
            if (score > best_score) if sense_max else (score < best_score):
                best_score = score
                best_model = current.copy()
        history.append(rec)

    best_model.metadata.update({
        "steps": config.steps,
        "train_seed": config.seed,
        "rho": config.rho,
        "learning_rate": config.learning_rate,
        "batch_size": config.batch_size,
        "best_val_score": best_score,
        "distribution": config.distribution.to_dict(),
    })
    return best_model, history


# ---------------------------------------------------------------------------
# Checkpoints: exact round trip via hex floats
# ---------------------------------------------------------------------------

def model_to_dict(model: Model) -> dict:
    return {
        "format": MODEL_FORMAT,
        "rank": model.rank,
        "layers": model.layers,
        "problem": model.problem_kind,
        "matrices": [[x.hex() for x in M.ravel(order="C")]
                     for M in model.matrices],
        "metadata": model.metadata,
    }


def model_from_dict(obj: dict) -> Model:
    try:
        if obj["format"] != MODEL_FORMAT:
            raise CheckpointError(
                f"unsupported checkpoint format {obj.get('format')!r}")
        rank, layers = int(obj["rank"]), int(obj["layers"])
        mats = []
        for flat in obj["matrices"]:
            M = np.array([float.fromhex(x) for x in flat]).reshape(
                rank, 2 * rank)
            mats.append(M)
        if len(mats) != layers:
            raise CheckpointError("layer count mismatch")
        return Model(rank, layers, mats, obj.get("problem", "maxcut"),
                     dict(obj.get("metadata", {})))
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"corrupt model checkpoint: {exc}") from None


def save_model(model: Model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")


def load_model(path) -> Model:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read model checkpoint: {exc}") from None
    return model_from_dict(obj)


def history_jsonl(history) -> str:
    return "\n".join(json.dumps(h) for h in history) + "\n"
