"""Embedding matrices: the low-rank factor of the relaxed problem.

An embedding matrix is a plain float64 ndarray of shape (rows, rank) whose
rows live on the unit sphere after every projection step.  Rows map to
constraint-graph nodes as described by each problem's layout.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import CheckpointError, InvalidInstanceError
from .rng import Rng

#: rows with norm below this are considered degenerate and resampled
DEGENERATE_NORM = 1e-12

#: dedicated stream for resampling degenerate rows; fixed so that
#: normalize_rows stays a pure function of its input
_RESCUE_RNG = Rng(2718281828459045)

#: explored rank set for trained models; default for solving
DEFAULT_RANK = 16


def init_uniform_sphere(rows: int, rank: int, rng: Rng) -> np.ndarray:
    """Rows i.i.d. uniform on the unit sphere (Gaussian draw, normalized)."""
    if rows < 1 or rank < 1:
        raise InvalidInstanceError("rows and rank must be positive")
    V = rng.generator().standard_normal((rows, rank))
    return normalize_rows(V)


def normalize_rows(V: np.ndarray) -> np.ndarray:
    """Project every row onto the unit sphere.

    Rows with norm < DEGENERATE_NORM are replaced by a fresh uniform
    sphere sample drawn from a dedicated sub-seed keyed by the row index,
    so the result is still deterministic.
    """
    V = np.asarray(V, dtype=np.float64)
    norms = np.linalg.norm(V, axis=1)
    bad = np.flatnonzero(norms < DEGENERATE_NORM)
    if bad.size:
        V = V.copy()
        for i in bad:
            g = _RESCUE_RNG.split(int(i)).generator()
            row = g.standard_normal(V.shape[1])
            V[i] = row / np.linalg.norm(row)
        norms = np.linalg.norm(V, axis=1)
    return V / norms[:, None]


def inner(V: np.ndarray, i: int, j: int) -> float:
    """Inner product of rows i and j."""
    rows = V.shape[0]
    if not (0 <= i < rows and 0 <= j < rows):
        raise IndexError(f"row index out of range 0..{rows - 1}")
    return float(V[i] @ V[j])


def gram(V: np.ndarray) -> np.ndarray:
    """Gram matrix V V^T; symmetric PSD, unit diagonal for normalized V."""
    return np.asarray(V, dtype=np.float64) @ np.asarray(V, dtype=np.float64).T


def embeddings_to_dict(V: np.ndarray) -> dict:
    V = np.asarray(V, dtype=np.float64)
    return {"rows": int(V.shape[0]), "rank": int(V.shape[1]),
            "data": [float(x) for x in V.ravel(order="C")]}


def embeddings_from_dict(obj: dict) -> np.ndarray:
    try:
        rows, rank = int(obj["rows"]), int(obj["rank"])
        data = np.asarray(obj["data"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"bad embedding checkpoint: {exc}") from None
    if data.shape != (rows * rank,):
        raise CheckpointError(
            f"embedding data length {data.size} != rows*rank = {rows * rank}")
    return data.reshape(rows, rank)


def save_embeddings(V: np.ndarray, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(embeddings_to_dict(V), fh)
        fh.write("\n")


def load_embeddings(path) -> np.ndarray:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read embeddings: {exc}") from None
    return embeddings_from_dict(obj)
