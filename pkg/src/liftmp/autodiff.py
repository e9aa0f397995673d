"""Minimal tape-based reverse-mode differentiation over matrices.

The primitive set is deliberately closed: it is exactly what is needed to
express the three penalized losses, their analytic gradients, and the
learnable layer map, so that training can backpropagate through
expressions that themselves contain a gradient.  Shapes are fixed and
checked when a node is built; the backward pass can then never fail on
shapes.

All values are float64 ndarrays of rank 2.  Scalars are shape (1, 1).
``hadamard`` accepts either equal shapes or a (m, 1) second operand,
which is broadcast across columns (needed for per-row coefficients).
"""

from __future__ import annotations

import numpy as np

from .embeddings import DEGENERATE_NORM, normalize_rows
from .errors import LiftmpError, ShapeError


class Var:
    """Handle to one tape node: an id plus a fixed shape."""

    __slots__ = ("tape", "id", "shape")

    def __init__(self, tape, node_id, shape):
        self.tape = tape
        self.id = node_id
        self.shape = shape

    @property
    def value(self) -> np.ndarray:
        return self.tape.nodes[self.id].value


class _Node:
    __slots__ = ("op", "inputs", "value", "aux")

    def __init__(self, op, inputs, value, aux=None):
        self.op = op
        self.inputs = inputs
        self.value = value
        self.aux = aux


def _as2d(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ShapeError(f"tape values must be matrices, got ndim={arr.ndim}")
    return arr


class Tape:
    """Append-only list of nodes; construction order is topological."""

    def __init__(self):
        self.nodes = []
        self.degenerate_rows = 0  # rows rescued by row_normalize forward

    def _push(self, op, inputs, value, aux=None) -> Var:
        self.nodes.append(_Node(op, [v.id for v in inputs], value, aux))
        return Var(self, len(self.nodes) - 1, value.shape)

    # -- leaves ------------------------------------------------------------

    def leaf(self, value) -> Var:
        """Input node; backward() reports a gradient for every leaf."""
        return self._push("leaf", [], _as2d(value).copy())

    def constant(self, value) -> Var:
        """Input node whose gradient is never requested (alias of leaf)."""
        return self.leaf(value)

    # -- primitives --------------------------------------------------------

    def matmul(self, a: Var, b: Var) -> Var:
        if a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul {a.shape} @ {b.shape}")
        return self._push("matmul", [a, b], a.value @ b.value)

    def add(self, a: Var, b: Var) -> Var:
        if a.shape != b.shape:
            raise ShapeError(f"add {a.shape} + {b.shape}")
        return self._push("add", [a, b], a.value + b.value)

    def scale(self, a: Var, c: float) -> Var:
        return self._push("scale", [a], a.value * float(c), aux=float(c))

    def hadamard(self, a: Var, b: Var) -> Var:
        if a.shape != b.shape and not (b.shape == (a.shape[0], 1)):
            raise ShapeError(f"hadamard {a.shape} * {b.shape}")
        return self._push("hadamard", [a, b], a.value * b.value)

    def row_dot(self, a: Var, b: Var) -> Var:
        """Per-row inner products; result shape (rows, 1)."""
        if a.shape != b.shape:
            raise ShapeError(f"row_dot {a.shape} . {b.shape}")
        val = np.einsum("ij,ij->i", a.value, b.value)[:, None]
        return self._push("row_dot", [a, b], val)

    def row_normalize(self, a: Var) -> Var:
        """Project rows to the unit sphere (same rescue rule as embeddings).

        Degenerate rows (norm < DEGENERATE_NORM) are resampled in the
        forward pass and treated as non-differentiable: their backward
        contribution is zero and ``degenerate_rows`` is incremented.
        """
        norms = np.linalg.norm(a.value, axis=1)
        bad = norms < DEGENERATE_NORM
        self.degenerate_rows += int(bad.sum())
        val = normalize_rows(a.value)
        return self._push("row_normalize", [a], val, aux=(norms, bad))

    def gather_rows(self, a: Var, index) -> Var:
        index = np.asarray(index, dtype=np.int64)
        if index.ndim != 1:
            raise ShapeError("gather_rows index must be 1-D")
        if index.size and (index.min() < 0 or index.max() >= a.shape[0]):
            raise ShapeError("gather_rows index out of range")
        return self._push("gather_rows", [a], a.value[index], aux=index)

    def scatter_add(self, rows: Var, index, target_rows: int) -> Var:
        index = np.asarray(index, dtype=np.int64)
        if index.shape != (rows.shape[0],):
            raise ShapeError("scatter_add index length must match rows")
        if index.size and (index.min() < 0 or index.max() >= target_rows):
            raise ShapeError("scatter_add index out of range")
        val = np.zeros((target_rows, rows.shape[1]))
        np.add.at(val, index, rows.value)
        return self._push("scatter_add", [rows], val, aux=index)

    def sum(self, a: Var) -> Var:
        return self._push("sum", [a], np.array([[a.value.sum()]]))

    def square(self, a: Var) -> Var:
        return self._push("square", [a], a.value ** 2)

    # -- conveniences built from primitives ---------------------------------

    def sub(self, a: Var, b: Var) -> Var:
        return self.add(a, self.scale(b, -1.0))


def backward(tape: Tape, output: Var) -> dict:
    """Reverse-mode accumulation from a scalar output.

    Returns {leaf node id -> gradient ndarray}; leaves that do not reach
    the output get zero gradients.  Accumulation order is fixed by node
    id, so the pass is deterministic.
    """
    if output.shape != (1, 1):
        raise LiftmpError("backward requires a scalar (1,1) output")
    nodes = tape.nodes
    grads = [None] * len(nodes)
    grads[output.id] = np.ones((1, 1))

    def accum(node_id, g):
        if grads[node_id] is None:
            grads[node_id] = g.copy()
        else:
            grads[node_id] += g

    for nid in range(output.id, -1, -1):
        g = grads[nid]
        if g is None:
            continue
        node = nodes[nid]
        op, inp = node.op, node.inputs
        if op == "leaf":
            continue
        if op == "matmul":
            a, b = nodes[inp[0]].value, nodes[inp[1]].value
            accum(inp[0], g @ b.T)
            accum(inp[1], a.T @ g)
        elif op == "add":
            accum(inp[0], g)
            accum(inp[1], g)
        elif op == "scale":
            accum(inp[0], g * node.aux)
        elif op == "hadamard":
            a, b = nodes[inp[0]].value, nodes[inp[1]].value
            accum(inp[0], g * b)
            gb = g * a
            if b.shape != a.shape:  # (m,1) broadcast: reduce over columns
                gb = gb.sum(axis=1, keepdims=True)
            accum(inp[1], gb)
        elif op == "row_dot":
            a, b = nodes[inp[0]].value, nodes[inp[1]].value
            accum(inp[0], g * b)
            accum(inp[1], g * a)
        elif op == "row_normalize":
            norms, bad = node.aux
            y = node.value
            safe = np.where(bad, 1.0, norms)[:, None]
            gy = (g - np.einsum("ij,ij->i", g, y)[:, None] * y) / safe
            gy[bad] = 0.0  # rescued rows stop gradient
            accum(inp[0], gy)
        elif op == "gather_rows":
            index = node.aux
            ga = np.zeros_like(nodes[inp[0]].value)
            np.add.at(ga, index, g)
            accum(inp[0], ga)
        elif op == "scatter_add":
            accum(inp[0], g[node.aux])
        elif op == "sum":
            accum(inp[0], np.full_like(nodes[inp[0]].value, g[0, 0]))
        elif op == "square":
            accum(inp[0], 2.0 * nodes[inp[0]].value * g)
        else:  # pragma: no cover
            raise LiftmpError(f"unknown op {op}")

    out = {}
    for nid, node in enumerate(nodes):
        if node.op == "leaf":
            out[nid] = grads[nid] if grads[nid] is not None else np.zeros_like(node.value)
    return out
