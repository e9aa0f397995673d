"""The three relaxed problems behind one uniform interface.

Every problem is expressed in the same internal form.  The objective is a
quadratic form in the Gram matrix of the embedding rows,

    objective(V) = <Q, V V^T> + const,

with a fixed symmetric coefficient matrix Q, and the equality constraints
of the relaxation are affine in the same inner products,

    d_c = const_c + sum_k coef_k * <V[a_ck], V[b_ck]>  (want d_c == 0),

penalized quadratically:  loss(V) = objective(V) + rho * sum_c d_c^2.

Unit-norm constraints are enforced by row projection in the solver, never
by penalty, so the loss is a polynomial in the raw entries of V and its
analytic gradient

    grad(V) = 2 Q V + rho * sum_c 2 d_c * (scatter of partner rows)

is exact; it is accumulated per edge / per clause over the constraint
graph, never by dense differentiation.  Row layouts:

* max-cut: one row per node.
* vertex-cover: row 0 is the constant direction v0, then one row per
  node.  Objective sum_i (1 + <v_i, v0>)/2; per edge the constraint
  1 - <v_i,v0> - <v_j,v0> + <v_i,v_j> = 0 forbids uncovered edges.
* max-3-sat: row 0 is v0, one row per variable, one row per unordered
  variable pair occurring in some clause (deduplicated).  Per clause the
  objective is the multilinear expansion of the clause indicator and the
  constraints come in four families (pair-to-pair, triplet-to-triplet,
  triplet-to-single, quad-to-pair), fifteen equalities per clause,
  accumulated once per clause even when a pair row is shared.

Sign convention for clause sign patterns: a positive literal carries
sign -1 and a negated literal +1, so that on integral embeddings the
product (1/8) prod_t (1 + sign_t x_t) is exactly the indicator that the
clause is violated (checked against truth tables in the tests).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .embeddings import init_uniform_sphere
from .errors import InvalidInstanceError, ShapeError
from .instances import CnfInstance, Graph
from .rng import Rng

PROBLEM_KINDS = ("maxcut", "vertexcover", "max3sat")


@dataclass(frozen=True)
class ObjectiveReport:
    """Integral evaluation: objective value and feasibility flag."""

    value: float
    feasible: bool


class _Block:
    """A batch of equality constraints sharing one coefficient pattern."""

    def __init__(self, a, b, coef, const, num_rows):
        self.a = np.asarray(a, dtype=np.int64)        # (m, K)
        self.b = np.asarray(b, dtype=np.int64)        # (m, K)
        self.coef = np.asarray(coef, dtype=np.float64)  # (K,)
        self.const = float(const)
        m, k = self.a.shape
        ones = np.ones(m)
        rows = np.arange(m)
        self.gather_a = [sp.csr_matrix((ones, (rows, self.a[:, t])),
                                       shape=(m, num_rows)) for t in range(k)]
        self.gather_b = [sp.csr_matrix((ones, (rows, self.b[:, t])),
                                       shape=(m, num_rows)) for t in range(k)]
        self.scatter_a = [g.T.tocsr() for g in self.gather_a]
        self.scatter_b = [g.T.tocsr() for g in self.gather_b]

    @property
    def size(self) -> int:
        return self.a.shape[0]

    def values(self, V) -> np.ndarray:
        """Constraint values d_c at V, shape (m,)."""
        d = np.full(self.size, self.const)
        for t, c in enumerate(self.coef):
            d += c * np.einsum("ij,ij->i", self.gather_a[t] @ V,
                               self.gather_b[t] @ V)
        return d

    def grad(self, V, d) -> np.ndarray:
        """Gradient of sum d_c^2 given precomputed d."""
        G = np.zeros_like(V)
        for t, c in enumerate(self.coef):
            w = (2.0 * c * d)[:, None]
            G += self.scatter_a[t] @ (w * (self.gather_b[t] @ V))
            G += self.scatter_b[t] @ (w * (self.gather_a[t] @ V))
        return G

    def build_values(self, tape, v):
        """Tape expression for d, shape (m, 1)."""
        d = tape.constant(np.full((self.size, 1), self.const))
        for t, c in enumerate(self.coef):
            ga = tape.gather_rows(v, self.a[:, t])
            gb = tape.gather_rows(v, self.b[:, t])
            d = tape.add(d, tape.scale(tape.row_dot(ga, gb), c))
        return d


class Problem:
    """Shared loss / gradient / violation machinery.

    Subclasses fill in Q, the constraint blocks, the row layout, and the
    integral-side operations.
    """

    kind: str
    sense: str  # "max" or "min" for the integral objective

    def __init__(self, num_rows, rho, Q_entries, obj_const, blocks,
                 decision_rows, ref_row):
        self.num_rows = int(num_rows)
        self.rho = float(rho)
        r, c, vals = Q_entries
        self._Q = sp.csr_matrix((vals, (r, c)),
                                shape=(self.num_rows, self.num_rows))
        self._Q2 = (2.0 * self._Q).tocsr()
        self._obj_const = float(obj_const)
        self._blocks = blocks
        self.decision_rows = np.asarray(decision_rows, dtype=np.int64)
        self.ref_row = ref_row
        self._Q_dense = None

    # -- continuous side -----------------------------------------------------

    def _check(self, V) -> np.ndarray:
        V = np.asarray(V, dtype=np.float64)
        if V.ndim != 2 or V.shape[0] != self.num_rows:
            raise ShapeError(
                f"{self.kind} expects ({self.num_rows}, r) embeddings, "
                f"got {V.shape}")
        return V

    def objective_value(self, V) -> float:
        V = self._check(V)
        return float(np.sum(V * (self._Q @ V))) + self._obj_const

    def penalty_sq_sum(self, V) -> float:
        V = self._check(V)
        return float(sum(np.sum(b.values(V) ** 2) for b in self._blocks))

    def loss(self, V, normalized: bool = False) -> float:
        val = self.objective_value(V) + self.rho * self.penalty_sq_sum(V)
        return val / self._normalizer if normalized else val

    def grad_objective(self, V) -> np.ndarray:
        V = self._check(V)
        return self._Q2 @ V

    def grad_penalty(self, V) -> np.ndarray:
        V = self._check(V)
        G = np.zeros_like(V)
        for b in self._blocks:
            G += b.grad(V, b.values(V))
        return G

    def grad(self, V) -> np.ndarray:
        """Exact analytic gradient of loss, accumulated per edge/clause."""
        G = self.grad_objective(V)
        if self._blocks and self.rho != 0.0:
            G = G + self.rho * self.grad_penalty(V)
        return G

    def violation(self, V) -> float:
        """Mean squared violation over all equality constraints (0 if none)."""
        V = self._check(V)
        total = 0.0
        count = 0
        for b in self._blocks:
            total += float(np.sum(b.values(V) ** 2))
            count += b.size
        return total / count if count else 0.0

    def constraint_count(self) -> int:
        return sum(b.size for b in self._blocks)

    def initial_embeddings(self, rank: int, rng: Rng) -> np.ndarray:
        return init_uniform_sphere(self.num_rows, rank, rng)

    # -- tape side ------------------------------------------------------------

    def _q_dense(self):
        if self._Q_dense is None:
            self._Q_dense = self._Q.toarray()
        return self._Q_dense

    def build_loss(self, tape, v):
        """Loss as a tape expression; v is a (num_rows, r) Var."""
        qv = tape.matmul(tape.constant(self._q_dense()), v)
        out = tape.sum(tape.hadamard(v, qv))
        out = tape.add(out, tape.constant([[self._obj_const]]))
        for b in self._blocks:
            d = b.build_values(tape, v)
            out = tape.add(out, tape.scale(tape.sum(tape.square(d)), self.rho))
        return out

    def build_grad(self, tape, v):
        """Analytic gradient as a tape expression (differentiable in v)."""
        G = tape.scale(tape.matmul(tape.constant(self._q_dense()), v), 2.0)
        for blk in self._blocks:
            d = blk.build_values(tape, v)
            for t, c in enumerate(blk.coef):
                ga = tape.gather_rows(v, blk.a[:, t])
                gb = tape.gather_rows(v, blk.b[:, t])
                w = tape.scale(d, 2.0 * c * self.rho)
                G = tape.add(G, tape.scatter_add(tape.hadamard(gb, w),
                                                 blk.a[:, t], self.num_rows))
                G = tape.add(G, tape.scatter_add(tape.hadamard(ga, w),
                                                 blk.b[:, t], self.num_rows))
        return G

    # -- integral side ---------------------------------------------------------

    def _check_assignment(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        n = self.decision_rows.shape[0]
        if x.shape != (n,):
            raise ShapeError(f"assignment must have length {n}, got {x.shape}")
        if not np.all(np.abs(x) == 1.0):
            raise InvalidInstanceError("assignment entries must be +1/-1")
        return x

    def integral_embed(self, x, rank: int = 1) -> np.ndarray:
        """Rank-1 embedding consistent with every relaxation constraint."""
        x = self._check_assignment(x)
        V = np.zeros((self.num_rows, rank))
        V[:, 0] = self._integral_column(x)
        return V

    def is_better(self, a: float, b: float) -> bool:
        """True when integral objective a beats b for this problem's sense."""
        return a > b if self.sense == "max" else a < b

    # subclass hooks
    @property
    def _normalizer(self) -> float:
        raise NotImplementedError

    def _integral_column(self, x) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, x) -> ObjectiveReport:
        raise NotImplementedError


class MaxCutProblem(Problem):
    """Maximize total weight of edges crossing a +-1 bipartition.

    Relaxed loss is -sum_e w_e (1 - <v_i, v_j>)/2; there are no equality
    constraints beyond the row norms, so violation is identically zero.
    """

    kind = "maxcut"
    sense = "max"

    def __init__(self, graph: Graph, rho: float = 0.0):
        if rho != 0.0:
            raise InvalidInstanceError("maxcut has no penalty terms; rho must be 0")
        self.graph = graph
        n = graph.num_nodes
        ui, uj, w = graph.edge_arrays()
        rows = np.concatenate([ui, uj])
        cols = np.concatenate([uj, ui])
        vals = np.concatenate([w, w]) / 4.0
        super().__init__(
            num_rows=n, rho=0.0, Q_entries=(rows, cols, vals),
            obj_const=-graph.total_weight() / 2.0, blocks=[],
            decision_rows=np.arange(n), ref_row=None)

    @property
    def _normalizer(self) -> float:
        return float(max(1, self.graph.num_edges))

    def _integral_column(self, x):
        return x

    def evaluate(self, x) -> ObjectiveReport:
        x = self._check_assignment(x)
        ui, uj, w = self.graph.edge_arrays()
        cut = float(np.sum(w * (x[ui] != x[uj])))
        return ObjectiveReport(value=cut, feasible=True)


class VertexCoverProblem(Problem):
    """Minimize cover size subject to every edge having a covered endpoint."""

    kind = "vertexcover"
    sense = "min"

    def __init__(self, graph: Graph, rho: float = 1.0):
        if rho <= 0.0:
            raise InvalidInstanceError("vertex cover requires rho > 0")
        self.graph = graph
        n = graph.num_nodes
        num_rows = n + 1
        node = np.arange(1, n + 1)
        rows = np.concatenate([node, np.zeros(n, dtype=np.int64)])
        cols = np.concatenate([np.zeros(n, dtype=np.int64), node])
        vals = np.full(2 * n, 0.25)
        blocks = []
        ui, uj, _ = graph.edge_arrays()
        if graph.num_edges:
            ri, rj = ui + 1, uj + 1
            zero = np.zeros_like(ri)
            a = np.stack([ri, rj, ri], axis=1)
            b = np.stack([zero, zero, rj], axis=1)
            blocks.append(_Block(a, b, coef=[-1.0, -1.0, 1.0], const=1.0,
                                 num_rows=num_rows))
        super().__init__(
            num_rows=num_rows, rho=rho, Q_entries=(rows, cols, vals),
            obj_const=n / 2.0, blocks=blocks,
            decision_rows=node, ref_row=0)

    @property
    def _normalizer(self) -> float:
        return float(max(1, self.graph.num_edges))

    def _integral_column(self, x):
        return np.concatenate([[1.0], x])

    def evaluate(self, x) -> ObjectiveReport:
        x = self._check_assignment(x)
        size = float(np.sum(x > 0))
        ui, uj, _ = self.graph.edge_arrays()
        covered = (x[ui] > 0) | (x[uj] > 0)
        return ObjectiveReport(value=size, feasible=bool(np.all(covered)))


class Max3SatProblem(Problem):
    """Minimize the number of unsatisfied clauses of a 3-CNF formula."""

    kind = "max3sat"
    sense = "min"

    def __init__(self, cnf: CnfInstance, rho: float = 0.003):
        if rho <= 0.0:
            raise InvalidInstanceError("max-3-sat requires rho > 0")
        self.cnf = cnf
        n = cnf.num_vars
        pair_index = {}
        for clause in cnf.clauses:
            vs = [v for v, _ in clause]
            for p, q in ((vs[0], vs[1]), (vs[0], vs[2]), (vs[1], vs[2])):
                key = (min(p, q), max(p, q))
                if key not in pair_index:
                    pair_index[key] = 0  # placeholder, renumbered below
        for idx, key in enumerate(sorted(pair_index)):
            pair_index[key] = n + 1 + idx
        self.pair_index = pair_index
        num_rows = n + 1 + len(pair_index)

        def prow(p, q):
            return pair_index[(min(p, q), max(p, q))]

        qr, qc, qv = [], [], []

        def addq(a, b, c):
            qr.append(a); qc.append(b); qv.append(c / 2.0)
            qr.append(b); qc.append(a); qv.append(c / 2.0)

        quad_a, quad_b = [], []

        def addcon(a1, b1, a2, b2):
            quad_a.append((a1, a2))
            quad_b.append((b1, b2))

        const = 0.0
        for clause in cnf.clauses:
            (vi, ni), (vj, nj), (vk, nk) = clause
            ti = 1.0 if ni else -1.0  # positive literal -> -1, negated -> +1
            tj = 1.0 if nj else -1.0
            tk = 1.0 if nk else -1.0
            ri, rj, rk = vi + 1, vj + 1, vk + 1
            pij, pik, pjk = prow(vi, vj), prow(vi, vk), prow(vj, vk)
            t3 = ti * tj * tk
            addq(ri, pjk, t3 / 24.0)
            addq(rj, pik, t3 / 24.0)
            addq(rk, pij, t3 / 24.0)
            addq(ri, rj, ti * tj / 16.0)
            addq(pij, 0, ti * tj / 16.0)
            addq(ri, rk, ti * tk / 16.0)
            addq(pik, 0, ti * tk / 16.0)
            addq(rj, rk, tj * tk / 16.0)
            addq(pjk, 0, tj * tk / 16.0)
            addq(ri, 0, ti / 8.0)
            addq(rj, 0, tj / 8.0)
            addq(rk, 0, tk / 8.0)
            const += -7.0 / 8.0
            # pair-to-pair
            addcon(ri, rj, pij, 0)
            addcon(ri, rk, pik, 0)
            addcon(rj, rk, pjk, 0)
            # triplet-to-triplet (three cyclic differences)
            addcon(pij, rk, pik, rj)
            addcon(pik, rj, pjk, ri)
            addcon(pjk, ri, pij, rk)
            # triplet-to-single
            addcon(ri, pij, rj, 0)
            addcon(rj, pij, ri, 0)
            addcon(rj, pjk, rk, 0)
            addcon(rk, pjk, rj, 0)
            addcon(ri, pik, rk, 0)
            addcon(rk, pik, ri, 0)
            # quad-to-pair
            addcon(pij, pjk, ri, rk)
            addcon(pij, pik, rj, rk)
            addcon(pik, pjk, ri, rj)

        blocks = []
        if quad_a:
            blocks.append(_Block(np.asarray(quad_a), np.asarray(quad_b),
                                 coef=[1.0, -1.0], const=0.0,
                                 num_rows=num_rows))
        super().__init__(
            num_rows=num_rows, rho=rho,
            Q_entries=(np.asarray(qr), np.asarray(qc), np.asarray(qv)),
            obj_const=const, blocks=blocks,
            decision_rows=np.arange(1, n + 1), ref_row=0)

    @property
    def _normalizer(self) -> float:
        return float(max(1, self.cnf.num_clauses))

    def _integral_column(self, x):
        col = np.zeros(self.num_rows)
        col[0] = 1.0
        col[1:self.cnf.num_vars + 1] = x
        for (p, q), row in self.pair_index.items():
            col[row] = x[p] * x[q]
        return col

    def evaluate(self, x) -> ObjectiveReport:
        x = self._check_assignment(x)
        unsat = 0
        for clause in self.cnf.clauses:
            if not any((x[v] < 0) if neg else (x[v] > 0) for v, neg in clause):
                unsat += 1
        return ObjectiveReport(value=float(unsat), feasible=True)


def make_problem(kind: str, instance, rho: float | None = None) -> Problem:
    """Factory used by the service and CLI layers."""
    kind = kind.lower()
    if kind == "maxcut":
        if not isinstance(instance, Graph):
            raise InvalidInstanceError("maxcut needs a Graph instance")
        return MaxCutProblem(instance)
    if kind == "vertexcover":
        if not isinstance(instance, Graph):
            raise InvalidInstanceError("vertexcover needs a Graph instance")
        return VertexCoverProblem(instance, rho if rho is not None else 1.0)
    if kind == "max3sat":
        if not isinstance(instance, CnfInstance):
            raise InvalidInstanceError("max3sat needs a CnfInstance")
        return Max3SatProblem(instance, rho if rho is not None else 0.003)
    raise InvalidInstanceError(f"unknown problem kind {kind!r}")
