"""Dual optimality certificates computed from embeddings.

The primal form is the generic minimization SDP  min <C, X>  over PSD X
with equality constraints <A_i, X> = b_i and trace at most Y.  For any
dual guess lambda, weak duality plus convexity give the bound

    min <C,X>  >=  F(Xt) - <grad F(Xt), Xt> + lambda_min(grad F(Xt)) * Y,

where F(X) = <C,X> + sum_i lambda_i (<A_i,X> - b_i) and grad F =
C + sum_i lambda_i A_i is constant in X.  Any embedding matrix Vt with
Xt = Vt Vt^T therefore certifies a bound; better guesses give tighter
bounds, and eigensolver error is absorbed by reporting the smallest
eigenvalue minus its Ritz residual, which can only loosen the bound.

Max-cut reduction.  Writing cut(x) = W/2 - <A/4, xx^T> with W the total
edge weight and A the weighted adjacency matrix, max-cut is W/2 minus the
minimum of <A/4, X> over the unit-diagonal PSD set.  The only constraints
are the diagonal ones (b_i = 1), so F(Xt) - <grad F, Xt> = -sum_i
lambda_i exactly (the X-dependent parts cancel row by row because
Xt_ii = 1), and with Y = N the emitted upper bound is

    UB = W/2 + sum_i lambda_i - N * lambda_min(A/4 + diag(lambda)).

The dual guess is one multiplier step read off the embeddings,
lambda_i = ||sum_j w_ij v_j|| / 2.  The tests check this reduced form
against a direct evaluation of the three-term expression.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import CertifyError, InvalidInstanceError
from .instances import Graph
from .problems import Problem
from .rng import Rng

DENSE_EIG_MAX_DIM = 64
LANCZOS_ITER_FACTOR = 10

_LANCZOS_START = Rng(1414213562373095)


@dataclass(frozen=True)
class Certificate:
    """A provable bound on the relaxation (hence on every integral value)."""

    bound: float
    dual_vars: tuple
    lambda_min: float
    n: int
    edges: int
    wall_ms: float
    experimental: bool = False


def _weighted_adjacency(graph: Graph) -> sp.csr_matrix:
    ui, uj, w = graph.edge_arrays()
    rows = np.concatenate([ui, uj])
    cols = np.concatenate([uj, ui])
    vals = np.concatenate([w, w])
    return sp.csr_matrix((vals, (rows, cols)),
                         shape=(graph.num_nodes, graph.num_nodes))


def maxcut_dual_vars(graph: Graph, V: np.ndarray) -> np.ndarray:
    """Multiplier guess per node: half the norm of its neighbor sum."""
    V = np.asarray(V, dtype=np.float64)
    if V.shape[0] != graph.num_nodes:
        raise InvalidInstanceError("one embedding row per node required")
    A = _weighted_adjacency(graph)
    return 0.5 * np.linalg.norm(A @ V, axis=1)


def min_eigenvalue(operator, dim=None, tol: float = 1e-8,
                   method: str = "auto", norm_bound: float | None = None) -> float:
    """Smallest eigenvalue of a symmetric operator, safeguarded downward.

    ``operator`` is a dense array, a scipy sparse matrix, or a matvec
    callable (callables need ``dim`` and ``norm_bound``).  Dimensions up
    to DENSE_EIG_MAX_DIM use a dense solve; larger ones run Lanczos with
    full reorthogonalization on the shifted operator s*I - M, where s is
    the Gershgorin row-sum bound on ||M||.  The returned value is the
    smallest Ritz value minus its residual, so eigensolver error can only
    loosen a certificate built from it.
    """
    if callable(operator):
        matvec = operator
        if dim is None or norm_bound is None:
            raise InvalidInstanceError(
                "callable operators need dim and norm_bound")
        shift = float(norm_bound)
        dense = None
    else:
        M = operator
        if sp.issparse(M):
            dim = M.shape[0]
            absM = abs(M)
            shift = float(absM.sum(axis=1).max())
            matvec = lambda x: M @ x
            dense = M.toarray() if dim <= DENSE_EIG_MAX_DIM else None
        else:
            M = np.asarray(M, dtype=np.float64)
            dim = M.shape[0]
            shift = float(np.abs(M).sum(axis=1).max())
            matvec = lambda x: M @ x
            dense = M if dim <= DENSE_EIG_MAX_DIM else None

    if method not in ("auto", "dense", "lanczos"):
        raise InvalidInstanceError(f"unknown method {method!r}")
    if method == "dense" or (method == "auto" and dense is not None):
        if dense is None:
            raise InvalidInstanceError("dense method needs an explicit matrix")
        return float(np.linalg.eigvalsh(dense)[0])
    return _lanczos_min_eig(matvec, dim, shift, tol)


def _lanczos_min_eig(matvec, dim, shift, tol) -> float:
    """Largest eigenpair of shift*I - M by Lanczos; returns min-eig of M.

    Full reorthogonalization keeps the basis numerically orthogonal.  The
    Ritz residual ||M u - theta u|| both gates convergence and is
    subtracted from the final value.
    """
    if dim == 1:
        v = np.ones(1)
        return float(matvec(v)[0])
    bmv = lambda x: shift * x - matvec(x)
    max_iters = LANCZOS_ITER_FACTOR * dim
    q = _LANCZOS_START.split(dim).generator().standard_normal(dim)
    q /= np.linalg.norm(q)
    Q = np.zeros((dim, min(dim, max_iters) + 1))
    Q[:, 0] = q
    alphas, betas = [], []
    theta = None
    residual = None
    for k in range(min(dim, max_iters)):
        u = bmv(Q[:, k])
        alpha = float(Q[:, k] @ u)
        u -= alpha * Q[:, k]
        if k > 0:
            u -= betas[-1] * Q[:, k - 1]
        # full reorthogonalization against the current basis
        u -= Q[:, :k + 1] @ (Q[:, :k + 1].T @ u)
        alphas.append(alpha)
        beta = float(np.linalg.norm(u))
        T = np.diag(alphas)
        if betas:
            off = np.asarray(betas)
            T += np.diag(off, 1) + np.diag(off, -1)
        evals, evecs = np.linalg.eigh(T)
        theta = float(evals[-1])
        residual = abs(beta * evecs[-1, -1])
        if residual <= tol or beta < 1e-14 or k + 1 == dim:
            lam = shift - theta
            return float(lam - residual)
        betas.append(beta)
        Q[:, k + 1] = u / beta
    raise CertifyError(
        f"eigensolver did not reach tol={tol} in {max_iters} iterations",
        residual=residual)


def maxcut_certificate(graph: Graph, V: np.ndarray,
                       tol: float = 1e-8) -> Certificate:
    """Upper bound on the max-cut weight from any normalized embedding."""
    t0 = time.perf_counter()
    lam = maxcut_dual_vars(graph, V)
    A = _weighted_adjacency(graph)
    n = graph.num_nodes
    grad_f = (A / 4.0 + sp.diags(lam)).tocsr()
    lam_min = min_eigenvalue(grad_f, tol=tol)
    bound = graph.total_weight() / 2.0 + float(lam.sum()) - n * lam_min
    return Certificate(
        bound=float(bound),
        dual_vars=tuple(float(x) for x in lam),
        lambda_min=float(lam_min),
        n=n,
        edges=graph.num_edges,
        wall_ms=(time.perf_counter() - t0) * 1e3,
    )


def maxcut_bound_direct(graph: Graph, V: np.ndarray,
                        tol: float = 1e-8) -> float:
    """Three-term bound evaluated without the unit-diagonal simplification.

    Used as a cross-check of the reduced form in maxcut_certificate; the
    two agree whenever the rows of V are unit vectors.
    """
    V = np.asarray(V, dtype=np.float64)
    lam = maxcut_dual_vars(graph, V)
    A = _weighted_adjacency(graph)
    n = graph.num_nodes
    C = (A / 4.0).toarray()
    X = V @ V.T
    grad_f = C + np.diag(lam)
    f_val = float(np.sum(C * X)) + float(lam @ (np.diag(X) - 1.0))
    inner = float(np.sum(grad_f * X))
    lam_min = min_eigenvalue(grad_f, tol=tol)
    lb_min = f_val - inner + lam_min * n
    return graph.total_weight() / 2.0 - lb_min


def penalized_certificate(problem: Problem, V: np.ndarray,
                          tol: float = 1e-8) -> Certificate:
    """EXPERIMENTAL: three-term bound for problems with penalty constraints.

    The dual guess pairs one multiplier step on the quadratic penalties,
    delta_c = 2 rho d_c, with diagonal multipliers eta_j = half the row
    norm of (C + sum_c delta_c A_c) V.  Soundness rests on the same lemma
    and the eigensolver safeguard, but the guess is not validated beyond
    max-cut; results are flagged experimental.  For max-cut instances the
    returned bound upper-bounds the cut; for vertex-cover and max-3-sat it
    lower-bounds the integral objective.
    """
    t0 = time.perf_counter()
    V = np.asarray(V, dtype=np.float64)
    V = problem._check(V)
    n = problem.num_rows
    X = V @ V.T
    C = problem._q_dense()

    mid = np.array(C, dtype=np.float64, copy=True)
    penalty_term = 0.0
    for blk in problem._blocks:
        d = blk.values(V)
        delta = 2.0 * problem.rho * d
        penalty_term += float(delta @ d)
        for t, c in enumerate(blk.coef):
            w = delta * (c / 2.0)
            np.add.at(mid, (blk.a[:, t], blk.b[:, t]), w)
            np.add.at(mid, (blk.b[:, t], blk.a[:, t]), w)
    eta = 0.5 * np.linalg.norm(mid @ V, axis=1)
    grad_f = mid + np.diag(eta)

    f_val = float(np.sum(C * X)) + penalty_term + float(eta @ (np.diag(X) - 1.0))
    inner = float(np.sum(grad_f * X))
    lam_min = min_eigenvalue(grad_f, tol=tol)
    lb = f_val - inner + lam_min * n + problem._obj_const
    bound = -lb if problem.sense == "max" else lb
    edges = problem.graph.num_edges if hasattr(problem, "graph") else 0
    return Certificate(
        bound=float(bound),
        dual_vars=tuple(float(x) for x in eta),
        lambda_min=float(lam_min),
        n=n,
        edges=edges,
        wall_ms=(time.perf_counter() - t0) * 1e3,
        experimental=True,
    )
