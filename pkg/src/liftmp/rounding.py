"""Rounding fractional embeddings to assignments, plus integral baselines.

Hyperplane rounding draws a standard Gaussian vector y and assigns
x_i = sign(<v_i, y>).  For problems with a constant direction v0 (vertex
cover, max-3-sat) the sign is taken relative to v0, quotienting out the
global flip that those objectives are not symmetric under.  Ties at zero
break to +1.

best_of_rounds evaluates many hyperplanes with per-hyperplane sub-seeds
(so a longer run extends a shorter one prefix-wise) and keeps the best
assignment; vertex-cover assignments pass through the feasibility repair
first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInstanceError, TooLargeError
from .instances import Graph
from .problems import MaxCutProblem, Problem, VertexCoverProblem
from .rng import Rng

BRUTE_FORCE_MAX_VARS = 24


@dataclass(frozen=True)
class RoundingReport:
    """Best assignment over k hyperplanes plus the objective distribution."""

    best_assignment: tuple
    best_objective: float
    feasible: bool
    objective_min: float
    objective_mean: float
    objective_max: float
    hyperplanes: int
    seed: int


def hyperplane_round(V: np.ndarray, rng: Rng, ref=None) -> np.ndarray:
    """Round rows of V with one random hyperplane; deterministic per seed.

    V holds one row per decision variable.  When ``ref`` (the constant
    direction) is given, signs are taken relative to it.
    """
    V = np.asarray(V, dtype=np.float64)
    y = rng.generator().standard_normal(V.shape[1])
    t = V @ y
    if ref is not None:
        s = 1.0 if float(np.asarray(ref) @ y) >= 0 else -1.0
        t = t * s
    return np.where(t >= 0, 1.0, -1.0)


def _decision_view(problem: Problem, V: np.ndarray):
    Vd = V[problem.decision_rows]
    ref = V[problem.ref_row] if problem.ref_row is not None else None
    return Vd, ref


def round_once(problem: Problem, V: np.ndarray, rng: Rng) -> np.ndarray:
    """Hyperplane rounding with the problem's sign reference applied."""
    Vd, ref = _decision_view(problem, V)
    return hyperplane_round(Vd, rng, ref=ref)


def best_of_rounds(problem: Problem, V: np.ndarray, k: int, rng: Rng,
                   repair: bool = True) -> RoundingReport:
    """Best of k rounded assignments (max cut / min cover / min unsat)."""
    if k < 1:
        raise InvalidInstanceError("need at least one hyperplane")
    Vd, ref = _decision_view(problem, V)
    best_x = None
    best_val = None
    best_feasible = False
    vals = np.empty(k)
    for i in range(k):
        x = hyperplane_round(Vd, rng.split(i), ref=ref)
        if repair and isinstance(problem, VertexCoverProblem):
            x = repair_vc(problem.graph, x)
        rep = problem.evaluate(x)
        vals[i] = rep.value
        if best_val is None or problem.is_better(rep.value, best_val):
            best_x, best_val, best_feasible = x, rep.value, rep.feasible
    return RoundingReport(
        best_assignment=tuple(float(v) for v in best_x),
        best_objective=float(best_val),
        feasible=best_feasible,
        objective_min=float(vals.min()),
        objective_mean=float(vals.mean()),
        objective_max=float(vals.max()),
        hyperplanes=k,
        seed=rng.seed,
    )


def repair_vc(graph: Graph, x) -> np.ndarray:
    """Make a +-1 cover assignment feasible, then prune redundant vertices.

    Phase 1 scans edges in stored order and adds the endpoint of larger
    degree (ties to the lower index) to cover any uncovered edge.  Phase 2
    scans cover vertices in decreasing-degree order (ties to the lower
    index) and drops any whose removal keeps all edges covered.
    """
    x = np.asarray(x, dtype=np.float64).copy()
    deg = graph.degrees()
    in_cover = x > 0
    for u, v, _ in graph.edges:
        if not (in_cover[u] or in_cover[v]):
            pick = u if (deg[u], -u) >= (deg[v], -v) else v
            in_cover[pick] = True
    adj = graph.adjacency()
    order = sorted(np.flatnonzero(in_cover), key=lambda i: (-deg[i], i))
    for i in order:
        if all(in_cover[j] for j in adj[i]):
            in_cover[i] = False
    return np.where(in_cover, 1.0, -1.0)


def local_search_cut(graph: Graph, x) -> np.ndarray:
    """1-flip local search: flip any node that strictly increases the cut.

    Scans nodes in index order, restarting after every flip; terminates
    because the cut strictly increases and is bounded.
    """
    x = np.asarray(x, dtype=np.float64).copy()
    adj = [[] for _ in range(graph.num_nodes)]
    for u, v, w in graph.edges:
        adj[u].append((v, w))
        adj[v].append((u, w))
    # gain[i]: cut change from flipping i alone
    gain = np.zeros(graph.num_nodes)
    for i in range(graph.num_nodes):
        gain[i] = sum(w if x[i] == x[j] else -w for j, w in adj[i])
    improved = True
    while improved:
        improved = False
        for i in range(graph.num_nodes):
            if gain[i] > 0:
                x[i] = -x[i]
                gain[i] = -gain[i]
                for j, w in adj[i]:
                    gain[j] += 2 * w if x[i] == x[j] else -2 * w
                improved = True
    return x


def greedy_maxcut(graph: Graph, rng: Rng) -> np.ndarray:
    """1-exchange local search started from a uniformly random assignment."""
    g = rng.generator()
    x = np.where(g.random(graph.num_nodes) < 0.5, 1.0, -1.0)
    return local_search_cut(graph, x)


def greedy_vc(graph: Graph) -> np.ndarray:
    """Classic 2-approximation: take both endpoints of any uncovered edge."""
    in_cover = np.zeros(graph.num_nodes, dtype=bool)
    for u, v, _ in graph.edges:
        if not (in_cover[u] or in_cover[v]):
            in_cover[u] = True
            in_cover[v] = True
    return np.where(in_cover, 1.0, -1.0)


def brute_force(problem: Problem):
    """Exact optimum by enumerating all assignments (n <= 24).

    Assignments are scanned in lexicographic order of the +-1 vector with
    -1 ordered first, and the first optimum found is returned, so ties
    break deterministically.  For vertex cover the optimum is over
    feasible covers only.
    """
    n = problem.decision_rows.shape[0]
    if n > BRUTE_FORCE_MAX_VARS:
        raise TooLargeError(f"{n} variables exceed the {BRUTE_FORCE_MAX_VARS}"
                            " limit for enumeration")
    best_x = None
    best_val = None
    chunk = 1 << min(n, 16)
    total = 1 << n
    shifts = np.arange(n - 1, -1, -1, dtype=np.uint64)  # var 0 most significant
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.uint64)
        bits = (idx[:, None] >> shifts[None, :]) & 1
        X = bits.astype(np.float64) * 2.0 - 1.0  # bit 0 -> -1 (lex first)
        vals, feas = _evaluate_batch(problem, X)
        if not np.any(feas):
            continue
        cand = np.flatnonzero(feas)
        sub = vals[cand]
        pos = cand[int(np.argmax(sub) if problem.sense == "max"
                       else np.argmin(sub))]
        val = float(vals[pos])
        if best_val is None or problem.is_better(val, best_val):
            best_x, best_val = X[pos].copy(), val
    return best_x, best_val


def _evaluate_batch(problem: Problem, X: np.ndarray):
    """Vectorized integral objective over a batch of assignments."""
    if isinstance(problem, MaxCutProblem):
        ui, uj, w = problem.graph.edge_arrays()
        cuts = ((X[:, ui] != X[:, uj]) * w).sum(axis=1)
        return cuts, np.ones(X.shape[0], dtype=bool)
    if isinstance(problem, VertexCoverProblem):
        ui, uj, _ = problem.graph.edge_arrays()
        size = (X > 0).sum(axis=1).astype(np.float64)
        feas = ((X[:, ui] > 0) | (X[:, uj] > 0)).all(axis=1) \
            if ui.size else np.ones(X.shape[0], dtype=bool)
        return size, feas
    # max-3-sat: clause satisfied if any literal true
    cnf = problem.cnf
    sat = np.zeros((X.shape[0], cnf.num_clauses), dtype=bool)
    for c, clause in enumerate(cnf.clauses):
        ok = np.zeros(X.shape[0], dtype=bool)
        for v, neg in clause:
            ok |= (X[:, v] < 0) if neg else (X[:, v] > 0)
        sat[:, c] = ok
    unsat = (~sat).sum(axis=1).astype(np.float64)
    return unsat, np.ones(X.shape[0], dtype=bool)
