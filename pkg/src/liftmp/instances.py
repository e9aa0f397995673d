"""Problem instances: graphs and 3-CNF formulas.

Data types are immutable and canonicalized at construction (edges stored
with u < v and sorted), so structural equality and serialization round
trips are exact.  Generators are pure functions of (parameters, seed).

File formats (UTF-8, LF line endings):

* Edge list: first non-comment line ``n m``, then ``m`` lines
  ``u v [w]`` with 1-based node indices; ``#`` starts a comment.
* DIMACS CNF: ``p cnf V C`` header, clauses as signed 1-based integers
  terminated by 0; ``c`` starts a comment.  Only 3-literal clauses over
  distinct variables are accepted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInstanceError, ParseError, UnsupportedArityError
from .rng import Rng


@dataclass(frozen=True)
class Graph:
    """Simple undirected weighted graph on nodes 0..num_nodes-1."""

    num_nodes: int
    edges: tuple  # ((u, v, w), ...) with u < v, sorted, no duplicates

    def __post_init__(self):
        if self.num_nodes <= 0:
            raise InvalidInstanceError("graph must have at least one node")
        canon = []
        for u, v, w in self.edges:
            u, v, w = int(u), int(v), float(w)
            if u == v:
                raise InvalidInstanceError(f"self-loop at node {u}")
            if not (0 <= u < self.num_nodes and 0 <= v < self.num_nodes):
                raise InvalidInstanceError(f"edge ({u},{v}) out of range")
            if not np.isfinite(w):
                raise InvalidInstanceError(f"non-finite weight on edge ({u},{v})")
            if u > v:
                u, v = v, u
            canon.append((u, v, w))
        canon.sort()
        for a, b in zip(canon, canon[1:]):
            if a[:2] == b[:2]:
                raise InvalidInstanceError(f"duplicate edge ({a[0]},{a[1]})")
        object.__setattr__(self, "edges", tuple(canon))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def edge_arrays(self):
        """(ui, uj, w) as numpy arrays; empty int/float arrays if no edges."""
        if not self.edges:
            return (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
                    np.zeros(0, dtype=np.float64))
        e = np.asarray(self.edges, dtype=np.float64)
        return e[:, 0].astype(np.int64), e[:, 1].astype(np.int64), e[:, 2]

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.num_nodes, dtype=np.int64)
        for u, v, _ in self.edges:
            d[u] += 1
            d[v] += 1
        return d

    def adjacency(self):
        """Neighbor lists as a tuple of tuples."""
        adj = [[] for _ in range(self.num_nodes)]
        for u, v, _ in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(a) for a in adj)

    def total_weight(self) -> float:
        return float(sum(w for _, _, w in self.edges))


@dataclass(frozen=True)
class CnfInstance:
    """3-CNF formula: clauses of exactly three literals over distinct vars.

    A literal is a pair (var, negated).
    """

    num_vars: int
    clauses: tuple  # (((var, negated), (var, negated), (var, negated)), ...)

    def __post_init__(self):
        if self.num_vars <= 0:
            raise InvalidInstanceError("formula must have at least one variable")
        canon = []
        for clause in self.clauses:
            if len(clause) != 3:
                raise UnsupportedArityError(
                    f"clause has {len(clause)} literals, exactly 3 required")
            lits = tuple((int(v), bool(neg)) for v, neg in clause)
            vs = [v for v, _ in lits]
            if len(set(vs)) != 3:
                raise InvalidInstanceError(f"clause variables not distinct: {vs}")
            for v in vs:
                if not 0 <= v < self.num_vars:
                    raise InvalidInstanceError(f"variable {v} out of range")
            canon.append(lits)
        object.__setattr__(self, "clauses", tuple(canon))

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)


# ---------------------------------------------------------------------------
# Random generators
# ---------------------------------------------------------------------------

def gen_er(n: int, p: float, rng: Rng) -> Graph:
    """Erdos-Renyi G(n, p): each unordered pair kept independently."""
    if n <= 0:
        raise InvalidInstanceError("n must be positive")
    if not 0.0 <= p <= 1.0:
        raise InvalidInstanceError("p must be in [0, 1]")
    g = rng.generator()
    iu, ju = np.triu_indices(n, k=1)
    keep = g.random(iu.shape[0]) < p
    edges = tuple((int(u), int(v), 1.0) for u, v in zip(iu[keep], ju[keep]))
    return Graph(n, edges)


def gen_ba(n: int, m: int, rng: Rng) -> Graph:
    """Barabasi-Albert preferential attachment.

    Starts from a complete graph on the first m nodes; every later node
    attaches to m distinct existing nodes drawn proportionally to degree
    (duplicate targets are redrawn).  Edge count is C(m,2) + (n-m)*m.
    """
    if m < 1 or n <= m:
        raise InvalidInstanceError("need n > m >= 1")
    g = rng.generator()
    edges = [(i, j, 1.0) for i in range(m) for j in range(i + 1, m)]
    # repeated-node list: each endpoint occurrence = one unit of degree
    pool = [i for i in range(m) for _ in range(max(m - 1, 1))]
    for new in range(m, n):
        targets = set()
        while len(targets) < m:
            targets.add(int(pool[g.integers(0, len(pool))]))
        for t in sorted(targets):
            edges.append((t, new, 1.0))
            pool.append(t)
            pool.append(new)
    return Graph(n, tuple(edges))


def gen_ws(n: int, k: int, p: float, rng: Rng) -> Graph:
    """Watts-Strogatz ring lattice with rewiring; edge count n*k/2 preserved."""
    if k % 2 != 0 or k <= 0 or k >= n:
        raise InvalidInstanceError("need even k with 0 < k < n")
    if not 0.0 <= p <= 1.0:
        raise InvalidInstanceError("p must be in [0, 1]")
    g = rng.generator()
    present = set()
    for j in range(1, k // 2 + 1):
        for i in range(n):
            present.add((min(i, (i + j) % n), max(i, (i + j) % n)))
    # rewire each lattice edge's far endpoint with probability p
    for j in range(1, k // 2 + 1):
        for i in range(n):
            e = (min(i, (i + j) % n), max(i, (i + j) % n))
            if g.random() >= p or e not in present:
                continue
            # draw a replacement target for i, keeping the graph simple
            for _ in range(4 * n):
                t = int(g.integers(0, n))
                cand = (min(i, t), max(i, t))
                if t != i and cand not in present:
                    present.remove(e)
                    present.add(cand)
                    break
    return Graph(n, tuple((u, v, 1.0) for u, v in sorted(present)))


def gen_hk(n: int, m: int, p: float, rng: Rng) -> Graph:
    """Holme-Kim: preferential attachment with probability-p triad closure."""
    if m < 1 or n <= m:
        raise InvalidInstanceError("need n > m >= 1")
    if not 0.0 <= p <= 1.0:
        raise InvalidInstanceError("p must be in [0, 1]")
    g = rng.generator()
    edges = [(i, j, 1.0) for i in range(m) for j in range(i + 1, m)]
    present = {(i, j) for i in range(m) for j in range(i + 1, m)}
    pool = [i for i in range(m) for _ in range(max(m - 1, 1))]
    adj = [set() for _ in range(n)]
    for i, j, _ in edges:
        adj[i].add(j)
        adj[j].add(i)

    def link(u, new):
        e = (min(u, new), max(u, new))
        edges.append((e[0], e[1], 1.0))
        present.add(e)
        adj[u].add(new)
        adj[new].add(u)
        pool.append(u)
        pool.append(new)

    for new in range(m, n):
        prev = None
        added = 0
        while added < m:
            tried_triad = False
            if prev is not None and g.random() < p:
                # triad step: close a triangle through the last target
                cands = [w for w in sorted(adj[prev])
                         if w != new and (min(w, new), max(w, new)) not in present]
                if cands:
                    t = cands[int(g.integers(0, len(cands)))]
                    link(t, new)
                    prev = t
                    added += 1
                    tried_triad = True
            if tried_triad:
                continue
            t = int(pool[g.integers(0, len(pool))])
            if t == new or (min(t, new), max(t, new)) in present:
                continue
            link(t, new)
            prev = t
            added += 1
    return Graph(n, tuple(edges))


def gen_random_3sat(num_vars: int, num_clauses: int, rng: Rng) -> CnfInstance:
    """Uniform random 3-SAT: 3 distinct vars per clause, each negated w.p. 1/2."""
    if num_vars < 3:
        raise InvalidInstanceError("need at least 3 variables")
    if num_clauses < 0:
        raise InvalidInstanceError("clause count must be nonnegative")
    g = rng.generator()
    clauses = []
    for _ in range(num_clauses):
        vs = g.choice(num_vars, size=3, replace=False)
        negs = g.random(3) < 0.5
        clauses.append(tuple((int(v), bool(s)) for v, s in zip(vs, negs)))
    return CnfInstance(num_vars, tuple(clauses))


# ---------------------------------------------------------------------------
# Text formats
# ---------------------------------------------------------------------------

def _fmt_weight(w: float) -> str:
    return repr(w)


def serialize_edge_list(graph: Graph) -> str:
    """Canonical edge-list text; weight column omitted when w == 1.0."""
    lines = [f"{graph.num_nodes} {graph.num_edges}"]
    for u, v, w in graph.edges:
        if w == 1.0:
            lines.append(f"{u + 1} {v + 1}")
        else:
            lines.append(f"{u + 1} {v + 1} {_fmt_weight(w)}")
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str) -> Graph:
    n = m = None
    edges = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if n is None:
            if len(parts) != 2:
                raise ParseError("expected header 'n m'", line=lineno)
            try:
                n, m = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError("non-integer header", line=lineno) from None
            if n <= 0 or m < 0:
                raise ParseError("invalid header values", line=lineno)
            continue
        if len(parts) not in (2, 3):
            raise ParseError("expected 'u v [w]'", line=lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise ParseError("malformed edge line", line=lineno) from None
        if not (1 <= u <= n and 1 <= v <= n):
            raise ParseError(f"node index out of range 1..{n}", line=lineno)
        if u == v:
            raise ParseError("self-loop", line=lineno)
        a, b = min(u, v) - 1, max(u, v) - 1
        if (a, b) in seen:
            raise ParseError(f"duplicate edge ({u},{v})", line=lineno)
        seen.add((a, b))
        edges.append((a, b, w))
    if n is None:
        raise ParseError("empty edge-list text", line=1)
    if len(edges) != m:
        raise ParseError(f"header promises {m} edges, found {len(edges)}")
    return Graph(n, tuple(edges))


def serialize_dimacs(cnf: CnfInstance) -> str:
    lines = [f"p cnf {cnf.num_vars} {cnf.num_clauses}"]
    for clause in cnf.clauses:
        lits = " ".join(str(-(v + 1) if neg else (v + 1)) for v, neg in clause)
        lines.append(f"{lits} 0")
    return "\n".join(lines) + "\n"


def parse_dimacs_cnf(text: str) -> CnfInstance:
    num_vars = num_clauses = None
    clauses = []
    pending = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ParseError("expected header 'p cnf V C'", line=lineno)
            try:
                num_vars, num_clauses = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError("non-integer header", line=lineno) from None
            continue
        if num_vars is None:
            raise ParseError("clause before 'p cnf' header", line=lineno)
        try:
            ints = [int(tok) for tok in line.split()]
        except ValueError:
            raise ParseError("malformed clause line", line=lineno) from None
        for val in ints:
            if val == 0:
                if len(pending) != 3:
                    raise UnsupportedArityError(
                        f"clause has {len(pending)} literals, exactly 3 required",
                        line=lineno)
                clauses.append(tuple(pending))
                pending = []
            else:
                v = abs(val) - 1
                if v >= num_vars:
                    raise ParseError(f"variable {abs(val)} out of range", line=lineno)
                pending.append((v, val < 0))
    if pending:
        raise ParseError("unterminated clause at end of input")
    if num_vars is None:
        raise ParseError("missing 'p cnf' header", line=1)
    if len(clauses) != num_clauses:
        raise ParseError(
            f"header promises {num_clauses} clauses, found {len(clauses)}")
    return CnfInstance(num_vars, tuple(clauses))
