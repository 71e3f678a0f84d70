"""Conflict-graph representation and independent-set machinery.

Vertices are secondary users (SUs): spot-market users bid per slot,
contract users hold futures contracts.  An edge means mutual interference,
so only independent sets may share one spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np
from scipy.optimize import linprog

ENUMERATION_CAP = 25

Edge = Tuple[int, int]


class EnumerationLimitError(ValueError):
    """Raised when an instance is too large for exhaustive enumeration."""


def _normalize_edge(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class ConflictGraph:
    """Undirected interference graph over spot and contract users.

    Immutable after construction; all operations are pure functions, so
    instances are safe to share across threads.
    """

    spot_vertices: Tuple[int, ...]
    contract_vertices: Tuple[int, ...]
    edges: FrozenSet[Edge]

    def __post_init__(self) -> None:
        spot = tuple(self.spot_vertices)
        contract = tuple(self.contract_vertices)
        object.__setattr__(self, "spot_vertices", spot)
        object.__setattr__(self, "contract_vertices", contract)
        if set(spot) & set(contract):
            raise ValueError("spot and contract vertex id spaces must be disjoint")
        if len(set(spot)) != len(spot) or len(set(contract)) != len(contract):
            raise ValueError("duplicate vertex id")
        declared = set(spot) | set(contract)
        norm = set()
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop on vertex {u}")
            if u not in declared or v not in declared:
                raise ValueError(f"edge ({u},{v}) references undeclared vertex")
            norm.add(_normalize_edge(u, v))
        object.__setattr__(self, "edges", frozenset(norm))

    # -- basic accessors ---------------------------------------------------

    @property
    def vertices(self) -> Tuple[int, ...]:
        return self.spot_vertices + self.contract_vertices

    @property
    def n_vertices(self) -> int:
        return len(self.spot_vertices) + len(self.contract_vertices)

    def is_spot(self, v: int) -> bool:
        return v in self._index and self._index[v] < len(self.spot_vertices)

    def is_contract(self, v: int) -> bool:
        return v in self._index and self._index[v] >= len(self.spot_vertices)

    @property
    def _index(self) -> Dict[int, int]:
        """Vertex id -> position (spot first, then contract)."""
        cached = self.__dict__.get("_index_cache")
        if cached is None:
            cached = {v: i for i, v in enumerate(self.vertices)}
            object.__setattr__(self, "_index_cache", cached)
        return cached

    @property
    def _adj(self) -> List[int]:
        """Adjacency bitmask per vertex position (self bit excluded)."""
        cached = self.__dict__.get("_adj_cache")
        if cached is None:
            idx = self._index
            cached = [0] * self.n_vertices
            for u, v in self.edges:
                iu, iv = idx[u], idx[v]
                cached[iu] |= 1 << iv
                cached[iv] |= 1 << iu
            object.__setattr__(self, "_adj_cache", cached)
        return cached

    def neighbors(self, v: int) -> FrozenSet[int]:
        mask = self._adj[self._index[v]]
        verts = self.vertices
        return frozenset(verts[i] for i in _bits(mask))

    def has_edge(self, u: int, v: int) -> bool:
        return _normalize_edge(u, v) in self.edges

    def is_independent(self, subset: Iterable[int]) -> bool:
        idx = self._index
        mask = 0
        for v in subset:
            mask |= 1 << idx[v]
        adj = self._adj
        for i in _bits(mask):
            if adj[i] & mask:
                return False
        return True

    def spot_subgraph(self) -> "ConflictGraph":
        """Induced subgraph over spot users only."""
        keep = set(self.spot_vertices)
        edges = frozenset(e for e in self.edges if e[0] in keep and e[1] in keep)
        return ConflictGraph(self.spot_vertices, (), edges)

    def contract_subgraph(self) -> "ConflictGraph":
        """Induced subgraph over contract users only."""
        keep = set(self.contract_vertices)
        edges = frozenset(e for e in self.edges if e[0] in keep and e[1] in keep)
        return ConflictGraph((), self.contract_vertices, edges)

    def without(self, removed: Iterable[int]) -> "ConflictGraph":
        """Graph with the given vertices (and incident edges) deleted."""
        gone = set(removed)
        spot = tuple(v for v in self.spot_vertices if v not in gone)
        contract = tuple(v for v in self.contract_vertices if v not in gone)
        edges = frozenset(
            e for e in self.edges if e[0] not in gone and e[1] not in gone
        )
        return ConflictGraph(spot, contract, edges)


@dataclass(frozen=True)
class VertexWeights:
    """One welfare-unit weight per vertex; contract weights may be negative."""

    weights: Dict[int, float] = field(default_factory=dict)

    def __getitem__(self, v: int) -> float:
        return self.weights[v]

    def items(self):
        return self.weights.items()

    @staticmethod
    def for_graph(g: ConflictGraph, values: Dict[int, float]) -> "VertexWeights":
        missing = set(g.vertices) - set(values)
        extra = set(values) - set(g.vertices)
        if missing or extra:
            raise ValueError(f"weights mismatch: missing={missing} extra={extra}")
        return VertexWeights(dict(values))


@dataclass(frozen=True)
class FractionalAllocation:
    """Per-vertex allocation probability in [0, 1] for a fixed realization."""

    probs: Dict[int, float]

    def __post_init__(self) -> None:
        for v, p in self.probs.items():
            if not (-1e-12 <= p <= 1 + 1e-12):
                raise ValueError(f"allocation probability {p} for vertex {v} outside [0,1]")


def _bits(mask: int) -> Iterable[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _resolve_subset(g: ConflictGraph, restrict_to: Optional[Iterable[int]]) -> List[int]:
    if restrict_to is None:
        return list(g.vertices)
    subset = list(restrict_to)
    idx = g._index
    for v in subset:
        if v not in idx:
            raise ValueError(f"vertex {v} not in graph")
    return subset


def enumerate_independent_sets(
    g: ConflictGraph, restrict_to: Optional[Iterable[int]] = None
) -> List[FrozenSet[int]]:
    """All independent sets of the induced subgraph, including the empty set.

    Exhaustive; guarded at ENUMERATION_CAP vertices.
    """
    subset = _resolve_subset(g, restrict_to)
    if len(subset) > ENUMERATION_CAP:
        raise EnumerationLimitError(
            f"instance too large for enumeration: {len(subset)} > {ENUMERATION_CAP} vertices"
        )
    idx = g._index
    adj = g._adj
    positions = sorted(idx[v] for v in subset)
    allowed = 0
    for p in positions:
        allowed |= 1 << p
    verts = g.vertices

    out: List[FrozenSet[int]] = []

    def grow(chosen: List[int], candidates: int) -> None:
        out.append(frozenset(verts[i] for i in chosen))
        cand = candidates
        while cand:
            low = cand & -cand
            i = low.bit_length() - 1
            cand ^= low
            # branch on i: later vertices only, neighbors of i excluded
            chosen.append(i)
            grow(chosen, cand & ~adj[i])
            chosen.pop()

    grow([], allowed)
    return out


def side_market(g: ConflictGraph, contract_set: Iterable[int]) -> FrozenSet[int]:
    """Spot users with no edge to any member of the given contract-user set.

    Defined for any subset of contract users; monotone (a larger contract
    set can only shrink the side market).
    """
    members = set(contract_set)
    for v in members:
        if not g.is_contract(v):
            raise ValueError(f"vertex {v} is not a contract user")
    idx = g._index
    adj = g._adj
    blocked = 0
    for v in members:
        blocked |= adj[idx[v]]
    return frozenset(v for v in g.spot_vertices if not (blocked >> idx[v]) & 1)


def maximal_cliques(g: ConflictGraph) -> List[FrozenSet[int]]:
    """Maximal cliques via Bron-Kerbosch with pivoting."""
    adj = g._adj
    verts = g.vertices
    n = g.n_vertices
    out: List[FrozenSet[int]] = []
    if n == 0:
        return out

    def expand(r: int, p: int, x: int) -> None:
        if p == 0 and x == 0:
            out.append(frozenset(verts[i] for i in _bits(r)))
            return
        # pivot: vertex of P|X with most neighbors in P
        pivot, best = -1, -1
        for i in _bits(p | x):
            d = bin(adj[i] & p).count("1")
            if d > best:
                best, pivot = d, i
        for i in _bits(p & ~adj[pivot]):
            expand(r | (1 << i), p & adj[i], x & adj[i])
            p &= ~(1 << i)
            x |= 1 << i

    expand(0, (1 << n) - 1, 0)
    return out


def maximal_independent_sets(g: ConflictGraph) -> List[FrozenSet[int]]:
    """Maximal independent sets (maximal cliques of the complement graph)."""
    n = g.n_vertices
    if n == 0:
        return []
    full = (1 << n) - 1
    adj = g._adj
    comp = [full & ~adj[i] & ~(1 << i) for i in range(n)]
    verts = g.vertices
    out: List[FrozenSet[int]] = []

    def expand(r: int, p: int, x: int) -> None:
        if p == 0 and x == 0:
            out.append(frozenset(verts[i] for i in _bits(r)))
            return
        pivot, best = -1, -1
        for i in _bits(p | x):
            d = bin(comp[i] & p).count("1")
            if d > best:
                best, pivot = d, i
        for i in _bits(p & ~comp[pivot]):
            expand(r | (1 << i), p & comp[i], x & comp[i])
            p &= ~(1 << i)
            x |= 1 << i

    expand(0, full, 0)
    return out


def check_clique_constraints(g: ConflictGraph, alloc: FractionalAllocation) -> bool:
    """True iff every clique's summed allocation probability is <= 1.

    Checked over maximal cliques, which dominate all cliques.
    """
    probs = alloc.probs
    missing = set(g.vertices) - set(probs)
    if missing:
        raise ValueError(f"allocation missing vertices {missing}")
    for clique in maximal_cliques(g):
        if sum(probs[v] for v in clique) > 1.0 + 1e-9:
            return False
    return True


def check_schedulable(
    g: ConflictGraph, alloc: FractionalAllocation
) -> Optional[List[Tuple[FrozenSet[int], float]]]:
    """Exact schedule for a fractional allocation, or None when infeasible.

    Solves a linear feasibility program over all enumerated independent
    sets: fractions >= 0, total <= 1, per-vertex marginals equal to the
    requested allocation.  Clique (and odd-hole) constraints are necessary
    but not sufficient; this oracle is exact at desk scale.
    """
    probs = alloc.probs
    missing = set(g.vertices) - set(probs)
    if missing:
        raise ValueError(f"allocation missing vertices {missing}")
    sets = [s for s in enumerate_independent_sets(g) if s]
    verts = list(g.vertices)
    if not verts:
        return []
    row = {v: i for i, v in enumerate(verts)}
    n_sets = len(sets)
    a_eq = np.zeros((len(verts), n_sets))
    for j, s in enumerate(sets):
        for v in s:
            a_eq[row[v], j] = 1.0
    b_eq = np.array([probs[v] for v in verts])
    a_ub = np.ones((1, n_sets))
    b_ub = np.array([1.0])
    res = linprog(
        c=np.zeros(n_sets),
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=[(0, 1)] * n_sets,
        method="highs",
    )
    if not res.success:
        return None
    schedule = [
        (sets[j], float(res.x[j])) for j in range(n_sets) if res.x[j] > 1e-12
    ]
    # reconstruct marginals as a guard against solver slop
    recon = {v: 0.0 for v in verts}
    for s, f in schedule:
        for v in s:
            recon[v] += f
    if any(abs(recon[v] - probs[v]) > 1e-9 for v in verts):
        return None
    return schedule


# -- plain-text edge-list I/O ----------------------------------------------
#
# Format: header line `spot M contract N`, then one `u v` pair per line.
# Vertex ids are 1..M for spot users and M+1..M+N for contract users.


def write_edge_list(g: ConflictGraph, path: str) -> None:
    m, n = len(g.spot_vertices), len(g.contract_vertices)
    relabel = {v: i + 1 for i, v in enumerate(g.vertices)}
    lines = [f"spot {m} contract {n}"]
    for u, v in sorted(_normalize_edge(relabel[a], relabel[b]) for a, b in g.edges):
        lines.append(f"{u} {v}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_edge_list(path: str) -> ConflictGraph:
    with open(path) as fh:
        raw = [ln.strip() for ln in fh]
    lines = [ln for ln in raw if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty edge-list file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "spot" or head[2] != "contract":
        raise ValueError(f"{path}: bad header {lines[0]!r}, expected 'spot M contract N'")
    m, n = int(head[1]), int(head[3])
    spot = tuple(range(1, m + 1))
    contract = tuple(range(m + 1, m + n + 1))
    edges = set()
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"{path}: bad edge line {ln!r}")
        edges.add(_normalize_edge(int(parts[0]), int(parts[1])))
    return ConflictGraph(spot, contract, frozenset(edges))
