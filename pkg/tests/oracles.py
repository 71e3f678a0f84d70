"""Independent brute-force oracles used by the test suite.

Deliberately naive re-implementations: subset enumeration for MWIS and
independence, termwise formula evaluation for marginal welfare.  They
never call the production solvers they are checking.
"""

from __future__ import annotations

from typing import Dict, FrozenSet, List, Optional, Tuple

import numpy as np

from hybridmarket.graph import ConflictGraph

_TIE_EPS = 1e-12


def independent_subsets_bruteforce(g: ConflictGraph) -> List[FrozenSet[int]]:
    verts = list(g.vertices)
    n = len(verts)
    out = []
    for mask in range(1 << n):
        members = [verts[i] for i in range(n) if (mask >> i) & 1]
        ok = True
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                if g.has_edge(members[a], members[b]):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            out.append(frozenset(members))
    return out


def mwis_bruteforce(
    g: ConflictGraph, weights: Dict[int, float]
) -> Tuple[FrozenSet[int], float]:
    """Exhaustive MWIS with the same tie-break: highest canonical weight,
    then lexicographically smallest sorted id tuple; only positive-weight
    vertices kept."""
    best_w = 0.0
    best_ids: Tuple[int, ...] = ()
    for s in independent_subsets_bruteforce(g):
        members = tuple(sorted(v for v in s if weights[v] > 0.0))
        w = float(sum(weights[v] for v in members))
        if w > best_w + _TIE_EPS or (abs(w - best_w) <= _TIE_EPS and members < best_ids):
            best_w, best_ids = w, members
    return frozenset(best_ids), best_w


def mwis_bruteforce_fast(
    adj_masks: List[int], weights: np.ndarray
) -> Tuple[Tuple[int, ...], float]:
    """Vectorized exhaustive MWIS over vertex positions 0..n-1.

    adj_masks[i] is the neighbor bitmask of vertex i.  Returns (sorted
    position tuple, canonical weight); only positive-weight vertices may
    appear, ties break to the lexicographically smallest tuple.  Used for
    the 1000-graph oracle sweep where pure-Python enumeration is too slow.
    """
    n = len(weights)
    pos = [v for v in range(n) if weights[v] > 0.0]
    k = len(pos)
    subsets = np.arange(1 << k, dtype=np.int64)
    ok = np.ones(1 << k, dtype=bool)
    total = np.zeros(1 << k)
    # neighbor masks restricted and renumbered to the positive vertices
    local = []
    for v in pos:
        m = 0
        for j, u in enumerate(pos):
            if (adj_masks[v] >> u) & 1:
                m |= 1 << j
        local.append(m)
    for j, v in enumerate(pos):
        has = ((subsets >> j) & 1) == 1
        ok &= ~(has & ((subsets & local[j]) != 0))
        total = total + has * weights[v]
    total[~ok] = -np.inf
    best = max(0.0, float(total.max())) if total.size else 0.0
    candidates = np.nonzero(ok & (np.abs(total - best) <= _TIE_EPS))[0]
    best_members: Optional[Tuple[int, ...]] = None
    best_w = 0.0
    if best <= _TIE_EPS:
        best_members, best_w = (), 0.0
    for mask in candidates:
        members = tuple(pos[j] for j in range(k) if (int(mask) >> j) & 1)
        w = float(sum(weights[v] for v in members))
        if best_members is None or w > best_w + _TIE_EPS or (
            abs(w - best_w) <= _TIE_EPS and members < best_members
        ):
            best_members, best_w = members, w
    assert best_members is not None
    return best_members, best_w


def random_conflict_graph(
    rng: np.random.Generator,
    n_spot: int,
    n_contract: int,
    p_edge: float,
) -> ConflictGraph:
    spot = tuple(range(1, n_spot + 1))
    contract = tuple(range(n_spot + 1, n_spot + n_contract + 1))
    verts = spot + contract
    edges = set()
    for i in range(len(verts)):
        for j in range(i + 1, len(verts)):
            if rng.random() < p_edge:
                edges.add((verts[i], verts[j]))
    return ConflictGraph(spot, contract, frozenset(edges))


def ring_graph(n: int, spot: bool = True) -> ConflictGraph:
    ids = tuple(range(1, n + 1))
    edges = frozenset((ids[i], ids[(i + 1) % n]) for i in range(n))
    if spot:
        return ConflictGraph(ids, (), edges)
    return ConflictGraph((), ids, edges)


def wheel_graph_6() -> ConflictGraph:
    """Five-vertex ring plus a hub adjacent to every rim vertex."""
    rim = [1, 2, 3, 4, 5]
    edges = {(rim[i], rim[(i + 1) % 5]) for i in range(5)}
    edges |= {(r, 6) for r in rim}
    return ConflictGraph((1, 2, 3, 4, 5, 6), (), frozenset(edges))
