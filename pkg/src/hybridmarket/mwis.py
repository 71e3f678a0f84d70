"""Maximum-weight-independent-set solvers.

Three flavours: an exact branch-and-bound (deterministic tie-break), the
greedy heuristic used by the per-slot VCG-like auction, and a synthetic
degradation mode that scales the exact optimum by a random performance
ratio drawn from [e0, 1].

Negative weights are admissible everywhere: excluding a negative-weight
vertex never lowers the total, so solvers only ever select strictly
positive vertices and the empty set is a legal optimum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .graph import ConflictGraph, EnumerationLimitError, VertexWeights, _bits

EXACT_CAP = 25
_TIE_EPS = 1e-12


@dataclass(frozen=True)
class MwisResult:
    set: FrozenSet[int]
    weight: float
    exact: bool
    ratio_sample: Optional[float] = None


def _canonical_weight(members: Sequence[int], w: Dict[int, float]) -> float:
    """Sum in sorted-vertex order so ties compare reproducibly."""
    return float(sum(w[v] for v in sorted(members)))


def mwis_exact(
    g: ConflictGraph,
    w: VertexWeights,
    restrict_to: Optional[Iterable[int]] = None,
) -> MwisResult:
    """Exact MWIS over the induced subgraph; empty set allowed.

    Ties between equal-weight optima break to the lexicographically
    smallest sorted vertex-id tuple.
    """
    verts = g.vertices
    idx = g._index
    adj = g._adj
    if restrict_to is None:
        positions = list(range(g.n_vertices))
    else:
        positions = sorted(idx[v] for v in restrict_to)
    if len(positions) > EXACT_CAP:
        raise EnumerationLimitError(
            f"instance too large for exact MWIS: {len(positions)} > {EXACT_CAP} vertices"
        )
    # only strictly positive vertices can improve the total
    cand = [p for p in positions if w[verts[p]] > 0.0]
    # order by descending weight for strong pruning
    cand.sort(key=lambda p: -w[verts[p]])
    weights = [w[verts[p]] for p in cand]
    suffix = [0.0] * (len(cand) + 1)
    for i in range(len(cand) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + weights[i]
    pos_of = {p: i for i, p in enumerate(cand)}
    # adjacency restricted to candidate indices
    local_adj = []
    for p in cand:
        m = 0
        for q in _bits(adj[p]):
            if q in pos_of:
                m |= 1 << pos_of[q]
        local_adj.append(m)

    best_key: List[Tuple[float, Tuple[int, ...]]] = [(0.0, ())]

    def consider(members: List[int]) -> None:
        ids = tuple(sorted(verts[cand[i]] for i in members))
        weight = _canonical_weight(ids, w.weights)
        cur_w, cur_ids = best_key[0]
        if weight > cur_w + _TIE_EPS or (
            abs(weight - cur_w) <= _TIE_EPS and ids < cur_ids
        ):
            best_key[0] = (weight, ids)

    n = len(cand)

    def dfs(i: int, avail: int, members: List[int], acc: float) -> None:
        # drop candidates below i that are no longer available
        while i < n and not (avail >> i) & 1:
            i += 1
        if i >= n:
            consider(members)
            return
        if acc + suffix[i] < best_key[0][0] - _TIE_EPS:
            return
        # include i
        members.append(i)
        dfs(i + 1, avail & ~local_adj[i] & ~(1 << i), members, acc + weights[i])
        members.pop()
        # exclude i
        dfs(i + 1, avail & ~(1 << i), members, acc)

    dfs(0, (1 << n) - 1 if n else 0, [], 0.0)
    weight, ids = best_key[0]
    return MwisResult(set=frozenset(ids), weight=weight, exact=True)


def mwis_greedy(
    g: ConflictGraph,
    w: VertexWeights,
    restrict_to: Optional[Iterable[int]] = None,
) -> MwisResult:
    """Greedy MWIS: repeatedly take the heaviest surviving vertex and
    remove its neighbors; stops when no positive-weight vertex survives.

    Weight ties break to the lowest vertex id.
    """
    verts = g.vertices
    idx = g._index
    adj = g._adj
    if restrict_to is None:
        alive = set(range(g.n_vertices))
    else:
        alive = {idx[v] for v in restrict_to}
    chosen: List[int] = []
    while True:
        best_p = None
        best_w = 0.0
        for p in alive:
            wv = w[verts[p]]
            if wv > best_w + _TIE_EPS or (
                best_p is not None
                and abs(wv - best_w) <= _TIE_EPS
                and wv > 0.0
                and verts[p] < verts[best_p]
            ):
                best_p, best_w = p, wv
        if best_p is None:
            break
        chosen.append(best_p)
        alive.discard(best_p)
        alive -= {q for q in _bits(adj[best_p])}
    ids = frozenset(verts[p] for p in chosen)
    return MwisResult(set=ids, weight=_canonical_weight(ids, w.weights), exact=False)


def mwis_degraded(
    g: ConflictGraph,
    w: VertexWeights,
    restrict_to: Optional[Iterable[int]],
    epsilon_dist: Tuple[float, float],
    rng: np.random.Generator,
) -> MwisResult:
    """Exact MWIS with its achieved value scaled by eps ~ Uniform[e0, 1].

    Models an approximate solver whose performance ratio is a random
    variable; the returned set is the exact one, only the value degrades.
    """
    e0, hi = epsilon_dist
    if not (0.0 <= e0 <= hi <= 1.0):
        raise ValueError(f"invalid performance-ratio interval [{e0}, {hi}]")
    exact = mwis_exact(g, w, restrict_to)
    eps = float(rng.uniform(e0, hi)) if hi > e0 else float(e0)
    return MwisResult(
        set=exact.set,
        weight=eps * exact.weight,
        exact=False,
        ratio_sample=eps,
    )


class MaxWeightBatch:
    """Vectorized MWIS *values* for many weight vectors on one fixed graph.

    Precomputes the maximal independent sets once; a batch evaluation is a
    single matrix product.  Negative weights are clamped to zero per set,
    which is exact for the optimal value (negative vertices never belong
    to an optimum).  Use mwis_exact when the winning set itself matters.
    """

    def __init__(self, g: ConflictGraph):
        from .graph import maximal_independent_sets

        self.graph = g
        self.order = list(g.vertices)
        self.pos = {v: i for i, v in enumerate(self.order)}
        sets = maximal_independent_sets(g)
        if not sets:
            sets = [frozenset()]
        self.sets = sets
        mat = np.zeros((len(sets), len(self.order)))
        for i, s in enumerate(sets):
            for v in s:
                mat[i, self.pos[v]] = 1.0
        self.matrix = mat

    def values(
        self, weights: np.ndarray, mask: Optional[np.ndarray] = None
    ) -> np.ndarray:
        """Optimal values for each row of `weights` (n_batch x n_vertices).

        `mask` restricts the problem to a vertex subset (1 = usable); the
        restriction of a maximal set stays independent, and every
        independent subset extends to some maximal set, so masking the
        clamped matrix product is exact.
        """
        clamped = np.maximum(weights, 0.0)
        if mask is not None:
            clamped = clamped * mask
        if clamped.ndim == 1:
            return float(np.max(self.matrix @ clamped))
        return np.max(clamped @ self.matrix.T, axis=1)

    def argmax_sets(
        self, weights: np.ndarray, mask: Optional[np.ndarray] = None
    ) -> List[FrozenSet[int]]:
        """Winning sets (positive-weight members of the best maximal set).

        Tie handling is by first maximal set in enumeration order, which
        may differ from mwis_exact's lexicographic rule on exact ties.
        """
        clamped = np.maximum(weights, 0.0)
        if mask is not None:
            clamped = clamped * mask
        scores = clamped @ self.matrix.T
        rows = np.argmax(scores, axis=1)
        out = []
        for b, r in enumerate(rows):
            members = [
                v
                for v in self.sets[r]
                if clamped[b, self.pos[v]] > 0.0
            ]
            out.append(frozenset(members))
        return out

    def mask_for(self, allowed: Iterable[int]) -> np.ndarray:
        m = np.zeros(len(self.order))
        for v in allowed:
            m[self.pos[v]] = 1.0
        return m
