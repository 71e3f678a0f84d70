"""Per-slot auctions: exact VCG and the greedy VCG-like mechanism.

Both price winners at their critical value so that truthful reporting is
a dominant strategy.  For the exact solver the critical value coincides
with the classic VCG difference (displaced optimum minus co-winners'
value).  For the greedy solver the displaced-difference formula is *not*
the critical bid and can exceed a winner's own weight, which breaks
voluntary participation; greedy winners are therefore charged their
threshold bid: the heaviest conflicting winner that the greedy run on
the graph without them would have selected.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Optional, Sequence

import numpy as np

from .graph import ConflictGraph, VertexWeights
from .market import MarketInstance, SpectrumDraw, contract_marginal_value, theorem1_weights
from .mwis import MwisResult, mwis_exact, mwis_greedy
from .policy import Policy

EXACT = "exact"
GREEDY = "greedy"


@dataclass(frozen=True)
class BidVector:
    """Reported utilities for one slot, in graph vertex order."""

    reported: np.ndarray
    xi: int = 1

    def __post_init__(self) -> None:
        arr = np.asarray(self.reported, dtype=float)
        object.__setattr__(self, "reported", arr)
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("bids must be finite and nonnegative")

    @staticmethod
    def truthful(draw: SpectrumDraw) -> "BidVector":
        return BidVector(reported=np.array(draw.theta, copy=True), xi=draw.xi)

    def with_report(self, g: ConflictGraph, su_id: int, value: float) -> "BidVector":
        arr = np.array(self.reported, copy=True)
        arr[g._index[su_id]] = value
        return BidVector(reported=arr, xi=self.xi)


@dataclass(frozen=True)
class AuctionOutcome:
    winners: FrozenSet[int]
    payments: Dict[int, float]
    weights: VertexWeights
    solver: str


def _solve(g: ConflictGraph, w: VertexWeights, solver: str,
           restrict_to: Optional[Iterable[int]] = None) -> MwisResult:
    if solver == EXACT:
        return mwis_exact(g, w, restrict_to)
    if solver == GREEDY:
        return mwis_greedy(g, w, restrict_to)
    raise ValueError(f"unknown solver kind {solver!r}")


def run_vcg(
    inst: MarketInstance,
    policy: Policy,
    bids: BidVector,
    solver: str = EXACT,
) -> AuctionOutcome:
    """Allocate one idle spectrum and charge critical prices.

    Weights follow the optimal-policy rule with bids substituted for true
    utilities, so the auction implements the off-line policy on-line.
    Losers pay zero.
    """
    if bids.xi != 1:
        raise ValueError("auction runs on idle spectrums only")
    g = inst.graph
    draw = SpectrumDraw(theta=bids.reported, xi=1)
    satisfied = policy.satisfied_set if policy.kind == "hard" else None
    w = theorem1_weights(inst, policy.lambdas, draw, satisfied=satisfied)
    chosen = _solve(g, w, solver)
    payments = {v: 0.0 for v in g.vertices}
    everyone = set(g.vertices)
    for k in chosen.set:
        others = everyone - {k}
        without_k = _solve(g, w, solver, restrict_to=others)
        if solver == EXACT:
            co_value = chosen.weight - w[k]
            payments[k] = max(0.0, without_k.weight - co_value)
        else:
            blockers = [w[j] for j in without_k.set if g.has_edge(j, k)]
            payments[k] = max(0.0, max(blockers, default=0.0))
    return AuctionOutcome(
        winners=chosen.set, payments=payments, weights=w, solver=solver
    )


def quasi_linear_utility(
    inst: MarketInstance,
    policy: Policy,
    outcome: AuctionOutcome,
    su_id: int,
    true_draw: SpectrumDraw,
) -> float:
    """Winner surplus at the TRUE utility: allocated value minus payment.

    Spot users value the slot at their true utility; contract users value
    it at their true policy weight (the payment is a subsidy against the
    fixed contract terms).
    """
    if su_id not in outcome.winners:
        return 0.0
    g = inst.graph
    if g.is_spot(su_id):
        value = inst.spot_utility(true_draw, su_id)
    else:
        c = inst.contracts[su_id]
        value = (
            c.tau * contract_marginal_value(c)
            + (1.0 - c.tau) * inst.contract_utility(true_draw, su_id)
            - policy.lambdas.get(su_id, 0.0)
        )
    return value - outcome.payments[su_id]


def truthfulness_probe(
    inst: MarketInstance,
    policy: Policy,
    true_draw: SpectrumDraw,
    deviant: int,
    deviations: Sequence[float],
    solver: str = EXACT,
) -> float:
    """Best utility gain the deviant can earn by misreporting.

    Nonpositive (up to float dust) certifies no profitable unilateral
    deviation among the probed misreports.
    """
    truthful_bids = BidVector.truthful(true_draw)
    base = run_vcg(inst, policy, truthful_bids, solver)
    base_u = quasi_linear_utility(inst, policy, base, deviant, true_draw)
    best_gain = 0.0
    for report in deviations:
        bids = truthful_bids.with_report(inst.graph, deviant, float(report))
        outcome = run_vcg(inst, policy, bids, solver)
        u = quasi_linear_utility(inst, policy, outcome, deviant, true_draw)
        best_gain = max(best_gain, u - base_u)
    return best_gain
