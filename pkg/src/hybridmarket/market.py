"""Market primitives: contracts, utility distributions, spectrum draws,
welfare accounting, and the weight rule that turns the off-line policy
into a per-slot MWIS problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .graph import ConflictGraph, VertexWeights

SOFT = "soft"
HARD = "hard"


@dataclass(frozen=True)
class Contract:
    """Futures contract: payment B for demand D, with a penalty scheme.

    Soft contracts charge unit_penalty per undelivered spectrum; hard
    contracts charge total_penalty once for any shortfall.  tau weighs the
    user's personal welfare against the utilization-based welfare.
    """

    B: float
    D: float
    penalty_kind: str = SOFT
    unit_penalty: float = 0.0
    total_penalty: float = 0.0
    tau: float = 0.5

    def __post_init__(self) -> None:
        if self.penalty_kind not in (SOFT, HARD):
            raise ValueError(f"penalty_kind must be 'soft' or 'hard', got {self.penalty_kind!r}")
        if self.B < 0 or self.D < 0:
            raise ValueError("payment and demand must be nonnegative")
        if self.unit_penalty < 0 or self.total_penalty < 0:
            raise ValueError("penalties must be nonnegative")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")


def penalty(contract: Contract, delivered: float) -> float:
    """Penalty for delivering `delivered` spectrums against the contract.

    Soft: unit_penalty per missing unit.  Hard: the full total_penalty for
    any shortfall, however small.
    """
    if delivered < 0:
        raise ValueError("delivered count must be nonnegative")
    shortfall = contract.D - delivered
    if contract.penalty_kind == SOFT:
        return max(0.0, shortfall) * contract.unit_penalty
    return contract.total_penalty if shortfall > 1e-12 else 0.0


@dataclass(frozen=True)
class UtilityModel:
    """Per-SU marginal utility distribution, i.i.d. across slots/channels.

    kind="uniform": utilities drawn from U[lo, hi].
    kind="shannon": utility = preference * bandwidth * log2(1 + power*|H|^2/noise)
    with Rayleigh fading |H| and preference ~ U[pref_lo, pref_hi].

    An optional common-quality factor q is shared by all SUs within one
    draw (multiplicative or additive), partially correlating utilities.
    """

    kind: str = "uniform"
    lo: float = 0.0
    hi: float = 1.0
    bandwidth: float = 1.0
    power: float = 1.0
    noise: float = 1.0
    fading_scale: float = 1.0
    pref_lo: float = 1.0
    pref_hi: float = 1.0
    q_kind: str = "none"  # none | multiplicative | additive
    q_lo: float = 1.0
    q_hi: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("uniform", "shannon"):
            raise ValueError(f"unknown utility kind {self.kind!r}")
        if self.q_kind not in ("none", "multiplicative", "additive"):
            raise ValueError(f"unknown common-quality kind {self.q_kind!r}")
        if self.kind == "uniform" and not 0.0 <= self.lo <= self.hi:
            raise ValueError("uniform utilities need 0 <= lo <= hi")

    def sample(self, rng: np.random.Generator, n_users: int, n_draws: int) -> np.ndarray:
        """(n_draws, n_users) utility matrix; entries are finite and >= 0."""
        if self.kind == "uniform":
            u = rng.uniform(self.lo, self.hi, size=(n_draws, n_users))
        else:
            h = rng.rayleigh(self.fading_scale, size=(n_draws, n_users))
            rate = self.bandwidth * np.log2(1.0 + self.power * h**2 / self.noise)
            pref = rng.uniform(self.pref_lo, self.pref_hi, size=(n_draws, n_users))
            u = pref * rate
        if self.q_kind == "multiplicative":
            q = rng.uniform(self.q_lo, self.q_hi, size=(n_draws, 1))
            u = u * q
        elif self.q_kind == "additive":
            q = rng.uniform(self.q_lo, self.q_hi, size=(n_draws, 1))
            u = np.maximum(u + q, 0.0)
        return u

    def upper_bound(self) -> Optional[float]:
        """Supremum of the utility support, or None when unbounded."""
        if self.kind != "uniform":
            return None
        hi = self.hi
        if self.q_kind == "multiplicative":
            hi *= self.q_hi
        elif self.q_kind == "additive":
            hi += self.q_hi
        return hi


@dataclass(frozen=True)
class SpectrumDraw:
    """One spectrum's realized information: utilities plus availability."""

    theta: np.ndarray  # length M+N, spot utilities then contract utilities
    xi: int

    def __post_init__(self) -> None:
        theta = np.asarray(self.theta, dtype=float)
        object.__setattr__(self, "theta", theta)
        if self.xi not in (0, 1):
            raise ValueError("availability bit must be 0 or 1")
        if not np.all(np.isfinite(theta)) or np.any(theta < 0):
            raise ValueError("utilities must be finite and nonnegative")


@dataclass(frozen=True)
class MarketInstance:
    """A hybrid market: conflict graph, contracts, utility law, supply."""

    graph: ConflictGraph
    contracts: Dict[int, Contract]
    utilities: UtilityModel = field(default_factory=UtilityModel)
    rho: float = 1.0
    K: int = 1
    T: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.rho <= 1.0:
            raise ValueError("rho must lie in (0, 1]")
        if self.K < 1 or self.T < 1:
            raise ValueError("need at least one channel and one slot")
        if set(self.contracts) != set(self.graph.contract_vertices):
            raise ValueError("contracts must cover exactly the contract vertices")

    @property
    def S(self) -> int:
        return self.K * self.T

    @property
    def n_spot(self) -> int:
        return len(self.graph.spot_vertices)

    @property
    def n_contract(self) -> int:
        return len(self.graph.contract_vertices)

    def contract_utility(self, draw: SpectrumDraw, n: int) -> float:
        return float(draw.theta[self.graph._index[n]])

    def spot_utility(self, draw: SpectrumDraw, m: int) -> float:
        return float(draw.theta[self.graph._index[m]])


def sample_thetas(inst: MarketInstance, rng: np.random.Generator, n_draws: int) -> np.ndarray:
    """(n_draws, M+N) utility matrix in graph vertex order."""
    return inst.utilities.sample(rng, inst.graph.n_vertices, n_draws)


def sample_spectrum(inst: MarketInstance, rng: np.random.Generator) -> SpectrumDraw:
    """Draw one spectrum: idle with probability rho, utilities i.i.d."""
    xi = 1 if rng.random() < inst.rho else 0
    theta = sample_thetas(inst, rng, 1)[0]
    return SpectrumDraw(theta=theta, xi=xi)


def sample_period(
    inst: MarketInstance, rng: np.random.Generator
) -> List[SpectrumDraw]:
    """All K*T spectrum draws for one scheduling period."""
    xi = (rng.random(inst.S) < inst.rho).astype(int)
    thetas = sample_thetas(inst, rng, inst.S)
    return [SpectrumDraw(theta=thetas[t], xi=int(xi[t])) for t in range(inst.S)]


def contract_marginal_value(contract: Contract) -> float:
    """Per-unit personal value a contract user attaches to one spectrum.

    Soft contracts: the unit penalty avoided.  Hard contracts: the
    equality constraint makes any constant equivalent up to a shift of the
    shadow price; total_penalty/D is the calibrated stand-in.
    """
    if contract.penalty_kind == SOFT:
        return contract.unit_penalty
    if contract.D <= 0:
        return 0.0
    return contract.total_penalty / contract.D


def theorem1_weights(
    inst: MarketInstance,
    lambdas: Dict[int, float],
    draw: SpectrumDraw,
    satisfied: Optional[Iterable[int]] = None,
) -> VertexWeights:
    """Vertex weights that reduce the optimal policy to a per-slot MWIS.

    Spot user m keeps its utility v_m.  Contract user n gets
    tau*P + (1-tau)*u_n - lambda_n, with P the per-unit contract value.
    For hard contracts, users outside the satisfied set are frozen out
    with -inf weight (their allocation is identically zero).
    """
    if draw.xi != 1:
        raise ValueError("busy spectrum: allocation of busy spectrum is identically zero")
    g = inst.graph
    values: Dict[int, float] = {}
    for m in g.spot_vertices:
        values[m] = inst.spot_utility(draw, m)
    sat = None if satisfied is None else set(satisfied)
    for n in g.contract_vertices:
        c = inst.contracts[n]
        if c.penalty_kind == HARD and sat is not None and n not in sat:
            values[n] = float("-inf")
            continue
        values[n] = (
            c.tau * contract_marginal_value(c)
            + (1.0 - c.tau) * inst.contract_utility(draw, n)
            - lambdas.get(n, 0.0)
        )
    return VertexWeights(values)


@dataclass(frozen=True)
class WelfareLedger:
    """Realized welfare decomposition for one scheduling period.

    `total` uses strict penalties (realized delivery counts); when the
    policy's expected deliveries are supplied, `expected_basis_total`
    evaluates penalties at those expectations instead (the objective the
    off-line policy optimizes).
    """

    spot_welfare: Dict[int, float]
    contract_personal: Dict[int, float]
    contract_utilization: Dict[int, float]
    penalties: Dict[int, float]
    delivered: Dict[int, int]
    total: float
    expected_basis_total: Optional[float] = None

    def decomposed_total(self, contracts: Dict[int, Contract]) -> float:
        out = sum(self.spot_welfare.values())
        for n, c in contracts.items():
            out += c.tau * self.contract_personal[n] + (1.0 - c.tau) * self.contract_utilization[n]
        return out


def realized_welfare(
    inst: MarketInstance,
    allocations: Sequence[Iterable[int]],
    draws: Sequence[SpectrumDraw],
    expected_demand: Optional[Dict[int, float]] = None,
) -> WelfareLedger:
    """Aggregate a period of winning sets into the welfare ledger.

    Every winning set must be independent, and winners may appear only on
    idle slots.
    """
    if len(allocations) != len(draws):
        raise ValueError("one winning set per spectrum draw required")
    g = inst.graph
    spot_w = {m: 0.0 for m in g.spot_vertices}
    util_w = {n: 0.0 for n in g.contract_vertices}
    delivered = {n: 0 for n in g.contract_vertices}
    for winners, draw in zip(allocations, draws):
        wset = frozenset(winners)
        if not wset:
            continue
        if draw.xi != 1:
            raise ValueError("winners assigned to a busy spectrum")
        if not g.is_independent(wset):
            raise ValueError(f"winning set {sorted(wset)} is not independent")
        for v in wset:
            if g.is_spot(v):
                spot_w[v] += inst.spot_utility(draw, v)
            else:
                util_w[v] += inst.contract_utility(draw, v)
                delivered[v] += 1
    personal = {}
    pens = {}
    for n, c in inst.contracts.items():
        pens[n] = penalty(c, float(delivered[n]))
        personal[n] = c.B - pens[n]
    total = sum(spot_w.values()) + sum(
        c.tau * personal[n] + (1.0 - c.tau) * util_w[n] for n, c in inst.contracts.items()
    )
    expected_total = None
    if expected_demand is not None:
        expected_total = sum(spot_w.values())
        for n, c in inst.contracts.items():
            w_exp = c.B - penalty(c, float(expected_demand[n]))
            expected_total += c.tau * w_exp + (1.0 - c.tau) * util_w[n]
    return WelfareLedger(
        spot_welfare=spot_w,
        contract_personal=personal,
        contract_utilization=util_w,
        penalties=pens,
        delivered=delivered,
        total=total,
        expected_basis_total=expected_total,
    )
