"""Experiment harness: random geometric topologies, baseline allocation
strategies, full-period simulation, the expected-vs-strict contract-demand
gap, and CSV emission for the figure pipeline.

All randomness flows from one master seed through named substreams
(topology, draws, strategy, epsilon), so identical (config, seed) runs
produce byte-identical CSVs, and matched seeds share topologies and
spectrum draws across parameter-grid cells.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .graph import ConflictGraph, side_market
from .market import (
    Contract,
    MarketInstance,
    SpectrumDraw,
    UtilityModel,
    WelfareLedger,
    contract_marginal_value,
    realized_welfare,
    sample_period,
)
from .mechanism import EXACT, BidVector, run_vcg
from .mwis import MaxWeightBatch
from .policy import MonteCarloSpec, Policy, solve_shadow_prices
from .rng import substream

STRATEGIES = (
    "Optimal",
    "SpotOnly",
    "ContractFirst",
    "ContractRandom",
    "ContractLast",
    "ContractRandomDn",
)


@dataclass(frozen=True)
class TopologySpec:
    """Protocol-model geometry: spot users placed uniformly at random in a
    square, contract users at fixed coordinates; an edge joins two users
    whenever their distance is within the larger of their two ranges."""

    area: float = 1000.0
    n_spot: int = 20
    contract_positions: Tuple[Tuple[float, float], ...] = (
        (300.0, 400.0),
        (500.0, 600.0),
        (700.0, 400.0),
    )
    irs: float = 300.0
    irc: float = 300.0


@dataclass(frozen=True)
class ExperimentResult:
    strategy: str
    mean_welfare: float
    per_seed: Tuple[float, ...]
    config_echo: Dict[str, object] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.per_seed:
            want = float(np.mean(self.per_seed))
            if abs(self.mean_welfare - want) > 1e-9:
                raise ValueError("mean_welfare must equal the per-seed average")

    @property
    def stderr(self) -> float:
        if len(self.per_seed) < 2:
            return 0.0
        return float(np.std(self.per_seed) / np.sqrt(len(self.per_seed)))


def generate_topology(
    spec: TopologySpec, rng: np.random.Generator
) -> Tuple[ConflictGraph, Dict[int, Tuple[float, float]]]:
    """Random geometric conflict graph; spot ids 1..M, contract M+1..M+N."""
    m = spec.n_spot
    n = len(spec.contract_positions)
    pos: Dict[int, Tuple[float, float]] = {}
    coords = rng.uniform(0.0, spec.area, size=(m, 2))
    for i in range(m):
        pos[i + 1] = (float(coords[i, 0]), float(coords[i, 1]))
    for j, (x, y) in enumerate(spec.contract_positions):
        pos[m + 1 + j] = (float(x), float(y))
    ranges = {v: (spec.irs if v <= m else spec.irc) for v in pos}
    edges = set()
    verts = sorted(pos)
    for a in range(len(verts)):
        for b in range(a + 1, len(verts)):
            u, v = verts[a], verts[b]
            dx = pos[u][0] - pos[v][0]
            dy = pos[u][1] - pos[v][1]
            if np.hypot(dx, dy) <= max(ranges[u], ranges[v]):
                edges.add((u, v))
    graph = ConflictGraph(
        tuple(range(1, m + 1)), tuple(range(m + 1, m + n + 1)), frozenset(edges)
    )
    return graph, pos


class PeriodEvaluator:
    """Vectorized per-period winner determination for one instance."""

    def __init__(self, inst: MarketInstance):
        self.inst = inst
        g = inst.graph
        self.full = MaxWeightBatch(g)
        self.spot = MaxWeightBatch(g.spot_subgraph())
        self.m = len(g.spot_vertices)
        self.contract_ids = list(g.contract_vertices)

    def policy_weights(self, thetas: np.ndarray, lambdas: Dict[int, float]) -> np.ndarray:
        """Theorem-1 weight matrix for a batch of idle-slot utilities."""
        w = np.array(thetas, copy=True)
        for j, n in enumerate(self.contract_ids):
            c = self.inst.contracts[n]
            w[:, self.m + j] = (
                c.tau * contract_marginal_value(c)
                + (1.0 - c.tau) * thetas[:, self.m + j]
                - lambdas.get(n, 0.0)
            )
        return w

    def optimal_allocation(
        self, draws: Sequence[SpectrumDraw], policy: Policy
    ) -> List[FrozenSet[int]]:
        idle = [t for t, d in enumerate(draws) if d.xi == 1]
        out: List[FrozenSet[int]] = [frozenset() for _ in draws]
        if not idle:
            return out
        thetas = np.stack([draws[t].theta for t in idle])
        weights = self.policy_weights(thetas, policy.lambdas)
        for t, winners in zip(idle, self.full.argmax_sets(weights)):
            out[t] = winners
        return out

    def spot_best(
        self, draws: Sequence[SpectrumDraw], forced: Optional[Dict[int, FrozenSet[int]]] = None
    ) -> List[FrozenSet[int]]:
        """Side-market optimum per idle slot on top of forced contract sets."""
        g = self.inst.graph
        out: List[FrozenSet[int]] = [frozenset() for _ in draws]
        idle = [t for t, d in enumerate(draws) if d.xi == 1]
        if not idle:
            return out
        groups: Dict[FrozenSet[int], List[int]] = {}
        for t in idle:
            key = forced.get(t, frozenset()) if forced else frozenset()
            groups.setdefault(key, []).append(t)
        for key, slots in groups.items():
            allowed = side_market(g, key)
            mask = self.spot.mask_for(allowed)
            thetas = np.stack([draws[t].theta[: self.m] for t in slots])
            for t, winners in zip(slots, self.spot.argmax_sets(thetas, mask)):
                out[t] = winners | key
        return out


def _contract_plan(
    inst: MarketInstance,
    draws: Sequence[SpectrumDraw],
    counts: Dict[int, int],
    order: str,
    rng: Optional[np.random.Generator],
) -> Dict[int, FrozenSet[int]]:
    """Assign each contract user its count of idle slots, avoiding slots
    already claimed by a conflicting contract user.  Order 'first' takes
    the user's highest-utility slots, 'last' the lowest, 'random' an
    arbitrary subset."""
    g = inst.graph
    idle = [t for t, d in enumerate(draws) if d.xi == 1]
    taken: Dict[int, set] = {t: set() for t in idle}
    for n in sorted(inst.contracts):
        c_n = counts.get(n, 0)
        if c_n <= 0:
            continue
        candidates = [
            t for t in idle if not any(g.has_edge(n, o) for o in taken[t])
        ]
        pos = g._index[n]
        if order == "first":
            candidates.sort(key=lambda t: (-draws[t].theta[pos], t))
        elif order == "last":
            candidates.sort(key=lambda t: (draws[t].theta[pos], t))
        elif order == "random":
            if rng is None:
                raise ValueError("random contract plan needs an RNG")
            candidates = list(rng.permutation(candidates))
        else:
            raise ValueError(f"unknown plan order {order!r}")
        for t in candidates[:c_n]:
            taken[t].add(n)
    return {t: frozenset(s) for t, s in taken.items() if s}


def _strategy_allocation(
    inst: MarketInstance,
    evaluator: PeriodEvaluator,
    policy: Policy,
    strategy: str,
    draws: Sequence[SpectrumDraw],
    rng: Optional[np.random.Generator],
) -> Tuple[List[FrozenSet[int]], Dict[int, float]]:
    """Winning sets per slot plus the delivery basis used for penalties."""
    if strategy == "Optimal":
        alloc = evaluator.optimal_allocation(draws, policy)
        basis = {n: policy.expected_demand.get(n, (0.0, 0.0))[0] for n in inst.contracts}
        return alloc, basis
    if strategy == "SpotOnly":
        alloc = evaluator.spot_best(draws)
        return alloc, {n: 0.0 for n in inst.contracts}
    if strategy in ("ContractFirst", "ContractRandom", "ContractLast"):
        counts = {
            n: int(round(policy.expected_demand.get(n, (0.0, 0.0))[0]))
            for n in inst.contracts
        }
        order = {"ContractFirst": "first", "ContractRandom": "random", "ContractLast": "last"}[strategy]
    elif strategy == "ContractRandomDn":
        counts = {n: int(round(inst.contracts[n].D)) for n in inst.contracts}
        order = "random"
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    forced = _contract_plan(inst, draws, counts, order, rng)
    alloc = evaluator.spot_best(draws, forced)
    delivered = {n: 0.0 for n in inst.contracts}
    for s in forced.values():
        for n in s:
            delivered[n] += 1.0
    return alloc, delivered


def run_baseline(
    inst: MarketInstance,
    policy: Policy,
    strategy: str,
    period_draws: Sequence[Sequence[SpectrumDraw]],
    seed: int = 0,
) -> ExperimentResult:
    """Evaluate one allocation strategy over the given periods.

    The welfare metric is the expected-penalty basis: realized utilization
    welfare plus contract terms with penalties at the strategy's delivery
    level, the same objective the off-line policy optimizes.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
    evaluator = PeriodEvaluator(inst)
    rng = substream(seed, "strategy", strategy)
    welfares = []
    for draws in period_draws:
        alloc, basis = _strategy_allocation(inst, evaluator, policy, strategy, draws, rng)
        ledger = realized_welfare(inst, alloc, draws, expected_demand=basis)
        welfares.append(float(ledger.expected_basis_total))
    return ExperimentResult(
        strategy=strategy,
        mean_welfare=float(np.mean(welfares)),
        per_seed=tuple(welfares),
        seed=seed,
    )


def run_period(
    inst: MarketInstance,
    policy: Policy,
    solver: str = EXACT,
    seed: int = 0,
) -> Tuple[WelfareLedger, List[dict]]:
    """Simulate one full period slot by slot through the on-line auction.

    Returns the welfare ledger and an auction trace with one row per
    (idle slot, SU): slot, su_id, role, bid, weight, won, payment.
    """
    rng = substream(seed, "draws")
    draws = sample_period(inst, rng)
    g = inst.graph
    allocations: List[FrozenSet[int]] = []
    trace: List[dict] = []
    for t, draw in enumerate(draws):
        if draw.xi != 1:
            allocations.append(frozenset())
            continue
        bids = BidVector.truthful(draw)
        outcome = run_vcg(inst, policy, bids, solver)
        allocations.append(outcome.winners)
        for v in g.vertices:
            trace.append(
                {
                    "slot": t,
                    "su_id": v,
                    "role": "spot" if g.is_spot(v) else "contract",
                    "bid": float(draw.theta[g._index[v]]),
                    "weight": float(outcome.weights[v]),
                    "won": int(v in outcome.winners),
                    "payment": float(outcome.payments[v]),
                }
            )
    expected = {n: policy.expected_demand.get(n, (0.0, 0.0))[0] for n in inst.contracts}
    ledger = realized_welfare(inst, allocations, draws, expected_demand=expected)
    return ledger, trace


def expected_vs_strict_gap(
    inst: MarketInstance,
    T_values: Sequence[int],
    mc: MonteCarloSpec = MonteCarloSpec(samples=2000),
    n_periods: int = 50,
    pol_tol: float = 0.02,
) -> Dict[int, Tuple[float, float]]:
    """Welfare gap between expected-demand and strict-demand accounting.

    For each horizon T the contract demands are scaled proportionally (the
    market keeps the same shape), the policy is re-solved, and n_periods
    full periods are simulated under it.  Gap = 1 - W_strict / W_expected.
    """
    out: Dict[int, Tuple[float, float]] = {}
    for T in T_values:
        scale = T / inst.T
        contracts = {
            n: dataclasses.replace(c, D=c.D * scale) for n, c in inst.contracts.items()
        }
        inst_t = dataclasses.replace(inst, T=int(T), contracts=contracts)
        policy = solve_shadow_prices(inst_t, mc, tol=pol_tol, max_iter=100)
        evaluator = PeriodEvaluator(inst_t)
        gaps = []
        for p in range(n_periods):
            rng = substream(mc.seed, "gap-period", T, p)
            draws = sample_period(inst_t, rng)
            alloc = evaluator.optimal_allocation(draws, policy)
            basis = {n: policy.expected_demand[n][0] for n in inst_t.contracts}
            ledger = realized_welfare(inst_t, alloc, draws, expected_demand=basis)
            gaps.append(1.0 - ledger.total / ledger.expected_basis_total)
        out[int(T)] = (float(np.mean(gaps)), float(np.std(gaps) / np.sqrt(len(gaps))))
    return out


DEFAULT_CONTRACT = Contract(
    B=10.0, D=45.0, penalty_kind="soft", unit_penalty=1.0, tau=0.3
)
DEFAULT_RHO = 0.6
DEFAULT_K = 3
DEFAULT_T = 100
DEFAULT_IRC_GRID = (100.0, 200.0, 300.0, 400.0, 500.0)


def default_market(
    seed: int = 0,
    irc: float = 300.0,
    contract: Contract = DEFAULT_CONTRACT,
    rho: float = DEFAULT_RHO,
    K: int = DEFAULT_K,
    T: int = DEFAULT_T,
) -> MarketInstance:
    """The canonical experiment market: 20 random spot users and 3 contract
    users at fixed coordinates in a 1000 m square.  The economic terms are
    assumptions (calibrated to reproduce the reported headline numbers);
    the geometry follows the published setup."""
    spec = dataclasses.replace(TopologySpec(), irc=irc)
    graph, _ = generate_topology(spec, substream(seed, "topology"))
    contracts = {n: contract for n in graph.contract_vertices}
    return MarketInstance(
        graph=graph, contracts=contracts, utilities=UtilityModel(), rho=rho, K=K, T=T
    )


@dataclass(frozen=True)
class SweepCell:
    irc: float
    strategy: str
    seed: int
    welfare: float


def fig5_sweep(
    base_spec: TopologySpec,
    contracts_template: Sequence[Contract],
    utilities: UtilityModel,
    rho: float,
    K: int,
    T: int,
    irc_values: Sequence[float],
    n_seeds: int,
    master_seed: int,
    pol_samples: int = 3000,
    strategies: Sequence[str] = STRATEGIES,
) -> List[SweepCell]:
    """Welfare-vs-IRc comparison across strategies.

    Matched seeds: spot positions and period draws depend on the seed but
    not on IRc, so SpotOnly is exactly flat across the IRc grid.
    """
    cells: List[SweepCell] = []
    for seed_idx in range(n_seeds):
        topo_rng_state = substream(master_seed, "topology", seed_idx)
        coords = topo_rng_state.uniform(0.0, base_spec.area, size=(base_spec.n_spot, 2))
        for irc in irc_values:
            spec = dataclasses.replace(base_spec, irc=float(irc))
            graph = _graph_from_coords(spec, coords)
            contracts = {
                n: contracts_template[j]
                for j, n in enumerate(graph.contract_vertices)
            }
            inst = MarketInstance(
                graph=graph, contracts=contracts, utilities=utilities, rho=rho, K=K, T=T
            )
            policy = solve_shadow_prices(
                inst,
                MonteCarloSpec(samples=pol_samples, seed=int(substream(master_seed, "policy", seed_idx).integers(2**31))),
                tol=0.02,
                max_iter=100,
            )
            draw_rng = substream(master_seed, "draws", seed_idx)
            draws = sample_period(inst, draw_rng)
            evaluator = PeriodEvaluator(inst)
            for strategy in strategies:
                srng = substream(master_seed, "strategy", strategy, seed_idx, irc)
                alloc, basis = _strategy_allocation(
                    inst, evaluator, policy, strategy, draws, srng
                )
                ledger = realized_welfare(inst, alloc, draws, expected_demand=basis)
                cells.append(
                    SweepCell(
                        irc=float(irc),
                        strategy=strategy,
                        seed=seed_idx,
                        welfare=float(ledger.expected_basis_total),
                    )
                )
    return cells


def _graph_from_coords(spec: TopologySpec, coords: np.ndarray) -> ConflictGraph:
    m = spec.n_spot
    n = len(spec.contract_positions)
    pos = {i + 1: (float(coords[i, 0]), float(coords[i, 1])) for i in range(m)}
    for j, (x, y) in enumerate(spec.contract_positions):
        pos[m + 1 + j] = (float(x), float(y))
    ranges = {v: (spec.irs if v <= m else spec.irc) for v in pos}
    edges = set()
    verts = sorted(pos)
    for a in range(len(verts)):
        for b in range(a + 1, len(verts)):
            u, v = verts[a], verts[b]
            if np.hypot(pos[u][0] - pos[v][0], pos[u][1] - pos[v][1]) <= max(
                ranges[u], ranges[v]
            ):
                edges.add((u, v))
    return ConflictGraph(
        tuple(range(1, m + 1)), tuple(range(m + 1, m + n + 1)), frozenset(edges)
    )


def summarize_sweep(cells: Sequence[SweepCell]) -> List[dict]:
    """Aggregate sweep cells to (irc, strategy) means with stderr."""
    keys = sorted({(c.irc, c.strategy) for c in cells}, key=lambda k: (k[0], STRATEGIES.index(k[1])))
    rows = []
    for irc, strategy in keys:
        vals = np.array([c.welfare for c in cells if c.irc == irc and c.strategy == strategy])
        rows.append(
            {
                "irc": irc,
                "strategy": strategy,
                "mean_welfare": float(vals.mean()),
                "stderr": float(vals.std() / np.sqrt(len(vals))) if len(vals) > 1 else 0.0,
                "n_seeds": int(len(vals)),
            }
        )
    return rows


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    """Deterministic CSV: floats via repr, one trailing newline."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for x in row:
            if isinstance(x, float):
                cells.append(repr(x))
            else:
                cells.append(str(x))
        lines.append(",".join(cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
