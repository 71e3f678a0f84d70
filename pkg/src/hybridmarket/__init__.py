"""Hybrid futures/spot secondary-spectrum market: allocation engine and
simulation lab."""

from .graph import (
    ConflictGraph,
    FractionalAllocation,
    VertexWeights,
    check_clique_constraints,
    check_schedulable,
    enumerate_independent_sets,
    read_edge_list,
    side_market,
    write_edge_list,
)
from .market import (
    Contract,
    MarketInstance,
    SpectrumDraw,
    UtilityModel,
    WelfareLedger,
    penalty,
    realized_welfare,
    sample_period,
    sample_spectrum,
    theorem1_weights,
)
from .config import load_instance, load_policy, save_policy, write_instance_config
from .lossbound import (
    LossBoundReport,
    analytical_wr_bound,
    approximate_cmw,
    estimate_transfers,
    measure_achieved_wr,
)
from .mechanism import AuctionOutcome, BidVector, run_vcg, truthfulness_probe
from .mwis import MwisResult, mwis_degraded, mwis_exact, mwis_greedy
from .policy import (
    MonteCarloSpec,
    Policy,
    PolicyConvergenceError,
    classify_theta,
    core_marginal_welfare,
    expected_demand,
    sem_oracle_deterministic,
    solve_hard_contracts,
    solve_shadow_prices,
    verify_kkt,
)
from .simlab import (
    ExperimentResult,
    TopologySpec,
    default_market,
    expected_vs_strict_gap,
    generate_topology,
    run_baseline,
    run_period,
)

__version__ = "0.1.0"
