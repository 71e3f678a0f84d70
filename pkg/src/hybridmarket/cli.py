"""Command-line entry points.

Subcommands: solve-policy, auction-trace, lossbound, simulate, sweep, gap.
Every run is pinned by (config file, master seed); outputs are plain CSV
plus a manifest echoing the resolved configuration.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import List, Optional, Sequence

from . import __version__
from .config import (
    format_contract_record,
    load_policy,
    load_setup,
    save_policy,
)
from .lossbound import estimate_transfers
from .policy import MonteCarloSpec, solve_hard_contracts, solve_shadow_prices
from .simlab import (
    DEFAULT_IRC_GRID,
    expected_vs_strict_gap,
    fig5_sweep,
    run_period,
    summarize_sweep,
    write_csv,
)


def _float_list(raw: str) -> List[float]:
    return [float(x) for x in raw.split(",") if x.strip() != ""]


def _int_list(raw: str) -> List[int]:
    return [int(x) for x in raw.split(",") if x.strip() != ""]


def _write_manifest(path: str, config_path: str, args_echo: dict) -> None:
    setup = load_setup(config_path)
    lines = ["[run]"]
    lines.append(f"package_version = {__version__}")
    for key in sorted(args_echo):
        lines.append(f"{key} = {args_echo[key]}")
    lines.append("")
    lines.append("[graph]")
    if setup.graph_path is not None:
        lines.append(f"path = {os.path.basename(setup.graph_path)}")
    else:
        t = setup.topology
        lines.append(f"area = {t.area!r}")
        lines.append(f"spot_users = {t.n_spot}")
        pos = "; ".join(f"{x!r} {y!r}" for x, y in t.contract_positions)
        lines.append(f"contract_positions = {pos}")
        lines.append(f"irs = {t.irs!r}")
        lines.append(f"irc = {t.irc!r}")
    lines.append("")
    lines.append("[contracts]")
    for i, c in enumerate(setup.contracts, start=1):
        lines.append(f"{i} = {format_contract_record(c)}")
    lines.append("")
    lines.append("[utilities]")
    lines.append(f"kind = {setup.utilities.kind}")
    lines.append(f"lo = {setup.utilities.lo!r}")
    lines.append(f"hi = {setup.utilities.hi!r}")
    lines.append("")
    lines.append("[supply]")
    lines.append(f"rho = {setup.rho!r}")
    lines.append(f"K = {setup.K}")
    lines.append(f"T = {setup.T}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _cmd_solve_policy(args) -> int:
    inst = load_setup(args.config).build_instance(args.seed)
    mc = MonteCarloSpec(samples=args.samples, seed=args.seed)
    kinds = {c.penalty_kind for c in inst.contracts.values()}
    if kinds == {"hard"}:
        policy = solve_hard_contracts(inst, mc, tol=args.tol, max_iter=args.max_iter)
    else:
        policy = solve_shadow_prices(inst, mc, tol=args.tol, max_iter=args.max_iter)
    save_policy(policy, args.out)
    print(f"wrote {args.out} ({len(policy.lambdas)} shadow prices, converged={policy.converged})")
    return 0


def _cmd_auction_trace(args) -> int:
    inst = load_setup(args.config).build_instance(args.seed)
    policy = load_policy(args.policy)
    _, trace = run_period(inst, policy, solver=args.solver, seed=args.seed)
    header = ["slot", "su_id", "role", "bid", "weight", "won", "payment"]
    write_csv(args.out, header, [[r[k] for k in header] for r in trace])
    print(f"wrote {args.out} ({len(trace)} rows)")
    return 0


def _cmd_lossbound(args) -> int:
    inst = load_setup(args.config).build_instance(args.seed)
    policy = load_policy(args.policy)
    ids = sorted(inst.contracts)
    header = [
        "e0",
        "eps_bar",
        "achieved_wr",
        "achieved_wr_stderr",
        "bound_wr",
        "bound_wr_stderr",
    ]
    for n in ids:
        header += [f"gamma_{n}", f"gamma_{n}_stderr", f"t_{n}", f"t_{n}_stderr"]
    rows = []
    for e0 in args.e0:
        rep = estimate_transfers(inst, policy, e0, MonteCarloSpec(samples=args.samples, seed=args.seed))
        row = [
            rep.e0,
            rep.eps_bar_min,
            rep.achieved_wr,
            rep.achieved_wr_se,
            rep.bound_wr,
            rep.bound_wr_se,
        ]
        for n in ids:
            row += [rep.gamma[n], rep.gamma_se[n], rep.t_n[n], rep.t_n_se[n]]
        rows.append(row)
    write_csv(args.out, header, rows)
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def _cmd_simulate(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    inst = load_setup(args.config).build_instance(args.seed)
    mc = MonteCarloSpec(samples=args.samples, seed=args.seed)
    policy = solve_shadow_prices(inst, mc, tol=args.tol, max_iter=args.max_iter)
    save_policy(policy, os.path.join(args.out, "policy.ini"))
    ledger, trace = run_period(inst, policy, solver=args.solver, seed=args.seed)
    header = ["slot", "su_id", "role", "bid", "weight", "won", "payment"]
    write_csv(
        os.path.join(args.out, "trace.csv"),
        header,
        [[r[k] for k in header] for r in trace],
    )
    rows = [["total_welfare", ledger.total]]
    rows.append(["expected_basis_welfare", ledger.expected_basis_total])
    for n in sorted(inst.contracts):
        rows.append([f"delivered_{n}", ledger.delivered[n]])
        rows.append([f"penalty_{n}", ledger.penalties[n]])
    for m in inst.graph.spot_vertices:
        rows.append([f"spot_welfare_{m}", ledger.spot_welfare[m]])
    write_csv(os.path.join(args.out, "summary.csv"), ["metric", "value"], rows)
    _write_manifest(
        os.path.join(args.out, "manifest"),
        args.config,
        {"command": "simulate", "seed": args.seed, "solver": args.solver, "samples": args.samples},
    )
    print(f"wrote {args.out}/trace.csv, summary.csv, policy.ini, manifest")
    return 0


def _cmd_sweep(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    setup = load_setup(args.config)
    if args.param != "irc":
        raise SystemExit(f"unsupported sweep parameter {args.param!r} (only 'irc')")
    if setup.topology is None:
        raise SystemExit("sweep over irc needs a generator-based [graph] section")
    cells = fig5_sweep(
        setup.topology,
        setup.contracts,
        setup.utilities,
        setup.rho,
        setup.K,
        setup.T,
        irc_values=args.values,
        n_seeds=args.seeds,
        master_seed=args.seed,
        pol_samples=args.samples,
    )
    rows = summarize_sweep(cells)
    write_csv(
        os.path.join(args.out, "welfare_vs_irc.csv"),
        ["irc", "strategy", "mean_welfare", "stderr", "n_seeds"],
        [[r["irc"], r["strategy"], r["mean_welfare"], r["stderr"], r["n_seeds"]] for r in rows],
    )
    _write_manifest(
        os.path.join(args.out, "manifest"),
        args.config,
        {
            "command": "sweep",
            "param": args.param,
            "values": ",".join(str(v) for v in args.values),
            "seeds": args.seeds,
            "seed": args.seed,
            "samples": args.samples,
        },
    )
    print(f"wrote {args.out}/welfare_vs_irc.csv ({len(rows)} rows), manifest")
    return 0


def _cmd_gap(args) -> int:
    inst = load_setup(args.config).build_instance(args.seed)
    gaps = expected_vs_strict_gap(
        inst,
        args.T,
        MonteCarloSpec(samples=args.samples, seed=args.seed),
        n_periods=args.periods,
    )
    rows = [[t, gaps[t][0], gaps[t][1], args.periods] for t in args.T]
    write_csv(args.out, ["T", "gap", "gap_stderr", "n_periods"], rows)
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hybridmarket",
        description="Hybrid futures/spot spectrum market: policy solver, auctions, experiments",
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve-policy", help="solve the off-line shadow prices")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--samples", type=int, default=20000)
    sp.add_argument("--tol", type=float, default=0.01)
    sp.add_argument("--max-iter", type=int, default=60)
    sp.set_defaults(func=_cmd_solve_policy)

    at = sub.add_parser("auction-trace", help="per-slot auction trace CSV")
    at.add_argument("--config", required=True)
    at.add_argument("--policy", required=True)
    at.add_argument("--seed", type=int, default=0)
    at.add_argument("--solver", choices=("exact", "greedy"), default="exact")
    at.add_argument("--out", required=True)
    at.set_defaults(func=_cmd_auction_trace)

    lb = sub.add_parser("lossbound", help="welfare-ratio experiment over an e0 grid")
    lb.add_argument("--config", required=True)
    lb.add_argument("--policy", required=True)
    lb.add_argument("--e0", type=_float_list, default=[0.0, 0.25, 0.5, 0.75, 1.0])
    lb.add_argument("--samples", type=int, default=20000)
    lb.add_argument("--seed", type=int, default=0)
    lb.add_argument("--out", required=True)
    lb.set_defaults(func=_cmd_lossbound)

    sim = sub.add_parser("simulate", help="one full period through the on-line auction")
    sim.add_argument("--config", required=True)
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--solver", choices=("exact", "greedy"), default="exact")
    sim.add_argument("--samples", type=int, default=20000)
    sim.add_argument("--tol", type=float, default=0.01)
    sim.add_argument("--max-iter", type=int, default=60)
    sim.set_defaults(func=_cmd_simulate)

    sw = sub.add_parser("sweep", help="welfare-vs-IRc strategy comparison")
    sw.add_argument("--config", required=True)
    sw.add_argument("--param", default="irc")
    sw.add_argument("--values", type=_float_list, default=list(DEFAULT_IRC_GRID))
    sw.add_argument("--seeds", type=int, default=200)
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--samples", type=int, default=3000)
    sw.add_argument("--out", required=True)
    sw.set_defaults(func=_cmd_sweep)

    gp = sub.add_parser("gap", help="expected-vs-strict contract-demand welfare gap")
    gp.add_argument("--config", required=True)
    gp.add_argument("--T", type=_int_list, default=[10, 100, 1000])
    gp.add_argument("--periods", type=int, default=50)
    gp.add_argument("--samples", type=int, default=3000)
    gp.add_argument("--seed", type=int, default=0)
    gp.add_argument("--out", required=True)
    gp.set_defaults(func=_cmd_gap)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
