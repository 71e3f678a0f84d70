"""Structured, human-readable config files (INI sections).

A market instance file has sections [graph], [contracts], [utilities] and
[supply].  The [graph] section either points at an edge-list file or
carries random-geometric generator parameters.  Policy files reuse the
same format with [policy], [lambdas], [expected_demand], [satisfied] and
[trace] sections.
"""

from __future__ import annotations

import configparser
import os
from typing import Dict, List, Optional, Tuple

from .graph import read_edge_list
from .market import Contract, MarketInstance, UtilityModel
from .policy import Policy


def _fmt(x: float) -> str:
    return repr(float(x))


def parse_contract_record(record: str) -> Contract:
    """One contract user per record: whitespace-separated key=value pairs.

    Keys: B, D, penalty_kind, unit_penalty, total_penalty, tau.
    """
    known = {"B", "D", "penalty_kind", "unit_penalty", "total_penalty", "tau"}
    fields: Dict[str, str] = {}
    for token in record.split():
        if "=" not in token:
            raise ValueError(f"bad contract token {token!r}")
        key, val = token.split("=", 1)
        if key not in known:
            raise ValueError(f"unknown contract field {key!r}")
        fields[key] = val
    if "B" not in fields or "D" not in fields:
        raise ValueError(f"contract record needs B and D: {record!r}")
    kind = fields.get("penalty_kind", "soft")
    return Contract(
        B=float(fields["B"]),
        D=float(fields["D"]),
        penalty_kind=kind,
        unit_penalty=float(fields.get("unit_penalty", 0.0)),
        total_penalty=float(fields.get("total_penalty", 0.0)),
        tau=float(fields.get("tau", 0.5)),
    )


def format_contract_record(c: Contract) -> str:
    parts = [f"B={_fmt(c.B)}", f"D={_fmt(c.D)}", f"penalty_kind={c.penalty_kind}"]
    if c.penalty_kind == "soft":
        parts.append(f"unit_penalty={_fmt(c.unit_penalty)}")
    else:
        parts.append(f"total_penalty={_fmt(c.total_penalty)}")
    parts.append(f"tau={_fmt(c.tau)}")
    return " ".join(parts)


def _parse_positions(raw: str) -> Tuple[Tuple[float, float], ...]:
    out = []
    for chunk in raw.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        x, y = chunk.split()
        out.append((float(x), float(y)))
    return tuple(out)


def parse_utility_model(section) -> UtilityModel:
    return UtilityModel(
        kind=section.get("kind", "uniform"),
        lo=section.getfloat("lo", 0.0),
        hi=section.getfloat("hi", 1.0),
        bandwidth=section.getfloat("bandwidth", 1.0),
        power=section.getfloat("power", 1.0),
        noise=section.getfloat("noise", 1.0),
        fading_scale=section.getfloat("fading_scale", 1.0),
        pref_lo=section.getfloat("pref_lo", 1.0),
        pref_hi=section.getfloat("pref_hi", 1.0),
        q_kind=section.get("q_kind", "none"),
        q_lo=section.getfloat("q_lo", 1.0),
        q_hi=section.getfloat("q_hi", 1.0),
    )


def read_config(path: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    return cp


class ExperimentSetup:
    """Parsed config: either a fixed edge-list graph or generator params,
    plus contract records, utility model and supply terms."""

    def __init__(
        self,
        *,
        graph_path: Optional[str],
        topology,  # Optional[TopologySpec]; imported lazily to avoid a cycle
        contracts: List[Contract],
        utilities: UtilityModel,
        rho: float,
        K: int,
        T: int,
    ):
        self.graph_path = graph_path
        self.topology = topology
        self.contracts = contracts
        self.utilities = utilities
        self.rho = rho
        self.K = K
        self.T = T

    def build_instance(self, seed: int = 0) -> MarketInstance:
        from .rng import substream
        from .simlab import generate_topology

        if self.graph_path is not None:
            graph = read_edge_list(self.graph_path)
        else:
            graph, _ = generate_topology(self.topology, substream(seed, "topology"))
        ids = list(graph.contract_vertices)
        if len(self.contracts) != len(ids):
            raise ValueError(
                f"{len(self.contracts)} contract records for {len(ids)} contract vertices"
            )
        contracts = {vert: c for vert, c in zip(ids, self.contracts)}
        return MarketInstance(
            graph=graph,
            contracts=contracts,
            utilities=self.utilities,
            rho=self.rho,
            K=self.K,
            T=self.T,
        )


def load_setup(path: str) -> ExperimentSetup:
    cp = read_config(path)
    if "graph" not in cp:
        raise ValueError(f"{path}: missing [graph] section")
    gsec = cp["graph"]
    graph_path = None
    topology = None
    if gsec.get("path"):
        graph_path = gsec.get("path")
        if not os.path.isabs(graph_path):
            graph_path = os.path.join(os.path.dirname(os.path.abspath(path)), graph_path)
    else:
        from .simlab import TopologySpec

        topology = TopologySpec(
            area=gsec.getfloat("area", 1000.0),
            n_spot=gsec.getint("spot_users", 20),
            contract_positions=_parse_positions(
                gsec.get("contract_positions", "300 400; 500 600; 700 400")
            ),
            irs=gsec.getfloat("irs", 300.0),
            irc=gsec.getfloat("irc", 300.0),
        )
    contracts: List[Contract] = []
    if "contracts" in cp:
        for _, record in sorted(cp["contracts"].items(), key=lambda kv: int(kv[0])):
            contracts.append(parse_contract_record(record))
    utilities = parse_utility_model(cp["utilities"]) if "utilities" in cp else UtilityModel()
    supply = cp["supply"] if "supply" in cp else {}
    return ExperimentSetup(
        graph_path=graph_path,
        topology=topology,
        contracts=contracts,
        utilities=utilities,
        rho=float(supply.get("rho", 1.0)),
        K=int(supply.get("K", 1)),
        T=int(supply.get("T", 1)),
    )


def load_instance(path: str, seed: int = 0) -> MarketInstance:
    """Build a MarketInstance from a config file.

    Generator-based topologies draw spot positions from the 'topology'
    substream of the given master seed, so (config, seed) pins the
    instance exactly.
    """
    return load_setup(path).build_instance(seed)


def write_instance_config(
    path: str,
    *,
    graph_section: Dict[str, str],
    contracts: List[Contract],
    utilities: UtilityModel,
    rho: float,
    K: int,
    T: int,
) -> None:
    lines = ["[graph]"]
    for key, val in graph_section.items():
        lines.append(f"{key} = {val}")
    lines.append("")
    lines.append("[contracts]")
    for i, c in enumerate(contracts, start=1):
        lines.append(f"{i} = {format_contract_record(c)}")
    lines.append("")
    lines.append("[utilities]")
    lines.append(f"kind = {utilities.kind}")
    if utilities.kind == "uniform":
        lines.append(f"lo = {_fmt(utilities.lo)}")
        lines.append(f"hi = {_fmt(utilities.hi)}")
    else:
        for key in ("bandwidth", "power", "noise", "fading_scale", "pref_lo", "pref_hi"):
            lines.append(f"{key} = {_fmt(getattr(utilities, key))}")
    if utilities.q_kind != "none":
        lines.append(f"q_kind = {utilities.q_kind}")
        lines.append(f"q_lo = {_fmt(utilities.q_lo)}")
        lines.append(f"q_hi = {_fmt(utilities.q_hi)}")
    lines.append("")
    lines.append("[supply]")
    lines.append(f"rho = {_fmt(rho)}")
    lines.append(f"K = {K}")
    lines.append(f"T = {T}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def save_policy(policy: Policy, path: str) -> None:
    lines = ["[policy]"]
    lines.append(f"kind = {policy.kind}")
    lines.append(f"converged = {str(policy.converged).lower()}")
    lines.append(f"sweeps = {len(policy.trace)}")
    lines.append("")
    lines.append("[lambdas]")
    for n in sorted(policy.lambdas):
        lines.append(f"{n} = {_fmt(policy.lambdas[n])}")
    lines.append("")
    lines.append("[expected_demand]")
    for n in sorted(policy.expected_demand):
        est, se = policy.expected_demand[n]
        lines.append(f"{n} = {_fmt(est)} {_fmt(se)}")
    lines.append("")
    lines.append("[satisfied]")
    lines.append("ids = " + " ".join(str(n) for n in sorted(policy.satisfied_set)))
    if policy.notes:
        lines.append("")
        lines.append("[notes]")
        for i, note in enumerate(policy.notes, start=1):
            lines.append(f"{i} = {note}")
    if policy.trace:
        lines.append("")
        lines.append("[trace]")
        for rec in policy.trace:
            lam = " ".join(_fmt(v) for _, v in sorted(rec["lambdas"].items()))
            lines.append(f"{rec['sweep'] + 1} = {_fmt(rec['max_delta'])} | {lam}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_policy(path: str) -> Policy:
    cp = read_config(path)
    lambdas = {int(k): float(v) for k, v in cp["lambdas"].items()} if "lambdas" in cp else {}
    diag = {}
    if "expected_demand" in cp:
        for k, v in cp["expected_demand"].items():
            est, se = v.split()
            diag[int(k)] = (float(est), float(se))
    satisfied = frozenset()
    if "satisfied" in cp and cp["satisfied"].get("ids", "").strip():
        satisfied = frozenset(int(x) for x in cp["satisfied"]["ids"].split())
    notes = ()
    if "notes" in cp:
        notes = tuple(v for _, v in sorted(cp["notes"].items(), key=lambda kv: int(kv[0])))
    psec = cp["policy"] if "policy" in cp else {}
    return Policy(
        lambdas=lambdas,
        satisfied_set=satisfied,
        expected_demand=diag,
        trace=(),
        converged=str(psec.get("converged", "true")).lower() == "true",
        kind=str(psec.get("kind", "soft")),
        notes=notes,
    )
