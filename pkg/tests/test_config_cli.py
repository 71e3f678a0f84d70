import os

import pytest

from hybridmarket.cli import main
from hybridmarket.config import (
    load_instance,
    load_policy,
    parse_contract_record,
    save_policy,
    write_instance_config,
)
from hybridmarket.market import Contract, UtilityModel
from hybridmarket.policy import Policy


DEFAULT_GRAPH_SECTION = {
    "area": "1000.0",
    "spot_users": "8",
    "contract_positions": "300 400; 500 600; 700 400",
    "irs": "300.0",
    "irc": "300.0",
}


def write_default_config(path, T=20, D=8.0):
    contracts = [
        Contract(B=10.0, D=D, penalty_kind="soft", unit_penalty=1.0, tau=0.3)
        for _ in range(3)
    ]
    write_instance_config(
        str(path),
        graph_section=DEFAULT_GRAPH_SECTION,
        contracts=contracts,
        utilities=UtilityModel(),
        rho=0.6,
        K=2,
        T=T,
    )


class TestInstanceConfig:
    def test_round_trip_generator_config(self, tmp_path):
        cfg = tmp_path / "market.ini"
        write_default_config(cfg)
        inst = load_instance(str(cfg), seed=3)
        assert inst.n_spot == 8
        assert inst.n_contract == 3
        assert inst.rho == 0.6
        assert inst.S == 40
        assert inst.contracts[9].unit_penalty == 1.0

    def test_same_seed_same_instance(self, tmp_path):
        cfg = tmp_path / "market.ini"
        write_default_config(cfg)
        a = load_instance(str(cfg), seed=5)
        b = load_instance(str(cfg), seed=5)
        c = load_instance(str(cfg), seed=6)
        assert a.graph.edges == b.graph.edges
        assert a.graph.edges != c.graph.edges or a.graph is not c.graph

    def test_edge_list_graph_reference(self, tmp_path):
        from hybridmarket.graph import ConflictGraph, write_edge_list

        g = ConflictGraph((1, 2), (3,), frozenset({(1, 3)}))
        write_edge_list(g, str(tmp_path / "topo.edges"))
        cfg = tmp_path / "market.ini"
        write_instance_config(
            str(cfg),
            graph_section={"path": "topo.edges"},
            contracts=[Contract(B=1.0, D=1.0, penalty_kind="hard", total_penalty=2.0)],
            utilities=UtilityModel(),
            rho=1.0,
            K=1,
            T=5,
        )
        inst = load_instance(str(cfg))
        assert inst.graph.contract_vertices == (3,)
        assert inst.contracts[3].penalty_kind == "hard"

    def test_contract_record_parsing(self):
        c = parse_contract_record("B=10 D=45 penalty_kind=soft unit_penalty=1.0 tau=0.3")
        assert c.B == 10.0 and c.D == 45.0 and c.tau == 0.3
        with pytest.raises(ValueError):
            parse_contract_record("B=10 D;=bad")

    def test_contract_count_mismatch_rejected(self, tmp_path):
        cfg = tmp_path / "market.ini"
        write_instance_config(
            str(cfg),
            graph_section=DEFAULT_GRAPH_SECTION,
            contracts=[Contract(B=1.0, D=1.0)],
            utilities=UtilityModel(),
            rho=0.5,
            K=1,
            T=1,
        )
        with pytest.raises(ValueError):
            load_instance(str(cfg))


class TestShippedDefaultConfig:
    def test_loads_and_matches_default_market(self):
        import hybridmarket.simlab as simlab

        here = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
        cfg = os.path.join(here, "configs", "default.ini")
        inst = load_instance(cfg, seed=0)
        want = simlab.default_market(seed=0)
        assert inst.graph.edges == want.graph.edges
        assert inst.contracts == want.contracts
        assert (inst.rho, inst.K, inst.T) == (want.rho, want.K, want.T)


class TestPolicyFile:
    def test_round_trip(self, tmp_path):
        pol = Policy(
            lambdas={9: 0.25, 10: 0.0},
            satisfied_set=frozenset({9}),
            expected_demand={9: (8.0, 0.1), 10: (3.5, 0.2)},
            trace=({"sweep": 0, "lambdas": {9: 0.25, 10: 0.0}, "max_delta": 0.25},),
            converged=True,
            kind="soft",
            notes=("user 10: something",),
        )
        path = tmp_path / "policy.ini"
        save_policy(pol, str(path))
        back = load_policy(str(path))
        assert back.lambdas == pol.lambdas
        assert back.expected_demand == pol.expected_demand
        assert back.satisfied_set == pol.satisfied_set
        assert back.converged
        assert back.notes == pol.notes


class TestCli:
    def test_solve_policy_and_trace(self, tmp_path):
        cfg = tmp_path / "market.ini"
        write_default_config(cfg)
        pol_path = tmp_path / "policy.ini"
        rc = main([
            "solve-policy", "--config", str(cfg), "--out", str(pol_path),
            "--seed", "1", "--samples", "2000", "--tol", "0.02",
        ])
        assert rc == 0 and pol_path.exists()
        trace_path = tmp_path / "trace.csv"
        rc = main([
            "auction-trace", "--config", str(cfg), "--policy", str(pol_path),
            "--seed", "1", "--out", str(trace_path),
        ])
        assert rc == 0
        lines = trace_path.read_text().splitlines()
        assert lines[0] == "slot,su_id,role,bid,weight,won,payment"
        assert len(lines) > 1

    def test_lossbound_csv(self, tmp_path):
        cfg = tmp_path / "market.ini"
        write_default_config(cfg)
        pol_path = tmp_path / "policy.ini"
        main(["solve-policy", "--config", str(cfg), "--out", str(pol_path), "--samples", "2000"])
        out = tmp_path / "wr.csv"
        rc = main([
            "lossbound", "--config", str(cfg), "--policy", str(pol_path),
            "--e0", "0.0,0.5,1.0", "--samples", "2000", "--out", str(out),
        ])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("e0,eps_bar,achieved_wr,achieved_wr_stderr,bound_wr")
        assert len(lines) == 4

    def test_simulate_writes_bundle(self, tmp_path):
        cfg = tmp_path / "market.ini"
        write_default_config(cfg, T=10)
        out = tmp_path / "run"
        rc = main([
            "simulate", "--config", str(cfg), "--seed", "7", "--out", str(out),
            "--samples", "1500",
        ])
        assert rc == 0
        for name in ("trace.csv", "summary.csv", "policy.ini", "manifest"):
            assert (out / name).exists()
        manifest = (out / "manifest").read_text()
        assert "[run]" in manifest and "seed = 7" in manifest
        assert "[contracts]" in manifest

    def test_sweep_and_gap(self, tmp_path):
        cfg = tmp_path / "market.ini"
        write_default_config(cfg, T=10)
        out = tmp_path / "sweep"
        rc = main([
            "sweep", "--config", str(cfg), "--param", "irc", "--values", "100,500",
            "--seeds", "3", "--seed", "2", "--samples", "800", "--out", str(out),
        ])
        assert rc == 0
        lines = (out / "welfare_vs_irc.csv").read_text().splitlines()
        assert lines[0] == "irc,strategy,mean_welfare,stderr,n_seeds"
        assert len(lines) == 1 + 2 * 6
        gap_out = tmp_path / "gap.csv"
        rc = main([
            "gap", "--config", str(cfg), "--T", "5,10", "--periods", "5",
            "--samples", "800", "--seed", "2", "--out", str(gap_out),
        ])
        assert rc == 0
        assert gap_out.read_text().splitlines()[0] == "T,gap,gap_stderr,n_periods"

    def test_determinism_identical_bytes(self, tmp_path):
        cfg = tmp_path / "market.ini"
        write_default_config(cfg, T=10)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            main([
                "sweep", "--config", str(cfg), "--values", "100,300",
                "--seeds", "2", "--seed", "11", "--samples", "600", "--out", str(out),
            ])
            outs.append((out / "welfare_vs_irc.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_sweep_requires_generator_graph(self, tmp_path):
        from hybridmarket.graph import ConflictGraph, write_edge_list

        g = ConflictGraph((1,), (2,), frozenset())
        write_edge_list(g, str(tmp_path / "topo.edges"))
        cfg = tmp_path / "fixed.ini"
        write_instance_config(
            str(cfg),
            graph_section={"path": "topo.edges"},
            contracts=[Contract(B=1.0, D=1.0)],
            utilities=UtilityModel(),
            rho=0.5,
            K=1,
            T=2,
        )
        with pytest.raises(SystemExit):
            main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "x")])
