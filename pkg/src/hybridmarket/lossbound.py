"""Welfare-loss analysis for approximate per-slot solvers.

The approximate solver's performance ratio is modeled as a random
epsilon ~ Uniform[e0, 1] drawn independently per (realization, side-
welfare subproblem).  Degraded side welfare perturbs the C-MW ranking,
transferring spectrums between contract sets; this module estimates the
transfer probabilities (beta), the induced per-user allocation changes
(gamma), the per-user loss terms (t_n), the analytical welfare-ratio
lower bound, and the actually achieved welfare ratio, all on one shared
sample set so the bound and the measurement are comparable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from .market import HARD, MarketInstance, SpectrumDraw, penalty
from .policy import MonteCarloSpec, Policy, PolicyEngine, cmw_report, contract_sets
from .rng import substream


@dataclass(frozen=True)
class LossBoundReport:
    """Everything the Eq.-(40)-style bound needs, with MC standard errors."""

    e0: float
    n_samples: int
    rho_s: float                        # expected idle supply rho*S
    eps_bar: Tuple[float, ...]          # mean performance ratio per subproblem
    eps_bar_min: float                  # worst subproblem mean
    phi: Tuple[float, ...]              # average side-welfare loss per set
    beta: np.ndarray                    # (I_c+1, I_c+1) transfer matrix [src, dst]
    delta: Tuple[float, ...]            # allocation-probability change per set
    gamma: Dict[int, float]             # per-user allocation-probability change
    gamma_se: Dict[int, float]
    x_const: Dict[int, float]           # X_n = unit_penalty - lambda_n
    y_const: Tuple[float, ...]          # Y_i = sum of X_n over the set
    t_n: Dict[int, float]               # per-user average welfare-loss term
    t_n_se: Dict[int, float]
    optimal_welfare: float
    contract_terms: Dict[int, float]    # tau*E[w^c]* + (1-tau)*E[w~^c]* per user
    achieved_welfare: float
    achieved_wr: float
    achieved_wr_se: float
    bound_wr: float
    bound_wr_se: float


def approximate_cmw(
    inst: MarketInstance,
    lambdas: Dict[int, float],
    draw: SpectrumDraw,
    eps: Sequence[float],
) -> Tuple[float, ...]:
    """Per-set C-MW with the side welfares degraded by the given ratios.

    eps is indexed like the contract sets (entry 0 scales the pure-spot
    side welfare z_0); entries must lie in [0, 1].  With eps identically
    one this reduces to the precise C-MW.
    """
    sets = contract_sets(inst.graph)
    if len(eps) != len(sets):
        raise ValueError(f"need one ratio per contract set ({len(sets)}), got {len(eps)}")
    if any(not 0.0 <= e <= 1.0 for e in eps):
        raise ValueError("performance ratios must lie in [0, 1]")
    rep = cmw_report(inst, lambdas, draw)
    rho_s = inst.rho * inst.S
    out = [0.0]
    for i in range(1, len(sets)):
        lam = sum(lambdas.get(n, 0.0) for n in sets[i])
        out.append(
            rho_s * (-eps[0] * rep.z[0] + eps[i] * rep.z[i] + rep.gain[i] - lam)
        )
    return tuple(out)


class LossExperiment:
    """Shared sample set for transfer, bound, and achieved-WR estimates."""

    def __init__(
        self,
        inst: MarketInstance,
        policy: Policy,
        e0: float,
        mc: MonteCarloSpec,
    ):
        if not 0.0 <= e0 <= 1.0:
            raise ValueError("e0 must lie in [0, 1]")
        if any(c.penalty_kind == HARD for c in inst.contracts.values()):
            raise ValueError("loss analysis covers soft contracts")
        self.inst = inst
        self.policy = policy
        self.e0 = e0
        self.mc = mc
        self.engine = PolicyEngine(inst, mc.samples, mc.seed)
        eng = self.engine
        n_sets = len(eng.sets)
        s = mc.samples
        # epsilon ~ U[e0, 1], i.i.d. per (sample, subproblem); the base
        # uniforms depend only on the seed so e0 grids share them
        base = substream(mc.seed, "epsilon").random((s, n_sets))
        self.eps = e0 + (1.0 - e0) * base

        lam_vec = eng.membership @ eng._lam_vec(policy.lambdas)
        precise = eng.rho_s * (eng.cmw_core - lam_vec[None, :])
        precise[:, 0] = 0.0
        eps_z = self.eps * eng.z
        approx = eng.rho_s * (eps_z - eps_z[:, 0:1] + eng.gain - lam_vec[None, :])
        approx[:, 0] = 0.0
        self.src = np.argmax(precise, axis=1)
        self.dst = np.argmax(approx, axis=1)
        self.rows = np.arange(s)

    def report(self) -> LossBoundReport:
        eng = self.engine
        inst = self.inst
        n_sets = len(eng.sets)
        s = self.mc.samples
        rho_s = eng.rho_s

        beta = np.zeros((n_sets, n_sets))
        np.add.at(beta, (self.src, self.dst), 1.0)
        beta /= s

        src_member = eng.membership[self.src]      # (s, N)
        dst_member = eng.membership[self.dst]
        gamma_samples = src_member - dst_member
        gamma_vec = gamma_samples.mean(axis=0)
        gamma_se_vec = gamma_samples.std(axis=0) / np.sqrt(s)
        delta = tuple(
            float(np.mean(self.src == i) - np.mean(self.dst == i)) for i in range(n_sets)
        )

        eps_bar = tuple(float(self.eps[:, i].mean()) for i in range(n_sets))
        eps_bar_min = min(eps_bar)
        phi = tuple(
            float(np.mean((1.0 - eps_bar[i]) * eng.z[:, i] * (self.src == i)))
            for i in range(n_sets)
        )

        ids = eng.contract_ids
        x_const = {
            n: inst.contracts[n].unit_penalty - self.policy.lambdas.get(n, 0.0)
            for n in ids
        }
        y_const = tuple(
            float(sum(x_const[n] for n in eng.sets[i])) for i in range(n_sets)
        )
        p_hat = np.array([inst.contracts[n].unit_penalty for n in ids])
        x_vec = np.array([x_const[n] for n in ids])
        t_vec = x_vec * gamma_vec - p_hat * np.maximum(gamma_vec, 0.0)
        t_se_vec = np.abs(x_vec - p_hat * (gamma_vec > 0)) * gamma_se_vec

        # optimal and achieved welfare on the same samples
        opt_inst = eng.z[self.rows, self.src] + eng.util_gain[self.rows, self.src]
        deg_inst = (
            self.eps[self.rows, self.dst] * eng.z[self.rows, self.dst]
            + eng.util_gain[self.rows, self.dst]
        )
        ed_opt = rho_s * src_member.mean(axis=0)
        ed_deg = rho_s * dst_member.mean(axis=0)
        opt_w = rho_s * float(opt_inst.mean())
        deg_w = rho_s * float(deg_inst.mean())
        contract_terms: Dict[int, float] = {}
        for j, n in enumerate(ids):
            c = inst.contracts[n]
            personal_opt = c.B - penalty(c, float(ed_opt[j]))
            util_opt = rho_s * float(
                (eng.contract_u[:, j] * src_member[:, j]).mean()
            )
            contract_terms[n] = c.tau * personal_opt + (1.0 - c.tau) * util_opt
            opt_w += c.tau * personal_opt
            deg_w += c.tau * (c.B - penalty(c, float(ed_deg[j])))
        # utilization welfare is inside the instantaneous terms already

        achieved_wr = deg_w / opt_w if opt_w > 0 else float("nan")
        wr_se = rho_s * float(deg_inst.std()) / np.sqrt(s) / opt_w if opt_w > 0 else float("nan")

        bound = eps_bar_min
        bound_se_sq = 0.0
        for j, n in enumerate(ids):
            bound += (
                (1.0 - eps_bar_min) * contract_terms[n] + rho_s * float(t_vec[j])
            ) / opt_w
            bound_se_sq += (rho_s * float(t_se_vec[j]) / opt_w) ** 2
        return LossBoundReport(
            e0=self.e0,
            n_samples=s,
            rho_s=rho_s,
            eps_bar=eps_bar,
            eps_bar_min=eps_bar_min,
            phi=phi,
            beta=beta,
            delta=delta,
            gamma={n: float(gamma_vec[j]) for j, n in enumerate(ids)},
            gamma_se={n: float(gamma_se_vec[j]) for j, n in enumerate(ids)},
            x_const=x_const,
            y_const=y_const,
            t_n={n: float(t_vec[j]) for j, n in enumerate(ids)},
            t_n_se={n: float(t_se_vec[j]) for j, n in enumerate(ids)},
            optimal_welfare=opt_w,
            contract_terms=contract_terms,
            achieved_welfare=deg_w,
            achieved_wr=achieved_wr,
            achieved_wr_se=wr_se,
            bound_wr=bound,
            bound_wr_se=float(np.sqrt(bound_se_sq)),
        )


def estimate_transfers(
    inst: MarketInstance,
    policy: Policy,
    e0: float,
    mc: MonteCarloSpec = MonteCarloSpec(),
) -> LossBoundReport:
    """Estimate the transfer matrix beta and the derived Delta/gamma."""
    return LossExperiment(inst, policy, e0, mc).report()


def analytical_wr_bound(report: LossBoundReport) -> float:
    """Assemble the welfare-ratio lower bound from the report's parts:
    the worst mean performance ratio plus, per user, the protected
    contract terms and the nonpositive loss term t_n (scaled back to the
    full supply), all relative to the optimal expected welfare."""
    if report.optimal_welfare <= 0:
        raise ValueError("optimal expected welfare must be positive")
    bound = report.eps_bar_min
    for n, terms in report.contract_terms.items():
        bound += (
            (1.0 - report.eps_bar_min) * terms + report.rho_s * report.t_n[n]
        ) / report.optimal_welfare
    return bound


def measure_achieved_wr(
    inst: MarketInstance,
    policy: Policy,
    e0: float,
    mc: MonteCarloSpec = MonteCarloSpec(),
) -> Tuple[float, float]:
    """(achieved welfare ratio, analytical bound) on one shared sample set."""
    rep = LossExperiment(inst, policy, e0, mc).report()
    return rep.achieved_wr, rep.bound_wr
