"""Client scheduling: the drift/divergence objective, greedy selection with
bandwidth feasibility, the per-class gradient-norm estimator, and the seven
baseline policies behind one interface.

The selection objective for a set S is

    phi(S) = sigma / sqrt(|S| b) + U(S)
    U(S)   = divergence_bound(S) - lambda * sum_{n in S} alpha_n * drift_n

where the divergence bound and per-client drift are weighted L1 distances of
class distributions.  Greedy insertion accepts the argmin-gain client while
the phi delta stays nonpositive and its minimum bandwidth still fits the
shared budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .distributions import ClassDistribution, ClassGradientNorms, temporal_drift_bound
from .wireless import ChannelRealization, LinkBudget, RadioProfile, min_bandwidth

__all__ = [
    "POLICY_IDS",
    "SchedulerConfig",
    "ClientReport",
    "ScheduleDecision",
    "lambda_at",
    "unified_objective",
    "greedy_select",
    "estimate_class_norms",
    "baseline_select",
]

POLICY_IDS = (
    "fedteddi",
    "random",
    "best_channel",
    "best_norm",
    "power_of_choice",
    "pure_drift",
    "fedcbs",
    "fedcgd",
)


@dataclass(frozen=True)
class SchedulerConfig:
    """Scheduling knobs: exploration weight decay and the sigma source."""

    lambda0: float = 2.0
    rounds_per_frame: int = 1
    sigma_mode: str = "estimated"  # "estimated" or "fixed"
    sigma_fixed: float = 1.0
    scan_all_candidates: bool = False  # ablation: keep scanning after a failed gain test

    def __post_init__(self):
        if self.lambda0 < 0:
            raise ValueError("lambda0 must be nonnegative")
        if self.rounds_per_frame < 1:
            raise ValueError("rounds_per_frame must be positive")
        if self.sigma_mode not in ("estimated", "fixed"):
            raise ValueError("sigma_mode must be 'estimated' or 'fixed'")


@dataclass(frozen=True)
class ClientReport:
    """What one client tells the server before selection each round."""

    client: int
    distribution_now: ClassDistribution
    distribution_prev_frame: ClassDistribution
    sample_count: int
    sigma_hat: float
    compute_delay_s: float
    channel: ChannelRealization
    radio: RadioProfile
    local_loss: float = 0.0
    update_norm: float = 0.0


@dataclass(frozen=True)
class ScheduleDecision:
    """Selected clients (in insertion order), their bandwidth, diagnostics."""

    selected: tuple[int, ...]
    bandwidth: dict[int, float]
    objective_trace: tuple[float, ...]
    terms: tuple[float, float, float]  # (sampling variance, divergence bound, drift bonus)

    @classmethod
    def empty(cls) -> "ScheduleDecision":
        return cls(selected=(), bandwidth={}, objective_trace=(), terms=(0.0, 0.0, 0.0))

    @property
    def is_empty(self) -> bool:
        return not self.selected


def lambda_at(cfg: SchedulerConfig, round_index: int) -> float:
    """Exploration weight lambda_0 * (1 - k/K): linear decay hitting 0 at k=K."""
    if not (1 <= round_index <= cfg.rounds_per_frame):
        raise ValueError(
            f"round {round_index} outside [1, {cfg.rounds_per_frame}]"
        )
    return cfg.lambda0 * (1.0 - round_index / cfg.rounds_per_frame)


class _SetEvaluator:
    """Incremental evaluation of U(S) over growing selected sets."""

    def __init__(
        self,
        reports: Mapping[int, ClientReport],
        global_dist: ClassDistribution,
        weights: ClassGradientNorms,
        lam: float,
    ):
        self.num_classes = max(
            [global_dist.num_classes, weights.num_classes]
            + [r.distribution_now.num_classes for r in reports.values()]
        )
        self.global_p = global_dist.padded(self.num_classes)
        self.w = weights.padded(self.num_classes)
        self.lam = lam
        self.p = {
            cid: r.distribution_now.padded(self.num_classes) for cid, r in reports.items()
        }
        self.counts = {cid: r.sample_count for cid, r in reports.items()}
        self.drift = {
            cid: temporal_drift_bound(r.distribution_now, r.distribution_prev_frame, weights)
            for cid, r in reports.items()
        }

    def unified(self, mass: np.ndarray, total: float, drift_mass: float) -> float:
        """U for a set summarized by sum_n D_n p_n, sum_n D_n, sum_n D_n drift_n."""
        if total == 0:
            div = float(np.sum(self.global_p * self.w))
            return div
        agg = mass / total
        div = float(np.sum(np.abs(agg - self.global_p) * self.w))
        return div - self.lam * (drift_mass / total)

    def divergence(self, mass: np.ndarray, total: float) -> float:
        if total == 0:
            return float(np.sum(self.global_p * self.w))
        return float(np.sum(np.abs(mass / total - self.global_p) * self.w))


def unified_objective(
    selected,
    reports: Mapping[int, ClientReport],
    global_dist: ClassDistribution,
    weights: ClassGradientNorms,
    lam: float,
) -> float:
    """U(S): divergence bound of the aggregate minus the weighted drift bonus.

    The empty set evaluates to the full weighted mass of the global
    distribution (the divergence of a zero aggregate).
    """
    sel = list(selected)
    for cid in sel:
        if cid not in reports:
            raise ValueError(f"client {cid} has no report")
    ev = _SetEvaluator(reports, global_dist, weights, lam)
    mass = np.zeros(ev.num_classes)
    total = 0.0
    drift_mass = 0.0
    for cid in sorted(sel):
        mass += ev.counts[cid] * ev.p[cid]
        total += ev.counts[cid]
        drift_mass += ev.counts[cid] * ev.drift[cid]
    return ev.unified(mass, total, drift_mass)


def _feasible_bandwidths(
    reports: Mapping[int, ClientReport], budget: LinkBudget
) -> dict[int, float]:
    """Minimum bandwidth per client with time left before the deadline.

    Clients already past the deadline, or whose channel cannot carry the
    model in the remaining time at any bandwidth, are left out.
    """
    out: dict[int, float] = {}
    for cid, r in reports.items():
        remaining = budget.deadline_s - r.compute_delay_s
        if remaining <= 0:
            continue
        b = min_bandwidth(remaining, r.radio, r.channel, budget)
        if math.isfinite(b):
            out[cid] = b
    return out


def _decision_terms(
    ev: _SetEvaluator,
    selected: list[int],
    sigma: float,
    batch: int,
) -> tuple[float, float, float]:
    mass = np.zeros(ev.num_classes)
    total = 0.0
    drift_mass = 0.0
    for cid in selected:
        mass += ev.counts[cid] * ev.p[cid]
        total += ev.counts[cid]
        drift_mass += ev.counts[cid] * ev.drift[cid]
    sampling = sigma / math.sqrt(len(selected) * batch) if selected else math.inf
    divergence = ev.divergence(mass, total)
    drift_bonus = (drift_mass / total) if total else 0.0
    return (sampling, divergence, drift_bonus)


def greedy_select(
    reports: Mapping[int, ClientReport],
    global_dist: ClassDistribution,
    weights: ClassGradientNorms,
    sigma_hat: float,
    batch: int,
    lam: float,
    budget: LinkBudget,
    scan_all: bool = False,
) -> ScheduleDecision:
    """Greedy drift/divergence-aware selection under the bandwidth budget.

    Repeatedly picks the candidate with the smallest U gain (ties to the
    lowest client id).  The pick is admitted only while the full objective
    delta, including the sampling-variance change, stays nonpositive; the
    first failed gain test ends selection (unless ``scan_all``, which only
    drops that candidate).  An admitted client must also fit the remaining
    bandwidth; one that does not is dropped from the pool and selection
    continues.  The first client is always admitted when bandwidth allows,
    the sampling term being infinite for an empty set.
    """
    if not reports:
        raise ValueError("reports must be nonempty")
    ev = _SetEvaluator(reports, global_dist, weights, lam)
    bstar = _feasible_bandwidths(reports, budget)
    pool = sorted(bstar)
    if not pool:
        return ScheduleDecision.empty()

    selected: list[int] = []
    bandwidth: dict[int, float] = {}
    trace: list[float] = []
    mass = np.zeros(ev.num_classes)
    total = 0.0
    drift_mass = 0.0
    used_bw = 0.0
    u_current = ev.unified(mass, total, drift_mass)

    while pool:
        best_cid = -1
        best_gain = math.inf
        for cid in pool:  # ascending id order implements the tie-break
            u_with = ev.unified(
                mass + ev.counts[cid] * ev.p[cid],
                total + ev.counts[cid],
                drift_mass + ev.counts[cid] * ev.drift[cid],
            )
            gain = u_with - u_current
            if gain < best_gain:
                best_gain = gain
                best_cid = cid

        s = len(selected)
        if s == 0:
            sampling_delta = -math.inf
        else:
            sampling_delta = (sigma_hat / math.sqrt(batch)) * (
                1.0 / math.sqrt(s + 1) - 1.0 / math.sqrt(s)
            )
        if best_gain + sampling_delta > 0:
            if scan_all:
                pool.remove(best_cid)
                continue
            break

        if used_bw + bstar[best_cid] <= budget.total_bandwidth_hz:
            selected.append(best_cid)
            bandwidth[best_cid] = bstar[best_cid]
            used_bw += bstar[best_cid]
            mass = mass + ev.counts[best_cid] * ev.p[best_cid]
            total += ev.counts[best_cid]
            drift_mass += ev.counts[best_cid] * ev.drift[best_cid]
            u_current = ev.unified(mass, total, drift_mass)
            trace.append(
                sigma_hat / math.sqrt(len(selected) * batch) + u_current
            )
        pool.remove(best_cid)

    if not selected:
        return ScheduleDecision.empty()
    return ScheduleDecision(
        selected=tuple(selected),
        bandwidth=bandwidth,
        objective_trace=tuple(trace),
        terms=_decision_terms(ev, selected, sigma_hat, batch),
    )


def estimate_class_norms(
    per_class_gradients: Mapping[int, Mapping[int, np.ndarray]],
    global_per_class: Mapping[int, np.ndarray],
    distributions: Mapping[int, ClassDistribution],
    global_dist: ClassDistribution,
    previous: ClassGradientNorms,
) -> ClassGradientNorms:
    """Running per-class gradient-norm estimates from scheduled clients.

    For each class seen this round the estimate is the maximum over clients
    of  ||p_n^c g_{n,c} - p^c g_c|| / ||p_n - p||_1,  the proportion-weighted
    class-gradient difference against the aggregated class gradient, scaled
    by the full distribution distance.  Clients indistinguishable from the
    global distribution are skipped; classes with no valid contributor keep
    their previous estimate.
    """
    num_classes = max(
        [global_dist.num_classes, previous.num_classes]
        + [d.num_classes for d in distributions.values()]
        + [c + 1 for c in global_per_class]
    )
    est = previous.padded(num_classes).copy()
    gp = global_dist.padded(num_classes)

    for c, g_global in global_per_class.items():
        best = None
        for cid, grads in per_class_gradients.items():
            pn = distributions[cid].padded(num_classes)
            denom = float(np.sum(np.abs(pn - gp)))
            if denom < 1e-9:
                continue
            g_local = grads.get(c)
            local_vec = pn[c] * g_local if g_local is not None else 0.0
            numer = float(np.linalg.norm(local_vec - gp[c] * g_global))
            ratio = numer / denom
            best = ratio if best is None else max(best, ratio)
        if best is not None:
            est[c] = best
    return ClassGradientNorms(est)


def _admit_in_order(
    order: list[int],
    bstar: Mapping[int, float],
    budget: LinkBudget,
) -> tuple[list[int], dict[int, float]]:
    """Admit ranked clients greedily while their minimum bandwidth fits."""
    selected: list[int] = []
    bw: dict[int, float] = {}
    used = 0.0
    for cid in order:
        if used + bstar[cid] <= budget.total_bandwidth_hz:
            selected.append(cid)
            bw[cid] = bstar[cid]
            used += bstar[cid]
    return selected, bw


def baseline_select(
    policy: str,
    reports: Mapping[int, ClientReport],
    global_dist: ClassDistribution,
    weights: ClassGradientNorms,
    sigma_hat: float,
    batch: int,
    lam: float,
    budget: LinkBudget,
    rng_seed: int = 0,
) -> ScheduleDecision:
    """Dispatch one of the benchmark policies.

    Every policy admits its ranked/sampled clients greedily under the same
    bandwidth and deadline feasibility rules as the main algorithm.
    """
    if policy not in POLICY_IDS:
        raise ValueError(
            f"unknown policy {policy!r}; valid ids: {', '.join(POLICY_IDS)}"
        )
    if not reports:
        raise ValueError("reports must be nonempty")
    if policy == "fedteddi":
        return greedy_select(reports, global_dist, weights, sigma_hat, batch, lam, budget)
    if policy == "fedcgd":
        return greedy_select(reports, global_dist, weights, sigma_hat, batch, 0.0, budget)

    ev = _SetEvaluator(reports, global_dist, weights, lam)
    bstar = _feasible_bandwidths(reports, budget)
    feasible = sorted(bstar)
    if not feasible:
        return ScheduleDecision.empty()
    rng = np.random.Generator(np.random.PCG64(rng_seed))

    if policy == "random":
        order = [feasible[i] for i in rng.permutation(len(feasible))]
        selected, bw = _admit_in_order(order, bstar, budget)
    elif policy == "best_channel":
        order = sorted(feasible, key=lambda cid: (-reports[cid].channel.gain, cid))
        selected, bw = _admit_in_order(order, bstar, budget)
    elif policy == "best_norm":
        order = sorted(feasible, key=lambda cid: (-reports[cid].update_norm, cid))
        selected, bw = _admit_in_order(order, bstar, budget)
    elif policy == "pure_drift":
        order = sorted(feasible, key=lambda cid: (-ev.drift[cid], cid))
        selected, bw = _admit_in_order(order, bstar, budget)
    elif policy == "power_of_choice":
        mean_b = float(np.mean([bstar[cid] for cid in feasible]))
        capacity = max(1, int(budget.total_bandwidth_hz // mean_b))
        d = min(2 * capacity, len(feasible))
        picked = rng.choice(len(feasible), size=d, replace=False)
        candidates = [feasible[i] for i in sorted(int(i) for i in picked)]
        order = sorted(candidates, key=lambda cid: (-reports[cid].local_loss, cid))
        selected, bw = _admit_in_order(order, bstar, budget)
    elif policy == "fedcbs":
        selected, bw = _select_class_balanced(ev, bstar, feasible, budget)
    else:  # pragma: no cover - guarded above
        raise ValueError(policy)

    if not selected:
        return ScheduleDecision.empty()
    terms = _decision_terms(ev, selected, sigma_hat, batch)
    phi = terms[0] + ev.unified(
        sum((ev.counts[c] * ev.p[c] for c in selected), np.zeros(ev.num_classes)),
        sum(ev.counts[c] for c in selected),
        sum(ev.counts[c] * ev.drift[c] for c in selected),
    )
    return ScheduleDecision(
        selected=tuple(selected),
        bandwidth=bw,
        objective_trace=(phi,),
        terms=terms,
    )


def _select_class_balanced(
    ev: _SetEvaluator,
    bstar: Mapping[int, float],
    feasible: list[int],
    budget: LinkBudget,
) -> tuple[list[int], dict[int, float]]:
    """Sequentially add the client minimizing the quadratic class-imbalance
    score sum_c (aggregate p_c - 1/C)^2 of the resulting set."""
    uniform = 1.0 / ev.num_classes
    selected: list[int] = []
    bw: dict[int, float] = {}
    used = 0.0
    mass = np.zeros(ev.num_classes)
    total = 0.0
    pool = list(feasible)
    while pool:
        best_cid = None
        best_score = math.inf
        for cid in pool:
            if used + bstar[cid] > budget.total_bandwidth_hz:
                continue
            agg = (mass + ev.counts[cid] * ev.p[cid]) / (total + ev.counts[cid])
            score = float(np.sum((agg - uniform) ** 2))
            if score < best_score:
                best_score = score
                best_cid = cid
        if best_cid is None:
            break
        selected.append(best_cid)
        bw[best_cid] = bstar[best_cid]
        used += bstar[best_cid]
        mass += ev.counts[best_cid] * ev.p[best_cid]
        total += ev.counts[best_cid]
        pool.remove(best_cid)
    return selected, bw
