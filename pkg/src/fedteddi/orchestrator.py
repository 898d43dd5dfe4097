"""End-to-end experiment loop: frames of rounds wiring datastream ->
learning -> wireless -> scheduler, with per-round records.

Every round: the server broadcasts the model, every client trains locally
and reports its distribution and gradient-variance estimate, the scheduler
picks a bandwidth-feasible subset, the selected models are aggregated, and
the per-class gradient-norm estimates are refreshed from the scheduled
clients.  The model carried into the next frame is the one with the lowest
global loss seen anywhere in the frame, including its starting point.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from . import datastream, learning, scheduler, wireless
from .distributions import ClassDistribution, ClassGradientNorms, v_bound_terms
from .learning import Dataset, TrainingConfig
from .rngstreams import derive_seed, substream
from .scheduler import ClientReport, SchedulerConfig
from .wireless import ComputeProfile, LinkBudget, RadioProfile

__all__ = [
    "RadioParams",
    "DiagnosticsConfig",
    "ExperimentPlan",
    "RoundRecord",
    "run_frame",
    "run_experiment",
]


@dataclass(frozen=True)
class RadioParams:
    """Cell-wide radio configuration; per-client distances are drawn once
    per experiment seed, uniform over the cell disc."""

    tx_power_dbm: float = 23.0
    shadow_sigma_db: float = 8.0
    noise_psd_dbm_hz: float = -174.0
    carrier_ghz: float = 3.5
    cell_radius_km: float = 0.25
    min_distance_km: float = 0.001


@dataclass(frozen=True)
class DiagnosticsConfig:
    """User-supplied smoothness/gradient-bound constants for the per-round
    convergence-gap decomposition (logged for inspection only)."""

    beta: float = 1.0
    g: float = 1.0


@dataclass(frozen=True)
class ExperimentPlan:
    """Everything needed to reproduce one experiment run."""

    scenario: datastream.ScenarioSpec
    training: TrainingConfig
    scheduler: SchedulerConfig
    budget: LinkBudget
    policy: str
    rounds_per_frame: list[int]
    seed: int
    eval_dataset: Dataset
    radio: RadioParams = field(default_factory=RadioParams)
    compute: ComputeProfile = field(default_factory=ComputeProfile)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    model_kind: str = "softmax"
    model_hidden: int = 16

    def __post_init__(self):
        if self.policy not in scheduler.POLICY_IDS:
            raise ValueError(f"unknown policy {self.policy!r}")
        if len(self.rounds_per_frame) != self.scenario.num_frames:
            raise ValueError(
                "rounds_per_frame length must equal the scenario's frame count"
            )
        if any(k < 0 for k in self.rounds_per_frame):
            raise ValueError("rounds_per_frame entries must be nonnegative")

    @property
    def num_frames(self) -> int:
        return len(self.rounds_per_frame)


@dataclass(frozen=True)
class RoundRecord:
    """Per-round metrics persisted for analysis and plotting."""

    frame: int
    round_in_frame: int
    selected: tuple[int, ...]
    new_data_selected: int
    bandwidths: dict[int, float]
    round_delay_s: float
    global_loss: float
    test_accuracy: float
    lambda_weight: float
    sigma_hat: float
    objective_terms: tuple[float, float, float] | None
    v_bound: tuple[float, float, float] | None

    def to_json_dict(self) -> dict:
        ot = self.objective_terms
        vb = self.v_bound
        return {
            "frame": self.frame,
            "round": self.round_in_frame,
            "selected": list(self.selected),
            "new_data_selected": self.new_data_selected,
            "bandwidths": {str(c): self.bandwidths[c] for c in sorted(self.bandwidths)},
            "round_delay_s": self.round_delay_s,
            "global_loss": self.global_loss,
            "test_accuracy": self.test_accuracy,
            "lambda": self.lambda_weight,
            "sigma_hat": self.sigma_hat,
            "objective_sampling": None if ot is None else ot[0],
            "objective_divergence": None if ot is None else ot[1],
            "objective_drift": None if ot is None else ot[2],
            "v_iteration": None if vb is None else vb[0],
            "v_sampling": None if vb is None else vb[1],
            "v_divergence": None if vb is None else vb[2],
        }


def _client_distances(plan: ExperimentPlan) -> dict[int, float]:
    rng = substream(plan.seed, "positions")
    u = rng.random(plan.scenario.num_clients)
    r = plan.radio.cell_radius_km * np.sqrt(u)
    return {
        cid: max(float(r[cid]), plan.radio.min_distance_km)
        for cid in range(plan.scenario.num_clients)
    }


def _radio_profiles(plan: ExperimentPlan) -> dict[int, RadioProfile]:
    distances = _client_distances(plan)
    return {
        cid: RadioProfile(
            tx_power_dbm=plan.radio.tx_power_dbm,
            distance_km=distances[cid],
            shadow_sigma_db=plan.radio.shadow_sigma_db,
            noise_psd_dbm_hz=plan.radio.noise_psd_dbm_hz,
            carrier_ghz=plan.radio.carrier_ghz,
        )
        for cid in distances
    }


def _make_model(plan: ExperimentPlan):
    gen = datastream.make_generator(plan.scenario.generator_params)
    return learning.make_model(
        plan.model_kind, gen.dim, plan.scenario.all_classes(), plan.model_hidden
    )


def initial_model(plan: ExperimentPlan) -> np.ndarray:
    """Round-zero parameters: zeros for softmax, small random for the MLP."""
    model = _make_model(plan)
    if plan.model_kind == "softmax":
        return model.init_params()
    return model.init_params(substream(plan.seed, "init"))


def _global_loss(model, params: np.ndarray, states: Mapping[int, datastream.ClientDatasetState]) -> float:
    total = sum(s.sample_count for s in states.values())
    loss = 0.0
    for cid in sorted(states):
        s = states[cid]
        if s.sample_count == 0:
            continue
        loss += (s.sample_count / total) * learning.local_loss(model, params, s.dataset)
    return loss


def _global_per_class_gradient(
    stats: Mapping[int, learning.GradientStats],
    states: Mapping[int, datastream.ClientDatasetState],
    selected,
    num_classes: int,
) -> dict[int, np.ndarray]:
    """Class-c gradient of the scheduled set's pooled class-c data: the
    per-class-count weighted mean of the clients' class gradients."""
    counts = {cid: states[cid].dataset.class_counts(num_classes) for cid in selected}
    out: dict[int, np.ndarray] = {}
    for c in range(num_classes):
        total = sum(int(counts[cid][c]) for cid in selected)
        if total == 0:
            continue
        acc = None
        for cid in sorted(selected):
            k = int(counts[cid][c])
            if k == 0:
                continue
            term = (k / total) * stats[cid].per_class_gradient[c]
            acc = term if acc is None else acc + term
        out[c] = acc
    return out


def run_frame(
    plan: ExperimentPlan,
    frame: int,
    initial_params: np.ndarray,
    states: Mapping[int, datastream.ClientDatasetState],
    prev_distributions: Mapping[int, ClassDistribution] | None = None,
    eta_start: float | None = None,
) -> tuple[np.ndarray, list[RoundRecord]]:
    """Run every round of one frame; datasets must already be advanced.

    ``prev_distributions`` holds each client's distribution at the previous
    frame; when omitted (or at frame 0) the previous frame is taken as
    empty, i.e. every sample counts as newly collected.

    Returns the lowest-global-loss model among the frame's start model and
    every aggregated model, plus one record per round.  Rounds where no
    client is feasible leave the model unchanged.
    """
    rounds = plan.rounds_per_frame[frame]
    records: list[RoundRecord] = []
    if rounds == 0:
        return initial_params.copy(), records

    model = _make_model(plan)
    profiles = _radio_profiles(plan)
    num_classes = plan.scenario.classes_at(frame)
    global_dist = datastream.global_distribution(states)
    arriving = {ev.client for ev in plan.scenario.frames[frame]} if frame > 0 else set()
    frame_cfg = replace(plan.scheduler, rounds_per_frame=rounds)
    norms = ClassGradientNorms.ones(num_classes)

    if eta_start is None:
        rounds_before = sum(plan.rounds_per_frame[:frame])
        eta_start = plan.training.learning_rate * plan.training.lr_decay**rounds_before
    eta = eta_start

    w = initial_params.copy()
    best_w = w.copy()
    best_loss = _global_loss(model, w, states)

    counts_all = {cid: states[cid].sample_count for cid in states}
    total_samples = sum(counts_all.values())

    empty = ClassDistribution(np.zeros(num_classes))
    prev_dists = {
        cid: (prev_distributions[cid] if prev_distributions else empty) for cid in states
    }

    for k in range(1, rounds + 1):
        # fedcgd has no exploration term; its recorded weight is the 0 it uses
        lam = 0.0 if plan.policy == "fedcgd" else scheduler.lambda_at(frame_cfg, k)
        cfg = replace(plan.training, learning_rate=eta)

        reports: dict[int, ClientReport] = {}
        trained: dict[int, np.ndarray] = {}
        stats: dict[int, learning.GradientStats] = {}
        for cid in sorted(states):
            st = states[cid]
            w_n, g_stats = learning.local_train(
                model, w, st.dataset, cfg, derive_seed(plan.seed, "batches", frame, k, cid)
            )
            channel = wireless.path_gain(
                profiles[cid], derive_seed(plan.seed, "channel", frame, k, cid)
            )
            t_cp = wireless.sample_compute_delay(
                plan.compute,
                cfg.tau,
                min(cfg.batch_size, st.sample_count),
                derive_seed(plan.seed, "delay", frame, k, cid),
            )
            trained[cid] = w_n
            stats[cid] = g_stats
            reports[cid] = ClientReport(
                client=cid,
                distribution_now=st.distribution,
                distribution_prev_frame=prev_dists[cid],
                sample_count=st.sample_count,
                sigma_hat=g_stats.variance_estimate,
                compute_delay_s=t_cp,
                channel=channel,
                radio=profiles[cid],
                local_loss=learning.local_loss(model, w, st.dataset),
                update_norm=float(np.linalg.norm(w_n - w)),
            )

        if plan.scheduler.sigma_mode == "fixed":
            sigma_used = plan.scheduler.sigma_fixed
        else:
            sigma_used = sum(
                (counts_all[cid] / total_samples) * reports[cid].sigma_hat
                for cid in sorted(states)
            )

        decision = scheduler.baseline_select(
            plan.policy,
            reports,
            global_dist,
            norms,
            sigma_used,
            plan.training.batch_size,
            lam,
            plan.budget,
            rng_seed=derive_seed(plan.seed, "policy", frame, k),
        )

        if decision.is_empty:
            delay = 0.0
            objective_terms = None
            vb = None
        else:
            used_bw = sum(decision.bandwidth.values())
            if used_bw > plan.budget.total_bandwidth_hz * (1 + 1e-12):
                raise RuntimeError(
                    f"bandwidth constraint violated: {used_bw} > {plan.budget.total_bandwidth_hz}"
                )
            channels = {cid: reports[cid].channel for cid in decision.selected}
            delays = {cid: reports[cid].compute_delay_s for cid in decision.selected}
            delay = wireless.round_delay(
                decision.selected, delays, decision.bandwidth, profiles, channels, plan.budget
            )
            if delay > plan.budget.deadline_s * (1 + 1e-12):
                raise RuntimeError(
                    f"deadline constraint violated: {delay} > {plan.budget.deadline_s}"
                )
            w = learning.aggregate(
                {cid: trained[cid] for cid in decision.selected},
                {cid: counts_all[cid] for cid in decision.selected},
            )
            objective_terms = decision.terms
            vb = v_bound_terms(
                cfg.tau,
                eta,
                plan.diagnostics.beta,
                plan.diagnostics.g,
                sigma_used,
                plan.training.batch_size,
                len(decision.selected),
                decision.terms[1],
            )
            norms = scheduler.estimate_class_norms(
                {cid: stats[cid].per_class_gradient for cid in decision.selected},
                _global_per_class_gradient(stats, states, decision.selected, num_classes),
                {cid: reports[cid].distribution_now for cid in decision.selected},
                global_dist,
                norms,
            )

        eta *= plan.training.lr_decay
        loss = _global_loss(model, w, states)
        acc = learning.model_accuracy(model, w, plan.eval_dataset)
        if loss < best_loss:
            best_loss = loss
            best_w = w.copy()
        records.append(
            RoundRecord(
                frame=frame,
                round_in_frame=k,
                selected=decision.selected,
                new_data_selected=sum(1 for c in decision.selected if c in arriving),
                bandwidths=dict(decision.bandwidth),
                round_delay_s=delay,
                global_loss=loss,
                test_accuracy=acc,
                lambda_weight=lam,
                sigma_hat=sigma_used,
                objective_terms=objective_terms,
                v_bound=vb,
            )
        )

    return best_w, records


def run_experiment(plan: ExperimentPlan) -> list[RoundRecord]:
    """Run all frames, carrying the lowest-loss model across frame
    boundaries.  Fully deterministic for a given plan."""
    states = datastream.build_initial_states(plan.scenario)
    w = initial_model(plan)
    records: list[RoundRecord] = []
    prev: Mapping[int, ClassDistribution] | None = None
    for frame in range(plan.num_frames):
        if frame > 0:
            prev = {cid: states[cid].distribution for cid in states}
            states = datastream.apply_frame_events(plan.scenario, states, frame)
        w, frame_records = run_frame(plan, frame, w, states, prev_distributions=prev)
        records.extend(frame_records)
    return records
