"""Experiment configuration: a YAML key-value tree with preset layering.

A config file may name a parent via ``extends`` (path relative to itself);
child keys override parent keys map-by-map, lists replace wholesale.
Validation reports every violation with its key path, not just the first.
Radio and compute defaults follow the standard urban-macro evaluation
setup (20 MHz, 23 dBm, -174 dBm/Hz, 3.5 GHz, 250 m cell, 8 dB shadowing,
0.5 ms/sample minimum compute, 2.0 samples/ms rate parameter).
"""

from __future__ import annotations

import copy
from pathlib import Path
from typing import Any

import yaml

from . import datastream
from .learning import TrainingConfig
from .orchestrator import DiagnosticsConfig, ExperimentPlan, RadioParams
from .scheduler import SchedulerConfig
from .wireless import ComputeProfile, LinkBudget

__all__ = [
    "ConfigError",
    "DEFAULTS",
    "load_config",
    "validate_config",
    "build_plan",
    "resolved_defaults_text",
]


class ConfigError(ValueError):
    """Raised when a config file cannot be loaded or fails validation."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


DEFAULTS: dict[str, Any] = {
    "experiment": {
        "seed": 1,
        "rounds_per_frame": [30, 60],
        "eval_samples_per_class": 40,
        "model": "softmax",
        "model_hidden": 16,
    },
    "training": {
        "tau": 5,
        "batch_size": 32,
        "learning_rate": 0.05,
        "lr_decay": 0.9992,
        "momentum": 0.0,
    },
    "scheduler": {
        "lambda0": 2.0,
        "sigma": "estimated",
        "scan_all_candidates": False,
    },
    "wireless": {
        "total_bandwidth_mhz": 20.0,
        "tx_power_dbm": 23.0,
        "noise_psd_dbm_hz": -174.0,
        "carrier_ghz": 3.5,
        "cell_radius_m": 250.0,
        "shadow_sigma_db": 8.0,
        "deadline_s": 1.0,
        "model_bits": 2.0e7,
    },
    "compute": {
        "min_time_per_sample_ms": 0.5,
        "rate_samples_per_ms": 2.0,
    },
    "diagnostics": {
        "beta": 1.0,
        "g": 1.0,
    },
    "scenario": {
        "kind": "streaming",
        "num_clients": 30,
        "capacity": 120,
        "initial_classes": 6,
        "new_classes": 3,
        "arriving_clients": 12,
        "one_class_clients": 20,
        "skew": 3.0,
        "generator": {
            "id": "gaussian",
            "dim": 32,
            "noise_sigma": 1.0,
            "mean_scale": 3.0,
            "mean_seed": 7,
        },
    },
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path) -> dict:
    """Load a config file, resolving its ``extends`` chain onto the defaults."""
    chain: list[dict] = []
    seen: set[Path] = set()
    current = Path(path)
    while True:
        current = current.resolve()
        if current in seen:
            raise ConfigError([f"extends cycle involving {current}"])
        seen.add(current)
        try:
            with open(current) as f:
                tree = yaml.safe_load(f) or {}
        except FileNotFoundError:
            raise ConfigError([f"config file not found: {current}"])
        except yaml.YAMLError as e:
            raise ConfigError([f"{current}: YAML parse error: {e}"])
        if not isinstance(tree, dict):
            raise ConfigError([f"{current}: top level must be a mapping"])
        chain.append(tree)
        parent = tree.get("extends")
        if parent is None:
            break
        current = current.parent / parent
    merged = copy.deepcopy(DEFAULTS)
    for tree in reversed(chain):
        tree = {k: v for k, v in tree.items() if k != "extends"}
        merged = _deep_merge(merged, tree)
    return merged


def _check(violations: list[str], ok: bool, keypath: str, message: str) -> None:
    if not ok:
        violations.append(f"{keypath}: {message}")


def _num(cfg: dict, *path: str, default=None):
    node: Any = cfg
    for p in path:
        if not isinstance(node, dict) or p not in node:
            return default
        node = node[p]
    return node


def validate_config(cfg: dict) -> list[str]:
    """Return every violation found ("" empty list means valid)."""
    v: list[str] = []
    is_num = lambda x: isinstance(x, (int, float)) and not isinstance(x, bool)
    is_int = lambda x: isinstance(x, int) and not isinstance(x, bool)

    exp = cfg.get("experiment", {})
    rpf = exp.get("rounds_per_frame")
    _check(v, isinstance(rpf, list) and len(rpf) >= 1, "experiment.rounds_per_frame", "must be a nonempty list")
    if isinstance(rpf, list):
        for i, k in enumerate(rpf):
            _check(v, is_int(k) and k >= 0, f"experiment.rounds_per_frame[{i}]", "must be a nonnegative integer")
    _check(v, is_int(exp.get("seed")), "experiment.seed", "must be an integer")
    _check(v, is_int(exp.get("eval_samples_per_class")) and exp.get("eval_samples_per_class", 0) >= 1,
           "experiment.eval_samples_per_class", "must be a positive integer")
    _check(v, exp.get("model") in ("softmax", "mlp"), "experiment.model", "must be 'softmax' or 'mlp'")
    _check(v, is_int(exp.get("model_hidden")) and exp.get("model_hidden", 0) >= 1,
           "experiment.model_hidden", "must be a positive integer")

    tr = cfg.get("training", {})
    _check(v, is_int(tr.get("tau")) and tr.get("tau", 0) >= 1, "training.tau", "must be an integer >= 1")
    _check(v, is_int(tr.get("batch_size")) and tr.get("batch_size", 0) >= 1,
           "training.batch_size", "must be an integer >= 1")
    _check(v, is_num(tr.get("learning_rate")) and tr.get("learning_rate", 0) > 0,
           "training.learning_rate", "must be positive")
    _check(v, is_num(tr.get("lr_decay")) and 0 < tr.get("lr_decay", 0) <= 1,
           "training.lr_decay", "must be in (0, 1]")
    _check(v, is_num(tr.get("momentum")) and 0 <= tr.get("momentum", -1) < 1,
           "training.momentum", "must be in [0, 1)")

    sc = cfg.get("scheduler", {})
    _check(v, is_num(sc.get("lambda0")) and sc.get("lambda0", -1) >= 0,
           "scheduler.lambda0", "must be nonnegative")
    sigma = sc.get("sigma")
    _check(v, sigma == "estimated" or (is_num(sigma) and sigma >= 0),
           "scheduler.sigma", "must be 'estimated' or a nonnegative number")
    _check(v, isinstance(sc.get("scan_all_candidates"), bool),
           "scheduler.scan_all_candidates", "must be a boolean")

    wl = cfg.get("wireless", {})
    for key in ("total_bandwidth_mhz", "carrier_ghz", "cell_radius_m", "deadline_s", "model_bits"):
        _check(v, is_num(wl.get(key)) and wl.get(key, 0) > 0, f"wireless.{key}", "must be positive")
    _check(v, is_num(wl.get("tx_power_dbm")), "wireless.tx_power_dbm", "must be a number")
    _check(v, is_num(wl.get("noise_psd_dbm_hz")), "wireless.noise_psd_dbm_hz", "must be a number")
    _check(v, is_num(wl.get("shadow_sigma_db")) and wl.get("shadow_sigma_db", -1) >= 0,
           "wireless.shadow_sigma_db", "must be nonnegative")

    cp = cfg.get("compute", {})
    for key in ("min_time_per_sample_ms", "rate_samples_per_ms"):
        _check(v, is_num(cp.get(key)) and cp.get(key, 0) > 0, f"compute.{key}", "must be positive")

    dg = cfg.get("diagnostics", {})
    for key in ("beta", "g"):
        _check(v, is_num(dg.get(key)) and dg.get(key, 0) > 0, f"diagnostics.{key}", "must be positive")

    sn = cfg.get("scenario", {})
    kind = sn.get("kind")
    _check(v, kind in ("streaming", "explicit"), "scenario.kind", "must be 'streaming' or 'explicit'")
    _check(v, is_int(sn.get("num_clients")) and sn.get("num_clients", 0) >= 1,
           "scenario.num_clients", "must be a positive integer")
    _check(v, is_int(sn.get("capacity")) and sn.get("capacity", 0) >= 1,
           "scenario.capacity", "must be a positive integer")
    if kind == "streaming":
        for key in ("initial_classes", "new_classes", "arriving_clients", "one_class_clients"):
            _check(v, is_int(sn.get(key)) and sn.get(key, 0) >= 1,
                   f"scenario.{key}", "must be a positive integer")
        _check(v, is_num(sn.get("skew")) and sn.get("skew", 0) > 0, "scenario.skew", "must be positive")
        if is_int(sn.get("num_clients")):
            n = sn["num_clients"]
            for key in ("arriving_clients", "one_class_clients"):
                if is_int(sn.get(key)):
                    _check(v, sn[key] <= n, f"scenario.{key}", f"cannot exceed num_clients ({n})")
    if kind == "explicit":
        _check(v, isinstance(sn.get("initial_assignment"), dict),
               "scenario.initial_assignment", "must map client ids to [class, count] pairs")
        _check(v, isinstance(sn.get("frames"), list), "scenario.frames", "must be a list of event lists")

    gen = sn.get("generator", {})
    _check(v, gen.get("id") == "gaussian", "scenario.generator.id", "must be 'gaussian'")
    _check(v, is_int(gen.get("dim")) and gen.get("dim", 0) >= 1, "scenario.generator.dim",
           "must be a positive integer")
    _check(v, is_num(gen.get("noise_sigma")) and gen.get("noise_sigma", 0) > 0,
           "scenario.generator.noise_sigma", "must be positive")

    # Cross-field: frame counts must line up for explicit scenarios.
    if kind == "explicit" and isinstance(rpf, list) and isinstance(sn.get("frames"), list):
        _check(v, len(sn["frames"]) == len(rpf), "scenario.frames",
               f"must have one entry per rounds_per_frame entry ({len(rpf)})")
    return v


def _build_scenario(cfg: dict, seed: int) -> datastream.ScenarioSpec:
    sn = cfg["scenario"]
    gen_params = dict(sn["generator"])
    if sn["kind"] == "streaming":
        frames = len(cfg["experiment"]["rounds_per_frame"])
        return datastream.build_streaming_scenario(
            seed=seed,
            num_clients=sn["num_clients"],
            capacity=sn["capacity"],
            initial_classes=sn["initial_classes"],
            new_classes=sn["new_classes"],
            arriving_clients=sn["arriving_clients"],
            one_class_clients=sn["one_class_clients"],
            skew=sn["skew"],
            num_streaming_frames=frames - 1,
            generator_params=gen_params,
        )
    initial = {
        int(cid): [(int(c), int(k)) for c, k in pairs]
        for cid, pairs in sn["initial_assignment"].items()
    }
    frames: list[list[datastream.ArrivalEvent]] = []
    for l, events in enumerate(sn["frames"]):
        frames.append(
            [
                datastream.ArrivalEvent(
                    frame=l,
                    client=int(ev["client"]),
                    new_class=int(ev["new_class"]),
                    new_sample_count=int(ev["count"]),
                )
                for ev in (events or [])
            ]
        )
    return datastream.ScenarioSpec(
        num_clients=sn["num_clients"],
        capacity=sn["capacity"],
        frames=frames,
        initial_assignment=initial,
        generator_params=gen_params,
        seed=seed,
    )


def build_plan(cfg: dict, policy: str, seed: int) -> ExperimentPlan:
    """Construct the experiment plan for one (policy, seed) pair."""
    violations = validate_config(cfg)
    if violations:
        raise ConfigError(violations)
    scenario = _build_scenario(cfg, seed)
    exp, tr, sc, wl, cp, dg = (
        cfg["experiment"], cfg["training"], cfg["scheduler"],
        cfg["wireless"], cfg["compute"], cfg["diagnostics"],
    )
    training = TrainingConfig(
        tau=tr["tau"],
        batch_size=tr["batch_size"],
        learning_rate=tr["learning_rate"],
        lr_decay=tr["lr_decay"],
        momentum=tr["momentum"],
    )
    sched = SchedulerConfig(
        lambda0=sc["lambda0"],
        sigma_mode="estimated" if sc["sigma"] == "estimated" else "fixed",
        sigma_fixed=1.0 if sc["sigma"] == "estimated" else float(sc["sigma"]),
        scan_all_candidates=sc["scan_all_candidates"],
    )
    budget = LinkBudget(
        model_bits=float(wl["model_bits"]),
        deadline_s=float(wl["deadline_s"]),
        total_bandwidth_hz=float(wl["total_bandwidth_mhz"]) * 1e6,
    )
    radio = RadioParams(
        tx_power_dbm=float(wl["tx_power_dbm"]),
        shadow_sigma_db=float(wl["shadow_sigma_db"]),
        noise_psd_dbm_hz=float(wl["noise_psd_dbm_hz"]),
        carrier_ghz=float(wl["carrier_ghz"]),
        cell_radius_km=float(wl["cell_radius_m"]) / 1000.0,
    )
    compute = ComputeProfile(
        min_time_per_sample_s=float(cp["min_time_per_sample_ms"]) * 1e-3,
        rate_samples_per_s=float(cp["rate_samples_per_ms"]) * 1e3,
    )
    eval_dataset = datastream.make_eval_dataset(scenario, exp["eval_samples_per_class"])
    return ExperimentPlan(
        scenario=scenario,
        training=training,
        scheduler=sched,
        budget=budget,
        policy=policy,
        rounds_per_frame=list(exp["rounds_per_frame"]),
        seed=seed,
        eval_dataset=eval_dataset,
        radio=radio,
        compute=compute,
        diagnostics=DiagnosticsConfig(beta=float(dg["beta"]), g=float(dg["g"])),
        model_kind=exp["model"],
        model_hidden=exp["model_hidden"],
    )


def resolved_defaults_text(cfg: dict) -> str:
    """Human-readable dump of the fully resolved config tree."""
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=False)
