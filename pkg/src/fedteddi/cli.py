"""Command-line entry point: run experiment sweeps, validate configs.

Exit codes: 0 success, 2 config error, 3 runtime error.  Independent
(policy, seed) runs can execute in parallel worker threads, capped by the
FEDTEDDI_THREADS environment variable (0 or unset means serial).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__, config, metrics, orchestrator
from .scheduler import POLICY_IDS

__all__ = ["main", "entrypoint"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _parse_list(text: str, cast):
    return [cast(part) for part in text.split(",") if part != ""]


def _worker_count() -> int:
    raw = os.environ.get("FEDTEDDI_THREADS", "")
    if raw == "":
        return 1
    try:
        n = int(raw)
    except ValueError:
        return 1
    if n == 0:
        return os.cpu_count() or 1
    return max(1, n)


def _run_one(cfg: dict, policy: str, seed: int, out_dir: Path) -> Path:
    plan = config.build_plan(cfg, policy, seed)
    records = orchestrator.run_experiment(plan)
    path = out_dir / metrics.metrics_filename(policy, seed)
    metrics.write_metrics(path, records)
    return path


def cmd_run(args) -> int:
    try:
        cfg = config.load_config(args.config)
        violations = config.validate_config(cfg)
        if violations:
            for item in violations:
                print(f"config error: {item}", file=sys.stderr)
            return EXIT_CONFIG
        policies = _parse_list(args.policies, str)
        unknown = [p for p in policies if p not in POLICY_IDS]
        if unknown:
            print(
                f"unknown policy id(s) {', '.join(unknown)}; valid ids: {', '.join(POLICY_IDS)}",
                file=sys.stderr,
            )
            return EXIT_CONFIG
        seeds = _parse_list(args.seeds, int) if args.seeds else [cfg["experiment"]["seed"]]
        if not seeds:
            print("at least one seed is required", file=sys.stderr)
            return EXIT_CONFIG
        targets = _parse_list(args.targets, float)
    except config.ConfigError as e:
        for item in e.violations:
            print(f"config error: {item}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(policy, seed) for policy in policies for seed in seeds]
    written: list[Path] = []
    try:
        workers = _worker_count()
        if workers == 1:
            for policy, seed in jobs:
                written.append(_run_one(cfg, policy, seed, out_dir))
                print(f"wrote {written[-1]}")
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = {
                    pool.submit(_run_one, cfg, policy, seed, out_dir): (policy, seed)
                    for policy, seed in jobs
                }
                for fut in futures:
                    written.append(fut.result())
            for path in sorted(written):
                print(f"wrote {path}")

        files_by_policy = {
            policy: [out_dir / metrics.metrics_filename(policy, seed) for seed in seeds]
            for policy in policies
        }
        summary = metrics.summarize_runs(files_by_policy, targets)
        summary_path = out_dir / "summary.json"
        with open(summary_path, "w") as f:
            json.dump(summary, f, indent=2)
            f.write("\n")
        written.append(summary_path)
        print(f"wrote {summary_path}")
        _print_summary_table(summary)
        return EXIT_OK
    except Exception as e:  # noqa: BLE001 - CLI boundary
        for path in written:
            Path(path).unlink(missing_ok=True)
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def _print_summary_table(summary: dict) -> None:
    targets = summary["targets"]
    header = f"{'policy':<16}{'final acc':>12}" + "".join(
        f"{'rounds@' + format(t, 'g'):>16}" for t in targets
    )
    print(header)
    for policy, info in summary["policies"].items():
        acc = info["final_accuracy_mean"]
        acc_text = f"{acc:.4f}" if acc is not None else "-"
        row = f"{policy:<16}{acc_text:>12}"
        for t in targets:
            cell = info["rounds_to_target"][f"{t}"]
            if cell["mean"] is None:
                row += f"{'not reached':>16}"
            else:
                row += f"{cell['mean']:>10.1f}±{(cell['std'] or 0):<5.1f}"
        print(row)


def cmd_validate(args) -> int:
    try:
        cfg = config.load_config(args.config)
    except config.ConfigError as e:
        for item in e.violations:
            print(f"config error: {item}", file=sys.stderr)
        return EXIT_CONFIG
    violations = config.validate_config(cfg)
    if violations:
        for item in violations:
            print(f"config error: {item}", file=sys.stderr)
        return EXIT_CONFIG
    print("config OK; resolved settings:")
    print(config.resolved_defaults_text(cfg))
    return EXIT_OK


def cmd_version(_args) -> int:
    print(f"fedteddi {__version__}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedteddi",
        description="Federated edge learning simulator with drift/divergence-aware scheduling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run experiments for a policy/seed grid")
    run.add_argument("--config", required=True, help="experiment config file")
    run.add_argument("--policies", default="fedteddi", help="comma-separated policy ids")
    run.add_argument("--seeds", default="", help="comma-separated integer seeds")
    run.add_argument("--out", required=True, help="output directory for metrics files")
    run.add_argument("--targets", default="0.5,0.75", help="accuracy thresholds for the summary")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a config file without running")
    val.add_argument("--config", required=True, help="experiment config file")
    val.set_defaults(func=cmd_validate)

    ver = sub.add_parser("version", help="print the package version")
    ver.set_defaults(func=cmd_version)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
