"""Command-line entry points: simulate | couple | verify | metric.

Exit codes: 0 success, 1 usage or configuration error, 2 verification
failures (failure count in the JSON payload).  All file outputs are
deterministic in (config, seed); wall-clock timing goes to stdout only.
"""

from __future__ import annotations

import argparse
import json
import multiprocessing
import os
import sys
import time
from typing import Optional, Sequence

import numpy as np

from .config_io import (
    ConfigError,
    ExperimentConfig,
    dumps_canonical,
    parse_points_file,
    status_dict,
    trajectory_lines,
)
from .configuration import Configuration
from .coupling import check_monotone_premise, inclusion_flags, simulate_coupled
from .metric import dist, euclidean_matching_distance, optimal_assignment
from .rng import StreamKey
from .simulate import simulate
from .verify import SUITES, default_jobs, run_suite


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit code contract: usage errors are 1
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="sbdsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="simulate independent trajectories")
    p_sim.add_argument("--config", required=True, help="experiment config JSON")
    p_sim.add_argument("--seed", type=int, default=None, help="override master seed")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--jobs", type=int, default=1, help="parallel workers")

    p_cpl = sub.add_parser("couple", help="simulate a monotone coupled pair")
    p_cpl.add_argument("--config", required=True)
    p_cpl.add_argument("--seed", type=int, default=None)
    p_cpl.add_argument("--out", required=True)
    p_cpl.add_argument("--jobs", type=int, default=1)
    p_cpl.add_argument(
        "--check-premise",
        action="store_true",
        help="probe the rate monotonicity premise before running",
    )

    p_ver = sub.add_parser("verify", help="run statistical verification suites")
    p_ver.add_argument(
        "suite",
        choices=sorted(SUITES) + ["all"],
        help="suite name or 'all'",
    )
    p_ver.add_argument("--seed", type=int, default=20260808)
    p_ver.add_argument("--scale", type=float, default=1.0, help="sample-size scale factor")
    p_ver.add_argument("--jobs", type=int, default=None)
    p_ver.add_argument("--out", default=None, help="directory for the JSON report")

    p_met = sub.add_parser("metric", help="configuration distance between two point lists")
    p_met.add_argument("file_a")
    p_met.add_argument("file_b")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "couple":
            return _cmd_couple(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "metric":
            return _cmd_metric(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


def _load_config(path: str, seed_override: Optional[int]) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if "command" in raw and "config" in raw:
        # a manifest: rerun from its embedded config
        raw = raw["config"]
    cfg = ExperimentConfig.from_dict(raw)
    if seed_override is not None:
        cfg = cfg.with_seed(seed_override)
    return cfg


_WORKER_CFG: ExperimentConfig | None = None


def _init_worker(cfg_dict: dict) -> None:
    global _WORKER_CFG
    _WORKER_CFG = ExperimentConfig.from_dict(cfg_dict)


def _simulate_one(j: int) -> tuple[int, list[str], dict]:
    cfg = _WORKER_CFG
    key = StreamKey(cfg.master_seed, j)
    model = cfg.build_model()
    initial = cfg.build_initial(key)
    traj = simulate(model, initial, cfg.horizon, key, cfg.caps)
    return j, trajectory_lines(traj, j), status_dict(traj)


def _cmd_simulate(args) -> int:
    cfg = _load_config(args.config, args.seed)
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    if args.jobs > 1:
        with multiprocessing.Pool(
            args.jobs, initializer=_init_worker, initargs=(cfg.to_dict(),)
        ) as pool:
            results = pool.map(_simulate_one, range(cfg.n_traj))
    else:
        _init_worker(cfg.to_dict())
        results = [_simulate_one(j) for j in range(cfg.n_traj)]
    status_counts: dict[str, int] = {}
    statuses = []
    for j, lines, status in results:
        with open(os.path.join(args.out, f"trajectory_{j:05d}.jsonl"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        status_counts[status["kind"]] = status_counts.get(status["kind"], 0) + 1
        statuses.append(status)
    manifest = {
        "schema_version": 1,
        "command": "simulate",
        "master_seed": cfg.master_seed,
        "config_sha256": cfg.config_hash(),
        "config": cfg.to_dict(),
        "n_traj": cfg.n_traj,
        "status_counts": status_counts,
        "statuses": statuses,
    }
    with open(os.path.join(args.out, "manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(dumps_canonical(manifest) + "\n")
    wall = time.perf_counter() - t0
    print(
        f"simulate: {cfg.n_traj} trajectories, statuses {status_counts}, "
        f"{wall:.2f}s wall, outputs in {args.out}"
    )
    return 0


def _cmd_couple(args) -> int:
    cfg = _load_config(args.config, args.seed)
    if cfg.model2 is None:
        raise ConfigError("couple requires a model2 descriptor")
    if cfg.initial_upper is None:
        raise ConfigError("couple requires initial_upper")
    if "points" not in cfg.initial or "points" not in cfg.initial_upper:
        raise ConfigError("couple requires explicit initial point lists")
    m1 = cfg.build_model(cfg.model, "model")
    m2 = cfg.build_model(cfg.model2, "model2")
    lower0 = cfg.build_initial(StreamKey(cfg.master_seed), cfg.initial)
    upper0 = cfg.build_initial(StreamKey(cfg.master_seed), cfg.initial_upper)

    if args.check_premise:
        report = check_monotone_premise(
            m1, m2, trials=500, max_n=8, rng=np.random.default_rng(cfg.master_seed)
        )
        if not report.passed:
            w = report.witness
            print(
                "premise check failed: "
                f"{w.kind} rates violate monotonicity at x = {w.point}, "
                f"rate1 = {w.rate_1:g}, rate2 = {w.rate_2:g}",
                file=sys.stderr,
            )
            return 2

    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    any_violation = False
    status_counts: dict[str, int] = {}
    for j in range(cfg.n_traj):
        pair = simulate_coupled(
            m1, m2, lower0, upper0, cfg.horizon, StreamKey(cfg.master_seed, j), cfg.caps
        )
        flags = inclusion_flags(pair)
        for name, traj in (("lower", pair.lower), ("upper", pair.upper)):
            path = os.path.join(args.out, f"{name}_{j:05d}.jsonl")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("\n".join(trajectory_lines(traj, j)) + "\n")
        with open(os.path.join(args.out, f"audit_{j:05d}.jsonl"), "w", encoding="utf-8") as fh:
            for t, ok in flags:
                fh.write(dumps_canonical({"t": t, "inclusion": ok}) + "\n")
        if not all(ok for _, ok in flags):
            any_violation = True
        s = status_dict(pair.upper)
        status_counts[s["kind"]] = status_counts.get(s["kind"], 0) + 1
    manifest = {
        "schema_version": 1,
        "command": "couple",
        "master_seed": cfg.master_seed,
        "config_sha256": cfg.config_hash(),
        "config": cfg.to_dict(),
        "n_traj": cfg.n_traj,
        "status_counts": status_counts,
        "inclusion_ok": not any_violation,
    }
    with open(os.path.join(args.out, "manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(dumps_canonical(manifest) + "\n")
    wall = time.perf_counter() - t0
    print(f"couple: {cfg.n_traj} coupled runs, inclusion_ok={not any_violation}, {wall:.2f}s wall")
    return 2 if any_violation else 0


def _cmd_verify(args) -> int:
    suites = sorted(SUITES) if args.suite == "all" else [args.suite]
    jobs = args.jobs if args.jobs is not None else default_jobs()
    all_checks = {}
    failures = 0
    t0 = time.perf_counter()
    for name in suites:
        checks = run_suite(name, args.seed, scale=args.scale, jobs=jobs)
        all_checks[name] = [c.to_dict() for c in checks]
        failures += sum(1 for c in checks if not c.passed)
        for c in checks:
            mark = "pass" if c.passed else "FAIL"
            print(f"[{mark}] {name}/{c.name}: statistic={c.statistic:.6g} "
                  f"threshold={c.threshold:.6g}  {c.detail}")
    report = {
        "schema_version": 1,
        "seed": args.seed,
        "scale": args.scale,
        "suites": all_checks,
        "failures": failures,
    }
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "verify_report.json"), "w", encoding="utf-8") as fh:
            fh.write(dumps_canonical(report) + "\n")
    else:
        print(dumps_canonical(report))
    print(f"verify: {failures} failure(s), {time.perf_counter() - t0:.2f}s wall")
    return 0 if failures == 0 else 2


def _cmd_metric(args) -> int:
    try:
        pts_a = parse_points_file(args.file_a)
        pts_b = parse_points_file(args.file_b)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if pts_a and pts_b and len(pts_a[0]) != len(pts_b[0]):
        print("error: point lists disagree in dimension", file=sys.stderr)
        return 1
    dim = len(pts_a[0]) if pts_a else (len(pts_b[0]) if pts_b else 1)
    # keep file order so assignment indices refer to input lines
    conf_a = _file_order_config(pts_a, dim)
    conf_b = _file_order_config(pts_b, dim)
    out: dict = {"dist": dist(conf_a, conf_b)}
    if len(conf_a) != len(conf_b):
        out["note"] = "cardinality differs"
    else:
        rows, cols = optimal_assignment(conf_a, conf_b)
        out["d_eucl"] = euclidean_matching_distance(conf_a, conf_b)
        out["assignment"] = [[int(i), int(j)] for i, j in zip(rows, cols)]
    print(dumps_canonical(out))
    return 0


def _file_order_config(pts: list, dim: int) -> Configuration:
    if not pts:
        return Configuration.empty(dim)
    arr = np.asarray(pts, dtype=float).reshape(len(pts), dim)
    return Configuration(arr, tuple(range(len(pts))), dim)


if __name__ == "__main__":
    sys.exit(main())
