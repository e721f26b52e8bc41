"""Batch front end: generate scenarios, deploy, evaluate, sweep.

Data goes to files (JSON plans and traces, RFC-4180 CSV tables); log lines go
to stderr.  Repeated runs with the same inputs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import statistics
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .baseline import BruteForceConfig, CirclePackingConfig, PackingError, brute_force_optimum, circle_pack_deploy
from .channel import Beam, ENVIRONMENTS, RadioConfig, dbm_to_mw
from .clustering import Cluster, ClusterSet, ClusteringConfig, NoConvergenceError, ellipse_clustering
from .deployment import DeploymentPlan, UavDeployment, deploy, evaluate
from .geometry import Ellipse, mvee
from .scenario import (
    PcpConfig,
    Region,
    Scenario,
    ScenarioFormatError,
    dump_canonical_json,
    environment_from_dict,
    environment_to_dict,
    generate_pcp,
    load_scenario,
    radio_from_dict,
    radio_to_dict,
    save_scenario,
)

__all__ = ["main", "plan_from_dict", "plan_to_dict"]

EXIT_OK = 0
EXIT_PARSE_ERROR = 2
EXIT_NO_CONVERGENCE = 3
EXIT_INFEASIBLE = 4

log = logging.getLogger("uavcell")

_METHODS = ("ellipse", "circle", "brute")


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ScenarioFormatError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        if isinstance(exc, PackingError):
            log.error("infeasible baseline: %s", exc)
            return EXIT_INFEASIBLE
        log.error("%s", exc)
        return EXIT_PARSE_ERROR
    except NoConvergenceError as exc:
        log.error("%s", exc)
        return EXIT_NO_CONVERGENCE


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavcell", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write seeded clustered-user scenarios")
    gen.add_argument("--out-dir", required=True)
    gen.add_argument("--count", type=int, default=1)
    gen.add_argument("--master-seed", type=int, default=0)
    gen.add_argument("--width", type=float, default=1000.0)
    gen.add_argument("--height", type=float, default=1000.0)
    gen.add_argument("--parent-intensity-per-km2", type=float, default=9.0)
    gen.add_argument("--cluster-radius", type=float, default=80.0)
    gen.add_argument("--mean-daughters", type=float, default=36.0)
    _radio_flags(gen)
    _clustering_flags(gen)
    gen.set_defaults(handler=cmd_generate)

    dep = sub.add_parser("deploy", help="plan a deployment for one scenario")
    dep.add_argument("scenario")
    dep.add_argument("--out-dir", required=True)
    dep.add_argument("--method", choices=_METHODS, default="ellipse")
    dep.add_argument("--h-max", type=float, default=1000.0)
    dep.add_argument("--num-uavs", type=int, help="cell count for circle/brute methods")
    dep.add_argument("--fixed-altitude", type=float, default=150.0)
    dep.add_argument("--fixed-power-dbm", type=float)
    dep.add_argument("--beam-deg", type=float, help="circular beam half-width for circle method")
    dep.add_argument("--seed", type=int, help="override the scenario clustering seed")
    _radio_flags(dep, overrides=True)
    _clustering_flags(dep, overrides=True)
    dep.set_defaults(handler=cmd_deploy)

    ev = sub.add_parser("evaluate", help="score a plan against a scenario")
    ev.add_argument("plan")
    ev.add_argument("scenario")
    ev.add_argument("--out-dir", required=True)
    ev.set_defaults(handler=cmd_evaluate)

    sw = sub.add_parser("sweep", help="run a manifest of scenarios and aggregate")
    sw.add_argument("manifest")
    sw.set_defaults(handler=cmd_sweep)
    return parser


def _radio_flags(cmd, overrides: bool = False) -> None:
    # override-style commands leave unset flags at None and keep the scenario values
    cmd.add_argument("--env", choices=sorted(ENVIRONMENTS), default=None if overrides else "urban")
    cmd.add_argument("--carrier-frequency-hz", type=float, default=None if overrides else 2.0e9)
    cmd.add_argument("--bandwidth-hz", type=float, default=None if overrides else 20.0e6)
    cmd.add_argument("--snr-threshold-db", type=float, default=None if overrides else 0.0)
    cmd.add_argument("--noise-psd-dbm-hz", type=float, default=None if overrides else -170.0)


def _clustering_flags(cmd, overrides: bool = False) -> None:
    cmd.add_argument("--k-max", type=int, default=None if overrides else 8)
    cmd.add_argument("--max-outer-iterations", type=int, default=None if overrides else 50)


def cmd_generate(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    region = Region(width_m=args.width, height_m=args.height)
    radio = RadioConfig(
        carrier_frequency_hz=args.carrier_frequency_hz,
        noise_psd_dbm_hz=args.noise_psd_dbm_hz,
        bandwidth_hz=args.bandwidth_hz,
        snr_threshold_db=args.snr_threshold_db,
    )
    env = ENVIRONMENTS[args.env]
    clustering = ClusteringConfig(k_max=args.k_max, max_outer_iterations=args.max_outer_iterations)
    rng = np.random.default_rng(args.master_seed)
    seeds = rng.integers(0, 2**62, size=max(args.count, 0))
    for i in range(args.count):
        pcp, users = _nonempty_realization(region, int(seeds[i]), args)
        scenario = Scenario(
            region=region,
            users=users,
            environment=env,
            radio=radio,
            clustering=replace(clustering, rng_seed=pcp.seed),
            pcp=pcp,
        )
        path = out_dir / f"scenario_{i:03d}.json"
        save_scenario(scenario, path)
        log.info("wrote %s (%d users)", path, len(users))
    return EXIT_OK


def _nonempty_realization(region: Region, seed: int, args) -> tuple[PcpConfig, np.ndarray]:
    base = PcpConfig(
        parent_intensity_per_m2=args.parent_intensity_per_km2 / 1e6,
        cluster_radius_m=args.cluster_radius,
        mean_daughters=args.mean_daughters,
        seed=seed,
    )
    cfg = base
    for attempt in range(1, 1001):
        users = generate_pcp(region, cfg)
        if len(users):
            return cfg, users
        # empty draw: reseed deterministically and try again
        cfg = replace(base, seed=(seed + attempt * 0x9E3779B97F4A7C15) % 2**62)
    raise ValueError("could not draw a non-empty scenario; intensity too low")


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    env = scenario.environment if args.env is None else ENVIRONMENTS[args.env]
    radio = scenario.radio
    for flag, field_name in (
        ("carrier_frequency_hz", "carrier_frequency_hz"),
        ("bandwidth_hz", "bandwidth_hz"),
        ("snr_threshold_db", "snr_threshold_db"),
        ("noise_psd_dbm_hz", "noise_psd_dbm_hz"),
    ):
        value = getattr(args, flag)
        if value is not None:
            radio = replace(radio, **{field_name: value})
    clustering = scenario.clustering
    if args.k_max is not None:
        clustering = replace(clustering, k_max=args.k_max)
    if args.max_outer_iterations is not None:
        clustering = replace(clustering, max_outer_iterations=args.max_outer_iterations)
    if getattr(args, "seed", None) is not None:
        clustering = replace(clustering, rng_seed=args.seed)
    return replace(scenario, environment=env, radio=radio, clustering=clustering)


def cmd_deploy(args) -> int:
    scenario = _apply_overrides(load_scenario(args.scenario), args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.method == "ellipse":
        try:
            m, cs, trace = ellipse_clustering(scenario.users, scenario.clustering)
        except NoConvergenceError as exc:
            _write_json(out_dir / "trace.json", exc.trace.to_dict())
            log.error("%s", exc)
            return EXIT_NO_CONVERGENCE
        plan = deploy(cs, scenario.environment, scenario.radio, h_max=args.h_max)
        _write_json(out_dir / "trace.json", trace.to_dict())
        log.info("%d cells after %d iterations", m, len(trace.iterations))
    elif args.method == "circle":
        if args.num_uavs is None:
            raise ValueError("circle method needs --num-uavs")
        beam = None
        if args.beam_deg is not None:
            beam = Beam(theta1_deg=args.beam_deg, theta2_deg=args.beam_deg)
        cfg = CirclePackingConfig(
            num_uavs=args.num_uavs,
            fixed_altitude_m=args.fixed_altitude,
            fixed_power_dbm=args.fixed_power_dbm,
            beam=beam,
        )
        plan = circle_pack_deploy(scenario, cfg)
    else:
        num = args.num_uavs if args.num_uavs is not None else min(3, len(scenario.users))
        groups, _ = brute_force_optimum(
            scenario.users, num, scenario.environment, scenario.radio, h_max=args.h_max
        )
        clusters = [Cluster(frozenset(g), mvee(scenario.users[sorted(g)])) for g in groups]
        cs = ClusterSet(users=scenario.users, clusters=clusters)
        plan = deploy(cs, scenario.environment, scenario.radio, h_max=args.h_max)

    _write_json(out_dir / "plan.json", plan_to_dict(plan, args.method))
    log.info("plan: %d UAVs, %.6g mW total", len(plan.uavs), plan.total_power_mw)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    plan = _load_plan(args.plan)
    scenario = load_scenario(args.scenario)
    metrics = evaluate(plan, scenario.users)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    _write_csv(
        out_dir / "metrics.csv",
        ["scenario", "num_users", "num_uavs", "coverage_probability", "total_power_mw", "min_snr_db", "mean_throughput_bps"],
        [[
            Path(args.scenario).name,
            len(scenario.users),
            metrics.num_uavs,
            metrics.coverage_probability,
            metrics.total_power_mw,
            min(metrics.per_user_snr_db),
            statistics.fmean(metrics.per_user_throughput_bps),
        ]],
    )
    ordered = sorted(metrics.per_user_throughput_bps)
    n = len(ordered)
    _write_csv(
        out_dir / "throughput_cdf.csv",
        ["throughput_bps", "cdf"],
        [[value, (i + 1) / n] for i, value in enumerate(ordered)],
    )
    log.info("coverage %.4f, total power %.6g mW", metrics.coverage_probability, metrics.total_power_mw)
    return EXIT_OK


def cmd_sweep(args) -> int:
    manifest_path = Path(args.manifest)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    known = {"scenarios", "generate", "methods", "out_dir", "overrides", "circle", "brute"}
    unknown = set(manifest) - known
    if unknown:
        raise ValueError(f"{manifest_path}: unknown manifest keys {sorted(unknown)}")
    if "out_dir" not in manifest:
        raise ValueError(f"{manifest_path}: manifest needs 'out_dir'")
    out_dir = Path(manifest["out_dir"])
    if not out_dir.is_absolute():
        out_dir = manifest_path.parent / out_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    scenario_paths = [
        p if Path(p).is_absolute() else manifest_path.parent / p
        for p in manifest.get("scenarios", [])
    ]
    if "generate" in manifest:
        scenario_paths += _sweep_generate(manifest["generate"], out_dir)
    if not scenario_paths:
        raise ValueError(f"{manifest_path}: no scenarios given or generated")

    methods = manifest.get("methods", ["ellipse"])
    bad = [m for m in methods if m not in _METHODS]
    if bad:
        raise ValueError(f"{manifest_path}: unknown methods {bad}")

    rows, aggregates, failures = _run_sweep(manifest, methods, scenario_paths)
    _write_csv(
        out_dir / "runs.csv",
        ["method", "scenario", "num_users", "num_uavs", "total_power_mw", "coverage_probability", "iterations", "converged"],
        rows,
    )
    _write_csv(
        out_dir / "aggregate.csv",
        ["method", "num_scenarios", "mean_power_mw", "median_power_mw", "mean_coverage", "mean_num_uavs", "mean_iterations", "max_iterations", "non_converged"],
        aggregates,
    )
    log.info("sweep: %d runs, %d non-convergences", len(rows), failures)
    return EXIT_NO_CONVERGENCE if failures else EXIT_OK


def _sweep_generate(spec: dict, out_dir: Path) -> list[Path]:
    gen_dir = out_dir / "scenarios"
    argv = [
        "generate",
        "--out-dir", str(gen_dir),
        "--count", str(spec.get("count", 1)),
        "--master-seed", str(spec.get("master_seed", 0)),
    ]
    for key in ("width", "height", "parent_intensity_per_km2", "cluster_radius", "mean_daughters", "env"):
        if key in spec:
            argv += [f"--{key.replace('_', '-')}", str(spec[key])]
    parser = _build_parser()
    cmd_generate(parser.parse_args(argv))
    return sorted(gen_dir.glob("scenario_*.json"))


def _run_sweep(manifest, methods, scenario_paths):
    overrides = manifest.get("overrides", {})
    rows = []
    per_method: dict[str, list[dict]] = {m: [] for m in methods}
    failures = 0
    for path in scenario_paths:
        scenario = load_scenario(path)
        scenario = _override_scenario(scenario, overrides)
        ellipse_m: int | None = None
        for method in methods:
            record = _run_one(manifest, method, scenario, ellipse_m)
            if method == "ellipse" and record.get("converged", True):
                ellipse_m = record["num_uavs"]
            if not record.get("converged", True):
                failures += 1
            per_method[method].append(record)
            rows.append([
                method,
                Path(path).name,
                len(scenario.users),
                record.get("num_uavs", ""),
                record.get("total_power_mw", ""),
                record.get("coverage_probability", ""),
                record.get("iterations", ""),
                record.get("converged", True),
            ])
    aggregates = []
    for method in methods:
        done = [r for r in per_method[method] if r.get("converged", True)]
        powers = [r["total_power_mw"] for r in done]
        iters = [r["iterations"] for r in per_method[method] if "iterations" in r]
        aggregates.append([
            method,
            len(per_method[method]),
            statistics.fmean(powers) if powers else "",
            statistics.median(powers) if powers else "",
            statistics.fmean([r["coverage_probability"] for r in done]) if done else "",
            statistics.fmean([r["num_uavs"] for r in done]) if done else "",
            statistics.fmean(iters) if iters else "",
            max(iters) if iters else "",
            len(per_method[method]) - len(done),
        ])
    return rows, aggregates, failures


def _override_scenario(scenario: Scenario, overrides: dict) -> Scenario:
    known = {"env", "k_max", "max_outer_iterations", "h_max", "bandwidth_hz", "snr_threshold_db", "carrier_frequency_hz", "noise_psd_dbm_hz"}
    unknown = set(overrides) - known
    if unknown:
        raise ValueError(f"unknown override keys {sorted(unknown)}")
    env = ENVIRONMENTS[overrides["env"]] if "env" in overrides else scenario.environment
    radio = scenario.radio
    for key in ("bandwidth_hz", "snr_threshold_db", "carrier_frequency_hz", "noise_psd_dbm_hz"):
        if key in overrides:
            radio = replace(radio, **{key: float(overrides[key])})
    clustering = scenario.clustering
    if "k_max" in overrides:
        clustering = replace(clustering, k_max=int(overrides["k_max"]))
    if "max_outer_iterations" in overrides:
        clustering = replace(clustering, max_outer_iterations=int(overrides["max_outer_iterations"]))
    return replace(scenario, environment=env, radio=radio, clustering=clustering)


def _run_one(manifest, method, scenario, ellipse_m) -> dict:
    h_max = float(manifest.get("overrides", {}).get("h_max", 1000.0))
    if method == "ellipse":
        try:
            m, cs, trace = ellipse_clustering(scenario.users, scenario.clustering)
        except NoConvergenceError as exc:
            return {"converged": False, "iterations": len(exc.trace.iterations)}
        plan = deploy(cs, scenario.environment, scenario.radio, h_max=h_max)
        metrics = evaluate(plan, scenario.users)
        return {
            "converged": True,
            "num_uavs": m,
            "total_power_mw": plan.total_power_mw,
            "coverage_probability": metrics.coverage_probability,
            "iterations": len(trace.iterations),
        }
    if method == "circle":
        spec = dict(manifest.get("circle", {}))
        num = spec.get("num_uavs", "match")
        if num == "match":
            if ellipse_m is None:
                raise ValueError("circle num_uavs 'match' needs a converged ellipse run first")
            num = ellipse_m
        beam = None
        if spec.get("beam_deg") is not None:
            beam = Beam(theta1_deg=float(spec["beam_deg"]), theta2_deg=float(spec["beam_deg"]))
        cfg = CirclePackingConfig(
            num_uavs=int(num),
            fixed_altitude_m=float(spec.get("fixed_altitude_m", 150.0)),
            fixed_power_dbm=spec.get("fixed_power_dbm"),
            beam=beam,
        )
        plan = circle_pack_deploy(scenario, cfg)
        metrics = evaluate(plan, scenario.users)
        return {
            "converged": True,
            "num_uavs": len(plan.uavs),
            "total_power_mw": plan.total_power_mw,
            "coverage_probability": metrics.coverage_probability,
        }
    spec = dict(manifest.get("brute", {}))
    num = int(spec.get("num_uavs", min(3, len(scenario.users))))
    groups, _ = brute_force_optimum(
        scenario.users, num, scenario.environment, scenario.radio, h_max=h_max
    )
    clusters = [Cluster(frozenset(g), mvee(scenario.users[sorted(g)])) for g in groups]
    plan = deploy(
        ClusterSet(users=scenario.users, clusters=clusters),
        scenario.environment,
        scenario.radio,
        h_max=h_max,
    )
    metrics = evaluate(plan, scenario.users)
    return {
        "converged": True,
        "num_uavs": len(plan.uavs),
        "total_power_mw": plan.total_power_mw,
        "coverage_probability": metrics.coverage_probability,
    }


def plan_to_dict(plan: DeploymentPlan, method: str) -> dict:
    return {
        "method": method,
        "environment": environment_to_dict(plan.environment),
        "radio": radio_to_dict(plan.radio),
        "total_power_mw": float(plan.total_power_mw),
        "uavs": [
            {
                "position": [u.x, u.y, u.altitude_m],
                "orientation_rad": u.orientation_rad,
                "beam_deg": [u.beam.theta1_deg, u.beam.theta2_deg],
                "tx_power_dbm": u.tx_power_dbm,
                "footprint": {
                    "A": u.footprint.A.tolist(),
                    "b": u.footprint.b.tolist(),
                },
                "members": sorted(int(i) for i in u.members),
            }
            for u in plan.uavs
        ],
    }


def plan_from_dict(payload: dict) -> DeploymentPlan:
    uavs = []
    for raw in payload["uavs"]:
        x, y, altitude = (float(v) for v in raw["position"])
        theta1, theta2 = (float(v) for v in raw["beam_deg"])
        uavs.append(
            UavDeployment(
                x=x,
                y=y,
                altitude_m=altitude,
                orientation_rad=float(raw["orientation_rad"]),
                beam=Beam(theta1_deg=theta1, theta2_deg=theta2),
                tx_power_dbm=float(raw["tx_power_dbm"]),
                footprint=Ellipse(
                    A=np.asarray(raw["footprint"]["A"], dtype=float),
                    b=np.asarray(raw["footprint"]["b"], dtype=float),
                ),
                members=frozenset(int(i) for i in raw["members"]),
            )
        )
    return DeploymentPlan(
        uavs=uavs,
        environment=environment_from_dict(payload["environment"]),
        radio=radio_from_dict(payload["radio"]),
        total_power_mw=float(payload["total_power_mw"]),
    )


def _load_plan(path) -> DeploymentPlan:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    try:
        return plan_from_dict(payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioFormatError(f"{path}: malformed plan: {exc}") from exc


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(dump_canonical_json(payload), encoding="utf-8")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(v) for v in row])


def _csv_cell(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return value


if __name__ == "__main__":
    sys.exit(main())
