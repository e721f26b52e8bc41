"""Scenario generation and the scenario file format.

User positions follow a Matern-style Poisson cluster process: Poisson parent
count, parents uniform over the region, Poisson-many daughters per parent
placed uniformly in a disk, everything falling outside the region dropped.
All randomness flows through one seeded PCG64 generator, so a scenario is a
pure function of its config.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import Environment, RadioConfig
from .clustering import ClusteringConfig

__all__ = [
    "PcpConfig",
    "Region",
    "Scenario",
    "ScenarioFormatError",
    "generate_pcp",
    "load_scenario",
    "save_scenario",
]


class ScenarioFormatError(ValueError):
    """Scenario file rejected; carries the offending field when known."""

    def __init__(self, message: str, field_name: str | None = None):
        super().__init__(message)
        self.field_name = field_name


@dataclass(frozen=True)
class Region:
    width_m: float = 1000.0
    height_m: float = 1000.0

    def __post_init__(self) -> None:
        if self.width_m <= 0.0 or self.height_m <= 0.0:
            raise ValueError("region sides must be positive")

    @property
    def area_m2(self) -> float:
        return self.width_m * self.height_m


@dataclass(frozen=True)
class PcpConfig:
    parent_intensity_per_m2: float = 9e-6
    cluster_radius_m: float = 80.0
    mean_daughters: float = 36.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.parent_intensity_per_m2 <= 0.0:
            raise ValueError("parent intensity must be positive")
        if self.cluster_radius_m <= 0.0:
            raise ValueError("cluster radius must be positive")
        if self.mean_daughters <= 0.0:
            raise ValueError("mean daughters must be positive")


@dataclass
class Scenario:
    region: Region
    users: np.ndarray
    environment: Environment
    radio: RadioConfig
    clustering: ClusteringConfig
    pcp: PcpConfig | None = field(default=None)


def generate_pcp(region: Region, cfg: PcpConfig) -> np.ndarray:
    """Draw one realization of the cluster process; may be empty."""
    rng = np.random.default_rng(cfg.seed)
    n_parents = int(rng.poisson(cfg.parent_intensity_per_m2 * region.area_m2))
    parents = rng.uniform((0.0, 0.0), (region.width_m, region.height_m), (n_parents, 2))
    counts = rng.poisson(cfg.mean_daughters, n_parents)
    total = int(counts.sum())
    # uniform over the disk: radius via sqrt of a uniform draw
    radii = cfg.cluster_radius_m * np.sqrt(rng.uniform(size=total))
    angles = rng.uniform(0.0, 2.0 * math.pi, total)
    offsets = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    pts = np.repeat(parents, counts, axis=0) + offsets
    keep = (
        (pts[:, 0] >= 0.0)
        & (pts[:, 0] <= region.width_m)
        & (pts[:, 1] >= 0.0)
        & (pts[:, 1] <= region.height_m)
    )
    return pts[keep]


def save_scenario(scenario: Scenario, path) -> None:
    """Write a scenario as canonical JSON (sorted keys, fixed layout)."""
    payload = scenario_to_dict(scenario)
    Path(path).write_text(dump_canonical_json(payload), encoding="utf-8")


def load_scenario(path) -> Scenario:
    text = Path(path).read_text(encoding="utf-8")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return scenario_from_dict(payload, source=str(path))


def dump_canonical_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def scenario_to_dict(scenario: Scenario) -> dict:
    payload = {
        "region": {
            "width_m": scenario.region.width_m,
            "height_m": scenario.region.height_m,
        },
        "users": [[float(x), float(y)] for x, y in np.atleast_2d(scenario.users)],
        "environment": environment_to_dict(scenario.environment),
        "radio": radio_to_dict(scenario.radio),
        "clustering": clustering_to_dict(scenario.clustering),
    }
    if scenario.pcp is not None:
        payload["pcp"] = {
            "parent_intensity_per_m2": scenario.pcp.parent_intensity_per_m2,
            "cluster_radius_m": scenario.pcp.cluster_radius_m,
            "mean_daughters": scenario.pcp.mean_daughters,
            "seed": scenario.pcp.seed,
        }
    return payload


def scenario_from_dict(payload: dict, source: str = "scenario") -> Scenario:
    known = {"region", "users", "environment", "radio", "clustering", "pcp"}
    for key in sorted(set(payload) - known):
        warnings.warn(f"{source}: ignoring unknown field '{key}'", stacklevel=2)

    region_raw = _require(payload, "region", source)
    users_raw = _require(payload, "users", source)
    env_raw = _require(payload, "environment", source)
    radio_raw = _require(payload, "radio", source)
    clustering_raw = _require(payload, "clustering", source)

    try:
        region = Region(
            width_m=float(region_raw["width_m"]), height_m=float(region_raw["height_m"])
        )
        users = np.asarray(users_raw, dtype=float)
        if users.size == 0 or users.ndim != 2 or users.shape[1] != 2:
            raise ScenarioFormatError(
                f"{source}: 'users' must be a non-empty list of [x, y] pairs", "users"
            )
        env = environment_from_dict(env_raw)
        radio = radio_from_dict(radio_raw)
        clustering = clustering_from_dict(clustering_raw)
        pcp = None
        if "pcp" in payload:
            raw = payload["pcp"]
            pcp = PcpConfig(
                parent_intensity_per_m2=float(raw["parent_intensity_per_m2"]),
                cluster_radius_m=float(raw["cluster_radius_m"]),
                mean_daughters=float(raw["mean_daughters"]),
                seed=int(raw["seed"]),
            )
    except ScenarioFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioFormatError(f"{source}: malformed scenario: {exc}") from exc

    bad = ~(
        (users[:, 0] >= 0.0)
        & (users[:, 0] <= region.width_m)
        & (users[:, 1] >= 0.0)
        & (users[:, 1] <= region.height_m)
    )
    if bad.any():
        raise ScenarioFormatError(
            f"{source}: user {int(np.flatnonzero(bad)[0])} lies outside the region", "users"
        )
    return Scenario(
        region=region, users=users, environment=env, radio=radio, clustering=clustering, pcp=pcp
    )


def environment_to_dict(env: Environment) -> dict:
    return {
        "name": env.name,
        "sigmoid_a": env.sigmoid_a,
        "sigmoid_b": env.sigmoid_b,
        "excess_los_db": env.excess_los_db,
        "excess_nlos_db": env.excess_nlos_db,
    }


def environment_from_dict(raw: dict) -> Environment:
    return Environment(
        name=str(raw["name"]),
        sigmoid_a=float(raw["sigmoid_a"]),
        sigmoid_b=float(raw["sigmoid_b"]),
        excess_los_db=float(raw["excess_los_db"]),
        excess_nlos_db=float(raw["excess_nlos_db"]),
    )


def radio_to_dict(radio: RadioConfig) -> dict:
    return {
        "carrier_frequency_hz": radio.carrier_frequency_hz,
        "noise_psd_dbm_hz": radio.noise_psd_dbm_hz,
        "bandwidth_hz": radio.bandwidth_hz,
        "snr_threshold_db": radio.snr_threshold_db,
    }


def radio_from_dict(raw: dict) -> RadioConfig:
    return RadioConfig(
        carrier_frequency_hz=float(raw["carrier_frequency_hz"]),
        noise_psd_dbm_hz=float(raw["noise_psd_dbm_hz"]),
        bandwidth_hz=float(raw["bandwidth_hz"]),
        snr_threshold_db=float(raw["snr_threshold_db"]),
    )


def clustering_to_dict(cfg: ClusteringConfig) -> dict:
    return {
        "k_max": cfg.k_max,
        "silhouette_buffer": cfg.silhouette_buffer,
        "max_outer_iterations": cfg.max_outer_iterations,
        "rng_seed": cfg.rng_seed,
    }


def clustering_from_dict(raw: dict) -> ClusteringConfig:
    return ClusteringConfig(
        k_max=int(raw["k_max"]),
        silhouette_buffer=int(raw["silhouette_buffer"]),
        max_outer_iterations=int(raw["max_outer_iterations"]),
        rng_seed=int(raw["rng_seed"]),
    )


def _require(payload: dict, key: str, source: str):
    if key not in payload:
        raise ScenarioFormatError(f"{source}: missing required field '{key}'", key)
    return payload[key]
