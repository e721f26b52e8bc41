"""Reference deployments: packed fixed circles and tiny-instance brute force."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import Beam, Environment, RadioConfig, avg_path_loss, dbm_to_mw
from .clustering import Cluster, ClusterSet, find_intersections
from .deployment import (
    AltitudeBounds,
    DeploymentPlan,
    UavDeployment,
    beam_from_footprint,
    deploy,
    required_power_dbm,
)
from .geometry import Ellipse, FitConfig, edge_distance, mvee
from .scenario import Region, Scenario

__all__ = [
    "BruteForceConfig",
    "CirclePackingConfig",
    "PackingError",
    "brute_force_optimum",
    "circle_pack_deploy",
]

_HARD_MAX_USERS = 10
_HARD_MAX_UAVS = 3


class PackingError(ValueError):
    """The requested circles cannot be placed without overlap."""


@dataclass
class CirclePackingConfig:
    """Fixed-altitude circular cells on a lattice.

    Leave ``beam`` unset to size the (circular) footprint to the lattice
    pitch, and ``fixed_power_dbm`` unset to power each cell so its edge user
    sits at the SNR threshold.
    """

    num_uavs: int
    fixed_altitude_m: float = 150.0
    fixed_power_dbm: float | None = None
    beam: Beam | None = None

    def __post_init__(self) -> None:
        if self.num_uavs < 1:
            raise ValueError("num_uavs must be at least 1")
        if self.fixed_altitude_m <= 0.0:
            raise ValueError("fixed altitude must be positive")
        if self.beam is not None and self.beam.theta1_deg != self.beam.theta2_deg:
            raise ValueError("packed cells are circular: beam must have theta1 == theta2")


@dataclass
class BruteForceConfig:
    max_users: int = _HARD_MAX_USERS
    max_uavs: int = _HARD_MAX_UAVS
    # 0 keeps golden-section altitude search; > 0 switches to a grid with
    # this step, handy for cross-checking the optimizer
    altitude_grid_step_m: float = 0.0

    def __post_init__(self) -> None:
        if not 1 <= self.max_users <= _HARD_MAX_USERS:
            raise ValueError(f"max_users must be in [1, {_HARD_MAX_USERS}]")
        if not 1 <= self.max_uavs <= _HARD_MAX_UAVS:
            raise ValueError(f"max_uavs must be in [1, {_HARD_MAX_UAVS}]")
        if self.altitude_grid_step_m < 0.0:
            raise ValueError("altitude grid step must be non-negative")


def circle_pack_deploy(scenario: Scenario, cfg: CirclePackingConfig) -> DeploymentPlan:
    """Place ``num_uavs`` equal disjoint circles and serve whoever they cover.

    Centers come from the best of a few aligned and offset lattice layouts
    shrunk to the region; the plan keeps the configured altitude and power for
    every UAV.  Raises PackingError when the configured beam needs circles
    larger than the lattice can place without overlap.
    """
    pitch_radius, centers = _best_lattice(cfg.num_uavs, scenario.region)
    if cfg.beam is None:
        beam = _circular_beam(pitch_radius, cfg.fixed_altitude_m)
    else:
        beam = cfg.beam
    cover_radius = cfg.fixed_altitude_m * math.tan(math.radians(beam.theta1_deg))
    if cover_radius > pitch_radius * (1.0 + 1e-9):
        raise PackingError(
            f"coverage radius {cover_radius:.1f} m exceeds the lattice "
            f"radius {pitch_radius:.1f} m for {cfg.num_uavs} circles"
        )

    env, radio = scenario.environment, scenario.radio
    if cfg.fixed_power_dbm is None:
        power = required_power_dbm(cfg.fixed_altitude_m, cover_radius, env, beam, radio)
    else:
        power = cfg.fixed_power_dbm

    users = np.atleast_2d(scenario.users)
    claimed = np.full(len(users), False)
    uavs = []
    for center in centers:
        dist = np.linalg.norm(users - center, axis=1)
        mine = (dist <= cover_radius) & ~claimed
        claimed |= mine
        footprint = Ellipse(A=np.eye(2) / cover_radius, b=center / cover_radius)
        uavs.append(
            UavDeployment(
                x=float(center[0]),
                y=float(center[1]),
                altitude_m=cfg.fixed_altitude_m,
                orientation_rad=0.0,
                beam=beam,
                tx_power_dbm=power,
                footprint=footprint,
                members=frozenset(np.flatnonzero(mine).tolist()),
            )
        )
    total = sum(dbm_to_mw(u.tx_power_dbm) for u in uavs)
    return DeploymentPlan(uavs=uavs, environment=env, radio=radio, total_power_mw=total)


def brute_force_optimum(
    users,
    num_uavs: int,
    env: Environment,
    radio: RadioConfig,
    cfg: BruteForceConfig | None = None,
    h_max: float = 1000.0,
    fit_cfg: FitConfig | None = None,
) -> tuple[list[set[int]], float]:
    """Exhaustive minimum-power grouping into at most ``num_uavs`` cells.

    Enumerates every partition of the users into 1..num_uavs groups
    (restricted growth strings), rejects groupings whose ellipses share a
    user, and deploys the rest exactly like the main pipeline.  Returns the
    cheapest partition and its total power in mW.  Instance sizes are capped
    because the partition count grows combinatorially.
    """
    cfg = cfg or BruteForceConfig()
    fit_cfg = fit_cfg or FitConfig()
    pts = np.atleast_2d(np.asarray(users, dtype=float))
    n = len(pts)
    if n == 0:
        raise ValueError("no users")
    if n > cfg.max_users:
        raise ValueError(f"instance has {n} users, cap is {cfg.max_users}")
    if not 1 <= num_uavs <= cfg.max_uavs:
        raise ValueError(f"num_uavs must be in [1, {cfg.max_uavs}]")

    best_labels: np.ndarray | None = None
    best_power = math.inf
    for labels in _partitions(n, num_uavs):
        plan = _plan_for_labels(pts, labels, env, radio, cfg, h_max, fit_cfg)
        if plan is None:
            continue
        if plan.total_power_mw < best_power:
            best_power = plan.total_power_mw
            best_labels = labels.copy()
    if best_labels is None:
        raise ValueError("no feasible partition: every grouping shares users across ellipses")
    groups = [set(np.flatnonzero(best_labels == g).tolist()) for g in range(best_labels.max() + 1)]
    return groups, best_power


def _plan_for_labels(pts, labels, env, radio, cfg, h_max, fit_cfg) -> DeploymentPlan | None:
    clusters = []
    for g in range(labels.max() + 1):
        idx = np.flatnonzero(labels == g)
        clusters.append(Cluster(frozenset(idx.tolist()), mvee(pts[idx], fit_cfg)))
    cs = ClusterSet(users=pts, clusters=clusters)
    if find_intersections(cs):
        return None  # some user falls inside two ellipses
    if cfg.altitude_grid_step_m > 0.0:
        return _deploy_with_grid(cs, env, radio, h_max, cfg.altitude_grid_step_m)
    return deploy(cs, env, radio, h_max=h_max)


def _deploy_with_grid(cs, env, radio, h_max, step) -> DeploymentPlan:
    uavs = []
    for m, cluster in enumerate(cs.clusters):
        footprint = cluster.ellipse
        major, _ = footprint.semi_axes
        bounds = AltitudeBounds.for_footprint(major, h_max)
        cell_edge = edge_distance(footprint, cs.member_points(m))
        grid = np.append(np.arange(bounds.h_min, bounds.h_max, step), bounds.h_max)
        losses = [avg_path_loss(h, cell_edge, env, radio) for h in grid]
        altitude = float(grid[int(np.argmin(losses))])
        beam = beam_from_footprint(altitude, footprint)
        power = required_power_dbm(altitude, cell_edge, env, beam, radio)
        center = footprint.center
        uavs.append(
            UavDeployment(
                x=float(center[0]),
                y=float(center[1]),
                altitude_m=altitude,
                orientation_rad=footprint.orientation,
                beam=beam,
                tx_power_dbm=power,
                footprint=footprint,
                members=cluster.members,
            )
        )
    total = sum(dbm_to_mw(u.tx_power_dbm) for u in uavs)
    return DeploymentPlan(uavs=uavs, environment=env, radio=radio, total_power_mw=total)


def _partitions(n: int, max_blocks: int):
    """Yield every label vector of a set partition with <= max_blocks blocks.

    Restricted growth strings: label[i] <= max(label[:i]) + 1, so each
    partition appears exactly once.
    """
    labels = np.zeros(n, dtype=int)

    def advance(i: int, peak: int):
        if i == n:
            yield labels
            return
        top = min(peak + 1, max_blocks - 1)
        for g in range(top + 1):
            labels[i] = g
            yield from advance(i + 1, max(peak, g))

    yield from advance(1, 0)


def _circular_beam(radius_m: float, altitude_m: float) -> Beam:
    theta = math.degrees(math.atan(radius_m / altitude_m))
    return Beam(theta1_deg=theta, theta2_deg=theta)


def _best_lattice(num: int, region: Region) -> tuple[float, np.ndarray]:
    """Largest-radius lattice of ``num`` equal circles inside the region.

    Tries aligned grids and two hexagonal row patterns per column count and
    keeps the best.  Deterministic: candidates are scored by radius with ties
    going to the earliest layout generated.
    """
    w, h = region.width_m, region.height_m
    best_radius = -1.0
    best_centers: np.ndarray | None = None
    for cols in range(1, num + 1):
        for centers_fn in (_aligned_rows, _hex_alternating, _hex_shifted):
            got = centers_fn(num, cols, w, h)
            if got is None:
                continue
            radius, centers = got
            if radius > best_radius + 1e-12:
                best_radius, best_centers = radius, centers
    assert best_centers is not None
    return best_radius, best_centers


def _aligned_rows(num: int, cols: int, w: float, h: float):
    rows = math.ceil(num / cols)
    radius = min(w / (2.0 * cols), h / (2.0 * rows))
    if radius <= 0.0:
        return None
    centers = []
    for r in range(rows):
        for c in range(cols):
            if len(centers) == num:
                break
            centers.append((radius * (2.0 * c + 1.0), radius * (2.0 * r + 1.0)))
    return radius, np.asarray(centers)


def _hex_rows(num: int, cols: int, w: float, h: float, odd_cols: int, width_units: float):
    """Shared layout for hex variants; odd rows hold ``odd_cols`` circles."""
    if odd_cols < 0:
        return None
    rows, count = 0, 0
    while count < num:
        count += cols if rows % 2 == 0 else odd_cols
        rows += 1
        if rows > 4 * num:
            return None
    radius = min(w / width_units, h / (2.0 + (rows - 1) * math.sqrt(3.0)))
    centers = []
    for r in range(rows):
        row_n = cols if r % 2 == 0 else odd_cols
        x0 = radius if r % 2 == 0 else 2.0 * radius
        y = radius + r * math.sqrt(3.0) * radius
        for c in range(row_n):
            if len(centers) == num:
                break
            centers.append((x0 + 2.0 * radius * c, y))
    return radius, np.asarray(centers)


def _hex_alternating(num: int, cols: int, w: float, h: float):
    # odd rows drop one circle and nest between their neighbors
    return _hex_rows(num, cols, w, h, cols - 1, 2.0 * cols)


def _hex_shifted(num: int, cols: int, w: float, h: float):
    # odd rows keep all circles but shift by one radius
    return _hex_rows(num, cols, w, h, cols, 2.0 * cols + 1.0)
