"""Per-cell altitude, beamwidth and transmit-power selection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import Beam, Environment, RadioConfig, antenna_gain_db, avg_path_loss, dbm_to_mw
from .clustering import ClusterSet, find_intersections
from .geometry import Ellipse, contains, edge_distance

__all__ = [
    "AltitudeBounds",
    "DeploymentPlan",
    "PlanMetrics",
    "UavDeployment",
    "beam_from_footprint",
    "deploy",
    "evaluate",
    "optimal_altitude",
    "required_power_dbm",
]

MIN_ELEVATION_RAD = math.pi / 12  # cell-edge elevation floor
GOLDEN_TOLERANCE_M = 0.5
GOLDEN_MAX_ITERATIONS = 200
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
# edge users sit exactly at the SNR threshold, so coverage predicates give
# that equality this much slack against rounding
SNR_GRACE_DB = 1e-9


@dataclass(frozen=True)
class AltitudeBounds:
    h_min: float
    h_max: float

    def __post_init__(self) -> None:
        if not 0.0 < self.h_min <= self.h_max:
            raise ValueError("bounds must satisfy 0 < h_min <= h_max")

    @classmethod
    def for_footprint(cls, semi_major_m: float, h_max: float) -> "AltitudeBounds":
        """Lower bound keeps the cell-edge elevation at or above 15 degrees."""
        return cls(h_min=semi_major_m * math.tan(MIN_ELEVATION_RAD), h_max=h_max)


@dataclass
class UavDeployment:
    x: float
    y: float
    altitude_m: float
    orientation_rad: float
    beam: Beam
    tx_power_dbm: float
    footprint: Ellipse
    members: frozenset[int]


@dataclass
class DeploymentPlan:
    uavs: list[UavDeployment]
    environment: Environment
    radio: RadioConfig
    total_power_mw: float


@dataclass
class PlanMetrics:
    coverage_probability: float
    total_power_mw: float
    per_user_snr_db: list[float]
    per_user_throughput_bps: list[float]
    num_uavs: int


def optimal_altitude(
    edge_distance_m: float,
    env: Environment,
    bounds: AltitudeBounds,
    radio: RadioConfig,
) -> float:
    """Altitude minimizing the gain-free path loss toward the cell edge.

    Golden-section search over the bounds (0.5 m tolerance); the returned
    value is the best of the interior estimate and both boundary altitudes,
    which also covers the case of a minimizer outside the bounds.
    """
    if edge_distance_m < 0.0:
        raise ValueError("edge distance must be non-negative")

    def loss(h: float) -> float:
        return avg_path_loss(h, edge_distance_m, env, radio)

    lo, hi = bounds.h_min, bounds.h_max
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = loss(c), loss(d)
    for _ in range(GOLDEN_MAX_ITERATIONS):
        if b - a <= GOLDEN_TOLERANCE_M:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = loss(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = loss(d)
    interior = 0.5 * (a + b)
    candidates = (interior, lo, hi)
    return min(candidates, key=loss)


def beam_from_footprint(altitude_m: float, footprint: Ellipse) -> Beam:
    """Half-power half-widths that project the footprint from ``altitude_m``."""
    if altitude_m <= 0.0:
        raise ValueError("altitude must be positive")
    major, minor = footprint.semi_axes
    return Beam(
        theta1_deg=math.degrees(math.atan(major / altitude_m)),
        theta2_deg=math.degrees(math.atan(minor / altitude_m)),
    )


def required_power_dbm(
    altitude_m: float,
    edge_distance_m: float,
    env: Environment,
    beam: Beam,
    radio: RadioConfig,
) -> float:
    """Transmit power placing the cell-edge user exactly at the SNR threshold."""
    pl_db = 10.0 * math.log10(avg_path_loss(altitude_m, edge_distance_m, env, radio, beam))
    return radio.snr_threshold_db + radio.noise_power_dbm() + pl_db


def deploy(
    cs: ClusterSet,
    env: Environment,
    radio: RadioConfig,
    h_max: float = 1000.0,
) -> DeploymentPlan:
    """One UAV per cluster, centered on its ellipse.

    Rejects cluster sets whose ellipses still share users: powering such cells
    independently cannot meet the per-user SNR target.
    """
    if find_intersections(cs):
        raise ValueError("interference risk: cluster ellipses share users")
    uavs = []
    for m, cluster in enumerate(cs.clusters):
        footprint = cluster.ellipse
        center = footprint.center
        major, _ = footprint.semi_axes
        cell_edge = edge_distance(footprint, cs.member_points(m))
        bounds = AltitudeBounds.for_footprint(major, h_max)
        altitude = optimal_altitude(cell_edge, env, bounds, radio)
        beam = beam_from_footprint(altitude, footprint)
        power = required_power_dbm(altitude, cell_edge, env, beam, radio)
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


def evaluate(plan: DeploymentPlan, users) -> PlanMetrics:
    """Score a plan against user positions.

    A user counts as covered when some UAV claims it, its position is inside
    that UAV's footprint (users outside the main lobe get no gain and are
    unserved) and its SNR meets the threshold.  Throughput shares the band
    equally among the UAV's members.
    """
    pts = np.atleast_2d(np.asarray(users, dtype=float))
    n = len(pts)
    owner = [-1] * n
    for m, uav in enumerate(plan.uavs):
        for u in uav.members:
            if not 0 <= u < n:
                raise ValueError(f"member index {u} outside user array")
            if owner[u] != -1:
                raise ValueError(f"user {u} claimed by two UAVs")
            owner[u] = m

    env, radio = plan.environment, plan.radio
    noise_dbm = radio.noise_power_dbm()
    snr: list[float] = []
    throughput: list[float] = []
    covered = 0
    for u in range(n):
        m = owner[u]
        if m == -1:
            snr.append(float("-inf"))
            throughput.append(0.0)
            continue
        uav = plan.uavs[m]
        if not contains(uav.footprint, pts[u]):
            snr.append(float("-inf"))
            throughput.append(0.0)
            continue
        horizontal = math.hypot(pts[u][0] - uav.x, pts[u][1] - uav.y)
        pl_db = 10.0 * math.log10(
            avg_path_loss(uav.altitude_m, horizontal, env, radio, uav.beam)
        )
        snr_db = uav.tx_power_dbm - pl_db - noise_dbm
        snr.append(snr_db)
        if snr_db >= radio.snr_threshold_db - SNR_GRACE_DB:
            covered += 1
        share = radio.bandwidth_hz / len(uav.members)
        throughput.append(share * math.log2(1.0 + 10.0 ** (snr_db / 10.0)))

    return PlanMetrics(
        coverage_probability=covered / n if n else 0.0,
        total_power_mw=plan.total_power_mw,
        per_user_snr_db=snr,
        per_user_throughput_bps=throughput,
        num_uavs=len(plan.uavs),
    )
