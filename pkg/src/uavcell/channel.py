"""Air-to-ground link budget: directional gain, FSPL and LoS/NLoS mixing."""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "Beam",
    "Environment",
    "ENVIRONMENTS",
    "RadioConfig",
    "antenna_gain_db",
    "avg_path_loss",
    "dbm_to_mw",
    "fspl_db",
    "los_probability",
    "mw_to_dbm",
]

SPEED_OF_LIGHT = 299_792_458.0
# peak gain numerator for half-power beamwidths expressed in degrees
PEAK_GAIN_NUMERATOR = 30_000.0


@dataclass(frozen=True)
class Environment:
    """Propagation environment: LoS sigmoid shape and excess losses in dB."""

    name: str
    sigmoid_a: float
    sigmoid_b: float
    excess_los_db: float = 3.0
    excess_nlos_db: float = 34.0

    def __post_init__(self) -> None:
        if self.sigmoid_a <= 0.0 or self.sigmoid_b <= 0.0:
            raise ValueError("sigmoid constants must be positive")
        if not 0.0 <= self.excess_los_db <= self.excess_nlos_db:
            raise ValueError("excess losses must satisfy 0 <= LoS <= NLoS")


ENVIRONMENTS: dict[str, Environment] = {
    "suburban": Environment("suburban", 4.88, 0.43),
    "urban": Environment("urban", 9.61, 0.16),
    "dense-urban": Environment("dense-urban", 12.08, 0.11),
    "high-rise": Environment("high-rise", 27.23, 0.08),
}


@dataclass(frozen=True)
class RadioConfig:
    """Link-level constants shared by every UAV in a deployment."""

    carrier_frequency_hz: float = 2.0e9
    noise_psd_dbm_hz: float = -170.0
    bandwidth_hz: float = 20.0e6
    snr_threshold_db: float = 0.0

    def __post_init__(self) -> None:
        if self.carrier_frequency_hz <= 0.0:
            raise ValueError("carrier frequency must be positive")
        if self.bandwidth_hz <= 0.0:
            raise ValueError("bandwidth must be positive")

    def noise_power_dbm(self) -> float:
        return self.noise_psd_dbm_hz + 10.0 * math.log10(self.bandwidth_hz)


@dataclass(frozen=True)
class Beam:
    """Directional antenna main lobe, half-power half-widths in degrees."""

    theta1_deg: float  # along the footprint major axis
    theta2_deg: float

    def __post_init__(self) -> None:
        if not 0.0 < self.theta2_deg <= self.theta1_deg < 90.0:
            raise ValueError("beam half-widths must satisfy 0 < theta2 <= theta1 < 90")


def antenna_gain_db(beam: Beam) -> float:
    """Main-lobe gain in dB; outside the lobe callers treat the gain as zero."""
    return 10.0 * math.log10(PEAK_GAIN_NUMERATOR / (beam.theta1_deg * beam.theta2_deg))


def fspl_db(distance_m: float, frequency_hz: float) -> float:
    """Free-space path loss over ``distance_m`` at ``frequency_hz``."""
    if distance_m <= 0.0:
        raise ValueError("distance must be positive")
    if frequency_hz <= 0.0:
        raise ValueError("frequency must be positive")
    return 20.0 * math.log10(4.0 * math.pi * distance_m * frequency_hz / SPEED_OF_LIGHT)


def los_probability(altitude_m: float, horizontal_m: float, env: Environment) -> float:
    """Line-of-sight probability for the elevation angle seen by the user."""
    if altitude_m <= 0.0:
        raise ValueError("altitude must be positive")
    if horizontal_m < 0.0:
        raise ValueError("horizontal distance must be non-negative")
    elevation_deg = math.degrees(math.atan2(altitude_m, horizontal_m))
    return 1.0 / (1.0 + env.sigmoid_a * math.exp(-env.sigmoid_b * (elevation_deg - env.sigmoid_a)))


def avg_path_loss(
    altitude_m: float,
    horizontal_m: float,
    env: Environment,
    radio: RadioConfig,
    beam: Beam | None = None,
) -> float:
    """Probability-weighted path loss as a linear power ratio (>= 0).

    The LoS and NLoS branches share one free-space term and the antenna gain;
    pass ``beam=None`` to leave the gain out (used while optimizing altitude,
    where the beam is not yet known).
    """
    distance = math.hypot(altitude_m, horizontal_m)
    base_db = fspl_db(distance, radio.carrier_frequency_hz)
    if beam is not None:
        base_db -= antenna_gain_db(beam)
    p_los = los_probability(altitude_m, horizontal_m, env)
    mix = p_los * 10.0 ** (env.excess_los_db / 10.0) + (1.0 - p_los) * 10.0 ** (
        env.excess_nlos_db / 10.0
    )
    return 10.0 ** (base_db / 10.0) * mix


def dbm_to_mw(power_dbm: float) -> float:
    return 10.0 ** (power_dbm / 10.0)


def mw_to_dbm(power_mw: float) -> float:
    if power_mw <= 0.0:
        raise ValueError("power must be positive")
    return 10.0 * math.log10(power_mw)
