"""Scenario configuration: OFDM numerology, AP layout, targets, file I/O.

Scenario files are YAML. Angles are written in degrees there for
readability and converted to radians on load; everything in memory is
SI (meters, seconds, Hz, radians).
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .errors import ScenarioFormatError
from .geometry import SPEED_OF_LIGHT, ApGeometry, TargetTruth, wrap_angle


@dataclass(frozen=True)
class OfdmParams:
    """OFDM numerology shared by all APs.

    symbol_period includes the cyclic prefix, so it must be at least
    1 / subcarrier_spacing.
    """

    carrier_frequency: float   # Hz
    subcarrier_spacing: float  # Hz
    subcarriers: int           # K
    symbols: int               # N
    symbol_period: float       # s

    def __post_init__(self):
        if not self.carrier_frequency > 0:
            raise ValueError("carrier_frequency must be positive")
        if not self.subcarrier_spacing > 0:
            raise ValueError("subcarrier_spacing must be positive")
        if self.subcarriers < 1 or self.symbols < 1:
            raise ValueError("subcarriers and symbols must be at least 1")
        if self.symbol_period < 1.0 / self.subcarrier_spacing:
            raise ValueError("symbol_period must be >= 1/subcarrier_spacing")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency


@dataclass(frozen=True)
class ScenarioConfig:
    """A complete simulation scene: numerology, APs, and true targets.

    gain_ref_range / gain_ref_rcs set the 0 dB point of the two-way
    channel gain normalization (see :func:`evasense.echo.gain_amplitude`).
    """

    name: str
    ofdm: OfdmParams
    aps: tuple[ApGeometry, ...]
    targets: tuple[TargetTruth, ...]
    gain_ref_range: float = 500.0  # m
    gain_ref_rcs: float = 0.01     # m^2

    def __post_init__(self):
        object.__setattr__(self, "aps", tuple(self.aps))
        object.__setattr__(self, "targets", tuple(self.targets))
        if len(self.aps) < 1:
            raise ValueError("need at least one AP")
        if not (self.gain_ref_range > 0 and self.gain_ref_rcs > 0):
            raise ValueError("gain reference range and RCS must be positive")
        for t in self.targets:
            for ap in self.aps:
                if np.linalg.norm(t.position - ap.position) < 1e-9:
                    raise ValueError("target placed on top of an AP")

    @property
    def ap_count(self) -> int:
        return len(self.aps)

    @property
    def target_count(self) -> int:
        return len(self.targets)


def with_targets(scenario: ScenarioConfig, targets) -> ScenarioConfig:
    return dataclasses.replace(scenario, targets=tuple(targets))


def with_subcarriers(scenario: ScenarioConfig, subcarriers: int) -> ScenarioConfig:
    ofdm = dataclasses.replace(scenario.ofdm, subcarriers=subcarriers)
    return dataclasses.replace(scenario, ofdm=ofdm)


def five_ap_circle_scenario(
    subcarriers: int = 96,
    symbols: int = 7,
    targets: tuple[TargetTruth, ...] | None = None,
    name: str = "five-ap-circle",
) -> ScenarioConfig:
    """Reference scene: five APs evenly spaced on a 500 m circle.

    Each 8-element half-wavelength ULA faces the circle center. The two
    default targets sit well inside the AP ring and move fast in roughly
    opposite directions. Fast, well-separated velocities matter: over a
    short symbol burst the two Doppler signatures must stay linearly
    independent at every AP, otherwise the weaker covariance eigenmode
    drowns in sample noise and the second target is lost. The default
    velocity difference is aimed along azimuth 108 degrees, the direction
    whose normal is farthest from all five AP sight lines, so no single
    AP sees the two targets at nearly equal radial speed.
    """
    ofdm = OfdmParams(
        carrier_frequency=4.9e9,
        subcarrier_spacing=30e3,
        subcarriers=subcarriers,
        symbols=symbols,
        symbol_period=35.677e-6,
    )
    radius = 500.0
    aps = []
    for p in range(5):
        phi = 2.0 * math.pi * p / 5.0
        pos = (radius * math.cos(phi), radius * math.sin(phi))
        # broadside (-sin k, cos k) must point at the origin: kappa = pi/2 + phi
        aps.append(
            ApGeometry(
                position=np.array(pos),
                kappa=wrap_angle(math.pi / 2.0 + phi),
                antenna_count=8,
                antenna_spacing=ofdm.wavelength / 2.0,
            )
        )
    if targets is None:
        targets = (
            TargetTruth(position=np.array([-32.0, -35.0]),
                        velocity=np.array([-24.0, 78.0]), rcs=0.01),
            TargetTruth(position=np.array([40.0, 30.0]),
                        velocity=np.array([26.5, -77.0]), rcs=0.01),
        )
    return ScenarioConfig(name=name, ofdm=ofdm, aps=tuple(aps), targets=tuple(targets))


# ---------------------------------------------------------------------------
# YAML serialization. Angles in degrees, everything else SI.

def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ScenarioFormatError(f"missing key '{key}' in {where}")
    return mapping[key]


def scenario_to_dict(scenario: ScenarioConfig) -> dict:
    o = scenario.ofdm
    return {
        "name": scenario.name,
        "ofdm": {
            "carrier_frequency_hz": o.carrier_frequency,
            "subcarrier_spacing_hz": o.subcarrier_spacing,
            "subcarriers": o.subcarriers,
            "symbols": o.symbols,
            "symbol_period_s": o.symbol_period,
        },
        "gain_reference": {
            "range_m": scenario.gain_ref_range,
            "rcs_m2": scenario.gain_ref_rcs,
        },
        "aps": [
            {
                "position_m": [float(ap.position[0]), float(ap.position[1])],
                "orientation_deg": math.degrees(ap.kappa),
                "antenna_count": ap.antenna_count,
                "antenna_spacing_m": ap.antenna_spacing,
            }
            for ap in scenario.aps
        ],
        "targets": [
            {
                "position_m": [float(t.position[0]), float(t.position[1])],
                "velocity_mps": [float(t.velocity[0]), float(t.velocity[1])],
                "rcs_m2": t.rcs,
            }
            for t in scenario.targets
        ],
    }


def scenario_from_dict(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ScenarioFormatError("scenario document must be a mapping")
    try:
        o = _require(raw, "ofdm", "scenario")
        ofdm = OfdmParams(
            carrier_frequency=float(_require(o, "carrier_frequency_hz", "ofdm")),
            subcarrier_spacing=float(_require(o, "subcarrier_spacing_hz", "ofdm")),
            subcarriers=int(_require(o, "subcarriers", "ofdm")),
            symbols=int(_require(o, "symbols", "ofdm")),
            symbol_period=float(_require(o, "symbol_period_s", "ofdm")),
        )
        aps = []
        for i, a in enumerate(_require(raw, "aps", "scenario")):
            aps.append(
                ApGeometry(
                    position=np.asarray(_require(a, "position_m", f"aps[{i}]"), dtype=float),
                    kappa=math.radians(float(_require(a, "orientation_deg", f"aps[{i}]"))),
                    antenna_count=int(_require(a, "antenna_count", f"aps[{i}]")),
                    antenna_spacing=float(_require(a, "antenna_spacing_m", f"aps[{i}]")),
                )
            )
        targets = []
        for i, t in enumerate(raw.get("targets", [])):
            targets.append(
                TargetTruth(
                    position=np.asarray(_require(t, "position_m", f"targets[{i}]"), dtype=float),
                    velocity=np.asarray(_require(t, "velocity_mps", f"targets[{i}]"), dtype=float),
                    rcs=float(_require(t, "rcs_m2", f"targets[{i}]")),
                )
            )
        ref = raw.get("gain_reference", {})
        return ScenarioConfig(
            name=str(raw.get("name", "scenario")),
            ofdm=ofdm,
            aps=tuple(aps),
            targets=tuple(targets),
            gain_ref_range=float(ref.get("range_m", 500.0)),
            gain_ref_rcs=float(ref.get("rcs_m2", 0.01)),
        )
    except ScenarioFormatError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ScenarioFormatError(f"bad scenario document: {exc}") from exc


def save_scenario(scenario: ScenarioConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(scenario_to_dict(scenario), sort_keys=False))


def load_scenario(path) -> ScenarioConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ScenarioFormatError(f"unparseable scenario file {path}: {exc}") from exc
    return scenario_from_dict(raw)
