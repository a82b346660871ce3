"""Monostatic OFDM echo synthesis.

Each AP transmits one beamformed OFDM burst and receives the target
echoes on its own array. After matched filtering the burst collapses to
a complex tensor indexed (antenna m, symbol n, subcarrier k) that is a
sum of rank-one target contributions plus circular white noise:

    Y[m, n, k] = sum_l beta_l * a_m(psi_l) * o_n(fd_l) * g_k(tau_l) + W[m, n, k]

with a_m = exp(j 2 pi m (d/lambda) psi), m = 0..M-1,
     o_n = exp(j 2 pi n Ts fd),          n = 1..N,
     g_k = exp(-j 2 pi k df tau),        k = 1..K.

beta_l folds the two-way channel gain alpha_l together with the
transmit beamforming response a(psi_l)^H f.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidAngle, NonPositiveInput
from .geometry import SPEED_OF_LIGHT, ApGeometry, TargetTruth, candidate_delay, \
    candidate_virtual_angle
from .scenario import ScenarioConfig

# tolerance for virtual angles drifting past +-1 through round-off
_ANGLE_TOL = 1e-9


def steering_spatial(psi, count: int, spacing: float, wavelength: float) -> np.ndarray:
    """ULA response to a virtual angle psi, entries exp(j 2 pi m (d/lambda) psi).

    psi may be scalar or an array; one axis of length ``count`` is
    appended. Raises InvalidAngle when |psi| > 1 beyond round-off.
    """
    psi = np.asarray(psi, dtype=float)
    if np.any(np.abs(psi) > 1.0 + _ANGLE_TOL):
        raise InvalidAngle(f"virtual angle outside [-1, 1]: {psi}")
    psi = np.clip(psi, -1.0, 1.0)
    m = np.arange(count)
    phase = 2.0 * np.pi * (spacing / wavelength) * psi[..., None] * m
    return np.exp(1j * phase)


def steering_doppler(doppler: float, count: int, symbol_period: float) -> np.ndarray:
    """Slow-time response across OFDM symbols n = 1..count."""
    n = np.arange(1, count + 1)
    return np.exp(2j * np.pi * n * symbol_period * doppler)


def steering_delay(delay: float, count: int, spacing_hz: float) -> np.ndarray:
    """Frequency-domain response across subcarriers k = 1..count."""
    k = np.arange(1, count + 1)
    return np.exp(-2j * np.pi * k * spacing_hz * delay)


def path_loss_db(carrier_mhz: float, distance_km: float, rcs: float) -> float:
    """Two-way radar path loss in dB.

    103.4 + 20 lg(f_MHz) + 40 lg(d_km) - 10 lg(rcs_m2)
    """
    if carrier_mhz <= 0 or distance_km <= 0 or rcs <= 0:
        raise NonPositiveInput("carrier, distance and RCS must be positive")
    return (103.4 + 20.0 * math.log10(carrier_mhz)
            + 40.0 * math.log10(distance_km) - 10.0 * math.log10(rcs))


def gain_amplitude(scenario: ScenarioConfig, ap_index: int, target_index: int) -> float:
    """|alpha| for one AP/target pair.

    Normalized so that the reference range / reference RCS of the
    scenario gives amplitude 1; weaker links scale down by the path
    loss difference.
    """
    ap = scenario.aps[ap_index]
    t = scenario.targets[target_index]
    fc_mhz = scenario.ofdm.carrier_frequency / 1e6
    d_km = float(np.linalg.norm(t.position - ap.position)) / 1e3
    ref = path_loss_db(fc_mhz, scenario.gain_ref_range / 1e3, scenario.gain_ref_rcs)
    return 10.0 ** ((ref - path_loss_db(fc_mhz, d_km, t.rcs)) / 20.0)


def radial_velocity(target: TargetTruth, ap: ApGeometry) -> float:
    """Closing speed, positive when the target moves toward the AP."""
    rel = ap.position - target.position
    rng = float(np.linalg.norm(rel))
    return float(target.velocity @ rel) / rng


def doppler_shift(target: TargetTruth, ap: ApGeometry, wavelength: float) -> float:
    """Two-way Doppler 2 * v_radial / lambda in Hz."""
    return 2.0 * radial_velocity(target, ap) / wavelength


def random_beamformer(count: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-power random-phase transmit weights, entries exp(j phi)/sqrt(M)."""
    phases = rng.uniform(0.0, 2.0 * np.pi, size=count)
    return np.exp(1j * phases) / math.sqrt(count)


@dataclass(frozen=True)
class ChannelGain:
    """Per-target complex gains at one AP: alpha is the two-way channel,
    beta additionally includes the transmit beamforming response."""

    alpha: complex
    beta: complex
    delay: float
    virtual_angle: float
    doppler: float


@dataclass
class EchoTensor:
    """One AP's received data cube, shape (antennas, symbols, subcarriers)."""

    ap_index: int
    data: np.ndarray
    gains: tuple[ChannelGain, ...] = field(default=())
    beamformer: np.ndarray | None = None

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ValueError("echo tensor must be 3-dimensional (M, N, K)")


def synthesize_echo(
    scenario: ScenarioConfig,
    ap_index: int,
    noise_sigma: float,
    rng: np.random.Generator,
    gain_phases: np.ndarray | None = None,
    beamformer: np.ndarray | None = None,
) -> EchoTensor:
    """Simulate one AP's echo tensor.

    Draw order is fixed (beamformer phases, then gain phases, then
    noise) so that trials are reproducible from the generator state.
    ``beamformer`` and ``gain_phases`` pin quantities that are otherwise
    drawn; injecting one skips its draw, which shifts the stream, so
    reproducibility comparisons must inject consistently.
    """
    if noise_sigma < 0:
        raise NonPositiveInput("noise_sigma must be >= 0")
    ap = scenario.aps[ap_index]
    o = scenario.ofdm
    m_count, n_count, k_count = ap.antenna_count, o.symbols, o.subcarriers

    if beamformer is None:
        f = random_beamformer(m_count, rng)
    else:
        f = np.asarray(beamformer, dtype=complex)
        if f.shape != (m_count,):
            raise ValueError("beamformer must have one weight per antenna")
    if gain_phases is None:
        gain_phases = rng.uniform(0.0, 2.0 * np.pi, size=scenario.target_count)
    else:
        gain_phases = np.asarray(gain_phases, dtype=float)
        if gain_phases.shape != (scenario.target_count,):
            raise ValueError("gain_phases must have one entry per target")

    data = np.zeros((m_count, n_count, k_count), dtype=complex)
    gains = []
    for l, target in enumerate(scenario.targets):
        tau = float(candidate_delay(target.position, ap))
        psi = float(candidate_virtual_angle(target.position, ap))
        fd = doppler_shift(target, ap, o.wavelength)
        alpha = gain_amplitude(scenario, ap_index, l) * np.exp(1j * gain_phases[l])
        a = steering_spatial(psi, m_count, ap.antenna_spacing, o.wavelength)
        beta = alpha * np.vdot(a, f)
        odop = steering_doppler(fd, n_count, o.symbol_period)
        g = steering_delay(tau, k_count, o.subcarrier_spacing)
        data += beta * a[:, None, None] * odop[None, :, None] * g[None, None, :]
        gains.append(ChannelGain(alpha=complex(alpha), beta=complex(beta),
                                 delay=tau, virtual_angle=psi, doppler=fd))

    if noise_sigma > 0:
        scale = noise_sigma / math.sqrt(2.0)
        data = data + scale * (rng.standard_normal(data.shape)
                               + 1j * rng.standard_normal(data.shape))
    return EchoTensor(ap_index=ap_index, data=data, gains=tuple(gains), beamformer=f)


def synthesize_all(
    scenario: ScenarioConfig,
    noise_sigma: float,
    rngs,
) -> list[EchoTensor]:
    """Echo tensors for every AP; ``rngs`` supplies one generator per AP."""
    if len(rngs) != scenario.ap_count:
        raise ValueError("need one generator per AP")
    return [synthesize_echo(scenario, p, noise_sigma, rngs[p])
            for p in range(scenario.ap_count)]


def noise_sigma_for_snr(scenario: ScenarioConfig, snr_db: float) -> float:
    """Noise level that puts the strongest AP/target link at the given SNR.

    SNR is defined per receive-antenna sample against the expected
    |beta|^2 of the strongest link, where the expectation over random
    beamformer phases gives E|a^H f|^2 = 1. Hence sigma = max |alpha| *
    10^(-snr/20).
    """
    if scenario.target_count == 0:
        raise ValueError("scenario has no targets to set an SNR against")
    amps = [gain_amplitude(scenario, p, l)
            for p in range(scenario.ap_count)
            for l in range(scenario.target_count)]
    return max(amps) * 10.0 ** (-snr_db / 20.0)
