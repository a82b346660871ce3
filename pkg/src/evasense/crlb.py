"""Closed-form position error bound for the cooperative sensing scene.

The bound chains per-AP observables (round-trip delay, virtual angle)
through their position Jacobian. Per AP the 2x2 Fisher block over
(tau, psi) follows from the phase ramps of the virtual array, with
sample indices m = 1..M, n = 1..N, k = 1..K and expected gain power
E|beta|^2 = |alpha|^2 (random unit-power beamforming):

    F_tt = 4 pi^2 |b|^2 df^2 M K N(N+1)(2N+1) / (3 s^2)
    F_pp = 4 pi^2 |b|^2 (d/lam)^2 K N M(M+1)(2M+1) / (3 s^2)
    F_tp = -2 pi^2 |b|^2 df (d/lam) K M(M+1) N(N+1) / s^2

The 1-based index convention above is kept because it makes the closed
forms checkable against brute-force sums; ``centered`` switches to
zero-mean index sums (phase center mid-array, cross term vanishing)
for sensitivity studies. Gains and Doppler shifts are treated as
known, so the bound is optimistic for the full estimation problem but
shares its scaling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .echo import gain_amplitude
from .errors import NonPositiveInput, SingularGeometry
from .geometry import angle_jacobian, delay_jacobian, local_angle_jacobian
from .scenario import ScenarioConfig

_COND_LIMIT = 1e12


def _sum_idx(n: int) -> float:
    return n * (n + 1) / 2.0


def _sum_idx_sq(n: int) -> float:
    return n * (n + 1) * (2 * n + 1) / 6.0


def _sum_centered_sq(n: int) -> float:
    return n * (n**2 - 1) / 12.0


@dataclass(frozen=True)
class FimBlocks:
    """Per-AP Fisher blocks over (delay, angle) for one target."""

    delay_delay: np.ndarray   # (P,)
    angle_angle: np.ndarray   # (P,)
    delay_angle: np.ndarray   # (P,)


def fim_blocks_closed_form(scenario: ScenarioConfig, target_index: int,
                           noise_sigma: float, centered: bool = False) -> FimBlocks:
    if not noise_sigma > 0:
        raise NonPositiveInput("noise_sigma must be positive for a finite bound")
    o = scenario.ofdm
    df = o.subcarrier_spacing
    k_count, n_count = o.subcarriers, o.symbols
    s2 = noise_sigma**2

    tt = np.empty(scenario.ap_count)
    pp = np.empty(scenario.ap_count)
    tp = np.empty(scenario.ap_count)
    four_pi2 = 4.0 * math.pi**2
    for p, ap in enumerate(scenario.aps):
        m_count = ap.antenna_count
        if centered:
            s_n2 = _sum_centered_sq(n_count)
            s_m2 = _sum_centered_sq(m_count)
            cross = 0.0
        else:
            s_n2 = _sum_idx_sq(n_count)
            s_m2 = _sum_idx_sq(m_count)
            cross = _sum_idx(m_count) * _sum_idx(n_count)
        b2 = gain_amplitude(scenario, p, target_index) ** 2
        ratio = ap.antenna_spacing / o.wavelength
        scale = 2.0 * b2 / s2
        tt[p] = scale * four_pi2 * df**2 * m_count * k_count * s_n2
        pp[p] = scale * four_pi2 * ratio**2 * k_count * n_count * s_m2
        tp[p] = -scale * four_pi2 * df * ratio * k_count * cross
    return FimBlocks(delay_delay=tt, angle_angle=pp, delay_angle=tp)


def fim_blocks_bruteforce(scenario: ScenarioConfig, target_index: int,
                          noise_sigma: float) -> FimBlocks:
    """Blocks by explicit summation over every (m, n, k) sample.

    Slow reference used to validate the closed forms; builds the
    complex per-sample derivatives term by term, with an arbitrary
    phase on the sample to show the products do not depend on it.
    """
    if not noise_sigma > 0:
        raise NonPositiveInput("noise_sigma must be positive for a finite bound")
    o = scenario.ofdm
    df = o.subcarrier_spacing
    s2 = noise_sigma**2

    tt = np.empty(scenario.ap_count)
    pp = np.empty(scenario.ap_count)
    tp = np.empty(scenario.ap_count)
    for p, ap in enumerate(scenario.aps):
        beta = gain_amplitude(scenario, p, target_index) * np.exp(0.7j)
        ratio = ap.antenna_spacing / o.wavelength
        acc_tt = acc_pp = acc_tp = 0.0
        for m in range(1, ap.antenna_count + 1):
            for n in range(1, o.symbols + 1):
                for k in range(1, o.subcarriers + 1):
                    s = beta * np.exp(1j * 0.001 * (m + 2 * n + 3 * k))
                    d_tau = -2j * math.pi * n * df * s
                    d_psi = 2j * math.pi * m * ratio * s
                    acc_tt += (d_tau.conjugate() * d_tau).real
                    acc_pp += (d_psi.conjugate() * d_psi).real
                    acc_tp += (d_tau.conjugate() * d_psi).real
        tt[p] = 2.0 * acc_tt / s2
        pp[p] = 2.0 * acc_pp / s2
        tp[p] = 2.0 * acc_tp / s2
    return FimBlocks(delay_delay=tt, angle_angle=pp, delay_angle=tp)


def assemble_fim(blocks: FimBlocks) -> np.ndarray:
    """Full 2P x 2P Fisher matrix, parameters ordered [taus..., angles...]."""
    p_count = blocks.delay_delay.shape[0]
    fim = np.zeros((2 * p_count, 2 * p_count))
    for p in range(p_count):
        fim[p, p] = blocks.delay_delay[p]
        fim[p_count + p, p_count + p] = blocks.angle_angle[p]
        fim[p, p_count + p] = blocks.delay_angle[p]
        fim[p_count + p, p] = blocks.delay_angle[p]
    return fim


def position_jacobian(target_position, aps, angle_frame: str = "local") -> np.ndarray:
    """d[tau_1..tau_P, psi_1..psi_P] / d(x, y), shape (2, 2P).

    angle_frame "local" (default) differentiates the angle each array
    actually measures, honoring AP orientation; "global" uses the
    orientation-free global virtual angle, which coincides with local
    at kappa = 0.
    """
    aps = list(aps)
    p_count = len(aps)
    if angle_frame == "local":
        angle_grad = local_angle_jacobian
    elif angle_frame == "global":
        angle_grad = angle_jacobian
    else:
        raise ValueError(f"unknown angle_frame {angle_frame!r}")
    theta = np.empty((2, 2 * p_count))
    for p, ap in enumerate(aps):
        theta[:, p] = delay_jacobian(target_position, ap)
        theta[:, p_count + p] = angle_grad(target_position, ap)
    return theta


@dataclass(frozen=True)
class CrlbReport:
    """Position bound for one target at one noise level."""

    target_index: int
    position: np.ndarray          # (2,)
    noise_sigma: float
    covariance_bound: np.ndarray  # (2, 2) m^2
    per_ap_snr_db: np.ndarray     # (P,)
    snr_db: float | None = None   # anchor SNR the sigma was derived from

    CSV_FIELDS = ("target_id", "snr_db", "root_crlb_m",
                  "bound_xx", "bound_xy", "bound_yy")

    @property
    def root_crlb(self) -> float:
        """Root of the trace bound, the RMSE floor in meters."""
        return float(math.sqrt(np.trace(self.covariance_bound)))

    def to_csv_row(self) -> list:
        c = self.covariance_bound
        snr = "" if self.snr_db is None else f"{self.snr_db:.17g}"
        return [str(self.target_index), snr, f"{self.root_crlb:.17g}",
                f"{c[0, 0]:.17g}", f"{c[0, 1]:.17g}", f"{c[1, 1]:.17g}"]


def crlb_position(scenario: ScenarioConfig, target_index: int,
                  noise_sigma: float, snr_db: float | None = None,
                  angle_frame: str = "local") -> CrlbReport:
    """Position error bound for one target via the observable chain rule."""
    blocks = fim_blocks_closed_form(scenario, target_index, noise_sigma)
    fim = assemble_fim(blocks)
    target = scenario.targets[target_index]
    theta = position_jacobian(target.position, scenario.aps, angle_frame)
    info = theta @ fim @ theta.T
    info = 0.5 * (info + info.T)
    if np.linalg.cond(info) > _COND_LIMIT:
        raise SingularGeometry(
            f"position information matrix for target {target_index} has "
            f"condition number above {_COND_LIMIT:.0e}")
    bound = np.linalg.inv(info)
    snrs = np.array([
        20.0 * math.log10(gain_amplitude(scenario, p, target_index) / noise_sigma)
        for p in range(scenario.ap_count)
    ])
    return CrlbReport(target_index=target_index, position=target.position.copy(),
                      noise_sigma=noise_sigma, covariance_bound=bound,
                      per_ap_snr_db=snrs, snr_db=snr_db)
