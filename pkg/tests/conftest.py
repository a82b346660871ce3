"""Shared helpers for the test suite.

The random scene generators keep every dimension small so that
brute-force oracles (triple loops, exhaustive permutations) stay fast.
"""
import itertools

import numpy as np

from evasense import ApGeometry, OfdmParams, ScenarioConfig, TargetTruth, wrap_angle


def small_ofdm(rng, k_max=6):
    """Random compact numerology with M, N, K all small."""
    spacing = float(rng.uniform(15e3, 60e3))
    return OfdmParams(
        carrier_frequency=float(rng.uniform(2e9, 6e9)),
        subcarrier_spacing=spacing,
        subcarriers=int(rng.integers(1, k_max + 1)),
        symbols=int(rng.integers(1, 7)),
        symbol_period=float(1.0 / spacing * rng.uniform(1.0, 1.4)),
    )


def random_ap(rng, ofdm, antenna_max=6):
    angle = rng.uniform(0.0, 2.0 * np.pi)
    radius = rng.uniform(200.0, 600.0)
    pos = radius * np.array([np.cos(angle), np.sin(angle)])
    return ApGeometry(
        position=pos,
        kappa=wrap_angle(float(rng.uniform(-np.pi, np.pi))),
        antenna_count=int(rng.integers(1, antenna_max + 1)),
        antenna_spacing=ofdm.wavelength / 2.0,
    )


def random_target(rng, speed=60.0):
    heading = rng.uniform(0.0, 2.0 * np.pi)
    return TargetTruth(
        position=rng.uniform(-60.0, 60.0, size=2),
        velocity=speed * np.array([np.cos(heading), np.sin(heading)]),
        rcs=float(rng.uniform(0.005, 0.05)),
    )


def small_scene(rng, ap_count=None, target_count=None, k_max=6):
    """Small random scenario for oracle comparisons."""
    ofdm = small_ofdm(rng, k_max=k_max)
    if ap_count is None:
        ap_count = int(rng.integers(1, 4))
    if target_count is None:
        target_count = int(rng.integers(1, 4))
    aps = tuple(random_ap(rng, ofdm) for _ in range(ap_count))
    targets = tuple(random_target(rng) for _ in range(target_count))
    return ScenarioConfig(name="small", ofdm=ofdm, aps=aps, targets=targets)


def exhaustive_match_rmse(estimates, truths):
    """Minimum RMSE over every estimate-to-truth permutation."""
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truths, dtype=float)
    best = np.inf
    for perm in itertools.permutations(range(len(tru))):
        se = sum(float(np.sum((est[i] - tru[p]) ** 2))
                 for i, p in enumerate(perm))
        best = min(best, se)
    return float(np.sqrt(best / len(tru)))


def central_difference(fn, point, step=1e-4):
    """Two-sided numerical gradient of a scalar map of a 2-vector."""
    point = np.asarray(point, dtype=float)
    grad = np.empty(2)
    for i in range(2):
        up = point.copy()
        dn = point.copy()
        up[i] += step
        dn[i] -= step
        grad[i] = (fn(up) - fn(dn)) / (2.0 * step)
    return grad
