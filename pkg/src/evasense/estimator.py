"""Multi-target position estimation from fused pseudospectra.

The estimator never associates per-AP detections. It scores candidate
positions directly: coarse grid evaluation of the fused spectrum, greedy
extraction of the L strongest well-separated peaks, then a quasi-Newton
polish of -ln(spectrum) around each coarse peak.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientPeaks
from .scenario import OfdmParams
from .subspace import (SpectrumGrid, fused_spectrum_batch, projector_from_tensor,
                       spectrum_grid)

_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class EstimatorConfig:
    """Tuning knobs for the grid-plus-refinement search.

    roi : (x0, y0, x1, y1) search rectangle in meters.
    target_count : assumed number of targets L (known model order).
    coarse_resolution : grid step of the initial scan, m.
    peak_exclusion_radius : suppression radius around an extracted peak, m.
    qn_tolerance : refinement stops when the step shrinks below this, m.
    fd_step : central-difference step for the spectrum gradient, m.
    """

    roi: tuple[float, float, float, float]
    target_count: int
    coarse_resolution: float = 2.0
    peak_exclusion_radius: float = 10.0
    qn_tolerance: float = 1e-4
    qn_max_iters: int = 200
    fd_step: float = 1e-3

    def __post_init__(self):
        x0, y0, x1, y1 = self.roi
        if not (x1 > x0 and y1 > y0):
            raise ValueError("roi must satisfy x1 > x0 and y1 > y0")
        if self.target_count < 1:
            raise ValueError("target_count must be at least 1")
        if not self.coarse_resolution > 0:
            raise ValueError("coarse_resolution must be positive")
        if self.peak_exclusion_radius < self.coarse_resolution:
            raise ValueError("peak_exclusion_radius must be >= coarse_resolution")
        if not (self.qn_tolerance > 0 and self.fd_step > 0):
            raise ValueError("qn_tolerance and fd_step must be positive")
        if self.qn_max_iters < 1:
            raise ValueError("qn_max_iters must be at least 1")


@dataclass
class RefineDiagnostics:
    iterations: int
    converged: bool
    value: float  # spectrum height at the refined point


@dataclass
class LocalizationResult:
    """Estimates plus per-peak diagnostics, ordered by coarse peak height."""

    estimates: np.ndarray        # (L, 2)
    spectrum_values: np.ndarray  # (L,)
    coarse_seeds: np.ndarray     # (L, 2)
    iterations: np.ndarray       # (L,) int
    converged: np.ndarray        # (L,) bool
    low_confidence: np.ndarray   # (L,) bool
    duplicate: np.ndarray        # (L,) bool


def find_peaks(grid: SpectrumGrid, count: int, exclusion_radius: float) -> np.ndarray:
    """Greedy extraction of the ``count`` strongest separated grid peaks.

    After each pick every cell within the exclusion radius is removed
    from contention. Raises InsufficientPeaks when the grid runs out of
    candidate cells first.
    """
    if grid.values.size < count:
        raise InsufficientPeaks(f"grid has {grid.values.size} cells, need {count}")
    vals = grid.values.astype(float).copy()
    gx, gy = np.meshgrid(grid.xs, grid.ys)
    picks = np.empty((count, 2))
    for i in range(count):
        flat = int(np.argmax(vals))
        iy, ix = np.unravel_index(flat, vals.shape)
        if np.isneginf(vals[iy, ix]):
            raise InsufficientPeaks(
                f"only {i} separable peaks at exclusion radius {exclusion_radius}")
        picks[i] = (grid.xs[ix], grid.ys[iy])
        suppress = (gx - picks[i, 0]) ** 2 + (gy - picks[i, 1]) ** 2 \
            < exclusion_radius ** 2
        vals[suppress] = -np.inf
    return picks


def _neg_log(objective, points: np.ndarray) -> np.ndarray:
    psi = np.asarray(objective(points), dtype=float)
    out = np.full(psi.shape, np.inf)
    pos = psi > 0
    out[pos] = -np.log(np.maximum(psi[pos], _TINY))
    return out


def _gradient(objective, x: np.ndarray, h: float) -> np.ndarray:
    stencil = np.array([[h, 0.0], [-h, 0.0], [0.0, h], [0.0, -h]]) + x
    f = _neg_log(objective, stencil)
    return np.array([(f[0] - f[1]) / (2 * h), (f[2] - f[3]) / (2 * h)])


def refine_peak(seed, objective, config: EstimatorConfig):
    """Quasi-Newton (BFGS) descent on -ln(spectrum) from a coarse seed.

    ``objective`` maps an (n, 2) batch of positions to spectrum values.
    Backtracking line search keeps every accepted step an improvement,
    so the returned point never scores below the seed. The walk is
    confined to the exclusion-radius ball around the seed: the coarse
    grid already decided which basin this seed polishes, and a weak
    peak's descent would otherwise drain over a saddle into a stronger
    neighbor. Returns the refined position and RefineDiagnostics.
    """
    x = np.asarray(seed, dtype=float).copy()
    if x.shape != (2,):
        raise ValueError("seed must be a 2-vector")
    anchor = x.copy()
    trust = config.peak_exclusion_radius
    fx = float(_neg_log(objective, x[None, :])[0])
    if not np.isfinite(fx):
        raise ValueError("objective is not positive and finite at the seed")

    h = config.fd_step
    g = _gradient(objective, x, h)
    hess_inv = np.eye(2)
    iterations = 0
    converged = False
    for _ in range(config.qn_max_iters):
        if np.linalg.norm(g) < 1e-14:
            converged = True
            break
        direction = -hess_inv @ g
        slope = float(direction @ g)
        if slope >= 0:  # stale curvature, fall back to steepest descent
            hess_inv = np.eye(2)
            direction = -g
            slope = -float(g @ g)

        step = 1.0
        accepted = False
        for _ in range(40):
            x_new = x + step * direction
            if np.linalg.norm(x_new - anchor) > trust:
                step *= 0.5
                continue
            f_new = float(_neg_log(objective, x_new[None, :])[0])
            if f_new <= fx + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break

        s = x_new - x
        g_new = _gradient(objective, x_new, h)
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            rho = 1.0 / sy
            left = np.eye(2) - rho * np.outer(s, y)
            hess_inv = left @ hess_inv @ left.T + rho * np.outer(s, s)
        x, fx, g = x_new, f_new, g_new
        iterations += 1
        if np.linalg.norm(s) < config.qn_tolerance:
            converged = True
            break

    value = float(np.asarray(objective(x[None, :]), dtype=float)[0])
    return x, RefineDiagnostics(iterations=iterations, converged=converged,
                                value=value)


def _candidate_seeds(grid, count: int, exclusion: float) -> np.ndarray:
    """Coarse peaks for refinement, with spares when the grid has them."""
    for extra in (4, 2, 0):
        try:
            return find_peaks(grid, count + extra, exclusion)
        except InsufficientPeaks:
            if extra == 0:
                raise
    raise AssertionError("unreachable")


def _localize(tensors, aps, ofdm: OfdmParams, config: EstimatorConfig,
              mode: str) -> LocalizationResult:
    projectors = [projector_from_tensor(t, config.target_count, mode=mode)
                  for t in tensors]
    grid = spectrum_grid(projectors, aps, ofdm, config.roi,
                         config.coarse_resolution)
    count = config.target_count
    candidates = _candidate_seeds(grid, count, config.peak_exclusion_radius)

    def objective(points):
        return fused_spectrum_batch(points, projectors, aps, ofdm)

    estimates = np.empty((count, 2))
    seeds = np.empty((count, 2))
    values = np.empty(count)
    iters = np.empty(count, dtype=int)
    converged = np.empty(count, dtype=bool)
    min_sep = config.peak_exclusion_radius / 2.0

    # Walk the coarse peaks in height order. Greedy suppression in the
    # coarse search re-exposes the rim of each claimed peak's crater, so
    # a candidate seed sitting in the annulus just outside an accepted
    # estimate's exclusion disc is a shoulder of that peak, not a new
    # one: skip it before refining. A refinement that lands inside the
    # exclusion disc of an accepted estimate fell into the same basin
    # and is likewise discarded. Each later slot keeps one seed reserved
    # so deep grids cannot starve it.
    rim_radius = config.peak_exclusion_radius + 3.0 * config.coarse_resolution
    next_seed = 0
    accepted: list[np.ndarray] = []
    for i in range(count):
        budget = len(candidates) - (count - 1 - i)
        fallback = None
        skipped = None
        placed = False
        while next_seed < budget:
            seed = candidates[next_seed]
            next_seed += 1
            if any(np.linalg.norm(seed - a) < rim_radius for a in accepted):
                if skipped is None:
                    skipped = seed
                continue
            est, diag = refine_peak(seed, objective, config)
            fresh = all(np.linalg.norm(est - a) >= config.peak_exclusion_radius
                        for a in accepted)
            if fresh:
                seeds[i], estimates[i] = seed, est
                values[i], iters[i] = diag.value, diag.iterations
                converged[i] = diag.converged
                placed = True
                break
            if fallback is None:
                fallback = (seed, est, diag)
        if not placed:
            if fallback is None:
                seed = skipped if skipped is not None else candidates[next_seed - 1]
                est, diag = refine_peak(seed, objective, config)
                fallback = (seed, est, diag)
            seed, est, diag = fallback
            seeds[i], estimates[i] = seed, est
            values[i], iters[i] = diag.value, diag.iterations
            converged[i] = diag.converged
        accepted.append(estimates[i])

    # peaks barely above the grid's background level are suspect
    background = float(np.median(grid.values))
    low_confidence = values < 10.0 * background

    duplicate = np.zeros(count, dtype=bool)
    min_sep = config.peak_exclusion_radius / 2.0
    for i in range(count):
        for j in range(i):
            if not duplicate[j] and np.linalg.norm(estimates[i] - estimates[j]) < min_sep:
                duplicate[i] = True
    return LocalizationResult(estimates=estimates, spectrum_values=values,
                              coarse_seeds=seeds, iterations=iters,
                              converged=converged, low_confidence=low_confidence,
                              duplicate=duplicate)


def localize(tensors, aps, ofdm: OfdmParams,
             config: EstimatorConfig) -> LocalizationResult:
    """Joint multi-AP localization on the virtual-array fused spectrum."""
    return _localize(tensors, aps, ofdm, config, mode="eva")


def delay_only_localize(tensors, aps, ofdm: OfdmParams,
                        config: EstimatorConfig) -> LocalizationResult:
    """Ranging-only baseline: same fusion but with delay steering alone.

    Each AP contributes circular constant-range ridges instead of
    range-angle intersections, so target positions must emerge from
    multilateration of the ridges. Needs L < K.
    """
    if config.target_count >= ofdm.subcarriers:
        raise InsufficientPeaks(
            f"delay-only mode needs target_count < subcarriers "
            f"({config.target_count} >= {ofdm.subcarriers})")
    return _localize(tensors, aps, ofdm, config, mode="delay")
