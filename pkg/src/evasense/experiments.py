"""Monte Carlo benchmark harness: RMSE scoring, SNR and target-count sweeps.

Scoring matches estimates to truths by minimum-total-squared-distance
assignment before applying the RMSE formula; the matching exists only
at evaluation time, the estimator itself stays association-free.

Seeding: trial t of axis point i draws everything from
SeedSequence((master_seed, i, t)), split into one stream per AP plus
one for target placement. Aggregation walks trials in index order, so
results are bit-identical for any worker count and the first T trials
of a longer run reproduce a shorter run exactly.
"""
from __future__ import annotations

import csv
import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .crlb import crlb_position
from .echo import doppler_shift, noise_sigma_for_snr, steering_doppler, \
    synthesize_echo
from .errors import EvaSenseError, LengthMismatch, PlacementFailure
from .estimator import EstimatorConfig, delay_only_localize, localize
from .geometry import TargetTruth
from .scenario import ScenarioConfig, with_targets
from .subspace import eva_steering

log = logging.getLogger(__name__)

# a trial whose best estimate lies farther than this from every truth
# is a failure: counted in the failures column, excluded from RMSE
OUTLIER_RADIUS_M = 50.0


def assign_estimates(estimates, truths):
    """Minimum-cost pairing of estimates to truths.

    Returns (pairs, per_truth_error): pairs as (estimate_index,
    truth_index) tuples, errors indexed by truth.
    """
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    tru = np.atleast_2d(np.asarray(truths, dtype=float))
    if est.shape != tru.shape or est.ndim != 2 or est.shape[1] != 2:
        raise LengthMismatch(
            f"estimate/truth shape mismatch: {est.shape} vs {tru.shape}")
    diff = est[:, None, :] - tru[None, :, :]
    cost = np.einsum("ijk,ijk->ij", diff, diff)
    rows, cols = linear_sum_assignment(cost)
    errors = np.empty(est.shape[0])
    errors[cols] = np.sqrt(cost[rows, cols])
    pairs = tuple(zip(rows.tolist(), cols.tolist()))
    return pairs, errors


def rmse(estimates, truths) -> float:
    """Root mean squared position error after optimal matching."""
    _, errors = assign_estimates(estimates, truths)
    return float(np.sqrt(np.mean(errors**2)))


def max_pair_coherence(scenario: ScenarioConfig, targets) -> float:
    """Worst-case product of virtual-array and Doppler correlation.

    For every target pair and every AP, multiply the normalized inner
    product of the two EVA steering vectors by that of the two Doppler
    vectors. The maximum over pairs and APs predicts how close the
    pair comes to a rank-deficient signal covariance somewhere in the
    network: near 1 the second eigenvalue vanishes at that AP and no
    subspace split can separate the pair there.
    """
    ofdm = scenario.ofdm
    lam = ofdm.wavelength
    worst = 0.0
    for ap in scenario.aps:
        space = [eva_steering(t.position, ap, ofdm) for t in targets]
        time = [steering_doppler(doppler_shift(t, ap, lam),
                                 ofdm.symbols, ofdm.symbol_period)
                for t in targets]
        for i in range(len(targets)):
            for j in range(i + 1, len(targets)):
                cs = abs(np.vdot(space[i], space[j])) / (
                    np.linalg.norm(space[i]) * np.linalg.norm(space[j]))
                ct = abs(np.vdot(time[i], time[j])) / (
                    np.linalg.norm(time[i]) * np.linalg.norm(time[j]))
                worst = max(worst, cs * ct)
    return worst


@dataclass(frozen=True)
class PlacementRule:
    """Random target placement for the target-count sweep.

    Positions are uniform over ``region`` with pairwise separation at
    least ``min_separation``. Headings are drawn as a random rotation of
    an evenly spread fan (plus a small jitter) at a common ``speed``.
    Draws are rejected until every target pair stays identifiable at
    every AP, meaning max_pair_coherence() at most ``coherence_limit``:
    with only a handful of snapshots, a pair whose steering and Doppler
    vectors are simultaneously near-collinear at some AP cannot be split
    there by any subspace method, so such draws measure the scene rather
    than the estimator. Raises PlacementFailure when ``max_attempts``
    draws cannot satisfy the constraints.
    """

    region: tuple[float, float, float, float]
    min_separation: float = 40.0
    speed: float = 80.0
    rcs: float = 0.01
    coherence_limit: float = 0.25
    max_attempts: int = 1000

    def _draw_positions(self, rng: np.random.Generator, count: int):
        x0, y0, x1, y1 = self.region
        lo = np.array([x0, y0])
        hi = np.array([x1, y1])
        positions: list[np.ndarray] = []
        for _ in range(100 * count):
            cand = rng.uniform(lo, hi)
            if all(np.linalg.norm(cand - q) >= self.min_separation
                   for q in positions):
                positions.append(cand)
                if len(positions) == count:
                    return positions
        return None

    def sample(
        self,
        rng: np.random.Generator,
        count: int,
        scenario: ScenarioConfig,
    ) -> tuple[TargetTruth, ...]:
        for _ in range(self.max_attempts):
            positions = self._draw_positions(rng, count)
            if positions is None:
                continue
            base = rng.uniform(0.0, 2.0 * np.pi)
            jitter = rng.uniform(-np.pi / 18.0, np.pi / 18.0, size=count)
            headings = base + 2.0 * np.pi * np.arange(count) / max(count, 1) \
                + jitter
            velocities = self.speed * np.stack(
                [np.cos(headings), np.sin(headings)], axis=1)
            targets = tuple(
                TargetTruth(position=positions[i], velocity=velocities[i],
                            rcs=self.rcs)
                for i in range(count)
            )
            if count < 2:
                return targets
            if max_pair_coherence(scenario, targets) <= self.coherence_limit:
                return targets
        raise PlacementFailure(
            f"could not place {count} identifiable targets within "
            f"{self.max_attempts} attempts")


@dataclass
class TrialRecord:
    """Outcome of one Monte Carlo trial.

    seed is the trial component of the (master_seed, axis_index, trial)
    seed tuple. ``failed`` marks a lost trial: the estimator raised, or
    every estimate landed farther than OUTLIER_RADIUS_M from every
    truth. Failed trials are excluded from RMSE and counted instead.
    """

    trial_id: int
    seed: int
    snr_db: float
    per_target_error: np.ndarray
    assigned_pairs: tuple
    converged_flags: np.ndarray
    failed: bool
    baseline_error: np.ndarray | None = None
    baseline_failed: bool | None = None
    root_crlb_mean: float | None = None


def _score(result, truths):
    pairs, errors = assign_estimates(result.estimates, truths)
    failed = not bool(np.any(errors <= OUTLIER_RADIUS_M))
    return pairs, errors, failed


def run_trial(
    scenario: ScenarioConfig,
    snr_db: float,
    config: EstimatorConfig,
    master_seed: int,
    axis_index: int,
    trial: int,
    baseline: bool = False,
    noise_override: float | None = None,
    placement: PlacementRule | None = None,
    with_crlb: bool = False,
) -> TrialRecord:
    """One seeded synthesis + localization round.

    With a ``placement`` rule the scenario's targets are replaced by a
    fresh draw (config.target_count of them) before synthesis, and the
    noise level is re-anchored to the new geometry.
    """
    seq = np.random.SeedSequence((master_seed, axis_index, trial))
    children = seq.spawn(scenario.ap_count + 1)
    if placement is not None:
        targets = placement.sample(np.random.default_rng(children[-1]),
                                   config.target_count, scenario)
        scenario = with_targets(scenario, targets)
    sigma = noise_sigma_for_snr(scenario, snr_db) if noise_override is None \
        else noise_override
    rngs = [np.random.default_rng(c) for c in children[: scenario.ap_count]]
    tensors = [synthesize_echo(scenario, p, sigma, rngs[p])
               for p in range(scenario.ap_count)]
    truths = np.array([t.position for t in scenario.targets])
    count = config.target_count

    try:
        result = localize(tensors, scenario.aps, scenario.ofdm, config)
        pairs, errors, failed = _score(result, truths)
        converged = result.converged.copy()
    except EvaSenseError:
        pairs, errors, failed = (), np.full(count, np.nan), True
        converged = np.zeros(count, dtype=bool)

    record = TrialRecord(trial_id=trial, seed=trial, snr_db=snr_db,
                         per_target_error=errors, assigned_pairs=pairs,
                         converged_flags=converged, failed=failed)
    if baseline:
        try:
            base = delay_only_localize(tensors, scenario.aps, scenario.ofdm,
                                       config)
            _, berr, bfail = _score(base, truths)
        except EvaSenseError:
            berr, bfail = np.full(count, np.nan), True
        record.baseline_error = berr
        record.baseline_failed = bfail
    if with_crlb:
        bound_sigma = sigma if noise_override is None \
            else noise_sigma_for_snr(scenario, snr_db)
        roots = [crlb_position(scenario, l, bound_sigma).root_crlb
                 for l in range(scenario.target_count)]
        record.root_crlb_mean = float(np.mean(roots))
    return record


@dataclass
class SweepResult:
    """Aggregated Monte Carlo results along one axis.

    failures counts lost trials per axis point, so successes plus
    failures always equals trials_per_point.
    """

    axis_name: str
    axis: np.ndarray
    rmse: np.ndarray
    root_crlb: np.ndarray
    trials_per_point: int
    failures: np.ndarray
    baseline_rmse: np.ndarray | None = None
    baseline_failures: np.ndarray | None = None
    records: list = field(default_factory=list, repr=False)


def _aggregate_rmse(error_lists, failed_flags):
    """Pooled RMSE over the surviving trials of one axis point.

    A failed trial (the estimator raised, or nothing landed within the
    outlier radius of any truth) contributes no errors; every matched
    error of a surviving trial enters the pool. Returns (rmse, failure
    count), rmse being nan when every trial failed.
    """
    kept = [np.atleast_1d(np.asarray(e, dtype=float))
            for e, f in zip(error_lists, failed_flags) if not f]
    failures = sum(1 for f in failed_flags if f)
    if not kept:
        return float("nan"), failures
    flat = np.concatenate(kept)
    return float(np.sqrt(np.mean(flat**2))), failures


def _run_point(scenario, snr_db, config, master_seed, axis_index, trials,
               baseline, threads, noise_override, placement, with_crlb):
    def one(t: int) -> TrialRecord:
        return run_trial(scenario, snr_db, config, master_seed, axis_index, t,
                         baseline=baseline, noise_override=noise_override,
                         placement=placement, with_crlb=with_crlb)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one, range(trials)))
    else:
        records = [one(t) for t in range(trials)]
    return records


def _point_stats(records, baseline: bool):
    point_rmse, fail_count = _aggregate_rmse(
        [r.per_target_error for r in records], [r.failed for r in records])
    if not baseline:
        return point_rmse, fail_count, None, None
    brmse, bfail = _aggregate_rmse([r.baseline_error for r in records],
                                   [r.baseline_failed for r in records])
    return point_rmse, fail_count, brmse, bfail


def run_snr_sweep(
    scenario: ScenarioConfig,
    snr_list,
    trials: int,
    config: EstimatorConfig,
    master_seed: int,
    baseline: bool = False,
    threads: int = 1,
    noise_override: float | None = None,
) -> SweepResult:
    """RMSE (and optionally the delay-only baseline) across SNR points.

    root_crlb per point is the mean over targets at the SNR-implied
    noise level, regardless of any noise_override used for synthesis.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    snr_values = [float(s) for s in snr_list]
    p_count = len(snr_values)
    out_rmse = np.empty(p_count)
    out_crlb = np.empty(p_count)
    out_fail = np.zeros(p_count, dtype=int)
    out_brmse = np.empty(p_count) if baseline else None
    out_bfail = np.zeros(p_count, dtype=int) if baseline else None
    all_records = []
    for i, snr in enumerate(snr_values):
        records = _run_point(scenario, snr, config, master_seed, i, trials,
                             baseline, threads, noise_override, None, False)
        point_rmse, fails, brmse, bfails = _point_stats(records, baseline)
        out_rmse[i] = point_rmse
        out_fail[i] = fails
        if baseline:
            out_brmse[i] = brmse
            out_bfail[i] = bfails
        sigma = noise_sigma_for_snr(scenario, snr)
        out_crlb[i] = float(np.mean([
            crlb_position(scenario, l, sigma, snr_db=snr).root_crlb
            for l in range(scenario.target_count)
        ]))
        all_records.append(records)
        log.info("snr %+.1f dB: rmse %.3f m, crlb %.3f m, %d/%d failed",
                 snr, out_rmse[i], out_crlb[i], fails, trials)
    return SweepResult(axis_name="snr_db", axis=np.array(snr_values),
                       rmse=out_rmse, root_crlb=out_crlb,
                       trials_per_point=trials, failures=out_fail,
                       baseline_rmse=out_brmse, baseline_failures=out_bfail,
                       records=all_records)


def run_target_sweep(
    scenario_template: ScenarioConfig,
    target_counts,
    trials: int,
    config: EstimatorConfig,
    master_seed: int,
    snr_db: float = 5.0,
    placement: PlacementRule | None = None,
    baseline: bool = False,
    threads: int = 1,
) -> SweepResult:
    """RMSE versus number of targets with per-trial random placement.

    The default placement rule draws inside the estimator ROI inset by
    10 m, 40 m minimum separation. Noise is re-anchored to each trial's
    geometry so every trial runs at the requested SNR.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    counts = [int(c) for c in target_counts]
    if placement is None:
        x0, y0, x1, y1 = config.roi
        placement = PlacementRule(region=(x0 + 10.0, y0 + 10.0,
                                          x1 - 10.0, y1 - 10.0))
    p_count = len(counts)
    out_rmse = np.empty(p_count)
    out_crlb = np.empty(p_count)
    out_fail = np.zeros(p_count, dtype=int)
    out_brmse = np.empty(p_count) if baseline else None
    out_bfail = np.zeros(p_count, dtype=int) if baseline else None
    all_records = []
    for i, count in enumerate(counts):
        cfg = dataclasses.replace(config, target_count=count)
        records = _run_point(scenario_template, snr_db, cfg, master_seed, i,
                             trials, baseline, threads, None, placement, True)
        point_rmse, fails, brmse, bfails = _point_stats(records, baseline)
        out_rmse[i] = point_rmse
        out_fail[i] = fails
        if baseline:
            out_brmse[i] = brmse
            out_bfail[i] = bfails
        out_crlb[i] = float(np.mean([r.root_crlb_mean for r in records]))
        all_records.append(records)
        log.info("L=%d: rmse %.3f m, crlb %.3f m, %d/%d failed",
                 count, out_rmse[i], out_crlb[i], fails, trials)
    return SweepResult(axis_name="target_count", axis=np.array(counts, dtype=float),
                       rmse=out_rmse, root_crlb=out_crlb,
                       trials_per_point=trials, failures=out_fail,
                       baseline_rmse=out_brmse, baseline_failures=out_bfail,
                       records=all_records)


CSV_HEADER = ("axis_value", "rmse_m", "root_crlb_m", "baseline_rmse_m",
              "trials", "failures")


def emit_csv(result: SweepResult, path) -> None:
    """Write the fixed six-column sweep schema, one row per axis point."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for i in range(len(result.axis)):
            base = "" if result.baseline_rmse is None \
                else f"{result.baseline_rmse[i]:.17g}"
            writer.writerow([
                f"{result.axis[i]:.17g}",
                f"{result.rmse[i]:.17g}",
                f"{result.root_crlb[i]:.17g}",
                base,
                result.trials_per_point,
                int(result.failures[i]),
            ])


def load_csv(path) -> SweepResult:
    """Read a file produced by emit_csv back into a SweepResult."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected sweep CSV header: {header}")
        rows = [row for row in reader if row]
    axis = np.array([float(r[0]) for r in rows])
    rmse_col = np.array([float(r[1]) for r in rows])
    crlb_col = np.array([float(r[2]) for r in rows])
    has_base = any(r[3] != "" for r in rows)
    base_col = np.array([float(r[3]) if r[3] != "" else np.nan for r in rows]) \
        if has_base else None
    trials = int(rows[0][4]) if rows else 0
    fails = np.array([int(r[5]) for r in rows], dtype=int)
    return SweepResult(axis_name="axis", axis=axis, rmse=rmse_col,
                       root_crlb=crlb_col, trials_per_point=trials,
                       failures=fails, baseline_rmse=base_col,
                       baseline_failures=None)
