"""Command-line front end.

Global flags come before the subcommand:

    evasense --threads 8 sweep-snr --scenario scene.yaml --snr=-5:5:20 \
        --trials 100 --baseline --out sweep.csv

Without --full, the sweep subcommands cap the scenario at 24
subcarriers and default to 100 trials so a run finishes at desk scale;
--full keeps the file's numerology and defaults to 1000 trials. Note
the ``--snr=-5:5:20`` form: the leading minus requires '='.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .crlb import CrlbReport, crlb_position
from .echo import noise_sigma_for_snr, synthesize_echo
from .errors import EvaSenseError
from .estimator import EstimatorConfig, localize
from .experiments import (PlacementRule, assign_estimates, emit_csv,
                          run_snr_sweep, run_target_sweep)
from .scenario import (ScenarioConfig, five_ap_circle_scenario, load_scenario,
                       with_subcarriers)
from .subspace import projector_from_tensor, spectrum_grid

DESK_SUBCARRIERS = 24
DESK_TRIALS = 100
FULL_TRIALS = 1000


def _parse_roi(text: str):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("roi must be x0,y0,x1,y1")
    return tuple(parts)


def _parse_snr_list(text: str):
    """Either a comma list '0,5,10' or an inclusive range 'start:step:stop'."""
    if ":" in text:
        start, step, stop = (float(v) for v in text.split(":"))
        if step <= 0:
            raise argparse.ArgumentTypeError("snr range step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(max(count, 0))]
    return [float(v) for v in text.split(",")]


def _parse_counts(text: str):
    return [int(v) for v in text.split(",")]


def _load_scene(args, desk_cap: bool) -> ScenarioConfig:
    if args.scenario is not None:
        scene = load_scenario(args.scenario)
    else:
        scene = five_ap_circle_scenario()
    if desk_cap and not args.full and scene.ofdm.subcarriers > DESK_SUBCARRIERS:
        scene = with_subcarriers(scene, DESK_SUBCARRIERS)
    return scene


def _estimator_config(args, scene: ScenarioConfig) -> EstimatorConfig:
    count = getattr(args, "targets", None) or scene.target_count
    return EstimatorConfig(roi=args.roi, target_count=count,
                           coarse_resolution=args.resolution,
                           peak_exclusion_radius=args.exclusion)


def _default_trials(args) -> int:
    if args.trials is not None:
        return args.trials
    return FULL_TRIALS if args.full else DESK_TRIALS


def cmd_simulate(args) -> int:
    scene = _load_scene(args, desk_cap=False)
    sigma = noise_sigma_for_snr(scene, args.snr)
    children = np.random.SeedSequence((args.seed, 0, 0)).spawn(scene.ap_count)
    tensors = [synthesize_echo(scene, p, sigma, np.random.default_rng(c))
               for p, c in enumerate(children)]
    config = _estimator_config(args, scene)
    result = localize(tensors, scene.aps, scene.ofdm, config)
    truths = np.array([t.position for t in scene.targets])
    pairs, errors = assign_estimates(result.estimates, truths)
    print(f"scenario: {scene.name}  snr: {args.snr:g} dB  sigma: {sigma:.4e}")
    for est_idx, tru_idx in pairs:
        e = result.estimates[est_idx]
        t = truths[tru_idx]
        print(f"target {tru_idx}: truth ({t[0]:9.3f}, {t[1]:9.3f})  "
              f"estimate ({e[0]:9.3f}, {e[1]:9.3f})  "
              f"error {errors[tru_idx]:.3f} m")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        np.savez(out / "tensors.npz",
                 **{f"ap{p}": t.data for p, t in enumerate(tensors)})
        with (out / "estimates.csv").open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["target", "truth_x_m", "truth_y_m",
                             "estimate_x_m", "estimate_y_m", "error_m"])
            for est_idx, tru_idx in pairs:
                e = result.estimates[est_idx]
                t = truths[tru_idx]
                writer.writerow([tru_idx, f"{t[0]:.17g}", f"{t[1]:.17g}",
                                 f"{e[0]:.17g}", f"{e[1]:.17g}",
                                 f"{errors[tru_idx]:.17g}"])
        print(f"wrote {out / 'tensors.npz'} and {out / 'estimates.csv'}")
    return 0


def cmd_spectrum(args) -> int:
    scene = _load_scene(args, desk_cap=False)
    sigma = 0.0 if args.snr is None else noise_sigma_for_snr(scene, args.snr)
    children = np.random.SeedSequence((args.seed, 0, 0)).spawn(scene.ap_count)
    tensors = [synthesize_echo(scene, p, sigma, np.random.default_rng(c))
               for p, c in enumerate(children)]
    projectors = [projector_from_tensor(t, scene.target_count) for t in tensors]
    grid = spectrum_grid(projectors, scene.aps, scene.ofdm, args.roi,
                         args.resolution)
    grid.to_csv(args.out)
    peak = grid.point(*np.unravel_index(int(np.argmax(grid.values)),
                                        grid.values.shape))
    print(f"wrote {grid.ny}x{grid.nx} grid to {args.out}; "
          f"strongest cell at ({peak[0]:.1f}, {peak[1]:.1f})")
    return 0


def cmd_crlb(args) -> int:
    scene = _load_scene(args, desk_cap=False)
    sigma = noise_sigma_for_snr(scene, args.snr)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(CrlbReport.CSV_FIELDS)
    for l in range(scene.target_count):
        report = crlb_position(scene, l, sigma, snr_db=args.snr)
        writer.writerow(report.to_csv_row())
    return 0


def cmd_sweep_snr(args) -> int:
    scene = _load_scene(args, desk_cap=True)
    config = _estimator_config(args, scene)
    result = run_snr_sweep(scene, args.snr, _default_trials(args), config,
                           master_seed=args.seed, baseline=args.baseline,
                           threads=args.threads)
    emit_csv(result, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_sweep_targets(args) -> int:
    scene = _load_scene(args, desk_cap=True)
    config = _estimator_config(args, scene)
    x0, y0, x1, y1 = args.roi
    placement = PlacementRule(region=(x0 + 10, y0 + 10, x1 - 10, y1 - 10),
                              min_separation=args.separation)
    result = run_target_sweep(scene, args.counts, _default_trials(args), config,
                              master_seed=args.seed, snr_db=args.snr,
                              placement=placement, baseline=args.baseline,
                              threads=args.threads)
    emit_csv(result, args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evasense",
        description="Cooperative OFDM sensing: simulate, localize, benchmark.")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for Monte Carlo trials")
    parser.add_argument("--full", action="store_true",
                        help="paper-scale sweeps: keep file subcarrier count, "
                             "default 1000 trials")
    parser.add_argument("--log", default="warning",
                        choices=["debug", "info", "warning", "error"],
                        help="log level")

    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("--scenario", default=None,
                           help="scenario YAML (default: built-in five-AP scene)")
        p.add_argument("--roi", type=_parse_roi, default=(-100, -100, 100, 100),
                       help="search region x0,y0,x1,y1 in meters")
        p.add_argument("--resolution", type=float, default=2.0,
                       help="coarse grid step, meters")
        p.add_argument("--exclusion", type=float, default=25.0,
                       help="peak suppression radius, meters; wide enough "
                            "to step over noisy peak plateaus")
        p.add_argument("--seed", type=int, default=0, help="master seed")

    p = sub.add_parser("simulate", help="synthesize echoes and localize once")
    common(p)
    p.add_argument("--snr", type=float, default=10.0)
    p.add_argument("--targets", type=int, default=None,
                   help="assumed model order (default: scenario target count)")
    p.add_argument("--out", default=None, help="directory for tensors + estimates")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("spectrum", help="dump the fused spectrum grid as CSV")
    common(p)
    p.add_argument("--snr", type=float, default=None,
                   help="synthesis SNR in dB (default: noiseless)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("crlb", help="print the position bound per target")
    p.add_argument("--scenario", default=None)
    p.add_argument("--snr", type=float, default=10.0)
    p.set_defaults(func=cmd_crlb)

    p = sub.add_parser("sweep-snr", help="RMSE vs SNR Monte Carlo sweep")
    common(p)
    p.add_argument("--snr", type=_parse_snr_list, default=[-5, 0, 5, 10, 15, 20],
                   help="comma list or start:step:stop (use --snr=-5:5:20)")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--baseline", action="store_true",
                   help="also run the delay-only baseline")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_snr)

    p = sub.add_parser("sweep-targets", help="RMSE vs target count sweep")
    common(p)
    p.add_argument("--counts", type=_parse_counts, default=[1, 2, 3],
                   help="comma list of target counts")
    p.add_argument("--snr", type=float, default=5.0)
    p.add_argument("--separation", type=float, default=40.0,
                   help="minimum pairwise target separation, meters")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--baseline", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_targets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log.upper()),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except EvaSenseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
