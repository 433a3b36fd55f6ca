"""Command-line interface: solving, synthetic experiments and benchmarks."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .bench import (
    RESULT_COLUMNS,
    SynthConfig,
    accuracy_sweep,
    load_dataset,
    run_benchmark,
    stability_experiment,
)
from .constraints import compute_Q, evaluate_generators, load_table
from .exceptions import ParseError, PlaneFocalError
from .geometry import CameraIntrinsics, PointTriplet
from .ransac import RansacConfig, estimate

CASES = ("fff", "ff", "frr", "fr")


def _parse_fov(text):
    try:
        lo, hi = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected MIN:MAX degrees") from exc
    if not 0 < lo < hi:
        raise argparse.ArgumentTypeError("need 0 < MIN < MAX")
    return (lo, hi)


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    p.add_argument("--case", choices=CASES, default="fff")
    p.add_argument("--fov-filter", type=_parse_fov, default=None,
                   metavar="MIN:MAX", help="horizontal FOV prior in degrees")


def _ransac_config(args) -> RansacConfig:
    return RansacConfig(
        max_iterations=args.max_iterations,
        min_iterations=args.min_iterations,
        confidence=args.confidence,
        sampson_threshold_px=args.threshold,
        fov_filter=args.fov_filter,
        rng_seed=args.seed,
    )


def _add_ransac_flags(p):
    p.add_argument("--max-iterations", type=int, default=1000)
    p.add_argument("--min-iterations", type=int, default=100)
    p.add_argument("--confidence", type=float, default=0.9999)
    p.add_argument("--threshold", type=float, default=3.0,
                   help="Sampson threshold in pixels")


def cmd_solve(args) -> int:
    try:
        with open(args.input) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read {args.input}: {exc}") from exc
    pts = np.asarray(raw["points"], dtype=float)
    sizes = raw.get("image_sizes", [[1920, 1080]] * 3)
    centers = [np.array([s[0] / 2.0, s[1] / 2.0]) for s in sizes]
    triplets = [PointTriplet(p[0:2] - centers[0], p[2:4] - centers[1],
                             p[4:6] - centers[2]) for p in pts]
    known_f1 = raw.get("f1")
    config = _ransac_config(args)
    result = estimate(triplets, args.case, known_f1=known_f1, config=config)
    m = result.model
    out = {
        "case": m.case,
        "f1": m.f1, "f2": m.f2, "f3": m.f3,
        "R2": m.pose2.R.tolist(), "t2": m.pose2.t.tolist(),
        "R3": m.pose3.R.tolist(), "t3": m.pose3.t.tolist(),
        "score": m.score,
        "num_inliers": result.num_inliers,
        "iterations": result.iterations,
    }
    json.dump(out, sys.stdout, indent=2)
    print()
    return 0


def cmd_synth_stability(args) -> int:
    logs = stability_experiment(n_scenes=args.scenes, case=args.case,
                                rng_seed=args.seed, csv_path=args.output)
    print(f"case={args.case} scenes={args.scenes} "
          f"median_log10_xi={np.median(logs):.3f} "
          f"p99_log10_xi={np.percentile(logs, 99):.3f}")
    return 0


def cmd_synth_sweep(args) -> int:
    cfg = SynthConfig(case=args.case, n_scenes=args.scenes,
                      inlier_ratio=args.inlier_ratio, rng_seed=args.seed)
    rc = _ransac_config(args)
    rows = accuracy_sweep(cfg, rc,
                          planar_fractions=args.planar_fractions,
                          sigmas=args.sigmas,
                          f1_perturbations=args.f1_perturbations,
                          csv_path=args.output)
    for row in rows:
        print(",".join(str(row[k]) for k in row))
    return 0


def cmd_benchmark(args) -> int:
    dataset = load_dataset(args.dataset)
    rows = run_benchmark(dataset, args.case, config=_ransac_config(args),
                         csv_path=args.output)
    print(",".join(RESULT_COLUMNS))
    for row in rows:
        print(",".join(str(row[k]) for k in RESULT_COLUMNS))
    return 0


def cmd_verify_generators(args) -> int:
    from .geometry import normalize_homography

    table = load_table(args.table)
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.instances):
        f1, f2, f3 = rng.uniform(300.0, 3000.0, size=3)
        n = rng.normal(size=3)
        n = n / np.linalg.norm(n)
        K1, K2, K3 = (CameraIntrinsics(f) for f in (f1, f2, f3))

        def homography(rng=rng, n=n):
            A = rng.normal(size=(3, 3))
            Q, _ = np.linalg.qr(A)
            R = Q * np.sign(np.linalg.det(Q))
            return R + np.outer(0.3 * rng.normal(size=3), n)

        G2 = normalize_homography(K2.K @ homography() @ K1.K_inv)
        G3 = normalize_homography(K3.K @ homography() @ K1.K_inv)
        Q2 = compute_Q(G2, K1, K2)
        Q3 = compute_Q(G3, K1, K3)
        worst = max(worst, float(np.abs(
            evaluate_generators(table, Q2, Q3)).max()))
    ok = worst < 1e-9
    print(f"instances={args.instances} max_residual={worst:.3e} "
          f"{'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="planefocal",
        description="Focal lengths and relative poses from three views of a plane")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="estimate from a triplet JSON file")
    p.add_argument("input", help="JSON with 'points' (n x 6 raw pixels)")
    _add_common(p)
    _add_ransac_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("synth-stability", help="noiseless solver stability")
    p.add_argument("--scenes", type=int, default=10000)
    p.add_argument("--output", default=None, help="histogram CSV path")
    _add_common(p)
    p.set_defaults(func=cmd_synth_stability)

    p = sub.add_parser("synth-sweep", help="robust-pipeline accuracy grid")
    p.add_argument("--scenes", type=int, default=100)
    p.add_argument("--inlier-ratio", type=float, default=0.75)
    p.add_argument("--planar-fractions", type=float, nargs="+", default=[1.0])
    p.add_argument("--sigmas", type=float, nargs="+", default=[0.0, 1.0])
    p.add_argument("--f1-perturbations", type=float, nargs="+", default=[0.0])
    p.add_argument("--output", default=None, help="results CSV path")
    _add_common(p)
    _add_ransac_flags(p)
    p.set_defaults(func=cmd_synth_sweep)

    p = sub.add_parser("benchmark", help="evaluate a triplet dataset")
    p.add_argument("dataset", help="dataset JSON path")
    p.add_argument("--output", default=None, help="results CSV path")
    _add_common(p)
    _add_ransac_flags(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("verify-generators",
                       help="check the committed generator table")
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("--table", default=None, help="alternate table path")
    _add_common(p)
    p.set_defaults(func=cmd_verify_generators)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PlaneFocalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
