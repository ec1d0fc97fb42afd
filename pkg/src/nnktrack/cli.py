"""Command-line front end.

Subcommands: simulate | train | track | eval | error-matrix.
Exit codes: 0 success, 1 usage/domain error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import evaluate, io, mlp
from .geometry import ArrayGeometry, ImageGrid
from .kalman import FilterDivergence, ProcessNoise
from .simulate import NoiseSpec, TrajectorySpec, simulate_sequence

_EXPERIMENT_KINDS = {1: "exp1_curved", 2: "exp2_curved_noisy", 3: "exp3_inplane", 4: "exp4_stationary"}


def _load_geometry(path: str | None) -> ArrayGeometry:
    if path is None:
        return ArrayGeometry()
    with open(path) as fh:
        return ArrayGeometry.from_json_dict(json.load(fh))


def _load_grid(path: str | None) -> ImageGrid:
    if path is None:
        return ImageGrid()
    with open(path) as fh:
        return ImageGrid.from_json_dict(json.load(fh))


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--geometry", metavar="JSON", help="array geometry JSON file (default: built-in)")
    parser.add_argument("--grid", metavar="JSON", help="image grid JSON file (default: built-in)")


def cmd_simulate(args) -> int:
    if args.seed is None:
        raise ValueError("--seed is required: simulated sequences must be reproducible")
    geometry = _load_geometry(args.geometry)
    grid = _load_grid(args.grid)

    params = {}
    if args.exp is not None:
        kind = _EXPERIMENT_KINDS[args.exp]
        for name in ("lateral_amplitude", "axial_start", "axial_end", "elevation_end",
                     "lateral", "axial"):
            value = getattr(args, name)
            if value is not None:
                params[name] = value
        default_burst = 10 if args.exp == 2 else 0
    else:
        kind = "axial_line"
        params = {"lateral": args.lateral or 0.0, "elevation": args.elevation or 0.0,
                  "axial_start": args.axial_start or 2.0, "axial_end": args.axial_end or 14.0}
        default_burst = 0

    burst_every = args.burst_every if args.burst_every is not None else default_burst
    spec = TrajectorySpec(kind=kind, n_frames=args.frames, parameters=params)
    noise = NoiseSpec(target_snr_db=args.snr_db, burst_factor=args.burst_factor,
                      burst_every=burst_every, seed=args.seed)
    frames, truth = simulate_sequence(geometry, spec, noise)
    io.write_rfseq(args.out, geometry, grid, truth, noise, frames)
    print(f"wrote {args.out}: {len(frames)} frames, trajectory {kind}, "
          f"SNR {args.snr_db} dB (burst x{args.burst_factor} every {burst_every or 'never'}), "
          f"seed {args.seed}")
    return 0


def cmd_train(args) -> int:
    geometry = _load_geometry(args.geometry)
    grid = _load_grid(args.grid)
    grid_spec = mlp.TrainingGridSpec()

    if args.data is not None:
        try:
            cached = np.load(args.data)
            data = mlp.TrainingSet(inputs=cached["inputs"], targets=cached["targets"])
            print(f"loaded {data.M} training rows from {args.data}")
        except FileNotFoundError:
            data = mlp.generate_training_data(
                geometry, grid_spec, grid, n_pixels=args.n_pixels,
                noise_snr_db=args.snr_db, seed=args.seed, progress=True,
            )
            np.savez_compressed(args.data, inputs=data.inputs, targets=data.targets)
            print(f"generated {data.M} training rows (cached to {args.data})")
    else:
        data = mlp.generate_training_data(
            geometry, grid_spec, grid, n_pixels=args.n_pixels,
            noise_snr_db=args.snr_db, seed=args.seed, progress=True,
        )
        print(f"generated {data.M} training rows")

    config = mlp.LMConfig(seed=args.seed, max_epochs=args.max_epochs)
    params, report = mlp.train_lm_restarts(data, config, restarts=args.restarts)
    mlp.save_model(params, args.out, training_report=report, extra={
        "geometry": geometry.to_json_dict(),
        "image_grid": grid.to_json_dict(),
        "n_pixels": args.n_pixels,
        "noise_snr_db": args.snr_db,
    })
    print(f"wrote {args.out}: rows={report.rows} epochs={report.epochs} "
          f"stop={report.stop_reason} train_mse={report.train_mse:.3e} val_mse={report.val_mse:.3e}")
    return 0


def cmd_track(args) -> int:
    geometry, grid, truth, _noise, frames = io.read_rfseq(args.rfseq)
    if args.geometry is not None:
        geometry = _load_geometry(args.geometry)
    if args.grid is not None:
        grid = _load_grid(args.grid)

    model = None
    n_pixels = args.n_pixels
    if args.method != "mi":
        model = mlp.load_model(args.model)
        doc = mlp.load_model_document(args.model)
        if "geometry" in doc and doc["geometry"] != geometry.to_json_dict():
            raise ValueError(
                f"geometry mismatch: {args.rfseq} was simulated with a different "
                f"array than {args.model} was trained on"
            )
        if n_pixels is None:
            n_pixels = int(doc.get("n_pixels", 15))
    elif args.model is not None:
        print("note: --model is ignored for method 'mi'", file=sys.stderr)
    if n_pixels is None:
        n_pixels = 15

    noise_std = args.process_noise_std
    process_noise = ProcessNoise(*([noise_std**2] * 4)) if noise_std else ProcessNoise()
    rows = evaluate.track_sequence(
        frames, truth, args.method, model=model, geometry=geometry, grid=grid,
        n_pixels=n_pixels, process_noise=process_noise,
    )
    evaluate.write_results_csv(args.out, rows, timings=not args.no_timings)
    if args.jsonl:
        with open(args.jsonl, "w") as fh:
            for r in rows:
                fh.write(json.dumps({
                    "frame": r.frame, "lateral": r.est_l, "axial": r.est_a_corrected,
                    "axial_apparent": r.est_a_apparent, "elevation": r.est_e,
                    "aberration": r.est_delta, "coasted": r.coasted,
                }) + "\n")
    report = evaluate.summarize([r.__dict__ | {"err2d": r.err2d, "err3d": r.err3d,
                                               "ms_reconstruct": r.ms_reconstruct,
                                               "ms_features": r.ms_features,
                                               "ms_nn": r.ms_nn, "ms_kalman": r.ms_kalman}
                                 for r in rows], args.method)
    print(f"wrote {args.out}: {report.n_frames} frames, "
          f"2D error {report.table_cell_2d()}, 3D error {report.table_cell_3d()}")
    return 0


def cmd_eval(args) -> int:
    reports = []
    n_frames = set()
    for item in args.results:
        label, _, path = item.rpartition("=")
        if not label:
            label, path = path, path
        rows = evaluate.read_results_csv(path)
        reports.append(evaluate.summarize(rows, label))
        n_frames.add(len(rows))
    if len(n_frames) > 1:
        raise ValueError(f"result files have mismatched frame counts: {sorted(n_frames)}")
    print(evaluate.metrics_table(reports))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump([r.to_json_dict() for r in reports], fh, indent=2)
            fh.write("\n")
        print(f"wrote {args.out}")
    return 0


def cmd_error_matrix(args) -> int:
    model = mlp.load_model(args.model)
    geometry = _load_geometry(args.geometry)
    grid = _load_grid(args.grid)
    depths = np.arange(args.depth_min, args.depth_max + 1e-9, args.depth_step)
    offsets = np.arange(args.offset_min, args.offset_max + 1e-9, args.offset_step)
    matrix = evaluate.compute_error_matrix(
        model, geometry=geometry, grid=grid, depths=depths, offsets=offsets,
        snr_db=args.snr_db, seed=args.seed, frames_per_line=args.frames_per_line,
    )
    evaluate.write_error_matrix_csv(args.out, matrix)
    d, o, v = matrix.worst_cell()
    print(f"wrote {args.out}: {matrix.cells.shape[0]}x{matrix.cells.shape[1]} cells, "
          f"worst {v:.2f} mm at depth {d:g} / offset {o:g}")
    if args.svg:
        with open(args.svg, "w") as fh:
            fh.write(evaluate.error_matrix_svg(matrix))
        print(f"wrote {args.svg}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nnktrack",
        description="Simulate, train and evaluate 3D ultrasound point-target tracking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate an RF sequence (.rfseq)")
    _add_common(p)
    p.add_argument("--exp", type=int, choices=(1, 2, 3, 4), help="canned experiment trajectory")
    p.add_argument("--frames", type=int, default=101)
    p.add_argument("--seed", type=int, help="noise seed (required)")
    p.add_argument("--snr-db", type=float, default=6.5)
    p.add_argument("--burst-every", type=int, help="boost noise every Nth frame (default: 10 for exp 2, else off)")
    p.add_argument("--burst-factor", type=float, default=10.0)
    p.add_argument("--lateral-amplitude", type=float, dest="lateral_amplitude")
    p.add_argument("--axial-start", type=float, dest="axial_start")
    p.add_argument("--axial-end", type=float, dest="axial_end")
    p.add_argument("--elevation-end", type=float, dest="elevation_end")
    p.add_argument("--lateral", type=float)
    p.add_argument("--axial", type=float)
    p.add_argument("--elevation", type=float, help="constant elevation (axial-line trajectories)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="generate training data and fit the estimator")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snr-db", type=float, default=6.5)
    p.add_argument("--n-pixels", type=int, default=15)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--restarts", type=int, default=3,
                   help="seeded initialisations; best validation MSE wins")
    p.add_argument("--data", help="training-set cache (.npz); reused if present")
    p.add_argument("--out", required=True, help="model output path (.nnk.json)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("track", help="track a sequence, write per-frame CSV")
    _add_common(p)
    p.add_argument("--rfseq", required=True)
    p.add_argument("--model", help="trained model (.nnk.json); required unless --method mi")
    p.add_argument("--method", choices=evaluate.METHODS, default="nnk")
    p.add_argument("--n-pixels", type=int)
    p.add_argument("--process-noise-std", type=float, help="per-axis process noise std in mm (default 0.005)")
    p.add_argument("--jsonl", help="also stream estimates as line-delimited JSON")
    p.add_argument("--no-timings", action="store_true", help="zero the ms columns for byte-reproducible output")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="summarise one or more result CSVs")
    p.add_argument("results", nargs="+", metavar="[LABEL=]CSV")
    p.add_argument("--out", help="write the report as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("error-matrix", help="mean 3D error over a depth x offset sweep")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--depth-min", type=float, default=2.0)
    p.add_argument("--depth-max", type=float, default=14.0)
    p.add_argument("--depth-step", type=float, default=2.0)
    p.add_argument("--offset-min", type=float, default=0.0)
    p.add_argument("--offset-max", type=float, default=6.0)
    p.add_argument("--offset-step", type=float, default=0.5)
    p.add_argument("--frames-per-line", type=int, default=105)
    p.add_argument("--snr-db", type=float, default=6.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--svg", help="also write an SVG heatmap")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_error_matrix)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (mlp.TrainingError, FilterDivergence, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
