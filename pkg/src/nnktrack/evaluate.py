"""Experiment evaluation: tracking runs over sequences, per-frame result
rows, summary metrics in mean (std) [max] form, and the depth x offset error
matrix."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .beamform import das_reconstruct
from .geometry import ArrayGeometry, ImageGrid, Point3, RFFrame
from .kalman import ProcessNoise
from .mlp import MLPParams
from .simulate import NoiseSpec, TrajectorySpec, simulate_sequence
from .tracker import TrackerConfig, TrackingSession, mi_estimate

__all__ = [
    "METHODS",
    "ResultRow",
    "MetricsReport",
    "ErrorMatrix",
    "track_sequence",
    "write_results_csv",
    "read_results_csv",
    "summarize",
    "metrics_table",
    "compute_error_matrix",
    "write_error_matrix_csv",
    "error_matrix_svg",
]

METHODS = ("nnk", "nnk-rw", "nnk-i", "mi")

_VARIANT_BY_METHOD = {"nnk": "NNK", "nnk-rw": "NNK_RW", "nnk-i": "NNK_I"}

CSV_COLUMNS = (
    "frame", "truth_l", "truth_a", "truth_e",
    "est_l", "est_a_corrected", "est_a_apparent", "est_e", "est_delta",
    "err2d", "err3d", "coasted",
    "ms_reconstruct", "ms_features", "ms_nn", "ms_kalman",
)


@dataclass(frozen=True)
class ResultRow:
    """One tracked frame; elevation fields are None for the 2D-only
    maximum-intensity baseline."""

    frame: int
    truth_l: float
    truth_a: float
    truth_e: float
    est_l: float
    est_a_corrected: float
    est_a_apparent: float
    est_e: float | None
    est_delta: float | None
    coasted: bool
    ms_reconstruct: float
    ms_features: float
    ms_nn: float
    ms_kalman: float

    @property
    def err2d(self) -> float:
        return math.hypot(self.est_l - self.truth_l, self.est_a_corrected - self.truth_a)

    @property
    def err3d(self) -> float | None:
        if self.est_e is None:
            return None
        # the filter estimates the offset magnitude, so compare against |truth|
        return math.hypot(self.err2d, self.est_e - abs(self.truth_e))


def track_sequence(
    frames: list[RFFrame],
    truth: list[Point3],
    method: str,
    model: MLPParams | None = None,
    geometry: ArrayGeometry | None = None,
    grid: ImageGrid | None = None,
    n_pixels: int = 15,
    process_noise: ProcessNoise | None = None,
) -> list[ResultRow]:
    """Run one tracking method over a sequence and pair estimates with truth."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if len(frames) != len(truth):
        raise ValueError("frames and ground truth must have equal length")
    geometry = geometry or ArrayGeometry()
    grid = grid or ImageGrid()

    rows = []
    if method == "mi":
        import time

        for k, (frame, p) in enumerate(zip(frames, truth)):
            t0 = time.perf_counter()
            image = das_reconstruct(frame, geometry, grid)
            t1 = time.perf_counter()
            lat, ax = mi_estimate(image)
            t2 = time.perf_counter()
            rows.append(ResultRow(
                frame=k, truth_l=p.lateral, truth_a=p.axial, truth_e=p.elevational,
                est_l=lat, est_a_corrected=ax, est_a_apparent=ax,
                est_e=None, est_delta=None, coasted=False,
                ms_reconstruct=(t1 - t0) * 1e3, ms_features=(t2 - t1) * 1e3,
                ms_nn=0.0, ms_kalman=0.0,
            ))
        return rows

    if model is None:
        raise ValueError(f"method {method!r} needs a trained model")
    config = TrackerConfig(
        model=model,
        geometry=geometry,
        grid=grid,
        n_pixels=n_pixels,
        process_noise=process_noise or ProcessNoise(),
        variant=_VARIANT_BY_METHOD[method],
    )
    session = TrackingSession(config)
    for frame, p in zip(frames, truth):
        est = session.step(frame)
        rows.append(ResultRow(
            frame=est.frame_index, truth_l=p.lateral, truth_a=p.axial, truth_e=p.elevational,
            est_l=est.lateral, est_a_corrected=est.axial_corrected,
            est_a_apparent=est.axial_apparent, est_e=est.elevation_magnitude,
            est_delta=est.aberration, coasted=est.coasted,
            ms_reconstruct=est.timings_ms["reconstruct"],
            ms_features=est.timings_ms["features"],
            ms_nn=est.timings_ms["nn"],
            ms_kalman=est.timings_ms["kalman"],
        ))
    return rows


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.10g}"


def write_results_csv(path: str, rows: list[ResultRow], timings: bool = True) -> None:
    """Write per-frame results; with ``timings=False`` the ms columns are
    zeroed so repeated runs are byte-identical."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for r in rows:
            ms = (r.ms_reconstruct, r.ms_features, r.ms_nn, r.ms_kalman) if timings else (0.0,) * 4
            fields = [
                str(r.frame), _fmt(r.truth_l), _fmt(r.truth_a), _fmt(r.truth_e),
                _fmt(r.est_l), _fmt(r.est_a_corrected), _fmt(r.est_a_apparent),
                _fmt(r.est_e), _fmt(r.est_delta),
                _fmt(r.err2d), _fmt(r.err3d), str(int(r.coasted)),
            ] + [f"{v:.3f}" for v in ms]
            fh.write(",".join(fields) + "\n")


def read_results_csv(path: str) -> list[dict]:
    """Read a results CSV back as a list of dicts (floats where parseable,
    None for empty cells)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {header}")
        out = []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(CSV_COLUMNS):
                raise ValueError(f"{path}: malformed row {line!r}")
            row = {}
            for key, val in zip(CSV_COLUMNS, parts):
                if val == "":
                    row[key] = None
                elif key in ("frame", "coasted"):
                    row[key] = int(val)
                else:
                    row[key] = float(val)
            out.append(row)
    return out


@dataclass(frozen=True)
class MetricsReport:
    """Per-method error summary plus runtime means (ms per stage)."""

    label: str
    n_frames: int
    mean2d: float
    std2d: float
    max2d: float
    mean3d: float | None
    std3d: float | None
    max3d: float | None
    err2d_series: np.ndarray
    err3d_series: np.ndarray | None
    runtime_ms: dict = field(default_factory=dict)

    def table_cell_2d(self) -> str:
        return f"{self.mean2d:.3g} ({self.std2d:.3g}) [{self.max2d:.3g}]"

    def table_cell_3d(self) -> str:
        if self.mean3d is None:
            return "-"
        return f"{self.mean3d:.3g} ({self.std3d:.3g}) [{self.max3d:.3g}]"

    def to_json_dict(self) -> dict:
        return {
            "label": self.label,
            "n_frames": self.n_frames,
            "err2d": {"mean": self.mean2d, "std": self.std2d, "max": self.max2d},
            "err3d": None if self.mean3d is None else
                     {"mean": self.mean3d, "std": self.std3d, "max": self.max3d},
            "err2d_series": self.err2d_series.tolist(),
            "err3d_series": None if self.err3d_series is None else self.err3d_series.tolist(),
            "runtime_ms": self.runtime_ms,
        }


def summarize(rows: list[dict], label: str) -> MetricsReport:
    """Summaries over a results table (as returned by
    :func:`read_results_csv`); std is the population standard deviation."""
    err2d = np.array([r["err2d"] for r in rows], dtype=float)
    has3d = all(r["err3d"] is not None for r in rows) and len(rows) > 0
    err3d = np.array([r["err3d"] for r in rows], dtype=float) if has3d else None
    runtime = {
        stage: float(np.mean([r[f"ms_{stage}"] for r in rows]))
        for stage in ("reconstruct", "features", "nn", "kalman")
    }
    return MetricsReport(
        label=label,
        n_frames=len(rows),
        mean2d=float(err2d.mean()),
        std2d=float(err2d.std()),
        max2d=float(err2d.max()),
        mean3d=float(err3d.mean()) if err3d is not None else None,
        std3d=float(err3d.std()) if err3d is not None else None,
        max3d=float(err3d.max()) if err3d is not None else None,
        err2d_series=err2d,
        err3d_series=err3d,
        runtime_ms=runtime,
    )


def metrics_table(reports: list[MetricsReport]) -> str:
    """Plain-text table: one method per row, mean (std) [max] columns."""
    width = max([len(r.label) for r in reports] + [6])
    lines = [f"{'method':<{width}}  {'2D error mm':<24}  3D error mm"]
    for r in reports:
        lines.append(f"{r.label:<{width}}  {r.table_cell_2d():<24}  {r.table_cell_3d()}")
    return "\n".join(lines)


@dataclass(frozen=True)
class ErrorMatrix:
    """Mean 3D tracking error (mm) per (depth, offset) cell."""

    depths: np.ndarray
    offsets: np.ndarray
    cells: np.ndarray  # shape (n_depths, n_offsets)

    def __post_init__(self):
        depths = np.asarray(self.depths, dtype=float)
        offsets = np.asarray(self.offsets, dtype=float)
        cells = np.asarray(self.cells, dtype=float)
        if cells.shape != (depths.size, offsets.size):
            raise ValueError("cells shape must be (n_depths, n_offsets)")
        if not np.all(np.isfinite(cells)) or np.any(cells < 0):
            raise ValueError("cells must be finite and >= 0")
        for arr in (depths, offsets, cells):
            arr.setflags(write=False)
        object.__setattr__(self, "depths", depths)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "cells", cells)

    def worst_cell(self) -> tuple[float, float, float]:
        """(depth, offset, error) of the largest cell."""
        i, j = np.unravel_index(int(np.argmax(self.cells)), self.cells.shape)
        return float(self.depths[i]), float(self.offsets[j]), float(self.cells[i, j])


def compute_error_matrix(
    model: MLPParams,
    geometry: ArrayGeometry | None = None,
    grid: ImageGrid | None = None,
    depths: np.ndarray | None = None,
    offsets: np.ndarray | None = None,
    snr_db: float = 6.5,
    seed: int = 0,
    frames_per_line: int = 105,
    warmup_mm: float = 1.0,
    n_pixels: int = 15,
    process_noise: ProcessNoise | None = None,
) -> ErrorMatrix:
    """Track one axial-line sequence per offset and bin the 3D errors by depth.

    Each line runs at lateral 0 and constant elevation ``offset``, sweeping
    axially from ``min(depths) - warmup_mm`` (the warm-up stretch lets the
    filter converge before the first binned depth) to ``max(depths)``.  Each
    cell averages the per-frame 3D error over the frames whose true depth is
    nearest that cell's depth.
    """
    geometry = geometry or ArrayGeometry()
    grid = grid or ImageGrid()
    depths = np.arange(2.0, 14.0 + 1e-9, 2.0) if depths is None else np.asarray(depths, dtype=float)
    offsets = np.arange(0.0, 6.0 + 1e-9, 0.5) if offsets is None else np.asarray(offsets, dtype=float)

    start = max(0.5, float(depths.min()) - warmup_mm)
    end = float(depths.max())
    half_bin = 0.5 * float(np.min(np.diff(depths))) if depths.size > 1 else np.inf

    cells = np.zeros((depths.size, offsets.size))
    for j, offset in enumerate(offsets):
        spec = TrajectorySpec(
            kind="axial_line",
            n_frames=frames_per_line,
            parameters={"lateral": 0.0, "elevation": float(offset),
                        "axial_start": start, "axial_end": end},
        )
        noise = NoiseSpec(target_snr_db=snr_db, burst_every=0, seed=seed + j)
        frames, truth = simulate_sequence(geometry, spec, noise)
        rows = track_sequence(frames, truth, "nnk", model=model, geometry=geometry,
                              grid=grid, n_pixels=n_pixels, process_noise=process_noise)
        truth_a = np.array([p.axial for p in truth])
        err3d = np.array([r.err3d for r in rows])
        for i, depth in enumerate(depths):
            mask = np.abs(truth_a - depth) <= half_bin
            if not np.any(mask):
                raise ValueError(f"no frames fall in the depth bin at {depth} mm")
            cells[i, j] = float(err3d[mask].mean())
    return ErrorMatrix(depths=depths, offsets=offsets, cells=cells)


def write_error_matrix_csv(path: str, matrix: ErrorMatrix) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("depth_mm,offset_mm,mean_err3d_mm\n")
        for i, d in enumerate(matrix.depths):
            for j, o in enumerate(matrix.offsets):
                fh.write(f"{d:.10g},{o:.10g},{matrix.cells[i, j]:.10g}\n")


def read_error_matrix_csv(path: str) -> ErrorMatrix:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "depth_mm,offset_mm,mean_err3d_mm":
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            d, o, v = line.strip().split(",")
            rows.append((float(d), float(o), float(v)))
    depths = sorted({r[0] for r in rows})
    offsets = sorted({r[1] for r in rows})
    cells = np.full((len(depths), len(offsets)), np.nan)
    for d, o, v in rows:
        cells[depths.index(d), offsets.index(o)] = v
    return ErrorMatrix(depths=np.array(depths), offsets=np.array(offsets), cells=cells)


def error_matrix_svg(matrix: ErrorMatrix, cell_px: int = 42) -> str:
    """Self-contained SVG heatmap of the error matrix (no raster deps)."""
    nd, no = matrix.cells.shape
    margin_l, margin_t, margin_b = 70, 40, 20
    width = margin_l + no * cell_px + 20
    height = margin_t + nd * cell_px + margin_b
    vmax = max(float(matrix.cells.max()), 1e-12)

    def color(v: float) -> str:
        x = min(v / vmax, 1.0)
        r = int(255 * x)
        g = int(255 * (1.0 - 0.75 * x))
        b = int(255 * (1.0 - x))
        return f"rgb({r},{g},{b})"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<text x="{margin_l}" y="16">mean 3D tracking error (mm); max {vmax:.2f}</text>',
    ]
    for i in range(nd):
        y = margin_t + i * cell_px
        parts.append(f'<text x="4" y="{y + cell_px * 0.6:.0f}">depth {matrix.depths[i]:g}</text>')
        for j in range(no):
            x = margin_l + j * cell_px
            v = matrix.cells[i, j]
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell_px}" height="{cell_px}" '
                f'fill="{color(v)}" stroke="white"/>'
            )
            parts.append(
                f'<text x="{x + cell_px / 2:.0f}" y="{y + cell_px * 0.6:.0f}" '
                f'text-anchor="middle" fill="black">{v:.2f}</text>'
            )
    for j in range(no):
        x = margin_l + j * cell_px
        parts.append(
            f'<text x="{x + cell_px / 2:.0f}" y="{margin_t - 6}" '
            f'text-anchor="middle">{matrix.offsets[j]:g}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
