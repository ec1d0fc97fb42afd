"""Per-frame tracking loop: reconstruct, extract features, evaluate the
offset/aberration network with the previous state estimate, run the Kalman
recursion, correct the axial coordinate."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .beamform import das_reconstruct
from .features import image_marker, top_intensity_pixels, _top_pixel_indices
from .geometry import ArrayGeometry, ImageGrid, RFFrame, USImage, pixel_to_mm
from .kalman import (
    FilterDivergence,
    FilterState,
    ModelMatrices,
    ProcessNoise,
    assemble_measurement,
    build_matrices,
    correct_axial,
    initial_state,
    predict,
    update,
)
from .mlp import MLPParams, forward

__all__ = ["TrackerConfig", "TrackEstimate", "TrackingSession", "init_session", "mi_estimate"]


@dataclass(frozen=True)
class TrackerConfig:
    """Everything a tracking session needs besides the frames themselves."""

    model: MLPParams
    geometry: ArrayGeometry = field(default_factory=ArrayGeometry)
    grid: ImageGrid = field(default_factory=ImageGrid)
    n_pixels: int = 15
    dt: float = 1.0
    process_noise: ProcessNoise = field(default_factory=ProcessNoise)
    variant: str = "NNK"

    def __post_init__(self):
        if self.n_pixels < 2:
            raise ValueError("n_pixels must be >= 2")


@dataclass(frozen=True)
class TrackEstimate:
    """Per-frame tracker output (all lengths in mm).

    ``axial_corrected`` is exactly ``axial_apparent - aberration``; the
    reported ``elevation_magnitude`` is clamped at zero while the raw signed
    filter value stays in the session state.  ``coasted`` marks frames where
    the measurement update failed and only the prediction was used.
    """

    frame_index: int
    lateral: float
    axial_corrected: float
    axial_apparent: float
    elevation_magnitude: float
    aberration: float
    variance_diag: np.ndarray
    coasted: bool = False
    timings_ms: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.variance_diag, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "variance_diag", v)


class TrackingSession:
    """Stateful single-target tracker; one session per sequence, not shared
    between threads.

    Starts from the uninformative prior (m = 0, P = 15 I).  Each step runs
    predict -> reconstruct -> feature extraction -> network evaluation (with
    the previous step's lateral and corrected-axial estimates as positional
    inputs; the first frame substitutes the mean of the high-intensity pixel
    coordinates) -> measurement update -> axial correction.
    """

    def __init__(self, config: TrackerConfig):
        self.config = config
        self.matrices: ModelMatrices = build_matrices(
            config.n_pixels, config.dt, config.process_noise, config.variant
        )
        self.state: FilterState = initial_state()
        self.frames_processed = 0
        self._prev_lateral: float | None = None
        self._prev_axial_corrected: float | None = None

    @property
    def last_estimate(self) -> TrackEstimate | None:
        """Most recent estimate, or None before the first frame."""
        return getattr(self, "_last_estimate", None)

    def step(self, frame: RFFrame) -> TrackEstimate:
        cfg = self.config
        if not frame.matches(cfg.geometry):
            raise ValueError(
                f"frame shape {frame.data.shape} does not match session geometry "
                f"({cfg.geometry.num_sources}, {cfg.geometry.record_length})"
            )

        t0 = time.perf_counter()
        pred = predict(self.state, self.matrices)
        t_predict = time.perf_counter()

        image = das_reconstruct(frame, cfg.geometry, cfg.grid)
        t_reco = time.perf_counter()

        obs = top_intensity_pixels(image, cfg.n_pixels)
        mu = image_marker(image)
        t_feat = time.perf_counter()

        if self._prev_lateral is None:
            u = (float(np.mean(obs.y_axial)), float(np.mean(obs.y_lateral)), mu)
        else:
            u = (self._prev_axial_corrected, self._prev_lateral, mu)
        y_e, y_delta = forward(cfg.model, np.asarray(u))
        t_nn = time.perf_counter()

        coasted = False
        try:
            meas = assemble_measurement(obs, float(y_e), float(y_delta))
            self.state = update(pred, meas, self.matrices)
        except FilterDivergence:
            self.state = pred
            coasted = True
        t_kalman = time.perf_counter()

        m = self.state.m
        estimate = TrackEstimate(
            frame_index=self.frames_processed,
            lateral=float(m[0]),
            axial_corrected=correct_axial(self.state),
            axial_apparent=float(m[1]),
            elevation_magnitude=float(max(m[4], 0.0)),
            aberration=float(m[5]),
            variance_diag=np.diag(self.state.P).copy(),
            coasted=coasted,
            timings_ms={
                "reconstruct": (t_reco - t_predict) * 1e3,
                "features": (t_feat - t_reco) * 1e3,
                "nn": (t_nn - t_feat) * 1e3,
                "kalman": ((t_predict - t0) + (t_kalman - t_nn)) * 1e3,
            },
        )
        self._prev_lateral = estimate.lateral
        self._prev_axial_corrected = estimate.axial_corrected
        self.frames_processed += 1
        self._last_estimate = estimate
        return estimate


def init_session(config: TrackerConfig) -> TrackingSession:
    """Fresh tracking session with the uninformative initial state."""
    return TrackingSession(config)


def mi_estimate(image: USImage) -> tuple[float, float]:
    """Maximum-intensity baseline: (lateral, axial) mm of the pixel with the
    largest absolute intensity (2D only, no aberration correction); ties
    resolved like the high-intensity pixel selection."""
    i, j = _top_pixel_indices(np.abs(image.intensity), 1)
    return pixel_to_mm(image.grid, int(i[0]), int(j[0]))
