"""Feature extraction: the amplitude marker and the high-intensity pixel
observations that drive the filter."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .geometry import RFFrame, USImage, pixel_to_mm

__all__ = [
    "GAUSSIAN_TAIL_Z",
    "VARIANCE_FLOOR",
    "PixelObservations",
    "amplitude_marker",
    "top_intensity_pixels",
    "measurement_noise",
    "image_marker",
]

# Two-sided 1% tails of the fitted Gaussian.
GAUSSIAN_TAIL_Z = float(ndtri(0.99))

# Keeps the measurement covariance invertible when the selected pixels are
# degenerate (e.g. all in one row): (0.01 mm)^2.
VARIANCE_FLOOR = 1e-4


@dataclass(frozen=True)
class PixelObservations:
    """Coordinates (mm) of the n highest-|intensity| pixels plus the unbiased
    sample variance of each coordinate axis."""

    y_lateral: np.ndarray
    y_axial: np.ndarray
    s2_lateral: float
    s2_axial: float

    def __post_init__(self):
        y_l = np.asarray(self.y_lateral, dtype=float)
        y_a = np.asarray(self.y_axial, dtype=float)
        if y_l.shape != y_a.shape or y_l.ndim != 1 or y_l.size < 2:
            raise ValueError("need matching coordinate lists of length >= 2")
        if self.s2_lateral < 0 or self.s2_axial < 0:
            raise ValueError("variances must be >= 0")
        y_l.setflags(write=False)
        y_a.setflags(write=False)
        object.__setattr__(self, "y_lateral", y_l)
        object.__setattr__(self, "y_axial", y_a)

    @property
    def n(self) -> int:
        return self.y_lateral.size


def amplitude_marker(frame) -> float:
    """Mean absolute value of the samples in the 1% Gaussian tails of the
    sample distribution.

    Fits mean m and standard deviation s over all samples, keeps samples
    above m + z*s or below m - z*s with z = ndtri(0.99) ~ 2.3263, and returns
    the mean of their absolute values (0 if nothing exceeds the thresholds,
    e.g. an all-zero input).  Accepts an RFFrame or any sample array; scales
    covariantly: marker(a*p) == |a| * marker(p).
    """
    samples = frame.data if isinstance(frame, RFFrame) else np.asarray(frame, dtype=float)
    if samples.size == 0:
        raise ValueError("empty sample array")
    flat = samples.ravel()
    m = flat.mean()
    s = flat.std()
    tail = flat[(flat > m + GAUSSIAN_TAIL_Z * s) | (flat < m - GAUSSIAN_TAIL_Z * s)]
    if tail.size == 0:
        return 0.0
    return float(np.abs(tail).mean())


def _top_pixel_indices(absint: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices (i_lateral, j_axial) of the n largest values, ties broken by
    (axial index, lateral index) ascending."""
    n_lat, n_ax = absint.shape
    flat = absint.ravel()
    if n < flat.size:
        thr = np.partition(flat, flat.size - n)[flat.size - n]
        cand = np.flatnonzero(flat >= thr)  # includes every tie of the cutoff
    else:
        cand = np.arange(flat.size)
    i_lat, j_ax = np.unravel_index(cand, absint.shape)
    # lexsort: last key is primary -> |intensity| desc, then axial, then lateral
    order = np.lexsort((i_lat, j_ax, -flat[cand]))[:n]
    return i_lat[order], j_ax[order]


def top_intensity_pixels(image: USImage, n: int = 15) -> PixelObservations:
    """Locations of the ``n`` pixels with the largest absolute intensity.

    Selection is invariant to positive rescaling of the image and matches a
    full sort by (|intensity| desc, axial index, lateral index).  Returns mm
    coordinates and the unbiased per-axis sample variances.
    """
    if n < 2:
        raise ValueError("n must be >= 2 (sample variance undefined otherwise)")
    if image.intensity.size < n:
        raise ValueError(f"image has {image.intensity.size} pixels, need >= {n}")
    i_lat, j_ax = _top_pixel_indices(np.abs(image.intensity), n)
    grid = image.grid
    coords = [pixel_to_mm(grid, int(i), int(j)) for i, j in zip(i_lat, j_ax)]
    y_l = np.array([c[0] for c in coords])
    y_a = np.array([c[1] for c in coords])
    return PixelObservations(
        y_lateral=y_l,
        y_axial=y_a,
        s2_lateral=float(np.var(y_l, ddof=1)),
        s2_axial=float(np.var(y_a, ddof=1)),
    )


def measurement_noise(obs: PixelObservations) -> np.ndarray:
    """Diagonal 2n x 2n pixel-measurement covariance: the lateral sample
    variance on the first n entries, the axial on the last n.

    Each axis variance is floored at (0.01 mm)^2 so the innovation covariance
    stays invertible for degenerate pixel sets.
    """
    s2_l = max(obs.s2_lateral, VARIANCE_FLOOR)
    s2_a = max(obs.s2_axial, VARIANCE_FLOOR)
    return np.diag(np.concatenate([np.full(obs.n, s2_l), np.full(obs.n, s2_a)]))


# Window half-sizes (mm) for the image-domain marker.
MARKER_WINDOW_LATERAL = 1.0
MARKER_WINDOW_AXIAL = 1.25


def image_marker(
    image: USImage,
    half_lateral: float = MARKER_WINDOW_LATERAL,
    half_axial: float = MARKER_WINDOW_AXIAL,
) -> float:
    """Amplitude marker evaluated on a window of the reconstructed image
    centred on its brightest pixel.

    Beamforming adds the coherent aperture gain to the echo before the tail
    statistic is taken, and the window keeps the statistic local to the
    target, so the marker stays informative at raw-data SNR levels where the
    per-sample time series is noise-dominated.  Window cropping is clipped at
    the image boundary.
    """
    grid = image.grid
    i_c, j_c = _top_pixel_indices(np.abs(image.intensity), 1)
    i_c, j_c = int(i_c[0]), int(j_c[0])
    di = int(round(half_lateral / grid.pixel_pitch))
    dj = int(round(half_axial / grid.pixel_pitch))
    window = image.intensity[
        max(i_c - di, 0): i_c + di + 1,
        max(j_c - dj, 0): j_c + dj + 1,
    ]
    return amplitude_marker(window)
