"""Delay-and-sum reconstruction of the 2D in-plane image.

Each pixel sums, over all sources, the RF sample at the two-way time of
flight source -> pixel -> detector.  Nearest-sample lookup, no apodization,
no envelope detection: the image stores the signed RF sum and consumers take
absolute values.  Out-of-plane targets reconstruct too deep (longer flight
time); that apparent-depth excess is the axial aberration the tracker learns
to remove.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import ArrayGeometry, ImageGrid, Point3, RFFrame, USImage

__all__ = ["das_reconstruct", "apparent_axial", "delay_table"]

# Delay tables are pure functions of (geometry, grid); cache by their JSON.
_TABLE_CACHE: dict[tuple[str, str], tuple[np.ndarray, int]] = {}


def delay_table(geometry: ArrayGeometry, grid: ImageGrid) -> tuple[np.ndarray, int]:
    """Flattened gather indices for delay-and-sum.

    Returns (indices, pad_index) where ``indices`` has shape
    (num_sources, n_pixels): index into the padded flattened frame for each
    (source, pixel).  Sample indices past the record window point at
    ``pad_index`` (a zero slot), so out-of-window delays contribute nothing.
    """
    key = (geometry.to_json(), grid.to_json())
    cached = _TABLE_CACHE.get(key)
    if cached is not None:
        return cached

    lat = grid.lateral_coords
    ax = grid.axial_coords
    # (n_lateral, n_axial) pixel coordinates, flattened lateral-major.
    px_l = np.repeat(lat, ax.size)
    px_a = np.tile(ax, lat.size)

    det = geometry.detector_position
    d_det = np.sqrt((px_l - det.lateral) ** 2 + (px_a - det.axial) ** 2 + det.elevational**2)

    fs = geometry.sampling_rate
    c = geometry.speed_of_sound
    n_t = geometry.record_length
    pad_index = geometry.num_sources * n_t

    indices = np.empty((geometry.num_sources, px_l.size), dtype=np.int64)
    for s, x_s in enumerate(geometry.source_positions):
        d_src = np.sqrt((px_l - x_s) ** 2 + px_a**2)
        sample = np.rint(fs * (d_src + d_det) / c).astype(np.int64)
        valid = sample < n_t
        indices[s] = np.where(valid, s * n_t + sample, pad_index)

    _TABLE_CACHE[key] = (indices, pad_index)
    return indices, pad_index


def das_reconstruct(frame: RFFrame, geometry: ArrayGeometry, grid: ImageGrid) -> USImage:
    """Delay-and-sum the frame onto ``grid``.

    Linear in the frame data; pixels are independent.  Raises if the frame
    dimensions do not match the geometry.
    """
    if not frame.matches(geometry):
        raise ValueError(
            f"frame shape {frame.data.shape} does not match geometry "
            f"({geometry.num_sources}, {geometry.record_length})"
        )
    indices, pad_index = delay_table(geometry, grid)
    padded = np.empty(pad_index + 1, dtype=float)
    padded[:pad_index] = frame.data.ravel()
    padded[pad_index] = 0.0
    intensity = np.zeros(indices.shape[1])
    for s in range(indices.shape[0]):  # per-source gather beats one big take
        intensity += padded[indices[s]]
    return USImage(grid=grid, intensity=intensity.reshape(grid.n_lateral, grid.n_axial))


def apparent_axial(target: Point3) -> float:
    """Apparent (reconstructed) depth of an out-of-plane target under the
    collocated-transducer approximation: sqrt(axial^2 + elevational^2).

    Used by tests and documentation only; the tracker never calls it.  The
    actual detector offset perturbs the reconstructed depth slightly from
    this value.
    """
    if target.axial <= 0:
        raise ValueError("axial must be positive")
    return math.hypot(target.axial, target.elevational)
