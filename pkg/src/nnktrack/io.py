"""File containers: RF sequences (.rfseq), image dumps (.usimg).

Both formats start with a single compact JSON header line (always carrying a
``format_version``) followed by raw little-endian float32 blocks, so data can
be produced or consumed from any language.
"""

from __future__ import annotations

import json

import numpy as np

from .geometry import ArrayGeometry, ImageGrid, Point3, RFFrame, USImage
from .simulate import NoiseSpec

__all__ = ["write_rfseq", "read_rfseq", "write_usimg", "read_usimg"]

RFSEQ_FORMAT_VERSION = 1
USIMG_FORMAT_VERSION = 1


def write_rfseq(
    path: str,
    geometry: ArrayGeometry,
    grid: ImageGrid,
    truth: list[Point3],
    noise: NoiseSpec,
    frames: list[RFFrame],
) -> None:
    """Write a sequence: JSON header line, then one num_sources x
    record_length float32 block per frame, source-major."""
    if len(frames) != len(truth):
        raise ValueError(f"{len(frames)} frames but {len(truth)} ground-truth points")
    for k, frame in enumerate(frames):
        if not frame.matches(geometry):
            raise ValueError(f"frame {k} shape {frame.data.shape} does not match geometry")
    header = {
        "format_version": RFSEQ_FORMAT_VERSION,
        "geometry": geometry.to_json_dict(),
        "grid": grid.to_json_dict(),
        "trajectory": [[p.lateral, p.axial, p.elevational] for p in truth],
        "noise": noise.to_json_dict(),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, separators=(",", ":")).encode("ascii"))
        fh.write(b"\n")
        for frame in frames:
            fh.write(np.ascontiguousarray(frame.data, dtype="<f4").tobytes())


def read_rfseq(path: str) -> tuple[ArrayGeometry, ImageGrid, list[Point3], NoiseSpec, list[RFFrame]]:
    """Read a sequence written by :func:`write_rfseq`."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("ascii"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}: malformed header line ({exc})") from exc
        if header.get("format_version") != RFSEQ_FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format_version {header.get('format_version')!r}")
        geometry = ArrayGeometry.from_json_dict(header["geometry"])
        grid = ImageGrid.from_json_dict(header["grid"])
        truth = [Point3(*xyz) for xyz in header["trajectory"]]
        noise = NoiseSpec.from_json_dict(header["noise"])

        n_frames = len(truth)
        per_frame = geometry.num_sources * geometry.record_length
        raw = fh.read()
    expected = n_frames * per_frame * 4
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4").reshape(n_frames, geometry.num_sources, geometry.record_length)
    frames = [RFFrame(data=data[k].astype(float), frame_index=k) for k in range(n_frames)]
    return geometry, grid, truth, noise, frames


def write_usimg(path: str, image: USImage, geometry: ArrayGeometry) -> None:
    """Write a reconstructed image: JSON header line + float32 pixel block
    (lateral-major)."""
    header = {
        "format_version": USIMG_FORMAT_VERSION,
        "geometry": geometry.to_json_dict(),
        "grid": image.grid.to_json_dict(),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, separators=(",", ":")).encode("ascii"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(image.intensity, dtype="<f4").tobytes())


def read_usimg(path: str) -> tuple[USImage, ArrayGeometry]:
    """Read an image written by :func:`write_usimg`."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("ascii"))
        if header.get("format_version") != USIMG_FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format_version {header.get('format_version')!r}")
        geometry = ArrayGeometry.from_json_dict(header["geometry"])
        grid = ImageGrid.from_json_dict(header["grid"])
        raw = fh.read()
    expected = grid.n_lateral * grid.n_axial * 4
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes, found {len(raw)}")
    intensity = np.frombuffer(raw, dtype="<f4").astype(float).reshape(grid.n_lateral, grid.n_axial)
    return USImage(grid=grid, intensity=intensity), geometry
