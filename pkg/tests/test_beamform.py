import math

import numpy as np
import pytest

from nnktrack.beamform import apparent_axial, das_reconstruct
from nnktrack.geometry import ArrayGeometry, ImageGrid, Point3, RFFrame
from nnktrack.simulate import simulate_frame

GEOM = ArrayGeometry()
# Full lateral extent (mirror test) but a reduced axial range keeps the unit
# tests quick; acceptance runs use the full default grid.
GRID = ImageGrid(axial_min=0.5, axial_max=12.0)


def _argmax_mm(image):
    i, j = np.unravel_index(np.abs(image.intensity).argmax(), image.intensity.shape)
    return (image.grid.lateral_min + i * image.grid.pixel_pitch,
            image.grid.axial_min + j * image.grid.pixel_pitch)


def test_apparent_axial_exact_values():
    assert apparent_axial(Point3(0.0, 7.5, 0.0)) == 7.5
    assert apparent_axial(Point3(0.0, 7.5, 4.0)) == 8.5  # 3-4-5 triangle scaled by 2.5/2
    assert apparent_axial(Point3(0.0, 3.0, 4.0)) == 5.0


def test_inplane_focus():
    image = das_reconstruct(simulate_frame(GEOM, Point3(0.0, 7.5, 0.0)), GEOM, GRID)
    lat, ax = _argmax_mm(image)
    assert abs(lat - 0.0) <= GRID.pixel_pitch
    assert abs(ax - 7.5) <= GRID.pixel_pitch


def test_out_of_plane_apparent_depth():
    image = das_reconstruct(simulate_frame(GEOM, Point3(0.0, 7.5, 4.0)), GEOM, GRID)
    _, ax = _argmax_mm(image)
    assert abs(ax - 8.5) <= 0.2


def test_zero_frame_zero_image():
    frame = RFFrame(data=np.zeros((GEOM.num_sources, GEOM.record_length)))
    image = das_reconstruct(frame, GEOM, GRID)
    assert np.all(image.intensity == 0.0)


def test_dimension_mismatch():
    frame = RFFrame(data=np.zeros((8, GEOM.record_length)))
    with pytest.raises(ValueError):
        das_reconstruct(frame, GEOM, GRID)


def test_linearity():
    rng = np.random.default_rng(1)
    p1 = RFFrame(data=rng.normal(size=(GEOM.num_sources, GEOM.record_length)))
    p2 = RFFrame(data=rng.normal(size=(GEOM.num_sources, GEOM.record_length)))
    alpha, beta = 1.7, -0.4
    combo = RFFrame(data=alpha * p1.data + beta * p2.data)
    lhs = das_reconstruct(combo, GEOM, GRID).intensity
    rhs = (alpha * das_reconstruct(p1, GEOM, GRID).intensity
           + beta * das_reconstruct(p2, GEOM, GRID).intensity)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_aberration_one_sided():
    rng = np.random.default_rng(7)
    for _ in range(6):
        target = Point3(rng.uniform(-6, 6), rng.uniform(3, 9), rng.uniform(1.0, 5.0))
        image = das_reconstruct(simulate_frame(GEOM, target), GEOM, GRID)
        _, ax = _argmax_mm(image)
        assert ax > target.axial  # never shallower than the true depth


def test_mirror_symmetry_of_peak():
    for lateral in (3.0, 6.0):
        img_pos = das_reconstruct(simulate_frame(GEOM, Point3(lateral, 6.0, 2.0)), GEOM, GRID)
        img_neg = das_reconstruct(simulate_frame(GEOM, Point3(-lateral, 6.0, 2.0)), GEOM, GRID)
        lat_p, ax_p = _argmax_mm(img_pos)
        lat_n, ax_n = _argmax_mm(img_neg)
        assert abs(lat_p + lat_n) <= GRID.pixel_pitch  # detector-side asymmetry tolerance
        assert abs(ax_p - ax_n) <= GRID.pixel_pitch


def test_apparent_axial_requires_positive_depth():
    with pytest.raises(ValueError):
        apparent_axial(Point3(0.0, 0.0, 1.0))
