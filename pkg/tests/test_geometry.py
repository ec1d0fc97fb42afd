import json
import math

import numpy as np
import pytest

from nnktrack.geometry import (
    ArrayGeometry,
    ImageGrid,
    Point3,
    RFFrame,
    USImage,
    mm_to_pixel,
    pixel_to_mm,
)

# mm-conversion examples use the documented default grid extents at 0.05 mm
# pitch; the axial extent itself is larger than the tracked volume, which the
# examples do not depend on.
GRID = ImageGrid()


def test_pixel_to_mm_origin():
    assert pixel_to_mm(GRID, 0, 0) == (-12.5, 0.5)


def test_pixel_to_mm_one_step():
    l, a = pixel_to_mm(GRID, 1, 0)
    assert math.isclose(l, -12.45, abs_tol=1e-12)
    assert a == 0.5


def test_pixel_to_mm_interior():
    # affine map evaluated by hand: -12.5 + 250*0.05 = 0.0, 0.5 + 140*0.05 = 7.5
    l, a = pixel_to_mm(GRID, 250, 140)
    assert math.isclose(l, 0.0, abs_tol=1e-12)
    assert math.isclose(a, 7.5, abs_tol=1e-12)


def test_pixel_to_mm_out_of_range():
    with pytest.raises(ValueError):
        pixel_to_mm(GRID, -1, 0)
    with pytest.raises(ValueError):
        pixel_to_mm(GRID, 0, GRID.n_axial)


def test_mm_to_pixel_examples():
    assert mm_to_pixel(GRID, -12.5, 0.5) == (0, 0)
    assert mm_to_pixel(GRID, 0.0, 7.5) == (250, 140)
    # 0.013 < pitch/2 rounds to the same pixel
    assert mm_to_pixel(GRID, 0.013, 7.5) == (250, 140)


def test_mm_to_pixel_out_of_bounds():
    with pytest.raises(ValueError):
        mm_to_pixel(GRID, -12.6, 0.5)
    with pytest.raises(ValueError):
        mm_to_pixel(GRID, 0.0, GRID.axial_max + 0.1)


def test_round_trip_all_corners_and_random():
    rng = np.random.default_rng(0)
    pairs = [(0, 0), (GRID.n_lateral - 1, 0), (0, GRID.n_axial - 1),
             (GRID.n_lateral - 1, GRID.n_axial - 1)]
    pairs += [(int(rng.integers(GRID.n_lateral)), int(rng.integers(GRID.n_axial)))
              for _ in range(200)]
    for i, j in pairs:
        assert mm_to_pixel(GRID, *pixel_to_mm(GRID, i, j)) == (i, j)


def test_pixel_to_mm_affine_exact_steps():
    for i, j in [(0, 0), (10, 20), (300, 200)]:
        l0, a0 = pixel_to_mm(GRID, i, j)
        l1, _ = pixel_to_mm(GRID, i + 1, j)
        _, a1 = pixel_to_mm(GRID, i, j + 1)
        assert l1 - l0 == GRID.pixel_pitch
        assert a1 - a0 == GRID.pixel_pitch


def test_grid_pixel_counts():
    assert GRID.n_lateral == round((GRID.lateral_max - GRID.lateral_min) / GRID.pixel_pitch) + 1
    assert GRID.n_axial == round((GRID.axial_max - GRID.axial_min) / GRID.pixel_pitch) + 1
    assert GRID.n_lateral >= 2 and GRID.n_axial >= 2


def test_point3_invariants():
    with pytest.raises(ValueError):
        Point3(0.0, -0.1, 0.0)
    with pytest.raises(ValueError):
        Point3(float("nan"), 1.0, 0.0)


def test_geometry_source_positions():
    g = ArrayGeometry()
    src = g.source_positions
    assert src.size == 64
    assert np.all(np.diff(src) > 0)
    assert math.isclose(src[-1] - src[0], g.aperture_width, abs_tol=1e-12)
    assert np.allclose(src + src[::-1], 0.0, atol=1e-12)


def test_geometry_record_window_covers_depth():
    g = ArrayGeometry()
    assert g.record_length / g.sampling_rate * g.speed_of_sound / 2.0 >= GRID.axial_max


def test_geometry_detector_default():
    g = ArrayGeometry()
    assert g.detector_position == Point3(13.0, 0.0, 0.0)


def test_geometry_json_round_trip():
    g = ArrayGeometry()
    doc = json.loads(g.to_json())
    for key in ("num_sources", "aperture_width", "source_positions", "detector_position",
                "speed_of_sound", "sampling_rate", "record_length",
                "pulse_center_frequency", "pulse_fractional_bandwidth", "element_radius"):
        assert key in doc
    g2 = ArrayGeometry.from_json(g.to_json())
    assert g2 == g


def test_geometry_json_rejects_inconsistent_sources():
    doc = ArrayGeometry().to_json_dict()
    doc["source_positions"][3] += 0.5
    with pytest.raises(ValueError):
        ArrayGeometry.from_json_dict(doc)


def test_grid_json_round_trip():
    grid = ImageGrid(lateral_min=-3, lateral_max=3, axial_min=1, axial_max=5, pixel_pitch=0.1)
    assert ImageGrid.from_json(grid.to_json()) == grid


def test_rfframe_validation():
    g = ArrayGeometry()
    frame = RFFrame(data=np.zeros((g.num_sources, g.record_length)))
    assert frame.matches(g)
    with pytest.raises(ValueError):
        RFFrame(data=np.full((2, 3), np.inf))
    with pytest.raises(ValueError):
        RFFrame(data=np.zeros(5))


def test_usimage_shape_checked():
    grid = ImageGrid(lateral_min=-1, lateral_max=1, axial_min=1, axial_max=2, pixel_pitch=0.5)
    USImage(grid=grid, intensity=np.zeros((grid.n_lateral, grid.n_axial)))
    with pytest.raises(ValueError):
        USImage(grid=grid, intensity=np.zeros((3, 3)))
