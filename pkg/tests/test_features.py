import numpy as np
import pytest
from scipy.stats import norm

from nnktrack.features import (
    GAUSSIAN_TAIL_Z,
    VARIANCE_FLOOR,
    PixelObservations,
    amplitude_marker,
    image_marker,
    measurement_noise,
    top_intensity_pixels,
)
from nnktrack.geometry import ArrayGeometry, ImageGrid, Point3, RFFrame, USImage, pixel_to_mm
from nnktrack.simulate import clean_frame


def test_tail_threshold_constant():
    assert GAUSSIAN_TAIL_Z == pytest.approx(norm.ppf(0.99), abs=1e-12)
    assert GAUSSIAN_TAIL_Z == pytest.approx(2.3263, abs=1e-4)


def test_marker_zero_frame():
    assert amplitude_marker(np.zeros((64, 1400))) == 0.0


def test_marker_gaussian_oracle():
    # Conditional mean |X| given |X| > z for standard normal X:
    # phi(z) / (1 - Phi(z)) = 2.66521...; cross-checked by Monte Carlo.
    z = GAUSSIAN_TAIL_Z
    oracle = norm.pdf(z) / (1.0 - norm.cdf(z))
    assert oracle == pytest.approx(2.66521, abs=2e-4)
    mc = np.mean([
        amplitude_marker(np.random.default_rng(i).normal(size=(64, 1400)))
        for i in range(20)
    ])
    assert mc == pytest.approx(oracle, abs=0.02)
    one = amplitude_marker(np.random.default_rng(99).normal(size=(64, 1400)))
    assert one == pytest.approx(oracle, abs=0.05)


def test_marker_decreases_with_elevation_noiseless():
    geom = ArrayGeometry()
    values = [amplitude_marker(clean_frame(geom, Point3(0.0, 7.5, float(e))))
              for e in range(7)]
    assert all(values[i] > values[i + 1] for i in range(len(values) - 1))


def test_marker_scale_covariance():
    rng = np.random.default_rng(5)
    samples = rng.normal(size=(32, 500)) + 0.3
    base = amplitude_marker(samples)
    for alpha in (2.5, -3.0, 0.1):
        assert amplitude_marker(alpha * samples) == pytest.approx(abs(alpha) * base, rel=1e-12)


def test_marker_accepts_rfframe():
    frame = RFFrame(data=np.random.default_rng(0).normal(size=(4, 100)))
    assert amplitude_marker(frame) == amplitude_marker(frame.data)


def _brute_force_top(image, n):
    """Independent full-sort oracle: (|intensity| desc, axial idx, lateral idx)."""
    entries = []
    n_lat, n_ax = image.intensity.shape
    for i in range(n_lat):
        for j in range(n_ax):
            entries.append((-abs(image.intensity[i, j]), j, i))
    entries.sort()
    return [(i, j) for _, j, i in entries[:n]]


def _grid(n_lat=21, n_ax=16):
    return ImageGrid(lateral_min=-1.0, lateral_max=-1.0 + 0.1 * (n_lat - 1),
                     axial_min=1.0, axial_max=1.0 + 0.1 * (n_ax - 1), pixel_pitch=0.1)


def test_top_pixels_matches_brute_force():
    rng = np.random.default_rng(2)
    grid = _grid()
    for _ in range(20):
        image = USImage(grid=grid, intensity=rng.normal(size=(grid.n_lateral, grid.n_axial)))
        obs = top_intensity_pixels(image, 15)
        expected = _brute_force_top(image, 15)
        got = [(round((l - grid.lateral_min) / grid.pixel_pitch),
                round((a - grid.axial_min) / grid.pixel_pitch))
               for l, a in zip(obs.y_lateral, obs.y_axial)]
        assert got == expected


def test_top_pixels_single_hot():
    grid = _grid()
    intensity = np.zeros((grid.n_lateral, grid.n_axial))
    intensity[7, 9] = -5.0  # negative: selection is by absolute value
    obs = top_intensity_pixels(USImage(grid=grid, intensity=intensity), 2)
    assert (obs.y_lateral[0], obs.y_axial[0]) == pixel_to_mm(grid, 7, 9)
    # tie-break first zero pixel: smallest (axial, lateral) index
    assert (obs.y_lateral[1], obs.y_axial[1]) == pixel_to_mm(grid, 0, 0)


def test_top_pixels_constant_image():
    grid = _grid()
    image = USImage(grid=grid, intensity=np.full((grid.n_lateral, grid.n_axial), 3.3))
    obs = top_intensity_pixels(image, 5)
    # first five pixels in tie-break order: axial index then lateral index
    expected = [(0, 0), (1, 0), (2, 0), (3, 0), (4, 0)]
    got = [(round((l - grid.lateral_min) / grid.pixel_pitch),
            round((a - grid.axial_min) / grid.pixel_pitch))
           for l, a in zip(obs.y_lateral, obs.y_axial)]
    assert got == expected
    assert obs.s2_axial == 0.0
    assert obs.s2_lateral == pytest.approx(np.var([-1.0, -0.9, -0.8, -0.7, -0.6], ddof=1))


def test_top_pixels_scale_invariant():
    rng = np.random.default_rng(8)
    grid = _grid()
    image = USImage(grid=grid, intensity=rng.normal(size=(grid.n_lateral, grid.n_axial)))
    a = top_intensity_pixels(image, 10)
    b = top_intensity_pixels(USImage(grid=grid, intensity=4.2 * image.intensity), 10)
    assert np.array_equal(a.y_lateral, b.y_lateral)
    assert np.array_equal(a.y_axial, b.y_axial)


def test_top_pixels_n_too_small():
    grid = _grid()
    image = USImage(grid=grid, intensity=np.zeros((grid.n_lateral, grid.n_axial)))
    with pytest.raises(ValueError):
        top_intensity_pixels(image, 1)


def test_measurement_noise_structure():
    obs = PixelObservations(y_lateral=np.array([0.0, 1.0]), y_axial=np.array([5.0, 6.0]),
                            s2_lateral=1.0, s2_axial=4.0)
    r = measurement_noise(obs)
    assert np.array_equal(r, np.diag([1.0, 1.0, 4.0, 4.0]))


def test_measurement_noise_floor():
    obs = PixelObservations(y_lateral=np.zeros(3), y_axial=np.zeros(3),
                            s2_lateral=0.0, s2_axial=0.0)
    r = measurement_noise(obs)
    assert np.array_equal(np.diag(r), np.full(6, VARIANCE_FLOOR))


def test_measurement_noise_matches_variance_oracle():
    # one-pass (shifted-moment) variance recomputation, independent of np.var
    rng = np.random.default_rng(11)
    y_l = rng.normal(size=15)
    y_a = rng.normal(size=15) + 7.0

    def one_pass_unbiased(x):
        n = len(x)
        s1 = sum(x)
        s2 = sum(v * v for v in x)
        return (s2 - s1 * s1 / n) / (n - 1)

    obs = PixelObservations(y_lateral=y_l, y_axial=y_a,
                            s2_lateral=float(np.var(y_l, ddof=1)),
                            s2_axial=float(np.var(y_a, ddof=1)))
    r = np.diag(measurement_noise(obs))
    assert r[0] == pytest.approx(one_pass_unbiased(y_l), rel=1e-10)
    assert r[-1] == pytest.approx(one_pass_unbiased(y_a), rel=1e-10)


def test_image_marker_window_is_local():
    grid = ImageGrid(lateral_min=-5, lateral_max=5, axial_min=1, axial_max=11, pixel_pitch=0.05)
    rng = np.random.default_rng(4)
    intensity = rng.normal(size=(grid.n_lateral, grid.n_axial))
    # a bright cluster far from the origin dominates the argmax
    intensity[150:154, 120:124] = 40.0
    image = USImage(grid=grid, intensity=intensity)
    full = amplitude_marker(intensity)
    local = image_marker(image)
    assert local > full  # the window concentrates on the bright cluster
