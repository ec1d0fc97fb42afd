import math

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import j1

from nnktrack.geometry import ArrayGeometry, Point3
from nnktrack.io import write_rfseq
from nnktrack.simulate import (
    NoiseSpec,
    TrajectorySpec,
    calibrate_noise,
    clean_frame,
    directivity,
    gen_trajectory,
    simulate_frame,
    simulate_sequence,
)

GEOM = ArrayGeometry()


def test_directivity_on_axis():
    assert directivity(0.0, GEOM) == 1.0


def test_directivity_even():
    for theta in (0.1, 0.4, 1.0, 1.4):
        assert directivity(theta, GEOM) == pytest.approx(directivity(-theta, GEOM), abs=1e-15)


def test_directivity_first_zero():
    # Use a wide element so the first Bessel zero lies inside |theta| < pi/2;
    # locate it numerically (root of J1) rather than assuming a constant.
    wide = ArrayGeometry(element_radius=0.6)
    ka = 2 * math.pi * wide.pulse_center_frequency / wide.speed_of_sound * wide.element_radius
    x_zero = brentq(j1, 2.0, 5.0)  # first positive zero of J1 (~3.8317)
    theta_zero = math.asin(x_zero / ka)
    assert abs(directivity(theta_zero, wide)) < 1e-12


def test_directivity_domain():
    with pytest.raises(ValueError):
        directivity(math.pi / 2, GEOM)


def test_time_of_flight_per_source():
    # per-source envelope peak lands within one sample of the geometric time
    # of flight
    target = Point3(0.0, 7.5, 0.0)
    frame = simulate_frame(GEOM, target)
    det = GEOM.detector_position
    src = GEOM.source_positions
    tof = (np.sqrt((src - target.lateral) ** 2 + target.axial**2)
           + math.hypot(det.lateral - target.lateral, det.axial - target.axial)) / GEOM.speed_of_sound
    expected = np.rint(tof * GEOM.sampling_rate).astype(int)
    peaks = np.abs(frame.data).argmax(axis=1)
    assert np.all(np.abs(peaks - expected) <= 1)


def test_time_of_flight_random_targets():
    rng = np.random.default_rng(3)
    det = GEOM.detector_position
    for _ in range(5):
        target = Point3(rng.uniform(-10, 10), rng.uniform(2, 12), rng.uniform(-6, 6))
        frame = simulate_frame(GEOM, target)
        src = GEOM.source_positions
        d_src = np.sqrt((src - target.lateral) ** 2 + target.axial**2 + target.elevational**2)
        d_det = math.sqrt((det.lateral - target.lateral) ** 2 + target.axial**2
                          + target.elevational**2)
        expected = np.rint((d_src + d_det) / GEOM.speed_of_sound * GEOM.sampling_rate).astype(int)
        peaks = np.abs(frame.data).argmax(axis=1)
        in_window = expected < GEOM.record_length - 5
        assert np.all(np.abs(peaks[in_window] - expected[in_window]) <= 1)


def test_amplitude_decays_with_elevation():
    maxes = [np.abs(clean_frame(GEOM, Point3(0.0, 7.5, float(e)))).max() for e in range(7)]
    assert all(maxes[i] > maxes[i + 1] for i in range(len(maxes) - 1))


def test_monotone_decay_half_mm_steps():
    for lateral, axial in [(0.0, 7.5), (0.0, 4.0), (-6.0, 2.0)]:
        es = np.arange(0.0, 10.001, 0.5)
        m = [np.abs(clean_frame(GEOM, Point3(lateral, axial, float(e)))).max() for e in es]
        assert all(m[i] > m[i + 1] for i in range(len(m) - 1)), (lateral, axial)


def test_decay_steeper_shallow_than_deep():
    def rel_decay(axial):
        m0 = np.abs(clean_frame(GEOM, Point3(0.0, axial, 0.0))).max()
        m4 = np.abs(clean_frame(GEOM, Point3(0.0, axial, 4.0))).max()
        return m4 / m0

    assert rel_decay(4.0) < rel_decay(13.0)


def test_elevation_sign_symmetry():
    a = clean_frame(GEOM, Point3(2.0, 6.0, 3.0))
    b = clean_frame(GEOM, Point3(2.0, 6.0, -3.0))
    assert np.array_equal(a, b)


def test_simulate_frame_rejects_bad_input():
    with pytest.raises(ValueError):
        simulate_frame(GEOM, Point3(0.0, 7.5, 0.0), noise_sigma=-1.0)
    with pytest.raises(ValueError):
        simulate_frame(GEOM, Point3(0.0, 20.0, 0.0))  # outside tracking bounds
    with pytest.raises(ValueError):
        simulate_frame(GEOM, Point3(0.0, 7.5, 0.0), noise_sigma=0.1)  # rng required


def test_calibrate_noise_decades():
    ref = Point3(0.0, 7.5, 0.0)
    peak = np.abs(clean_frame(GEOM, ref)).max()
    assert calibrate_noise(GEOM, ref, 0.0) == pytest.approx(peak, rel=1e-12)
    assert calibrate_noise(GEOM, ref, 20.0) == pytest.approx(peak / 10.0, rel=1e-12)
    assert calibrate_noise(GEOM, ref, 6.5) == pytest.approx(peak / 10 ** 0.325, rel=1e-12)


def test_calibrate_noise_requires_inplane():
    with pytest.raises(ValueError):
        calibrate_noise(GEOM, Point3(0.0, 7.5, 1.0), 6.5)


def test_trajectory_exp4_linear():
    spec = TrajectorySpec(kind="exp4_stationary", n_frames=101)
    points = gen_trajectory(spec)
    assert points[0] == Point3(0.0, 7.5, 0.0)
    assert points[-1].lateral == 0.0 and points[-1].axial == 7.5
    assert points[-1].elevational == pytest.approx(5.0, abs=1e-12)
    elevs = np.array([p.elevational for p in points])
    assert np.allclose(np.diff(elevs), 0.05, atol=1e-12)


def test_trajectory_exp3_inplane():
    points = gen_trajectory(TrajectorySpec(kind="exp3_inplane", n_frames=51))
    assert all(p.elevational == 0.0 for p in points)


def test_trajectory_exp1_smooth():
    points = gen_trajectory(TrajectorySpec(kind="exp1_curved", n_frames=101))
    assert len(points) == 101
    xyz = np.array([[p.lateral, p.axial, p.elevational] for p in points])
    steps = np.linalg.norm(np.diff(xyz, axis=0), axis=1)
    assert steps.max() < 0.5


def test_trajectory_exp1_exp2_same_path():
    a = gen_trajectory(TrajectorySpec(kind="exp1_curved", n_frames=41))
    b = gen_trajectory(TrajectorySpec(kind="exp2_curved_noisy", n_frames=41))
    assert a == b


def test_trajectory_axial_line():
    spec = TrajectorySpec(kind="axial_line", n_frames=25,
                          parameters={"elevation": 2.0, "axial_start": 3.0, "axial_end": 9.0})
    points = gen_trajectory(spec)
    assert all(p.lateral == 0.0 and p.elevational == 2.0 for p in points)
    assert points[0].axial == 3.0 and points[-1].axial == 9.0


def test_trajectory_custom_waypoints():
    spec = TrajectorySpec(kind="custom_waypoints", n_frames=5,
                          parameters={"waypoints": [[0, 4, 0], [2, 6, 1]]})
    points = gen_trajectory(spec)
    assert points[0] == Point3(0.0, 4.0, 0.0)
    assert points[-1] == Point3(2.0, 6.0, 1.0)
    assert points[2].axial == pytest.approx(5.0)


def test_trajectory_unknown_kind():
    with pytest.raises(ValueError):
        TrajectorySpec(kind="zigzag", n_frames=5)


def test_sequence_burst_frames():
    spec = TrajectorySpec(kind="exp4_stationary", n_frames=30)
    noise = NoiseSpec(target_snr_db=6.5, burst_factor=10.0, burst_every=10, seed=4)
    frames, truth = simulate_sequence(GEOM, spec, noise)
    clean = [clean_frame(GEOM, p) for p in truth]
    resid_std = np.array([np.std(f.data - c) for f, c in zip(frames, clean)])
    boosted = resid_std[[9, 19, 29]]  # frames 10, 20, 30 (1-based)
    normal = np.delete(resid_std, [9, 19, 29])
    assert boosted.min() / normal.mean() > 8.0
    assert normal.max() / normal.mean() < 1.2


def test_sequence_burst_disabled():
    spec = TrajectorySpec(kind="exp4_stationary", n_frames=20)
    noise = NoiseSpec(target_snr_db=6.5, burst_every=0, seed=4)
    frames, truth = simulate_sequence(GEOM, spec, noise)
    clean = [clean_frame(GEOM, p) for p in truth]
    resid_std = np.array([np.std(f.data - c) for f, c in zip(frames, clean)])
    assert resid_std.max() / resid_std.min() < 1.1


def test_sequence_deterministic(tmp_path):
    spec = TrajectorySpec(kind="exp1_curved", n_frames=8)
    noise = NoiseSpec(seed=123)
    frames1, truth1 = simulate_sequence(GEOM, spec, noise)
    frames2, truth2 = simulate_sequence(GEOM, spec, noise)
    assert truth1 == truth2
    for a, b in zip(frames1, frames2):
        assert np.array_equal(a.data, b.data)
    # byte-identical container files
    p1, p2 = tmp_path / "a.rfseq", tmp_path / "b.rfseq"
    write_rfseq(str(p1), GEOM, __import__("nnktrack").ImageGrid(), truth1, noise, frames1)
    write_rfseq(str(p2), GEOM, __import__("nnktrack").ImageGrid(), truth2, noise, frames2)
    assert p1.read_bytes() == p2.read_bytes()
