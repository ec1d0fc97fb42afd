"""Synthetic pulse-echo RF data for a moving point scatterer.

Forward model: single scatter in a lossless homogeneous medium.  Each source
insonifies the target through a far-field baffled circular-piston pattern in
the out-of-plane direction, the echo spreads as 1/r on both legs, and the
point-like receiver is omnidirectional.  The two behaviours downstream code
relies on (amplitude decay with elevation, apparent-depth aberration) both
follow from this geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import j1

from .geometry import ArrayGeometry, Point3, RFFrame

__all__ = [
    "TRACKING_BOUNDS",
    "TrajectorySpec",
    "NoiseSpec",
    "directivity",
    "pulse_waveform",
    "simulate_frame",
    "calibrate_noise",
    "gen_trajectory",
    "simulate_sequence",
]

# Lateral / axial / elevational bounds (mm) of the volume the estimator is
# trained over; simulated targets must stay inside.
TRACKING_BOUNDS = {
    "lateral": (-12.0, 12.0),
    "axial": (0.5, 14.5),
    "elevational": (-10.0, 10.0),
}

TRAJECTORY_KINDS = (
    "exp1_curved",
    "exp2_curved_noisy",
    "exp3_inplane",
    "exp4_stationary",
    "axial_line",
    "custom_waypoints",
)


@dataclass(frozen=True)
class TrajectorySpec:
    """Target path for a simulated sequence.

    ``kind`` selects one of the canned experiment paths or a custom waypoint
    list; ``parameters`` holds kind-specific values in mm (all optional, with
    defaults below).

    exp1_curved / exp2_curved_noisy
        sinusoidal lateral sweep (amplitude ``lateral_amplitude``), linear
        axial drift ``axial_start`` -> ``axial_end``, linear elevation
        0 -> ``elevation_end``.  exp2 is the same path; the extra noise bursts
        come from :class:`NoiseSpec`.
    exp3_inplane
        same lateral/axial path with elevation identically 0.
    exp4_stationary
        fixed (``lateral``, ``axial``), elevation linear 0 -> ``elevation_end``.
    axial_line
        fixed ``lateral`` and ``elevation``, axial sweep ``axial_start`` ->
        ``axial_end``.
    custom_waypoints
        piecewise-linear resampling of ``waypoints`` ([[l, a, e], ...]).
    """

    kind: str
    n_frames: int = 101
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TRAJECTORY_KINDS:
            raise ValueError(f"unknown trajectory kind {self.kind!r}; expected one of {TRAJECTORY_KINDS}")
        if self.n_frames < 1:
            raise ValueError("n_frames must be >= 1")

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "n_frames": self.n_frames, "parameters": dict(self.parameters)}

    @classmethod
    def from_json_dict(cls, d: dict) -> "TrajectorySpec":
        return cls(kind=d["kind"], n_frames=int(d["n_frames"]), parameters=dict(d.get("parameters", {})))


@dataclass(frozen=True)
class NoiseSpec:
    """Measurement-noise protocol for a sequence.

    White Gaussian noise with standard deviation calibrated once so the
    in-plane reference frame has ``target_snr_db`` peak SNR; every
    ``burst_every``-th frame (1-based, 0 disables) gets ``burst_factor`` times
    that level.
    """

    target_snr_db: float = 6.5
    burst_factor: float = 10.0
    burst_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if not math.isfinite(self.target_snr_db):
            raise ValueError("target_snr_db must be finite")
        if self.burst_factor < 1:
            raise ValueError("burst_factor must be >= 1")
        if self.burst_every < 0:
            raise ValueError("burst_every must be >= 0 (0 disables bursts)")

    def to_json_dict(self) -> dict:
        return {
            "target_snr_db": self.target_snr_db,
            "burst_factor": self.burst_factor,
            "burst_every": self.burst_every,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "NoiseSpec":
        return cls(
            target_snr_db=float(d["target_snr_db"]),
            burst_factor=float(d["burst_factor"]),
            burst_every=int(d["burst_every"]),
            seed=int(d["seed"]),
        )


def directivity(theta, geometry: ArrayGeometry):
    """Out-of-plane amplitude factor of one source at elevational angle theta.

    Far-field baffled circular piston: 2 J1(k a sin t) / (k a sin t) with
    k = 2 pi f0 / c and a the element radius.  Equals 1 on axis, is even in
    theta, and first reaches 0 where J1 has its first zero (only within
    |theta| < pi/2 when k a > 3.8317).
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(np.abs(theta) >= np.pi / 2):
        raise ValueError("elevational angle must satisfy |theta| < pi/2")
    k = 2.0 * np.pi * geometry.pulse_center_frequency / geometry.speed_of_sound
    x = k * geometry.element_radius * np.sin(np.abs(theta))
    out = np.ones_like(x)
    nz = x > 1e-12
    out[nz] = 2.0 * j1(x[nz]) / x[nz]
    return out if out.ndim else float(out)


def _jinc(x: np.ndarray) -> np.ndarray:
    out = np.ones_like(x)
    nz = x > 1e-12
    out[nz] = 2.0 * j1(x[nz]) / x[nz]
    return out


def pulse_waveform(t, geometry: ArrayGeometry):
    """Transmit pulse evaluated at times t (us): Gaussian-modulated cosine with
    unit peak at t = 0.

    The Gaussian envelope is set by the fractional bandwidth (FWHM of the
    power-spectrum magnitude relative to the centre frequency)."""
    t = np.asarray(t, dtype=float)
    f0 = geometry.pulse_center_frequency
    sigma_f = geometry.pulse_fractional_bandwidth * f0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    sigma_t = 1.0 / (2.0 * math.pi * sigma_f)
    return np.exp(-0.5 * (t / sigma_t) ** 2) * np.cos(2.0 * math.pi * f0 * t)


def _check_target(target: Point3) -> None:
    (lmin, lmax) = TRACKING_BOUNDS["lateral"]
    (amin, amax) = TRACKING_BOUNDS["axial"]
    (emin, emax) = TRACKING_BOUNDS["elevational"]
    if not (lmin <= target.lateral <= lmax and amin <= target.axial <= amax
            and emin <= target.elevational <= emax):
        raise ValueError(f"target {target} outside tracking bounds {TRACKING_BOUNDS}")


def clean_frame(geometry: ArrayGeometry, target: Point3) -> np.ndarray:
    """Noise-free per-source traces for a point target, shape
    (num_sources, record_length)."""
    _check_target(target)
    src = geometry.source_positions
    det = geometry.detector_position

    dl = target.lateral - src
    r_src = np.sqrt(dl * dl + target.axial**2 + target.elevational**2)
    r_det = math.sqrt(
        (target.lateral - det.lateral) ** 2
        + (target.axial - det.axial) ** 2
        + (target.elevational - det.elevational) ** 2
    )

    c = geometry.speed_of_sound
    tof = (r_src + r_det) / c  # us, per source

    k = 2.0 * np.pi * geometry.pulse_center_frequency / c
    sin_theta_src = np.abs(target.elevational) / r_src
    # Receiver is a point-like sensor: omnidirectional, no angular factor.
    amp = _jinc(k * geometry.element_radius * sin_theta_src) / (r_src * r_det)

    t = geometry.sample_times
    return amp[:, None] * pulse_waveform(t[None, :] - tof[:, None], geometry)


def simulate_frame(
    geometry: ArrayGeometry,
    target: Point3,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
    frame_index: int = 0,
) -> RFFrame:
    """Simulate one pulse-echo acquisition of ``target``.

    Each source s contributes ``A_s * w(t - tof_s)`` where ``tof_s`` is the
    two-leg time of flight via the target to the detector, ``A_s`` combines
    the source's out-of-plane directivity with 1/r spreading on both legs, and
    ``w`` is the transmit pulse.  Echoes arriving after the record window are
    truncated, not an error.  If ``noise_sigma`` > 0, i.i.d. zero-mean Gaussian
    noise is added to every sample (``rng`` required).
    """
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    data = clean_frame(geometry, target)
    if noise_sigma > 0:
        if rng is None:
            raise ValueError("rng is required when noise_sigma > 0")
        data = data + rng.normal(0.0, noise_sigma, size=data.shape)
    return RFFrame(data=data, frame_index=frame_index)


def calibrate_noise(geometry: ArrayGeometry, reference: Point3, snr_db: float) -> float:
    """Noise standard deviation giving ``snr_db`` peak SNR at an in-plane
    reference target: sigma = max|clean samples| / 10^(snr_db/20).

    Because sigma is then held fixed for a whole sequence, SNR automatically
    decreases with elevation as the echo amplitude drops.
    """
    if reference.elevational != 0.0:
        raise ValueError("calibration reference must be in-plane (elevational == 0)")
    peak = float(np.max(np.abs(clean_frame(geometry, reference))))
    if peak == 0.0:
        raise ValueError("clean reference frame is all zero; cannot calibrate noise")
    return peak / 10.0 ** (snr_db / 20.0)


def _curved_path(n: int, params: dict) -> tuple[np.ndarray, np.ndarray]:
    # Gentle sweep: per-frame motion stays well under the pixel-observation
    # scatter so even the reduced random-walk model can follow, and the depth
    # range stays where echoes clear the calibrated noise floor.
    lat_amp = float(params.get("lateral_amplitude", 2.5))
    a0 = float(params.get("axial_start", 5.5))
    a1 = float(params.get("axial_end", 8.0))
    t = np.linspace(0.0, 1.0, n)
    lateral = lat_amp * np.sin(2.0 * np.pi * t)
    axial = a0 + (a1 - a0) * t
    return lateral, axial


def gen_trajectory(spec: TrajectorySpec) -> list[Point3]:
    """Generate the ground-truth target path for ``spec`` (length n_frames)."""
    n = spec.n_frames
    p = spec.parameters
    t = np.linspace(0.0, 1.0, n) if n > 1 else np.zeros(1)

    if spec.kind in ("exp1_curved", "exp2_curved_noisy"):
        lateral, axial = _curved_path(n, p)
        elevational = float(p.get("elevation_end", 5.0)) * t
    elif spec.kind == "exp3_inplane":
        lateral, axial = _curved_path(n, p)
        elevational = np.zeros(n)
    elif spec.kind == "exp4_stationary":
        lateral = np.full(n, float(p.get("lateral", 0.0)))
        axial = np.full(n, float(p.get("axial", 7.5)))
        elevational = float(p.get("elevation_end", 5.0)) * t
    elif spec.kind == "axial_line":
        lateral = np.full(n, float(p.get("lateral", 0.0)))
        axial = float(p.get("axial_start", 2.0)) + (
            float(p.get("axial_end", 14.0)) - float(p.get("axial_start", 2.0))
        ) * t
        elevational = np.full(n, float(p.get("elevation", 0.0)))
    elif spec.kind == "custom_waypoints":
        waypoints = np.asarray(p["waypoints"], dtype=float)
        if waypoints.ndim != 2 or waypoints.shape[1] != 3 or waypoints.shape[0] < 1:
            raise ValueError("waypoints must be a non-empty list of [lateral, axial, elevational]")
        s = np.linspace(0.0, 1.0, waypoints.shape[0]) if waypoints.shape[0] > 1 else np.zeros(1)
        lateral = np.interp(t, s, waypoints[:, 0])
        axial = np.interp(t, s, waypoints[:, 1])
        elevational = np.interp(t, s, waypoints[:, 2])
    else:  # pragma: no cover - guarded by TrajectorySpec
        raise ValueError(f"unknown trajectory kind {spec.kind!r}")

    points = [Point3(float(l), float(a), float(e)) for l, a, e in zip(lateral, axial, elevational)]
    for pt in points:
        _check_target(pt)
    return points


# Reference location for the one-off noise calibration of a sequence.
CALIBRATION_REFERENCE = Point3(0.0, 7.5, 0.0)


def simulate_sequence(
    geometry: ArrayGeometry,
    spec: TrajectorySpec,
    noise: NoiseSpec,
) -> tuple[list[RFFrame], list[Point3]]:
    """Simulate a full acquisition sequence along ``spec``'s trajectory.

    Noise sigma is calibrated once at the in-plane reference (0, 7.5, 0);
    frames whose 1-based index is a multiple of ``noise.burst_every`` get
    ``noise.burst_factor`` times that sigma.  Each frame's noise stream is
    derived from (seed, frame_index), so output is deterministic and frames
    could be generated in parallel.
    """
    truth = gen_trajectory(spec)
    sigma = calibrate_noise(geometry, CALIBRATION_REFERENCE, noise.target_snr_db)

    frames = []
    for idx, target in enumerate(truth, start=1):
        boosted = noise.burst_every > 0 and idx % noise.burst_every == 0
        sigma_k = sigma * (noise.burst_factor if boosted else 1.0)
        rng = np.random.default_rng(np.random.SeedSequence((noise.seed, idx)))
        frames.append(simulate_frame(geometry, target, sigma_k, rng=rng, frame_index=idx - 1))
    return frames, truth
