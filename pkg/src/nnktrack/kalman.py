"""Linear-Gaussian state-space machinery for the extended 8-state tracker.

State vector (mm, mm/frame):
    m = (x_l, x_a, v_l, v_a, x_e, delta, v_e, v_delta)
where x_l / x_a are the lateral and *apparent* axial position, x_e the
out-of-plane offset magnitude and delta the axial aberration; the second half
mirrors the constant-velocity structure of the first.  Measurements stack the
n high-intensity pixel locations with the network's offset/aberration
estimates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .features import PixelObservations, VARIANCE_FLOOR, measurement_noise

__all__ = [
    "STATE_DIM",
    "VARIANTS",
    "ProcessNoise",
    "FilterState",
    "ModelMatrices",
    "ExtendedMeasurement",
    "FilterDivergence",
    "initial_state",
    "build_matrices",
    "predict",
    "update",
    "correct_axial",
    "assemble_measurement",
]

STATE_DIM = 8
VARIANTS = ("NNK", "NNK_RW", "NNK_I")

# Uninformative prior scale: P0 = 15 I (mm^2).
INITIAL_COVARIANCE = 15.0


class FilterDivergence(RuntimeError):
    """Numerical failure inside a filter update (innovation covariance not
    positive definite)."""


@dataclass(frozen=True)
class ProcessNoise:
    """Random-acceleration variances (mm^2) driving the motion model.

    Defaults follow the empirical tuning sweet spot (0.005 mm)^2: small enough
    for robustness against noise, large enough to follow velocity changes.
    """

    lateral: float = 0.005**2
    axial: float = 0.005**2
    elevational: float = 0.005**2
    aberration: float = 0.005**2

    def __post_init__(self):
        for name in ("lateral", "axial", "elevational", "aberration"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} process noise variance must be > 0")

    def as_array(self) -> np.ndarray:
        return np.array([self.lateral, self.axial, self.elevational, self.aberration])


@dataclass(frozen=True)
class FilterState:
    """Gaussian state belief: mean m (8,) and covariance P (8, 8).

    P is kept symmetric by construction (resymmetrised after every predict
    and update); for the full NNK variant it stays positive definite, for the
    reduced variants the unused velocity entries may collapse to zero.
    """

    m: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        P = np.asarray(self.P, dtype=float)
        if m.shape != (STATE_DIM,) or P.shape != (STATE_DIM, STATE_DIM):
            raise ValueError(f"state must be ({STATE_DIM},) mean and ({STATE_DIM},{STATE_DIM}) covariance")
        sym_err = np.abs(P - P.T).max()
        if sym_err > 1e-10 * max(np.abs(P).max(), 1.0):
            raise ValueError(f"covariance not symmetric (max asymmetry {sym_err:.2e})")
        m.setflags(write=False)
        P.setflags(write=False)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "P", P)


def initial_state() -> FilterState:
    """Uninformative prior m = 0, P = 15 I."""
    return FilterState(m=np.zeros(STATE_DIM), P=INITIAL_COVARIANCE * np.eye(STATE_DIM))


@dataclass(frozen=True)
class ModelMatrices:
    """Transition A (8x8), noise gain G (8x4), observation H ((2n+2)x8) and
    process covariance Q (8x8) for one model variant at frame interval dt."""

    A: np.ndarray
    G: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    dt: float
    variant: str = "NNK"

    @property
    def n_pixels(self) -> int:
        return (self.H.shape[0] - 2) // 2


def _cv_blocks(dt: float) -> tuple[np.ndarray, np.ndarray]:
    a = np.array([
        [1.0, 0.0, dt, 0.0],
        [0.0, 1.0, 0.0, dt],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
    g = np.array([
        [0.5 * dt**2, 0.0],
        [0.0, 0.5 * dt**2],
        [dt, 0.0],
        [0.0, dt],
    ])
    return a, g


def _observation(n: int) -> np.ndarray:
    h = np.zeros((2 * n + 2, STATE_DIM))
    h[:n, 0] = 1.0            # lateral pixel observations
    h[n:2 * n, 1] = 1.0       # axial pixel observations
    h[2 * n, 4] = 1.0         # network offset estimate
    h[2 * n + 1, 5] = 1.0     # network aberration estimate
    return h


def build_matrices(n: int, dt: float, noise: ProcessNoise, variant: str = "NNK") -> ModelMatrices:
    """Model matrices for ``n`` pixel observations at frame interval ``dt``.

    NNK is the constant-velocity model (two identical 4-state blocks).
    NNK_RW drops the velocities: positions random-walk with the process noise
    entering them directly.  NNK_I makes subsequent states independent: the
    prior at every step is a fresh zero-mean Gaussian; its scale is set to
    the uninformative initial covariance so each frame is estimated from its
    own measurement (a literal reading with the tuned acceleration variances
    would pin every estimate at zero).
    """
    if n < 2:
        raise ValueError("need n >= 2 pixel observations")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")

    h = _observation(n)
    a4, g4 = _cv_blocks(dt)
    zero44 = np.zeros((4, 4))
    zero42 = np.zeros((4, 2))
    g = np.block([[g4, zero42], [zero42, g4]])

    if variant == "NNK":
        a = np.block([[a4, zero44], [zero44, a4]])
        q = g @ np.diag(noise.as_array()) @ g.T
    elif variant == "NNK_RW":
        a = np.diag([1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0])
        v = noise.as_array()
        q = np.diag([v[0], v[1], 0.0, 0.0, v[2], v[3], 0.0, 0.0])
    else:  # NNK_I
        a = np.zeros((STATE_DIM, STATE_DIM))
        c = INITIAL_COVARIANCE
        q = np.diag([c, c, 0.0, 0.0, c, c, 0.0, 0.0])

    return ModelMatrices(A=a, G=g, H=h, Q=q, dt=dt, variant=variant)


@dataclass(frozen=True)
class ExtendedMeasurement:
    """Stacked measurement y (2n+2,) and its diagonal covariance R.

    y = (y_l[0..n), y_a[0..n), y_e, y_delta); R carries the per-axis pixel
    sample variances on the first 2n entries and max(s2_l, s2_a) on the two
    network-estimate entries.
    """

    y: np.ndarray
    R_diag: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        r = np.asarray(self.R_diag, dtype=float)
        if y.ndim != 1 or y.shape != r.shape or y.size < 6 or y.size % 2 != 0:
            raise ValueError("measurement must be a (2n+2,) vector with matching R diagonal")
        if np.any(r <= 0):
            raise ValueError("R diagonal entries must be positive")
        y.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "R_diag", r)


def assemble_measurement(obs: PixelObservations, y_e: float, y_delta: float) -> ExtendedMeasurement:
    """Combine pixel observations with the network outputs into the stacked
    measurement.  The network entries share the covariance max(s2_l, s2_a),
    so their weight degrades together with the pixel evidence."""
    r_pixels = np.diag(measurement_noise(obs))
    r_tilde = max(max(obs.s2_lateral, obs.s2_axial), VARIANCE_FLOOR)
    y = np.concatenate([obs.y_lateral, obs.y_axial, [y_e, y_delta]])
    r = np.concatenate([r_pixels, [r_tilde, r_tilde]])
    return ExtendedMeasurement(y=y, R_diag=r)


def _symmetrise(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + p.T)


def predict(state: FilterState, mm: ModelMatrices) -> FilterState:
    """One prediction step: m <- A m, P <- A P A^T + Q (resymmetrised)."""
    m = mm.A @ state.m
    p = _symmetrise(mm.A @ state.P @ mm.A.T + mm.Q)
    return FilterState(m=m, P=p)


def update(pred: FilterState, meas: ExtendedMeasurement, mm: ModelMatrices) -> FilterState:
    """Measurement update.

    u = y - H m;  S = H P H^T + R;  K = P H^T S^-1;
    m <- m + K u;  P <- P - K S K^T (resymmetrised).
    S is inverted via Cholesky factorisation; a factorisation failure raises
    :class:`FilterDivergence`.
    """
    h = mm.H
    if meas.y.shape[0] != h.shape[0]:
        raise ValueError(f"measurement dim {meas.y.shape[0]} != observation rows {h.shape[0]}")
    u = meas.y - h @ pred.m
    pht = pred.P @ h.T
    s = h @ pht + np.diag(meas.R_diag)
    try:
        factor = cho_factor(_symmetrise(s), lower=True)
    except np.linalg.LinAlgError as exc:
        raise FilterDivergence(f"innovation covariance not positive definite: {exc}") from exc
    k = cho_solve(factor, pht.T).T
    m = pred.m + k @ u
    p = _symmetrise(pred.P - k @ s @ k.T)
    return FilterState(m=m, P=p)


def correct_axial(state: FilterState) -> float:
    """Corrected axial coordinate: apparent axial minus estimated aberration."""
    return float(state.m[1] - state.m[5])
