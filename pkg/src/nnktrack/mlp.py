"""Offset / aberration estimator: a small sigmoid MLP trained with
Levenberg-Marquardt on simulated data.

The canonical network maps (axial, lateral, amplitude marker) to
(offset magnitude, axial aberration) through two 20-node logistic-sigmoid
hidden layers and a linear output layer.  Inputs and targets are affinely
normalised to zero mean / unit scale before training; the constants are part
of the model.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from .beamform import das_reconstruct
from .features import image_marker, top_intensity_pixels
from .geometry import ArrayGeometry, ImageGrid, Point3
from .simulate import CALIBRATION_REFERENCE, calibrate_noise, simulate_frame

__all__ = [
    "CANONICAL_LAYER_SIZES",
    "MLPParams",
    "TrainingGridSpec",
    "TrainingSet",
    "LMConfig",
    "TrainingReport",
    "TrainingError",
    "init_params",
    "forward",
    "jacobian",
    "train_lm",
    "generate_training_data",
    "save_model",
    "load_model",
]

CANONICAL_LAYER_SIZES = (3, 20, 20, 2)

MODEL_FORMAT_VERSION = 1


class TrainingError(RuntimeError):
    """Levenberg-Marquardt could not decrease the loss with any damping."""


@dataclass
class MLPParams:
    """Network parameters plus input/target normalisation constants.

    ``weights[k]`` has shape (out_k, in_k); hidden activations are logistic
    sigmoids, the output is linear.  ``input_norm`` / ``target_norm`` are
    (mean, scale) pairs applied as (x - mean) / scale on the way in and
    z * scale + mean on the way out.
    """

    layer_sizes: tuple
    weights: list
    biases: list
    input_mean: np.ndarray
    input_scale: np.ndarray
    target_mean: np.ndarray
    target_scale: np.ndarray

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"bad layer sizes {sizes}")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValueError("weights/biases count must match layer count - 1")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[k + 1], sizes[k]) or b.shape != (sizes[k + 1],):
                raise ValueError(f"layer {k}: weight shape {w.shape} / bias shape {b.shape} "
                                 f"inconsistent with sizes {sizes}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {k}: non-finite parameters")
        for name in ("input_mean", "input_scale", "target_mean", "target_scale"):
            arr = np.asarray(getattr(self, name), dtype=float)
            expected = sizes[0] if name.startswith("input") else sizes[-1]
            if arr.shape != (expected,) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite with shape ({expected},)")
            setattr(self, name, arr)
        if np.any(self.input_scale <= 0) or np.any(self.target_scale <= 0):
            raise ValueError("normalisation scales must be positive")
        self.layer_sizes = sizes

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "MLPParams":
        return MLPParams(
            layer_sizes=self.layer_sizes,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            input_mean=self.input_mean.copy(),
            input_scale=self.input_scale.copy(),
            target_mean=self.target_mean.copy(),
            target_scale=self.target_scale.copy(),
        )


def init_params(layer_sizes=CANONICAL_LAYER_SIZES, seed: int = 0) -> MLPParams:
    """Fan-in-scaled symmetric uniform weight initialisation, zero biases,
    identity normalisation."""
    rng = np.random.default_rng(seed)
    sizes = tuple(layer_sizes)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MLPParams(
        layer_sizes=sizes,
        weights=weights,
        biases=biases,
        input_mean=np.zeros(sizes[0]),
        input_scale=np.ones(sizes[0]),
        target_mean=np.zeros(sizes[-1]),
        target_scale=np.ones(sizes[-1]),
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _forward_normalised(params: MLPParams, z: np.ndarray) -> tuple[np.ndarray, list]:
    """Forward pass on already-normalised inputs z (N, in).

    Returns the linear outputs (N, out) and the per-layer activations needed
    for backpropagation.
    """
    acts = [z]
    h = z
    n_layers = len(params.weights)
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w.T + b
        if k < n_layers - 1:
            h = _sigmoid(h)
        acts.append(h)
    return h, acts


def forward(params: MLPParams, u) -> np.ndarray:
    """Evaluate the network on one input (shape (in,)) or a batch (N, in);
    returns denormalised outputs with matching leading shape."""
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    z = (np.atleast_2d(u) - params.input_mean) / params.input_scale
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite network input")
    out, _ = _forward_normalised(params, z)
    out = out * params.target_scale + params.target_mean
    return out[0] if single else out


def _pack(params: MLPParams) -> np.ndarray:
    return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(params.weights, params.biases)])


def _unpack_into(params: MLPParams, theta: np.ndarray) -> None:
    pos = 0
    for w, b in zip(params.weights, params.biases):
        w[...] = theta[pos:pos + w.size].reshape(w.shape)
        pos += w.size
        b[...] = theta[pos:pos + b.size]
        pos += b.size


def _batch_jacobian(params: MLPParams, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Jacobian of the *normalised* outputs w.r.t. all parameters.

    z is (N, in) normalised input.  Returns (outputs (N, n_out),
    J (N, n_out, P)) with parameters ordered layer by layer, weights
    row-major then biases.
    """
    out, acts = _forward_normalised(params, z)
    n = z.shape[0]
    n_out = params.layer_sizes[-1]
    n_layers = len(params.weights)

    # delta[k] has shape (N, n_out, width_k+1): d out / d preactivation of layer k
    deltas = [None] * n_layers
    d = np.broadcast_to(np.eye(n_out), (n, n_out, n_out)).copy()
    deltas[n_layers - 1] = d
    for k in range(n_layers - 1, 0, -1):
        s = acts[k]  # sigmoid output of layer k (N, width_k)
        d = np.einsum("noj,ji->noi", d, params.weights[k]) * (s * (1.0 - s))[:, None, :]
        deltas[k - 1] = d

    blocks = []
    for k in range(n_layers):
        a_prev = acts[k]  # (N, in_k)
        dw = deltas[k][:, :, :, None] * a_prev[:, None, None, :]  # (N, n_out, out_k, in_k)
        blocks.append(dw.reshape(n, n_out, -1))
        blocks.append(deltas[k])
    return out, np.concatenate(blocks, axis=2)


def jacobian(params: MLPParams, u) -> np.ndarray:
    """Analytic Jacobian (n_out, P) of the denormalised outputs at input u
    with respect to every weight and bias (reverse accumulation)."""
    u = np.asarray(u, dtype=float)
    z = (np.atleast_2d(u) - params.input_mean) / params.input_scale
    _, jac = _batch_jacobian(params, z)
    return jac[0] * params.target_scale[:, None]


@dataclass(frozen=True)
class TrainingGridSpec:
    """Uniform simulation grid the training set is built on: 20 lateral x
    20 axial x (20 elevational + 2 extra in-plane) points by default."""

    lateral_bounds: tuple = (-12.0, 12.0)
    n_lateral: int = 20
    axial_bounds: tuple = (0.5, 14.5)
    n_axial: int = 20
    elevational_bounds: tuple = (-10.0, 10.0)
    n_elevational: int = 20
    n_inplane_extra: int = 2

    @property
    def n_rows(self) -> int:
        return self.n_lateral * self.n_axial * (self.n_elevational + self.n_inplane_extra)

    def elevational_values(self) -> np.ndarray:
        grid = np.linspace(*self.elevational_bounds, self.n_elevational)
        return np.concatenate([grid, np.zeros(self.n_inplane_extra)])


@dataclass(frozen=True)
class TrainingSet:
    """Rows of network inputs (axial, lateral, marker) and targets
    (offset magnitude, axial aberration)."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=float)
        targets = np.asarray(self.targets, dtype=float)
        if inputs.ndim != 2 or targets.ndim != 2 or inputs.shape[0] != targets.shape[0]:
            raise ValueError("inputs and targets must be matching 2D row arrays")
        if inputs.shape[1] != 3 or targets.shape[1] != 2:
            raise ValueError("expected 3 input and 2 target columns")
        if np.any(targets[:, 0] < 0):
            raise ValueError("offset targets must be >= 0")
        inputs.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    @property
    def M(self) -> int:
        return self.inputs.shape[0]


def generate_training_data(
    geometry: ArrayGeometry,
    grid_spec: TrainingGridSpec = TrainingGridSpec(),
    image_grid: ImageGrid = ImageGrid(),
    n_pixels: int = 15,
    noise_snr_db: float | None = 6.5,
    seed: int = 0,
    progress: bool = False,
) -> TrainingSet:
    """Simulate one frame per grid point and extract (marker, aberration) rows.

    Each row: simulate the target, reconstruct, take the image marker and the
    n highest-intensity pixels; the aberration target is the mean apparent
    axial coordinate of those pixels minus the true axial coordinate, the
    offset target is |elevational|.  Frames carry noise calibrated to
    ``noise_snr_db`` at the in-plane reference (pass None for noiseless
    frames) so the marker distribution matches tracking conditions; each
    row's noise stream derives from (seed, row index).
    """
    lat = np.linspace(*grid_spec.lateral_bounds, grid_spec.n_lateral)
    ax = np.linspace(*grid_spec.axial_bounds, grid_spec.n_axial)
    elevs = grid_spec.elevational_values()

    sigma = 0.0
    if noise_snr_db is not None:
        sigma = calibrate_noise(geometry, CALIBRATION_REFERENCE, noise_snr_db)

    inputs = np.empty((grid_spec.n_rows, 3))
    targets = np.empty((grid_spec.n_rows, 2))
    row = 0
    for l in lat:
        for a in ax:
            for e in elevs:
                rng = None
                if sigma > 0:
                    rng = np.random.default_rng(np.random.SeedSequence((seed, row)))
                frame = simulate_frame(geometry, Point3(float(l), float(a), float(e)), sigma, rng=rng)
                image = das_reconstruct(frame, geometry, image_grid)
                obs = top_intensity_pixels(image, n_pixels)
                mu = image_marker(image)
                inputs[row] = (a, l, mu)
                targets[row] = (abs(e), float(np.mean(obs.y_axial)) - a)
                row += 1
        if progress:
            print(f"  training data: {row}/{grid_spec.n_rows} rows", flush=True)
    return TrainingSet(inputs=inputs, targets=targets)


@dataclass(frozen=True)
class LMConfig:
    """Levenberg-Marquardt schedule and stopping rules."""

    damping: float = 1e-3
    damping_up: float = 10.0
    damping_down: float = 0.1
    max_epochs: int = 1000
    validation_patience: int = 6
    gradient_tolerance: float = 1e-7
    train_fraction: float = 0.85
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.train_fraction < 1):
            raise ValueError("train_fraction must be in (0, 1)")
        if self.validation_patience < 1:
            raise ValueError("validation_patience must be >= 1")


@dataclass
class TrainingReport:
    rows: int
    epochs: int
    stop_reason: str  # "patience" | "gradient" | "max_epochs"
    best_epoch: int
    train_mse: float
    val_mse: float
    seed: int

    def to_json_dict(self) -> dict:
        return asdict(self)


def train_lm(
    data: TrainingSet,
    config: LMConfig = LMConfig(),
    layer_sizes=CANONICAL_LAYER_SIZES,
) -> tuple[MLPParams, TrainingReport]:
    """Fit the network by Levenberg-Marquardt on the summed squared error.

    Steps solve (J^T J + lambda I) d = J^T r; a step is accepted (and lambda
    scaled down) when the training loss decreases, otherwise rejected and
    lambda scaled up.  Stops when the validation MSE has not improved for
    ``validation_patience`` epochs, when the gradient norm falls below
    ``gradient_tolerance`` relative to its initial value, or at
    ``max_epochs``; the parameters with the best validation MSE are returned.
    Raises :class:`TrainingError` if no damping up to 1e8x the initial value
    produces a decrease.
    """
    if data.M < 100:
        raise ValueError("need at least 100 training rows")
    if layer_sizes[0] != data.inputs.shape[1] or layer_sizes[-1] != data.targets.shape[1]:
        raise ValueError(f"layer sizes {layer_sizes} do not fit data with "
                         f"{data.inputs.shape[1]} inputs / {data.targets.shape[1]} targets")

    params = init_params(layer_sizes, seed=config.seed)
    params.input_mean = data.inputs.mean(axis=0)
    params.input_scale = _robust_scale(data.inputs)
    params.target_mean = data.targets.mean(axis=0)
    params.target_scale = _robust_scale(data.targets)

    z_all = (data.inputs - params.input_mean) / params.input_scale
    w_all = (data.targets - params.target_mean) / params.target_scale

    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(data.M)
    n_train = int(round(config.train_fraction * data.M))
    train_idx, val_idx = perm[:n_train], perm[n_train:]
    z_tr, w_tr = z_all[train_idx], w_all[train_idx]
    z_va, w_va = z_all[val_idx], w_all[val_idx]

    theta = _pack(params)
    lam = config.damping
    lam_max = 1e8 * config.damping

    def train_loss(t: np.ndarray) -> float:
        _unpack_into(params, t)
        out, _ = _forward_normalised(params, z_tr)
        return float(np.sum((out - w_tr) ** 2))

    def val_mse(t: np.ndarray) -> float:
        _unpack_into(params, t)
        out, _ = _forward_normalised(params, z_va)
        return float(np.mean((out - w_va) ** 2))

    loss = train_loss(theta)
    best_val = val_mse(theta)
    best_theta = theta.copy()
    best_epoch = 0
    epochs_since_best = 0
    grad0 = None
    stop_reason = "max_epochs"
    epoch = 0

    identity = np.eye(theta.size)
    for epoch in range(1, config.max_epochs + 1):
        _unpack_into(params, theta)
        out, jac = _batch_jacobian(params, z_tr)
        r = (out - w_tr).reshape(-1)
        j = jac.reshape(r.size, theta.size)
        g = j.T @ r
        gnorm = float(np.linalg.norm(g))
        if grad0 is None:
            grad0 = max(gnorm, np.finfo(float).tiny)
        if gnorm / grad0 < config.gradient_tolerance:
            stop_reason = "gradient"
            epoch -= 1  # no step taken this epoch
            break
        jtj = j.T @ j

        while True:
            try:
                step = np.linalg.solve(jtj + lam * identity, g)
            except np.linalg.LinAlgError:
                step = None
            if step is not None:
                candidate = theta - step
                new_loss = train_loss(candidate)
                if math.isfinite(new_loss) and new_loss < loss:
                    theta = candidate
                    loss = new_loss
                    lam *= config.damping_down
                    break
            lam *= config.damping_up
            if lam > lam_max:
                raise TrainingError(
                    f"no loss decrease at epoch {epoch} with damping up to {lam_max:g}"
                )

        v = val_mse(theta)
        if v < best_val:
            best_val = v
            best_theta = theta.copy()
            best_epoch = epoch
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= config.validation_patience:
                stop_reason = "patience"
                break

    _unpack_into(params, best_theta)
    report = TrainingReport(
        rows=data.M,
        epochs=epoch,
        stop_reason=stop_reason,
        best_epoch=best_epoch,
        train_mse=train_loss(best_theta) / (z_tr.shape[0] * w_tr.shape[1]),
        val_mse=best_val,
        seed=config.seed,
    )
    _unpack_into(params, best_theta)
    return params, report


def train_lm_restarts(
    data: TrainingSet,
    config: LMConfig = LMConfig(),
    restarts: int = 3,
    layer_sizes=CANONICAL_LAYER_SIZES,
) -> tuple[MLPParams, TrainingReport]:
    """Run :func:`train_lm` from ``restarts`` seeded initialisations
    (config.seed, config.seed + 1, ...) and keep the fit with the lowest
    validation MSE.  Deterministic for a fixed base seed."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best = None
    for k in range(restarts):
        cfg = LMConfig(
            damping=config.damping,
            damping_up=config.damping_up,
            damping_down=config.damping_down,
            max_epochs=config.max_epochs,
            validation_patience=config.validation_patience,
            gradient_tolerance=config.gradient_tolerance,
            train_fraction=config.train_fraction,
            seed=config.seed + k,
        )
        params, report = train_lm(data, cfg, layer_sizes)
        if best is None or report.val_mse < best[1].val_mse:
            best = (params, report)
    return best


def _robust_scale(columns: np.ndarray) -> np.ndarray:
    scale = columns.std(axis=0)
    return np.where(scale > 0, scale, 1.0)


def save_model(
    params: MLPParams,
    path: str,
    training_report: TrainingReport | None = None,
    extra: dict | None = None,
) -> None:
    """Write the model as JSON (lossless round-trip of parameters and
    normalisation constants)."""
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "layer_sizes": list(params.layer_sizes),
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
        "input_norm": {"mean": params.input_mean.tolist(), "scale": params.input_scale.tolist()},
        "target_norm": {"mean": params.target_mean.tolist(), "scale": params.target_scale.tolist()},
        "training_report": training_report.to_json_dict() if training_report else None,
    }
    if extra:
        doc.update(extra)
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")
    os.replace(tmp, path)


def load_model(path: str, expected_layer_sizes=CANONICAL_LAYER_SIZES) -> MLPParams:
    """Load a model file, validating structure, layer sizes and finiteness."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    for key in ("format_version", "layer_sizes", "weights", "biases", "input_norm", "target_norm"):
        if key not in doc:
            raise ValueError(f"{path}: missing field {key!r}")
    sizes = tuple(int(s) for s in doc["layer_sizes"])
    if expected_layer_sizes is not None and sizes != tuple(expected_layer_sizes):
        raise ValueError(f"{path}: layer_sizes {sizes} != expected {tuple(expected_layer_sizes)}")
    try:
        params = MLPParams(
            layer_sizes=sizes,
            weights=[np.array(w, dtype=float) for w in doc["weights"]],
            biases=[np.array(b, dtype=float) for b in doc["biases"]],
            input_mean=np.array(doc["input_norm"]["mean"], dtype=float),
            input_scale=np.array(doc["input_norm"]["scale"], dtype=float),
            target_mean=np.array(doc["target_norm"]["mean"], dtype=float),
            target_scale=np.array(doc["target_norm"]["scale"], dtype=float),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: invalid model parameters ({exc})") from exc
    return params


def load_model_document(path: str) -> dict:
    """Raw JSON document of a model file (for pipeline metadata access)."""
    with open(path) as fh:
        return json.load(fh)
