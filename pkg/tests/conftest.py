"""Shared fixtures.

Expensive artefacts (the 8800-row training set, the trained model, tracked
experiment runs) are built once per session and cached on disk under
.cache/tests keyed by the pipeline configuration, so repeated test runs are
fast.  Delete the cache directory to force a rebuild.
"""

import hashlib
import json
import os

import numpy as np
import pytest

from nnktrack.geometry import ArrayGeometry, ImageGrid
from nnktrack.mlp import (
    LMConfig,
    TrainingGridSpec,
    TrainingSet,
    generate_training_data,
    load_model,
    save_model,
    train_lm_restarts,
)
from nnktrack.simulate import NoiseSpec, TrajectorySpec, simulate_sequence

CACHE_DIR = os.path.join(os.path.dirname(__file__), "..", ".cache", "tests")

TRAIN_SEED = 0
TRAIN_SNR_DB = 6.5
TRAIN_RESTARTS = 3


def _config_key(geometry: ArrayGeometry, grid: ImageGrid) -> str:
    doc = {
        "geometry": geometry.to_json_dict(),
        "grid": grid.to_json_dict(),
        "seed": TRAIN_SEED,
        "snr": TRAIN_SNR_DB,
        "restarts": TRAIN_RESTARTS,
    }
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


@pytest.fixture(scope="session")
def geometry():
    return ArrayGeometry()


@pytest.fixture(scope="session")
def image_grid():
    return ImageGrid()


@pytest.fixture(scope="session")
def training_set(geometry, image_grid):
    os.makedirs(CACHE_DIR, exist_ok=True)
    path = os.path.join(CACHE_DIR, f"train-{_config_key(geometry, image_grid)}.npz")
    if os.path.exists(path):
        z = np.load(path)
        return TrainingSet(inputs=z["inputs"], targets=z["targets"])
    data = generate_training_data(
        geometry, TrainingGridSpec(), image_grid,
        noise_snr_db=TRAIN_SNR_DB, seed=TRAIN_SEED,
    )
    np.savez_compressed(path, inputs=data.inputs, targets=data.targets)
    return data


@pytest.fixture(scope="session")
def trained_model(geometry, image_grid, training_set):
    os.makedirs(CACHE_DIR, exist_ok=True)
    path = os.path.join(CACHE_DIR, f"model-{_config_key(geometry, image_grid)}.nnk.json")
    if os.path.exists(path):
        return load_model(path)
    params, report = train_lm_restarts(
        training_set, LMConfig(seed=TRAIN_SEED), restarts=TRAIN_RESTARTS
    )
    save_model(params, path, training_report=report, extra={
        "geometry": geometry.to_json_dict(),
        "image_grid": image_grid.to_json_dict(),
        "n_pixels": 15,
        "noise_snr_db": TRAIN_SNR_DB,
    })
    return params


def make_experiment(geometry, exp: int, seed: int = 11, n_frames: int = 101):
    """Simulate one of the four canned experiments."""
    kind = {1: "exp1_curved", 2: "exp2_curved_noisy", 3: "exp3_inplane",
            4: "exp4_stationary"}[exp]
    burst = 10 if exp == 2 else 0
    spec = TrajectorySpec(kind=kind, n_frames=n_frames)
    noise = NoiseSpec(target_snr_db=6.5, burst_every=burst, seed=seed)
    frames, truth = simulate_sequence(geometry, spec, noise)
    return frames, truth, spec, noise


@pytest.fixture(scope="session")
def experiment_runs(geometry):
    """frames/truth for experiments 1-4 with the acceptance seed."""
    return {exp: make_experiment(geometry, exp) for exp in (1, 2, 3, 4)}
