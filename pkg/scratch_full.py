"""Scratch: full-size training + experiment evaluation."""
import os
import time

import numpy as np

from nnktrack.geometry import ArrayGeometry, ImageGrid
from nnktrack.mlp import LMConfig, TrainingGridSpec, TrainingSet, generate_training_data, train_lm, forward
from nnktrack.simulate import NoiseSpec, TrajectorySpec, simulate_sequence
from nnktrack.evaluate import track_sequence, summarize

geom = ArrayGeometry()
grid = ImageGrid()

cache = "/root/pkg/.cache/train_full.npz"
os.makedirs(os.path.dirname(cache), exist_ok=True)
if os.path.exists(cache):
    z = np.load(cache)
    data = TrainingSet(inputs=z["inputs"], targets=z["targets"])
    print(f"loaded {data.M} rows")
else:
    t0 = time.time()
    data = generate_training_data(geom, TrainingGridSpec(), grid, noise_snr_db=6.5, seed=0)
    np.savez_compressed(cache, inputs=data.inputs, targets=data.targets)
    print(f"gen {data.M} rows in {time.time()-t0:.1f}s")

from nnktrack.mlp import train_lm_restarts
t0 = time.time()
params, report = train_lm_restarts(data, LMConfig(seed=0), restarts=3)
print(f"train: {report.epochs} epochs ({report.stop_reason}) in {time.time()-t0:.1f}s, "
      f"train_mse={report.train_mse:.4f} val_mse={report.val_mse:.4f} seed={report.seed}")

pred = forward(params, data.inputs)
mask = data.targets[:, 0] >= 1.0
rmse_e = np.sqrt(np.mean((pred[mask, 0] - data.targets[mask, 0]) ** 2))
rmse_d = np.sqrt(np.mean((pred[:, 1] - data.targets[:, 1]) ** 2))
print(f"offset RMSE (|e|>=1): {rmse_e:.3f} mm; aberration RMSE: {rmse_d:.3f} mm")
# depth-resolved
for lo, hi in ((0.5, 5), (5, 10), (10, 14.6)):
    m2 = mask & (data.inputs[:, 0] >= lo) & (data.inputs[:, 0] < hi)
    r = np.sqrt(np.mean((pred[m2, 0] - data.targets[m2, 0]) ** 2))
    md = (data.inputs[:, 0] >= lo) & (data.inputs[:, 0] < hi)
    rd = np.sqrt(np.mean((pred[md, 1] - data.targets[md, 1]) ** 2))
    print(f"  depth {lo}-{hi}: offset RMSE {r:.3f}, aberration RMSE {rd:.3f}")

import json
from nnktrack.mlp import save_model
save_model(params, "/root/pkg/.cache/model_full.nnk.json", training_report=report)

def run(kind, label, burst=0, n=101):
    tspec = TrajectorySpec(kind=kind, n_frames=n)
    noise = NoiseSpec(target_snr_db=6.5, burst_every=burst, seed=11)
    frames, truth = simulate_sequence(geom, tspec, noise)
    out = {}
    for method in ("nnk", "nnk-rw", "nnk-i", "mi"):
        rows = track_sequence(frames, truth, method, model=params, geometry=geom, grid=grid)
        rep = summarize([{ "err2d": r.err2d, "err3d": r.err3d,
                           "ms_reconstruct": r.ms_reconstruct, "ms_features": r.ms_features,
                           "ms_nn": r.ms_nn, "ms_kalman": r.ms_kalman} for r in rows], method)
        extra = ""
        if method == "nnk":
            extra = f" | final e {rows[-1].est_e:.2f} (true {truth[-1].elevational:.2f})"
        print(f"{label:5s} {method:6s}: 2D {rep.table_cell_2d():24s} 3D {rep.table_cell_3d()}{extra}")
        out[method] = rep
    return out

r4 = run("exp4_stationary", "exp4")
r1 = run("exp1_curved", "exp1")
r3 = run("exp3_inplane", "exp3")
r2 = run("exp2_curved_noisy", "exp2", burst=10)
