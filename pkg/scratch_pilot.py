"""Scratch: reduced-scale end-to-end pilot."""
import time

import numpy as np

from nnktrack.geometry import ArrayGeometry, ImageGrid
from nnktrack.mlp import LMConfig, TrainingGridSpec, generate_training_data, train_lm, forward
from nnktrack.simulate import NoiseSpec, TrajectorySpec, simulate_sequence
from nnktrack.evaluate import track_sequence, summarize

geom = ArrayGeometry()
grid = ImageGrid()

spec = TrainingGridSpec(n_lateral=10, n_axial=10, n_elevational=12, n_inplane_extra=2)
t0 = time.time()
data = generate_training_data(geom, spec, grid, noise_snr_db=6.5, seed=0)
print(f"gen {data.M} rows in {time.time()-t0:.1f}s")

t0 = time.time()
params, report = train_lm(data, LMConfig(seed=0))
print(f"train: {report.epochs} epochs ({report.stop_reason}) in {time.time()-t0:.1f}s, "
      f"train_mse={report.train_mse:.4f} val_mse={report.val_mse:.4f}")

# validation-style check: offset residuals on the training rows with |e|>=1
pred = forward(params, data.inputs)
mask = data.targets[:, 0] >= 1.0
rmse_e = np.sqrt(np.mean((pred[mask, 0] - data.targets[mask, 0]) ** 2))
rmse_d = np.sqrt(np.mean((pred[:, 1] - data.targets[:, 1]) ** 2))
print(f"offset RMSE (|e|>=1 rows): {rmse_e:.3f} mm; aberration RMSE: {rmse_d:.3f} mm")

def run(kind, label, burst=0, n=101):
    tspec = TrajectorySpec(kind=kind, n_frames=n)
    noise = NoiseSpec(target_snr_db=6.5, burst_every=burst, seed=11)
    frames, truth = simulate_sequence(geom, tspec, noise)
    for method in ("nnk", "mi"):
        rows = track_sequence(frames, truth, method, model=params, geometry=geom, grid=grid)
        rep = summarize([{ "err2d": r.err2d, "err3d": r.err3d,
                           "ms_reconstruct": r.ms_reconstruct, "ms_features": r.ms_features,
                           "ms_nn": r.ms_nn, "ms_kalman": r.ms_kalman} for r in rows], method)
        extra = ""
        if method == "nnk":
            extra = f" | final e est {rows[-1].est_e:.2f} (true {truth[-1].elevational:.2f})"
        print(f"{label} {method}: 2D {rep.table_cell_2d()} 3D {rep.table_cell_3d()}{extra}")

t0 = time.time()
run("exp4_stationary", "exp4")
run("exp1_curved", "exp1")
run("exp3_inplane", "exp3")
run("exp2_curved_noisy", "exp2", burst=10)
print(f"tracking in {time.time()-t0:.1f}s")
