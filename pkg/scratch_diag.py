"""Scratch: diagnose estimator quality — fit capacity vs marker noise."""
import time

import numpy as np

from nnktrack.geometry import ArrayGeometry, ImageGrid, Point3
from nnktrack.mlp import (LMConfig, TrainingGridSpec, TrainingSet, generate_training_data,
                          train_lm, forward)
from nnktrack.simulate import NoiseSpec, TrajectorySpec, simulate_sequence, calibrate_noise, simulate_frame
from nnktrack.beamform import das_reconstruct
from nnktrack.features import image_marker, top_intensity_pixels

geom = ArrayGeometry()
grid = ImageGrid()

# A. fit capacity on a NOISELESS subset
spec = TrainingGridSpec(n_lateral=10, n_axial=10, n_elevational=12, n_inplane_extra=2)
t0 = time.time()
clean = generate_training_data(geom, spec, grid, noise_snr_db=None, seed=0)
print(f"noiseless rows: {clean.M} in {time.time()-t0:.0f}s")
params_c, rep_c = train_lm(clean, LMConfig(seed=0))
pred = forward(params_c, clean.inputs)
mask = clean.targets[:, 0] >= 1.0
print(f"NOISELESS fit: epochs {rep_c.epochs} ({rep_c.stop_reason}) val_mse {rep_c.val_mse:.4f} "
      f"offset RMSE {np.sqrt(np.mean((pred[mask,0]-clean.targets[mask,0])**2)):.3f} "
      f"aberr RMSE {np.sqrt(np.mean((pred[:,1]-clean.targets[:,1])**2)):.3f}")

# longer patience on the noiseless fit
params_c2, rep_c2 = train_lm(clean, LMConfig(seed=0, validation_patience=25, max_epochs=600))
pred2 = forward(params_c2, clean.inputs)
print(f"NOISELESS fit (patience 25): epochs {rep_c2.epochs} val_mse {rep_c2.val_mse:.4f} "
      f"offset RMSE {np.sqrt(np.mean((pred2[mask,0]-clean.targets[mask,0])**2)):.3f}")

# B. noisy full set, longer patience
z = np.load("/root/pkg/.cache/train_full.npz")
data = TrainingSet(inputs=z["inputs"], targets=z["targets"])
params_n, rep_n = train_lm(data, LMConfig(seed=0, validation_patience=25, max_epochs=600))
predn = forward(params_n, data.inputs)
maskn = data.targets[:, 0] >= 1.0
print(f"NOISY fit (patience 25): epochs {rep_n.epochs} val_mse {rep_n.val_mse:.4f} "
      f"offset RMSE {np.sqrt(np.mean((predn[maskn,0]-data.targets[maskn,0])**2)):.3f} "
      f"aberr RMSE {np.sqrt(np.mean((predn[:,1]-data.targets[:,1])**2)):.3f}")

# C. per-frame NN estimates with TRUE positional inputs along exp4
sigma = calibrate_noise(geom, Point3(0, 7.5, 0), 6.5)
print("\nper-frame NN estimates at (0, 7.5, e), TRUE inputs, fresh noise:")
print(" e | y_e mean+-sd | y_delta mean+-sd (true delta approx)")
for e in (0.0, 1.0, 2.0, 3.0, 4.0, 5.0):
    ye, yd = [], []
    for s in range(12):
        r = np.random.default_rng(5000 + s)
        fr = simulate_frame(geom, Point3(0, 7.5, e), sigma, rng=r)
        img = das_reconstruct(fr, geom, grid)
        mu = image_marker(img)
        out = forward(params_n, np.array([7.5, 0.0, mu]))
        ye.append(out[0]); yd.append(out[1])
    true_delta = np.hypot(7.5, e) - 7.5
    print(f"{e:4.1f} | {np.mean(ye):5.2f}+-{np.std(ye):4.2f} | {np.mean(yd):5.2f}+-{np.std(yd):4.2f} ({true_delta:.2f})")
