"""Scratch: frame-by-frame trace of an NNK run on exp4."""
import numpy as np

from nnktrack.geometry import ArrayGeometry, ImageGrid
from nnktrack.mlp import load_model, forward
from nnktrack.simulate import NoiseSpec, TrajectorySpec, simulate_sequence
from nnktrack.beamform import das_reconstruct
from nnktrack.features import image_marker, top_intensity_pixels
from nnktrack.tracker import TrackerConfig, TrackingSession

geom = ArrayGeometry()
grid = ImageGrid()
params = load_model("/root/pkg/.cache/model_full.nnk.json")

tspec = TrajectorySpec(kind="exp4_stationary", n_frames=101)
noise = NoiseSpec(target_snr_db=6.5, burst_every=0, seed=11)
frames, truth = simulate_sequence(geom, tspec, noise)

session = TrackingSession(TrackerConfig(model=params, geometry=geom, grid=grid))
print(" k | true_e | mu      | s2max  | est_l  est_a   est_e  est_d | corr_a (true 7.5)")
for k, (fr, p) in enumerate(zip(frames, truth)):
    img = das_reconstruct(fr, geom, grid)
    obs = top_intensity_pixels(img)
    mu = image_marker(img)
    est = session.step(fr)
    if k % 5 == 0 or k > 96:
        print(f"{k:3d} | {p.elevational:5.2f} | {mu:.4f} | {max(obs.s2_lateral, obs.s2_axial):6.2f} | "
              f"{est.lateral:6.2f} {est.axial_apparent:6.2f} {est.elevation_magnitude:6.2f} "
              f"{est.aberration:5.2f} | {est.axial_corrected:6.3f}")
