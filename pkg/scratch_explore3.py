"""Scratch: re-validate with fbw=0.45, argmax-centred marker window."""
import time

import numpy as np

from nnktrack.geometry import ArrayGeometry, ImageGrid, Point3
from nnktrack.simulate import clean_frame, calibrate_noise, simulate_frame
from nnktrack.beamform import das_reconstruct, apparent_axial
from nnktrack.features import amplitude_marker, top_intensity_pixels, image_marker

geom = ArrayGeometry()
grid = ImageGrid()
print(f"fbw={geom.pulse_fractional_bandwidth}")
sigma = calibrate_noise(geom, Point3(0, 7.5, 0), 6.5)
print(f"sigma={sigma:.3e}")

# frame-max monotone decay
es = np.arange(0, 10.001, 0.5)
for (l, a) in [(0.0, 7.5), (0.0, 4.0), (-6.0, 2.0)]:
    m = [np.abs(clean_frame(geom, Point3(l, a, e))).max() for e in es]
    mono = all(m[i] > m[i + 1] for i in range(len(m) - 1))
    print(f"(l={l}, a={a}) strictly decreasing: {mono}, ratio10 {m[-1]/m[0]:.4f}")

# DAS argmax (C2)
print("\n== DAS argmax (noiseless) ==")
worst = 0.0
for a in (3.0, 5.0, 7.5):
    for e in (0.0, 2.0, 4.0):
        img = das_reconstruct(simulate_frame(geom, Point3(0.0, a, e)), geom, grid)
        i, j = np.unravel_index(np.abs(img.intensity).argmax(), img.intensity.shape)
        depth = grid.axial_min + j * grid.pixel_pitch
        err = abs(depth - apparent_axial(Point3(0.0, a, e)))
        worst = max(worst, err)
print(f"worst argmax err: {worst:.3f} mm")

# DAS speed
fr = simulate_frame(geom, Point3(0.0, 7.5, 0.0))
t0 = time.perf_counter()
for _ in range(10):
    img = das_reconstruct(fr, geom, grid)
print(f"DAS per frame: {(time.perf_counter()-t0)/10*1e3:.1f} ms")

# top-15 cleanliness across depths (noisy): how many of top-15 are near the target?
print("\n== top-15 near-target fraction + s2 (noisy) ==")
for a in (4.0, 7.5, 10.0, 12.0, 14.0):
    fracs, s2s = [], []
    for s in range(6):
        r = np.random.default_rng(50 + s)
        fy = simulate_frame(geom, Point3(0, a, 0.0), sigma, rng=r)
        imn = das_reconstruct(fy, geom, grid)
        obs = top_intensity_pixels(imn)
        near = (np.abs(obs.y_lateral - 0) < 1.5) & (np.abs(obs.y_axial - a) < 1.5)
        fracs.append(near.mean())
        s2s.append(max(obs.s2_lateral, obs.s2_axial))
    print(f"a={a}: near-target frac {np.mean(fracs):.2f}, max s2 median {np.median(s2s):.3f}")

# marker curves (argmax window)
print("\n== noisy image marker vs e ==")
for a in (2.0, 4.0, 7.5, 10.0, 12.0, 14.0):
    row = []
    for e in [0, 1, 2, 3, 4, 5, 6, 8, 10]:
        r = np.random.default_rng(11)
        fy = simulate_frame(geom, Point3(0, float(a), float(e)), sigma, rng=r)
        imn = das_reconstruct(fy, geom, grid)
        row.append(image_marker(imn))
    print(f"a={a:>5}: " + " ".join(f"{v:.3e}" for v in row))

print("\n== noiseless image marker vs e (training signal) ==")
for a in (2.0, 7.5, 14.0):
    row = []
    for e in [0, 1, 2, 3, 4, 5, 6, 8, 10]:
        img = das_reconstruct(simulate_frame(geom, Point3(0, float(a), float(e))), geom, grid)
        row.append(image_marker(img))
    print(f"a={a:>5}: " + " ".join(f"{v:.3e}" for v in row))

# jitter
print("\n== noisy marker jitter ==")
for (a, e) in [(7.5, 0.0), (7.5, 2.0), (7.5, 4.0), (7.5, 5.0), (14.0, 0.0), (14.0, 4.0), (2.0, 5.0)]:
    vals = []
    for s in range(10):
        r = np.random.default_rng(1000 + s)
        fy = simulate_frame(geom, Point3(0, a, e), sigma, rng=r)
        imn = das_reconstruct(fy, geom, grid)
        vals.append(image_marker(imn))
    vals = np.array(vals)
    print(f"a={a}, e={e}: {vals.mean():.4e} +- {vals.std():.2e} ({vals.std()/vals.mean()*100:.1f}%)")

# burst frame behaviour: s2 must explode, marker scales up
r = np.random.default_rng(77)
fy = simulate_frame(geom, Point3(0, 7.5, 2.0), sigma * 10, rng=r)
imn = das_reconstruct(fy, geom, grid)
obs = top_intensity_pixels(imn)
print(f"\nburst frame: s2_l={obs.s2_lateral:.2f}, s2_a={obs.s2_axial:.2f}, marker={image_marker(imn):.3e}")
