"""Scratch exploration: validate physics/design constants before building the
estimator. Not part of the package."""
import time

import numpy as np

from nnktrack.geometry import ArrayGeometry, ImageGrid, Point3
from nnktrack.simulate import clean_frame, calibrate_noise, simulate_frame
from nnktrack.beamform import das_reconstruct, apparent_axial, delay_table
from nnktrack.features import amplitude_marker, top_intensity_pixels, image_marker

geom = ArrayGeometry()
grid = ImageGrid()
print(f"grid: {grid.n_lateral} x {grid.n_axial} = {grid.n_lateral*grid.n_axial} px")
print(f"element_radius={geom.element_radius}, ka={2*np.pi*geom.pulse_center_frequency/geom.speed_of_sound*geom.element_radius:.3f}")

# --- 1. noiseless frame-max decay vs elevation ---
print("\n== frame max |amplitude| vs elevation (noiseless) ==")
es = np.arange(0, 10.001, 0.5)
for (l, a) in [(0.0, 7.5), (0.0, 4.0), (0.0, 13.0), (0.0, 0.5), (-6.0, 2.0)]:
    m = [np.abs(clean_frame(geom, Point3(l, a, e))).max() for e in es]
    mono = all(m[i] > m[i + 1] for i in range(len(m) - 1))
    print(f"(l={l}, a={a}): strictly decreasing over e=0..10@0.5: {mono}; "
          f"ratio e=10/e=0 = {m[-1]/m[0]:.4f}")

# decay steeper at 4mm than 13mm (e=0 -> 4)
for a in (4.0, 13.0):
    m0 = np.abs(clean_frame(geom, Point3(0, a, 0))).max()
    m4 = np.abs(clean_frame(geom, Point3(0, a, 4))).max()
    print(f"a={a}: rel decay e=0->4: {m4/m0:.4f}")

# --- 2. DAS argmax apparent depth (criterion 2 geometry) ---
print("\n== DAS argmax depth vs sqrt(a^2+e^2), noiseless ==")
t0 = time.perf_counter()
delay_table(geom, grid)
print(f"delay table build: {time.perf_counter()-t0:.2f} s")
worst = 0.0
for a in (3.0, 5.0, 7.5):
    for e in (0.0, 2.0, 4.0):
        fr = simulate_frame(geom, Point3(0.0, a, e))
        img = das_reconstruct(fr, geom, grid)
        i, j = np.unravel_index(np.abs(img.intensity).argmax(), img.intensity.shape)
        depth = grid.axial_min + j * grid.pixel_pitch
        expect = apparent_axial(Point3(0.0, a, e))
        err = abs(depth - expect)
        worst = max(worst, err)
        print(f"a={a}, e={e}: argmax depth {depth:.3f} vs {expect:.4f} (err {err:.3f})")
print(f"worst |err| = {worst:.3f} mm (tolerance 0.25)")

# --- timing ---
fr = simulate_frame(geom, Point3(0.0, 7.5, 0.0))
t0 = time.perf_counter()
for _ in range(5):
    img = das_reconstruct(fr, geom, grid)
reco_ms = (time.perf_counter() - t0) / 5 * 1e3
t0 = time.perf_counter()
for _ in range(20):
    obs = top_intensity_pixels(img)
feat_ms = (time.perf_counter() - t0) / 20 * 1e3
print(f"\nDAS per frame: {reco_ms:.1f} ms; top-15: {feat_ms:.1f} ms")

# --- 3. marker curves: raw vs image-window, noiseless vs 6.5 dB ---
sigma = calibrate_noise(geom, Point3(0, 7.5, 0), 6.5)
print(f"\ncalibrated sigma @6.5dB: {sigma:.3e} (in-plane peak {sigma*10**(6.5/20):.3e})")

print("\n== marker curves at (0, 7.5, e) ==")
print(f"{'e':>4} {'mu_raw_clean':>13} {'mu_raw_noisy':>13} {'mu_img_clean':>13} {'mu_img_noisy':>13} {'blob/sigma_img':>14}")
rng = np.random.default_rng(42)
for e in [0, 1, 2, 3, 4, 5, 6, 8, 10]:
    tgt = Point3(0.0, 7.5, float(e))
    clean = simulate_frame(geom, tgt)
    noisy = simulate_frame(geom, tgt, sigma, rng=rng)
    img_c = das_reconstruct(clean, geom, grid)
    img_n = das_reconstruct(noisy, geom, grid)
    obs_c = top_intensity_pixels(img_c)
    obs_n = top_intensity_pixels(img_n)
    mu_rc = amplitude_marker(clean)
    mu_rn = amplitude_marker(noisy)
    mu_ic = image_marker(img_c, obs_c)
    mu_in = image_marker(img_n, obs_n)
    blob = np.abs(img_c.intensity).max()
    # image-domain noise scale: std of a noise-only reconstruction
    print(f"{e:>4} {mu_rc:>13.4e} {mu_rn:>13.4e} {mu_ic:>13.4e} {mu_in:>13.4e} {blob/sigma:>14.1f}")

# jitter of the noisy image marker at fixed e
for e in [0.0, 3.0, 5.0]:
    vals = []
    for s in range(8):
        r = np.random.default_rng(100 + s)
        fy = simulate_frame(geom, Point3(0, 7.5, e), sigma, rng=r)
        imn = das_reconstruct(fy, geom, grid)
        vals.append(image_marker(imn, top_intensity_pixels(imn)))
    vals = np.array(vals)
    print(f"e={e}: mu_img_noisy mean {vals.mean():.4e} +- {vals.std():.2e} (rel {vals.std()/vals.mean()*100:.1f}%)")

# raw marker: modulation vs jitter
vals0, vals6 = [], []
for s in range(8):
    r = np.random.default_rng(200 + s)
    vals0.append(amplitude_marker(simulate_frame(geom, Point3(0, 7.5, 0), sigma, rng=r)))
    r = np.random.default_rng(300 + s)
    vals6.append(amplitude_marker(simulate_frame(geom, Point3(0, 7.5, 6), sigma, rng=r)))
print(f"raw marker: e=0 {np.mean(vals0):.4e}+-{np.std(vals0):.1e}, e=6 {np.mean(vals6):.4e}+-{np.std(vals6):.1e}")

# --- 4. marker across depths (noisy, image window) ---
print("\n== noisy image marker vs e at several depths ==")
for a in (2.0, 7.5, 14.0):
    row = []
    for e in [0, 1, 2, 3, 4, 5, 6]:
        r = np.random.default_rng(7)
        fy = simulate_frame(geom, Point3(0, float(a), float(e)), sigma, rng=r)
        imn = das_reconstruct(fy, geom, grid)
        row.append(image_marker(imn, top_intensity_pixels(imn)))
    print(f"a={a}: " + " ".join(f"{v:.3e}" for v in row))

# --- 5. Gaussian-only marker oracle ---
r = np.random.default_rng(0)
g = r.normal(size=(64, 1400))
from scipy.stats import norm
z = norm.ppf(0.99)
closed = norm.pdf(z) / (1 - norm.cdf(z))
mc = np.mean([amplitude_marker(np.random.default_rng(i).normal(size=(64, 1400))) for i in range(30)])
print(f"\nGaussian-only marker: closed-form {closed:.4f}, MC {mc:.4f}")
