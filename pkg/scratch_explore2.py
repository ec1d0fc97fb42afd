"""Scratch: tune marker window size; DAS speed options; envelope monotonicity."""
import time

import numpy as np
from scipy.signal import hilbert

from nnktrack.geometry import ArrayGeometry, ImageGrid, Point3
from nnktrack.simulate import clean_frame, calibrate_noise, simulate_frame
from nnktrack.beamform import das_reconstruct, delay_table
from nnktrack.features import amplitude_marker, top_intensity_pixels, image_marker

geom = ArrayGeometry()
grid = ImageGrid()
sigma = calibrate_noise(geom, Point3(0, 7.5, 0), 6.5)

# --- envelope max monotonicity at a=13 ---
es = np.arange(0, 10.001, 0.5)
for a in (13.0, 14.5):
    m = []
    for e in es:
        d = clean_frame(geom, Point3(0, a, e))
        env = np.abs(hilbert(d, axis=1))
        m.append(env.max())
    mono = all(m[i] > m[i+1] for i in range(len(m)-1))
    print(f"a={a}: envelope max strictly decreasing: {mono}")

# --- window size scan ---
print("\n== noisy image marker vs e for different window half-sizes ==")
depths = [2.0, 4.0, 7.5, 10.0, 12.0, 14.0]
elevs = [0, 1, 2, 3, 4, 5, 6, 8, 10]
for half in (0.4, 0.5, 0.75, 1.0):
    print(f"\n-- window +-{half} mm --")
    for a in depths:
        row = []
        for e in elevs:
            r = np.random.default_rng(11)
            fy = simulate_frame(geom, Point3(0, float(a), float(e)), sigma, rng=r)
            imn = das_reconstruct(fy, geom, grid)
            row.append(image_marker(imn, top_intensity_pixels(imn), half, half))
        print(f"a={a:>5}: " + " ".join(f"{v:.3e}" for v in row))

# jitter at the chosen operating points, half=0.5
print("\n== jitter (half=0.5) ==")
for (a, e) in [(7.5, 0.0), (7.5, 3.0), (7.5, 5.0), (14.0, 0.0), (14.0, 3.0), (2.0, 5.0)]:
    vals = []
    for s in range(10):
        r = np.random.default_rng(1000 + s)
        fy = simulate_frame(geom, Point3(0, a, e), sigma, rng=r)
        imn = das_reconstruct(fy, geom, grid)
        vals.append(image_marker(imn, top_intensity_pixels(imn), 0.5, 0.5))
    vals = np.array(vals)
    print(f"a={a}, e={e}: {vals.mean():.4e} +- {vals.std():.2e} (rel {vals.std()/vals.mean()*100:.1f}%)")

# --- DAS speed options ---
fr = simulate_frame(geom, Point3(0.0, 7.5, 0.0))
indices, pad = delay_table(geom, grid)
idx32 = indices.astype(np.int32)
data32 = fr.data.astype(np.float32)

pad64 = np.empty(pad + 1); pad64[:pad] = fr.data.ravel(); pad64[pad] = 0
t0 = time.perf_counter()
for _ in range(5):
    out = pad64[indices].sum(axis=0)
print(f"\nf64 fancy+sum: {(time.perf_counter()-t0)/5*1e3:.1f} ms")

pad32 = np.empty(pad + 1, np.float32); pad32[:pad] = data32.ravel(); pad32[pad] = 0
t0 = time.perf_counter()
for _ in range(5):
    out32 = np.take(pad32, idx32).sum(axis=0, dtype=np.float64)
print(f"f32 take + f64 sum: {(time.perf_counter()-t0)/5*1e3:.1f} ms")

t0 = time.perf_counter()
acc = np.zeros(indices.shape[1])
for _ in range(5):
    acc[:] = 0.0
    for s in range(indices.shape[0]):
        acc += pad64[indices[s]]
print(f"f64 per-source loop: {(time.perf_counter()-t0)/5*1e3:.1f} ms")

try:
    from numba import njit, prange

    @njit(parallel=True, cache=True)
    def das_kernel(padded, idx, out):
        ns, npx = idx.shape
        for p in prange(npx):
            acc = 0.0
            for s in range(ns):
                acc += padded[idx[s, p]]
            out[p] = acc

    out_nb = np.zeros(indices.shape[1])
    das_kernel(pad64, indices, out_nb)  # compile
    t0 = time.perf_counter()
    for _ in range(10):
        das_kernel(pad64, indices, out_nb)
    print(f"numba parallel: {(time.perf_counter()-t0)/10*1e3:.1f} ms; match: {np.allclose(out_nb, out)}")
except Exception as exc:
    print("numba unavailable:", exc)
