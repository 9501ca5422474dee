"""Reconstruct an image from projective measurements only.

On hardware there is no access to amplitudes; the image must be estimated
from measurement counts.  For each pixel x, the ratio of (color=1, x) to
(color=0, x) outcomes estimates tan^2(theta_x).  This script sweeps the shot
budget and shows the estimation error falling roughly as 1/sqrt(shots).
"""

import numpy as np

from frqi_pairs import frqi

rng = np.random.default_rng(0)
side = 8  # n = 3, the working resolution of the classifiers
truth = frqi.AngleImage(3, rng.uniform(0, np.pi / 2, side * side))
state = frqi.encode_direct(truth)

print(f"{side}x{side} random image, {frqi.qubit_budget(3)} qubits")
print(f"{'shots':>9}  {'mean abs angle err':>18}  {'unsampled pixels':>16}")
for shots in (100, 1_000, 10_000, 100_000):
    counts = frqi.measure_all(state, 3, shots, seed=1)
    est = frqi.retrieve_from_shots(counts, 3)
    mae = np.abs(est.angles - truth.angles).mean()
    missing = int((est.support == 0).sum())
    print(f"{shots:>9}  {mae:>18.5f}  {missing:>16}")

print("\nAt 10_000 shots the reconstruction is visually faithful; each extra")
print("decade of shots buys roughly a 3x error reduction (1/sqrt scaling).")
