"""Fit and select a pixel-to-temperature model.

The calibration problem is one-dimensional: the hottest pixel inside a face
box against a contact-thermometer reading. Six model families compete under
seeded 5-fold cross-validation; the winner must additionally survive a
plausibility screen: on a population known to be afebrile, no prediction may
exceed 38 C. A flexible model that memorizes one hot training point loses to
a shrunk ridge line here, which is exactly the failure mode the screen is
for.
"""

from pathlib import Path

from thermotrack.synthscene import generate_calibration_set
from thermotrack.thermoreg import (
    grid_search,
    load_model,
    save_model,
    select_model,
)

OUT = Path("demo_output/calibration")
OUT.mkdir(parents=True, exist_ok=True)

# A hundred synthetic ground-truth pairs: body temperatures around 36.6 C
# with a cold tail, pixels from the inverse line plus sensor noise.
samples = generate_calibration_set(100, beta0=20.0, beta1=0.1, seed=42)
print(f"{len(samples)} calibration samples, "
      f"temps {min(s.temperature_c for s in samples):.1f}"
      f"-{max(s.temperature_c for s in samples):.1f} C")

report = grid_search(samples, k_folds=5, seed=0)
print("\ntop of the cross-validation ranking:")
for line in report.to_text().splitlines()[:8]:
    print(" ", line)

# Screen against healthy-population pixels (here: the calibration pixels
# themselves, everything below the fever range).
screening = [s.max_pixel for s in samples if s.temperature_c < 37.5]
model = select_model(samples, report, screening_pixels=screening, ceiling_c=38.0)
print(f"\nselected: {model.kind} {model.hyperparams}")
print(f"  cv_mse={model.provenance['cv_mean_mse']:.4f}  cv_r2={model.provenance['cv_mean_r2']:.4f}")
print(f"  slope={model.params['slope']:.6f} C/intensity  intercept={model.params['intercept']:.4f} C")

# Persistence is bit-exact for the linear family: reload and compare.
path = OUT / "deployed.json"
save_model(model, path)
reloaded = load_model(path)
assert all(reloaded.predict(p) == model.predict(p) for p in range(0, 256, 7))
print(f"\nmodel persisted to {path} (reload predicts bit-identically)")
print(f"predict(150) = {reloaded.predict(150):.2f} C, predict(188) = {reloaded.predict(188):.2f} C")
