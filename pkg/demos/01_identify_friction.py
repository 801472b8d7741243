"""Identify the stage friction coefficients from pulse plateaus.

Each 0.4 s constant-voltage pulse drives the stage to a plateau velocity
where the acceleration vanishes.  One linear equation per pulse, stacked
over ten pulses, gives a least-squares problem in the viscous and Coulomb
coefficients of each direction.
"""

import numpy as np

from piezosmc import PulseDataset, build_ls_system, fit_plant_params, solve_ls

data = PulseDataset.builtin()
print("pulse data (V, m/s):")
for u, v, direction in data.rows:
    print(f"  {u:+5.2f}  {v:+.5f}  dir {direction:+d}")

system = build_ls_system(data, alpha3=6.0)
coef = solve_ls(system)
print("\nregressor X (a1p, a1n, a2p, a2n) and target Y:")
for row, y in zip(system.X, system.Y):
    print("  ", np.array2string(row, precision=5, suppress_small=True), f" {y:6.2f}")

print(f"\ncond(X) = {np.linalg.cond(system.X):.1f}")
for name, value in zip(system.COLUMNS, coef):
    print(f"  {name:<11} {value:10.5f}")

# the fit leaves a visible residual: the measured data is not exactly linear
resid = system.X @ coef - system.Y
print(f"max |X a - Y| = {np.max(np.abs(resid)):.4f}")

params = fit_plant_params(data)
print(f"\nfitted plant: alpha1 +{params.alpha1_pos:.4f}/-{params.alpha1_neg:.4f}, "
      f"alpha2 +{params.alpha2_pos:.4f}/-{params.alpha2_neg:.4f}")
