"""Open-loop pulse responses of the identified plant.

Shows the plateau velocities against the closed form, the stiction hold
for small inputs, and the round trip: simulate the ten pulses, extract
plateaus, refit, and compare against the generating coefficients.
"""

import numpy as np

from piezosmc import PlantParams, SimConfig, simulate, steady_state_velocity
from piezosmc.sysid import BUILTIN_PULSE_DATA, fit_plant_params, pulse_dataset_from_simulation

p = PlantParams()
cfg = SimConfig(duration=0.5)

print("plateaus of 0.4 s pulses")
for u in (1.3, 1.6, 2.0, -1.8, -2.3):
    tr = simulate(lambda t, u=u: u if t < 0.4 else 0.0, cfg, p)
    plateau = tr.v[(tr.t > 0.3) & (tr.t < 0.4)].mean()
    print(f"  {u:+.1f} V  simulated {plateau:+.6f}  closed form {steady_state_velocity(u, p):+.6f} m/s"
          f"  final v {tr.v[-1]:+.1e}")

# 6 * 0.09 = 0.54 is below the 0.6 stiction cap: no motion at all
tr = simulate(lambda t: 0.09, SimConfig(duration=5.0), p)
print(f"\n0.09 V for 5 s: max |y| = {float(np.max(np.abs(tr.y)))!r}")

# the cap is smaller than the Coulomb term, so 0.2 V creeps instead
tr = simulate(lambda t: 0.2, SimConfig(duration=1.0), p)
print(f"0.2 V for 1 s: y(1) = {tr.y[-1]:.3e} m (stick-slip creep)")

data = pulse_dataset_from_simulation([u for u, _ in BUILTIN_PULSE_DATA], p)
fit = fit_plant_params(data, p)
print("\nround trip (refit / generator - 1):")
for name in ("alpha1_pos", "alpha1_neg", "alpha2_pos", "alpha2_neg"):
    print(f"  {name:<11} {getattr(fit, name) / getattr(p, name) - 1:+.2e}")
