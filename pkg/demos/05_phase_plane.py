"""Sliding variable in the phase plane, with and without a reaching phase.

Starting on the reference, s stays inside the chattering band and the
descent check has nothing to test.  Starting 20 mm away, s first has to
reach the surface; s * ds/dt <= 0 along that approach.
"""

import numpy as np

from piezosmc.controllers import SmcpmcGains
from piezosmc.harness import ExperimentConfig, phase_pairs, run_tracking
from piezosmc.plant import SimConfig
from piezosmc.stability import lyapunov_report, measure_reaching_bound, margins_along_trace

gains = SmcpmcGains()
for y0 in (0.0, -0.02):
    cfg = ExperimentConfig(sim=SimConfig(duration=3.0, dt=6.25e-6), y0_m=y0)
    trace, _ = run_tracking(cfg)
    rep = lyapunov_report(trace, gains)
    s, s_dot = phase_pairs(trace)
    print(f"\ny0 = {y0:+.3f} m")
    print(f"  max|s| in [0,1] s {rep.max_s_startup:.3e}, after {rep.max_s_after:.3e}")
    print(f"  samples with |s| > {rep.band:.3e}: {rep.descent_samples}, "
          f"descending fraction {rep.descent_fraction:.3f}")
    print(f"  final |s| {abs(s[-1]):.2e}, mean |ds/dt| {np.mean(np.abs(s_dot)):.2e}")

bound = measure_reaching_bound(ExperimentConfig(sim=SimConfig(duration=3.0, dt=6.25e-6)), 1.0)
trace, _ = run_tracking(ExperimentConfig(sim=SimConfig(duration=3.0, dt=6.25e-6)))
m = margins_along_trace(trace, bound, gains, 3.5e-3)
print(f"\nmeasured bounds D={bound.D:.3f} V, L={bound.L:.2f}, rho_c={bound.rho_c:.3f} V")
print(f"reaching margin: min {m.min():.3f} V, negative on {np.mean(m < 0):.1%} of samples")
