"""Closed-loop comparison of SMCPMC against the PI and boundary-layer SMC baselines.

Both references are 10 mm sinusoids starting from rest; metrics exclude
the first second.  Each 6 s run takes several seconds on one core.
"""

import math

from piezosmc.harness import (ControllerSpec, ExperimentConfig, ReferenceTrajectory,
                              compare_controllers, format_table)

for omega in (math.pi, 2 * math.pi):
    ref = ReferenceTrajectory(freq_rad_s=omega)
    configs = [ExperimentConfig(controller=ControllerSpec(kind=k), reference=ref)
               for k in ("smcpmc", "boundary_smc", "pi")]
    rows = compare_controllers(configs)
    print(f"\nreference omega = {omega / math.pi:.0f} pi rad/s")
    print(format_table(rows))
