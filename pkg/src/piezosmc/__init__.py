"""Friction modelling, identification and sliding-mode tracking control of a piezo stage."""

from .friction import (FrictionParams, coulomb_friction, drag_friction, sgn, static_friction,
                       viscous_friction)
from .plant import (DisturbanceInput, PlantParams, PlantState, SimConfig, SimulationError, Trace,
                    acceleration, simulate, steady_state_velocity, step)
from .controllers import (FeedforwardModel, LowPassFilter, PIController, ReachingBound,
                          SlidingSurfaceSpec, SmcpmcGains, boundary_smc_control, feedforward_u_hat,
                          lowpass_step, pi_control, reaching_margin, sliding_value, smcpmc_control)
from .sysid import (IdentificationError, PulseDataset, UnsettledPlateauError, build_ls_system,
                    fit_plant_params, pulse_dataset_from_simulation, read_params_file, solve_ls,
                    steady_state_from_trace, validate_model, write_params_file)
from .harness import (ConfigError, ControllerSpec, DisturbanceSpec, ExperimentConfig,
                      ReferenceTrajectory, TrackingMetrics, TrackingTrace, compare_controllers,
                      emit_outputs, make_reference, run_tracking)

__version__ = "0.1.0"
