"""Runtime checks of the sliding-mode reaching and descent conditions.

The bounds entering the reaching condition are estimated from an
open-loop replay of the feedforward along the reference: the model error
is the plant drift evaluated on the desired state minus the desired
acceleration, and the Lipschitz constant is the largest ratio of drift
difference to state error while plant and reference share a friction
branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .controllers import FeedforwardModel, ReachingBound, SmcpmcController, SmcpmcGains, reaching_margin
from .harness import ExperimentConfig, TrackingTrace, descent_fraction
from .plant import PlantState, acceleration, step

__all__ = ["OpenLoopResiduals", "open_loop_residuals", "measure_reaching_bound",
           "error_norms", "margins_along_trace", "LyapunovReport", "lyapunov_report"]


@dataclass
class OpenLoopResiduals:
    t: np.ndarray
    model_error: np.ndarray   # xi_tilde on the desired state, V
    drift_diff: np.ndarray    # |xi(x) - xi(x_d)|, V
    e_norm: np.ndarray        # ||(e, de, de(t - tau))||
    same_branch: np.ndarray


def _branch(v: float, v_cr: float) -> int:
    return 1 if v > v_cr else (-1 if v < -v_cr else 0)


def open_loop_residuals(config: ExperimentConfig) -> OpenLoopResiduals:
    """Replay the feedforward alone through the plant and record residuals."""
    p = config.plant
    ref = config.reference
    dt = config.sim.dt
    Ts = config.control_period_s
    sub = int(round(Ts / dt))
    n = int(round(config.sim.duration / Ts))
    ctrl = SmcpmcController(model=FeedforwardModel(p), u_sat=config.sim.u_sat)
    tau = p.tau
    a3 = p.alpha3
    state = PlantState.at_rest(p, dt, config.y0_m)

    t_out = np.empty(n)
    rho = np.empty(n)
    diff = np.empty(n)
    norm = np.empty(n)
    same = np.empty(n, dtype=bool)
    u_prev = 0.0
    for k in range(n):
        t = k * Ts
        y_d, v_d, a_d = ref.sample(t)
        v_d_del = ref.velocity(t - tau) if t >= tau else 0.0
        # zero error: the controller output is the feedforward alone
        u = min(config.sim.u_sat, max(-config.sim.u_sat, ctrl.update(0.0, 0.0, (y_d, v_d, a_d, v_d_del), Ts)))
        ctrl.commit(u, Ts)
        u_dot = (u - u_prev) / Ts
        xi_d = acceleration(v_d, v_d_del, u, u_dot, 0.0, p) - a3 * u
        xi = acceleration(state.v, state.v_delayed, u, u_dot, 0.0, p) - a3 * u
        t_out[k] = t
        rho[k] = (xi_d + a3 * u - a_d) / a3
        diff[k] = abs(xi - xi_d) / a3
        norm[k] = math.sqrt((y_d - state.y) ** 2 + (v_d - state.v) ** 2 + (v_d_del - state.v_delayed) ** 2)
        same[k] = _branch(state.v, p.v_cr) == _branch(v_d, p.v_cr) != 0
        for _ in range(sub):
            step(state, u, u_dot, 0.0, dt, p)
        u_prev = u
    return OpenLoopResiduals(t_out, rho, diff, norm, same)


def measure_reaching_bound(config: ExperimentConfig, disturbance_bound: float,
                           e_floor: float = 1e-6) -> ReachingBound:
    """Reaching-condition bounds in volts; ``disturbance_bound`` is in m/s^2."""
    r = open_loop_residuals(config)
    ok = r.same_branch & (r.e_norm > e_floor)
    L = float(np.max(r.drift_diff[ok] / r.e_norm[ok])) if np.any(ok) else 0.0
    rho_c = float(np.max(np.abs(r.model_error)))
    return ReachingBound(D=disturbance_bound / config.plant.alpha3, L=L, rho_c=rho_c)


def error_norms(trace: TrackingTrace, tau: float) -> np.ndarray:
    """``||(e, de, de(t - tau))||`` along a closed-loop trace (backward differences)."""
    if len(trace) < 2:
        return np.abs(trace.e)
    dt = float(trace.t[1] - trace.t[0])
    de = np.concatenate([[0.0], np.diff(trace.e) / dt])
    k = int(round(tau / dt))
    de_del = np.concatenate([np.zeros(k), de[: len(de) - k]]) if k else de
    return np.sqrt(trace.e ** 2 + de ** 2 + de_del ** 2)


def margins_along_trace(trace: TrackingTrace, bound: ReachingBound, gains: SmcpmcGains,
                        tau: float) -> np.ndarray:
    norms = error_norms(trace, tau)
    return np.array([reaching_margin(s, n, bound, gains) for s, n in zip(trace.s, norms)])


@dataclass(frozen=True)
class LyapunovReport:
    descent_fraction: float
    descent_samples: int
    band: float
    max_s_startup: float
    max_s_after: float

    @property
    def converges(self) -> bool:
        return self.max_s_after < self.max_s_startup

    def passes(self, min_fraction: float = 0.99) -> bool:
        return self.descent_fraction >= min_fraction and self.converges


def lyapunov_report(trace: TrackingTrace, gains: SmcpmcGains, t_split: float = 1.0,
                    band_factor: float = 10.0) -> LyapunovReport:
    """Descent of ``s * ds/dt`` outside ``band_factor * beta / eta`` and the s envelope."""
    band = band_factor * gains.chattering_band
    frac, count = descent_fraction(trace, band)
    early = np.abs(trace.s[trace.t <= t_split])
    late = np.abs(trace.s[trace.t >= t_split])
    return LyapunovReport(frac, count, band, float(early.max(initial=0.0)), float(late.max(initial=0.0)))
