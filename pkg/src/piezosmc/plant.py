"""Fixed-step simulator of the piezoelectric linear stage.

The stage is a second-order system with direction-dependent viscous and
Coulomb friction, a stiction deadzone around zero velocity and a viscous
term acting on the velocity delayed by ``tau``::

    v > v_cr     : dv/dt = -a1 v(t-tau) - a2p          + a3 u + d
    |v| <= v_cr  : dv/dt = -a1 v(t-tau) - stiction     + a3 u + d
    v < -v_cr    : dv/dt = -a1 v(t-tau) + a2n(v, du/dt) + a3 u + d

with ``a1`` selected by the sign of ``v(t-tau)``.  Integration is
semi-implicit Euler with a zero-crossing clamp so the stick branch is
resolved even though a single step overshoots the tiny ``v_cr`` band.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

from .friction import sgn

__all__ = [
    "PlantParams",
    "PlantState",
    "SimConfig",
    "DisturbanceInput",
    "Trace",
    "SimulationError",
    "effective_alpha1",
    "effective_alpha2n",
    "acceleration",
    "step",
    "simulate",
    "steady_state_velocity",
    "delay_steps",
]


class SimulationError(RuntimeError):
    """Raised when the state or input of a run becomes non-finite."""


@dataclass(frozen=True)
class PlantParams:
    """Identified coefficients of the stage model.

    Defaults are the least-squares values from the pulse experiments plus
    the hand-tuned delay, crossover velocity and stiction cap.

    ``alpha2n_rule`` selects how the negative-direction Coulomb term is
    evaluated: ``"switched"`` uses the input-rate dependent rule (exponential
    while the input decreases, constant otherwise), ``"constant"`` always
    uses ``alpha2_neg``.
    """

    alpha1_pos: float = 104.0154
    alpha1_neg: float = 117.1441
    alpha2_pos: float = 3.1023
    alpha2_neg: float = 6.8216
    alpha2_neg_base: float = 5.8216
    alpha2n_rate: float = 30.0
    alpha3: float = 6.0
    alpha_s_cap: float = 0.6
    tau: float = 3.5e-3
    v_cr: float = 5e-6
    alpha2n_rule: str = "switched"

    def __post_init__(self) -> None:
        for name in ("alpha1_pos", "alpha1_neg", "alpha3", "alpha_s_cap", "v_cr"):
            value = getattr(self, name)
            if not value > 0.0:
                raise ValueError(f"{name} must be > 0, got {value!r}")
        for name in ("alpha2_pos", "alpha2_neg", "alpha2_neg_base", "alpha2n_rate"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not self.tau >= 0.0:
            raise ValueError(f"tau must be >= 0, got {self.tau!r}")
        if self.alpha2n_rule not in ("switched", "constant"):
            raise ValueError(f"unknown alpha2n_rule {self.alpha2n_rule!r}")

    def replace(self, **changes) -> "PlantParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SimConfig:
    """Integration step ``dt`` (s), run length ``duration`` (s), input limit ``u_sat`` (V)."""

    duration: float = 1.0
    dt: float = 5e-5
    u_sat: float = 10.0

    def __post_init__(self) -> None:
        if not self.dt > 0.0:
            raise ValueError(f"dt must be > 0, got {self.dt!r}")
        if not self.duration > 0.0:
            raise ValueError(f"duration must be > 0, got {self.duration!r}")
        if not self.u_sat > 0.0:
            raise ValueError(f"u_sat must be > 0, got {self.u_sat!r}")

    def check_against(self, params: PlantParams) -> None:
        if params.tau > 0.0 and self.dt > params.tau:
            raise ValueError(f"dt={self.dt} exceeds the delay tau={params.tau}")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


class DisturbanceInput:
    """Bounded exogenous disturbance added to the acceleration.

    ``source`` is either a callable ``d(t)`` or a ``(times, values)`` table
    that is linearly interpolated.  Every query is checked against ``bound``.
    """

    def __init__(self, source=None, bound: float = 0.0):
        if bound < 0.0:
            raise ValueError("bound must be >= 0")
        self.bound = float(bound)
        if source is None:
            self._fn = None
        elif callable(source):
            self._fn = source
        else:
            times, values = (np.asarray(a, dtype=float) for a in source)
            self._fn = lambda t: float(np.interp(t, times, values))

    def __call__(self, t: float) -> float:
        if self._fn is None:
            return 0.0
        d = float(self._fn(t))
        if abs(d) > self.bound * (1.0 + 1e-12):
            raise ValueError(f"disturbance {d!r} at t={t!r} exceeds bound {self.bound!r}")
        return d

    @classmethod
    def zero(cls) -> "DisturbanceInput":
        return cls(None, 0.0)


def delay_steps(tau: float, dt: float) -> int:
    """Number of integration steps spanned by the delay ``tau``."""
    return int(round(tau / dt))


@dataclass
class PlantState:
    """Position ``y``, velocity ``v``, time ``t`` and the velocity history.

    ``history[0]`` is the velocity ``delay`` steps ago; the last entry is the
    current velocity.  The buffer is pre-filled with zeros, so the delayed
    velocity reads 0 until the run has advanced by ``tau``.
    """

    y: float = 0.0
    v: float = 0.0
    t: float = 0.0
    delay: int = 0
    history: deque = field(default_factory=deque)

    @classmethod
    def at_rest(cls, params: PlantParams, dt: float, y0: float = 0.0) -> "PlantState":
        k = delay_steps(params.tau, dt)
        return cls(y=y0, v=0.0, t=0.0, delay=k, history=deque([0.0] * (k + 1), maxlen=k + 1))

    @property
    def v_delayed(self) -> float:
        return self.history[0]

    def copy(self) -> "PlantState":
        return PlantState(self.y, self.v, self.t, self.delay, deque(self.history, maxlen=self.history.maxlen))


def effective_alpha1(v_delayed: float, params: PlantParams) -> float:
    """Viscous coefficient selected by the sign of the delayed velocity (ties go positive)."""
    return params.alpha1_neg if v_delayed < 0.0 else params.alpha1_pos


def effective_alpha2n(v: float, u_dot: float, params: PlantParams) -> float:
    """Negative-direction Coulomb term.

    While the input is decreasing (``u_dot < 0``) the term follows
    ``base + (1 - exp(-rate * v))``; otherwise it is ``alpha2_neg``.  A held
    input (``u_dot == 0``) uses the constant value, so constant-input pulses
    settle on the identified plateau.
    """
    if params.alpha2n_rule == "switched" and u_dot < 0.0:
        x = -params.alpha2n_rate * v
        if x > 700.0:
            raise SimulationError(f"rate-dependent Coulomb term overflowed at v={v!r}")
        return params.alpha2_neg_base + (1.0 - math.exp(x))
    return params.alpha2_neg


def _stick_net(u: float, v_delayed: float, d: float, params: PlantParams) -> float:
    return params.alpha3 * u - effective_alpha1(v_delayed, params) * v_delayed + d


def acceleration(
    v: float,
    v_delayed: float,
    u: float,
    u_dot: float = 0.0,
    d: float = 0.0,
    params: PlantParams = PlantParams(),
) -> float:
    """Right-hand side dv/dt for the current velocity ``v``.

    ``u`` must already be saturated.  In the stick band the friction cancels
    the net drive up to ``alpha_s_cap`` and beyond that opposes it with the
    cap magnitude.
    """
    a1v = effective_alpha1(v_delayed, params) * v_delayed
    if v > params.v_cr:
        return -a1v - params.alpha2_pos + params.alpha3 * u + d
    if v < -params.v_cr:
        return -a1v + effective_alpha2n(v, u_dot, params) + params.alpha3 * u + d
    net = params.alpha3 * u - a1v + d
    if abs(net) < params.alpha_s_cap:
        return 0.0
    return net - params.alpha_s_cap * sgn(net)


def step(
    state: PlantState,
    u: float,
    u_dot: float,
    d: float,
    dt: float,
    params: PlantParams,
) -> PlantState:
    """Advance ``state`` in place by one semi-implicit Euler step and return it.

    Inside the stick band with a sub-breakaway drive the velocity is pinned
    to zero.  A step whose velocity changes sign is clamped to zero when the
    drive evaluated at rest could not overcome stiction.
    """
    v = state.v
    v_del = state.history[0]
    if not (math.isfinite(u) and math.isfinite(u_dot) and math.isfinite(d)):
        raise SimulationError(f"non-finite input at t={state.t!r}: u={u!r} u_dot={u_dot!r} d={d!r}")

    if abs(v) <= params.v_cr and abs(_stick_net(u, v_del, d, params)) < params.alpha_s_cap:
        v_new = 0.0
    else:
        v_new = v + acceleration(v, v_del, u, u_dot, d, params) * dt
        if (v > 0.0 > v_new or v < 0.0 < v_new) and abs(
            _stick_net(u, v_del, d, params)
        ) < params.alpha_s_cap:
            v_new = 0.0

    y_new = state.y + 0.5 * (v + v_new) * dt
    if not (math.isfinite(v_new) and math.isfinite(y_new)):
        raise SimulationError(f"non-finite state at t={state.t!r}: y={y_new!r} v={v_new!r}")
    state.v = v_new
    state.y = y_new
    state.t += dt
    state.history.append(v_new)
    return state


@dataclass
class Trace:
    """Dense open-loop record sampled at every integration step."""

    t: np.ndarray
    y: np.ndarray
    v: np.ndarray
    u: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def to_csv(self, path: Union[str, Path], decimation: int = 1) -> Path:
        """Write ``t,y,v,u`` rows, keeping every ``decimation``-th sample."""
        if decimation < 1:
            raise ValueError("decimation must be >= 1")
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "y", "v", "u"])
            for i in range(0, len(self.t), decimation):
                w.writerow([repr(float(self.t[i])), repr(float(self.y[i])),
                            repr(float(self.v[i])), repr(float(self.u[i]))])
        return path


InputProfile = Union[Callable[[float], float], Sequence[float], np.ndarray]


def simulate(
    u_profile: InputProfile,
    config: SimConfig,
    params: PlantParams = PlantParams(),
    disturbance: DisturbanceInput | None = None,
    y0: float = 0.0,
) -> Trace:
    """Run the plant open loop under ``u_profile``.

    ``u_profile`` is a callable ``u(t)`` or an array with one sample per
    integration step (``config.n_steps + 1`` values).  The input is saturated
    to ``+-config.u_sat`` and its backward difference drives the rate
    dependent friction term.  Runs are deterministic.
    """
    config.check_against(params)
    n = config.n_steps
    dt = config.dt
    t = np.arange(n + 1) * dt
    if callable(u_profile):
        u_raw = np.array([float(u_profile(ti)) for ti in t])
    else:
        u_raw = np.asarray(u_profile, dtype=float)
        if u_raw.shape != (n + 1,):
            raise ValueError(f"u_profile has {u_raw.size} samples, expected {n + 1}")
    u = np.clip(u_raw, -config.u_sat, config.u_sat)
    dist = disturbance or DisturbanceInput.zero()

    y = np.empty(n + 1)
    v = np.empty(n + 1)
    state = PlantState.at_rest(params, dt, y0)
    y[0], v[0] = state.y, state.v
    u_prev = 0.0
    for i in range(n):
        ui = float(u[i])
        step(state, ui, (ui - u_prev) / dt, dist(t[i]), dt, params)
        u_prev = ui
        y[i + 1] = state.y
        v[i + 1] = state.v
    return Trace(t=t, y=y, v=v, u=u)


def steady_state_velocity(u: float, params: PlantParams = PlantParams()) -> float:
    """Plateau velocity under a constant input ``u``, 0 if the stage stays stuck."""
    drive = params.alpha3 * u
    if u > 0.0:
        if drive <= max(params.alpha_s_cap, params.alpha2_pos):
            return 0.0
        return (drive - params.alpha2_pos) / params.alpha1_pos
    if u < 0.0:
        if -drive <= max(params.alpha_s_cap, params.alpha2_neg):
            return 0.0
        return (drive + params.alpha2_neg) / params.alpha1_neg
    return 0.0
