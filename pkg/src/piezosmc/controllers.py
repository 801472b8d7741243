"""Sliding-mode controller with partial-model feedforward, plus baselines.

The SMCPMC law is::

    u = u_hat + phi + eta * s + beta * sgn(s)

where ``s`` is a linear sliding surface in the tracking error and its
derivatives, ``u_hat`` inverts the identified stage model along the desired
trajectory and ``phi`` cancels the derivative part of ``s``.  The PI and
boundary-layer SMC controllers are the comparison baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .friction import sgn
from .plant import PlantParams, effective_alpha1, effective_alpha2n

__all__ = [
    "SlidingSurfaceSpec",
    "SmcpmcGains",
    "ReachingBound",
    "FeedforwardModel",
    "LowPassFilter",
    "PIController",
    "sliding_value",
    "feedforward_u_hat",
    "smcpmc_control",
    "pi_control",
    "boundary_smc_control",
    "lowpass_step",
    "reaching_margin",
    "SmcpmcController",
    "BoundarySmcController",
    "PIControllerLoop",
]


@dataclass(frozen=True)
class SlidingSurfaceSpec:
    """Coefficients ``lambdas[k]`` multiplying the k-th error derivative.

    ``lambdas[0]`` is normalised to 1.  The default is ``s = e + 3 de/dt``.
    """

    lambdas: tuple = (1.0, 3.0)

    def __post_init__(self) -> None:
        lam = tuple(float(x) for x in self.lambdas)
        object.__setattr__(self, "lambdas", lam)
        if not lam:
            raise ValueError("sliding surface needs at least one coefficient")
        if any(not x > 0.0 for x in lam):
            raise ValueError(f"all surface coefficients must be > 0, got {lam}")
        if lam[0] != 1.0:
            raise ValueError("lambdas[0] must be 1 (normalised surface)")

    @property
    def order(self) -> int:
        return len(self.lambdas)


@dataclass(frozen=True)
class SmcpmcGains:
    """Reaching gain ``eta``, switching gain ``beta`` and the ``phi`` multiplier."""

    eta: float = 863.1
    beta: float = 1.3
    phi_scale: float = 1.0 / 3.0

    def __post_init__(self) -> None:
        if not self.eta > 0.0 or not self.beta > 0.0:
            raise ValueError("eta and beta must be > 0")

    @property
    def chattering_band(self) -> float:
        return self.beta / self.eta


@dataclass(frozen=True)
class ReachingBound:
    """Disturbance bound ``D``, Lipschitz constant ``L`` and model-error bound ``rho_c``.

    All three are in control-input units (V) so they compare directly with
    ``eta * |s| + beta``.
    """

    D: float = 0.0
    L: float = 0.0
    rho_c: float = 0.0

    def __post_init__(self) -> None:
        if min(self.D, self.L, self.rho_c) < 0.0:
            raise ValueError("reaching bounds must be >= 0")


def sliding_value(e_derivatives: Sequence[float], spec: SlidingSurfaceSpec = SlidingSurfaceSpec()) -> float:
    """``s = sum_k lambdas[k] * e^(k)`` for ``e_derivatives = [e, de, ...]``."""
    if len(e_derivatives) != spec.order:
        raise ValueError(f"expected {spec.order} error derivatives, got {len(e_derivatives)}")
    return math.fsum(lam * e for lam, e in zip(spec.lambdas, e_derivatives))


def _phi(e_derivatives: Sequence[float], spec: SlidingSurfaceSpec, phi_scale: float) -> float:
    # ds/dt minus its highest-derivative term, i.e. sum_{k<n-1} lambda_k e^(k+1)
    lam = spec.lambdas
    if len(lam) < 2:
        return 0.0
    part = math.fsum(lam[k] * e_derivatives[k + 1] for k in range(len(lam) - 1))
    return phi_scale * part


def smcpmc_control(
    e: float,
    e_dot_filtered: float,
    u_hat: float,
    gains: SmcpmcGains = SmcpmcGains(),
    spec: SlidingSurfaceSpec = SlidingSurfaceSpec(),
) -> float:
    """Unsaturated SMCPMC output for a second-order surface.

    With the default gains this is
    ``u_hat + de/3 + 863.1 s + 1.3 sgn(s)``, ``s = e + 3 de``.
    """
    derivs = (e, e_dot_filtered)[: spec.order]
    s = sliding_value(derivs, spec)
    return u_hat + _phi(derivs, spec, gains.phi_scale) + gains.eta * s + gains.beta * sgn(s)


def boundary_smc_control(
    e: float,
    e_dot: float,
    gains: SmcpmcGains = SmcpmcGains(),
    boundary_width: float = 1e-3,
    spec: SlidingSurfaceSpec = SlidingSurfaceSpec(),
) -> float:
    """``eta * s + beta * sat(s / boundary_width)``; no model feedforward."""
    if not boundary_width > 0.0:
        raise ValueError("boundary_width must be > 0")
    s = sliding_value((e, e_dot)[: spec.order], spec)
    return gains.eta * s + gains.beta * min(1.0, max(-1.0, s / boundary_width))


def reaching_margin(
    s: float,
    e_norm: float,
    bound: ReachingBound,
    gains: SmcpmcGains = SmcpmcGains(),
) -> float:
    """``eta |s| + beta - (D + L |e| + rho_c)``; non-negative when reaching is guaranteed."""
    return gains.eta * abs(s) + gains.beta - (bound.D + bound.L * e_norm + bound.rho_c)


@dataclass
class LowPassFilter:
    """First-order low-pass, forward-Euler discretised, unit DC gain."""

    time_constant: float = 0.1
    state: float = 0.0

    def __post_init__(self) -> None:
        if not self.time_constant > 0.0:
            raise ValueError("time_constant must be > 0")

    def step(self, x: float, dt: float) -> float:
        if not dt > 0.0:
            raise ValueError("dt must be > 0")
        self.state += (dt / self.time_constant) * (x - self.state)
        return self.state

    def reset(self, value: float = 0.0) -> None:
        self.state = value


def lowpass_step(x: float, filt: LowPassFilter, dt: float) -> float:
    return filt.step(x, dt)


@dataclass
class FeedforwardModel:
    """Partial model of the stage inverted along the desired trajectory.

    Shares its coefficients with :class:`PlantParams` so that the feedforward
    and the simulated plant agree unless deliberately perturbed.
    """

    params: PlantParams = field(default_factory=PlantParams)

    def u_hat(
        self,
        v_d: float,
        v_d_delayed: float,
        a_d: float,
        u_dot_prev: float = 0.0,
        u_prev: float = 0.0,
    ) -> float:
        p = self.params
        a1v = effective_alpha1(v_d_delayed, p) * v_d_delayed
        base = a_d + a1v
        if v_d > p.v_cr:
            return (base + p.alpha2_pos) / p.alpha3
        if v_d < -p.v_cr:
            return (base - effective_alpha2n(v_d, u_dot_prev, p)) / p.alpha3
        # stick band: the stiction term uses the previous command
        net = p.alpha3 * u_prev - a1v
        alpha_s = net if abs(net) < p.alpha_s_cap else p.alpha_s_cap
        direction = sgn(v_d) or sgn(a_d)
        return (base + alpha_s * direction) / p.alpha3


def feedforward_u_hat(
    v_d: float,
    v_d_delayed: float,
    a_d: float,
    u_dot_prev: float = 0.0,
    model: FeedforwardModel | None = None,
    u_prev: float = 0.0,
) -> float:
    """Model-inverse feedforward voltage for desired velocity/acceleration."""
    model = model or FeedforwardModel()
    return model.u_hat(v_d, v_d_delayed, a_d, u_dot_prev, u_prev)


@dataclass
class PIController:
    """PI with trapezoidal integration and conditional-integration anti-windup.

    The integrator is additionally clamped so its own contribution never
    exceeds ``u_max``; the output is clipped to ``+-u_max``.
    """

    kp: float = 1.9e4
    ki: float = 6.6e5
    u_max: float = 10.0
    integral: float = 0.0
    e_prev: float = 0.0

    def __post_init__(self) -> None:
        if self.kp < 0.0 or self.ki < 0.0:
            raise ValueError("kp and ki must be >= 0")

    def _clip(self, u: float) -> float:
        return min(self.u_max, max(-self.u_max, u))

    def output(self, e: float) -> float:
        return self._clip(self.kp * e + self.ki * self.integral)

    def update(self, e: float, dt: float) -> float:
        if not dt > 0.0:
            raise ValueError("dt must be > 0")
        candidate = self.integral + 0.5 * (e + self.e_prev) * dt
        raw = self.kp * e + self.ki * candidate
        winding_up = abs(raw) > self.u_max and (candidate - self.integral) * raw > 0.0
        if not winding_up:
            self.integral = candidate
        if self.ki > 0.0:
            lim = self.u_max / self.ki
            self.integral = min(lim, max(-lim, self.integral))
        self.e_prev = e
        return self.output(e)

    def reset(self) -> None:
        self.integral = 0.0
        self.e_prev = 0.0


def pi_control(e: float, dt: float, gains: PIController) -> float:
    """Advance the PI state by one sample and return the clipped output."""
    return gains.update(e, dt)


# Closed-loop wrappers.  Each holds per-loop state and exposes
# ``update(e, e_dot_f, ref_sample, dt) -> u`` (unsaturated).


@dataclass
class SmcpmcController:
    """SMCPMC loop state: previous command and its rate.

    The negative-direction feedforward depends on the sign of the rate of the
    command it contributes to.  Both branches are tried and the one whose
    resulting (saturated) command agrees with its own rate assumption is
    used; if neither agrees the previous command is held.
    """

    gains: SmcpmcGains = field(default_factory=SmcpmcGains)
    surface: SlidingSurfaceSpec = field(default_factory=SlidingSurfaceSpec)
    model: FeedforwardModel = field(default_factory=FeedforwardModel)
    u_sat: float = 10.0
    u_prev: float = 0.0
    u_dot_prev: float = 0.0
    name: str = "smcpmc"

    def _sat(self, u: float) -> float:
        return min(self.u_sat, max(-self.u_sat, u))

    def update(self, e: float, e_dot_f: float, ref, dt: float) -> float:
        y_d, v_d, a_d, v_d_delayed = ref
        p = self.model.params
        fb = smcpmc_control(e, e_dot_f, 0.0, self.gains, self.surface)
        if v_d < -p.v_cr and p.alpha2n_rule == "switched":
            u_dec = self._sat(self.model.u_hat(v_d, v_d_delayed, a_d, -1.0, self.u_prev) + fb)
            if u_dec < self.u_prev:
                return u_dec
            u_inc = self._sat(self.model.u_hat(v_d, v_d_delayed, a_d, 1.0, self.u_prev) + fb)
            if u_inc >= self.u_prev:
                return u_inc
            return self.u_prev
        return self.model.u_hat(v_d, v_d_delayed, a_d, self.u_dot_prev, self.u_prev) + fb

    def commit(self, u_applied: float, dt: float) -> None:
        self.u_dot_prev = (u_applied - self.u_prev) / dt
        self.u_prev = u_applied


@dataclass
class BoundarySmcController:
    gains: SmcpmcGains = field(default_factory=SmcpmcGains)
    surface: SlidingSurfaceSpec = field(default_factory=SlidingSurfaceSpec)
    boundary_width: float = 1e-3
    name: str = "boundary_smc"

    def update(self, e: float, e_dot_f: float, ref, dt: float) -> float:
        return boundary_smc_control(e, e_dot_f, self.gains, self.boundary_width, self.surface)

    def commit(self, u_applied: float, dt: float) -> None:
        pass


@dataclass
class PIControllerLoop:
    pi: PIController = field(default_factory=PIController)
    name: str = "pi"

    def update(self, e: float, e_dot_f: float, ref, dt: float) -> float:
        return self.pi.update(e, dt)

    def commit(self, u_applied: float, dt: float) -> None:
        pass
