"""Classical friction force laws.

All functions return the friction force with the sign convention that it
opposes motion when *subtracted* in the equations of motion, i.e. a positive
velocity gives a positive friction force.
"""

from __future__ import annotations

from dataclasses import dataclass

V_ZERO_TOL = 1e-9  # m/s; |v| at or below this counts as "at rest"


def sgn(x: float) -> float:
    """Signum with ``sgn(0) == 0``."""
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


def _check_coefficient(name: str, value: float) -> None:
    if not value >= 0.0:  # also rejects NaN
        raise ValueError(f"{name} must be >= 0, got {value!r}")


@dataclass(frozen=True)
class FrictionParams:
    """Coefficients of the four friction laws.

    Attributes
    ----------
    f_s : static friction bound (N)
    f_c : Coulomb magnitude (N)
    f_v : viscous coefficient (N s/m)
    f_d : drag coefficient (N s^2/m^2)
    """

    f_s: float = 0.0
    f_c: float = 0.0
    f_v: float = 0.0
    f_d: float = 0.0

    def __post_init__(self) -> None:
        for name in ("f_s", "f_c", "f_v", "f_d"):
            _check_coefficient(name, getattr(self, name))

    def total(self, f_a: float, v: float, v_zero_tol: float = V_ZERO_TOL) -> float:
        """Sum of all four laws at applied force ``f_a`` and velocity ``v``."""
        return (
            static_friction(f_a, v, self.f_s, v_zero_tol)
            + coulomb_friction(v, self.f_c)
            + viscous_friction(v, self.f_v)
            + drag_friction(v, self.f_d)
        )


def static_friction(f_a: float, v: float, f_s: float, v_zero_tol: float = V_ZERO_TOL) -> float:
    """Static (stiction) friction force.

    At rest the friction balances the applied force up to the bound ``f_s``;
    once the body moves, static friction vanishes.

    Parameters
    ----------
    f_a : applied force (N)
    v : velocity (m/s); ``|v| <= v_zero_tol`` is treated as zero
    f_s : static friction bound (N), must be non-negative
    """
    _check_coefficient("f_s", f_s)
    at_rest = abs(v) <= v_zero_tol
    if abs(f_a) < f_s:
        return f_a if at_rest else 0.0
    if at_rest:
        return f_s * sgn(f_a)
    return 0.0


def coulomb_friction(v: float, f_c: float) -> float:
    """Coulomb friction ``f_c * sgn(v)``."""
    _check_coefficient("f_c", f_c)
    return f_c * sgn(v)


def viscous_friction(v: float, f_v: float) -> float:
    """Viscous friction ``f_v * v``."""
    _check_coefficient("f_v", f_v)
    return f_v * v


def drag_friction(v: float, f_d: float) -> float:
    """Quadratic drag ``f_d * v * |v|``."""
    _check_coefficient("f_d", f_d)
    return f_d * v * abs(v)
