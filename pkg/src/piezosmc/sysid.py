"""Least-squares identification of the stage friction coefficients.

Each constant-input pulse settles to a plateau where the acceleration
vanishes, giving one linear equation per pulse::

    v > 0 :  v * a1p + a2p = a3 * u
    v < 0 : |v| * a1n + a2n = a3 * |u|

Stacking them yields ``X @ [a1p, a1n, a2p, a2n] = Y``, solved in the
least-squares sense.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .plant import PlantParams, SimConfig, Trace, simulate

__all__ = [
    "PulseDataset",
    "LsSystem",
    "IdentificationError",
    "UnsettledPlateauError",
    "BUILTIN_PULSE_DATA",
    "steady_state_from_trace",
    "build_ls_system",
    "solve_ls",
    "fit_plant_params",
    "pulse_dataset_from_simulation",
    "validate_model",
    "write_params_file",
    "read_params_file",
]

COND_LIMIT = 1e8

# (input amplitude V, plateau velocity m/s) from the 0.4 s pulse experiments
BUILTIN_PULSE_DATA = (
    (-1.8, -0.03393),
    (-2.0, -0.04622),
    (-2.1, -0.04991),
    (-2.3, -0.05562),
    (-2.5, -0.07120),
    (1.3, 0.04465),
    (1.5, 0.05742),
    (1.6, 0.06222),
    (1.7, 0.06863),
    (2.0, 0.08519),
)


class IdentificationError(ValueError):
    """The regression cannot be formed or solved reliably."""


class UnsettledPlateauError(IdentificationError):
    """The velocity had not settled within the averaging window."""


@dataclass(frozen=True)
class PulseDataset:
    """Rows of ``(u_amplitude, v_steady, direction)`` with ``direction = sgn(v_steady)``."""

    rows: tuple

    def __post_init__(self) -> None:
        clean = []
        for row in self.rows:
            u, v = float(row[0]), float(row[1])
            if v == 0.0:
                raise IdentificationError(f"plateau velocity must be non-zero (u={u})")
            direction = 1 if v > 0.0 else -1
            if len(row) > 2 and int(row[2]) != direction:
                raise IdentificationError(f"direction {row[2]} disagrees with v_steady={v}")
            clean.append((u, v, direction))
        object.__setattr__(self, "rows", tuple(clean))

    def __len__(self) -> int:
        return len(self.rows)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> "PulseDataset":
        return cls(tuple((u, v) for u, v in pairs))

    @classmethod
    def builtin(cls) -> "PulseDataset":
        return cls.from_pairs(BUILTIN_PULSE_DATA)

    @classmethod
    def from_csv(cls, path: Path | str) -> "PulseDataset":
        """Read ``u_volts,v_steady`` rows (header required)."""
        with Path(path).open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"u_volts", "v_steady"} <= set(reader.fieldnames):
                raise IdentificationError(f"{path}: expected header u_volts,v_steady")
            return cls.from_pairs((float(r["u_volts"]), float(r["v_steady"])) for r in reader)

    def to_csv(self, path: Path | str) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["u_volts", "v_steady"])
            for u, v, _ in self.rows:
                w.writerow([repr(u), repr(v)])
        return path


@dataclass
class LsSystem:
    """Regressor ``X`` (columns a1p, a1n, a2p, a2n) and target ``Y``."""

    X: np.ndarray
    Y: np.ndarray

    COLUMNS = ("alpha1_pos", "alpha1_neg", "alpha2_pos", "alpha2_neg")


def steady_state_from_trace(
    trace: Trace,
    window: float = 0.1,
    t_end: float | None = None,
    max_rel_std: float = 0.05,
) -> float:
    """Mean velocity over the last ``window`` seconds of a constant-input plateau.

    Without ``t_end`` the plateau is the last run of constant non-zero input
    in the trace (the whole trace if the input never changes).  Raises
    :class:`UnsettledPlateauError` when the standard deviation over the
    window exceeds ``max_rel_std`` of the mean.
    """
    t = np.asarray(trace.t)
    u = np.asarray(trace.u)
    v = np.asarray(trace.v)
    if t_end is None:
        idx = np.flatnonzero(u != 0.0)
        if idx.size == 0:
            hi = len(t)
        else:
            last = idx[-1]
            run = last
            while run > 0 and u[run - 1] == u[last]:
                run -= 1
            hi = last + 1
        t_end = float(t[hi - 1])
    sel = (t > t_end - window + 1e-12) & (t <= t_end + 1e-12)
    if np.count_nonzero(sel) < 2:
        raise IdentificationError(f"window {window} s holds fewer than two samples")
    if t_end - window < float(t[0]) - 1e-12:
        raise IdentificationError(f"trace shorter than the {window} s window")
    seg = v[sel]
    mean = float(np.mean(seg))
    std = float(np.std(seg))
    if mean == 0.0 or std > max_rel_std * abs(mean):
        rel = float("inf") if mean == 0.0 else std / abs(mean)
        raise UnsettledPlateauError(
            f"unsettled plateau: relative std {rel:.3g} exceeds {max_rel_std:.3g} over {window} s"
        )
    return mean


def build_ls_system(data: PulseDataset, alpha3: float = 6.0) -> LsSystem:
    """Stack one equation per plateau; needs two rows in each direction."""
    n_pos = sum(1 for r in data.rows if r[2] > 0)
    n_neg = len(data.rows) - n_pos
    if n_pos < 2 or n_neg < 2:
        raise IdentificationError(
            f"need >= 2 rows per direction to identify both pairs, got {n_pos} positive / {n_neg} negative"
        )
    X = np.zeros((len(data.rows), 4))
    Y = np.empty(len(data.rows))
    for i, (u, v, direction) in enumerate(data.rows):
        if direction > 0:
            X[i, 0] = v
            X[i, 2] = 1.0
        else:
            X[i, 1] = abs(v)
            X[i, 3] = 1.0
        Y[i] = alpha3 * abs(u)
    return LsSystem(X, Y)


def solve_ls(system: LsSystem, cond_limit: float = COND_LIMIT) -> np.ndarray:
    """Minimiser of ``||X A - Y||_2`` via SVD, guarded by the condition number."""
    X = np.asarray(system.X, dtype=float)
    cond = np.linalg.cond(X) if X.size else np.inf
    if not np.isfinite(cond) or cond > cond_limit:
        raise IdentificationError(f"regressor is singular or ill-conditioned (cond={cond:.3g})")
    A, *_ = np.linalg.lstsq(X, np.asarray(system.Y, dtype=float), rcond=None)
    return A


def fit_plant_params(data: PulseDataset, base: PlantParams = PlantParams()) -> PlantParams:
    """Fit the four friction coefficients and merge them into ``base``.

    The rate-dependent negative Coulomb branch keeps its offset of 1 below
    the fitted constant value.
    """
    a1p, a1n, a2p, a2n = solve_ls(build_ls_system(data, base.alpha3))
    return base.replace(
        alpha1_pos=float(a1p),
        alpha1_neg=float(a1n),
        alpha2_pos=float(a2p),
        alpha2_neg=float(a2n),
        alpha2_neg_base=float(a2n) - 1.0,
    )


def pulse_trace(amplitude: float, params: PlantParams, width: float = 0.4, lead: float = 0.05,
                tail: float = 0.05, dt: float = 5e-5) -> Trace:
    """Open-loop response to a single rectangular pulse."""
    start, stop = lead, lead + width
    config = SimConfig(duration=lead + width + tail, dt=dt)
    n = config.n_steps
    t = np.arange(n + 1) * dt
    u = np.where((t >= start - 1e-12) & (t < stop - 1e-12), amplitude, 0.0)
    return simulate(u, config, params)


def pulse_dataset_from_simulation(
    amplitudes: Iterable[float],
    params: PlantParams = PlantParams(),
    width: float = 0.4,
    window: float = 0.1,
) -> PulseDataset:
    """Simulate one pulse per amplitude and collect the plateau velocities."""
    pairs = []
    for amp in amplitudes:
        tr = pulse_trace(amp, params, width)
        pairs.append((amp, steady_state_from_trace(tr, window)))
    return PulseDataset.from_pairs(pairs)


@dataclass(frozen=True)
class ValidationMetrics:
    rms_velocity_error: float
    max_velocity_error: float


def validate_model(
    params: PlantParams,
    u_profile: np.ndarray | Callable[[float], float],
    reference: Trace,
    config: SimConfig | None = None,
) -> ValidationMetrics:
    """Replay ``u_profile`` through ``params`` and compare velocities with ``reference``."""
    if config is None:
        dt = float(reference.t[1] - reference.t[0])
        config = SimConfig(duration=float(reference.t[-1] - reference.t[0]), dt=dt)
    model = simulate(u_profile, config, params)
    if len(model.t) != len(reference.t) or not np.allclose(model.t, reference.t, rtol=0, atol=1e-9):
        raise IdentificationError("time base of the reference trace does not match the simulation")
    err = model.v - np.asarray(reference.v)
    return ValidationMetrics(float(np.sqrt(np.mean(err * err))), float(np.max(np.abs(err))))


_PARAM_FIELDS = {f.name: f.type for f in fields(PlantParams)}


def write_params_file(params: PlantParams, path: Path | str) -> Path:
    """``key: value`` lines, one per :class:`PlantParams` field."""
    path = Path(path)
    lines = []
    for key, value in params.to_dict().items():
        lines.append(f"{key}: {value if isinstance(value, str) else repr(float(value))}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_params_file(path: Path | str) -> PlantParams:
    values: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key: value'")
        key, raw = (x.strip() for x in line.split(":", 1))
        if key not in _PARAM_FIELDS:
            raise ValueError(f"{path}:{lineno}: unknown parameter {key!r}")
        values[key] = raw if key == "alpha2n_rule" else float(raw)
    return PlantParams(**values)
