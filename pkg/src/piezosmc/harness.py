"""Closed-loop tracking experiments.

Builds reference trajectories, runs a controller against the simulated
stage with a zero-order hold at the control period, and reduces the
resulting traces to comparison metrics.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .controllers import (
    BoundarySmcController,
    FeedforwardModel,
    PIController,
    PIControllerLoop,
    SlidingSurfaceSpec,
    SmcpmcController,
    SmcpmcGains,
    LowPassFilter,
    sliding_value,
)
from .plant import DisturbanceInput, PlantParams, PlantState, SimConfig, SimulationError, step
from .sysid import read_params_file

__all__ = [
    "ReferenceTrajectory",
    "ControllerSpec",
    "DisturbanceSpec",
    "ExperimentConfig",
    "TrackingTrace",
    "TrackingMetrics",
    "make_reference",
    "run_tracking",
    "compute_metrics",
    "compare_controllers",
    "emit_outputs",
    "phase_pairs",
    "descent_fraction",
    "ConfigError",
]

# 40 kHz loop; slower loops put the default-gain SMCPMC into a limit cycle
# against the delayed viscous term.  The plant takes four sub-steps per sample.
DEFAULT_CONTROL_PERIOD = 2.5e-5
DEFAULT_PLANT_DT = 6.25e-6

REFERENCE_KINDS = ("sinusoid", "triangle", "pulse", "constant")
CONTROLLER_KINDS = ("smcpmc", "boundary_smc", "pi")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


# --------------------------------------------------------------------------- references


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Desired position with exact analytic derivatives.

    ``sinusoid``: ``offset + amplitude * sin(freq * t + phase)``; the
    defaults give ``0.01 (1 + sin(pi t - pi/2))`` m, which starts at rest.
    ``triangle``: symmetric triangle wave of peak ``amplitude`` about
    ``offset`` with period ``2 pi / freq``.
    ``pulse``: ``offset + amplitude`` on ``[start, start + width)``.
    ``constant``: ``offset``.
    """

    kind: str = "sinusoid"
    amplitude_m: float = 0.01
    freq_rad_s: float = math.pi
    phase_rad: float = -math.pi / 2
    offset_m: float = 0.01
    start_s: float = 0.0
    width_s: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in REFERENCE_KINDS:
            raise ConfigError(f"unknown reference kind {self.kind!r}")
        if self.kind in ("sinusoid", "triangle") and not self.freq_rad_s > 0.0:
            raise ConfigError("freq_rad_s must be > 0")

    def sample(self, t: float) -> tuple[float, float, float]:
        """``(y_d, v_d, a_d)`` at time ``t``."""
        A, w = self.amplitude_m, self.freq_rad_s
        if self.kind == "sinusoid":
            arg = w * t + self.phase_rad
            return (self.offset_m + A * math.sin(arg), A * w * math.cos(arg), -A * w * w * math.sin(arg))
        if self.kind == "triangle":
            period = 2.0 * math.pi / w
            x = ((t / period) + 0.25) % 1.0  # phase so that y(0) = offset rising
            slope = 4.0 * A / period
            if x < 0.5:
                return (self.offset_m + A * (4.0 * x - 1.0), slope, 0.0)
            return (self.offset_m + A * (3.0 - 4.0 * x), -slope, 0.0)
        if self.kind == "pulse":
            on = self.start_s <= t < self.start_s + self.width_s
            return (self.offset_m + (A if on else 0.0), 0.0, 0.0)
        return (self.offset_m, 0.0, 0.0)

    def velocity(self, t: float) -> float:
        return self.sample(t)[1]


def make_reference(spec: dict | ReferenceTrajectory | None = None) -> ReferenceTrajectory:
    """Build a reference from a config mapping (unit-suffixed keys)."""
    if isinstance(spec, ReferenceTrajectory):
        return spec
    spec = dict(spec or {})
    known = {f.name for f in fields(ReferenceTrajectory)}
    unknown = set(spec) - known
    if unknown:
        raise ConfigError(f"unknown reference fields {sorted(unknown)}")
    return ReferenceTrajectory(**spec)


# --------------------------------------------------------------------------- config


@dataclass(frozen=True)
class ControllerSpec:
    kind: str = "smcpmc"
    eta: float = 863.1
    beta: float = 1.3
    phi_scale: float = 1.0 / 3.0
    surface_lambdas: tuple = (1.0, 3.0)
    boundary_width_m: float = 1e-3
    kp_v_per_m: float = 1.9e4
    ki_v_per_m_s: float = 6.6e5
    # feedforward model overrides (None: same as the plant)
    model_params: dict | None = None

    def __post_init__(self) -> None:
        if self.kind not in CONTROLLER_KINDS:
            raise ConfigError(f"unknown controller kind {self.kind!r}")
        object.__setattr__(self, "surface_lambdas", tuple(self.surface_lambdas))

    def build(self, plant: PlantParams, u_sat: float):
        surface = SlidingSurfaceSpec(self.surface_lambdas)
        gains = SmcpmcGains(self.eta, self.beta, self.phi_scale)
        if self.kind == "smcpmc":
            model_params = plant.replace(**self.model_params) if self.model_params else plant
            return SmcpmcController(gains, surface, FeedforwardModel(model_params), u_sat)
        if self.kind == "boundary_smc":
            return BoundarySmcController(gains, surface, self.boundary_width_m)
        return PIControllerLoop(PIController(self.kp_v_per_m, self.ki_v_per_m_s, u_sat))


@dataclass(frozen=True)
class DisturbanceSpec:
    """``none``, ``sine`` (``amplitude * sin(freq t)``) or ``noise``.

    ``noise`` draws a piecewise-constant uniform sequence in
    ``[-amplitude, amplitude]`` held for ``hold_s`` from the experiment seed.
    Units are those of the acceleration (m/s^2).
    """

    kind: str = "none"
    amplitude: float = 0.0
    freq_rad_s: float = 0.0
    hold_s: float = 1e-3

    def __post_init__(self) -> None:
        if self.kind not in ("none", "sine", "noise"):
            raise ConfigError(f"unknown disturbance kind {self.kind!r}")
        if self.amplitude < 0.0:
            raise ConfigError("disturbance amplitude must be >= 0")

    def build(self, duration: float, seed: int) -> DisturbanceInput:
        if self.kind == "none" or self.amplitude == 0.0:
            return DisturbanceInput.zero()
        A = self.amplitude
        if self.kind == "sine":
            w = self.freq_rad_s
            return DisturbanceInput(lambda t: A * math.sin(w * t), A)
        n = int(math.ceil(duration / self.hold_s)) + 2
        values = np.random.default_rng(seed).uniform(-A, A, n)
        hold = self.hold_s
        return DisturbanceInput(lambda t: float(values[min(int(t / hold), n - 1)]), A)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines one closed-loop run."""

    plant: PlantParams = field(default_factory=PlantParams)
    controller: ControllerSpec = field(default_factory=ControllerSpec)
    reference: ReferenceTrajectory = field(default_factory=ReferenceTrajectory)
    sim: SimConfig = field(default_factory=lambda: SimConfig(duration=6.0, dt=DEFAULT_PLANT_DT))
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    control_period_s: float = DEFAULT_CONTROL_PERIOD
    filter_time_constant_s: float = 0.1
    transient_s: float = 1.0
    quantization_m: float | None = None
    y0_m: float = 0.0
    seed: int = 0
    label: str = ""

    def __post_init__(self) -> None:
        ratio = self.control_period_s / self.sim.dt
        if self.control_period_s <= 0.0 or abs(ratio - round(ratio)) > 1e-6 or round(ratio) < 1:
            raise ConfigError("control_period_s must be a positive multiple of sim.dt")
        if self.quantization_m is not None and not self.quantization_m > 0.0:
            raise ConfigError("quantization_m must be > 0 when given")
        if not 0.0 <= self.transient_s < self.sim.duration:
            raise ConfigError("transient_s must lie in [0, duration)")
        try:
            self.sim.check_against(self.plant)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def name(self) -> str:
        return self.label or self.controller.kind

    def replace(self, **changes) -> "ExperimentConfig":
        from dataclasses import replace

        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sim"] = {"duration_s": self.sim.duration, "dt_s": self.sim.dt, "u_sat_v": self.sim.u_sat}
        d["controller"]["surface_lambdas"] = list(self.controller.surface_lambdas)
        return d

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        """Parse a JSON-compatible tree.

        ``plant`` may be inline coefficients or ``{"params_file": path}``
        pointing at a fitted-parameter document (relative to ``base_dir``).
        """
        data = dict(data)
        try:
            plant_d = dict(data.pop("plant", {}) or {})
            params_file = plant_d.pop("params_file", None)
            if params_file is not None:
                path = Path(params_file)
                if base_dir is not None and not path.is_absolute():
                    path = base_dir / path
                plant = read_params_file(path).replace(**plant_d)
            else:
                plant = PlantParams(**plant_d)
            sim_d = dict(data.pop("sim", {}) or {})
            sim = SimConfig(
                duration=float(sim_d.pop("duration_s", 6.0)),
                dt=float(sim_d.pop("dt_s", DEFAULT_PLANT_DT)),
                u_sat=float(sim_d.pop("u_sat_v", 10.0)),
            )
            if sim_d:
                raise ConfigError(f"unknown sim fields {sorted(sim_d)}")
            controller = ControllerSpec(**(data.pop("controller", {}) or {}))
            reference = make_reference(data.pop("reference", {}) or {})
            disturbance = DisturbanceSpec(**(data.pop("disturbance", {}) or {}))
            return cls(plant=plant, controller=controller, reference=reference, sim=sim,
                       disturbance=disturbance, **data)
        except ConfigError:
            raise
        except (TypeError, ValueError, OSError) as exc:
            raise ConfigError(str(exc)) from exc


# --------------------------------------------------------------------------- run


@dataclass
class TrackingTrace:
    """Closed-loop samples at the control period; ``e == y_d - y`` pointwise."""

    t: np.ndarray
    y_d: np.ndarray
    y: np.ndarray
    e: np.ndarray
    u: np.ndarray
    s: np.ndarray

    COLUMNS = ("t", "y_d", "y", "e", "u", "s")

    def __len__(self) -> int:
        return len(self.t)

    @classmethod
    def empty(cls) -> "TrackingTrace":
        z = np.empty(0)
        return cls(z, z, z, z, z, z)

    def window(self, t_start: float, t_end: float) -> np.ndarray:
        return (self.t >= t_start - 1e-12) & (self.t <= t_end + 1e-12)


@dataclass(frozen=True)
class TrackingMetrics:
    rms_error: float
    max_abs_error: float
    t_start: float
    t_end: float
    control_effort_rms: float
    chatter_index: float


def compute_metrics(trace: TrackingTrace, t_start: float = 1.0, t_end: float | None = None) -> TrackingMetrics:
    """Error and effort statistics over ``[t_start, t_end]``."""
    if len(trace) == 0:
        return TrackingMetrics(0.0, 0.0, t_start, t_end or t_start, 0.0, 0.0)
    t_end = float(trace.t[-1]) if t_end is None else t_end
    m = trace.window(t_start, t_end)
    e = trace.e[m]
    u = trace.u[m]
    du = np.abs(np.diff(u))
    return TrackingMetrics(
        rms_error=float(np.sqrt(np.mean(e * e))) if e.size else 0.0,
        max_abs_error=float(np.max(np.abs(e))) if e.size else 0.0,
        t_start=float(t_start),
        t_end=float(t_end),
        control_effort_rms=float(np.sqrt(np.mean(u * u))) if u.size else 0.0,
        chatter_index=float(np.mean(du)) if du.size else 0.0,
    )


class TrackingRunError(RuntimeError):
    """Closed loop diverged; ``partial`` holds the samples recorded so far."""

    def __init__(self, message: str, partial: TrackingTrace):
        super().__init__(message)
        self.partial = partial


def run_tracking(config: ExperimentConfig) -> tuple[TrackingTrace, TrackingMetrics]:
    """Simulate one closed-loop experiment.

    At each control instant the position is measured (optionally quantised),
    the error derivative is formed by backward difference and low-pass
    filtered, the controller output is saturated and held while the plant is
    integrated over ``control_period_s / dt`` sub-steps.
    """
    p = config.plant
    sim = config.sim
    Ts = config.control_period_s
    dt = sim.dt
    sub = int(round(Ts / dt))
    n = int(round(sim.duration / Ts))
    ref = config.reference
    surface = SlidingSurfaceSpec(config.controller.surface_lambdas)
    ctrl = config.controller.build(p, sim.u_sat)
    dist = config.disturbance.build(sim.duration, config.seed)
    filt = LowPassFilter(config.filter_time_constant_s)
    q = config.quantization_m
    u_sat = sim.u_sat
    tau = p.tau

    out = np.empty((6, n + 1))
    state = PlantState.at_rest(p, dt, config.y0_m)
    e_prev = None
    u_prev = 0.0
    for k in range(n + 1):
        t = k * Ts
        y_meas = state.y if q is None else q * round(state.y / q)
        y_d, v_d, a_d = ref.sample(t)
        v_d_del = ref.velocity(t - tau) if t >= tau else 0.0
        e = y_d - y_meas
        e_dot = 0.0 if e_prev is None else (e - e_prev) / Ts
        e_prev = e
        e_dot_f = filt.step(e_dot, Ts)
        s = sliding_value((e, e_dot_f)[: surface.order], surface)
        u = ctrl.update(e, e_dot_f, (y_d, v_d, a_d, v_d_del), Ts)
        if not math.isfinite(u):
            partial = _pack(out[:, :k], TrackingTrace)
            raise TrackingRunError(f"non-finite control at t={t!r}", partial)
        u = min(u_sat, max(-u_sat, u))
        ctrl.commit(u, Ts)
        out[:, k] = (t, y_d, y_meas, e, u, s)
        if k == n:
            break
        u_dot = (u - u_prev) / Ts
        u_prev = u
        try:
            for j in range(sub):
                step(state, u, u_dot, dist(t + j * dt), dt, p)
        except SimulationError as exc:
            raise TrackingRunError(str(exc), _pack(out[:, : k + 1], TrackingTrace)) from exc
    trace = _pack(out, TrackingTrace)
    return trace, compute_metrics(trace, config.transient_s, sim.duration)


def _pack(arr: np.ndarray, cls):
    return cls(*(arr[i].copy() for i in range(arr.shape[0])))


# --------------------------------------------------------------------------- analysis


def phase_pairs(trace: TrackingTrace) -> tuple[np.ndarray, np.ndarray]:
    """``(s, s_dot)`` with ``s_dot`` by backward difference; first sample dropped."""
    if len(trace) < 2:
        return np.empty(0), np.empty(0)
    dt = np.diff(trace.t)
    return trace.s[1:], np.diff(trace.s) / dt


def descent_fraction(trace: TrackingTrace, band: float, t_start: float = 0.0) -> tuple[float, int]:
    """Fraction of samples with ``s * s_dot <= 0`` among those with ``|s| > band``.

    Returns ``(fraction, count)``; with no qualifying samples the fraction
    is 1.0 and the count 0.
    """
    s, s_dot = phase_pairs(trace)
    m = (np.abs(s) > band) & (trace.t[1:] >= t_start)
    count = int(np.count_nonzero(m))
    if count == 0:
        return 1.0, 0
    return float(np.count_nonzero(s[m] * s_dot[m] <= 0.0)) / count, count


# --------------------------------------------------------------------------- comparison


@dataclass
class ComparisonRow:
    name: str
    metrics: TrackingMetrics
    trace: TrackingTrace


def _run_one(config: ExperimentConfig):
    return run_tracking(config)


def compare_controllers(configs: Sequence[ExperimentConfig], parallel: int = 1) -> list[ComparisonRow]:
    """Run each config and return rows ranked by RMS error (ascending)."""
    if not configs:
        return []
    first = configs[0]
    for c in configs[1:]:
        if c.reference != first.reference or c.sim.duration != first.sim.duration or c.plant != first.plant:
            raise ConfigError("compared configs must share plant, reference and duration")
    if parallel > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_run_one, configs))
    else:
        results = [run_tracking(c) for c in configs]
    rows = [ComparisonRow(c.name, m, tr) for c, (tr, m) in zip(configs, results)]
    return sorted(rows, key=lambda r: r.metrics.rms_error)


def format_table(rows: Iterable[ComparisonRow]) -> str:
    lines = [f"{'rank':<5}{'controller':<16}{'rms_error_m':>14}{'max_abs_error_m':>17}"
             f"{'effort_rms_v':>14}{'chatter_v':>12}"]
    for i, r in enumerate(rows, 1):
        m = r.metrics
        lines.append(f"{i:<5}{r.name:<16}{m.rms_error:>14.6e}{m.max_abs_error:>17.6e}"
                     f"{m.control_effort_rms:>14.4f}{m.chatter_index:>12.4f}")
    return "\n".join(lines)


# --------------------------------------------------------------------------- outputs


def _fmt(x: float) -> str:
    return repr(float(x))


def write_trace_csv(trace: TrackingTrace, path: Path) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TrackingTrace.COLUMNS)
        cols = [getattr(trace, c) for c in TrackingTrace.COLUMNS]
        for i in range(len(trace)):
            w.writerow([_fmt(c[i]) for c in cols])
    return path


def write_metrics(metrics: TrackingMetrics, path: Path) -> Path:
    path.write_text("".join(f"{k}: {_fmt(v)}\n" for k, v in asdict(metrics).items()))
    return path


def read_metrics(path: Path) -> dict[str, float]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            key, value = line.split(":", 1)
            out[key.strip()] = float(value)
    return out


PLOT_SCRIPT = '''\
"""Render tracking error and control signal from {csv_name}."""
import csv
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{csv_name}"
cols = {{"t": [], "e": [], "u": []}}
with open(path, newline="") as fh:
    for row in csv.DictReader(fh):
        for k in cols:
            cols[k].append(float(row[k]))

fig, (ax_e, ax_u) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
ax_e.plot(cols["t"], [1e3 * e for e in cols["e"]])
ax_e.set_ylabel("tracking error (mm)")
ax_u.plot(cols["t"], cols["u"])
ax_u.set_ylabel("control (V)")
ax_u.set_xlabel("t (s)")
fig.tight_layout()
fig.savefig("{png_name}", dpi=120)
'''


def emit_outputs(trace: TrackingTrace, metrics: TrackingMetrics, out_dir: Path | str,
                 stem: str = "run") -> dict[str, Path]:
    """Write ``<stem>_trace.csv``, ``<stem>_metrics.txt`` and ``<stem>_plot.py``."""
    out_dir = Path(out_dir)
    paths = {
        "trace": out_dir / f"{stem}_trace.csv",
        "metrics": out_dir / f"{stem}_metrics.txt",
        "plot": out_dir / f"{stem}_plot.py",
    }
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_trace_csv(trace, paths["trace"])
        write_metrics(metrics, paths["metrics"])
        paths["plot"].write_text(PLOT_SCRIPT.format(csv_name=paths["trace"].name, png_name=f"{stem}_plot.png"))
    except OSError as exc:
        raise OSError(f"failed writing outputs under {out_dir}: {exc}") from exc
    return paths


def write_comparison_csv(rows: Sequence[ComparisonRow], path: Path) -> Path:
    """Aligned multi-controller trace: ``t`` then ``e_<name>,u_<name>`` per row."""
    names = [r.name for r in rows]
    t = rows[0].trace.t
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"{c}_{n}" for n in names for c in ("e", "u")])
        for i in range(len(t)):
            w.writerow([_fmt(t[i])] + [_fmt(getattr(r.trace, c)[i]) for r in rows for c in ("e", "u")])
    return path


def write_phase_csv(trace: TrackingTrace, path: Path) -> Path:
    s, s_dot = phase_pairs(trace)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["s", "s_dot"])
        for a, b in zip(s, s_dot):
            w.writerow([_fmt(a), _fmt(b)])
    return path


def load_config(path: Path | str) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    return ExperimentConfig.from_dict(data, base_dir=path.parent)
