"""Command-line batch driver.

Every subcommand reads one JSON config (``--config``) and writes its
files under ``--out``.  Failures print a single JSON line on stderr,
``{"error": <kind>, "message": <text>}``, and exit with 2 for a bad
config or 1 for a runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .harness import (
    ConfigError,
    ControllerSpec,
    ExperimentConfig,
    TrackingRunError,
    compare_controllers,
    emit_outputs,
    format_table,
    load_config,
    run_tracking,
    write_comparison_csv,
    write_metrics,
    write_phase_csv,
)
from .plant import PlantParams, SimConfig, SimulationError, simulate
from .stability import lyapunov_report
from .controllers import SmcpmcGains
from .sysid import (
    IdentificationError,
    PulseDataset,
    build_ls_system,
    fit_plant_params,
    read_params_file,
    write_params_file,
)

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
U64_MAX = 2 ** 64 - 1


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise ConfigError(message)


def _read_json(path: Path) -> dict:
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    return data


def _resolve(base: Path, p: str) -> Path:
    path = Path(p)
    return path if path.is_absolute() else base / path


def _plant_from(data: dict, base: Path) -> PlantParams:
    plant_d = dict(data.get("plant", {}) or {})
    params_file = plant_d.pop("params_file", None)
    try:
        if params_file is not None:
            return read_params_file(_resolve(base, params_file)).replace(**plant_d)
        return PlantParams(**plant_d)
    except (TypeError, ValueError, OSError) as exc:
        raise ConfigError(str(exc)) from exc


# --------------------------------------------------------------------------- commands


def cmd_identify(args) -> int:
    data = _read_json(args.config)
    source = data.get("dataset", "builtin")
    alpha3 = float(data.get("alpha3", 6.0))
    try:
        ds = PulseDataset.builtin() if source == "builtin" else PulseDataset.from_csv(_resolve(args.config.parent, source))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"bad dataset {source!r}: {exc}") from exc
    params = fit_plant_params(ds, PlantParams(alpha3=alpha3))
    system = build_ls_system(ds, alpha3)
    coef = np.array([params.alpha1_pos, params.alpha1_neg, params.alpha2_pos, params.alpha2_neg])
    resid = float(np.max(np.abs(system.X @ coef - system.Y)))
    args.out.mkdir(parents=True, exist_ok=True)
    path = write_params_file(params, args.out / "fitted_params.txt")
    print(f"alpha1_pos {params.alpha1_pos:.4f}  alpha1_neg {params.alpha1_neg:.4f}  "
          f"alpha2_pos {params.alpha2_pos:.4f}  alpha2_neg {params.alpha2_neg:.4f}  "
          f"residual_inf {resid:.5f}")
    print(f"wrote {path}")
    return EXIT_OK


def _input_profile(spec: dict):
    kind = spec.get("kind", "pulse")
    amp = float(spec.get("amplitude_v", 1.6))
    if kind == "pulse":
        start = float(spec.get("start_s", 0.05))
        stop = start + float(spec.get("width_s", 0.4))
        return lambda t: amp if start <= t < stop else 0.0
    if kind == "triangle":
        period = float(spec.get("period_s", 1.0))
        if not period > 0.0:
            raise ConfigError("input.period_s must be > 0")
        # zero-mean triangle starting at 0 and rising
        return lambda t: amp * (2.0 / math.pi) * math.asin(math.sin(2.0 * math.pi * t / period))
    if kind == "constant":
        return lambda t: amp
    raise ConfigError(f"unknown input kind {kind!r}")


def cmd_simulate(args) -> int:
    data = _read_json(args.config)
    plant = _plant_from(data, args.config.parent)
    sim_d = dict(data.get("sim", {}) or {})
    try:
        config = SimConfig(duration=float(sim_d.get("duration_s", 0.5)), dt=float(sim_d.get("dt_s", 5e-5)),
                           u_sat=float(sim_d.get("u_sat_v", 10.0)))
        config.check_against(plant)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    inputs = data.get("inputs") or [data.get("input", {})]
    args.out.mkdir(parents=True, exist_ok=True)
    for i, spec in enumerate(inputs):
        profile = _input_profile(dict(spec))
        trace = simulate(profile, config, plant, y0=float(data.get("y0_m", 0.0)))
        path = trace.to_csv(args.out / f"open_loop_{i}.csv", int(data.get("decimation", 1)))
        print(f"{spec.get('kind', 'pulse')} {float(spec.get('amplitude_v', 1.6)):+.3f} V  "
              f"final y {trace.y[-1]:.6e} m  peak |v| {np.max(np.abs(trace.v)):.6e} m/s  -> {path}")
    return EXIT_OK


def _experiment(args) -> ExperimentConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    return config


def cmd_track(args) -> int:
    config = _experiment(args)
    trace, metrics = run_tracking(config)
    paths = emit_outputs(trace, metrics, args.out, config.name)
    print(f"{config.name}: rms_error {metrics.rms_error:.6e} m  max_abs_error {metrics.max_abs_error:.6e} m")
    print(f"wrote {paths['trace']}")
    return EXIT_OK


def _compare_configs(args) -> list[ExperimentConfig]:
    data = _read_json(args.config)
    base_d = dict(data.get("base", {}) or {})
    base_d.pop("controller", None)
    ctrl_list = data.get("controllers") or [{"kind": "smcpmc"}, {"kind": "boundary_smc"}, {"kind": "pi"}]
    configs = []
    for entry in ctrl_list:
        entry = dict(entry)
        label = entry.pop("label", "")
        try:
            cfg = ExperimentConfig.from_dict({**base_d, "controller": entry, "label": label},
                                             base_dir=args.config.parent)
        except ConfigError:
            raise
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
        configs.append(cfg)
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise ConfigError("controller labels must be unique")
    return configs


def cmd_compare(args) -> int:
    configs = _compare_configs(args)
    rows = compare_controllers(configs, parallel=args.parallel)
    args.out.mkdir(parents=True, exist_ok=True)
    for r in rows:
        emit_outputs(r.trace, r.metrics, args.out, r.name)
    write_comparison_csv(rows, args.out / "comparison.csv")
    table = format_table(rows)
    (args.out / "comparison.txt").write_text(table + "\n")
    print(table)
    return EXIT_OK


def cmd_phase(args) -> int:
    config = _experiment(args)
    trace, metrics = run_tracking(config)
    emit_outputs(trace, metrics, args.out, config.name)
    path = write_phase_csv(trace, Path(args.out) / f"{config.name}_phase.csv")
    c = config.controller
    report = lyapunov_report(trace, SmcpmcGains(c.eta, c.beta, c.phi_scale))
    print(f"descent_fraction {report.descent_fraction:.4f} over {report.descent_samples} samples "
          f"(|s| > {report.band:.4e})  max|s| [0,1] {report.max_s_startup:.4e}  "
          f"max|s| [1,end] {report.max_s_after:.4e}")
    print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {
    "identify": cmd_identify,
    "simulate": cmd_simulate,
    "track": cmd_track,
    "compare": cmd_compare,
    "phase": cmd_phase,
}


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("--parallel must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="piezosmc", description="Piezo stage identification and tracking experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, required=True, help="JSON config file")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--seed", type=_seed, default=None, help="override the config seed")
        p.add_argument("--parallel", type=_positive, default=1, help="worker processes for compare")
    return parser


def _fail(kind: str, exc: BaseException, code: int) -> int:
    msg = " ".join(str(exc).split()) or type(exc).__name__
    print(json.dumps({"error": kind, "message": msg}), file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    except (TrackingRunError, SimulationError, IdentificationError, OSError, ArithmeticError,
            ValueError, RuntimeError) as exc:
        return _fail("runtime", exc, EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())
