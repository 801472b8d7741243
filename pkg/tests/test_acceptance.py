"""Acceptance gate: one verdict line per criterion, printed in the pytest summary.

Closed-loop runs are cached per module so criteria that share a run (ranking,
descent, grid refinement) simulate it once.  Run directly with
``python tests/test_acceptance.py`` or via pytest.
"""

import json
import math
import re
import subprocess
import sys
import time
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from piezosmc.cli import main as cli_main
from piezosmc.controllers import SmcpmcGains
from piezosmc.harness import (
    DEFAULT_PLANT_DT,
    ControllerSpec,
    DisturbanceSpec,
    ExperimentConfig,
    ReferenceTrajectory,
    run_tracking,
    write_trace_csv,
)
from piezosmc.plant import PlantParams, SimConfig, simulate, steady_state_velocity
from piezosmc.stability import lyapunov_report, margins_along_trace, measure_reaching_bound
from piezosmc.sysid import BUILTIN_PULSE_DATA, fit_plant_params, pulse_dataset_from_simulation, read_params_file

P = PlantParams()
GAINS = SmcpmcGains()
OMEGAS = (math.pi, 2 * math.pi)
KINDS = ("smcpmc", "boundary_smc", "pi")


def experiment(kind="smcpmc", omega=math.pi, dt=DEFAULT_PLANT_DT, disturbance=DisturbanceSpec(), y0=0.0):
    return ExperimentConfig(controller=ControllerSpec(kind=kind),
                            reference=ReferenceTrajectory(freq_rad_s=omega),
                            sim=SimConfig(duration=6.0, dt=dt),
                            disturbance=disturbance, y0_m=y0)


@lru_cache(maxsize=None)
def tracked(kind="smcpmc", omega=math.pi, dt=DEFAULT_PLANT_DT, disturbance=DisturbanceSpec(), y0=0.0):
    t0 = time.perf_counter()
    trace, metrics = run_tracking(experiment(kind, omega, dt, disturbance, y0))
    return trace, metrics, time.perf_counter() - t0


def criterion6(trace):
    rep = lyapunov_report(trace, GAINS, t_split=1.0, band_factor=10.0)
    return rep.passes(0.99), rep


# --------------------------------------------------------------------------- 1


def test_criterion_1_identification(tmp_path, acceptance):
    cfg = tmp_path / "identify.json"
    cfg.write_text(json.dumps({"dataset": "builtin"}))
    t0 = time.perf_counter()
    code = cli_main(["identify", "--config", str(cfg), "--out", str(tmp_path)])
    elapsed = time.perf_counter() - t0
    p = read_params_file(tmp_path / "fitted_params.txt")
    got = np.array([p.alpha1_pos, p.alpha1_neg, p.alpha2_pos, p.alpha2_neg])
    want = np.array([104.0154, 117.1441, 3.1023, 6.8216])
    rel = np.abs(got / want - 1.0)
    ok = code == 0 and np.all(rel <= 1e-3) and elapsed < 1.0
    acceptance(1, ok, f"coefficients {np.round(got, 5).tolist()} max rel err {rel.max():.2e} (<=1e-3), "
                      f"{elapsed:.3f} s (<1 s)")
    assert ok


# --------------------------------------------------------------------------- 2


def test_criterion_2_round_trip(acceptance):
    t0 = time.perf_counter()
    data = pulse_dataset_from_simulation([u for u, _ in BUILTIN_PULSE_DATA], P)
    fit = fit_plant_params(data, P)
    elapsed = time.perf_counter() - t0
    names = ("alpha1_pos", "alpha1_neg", "alpha2_pos", "alpha2_neg")
    rel = np.array([abs(getattr(fit, n) / getattr(P, n) - 1.0) for n in names])
    ok = bool(np.all(rel <= 1e-2)) and elapsed < 10.0
    acceptance(2, ok, f"max rel err {rel.max():.2e} (<=1e-2), {elapsed:.2f} s (<10 s)")
    assert ok


# --------------------------------------------------------------------------- 3


def test_criterion_3_plateau(acceptance):
    cfg = SimConfig(duration=0.5)
    out = {}
    for u in (1.6, -2.3):
        tr = simulate(lambda t, u=u: u if t < 0.4 else 0.0, cfg, P)
        out[u] = float(tr.v[(tr.t > 0.3) & (tr.t < 0.4)].mean())
    ok = (abs(out[1.6] / 0.062468 - 1) <= 1e-2 and abs(out[1.6] / 0.06222 - 1) <= 5e-3
          and abs(out[-2.3] / -0.05957 - 1) <= 1e-2)
    acceptance(3, ok, f"1.6 V -> {out[1.6]:.6f} m/s (closed form {steady_state_velocity(1.6):.6f}, "
                      f"{100 * (out[1.6] / 0.06222 - 1):+.2f}% vs measured); -2.3 V -> {out[-2.3]:.6f} m/s")
    assert ok


# --------------------------------------------------------------------------- 4


def test_criterion_4_stiction_hold(acceptance):
    inputs = (0.09, -0.09, 0.06, -0.03, 0.0)
    worst = 0.0
    for u in inputs:
        tr = simulate(lambda t, u=u: u, SimConfig(duration=5.0), P)
        worst = max(worst, float(np.max(np.abs(tr.y))), float(np.max(np.abs(tr.v))))
    ok = worst == 0.0
    acceptance(4, ok, f"max |y|,|v| over 5 s for u in {inputs}: {worst!r} (exact 0 required)")
    assert ok


# --------------------------------------------------------------------------- 5


def test_criterion_5_ranking(acceptance):
    parts, ok = [], True
    slowest = 0.0
    for w in OMEGAS:
        rms = {}
        for k in KINDS:
            _, m, secs = tracked(k, w)
            rms[k] = m.rms_error
            slowest = max(slowest, secs)
        ok &= rms["smcpmc"] < rms["boundary_smc"] and rms["smcpmc"] < rms["pi"]
        parts.append(f"w={w / math.pi:.0f}pi: " + ", ".join(f"{k} {v:.3e}" for k, v in rms.items()))
    ok &= slowest < 30.0
    acceptance(5, ok, "; ".join(parts) + f"; slowest run {slowest:.1f} s (<30 s)")
    assert ok


# --------------------------------------------------------------------------- 6


def test_criterion_6_lyapunov_descent(acceptance):
    trace, _, _ = tracked("smcpmc", math.pi)
    ok, rep = criterion6(trace)
    # informational: an offset start has a genuine reaching phase
    off, _, _ = tracked("smcpmc", math.pi, y0=-0.02)
    _, rep_off = criterion6(off)
    acceptance(6, ok, f"descent {rep.descent_fraction:.4f} over {rep.descent_samples} samples with |s|>"
                      f"{rep.band:.4g} (>=0.99); max|s| [1,6] {rep.max_s_after:.4e} < [0,1] {rep.max_s_startup:.4e}"
                      f" [{'yes' if rep.converges else 'no'}]; offset start y0=-0.02: descent "
                      f"{rep_off.descent_fraction:.4f} over {rep_off.descent_samples} samples")
    assert ok


# --------------------------------------------------------------------------- 7

# fixed panel of |d| <= 1 m/s^2 disturbances; the implication must hold for each
NOISE_SEEDS = (0, 1, 2, 3, 4)
SINE_FREQS = (2.0, 20.0, 200.0)


def _panel_runs():
    for seed in NOISE_SEEDS:
        cfg = experiment(disturbance=DisturbanceSpec("noise", 1.0, hold_s=1e-3)).replace(seed=seed)
        yield f"noise seed {seed}", cfg
    for w in SINE_FREQS:
        yield f"sine {w:g} rad/s", experiment(disturbance=DisturbanceSpec("sine", 1.0, w))


def test_criterion_7_reaching_condition(acceptance):
    bound = measure_reaching_bound(experiment(), disturbance_bound=1.0)
    failures, vacuous, rows = [], 0, []
    for name, cfg in _panel_runs():
        trace, _ = run_tracking(cfg)
        margins = margins_along_trace(trace, bound, GAINS, P.tau)
        holds = bool(np.all(margins >= 0.0))
        c6, rep = criterion6(trace)
        if not holds:
            vacuous += 1
        elif not c6:
            failures.append(name)
        rows.append(f"{name}: margin>=0 {holds}, crit6 {c6}")
    ok = not failures
    acceptance(7, ok, f"bound D={bound.D:.4f} L={bound.L:.3f} rho_c={bound.rho_c:.4f} (V); "
                      f"{len(rows)} disturbances, antecedent false on {vacuous}, implication broken on "
                      f"{failures or 'none'}")
    print("\n".join(rows))
    assert ok


# --------------------------------------------------------------------------- 8


def test_criterion_8_numerical_hygiene(tmp_path, acceptance):
    changes = {}
    for w in OMEGAS:
        for k in KINDS:
            _, m, _ = tracked(k, w)
            _, m2, _ = tracked(k, w, DEFAULT_PLANT_DT / 2)
            changes[(k, w)] = abs(m2.rms_error / m.rms_error - 1.0)
    trace, _, _ = tracked("smcpmc", math.pi)
    rerun, _ = run_tracking(experiment("smcpmc", math.pi))
    a = write_trace_csv(trace, tmp_path / "a.csv").read_bytes()
    b = write_trace_csv(rerun, tmp_path / "b.csv").read_bytes()
    identical = a == b
    worst = max(changes, key=changes.get)
    ok = identical and max(changes.values()) < 1e-2
    detail = ", ".join(f"{k}@{w / math.pi:.0f}pi {100 * c:.2f}%" for (k, w), c in changes.items())
    acceptance(8, ok, f"RMS change on halving dt {DEFAULT_PLANT_DT:g}->{DEFAULT_PLANT_DT / 2:g}: {detail} "
                      f"(<1%; worst {worst[0]}); rerun byte-identical: {identical}")
    assert ok


# --------------------------------------------------------------------------- 9

PROPERTY_TESTS = (
    "tests/test_friction.py::test_odd_symmetry",
    "tests/test_friction.py::test_dissipativity",
    "tests/test_sysid.py::test_scale_equivariance",
    "tests/test_controllers.py::test_filter_dc_gain",
    "tests/test_controllers.py::test_pi_clamp",
)


def test_criterion_9_property_suites(acceptance):
    root = Path(__file__).resolve().parents[1]
    res = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                          "--hypothesis-show-statistics", *PROPERTY_TESTS],
                         cwd=root, capture_output=True, text=True)
    counts = [int(n) for n in re.findall(r"(\d+) passing examples", res.stdout)]
    ok = res.returncode == 0 and len(counts) >= len(PROPERTY_TESTS) and min(counts) >= 1000
    acceptance(9, ok, f"{len(PROPERTY_TESTS)} property tests, exit {res.returncode}, "
                      f"min passing examples {min(counts) if counts else 0} (>=1000)")
    assert ok, res.stdout[-2000:]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
