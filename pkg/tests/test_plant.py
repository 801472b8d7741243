import math

import numpy as np
import pytest

from piezosmc.plant import (
    DisturbanceInput,
    PlantParams,
    PlantState,
    SimConfig,
    SimulationError,
    acceleration,
    delay_steps,
    effective_alpha1,
    effective_alpha2n,
    simulate,
    steady_state_velocity,
    step,
)

P = PlantParams()


def test_defaults_are_identified_values():
    assert (P.alpha1_pos, P.alpha1_neg, P.alpha2_pos, P.alpha2_neg) == (104.0154, 117.1441, 3.1023, 6.8216)
    assert P.alpha2_neg_base == 5.8216 and P.alpha3 == 6.0 and P.alpha_s_cap == 0.6
    assert P.tau == 3.5e-3 and P.v_cr == 5e-6


@pytest.mark.parametrize("bad", [dict(alpha1_pos=0.0), dict(alpha3=-1.0), dict(tau=-1e-3),
                                 dict(v_cr=0.0), dict(alpha2n_rule="other")])
def test_invalid_params_rejected(bad):
    with pytest.raises(ValueError):
        PlantParams(**bad)


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=0.0)
    with pytest.raises(ValueError):
        SimConfig(duration=-1.0)
    with pytest.raises(ValueError):
        SimConfig(dt=4e-3).check_against(P)
    SimConfig(dt=3.5e-3).check_against(P)


@pytest.mark.parametrize("v_del, expected", [(0.01, 104.0154), (-0.01, 117.1441), (0.0, 104.0154)])
def test_effective_alpha1(v_del, expected):
    assert effective_alpha1(v_del, P) == expected


@pytest.mark.parametrize("v, u_dot, expected", [(0.0, -1.0, 5.8216), (-0.05, -1.0, 6.8216 - math.exp(1.5)),
                                                (-0.05, 0.5, 6.8216), (-0.05, 0.0, 6.8216)])
def test_effective_alpha2n(v, u_dot, expected):
    assert effective_alpha2n(v, u_dot, P) == pytest.approx(expected, rel=1e-12)


def test_alpha2n_decreasing_value():
    # 5.8216 + 1 - e^1.5
    assert effective_alpha2n(-0.05, -1.0, P) == pytest.approx(2.3399109, abs=1e-7)


def test_alpha2n_constant_rule():
    p = P.replace(alpha2n_rule="constant")
    assert effective_alpha2n(-0.05, -1.0, p) == 6.8216


def test_alpha2n_overflow_is_simulation_error():
    with pytest.raises(SimulationError):
        effective_alpha2n(-30.0, -1.0, P)


def test_verbatim_alpha2n_runs_away_on_falling_ramp():
    # the exponential term shrinks the friction as v grows negative; the
    # constant rule stays bounded on the same input
    ramp = lambda t: -10.0 * t
    with pytest.raises(SimulationError):
        simulate(ramp, SimConfig(duration=0.3), P)
    tr = simulate(ramp, SimConfig(duration=0.3), P.replace(alpha2n_rule="constant"))
    assert np.all(np.isfinite(tr.v)) and tr.v.min() > -0.2


def test_acceleration_examples():
    assert acceleration(0.0, 0.0, 0.05) == 0.0
    assert acceleration(0.0, 0.0, 0.2) == pytest.approx(0.6, abs=1e-12)
    assert abs(acceleration(0.0625, 0.0625, 1.6)) < 1e-2


def test_acceleration_stiction_opposes_net_drive():
    assert acceleration(0.0, 0.0, -0.2) == pytest.approx(-0.6, abs=1e-12)
    assert acceleration(0.0, 0.0, 0.0, d=0.59) == 0.0


def test_step_at_rest_only_advances_time():
    for dt in (1e-6, 5e-5, 1e-3):
        s = PlantState.at_rest(P, dt)
        step(s, 0.0, 0.0, 0.0, dt, P)
        assert (s.y, s.v, s.t) == (0.0, 0.0, dt)


def test_step_holds_steady_velocity():
    dt = 5e-5
    v0 = 0.0625
    s = PlantState.at_rest(P, dt)
    s.v = v0
    s.history.extend([v0] * len(s.history))
    for _ in range(1000):
        step(s, 1.6, 0.0, 0.0, dt, P)
    assert s.v == pytest.approx(v0, rel=1e-2)


def test_step_clamps_creep_to_exact_zero():
    dt = 5e-5
    s = PlantState.at_rest(P, dt)
    s.v = 1e-7
    s.history.extend([1e-7] * len(s.history))
    step(s, 0.0, 0.0, 0.0, dt, P)
    assert s.v == 0.0


def test_step_rejects_non_finite_input():
    s = PlantState.at_rest(P, 5e-5)
    with pytest.raises(SimulationError):
        step(s, float("nan"), 0.0, 0.0, 5e-5, P)


def test_history_length_and_warmup():
    dt = 5e-5
    k = delay_steps(P.tau, dt)
    assert k == 70
    s = PlantState.at_rest(P, dt)
    assert len(s.history) == k + 1 and s.v_delayed == 0.0


def test_delay_uses_velocity_exactly_k_steps_back():
    dt = 5e-5
    k = delay_steps(P.tau, dt)
    tr = simulate(lambda t: 1.6, SimConfig(duration=0.05, dt=dt), P)
    checked = 0
    for n in range(len(tr.v) - 1):
        v, v_new = tr.v[n], tr.v[n + 1]
        if v <= P.v_cr:
            continue
        v_del = tr.v[n - k] if n >= k else 0.0
        assert v_new == v + acceleration(v, v_del, 1.6, 0.0, 0.0, P) * dt
        checked += 1
    assert checked > 900


def test_rest_stays_at_rest():
    tr = simulate(lambda t: 0.0, SimConfig(duration=0.5), P)
    assert np.all(tr.y == 0.0) and np.all(tr.v == 0.0)


@pytest.mark.parametrize("u", [0.09, -0.09, 0.05, 0.0, 0.0999])
def test_stiction_hold_exact(u):
    tr = simulate(lambda t: u, SimConfig(duration=1.0), P, y0=1e-3)
    assert np.all(tr.y == 1e-3) and np.all(tr.v == 0.0)


@pytest.mark.parametrize("u, expected", [(1.6, 0.0624686), (-2.3, -0.0595711)])
def test_pulse_plateau(u, expected):
    tr = simulate(lambda t: u if t < 0.4 else 0.0, SimConfig(duration=0.5), P)
    plateau = tr.v[(tr.t > 0.3) & (tr.t < 0.4)].mean()
    assert plateau == pytest.approx(expected, rel=1e-2)
    assert plateau == pytest.approx(steady_state_velocity(u, P), rel=1e-3)
    assert tr.v[-1] == 0.0


@pytest.mark.parametrize("u", [1.0, 1.6, 2.5, -1.5, -2.3])
def test_plateau_consistency_after_ten_time_constants(u):
    duration = 10.0 / P.alpha1_pos + 0.05
    tr = simulate(lambda t: u, SimConfig(duration=duration), P)
    assert tr.v[-1] == pytest.approx(steady_state_velocity(u, P), rel=1e-2)


@pytest.mark.parametrize("u, expected", [(1.6, 0.0624686), (2.5, 0.1143840), (0.05, 0.0)])
def test_steady_state_velocity_examples(u, expected):
    assert steady_state_velocity(u, P) == pytest.approx(expected, abs=1e-7)


def test_grid_convergence_at_default_dt():
    dt = SimConfig().dt
    peaks = [np.max(np.abs(simulate(lambda t: 1.6, SimConfig(duration=2.0, dt=h), P).y)) for h in (dt, dt / 2)]
    assert abs(peaks[1] - peaks[0]) / peaks[1] < 1e-5


def test_determinism():
    cfg = SimConfig(duration=0.3)
    prof = lambda t: 1.5 + math.sin(20 * t)
    a, b = simulate(prof, cfg, P), simulate(prof, cfg, P)
    assert np.array_equal(a.y, b.y) and np.array_equal(a.v, b.v)


def test_input_saturation():
    tr = simulate(lambda t: 50.0, SimConfig(duration=0.01), P)
    assert tr.u.max() == 10.0


def test_profile_length_checked():
    with pytest.raises(ValueError):
        simulate(np.zeros(5), SimConfig(duration=0.01), P)


def test_disturbance_bound_enforced():
    d = DisturbanceInput(lambda t: 2.0, bound=1.0)
    with pytest.raises(ValueError):
        d(0.0)
    table = DisturbanceInput(([0.0, 1.0], [0.0, 1.0]), bound=1.0)
    assert table(0.5) == 0.5
    assert DisturbanceInput.zero()(3.0) == 0.0


def test_trace_csv_roundtrip(tmp_path):
    tr = simulate(lambda t: 1.0, SimConfig(duration=0.01), P)
    path = tr.to_csv(tmp_path / "t.csv", decimation=2)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,y,v,u" and len(lines) == 1 + (len(tr) + 1) // 2
    assert float(lines[-1].split(",")[1]) == tr.y[-1 - (len(tr) - 1) % 2]
