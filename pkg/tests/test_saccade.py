import numpy as np
import pytest
from hypothesis import given, strategies as st

from ocular.imagecore import NoiseSpec
from ocular.pupil import eye_corners
from ocular.saccade import (
    MotionTrace, NoSaccadesError, RefractoryError, SaccadeEvent, SaturatingObservation, TrackerConfig,
    TrackerState, detect_saccades, ekf_step, fir_velocity, initial_state, kf_step, predict_step,
    render_trace, run_filter, saccade_segments, saccadic_ratio, simulate_eye_motion, track_sequence,
)


def _state(x=(0.0, 0.0), P=None, q=0.0, R=1.0):
    return TrackerState(np.array(x), np.eye(2) if P is None else P, q * np.eye(2), R)


def test_simulate_constant():
    tr = simulate_eye_motion([], 500)
    assert np.all(tr.samples == 0.0)
    tr = simulate_eye_motion([{"kind": "fixation", "duration": 0.2}], 500, start=3.0)
    assert np.all(tr.samples == 3.0)


def test_simulate_saccade_samples():
    tr = simulate_eye_motion([{"kind": "saccade", "amplitude": 30, "transition": 0.05}], 500)
    assert len(tr) == 1 + 25
    assert tr.samples[-1] - tr.samples[0] == pytest.approx(30.0)


def test_simulate_pursuit():
    tr = simulate_eye_motion([{"kind": "pursuit", "slope": 10, "duration": 1.0}], 500)
    assert tr.samples[-1] - tr.samples[0] == pytest.approx(10.0)


def test_refractory_and_rate():
    segs = [{"kind": "saccade", "amplitude": 5}, {"kind": "fixation", "duration": 0.1},
            {"kind": "saccade", "amplitude": 5}]
    with pytest.raises(RefractoryError):
        simulate_eye_motion(segs, 500)
    with pytest.raises(ValueError):
        simulate_eye_motion([], 30)


def test_simulate_noise_deterministic():
    a = simulate_eye_motion(saccade_segments([10]), 500, NoiseSpec(0.1, 4))
    b = simulate_eye_motion(saccade_segments([10]), 500, NoiseSpec(0.1, 4))
    np.testing.assert_array_equal(a.samples, b.samples)


def test_kf_hand_example():
    s = kf_step(_state(), 1.0, 1.0)
    np.testing.assert_allclose(s.x_hat, [2 / 3, 1 / 3], atol=1e-12)
    # P+ = (I - K H) P-,  P- = [[2, 1], [1, 1]],  K = [2/3, 1/3]
    np.testing.assert_allclose(s.P, [[2 / 3, 1 / 3], [1 / 3, 2 / 3]], atol=1e-12)


def test_huge_r_keeps_prediction():
    s0 = _state((1.0, 2.0))
    s = kf_step(TrackerState(s0.x_hat, s0.P, s0.Q, 1e15), 100.0, 0.01)
    np.testing.assert_allclose(s.x_hat, predict_step(s0, 0.01).x_hat, atol=1e-9)


@pytest.mark.parametrize("step", [kf_step, ekf_step])
def test_noiseless_convergence(step):
    dt, p0, v = 0.01, 2.0, 15.0
    s = TrackerState(np.zeros(2), np.eye(2) * 1e3, np.zeros((2, 2)), 1e-12)
    for k in range(10):
        s = step(s, p0 + v * k * dt, dt)
    np.testing.assert_allclose(s.x_hat, [p0 + 9 * v * dt, v], atol=1e-6)


@given(st.floats(-50, 50), st.floats(-500, 500), st.floats(-50, 50), st.floats(1e-3, 0.1),
       st.floats(0.01, 10), st.floats(0.0, 1.0))
def test_ekf_equals_kf(p, v, z, dt, R, q):
    P = np.array([[2.0, 0.3], [0.3, 1.5]])
    s = TrackerState(np.array([p, v]), P, q * np.eye(2), R)
    a, b = kf_step(s, z, dt), ekf_step(s, z, dt)
    np.testing.assert_allclose(a.x_hat, b.x_hat, rtol=0, atol=1e-12 * max(1, abs(p), abs(v), abs(z)))
    np.testing.assert_allclose(a.P, b.P, rtol=0, atol=1e-12 * max(1, np.abs(a.P).max()))


@given(st.floats(-40, 40), st.floats(-900, 900))
def test_saturating_jacobian(p, v):
    obs = SaturatingObservation()
    x = np.array([p, v])
    J = obs.jacobian(x)
    for i in range(2):
        e = np.zeros(2)
        e[i] = 1e-5
        fd = (obs.h(x + e) - obs.h(x - e)) / 2e-5
        assert fd == pytest.approx(J[i], abs=1e-6)


def test_run_filter_matches_steps():
    rng = np.random.default_rng(0)
    z = np.cumsum(rng.normal(size=60))
    z[[7, 20, 21]] = np.nan
    dt = 0.004
    for cfg in (TrackerConfig(kind="kf"), TrackerConfig(u=1.0),
                TrackerConfig(observation=SaturatingObservation())):
        s = initial_state(cfg, z[0])
        ref = [s.x_hat]
        for k in range(1, len(z)):
            if np.isnan(z[k]):
                s = predict_step(s, dt)
            elif cfg.kind == "kf":
                s = kf_step(s, z[k], dt)
            else:
                s = ekf_step(s, z[k], dt, cfg.observation)
            ref.append(s.x_hat)
        np.testing.assert_allclose(run_filter(z, dt, cfg), np.array(ref), atol=1e-9)


def test_run_filter_zero_init_updates_first_sample():
    cfg = TrackerConfig(init="zero", q=(0.0, 0.0))  # a dt = 0 step still adds Q
    out = run_filter([1.0], 0.01, cfg)
    s = kf_step(initial_state(cfg), 1.0, 0.0)
    np.testing.assert_allclose(out[0], s.x_hat, atol=1e-12)


def test_state_validation():
    with pytest.raises(ValueError):
        TrackerState(np.zeros(2), np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros((2, 2)), 1.0)
    with pytest.raises(ValueError):
        TrackerState(np.zeros(2), -np.eye(2), np.zeros((2, 2)), 1.0)
    with pytest.raises(ValueError):
        TrackerConfig(kind="kf", observation=SaturatingObservation())


def test_fir():
    dt = 0.002
    n = np.arange(50)
    for taps in (5, 7):
        np.testing.assert_allclose(fir_velocity(MotionTrace(dt, np.full(50, 4.0)), taps).values[taps - 1:], 0,
                                   atol=1e-9)
        ramp = fir_velocity(MotionTrace(dt, 3.0 * n * dt), taps)
        np.testing.assert_allclose(ramp.values[taps - 1:], 3.0, atol=1e-9)
        quad = fir_velocity(MotionTrace(dt, 5.0 * (n * dt) ** 2), taps).aligned()
        ok = np.isfinite(quad)
        np.testing.assert_allclose(quad[ok], 10.0 * n[ok] * dt, atol=1e-6)
        assert np.isnan(quad[: (taps - 1) // 2]).all() or np.isnan(quad[-((taps - 1) // 2):]).all()


def _triangle(peak, dur, dt, pad=50):
    half = int(round(dur / dt / 2))
    up = np.linspace(0, peak, half + 1)
    return np.concatenate([np.zeros(pad), up, up[-2::-1], np.zeros(pad)])


def test_detect():
    dt = 0.002
    assert detect_saccades(np.zeros(100), dt) == []
    ev = detect_saccades(_triangle(400, 0.05, dt), dt)
    assert len(ev) == 1
    assert ev[0].peak_velocity == pytest.approx(400.0)
    assert abs(ev[0].duration - 0.05) <= dt + 1e-12
    gap = np.zeros(int(0.25 / dt) - 26)
    two = np.concatenate([_triangle(300, 0.05, dt, 10), gap, _triangle(300, 0.05, dt, 10)])
    assert len(detect_saccades(two, dt)) == 2


def test_saccadic_ratio():
    e = SaccadeEvent(0, 25, 400.0, 0.05)
    r = saccadic_ratio([e])
    assert r.mean == pytest.approx(8000.0)
    assert saccadic_ratio([e, e]).std == 0.0
    assert saccadic_ratio([e], radians=True).mean == pytest.approx(np.deg2rad(8000.0))
    with pytest.raises(NoSaccadesError):
        saccadic_ratio([])


@given(st.floats(50, 800), st.floats(0.01, 0.2))
def test_sr_scaling(psv, scd):
    a = saccadic_ratio([SaccadeEvent(0, 5, psv, scd)]).mean
    b = saccadic_ratio([SaccadeEvent(0, 5, psv / 2, 2 * scd)]).mean
    assert b == pytest.approx(a / 4, rel=1e-12)


CLOSED_LOOP = TrackerConfig(q=(1e-2, 1e5), r=0.01)


def test_static_sequence_has_no_events():
    frames = render_trace(np.zeros(40), width=160)
    res = track_sequence(frames, 250, tracker=CLOSED_LOOP, fixed_corners=eye_corners(frames[0]))
    assert res.events == [] and res.sr is None


def test_dropped_frames_still_one_event():
    tr = simulate_eye_motion(saccade_segments([20], 0.04, 0.1), 250, start=-10)
    frames = render_trace(tr.samples)
    corners = eye_corners(frames[0])
    rng = np.random.default_rng(1)
    drop = rng.choice(np.arange(1, len(frames)), size=len(frames) // 10, replace=False)
    for k in drop:
        frames[k] = np.full_like(frames[k], 128.0)  # no pupil evidence -> prediction only
    res = track_sequence(frames, 250, tracker=CLOSED_LOOP, fixed_corners=corners)
    assert sorted(res.skipped) == sorted(drop.tolist())
    assert len(res.events) == 1
