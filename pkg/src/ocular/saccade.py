"""Horizontal saccade simulation, Kalman tracking and the Saccadic Ratio.

Positions are relative pupil angles in degrees, velocities in deg/s.  The
tracker state is ``[position, velocity]`` under the constant-velocity model

    x(k+1) = F x(k) + G u(k) + noise,   z(k) = H x(k) + noise

with ``F = [[1, dt], [0, 1]]``, ``G = [dt**2/2, dt]`` and ``H = [1, 0]``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import OcularError, flag
from .imagecore import NoiseSpec, as_image, read_frames

__all__ = [
    "MotionTrace", "VelocityTrace", "TrackerState", "TrackerConfig", "SaccadeEvent",
    "SaccadicRatioResult", "NoSaccadesError", "RefractoryError",
    "LinearObservation", "SaturatingObservation",
    "simulate_eye_motion", "saccade_segments", "kf_step", "ekf_step", "predict_step", "initial_state",
    "run_filter",
    "fir_velocity", "detect_saccades", "saccadic_ratio", "profile_match_error",
    "track_sequence", "TrackResult", "render_trace", "REFRACTORY_S",
]

REFRACTORY_S = 0.2
MIN_FS = 60.0


class NoSaccadesError(OcularError):
    """The Saccadic Ratio is undefined without events."""


class RefractoryError(OcularError):
    """Two saccades closer than the refractory gap."""


@dataclass(frozen=True)
class MotionTrace:
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", s)
        if not self.dt > 0:
            raise OcularError("dt must be positive")
        if not np.all(np.isfinite(s)):
            raise OcularError("motion trace contains non-finite samples")

    @property
    def fs(self):
        return 1.0 / self.dt

    @property
    def times(self):
        return np.arange(len(self.samples)) * self.dt

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class VelocityTrace:
    """``values[n]`` estimates the velocity at sample ``n - delay``."""

    dt: float
    values: np.ndarray
    delay: int = 0

    def aligned(self):
        """Delay-compensated copy: ``out[n]`` is the velocity at sample ``n``."""
        out = np.full_like(self.values, np.nan)
        d = self.delay
        out[: len(out) - d] = self.values[d:]
        return out


@dataclass(frozen=True)
class TrackerState:
    x_hat: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    R: float
    u: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.x_hat, dtype=np.float64).reshape(2)
        P = np.asarray(self.P, dtype=np.float64).reshape(2, 2)
        Q = np.asarray(self.Q, dtype=np.float64).reshape(2, 2)
        object.__setattr__(self, "x_hat", x)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Q", Q)
        if not self.R > 0:
            raise OcularError("measurement variance R must be positive")
        if np.abs(P - P.T).max() > 1e-9 * max(1.0, np.abs(P).max()):
            raise OcularError("state covariance P is not symmetric")
        if np.linalg.eigvalsh(P).min() < -1e-9 * max(1.0, np.abs(P).max()):
            raise OcularError("state covariance P is not positive semi-definite")

    @property
    def position(self):
        return float(self.x_hat[0])

    @property
    def velocity(self):
        return float(self.x_hat[1])


@dataclass(frozen=True)
class TrackerConfig:
    kind: str = "ekf"
    q: tuple = (1e-4, 1e-2)  # diagonal of Q, (deg**2, (deg/s)**2)
    r: float = 0.25  # deg**2
    u: float = 0.0  # acceleration input; 1.0 reproduces the unit-acceleration model
    init: str = "measurement"  # or "zero"
    observation: object = None  # None = linear H, else an object with h() and jacobian()

    def __post_init__(self):
        if self.kind not in ("kf", "ekf"):
            raise OcularError("tracker kind must be 'kf' or 'ekf'")
        if self.init not in ("measurement", "zero"):
            raise OcularError("init must be 'measurement' or 'zero'")
        if min(self.q) < 0 or not self.r > 0:
            raise OcularError("need Q >= 0 and R > 0")
        if self.kind == "kf" and self.observation is not None:
            raise OcularError("a nonlinear observation needs the 'ekf' tracker")


@dataclass(frozen=True)
class SaccadeEvent:
    onset_index: int
    end_index: int
    peak_velocity: float
    duration: float

    def __post_init__(self):
        if not self.onset_index < self.end_index:
            raise OcularError("saccade onset must precede its end")


@dataclass(frozen=True)
class SaccadicRatioResult:
    ratios: np.ndarray
    mean: float
    std: float
    units: str = "deg/s^2"

    def as_dict(self):
        return {"units": self.units, "mean": self.mean, "std": self.std,
                "ratios": [float(r) for r in self.ratios]}


# ---------------------------------------------------------------------------
# simulation

def _segment_kind(seg):
    kind = seg.get("kind")
    if kind not in ("fixation", "saccade", "pursuit"):
        raise OcularError(f"unknown motion segment {kind!r}")
    return kind


def simulate_eye_motion(segments, fs, noise=None, start=0.0, tremor=(0.0, 80.0), seed=0):
    """Piecewise eye-position trace in degrees.

    The trace opens with one sample at ``start``; each segment then appends
    its samples.

    ``{"kind": "fixation", "duration": s}``
        hold position, plus a tremor ``amp*sin(2 pi f t + phase)`` with
        ``(amp, f) = tremor`` and a random phase.
    ``{"kind": "saccade", "amplitude": deg, "transition": s}``
        raised-cosine step finishing in ``round(transition*fs)`` samples.
    ``{"kind": "pursuit", "slope": deg/s, "duration": s}``
        linear ramp.

    Saccades closer than ``REFRACTORY_S`` (end of one to start of the next)
    raise ``RefractoryError``.  ``noise`` (a ``NoiseSpec``) adds white
    measurement noise.
    """
    if fs < MIN_FS:
        raise OcularError(f"frame rate {fs} Hz below {MIN_FS:g} Hz")
    rng = np.random.default_rng(seed)
    amp, freq = tremor
    dt = 1.0 / fs
    out = [float(start)]
    pos = float(start)
    last_end = None  # time the previous saccade finished
    t = 0.0
    for seg in segments:
        kind = _segment_kind(seg)
        if kind == "saccade":
            T = float(seg.get("transition", 0.02))
            n = max(1, int(round(T * fs)))
            if last_end is not None and t - last_end < REFRACTORY_S - 1e-9:
                raise RefractoryError(f"saccades {t - last_end:.3f} s apart; need >= {REFRACTORY_S} s")
            a = float(seg["amplitude"])
            i = np.arange(1, n + 1)
            out.extend(pos + a * 0.5 * (1 - np.cos(np.pi * i / n)))
            pos += a
            t += n * dt
            last_end = t
        else:
            n = int(round(float(seg["duration"]) * fs))
            i = np.arange(1, n + 1)
            if kind == "pursuit":
                vals = pos + float(seg["slope"]) * i * dt
                pos = float(vals[-1]) if n else pos
            else:
                phase = rng.uniform(0, 2 * np.pi)
                vals = pos + amp * np.sin(2 * np.pi * freq * i * dt + phase)
            out.extend(vals)
            t += n * dt
    samples = np.asarray(out)
    if noise is not None and noise.variance > 0:
        samples = samples + np.random.default_rng(noise.seed).normal(0, np.sqrt(noise.variance),
                                                                     samples.shape)
    return MotionTrace(dt, samples)


def saccade_segments(amplitudes, transition=0.02, hold=0.3):
    """Fixation / saccade alternation: ``hold`` s of fixation around each step."""
    segs = [{"kind": "fixation", "duration": hold}]
    for a in amplitudes:
        segs += [{"kind": "saccade", "amplitude": a, "transition": transition},
                 {"kind": "fixation", "duration": hold}]
    return segs


# ---------------------------------------------------------------------------
# Kalman filters

def _model(dt):
    F = np.array([[1.0, dt], [0.0, 1.0]])
    G = np.array([0.5 * dt * dt, dt])
    return F, G


H = np.array([1.0, 0.0])


@dataclass(frozen=True)
class LinearObservation:
    """``h(x) = H x`` with ``H = [1, 0]``."""

    def h(self, x):
        return float(H @ x)

    def jacobian(self, x):
        return H


@dataclass(frozen=True)
class SaturatingObservation:
    """Exposure smear: ``h(x) = p + tau * v_max * tanh(v / v_max)``.

    A camera integrating over ``2*tau`` seconds sees the pupil displaced along
    its motion, and the smear stops growing once the pupil outruns the
    exposure (speeds well above ``v_max``).
    """

    tau: float = 0.001
    v_max: float = 300.0

    def h(self, x):
        return float(x[0] + self.tau * self.v_max * np.tanh(x[1] / self.v_max))

    def jacobian(self, x):
        return np.array([1.0, self.tau / np.cosh(x[1] / self.v_max) ** 2])


def _check_z(z):
    if not np.isfinite(z):
        raise OcularError(f"non-finite measurement {z!r}")


def _update(x_pred, P_pred, z, h_pred, Hj, R):
    S = float(Hj @ P_pred @ Hj) + R
    K = P_pred @ Hj / S
    x = x_pred + K * (z - h_pred)
    A = np.eye(2) - np.outer(K, Hj)
    P = A @ P_pred @ A.T + R * np.outer(K, K)  # Joseph form keeps P symmetric PSD
    return x, 0.5 * (P + P.T)


def _predict(state, dt):
    F, G = _model(dt)
    return F @ state.x_hat + G * state.u, F @ state.P @ F.T + state.Q


def kf_step(state, z, dt):
    """One predict/update cycle of the linear Kalman filter."""
    _check_z(z)
    x_pred, P_pred = _predict(state, dt)
    x, P = _update(x_pred, P_pred, float(z), float(H @ x_pred), H, state.R)
    return TrackerState(x, P, state.Q, state.R, state.u)


def ekf_step(state, z, dt, observation=None):
    """Extended Kalman step, linearized about the predicted state.

    The motion model is linear, so ``J_f = F``.  With the default linear
    observation ``J_h = H`` and this is exactly ``kf_step``.
    """
    _check_z(z)
    obs = LinearObservation() if observation is None else observation
    x_pred, P_pred = _predict(state, dt)
    x, P = _update(x_pred, P_pred, float(z), obs.h(x_pred), obs.jacobian(x_pred), state.R)
    return TrackerState(x, P, state.Q, state.R, state.u)


def predict_step(state, dt):
    """Prediction only, for frames without a measurement."""
    x_pred, P_pred = _predict(state, dt)
    return TrackerState(x_pred, 0.5 * (P_pred + P_pred.T), state.Q, state.R, state.u)


def initial_state(cfg, z0=0.0):
    x0 = [z0 if cfg.init == "measurement" and np.isfinite(z0) else 0.0, 0.0]
    return TrackerState(np.array(x0), np.eye(2), np.diag(cfg.q), cfg.r, cfg.u)


def run_filter(z, dt, cfg=TrackerConfig()):
    """Filter a measurement sequence; NaN entries get a prediction-only step.

    Returns an ``(n, 2)`` array of ``[position, velocity]`` estimates.  The
    first measurement seeds the state (``init="measurement"``) or updates a
    zero prior (``init="zero"``).  Same arithmetic as ``kf_step`` /
    ``ekf_step``, unrolled on scalars for speed.
    """
    z = np.asarray(z, dtype=np.float64)
    out = np.empty((len(z), 2))
    if len(z) == 0:
        return out
    finite = np.isfinite(z)
    obs = cfg.observation
    state = initial_state(cfg, z[finite][0] if finite.any() else 0.0)
    p, v = state.x_hat
    (p00, p01), (_, p11) = state.P
    q0, q1 = cfg.q
    R, u = cfg.r, cfg.u
    g0, g1 = 0.5 * dt * dt, dt
    for k in range(len(z)):
        if k > 0:
            p, v = p + dt * v + g0 * u, v + g1 * u
            p00, p01, p11 = (p00 + 2 * dt * p01 + dt * dt * p11 + q0, p01 + dt * p11,
                             p11 + q1)
        if finite[k] and (k > 0 or cfg.init == "zero"):
            if obs is None:
                h, h0, h1 = p, 1.0, 0.0
            else:
                x = np.array([p, v])
                h = obs.h(x)
                h0, h1 = obs.jacobian(x)
            # S = Hj P Hj' + R,  K = P Hj' / S
            ph0 = p00 * h0 + p01 * h1
            ph1 = p01 * h0 + p11 * h1
            S = h0 * ph0 + h1 * ph1 + R
            k0, k1 = ph0 / S, ph1 / S
            innov = z[k] - h
            p, v = p + k0 * innov, v + k1 * innov
            # Joseph form (I - K Hj) P (I - K Hj)' + R K K'
            a00, a01, a10, a11 = 1 - k0 * h0, -k0 * h1, -k1 * h0, 1 - k1 * h1
            b00 = a00 * p00 + a01 * p01
            b01 = a00 * p01 + a01 * p11
            b10 = a10 * p00 + a11 * p01
            b11 = a10 * p01 + a11 * p11
            p00 = b00 * a00 + b01 * a01 + R * k0 * k0
            p01 = 0.5 * ((b00 * a10 + b01 * a11) + (b10 * a00 + b11 * a01)) + R * k0 * k1
            p11 = b10 * a10 + b11 * a11 + R * k1 * k1
        out[k] = p, v
    return out


# ---------------------------------------------------------------------------
# FIR reference, events and the Saccadic Ratio

_FIR = {
    5: np.array([-1.0, 8.0, 0.0, -8.0, 1.0]) / 12.0,
    7: np.array([1.0, -9.0, 45.0, 0.0, -45.0, 9.0, -1.0]) / 60.0,
}


def fir_velocity(trace, taps=5):
    """Causal central-difference differentiator.

    ``values[n]`` is the derivative at ``n - (taps-1)/2``; the first
    ``taps - 1`` outputs are NaN.  Exact for polynomials up to degree
    ``taps - 2``.
    """
    if taps not in _FIR:
        raise OcularError("FIR differentiator supports 5 or 7 taps")
    x = trace.samples
    c = _FIR[taps]  # c[j] multiplies x[n - j]
    out = np.full(len(x), np.nan)
    if len(x) >= taps:
        out[taps - 1:] = np.convolve(x, c, mode="valid") / trace.dt
    return VelocityTrace(trace.dt, out, (taps - 1) // 2)


def detect_saccades(velocity, dt, v_floor=30.0, min_samples=2, v_zero=None):
    """Velocity-floor saccade detector.

    A run of ``|v| > v_floor`` marks a saccade.  Its onset is found by walking
    back while ``|v|`` keeps falling and is still above ``v_zero`` (default
    ``v_floor / 10``), i.e. to where the profile has flattened to zero; the
    end is found by walking forward likewise.  Runs shorter than
    ``min_samples`` are dropped; overlapping events are merged.  NaN counts
    as zero velocity.
    """
    v_zero = 0.1 * v_floor if v_zero is None else v_zero
    v = np.abs(np.nan_to_num(np.asarray(velocity, dtype=np.float64)))
    above = v > v_floor
    if not above.any():
        return []
    edges = np.diff(np.concatenate([[0], above.astype(np.int8), [0]]))
    starts, stops = np.nonzero(edges == 1)[0], np.nonzero(edges == -1)[0]
    spans = []
    for s, e in zip(starts, stops):
        if e - s < min_samples:
            continue
        on = s
        while on > 0 and v[on] > v_zero and v[on - 1] < v[on]:
            on -= 1
        end = e - 1
        while end < len(v) - 1 and v[end] > v_zero and v[end + 1] < v[end]:
            end += 1
        if spans and on < spans[-1][1]:
            spans[-1][1] = max(spans[-1][1], end)
        else:
            spans.append([on, end])
    return [SaccadeEvent(int(on), int(end), float(v[on:end + 1].max()), (end - on) * dt)
            for on, end in spans if end > on]


def saccadic_ratio(events, radians=False):
    """Mean and s.d. (population) of per-event peak velocity over duration."""
    if not events:
        raise NoSaccadesError("no saccades; Saccadic Ratio undefined")
    r = np.array([e.peak_velocity / e.duration for e in events])
    units = "deg/s^2"
    if radians:
        r = np.deg2rad(r)
        units = "rad/s^2"
    return SaccadicRatioResult(r, float(r.mean()), float(r.std()), units)


def profile_match_error(v_est, v_ref):
    """Mean absolute difference of two velocity profiles over samples where both exist."""
    a, b = np.asarray(v_est, dtype=np.float64), np.asarray(v_ref, dtype=np.float64)
    ok = np.isfinite(a) & np.isfinite(b)
    if not ok.any():
        raise OcularError("velocity profiles do not overlap")
    return float(np.mean(np.abs(a[ok] - b[ok])))


# ---------------------------------------------------------------------------
# frames to Saccadic Ratio

def render_trace(angles, width=320, height=None, pupil_radius=12.0, iris_radius=28.0,
                 half_view_angle=60.0, supersample=2, noise=None):
    """Render one ``synth_eye`` frame per angle sample.

    The pupil sits on the horizontal axis of a centred almond eye of half-width
    ``0.42 * width``; an angle of ``+-half_view_angle`` puts it on a corner.
    ``noise`` is an optional ``NoiseSpec``; frame ``k`` uses seed ``noise.seed + k``.
    """
    from .imagecore import add_noise, synth_eye

    height = width // 2 if height is None else height
    hw = 0.42 * width
    ex, ey = (width - 1) / 2, (height - 1) / 2
    frames = []
    for k, a in enumerate(np.asarray(angles, dtype=np.float64)):
        img = synth_eye(width, height, (ex + a / half_view_angle * hw, ey), pupil_radius, iris_radius,
                        0.0, supersample=supersample).image
        if noise is not None and noise.variance > 0:
            seed = None if noise.seed is None else noise.seed + k
            img = add_noise(img, NoiseSpec(noise.variance, seed))
        frames.append(img)
    return frames


@dataclass
class TrackResult:
    measurements: np.ndarray  # z(k), NaN where a frame failed
    estimates: np.ndarray  # (n, 2) filtered [position, velocity]
    dt: float
    events: list
    sr: SaccadicRatioResult | None
    skipped: list = field(default_factory=list)

    def rows(self):
        for k, (z, (p, v)) in enumerate(zip(self.measurements, self.estimates)):
            yield k, z, p, v


def _frame_source(frames):
    if isinstance(frames, (str, os.PathLike)):
        return read_frames(frames)
    return [as_image(f) for f in frames]


def track_sequence(frames, fps, ocular_params=None, tracker=TrackerConfig(), v_floor=30.0,
                   radians=False, fixed_corners=None):
    """Pupil centre + eye corners per frame -> relative angle -> filter -> events -> SR.

    ``frames`` is a directory of PGM frames or a sequence of images.  A frame
    whose centre or corners cannot be found contributes no measurement (the
    filter only predicts) and is flagged.  ``fixed_corners`` skips per-frame
    corner detection.
    """
    from .pupil import OcularParams, eye_corners, pupil_center, relative_position

    params = OcularParams() if ocular_params is None else ocular_params
    imgs = _frame_source(frames)
    z = np.full(len(imgs), np.nan)
    skipped = []
    for k, img in enumerate(imgs):
        try:
            corners = fixed_corners or eye_corners(img, params)
            z[k] = relative_position(pupil_center(img, params), corners, params.half_view_angle)[1]
        except OcularError as exc:
            skipped.append(k)
            flag(f"frame {k}: {exc}; prediction only")
    dt = 1.0 / fps
    est = run_filter(z, dt, tracker)
    events = detect_saccades(est[:, 1], dt, v_floor)
    sr = saccadic_ratio(events, radians) if events else None
    return TrackResult(z, est, dt, events, sr, skipped)
