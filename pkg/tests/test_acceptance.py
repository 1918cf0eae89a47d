"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run with pytest (the lines are collected in the terminal summary) or as a
script: ``python3 tests/test_acceptance.py``.
"""

import warnings

import numpy as np
import pytest
from scipy import fft as sfft

from ocular.diagnostics import NumericalDegeneracyWarning
from ocular.edges import baddeley_metric, baddeley_metric_bruteforce, detect_edges
from ocular.eyestate import (
    EyeState, blink_filter, classify, correlate, dct_spatial_equivalent, markov1_decorrelation,
    mean_offdiagonal, perclos_p3, synth_state_corpus, synthesize_otmach,
)
from ocular.formfactor import ff_along, form_factor, horizontal_ff, recover_ff_snr, recover_ff_stvr
from ocular.imagecore import NoiseSpec, add_noise, noise_variance_for_snr, synth_eye, synth_step_edge
from ocular.noiseblind import estimate, snr_error_pct, stvr_error_pct
from ocular.pupil import PupilLocation, eye_corners, hit_test, pupil_center, pupil_center_peak, pupil_diameter
from ocular.saccade import (
    SaccadeEvent, TrackerConfig, TrackerState, ekf_step, fir_velocity, kf_step, profile_match_error,
    render_trace, run_filter, saccade_segments, saccadic_ratio, simulate_eye_motion, track_sequence,
)

RESULTS = {}


def report(n, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NumericalDegeneracyWarning)
        yield


# ---------------------------------------------------------------------------

def test_c01_form_factor_bounds():
    rng = np.random.default_rng(0)
    worst = 0.0
    ok = True
    for n in (2, 9, 64):
        x = rng.uniform(0, 1, (10_000, n))
        x[::3] = x[::3] ** 8  # push a third towards sparse vectors
        f = ff_along(x, 1)
        ok &= bool(np.all(f >= 1 - 1e-12) and np.all(f <= np.sqrt(n) + 1e-12))
        # loop version on a sample, against the vectorized one
        ok &= all(abs(form_factor(v) - fv) < 1e-12 for v, fv in zip(x[:200], f[:200]))
        c = form_factor(np.full(n, 3.7))
        e = np.zeros(n)
        e[n // 2] = 5.0
        s = form_factor(e)
        worst = max(worst, abs(c - 1), abs(s - np.sqrt(n)))
    ok &= worst <= 1e-12
    report(1, ok, f"1 <= F <= sqrt(N) on 3x10^4 vectors; constant/single-spike max error {worst:.1e}")


def test_c02_noise_recovery():
    # moment level: build F_g from a known F_s and invert
    fs = np.linspace(1, 5, 41)
    worst = 0.0
    for snr in (0.1, 1.0, 10.0, 1e3):
        stvr = snr / (1 + snr)
        fg = np.sqrt((fs**2 - 1) / stvr + 1)
        worst = max(worst, np.abs(recover_ff_stvr(fg, stvr) - fs).max(), np.abs(recover_ff_snr(fg, snr) - fs).max())
    # sample level: 100 draws at 10 dB, per-column profile of a synthetic eye
    eye = synth_eye(96, 48, (47.5, 23.5), 6, 14, 0.0).image
    clean = horizontal_ff(eye).values
    v = noise_variance_for_snr(eye, 10.0)
    snr_col = eye.var(axis=0) / v
    acc = np.zeros_like(clean)
    for k in range(100):
        fg = horizontal_ff(add_noise(eye, NoiseSpec(v, k))).values
        acc += np.array([recover_ff_snr(f, s) for f, s in zip(fg, snr_col)])
    rel = float(np.max(np.abs(acc / 100 / clean - 1)))
    report(2, worst <= 1e-12 and rel <= 0.02,
           f"moment-level max error {worst:.1e}; sample-level max relative error {100 * rel:.3f}% (<= 2%)")


def test_c03_snr_vs_stvr():
    s2, d = 1.0, 0.1
    val = snr_error_pct(s2, d * s2, 0.01 * s2)
    # oracle from the definitions: SNR = s2 / n2 and STVR = s2 / g2, with the blind
    # estimate moving d*s2 of variance from the noise part to the image part
    n2 = 0.01 * s2
    direct = 100 * (((s2 + d * s2) / (n2 - d * s2)) / (s2 / n2) - 1)
    stvr_dev = 0.0
    for n2 in np.logspace(-3, 3, 61) * s2:
        g2 = s2 + n2
        oracle = 100 * (((s2 + d * s2) / g2) / (s2 / g2) - 1)
        stvr_dev = max(stvr_dev, abs(stvr_error_pct(s2, d * s2) - oracle), abs(oracle - 10.0))
    ok = abs(val - (-91.82)) <= 0.01 and stvr_dev <= 1e-9
    report(3, ok, f"snr_error_pct(1, 0.1, 0.01) = {val:.2f}% (definition gives {direct:.2f}%; "
                  f"target -91.82 +- 0.01); STVR error 10% over 6 decades, max deviation {stvr_dev:.1e}")


def test_c04_estimator_ordering():
    rng = np.random.default_rng(0)
    methods = ["M1", "M2", "M3", "M4", "M5"]
    ape = {m: [] for m in methods}
    m1_snr_hi = []
    for i in range(50):
        e = synth_eye(160, 80, (rng.uniform(60, 100), rng.uniform(35, 45)), rng.uniform(6, 11),
                      rng.uniform(18, 24), rng.uniform(0, 0.5), supersample=1).image
        snr_db = 30 * i / 49
        v = noise_variance_for_snr(e, snr_db)
        g = add_noise(e, NoiseSpec(v, i))
        s2 = e.var()
        for m in methods:
            est = estimate(g, m)
            ape[m].append(abs(est.sigma_s2 - s2) / s2 * 100)
            if m == "M1" and snr_db >= 20:
                m1_snr_hi.append(abs(snr_error_pct(s2, est.sigma_s2 - s2, v)))
    med = {m: float(np.median(ape[m])) for m in methods}
    best = min(med, key=med.get)
    m1 = float(np.mean(m1_snr_hi))
    report(4, best == "M4" and m1 > 100,
           "median APE " + ", ".join(f"{m} {med[m]:.2f}%" for m in methods)
           + f"; M1 mean |SNR error| at >= 20 dB {m1:.0f}%")


def test_c05_dct_equivalence():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(50):
        x, f = rng.uniform(-1, 1, (8, 8)), rng.uniform(-1, 1, (8, 8))
        g = correlate(x, sfft.dctn(f, norm="ortho"), "DCT")
        worst = max(worst, float(np.abs(g - dct_spatial_equivalent(x, f)).max()))
    report(5, worst < 1e-9, f"transform vs spatial construction, 50 pairs, max error {worst:.1e}")


def test_c06_decorrelation():
    dct = mean_offdiagonal(markov1_decorrelation(0.99, 64, "DCT"))
    dft = mean_offdiagonal(markov1_decorrelation(0.99, 64, "DFT"))
    report(6, dct < dft, f"mean off-diagonal |rho_v|: DCT {dct:.4g}, DFT {dft:.4g}, ratio {dct / dft:.4g}")


def test_c07_classification():
    imgs, labels = synth_state_corpus(100, seed=0)
    idx = np.random.default_rng(1).permutation(len(imgs))
    tr, te = idx[:210], idx[210:]
    acc, train_ok = {}, {}
    for domain in ("DCT", "DFT"):
        train = {s: [imgs[i] for i in tr if labels[i] == s] for s in EyeState}
        bank = synthesize_otmach(train, domain=domain)
        acc[domain] = np.mean([classify(imgs[i], bank)[0] == labels[i] for i in te])
        train_ok[domain] = all(classify(imgs[i], bank)[0] == labels[i] for i in tr)
    ok = acc["DCT"] >= 0.90 and acc["DCT"] >= acc["DFT"] and train_ok["DCT"]
    report(7, ok, f"test accuracy DCT {acc['DCT']:.3f}, DFT {acc['DFT']:.3f}; "
                  f"all DCT training images in own class: {train_ok['DCT']}")


def test_c08_perclos():
    O, P, C = EyeState.OPEN, EyeState.PARTIAL, EyeState.CLOSED
    fps, n = 30, 5400
    cases = []
    cases.append((perclos_p3([O] * n, fps), 0.0))
    cases.append((perclos_p3([C] * n, fps), 100.0))
    s = [O] * n
    s[1000:1540] = [C] * 540
    cases.append((perclos_p3(s, fps), 10.0))
    # the same 540 closed frames plus 30 short blinks (6 frames = 0.2 s each)
    b = list(s)
    for k in range(30):
        start = 2000 + 100 * k
        b[start:start + 6] = [P, C, C, C, C, P]
    flags = blink_filter(b, fps)
    cases.append((perclos_p3(b, fps, flags), 10.0))
    ok = all(len(got) == 1 and got[0] == (3.0, want) for got, want in cases) and flags.sum() == 180
    report(8, ok, "PERCLOS " + ", ".join(f"{got[0][1]:g}%" for got, _ in cases)
                  + f" (expected 0, 100, 10, 10); blink frames flagged {int(flags.sum())}")


def test_c09_pupil():
    rng = np.random.default_rng(0)
    hits, e_com, e_peak, d_err = [], [], [], []
    for i in range(200):
        W, H = 80, 48
        cov = rng.uniform(0, 0.4) if i % 2 else 0.0
        r = rng.uniform(4.5, 8)
        ir = rng.uniform(2.0, 2.6) * r
        px, py = rng.uniform(W * 0.3, W * 0.7), H / 2 + rng.uniform(-2, 2)
        e = synth_eye(W, H, (px, py), r, ir, cov).image
        g = add_noise(e, NoiseSpec(noise_variance_for_snr(e, 20), i))
        t = PupilLocation(px, py)
        c, p = pupil_center(g), pupil_center_peak(g)
        hits.append(hit_test(c, t, 4.0))
        e_com.append(c.distance(t))
        e_peak.append(p.distance(t))
        if cov == 0:
            d_err.append(abs(pupil_diameter(g, c).diameter - 2 * r) / (2 * r))
    hit, ec, ep, dmax = np.mean(hits), np.mean(e_com), np.mean(e_peak), np.max(d_err)
    report(9, hit >= 0.95 and dmax <= 0.10 and ec <= ep,
           f"hit rate {hit:.3f} at r_e = 4; worst unoccluded diameter error {100 * dmax:.1f}%; "
           f"mean error COM {ec:.3f} px vs peak {ep:.3f} px")


def _shapes(n=64):
    yy, xx = np.indices((n, n))
    r = np.hypot(xx - 31.5, yy - 31.5)
    return [
        (xx >= 20) & (xx < 44) & (yy >= 20) & (yy < 44),
        r <= 14,
        (xx >= 10) & (xx < 54) & (yy >= 24) & (yy < 40),
        ((xx - 32) / 20) ** 2 + ((yy - 32) / 10) ** 2 <= 1,
        (yy >= 16) & (yy < 48) & (np.abs(xx - 32) <= (yy - 16) / 1.4),
        ((xx >= 12) & (xx < 28) & (yy >= 12) & (yy < 28)) | ((xx >= 36) & (xx < 52) & (yy >= 36) & (yy < 52)),
        (r <= 18) & (r >= 9),
        (np.abs(xx - 32) <= 4) | (np.abs(yy - 32) <= 4),
        np.abs(xx - 32) + np.abs(yy - 32) <= 16,
        xx >= 32,
    ]


def _boundary(mask):
    """Background pixels 4-adjacent to the shape (the detector marks the darker side)."""
    out = np.zeros_like(mask)
    out[1:] |= mask[:-1]
    out[:-1] |= mask[1:]
    out[:, 1:] |= mask[:, :-1]
    out[:, :-1] |= mask[:, 1:]
    return out & ~mask


def test_c10_edges():
    steps_ok = []
    for low, high in ((0, 1), (254, 255)):
        e = detect_edges(synth_step_edge(32, 24, low, high)).bits
        steps_ok.append(e.any() and np.all(e.sum(axis=1) == 1) and len(set(np.nonzero(e)[1])) == 1)
    levels = [(40, 200), (0, 1), (254, 255), (90, 160), (10, 250)]
    clean, noisy = [], []
    for i, m in enumerate(_shapes()):
        lo, hi = levels[i % len(levels)]
        img = np.where(m, hi, lo).astype(float)
        gt = _boundary(m)
        clean.append(baddeley_metric(detect_edges(img).bits, gt))
        g = add_noise(img, NoiseSpec(noise_variance_for_snr(img, 15.0), i))
        noisy.append(baddeley_metric(detect_edges(g).bits, gt))  # STVR compensation on by default
    c, nz = float(np.mean(clean)), float(np.mean(noisy))
    ratio = nz / c if c > 0 else (1.0 if nz == 0 else np.inf)
    ok = all(steps_ok) and max(clean) <= 0.02 and ratio <= 2.0
    report(10, ok, f"contrast-1 steps single-pixel at both extremes: {all(steps_ok)}; "
                   f"BEM clean max {max(clean):.4f} mean {c:.4f}; 15 dB mean {nz:.4f} (x{ratio:.2f})")


def test_c11_baddeley_axioms():
    rng = np.random.default_rng(0)
    ident, sym, oracle = 0.0, 0.0, 0.0
    for _ in range(20):
        a = rng.uniform(size=(16, 16)) < rng.uniform(0.02, 0.3)
        b = rng.uniform(size=(16, 16)) < rng.uniform(0.02, 0.3)
        ident = max(ident, baddeley_metric(a, a))
        sym = max(sym, abs(baddeley_metric(a, b) - baddeley_metric(b, a)))
        oracle = max(oracle, abs(baddeley_metric(a, b) - baddeley_metric_bruteforce(a, b)))
    report(11, ident == 0 and sym <= 1e-12 and oracle <= 1e-9,
           f"max D(I,I) {ident}; asymmetry {sym:.1e}; oracle gap {oracle:.1e}")


def test_c12_tracking():
    rng = np.random.default_rng(0)
    # KF == EKF on random states and measurements
    gap = 0.0
    for _ in range(200):
        A = rng.normal(size=(2, 2))
        s = TrackerState(rng.normal(0, 10, 2), A @ A.T + 0.1 * np.eye(2), np.diag(rng.uniform(0, 1, 2)),
                         rng.uniform(0.01, 5))
        z, dt = rng.normal(0, 10), rng.uniform(1e-3, 0.05)
        a, b = kf_step(s, z, dt), ekf_step(s, z, dt)
        gap = max(gap, np.abs(a.x_hat - b.x_hat).max(), np.abs(a.P - b.P).max())
    hand = kf_step(TrackerState(np.zeros(2), np.eye(2), np.zeros((2, 2)), 1.0), 1.0, 1.0)
    hand_err = float(np.abs(hand.x_hat - [2 / 3, 1 / 3]).max())
    # 1000 simulated 500 Hz traces
    pos = {"kf": [], "ekf": []}
    vel = {"kf": [], "ekf": []}
    for i in range(1000):
        amp = rng.uniform(-20, 20)
        tr = simulate_eye_motion(saccade_segments([amp], 0.02, 0.3), 500, seed=i)
        z = tr.samples + rng.normal(0, 0.5, len(tr))
        ref = fir_velocity(tr, 5).aligned()
        for kind in pos:
            est = run_filter(z, tr.dt, TrackerConfig(kind=kind))
            pos[kind].append(np.mean(est[:, 0] - tr.samples))
            vel[kind].append(profile_match_error(est[:, 1], ref))
    mp = {k: float(np.mean(v)) for k, v in pos.items()}
    mv = {k: float(np.mean(v)) for k, v in vel.items()}
    ok = gap <= 1e-12 and hand_err <= 1e-12 and all(abs(v) < 0.5 for v in mp.values()) and mv["ekf"] <= mv["kf"]
    report(12, ok, f"KF/EKF gap {gap:.1e}; hand gain error {hand_err:.1e}; mean position error "
                   f"KF {mp['kf']:.4f} EKF {mp['ekf']:.4f} deg; velocity match KF {mv['kf']:.3f} "
                   f"EKF {mv['ekf']:.3f} deg/s")


def test_c13_closed_loop():
    fs, amp, T = 250.0, 20.0, 0.04
    tr = simulate_eye_motion(saccade_segments([amp], T, 0.1), fs, start=-amp / 2)
    frames = render_trace(tr.samples, width=320)
    res = track_sequence(frames, fs, tracker=TrackerConfig(q=(1e-2, 1e5), r=0.01),
                         fixed_corners=eye_corners(frames[0]))
    n = int(round(T * fs))
    psv_true = amp * np.pi / (2 * T)  # raised-cosine peak
    ok = len(res.events) == 1
    psv_err, scd_frames = np.nan, np.nan
    if ok:
        ev = res.events[0]
        psv_err = ev.peak_velocity / psv_true - 1
        scd_frames = ev.duration * fs
        ok = abs(psv_err) <= 0.10 and abs(scd_frames - n) <= 1 + 1e-9
    a = saccadic_ratio([SaccadeEvent(0, 10, 400.0, 0.05)]).mean
    b = saccadic_ratio([SaccadeEvent(0, 20, 200.0, 0.10)]).mean
    scale_ok = b == a / 4
    report(13, ok and scale_ok, f"{len(res.events)} event(s); PSV error {100 * psv_err:+.1f}%; "
                                f"SCD {scd_frames:.0f} vs {n} frames; SR(v/2, 2d) = SR/4 exactly: {scale_ok}")


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_c"):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NumericalDegeneracyWarning)
                try:
                    fn()
                except AssertionError:
                    pass
