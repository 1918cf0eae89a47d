"""Command-line entry point: ``ocular <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 input error, 3 a numerical
degeneracy was flagged while running with ``--strict``.

CSV output uses a header row, ``.`` as decimal point and ``\\n`` line ends.
Floats are written with ``repr`` so identical runs give identical bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from collections import Counter
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import edges as E
from . import eyestate as S
from . import formfactor as FF
from . import imagecore as IC
from . import noiseblind as NB
from . import pupil as P
from . import saccade as SC
from .diagnostics import NumericalDegeneracyWarning, OcularError

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_DEGENERATE = 0, 1, 2, 3

_EDGE = E.EdgeParams()
_OCU = P.OcularParams()
_EST = NB.EstimatorConfig()
_TRK = SC.TrackerConfig()


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


# ---------------------------------------------------------------------------
# output helpers

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if np.isnan(v) else repr(float(v))
    return str(v)


def _csv(rows, header, out=None):
    text = ",".join(header) + "\n" + "".join(",".join(_fmt(v) for v in r) + "\n" for r in rows)
    if out:
        Path(out).write_text(text, newline="\n")
    else:
        sys.stdout.write(text)


def _finite(obj):
    """JSON has no inf/nan: write them as the strings "inf", "-inf", "nan"."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _finite(obj.tolist())
    if isinstance(obj, (float, np.floating)) and not np.isfinite(obj):
        return repr(float(obj))
    return obj


def _json(record, out=None):
    text = json.dumps(_finite(record), indent=2, sort_keys=True, default=IC._jsonable) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _pair(text):
    try:
        a, b = (float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}") from None
    return a, b


def _scaled_pgm(values):
    v = np.asarray(values, dtype=np.float64)
    lo, hi = v.min(), v.max()
    return np.zeros_like(v) if hi == lo else 255.0 * (v - lo) / (hi - lo)


def _frames_or_file(path):
    p = Path(path)
    if p.is_dir():
        frames = IC.read_frames(p)
        if not frames:
            raise OcularError(f"{p}: no frame_*.pgm files")
        return frames, True
    return [(0, IC.load_pgm(p))], False


def _noise(args, img, k=0):
    """Noise at ``--snr-db``; frame ``k`` of a sequence draws with seed ``seed + k``."""
    if args.snr_db is None:
        return img
    var = IC.noise_variance_for_snr(img, args.snr_db)
    return IC.add_noise(img, IC.NoiseSpec(var, None if args.seed is None else args.seed + k))


# ---------------------------------------------------------------------------
# commands

def cmd_synth(args):
    if args.kind == "step":
        imgs = [IC.synth_step_edge(args.width, args.height, args.low, args.high, args.boundary)]
        truth = {"kind": "step", "boundary": args.boundary if args.boundary is not None else args.width // 2}
    elif args.kind == "grating":
        imgs = [IC.synth_grating(args.width, args.height, args.period, args.decay, args.high)]
        truth = {"kind": "grating", "period": args.period, "decay": args.decay}
    else:
        px = (args.width - 1) / 2 if args.pupil is None else args.pupil[0]
        py = (args.height - 1) / 2 if args.pupil is None else args.pupil[1]
        eye = IC.synth_eye(args.width, args.height, (px, py), args.pupil_radius, args.iris_radius,
                           args.coverage, lash_width=args.lash_width)
        imgs = [eye.image]
        truth = {"kind": "eye", **eye.truth()}
    imgs = [_noise(args, imgs[0], k) for k in range(args.frames)]
    truth["snr_db"] = args.snr_db
    truth["seed"] = args.seed
    truth["params"] = _config(args)
    out = Path(args.out)
    if args.frames > 1:
        IC.write_frames(out, imgs)
        IC.write_sidecar(out / "truth.json", truth)
    else:
        IC.save_pgm(out, imgs[0])
        IC.write_sidecar(out.with_suffix(".json"), truth)
    return EXIT_OK


def cmd_ff(args):
    img = IC.gamma_correct(IC.load_pgm(args.input), args.gamma) if args.gamma else IC.load_pgm(args.input)
    if args.mode == "local":
        m = FF.local_ff(img, args.window)
        if args.out and args.out.endswith(".pgm"):
            IC.save_pgm(args.out, _scaled_pgm(m.values))
        else:
            r, c = np.indices(m.values.shape)
            _csv(zip(r.ravel(), c.ravel(), m.values.ravel()), ["row", "col", "value"], args.out)
        return EXIT_OK
    if args.mode == "horizontal":
        prof = FF.horizontal_ff(img)
    elif args.mode == "vertical":
        prof = FF.vertical_ff(img)
    else:
        centre = args.center or ((img.shape[1] - 1) / 2, (img.shape[0] - 1) / 2)
        n_rad = int(min(img.shape) // 2)
        prof = FF.radial_ff(IC.to_polar(img, centre, n_rad, args.angles), band=args.band)
    _csv(enumerate(prof.values), ["index", "value"], args.out)
    return EXIT_OK


def _stvr_source(text):
    if text.lower() == "none":
        return None
    if text.upper() in NB.METHODS:
        return text.upper()
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--stvr takes M1..M5, 'none' or a number, got {text!r}") from None


def _edge_params(args):
    return E.EdgeParams(alpha_low=args.alpha_low, alpha_high=args.alpha_high, nms_window=args.nms,
                        esi_window=args.esi_window, stvr_source=args.stvr,
                        stretch=None if args.no_stretch else (args.stretch_low, 255.0))


def cmd_edges(args):
    emap = E.detect_edges(IC.load_pgm(args.input), _edge_params(args))
    IC.save_pgm(args.out, E.edge_map_to_pgm(emap))
    print(json.dumps({"edge_pixels": emap.count}))
    return EXIT_OK


def cmd_bem(args):
    test = E.edge_map_from_pgm(IC.load_pgm(args.input))
    ref = E.edge_map_from_pgm(IC.load_pgm(args.ref))
    p = float("inf") if args.p == "inf" else float(args.p)
    print(repr(E.baddeley_metric(test, ref, p, args.c)))
    return EXIT_OK


def cmd_noise_est(args):
    cfg = NB.EstimatorConfig(args.region_size, args.c_alpha, args.acs_direction)
    est = NB.estimate(IC.load_pgm(args.input), args.method, cfg)
    _json({"method": est.method, "sigma_s2": est.sigma_s2, "sigma_n2": est.sigma_n2,
           "snr": NB.estimate_snr(est).value, "stvr": NB.estimate_stvr(est).value})
    return EXIT_OK


def _ocular_params(args):
    return P.OcularParams(gamma=args.gamma, zone_halfwidth_frac=args.zone_halfwidth,
                          peak_tolerance_frac=args.peak_tolerance, corner_roi_frac=args.corner_roi,
                          half_view_angle=args.half_view_angle)


def _locate(img, params, want_diameter):
    c = P.pupil_center(img, params)
    rec = {"x": c.x, "y": c.y}
    if want_diameter:
        rec["diameter"] = P.pupil_diameter(img, c, params).diameter
    return c, rec


def _batch_positions(frames, params):
    rows = []
    for k, img in frames:
        try:
            c = P.pupil_center(img, params)
            angle = P.relative_position(c, P.eye_corners(img, params), params.half_view_angle)[1]
            rows.append((k, c.x, c.y, angle))
        except OcularError as exc:
            warnings.warn(f"frame {k}: {exc}", NumericalDegeneracyWarning)
            rows.append((k, np.nan, np.nan, np.nan))
    return rows


def cmd_pupil(args):
    params = _ocular_params(args)
    frames, batch = _frames_or_file(args.input)
    if batch:
        _csv(_batch_positions(frames, params), ["frame", "x", "y", "angle"], args.out)
    else:
        _json(_locate(frames[0][1], params, not args.no_diameter)[1], args.out)
    return EXIT_OK


def cmd_corners(args):
    params = _ocular_params(args)
    frames, batch = _frames_or_file(args.input)
    if batch:
        _csv(_batch_positions(frames, params), ["frame", "x", "y", "angle"], args.out)
        return EXIT_OK
    img = frames[0][1]
    cn = P.eye_corners(img, params)
    c, rec = _locate(img, params, False)
    dist, angle = P.relative_position(c, cn, params.half_view_angle)
    rec.update({"left": list(cn.left), "right": list(cn.right), "distance": dist, "angle": angle})
    _json(rec, args.out)
    return EXIT_OK


def _class_dirs(items):
    train = {}
    for item in items:
        name, sep, path = item.partition("=")
        if not sep:
            raise UsageError(f"--class expects <state>=<dir>, got {item!r}")
        frames = IC.read_frames(path)
        if not frames:
            raise OcularError(f"{path}: no frame_*.pgm files")
        train.setdefault(S.EyeState.parse(name), []).extend(img for _, img in frames)
    return train


def cmd_train_filter(args):
    train = _class_dirs(args.cls)
    bank = S.synthesize_otmach(train, args.a, args.b, args.c, args.sigma2, args.domain)
    j, b = bank.save(args.out)
    _json({"json": str(j), "bin": str(b), "domain": bank.domain, "classes": [c.label for c in bank.classes],
           "images": {c.label: len(train[c]) for c in bank.classes}})
    return EXIT_OK


def _states_from(path, bank_path):
    p = Path(path)
    if p.is_file():
        lines = [ln.strip() for ln in p.read_text().splitlines() if ln.strip()]
        if lines and not lines[0].split(",")[-1].strip().lower() in {"open", "partial", "closed", "0", "1", "2",
                                                                         "o", "p", "c"}:
            lines = lines[1:]  # header
        return [(k, S.EyeState.parse(ln.split(",")[-1])) for k, ln in enumerate(lines, start=1)]
    if bank_path is None:
        raise UsageError("classifying a frame directory needs --bank")
    bank = S.FilterBank.load(bank_path)
    frames = IC.read_frames(p)
    if not frames:
        raise OcularError(f"{p}: no frame_*.pgm files")
    return [(k, S.classify(img, bank)[0]) for k, img in frames]


def cmd_classify(args):
    bank = S.FilterBank.load(args.bank)
    frames, batch = _frames_or_file(args.input)
    if batch:
        rows = [(k, S.classify(img, bank)[0].label) for k, img in frames]
        _csv(rows, ["frame", "state"], args.out)
        return EXIT_OK
    state, sc = S.classify(frames[0][1], bank)
    lab = lambda d: {k.label: v for k, v in d.items()}  # noqa: E731
    _json({"state": state.label, "psr": lab(sc.psr), "mi": lab(sc.mi), "fr": lab(sc.fr),
           "votes": lab(sc.votes), "fallback": sc.fallback}, args.out)
    return EXIT_OK


def cmd_perclos(args):
    states = [s for _, s in _states_from(args.input, args.bank)]
    blinks = S.blink_filter(states, args.fps, args.max_blink_frames)
    vals = S.perclos_p3(states, args.fps, blinks, args.window, args.step)
    if not vals:
        warnings.warn(f"stream shorter than one {args.window:g} s window; no PERCLOS values",
                      NumericalDegeneracyWarning)
    _csv(vals, ["minute", "perclos"], args.out)
    return EXIT_OK


def cmd_decorrelation(args):
    dct = S.mean_offdiagonal(S.markov1_decorrelation(args.rho, args.n, "DCT"))
    dft = S.mean_offdiagonal(S.markov1_decorrelation(args.rho, args.n, "DFT"))
    _json({"rho": args.rho, "n": args.n, "dct_mean_offdiag": dct, "dft_mean_offdiag": dft,
           "ratio_dct_over_dft": dct / dft if dft > 0 else None})
    return EXIT_OK


def _load_motion_spec(path):
    try:
        spec = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise OcularError(f"cannot read motion spec {path}: {exc}") from None
    if isinstance(spec, list):
        spec = {"segments": spec}
    if "segments" not in spec:
        raise OcularError(f"{path}: motion spec needs a 'segments' list")
    return spec


def cmd_simulate_saccade(args):
    spec = _load_motion_spec(args.spec)
    noise = IC.NoiseSpec(args.noise_var, args.seed) if args.noise_var > 0 else None
    tr = SC.simulate_eye_motion(spec["segments"], args.fs, noise, spec.get("start", args.start),
                                (args.tremor_amp, args.tremor_freq), args.seed)
    _csv(((k, k * tr.dt, x) for k, x in enumerate(tr.samples)), ["k", "t", "position"], args.out)
    if args.render:
        frames = SC.render_trace(tr.samples, args.width, half_view_angle=args.half_view_angle,
                                 supersample=args.supersample)
        IC.write_frames(args.render, frames)
        IC.write_sidecar(Path(args.render) / "truth.json",
                         {"fs": args.fs, "segments": spec["segments"], "start": spec.get("start", args.start),
                          "width": args.width, "half_view_angle": args.half_view_angle,
                          "positions": tr.samples})
    return EXIT_OK


def _tracker(args):
    u = 1.0 if args.unit_accel else args.u
    return SC.TrackerConfig(kind=args.tracker, q=(args.q_pos, args.q_vel), r=args.r, u=u, init=args.init)


def cmd_track_saccade(args):
    params = _ocular_params(args)
    frames = IC.read_frames(args.input)
    if not frames:
        raise OcularError(f"{args.input}: no frame_*.pgm files")
    imgs = [img for _, img in frames]
    fixed = P.eye_corners(imgs[0], params) if args.fixed_corners else None
    res = SC.track_sequence(imgs, args.fps, params, _tracker(args), args.v_floor, args.radians, fixed)
    _csv(res.rows(), ["k", "z", "x_hat", "v_hat"], args.out)
    summary = {"fps": args.fps, "tracker": args.tracker, "skipped_frames": res.skipped,
               "events": [asdict(e) for e in res.events],
               "saccadic_ratio": None if res.sr is None else res.sr.as_dict()}
    if res.sr is None:
        warnings.warn("no saccades detected; Saccadic Ratio undefined", NumericalDegeneracyWarning)
    _json(summary, args.summary)
    return EXIT_OK


# ---------------------------------------------------------------------------
# flag grammar

def _add_ocular(p):
    p.add_argument("--gamma", type=float, default=_OCU.gamma)
    p.add_argument("--zone-halfwidth", type=float, default=_OCU.zone_halfwidth_frac)
    p.add_argument("--peak-tolerance", type=float, default=_OCU.peak_tolerance_frac)
    p.add_argument("--corner-roi", type=float, default=_OCU.corner_roi_frac)
    p.add_argument("--half-view-angle", type=float, default=_OCU.half_view_angle)


def build_parser():
    # global flags are accepted before or after the command name
    common = _Parser(add_help=False)
    root = _Parser(prog="ocular", description="Form Factor ocular measurement toolkit.")
    for parser, suppress in ((root, False), (common, True)):
        kw = {"default": argparse.SUPPRESS} if suppress else {}
        parser.add_argument("--strict", action="store_true", **kw,
                            help="exit 3 when a numerical degeneracy is flagged; randomized commands need --seed")
        parser.add_argument("--seed", type=int, **({"default": None} | kw), help="seed for every random draw")
        parser.add_argument("--dump-config", action="store_true", **kw,
                            help="print the effective configuration as JSON and exit")
    sub = root.add_subparsers(dest="command", parser_class=_Parser, required=True)
    _add = sub.add_parser
    sub.add_parser = lambda name, **kw: _add(name, parents=[common], **kw)

    p = sub.add_parser("synth", help="render a synthetic test image (or frame sequence)")
    p.add_argument("--kind", choices=("step", "grating", "eye"), default="step")
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--low", type=float, default=0.0)
    p.add_argument("--high", type=float, default=255.0)
    p.add_argument("--boundary", type=int, default=None, help="step column (default width/2)")
    p.add_argument("--period", type=float, default=8.0)
    p.add_argument("--decay", type=float, default=0.0)
    p.add_argument("--pupil", type=_pair, default=None, metavar="X,Y")
    p.add_argument("--pupil-radius", type=float, default=6.0)
    p.add_argument("--iris-radius", type=float, default=14.0)
    p.add_argument("--coverage", type=float, default=0.0, help="lid coverage of the iris, 0..1")
    p.add_argument("--lash-width", type=float, default=0.0)
    p.add_argument("--snr-db", type=float, default=None, help="add white noise at this SNR")
    p.add_argument("--frames", type=int, default=1, help="write a frame directory of this many frames")
    p.add_argument("--out", default="synth.pgm")
    p.set_defaults(func=cmd_synth, randomized=lambda a: a.snr_db is not None)

    p = sub.add_parser("ff", help="Form Factor profiles or local map")
    p.add_argument("input")
    p.add_argument("--mode", choices=("horizontal", "vertical", "radial", "local"), default="horizontal")
    p.add_argument("--gamma", type=float, default=None, help="gamma-correct first")
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--center", type=_pair, default=None, metavar="X,Y")
    p.add_argument("--angles", type=int, default=_OCU.angles)
    p.add_argument("--band", type=int, default=0)
    p.add_argument("--out", default=None, help="CSV path, or .pgm for a scaled local map")
    p.set_defaults(func=cmd_ff)

    p = sub.add_parser("edges", help="ESI edge detection")
    p.add_argument("input")
    p.add_argument("--alpha-low", type=float, default=_EDGE.alpha_low)
    p.add_argument("--alpha-high", type=float, default=_EDGE.alpha_high)
    p.add_argument("--nms", type=int, default=_EDGE.nms_window)
    p.add_argument("--esi-window", type=int, default=_EDGE.esi_window)
    p.add_argument("--stvr", type=_stvr_source, default=_EDGE.stvr_source)
    p.add_argument("--stretch-low", type=float, default=_EDGE.stretch[0])
    p.add_argument("--no-stretch", action="store_true")
    p.add_argument("--out", default="edges.pgm")
    p.set_defaults(func=cmd_edges)

    p = sub.add_parser("bem", help="Baddeley error metric between two edge maps")
    p.add_argument("input")
    p.add_argument("--ref", required=True)
    p.add_argument("--p", default="2")
    p.add_argument("--c", type=float, default=None, help="cutoff (default image diagonal)")
    p.set_defaults(func=cmd_bem)

    p = sub.add_parser("noise-est", help="blind signal/noise variance estimate")
    p.add_argument("input")
    p.add_argument("--method", choices=sorted(NB.METHODS), default="M4")
    p.add_argument("--region-size", type=int, default=_EST.region_size)
    p.add_argument("--c-alpha", type=float, default=_EST.c_alpha)
    p.add_argument("--acs-direction", choices=("horizontal", "vertical"), default=_EST.acs_direction)
    p.set_defaults(func=cmd_noise_est)

    for name, fn, hlp in (("pupil", cmd_pupil, "pupil centre and diameter"),
                          ("corners", cmd_corners, "eye corners and relative pupil angle")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("input", help="PGM file or frame directory")
        _add_ocular(p)
        if name == "pupil":
            p.add_argument("--no-diameter", action="store_true")
        p.add_argument("--out", default=None)
        p.set_defaults(func=fn)

    p = sub.add_parser("train-filter", help="synthesize an OT-MACH filter bank")
    p.add_argument("--class", dest="cls", action="append", required=True, metavar="STATE=DIR")
    p.add_argument("--domain", choices=("DCT", "DFT"), default="DCT")
    p.add_argument("--a", type=float, default=0.1)
    p.add_argument("--b", type=float, default=0.2)
    p.add_argument("--c", type=float, default=0.7)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--out", default="filterbank")
    p.set_defaults(func=cmd_train_filter)

    p = sub.add_parser("classify", help="eye-state classification")
    p.add_argument("input", help="PGM file or frame directory")
    p.add_argument("--bank", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("perclos", help="PERCLOS per minute from frames or a state list")
    p.add_argument("input", help="frame directory (with --bank) or a CSV/text file of states")
    p.add_argument("--fps", type=float, required=True)
    p.add_argument("--bank", default=None)
    p.add_argument("--max-blink-frames", type=int, default=None, help="default round(0.4*fps)")
    p.add_argument("--window", type=float, default=180.0, help="seconds")
    p.add_argument("--step", type=float, default=60.0, help="seconds")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_perclos)

    p = sub.add_parser("decorrelation", help="Markov-1 decorrelation, DCT vs DFT")
    p.add_argument("--rho", type=float, default=0.99)
    p.add_argument("--n", type=int, default=64)
    p.set_defaults(func=cmd_decorrelation)

    p = sub.add_parser("simulate-saccade", help="simulate an eye-position trace")
    p.add_argument("--spec", required=True, help="JSON list of motion segments, or {segments, start}")
    p.add_argument("--fs", type=float, default=500.0)
    p.add_argument("--start", type=float, default=0.0)
    p.add_argument("--noise-var", type=float, default=0.0)
    p.add_argument("--tremor-amp", type=float, default=0.0)
    p.add_argument("--tremor-freq", type=float, default=80.0)
    p.add_argument("--render", default=None, metavar="DIR", help="also render frames into DIR")
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--half-view-angle", type=float, default=_OCU.half_view_angle)
    p.add_argument("--supersample", type=int, default=2)
    p.add_argument("--out", default="trace.csv")
    p.set_defaults(func=cmd_simulate_saccade,
                   randomized=lambda a: a.noise_var > 0 or a.tremor_amp > 0)

    p = sub.add_parser("track-saccade", help="track frames and report the Saccadic Ratio")
    p.add_argument("input", help="frame directory")
    p.add_argument("--fps", type=float, required=True)
    p.add_argument("--tracker", choices=("kf", "ekf"), default=_TRK.kind)
    p.add_argument("--q-pos", type=float, default=_TRK.q[0])
    p.add_argument("--q-vel", type=float, default=_TRK.q[1])
    p.add_argument("--r", type=float, default=_TRK.r)
    p.add_argument("--u", type=float, default=_TRK.u)
    p.add_argument("--unit-accel", action="store_true", help="unit acceleration input (u = 1)")
    p.add_argument("--init", choices=("measurement", "zero"), default=_TRK.init)
    p.add_argument("--v-floor", type=float, default=30.0)
    p.add_argument("--radians", action="store_true")
    p.add_argument("--fixed-corners", action="store_true", help="detect corners on the first frame only")
    _add_ocular(p)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.add_argument("--summary", default=None, help="JSON summary path (default stdout)")
    p.set_defaults(func=cmd_track_saccade)
    return root


def _config(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "randomized")}


def dispatch(argv=None):
    """Run one command; returns the exit code."""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(str(exc))
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    if args.dump_config:
        _json(_config(args))
        return EXIT_OK
    randomized = getattr(args, "randomized", None)
    if args.strict and args.seed is None and randomized is not None and randomized(args):
        sys.stderr.write(f"ocular {args.command}: --strict needs an explicit --seed for random draws\n")
        return EXIT_USAGE
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NumericalDegeneracyWarning)
        try:
            code = args.func(args)
        except UsageError as exc:
            sys.stderr.write(f"ocular {args.command}: {exc}\n")
            return EXIT_USAGE
        except (OcularError, OSError) as exc:
            sys.stderr.write(f"ocular {args.command}: {exc}\n")
            return EXIT_INPUT
    flagged = [w for w in caught if issubclass(w.category, NumericalDegeneracyWarning)]
    # batch commands hit the same degeneracy on every frame; report each once
    counts = Counter(str(w.message) for w in flagged)
    for msg, n in counts.items():
        sys.stderr.write(f"warning: {msg}" + (f" (x{n})" if n > 1 else "") + "\n")
    for w in caught:
        if not issubclass(w.category, NumericalDegeneracyWarning):
            warnings.showwarning(w.message, w.category, w.filename, w.lineno)
    if flagged and args.strict:
        return EXIT_DEGENERATE
    return code


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
