"""Eyelid-state classification and the PERCLOS drowsiness index.

* OT-MACH correlation filters synthesized in the DFT or DCT domain, scored by
  peak-to-sidelobe ratio, normalized mutual information and Fisher ratio and
  combined by a 2-of-3 vote.
* An eigen-eye (per-class PCA) baseline.
* Markov-1 decorrelation matrices for the unitary DFT and DCT.
* Blink filtering and PERCLOS P3 over sliding three-minute windows.

All transforms are orthonormal: ``fft2(norm="ortho")`` and type-II
``dctn(norm="ortho")``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import fft as sfft

from .diagnostics import OcularError, flag
from .imagecore import EyeLevels, NoiseSpec, add_noise, as_image, noise_variance_for_snr, synth_eye

__all__ = [
    "EyeState", "FilterBank", "ClassificationScores", "EigenEyeModel",
    "forward", "inverse", "synthesize_otmach", "correlate", "dct_kernel", "dct_kernel_closed_form",
    "dct_spatial_equivalent", "psr", "mutual_information", "fisher_ratio", "classify",
    "esd_train", "esd_classify", "markov1_decorrelation", "mean_offdiagonal",
    "blink_filter", "perclos_p3", "synth_state_corpus", "COVERAGE_BANDS",
]

EPS = 1e-12


class EyeState(enum.IntEnum):
    OPEN = 0
    PARTIAL = 1
    CLOSED = 2

    @classmethod
    def parse(cls, text):
        key = str(text).strip().lower()
        aliases = {"open": cls.OPEN, "o": cls.OPEN, "0": cls.OPEN,
                   "partial": cls.PARTIAL, "partiallyclosed": cls.PARTIAL, "p": cls.PARTIAL, "1": cls.PARTIAL,
                   "closed": cls.CLOSED, "c": cls.CLOSED, "2": cls.CLOSED}
        try:
            return aliases[key.replace("_", "").replace("-", "")]
        except KeyError:
            raise OcularError(f"unknown eye state {text!r}") from None

    @property
    def label(self):
        return self.name.lower()


# lid coverage (fraction of the iris hidden) per class
COVERAGE_BANDS = {EyeState.OPEN: (0.0, 0.5), EyeState.PARTIAL: (0.6, 0.8), EyeState.CLOSED: (0.9, 1.0)}
# narrower draws around 0.2 / 0.7 / 1.0 for the synthetic training corpus
CORPUS_BANDS = {EyeState.OPEN: (0.1, 0.3), EyeState.PARTIAL: (0.65, 0.75), EyeState.CLOSED: (0.95, 1.0)}


# ---------------------------------------------------------------------------
# transforms

def forward(img, domain):
    img = np.asarray(img, dtype=np.float64)
    if domain == "DFT":
        return np.fft.fft2(img, norm="ortho")
    if domain == "DCT":
        return sfft.dctn(img, type=2, norm="ortho")
    raise OcularError(f"domain must be 'DFT' or 'DCT', got {domain!r}")


def inverse(coef, domain):
    if domain == "DFT":
        return np.fft.ifft2(coef, norm="ortho").real
    if domain == "DCT":
        return sfft.idctn(coef, type=2, norm="ortho")
    raise OcularError(f"domain must be 'DFT' or 'DCT', got {domain!r}")


# ---------------------------------------------------------------------------
# OT-MACH filters

@dataclass
class FilterBank:
    domain: str
    image_shape: tuple
    classes: list  # EyeState values, in vote order
    filters: dict  # EyeState -> transform-domain filter
    means: dict  # EyeState -> transform-domain class mean
    variances: dict  # EyeState -> per-coefficient class variance
    a: float = 0.1
    b: float = 0.2
    c: float = 0.7
    sigma2: float = 1.0

    def save(self, path):
        """Write ``<path>.json`` (metadata) and ``<path>.bin`` (little-endian float64)."""
        path = Path(path)
        base = path.with_suffix("") if path.suffix in (".json", ".bin") else path
        entries, chunks, offset = [], [], 0
        for cls in self.classes:
            for name, store in (("filter", self.filters), ("mean", self.means), ("variance", self.variances)):
                arr = np.asarray(store[cls])
                planes = [arr.real, arr.imag] if np.iscomplexobj(arr) else [arr]
                for part, plane in zip(("real", "imag"), planes):
                    data = np.ascontiguousarray(plane, dtype="<f8")
                    entries.append({"class": cls.label, "name": name, "part": part,
                                    "offset": offset, "shape": list(data.shape)})
                    chunks.append(data.tobytes())
                    offset += data.nbytes
        meta = {"format": "otmach-filterbank/1", "domain": self.domain,
                "image_shape": list(self.image_shape), "classes": [c.label for c in self.classes],
                "a": self.a, "b": self.b, "c": self.c, "sigma2": self.sigma2,
                "dtype": "<f8", "order": "C", "entries": entries}
        Path(f"{base}.json").write_text(json.dumps(meta, indent=2) + "\n")
        Path(f"{base}.bin").write_bytes(b"".join(chunks))
        return Path(f"{base}.json"), Path(f"{base}.bin")

    @classmethod
    def load(cls, path):
        path = Path(path)
        base = path.with_suffix("") if path.suffix in (".json", ".bin") else path
        try:
            meta = json.loads(Path(f"{base}.json").read_text())
            blob = Path(f"{base}.bin").read_bytes()
        except (OSError, ValueError) as exc:
            raise OcularError(f"cannot read filter bank {base}: {exc}") from None
        stores = {"filter": {}, "mean": {}, "variance": {}}
        for e in meta["entries"]:
            n = int(np.prod(e["shape"])) * 8
            if e["offset"] + n > len(blob):
                raise OcularError(f"filter bank blob {base}.bin is truncated")
            arr = np.frombuffer(blob, dtype="<f8", count=n // 8, offset=e["offset"]).reshape(e["shape"])
            key = EyeState.parse(e["class"])
            slot = stores[e["name"]]
            slot[key] = arr.copy() if e["part"] == "real" else slot[key] + 1j * arr
        return cls(domain=meta["domain"], image_shape=tuple(meta["image_shape"]),
                   classes=[EyeState.parse(c) for c in meta["classes"]],
                   filters=stores["filter"], means=stores["mean"], variances=stores["variance"],
                   a=meta["a"], b=meta["b"], c=meta["c"], sigma2=meta["sigma2"])


def synthesize_otmach(train, a=0.1, b=0.2, c=0.7, sigma2=1.0, domain="DCT"):
    """One OT-MACH filter per class: ``h = m / (a*sigma2 + b*D + c*S)`` element-wise.

    ``train`` maps each class to a list of equally sized images.  ``m`` is the
    mean transform, ``D`` the mean power spectrum and ``S`` the spread of the
    transforms around ``m``.  Bins where the denominator vanishes are floored
    at a tiny epsilon and flagged.
    """
    if min(a, b, c) < 0 or a + b + c <= 0:
        raise OcularError("trade-off parameters must be >= 0 and not all zero")
    if not train:
        raise OcularError("no training classes")
    shape = None
    filters, means, variances = {}, {}, {}
    classes = sorted(EyeState(k) for k in train)
    for cls in classes:
        imgs = [as_image(x) for x in train[cls]]
        if len(imgs) < 2:
            raise OcularError(f"class {cls.label}: need at least 2 training images")
        shape = shape or imgs[0].shape
        if any(x.shape != shape for x in imgs):
            raise OcularError("training images differ in size")
        X = np.stack([forward(x, domain) for x in imgs])
        m = X.mean(axis=0)
        D = np.mean(np.abs(X) ** 2, axis=0)
        S = np.mean(np.abs(X - m) ** 2, axis=0)
        den = a * sigma2 + b * D + c * S
        if np.any(den < EPS):
            flag(f"class {cls.label}: OT-MACH denominator vanished in {int(np.sum(den < EPS))} bins; "
                 "floored at epsilon")
            den = np.maximum(den, EPS)
        filters[cls] = m / den
        means[cls] = m
        variances[cls] = S
    return FilterBank(domain, tuple(shape), classes, filters, means, variances, a, b, c, sigma2)


def correlate(test, h, domain):
    """Correlation surface of ``test`` with a transform-domain filter ``h``.

    DFT: circular cross-correlation ``ifft2(T * conj(H))``.
    DCT: ``idctn(T * H)``; this is not a correlation but peaks at the origin
    for a matched pair (see ``dct_spatial_equivalent``).
    """
    test = as_image(test)
    h = np.asarray(h)
    if test.shape != h.shape:
        raise OcularError(f"test image {test.shape} does not match filter {h.shape}")
    T = forward(test, domain)
    if domain == "DFT":
        return inverse(T * np.conj(h), domain)
    return inverse(T * h, domain)


def _dct_weights(M):
    c = np.full(M, np.sqrt(2.0 / M))
    c[0] = np.sqrt(1.0 / M)
    return c


def dct_kernel(M):
    """One period (length ``2M``) of ``z(t) = 1/4 sum_k c_k**3 cos(pi k (2t - 1) / (2M))``."""
    c3 = _dct_weights(M) ** 3
    t = np.arange(2 * M)[:, None]
    k = np.arange(M)[None, :]
    return 0.25 * (c3 * np.cos(np.pi * k * (2 * t - 1) / (2 * M))).sum(axis=1)


def dct_kernel_closed_form(M):
    """Closed form of ``dct_kernel`` (a Dirichlet-type sum)."""
    t = np.arange(2 * M)
    u = np.pi * (2 * t - 1)
    s = np.cos(u * (M - 1) / (4 * M)) * np.sin(u / 4) / np.sin(u / (4 * M))
    return 0.25 * (2.0 / M) ** 1.5 * ((1 / (2 * np.sqrt(2)) - 1) + s)


def _sym_extend(x):
    """Period-2M/2N even extension about -1/2, indexed 0..2M-1 (index 2M-1-i mirrors i)."""
    return np.concatenate([np.concatenate([x, x[::-1]], axis=0),
                           np.concatenate([x, x[::-1]], axis=0)[:, ::-1]], axis=1)


def _circ_conv2(a, b):
    """Direct 2-D circular convolution (no FFT), for the spatial oracle."""
    P, Q = a.shape
    out = np.zeros((P, Q))
    for i in range(P):
        for j in range(Q):
            if a[i, j] != 0:
                out += a[i, j] * np.roll(np.roll(b, i, axis=0), j, axis=1)
    return out


def dct_spatial_equivalent(test, filt):
    """Spatial construction of the DCT-path surface for a spatial filter ``filt``.

    Both images are extended to even period-(2M, 2N) signals, circularly
    convolved with each other and with the separable kernel
    ``Z(i, j) = z_M(i) z_N(j)`` and cropped to the original size.  Equals
    ``correlate(test, dctn(filt), "DCT")``.  Cost grows as ``(MN)**2``.
    """
    test, filt = as_image(test), as_image(filt)
    if test.shape != filt.shape:
        raise OcularError("test and filter differ in size")
    M, N = test.shape
    Z = np.outer(dct_kernel(M), dct_kernel(N))
    tf = _circ_conv2(_sym_extend(test), _sym_extend(filt))
    return _circ_conv2(tf, Z)[:M, :N]


# ---------------------------------------------------------------------------
# scores

@dataclass
class ClassificationScores:
    psr: dict
    mi: dict
    fr: dict
    votes: dict = field(default_factory=dict)
    fallback: bool = False

    def as_dict(self):
        return {cls.label: {"psr": self.psr[cls], "mi": self.mi[cls], "fr": self.fr[cls],
                            "votes": self.votes.get(cls, 0)} for cls in self.psr}


def psr(surface, region=20, exclude=5, pad_mode="wrap"):
    """Peak-to-sidelobe ratio ``(peak - mean) / std`` around the global maximum.

    The sidelobe is the ``region`` square around the peak minus the central
    ``exclude`` square.  Off-surface samples come from ``np.pad`` with
    ``pad_mode`` ('wrap' suits DFT surfaces, 'symmetric' DCT surfaces).  A flat
    sidelobe gives ``inf``.
    """
    g = np.asarray(surface, dtype=np.float64)
    if g.ndim != 2 or min(g.shape) < 1:
        raise OcularError("surface must be 2-D")
    r, c = np.unravel_index(int(np.argmax(g)), g.shape)
    lo = region // 2
    padded = np.pad(g, lo, mode=pad_mode)
    win = padded[r : r + region, c : c + region]  # rows r-lo .. r-lo+region-1
    mask = np.ones(win.shape, bool)
    e0 = lo - exclude // 2
    mask[e0 : e0 + exclude, e0 : e0 + exclude] = False
    side = win[mask]
    sd = side.std()
    peak = g[r, c]
    if sd <= EPS * max(1.0, abs(peak)):
        flag("flat sidelobe; PSR reported as infinity")
        return float("inf")
    return float((peak - side.mean()) / sd)


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def _bin256(x):
    x = np.asarray(x, dtype=np.float64).ravel()
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros(x.size, dtype=np.int64)
    return np.minimum(((x - lo) / (hi - lo) * 256).astype(np.int64), 255)


def mutual_information(a, b):
    """Normalized mutual information ``(H(a) + H(b)) / H(a, b)`` in nats.

    Each input is min-max scaled into 256 equal bins.  Lies in [1, 2]; NaN
    (flagged) when the joint histogram has a single occupied bin.
    """
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise OcularError("mutual information needs equally shaped inputs")
    ia, ib = _bin256(a), _bin256(b)
    ha = _entropy(np.bincount(ia, minlength=256))
    hb = _entropy(np.bincount(ib, minlength=256))
    hab = _entropy(np.bincount(ia * 256 + ib, minlength=256 * 256))
    if hab <= 0:
        flag("degenerate histograms; mutual information undefined")
        return float("nan")
    return (ha + hb) / hab


def fisher_ratio(t, mean, var):
    """``sum |mean - t|**2 / var`` over transform coefficients (variance floored)."""
    t, mean, var = np.asarray(t), np.asarray(mean), np.asarray(var, dtype=np.float64)
    return float(np.sum(np.abs(mean - t) ** 2 / np.maximum(var, EPS)))


def classify(test, bank):
    """2-of-3 vote of max PSR, max MI and min FR; three-way splits fall back to PSR."""
    test = as_image(test)
    if test.shape != tuple(bank.image_shape):
        raise OcularError(f"test image {test.shape} does not match bank {bank.image_shape}")
    T = forward(test, bank.domain)
    pad = "wrap" if bank.domain == "DFT" else "symmetric"
    scores = ClassificationScores({}, {}, {})
    for cls in bank.classes:
        g = correlate(test, bank.filters[cls], bank.domain)
        scores.psr[cls] = psr(g, pad_mode=pad)
        scores.mi[cls] = mutual_information(test, g)
        scores.fr[cls] = fisher_ratio(T, bank.means[cls], bank.variances[cls])

    def pick(d, best):
        vals = np.array([d[c] for c in bank.classes], dtype=np.float64)
        vals = np.where(np.isnan(vals), -np.inf if best == "max" else np.inf, vals)
        return bank.classes[int(np.argmax(vals) if best == "max" else np.argmin(vals))]

    voters = [pick(scores.psr, "max"), pick(scores.mi, "max"), pick(scores.fr, "min")]
    for v in voters:
        scores.votes[v] = scores.votes.get(v, 0) + 1
    winner, n = max(scores.votes.items(), key=lambda kv: (kv[1], -bank.classes.index(kv[0])))
    if n < 2:
        flag("three-way vote split; falling back to the PSR decision")
        scores.fallback = True
        winner = voters[0]
    return winner, scores


# ---------------------------------------------------------------------------
# eigen-eye baseline

@dataclass
class EigenEyeModel:
    classes: list
    means: dict  # EyeState -> flattened mean image
    bases: dict  # EyeState -> (pixels, K) orthonormal columns
    image_shape: tuple


def esd_train(train, k_e):
    """Per-class PCA by the small-matrix route: eigenvectors of ``A.T A`` lifted by ``A``."""
    if k_e < 1:
        raise OcularError("K_E must be >= 1")
    classes = sorted(EyeState(k) for k in train)
    means, bases, shape = {}, {}, None
    for cls in classes:
        imgs = [as_image(x) for x in train[cls]]
        shape = shape or imgs[0].shape
        if any(x.shape != shape for x in imgs):
            raise OcularError("training images differ in size")
        phi = np.stack([x.ravel() for x in imgs], axis=1)  # pixels x samples
        psi = phi.mean(axis=1)
        A = phi - psi[:, None]
        lam, v = np.linalg.eigh(A.T @ A)
        order = np.argsort(lam)[::-1]
        lam, v = lam[order], v[:, order]
        tol = max(lam[0], 0.0) * 1e-10
        keep = [i for i in range(min(k_e, len(lam))) if lam[i] > tol and lam[i] > 0]
        if not keep:
            flag(f"class {cls.label}: training images have no spread; empty eigen-basis")
        u = A @ v[:, keep]
        u = u / np.linalg.norm(u, axis=0, keepdims=True) if keep else u
        means[cls], bases[cls] = psi, u
    return EigenEyeModel(classes, means, bases, tuple(shape))


def esd_errors(test, model):
    phi = as_image(test).ravel()
    errs = {}
    for cls in model.classes:
        d = phi - model.means[cls]
        U = model.bases[cls]
        errs[cls] = float(np.linalg.norm(d - U @ (U.T @ d)))
    return errs


def esd_classify(test, model):
    """Class with the smallest reconstruction error; ties go to the earlier class."""
    errs = esd_errors(test, model)
    vals = np.array([errs[c] for c in model.classes])
    best = int(np.argmin(vals))
    if np.sum(np.isclose(vals, vals[best], rtol=1e-12, atol=1e-12)) > 1:
        flag("tie in eigen-eye reconstruction error; earlier class chosen")
    return model.classes[best], errs


# ---------------------------------------------------------------------------
# Markov-1 decorrelation

def markov1_decorrelation(rho, n, domain):
    """``|rho_v|`` of a Markov-1 covariance ``rho**|i-j|`` after a unitary transform."""
    if not 0 <= rho <= 1:
        raise OcularError("rho must lie in [0, 1]")
    if n < 2:
        raise OcularError("n must be >= 2")
    idx = np.arange(n)
    cu = float(rho) ** np.abs(idx[:, None] - idx[None, :])
    if domain == "DFT":
        W = np.exp(-2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)
        cv = W @ cu @ W.conj().T
    elif domain == "DCT":
        C = sfft.dct(np.eye(n), type=2, norm="ortho", axis=0)
        cv = C @ cu @ C.T
    else:
        raise OcularError(f"domain must be 'DFT' or 'DCT', got {domain!r}")
    d = np.sqrt(np.abs(np.diag(cv)))
    return np.abs(cv) / np.outer(d, d)


def mean_offdiagonal(m):
    m = np.asarray(m)
    n = m.shape[0]
    return float((m.sum() - np.trace(m)) / (n * n - n))


# ---------------------------------------------------------------------------
# blinks and PERCLOS

def blink_filter(states, fps, max_blink_frames=None):
    """Flag runs of non-open frames that are short and bounded by open frames.

    A run counts as a blink when it is preceded and followed by OPEN frames
    and is shorter than ``max_blink_frames`` (default ``round(0.4 * fps)``).
    """
    if not fps > 0:
        raise OcularError("frame rate must be positive")
    limit = int(round(0.4 * fps)) if max_blink_frames is None else int(max_blink_frames)
    s = np.array([int(EyeState(x)) for x in states], dtype=np.int64)
    flags = np.zeros(len(s), bool)
    i = 0
    while i < len(s):
        if s[i] == EyeState.OPEN:
            i += 1
            continue
        j = i
        while j < len(s) and s[j] != EyeState.OPEN:
            j += 1
        if i > 0 and j < len(s) and (j - i) < limit:
            flags[i:j] = True
        i = j
    return flags


def perclos_p3(states, fps, blinks=None, window_s=180.0, step_s=60.0):
    """PERCLOS over sliding windows: one value per minute from minute three on.

    Each value is ``100 * (#partial + #closed non-blink frames) / (fps * window_s)``
    over the window ending at that minute.  ``blinks`` defaults to
    ``blink_filter(states, fps)``.  Returns ``[(minute, percent), ...]``.
    """
    if not fps > 0:
        raise OcularError("frame rate must be positive")
    s = np.array([int(EyeState(x)) for x in states], dtype=np.int64)
    blinks = blink_filter(s, fps) if blinks is None else np.asarray(blinks, bool)
    if blinks.shape != s.shape:
        raise OcularError("blink flags must match the state stream")
    hit = (s != EyeState.OPEN) & ~blinks
    csum = np.concatenate([[0], np.cumsum(hit)])
    win = int(round(fps * window_s))
    step = int(round(fps * step_s))
    out = []
    end = win
    while end <= len(s):
        out.append((end / (fps * 60.0), 100.0 * (csum[end] - csum[end - win]) / win))
        end += step
    return out


# ---------------------------------------------------------------------------
# synthetic corpus

def synth_state_corpus(n_per_class, shape=(48, 64), snr_db=20.0, seed=0, levels=EyeLevels(),
                       bands=CORPUS_BANDS, jitter=0.5, lash_width=1.5):
    """Synthetic eyes with lid coverage drawn from each class band.

    Coverage is drawn from ``bands``.  Pupil position, pupil and iris size
    vary by ``jitter`` times +-2% of the width, +-1 px, +-1% of the width and
    +-0.1 iris/pupil ratio.  A lash line of ``lash_width`` traces the lid
    margin and the outline of the opening.  The noise level is the same for every image, set by ``snr_db`` relative to
    the variance of a fully open reference eye, since sensor noise does not
    depend on the eyelid.  Returns ``(images, labels)`` with classes
    interleaved.
    """
    rng = np.random.default_rng(seed)
    h, w = shape
    # the eye sits off-centre, as in a real crop; a mirror-symmetric eye would
    # give the DCT surface a competing peak at the far column
    ec = (0.45 * w, (h - 1) / 2)
    ref = synth_eye(w, h, (0.4 * w, h / 2), 0.08 * w, 0.176 * w, 0.0, eye_center=ec, levels=levels).image
    noise_var = None if snr_db is None else noise_variance_for_snr(ref, snr_db)
    images, labels = [], []
    for _ in range(n_per_class):
        for cls in EyeState:
            lo, hi = bands[cls]
            r = (0.08 + jitter * rng.uniform(-0.01, 0.01)) * w
            centre = (0.4 * w + jitter * rng.uniform(-0.02, 0.02) * w, h / 2 + jitter * rng.uniform(-1, 1))
            eye = synth_eye(w, h, centre, r, r * (2.2 + jitter * rng.uniform(-0.1, 0.1)),
                            rng.uniform(lo, hi), eye_center=ec, levels=levels,
                            lash_width=lash_width, lid_lash=lash_width > 0)
            img = eye.image
            if noise_var is not None:
                img = add_noise(img, NoiseSpec(noise_var, int(rng.integers(2**31))))
            images.append(img)
            labels.append(cls)
    return images, labels

