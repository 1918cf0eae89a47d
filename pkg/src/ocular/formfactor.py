"""Form Factor (RMS over mean) of pixel sequences and its recovery under noise.

For a sequence ``x`` of length ``N`` the Form Factor is

    F = sqrt(N * sum(x**2)) / sum(x) = sqrt(1 + var(x) / mean(x)**2)

which lies in ``[1, sqrt(N)]`` for non-negative data.  It is invariant to a
positive gain, which is why it is useful on unevenly lit eye images.

Image-level helpers (profiles, local maps) accept real-valued pixels because
additive noise is kept unclamped; they use ``|sum(x)|`` in the denominator and
clamp to the bound so that a noisy near-zero window cannot leave the range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .diagnostics import OcularError, flag
from .imagecore import PolarImage, as_image

__all__ = [
    "FFProfile", "FFMap", "NoiseRatio",
    "form_factor", "ff_along", "horizontal_ff", "vertical_ff", "radial_ff", "local_ff",
    "window_moments", "recover_ff_snr", "recover_ff_stvr",
]


@dataclass(frozen=True)
class FFProfile:
    axis: str  # "horizontal" (per column), "vertical" (per row) or "radial" (per ring)
    values: np.ndarray
    n_per_sample: int

    def argmax(self):
        return int(np.argmax(self.values))


@dataclass(frozen=True)
class FFMap:
    values: np.ndarray
    window: int = 3

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class NoiseRatio:
    kind: str  # "SNR" or "STVR"
    value: float

    def __post_init__(self):
        if self.kind not in ("SNR", "STVR"):
            raise OcularError(f"unknown ratio kind {self.kind!r}")
        if not self.value >= 0:
            raise OcularError(f"{self.kind} must be >= 0, got {self.value}")
        if self.kind == "STVR" and self.value > 1:
            raise OcularError(f"STVR must lie in [0, 1], got {self.value}")

    def __float__(self):
        return float(self.value)


def form_factor(seq):
    """Form Factor of a non-negative sequence; an all-zero sequence gives 1."""
    x = np.asarray(seq, dtype=np.float64).ravel()
    if x.size == 0:
        raise OcularError("form factor of an empty sequence")
    if np.any(x < 0):
        raise OcularError("form factor needs non-negative intensities")
    s1 = x.sum()
    if s1 == 0:
        return 1.0
    f = np.sqrt(x.size * np.dot(x, x)) / s1
    return float(np.clip(f, 1.0, np.sqrt(x.size)))


def _ff_from_sums(s1, s2, n):
    """Vectorized moment form with the 0/0 case mapped to 1."""
    s1 = np.abs(np.asarray(s1, dtype=np.float64))
    s2 = np.asarray(s2, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.sqrt(n * s2) / s1
    f = np.where(s1 > 0, f, 1.0)
    return np.clip(f, 1.0, np.sqrt(n))


def ff_along(arr, axis):
    """Form Factor of every 1-D slice of ``arr`` taken along ``axis``."""
    arr = np.asarray(arr, dtype=np.float64)
    n = arr.shape[axis]
    return _ff_from_sums(arr.sum(axis=axis), (arr * arr).sum(axis=axis), n)


def horizontal_ff(img):
    """One value per column."""
    img = as_image(img)
    return FFProfile("horizontal", ff_along(img, 0), img.shape[0])


def vertical_ff(img):
    """One value per row."""
    img = as_image(img)
    return FFProfile("vertical", ff_along(img, 1), img.shape[1])


def radial_ff(polar, band=0):
    """One value per ring of a polar image.

    With ``band > 0`` each ring is pooled with its ``band`` neighbours on
    either side (clipped at the ends) before the Form Factor is taken.
    """
    samples = polar.samples if isinstance(polar, PolarImage) else np.asarray(polar, dtype=np.float64)
    if band <= 0:
        return FFProfile("radial", ff_along(samples, 1), samples.shape[1])
    s1 = samples.sum(axis=1)
    s2 = (samples * samples).sum(axis=1)
    r = len(s1)
    c1 = np.concatenate([[0.0], np.cumsum(s1)])
    c2 = np.concatenate([[0.0], np.cumsum(s2)])
    lo = np.clip(np.arange(r) - band, 0, r)
    hi = np.clip(np.arange(r) + band + 1, 0, r)
    counts = (hi - lo) * samples.shape[1]
    f = _ff_from_sums(c1[hi] - c1[lo], c2[hi] - c2[lo], counts)
    return FFProfile("radial", np.minimum(f, np.sqrt(counts)), int(counts.min()))


def window_moments(img, window=3):
    """Per-pixel window sums ``(sum x, sum x**2)`` with edge replication."""
    img = as_image(img)
    if window < 3 or window % 2 == 0:
        raise OcularError(f"window must be odd and >= 3, got {window}")
    pad = window // 2
    padded = np.pad(img, pad, mode="edge")
    win = sliding_window_view(padded, (window, window))
    return win.sum(axis=(2, 3)), (win * win).sum(axis=(2, 3))


def local_ff(img, window=3):
    """Form Factor of the ``window``-square neighbourhood of every pixel."""
    s1, s2 = window_moments(img, window)
    return FFMap(_ff_from_sums(s1, s2, window * window), window)


def _ratio_value(r, kind):
    if isinstance(r, NoiseRatio):
        if r.kind != kind:
            raise OcularError(f"expected an {kind} ratio, got {r.kind}")
        return r.value
    return float(NoiseRatio(kind, float(r)).value)


def recover_ff_snr(f_g, snr):
    """Noise-free Form Factor from a noisy one and the image SNR.

    ``F_s**2 = (F_g**2 + 1/SNR) / (1 + 1/SNR)``.  SNR = inf is the noiseless
    case and SNR = 0 means everything is noise (result 1).
    """
    snr = _ratio_value(snr, "SNR")
    f_g = np.asarray(f_g, dtype=np.float64)
    if np.isinf(snr):
        out = f_g.copy()
    elif snr == 0:
        out = np.ones_like(f_g)
    else:
        # multiply through by SNR to stay exact for large SNR
        out = _sqrt_floor((snr * f_g**2 + 1) / (snr + 1))
    return _maybe_scalar(np.maximum(out, 1.0))


def recover_ff_stvr(f_g, stvr):
    """Noise-free Form Factor from a noisy one: ``F_s**2 = STVR*(F_g**2 - 1) + 1``."""
    stvr = _ratio_value(stvr, "STVR")
    f_g = np.asarray(f_g, dtype=np.float64)
    return _maybe_scalar(np.maximum(_sqrt_floor(stvr * (f_g**2 - 1) + 1), 1.0))


def _sqrt_floor(radicand):
    radicand = np.asarray(radicand, dtype=np.float64)
    if np.any(radicand < 1 - 1e-12):
        flag("recovered Form Factor radicand below 1; clamped to 1")
    return np.sqrt(np.maximum(radicand, 1.0))


def _maybe_scalar(a):
    return float(a) if np.ndim(a) == 0 else a
