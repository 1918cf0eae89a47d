"""Edge Strength Index (ESI) edge detector and the Baddeley error metric.

The ESI of a window is ``alpha = 1 / F**2 = (sum x)**2 / (N * sum x**2)``,
which lies in ``[1/N, 1]``: 1 on a flat patch and smaller the stronger the
local contrast.  Edge pixels are those with ``alpha_low <= alpha <= alpha_high``
after noise compensation and thinning (non-minimum suppression).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .diagnostics import OcularError
from .formfactor import window_moments
from .imagecore import as_image
from .noiseblind import EstimatorConfig, estimate, estimate_stvr

__all__ = [
    "ESIMap", "EdgeMap", "EdgeParams", "DIRECTIONS",
    "esi_map", "compensate_esi", "nms_min", "threshold_edges", "detect_edges",
    "contrast_stretch", "baddeley_metric", "baddeley_metric_bruteforce", "esi_from_entropy",
    "edge_map_from_pgm", "edge_map_to_pgm",
]

# (drow, dcol) unit steps for 0, 45, 90 and 135 degrees (image y axis points down)
DIRECTIONS = ((0, 1), (-1, 1), (1, 0), (1, 1))


@dataclass(frozen=True)
class ESIMap:
    values: np.ndarray
    window: int = 3

    @property
    def floor(self):
        return 1.0 / self.window**2


@dataclass(frozen=True)
class EdgeMap:
    bits: np.ndarray  # bool, True = edge

    @property
    def count(self):
        return int(self.bits.sum())


@dataclass(frozen=True)
class EdgeParams:
    alpha_low: float = 0.5
    alpha_high: float = 0.90
    nms_window: int = 5
    esi_window: int = 3
    stvr_source: object = "M4"  # estimator name, or an explicit STVR value, or None to skip
    stretch: tuple | None = (64.0, 255.0)

    def __post_init__(self):
        if not 0.5 <= self.alpha_low < self.alpha_high <= 1:
            raise OcularError("need 0.5 <= alpha_low < alpha_high <= 1")
        if self.nms_window < 3 or self.nms_window % 2 == 0:
            raise OcularError("nms_window must be odd and >= 3")


def esi_map(img, window=3):
    """Per-pixel ESI over a ``window`` square with edge replication."""
    s1, s2 = window_moments(img, window)
    n = window * window
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = s1 * s1 / (n * s2)
    alpha = np.where(s2 > 0, alpha, 1.0)
    return ESIMap(np.clip(alpha, 1.0 / n, 1.0), window)


def compensate_esi(esi, stvr):
    """Undo the contrast added by noise, pixel-wise.

    Noise raises ``1/alpha - 1`` (the squared coefficient of variation) by the
    factor ``1/STVR``, so ``1/alpha_s = STVR * (1/alpha_g - 1) + 1``.
    """
    stvr = float(stvr)
    if not 0 <= stvr <= 1:
        raise OcularError(f"STVR must lie in [0, 1], got {stvr}")
    inv = stvr * (1.0 / esi.values - 1.0) + 1.0
    return ESIMap(np.clip(1.0 / inv, esi.floor, 1.0), esi.window)


def _shifted(a, dr, dc, fill):
    """``out[r, c] = a[r + dr, c + dc]``, ``fill`` where that falls outside."""
    h, w = a.shape
    out = np.full_like(a, fill)
    rs = slice(max(0, -dr), min(h, h - dr))
    cs = slice(max(0, -dc), min(w, w - dc))
    out[rs, cs] = a[rs.start + dr : rs.stop + dr, cs.start + dc : cs.stop + dc]
    return out


def _line_stats(vals, valid, dr, dc, half):
    """Mean/variance of valid samples on the line through each pixel."""
    n = np.zeros(vals.shape)
    s1 = np.zeros(vals.shape)
    s2 = np.zeros(vals.shape)
    for t in range(-half, half + 1):
        ok = _shifted(valid, t * dr, t * dc, False)
        v = np.where(ok, _shifted(vals, t * dr, t * dc, 0.0), 0.0)
        n += ok
        s1 += v
        s2 += v * v
    mean = s1 / np.maximum(n, 1)
    return s2 / np.maximum(n, 1) - mean * mean


def nms_min(esi, window=5, candidates=None):
    """Keep a pixel only where it is the ESI minimum across the edge.

    For every pixel the direction (0, 45, 90 or 135 degrees) along which the
    ESI varies least through the window is taken as the local edge direction;
    the pixel survives if no sample on the perpendicular line through it is
    smaller.  Among equal values the first sample in row-major order wins.
    Suppressed pixels are set to 1.  ``candidates`` (bool mask) limits the
    comparison to those pixels; non-candidates are always suppressed.
    """
    if window < 3 or window % 2 == 0:
        raise OcularError("NMS window must be odd and >= 3")
    vals = esi.values
    half = window // 2
    valid = np.ones(vals.shape, bool) if candidates is None else np.asarray(candidates, bool)

    variances = np.stack([_line_stats(vals, np.ones(vals.shape, bool), dr, dc, half)
                          for dr, dc in DIRECTIONS])
    best = np.argmin(variances, axis=0)  # first direction wins ties

    keep = valid.copy()
    for d, (dr, dc) in enumerate(DIRECTIONS):
        # perpendicular of direction d is d+2 (mod 4) in this ordering
        pr, pc = DIRECTIONS[(d + 2) % 4]
        sel = best == d
        for t in range(-half, half + 1):
            if t == 0:
                continue
            ok = _shifted(valid, t * pr, t * pc, False)
            other = _shifted(vals, t * pr, t * pc, np.inf)
            # is the neighbour earlier in row-major order?
            earlier = (t * pr, t * pc) < (0, 0)
            beats = (other < vals) | ((other == vals) & earlier)
            keep &= ~(sel & ok & beats)
    return ESIMap(np.where(keep, vals, 1.0), esi.window)


def threshold_edges(esi, params=EdgeParams()):
    """Edge where ``alpha_low <= alpha <= alpha_high``."""
    a = esi.values
    return EdgeMap((a >= params.alpha_low) & (a <= params.alpha_high))


def contrast_stretch(img, lo=64.0, hi=255.0):
    """Map the image's [min, max] linearly onto [lo, hi]; a flat image maps to ``hi``."""
    img = as_image(img)
    vmin, vmax = img.min(), img.max()
    if vmax == vmin:
        return np.full_like(img, hi)
    return lo + (img - vmin) * (hi - lo) / (vmax - vmin)


def _resolve_stvr(img, source):
    if source is None:
        return 1.0
    if isinstance(source, str):
        return estimate_stvr(estimate(img, source, EstimatorConfig())).value
    return float(source)


def detect_edges(img, params=EdgeParams(), return_esi=False):
    """ESI -> STVR compensation -> non-minimum suppression -> band threshold.

    The image is first stretched onto ``params.stretch`` (when set) so that
    the ESI responds to relative contrast between the darkest and brightest
    parts of the scene rather than to the absolute offset.
    """
    img = as_image(img)
    if params.stretch is not None:
        img = contrast_stretch(img, *params.stretch)
    esi = esi_map(img, params.esi_window)
    stvr = _resolve_stvr(img, params.stvr_source)
    comp = compensate_esi(esi, stvr)
    band = (comp.values >= params.alpha_low) & (comp.values <= params.alpha_high)
    thin = nms_min(comp, params.nms_window, candidates=band)
    edges = threshold_edges(thin, params)
    return (edges, comp) if return_esi else edges


# ---------------------------------------------------------------------------
# Baddeley error metric

def _default_c(shape):
    return float(np.hypot(*shape))


def _distance_to(bits, c):
    if not bits.any():
        return np.full(bits.shape, c)
    return ndimage.distance_transform_edt(~bits)


def baddeley_metric(test, ref, p=2.0, c=None):
    """Normalized Baddeley distance between two binary edge maps, in [0, 1].

    ``[mean_x |w(d(x, A)) - w(d(x, B))|**p] ** (1/p) / c`` with
    ``w(t) = min(t, c)`` and ``c`` defaulting to the image diagonal.  The
    distance to an empty map is taken as ``c``.  ``p = inf`` gives the max.
    """
    a = np.asarray(getattr(test, "bits", test), bool)
    b = np.asarray(getattr(ref, "bits", ref), bool)
    if a.shape != b.shape:
        raise OcularError(f"edge maps differ in shape: {a.shape} vs {b.shape}")
    c = _default_c(a.shape) if c is None else float(c)
    if c <= 0 or p <= 0:
        raise OcularError("need c > 0 and p > 0")
    diff = np.abs(np.minimum(_distance_to(a, c), c) - np.minimum(_distance_to(b, c), c))
    if np.isinf(p):
        return float(diff.max() / c)
    return float(np.mean(diff**p) ** (1.0 / p) / c)


def baddeley_metric_bruteforce(test, ref, p=2.0, c=None):
    """Reference implementation by explicit pairwise distances (small maps only)."""
    a = np.asarray(getattr(test, "bits", test), bool)
    b = np.asarray(getattr(ref, "bits", ref), bool)
    c = _default_c(a.shape) if c is None else float(c)
    yy, xx = np.indices(a.shape)
    pix = np.stack([yy.ravel(), xx.ravel()], 1).astype(float)

    def dist(bits):
        pts = pix[bits.ravel()]
        if len(pts) == 0:
            return np.full(len(pix), c)
        d = np.sqrt(((pix[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
        return d.min(1)

    diff = np.abs(np.minimum(dist(a), c) - np.minimum(dist(b), c))
    if np.isinf(p):
        return float(diff.max() / c)
    return float(np.mean(diff**p) ** (1.0 / p) / c)


def esi_from_entropy(H, mu):
    """ESI of a Gaussian region with differential entropy ``H`` (nats) and mean ``mu``.

    ``alpha = mu**2 / (mu**2 + exp(2H - 1) / (2 pi))``.
    """
    H = np.asarray(H, dtype=np.float64)
    var = np.exp(2 * H - 1) / (2 * np.pi)
    out = mu * mu / (mu * mu + var)
    return float(out) if out.ndim == 0 else out


def edge_map_from_pgm(img):
    """Ground-truth convention on disk: 0 = edge, 255 = non-edge."""
    return EdgeMap(as_image(img) < 128)


def edge_map_to_pgm(edges):
    return np.where(np.asarray(getattr(edges, "bits", edges), bool), 0.0, 255.0)

