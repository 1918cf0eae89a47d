"""Pupil centre and diameter from Form Factor profiles, eye corners from the ESI.

Coordinates are ``(x, y)`` = ``(column, row)`` in the eye image.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .diagnostics import DegenerateInputError, OcularError
from .edges import EdgeParams, detect_edges
from .formfactor import horizontal_ff, radial_ff, vertical_ff
from .imagecore import as_image, gamma_correct, to_polar

__all__ = [
    "PupilLocation", "EyeCorners", "PupilGeometry", "OcularParams",
    "pupil_center", "pupil_center_peak", "pupil_diameter", "eye_corners",
    "relative_position", "hit_test", "select_peak_zone", "innermost_peak", "mixing_offset",
]


@dataclass(frozen=True)
class PupilLocation:
    x: float
    y: float

    def distance(self, other):
        return float(np.hypot(self.x - other.x, self.y - other.y))


@dataclass(frozen=True)
class EyeCorners:
    left: tuple
    right: tuple

    def __post_init__(self):
        if not self.left[0] < self.right[0]:
            raise OcularError("left corner must lie left of the right corner")


@dataclass(frozen=True)
class PupilGeometry:
    center: PupilLocation
    diameter: float


@dataclass(frozen=True)
class OcularParams:
    gamma: float = 2.5
    zone_halfwidth_frac: float = 0.20
    peak_tolerance_frac: float = 0.01
    corner_roi_frac: float = 0.02
    half_view_angle: float = 60.0
    radial_zone: tuple = (0.05, 0.5)  # search radii as fractions of the shorter side
    radial_step: float = 0.25
    radial_band: float = 1.0  # ring pooling half-width in pixels
    radial_peak_frac: float = 0.5  # a radial peak counts once its excess F - 1 reaches this share of the largest
    angles: int = 360
    min_component_frac: float = 0.1
    edges: EdgeParams = EdgeParams(alpha_high=0.99)

    def __post_init__(self):
        for name in ("zone_halfwidth_frac", "peak_tolerance_frac", "corner_roi_frac"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise OcularError(f"{name} must lie in (0, 1), got {v}")
        if not self.gamma > 0:
            raise OcularError("gamma must be positive")


def select_peak_zone(values, halfwidth, tolerance, lo=0, hi=None):
    """FF-weighted centre of mass of the near-peak part of a profile.

    The peak is searched in ``values[lo:hi]``; indices within ``halfwidth`` of
    it whose value is at least ``(1 - tolerance) * peak`` are averaged with
    their values as weights.
    """
    values = np.asarray(values, dtype=np.float64)
    hi = len(values) if hi is None else hi
    seg = values[lo:hi]
    if seg.size == 0 or np.ptp(seg) == 0:
        raise DegenerateInputError("no pupil evidence: flat Form Factor profile")
    p = lo + int(np.argmax(seg))
    idx = np.arange(len(values))
    sel = (np.abs(idx - p) <= halfwidth) & (idx >= lo) & (idx < hi)
    sel &= values >= (1 - tolerance) * values[p]
    w = values[sel]
    return float(np.sum(idx[sel] * w) / np.sum(w)), p


def _profiles(eye, params):
    g = gamma_correct(eye, params.gamma)
    return horizontal_ff(g).values, vertical_ff(g).values


def pupil_center(eye, params=OcularParams()):
    """Centre of mass of the near-peak zones of the column and row FF profiles."""
    eye = as_image(eye)
    h, w = eye.shape
    hz, vt = _profiles(eye, params)
    x, _ = select_peak_zone(hz, params.zone_halfwidth_frac * w, params.peak_tolerance_frac)
    y, _ = select_peak_zone(vt, params.zone_halfwidth_frac * h, params.peak_tolerance_frac)
    return PupilLocation(x, y)


def pupil_center_peak(eye, params=OcularParams()):
    """Baseline: the arg-max of each profile, no refinement."""
    hz, vt = _profiles(as_image(eye), params)
    if np.ptp(hz) == 0 or np.ptp(vt) == 0:
        raise DegenerateInputError("no pupil evidence: flat Form Factor profile")
    return PupilLocation(float(np.argmax(hz)), float(np.argmax(vt)))


def innermost_peak(values, frac=0.5):
    """Sub-sample position of the first strong peak of an FF profile.

    Works on the excess ``F - 1``: the first local maximum reaching ``frac``
    of the largest excess, refined by a parabola through its neighbours.
    Returns ``(position, excess_at_peak)``.
    """
    ex = np.asarray(values, dtype=np.float64) - 1.0
    top = ex.max(initial=0.0)
    if top <= 0:
        raise DegenerateInputError("no pupil evidence: flat radial Form Factor")
    left = np.concatenate([[-np.inf], ex[:-1]])
    right = np.concatenate([ex[1:], [-np.inf]])
    p = int(np.nonzero((ex >= left) & (ex >= right) & (ex >= frac * top))[0][0])
    off = 0.0
    if 0 < p < len(ex) - 1:
        y0, y1, y2 = ex[p - 1], ex[p], ex[p + 1]
        den = y0 - 2 * y1 + y2
        if den < 0:
            off = 0.5 * (y0 - y2) / den
    return p + off, float(ex[p])


def mixing_offset(excess, band):
    """Radius correction for the FF peak of a pooled dark/bright ring band.

    For two levels ``a < b = k*a`` mixed with dark fraction ``q`` the squared
    coefficient of variation peaks at ``q = k/(1+k)``, not at 1/2, so the peak
    of a band of half-width ``band`` sits ``band*(2q - 1)`` inside the
    boundary.  ``k`` follows from the peak value ``(k-1)**2 / (4k)``.
    """
    cv2 = (1.0 + excess) ** 2 - 1.0
    k = 1 + 2 * cv2 + 2 * np.sqrt(cv2 + cv2 * cv2)
    return band * (2 * k / (1 + k) - 1)


def pupil_diameter(eye, center, params=OcularParams()):
    """Diameter from the radial FF around ``center``.

    Rings are sampled every ``radial_step`` pixels and pooled over
    ``radial_band`` pixels on either side.  The pupil boundary is the first
    strong peak of that profile inside ``radial_zone``, corrected for the
    dark/bright mixing bias of the pooled band.
    """
    eye = as_image(eye)
    g = gamma_correct(eye, params.gamma)
    side = min(eye.shape)
    step = params.radial_step
    r_lo, r_hi = (f * side for f in params.radial_zone)
    n_rad = int(np.ceil(r_hi / step)) + 1
    polar = to_polar(g, (center.x, center.y), n_rad, params.angles, step)
    band = max(0, int(round(params.radial_band / step)))
    prof = radial_ff(polar, band=band).values
    lo = int(np.ceil(r_lo / step))
    pos, excess = innermost_peak(prof[lo:], params.radial_peak_frac)
    radius = (pos + lo) * step + mixing_offset(excess, band * step)
    if radius <= 0:
        raise DegenerateInputError("radial Form Factor gave a zero radius")
    return PupilGeometry(center=center, diameter=float(min(2 * radius, side)))


# ---------------------------------------------------------------------------
# corners and relative position

def eye_corners(eye, params=OcularParams()):
    """Left and right eye corners.

    Edges are detected and grouped into 8-connected components; components
    smaller than ``min_component_frac`` of the largest one are dropped as
    clutter.  At each horizontal end of what remains, a strip
    ``max(2, ceil(corner_roi_frac * width))`` columns wide is searched for the
    pixel whose compensated ESI is nearest 0.5.  Ties go to the outermost
    column, and tied rows in that column are averaged.
    """
    eye = as_image(eye)
    h, w = eye.shape
    edges, esi = detect_edges(eye, params.edges, return_esi=True)
    labels, n = ndimage.label(edges.bits, structure=np.ones((3, 3)))
    if n == 0:
        raise DegenerateInputError("corner not found: no edges")
    sizes = ndimage.sum_labels(np.ones_like(labels), labels, index=np.arange(1, n + 1))
    big = np.nonzero(sizes >= params.min_component_frac * sizes.max())[0] + 1
    comp = np.isin(labels, big)
    rows, cols = np.nonzero(comp)
    width = max(2, int(np.ceil(params.corner_roi_frac * w)))
    dev = np.abs(esi.values[rows, cols] - 0.5)

    def pick(in_roi, outward):
        r, c, d = rows[in_roi], cols[in_roi], dev[in_roi]
        if r.size == 0:
            raise DegenerateInputError("corner not found in end region")
        tied = d <= d.min() + 1e-12
        r, c = r[tied], c[tied]
        col = c.max() if outward > 0 else c.min()
        # upper and lower lid lines meet at the tip: tied rows are averaged
        return (float(col), float(r[c == col].mean()))

    left = pick(cols < cols.min() + width, -1)
    right = pick(cols > cols.max() - width, +1)
    if left[0] >= right[0]:
        raise DegenerateInputError("corner not found: edge component too narrow")
    return EyeCorners(left, right)


def relative_position(center, corners, half_view_angle=60.0):
    """Signed distance of the pupil from the corners' midpoint and its angle.

    The distance is Euclidean; its sign is that of the projection onto the
    left-to-right corner axis.  The corners span ``+-half_view_angle``.
    """
    (xl, yl), (xr, yr) = corners.left, corners.right
    ax, ay = xr - xl, yr - yl
    half = 0.5 * np.hypot(ax, ay)
    if half == 0:
        raise DegenerateInputError("coincident eye corners")
    mx, my = 0.5 * (xl + xr), 0.5 * (yl + yr)
    dx, dy = center.x - mx, center.y - my
    dist = float(np.hypot(dx, dy))
    proj = dx * ax + dy * ay
    signed = dist if proj >= 0 else -dist
    return signed, float(signed / half * half_view_angle)


def hit_test(found, truth, r_e):
    """True when ``found`` lies in the closed disc of radius ``r_e`` around ``truth``."""
    return bool(found.distance(truth) <= r_e)


