"""Gray images: PGM I/O, gamma, polar resampling, noise and synthetic test scenes.

Images are plain 2-D ``float64`` arrays indexed ``[row, column]``.  Pixel
values are real-valued internally and only clamped to ``[0, 255]`` when saved,
so additive noise stays exactly additive.  Sub-pixel coordinates are given as
``(x, y)`` = ``(column, row)`` with pixel ``(i, j)`` centred on integer
coordinates.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .diagnostics import OcularError

__all__ = [
    "PGMError", "PGMHeaderError", "PGMTruncatedError", "PGMMaxvalError",
    "PolarImage", "NoiseSpec", "SyntheticEye", "EyeLevels",
    "as_image", "load_pgm", "save_pgm", "read_frames", "write_frames", "write_sidecar",
    "gamma_correct", "to_polar", "add_noise", "noise_variance_for_snr",
    "synth_step_edge", "synth_grating", "synth_eye",
]


class PGMError(OcularError):
    pass


class PGMHeaderError(PGMError):
    pass


class PGMTruncatedError(PGMError):
    pass


class PGMMaxvalError(PGMError):
    pass


def as_image(img):
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise OcularError(f"expected a non-empty 2-D image, got shape {arr.shape}")
    return arr


# ---------------------------------------------------------------------------
# PGM

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _header_tokens(data, count):
    """Pull ``count`` whitespace-separated header tokens, skipping comments."""
    pos = 0
    tokens = []
    for _ in range(count):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise PGMHeaderError("incomplete PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens, pos


def load_pgm(path):
    """Read a binary (P5) or ASCII (P2) 8-bit PGM file into a float image."""
    data = Path(path).read_bytes()
    if data[:2] not in (b"P5", b"P2"):
        raise PGMHeaderError(f"{path}: not a P2/P5 PGM file")
    try:
        (magic, w, h, maxval), pos = _header_tokens(data, 4)
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise PGMHeaderError(f"{path}: malformed header ({exc})") from None
    if width <= 0 or height <= 0:
        raise PGMHeaderError(f"{path}: bad dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise PGMMaxvalError(f"{path}: maxval {maxval} not in 1..255")
    n = width * height
    if magic == b"P5":
        # exactly one whitespace byte separates the header from the raster
        payload = data[pos + 1 : pos + 1 + n]
        if len(payload) < n:
            raise PGMTruncatedError(f"{path}: expected {n} bytes, found {len(payload)}")
        pixels = np.frombuffer(payload, dtype=np.uint8)
    else:
        fields = data[pos:].split()
        if len(fields) < n:
            raise PGMTruncatedError(f"{path}: expected {n} samples, found {len(fields)}")
        try:
            pixels = np.array([int(v) for v in fields[:n]])
        except ValueError:
            raise PGMHeaderError(f"{path}: non-integer sample in ASCII raster") from None
    if pixels.max(initial=0) > maxval:
        raise PGMMaxvalError(f"{path}: sample exceeds maxval {maxval}")
    return pixels.reshape(height, width).astype(np.float64)


def save_pgm(path, img, binary=True):
    """Write ``img`` as an 8-bit PGM; values are rounded and clamped to 0..255."""
    arr = np.clip(np.rint(as_image(img)), 0, 255).astype(np.uint8)
    height, width = arr.shape
    path = Path(path)
    if binary:
        path.write_bytes(b"P5\n%d %d\n255\n" % (width, height) + arr.tobytes())
    else:
        rows = "\n".join(" ".join(str(v) for v in row) for row in arr)
        path.write_text(f"P2\n{width} {height}\n255\n{rows}\n")


def write_frames(directory, images, start=1):
    """Store a sequence as ``frame_000001.pgm``, ``frame_000002.pgm``, ..."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, img in enumerate(images, start=start):
        p = directory / f"frame_{k:06d}.pgm"
        save_pgm(p, img)
        paths.append(p)
    return paths


def read_frames(directory):
    """Return ``[(frame_number, image), ...]`` ordered by frame number."""
    found = []
    for p in Path(directory).glob("frame_*.pgm"):
        m = re.fullmatch(r"frame_(\d+)\.pgm", p.name)
        if m:
            found.append((int(m.group(1)), p))
    return [(k, load_pgm(p)) for k, p in sorted(found)]


def write_sidecar(path, record):
    Path(path).write_text(json.dumps(record, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# ---------------------------------------------------------------------------
# point and geometric operations

def gamma_correct(img, gamma):
    """Power-law correction ``255 * (I/255) ** (1/gamma)``.

    Negative (noise) values are treated as 0.  Values above 255 are not
    clipped, which keeps the map a pure power law: scaling the input by ``c``
    scales the output by ``c ** (1/gamma)``.
    """
    if not gamma > 0:
        raise OcularError(f"gamma must be positive, got {gamma}")
    arr = np.maximum(as_image(img), 0.0)
    return 255.0 * (arr / 255.0) ** (1.0 / gamma)


@dataclass(frozen=True)
class PolarImage:
    origin: tuple
    samples: np.ndarray  # (radii, angles)
    radial_step: float = 1.0

    @property
    def radii(self):
        return self.samples.shape[0]

    @property
    def angles(self):
        return self.samples.shape[1]

    def radius(self, i):
        return i * self.radial_step


def to_polar(img, center, radii, angles=360, radial_step=1.0):
    """Resample ``img`` on rings around ``center`` (bilinear, border-replicated).

    Row ``i`` of the result holds the ring at distance ``i * radial_step``;
    column ``j`` is the angle ``2*pi*j/angles`` measured from the +x axis.
    """
    img = as_image(img)
    cx, cy = center
    h, w = img.shape
    if not (0 <= cx <= w - 1 and 0 <= cy <= h - 1):
        raise OcularError(f"polar origin {center} outside the {w}x{h} image")
    if radii < 1 or angles < 8:
        raise OcularError("need radii >= 1 and angles >= 8")
    r = np.arange(radii)[:, None] * radial_step
    theta = 2 * np.pi * np.arange(angles)[None, :] / angles
    xs = cx + r * np.cos(theta)
    ys = cy + r * np.sin(theta)
    samples = ndimage.map_coordinates(img, [ys, xs], order=1, mode="nearest")
    return PolarImage(origin=(float(cx), float(cy)), samples=samples, radial_step=radial_step)


# ---------------------------------------------------------------------------
# noise

@dataclass(frozen=True)
class NoiseSpec:
    variance: float
    seed: int | None = None

    def __post_init__(self):
        if self.variance < 0:
            raise OcularError("noise variance must be >= 0")


def add_noise(img, spec):
    """Add zero-mean i.i.d. Gaussian noise; the result is not clamped."""
    img = np.asarray(img, dtype=np.float64)
    if spec.variance == 0:
        return img.copy()
    rng = np.random.default_rng(spec.seed)
    return img + rng.normal(0.0, np.sqrt(spec.variance), size=img.shape)


def noise_variance_for_snr(img, snr_db):
    """Noise variance giving ``snr_db`` relative to the image's own variance."""
    return float(np.var(img)) / 10 ** (snr_db / 10)


# ---------------------------------------------------------------------------
# synthetic scenes

def synth_step_edge(w, h, low, high, boundary=None, square=None):
    """Two-region image: ``low`` left of column ``boundary``, ``high`` from it on.

    ``square=(x0, y0, side)`` additionally embeds a ``high`` square into the
    image (inside the low region when it fits there).
    """
    boundary = w // 2 if boundary is None else boundary
    img = np.full((h, w), float(low))
    img[:, boundary:] = high
    if square is not None:
        x0, y0, side = square
        img[y0 : y0 + side, x0 : x0 + side] = high
    return img


def synth_grating(w, h, period, decay, amplitude=255.0):
    """Square-wave grating with an amplitude decaying along x.

    Column ``x`` has intensity ``amplitude * s(x) / (x + 1) ** decay`` where
    ``s(x)`` is 1 on the first half of each period and 0 on the second half.
    Every column is constant.
    """
    if period < 2:
        raise OcularError("grating period must be >= 2 pixels")
    x = np.arange(w)
    on = (x % period) < period / 2
    profile = amplitude * on / (x + 1.0) ** decay
    return np.tile(profile, (h, 1))


@dataclass(frozen=True)
class EyeLevels:
    pupil: float = 25.0
    iris: float = 95.0
    sclera: float = 225.0
    skin: float = 160.0
    lash: float = 45.0
    glint: float = 255.0


@dataclass
class SyntheticEye:
    image: np.ndarray
    pupil_center: tuple
    pupil_radius: float
    iris_radius: float
    lid_coverage: float
    corners: tuple  # ((xL, yL), (xR, yR))
    lid_y: float
    params: dict = field(default_factory=dict)

    def truth(self):
        rec = asdict(self)
        del rec["image"]
        return rec


def synth_eye(w, h, pupil_center, pupil_radius, iris_radius, lid_coverage,
              eye_center=None, eye_half_width=None, eye_half_height=None,
              levels=EyeLevels(), lash_width=0.0, lid_lash=False, glints=(), supersample=4):
    """Render a cropped eye: dark pupil, iris, sclera, lash outline and skin.

    The palpebral opening is an almond ``|y - ey| <= hh * (1 - ((x - ex)/hw)**2)``
    whose tips are the eye corners.  The upper lid hides everything above
    ``lid_y = (py - iris_radius) + lid_coverage * 2 * iris_radius``, so a
    coverage of 1 leaves no iris visible.  Each pixel is the average of
    ``supersample**2`` point samples, which gives anti-aliased boundaries.
    ``glints`` is a sequence of ``(x, y, radius)`` specular spots and
    ``lid_lash`` draws a dark lash line along the lid margin.
    """
    if not 0 <= lid_coverage <= 1:
        raise OcularError("lid_coverage must lie in [0, 1]")
    px, py = pupil_center
    ex, ey = ((w - 1) / 2, (h - 1) / 2) if eye_center is None else eye_center
    hw = 0.42 * w if eye_half_width is None else eye_half_width
    hh = min(0.45 * h, 1.15 * iris_radius) if eye_half_height is None else eye_half_height
    lid_y = (py - iris_radius) + lid_coverage * 2 * iris_radius

    s = supersample
    offs = (np.arange(s) + 0.5) / s - 0.5
    ys = (np.arange(h)[:, None] + offs[None, :]).reshape(-1)
    xs = (np.arange(w)[:, None] + offs[None, :]).reshape(-1)
    Y, X = np.meshgrid(ys, xs, indexing="ij")

    u = (X - ex) / hw
    half_open = hh * np.clip(1 - u * u, 0, None)
    dy = np.abs(Y - ey)
    inside = dy <= half_open
    rr = np.hypot(X - px, Y - py)

    out = np.full(X.shape, levels.skin)
    out[inside] = levels.sclera
    iris = inside & (rr < iris_radius)
    out[iris] = levels.iris
    out[inside & (rr < pupil_radius)] = levels.pupil
    for gx, gy, gr in glints:
        out[inside & (np.hypot(X - gx, Y - gy) <= gr)] = levels.glint
    out[inside & (Y < lid_y)] = levels.skin
    lash = (half_open - dy <= lash_width) & (lash_width > 0)
    if lid_lash:
        lash |= np.abs(Y - lid_y) <= lash_width / 2
    lash &= inside
    out[lash] = levels.lash

    img = out.reshape(h, s, w, s).mean(axis=(1, 3))
    return SyntheticEye(
        image=img,
        pupil_center=(float(px), float(py)),
        pupil_radius=float(pupil_radius),
        iris_radius=float(iris_radius),
        lid_coverage=float(lid_coverage),
        corners=((float(ex - hw), float(ey)), (float(ex + hw), float(ey))),
        lid_y=float(lid_y),
        params=dict(w=w, h=h, eye_center=(float(ex), float(ey)), eye_half_width=float(hw),
                    eye_half_height=float(hh), lash_width=lash_width, lid_lash=lid_lash,
                    glints=[tuple(map(float, g)) for g in glints], levels=asdict(levels)),
    )
