"""Blind estimation of image and noise variance from a single noisy image.

Every estimator returns a split of the observed variance ``sigma_g2`` into an
image part ``sigma_s2`` and a noise part ``sigma_n2`` that add up exactly.
All variances are population variances (``ddof=0``).

M1  minimum of non-overlapping tile variances
M2  mean of tile variances
M3  eigen-subspace split of the row autocorrelation matrix (MDL order)
M4  autocorrelation peak extrapolated from lags 1 and 2 along x
M5  same along y
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diagnostics import DegenerateInputError, OcularError, flag
from .formfactor import NoiseRatio
from .imagecore import as_image

__all__ = [
    "VarianceEstimate", "EstimatorConfig", "METHODS",
    "tile_variances", "local_var_min", "local_var_avg", "local_var_weighted",
    "subspace_variance", "mdl_order", "acs_variance", "circular_acs", "estimate",
    "estimate_snr", "estimate_stvr", "snr_error_pct", "stvr_error_pct",
]


@dataclass(frozen=True)
class VarianceEstimate:
    sigma_s2: float
    sigma_n2: float
    sigma_g2: float
    method: str

    def as_dict(self):
        return {"method": self.method, "sigma_s2": self.sigma_s2, "sigma_n2": self.sigma_n2,
                "sigma_g2": self.sigma_g2}


@dataclass(frozen=True)
class EstimatorConfig:
    region_size: int = 8
    c_alpha: float = 0.5
    acs_direction: str = "horizontal"

    def __post_init__(self):
        if self.region_size < 2:
            raise OcularError("region_size must be >= 2")
        if not 0 <= self.c_alpha <= 1:
            raise OcularError("c_alpha must lie in [0, 1]")
        if self.acs_direction not in ("horizontal", "vertical"):
            raise OcularError("acs_direction must be 'horizontal' or 'vertical'")


def _split(sigma_g2, sigma_n2, method):
    """Clamp the noise part into [0, sigma_g2] and return the complementary split."""
    if sigma_n2 < 0 or sigma_n2 > sigma_g2:
        flag(f"{method}: noise variance {sigma_n2:.6g} outside [0, {sigma_g2:.6g}]; clamped")
        sigma_n2 = min(max(sigma_n2, 0.0), sigma_g2)
    return VarianceEstimate(sigma_s2=sigma_g2 - sigma_n2, sigma_n2=float(sigma_n2),
                            sigma_g2=float(sigma_g2), method=method)


def tile_variances(img, region_size=8):
    """Variances of the non-overlapping ``region_size`` tiles (partial tiles dropped)."""
    img = as_image(img)
    k = region_size
    h, w = img.shape
    if h < k or w < k:
        raise OcularError(f"image {w}x{h} smaller than one {k}x{k} tile")
    ty, tx = h // k, w // k
    tiles = img[: ty * k, : tx * k].reshape(ty, k, tx, k)
    return tiles.var(axis=(1, 3)).ravel()


def local_var_min(img, cfg=EstimatorConfig()):
    """M1: the quietest tile is taken as pure noise."""
    img = as_image(img)
    return _split(float(img.var()), float(tile_variances(img, cfg.region_size).min()), "M1")


def local_var_avg(img, cfg=EstimatorConfig()):
    """M2: the mean tile variance is taken as the noise level."""
    img = as_image(img)
    return _split(float(img.var()), float(tile_variances(img, cfg.region_size).mean()), "M2")


def local_var_weighted(img, cfg=EstimatorConfig()):
    """Blend ``c_alpha * M1 + (1 - c_alpha) * M2``."""
    img = as_image(img)
    tv = tile_variances(img, cfg.region_size)
    n2 = cfg.c_alpha * tv.min() + (1 - cfg.c_alpha) * tv.mean()
    return _split(float(img.var()), float(n2), "M12")


def mdl_order(eigenvalues, n_obs):
    """Signal-subspace dimension by the Wax-Kailath MDL criterion.

    ``eigenvalues`` are sorted in any order; ``n_obs`` is the number of
    observation vectors used to form the matrix.
    """
    lam = np.sort(np.asarray(eigenvalues, dtype=np.float64))[::-1]
    p = lam.size
    lam = np.maximum(lam, lam[0] * 1e-15)
    best_k, best = 0, np.inf
    for k in range(p):
        tail = lam[k:]
        m = p - k
        log_ratio = np.log(tail.mean()) - np.log(tail).mean()  # log(arith / geo) >= 0
        cost = n_obs * m * log_ratio + 0.5 * k * (2 * p - k) * np.log(n_obs)
        if cost < best:
            best_k, best = k, cost
    return best_k


def subspace_variance(img, cfg=EstimatorConfig()):
    """M3: noise is the mean eigenvalue of the noise subspace.

    Rows are the observation vectors; the global mean is removed so that the
    trace of the autocorrelation matrix divided by its order is exactly the
    observed variance.  The image part is the excess of the signal-subspace
    eigenvalues over the noise floor, normalized per pixel.
    """
    img = as_image(img)
    h, w = img.shape
    if h < 2 or w < 2:
        raise OcularError("subspace estimator needs at least 2 rows and 2 columns")
    x = img - img.mean()
    corr = x.T @ x / h
    lam = np.linalg.eigvalsh(corr)[::-1]
    if lam[0] <= 0:
        raise DegenerateInputError("rank-0 autocorrelation matrix (constant image)")
    k = mdl_order(lam, h)
    noise = float(np.clip(lam[k:], 0, None).mean()) if k < w else 0.0
    sigma_g2 = float(img.var())  # equals trace(corr) / w
    sigma_s2 = float(np.sum(lam[:k] - noise)) / w
    return _split(sigma_g2, sigma_g2 - sigma_s2, "M3")


def circular_acs(img, max_lag=2, axis=1):
    """Periodic autocorrelation ``r(k) = mean(I * roll(I, k))`` for ``k = 0..max_lag``.

    The mean is not removed, so ``r(k)`` carries ``mean**2``.
    """
    img = as_image(img)
    return np.array([np.mean(img * np.roll(img, -k, axis=axis)) for k in range(max_lag + 1)])


def acs_variance(img, cfg=EstimatorConfig()):
    """M4 (horizontal) / M5 (vertical): noise is the spike of the ACS at lag 0.

    i.i.d. noise only adds to ``r(0)``.  The noise-free peak is predicted by
    extending the straight line through ``r(1)`` and ``r(2)`` back to lag 0.
    """
    img = as_image(img)
    axis = 1 if cfg.acs_direction == "horizontal" else 0
    method = "M4" if axis == 1 else "M5"
    if img.shape[axis] < 3:
        raise OcularError("ACS estimator needs at least 3 samples along its axis")
    r = circular_acs(img, 2, axis)
    r_s0 = 2 * r[1] - r[2]
    return _split(float(img.var()), float(r[0] - r_s0), method)


METHODS = {
    "M1": local_var_min,
    "M2": local_var_avg,
    "M12": local_var_weighted,
    "M3": subspace_variance,
    "M4": lambda img, cfg=EstimatorConfig(): acs_variance(
        img, EstimatorConfig(cfg.region_size, cfg.c_alpha, "horizontal")),
    "M5": lambda img, cfg=EstimatorConfig(): acs_variance(
        img, EstimatorConfig(cfg.region_size, cfg.c_alpha, "vertical")),
}


def estimate(img, method="M4", cfg=EstimatorConfig()):
    try:
        fn = METHODS[method]
    except KeyError:
        raise OcularError(f"unknown estimator {method!r}; choose from {sorted(METHODS)}") from None
    return fn(img, cfg)


def estimate_snr(est):
    """``SNR = s2 / (g2 - s2)``; a non-positive noise part gives ``inf``."""
    noise = est.sigma_g2 - est.sigma_s2
    if noise <= 0:
        flag("estimated noise variance is zero; SNR reported as infinity")
        return NoiseRatio("SNR", float("inf"))
    return NoiseRatio("SNR", max(est.sigma_s2, 0.0) / noise)


def estimate_stvr(est):
    """``STVR = s2 / g2`` clamped to [0, 1]; a zero-variance image gives 1."""
    if est.sigma_g2 <= 0:
        return NoiseRatio("STVR", 1.0)
    return NoiseRatio("STVR", float(np.clip(est.sigma_s2 / est.sigma_g2, 0.0, 1.0)))


def snr_error_pct(sigma_s2, delta_sigma_s2, sigma_n2):
    """Percentage error of the blind SNR caused by an image-variance error ``delta``.

    ``100 * sigma_g2 * delta / (sigma_s2 * (sigma_n2 - delta))``.
    """
    sigma_g2 = sigma_s2 + sigma_n2
    return 100.0 * sigma_g2 * delta_sigma_s2 / (sigma_s2 * (sigma_n2 - delta_sigma_s2))


def stvr_error_pct(sigma_s2, delta_sigma_s2):
    """Percentage error of the blind STVR; it does not depend on the noise level."""
    return 100.0 * delta_sigma_s2 / sigma_s2
