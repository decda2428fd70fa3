"""The 34-dimensional natural-scene-statistics feature extractor.

Pipeline for one image map:

1. MSCN normalisation with a 7x7 Gaussian window (sigma 7/6, unit sum).
2. GGD fit of the MSCN coefficients                    -> f1, f2
3. mean and (mean/std)^2 of the local sigma field      -> f3, f4
4. AGGD fits of the H, V, D1, D2 neighbour products     -> f5 .. f20
5. GGD fits of seven log-derivative maps               -> f21 .. f34

Fits use moment matching against a precomputed shape grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage
from scipy.special import gammaln

from .errors import DegenerateInputError

MSCN_C = 1.0
MSCN_RADIUS = 3
MSCN_SIGMA = 7.0 / 6.0
LOG_C = 0.1
SHAPE_MIN, SHAPE_MAX, SHAPE_STEP = 0.05, 10.0, 0.001
MIN_FIT_SAMPLES = 64
MIN_PLANE = 16

GGD_FALLBACK = (10.0, 0.0)
AGGD_FALLBACK = (10.0, 0.0, 0.0, 0.0)
RHO_SENTINEL = 1e6

N_FEATURES = 34
PRODUCT_ORIENTATIONS = ("H", "V", "D1", "D2")
LOG_DERIVATIVES = ("D1", "D2", "D3", "D4", "D5", "D6", "D7")


def _schema() -> tuple[str, ...]:
    names = ["mscn_ggd_alpha", "mscn_ggd_sigma", "sigma_field_mean", "sigma_field_rho"]
    for o in PRODUCT_ORIENTATIONS:
        names += [f"prod_{o}_nu", f"prod_{o}_eta", f"prod_{o}_sigma_l", f"prod_{o}_sigma_r"]
    for d in LOG_DERIVATIVES:
        names += [f"logder_{d}_alpha", f"logder_{d}_sigma"]
    return tuple(names)


#: Names of f1..f34, in order.
NSS34_NAMES = _schema()
assert len(NSS34_NAMES) == N_FEATURES


@dataclass
class MscnResult:
    mscn: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray


@dataclass(frozen=True)
class GgdParams:
    alpha: float
    sigma: float


@dataclass(frozen=True)
class AggdParams:
    nu: float
    eta: float
    sigma_l: float
    sigma_r: float


def mscn_window() -> np.ndarray:
    """The 7x7 circularly symmetric Gaussian weighting window, unit volume."""
    x = np.arange(-MSCN_RADIUS, MSCN_RADIUS + 1, dtype=np.float64)
    g = np.exp(-0.5 * (x / MSCN_SIGMA) ** 2)
    w = np.outer(g, g)
    return w / w.sum()


def _mscn_taps() -> np.ndarray:
    x = np.arange(-MSCN_RADIUS, MSCN_RADIUS + 1, dtype=np.float64)
    g = np.exp(-0.5 * (x / MSCN_SIGMA) ** 2)
    return g / g.sum()


def _local_mean(plane: np.ndarray) -> np.ndarray:
    g = _mscn_taps()
    out = ndimage.correlate1d(plane, g, axis=0, mode="reflect")
    return ndimage.correlate1d(out, g, axis=1, mode="reflect")


def compute_mscn(plane: np.ndarray, c: float = MSCN_C) -> MscnResult:
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2 or min(plane.shape) < 2 * MSCN_RADIUS + 1:
        raise ValueError("compute_mscn needs a 2-D plane of at least 7x7")
    if not np.all(np.isfinite(plane)):
        raise FloatingPointError("non-finite samples in plane")
    # Centre on the median so constant inputs give exact zeros.
    offset = float(np.median(plane))
    centred = plane - offset
    mu_c = _local_mean(centred)
    sigma = np.sqrt(_local_variance(centred, mu_c))
    mscn = (centred - mu_c) / (sigma + c)
    return MscnResult(mscn=mscn, mu=mu_c + offset, sigma=sigma)


def _local_variance(plane: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """sum_kl w_kl (I(i+k, j+l) - mu(i, j))^2, accumulated tap by tap.

    The two-pass form avoids the cancellation of E[x^2] - E[x]^2, which
    would otherwise leave spurious variance of order 1e-6 in flat regions.
    """
    r = MSCN_RADIUS
    h, w = plane.shape
    padded = np.pad(plane, r, mode="symmetric")
    weights = mscn_window()
    acc = np.zeros_like(plane)
    tmp = np.empty_like(plane)
    for a in range(2 * r + 1):
        for b in range(2 * r + 1):
            np.subtract(padded[a : a + h, b : b + w], mu, out=tmp)
            np.multiply(tmp, tmp, out=tmp)
            tmp *= weights[a, b]
            acc += tmp
    return acc


@lru_cache(maxsize=1)
def shape_grid() -> tuple[np.ndarray, np.ndarray]:
    """Shape grid and the GGD ratio E|x| / sqrt(E x^2) at each grid point.

    The ratio Gamma(2/a) / sqrt(Gamma(1/a) Gamma(3/a)) increases
    monotonically with the shape ``a``.
    """
    n = int(round((SHAPE_MAX - SHAPE_MIN) / SHAPE_STEP)) + 1
    alpha = SHAPE_MIN + SHAPE_STEP * np.arange(n)
    ratio = np.exp(gammaln(2.0 / alpha) - 0.5 * (gammaln(1.0 / alpha) + gammaln(3.0 / alpha)))
    alpha.setflags(write=False)
    ratio.setflags(write=False)
    return alpha, ratio


def _invert_ratio(target: float) -> float:
    alpha, ratio = shape_grid()
    i = int(np.searchsorted(ratio, target))
    if i <= 0:
        return float(alpha[0])
    if i >= len(ratio):
        return float(alpha[-1])
    # nearest of the two bracketing grid points; ties go to the lower one
    if target - ratio[i - 1] <= ratio[i] - target:
        return float(alpha[i - 1])
    return float(alpha[i])


def _pow2_scale(x: np.ndarray) -> float:
    """Power of two near max|x|; dividing by it is exact and keeps squares from under/overflowing."""
    peak = float(np.max(np.abs(x)))
    if peak == 0.0 or not np.isfinite(peak):
        return 1.0
    return float(np.ldexp(1.0, int(np.frexp(peak)[1])))


def fit_ggd(samples: np.ndarray) -> GgdParams:
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < MIN_FIT_SAMPLES:
        raise DegenerateInputError(f"GGD fit needs {MIN_FIT_SAMPLES} samples, got {x.size}")
    if x.min() == x.max():
        raise DegenerateInputError("GGD fit on identical samples")
    scale = _pow2_scale(x)
    x = x / scale
    second = np.mean(x * x)
    first = np.mean(np.abs(x))
    if not second > 0:
        raise DegenerateInputError("GGD fit on all-zero samples")
    alpha = _invert_ratio(first / np.sqrt(second))
    return GgdParams(alpha=alpha, sigma=float(np.sqrt(second)) * scale)


def aggd_mean(nu: float, sigma_l: float, sigma_r: float) -> float:
    """Mean of an AGGD: (beta_r - beta_l) * Gamma(2/nu) / Gamma(1/nu)."""
    scale = np.exp(0.5 * (gammaln(1.0 / nu) - gammaln(3.0 / nu)))
    beta_l, beta_r = sigma_l * scale, sigma_r * scale
    return float((beta_r - beta_l) * np.exp(gammaln(2.0 / nu) - gammaln(1.0 / nu)))


def fit_aggd(samples: np.ndarray) -> AggdParams:
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < MIN_FIT_SAMPLES:
        raise DegenerateInputError(f"AGGD fit needs {MIN_FIT_SAMPLES} samples, got {x.size}")
    neg = x[x < 0]
    pos = x[x > 0]
    if neg.size == 0 or pos.size == 0:
        raise DegenerateInputError("AGGD fit needs samples on both sides of zero")
    sl, sr = _pow2_scale(neg), _pow2_scale(pos)
    sigma_l = float(np.sqrt(np.mean((neg / sl) ** 2))) * sl
    sigma_r = float(np.sqrt(np.mean((pos / sr) ** 2))) * sr
    # the ratio term is symmetric under g -> 1/g; evaluate it at g <= 1
    g = min(sigma_l / sigma_r, sigma_r / sigma_l)
    xs = x / _pow2_scale(x)
    r_hat = np.mean(np.abs(xs)) ** 2 / np.mean(xs * xs)
    big_r = r_hat * (g**3 + 1) * (g + 1) / (g**2 + 1) ** 2
    # The grid stores sqrt of the squared-ratio function the estimator inverts.
    nu = _invert_ratio(float(np.sqrt(big_r)))
    return AggdParams(nu=nu, eta=aggd_mean(nu, sigma_l, sigma_r), sigma_l=sigma_l, sigma_r=sigma_r)


def paired_products(mscn: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Products of horizontally, vertically and diagonally adjacent coefficients.

    Valid region only: H is (h, w-1), V is (h-1, w), D1 and D2 are (h-1, w-1).
    """
    m = np.asarray(mscn, dtype=np.float64)
    if m.ndim != 2 or min(m.shape) < 2:
        raise ValueError("paired_products needs at least a 2x2 map")
    h = m[:, :-1] * m[:, 1:]
    v = m[:-1, :] * m[1:, :]
    d1 = m[:-1, :-1] * m[1:, 1:]
    d2 = m[:-1, 1:] * m[1:, :-1]
    return h, v, d1, d2


def log_transform(mscn: np.ndarray) -> np.ndarray:
    """log(mscn - min(mscn) + LOG_C); always a finite real map."""
    m = np.asarray(mscn, dtype=np.float64)
    return np.log(m - m.min() + LOG_C)


def log_derivative_maps(j: np.ndarray) -> tuple[np.ndarray, ...]:
    """Seven directional differences of a log map, valid region only."""
    if j.ndim != 2 or min(j.shape) < 3:
        raise ValueError("log derivatives need at least a 3x3 map")
    d1 = j[:, 1:] - j[:, :-1]
    d2 = j[1:, :] - j[:-1, :]
    d3 = j[1:, 1:] - j[:-1, :-1]
    d4 = j[1:, :-1] - j[:-1, 1:]
    d5 = j[:-2, 1:-1] + j[2:, 1:-1] - j[1:-1, :-2] - j[1:-1, 2:]
    d6 = j[:-1, :-1] + j[1:, 1:] - j[:-1, 1:] - j[1:, :-1]
    d7 = j[:-2, :-2] + j[2:, 2:] - j[:-2, 2:] - j[2:, :-2]
    return d1, d2, d3, d4, d5, d6, d7


def log_derivatives(mscn: np.ndarray) -> tuple[np.ndarray, ...]:
    return log_derivative_maps(log_transform(mscn))


def sigma_stats(sigma: np.ndarray) -> tuple[float, float]:
    """Mean of the sigma field and (mean / population std)^2."""
    s = np.asarray(sigma, dtype=np.float64)
    phi = float(s.mean())
    omega = float(np.sqrt(np.mean((s - phi) ** 2)))
    if omega == 0.0:
        return phi, RHO_SENTINEL
    rho = (phi / omega) ** 2
    if not np.isfinite(rho):
        rho = RHO_SENTINEL
    return phi, float(rho)


def _ggd_or_fallback(x: np.ndarray) -> tuple[float, float]:
    try:
        p = fit_ggd(x)
    except DegenerateInputError:
        return GGD_FALLBACK
    return p.alpha, p.sigma


def _aggd_or_fallback(x: np.ndarray) -> tuple[float, float, float, float]:
    try:
        p = fit_aggd(x)
    except DegenerateInputError:
        return AGGD_FALLBACK
    return p.nu, p.eta, p.sigma_l, p.sigma_r


def fallback_nss34() -> np.ndarray:
    """Feature vector emitted when every fit on a map is degenerate."""
    out = [*GGD_FALLBACK, 0.0, RHO_SENTINEL]
    out += list(AGGD_FALLBACK) * len(PRODUCT_ORIENTATIONS)
    out += list(GGD_FALLBACK) * len(LOG_DERIVATIVES)
    return np.array(out, dtype=np.float64)


def extract_nss34(plane: np.ndarray) -> np.ndarray:
    """Return f1..f34 for one image map.

    Degenerate fits are replaced by fixed fallback values so the result is
    always finite.
    """
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2 or min(plane.shape) < MIN_PLANE:
        raise ValueError(f"extract_nss34 needs a 2-D plane of at least {MIN_PLANE}x{MIN_PLANE}")
    res = compute_mscn(plane)
    feats: list[float] = []
    feats += _ggd_or_fallback(res.mscn)
    feats += sigma_stats(res.sigma)
    for prod in paired_products(res.mscn):
        feats += _aggd_or_fallback(prod)
    for der in log_derivatives(res.mscn):
        feats += _ggd_or_fallback(der)
    return np.array(feats, dtype=np.float64)


def nss34_or_fallback(plane: np.ndarray) -> np.ndarray:
    """``extract_nss34``, or the fallback vector for maps below 16x16."""
    if min(np.shape(plane)) < MIN_PLANE:
        return fallback_nss34()
    return extract_nss34(plane)
