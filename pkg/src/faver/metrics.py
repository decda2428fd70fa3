"""SROCC, PLCC and RMSE, with the 4-parameter logistic used before PLCC/RMSE."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.stats import rankdata

from .errors import UndefinedCorrelationError


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson needs two 1-D vectors of equal length")
    dx = x - x.mean()
    dy = y - y.mean()
    denom = np.sqrt(np.dot(dx, dx) * np.dot(dy, dy))
    if denom == 0:
        raise UndefinedCorrelationError("correlation of a constant vector")
    return float(np.dot(dx, dy) / denom)


def srocc(x: np.ndarray, y: np.ndarray) -> float:
    """Spearman correlation: Pearson on average ranks."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) < 3:
        raise ValueError("srocc needs at least 3 samples")
    return pearson(rankdata(x), rankdata(np.asarray(y, dtype=np.float64)))


def logistic4(x: np.ndarray, b1: float, b2: float, b3: float, b4: float) -> np.ndarray:
    """b2 + (b1 - b2) / (1 + exp(-(x - b3) / |b4|))."""
    z = (np.asarray(x, dtype=np.float64) - b3) / abs(b4)
    return b2 + (b1 - b2) * 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class LogisticFit:
    beta: tuple[float, float, float, float]
    mapped: np.ndarray
    sse: float
    converged: bool
    iterations: int


# The simplex works on (midpoint, slope at centre, centre, log scale). In
# these coordinates an affine map is the limit log scale -> inf with the
# other three fixed, which the simplex reaches without blowing up b1, b2.
_MAX_LOG_SCALE = 40.0


def _centre_bounds(x: np.ndarray) -> tuple[float, float]:
    """The centre may sit at most one data span outside the data.

    On convex-looking data the unconstrained optimum runs off to infinity
    (the curve turns into an exponential tail) and the SSE never settles.
    """
    span = float(np.ptp(x))
    return float(x.min()) - span, float(x.max()) + span


def _from_internal(theta: np.ndarray, bounds: tuple[float, float]) -> tuple[float, float, float, float]:
    mid, slope, b3, log_s = theta
    s = float(np.exp(min(log_s, _MAX_LOG_SCALE)))
    half = 2.0 * slope * s
    return mid + half, mid - half, float(np.clip(b3, *bounds)), s


def _internal_curve(theta: np.ndarray, x: np.ndarray, bounds: tuple[float, float]) -> np.ndarray:
    mid, slope, b3, log_s = theta
    s = np.exp(min(log_s, _MAX_LOG_SCALE))
    return mid + 2.0 * slope * s * np.tanh((x - np.clip(b3, *bounds)) / (2.0 * s))


def logistic_fit(
    pred: np.ndarray,
    mos: np.ndarray,
    rel_tol: float = 1e-10,
    max_iter: int = 10_000,
) -> LogisticFit:
    """Least-squares fit of ``logistic4`` by restarted Nelder-Mead.

    Starts from b1 = max(mos), b2 = min(mos), b3 = mean(pred),
    b4 = std(pred) / 4 and restarts the simplex at the incumbent until a
    restart improves the SSE by less than ``rel_tol`` (relative), the SSE
    reaches round-off level, or the iteration budget is spent.
    """
    x = np.asarray(pred, dtype=np.float64)
    y = np.asarray(mos, dtype=np.float64)
    if len(x) < 8:
        raise ValueError("logistic_fit needs at least 8 samples")
    if np.ptp(x) == 0:
        raise ValueError("logistic_fit needs non-constant predictions")

    b1, b2, b3, b4 = y.max(), y.min(), x.mean(), x.std() / 4
    theta = np.array([(b1 + b2) / 2, (b1 - b2) / (4 * b4), b3, np.log(b4)])

    bounds = _centre_bounds(x)

    def sse(t: np.ndarray) -> float:
        r = _internal_curve(t, x, bounds) - y
        return float(r @ r)

    # SSE indistinguishable from zero at double precision
    floor = 1e-26 * max(float(np.sum((y - y.mean()) ** 2)), 1e-300)
    used = 0
    converged = False

    # short probes from other centres, widths and orientations; the
    # documented start wins ties, so easy problems are unaffected
    best = sse(theta)
    starts = [theta]
    # near-affine start from the least-squares line, so the fit never ends
    # up worse than a straight line
    lin_slope, lin_icpt = np.polyfit(x, y, 1)
    starts.append(np.array([lin_icpt + lin_slope * b3, lin_slope, b3, np.log(100 * np.ptp(x))]))
    for q in (0.1, 0.5, 0.9):
        for width in (b4, b4 / 4):
            for sgn in (1.0, -1.0):
                slope = sgn * (b1 - b2) / (4 * width)
                starts.append(np.array([(b1 + b2) / 2, slope, np.quantile(x, q), np.log(width)]))
    probe_best = None
    for start in starts:
        res = minimize(sse, start, method="Nelder-Mead", options={"maxiter": 60, "adaptive": True})
        used += int(res.nit)
        if probe_best is None or res.fun < probe_best.fun:
            probe_best = res
    if probe_best.fun < best:
        theta, best = probe_best.x, float(probe_best.fun)
    while used < max_iter:
        res = minimize(
            sse,
            theta,
            method="Nelder-Mead",
            options={
                "maxiter": min(max_iter - used, 1000),
                "xatol": 1e-9 * (1.0 + float(np.max(np.abs(theta)))),
                "fatol": 1e-13 * best,
                "adaptive": True,
            },
        )
        used += max(int(res.nit), 1)
        improvement = best - res.fun
        if res.fun <= best:
            theta, new_best = res.x, float(res.fun)
        else:
            new_best = best
        if new_best <= floor or improvement <= rel_tol * best:
            best = new_best
            converged = True
            break
        best = new_best
    if not converged:
        warnings.warn("logistic fit hit its iteration budget", RuntimeWarning, stacklevel=2)
    beta = _from_internal(theta, bounds)
    return LogisticFit(
        beta=beta,
        mapped=_internal_curve(theta, x, bounds),
        sse=best,
        converged=converged,
        iterations=used,
    )


def mapped_plcc_rmse(mapped: np.ndarray, mos: np.ndarray) -> tuple[float, float]:
    mapped = np.asarray(mapped, dtype=np.float64)
    mos = np.asarray(mos, dtype=np.float64)
    rmse = float(np.sqrt(np.mean((mapped - mos) ** 2)))
    return pearson(mapped, mos), rmse


def plcc_rmse(pred: np.ndarray, mos: np.ndarray) -> tuple[float, float]:
    """PLCC and RMSE after logistic linearisation of ``pred``."""
    fit = logistic_fit(pred, mos)
    return mapped_plcc_rmse(fit.mapped, mos)
