"""Epsilon-insensitive support vector regression solved by SMO.

The dual is posed over 2n variables ``a = [alpha; alpha*]`` with labels
``s = [+1; -1]``::

    min  1/2 a' Q a + p' a
    s.t. s' a = 0,  0 <= a <= C
    Q = (s s') * [[K, K], [K, K]],   p = [eps - y; eps + y]

Working pairs are chosen with the second-order rule of Fan, Chen & Lin
(2005); the loop stops when the maximal KKT violation drops below ``tol``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

TAU = 1e-12


class ConvergenceWarning(UserWarning):
    pass


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    aa = np.einsum("ij,ij->i", a, a)
    bb = np.einsum("ij,ij->i", b, b)
    d2 = aa[:, None] + bb[None, :] - 2.0 * (a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-gamma * d2)


def kernel_matrix(a: np.ndarray, b: np.ndarray, kernel: str, gamma: float | None) -> np.ndarray:
    if kernel == "rbf":
        return rbf_kernel(a, b, gamma)
    if kernel == "linear":
        return a @ b.T
    raise ValueError(f"unknown kernel {kernel!r}")


@dataclass
class DualSolution:
    alpha: np.ndarray  # length 2n
    coef: np.ndarray  # alpha - alpha*, length n
    bias: float
    objective: float
    kkt_gap: float
    iterations: int
    converged: bool


def solve_dual(
    k: np.ndarray,
    y: np.ndarray,
    c: float,
    epsilon: float,
    tol: float = 1e-3,
    max_iter: int = 100_000,
) -> DualSolution:
    """SMO on a precomputed n x n kernel matrix."""
    n = len(y)
    y = np.asarray(y, dtype=np.float64)
    sign = np.concatenate([np.ones(n), -np.ones(n)])
    p = np.concatenate([epsilon - y, epsilon + y])
    krow = np.hstack([k, k])  # row t % n holds K(t, .) over all 2n variables
    qdiag = np.concatenate([np.diag(k), np.diag(k)])
    alpha = np.zeros(2 * n)
    # yg[t] = sign[t] * grad[t]; the selection rules only need this product
    yg = sign * p
    up = sign > 0  # alpha may grow along sign (all alpha start at 0)
    low = sign < 0

    it = 0
    gap = np.inf
    while it < max_iter:
        cand = np.where(up, -yg, -np.inf)
        i = int(np.argmax(cand))
        gmax = cand[i]
        lowvals = np.where(low, yg, -np.inf)
        gmax2 = lowvals.max()
        if gmax == -np.inf or gmax2 == -np.inf:
            gap = 0.0
            break
        gap = gmax + gmax2
        if gap < tol:
            break

        ki = krow[i % n]
        b = gmax + lowvals  # -inf outside the low set
        a = qdiag[i] + qdiag - 2.0 * ki
        a = np.where(a > 0, a, TAU)
        score = np.where(b > 0, -(b * b) / a, np.inf)
        j = int(np.argmin(score))
        if score[j] == np.inf:
            break

        kj = krow[j % n]
        si, sj = sign[i], sign[j]
        gi, gj = si * yg[i], sj * yg[j]
        old_i, old_j = alpha[i], alpha[j]
        qij = si * sj * ki[j]
        if si != sj:
            quad = max(qdiag[i] + qdiag[j] + 2.0 * qij, TAU)
            delta = (-gi - gj) / quad
            diff = old_i - old_j
            ai, aj = old_i + delta, old_j + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > c:
                    ai, aj = c, c - diff
            elif aj > c:
                aj, ai = c, c + diff
        else:
            quad = max(qdiag[i] + qdiag[j] - 2.0 * qij, TAU)
            delta = (gi - gj) / quad
            total = old_i + old_j
            ai, aj = old_i - delta, old_j + delta
            if total > c:
                if ai > c:
                    ai, aj = c, total - c
            elif aj < 0:
                aj, ai = 0.0, total
            if total > c:
                if aj > c:
                    aj, ai = c, total - c
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        yg += (si * (ai - old_i)) * ki
        yg += (sj * (aj - old_j)) * kj
        for t, st in ((i, si), (j, sj)):
            at = alpha[t]
            up[t] = at < c if st > 0 else at > 0
            low[t] = at > 0 if st > 0 else at < c
        it += 1

    grad = sign * yg
    converged = gap < tol
    if not converged:
        warnings.warn(
            f"SMO stopped after {it} iterations with KKT gap {gap:.3g} > {tol:g}",
            ConvergenceWarning,
            stacklevel=2,
        )
    bias = -_rho(alpha, grad, sign, c)
    coef = alpha[:n] - alpha[n:]
    objective = 0.5 * float(alpha @ (grad - p)) + float(p @ alpha)
    return DualSolution(alpha, coef, bias, objective, float(gap), it, converged)


def _rho(alpha: np.ndarray, grad: np.ndarray, sign: np.ndarray, c: float) -> float:
    yg = sign * grad
    at_upper = alpha >= c
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        return float(yg[free].mean())
    ub_mask = (at_upper & (sign < 0)) | (at_lower & (sign > 0))
    lb_mask = (at_upper & (sign > 0)) | (at_lower & (sign < 0))
    ub = yg[ub_mask].min() if ub_mask.any() else np.inf
    lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2)


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray
    keep: np.ndarray  # boolean mask of retained dimensions

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        # relative threshold so fallback-constant columns are dropped
        scale = np.maximum(np.abs(mean), 1.0)
        keep = std > 1e-12 * scale
        return cls(mean=mean, std=np.where(keep, std, 1.0), keep=keep)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return ((x - self.mean) / self.std)[:, self.keep]


@dataclass
class SvrModel:
    kernel: str
    c: float
    epsilon: float
    gamma: float | None
    scaler: Standardizer
    support_vectors: np.ndarray  # standardized, retained dims only
    dual_coef: np.ndarray
    bias: float
    kkt_gap: float = 0.0
    objective: float = 0.0
    converged: bool = True
    weights: np.ndarray | None = field(default=None)

    @property
    def hyperparams(self) -> dict:
        out = {"C": self.c, "epsilon": self.epsilon}
        if self.kernel == "rbf":
            out["gamma"] = self.gamma
        return out

    def decision(self, z: np.ndarray) -> np.ndarray:
        if self.kernel == "linear" and self.weights is not None:
            return z @ self.weights + self.bias
        if len(self.dual_coef) == 0:
            return np.full(len(z), self.bias)
        kz = kernel_matrix(z, self.support_vectors, self.kernel, self.gamma)
        return kz @ self.dual_coef + self.bias

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != len(self.scaler.mean):
            raise DataError(f"expected {len(self.scaler.mean)} features, got {x.shape[1]}")
        if not np.all(np.isfinite(x)):
            raise DataError("non-finite feature values at predict time")
        return self.decision(self.scaler.transform(x))

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel,
            "C": float(self.c),
            "epsilon": float(self.epsilon),
            "gamma": None if self.gamma is None else float(self.gamma),
            "mean": self.scaler.mean.tolist(),
            "std": self.scaler.std.tolist(),
            "keep": self.scaler.keep.astype(int).tolist(),
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "bias": float(self.bias),
            "weights": None if self.weights is None else self.weights.tolist(),
            "kkt_gap": float(self.kkt_gap),
            "objective": float(self.objective),
            "converged": bool(self.converged),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvrModel":
        keep = np.array(d["keep"], dtype=bool)
        sv = np.array(d["support_vectors"], dtype=np.float64).reshape(-1, int(keep.sum()))
        return cls(
            kernel=d["kernel"],
            c=d["C"],
            epsilon=d["epsilon"],
            gamma=d["gamma"],
            scaler=Standardizer(
                mean=np.array(d["mean"], dtype=np.float64),
                std=np.array(d["std"], dtype=np.float64),
                keep=keep,
            ),
            support_vectors=sv,
            dual_coef=np.array(d["dual_coef"], dtype=np.float64),
            bias=d["bias"],
            weights=None if d.get("weights") is None else np.array(d["weights"], dtype=np.float64),
            kkt_gap=d.get("kkt_gap", 0.0),
            objective=d.get("objective", 0.0),
            converged=d.get("converged", True),
        )


def check_finite(x: np.ndarray, ids: list[str] | None = None) -> None:
    bad = np.argwhere(~np.isfinite(x))
    if len(bad):
        row, col = bad[0]
        who = ids[row] if ids is not None else f"row {row}"
        raise DataError(f"non-finite feature in {who}, dimension {col}")


def train_svr(
    x: np.ndarray,
    y: np.ndarray,
    kernel: str = "rbf",
    c: float = 1.0,
    gamma: float | None = None,
    epsilon: float | None = None,
    tol: float = 1e-3,
    max_iter: int = 100_000,
    ids: list[str] | None = None,
) -> SvrModel:
    """Standardize ``x`` and fit an epsilon-SVR.

    ``epsilon`` defaults to 0.1 * std(y); ``gamma`` defaults to
    1 / (retained dimensions).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != len(y):
        raise ValueError("x must be (n, d) with len(y) == n")
    if len(y) < 2:
        raise ValueError("need at least two samples")
    check_finite(x, ids)
    if not np.all(np.isfinite(y)):
        raise DataError("non-finite target values")
    scaler = Standardizer.fit(x)
    z = scaler.transform(x)
    if epsilon is None:
        epsilon = 0.1 * float(np.std(y))
    if kernel == "rbf" and gamma is None:
        gamma = 1.0 / max(z.shape[1], 1)
    k = kernel_matrix(z, z, kernel, gamma)
    sol = solve_dual(k, y, c, epsilon, tol=tol, max_iter=max_iter)
    sv = np.flatnonzero(sol.coef != 0.0)
    weights = z[sv].T @ sol.coef[sv] if kernel == "linear" else None
    return SvrModel(
        kernel=kernel,
        c=float(c),
        epsilon=float(epsilon),
        gamma=None if gamma is None else float(gamma),
        scaler=scaler,
        support_vectors=z[sv],
        dual_coef=sol.coef[sv],
        bias=sol.bias,
        kkt_gap=sol.kkt_gap,
        objective=sol.objective,
        converged=sol.converged,
        weights=weights,
    )
