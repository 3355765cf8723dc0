"""Spectral-filter regression from a Gram or feature eigendecomposition.

The normalized convention: with K the n x n Gram matrix and kappa^2 the
certified kernel bound, the empirical operator is K/(n kappa^2), whose
eigenvalues land in [0, 1] and match the population spectrum's scale.  A fit
applies a filter g_lambda to those eigenvalues:

    alpha = (n kappa^2)^-1 U diag(g_lambda(theta)) U^T y

For the tikhonov filter this is exactly kernel ridge regression,
alpha = (K + n kappa^2 lambda I)^-1 y.  Eigenvalues below 1e-14 of the top
are treated as null directions and contribute nothing.

For n > p the same estimator is computed from the p x p feature Gram
A^T A/(n kappa^2) (A the feature matrix, K = A A^T), which shares the
nonzero spectrum; dense n x n work is never needed past p.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .filters import FilterFamily, g_value
from .mercer import MercerProblem, features, kernel_matrix

__all__ = [
    "FitResult",
    "gram",
    "fit",
    "fit_mercer",
    "eigencoeffs",
    "predict",
    "SpectralDesign",
]

_NULL_REL = 1e-14


@dataclass(frozen=True, eq=False)
class FitResult:
    """Dual coefficients alpha of f_hat = sum_j alpha_j k(x_j, .).

    eigencoeffs holds the H-orthonormal-basis coefficients of f_hat when the
    fit had a problem to compute them against (an exact linear image of
    alpha, fhat = A^T alpha), else None.
    """

    alpha: np.ndarray
    lam: float
    filter: FilterFamily
    kappa_sq: float
    eigencoeffs: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.alpha)


def gram(problem: MercerProblem, x) -> np.ndarray:
    """Exactly symmetric Gram matrix [k(x_i, x_j)]."""
    K = kernel_matrix(problem, x)
    return (K + K.T) * 0.5


def _filtered(filt: FilterFamily, lam: float, theta: np.ndarray):
    """g_lambda on the non-null spectrum, zero elsewhere."""
    g = np.zeros_like(theta)
    top = float(theta[-1]) if theta.size else 0.0   # eigh sorts ascending
    mask = theta > _NULL_REL * top if top > 0.0 else np.zeros(theta.shape, bool)
    if np.any(mask):
        g[mask] = g_value(filt, lam, theta[mask])
    return g, mask


def _check_fit_args(K: np.ndarray, y: np.ndarray, lam: float, kappa_sq: float) -> None:
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DataError(f"Gram matrix must be square, got shape {K.shape}")
    if y.shape != (K.shape[0],):
        raise DataError(f"y must have length n={K.shape[0]}, got shape {y.shape}")
    scale = float(np.max(np.abs(K))) if K.size else 0.0
    if float(np.max(np.abs(K - K.T))) > 1e-10 * (1.0 + scale):
        raise DataError("Gram matrix must be symmetric")
    if not (isinstance(lam, (int, float, np.floating)) and 0.0 < lam <= 1.0):
        raise DataError(f"lambda must lie in (0, 1], got {lam!r}")
    if not kappa_sq > 0.0:
        raise ConfigError(f"kappa_sq must be positive, got {kappa_sq}")


def fit(K, y, lam: float, filt: FilterFamily, kappa_sq: float) -> FitResult:
    """Filtered fit from a raw Gram matrix (no eigencoeffs)."""
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_fit_args(K, y, lam, kappa_sq)
    n = K.shape[0]
    nk = n * kappa_sq
    theta, U = np.linalg.eigh((K + K.T) / (2.0 * nk))
    theta = np.clip(theta, 0.0, 1.0)
    g, _ = _filtered(filt, float(lam), theta)
    alpha = U @ (g * (U.T @ y)) / nk
    return FitResult(alpha=alpha, lam=float(lam), filter=filt, kappa_sq=kappa_sq)


def eigencoeffs(problem: MercerProblem, x, alpha) -> np.ndarray:
    """H-ONB coefficients of the dual expansion: fhat = A^T alpha.

    Re-synthesis contract: sum_l fhat_l sqrt(mu_l) e_l(.) equals
    sum_j alpha_j k(x_j, .) pointwise.
    """
    alpha = np.asarray(alpha, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if alpha.shape != x.shape:
        raise DataError(f"alpha must have one entry per input, got {alpha.shape} vs {x.shape}")
    return features(problem, x).T @ alpha


def predict(problem: MercerProblem, result: FitResult, x_train, x_new=None):
    """f_hat at new points; in-sample (x_new None) this is exactly K alpha."""
    if x_new is None:
        return gram(problem, x_train) @ result.alpha
    scalar = np.ndim(x_new) == 0
    vals = kernel_matrix(problem, x_new, x_train) @ result.alpha
    return float(vals[0]) if scalar else vals


class SpectralDesign:
    """One design's eigendecomposition, reused across lambdas and targets.

    Selects the cheaper side automatically: the n x n Gram path when n <= p,
    the p x p feature path otherwise.  Both produce identical fits (the
    nonzero spectrum is shared; null directions are dropped on either path).
    """

    def __init__(self, problem: MercerProblem, x):
        self.problem = problem
        self.x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.x.size < 1:
            raise DataError("design needs at least one point")
        A = features(problem, self.x)
        n, p = A.shape
        self.n = n
        self._A = A
        self._nk = n * problem.kappa_sq
        if n <= p:
            K = A @ A.T
            theta, U = np.linalg.eigh((K + K.T) / (2.0 * self._nk))
            self._mode = "gram"
            self._U = U
            self._W = A.T @ U           # maps filtered dual weights to eigencoeffs
        else:
            B = A.T @ A
            theta, V = np.linalg.eigh((B + B.T) / (2.0 * self._nk))
            self._mode = "feature"
            self._V = V
        self.theta = np.clip(theta, 0.0, 1.0)

    def fit(self, y, lam: float, filt: FilterFamily) -> FitResult:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n,):
            raise DataError(f"y must have length n={self.n}, got shape {y.shape}")
        if not (isinstance(lam, (int, float, np.floating)) and 0.0 < lam <= 1.0):
            raise DataError(f"lambda must lie in (0, 1], got {lam!r}")
        g, mask = _filtered(filt, float(lam), self.theta)
        if self._mode == "gram":
            gz = g * (self._U.T @ y)
            alpha = self._U @ gz / self._nk
            coeffs = self._W @ gz / self._nk
        else:
            w = self._V.T @ (self._A.T @ y)
            coeffs = self._V @ (g * w) / self._nk
            # alpha = A V diag(g/theta) V^T A^T y / (n kappa^2)^2; null modes drop
            ratio = np.zeros_like(g)
            ratio[mask] = g[mask] / self.theta[mask]
            alpha = self._A @ (self._V @ (ratio * w)) / self._nk ** 2
        return FitResult(alpha=alpha, lam=float(lam), filter=filt,
                         kappa_sq=self.problem.kappa_sq, eigencoeffs=coeffs)


def fit_mercer(problem: MercerProblem, x, y, lam: float, filt: FilterFamily) -> FitResult:
    """Fit on a synthetic problem; eigencoeffs are filled in for exact norms."""
    return SpectralDesign(problem, x).fit(y, lam, filt)
