"""Synthetic regression problems with an exactly prescribed kernel spectrum.

A problem couples a spectrum profile (the covariance eigenvalues mu_l), an
orthonormal basis e_l of L2(nu), a source-condition target, and a noise law.
The kernel is the truncated Mercer sum k(x, x') = sum_l mu_l e_l(x) e_l(x'),
so every population quantity (norms, target coefficients, kappa) is available
in closed form and rate experiments can be scored exactly.

Coefficient convention: every coefficient vector is expressed in the
H-orthonormal basis phi_l = sqrt(mu_l) e_l.  The H-norm is then the plain
Euclidean norm and the interpolating s-norms are diagonal weights:
||f||_s = sqrt(sum_l mu_l^(2s) c_l^2), with s = 1/2 the L2(nu) norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .spectrum import SpectrumProfile

__all__ = [
    "SourceParams",
    "NoiseModel",
    "gaussian",
    "bounded_uniform",
    "noise_from_dict",
    "MercerProblem",
    "Dataset",
    "make_problem",
    "default_g_coeffs",
    "basis_matrix",
    "features",
    "kernel_eval",
    "kernel_matrix",
    "target_eval",
    "sample",
    "derive_seed",
    "error_norm",
]

_BASES = ("fourier_unit_interval", "abstract_orthonormal")
_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class SourceParams:
    """Source-condition exponent r and radius R: f* = B^r g with ||g|| <= R."""

    r: float
    R: float

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r > 0.0):
            raise ConfigError(f"source exponent r must be positive, got {self.r}")
        if not (math.isfinite(self.R) and self.R > 0.0):
            raise ConfigError(f"source radius R must be positive, got {self.R}")


@dataclass(frozen=True)
class NoiseModel:
    """Conditional noise law with its Bernstein pair (sigma, M).

    gaussian(s): sigma = M = s.  bounded_uniform(h): uniform on [-h, h],
    sigma = h/sqrt(3), M = h.  Both satisfy E[eps^m | X] <= m!/2 sigma^2
    M^(m-2) by construction.
    """

    kind: str
    sigma: float
    M: float
    param: float

    def __post_init__(self):
        if self.kind not in ("gaussian", "bounded_uniform"):
            raise ConfigError(f"unknown noise kind {self.kind!r}")
        if not (math.isfinite(self.param) and self.param >= 0.0):
            raise ConfigError(f"noise parameter must be nonnegative, got {self.param}")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "gaussian":
            return self.param * rng.standard_normal(n)
        return rng.uniform(-self.param, self.param, n)

    def to_dict(self) -> dict:
        key = "sigma" if self.kind == "gaussian" else "half_width"
        return {"kind": self.kind, key: self.param}


def gaussian(sigma: float) -> NoiseModel:
    sigma = float(sigma)
    return NoiseModel("gaussian", sigma=sigma, M=sigma, param=sigma)


def bounded_uniform(half_width: float) -> NoiseModel:
    h = float(half_width)
    return NoiseModel("bounded_uniform", sigma=h / math.sqrt(3.0), M=h, param=h)


def noise_from_dict(d: dict) -> NoiseModel:
    if not isinstance(d, dict):
        raise ConfigError("noise config must be a mapping")
    d = dict(d)
    kind = d.pop("kind", None)
    if kind == "gaussian":
        keys = {"sigma"}
    elif kind == "bounded_uniform":
        keys = {"half_width"}
    else:
        raise ConfigError(f"noise kind must be gaussian or bounded_uniform, got {kind!r}")
    if set(d) != keys:
        raise ConfigError(f"noise {kind} takes exactly keys {sorted(keys)}, got {sorted(d)}")
    return gaussian(d["sigma"]) if kind == "gaussian" else bounded_uniform(d["half_width"])


# ------------------------------------------------------------------
# problem construction
# ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MercerProblem:
    profile: SpectrumProfile
    basis: str
    source: SourceParams
    g_coeffs: np.ndarray
    target_coeffs: np.ndarray       # a*_l = mu_l^r g_l
    noise: NoiseModel
    kappa_sq: float

    def __post_init__(self):
        if self.basis not in _BASES:
            raise ConfigError(f"basis must be one of {_BASES}, got {self.basis!r}")
        g = np.asarray(self.g_coeffs, dtype=float)
        if g.shape != (self.profile.p,):
            raise DataError(f"g_coeffs must have length p={self.profile.p}, got {g.shape}")
        if not np.all(np.isfinite(g)):
            raise DataError("g_coeffs must be finite")
        R = self.source.R
        # rounding slack: the default generator normalizes to radius exactly R
        if float(g @ g) > R * R * (1.0 + 1e-12):
            raise ConfigError(
                f"source membership violated: sum g_l^2 = {float(g @ g):.6g} > R^2 = {R * R:.6g}")
        a = self.profile.eigenvalues ** self.source.r * g
        object.__setattr__(self, "g_coeffs", _frozen(g))
        object.__setattr__(self, "target_coeffs", _frozen(a))
        if not (math.isfinite(self.kappa_sq) and self.kappa_sq > 0.0):
            raise ConfigError(f"kappa_sq must be positive, got {self.kappa_sq}")

    @property
    def p(self) -> int:
        return self.profile.p


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def default_g_coeffs(profile: SpectrumProfile, R: float, rho: float = 0.0) -> np.ndarray:
    """Boundary source element: R-normalized mu^rho with alternating signs.

    rho = 0 spreads mass evenly across the spectrum and places the target on
    the boundary of the source ball; larger rho concentrates it on the head.
    """
    if rho < 0.0:
        raise ConfigError(f"rho must be nonnegative, got {rho}")
    z = np.ones(profile.p)
    z[1::2] = -1.0
    raw = profile.eigenvalues ** rho * z
    return R * raw / np.linalg.norm(raw)


def _certify_kappa_sq(profile: SpectrumProfile, basis: str) -> float:
    mu = profile.eigenvalues
    # sup_x sum mu_l e_l(x)^2 <= mu_1 + 2 sum_{l>=2} mu_l for any basis with
    # |e_l| <= sqrt(2); exact for fourier at the grid max up to a 1% margin
    analytic = float(mu[0] + 2.0 * mu[1:].sum())
    if basis != "fourier_unit_interval":
        return analytic
    grid = np.linspace(0.0, 1.0, 10_000, endpoint=False)
    diag = (basis_matrix_for(basis, grid, profile.p) ** 2) @ mu
    return min(1.01 * float(diag.max()), analytic)


def make_problem(profile: SpectrumProfile, r: float, R: float, noise: NoiseModel,
                 *, basis: str = "fourier_unit_interval",
                 g_coeffs=None, rho: float = 0.0) -> MercerProblem:
    """Assemble a problem; g_coeffs defaults to the boundary generator."""
    source = SourceParams(r=float(r), R=float(R))
    if g_coeffs is None:
        g_coeffs = default_g_coeffs(profile, source.R, rho)
    return MercerProblem(profile=profile, basis=basis, source=source,
                         g_coeffs=np.asarray(g_coeffs, dtype=float),
                         target_coeffs=np.empty(0),  # derived in __post_init__
                         noise=noise,
                         kappa_sq=_certify_kappa_sq(profile, basis))


# ------------------------------------------------------------------
# pointwise evaluation (fourier basis only)
# ------------------------------------------------------------------

def basis_matrix_for(basis: str, x, p: int) -> np.ndarray:
    if basis != "fourier_unit_interval":
        raise ConfigError("pointwise evaluation is undefined for an abstract basis")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise DataError(f"inputs must form a vector, got shape {x.shape}")
    E = np.empty((x.size, p))
    E[:, 0] = 1.0
    n_cos = p // 2
    n_sin = (p - 1) // 2
    if n_cos:
        ang = 2.0 * np.pi * np.outer(x, np.arange(1, n_cos + 1))
        E[:, 1::2] = _SQRT2 * np.cos(ang)
        if n_sin:
            E[:, 2::2] = _SQRT2 * np.sin(ang[:, :n_sin])
    return E


def basis_matrix(problem: MercerProblem, x) -> np.ndarray:
    """n x p matrix of L2(nu)-orthonormal basis values e_l(x_i)."""
    return basis_matrix_for(problem.basis, x, problem.p)


def features(problem: MercerProblem, x) -> np.ndarray:
    """n x p feature matrix A with A_il = sqrt(mu_l) e_l(x_i); K = A A^T."""
    return basis_matrix(problem, x) * np.sqrt(problem.profile.eigenvalues)


def kernel_eval(problem: MercerProblem, x, xp):
    """k(x, x') = sum_l mu_l e_l(x) e_l(x'), elementwise over paired inputs."""
    scalar = np.ndim(x) == 0 and np.ndim(xp) == 0
    Ex = basis_matrix(problem, x)
    Exp = basis_matrix(problem, xp)
    if Ex.shape != Exp.shape:
        raise DataError("paired inputs must have matching shapes")
    vals = (Ex * Exp) @ problem.profile.eigenvalues
    return float(vals[0]) if scalar else vals


def kernel_matrix(problem: MercerProblem, x, xp=None) -> np.ndarray:
    """Cross Gram matrix [k(x_i, xp_j)]; xp defaults to x."""
    A = features(problem, x)
    B = A if xp is None else features(problem, xp)
    return A @ B.T


def target_eval(problem: MercerProblem, x):
    """f*(x) = sum_l a*_l sqrt(mu_l) e_l(x)."""
    scalar = np.ndim(x) == 0
    vals = features(problem, x) @ problem.target_coeffs
    return float(vals[0]) if scalar else vals


# ------------------------------------------------------------------
# sampling
# ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    seed: int

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise DataError(f"x and y lengths differ: {len(self.x)} vs {len(self.y)}")
        object.__setattr__(self, "x", _frozen(self.x))
        object.__setattr__(self, "y", _frozen(self.y))

    @property
    def n(self) -> int:
        return len(self.y)


def derive_seed(seed: int, *key: int) -> int:
    """Counter-based child seed: independent streams per (seed, key) pair.

    Replicate streams derived this way are order-insensitive, so parallel
    and sequential runs of an experiment produce identical datasets.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def sample(problem: MercerProblem, n: int, seed: int) -> Dataset:
    """Draw x_i ~ uniform[0,1) i.i.d. and y_i = f*(x_i) + eps_i."""
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise ConfigError(f"sample size must be a positive integer, got {n!r}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=int(seed))))
    x = rng.random(n)
    eps = problem.noise.draw(rng, n)
    y = target_eval(problem, x) + eps
    return Dataset(x=x, y=y, seed=int(seed))


# ------------------------------------------------------------------
# closed-form norms
# ------------------------------------------------------------------

def error_norm(problem: MercerProblem, fhat_coeffs, s: float) -> float:
    """||B^s (f* - fhat)||_H = sqrt(sum mu^(2s) (a* - fhat)^2), s in [0, 1/2]."""
    if not (0.0 <= s <= 0.5):
        raise ConfigError(f"norm exponent s must lie in [0, 1/2], got {s}")
    fhat = np.asarray(fhat_coeffs, dtype=float)
    if fhat.shape != (problem.p,):
        raise DataError(f"coefficient vector must have length p={problem.p}, got {fhat.shape}")
    diff = problem.target_coeffs - fhat
    if s == 0.0:
        return float(np.linalg.norm(diff))
    return float(np.sqrt(np.sum(problem.profile.eigenvalues ** (2.0 * s) * diff * diff)))
