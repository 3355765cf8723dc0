"""Rate calculus and the Monte-Carlo rate-verification harness.

The a-priori rule lambda_n = min(G^-1(sigma^2/(R^2 n)), 1) balances bias and
variance through the spectrum functionals alone; the predicted error scale in
the s-norm is R * G^-1(sigma^2/(R^2 n))^(r+s).  The harness draws replicate
datasets, fits at the rule's lambda, scores errors in closed form, and
compares fitted log-log slopes against the numeric slope of the theoretical
curve on the same n-grid (never against a closed-form exponent, so irregular
spectra are handled uniformly).

Determinism: replicate (i, rep) uses a counter-derived child seed, and all
replicate numerics run under single-threaded BLAS, so serial and process-
parallel runs produce bit-identical reports.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import ConfigError
from .estimator import SpectralDesign, fit_mercer
from .filters import FilterFamily, measure_qualification
from .mercer import MercerProblem, Dataset, derive_seed, error_norm, features, sample
from .spectrum import SpectrumProfile, effective_dimension, gee_inverse

__all__ = [
    "ModelParams",
    "RateRow",
    "RateReport",
    "lambda_rule",
    "theoretical_rate",
    "envelope",
    "run_rate_experiment",
    "grid_error_profile",
    "holdout_select",
    "HoldoutResult",
]

# u = sigma^2/(R^2 n) is floored here so the noiseless case stays inside
# G^-1's domain (it yields a tiny lambda: effectively full inversion)
_U_FLOOR = 1e-300


@dataclass(frozen=True)
class ModelParams:
    """Model-class parameters theta = (M, sigma, R) plus the source exponent."""

    M: float
    sigma: float
    R: float
    r: float
    profile: SpectrumProfile

    def __post_init__(self):
        if not (math.isfinite(self.R) and self.R > 0.0):
            raise ConfigError(f"R must be positive, got {self.R}")
        if not (math.isfinite(self.r) and self.r > 0.0):
            raise ConfigError(f"r must be positive, got {self.r}")
        if not (math.isfinite(self.sigma) and self.sigma >= 0.0):
            raise ConfigError(f"sigma must be nonnegative, got {self.sigma}")
        if not (math.isfinite(self.M) and self.M >= self.sigma):
            raise ConfigError(f"M must satisfy M >= sigma, got M={self.M}, sigma={self.sigma}")

    @classmethod
    def from_problem(cls, problem: MercerProblem) -> "ModelParams":
        return cls(M=problem.noise.M, sigma=problem.noise.sigma,
                   R=problem.source.R, r=problem.source.r, profile=problem.profile)


def _check_n(n) -> int:
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise ConfigError(f"n must be a positive integer, got {n!r}")
    return int(n)


def lambda_rule(params: ModelParams, n) -> float:
    """A-priori regularization level min(G^-1(sigma^2/(R^2 n)), 1)."""
    n = _check_n(n)
    u = max(params.sigma ** 2 / (params.R ** 2 * n), _U_FLOOR)
    return min(gee_inverse(params.profile, u, params.r), 1.0)


def theoretical_rate(params: ModelParams, n, s: float) -> float:
    """Predicted s-norm error scale R * G^-1(sigma^2/(R^2 n))^(r+s)."""
    n = _check_n(n)
    if not (0.0 <= s <= 0.5):
        raise ConfigError(f"norm exponent s must lie in [0, 1/2], got {s}")
    u = max(params.sigma ** 2 / (params.R ** 2 * n), _U_FLOOR)
    return params.R * gee_inverse(params.profile, u, params.r) ** (params.r + s)


@dataclass(frozen=True)
class Envelope:
    bound: float
    admissible: bool


def envelope(params: ModelParams, n, lam: float, eta: float,
             filt: FilterFamily, s: float, C: float = 1.0) -> Envelope:
    """Non-asymptotic error envelope at confidence 1 - eta (shape diagnostic).

    bound = C log(8/eta) lam^s (R(lam^r + n^-1/2) + M/(n lam)
            + sqrt(sigma^2 N(lam)/(n lam)))

    C defaults to 1: the envelope's value is its shape (term balance,
    monotonicity), not a certified constant; the filter's constants are
    absorbed into C.  admissible reflects the sample-size proviso
    n >= 64 lam^-1 max(N(lam), 1) log^2(8/eta).
    """
    n = _check_n(n)
    if not (0.0 < eta < 1.0):
        raise ConfigError(f"eta must lie in (0, 1), got {eta}")
    if not (0.0 < lam <= 1.0):
        raise ConfigError(f"lambda must lie in (0, 1], got {lam}")
    if not (0.0 <= s <= 0.5):
        raise ConfigError(f"norm exponent s must lie in [0, 1/2], got {s}")
    del filt
    eff = effective_dimension(params.profile, lam)
    log_term = math.log(8.0 / eta)
    bound = C * log_term * lam ** s * (
        params.R * (lam ** params.r + n ** -0.5)
        + params.M / (n * lam)
        + math.sqrt(params.sigma ** 2 * eff / (n * lam)))
    admissible = n >= 64.0 / lam * max(eff, 1.0) * log_term ** 2
    return Envelope(bound=bound, admissible=admissible)


# ------------------------------------------------------------------
# Monte-Carlo harness
# ------------------------------------------------------------------

@dataclass(frozen=True)
class RateRow:
    n: int
    lam: float
    theoretical: float
    errors: tuple
    mean: float
    median: float
    q10: float
    q90: float


@dataclass(frozen=True)
class RateReport:
    rows: tuple
    fitted_slope: float
    theoretical_slope: float | None
    s: float
    replicates: int

    def __str__(self):
        lines = [f"{'n':>6} {'lambda':>12} {'theo':>12} {'median':>12} {'mean':>12}"]
        for row in self.rows:
            lines.append(f"{row.n:>6} {row.lam:>12.5g} {row.theoretical:>12.5g} "
                         f"{row.median:>12.5g} {row.mean:>12.5g}")
        theo = "none" if self.theoretical_slope is None else f"{self.theoretical_slope:.4f}"
        lines.append(f"fitted slope {self.fitted_slope:.4f} (theoretical {theo})")
        return "\n".join(lines)


def _replicate_error(problem: MercerProblem, filt: FilterFamily,
                     n: int, lam: float, s: float, child_seed: int) -> float:
    ds = sample(problem, n, child_seed)
    res = fit_mercer(problem, ds.x, ds.y, lam, filt)
    return error_norm(problem, res.eigencoeffs, s)


def _rate_task(args) -> float:
    problem, filt, n, lam, s, child_seed = args
    with threadpool_limits(limits=1):
        return _replicate_error(problem, filt, n, lam, s, child_seed)


def _run_tasks(worker, tasks, jobs: int):
    # results in task order regardless of jobs, so assembly is deterministic
    if jobs <= 1:
        with threadpool_limits(limits=1):
            return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def _log_slope(ns, values) -> float:
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > 0.0
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(ns[keep]), np.log(values[keep]), 1)[0])


def _warn_if_underqualified(filt: FilterFamily, needed: float) -> None:
    if filt.qualification >= needed:
        return
    probe = measure_qualification(filt, [needed], grid_size=64)[0]
    if probe.saturates:
        warnings.warn(
            f"filter {filt.kind} qualification {filt.qualification:g} is below "
            f"r+s={needed:g} (measured saturation); rates may be suboptimal",
            RuntimeWarning, stacklevel=3)


def run_rate_experiment(problem: MercerProblem, filt: FilterFamily, n_grid,
                        replicates: int, s: float, seed: int,
                        jobs: int = 1) -> RateReport:
    """Replicated sample-fit-score sweep over n with the a-priori lambda rule.

    Replicate (i, rep) draws its dataset from derive_seed(seed, i, rep); the
    fit runs at lambda_rule for that n and is scored by the closed-form
    s-norm.  Slopes are least-squares fits of log(median error) and of
    log(theoretical rate) against log n on the same grid.
    """
    ns = [int(v) for v in n_grid]
    if len(ns) == 0:
        raise ConfigError("n_grid must be nonempty")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ConfigError("n_grid must be strictly increasing")
    if replicates < 20:
        raise ConfigError(f"at least 20 replicates required, got {replicates}")
    if not (0.0 <= s <= 0.5):
        raise ConfigError(f"norm exponent s must lie in [0, 1/2], got {s}")
    params = ModelParams.from_problem(problem)
    _warn_if_underqualified(filt, params.r + s)

    lams = [lambda_rule(params, n) for n in ns]
    tasks = [(problem, filt, n, lam, s, derive_seed(seed, i, rep))
             for i, (n, lam) in enumerate(zip(ns, lams))
             for rep in range(replicates)]
    flat = _run_tasks(_rate_task, tasks, jobs)

    rows = []
    for i, (n, lam) in enumerate(zip(ns, lams)):
        errs = np.array(flat[i * replicates:(i + 1) * replicates])
        rows.append(RateRow(
            n=n, lam=lam, theoretical=theoretical_rate(params, n, s),
            errors=tuple(errs),
            mean=float(np.mean(errs)), median=float(np.median(errs)),
            q10=float(np.quantile(errs, 0.10)), q90=float(np.quantile(errs, 0.90))))

    fitted = _log_slope(ns, [row.median for row in rows])
    theo = None if params.sigma == 0.0 else _log_slope(ns, [row.theoretical for row in rows])
    return RateReport(rows=tuple(rows), fitted_slope=fitted, theoretical_slope=theo,
                      s=s, replicates=replicates)


def _grid_task(args) -> np.ndarray:
    problem, filt, n, grid, s, child_seed = args
    with threadpool_limits(limits=1):
        ds = sample(problem, n, child_seed)
        design = SpectralDesign(problem, ds.x)
        return np.array([error_norm(problem, design.fit(ds.y, lam, filt).eigencoeffs, s)
                         for lam in grid])


def grid_error_profile(problem: MercerProblem, filt: FilterFamily, n: int,
                       lambda_grid, replicates: int, s: float, seed: int,
                       jobs: int = 1) -> np.ndarray:
    """Median s-norm error per lambda over replicates, one shared
    eigendecomposition per replicate."""
    grid = [float(v) for v in lambda_grid]
    if len(grid) == 0:
        raise ConfigError("lambda grid must be nonempty")
    n = _check_n(n)
    tasks = [(problem, filt, n, grid, s, derive_seed(seed, 0, rep))
             for rep in range(replicates)]
    per_rep = _run_tasks(_grid_task, tasks, jobs)
    return np.median(np.stack(per_rep), axis=0)


# ------------------------------------------------------------------
# hold-out adaptivity
# ------------------------------------------------------------------

@dataclass(frozen=True)
class HoldoutResult:
    lambda_hat: float
    table: tuple       # (lambda, holdout_mse) pairs in grid order


def holdout_select(problem: MercerProblem, dataset: Dataset, lambda_grid,
                   filt: FilterFamily, split_fraction: float) -> HoldoutResult:
    """Pick lambda by validation error on a held-out tail split.

    The dataset's points are already i.i.d., so the deterministic split
    (leading train block, trailing hold-out block) introduces no extra
    randomness.  Ties go to the larger lambda (the more regularized fit).
    """
    grid = [float(v) for v in lambda_grid]
    if len(grid) == 0:
        raise ConfigError("lambda grid must be nonempty")
    if not (0.0 < split_fraction < 1.0):
        raise ConfigError(f"split_fraction must lie in (0, 1), got {split_fraction}")
    n = dataset.n
    n_hold = int(round(split_fraction * n))
    n_train = n - n_hold
    if n_train < 2 or n_hold < 2:
        raise ConfigError(
            f"each split needs at least 2 points, got train={n_train}, holdout={n_hold}")
    x_tr, y_tr = dataset.x[:n_train], dataset.y[:n_train]
    x_ho, y_ho = dataset.x[n_train:], dataset.y[n_train:]
    design = SpectralDesign(problem, x_tr)
    feats_ho = features(problem, x_ho)
    table = []
    for lam in grid:
        coeffs = design.fit(y_tr, lam, filt).eigencoeffs
        mse = float(np.mean((feats_ho @ coeffs - y_ho) ** 2))
        table.append((lam, mse))
    best = min(m for _, m in table)
    lambda_hat = max(lam for lam, m in table if m == best)
    return HoldoutResult(lambda_hat=lambda_hat, table=tuple(table))
