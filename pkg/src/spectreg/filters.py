"""Spectral regularization filter families.

A filter family maps a regularization level lambda in (0, 1] to a function
g_lambda on the rescaled spectrum t in (0, 1].  The residual is
r_lambda(t) = 1 - t * g_lambda(t).  Each family ships declared constants

    |t * g_lambda(t)| <= D
    |g_lambda(t)|     <= E / lambda
    |r_lambda(t)|     <= gamma0
    |r_lambda(t)| * t^q <= gamma_q(q) * lambda^q   (qualification q)

which are certified numerically (verify_constants, measure_qualification),
never trusted.  Iterative families are expressed in closed form via
expm1/log1p so that tiny t and huge iteration counts stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

__all__ = [
    "FilterFamily",
    "tikhonov",
    "spectral_cutoff",
    "landweber",
    "iterated_tikhonov",
    "filter_from_dict",
    "landweber_iterations",
    "g_value",
    "r_value",
    "verify_constants",
    "measure_qualification",
    "ConditionWitness",
    "ConstantsReport",
    "QualificationEntry",
]

_KINDS = ("tikhonov", "spectral_cutoff", "landweber", "iterated_tikhonov")


@dataclass(frozen=True)
class FilterFamily:
    """One regularization family with its declared certified constants.

    ``qualification`` may be ``math.inf`` (spectral cutoff, Landweber).  For
    those families the per-exponent constant is :meth:`gamma_q_for`; the
    ``gamma_q`` field stores the constant at q = 1.  Instances are immutable
    and all operations on them are pure.
    """

    kind: str
    D: float
    E: float
    gamma0: float
    qualification: float
    gamma_q: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown filter kind {self.kind!r}")
        for name in ("D", "E", "gamma0", "gamma_q"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ConfigError(f"filter constant {name} must be a positive real, got {v}")
        if not self.qualification > 0.0:
            raise ConfigError(f"qualification must be positive, got {self.qualification}")

    def gamma_q_for(self, q: float) -> float | None:
        """Declared qualification constant at exponent q, or None past q_max.

        None means the family claims nothing at that exponent (the measured
        supremum saturates as lambda -> 0).
        """
        if not q > 0.0:
            raise ConfigError(f"qualification exponent must be positive, got {q}")
        if self.kind == "tikhonov":
            return 1.0 if q <= 1.0 else None
        if self.kind == "spectral_cutoff":
            return 1.0
        if self.kind == "landweber":
            step = self.params["step"]
            return max((q / (math.e * step)) ** q, 1.0)
        # iterated_tikhonov
        return 1.0 if q <= self.params["m"] else None

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "D": self.D, "E": self.E, "gamma0": self.gamma0,
             "qualification": self.qualification, "gamma_q": self.gamma_q}
        d.update(self.params)
        return d


# ------------------------------------------------------------------
# factories with the default declared-constants table
# ------------------------------------------------------------------

def tikhonov() -> FilterFamily:
    """g = 1/(t + lambda); qualification 1."""
    return FilterFamily("tikhonov", D=1.0, E=1.0, gamma0=1.0,
                        qualification=1.0, gamma_q=1.0)


def spectral_cutoff() -> FilterFamily:
    """g = 1/t above the cutoff (inclusive t >= lambda), 0 below.

    Infinite qualification with gamma_q = 1 uniformly: the residual is an
    indicator of t < lambda, so |r| t^q < lambda^q exactly.
    """
    return FilterFamily("spectral_cutoff", D=1.0, E=1.0, gamma0=1.0,
                        qualification=math.inf, gamma_q=1.0)


def landweber(step: float = 1.0) -> FilterFamily:
    """Iterative gradient filter, m = ceil(1/lambda) steps of size ``step``.

    Infinite qualification.  E is 2, not 1: sup_t g = step * m, and
    lambda * ceil(1/lambda) <= 1 + lambda <= 2, with the supremum
    approached for lambda just above a reciprocal-integer boundary.
    """
    step = float(step)
    if not (0.0 < step <= 1.0):
        raise ConfigError(f"landweber step must lie in (0, 1], got {step}")
    return FilterFamily("landweber", D=1.0, E=2.0, gamma0=1.0,
                        qualification=math.inf, gamma_q=1.0,
                        params={"step": step})


def iterated_tikhonov(m: int) -> FilterFamily:
    """m-fold Tikhonov; qualification m, residual (lambda/(t+lambda))^m."""
    if not (isinstance(m, (int, np.integer)) and m >= 1):
        raise ConfigError(f"iterated_tikhonov m must be a positive integer, got {m!r}")
    return FilterFamily("iterated_tikhonov", D=1.0, E=float(m), gamma0=1.0,
                        qualification=float(m), gamma_q=1.0,
                        params={"m": int(m)})


_FILTER_KEYS = {
    "tikhonov": set(),
    "spectral_cutoff": set(),
    "landweber": {"step"},
    "iterated_tikhonov": {"m"},
}
_CONSTANT_KEYS = {"D", "E", "gamma0", "qualification", "gamma_q"}


def filter_from_dict(d: dict) -> FilterFamily:
    """Build a family from a config mapping: kind tag + parameters.

    Declared constants may be overridden explicitly (they are then certified
    against the overrides, not the defaults).  Unknown keys are rejected.
    """
    if not isinstance(d, dict):
        raise ConfigError("filter config must be a mapping")
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _KINDS:
        raise ConfigError(f"filter kind must be one of {_KINDS}, got {kind!r}")
    overrides = {k: d.pop(k) for k in list(d) if k in _CONSTANT_KEYS}
    extra = set(d) - _FILTER_KEYS[kind]
    if extra:
        raise ConfigError(f"unknown filter keys for {kind}: {sorted(extra)}")
    if kind == "tikhonov":
        base = tikhonov()
    elif kind == "spectral_cutoff":
        base = spectral_cutoff()
    elif kind == "landweber":
        base = landweber(**d)
    else:
        base = iterated_tikhonov(**d)
    if overrides:
        vals = base.to_dict()
        vals.update(overrides)
        return FilterFamily(kind, D=vals["D"], E=vals["E"], gamma0=vals["gamma0"],
                            qualification=vals["qualification"], gamma_q=vals["gamma_q"],
                            params=base.params)
    return base


# ------------------------------------------------------------------
# evaluation
# ------------------------------------------------------------------

def landweber_iterations(lam: float) -> int:
    """ceil(1/lambda), with reciprocals within 1e-12 of an integer snapped.

    The snap keeps grids like lambda = 0.1 at m = 10 instead of 11 when
    1/lambda lands one ulp above the integer.
    """
    recip = 1.0 / lam
    near = round(recip)
    if near >= 1 and abs(recip - near) <= 1e-12 * near:
        return int(near)
    return int(math.ceil(recip))


def _check_domain(lam: float, t: np.ndarray) -> None:
    if not (isinstance(lam, (int, float, np.floating)) and 0.0 < lam <= 1.0):
        raise DataError(f"lambda must lie in (0, 1], got {lam!r}")
    if t.size and (not np.all(np.isfinite(t)) or np.any(t <= 0.0) or np.any(t > 1.0)):
        raise DataError("t must lie in (0, 1]")


def _eval(filt: FilterFamily, lam: float, t, want: str):
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    lam = float(lam)
    _check_domain(lam, t_arr)

    kind = filt.kind
    if kind == "tikhonov":
        g = 1.0 / (t_arr + lam)
        r = lam / (t_arr + lam)
    elif kind == "spectral_cutoff":
        keep = t_arr >= lam
        g = np.where(keep, 1.0 / t_arr, 0.0)
        r = np.where(keep, 0.0, 1.0)
    elif kind == "landweber":
        step = filt.params["step"]
        m = landweber_iterations(lam)
        # r = (1 - step t)^m, g = (1 - r)/t, both via log1p so m ~ 1e9 is exact
        with np.errstate(divide="ignore"):
            log_base = np.log1p(-step * t_arr)      # -inf only when step*t == 1
        r = np.exp(m * log_base)
        g = -np.expm1(m * log_base) / t_arr
    else:  # iterated_tikhonov
        m = filt.params["m"]
        log_ratio = -np.log1p(t_arr / lam)          # log(lambda/(t+lambda))
        r = np.exp(m * log_ratio)
        g = -np.expm1(m * log_ratio) / t_arr

    out = g if want == "g" else r
    return float(out[0]) if scalar else out


def g_value(filt: FilterFamily, lam: float, t):
    """Evaluate g_lambda(t); t may be a scalar or an array in (0, 1]."""
    return _eval(filt, lam, t, "g")


def r_value(filt: FilterFamily, lam: float, t):
    """Evaluate the residual r_lambda(t) = 1 - t * g_lambda(t)."""
    return _eval(filt, lam, t, "r")


# ------------------------------------------------------------------
# numerical certification
# ------------------------------------------------------------------

_SLACK = 1e-12


@dataclass(frozen=True)
class ConditionWitness:
    condition: str
    declared: float
    measured: float
    worst_lam: float
    worst_t: float
    ok: bool

    def __str__(self):
        flag = "ok" if self.ok else "VIOLATED"
        return (f"{self.condition}: declared {self.declared:g}, measured "
                f"{self.measured:.6g} at (lambda={self.worst_lam:.3g}, "
                f"t={self.worst_t:.3g}) [{flag}]")


@dataclass(frozen=True)
class ConstantsReport:
    holds: bool
    measured: tuple          # (D_hat, E_hat, gamma0_hat)
    worst_points: list       # ConditionWitness per checked condition

    def __str__(self):
        return "\n".join(str(w) for w in self.worst_points)


def _cert_grid(grid_size: int, lam_min: float = 1e-6):
    # log-spaced in both axes; lambda as a column so conditions broadcast
    n = int(grid_size)
    lams = np.geomspace(lam_min, 1.0, n)[:, None]
    ts = np.geomspace(1e-9, 1.0, n)[None, :]
    return lams, ts


def _sup_with_witness(vals, lams, ts):
    idx = np.unravel_index(np.argmax(vals), vals.shape)
    return float(vals[idx]), float(lams[idx[0], 0]), float(ts[0, idx[1]])


def verify_constants(filt: FilterFamily, grid_size: int = 1000) -> ConstantsReport:
    """Measure the filter-condition suprema on a log-spaced grid.

    Checks |t g| <= D, |g| <= E/lambda, |r| <= gamma0 and, at each finite
    probe exponent the family declares a constant for, |r| t^q <= gamma_q(q)
    lambda^q.  holds is true iff every measured supremum is within 1e-12 of
    its declared constant.
    """
    if grid_size < 1000:
        raise ConfigError(f"grid_size must be at least 1000, got {grid_size}")
    lams, ts = _cert_grid(grid_size)
    gs = np.empty((lams.size, ts.size))
    rs = np.empty_like(gs)
    for i, lam in enumerate(lams[:, 0]):
        gs[i] = g_value(filt, float(lam), ts[0])
        rs[i] = r_value(filt, float(lam), ts[0])

    witnesses = []

    def add(name, declared, vals):
        sup, wl, wt = _sup_with_witness(vals, lams, ts)
        witnesses.append(ConditionWitness(name, declared, sup, wl, wt,
                                          ok=sup <= declared + _SLACK))

    add("t_g_bound", filt.D, np.abs(ts * gs))
    add("g_bound", filt.E, np.abs(gs) * lams)
    add("residual_bound", filt.gamma0, np.abs(rs))

    if math.isfinite(filt.qualification):
        probes = [filt.qualification]
    else:
        probes = [1.0, 2.0, 4.0]
    for q in probes:
        gq = filt.gamma_q_for(q)
        if gq is None:
            continue
        add(f"qualification_q={q:g}", gq, np.abs(rs) * (ts / lams) ** q)

    core = witnesses[:3]
    return ConstantsReport(
        holds=all(w.ok for w in witnesses),
        measured=tuple(w.measured for w in core),
        worst_points=witnesses,
    )


@dataclass(frozen=True)
class QualificationEntry:
    q: float
    gamma_q_hat: float
    saturates: bool
    sups: tuple              # supremum per refinement, coarse to fine

    def __str__(self):
        tag = "saturates" if self.saturates else "bounded"
        return f"q={self.q:g}: gamma_q_hat={self.gamma_q_hat:.6g} ({tag})"


def measure_qualification(filt: FilterFamily, q_candidates, grid_size: int = 1000):
    """Estimate sup |r_lambda(t)| t^q / lambda^q per candidate exponent.

    Three refinements push the lambda floor down a decade each (1e-2 to
    1e-4) while doubling the grid.  saturates means the supremum kept
    growing by at least a factor 2 per refinement: the quantity blows up as
    lambda -> 0 and the family has no constant at that q.
    """
    entries = []
    for q in q_candidates:
        if not q > 0.0:
            raise ConfigError(f"qualification candidates must be positive, got {q}")
        sups = []
        for level in range(3):
            lams, ts = _cert_grid(grid_size * (2 ** level), lam_min=10.0 ** (-2 - level))
            sup = 0.0
            for lam in lams[:, 0]:
                r = np.abs(r_value(filt, float(lam), ts[0]))
                sup = max(sup, float(np.max(r * (ts[0] / lam) ** q)))
            sups.append(sup)
        saturates = all(sups[i + 1] >= 2.0 * sups[i] for i in range(2))
        entries.append(QualificationEntry(q=float(q), gamma_q_hat=sups[-1],
                                          saturates=saturates, sups=tuple(sups)))
    return entries
