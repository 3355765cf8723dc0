"""Eigenvalue profiles and their counting functionals.

A profile is a finite, strictly positive, nonincreasing sequence mu_1 >= ... >= mu_p
together with declared dyadic decay exponents: for j0 <= j and 2j <= p the ratio
mu_2j / mu_j is asserted to lie in [2^-nu_lower, 2^-nu_upper]. The upper half is the
regular-decay condition used by the rate calculus; the lower half is the
non-collapse condition used by the minimax lower bound.

Functionals on a profile (r > 0 a smoothness index):

    F(t)   = #{j <= p : mu_j >= t}           counting function, left continuous
    G(t)   = t^(2r+1) / F(t)                 (+inf where F(t) = 0)
    G^-1(u) = max{t > 0 : G(t) <= u}         exact piecewise-monomial inversion
    N(lam) = sum_j mu_j / (mu_j + lam)       effective dimension

All comparisons against declared decay bounds carry a 1e-12 relative slack for
float rounding (the dyadic ratios of a polynomial profile are only correctly
rounded, not exact).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

# Relative slack for comparisons that are exact in real arithmetic.
RATIO_SLACK = 1e-12


# ============================================================
# profile type
# ============================================================

@dataclass(frozen=True)
class SpectrumProfile:
    """A truncated eigenvalue sequence with declared dyadic decay bounds.

    Construct through the factory functions (`polynomial`, `polylog`, `plateau`,
    `regime_switch`, `explicit`); they materialize the sequence, infer decay
    exponents when not supplied, and (by default) fail construction if the
    declared dyadic band does not hold on j in [j0, p/2].
    """

    kind: str
    eigenvalues: np.ndarray
    j0: int
    nu_upper: float
    nu_lower: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        mu = np.asarray(self.eigenvalues, dtype=float)
        if mu.ndim != 1 or mu.size == 0:
            raise ConfigError("eigenvalue sequence must be a nonempty vector")
        if not np.all(np.isfinite(mu)) or mu[-1] <= 0.0:
            raise ConfigError("eigenvalues must be finite and strictly positive")
        if np.any(np.diff(mu) > 0.0):
            raise ConfigError("eigenvalues must be nonincreasing")
        if not (1 <= self.j0 <= mu.size):
            raise ConfigError(f"j0 must lie in [1, p], got {self.j0}")
        if not (self.nu_upper >= 1.0):
            raise ConfigError(f"nu_upper must be >= 1, got {self.nu_upper}")
        if self.nu_lower < self.nu_upper:
            raise ConfigError("nu_lower must be >= nu_upper")
        mu.flags.writeable = False
        object.__setattr__(self, "eigenvalues", mu)

    @property
    def p(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def mu_max(self) -> float:
        """Largest eigenvalue; the kappa^2 proxy used by the functional calculus."""
        return float(self.eigenvalues[0])

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "j0": self.j0,
             "nu_upper": self.nu_upper, "nu_lower": self.nu_lower}
        d.update(self.params)
        return d


def _dyadic_ratios(mu: np.ndarray, j0: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices j in [j0, p/2] and the ratios mu_2j/mu_j (1-based j)."""
    p = mu.size
    hi = p // 2
    if hi < j0:
        return np.empty(0, dtype=int), np.empty(0)
    j = np.arange(j0, hi + 1)
    return j, mu[2 * j - 1] / mu[j - 1]


def _finalize(kind: str, mu: np.ndarray, j0: int,
              nu_upper: float | None, nu_lower: float | None,
              params: dict, strict: bool) -> SpectrumProfile:
    mu = np.asarray(mu, dtype=float)
    # sequence validity first: exponent inference divides and takes logs
    if mu.ndim != 1 or mu.size == 0:
        raise ConfigError("eigenvalue sequence must be a nonempty vector")
    if not np.all(np.isfinite(mu)) or np.any(mu <= 0.0):
        raise ConfigError("eigenvalues must be finite and strictly positive")
    if np.any(np.diff(mu) > 0.0):
        raise ConfigError("eigenvalues must be nonincreasing")
    if not (1 <= int(j0) <= mu.size):
        raise ConfigError(f"j0 must lie in [1, p], got {j0}")
    _, ratios = _dyadic_ratios(mu, j0)
    if nu_upper is None:
        # Tightest valid declaration for the data, floored at the type's minimum.
        nu_upper = 1.0 if ratios.size == 0 else max(1.0, -math.log2(float(ratios.max())))
    if nu_lower is None:
        nu_lower = nu_upper if ratios.size == 0 else max(nu_upper, -math.log2(float(ratios.min())))
    prof = SpectrumProfile(kind=kind, eigenvalues=mu, j0=j0,
                           nu_upper=float(nu_upper), nu_lower=float(nu_lower),
                           params=params)
    if strict:
        rep = verify_decay(prof)
        if not (rep.eigup_ok and rep.eiglow_ok):
            raise ConfigError(
                f"{kind} profile violates the declared dyadic decay band "
                f"[2^-{prof.nu_lower:g}, 2^-{prof.nu_upper:g}] at j="
                f"{list(rep.worst_ratio_indices)[:8]} (pass strict=False to "
                f"construct anyway and inspect with verify_decay)")
    return prof


# ============================================================
# factories
# ============================================================

def polynomial(b: float, p: int, *, j0: int = 1,
               nu_upper: float | None = None, nu_lower: float | None = None,
               strict: bool = True) -> SpectrumProfile:
    """mu_j = j^-b. Natural declaration nu_upper = nu_lower = b (exact ratio 2^-b)."""
    if b <= 0:
        raise ConfigError("polynomial exponent b must be positive")
    j = np.arange(1, p + 1, dtype=float)
    mu = j ** (-b)
    if nu_upper is None and nu_lower is None:
        nu_upper = nu_lower = float(b)
    return _finalize("polynomial", mu, j0, nu_upper, nu_lower,
                     {"b": float(b), "p": int(p)}, strict)


def polylog(b: float, c: float, d: float, p: int, *, j0: int,
            nu_upper: float | None = None, nu_lower: float | None = None,
            strict: bool = True) -> SpectrumProfile:
    """mu_j = j^-b (ln j)^c (ln ln j)^d, with a regularized head.

    The raw map is evaluated from the first index where every factor is
    positive (j = 3 when d != 0, j = 2 when c != 0, else j = 1). A running max
    from the tail enforces monotonicity through the raw map's initial hump, and
    indices below the start are padded with the first defined value. On the
    decreasing branch (all tested indices in practice) the values equal the raw
    map exactly.
    """
    if b <= 0:
        raise ConfigError("polylog leading exponent b must be positive")
    start = 3 if d != 0 else (2 if c != 0 else 1)
    if p < start:
        raise ConfigError(f"polylog with these exponents needs p >= {start}")
    j = np.arange(start, p + 1, dtype=float)
    raw = j ** (-b) * np.log(j) ** c
    if d != 0:
        raw = raw * np.log(np.log(j)) ** d
    mu = np.maximum.accumulate(raw[::-1])[::-1]
    mu = np.concatenate([np.full(start - 1, mu[0]), mu])
    return _finalize("polylog", mu, j0, nu_upper, nu_lower,
                     {"b": float(b), "c": float(c), "d": float(d), "p": int(p)},
                     strict)


def plateau(levels, *, j0: int = 1,
            nu_upper: float | None = None, nu_lower: float | None = None,
            strict: bool = True) -> SpectrumProfile:
    """Piecewise-constant profile from (value, run_length) pairs, concatenated."""
    vals, runs = [], []
    for v, run in levels:
        v, run = float(v), int(run)
        if v <= 0 or run <= 0:
            raise ConfigError("plateau levels need positive values and run lengths")
        vals.append(v)
        runs.append(run)
    mu = np.repeat(vals, runs)
    return _finalize("plateau", mu, j0, nu_upper, nu_lower,
                     {"levels": [[v, r] for v, r in zip(vals, runs)]}, strict)


def regime_switch(segments, p: int, *, j0: int = 1,
                  nu_upper: float | None = None, nu_lower: float | None = None,
                  strict: bool = True) -> SpectrumProfile:
    """Piecewise polynomial decay, continuous at the switch points.

    `segments` is a list of (start_index, exponent) pairs, start indices
    ascending and the first equal to 1; segment i uses mu_j = C_i j^-b_i with
    C_i chosen so consecutive segments agree at each switch index.
    """
    segs = [(int(k), float(b)) for k, b in segments]
    if not segs or segs[0][0] != 1:
        raise ConfigError("regime_switch needs segments starting at index 1")
    starts = [k for k, _ in segs]
    if starts != sorted(starts) or len(set(starts)) != len(starts):
        raise ConfigError("regime_switch start indices must be strictly increasing")
    if any(b <= 0 for _, b in segs):
        raise ConfigError("regime_switch exponents must be positive")
    if segs[-1][0] > p:
        raise ConfigError("regime_switch start index beyond p")
    j = np.arange(1, p + 1, dtype=float)
    mu = np.empty(p)
    scale = 1.0
    bounds = starts[1:] + [p + 1]
    for (k, b), nxt in zip(segs, bounds):
        if k > 1:
            scale = prev_scale * float(k) ** (b - prev_b)
        sl = slice(k - 1, nxt - 1)
        mu[sl] = scale * j[sl] ** (-b)
        prev_scale, prev_b = scale, b
    return _finalize("regime_switch", mu, j0, nu_upper, nu_lower,
                     {"segments": [[k, b] for k, b in segs], "p": int(p)}, strict)


def explicit(values, *, j0: int = 1,
             nu_upper: float | None = None, nu_lower: float | None = None,
             strict: bool = True) -> SpectrumProfile:
    """Profile from an explicit list of eigenvalues."""
    mu = np.asarray(list(values), dtype=float)
    return _finalize("explicit", mu, j0, nu_upper, nu_lower,
                     {"values": [float(v) for v in mu]}, strict)


_FACTORY_KEYS = {
    "polynomial": ("b", "p"),
    "polylog": ("b", "c", "d", "p"),
    "plateau": ("levels",),
    "regime_switch": ("segments", "p"),
    "explicit": ("values",),
}


def from_dict(d: dict, *, strict: bool = True) -> SpectrumProfile:
    """Rebuild a profile from its `to_dict` form (used by config parsing)."""
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _FACTORY_KEYS:
        raise ConfigError(f"unknown spectrum kind {kind!r}; "
                          f"expected one of {sorted(_FACTORY_KEYS)}")
    common = {k: d.pop(k) for k in ("j0", "nu_upper", "nu_lower") if k in d}
    required = _FACTORY_KEYS[kind]
    missing = [k for k in required if k not in d]
    if missing:
        raise ConfigError(f"spectrum kind {kind!r} missing keys {missing}")
    extra = [k for k in d if k not in required]
    if extra:
        raise ConfigError(f"spectrum kind {kind!r} got unknown keys {extra}")
    factory = {"polynomial": polynomial, "polylog": polylog, "plateau": plateau,
               "regime_switch": regime_switch, "explicit": explicit}[kind]
    args = [d[k] for k in required]
    return factory(*args, strict=strict, **common)


# ============================================================
# counting functionals
# ============================================================

def count_F(profile: SpectrumProfile, t: float) -> int:
    """F(t) = #{j : mu_j >= t}; left continuous, zero above mu_1."""
    if not t > 0:
        raise ConfigError(f"count_F needs t > 0, got {t}")
    return int(np.count_nonzero(profile.eigenvalues >= t))


def count_above(profile: SpectrumProfile, t: float) -> int:
    """The right-limit variant F(t+) = #{j : mu_j > t}."""
    if not t > 0:
        raise ConfigError(f"count_above needs t > 0, got {t}")
    return int(np.count_nonzero(profile.eigenvalues > t))


def gee(profile: SpectrumProfile, t: float, r: float) -> float:
    """G(t) = t^(2r+1)/F(t), with +inf as the F(t)=0 sentinel.

    The sentinel only ever feeds comparisons, never arithmetic.
    """
    if not t > 0:
        raise ConfigError(f"gee needs t > 0, got {t}")
    if not r > 0:
        raise ConfigError(f"gee needs r > 0, got {r}")
    F = count_F(profile, t)
    if F == 0:
        return math.inf
    return t ** (2.0 * r + 1.0) / F


def gee_inverse(profile: SpectrumProfile, u: float, r: float) -> float:
    """G^-1(u) = max{t : G(t) <= u}, exact on the piecewise-monomial structure.

    On each interval (mu_{k+1}, mu_k] (mu_{p+1} := 0) G is the increasing
    monomial t^(2r+1)/k, so the interval's best candidate is
    t_k = min(mu_k, (u k)^(1/(2r+1))), admissible when it exceeds mu_{k+1}.
    The result is the largest admissible candidate, capped at mu_1 (the
    profile-level kappa^2 proxy), then nudged down by ulps until the
    re-evaluated G(result) <= u holds exactly.
    """
    if not u > 0:
        raise ConfigError(f"gee_inverse needs u > 0, got {u}")
    if not r > 0:
        raise ConfigError(f"gee_inverse needs r > 0, got {r}")
    mu = profile.eigenvalues
    k = np.arange(1, mu.size + 1, dtype=float)
    cand = np.minimum(mu, (u * k) ** (1.0 / (2.0 * r + 1.0)))
    mu_next = np.append(mu[1:], 0.0)
    admissible = cand > mu_next
    t = float(cand[admissible].max())
    while gee(profile, t, r) > u:
        t = math.nextafter(t, 0.0)
    return t


def effective_dimension(profile: SpectrumProfile, lam: float) -> float:
    """N(lam) = sum_j mu_j/(mu_j + lam)."""
    if not lam > 0:
        raise ConfigError(f"effective_dimension needs lam > 0, got {lam}")
    mu = profile.eigenvalues
    return float(np.sum(mu / (mu + lam)))


def effdim_bound_factor(nu: float) -> float:
    """The factor 1 + 2/(1 - 2^(1-nu)) bounding N(lam)/F(lam); +inf when nu <= 1."""
    if nu <= 1.0:
        return math.inf
    return 1.0 + 2.0 / (1.0 - 2.0 ** (1.0 - nu))


# ============================================================
# vectorized variants (hot paths: property sweeps, CSV emission)
# ============================================================

def count_F_vec(profile: SpectrumProfile, ts: np.ndarray) -> np.ndarray:
    """Vectorized F over an array of thresholds."""
    ts = np.asarray(ts, dtype=float)
    if np.any(ts <= 0):
        raise ConfigError("count_F_vec needs all t > 0")
    asc = profile.eigenvalues[::-1]
    return profile.p - np.searchsorted(asc, ts, side="left")


def gee_vec(profile: SpectrumProfile, ts: np.ndarray, r: float) -> np.ndarray:
    """Vectorized G; +inf sentinel where F = 0."""
    ts = np.asarray(ts, dtype=float)
    F = count_F_vec(profile, ts)
    out = np.full(ts.shape, math.inf)
    pos = F > 0
    out[pos] = ts[pos] ** (2.0 * r + 1.0) / F[pos]
    return out


# ============================================================
# decay verification
# ============================================================

@dataclass(frozen=True)
class DecayReport:
    """Exhaustive dyadic-ratio check over j in [j0, p/2]."""

    eigup_ok: bool
    eiglow_ok: bool
    worst_ratio_indices: tuple[int, ...]
    eigup_violations: tuple[int, ...]
    eiglow_violations: tuple[int, ...]
    max_ratio: float
    min_ratio: float
    checked: int

    def __str__(self) -> str:
        up = "ok" if self.eigup_ok else f"FAILED at j={list(self.eigup_violations)[:6]}"
        low = "ok" if self.eiglow_ok else f"FAILED at j={list(self.eiglow_violations)[:6]}"
        return (f"decay check over {self.checked} dyadic pairs: "
                f"upper {up}; lower {low}; "
                f"ratio range [{self.min_ratio:.6g}, {self.max_ratio:.6g}]")


def verify_decay(profile: SpectrumProfile) -> DecayReport:
    """Check mu_2j/mu_j in [2^-nu_lower, 2^-nu_upper] for every j in [j0, p/2].

    Never raises: the report carries the violations.
    """
    j, ratios = _dyadic_ratios(profile.eigenvalues, profile.j0)
    if j.size == 0:
        return DecayReport(True, True, (), (), (), math.nan, math.nan, 0)
    up_bound = 2.0 ** (-profile.nu_upper)
    low_bound = 2.0 ** (-profile.nu_lower)
    up_bad = ratios > up_bound * (1.0 + RATIO_SLACK)
    low_bad = ratios < low_bound * (1.0 - RATIO_SLACK)
    up_viol = tuple(int(x) for x in j[up_bad])
    low_viol = tuple(int(x) for x in j[low_bad])
    return DecayReport(
        eigup_ok=not up_viol,
        eiglow_ok=not low_viol,
        worst_ratio_indices=tuple(sorted(set(up_viol) | set(low_viol))),
        eigup_violations=up_viol,
        eiglow_violations=low_viol,
        max_ratio=float(ratios.max()),
        min_ratio=float(ratios.min()),
        checked=int(j.size),
    )


# ============================================================
# functional-inequality sweeps
# ============================================================
# Three properties of (F, G, G^-1) drive the rate calculus; each checker sweeps
# one of them over a deterministic grid and reports the worst margin (a margin
# <= 1 means the inequality holds at every tested point, up to RATIO_SLACK).
#
#   scaling    G(ct) <= c G(t)                             all t, c in (0, 1]
#   doubling   F(t) <= 4 C^(1/nu) F(Ct)  and
#              G(Ct) <= 4 C^(2r+1+1/nu) G(t)               t <= mu_j0 / C
#   sandwich   G(G^-1(u)) <= u           and
#              G(G^-1(u)) >= u/4 when G^-1(u) < min(mu_2j0, mu_1)
#
# The doubling and sandwich lower half assume the profile's upper decay bound
# (nu = nu_upper); their t/u ranges are exactly the ranges on which the
# inequalities are provable from it.


@dataclass(frozen=True)
class SweepResult:
    name: str
    ok: bool
    checked: int
    worst_margin: float

    def __str__(self) -> str:
        tag = "ok" if self.ok else "FAILED"
        return (f"{self.name}: {tag} over {self.checked} points "
                f"(worst margin {self.worst_margin:.6g})")


def _breakpoint_grid(profile: SpectrumProfile) -> np.ndarray:
    """Eigenvalue breakpoints, their geometric midpoints, and a point above mu_1."""
    mu = np.unique(profile.eigenvalues)  # ascending
    mids = np.sqrt(mu[:-1] * mu[1:])
    return np.unique(np.concatenate([mu, mids, [1.5 * mu[-1]]]))


def _finite_margin(lhs: np.ndarray, rhs: np.ndarray) -> tuple[bool, float]:
    """max lhs/rhs treating rhs = +inf as a free pass; empty -> vacuous ok."""
    take = np.isfinite(rhs)
    lhs, rhs = lhs[take], rhs[take]
    if lhs.size == 0:
        return True, 0.0
    margin = float(np.max(lhs / rhs))
    return margin <= 1.0 + RATIO_SLACK, margin


def check_scaling(profile: SpectrumProfile, r: float,
                  c_values=(0.1, 0.5, 1.0)) -> SweepResult:
    """G(ct) <= c G(t) for every breakpoint-grid t and each c in (0, 1]."""
    ts = _breakpoint_grid(profile)
    worst, ok_all, n = 0.0, True, 0
    for c in c_values:
        if not 0.0 < c <= 1.0:
            raise ConfigError(f"scaling check needs c in (0,1], got {c}")
        g_ct = gee_vec(profile, c * ts, r)
        g_t = gee_vec(profile, ts, r)
        ok, margin = _finite_margin(g_ct, c * g_t)
        ok_all &= ok
        worst = max(worst, margin)
        n += ts.size
    return SweepResult("scaling", ok_all, n, worst)


def check_doubling(profile: SpectrumProfile, r: float,
                   C_values=(1.0, 2.0, 10.0)) -> SweepResult:
    """The two doubling bounds with exact constants 4 C^(1/nu), 4 C^(2r+1+1/nu)."""
    nu = profile.nu_upper
    t0 = float(profile.eigenvalues[profile.j0 - 1])
    grid = _breakpoint_grid(profile)
    worst, ok_all, n = 0.0, True, 0
    for C in C_values:
        if C < 1.0:
            raise ConfigError(f"doubling check needs C >= 1, got {C}")
        ts = grid[grid <= t0 / C]
        if ts.size == 0:
            continue
        F_t = count_F_vec(profile, ts).astype(float)
        F_Ct = count_F_vec(profile, C * ts).astype(float)
        ok1, m1 = _finite_margin(F_t, 4.0 * C ** (1.0 / nu) * F_Ct)
        g_t = gee_vec(profile, ts, r)
        g_Ct = gee_vec(profile, C * ts, r)
        ok2, m2 = _finite_margin(g_Ct, 4.0 * C ** (2.0 * r + 1.0 + 1.0 / nu) * g_t)
        ok_all &= ok1 and ok2
        worst = max(worst, m1, m2)
        n += 2 * ts.size
    return SweepResult("doubling", ok_all, n, worst)


def check_sandwich(profile: SpectrumProfile, r: float,
                   n_u: int = 200) -> SweepResult:
    """G(G^-1(u)) <= u everywhere; >= u/4 below the small-u threshold.

    The lower half is certified through the right-limit count F(t+): at the
    returned breakpoint t the proof compares F(t) with 2 F(t+), which is what
    the factor 4 absorbs.
    """
    mu = profile.eigenvalues
    u_lo = 0.1 * mu[-1] ** (2.0 * r + 1.0) / profile.p
    u_hi = 2.0 * mu[0] ** (2.0 * r + 1.0)
    us = np.geomspace(u_lo, u_hi, n_u)
    t_small = mu[2 * profile.j0 - 1] if 2 * profile.j0 <= profile.p else None
    worst, ok_all, n = 0.0, True, 0
    for u in us:
        t = gee_inverse(profile, float(u), r)
        g = gee(profile, t, r)
        ok_all &= g <= u * (1.0 + RATIO_SLACK)
        worst = max(worst, g / u)
        n += 1
        if t_small is not None and t < min(t_small, mu[0]):
            ok_all &= 4.0 * g >= u * (1.0 - RATIO_SLACK)
            worst = max(worst, u / (4.0 * g))
            n += 1
    return SweepResult("sandwich", ok_all, n, worst)


def check_effdim_bound(profile: SpectrumProfile, n_lambdas: int = 50) -> SweepResult:
    """N(lam) <= F(lam) * (1 + 2/(1 - 2^(1-nu_lower))) on lam with F(lam) >= j0.

    The factor is +inf when nu_lower <= 1 (the check is then vacuous).
    """
    factor = effdim_bound_factor(profile.nu_lower)
    mu = profile.eigenvalues
    lo, hi = float(mu[-1]), float(mu[profile.j0 - 1])
    lams = np.geomspace(lo, hi, n_lambdas)
    worst, ok_all, n = 0.0, True, 0
    for lam in lams:
        F = count_F(profile, float(lam))
        if F < profile.j0:
            continue
        if math.isinf(factor):
            n += 1
            continue
        N = effective_dimension(profile, float(lam))
        bound = F * factor
        ok_all &= N <= bound * (1.0 + RATIO_SLACK)
        worst = max(worst, N / bound)
        n += 1
    return SweepResult("effdim_bound", ok_all, n, worst)
