"""Fano lower-bound instance: sign packing, alternatives, KL certificates.

The reduction needs exactly two facts about a code family in {-1, +1}^m:
pairwise Hamming distance at least m/4 and capacity ln(N-1) >= m/36.  Both
are certified at runtime on explicit codes (never assumed), the alternative
targets built on eigenbasis block [m+1, 2m] are checked for source membership
and pairwise separation by direct computation, and the pairwise Kullback
divergences of the induced Gaussian sample laws are compared against their
predicted bound.  Everything downstream consumes the certificates only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ConstructionError, DataError
from .rates import ModelParams, theoretical_rate
from .spectrum import count_F

__all__ = [
    "PackingCertificate",
    "PackingCheck",
    "AlternativeFamily",
    "FanoReport",
    "generate_packing",
    "verify_packing",
    "choose_m",
    "build_alternatives",
    "kl_divergence",
    "kl_bounds",
    "fano_report",
    "fano_from_family",
]

# construction budget: the greedy packing materializes every code, so the
# capacity target ceil(e^(m/36)) + 1 must stay enumerable
_MAX_CODES = 5000
_MIN_M = 28


@dataclass(frozen=True, eq=False)
class PackingCertificate:
    """Explicit sign codes; a plain container, validated by verify_packing."""

    m: int
    codes: np.ndarray          # N x m entries in {-1, +1}
    min_hamming: int
    log_capacity: float        # ln(N - 1)

    @property
    def n_codes(self) -> int:
        return len(self.codes)


@dataclass(frozen=True)
class PackingCheck:
    ok: bool
    reasons: tuple

    def __str__(self):
        return "packing ok" if self.ok else "; ".join(self.reasons)


def _pairwise_hamming_min(codes: np.ndarray) -> int:
    # h_ij = (m - <c_i, c_j>)/2 via one Gram product
    G = codes.astype(np.float64) @ codes.T.astype(np.float64)
    m = codes.shape[1]
    H = (m - G) / 2.0
    np.fill_diagonal(H, np.inf)
    return int(round(float(H.min())))


def verify_packing(cert: PackingCertificate) -> PackingCheck:
    """Re-check every certificate invariant on the explicit codes."""
    reasons = []
    codes = np.asarray(cert.codes)
    if codes.ndim != 2 or codes.shape[1] != cert.m:
        reasons.append(f"codes must be N x m={cert.m}, got shape {codes.shape}")
        return PackingCheck(False, tuple(reasons))
    if cert.m < _MIN_M:
        reasons.append(f"m must be at least {_MIN_M}, got {cert.m}")
    if not np.all(np.abs(codes) == 1):
        reasons.append("codes must have entries in {-1, +1}")
    n = len(codes)
    if n < 2:
        reasons.append(f"need at least 2 codes, got {n}")
        return PackingCheck(False, tuple(reasons))
    h_min = _pairwise_hamming_min(codes)
    if 4 * h_min < cert.m:
        reasons.append(f"pairwise Hamming {h_min} below m/4 = {cert.m / 4:g}")
    if h_min != cert.min_hamming:
        reasons.append(f"recorded min_hamming {cert.min_hamming} != actual {h_min}")
    cap = math.log(n - 1)
    if cap < cert.m / 36.0 - 1e-12:
        reasons.append(f"capacity ln(N-1) = {cap:.6g} below m/36 = {cert.m / 36.0:.6g}")
    if abs(cap - cert.log_capacity) > 1e-12:
        reasons.append(f"recorded log_capacity {cert.log_capacity:.6g} != ln(N-1) = {cap:.6g}")
    return PackingCheck(len(reasons) == 0, tuple(reasons))


def generate_packing(m: int, seed: int, *, max_codes: int = _MAX_CODES) -> PackingCertificate:
    """Greedy random packing reaching capacity ceil(e^(m/36)) + 1.

    Candidates are kept only at Hamming distance strictly above m/4 from all
    kept codes (strictness keeps the downstream separation strict).  Raises
    an explicit construction error when the capacity target exceeds the
    enumeration budget or the retry budget runs out; never returns a weaker
    certificate.
    """
    if not (isinstance(m, (int, np.integer)) and m >= _MIN_M):
        raise ConfigError(f"packing dimension m must be an integer >= {_MIN_M}, got {m!r}")
    m = int(m)
    if m / 36.0 > math.log(max_codes):
        raise ConstructionError(
            f"capacity target exp({m}/36) + 1 exceeds the construction budget "
            f"of {max_codes} codes; the packing cannot be materialized")
    n_target = math.ceil(math.exp(m / 36.0)) + 1
    if n_target > max_codes:
        raise ConstructionError(
            f"capacity target {n_target} exceeds the construction budget of {max_codes} codes")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=int(seed))))
    kept = np.empty((n_target, m), dtype=np.int8)
    n_kept = 0
    attempts = 0
    budget = 1000 + 200 * n_target
    while n_kept < n_target:
        if attempts >= budget:
            raise ConstructionError(
                f"packing retry budget exhausted after {attempts} candidates "
                f"(kept {n_kept} of {n_target} at m={m})")
        batch = min(256, budget - attempts)
        cands = rng.integers(0, 2, size=(batch, m)).astype(np.int8) * 2 - 1
        attempts += batch
        for cand in cands:
            if n_kept:
                h = (m - kept[:n_kept].astype(np.int32) @ cand.astype(np.int32)) // 2
                if 4 * int(h.min()) <= m:
                    continue
            kept[n_kept] = cand
            n_kept += 1
            if n_kept == n_target:
                break
    codes = kept.copy()
    cert = PackingCertificate(m=m, codes=codes,
                              min_hamming=_pairwise_hamming_min(codes),
                              log_capacity=math.log(n_target - 1))
    check = verify_packing(cert)
    if not check.ok:
        raise ConstructionError(f"generated packing failed its own certificate: {check}")
    return cert


# ------------------------------------------------------------------
# alternative family
# ------------------------------------------------------------------

def choose_m(epsilon: float, params: ModelParams, s: float) -> int:
    """Block size m = F(2^nu (eps/R)^(1/(r+s))) for the alternative family.

    Requires eps < 2^(-nu (r+s)) R mu_max(28, j0); m >= 28 is additionally
    enforced on the computed count (the smallness condition alone does not
    imply it when r + s > 1).
    """
    prof = params.profile
    if not (0.0 <= s <= 0.5):
        raise ConfigError(f"norm exponent s must lie in [0, 1/2], got {s}")
    if not epsilon > 0.0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    nu = prof.nu_lower
    rs = params.r + s
    idx = max(_MIN_M, prof.j0)
    if idx > prof.p:
        raise ConfigError(f"profile needs at least max(28, j0) = {idx} eigenvalues, got p={prof.p}")
    threshold = 2.0 ** (-nu * rs) * params.R * float(prof.eigenvalues[idx - 1])
    if not epsilon < threshold:
        raise ConfigError(
            f"epsilon {epsilon:.6g} must be strictly below the smallness threshold "
            f"2^(-nu(r+s)) R mu_{idx} = {threshold:.6g}")
    m = count_F(prof, 2.0 ** nu * (epsilon / params.R) ** (1.0 / rs))
    if m < _MIN_M:
        raise ConfigError(
            f"computed block size m = {m} is below the required {_MIN_M} "
            f"(the counting guarantee needs r + s <= 1)")
    return m


@dataclass(frozen=True, eq=False)
class AlternativeFamily:
    epsilon: float
    m: int
    fs: np.ndarray             # N x p H-ONB coefficient vectors of the f_i
    params: ModelParams
    s: float
    packing: PackingCertificate


def build_alternatives(epsilon: float, params: ModelParams, s: float,
                       packing: PackingCertificate) -> AlternativeFamily:
    """Targets f_i with coefficients (eps/sqrt(m)) rho_i mu_l^(-s) on the
    block l in [m+1, 2m]; both family invariants certified directly."""
    prof = params.profile
    m = packing.m
    if m != choose_m(epsilon, params, s):
        raise ConfigError(
            f"packing dimension {m} does not match choose_m = {choose_m(epsilon, params, s)}")
    if prof.p < 2 * m:
        raise ConfigError(f"profile needs p >= 2m = {2 * m} eigenvalues, got p={prof.p}")
    mu_block = prof.eigenvalues[m:2 * m]
    codes = packing.codes.astype(np.float64)
    block = (epsilon / math.sqrt(m)) * codes * mu_block ** (-s)
    fs = np.zeros((len(codes), prof.p))
    fs[:, m:2 * m] = block

    # source membership: ||g_i||^2 = (eps^2/m) sum mu^(-2(r+s)) <= R^2
    g_norm_sq = epsilon ** 2 / m * float(np.sum(mu_block ** (-2.0 * (params.r + s))))
    if g_norm_sq > params.R ** 2 * (1.0 + 1e-12):
        raise ConstructionError(
            f"source membership violated: ||g_i||^2 = {g_norm_sq:.6g} > R^2 = {params.R ** 2:.6g}")

    # pairwise separation ||B^s (f_i - f_j)||^2 > eps^2, via one Gram product
    W = block * mu_block ** s           # = (eps/sqrt(m)) * codes
    sq = np.sum(W * W, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * (W @ W.T)
    np.fill_diagonal(D, np.inf)
    worst = np.unravel_index(np.argmin(D), D.shape)
    if not D[worst] > epsilon ** 2:
        raise ConstructionError(
            f"separation violated by pair {worst}: "
            f"||B^s(f_i - f_j)||^2 = {D[worst]:.6g} <= eps^2 = {epsilon ** 2:.6g}")
    return AlternativeFamily(epsilon=float(epsilon), m=m, fs=fs, params=params,
                             s=float(s), packing=packing)


def kl_divergence(family: AlternativeFamily, i: int, j: int, n: int) -> float:
    """n-sample Gaussian KL: n (2 sigma^2)^-1 sum_l mu_l (f_i,l - f_j,l)^2."""
    N = len(family.fs)
    if not (0 <= i < N and 0 <= j < N):
        raise DataError(f"indices must lie in [0, {N - 1}], got ({i}, {j})")
    if i == j:
        return 0.0
    sigma = family.params.sigma
    if sigma <= 0.0:
        raise ConfigError("KL divergence needs a positive noise level")
    diff = family.fs[i] - family.fs[j]
    quad = float(np.sum(family.params.profile.eigenvalues * diff * diff))
    return n * quad / (2.0 * sigma ** 2)


def kl_bounds(family: AlternativeFamily, n: int) -> tuple:
    """(proof-display bound, corrected bound) on every pairwise KL.

    The display constant n 2^(nu(1-2s)) (2 sigma^2)^-1 R^2 (eps/R)^((2r+1)/(r+s))
    omits the pairwise factor 4h/m <= 4; the corrected bound multiplies by 4.
    Both are reported; certificates check the corrected one.
    """
    p = family.params
    display = (n * 2.0 ** (p.profile.nu_lower * (1.0 - 2.0 * family.s))
               / (2.0 * p.sigma ** 2) * p.R ** 2
               * (family.epsilon / p.R) ** ((2.0 * p.r + 1.0) / (p.r + family.s)))
    return display, 4.0 * display


# ------------------------------------------------------------------
# Fano report
# ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FanoReport:
    epsilon: float
    m: int | None
    n_codes: int | None
    omega: float | None
    lower_bound_prob: float | None
    valid: bool
    reason: str | None
    kl_mean: float | None
    kl_max: float | None
    bound_display: float | None
    bound_corrected: float | None
    kl_pairs: tuple            # (i, j, kl) upper-triangle pairs, () on failure
    family: AlternativeFamily | None

    def __str__(self):
        if not self.valid:
            return f"fano: INVALID ({self.reason})"
        return (f"fano: eps={self.epsilon:.6g} m={self.m} N={self.n_codes} "
                f"omega={self.omega:.3g} prob={self.lower_bound_prob:.4f}")


def fano_from_family(family: AlternativeFamily, n: int):
    """(omega, lower_bound_prob, valid, reason) for an explicit family.

    The family's last element plays the reference measure; omega is the mean
    KL from the others to it over ln(N-1).
    """
    N = len(family.fs)
    if N < 3:
        return None, None, False, f"need at least 2 alternatives beyond the reference, got N={N}"
    ref = N - 1
    cap = math.log(N - 1)
    mean_kl = float(np.mean([kl_divergence(family, j, ref, n) for j in range(N - 1)]))
    omega = mean_kl / cap
    root = math.sqrt(N - 1)
    prob = root / (1.0 + root) * (1.0 - 2.0 * omega - math.sqrt(2.0 * omega / cap))
    if omega >= 0.125:
        return omega, prob, False, f"omega = {omega:.6g} is not below 1/8"
    if not prob > 0.0:
        return omega, prob, False, f"lower bound probability {prob:.6g} is not positive"
    return omega, prob, True, None


def fano_report(params: ModelParams, s: float, n: int, seed: int = 0) -> FanoReport:
    """End-to-end certified lower-bound instance at sample size n.

    eps = 2^(-nu) (R/288) G^-1(sigma^2/(R^2 n))^(r+s); construction failures
    (smallness condition, packing budget) are reported as valid=false with
    the reason, not raised.
    """
    if params.sigma <= 0.0:
        raise ConfigError("the lower bound needs a positive noise level")
    epsilon = (2.0 ** (-params.profile.nu_lower) / 288.0
               * theoretical_rate(params, n, s))
    failed = dict(m=None, n_codes=None, omega=None, lower_bound_prob=None,
                  kl_mean=None, kl_max=None, bound_display=None,
                  bound_corrected=None, kl_pairs=(), family=None)
    try:
        m = choose_m(epsilon, params, s)
        packing = generate_packing(m, seed)
        family = build_alternatives(epsilon, params, s, packing)
    except (ConfigError, ConstructionError) as exc:
        return FanoReport(epsilon=epsilon, valid=False, reason=str(exc), **failed)

    N = len(family.fs)
    pairs = [(i, j, kl_divergence(family, i, j, n))
             for i in range(N) for j in range(i + 1, N)]
    kls = np.array([kl for _, _, kl in pairs])
    omega, prob, valid, reason = fano_from_family(family, n)
    display, corrected = kl_bounds(family, n)
    return FanoReport(
        epsilon=epsilon, m=family.m, n_codes=N, omega=omega,
        lower_bound_prob=prob, valid=valid, reason=reason,
        kl_mean=float(kls.mean()), kl_max=float(kls.max()),
        bound_display=display, bound_corrected=corrected,
        kl_pairs=tuple(pairs), family=family)
