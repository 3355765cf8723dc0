"""Packing certificates, alternative families, KL certificates, Fano reports."""

import math

import numpy as np
import pytest

from spectreg.errors import ConfigError, ConstructionError, DataError
from spectreg.lowerbound import (PackingCertificate, build_alternatives, choose_m,
                                 fano_from_family, fano_report, generate_packing,
                                 kl_bounds, kl_divergence, verify_packing)
from spectreg.rates import ModelParams, theoretical_rate
from spectreg.spectrum import polynomial


@pytest.fixture(scope="module")
def prof400():
    return polynomial(2.0, 400)


@pytest.fixture(scope="module")
def params400(prof400):
    return ModelParams(M=1.0, sigma=1.0, R=1.0, r=0.5, profile=prof400)


@pytest.fixture(scope="module")
def report(params400):
    return fano_report(params400, 0.5, 10_000, seed=0)


def _pairwise_hamming(codes):
    n = len(codes)
    return [(i, j, int(np.sum(codes[i] != codes[j])))
            for i in range(n) for j in range(i + 1, n)]


# ------------------------------------------------------------------
# packing
# ------------------------------------------------------------------

def test_packing_reaches_capacity_target():
    for m in (28, 36, 72):
        cert = generate_packing(m, seed=11)
        assert cert.n_codes == math.ceil(math.exp(m / 36.0)) + 1
        assert cert.codes.shape == (cert.n_codes, m)
        assert set(np.unique(cert.codes)) <= {-1, 1}
        # strict keep rule: every pair strictly above m/4
        assert 4 * cert.min_hamming > m
        assert verify_packing(cert).ok


def test_packing_m36_example():
    cert = generate_packing(36, seed=7)
    assert cert.n_codes == 4
    for _, _, h in _pairwise_hamming(cert.codes):
        assert h >= 9
    assert cert.log_capacity == math.log(3)
    assert cert.log_capacity >= 36 / 36.0 - 1e-12


def test_packing_deterministic():
    a = generate_packing(36, seed=5)
    b = generate_packing(36, seed=5)
    np.testing.assert_array_equal(a.codes, b.codes)
    c = generate_packing(36, seed=6)
    assert not np.array_equal(a.codes, c.codes)


def test_packing_m_below_minimum_rejected():
    with pytest.raises(ConfigError):
        generate_packing(27, seed=0)


def test_packing_budget_is_explicit():
    with pytest.raises(ConstructionError, match="budget"):
        generate_packing(36, seed=0, max_codes=3)
    # capacity target e^(400/36) ~ 6.6e4 blows the default budget
    with pytest.raises(ConstructionError, match="budget"):
        generate_packing(400, seed=0)


def test_verifier_catches_flipped_entry():
    cert = generate_packing(36, seed=7)
    pairs = _pairwise_hamming(cert.codes)
    i, j, h = min(pairs, key=lambda t: t[2])
    assert h == cert.min_hamming
    codes = cert.codes.copy()
    k = int(np.nonzero(codes[i] != codes[j])[0][0])
    codes[i, k] = -codes[i, k]          # distance (i, j) drops by one
    bad = PackingCertificate(m=cert.m, codes=codes,
                             min_hamming=cert.min_hamming,
                             log_capacity=cert.log_capacity)
    check = verify_packing(bad)
    assert not check.ok
    assert any("min_hamming" in r for r in check.reasons)


def test_verifier_catches_bad_entries_and_fields():
    cert = generate_packing(36, seed=7)
    codes = cert.codes.copy()
    codes[0, 0] = 0
    bad = PackingCertificate(m=36, codes=codes, min_hamming=cert.min_hamming,
                             log_capacity=cert.log_capacity)
    assert not verify_packing(bad).ok
    bad2 = PackingCertificate(m=36, codes=cert.codes, min_hamming=cert.min_hamming,
                              log_capacity=cert.log_capacity + 0.5)
    check2 = verify_packing(bad2)
    assert not check2.ok
    assert any("log_capacity" in r for r in check2.reasons)


# ------------------------------------------------------------------
# choose_m
# ------------------------------------------------------------------

def test_choose_m_matches_direct_count(prof400, params400):
    eps = 2.1262931794992867e-05
    m = choose_m(eps, params400, 0.5)
    arg = 2.0 ** 2 * eps        # 2^nu (eps/R)^(1/(r+s)) with r+s = 1
    direct = int(np.sum(prof400.eigenvalues >= arg))
    assert m == direct == 108


def test_choose_m_monotone_under_halving(params400):
    thr = 2.0 ** -2 * params400.profile.eigenvalues[27]
    eps = thr * 0.999
    got = []
    for _ in range(6):
        got.append(choose_m(eps, params400, 0.5))
        eps /= 2.0
    assert got == [28, 39, 56, 79, 112, 158]


def test_choose_m_smallness_boundary_is_strict(params400):
    thr = 2.0 ** -2 * params400.profile.eigenvalues[27]   # 2^(-nu(r+s)) R mu_28
    assert choose_m(thr * (1.0 - 1e-9), params400, 0.5) == 28
    with pytest.raises(ConfigError, match="threshold"):
        choose_m(thr, params400, 0.5)


def test_choose_m_enforces_block_floor(prof400):
    # r + s > 1: the smallness condition alone leaves m below 28
    params = ModelParams(M=1.0, sigma=1.0, R=1.0, r=1.5, profile=prof400)
    thr = 2.0 ** (-2.0 * 2.0) * prof400.eigenvalues[27]
    with pytest.raises(ConfigError, match="28"):
        choose_m(thr * 0.9, params, 0.5)


def test_choose_m_validation(params400):
    with pytest.raises(ConfigError):
        choose_m(0.0, params400, 0.5)
    with pytest.raises(ConfigError):
        choose_m(1e-5, params400, 0.7)


# ------------------------------------------------------------------
# alternatives
# ------------------------------------------------------------------

def test_alternatives_block_structure(report):
    fam = report.family
    m, eps, s = fam.m, fam.epsilon, fam.s
    mu = fam.params.profile.eigenvalues
    fs = fam.fs
    assert fs.shape == (fam.packing.n_codes, fam.params.profile.p)
    assert np.all(fs[:, :m] == 0.0) and np.all(fs[:, 2 * m:] == 0.0)
    expected = eps / math.sqrt(m) * fam.packing.codes * mu[m:2 * m] ** (-s)
    np.testing.assert_allclose(fs[:, m:2 * m], expected, rtol=1e-15)


def test_alternatives_source_membership(report):
    fam = report.family
    mu = fam.params.profile.eigenvalues
    # ||g_i||^2 = sum_l f_l^2 mu_l^(-2r), identical across i
    for i in (0, fam.packing.n_codes - 1):
        g_sq = float(np.sum(fam.fs[i] ** 2 * mu ** (-2.0 * fam.params.r)))
        block = mu[fam.m:2 * fam.m]
        closed = fam.epsilon ** 2 / fam.m * float(np.sum(block ** (-2.0 * (fam.params.r + fam.s))))
        assert g_sq == pytest.approx(closed, rel=1e-12)
        assert g_sq <= fam.params.R ** 2 * (1.0 + 1e-12)


def test_separation_identity_all_pairs(report):
    fam = report.family
    mu = fam.params.profile.eigenvalues
    W = fam.fs * mu ** fam.s
    for i, j, h in _pairwise_hamming(fam.packing.codes):
        direct = float(np.sum((W[i] - W[j]) ** 2))
        assert direct == pytest.approx(4.0 * fam.epsilon ** 2 * h / fam.m, rel=1e-12)
        assert direct > fam.epsilon ** 2


def test_alternatives_need_enough_eigenvalues(params400):
    eps = 2.1262931794992867e-05
    small = polynomial(2.0, 150)        # p < 2m = 216
    params = ModelParams(M=1.0, sigma=1.0, R=1.0, r=0.5, profile=small)
    pack = generate_packing(choose_m(eps, params, 0.5), seed=1)
    with pytest.raises(ConfigError, match="2m"):
        build_alternatives(eps, params, 0.5, pack)


def test_alternatives_reject_mismatched_packing(params400):
    eps = 2.1262931794992867e-05
    pack36 = generate_packing(36, seed=1)
    with pytest.raises(ConfigError, match="choose_m"):
        build_alternatives(eps, params400, 0.5, pack36)


# ------------------------------------------------------------------
# KL divergences
# ------------------------------------------------------------------

def test_kl_closed_form_at_s_half(report):
    fam, n = report.family, 10_000
    for i, j, h in _pairwise_hamming(fam.packing.codes)[:5]:
        expected = n / 2.0 * 4.0 * fam.epsilon ** 2 * h / fam.m
        assert kl_divergence(fam, i, j, n) == pytest.approx(expected, rel=1e-12)


def test_kl_general_s_independent_sum():
    prof = polynomial(2.0, 800)
    params = ModelParams(M=1.0, sigma=1.0, R=1.0, r=0.5, profile=prof)
    n, s = 300, 0.25
    eps = 2.0 ** -2 / 288.0 * theoretical_rate(params, n, s)
    m = choose_m(eps, params, s)
    assert m == 173
    fam = build_alternatives(eps, params, s, generate_packing(m, seed=3))
    codes = fam.packing.codes
    ls = np.arange(m + 1, 2 * m + 1, dtype=float)      # 1-based block indices
    for i, j in ((1, 4), (0, 17)):
        diff = codes[i] != codes[j]
        expected = n / 2.0 * (4.0 * eps ** 2 / m) * float(
            np.sum((ls ** -2.0)[diff] ** (1.0 - 2.0 * s)))
        assert kl_divergence(fam, i, j, n) == pytest.approx(expected, rel=1e-12)


def test_kl_self_symmetry_and_indices(report):
    fam = report.family
    assert kl_divergence(fam, 3, 3, 100) == 0.0
    assert kl_divergence(fam, 2, 9, 100) == kl_divergence(fam, 9, 2, 100)
    with pytest.raises(DataError):
        kl_divergence(fam, 0, fam.packing.n_codes, 100)


def test_kl_needs_noise(prof400):
    params = ModelParams(M=1.0, sigma=0.0, R=1.0, r=0.5, profile=prof400)
    eps = 2.1262931794992867e-05
    fam = build_alternatives(eps, params, 0.5, generate_packing(108, seed=0))
    with pytest.raises(ConfigError):
        kl_divergence(fam, 0, 1, 10)


def test_kl_bound_needs_the_corrected_constant(report):
    display, corrected = kl_bounds(report.family, 10_000)
    assert corrected == 4.0 * display
    assert report.kl_max <= corrected
    # the strict packing rule forces every pair above the uncorrected display
    # constant at s = 1/2, where the bound reduces to n eps^2 / (2 sigma^2)
    assert min(kl for _, _, kl in report.kl_pairs) > display


# ------------------------------------------------------------------
# Fano report
# ------------------------------------------------------------------

def test_fano_end_to_end(report):
    assert report.valid and report.reason is None
    assert report.epsilon == pytest.approx(2.1262931794992867e-05, rel=1e-12)
    assert report.m == 108
    assert report.n_codes == 22
    assert math.log(report.n_codes - 1) >= report.m / 36.0
    assert 0.0 < report.omega < 1e-4
    assert 0.81 < report.lower_bound_prob < math.sqrt(21) / (1 + math.sqrt(21))
    assert len(report.kl_pairs) == 22 * 21 // 2
    assert verify_packing(report.family.packing).ok


def test_fano_epsilon_tracks_theoretical_rate(report, params400):
    ratio = report.epsilon / theoretical_rate(params400, 10_000, 0.5)
    assert ratio == pytest.approx(2.0 ** -2 / 288.0, rel=1e-14)


def test_fano_seed_determinism(params400):
    a = fano_report(params400, 0.5, 10_000, seed=0)
    b = fano_report(params400, 0.5, 10_000, seed=0)
    assert a.omega == b.omega and a.kl_pairs == b.kl_pairs
    c = fano_report(params400, 0.5, 10_000, seed=1)
    assert c.m == a.m and c.n_codes == a.n_codes
    assert c.omega != a.omega


def test_fano_s0_fails_with_explicit_reason(params400):
    rep = fano_report(params400, 0.0, 10_000, seed=0)
    assert not rep.valid
    assert rep.m is None and rep.omega is None
    assert "budget" in rep.reason
    assert math.isfinite(rep.epsilon)


def test_fano_rejects_two_element_family(params400):
    eps = 2.1262931794992867e-05
    m = 108
    codes = np.ones((2, m), dtype=np.int8)
    codes[1, ::2] = -1                  # Hamming distance 54 > m/4
    pack = PackingCertificate(m=m, codes=codes, min_hamming=54, log_capacity=0.0)
    fam = build_alternatives(eps, params400, 0.5, pack)
    omega, prob, valid, reason = fano_from_family(fam, 10_000)
    assert not valid
    assert "beyond the reference" in reason


def test_fano_omega_cap(report):
    # KLs grow linearly in n; far enough out the mixing ratio crosses 1/8
    omega, prob, valid, reason = fano_from_family(report.family, 10 ** 9)
    assert not valid
    assert omega >= 0.125
    assert "1/8" in reason


def test_fano_needs_noise(prof400):
    params = ModelParams(M=1.0, sigma=0.0, R=1.0, r=0.5, profile=prof400)
    with pytest.raises(ConfigError):
        fano_report(params, 0.5, 100)
