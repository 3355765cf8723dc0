import numpy as np
import pytest

import spectreg.estimator as est
import spectreg.filters as fl
import spectreg.mercer as mc
import spectreg.spectrum as sp
from spectreg.errors import DataError


def _problem(p=30, r=0.5, R=1.0, b=2.0):
    return mc.make_problem(sp.polynomial(b, p), r, R, mc.gaussian(0.5))


def _design(n, p=30, seed=0, sigma=0.5):
    prob = mc.make_problem(sp.polynomial(2.0, p), 0.5, 1.0, mc.gaussian(sigma))
    ds = mc.sample(prob, n, seed=seed)
    return prob, ds


# ============================================================
# gram
# ============================================================

def test_gram_single_constant_point():
    one = mc.make_problem(sp.explicit([1.0]), 0.5, 1.0, mc.gaussian(0.0))
    K = est.gram(one, np.array([0.37]))
    np.testing.assert_allclose(K, [[1.0]], rtol=1e-15)


def test_gram_exactly_symmetric():
    prob, ds = _design(40)
    K = est.gram(prob, ds.x)
    assert np.array_equal(K, K.T)


def test_normalized_spectrum_in_unit_interval():
    prob, ds = _design(5)
    K = est.gram(prob, ds.x)
    w = np.linalg.eigvalsh(K / (5 * prob.kappa_sq))
    assert w[0] >= -1e-10
    assert w[-1] <= 1.0 + 1e-10


# ============================================================
# fit: pinned values and validation
# ============================================================

def test_scalar_ridge():
    res = est.fit([[1.0]], [2.0], 1.0, fl.tikhonov(), 1.0)
    np.testing.assert_allclose(res.alpha, [1.0], rtol=1e-14)


def test_zero_targets_give_zero_fit():
    prob, ds = _design(20)
    for f in (fl.tikhonov(), fl.spectral_cutoff(), fl.landweber(1.0),
              fl.iterated_tikhonov(2)):
        res = est.fit_mercer(prob, ds.x, np.zeros(20), 0.1, f)
        assert np.all(res.alpha == 0.0)
        assert np.all(res.eigencoeffs == 0.0)


def test_fit_validation():
    with pytest.raises(DataError):
        est.fit(np.ones((2, 3)), np.ones(2), 0.5, fl.tikhonov(), 1.0)
    with pytest.raises(DataError):
        est.fit(np.eye(2), np.ones(3), 0.5, fl.tikhonov(), 1.0)
    with pytest.raises(DataError):
        est.fit([[1.0, 0.5], [0.2, 1.0]], np.ones(2), 0.5, fl.tikhonov(), 1.0)
    for lam in (0.0, 1.5, -0.1):
        with pytest.raises(DataError):
            est.fit(np.eye(2), np.ones(2), lam, fl.tikhonov(), 1.0)


# ============================================================
# ridge oracle and interpolation
# ============================================================

def test_tikhonov_matches_direct_ridge_solve():
    # p >> n keeps the Gram numerically full rank (near-orthogonal rows), so
    # no eigendirection is dropped and the two solutions agree everywhere;
    # near-square Fourier designs are exponentially ill conditioned instead
    flat = sp.explicit(np.full(8000, 1.0 / 8000), strict=False)
    prob = mc.make_problem(flat, 0.5, 1.0, mc.gaussian(0.5))
    ds = mc.sample(prob, 200, seed=3)
    K = est.gram(prob, ds.x)
    nk = 200 * prob.kappa_sq
    for lam in (1e-4, 1e-2, 0.5, 1.0):
        res = est.fit(K, ds.y, lam, fl.tikhonov(), prob.kappa_sq)
        direct = np.linalg.solve(K + nk * lam * np.eye(200), ds.y)
        assert np.linalg.norm(res.alpha - direct) <= 1e-8 * np.linalg.norm(direct)
        resid = (K + nk * lam * np.eye(200)) @ res.alpha - ds.y
        assert np.linalg.norm(resid) <= 1e-8 * np.linalg.norm(ds.y)


def test_null_directions_are_dropped_not_ridged():
    # decaying spectrum, numerically rank-deficient Gram: the fit agrees with
    # ridge on the retained eigenspace and zeroes the rest by design
    prob = mc.make_problem(sp.polynomial(2.0, 250), 0.5, 1.0, mc.gaussian(0.5))
    ds = mc.sample(prob, 200, seed=3)
    K = est.gram(prob, ds.x)
    nk = 200 * prob.kappa_sq
    theta, U = np.linalg.eigh(K / nk)
    keep = theta > 1e-14 * theta[-1]
    lam = 1e-4
    res = est.fit(K, ds.y, lam, fl.tikhonov(), prob.kappa_sq)
    z = U.T @ ds.y
    expected = U[:, keep] @ (z[keep] / (theta[keep] + lam)) / nk
    assert np.linalg.norm(res.alpha - expected) <= 1e-9 * np.linalg.norm(expected)
    null_component = U[:, ~keep].T @ res.alpha
    assert np.linalg.norm(null_component) <= 1e-12 * np.linalg.norm(res.alpha)


def test_cutoff_below_spectrum_interpolates():
    prob, ds = _design(25, p=60)
    K = est.gram(prob, ds.x)
    theta = np.clip(np.linalg.eigvalsh(K / (25 * prob.kappa_sq)), 0, None)
    lam = 0.5 * float(theta[theta > 1e-14 * theta[-1]].min())
    # in-span noiseless targets: y in the range of K
    y = K @ np.random.default_rng(8).standard_normal(25)
    res = est.fit(K, y, lam, fl.spectral_cutoff(), prob.kappa_sq)
    in_sample = K @ res.alpha
    assert np.sqrt(np.mean((in_sample - y) ** 2)) <= 1e-8 * np.linalg.norm(y)


def test_interpolant_has_minimum_norm():
    prob, ds = _design(15, p=40)
    K = est.gram(prob, ds.x)
    theta = np.clip(np.linalg.eigvalsh(K / (15 * prob.kappa_sq)), 0, None)
    lam = 0.5 * float(theta[theta > 1e-14 * theta[-1]].min())
    y = K @ np.random.default_rng(9).standard_normal(15)
    res = est.fit(K, y, lam, fl.spectral_cutoff(), prob.kappa_sq)
    np.testing.assert_allclose(res.alpha, np.linalg.pinv(K) @ y, atol=1e-8)


# ============================================================
# eigencoeffs and re-synthesis
# ============================================================

def test_eigencoeffs_zero_alpha():
    prob, ds = _design(10)
    assert np.all(est.eigencoeffs(prob, ds.x, np.zeros(10)) == 0.0)


def test_eigencoeffs_shape_checked():
    prob, ds = _design(10)
    with pytest.raises(DataError):
        est.eigencoeffs(prob, ds.x, np.zeros(9))


def test_single_point_resynthesis_is_kernel_section():
    prob = _problem(p=21)
    x1 = np.array([0.3])
    c = est.eigencoeffs(prob, x1, np.array([1.0]))
    probes = np.random.default_rng(4).random(100)
    resynth = mc.features(prob, probes) @ c
    np.testing.assert_allclose(resynth, mc.kernel_eval(prob, np.full(100, 0.3), probes),
                               atol=1e-10)


def test_fit_resynthesis_identity():
    prob, ds = _design(5)
    res = est.fit_mercer(prob, ds.x, ds.y, 0.05, fl.tikhonov())
    probes = np.random.default_rng(5).random(100)
    resynth = mc.features(prob, probes) @ res.eigencoeffs
    dual = mc.kernel_matrix(prob, probes, ds.x) @ res.alpha
    np.testing.assert_allclose(resynth, dual, atol=1e-10)


def test_eigencoeffs_are_linear_in_alpha():
    prob, ds = _design(12)
    rng = np.random.default_rng(6)
    a, b = rng.standard_normal(12), rng.standard_normal(12)
    ca = est.eigencoeffs(prob, ds.x, a)
    cb = est.eigencoeffs(prob, ds.x, b)
    np.testing.assert_allclose(est.eigencoeffs(prob, ds.x, 2.0 * a - b),
                               2.0 * ca - cb, atol=1e-12)


# ============================================================
# paths, caching, prediction
# ============================================================

def test_feature_path_matches_gram_path():
    prob = mc.make_problem(sp.polynomial(2.0, 20), 0.5, 1.0, mc.gaussian(0.3))
    ds = mc.sample(prob, 50, seed=12)          # n > p: dispatches to features
    for f in (fl.tikhonov(), fl.spectral_cutoff(), fl.landweber(1.0)):
        auto = est.fit_mercer(prob, ds.x, ds.y, 0.02, f)
        raw = est.fit(est.gram(prob, ds.x), ds.y, 0.02, f, prob.kappa_sq)
        ref = est.eigencoeffs(prob, ds.x, raw.alpha)
        assert np.linalg.norm(auto.alpha - raw.alpha) <= 1e-8 * (1 + np.linalg.norm(raw.alpha))
        assert np.linalg.norm(auto.eigencoeffs - ref) <= 1e-8 * (1 + np.linalg.norm(ref))


def test_design_reuse_matches_fresh_fits():
    prob, ds = _design(30)
    design = est.SpectralDesign(prob, ds.x)
    for lam in np.geomspace(1e-3, 1.0, 7):
        cached = design.fit(ds.y, float(lam), fl.tikhonov())
        fresh = est.fit_mercer(prob, ds.x, ds.y, float(lam), fl.tikhonov())
        np.testing.assert_array_equal(cached.alpha, fresh.alpha)
        np.testing.assert_array_equal(cached.eigencoeffs, fresh.eigencoeffs)


def test_h_norm_nonincreasing_in_lambda():
    prob, ds = _design(40)
    design = est.SpectralDesign(prob, ds.x)
    norms = [np.linalg.norm(design.fit(ds.y, float(lam), fl.tikhonov()).eigencoeffs)
             for lam in np.geomspace(1e-4, 1.0, 12)]
    assert all(a >= b - 1e-12 for a, b in zip(norms, norms[1:]))


def test_in_sample_predictions_are_k_alpha():
    prob, ds = _design(18)
    res = est.fit_mercer(prob, ds.x, ds.y, 0.1, fl.tikhonov())
    K = est.gram(prob, ds.x)
    np.testing.assert_array_equal(est.predict(prob, res, ds.x), K @ res.alpha)


def test_out_of_sample_prediction_matches_resynthesis():
    prob, ds = _design(18)
    res = est.fit_mercer(prob, ds.x, ds.y, 0.1, fl.landweber(1.0))
    new = np.random.default_rng(10).random(7)
    via_kernel = est.predict(prob, res, ds.x, new)
    via_coeffs = mc.features(prob, new) @ res.eigencoeffs
    np.testing.assert_allclose(via_kernel, via_coeffs, atol=1e-10)
