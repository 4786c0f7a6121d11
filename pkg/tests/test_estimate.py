"""Estimator contracts: worked examples, batch oracles, statistical sanity."""

import numpy as np
import numpy.testing as npt
import pytest
import scipy.stats

from armpc.estimate import (
    EstimationError,
    SetMembershipRow,
    BlrRow,
    CommittedEstimate,
    sm_update,
    sm_point,
    blr_update,
    blr_beta,
    blr_radius,
    chi2_quantile,
    gated_commit,
    warm_start_blr,
    lambda_min_from_inverse,
    SmEstimator,
    BlrEstimator,
)
from armpc.geom import EmptySetError, poly_is_subset


# ------------------------------------------------------- set-membership

def test_sm_update_zero_feature_unchanged():
    row = SetMembershipRow.from_box([-1.0], [1.0], 0.1)
    out = sm_update(row, np.zeros(1), 0.05)
    assert out is row


def test_sm_update_interval():
    row = SetMembershipRow.from_box([-1.0], [1.0], 0.1)
    out = sm_update(row, np.array([1.0]), 0.3)
    c, r = sm_point(out)
    assert c[0] == pytest.approx(0.3, abs=1e-9)
    assert r == pytest.approx(0.1, abs=1e-9)
    assert out.feasible.support(np.array([1.0])).value == pytest.approx(0.4)
    assert out.feasible.support(np.array([-1.0])).value == pytest.approx(-0.2)


def test_sm_update_contradiction_raises():
    row = SetMembershipRow.from_box([-1.0], [1.0], 0.1)
    with pytest.raises(EstimationError, match="noise model violated"):
        sm_update(row, np.array([1.0]), 5.0)


def test_sm_point_box_center():
    row = SetMembershipRow.from_box([0.2], [0.4], 0.1)
    c, r = sm_point(row)
    assert c[0] == pytest.approx(0.3)
    assert r == pytest.approx(0.1)


def test_sm_point_symmetric_center_zero():
    row = SetMembershipRow.from_box([-0.7, -0.7], [0.7, 0.7], 0.1)
    c, _ = sm_point(row)
    npt.assert_allclose(c, np.zeros(2), atol=1e-9)


def test_sm_point_empty_raises():
    from armpc.geom import HPolytope
    bad = SetMembershipRow(
        HPolytope(np.array([[1.0], [-1.0]]), np.array([-1.0, -1.0])), 0.1)
    with pytest.raises(EmptySetError):
        sm_point(bad)


def test_sm_nesting_and_radius_monotone():
    rng = np.random.default_rng(3)
    w_true = np.array([0.4, -0.2])
    row = SetMembershipRow.from_box([-1.0, -1.0], [1.0, 1.0], 0.1)
    prev_feasible = row.feasible
    prev_radius = sm_point(row)[1]
    for _ in range(40):
        phi = rng.standard_normal(2)
        res = w_true @ phi + rng.uniform(-0.1, 0.1)
        row = sm_update(row, phi, res)
        assert poly_is_subset(row.feasible, prev_feasible, tol=1e-9)
        radius = sm_point(row)[1]
        assert radius <= prev_radius + 1e-9
        assert row.feasible.contains(w_true, tol=1e-9)
        prev_feasible = row.feasible
        prev_radius = radius


# ------------------------------------------------------------------- BLR

def test_blr_update_scalar_example():
    row = BlrRow.from_prior(np.zeros(1), np.eye(1), 0.1)
    out = blr_update(row, np.array([1.0]), 1.0)
    assert out.w_hat[0] == pytest.approx(0.5)
    assert out.lambda_inv[0, 0] == pytest.approx(0.5)
    assert out.log_det_lambda == pytest.approx(np.log(2.0))


def test_blr_update_zero_feature_noop():
    row = BlrRow.from_prior(np.array([0.3, -0.4]), 2.0 * np.eye(2), 0.1)
    out = blr_update(row, np.zeros(2), 7.0)
    npt.assert_allclose(out.w_hat, row.w_hat)
    npt.assert_allclose(out.lambda_inv, row.lambda_inv)
    assert out.log_det_lambda == pytest.approx(row.log_det_lambda)


def test_blr_update_2d_example():
    row = BlrRow.from_prior(np.zeros(2), np.eye(2), 0.1)
    out = blr_update(row, np.array([1.0, 0.0]), 2.0)
    npt.assert_allclose(out.w_hat, np.array([1.0, 0.0]), atol=1e-12)
    npt.assert_allclose(out.lambda_inv, np.diag([0.5, 1.0]), atol=1e-12)


def test_blr_nonfinite_rejected():
    row = BlrRow.from_prior(np.zeros(1), np.eye(1), 0.1)
    with pytest.raises(ValueError):
        blr_update(row, np.array([np.nan]), 1.0)
    with pytest.raises(ValueError):
        blr_update(row, np.array([1.0]), np.inf)


def test_blr_matches_batch_posterior():
    rng = np.random.default_rng(5)
    d = 3
    lam0 = np.diag([1.0, 2.0, 0.5])
    w0 = rng.standard_normal(d)
    row = BlrRow.from_prior(w0, lam0, 0.1)
    phis, ys = [], []
    for _ in range(200):
        phi = rng.standard_normal(d)
        y = rng.standard_normal()
        phis.append(phi)
        ys.append(y)
        row = blr_update(row, phi, y)
    Phi = np.array(phis)
    y = np.array(ys)
    lam_batch = lam0 + Phi.T @ Phi
    w_batch = np.linalg.solve(lam_batch, lam0 @ w0 + Phi.T @ y)
    npt.assert_allclose(row.w_hat, w_batch, atol=1e-8)
    npt.assert_allclose(row.lambda_inv, np.linalg.inv(lam_batch), atol=1e-8)
    sign, logdet = np.linalg.slogdet(lam_batch)
    assert row.log_det_lambda == pytest.approx(logdet, abs=1e-8)


def test_blr_sherman_morrison_consistency():
    rng = np.random.default_rng(9)
    d = 4
    lam = np.eye(d)
    row = BlrRow.from_prior(np.zeros(d), lam, 0.1)
    for _ in range(30):
        phi = rng.standard_normal(d)
        new = blr_update(row, phi, rng.standard_normal())
        lam_next = np.linalg.inv(row.lambda_inv) + np.outer(phi, phi)
        npt.assert_allclose(new.lambda_inv @ lam_next, np.eye(d), atol=1e-8)
        row = new


def test_blr_logdet_nondecreasing():
    rng = np.random.default_rng(13)
    row = BlrRow.from_prior(np.zeros(2), np.eye(2), 0.1)
    prev = row.log_det_lambda
    for _ in range(50):
        row = blr_update(row, rng.standard_normal(2), rng.standard_normal())
        assert row.log_det_lambda >= prev - 1e-12
        prev = row.log_det_lambda


# --------------------------------------------------------- chi2 quantile

def test_chi2_quantile_closed_form_dof2():
    assert chi2_quantile(2, 0.95) == pytest.approx(-2.0 * np.log(0.05), abs=1e-9)


def test_chi2_quantile_zero():
    assert chi2_quantile(5, 0.0) == 0.0


def test_chi2_quantile_dof1():
    assert chi2_quantile(1, 0.95) == pytest.approx(3.841458820694124, abs=1e-8)


def test_chi2_quantile_against_scipy():
    for dof in (1, 2, 3, 10, 20):
        for p in (0.1, 0.5, 0.9, 0.975, 0.999):
            want = scipy.stats.chi2.ppf(p, dof)
            assert chi2_quantile(dof, p) == pytest.approx(want, abs=1e-8)


def test_chi2_quantile_invalid_p():
    with pytest.raises(ValueError):
        chi2_quantile(2, 1.0)
    with pytest.raises(ValueError):
        chi2_quantile(2, -0.1)


# ------------------------------------------------------------------ beta

def test_blr_beta_identity_prior():
    row = BlrRow.from_prior(np.zeros(2), np.eye(2), 0.1)
    beta = blr_beta(row, 0.025)
    want = np.sqrt(2.0 * np.log(40.0)) + np.sqrt(chi2_quantile(2, 0.975))
    assert beta == pytest.approx(want, abs=1e-8)
    assert beta == pytest.approx(5.4324, abs=5e-4)


def test_blr_beta_scaled_precision():
    row = BlrRow.from_prior(np.zeros(2), np.eye(2), 0.1)
    # two orthogonal sqrt(3)-scaled features turn I into 4I
    s = np.sqrt(3.0)
    row = blr_update(row, np.array([s, 0.0]), 0.0)
    row = blr_update(row, np.array([0.0, s]), 0.0)
    npt.assert_allclose(row.lambda_inv, 0.25 * np.eye(2), atol=1e-12)
    beta = blr_beta(row, 0.025)
    want = np.sqrt(2.0 * np.log(160.0)) + 0.5 * np.sqrt(chi2_quantile(2, 0.975))
    assert beta == pytest.approx(want, abs=1e-8)
    assert beta == pytest.approx(4.544, abs=5e-3)


def test_blr_beta_monotone_in_delta():
    row = BlrRow.from_prior(np.zeros(2), np.eye(2), 0.1)
    assert blr_beta(row, 0.01) > blr_beta(row, 0.05)


def test_blr_beta_invalid_delta():
    row = BlrRow.from_prior(np.zeros(2), np.eye(2), 0.1)
    with pytest.raises(ValueError):
        blr_beta(row, 0.0)
    with pytest.raises(ValueError):
        blr_beta(row, 1.0)


def test_lambda_min_from_inverse():
    rng = np.random.default_rng(17)
    Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    lam = Q @ np.diag([0.3, 1.0, 2.5, 7.0]) @ Q.T
    got = lambda_min_from_inverse(np.linalg.inv(lam))
    assert got == pytest.approx(0.3, abs=1e-8)


def test_blr_radius_formula():
    row = BlrRow.from_prior(np.zeros(2), 4.0 * np.eye(2), 0.2)
    beta = blr_beta(row, 0.025)
    assert blr_radius(row, 0.025) == pytest.approx(0.2 * beta / 2.0, abs=1e-10)


# ---------------------------------------------------------------- gating

def test_gated_commit_accepts_shrink():
    cur = CommittedEstimate(np.zeros((2, 1)), np.array([0.5, 0.5]), 0.05)
    out = gated_commit(cur, np.ones((2, 1)), np.array([0.4, 0.3]))
    npt.assert_allclose(out.radii, np.array([0.4, 0.3]))
    npt.assert_allclose(out.W_hat, np.ones((2, 1)))


def test_gated_commit_rejects_partial_growth():
    cur = CommittedEstimate(np.zeros((2, 1)), np.array([0.5, 0.5]), 0.05)
    out = gated_commit(cur, np.ones((2, 1)), np.array([0.4, 0.6]))
    assert out is cur


def test_gated_commit_accepts_ties():
    cur = CommittedEstimate(np.zeros((2, 1)), np.array([0.5, 0.5]), 0.05)
    out = gated_commit(cur, np.ones((2, 1)), np.array([0.5, 0.5]))
    npt.assert_allclose(out.W_hat, np.ones((2, 1)))


def test_gated_commit_radii_monotone_over_sequence():
    rng = np.random.default_rng(19)
    cur = CommittedEstimate(np.zeros((3, 2)), np.full(3, 1.0), 0.05)
    prev = cur.radii.copy()
    for _ in range(100):
        cand_r = rng.uniform(0.0, 1.2, 3)
        cur = gated_commit(cur, rng.standard_normal((3, 2)), cand_r)
        assert np.all(cur.radii <= prev + 1e-15)
        prev = cur.radii.copy()


# ---------------------------------------------------------- warm start

def test_warm_start_matches_least_squares():
    rng = np.random.default_rng(23)
    Phi = rng.standard_normal((30, 3))
    w_true = np.array([0.5, -1.0, 0.2])
    y = Phi @ w_true + 0.01 * rng.standard_normal(30)
    row = warm_start_blr(Phi, y, 0.1)
    w_ls, *_ = np.linalg.lstsq(Phi, y, rcond=None)
    npt.assert_allclose(row.w_hat, w_ls, atol=1e-6)
    npt.assert_allclose(np.linalg.inv(row.lambda_inv),
                        Phi.T @ Phi + 1e-8 * np.eye(3), atol=1e-6)


# -------------------------------------------------- estimator wrappers

def test_sm_estimator_commits_monotone():
    rng = np.random.default_rng(29)
    W_true = np.array([[0.0, 0.0], [0.3, -0.2]])
    rows = [SetMembershipRow.from_box([-1, -1], [1, 1], 0.1) for _ in range(2)]
    est = SmEstimator(rows)
    prev = est.committed.radii.copy()
    for _ in range(30):
        phi = rng.standard_normal(2)
        res = W_true @ phi + rng.uniform(-0.1, 0.1, 2)
        committed = est.update(phi, res)
        assert np.all(committed.radii <= prev + 1e-12)
        prev = committed.radii.copy()
    npt.assert_allclose(est.committed.W_hat, W_true, atol=0.25)


def test_blr_estimator_risk_split():
    rows = [BlrRow.from_prior(np.zeros(2), np.eye(2), 0.1) for _ in range(4)]
    est = BlrEstimator(rows, delta=0.05)
    assert est.delta_row == pytest.approx(0.0125)


def test_blr_estimator_shrinks_with_data():
    rng = np.random.default_rng(31)
    W_true = np.array([[0.4, -0.1]])
    rows = [BlrRow.from_prior(np.zeros(2), np.eye(2), 0.05)]
    est = BlrEstimator(rows, delta=0.05)
    r0 = est.committed.radii[0]
    for _ in range(200):
        phi = rng.standard_normal(2)
        res = W_true @ phi + 0.05 * rng.standard_normal(1)
        est.update(phi, res)
    assert est.committed.radii[0] < 0.5 * r0
    npt.assert_allclose(est.committed.W_hat, W_true, atol=0.1)


# -------------------------------------------------- statistical coverage

def test_blr_coverage_time_uniform():
    # true parameter drawn from the prior; the ellipsoidal confidence set
    # must contain the error at every step in >= (1 - delta) - 0.03 of runs
    rng = np.random.default_rng(37)
    d = 2
    sigma = 0.1
    delta = 0.05
    runs, steps = 500, 100
    hits = 0
    for _ in range(runs):
        w_true = sigma * rng.standard_normal(d)  # N(0, sigma^2 I) = prior
        row = BlrRow.from_prior(np.zeros(d), np.eye(d), sigma)
        ok = True
        for _ in range(steps):
            phi = rng.standard_normal(d)
            y = w_true @ phi + sigma * rng.standard_normal()
            row = blr_update(row, phi, y)
            err = row.w_hat - w_true
            lam = np.linalg.inv(row.lambda_inv)
            maha = np.sqrt(err @ lam @ err)
            if maha > sigma * blr_beta(row, delta):
                ok = False
                break
        hits += ok
    assert hits / runs >= (1.0 - delta) - 0.03
