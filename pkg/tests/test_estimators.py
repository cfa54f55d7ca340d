"""Estimating-equation solvers, covariance, comparators, and BH adjustment."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from magicmr import (DegenerateDesignError, InsufficientInstrumentsError,
                     SelectionConfig, ValidationError, Z95, bh_adjust,
                     covariance_estimate, dmvmr_estimate, magic_estimate,
                     mvmr_estimate, oracle_dmvmr, oracle_magic,
                     plug_in_estimate, two_step_estimate)
from magicmr.panel import HarmonizedPanel, build_panel
from magicmr.selection import BiasCorrectedPanel, SelectionOutcome

import oracles
from conftest import make_random_panel, selected_panel_pieces


def exact_pieces(n_x=40, n_extra=30, theta=0.2, tau_x=0.6, tau_y=0.2, seed=0,
                 sigma=3e-3, sigma_xm=None):
    """Noise-free panel (beta_hat = beta) with nested supports: exposure SNPs
    carry no pleiotropy, extras are mediator-only. Returns all estimator
    inputs with varsigma = 0."""
    rng = np.random.default_rng(seed)
    n = n_x + n_extra
    beta_x = np.concatenate([rng.normal(0, 0.01, n_x), np.zeros(n_extra)])
    delta = np.concatenate([np.zeros(n_x), rng.normal(0, 0.008, n_extra)])
    beta_m = tau_x * beta_x + delta
    beta_y = theta * beta_x + tau_y * beta_m
    sig_xm = np.full(n, sigma if sigma_xm is None else sigma_xm)
    panel = HarmonizedPanel(
        ids=np.array([f"s{i}" for i in range(n)], dtype=object),
        beta_x_hat=beta_x, sigma_x=sig_xm, beta_m_hat=beta_m, sigma_m=sig_xm,
        beta_y_hat=beta_y, sigma_y=np.full(n, sigma))
    in_sx = beta_x != 0
    in_sm = beta_m != 0
    sel = SelectionOutcome(np.zeros(n), np.zeros(n), in_sx, in_sm,
                           SelectionConfig(lam=4.06, eta=0.5, seed=0))
    bc = BiasCorrectedPanel(beta_x.copy(), np.zeros(n), beta_m.copy(), np.zeros(n))
    return panel, sel, bc, (theta, tau_y, tau_x)


class TestMagicEstimate:
    def test_noise_free_fixed_point(self):
        panel, sel, bc, (theta, tau_y, tau_x) = exact_pieces()
        est = magic_estimate(panel, bc, sel)
        assert est.theta_hat == pytest.approx(theta, abs=1e-10)
        assert est.tau_y_hat == pytest.approx(tau_y, abs=1e-10)
        assert est.tau_x_hat == pytest.approx(tau_x, abs=1e-10)
        assert est.tau_hat == est.tau_x_hat * est.tau_y_hat

    def test_solver_matches_pivoted_elimination(self):
        rng = np.random.default_rng(1)
        for seed in range(8):
            panel, sel, bc, _ = selected_panel_pieces(rng, seed=seed)
            est = magic_estimate(panel, bc, sel)
            w_y = 1.0 / panel.sigma_y ** 2
            w_m = 1.0 / panel.sigma_m ** 2
            x2 = bc.beta_x_bc ** 2 - bc.varsigma_x
            m2 = bc.beta_m_bc ** 2 - bc.varsigma_m
            xm = bc.beta_x_bc * bc.beta_m_bc
            sx, sm = sel.in_sx, sel.in_sm
            m = [[np.sum((x2 * w_y)[sx]), np.sum((xm * w_y)[sx]), 0.0],
                 [np.sum((xm * w_y)[sm]), np.sum((m2 * w_y)[sm]), 0.0],
                 [0.0, 0.0, np.sum((x2 * w_m)[sx])]]
            rhs = [np.sum((panel.beta_y_hat * bc.beta_x_bc * w_y)[sx]),
                   np.sum((panel.beta_y_hat * bc.beta_m_bc * w_y)[sm]),
                   np.sum((xm * w_m)[sx])]
            ref = oracles.solve_pivot(m, rhs)
            got = np.array([est.theta_hat, est.tau_y_hat, est.tau_x_hat])
            np.testing.assert_allclose(got, ref, rtol=1e-10)

    def test_insufficient_instruments_names_set(self):
        panel, sel, bc, _ = exact_pieces()
        starved = SelectionOutcome(sel.z_x, sel.z_m,
                                   np.zeros(len(panel), bool), sel.in_sm, sel.config)
        with pytest.raises(InsufficientInstrumentsError, match="exposure"):
            magic_estimate(panel, bc, starved)
        starved_m = SelectionOutcome(sel.z_x, sel.z_m, sel.in_sx,
                                     np.zeros(len(panel), bool), sel.config)
        with pytest.raises(InsufficientInstrumentsError, match="mediator"):
            magic_estimate(panel, bc, starved_m)

    def test_degenerate_design_reports_condition(self):
        # collinear exposure/mediator: beta_m exactly proportional to beta_x
        panel, sel, bc, _ = exact_pieces(n_extra=0, tau_x=0.5)
        with pytest.raises(DegenerateDesignError) as err:
            magic_estimate(panel, bc, sel)
        assert err.value.condition is not None

    def test_scale_equivariance_sigma_y(self):
        rng = np.random.default_rng(2)
        panel, sel, bc, _ = selected_panel_pieces(rng)
        est = magic_estimate(panel, bc, sel)
        scaled = HarmonizedPanel(
            ids=panel.ids, beta_x_hat=panel.beta_x_hat, sigma_x=panel.sigma_x,
            beta_m_hat=panel.beta_m_hat, sigma_m=panel.sigma_m,
            beta_y_hat=panel.beta_y_hat, sigma_y=panel.sigma_y * 3.7)
        est2 = magic_estimate(scaled, bc, sel)
        for a, b in ((est.theta_hat, est2.theta_hat),
                     (est.tau_y_hat, est2.tau_y_hat),
                     (est.tau_x_hat, est2.tau_x_hat)):
            assert b == pytest.approx(a, rel=1e-10)

    def test_scale_equivariance_sigma_m(self):
        # selection and bias correction held fixed, sigma_m rescaled
        rng = np.random.default_rng(3)
        panel, sel, bc, _ = selected_panel_pieces(rng)
        est = magic_estimate(panel, bc, sel)
        scaled = HarmonizedPanel(
            ids=panel.ids, beta_x_hat=panel.beta_x_hat, sigma_x=panel.sigma_x,
            beta_m_hat=panel.beta_m_hat, sigma_m=panel.sigma_m * 0.21,
            beta_y_hat=panel.beta_y_hat, sigma_y=panel.sigma_y)
        est2 = magic_estimate(scaled, bc, sel)
        assert est2.theta_hat == pytest.approx(est.theta_hat, rel=1e-10)
        assert est2.tau_y_hat == pytest.approx(est.tau_y_hat, rel=1e-10)

    def test_kappa_diagnostics_track_strength(self):
        panel, sel, bc, _ = exact_pieces()
        est = magic_estimate(panel, bc, sel)
        expect = np.mean((bc.beta_x_bc[sel.in_sx] ** 2) / panel.sigma_x[sel.in_sx] ** 2)
        assert est.kappa_x == pytest.approx(expect, rel=1e-12)


class TestCovariance:
    def test_symmetric_and_psd(self):
        rng = np.random.default_rng(4)
        for seed in range(20):
            panel, sel, bc, _ = selected_panel_pieces(rng, seed=seed)
            est = magic_estimate(panel, bc, sel)
            cov = est.cov
            assert np.allclose(cov, cov.T, rtol=1e-10)
            eigvals = np.linalg.eigvalsh(cov)
            assert eigvals.min() >= -1e-10 * np.trace(cov)

    def test_gram_matrix_psd(self):
        # the middle matrix is a sum of outer products, hence PSD
        rng = np.random.default_rng(5)
        for seed in range(100):
            panel, sel, bc, point = selected_panel_pieces(rng, n=120, seed=seed)
            est = magic_estimate(panel, bc, sel)
            w_y = 1.0 / panel.sigma_y ** 2
            w_m = 1.0 / panel.sigma_m ** 2
            bx, vx = bc.beta_x_bc, bc.varsigma_x
            bm, vm = bc.beta_m_bc, bc.varsigma_m
            by = panel.beta_y_hat
            u = np.stack([
                np.where(sel.in_sx,
                         (bx * (by - est.tau_y_hat * bm)
                          + est.theta_hat * (vx - bx ** 2)) * w_y, 0.0),
                np.where(sel.in_sm,
                         (bm * (by - est.theta_hat * bx)
                          + est.tau_y_hat * (vm - bm ** 2)) * w_y, 0.0),
                np.where(sel.in_sx,
                         (bx * bm + est.tau_x_hat * (vx - bx ** 2)) * w_m, 0.0),
            ])
            gram = u @ u.T
            eigvals = np.linalg.eigvalsh(gram)
            assert eigvals.min() >= -1e-10 * np.trace(gram)

    def test_delta_method_consistency(self):
        rng = np.random.default_rng(6)
        panel, sel, bc, _ = selected_panel_pieces(rng)
        est = magic_estimate(panel, bc, sel)
        grad = np.array([0.0, est.tau_x_hat, est.tau_y_hat])
        assert est.var_tau == float(grad @ est.cov @ grad)

    def test_empty_selection_is_an_error(self):
        panel, sel, bc, _ = exact_pieces()
        none = SelectionOutcome(sel.z_x, sel.z_m,
                                np.zeros(len(panel), bool),
                                np.zeros(len(panel), bool), sel.config)
        with pytest.raises(InsufficientInstrumentsError):
            covariance_estimate(panel, bc, none, (0.1, 0.1, 0.1))

    def test_z_statistics_standard_normal(self, dgp1_table):
        # downstream consequence of conditional unbiasedness: z-scores over
        # the complete-overlap design pass a KS test against N(0,1)
        cfg = dgp1_table.config
        ok = dgp1_table.ok["magic"]
        z = ((dgp1_table.estimates[("magic", "theta")][ok] - cfg.theta)
             / dgp1_table.std_errors[("magic", "theta")][ok])
        assert sps.kstest(z, "norm").pvalue > 0.01


class TestPlugIn:
    def test_equals_main_when_sets_identical(self):
        rng = np.random.default_rng(7)
        for seed in range(5):
            panel, sel, bc, _ = selected_panel_pieces(rng, seed=seed)
            forced = SelectionOutcome(sel.z_x, sel.z_m, sel.in_sx, sel.in_sx,
                                      sel.config)
            a = magic_estimate(panel, bc, forced)
            b = plug_in_estimate(panel, bc, forced)
            assert b.theta_hat == pytest.approx(a.theta_hat, rel=1e-10)
            assert b.tau_y_hat == pytest.approx(a.tau_y_hat, rel=1e-10)
            assert b.tau_x_hat == pytest.approx(a.tau_x_hat, rel=1e-10)

    def test_noise_free_fixed_point(self):
        panel, sel, bc, (theta, tau_y, tau_x) = exact_pieces()
        est = plug_in_estimate(panel, bc, sel)
        assert est.theta_hat == pytest.approx(theta, abs=1e-10)
        assert est.tau_y_hat == pytest.approx(tau_y, abs=1e-10)
        assert est.tau_x_hat == pytest.approx(tau_x, abs=1e-10)
        assert est.cov is None and est.var_tau is None

    def test_empty_intersection_is_an_error(self):
        panel, sel, bc, _ = exact_pieces()
        disjoint = SelectionOutcome(sel.z_x, sel.z_m, sel.in_sx, ~sel.in_sx,
                                    sel.config)
        with pytest.raises(InsufficientInstrumentsError, match="intersection"):
            plug_in_estimate(panel, bc, disjoint)


class TestMvmr:
    def test_noise_free_recovery(self):
        panel, sel, bc, (theta, tau_y, _) = exact_pieces(sigma_xm=0.0)
        union_x, union_m = sel.in_sx, sel.in_sm
        est = mvmr_estimate(panel, union_x, union_m)
        assert est.theta_hat == pytest.approx(theta, abs=1e-10)
        assert est.tau_y_hat == pytest.approx(tau_y, abs=1e-10)
        # total effect of exposure is theta + tau_x*tau_y, so the
        # subtraction recovers the mediation effect here
        assert est.tau_hat == pytest.approx(0.6 * tau_y, abs=1e-10)

    def test_single_snp_rejected(self):
        panel, sel, bc, _ = exact_pieces()
        only_one = np.zeros(len(panel), bool)
        only_one[0] = True
        with pytest.raises(InsufficientInstrumentsError):
            mvmr_estimate(panel, only_one, only_one)

    def test_solver_matches_pivoted_elimination(self):
        rng = np.random.default_rng(8)
        panel, truth = make_random_panel(rng, 300)
        in_x = np.abs(panel.beta_x_hat / panel.sigma_x) > 3.0
        in_m = np.abs(panel.beta_m_hat / panel.sigma_m) > 3.0
        est = mvmr_estimate(panel, in_x, in_m)
        union = in_x | in_m
        w = 1.0 / panel.sigma_y[union] ** 2
        bx, bm, by = (panel.beta_x_hat[union], panel.beta_m_hat[union],
                      panel.beta_y_hat[union])
        gram = [[np.sum(bx * bx * w), np.sum(bx * bm * w)],
                [np.sum(bx * bm * w), np.sum(bm * bm * w)]]
        rhs = [np.sum(by * bx * w), np.sum(by * bm * w)]
        ref = oracles.solve_pivot(gram, rhs)
        np.testing.assert_allclose([est.theta_hat, est.tau_y_hat], ref, rtol=1e-10)


class TestDmvmr:
    def test_zero_sigma_equals_mvmr(self):
        # with sigma_x = sigma_m = 0 the measurement-error correction vanishes
        panel, sel, bc, _ = exact_pieces(sigma_xm=0.0, seed=3)
        a = mvmr_estimate(panel, sel.in_sx, sel.in_sm)
        b = dmvmr_estimate(panel, sel.in_sx, sel.in_sm)
        assert b.theta_hat == a.theta_hat
        assert b.tau_y_hat == a.tau_y_hat

    def test_noise_free_recovery(self):
        panel, sel, bc, (theta, tau_y, _) = exact_pieces(sigma_xm=0.0, seed=4)
        est = dmvmr_estimate(panel, sel.in_sx, sel.in_sm)
        assert est.theta_hat == pytest.approx(theta, abs=1e-10)
        assert est.tau_y_hat == pytest.approx(tau_y, abs=1e-10)


class TestTwoStep:
    def test_noise_free_recovery(self):
        panel, sel, bc, (_, tau_y, tau_x) = exact_pieces()
        est = two_step_estimate(panel, sel.in_sx, sel.in_sm)
        assert est.tau_x_hat == pytest.approx(tau_x, abs=1e-10)
        assert est.tau_y_hat == pytest.approx(tau_y, abs=1e-10)
        assert est.tau_hat == pytest.approx(tau_x * tau_y, abs=1e-10)

    def test_single_snp_wald_ratios(self):
        panel, sel, bc, _ = exact_pieces(n_x=1, n_extra=1, seed=9)
        est = two_step_estimate(panel, sel.in_sx, sel.in_sm)
        assert est.tau_x_hat == pytest.approx(
            panel.beta_m_hat[0] / panel.beta_x_hat[0], rel=1e-12)
        assert est.tau_y_hat == pytest.approx(
            panel.beta_y_hat[1] / panel.beta_m_hat[1], rel=1e-12)

    def test_ivw_slope_matches_wls_oracle(self):
        rng = np.random.default_rng(10)
        panel, truth = make_random_panel(rng, 200)
        in_x = np.abs(panel.beta_x_hat / panel.sigma_x) > 2.5
        in_m = np.abs(panel.beta_m_hat / panel.sigma_m) > 2.0
        est = two_step_estimate(panel, in_x, in_m)
        slope, var = oracles.wls_origin_slope(
            panel.beta_x_hat[in_x], panel.beta_m_hat[in_x],
            1.0 / panel.sigma_m[in_x] ** 2)
        assert est.tau_x_hat == pytest.approx(slope, rel=1e-12)
        assert est.se_tau_x == pytest.approx(np.sqrt(var), rel=1e-12)
        second = in_m & ~in_x
        slope_y, _ = oracles.wls_origin_slope(
            panel.beta_m_hat[second], panel.beta_y_hat[second],
            1.0 / panel.sigma_y[second] ** 2)
        assert est.tau_y_hat == pytest.approx(slope_y, rel=1e-12)

    def test_no_mediator_only_instruments(self):
        panel, sel, bc, _ = exact_pieces(n_extra=5)
        with pytest.raises(InsufficientInstrumentsError, match="mediator-only"):
            two_step_estimate(panel, sel.in_sm, sel.in_sx & sel.in_sm)

    def test_delta_variance_composition(self):
        panel, sel, bc, _ = exact_pieces(seed=12)
        est = two_step_estimate(panel, sel.in_sx, sel.in_sm)
        expect = (est.tau_x_hat ** 2 * est.se_tau_y ** 2
                  + est.tau_y_hat ** 2 * est.se_tau_x ** 2)
        assert est.se_tau ** 2 == pytest.approx(expect, rel=1e-12)


class TestOracleEstimators:
    def test_identical_sets_coincide(self):
        rng = np.random.default_rng(11)
        for seed in range(10):
            panel, truth = make_random_panel(rng, 200)
            mask = truth["beta_x"] != 0
            a = oracle_magic(panel, mask, mask)
            b = oracle_dmvmr(panel, mask)
            assert a.theta_hat == pytest.approx(b.theta_hat, rel=1e-10)
            assert a.tau_y_hat == pytest.approx(b.tau_y_hat, rel=1e-10)

    def test_noise_free_recovery(self):
        panel, sel, bc, (theta, tau_y, _) = exact_pieces(sigma_xm=0.0, seed=5)
        a = oracle_magic(panel, sel.in_sx, sel.in_sm)
        b = oracle_dmvmr(panel, sel.in_sx | sel.in_sm)
        for est in (a, b):
            assert est.theta_hat == pytest.approx(theta, abs=1e-10)
            assert est.tau_y_hat == pytest.approx(tau_y, abs=1e-10)

    def test_singular_design_rejected(self):
        panel, sel, bc, _ = exact_pieces(n_extra=0, tau_x=0.5, sigma_xm=0.0)
        with pytest.raises(DegenerateDesignError):
            oracle_magic(panel, sel.in_sx, sel.in_sm)

    def test_solver_matches_pivoted_elimination(self):
        rng = np.random.default_rng(12)
        panel, truth = make_random_panel(rng, 150)
        sx = truth["beta_x"] != 0
        sm = truth["beta_m"] != 0
        est = oracle_magic(panel, sx, sm)
        w = 1.0 / panel.sigma_y ** 2
        x2 = (panel.beta_x_hat ** 2 - panel.sigma_x ** 2) * w
        m2 = (panel.beta_m_hat ** 2 - panel.sigma_m ** 2) * w
        xm = panel.beta_x_hat * panel.beta_m_hat * w
        gram = [[np.sum(x2[sx]), np.sum(xm[sx])], [np.sum(xm[sm]), np.sum(m2[sm])]]
        rhs = [np.sum((panel.beta_y_hat * panel.beta_x_hat * w)[sx]),
               np.sum((panel.beta_y_hat * panel.beta_m_hat * w)[sm])]
        ref = oracles.solve_pivot(gram, rhs)
        np.testing.assert_allclose([est.theta_hat, est.tau_y_hat], ref, rtol=1e-10)


class TestReportRows:
    def test_ci_bounds_use_fixed_critical_value(self):
        rng = np.random.default_rng(14)
        panel, sel, bc, _ = selected_panel_pieces(rng)
        est = magic_estimate(panel, bc, sel)
        from magicmr import report_rows
        rows = report_rows("magic", est)
        for row in rows:
            assert row.std_error is not None
            assert row.ci_low == row.estimate - Z95 * row.std_error
            assert row.ci_high == row.estimate + Z95 * row.std_error
            assert row.z == row.estimate / row.std_error
            assert 0.0 <= row.p <= 1.0

    def test_point_only_rows_have_no_inference_fields(self):
        rng = np.random.default_rng(15)
        panel, sel, bc, _ = selected_panel_pieces(rng)
        est = plug_in_estimate(panel, bc, sel)
        from magicmr import report_rows
        for row in report_rows("plugin", est):
            assert row.std_error is None and row.p is None
            assert row.ci_low is None and row.ci_high is None


class TestBhAdjust:
    def test_frozen_vector(self):
        # step-up with monotonicity; verified against statsmodels below
        got = bh_adjust([0.01, 0.04, 0.03])
        np.testing.assert_allclose(got, [0.03, 0.04, 0.04], rtol=1e-12)

    def test_matches_statsmodels_reference(self):
        sm_multitest = pytest.importorskip("statsmodels.stats.multitest")
        rng = np.random.default_rng(13)
        for _ in range(20):
            p = rng.random(rng.integers(1, 40))
            ref = sm_multitest.multipletests(p, method="fdr_bh")[1]
            np.testing.assert_allclose(bh_adjust(p), ref, rtol=1e-12)

    def test_all_equal_unchanged(self):
        np.testing.assert_allclose(bh_adjust([0.2, 0.2, 0.2, 0.2]),
                                   [0.2, 0.2, 0.2, 0.2], rtol=0)

    def test_single_p_unchanged(self):
        assert bh_adjust([0.123])[0] == 0.123

    def test_empty(self):
        assert bh_adjust([]).size == 0

    @pytest.mark.parametrize("bad", [[-0.1], [1.2], [float("nan")]])
    def test_out_of_range_rejected(self, bad):
        with pytest.raises(ValidationError):
            bh_adjust(bad)

    @given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=50))
    @settings(deadline=None, max_examples=300)
    def test_properties(self, pvals):
        adj = bh_adjust(pvals)
        assert np.all(adj >= 0.0) and np.all(adj <= 1.0)
        # order-preserving with input ranks
        order = np.argsort(pvals, kind="stable")
        assert np.all(np.diff(adj[order]) >= -1e-15)
        # adjustment never decreases a p-value
        assert np.all(adj >= np.asarray(pvals) - 1e-15)
