"""Mediation-effect estimators and inference.

The main estimator solves three estimating equations that let the exposure
and the mediator carry different instrument sets: the exposure-selected
SNPs drive the tau_x equation and the first outcome equation, the
mediator-selected SNPs drive the second outcome equation. Squared
bias-corrected associations enter with their varsigma corrections
subtracted so measurement error does not attenuate the solution. Parameter
order is (theta, tau_y, tau_x) everywhere, including the covariance matrix.

Comparators implemented alongside: a plug-in variant whose cross terms run
over the intersection of the two selected sets, MVMR and its
measurement-error-debiased version DMVMR over a hard-thresholded union
set, a two-step ratio estimator, and the oracle (known instrument sets)
forms of both the main estimator and DMVMR.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDesignError, InsufficientInstrumentsError, ValidationError
from .normal import std_normal_cdf

#: Two-sided 95% normal critical value used for CIs, power, and coverage.
Z95 = 1.959964

#: Condition-number ceiling for estimating-equation matrices (after scaling).
CONDITION_LIMIT = 1e12


# ---------------------------------------------------------------------------
# results

@dataclass(frozen=True)
class MediationEstimate:
    """Joint direct/mediation estimate with covariance and diagnostics.

    cov is the 3x3 covariance of (theta, tau_y, tau_x); var_tau the
    delta-method variance of tau = tau_x * tau_y. Both are None for
    point-only estimators. kappa_x/kappa_m are average instrument
    strengths over the selected sets, computed from the unbiased squares.
    """

    theta_hat: float
    tau_y_hat: float
    tau_x_hat: float
    tau_hat: float
    cov: np.ndarray | None
    var_tau: float | None
    n_sx: int
    n_sm: int
    kappa_x: float
    kappa_m: float

    @property
    def se_theta(self):
        return None if self.cov is None else float(np.sqrt(self.cov[0, 0]))

    @property
    def se_tau_y(self):
        return None if self.cov is None else float(np.sqrt(self.cov[1, 1]))

    @property
    def se_tau_x(self):
        return None if self.cov is None else float(np.sqrt(self.cov[2, 2]))

    @property
    def se_tau(self):
        return None if self.var_tau is None else float(np.sqrt(self.var_tau))


@dataclass(frozen=True)
class MvmrEstimate:
    theta_hat: float
    se_theta: float
    tau_y_hat: float
    se_tau_y: float
    tau_total_hat: float
    tau_hat: float            # total effect minus direct effect; no SE
    n_used: int


@dataclass(frozen=True)
class DmvmrEstimate:
    theta_hat: float
    tau_y_hat: float
    n_used: int


@dataclass(frozen=True)
class TwoStepEstimate:
    tau_x_hat: float
    se_tau_x: float
    tau_y_hat: float
    se_tau_y: float
    tau_hat: float
    se_tau: float
    n_first: int
    n_second: int


@dataclass(frozen=True)
class OracleEstimate:
    theta_hat: float
    tau_y_hat: float
    n_used: int


# ---------------------------------------------------------------------------
# linear-algebra guards

def _scaled_condition(m):
    """Condition number after scaling rows then columns by their max magnitude."""
    row_max = np.max(np.abs(m), axis=1)
    row_max[row_max == 0.0] = 1.0
    scaled = m / row_max[:, None]
    col_max = np.max(np.abs(scaled), axis=0)
    col_max[col_max == 0.0] = 1.0
    scaled = scaled / col_max[None, :]
    return float(np.linalg.cond(scaled))


def _guarded_solve(m, rhs, context):
    cond = _scaled_condition(m)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise DegenerateDesignError(
            f"{context}: estimating-equation matrix is degenerate "
            f"(scaled condition number {cond:.3e})", condition=cond)
    return np.linalg.solve(m, rhs)


def _masked_sum(values, mask):
    # np.sum on a contiguous selection uses pairwise accumulation, which
    # keeps 1e-10-level agreement with reference solvers at p ~ 1e5
    return float(np.sum(values[mask]))


# ---------------------------------------------------------------------------
# main estimator

def _magic_system(panel, bc, sel):
    in_sx, in_sm = sel.in_sx, sel.in_sm
    w_y = 1.0 / (panel.sigma_y ** 2)
    w_m = 1.0 / (panel.sigma_m ** 2)
    x2 = bc.beta_x_bc ** 2 - bc.varsigma_x
    m2 = bc.beta_m_bc ** 2 - bc.varsigma_m
    xm = bc.beta_x_bc * bc.beta_m_bc
    m = np.array([
        [_masked_sum(x2 * w_y, in_sx), _masked_sum(xm * w_y, in_sx), 0.0],
        [_masked_sum(xm * w_y, in_sm), _masked_sum(m2 * w_y, in_sm), 0.0],
        [0.0, 0.0, _masked_sum(x2 * w_m, in_sx)],
    ])
    rhs = np.array([
        _masked_sum(panel.beta_y_hat * bc.beta_x_bc * w_y, in_sx),
        _masked_sum(panel.beta_y_hat * bc.beta_m_bc * w_y, in_sm),
        _masked_sum(xm * w_m, in_sx),
    ])
    return m, rhs


def _require_instruments(sel, minimum=2):
    for name, count in (("exposure", sel.n_sx), ("mediator", sel.n_sm)):
        if count < minimum:
            raise InsufficientInstrumentsError(
                f"{name}-selected instrument set has {count} SNPs; "
                f"at least {minimum} required")


def _kappas(panel, bc, sel):
    x2 = (bc.beta_x_bc ** 2 - bc.varsigma_x) / panel.sigma_x ** 2
    m2 = (bc.beta_m_bc ** 2 - bc.varsigma_m) / panel.sigma_m ** 2
    kappa_x = _masked_sum(x2, sel.in_sx) / max(sel.n_sx, 1)
    kappa_m = _masked_sum(m2, sel.in_sm) / max(sel.n_sm, 1)
    return kappa_x, kappa_m


def magic_estimate(panel, bc, sel) -> MediationEstimate:
    """Solve the three estimating equations and attach full inference.

    Requires at least two SNPs in each selected set and a well-conditioned
    system; raises InsufficientInstrumentsError / DegenerateDesignError
    otherwise.
    """
    _require_instruments(sel)
    m, rhs = _magic_system(panel, bc, sel)
    theta, tau_y, tau_x = _guarded_solve(m, rhs, "mediation estimator")
    cov = covariance_estimate(panel, bc, sel, (theta, tau_y, tau_x))
    grad = np.array([0.0, tau_x, tau_y])
    var_tau = float(grad @ cov @ grad)
    kappa_x, kappa_m = _kappas(panel, bc, sel)
    return MediationEstimate(
        theta_hat=float(theta), tau_y_hat=float(tau_y), tau_x_hat=float(tau_x),
        tau_hat=float(tau_x) * float(tau_y), cov=cov, var_tau=var_tau,
        n_sx=sel.n_sx, n_sm=sel.n_sm, kappa_x=kappa_x, kappa_m=kappa_m,
    )


def covariance_estimate(panel, bc, sel, point):
    """Residual-based covariance of (theta, tau_y, tau_x).

    Builds the per-SNP residual vectors gated by set membership, forms
    their Gram matrix, and sandwiches it between the inverse system
    matrix; the result is symmetrized by averaging with its transpose.
    """
    theta, tau_y, tau_x = point
    if sel.n_sx + sel.n_sm == 0:
        raise InsufficientInstrumentsError(
            "no SNP is selected for either trait; covariance undefined")
    w_y = 1.0 / (panel.sigma_y ** 2)
    w_m = 1.0 / (panel.sigma_m ** 2)
    bx, vx = bc.beta_x_bc, bc.varsigma_x
    bm, vm = bc.beta_m_bc, bc.varsigma_m
    by = panel.beta_y_hat
    u1 = np.where(sel.in_sx, (bx * (by - tau_y * bm) + theta * (vx - bx ** 2)) * w_y, 0.0)
    u2 = np.where(sel.in_sm, (bm * (by - theta * bx) + tau_y * (vm - bm ** 2)) * w_y, 0.0)
    u3 = np.where(sel.in_sx, (bx * bm + tau_x * (vx - bx ** 2)) * w_m, 0.0)
    comps = (u1, u2, u3)
    gram = np.empty((3, 3))
    for a in range(3):
        for b in range(a, 3):
            gram[a, b] = gram[b, a] = float(np.sum(comps[a] * comps[b]))
    m, _ = _magic_system(panel, bc, sel)
    cond = _scaled_condition(m)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise DegenerateDesignError(
            f"covariance: estimating-equation matrix is degenerate "
            f"(scaled condition number {cond:.3e})", condition=cond)
    half = np.linalg.solve(m, gram)
    cov = np.linalg.solve(m, half.T).T
    return 0.5 * (cov + cov.T)


def plug_in_estimate(panel, bc, sel) -> MediationEstimate:
    """Direct sample-analog solver; cross terms over the intersection.

    Shares the rerandomized selection and bias-corrected panel with the
    main estimator but plugs the selected sets straight into the
    structural equations, so it is exposed to imperfect-selection bias.
    Point estimates only.
    """
    inter = sel.in_sx & sel.in_sm
    for name, count in (("exposure", sel.n_sx), ("mediator", sel.n_sm),
                        ("intersection", int(np.count_nonzero(inter)))):
        if count < 1:
            raise InsufficientInstrumentsError(
                f"plug-in estimator requires a nonempty {name} instrument set")
    w_y = 1.0 / (panel.sigma_y ** 2)
    w_m = 1.0 / (panel.sigma_m ** 2)
    x2 = bc.beta_x_bc ** 2 - bc.varsigma_x
    m2 = bc.beta_m_bc ** 2 - bc.varsigma_m
    xm = bc.beta_x_bc * bc.beta_m_bc
    m = np.array([
        [_masked_sum(x2 * w_y, sel.in_sx), _masked_sum(xm * w_y, inter), 0.0],
        [_masked_sum(xm * w_y, inter), _masked_sum(m2 * w_y, sel.in_sm), 0.0],
        [0.0, 0.0, _masked_sum(x2 * w_m, sel.in_sx)],
    ])
    rhs = np.array([
        _masked_sum(panel.beta_y_hat * bc.beta_x_bc * w_y, sel.in_sx),
        _masked_sum(panel.beta_y_hat * bc.beta_m_bc * w_y, sel.in_sm),
        _masked_sum(xm * w_m, sel.in_sx),
    ])
    theta, tau_y, tau_x = _guarded_solve(m, rhs, "plug-in estimator")
    kappa_x, kappa_m = _kappas(panel, bc, sel)
    return MediationEstimate(
        theta_hat=float(theta), tau_y_hat=float(tau_y), tau_x_hat=float(tau_x),
        tau_hat=float(tau_x) * float(tau_y), cov=None, var_tau=None,
        n_sx=sel.n_sx, n_sm=sel.n_sm, kappa_x=kappa_x, kappa_m=kappa_m,
    )


# ---------------------------------------------------------------------------
# comparators over hard-thresholded sets

def mvmr_estimate(panel, in_sx_hard, in_sm_hard) -> MvmrEstimate:
    """Multivariable regression of outcome on both associations, union set.

    Standard errors are the fixed-effect inverse-variance-weighted ones
    (inverse of the weighted Gram matrix, unit dispersion). The mediation
    effect is reported as total-effect IVW minus the direct effect and
    carries no standard error.
    """
    union = in_sx_hard | in_sm_hard
    n_union = int(np.count_nonzero(union))
    if n_union < 2:
        raise InsufficientInstrumentsError(
            f"MVMR requires at least 2 instruments in the union set, got {n_union}")
    n_x = int(np.count_nonzero(in_sx_hard))
    if n_x < 1:
        raise InsufficientInstrumentsError(
            "MVMR total-effect step requires a nonempty exposure set")
    w_y = 1.0 / (panel.sigma_y ** 2)
    bx, bm, by = panel.beta_x_hat, panel.beta_m_hat, panel.beta_y_hat
    gram = np.array([
        [_masked_sum(bx * bx * w_y, union), _masked_sum(bx * bm * w_y, union)],
        [_masked_sum(bx * bm * w_y, union), _masked_sum(bm * bm * w_y, union)],
    ])
    rhs = np.array([
        _masked_sum(by * bx * w_y, union),
        _masked_sum(by * bm * w_y, union),
    ])
    theta, tau_y = _guarded_solve(gram, rhs, "MVMR")
    gram_inv = np.linalg.inv(gram)
    denom_total = _masked_sum(bx * bx * w_y, in_sx_hard)
    tau_total = _masked_sum(by * bx * w_y, in_sx_hard) / denom_total
    return MvmrEstimate(
        theta_hat=float(theta), se_theta=float(np.sqrt(gram_inv[0, 0])),
        tau_y_hat=float(tau_y), se_tau_y=float(np.sqrt(gram_inv[1, 1])),
        tau_total_hat=float(tau_total), tau_hat=float(tau_total - theta),
        n_used=n_union,
    )


def dmvmr_estimate(panel, in_sx_hard, in_sm_hard) -> DmvmrEstimate:
    """MVMR with sigma^2 subtracted on the Gram diagonal; no standard errors."""
    union = in_sx_hard | in_sm_hard
    n_union = int(np.count_nonzero(union))
    if n_union < 2:
        raise InsufficientInstrumentsError(
            f"DMVMR requires at least 2 instruments in the union set, got {n_union}")
    w_y = 1.0 / (panel.sigma_y ** 2)
    bx, bm, by = panel.beta_x_hat, panel.beta_m_hat, panel.beta_y_hat
    gram = np.array([
        [_masked_sum((bx * bx - panel.sigma_x ** 2) * w_y, union),
         _masked_sum(bx * bm * w_y, union)],
        [_masked_sum(bx * bm * w_y, union),
         _masked_sum((bm * bm - panel.sigma_m ** 2) * w_y, union)],
    ])
    rhs = np.array([
        _masked_sum(by * bx * w_y, union),
        _masked_sum(by * bm * w_y, union),
    ])
    theta, tau_y = _guarded_solve(gram, rhs, "DMVMR")
    return DmvmrEstimate(theta_hat=float(theta), tau_y_hat=float(tau_y), n_used=n_union)


def two_step_estimate(panel, in_sx_hard, in_sm_hard) -> TwoStepEstimate:
    """Two IVW ratio steps on disjoint sets, delta-method SE for the product.

    The second step screens out first-step SNPs, so the two slope
    estimates are independent and the delta method applies directly.
    """
    first = in_sx_hard
    second = in_sm_hard & ~in_sx_hard
    n_first = int(np.count_nonzero(first))
    n_second = int(np.count_nonzero(second))
    if n_first < 1:
        raise InsufficientInstrumentsError(
            "two-step estimator requires a nonempty hard-thresholded exposure set")
    if n_second < 1:
        raise InsufficientInstrumentsError(
            "two-step estimator has no mediator-only instruments "
            "(every mediator-selected SNP was already used in step one)")
    w_m = 1.0 / (panel.sigma_m ** 2)
    w_y = 1.0 / (panel.sigma_y ** 2)
    denom_x = _masked_sum(panel.beta_x_hat ** 2 * w_m, first)
    denom_y = _masked_sum(panel.beta_m_hat ** 2 * w_y, second)
    if denom_x <= 0.0 or denom_y <= 0.0:
        raise DegenerateDesignError("two-step estimator: zero weighted design mass")
    tau_x = _masked_sum(panel.beta_m_hat * panel.beta_x_hat * w_m, first) / denom_x
    tau_y = _masked_sum(panel.beta_y_hat * panel.beta_m_hat * w_y, second) / denom_y
    var_x = 1.0 / denom_x
    var_y = 1.0 / denom_y
    var_tau = tau_x ** 2 * var_y + tau_y ** 2 * var_x
    return TwoStepEstimate(
        tau_x_hat=float(tau_x), se_tau_x=float(np.sqrt(var_x)),
        tau_y_hat=float(tau_y), se_tau_y=float(np.sqrt(var_y)),
        tau_hat=float(tau_x * tau_y), se_tau=float(np.sqrt(var_tau)),
        n_first=n_first, n_second=n_second,
    )


# ---------------------------------------------------------------------------
# oracle estimators (known instrument sets; simulation benchmarking only)

def _oracle_solve(panel, row1_mask, row2_mask, context):
    w_y = 1.0 / (panel.sigma_y ** 2)
    bx, bm, by = panel.beta_x_hat, panel.beta_m_hat, panel.beta_y_hat
    x2 = (bx * bx - panel.sigma_x ** 2) * w_y
    m2 = (bm * bm - panel.sigma_m ** 2) * w_y
    xm = bx * bm * w_y
    gram = np.array([
        [_masked_sum(x2, row1_mask), _masked_sum(xm, row1_mask)],
        [_masked_sum(xm, row2_mask), _masked_sum(m2, row2_mask)],
    ])
    rhs = np.array([
        _masked_sum(by * bx * w_y, row1_mask),
        _masked_sum(by * bm * w_y, row2_mask),
    ])
    theta, tau_y = _guarded_solve(gram, rhs, context)
    return float(theta), float(tau_y)


def oracle_magic(panel, in_sx_star, in_sm_star) -> OracleEstimate:
    """Main estimator's 2x2 form with the true instrument sets plugged in."""
    n = int(np.count_nonzero(in_sx_star | in_sm_star))
    theta, tau_y = _oracle_solve(panel, in_sx_star, in_sm_star, "oracle estimator")
    return OracleEstimate(theta_hat=theta, tau_y_hat=tau_y, n_used=n)


def oracle_dmvmr(panel, in_union_star) -> OracleEstimate:
    """DMVMR with the true union instrument set plugged in."""
    n = int(np.count_nonzero(in_union_star))
    theta, tau_y = _oracle_solve(panel, in_union_star, in_union_star, "oracle DMVMR")
    return OracleEstimate(theta_hat=theta, tau_y_hat=tau_y, n_used=n)


# ---------------------------------------------------------------------------
# inference plumbing

def bh_adjust(pvalues):
    """Step-up Benjamini-Hochberg adjusted p-values with monotonicity.

    Order-preserving in ranks; output lies in [0, 1]; ties and m = 1
    behave as the standard definition.
    """
    p = np.asarray(pvalues, dtype=np.float64)
    if p.ndim != 1:
        raise ValidationError("bh_adjust expects a one-dimensional collection")
    if p.size == 0:
        return p.copy()
    if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise ValidationError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    adjusted = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m, dtype=np.float64)
    out[order] = np.minimum(adjusted, 1.0)
    return out


@dataclass
class ReportRow:
    """One (method, parameter) line of an analysis report."""

    method: str
    parameter: str
    estimate: float
    std_error: float | None = None
    z: float | None = None
    p: float | None = None
    p_bh: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None


def _make_row(method, parameter, estimate, std_error=None):
    row = ReportRow(method=method, parameter=parameter, estimate=float(estimate))
    if std_error is not None and np.isfinite(std_error) and std_error > 0.0:
        z = estimate / std_error
        row.std_error = float(std_error)
        row.z = float(z)
        row.p = float(2.0 * std_normal_cdf(-abs(z)))
        row.ci_low = float(estimate - Z95 * std_error)
        row.ci_high = float(estimate + Z95 * std_error)
    return row


def report_rows(method, result):
    """Report rows for one estimator result object."""
    if method == "magic":
        return [
            _make_row(method, "theta", result.theta_hat, result.se_theta),
            _make_row(method, "tau_y", result.tau_y_hat, result.se_tau_y),
            _make_row(method, "tau_x", result.tau_x_hat, result.se_tau_x),
            _make_row(method, "tau", result.tau_hat, result.se_tau),
        ]
    if method == "plugin":
        return [
            _make_row(method, "theta", result.theta_hat),
            _make_row(method, "tau_y", result.tau_y_hat),
            _make_row(method, "tau_x", result.tau_x_hat),
            _make_row(method, "tau", result.tau_hat),
        ]
    if method == "mvmr":
        return [
            _make_row(method, "theta", result.theta_hat, result.se_theta),
            _make_row(method, "tau_y", result.tau_y_hat, result.se_tau_y),
            _make_row(method, "tau", result.tau_hat),
        ]
    if method == "dmvmr":
        return [
            _make_row(method, "theta", result.theta_hat),
            _make_row(method, "tau_y", result.tau_y_hat),
        ]
    if method == "twostep":
        return [
            _make_row(method, "tau_x", result.tau_x_hat, result.se_tau_x),
            _make_row(method, "tau_y", result.tau_y_hat, result.se_tau_y),
            _make_row(method, "tau", result.tau_hat, result.se_tau),
        ]
    raise ValidationError(f"unknown method {method!r}")


def apply_bh(rows):
    """Fill p_bh across all rows that carry a p-value (one family)."""
    indexed = [(i, row.p) for i, row in enumerate(rows) if row.p is not None]
    if not indexed:
        return rows
    adjusted = bh_adjust([p for _, p in indexed])
    for (i, _), adj in zip(indexed, adjusted):
        rows[i].p_bh = float(adj)
    return rows
