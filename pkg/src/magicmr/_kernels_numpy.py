"""Pure-numpy implementations of the hot per-SNP kernels.

This is the fallback backend (and the reference the numba backend is tested
against). All functions take contiguous float64 arrays and return float64
arrays of the same shape. Standard-normal CDF values are built from erfc so
tail probabilities keep full relative precision, and Phi(x) for x >= 0 is
computed as 1 - upper_tail(x), which makes the complement identity
Phi(x) + Phi(-x) = 1 hold exactly in floating point.
"""

import numpy as np
from scipy.special import erfc

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)

# Floor applied to interval masses before they are used as denominators.
MASS_FLOOR = 1e-300


def norm_pdf(x):
    return _INV_SQRT2PI * np.exp(-0.5 * x * x)


def norm_cdf(x):
    x = np.asarray(x, dtype=np.float64)
    tail = 0.5 * erfc(np.abs(x) * _INV_SQRT2)
    return np.where(x < 0.0, tail, 1.0 - tail)


def interval_masses(a_plus, a_minus):
    """Probability mass of N(0,1) inside [a_minus, a_plus] and outside it.

    Both pieces are assembled from one-sided tails so that neither suffers
    cancellation when the interval sits far from the origin; each is floored
    at MASS_FLOOR.
    """
    a_plus = np.asarray(a_plus, dtype=np.float64)
    a_minus = np.asarray(a_minus, dtype=np.float64)
    tail_hi = 0.5 * erfc(a_plus * _INV_SQRT2)    # P(N > a_plus)
    tail_lo = 0.5 * erfc(-a_minus * _INV_SQRT2)  # P(N < a_minus)
    outside = tail_hi + tail_lo
    inside = np.where(
        a_minus >= 0.0,
        0.5 * (erfc(a_minus * _INV_SQRT2) - erfc(a_plus * _INV_SQRT2)),
        np.where(
            a_plus <= 0.0,
            0.5 * (erfc(-a_plus * _INV_SQRT2) - erfc(-a_minus * _INV_SQRT2)),
            1.0 - tail_hi - tail_lo,
        ),
    )
    return np.maximum(inside, MASS_FLOOR), np.maximum(outside, MASS_FLOOR)


def bias_correct(beta_hat, sigma, selected, lam, eta):
    """Curse-corrected association estimates and their squared-bias terms.

    Given observed effects, their standard errors, and the realized
    selection flags from the rerandomized rule |beta_hat/sigma + Z| > lam
    with Z ~ N(0, eta^2), returns (beta_bc, varsigma) such that, conditional
    on the selection outcome, E[beta_bc] equals the true association and
    E[beta_bc^2 - varsigma] equals its square.
    """
    beta_hat = np.asarray(beta_hat, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    selected = np.asarray(selected, dtype=bool)

    t = beta_hat / (sigma * eta)
    a_plus = -t + lam / eta
    a_minus = -t - lam / eta
    inside, outside = interval_masses(a_plus, a_minus)

    pdf_plus = norm_pdf(a_plus)
    pdf_minus = norm_pdf(a_minus)
    num = pdf_plus - pdf_minus
    wnum = a_plus * pdf_plus - a_minus * pdf_minus

    den = np.where(selected, outside, inside)
    sign = np.where(selected, 1.0, -1.0)

    ratio = num / den
    beta_bc = beta_hat - sign * (sigma / eta) * ratio
    varsigma = sigma * sigma * (
        1.0 - sign * wnum / (eta * eta * den) + (ratio * ratio) / (eta * eta)
    )
    return beta_bc, varsigma
