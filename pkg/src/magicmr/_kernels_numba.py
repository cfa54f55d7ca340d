"""Numba-jitted implementations of the hot per-SNP kernels.

Same contracts as _kernels_numpy; scalar math goes through libm's erfc/exp
inside @njit loops, which fuses the whole bias-correction pass into one
sweep over the panel. Loops are kept sequential so results are bit-stable
regardless of thread counts.
"""

import math

import numpy as np
from numba import njit

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)

MASS_FLOOR = 1e-300


@njit(cache=True)
def _pdf1(x):
    return _INV_SQRT2PI * math.exp(-0.5 * x * x)


@njit(cache=True)
def _cdf1(x):
    tail = 0.5 * math.erfc(abs(x) * _INV_SQRT2)
    if x < 0.0:
        return tail
    return 1.0 - tail


@njit(cache=True)
def _masses1(a_plus, a_minus):
    tail_hi = 0.5 * math.erfc(a_plus * _INV_SQRT2)
    tail_lo = 0.5 * math.erfc(-a_minus * _INV_SQRT2)
    outside = tail_hi + tail_lo
    if a_minus >= 0.0:
        inside = 0.5 * (math.erfc(a_minus * _INV_SQRT2) - math.erfc(a_plus * _INV_SQRT2))
    elif a_plus <= 0.0:
        inside = 0.5 * (math.erfc(-a_plus * _INV_SQRT2) - math.erfc(-a_minus * _INV_SQRT2))
    else:
        inside = 1.0 - tail_hi - tail_lo
    if inside < MASS_FLOOR:
        inside = MASS_FLOOR
    if outside < MASS_FLOOR:
        outside = MASS_FLOOR
    return inside, outside


@njit(cache=True)
def norm_pdf(x):
    out = np.empty_like(x)
    for i in range(x.size):
        out[i] = _pdf1(x[i])
    return out


@njit(cache=True)
def norm_cdf(x):
    out = np.empty_like(x)
    for i in range(x.size):
        out[i] = _cdf1(x[i])
    return out


@njit(cache=True)
def interval_masses(a_plus, a_minus):
    inside = np.empty_like(a_plus)
    outside = np.empty_like(a_plus)
    for i in range(a_plus.size):
        inside[i], outside[i] = _masses1(a_plus[i], a_minus[i])
    return inside, outside


@njit(cache=True)
def bias_correct(beta_hat, sigma, selected, lam, eta):
    n = beta_hat.size
    beta_bc = np.empty(n, dtype=np.float64)
    varsigma = np.empty(n, dtype=np.float64)
    shift = lam / eta
    inv_eta2 = 1.0 / (eta * eta)
    for i in range(n):
        t = beta_hat[i] / (sigma[i] * eta)
        a_plus = -t + shift
        a_minus = -t - shift
        inside, outside = _masses1(a_plus, a_minus)
        pdf_plus = _pdf1(a_plus)
        pdf_minus = _pdf1(a_minus)
        num = pdf_plus - pdf_minus
        wnum = a_plus * pdf_plus - a_minus * pdf_minus
        if selected[i]:
            den = outside
            sign = 1.0
        else:
            den = inside
            sign = -1.0
        ratio = num / den
        beta_bc[i] = beta_hat[i] - sign * (sigma[i] / eta) * ratio
        varsigma[i] = sigma[i] * sigma[i] * (
            1.0 - sign * wnum * inv_eta2 / den + ratio * ratio * inv_eta2
        )
    return beta_bc, varsigma
