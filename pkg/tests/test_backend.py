"""Numba and numpy kernel builds agree; env flag controls selection."""

import os
import subprocess
import sys

import numpy as np
import pytest

from magicmr import _kernels_numpy
from magicmr.backend import ENV_FLAG

numba_kernels = pytest.importorskip("magicmr._kernels_numba")


@pytest.fixture(scope="module")
def sample_inputs():
    rng = np.random.default_rng(0)
    n = 20_000
    beta_hat = rng.normal(0.0, 0.02, n)
    sigma = np.full(n, 1.0 / np.sqrt(100_000.0))
    selected = rng.random(n) < 0.5
    return beta_hat, sigma, selected


def test_cdf_pdf_agree(sample_inputs):
    x = np.linspace(-12.0, 12.0, 50_001)
    np.testing.assert_allclose(numba_kernels.norm_cdf(x),
                               _kernels_numpy.norm_cdf(x), rtol=1e-14, atol=1e-18)
    np.testing.assert_allclose(numba_kernels.norm_pdf(x),
                               _kernels_numpy.norm_pdf(x), rtol=1e-14, atol=0)


def test_interval_masses_agree(sample_inputs):
    rng = np.random.default_rng(1)
    center = rng.uniform(-15, 15, 10_000)
    half = rng.uniform(0.1, 20, 10_000)
    a_plus, a_minus = center + half, center - half
    for got, want in zip(numba_kernels.interval_masses(a_plus, a_minus),
                         _kernels_numpy.interval_masses(a_plus, a_minus)):
        np.testing.assert_allclose(got, want, rtol=1e-13)


def test_bias_correct_agree(sample_inputs):
    # libm and Cephes erfc differ at the ulp level; the varsigma formula's
    # cancellation amplifies that, so the cross-backend tolerance is looser
    # than each backend's own 1e-8 quadrature anchor but still far tighter
    beta_hat, sigma, selected = sample_inputs
    for lam in (4.06, 5.45):
        got_bc, got_vs = numba_kernels.bias_correct(beta_hat, sigma, selected, lam, 0.5)
        want_bc, want_vs = _kernels_numpy.bias_correct(beta_hat, sigma, selected, lam, 0.5)
        np.testing.assert_allclose(got_bc, want_bc, rtol=1e-12, atol=1e-18)
        # atol covers varsigma's zero crossings; far below its natural
        # scale of sigma^2 * (1 + 1/eta^2) ~ 5e-5
        np.testing.assert_allclose(got_vs, want_vs, rtol=1e-9, atol=1e-15)


@pytest.mark.parametrize("flag_value, expected", [("1", "numpy"), ("", "numba")])
def test_env_flag_selects_backend(flag_value, expected):
    env = dict(os.environ)
    env[ENV_FLAG] = flag_value
    out = subprocess.run(
        [sys.executable, "-c", "import magicmr; print(magicmr.active_backend())"],
        env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected
