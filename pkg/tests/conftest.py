"""Shared fixtures: panel builders and the heavyweight Monte Carlo runs
reused by both the module tests and the acceptance suite."""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from magicmr import SimConfig, config_for_ratio
from magicmr.panel import build_panel
from magicmr.selection import (SelectionConfig, SelectionOutcome, build_bc_panel,
                               select_instruments)
from magicmr.simulation import oracle_efficiency_bench, run_replicates, summarize


def make_random_panel(rng, n, pi_signal=0.3, eps_x=0.01, eps_d=0.007,
                      theta=0.2, tau_x=0.6, tau_y=0.2, sigma=0.0031622776601683794):
    """Random nested-support panel with observation noise; returns
    (panel, truth dict)."""
    n_sig = max(2, int(round(pi_signal * n)))
    beta_x = np.zeros(n)
    beta_x[:n_sig] = rng.normal(0, eps_x, n_sig)
    delta = np.zeros(n)
    delta[: 2 * n_sig] = rng.normal(0, eps_d, min(2 * n_sig, n))
    beta_m = tau_x * beta_x + delta
    beta_y = theta * beta_x + tau_y * beta_m
    sig = np.full(n, sigma)
    panel = build_panel(
        [f"snp{i}" for i in range(n)],
        beta_x + sigma * rng.standard_normal(n), sig,
        beta_m + sigma * rng.standard_normal(n), sig,
        beta_y + sigma * rng.standard_normal(n), sig,
    )
    truth = {"beta_x": beta_x, "beta_m": beta_m, "beta_y": beta_y,
             "theta": theta, "tau_x": tau_x, "tau_y": tau_y}
    return panel, truth


def selected_panel_pieces(rng, n=400, seed=5, lam=3.0, eta=0.5):
    """Panel + realized selection + bias-corrected panel, ready for the
    estimators. A moderate cutoff keeps both selected sets well populated
    at small n."""
    panel, truth = make_random_panel(rng, n)
    cfg = SelectionConfig(lam=lam, eta=eta, seed=seed)
    sel = select_instruments(panel, cfg)
    bc = build_bc_panel(panel, sel)
    return panel, sel, bc, truth


@pytest.fixture(scope="session")
def dgp1_table():
    cfg = SimConfig(dgp="dgp1", reps=1000, seed=11)
    return run_replicates(cfg, methods=("magic", "mvmr"))


@pytest.fixture(scope="session")
def dgp1_report(dgp1_table):
    return summarize(dgp1_table)


@pytest.fixture(scope="session")
def dgp2_report():
    cfg = SimConfig(dgp="dgp2i", tau_x=0.0, reps=1000, seed=3)
    return summarize(run_replicates(cfg, methods=("magic",)))


@pytest.fixture(scope="session")
def dgp3_sweep():
    """DGP 3(i) over the tau_y grid; all estimators, 1000 replicates each."""
    grid = np.round(np.linspace(-0.2, 0.2, 9), 10)
    reports = {}
    for i, tau_y in enumerate(grid):
        cfg = SimConfig(dgp="dgp3i", tau_y=float(tau_y), reps=1000, seed=100 + i)
        reports[float(tau_y)] = summarize(
            run_replicates(cfg, methods=("magic", "plugin", "mvmr", "twostep")))
    return reports


#: Table-2-style oracle parameter blocks (pi per block, eps_x_sq, eps_delta_sq)
ORACLE_BLOCKS = {
    1: (0.0005, 5e-5, 5e-5),
    4: (0.001, 5e-5, 1e-4),
}

#: printed MCSD values per (block, ratio): {(method, parameter): value}
ORACLE_PRINTED = {
    (1, 0.1): {("oracle_dmvmr", "theta"): 0.076, ("oracle_magic", "theta"): 0.055,
               ("oracle_dmvmr", "tau_y"): 0.022, ("oracle_magic", "tau_y"): 0.022},
    (1, 1.0): {("oracle_dmvmr", "theta"): 0.057, ("oracle_magic", "theta"): 0.054,
               ("oracle_dmvmr", "tau_y"): 0.052, ("oracle_magic", "tau_y"): 0.049},
    (1, 3.0): {("oracle_dmvmr", "theta"): 0.059, ("oracle_magic", "theta"): 0.058,
               ("oracle_dmvmr", "tau_y"): 0.062, ("oracle_magic", "tau_y"): 0.058},
    (4, 0.1): {("oracle_dmvmr", "theta"): 0.050, ("oracle_magic", "theta"): 0.037,
               ("oracle_dmvmr", "tau_y"): 0.010, ("oracle_magic", "tau_y"): 0.010},
    (4, 1.0): {("oracle_dmvmr", "theta"): 0.039, ("oracle_magic", "theta"): 0.036,
               ("oracle_dmvmr", "tau_y"): 0.025, ("oracle_magic", "tau_y"): 0.024},
    (4, 3.0): {("oracle_dmvmr", "theta"): 0.039, ("oracle_magic", "theta"): 0.038,
               ("oracle_dmvmr", "tau_y"): 0.031, ("oracle_magic", "tau_y"): 0.029},
}


@pytest.fixture(scope="session")
def oracle_table2():
    reports = {}
    for block, (pi, ex2, ed2) in ORACLE_BLOCKS.items():
        for ratio in (0.1, 1.0, 3.0):
            base = SimConfig(dgp="oracle", p=100_000, pi_x_only=pi, pi_m_only=pi,
                             pi_both=pi, eps_x_sq=ex2, eps_delta_sq=ed2,
                             theta=0.2, tau_x=0.6, tau_y=0.2, sigma_sq=1e-5,
                             reps=1000, seed=7)
            reports[(block, ratio)] = oracle_efficiency_bench(
                config_for_ratio(base, ratio))
    return reports
