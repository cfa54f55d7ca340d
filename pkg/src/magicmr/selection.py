"""Rerandomized instrument selection and curse bias correction.

Selection adds independent N(0, eta^2) pseudo-noise to each standardized
association before thresholding, which makes the conditional law of the
estimate given the selection outcome tractable. The bias-corrected
estimates returned here are conditionally unbiased for the true
associations on both the selected and the unselected branch, and the
varsigma terms make their squares conditionally unbiased as well.
"""

from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .errors import ValidationError
from .rng import counter_normals

EXPOSURE_STREAM = 1
MEDIATOR_STREAM = 2


@dataclass(frozen=True)
class SelectionConfig:
    """Cutoff lam (z-scale), pseudo-noise sd eta, and the master seed."""

    lam: float
    eta: float
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam > 0.0):
            raise ValidationError(f"selection cutoff must be a positive finite value, got {self.lam}")
        if not (np.isfinite(self.eta) and self.eta > 0.0):
            raise ValidationError(f"pseudo-noise sd must be a positive finite value, got {self.eta}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValidationError("seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True)
class SelectionOutcome:
    """Realized pseudo-noise draws and membership flags for both traits."""

    z_x: np.ndarray
    z_m: np.ndarray
    in_sx: np.ndarray
    in_sm: np.ndarray
    config: SelectionConfig

    @property
    def n_sx(self):
        return int(np.count_nonzero(self.in_sx))

    @property
    def n_sm(self):
        return int(np.count_nonzero(self.in_sm))

    def __len__(self):
        return self.in_sx.shape[0]

    def subset(self, indices):
        return SelectionOutcome(
            z_x=self.z_x[indices], z_m=self.z_m[indices],
            in_sx=self.in_sx[indices], in_sm=self.in_sm[indices],
            config=self.config,
        )


@dataclass(frozen=True)
class BiasCorrectedPanel:
    """Per-SNP bias-corrected associations and squared-bias corrections."""

    beta_x_bc: np.ndarray
    varsigma_x: np.ndarray
    beta_m_bc: np.ndarray
    varsigma_m: np.ndarray

    def __len__(self):
        return self.beta_x_bc.shape[0]


def _check_sigmas(panel):
    for name in ("sigma_x", "sigma_m"):
        arr = getattr(panel, name)
        bad = np.flatnonzero(~(arr > 0.0))
        if bad.size:
            raise ValidationError(
                f"{name} must be positive; SNP {panel.ids[bad[0]]!r} has {arr[bad[0]]}")


def select_instruments(panel, cfg: SelectionConfig) -> SelectionOutcome:
    """Draw pseudo-noise and flag SNPs with |beta_hat/sigma + Z| > lam.

    Strict inequality at the cutoff; exposure and mediator use independent
    streams indexed by SNP position, so the outcome is deterministic in
    (cfg.seed, index) and independent across SNPs and traits.
    """
    _check_sigmas(panel)
    n = len(panel)
    z_x = counter_normals(cfg.seed, EXPOSURE_STREAM, n, sd=cfg.eta)
    z_m = counter_normals(cfg.seed, MEDIATOR_STREAM, n, sd=cfg.eta)
    in_sx = np.abs(panel.beta_x_hat / panel.sigma_x + z_x) > cfg.lam
    in_sm = np.abs(panel.beta_m_hat / panel.sigma_m + z_m) > cfg.lam
    return SelectionOutcome(z_x=z_x, z_m=z_m, in_sx=in_sx, in_sm=in_sm, config=cfg)


def hard_threshold_sets(panel, lam):
    """Selection without pseudo-noise: |beta_hat/sigma| > lam for each trait.

    This is the rule the comparator estimators (MVMR, DMVMR, two-step)
    use; it is intentionally a separate code path from the rerandomized
    rule rather than eta -> 0 inside it.
    """
    if not (np.isfinite(lam) and lam > 0.0):
        raise ValidationError(f"hard threshold must be a positive finite value, got {lam}")
    _check_sigmas(panel)
    in_sx = np.abs(panel.beta_x_hat / panel.sigma_x) > lam
    in_sm = np.abs(panel.beta_m_hat / panel.sigma_m) > lam
    return in_sx, in_sm


def _bias_correct(beta_hat, sigma, selected, cfg):
    beta_arr = np.atleast_1d(np.ascontiguousarray(beta_hat, dtype=np.float64))
    sigma_arr = np.atleast_1d(np.ascontiguousarray(sigma, dtype=np.float64))
    if sigma_arr.shape != beta_arr.shape:
        sigma_arr = np.broadcast_to(sigma_arr, beta_arr.shape).copy()
    if np.any(sigma_arr <= 0.0):
        raise ValidationError("sigma must be positive for bias correction")
    sel_arr = np.atleast_1d(np.asarray(selected, dtype=bool))
    if sel_arr.shape != beta_arr.shape:
        sel_arr = np.broadcast_to(sel_arr, beta_arr.shape).copy()
    beta_bc, varsigma = kernels.bias_correct(beta_arr, sigma_arr, sel_arr, cfg.lam, cfg.eta)
    if np.isscalar(beta_hat) or getattr(beta_hat, "ndim", 1) == 0:
        return float(beta_bc[0]), float(varsigma[0])
    return beta_bc, varsigma


def bias_correct_exposure(beta_hat, sigma, selected, cfg: SelectionConfig):
    """Bias-corrected exposure association and its squared-bias correction.

    `selected` is this SNP's realized exposure-selection flag; the branch
    determines which truncation denominator applies.
    """
    return _bias_correct(beta_hat, sigma, selected, cfg)


def bias_correct_mediator(beta_hat, sigma, selected, cfg: SelectionConfig):
    """Mediator-side analog of bias_correct_exposure (same closed forms)."""
    return _bias_correct(beta_hat, sigma, selected, cfg)


def build_bc_panel(panel, sel: SelectionOutcome) -> BiasCorrectedPanel:
    """Vectorized bias correction over a whole panel, both traits."""
    if len(sel) != len(panel):
        raise ValidationError(
            f"selection outcome covers {len(sel)} SNPs but panel has {len(panel)}")
    beta_x_bc, varsigma_x = _bias_correct(
        panel.beta_x_hat, panel.sigma_x, sel.in_sx, sel.config)
    beta_m_bc, varsigma_m = _bias_correct(
        panel.beta_m_hat, panel.sigma_m, sel.in_sm, sel.config)
    return BiasCorrectedPanel(
        beta_x_bc=np.atleast_1d(beta_x_bc), varsigma_x=np.atleast_1d(varsigma_x),
        beta_m_bc=np.atleast_1d(beta_m_bc), varsigma_m=np.atleast_1d(varsigma_m),
    )
