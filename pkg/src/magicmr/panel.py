"""Per-SNP container for the three harmonized GWAS."""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class HarmonizedPanel:
    """Aligned per-SNP summary statistics from the exposure, mediator, and
    outcome GWAS. All arrays share one SNP order; betas are the observed
    (estimated) associations and sigmas their standard errors.
    """

    ids: np.ndarray
    beta_x_hat: np.ndarray
    sigma_x: np.ndarray
    beta_m_hat: np.ndarray
    sigma_m: np.ndarray
    beta_y_hat: np.ndarray
    sigma_y: np.ndarray

    def __len__(self):
        return self.ids.shape[0]

    @property
    def n_snps(self):
        return self.ids.shape[0]

    def subset(self, indices):
        """Panel restricted to the given positional indices (order kept)."""
        return HarmonizedPanel(
            ids=self.ids[indices],
            beta_x_hat=self.beta_x_hat[indices],
            sigma_x=self.sigma_x[indices],
            beta_m_hat=self.beta_m_hat[indices],
            sigma_m=self.sigma_m[indices],
            beta_y_hat=self.beta_y_hat[indices],
            sigma_y=self.sigma_y[indices],
        )


def build_panel(ids, beta_x_hat, sigma_x, beta_m_hat, sigma_m, beta_y_hat, sigma_y,
                validate=True):
    """Construct a HarmonizedPanel from array-likes, checking its invariants.

    Internal callers that produce panels programmatically (the simulation
    engine) may pass validate=False to skip the duplicate-id scan; anything
    built from user files must keep it on.
    """
    ids = np.asarray(ids)
    arrays = {
        "beta_x_hat": np.ascontiguousarray(beta_x_hat, dtype=np.float64),
        "sigma_x": np.ascontiguousarray(sigma_x, dtype=np.float64),
        "beta_m_hat": np.ascontiguousarray(beta_m_hat, dtype=np.float64),
        "sigma_m": np.ascontiguousarray(sigma_m, dtype=np.float64),
        "beta_y_hat": np.ascontiguousarray(beta_y_hat, dtype=np.float64),
        "sigma_y": np.ascontiguousarray(sigma_y, dtype=np.float64),
    }
    if validate:
        n = ids.shape[0]
        for name, arr in arrays.items():
            if arr.shape != (n,):
                raise ValidationError(
                    f"panel column {name} has length {arr.shape[0]}, expected {n}")
            bad = np.flatnonzero(~np.isfinite(arr))
            if bad.size:
                raise ValidationError(
                    f"panel column {name} is not finite at SNP {ids[bad[0]]!r}")
        for name in ("sigma_x", "sigma_m", "sigma_y"):
            bad = np.flatnonzero(arrays[name] <= 0.0)
            if bad.size:
                raise ValidationError(
                    f"{name} must be positive; SNP {ids[bad[0]]!r} has {arrays[name][bad[0]]}")
        if np.unique(ids).shape[0] != n:
            seen = set()
            for sid in ids.tolist():
                if sid in seen:
                    raise ValidationError(f"duplicate SNP id {sid!r} in panel")
                seen.add(sid)
    return HarmonizedPanel(ids=ids, **arrays)
