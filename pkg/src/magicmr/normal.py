"""Standard-normal primitives and truncated-normal building blocks.

These are the numerical foundations of the selection bias correction: a
density, a CDF with full tail precision, its inverse, and the probability
mass of a standardized interval together with its complement. Scalars in,
scalars out; arrays in, arrays out.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .backend import kernels
from .errors import ValidationError

#: Floor applied to interval masses before they are used as denominators.
MASS_FLOOR = 1e-300


def _as_array(x):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    return arr.reshape(-1), np.isscalar(x) or getattr(x, "ndim", 0) == 0, np.shape(x)


def std_normal_pdf(x):
    """Density of N(0,1) at x; even in x, underflows to 0 for |x| beyond ~39."""
    flat, scalar, shape = _as_array(x)
    out = kernels.norm_pdf(flat)
    return float(out[0]) if scalar else out.reshape(shape)


def std_normal_cdf(x):
    """P(N(0,1) <= x), accurate to ~1e-15 relative in both tails."""
    flat, scalar, shape = _as_array(x)
    out = kernels.norm_cdf(flat)
    return float(out[0]) if scalar else out.reshape(shape)


def std_normal_quantile(p):
    """Inverse of std_normal_cdf on (0, 1)."""
    arr = np.asarray(p, dtype=np.float64)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise ValidationError(f"quantile argument must lie strictly in (0, 1), got {p!r}")
    out = ndtri(arr)
    return float(out) if np.isscalar(p) or arr.ndim == 0 else out


@dataclass(frozen=True)
class TailPair:
    """Standardized truncation bounds (lower, upper) with upper - lower = 2*lam/eta.

    upper and lower are the arguments fed to the normal CDF inside the bias
    correction; they derive from one standardized estimate and one (lam, eta)
    pair, so their gap is fixed by construction.
    """

    upper: float
    lower: float

    def __post_init__(self):
        if not (np.isfinite(self.upper) and np.isfinite(self.lower)):
            raise ValidationError("TailPair bounds must be finite")
        if not self.upper >= self.lower:
            raise ValidationError("TailPair requires upper >= lower")

    @classmethod
    def from_standardized(cls, t, lam, eta):
        """Bounds for a standardized estimate t = beta_hat/sigma at cutoff lam, noise sd eta."""
        return cls(upper=(-t + lam) / eta, lower=(-t - lam) / eta)


def interval_mass(t: TailPair):
    """(inside, outside) = (Phi(upper) - Phi(lower), 1 - Phi(upper) + Phi(lower)).

    The two components sum to one before flooring; each is floored at
    MASS_FLOOR so downstream divisions stay finite for truncation events of
    sub-representable probability.
    """
    upper = np.atleast_1d(np.float64(t.upper))
    lower = np.atleast_1d(np.float64(t.lower))
    inside, outside = kernels.interval_masses(upper, lower)
    return float(inside[0]), float(outside[0])
