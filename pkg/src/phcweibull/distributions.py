"""Two-parameter Weibull primitives in the rate parameterization.

Density ``f(x) = alpha * beta * x**(alpha-1) * exp(-beta * x**alpha)`` with
shape ``alpha > 0`` and rate-style scale ``beta > 0`` (units of x**-alpha).
Everything downstream (censored generation, likelihoods, posteriors) is built
on these four primitives, so they accept scalars or arrays and keep the tails
accurate via log1p/expm1 formulations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "WeibullParams",
    "pdf",
    "cdf",
    "quantile",
    "sample_truncated",
]


@dataclass(frozen=True)
class WeibullParams:
    """Shape/scale pair; rejects non-finite or non-positive values."""

    alpha: float
    beta: float

    def __post_init__(self):
        a, b = float(self.alpha), float(self.beta)
        if not (math.isfinite(a) and a > 0.0):
            raise ValueError(f"shape alpha must be finite and positive, got {self.alpha!r}")
        if not (math.isfinite(b) and b > 0.0):
            raise ValueError(f"scale beta must be finite and positive, got {self.beta!r}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    def as_tuple(self) -> tuple[float, float]:
        return (self.alpha, self.beta)


def _validated(x, name: str = "x"):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0) or np.any(np.isnan(arr)):
        raise ValueError(f"{name} must be nonnegative, got {x!r}")
    return arr


def pdf(x, p: WeibullParams, allow_infinite: bool = False):
    """Density at ``x >= 0``.

    For ``alpha < 1`` the density diverges at ``x = 0``; by default that point
    raises (no caller here evaluates it), set ``allow_infinite=True`` to get
    ``inf`` instead.
    """
    arr = _validated(x)
    a, b = p.alpha, p.beta
    at_zero = arr == 0.0
    if a < 1.0 and np.any(at_zero):
        if not allow_infinite:
            raise ValueError("pdf diverges at x=0 for alpha < 1")
        out = np.empty_like(arr)
        pos = ~at_zero
        out[pos] = a * b * arr[pos] ** (a - 1.0) * np.exp(-b * arr[pos] ** a)
        out[at_zero] = np.inf
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = a * b * arr ** (a - 1.0) * np.exp(-b * arr ** a)
        # alpha == 1 gives x**0 == 1 even at x = 0, so f(0) = beta as it should
        out = np.where(at_zero & (a > 1.0), 0.0, out)
    return out if out.ndim else float(out)


def cdf(x, p: WeibullParams):
    """Distribution function ``1 - exp(-beta * x**alpha)`` at ``x >= 0``."""
    arr = _validated(x)
    out = -np.expm1(-p.beta * arr ** p.alpha)
    return out if out.ndim else float(out)


def sf(x, p: WeibullParams):
    """Survival function ``exp(-beta * x**alpha)``."""
    arr = _validated(x)
    out = np.exp(-p.beta * arr ** p.alpha)
    return out if out.ndim else float(out)


def quantile(prob, p: WeibullParams):
    """Inverse CDF: ``(-log(1 - prob) / beta) ** (1 / alpha)`` for prob in (0, 1)."""
    arr = np.asarray(prob, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0) or np.any(np.isnan(arr)):
        raise ValueError(f"prob must lie strictly inside (0, 1), got {prob!r}")
    out = (-np.log1p(-arr) / p.beta) ** (1.0 / p.alpha)
    return out if out.ndim else float(out)


def _quantile_from_log_sf(log_sf, p: WeibullParams):
    # Exact inverse transform given log survival mass; used by the progressive
    # generator to avoid round-tripping through 1 - exp(log_sf).
    return (-np.asarray(log_sf, dtype=float) / p.beta) ** (1.0 / p.alpha)


def sample_truncated(lower, p: WeibullParams, u):
    """Inverse-transform draw from the Weibull left-truncated at ``lower``.

    Maps a uniform deviate ``u`` in (0, 1) to
    ``(lower**alpha - log(1 - u)/beta) ** (1/alpha)``, which follows the
    conditional law of ``Z | Z > lower`` and strictly exceeds ``lower``.
    """
    low = _validated(lower, "lower")
    uarr = np.asarray(u, dtype=float)
    if np.any(uarr <= 0.0) or np.any(uarr >= 1.0) or np.any(np.isnan(uarr)):
        raise ValueError(f"u must lie strictly inside (0, 1), got {u!r}")
    out = (low ** p.alpha - np.log1p(-uarr) / p.beta) ** (1.0 / p.alpha)
    return out if out.ndim else float(out)
