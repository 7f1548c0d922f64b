"""Observed-data log-likelihood, score, profile structure, observed information.

For a censored sample with ``r`` observed failures, removal weights
``w_i = 1 + R_i`` and terminal withdrawals ``R_T`` at ``c_end``:

    loglik = r*log(alpha*beta) + (alpha-1)*sum(log x) - beta*S0(alpha)

where ``S_k(alpha) = sum_i w_i x_i**alpha (log x_i)**k + R_T c**alpha (log c)**k``.
The score, the beta profile and the observed information are all expressed
through ``S0, S1, S2``, which keeps every formula here a few lines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .censoring import PhcsSample
from .distributions import WeibullParams
from .errors import InsufficientFailures, SingularInformation

__all__ = [
    "ObservedInfo",
    "loglik",
    "score",
    "profile_beta",
    "profile_score",
    "observed_info",
    "asymptotic_intervals",
]

# determinant guard threshold, relative to the largest matrix entry
_SINGULAR_RTOL = 1e-12


@dataclass(frozen=True)
class _SampleTerms:
    """Precomputed pieces of the likelihood that do not depend on parameters."""

    r: int
    sum_log_x: float
    logs: np.ndarray    # log of each weighted point (failures, then terminal time)
    weights: np.ndarray  # 1 + R_i for failures, R_T for the terminal point

    @classmethod
    def from_sample(cls, s: PhcsSample) -> "_SampleTerms":
        if s.r < 1:
            raise InsufficientFailures("likelihood needs at least one observed failure")
        logs = np.log(s.failures)
        weights = 1.0 + s.applied_removals.astype(float)
        if s.r_t > 0:
            logs = np.append(logs, np.log(s.c_end))
            weights = np.append(weights, float(s.r_t))
        return cls(r=s.r, sum_log_x=float(np.log(s.failures).sum()),
                   logs=logs, weights=weights)

    def power_sums(self, alpha: float) -> tuple[float, float, float]:
        """(S0, S1, S2) at the given shape."""
        powers = np.exp(alpha * self.logs)
        base = self.weights * powers
        s0 = float(base.sum())
        s1 = float((base * self.logs).sum())
        s2 = float((base * self.logs ** 2).sum())
        return s0, s1, s2

    def power_ratios(self, alpha: float) -> tuple[float, float]:
        """(S1/S0, S2/S0), overflow-safe for large alpha."""
        t = alpha * self.logs
        scaled = self.weights * np.exp(t - t.max())
        den = float(scaled.sum())
        r1 = float((scaled * self.logs).sum()) / den
        r2 = float((scaled * self.logs ** 2).sum()) / den
        return r1, r2


@dataclass(frozen=True)
class ObservedInfo:
    """Negative second partials of the log-likelihood at ``evaluated_at``."""

    i_aa: float
    i_ab: float
    i_bb: float
    evaluated_at: WeibullParams

    def matrix(self) -> np.ndarray:
        return np.array([[self.i_aa, self.i_ab], [self.i_ab, self.i_bb]])

    def inverse(self) -> np.ndarray:
        """Closed-form 2x2 inverse with a determinant guard."""
        det = self.i_aa * self.i_bb - self.i_ab ** 2
        biggest = max(abs(self.i_aa), abs(self.i_ab), abs(self.i_bb))
        if not np.isfinite(det) or det <= _SINGULAR_RTOL * biggest:
            raise SingularInformation(
                f"information singular: det={det:.3e} against scale {biggest:.3e}"
            )
        return np.array([[self.i_bb, -self.i_ab], [-self.i_ab, self.i_aa]]) / det

    def is_positive_definite(self) -> bool:
        return self.i_aa > 0.0 and (self.i_aa * self.i_bb - self.i_ab ** 2) > 0.0


def loglik(p: WeibullParams, s: PhcsSample) -> float:
    """Observed-data log-likelihood."""
    terms = _SampleTerms.from_sample(s)
    s0, _, _ = terms.power_sums(p.alpha)
    return terms.r * np.log(p.alpha * p.beta) + (p.alpha - 1.0) * terms.sum_log_x \
        - p.beta * s0


def score(p: WeibullParams, s: PhcsSample) -> tuple[float, float]:
    """Gradient of :func:`loglik` in (alpha, beta); both vanish at the MLE."""
    terms = _SampleTerms.from_sample(s)
    s0, s1, _ = terms.power_sums(p.alpha)
    d_alpha = terms.r / p.alpha + terms.sum_log_x - p.beta * s1
    d_beta = terms.r / p.beta - s0
    return float(d_alpha), float(d_beta)


def profile_beta(alpha: float, s: PhcsSample) -> float:
    """Scale that zeroes the beta score at fixed shape: ``r / S0(alpha)``."""
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    terms = _SampleTerms.from_sample(s)
    s0, _, _ = terms.power_sums(alpha)
    return terms.r / s0


def profile_score(alpha: float, s: PhcsSample) -> tuple[float, float]:
    """Profile score in alpha and its derivative, with beta eliminated.

    Returns ``(g, g')`` where ``g(alpha) = r/alpha + sum(log x) - r*S1/S0``.
    ``g`` is strictly decreasing (``g' <= -r/alpha**2``), so the root is
    unique and bracketable.
    """
    terms = _SampleTerms.from_sample(s)
    r1, r2 = terms.power_ratios(alpha)
    g = terms.r / alpha + terms.sum_log_x - terms.r * r1
    gprime = -terms.r / alpha ** 2 - terms.r * (r2 - r1 ** 2)
    return float(g), float(gprime)


def observed_info(p: WeibullParams, s: PhcsSample) -> ObservedInfo:
    """Observed information matrix (negative Hessian of :func:`loglik`)."""
    terms = _SampleTerms.from_sample(s)
    _, s1, s2 = terms.power_sums(p.alpha)
    return ObservedInfo(
        i_aa=terms.r / p.alpha ** 2 + p.beta * s2,
        i_ab=s1,
        i_bb=terms.r / p.beta ** 2,
        evaluated_at=p,
    )


def asymptotic_intervals(estimate: WeibullParams, info: ObservedInfo,
                         level: float) -> tuple[tuple[float, float], tuple[float, float]]:
    """Wald intervals ``estimate +- z * sqrt(diag(inv(info)))`` per parameter.

    Raises :class:`SingularInformation` instead of emitting intervals when the
    information matrix fails the determinant guard (near-flat likelihoods at
    tiny ``r``).
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level!r}")
    cov = info.inverse()
    if cov[0, 0] <= 0.0 or cov[1, 1] <= 0.0:
        raise SingularInformation("inverse information has non-positive variances")
    z = norm.ppf(0.5 + level / 2.0)
    half_a = z * np.sqrt(cov[0, 0])
    half_b = z * np.sqrt(cov[1, 1])
    return (
        (estimate.alpha - half_a, estimate.alpha + half_a),
        (estimate.beta - half_b, estimate.beta + half_b),
    )
