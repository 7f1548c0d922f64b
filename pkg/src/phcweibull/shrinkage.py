"""Shrinkage pre-test estimation: blend a prior guess with an estimate,
gated by a Wald test of the guess.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.stats import chi2

__all__ = ["SptConfig", "wald_statistic", "spt_estimate"]


@dataclass(frozen=True)
class SptConfig:
    """Prior guesses, shrinkage weight in [0, 1], pre-test level, and mode.

    ``mode="collapse"`` multiplies the unrestricted term by the acceptance
    indicator, so a rejection collapses the estimate to ``weight * theta0``;
    ``mode="conventional"`` keeps the unrestricted estimate on rejection.
    """

    theta0_alpha: float = 0.7
    theta0_beta: float = 1.7
    weight: float = 0.5
    test_level: float = 0.05
    mode: str = "collapse"

    def __post_init__(self):
        if not (self.theta0_alpha > 0.0 and self.theta0_beta > 0.0):
            raise ValueError("prior guesses must be positive")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"weight must lie in [0, 1], got {self.weight!r}")
        if not 0.0 < self.test_level < 1.0:
            raise ValueError(f"test_level must lie in (0, 1), got {self.test_level!r}")
        if self.mode not in ("collapse", "conventional"):
            raise ValueError(f"mode must be 'collapse' or 'conventional', got {self.mode!r}")

    def theta0(self, parameter: str) -> float:
        if parameter == "alpha":
            return self.theta0_alpha
        if parameter == "beta":
            return self.theta0_beta
        raise ValueError(f"parameter must be 'alpha' or 'beta', got {parameter!r}")

    def critical_value(self) -> float:
        return float(chi2.ppf(1.0 - self.test_level, df=1))


def wald_statistic(estimate: float, theta0: float, variance: float) -> float:
    """``(estimate - theta0)**2 / variance`` with the variance taken from the
    relevant diagonal of the inverse observed information."""
    if not (math.isfinite(variance) and variance > 0.0):
        raise ValueError(f"variance must be positive, got {variance!r}")
    return (estimate - theta0) ** 2 / variance


def spt_estimate(estimate: float, w: float, cfg: SptConfig,
                 parameter: str = "alpha") -> float:
    """Shrinkage pre-test estimate for one parameter given its Wald statistic."""
    if w < 0.0:
        raise ValueError(f"Wald statistic must be nonnegative, got {w!r}")
    theta0 = cfg.theta0(parameter)
    accepted = w < cfg.critical_value()
    if cfg.mode == "collapse":
        return cfg.weight * theta0 + (1.0 - cfg.weight) * estimate * (1.0 if accepted else 0.0)
    if accepted:
        return cfg.weight * theta0 + (1.0 - cfg.weight) * estimate
    return estimate
