import numpy as np
import pytest

from phcweibull import (
    Case,
    CensoringScheme,
    PhcsSample,
    WeibullParams,
    generate,
    removals_from_shorthand,
)

TRUTH = WeibullParams(0.5, 1.5)


def scheme1(n=30, m=15, t_max=0.21):
    return CensoringScheme(n, m, removals_from_shorthand("(0^{m-1},n-m)", n, m), t_max)


def complete_scheme(n):
    return CensoringScheme(n, n, (0,) * n, np.inf)


def complete_sample_from(values, t_max=None):
    v = np.sort(np.asarray(values, dtype=float))
    n = v.size
    return PhcsSample(
        failures=v,
        applied_removals=np.zeros(n, dtype=int),
        case=Case.I,
        c_end=float(v[-1]),
        r_t=0,
        n=n,
        m=n,
        t_max=t_max if t_max is not None else float(v[-1]) + 1.0,
    )


def random_fixture(seed, n_range=(10, 40), alpha_range=(0.4, 2.5),
                   beta_range=(0.5, 3.0)):
    """One random scheme + generated sample with at least two failures."""
    rng = np.random.default_rng(seed)
    while True:
        n = int(rng.integers(*n_range))
        m = int(rng.integers(max(2, n // 3), n + 1))
        cuts = np.sort(rng.integers(0, n - m + 1, size=m - 1)) if m > 1 else []
        removals = np.diff(np.concatenate(([0], cuts, [n - m]))).astype(int)
        truth = WeibullParams(rng.uniform(*alpha_range), rng.uniform(*beta_range))
        t_max = float(rng.uniform(0.5, 2.0) * truth.beta ** (-1 / truth.alpha))
        scheme = CensoringScheme(n, m, tuple(removals), t_max)
        sample = generate(scheme, truth, rng)
        if sample.r >= 2:
            return sample, truth


def grid_search_mle(sample, lo=(0.05, 0.05), hi=(5.0, 5.0), points=40, levels=10):
    """Multilevel grid-search oracle for the censored-likelihood maximizer.

    Each level re-centers a box of +-3 grid steps around the current argmax,
    wide enough to keep a curved likelihood ridge inside the refinement.
    """
    from phcweibull import WeibullParams, loglik

    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    best = None
    for _ in range(levels):
        aa = np.linspace(lo[0], hi[0], points)
        bb = np.linspace(lo[1], hi[1], points)
        vals = np.array([[loglik(WeibullParams(a, b), sample) for b in bb] for a in aa])
        i, j = np.unravel_index(np.argmax(vals), vals.shape)
        best = np.array([aa[i], bb[j]])
        step = (hi - lo) / (points - 1)
        lo = np.maximum(0.01, best - 3 * step)
        hi = best + 3 * step
    return best


@pytest.fixture(scope="session")
def case1_sample():
    """A Case I sample from the reference cell."""
    rng = np.random.default_rng(7)
    while True:
        s = generate(scheme1(), TRUTH, rng)
        if s.case is Case.I and s.r >= 2:
            return s


@pytest.fixture(scope="session")
def case2_sample():
    """A Case II sample with terminal withdrawals."""
    rng = np.random.default_rng(11)
    while True:
        s = generate(scheme1(), TRUTH, rng)
        if s.case is Case.II and s.r >= 5:
            return s


@pytest.fixture(scope="session")
def complete_sample():
    rng = np.random.default_rng(13)
    return generate(complete_scheme(25), WeibullParams(1.0, 1.0), rng)
