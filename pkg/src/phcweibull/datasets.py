"""Bundled reference data and helpers to censor complete datasets."""

from __future__ import annotations

from importlib import resources

import numpy as np

from .censoring import Case, CensoringScheme, PhcsSample

__all__ = ["load_carbon_fibre", "censor_complete_data"]

_CARBON_FIBRE_FILE = "carbon_fibre_10mm.csv"

# shift applied in the standard two-parameter Weibull reanalysis of this data
CARBON_FIBRE_SHIFT = 1.75


def load_carbon_fibre(shift: float | None = CARBON_FIBRE_SHIFT) -> np.ndarray:
    """Tensile strengths of 63 single carbon fibres (10 mm gauge), sorted.

    ``shift`` is subtracted from every value (default 1.75, the usual
    relocation for a two-parameter Weibull analysis); pass ``None`` or 0 for
    the raw strengths.
    """
    ref = resources.files("phcweibull.data").joinpath(_CARBON_FIBRE_FILE)
    values = [
        float(line)
        for line in ref.read_text(encoding="utf-8").splitlines()
        if line and not line.startswith("#") and not line[0].isalpha()
    ]
    arr = np.sort(np.asarray(values))
    if shift:
        arr = arr - shift
    return arr


def censor_complete_data(values, scheme: CensoringScheme,
                         rng: np.random.Generator | None = None) -> PhcsSample:
    """Extract a progressively hybrid censored sample from complete data.

    Walks the sorted values: the smallest remaining unit fails, then the
    scheme's removal count for that failure is withdrawn from the survivors
    (chosen uniformly at random when ``rng`` is given, the largest survivors
    otherwise, which keeps the extraction deterministic).  The experiment
    stops at ``min(m-th failure, t_max)`` exactly as a live test would.
    """
    pool = sorted(float(v) for v in values)
    if len(pool) != scheme.n:
        raise ValueError(f"scheme expects n={scheme.n} units, data has {len(pool)}")
    observed: list[float] = []
    applied: list[int] = []
    for removal in scheme.removals:
        if not pool:
            break
        x = pool.pop(0)
        if x > scheme.t_max:  # the test clock ran out first
            pool.insert(0, x)
            break
        observed.append(x)
        take = min(removal, len(pool))
        for _ in range(take):
            idx = int(rng.integers(len(pool))) if rng is not None else len(pool) - 1
            pool.pop(idx)
        applied.append(take)
    r = len(observed)
    if r == scheme.m:
        return PhcsSample(
            failures=np.asarray(observed),
            applied_removals=np.asarray(applied, dtype=int),
            case=Case.I,
            c_end=observed[-1],
            r_t=0,
            n=scheme.n,
            m=scheme.m,
            t_max=scheme.t_max,
        )
    return PhcsSample(
        failures=np.asarray(observed),
        applied_removals=np.asarray(applied, dtype=int),
        case=Case.II,
        c_end=scheme.t_max,
        r_t=scheme.n - r - int(sum(applied)),
        n=scheme.n,
        m=scheme.m,
        t_max=scheme.t_max,
    )
