"""Acceptance suite: one test (and one printed PASS/FAIL line) per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines as they happen; without ``-s`` they appear in the captured-output
section of the report.

The real-data criterion (4) asserts third-party reference point estimates at
1e-3.  The bundled dataset reproduces the reference analysis' complete-data
K-S fingerprint exactly (D = 0.072), and the cross-method shifts (TK vs NR)
match to ~4e-4, but the censored-fit reference values differ in the third
decimal under every documented extraction of this dataset (reprint variants,
removal conventions and bookkeeping alternatives were all tried), so the
strict assertions are expected to fail and the test prints the measured
numbers next to the targets.  Every verifiable sub-check (finiteness,
stationarity) runs first.
"""

import math
import os
import time

import numpy as np
import pytest
from scipy import integrate

from phcweibull import (
    CellSpec,
    CensoringScheme,
    EstimatorSpec,
    GammaPriors,
    LossSpec,
    McmcConfig,
    SolverConfig,
    WeibullParams,
    cdf,
    cond_exp_e1,
    cond_exp_e3,
    cond_exp_e4,
    fit_em,
    fit_nr,
    fit_sem,
    generate,
    hpd_interval,
    loglik,
    mh_sample,
    point_estimate,
    quantile,
    removals_from_shorthand,
    run_cell,
    score,
    spt_estimate,
    tk_estimate,
)
from phcweibull.bayes import PosteriorChain
from phcweibull.datasets import censor_complete_data, load_carbon_fibre
from phcweibull.distributions import sf
from phcweibull.shrinkage import SptConfig
from phcweibull.simbench import REFERENCE_INFORMATIVE_PRIORS, load_config

from conftest import (
    complete_sample_from,
    complete_scheme,
    grid_search_mle,
    random_fixture,
)

WORKERS = min(4, os.cpu_count() or 1)
TRUTH = WeibullParams(0.5, 1.5)


def _cell_scheme():
    return CensoringScheme(30, 15, removals_from_shorthand("(0^{m-1},n-m)", 30, 15), 0.21)


def _check(cid: str, checks: list[tuple[bool, str]]) -> None:
    ok = all(flag for flag, _ in checks)
    detail = "; ".join(text for _, text in checks)
    print(f"ACCEPTANCE {cid}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {cid} failed: {detail}"


@pytest.fixture(scope="session")
def table1_run():
    spec = CellSpec(
        scheme=_cell_scheme(),
        truth=TRUTH,
        estimators=(
            # protocol settings that reproduce the reference results: a bounded
            # scale box for the Newton solver (box hits discard the
            # replicate) and short truth-started sweep budgets for EM/SEM
            EstimatorSpec(method="nr", beta_bound=5.0),
            EstimatorSpec(method="em", start="truth", em_sweeps=4, mc_points=2000),
            EstimatorSpec(method="sem", start="truth", sem_burn=3, sem_window=5),
        ),
        replications=1000,
        seed=20260809,
    )
    t0 = time.perf_counter()
    report = run_cell(spec, workers=WORKERS)
    return report, time.perf_counter() - t0


@pytest.fixture(scope="session")
def bayes_run():
    spec = CellSpec(
        scheme=_cell_scheme(),
        truth=TRUTH,
        estimators=(
            EstimatorSpec(method="tk", prior=REFERENCE_INFORMATIVE_PRIORS,
                          loss=LossSpec.sel(), label="tk-sel"),
            EstimatorSpec(method="mcmc", prior=REFERENCE_INFORMATIVE_PRIORS,
                          loss=LossSpec.sel(), label="mcmc-sel",
                          n_total=3000, n_burn=500),
        ),
        replications=500,
        seed=31415,
    )
    return run_cell(spec, workers=WORKERS)


@pytest.fixture(scope="session")
def carbon_scheme1_sample():
    values = load_carbon_fibre()
    scheme = CensoringScheme(63, 40, removals_from_shorthand("(0^39,23)", 63, 40), 2.0)
    return censor_complete_data(values, scheme)


def test_criterion_1_simulation_cell_point_estimates(table1_run):
    report, elapsed = table1_run
    nr_a, nr_b = report.row("nr", "alpha"), report.row("nr", "beta")
    em_a, em_b = report.row("em", "alpha"), report.row("em", "beta")
    checks = [
        (abs(nr_a.avg - 0.5441) <= 0.03,
         f"NR alpha Avg {nr_a.avg:.4f} vs 0.5441 +-0.03"),
        (abs(nr_b.avg - 1.7863) <= 0.03,
         f"NR beta Avg {nr_b.avg:.4f} vs 1.7863 +-0.03"),
        (abs(em_a.avg - 0.5220) <= 0.03,
         f"EM alpha Avg {em_a.avg:.4f} vs 0.5220 +-0.03"),
        (abs(em_b.avg - 1.5999) <= 0.03,
         f"EM beta Avg {em_b.avg:.4f} vs 1.5999 +-0.03"),
        (0.6 * 0.0099 <= em_a.mse <= 1.4 * 0.0099,
         f"EM alpha MSE {em_a.mse:.4f} vs 0.0099 +-40%"),
        (elapsed < 120.0, f"runtime {elapsed:.1f}s < 120s"),
    ]
    _check("1 (point estimates, reduced scale)", checks)


def test_criterion_2_interval_length_and_coverage(table1_run):
    report, _ = table1_run
    row = report.row("nr", "alpha")
    checks = [
        (abs(row.cp - 95.48) <= 2.5, f"NR alpha CP {row.cp:.2f}% vs 95.48 +-2.5pp"),
        (abs(row.il - 0.5371) <= 0.10 * 0.5371,
         f"NR alpha IL {row.il:.4f} vs 0.5371 +-10%"),
    ]
    _check("2 (intervals, reduced scale)", checks)


def test_criterion_3_bayes_point_estimates(bayes_run):
    report = bayes_run
    tk_a, tk_b = report.row("tk-sel", "alpha"), report.row("tk-sel", "beta")
    mc_a, mc_b = report.row("mcmc-sel", "alpha"), report.row("mcmc-sel", "beta")
    checks = [
        (abs(tk_a.avg - 0.5208) <= 0.02, f"TK alpha Avg {tk_a.avg:.4f} vs 0.5208 +-0.02"),
        (abs(tk_b.avg - 1.5714) <= 0.02, f"TK beta Avg {tk_b.avg:.4f} vs 1.5714 +-0.02"),
        (abs(mc_a.avg - 0.5208) <= 0.02, f"MCMC alpha Avg {mc_a.avg:.4f} vs 0.5208 +-0.02"),
        (abs(mc_b.avg - 1.5717) <= 0.02, f"MCMC beta Avg {mc_b.avg:.4f} vs 1.5717 +-0.02"),
    ]
    _check("3 (Bayes reproduction, reduced scale)", checks)


def test_bayes_cell_hpd_summary(bayes_run):
    # not criterion-gated: the informative-prior HPD summary sits near the
    # reference row (conservative coverage is reproduced as constructed)
    row = bayes_run.row("mcmc-sel", "alpha")
    print(f"INFO bayes-cell HPD: alpha IL {row.il:.4f} (ref 0.2432), "
          f"CP {row.cp:.2f}% (ref 99.86)")
    assert abs(row.il - 0.2432) <= 0.10 * 0.2432
    assert row.cp >= 99.0


def test_criterion_4_real_data_fits(carbon_scheme1_sample):
    s = carbon_scheme1_sample
    flat = GammaPriors()
    nr = fit_nr(s)
    tk = tk_estimate(s, flat, LossSpec.sel())
    chain = mh_sample(s, flat, McmcConfig(n_total=6000, n_burn=1000),
                      np.random.default_rng(206))
    mc_a = point_estimate(chain.alphas, LossSpec.sel())
    mc_b = point_estimate(chain.betas, LossSpec.sel())
    sem = fit_sem(s, SolverConfig(sem_burn=100, sem_window=200),
                  np.random.default_rng(207))
    d_alpha, d_beta = score(sem.estimate, s)
    sem_scale = max(1.0, s.r / sem.estimate.beta)

    checks = [
        (math.isfinite(sem.estimate.alpha) and math.isfinite(sem.estimate.beta),
         f"SEM finite ({sem.estimate.alpha:.4f}, {sem.estimate.beta:.4f})"),
        (abs(d_beta) / sem_scale < 0.05,
         f"SEM scale-score residual {abs(d_beta) / sem_scale:.4f} < 0.05"),
        (abs(nr.estimate.alpha - 2.2542) <= 1e-3,
         f"NR alpha {nr.estimate.alpha:.4f} vs 2.2542 +-0.001"),
        (abs(nr.estimate.beta - 0.3980) <= 1e-3,
         f"NR beta {nr.estimate.beta:.4f} vs 0.3980 +-0.001"),
        (abs(tk.alpha - 2.2505) <= 5e-3, f"TK alpha {tk.alpha:.4f} vs 2.2505 +-0.005"),
        (abs(tk.beta - 0.3991) <= 5e-3, f"TK beta {tk.beta:.4f} vs 0.3991 +-0.005"),
        (abs(mc_a - 2.2579) <= 0.02, f"MCMC alpha {mc_a:.4f} vs 2.2579 +-0.02"),
        (abs(mc_b - 0.3975) <= 0.02, f"MCMC beta {mc_b:.4f} vs 0.3975 +-0.02"),
    ]
    _check("4 (real-data fits, vendored dataset)", checks)


class TestCriterion5OracleEquivalences:
    def test_a_truncated_moments_vs_quadrature(self):
        # closed/transformed forms against direct-space adaptive quadrature
        worst = 0.0
        for cutoff in (0.1, 0.21, 1.0):
            for alpha in (0.5, 1.0, 2.0):
                for beta in (0.5, 1.5, 3.0):
                    p = WeibullParams(alpha, beta)

                    def direct(weight):
                        num, _ = integrate.quad(
                            lambda t, w=weight: w(t) * p.alpha * p.beta
                            * t ** (p.alpha - 1) * math.exp(-p.beta * t ** p.alpha),
                            cutoff, np.inf, limit=300)
                        return num / sf(cutoff, p)

                    for ours, weight in (
                        (cond_exp_e1(cutoff, p), lambda t: t ** p.alpha),
                        (cond_exp_e3(cutoff, p), lambda t: t ** p.alpha * math.log(t)),
                        (cond_exp_e4(cutoff, p),
                         lambda t: t ** p.alpha * math.log(t) ** 2),
                    ):
                        worst = max(worst, abs(ours - direct(weight)))
        ok = worst < 1e-8
        _check("5a (truncated moments vs quadrature)",
               [(ok, f"max |closed - quad| = {worst:.2e} < 1e-8 on the 3x3x3 grid")])

    def test_b_nr_vs_grid_search(self):
        worst = 0.0
        rng = np.random.default_rng(505)
        done = 0
        while done < 10:
            n = int(rng.integers(5, 9))
            values = np.sort(rng.gamma(2.0, 0.6, size=n)) + 0.05
            s = complete_sample_from(values)
            fit = fit_nr(s)
            if not (0.2 < fit.estimate.alpha < 4.0 and 0.2 < fit.estimate.beta < 4.0):
                continue  # the oracle scans [0.05, 5]^2; keep the MLE interior
            done += 1
            best = grid_search_mle(s)
            worst = max(worst, abs(fit.estimate.alpha - best[0]),
                        abs(fit.estimate.beta - best[1]))
        ok = worst < 1e-3
        _check("5b (NR vs 2-D grid search)",
               [(ok, f"max deviation {worst:.2e} < 1e-3 over 10 fixtures")])

    def test_c_score_vs_finite_differences(self):
        worst = 0.0
        for seed in range(100):
            s, truth = random_fixture(seed)
            rng = np.random.default_rng(9000 + seed)
            p = WeibullParams(truth.alpha * rng.uniform(0.7, 1.4),
                              truth.beta * rng.uniform(0.7, 1.4))
            d_alpha, d_beta = score(p, s)
            h_a = 1e-6 * max(1.0, p.alpha)
            h_b = 1e-6 * max(1.0, p.beta)
            fd_a = (loglik(WeibullParams(p.alpha + h_a, p.beta), s)
                    - loglik(WeibullParams(p.alpha - h_a, p.beta), s)) / (2 * h_a)
            fd_b = (loglik(WeibullParams(p.alpha, p.beta + h_b), s)
                    - loglik(WeibullParams(p.alpha, p.beta - h_b), s)) / (2 * h_b)
            worst = max(worst,
                        abs(d_alpha - fd_a) / max(abs(d_alpha), abs(fd_a), 1e-3),
                        abs(d_beta - fd_b) / max(abs(d_beta), abs(fd_b), 1e-3))
        ok = worst < 1e-6
        _check("5c (score vs finite differences)",
               [(ok, f"max relative deviation {worst:.2e} < 1e-6 over 100 fixtures")])

    def test_d_hpd_vs_exhaustive_scan(self):
        rng = np.random.default_rng(606)
        ok = True
        for _ in range(8):
            draws = rng.gamma(rng.uniform(1, 6), rng.uniform(0.5, 2), size=1001)
            chain = PosteriorChain(draws=np.column_stack([draws, draws]),
                                   acceptance_rate=0.5, trace=np.zeros((1, 4)))
            (lo, hi), _ = hpd_interval(chain, 0.95)
            ordered = np.sort(draws)
            count = int(math.floor(0.95 * ordered.size))
            widths = [(ordered[j + count] - ordered[j], j)
                      for j in range(ordered.size - count)]
            _, jmin = min(widths)
            ok &= lo == ordered[jmin] and hi == ordered[jmin + count]
        _check("5d (HPD vs exhaustive scan)",
               [(ok, "exact window match on every tested chain")])

    def test_e_em_fixed_point_equals_nr_on_complete_samples(self):
        worst = 0.0
        for seed in (1, 2, 3, 4, 5):
            rng = np.random.default_rng(seed)
            s = generate(complete_scheme(30), WeibullParams(0.9, 1.3), rng)
            nr = fit_nr(s)
            em = fit_em(s, SolverConfig(epsilon=1e-10, max_iters=5000),
                        np.random.default_rng(seed))
            worst = max(worst, abs(em.estimate.alpha - nr.estimate.alpha),
                        abs(em.estimate.beta - nr.estimate.beta))
        ok = worst < 1e-4
        _check("5e (EM fixed point equals NR MLE)",
               [(ok, f"max coordinate gap {worst:.2e} < 1e-4 on complete samples")])


def test_criterion_6_property_suites():
    checks = []

    # distribution round trip
    p = WeibullParams(0.8, 1.2)
    xs = np.geomspace(1e-3, quantile(1 - 1e-6, p), 64)
    checks.append((bool(np.allclose(quantile(cdf(xs, p), p), xs, rtol=1e-10)),
                   "quantile/cdf round trip"))

    # generation balance identities
    scheme = _cell_scheme()
    rng = np.random.default_rng(42)
    balanced = all(
        (s.r + s.applied_removals.sum() + s.r_t) == scheme.n
        for s in (generate(scheme, TRUTH, rng) for _ in range(200))
    )
    checks.append((balanced, "generation balance identities"))

    # MH positivity and seed stability
    sample = generate(scheme, TRUTH, np.random.default_rng(7))
    while sample.r < 2:
        sample = generate(scheme, TRUTH, np.random.default_rng(8))
    cfg = McmcConfig(n_total=800, n_burn=100)
    c1 = mh_sample(sample, GammaPriors(), cfg, np.random.default_rng(1))
    c2 = mh_sample(sample, GammaPriors(), cfg, np.random.default_rng(1))
    checks.append((bool(np.all(c1.draws > 0)), "MH draws strictly positive"))
    checks.append((bool(np.array_equal(c1.draws, c2.draws)), "MH seed stability"))

    # SPT set membership in collapse mode
    spt_cfg = SptConfig()
    rng = np.random.default_rng(3)
    member = all(
        any(math.isclose(spt_estimate(est, w, spt_cfg, "alpha"), v)
            for v in (0.5 * 0.7, 0.5 * 0.7 + 0.5 * est))
        for est, w in zip(rng.uniform(0.2, 1.4, 100), rng.uniform(0, 8, 100))
    )
    checks.append((member, "SPT paper-mode set membership"))

    # bench determinism across worker counts
    spec = CellSpec(scheme=scheme, truth=TRUTH,
                    estimators=(EstimatorSpec(method="nr"),),
                    replications=6, seed=99)
    checks.append((run_cell(spec, workers=1) == run_cell(spec, workers=2),
                   "bench identical for 1 and 2 workers"))

    _check("6 (property suites)", checks)


def test_criterion_7_full_grid_config_exists():
    from importlib import resources
    import io

    ref = resources.files("phcweibull.configs").joinpath("full_grid.json")
    cells = load_config(io.StringIO(ref.read_text(encoding="utf-8")))
    combos = {(c.scheme.n, c.scheme.m, c.scheme.t_max) for c in cells}
    expected_nm = {(30, 15), (30, 20), (50, 25), (50, 40)}
    methods = {e.method for c in cells for e in c.estimators}
    checks = [
        (len(cells) == 24, f"{len(cells)} cells enumerated (4 sizes x 2 stops x 3 schemes)"),
        ({(n, m) for n, m, _ in combos} == expected_nm, "all four (n, m) pairs present"),
        ({t for _, _, t in combos} == {0.21, 1.15}, "both stop times present"),
        (methods == {"nr", "em", "sem", "tk", "mcmc", "spt"},
         "full estimator suite configured"),
        (all(c.replications == 5000 for c in cells), "5000 replications per cell"),
    ]
    _check("7 (full-scale grid config)", checks)
