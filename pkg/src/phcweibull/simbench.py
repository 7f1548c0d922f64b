"""Monte Carlo bench: run estimator suites over censored-sampling cells.

A cell fixes a censoring scheme, a true parameter pair, an estimator list and
a replication count.  Replicates are embarrassingly parallel: each derives its
own generator stream from ``(cell seed, replicate index)``, so reports are
bit-identical for any worker count, and aggregation uses compensated sums in
replicate order.  Replicates whose sample has fewer than two failures, or on
which any estimator fails, are discarded and redrawn (and counted).
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import bayes, mle, shrinkage
from .bayes import GammaPriors, LossSpec, McmcConfig
from .censoring import CensoringScheme, PhcsSample, generate, removals_from_shorthand
from .distributions import WeibullParams
from .errors import EstimationError
from .shrinkage import SptConfig

__all__ = [
    "EstimatorSpec",
    "CellSpec",
    "BenchReport",
    "ConfigError",
    "REFERENCE_INFORMATIVE_PRIORS",
    "run_cell",
    "elicit_priors",
    "coverage_check",
    "load_config",
    "report_to_csv",
    "report_to_text",
]

# Gamma hyperparameters moment-matched to MLEs of 1000 complete size-30 samples
# at truth (0.5, 1.5); see elicit_priors.
REFERENCE_INFORMATIVE_PRIORS = GammaPriors(a=43.77, b=83.45, c=24.24, d=15.47)

_MAX_ATTEMPTS_PER_REPLICATE = 1000


class ConfigError(Exception):
    """Config file does not match the documented schema."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class EstimatorSpec:
    """One estimator inside a cell.

    ``method`` is one of nr / em / sem / tk / mcmc / spt.  ``start`` applies
    to the iterative ML fits and may be "plot" (Weibull-plot start, default),
    "truth" (start at the cell's true parameters) or an explicit pair.
    ``spt_base`` selects what feeds the shrinkage blend ("nr" or "tk").
    """

    method: str
    label: str = ""
    level: float = 0.95
    prior: GammaPriors | None = None
    loss: LossSpec | None = None
    start: str | tuple[float, float] = "plot"
    epsilon: float | None = None
    max_iters: int | None = None
    mc_points: int | None = None
    em_sweeps: int | None = None
    sem_burn: int | None = None
    sem_window: int | None = None
    n_total: int | None = None
    n_burn: int | None = None
    beta_bound: float | None = None
    spt_base: str = "nr"
    spt: SptConfig | None = None

    def __post_init__(self):
        if self.method not in ("nr", "em", "sem", "tk", "mcmc", "spt"):
            raise ValueError(f"unknown estimator method {self.method!r}")
        if self.method in ("tk", "mcmc") and self.loss is None:
            raise ValueError(f"{self.method} estimator needs a loss")
        if self.method in ("tk", "mcmc") and self.prior is None:
            raise ValueError(f"{self.method} estimator needs priors")
        if self.method == "spt":
            if self.spt_base not in ("nr", "tk"):
                raise ValueError(f"spt base must be 'nr' or 'tk', got {self.spt_base!r}")
            if self.spt_base == "tk" and (self.loss is None or self.prior is None):
                raise ValueError("tk-based spt needs a prior and a loss")
        if not self.label:
            object.__setattr__(self, "label", self._default_label())

    def _default_label(self) -> str:
        if self.method in ("nr", "em", "sem"):
            return self.method
        if self.method == "spt":
            if self.spt_base == "nr":
                return "spt-nr"
            return f"spt-tk-{self.loss.label()}"
        prior_tag = "flat" if self.prior.is_flat else "inf"
        return f"{self.method}-{prior_tag}-{self.loss.label()}"

    def solver_config(self, truth: WeibullParams) -> mle.SolverConfig:
        defaults = mle.SolverConfig()
        if self.start == "plot":
            start = None
        elif self.start == "truth":
            start = truth
        else:
            start = WeibullParams(*self.start)
        return mle.SolverConfig(
            epsilon=self.epsilon if self.epsilon is not None else defaults.epsilon,
            max_iters=self.max_iters if self.max_iters is not None else defaults.max_iters,
            mc_points=self.mc_points if self.mc_points is not None else defaults.mc_points,
            start=start,
            em_sweeps=self.em_sweeps,
            sem_burn=self.sem_burn if self.sem_burn is not None else defaults.sem_burn,
            sem_window=self.sem_window if self.sem_window is not None else defaults.sem_window,
        )


@dataclass(frozen=True)
class CellSpec:
    """One simulation cell: scheme, truth, estimator suite, replications, seed."""

    scheme: CensoringScheme
    truth: WeibullParams
    estimators: tuple[EstimatorSpec, ...]
    replications: int
    seed: int
    name: str = ""

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not self.estimators:
            raise ValueError("cell needs at least one estimator")
        labels = [e.label for e in self.estimators]
        if len(set(labels)) != len(labels):
            raise ValueError(f"estimator labels must be unique, got {labels}")
        if not self.name:
            sch = self.scheme
            object.__setattr__(
                self, "name", f"n{sch.n}_m{sch.m}_T{sch.t_max:g}"
            )


@dataclass(frozen=True)
class RowStats:
    estimator: str
    parameter: str
    avg: float
    mse: float
    il: float | None
    cp: float | None


@dataclass(frozen=True)
class BenchReport:
    """Aggregates per estimator and parameter, plus discard accounting."""

    cell: str
    truth: WeibullParams
    replications: int
    discarded: int
    rows: tuple[RowStats, ...]

    @property
    def attempts(self) -> int:
        return self.replications + self.discarded

    def row(self, estimator: str, parameter: str) -> RowStats:
        for row in self.rows:
            if row.estimator == estimator and row.parameter == parameter:
                return row
        raise KeyError(f"no row for ({estimator!r}, {parameter!r})")


def coverage_check(interval: tuple[float, float], truth: float) -> bool:
    """True when ``lo <= truth <= hi``; rejects malformed intervals."""
    lo, hi = float(interval[0]), float(interval[1])
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise ValueError(f"malformed interval {interval!r}")
    return lo <= truth <= hi


def elicit_priors(k_samples: int, n_past: int, truth: WeibullParams,
                  rng: np.random.Generator) -> GammaPriors:
    """Moment-match gamma priors to MLEs of simulated complete past samples.

    Draws ``k_samples`` complete samples of size ``n_past``, fits each by NR,
    and solves ``mean = a/b``, ``variance = a/b**2`` for each parameter's MLE
    sample (sample variance with ddof=1).
    """
    if k_samples < 2:
        raise ValueError("need at least two past samples")
    alphas = np.empty(k_samples)
    betas = np.empty(k_samples)
    scheme = CensoringScheme(n=n_past, m=n_past, removals=(0,) * n_past, t_max=np.inf)
    done = 0
    while done < k_samples:
        sample = generate(scheme, truth, rng)
        try:
            fit = mle.fit_nr(sample)
        except EstimationError:
            continue
        alphas[done] = fit.estimate.alpha
        betas[done] = fit.estimate.beta
        done += 1

    def match(values: np.ndarray) -> tuple[float, float]:
        mean = float(values.mean())
        var = float(values.var(ddof=1))
        if var <= 0.0:
            raise ValueError("degenerate MLE sample: zero variance")
        return mean * mean / var, mean / var

    a, b = match(alphas)
    c, d = match(betas)
    return GammaPriors(a=a, b=b, c=c, d=d)


# ---------------------------------------------------------------------------
# replicate execution


def _replicate_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(seed, spawn_key=(index,))
    ))


def _run_estimators(spec: CellSpec, sample: PhcsSample,
                    rng: np.random.Generator) -> dict[str, tuple]:
    """One pass of every estimator over one sample.

    Returns label -> (alpha, beta, lo_a, hi_a, lo_b, hi_b); interval slots are
    NaN for estimators that do not produce intervals.  Raises EstimationError
    on any failure, which the caller turns into a discard.
    """
    needs_nr = any(
        e.method in ("nr", "mcmc", "tk", "spt") for e in spec.estimators
    )
    nr_fit = mle.fit_nr(sample) if needs_nr else None

    out: dict[str, tuple] = {}
    nan4 = (math.nan,) * 4
    for est in spec.estimators:
        if est.method == "nr":
            if nr_fit.ci_alpha is None:
                raise EstimationError(nr_fit.ci_note or "intervals unavailable")
            if est.beta_bound is not None and nr_fit.estimate.beta > est.beta_bound:
                # mirrors a bounded-box solver declaring non-convergence when
                # the scale estimate hits its search bound
                raise EstimationError(
                    f"scale estimate {nr_fit.estimate.beta:.3f} above the "
                    f"solver bound {est.beta_bound}")
            out[est.label] = (
                nr_fit.estimate.alpha, nr_fit.estimate.beta,
                nr_fit.ci_alpha[0], nr_fit.ci_alpha[1],
                nr_fit.ci_beta[0], nr_fit.ci_beta[1],
            )
        elif est.method == "em":
            fit = mle.fit_em(sample, est.solver_config(spec.truth), rng)
            out[est.label] = (fit.estimate.alpha, fit.estimate.beta) + nan4
        elif est.method == "sem":
            fit = mle.fit_sem(sample, est.solver_config(spec.truth), rng)
            out[est.label] = (fit.estimate.alpha, fit.estimate.beta) + nan4
        elif est.method == "tk":
            tk = bayes.tk_estimate(sample, est.prior, est.loss,
                                   alpha_start=nr_fit.estimate.alpha)
            out[est.label] = (tk.alpha, tk.beta) + nan4
        elif est.method == "mcmc":
            cfg = McmcConfig(
                n_total=est.n_total or 6000,
                n_burn=est.n_burn if est.n_burn is not None else 1000,
                start=nr_fit.estimate,
            )
            chain = bayes.mh_sample(sample, est.prior, cfg, rng)
            a_hat = bayes.point_estimate(chain.alphas, est.loss)
            b_hat = bayes.point_estimate(chain.betas, est.loss)
            (lo_a, hi_a), (lo_b, hi_b) = bayes.hpd_interval(chain, est.level)
            out[est.label] = (a_hat, b_hat, lo_a, hi_a, lo_b, hi_b)
        else:  # spt
            cfg = est.spt or SptConfig()
            if est.spt_base == "nr":
                base_a, base_b = nr_fit.estimate.alpha, nr_fit.estimate.beta
            else:
                tk = bayes.tk_estimate(sample, est.prior, est.loss,
                                       alpha_start=nr_fit.estimate.alpha)
                base_a, base_b = tk.alpha, tk.beta
            cov = nr_fit.info.inverse()
            w_a = shrinkage.wald_statistic(base_a, cfg.theta0_alpha, cov[0, 0])
            w_b = shrinkage.wald_statistic(base_b, cfg.theta0_beta, cov[1, 1])
            out[est.label] = (
                shrinkage.spt_estimate(base_a, w_a, cfg, "alpha"),
                shrinkage.spt_estimate(base_b, w_b, cfg, "beta"),
            ) + nan4
    return out


def _run_replicate(spec: CellSpec, index: int) -> tuple[dict[str, tuple], int]:
    rng = _replicate_rng(spec.seed, index)
    discards = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for _ in range(_MAX_ATTEMPTS_PER_REPLICATE):
            sample = generate(spec.scheme, spec.truth, rng)
            if sample.r < 2:
                discards += 1
                continue
            try:
                return _run_estimators(spec, sample, rng), discards
            except EstimationError:
                discards += 1
    raise RuntimeError(
        f"replicate {index}: {_MAX_ATTEMPTS_PER_REPLICATE} attempts all failed"
    )


def _run_batch(args: tuple[CellSpec, int, int]) -> list[tuple[dict[str, tuple], int]]:
    spec, start, stop = args
    return [_run_replicate(spec, i) for i in range(start, stop)]


def _loss_mse(mode: str, estimates: list[float], truth: float,
              loss: LossSpec | None) -> float:
    if loss is None or loss.kind == "sel" or mode == "quadratic":
        return math.fsum((e - truth) ** 2 for e in estimates) / len(estimates)
    if loss.kind == "linex":
        nu = loss.shape
        return math.fsum(
            math.exp(nu * (e - truth)) - nu * (e - truth) - 1.0 for e in estimates
        ) / len(estimates)
    kappa = loss.shape
    return math.fsum(
        (e / truth) ** kappa - kappa * math.log(e / truth) - 1.0 for e in estimates
    ) / len(estimates)


def run_cell(spec: CellSpec, workers: int = 1) -> BenchReport:
    """Run every replicate of a cell and aggregate Avg, MSE, IL and CP.

    ``workers > 1`` fans replicates out over processes; per-replicate streams
    and ordered compensated reduction make the report identical for any
    worker count.
    """
    if workers < 1:
        raise ValueError("workers must be at least 1")
    reps = spec.replications
    if workers == 1:
        records = [_run_replicate(spec, i) for i in range(reps)]
    else:
        chunk = max(1, math.ceil(reps / (workers * 4)))
        batches = [(spec, lo, min(lo + chunk, reps)) for lo in range(0, reps, chunk)]
        records = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for batch in pool.map(_run_batch, batches):
                records.extend(batch)

    discarded = sum(d for _, d in records)
    rows: list[RowStats] = []
    for est in spec.estimators:
        values = [rec[est.label] for rec, _ in records]
        # MSE is quadratic except for the LINEX/GEL posterior functionals,
        # which are scored by their own risks
        mse_mode = "loss" if est.method in ("tk", "mcmc") else "quadratic"
        for pi, parameter in enumerate(("alpha", "beta")):
            truth_val = spec.truth.alpha if parameter == "alpha" else spec.truth.beta
            estimates = [v[pi] for v in values]
            avg = math.fsum(estimates) / reps
            mse = _loss_mse(mse_mode, estimates, truth_val, est.loss)
            lo_idx, hi_idx = (2, 3) if parameter == "alpha" else (4, 5)
            lengths = [v[hi_idx] - v[lo_idx] for v in values
                       if not math.isnan(v[lo_idx])]
            if lengths:
                il = math.fsum(lengths) / len(lengths)
                covered = [
                    coverage_check((v[lo_idx], v[hi_idx]), truth_val)
                    for v in values if not math.isnan(v[lo_idx])
                ]
                cp = 100.0 * math.fsum(map(float, covered)) / len(covered)
            else:
                il = cp = None
            rows.append(RowStats(est.label, parameter, avg, mse, il, cp))
    return BenchReport(
        cell=spec.name,
        truth=spec.truth,
        replications=reps,
        discarded=discarded,
        rows=tuple(rows),
    )


# ---------------------------------------------------------------------------
# report serialization


def report_to_csv(report: BenchReport, path_or_buf) -> None:
    """One row per estimator and parameter."""
    lines = ["cell,estimator,parameter,avg,mse,il,cp,replications,discarded"]
    for row in report.rows:
        il = "" if row.il is None else repr(float(row.il))
        cp = "" if row.cp is None else repr(float(row.cp))
        lines.append(
            f"{report.cell},{row.estimator},{row.parameter},{float(row.avg)!r},{float(row.mse)!r},"
            f"{il},{cp},{report.replications},{report.discarded}"
        )
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w", encoding="utf-8") as fh:
            fh.write(text)


def report_to_text(report: BenchReport) -> str:
    """Fixed-width table with Avg/MSE (and IL/CP where defined) per parameter."""
    header = (
        f"cell {report.cell}  truth alpha={report.truth.alpha:g} "
        f"beta={report.truth.beta:g}  reps={report.replications} "
        f"discarded={report.discarded}"
    )
    cols = f"{'estimator':<22}{'par':<7}{'Avg':>10}{'MSE':>10}{'IL':>10}{'CP':>8}"
    lines = [header, cols, "-" * len(cols)]
    for row in report.rows:
        il = f"{row.il:10.4f}" if row.il is not None else f"{'-':>10}"
        cp = f"{row.cp:8.2f}" if row.cp is not None else f"{'-':>8}"
        lines.append(
            f"{row.estimator:<22}{row.parameter:<7}{row.avg:10.4f}{row.mse:10.4f}{il}{cp}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# declarative cell-grid configs


def _config_error(path: str, message: str):
    raise ConfigError(path, message)


def _parse_prior(value, path: str) -> GammaPriors:
    if value == "flat" or value == "noninformative":
        return GammaPriors()
    if value == "informative":
        return REFERENCE_INFORMATIVE_PRIORS
    if isinstance(value, (list, tuple)) and len(value) == 4:
        try:
            return GammaPriors(*[float(v) for v in value])
        except (TypeError, ValueError) as err:
            _config_error(path, f"bad prior values: {err}")
    _config_error(path, f"prior must be 'flat', 'informative' or [a,b,c,d], got {value!r}")


def _parse_loss(value, path: str) -> LossSpec:
    if value == "sel":
        return LossSpec.sel()
    if isinstance(value, dict):
        kind = value.get("kind")
        try:
            if kind == "sel":
                return LossSpec.sel()
            if kind == "linex":
                return LossSpec.linex(float(value["nu"]))
            if kind == "gel":
                return LossSpec.gel(float(value["kappa"]))
        except (KeyError, TypeError, ValueError) as err:
            _config_error(path, f"bad loss spec: {err}")
    _config_error(path, f"loss must be 'sel' or {{kind, nu|kappa}}, got {value!r}")


def _parse_estimator(obj, path: str) -> EstimatorSpec:
    if not isinstance(obj, dict):
        _config_error(path, f"estimator entry must be an object, got {obj!r}")
    method = obj.get("method")
    if method not in ("nr", "em", "sem", "tk", "mcmc", "spt"):
        _config_error(f"{path}.method", f"unknown method {method!r}")
    allowed = {
        "method", "label", "level", "prior", "loss", "start", "epsilon",
        "max_iters", "mc_points", "em_sweeps", "sem_burn", "sem_window",
        "n_total", "n_burn", "beta_bound", "base", "theta0", "weight",
        "test_level", "mode",
    }
    for key in obj:
        if key not in allowed:
            _config_error(f"{path}.{key}", "unknown field")
    kwargs: dict = {"method": method, "label": obj.get("label", "")}
    if "level" in obj:
        kwargs["level"] = float(obj["level"])
    if "prior" in obj:
        kwargs["prior"] = _parse_prior(obj["prior"], f"{path}.prior")
    if "loss" in obj:
        kwargs["loss"] = _parse_loss(obj["loss"], f"{path}.loss")
    if "start" in obj:
        start = obj["start"]
        if start in ("plot", "truth"):
            kwargs["start"] = start
        elif isinstance(start, (list, tuple)) and len(start) == 2:
            kwargs["start"] = (float(start[0]), float(start[1]))
        else:
            _config_error(f"{path}.start", f"must be 'plot', 'truth' or [alpha, beta]")
    for key in ("epsilon", "beta_bound"):
        if key in obj:
            kwargs[key] = float(obj[key])
    for key in ("max_iters", "mc_points", "em_sweeps", "sem_burn", "sem_window", "n_total", "n_burn"):
        if key in obj:
            value = obj[key]
            if not isinstance(value, int) or value < 0:
                _config_error(f"{path}.{key}", f"must be a nonnegative integer, got {value!r}")
            kwargs[key] = value
    if method == "spt":
        kwargs["spt_base"] = obj.get("base", "nr")
        theta0 = obj.get("theta0", [0.7, 1.7])
        if not (isinstance(theta0, (list, tuple)) and len(theta0) == 2):
            _config_error(f"{path}.theta0", f"must be [alpha0, beta0], got {theta0!r}")
        try:
            kwargs["spt"] = SptConfig(
                theta0_alpha=float(theta0[0]),
                theta0_beta=float(theta0[1]),
                weight=float(obj.get("weight", 0.5)),
                test_level=float(obj.get("test_level", 0.05)),
                mode=obj.get("mode", "collapse"),
            )
        except ValueError as err:
            _config_error(path, str(err))
    try:
        return EstimatorSpec(**kwargs)
    except ValueError as err:
        _config_error(path, str(err))


def load_config(path_or_buf, reps_override: int | None = None,
                seed_override: int | None = None) -> list[CellSpec]:
    """Parse a JSON cell-grid config into runnable cell specs.

    Schema (see README for the full description)::

        {"seed": int, "replications": int,
         "cells": [{"name": str, "n": int, "m": int, "scheme": str|[ints],
                    "t_max": float, "truth": {"alpha": float, "beta": float},
                    "estimators": [...]}]}
    """
    if hasattr(path_or_buf, "read"):
        raw = path_or_buf.read()
    else:
        with open(path_or_buf, "r", encoding="utf-8") as fh:
            raw = fh.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as err:
        raise ConfigError("<document>", f"not valid JSON: {err}") from err
    if not isinstance(doc, dict):
        _config_error("<document>", "top level must be an object")
    for req in ("seed", "replications", "cells"):
        if req not in doc:
            _config_error(f"<document>.{req}", "required field missing")
    seed = seed_override if seed_override is not None else doc["seed"]
    if not isinstance(seed, int):
        _config_error("seed", f"must be an integer, got {doc['seed']!r}")
    reps = reps_override if reps_override is not None else doc["replications"]
    if not isinstance(reps, int) or reps < 1:
        _config_error("replications", f"must be a positive integer, got {reps!r}")
    if not isinstance(doc["cells"], list) or not doc["cells"]:
        _config_error("cells", "must be a non-empty array")

    cells: list[CellSpec] = []
    for ci, cell in enumerate(doc["cells"]):
        where = f"cells[{ci}]"
        if not isinstance(cell, dict):
            _config_error(where, "cell must be an object")
        for req in ("n", "m", "scheme", "t_max", "truth", "estimators"):
            if req not in cell:
                _config_error(f"{where}.{req}", "required field missing")
        n, m = cell["n"], cell["m"]
        if not (isinstance(n, int) and isinstance(m, int)):
            _config_error(f"{where}.n", "n and m must be integers")
        scheme_field = cell["scheme"]
        try:
            if isinstance(scheme_field, str):
                removals = removals_from_shorthand(scheme_field, n, m)
            elif isinstance(scheme_field, list):
                removals = tuple(int(v) for v in scheme_field)
            else:
                _config_error(f"{where}.scheme", f"must be a string or list")
            scheme = CensoringScheme(n=n, m=m, removals=removals,
                                     t_max=float(cell["t_max"]))
        except ValueError as err:
            raise ConfigError(f"{where}.scheme", str(err)) from err
        truth_obj = cell["truth"]
        if not (isinstance(truth_obj, dict) and "alpha" in truth_obj and "beta" in truth_obj):
            _config_error(f"{where}.truth", "must be {alpha, beta}")
        try:
            truth = WeibullParams(float(truth_obj["alpha"]), float(truth_obj["beta"]))
        except ValueError as err:
            raise ConfigError(f"{where}.truth", str(err)) from err
        if not isinstance(cell["estimators"], list) or not cell["estimators"]:
            _config_error(f"{where}.estimators", "must be a non-empty array")
        estimators = tuple(
            _parse_estimator(e, f"{where}.estimators[{ei}]")
            for ei, e in enumerate(cell["estimators"])
        )
        try:
            cells.append(CellSpec(
                scheme=scheme,
                truth=truth,
                estimators=estimators,
                replications=reps,
                seed=seed + ci,
                name=cell.get("name", ""),
            ))
        except ValueError as err:
            raise ConfigError(where, str(err)) from err
    return cells
