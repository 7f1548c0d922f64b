"""Command-line interface: generate / fit / simulate with reproducible seeding.

Every command honors ``--seed`` (one is drawn and recorded when absent), and
every output file gets a sibling manifest JSON carrying the command, the full
flag echo, the seed, the package version and wall time, which is enough to
reproduce the file byte for byte.  Exit codes: 0 success, 2 validation
problem, 3 numerical failure; ``--json-errors`` mirrors the failure as a JSON
object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, bayes, datasets, mle
from .bayes import GammaPriors, LossSpec, McmcConfig
from .censoring import (
    CensoringScheme,
    SchemeError,
    generate,
    read_sample_csv,
    removals_from_shorthand,
    write_sample_csv,
)
from .distributions import WeibullParams
from .errors import EstimationError
from .shrinkage import SptConfig, spt_estimate, wald_statistic
from .simbench import ConfigError, load_config, report_to_csv, report_to_text, run_cell

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

RESULT_SCHEMA_VERSION = "phcweibull-fit-v1"


class _CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _write_manifest(path: Path, command: str, args: argparse.Namespace,
                    seed: int, wall_time: float, extra: dict | None = None) -> None:
    echo = {k: v for k, v in vars(args).items() if k != "func"}
    doc = {
        "command": command,
        "config": echo,
        "seed": seed,
        "version": __version__,
        "wall_time_s": round(wall_time, 3),
    }
    if extra:
        doc.update(extra)
    path.write_text(json.dumps(doc, indent=2, default=str) + "\n", encoding="utf-8")


def _resolve_seed(args: argparse.Namespace) -> int:
    if args.seed is not None:
        return args.seed
    return int(np.random.SeedSequence().entropy % (2 ** 31))


# ---------------------------------------------------------------------------
# generate


def _cmd_generate(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    seed = _resolve_seed(args)
    if args.from_data is not None:
        if args.from_data == "carbon-fibre":
            values = datasets.load_carbon_fibre(shift=args.shift)
        else:
            raw = Path(args.from_data).read_text(encoding="utf-8").split()
            values = np.sort(np.asarray([float(v) for v in raw])) - (args.shift or 0.0)
        n = len(values)
        removals = removals_from_shorthand(args.scheme, n, args.m)
        scheme = CensoringScheme(n=n, m=args.m, removals=removals, t_max=args.t_max)
        rng = np.random.default_rng(seed) if args.random_removals else None
        sample = datasets.censor_complete_data(values, scheme, rng)
    else:
        for flag in ("n", "alpha", "beta"):
            if getattr(args, flag) is None:
                raise _CliError(f"--{flag} is required without --from-data", EXIT_VALIDATION)
        removals = removals_from_shorthand(args.scheme, args.n, args.m)
        scheme = CensoringScheme(n=args.n, m=args.m, removals=removals, t_max=args.t_max)
        truth = WeibullParams(args.alpha, args.beta)
        sample = generate(scheme, truth, np.random.default_rng(seed))
    out = Path(args.out)
    write_sample_csv(sample, out)
    _write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "generate", args,
                    seed, time.perf_counter() - t0,
                    extra={"case": sample.case.value, "r": sample.r, "r_t": sample.r_t})
    print(f"wrote {out} ({sample.case.value}, r={sample.r})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit


def _parse_loss(args: argparse.Namespace) -> LossSpec:
    if args.loss == "sel":
        return LossSpec.sel()
    if args.loss == "linex":
        return LossSpec.linex(args.nu)
    return LossSpec.gel(args.kappa)


def _parse_priors(args: argparse.Namespace) -> GammaPriors:
    return GammaPriors(a=args.prior_a, b=args.prior_b, c=args.prior_c, d=args.prior_d)


def _solver_from_args(args: argparse.Namespace) -> mle.SolverConfig:
    defaults = mle.SolverConfig()
    start = None
    if args.start is not None:
        parts = [float(v) for v in args.start.split(",")]
        if len(parts) != 2:
            raise _CliError("--start must be 'alpha,beta'", EXIT_VALIDATION)
        start = WeibullParams(*parts)
    return mle.SolverConfig(
        epsilon=args.epsilon if args.epsilon is not None else defaults.epsilon,
        max_iters=args.max_iters if args.max_iters is not None else defaults.max_iters,
        mc_points=args.mc_points if args.mc_points is not None else defaults.mc_points,
        start=start,
        em_sweeps=args.em_sweeps,
        sem_burn=args.sem_burn if args.sem_burn is not None else defaults.sem_burn,
        sem_window=args.sem_window if args.sem_window is not None else defaults.sem_window,
    )


def _interval_payload(kind, level, ci_alpha, ci_beta, note=None) -> dict:
    return {
        "kind": kind,
        "level": level,
        "alpha": list(ci_alpha) if ci_alpha is not None else None,
        "beta": list(ci_beta) if ci_beta is not None else None,
        "note": note,
    }


def _cmd_fit(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    seed = _resolve_seed(args)
    rng = np.random.default_rng(seed)
    sample = read_sample_csv(args.data)
    priors = _parse_priors(args)
    loss = _parse_loss(args)
    method = args.method

    result: dict = {
        "version": RESULT_SCHEMA_VERSION,
        "method": method,
        "data": str(args.data),
        "case": sample.case.value,
        "r": sample.r,
    }
    if method in ("nr", "em", "sem"):
        cfg = _solver_from_args(args)
        fitter = {"nr": mle.fit_nr, "em": mle.fit_em, "sem": mle.fit_sem}[method]
        if method == "nr":
            fit = fitter(sample, cfg, level=args.level)
        else:
            fit = fitter(sample, cfg, rng, level=args.level)
        result["estimates"] = {"alpha": fit.estimate.alpha, "beta": fit.estimate.beta}
        result["intervals"] = _interval_payload(
            "asymptotic", args.level, fit.ci_alpha, fit.ci_beta, fit.ci_note)
        result["diagnostics"] = {
            "iterations": fit.iterations,
            "converged": fit.converged,
        }
    elif method == "tk":
        est = bayes.tk_estimate(sample, priors, loss)
        result["estimates"] = {"alpha": est.alpha, "beta": est.beta}
        result["intervals"] = _interval_payload(None, args.level, None, None,
                                                "Tierney-Kadane produces no intervals")
        result["diagnostics"] = {"loss": loss.label(), "priors": vars(priors)}
    elif method == "mcmc":
        cfg = McmcConfig(n_total=args.mcmc_total, n_burn=args.mcmc_burn)
        chain = bayes.mh_sample(sample, priors, cfg, rng)
        a_hat = bayes.point_estimate(chain.alphas, loss)
        b_hat = bayes.point_estimate(chain.betas, loss)
        ci_a, ci_b = bayes.hpd_interval(chain, args.level)
        result["estimates"] = {"alpha": a_hat, "beta": b_hat}
        result["intervals"] = _interval_payload("hpd", args.level, ci_a, ci_b)
        result["diagnostics"] = {
            "loss": loss.label(),
            "priors": vars(priors),
            "acceptance_rate": chain.acceptance_rate,
            "n_total": cfg.n_total,
            "n_burn": cfg.n_burn,
        }
        if args.chain_out:
            bayes.export_chain_csv(chain, args.chain_out)
            result["diagnostics"]["chain_csv"] = args.chain_out
    else:  # spt
        nr_fit = mle.fit_nr(sample, level=args.level)
        if args.theta0_alpha is None or args.theta0_beta is None:
            # no external prior guess: anchor the blend at the posterior-mean fit
            anchor = bayes.tk_estimate(sample, priors, LossSpec.sel())
            theta0_a = args.theta0_alpha if args.theta0_alpha is not None else anchor.alpha
            theta0_b = args.theta0_beta if args.theta0_beta is not None else anchor.beta
        else:
            theta0_a, theta0_b = args.theta0_alpha, args.theta0_beta
        cfg = SptConfig(theta0_alpha=theta0_a, theta0_beta=theta0_b,
                        weight=args.spt_weight, test_level=args.spt_test_level,
                        mode=args.spt_mode)
        if args.spt_base == "nr":
            base_a, base_b = nr_fit.estimate.alpha, nr_fit.estimate.beta
        else:
            base = bayes.tk_estimate(sample, priors, loss)
            base_a, base_b = base.alpha, base.beta
        cov = nr_fit.info.inverse()
        w_a = wald_statistic(base_a, theta0_a, cov[0, 0])
        w_b = wald_statistic(base_b, theta0_b, cov[1, 1])
        result["estimates"] = {
            "alpha": spt_estimate(base_a, w_a, cfg, "alpha"),
            "beta": spt_estimate(base_b, w_b, cfg, "beta"),
        }
        result["intervals"] = _interval_payload(None, args.level, None, None,
                                                "shrinkage estimator has no intervals")
        result["diagnostics"] = {
            "base": args.spt_base,
            "theta0": {"alpha": theta0_a, "beta": theta0_b},
            "wald": {"alpha": w_a, "beta": w_b},
            "critical_value": cfg.critical_value(),
            "mode": cfg.mode,
        }

    payload = json.dumps(result, indent=2) + "\n"
    if args.out:
        out = Path(args.out)
        out.write_text(payload, encoding="utf-8")
        _write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "fit", args,
                        seed, time.perf_counter() - t0)
        print(f"wrote {out}")
    else:
        sys.stdout.write(payload)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def _resolve_config(name: str) -> str | Path:
    path = Path(name)
    if path.exists():
        return path
    bundled = resources.files("phcweibull.configs").joinpath(f"{name}.json")
    if bundled.is_file():
        return bundled  # type: ignore[return-value]
    raise _CliError(f"config {name!r} is neither a file nor a bundled config",
                    EXIT_VALIDATION)


def _cmd_simulate(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    ref = _resolve_config(args.config)
    if hasattr(ref, "read_text") and not isinstance(ref, Path):
        import io

        cells = load_config(io.StringIO(ref.read_text(encoding="utf-8")),
                            reps_override=args.reps, seed_override=args.seed)
    else:
        cells = load_config(ref, reps_override=args.reps, seed_override=args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    total_discards = {}
    for cell in cells:
        report = run_cell(cell, workers=args.workers)
        report_to_csv(report, out_dir / f"{cell.name}.csv")
        (out_dir / f"{cell.name}.txt").write_text(report_to_text(report), encoding="utf-8")
        total_discards[cell.name] = report.discarded
        print(f"cell {cell.name}: reps={report.replications} "
              f"discarded={report.discarded} -> {out_dir / (cell.name + '.csv')}")
    seed = args.seed if args.seed is not None else "from-config"
    _write_manifest(out_dir / "manifest.json", "simulate", args,
                    seed if isinstance(seed, int) else -1,
                    time.perf_counter() - t0, extra={"discards": total_discards})
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phcweibull",
        description="Weibull estimation under Type-I progressively hybrid censoring",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="draw or extract a censored sample")
    gen.add_argument("--n", type=int, default=None, help="units on test")
    gen.add_argument("--m", type=int, required=True, help="target failure count")
    gen.add_argument("--scheme", required=True,
                     help="removal vector, e.g. '(0^14,15)' or '(0^{m-1},n-m)'")
    gen.add_argument("--t-max", type=float, required=True, help="truncation time")
    gen.add_argument("--alpha", type=float, default=None, help="true shape")
    gen.add_argument("--beta", type=float, default=None, help="true scale")
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--out", required=True, help="sample CSV path")
    gen.add_argument("--from-data", default=None,
                     help="censor complete data instead: a file of values or 'carbon-fibre'")
    gen.add_argument("--shift", type=float, default=datasets.CARBON_FIBRE_SHIFT,
                     help="subtract this from complete data values (with --from-data)")
    gen.add_argument("--random-removals", action="store_true",
                     help="withdraw random survivors instead of the largest (with --from-data)")
    gen.add_argument("--json-errors", action="store_true")
    gen.set_defaults(func=_cmd_generate)

    fit = sub.add_parser("fit", help="fit a censored sample file")
    fit.add_argument("--data", required=True, help="sample CSV (from generate)")
    fit.add_argument("--method", required=True,
                     choices=["nr", "em", "sem", "tk", "mcmc", "spt"])
    fit.add_argument("--level", type=float, default=0.95)
    fit.add_argument("--seed", type=int, default=None)
    fit.add_argument("--out", default=None, help="result JSON path (stdout if omitted)")
    fit.add_argument("--prior-a", type=float, default=0.0)
    fit.add_argument("--prior-b", type=float, default=0.0)
    fit.add_argument("--prior-c", type=float, default=0.0)
    fit.add_argument("--prior-d", type=float, default=0.0)
    fit.add_argument("--loss", choices=["sel", "linex", "gel"], default="sel")
    fit.add_argument("--nu", type=float, default=0.5, help="LINEX asymmetry")
    fit.add_argument("--kappa", type=float, default=0.5, help="GEL shape")
    fit.add_argument("--epsilon", type=float, default=None)
    fit.add_argument("--max-iters", type=int, default=None)
    fit.add_argument("--mc-points", type=int, default=None)
    fit.add_argument("--em-sweeps", type=int, default=None)
    fit.add_argument("--sem-burn", type=int, default=None)
    fit.add_argument("--sem-window", type=int, default=None)
    fit.add_argument("--start", default=None, help="'alpha,beta' starting point")
    fit.add_argument("--mcmc-total", type=int, default=6000)
    fit.add_argument("--mcmc-burn", type=int, default=1000)
    fit.add_argument("--chain-out", default=None, help="save the MCMC trace CSV here")
    fit.add_argument("--spt-base", choices=["nr", "tk"], default="nr")
    fit.add_argument("--theta0-alpha", type=float, default=None,
                     help="prior guess for alpha (default: Tierney-Kadane SEL fit)")
    fit.add_argument("--theta0-beta", type=float, default=None)
    fit.add_argument("--spt-weight", type=float, default=0.5)
    fit.add_argument("--spt-test-level", type=float, default=0.05)
    fit.add_argument("--spt-mode", choices=["collapse", "conventional"], default="collapse")
    fit.add_argument("--json-errors", action="store_true")
    fit.set_defaults(func=_cmd_fit)

    sim = sub.add_parser("simulate", help="run a cell-grid config")
    sim.add_argument("--config", required=True,
                     help="config JSON path or bundled name (e.g. table1_cell1)")
    sim.add_argument("--reps", type=int, default=None, help="override replications")
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--out-dir", required=True)
    sim.add_argument("--seed", type=int, default=None, help="override config seed")
    sim.add_argument("--json-errors", action="store_true")
    sim.set_defaults(func=_cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    json_errors = getattr(args, "json_errors", False)

    def report_error(kind: str, message: str, code: int) -> int:
        if json_errors:
            sys.stderr.write(json.dumps({"error": {"kind": kind, "message": message,
                                                   "exit_code": code}}) + "\n")
        else:
            sys.stderr.write(f"phcweibull: {kind}: {message}\n")
        return code

    try:
        return args.func(args)
    except _CliError as err:
        return report_error("usage", str(err), err.code)
    except (SchemeError, ConfigError) as err:
        return report_error("validation", str(err), EXIT_VALIDATION)
    except (ValueError, OSError) as err:
        return report_error("validation", str(err), EXIT_VALIDATION)
    except EstimationError as err:
        return report_error("numerical", str(err), EXIT_NUMERICAL)


if __name__ == "__main__":
    sys.exit(main())
