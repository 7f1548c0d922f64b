import json

import pytest

from phcweibull import datasets, read_sample_csv
from phcweibull.cli import main


def run(args):
    return main([str(a) for a in args])


GEN_ARGS = ["generate", "--n", 30, "--m", 15, "--scheme", "(0^14,15)",
            "--t-max", 0.21, "--alpha", 0.5, "--beta", 1.5, "--seed", 1]


@pytest.fixture()
def sample_file(tmp_path):
    out = tmp_path / "sample.csv"
    assert run(GEN_ARGS + ["--out", out]) == 0
    return out


class TestGenerate:
    def test_writes_sample_and_manifest(self, tmp_path, capsys):
        out = tmp_path / "s.csv"
        assert run(GEN_ARGS + ["--out", out]) == 0
        sample = read_sample_csv(out)
        assert sample.n == 30 and sample.m == 15
        manifest = json.loads((tmp_path / "s.csv.manifest.json").read_text())
        assert manifest["command"] == "generate"
        assert manifest["seed"] == 1
        assert "version" in manifest and "wall_time_s" in manifest
        assert manifest["case"] in ("I", "II")

    def test_same_seed_same_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(GEN_ARGS + ["--out", a]) == 0
        assert run(GEN_ARGS + ["--out", b]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_unseeded_run_records_drawn_seed(self, tmp_path):
        out = tmp_path / "s.csv"
        args = [a for a in GEN_ARGS if a not in ("--seed", 1)] + ["--out", out]
        assert run(args) == 0
        manifest = json.loads((tmp_path / "s.csv.manifest.json").read_text())
        assert isinstance(manifest["seed"], int)

    def test_scheme_balance_error_exits_2(self, tmp_path, capsys):
        args = ["generate", "--n", "30", "--m", "15", "--scheme", "(0^14,10)",
                "--t-max", "0.21", "--alpha", "0.5", "--beta", "1.5",
                "--out", tmp_path / "s.csv"]
        assert run(args) == 2
        assert "balance" in capsys.readouterr().err

    def test_json_errors(self, tmp_path, capsys):
        args = ["generate", "--n", "30", "--m", "15", "--scheme", "(0^14,10)",
                "--t-max", "0.21", "--alpha", "0.5", "--beta", "1.5",
                "--out", tmp_path / "s.csv", "--json-errors"]
        assert run(args) == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["exit_code"] == 2

    def test_from_carbon_fibre(self, tmp_path):
        out = tmp_path / "cf.csv"
        args = ["generate", "--m", "40", "--scheme", "(0^39,23)", "--t-max", "2",
                "--from-data", "carbon-fibre", "--out", out]
        assert run(args) == 0
        sample = read_sample_csv(out)
        assert sample.n == 63 and sample.r == 40
        assert sample.failures[0] == pytest.approx(
            datasets.load_carbon_fibre()[0])


class TestFit:
    def test_nr_json_contract(self, sample_file, capsys):
        assert run(["fit", "--data", sample_file, "--method", "nr"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["method"] == "nr"
        assert set(doc["estimates"]) == {"alpha", "beta"}
        assert doc["intervals"]["kind"] == "asymptotic"
        assert len(doc["intervals"]["alpha"]) == 2
        assert doc["diagnostics"]["converged"] is True

    def test_mcmc_hpd_and_chain_export(self, sample_file, tmp_path, capsys):
        chain_path = tmp_path / "chain.csv"
        assert run(["fit", "--data", sample_file, "--method", "mcmc",
                    "--seed", 3, "--mcmc-total", 1500, "--mcmc-burn", 300,
                    "--chain-out", chain_path]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["intervals"]["kind"] == "hpd"
        assert 0 < doc["diagnostics"]["acceptance_rate"] < 1
        header = chain_path.read_text().splitlines()[0]
        assert header == "iteration,alpha,beta,accepted"

    def test_em_and_sem_methods(self, sample_file, capsys):
        for method in ("em", "sem"):
            assert run(["fit", "--data", sample_file, "--method", method,
                        "--seed", 5, "--mc-points", 2000]) == 0
            doc = json.loads(capsys.readouterr().out)
            assert doc["estimates"]["alpha"] > 0

    def test_nr_and_em_agree_on_complete_file(self, tmp_path, capsys):
        # without censoring the EM expectation terms vanish, so both CLI
        # methods land on the same maximizer
        data = tmp_path / "complete.csv"
        assert run(["generate", "--n", 20, "--m", 20, "--scheme", "(0^20)",
                    "--t-max", 1e9, "--alpha", 1.0, "--beta", 1.0,
                    "--seed", 9, "--out", data]) == 0
        capsys.readouterr()  # drop the generate status line
        results = {}
        for method in ("nr", "em"):
            assert run(["fit", "--data", data, "--method", method,
                        "--seed", 5, "--epsilon", 1e-9, "--max-iters", 3000]) == 0
            results[method] = json.loads(capsys.readouterr().out)["estimates"]
        assert results["nr"]["alpha"] == pytest.approx(results["em"]["alpha"], abs=1e-4)
        assert results["nr"]["beta"] == pytest.approx(results["em"]["beta"], abs=1e-4)

    def test_spt_defaults_blend_with_posterior_anchor(self, sample_file, capsys):
        assert run(["fit", "--data", sample_file, "--method", "spt", "--seed", 5]) == 0
        spt_doc = json.loads(capsys.readouterr().out)
        assert run(["fit", "--data", sample_file, "--method", "nr"]) == 0
        nr_doc = json.loads(capsys.readouterr().out)
        theta0 = spt_doc["diagnostics"]["theta0"]
        accept = spt_doc["diagnostics"]["wald"]["alpha"] \
            < spt_doc["diagnostics"]["critical_value"]
        expected = 0.5 * theta0["alpha"] + (0.5 * nr_doc["estimates"]["alpha"]
                                            if accept else 0.0)
        assert spt_doc["estimates"]["alpha"] == pytest.approx(expected, rel=1e-9)

    def test_out_file_with_manifest(self, sample_file, tmp_path):
        out = tmp_path / "fit.json"
        assert run(["fit", "--data", sample_file, "--method", "nr",
                    "--seed", 2, "--out", out]) == 0
        assert json.loads(out.read_text())["method"] == "nr"
        manifest = json.loads((tmp_path / "fit.json.manifest.json").read_text())
        assert manifest["command"] == "fit"

    def test_missing_file_exits_2(self, capsys):
        assert run(["fit", "--data", "/nonexistent.csv", "--method", "nr"]) == 2

    def test_insufficient_failures_exits_3(self, tmp_path, capsys):
        bad = tmp_path / "one.csv"
        bad.write_text(
            "# phcs-sample-v1\n# n=3\n# m=2\n# t_max=1.0\n# case=II\n# r_t=2\n"
            "index,failure_time,removals_applied\n1,0.5,0\n"
        )
        assert run(["fit", "--data", bad, "--method", "nr"]) == 3


class TestSimulate:
    def _config(self, tmp_path, reps=4):
        doc = {
            "seed": 11,
            "replications": reps,
            "cells": [{
                "name": "tiny",
                "n": 30, "m": 15, "scheme": "(0^{m-1},n-m)", "t_max": 0.21,
                "truth": {"alpha": 0.5, "beta": 1.5},
                "estimators": [{"method": "nr"}],
            }],
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(doc))
        return path

    def test_writes_reports_and_manifest(self, tmp_path, capsys):
        cfg = self._config(tmp_path)
        out_dir = tmp_path / "out"
        assert run(["simulate", "--config", cfg, "--out-dir", out_dir]) == 0
        csv = (out_dir / "tiny.csv").read_text()
        assert csv.startswith("cell,estimator,parameter")
        assert (out_dir / "tiny.txt").exists()
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert "tiny" in manifest["discards"]

    def test_worker_invariance_end_to_end(self, tmp_path):
        cfg = self._config(tmp_path, reps=6)
        out1, out2 = tmp_path / "w1", tmp_path / "w2"
        assert run(["simulate", "--config", cfg, "--out-dir", out1,
                    "--workers", 1]) == 0
        assert run(["simulate", "--config", cfg, "--out-dir", out2,
                    "--workers", 2]) == 0
        assert (out1 / "tiny.csv").read_bytes() == (out2 / "tiny.csv").read_bytes()

    def test_reps_zero_is_schema_error(self, tmp_path, capsys):
        cfg = self._config(tmp_path)
        assert run(["simulate", "--config", cfg, "--out-dir", tmp_path / "x",
                    "--reps", 0]) == 2
        assert "replications" in capsys.readouterr().err

    def test_bundled_config_resolves(self, tmp_path):
        out_dir = tmp_path / "bundled"
        assert run(["simulate", "--config", "table1_cell1", "--out-dir", out_dir,
                    "--reps", 2, "--workers", 1]) == 0
        assert any(p.suffix == ".csv" for p in out_dir.iterdir())

    def test_bundled_config_reduced_run_matches_reference(self, tmp_path):
        # 200 replications of the bundled cell sit within 4 Monte Carlo
        # standard errors of the reference averages
        out_dir = tmp_path / "reduced"
        assert run(["simulate", "--config", "table1_cell1", "--out-dir", out_dir,
                    "--reps", 200, "--workers", 2]) == 0
        rows = {}
        lines = (out_dir / "n30_m15_T0.21_sch1.csv").read_text().strip().splitlines()
        for line in lines[1:]:
            f = line.split(",")
            rows[(f[1], f[2])] = {"avg": float(f[3]), "mse": float(f[4])}
        targets = {
            ("nr", "alpha"): 0.5441, ("nr", "beta"): 1.7863,
            ("em", "alpha"): 0.5220, ("em", "beta"): 1.5999,
            ("sem", "alpha"): 0.5602, ("sem", "beta"): 1.8180,
        }
        for key, want in targets.items():
            row = rows[key]
            se = (row["mse"] / 200) ** 0.5  # conservative: MSE includes bias
            assert abs(row["avg"] - want) < 4 * se, (key, row, want)

    def test_unknown_config_exits_2(self, tmp_path, capsys):
        assert run(["simulate", "--config", "no-such-config",
                    "--out-dir", tmp_path / "y"]) == 2


class TestDatasets:
    def test_carbon_fibre_shape(self):
        raw = datasets.load_carbon_fibre(shift=None)
        assert raw.size == 63
        assert raw[0] == pytest.approx(1.901)
        assert raw[-1] == pytest.approx(5.020)
        shifted = datasets.load_carbon_fibre()
        assert shifted[0] == pytest.approx(1.901 - 1.75)
