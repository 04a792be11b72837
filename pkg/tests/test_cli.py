"""Tests for config parsing, CLI dispatch, exit codes, and output stability."""

import json

import numpy as np
import pytest

from rsmfg.cli import (
    EXIT_FINITE_ESCAPE,
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    EXIT_PARSE,
    bundled_config,
    load_config,
    main,
    parse_config,
    run,
)
from rsmfg.errors import ParseError
from rsmfg.model import LqgProblem, MajorMinorSpec


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def scalar_model(**overrides):
    doc = {
        "type": "single", "A": [[0.0]], "B": [[1.0]], "sigma": [[1.0]],
        "Q": [[1.0]], "R": [[1.0]], "Q_hat": [[0.0]], "delta": 0.5,
        "x0": [1.0], "T": 1.0,
    }
    doc.update(overrides)
    return doc


class TestLoadConfig:
    def test_bundled_paper_example(self):
        cfg = parse_config(bundled_config("paper_example.json"), "solve-mfg")
        model = cfg.model
        assert isinstance(model, MajorMinorSpec)
        assert model.K == 1
        assert model.major.A[0, 0] == -2.5
        assert model.major.F[0, 0] == 2.5
        assert model.major.sigma(0.0)[0, 0] == 0.5
        # raw-exponent form loads with risk loading 2 so that delta/2 = 1
        assert model.major.delta == 2.0
        assert model.minors[0].delta == 2.0
        assert model.minors[0].Q[0, 0] == 7.0

    def test_bundled_toy_model(self):
        cfg = parse_config(bundled_config("toy_model.json"), "solve-mfg")
        assert cfg.model.major.delta == 1.0
        assert np.all(cfg.model.minors[0].H_hat == 1.0)

    def test_missing_seed_in_stochastic_mode(self, tmp_path):
        doc = {"model": scalar_model(), "montecarlo": {"n_paths": 100}}
        path = write_config(tmp_path, doc)
        with pytest.raises(ParseError, match="seed required"):
            load_config(path, "verify-single")

    def test_seed_not_needed_for_solve(self, tmp_path):
        path = write_config(tmp_path, {"model": scalar_model()})
        cfg = load_config(path, "solve-single")
        assert isinstance(cfg.model, LqgProblem)

    def test_malformed_json_reports_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"model": \n !}')
        with pytest.raises(ParseError, match="line 2"):
            load_config(str(path), "solve-single")

    def test_missing_model(self, tmp_path):
        path = write_config(tmp_path, {"grid": {"steps": 100}})
        with pytest.raises(ParseError, match="model"):
            load_config(path, "solve-single")

    def test_mode_model_mismatch(self, tmp_path):
        path = write_config(tmp_path, {"model": scalar_model()})
        with pytest.raises(ParseError, match="major_minor"):
            load_config(path, "solve-mfg")

    def test_missing_file(self):
        with pytest.raises(ParseError, match="not found"):
            load_config("/nonexistent/cfg.json", "solve-single")

    def test_node_array_coefficient(self, tmp_path):
        steps = 50
        nodes = [[[0.1 * i]] for i in range(steps + 1)]
        doc = {"model": scalar_model(A={"nodes": nodes}),
               "grid": {"steps": steps}}
        cfg = load_config(write_config(tmp_path, doc), "solve-single")
        assert cfg.model.A(0.5)[0, 0] == pytest.approx(0.1 * 25)

    def test_raw_exponent_delta_conflict(self, tmp_path):
        doc = {"model": scalar_model(raw_exponent=True)}
        with pytest.raises(ParseError, match="delta"):
            load_config(write_config(tmp_path, doc), "solve-single")

    def test_validation_failure_propagates(self, tmp_path):
        doc = {"model": scalar_model(R=[[0.0]])}
        path = write_config(tmp_path, doc)
        assert main(["solve-single", "--config", path]) == EXIT_PARSE


class TestSolveSingleMode:
    def test_end_to_end(self, tmp_path):
        doc = {"model": scalar_model(), "grid": {"steps": 500},
               "output": {"directory": str(tmp_path / "out")}}
        path = write_config(tmp_path, doc)
        assert main(["solve-single", "--config", path]) == EXIT_OK
        out = tmp_path / "out"
        assert (out / "manifest.json").exists()
        assert (out / "solution.csv").exists()
        rows = (out / "scalars.csv").read_text().splitlines()
        name, value = rows[1].split(",")
        assert name == "C_star"
        assert np.isfinite(float(value))

    def test_byte_stable_rerun(self, tmp_path):
        doc = {"model": scalar_model(), "grid": {"steps": 200}}
        path = write_config(tmp_path, doc)
        assert main(["solve-single", "--config", path,
                     "--out", str(tmp_path / "a")]) == EXIT_OK
        assert main(["solve-single", "--config", path,
                     "--out", str(tmp_path / "b")]) == EXIT_OK
        for name in ("manifest.json", "solution.csv", "scalars.csv"):
            assert (tmp_path / "a" / name).read_bytes() \
                == (tmp_path / "b" / name).read_bytes()

    def test_manifest_hash_tracks_numerics(self, tmp_path):
        doc1 = {"model": scalar_model(), "grid": {"steps": 200}}
        doc2 = {"model": scalar_model(Q=[[1.0000001]]),
                "grid": {"steps": 200}}
        h = []
        for doc in (doc1, doc2):
            cfg = parse_config(doc, "solve-single")
            h.append(run(cfg).manifest["config_sha256"])
        assert h[0] != h[1]

    def test_finite_escape_exit_code(self, tmp_path, capsys):
        doc = {"model": scalar_model(B=[[0.0]], Q_hat=[[10.0]],
                                     sigma=[[5.0]], delta=4.0),
               "grid": {"steps": 500}}
        path = write_config(tmp_path, doc)
        assert main(["solve-single", "--config", path]) == EXIT_FINITE_ESCAPE
        err = capsys.readouterr().err
        assert "finite escape" in err
        assert "t=" in err

    def test_threads_recorded(self, tmp_path):
        doc = {"model": scalar_model(), "grid": {"steps": 200}}
        path = write_config(tmp_path, doc)
        out = str(tmp_path / "out")
        assert main(["solve-single", "--config", path, "--out", out,
                     "--threads", "4"]) == EXIT_OK
        manifest = json.loads((tmp_path / "out" / "manifest.json")
                              .read_text())
        assert manifest["threads"] == 4


class TestVerifySingleMode:
    def test_scalar_tanh_all_z_in_bounds(self, tmp_path):
        doc = {"model": scalar_model(), "grid": {"steps": 400},
               "montecarlo": {"n_paths": 4000, "seed": 3},
               "output": {"directory": str(tmp_path / "out")}}
        path = write_config(tmp_path, doc)
        assert main(["verify-single", "--config", path]) == EXIT_OK
        rows = (tmp_path / "out" / "checks.csv").read_text().splitlines()
        assert rows[0].startswith("check,")
        zs = [float(r.rsplit(",", 1)[1]) for r in rows[1:]]
        assert all(abs(z) <= 3.0 for z in zs)


class TestMfgModes:
    def test_solve_mfg_toy(self, tmp_path):
        doc = bundled_config("toy_model.json")
        doc["grid"] = {"steps": 400}
        path = write_config(tmp_path, doc)
        out = str(tmp_path / "out")
        assert main(["solve-mfg", "--config", path, "--out", out]) == EXIT_OK
        rows = (tmp_path / "out" / "convergence.csv").read_text().splitlines()
        assert float(rows[-1].split(",")[1]) < 1e-10
        assert (tmp_path / "out" / "mean_field.csv").exists()
        assert (tmp_path / "out" / "laws.csv").exists()

    def test_reproduce_paper_defaults_to_bundled_model(self, tmp_path):
        doc = {"grid": {"steps": 400}}
        path = write_config(tmp_path, doc)
        out = str(tmp_path / "out")
        assert main(["reproduce-paper", "--config", path,
                     "--out", out]) == EXIT_OK
        rows = (tmp_path / "out" / "convergence.csv").read_text().splitlines()
        assert float(rows[-1].split(",")[1]) < 1e-10
        iters = (tmp_path / "out" / "iterations.csv").read_text().splitlines()
        assert iters[0].startswith("iteration,")
        assert len(iters) > 1000  # per-iteration trajectories present

    def test_not_converged_exit_code(self, tmp_path, capsys):
        doc = bundled_config("paper_example.json")
        doc["grid"] = {"steps": 200}
        doc["fixedpoint"] = {"max_iter": 1}
        path = write_config(tmp_path, doc)
        assert main(["solve-mfg", "--config", path]) == EXIT_NOT_CONVERGED
        assert "did not converge" in capsys.readouterr().err


class TestPopulationModes:
    def test_simulate_population(self, tmp_path):
        doc = bundled_config("paper_example.json")
        doc["grid"] = {"steps": 200}
        doc["population"] = {"N": 3, "n_reps": 40}
        path = write_config(tmp_path, doc)
        out = str(tmp_path / "out")
        assert main(["simulate-population", "--config", path,
                     "--out", out]) == EXIT_OK
        rows = (tmp_path / "out" / "costs.csv").read_text().splitlines()
        assert len(rows) == 1 + 1 + 3  # header, major, three minors
        assert (tmp_path / "out" / "empirical_avg.csv").exists()
        assert (tmp_path / "out" / "fluctuations.csv").exists()

    def test_nash_gap_mode(self, tmp_path):
        doc = bundled_config("paper_example.json")
        doc["grid"] = {"steps": 200}
        doc["population"] = {"N_schedule": [2, 4], "n_reps": 50,
                             "agent": "major"}
        path = write_config(tmp_path, doc)
        out = str(tmp_path / "out")
        assert main(["nash-gap", "--config", path, "--out", out]) == EXIT_OK
        rows = (tmp_path / "out" / "gaps.csv").read_text().splitlines()
        # header + 2 N values x (equilibrium + 6 deviations)
        assert len(rows) == 1 + 2 * 7
        assert (tmp_path / "out" / "slopes.csv").exists()
