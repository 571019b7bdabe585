import json
import math

import numpy as np
import pytest

from smallnoise.cli import main
from smallnoise.estimators import EstimatorConfig, Explicit, estimate_theta
from smallnoise.kernels import builtin
from smallnoise.sde_sim import path_from_csv


def base_config(**sections):
    doc = {
        "model": {"kind": "FractionalBM", "hurst": 0.5},
        "trend": {"form": "constant", "params": {"c": 0.5}},
        "sde": {"x0": 1.0, "epsilon": 0.1, "T": 1.0, "n_steps": 512},
        "kernel": {"name": "uniform"},
        "estimator": {"rule": {"kind": "explicit", "phi": 0.05}, "target": "J", "n_eval": 11},
        "experiment": {"target": "Lemma21", "epsilons": [0.1], "n_reps": 100, "seed": 3},
    }
    for name, sec in sections.items():
        if sec is None:
            doc.pop(name, None)
        else:
            doc[name] = {**doc.get(name, {}), **sec}
    return doc


@pytest.fixture
def write_cfg(tmp_path):
    def _write(doc, name="cfg.json"):
        p = tmp_path / name
        p.write_text(json.dumps(doc))
        return str(p)
    return _write


class TestSimulate:
    def test_rows_and_determinism(self, tmp_path, write_cfg):
        cfg = write_cfg(base_config())
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["simulate", "--config", cfg, "--out", str(a)]) == 0
        assert main(["simulate", "--config", cfg, "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert len(a.read_text().splitlines()) == 513 + 1
        assert b"\r" not in a.read_bytes()

    def test_seed_override(self, tmp_path, write_cfg):
        cfg = write_cfg(base_config())
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["simulate", "--config", cfg, "--out", str(a)])
        main(["simulate", "--config", cfg, "--out", str(b), "--seed", "99"])
        assert a.read_bytes() != b.read_bytes()

    def test_bad_hurst(self, tmp_path, write_cfg, capsys):
        cfg = write_cfg(base_config(model={"hurst": 1.5}))
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "x.csv")]) == 2
        assert "model.hurst out of range (0,1)" in capsys.readouterr().err
        assert not (tmp_path / "x.csv").exists()

    def test_unknown_key(self, tmp_path, write_cfg, capsys):
        cfg = write_cfg(base_config(sde={"dt": 0.1}))
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "x.csv")]) == 2
        assert "sde.dt" in capsys.readouterr().err


class TestEstimate:
    def test_round_trip_noise_free(self, tmp_path, write_cfg):
        doc = base_config(sde={"epsilon": 0.0, "n_steps": 4096},
                          estimator={"target": "Theta"})
        cfg = write_cfg(doc)
        path_csv, curve_csv = tmp_path / "p.csv", tmp_path / "c.csv"
        assert main(["simulate", "--config", cfg, "--out", str(path_csv)]) == 0
        assert main(["estimate", "--config", cfg, "--path", str(path_csv),
                     "--out", str(curve_csv)]) == 0
        lines = curve_csv.read_text().splitlines()
        assert lines[0].startswith("# ") and lines[1] == "t,value"
        values = np.array([float(ln.split(",")[1]) for ln in lines[2:]])
        assert len(values) == 11
        path = path_from_csv(path_csv.read_text())
        est = EstimatorConfig(builtin("uniform"), 0.0, Explicit(0.05), target="Theta")
        t = np.array([float(ln.split(",")[0]) for ln in lines[2:]])
        np.testing.assert_array_equal(values, estimate_theta(path, est, t))
        assert np.max(np.abs(values - 0.5)) <= 0.02

    def test_missing_y_column(self, tmp_path, write_cfg, capsys):
        cfg = write_cfg(base_config(estimator={"target": "Theta"}))
        p = tmp_path / "p.csv"
        p.write_text("t,X\n" + "".join(f"{i / 512},1.0\n" for i in range(513)))
        assert main(["estimate", "--config", cfg, "--path", str(p),
                     "--out", str(tmp_path / "c.csv")]) == 2
        assert "indicator_A" in capsys.readouterr().err

    def test_n_eval_one(self, tmp_path, write_cfg):
        cfg = write_cfg(base_config())
        p, c = tmp_path / "p.csv", tmp_path / "c.csv"
        main(["simulate", "--config", cfg, "--out", str(p)])
        assert main(["estimate", "--config", cfg, "--path", str(p), "--out", str(c),
                     "--n-eval", "1"]) == 0
        assert len(c.read_text().splitlines()) == 3

    def test_infeasible_window(self, tmp_path, write_cfg, capsys):
        cfg = write_cfg(base_config(estimator={"rule": {"kind": "explicit", "phi": 0.6}}))
        p = tmp_path / "p.csv"
        main(["simulate", "--config", cfg, "--out", str(p)])
        assert main(["estimate", "--config", cfg, "--path", str(p),
                     "--out", str(tmp_path / "c.csv")]) == 2
        assert "empty evaluation window" in capsys.readouterr().err


class TestExperiment:
    def test_lemma21_exact_case(self, tmp_path, write_cfg, capsys):
        cfg = write_cfg(base_config(trend={"params": {"c": 0.0}, "bound_L": 1e-9}))
        assert main(["experiment", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
        assert (tmp_path / "o" / "report.csv").exists()
        manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert manifest["passed"] is True
        assert "PASS" in capsys.readouterr().out

    def test_broken_bandwidth(self, tmp_path, write_cfg, capsys):
        doc = base_config(sde={"n_steps": 64},
                          experiment={"target": "Consistency", "epsilons": [0.2, 0.1]},
                          estimator={"rule": {"kind": "explicit", "phi": 0.05}})
        cfg = write_cfg(doc)
        assert main(["experiment", "--config", cfg, "--out", str(tmp_path / "o")]) != 0
        assert "phi/20" in capsys.readouterr().err

    def test_override_resolution(self, tmp_path, write_cfg):
        doc = base_config(sde={"n_steps": 64},
                          experiment={"target": "Consistency", "epsilons": [0.2, 0.1]},
                          estimator={"rule": {"kind": "explicit", "phi": 0.05}})
        cfg = write_cfg(doc)
        with pytest.warns(UserWarning):
            code = main(["experiment", "--config", cfg, "--out", str(tmp_path / "o"),
                         "--override-resolution"])
        assert code in (0, 1)

    def test_seed_echoed_and_threads_identical(self, tmp_path, write_cfg):
        doc = base_config(sde={"n_steps": 1024},
                          estimator={"rule": {"kind": "rate_k", "k": 1}},
                          kernel={"name": "epanechnikov"},
                          experiment={"target": "RateJ", "epsilons": [0.2, 0.1],
                                      "n_reps": 40, "n_eval": 5})
        cfg = write_cfg(doc)
        outs = []
        for threads in ("1", "3"):
            out = tmp_path / f"o{threads}"
            main(["experiment", "--config", cfg, "--out", str(out), "--seed", "17",
                  "--threads", threads])
            outs.append((out / "report.csv").read_bytes())
            assert json.loads((out / "manifest.json").read_text())["plan"]["seed_base"] == 17
        assert outs[0] == outs[1]


def test_kernels_verify(capsys):
    assert main(["kernels", "verify", "uniform", "order:3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    reports = [json.loads(ln) for ln in lines]
    assert reports[0]["a2_ok"] and reports[1]["a3_order"] >= 3


def test_bad_arguments():
    assert main(["simulate"]) == 2
    assert main(["kernels", "verify", "gaussian"]) == 2
