"""End-to-end tests of the batch command-line interface."""
import hashlib
import json

import numpy as np
import pytest

import esgain
from esgain.cli import main
from esgain.symexpr import parse_expr, differentiate, eval_expr

WORKED_H_TEXT = "-cos(x) + 0.16666666666666666*x^3"


def write_config(path, data):
    path.write_text(json.dumps(data, indent=1))
    return str(path)


def tune_config(tmp_path, **tuning):
    blk = {"strategy": 3, "delta1": 0.01, "delta2": 0.01}
    blk.update(tuning)
    return write_config(tmp_path / "tune.json", {
        "scheme": {"kind": "basic1d", "h": WORKED_H_TEXT,
                   "gains": {"a": 0.2, "eta": 0.01}},
        "ledger": {"domain": [-1.0, 1.0], "x_star": 0.0},
        "tuning": blk,
    })


class TestTune:
    def test_closed_form_gains_in_artifact(self, tmp_path):
        cfg = tune_config(tmp_path)
        out = tmp_path / "out"
        assert main(["tune", "--config", cfg, "--out", str(out)]) == 0
        payload = json.loads((out / "tune.json").read_text())
        assert float(payload["gains"]["a"]) == pytest.approx(0.209, abs=3e-3)
        assert float(payload["gains"]["eta"]) == pytest.approx(0.01, abs=1e-6)
        assert float(payload["consistency"]["p_value"]) == pytest.approx(1.104,
                                                                         abs=2e-3)
        assert payload["consistency"]["p_near_unity"] is True

    def test_artifact_embeds_hash_and_version(self, tmp_path):
        cfg = tune_config(tmp_path)
        out = tmp_path / "out"
        main(["tune", "--config", cfg, "--out", str(out)])
        payload = json.loads((out / "tune.json").read_text())
        with open(cfg) as fh:
            want = hashlib.sha256(fh.read().encode()).hexdigest()
        assert payload["config_sha256"] == want
        assert payload["version"] == esgain.__version__

    def test_byte_identical_reruns(self, tmp_path):
        cfg = tune_config(tmp_path)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        main(["tune", "--config", cfg, "--out", str(out1)])
        main(["tune", "--config", cfg, "--out", str(out2)])
        assert (out1 / "tune.json").read_bytes() == (out2 / "tune.json").read_bytes()

    def test_infeasible_exits_three(self, tmp_path, capsys):
        cfg = tune_config(tmp_path, method="numeric",
                          delta1=1e-12, delta2=1e-12)
        code = main(["tune", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == 3
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "infeasible"

    def test_frequency_target(self, tmp_path):
        cfg = tune_config(tmp_path, target="frequency", a=0.209, eta=0.01)
        out = tmp_path / "out"
        assert main(["tune", "--config", cfg, "--out", str(out)]) == 0
        payload = json.loads((out / "tune.json").read_text())
        assert float(payload["omega"]) == pytest.approx(0.477, abs=1e-3)
        lit = float(payload["diagnostics"]["literal_stationary_omega"])
        assert lit == pytest.approx(0.239, abs=1e-3)


class TestAverage:
    def test_degree_two_coefficient(self, tmp_path):
        cfg = write_config(tmp_path / "avg.json", {
            "scheme": {"kind": "basic1d", "h": WORKED_H_TEXT,
                       "gains": {"a": 0.5, "eta": 0.25}, "avg_order": 2},
        })
        out = tmp_path / "out"
        assert main(["average", "--config", cfg, "--out", str(out)]) == 0
        payload = json.loads((out / "average.json").read_text())
        p = float(payload["p"])
        assert p == pytest.approx(0.5, rel=1e-12)
        g2 = parse_expr(payload["averaged"]["2"][0])
        h1 = differentiate(parse_expr(WORKED_H_TEXT))
        for y in np.linspace(-0.9, 0.9, 11):
            assert eval_expr(g2, [y]) == pytest.approx(
                -p / 2.0 * eval_expr(h1, [y]), abs=1e-12)
        listing = (out / "average.txt").read_text()
        assert "degree 2, component 0" in listing


class TestSimulate:
    def test_basic_run_writes_trajectory_and_metrics(self, tmp_path):
        cfg = write_config(tmp_path / "sim.json", {
            "scheme": {"kind": "basic1d", "h": WORKED_H_TEXT,
                       "gains": {"a": 0.2, "eta": 0.2}},
            "sim": {"horizon_periods": 30, "x0": [0.5]},
        })
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        payload = json.loads((out / "simulate.json").read_text())
        assert "metrics" in payload
        assert float(payload["metrics"]["sup_full_vs_averaged"]) >= 0.0
        header = (out / "trajectory.csv").read_text().splitlines()[0]
        assert header == "t,state0"

    def test_overflow_exits_four(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "boom.json", {
            "scheme": {"kind": "basic1d", "h": "x^3",
                       "gains": {"a": 5.0, "eta": 50.0}},
            "sim": {"horizon_periods": 50, "x0": [2.0], "metrics": False},
        })
        with np.errstate(over="ignore", invalid="ignore"):
            code = main(["simulate", "--config", cfg,
                         "--out", str(tmp_path / "o")])
        assert code == 4
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "overflow"


class TestVerify:
    def test_empty_scheme_config_exits_two(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "empty.json", {})
        code = main(["verify", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "config"

    def test_basic_scheme_passes(self, tmp_path):
        cfg = write_config(tmp_path / "v.json", {
            "scheme": {"kind": "basic1d", "h": WORKED_H_TEXT,
                       "gains": {"a": 0.3, "eta": 0.3}},
        })
        out = tmp_path / "out"
        assert main(["verify", "--config", cfg, "--out", str(out)]) == 0
        payload = json.loads((out / "verify.json").read_text())
        assert payload["passed"] is True
        assert payload["checks"]["averaged_matches_reference"] is True


class TestPerfmap:
    def test_small_map_round_trip(self, tmp_path):
        cfg = write_config(tmp_path / "pm.json", {
            "scheme": {"h": WORKED_H_TEXT},
            "sim": {"a_range": [0.1, 0.5], "p_range": [0.5, 2.0],
                    "a_points": 3, "p_points": 3, "horizon_periods": 40},
        })
        out = tmp_path / "out"
        assert main(["perfmap", "--config", cfg, "--out", str(out)]) == 0
        lines = (out / "perfmap.csv").read_text().splitlines()
        assert lines[0] == "a,p,speed,error,feasible"
        assert len(lines) == 10
        payload = json.loads((out / "perfmap.json").read_text())
        assert payload["cells"] == 9


class TestConfigHandling:
    def test_malformed_json_exits_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code = main(["tune", "--config", str(bad), "--out", str(tmp_path / "o")])
        assert code == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "config"

    def test_missing_file_exits_two(self, tmp_path, capsys):
        code = main(["tune", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "o")])
        assert code == 2
        capsys.readouterr()

    def test_non_finite_number_rejected(self, tmp_path, capsys):
        bad = tmp_path / "nan.json"
        bad.write_text('{"scheme": {"kind": "basic1d", "h": "x^2", '
                       '"gains": {"a": NaN, "eta": 0.1}}}')
        code = main(["simulate", "--config", str(bad),
                     "--out", str(tmp_path / "o")])
        assert code == 2
        capsys.readouterr()
