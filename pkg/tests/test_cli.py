import csv
import json

import pytest

from aplloss.cli import main

SMALL = {
    "loss": {"p_th": 0.05},
    "dataset": {"n_samples": 600, "n_features": 10, "n_classes": 8, "positive_rate": 0.1, "seed": 4},
    "model": {"kind": "linear", "init_scale": 0.01},
    "opt": {"learning_rate": 0.5, "momentum": 0.9, "epochs": 3, "batch_size": 64},
    "ks": [1, 3],
    "seeds": [0, 1],
}


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2))
    return str(path)


def read_csv_rows(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


class TestCurves:
    def test_fig2_dead_zone(self, tmp_path):
        out = tmp_path / "fig2.csv"
        params = json.dumps([{"label": "asl", "gamma_minus": 2, "p_th": 0.2}])
        assert main(["curves", "--figure", "2", "--params", params, "--out", str(out)]) == 0
        text = out.read_text()
        assert text.startswith("# config_sha256=")
        assert text.splitlines()[1] == "p,value,series_id"
        rows = read_csv_rows(out)
        assert len(rows) == 512
        assert all(float(r["value"]) == 0 for r in rows if float(r["p"]) <= 0.2)
        assert any(float(r["value"]) > 0 for r in rows if float(r["p"]) > 0.2)
        assert b"\r" not in out.read_bytes()

    @pytest.mark.parametrize("figure", ["1", "2", "3"])
    def test_defaults(self, tmp_path, figure):
        out = tmp_path / "f.csv"
        assert main(["curves", "--figure", figure, "--out", str(out)]) == 0
        series = {r["series_id"] for r in read_csv_rows(out)}
        assert series == {"BCE", "ASL", "APL"}

    def test_params_file(self, tmp_path):
        pfile = tmp_path / "p.json"
        pfile.write_text(json.dumps({"gamma_minus": 1.8, "p_th": 0.01}))
        assert main(["curves", "--figure", "3", "--params", str(pfile), "--points", "9",
                     "--out", str(tmp_path / "o.csv")]) == 0
        assert len(read_csv_rows(tmp_path / "o.csv")) == 9

    def test_bad_params(self, capsys):
        assert main(["curves", "--figure", "2", "--params", '{"gamma_minus": -2}']) == 2
        assert "gamma_minus" in capsys.readouterr().err

    def test_unknown_figure(self):
        with pytest.raises(SystemExit) as exc:
            main(["curves", "--figure", "4"])
        assert exc.value.code == 2


class TestPStar:
    def test_default(self, capsys):
        assert main(["pstar"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert 0.01 < out["p_star"] < 1
        assert abs(out["residual"]) <= 1e-8

    def test_monotone(self, capsys):
        assert main(["pstar", "--params", '{"gamma_minus": 0, "beta1": 1}']) == 1
        assert "monotone" in capsys.readouterr().err


def test_taylor_check(capsys):
    assert main(["taylor-check", "--order", "200"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["max_abs_error"] <= 1e-5


class TestAudit:
    def test_passes(self, capsys):
        assert main(["audit", "--trials", "20", "--seed", "3"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["passed"] and len(out["results"]) >= 5

    def test_fails_on_impossible_tolerance(self, capsys):
        assert main(["audit", "--trials", "5", "--seed", "0", "--tol", "1e-30"]) == 1
        assert json.loads(capsys.readouterr().out)["passed"] is False


class TestTrainSweep:
    def test_train_writes_jsonl(self, tmp_path, capsys):
        out = tmp_path / "hist.jsonl"
        cfg = write_config(tmp_path, SMALL)
        assert main(["train", "--config", cfg, "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# config_sha256=")
        records = [json.loads(ln) for ln in lines[1:]]
        assert len(records) == 2 * 3
        assert {r["seed"] for r in records} == {0, 1}
        summary = json.loads(capsys.readouterr().out)
        assert "mAP" in summary["final"]

    def test_sweep_ranked_and_deterministic(self, tmp_path):
        cfg = dict(SMALL, grid={"gamma_minus": [1, 2, 3, 4, 5]})
        path = write_config(tmp_path, cfg)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["sweep", "--config", path, "--out", str(a)]) == 0
        assert main(["sweep", "--config", path, "--out", str(b)]) == 0
        rows = read_csv_rows(a)
        assert len(rows) == 5
        maps = [float(r["mAP"]) for r in rows]
        assert maps == sorted(maps, reverse=True)
        assert sorted(float(r["gamma_minus"]) for r in rows) == [1, 2, 3, 4, 5]
        assert a.read_bytes() == b.read_bytes()

    def test_seed_override(self, tmp_path):
        out = tmp_path / "h.jsonl"
        cfg = write_config(tmp_path, SMALL)
        assert main(["train", "--config", cfg, "--out", str(out), "--seeds", "5"]) == 0
        assert {json.loads(ln)["seed"] for ln in out.read_text().splitlines()[1:]} == {5}

    def test_set_override(self, tmp_path):
        out = tmp_path / "h.jsonl"
        cfg = write_config(tmp_path, SMALL)
        assert main(["train", "--config", cfg, "--out", str(out),
                     "--set", 'opt={"epochs": 1, "learning_rate": 0.1}']) == 0
        assert len(out.read_text().splitlines()) == 1 + 2


class TestConfigErrors:
    def test_malformed_json_reports_line(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "loss": {\n    "gamma_minus": ,\n  }\n}')
        assert main(["train", "--config", str(path)]) == 2
        assert "line 3" in capsys.readouterr().err

    @pytest.mark.parametrize(
        "patch, field",
        [
            ({"loss": {"gamma_minus": -1}}, "loss.gamma_minus"),
            ({"opt": {"momentum": 1.5}}, "opt.momentum"),
            ({"dataset": {"positive_rate": 0.9}}, "dataset.positive_rate"),
            ({"model": {"kind": "cnn"}}, "model.kind"),
            ({"seeds": []}, "seeds"),
            ({"extra": 1}, "extra"),
            ({"grid": {"gamma": [1]}}, "grid.gamma"),
            ({"ks": [1, 50]}, "ks"),
        ],
    )
    def test_field_diagnostics(self, tmp_path, capsys, patch, field):
        path = write_config(tmp_path, {**SMALL, **patch})
        assert main(["train", "--config", path]) == 2
        assert f"field '{field}'" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "nope.json")]) == 2
