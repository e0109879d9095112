import json

import numpy as np
import pytest

from trimgossip.cli import PRESETS, config_from_dict, load_config, main, prepare


def write_config(tmp_path, name="cfg.json", **overrides):
    raw = {
        "experiment": "smoke",
        "topology": {"kind": "complete", "n": 10},
        "protocol": "gorank",
        "iterations": 50,
        "trials": 3,
        "base_seed": 1,
    }
    raw.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return path


class TestConfig:
    def test_load_json(self, tmp_path):
        cfg = load_config(str(write_config(tmp_path)))
        assert cfg.topology.kind == "complete" and cfg.trials == 3

    def test_load_toml(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text(
            'experiment = "smoke"\niterations = 50\n'
            '[topology]\nkind = "complete"\nn = 10\n'
            '[protocol]\nname = "gorank"\n')
        cfg = load_config(str(path))
        assert cfg.topology.n == 10 and cfg.protocol["name"] == "gorank"

    def test_missing_sections_rejected(self):
        from trimgossip.errors import ParameterError
        with pytest.raises(ParameterError):
            config_from_dict({"topology": {"kind": "complete", "n": 5}})

    def test_unknown_fields_rejected(self):
        from trimgossip.errors import ParameterError
        with pytest.raises(ParameterError):
            config_from_dict({"topology": {"kind": "complete", "n": 5},
                              "protocol": "gorank", "bogus": 1})

    def test_prepare_references(self, tmp_path):
        cfg = load_config(str(write_config(
            tmp_path,
            dataset={"kind": "range", "jitter": True},
            contamination={"epsilon": 0.2, "mode": "scale", "magnitude": 10.0, "seed": 3},
            trim={"alpha": 0.2})))
        prep = prepare(cfg)
        assert prep.dataset.corrupted.sum() == 2
        refs = prep.references
        assert refs["corrupted_mean_error"] == pytest.approx(
            abs(refs["corrupted_mean"] - refs["trimmed_mean"]))


class TestSpectralCommand:
    def test_complete_report(self, capsys):
        assert main(["spectral", "--topology", "complete", "--n", "500"]) == 0
        out = capsys.readouterr().out
        c = float([ln for ln in out.splitlines() if ln.startswith("c=")][0][2:])
        assert c == pytest.approx(2.0 / 499.0, rel=1e-9)
        assert "connected=True" in out and "bipartite=False" in out

    def test_grid_value(self, capsys, tmp_path):
        cfgp = tmp_path / "t.json"
        cfgp.write_text(json.dumps({"topology": {"kind": "grid2d", "n": 500},
                                    "protocol": "gorank"}))
        assert main(["spectral", "--config", str(cfgp), "--out", str(tmp_path / "r.txt")]) == 0
        text = (tmp_path / "r.txt").read_text()
        c = float([ln for ln in text.splitlines() if ln.startswith("c=")][0][2:])
        assert c == pytest.approx(1.65e-5, rel=0.01)

    def test_missing_args_exit_2(self, capsys):
        assert main(["spectral"]) == 2


class TestRunCommand:
    def test_deterministic_csv(self, tmp_path):
        cfg = write_config(tmp_path)
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["run", "--config", str(cfg), "--out", str(out1)]) == 0
        assert main(["run", "--config", str(cfg), "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_schema_and_round_one_errors(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "a.csv"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        lines = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
        header = lines[0].split(",")
        assert header == ["experiment", "protocol", "t", "metric", "node",
                          "mean", "std", "trials"]
        row1 = lines[1].split(",")
        assert row1[2] == "1" and row1[3] == "rank_error" and row1[4] == "ALL"
        # round 1: every estimate is 1, so the mean error is mean |1 - r_k| / n
        n = 10
        expect = np.abs(1.0 - np.arange(1, n + 1)).mean() / n
        assert float(row1[5]) == pytest.approx(expect)
        assert row1[7] == "3"

    def test_gotrim_reference_metadata(self, tmp_path):
        cfg = write_config(
            tmp_path,
            protocol={"name": "gotrim", "ranker": "gorank"},
            dataset={"kind": "range", "jitter": True},
            contamination={"epsilon": 0.2, "mode": "scale", "magnitude": 10.0, "seed": 3},
            trim={"alpha": 0.2})
        out = tmp_path / "a.csv"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        text = out.read_text()
        assert "# ref corrupted_mean_error=" in text
        assert "# ref zero_line=0.0" in text
        assert ",trim_error," in text

    def test_missing_config_exit_2(self):
        assert main(["run"]) == 2

    def test_bad_config_exit_2(self, tmp_path):
        cfg = write_config(tmp_path, topology={"kind": "grid2d", "n": 10,
                                               "rows": 3, "cols": 4})
        assert main(["run", "--config", str(cfg)]) == 2

    def test_gotrim_without_trim_exit_2(self, tmp_path):
        cfg = write_config(tmp_path, protocol={"name": "gotrim"})
        assert main(["run", "--config", str(cfg)]) == 2


class TestBreakdownCommand:
    def test_smoke_and_columns(self, tmp_path):
        cfg = write_config(
            tmp_path,
            topology={"kind": "complete", "n": 20},
            protocol={"name": "gotrim"},
            trim={"alpha": 0.2},
            iterations=2000,
            trials=1,
            breakdown={"counts": [0, 4], "magnitudes": [1e3]})
        out = tmp_path / "b.csv"
        assert main(["breakdown", "--config", str(cfg), "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        header = [ln for ln in lines if ln.startswith("experiment,")][0]
        assert header.split(",")[:4] == ["experiment", "p", "magnitude", "trial"]
        rows = [ln for ln in lines if ln.startswith("smoke,")]
        assert len(rows) == 2
        p0 = rows[0].split(",")
        # p = 0: the corrupted oracle is the clean oracle, both excursions agree
        assert float(p0[5]) == pytest.approx(float(p0[6]))


class TestPresets:
    def test_preset_names(self):
        assert set(PRESETS) == {"fig2a", "fig2b", "fig2c", "fig3a", "fig3b",
                                "clipped-vs-gotrim"}

    def test_unknown_preset_exit_2(self):
        assert main(["preset", "nope"]) == 2

    def test_fig2b_scaled_down_smoke(self, tmp_path):
        out = tmp_path / "fig2b.csv"
        assert main(["preset", "fig2b", "--trials", "2", "--iterations", "200",
                     "--out", str(out)]) == 0
        text = out.read_text()
        for tag in ("fig2b-complete", "fig2b-ws", "fig2b-grid"):
            assert tag in text
