import json

import pytest

from ristx.cli import main
from ristx.harness import SUMMARY_CSV, TRIALS_CSV, MANIFEST_JSON, SimConfig


def tiny_config_dict():
    return SimConfig(
        m_list=(4,),
        b_list=(2,),
        k_list=(2,),
        num_intervals=4,
        trials=2,
        master_seed=5,
    ).to_dict()


def write_config(tmp_path, data):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return str(path)


class TestValidateConfig:
    def test_ok(self, tmp_path, capsys):
        path = write_config(tmp_path, tiny_config_dict())
        assert main(["validate-config", path]) == 0
        assert "1 sweep points" in capsys.readouterr().out

    def test_bad_field_named(self, tmp_path, capsys):
        cfg = tiny_config_dict()
        cfg["k_list"] = []
        path = write_config(tmp_path, cfg)
        assert main(["validate-config", path]) == 2
        assert "k_list" in capsys.readouterr().err

    def test_unknown_field_named(self, tmp_path, capsys):
        cfg = tiny_config_dict()
        cfg["bogus"] = 3
        path = write_config(tmp_path, cfg)
        assert main(["validate-config", path]) == 2
        assert "bogus" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["validate-config", str(tmp_path / "nope.json")]) == 2
        assert "cannot read" in capsys.readouterr().err

    def test_malformed_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert main(["validate-config", str(path)]) == 2
        assert "not valid JSON" in capsys.readouterr().err


class TestTrial:
    def test_csv_row_to_stdout(self, capsys):
        assert main(["trial", "-K", "2", "-M", "4", "-B", "2",
                     "--seed", "1", "-N", "4"]) == 0
        out = capsys.readouterr().out.strip().split("\n")
        assert out[0].startswith("scheme,K,M,B,")
        assert len(out) == 2
        fields = out[1].split(",")
        assert fields[0] == "single_rf"
        assert fields[1:5] == ["2", "4", "2", "0"]

    def test_with_baseline_emits_two_rows(self, capsys):
        assert main(["trial", "-K", "2", "-M", "4", "-B", "2", "--seed", "1",
                     "-N", "4", "--with-baseline"]) == 0
        out = capsys.readouterr().out.strip().split("\n")
        assert [r.split(",")[0] for r in out[1:]] == ["single_rf", "mf_digital"]

    def test_continuous_codebook_accepted(self, capsys):
        assert main(["trial", "-K", "1", "-M", "4", "-B", "continuous",
                     "--seed", "1", "-N", "2"]) == 0
        out = capsys.readouterr().out.strip().split("\n")
        assert out[1].split(",")[3] == "inf"

    def test_json_record(self, capsys):
        assert main(["trial", "-K", "2", "-M", "4", "-B", "1", "--seed", "3",
                     "-N", "4", "--json"]) == 0
        record = json.loads(capsys.readouterr().out)
        assert record["K"] == 2 and record["B"] == "1"
        assert "surface" in record and "solver" in record

    def test_bad_bit_depth(self, capsys):
        assert main(["trial", "-K", "2", "-M", "4", "-B", "0", "--seed", "1"]) == 2
        assert "b_list" in capsys.readouterr().err

    def test_bad_geometry_is_usage_error(self, capsys):
        assert main(["trial", "-K", "2", "-M", "5", "-B", "2", "--seed", "1"]) == 2
        assert "m_list" in capsys.readouterr().err


class TestSweep:
    def test_config_file_run(self, tmp_path, capsys):
        path = write_config(tmp_path, tiny_config_dict())
        out = tmp_path / "out"
        assert main(["sweep", path, "-o", str(out)]) == 0
        assert (out / TRIALS_CSV).exists()
        assert (out / SUMMARY_CSV).exists()
        assert (out / MANIFEST_JSON).exists()

    def test_overrides_applied(self, tmp_path):
        path = write_config(tmp_path, tiny_config_dict())
        out = tmp_path / "out"
        assert main(["sweep", path, "-o", str(out), "--trials", "1",
                     "--seed", "77"]) == 0
        manifest = json.loads((out / MANIFEST_JSON).read_text())
        assert manifest["config"]["trials"] == 1
        assert manifest["config"]["master_seed"] == 77

    def test_requires_config_or_preset(self, tmp_path, capsys):
        assert main(["sweep", "-o", str(tmp_path)]) == 2
        assert "required" in capsys.readouterr().err

    def test_rejects_both_config_and_preset(self, tmp_path, capsys):
        path = write_config(tmp_path, tiny_config_dict())
        assert main(["sweep", path, "--preset", "fig2", "-o", str(tmp_path)]) == 2

    def test_bad_config_exits_2(self, tmp_path, capsys):
        cfg = tiny_config_dict()
        cfg["trials"] = 0
        path = write_config(tmp_path, cfg)
        assert main(["sweep", path, "-o", str(tmp_path / "out")]) == 2
        assert "trials" in capsys.readouterr().err


class TestUsage:
    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as err:
            main(["sweep", "--bogus"])
        assert err.value.code == 2

    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as err:
            main(["frobnicate"])
        assert err.value.code == 2
