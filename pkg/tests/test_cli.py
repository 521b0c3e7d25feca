import json
import math

import pytest

from stablepp.cli import main
from stablepp.point_measure import PointMeasure, ShiftPointMeasure

PROC = {
    "family": "scdppp",
    "alpha": 1.0,
    "decoration": {"kind": "dirac", "atoms": [[1.0, 1]]},
    "window": 0.05,
}
SHIFT_PROC = {
    "family": "dppp",
    "c": 1.0,
    "decoration": {"kind": "dirac", "atoms": [[0.0, 1]]},
    "window": -3.0,
}


def config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def proc_config(tmp_path, extra=None, process=PROC, name="cfg.json"):
    doc = {"schema": "stablepp/v1", "process": process}
    if extra:
        doc.update(extra)
    return config(tmp_path, doc, name)


def manifest(out):
    with open(str(out) + ".manifest.json", "r", encoding="utf-8") as fh:
        return json.load(fh)


class TestConfigErrors:
    def test_missing_file(self, tmp_path):
        assert main(["sample", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "o.jsonl")]) == 1

    def test_bad_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert main(["sample", "--config", str(p),
                     "--out", str(tmp_path / "o.jsonl")]) == 1

    def test_wrong_schema(self, tmp_path):
        cfg = config(tmp_path, {"schema": "stablepp/v0", "process": PROC})
        assert main(["sample", "--config", cfg,
                     "--out", str(tmp_path / "o.jsonl")]) == 1

    def test_unknown_field_named(self, tmp_path, capsys):
        bad = dict(PROC)
        bad["alhpa"] = 1.0
        cfg = proc_config(tmp_path, process=bad)
        assert main(["sample", "--config", cfg,
                     "--out", str(tmp_path / "o.jsonl")]) == 1
        assert "alhpa" in capsys.readouterr().err

    def test_usage_error(self, tmp_path, capsys):
        assert main(["sample", "--config"]) == 1
        assert main(["frobnicate"]) == 1
        capsys.readouterr()

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        assert "sample" in capsys.readouterr().out

    def test_empty_battery_rejected(self, tmp_path):
        cfg = proc_config(tmp_path, {"battery": []})
        assert main(["estimate", "--config", cfg, "--reps", "100",
                     "--out", str(tmp_path / "e.csv")]) == 1

    def test_shift_config_for_scale_command_flows_through(self, tmp_path):
        cfg = proc_config(tmp_path, process=SHIFT_PROC)
        out = tmp_path / "o.jsonl"
        assert main(["sample", "--config", cfg, "--reps", "50",
                     "--out", str(out)]) == 0
        m = ShiftPointMeasure.from_json_line(out.read_text().splitlines()[0])
        assert m.n_atoms >= 0


class TestSample:
    def test_lines_and_manifest(self, tmp_path):
        cfg = proc_config(tmp_path)
        out = tmp_path / "o.jsonl"
        assert main(["sample", "--config", cfg, "--reps", "200", "--seed", "3",
                     "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 200
        for line in lines[:10]:
            PointMeasure.from_json_line(line)
        doc = manifest(out)
        assert doc["schema"] == "stablepp/v1"
        assert doc["command"] == "sample"
        assert doc["master_seed"] == 3
        assert doc["replica_counts"] == 200
        assert doc["status"] == "ok"
        assert "threads" not in doc
        assert not any("time" in k or "clock" in k for k in doc)

    def test_rerun_byte_identical(self, tmp_path):
        cfg = proc_config(tmp_path)
        out = tmp_path / "o.jsonl"
        argv = ["sample", "--config", cfg, "--reps", "200", "--seed", "3",
                "--out", str(out)]
        assert main(argv) == 0
        first = out.read_bytes()
        first_man = (tmp_path / "o.jsonl.manifest.json").read_bytes()
        assert main(argv) == 0
        assert out.read_bytes() == first
        assert (tmp_path / "o.jsonl.manifest.json").read_bytes() == first_man

    def test_thread_invariance(self, tmp_path):
        cfg = proc_config(tmp_path)
        out = tmp_path / "o.jsonl"
        base = ["sample", "--config", cfg, "--reps", "200", "--seed", "3",
                "--out", str(out)]
        assert main(base + ["--threads", "1"]) == 0
        one = out.read_bytes()
        assert main(base + ["--threads", "4"]) == 0
        assert out.read_bytes() == one


class TestEstimate:
    def test_csv_shape(self, tmp_path):
        cfg = proc_config(tmp_path)
        out = tmp_path / "e.csv"
        assert main(["estimate", "--config", cfg, "--reps", "5000", "--seed", "1",
                     "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "f_id,point,value,std_error,predicted,predicted_error"
        assert len(lines) == 1 + 5 * 4
        for row in lines[1:]:
            fid, point, value, se, pred, perr = row.split(",")
            assert 0.0 <= float(value) <= 1.0
            assert float(se) >= 0.0
            assert abs(float(value) - float(pred)) <= \
                3.0 * float(se) + float(perr) + 0.05
        doc = manifest(out)
        assert set(doc["battery_ids"]) == {
            "tent_lo", "tent_hi", "step_ln2", "band_sym", "mm_50"}

    def test_custom_battery_and_points(self, tmp_path):
        cfg = proc_config(tmp_path, {
            "battery": [{"id": "t1", "kind": "tent",
                         "left": 0.5, "peak": 1.0, "right": 2.0}],
            "points": [1.0, 2.0]})
        out = tmp_path / "e.csv"
        assert main(["estimate", "--config", cfg, "--reps", "2000",
                     "--out", str(out)]) == 0
        rows = out.read_text().splitlines()
        assert len(rows) == 3
        assert rows[1].startswith("t1,1.0,") or rows[1].startswith("t1,1,")

    def test_rerun_and_threads_identical(self, tmp_path):
        cfg = proc_config(tmp_path)
        out = tmp_path / "e.csv"
        base = ["estimate", "--config", cfg, "--reps", "2000", "--seed", "7",
                "--out", str(out)]
        assert main(base + ["--threads", "1"]) == 0
        one = out.read_bytes()
        man = (tmp_path / "e.csv.manifest.json").read_bytes()
        assert main(base + ["--threads", "4"]) == 0
        assert out.read_bytes() == one
        assert (tmp_path / "e.csv.manifest.json").read_bytes() == man


class TestTest:
    def test_stability_pass(self, tmp_path):
        cfg = proc_config(tmp_path, {"b1": 1.0, "b2": 1.0})
        out = tmp_path / "r.json"
        assert main(["test", "stability", "--config", cfg, "--reps", "20000",
                     "--seed", "3", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["test_name"] == "stability"
        assert doc["passed"] is True
        assert manifest(out)["status"] == "ok"

    def test_stability_negative_control_exits_two(self, tmp_path):
        cfg = proc_config(tmp_path, {"b1": 1.0, "b2": 1.0,
                                     "rhs_scale_factor": 1.5})
        out = tmp_path / "r.json"
        assert main(["test", "stability", "--config", cfg, "--reps", "20000",
                     "--seed", "3", "--out", str(out)]) == 2
        doc = json.loads(out.read_text())
        assert doc["passed"] is False
        assert manifest(out)["status"] == "rejected"

    def test_maxlaw(self, tmp_path):
        cfg = proc_config(tmp_path)
        out = tmp_path / "r.json"
        assert main(["test", "maxlaw", "--config", cfg, "--reps", "4000",
                     "--seed", "7", "--out", str(out)]) == 0

    def test_tail(self, tmp_path):
        cfg = proc_config(tmp_path)
        out = tmp_path / "r.json"
        assert main(["test", "tail", "--config", cfg, "--reps", "20000",
                     "--seed", "5", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["test_name"] == "tail_index"
        sub = doc["subchecks"][0]
        assert sub["name"] == "ci_covers_alpha"
        assert abs(sub["statistic"] - 1.0) < 0.3

    def test_support(self, tmp_path):
        cfg = proc_config(tmp_path, {"y_grid": [1.0, 2.0]})
        out = tmp_path / "r.json"
        assert main(["test", "support", "--config", cfg, "--reps", "20000",
                     "--seed", "9", "--out", str(out)]) == 0


class TestExtract:
    def test_success_writes_sidecar(self, tmp_path):
        cfg = proc_config(tmp_path, {"threshold": 20.0, "inner_radius": 0.5,
                                     "n_accepted": 120, "max_attempts": 40000})
        out = tmp_path / "x.json"
        assert main(["extract", "--config", cfg, "--seed", "17",
                     "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["n_decorations"] == 120
        side = (tmp_path / "x.json.decorations.jsonl").read_text().splitlines()
        assert len(side) == 120
        assert PointMeasure.from_json_line(side[0]).maxmod() == 1.0
        man = manifest(out)
        assert man["status"] == "ok"
        assert str(tmp_path / "x.json.decorations.jsonl") in man["outputs"]

    def test_starvation_exits_two_with_manifest(self, tmp_path):
        cfg = proc_config(tmp_path, {"threshold": 1e6, "inner_radius": 0.5,
                                     "n_accepted": 100, "max_attempts": 500})
        out = tmp_path / "x.json"
        assert main(["extract", "--config", cfg, "--out", str(out)]) == 2
        assert not out.exists()
        man = manifest(out)
        assert man["status"] == "starved"
        assert man["outputs"] == {}


class TestTransform:
    def test_file_roundtrip_byte_identical(self, tmp_path):
        # restoring integer locations of magnitude <= 30 is exact in doubles
        raw = tmp_path / "shift.jsonl"
        raw.write_text(
            '{"atoms": [[-30.0, 1], [-3.0, 2], [0.0, 1], [7.0, 1], [30.0, 1]]}\n'
            '{"atoms": [[-1.0, 3], [2.0, 1]]}\n'
            '{"atoms": []}\n')

        exp_cfg = config(tmp_path, {"schema": "stablepp/v1", "direction": "exp",
                                    "input": str(raw)}, "texp.json")
        scale = tmp_path / "scale.jsonl"
        assert main(["transform", "--config", exp_cfg, "--out", str(scale)]) == 0

        log_cfg = config(tmp_path, {"schema": "stablepp/v1", "direction": "log",
                                    "input": str(scale)}, "tlog.json")
        back = tmp_path / "back.jsonl"
        assert main(["transform", "--config", log_cfg, "--out", str(back)]) == 0
        assert back.read_bytes() == raw.read_bytes()

    def test_process_mode(self, tmp_path):
        cfg = config(tmp_path, {"schema": "stablepp/v1", "direction": "log",
                                "process": PROC})
        out = tmp_path / "mapped.json"
        assert main(["transform", "--config", cfg, "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["process"]["family"] == "dppp"
        assert doc["process"]["c"] == 1.0
        man = manifest(out)
        assert man["direction"] == "log"
        assert man["normalization_shift"] == math.log(1.0) / 1.0

    def test_direction_family_mismatch(self, tmp_path):
        cfg = config(tmp_path, {"schema": "stablepp/v1", "direction": "exp",
                                "process": PROC})
        assert main(["transform", "--config", cfg,
                     "--out", str(tmp_path / "o.json")]) == 1

    def test_malformed_line_names_position(self, tmp_path, capsys):
        src = tmp_path / "in.jsonl"
        src.write_text('{"atoms": [[1.0, 1]]}\nnot json\n')
        cfg = config(tmp_path, {"schema": "stablepp/v1", "direction": "log",
                                "input": str(src)})
        assert main(["transform", "--config", cfg,
                     "--out", str(tmp_path / "o.jsonl")]) == 1
        assert "line 2" in capsys.readouterr().err

    def test_both_input_and_process_rejected(self, tmp_path):
        cfg = config(tmp_path, {"schema": "stablepp/v1", "direction": "log",
                                "input": "x.jsonl", "process": PROC})
        assert main(["transform", "--config", cfg,
                     "--out", str(tmp_path / "o.json")]) == 1
