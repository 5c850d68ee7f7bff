import json

import numpy as np
import pytest

from modfield import (
    AnchorSet,
    BoxDomain,
    FieldSample,
    Grid,
    SeriesSpec,
    piecewise_modulus,
    power_modulus,
)
from modfield.cli import main


def write_config(tmp_path, name, data) -> str:
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def hat_spec_dict(n_max=31):
    return SeriesSpec(
        basis="faber_schauder",
        law="gaussian",
        n_max=n_max,
        domain=BoxDomain.unit_interval(),
        holder=0.5,
    ).to_dict()


def trig_spec_dict(n_max=64):
    return SeriesSpec(
        basis="trig_smooth",
        law="gaussian",
        n_max=n_max,
        domain=BoxDomain.unit_interval(),
        p=5.0,
        smooth_order=1,
    ).to_dict()


def theorem1_config():
    return {
        "spec": hat_spec_dict(),
        "modulus": power_modulus(0.4).to_dict(),
        "anchor_points": 17,
        "verify_points": 65,
        "checkpoints": [1, 3, 7, 31],
        "trials": 3,
        "seed": 11,
    }


def theorem2_config():
    return {
        "spec": trig_spec_dict(),
        "order": 1,
        "modulus": power_modulus(1.0).to_dict(),
        "grid_points": 129,
        "quadrature_points": 513,
        "checkpoints": [2, 8, 32],
        "trials": 2,
        "seed": 3,
    }


class TestValidateModulus:
    def test_pass(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path, "m.json", {"modulus": power_modulus(0.5).to_dict(), "samples": 257}
        )
        assert main(["validate-modulus", "--config", cfg]) == 0
        out = capsys.readouterr().out
        assert out.startswith("validate-modulus: PASS") and out.count("\n") == 1

    def test_fail_on_convex_knots(self, tmp_path, capsys):
        # strict construction would refuse these knots; the check subcommand
        # loads leniently and reports the violation instead
        bad = piecewise_modulus([(0, 0), (0.5, 0.4), (1.0, 0.8)]).to_dict()
        bad["knots"] = [[0.0, 0.0], [0.5, 0.1], [1.0, 1.0]]
        out_file = tmp_path / "report.json"
        cfg = write_config(tmp_path, "m.json", {"modulus": bad})
        assert main(["validate-modulus", "--config", cfg, "--out", str(out_file)]) == 1
        line = capsys.readouterr().out
        assert "FAIL" in line and "witness=" in line
        assert json.loads(out_file.read_text())["pass"] is False

    def test_csv_report(self, tmp_path):
        out_file = tmp_path / "report.csv"
        cfg = write_config(tmp_path, "m.json", {"modulus": power_modulus(0.5).to_dict()})
        main(["validate-modulus", "--config", cfg, "--out", str(out_file), "--format", "csv"])
        assert out_file.read_text().splitlines()[0] == "key,value"


class TestSeminorm:
    def test_reports_breakdown(self, tmp_path, capsys):
        grid = Grid.regular(BoxDomain.unit_interval(), 17)
        field = FieldSample(grid=grid, values=np.sin(grid.points[:, 0]))
        out_file = tmp_path / "sem.json"
        cfg = write_config(
            tmp_path,
            "s.json",
            {
                "modulus": power_modulus(1.0).to_dict(),
                "field": field.to_dict(),
                "origin_index": 0,
            },
        )
        assert main(["seminorm", "--config", cfg, "--out", str(out_file)]) == 0
        out = capsys.readouterr().out
        assert out.startswith("seminorm: sup=") and "witness=" in out
        data = json.loads(out_file.read_text())
        assert data["check"] == "holder-norm"
        assert "anchored" in data
        assert data["total"] == pytest.approx(data["sup_norm"] + data["theta_seminorm"])


class TestExtend:
    def consistent_config(self, tmp_path):
        pts = np.linspace(0.0, 1.0, 9)
        anchors = AnchorSet(
            points=pts, values=0.5 * pts, domain=BoxDomain.unit_interval()
        )
        return write_config(
            tmp_path,
            "e.json",
            {
                "anchors": anchors.to_dict(),
                "modulus": power_modulus(1.0).to_dict(),
                "probes": 64,
                "pairs": 64,
            },
        )

    def test_pass(self, tmp_path, capsys):
        assert main(["extend", "--config", self.consistent_config(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert out.startswith("extend: PASS")

    def test_report_written(self, tmp_path):
        out_file = tmp_path / "ext.json"
        main(["extend", "--config", self.consistent_config(tmp_path), "--out", str(out_file)])
        data = json.loads(out_file.read_text())
        assert data["pass"] is True
        assert {c["check"] for c in data["checks"]} == {"restriction", "sandwich", "modulus"}

    def test_inconsistent_anchors_fail(self, tmp_path, capsys):
        anchors = {
            "points": [[0.3], [0.3], [0.7]],
            "values": [0.0, 1.0, 0.0],
            "domain": BoxDomain.unit_interval().to_dict(),
        }
        cfg = write_config(
            tmp_path, "bad.json", {"anchors": anchors, "modulus": power_modulus(0.5).to_dict()}
        )
        assert main(["extend", "--config", cfg]) == 1
        assert "FAIL inconsistent-anchors" in capsys.readouterr().out


class TestSimulate:
    def test_csv_and_figure(self, tmp_path, capsys):
        out_file = tmp_path / "path.csv"
        cfg = write_config(
            tmp_path,
            "sim.json",
            {"spec": hat_spec_dict(), "grid_points": 65, "checkpoints": [4, 15], "seed": 2},
        )
        code = main(
            ["simulate", "--config", cfg, "--out", str(out_file), "--format", "csv", "--figures"]
        )
        assert code == 0
        assert capsys.readouterr().out.startswith("simulate: basis=faber_schauder")
        assert out_file.read_text().splitlines()[0] == "x0,value"
        assert (tmp_path / "path.png").exists()

    def test_json_fields(self, tmp_path):
        out_file = tmp_path / "path.json"
        cfg = write_config(
            tmp_path, "sim.json", {"spec": hat_spec_dict(), "grid_points": 33, "seed": 2}
        )
        main(["simulate", "--config", cfg, "--out", str(out_file)])
        data = json.loads(out_file.read_text())
        assert len(data["fields"]) == 1
        assert len(data["fields"][0]["values"]) == 33


class TestMartingaleCheckCommand:
    def test_pass(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            "mc.json",
            {"spec": trig_spec_dict(n_max=16), "n": 2, "x": 0.37, "trials": 400, "seed": 5},
        )
        assert main(["martingale-check", "--config", cfg]) == 0
        assert capsys.readouterr().out.startswith("martingale-check: PASS")


class TestExperimentCommands:
    def test_theorem1_pass_line_and_figures(self, tmp_path, capsys):
        out_file = tmp_path / "t1.json"
        cfg = write_config(tmp_path, "t1cfg.json", theorem1_config())
        code = main(["theorem1", "--config", cfg, "--out", str(out_file), "--figures"])
        assert code == 0
        out = capsys.readouterr().out
        assert out.startswith("theorem1: PASS") and out.count("\n") == 1
        assert out_file.exists()
        for stem in ("sup_error", "functional", "increment_ratio"):
            assert (tmp_path / f"t1_{stem}.png").exists()

    def test_theorem1_seed_override_is_effective_and_reproducible(self, tmp_path):
        cfg = write_config(tmp_path, "t1cfg.json", theorem1_config())
        paths = {name: tmp_path / f"{name}.json" for name in ("a", "b", "c")}
        main(["theorem1", "--config", cfg, "--seed", "123", "--out", str(paths["a"])])
        main(["theorem1", "--config", cfg, "--seed", "124", "--out", str(paths["b"])])
        main(["theorem1", "--config", cfg, "--seed", "123", "--out", str(paths["c"])])
        assert paths["a"].read_bytes() == paths["c"].read_bytes()
        assert paths["a"].read_bytes() != paths["b"].read_bytes()
        assert json.loads(paths["a"].read_text())["config"]["seed"] == 123

    def test_theorem2_csv(self, tmp_path, capsys):
        out_file = tmp_path / "t2.csv"
        cfg = write_config(tmp_path, "t2cfg.json", theorem2_config())
        code = main(["theorem2", "--config", cfg, "--out", str(out_file), "--format", "csv"])
        assert code == 0
        assert capsys.readouterr().out.startswith("theorem2: PASS")
        assert out_file.read_text().splitlines()[0] == "# kind: smooth"

    def test_parallel_output_identical(self, tmp_path):
        cfg = write_config(tmp_path, "t1cfg.json", theorem1_config())
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(["theorem1", "--config", cfg, "--out", str(a)])
        main(["theorem1", "--config", cfg, "--out", str(b), "--parallel", "2"])
        assert a.read_bytes() == b.read_bytes()


class TestErrorHandling:
    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["theorem1", "--config", str(tmp_path / "nope.json")]) == 2
        assert "error:" in capsys.readouterr().err

    def test_malformed_json(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert main(["validate-modulus", "--config", str(path)]) == 2
        assert "not valid JSON" in capsys.readouterr().err

    def test_non_object_config(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2, 3]")
        assert main(["seminorm", "--config", str(path)]) == 2

    def test_missing_required_key(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "empty.json", {})
        assert main(["validate-modulus", "--config", cfg]) == 2
        assert "missing required key" in capsys.readouterr().err

    def test_semantically_bad_experiment_config(self, tmp_path):
        bad = theorem1_config()
        bad["checkpoints"] = [1, 999]  # beyond n_max
        cfg = write_config(tmp_path, "bad.json", bad)
        assert main(["theorem1", "--config", cfg]) == 2

    def test_bad_parallel(self, tmp_path):
        cfg = write_config(tmp_path, "t1cfg.json", theorem1_config())
        assert main(["theorem1", "--config", cfg, "--parallel", "0"]) == 2

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
        assert capsys.readouterr().out.startswith("modfield ")

    def test_subcommand_required(self):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2
