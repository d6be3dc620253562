"""Command-line front end: subcommands, exit codes, manifests, rendering."""

import json
import xml.etree.ElementTree as ET

import pytest

from blockembed.cli import EXIT_CAP, EXIT_CONFIG, EXIT_OK, EXIT_PRECONDITION, main


def run(capsys, *args):
    code = main(list(args))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestAuditParams:
    def test_ten_rows(self, capsys):
        code, out, _ = run(capsys, "audit-params", "--profile", "published")
        assert code == EXIT_OK
        rows = [l for l in out.splitlines() if l and not l.startswith(("constraint", "overall"))]
        assert len(rows) == 10

    def test_override_flags(self, capsys):
        code, out, _ = run(capsys, "audit-params", "--profile", "published",
                           "--alpha", "7", "--gamma", "280")
        assert code == EXIT_OK
        assert any("gamma > 40*alpha" in l and "False" in l for l in out.splitlines())

    def test_unknown_profile_is_config_error(self, capsys):
        code, _, _ = run(capsys, "audit-params", "--profile", "missing")
        assert code == EXIT_CONFIG


class TestBuild:
    def test_deterministic_dump(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            code, _, _ = run(capsys, "build", "--profile", "toy1", "--seed", "5",
                             "--window", "0", "0", "2", "2", "--out-dir", str(d))
            assert code == EXIT_OK
        fa = (a / "hierarchy-Y-5.txt").read_text()
        fb = (b / "hierarchy-Y-5.txt").read_text()
        assert fa == fb

    def test_manifest_written(self, tmp_path, capsys):
        code, _, _ = run(capsys, "build", "--seed", "5", "--out-dir", str(tmp_path / "m"))
        assert code == EXIT_OK
        manifest = json.loads((tmp_path / "m" / "manifest.json").read_text())
        assert manifest["subcommand"] == "build"
        assert "config_hash" in manifest and manifest["artifacts"]

    def test_no_overwrite(self, tmp_path, capsys):
        d = tmp_path / "x"
        code, _, _ = run(capsys, "build", "--seed", "5", "--out-dir", str(d))
        assert code == EXIT_OK
        code, _, _ = run(capsys, "build", "--seed", "5", "--out-dir", str(d))
        assert code == EXIT_PRECONDITION


class TestSampleAndOracle:
    def test_round_trip_through_files(self, tmp_path, capsys):
        code, _, _ = run(capsys, "sample", "--seed", "1", "--family", "X",
                         "--width", "2", "--height", "2",
                         "--out-dir", str(tmp_path / "sx"))
        assert code == EXIT_OK
        code, _, _ = run(capsys, "sample", "--seed", "2", "--family", "Y",
                         "--width", "5", "--height", "5",
                         "--out-dir", str(tmp_path / "sy"))
        assert code == EXIT_OK
        code, out, _ = run(capsys, "oracle",
                           "--x-file", str(tmp_path / "sx" / "field-X-1.bin"),
                           "--y-file", str(tmp_path / "sy" / "field-Y-2.bin"),
                           "-m", "2", "--mode", "count")
        assert code == EXIT_OK
        assert "count" in json.loads(out.strip())

    def test_node_cap_exit_code(self, tmp_path, capsys):
        run(capsys, "sample", "--seed", "1", "--family", "X", "--width", "2",
            "--height", "2", "--out-dir", str(tmp_path / "sx"))
        run(capsys, "sample", "--seed", "2", "--family", "Y", "--width", "5",
            "--height", "5", "--out-dir", str(tmp_path / "sy"))
        code, _, _ = run(capsys, "oracle",
                         "--x-file", str(tmp_path / "sx" / "field-X-1.bin"),
                         "--y-file", str(tmp_path / "sy" / "field-Y-2.bin"),
                         "-m", "2", "--mode", "count", "--node-cap", "1")
        assert code == EXIT_CAP


class TestEstimateAndReports:
    def test_estimate_s_runs(self, capsys):
        code, out, _ = run(capsys, "estimate-s", "--profile", "toy-m0-3",
                           "--seed", "3", "--trials", "200",
                           "--window", "0", "0", "1", "1")
        assert code == EXIT_OK
        assert out.startswith("level,size,point")

    def test_estimate_s_level_validation(self, capsys):
        code, _, _ = run(capsys, "estimate-s", "--level", "2")
        assert code == EXIT_CONFIG

    def test_reports_deterministic(self, tmp_path, capsys):
        args = ("reports", "--profile", "toy-m0-3", "--seed", "3",
                "--windows", "2", "--window", "0", "0", "3", "3")
        code, _, _ = run(capsys, *args, "--out-dir", str(tmp_path / "r1"))
        assert code == EXIT_OK
        code, _, _ = run(capsys, *args, "--out-dir", str(tmp_path / "r2"))
        assert code == EXIT_OK
        for name in ("tail.csv", "size.csv", "good.csv", "tail.records"):
            assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()


class TestRender:
    def test_svg_well_formed_and_cross_counted(self, tmp_path, capsys):
        code, _, _ = run(capsys, "build", "--profile", "toy1", "--seed", "7",
                         "--window", "0", "0", "2", "2",
                         "--out-dir", str(tmp_path / "b"))
        assert code == EXIT_OK
        code, _, _ = run(capsys, "render", "--profile", "toy1", "--seed", "7",
                         "--window", "0", "0", "2", "2",
                         "--out-dir", str(tmp_path / "r"))
        assert code == EXIT_OK
        svg = (tmp_path / "r" / "level1-Y-7.svg").read_text()
        root = ET.fromstring(svg)
        ns = "{http://www.w3.org/2000/svg}"
        blocks_in_svg = len([e for e in root.iter(f"{ns}g") if e.get("class") == "block"])
        dump = (tmp_path / "b" / "hierarchy-Y-7.txt").read_text()
        blocks_in_dump = sum(1 for l in dump.splitlines() if l.startswith("block level=1"))
        assert blocks_in_svg == blocks_in_dump > 0
        cells_in_svg = len([e for e in root.iter(f"{ns}rect") if e.get("class") == "cell"])
        assert cells_in_svg == 4


class TestConfigFile:
    def test_config_file_supplies_defaults(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("profile = toy-m0-3\nseed = 11\n")
        code, out, _ = run(capsys, "--config", str(cfg), "components")
        assert code == EXIT_OK
        assert out.startswith("level,status")

    def test_flags_win_over_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("seed = 11\n")
        d = tmp_path / "out"
        code, _, _ = run(capsys, "--config", str(cfg), "build", "--seed", "3",
                         "--out-dir", str(d))
        assert code == EXIT_OK
        assert (d / "hierarchy-Y-3.txt").exists()

    def test_malformed_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("what even is this\n")
        code, _, _ = run(capsys, "--config", str(cfg), "components")
        assert code == EXIT_CONFIG
