"""Command-line interface: schemas, exit codes, provenance round-trip."""

import csv
import io
import subprocess
import sys

import pytest

from b92sim.analytic import expected_link_budget
from b92sim.cli import UsageError, load_config, main
from b92sim.config import SimConfig
from b92sim.engine import CSV_COLUMNS, run_trial


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def parse_csv(text):
    return list(csv.reader(io.StringIO(text)))


class TestLoadConfig:
    def test_defaults_when_no_file(self):
        assert load_config(None, []) == SimConfig()

    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.toml"
        path.write_text("")
        assert load_config(str(path), []) == SimConfig()

    def test_file_then_overrides_then_defaults(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text("clock_ghz = 1.5\nmu = 0.2\n")
        cfg = load_config(str(path), ["mu=0.3", "n_slots=5000"])
        assert cfg.clock_ghz == 1.5          # from file
        assert cfg.mu == 0.3                 # override beats file
        assert cfg.n_slots == 5000           # override beats default
        assert cfg.distance_km == 6.55       # untouched default

    def test_unknown_field_named_in_error(self):
        with pytest.raises(UsageError, match="bogus"):
            load_config(None, ["bogus=1"])

    def test_out_of_range_value_names_field(self):
        with pytest.raises(UsageError, match="clock_ghz"):
            load_config(None, ["clock_ghz=-1"])

    def test_missing_file(self):
        with pytest.raises(UsageError, match="cannot read"):
            load_config("/no/such/file.toml", [])

    def test_malformed_override(self):
        with pytest.raises(UsageError, match="key=value"):
            load_config(None, ["clock_ghz"])

    def test_string_field_override(self):
        cfg = load_config(None, ["detector_profile=standard"])
        assert cfg.detector_profile == "standard"


class TestSimulateCommand:
    def test_csv_schema_and_path_on_stdout(self, capsys, tmp_path):
        out = tmp_path / "r.csv"
        code, stdout, stderr = run_cli(
            capsys, "simulate", "--set", "n_slots=100000", "--out", str(out))
        assert code == 0
        assert stdout == f"{out}\n"
        rows = parse_csv(out.read_text())
        assert rows[0] == CSV_COLUMNS
        assert len(rows) == 2

    def test_stdout_streaming_without_out(self, capsys):
        code, stdout, _ = run_cli(capsys, "simulate", "--set", "n_slots=100000")
        assert code == 0
        rows = parse_csv(stdout)
        assert rows[0] == CSV_COLUMNS

    def test_config_echo_reloads_identically(self, capsys):
        code, _, stderr = run_cli(
            capsys, "simulate", "--set", "n_slots=100000", "--set", "clock_ghz=3.3")
        assert code == 0
        echoed = SimConfig.from_toml_str(stderr)
        assert echoed == SimConfig(n_slots=100_000, clock_ghz=3.3)
        assert "clock_ghz = 3.3" in stderr

    def test_nine_significant_digits(self, capsys):
        cfg = SimConfig(n_slots=200_000)
        expected = run_trial(cfg)
        code, stdout, _ = run_cli(capsys, "simulate", "--set", "n_slots=200000")
        assert code == 0
        rows = parse_csv(stdout)
        record = dict(zip(rows[0], rows[1]))
        assert record["qber_measured"] == "%.9g" % expected.qber_measured
        assert record["sifted_length"] == str(expected.sifted_length)

    def test_protocol_failure_exits_2_but_writes_report(self, capsys, tmp_path):
        out = tmp_path / "fail.csv"
        code, stdout, stderr = run_cli(
            capsys, "simulate", "--set", "n_slots=2000", "--set", "distance_km=80",
            "--set", "mu=0.001", "--set", "dark_count_rate_cps=0",
            "--out", str(out))
        assert code == 2
        assert "protocol failure" in stderr
        rows = parse_csv(out.read_text())
        assert dict(zip(rows[0], rows[1]))["failure"] != ""


class TestSweepCommand:
    def test_row_per_point(self, capsys, tmp_path):
        out = tmp_path / "s.csv"
        code, stdout, _ = run_cli(
            capsys, "sweep", "--set", "n_slots=50000",
            "--axis", "clock_ghz=1.0,2.0,3.0", "--out", str(out))
        assert code == 0
        rows = parse_csv(out.read_text())
        assert rows[0][0] == "clock_ghz"
        assert rows[0][1:] == CSV_COLUMNS
        assert len(rows) == 4
        assert [r[0] for r in rows[1:]] == ["1", "2", "3"]

    def test_workers_flag_changes_nothing(self, capsys):
        code1, out1, _ = run_cli(capsys, "sweep", "--set", "n_slots=50000",
                                 "--axis", "distance_km=0,6.55")
        code2, out2, _ = run_cli(capsys, "sweep", "--set", "n_slots=50000",
                                 "--axis", "distance_km=0,6.55", "--workers", "2")
        assert code1 == code2 == 0
        strip = lambda text: [
            [cell for i, cell in enumerate(row)
             if i != len(row) - 2]  # wall-time column differs
            for row in parse_csv(text)]
        assert strip(out1) == strip(out2)

    def test_unknown_axis_is_usage_error(self, capsys):
        code, _, stderr = run_cli(capsys, "sweep", "--axis", "warp_factor=9")
        assert code == 1
        assert "warp_factor" in stderr

    def test_malformed_axis_is_usage_error(self, capsys):
        code, _, _ = run_cli(capsys, "sweep", "--axis", "clock_ghz")
        assert code == 1


class TestAnalyticCommand:
    def test_qber_curve_schema_and_default_grid(self, capsys):
        code, stdout, _ = run_cli(capsys, "analytic", "--curve", "qber_vs_clock")
        assert code == 0
        rows = parse_csv(stdout)
        assert rows[0] == ["clock_ghz", "qber_standard", "qber_enhanced",
                           "improvement"]
        assert len(rows) == 7
        assert [float(r[0]) for r in rows[1:]] == [1.0, 1.5, 2.0, 2.5, 3.0, 3.3]

    def test_qber_curve_matches_direct_budgets(self, capsys):
        code, stdout, _ = run_cli(capsys, "analytic", "--curve", "qber_vs_clock",
                                  "--grid", "2.0")
        assert code == 0
        row = parse_csv(stdout)[1]
        std = expected_link_budget(SimConfig(clock_ghz=2.0,
                                             detector_profile="standard"))
        enh = expected_link_budget(SimConfig(clock_ghz=2.0,
                                             detector_profile="enhanced"))
        assert float(row[1]) == pytest.approx(std.qber_total, rel=1e-8)
        assert float(row[2]) == pytest.approx(enh.qber_total, rel=1e-8)
        assert float(row[3]) == pytest.approx(std.qber_total - enh.qber_total,
                                              rel=1e-6)

    def test_rate_curve_schema(self, capsys):
        code, stdout, _ = run_cli(capsys, "analytic", "--curve", "rate_vs_distance",
                                  "--grid", "0,6.55,11")
        assert code == 0
        rows = parse_csv(stdout)
        assert rows[0] == ["distance_km", "r_sift_cps", "r_net_cps"]
        assert len(rows) == 4
        nets = [float(r[2]) for r in rows[1:]]
        assert nets[0] > nets[1] > nets[2] > 0

    def test_degenerate_link_is_runtime_error(self, capsys):
        code, _, stderr = run_cli(
            capsys, "analytic", "--curve", "rate_vs_distance",
            "--set", "mu=1e-9", "--set", "dark_count_rate_cps=0", "--grid", "80")
        assert code == 2
        assert "error" in stderr

    def test_bad_grid_is_usage_error(self, capsys):
        code, _, _ = run_cli(capsys, "analytic", "--curve", "qber_vs_clock",
                             "--grid", "one,two")
        assert code == 1

    def test_curve_name_is_validated(self, capsys):
        code, _, _ = run_cli(capsys, "analytic", "--curve", "banana")
        assert code == 1


class TestHistogramCommand:
    def test_schema_and_totals(self, capsys, tmp_path):
        out = tmp_path / "h.csv"
        code, stdout, _ = run_cli(capsys, "histogram",
                                  "--set", "n_slots=100000", "--out", str(out))
        assert code == 0
        rows = parse_csv(out.read_text())
        assert rows[0] == ["bin_start_ps", "count"]
        assert len(rows) > 2
        assert sum(int(r[1]) for r in rows[1:]) > 0

    def test_no_clicks_is_runtime_error(self, capsys):
        code, _, stderr = run_cli(
            capsys, "histogram", "--set", "n_slots=2000", "--set", "distance_km=80",
            "--set", "mu=0.001", "--set", "dark_count_rate_cps=0")
        assert code == 2


class TestExitCodes:
    def test_unknown_command(self, capsys):
        assert run_cli(capsys, "frobnicate")[0] == 1

    def test_unknown_field(self, capsys):
        assert run_cli(capsys, "simulate", "--set", "bogus=1")[0] == 1

    def test_out_of_range_value(self, capsys):
        code, _, stderr = run_cli(capsys, "simulate", "--set", "clock_ghz=-1")
        assert code == 1
        assert "clock_ghz" in stderr

    def test_missing_config_file(self, capsys):
        assert run_cli(capsys, "simulate", "--config", "/no/such.toml")[0] == 1

    def test_unwritable_output(self, capsys):
        code, _, _ = run_cli(capsys, "simulate", "--set", "n_slots=50000",
                             "--out", "/no/such/dir/r.csv")
        assert code == 2

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "b92sim.cli", "analytic", "--curve",
         "qber_vs_clock", "--grid", "2.0"],
        capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert proc.stdout.startswith("clock_ghz,qber_standard")
    assert "clock_ghz = 2.0" in proc.stderr
