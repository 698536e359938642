"""Command-line interface tests.

Estimation commands run with deliberately short chains so the whole file
stays fast; the assertions target file contracts, determinism, and error
handling rather than statistical quality.
"""

import argparse
import json
import subprocess
import sys

import numpy as np
import pytest

from linewidth import __version__, cli
from linewidth.cli import (
    interval_covers,
    _grid_from_text,
    _merge_settings,
    _parse_bool,
    _parse_region,
    _parse_truncations,
    _read_config_file,
)
from linewidth.lineshape import (
    read_scenario,
    read_spectrum,
    sample_scenario,
    true_mean_gamma,
    write_scenario,
)
from linewidth.mcmc import read_chain

SYNTH_ARGS = [
    "synth",
    "--kind",
    "lorentzian",
    "--bands",
    "2",
    "--seed",
    "4",
    "--grid",
    "1500:1800:64",
]
ESTIMATE_FLAGS = [
    "--chain-length",
    "800",
    "--burn-in",
    "300",
    "--realizations",
    "3",
    "--gamma-samples",
    "150",
]


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert cli.main([*SYNTH_ARGS, "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def estimate_dir(synth_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("estimate")
    args = [
        "estimate",
        str(synth_dir / "spectrum.txt"),
        *ESTIMATE_FLAGS,
        "--P",
        "6",
        "--seed",
        "11",
        "--out",
        str(out),
    ]
    assert cli.main(args) == 0
    return out


class TestParseRegion:
    def test_parses_and_orders_endpoints(self):
        assert _parse_region("1500:1800") == (1500.0, 1800.0)
        assert _parse_region("1800:1500") == (1500.0, 1800.0)

    @pytest.mark.parametrize("text", ["abc:1", "1:2:3", "5:5", "1500"])
    def test_rejects_malformed_regions(self, text):
        with pytest.raises(ValueError):
            _parse_region(text)


class TestParseTruncations:
    def test_single_count(self):
        assert _parse_truncations("30") == [30]

    def test_inclusive_progression(self):
        assert _parse_truncations("20:10:50") == [20, 30, 40, 50]
        assert _parse_truncations("20:10:55") == [20, 30, 40, 50]

    @pytest.mark.parametrize("text", ["20:0:50", "50:10:20", "a", "1:2"])
    def test_rejects_malformed_progressions(self, text):
        with pytest.raises(ValueError):
            _parse_truncations(text)


class TestParseBool:
    @pytest.mark.parametrize("text", ["true", "YES", "1", "on"])
    def test_truthy(self, text):
        assert _parse_bool(text) is True

    @pytest.mark.parametrize("text", ["false", "No", "0", "off"])
    def test_falsy(self, text):
        assert _parse_bool(text) is False

    def test_rejects_ambiguous(self):
        with pytest.raises(ValueError):
            _parse_bool("maybe")


class TestGridFromText:
    def test_builds_linspace(self):
        assert np.array_equal(_grid_from_text("100:200:16"), np.linspace(100.0, 200.0, 16))

    @pytest.mark.parametrize("text", ["200:100:16", "100:200:4", "1:2"])
    def test_rejects_malformed_grids(self, text):
        with pytest.raises(ValueError):
            _grid_from_text(text)


class TestConfigFile:
    def test_reads_typed_values_and_comments(self, tmp_path):
        path = tmp_path / "settings.cfg"
        path.write_text(
            "# sampler settings\n"
            "seed 7\n"
            "\n"
            "region 1500:1700   # analysis window\n"
            "curve on\n"
            "truncation 12\n"
        )
        assert _read_config_file(path) == {
            "seed": 7,
            "region": (1500.0, 1700.0),
            "curve": True,
            "truncation": 12,
        }

    def test_rejects_unknown_key(self, tmp_path):
        path = tmp_path / "settings.cfg"
        path.write_text("widgets 3\n")
        with pytest.raises(ValueError, match="unknown config key"):
            _read_config_file(path)

    def test_rejects_valueless_line(self, tmp_path):
        path = tmp_path / "settings.cfg"
        path.write_text("# comment\nseed\n")
        with pytest.raises(ValueError, match="line 2: cannot parse"):
            _read_config_file(path)

    def test_merge_precedence_flags_over_file_over_defaults(self, tmp_path):
        path = tmp_path / "settings.cfg"
        path.write_text("seed 7\ntruncation 12\n")
        args = argparse.Namespace(config=str(path), seed=9)
        merged = _merge_settings(args, cli._ESTIMATE_DEFAULTS)
        assert merged["seed"] == 9
        assert merged["truncation"] == 12
        assert merged["realizations"] == cli._ESTIMATE_DEFAULTS["realizations"]


class TestIntervalCovers:
    def test_truth_inside_interval(self):
        assert interval_covers(10.0, 8.0, 12.0, 0.0)
        assert interval_covers(8.0, 8.0, 12.0, 0.0)
        assert interval_covers(12.0, 8.0, 12.0, 0.0)

    def test_truth_above_interval_never_covered(self):
        assert not interval_covers(15.0, 8.0, 12.0, 0.99)

    def test_boundary_rule_needs_rejected_mass(self):
        # truth at zero sits below a strictly positive interval; the
        # rejected fraction stands in for the missing mass at the boundary
        assert interval_covers(0.0, 0.5, 2.0, cli.BOUNDARY_REJECTION_FRACTION)
        assert not interval_covers(0.0, 0.5, 2.0, 0.9 * cli.BOUNDARY_REJECTION_FRACTION)
        assert interval_covers(0.4, 0.5, 2.0, 0.5)


class TestSynth:
    def test_writes_scenario_spectrum_and_manifest(self, synth_dir):
        scenario = read_scenario(synth_dir / "scenario.txt")
        assert scenario.kind == "lorentzian"
        assert scenario.params.n_bands == 2
        spectrum = read_spectrum(synth_dir / "spectrum.txt")
        assert spectrum.n_points == 64

        payload = json.loads((synth_dir / "synth_manifest.json").read_text())
        assert payload["kind"] == "lorentzian"
        assert payload["bands"] == 2
        assert payload["noise_seed"] == 4
        assert payload["true_gamma_mean"] == pytest.approx(
            true_mean_gamma(scenario.params)
        )
        manifest = payload["manifest"]
        assert manifest["command"] == "synth"
        assert manifest["version"] == __version__
        assert manifest["seed"] == 4

    def test_echoes_truth_and_paths(self, tmp_path, capsys):
        assert cli.main([*SYNTH_ARGS, "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "true gamma_mean:" in out
        assert "wrote" in out

    def test_rerun_is_byte_identical(self, synth_dir, tmp_path):
        assert cli.main([*SYNTH_ARGS, "--out", str(tmp_path)]) == 0
        for name in ("scenario.txt", "spectrum.txt"):
            assert (tmp_path / name).read_bytes() == (synth_dir / name).read_bytes()

    def test_noise_seed_changes_spectrum_only(self, synth_dir, tmp_path):
        assert cli.main([*SYNTH_ARGS, "--noise-seed", "99", "--out", str(tmp_path)]) == 0
        assert (
            (tmp_path / "scenario.txt").read_bytes()
            == (synth_dir / "scenario.txt").read_bytes()
        )
        assert (
            (tmp_path / "spectrum.txt").read_bytes()
            != (synth_dir / "spectrum.txt").read_bytes()
        )

    def test_scenario_file_reuse(self, synth_dir, tmp_path):
        source = synth_dir / "scenario.txt"
        assert cli.main(["synth", "--scenario", str(source), "--out", str(tmp_path)]) == 0
        for name in ("scenario.txt", "spectrum.txt"):
            assert (tmp_path / name).read_bytes() == (synth_dir / name).read_bytes()
        payload = json.loads((tmp_path / "synth_manifest.json").read_text())
        assert payload["manifest"]["inputs"] == [str(source)]

    def test_backwards_grid_fails_cleanly(self, tmp_path, capsys):
        code = cli.main(["synth", "--grid", "200:100:16", "--out", str(tmp_path)])
        assert code == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_unknown_kind_is_a_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["synth", "--kind", "junk", "--out", str(tmp_path)])
        assert excinfo.value.code == 2

    def test_unwritable_out_path_names_the_path(self, tmp_path, capsys):
        blocker = tmp_path / "blocker"
        blocker.write_text("a file, not a directory\n")
        out = blocker / "sub"
        code = cli.main(["synth", "--kind", "lorentzian", "--bands", "1", "--out", str(out)])
        assert code == 1
        err = capsys.readouterr().err
        assert err.startswith("error:")
        assert "blocker" in err


class TestEstimate:
    def test_report_structure(self, synth_dir, estimate_dir):
        report = json.loads((estimate_dir / "report.json").read_text())
        assert set(report) == {"gamma_mean", "gamma_ci95", "rejected", "config", "manifest"}
        lo, hi = report["gamma_ci95"]
        assert lo < report["gamma_mean"] < hi
        assert report["rejected"] >= 0

        config = report["config"]
        assert config["truncation"] == 6
        assert config["seed"] == 11
        assert config["realizations"] == 3
        assert config["chain_length"] == 800
        assert config["region"] is None
        assert config["curve"] is False

        manifest = report["manifest"]
        assert set(manifest) == {
            "command",
            "inputs",
            "region",
            "seed",
            "version",
            "started",
            "finished",
        }
        assert manifest["command"] == "estimate"
        assert manifest["inputs"] == [str(synth_dir / "spectrum.txt")]
        assert manifest["version"] == __version__

    def test_output_files_parse(self, estimate_dir):
        report = json.loads((estimate_dir / "report.json").read_text())
        lines = (estimate_dir / "gamma_samples.txt").read_text().splitlines()
        header = lines[0].split()
        accepted, rejected = int(header[2]), int(header[4])
        assert accepted + rejected == 150
        assert rejected == report["rejected"]
        values = [float(line) for line in lines[1:]]
        assert len(values) == accepted
        assert np.mean(values) == pytest.approx(report["gamma_mean"])

        samples1, _, burn1 = read_chain(estimate_dir / "chain_stage1.txt")
        samples2, _, burn2 = read_chain(estimate_dir / "chain_stage2.txt")
        assert samples1.shape == (800, 4)
        assert samples2.shape == (800, 5)
        assert burn1 == burn2 == 300
        dataset = np.loadtxt(estimate_dir / "fourier_dataset.txt")
        assert dataset.shape == (3 * 6, 4)

    def test_config_file_matches_flags_and_rerun_is_identical(
        self, synth_dir, estimate_dir, tmp_path, capsys
    ):
        # seed and truncation arrive via file this time; the merged
        # settings are the same, so everything but timestamps must match
        cfg = tmp_path / "settings.cfg"
        cfg.write_text("seed 11\ntruncation 6\n")
        out = tmp_path / "run"
        args = [
            "estimate",
            str(synth_dir / "spectrum.txt"),
            *ESTIMATE_FLAGS,
            "--config",
            str(cfg),
            "--out",
            str(out),
        ]
        assert cli.main(args) == 0
        captured = capsys.readouterr()
        assert "gamma_mean:" in captured.out
        assert "estimating:" in captured.err

        first = json.loads((estimate_dir / "report.json").read_text())
        second = json.loads((out / "report.json").read_text())
        for report in (first, second):
            report["manifest"].pop("started")
            report["manifest"].pop("finished")
        assert first == second
        for name in ("gamma_samples.txt", "fourier_dataset.txt"):
            assert (out / name).read_bytes() == (estimate_dir / name).read_bytes()

    def test_curve_flag_writes_curve_file(self, synth_dir, tmp_path):
        args = [
            "estimate",
            str(synth_dir / "spectrum.txt"),
            *ESTIMATE_FLAGS,
            "--P",
            "6",
            "--seed",
            "11",
            "--curve",
            "--curve-points",
            "8",
            "--curve-draws",
            "12",
            "--out",
            str(tmp_path),
        ]
        assert cli.main(args) == 0
        curve = np.loadtxt(tmp_path / "gamma_curve.txt")
        assert curve.shape == (8, 4)
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["config"]["curve"] is True
        assert report["config"]["curve_points"] == 8

    def test_missing_spectrum_fails_cleanly(self, tmp_path, capsys):
        code = cli.main(["estimate", str(tmp_path / "nope.txt"), "--out", str(tmp_path)])
        assert code == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_bad_region_flag_is_a_usage_error(self, synth_dir, tmp_path):
        args = ["estimate", str(synth_dir / "spectrum.txt"), "--region", "1:2:3"]
        with pytest.raises(SystemExit) as excinfo:
            cli.main(args)
        assert excinfo.value.code == 2

    def test_non_integer_truncation_is_a_usage_error(self, synth_dir):
        args = ["estimate", str(synth_dir / "spectrum.txt"), "--P", "abc"]
        with pytest.raises(SystemExit) as excinfo:
            cli.main(args)
        assert excinfo.value.code == 2

    def test_unknown_config_key_fails_cleanly(self, synth_dir, tmp_path, capsys):
        cfg = tmp_path / "settings.cfg"
        cfg.write_text("frobnicate 3\n")
        args = [
            "estimate",
            str(synth_dir / "spectrum.txt"),
            "--config",
            str(cfg),
            "--out",
            str(tmp_path),
        ]
        assert cli.main(args) == 1
        assert "unknown config key" in capsys.readouterr().err

    def test_undersized_truncation_fails_cleanly(self, synth_dir, tmp_path, capsys):
        args = [
            "estimate",
            str(synth_dir / "spectrum.txt"),
            "--P",
            "3",
            "--out",
            str(tmp_path),
        ]
        assert cli.main(args) == 1
        assert "truncation" in capsys.readouterr().err


class TestSensitivity:
    def test_scan_outputs(self, synth_dir, tmp_path, capsys):
        args = [
            "sensitivity",
            str(synth_dir / "spectrum.txt"),
            "--P",
            "6:2:8",
            "--chain-length",
            "600",
            "--burn-in",
            "250",
            "--realizations",
            "3",
            "--gamma-samples",
            "100",
            "--seed",
            "3",
            "--out",
            str(tmp_path),
        ]
        assert cli.main(args) == 0
        captured = capsys.readouterr()
        assert "P=6:" in captured.out
        assert "P=8:" in captured.out

        lines = (tmp_path / "sensitivity.tsv").read_text().splitlines()
        assert lines[0] == "truncation\tgamma_mean\tlower\tupper\terror"
        rows = [line.split("\t") for line in lines[1:]]
        assert [int(row[0]) for row in rows] == [6, 8]
        for row in rows:
            lower, upper = float(row[2]), float(row[3])
            assert lower <= float(row[1]) <= upper
            assert row[4] == ""

        payload = json.loads((tmp_path / "sensitivity_manifest.json").read_text())
        assert payload["truncations"] == [6, 8]
        assert payload["manifest"]["command"] == "sensitivity"
        # the plot is optional equipment; the summary must say when it exists
        assert (tmp_path / "sensitivity.png").exists() == (
            "sensitivity.png" in captured.out
        )

        # the plotting stub ships regardless and must at least be valid code
        stub = tmp_path / "plot_sensitivity.py"
        assert "plot_sensitivity.py" in captured.out
        compile(stub.read_text(), str(stub), "exec")

    def test_plot_stub_renders_the_table(self, synth_dir, tmp_path):
        pytest.importorskip("matplotlib")
        (tmp_path / "sensitivity.tsv").write_text(
            "truncation\tgamma_mean\tlower\tupper\terror\n"
            "6\t5.0\t4.0\t7.0\t\n"
            "8\tnan\tnan\tnan\tsynthetic failure\n"
        )
        cli._write_plot_stub(tmp_path / "plot_sensitivity.py")
        proc = subprocess.run(
            [sys.executable, "plot_sensitivity.py"],
            cwd=tmp_path,
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "sensitivity.png").exists()

    def test_truncations_flag_is_required(self, synth_dir):
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["sensitivity", str(synth_dir / "spectrum.txt")])
        assert excinfo.value.code == 2


class TestValidate:
    def test_coverage_report_structure(self, tmp_path, capsys):
        scenario_path = tmp_path / "scenario.txt"
        write_scenario(
            scenario_path,
            sample_scenario("lorentzian", 1, 6, np.linspace(1500.0, 1800.0, 64)),
        )
        args = [
            "validate",
            "--scenario",
            str(scenario_path),
            "--repeats",
            "2",
            "--chain-length",
            "600",
            "--burn-in",
            "250",
            "--realizations",
            "3",
            "--gamma-samples",
            "150",
            "--P",
            "6",
            "--seed",
            "2",
            "--out",
            str(tmp_path),
        ]
        assert cli.main(args) == 0
        assert "coverage" in capsys.readouterr().out

        report = json.loads((tmp_path / "validate_report.json").read_text())
        assert report["kind"] == "lorentzian"
        assert report["repeats"] == 2
        assert report["needed"] == 2
        assert report["covered"] == sum(row["covered"] for row in report["rows"])
        assert report["passed"] == (report["covered"] >= report["needed"])
        assert len(report["rows"]) == 2
        for row in report["rows"]:
            assert {"repeat", "noise_seed", "pipeline_seed", "covered"} <= set(row)
            if "error" not in row:
                assert {"gamma_mean", "lower", "upper", "rejected_fraction"} <= set(row)
        assert report["manifest"]["inputs"] == [str(scenario_path)]
        assert report["config"]["chain_length"] == 600

    def test_single_repeat_coverage_is_all_or_nothing(self, tmp_path):
        scenario_path = tmp_path / "scenario.txt"
        write_scenario(
            scenario_path,
            sample_scenario("lorentzian", 1, 6, np.linspace(1500.0, 1800.0, 64)),
        )
        args = [
            "validate",
            "--scenario",
            str(scenario_path),
            "--repeats",
            "1",
            "--chain-length",
            "600",
            "--burn-in",
            "250",
            "--realizations",
            "3",
            "--gamma-samples",
            "150",
            "--P",
            "6",
            "--seed",
            "2",
            "--out",
            str(tmp_path),
        ]
        assert cli.main(args) == 0
        report = json.loads((tmp_path / "validate_report.json").read_text())
        assert report["repeats"] == 1
        assert report["covered"] in (0, 1)
        assert len(report["rows"]) == 1

    def test_reference_scenarios_load(self):
        for kind in ("lorentzian", "gaussian", "voigt"):
            scenario = cli._load_reference_scenario(kind)
            assert scenario.kind == kind
            assert scenario.grid().size == 512
            assert scenario.sigma_epsilon > 0
        assert true_mean_gamma(cli._load_reference_scenario("gaussian").params) == 0.0
        assert true_mean_gamma(cli._load_reference_scenario("lorentzian").params) > 0.0

    def test_kind_and_scenario_are_exclusive(self, tmp_path):
        args = ["validate", "--kind", "voigt", "--scenario", str(tmp_path / "s.txt")]
        with pytest.raises(SystemExit) as excinfo:
            cli.main(args)
        assert excinfo.value.code == 2
