import json
import math

import numpy as np
import pytest

from cltbounds.certify import (
    InapplicableBoundError,
    applicable_route,
    certify_cell,
    certify_grid,
    reports_to_csv,
    reports_to_json,
    resolve_theta,
    version_string,
)
from cltbounds.cli import (
    EXIT_CERTIFICATION_FAILED,
    EXIT_CONFIG_ERROR,
    EXIT_INAPPLICABLE,
    EXIT_OK,
    main,
)
from cltbounds.samplers import DistributionSpec, Kind


def write_config(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


class TestRouting:
    def test_routes(self):
        assert applicable_route(DistributionSpec(Kind.SIMPLEX, 4)) == "simplex"
        assert applicable_route(DistributionSpec(Kind.SPHERE_SHELL, 4)) == "spherical"
        assert applicable_route(DistributionSpec(Kind.BALL_UNIFORM, 4)) == "spherical"
        assert applicable_route(DistributionSpec(Kind.SPHERICAL_EXPONENTIAL, 4)) == "spherical"
        for kind, p in ((Kind.LP_BALL, 2.0), (Kind.LP_CONE, 1.0), (Kind.LINF_EXPONENTIAL, None)):
            spec = DistributionSpec(kind, 4, p=p)
            assert applicable_route(spec) == "unconditional"

    def test_surface_is_inapplicable(self):
        with pytest.raises(InapplicableBoundError):
            applicable_route(DistributionSpec(Kind.LP_SURFACE, 4, p=2.0))


class TestResolveTheta:
    def test_named(self):
        theta, label = resolve_theta("e1", 5)
        assert label == "e1" and theta[0] == 1.0 and abs(theta[1:]).max() == 0.0
        theta, label = resolve_theta("diagonal", 4)
        np.testing.assert_allclose(theta, 0.5)

    def test_random_seeded(self):
        a, _ = resolve_theta("random(7)", 6)
        b, _ = resolve_theta("random(7)", 6)
        c, _ = resolve_theta("random(8)", 6)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)
        assert np.linalg.norm(a) == pytest.approx(1.0)

    def test_explicit_normalized(self):
        theta, label = resolve_theta([3.0, 4.0], 2)
        np.testing.assert_allclose(theta, [0.6, 0.8])
        assert label == "explicit"

    def test_rejects_unknown(self):
        with pytest.raises(ValueError):
            resolve_theta("sideways", 4)
        with pytest.raises(ValueError):
            resolve_theta([1.0, 2.0], 3)


class TestCertifyCell:
    def test_cube_exact_moments_pass(self):
        spec = DistributionSpec(Kind.LP_BALL, 16, p=math.inf)
        report = certify_cell(spec, "diagonal", N=50_000, seed=1)
        assert report.passed
        assert report.bound_name == "unconditional[exact]"
        assert report.empirical.dkw_slack is not None
        names = [name for name, _ in report.informational]
        assert "unconditional-bounded" in names
        assert "sncp-bounded" in names
        assert "lp-two-branch" in names

    def test_cube_small_n_vacuous(self):
        spec = DistributionSpec(Kind.LP_BALL, 4, p=math.inf)
        report = certify_cell(spec, "e1", N=10_000, seed=2)
        assert report.vacuous and report.passed
        assert any("vacuous" in note for note in report.notes)

    def test_sphere_tv_route(self):
        spec = DistributionSpec(Kind.SPHERE_SHELL, 100)
        report = certify_cell(spec, "e1", N=20_000, seed=3)
        assert report.bound.kind == "total-variation"
        assert report.bound.value == pytest.approx(8.0 / 99.0)
        assert report.passed
        names = [name for name, _ in report.informational]
        assert "spherical-fixed-constant" in names

    def test_exponential_includes_poincare_info(self):
        spec = DistributionSpec(Kind.SPHERICAL_EXPONENTIAL, 50)
        report = certify_cell(spec, "e1", N=20_000, seed=4)
        names = dict(report.informational)
        assert "poincare-spectral-gap" in names
        assert names["poincare-spectral-gap"].value == pytest.approx(
            10 * math.sqrt(13) / math.sqrt(50)
        )

    def test_simplex_assembled_route(self):
        spec = DistributionSpec(Kind.SIMPLEX, 10)
        report = certify_cell(spec, "random(5)", N=50_000, seed=5)
        assert report.bound_name == "simplex-assembled"
        assert report.bound.constants_used["mode"] == "assembled"
        assert report.passed

    def test_mc_moment_route(self):
        spec = DistributionSpec(Kind.LP_CONE, 10, p=1.0)
        report = certify_cell(spec, "diagonal", N=50_000, seed=6)
        assert report.bound_name == "unconditional[monte-carlo]"
        assert report.passed

    def test_forced_failure_with_zero_constant(self):
        spec = DistributionSpec(Kind.SIMPLEX, 2)
        report = certify_cell(
            spec, "e1", N=20_000, seed=7, delta=0.5, constants={"c1": 0.0}
        )
        assert report.bound.value == 0.0
        assert not report.passed
        assert report.margin < 0


class TestCertifyGrid:
    def test_grid_shape_and_reuse(self):
        specs = [
            DistributionSpec(Kind.LP_BALL, 8, p=math.inf),
            DistributionSpec(Kind.SPHERE_SHELL, 8),
        ]
        reports = certify_grid(specs, ["e1", "diagonal"], N=20_000, seed=8)
        assert len(reports) == 4
        # same spec cells share the seed (same batch), distinct specs differ
        assert reports[0].seed == reports[1].seed
        assert reports[0].seed != reports[2].seed
        assert all(r.passed for r in reports)

    def test_serialization(self, tmp_path):
        specs = [DistributionSpec(Kind.LP_BALL, 6, p=math.inf)]
        reports = certify_grid(specs, ["e1"], N=10_000, seed=9)
        json_path = tmp_path / "r.json"
        csv_path = tmp_path / "r.csv"
        reports_to_json(reports, json_path, config={"note": "test"})
        reports_to_csv(reports, csv_path)
        payload = json.loads(json_path.read_text())
        assert payload["all_passed"] is True
        assert payload["config"] == {"note": "test"}
        assert payload["reports"][0]["bound"]["value"] > 0
        assert "cltbounds" in payload["version"]
        lines = csv_path.read_text().splitlines()
        assert lines[0].startswith("kind,")
        assert len(lines) == 2

    def test_version_string(self):
        assert "cltbounds" in version_string()


class TestCliSample:
    def test_writes_batch_and_summary(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "sample.json",
            {
                "command": "sample",
                "distribution": {"kind": "sphere_shell", "n": 10},
                "N": 1000,
                "seed": 3,
            },
        )
        assert main(["sample", "--config", cfg, "--out", str(tmp_path / "out")]) == EXIT_OK
        bin_path = tmp_path / "out" / "sphere_shell_n10_N1000_seed3.bin"
        json_path = tmp_path / "out" / "sphere_shell_n10_N1000_seed3.json"
        assert bin_path.exists() and json_path.exists()
        from cltbounds.samplers import SampleBatch

        batch = SampleBatch.load(bin_path)
        np.testing.assert_allclose(np.linalg.norm(batch.data, axis=1), math.sqrt(10), rtol=1e-12)
        summary = json.loads(json_path.read_text())["summary"]
        assert summary["count"] == 1000

    def test_identical_bytes_across_runs(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "sample.json",
            {
                "command": "sample",
                "distribution": {"kind": "simplex", "n": 3},
                "N": 500,
                "seed": 11,
            },
        )
        main(["sample", "--config", cfg, "--out", str(tmp_path / "a")])
        main(["sample", "--config", cfg, "--out", str(tmp_path / "b")])
        name = "simplex_n3_N500_seed11.bin"
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_invalid_n_exits_2(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "bad.json",
            {"command": "sample", "distribution": {"kind": "sphere_shell", "n": 10}, "N": 0},
        )
        assert main(["sample", "--config", cfg]) == EXIT_CONFIG_ERROR

    def test_missing_config_exits_2(self, tmp_path):
        assert main(["sample", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG_ERROR

    def test_command_mismatch_exits_2(self, tmp_path):
        cfg = write_config(tmp_path, "c.json", {"command": "certify"})
        assert main(["sample", "--config", cfg]) == EXIT_CONFIG_ERROR


class TestCliCertify:
    def test_small_grid_passes(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            "certify.json",
            {
                "command": "certify",
                "distributions": [{"kind": "lp_ball", "p": "inf", "n": [6, 8]}],
                "theta": ["diagonal", "random(1)"],
                "N": 20000,
                "seed": 5,
            },
        )
        code = main(["certify", "--config", cfg, "--out", str(tmp_path / "out")])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert out.count("PASS") == 4
        payload = json.loads((tmp_path / "out" / "certify.json").read_text())
        assert len(payload["reports"]) == 4
        assert (tmp_path / "out" / "certify.csv").exists()

    def test_failure_exits_1(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "fail.json",
            {
                "command": "certify",
                "distributions": [{"kind": "simplex", "n": 2}],
                "theta": ["e1"],
                "N": 20000,
                "seed": 7,
                "delta": 0.5,
                "constants": {"c1": 0.0},
            },
        )
        assert main(["certify", "--config", cfg, "--out", str(tmp_path / "out")]) == (
            EXIT_CERTIFICATION_FAILED
        )

    def test_surface_exits_3(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "surface.json",
            {
                "command": "certify",
                "distributions": [{"kind": "lp_surface", "p": 2.0, "n": 6}],
                "theta": ["e1"],
                "N": 20000,
                "seed": 1,
            },
        )
        assert main(["certify", "--config", cfg]) == EXIT_INAPPLICABLE

    def test_thread_count_does_not_change_results(self, tmp_path, monkeypatch):
        payload = {
            "command": "certify",
            "distributions": [
                {"kind": "lp_ball", "p": "inf", "n": 6},
                {"kind": "sphere_shell", "n": 6},
                {"kind": "simplex", "n": 6},
            ],
            "theta": ["e1", "diagonal"],
            "N": 20000,
            "seed": 13,
        }
        cfg = write_config(tmp_path, "c.json", payload)
        main(["certify", "--config", cfg, "--out", str(tmp_path / "serial")])
        monkeypatch.setenv("CLTBOUNDS_THREADS", "3")
        main(["certify", "--config", cfg, "--out", str(tmp_path / "threaded")])
        serial = json.loads((tmp_path / "serial" / "certify.json").read_text())["reports"]
        threaded = json.loads((tmp_path / "threaded" / "certify.json").read_text())["reports"]
        assert serial == threaded

    def test_seed_flag_overrides(self, tmp_path):
        payload = {
            "command": "certify",
            "distributions": [{"kind": "lp_ball", "p": "inf", "n": 6}],
            "theta": ["e1"],
            "N": 20000,
            "seed": 5,
        }
        cfg = write_config(tmp_path, "c.json", payload)
        main(["certify", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "99"])
        report = json.loads((tmp_path / "a" / "certify.json").read_text())["reports"][0]
        assert report["seed"] == 99


class TestCliReport:
    def test_report_renders(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            "certify.json",
            {
                "command": "certify",
                "distributions": [{"kind": "sphere_shell", "n": 50}],
                "theta": ["e1"],
                "N": 20000,
                "seed": 2,
            },
        )
        main(["certify", "--config", cfg, "--out", str(tmp_path / "out")])
        capsys.readouterr()
        code = main(["report", "--input", str(tmp_path / "out" / "certify.json")])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "sphere_shell" in out and "all passed" in out


class TestCliScanAnk:
    def test_scan_writes_csv(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            "ank.json",
            {
                "command": "scan-ank",
                "distribution": {"kind": "sphere_shell"},
                "n_list": [8, 12],
                "k": 1,
                "eps": 0.2,
                "n_subspaces": 3,
                "n_dirs": 2,
                "N": 5000,
                "seed": 3,
            },
        )
        assert main(["scan-ank", "--config", cfg, "--out", str(tmp_path / "out")]) == EXIT_OK
        rows = (tmp_path / "out" / "ank_scan.csv").read_text().splitlines()
        assert len(rows) == 3

    def test_empty_n_list_exits_2(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "ank.json",
            {
                "command": "scan-ank",
                "distribution": {"kind": "sphere_shell"},
                "n_list": [],
                "k": 1,
                "eps": 0.2,
                "n_subspaces": 2,
                "N": 5000,
            },
        )
        assert main(["scan-ank", "--config", cfg]) == EXIT_CONFIG_ERROR


class TestShippedConfigs:
    def test_all_configs_parse_and_route(self):
        import pathlib

        config_dir = pathlib.Path(__file__).resolve().parents[1] / "configs"
        paths = sorted(config_dir.glob("*.json"))
        assert len(paths) == 8  # one per long-running acceptance criterion
        known = {"sample", "certify", "scan-ank", "diagnose", "report", "tv-exact"}
        for path in paths:
            cfg = json.loads(path.read_text())
            assert cfg["command"] in known, path.name
            if cfg["command"] == "certify":
                for entry in cfg["distributions"]:
                    ns = entry["n"] if isinstance(entry["n"], list) else [entry["n"]]
                    for n in ns:
                        spec = DistributionSpec.from_dict({**entry, "n": n})
                        applicable_route(spec)  # must not raise
                assert cfg["N"] >= 10**6
                assert cfg["delta"] == pytest.approx(1e-3)
            if cfg["command"] in ("scan-ank", "diagnose") and "n_list" in cfg:
                assert cfg["n_list"]


class TestCliDiagnose:
    def test_reflection_table(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            "diag.json",
            {
                "command": "diagnose",
                "experiment": "reflection",
                "distribution": {"kind": "lp_ball", "p": "inf", "n": 6},
                "frame": "standard",
                "theta": ["e1", "diagonal"],
                "N": 100000,
                "seed": 4,
            },
        )
        assert main(["diagnose", "--config", cfg, "--out", str(tmp_path / "out")]) == EXIT_OK
        rows = (tmp_path / "out" / "reflection_diagnostics.csv").read_text().splitlines()
        assert rows[0].startswith("theta,slope,expected_slope")
        assert len(rows) == 3
        out = capsys.readouterr().out
        assert "ratio=" in out

    def test_rotation_table(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "rot.json",
            {
                "command": "diagnose",
                "experiment": "rotation",
                "distribution": {"kind": "sphere_shell", "n": 10},
                "eps_list": [0.2],
                "N": 50000,
                "seed": 5,
            },
        )
        assert main(["diagnose", "--config", cfg, "--out", str(tmp_path / "out")]) == EXIT_OK
        rows = (tmp_path / "out" / "rotation_diagnostics.csv").read_text().splitlines()
        assert rows[0] == "eps,r1,r1_se,r2,r2_se,r3,r3_se"
        assert len(rows) == 2

    def test_square_correlation_table(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "sq.json",
            {
                "command": "diagnose",
                "experiment": "square-correlation",
                "n_list": [5, 10],
                "N": 100000,
                "seed": 6,
            },
        )
        assert main(["diagnose", "--config", cfg, "--out", str(tmp_path / "out")]) == EXIT_OK
        rows = (tmp_path / "out" / "square_correlation.csv").read_text().splitlines()
        assert len(rows) == 3
        # covariance positive for this law even at modest N
        cov = float(rows[1].split(",")[1])
        assert cov > 0

    def test_unknown_experiment_exits_2(self, tmp_path):
        cfg = write_config(
            tmp_path, "bad.json", {"command": "diagnose", "experiment": "astrology"}
        )
        assert main(["diagnose", "--config", cfg]) == EXIT_CONFIG_ERROR
