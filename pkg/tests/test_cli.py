"""Command-line interface tests: config handling, artifacts, exit codes."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

import vmblab.cli as cli
import vmblab.io as vio
import vmblab.spectral as sp
from vmblab.errors import ConfigInvalid, UnknownInitializer


class TestLoadConfig:
    def test_defaults_are_valid(self):
        config = cli.load_config()
        assert config.scenario == "fluid"
        assert config.grid_n == 16

    def test_toml_file_and_overrides(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text('scenario = "fluid"\ngrid_n = 8\ndt = 0.005\n')
        config = cli.load_config(path, dt=0.01)
        assert config.grid_n == 8
        assert config.dt == 0.01  # flag wins over file

    def test_unknown_field_rejected(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("gridd_n = 8\n")
        with pytest.raises(ConfigInvalid):
            cli.load_config(path)

    def test_invalid_toml_rejected(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("grid_n = = 8\n")
        with pytest.raises(ConfigInvalid):
            cli.load_config(path)

    @pytest.mark.parametrize("field,value", [
        ("scenario", "unknown"), ("grid_n", 7), ("nu0", -1.0),
        ("dt", 0.0), ("t_final", -1.0), ("init", "bogus"),
        ("hermite_M", 2), ("amplitude", -0.5),
    ])
    def test_validation_rejects_bad_values(self, field, value):
        with pytest.raises(ConfigInvalid) as err:
            cli.load_config(**{field: value})
        assert field.split("_")[0] in str(err.value) or field in str(err.value)

    def test_bad_epsilon_rejected_for_kinetic(self):
        with pytest.raises(ConfigInvalid):
            cli.load_config(scenario="kinetic", epsilon_list=[2.0])


class TestInitializers:
    @pytest.mark.parametrize("name", cli.INITIALIZERS)
    def test_velocity_is_divergence_free(self, name, grid8):
        u, _, _ = cli.initializers(name, 0.01, 0, grid8)
        assert sp.divergence(u).norm() < 1e-12

    def test_amplitude_scaling(self, grid8):
        u, _, _ = cli.initializers("shear", 0.05, 0, grid8)
        assert abs(np.max(np.abs(u.values())) - 0.05) < 1e-12

    def test_random_small_is_deterministic(self, grid8):
        a = cli.initializers("random_small", 0.01, 7, grid8)
        b = cli.initializers("random_small", 0.01, 7, grid8)
        for fa, fb in zip(a, b):
            assert np.array_equal(fa.coeffs, fb.coeffs)

    def test_random_small_band_limited_and_mean_free(self, grid8):
        u, theta, sigma = cli.initializers("random_small", 0.01, 7, grid8)
        band = sp.k_squared(grid8) <= 4.0 + 1e-12
        for f in (theta, sigma):
            assert np.max(np.abs(f.coeffs[~band])) == 0.0
            assert f.mean() == 0.0

    def test_unknown_name(self, grid8):
        with pytest.raises(UnknownInitializer):
            cli.initializers("vortex", 0.01, 0, grid8)


@pytest.fixture()
def runner():
    return CliRunner()


def fluid_args(tmp_path, **extra):
    path = tmp_path / "run.toml"
    lines = ['scenario = "fluid"', "grid_n = 8", "dt = 0.01",
             "t_final = 0.1", 'init = "shear"']
    lines += [f"{k} = {v}" for k, v in extra.items()]
    path.write_text("\n".join(lines) + "\n")
    return ["run", "--config", str(path), "--out", str(tmp_path / "out")]


class TestRunCommand:
    def test_fluid_scenario_writes_artifacts(self, runner, tmp_path):
        result = runner.invoke(cli.main, fluid_args(tmp_path))
        assert result.exit_code == 0, result.output
        out = tmp_path / "out"
        assert (out / "manifest.json").exists()
        assert (out / "fluid.csv").exists()
        assert (out / "fluid.png").exists()
        assert (out / "u_final.specf").exists()
        manifest = vio.read_manifest(out / "manifest.json")
        assert manifest["config"]["scenario"] == "fluid"
        assert manifest["transport"]["eta"] == pytest.approx(1.0)

    def test_config_error_exit_code(self, runner, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("grid_n = 7\n")
        result = runner.invoke(cli.main, ["run", "--config", str(path)])
        assert result.exit_code == 1

    def test_runs_are_deterministic(self, runner, tmp_path):
        a_dir = tmp_path / "a"
        b_dir = tmp_path / "b"
        for out in (a_dir, b_dir):
            args = fluid_args(tmp_path)
            args[-1] = str(out)
            result = runner.invoke(cli.main, args)
            assert result.exit_code == 0, result.output
        assert (a_dir / "fluid.csv").read_text() \
            == (b_dir / "fluid.csv").read_text()

    def test_hierarchy_scenario(self, runner, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text('scenario = "hierarchy"\ngrid_n = 8\ndt = 0.001\n'
                        't_final = 0.004\ninit = "random_small"\n')
        out = tmp_path / "out"
        result = runner.invoke(cli.main, ["run", "--config", str(path),
                                          "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert (out / "hierarchy.csv").exists()
        assert (out / "order1.kin").exists()
        assert (out / "order2.kin").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["final_B2_norm"] > 0.0


class TestVerifyCommand:
    def test_verify_passes_on_fresh_run(self, runner, tmp_path):
        result = runner.invoke(cli.main, fluid_args(tmp_path))
        assert result.exit_code == 0, result.output
        result = runner.invoke(cli.main, ["verify", str(tmp_path / "out")])
        assert result.exit_code == 0, result.output
        assert "all snapshots pass" in result.output

    def test_verify_flags_corrupted_snapshot(self, runner, tmp_path, grid8,
                                             rng):
        out = tmp_path / "out"
        out.mkdir()
        bad = sp.from_values(grid8, rng.standard_normal((3,) + grid8.shape))
        vio.write_specf(out / "u_bad.specf", bad)  # not divergence-free
        result = runner.invoke(cli.main, ["verify", str(out)])
        assert result.exit_code == 2
        assert "FAIL" in result.output


class TestTableCommand:
    def test_formats_sweep_csv(self, runner, tmp_path):
        rows = [{"epsilon": 0.5, "error": 1e-3, "order": ""},
                {"epsilon": 0.25, "error": 1.25e-4, "order": 3.0}]
        vio.write_csv(tmp_path / "sweep.csv", ["epsilon", "error", "order"],
                      rows)
        result = runner.invoke(cli.main, ["table", str(tmp_path)])
        assert result.exit_code == 0, result.output
        assert "0.2500" in result.output
        assert (tmp_path / "table.txt").exists()
        assert (tmp_path / "table.csv").exists()
