"""Unit tests for configuration validation."""

import copy

import pytest

from main import validate_config


@pytest.fixture
def valid_config(sample_config):
    return copy.deepcopy(sample_config)


class TestValidConfig:
    def test_valid_config_no_errors(self, valid_config):
        assert validate_config(valid_config) == []

    def test_shipped_defaults_are_valid(self):
        from main import load_config

        assert validate_config(load_config()) == []

    def test_shipped_experiment_settings(self):
        from main import load_config

        experiments = load_config()["experiments"]
        wegner = experiments["wegner"]
        assert (wegner["potential"], wegner["coupling"], wegner["center"]) == ("delta", 0.3, -0.05)
        assert wegner["radius"] == 4
        assert (wegner["samples"], wegner["weyl_instances"]) == (500, 1000)
        widths = wegner["widths"]
        assert all(b == pytest.approx(2 * a) for a, b in zip(widths, widths[1:]))
        localization = experiments["localization"]
        assert (localization["coupling"], localization["nu"]) == (0.2, 0.5)
        assert localization["radii"] == [4, 6, 8, 10]
        assert localization["samples"] == 200
        assert "energy" not in localization


class TestTopLevelValidation:
    def test_wrong_schema_version(self, valid_config):
        valid_config["schema_version"] = 2
        errors = validate_config(valid_config)
        assert any("schema_version" in e for e in errors)

    @pytest.mark.parametrize("seed", [-1, 2**64, "42", True, None])
    def test_bad_seed(self, valid_config, seed):
        valid_config["seed"] = seed
        errors = validate_config(valid_config)
        assert any("seed" in e for e in errors)

    def test_full_width_seed_ok(self, valid_config):
        valid_config["seed"] = 2**64 - 1
        assert validate_config(valid_config) == []

    def test_zero_threads(self, valid_config):
        valid_config["threads"] = 0
        errors = validate_config(valid_config)
        assert any("threads" in e for e in errors)

    def test_bad_guard(self, valid_config):
        valid_config["guards"]["max_radius"] = 0
        errors = validate_config(valid_config)
        assert any("guards.max_radius" in e for e in errors)

    def test_unknown_section(self, valid_config):
        valid_config["experiments"]["transport"] = {}
        errors = validate_config(valid_config)
        assert any("transport" in e for e in errors)


class TestSectionValidation:
    def test_negative_coupling(self, valid_config):
        valid_config["experiments"]["wegner"]["coupling"] = -1.0
        errors = validate_config(valid_config)
        assert any("wegner.coupling" in e for e in errors)

    def test_odd_grid(self, valid_config):
        valid_config["experiments"]["selfenergy"]["grid_points"] = 17
        errors = validate_config(valid_config)
        assert any("must be even" in e for e in errors)

    def test_small_grid(self, valid_config):
        valid_config["experiments"]["selfenergy"]["grid_points"] = 4
        errors = validate_config(valid_config)
        assert any("grid_points" in e for e in errors)

    def test_empty_radii(self, valid_config):
        valid_config["experiments"]["localization"]["radii"] = []
        errors = validate_config(valid_config)
        assert any("localization.radii" in e for e in errors)

    def test_unknown_potential(self, valid_config):
        valid_config["experiments"]["expansion-check"]["potential"] = "coulomb"
        errors = validate_config(valid_config)
        assert any("potential" in e for e in errors)

    def test_potential_mapping(self, valid_config):
        valid_config["experiments"]["expansion-check"]["potential"] = {"type": "exponential", "decay_a": 8.0}
        assert validate_config(valid_config) == []

    def test_unknown_density(self, valid_config):
        valid_config["experiments"]["wegner"]["density"] = "gaussian"
        errors = validate_config(valid_config)
        assert any("density" in e for e in errors)

    def test_integer_fields(self, valid_config):
        valid_config["experiments"]["wegner"]["samples"] = 2.5
        errors = validate_config(valid_config)
        assert any("wegner.samples" in e for e in errors)

    def test_section_not_mapping(self, valid_config):
        valid_config["experiments"]["dipole"] = [1, 2]
        errors = validate_config(valid_config)
        assert any("must be a mapping" in e for e in errors)

    def test_multiple_errors(self, valid_config):
        valid_config["seed"] = -5
        valid_config["experiments"]["wegner"]["coupling"] = -1.0
        assert len(validate_config(valid_config)) >= 2
