"""Unit tests for resolved experiment configs and desk guards."""

import pytest

from anderson_lab.core.errors import DesignGuardError, PreconditionError
from anderson_lab.disorder.potentials import DipolePotential, NonOverlappingPotential, OverlappingPotential
from anderson_lab.experiments.config import ExperimentConfig, potential_from_config


class TestFromConfig:
    def test_cli_alias(self, sample_config):
        cfg = ExperimentConfig.from_config(sample_config, "localize")
        assert cfg.kind == "localization"
        assert cfg.seed == 12345
        assert cfg.threads == 2
        assert cfg.get("radii") == [2, 3, 4]

    def test_overrides(self, sample_config):
        cfg = ExperimentConfig.from_config(sample_config, "wegner", seed=7, output_dir="/tmp/x", threads=8)
        assert (cfg.seed, cfg.output_dir, cfg.threads) == (7, "/tmp/x", 8)

    def test_unknown_kind(self, sample_config):
        with pytest.raises(PreconditionError):
            ExperimentConfig.from_config(sample_config, "transport")

    def test_params_are_copied(self, sample_config):
        cfg = ExperimentConfig.from_config(sample_config, "wegner")
        cfg.params["widths"].append(1.0)
        assert sample_config["experiments"]["wegner"]["widths"] == [0.1, 0.2]

    def test_require(self, sample_config):
        cfg = ExperimentConfig.from_config(sample_config, "dipole")
        assert cfg.require("coupling") == 0.1
        with pytest.raises(PreconditionError, match="dipole.energy"):
            cfg.require("energy")


class TestConfigHash:
    def test_stable(self, sample_config):
        a = ExperimentConfig.from_config(sample_config, "wegner")
        b = ExperimentConfig.from_config(sample_config, "wegner")
        assert a.config_hash() == b.config_hash()
        assert len(a.config_hash()) == 64

    def test_ignores_threads_and_output(self, sample_config):
        a = ExperimentConfig.from_config(sample_config, "wegner")
        b = ExperimentConfig.from_config(sample_config, "wegner", output_dir="elsewhere", threads=16)
        assert a.config_hash() == b.config_hash()

    def test_sensitive_to_seed_and_params(self, sample_config):
        base = ExperimentConfig.from_config(sample_config, "wegner").config_hash()
        assert ExperimentConfig.from_config(sample_config, "wegner", seed=1).config_hash() != base
        sample_config["experiments"]["wegner"]["samples"] = 41
        assert ExperimentConfig.from_config(sample_config, "wegner").config_hash() != base


class TestGuards:
    def test_within_limits(self, sample_config):
        ExperimentConfig.from_config(sample_config, "localization").check_guards()

    def test_radius_guard(self, sample_config):
        sample_config["experiments"]["localization"]["radii"] = [4, 20]
        with pytest.raises(DesignGuardError, match="radius 20"):
            ExperimentConfig.from_config(sample_config, "localization").check_guards()

    def test_sample_guard(self, sample_config):
        sample_config["experiments"]["wegner"]["samples"] = 20_000
        with pytest.raises(DesignGuardError, match="samples"):
            ExperimentConfig.from_config(sample_config, "wegner").check_guards()

    def test_guard_is_a_precondition(self):
        assert issubclass(DesignGuardError, PreconditionError)

    def test_override(self, sample_config):
        sample_config["experiments"]["wegner"]["radius"] = 30
        ExperimentConfig.from_config(sample_config, "wegner", unsafe_override=True).check_guards()


class TestFactories:
    @pytest.mark.parametrize(
        "entry, cls",
        [
            ("delta", OverlappingPotential),
            ({"type": "exponential", "decay_a": 8.0}, OverlappingPotential),
            ("dipole", DipolePotential),
            ("single_site", NonOverlappingPotential),
            ("dipole_cell", NonOverlappingPotential),
        ],
    )
    def test_potential_presets(self, entry, cls):
        assert isinstance(potential_from_config(entry), cls)

    def test_unknown_potential(self):
        with pytest.raises(PreconditionError):
            potential_from_config("coulomb")

    def test_density(self, sample_config):
        cfg = ExperimentConfig.from_config(sample_config, "wegner")
        assert cfg.density().name == "uniform"
        assert cfg.potential().variant == "overlapping"
