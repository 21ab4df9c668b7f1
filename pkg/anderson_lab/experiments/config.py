"""Resolved experiment configuration, desk guards and model factories."""

from __future__ import annotations

import copy
import hashlib
import json
import logging
from dataclasses import dataclass, field

from ..core.errors import DesignGuardError, PreconditionError
from ..disorder.base import SingleSitePotential
from ..disorder.densities import DENSITY_PRESETS, DisorderDensity, density_from_name
from ..disorder.potentials import DipolePotential, NonOverlappingPotential, OverlappingPotential

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# CLI subcommand -> experiment kind (config section name)
KINDS = {
    "green": "green-decay",
    "selfenergy": "selfenergy",
    "expand": "expansion-check",
    "wegner": "wegner",
    "localize": "localization",
    "dipole": "dipole",
}

POTENTIAL_PRESETS = ("delta", "exponential", "dipole", "single_site", "dipole_cell")

DEFAULT_GUARDS = {"max_radius": 16, "max_samples": 10_000}

# keys that do not change any computed number
_UNHASHED = ("threads", "output_dir")


def potential_from_config(entry: str | dict) -> SingleSitePotential:
    """Build a single-site potential from a preset name or a mapping with ``type``."""
    if isinstance(entry, str):
        entry = {"type": entry}
    kind = entry.get("type", "delta")
    if kind == "delta":
        return OverlappingPotential.delta()
    if kind == "exponential":
        return OverlappingPotential.exponential(
            entry.get("decay_c", 1.0), entry.get("decay_a", 1.0), entry.get("alternating", True)
        )
    if kind == "dipole":
        return DipolePotential()
    if kind == "single_site":
        return NonOverlappingPotential.single_site()
    if kind == "dipole_cell":
        return NonOverlappingPotential.dipole_cell()
    raise PreconditionError(f"unknown potential {kind!r}; choose from {POTENTIAL_PRESETS}")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment kind with shared keys and CLI overrides folded in."""

    kind: str
    seed: int
    output_dir: str
    threads: int
    params: dict = field(default_factory=dict)
    guards: dict = field(default_factory=lambda: dict(DEFAULT_GUARDS))
    unsafe_override: bool = False
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_config(
        cls,
        config: dict,
        kind: str,
        seed: int | None = None,
        output_dir: str | None = None,
        threads: int | None = None,
        unsafe_override: bool = False,
    ) -> ExperimentConfig:
        kind = KINDS.get(kind, kind)
        if kind not in KINDS.values():
            raise PreconditionError(f"unknown experiment kind {kind!r}")
        section = (config.get("experiments") or {}).get(kind) or {}
        return cls(
            kind=kind,
            seed=int(seed if seed is not None else config.get("seed", 0)),
            output_dir=str(output_dir or config.get("output_dir", "data/runs")),
            threads=int(threads or config.get("threads", 1)),
            params=copy.deepcopy(dict(section)),
            guards={**DEFAULT_GUARDS, **(config.get("guards") or {})},
            unsafe_override=unsafe_override,
            schema_version=int(config.get("schema_version", SCHEMA_VERSION)),
        )

    def get(self, key: str, default=None):
        return self.params.get(key, default)

    def require(self, key: str):
        if key not in self.params:
            raise PreconditionError(f"'{self.kind}.{key}' is required")
        return self.params[key]

    def potential(self) -> SingleSitePotential:
        return potential_from_config(self.params.get("potential", "delta"))

    def density(self) -> DisorderDensity:
        return density_from_name(self.params.get("density", "uniform"))

    def resolved(self) -> dict:
        """Plain mapping echoed into every output directory."""
        return {
            "schema_version": self.schema_version,
            "kind": self.kind,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "threads": self.threads,
            "guards": dict(self.guards),
            "unsafe_override": self.unsafe_override,
            "params": copy.deepcopy(self.params),
        }

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of everything that affects results."""
        payload = {k: v for k, v in self.resolved().items() if k not in _UNHASHED}
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(canonical.encode()).hexdigest()

    def check_guards(self):
        """Enforce desk-scale limits unless the unsafe override is set."""
        radii = list(self.params.get("radii", []))
        for key in ("radius", "slab_radius", "moment_radius"):
            if key in self.params:
                radii.append(self.params[key])
        problems = []
        max_radius = self.guards["max_radius"]
        if radii and max(radii) > max_radius:
            problems.append(f"box radius {max(radii)} exceeds {max_radius}")
        samples = self.params.get("samples")
        if samples is not None and samples > self.guards["max_samples"]:
            problems.append(f"{samples} samples exceed {self.guards['max_samples']}")
        if not problems:
            return
        if self.unsafe_override:
            for p in problems:
                logger.warning("Desk guard overridden: %s", p)
            return
        raise DesignGuardError("; ".join(problems) + " (pass --unsafe-override to run anyway)")


def validate_section(kind: str, section: dict) -> list[str]:
    """Schema errors for one experiment section."""
    errors = []
    if not isinstance(section, dict):
        return [f"'experiments.{kind}' must be a mapping"]

    def number(key, minimum=None, integer=False, strict=False):
        val = section.get(key)
        if val is None:
            return
        ok_type = isinstance(val, int) if integer else isinstance(val, (int, float))
        if isinstance(val, bool) or not ok_type:
            errors.append(f"'{kind}.{key}' must be {'an integer' if integer else 'a number'}")
        elif minimum is not None and (val <= minimum if strict else val < minimum):
            errors.append(f"'{kind}.{key}' must be {'>' if strict else '>='} {minimum}")

    number("coupling", 0.0)
    number("epsilon")
    number("energy")
    number("nu", 0.0, strict=True)
    number("radius", 1, integer=True)
    number("samples", 1, integer=True)
    number("grid_points", 8, integer=True)
    number("max_iter", 1, integer=True)
    number("tol", 0.0, strict=True)
    number("moment_radius", 1, integer=True)
    number("moment_max_offset", 2, integer=True)
    number("moment_samples", 1, integer=True)
    number("domination_radius", 0, integer=True)
    gp = section.get("grid_points")
    if isinstance(gp, int) and gp % 2:
        errors.append(f"'{kind}.grid_points' must be even")
    for key in ("energies", "radii", "widths", "orders", "energy_offsets"):
        val = section.get(key)
        if val is not None and (not isinstance(val, list) or not val):
            errors.append(f"'{kind}.{key}' must be a non-empty list")
    for key in ("moment_orders", "continuity_epsilons"):
        val = section.get(key)
        if val is not None and not isinstance(val, list):
            errors.append(f"'{kind}.{key}' must be a list")
    pot = section.get("potential")
    if pot is not None:
        name = pot.get("type") if isinstance(pot, dict) else pot
        if name not in POTENTIAL_PRESETS:
            errors.append(f"'{kind}.potential' must be one of {', '.join(POTENTIAL_PRESETS)}")
    dens = section.get("density")
    if dens is not None and dens not in DENSITY_PRESETS:
        errors.append(f"'{kind}.density' must be one of {', '.join(sorted(DENSITY_PRESETS))}")
    return errors
