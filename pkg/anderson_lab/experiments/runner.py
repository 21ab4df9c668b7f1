"""Experiment orchestrator: runs one kind, writes its tables and records the ledger."""

import asyncio
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np
from scipy import stats

from ..analysis.expansion import (
    ExpansionOperators,
    assembly_gap,
    expansion_order,
    mirror_symmetric,
    moment_profile,
    telescoping_residual,
)
from ..analysis.green import (
    DOMINATION_SLACK,
    GreenTable,
    decay_fit,
    defining_relation_residual,
    envelope_check,
    free_green_table,
    propsigma_domination_check,
    ratio_bound_violations,
)
from ..analysis.hamiltonian import chain_ground_energy, dipole_slab_ground, dipole_wall_ground, transverse_offset
from ..analysis.localization import check_localization_energy, localization_energy, localization_ladder
from ..analysis.partitions import (
    coincidence_patterns,
    cumulants_from_moments,
    enumerate_partitions,
    sample_patterns,
    tadpole_cancellation_check,
)
from ..analysis.selfenergy import (
    epsilon_continuity,
    solve_sigma_dipole,
    solve_sigma_nonoverlapping,
    solve_sigma_overlapping,
    threshold_dipole,
    threshold_nonoverlapping,
)
from ..analysis.wegner import mc_wegner, random_pair, weyl_interval_bound
from ..core.lattice import Box, Site, TorusGrid, offsets_within
from ..core.ledger import RunLedger, RunLedgerStore
from ..core.models import DipoleRow, LocalizationRow, SolverReport, WegnerRow
from ..disorder.potentials import NonOverlappingPotential
from ..disorder.sampling import sample_disorder, sample_seed
from .config import ExperimentConfig
from .output import TableWriter

logger = logging.getLogger(__name__)

RUN_FIELDS = ("run_id", "kind")
_active_run: dict[str, str] = {}


class RunContextFilter(logging.Filter):
    """Stamps the active run's id and kind on every record, kernel threads included."""

    def filter(self, record: logging.LogRecord) -> bool:
        for key, value in _active_run.items():
            setattr(record, key, value)
        return True


@contextmanager
def run_context(run_id: str, kind: str):
    _active_run.update(run_id=run_id, kind=kind)
    try:
        yield
    finally:
        _active_run.clear()



@dataclass
class Table:
    name: str
    header: list
    rows: list[list]


@dataclass
class RunResult:
    """What one compute kernel hands back to the runner."""

    tables: list[Table] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    texts: dict[str, str] = field(default_factory=dict)
    sample_seeds: list[int] = field(default_factory=list)


def solve_sigma(config: ExperimentConfig, coupling: float, energy: float, epsilon: float, grid: TorusGrid):
    """Dispatch to the solver matching the configured potential."""
    potential = config.potential()
    tol = config.get("tol", 1e-10)
    max_iter = config.get("max_iter", 200)
    if potential.variant == "dipole":
        return solve_sigma_dipole(coupling, energy, epsilon, grid, tol, max_iter)
    if isinstance(potential, NonOverlappingPotential):
        return solve_sigma_nonoverlapping(coupling, energy, epsilon, potential, grid, tol, max_iter)
    return solve_sigma_overlapping(coupling, energy, epsilon, potential, grid, tol, max_iter)


class ExperimentRunner:
    def __init__(self, config: ExperimentConfig, store: RunLedgerStore | None = None):
        self.config = config
        self.store = store
        self._kernels = {
            "green-decay": self.run_green,
            "selfenergy": self.run_selfenergy,
            "expansion-check": self.run_expansion,
            "wegner": self.run_wegner,
            "localization": self.run_localization,
            "dipole": self.run_dipole,
        }

    @property
    def out_dir(self) -> Path:
        return Path(self.config.output_dir) / self.config.kind / self.config.config_hash()[:12]

    async def run(self) -> RunLedger:
        """Run the configured kind off the event loop, then persist."""
        cfg = self.config
        cfg.check_guards()
        started = datetime.now()
        config_hash = cfg.config_hash()
        ledger = RunLedger(
            run_id=f"{cfg.kind}-{config_hash[:12]}-{started:%Y%m%dT%H%M%S%f}",
            kind=cfg.kind,
            config_hash=config_hash,
            master_seed=cfg.seed,
            workers=cfg.threads,
            started_at=started,
            output_dir=str(self.out_dir),
        )
        with run_context(ledger.run_id, cfg.kind):
            logger.info("Running %s (config %s, seed %d, %d threads)", cfg.kind, config_hash[:12], cfg.seed, cfg.threads)

            kernel = self._kernels[cfg.kind]
            loop = asyncio.get_running_loop()
            t0 = time.perf_counter()
            with ThreadPoolExecutor(max_workers=1) as pool:
                result = await loop.run_in_executor(pool, kernel, ledger)
            ledger.elapsed_seconds = time.perf_counter() - t0
            ledger.sample_seeds = result.sample_seeds
            ledger.status = "ok" if ledger.all_ok else "certificate_failed"

            writer = TableWriter(self.out_dir)
            for table in result.tables:
                writer.write_table(table.name, table.header, table.rows)
            for name, text in result.texts.items():
                writer.write_text(name, text)
            writer.write_summary({"config": cfg.resolved(), "ledger": ledger.to_dict(), "results": result.summary})

            if self.store is not None:
                await self.store.insert_run(ledger)
            for cert in ledger.certificates:
                if not cert.ok:
                    logger.warning("Certificate %s failed: %s (bound %s)", cert.name, cert.value, cert.bound)
            logger.info("%s finished in %.1fs -> %s", cfg.kind, ledger.elapsed_seconds, self.out_dir)
        return ledger

    # ------------------------------------------------------------------
    # kernels
    # ------------------------------------------------------------------

    def run_green(self, ledger: RunLedger) -> RunResult:
        cfg = self.config
        grid = TorusGrid(cfg.get("grid_points", 128))
        radius = cfg.get("radius", 5)
        envelope_radius = cfg.get("envelope_radius", 8)
        ratio_radius = cfg.get("ratio_radius", 4)
        rows, values = [], []
        for energy in cfg.get("energies", [-0.1, -0.5, -1.0]):
            residual = defining_relation_residual(energy, radius, grid)
            env = envelope_check(energy, envelope_radius, grid)
            bad = ratio_bound_violations(energy, ratio_radius, grid)
            table = free_green_table(energy, offsets_within(envelope_radius), grid)
            fit = decay_fit({w: table.real(w) for w in table.values if w.y == 0 and w.z == 0}, r_min=2.0)
            stable = env.stable(envelope_radius - 2, envelope_radius)
            rows.append(
                [energy, residual, env.worst_ratio, int(stable), env.min_value, len(bad), fit.rate, fit.rate_stderr]
            )
            values.extend([energy, *r] for r in table.to_csv_rows() if max(abs(c) for c in r[:3]) <= radius)
            ledger.certify(f"defining_residual[E={energy}]", residual, 1e-7)
            ledger.certify(f"envelope_finite[E={energy}]", env.worst_ratio, ok=math.isfinite(env.worst_ratio))
            ledger.certify(f"ratio_bound_violations[E={energy}]", len(bad), 0)
            ledger.certify(f"positivity[E={energy}]", env.min_value, ok=env.min_value > 0)
        header = ["E", "defining_residual", "envelope_worst_ratio", "envelope_stable", "min_G", "ratio_violations",
                  "axis_decay_rate", "axis_decay_stderr"]
        return RunResult(
            tables=[Table("green_checks", header, rows), Table("green_values", ["E", *GreenTable.csv_header()], values)],
            summary={"grid_points": grid.points, "energies": len(rows)},
        )

    def run_selfenergy(self, ledger: RunLedger) -> RunResult:
        cfg = self.config
        grid = TorusGrid(cfg.get("grid_points", 64))
        coupling = cfg.require("coupling")
        energy = cfg.require("energy")
        epsilon = cfg.get("epsilon", 0.0)
        sigma = solve_sigma(cfg, coupling, energy, epsilon, grid)
        report = sigma.report
        ledger.certify("residual", report.residual, report.tolerance)
        ledger.certify("norm_bound", report.norm, report.bound)
        ledger.certify("contraction", report.max_ratio, report.contraction_factor + 0.05)

        summary = {"variant": sigma.variant, "report": report.to_dict()}
        tables = [Table("selfenergy_report", SolverReport.csv_header(), [report.to_csv_row()])]
        if sigma.variant == "nonoverlapping":
            coeff_rows = [[i, j, float(v.real), float(v.imag)] for (i, j), v in np.ndenumerate(sigma.sigma)]
            tables.append(Table("selfenergy_matrix", ["i", "j", "re", "im"], coeff_rows))
            threshold = threshold_nonoverlapping(coupling, sigma.potential, energy)
            if energy < threshold:
                dom = propsigma_domination_check(sigma, grid, cfg.get("domination_radius", 4), threshold)
                ledger.certify("propsigma_domination", dom.max_excess, DOMINATION_SLACK)
                summary["domination"] = {
                    "threshold": threshold,
                    "shifted_energy": dom.shifted_energy,
                    "max_excess": dom.max_excess,
                    "worst_source": dom.worst_source.coords,
                    "worst_offset": dom.worst_offset.coords,
                }
            else:
                logger.warning("E=%g is not below E0=%.6g; domination check skipped", energy, threshold)
        else:
            coeff_rows = [[k.x, k.y, k.z, float(np.real(c)), float(np.imag(c))] for k, c in sorted(sigma.coefficients.items())]
            tables.append(Table("selfenergy_coefficients", ["k1", "k2", "k3", "re", "im"], coeff_rows))

        epsilons = cfg.get("continuity_epsilons", [])
        if epsilons:
            ladder = epsilon_continuity(lambda e: solve_sigma(cfg, coupling, energy, e, grid), epsilons)
            tables.append(Table("selfenergy_continuity", ["epsilon", "max_difference"], [list(r) for r in ladder]))
            nonzero = [(e, d) for e, d in ladder if e > 0]
            if len(nonzero) >= 2:
                fit = stats.linregress(*zip(*nonzero))
                summary["continuity_slope"] = float(fit.slope)
        return RunResult(tables=tables, summary=summary)

    def run_expansion(self, ledger: RunLedger) -> RunResult:
        cfg = self.config
        grid = TorusGrid(cfg.get("grid_points", 32))
        coupling = cfg.require("coupling")
        energy = cfg.require("energy")
        epsilon = cfg.get("epsilon", 1e-3)
        box = Box(Site.origin(), cfg.get("radius", 2))
        potential = cfg.potential()
        density = cfg.density()
        sigma = solve_sigma(cfg, coupling, energy, epsilon, grid)
        seed = sample_seed(cfg.seed, 0)
        sample = sample_disorder(density, box, potential.period, seed, potential)
        ops = ExpansionOperators.on_box(box, coupling, energy, epsilon, potential, sample, sigma)

        rows = []
        for order in cfg.get("orders", [1, 2, 3, 4]):
            residual = telescoping_residual(ops, order)
            gap = assembly_gap(ops, order)
            rows.append([order, residual, gap])
            ledger.certify(f"telescoping[N={order}]", residual, 1e-9)
            ledger.certify(f"assembly_gap[N={order}]", gap, 1e-9)

        moments = density.exact_moments(4)
        cumulants = cumulants_from_moments(moments, 4)
        cumulant_rows = [[order, str(c), float(c)] for order, c in sorted(cumulants.coefficients.items())]

        tadpole_rows, transcripts = [], []
        exhaustive = cfg.get("exhaustive_max_n", 3)
        for n in range(1, exhaustive + 1):
            mismatches, count = 0, 0
            for positions in coincidence_patterns(n):
                result = tadpole_cancellation_check(n, positions, moments)
                count += 1
                mismatches += not result.equal
            tadpole_rows.append([n, "exhaustive", count, mismatches])
            ledger.certify(f"tadpole_mismatches[N={n}]", mismatches, 0)
            transcripts.append(f"N={n}: " + "; ".join(p.to_text() for p in enumerate_partitions(n)))
        sampled = cfg.get("sampled_patterns", 1000)
        if sampled:
            mismatches = 0
            for positions in sample_patterns(4, sampled, seed=cfg.seed):
                mismatches += not tadpole_cancellation_check(4, positions, moments).equal
            tadpole_rows.append([4, "sampled", sampled, mismatches])
            ledger.certify("tadpole_mismatches[N=4]", mismatches, 0)

        summary = {"variant": sigma.variant, "sites": box.cardinality, "growth_constant": cumulants.growth_constant}
        selection = cfg.get("selection_constant")
        if selection:
            nu = cfg.get("nu", 0.5)
            e_star = coupling ** (4.0 - nu) / 2.0
            summary["selected_order"] = expansion_order(e_star, selection, coupling)

        moment_rows, moment_seeds = [], []
        moment_orders = cfg.get("moment_orders", [1, 2])
        if moment_orders:
            moment_box = Box(Site.origin(), cfg.get("moment_radius", 4))
            moment_samples = cfg.get("moment_samples", 200)
            moment_seed = sample_seed(cfg.seed, 1)
            moment_seeds = [sample_seed(moment_seed, k) for k in range(moment_samples)]
            symmetric = mirror_symmetric(potential)
            if not symmetric:
                logger.warning("%r is not mirror symmetric; shift comparison is reported uncertified", potential)
            for order in moment_orders:
                profile = moment_profile(
                    moment_box, coupling, energy, epsilon, order, cfg.get("moment_max_offset", 4), moment_samples,
                    moment_seed, potential, density, sigma, cfg.threads,
                )
                for (r, diff, tol), a, b in zip(profile.shift_deviations(), profile.base, profile.shifted):
                    moment_rows.append([order, r, a.mean_sq, a.stderr, b.mean_sq, b.stderr, diff, tol])
                    if symmetric:
                        ledger.certify(f"moment_shift[l={order},r={r}]", diff, tol)
                decay = profile.base[-1].mean_sq / profile.base[0].mean_sq if profile.base[0].mean_sq else 0.0
                ledger.certify(f"moment_decay[l={order}]", decay, ok=profile.monotone_decay())
            summary["moment_box_sites"] = moment_box.cardinality

        return RunResult(
            tables=[
                Table("expansion_telescoping", ["N", "residual", "assembly_gap"], rows),
                Table("expansion_cumulants", ["order", "exact", "value"], cumulant_rows),
                Table("expansion_tadpoles", ["N", "mode", "patterns", "mismatches"], tadpole_rows),
                Table(
                    "expansion_moments",
                    ["l", "offset", "mean_sq", "stderr", "shifted_mean_sq", "shifted_stderr", "deviation", "tolerance"],
                    moment_rows,
                ),
            ],
            summary=summary,
            texts={"partitions.txt": "\n".join(transcripts)},
            sample_seeds=[seed, *moment_seeds],
        )

    def run_wegner(self, ledger: RunLedger) -> RunResult:
        cfg = self.config
        box = Box(Site.origin(), cfg.get("radius", 4))
        samples = cfg.get("samples", 500)
        result = mc_wegner(
            box,
            cfg.require("coupling"),
            cfg.potential(),
            cfg.density(),
            cfg.require("center"),
            cfg.require("widths"),
            samples,
            cfg.seed,
            cfg.threads,
        )
        summary = {"slope": result.slope, "slope_stderr": result.slope_stderr, "volume": result.volume}
        if len(result.rows) > 1:
            ratio, stderr = result.linearity_ratio()
            expected = result.rows[1].width / result.rows[0].width
            if math.isnan(ratio):
                logger.warning("Empty Wegner window at center %g: linearity not certified", cfg.require("center"))
                summary.update(linearity_ratio=None, linearity_stderr=None)
                ledger.certify("linearity_deviation", result.rows[0].estimate, ok=False)
            else:
                summary.update(linearity_ratio=ratio, linearity_stderr=stderr)
                ledger.certify("linearity_deviation", abs(ratio - expected), 4.0 * stderr)
        monotone = bool(np.all(np.diff(result.counts, axis=1) >= 0))
        ledger.certify("counts_monotone", float(monotone), ok=monotone)

        instances = cfg.get("weyl_instances", 1000)
        rng = np.random.default_rng(sample_seed(cfg.seed, samples))
        failures = 0
        for _ in range(instances):
            pair = random_pair(rng, int(rng.integers(1, 9)))
            a, b = np.sort(rng.uniform(-3.0, 4.0, 2))
            c, d = np.sort(rng.uniform(0.0, 1.0, 2))
            failures += not weyl_interval_bound(pair, (a, b), (c, d)).holds
        ledger.certify("weyl_lemma_failures", failures, 0)
        summary["weyl_instances"] = instances
        return RunResult(
            tables=[Table("wegner", WegnerRow.csv_header(), [r.to_csv_row() for r in result.rows])],
            summary=summary,
            sample_seeds=[sample_seed(cfg.seed, k) for k in range(samples)],
        )

    def run_localization(self, ledger: RunLedger) -> RunResult:
        cfg = self.config
        coupling = cfg.require("coupling")
        nu = cfg.get("nu", 0.5)
        potential = cfg.potential()
        energy = cfg.get("energy")
        if energy is None:
            energy = localization_energy(coupling, potential, nu)
        if coupling > 0:
            check_localization_energy(coupling, potential, energy, nu)
        samples = cfg.get("samples", 200)
        result = localization_ladder(
            cfg.get("radii", [4, 6, 8, 10]),
            coupling,
            energy,
            potential,
            cfg.density(),
            samples,
            cfg.seed,
            nu,
            cfg.threads,
        )
        ledger.certify("decay_rate_positive", result.fit.rate, ok=result.fit.rate > 0)
        ledger.certify("decay_significance", result.fit.significance, ok=result.fit.significance >= 3.0)
        ledger.certify("skip_rate_max", max(r.skip_rate for r in result.rows), 0.2)
        summary = {
            "energy": energy,
            "threshold": result.threshold,
            "fit": result.fit.to_dict(),
            "predicted_rate": result.predicted_rate,
            "skip_flag": result.skip_flag,
            "strictly_decreasing": result.strictly_decreasing(),
        }
        return RunResult(
            tables=[Table("localization", LocalizationRow.csv_header(), [r.to_csv_row() for r in result.rows])],
            summary=summary,
            sample_seeds=[sample_seed(cfg.seed, k) for k in range(samples if coupling else 1)],
        )

    def run_dipole(self, ledger: RunLedger) -> RunResult:
        cfg = self.config
        coupling = cfg.require("coupling")
        grid = TorusGrid(cfg.get("grid_points", 64))
        e_d = threshold_dipole(coupling)
        rows = []
        for offset in cfg.get("energy_offsets", [0.001, 0.01, 0.05]):
            energy = e_d - offset
            sigma = solve_sigma_dipole(coupling, energy, cfg.get("epsilon", 0.0), grid, cfg.get("tol", 1e-10))
            lam2 = coupling**2
            row = DipoleRow(
                energy,
                float(sigma.a.real),
                float(sigma.a.imag),
                float(sigma.b.real),
                float(sigma.b.imag),
                abs(sigma.a) < lam2,
                abs(sigma.b) < 14.0 * lam2,
                sigma.report.residual,
            )
            rows.append(row)
            ledger.certify(f"A_bound[E={energy:.6g}]", abs(sigma.a), lam2)
            ledger.certify(f"B_bound[E={energy:.6g}]", abs(sigma.b), 14.0 * lam2)

        e_finite, e_exact = dipole_wall_ground(coupling, cfg.get("wall_radius", 200))
        ground = [[coupling, e_exact, e_finite, -2.0 * coupling**2, e_d]]
        ledger.certify("wall_chain_agreement", abs(e_finite - e_exact), 1e-4)
        ledger.certify("second_order", abs(e_exact + 2.0 * coupling**2), 4.0 * coupling**4)
        summary = {"E_m_exact": e_exact, "E_finite": e_finite, "E_d": e_d}
        slab_radius = cfg.get("slab_radius")
        if slab_radius:
            slab = dipole_slab_ground(coupling, slab_radius) - transverse_offset(slab_radius)
            chain = chain_ground_energy(coupling, slab_radius)
            summary.update(E_slab_reduced=slab, E_chain_same_radius=chain)
            ledger.certify("slab_separation", abs(slab - chain), 1e-8)
        return RunResult(
            tables=[
                Table("dipole_sigma", DipoleRow.csv_header(), [r.to_csv_row() for r in rows]),
                Table("dipole_ground", ["lambda", "E_m_exact", "E_finite", "minus_2_lambda2", "E_d"], ground),
            ],
            summary=summary,
        )
