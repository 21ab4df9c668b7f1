"""Unit tests for finite-volume Hamiltonians, resolvents and spectra."""

import math

import numpy as np
import pytest

from anderson_lab.analysis import hamiltonian as ham
from anderson_lab.analysis.green import free_green
from anderson_lab.analysis.hamiltonian import (
    FiniteHamiltonian,
    ResolventSolver,
    SpectralWindow,
    boundary_coupling_norm,
    box_laplacian,
    build,
    chain_ground_energy,
    count_in_window,
    dipole_bound_state_energy,
    dipole_slab_ground,
    dipole_wall_ground,
    eigenvalues,
    free_hamiltonian,
    ground_energy,
    resolvent_entry,
    restriction_difference,
    trace_projector,
    transverse_offset,
)
from anderson_lab.core.errors import EigenvalueHitError
from anderson_lab.core.lattice import Box, Site, TorusGrid
from anderson_lab.disorder.sampling import sample_disorder


@pytest.fixture
def random_h(density, delta_potential):
    box = Box(Site.origin(), 2)
    sample = sample_disorder(density, box, seed=21, potential=delta_potential)
    return build(box, 1.0, delta_potential, sample)


class TestBuild:
    def test_free_laplacian_diagonal(self, small_box):
        lap = box_laplacian(small_box).toarray()
        assert np.all(np.diag(lap) == 3.0)
        i, j = small_box.index_of(Site(0, 0, 0)), small_box.index_of(Site(0, 1, 0))
        assert lap[i, j] == -0.5
        assert np.count_nonzero(lap[i]) == 7

    def test_free_ground_energy(self):
        box = Box(Site.origin(), 3)
        expected = 3.0 * (1.0 - math.cos(math.pi / (box.side + 1)))
        assert ground_energy(free_hamiltonian(box)) == pytest.approx(expected)

    def test_potential_on_diagonal(self, random_h):
        diag = random_h.matrix.diagonal()
        assert diag == pytest.approx(3.0 + random_h.potential_values)
        assert random_h.hermiticity_residual() == 0.0
        assert random_h.provenance["potential"] == "overlapping"
        assert random_h.provenance["seed"] == 21

    def test_triplets(self, random_h, tmp_path):
        lines = random_h.to_triplets()
        assert len(lines) == random_h.matrix.nnz
        row, col, value = lines[0].split()
        assert (int(row), int(col)) == (0, 0)
        path = tmp_path / "h" / "matrix.txt"
        random_h.write_triplets(path)
        assert path.read_text().count("\n") == random_h.matrix.nnz


class TestResolvent:
    def test_entry_matches_dense_inverse(self, random_h):
        z = -0.7 + 0.01j
        dense = np.linalg.inv(random_h.dense() - z * np.eye(random_h.dimension))
        x, y = Site(1, 0, -1), Site(-2, 1, 0)
        value = resolvent_entry(random_h, -0.7, 0.01, x, y)
        assert value == pytest.approx(dense[random_h.index_of(x), random_h.index_of(y)])

    def test_real_symmetric(self, random_h):
        solver = ResolventSolver(random_h, -2.5)
        a, b = Site(0, 0, 0), Site(2, -1, 1)
        assert solver.entry(a, b) == pytest.approx(solver.entry(b, a))

    def test_transpose_solve(self, random_h):
        solver = ResolventSolver(random_h, -0.7, 0.05)
        rhs = np.arange(random_h.dimension, dtype=complex)
        a = random_h.dense() - (-0.7 + 0.05j) * np.eye(random_h.dimension)
        assert solver.solve(rhs, transpose=True) == pytest.approx(np.linalg.solve(a.T, rhs))

    def test_iterative_path(self, random_h, monkeypatch):
        direct = ResolventSolver(random_h, -2.5).entry(Site.origin(), Site(1, 1, 0))
        monkeypatch.setattr(ham, "DIRECT_SOLVE_MAX_SITES", 0)
        iterative = ResolventSolver(random_h, -2.5).entry(Site.origin(), Site(1, 1, 0))
        assert iterative == pytest.approx(direct, rel=1e-8)

    def test_eigenvalue_hit(self):
        h = free_hamiltonian(Box(Site.origin(), 0))
        with pytest.raises(EigenvalueHitError):
            ResolventSolver(h, 3.0)

    def test_sparse_matrix_input(self, random_h):
        solver = ResolventSolver(random_h.matrix, -1.0, box=random_h.box)
        assert solver.entry(Site.origin(), Site.origin()) == pytest.approx(
            resolvent_entry(random_h, -1.0, 0.0, Site.origin(), Site.origin())
        )

    def test_large_box_approaches_lattice_green(self):
        h = free_hamiltonian(Box(Site.origin(), 9))
        w = Site(3, 0, 0)
        value = complex(resolvent_entry(h, -1.0, 0.0, Site.origin(), w))
        assert value.real == pytest.approx(free_green(-1.0, w, TorusGrid(64)), rel=1e-4)


class TestSpectralWindow:
    def test_centered(self):
        w = SpectralWindow.centered(-0.5, 0.2)
        assert (w.lower, w.upper) == pytest.approx((-0.6, -0.4))
        assert w.width == pytest.approx(0.2)

    def test_distance_to_band(self):
        assert SpectralWindow(-0.6, -0.4).distance_to_band == pytest.approx(0.4)
        assert SpectralWindow(6.5, 7.0).distance_to_band == pytest.approx(0.5)
        assert SpectralWindow(-0.1, 0.1).distance_to_band == 0.0

    def test_empty_window_rejected(self):
        with pytest.raises(ValueError):
            SpectralWindow(1.0, 0.0)

    def test_half_open_count(self):
        evals = np.array([-1.0, 0.0, 0.5, 1.0])
        assert count_in_window(evals, SpectralWindow(0.0, 1.0)) == 2


class TestSpectrum:
    def test_trace_projector_dense(self, random_h):
        evals = eigenvalues(random_h)
        window = SpectralWindow(-1.0, 1.0)
        assert trace_projector(random_h, window) == int(np.sum((evals >= -1.0) & (evals < 1.0)))

    def test_trace_projector_inertia_matches_dense(self, random_h, monkeypatch):
        window = SpectralWindow(-0.9, 2.1)
        dense = trace_projector(random_h, window)
        monkeypatch.setattr(ham, "DENSE_EIGEN_MAX_SITES", 0)
        assert trace_projector(random_h, window) == dense

    def test_ground_energy_sparse_matches_dense(self, random_h, monkeypatch):
        dense = ground_energy(random_h)
        monkeypatch.setattr(ham, "DENSE_EIGEN_MAX_SITES", 0)
        assert ground_energy(random_h) == pytest.approx(dense, abs=1e-7)
        assert dense == pytest.approx(eigenvalues(random_h)[0])


class TestDipoleWall:
    def test_bound_state_second_order(self):
        lam = 0.1
        e_m = dipole_bound_state_energy(lam)
        assert abs(e_m + 2 * lam**2) <= 4 * lam**4

    def test_free_chain(self):
        assert chain_ground_energy(0.0, 5) == pytest.approx(1.0 - math.cos(math.pi / 12))

    def test_wall_converges_to_exact(self):
        finite, exact = dipole_wall_ground(0.2, 100)
        assert finite == pytest.approx(exact, abs=1e-10)

    @pytest.mark.parametrize("coupling, radius", [(0.5, 50), (0.0, 50), (0.1, 10)])
    def test_wall_preconditions(self, coupling, radius):
        with pytest.raises(ValueError):
            dipole_wall_ground(coupling, radius)

    def test_slab_separates(self):
        slab = dipole_slab_ground(0.1, 3) - transverse_offset(3)
        assert slab == pytest.approx(chain_ground_energy(0.1, 3), abs=1e-9)


class TestRestriction:
    def test_same_box_zero(self, density, delta_potential):
        box = Box(Site.origin(), 2)
        sample = sample_disorder(density, box, seed=2, potential=delta_potential)
        assert restriction_difference(box, box, 0.5, delta_potential, sample, -2.0, Site.origin(), Site.origin()) == 0.0

    def test_nested_boxes_close_deep_inside(self, density, delta_potential):
        outer = Box(Site.origin(), 4)
        sample = sample_disorder(density, outer, seed=2, potential=delta_potential)
        near = restriction_difference(Box(Site.origin(), 1), outer, 0.5, delta_potential, sample, -3.0,
                                      Site.origin(), Site.origin())
        far = restriction_difference(Box(Site.origin(), 3), outer, 0.5, delta_potential, sample, -3.0,
                                     Site.origin(), Site.origin())
        assert far < near
        assert far < 1e-3

    def test_boundary_coupling_norm(self):
        assert boundary_coupling_norm(Box(Site.origin(), 2)) == pytest.approx(0.5 * math.sqrt(3))
        assert boundary_coupling_norm(Box(Site.origin(), 0)) == pytest.approx(0.5 * math.sqrt(6))


class TestFiniteHamiltonian:
    def test_dimension_and_index(self, small_box):
        h = FiniteHamiltonian(small_box, box_laplacian(small_box), np.zeros(27), 0.0)
        assert h.dimension == 27
        assert h.index_of(Site(1, 1, 1)) == 26
