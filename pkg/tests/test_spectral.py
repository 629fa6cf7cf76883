import math

import numpy as np
import pytest
from scipy import optimize

from wentzell import (ProductVector, assemble, build_interval_mesh, build_rectangle_mesh, fredholm_project,
                      load_preset, load_vector, null_space_dim, smallest_eigenpair, x2_inner_product, x2_norm)
from wentzell.config import build_problem
from wentzell.spectral import smallest_eigenpairs, write_eigen_csv


def robin_interval_eigenvalue(c):
    """Ground eigenvalue on (0,1), b = 1, both ends c: cos(k(x-1/2)) with tan(k/2) = (c - k^2)/k."""
    if c == 0:
        return 0.0
    k = optimize.brentq(lambda k: math.sin(k / 2) * k - (c - k * k) * math.cos(k / 2), 1e-9, math.pi - 1e-9)
    return k * k


class TestGroundState:
    def test_robin_interval_oracle(self):
        mesh = build_interval_mesh(0.0, 1.0, 200, 1.0, 1.0)
        eig = smallest_eigenpair(assemble(mesh))
        assert eig.eigenvalue == pytest.approx(robin_interval_eigenvalue(1.0), abs=1e-4)
        assert eig.eigenvalue > 0

    def test_tan_half_gives_unit_eigenvalue(self):
        assert robin_interval_eigenvalue(1 + math.tan(0.5)) == pytest.approx(1.0, abs=1e-12)
        eig = smallest_eigenpair(build_problem(load_preset("interval-eigen")).ops)
        assert eig.eigenvalue == pytest.approx(1.0, abs=1e-5)
        z = eig.nodal / eig.nodal.max()
        np.testing.assert_allclose(z, np.cos(eig.mesh.x() - 0.5) / 1.0, atol=1e-4)

    def test_neumann_constant(self, unit_interval):
        eig = smallest_eigenpair(assemble(unit_interval))
        assert abs(eig.eigenvalue) <= 1e-10
        np.testing.assert_allclose(eig.nodal, 1 / math.sqrt(3.0), atol=1e-10)

    def test_normalized_and_positive(self):
        mesh = build_rectangle_mesh(1.0, 2.0, 8, 8, "1 + x", "1 + y")
        eig = smallest_eigenpair(assemble(mesh, 0.3))
        assert x2_norm(eig.Z, mesh) == pytest.approx(1.0, abs=1e-12)
        assert eig.nodal.min() > 0
        assert eig.gap > 0

    def test_second_order_convergence(self):
        lam = robin_interval_eigenvalue(1.0)
        errs = [abs(smallest_eigenpair(assemble(build_interval_mesh(0, 1, n, 1.0, 1.0))).eigenvalue - lam)
                for n in (20, 40, 80)]
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders > 1.9), orders

    def test_sparse_matches_dense(self):
        ops = assemble(build_rectangle_mesh(1.0, 1.0, 12, 12, 1.0, 0.5), 0.4)
        dense = smallest_eigenpair(ops)
        sparse = smallest_eigenpair(ops, dense_limit=10)
        assert sparse.method == "shift-invert" and dense.method == "dense"
        assert sparse.eigenvalue == pytest.approx(dense.eigenvalue, rel=1e-10)
        np.testing.assert_allclose(sparse.nodal, dense.nodal, atol=1e-8)


class TestBoxSensitivity:
    """Square with the same c on all edges; eigenvalue behaviour under refinement."""

    def test_no_surface_diffusion_gives_two(self):
        c = 2 + math.tan(0.5)
        lam = [smallest_eigenpair(assemble(build_rectangle_mesh(1, 1, n, n, 1.0, c))).eigenvalue for n in (16, 32)]
        assert abs(lam[1] - 2.0) < abs(lam[0] - 2.0) / 3.5
        assert lam[1] == pytest.approx(2.0, abs=1e-4)

    def test_surface_diffusion_lowers_below_rayleigh_bound(self):
        q = 0.5 * (2 * math.cos(0.5) - math.tan(0.5))
        c = 2 + math.tan(0.5) - q
        mesh = build_rectangle_mesh(1, 1, 32, 32, 1.0, c)
        ops = assemble(mesh, q)
        eig = smallest_eigenpair(ops)
        z = np.cos(mesh.x() - 0.5) * np.cos(mesh.y() - 0.5)
        rayleigh = (z @ ops.K @ z) / (z @ ops.M @ z)
        assert eig.eigenvalue < rayleigh < 2.0


class TestNullSpace:
    def test_neumann_one(self, unit_square):
        assert null_space_dim(assemble(unit_square)) == 1

    def test_robin_none(self):
        assert null_space_dim(assemble(build_interval_mesh(0, 1, 16, 1.0, 1.0))) == 0

    def test_one_sided_robin(self):
        mesh = build_interval_mesh(0, 1, 16, 1.0, {"values": [0.0, 1.0]})
        ops = assemble(mesh)
        dense = np.linalg.eigvalsh(np.diag(ops.mass_diagonal ** -0.5) @ ops.K.toarray()
                                   @ np.diag(ops.mass_diagonal ** -0.5))
        assert dense.min() > 1e-3
        assert null_space_dim(ops) == 0

    def test_k_clipped(self):
        mesh = build_interval_mesh(0, 1, 2, 1.0, 0.0)
        vals, vecs, _, _ = smallest_eigenpairs(assemble(mesh), k=10)
        assert vals.size == 3


class TestFredholm:
    def test_defect_of_constant(self, unit_interval):
        eig = smallest_eigenpair(assemble(unit_interval))
        F_range, defect = fredholm_project(unit_interval, eig, ProductVector.constant(1.0, unit_interval))
        assert defect == pytest.approx(math.sqrt(3.0))
        assert x2_inner_product(F_range, eig.Z, unit_interval) == pytest.approx(0.0, abs=1e-12)

    def test_idempotent(self, unit_square):
        ops = assemble(unit_square)
        eig = smallest_eigenpair(ops)
        F = load_vector(unit_square, "x*y + 1", "x")
        once, _ = fredholm_project(ops, eig, F)
        twice, d2 = fredholm_project(ops, eig, once)
        assert d2 == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(twice.interior, once.interior, atol=1e-12)

    def test_example_boundary_data_has_defect(self):
        built = build_problem(load_preset("example-2.1"), need_eigen=True)
        _, defect = fredholm_project(built.ops, built.eigen, built.problem.load)
        assert abs(defect) > 0.1

    def test_requires_normalized(self, unit_interval):
        eig = smallest_eigenpair(assemble(unit_interval))
        bad = type(eig)(eig.eigenvalue, eig.Z * 2.0, eig.second, eig.residual, eig.iterations, eig.method, eig.mesh)
        with pytest.raises(ValueError):
            fredholm_project(unit_interval, bad, ProductVector.constant(1.0, unit_interval))


def test_eigen_csv(tmp_path):
    mesh = build_rectangle_mesh(1, 1, 3, 3, 1.0, 1.0)
    eig = smallest_eigenpair(assemble(mesh))
    path = tmp_path / "z.csv"
    write_eigen_csv(path, eig)
    rows = path.read_text().splitlines()
    assert rows[0] == "node,x,y,z,boundary"
    assert len(rows) == mesh.n_nodes + 1
    assert sum(int(r.split(",")[-1]) for r in rows[1:]) == mesh.n_boundary
