import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st

from wentzell import (ProductVector, ShapeMismatchError, UncoupledVectorError, WentzellProblem, assemble,
                      bilinear_rho, build_interval_mesh, build_rectangle_mesh, load_preset, load_vector,
                      weak_residual)
from wentzell.config import build_problem, exact_nodal
from wentzell.operator import apply_operator, chain_laplacian, residual_vector


def _solve_linear(ops, F):
    from wentzell.operator import load_functional
    return spla.spsolve(ops.K.tocsc(), load_functional(ops, F))


class TestForm:
    def test_constants_on_interval(self):
        mesh = build_interval_mesh(0.0, 1.0, 10, 1.0, 1.0)
        ops = assemble(mesh)
        one = ProductVector.constant(1.0, mesh)
        assert bilinear_rho(ops, one, one) == pytest.approx(2.0)

    @pytest.mark.parametrize("q", [0.0, 0.7])
    def test_constants_in_kernel_when_c_zero(self, q):
        ops = assemble(build_rectangle_mesh(1.0, 2.0, 5, 7, 1.3, 0.0), q)
        assert np.max(np.abs(ops.K @ np.ones(ops.mesh.n_nodes))) <= 1e-12

    def test_symmetric(self):
        ops = assemble(build_rectangle_mesh(1.0, 1.0, 6, 4, "1 + x", "y"), 0.4)
        assert abs(ops.K - ops.K.T).max() == 0.0

    def test_rho_of_one_against_v(self):
        mesh = build_rectangle_mesh(1.0, 1.0, 5, 5, "1 + x", "2 + y")
        ops = assemble(mesh, 0.3)
        v = np.cos(mesh.x() + 2 * mesh.y())
        V = ProductVector.from_nodal(v, mesh)
        expected = np.sum(mesh.c * v[mesh.boundary_nodes] * mesh.boundary_mass)
        assert bilinear_rho(ops, ProductVector.constant(1.0, mesh), V) == pytest.approx(expected, abs=1e-12)

    def test_block_form_matches_reduced(self):
        mesh = build_rectangle_mesh(1.0, 1.0, 4, 6, 2.0, 1.0)
        ops = assemble(mesh, 0.5)
        rng = np.random.default_rng(3)
        u, v = rng.standard_normal((2, mesh.n_nodes))
        U, V = ProductVector.from_nodal(u, mesh), ProductVector.from_nodal(v, mesh)
        assert bilinear_rho(ops, U, V) == pytest.approx(u @ ops.K @ v, rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), q=st.floats(0.0, 3.0))
    def test_positive_semidefinite(self, seed, q):
        mesh = build_rectangle_mesh(1.0, 1.0, 4, 4, 1.0, 0.5)
        ops = assemble(mesh, q)
        u = np.random.default_rng(seed).standard_normal(mesh.n_nodes)
        assert u @ ops.K @ u >= 0

    def test_surface_term_increases_form(self):
        mesh = build_rectangle_mesh(1.0, 1.0, 6, 6, 1.0, 0.0)
        u = np.sin(3 * mesh.x()) + mesh.y() ** 2
        values = [u @ assemble(mesh, q).K @ u for q in (0.0, 0.5, 1.0, 2.0)]
        assert np.all(np.diff(values) > 0)

    def test_chain_laplacian_annihilates_constants(self, unit_square):
        L = chain_laplacian(unit_square)
        assert np.max(np.abs(L @ np.ones(unit_square.n_boundary))) <= 1e-12
        # a single closed cycle: exactly one null vector
        assert np.linalg.matrix_rank(L.toarray()) == unit_square.n_boundary - 1

    def test_one_dimension_ignores_q(self):
        mesh = build_interval_mesh(0.0, 1.0, 8, 1.0, 1.0)
        assert abs(assemble(mesh, 0.0).K - assemble(mesh, 3.0).K).max() == 0.0

    def test_negative_q(self, unit_interval):
        with pytest.raises(ValueError):
            assemble(unit_interval, -1.0)

    def test_mass_totals(self, unit_square):
        ops = assemble(unit_square)
        m = unit_square.measure
        assert ops.mass_diagonal.sum() == pytest.approx(m.lambda1 + m.lambda2)


class TestResidual:
    def test_example_exact_solution(self):
        built = build_problem(load_preset("example-2.1"))
        U = ProductVector.from_nodal(exact_nodal(built.config, built.problem.mesh), built.problem.mesh)
        # the exact solution is linear, so the discretization reproduces it
        assert weak_residual(built.problem, built.ops, U) <= 1e-10

    def test_zero_state_with_unit_load(self):
        mesh = build_interval_mesh(0.0, 1.0, 16, 1.0, 0.0)
        ops = assemble(mesh)
        problem = WentzellProblem(mesh, load=ProductVector.constant(1.0, mesh))
        r = residual_vector(problem, ops, np.zeros(mesh.n_nodes))
        lam = mesh.measure.lambda1 + mesh.measure.lambda2
        # |<r, 1>| = lambda1 + lambda2, and the dual norm is at least its square root
        assert abs(r.sum()) == pytest.approx(lam)
        assert weak_residual(problem, ops, ProductVector.zeros(mesh)) >= math.sqrt(lam) - 1e-12

    def test_uncoupled_rejected(self, unit_interval):
        ops = assemble(unit_interval)
        problem = WentzellProblem(unit_interval)
        U = ProductVector(np.zeros(unit_interval.n_nodes), np.array([1.0, 0.0]))
        with pytest.raises(UncoupledVectorError):
            weak_residual(problem, ops, U)

    def test_wrong_length(self, unit_interval):
        ops = assemble(unit_interval)
        with pytest.raises(ShapeMismatchError):
            residual_vector(WentzellProblem(unit_interval), ops, np.zeros(3))

    def test_nonfinite_load(self, unit_interval):
        bad = ProductVector(np.full(unit_interval.n_nodes, np.nan), np.zeros(2))
        with pytest.raises(ValueError):
            WentzellProblem(unit_interval, load=bad)

    def test_apply_operator_on_constants(self):
        mesh = build_interval_mesh(0.0, 1.0, 8, 1.0, 0.0)
        AU = apply_operator(assemble(mesh), ProductVector.constant(1.0, mesh))
        assert np.max(np.abs(AU.interior)) <= 1e-12


def _interval_error(n):
    # u = cos x, b = c = 1: f = cos x, g(0) = 1, g(1) = cos 1 - sin 1
    mesh = build_interval_mesh(0.0, 1.0, n, 1.0, 1.0)
    F = load_vector(mesh, "cos(x)", {"values": [1.0, math.cos(1) - math.sin(1)]})
    u = _solve_linear(assemble(mesh), F)
    return np.max(np.abs(u - np.cos(mesh.x())))


def _square_error(n, q=0.5, c=1.0):
    # u = cos(pi (x - y)); its arc-length derivative vanishes at the corners
    mesh = build_rectangle_mesh(1.0, 1.0, n, n, 1.0, c)
    pi = math.pi
    u_exact = np.cos(pi * (mesh.x() - mesh.y()))
    f = 2 * pi ** 2 * u_exact
    x, y = mesh.boundary_coords.T
    s = np.sin(pi * (x - y))
    dn = np.where(np.isclose(x, 0), pi * s, 0.0) + np.where(np.isclose(x, 1), -pi * s, 0.0)
    dn += np.where(np.isclose(y, 0), -pi * s, 0.0) + np.where(np.isclose(y, 1), pi * s, 0.0)
    ub = np.cos(pi * (x - y))
    g = dn + c * ub + q * pi ** 2 * ub
    F = ProductVector.from_parts(f, g, mesh)
    u = _solve_linear(assemble(mesh, q), F)
    return np.max(np.abs(u - u_exact))


class TestConvergence:
    def test_interval_second_order(self):
        errs = [_interval_error(n) for n in (16, 32, 64)]
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders > 1.9), orders
        assert errs[-1] < 1e-4

    @pytest.mark.parametrize("q", [0.0, 0.5])
    def test_square_second_order(self, q):
        errs = [_square_error(n, q) for n in (8, 16, 32)]
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders > 1.8), orders


class TestExport:
    def test_coo_roundtrip(self, tmp_path, unit_square):
        ops = assemble(unit_square, 0.5)
        path = tmp_path / "K.coo"
        ops.write_coo(path)
        lines = path.read_text().splitlines()
        header = lines[0].split()
        assert header[1:] == ["K", str(unit_square.n_nodes), str(unit_square.n_nodes), str(ops.K.nnz)]
        data = np.array([[float(t) for t in line.split()] for line in lines[1:]])
        dense = np.zeros((unit_square.n_nodes,) * 2)
        dense[data[:, 0].astype(int), data[:, 1].astype(int)] = data[:, 2]
        np.testing.assert_array_equal(dense, ops.K.toarray())

    def test_metadata(self, unit_square):
        a = assemble(unit_square, 0.5).metadata
        b = assemble(unit_square, 0.5).metadata
        assert a == b and a["q"] == 0.5
