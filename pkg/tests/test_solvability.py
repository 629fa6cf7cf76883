import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wentzell import (GroundStateError, ProductVector, WentzellProblem, WrongCertificateError, assemble,
                      build_interval_mesh, build_rectangle_mesh, certify, certify_ground_state,
                      certify_mean_zero_c, load_preset, load_vector, make_nonlinearity, necessity_audit,
                      smallest_eigenpair, solve)
from wentzell.config import build_problem
from wentzell.nonlinearity import RangeInterval
from wentzell.solvability import BOUNDARY, INFEASIBLE, STRICT, classify

ARCTAN = make_nonlinearity("arctan")
C_GROUND = 1 + math.tan(0.5)  # ground eigenvalue 1, eigenvector cos(x - 1/2) on (0, 1)


def boundary_arctan(g, n=32, b=1.0):
    mesh = build_interval_mesh(0.0, 1.0, n, b, 0.0)
    return WentzellProblem(mesh, alpha2=ARCTAN, load=load_vector(mesh, 0.0, g))


def ground_state_problem(f, alpha2=None, n=200):
    mesh = build_interval_mesh(0.0, 1.0, n, 1.0, C_GROUND)
    ops = assemble(mesh)
    eig = smallest_eigenpair(ops)
    problem = WentzellProblem(mesh, alpha1=ARCTAN, alpha2=alpha2 or make_nonlinearity("zero"),
                              load=load_vector(mesh, f, 0.0), shift=eig.eigenvalue)
    return problem, ops, eig


class TestClassify:
    interval = RangeInterval(-1.0, 1.0)

    @pytest.mark.parametrize("value,expected", [(0.0, STRICT), (0.999, STRICT), (1.0, BOUNDARY),
                                                (-1.0, BOUNDARY), (1.0 + 1e-12, BOUNDARY),
                                                (1.001, INFEASIBLE), (-2.0, INFEASIBLE)])
    def test_verdicts(self, value, expected):
        assert classify(value, self.interval, True)[0] == expected

    def test_delta2_failure_downgrades(self):
        assert classify(0.0, self.interval, False)[0] == BOUNDARY


class TestAggregateLoad:
    @pytest.mark.parametrize("g,verdict", [(1.5, STRICT), (1.6, INFEASIBLE), (-1.6, INFEASIBLE),
                                           (math.pi / 2, BOUNDARY), (0.0, STRICT)])
    def test_arctan_on_boundary(self, g, verdict):
        report = certify_mean_zero_c(boundary_arctan(g))
        assert report.certificate == "aggregate-load"
        assert report.total_load == pytest.approx(2 * g)
        assert report.verdict == verdict
        assert report.interval.lower == pytest.approx(-math.pi)
        assert report.interval.upper == pytest.approx(math.pi)

    def test_presets(self):
        assert certify(build_problem(load_preset("e4.7-arctan")).problem).verdict == STRICT
        assert certify(build_problem(load_preset("e4.7-arctan-3.2")).problem).verdict == INFEASIBLE

    def test_linear_fredholm(self):
        built = build_problem(load_preset("linear-compatible"))
        report = certify(built.problem)
        assert (report.certificate, report.verdict) == ("linear-fredholm", STRICT)
        mesh = built.problem.mesh
        bad = WentzellProblem(mesh, load=ProductVector.constant(1.0, mesh))
        assert certify(bad).verdict == INFEASIBLE

    def test_power_always_strict(self):
        mesh = build_rectangle_mesh(1.0, 1.0, 6, 6, 1.0, 0.0)
        problem = WentzellProblem(mesh, alpha1=make_nonlinearity("power", r=1.0, p=3.0),
                                  load=ProductVector.constant(1e6, mesh))
        assert certify(problem).verdict == STRICT

    def test_delta2_failure_is_necessary_only(self):
        mesh = build_interval_mesh(0.0, 1.0, 16, 1.0, 0.0)
        fast = make_nonlinearity("custom", alpha=lambda s: 2 * s * np.exp(s * s),
                                 primitive=lambda s: np.expm1(s * s))
        report = certify_mean_zero_c(WentzellProblem(mesh, alpha1=fast, load=ProductVector.constant(1.0, mesh)))
        assert report.verdict == BOUNDARY and report.delta2["alpha1"] is False

    @pytest.mark.parametrize("kwargs", [{"c": 1.0}, {"shift": 0.5}])
    def test_wrong_certificate(self, kwargs):
        mesh = build_interval_mesh(0.0, 1.0, 8, 1.0, kwargs.get("c", 0.0))
        problem = WentzellProblem(mesh, alpha2=ARCTAN, shift=kwargs.get("shift", 0.0))
        with pytest.raises(WrongCertificateError):
            certify_mean_zero_c(problem)

    @settings(max_examples=20, deadline=None)
    @given(g=st.floats(-3.0, 3.0), k=st.floats(0.25, 4.0))
    def test_b_scaling_invariance(self, g, k):
        # multiplying the boundary equation by k (b, g and alpha2 together) changes nothing
        def saturating(scale):
            return make_nonlinearity("table", points=[[-2.0, -scale], [-1.0, -scale], [0.0, 0.0],
                                                      [1.0, scale], [2.0, scale]])

        reports = []
        for factor in (1.0, k):
            mesh = build_interval_mesh(0.0, 1.0, 8, factor, 0.0)
            problem = WentzellProblem(mesh, alpha2=saturating(factor), load=load_vector(mesh, 0.0, factor * g))
            reports.append(certify_mean_zero_c(problem))
        a, b = reports
        assert b.total_load == pytest.approx(a.total_load, rel=1e-12, abs=1e-14)
        assert b.interval.upper == pytest.approx(a.interval.upper, rel=1e-12)
        assert b.interval.upper_attained
        assert b.verdict == a.verdict

    def test_verdict_monotone_in_load(self):
        verdicts = [certify_mean_zero_c(boundary_arctan(g, n=8)).verdict for g in np.linspace(0, 3, 61)]
        first_bad = verdicts.index(INFEASIBLE)
        assert all(v == STRICT for v in verdicts[:first_bad])
        assert all(v == INFEASIBLE for v in verdicts[first_bad:])

    def test_report_json(self):
        report = certify_mean_zero_c(boundary_arctan(1.5))
        text = report.to_json()
        assert '"verdict": "strictly-feasible"' in text
        assert report.to_json() == text
        assert report.exit_code == 0
        assert "aggregate-load" in report.summary_line()


class TestGroundState:
    def test_bulk_arctan_load_two_infeasible(self):
        problem, ops, eig = ground_state_problem(2.0)
        report = certify_ground_state(problem, eig)
        gs = report.ground_state
        # closed forms for Z = cos(x - 1/2) / N with N^2 = int_0^1 cos^2 + 2 cos^2(1/2)
        N = math.sqrt((1 + math.sin(1)) / 2 + 2 * math.cos(0.5) ** 2)
        z_dx = 2 * math.sin(0.5) / N
        assert gs["eigenvalue"] == pytest.approx(1.0, abs=1e-5)
        assert gs["z_integral_interior"] == pytest.approx(z_dx, rel=1e-4)
        assert gs["load_projection"] == pytest.approx(2 * z_dx, rel=1e-4)
        assert gs["sharp_upper"] == pytest.approx(math.pi / 2 * z_dx, rel=1e-4)
        assert gs["suf_upper"] == pytest.approx(math.pi / 2 * N, rel=1e-4)
        assert gs["suf_holds"] and gs["nec_holds"]
        assert report.verdict == INFEASIBLE
        assert report.notes

    def test_small_load_strict(self):
        problem, ops, eig = ground_state_problem(0.5)
        assert certify(problem, ops, eig).verdict == STRICT

    def test_bulk_and_boundary(self):
        problem, ops, eig = ground_state_problem(2.0, alpha2=ARCTAN)
        report = certify_ground_state(problem, eig)
        gs = report.ground_state
        assert gs["nonlinearity_on_boundary"]
        assert gs["sharp_upper"] == pytest.approx(math.pi / 2 * gs["z_integral_mu"])
        assert report.verdict == STRICT

    def test_zero_eigenvalue_agrees_with_aggregate(self):
        mesh = build_interval_mesh(0.0, 1.0, 16, 1.0, 0.0)
        eig = smallest_eigenpair(assemble(mesh))
        for g in np.linspace(0, 3, 13):
            problem = WentzellProblem(mesh, alpha1=ARCTAN, alpha2=ARCTAN, load=load_vector(mesh, g, g))
            assert certify_ground_state(problem, eig).verdict == certify_mean_zero_c(problem).verdict

    def test_shift_mismatch(self):
        problem, ops, eig = ground_state_problem(0.5)
        with pytest.raises(WrongCertificateError):
            certify_ground_state(WentzellProblem(problem.mesh, alpha1=ARCTAN, load=problem.load, shift=0.9), eig)

    def test_shift_above_eigenvalue(self):
        problem, ops, eig = ground_state_problem(0.5)
        with pytest.raises(WrongCertificateError):
            certify(WentzellProblem(problem.mesh, alpha1=ARCTAN, load=problem.load, shift=1.5), ops, eig)

    def test_mixed_nonlinearities_rejected(self):
        problem, ops, eig = ground_state_problem(0.5, alpha2=make_nonlinearity("power", r=1.0, p=2.0))
        with pytest.raises(WrongCertificateError):
            certify_ground_state(problem, eig)

    def test_nonpositive_ground_state(self):
        problem, ops, eig = ground_state_problem(0.5)
        flipped = type(eig)(eig.eigenvalue, eig.Z * -1.0, eig.second, eig.residual, eig.iterations,
                            eig.method, eig.mesh)
        with pytest.raises(GroundStateError):
            certify_ground_state(problem, flipped)

    def test_coercive(self):
        problem, ops, eig = ground_state_problem(100.0)
        low = WentzellProblem(problem.mesh, alpha1=ARCTAN, load=problem.load, shift=0.5)
        report = certify(low, ops, eig)
        assert (report.certificate, report.verdict) == ("coercive", STRICT)


class TestNecessityAudit:
    def test_solution_passes(self):
        problem = boundary_arctan(1.2)
        ops = assemble(problem.mesh)
        out = solve(problem, ops)
        assert out.converged
        audit = necessity_audit(problem, out.U, ops)
        assert audit and audit.in_closure
        assert audit.identity_error <= 1e-8

    def test_perturbed_state_fails(self):
        problem = boundary_arctan(1.2)
        ops = assemble(problem.mesh)
        U = solve(problem, ops).U + ProductVector.constant(0.1, problem.mesh)
        assert not necessity_audit(problem, U, ops)

    def test_shifted_solution_passes(self):
        problem, ops, eig = ground_state_problem(0.5, n=64)
        out = solve(problem, ops)
        assert out.converged
        audit = necessity_audit(problem, out.U, ops, eig)
        assert audit
        assert audit.z_identity_error <= 1e-8

    def test_robin_identity(self):
        built = build_problem(load_preset("example-2.1"))
        out = solve(built.problem, built.ops)
        assert necessity_audit(built.problem, out.U, built.ops)
