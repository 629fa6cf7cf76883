"""Solvability certificates for monotone Wentzell problems.

Two certificates are provided:

* aggregate load (c = 0, no shift): the load total T = int f dx + int g dS/b
  must lie in lambda1 R(alpha1) + lambda2 R(alpha2); interior membership plus
  Delta_2 on both Young functions is sufficient.
* ground state (problem shifted by the smallest eigenvalue of the linear
  operator): the load is tested through <F, Z> against bounds built from the
  limits alpha(+-inf) and the positive ground state Z.

A coercive problem (shift below the smallest eigenvalue) is always solvable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import GroundStateError, WrongCertificateError
from .geometry import Measure, ProductVector, integrate_mu, x2_inner_product
from .nonlinearity import RangeInterval, delta2_check, minkowski_combine
from .operator import OperatorMatrices, WentzellProblem, assemble, residual_vector
from .spectral import EigenResult, smallest_eigenpair

STRICT = "strictly-feasible"
BOUNDARY = "necessary-only"
INFEASIBLE = "infeasible"
EXIT_CODES = {STRICT: 0, BOUNDARY: 2, INFEASIBLE: 3}

EPS_REL = 1e-9
SHIFT_TOL = 1e-8


@dataclass
class SolvabilityReport:
    verdict: str
    certificate: str
    total_load: float
    tested_value: float  # T for the aggregate certificate, <F, Z> for the ground-state one
    interval: RangeInterval
    measure: Measure
    delta2: dict
    reason: str
    ground_state: Optional[dict] = None
    notes: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.verdict]

    def summary_line(self) -> str:
        return (f"{self.verdict}: {self.certificate} certificate, value {self.tested_value:.10g} "
                f"vs {self.interval} ({self.reason})")

    def to_dict(self) -> dict:
        out = {
            "verdict": self.verdict,
            "exit_code": self.exit_code,
            "certificate": self.certificate,
            "total_load": self.total_load,
            "tested_value": self.tested_value,
            "interval": self.interval.to_dict(),
            "lambda1": self.measure.lambda1,
            "lambda2": self.measure.lambda2,
            "delta2": self.delta2,
            "reason": self.reason,
            "notes": list(self.notes),
        }
        if self.ground_state is not None:
            out["ground_state"] = {k: _clean(v) for k, v in self.ground_state.items()}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, default=_clean)


def _clean(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def _delta2_flags(problem: WentzellProblem) -> dict:
    return {name: delta2_check(a).passes for name, a in (("alpha1", problem.alpha1), ("alpha2", problem.alpha2))}


def _margin(interval: RangeInterval, value: float) -> float:
    return EPS_REL * max(interval.scale(), abs(value))


def classify(value: float, interval: RangeInterval, delta2_ok: bool):
    """Verdict for a value tested against an admissible interval; returns (verdict, reason)."""
    eps = _margin(interval, value)
    if not interval.closure_contains(value, eps):
        return INFEASIBLE, "outside the closure of the admissible interval"
    if interval.interior_contains(value, eps):
        if delta2_ok:
            return STRICT, "interior of the admissible interval"
        return BOUNDARY, "interior, but a Young function fails the Delta_2 check"
    return BOUNDARY, "on an endpoint of the admissible interval (within float margin)"


def certify_mean_zero_c(problem: WentzellProblem) -> SolvabilityReport:
    """Aggregate-load certificate for c = 0 and no shift."""
    mesh = problem.mesh
    if not mesh.c_is_zero():
        raise WrongCertificateError("c is not identically zero; use the ground-state certificate")
    if problem.shift != 0.0:
        raise WrongCertificateError("shifted problems need the ground-state certificate")
    meas = mesh.measure
    T = integrate_mu(problem.load, mesh)
    interval = minkowski_combine(problem.alpha1.range(), meas.lambda1, problem.alpha2.range(), meas.lambda2)
    flags = _delta2_flags(problem)
    if interval.is_degenerate:
        # linear problem: solvable iff the load is orthogonal to the constants
        eps = _margin(interval, T) * max(1.0, float(np.abs(problem.load.as_array()).max(initial=0.0)))
        verdict = STRICT if abs(T) <= eps else INFEASIBLE
        reason = "load orthogonal to the null space" if verdict == STRICT else "load not orthogonal to constants"
        return SolvabilityReport(verdict, "linear-fredholm", T, T, interval, meas, flags, reason)
    verdict, reason = classify(T, interval, all(flags.values()))
    return SolvabilityReport(verdict, "aggregate-load", T, T, interval, meas, flags, reason)


def _same_family(a, b) -> bool:
    return a is b or a.to_config() == b.to_config()


def certify_ground_state(problem: WentzellProblem, eigen: EigenResult | None = None,
                         ops: OperatorMatrices | None = None) -> SolvabilityReport:
    """Ground-state certificate for a problem shifted by the smallest eigenvalue.

    Requires alpha2 = 0 (nonlinearity in the bulk only) or alpha2 = alpha1.
    Reports the literal bounds with the M-normalized Z:
        necessary  alpha(-inf) <Z,1> <= <F,Z> <= alpha(+inf) <Z,1>
        sufficient alpha(-inf)/min Z < <F,Z> < alpha(+inf)/max Z
    together with the sharp interval obtained by testing the equation with Z,
    alpha(-+inf) * int Z dnu, where nu is the measure carrying alpha.
    """
    mesh = problem.mesh
    alpha = problem.alpha1
    if problem.alpha2.is_zero():
        on_boundary = False
    elif _same_family(problem.alpha2, alpha):
        on_boundary = True
    else:
        raise WrongCertificateError("ground-state certificate needs alpha2 = 0 or alpha2 = alpha1")
    if eigen is None:
        eigen = smallest_eigenpair(ops if ops is not None else assemble(mesh, problem.q))
    lam = eigen.eigenvalue
    if abs(problem.shift - lam) > SHIFT_TOL * (1.0 + abs(lam)):
        raise WrongCertificateError(
            f"problem shift {problem.shift:.10g} differs from the ground eigenvalue {lam:.10g}")
    z = eigen.nodal
    if z.min() <= 0.0:
        raise GroundStateError(f"ground state is not positive (min {z.min():.3e}); refine the mesh")
    Z = eigen.Z
    meas = mesh.measure
    T = integrate_mu(problem.load, mesh)
    FZ = x2_inner_product(problem.load, Z, mesh)
    z_mu = float(np.dot(mesh.weights, z) + np.dot(mesh.boundary_mass, Z.boundary))
    z_dx = float(np.dot(mesh.weights, z))
    zmin, zmax = float(z.min()), float(z.max())
    rng = alpha.range()
    lo, hi = rng.lower, rng.upper

    nec = RangeInterval(lo * z_mu, hi * z_mu, rng.lower_attained, rng.upper_attained)
    suf = RangeInterval(lo / zmin, hi / zmax)
    weight = z_mu if on_boundary else z_dx
    sharp = RangeInterval(lo * weight, hi * weight, rng.lower_attained, rng.upper_attained)
    flags = _delta2_flags(problem)

    gs = {
        "eigenvalue": lam, "load_projection": FZ, "z_min": zmin, "z_max": zmax,
        "z_integral_mu": z_mu, "z_integral_interior": z_dx,
        "nec_lower": nec.lower, "nec_upper": nec.upper,
        "suf_lower": suf.lower, "suf_upper": suf.upper,
        "sharp_lower": sharp.lower, "sharp_upper": sharp.upper,
        "nec_holds": nec.closure_contains(FZ, _margin(nec, FZ)),
        "suf_holds": suf.interior_contains(FZ, _margin(suf, FZ)),
        "sharp_interior": sharp.interior_contains(FZ, _margin(sharp, FZ)),
        "nonlinearity_on_boundary": on_boundary,
    }

    if alpha.is_zero():
        eps = _margin(sharp, FZ) * max(1.0, float(np.abs(problem.load.as_array()).max(initial=0.0)))
        verdict = STRICT if abs(FZ) <= eps else INFEASIBLE
        reason = "load orthogonal to the ground state" if verdict == STRICT else "load not orthogonal to Z"
        return SolvabilityReport(verdict, "linear-fredholm", T, FZ, sharp, meas, flags, reason, gs)

    notes = []
    if not gs["nec_holds"]:
        verdict, reason = INFEASIBLE, "necessary bound violated"
    elif not sharp.closure_contains(FZ, _margin(sharp, FZ)):
        verdict, reason = INFEASIBLE, "outside the interval obtained by testing with Z"
        if gs["suf_holds"]:
            notes.append("sufficient bound holds but the Z-tested interval excludes the load")
    elif gs["suf_holds"] and gs["sharp_interior"] and all(flags.values()):
        verdict, reason = STRICT, "strict sufficient bound and interior of the Z-tested interval"
    else:
        verdict = BOUNDARY
        reason = "necessary bounds hold; sufficiency not established"
    return SolvabilityReport(verdict, "ground-state", T, FZ, sharp, meas, flags, reason, gs, notes)


def certify_coercive(problem: WentzellProblem, eigen: EigenResult) -> SolvabilityReport:
    """Shift strictly below the smallest eigenvalue: the energy is coercive for any load."""
    meas = problem.mesh.measure
    T = integrate_mu(problem.load, problem.mesh)
    whole = RangeInterval(-math.inf, math.inf)
    gs = {"eigenvalue": eigen.eigenvalue, "shift": problem.shift}
    return SolvabilityReport(STRICT, "coercive", T, T, whole, meas, _delta2_flags(problem),
                             "linear part is positive definite", gs)


def certify(problem: WentzellProblem, ops: OperatorMatrices | None = None,
            eigen: EigenResult | None = None) -> SolvabilityReport:
    """Dispatch to the certificate matching the problem's c and shift."""
    if problem.mesh.c_is_zero() and problem.shift == 0.0:
        return certify_mean_zero_c(problem)
    if eigen is None:
        eigen = smallest_eigenpair(ops if ops is not None else assemble(problem.mesh, problem.q))
    lam = eigen.eigenvalue
    if problem.shift < lam - SHIFT_TOL * (1.0 + abs(lam)):
        return certify_coercive(problem, eigen)
    if abs(problem.shift - lam) <= SHIFT_TOL * (1.0 + abs(lam)):
        return certify_ground_state(problem, eigen)
    raise WrongCertificateError("shift above the smallest eigenvalue is not covered by any certificate")


@dataclass(frozen=True)
class NecessityAudit:
    passed: bool
    identity_lhs: float
    identity_rhs: float
    identity_error: float
    in_closure: Optional[bool]
    z_identity_error: Optional[float] = None

    def __bool__(self):
        return self.passed


def necessity_audit(problem: WentzellProblem, U: ProductVector, ops: OperatorMatrices | None = None,
                    eigen: EigenResult | None = None, rtol: float = 1e-6) -> NecessityAudit:
    """Test the weak form with v = 1 (and with v = Z when shifted).

    With c = 0 and no shift this checks int alpha1(u) dx + int alpha2(u) dS/b = T
    and T in closure(lambda1 R(alpha1) + lambda2 R(alpha2)). The boundary term
    c u and the shift term enter the identity when present.
    """
    mesh = problem.mesh
    U.require_coupled(mesh)
    u = U.interior
    ub = U.boundary
    T = integrate_mu(problem.load, mesh)
    lhs = (float(np.dot(mesh.weights, problem.alpha1.alpha(u)))
           + float(np.dot(mesh.boundary_mass, problem.alpha2.alpha(ub) + mesh.c * ub)))
    if problem.shift:
        lhs -= problem.shift * integrate_mu(U, mesh)
    err = abs(lhs - T)
    tol = rtol * (1.0 + abs(T))
    ok = err <= tol
    in_closure = None
    if mesh.c_is_zero() and problem.shift == 0.0:
        meas = mesh.measure
        interval = minkowski_combine(problem.alpha1.range(), meas.lambda1,
                                     problem.alpha2.range(), meas.lambda2)
        in_closure = interval.closure_contains(T, tol)
        ok = ok and in_closure
    z_err = None
    if problem.shift:
        if eigen is None:
            eigen = smallest_eigenpair(ops if ops is not None else assemble(mesh, problem.q))
        Z = eigen.Z
        zl = (float(np.dot(mesh.weights, problem.alpha1.alpha(u) * Z.interior))
              + float(np.dot(mesh.boundary_mass, problem.alpha2.alpha(ub) * Z.boundary)))
        # <(K - lambda M) u, z> vanishes only when the shift is the eigenvalue
        if ops is None:
            ops = assemble(mesh, problem.q)
        linear = float(Z.interior @ (ops.K @ u) - problem.shift * np.dot(Z.interior, ops.M @ u))
        FZ = x2_inner_product(problem.load, Z, mesh)
        z_err = abs(zl + linear - FZ)
        ok = ok and z_err <= rtol * (1.0 + abs(FZ))
    return NecessityAudit(bool(ok), lhs, T, err, in_closure, z_err)


def residual_projection(problem: WentzellProblem, ops: OperatorMatrices, U: ProductVector) -> float:
    """1^T r(u): the weak residual tested with the constant function."""
    return float(np.sum(residual_vector(problem, ops, U.interior)))
