"""Minimization of the convex energy whose critical points are weak solutions.

    E(u) = 1/2 u^T (K - shift M) u + sum w L1(u) + sum (dS/b) L2(tr u) - <F, u>

over coupled nodal vectors. Smooth families use damped Newton with Armijo
backtracking; nonsmooth ones (tables, power with p < 1) use preconditioned
gradient descent with the same line search. A singular linear problem is
solved once through a bordered system that fixes the component along the
null vector (the gauge).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import ProductVector
from .operator import OperatorMatrices, WentzellProblem, load_functional, residual_vector
from .spectral import smallest_eigenpair

CONVERGED = "converged"
DIVERGED = "diverged-along-nullspace"
MAX_ITER = "max-iter"

ARMIJO_C1 = 1e-4
BACKTRACK = 0.5


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-9
    max_iter: int = 200
    gradient_max_iter: int = 20000
    gauge: float = 0.0  # mean of u along the null direction for singular linear problems
    divergence_threshold: float = 1e8
    max_backtracks: int = 60


@dataclass
class SolveOutcome:
    status: str
    U: ProductVector
    residual: float
    iterations: int
    method: str
    energy_trace: list = field(default_factory=list)
    drift_rate: float = 0.0
    null_trace: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def to_dict(self) -> dict:
        return {"status": self.status, "residual": self.residual, "iterations": self.iterations,
                "method": self.method, "drift_rate": self.drift_rate,
                "final_energy": self.energy_trace[-1] if self.energy_trace else None,
                "null_component": self.null_trace[-1] if self.null_trace else None}


def _nodal(U: ProductVector, ops: OperatorMatrices) -> np.ndarray:
    U.require_coupled(ops.mesh)
    return U.interior


def _energy(problem: WentzellProblem, ops: OperatorMatrices, u: np.ndarray, rhs: np.ndarray) -> float:
    mesh = ops.mesh
    Ku = ops.K @ u
    quad = 0.5 * float(np.dot(u, Ku))
    if problem.shift:
        quad -= 0.5 * problem.shift * float(np.dot(u, ops.M @ u))
    nl = float(np.dot(mesh.weights, problem.alpha1.primitive(u)))
    nl += float(np.dot(mesh.boundary_mass, problem.alpha2.primitive(u[mesh.boundary_nodes])))
    return quad + nl - float(np.dot(rhs, u))


def energy(problem: WentzellProblem, ops: OperatorMatrices, U: ProductVector) -> float:
    """Energy of a coupled vector; minimizers are weak solutions."""
    return _energy(problem, ops, _nodal(U, ops), load_functional(ops, problem.load))


def gradient(problem: WentzellProblem, ops: OperatorMatrices, U: ProductVector) -> ProductVector:
    """X2-representer of the energy derivative: M^{-1} r(u), as a coupled vector."""
    r = residual_vector(problem, ops, _nodal(U, ops))
    return ProductVector.from_nodal(r / ops.mass_diagonal, ops.mesh)


def _hessian(problem: WentzellProblem, ops: OperatorMatrices, u: np.ndarray) -> sp.csr_matrix:
    mesh = ops.mesh
    d = ops.mass_interior * problem.alpha1.dalpha(u)
    np.add.at(d, mesh.boundary_nodes, ops.mass_boundary * problem.alpha2.dalpha(u[mesh.boundary_nodes]))
    H = ops.K + sp.diags(d)
    if problem.shift:
        H = H - problem.shift * ops.M
    return sp.csr_matrix(H)


def _solve_regularized(H: sp.csr_matrix, rhs: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Solve H d = rhs, adding mu*M (Levenberg) when H is singular or ill-conditioned."""
    scale = float(max(abs(H.diagonal()).max(), 1.0))
    mu = 0.0
    rhs_norm = float(np.linalg.norm(rhs)) or 1.0
    for _ in range(12):
        A = (H + sp.diags(mu * m)).tocsc() if mu else H.tocsc()
        try:
            d = spla.splu(A).solve(rhs)
        except RuntimeError:
            d = None
        if d is not None and np.all(np.isfinite(d)):
            if np.linalg.norm(A @ d - rhs) <= 1e-8 * rhs_norm:
                return d
        mu = 1e-12 * scale if mu == 0.0 else mu * 100.0
    raise np.linalg.LinAlgError("Hessian solve failed even with regularization")


def _null_vector(problem: WentzellProblem, ops: OperatorMatrices):
    """Direction of possible non-uniqueness/drift: constants, or the ground state when shifted."""
    if problem.shift:
        return smallest_eigenpair(ops).nodal
    if ops.mesh.c_is_zero():
        return np.ones(ops.mesh.n_nodes)
    return None


def _bordered_linear(problem, ops, opts, z):
    """Singular linear problem: minimize over {<u, z>_M = gauge * <1, z>_M} by a bordered solve."""
    m = ops.mass_diagonal
    Mz = m * z
    A = ops.K - problem.shift * ops.M if problem.shift else ops.K
    rhs = load_functional(ops, problem.load)
    n = A.shape[0]
    B = sp.bmat([[A, sp.csr_matrix(Mz[:, None])], [sp.csr_matrix(Mz[None, :]), None]], format="csc")
    target = opts.gauge * float(np.dot(Mz, np.ones(n)))
    sol = spla.splu(B).solve(np.concatenate([rhs, [target]]))
    u, nu = sol[:n], sol[n]
    e = _energy(problem, ops, u, rhs)
    res = ops.dual_norm(residual_vector(problem, ops, u))
    U = ProductVector.from_nodal(u, ops.mesh)
    if res <= opts.tol:
        return SolveOutcome(CONVERGED, U, res, 1, "bordered", [e], 0.0, [float(np.dot(Mz, u))])
    # incompatible load: the energy decreases linearly along z at rate <F, z>
    drift = float(np.dot(rhs, z))
    return SolveOutcome(DIVERGED, U, res, 1, "bordered", [e], drift, [float(np.dot(Mz, u))])


def solve(problem: WentzellProblem, ops: OperatorMatrices, opts: SolveOptions | None = None,
          initial: ProductVector | None = None) -> SolveOutcome:
    """Minimize the energy; see the module docstring for the methods used."""
    opts = opts or SolveOptions()
    mesh = ops.mesh
    m = ops.mass_diagonal
    z = _null_vector(problem, ops)
    if problem.is_linear and z is not None:
        return _bordered_linear(problem, ops, opts, z)

    smooth = problem.alpha1.smooth and problem.alpha2.smooth
    rhs = load_functional(ops, problem.load)
    u = np.zeros(mesh.n_nodes) if initial is None else _nodal(initial, ops).copy()
    zz = float(np.dot(z, m * z)) if z is not None else 1.0
    precond = None
    if not smooth:
        kappa = 1.0
        A = ops.K - problem.shift * ops.M if problem.shift else ops.K
        precond = spla.splu(sp.csc_matrix(A + sp.diags(kappa * m)))

    e = _energy(problem, ops, u, rhs)
    trace, null_trace = [e], []
    method = "newton" if smooth else "preconditioned-gradient"
    max_iter = opts.max_iter if smooth else opts.gradient_max_iter
    res = math.inf
    status = MAX_ITER
    for it in range(1, max_iter + 1):
        r = residual_vector(problem, ops, u)
        res = ops.dual_norm(r)
        if z is not None:
            null_trace.append(float(np.dot(m * z, u)) / zz)
        if res <= opts.tol:
            status = CONVERGED
            break
        if z is not None and _drifting(null_trace, opts.divergence_threshold):
            status = DIVERGED
            break
        if smooth:
            try:
                d = _solve_regularized(_hessian(problem, ops, u), -r, m)
            except np.linalg.LinAlgError:
                d = -r / m
            if np.dot(r, d) >= 0:
                d = -r / m
        else:
            d = -precond.solve(r)
        slope = float(np.dot(r, d))
        t = 1.0
        accepted = False
        for _ in range(opts.max_backtracks):
            u_new = u + t * d
            e_new = _energy(problem, ops, u_new, rhs)
            if e_new <= e + ARMIJO_C1 * t * slope:
                accepted = True
                break
            t *= BACKTRACK
        if accepted and t == 1.0 and z is not None:
            # energy still falling linearly (drift along the null direction): expand the step
            while t < 2.0 ** 40:
                u_try = u + 2.0 * t * d
                e_try = _energy(problem, ops, u_try, rhs)
                if not (e_try < e_new and e_try <= e + ARMIJO_C1 * 2.0 * t * slope):
                    break
                t, u_new, e_new = 2.0 * t, u_try, e_try
        if not accepted:
            # energy differences have hit round-off; accept the full step if it reduces the residual
            u_new = u + d
            if ops.dual_norm(residual_vector(problem, ops, u_new)) >= res:
                break
            e_new = _energy(problem, ops, u_new, rhs)
        u, e = u_new, e_new
        trace.append(e)
    else:
        it = max_iter
    drift = 0.0
    if z is not None:
        # energy slope along the null direction per unit of its component
        drift = -float(np.dot(residual_vector(problem, ops, u), z))
    U = ProductVector.from_nodal(u, mesh)
    return SolveOutcome(status, U, res, it, method, trace, drift, null_trace)


def _drifting(null_trace, threshold: float, window: int = 5) -> bool:
    """Null component beyond threshold and growing monotonically over the last window."""
    if len(null_trace) < window or abs(null_trace[-1]) < threshold:
        return False
    tail = np.abs(np.asarray(null_trace[-window:]))
    return bool(np.all(np.diff(tail) > 0))
