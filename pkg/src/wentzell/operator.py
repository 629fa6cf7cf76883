"""Assembly of the discrete Wentzell Laplacian on the product space X2.

Unknowns of a coupled problem are the nodal values u of the closed domain; the
boundary component is the restriction E_Gamma u. Full forms act on product
vectors (u_Omega, u_Gamma) block-diagonally:

    K_full = diag(K_Omega, K_Gamma),   M_full = diag(W, W_Gamma / b)

with K_Omega the lumped P1 stiffness, K_Gamma = diag(c dS / b) + q * (chain
Laplacian in arc length). The reduced forms K = E^T K_full E and
M = E^T M_full E (E = [I; E_Gamma]) are what the solvers use. The outward
normal derivative never appears: it is absorbed by the weak form.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ShapeMismatchError
from .geometry import Mesh, ProductVector
from .nonlinearity import Nonlinearity, ZeroNonlinearity


def stiffness_1d(n: int, h: float) -> sp.csr_matrix:
    """P1 stiffness on n uniform cells (n+1 nodes, natural ends)."""
    main = np.full(n + 1, 2.0 / h)
    main[[0, -1]] = 1.0 / h
    off = np.full(n, -1.0 / h)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def lumped_mass_1d(n: int, h: float) -> np.ndarray:
    w = np.full(n + 1, h)
    w[[0, -1]] = h / 2
    return w


def chain_laplacian(mesh: Mesh) -> sp.csr_matrix:
    """Form of int_Gamma u' v' dS on the closed boundary chain (boundary-local indices)."""
    nb = mesh.n_boundary
    if mesh.boundary_segments.size == 0:
        return sp.csr_matrix((nb, nb))
    i, j = mesh.boundary_segments[:, 0], mesh.boundary_segments[:, 1]
    w = 1.0 / mesh.segment_lengths
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([i, j, j, i])
    vals = np.concatenate([w, w, -w, -w])
    return sp.csr_matrix((vals, (rows, cols)), shape=(nb, nb))


def trace_matrix(mesh: Mesh) -> sp.csr_matrix:
    nb = mesh.n_boundary
    return sp.csr_matrix((np.ones(nb), (np.arange(nb), mesh.boundary_nodes)), shape=(nb, mesh.n_nodes))


def _fingerprint(a: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(a, dtype=float).tobytes()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class OperatorMatrices:
    mesh: Mesh
    q: float
    K: sp.csr_matrix  # reduced stiffness on nodal unknowns
    M: sp.csr_matrix  # reduced (diagonal) mass
    K_interior: sp.csr_matrix
    K_boundary: sp.csr_matrix
    trace: sp.csr_matrix
    metadata: dict = field(default_factory=dict)

    @property
    def mass_diagonal(self) -> np.ndarray:
        return self.M.diagonal()

    @property
    def mass_interior(self) -> np.ndarray:
        return self.mesh.weights

    @property
    def mass_boundary(self) -> np.ndarray:
        return self.mesh.boundary_mass

    def full_stiffness(self) -> sp.csr_matrix:
        return sp.block_diag([self.K_interior, self.K_boundary], format="csr")

    def full_mass(self) -> sp.csr_matrix:
        return sp.diags(np.concatenate([self.mass_interior, self.mass_boundary]), format="csr")

    def dual_norm(self, r: np.ndarray) -> float:
        """M-dual norm sqrt(r^T M^{-1} r) of a nodal residual."""
        return float(np.sqrt(np.dot(r, r / self.mass_diagonal)))

    def write_coo(self, path, which: str = "K"):
        """Write ``i j value`` lines (0-based) for K or M."""
        A = sp.coo_matrix(getattr(self, which))
        order = np.lexsort((A.col, A.row))
        with open(path, "w") as fh:
            fh.write(f"% {which} {A.shape[0]} {A.shape[1]} {A.nnz}\n")
            for r, c, v in zip(A.row[order], A.col[order], A.data[order]):
                fh.write(f"{int(r)} {int(c)} {float(v)!r}\n")


def assemble(mesh: Mesh, q: float = 0.0) -> OperatorMatrices:
    """Stiffness and mass forms for the given surface-diffusion weight q >= 0."""
    if q < 0:
        raise ValueError("q must be nonnegative")
    if mesh.dimension == 1:
        (n,) = mesh.resolution
        K_int = stiffness_1d(n, mesh.h)
    else:
        nx, ny = mesh.resolution
        hx, hy = mesh.h
        Kx, Ky = stiffness_1d(nx, hx), stiffness_1d(ny, hy)
        Mx, My = sp.diags(lumped_mass_1d(nx, hx)), sp.diags(lumped_mass_1d(ny, hy))
        K_int = (sp.kron(Kx, My) + sp.kron(Mx, Ky)).tocsr()
    K_bdry = sp.diags(mesh.c * mesh.boundary_mass)
    if q > 0 and mesh.dimension == 2:
        K_bdry = K_bdry + q * chain_laplacian(mesh)
    K_bdry = sp.csr_matrix(K_bdry)
    T = trace_matrix(mesh)
    K = (K_int + T.T @ K_bdry @ T).tocsr()
    K = ((K + K.T) * 0.5).tocsr()
    m = mesh.weights.copy()
    np.add.at(m, mesh.boundary_nodes, mesh.boundary_mass)
    meta = {"q": float(q), "b_hash": _fingerprint(mesh.b), "c_hash": _fingerprint(mesh.c),
            "n_nodes": mesh.n_nodes, "n_boundary": mesh.n_boundary}
    return OperatorMatrices(mesh=mesh, q=float(q), K=K, M=sp.diags(m, format="csr"),
                            K_interior=sp.csr_matrix(K_int), K_boundary=K_bdry, trace=T, metadata=meta)


def bilinear_rho(ops: OperatorMatrices, U: ProductVector, V: ProductVector) -> float:
    """rho(U, V) through the full block form; equals u^T K v for coupled vectors."""
    U.check_shape(ops.mesh)
    V.check_shape(ops.mesh)
    return float(U.interior @ (ops.K_interior @ V.interior) + U.boundary @ (ops.K_boundary @ V.boundary))


@dataclass(eq=False)
class WentzellProblem:
    """Mesh, coefficients, nonlinearities and load. ``shift`` subtracts shift*I in X2."""

    mesh: Mesh
    q: float = 0.0
    alpha1: Nonlinearity = field(default_factory=ZeroNonlinearity)
    alpha2: Nonlinearity = field(default_factory=ZeroNonlinearity)
    load: ProductVector | None = None
    shift: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.q < 0:
            raise ValueError("q must be nonnegative")
        if self.load is None:
            self.load = ProductVector.zeros(self.mesh)
        self.load.check_shape(self.mesh)
        if not (np.all(np.isfinite(self.load.interior)) and np.all(np.isfinite(self.load.boundary))):
            raise ValueError("load must be finite")

    @property
    def is_linear(self) -> bool:
        return self.alpha1.is_zero() and self.alpha2.is_zero()

    def with_load(self, load: ProductVector) -> "WentzellProblem":
        return WentzellProblem(self.mesh, self.q, self.alpha1, self.alpha2, load, self.shift, self.name)


def load_functional(ops: OperatorMatrices, F: ProductVector) -> np.ndarray:
    """Nodal vector E^T M_full F (the functional v -> <F, v> on coupled v)."""
    b = ops.mass_interior * F.interior
    np.add.at(b, ops.mesh.boundary_nodes, ops.mass_boundary * F.boundary)
    return b


def nonlinear_term(problem: WentzellProblem, ops: OperatorMatrices, u: np.ndarray) -> np.ndarray:
    """Nodal vector E^T M_full (alpha1(u), alpha2(tr u))."""
    mesh = ops.mesh
    r = ops.mass_interior * problem.alpha1.alpha(u)
    np.add.at(r, mesh.boundary_nodes, ops.mass_boundary * problem.alpha2.alpha(u[mesh.boundary_nodes]))
    return r


def residual_vector(problem: WentzellProblem, ops: OperatorMatrices, u: np.ndarray) -> np.ndarray:
    """r(u) = K u - shift M u + E^T M_full (alpha(u) - F) on nodal unknowns."""
    if u.shape != (ops.mesh.n_nodes,):
        raise ShapeMismatchError(f"expected {ops.mesh.n_nodes} nodal values, got {u.shape}")
    r = ops.K @ u + nonlinear_term(problem, ops, u) - load_functional(ops, problem.load)
    if problem.shift:
        r = r - problem.shift * (ops.M @ u)
    return r


def weak_residual(problem: WentzellProblem, ops: OperatorMatrices, U: ProductVector) -> float:
    """M-dual norm of the weak-form residual; zero exactly at a weak solution."""
    U.require_coupled(ops.mesh)
    return ops.dual_norm(residual_vector(problem, ops, U.interior))


def apply_operator(ops: OperatorMatrices, U: ProductVector) -> ProductVector:
    """M^{-1} K u for a coupled U: the discrete Wentzell operator as an X2-representer."""
    U.require_coupled(ops.mesh)
    return ProductVector.from_nodal((ops.K @ U.interior) / ops.mass_diagonal, ops.mesh)
