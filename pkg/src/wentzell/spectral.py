"""Smallest eigenpairs of K z = lambda M z and the linear Fredholm projector."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from .errors import EigenSolveError
from .geometry import Mesh, ProductVector, x2_inner_product, x2_norm
from .operator import OperatorMatrices

DENSE_LIMIT = 2000
SHIFT = -1.0


@dataclass(frozen=True, eq=False)
class EigenResult:
    eigenvalue: float
    Z: ProductVector
    second: float
    residual: float
    iterations: int
    method: str
    mesh: Mesh

    @property
    def nodal(self) -> np.ndarray:
        return self.Z.interior

    @property
    def gap(self) -> float:
        return self.second - self.eigenvalue

    def to_dict(self) -> dict:
        return {"eigenvalue": self.eigenvalue, "second": self.second, "gap": self.gap,
                "residual": self.residual, "iterations": self.iterations, "method": self.method,
                "z_min": float(self.nodal.min()), "z_max": float(self.nodal.max())}


def _scale(ops: OperatorMatrices) -> float:
    return float(max(abs(ops.K).sum(axis=1).max(), 1.0))


def smallest_eigenpairs(ops: OperatorMatrices, k: int = 2, dense_limit: int = DENSE_LIMIT,
                        maxiter: int | None = None):
    """The k smallest generalized eigenvalues and M-orthonormal eigenvectors (columns)."""
    n = ops.K.shape[0]
    k = min(k, n)
    m = ops.mass_diagonal
    if n <= dense_limit:
        vals, vecs = la.eigh(ops.K.toarray(), np.diag(m), subset_by_index=[0, k - 1])
        return vals, vecs, 1, "dense"
    try:
        vals, vecs = spla.eigsh(ops.K.tocsc(), k=k, M=ops.M.tocsc(), sigma=SHIFT, which="LM",
                                maxiter=maxiter, tol=1e-12)
    except spla.ArpackNoConvergence as exc:
        res = None
        if exc.eigenvalues.size:
            z = exc.eigenvectors[:, 0]
            res = float(np.linalg.norm(ops.K @ z - exc.eigenvalues[0] * m * z))
        raise EigenSolveError("shift-invert Lanczos did not converge", residual=res) from None
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    # re-normalize in M (ARPACK returns M-orthonormal vectors up to round-off)
    vecs = vecs / np.sqrt(np.einsum("ij,i,ij->j", vecs, m, vecs))
    return vals, vecs, 1, "shift-invert"


def smallest_eigenpair(ops: OperatorMatrices, dense_limit: int = DENSE_LIMIT,
                       maxiter: int | None = None) -> EigenResult:
    """Minimal eigenvalue with its M-normalized eigenvector, oriented so int Z dmu > 0."""
    vals, vecs, iters, method = smallest_eigenpairs(ops, 2, dense_limit, maxiter)
    lam = float(vals[0])
    z = vecs[:, 0].copy()
    m = ops.mass_diagonal
    z /= np.sqrt(np.dot(z, m * z))
    if np.dot(m, z) < 0:
        z = -z
    res = float(np.linalg.norm(ops.K @ z - lam * m * z))
    if res > 1e-8 * _scale(ops):
        raise EigenSolveError(f"eigen residual {res:.3e} above tolerance", residual=res)
    second = float(vals[1]) if vals.size > 1 else np.inf
    return EigenResult(lam, ProductVector.from_nodal(z, ops.mesh), second, res, iters, method, ops.mesh)


def null_space_dim(ops: OperatorMatrices, tol: float = 1e-8) -> int:
    """Number of generalized eigenvalues below tol."""
    n = ops.K.shape[0]
    k = min(4, n)
    while True:
        vals = smallest_eigenpairs(ops, k)[0]
        count = int(np.sum(vals < tol))
        if count < k or k == n:
            return count
        k = min(2 * k, n)


def fredholm_project(ops_or_mesh, eigen: EigenResult, F: ProductVector, tol: float = 1e-8):
    """Split F = F_range + defect * Z with <F_range, Z> = 0; returns (F_range, defect)."""
    mesh = ops_or_mesh.mesh if isinstance(ops_or_mesh, OperatorMatrices) else ops_or_mesh
    Z = eigen.Z
    nrm = x2_norm(Z, mesh)
    if abs(nrm - 1.0) > tol:
        raise ValueError(f"eigenvector is not normalized (norm {nrm:.6g})")
    defect = x2_inner_product(F, Z, mesh)
    F_range = F - Z * defect
    F_range.coupled = F.coupled
    return F_range, defect


def write_eigen_csv(path, eigen: EigenResult):
    mesh = eigen.mesh
    bflag = np.zeros(mesh.n_nodes, dtype=int)
    bflag[mesh.boundary_nodes] = 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "x"] + (["y"] if mesh.dimension == 2 else []) + ["z", "boundary"])
        for k in range(mesh.n_nodes):
            row = [k, repr(float(mesh.coords[k, 0]))]
            if mesh.dimension == 2:
                row.append(repr(float(mesh.coords[k, 1])))
            w.writerow(row + [repr(float(eigen.nodal[k])), int(bflag[k])])
