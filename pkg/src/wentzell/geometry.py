"""Meshes for intervals and axis-aligned rectangles, and the product space X2.

The interior index set contains every grid node of the closed domain, so the
trace of a nodal vector is a plain restriction to ``mesh.boundary_nodes``.
The boundary of a rectangle is one closed arc-length chain
Gamma_1 (bottom) -> Gamma_2 (right) -> Gamma_3 (top) -> Gamma_4 (left) with
shared corner nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import CoefficientDomainError, ShapeMismatchError, UncoupledVectorError
from .expressions import Expression, compile_expression

BoundaryFunction = Union[float, str, np.ndarray, Callable]

COUPLING_TOL = 1e-12


@dataclass(frozen=True)
class Measure:
    """lambda_1 = |Omega|, lambda_2 = int_Gamma dS/b."""

    lambda1: float
    lambda2: float

    @property
    def total(self) -> float:
        return self.lambda1 + self.lambda2


@dataclass(frozen=True, eq=False)
class Mesh:
    dimension: int
    coords: np.ndarray
    weights: np.ndarray
    boundary_nodes: np.ndarray
    boundary_arclength: np.ndarray
    boundary_weights: np.ndarray
    # closed chain as (i, j) pairs of boundary-local indices; empty in 1D
    boundary_segments: np.ndarray
    segment_lengths: np.ndarray
    b: np.ndarray
    c: np.ndarray
    extents: tuple
    resolution: tuple
    coefficient_sources: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return self.coords.shape[0]

    @property
    def n_boundary(self) -> int:
        return self.boundary_nodes.shape[0]

    @property
    def boundary_coords(self) -> np.ndarray:
        return self.coords[self.boundary_nodes]

    @property
    def boundary_mass(self) -> np.ndarray:
        """Quadrature weights of the dS/b measure."""
        return self.boundary_weights / self.b

    @property
    def measure(self) -> Measure:
        return Measure(float(self.weights.sum()), float(self.boundary_mass.sum()))

    @property
    def h(self):
        """Grid spacing (a float in 1D, an (hx, hy) pair in 2D)."""
        spacing = tuple(e / n for e, n in zip(self.extents, self.resolution))
        return spacing[0] if self.dimension == 1 else spacing

    def trace(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u)[self.boundary_nodes]

    def c_is_zero(self) -> bool:
        return bool(np.all(self.c == 0.0))

    def x(self):
        return self.coords[:, 0]

    def y(self):
        return self.coords[:, 1] if self.dimension == 2 else np.zeros(self.n_nodes)

    def to_config(self) -> dict:
        """Structured description; coefficients by name when built from one."""
        if self.dimension == 1:
            out = {"type": "interval", "a": float(self.coords[0, 0]),
                   "b": float(self.coords[-1, 0]), "n": int(self.resolution[0])}
        else:
            out = {"type": "rectangle", "lx": float(self.extents[0]), "ly": float(self.extents[1]),
                   "nx": int(self.resolution[0]), "ny": int(self.resolution[1])}
        coeffs = {}
        for name, values in (("b", self.b), ("c", self.c)):
            src = self.coefficient_sources.get(name)
            coeffs[name] = src if src is not None else {"values": [float(v) for v in values]}
        out["coefficients"] = coeffs
        return out


def _sample_boundary(fn: BoundaryFunction, pts: np.ndarray, s: np.ndarray, name: str):
    """Evaluate a boundary coefficient on boundary nodes; returns (values, source)."""
    nb = pts.shape[0]
    x = pts[:, 0]
    y = pts[:, 1] if pts.shape[1] > 1 else np.zeros(nb)
    source = None
    if isinstance(fn, dict) and "values" in fn:
        fn = np.asarray(fn["values"], dtype=float)
    if isinstance(fn, (int, float)) and not isinstance(fn, bool):
        values = np.full(nb, float(fn))
        source = repr(float(fn))
    elif isinstance(fn, (str, Expression)):
        expr = compile_expression(fn)
        values = expr(x, y, s)
        source = expr.source
    elif callable(fn):
        values = np.broadcast_to(np.asarray(fn(x, y, s), dtype=float), (nb,)).copy()
    else:
        values = np.asarray(fn, dtype=float)
        if values.shape != (nb,):
            raise ShapeMismatchError(f"{name}: expected {nb} boundary samples, got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise CoefficientDomainError(f"{name} has non-finite boundary samples")
    return values, source


def _check_coefficients(b, c):
    if np.any(b <= 0.0):
        raise CoefficientDomainError(f"b must be positive on the boundary (min sample {b.min():g})")
    if np.any(c < 0.0):
        raise CoefficientDomainError(f"c must be nonnegative on the boundary (min sample {c.min():g})")


def build_interval_mesh(a: float, b_end: float, n: int, b_coeff: BoundaryFunction = 1.0,
                        c_coeff: BoundaryFunction = 0.0) -> Mesh:
    """Uniform grid on [a, b_end] with n cells; Gamma is the two endpoints (dS = 1 each)."""
    if not b_end > a:
        raise ValueError("need a < b_end")
    if n < 2:
        raise ValueError("need n >= 2")
    x = np.linspace(a, b_end, n + 1)
    h = (b_end - a) / n
    w = np.full(n + 1, h)
    w[0] = w[-1] = h / 2
    bnodes = np.array([0, n])
    pts = x[bnodes][:, None]
    s = x[bnodes].copy()
    bvals, bsrc = _sample_boundary(b_coeff, pts, s, "b")
    cvals, csrc = _sample_boundary(c_coeff, pts, s, "c")
    _check_coefficients(bvals, cvals)
    return Mesh(
        dimension=1,
        coords=x[:, None],
        weights=w,
        boundary_nodes=bnodes,
        boundary_arclength=s,
        boundary_weights=np.ones(2),
        boundary_segments=np.zeros((0, 2), dtype=int),
        segment_lengths=np.zeros(0),
        b=bvals,
        c=cvals,
        extents=(b_end - a,),
        resolution=(n,),
        coefficient_sources={"b": bsrc, "c": csrc},
    )


def rectangle_boundary_chain(nx: int, ny: int) -> np.ndarray:
    """Node indices (ij-ordering, k = i*(ny+1) + j) around the box, counterclockwise from (0,0)."""
    m = ny + 1
    bottom = [i * m for i in range(nx)]
    right = [nx * m + j for j in range(ny)]
    top = [i * m + ny for i in range(nx, 0, -1)]
    left = [j for j in range(ny, 0, -1)]
    return np.array(bottom + right + top + left, dtype=int)


def build_rectangle_mesh(lx: float, ly: float, nx: int, ny: int, b_coeff: BoundaryFunction = 1.0,
                         c_coeff: BoundaryFunction = 0.0) -> Mesh:
    """Tensor grid on [0, lx] x [0, ly] with trapezoidal weights and a closed boundary chain."""
    if nx < 2 or ny < 2:
        raise ValueError("need nx, ny >= 2")
    if lx <= 0 or ly <= 0:
        raise ValueError("extents must be positive")
    hx, hy = lx / nx, ly / ny
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    wx = np.full(nx + 1, hx)
    wx[[0, -1]] = hx / 2
    wy = np.full(ny + 1, hy)
    wy[[0, -1]] = hy / 2
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    coords = np.column_stack([X.ravel(), Y.ravel()])
    weights = np.outer(wx, wy).ravel()

    chain = rectangle_boundary_chain(nx, ny)
    nb = chain.size
    seg_len = np.concatenate([np.full(nx, hx), np.full(ny, hy), np.full(nx, hx), np.full(ny, hy)])
    segments = np.column_stack([np.arange(nb), (np.arange(nb) + 1) % nb])
    s = np.concatenate([[0.0], np.cumsum(seg_len)[:-1]])
    # node i sits between segment i-1 and segment i
    bw = 0.5 * (seg_len + np.roll(seg_len, 1))

    pts = coords[chain]
    bvals, bsrc = _sample_boundary(b_coeff, pts, s, "b")
    cvals, csrc = _sample_boundary(c_coeff, pts, s, "c")
    _check_coefficients(bvals, cvals)
    return Mesh(
        dimension=2,
        coords=coords,
        weights=weights,
        boundary_nodes=chain,
        boundary_arclength=s,
        boundary_weights=bw,
        boundary_segments=segments,
        segment_lengths=seg_len,
        b=bvals,
        c=cvals,
        extents=(lx, ly),
        resolution=(nx, ny),
        coefficient_sources={"b": bsrc, "c": csrc},
    )


def mesh_from_config(spec: dict, q: float = 0.0) -> Mesh:
    """Build a mesh from its structured description (see ``Mesh.to_config``)."""
    coeffs = spec.get("coefficients", {})

    def coefficient(name, default):
        src = coeffs.get(name, default)
        return compile_expression(src).bind(q) if isinstance(src, str) else src

    kind = spec.get("type")
    if kind == "interval":
        return build_interval_mesh(float(spec.get("a", 0.0)), float(spec.get("b", 1.0)), int(spec["n"]),
                                   coefficient("b", 1.0), coefficient("c", 0.0))
    if kind == "rectangle":
        return build_rectangle_mesh(float(spec.get("lx", 1.0)), float(spec.get("ly", 1.0)),
                                    int(spec["nx"]), int(spec["ny"]),
                                    coefficient("b", 1.0), coefficient("c", 0.0))
    raise ValueError(f"unknown mesh type {kind!r}")


@dataclass(eq=False)
class ProductVector:
    """U = (u_Omega, u_Gamma); the two components are stored independently."""

    interior: np.ndarray
    boundary: np.ndarray
    coupled: bool = False

    def __post_init__(self):
        self.interior = np.asarray(self.interior, dtype=float)
        self.boundary = np.asarray(self.boundary, dtype=float)

    @classmethod
    def from_nodal(cls, u, mesh: Mesh) -> "ProductVector":
        u = np.asarray(u, dtype=float)
        if u.shape != (mesh.n_nodes,):
            raise ShapeMismatchError(f"expected {mesh.n_nodes} nodal values, got {u.shape}")
        return cls(u.copy(), mesh.trace(u).copy(), coupled=True)

    @classmethod
    def from_parts(cls, interior, boundary, mesh: Mesh, coupled: bool | None = None) -> "ProductVector":
        v = cls(interior, boundary)
        v.check_shape(mesh)
        is_trace = bool(np.allclose(mesh.trace(v.interior), v.boundary, rtol=0.0,
                                    atol=COUPLING_TOL * max(1.0, np.abs(v.interior).max(initial=0.0))))
        if coupled and not is_trace:
            raise UncoupledVectorError("boundary component is not the trace of the interior component")
        v.coupled = is_trace if coupled is None else bool(coupled)
        return v

    @classmethod
    def constant(cls, value: float, mesh: Mesh) -> "ProductVector":
        return cls(np.full(mesh.n_nodes, float(value)), np.full(mesh.n_boundary, float(value)), True)

    @classmethod
    def zeros(cls, mesh: Mesh) -> "ProductVector":
        return cls.constant(0.0, mesh)

    def check_shape(self, mesh: Mesh):
        if self.interior.shape != (mesh.n_nodes,) or self.boundary.shape != (mesh.n_boundary,):
            raise ShapeMismatchError(
                f"product vector shapes {self.interior.shape}/{self.boundary.shape} do not match "
                f"mesh ({mesh.n_nodes}, {mesh.n_boundary})")

    def require_coupled(self, mesh: Mesh):
        self.check_shape(mesh)
        scale = max(1.0, float(np.abs(self.interior).max(initial=0.0)))
        if not np.allclose(mesh.trace(self.interior), self.boundary, rtol=0.0, atol=COUPLING_TOL * scale):
            raise UncoupledVectorError("operation needs a coupled vector (u_Gamma = tr u_Omega)")

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.interior, self.boundary])

    def copy(self) -> "ProductVector":
        return ProductVector(self.interior.copy(), self.boundary.copy(), self.coupled)

    def __add__(self, other):
        return ProductVector(self.interior + other.interior, self.boundary + other.boundary,
                             self.coupled and other.coupled)

    def __sub__(self, other):
        return ProductVector(self.interior - other.interior, self.boundary - other.boundary,
                             self.coupled and other.coupled)

    def __mul__(self, scalar):
        return ProductVector(self.interior * scalar, self.boundary * scalar, self.coupled)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


def _check_pair(U: ProductVector, V: ProductVector, mesh: Mesh):
    U.check_shape(mesh)
    V.check_shape(mesh)


def x2_inner_product(U: ProductVector, V: ProductVector, mesh: Mesh) -> float:
    """<U, V> = sum w u v (interior) + sum dS u v / b (boundary)."""
    _check_pair(U, V, mesh)
    return float(np.dot(mesh.weights * U.interior, V.interior)
                 + np.dot(mesh.boundary_mass * U.boundary, V.boundary))


def x2_norm(U: ProductVector, mesh: Mesh) -> float:
    return float(np.sqrt(x2_inner_product(U, U, mesh)))


def integrate_mu(F: ProductVector, mesh: Mesh) -> float:
    """int F dmu = int f dx + int g dS/b."""
    F.check_shape(mesh)
    return float(np.dot(mesh.weights, F.interior) + np.dot(mesh.boundary_mass, F.boundary))


def average_mu(F: ProductVector, mesh: Mesh) -> float:
    return integrate_mu(F, mesh) / mesh.measure.total


def load_vector(mesh: Mesh, f=0.0, g=0.0) -> ProductVector:
    """Sample F = (f on the grid, g on the boundary nodes); f, g follow the boundary-function rules."""
    x, y = mesh.x(), mesh.y()
    interior = _sample_nodal(f, x, y, mesh)
    pts = mesh.boundary_coords
    boundary, _ = _sample_boundary(g, pts, mesh.boundary_arclength, "g")
    return ProductVector.from_parts(interior, boundary, mesh)


def _sample_nodal(fn, x, y, mesh):
    n = x.size
    if isinstance(fn, (int, float)) and not isinstance(fn, bool):
        return np.full(n, float(fn))
    if isinstance(fn, (str, Expression)):
        return compile_expression(fn)(x, y, np.zeros(n))
    if callable(fn):
        return np.broadcast_to(np.asarray(fn(x, y, np.zeros(n)), dtype=float), (n,)).copy()
    values = np.asarray(fn, dtype=float)
    if values.shape != (n,):
        raise ShapeMismatchError(f"expected {n} nodal samples, got {values.shape}")
    return values
