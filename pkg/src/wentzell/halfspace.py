"""Constant-coefficient half-space problem, one tangential frequency at a time.

After a Fourier transform in the tangential variables the problem on z >= 0 is

    u'' - k^2 u = f,   k = sqrt(|zeta|^2 + lambda),
    -b u'(0) + (c + lambda + q b |zeta|^2) u(0) = g,

where -d/dz is the outward normal derivative. Bounded solutions are
u = u_p + C exp(-k z) with the decaying Green kernel -exp(-k|z - s|)/(2k), and
C p = g + b u_p'(0) - (c + lambda + q b |zeta|^2) u_p(0) with the boundary symbol

    p(zeta) = c + lambda + q b |zeta|^2 + b k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.signal import lfilter

ArrayOrCallable = Union[Callable, np.ndarray, float, None]


@dataclass(frozen=True)
class FrequencyProblem:
    zeta: float
    lam: float
    b: float = 1.0
    c: float = 0.0
    q: float = 0.0
    f_hat: ArrayOrCallable = None  # callable of z, samples on the grid, or None for zero
    g_hat: float = 0.0
    z_max: Optional[float] = None
    n_points: Optional[int] = None

    def __post_init__(self):
        if self.zeta < 0:
            raise ValueError("|zeta| must be nonnegative")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not self.b > 0 or self.c < 0 or self.q < 0:
            raise ValueError("need b > 0, c >= 0, q >= 0")

    @property
    def k(self) -> float:
        return math.sqrt(self.zeta ** 2 + self.lam)

    @property
    def decay_exponent(self) -> float:
        return -self.k

    @property
    def tangential(self) -> float:
        """Zeroth-order boundary coefficient c + lambda + q b |zeta|^2."""
        return self.c + self.lam + self.q * self.b * self.zeta ** 2

    def grid(self) -> np.ndarray:
        z_max = self.z_max if self.z_max is not None else 10.0 / math.sqrt(self.lam)
        n = self.n_points or max(2000, int(math.ceil(self.k * z_max / 0.05)) + 1)
        return np.linspace(0.0, z_max, n)

    def sample_f(self, z: np.ndarray) -> np.ndarray:
        if self.f_hat is None:
            return np.zeros_like(z)
        if callable(self.f_hat):
            return np.broadcast_to(np.asarray(self.f_hat(z), dtype=float), z.shape).copy()
        f = np.asarray(self.f_hat, dtype=float)
        if f.ndim == 0:
            return np.full_like(z, float(f))
        if f.shape != z.shape:
            raise ValueError(f"f_hat has {f.shape} samples, grid has {z.shape}")
        return f

    def scaled(self, factor: float) -> "FrequencyProblem":
        f = self.f_hat
        if f is not None:
            f = (lambda z, _f=f: factor * np.asarray(_f(z))) if callable(f) else factor * np.asarray(f)
        return FrequencyProblem(self.zeta, self.lam, self.b, self.c, self.q, f, factor * self.g_hat,
                                self.z_max, self.n_points)


def boundary_symbol(fp: FrequencyProblem) -> float:
    return fp.tangential + fp.b * fp.k


@dataclass(frozen=True, eq=False)
class FrequencySolution:
    problem: FrequencyProblem
    z: np.ndarray
    u: np.ndarray
    du: np.ndarray
    f: np.ndarray
    C: float
    p: float

    @property
    def h(self) -> float:
        return float(self.z[1] - self.z[0])

    def second_derivative(self) -> np.ndarray:
        """Central second differences (one-sided at the ends)."""
        h = self.h
        u = self.u
        d2 = np.empty_like(u)
        d2[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h ** 2
        d2[0] = (2 * u[0] - 5 * u[1] + 4 * u[2] - u[3]) / h ** 2
        d2[-1] = (2 * u[-1] - 5 * u[-2] + 4 * u[-3] - u[-4]) / h ** 2
        return d2

    def ode_residual(self) -> np.ndarray:
        """u'' - k^2 u - f at interior grid points (second differences)."""
        k = self.problem.k
        return self.second_derivative()[1:-1] - k * k * self.u[1:-1] - self.f[1:-1]

    def boundary_residual(self) -> float:
        fp = self.problem
        return float(-fp.b * self.du[0] + fp.tangential * self.u[0] - fp.g_hat)

    def growing_mode(self) -> float:
        """Least-squares coefficient of the growing mode, scaled to its size at z_max, relative to max|u|."""
        fp = self.problem
        k = fp.k
        z = self.z
        hom = self.u - particular_solution(fp, z, self.f)[0]
        basis = np.column_stack([np.exp(-k * z), np.exp(k * (z - z[-1]))])
        coef = np.linalg.lstsq(basis, hom, rcond=None)[0]
        return float(abs(coef[1]) / max(np.abs(self.u).max(), 1e-300))

    def tail(self) -> float:
        return float(abs(self.u[-1]) / max(np.abs(self.u).max(), 1e-300))


def _segment_weights(k: float, h: float):
    """Exact weights of int_0^h exp(-k (h - t)) f(t) dt for f linear on the segment."""
    kappa = k * h
    one_minus = -math.expm1(-kappa)
    w_near = 1.0 / k - one_minus / (k * kappa)  # weight of the endpoint nearest the exponential peak
    w_far = one_minus / k - w_near
    return w_far, w_near


def particular_solution(fp: FrequencyProblem, z: np.ndarray, f: np.ndarray):
    """u_p = -(1/2k) int exp(-k|z - s|) f(s) ds over the grid, with its exact derivative."""
    k = fp.k
    h = float(z[1] - z[0])
    decay = math.exp(-k * h)
    w_far, w_near = _segment_weights(k, h)
    # A_i = int_0^{z_i} exp(-k (z_i - s)) f ds,  B_i = int_{z_i}^{z_max} exp(-k (s - z_i)) f ds
    seg_fwd = np.concatenate([[0.0], w_far * f[:-1] + w_near * f[1:]])
    A = lfilter([1.0], [1.0, -decay], seg_fwd)
    seg_bwd = np.concatenate([[0.0], (w_far * f[1:] + w_near * f[:-1])[::-1]])
    B = lfilter([1.0], [1.0, -decay], seg_bwd)[::-1]
    up = -(A + B) / (2.0 * k)
    dup = (A - B) / 2.0
    return up, dup


def solve_frequency(fp: FrequencyProblem) -> FrequencySolution:
    z = fp.grid()
    f = fp.sample_f(z)
    p = boundary_symbol(fp)
    if not p > 0:
        raise ValueError(f"boundary symbol {p:g} is not positive")
    up, dup = particular_solution(fp, z, f)
    k = fp.k
    C = (fp.g_hat + fp.b * dup[0] - fp.tangential * up[0]) / p
    e = np.exp(-k * z)
    return FrequencySolution(fp, z, up + C * e, dup - k * C * e, f, float(C), float(p))


def _l2(z: np.ndarray, v: np.ndarray) -> float:
    return float(math.sqrt(trapezoid(v * v, z)))


@dataclass(frozen=True)
class NormRatio:
    zeta: float
    solution_norm: float
    data_norm: float
    ratio: float  # data_norm / solution_norm


def norm_ratio(sol: FrequencySolution) -> NormRatio:
    """Ratio of the data norm to the H2-type solution norm at one frequency."""
    fp = sol.problem
    z = sol.z
    un = _l2(z, sol.u)
    s_norm = un + fp.zeta ** 2 * un + _l2(z, sol.second_derivative())
    if fp.q > 0:
        s_norm += (1.0 + fp.zeta ** 2) * abs(sol.u[0])
    d_norm = math.sqrt(_l2(z, sol.f) ** 2 + fp.g_hat ** 2 / fp.b)
    ratio = d_norm / s_norm if s_norm > 0 else math.nan
    return NormRatio(fp.zeta, s_norm, d_norm, ratio)


@dataclass(frozen=True)
class ConstantEstimate:
    C_low: float  # min data/solution ratio
    C_high: float  # max data/solution ratio
    ratios: list = field(default_factory=list)

    @property
    def spread(self) -> float:
        return self.C_high / self.C_low


def estimate_constants(sweep) -> ConstantEstimate:
    """Empirical two-sided constants of the data/solution norm equivalence over a sweep."""
    sweep = list(sweep)
    if not sweep:
        raise ValueError("empty sweep")
    lams = {fp.lam for fp in sweep}
    if len(lams) != 1:
        raise ValueError("all frequencies in a sweep must share lambda")
    ratios = [norm_ratio(solve_frequency(fp)) for fp in sweep]
    vals = np.array([r.ratio for r in ratios])
    return ConstantEstimate(float(vals.min()), float(vals.max()), ratios)


def zeta_range(spec: str) -> np.ndarray:
    """Parse ``start:stop:count`` into a linspace."""
    try:
        start, stop, count = spec.split(":")
        return np.linspace(float(start), float(stop), int(count))
    except ValueError:
        raise ValueError(f"expected start:stop:count, got {spec!r}") from None
