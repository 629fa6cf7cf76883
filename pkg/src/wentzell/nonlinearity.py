"""Admissible nonlinearities: continuous, nondecreasing, alpha(0) = 0.

Each family provides alpha, its primitive L(t) = int_0^t alpha, the Young
function Lambda(t) = max(L(t), L(-t)) and the range (alpha(-inf), alpha(+inf)).
The complementary function is obtained as the Legendre transform of Lambda on
a grid, so the (possibly multivalued) inverse of alpha is never formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import Delta2Error, NonlinearityError

INF = math.inf
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class RangeInterval:
    """An interval of extended reals with per-endpoint attainment flags."""

    lower: float
    upper: float
    lower_attained: bool = False
    upper_attained: bool = False

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ValueError(f"empty interval [{self.lower}, {self.upper}]")
        # infinite endpoints are never attained
        if math.isinf(self.lower) and self.lower_attained:
            object.__setattr__(self, "lower_attained", False)
        if math.isinf(self.upper) and self.upper_attained:
            object.__setattr__(self, "upper_attained", False)

    @property
    def is_open(self) -> bool:
        return not (self.lower_attained or self.upper_attained)

    @property
    def is_degenerate(self) -> bool:
        return self.lower == self.upper

    def scale(self) -> float:
        """A magnitude used to size float margins around the endpoints."""
        finite = [abs(v) for v in (self.lower, self.upper) if math.isfinite(v)]
        return max([1.0] + finite)

    def contains(self, t: float) -> bool:
        lo_ok = t > self.lower or (self.lower_attained and t == self.lower)
        hi_ok = t < self.upper or (self.upper_attained and t == self.upper)
        return lo_ok and hi_ok

    def closure_contains(self, t: float, margin: float = 0.0) -> bool:
        return self.lower - margin <= t <= self.upper + margin

    def interior_contains(self, t: float, margin: float = 0.0) -> bool:
        return self.lower + margin < t < self.upper - margin

    def scaled(self, factor: float) -> "RangeInterval":
        if factor < 0:
            raise ValueError("scale factor must be nonnegative")
        if factor == 0:
            return RangeInterval(0.0, 0.0, True, True)
        return RangeInterval(self.lower * factor, self.upper * factor,
                             self.lower_attained, self.upper_attained)

    def to_dict(self) -> dict:
        return {"lower": _json_float(self.lower), "upper": _json_float(self.upper),
                "lower_attained": self.lower_attained, "upper_attained": self.upper_attained}

    def __str__(self):
        left = "[" if self.lower_attained else "("
        right = "]" if self.upper_attained else ")"
        return f"{left}{self.lower:.12g}, {self.upper:.12g}{right}"


def _json_float(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


class Nonlinearity:
    """Base class; subclasses implement ``alpha`` and ``primitive``."""

    family = "abstract"
    #: Newton needs alpha'; families without a usable derivative set this False
    smooth = True

    def alpha(self, s):
        raise NotImplementedError

    def dalpha(self, s):
        raise NotImplementedError

    def primitive(self, t):
        raise NotImplementedError

    def __call__(self, s):
        return self.alpha(s)

    def young(self, t):
        t = np.asarray(t, dtype=float)
        return np.maximum(self.primitive(t), self.primitive(-t))

    def conjugate(self, s):
        """Legendre transform of Lambda: sup_{tau >= 0} (|s| tau - Lambda(tau))."""
        return legendre_conjugate(self.young, s)

    def range(self) -> RangeInterval:
        return _numeric_range(self.alpha)

    def is_zero(self) -> bool:
        return False

    def params(self) -> dict:
        return {}

    def to_config(self) -> dict:
        return {"family": self.family, **self.params()}

    def audit(self):
        """Check alpha(0) = 0, monotonicity and L >= 0 on a sample grid."""
        a0 = float(self.alpha(np.array([0.0]))[0])
        if abs(a0) > 1e-14:
            raise NonlinearityError(f"{self.family}: alpha(0) = {a0:g}, expected 0")
        pos = np.concatenate([np.linspace(0.0, 10.0, 401)[1:], np.geomspace(10.0, 1e3, 100)[1:]])
        grid = np.concatenate([-pos[::-1], [0.0], pos])
        with np.errstate(over="ignore", invalid="ignore"):
            values = self.alpha(grid)
        finite = np.isfinite(values)
        if np.any(np.diff(values[finite]) < -1e-12 * (1.0 + np.abs(values[finite][1:]))):
            raise NonlinearityError(f"{self.family}: alpha is not nondecreasing on the sample grid")
        small = grid[np.abs(grid) <= 10.0]
        L = self.primitive(small)
        if np.any(L < -1e-12):
            raise NonlinearityError(f"{self.family}: primitive L takes negative values")

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({inner})"


class ZeroNonlinearity(Nonlinearity):
    family = "zero"

    def alpha(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    def dalpha(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    def primitive(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def range(self):
        return RangeInterval(0.0, 0.0, True, True)

    def is_zero(self):
        return True


class PowerNonlinearity(Nonlinearity):
    """alpha(s) = r |s|^(p-1) s."""

    family = "power"

    def __init__(self, r: float = 1.0, p: float = 1.0):
        if not (r > 0 and p > 0):
            raise NonlinearityError("power family needs r > 0 and p > 0")
        self.r = float(r)
        self.p = float(p)
        self.smooth = self.p >= 1.0

    def alpha(self, s):
        s = np.asarray(s, dtype=float)
        return self.r * np.sign(s) * np.abs(s) ** self.p

    def dalpha(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return self.r * self.p * np.abs(s) ** (self.p - 1.0)

    def primitive(self, t):
        t = np.asarray(t, dtype=float)
        return self.r / (self.p + 1.0) * np.abs(t) ** (self.p + 1.0)

    def range(self):
        return RangeInterval(-INF, INF)

    def params(self):
        return {"r": self.r, "p": self.p}


class ArctanNonlinearity(Nonlinearity):
    family = "arctan"

    def alpha(self, s):
        return np.arctan(np.asarray(s, dtype=float))

    def dalpha(self, s):
        s = np.asarray(s, dtype=float)
        return 1.0 / (1.0 + s * s)

    def primitive(self, t):
        t = np.asarray(t, dtype=float)
        return t * np.arctan(t) - 0.5 * np.log1p(t * t)

    def range(self):
        return RangeInterval(-math.pi / 2, math.pi / 2)


class TableNonlinearity(Nonlinearity):
    """Piecewise-linear alpha through a sample table, extended linearly past its ends."""

    family = "table"
    smooth = False

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise NonlinearityError("table needs at least two (s, alpha) points")
        order = np.argsort(pts[:, 0], kind="stable")
        pts = pts[order]
        if np.any(np.diff(pts[:, 0]) <= 0):
            raise NonlinearityError("table abscissae must be distinct")
        if np.any(np.diff(pts[:, 1]) < 0):
            raise NonlinearityError("table values must be nondecreasing")
        if not pts[0, 0] <= 0.0 <= pts[-1, 0]:
            raise NonlinearityError("table must bracket s = 0")
        if abs(np.interp(0.0, pts[:, 0], pts[:, 1])) > 1e-14:
            raise NonlinearityError("table must pass through (0, 0)")
        if 0.0 not in pts[:, 0]:
            k = np.searchsorted(pts[:, 0], 0.0)
            pts = np.insert(pts, k, [0.0, 0.0], axis=0)
        self.points = pts
        self._s = pts[:, 0]
        self._a = pts[:, 1]
        self._slope = np.diff(self._a) / np.diff(self._s)
        self._left_slope = self._slope[0]
        self._right_slope = self._slope[-1]
        # exact integral of the piecewise-linear alpha at the knots, anchored at s = 0
        seg = 0.5 * (self._a[1:] + self._a[:-1]) * np.diff(self._s)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        self._L = cum - cum[np.flatnonzero(self._s == 0.0)[0]]

    def alpha(self, s):
        s = np.asarray(s, dtype=float)
        out = np.interp(s, self._s, self._a)
        lo, hi = s < self._s[0], s > self._s[-1]
        out = np.where(lo, self._a[0] + self._left_slope * (s - self._s[0]), out)
        return np.where(hi, self._a[-1] + self._right_slope * (s - self._s[-1]), out)

    def dalpha(self, s):
        s = np.asarray(s, dtype=float)
        k = np.clip(np.searchsorted(self._s, s, side="right") - 1, 0, len(self._slope) - 1)
        return self._slope[k]

    def primitive(self, t):
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(self._s, t, side="right") - 1, 0, len(self._slope) - 1)
        d = t - self._s[k]
        return self._L[k] + self._a[k] * d + 0.5 * self._slope[k] * d * d

    def range(self):
        lower_flat = self._left_slope == 0.0
        upper_flat = self._right_slope == 0.0
        return RangeInterval(float(self._a[0]) if lower_flat else -INF,
                             float(self._a[-1]) if upper_flat else INF,
                             lower_flat, upper_flat)

    def is_zero(self):
        return bool(np.all(self._a == 0.0))

    def params(self):
        return {"points": [[float(s), float(a)] for s, a in self.points]}


class CustomNonlinearity(Nonlinearity):
    """User-supplied alpha (and optionally its primitive and derivative)."""

    family = "custom"

    def __init__(self, alpha: Callable, primitive: Optional[Callable] = None,
                 dalpha: Optional[Callable] = None, name: str = "custom"):
        self._alpha = alpha
        self._primitive = primitive
        self._dalpha = dalpha
        self.name = name
        self.smooth = dalpha is not None

    def alpha(self, s):
        return np.asarray(self._alpha(np.asarray(s, dtype=float)), dtype=float)

    def dalpha(self, s):
        if self._dalpha is None:
            raise NotImplementedError("no derivative supplied")
        return np.asarray(self._dalpha(np.asarray(s, dtype=float)), dtype=float)

    def primitive(self, t):
        if self._primitive is not None:
            return np.asarray(self._primitive(np.asarray(t, dtype=float)), dtype=float)
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        out = np.array([integrate.quad(lambda s: float(self._alpha(np.array(s))), 0.0, v)[0]
                        for v in flat])
        return out.reshape(t.shape)

    def params(self):
        return {"name": self.name}


FAMILIES = {
    "zero": ZeroNonlinearity,
    "power": PowerNonlinearity,
    "arctan": ArctanNonlinearity,
    "table": TableNonlinearity,
    "custom": CustomNonlinearity,
}


def make_nonlinearity(family: str, **params) -> Nonlinearity:
    """Build and audit a nonlinearity, e.g. ``make_nonlinearity("power", r=1, p=2)``."""
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise NonlinearityError(f"unknown family {family!r}") from None
    obj = cls(**params)
    obj.audit()
    return obj


def nonlinearity_from_config(spec) -> Nonlinearity:
    if isinstance(spec, Nonlinearity):
        return spec
    if isinstance(spec, str):
        spec = {"family": spec}
    spec = dict(spec)
    family = spec.pop("family", None)
    if family == "custom":
        raise NonlinearityError("custom callables cannot be read from a config; use a table")
    return make_nonlinearity(family, **spec)


def _numeric_range(alpha: Callable, tol: float = 1e-10) -> RangeInterval:
    """Estimate alpha(-inf), alpha(+inf) by evaluating at +-T for growing T."""
    ends = []
    attained = []
    for sign in (-1.0, 1.0):
        T = 10.0
        prev = float(alpha(np.array([sign * T]))[0])
        limit, flat = None, False
        while T < 1e15:
            T *= 10.0
            with np.errstate(over="ignore", invalid="ignore"):
                cur = float(alpha(np.array([sign * T]))[0])
            if not math.isfinite(cur):
                limit = sign * INF
                break
            if cur == prev:
                limit, flat = cur, True
                break
            if abs(cur - prev) <= tol * max(1.0, abs(cur)):
                limit = cur
                break
            prev = cur
        if limit is None:
            limit = sign * INF
        ends.append(limit)
        attained.append(flat)
    return RangeInterval(ends[0], ends[1], attained[0], attained[1])


def range_of(alpha: Nonlinearity) -> RangeInterval:
    return alpha.range()


def minkowski_combine(I1: RangeInterval, l1: float, I2: RangeInterval, l2: float) -> RangeInterval:
    """l1*I1 + l2*I2 with extended-real endpoints and attainment bookkeeping."""
    if l1 < 0 or l2 < 0:
        raise ValueError("weights must be nonnegative")
    A, B = I1.scaled(l1), I2.scaled(l2)
    lo = A.lower + B.lower
    hi = A.upper + B.upper
    if math.isnan(lo) or math.isnan(hi):
        raise ValueError("indeterminate inf - inf in interval sum")
    return RangeInterval(lo, hi, A.lower_attained and B.lower_attained,
                         A.upper_attained and B.upper_attained)


def legendre_conjugate(young: Callable, s, tau_max: float = 1e3, cap: float = 1e15,
                       n_grid: int = 600, iterations: int = 90):
    """sup_{tau >= 0} (|s| tau - young(tau)) for a convex, even young function.

    Grid maximization brackets the maximizer (the objective is concave), then a
    vectorized golden-section search refines it. Returns inf when the supremum
    escapes every grid up to ``cap``.
    """
    s_arr = np.abs(np.atleast_1d(np.asarray(s, dtype=float))).ravel()
    out = np.empty_like(s_arr)
    pending = np.arange(s_arr.size)
    upper = tau_max
    lo_b = np.zeros(s_arr.size)
    hi_b = np.zeros(s_arr.size)
    while pending.size:
        grid = np.concatenate([[0.0], np.geomspace(1e-9, upper, n_grid)])
        with np.errstate(over="ignore", invalid="ignore"):
            lam = young(grid)
        phi = s_arr[pending, None] * grid[None, :] - lam[None, :]
        phi = np.where(np.isfinite(phi), phi, -INF)
        k = np.argmax(phi, axis=1)
        at_end = k == grid.size - 1
        done = pending[~at_end]
        kd = k[~at_end]
        lo_b[done] = grid[np.maximum(kd - 1, 0)]
        hi_b[done] = grid[kd + 1]
        pending = pending[at_end]
        if pending.size and upper >= cap:
            out[pending] = INF
            lo_b[pending] = hi_b[pending] = np.nan
            break
        upper *= 100.0

    idx = np.flatnonzero(np.isfinite(lo_b))
    if idx.size:
        sv = s_arr[idx]
        a, b = lo_b[idx].copy(), hi_b[idx].copy()

        def phi_of(t):
            return sv * t - young(t)

        x1 = b - _GOLDEN * (b - a)
        x2 = a + _GOLDEN * (b - a)
        f1, f2 = phi_of(x1), phi_of(x2)
        for _ in range(iterations):
            left = f1 >= f2
            b = np.where(left, x2, b)
            a = np.where(left, a, x1)
            nx1 = b - _GOLDEN * (b - a)
            nx2 = a + _GOLDEN * (b - a)
            x1, x2 = np.where(left, nx1, x2), np.where(left, x1, nx2)
            f1n = phi_of(x1)
            f2n = phi_of(x2)
            f1, f2 = f1n, f2n
        best = np.maximum(np.maximum(f1, f2), np.maximum(phi_of(a), phi_of(b)))
        out[idx] = np.maximum(best, 0.0)
    return out.reshape(np.shape(s)) if np.ndim(s) else float(out[0])


def young_gap(alpha: Nonlinearity, s, t):
    """Lambda(t) + Lambda~(s) - |s t|; nonnegative, zero when s = alpha(t)."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    s_b, t_b = np.broadcast_arrays(s, t)
    conj = np.asarray(alpha.conjugate(s_b.ravel())).reshape(s_b.shape)
    with np.errstate(invalid="ignore"):
        gap = alpha.young(t_b) + conj - np.abs(s_b * t_b)
    return float(gap) if gap.ndim == 0 else gap


@dataclass(frozen=True)
class Delta2Result:
    passes: bool
    constant: float  # C with Lambda(2t) <= C Lambda(t) past t0
    t0: float
    sampled_constant: float  # max sampled ratio on the window
    witness: Optional[float] = None  # first violating t when failing
    analytic: bool = False


def delta2_check(alpha: Nonlinearity, t_max: float = 1e3, samples: int = 64) -> Delta2Result:
    """Sampled Delta_2-near-infinity test: is Lambda(2t)/Lambda(t) bounded on [1, t_max]?

    A sufficient heuristic, not a proof: the check fails when a ratio overflows
    or the ratio increases monotonically by more than 10% across the top decade.
    Power and zero families are classified analytically.
    """
    if not t_max > 1:
        raise ValueError("t_max must exceed 1")
    if samples < 16:
        raise ValueError("need at least 16 samples")
    if alpha.is_zero():
        return Delta2Result(True, 1.0, 1.0, 1.0, analytic=True)

    t = np.geomspace(1.0, t_max, samples)
    with np.errstate(over="ignore", invalid="ignore"):
        lam_t = alpha.young(t)
        lam_2t = alpha.young(2.0 * t)
    positive = lam_t > 0
    if not np.any(positive):
        raise Delta2Error("Lambda vanishes on the whole sample window; raise t_max")
    first = int(np.argmax(positive))
    t, lam_t, lam_2t = t[first:], lam_t[first:], lam_2t[first:]
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        ratio = lam_2t / lam_t
    t0 = float(t[0])

    if isinstance(alpha, PowerNonlinearity):
        sampled = float(np.max(ratio))
        return Delta2Result(True, 2.0 ** (alpha.p + 1.0), t0, sampled, analytic=True)

    bad = ~np.isfinite(ratio)
    if np.any(bad):
        k = int(np.argmax(bad))
        return Delta2Result(False, INF, t0, INF, witness=float(t[k]))
    top = t >= t[-1] / 10.0
    r_top = ratio[top]
    rising = np.all(np.diff(r_top) >= -1e-12 * r_top[1:])
    if rising and r_top[-1] > 1.1 * r_top[0]:
        k = int(np.argmax(ratio > 1.1 * r_top[0]))
        return Delta2Result(False, INF, t0, float(np.max(ratio)), witness=float(t[k]))
    c = float(np.max(ratio))
    return Delta2Result(True, c, t0, c)


@dataclass(frozen=True)
class GrowthResult:
    condition: str  # "GC1", "GC2" or "none"
    fitted_exponent: float
    admissible_exponent: float
    passes: bool


def admissible_exponent(N: int, q: float = 0.0) -> float:
    """Largest power r in |alpha(s)| <= C(1 + |s|^r) allowed for dimension N."""
    if N < 1:
        raise ValueError("dimension must be >= 1")
    if N <= 2:
        return INF
    if q > 0:
        return (N - 1) / (N - 2)
    return N / (N - 2)


def growth_check(alpha: Nonlinearity, N: int, q: float = 0.0) -> GrowthResult:
    """Fit the growth exponent of alpha on [10, 1e4] and compare with the admissible one."""
    s = np.geomspace(10.0, 1e4, 64)
    with np.errstate(over="ignore", invalid="ignore"):
        mag = np.maximum(np.abs(alpha.alpha(s)), np.abs(alpha.alpha(-s)))
    label = "GC2" if (q > 0 and N >= 3) else "GC1"
    r_adm = admissible_exponent(N, q)
    if N == 1:
        fitted = _fit_exponent(s, mag)
        return GrowthResult(label, fitted, INF, True)
    if not np.all(np.isfinite(mag)):
        return GrowthResult("none", INF, r_adm, False)
    fitted = _fit_exponent(s, mag)
    ok = fitted <= r_adm + 1e-6
    return GrowthResult(label if ok else "none", fitted, r_adm, bool(ok))


def _fit_exponent(s, mag) -> float:
    if not np.all(np.isfinite(mag)):
        return INF
    if np.all(mag == 0):
        return 0.0
    slope = np.polyfit(np.log(s), np.log(np.maximum(mag, 1e-300)), 1)[0]
    return float(max(slope, 0.0))
