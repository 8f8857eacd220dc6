"""Two-parameter Volterra kernels, their grid discretizations, and kernel algebra.

A kernel is a positive function K(t, s) on the simplex 0 <= s < t, possibly
blowing up at the diagonal s -> t (and, for the fractional-Brownian family,
at the edge s -> 0).  Grid discretizations carry *cell-averaged* weights

    w[i, j] = (1/dt) * integral of K(t_i, s) over [t_j, t_{j+1}],   j < i,

which stay finite for integrable singularities and make the left-point
quadrature rule first-order accurate.  Convolution, the resolvent (both as a
truncated iterated-convolution series and as a triangular solve of
R = K + K*R), the Volterra Gronwall construction, and a numerical
Hoelder-regularity probe all operate on these weights.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn
from scipy.special import hyp2f1

from .errors import (
    GridMismatchError,
    KernelDomainError,
    NonIntegrableError,
    SeriesDivergenceError,
    SingularityError,
)
from .grids import TimeGrid

_GL_NODES = 12
_GL_EDGE_NODES = 24


def _gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    # map from [-1, 1] to [0, 1]
    return 0.5 * (x + 1.0), 0.5 * w


_GL_X, _GL_W = _gauss_legendre(_GL_NODES)
_GLE_X, _GLE_W = _gauss_legendre(_GL_EDGE_NODES)


def fbm_normalizer(hurst: float) -> float:
    """The constant making the fractional kernel reproduce unit-variance increments."""
    return math.sqrt(
        2.0 * hurst * gamma_fn(1.5 - hurst)
        / (gamma_fn(hurst + 0.5) * gamma_fn(2.0 - 2.0 * hurst))
    )


class Kernel:
    """Base class for kernels on the simplex.

    Subclasses implement a vectorized ``__call__(t, s)``, exact or
    quadrature-backed subinterval integrals, and cell-averaged grid weights.
    """

    family = "abstract"
    singular_at_diagonal = False
    holder_exponent_hint: float | None = None
    # algebraic edge exponents used by singularity-aware quadrature:
    # K(t, s) ~ s^edge_exponent_origin as s -> 0,
    # K(t, s) ~ (t-s)^edge_exponent_diagonal as s -> t.
    edge_exponent_origin = 0.0
    edge_exponent_diagonal = 0.0

    def __call__(self, t, s):
        raise NotImplementedError

    def integrate(self, t: float, a: float, b: float, power: int = 1) -> float:
        """integral of K(t, s)^power ds over [a, b], 0 <= a <= b <= t."""
        _check_integral_bounds(t, a, b)
        if a == b:
            return 0.0
        return self._integrate_impl(t, a, b, power)

    def _integrate_impl(self, t, a, b, power):
        exp_lo = power * self.edge_exponent_origin if a == 0.0 else 0.0
        exp_hi = power * self.edge_exponent_diagonal if b == t else 0.0
        return _quad_power_edges(
            lambda s: float(self(t, s)) ** power, a, b, exp_lo, exp_hi
        )

    def average_weights(self, grid: TimeGrid) -> np.ndarray:
        """Cell-averaged weight matrix of shape (n+1, n); zero for j >= i."""
        n = grid.n_steps
        dt = grid.dt
        times = grid.times
        w = np.zeros((n + 1, n))
        for i in range(1, n + 1):
            for j in range(i):
                w[i, j] = self.integrate(times[i], times[j], times[j + 1]) / dt
        return w


@dataclass(frozen=True)
class ConstantKernel(Kernel):
    value: float = 1.0
    family = "constant"

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError("constant kernel value must be finite")

    def __call__(self, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(np.float64(self.value), np.broadcast_shapes(t.shape, s.shape)).copy()

    def _integrate_impl(self, t, a, b, power):
        return self.value**power * (b - a)

    def average_weights(self, grid):
        n = grid.n_steps
        w = np.full((n + 1, n), float(self.value))
        return _mask_strict_lower(w)


@dataclass(frozen=True)
class PowerKernel(Kernel):
    """K(t, s) = scale * (t - s)^(hurst - 1/2)."""

    hurst: float
    scale: float = 1.0
    family = "power"

    def __post_init__(self):
        if not np.isfinite(self.hurst):
            raise ValueError("power kernel exponent parameter must be finite")
        if self.scale <= 0:
            raise ValueError("power kernel scale must be positive")

    @property
    def _a(self):
        return self.hurst - 0.5

    @property
    def singular_at_diagonal(self):
        return self.hurst < 0.5

    @property
    def holder_exponent_hint(self):
        return self.hurst

    @property
    def edge_exponent_diagonal(self):
        return min(self._a, 0.0)

    def __call__(self, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        return self.scale * (t - s) ** self._a

    def _integrate_impl(self, t, a, b, power):
        q = power * self._a + 1.0
        if q <= 0.0 and b == t:
            raise NonIntegrableError(
                f"power kernel with exponent {self._a} is not {power}-integrable at the diagonal"
            )
        if q == 0.0:
            return self.scale**power * (math.log(t - a) - math.log(t - b))
        return self.scale**power * ((t - a) ** q - (t - b) ** q) / q

    def average_weights(self, grid):
        n = grid.n_steps
        dt = grid.dt
        q = self._a + 1.0
        if q <= 0.0:
            raise NonIntegrableError("power kernel is not integrable at the diagonal")
        r = np.arange(n + 1, dtype=float)
        # antiderivative differences over whole cells, one value per lag r = i - j
        lag = self.scale * dt**self._a * (r[1:] ** q - r[:-1] ** q) / q
        return _toeplitz_strict_lower(lag, n)


@dataclass(frozen=True)
class FbmKernel(Kernel):
    """The Volterra representation kernel of fractional Brownian motion.

    K(t, s) = c_H (t-s)^(H-1/2)
              + c_H (1/2 - H) * int_s^t (u-s)^(H-3/2) (1 - (s/u)^(1/2-H)) du,

    which also equals c_H (t-s)^(H-1/2) 2F1(1/2-H, H-1/2; H+1/2; -(t-s)/s).
    The hypergeometric form is used for vectorized evaluation; the integral
    form backs the reference evaluator in :func:`eval_kernel`.
    """

    hurst: float
    family = "fbm"

    def __post_init__(self):
        if not (0.0 < self.hurst < 1.0):
            raise ValueError("fbm kernel needs Hurst index in (0, 1)")

    @property
    def _a(self):
        return self.hurst - 0.5

    @property
    def normalizer(self):
        return fbm_normalizer(self.hurst)

    @property
    def singular_at_diagonal(self):
        return self.hurst < 0.5

    @property
    def holder_exponent_hint(self):
        return self.hurst

    @property
    def edge_exponent_origin(self):
        return -abs(self._a)

    @property
    def edge_exponent_diagonal(self):
        return min(self._a, 0.0)

    def __call__(self, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        a = self._a
        if a == 0.0:
            return np.broadcast_to(1.0, np.broadcast_shapes(t.shape, s.shape)).copy()
        with np.errstate(divide="ignore"):
            z = -(t - s) / s
        out = self.normalizer * (t - s) ** a * hyp2f1(-a, a, a + 1.0, z)
        return out

    def reference_eval(self, t: float, s: float, epsrel: float = 1e-8) -> float:
        """Integral-form evaluation with adaptive quadrature of the correction term."""
        a = self._a
        c = self.normalizer
        lead = c * (t - s) ** a
        if a == 0.0:
            return lead
        length = t - s

        def integrand(u):
            return u ** (a - 1.0) * (1.0 - (s / (s + u)) ** (-a))

        pts = [p for p in (min(s, length), length * 0.5) if 0.0 < p < length]
        val, _ = quad(integrand, 0.0, length, epsrel=epsrel, epsabs=0.0,
                      limit=10_000, points=pts or None)
        return lead + c * (-a) * val

    def _correction(self, t, s):
        """K(t, s) minus its leading power part, vectorized."""
        a = self._a
        z = -(t - s) / s
        return self.normalizer * (t - s) ** a * (hyp2f1(-a, a, a + 1.0, z) - 1.0)

    def average_weights(self, grid):
        if self._a == 0.0:
            return ConstantKernel(1.0).average_weights(grid)
        n = grid.n_steps
        dt = grid.dt
        times = grid.times
        a = self._a
        q = a + 1.0
        r = np.arange(n + 1, dtype=float)
        lead_lag = self.normalizer * dt**a * (r[1:] ** q - r[:-1] ** q) / q
        w = _toeplitz_strict_lower(lead_lag, n)

        # correction term, cell by cell with fixed Gauss-Legendre nodes;
        # the j = 0 cell gets a power substitution absorbing the s -> 0 blow-up
        edge_q = 1.0 / (1.0 - abs(a))
        s0 = dt * _GLE_X**edge_q
        w0 = _GLE_W * edge_q * _GLE_X ** (edge_q - 1.0)

        chunk = max(1, int(2e6 / (max(n, 1) * _GL_NODES)))
        for lo in range(1, n + 1, chunk):
            hi = min(lo + chunk, n + 1)
            ti = times[lo:hi][:, None, None]
            # interior cells j >= 1
            j = np.arange(1, n)
            s_nodes = times[j][None, :, None] + dt * _GL_X[None, None, :]
            valid = j[None, :, None] < np.arange(lo, hi)[:, None, None]
            s_b = np.where(valid, s_nodes, 0.5 * ti)
            vals = self._correction(ti, s_b)
            cell = np.einsum("ijg,g->ij", np.where(valid, vals, 0.0), _GL_W)
            w[lo:hi, 1:] += cell
            # edge cell j = 0
            vals0 = self._correction(ti[:, 0, :], s0[None, :])
            w[lo:hi, 0] += vals0 @ w0
        return w


@dataclass(frozen=True)
class TabulatedKernel(Kernel):
    """Kernel given by point values on a uniform node grid, interpolated bilinearly."""

    times: np.ndarray
    values: np.ndarray  # values[i, j] = K(times[i], times[j]) for j < i
    family = "tabulated"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.size < 2 or v.shape != (t.size, t.size):
            raise ValueError("tabulated kernel needs times (m,) and values (m, m)")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def t_max(self):
        return float(self.times[-1])

    @classmethod
    def from_csv(cls, path) -> "TabulatedKernel":
        """Load rows ``t,s,value``; node set must form a uniform grid."""
        ts, ss, vs = [], [], []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ["t", "s", "value"]:
                raise ValueError("tabulated kernel CSV must have header t,s,value")
            for row in reader:
                ts.append(float(row["t"]))
                ss.append(float(row["s"]))
                vs.append(float(row["value"]))
        nodes = np.unique(np.concatenate([ts, ss]))
        if nodes.size < 2 or not np.allclose(np.diff(nodes), nodes[1] - nodes[0], rtol=1e-9):
            raise ValueError("tabulated kernel nodes must form a uniform grid")
        m = nodes.size
        vals = np.zeros((m, m))
        step = nodes[1] - nodes[0]
        for t, s, v in zip(ts, ss, vs):
            i = int(round((t - nodes[0]) / step))
            j = int(round((s - nodes[0]) / step))
            vals[i, j] = v
        return cls(times=nodes, values=vals)

    def __call__(self, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        step = self.times[1] - self.times[0]
        m = self.times.size - 1
        it = np.clip(((t - self.times[0]) / step).astype(int), 0, m - 1)
        js = np.clip(((s - self.times[0]) / step).astype(int), 0, m - 1)
        ft = (t - self.times[it]) / step
        fs = (s - self.times[js]) / step
        out = np.zeros(np.broadcast_shapes(t.shape, s.shape))
        tot = np.zeros_like(out)
        for di, wt in ((0, 1.0 - ft), (1, ft)):
            for dj, ws in ((0, 1.0 - fs), (1, fs)):
                ii = it + di
                jj = js + dj
                ok = jj < ii
                wgt = np.where(ok, wt * ws, 0.0)
                out = out + wgt * np.where(ok, self.values[ii, jj], 0.0)
                tot = tot + wgt
        with np.errstate(invalid="ignore", divide="ignore"):
            res = np.where(tot > 0, out / np.maximum(tot, 1e-300), 0.0)
        return res

    def average_weights(self, grid):
        if grid.horizon > self.t_max + 1e-12:
            raise KernelDomainError("grid horizon exceeds the tabulated range")
        return _weights_by_cell_quadrature(self, grid)


@dataclass(frozen=True)
class CustomKernel(Kernel):
    """Kernel backed by a user evaluator ``fn(t, s)``.

    ``convolution_profile``, when given, declares K(t, s) = profile(t - s) so
    grid weights collapse to one integral per lag.  Edge exponents let the
    quadrature helpers absorb known algebraic singularities.
    """

    fn: object
    vectorized: bool = True
    singular_at_diagonal: bool = False
    holder_exponent_hint: float | None = None
    edge_exponent_origin: float = 0.0
    edge_exponent_diagonal: float = 0.0
    convolution_profile: object | None = None
    family = "custom"

    def __call__(self, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        if self.vectorized:
            out = np.asarray(self.fn(t, s), dtype=float)
        else:
            out = np.vectorize(self.fn, otypes=[float])(t, s)
        if not np.all(np.isfinite(out)):
            raise SingularityError("custom kernel evaluator returned a non-finite value")
        return out

    def average_weights(self, grid):
        if self.convolution_profile is not None:
            n = grid.n_steps
            dt = grid.dt
            lag = np.empty(n)
            for r in range(n):
                lo_exp = self.edge_exponent_diagonal if r == 0 else 0.0
                lag[r] = _quad_power_edges(
                    lambda u: float(self.convolution_profile(u)),
                    r * dt, (r + 1) * dt, lo_exp, 0.0,
                ) / dt
            return _toeplitz_strict_lower(lag, n)
        return _weights_by_cell_quadrature(self, grid)


def _mask_strict_lower(w: np.ndarray) -> np.ndarray:
    n = w.shape[1]
    i = np.arange(w.shape[0])[:, None]
    j = np.arange(n)[None, :]
    return np.where(j < i, w, 0.0)


def _toeplitz_strict_lower(lag: np.ndarray, n: int) -> np.ndarray:
    """Weight matrix w[i, j] = lag[i - j - 1] for j < i, zero elsewhere."""
    i = np.arange(n + 1)[:, None]
    j = np.arange(n)[None, :]
    r = i - j - 1
    return np.where(r >= 0, lag[np.clip(r, 0, n - 1)], 0.0)


def _weights_by_cell_quadrature(kernel: Kernel, grid: TimeGrid) -> np.ndarray:
    n = grid.n_steps
    dt = grid.dt
    times = grid.times
    w = np.zeros((n + 1, n))
    nodes = times[:n][None, :, None] + dt * _GL_X[None, None, :]
    for i in range(1, n + 1):
        s = nodes[0, :i, :]
        vals = kernel(np.float64(times[i]), s)
        # the diagonal cell may hold an integrable singularity; redo it with a substitution
        w[i, :i] = vals @ _GL_W
        if kernel.singular_at_diagonal:
            e = kernel.edge_exponent_diagonal
            qe = 1.0 / (1.0 + e)
            u = dt * _GLE_X**qe  # distance below t_i
            vals_d = kernel(np.float64(times[i]), times[i] - u)
            w[i, i - 1] = vals_d @ (_GLE_W * qe * _GLE_X ** (qe - 1.0))
    return w


def _check_integral_bounds(t, a, b):
    if not (0.0 <= a <= b <= t):
        raise KernelDomainError(f"integral bounds need 0 <= a <= b <= t, got a={a}, b={b}, t={t}")


def _quad_power_edges(f, lo, hi, exp_lo=0.0, exp_hi=0.0, epsrel=1e-10):
    """Adaptive integral of f over (lo, hi) with algebraic endpoint singularities.

    exp_lo / exp_hi are the blow-up exponents of f at each endpoint (negative,
    > -1); a power substitution makes the transformed integrand bounded.
    """
    if hi <= lo:
        return 0.0
    mid = 0.5 * (lo + hi)
    total = 0.0
    if exp_lo < 0.0:
        q = 1.0 / (1.0 + exp_lo)
        span = mid - lo

        def g_lo(x):
            return f(lo + span * x**q) * span * q * x ** (q - 1.0)

        val, _ = quad(g_lo, 0.0, 1.0, epsrel=epsrel, epsabs=0.0, limit=500)
        total += val
        lo = mid
    if exp_hi < 0.0:
        q = 1.0 / (1.0 + exp_hi)
        span = hi - mid

        def g_hi(x):
            return f(hi - span * x**q) * span * q * x ** (q - 1.0)

        val, _ = quad(g_hi, 0.0, 1.0, epsrel=epsrel, epsabs=0.0, limit=500)
        total += val
        hi = mid
    if hi > lo:
        val, _ = quad(f, lo, hi, epsrel=epsrel, epsabs=0.0, limit=500)
        total += val
    return total


def eval_kernel(kernel: Kernel, t: float, s: float, t_max: float | None = None) -> float:
    """Point evaluation K(t, s) with domain checks.

    The fbm family is evaluated through its defining correction integral with
    adaptive quadrature (relative tolerance 1e-8, at most 10^4 subdivisions);
    other families evaluate directly.
    """
    if t_max is None:
        t_max = getattr(kernel, "t_max", None)
    if not (0.0 <= s < t):
        raise KernelDomainError(f"kernel arguments need 0 <= s < t, got s={s}, t={t}")
    if t_max is not None and t > t_max + 1e-12:
        raise KernelDomainError(f"kernel argument t={t} exceeds the admissible horizon {t_max}")
    if isinstance(kernel, FbmKernel):
        val = kernel.reference_eval(t, s)
    else:
        val = float(kernel(np.float64(t), np.float64(s)))
    if not np.isfinite(val):
        raise SingularityError(f"kernel evaluation at (t={t}, s={s}) is not finite")
    return val


def integrate_kernel(kernel: Kernel, t: float, a: float, b: float, power: int = 1) -> float:
    """integral over [a, b] of K(t, s)^power ds for power in {1, 2}."""
    if power not in (1, 2):
        raise ValueError("power must be 1 or 2")
    return kernel.integrate(t, a, b, power)


@dataclass(frozen=True)
class GridKernel:
    """Cell-averaged kernel weights on a uniform grid.

    ``weights`` has shape (n+1, n); entry (i, j) covers the cell
    [t_j, t_{j+1}] seen from node t_i and vanishes for j >= i.
    """

    grid: TimeGrid
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        n = self.grid.n_steps
        if w.shape != (n + 1, n):
            raise ValueError(f"weights must have shape ({n + 1}, {n})")
        i = np.arange(n + 1)[:, None]
        j = np.arange(n)[None, :]
        if np.any(w[j >= i] != 0.0):
            raise ValueError("weights must vanish on and above the diagonal")
        if not np.all(np.isfinite(w)):
            raise NonIntegrableError("grid kernel weights are not finite")
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_kernel(cls, kernel: Kernel, grid: TimeGrid) -> "GridKernel":
        return cls(grid=grid, weights=kernel.average_weights(grid))

    @classmethod
    def zero(cls, grid: TimeGrid) -> "GridKernel":
        return cls(grid=grid, weights=np.zeros((grid.n_steps + 1, grid.n_steps)))

    def apply(self, path: np.ndarray) -> np.ndarray:
        """Left-point Volterra application: out[i] = dt * sum_{k<i} w[i,k] path[k]."""
        path = np.asarray(path, dtype=float)
        n = self.grid.n_steps
        if path.shape[0] != n + 1:
            raise GridMismatchError("path length does not match the grid")
        return self.grid.dt * (self.weights @ path[:n])

    def row_integrals(self) -> np.ndarray:
        """Approximations of int_0^{t_i} K(t_i, s) ds per node."""
        return self.grid.dt * self.weights.sum(axis=1)

    def max_abs(self) -> float:
        return float(np.abs(self.weights).max(initial=0.0))


def grid_weights(kernel: Kernel, grid: TimeGrid) -> np.ndarray:
    """Cell-averaged weights with per-kernel caching (kernels are immutable)."""
    cache = getattr(kernel, "_weights_cache", None)
    if cache is None:
        cache = {}
        object.__setattr__(kernel, "_weights_cache", cache)
    key = (grid.horizon, grid.n_steps)
    if key not in cache:
        cache[key] = kernel.average_weights(grid)
    return cache[key]


def convolve(k: GridKernel, m: GridKernel) -> GridKernel:
    """Grid convolution (K*L)(t_i, cell_j) = dt * sum_{j<k<i} wK[i,k] wL[k,j]."""
    if k.grid != m.grid:
        raise GridMismatchError("convolution operands live on different grids")
    n = k.grid.n_steps
    w = k.grid.dt * (k.weights @ m.weights[:n, :])
    return GridKernel(grid=k.grid, weights=w)


@dataclass(frozen=True)
class ResolventPremise:
    sup_integral: float
    near_diagonal_mass: float
    status: str  # "ok" or "unverified"


def resolvent_premise(k: GridKernel, kernel_family: str | None = None) -> ResolventPremise:
    """Numerical check of the integrability premise behind the resolvent series.

    The small-mass-near-the-diagonal condition cannot be certified for
    arbitrary custom or tabulated kernels from grid data alone; those report
    "unverified" rather than guessing.
    """
    sup_int = float(k.row_integrals().max(initial=0.0))
    diag = k.grid.dt * np.array(
        [k.weights[i, i - 1] for i in range(1, k.grid.n_steps + 1)]
    )
    near = float(np.abs(diag).max(initial=0.0))
    if not np.isfinite(sup_int):
        raise NonIntegrableError("kernel row integrals are not finite")
    status = "ok"
    if kernel_family in ("custom", "tabulated") or near >= 1.0:
        status = "unverified"
    return ResolventPremise(sup_integral=sup_int, near_diagonal_mass=near, status=status)


def resolvent(k: GridKernel, method: str = "direct", n_max: int = 200,
              tol: float = 1e-10) -> GridKernel:
    """Resolvent R of K, satisfying R = K + K*R on the grid.

    method="series" sums iterated convolutions R_1 = K, R_{n+1} = K*R_n until
    sup_t int R_n <= tol or n_max terms; method="direct" solves the identity
    row by row (strictly lower-triangular forward substitution).
    """
    resolvent_premise(k)
    n = k.grid.n_steps
    dt = k.grid.dt
    w = k.weights
    if method == "direct":
        r = w.copy()
        for i in range(2, n + 1):
            r[i, :] += dt * (w[i, :i] @ r[:i, :])
        return GridKernel(grid=k.grid, weights=r)
    if method == "series":
        term = w.copy()
        total = w.copy()
        first_metric = float(dt * np.abs(term).sum(axis=1).max())
        metric = first_metric
        for _ in range(1, n_max):
            term = dt * (w @ term[:n, :])
            total += term
            metric = float(dt * np.abs(term).sum(axis=1).max())
            if metric <= tol:
                return GridKernel(grid=k.grid, weights=total)
        if metric > first_metric:
            raise SeriesDivergenceError(
                f"resolvent series still growing after {n_max} terms (sup-integral {metric:.3e})"
            )
        return GridKernel(grid=k.grid, weights=total)
    raise ValueError(f"unknown resolvent method {method!r}")


@dataclass(frozen=True)
class GronwallReport:
    f: np.ndarray
    bound: np.ndarray
    satisfied: bool
    slack: float


def gronwall_check(k: GridKernel, g: np.ndarray, slack_constant: float = 2.0) -> GronwallReport:
    """Volterra Gronwall construction on the grid.

    Builds the saturating solution f of f = g + K*f by forward substitution,
    the comparison bound g + R*g with the direct resolvent, and reports
    whether f <= bound + slack where slack = slack_constant * dt * max(g) *
    (1 + max_t int R) absorbs quadrature rounding.
    """
    g = np.asarray(g, dtype=float)
    n = k.grid.n_steps
    if g.shape != (n + 1,):
        raise GridMismatchError("g must be a path on the grid nodes")
    if np.any(g < 0.0):
        raise ValueError("g must be nonnegative")
    dt = k.grid.dt
    w = k.weights
    f = np.empty(n + 1)
    f[0] = g[0]
    for i in range(1, n + 1):
        f[i] = g[i] + dt * (w[i, :i] @ f[:i])
    r = resolvent(k, method="direct")
    bound = g + r.apply(g)
    slack = slack_constant * dt * float(g.max(initial=0.0)) * (
        1.0 + float(r.row_integrals().max(initial=0.0))
    )
    satisfied = bool(np.all(f <= bound + slack))
    return GronwallReport(f=f, bound=bound, satisfied=satisfied, slack=slack)


@dataclass(frozen=True)
class RegularityEstimate:
    gamma_hat: float
    slope: float
    intercept: float
    r2: float
    max_log_residual: float
    h_values: np.ndarray
    d_values: np.ndarray


def regularity_probe(kernel: Kernel, t: float, h_list) -> RegularityEstimate:
    """Estimate the square-increment exponent of a kernel at time t.

    For each h computes D(h) = int_0^t |K(t+h, s) - K(t, s)|^2 ds
    + int_t^{t+h} K(t+h, s)^2 ds and fits log D against log h; the estimate
    is half the fitted slope, with fit residual diagnostics.
    """
    h_arr = np.asarray(sorted(float(h) for h in h_list), dtype=float)
    if h_arr.size < 4:
        raise ValueError("need at least 4 increments h")
    if np.any(h_arr <= 0.0):
        raise ValueError("increments h must be positive")
    t_max = getattr(kernel, "t_max", None)
    if t_max is not None and t + h_arr.max() > t_max + 1e-12:
        raise KernelDomainError("t + h exceeds the kernel horizon")

    e0 = 2.0 * kernel.edge_exponent_origin
    ed = 2.0 * kernel.edge_exponent_diagonal
    d_vals = np.empty_like(h_arr)
    for idx, h in enumerate(h_arr):
        def diff_sq(s):
            d = float(kernel(np.float64(t + h), np.float64(s))) - float(
                kernel(np.float64(t), np.float64(s))
            )
            return d * d

        d1 = _quad_power_edges(diff_sq, 0.0, t, e0, ed, epsrel=1e-9)
        d2 = kernel.integrate(t + h, t, t + h, power=2)
        d_vals[idx] = d1 + d2
    if np.any(d_vals <= 0.0) or not np.all(np.isfinite(d_vals)):
        raise NonIntegrableError("regularity probe produced non-positive increments")
    x = np.log(h_arr)
    y = np.log(d_vals)
    slope, intercept = np.polyfit(x, y, 1)
    fit = slope * x + intercept
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RegularityEstimate(
        gamma_hat=0.5 * slope,
        slope=float(slope),
        intercept=float(intercept),
        r2=r2,
        max_log_residual=float(np.abs(y - fit).max()),
        h_values=h_arr,
        d_values=d_vals,
    )


_CONFIG_FAMILIES = ("constant", "power", "fbm", "tabulated")


def kernel_from_params(family: str, params: dict) -> Kernel:
    """Build a kernel from configuration-style parameters."""
    if family == "constant":
        return ConstantKernel(value=float(params.get("c", 1.0)))
    if family == "power":
        return PowerKernel(hurst=float(params["H"]), scale=float(params.get("scale", 1.0)))
    if family == "fbm":
        return FbmKernel(hurst=float(params["H"]))
    if family == "tabulated":
        return TabulatedKernel.from_csv(params["csv"])
    raise ValueError(
        f"unknown kernel family {family!r} (allowed: {', '.join(_CONFIG_FAMILIES)})"
    )
