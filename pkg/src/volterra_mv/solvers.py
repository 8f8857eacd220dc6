"""Solvers for kernel-weighted mean-field dynamics on a shared uniform grid.

Three kinds of objects are produced here:

* the deterministic small-noise limit, whose law argument is its own Dirac
  path (successive approximation or exact forward stepping),
* interacting-particle ensembles for the noisy system, with full history
  retained (the dynamics are non-Markovian) and counter-based noise so that
  ensembles with the same seed share driver increments across different
  noise levels,
* controlled variants of both, with the control entering through its own
  kernel, used by the rate-function machinery.

All schemes evaluate coefficients at the left endpoint of each cell and
integrate the kernel exactly across the cell (cell-averaged weights), the
first-order discretization that stays finite for singular kernels and keeps
the driver coupling exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coefficients import CoefficientSet
from .errors import BlowUpError, GridMismatchError, PicardError
from .grids import TimeGrid
from .kernels import Kernel, grid_weights
from .measures import EmpiricalMeasure
from . import rng as _rng

OVERFLOW_GUARD = 1e12


@dataclass(frozen=True)
class Model:
    """Kernel pair plus coefficients: everything the stochastic system needs."""

    k1: Kernel
    k2: Kernel
    coeffs: CoefficientSet


@dataclass
class ControlPath:
    """Discrete control v on the grid cells with energy 0.5 * sum |v_k|^2 dt."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.n_steps:
            raise GridMismatchError("control must have one value per grid cell")
        self.values = v

    @classmethod
    def constant(cls, grid: TimeGrid, value, m: int = 1) -> "ControlPath":
        val = np.broadcast_to(np.asarray(value, dtype=float), (m,))
        return cls(grid=grid, values=np.tile(val, (grid.n_steps, 1)))

    @classmethod
    def zero(cls, grid: TimeGrid, m: int = 1) -> "ControlPath":
        return cls(grid=grid, values=np.zeros((grid.n_steps, m)))

    @property
    def energy(self) -> float:
        return 0.5 * float(np.sum(self.values**2)) * self.grid.dt


@dataclass
class PathEnsemble:
    """N particle trajectories with their driver increments retained."""

    grid: TimeGrid
    states: np.ndarray            # (N, n_steps + 1, d)
    driver_increments: np.ndarray  # (N, n_steps, m)
    seed: int
    tag: str
    eps: float

    @property
    def n_particles(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[2]

    def terminal(self) -> np.ndarray:
        return self.states[:, -1, :]

    def measure_at(self, step: int) -> EmpiricalMeasure:
        return EmpiricalMeasure(points=self.states[:, step, :].copy())


def _guard(x: np.ndarray, step: int) -> None:
    mx = float(np.max(np.abs(x))) if x.size else 0.0
    if not np.isfinite(mx) or mx > OVERFLOW_GUARD:
        raise BlowUpError(
            f"trajectory magnitude {mx:.3e} exceeded the overflow guard at step {step}",
            step=step, magnitude=mx,
        )


def _initial_states(xi, n_particles: int, d: int, seed: int):
    if callable(xi):
        rng = np.random.default_rng(_rng.derived_seed(seed, 0x696E6974))
        draws = np.asarray(xi(n_particles, rng), dtype=float)
        if draws.shape != (n_particles, d):
            raise ValueError(f"random initial condition must return shape {(n_particles, d)}")
        return draws, True
    arr = np.atleast_1d(np.asarray(xi, dtype=float))
    if arr.shape != (d,):
        raise ValueError(f"initial condition must have shape ({d},)")
    return np.tile(arr, (n_particles, 1)), False


def solve_deterministic_limit(k1: Kernel, coeffs: CoefficientSet, xi, grid: TimeGrid,
                              method: str = "stepping", max_iter: int = 200,
                              tol: float = 1e-12) -> np.ndarray:
    """Noise-free limit path: x_t = xi + int_0^t K1(t,s) b(s, x_s, delta_{x_s}) ds.

    "stepping" marches the discrete scheme forward (its exact fixed point);
    "picard" runs the successive-approximation map, updating the path and its
    own Dirac law each sweep, until the sup-norm change drops below tol.
    """
    d = coeffs.d
    xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi_arr.shape != (d,):
        raise ValueError(f"initial condition must have shape ({d},)")
    w1 = grid_weights(k1, grid)
    n = grid.n_steps
    dt = grid.dt
    times = grid.times
    if method == "stepping":
        x = np.empty((n + 1, d))
        x[0] = xi_arr
        bh = np.empty((n, d))
        for i in range(n):
            mu = EmpiricalMeasure.dirac(x[i])
            bh[i] = coeffs.drift(times[i], x[i][None, :], mu)[0]
            x[i + 1] = xi_arr + dt * (w1[i + 1, : i + 1] @ bh[: i + 1])
            _guard(x[i + 1], i + 1)
        return x
    if method == "picard":
        phi = np.tile(xi_arr, (n + 1, 1))
        bh = np.empty((n, d))
        for sweep in range(max_iter):
            for k in range(n):
                mu = EmpiricalMeasure.dirac(phi[k])
                bh[k] = coeffs.drift(times[k], phi[k][None, :], mu)[0]
            new = xi_arr[None, :] + dt * (w1 @ bh)
            _guard(new, sweep)
            resid = float(np.max(np.abs(new - phi)))
            phi = new
            if resid <= tol:
                return phi
        raise PicardError(
            f"successive approximation did not converge in {max_iter} sweeps",
            residual=resid,
        )
    raise ValueError(f"unknown method {method!r}")


def _simulate(k1: Kernel, k2: Kernel, kc: Kernel | None, coeffs: CoefficientSet,
              xi, eps: float, grid: TimeGrid, n_particles: int, seed: int,
              v: ControlPath | None, noise_scale: float, law_mode: str,
              frozen_path: np.ndarray | None, x0_path: np.ndarray | None,
              mdp_scale: float, tag: str,
              driver_increments: np.ndarray | None) -> PathEnsemble:
    """Shared integrator.  mdp_scale > 0 switches on the centered difference-
    quotient dynamics of the rescaled deviation variable."""
    d, m = coeffs.d, coeffs.m
    n = grid.n_steps
    dt = grid.dt
    times = grid.times

    if driver_increments is None:
        dw = _rng.normal_increments(seed, tag, n_particles, n, m, dt)
    else:
        dw = np.asarray(driver_increments, dtype=float)
        if dw.shape != (n_particles, n, m):
            raise GridMismatchError("injected driver increments have the wrong shape")

    if law_mode == "frozen":
        if frozen_path is None or frozen_path.shape != (n + 1, d):
            raise GridMismatchError("law_mode='frozen' needs a path on the grid nodes")
    elif law_mode != "self":
        raise ValueError(f"unknown law mode {law_mode!r}")

    mdp = mdp_scale > 0.0
    if mdp:
        if x0_path is None or x0_path.shape != (n + 1, d):
            raise GridMismatchError("the deviation dynamics need the limit path on the grid")
        states0 = np.zeros((n_particles, d))
        random_init = False
    else:
        states0, random_init = _initial_states(xi, n_particles, d, seed)

    states = np.empty((n_particles, n + 1, d))
    states[:, 0, :] = states0
    base = states0.reshape(-1)

    drift_hist = np.empty((n, n_particles * d))
    noise_hist = np.empty((n, n_particles * d))
    ctrl_hist = np.empty((n, n_particles * d)) if v is not None else None
    w1 = grid_weights(k1, grid)
    w2 = grid_weights(k2, grid)
    wc = grid_weights(kc, grid) if kc is not None else None

    for i in range(n):
        xi_states = states[:, i, :]
        t = times[i]
        if mdp:
            shifted = x0_path[i][None, :] + mdp_scale * xi_states
            if law_mode == "self":
                mu = EmpiricalMeasure(points=shifted, _validate=False)
            else:
                mu = EmpiricalMeasure.dirac(frozen_path[i])
            b_shift = coeffs.drift(t, shifted, mu)
            b_base = coeffs.drift(
                t, x0_path[i][None, :], EmpiricalMeasure.dirac(x0_path[i])
            )
            bi = (b_shift - b_base) / mdp_scale
            si = coeffs.diffusion(t, shifted, mu)
        else:
            if law_mode == "self":
                mu = EmpiricalMeasure(points=xi_states, _validate=False)
            else:
                mu = EmpiricalMeasure.dirac(frozen_path[i])
            bi = coeffs.drift(t, xi_states, mu)
            si = coeffs.diffusion(t, xi_states, mu)
        drift_hist[i] = bi.reshape(-1)
        noise_hist[i] = np.einsum("ndm,nm->nd", si, dw[:, i, :]).reshape(-1)
        if v is not None:
            ctrl_hist[i] = (si @ v.values[i]).reshape(-1)

        nxt = base + dt * (w1[i + 1, : i + 1] @ drift_hist[: i + 1])
        if v is not None:
            nxt = nxt + dt * (wc[i + 1, : i + 1] @ ctrl_hist[: i + 1])
        if noise_scale != 0.0:
            nxt = nxt + noise_scale * (w2[i + 1, : i + 1] @ noise_hist[: i + 1])
        states[:, i + 1, :] = nxt.reshape(n_particles, d)
        _guard(states[:, i + 1, :], i + 1)

    return PathEnsemble(
        grid=grid, states=states, driver_increments=dw,
        seed=seed, tag=tag, eps=eps,
    )


def simulate_particles(k1: Kernel, k2: Kernel, coeffs: CoefficientSet, xi,
                       eps: float, grid: TimeGrid, n_particles: int, seed: int,
                       driver_increments: np.ndarray | None = None,
                       tag: str = "particles") -> PathEnsemble:
    """Interacting-particle system with empirical-law coupling and noise sqrt(eps).

    Reproducible: the output is a pure function of (seed, grid, N, model), and
    two calls with the same seed but different eps consume identical driver
    increments, which is what couples the small-noise family pathwise.
    """
    if not (0.0 <= eps <= 1.0):
        raise ValueError("eps must lie in [0, 1]")
    if n_particles < 1:
        raise ValueError("need at least one particle")
    return _simulate(
        k1, k2, None, coeffs, xi, eps, grid, n_particles, seed,
        v=None, noise_scale=float(np.sqrt(eps)), law_mode="self",
        frozen_path=None, x0_path=None, mdp_scale=0.0, tag=tag,
        driver_increments=driver_increments,
    )


def simulate_controlled(k1: Kernel, k2: Kernel, kc: Kernel, coeffs: CoefficientSet,
                        xi, eps: float, v: ControlPath, grid: TimeGrid,
                        n_particles: int, seed: int, form: str = "ldp",
                        h_eps: float | None = None, law_mode: str = "self",
                        frozen_path: np.ndarray | None = None,
                        x0_path: np.ndarray | None = None,
                        driver_increments: np.ndarray | None = None,
                        tag: str = "particles") -> PathEnsemble:
    """Controlled dynamics with the control integrand sigma(.) v under kernel kc.

    form="ldp": state equation with drift under k1, control under kc and
    noise sqrt(eps) under k2; with v identically zero this reproduces
    simulate_particles bit for bit at the same seed.

    form="mdp": dynamics of the rescaled deviation from the limit path
    (difference-quotient drift around x0_path, noise scale 1/h_eps); requires
    eps > 0, h_eps > 0 and the precomputed limit path.
    """
    if v.grid != grid:
        raise GridMismatchError("control path lives on a different grid")
    if not (0.0 <= eps <= 1.0):
        raise ValueError("eps must lie in [0, 1]")
    if form == "ldp":
        return _simulate(
            k1, k2, kc, coeffs, xi, eps, grid, n_particles, seed,
            v=v, noise_scale=float(np.sqrt(eps)), law_mode=law_mode,
            frozen_path=frozen_path, x0_path=None, mdp_scale=0.0, tag=tag,
            driver_increments=driver_increments,
        )
    if form == "mdp":
        if h_eps is None or h_eps <= 0.0:
            raise ValueError("form='mdp' needs h_eps > 0")
        if eps <= 0.0:
            raise ValueError("form='mdp' needs eps > 0 (the deviation scale is sqrt(eps) h)")
        return _simulate(
            k1, k2, kc, coeffs, xi, eps, grid, n_particles, seed,
            v=v, noise_scale=1.0 / h_eps, law_mode=law_mode,
            frozen_path=frozen_path, x0_path=x0_path,
            mdp_scale=float(np.sqrt(eps)) * h_eps, tag=tag,
            driver_increments=driver_increments,
        )
    raise ValueError(f"unknown controlled form {form!r}")


def solve_controlled_deterministic(k1: Kernel, kc: Kernel, coeffs: CoefficientSet,
                                   xi, v: ControlPath, x0_path: np.ndarray,
                                   mode: str, grid: TimeGrid, method: str = "picard",
                                   max_iter: int = 400, tol: float = 1e-12) -> np.ndarray:
    """Deterministic controlled equations, with the law frozen at the limit path.

    mode="ldp": the equation
        phi_t = xi + int K1 b(s, phi_s, delta_{x0_s}) + int Kc sigma(s, phi_s, delta_{x0_s}) v_s,
    solved by successive approximation (method="picard") or by one forward
    march of the explicit discrete scheme (method="stepping"); both land on
    the same discrete fixed point.
    mode="mdp_linearized": one exact forward pass of the linear system
        psi_t = int K1 grad_b(s, x0_s, delta_{x0_s}) psi_s + int Kc sigma(s, x0_s, delta_{x0_s}) v_s.
    """
    d = coeffs.d
    n = grid.n_steps
    dt = grid.dt
    times = grid.times
    if v.grid != grid:
        raise GridMismatchError("control path lives on a different grid")
    x0_path = np.asarray(x0_path, dtype=float)
    if x0_path.ndim == 1:
        x0_path = x0_path[:, None]
    if x0_path.shape != (n + 1, d):
        raise GridMismatchError("limit path must be given on the grid nodes")
    w1 = grid_weights(k1, grid)
    wc = grid_weights(kc, grid)
    diracs = [EmpiricalMeasure.dirac(x0_path[k]) for k in range(n)]

    if mode == "mdp_linearized":
        grads = np.empty((n, d, d))
        forc = np.empty((n, d))
        for k in range(n):
            grads[k] = coeffs.drift_gradient(times[k], x0_path[k][None, :], diracs[k])[0]
            forc[k] = coeffs.diffusion(times[k], x0_path[k][None, :], diracs[k])[0] @ v.values[k]
        psi = np.zeros((n + 1, d))
        gpsi = np.empty((n, d))
        for i in range(n):
            gpsi[i] = grads[i] @ psi[i]
            psi[i + 1] = dt * (w1[i + 1, : i + 1] @ gpsi[: i + 1]) + dt * (
                wc[i + 1, : i + 1] @ forc[: i + 1]
            )
        return psi

    if mode == "ldp":
        xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
        if xi_arr.shape != (d,):
            raise ValueError(f"initial condition must have shape ({d},)")
        bh = np.empty((n, d))
        sv = np.empty((n, d))
        if method == "stepping":
            phi = np.empty((n + 1, d))
            phi[0] = xi_arr
            for i in range(n):
                bh[i] = coeffs.drift(times[i], phi[i][None, :], diracs[i])[0]
                sv[i] = coeffs.diffusion(times[i], phi[i][None, :], diracs[i])[0] @ v.values[i]
                phi[i + 1] = xi_arr + dt * (w1[i + 1, : i + 1] @ bh[: i + 1]) + dt * (
                    wc[i + 1, : i + 1] @ sv[: i + 1]
                )
                _guard(phi[i + 1], i + 1)
            return phi
        if method != "picard":
            raise ValueError(f"unknown method {method!r}")
        phi = np.tile(xi_arr, (n + 1, 1))
        for _ in range(max_iter):
            for k in range(n):
                bh[k] = coeffs.drift(times[k], phi[k][None, :], diracs[k])[0]
                sv[k] = coeffs.diffusion(times[k], phi[k][None, :], diracs[k])[0] @ v.values[k]
            new = xi_arr[None, :] + dt * (w1 @ bh) + dt * (wc @ sv)
            _guard(new, 0)
            resid = float(np.max(np.abs(new - phi)))
            phi = new
            if resid <= tol:
                return phi
        raise PicardError(
            f"controlled successive approximation did not converge in {max_iter} sweeps",
            residual=resid,
        )
    raise ValueError(f"unknown mode {mode!r}")


def ensemble_summary(ensemble: PathEnsemble, p_list=(2,)) -> dict:
    """Per-node mean/variance per component and p-moments of the norm."""
    s = ensemble.states
    out = {
        "t": ensemble.grid.times,
        "mean": s.mean(axis=0),
        "var": s.var(axis=0),
    }
    norms = np.linalg.norm(s, axis=2)
    for p in p_list:
        out[f"moment_p{p}"] = (norms**p).mean(axis=0)
    return out
