"""Rate functionals as discrete optimal-control problems.

Both rate functionals measured here are infima of the control energy
0.5 * int |v|^2 dt over controls steering a deterministic limit equation into
a target: the small-noise functional constrains the controlled limit path,
the moderate-deviation functional its drift linearization.  On the grid the
constraint is affine in the control once the target is fixed, so the infimum
reduces to a minimum-norm least-squares solve of a first-kind triangular
system; the re-substitution residual is always reported and attainment is
never claimed beyond it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .coefficients import CoefficientSet
from .errors import GridMismatchError, RankDeficiencyError
from .grids import TimeGrid
from .kernels import Kernel, grid_weights
from .measures import EmpiricalMeasure
from .solvers import (
    ControlPath,
    Model,
    simulate_particles,
    solve_controlled_deterministic,
    solve_deterministic_limit,
)
from . import rng as _rng


@dataclass
class RateProblem:
    """A rate evaluation: invert the control-to-path map at a given target."""

    mode: str                  # "ldp" or "mdp"
    k1: Kernel
    kc: Kernel
    coeffs: CoefficientSet
    grid: TimeGrid
    x0_path: np.ndarray
    target: np.ndarray
    lam_reg: float = 0.0

    def __post_init__(self):
        if self.mode not in ("ldp", "mdp"):
            raise ValueError("mode must be 'ldp' or 'mdp'")
        n = self.grid.n_steps
        d = self.coeffs.d
        self.x0_path = np.asarray(self.x0_path, dtype=float)
        self.target = np.asarray(self.target, dtype=float)
        if self.target.ndim == 1:
            self.target = self.target[:, None]
        if self.x0_path.ndim == 1:
            self.x0_path = self.x0_path[:, None]
        if self.x0_path.shape != (n + 1, d) or self.target.shape != (n + 1, d):
            raise GridMismatchError("target and limit path must live on the grid nodes")
        if self.lam_reg < 0:
            raise ValueError("regularization weight must be nonnegative")
        anchor = self.x0_path[0] if self.mode == "ldp" else np.zeros(d)
        if not np.allclose(self.target[0], anchor, atol=1e-9):
            raise ValueError(
                "target must start at the initial condition (ldp) or zero (mdp)"
            )


@dataclass
class RateSolution:
    v_star: ControlPath
    rate: float
    residual: float
    attained: bool
    lambda_used: float = 0.0
    iterations: int = 0
    diagnostics: dict = field(default_factory=dict)


def _control_system(problem: RateProblem):
    """Dense first-kind system C v = g extracted from the discrete constraint."""
    coeffs = problem.coeffs
    grid = problem.grid
    n, d, m = grid.n_steps, coeffs.d, coeffs.m
    dt = grid.dt
    times = grid.times
    w1 = grid_weights(problem.k1, grid)
    wc = grid_weights(problem.kc, grid)
    target = problem.target
    x0 = problem.x0_path

    sig = np.empty((n, d, m))
    if problem.mode == "mdp":
        drift_term = np.empty((n, d))
        for k in range(n):
            mu = EmpiricalMeasure.dirac(x0[k])
            g_k = coeffs.drift_gradient(times[k], x0[k][None, :], mu)[0]
            drift_term[k] = g_k @ target[k]
            sig[k] = coeffs.diffusion(times[k], x0[k][None, :], mu)[0]
        g = target[1:] - dt * (w1[1:, :] @ drift_term)
    else:
        drift_term = np.empty((n, d))
        for k in range(n):
            mu = EmpiricalMeasure.dirac(x0[k])
            drift_term[k] = coeffs.drift(times[k], target[k][None, :], mu)[0]
            sig[k] = coeffs.diffusion(times[k], target[k][None, :], mu)[0]
        g = target[1:] - x0[0][None, :] - dt * (w1[1:, :] @ drift_term)

    c = dt * np.einsum("ik,kdm->idkm", wc[1:, :], sig).reshape(n * d, n * m)
    return c, g.reshape(-1), sig


def _solve_first_kind(c: np.ndarray, g: np.ndarray, lam_reg: float, sig: np.ndarray,
                      wc_lead: np.ndarray, dt: float):
    """Minimum-norm least squares, with automatic ridge when the kernel's
    leading cell weights vanish and an explicit error when the diffusion
    itself is rank deficient and no regularization was requested."""
    n = sig.shape[0]
    m = sig.shape[2]
    sig_min = np.array([np.linalg.svd(sig[k], compute_uv=False).min(initial=np.inf)
                        if min(sig[k].shape) > 0 else 0.0 for k in range(n)])
    sig_scale = float(np.abs(sig).max(initial=0.0))
    lam = lam_reg
    auto = 0.0
    if lam == 0.0:
        if np.any(sig_min <= 1e-12 * (1.0 + sig_scale)):
            raise RankDeficiencyError(
                "diffusion matrix is rank deficient on the limit path; supply lam_reg > 0"
            )
        lead = np.abs(dt * wc_lead)
        if np.any(lead <= 1e-14 * max(lead.max(initial=0.0), 1.0)):
            auto = 1e-10 * float(np.linalg.norm(c))
            lam = auto
    if lam > 0.0:
        gram = c.T @ c + lam * np.eye(c.shape[1])
        v = np.linalg.solve(gram, c.T @ g)
    else:
        v, *_ = np.linalg.lstsq(c, g, rcond=None)
    return v.reshape(n, m), auto if lam_reg == 0.0 else lam_reg


def _finish(problem: RateProblem, v: np.ndarray, lambda_used: float,
            residual_tol: float | None) -> RateSolution:
    grid = problem.grid
    ctrl = ControlPath(grid=grid, values=v)
    mode = "mdp_linearized" if problem.mode == "mdp" else "ldp"
    resub = solve_controlled_deterministic(
        problem.k1, problem.kc, problem.coeffs, problem.x0_path[0], ctrl,
        problem.x0_path, mode, grid, method="stepping",
    )
    residual = float(np.max(np.abs(resub - problem.target)))
    if residual_tol is None:
        residual_tol = 1e-6 * (1.0 + float(np.max(np.abs(problem.target))))
    return RateSolution(
        v_star=ctrl, rate=ctrl.energy, residual=residual,
        attained=residual <= residual_tol, lambda_used=lambda_used,
    )


def mdp_rate(problem: RateProblem, residual_tol: float | None = None) -> RateSolution:
    """Moderate-deviation rate of a target path of the drift linearization.

    Moves the linear drift feedback to the right-hand side and solves the
    remaining first-kind control system in the minimum-norm least-squares
    sense (ridge-regularized when requested or when the control kernel's
    leading weights vanish); the rate is the recovered control energy.
    """
    if problem.mode != "mdp":
        raise ValueError("problem mode must be 'mdp'")
    c, g, sig = _control_system(problem)
    wc = grid_weights(problem.kc, problem.grid)
    lead = np.array([wc[k + 1, k] for k in range(problem.grid.n_steps)])
    v, lam = _solve_first_kind(c, g, problem.lam_reg, sig, lead, problem.grid.dt)
    return _finish(problem, v, lam, residual_tol)


def ldp_rate(problem: RateProblem, solver: str = "triangular",
             max_iter: int = 5000, step: float = None,
             residual_tol: float | None = None) -> RateSolution:
    """Small-noise rate of a target path of the controlled limit equation.

    With the target fixed, the constraint is affine in the control, so
    solver="triangular" inverts it directly (minimum-norm least squares);
    solver="descent" minimizes the squared constraint defect by plain
    gradient descent and exists to cross-check the direct route.
    """
    if problem.mode != "ldp":
        raise ValueError("problem mode must be 'ldp'")
    c, g, sig = _control_system(problem)
    wc = grid_weights(problem.kc, problem.grid)
    n, m = problem.grid.n_steps, problem.coeffs.m
    lead = np.array([wc[k + 1, k] for k in range(n)])
    if solver == "triangular":
        v, lam = _solve_first_kind(c, g, problem.lam_reg, sig, lead, problem.grid.dt)
        return _finish(problem, v, lam, residual_tol)
    if solver == "descent":
        if step is None:
            step = 1.0 / max(float(np.linalg.norm(c, ord=2)) ** 2, 1e-12)
        v = np.zeros(n * m)
        for it in range(max_iter):
            grad = c.T @ (c @ v - g)
            v -= step * grad
            if float(np.linalg.norm(grad)) <= 1e-14 * (1.0 + float(np.linalg.norm(g))):
                break
        sol = _finish(problem, v.reshape(n, m), 0.0, residual_tol)
        sol.iterations = it + 1
        return sol
    raise ValueError(f"unknown solver {solver!r}")


@dataclass(frozen=True)
class Halfspace:
    """Terminal event {x : <normal, x> >= level}."""

    normal: np.ndarray
    level: float

    def __post_init__(self):
        object.__setattr__(self, "normal", np.atleast_1d(np.asarray(self.normal, dtype=float)))

    def contains(self, x) -> np.ndarray:
        return np.asarray(x) @ self.normal >= self.level


def _terminal_map(problem_mode: str, k1, kc, coeffs, xi, x0_path, grid, v_values):
    ctrl = ControlPath(grid=grid, values=v_values)
    mode = "mdp_linearized" if problem_mode == "mdp" else "ldp"
    path = solve_controlled_deterministic(k1, kc, coeffs, xi, ctrl, x0_path, mode, grid,
                                          method="stepping")
    return path


def _terminal_sensitivity(problem_mode, k1, kc, coeffs, x0_path, path, grid, normal):
    """Gradient of <normal, x_T> with respect to the stacked control values.

    Uses the exact linearization for the mdp mode and a Gauss-Newton
    linearization (drift gradient along the current path, diffusion frozen)
    for the ldp mode.
    """
    n, d, m = grid.n_steps, coeffs.d, coeffs.m
    dt = grid.dt
    times = grid.times
    w1 = grid_weights(k1, grid)
    wc = grid_weights(kc, grid)
    ref = x0_path if problem_mode == "mdp" else path
    grads = np.empty((n, d, d))
    sig = np.empty((n, d, m))
    for k in range(n):
        mu = EmpiricalMeasure.dirac(x0_path[k])
        grads[k] = coeffs.drift_gradient(times[k], ref[k][None, :], mu)[0]
        sig[k] = coeffs.diffusion(times[k], ref[k][None, :], mu)[0]
    # adjoint of delta_x = L delta_x + C delta_v against the terminal functional
    size = (n + 1) * d
    lmat = np.zeros((size, size))
    lmat[:, : n * d] = dt * np.einsum("ik,kab->iakb", w1, grads).reshape(size, n * d)
    rhs = np.zeros(size)
    rhs[n * d :] = normal
    q = solve_triangular(np.eye(size) - lmat, rhs, lower=True, trans="T")
    qmat = q.reshape(n + 1, d)
    qk = dt * np.einsum("ik,id->kd", wc, qmat)  # (n, d)
    r = np.einsum("kdm,kd->km", sig, qk)
    return r.reshape(-1)


def minimize_rate_endpoint(model: Model, mode: str, event: Halfspace, grid: TimeGrid,
                           xi=0.0, kc: Kernel | None = None,
                           init: ControlPath | None = None, max_iter: int = 40,
                           step: float = 1.0, stages: int = 8,
                           penalty0: float = 1.0,
                           constraint_tol: float = 1e-9) -> RateSolution:
    """Smallest control energy driving the limit dynamics into a terminal halfspace.

    Penalty continuation (factor 10 per stage) over backtracking gradient
    descent, followed by a minimum-norm equality polish on the linearized
    active constraint.  Deterministic given the initial control and
    parameters.  The control kernel defaults to the drift kernel in ldp mode
    and the noise kernel in mdp mode.
    """
    coeffs = model.coeffs
    if kc is None:
        kc = model.k1 if mode == "ldp" else model.k2
    n, m = grid.n_steps, coeffs.m
    dt = grid.dt
    xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
    x0_path = solve_deterministic_limit(model.k1, coeffs, xi_arr, grid, method="stepping")
    v = np.zeros((n, m)) if init is None else np.array(init.values, dtype=float)

    def forward(vv):
        return _terminal_map(mode, model.k1, kc, coeffs, xi_arr, x0_path, grid, vv)

    scale = 1.0 + abs(event.level) + float(np.max(np.abs(x0_path)))
    path0 = forward(np.zeros((n, m)))
    if float(path0[-1] @ event.normal) >= event.level - constraint_tol * scale:
        zero = ControlPath.zero(grid, m)
        return RateSolution(v_star=zero, rate=0.0, residual=0.0, attained=True)

    def objective(vv, rho):
        path = forward(vv)
        viol = max(0.0, event.level - float(path[-1] @ event.normal))
        energy = 0.5 * float(np.sum(vv**2)) * dt
        return energy + rho * viol * viol, path, viol

    rho = penalty0
    iterations = 0
    r_fixed = None
    if mode == "mdp":
        # the linearized dynamics are the dynamics: one sensitivity row suffices
        r_fixed = _terminal_sensitivity(mode, model.k1, kc, coeffs, x0_path, path0,
                                        grid, event.normal).reshape(n, m)
    for _ in range(stages):
        for _ in range(max_iter):
            val, path, viol = objective(v, rho)
            if r_fixed is not None:
                r = r_fixed
            else:
                r = _terminal_sensitivity(mode, model.k1, kc, coeffs, x0_path, path,
                                          grid, event.normal).reshape(n, m)
            grad = dt * v - 2.0 * rho * viol * r
            gnorm = float(np.linalg.norm(grad))
            if gnorm <= 1e-12 * (1.0 + rho):
                break
            stp = step
            improved = False
            for _ in range(30):
                cand = v - stp * grad
                cval, _, _ = objective(cand, rho)
                if cval <= val - 0.25 * stp * gnorm * gnorm:
                    improved = True
                    break
                stp *= 0.5
            if not improved:
                break
            v = v - stp * grad
            iterations += 1
        rho *= 10.0
    # equality polish on the linearized constraint: min energy s.t. <r, v> fixed
    for _ in range(8):
        path = forward(v)
        gap = event.level - float(path[-1] @ event.normal)
        if r_fixed is not None:
            r = r_fixed
        else:
            r = _terminal_sensitivity(mode, model.k1, kc, coeffs, x0_path, path,
                                      grid, event.normal).reshape(n, m)
        rr = float(np.sum(r * r))
        if rr <= 0.0:
            break
        # current linearization: <n, x_T(v + dv)> ~ <n, x_T(v)> + <r, dv>;
        # the min-energy point on the affine constraint is proportional to r
        offset = float(np.sum(r * v)) + gap
        v = r * (offset / rr)
        if abs(gap) <= constraint_tol * scale:
            break
    path = forward(v)
    terminal = float(path[-1] @ event.normal)
    attained = terminal >= event.level - constraint_tol * scale
    ctrl = ControlPath(grid=grid, values=v)
    return RateSolution(
        v_star=ctrl, rate=ctrl.energy,
        residual=max(0.0, event.level - terminal),
        attained=attained, iterations=iterations,
        diagnostics={"terminal_value": terminal},
    )


@dataclass(frozen=True)
class TailCell:
    eps: float
    h: float
    n_hits: int
    p_hat: float | None
    normalized_decay: float | None
    censored: bool
    resolved: bool


@dataclass(frozen=True)
class TailProbeResult:
    mode: str
    cells: tuple
    rate_reference: float | None


def tail_probability_probe(model: Model, mode: str, event: Halfspace, eps_list,
                           n_particles: int, seed: int, grid: TimeGrid, xi=0.0,
                           h_beta: float = 0.25, kc: Kernel | None = None,
                           with_reference: bool = True,
                           seed_indices=None) -> TailProbeResult:
    """Crude Monte Carlo tail probabilities against the optimal-control rate.

    For each eps the event probability of the terminal state (ldp) or of the
    rescaled deviation with h(eps) = eps^-h_beta (mdp) is estimated on an
    independent seeded substream; cells with zero hits are reported censored,
    never as an infinite decay.  Rows carry -eps log p (ldp) or -log p / h^2
    (mdp) next to the minimize_rate_endpoint value.
    """
    if mode not in ("ldp", "mdp"):
        raise ValueError("mode must be 'ldp' or 'mdp'")
    if mode == "mdp" and not (0.0 < h_beta < 0.5):
        raise ValueError("h_beta must lie in (0, 1/2)")
    xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
    x0_path = None
    if mode == "mdp":
        x0_path = solve_deterministic_limit(model.k1, model.coeffs, xi_arr, grid,
                                            method="stepping")
    eps_sorted = sorted(float(e) for e in eps_list)
    if seed_indices is None:
        seed_indices = list(range(len(eps_sorted)))
    if len(seed_indices) != len(eps_sorted):
        raise ValueError("seed_indices must match eps_list in length")
    cells = []
    for idx, eps in zip(seed_indices, eps_sorted):
        cell_seed = _rng.derived_seed(seed, idx)
        ens = simulate_particles(model.k1, model.k2, model.coeffs, xi_arr, eps,
                                 grid, n_particles, cell_seed)
        terminal = ens.terminal()
        if mode == "mdp":
            h = eps ** (-h_beta)
            values = (terminal - x0_path[-1][None, :]) / (np.sqrt(eps) * h)
        else:
            h = 1.0
            values = terminal
        hits = int(np.count_nonzero(values @ event.normal >= event.level))
        if hits == 0:
            cells.append(TailCell(eps=eps, h=h, n_hits=0, p_hat=None,
                                  normalized_decay=None, censored=True, resolved=False))
            continue
        p_hat = hits / n_particles
        if mode == "mdp":
            decay = -float(np.log(p_hat)) / (h * h)
        else:
            decay = -eps * float(np.log(p_hat))
        cells.append(TailCell(eps=eps, h=h, n_hits=hits, p_hat=p_hat,
                              normalized_decay=decay, censored=False,
                              resolved=hits >= 50))
    reference = None
    if with_reference:
        reference = minimize_rate_endpoint(model, mode, event, grid, xi=xi_arr, kc=kc).rate
    return TailProbeResult(mode=mode, cells=tuple(cells), rate_reference=reference)
