"""Replicator adjustment dynamics, equilibrium search and local stability."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import AssumptionError, ConvergenceError
from .model import market_state, tangent_basis, uniform, validate_distribution
from .stability import payoff_jacobian_with_state
from .wages import solve_wages

log = logging.getLogger(__name__)

BOUNDARY_FLOOR = 1e-9
MARGINAL_BAND = 1e-8
VELOCITY_TOL = 1e-6
# thin regions need wages beyond the default absolute tolerance
WAGE_POLISH = 2


def _wages(config, x, w0=None):
    return solve_wages(config, x, w0=w0, polish_steps=WAGE_POLISH).w


def dynamics_field(config, x, w0=None):
    """Replicator velocity x_i (v_i - sum_j x_j v_j)."""
    x = np.asarray(x, dtype=float)
    v = market_state(config, x, _wages(config, x, w0)).v
    return x * (v - x @ v)


class _PayoffCache:
    """Warm-starts successive wage solves along one trajectory."""

    def __init__(self, config):
        self.config = config
        self.w = None

    def __call__(self, x):
        self.w = _wages(self.config, x, self.w)
        return market_state(self.config, x, self.w).v


def _softmax(y):
    e = np.exp(y - y.max())
    return e / e.sum()


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray  # shape (len(t), n)
    speed: np.ndarray | None  # ||x_dot|| at each stored time


def integrate(config, x0, t_end, rtol=1e-8, atol=1e-11, n_eval=None, with_speed=True):
    """Integrate the replicator dynamic from ``x0`` over [0, t_end].

    The state is carried as log-populations and mapped back through a
    softmax, which keeps every iterate on the simplex.
    """
    x0 = validate_distribution(x0, config.n, interior=True)
    payoff = _PayoffCache(config)

    def rhs(_, y):
        x = _softmax(y)
        v = payoff(x)
        return v - x @ v

    t_eval = None if n_eval is None else np.linspace(0.0, t_end, n_eval)
    sol = solve_ivp(rhs, (0.0, t_end), np.log(x0), method="RK45", rtol=rtol, atol=atol, t_eval=t_eval)
    if not sol.success:
        raise ConvergenceError(f"integration failed: {sol.message}")
    xs = np.array([_softmax(y) for y in sol.y.T])
    speed = np.array([np.linalg.norm(dynamics_field(config, x)) for x in xs]) if with_speed else None
    return Trajectory(sol.t, xs, speed)


@dataclass
class StabilityAssessment:
    label: str  # stable | unstable | marginal
    eigenvalues: np.ndarray  # tangent eigenvalues of the replicator Jacobian

    @property
    def real_parts(self):
        return np.sort(self.eigenvalues.real)


def replicator_jacobian(config, x, w=None):
    """Jacobian of the replicator field at ``x`` (full n x n)."""
    x = np.asarray(x, dtype=float)
    if w is None:
        w = _wages(config, x)
    state, V_x = payoff_jacobian_with_state(config, x, w)
    v = state.v
    vbar = x @ v
    n = x.size
    ones = np.ones(n)
    return np.diag(v - vbar) + x[:, None] * (V_x - np.outer(ones, v) - np.outer(ones, x @ V_x))


def assess_stability(config, x_star, w=None, band=MARGINAL_BAND):
    """Classify an equilibrium by the tangent-space spectrum of the replicator Jacobian."""
    J = replicator_jacobian(config, x_star, w)
    Q = tangent_basis(config.n)
    eig = np.linalg.eigvals(Q.T @ J @ Q)
    eig = eig[np.lexsort((eig.imag, eig.real))]
    re = eig.real
    if np.all(re < -band):
        label = "stable"
    elif np.any(re > band):
        label = "unstable"
    else:
        label = "marginal"
    return StabilityAssessment(label, eig)


@dataclass
class EquilibriumResult:
    x_star: np.ndarray
    v_star: float
    payoff_spread: float
    stable: bool
    tangent_eigenvalues: np.ndarray
    label: str
    converged: bool
    clamped: bool = False
    t_final: float = 0.0
    w_star: np.ndarray | None = None


def polish_equilibrium(config, x0, tol=1e-10, max_iter=50, w0=None):
    """Newton on payoff equalization {v_i = v_n, sum x = 1} in log-population coordinates.

    Returns (x, w, spread, converged).
    """
    y = np.log(np.asarray(x0, dtype=float))
    n = y.size
    w = w0
    best = None
    for _ in range(max_iter + 1):
        x = np.exp(y)
        try:
            w = _wages(config, x, w)
            state, V_x = payoff_jacobian_with_state(config, x, w)
        except (ConvergenceError, FloatingPointError, AssumptionError, np.linalg.LinAlgError):
            break
        v = state.v
        vbar = v.mean()
        spread = float(v.max() - v.min())
        F = np.empty(n)
        F[:-1] = (v[:-1] - v[-1]) / vbar
        F[-1] = x.sum() - 1.0
        if best is None or spread < best[2]:
            best = (x / x.sum(), w, spread)
        if spread <= tol * vbar and abs(F[-1]) < 1e-13:
            return x / x.sum(), w, spread, True
        J = np.empty((n, n))
        J[:-1] = (V_x[:-1] - V_x[-1]) * x[None, :] / vbar
        J[-1] = x
        try:
            dy = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            break
        # step cap in log space keeps Newton from jumping across the simplex
        scale = min(1.0, 0.5 / max(np.abs(dy).max(), 1e-300))
        y = y + scale * dy
    if best is None:
        return np.asarray(x0, dtype=float), None, np.inf, False
    return best[0], best[1], best[2], False


def find_equilibrium(config, x0, tol=1e-10, t_chunk=50.0, t_max=2e4, floor=BOUNDARY_FLOOR):
    """Run the dynamic from ``x0`` until it settles, then Newton-polish.

    The trajectory is advanced in chunks of ``t_chunk``; whenever the
    velocity norm is below 1e-6 a polish is attempted, and integration
    resumes if it fails. Populations below ``floor`` are clamped (and
    reported) between chunks; if two successive chunks clamp to the same
    point the search stops there, unconverged.
    """
    x = validate_distribution(x0, config.n, interior=True)
    t = 0.0
    clamped = False
    last_clamp = None
    stuck = False
    while True:
        speed = np.linalg.norm(dynamics_field(config, x))
        if speed < VELOCITY_TOL:
            xs, w, spread, ok = polish_equilibrium(config, x, tol=tol)
            if ok:
                return _result(config, xs, w, spread, True, clamped, t)
        if t >= t_max or stuck:
            xs, w, spread = x, None, None
            if not stuck:
                xs, w, spread, _ = polish_equilibrium(config, x, tol=tol)
            if w is None:
                xs, w = x, _wages(config, x)
                v = market_state(config, xs, w).v
                spread = float(v.max() - v.min())
            return _result(config, xs, w, spread, False, clamped, t)
        traj = integrate(config, x, t_chunk, with_speed=False)
        x = traj.x[-1]
        t += t_chunk
        if x.min() < floor:
            clamped = True
            x = np.maximum(x, floor)
            x = x / x.sum()
            stuck = last_clamp is not None and np.abs(x - last_clamp).max() < 1e-12
            last_clamp = x
        else:
            last_clamp = None


def _result(config, x, w, spread, converged, clamped, t):
    v = market_state(config, x, w).v
    assessment = assess_stability(config, x, w)
    return EquilibriumResult(
        x_star=x,
        v_star=float(v.mean()),
        payoff_spread=float(spread),
        stable=assessment.label == "stable",
        tangent_eigenvalues=assessment.eigenvalues,
        label=assessment.label,
        converged=converged,
        clamped=clamped,
        t_final=t,
        w_star=w,
    )


def default_starts(n):
    """Uniform, n vertex-biased and n edge-biased interior starts (2n + 1 total)."""
    starts = [uniform(n)]
    for i in range(n):
        x = np.full(n, 0.03 / (n - 1))
        x[i] = 0.97
        starts.append(x)
    for i in range(n):
        j = (i + 1) % n
        if n == 2:
            x = np.array([0.5, 0.5])
        else:
            x = np.full(n, 0.03 / (n - 2))
            x[i] = x[j] = 0.485
        starts.append(x)
    return starts


def multistart_equilibria(config, starts=None, tol=1e-10, dedup=1e-6):
    """Equilibria reached from a fixed set of starts, de-duplicated in start order."""
    starts = default_starts(config.n) if starts is None else starts
    found = []
    for x0 in starts:
        res = find_equilibrium(config, x0, tol=tol)
        if all(np.abs(res.x_star - other.x_star).max() > dedup for other in found):
            found.append(res)
    return found
