"""Market-clearing wages: excess demand, the normalized solve and dw/dx."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionError, ConvergenceError
from .model import ModelConfig, market_state

log = logging.getLogger(__name__)

NEWTON_SWITCH = 1e-4


@dataclass
class WageSolution:
    """Normalized market-clearing wages.

    ``support`` marks populated regions; wages of empty regions are reported
    as NaN (conceptually infinite).
    """

    w: np.ndarray
    residual: float
    iterations: int
    converged: bool
    support: np.ndarray = field(default=None)

    @property
    def has_empty_regions(self):
        return self.support is not None and not bool(np.all(self.support))


def excess_demand(config, x, w):
    """Excess demand for each region's labor, scaled by 1/w_i.

    Homogeneous of degree zero in ``w`` and satisfies w @ excess = 0.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(x <= 0):
        raise AssumptionError("excess demand needs a strictly interior distribution")
    state = market_state(config, x, w)
    y = w * x
    out = (state.M @ y - y) / w
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.isfinite(out))[0])
        raise FloatingPointError(f"non-finite excess demand in region {bad + 1}")
    return out


def _log_wage_newton_matrix(sigma, M, y, demand, drop=-1):
    # d z / d log w with z_i = y_i - sum_k m_ik y_k; row ``drop`` is replaced
    # by the normalization sum_i y_i = 1
    J = np.diag(y - (1.0 - sigma) * demand) + (1.0 - sigma) * (M * y) @ M.T - M * y[None, :]
    J[drop, :] = y
    return J


def _newton_step(sigma, M, y, demand, w):
    # The dropped equation holds only through Walras' law, so its scaled
    # residual inherits roundoff times w_max / w_k; drop the richest region.
    k = int(np.argmax(w))
    rhs = y - demand
    rhs[k] = y.sum() - 1.0
    return np.linalg.solve(_log_wage_newton_matrix(sigma, M, y, demand, k), -rhs)


def solve_wages(
    config, x, tol=1e-12, max_iter=10000, w0=None, damping=0.5, allow_empty=False, polish_steps=0
):
    """Unique wage vector clearing all markets with total income one.

    Damped multiplicative fixed-point steps w <- w (demand/income)^(damping/sigma),
    renormalized every step, hand over to Newton on log wages once the
    max-norm residual drops below 1e-4.

    ``polish_steps`` extra Newton steps are taken after the tolerance is met.
    Thinly populated regions need them: the absolute residual is tiny there
    long before their wage is accurate.

    A distribution with empty regions is rejected unless ``allow_empty``, in
    which case the populated sub-economy is solved and empty regions get NaN.
    """
    x = np.asarray(x, dtype=float)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if np.any(x < 0):
        raise AssumptionError("spatial distribution must be non-negative")
    support = x > 0
    if not np.all(support):
        if not allow_empty:
            raise AssumptionError(
                "wages diverge in empty regions; pass allow_empty=True to solve the populated subset"
            )
        if support.sum() < 1:
            raise AssumptionError("no populated region")
        idx = np.flatnonzero(support)
        w_full = np.full(x.size, np.nan)
        if idx.size == 1:
            w_full[idx] = 1.0 / x[idx]
            return WageSolution(w_full, 0.0, 0, True, support)
        sub = ModelConfig(
            config.sigma,
            config.phi[np.ix_(idx, idx)],
            config.psi[np.ix_(idx, idx)],
            check_cpd=False,
        )
        sub_w0 = None if w0 is None else np.asarray(w0, dtype=float)[idx]
        sol = solve_wages(
            sub, x[idx], tol=tol, max_iter=max_iter, w0=sub_w0, damping=damping, polish_steps=polish_steps
        )
        w_full[idx] = sol.w
        return WageSolution(w_full, sol.residual, sol.iterations, sol.converged, support)

    sigma = config.sigma
    u = np.zeros(x.size) if w0 is None else np.log(np.asarray(w0, dtype=float))
    u -= np.log(np.exp(u) @ x)
    step = damping
    prev_res = np.inf
    res = np.inf
    for it in range(max_iter + 1):
        w = np.exp(u)
        state = market_state(config, x, w)
        y = w * x
        demand = state.M @ y
        res = float(np.max(np.abs((demand - y) / w)))
        if not np.isfinite(res):
            raise ConvergenceError("wage iteration produced non-finite values", last=w)
        if res <= tol:
            if polish_steps:
                w, res = _newton_polish(config, x, u, polish_steps)
            return WageSolution(w, res, it, True, support)
        if it == max_iter:
            break
        if res < NEWTON_SWITCH and res <= prev_res:
            try:
                du = _newton_step(sigma, state.M, y, demand, w)
            except np.linalg.LinAlgError:
                du = step / sigma * np.log(demand / y)
            u = u + du
        else:
            if res > prev_res:
                step = max(step * 0.5, 1e-3)
            u = u + step / sigma * np.log(demand / y)
        u -= np.log(np.exp(u) @ x)
        prev_res = res
    raise ConvergenceError(
        f"wage solve did not converge in {max_iter} iterations (residual {res:.3e})",
        last=WageSolution(np.exp(u), res, max_iter, False, support),
    )


def _newton_polish(config, x, u, steps):
    for _ in range(steps):
        w = np.exp(u)
        state = market_state(config, x, w)
        y = w * x
        demand = state.M @ y
        try:
            du = _newton_step(config.sigma, state.M, y, demand, w)
        except np.linalg.LinAlgError:
            break
        with np.errstate(over="ignore", invalid="ignore"):
            trial = u + du
            trial -= np.log(np.exp(trial) @ x)
        # an ill-conditioned step can overshoot on a nearly empty region; keep what we had
        if not np.all(np.isfinite(trial)):
            break
        u = trial
    w = np.exp(u)
    return w, float(np.max(np.abs(excess_demand(config, x, w))))


def wage_jacobian(config, x, w):
    """Derivative of normalized market wages with respect to x.

    Implicit-function derivative of the clearing conditions, with one
    (redundant, by Walras) clearing equation swapped for the normalization.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    sigma = config.sigma
    state = market_state(config, x, w)
    M = state.M
    y = w * x
    demand = M @ y
    G = config.psi / state.a[:, None]
    J_u = _log_wage_newton_matrix(sigma, M, y, demand)
    J_x = (
        np.diag(w)
        - M * w[None, :]
        - (sigma - 1.0) * (demand[:, None] * G - (M * y) @ M.T @ G)
    )
    J_x[-1, :] = w
    # row-equilibrate first: rows scale with regional income, which can be tiny
    if np.linalg.cond(J_u / np.abs(J_u).max(axis=1, keepdims=True)) > 1e12:
        raise np.linalg.LinAlgError("wage system Jacobian is singular; is w market-clearing at x?")
    du_dx = -np.linalg.solve(J_u, J_x)
    return w[:, None] * du_dx
