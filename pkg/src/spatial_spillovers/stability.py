"""Linear stability of the uniform distribution.

Closed-form spectra for circulant / block-circulant networks, payoff
Jacobians (analytic and finite-difference), break points and (phi, psi)
stability grids.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .errors import AssumptionError
from .model import market_state, tangent_basis, uniform
from .wages import solve_wages, wage_jacobian

log = logging.getLogger(__name__)

STRUCTURE_TOL = 1e-12
TIE_TOL = 1e-12


class GainValue(NamedTuple):
    Omega: float
    Omega_sharp: float
    Omega_flat: float


def gain_function(s, t, sigma):
    """Eigenvalue of the payoff-elasticity matrix for trade index ``s`` and spillover index ``t``."""
    if sigma <= 1:
        raise AssumptionError("sigma must exceed 1")
    sharp = -(1.0 - s) + ((sigma - 1.0) + sigma * s) * t
    flat = sigma + (sigma - 1.0) * s
    return GainValue(sharp / flat, sharp, flat)


@dataclass(frozen=True)
class ForceDecomposition:
    """Two-region elasticities of the payoff gap.

    ``omega_a``/``omega_w``: payoff elasticity w.r.t. productivity / wage;
    ``alpha_x``/``beta_x``: productivity / wage elasticity w.r.t. migration.
    """

    omega_a: float
    omega_w: float
    alpha_x: float
    beta_x: float
    omega: float
    chi: float
    lam: float


def decompose_net_force(phi, psi, sigma):
    chi = (1.0 - phi) / (1.0 + phi)
    lam = (1.0 - psi) / (1.0 + psi)
    beta = ((sigma - 1.0) * (1.0 + chi) * lam - 1.0) / (sigma + (sigma - 1.0) * chi)
    omega_a, omega_w = chi, 1.0 - chi
    return ForceDecomposition(
        omega_a=omega_a,
        omega_w=omega_w,
        alpha_x=lam,
        beta_x=beta,
        omega=omega_a * lam + omega_w * beta,
        chi=chi,
        lam=lam,
    )


# --- structured spectra -------------------------------------------------------


def row_normalized(mat):
    mat = np.asarray(mat, dtype=float)
    return mat / mat.sum(axis=1, keepdims=True)


def is_circulant(mat, tol=STRUCTURE_TOL):
    mat = np.asarray(mat, dtype=float)
    row = mat[0]
    return all(np.allclose(mat[k], np.roll(row, k), atol=tol, rtol=0) for k in range(mat.shape[0]))


def is_bccb(mat, block, tol=STRUCTURE_TOL):
    """Block circulant with circulant ``block`` x ``block`` blocks."""
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[0]
    if block < 2 or n % block or n == block:
        return False
    p = n // block
    blocks = [[mat[i * block:(i + 1) * block, j * block:(j + 1) * block] for j in range(p)] for i in range(p)]
    for i in range(p):
        for j in range(p):
            if not np.allclose(blocks[i][j], blocks[0][(j - i) % p], atol=tol, rtol=0):
                return False
            if not is_circulant(blocks[i][j], tol):
                return False
    return True


def _real_fourier(p):
    """Real Fourier basis of R^p as (vector, frequency) pairs, constant first.

    Cosine modes come before sine modes, so for p = 4 the order is
    constant, (1,0,-1,0), (1,-1,1,-1), (0,1,0,-1).
    """
    j = np.arange(p)
    out = [(np.ones(p), 0)]
    for k in range(1, p // 2 + 1):
        out.append((np.round(np.cos(2 * np.pi * k * j / p), 15), k))
    for k in range(1, (p + 1) // 2):
        out.append((np.round(np.sin(2 * np.pi * k * j / p), 15), k))
    return out


def structured_basis(n, structure, block=None):
    """Zero-sum real eigenvectors shared by every matrix of the given structure.

    Returns ``(patterns, groups)`` where patterns are unit vectors and
    ``groups`` labels the Fourier frequency; same-group patterns are
    rotations of one another and always share an eigenvalue.
    """
    if structure == "circulant":
        basis = _real_fourier(n)[1:]
        pats = [v for v, _ in basis]
        groups = [(k,) for _, k in basis]
    elif structure == "bccb":
        outer = _real_fourier(n // block)
        inner = _real_fourier(block)
        combos = (
            [(o, inner[0]) for o in outer[1:]]
            + [(outer[0], i) for i in inner[1:]]
            + [(o, i) for o in outer[1:] for i in inner[1:]]
        )
        pats = [np.kron(o[0], i[0]) for o, i in combos]
        groups = [(o[1], i[1]) for o, i in combos]
    else:
        raise ValueError(f"unknown structure {structure!r}")
    pats = [v / np.linalg.norm(v) for v in pats]
    return pats, groups


class Spectrum(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: list
    groups: list
    structure: str


def _check_eigen(mat, pats, tol=1e-10):
    for z in pats:
        mu = z @ mat @ z
        if np.linalg.norm(mat @ z - mu * z) > tol:
            return False
    return True


def proximity_spectrum(matrix, structure_hint="circulant", block=2):
    """Tangent eigenpairs of the row-normalized ``matrix``.

    Circulant and BCCB hints use the Fourier closed form; if the matrix does
    not have the hinted structure a warning is issued and the dense path is
    used instead.
    """
    bar = row_normalized(matrix)
    n = bar.shape[0]
    if structure_hint in ("circulant", "bccb"):
        ok = is_circulant(bar) if structure_hint == "circulant" else is_bccb(bar, block)
        if ok:
            pats, groups = structured_basis(n, structure_hint, block)
            eig = np.array([z @ bar @ z for z in pats])
            return Spectrum(eig, pats, groups, structure_hint)
        warnings.warn(
            f"matrix is not {structure_hint} within {STRUCTURE_TOL:g}; using the dense eigensolver",
            stacklevel=2,
        )
    elif structure_hint != "general-symmetric":
        raise ValueError(f"unknown structure hint {structure_hint!r}")
    Q = tangent_basis(n)
    proj = Q.T @ bar @ Q
    if np.allclose(proj, proj.T, atol=1e-12, rtol=0):
        eig, U = np.linalg.eigh(0.5 * (proj + proj.T))
    else:
        eig, U = np.linalg.eig(proj)
        order = np.argsort(eig.real)
        eig, U = eig.real[order], U.real[:, order]
    pats = [_canonical_sign(Q @ U[:, k]) for k in range(n - 1)]
    return Spectrum(np.asarray(eig), pats, [(k,) for k in range(n - 1)], "general")


def _canonical_sign(z):
    z = z / np.linalg.norm(z)
    nz = np.flatnonzero(np.abs(z) > 1e-12)
    if nz.size and z[nz[0]] < 0:
        z = -z
    return z


def common_structure(config):
    """Shared structure of both row-normalized matrices, as (name, block) or None."""
    D, G = row_normalized(config.phi), row_normalized(config.psi)
    if is_circulant(D) and is_circulant(G):
        return "circulant", None
    n = config.n
    for b in range(2, n // 2 + 1):
        if n % b == 0 and is_bccb(D, b) and is_bccb(G, b):
            return "bccb", b
    return None


# --- payoff Jacobians ---------------------------------------------------------


def payoff_jacobian(config, x, method="analytic", w=None, h=1e-6):
    """Jacobian of equilibrium payoffs v(x) with respect to x (full R^n)."""
    x = np.asarray(x, dtype=float)
    if method == "analytic":
        if w is None:
            w = solve_wages(config, x).w
        return _analytic_payoff_jacobian(config, x, w)
    if method == "finite-difference":
        if np.any(x - h <= 0):
            raise FloatingPointError(
                f"finite-difference step {h:g} leaves the positive orthant at x_min={x.min():.3e}"
            )
        w0 = solve_wages(config, x).w if w is None else w
        cols = []
        for j in range(x.size):
            e = np.zeros(x.size)
            e[j] = h
            vp = payoffs(config, x + e, w0)
            vm = payoffs(config, x - e, w0)
            cols.append((vp - vm) / (2 * h))
        return np.column_stack(cols)
    raise ValueError(f"unknown method {method!r}")


def payoffs(config, x, w0=None):
    """Equilibrium payoff vector v(x) (wages solved, then w / P)."""
    sol = solve_wages(config, x, w0=w0)
    return market_state(config, x, sol.w).v


def _analytic_payoff_jacobian(config, x, w):
    return payoff_jacobian_with_state(config, x, w)[1]


def payoff_jacobian_with_state(config, x, w):
    """(state, V_x) at a solved (x, w); shared by dynamics and continuation."""
    state = market_state(config, x, w)
    W_x = wage_jacobian(config, x, w)
    Mt = state.M.T
    inner = Mt @ (config.psi / state.a[:, None]) + (np.eye(x.size) - Mt) @ (W_x / w[:, None])
    return state, state.v[:, None] * inner


def payoff_elasticity(config, method="analytic"):
    """(x_bar / v_bar) times the payoff Jacobian at the uniform distribution."""
    n = config.n
    xbar = uniform(n)
    sol = solve_wages(config, xbar)
    v = market_state(config, xbar, sol.w).v
    V_x = payoff_jacobian(config, xbar, method=method, w=sol.w)
    return (1.0 / n) / v.mean() * V_x


# --- uniform-state eigen report -----------------------------------------------


@dataclass
class EigenReport:
    """Tangent eigenpairs of the payoff-elasticity matrix at the uniform state.

    ``critical_pattern`` is the eigenvector of the largest eigenvalue; when
    several structurally distinct modes tie, it is their normalized sum.
    """

    eigenvalues: np.ndarray
    eigenvectors: list
    omega_star: float
    critical_pattern: np.ndarray
    critical_modes: list
    chi: np.ndarray
    lam: np.ndarray
    groups: list
    method: str

    @property
    def critical_index(self):
        """1-based index of the leading mode (first one on ties)."""
        return self.critical_modes[0] + 1

    @property
    def stable(self):
        return self.omega_star < 0


def uniform_stability(config, path="auto", jacobian="analytic"):
    """Eigen report for the uniform distribution.

    ``path="auto"`` uses the shared Fourier basis when both matrices are
    circulant or BCCB, otherwise it eigen-decomposes the numerical payoff
    elasticity at the uniform state and pairs chi/lambda by Rayleigh quotient.
    """
    structure = common_structure(config) if path == "auto" else None
    sigma = config.sigma
    Dbar, Gbar = row_normalized(config.phi), row_normalized(config.psi)
    if structure is not None:
        kind, block = structure
        pats, groups = structured_basis(config.n, kind, block)
        if not (_check_eigen(Dbar, pats) and _check_eigen(Gbar, pats)):
            raise AssertionError("structured basis failed to diagonalize the network matrices")
        chi = np.array([z @ Dbar @ z for z in pats])
        lam = np.array([z @ Gbar @ z for z in pats])
        omegas = gain_function(chi, lam, sigma).Omega
        method = kind
    else:
        V = payoff_elasticity(config, method=jacobian)
        Q = tangent_basis(config.n)
        proj = Q.T @ V @ Q
        if np.allclose(proj, proj.T, atol=1e-9, rtol=0):
            omegas, U = np.linalg.eigh(0.5 * (proj + proj.T))
        else:
            omegas, U = np.linalg.eig(proj)
            order = np.argsort(omegas.real)
            omegas, U = omegas.real[order], U.real[:, order]
        pats = [_canonical_sign(Q @ U[:, k]) for k in range(config.n - 1)]
        groups = [(k,) for k in range(config.n - 1)]
        chi = np.array([z @ Dbar @ z for z in pats])
        lam = np.array([z @ Gbar @ z for z in pats])
        method = "general"
    omegas = np.asarray(omegas, dtype=float)
    top = float(omegas.max())
    tied = [k for k in range(omegas.size) if top - omegas[k] <= TIE_TOL * max(1.0, abs(top))]
    reps, seen = [], set()
    for k in tied:
        if groups[k] not in seen:
            seen.add(groups[k])
            reps.append(k)
    crit = sum(pats[k] for k in reps)
    crit = _canonical_sign(crit)
    return EigenReport(
        eigenvalues=omegas,
        eigenvectors=pats,
        omega_star=top,
        critical_pattern=crit,
        critical_modes=reps,
        chi=chi,
        lam=lam,
        groups=groups,
        method=method,
    )


# --- thresholds ---------------------------------------------------------------


@dataclass
class ThresholdResult:
    """Critical parameter values where the uniform state changes stability.

    ``values`` is empty when no crossing exists; ``reason`` then says why
    (``"black-hole"`` when the uniform state is unstable over the whole
    range, ``"always-stable"`` when it is stable throughout, ``"no-sign-change"``
    otherwise).
    """

    values: list
    reason: str | None = None
    closed_form: bool = False


def two_region_phi_star(psi, sigma):
    return (2 * sigma - 1) * (1 - psi) / (3 + psi)


def two_region_psi_star(phi, sigma):
    chi = (1 - phi) / (1 + phi)
    lam = (1 - chi) / ((sigma - 1) + sigma * chi)
    return (1 - lam) / (1 + lam)


def critical_threshold(family, free="phi", lo=1e-3, hi=1 - 1e-3, scan=512, tol=1e-10, closed_form=True, jacobian=None):
    """Break points of the uniform state along one freeness parameter.

    The symmetric two-region family has closed forms; every other family is
    scanned on ``scan`` points with root refinement on each sign change of
    omega*. ``jacobian`` forces the numerical eigen path with the given
    payoff-Jacobian method.
    """
    if free not in ("phi", "psi"):
        raise ValueError("free parameter must be 'phi' or 'psi'")
    if closed_form and jacobian is None and family.kind == "two-region":
        sigma = family.sigma
        if free == "phi":
            val = two_region_phi_star(family.psi, sigma)
            if val >= 1:
                return ThresholdResult([], "black-hole", True)
            return ThresholdResult([val], None, True)
        chi = (1 - family.phi) / (1 + family.phi)
        lam = (1 - chi) / ((sigma - 1) + sigma * chi)
        if lam >= 1:
            return ThresholdResult([], "always-unstable-in-psi", True)
        return ThresholdResult([two_region_psi_star(family.phi, sigma)], None, True)

    def omega_star(p):
        cfg = family.config(**{free: p})
        if jacobian is None:
            return uniform_stability(cfg).omega_star
        return uniform_stability(cfg, path="general", jacobian=jacobian).omega_star

    roots, values = _scan_roots(omega_star, lo, hi, scan, tol)
    if roots:
        return ThresholdResult(roots)
    if np.all(values > 0):
        return ThresholdResult([], "black-hole")
    if np.all(values < 0):
        return ThresholdResult([], "always-stable")
    return ThresholdResult([], "no-sign-change")


def _scan_roots(fn, lo, hi, scan, tol):
    grid = np.linspace(lo, hi, scan)
    values = np.array([fn(p) for p in grid])
    roots = []
    for k in range(scan - 1):
        a, b = values[k], values[k + 1]
        if a == 0.0:
            roots.append(float(grid[k]))
        elif a * b < 0:
            roots.append(float(brentq(fn, grid[k], grid[k + 1], xtol=tol, rtol=4 * np.finfo(float).eps)))
    if values[-1] == 0.0:
        roots.append(float(grid[-1]))
    return roots, values


@dataclass
class ModeThreshold:
    mode: int
    pattern: np.ndarray
    value: float


def mode_thresholds(family, free="phi", lo=1e-3, hi=1 - 1e-3, scan=512, tol=1e-10):
    """Zeros of every individual tangent eigenvalue (one per symmetry class of modes).

    Only for families with circulant or BCCB structure, where the modes are
    parameter-independent Fourier patterns.
    """
    probe = family.config()
    structure = common_structure(probe)
    if structure is None:
        raise AssumptionError("mode thresholds need circulant or BCCB networks")
    kind, block = structure
    pats, groups = structured_basis(probe.n, kind, block)
    out, seen = [], set()
    for k, z in enumerate(pats):
        if groups[k] in seen:
            continue
        seen.add(groups[k])

        def omega_k(p, z=z):
            cfg = family.config(**{free: p})
            chi = z @ row_normalized(cfg.phi) @ z
            lam = z @ row_normalized(cfg.psi) @ z
            return gain_function(chi, lam, cfg.sigma).Omega

        roots, _ = _scan_roots(omega_k, lo, hi, scan, tol)
        out.extend(ModeThreshold(k, z, r) for r in roots)
    out.sort(key=lambda t: (t.value, t.mode))
    return out


# --- grids --------------------------------------------------------------------


@dataclass
class StabilityGrid:
    """omega* over a (phi, psi) grid; arrays are indexed [phi, psi].

    Cells violating the family's assumptions hold NaN and pattern index -1.
    """

    phi_values: np.ndarray
    psi_values: np.ndarray
    omega_star: np.ndarray
    stable_mask: np.ndarray
    critical_pattern_index: np.ndarray


def stability_grid(family, phi_values, psi_values):
    phi_values = np.asarray(phi_values, dtype=float)
    psi_values = np.asarray(psi_values, dtype=float)
    for name, vals in (("phi", phi_values), ("psi", psi_values)):
        if np.any(vals <= 0) or np.any(vals >= 1):
            raise AssumptionError(f"{name} grid must lie inside (0, 1)")
        if vals.size > 1 and np.any(np.diff(vals) <= 0):
            raise AssumptionError(f"{name} grid must be strictly increasing")
    omega = np.full((phi_values.size, psi_values.size), np.nan)
    pattern = np.full(omega.shape, -1, dtype=int)
    for i, ph in enumerate(phi_values):
        for j, ps in enumerate(psi_values):
            try:
                cfg = family.config(phi=float(ph), psi=float(ps))
            except AssumptionError:
                continue
            rep = uniform_stability(cfg)
            omega[i, j] = rep.omega_star
            pattern[i, j] = rep.critical_index
    return StabilityGrid(phi_values, psi_values, omega, omega < 0, pattern)
