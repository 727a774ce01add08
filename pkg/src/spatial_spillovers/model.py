"""Economy primitives: proximity and externality matrices, prices, trade shares.

Everything here is a pure function of a :class:`ModelConfig`, a spatial
distribution ``x`` and (where needed) a wage vector ``w``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AssumptionError

SIMPLEX_ATOL = 1e-12
CPD_TOL = 1e-10

GEOGRAPHY_KINDS = ("two-region", "racetrack4", "custom")
EXTERNALITY_KINDS = ("two-region", "baseline4", "equidistant4", "block4", "bypass4", "custom")


def tangent_basis(n):
    """Orthonormal basis (columns) of the zero-sum subspace of R^n.

    Helmert construction, so the result is deterministic.
    """
    Q = np.zeros((n, n - 1))
    for k in range(1, n):
        col = np.zeros(n)
        col[:k] = 1.0
        col[k] = -k
        Q[:, k - 1] = col / np.sqrt(k * (k + 1))
    return Q


def cpd_margin(psi):
    """Smallest eigenvalue of the symmetric part of ``psi`` on zero-sum vectors."""
    psi = np.asarray(psi, dtype=float)
    Q = tangent_basis(psi.shape[0])
    S = 0.5 * (psi + psi.T)
    return float(np.linalg.eigvalsh(Q.T @ S @ Q).min())


def _square(mat, name):
    mat = np.array(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] < 2:
        raise AssumptionError(f"{name} must be a square matrix of size n >= 2, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise AssumptionError(f"{name} has non-finite entries")
    return mat


def validate_proximity(phi):
    phi = _square(phi, "proximity matrix")
    if not np.allclose(np.diag(phi), 1.0, rtol=0, atol=1e-14):
        raise AssumptionError("proximity matrix: diagonal entries phi_ii must equal 1")
    if np.any(phi <= 0) or np.any(phi > 1):
        raise AssumptionError("proximity matrix: entries must satisfy 0 < phi_ij <= 1")
    return phi


def validate_externality(psi, check_cpd=True):
    psi = _square(psi, "externality matrix")
    if not np.allclose(np.diag(psi), 1.0, rtol=0, atol=1e-14):
        raise AssumptionError("externality matrix: diagonal entries psi_ii must equal 1")
    if np.any(psi <= 0) or np.any(psi > 1):
        raise AssumptionError("externality matrix: entries must satisfy 0 < psi_ij <= 1")
    if check_cpd:
        margin = cpd_margin(psi)
        if margin <= CPD_TOL:
            raise AssumptionError(
                "externality matrix: conditional positive definiteness fails on zero-sum "
                f"vectors (min projected eigenvalue {margin:.3e} <= {CPD_TOL:g})"
            )
    return psi


def validate_distribution(x, n=None, interior=False):
    """Check ``x`` lies on the unit simplex and return it as a float array."""
    x = np.array(x, dtype=float)
    if x.ndim != 1:
        raise AssumptionError("spatial distribution must be a vector")
    if n is not None and x.shape[0] != n:
        raise AssumptionError(f"spatial distribution has length {x.shape[0]}, expected {n}")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise AssumptionError("spatial distribution: entries must be non-negative")
    if abs(x.sum() - 1.0) > SIMPLEX_ATOL:
        raise AssumptionError(f"spatial distribution must sum to 1 (sum is {x.sum():.17g})")
    if interior and np.any(x <= 0):
        raise AssumptionError("spatial distribution must be strictly interior (all x_i > 0)")
    return x


def uniform(n):
    return np.full(n, 1.0 / n)


@dataclass(frozen=True, eq=False)
class ModelConfig:
    """Full parameterization of one economy.

    ``phi`` is the trade-freeness (proximity) matrix, ``psi`` the externality
    matrix and ``sigma`` the elasticity of substitution.
    """

    sigma: float
    phi: np.ndarray
    psi: np.ndarray
    check_cpd: bool = True

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma <= 1:
            raise AssumptionError(f"sigma must exceed 1, got {self.sigma}")
        phi = validate_proximity(self.phi)
        psi = validate_externality(self.psi, check_cpd=self.check_cpd)
        if phi.shape != psi.shape:
            raise AssumptionError(
                f"proximity {phi.shape} and externality {psi.shape} matrices differ in size"
            )
        phi.setflags(write=False)
        psi.setflags(write=False)
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", psi)

    @property
    def n(self):
        return self.phi.shape[0]

    def permuted(self, perm):
        """Relabel regions so that new region ``k`` is old region ``perm[k]``."""
        perm = np.asarray(perm)
        return ModelConfig(
            self.sigma,
            self.phi[np.ix_(perm, perm)],
            self.psi[np.ix_(perm, perm)],
            check_cpd=self.check_cpd,
        )


def _check_unit_scalar(value, name):
    value = float(value)
    if not (0 < value <= 1):
        raise AssumptionError(f"{name} must lie in (0, 1], got {value}")
    return value


def build_geography(kind, phi):
    """Proximity matrix for a named geography, or a validated custom matrix."""
    if kind == "custom":
        return validate_proximity(phi)
    phi = _check_unit_scalar(phi, "phi")
    if kind == "two-region":
        return np.array([[1.0, phi], [phi, 1.0]])
    if kind == "racetrack4":
        return _circulant([1.0, phi, phi**2, phi])
    raise AssumptionError(f"unknown geography kind {kind!r}; expected one of {GEOGRAPHY_KINDS}")


def build_externality(kind, psi, psi_prime=None):
    """Externality matrix for a named network.

    ``block4`` is the Kronecker product of a 2x2 super-region matrix (off
    diagonal ``psi_prime``) with a 2x2 intra-block matrix (off diagonal
    ``psi``); ``bypass4`` puts ``psi_prime`` on antipodal pairs.
    """
    if kind == "custom":
        return validate_externality(psi)
    psi = _check_unit_scalar(psi, "psi")
    if kind == "two-region":
        out = np.array([[1.0, psi], [psi, 1.0]])
    elif kind == "baseline4":
        out = _circulant([1.0, psi, psi**2, psi])
    elif kind == "equidistant4":
        out = _circulant([1.0, psi, psi, psi])
    elif kind == "block4":
        psi_prime = _require(psi_prime, "block4")
        if psi_prime > psi:
            raise AssumptionError(f"block4 requires psi_prime <= psi, got {psi_prime} > {psi}")
        out = np.kron([[1.0, psi_prime], [psi_prime, 1.0]], [[1.0, psi], [psi, 1.0]])
    elif kind == "bypass4":
        psi_prime = _require(psi_prime, "bypass4")
        if psi_prime <= 2 * psi - 1:
            raise AssumptionError(
                f"bypass4 requires psi_prime > 2*psi - 1 (conditional positive definiteness); "
                f"got psi_prime={psi_prime}, psi={psi}"
            )
        out = _circulant([1.0, psi, psi_prime, psi])
    else:
        raise AssumptionError(
            f"unknown externality kind {kind!r}; expected one of {EXTERNALITY_KINDS}"
        )
    return validate_externality(out)


def _require(psi_prime, kind):
    if psi_prime is None:
        raise AssumptionError(f"{kind} requires psi_prime")
    return _check_unit_scalar(psi_prime, "psi_prime")


def _circulant(first_row):
    row = np.asarray(first_row, dtype=float)
    return np.array([np.roll(row, k) for k in range(row.size)])


def productivity(psi, x):
    """Regional productivity a = psi @ x."""
    return np.asarray(psi, dtype=float) @ np.asarray(x, dtype=float)


@dataclass(frozen=True, eq=False)
class MarketState:
    """Prices and shares implied by (x, w).

    ``M[i, j]`` is the share of region j's expenditure spent on region i's
    variety, so each column of ``M`` sums to one.
    """

    a: np.ndarray
    w: np.ndarray
    P: np.ndarray
    v: np.ndarray
    M: np.ndarray


def market_state(config, x, w):
    """Productivity, price indices, trade shares and payoffs at (x, w).

    Computed in log space; raises ``FloatingPointError`` naming the first
    offending region if anything comes out non-finite.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise AssumptionError("wages must be strictly positive")
    s = config.sigma
    a = productivity(config.psi, x)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        log_k = ((s - 1.0) * (np.log(a) - np.log(w)))[:, None] + np.log(config.phi)
        # column-wise log-sum-exp; scipy's version is slow for tiny inputs
        top = log_k.max(axis=0)
        E = np.exp(log_k - top)
        col = E.sum(axis=0)
        log_den = top + np.log(col)
        M = E / col
        log_P = log_den / (1.0 - s)
        P = np.exp(log_P)
        v = w / P
    for name, arr in (("P", P), ("v", v)):
        bad = np.flatnonzero(~np.isfinite(arr) | (arr <= 0))
        if bad.size:
            raise FloatingPointError(f"non-finite {name} in region {int(bad[0]) + 1}")
    if not np.all(np.isfinite(M)):
        bad = np.argwhere(~np.isfinite(M))[0]
        raise FloatingPointError(f"non-finite trade share for regions {bad[0] + 1}->{bad[1] + 1}")
    return MarketState(a=a, w=w, P=P, v=v, M=M)


def trade_flows(state, x):
    """Value shipped from i to j: Q_ij = m_ij w_j x_j."""
    return state.M * (state.w * np.asarray(x, dtype=float))[None, :]
