import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spatial_spillovers import (
    Family,
    ModelConfig,
    assess_stability,
    dynamics_field,
    find_equilibrium,
    integrate,
    market_state,
    multistart_equilibria,
    solve_wages,
    uniform_stability,
)
from spatial_spillovers.dynamics import default_starts

from conftest import NAMED, random_interior


def test_field_vanishes_at_uniform():
    for fam in NAMED.values():
        cfg = fam.config()
        assert np.abs(dynamics_field(cfg, np.full(cfg.n, 1 / cfg.n))).max() < 1e-12


@given(name=st.sampled_from(sorted(NAMED)), seed=st.integers(0, 2**32 - 1))
def test_field_points_uphill(name, seed):
    rng = np.random.default_rng(seed)
    cfg = NAMED[name].config()
    x = random_interior(rng, cfg.n, low=0.02)
    v = market_state(cfg, x, solve_wages(cfg, x).w).v
    f = dynamics_field(cfg, x)
    assert abs(f.sum()) < 1e-14
    if v.max() - v.min() > 1e-9:
        assert v @ f > 0


@pytest.mark.parametrize("name", ["baseline4", "bypass4", "block4"])
def test_field_equivariance(name, rng):
    cfg = NAMED[name].config()
    x = random_interior(rng, 4)
    perm = np.array([2, 0, 3, 1])
    np.testing.assert_allclose(dynamics_field(cfg.permuted(perm), x[perm]), dynamics_field(cfg, x)[perm], atol=1e-14)


def test_disperses_when_trade_is_free():
    cfg = Family("two-region", phi=0.9, psi=0.9).config()
    res = find_equilibrium(cfg, [0.6, 0.4])
    assert res.converged and res.stable
    np.testing.assert_allclose(res.x_star, [0.5, 0.5], atol=1e-9)
    assert res.payoff_spread <= 1e-10 * res.v_star


def test_agglomerates_near_autarky():
    cfg = Family("two-region", phi=0.05, psi=0.05).config()
    res = find_equilibrium(cfg, [0.6, 0.4])
    assert res.x_star.max() > 0.99
    assert res.converged


def test_uniform_classification_examples():
    for phi, label in ((0.5, "stable"), (0.2, "unstable")):
        cfg = Family("two-region", phi=phi, psi=0.8).config()
        assert assess_stability(cfg, [0.5, 0.5]).label == label


def test_frictionless_eigenvalues():
    n, sigma = 4, 4.0
    eps = 1e-9
    cfg = ModelConfig(sigma, np.full((n, n), 1 - eps) + eps * np.eye(n), np.full((n, n), 1 - eps) + eps * np.eye(n))
    res = assess_stability(cfg, np.full(n, 1 / n))
    assert res.label == "stable"
    v = market_state(cfg, np.full(n, 1 / n), solve_wages(cfg, np.full(n, 1 / n)).w).v[0]
    np.testing.assert_allclose(res.eigenvalues.real / v, -1 / sigma, atol=1e-6)


def test_simplex_is_preserved(rng):
    cfg = NAMED["baseline4"].config(phi=0.3)
    traj = integrate(cfg, random_interior(rng, 4), 40.0, n_eval=81)
    drift = np.abs(traj.x.sum(axis=1) - 1.0)
    assert drift.max() < 1e-12 * max(1.0, traj.t[-1])
    assert np.all(traj.x > 0)


def test_speed_decays_near_stable_state():
    cfg = Family("two-region", phi=0.3, psi=0.8).config()
    traj = integrate(cfg, [0.6, 0.4], 200.0, n_eval=401)
    tail = traj.speed[-len(traj.speed) // 10 :]
    assert np.all(np.diff(tail) <= 1e-14)


def test_mirror_trajectories():
    cfg = NAMED["two-region"].config(phi=0.3)
    a = integrate(cfg, [0.7, 0.3], 30.0, n_eval=61)
    b = integrate(cfg, [0.3, 0.7], 30.0, n_eval=61)
    assert np.abs(a.x - b.x[:, ::-1]).max() < 1e-9


def test_stability_agrees_with_spectrum():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 100:
        phi, psi = rng.uniform(0.05, 0.95, 2)
        sigma = rng.uniform(2, 8)
        cfg = Family("two-region", sigma=sigma, phi=phi, psi=psi).config()
        omega = uniform_stability(cfg).omega_star
        if abs(omega) < 1e-4:
            continue
        label = assess_stability(cfg, [0.5, 0.5]).label
        assert label == ("stable" if omega < 0 else "unstable"), (phi, psi, sigma)
        checked += 1


def test_multistart_finds_symmetric_pair():
    cfg = Family("two-region", phi=0.3, psi=0.8).config()
    found = multistart_equilibria(cfg)
    stable = sorted(r.x_star[0] for r in found if r.stable)
    assert len(stable) == 2
    assert stable[0] == pytest.approx(1 - stable[1], abs=1e-9)


def test_default_starts_are_interior():
    for n in (2, 4):
        starts = default_starts(n)
        assert len(starts) == 2 * n + 1
        for x in starts:
            assert x.min() > 0 and x.sum() == pytest.approx(1.0, abs=1e-15)
