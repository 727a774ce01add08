import warnings

import numpy as np
import pytest

from spatial_spillovers import (
    AssumptionError,
    Family,
    critical_threshold,
    decompose_net_force,
    gain_function,
    mode_thresholds,
    payoff_jacobian,
    proximity_spectrum,
    solve_wages,
    stability_grid,
    uniform_stability,
)
from spatial_spillovers.stability import payoff_elasticity

from conftest import NAMED, random_interior

FOUR = ["baseline4", "equidistant4", "block4", "bypass4"]


def test_gain_examples():
    assert gain_function(1 / 3, 1 / 9, 4).Omega == pytest.approx(-1 / 27, abs=1e-15)
    s, sigma = 0.4, 3.0
    assert gain_function(s, 0.0, sigma).Omega == pytest.approx(-(1 - s) / (sigma + (sigma - 1) * s), abs=1e-15)
    t = (1 - s) / ((sigma - 1) + sigma * s)
    assert gain_function(s, t, sigma).Omega == pytest.approx(0.0, abs=1e-15)


def test_gain_increasing_in_t():
    s = np.linspace(0, 1, 50)[:, None]
    t = np.linspace(0, 1, 50)[None, :]
    for sigma in (1.1, 2.0, 4.0, 8.0, 50.0):
        om = gain_function(s, t, sigma).Omega
        assert np.all(np.diff(om, axis=1) > 0)


def test_gain_rejects_sigma():
    with pytest.raises(AssumptionError):
        gain_function(0.5, 0.5, 1.0)


def test_decomposition_example():
    d = decompose_net_force(0.5, 0.8, 4)
    assert (d.chi, d.lam) == pytest.approx((1 / 3, 1 / 9), abs=1e-15)
    assert (d.omega_a, d.omega_w, d.alpha_x) == pytest.approx((1 / 3, 2 / 3, 1 / 9), abs=1e-15)
    assert d.beta_x == pytest.approx(-1 / 9, abs=1e-15)
    assert d.omega == pytest.approx(-1 / 27, abs=1e-15)


def test_decomposition_full_spillovers():
    d = decompose_net_force(0.4, 1.0, 4)
    assert d.alpha_x == 0 and d.omega == pytest.approx(d.omega_w * d.beta_x) and d.omega < 0


def test_decomposition_identity(rng):
    for phi, psi, sigma in zip(rng.uniform(0.01, 0.99, 50), rng.uniform(0.01, 0.99, 50), rng.uniform(1.1, 10, 50)):
        d = decompose_net_force(phi, psi, sigma)
        assert d.omega == pytest.approx(gain_function(d.chi, d.lam, sigma).Omega, abs=1e-14)


def test_racetrack_proximity_spectrum():
    spec = proximity_spectrum(NAMED["baseline4"].config().phi)
    np.testing.assert_allclose(spec.eigenvalues, [1 / 3, 1 / 9, 1 / 3], atol=1e-15)
    np.testing.assert_allclose(spec.eigenvectors[0], [1 / np.sqrt(2), 0, -1 / np.sqrt(2), 0], atol=1e-15)
    np.testing.assert_allclose(spec.eigenvectors[1], [0.5, -0.5, 0.5, -0.5], atol=1e-15)


def test_bypass_externality_spectrum():
    spec = proximity_spectrum(NAMED["bypass4"].config().psi)
    assert spec.eigenvalues[0] == pytest.approx(0.35 / 2.495, abs=1e-12)
    assert spec.eigenvalues[1] == pytest.approx(0.805 / 2.495, abs=1e-12)


@pytest.mark.parametrize("psi, prime", [(0.8, 0.64), (0.5, 0.1), (0.9, 0.3)])
def test_block_cross_mode(psi, prime):
    spec = proximity_spectrum(Family("block4", psi=psi, psi_prime=prime).config().psi, "bccb", block=2)
    k = next(i for i, z in enumerate(spec.eigenvectors) if np.allclose(z, [0.5, 0.5, -0.5, -0.5]))
    assert spec.eigenvalues[k] == pytest.approx((1 - prime) / (1 + prime), abs=1e-14)


@pytest.mark.parametrize("psi", [0.2, 0.5, 0.7, 0.95])
def test_baseline_lambda_identity(psi):
    spec = proximity_spectrum(Family("baseline4", psi=psi).config().psi)
    assert spec.eigenvalues[0] == pytest.approx((1 - psi) / (1 + psi), abs=1e-14)


def test_structure_mismatch_falls_back():
    mat = NAMED["baseline4"].config().phi.copy()
    mat[0, 1] = mat[1, 0] = 0.45
    with pytest.warns(UserWarning, match="not circulant"):
        spec = proximity_spectrum(mat, "circulant")
    assert spec.structure == "general"


def _random_family(kind, rng):
    phi, psi = rng.uniform(0.05, 0.95, 2)
    if kind == "block4":
        return Family(kind, phi=phi, psi=psi, psi_prime=psi * rng.uniform(0.05, 1.0))
    if kind == "bypass4":
        lo = max(2 * psi - 1, 0.0)
        return Family(kind, phi=phi, psi=psi, psi_prime=rng.uniform(lo + 0.01 * (1 - lo), 1.0))
    return Family(kind, phi=phi, psi=psi)


def _same_eigenspaces(vals_a, vecs_a, vals_b, vecs_b, tol):
    vals_a, vals_b = np.asarray(vals_a), np.asarray(vals_b)
    np.testing.assert_allclose(np.sort(vals_a), np.sort(vals_b), atol=tol)
    A, B = np.column_stack(vecs_a), np.column_stack(vecs_b)
    for mu in np.unique(np.round(vals_a, 9)):
        Pa = A[:, np.abs(vals_a - mu) < 1e-8]
        Pb = B[:, np.abs(vals_b - mu) < 1e-8]
        assert np.abs(Pa @ Pa.T - Pb @ Pb.T).max() < 1e-9


@pytest.mark.parametrize("kind", FOUR)
def test_fourier_matches_dense(kind):
    rng = np.random.default_rng(hash(kind) % 2**32)
    hint, block = ("bccb", 2) if kind == "block4" else ("circulant", 2)
    for _ in range(20):
        cfg = _random_family(kind, rng).config()
        for mat in (cfg.phi, cfg.psi):
            closed = proximity_spectrum(mat, hint, block=block)
            dense = proximity_spectrum(mat, "general-symmetric")
            _same_eigenspaces(closed.eigenvalues, closed.eigenvectors, dense.eigenvalues, dense.eigenvectors, 1e-12)


@pytest.mark.parametrize("kind", FOUR)
def test_closed_form_report_matches_general_path(kind):
    rng = np.random.default_rng(len(kind))
    for _ in range(5):
        cfg = _random_family(kind, rng).config()
        fast = uniform_stability(cfg)
        slow = uniform_stability(cfg, path="general")
        _same_eigenspaces(fast.eigenvalues, fast.eigenvectors, slow.eigenvalues, slow.eigenvectors, 1e-12)


@pytest.mark.parametrize("name", sorted(NAMED))
def test_uniform_elasticity_is_symmetric(name):
    V = payoff_elasticity(NAMED[name].config())
    assert np.abs(V - V.T).max() < 1e-12


@pytest.mark.parametrize("name", sorted(NAMED))
def test_payoff_jacobian_matches_fd(name):
    rng = np.random.default_rng(len(name) * 11)
    cfg = NAMED[name].config()
    worst = 0.0
    for _ in range(20):
        x = random_interior(rng, cfg.n, low=0.03)
        w = solve_wages(cfg, x, tol=1e-14).w
        an = payoff_jacobian(cfg, x, w=w)
        fd = payoff_jacobian(cfg, x, method="finite-difference", w=w)
        worst = max(worst, np.abs(an - fd).max() / np.abs(fd).max())
    assert worst < 1e-5


def test_fd_jacobian_near_boundary_is_signalled():
    cfg = NAMED["two-region"].config()
    with pytest.raises(FloatingPointError, match="step"):
        payoff_jacobian(cfg, [1 - 1e-7, 1e-7], method="finite-difference")


def test_two_region_report():
    rep = uniform_stability(NAMED["two-region"].config())
    assert rep.omega_star == pytest.approx(-1 / 27, abs=1e-14)
    np.testing.assert_allclose(rep.critical_pattern, [1 / np.sqrt(2), -1 / np.sqrt(2)], atol=1e-15)
    assert rep.stable


def test_two_region_numeric_elasticity():
    cfg = NAMED["two-region"].config()
    for method in ("analytic", "finite-difference"):
        rep = uniform_stability(cfg, path="general", jacobian=method)
        assert rep.omega_star == pytest.approx(-1 / 27, abs=1e-7 if method != "analytic" else 1e-13)


def test_baseline_mono_centric_mode():
    rep = uniform_stability(NAMED["baseline4"].config())
    lam = 0.3 / 1.7
    assert rep.lam[0] == pytest.approx(lam, abs=1e-14)
    assert rep.eigenvalues[0] == pytest.approx((-2 / 3 + 13 / 3 * lam) / 5, abs=1e-14)
    # phi = 0.5 lies below the break point 0.5676, so the mode grows
    assert rep.eigenvalues[0] == pytest.approx(0.0196, abs=1e-4)


def test_bypass_duo_centric_leads():
    rep = uniform_stability(NAMED["bypass4"].config(phi=0.85))
    np.testing.assert_allclose(rep.critical_pattern, [0.5, -0.5, 0.5, -0.5], atol=1e-15)
    assert rep.critical_index == 2


def test_block_north_south_leads(rng):
    for _ in range(20):
        psi = rng.uniform(0.1, 0.95)
        fam = Family("block4", phi=rng.uniform(0.05, 0.95), psi=psi, psi_prime=psi * rng.uniform(0.05, 1))
        rep = uniform_stability(fam.config())
        sharp = gain_function(rep.chi, rep.lam, fam.sigma).Omega_sharp
        k = next(i for i, z in enumerate(rep.eigenvectors) if np.allclose(z, [0.5, 0.5, -0.5, -0.5]))
        assert sharp[k] >= sharp.max() - 1e-14


def test_tied_modes_combine():
    # equidistant spillovers and racetrack trade: modes 1 and 3 always tie
    rep = uniform_stability(NAMED["equidistant4"].config(phi=0.2))
    assert len(rep.critical_modes) == 1
    rep = uniform_stability(NAMED["baseline4"].config(phi=0.2))
    assert rep.critical_modes == [0]


def test_two_region_threshold():
    res = critical_threshold(Family("two-region", psi=0.8))
    assert res.values[0] == pytest.approx(7 * 0.2 / 3.8, abs=1e-15)
    assert res.closed_form


def test_black_hole():
    res = critical_threshold(Family("two-region", psi=0.4))
    assert res.values == [] and res.reason == "black-hole"


def test_no_crossing_reason():
    res = critical_threshold(Family("two-region", psi=0.4), closed_form=False)
    assert res.values == [] and res.reason == "black-hole"
    res = critical_threshold(Family("two-region", psi=0.9), lo=0.5, hi=0.99, closed_form=False)
    assert res.values == [] and res.reason == "always-stable"


def test_psi_threshold_is_inverse():
    fam = Family("two-region", phi=0.3684210526315789)
    res = critical_threshold(fam, free="psi")
    assert res.values[0] == pytest.approx(0.8, abs=1e-12)
    scan = critical_threshold(fam, free="psi", closed_form=False)
    assert scan.values[0] == pytest.approx(0.8, abs=1e-9)


def test_baseline_threshold():
    res = critical_threshold(Family("baseline4", psi=0.7))
    assert res.values[-1] == pytest.approx(0.567568, abs=1e-6)
    chi = ((1 - res.values[-1]) / (1 + res.values[-1]))
    assert chi == pytest.approx(0.275862, abs=1e-6)


def test_mode_thresholds_need_structure():
    fam = Family("custom", custom_phi=[[1, 0.3, 0.2], [0.5, 1, 0.4], [0.1, 0.6, 1]], custom_psi=np.eye(3) * 0.5 + 0.5)
    with pytest.raises(AssumptionError, match="circulant"):
        mode_thresholds(fam)


def test_bypass_needs_strong_antipodes():
    """With psi' <= psi the duo-centric mode is never the first to destabilize."""
    rng = np.random.default_rng(3)
    for _ in range(30):
        psi = rng.uniform(0.05, 0.95)
        lo = max(2 * psi - 1, 0.0)
        prime = rng.uniform(lo + 1e-3, psi)
        fam = Family("bypass4", psi=psi, psi_prime=prime)
        found = mode_thresholds(fam, scan=128)
        if not found:
            continue
        rep = uniform_stability(fam.config(phi=found[-1].value))
        assert rep.eigenvalues[1] <= rep.eigenvalues[0] + 1e-12


def test_grid_partition():
    phis = np.linspace(0.01, 0.99, 25)
    psis = np.linspace(0.01, 0.99, 25)
    grid = stability_grid(Family("two-region"), phis, psis)
    for i, phi in enumerate(phis):
        for j, psi in enumerate(psis):
            # closed-form boundary
            expected = phi > 7 * (1 - psi) / (3 + psi)
            assert grid.stable_mask[i, j] == expected
    assert np.all(grid.critical_pattern_index == 1)


def test_grid_marks_invalid_cells():
    grid = stability_grid(Family("bypass4", psi_prime=0.5), [0.5], [0.3, 0.8])
    assert np.isfinite(grid.omega_star[0, 0])
    assert np.isnan(grid.omega_star[0, 1]) and grid.critical_pattern_index[0, 1] == -1


def test_grid_rejects_bad_ranges():
    with pytest.raises(AssumptionError):
        stability_grid(Family("two-region"), [0.0, 0.5], [0.5])
    with pytest.raises(AssumptionError):
        stability_grid(Family("two-region"), [0.5, 0.4], [0.5])
