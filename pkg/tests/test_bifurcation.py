import numpy as np
import pytest

from spatial_spillovers import (
    AssumptionError,
    DiagramSpec,
    Family,
    InsufficientDataError,
    bifurcation_diagram,
    branch_switch,
    continue_branch,
    fit_pitchfork_exponent,
    market_state,
    mode_thresholds,
    solve_wages,
)
from spatial_spillovers.bifurcation import uniform_branch, uniform_break_points

PSTAR = 7 * 0.2 / 3.8


def _spread(spec, point):
    cfg = spec.config(point.param)
    v = market_state(cfg, point.x, solve_wages(cfg, point.x, polish_steps=2).w).v
    return v.max() - v.min(), v.mean()


def test_spec_validation():
    fam = Family("two-region")
    with pytest.raises(AssumptionError, match="range"):
        DiagramSpec(fam, lo=0.5, hi=0.4)
    with pytest.raises(AssumptionError, match="parameter"):
        DiagramSpec(fam, parameter="sigma")
    with pytest.raises(AssumptionError, match="step"):
        DiagramSpec(fam, h0=1e-1)
    with pytest.raises(AssumptionError):
        DiagramSpec(Family("bypass4", psi_prime=0.5), parameter="psi", lo=0.1, hi=0.9)


@pytest.mark.parametrize(
    "fam",
    [Family("baseline4", psi=0.7), Family("block4", psi=0.8, psi_prime=0.64), Family("bypass4")],
    ids=["baseline", "block", "bypass"],
)
def test_break_points_on_uniform_branch(fam):
    spec = DiagramSpec(fam)
    breaks = uniform_break_points(spec)
    br = uniform_branch(spec, breaks)
    recorded = [s.param for s in br.special_points if s.kind == "branch-point"]
    for m in mode_thresholds(fam, lo=spec.lo, hi=spec.hi):
        assert min(abs(m.value - r) for r in recorded) < 1e-6


def test_switching_needs_a_break_point():
    spec = DiagramSpec(Family("two-region", psi=0.8))
    with pytest.raises(AssumptionError, match="not a break point"):
        branch_switch(spec, 0.5, [1, -1])


def test_switch_seeds_are_mirror_images():
    spec = DiagramSpec(Family("two-region", psi=0.8))
    a, b = branch_switch(spec, PSTAR, [1, -1])
    assert {a.sign, b.sign} == {1, -1}
    np.testing.assert_allclose(a.x, b.x[::-1], atol=1e-10)
    # supercritical: the pair appears where the uniform state is unstable
    assert a.param < PSTAR


def test_two_region_diagram_shape(two_region_diagram):
    d = two_region_diagram
    assert [b.label for b in d] == ["uniform", "switched"]
    assert len(d.break_points) == 1
    assert d.break_points[0].value == pytest.approx(PSTAR, abs=1e-10)
    switched = d[1]
    # corrector tolerance is 1e-10
    assert switched.params.max() == pytest.approx(PSTAR, abs=1e-9)
    assert not switched.folds


def test_stability_handoff(two_region_diagram):
    uni, sw = two_region_diagram[0], two_region_diagram[1]
    near = np.abs(uni.params - PSTAR) > 1e-9
    assert np.all(uni.stable[near] == (uni.params[near] > PSTAR))
    close = (np.abs(sw.params - PSTAR) < 0.05) & (np.abs(sw.params - PSTAR) > 1e-6)
    assert close.sum() > 3
    assert np.all(sw.stable[close])


def test_points_are_equilibria(two_region_diagram, baseline_diagram):
    for d in (two_region_diagram, baseline_diagram):
        for br in d:
            for pt in br.points[:: max(1, len(br.points) // 60)]:
                spread, vstar = _spread(d.spec, pt)
                assert spread <= 1e-8 * vstar


def test_symmetry_closure(baseline_diagram):
    d = baseline_diagram
    mono = next(b for b in d if b.label == "switched" and np.allclose(np.abs(b.pattern), [2**-0.5, 0, 2**-0.5, 0]))
    rotated = mono.permuted([1, 2, 3, 0])
    for pt in rotated.points[::10]:
        spread, vstar = _spread(d.spec, pt)
        assert spread <= 1e-8 * vstar
    assert d.contains(rotated, atol=1e-8)


def test_diagram_independent_of_workers(two_region_diagram):
    again = bifurcation_diagram(two_region_diagram.spec, workers=2)
    assert len(again) == len(two_region_diagram)
    for a, b in zip(again, two_region_diagram):
        np.testing.assert_array_equal(a.params, b.params)
        np.testing.assert_array_equal(a.states, b.states)


def test_continuation_reaches_range_end():
    spec = DiagramSpec(Family("two-region", psi=0.8), lo=0.05, hi=0.5)
    seed = branch_switch(spec, PSTAR, [1, -1])[0]
    start = continue_branch(spec, seed.x, seed.param, direction=-1)
    assert start.reason == "range"
    assert start.params.min() == pytest.approx(0.05, abs=1e-12)
    kinds = [s.kind for s in start.special_points]
    assert kinds.count("endpoint") == 1


def test_exponent_needs_points(two_region_diagram):
    sw = two_region_diagram[1]
    with pytest.raises(InsufficientDataError):
        fit_pitchfork_exponent(sw, PSTAR, window=(1e-9, 1e-8))


def test_exponent_on_synthetic_branch():
    from spatial_spillovers.bifurcation import Branch, BranchPoint

    pts = []
    for dp in np.geomspace(1e-4, 1e-2, 12):
        r = 0.3 * dp**0.5
        pts.append(BranchPoint(0.4 - dp, np.array([0.5 + r, 0.5 - r]), 0.0, True))
    assert fit_pitchfork_exponent(Branch("phi", pts), 0.4) == pytest.approx(0.5, abs=1e-12)
