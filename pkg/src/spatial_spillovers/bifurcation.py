"""Equilibrium branches along one freeness parameter.

Branches are traced by pseudo-arclength continuation of the payoff
equalization system in (log x, p). Pitchforks off the uniform state are
entered through an amplitude-constrained corrector, and folds are located
where the parameter component of the branch tangent changes sign.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dynamics import MARGINAL_BAND, _wages, assess_stability, multistart_equilibria, polish_equilibrium
from .errors import AssumptionError, ConvergenceError, InsufficientDataError
from .families import Family, region_symmetries
from .model import market_state, uniform, validate_distribution
from .stability import critical_threshold, mode_thresholds, payoff_jacobian_with_state, uniform_stability

log = logging.getLogger(__name__)

PARAMETERS = ("phi", "psi")
CORRECTOR_TOL = 1e-10
DEDUP_TOL = 1e-6
FD_STEP = 1e-6
ARC_FLOOR = 0.05

_SOLVER_ERRORS = (ConvergenceError, FloatingPointError, np.linalg.LinAlgError, AssumptionError)


class BranchPoint(NamedTuple):
    param: float
    x: np.ndarray
    omega_max: float
    stable: bool


class SpecialPoint(NamedTuple):
    kind: str  # fold | branch-point | endpoint
    param: float
    x: np.ndarray
    note: str = ""


@dataclass
class Branch:
    """One continuation branch.

    ``omega_max`` at a point is the largest real part of the tangent
    eigenvalues of the dynamic, divided by the equilibrium payoff.
    """

    parameter_name: str
    points: list
    special_points: list = field(default_factory=list)
    label: str = "branch"  # uniform | switched | multistart
    emergence: float = float("nan")
    pattern: np.ndarray | None = None
    reason: str = ""

    @property
    def params(self):
        return np.array([p.param for p in self.points])

    @property
    def states(self):
        return np.array([p.x for p in self.points])

    @property
    def omega_max(self):
        return np.array([p.omega_max for p in self.points])

    @property
    def stable(self):
        return np.array([p.stable for p in self.points], dtype=bool)

    @property
    def folds(self):
        return [s for s in self.special_points if s.kind == "fold"]

    def permuted(self, perm):
        """The same branch with regions relabeled (new region k is old ``perm[k]``)."""
        perm = np.asarray(perm)
        return Branch(
            self.parameter_name,
            [p._replace(x=p.x[perm]) for p in self.points],
            [s._replace(x=s.x[perm]) for s in self.special_points],
            self.label,
            self.emergence,
            None if self.pattern is None else self.pattern[perm],
            self.reason,
        )


@dataclass(frozen=True)
class DiagramSpec:
    """What to continue, over which range and with which step controls."""

    family: Family
    parameter: str = "phi"
    lo: float = 0.02
    hi: float = 0.98
    direction: int = 1
    starts: tuple | None = None
    multistart_params: tuple | None = None
    h0: float = 1e-3
    h_min: float = 1e-4
    h_max: float = 1e-2
    h_fail: float = 1e-7
    epsilon: float = 1e-3
    delta: float = 1e-4
    max_points: int = 5000
    uniform_step: float = 0.01

    def __post_init__(self):
        if self.parameter not in PARAMETERS:
            raise AssumptionError(f"continuation parameter must be one of {PARAMETERS}")
        if not (0 < self.lo < self.hi < 1):
            raise AssumptionError(f"parameter range must satisfy 0 < lo < hi < 1, got ({self.lo}, {self.hi})")
        if self.direction not in (-1, 1):
            raise AssumptionError("direction must be +1 or -1")
        if not (0 < self.h_fail <= self.h_min <= self.h0 <= self.h_max):
            raise AssumptionError("step controls must satisfy h_fail <= h_min <= h0 <= h_max")
        if self.epsilon <= 0 or self.delta <= 0:
            raise AssumptionError("epsilon and delta must be positive")
        # every named family is valid on an interval, so checking the ends suffices
        self.config(self.lo)
        self.config(self.hi)

    def config(self, p):
        return self.family.config(**{self.parameter: float(p)})

    def ms_params(self):
        if self.multistart_params is not None:
            return tuple(self.multistart_params)
        span = self.hi - self.lo
        return (self.lo + 0.1 * span, self.lo + 0.5 * span, self.hi - 0.1 * span)


# --- the equalization system ----------------------------------------------------


class _System:
    """F(y, p) = ((v_i - v_n)/mean v for i < n, sum x - 1) with x = exp(y)."""

    def __init__(self, spec):
        self.spec = spec
        self.w = None

    def _payoffs(self, y, p, jac):
        cfg = self.spec.config(p)
        x = np.exp(y)
        w = _wages(cfg, x, self.w)
        self.w = w
        if jac:
            state, V_x = payoff_jacobian_with_state(cfg, x, w)
            return x, state.v, V_x
        return x, market_state(cfg, x, w).v, None

    def _residual(self, x, v):
        F = np.empty(x.size)
        F[:-1] = (v[:-1] - v[-1]) / v.mean()
        F[-1] = x.sum() - 1.0
        return F

    def residual(self, y, p):
        x, v, _ = self._payoffs(y, p, False)
        return self._residual(x, v)

    def evaluate(self, y, p):
        """Residual and its n x (n+1) Jacobian in (y, p)."""
        x, v, V_x = self._payoffs(y, p, True)
        n = x.size
        F = self._residual(x, v)
        A = np.empty((n, n + 1))
        # the mean-payoff derivative multiplies F and vanishes on the branch
        A[:-1, :n] = (V_x[:-1] - V_x[-1]) * x[None, :] / v.mean()
        A[-1, :n] = x
        h = min(FD_STEP, 0.5 * p, 0.5 * (1.0 - p))
        w_keep = self.w
        A[:, n] = (self.residual(y, p + h) - self.residual(y, p - h)) / (2 * h)
        self.w = w_keep
        return F, A


def _weights(z):
    # arclength is measured in population units, with a floor so thin regions
    # cannot take huge steps in log space
    return np.append(np.maximum(np.exp(z[:-1]), ARC_FLOOR), 1.0)


def _tangent(A, W, prev=None):
    t = np.linalg.svd(A)[2][-1]
    t = t / np.linalg.norm(W * t)
    if prev is not None and t @ (W * W * prev) < 0:
        t = -t
    return t


def _newton(sys, z0, extra_row, extra_res, max_iter=12, tol=CORRECTOR_TOL):
    """Newton on F(z) = 0 plus one scalar constraint with gradient ``extra_row``."""
    z = z0.copy()
    for it in range(max_iter):
        try:
            F, A = sys.evaluate(z[:-1], z[-1])
        except _SOLVER_ERRORS:
            return None
        g = extra_res(z)
        if max(np.abs(F).max(), abs(g)) <= tol:
            return z, A, it
        K = np.vstack([A, extra_row(z)])
        try:
            dz = np.linalg.solve(K, -np.append(F, g))
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(dz)) or np.abs(dz).max() > 0.5:
            return None
        z = z + dz
        if not (0.0 < z[-1] < 1.0):
            return None
    return None


def _correct(sys, z_pred, t, W):
    row = W * W * t
    return _newton(sys, z_pred, lambda z: row, lambda z: row @ (z - z_pred))


def _tag(spec, param, x):
    cfg = spec.config(param)
    w = _wages(cfg, x)
    v = market_state(cfg, x, w).v
    assessment = assess_stability(cfg, x, w)
    omega = float(assessment.eigenvalues.real.max()) / float(x @ v)
    return BranchPoint(float(param), x, omega, assessment.label == "stable")


def _state(z):
    x = np.exp(z[:-1])
    return x / x.sum()


def _refine_fold(sys, z, t, W, h, max_iter=60):
    # the tangent's parameter component flips sign somewhere in (0, h) along t
    a, b = 0.0, h
    sign0 = np.sign(t[-1])
    best = z
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        res = _correct(sys, z + mid * t, t, W)
        if res is None:
            break
        zm, Am, _ = res
        best = zm
        if _tangent(Am, W, t)[-1] * sign0 > 0:
            a = mid
        else:
            b = mid
        if b - a < 1e-11:
            break
    return SpecialPoint("fold", float(best[-1]), _state(best))


def _snap(pstar, break_points, tol=1e-2):
    if len(break_points):
        nearest = min(break_points, key=lambda b: abs(b - pstar))
        if abs(nearest - pstar) < tol:
            return float(nearest)
    return float(pstar)


def continue_branch(
    spec,
    x0,
    param0,
    direction=None,
    tangent=None,
    stop_at_uniform=False,
    break_points=(),
    label="branch",
):
    """Trace the equilibrium branch through (x0, param0).

    The initial tangent is oriented along ``tangent`` when given, otherwise
    so the parameter moves in ``direction`` (default ``spec.direction``).
    Steps are arclength in (x, p) with thin regions floored at ARC_FLOOR.
    A turning point where the branch meets a configuration with more
    symmetry than the branch itself is a pitchfork, not a fold; the branch
    is ended there and the point recorded as a branch point.
    With ``stop_at_uniform`` the branch ends when a step passes within
    epsilon of the uniform state; the meeting point is snapped onto the
    nearest entry of ``break_points``.
    """
    direction = spec.direction if direction is None else direction
    cfg0 = spec.config(param0)
    x0 = validate_distribution(x0, cfg0.n, interior=True)
    sys = _System(spec)
    z = np.append(np.log(x0), float(param0))
    try:
        F0 = sys.residual(z[:-1], z[-1])
    except _SOLVER_ERRORS as exc:
        raise ConvergenceError(f"cannot evaluate the starting point: {exc}") from exc
    if np.abs(F0).max() > CORRECTOR_TOL:
        xs, _, _, ok = polish_equilibrium(cfg0, x0, tol=CORRECTOR_TOL)
        if not ok:
            raise ConvergenceError("starting point is not an equilibrium", last=xs)
        z = np.append(np.log(xs), float(param0))
    F, A = sys.evaluate(z[:-1], z[-1])
    t = _tangent(A, _weights(z))
    if tangent is not None:
        if t @ tangent < 0:
            t = -t
    elif t[-1] * direction < 0:
        t = -t

    points = [_tag(spec, z[-1], _state(z))]
    special = []
    xbar = uniform(cfg0.n)
    perms = [q for q in region_symmetries(cfg0) if np.any(q != np.arange(cfg0.n))]
    armed = np.linalg.norm(points[0].x - xbar) > 2 * spec.epsilon
    h = spec.h0
    reason = "max-points"
    while len(points) < spec.max_points:
        W = _weights(z)
        z_pred = z + h * t
        if not (spec.lo <= z_pred[-1] <= spec.hi):
            bound = spec.hi if z_pred[-1] > spec.hi else spec.lo
            frac = (bound - z[-1]) / (z_pred[-1] - z[-1])
            guess = _state(z + frac * h * t)
            xb, _, _, ok = polish_equilibrium(spec.config(bound), guess, tol=CORRECTOR_TOL)
            if ok and np.abs(xb - points[-1].x).max() < 10 * spec.h_max:
                points.append(_tag(spec, bound, xb))
            reason = "range"
            break
        res = _correct(sys, z_pred, t, W)
        if res is None:
            h *= 0.5
            if h < spec.h_fail:
                reason = "corrector-failure"
                break
            continue
        z_new, A_new, iters = res
        t_new = _tangent(A_new, W, t)
        x_new = _state(z_new)
        if stop_at_uniform:
            hit = _segment_hit(points[-1], z_new[-1], x_new, xbar)
            if armed and hit[0] < spec.epsilon:
                pstar = _snap(hit[1], break_points)
                points.append(_tag(spec, pstar, xbar.copy()))
                special.append(SpecialPoint("branch-point", pstar, xbar.copy()))
                reason = "uniform"
                break
            armed = armed or np.linalg.norm(x_new - xbar) > 2 * spec.epsilon
        if t[-1] * t_new[-1] < 0:
            turn = _refine_fold(sys, z, t, W, h)
            if _crosses_symmetric(points[-1].x, x_new, perms):
                # a pitchfork off a more symmetric branch, not a fold; past it
                # the branch only retraces a relabeled copy of itself
                points.append(_tag(spec, turn.param, turn.x))
                special.append(turn._replace(kind="branch-point", note="symmetric"))
                reason = "symmetric-point"
                break
            special.append(turn)
        z, t = z_new, t_new
        points.append(_tag(spec, z[-1], x_new))
        if iters <= 2:
            h = min(1.5 * h, spec.h_max)
        elif iters >= 5:
            h = max(0.5 * h, spec.h_min)
    last = points[-1]
    if reason not in ("uniform", "symmetric-point"):
        special.append(SpecialPoint("endpoint", last.param, last.x, reason))
    log.debug("branch %s: %d points, stopped by %s", label, len(points), reason)
    return Branch(spec.parameter, points, special, label=label, emergence=float(param0), reason=reason)


def _crosses_symmetric(x_prev, x_new, perms, noise=1e-8):
    # the asymmetry x - x[q] reverses across a point fixed by q; symmetries the
    # branch already has leave only roundoff, whose sign means nothing
    for q in perms:
        a, b = x_prev - x_prev[q], x_new - x_new[q]
        if min(np.abs(a).max(), np.abs(b).max()) > noise and a @ b < 0:
            return True
    return False


def _segment_hit(prev, p_new, x_new, xbar):
    """Distance from xbar to the chord between two branch points, and the parameter there."""
    d = x_new - prev.x
    dd = d @ d
    s = 0.0 if dd == 0 else float(np.clip((xbar - prev.x) @ d / dd, 0.0, 1.0))
    return np.linalg.norm(prev.x + s * d - xbar), prev.param + s * (p_new - prev.param)


# --- branch switching -------------------------------------------------------------


class SwitchSeed(NamedTuple):
    param: float
    x: np.ndarray
    sign: int
    epsilon: float


def _mode_eigenvalue(spec, p, z):
    report = uniform_stability(spec.config(p))
    k = int(np.argmax([abs(q @ z) for q in report.eigenvectors]))
    return float(report.eigenvalues[k])


def branch_switch(spec, param, direction):
    """Two states on the branch bifurcating from the uniform state at ``param``.

    Each seed solves the equalization system together with the amplitude
    condition (x - xbar) . z = +-epsilon, starting from the parameter offset
    delta on the side where the uniform state is unstable along ``z``. A seed
    that collapses onto the uniform state is retried with 5 * epsilon.
    """
    cfg = spec.config(param)
    report = uniform_stability(cfg)
    if np.min(np.abs(report.eigenvalues)) >= 1e-8:
        raise AssumptionError(
            f"{spec.parameter}={param} is not a break point of the uniform state "
            f"(smallest |omega_k| = {np.min(np.abs(report.eigenvalues)):.3e})"
        )
    z = np.asarray(direction, dtype=float)
    z = z - z.mean()
    z = z / np.linalg.norm(z)
    n = cfg.n
    xbar = uniform(n)
    side = 1.0 if _mode_eigenvalue(spec, min(param + spec.delta, spec.hi), z) > 0 else -1.0
    seeds = []
    for sign in (1, -1):
        seed = None
        for eps in (spec.epsilon, 5 * spec.epsilon):
            target = sign * eps
            x_guess = xbar + target * z
            if np.any(x_guess <= 0):
                break
            z0 = np.append(np.log(x_guess), param + side * spec.delta)
            res = _newton(
                _System(spec),
                z0,
                lambda q: np.append(z * np.exp(q[:-1]), 0.0),
                lambda q: (np.exp(q[:-1]) - xbar) @ z - target,
            )
            if res is None:
                continue
            xs = _state(res[0])
            if np.linalg.norm(xs - xbar) < eps / 10:
                continue
            seed = SwitchSeed(float(res[0][-1]), xs, sign, eps)
            break
        if seed is None:
            raise ConvergenceError(f"branch switching at {spec.parameter}={param} failed for sign {sign:+d}")
        seeds.append(seed)
    return seeds


# --- diagrams -------------------------------------------------------------------


class BreakPoint(NamedTuple):
    value: float
    pattern: np.ndarray


def uniform_break_points(spec):
    """Parameter values where some tangent eigenvalue of the uniform state vanishes."""
    fam = spec.family
    try:
        found = mode_thresholds(fam, free=spec.parameter, lo=spec.lo, hi=spec.hi)
        return [BreakPoint(m.value, np.asarray(m.pattern, dtype=float)) for m in found]
    except AssumptionError:
        values = critical_threshold(fam, free=spec.parameter, lo=spec.lo, hi=spec.hi, closed_form=False).values
        return [BreakPoint(v, uniform_stability(spec.config(v)).critical_pattern) for v in values]


def _switch_directions(spec, bp, tol=1e-8):
    """Directions to switch along at a break point.

    A two-dimensional critical eigenspace spanned by a Fourier pair (cosine
    and sine of one frequency) carries two symmetry-distinct branch families,
    along each basis vector and along their sum.
    """
    report = uniform_stability(spec.config(bp.value))
    crit = [k for k in range(len(report.eigenvalues)) if abs(report.eigenvalues[k]) < tol]
    out = [np.asarray(bp.pattern, dtype=float)]
    if len(crit) == 2 and report.groups[crit[0]] == report.groups[crit[1]]:
        a, b = (np.asarray(report.eigenvectors[k]) for k in crit)
        out.append((a + b) / np.linalg.norm(a + b))
    return out


def uniform_branch(spec, breaks):
    n = spec.family.n
    xbar = uniform(n)
    count = max(2, int(round((spec.hi - spec.lo) / spec.uniform_step)) + 1)
    grid = np.linspace(spec.lo, spec.hi, count)
    params = np.unique(np.concatenate([grid, [b.value for b in breaks]]))
    points = []
    for p in params:
        omega = uniform_stability(spec.config(p)).omega_star
        points.append(BranchPoint(float(p), xbar.copy(), float(omega), bool(omega < -MARGINAL_BAND)))
    special = [SpecialPoint("branch-point", b.value, xbar.copy(), _pattern_note(b.pattern)) for b in breaks]
    special.append(SpecialPoint("endpoint", float(params[0]), xbar.copy(), "range"))
    special.append(SpecialPoint("endpoint", float(params[-1]), xbar.copy(), "range"))
    return Branch(
        spec.parameter, points, special, label="uniform", emergence=float(params[0]), pattern=np.zeros(n), reason="range"
    )


def _pattern_note(z):
    return " ".join(f"{v:.6g}" for v in z)


def _on_branch(spec, branch, param, x, perms, prefilter=1e-2):
    """Whether the equilibrium (param, x), up to a region permutation, lies on ``branch``."""
    ps = branch.params
    xs = branch.states
    for k in range(len(ps) - 1):
        a, b = ps[k], ps[k + 1]
        if a == b or (a - param) * (b - param) > 0:
            continue
        f = (param - a) / (b - a)
        guess = (1 - f) * xs[k] + f * xs[k + 1]
        for perm in perms:
            xp = x[perm]
            if np.abs(guess - xp).max() > prefilter:
                continue
            # guess lies on the chord; pull it onto the branch before comparing
            xr, _, _, ok = polish_equilibrium(spec.config(param), guess, tol=CORRECTOR_TOL)
            if ok and np.abs(xr - xp).max() < DEDUP_TOL:
                return True
    return False


def _probe(branch):
    xbar = uniform(branch.states.shape[1])
    r = np.linalg.norm(branch.states - xbar, axis=1)
    k = int(np.argmax(r)) if r.max() > 0 else len(branch.points) // 2
    return branch.points[k]


def _join(down, up):
    pts = down.points[::-1] + up.points[1:]
    special = down.special_points + up.special_points
    return Branch(down.parameter_name, pts, special, label=up.label, reason=f"{down.reason}/{up.reason}")


def _switch_job(args):
    spec, seed, pattern, breaks, pstar = args
    xbar = uniform(seed.x.size)
    hint = np.append((seed.x - xbar) / seed.x, 0.0)
    br = continue_branch(
        spec, seed.x, seed.param, tangent=hint, stop_at_uniform=True, break_points=breaks, label="switched"
    )
    start = _tag(spec, pstar, xbar.copy())
    br.points.insert(0, start)
    br.special_points.insert(0, SpecialPoint("branch-point", pstar, xbar.copy(), _pattern_note(pattern)))
    br.emergence = pstar
    br.pattern = seed.sign * pattern
    return br


def _multistart_job(args):
    spec, p, x, breaks, symmetric = args
    kw = dict(stop_at_uniform=symmetric, break_points=breaks, label="multistart")
    up = continue_branch(spec, x, p, direction=1, **kw)
    down = continue_branch(spec, x, p, direction=-1, **kw)
    br = _join(down, up)
    br.emergence = br.points[0].param
    br.pattern = np.round(br.points[0].x - uniform(x.size), 6)
    return br


def _run(jobs, fn, workers):
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


@dataclass
class BifurcationDiagram:
    """Branches of one diagram, in a reproducible order; behaves like a list."""

    spec: DiagramSpec
    branches: list
    break_points: list
    symmetries: list

    def __iter__(self):
        return iter(self.branches)

    def __len__(self):
        return len(self.branches)

    def __getitem__(self, k):
        return self.branches[k]

    def contains(self, branch, atol=1e-8):
        """True if ``branch`` matches a stored branch up to a region symmetry."""
        for stored in self.branches:
            if len(stored.points) == len(branch.points) and np.abs(stored.params - branch.params).max() < atol:
                for perm in self.symmetries:
                    if np.abs(stored.states - branch.states[:, perm]).max() < atol:
                        return True
        probe = _probe(branch)
        return any(_on_branch(self.spec, b, probe.param, probe.x, self.symmetries) for b in self.branches)


def bifurcation_diagram(spec, workers=1):
    """Uniform branch, pitchfork branches from each break point and multistart extras.

    Branches that coincide up to a region symmetry are kept once. Output
    order is by (emergence parameter, pattern), independent of ``workers``.
    """
    fam = spec.family
    mid = 0.5 * (spec.lo + spec.hi)
    perms = region_symmetries(spec.config(mid))
    symmetric = fam.symmetric
    branches, breaks = [], []
    if symmetric:
        breaks = uniform_break_points(spec)
        branches.append(uniform_branch(spec, breaks))
        jobs = []
        for bp, direction in ((bp, d) for bp in breaks for d in _switch_directions(spec, bp)):
            for seed in branch_switch(spec, bp.value, direction):
                twin = any(
                    abs(seed.param - j[1].param) < 1e-9 and np.abs(seed.x[perm] - j[1].x).max() < DEDUP_TOL
                    for j in jobs
                    for perm in perms
                )
                if not twin:
                    pattern = direction / np.linalg.norm(direction)
                    jobs.append((spec, seed, pattern, [b.value for b in breaks], bp.value))
        for br in _run(jobs, _switch_job, workers):
            _accept(spec, br, branches, perms)

    break_values = [b.value for b in breaks]
    xbar = uniform(fam.n)
    for p in spec.ms_params():
        cfg = spec.config(p)
        starts = None if spec.starts is None else [np.asarray(s, dtype=float) for s in spec.starts]
        for res in multistart_equilibria(cfg, starts):
            if not res.converged:
                continue
            if symmetric and np.abs(res.x_star - xbar).max() < DEDUP_TOL:
                continue
            if any(_on_branch(spec, b, p, res.x_star, perms) for b in branches):
                continue
            br = _multistart_job((spec, p, res.x_star, break_values, symmetric))
            _accept(spec, br, branches, perms)

    branches.sort(key=lambda b: (b.label != "uniform", round(b.emergence, 12), tuple(np.round(b.pattern, 6))))
    return BifurcationDiagram(spec, branches, breaks, perms)


def _accept(spec, br, branches, perms):
    probe = _probe(br)
    if any(_on_branch(spec, b, probe.param, probe.x, perms) for b in branches if b.label != "uniform"):
        log.debug("dropping duplicate %s branch from %.6g", br.label, br.emergence)
        return
    branches.append(br)


def fit_pitchfork_exponent(branch, break_point, window=(1e-4, 1e-2), min_points=5):
    """Slope of log ||x - xbar|| against log |p - break_point| inside ``window``."""
    params = branch.params
    xs = branch.states
    xbar = uniform(xs.shape[1])
    dp = np.abs(params - break_point)
    r = np.linalg.norm(xs - xbar, axis=1)
    keep = (dp >= window[0]) & (dp <= window[1]) & (r > 0)
    if keep.sum() < min_points:
        raise InsufficientDataError(
            f"only {int(keep.sum())} branch points with |p - p*| in [{window[0]:g}, {window[1]:g}]; need {min_points}"
        )
    return float(np.polyfit(np.log(dp[keep]), np.log(r[keep]), 1)[0])
