"""Hand-written, deterministic SVG for stability maps and bifurcation diagrams."""
from __future__ import annotations

import logging
import math
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

WIDTH, HEIGHT = 480, 420
LEFT, RIGHT, TOP, BOTTOM = 60, 20, 30, 50
PALETTE = ("#1f4e79", "#b03a2e", "#1e8449", "#7d3c98", "#b9770e", "#2e4053", "#117a65", "#922b21")
STABLE_FILL = "#bfbfbf"
INVALID_FILL = "#f2d7d5"


def _n(v):
    return f"{v:.2f}".rstrip("0").rstrip(".")


class _Frame:
    def __init__(self, xlim, ylim):
        self.xlim, self.ylim = xlim, ylim
        self.w = WIDTH - LEFT - RIGHT
        self.h = HEIGHT - TOP - BOTTOM

    def x(self, v):
        lo, hi = self.xlim
        return LEFT + (v - lo) / (hi - lo) * self.w

    def y(self, v):
        lo, hi = self.ylim
        return TOP + self.h - (v - lo) / (hi - lo) * self.h

    def axes(self, xlabel, ylabel, title):
        out = [
            f'<rect x="{LEFT}" y="{TOP}" width="{self.w}" height="{self.h}" fill="none" stroke="#000" stroke-width="1"/>'
        ]
        for k in range(6):
            fx = self.xlim[0] + k * (self.xlim[1] - self.xlim[0]) / 5
            fy = self.ylim[0] + k * (self.ylim[1] - self.ylim[0]) / 5
            px, py = self.x(fx), self.y(fy)
            out.append(f'<line x1="{_n(px)}" y1="{TOP + self.h}" x2="{_n(px)}" y2="{TOP + self.h + 5}" stroke="#000"/>')
            out.append(
                f'<text x="{_n(px)}" y="{TOP + self.h + 18}" font-size="11" text-anchor="middle">{fx:.3g}</text>'
            )
            out.append(f'<line x1="{LEFT - 5}" y1="{_n(py)}" x2="{LEFT}" y2="{_n(py)}" stroke="#000"/>')
            out.append(
                f'<text x="{LEFT - 8}" y="{_n(py + 4)}" font-size="11" text-anchor="end">{fy:.3g}</text>'
            )
        out.append(
            f'<text x="{_n(LEFT + self.w / 2)}" y="{HEIGHT - 12}" font-size="13" text-anchor="middle">{xlabel}</text>'
        )
        out.append(
            f'<text x="16" y="{_n(TOP + self.h / 2)}" font-size="13" text-anchor="middle" '
            f'transform="rotate(-90 16 {_n(TOP + self.h / 2)})">{ylabel}</text>'
        )
        out.append(f'<text x="{_n(LEFT + self.w / 2)}" y="18" font-size="13" text-anchor="middle">{title}</text>')
        return out


def _document(body):
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">'
    )
    return "\n".join([head, f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#fff"/>', *body, "</svg>"]) + "\n"


def grid_map_svg(grid, title="stability of the uniform state"):
    """Shaded where the uniform state is stable; invalid cells tinted."""
    phis = np.asarray(grid.phi_values, dtype=float)
    psis = np.asarray(grid.psi_values, dtype=float)
    frame = _Frame((0.0, 1.0), (0.0, 1.0))
    dx = (phis[1] - phis[0]) if phis.size > 1 else 0.01
    dy = (psis[1] - psis[0]) if psis.size > 1 else 0.01
    body = []
    for j, psi in enumerate(psis):
        y0, y1 = frame.y(psi + dy / 2), frame.y(psi - dy / 2)
        i = 0
        while i < phis.size:
            state = _cell(grid, i, j)
            k = i
            while k + 1 < phis.size and _cell(grid, k + 1, j) == state:
                k += 1
            if state != "unstable":
                fill = STABLE_FILL if state == "stable" else INVALID_FILL
                x0, x1 = frame.x(phis[i] - dx / 2), frame.x(phis[k] + dx / 2)
                body.append(
                    f'<rect x="{_n(x0)}" y="{_n(y0)}" width="{_n(x1 - x0)}" height="{_n(y1 - y0)}" fill="{fill}"/>'
                )
            i = k + 1
    body.extend(frame.axes("phi", "psi", title))
    return _document(body)


def _cell(grid, i, j):
    if math.isnan(grid.omega_star[i, j]):
        return "invalid"
    return "stable" if grid.stable_mask[i, j] else "unstable"


def branch_diagram_svg(branches, component=1, xlim=None, title="bifurcation diagram"):
    """x_component against the parameter; stable runs solid, unstable dashed.

    Folds are drawn as diamonds and branch points as circles.
    """
    branches = list(branches)
    if xlim is None:
        params = np.concatenate([b.params for b in branches])
        xlim = (float(params.min()), float(params.max()))
        if xlim[0] == xlim[1]:
            xlim = (xlim[0] - 0.01, xlim[1] + 0.01)
    frame = _Frame(xlim, (0.0, 1.0))
    k = component - 1
    body = []
    for idx, br in enumerate(branches):
        color = PALETTE[idx % len(PALETTE)]
        params, states, stable = br.params, br.states, br.stable
        start = 0
        for end in range(1, len(params) + 1):
            if end == len(params) or stable[end] != stable[start]:
                stop = min(end + 1, len(params))
                pts = " ".join(f"{_n(frame.x(params[m]))},{_n(frame.y(states[m, k]))}" for m in range(start, stop))
                dash = "" if stable[start] else ' stroke-dasharray="5,4"'
                if stop - start > 1:
                    body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>')
                start = end
        for sp in br.special_points:
            px, py = frame.x(sp.param), frame.y(sp.x[k])
            if sp.kind == "fold":
                body.append(
                    f'<polygon points="{_n(px)},{_n(py - 5)} {_n(px + 5)},{_n(py)} {_n(px)},{_n(py + 5)} '
                    f'{_n(px - 5)},{_n(py)}" fill="#fff" stroke="{color}"/>'
                )
            elif sp.kind == "branch-point":
                body.append(f'<circle cx="{_n(px)}" cy="{_n(py)}" r="3.5" fill="{color}"/>')
    name = branches[0].parameter_name if branches else "parameter"
    body.extend(frame.axes(name, f"x_{component}", title))
    return _document(body)


def emit_svg(dataset, kind, path, **kwargs):
    """Write an SVG for ``dataset``; empty input logs a warning and writes nothing."""
    if kind not in ("grid-map", "branch-diagram"):
        raise ValueError(f"unknown plot kind {kind!r}")
    empty = dataset is None or (
        kind == "branch-diagram" and not any(len(b.points) for b in dataset)
    ) or (kind == "grid-map" and np.asarray(dataset.omega_star).size == 0)
    if empty:
        log.warning("nothing to plot for %s; no SVG written", kind)
        return None
    text = grid_map_svg(dataset, **kwargs) if kind == "grid-map" else branch_diagram_svg(dataset, **kwargs)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path
