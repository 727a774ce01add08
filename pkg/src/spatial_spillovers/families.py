"""Named one- and two-parameter families of economies.

A :class:`Family` fixes the network shapes and sigma and maps scalar
freeness values (``phi``, ``psi``) to a :class:`ModelConfig`. Continuation,
threshold search and grids all work on families.
"""
from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import AssumptionError
from .model import ModelConfig, build_externality, build_geography, validate_externality, validate_proximity

FAMILY_KINDS = (
    "two-region",
    "two-region-asym",
    "baseline4",
    "equidistant4",
    "block4",
    "bypass4",
    "custom",
)

# defaults follow the figure settings of the reference analyses
FAMILY_DEFAULTS = {
    "two-region": {"phi": 0.5, "psi": 0.8},
    "two-region-asym": {"phi": 0.5, "psi": 0.8},
    "baseline4": {"phi": 0.5, "psi": 0.7},
    "equidistant4": {"phi": 0.5, "psi": 0.7},
    "block4": {"phi": 0.5, "psi": 0.8, "psi_prime": 0.64},
    "bypass4": {"phi": 0.5, "psi": 0.4225, "psi_prime": 0.65},
    "custom": {},
}


@dataclass(frozen=True)
class Family:
    """A named economy with scalar freeness parameters.

    ``two-region-asym`` raises the 1->2 trade freeness (``asym_target="phi"``)
    or the 2->1 spillover (``asym_target="psi"``) to ``asym_exponent``,
    giving region 1 a comparative advantage.
    """

    kind: str
    sigma: float = 4.0
    phi: float | None = None
    psi: float | None = None
    psi_prime: float | None = None
    asym_target: str = "phi"
    asym_exponent: float = 1.1
    custom_phi: tuple | None = None
    custom_psi: tuple | None = None

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise AssumptionError(f"unknown family {self.kind!r}; expected one of {FAMILY_KINDS}")
        for key, value in FAMILY_DEFAULTS[self.kind].items():
            if getattr(self, key) is None:
                object.__setattr__(self, key, value)
        if self.kind == "custom":
            if self.custom_phi is None or self.custom_psi is None:
                raise AssumptionError("custom family needs explicit proximity and externality matrices")
            object.__setattr__(self, "custom_phi", _as_tuple(validate_proximity(self.custom_phi)))
            object.__setattr__(self, "custom_psi", _as_tuple(validate_externality(self.custom_psi)))
        if self.asym_target not in ("phi", "psi"):
            raise AssumptionError("asym_target must be 'phi' or 'psi'")

    @property
    def n(self):
        if self.kind in ("two-region", "two-region-asym"):
            return 2
        if self.kind == "custom":
            return len(self.custom_phi)
        return 4

    @property
    def symmetric(self):
        """True when every region is equivalent, so the uniform state is an equilibrium."""
        return self.kind not in ("two-region-asym", "custom") or _transitive(self.config())

    def with_params(self, **params):
        return replace(self, **params)

    def config(self, **params):
        fam = self.with_params(**params) if params else self
        if fam.kind == "custom":
            return ModelConfig(fam.sigma, np.array(fam.custom_phi), np.array(fam.custom_psi))
        if fam.kind == "two-region":
            D = build_geography("two-region", fam.phi)
            G = build_externality("two-region", fam.psi)
        elif fam.kind == "two-region-asym":
            D = build_geography("two-region", fam.phi)
            G = build_externality("two-region", fam.psi)
            if fam.asym_target == "phi":
                D[0, 1] = fam.phi**fam.asym_exponent
            else:
                G[1, 0] = fam.psi**fam.asym_exponent
        else:
            D = build_geography("racetrack4", fam.phi)
            G = build_externality(fam.kind, fam.psi, fam.psi_prime)
        return ModelConfig(fam.sigma, D, G)

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}


def _as_tuple(mat):
    return tuple(tuple(float(v) for v in row) for row in np.asarray(mat))


def region_symmetries(config, atol=1e-12):
    """All region permutations that leave both matrices unchanged.

    Brute force over n!, fine for the small n this package targets.
    """
    n = config.n
    if n > 8:
        raise ValueError("symmetry search is limited to n <= 8")
    out = []
    for perm in itertools.permutations(range(n)):
        p = np.array(perm)
        if np.allclose(config.phi[np.ix_(p, p)], config.phi, atol=atol, rtol=0) and np.allclose(
            config.psi[np.ix_(p, p)], config.psi, atol=atol, rtol=0
        ):
            out.append(p)
    return out


def _transitive(config):
    reach = {0}
    for p in region_symmetries(config):
        reach.add(int(p[0]))
    return len(reach) == config.n
