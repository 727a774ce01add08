"""Run configuration: one JSON document with ``model``, ``command`` and ``output`` sections."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import AssumptionError
from .families import FAMILY_KINDS, Family

OUTPUT_ENV = "SPILLGEO_OUTPUT_DIR"

COMMANDS = ("wages", "equilibrate", "stability", "threshold", "grid", "bifurcate", "decompose")

# racetrack4 with a named externality network
FAMILY_ALIASES = {
    "racetrack4-baseline": "baseline4",
    "racetrack4-equidistant": "equidistant4",
    "racetrack4-block": "block4",
    "racetrack4-bypass": "bypass4",
}

MODEL_KEYS = ("family", "sigma", "phi", "psi", "psi_prime", "asym_target", "asym_exponent", "custom")
OUTPUT_KEYS = ("directory", "svg", "svg_component")


def canonical_family(name):
    name = FAMILY_ALIASES.get(name, name)
    if name not in FAMILY_KINDS:
        raise AssumptionError(f"unknown family {name!r}; expected one of {FAMILY_KINDS + tuple(FAMILY_ALIASES)}")
    return name


@dataclass(frozen=True)
class ModelSpec:
    family: str = "two-region"
    sigma: float = 4.0
    phi: float | None = None
    psi: float | None = None
    psi_prime: float | None = None
    asym_target: str = "phi"
    asym_exponent: float = 1.1
    custom_phi: tuple | None = None
    custom_psi: tuple | None = None

    def to_family(self):
        """Expand into a :class:`Family`; validates the assumptions at the default point."""
        fam = Family(
            kind=canonical_family(self.family),
            sigma=float(self.sigma),
            phi=self.phi,
            psi=self.psi,
            psi_prime=self.psi_prime,
            asym_target=self.asym_target,
            asym_exponent=float(self.asym_exponent),
            custom_phi=self.custom_phi,
            custom_psi=self.custom_psi,
        )
        if fam.kind != "custom":
            fam.config()
        return fam

    def to_dict(self):
        out = {k: v for k, v in asdict(self).items() if v is not None and not k.startswith("custom_")}
        if self.custom_phi is not None or self.custom_psi is not None:
            out["custom"] = {"phi": _lists(self.custom_phi), "psi": _lists(self.custom_psi)}
        return out


@dataclass(frozen=True)
class OutputSpec:
    directory: str | None = None
    svg: bool = False
    svg_component: int = 1

    def resolve_directory(self):
        return self.directory or os.environ.get(OUTPUT_ENV) or os.getcwd()


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: ModelSpec = field(default_factory=ModelSpec)
    params: dict = field(default_factory=dict)
    output: OutputSpec = field(default_factory=OutputSpec)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise AssumptionError(f"unknown command {self.command!r}; expected one of {COMMANDS}")

    def to_dict(self):
        return {
            "model": self.model.to_dict(),
            "command": {"name": self.command, **self.params},
            "output": {k: v for k, v in asdict(self.output).items() if v is not None},
        }

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc, command=None):
        if not isinstance(doc, dict):
            raise AssumptionError("config must be a JSON object")
        unknown = set(doc) - {"model", "command", "output"}
        if unknown:
            raise AssumptionError(f"unknown config sections: {sorted(unknown)}")
        model = _model_from(doc.get("model", {}))
        cmd = dict(doc.get("command", {}))
        name = cmd.pop("name", None) or command
        if command is not None and name != command:
            raise AssumptionError(f"config is for command {name!r} but {command!r} was requested")
        if name is None:
            raise AssumptionError("config names no command")
        out = doc.get("output", {})
        bad = set(out) - set(OUTPUT_KEYS)
        if bad:
            raise AssumptionError(f"unknown output keys: {sorted(bad)}")
        return cls(name, model, cmd, OutputSpec(**out))

    @classmethod
    def loads(cls, text, command=None):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise AssumptionError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(doc, command)


def _lists(mat):
    return None if mat is None else [list(row) for row in mat]


def _tuples(mat, name):
    if mat is None:
        return None
    arr = np.asarray(mat, dtype=float)
    if arr.ndim != 2:
        raise AssumptionError(f"model.custom.{name} must be a square matrix")
    return tuple(tuple(float(v) for v in row) for row in arr)


def _model_from(doc):
    bad = set(doc) - set(MODEL_KEYS)
    if bad:
        raise AssumptionError(f"unknown model keys: {sorted(bad)}")
    doc = dict(doc)
    custom = doc.pop("custom", None)
    if custom is not None:
        doc["custom_phi"] = _tuples(custom.get("phi"), "phi")
        doc["custom_psi"] = _tuples(custom.get("psi"), "psi")
        doc.setdefault("family", "custom")
    return ModelSpec(**doc)


def merge(config, model=None, params=None, output=None):
    """Overlay flag values (``None`` means "not given") onto a config."""
    m = {k: v for k, v in (model or {}).items() if v is not None}
    p = {k: v for k, v in (params or {}).items() if v is not None}
    o = {k: v for k, v in (output or {}).items() if v is not None}
    return RunConfig(
        config.command,
        ModelSpec(**{**asdict(config.model), **m}),
        {**config.params, **p},
        OutputSpec(**{**asdict(config.output), **o}),
    )


def parse_range(text, default_count=None):
    """``"a:b:n"`` -> n evenly spaced values; ``"a:b"`` -> (a, b) unless a count default is given."""
    parts = str(text).split(":")
    try:
        if len(parts) == 3:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
            if count < 1:
                raise ValueError
            return np.linspace(lo, hi, count)
        if len(parts) == 2:
            lo, hi = float(parts[0]), float(parts[1])
            return np.linspace(lo, hi, default_count) if default_count else (lo, hi)
        if len(parts) == 1:
            return np.array([float(parts[0])])
    except ValueError:
        pass
    raise AssumptionError(f"cannot parse range {text!r}; expected lo:hi or lo:hi:count")


def parse_vector(text):
    if isinstance(text, (list, tuple)):
        return np.asarray(text, dtype=float)
    try:
        return np.array([float(v) for v in str(text).split(",")])
    except ValueError as exc:
        raise AssumptionError(f"cannot parse vector {text!r}; expected comma-separated numbers") from exc
