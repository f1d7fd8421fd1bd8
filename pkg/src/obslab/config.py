"""Flat key-value experiment configuration.

Config files are plain text, one ``section.key = value`` assignment per line,
with ``#`` comments and blank lines ignored.  The full schema is the SCHEMA
table below; unknown or duplicate keys are rejected with the offending key
path, and every value is parsed and range-checked before any computation
starts.  Lists are comma separated.

An experiment is identified by the hash of its canonical form: the sorted,
normalized assignments actually given (defaults are not baked in) plus the
effective random seed.  Identical config text and seed therefore name the
same experiment directory and must reproduce byte-identical result files.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError
from .surface import RegionSpec, SurfaceMesh, build_bolza, build_torus, fmt_float

# value kinds: str, int, float, float_list, int_list, pair
SCHEMA = {
    "surface.kind": ("str", "torus | bolza"),
    "surface.n": ("int", "torus grid resolution per side"),
    "surface.length": ("float", "torus side length"),
    "surface.refine": ("int", "octagon subdivision depth"),
    "spectrum.n_modes": ("int", "number of eigenpairs"),
    "spectrum.tol": ("float", "eigensolver residual tolerance"),
    "region.kind": ("str", "full | ball | strip | vertices"),
    "region.center": ("pair", "ball center, chart coordinates"),
    "region.radius": ("float", "ball geodesic radius"),
    "region.axis": ("str", "strip axis, x | y"),
    "region.start": ("float", "strip lower edge"),
    "region.width": ("float", "strip width"),
    "region.vertices": ("int_list", "explicit chart vertex ids"),
    "region.band": ("float", "transition band width (default 10% of diameter)"),
    "time.T": ("float_list", "time horizon(s)"),
    "time.n_steps": ("int", "synthesis grid steps (0 = automatic)"),
    "time.kind": ("str", "trapezoid | simpson | gauss"),
    "windows.h": ("float_list", "semiclassical scales for sweeps"),
    "windows.k": ("pair", "dyadic window range k_lo,k_hi (inclusive)"),
    "windows.C_horizon": ("float", "wave horizon prefactor in C*log(1/h)"),
    "windows.kind": ("str", "evolution kind, schrodinger | halfwave"),
    "hum.epsilon": ("float", "Tikhonov regularization of the Gramian solve"),
    "hum.seed": ("int", "seed for sampled initial states"),
    "check.basis_file": ("str", "run basis checks on this saved file"),
    "output.directory": ("str", "base directory for experiment output"),
    "output.formats": ("str", "comma list from csv,json"),
}

_DEFAULTS = {
    "surface.kind": "torus",
    "surface.n": 32,
    "surface.length": 1.0,
    "surface.refine": 4,
    "spectrum.n_modes": 64,
    "spectrum.tol": 1e-8,
    "region.kind": "full",
    "region.center": (0.25, 0.15),
    "region.radius": 0.6,
    "region.axis": "x",
    "region.start": 0.0,
    "region.width": 0.3,
    "region.vertices": (),
    "region.band": None,
    "time.T": (1.0,),
    "time.n_steps": 0,
    "time.kind": "simpson",
    "windows.h": (),
    "windows.k": None,
    "windows.C_horizon": 1.0,
    "windows.kind": "schrodinger",
    "hum.epsilon": 0.0,
    "hum.seed": 0,
    "check.basis_file": None,
    "output.directory": "runs",
    "output.formats": "csv,json",
}


def _parse_value(key: str, kind: str, text: str):
    parts = [p.strip() for p in text.split(",") if p.strip() != ""]
    try:
        if kind == "str":
            return text.strip()
        if kind == "int":
            return int(text.strip())
        if kind == "float":
            return float(text.strip())
        if kind == "float_list":
            return tuple(float(p) for p in parts)
        if kind == "int_list":
            return tuple(int(p) for p in parts)
        if kind == "pair":
            if len(parts) != 2:
                raise ValueError("expected two comma-separated values")
            return (float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise ConfigError(f"config key {key}: {exc}") from exc
    raise ConfigError(f"schema bug: unknown kind {kind}")


def _format_value(kind: str, value) -> str:
    if kind == "str":
        return str(value)
    if kind == "int":
        return str(int(value))
    if kind == "float":
        return fmt_float(value)
    if kind in ("float_list", "pair"):
        return ",".join(fmt_float(v) for v in value)
    if kind == "int_list":
        return ",".join(str(int(v)) for v in value)
    raise ConfigError(f"schema bug: unknown kind {kind}")


def parse_config_text(text: str) -> dict:
    """Parse assignments into a {key: parsed_value} dict, schema-checked."""
    seen = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate config key {key!r}")
        seen[key] = _parse_value(key, SCHEMA[key][0], value)
    return seen


def canonical_text(assignments: dict) -> str:
    """Sorted, normalized echo of the explicitly given assignments."""
    lines = []
    for key in sorted(assignments):
        kind = SCHEMA[key][0]
        lines.append(f"{key} = {_format_value(kind, assignments[key])}")
    return "\n".join(lines) + "\n" if lines else ""


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment parameters plus their canonical source form."""

    values: dict = field(repr=False)
    given: dict = field(repr=False)
    seed: int = 0

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def experiment_id(self) -> str:
        payload = canonical_text(self.given) + f"seed = {self.seed}\n"
        return hashlib.sha256(payload.encode()).hexdigest()[:12]

    def region_spec(self) -> RegionSpec:
        kind = self["region.kind"]
        if kind == "full":
            return RegionSpec.full()
        if kind == "ball":
            return RegionSpec.ball(self["region.center"], self["region.radius"],
                                   band=self["region.band"])
        if kind == "strip":
            return RegionSpec.strip(self["region.axis"], self["region.start"],
                                    self["region.width"], band=self["region.band"])
        if kind == "vertices":
            return RegionSpec.vertex_set(self["region.vertices"],
                                         band=self["region.band"] or 0.0)
        raise ConfigError(f"config key region.kind: unknown kind {kind!r}")

    def build_mesh(self) -> SurfaceMesh:
        if self["surface.kind"] == "torus":
            return build_torus(self["surface.n"], self["surface.length"])
        if self["surface.kind"] == "bolza":
            return build_bolza(self["surface.refine"])
        raise ConfigError(
            f"config key surface.kind: unknown kind {self['surface.kind']!r}")


_CHOICES = {
    "surface.kind": ("torus", "bolza"),
    "region.kind": ("full", "ball", "strip", "vertices"),
    "region.axis": ("x", "y"),
    "time.kind": ("trapezoid", "simpson", "gauss"),
    "windows.kind": ("schrodinger", "halfwave"),
}


def validate(assignments: dict, seed: Optional[int] = None) -> ExperimentConfig:
    """Fill defaults, range-check everything, and freeze the config."""
    values = dict(_DEFAULTS)
    values.update(assignments)
    for key, choices in _CHOICES.items():
        if values[key] not in choices:
            raise ConfigError(
                f"config key {key}: {values[key]!r} not in {'|'.join(choices)}")
    positive = ("surface.length", "spectrum.tol", "windows.C_horizon")
    for key in positive:
        if not values[key] > 0:
            raise ConfigError(f"config key {key}: must be positive")
    if values["surface.n"] < 4:
        raise ConfigError("config key surface.n: torus needs n >= 4")
    if values["surface.refine"] < 0:
        raise ConfigError("config key surface.refine: must be >= 0")
    if values["spectrum.n_modes"] < 2:
        raise ConfigError("config key spectrum.n_modes: need at least 2 modes")
    if any(t <= 0 for t in values["time.T"]) or not values["time.T"]:
        raise ConfigError("config key time.T: horizons must be positive")
    if values["time.n_steps"] < 0:
        raise ConfigError("config key time.n_steps: must be >= 0")
    if values["hum.epsilon"] < 0:
        raise ConfigError("config key hum.epsilon: must be >= 0")
    if any(h <= 0 for h in values["windows.h"]):
        raise ConfigError("config key windows.h: scales must be positive")
    if values["windows.k"] is not None:
        lo, hi = values["windows.k"]
        if lo != int(lo) or hi != int(hi) or int(lo) > int(hi):
            raise ConfigError("config key windows.k: need integers k_lo <= k_hi")
        values["windows.k"] = (int(lo), int(hi))
    if values["region.kind"] == "strip" and values["surface.kind"] != "torus":
        raise ConfigError("config key region.kind: strips exist on the torus only")
    fmts = [f.strip() for f in values["output.formats"].split(",") if f.strip()]
    bad = [f for f in fmts if f not in ("csv", "json")]
    if bad:
        raise ConfigError(f"config key output.formats: unknown format {bad[0]!r}")
    values["output.formats"] = tuple(fmts)
    eff_seed = int(values["hum.seed"] if seed is None else seed)
    return ExperimentConfig(values=values, given=dict(assignments), seed=eff_seed)


def load_config(path, seed: Optional[int] = None) -> ExperimentConfig:
    with open(path) as fh:
        text = fh.read()
    return validate(parse_config_text(text), seed=seed)
