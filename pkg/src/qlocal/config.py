"""Experiment configuration: YAML (or JSON) file -> validated objects.

One file drives every subcommand; each command reads the sections it
needs.  Complex amplitudes are written as [re, im] pairs (bare reals
allowed).  All bounds are checked at load time so commands fail before
any computation starts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .lattice import FockTruncation, as_site
from .dynamics import HamiltonianSpec
from .states import Background


def _complex_amp(x):
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return complex(float(x[0]), float(x[1]))
    raise ConfigError(f"expected a real number or [re, im] pair, got {x!r}")


def _state(vals, trunc: FockTruncation) -> np.ndarray:
    try:
        vec = np.array([_complex_amp(x) for x in vals], dtype=complex)
    except TypeError as exc:
        raise ConfigError(f"bad site state {vals!r}: {exc}") from None
    if vec.shape != (trunc.dim,):
        raise ConfigError(
            f"site state needs {trunc.dim} amplitudes for n_max={trunc.n_max}, got {len(vec)}"
        )
    return vec


def _normalized_state(vals, trunc) -> np.ndarray:
    vec = _state(vals, trunc)
    nrm = np.linalg.norm(vec)
    if nrm == 0:
        raise ConfigError("background site state cannot be the zero vector")
    return vec / nrm


def _background(section, trunc, dim) -> Background:
    kind = section.get("kind", "uniform")
    try:
        if kind == "uniform":
            return Background.uniform(trunc, _normalized_state(section["state"], trunc), dim=dim)
        if kind == "periodic":
            pattern = [_normalized_state(s, trunc) for s in section["pattern"]]
            return Background.periodic(trunc, pattern, section["periods"], dim=dim)
        if kind == "explicit":
            default = _normalized_state(section["default"], trunc)
            patch = {
                as_site(entry["site"]): _normalized_state(entry["state"], trunc)
                for entry in section.get("patch", [])
            }
            return Background.explicit(trunc, default, patch, dim=dim)
    except KeyError as exc:
        raise ConfigError(f"background section missing key {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"bad background: {exc}") from None
    raise ConfigError(f"unknown background kind {kind!r}")


@dataclass
class ExperimentConfig:
    trunc: FockTruncation
    dim: int
    hamiltonian: HamiltonianSpec
    background: Background
    background2: Background | None
    overrides: dict
    overlap_radius: int
    reversal_window: int
    evolve: dict
    master: dict
    oracle: dict
    out_dir: Path
    seed: int
    raw: dict = field(repr=False, default_factory=dict)


_DEFAULT_EVOLVE = {"t_max": 10.0, "dt": 1.0, "window": 6, "buffer": 1, "tol": 1e-9}
_DEFAULT_MASTER = {
    "window": 3,
    "basis": "density",
    "eta": None,
    "etas": None,
    "couplings": [0.2, 0.1, 0.05],
    "t_grid": [5.0, 10.0],
    "max_spread": 0.25,
    "cap": 4096,
}
_DEFAULT_ORACLE = {"checks": 500, "sites": 3, "max_support": 2}


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    try:
        if path.suffix.lower() == ".json":
            return json.loads(text)
        return yaml.safe_load(text) or {}
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None


def parse_config(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    lat = data.get("lattice", {})
    try:
        trunc = FockTruncation(
            n_max=int(lat.get("n_max", 1)),
            dx=float(lat.get("dx", 1.0)),
            mass=float(lat.get("mass", 1.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad lattice section: {exc}") from None
    dim = int(lat.get("dimension", 1))

    ham = data.get("hamiltonian", {})
    try:
        spec = HamiltonianSpec(
            trunc=trunc,
            dim=dim,
            hopping_offset=int(ham.get("hopping_offset", 1)),
            prefactor=str(ham.get("prefactor", "standard")),
            g=float(ham.get("g", 0.0)),
            interaction_range=int(ham.get("interaction_range", 1)),
            hopping_phase=float(ham.get("hopping_phase", 0.0)),
            hopping_scale=float(ham.get("hopping_scale", 1.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad hamiltonian section: {exc}") from None

    background = _background(data.get("background", {"kind": "uniform", "state": [1.0] + [0.0] * trunc.n_max}), trunc, dim)
    background2 = None
    if "background2" in data:
        background2 = _background(data["background2"], trunc, dim)

    overrides = {}
    for entry in data.get("overrides", []):
        try:
            overrides[as_site(entry["site"])] = _state(entry["state"], trunc)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad override entry {entry!r}: {exc}") from None

    overlap_radius = int(data.get("overlap", {}).get("radius", 30))
    if overlap_radius < 0:
        raise ConfigError("overlap radius must be >= 0")
    reversal_window = int(data.get("reversal", {}).get("window", 3))
    if reversal_window < 2:
        raise ConfigError("reversal window needs at least 2 sites")

    evolve = dict(_DEFAULT_EVOLVE, **data.get("evolve", {}))
    if evolve["t_max"] < 0 or evolve["dt"] <= 0:
        raise ConfigError("evolve needs t_max >= 0 and dt > 0")
    if int(evolve["window"]) < 1 or int(evolve["buffer"]) < 0:
        raise ConfigError("evolve needs window >= 1 and buffer >= 0")

    master = dict(_DEFAULT_MASTER, **data.get("master", {}))
    if int(master["window"]) < 2:
        raise ConfigError("master window needs at least 2 sites")
    if master["eta"] is None and master["etas"] is None:
        raise ConfigError("master section needs eta or an etas schedule")
    if master["basis"] not in ("density", "identity_density", "current"):
        raise ConfigError(f"unknown basis preset {master['basis']!r}")
    if not master["couplings"]:
        raise ConfigError("master needs a non-empty couplings list")
    if not master["t_grid"]:
        raise ConfigError("master needs a non-empty t_grid")

    oracle = dict(_DEFAULT_ORACLE, **data.get("oracle", {}))
    if oracle["checks"] < 1 or oracle["sites"] < 2:
        raise ConfigError("oracle needs checks >= 1 and sites >= 2")

    out = data.get("output", {})
    return ExperimentConfig(
        trunc=trunc,
        dim=dim,
        hamiltonian=spec,
        background=background,
        background2=background2,
        overrides=overrides,
        overlap_radius=overlap_radius,
        reversal_window=reversal_window,
        evolve=evolve,
        master=master,
        oracle=oracle,
        out_dir=Path(out.get("directory", "out")),
        seed=int(out.get("seed", 0)),
        raw=data,
    )
