"""Experiment configuration read from TOML.

Example::

    process = "contact"
    lambda = [2.0]
    d = [4, 8, 16]
    n_runs = 2000
    master_seed = 7

    [weights]
    atoms = [[1.0, 1.0]]

Process-specific knobs live in optional tables: ``[fgrid]`` (grid_points,
tol), ``[couple]`` (sigma, steps), ``[rwalk]`` (mode, x, y, A, horizon) and
``initial`` (list of vertices) for sir/contact.
"""

from __future__ import annotations

import dataclasses
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigInvalid, WeightSpecError
from .weights import WeightSpec, validate

PROCESSES = ("contact", "sir", "branching", "couple", "gap", "rwalk", "theta", "fgrid")

_KNOWN = {
    "process", "lambda", "d", "n_runs", "horizon", "t_max", "pop_cap", "confidence",
    "master_seed", "out", "weights", "initial", "fgrid", "couple", "rwalk", "branching",
}


@dataclass(frozen=True)
class ExperimentConfig:
    process: str
    weights: WeightSpec
    lambdas: tuple[float, ...]
    ds: tuple[int, ...]
    n_runs: int = 1000
    horizon: int | None = None  # generations; per-process default when unset
    t_max: float = 300.0
    pop_cap: int | None = None
    confidence: float = 0.99
    master_seed: int = 0
    out: str = "orlat-out"
    initial: tuple[tuple[int, ...], ...] | None = None
    options: dict = field(default_factory=dict)  # process-specific table

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return dataclasses.replace(self, **kw)

    def echo(self) -> dict:
        return {
            "process": self.process,
            "weights": self.weights.to_dict(),
            "lambda": list(self.lambdas),
            "d": list(self.ds),
            "n_runs": self.n_runs,
            "horizon": self.horizon,
            "t_max": self.t_max,
            "pop_cap": self.pop_cap,
            "confidence": self.confidence,
            "master_seed": self.master_seed,
            "initial": [list(v) for v in self.initial] if self.initial is not None else None,
            "options": self.options,
        }


def _as_list(value, name):
    if value is None:
        return []
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _positive(name, value, kind=float):
    try:
        v = kind(value)
    except (TypeError, ValueError):
        raise ConfigInvalid(f"{name} must be a {kind.__name__}, got {value!r}") from None
    if kind is int and isinstance(value, float) and value != int(value):
        raise ConfigInvalid(f"{name} must be an integer, got {value!r}")
    if v <= 0:
        raise ConfigInvalid(f"{name} must be positive, got {value!r}")
    return v


def parse(raw: dict, process: str | None = None) -> ExperimentConfig:
    """Validate a decoded TOML mapping.  ``process`` overrides the file's."""
    unknown = set(raw) - _KNOWN
    if unknown:
        raise ConfigInvalid(f"unknown keys: {sorted(unknown)}")
    proc = process or raw.get("process")
    if proc not in PROCESSES:
        raise ConfigInvalid(f"process must be one of {PROCESSES}, got {proc!r}")
    if "weights" not in raw:
        raise ConfigInvalid("missing [weights] table")
    try:
        spec = validate(raw["weights"])
    except WeightSpecError as exc:
        raise ConfigInvalid(f"weights: {exc}") from exc
    lambdas = tuple(_positive("lambda", v) for v in _as_list(raw.get("lambda"), "lambda"))
    ds = tuple(_positive("d", v, int) for v in _as_list(raw.get("d"), "d"))
    if not lambdas:
        raise ConfigInvalid("lambda list is empty")
    if proc not in ("theta",) and not ds:
        raise ConfigInvalid("d list is empty")
    confidence = float(raw.get("confidence", 0.99))
    if not 0.0 < confidence < 1.0:
        raise ConfigInvalid(f"confidence must be in (0, 1), got {confidence}")
    seed = raw.get("master_seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigInvalid(f"master_seed must be a non-negative integer, got {seed!r}")
    initial = raw.get("initial")
    if initial is not None:
        try:
            initial = tuple(tuple(int(c) for c in v) for v in initial)
        except (TypeError, ValueError):
            raise ConfigInvalid("initial must be a list of integer vertices") from None
        if any(c < 0 for v in initial for c in v):
            raise ConfigInvalid("initial vertices need non-negative coordinates")
    options = dict(raw.get(proc if proc != "gap" else "couple", {}) or {})
    if proc == "rwalk":
        options = dict(raw.get("rwalk", {}) or {})
        if options.get("mode", "collide") not in ("collide", "bound"):
            raise ConfigInvalid("rwalk.mode must be 'collide' or 'bound'")
    return ExperimentConfig(
        process=proc,
        weights=spec,
        lambdas=lambdas,
        ds=ds,
        n_runs=_positive("n_runs", raw.get("n_runs", 1000), int),
        horizon=_positive("horizon", raw["horizon"], int) if "horizon" in raw else None,
        t_max=_positive("t_max", raw.get("t_max", 300.0)),
        pop_cap=_positive("pop_cap", raw["pop_cap"], int) if "pop_cap" in raw else None,
        confidence=confidence,
        master_seed=seed,
        out=str(raw.get("out", "orlat-out")),
        initial=initial,
        options=options,
    )


def load(path: str | os.PathLike, process: str | None = None) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigInvalid(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigInvalid(f"{path}: {exc}") from exc
    return parse(raw, process)


def check_output_dir(path: str | os.PathLike) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigInvalid(f"output directory {out} not writable: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise ConfigInvalid(f"output directory {out} not writable")
    return out
