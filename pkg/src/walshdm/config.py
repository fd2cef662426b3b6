"""Experiment configuration: INI sections per module.

Bundled configs live in ``walshdm/configs`` and can be referenced by name.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from walshdm.controller import ControlParams
from walshdm.plant import ActuatorGrid, PlantConfig
from walshdm.shapes import ShapeRecipe
from walshdm.walsh import MAX_ORDER

OUT_ENV = "WALSHDM_OUT"


class ConfigError(ValueError):
    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class ExperimentConfig:
    order: int
    modes: int
    plant: PlantConfig
    control: ControlParams
    recipe: ShapeRecipe
    seed: int
    output: Path
    crop_px: int = 0
    name: str = "experiment"
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return 1 << self.order

    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def seeds(self) -> tuple[int, int]:
        """(plant noise seed, excitation seed) derived from the experiment seed."""
        a, b = np.random.SeedSequence(self.seed).generate_state(2)
        return int(a), int(b)


def bundled_configs() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files("walshdm.configs").iterdir() if p.name.endswith(".ini"))


def resolve_config(name_or_path: str) -> Path | None:
    p = Path(name_or_path)
    if p.exists():
        return p
    if name_or_path in bundled_configs():
        return Path(str(resources.files("walshdm.configs") / f"{name_or_path}.ini"))
    return None


class _Reader:
    def __init__(self, cp: configparser.ConfigParser):
        self.cp = cp
        self.used: dict[str, dict[str, str]] = {}

    def _raw(self, section, key, required):
        if not self.cp.has_section(section):
            if required:
                raise ConfigError(f"missing config section [{section}]", f"{section}.{key}")
            return None
        if not self.cp.has_option(section, key):
            if required:
                raise ConfigError(f"missing config field {section}.{key}", f"{section}.{key}")
            return None
        value = self.cp.get(section, key).strip()
        self.used.setdefault(section, {})[key] = value
        return value

    def get(self, section, key, kind, default=None, required=False):
        value = self._raw(section, key, required)
        if value is None:
            return default
        try:
            if kind is bool:
                return self.cp.getboolean(section, key)
            return kind(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {section}.{key}: {value!r}", f"{section}.{key}") from exc


def parse_terms(text: str) -> tuple[tuple[int, int, float], ...]:
    terms = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.replace(",", " ").split()
        if len(parts) != 3:
            raise ConfigError(f"shape term {chunk!r} must be 'p q coeff'", "shape.terms")
        terms.append((int(parts[0]), int(parts[1]), float(parts[2])))
    return tuple(terms)


def load_config(path, seed: int | None = None, output: str | None = None, crop: int | None = None) -> ExperimentConfig:
    """Parse and validate an experiment config; keyword arguments override the file."""
    src = resolve_config(str(path))
    if src is None:
        raise ConfigError(f"config not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read(src)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {src}: {exc}") from exc
    rd = _Reader(cp)

    order = rd.get("basis", "order", int, required=True)
    modes = rd.get("basis", "modes", int, required=True)
    if not 1 <= order <= MAX_ORDER:
        raise ConfigError(f"basis.order must lie in 1..{MAX_ORDER}", "basis.order")
    n = 1 << order
    if not 1 <= modes <= n:
        raise ConfigError(f"basis.modes must lie in 1..{n}", "basis.modes")

    try:
        grid = ActuatorGrid.regular(
            rd.get("plant", "rows", int, required=True),
            rd.get("plant", "cols", int, required=True),
            n,
            rd.get("plant", "inactive_corners", bool, False),
        )
        plant = PlantConfig(
            grid=grid,
            n=n,
            beta_true=rd.get("plant", "beta_true", float, 1.742),
            kernel_sigma_px=rd.get("plant", "kernel_sigma_px", float),
            stroke_nm=rd.get("plant", "stroke_nm", float, 3500.0),
            noise_sigma_nm=rd.get("plant", "noise_sigma_nm", float, 2.0),
            drift_rate=rd.get("plant", "drift_rate", float, 0.0),
            polarity=rd.get("plant", "polarity", int, 1),
        )
        control = ControlParams(
            samples=rd.get("controller", "samples", int),
            beta=rd.get("controller", "beta", float, required=True),
            lam=rd.get("controller", "lambda", float, 0.98),
            p0_scale=rd.get("controller", "p0_scale", float, 0.05),
            max_steps=rd.get("controller", "max_steps", int, required=True),
            stop_tol=rd.get("controller", "stop_tol", float, 0.0),
            stall_window=rd.get("controller", "stall_window", int, 5),
            stall_tol=rd.get("controller", "stall_tol", float, 1e-4),
            adapt=rd.get("controller", "adapt", bool, True),
        )
        terms = parse_terms(rd.get("shape", "terms", str, required=True))
        for p, q, _ in terms:
            if not (1 <= p <= modes and 1 <= q <= modes):
                raise ConfigError(f"shape term ({p},{q}) outside 1..{modes}", "shape.terms")
        recipe = ShapeRecipe(
            terms=terms,
            filter_sigma_px=rd.get("shape", "filter_sigma_px", float, required=True),
            filter_support_px=rd.get("shape", "filter_support_px", int),
            offset=rd.get("shape", "offset", float, -1.0),
            target_scale_nm=rd.get("shape", "target_scale_nm", float, 400.0),
        )
        if recipe.filter_support_px > n:
            raise ConfigError(f"filter support {recipe.filter_support_px} exceeds n={n}", "shape.filter_support_px")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    if control.samples is not None and control.samples < grid.count:
        raise ConfigError(f"controller.samples must be >= actuator count {grid.count}", "controller.samples")

    file_seed = rd.get("experiment", "seed", int, 0)
    seed = file_seed if seed is None else int(seed)
    out = output or os.environ.get(OUT_ENV) or rd.get("experiment", "output", str) or f"runs/{src.stem}"
    crop = rd.get("experiment", "crop_px", int, 0) if crop is None else int(crop)
    if crop < 0 or 2 * crop >= n:
        raise ConfigError("experiment.crop_px leaves no pixels", "experiment.crop_px")

    raw = {s: dict(v) for s, v in rd.used.items()}
    raw.setdefault("experiment", {})["seed"] = str(seed)
    raw["experiment"].pop("output", None)
    raw["experiment"]["crop_px"] = str(crop)
    return ExperimentConfig(
        order=order,
        modes=modes,
        plant=plant,
        control=control,
        recipe=recipe,
        seed=seed,
        output=Path(out),
        crop_px=crop,
        name=src.stem,
        raw=raw,
    )
