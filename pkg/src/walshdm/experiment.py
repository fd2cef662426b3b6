"""Run a configured experiment and persist its artifacts."""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

import walshdm
from walshdm.config import ExperimentConfig
from walshdm.controller import ControlRecord, rms, run_dual_update
from walshdm.fileio import read_surface_header, write_surface, write_surface_csv
from walshdm.plant import build_plant
from walshdm.shapes import desired_shape
from walshdm.walsh import build_basis

log = logging.getLogger(__name__)

CSV_COLUMNS = ["step", "u_norm", "eps_norm", "model_err_norm", "rms_nm", "bvls_flag"]


class OutputConflict(RuntimeError):
    """The output directory holds results from a different config."""


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    desired: np.ndarray
    records: list[ControlRecord]

    @property
    def least_squares_rms(self) -> float:
        return self.records[0].rms_surface_error_nm

    @property
    def final_rms(self) -> float:
        return self.records[-1].rms_surface_error_nm


def crop(surface: np.ndarray, px: int) -> np.ndarray:
    return surface[px:surface.shape[0] - px, px:surface.shape[1] - px] if px else surface


def cropped_rms(a: np.ndarray, b: np.ndarray, px: int = 0) -> float:
    return rms(crop(np.asarray(a), px), crop(np.asarray(b), px))


def run_experiment(cfg: ExperimentConfig, keep_surfaces: bool = True) -> ExperimentResult:
    basis = build_basis(cfg.order, cfg.modes)
    W_D, a_D = desired_shape(basis, cfg.recipe)
    plant_seed, excite_seed = cfg.seeds()
    plant = build_plant(replace(cfg.plant, seed=plant_seed))
    records = run_dual_update(plant, basis, a_D, cfg.control, desired=W_D, seed=excite_seed,
                              keep_surfaces=keep_surfaces)
    return ExperimentResult(cfg, W_D, records)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_convergence_csv(path: Path, records: list[ControlRecord], config_hash: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(CSV_COLUMNS)
        for rec in records:
            out.writerow([
                rec.step,
                _fmt(np.linalg.norm(rec.u)),
                _fmt(rec.coeff_error_norm),
                _fmt(rec.model_error_norm),
                _fmt(rec.rms_surface_error_nm),
                0 if rec.bvls_converged else 1,
            ])


def check_output_dir(out: Path, config_hash: str, force: bool = False) -> None:
    summary = out / "summary.json"
    if summary.exists() and not force:
        try:
            old = json.loads(summary.read_text()).get("config_hash")
        except (OSError, json.JSONDecodeError):
            old = None
        if old != config_hash:
            raise OutputConflict(f"{out} holds results for config {old}, not {config_hash}; use --force or another --out")
    surf_dir = out / "surfaces"
    if surf_dir.is_dir() and not force:
        for f in surf_dir.glob("*.surf"):
            if read_surface_header(f).get("config") != config_hash:
                raise OutputConflict(f"{f} was written by a different config")
            break


def write_artifacts(result: ExperimentResult, out: Path | None = None, force: bool = False,
                    started: float | None = None) -> dict:
    cfg = result.config
    out = Path(out or cfg.output)
    h = cfg.config_hash()
    check_output_dir(out, h, force)
    surf_dir = out / "surfaces"
    surf_dir.mkdir(parents=True, exist_ok=True)

    write_convergence_csv(out / "convergence.csv", result.records, h)
    for rec in result.records:
        if rec.surface is not None:
            write_surface(surf_dir / f"step_{rec.step:04d}.surf", rec.surface, h)
    final = result.records[-1].surface
    write_surface(out / "desired.surf", result.desired, h)
    write_surface_csv(out / "desired.csv", result.desired)
    if final is not None:
        write_surface(out / "final.surf", final, h)
        write_surface_csv(out / "final.csv", final)
        write_surface(out / "error.surf", result.desired - final, h)
    ls_surface = result.records[0].surface
    if ls_surface is not None:
        write_surface(out / "least_squares.surf", ls_surface, h)

    summary = {
        "config_name": cfg.name,
        "config_hash": h,
        "code_version": walshdm.__version__,
        "seed": cfg.seed,
        "n": cfg.n,
        "modes": cfg.modes,
        "actuators": cfg.plant.grid.count,
        "steps": len(result.records),
        "final_rms_nm": result.final_rms,
        "least_squares_rms_nm": result.least_squares_rms,
        "eps_norm_trajectory": [r.coeff_error_norm for r in result.records],
        "model_err_norm_trajectory": [r.model_error_norm for r in result.records],
        "rms_nm_trajectory": [r.rms_surface_error_nm for r in result.records],
        "bvls_flagged_steps": [r.step for r in result.records if not r.bvls_converged],
        "target_pipeline": "scale_nm * (filtered + offset)",
        "crop_px": cfg.crop_px,
        "started": started,
        "finished": time.time(),
    }
    if cfg.crop_px and final is not None and ls_surface is not None:
        summary["final_rms_cropped_nm"] = cropped_rms(result.desired, final, cfg.crop_px)
        summary["least_squares_rms_cropped_nm"] = cropped_rms(result.desired, ls_surface, cfg.crop_px)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary
