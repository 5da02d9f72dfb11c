"""(g1, g2) phase-diagram sweeps with an append-only checkpoint.

Cells are independent pure tasks.  Each runs with BLAS pinned to one thread
so its numbers do not depend on how many cells run side by side; the parent
process is the only writer of the checkpoint.
"""
from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from adicke.diagnostics import LevelWindow, r_statistic
from adicke.model import ModelParams
from adicke.otoc import otoc_deficit_at
from adicke.spectra import DEFAULT_CEILING, DEFAULT_TOL, converge_cutoff, order_parameter

log = logging.getLogger(__name__)

DIAGNOSTICS = ("r", "otoc", "order")
COLUMNS = ["g1", "g2", "j", "omega", "omega0", "beta", "t", "n_max", "r_mean", "otoc_deficit", "order_parameter"]


class ResumeMismatch(RuntimeError):
    pass


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    steps: int

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.steps)

    @classmethod
    def parse(cls, text: str) -> "Axis":
        lo, hi, steps = text.split(":")
        axis = cls(float(lo), float(hi), int(steps))
        if axis.steps < 1 or (axis.steps > 1 and axis.hi < axis.lo):
            raise ValueError(f"bad grid axis {text!r}")
        return axis


@dataclass(frozen=True)
class SweepConfig:
    g1: Axis
    g2: Axis
    omega: float = 1.0
    omega0: float = 1.0
    j: float = 10.0
    beta: float = 0.1
    t: float = 100.0
    shift: float = 100.0
    time_window: float = 0.0
    window: tuple[int, int] = (200, 1000)
    ceiling_energy: float | None = None
    diagnostics: tuple[str, ...] = ("r",)
    tol: float = DEFAULT_TOL
    ceiling: int = DEFAULT_CEILING

    def __post_init__(self):
        bad = set(self.diagnostics) - set(DIAGNOSTICS)
        if bad or not self.diagnostics:
            raise ValueError(f"diagnostics must be drawn from {DIAGNOSTICS}, got {self.diagnostics}")

    def fingerprint(self) -> dict:
        """Everything that changes cell results, in a JSON-stable form."""
        d = asdict(self)
        d["window"] = list(self.window)
        d["diagnostics"] = list(self.diagnostics)
        return d

    def cells(self) -> list[tuple[int, int, float, float]]:
        """Canonical g1-major ordering."""
        return [(a, b, float(x), float(y))
                for a, x in enumerate(self.g1.values())
                for b, y in enumerate(self.g2.values())]


@dataclass
class CellResult:
    i: int
    k: int
    g1: float
    g2: float
    status: str = "pending"
    n_max: int | None = None
    r_mean: float = math.nan
    otoc_deficit: float = math.nan
    order_parameter: float = math.nan
    cutoffs: dict = field(default_factory=dict)
    error: str = ""

    def row(self, cfg: SweepConfig) -> list:
        return [self.g1, self.g2, cfg.j, cfg.omega, cfg.omega0, cfg.beta, cfg.t, self.n_max,
                self.r_mean, self.otoc_deficit, self.order_parameter]


def evaluate_cell(cfg: SweepConfig, i: int, k: int, g1: float, g2: float) -> CellResult:
    res = CellResult(i, k, g1, g2)
    params = ModelParams(cfg.omega, cfg.omega0, g1, g2, cfg.j)
    try:
        with threadpool_limits(limits=1):
            if "r" in cfg.diagnostics:
                lo, hi = cfg.window
                spec = converge_cutoff(params, 1, hi, cfg.tol, cfg.ceiling)
                res.r_mean = r_statistic(spec, LevelWindow(lo, hi, cfg.ceiling_energy)).mean
                res.cutoffs["r"] = spec.params.n_max
            if "otoc" in cfg.diagnostics:
                d, series = otoc_deficit_at(params, cfg.beta, cfg.t, cfg.shift, cfg.time_window,
                                            tol=cfg.tol, ceiling=cfg.ceiling)
                res.otoc_deficit = d
                res.cutoffs["otoc"] = series.metadata["n_max"]
            if "order" in cfg.diagnostics:
                res.order_parameter = order_parameter(params, cfg.tol, cfg.ceiling)
        for name in ("r", "otoc"):
            if name in res.cutoffs:
                res.n_max = res.cutoffs[name]
                break
        res.status = "done"
    except Exception as exc:  # recorded per cell; the sweep carries on
        res.status = "failed"
        res.error = f"{type(exc).__name__}: {exc}"
    return res


def _cell_record(res: CellResult) -> dict:
    d = asdict(res)
    d["kind"] = "cell"
    return d


def load_checkpoint(path: Path, cfg: SweepConfig) -> dict[tuple[int, int], CellResult]:
    """Completed cells from ``path``; a torn trailing record is dropped."""
    if not path.exists():
        return {}
    good, done = [], {}
    with open(path) as fh:
        lines = fh.readlines()
    for n, line in enumerate(lines):
        try:
            rec = json.loads(line)
            if not line.endswith("\n"):
                raise ValueError("unterminated record")
        except ValueError:
            log.warning("dropping unreadable checkpoint record at line %d", n + 1)
            break
        if n == 0:
            if rec.get("kind") != "header":
                raise ResumeMismatch(f"{path} is not a sweep checkpoint")
            if rec["config"] != json.loads(json.dumps(cfg.fingerprint())):
                raise ResumeMismatch(f"checkpoint {path} was written for a different sweep configuration")
        else:
            rec.pop("kind", None)
            res = CellResult(**rec)
            done[(res.i, res.k)] = res
        good.append(line)
    if len(good) != len(lines):
        with open(path, "w") as fh:
            fh.writelines(good)
    if not good:
        return {}
    return done


class _Checkpoint:
    def __init__(self, path: Path, cfg: SweepConfig, fresh: bool):
        self.path = path
        path.parent.mkdir(parents=True, exist_ok=True)
        if fresh or not path.exists() or path.stat().st_size == 0:
            with open(path, "w") as fh:
                fh.write(json.dumps({"kind": "header", "config": cfg.fingerprint()}) + "\n")
        self.fh = open(path, "a")

    def append(self, res: CellResult):
        self.fh.write(json.dumps(_cell_record(res)) + "\n")
        self.fh.flush()
        os.fsync(self.fh.fileno())

    def close(self):
        self.fh.close()


def run_sweep(cfg: SweepConfig, checkpoint: Path, threads: int = 1, resume: bool = False,
              stop_after: int | None = None, progress=None) -> tuple[list[CellResult], bool]:
    """Evaluate every pending cell; returns (results in canonical order, complete?)."""
    checkpoint = Path(checkpoint)
    done = load_checkpoint(checkpoint, cfg) if resume else {}
    ckpt = _Checkpoint(checkpoint, cfg, fresh=not resume)
    pending = [c for c in cfg.cells() if (c[0], c[1]) not in done]
    if stop_after is not None:
        pending = pending[:stop_after]
    try:
        if threads <= 1:
            for cell in pending:
                res = evaluate_cell(cfg, *cell)
                done[(res.i, res.k)] = res
                ckpt.append(res)
                if progress:
                    progress(res)
        else:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                futures = [pool.submit(evaluate_cell, cfg, *cell) for cell in pending]
                for fut in as_completed(futures):
                    res = fut.result()
                    done[(res.i, res.k)] = res
                    ckpt.append(res)
                    if progress:
                        progress(res)
    finally:
        ckpt.close()
    ordered = [done[(i, k)] for i, k, _, _ in cfg.cells() if (i, k) in done]
    return ordered, len(ordered) == len(cfg.cells())


# Near g1 = g2 = 0 the level clusters are equally spaced and <r> is pushed
# towards 1; cells inside this radius are flagged rather than read as data.
MASK_RADIUS = 0.35


def masked(g1, g2, radius: float = MASK_RADIUS):
    return np.hypot(g1, g2) < radius


def annotations(cfg: SweepConfig, mask_radius: float = MASK_RADIUS) -> dict:
    return {
        "qpt_line": {"equation": "g1 + g2 = sqrt(omega * omega0)",
                     "value": math.sqrt(abs(cfg.omega * cfg.omega0))},
        "dicke_line": {"equation": "g1 = g2"},
        "mask": {"radius": mask_radius, "note": "cells with sqrt(g1^2 + g2^2) < radius are artefact-dominated"},
    }
