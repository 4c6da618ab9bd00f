"""Fit benchmark records into a queryable power/throughput model.

The model is deliberately assumption-free: per-cell means over repetitions
on the measured (frequency x load) grid, bilinear interpolation between
grid nodes, clamped at the hull.  The throughput curve comes from the
full-load cells and the idle curve from the load-0 cells.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .core import FrequencyLadder


class IncompleteGridError(ValueError):
    """Records do not cover the full (configs x loads) grid."""

    def __init__(self, missing):
        self.missing = tuple(missing)
        cells = ", ".join(f"(freq={f} kHz, load={u}%)" for f, u in self.missing)
        super().__init__(f"incomplete benchmark grid; missing cells: {cells}")


@dataclass(frozen=True)
class PowerModel:
    """Fitted power surface, throughput curve and idle curve."""

    ladder: FrequencyLadder
    loads: tuple[int, ...]            # ascending, includes 0
    power_grid: np.ndarray            # watts, shape (n_rungs, n_loads)
    throughput_curve: np.ndarray      # bogo-ops/s per rung, from load-100 cells
    idle_curve: np.ndarray            # watts per rung, from load-0 cells
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        grid = np.asarray(self.power_grid, dtype=float)
        thr = np.asarray(self.throughput_curve, dtype=float)
        idle = np.asarray(self.idle_curve, dtype=float)
        n, m = len(self.ladder), len(self.loads)
        if grid.shape != (n, m):
            raise ValueError(f"power_grid must have shape ({n}, {m}), got {grid.shape}")
        if thr.shape != (n,) or idle.shape != (n,):
            raise ValueError("curves must have one value per rung")
        if 0 not in self.loads or 100 not in self.loads:
            raise ValueError("loads must include 0 (idle) and 100 (full)")
        if list(self.loads) != sorted(set(self.loads)):
            raise ValueError(f"loads must be strictly ascending, got {self.loads}")
        if np.any(thr <= 0):
            raise ValueError("throughput curve must be strictly positive")
        for arr in (grid, thr, idle):
            arr.setflags(write=False)
        object.__setattr__(self, "power_grid", grid)
        object.__setattr__(self, "throughput_curve", thr)
        object.__setattr__(self, "idle_curve", idle)


def fit(records) -> PowerModel:
    """Average repeated cells and assemble the model.

    The ladder and load axis are inferred from the records; every
    (rung, load) cell must be present at least once, otherwise the
    missing cells are enumerated in the raised error.  A non-monotone
    throughput curve is tolerated (real measurements jitter) but noted
    on the model.
    """
    if not records:
        raise ValueError("cannot fit an empty record list")
    powers = defaultdict(list)
    bogos = defaultdict(list)
    for r in records:
        key = (r.config.freq_khz, r.load_pct)
        powers[key].append(r.power)
        bogos[key].append(r.bogo_ops_per_sec)

    rungs = sorted({f for f, _ in powers})
    loads = sorted({u for _, u in powers})
    missing = [(f, u) for f in rungs for u in loads if (f, u) not in powers]
    if missing:
        raise IncompleteGridError(missing)

    ladder = FrequencyLadder(tuple(rungs))
    grid = np.array([[np.mean(powers[(f, u)]) for u in loads] for f in rungs])
    thr = np.array([np.mean(bogos[(f, 100)]) for f in rungs])
    notes = ()
    if np.any(np.diff(thr) <= 0):
        notes = ("throughput curve is not strictly increasing",)
    return PowerModel(
        ladder=ladder,
        loads=tuple(loads),
        power_grid=grid,
        throughput_curve=thr,
        idle_curve=grid[:, loads.index(0)].copy(),
        warnings=notes,
    )


def _bracket(axis: np.ndarray, x: float) -> tuple[int, int, float]:
    """Clamped bracketing indices and interpolation weight on one axis."""
    x = min(max(x, axis[0]), axis[-1])
    hi = int(np.searchsorted(axis, x, side="left"))
    if hi == 0:
        return 0, 0, 0.0
    lo = hi - 1
    if axis[hi] == axis[lo]:
        return lo, hi, 0.0
    return lo, hi, (x - axis[lo]) / (axis[hi] - axis[lo])


def query(model: PowerModel, freq_khz: float, load_pct: float) -> float:
    """Bilinear power lookup, exact at grid nodes, clamped at the hull."""
    faxis = np.asarray(model.ladder.rungs, dtype=float)
    uaxis = np.asarray(model.loads, dtype=float)
    i0, i1, wf = _bracket(faxis, float(freq_khz))
    j0, j1, wu = _bracket(uaxis, float(load_pct))
    g = model.power_grid
    low = g[i0, j0] * (1 - wu) + g[i0, j1] * wu
    high = g[i1, j0] * (1 - wu) + g[i1, j1] * wu
    return float(low * (1 - wf) + high * wf)


def query_throughput(model: PowerModel, freq_khz: float) -> float:
    """Linear throughput lookup along the ladder, clamped at the ends."""
    faxis = np.asarray(model.ladder.rungs, dtype=float)
    return float(np.interp(float(freq_khz), faxis, model.throughput_curve))


@dataclass(frozen=True)
class EfficiencyGrid:
    """Bogo-ops per joule across the grid, normalized to the global maximum."""

    ladder: FrequencyLadder
    loads: tuple[int, ...]
    raw: np.ndarray          # bogo-ops per joule
    values: np.ndarray       # raw / max(raw), in [0, 1]
    best_cell: tuple[int, int]   # (freq_khz, load_pct) of the maximum

    def __post_init__(self) -> None:
        for arr in (self.raw, self.values):
            np.asarray(arr).setflags(write=False)


def efficiency(model: PowerModel) -> EfficiencyGrid:
    """Normalized efficiency over the fitted grid.

    raw(f, u) = throughput(f) * u/100 / power(f, u); the load-0 row is
    zero by definition.  The maximum cell is reported with ties broken
    toward the lowest frequency, then the lowest load (row-major argmax).
    """
    if np.any(model.power_grid <= 0):
        raise ValueError("power grid contains non-positive cells")
    loads = np.asarray(model.loads, dtype=float)
    raw = model.throughput_curve[:, None] * (loads[None, :] / 100.0) / model.power_grid
    raw[:, loads == 0] = 0.0
    peak = float(raw.max())
    values = raw / peak
    flat = int(np.argmax(raw))  # row-major: lowest freq, then lowest load wins ties
    i, j = divmod(flat, raw.shape[1])
    return EfficiencyGrid(
        ladder=model.ladder,
        loads=model.loads,
        raw=raw,
        values=values,
        best_cell=(model.ladder.rungs[i], model.loads[j]),
    )


def model_to_dict(model: PowerModel) -> dict:
    return {
        "ladder_khz": list(model.ladder),
        "loads": list(model.loads),
        "power_grid_w": [float(x) for x in model.power_grid.ravel()],
        "throughput_bops": [float(x) for x in model.throughput_curve],
        "idle_w": [float(x) for x in model.idle_curve],
    }


def model_from_dict(doc: dict) -> PowerModel:
    try:
        ladder = FrequencyLadder(tuple(doc["ladder_khz"]))
        loads = tuple(int(u) for u in doc["loads"])
        grid = np.array(doc["power_grid_w"], dtype=float).reshape(
            len(ladder), len(loads)
        )
        thr = np.array(doc["throughput_bops"], dtype=float)
        idle = np.array(doc["idle_w"], dtype=float)
    except KeyError as exc:
        raise ValueError(f"model document is missing field {exc}") from None
    return PowerModel(
        ladder=ladder,
        loads=loads,
        power_grid=grid,
        throughput_curve=thr,
        idle_curve=idle,
    )


def save_model(model: PowerModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> PowerModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
