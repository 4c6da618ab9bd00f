"""Energy-optimal frequency selection and governor comparison.

The search is an exhaustive evaluation over the ladder: configurations
are discrete, so nothing fancier is warranted.  Ties in average power are
broken toward the lower frequency (more thermal headroom).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

from . import modelfit
from .core import (
    Infeasible,
    NodeConfig,
    PowerDraw,
    SchedulePlan,
    StreamSpec,
    make_plan,
)
from .device import DeviceProfile, GovernorPolicy, simulate_stream
from .modelfit import PowerModel

SWEEP_CSV_HEADER = (
    "d_s",
    "k_bops",
    "best_freq_khz",
    "avg_power_w",
    "energy_per_token_j",
    "feasible",
)


def _curves(source):
    """Uniform (ladder, v, p_full, p_idle) accessors over profile or model."""
    if isinstance(source, DeviceProfile):
        return (
            source.ladder,
            source.throughput_at,
            source.p_full_at,
            source.p_idle_at,
        )
    if isinstance(source, PowerModel):
        return (
            source.ladder,
            lambda f: modelfit.query_throughput(source, f),
            lambda f: modelfit.query(source, f, 100),
            lambda f: modelfit.query(source, f, 0),
        )
    raise TypeError(f"expected DeviceProfile or PowerModel, got {type(source).__name__}")


@dataclass(frozen=True)
class OptimizationResult:
    stream: StreamSpec
    best: SchedulePlan | None      # None when no rung can keep up
    per_rung: tuple[tuple[NodeConfig, SchedulePlan | Infeasible], ...]

    @property
    def feasible(self) -> bool:
        return self.best is not None


def optimize(source, stream: StreamSpec) -> OptimizationResult:
    """Pick the rung minimizing average power for the stream.

    ``source`` is a ground-truth :class:`DeviceProfile` or a fitted
    :class:`PowerModel`.  Every rung is evaluated; the feasible plan with
    the lowest average power wins, lower frequency on ties.
    """
    ladder, v_at, p_full_at, p_idle_at = _curves(source)
    per_rung = []
    best: SchedulePlan | None = None
    for f in ladder:
        cfg = NodeConfig(f)
        plan = make_plan(
            stream,
            cfg,
            v_at(f),
            PowerDraw(p_full_at(f)),
            PowerDraw(p_idle_at(f)),
        )
        per_rung.append((cfg, plan))
        if isinstance(plan, SchedulePlan):
            if best is None or plan.avg_power < best.avg_power:
                best = plan
    return OptimizationResult(stream=stream, best=best, per_rung=tuple(per_rung))


def sweep(source, d_values, k_values) -> list[OptimizationResult]:
    """Cartesian sweep over stream intensities, ordered by (d, k) index."""
    if not d_values or not k_values:
        raise ValueError("sweep needs non-empty d and k axes")
    return [
        optimize(source, StreamSpec(d=d, k=k)) for d in d_values for k in k_values
    ]


def sweep_to_csv(results, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_HEADER)
        for res in results:
            if res.feasible:
                writer.writerow(
                    [
                        f"{res.stream.d:.17g}",
                        f"{res.stream.k:.17g}",
                        res.best.config.freq_khz,
                        f"{res.best.avg_power:.17g}",
                        f"{res.best.energy_per_token:.17g}",
                        "true",
                    ]
                )
            else:
                writer.writerow(
                    [f"{res.stream.d:.17g}", f"{res.stream.k:.17g}", "", "", "", "false"]
                )


@dataclass(frozen=True)
class GovernorRow:
    policy: str
    energy: float
    backlog_max: int
    dropped: int
    avg_freq_khz: float


@dataclass(frozen=True)
class GovernorComparison:
    rows: tuple[GovernorRow, ...]
    baseline_energy: float | None     # optimal static plan, None if infeasible
    baseline_freq_khz: int | None


def compare_governors(
    profile: DeviceProfile,
    stream: StreamSpec,
    n_tokens: int,
    policies,
    queue_capacity: int = 0,
) -> GovernorComparison:
    """Simulate each policy on the same stream and report energies.

    The baseline is the optimal static configuration simulated the same
    way, so closed-form and simulator agree by construction.  Noise never
    enters here: the trace simulator is deterministic.
    """
    rows = []
    for policy in policies:
        trace = simulate_stream(profile, policy, stream, n_tokens, queue_capacity)
        rows.append(
            GovernorRow(
                policy=policy.label() if isinstance(policy, GovernorPolicy) else str(policy),
                energy=trace.energy,
                backlog_max=trace.backlog_max,
                dropped=trace.dropped,
                avg_freq_khz=trace.avg_freq_khz(),
            )
        )
    result = optimize(profile, stream)
    baseline_energy = None
    baseline_freq = None
    if result.feasible:
        baseline_freq = result.best.config.freq_khz
        trace = simulate_stream(
            profile, result.best.config, stream, n_tokens, queue_capacity
        )
        baseline_energy = trace.energy
    return GovernorComparison(
        rows=tuple(rows),
        baseline_energy=baseline_energy,
        baseline_freq_khz=baseline_freq,
    )


def comparison_to_dict(cmp: GovernorComparison) -> dict:
    return {
        "rows": [
            {
                "policy": r.policy,
                "energy_j": r.energy,
                "backlog_max": r.backlog_max,
                "dropped": r.dropped,
                "avg_freq_khz": r.avg_freq_khz,
            }
            for r in cmp.rows
        ],
        "baseline": {
            "energy_j": cmp.baseline_energy,
            "freq_khz": cmp.baseline_freq_khz,
        },
    }


def comparison_to_json(cmp: GovernorComparison) -> str:
    return json.dumps(comparison_to_dict(cmp), indent=2, sort_keys=True)
