"""Closed-form stream/energy arithmetic for frequency-scalable nodes.

Everything here is pure and side-effect free: a token stream is described
by its inter-arrival interval and per-token work, a node by the throughput
and power draw of one frequency rung, and a schedule by how the node splits
each interval between processing and idling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

#: Relative tolerance used for all time/power consistency checks.  The
#: quantities involved span several orders of magnitude, so absolute
#: epsilons are deliberately avoided.
REL_TOL = 1e-9


def _check_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class StreamSpec:
    """A token stream: one token every ``d`` seconds costing ``k`` bogo-ops."""

    d: float
    k: float

    def __post_init__(self) -> None:
        d = _check_finite("d", self.d)
        k = _check_finite("k", self.k)
        if d <= 0:
            raise ValueError(f"d must be > 0, got {d}")
        if k < 0:
            raise ValueError(f"k must be >= 0, got {k}")

    @property
    def demand_rate(self) -> float:
        """Required processing speed in bogo-ops per second."""
        return self.k / self.d


@dataclass(frozen=True)
class NodeConfig:
    """One selectable CPU frequency rung, in kilohertz."""

    freq_khz: int

    def __post_init__(self) -> None:
        if self.freq_khz <= 0:
            raise ValueError(f"freq_khz must be > 0, got {self.freq_khz}")


@dataclass(frozen=True)
class FrequencyLadder:
    """The ordered set of selectable CPU frequencies, in kilohertz."""

    rungs: tuple[int, ...]

    def __post_init__(self) -> None:
        rungs = tuple(int(r) for r in self.rungs)
        if not rungs:
            raise ValueError("ladder must have at least one rung")
        if rungs[0] <= 0:
            raise ValueError(f"rungs must be > 0, got {rungs[0]}")
        if any(b <= a for a, b in zip(rungs, rungs[1:])):
            raise ValueError(f"rungs must be strictly increasing, got {rungs}")
        object.__setattr__(self, "rungs", rungs)

    def __len__(self) -> int:
        return len(self.rungs)

    def __iter__(self):
        return iter(self.rungs)

    def __contains__(self, freq_khz: int) -> bool:
        return freq_khz in self.rungs

    @property
    def bottom(self) -> int:
        return self.rungs[0]

    @property
    def top(self) -> int:
        return self.rungs[-1]

    def index(self, freq_khz: int) -> int:
        try:
            return self.rungs.index(freq_khz)
        except ValueError:
            raise ValueError(
                f"{freq_khz} kHz is not on the ladder; valid rungs: "
                f"{', '.join(str(r) for r in self.rungs)}"
            ) from None


@dataclass(frozen=True)
class PowerDraw:
    """A non-negative power draw in watts."""

    watts: float

    def __post_init__(self) -> None:
        w = _check_finite("watts", self.watts)
        if w < 0:
            raise ValueError(f"watts must be >= 0, got {w}")

    def __float__(self) -> float:
        return float(self.watts)


@dataclass(frozen=True)
class SchedulePlan:
    """A feasible per-token schedule on one frequency rung.

    ``t_p`` seconds of processing and ``t_d`` seconds of slack per token,
    summing to the stream interval; ``avg_power`` is the interval-averaged
    draw and ``energy_per_token`` its integral over one interval.
    """

    config: NodeConfig
    t_p: float
    t_d: float
    avg_power: float
    energy_per_token: float


@dataclass(frozen=True)
class Infeasible:
    """Marker value for a rung that cannot keep up with the stream.

    Carries the (negative) slack so callers can see by how much the rung
    falls short.  Infeasibility is data, not an error.
    """

    config: NodeConfig
    slack: float


def processing_time(k: float, v: float) -> float:
    """Seconds needed to process ``k`` bogo-ops at ``v`` bogo-ops/s."""
    k = _check_finite("k", k)
    v = _check_finite("v", v)
    if v <= 0:
        raise ValueError(f"v must be > 0, got {v}")
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    return k / v


def slack(stream: StreamSpec, t_p: float) -> float:
    """Time left before the next token arrives; negative means overload."""
    t_p = _check_finite("t_p", t_p)
    if t_p < 0:
        raise ValueError(f"t_p must be >= 0, got {t_p}")
    return stream.d - t_p


def average_power(
    p_full: PowerDraw,
    p_idle: PowerDraw,
    t_p: float,
    t_d: float,
    d: float,
) -> float:
    """Interval-averaged power of a busy/idle split of one stream interval.

    Requires a feasible split: both phases non-negative and summing to
    ``d`` within :data:`REL_TOL`.  Infeasible plans must be rejected
    before this call.
    """
    t_p = _check_finite("t_p", t_p)
    t_d = _check_finite("t_d", t_d)
    d = _check_finite("d", d)
    if d <= 0:
        raise ValueError(f"d must be > 0, got {d}")
    if t_p < 0:
        raise ValueError(f"t_p must be >= 0, got {t_p}")
    if t_d < 0:
        raise ValueError(f"t_d must be >= 0, got {t_d} (infeasible split)")
    if abs(t_p + t_d - d) > REL_TOL * d:
        raise ValueError(f"t_p + t_d = {t_p + t_d} does not match d = {d}")
    return (float(p_full) * t_p + float(p_idle) * t_d) / d


def make_plan(
    stream: StreamSpec,
    config: NodeConfig,
    v: float,
    p_full: PowerDraw,
    p_idle: PowerDraw,
) -> SchedulePlan | Infeasible:
    """Build the per-token schedule for one rung, or report infeasibility.

    The exactly-saturated case (zero slack) counts as feasible: a node
    that finishes each token just as the next arrives is sustainable.
    """
    t_p = processing_time(stream.k, v)
    t_d = slack(stream, t_p)
    if t_d < 0:
        return Infeasible(config=config, slack=t_d)
    avg = average_power(p_full, p_idle, t_p, t_d, stream.d)
    return SchedulePlan(
        config=config,
        t_p=t_p,
        t_d=t_d,
        avg_power=avg,
        energy_per_token=avg * stream.d,
    )
