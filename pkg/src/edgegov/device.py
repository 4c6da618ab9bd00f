"""Synthetic DVFS edge node: calibrated curves, stressor, governors, simulator.

The device is deterministic: its throughput and power curves are exact
per-rung tables, and the only randomness is the seedable measurement noise
of the stressor.  The shipped "rpi4-like" profile is calibrated so that
full-load power is 2.0 W at the bottom rung, stays below 2.5 W up to
1.2 GHz, climbs to 4.75 W at the top rung, and full-load efficiency
(throughput per watt) peaks at 1.5 GHz.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .core import FrequencyLadder, NodeConfig, StreamSpec

DEFAULT_LADDER_KHZ = tuple(range(600_000, 1_800_001, 100_000))

#: Default relative standard deviation of stressor measurements.
DEFAULT_NOISE_SD = 0.02

_GHZ = 1e-6  # kHz -> GHz

# Default builtin curve constants.  Throughput is proportional to frequency;
# full-load power is P0 + c1*x + c3*x^gamma with x in GHz, idle power is
# affine in x.  P0/c1/c3 are solved at import from three calibration
# anchors, see _solve_power_constants.
_THROUGHPUT_A = 0.002          # bogo-ops/s per kHz
_POWER_GAMMA = 16
_IDLE_B0 = 1.6                 # watts
_IDLE_B1 = 0.5                 # watts per GHz
_EFF_PEAK_GHZ = 1.5


def _solve_power_constants(gamma: int = _POWER_GAMMA) -> tuple[float, float, float]:
    """Solve (P0, c1, c3) of the full-load power curve.

    Anchors: p(0.6 GHz) = 2.0 W, p(1.8 GHz) = 4.75 W, and the maximum of
    f/p(f) sits at 1.5 GHz.  The peak condition p - f*p' = 0 reduces to
    P0 = (gamma-1)*c3*f^gamma, which keeps the system linear.
    """
    f = _EFF_PEAK_GHZ
    a = np.array(
        [
            [1.0, 0.6, 0.6**gamma],
            [1.0, 1.8, 1.8**gamma],
            [1.0, 0.0, -(gamma - 1) * f**gamma],
        ]
    )
    b = np.array([2.0, 4.75, 0.0])
    p0, c1, c3 = np.linalg.solve(a, b)
    return float(p0), float(c1), float(c3)


@dataclass(frozen=True)
class DeviceProfile:
    """Ground-truth curves of a synthetic device, tabulated per rung."""

    name: str
    ladder: FrequencyLadder
    throughput_bops: tuple[float, ...]
    p_full_w: tuple[float, ...]
    p_idle_w: tuple[float, ...]
    noise_sd: float = 0.0
    curve_params: dict | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        n = len(self.ladder)
        for label, values in (
            ("throughput_bops", self.throughput_bops),
            ("p_full_w", self.p_full_w),
            ("p_idle_w", self.p_idle_w),
        ):
            if len(values) != n:
                raise ValueError(f"{label} must have one value per rung")
        thr = self.throughput_bops
        if any(b <= a for a, b in zip(thr, thr[1:])):
            raise ValueError("throughput must be strictly increasing on the ladder")
        if any(b < a for a, b in zip(self.p_full_w, self.p_full_w[1:])):
            raise ValueError("p_full must be non-decreasing on the ladder")
        if any(b < a for a, b in zip(self.p_idle_w, self.p_idle_w[1:])):
            raise ValueError("p_idle must be non-decreasing on the ladder")
        for pf, pi in zip(self.p_full_w, self.p_idle_w):
            if not (pf > pi > 0):
                raise ValueError(
                    f"need p_full > p_idle > 0 at every rung, got {pf} / {pi}"
                )
        if not 0 <= self.noise_sd <= 0.1:
            raise ValueError(f"noise_sd must be in [0, 0.1], got {self.noise_sd}")

    def throughput_at(self, freq_khz: int) -> float:
        return self.throughput_bops[self.ladder.index(freq_khz)]

    def p_full_at(self, freq_khz: int) -> float:
        return self.p_full_w[self.ladder.index(freq_khz)]

    def p_idle_at(self, freq_khz: int) -> float:
        return self.p_idle_w[self.ladder.index(freq_khz)]

    def with_noise(self, noise_sd: float) -> "DeviceProfile":
        return replace(self, noise_sd=noise_sd)


def default_profile(noise_sd: float = DEFAULT_NOISE_SD) -> DeviceProfile:
    """The builtin rpi4-like profile: 13 rungs from 600 MHz to 1.8 GHz."""
    p0, c1, c3 = _solve_power_constants()
    params = {
        "throughput": {"a": _THROUGHPUT_A},
        "power": {"P0": p0, "c1": c1, "c3": c3, "gamma": _POWER_GAMMA},
        "p_idle": {"b0": _IDLE_B0, "b1": _IDLE_B1},
    }
    return profile_from_dict(
        {
            "name": "rpi4-sim",
            "ladder_khz": list(DEFAULT_LADDER_KHZ),
            "noise_sd": noise_sd,
            **params,
        }
    )


def profile_from_dict(doc: dict) -> DeviceProfile:
    """Build a profile from its parametric JSON document."""
    try:
        ladder = FrequencyLadder(tuple(doc["ladder_khz"]))
        a = float(doc["throughput"]["a"])
        power = doc["power"]
        p0 = float(power["P0"])
        c1 = float(power["c1"])
        c3 = float(power["c3"])
        gamma = float(power.get("gamma", 3))
        idle = doc["p_idle"]
        b0 = float(idle["b0"])
        b1 = float(idle["b1"])
        name = str(doc["name"])
        noise_sd = float(doc.get("noise_sd", 0.0))
    except KeyError as exc:
        raise ValueError(f"profile document is missing field {exc}") from None
    ghz = [r * _GHZ for r in ladder]
    return DeviceProfile(
        name=name,
        ladder=ladder,
        throughput_bops=tuple(a * r for r in ladder),
        p_full_w=tuple(p0 + c1 * x + c3 * x**gamma for x in ghz),
        p_idle_w=tuple(b0 + b1 * x for x in ghz),
        noise_sd=noise_sd,
        curve_params={
            "throughput": {"a": a},
            "power": {"P0": p0, "c1": c1, "c3": c3, "gamma": gamma},
            "p_idle": {"b0": b0, "b1": b1},
        },
    )


def profile_to_dict(profile: DeviceProfile) -> dict:
    if profile.curve_params is None:
        raise ValueError(
            f"profile {profile.name!r} is table-based and has no parametric form"
        )
    return {
        "name": profile.name,
        "ladder_khz": list(profile.ladder),
        **profile.curve_params,
        "noise_sd": profile.noise_sd,
    }


def load_profile(path) -> DeviceProfile:
    with open(path, encoding="utf-8") as fh:
        return profile_from_dict(json.load(fh))


def save_profile(profile: DeviceProfile, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(profile_to_dict(profile), fh, indent=2, sort_keys=True)
        fh.write("\n")


def set_frequency(profile: DeviceProfile, freq_khz: int) -> NodeConfig:
    """Select a ladder rung; rejects off-ladder values listing valid rungs."""
    profile.ladder.index(freq_khz)  # raises with the rung listing
    return NodeConfig(freq_khz=freq_khz)


@dataclass(frozen=True)
class StressorReport:
    """One stressor run: measured throughput and power at a load level."""

    config: NodeConfig
    load_pct: int
    duration: float
    bogo_ops_per_sec: float
    power: float

    def __post_init__(self) -> None:
        if not 0 <= self.load_pct <= 100:
            raise ValueError(f"load_pct must be in 0..100, got {self.load_pct}")
        if self.duration <= 0:
            raise ValueError(f"duration must be > 0, got {self.duration}")
        if self.bogo_ops_per_sec < 0 or self.power < 0:
            raise ValueError("measurements must be >= 0")


def _noisy(value: float, noise_sd: float, rng: np.random.Generator) -> float:
    if noise_sd == 0.0:
        return value
    return max(0.0, value * (1.0 + noise_sd * rng.standard_normal()))


def run_stressor(
    profile: DeviceProfile,
    config: NodeConfig,
    load_pct: int,
    duration: float,
    seed,
) -> StressorReport:
    """Simulate a fixed-load stressor run at one rung.

    Expected throughput scales linearly with load; expected power is the
    affine blend of idle and full draw.  Both are perturbed by seeded
    multiplicative Gaussian noise (relative sd = profile.noise_sd) and
    clamped at zero, so identical seeds give identical reports.
    """
    if not isinstance(load_pct, int) or not 1 <= load_pct <= 100:
        raise ValueError(f"load_pct must be an integer in 1..100, got {load_pct!r}")
    if not (duration > 0 and math.isfinite(duration)):
        raise ValueError(f"duration must be > 0, got {duration}")
    f = config.freq_khz
    rng = np.random.default_rng(seed)
    bogo = _noisy(profile.throughput_at(f) * load_pct / 100.0, profile.noise_sd, rng)
    power = _noisy(
        profile.p_idle_at(f)
        + (profile.p_full_at(f) - profile.p_idle_at(f)) * load_pct / 100.0,
        profile.noise_sd,
        rng,
    )
    return StressorReport(
        config=config,
        load_pct=load_pct,
        duration=float(duration),
        bogo_ops_per_sec=bogo,
        power=power,
    )


def measure_idle(
    profile: DeviceProfile,
    config: NodeConfig,
    duration: float,
    seed,
) -> StressorReport:
    """Read the idle draw at one rung (load 0, zero throughput)."""
    if not (duration > 0 and math.isfinite(duration)):
        raise ValueError(f"duration must be > 0, got {duration}")
    rng = np.random.default_rng(seed)
    power = _noisy(profile.p_idle_at(config.freq_khz), profile.noise_sd, rng)
    return StressorReport(
        config=config,
        load_pct=0,
        duration=float(duration),
        bogo_ops_per_sec=0.0,
        power=power,
    )


_GOVERNOR_KINDS = ("performance", "powersave", "userspace", "ondemand",
                   "conservative", "schedutil")


@dataclass(frozen=True)
class GovernorPolicy:
    """One of the six cpufreq frequency-selection policies."""

    kind: str
    fixed_khz: int | None = None
    up_threshold: int = 80
    down_threshold: int = 20
    headroom: float = 1.25

    def __post_init__(self) -> None:
        if self.kind not in _GOVERNOR_KINDS:
            raise ValueError(
                f"unknown governor {self.kind!r}; expected one of {_GOVERNOR_KINDS}"
            )
        if self.kind == "userspace" and self.fixed_khz is None:
            raise ValueError("userspace governor needs a fixed frequency")
        if not 0 < self.up_threshold <= 100:
            raise ValueError(f"up_threshold must be in (0, 100], got {self.up_threshold}")
        if not 0 < self.down_threshold <= 100:
            raise ValueError(
                f"down_threshold must be in (0, 100], got {self.down_threshold}"
            )
        if self.kind == "conservative" and self.down_threshold >= self.up_threshold:
            raise ValueError("down_threshold must be below up_threshold")
        if self.headroom < 1:
            raise ValueError(f"headroom must be >= 1, got {self.headroom}")

    @classmethod
    def performance(cls):
        return cls(kind="performance")

    @classmethod
    def powersave(cls):
        return cls(kind="powersave")

    @classmethod
    def userspace(cls, fixed_khz: int):
        return cls(kind="userspace", fixed_khz=int(fixed_khz))

    @classmethod
    def ondemand(cls, up_threshold: int = 80):
        return cls(kind="ondemand", up_threshold=up_threshold)

    @classmethod
    def conservative(cls, up_threshold: int = 80, down_threshold: int = 20):
        return cls(kind="conservative", up_threshold=up_threshold,
                   down_threshold=down_threshold)

    @classmethod
    def schedutil(cls, headroom: float = 1.25):
        return cls(kind="schedutil", headroom=headroom)

    def label(self) -> str:
        if self.kind == "userspace":
            return f"userspace:{self.fixed_khz}"
        return self.kind


def parse_policy(text: str) -> GovernorPolicy:
    """Parse a CLI policy spec such as ``ondemand:90`` or ``userspace:900000``."""
    kind, _, arg = text.partition(":")
    if kind == "performance":
        return GovernorPolicy.performance()
    if kind == "powersave":
        return GovernorPolicy.powersave()
    if kind == "userspace":
        if not arg:
            raise ValueError("userspace policy needs a frequency, e.g. userspace:900000")
        return GovernorPolicy.userspace(int(arg))
    if kind == "ondemand":
        return GovernorPolicy.ondemand(int(arg)) if arg else GovernorPolicy.ondemand()
    if kind == "conservative":
        if arg:
            up, _, down = arg.partition(",")
            return GovernorPolicy.conservative(int(up), int(down) if down else 20)
        return GovernorPolicy.conservative()
    if kind == "schedutil":
        return GovernorPolicy.schedutil(float(arg)) if arg else GovernorPolicy.schedutil()
    raise ValueError(f"unknown policy {text!r}")


def governor_step(
    policy: GovernorPolicy,
    current: NodeConfig,
    utilization: float,
    ladder: FrequencyLadder,
) -> NodeConfig:
    """Apply one governor decision given the utilization seen at `current`.

    The ondemand intermediate rung is chosen by frequency fraction of the
    top rung, which matches the throughput-fraction rule exactly for
    devices whose throughput is proportional to frequency.
    """
    if not 0 <= utilization <= 100:
        raise ValueError(f"utilization must be in [0, 100], got {utilization}")
    rungs = ladder.rungs
    if policy.kind == "performance":
        return NodeConfig(ladder.top)
    if policy.kind == "powersave":
        return NodeConfig(ladder.bottom)
    if policy.kind == "userspace":
        ladder.index(policy.fixed_khz)
        return NodeConfig(policy.fixed_khz)
    if policy.kind == "ondemand":
        if utilization > policy.up_threshold:
            return NodeConfig(ladder.top)
        target = ladder.top * utilization / 100.0
        for r in rungs:
            if r >= target:
                return NodeConfig(r)
        return NodeConfig(ladder.top)
    if policy.kind == "conservative":
        i = ladder.index(current.freq_khz)
        if utilization > policy.up_threshold:
            i = min(i + 1, len(rungs) - 1)
        elif utilization < policy.down_threshold:
            i = max(i - 1, 0)
        return NodeConfig(rungs[i])
    # schedutil: smallest rung covering headroom * f_top * util
    target = policy.headroom * ladder.top * utilization / 100.0
    for r in rungs:
        if r >= target:
            return NodeConfig(r)
    return NodeConfig(ladder.top)


@dataclass(frozen=True)
class TokenRecord:
    arrival_time: float
    start_time: float
    finish_time: float
    freq_khz: int


@dataclass(frozen=True)
class StreamTrace:
    """Outcome of one simulated stream run."""

    tokens: tuple[TokenRecord, ...]
    energy: float
    backlog_max: int
    dropped: int
    horizon: float

    def avg_freq_khz(self) -> float:
        if not self.tokens:
            return 0.0
        return sum(t.freq_khz for t in self.tokens) / len(self.tokens)


def simulate_stream(
    profile: DeviceProfile,
    policy,
    stream: StreamSpec,
    n_tokens: int,
    queue_capacity: int,
) -> StreamTrace:
    """Event-driven run of ``n_tokens`` arrivals through the device.

    Token i arrives at i*d.  Tokens wait FIFO up to ``queue_capacity``;
    arrivals beyond that are dropped.  Each token runs to completion at
    the frequency the governor picks at its start instant; the governor
    sees the utilization the stream would impose at the pre-step
    frequency.  Energy integrates full power over busy intervals and the
    idle draw of the currently-set rung over gaps, across a horizon of at
    least ``n_tokens * d``.

    ``policy`` may be a :class:`GovernorPolicy` or a fixed
    :class:`~edgegov.core.NodeConfig`.
    """
    if n_tokens < 1:
        raise ValueError(f"n_tokens must be >= 1, got {n_tokens}")
    if queue_capacity < 0:
        raise ValueError(f"queue_capacity must be >= 0, got {queue_capacity}")

    fixed: NodeConfig | None = None
    if isinstance(policy, NodeConfig):
        fixed = policy
    elif policy.kind == "userspace":
        fixed = NodeConfig(policy.fixed_khz)
    if fixed is not None:
        profile.ladder.index(fixed.freq_khz)
        current = fixed
    elif policy.kind == "performance":
        current = NodeConfig(profile.ladder.top)
    else:
        # reactive policies and powersave start from the bottom rung
        current = NodeConfig(profile.ladder.bottom)

    d, k = stream.d, stream.k
    queue: deque[float] = deque()
    tokens: list[TokenRecord] = []
    energy = 0.0
    clock = 0.0          # end of the last accounted interval
    free_at = 0.0        # when the node finishes its current token
    backlog_max = 0
    dropped = 0

    def start_token(arrival: float, start: float) -> None:
        nonlocal current, energy, clock, free_at
        if fixed is not None:
            chosen = fixed
        else:
            util = min(100.0, 100.0 * k / (d * profile.throughput_at(current.freq_khz)))
            chosen = governor_step(policy, current, util, profile.ladder)
        idle_gap = start - clock
        if idle_gap > 0:
            energy += idle_gap * profile.p_idle_at(current.freq_khz)
        t_p = k / profile.throughput_at(chosen.freq_khz)
        energy += t_p * profile.p_full_at(chosen.freq_khz)
        clock = start + t_p
        free_at = clock
        current = chosen
        tokens.append(TokenRecord(arrival, start, clock, chosen.freq_khz))

    for i in range(n_tokens):
        arrival = i * d
        # start any queued tokens whose turn comes before this arrival
        while queue and free_at <= arrival:
            start_token(queue.popleft(), free_at)
        if free_at <= arrival and not queue:
            start_token(arrival, arrival)
        elif len(queue) < queue_capacity:
            queue.append(arrival)
            backlog_max = max(backlog_max, len(queue))
        else:
            dropped += 1
    while queue:
        start_token(queue.popleft(), free_at)

    horizon = max(clock, n_tokens * d)
    if horizon > clock:
        energy += (horizon - clock) * profile.p_idle_at(current.freq_khz)

    return StreamTrace(
        tokens=tuple(tokens),
        energy=energy,
        backlog_max=backlog_max,
        dropped=dropped,
        horizon=horizon,
    )
