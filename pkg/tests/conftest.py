"""Shared fixtures and generators for the test suite."""

import numpy as np
import pytest

from edgegov.core import FrequencyLadder
from edgegov.device import DeviceProfile, default_profile


@pytest.fixture
def quiet_profile() -> DeviceProfile:
    """The builtin profile with measurement noise disabled."""
    return default_profile(noise_sd=0.0)


def random_profile(rng: np.random.Generator) -> DeviceProfile:
    """A random device satisfying every profile invariant.

    Ladders, throughput and power curves are all randomized; monotonicity
    is imposed constructively (cumulative sums and running maxima).
    """
    n = int(rng.integers(3, 14))
    rungs = np.sort(rng.choice(np.arange(100_000, 3_000_001, 50_000), n, replace=False))
    thr = np.cumsum(rng.uniform(50.0, 800.0, n))
    p_idle = 0.5 + np.cumsum(rng.uniform(0.0, 0.3, n))
    p_full = np.maximum.accumulate(p_idle + rng.uniform(0.05, 2.0, n))
    return DeviceProfile(
        name=f"random-{rng.integers(1 << 30)}",
        ladder=FrequencyLadder(tuple(int(r) for r in rungs)),
        throughput_bops=tuple(thr),
        p_full_w=tuple(p_full),
        p_idle_w=tuple(p_idle),
        noise_sd=0.0,
    )


def brute_force_optimum(profile: DeviceProfile, d: float, k: float):
    """Independent oracle: re-derive the best rung from first principles.

    Deliberately avoids edgegov.core/optimizer code paths: plain loops and
    arithmetic straight from the energy objective.
    """
    best = None
    for i, f in enumerate(profile.ladder.rungs):
        v = profile.throughput_bops[i]
        t_p = k / v
        t_d = d - t_p
        if t_d < 0:
            continue
        avg = (profile.p_full_w[i] * t_p + profile.p_idle_w[i] * t_d) / d
        if best is None or avg < best[1]:
            best = (f, avg)
    return best  # None when infeasible everywhere
