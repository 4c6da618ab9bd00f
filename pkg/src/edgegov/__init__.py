"""DVFS benchmarking, power modeling and energy-optimal frequency selection."""

from .core import (
    FrequencyLadder,
    Infeasible,
    NodeConfig,
    PowerDraw,
    SchedulePlan,
    StreamSpec,
    average_power,
    make_plan,
    processing_time,
    slack,
)
from .device import (
    DeviceProfile,
    GovernorPolicy,
    StreamTrace,
    StressorReport,
    default_profile,
    governor_step,
    run_stressor,
    set_frequency,
    simulate_stream,
)
from .modelfit import EfficiencyGrid, PowerModel, efficiency, fit, query, query_throughput
from .optimizer import (
    GovernorComparison,
    OptimizationResult,
    compare_governors,
    optimize,
    sweep,
)
from .orchestrator import (
    BenchmarkRecord,
    CampaignSpec,
    load_records,
    loopback_transport,
    persist_records,
    run_campaign,
)

__version__ = "0.1.0"
