"""Benchmark campaign engine over a pluggable SUT transport.

A campaign walks the (configuration x load) grid in a fixed loop order:
configurations outer, loads inner, with one extra idle (load 0) cell per
configuration so the idle draw is measured rather than extrapolated.
Two transports ship: an in-process loopback bound to the device simulator
(used everywhere in tests) and a broker-style transport that speaks the
wire protocol over an injectable publish/deliver pair.
"""

from __future__ import annotations

import csv
import logging
import time
import uuid
from dataclasses import dataclass

import numpy as np

from . import device
from .core import NodeConfig
from .device import DeviceProfile, StressorReport
from .protocol import (
    FEEDBACK_TOPIC,
    WireMessage,
    command_topic,
    decode_message,
    encode_message,
)

log = logging.getLogger(__name__)

CSV_HEADER = (
    "freq_khz",
    "load_pct",
    "bogo_ops_per_sec",
    "power_w",
    "duration_s",
    "repetition",
    "timestamp",
)


class TransportError(RuntimeError):
    """Transport-level failure (timeout, broken pipe, ...)."""


class ConfigRejected(TransportError):
    """The SUT refused to apply the requested configuration."""


class CampaignAborted(RuntimeError):
    """Campaign stopped mid-grid; partial results are preserved."""

    def __init__(self, cell: tuple[int, int], partial, cause: Exception):
        super().__init__(
            f"campaign aborted at cell (freq={cell[0]} kHz, load={cell[1]}%): {cause}"
        )
        self.cell = cell
        self.partial = partial
        self.cause = cause


@dataclass(frozen=True)
class CampaignSpec:
    """Parameters of one Algorithm-style grid sweep."""

    configs: tuple[NodeConfig, ...]
    loads: tuple[int, ...] = tuple(range(10, 101, 10))
    stress_duration: float = 15.0
    settle_wait: float = 0.0
    repetitions: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.configs:
            raise ValueError("campaign needs at least one configuration")
        loads = tuple(int(x) for x in self.loads)
        if not loads:
            raise ValueError("campaign needs at least one load level")
        if any(not 1 <= x <= 100 for x in loads):
            raise ValueError(f"loads must lie in 1..100, got {loads}")
        if list(loads) != sorted(set(loads)):
            raise ValueError(f"loads must be strictly ascending, got {loads}")
        if self.stress_duration <= 0:
            raise ValueError("stress_duration must be > 0")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        object.__setattr__(self, "loads", loads)
        object.__setattr__(self, "configs", tuple(self.configs))

    def expected_records(self) -> int:
        return len(self.configs) * (len(self.loads) + 1) * self.repetitions


@dataclass(frozen=True)
class BenchmarkRecord:
    """One measured grid cell."""

    config: NodeConfig
    load_pct: int
    bogo_ops_per_sec: float
    power: float
    duration: float
    repetition: int
    timestamp: float


def cell_seed(seed: int, config_index: int, load_pct: int, repetition: int) -> int:
    """Stable per-cell RNG seed derived from the campaign seed."""
    ss = np.random.SeedSequence((seed, config_index, load_pct, repetition))
    return int(ss.generate_state(1)[0])


class LoopbackTransport:
    """Zero-I/O transport driving a simulated device in process."""

    def __init__(self, profile: DeviceProfile):
        self.profile = profile
        self._config: NodeConfig | None = None

    def apply_config(self, freq_khz: int) -> None:
        try:
            self._config = device.set_frequency(self.profile, freq_khz)
        except ValueError as exc:
            raise ConfigRejected(str(exc)) from None

    def _require_config(self) -> NodeConfig:
        if self._config is None:
            raise TransportError("no configuration applied yet")
        return self._config

    def run_stressor(self, load_pct: int, duration: float, seed) -> StressorReport:
        return device.run_stressor(
            self.profile, self._require_config(), load_pct, duration, seed
        )

    def measure_idle(self, duration: float, seed) -> StressorReport:
        return device.measure_idle(self.profile, self._require_config(), duration, seed)

    def settle(self, seconds: float) -> None:
        pass  # nothing to settle in process


def loopback_transport(profile: DeviceProfile) -> LoopbackTransport:
    return LoopbackTransport(profile)


def run_campaign(
    transport,
    spec: CampaignSpec,
    record_timestamps: bool = True,
) -> list[BenchmarkRecord]:
    """Sweep the grid and return one record per measured cell.

    Rejected configurations are skipped (their cells are missing from the
    output and logged); any other transport failure aborts the campaign
    with the partial records attached to the exception.
    """
    records: list[BenchmarkRecord] = []
    for ci, cfg in enumerate(spec.configs):
        try:
            transport.apply_config(cfg.freq_khz)
        except ConfigRejected as exc:
            log.warning("skipping rejected configuration %s kHz: %s", cfg.freq_khz, exc)
            continue
        for load in (0, *spec.loads):
            for rep in range(spec.repetitions):
                seed = cell_seed(spec.seed, ci, load, rep)
                try:
                    transport.settle(spec.settle_wait)
                    if load == 0:
                        report = transport.measure_idle(spec.stress_duration, seed)
                    else:
                        report = transport.run_stressor(
                            load, spec.stress_duration, seed
                        )
                    transport.settle(spec.settle_wait)
                except TransportError as exc:
                    raise CampaignAborted((cfg.freq_khz, load), records, exc) from exc
                records.append(
                    BenchmarkRecord(
                        config=cfg,
                        load_pct=load,
                        bogo_ops_per_sec=report.bogo_ops_per_sec,
                        power=report.power,
                        duration=report.duration,
                        repetition=rep,
                        timestamp=time.time() if record_timestamps else 0.0,
                    )
                )
    return records


class FormatError(ValueError):
    """CSV schema mismatch on load."""


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def persist_records(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow(
                [
                    r.config.freq_khz,
                    r.load_pct,
                    _fmt(r.bogo_ops_per_sec),
                    _fmt(r.power),
                    _fmt(r.duration),
                    r.repetition,
                    _fmt(r.timestamp),
                ]
            )


def load_records(path) -> list[BenchmarkRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise FormatError(f"{path}: empty file, expected header {CSV_HEADER}") from None
        if header != CSV_HEADER:
            raise FormatError(
                f"{path}: expected columns {','.join(CSV_HEADER)}, "
                f"got {','.join(header)}"
            )
        records = []
        for row in reader:
            records.append(
                BenchmarkRecord(
                    config=NodeConfig(int(row[0])),
                    load_pct=int(row[1]),
                    bogo_ops_per_sec=float(row[2]),
                    power=float(row[3]),
                    duration=float(row[4]),
                    repetition=int(row[5]),
                    timestamp=float(row[6]),
                )
            )
    return records


# --- broker-style transport over the wire protocol ------------------------
#
# The broker itself is out of scope; the transport is written against a
# plain publish(topic, bytes) callable and receives feedback through
# deliver().  SimAgent is the matching client side bound to a simulated
# device, so the whole protocol can run in process.


class BrokerTransport:
    """Speaks the wire protocol to one registered SUT client."""

    def __init__(self, publish, client_id: str):
        self._publish = publish
        self.client_id = client_id
        self._responses: dict[str, WireMessage] = {}

    def deliver(self, data: bytes) -> None:
        """Feed one raw feedback message into the transport."""
        msg = decode_message(data)
        if msg.correlation_id:
            self._responses[msg.correlation_id] = msg

    def _request(self, payload: dict) -> WireMessage:
        corr = uuid.uuid4().hex
        msg = WireMessage(
            kind="command",
            client_id=self.client_id,
            payload=payload,
            correlation_id=corr,
        )
        self._publish(command_topic(self.client_id), encode_message(msg))
        reply = self._responses.pop(corr, None)
        if reply is None:
            raise TransportError(f"no response to command {payload.get('op')!r}")
        if reply.kind == "error":
            detail = reply.payload.get("message", "unknown error")
            if reply.payload.get("rejected_config"):
                raise ConfigRejected(detail)
            raise TransportError(detail)
        return reply

    def apply_config(self, freq_khz: int) -> None:
        self._request({"op": "set_frequency", "freq_khz": int(freq_khz)})

    def run_stressor(self, load_pct: int, duration: float, seed) -> StressorReport:
        reply = self._request(
            {
                "op": "stress",
                "load_pct": int(load_pct),
                "duration_s": float(duration),
                "seed": int(seed),
            }
        )
        return _report_from_payload(reply.payload)

    def measure_idle(self, duration: float, seed) -> StressorReport:
        reply = self._request(
            {"op": "measure_idle", "duration_s": float(duration), "seed": int(seed)}
        )
        return _report_from_payload(reply.payload)

    def settle(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


def _report_from_payload(payload: dict) -> StressorReport:
    return StressorReport(
        config=NodeConfig(int(payload["freq_khz"])),
        load_pct=int(payload["load_pct"]),
        duration=float(payload["duration_s"]),
        bogo_ops_per_sec=float(payload["bogo_ops_per_sec"]),
        power=float(payload["power_w"]),
    )


class SimAgent:
    """Client side of the wire protocol, executing against a simulated device."""

    def __init__(self, profile: DeviceProfile, client_id: str, publish):
        self.profile = profile
        self.client_id = client_id
        self._publish = publish
        self._config: NodeConfig | None = None

    def register(self) -> None:
        msg = WireMessage(kind="register", client_id=self.client_id)
        self._publish(FEEDBACK_TOPIC, encode_message(msg))

    def handle(self, data: bytes) -> None:
        msg = decode_message(data)
        if msg.kind != "command" or msg.client_id != self.client_id:
            return
        try:
            payload = self._execute(msg.payload)
            reply = WireMessage(
                kind="result",
                client_id=self.client_id,
                payload=payload,
                correlation_id=msg.correlation_id,
            )
        except ValueError as exc:
            reply = WireMessage(
                kind="error",
                client_id=self.client_id,
                payload={
                    "message": str(exc),
                    "rejected_config": msg.payload.get("op") == "set_frequency",
                },
                correlation_id=msg.correlation_id,
            )
        self._publish(FEEDBACK_TOPIC, encode_message(reply))

    def _execute(self, payload: dict) -> dict:
        op = payload.get("op")
        if op == "set_frequency":
            self._config = device.set_frequency(self.profile, payload["freq_khz"])
            return {"applied_khz": self._config.freq_khz}
        if self._config is None:
            raise ValueError("no configuration applied yet")
        if op == "stress":
            report = device.run_stressor(
                self.profile,
                self._config,
                payload["load_pct"],
                payload["duration_s"],
                payload["seed"],
            )
        elif op == "measure_idle":
            report = device.measure_idle(
                self.profile, self._config, payload["duration_s"], payload["seed"]
            )
        else:
            raise ValueError(f"unknown op {op!r}")
        return {
            "freq_khz": report.config.freq_khz,
            "load_pct": report.load_pct,
            "duration_s": report.duration,
            "bogo_ops_per_sec": report.bogo_ops_per_sec,
            "power_w": report.power,
        }
