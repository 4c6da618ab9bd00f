"""Wire protocol for broker-based benchmark orchestration.

Messages are single canonical-JSON documents (UTF-8, sorted keys).  For
broker transports the topic is metadata beside the payload: feedback flows
on ``sysgov/feedback`` and commands on ``sysgov/command/<client_id>``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

KINDS = frozenset(
    {"register", "registered", "command", "pipeline", "ack", "result", "error"}
)

FEEDBACK_TOPIC = "sysgov/feedback"


def command_topic(client_id: str) -> str:
    return f"sysgov/command/{client_id}"


class ProtocolError(ValueError):
    """Malformed or invalid wire message; carries the byte offset."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class WireMessage:
    kind: str
    client_id: str
    payload: dict = field(default_factory=dict)
    correlation_id: str = ""

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown message kind {self.kind!r}")
        if not isinstance(self.payload, dict):
            raise ValueError("payload must be a JSON object")


def encode_message(msg: WireMessage) -> bytes:
    """Canonical JSON encoding: sorted keys, compact separators, UTF-8."""
    doc = {
        "kind": msg.kind,
        "client_id": msg.client_id,
        "payload": msg.payload,
        "correlation_id": msg.correlation_id,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def decode_message(data: bytes) -> WireMessage:
    try:
        doc = json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ProtocolError("message is not valid UTF-8", exc.start) from None
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed JSON: {exc.msg}", exc.pos) from None
    if not isinstance(doc, dict):
        raise ProtocolError("message must be a JSON object", 0)
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ProtocolError(f"unknown message kind {kind!r}", 0)
    payload = doc.get("payload", {})
    if not isinstance(payload, dict):
        raise ProtocolError("payload must be a JSON object", 0)
    return WireMessage(
        kind=kind,
        client_id=str(doc.get("client_id", "")),
        payload=payload,
        correlation_id=str(doc.get("correlation_id", "")),
    )


def make_pipeline(client_id: str, commands: list[str], correlation_id: str) -> WireMessage:
    """A pipeline message: ordered terminal commands to run on a client."""
    return WireMessage(
        kind="pipeline",
        client_id=client_id,
        payload={"commands": list(commands)},
        correlation_id=correlation_id,
    )


def shell_pipeline(freq_khz: int, load_pct: int, duration_s: int) -> list[str]:
    """The command strings a real SUT would run for one grid cell."""
    return [
        f"sudo cpufreq-set -r -f {freq_khz}",
        f"stress-ng --cpu 0 --cpu-load {load_pct} --timeout {duration_s}s --metrics-brief",
    ]
