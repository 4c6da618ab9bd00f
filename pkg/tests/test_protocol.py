import pytest
from hypothesis import given
from hypothesis import strategies as st

from edgegov.protocol import (
    FEEDBACK_TOPIC,
    KINDS,
    ProtocolError,
    WireMessage,
    command_topic,
    decode_message,
    encode_message,
    make_pipeline,
    shell_pipeline,
)

json_scalars = st.one_of(
    st.none(),
    st.booleans(),
    st.integers(min_value=-(2**53), max_value=2**53),
    st.floats(allow_nan=False, allow_infinity=False),
    st.text(),
)
json_payloads = st.dictionaries(
    st.text(min_size=1),
    st.recursive(json_scalars, lambda inner: st.one_of(
        st.lists(inner, max_size=4),
        st.dictionaries(st.text(min_size=1), inner, max_size=4),
    ), max_leaves=10),
    max_size=6,
)
messages = st.builds(
    WireMessage,
    kind=st.sampled_from(sorted(KINDS)),
    client_id=st.text(),
    payload=json_payloads,
    correlation_id=st.text(),
)


class TestCodec:
    def test_command_round_trip(self):
        msg = WireMessage(
            kind="command",
            client_id="rpi-1",
            payload={"op": "set_frequency", "freq_khz": 1_500_000},
            correlation_id="c-17",
        )
        assert decode_message(encode_message(msg)) == msg

    def test_pipeline_preserves_command_order(self):
        commands = shell_pipeline(1_500_000, 50, 15)
        msg = make_pipeline("rpi-1", commands, "p-1")
        back = decode_message(encode_message(msg))
        assert back.payload["commands"] == [
            "sudo cpufreq-set -r -f 1500000",
            "stress-ng --cpu 0 --cpu-load 50 --timeout 15s --metrics-brief",
        ]

    @given(messages)
    def test_round_trip_identity(self, msg):
        assert decode_message(encode_message(msg)) == msg

    def test_encoding_is_canonical(self):
        msg = WireMessage(kind="ack", client_id="a", payload={"b": 1, "a": 2})
        data = encode_message(msg)
        assert data.index(b'"a"') < data.index(b'"b"')
        assert b" " not in data


class TestDecodeErrors:
    def test_truncated_json_offset(self):
        with pytest.raises(ProtocolError) as err:
            decode_message(b"{")
        assert err.value.offset == 1

    def test_garbage(self):
        with pytest.raises(ProtocolError):
            decode_message(b"not json at all")

    def test_unknown_kind(self):
        with pytest.raises(ProtocolError, match="kind"):
            decode_message(b'{"kind":"reboot","client_id":"x","payload":{}}')

    def test_non_object(self):
        with pytest.raises(ProtocolError):
            decode_message(b"[1,2,3]")

    def test_non_object_payload(self):
        with pytest.raises(ProtocolError, match="payload"):
            decode_message(b'{"kind":"ack","client_id":"x","payload":[1]}')

    def test_invalid_utf8(self):
        with pytest.raises(ProtocolError):
            decode_message(b'\xff\xfe{"kind":"ack"}')


class TestTopics:
    def test_conventions(self):
        assert FEEDBACK_TOPIC == "sysgov/feedback"
        assert command_topic("rpi-1") == "sysgov/command/rpi-1"
