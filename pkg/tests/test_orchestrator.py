import pytest

from edgegov.core import NodeConfig
from edgegov.device import default_profile, profile_from_dict
from edgegov.orchestrator import (
    CSV_HEADER,
    BenchmarkRecord,
    BrokerTransport,
    CampaignSpec,
    ConfigRejected,
    FormatError,
    SimAgent,
    cell_seed,
    load_records,
    loopback_transport,
    persist_records,
    run_campaign,
)

REL = 1e-9


def small_spec(freqs=(600_000, 1_800_000), loads=(50, 100), **over):
    base = dict(
        configs=tuple(NodeConfig(f) for f in freqs),
        loads=tuple(loads),
        stress_duration=15.0,
        repetitions=1,
        seed=7,
    )
    base.update(over)
    return CampaignSpec(**base)


class TestCampaignSpec:
    def test_expected_records(self):
        assert small_spec().expected_records() == 6

    def test_rejects_empty_configs(self):
        with pytest.raises(ValueError):
            small_spec(configs=())

    def test_rejects_unsorted_loads(self):
        with pytest.raises(ValueError):
            small_spec(loads=(100, 50))

    def test_rejects_out_of_range_loads(self):
        with pytest.raises(ValueError):
            small_spec(loads=(0, 50))


class TestRunCampaign:
    def test_cardinality_and_order(self, quiet_profile):
        records = run_campaign(loopback_transport(quiet_profile), small_spec())
        cells = [(r.config.freq_khz, r.load_pct) for r in records]
        assert cells == [
            (600_000, 0), (600_000, 50), (600_000, 100),
            (1_800_000, 0), (1_800_000, 50), (1_800_000, 100),
        ]

    def test_full_grid_count(self, quiet_profile):
        spec = small_spec(freqs=tuple(quiet_profile.ladder),
                          loads=tuple(range(10, 101, 10)))
        records = run_campaign(loopback_transport(quiet_profile), spec)
        assert len(records) == 13 * 11 == spec.expected_records()

    def test_noise_free_matches_expectations(self, quiet_profile):
        records = run_campaign(loopback_transport(quiet_profile), small_spec())
        for r in records:
            f = r.config.freq_khz
            pi, pf = quiet_profile.p_idle_at(f), quiet_profile.p_full_at(f)
            assert r.power == pytest.approx(pi + (pf - pi) * r.load_pct / 100, rel=REL)
            assert r.bogo_ops_per_sec == pytest.approx(
                quiet_profile.throughput_at(f) * r.load_pct / 100, rel=REL
            )

    def test_paper_anchor_cell(self, quiet_profile):
        spec = small_spec(freqs=(1_800_000,), loads=(100,))
        records = run_campaign(loopback_transport(quiet_profile), spec)
        full = [r for r in records if r.load_pct == 100]
        assert full[0].power == pytest.approx(4.75, rel=REL)

    def test_deterministic_given_seed(self):
        profile = default_profile(noise_sd=0.02)
        a = run_campaign(loopback_transport(profile), small_spec(),
                         record_timestamps=False)
        b = run_campaign(loopback_transport(profile), small_spec(),
                         record_timestamps=False)
        assert a == b
        c = run_campaign(loopback_transport(profile), small_spec(seed=8),
                         record_timestamps=False)
        assert c != a

    def test_repetitions_multiply_records(self, quiet_profile):
        records = run_campaign(loopback_transport(quiet_profile),
                               small_spec(repetitions=3))
        assert len(records) == 18
        reps = [r.repetition for r in records[:3]]
        assert reps == [0, 1, 2]

    def test_interleaved_transports_do_not_cross_contaminate(self, quiet_profile):
        # second device draws visibly more power at every cell
        doc = {
            "name": "hot",
            "ladder_khz": list(quiet_profile.ladder),
            "throughput": {"a": 0.002},
            "power": {"P0": 10.0, "c1": 1.0, "c3": 0.1, "gamma": 3},
            "p_idle": {"b0": 8.0, "b1": 0.5},
            "noise_sd": 0.0,
        }
        hot = profile_from_dict(doc)
        ta, tb = loopback_transport(quiet_profile), loopback_transport(hot)
        spec = small_spec()
        seen_a, seen_b = [], []
        for cfg in spec.configs:
            ta.apply_config(cfg.freq_khz)
            tb.apply_config(cfg.freq_khz)
            for load in spec.loads:
                seen_a.append(ta.run_stressor(load, 15.0, 0).power)
                seen_b.append(tb.run_stressor(load, 15.0, 0).power)
        assert max(seen_a) < 5.0
        assert min(seen_b) > 8.0

    def test_cell_seed_is_stable(self):
        assert cell_seed(7, 0, 50, 0) == cell_seed(7, 0, 50, 0)
        assert cell_seed(7, 0, 50, 0) != cell_seed(7, 1, 50, 0)

    def test_rejected_config_propagates(self, quiet_profile):
        transport = loopback_transport(quiet_profile)
        with pytest.raises(ConfigRejected, match="600000"):
            transport.apply_config(1_234_000)


class TestPersistence:
    def test_empty_list_writes_header_only(self, tmp_path):
        path = tmp_path / "records.csv"
        persist_records([], path)
        assert path.read_text().strip() == ",".join(CSV_HEADER)
        assert load_records(path) == []

    def test_row_count(self, quiet_profile, tmp_path):
        records = run_campaign(loopback_transport(quiet_profile), small_spec())
        path = tmp_path / "records.csv"
        persist_records(records, path)
        assert len(path.read_text().strip().splitlines()) == 7

    def test_round_trip_bit_identical(self, tmp_path):
        profile = default_profile(noise_sd=0.02)
        spec = small_spec(freqs=tuple(profile.ladder),
                          loads=tuple(range(10, 101, 10)))
        records = run_campaign(loopback_transport(profile), spec)
        path = tmp_path / "records.csv"
        persist_records(records, path)
        assert load_records(path) == records

    def test_header_mismatch_is_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("freq,load\n1,2\n")
        with pytest.raises(FormatError, match="freq_khz"):
            load_records(path)

    def test_missing_file_has_path_context(self, tmp_path):
        with pytest.raises(OSError):
            load_records(tmp_path / "nope.csv")


class InMemoryBus:
    """Synchronous single-process broker stand-in."""

    def __init__(self):
        self.subscribers = []
        self.log = []

    def publish(self, topic, data):
        self.log.append((topic, data))
        for matcher, handler in list(self.subscribers):
            if matcher(topic):
                handler(data)

    def subscribe(self, matcher, handler):
        self.subscribers.append((matcher, handler))


class TestBrokerTransport:
    def make_pair(self, profile, client_id="rpi-1"):
        bus = InMemoryBus()
        agent = SimAgent(profile, client_id, bus.publish)
        transport = BrokerTransport(bus.publish, client_id)
        bus.subscribe(lambda t: t == f"sysgov/command/{client_id}", agent.handle)
        bus.subscribe(lambda t: t == "sysgov/feedback", transport.deliver)
        return bus, agent, transport

    def test_campaign_over_wire_matches_loopback(self, quiet_profile):
        _, _, transport = self.make_pair(quiet_profile)
        spec = small_spec()
        over_wire = run_campaign(transport, spec, record_timestamps=False)
        direct = run_campaign(loopback_transport(quiet_profile), spec,
                              record_timestamps=False)
        assert over_wire == direct

    def test_rejected_config_surfaces(self, quiet_profile):
        _, _, transport = self.make_pair(quiet_profile)
        with pytest.raises(ConfigRejected):
            transport.apply_config(1_234_000)

    def test_correlation_ids_echoed(self, quiet_profile):
        bus, _, transport = self.make_pair(quiet_profile)
        transport.apply_config(600_000)
        from edgegov.protocol import decode_message

        sent = [decode_message(d) for t, d in bus.log if t.startswith("sysgov/command")]
        replies = [decode_message(d) for t, d in bus.log if t == "sysgov/feedback"]
        assert sent[0].correlation_id == replies[0].correlation_id != ""
