"""Detector rules, tap filtering, and mitigation rewrites."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cecsim.bus import BusEvent, Simulator
from cecsim.frames import CecFrame, parse_frame
from cecsim.ids import (
    Detector,
    DisableCecEndToEnd,
    DisableControl,
    RULE_COVERT_MARKER,
    RULE_COVERT_STREAM,
    RULE_INPUT_CHURN,
    RULE_SCAN_BURST,
    RULE_TARGETED_STANDBY,
    RuleConfig,
    StripEdge,
    apply_mitigation,
    detect,
    parse_mitigation,
)
from cecsim.testbed import build_testbed
from cecsim.topology import TopologyError


def ev(tick, origin, text, observers=("tap", "a", "b"), ack=True):
    return BusEvent(tick, origin, parse_frame(text), tuple(observers), ack)


# ---------------------------------------------------------------------------
# Individual rules on synthetic streams
# ---------------------------------------------------------------------------

class TestScanBurst:
    def test_eight_distinct_polls_alert(self):
        events = [ev(t, "spy", "%x%x" % (t, t)) for t in range(8)]
        alerts = detect(events)
        assert [a.rule for a in alerts] == [RULE_SCAN_BURST]
        assert alerts[0].subject == "spy"

    def test_seven_distinct_quiet(self):
        events = [ev(t, "spy", "%x%x" % (t, t)) for t in range(7)]
        assert detect(events) == []

    def test_repeats_do_not_count_twice(self):
        events = [ev(t, "spy", "11") for t in range(20)]
        assert detect(events) == []

    def test_directed_queries_count(self):
        events = [ev(t, "spy", "1%x:8f" % t) for t in range(8)]
        assert [a.rule for a in detect(events)] == [RULE_SCAN_BURST]

    def test_window_expiry_resets(self):
        events = [ev(t * 20, "spy", "%x%x" % (t, t)) for t in range(8)]
        assert detect(events) == []

    def test_fires_once_per_subject(self):
        events = [ev(t, "spy", "%x%x" % (t % 15, t % 15)) for t in range(40)]
        assert len([a for a in detect(events) if a.rule == RULE_SCAN_BURST]) == 1

    def test_two_scanners_two_alerts(self):
        events = []
        for t in range(8):
            events.append(ev(2 * t, "spy1", "%x%x" % (t, t)))
            events.append(ev(2 * t + 1, "spy2", "%x%x" % (t, t)))
        alerts = [a for a in detect(events) if a.rule == RULE_SCAN_BURST]
        assert sorted(a.subject for a in alerts) == ["spy1", "spy2"]


class TestInputChurn:
    def test_five_claims_alert(self):
        events = [ev(t, "spy", "1f:82:%x0:00" % ((t % 4) + 1)) for t in range(5)]
        alerts = detect(events)
        assert [a.rule for a in alerts] == [RULE_INPUT_CHURN]

    def test_four_claims_quiet(self):
        events = [ev(t, "spy", "1f:82:10:00") for t in range(4)]
        assert detect(events) == []

    def test_image_view_on_counts(self):
        events = [ev(t, "spy", "10:04") for t in range(5)]
        assert [a.rule for a in detect(events)] == [RULE_INPUT_CHURN]

    def test_slow_claims_quiet(self):
        events = [ev(t * 31, "spy", "1f:82:10:00") for t in range(8)]
        assert detect(events) == []


class TestTargetedStandby:
    def _wake_then_kill(self, pairs, gap=1):
        events = []
        tick = 0
        for _ in range(pairs):
            events.append(ev(tick, "tv", "0f:84:00:00:00"))
            events.append(ev(tick + gap, "spy", "10:36"))
            tick += 10
        return events

    def test_two_pairs_alert(self):
        alerts = detect(self._wake_then_kill(2))
        assert [a.rule for a in alerts] == [RULE_TARGETED_STANDBY]
        assert alerts[0].subject == "spy"

    def test_single_pair_quiet(self):
        assert detect(self._wake_then_kill(1)) == []

    def test_late_standby_quiet(self):
        assert detect(self._wake_then_kill(3, gap=5)) == []

    def test_self_standby_quiet(self):
        events = []
        for tick in (0, 10):
            events.append(ev(tick, "tv", "0f:84:00:00:00"))
            events.append(ev(tick + 1, "tv", "00:36"))
        assert detect(events) == []

    def test_broadcast_standby_counts(self):
        events = []
        for tick in (0, 10):
            events.append(ev(tick, "tv", "0f:84:00:00:00"))
            events.append(ev(tick + 1, "spy", "1f:36"))
        assert [a.rule for a in detect(events)] == [RULE_TARGETED_STANDBY]


class TestCovertRules:
    def test_each_marker_alerts(self):
        events = [
            ev(1, "pc", "aa:aa:aa:aa"),
            ev(2, "pc", "bb:bb:bb:bb"),
            ev(3, "spy", "ee:ee:ee:ee"),
        ]
        alerts = detect(events)
        assert [a.rule for a in alerts] == [RULE_COVERT_MARKER] * 3
        assert [a.subject for a in alerts] == ["pc", "pc", "spy"]

    def test_stream_of_wide_data_frames(self):
        events = [ev(t, "spy", "12:00:01:02:03") for t in range(3)]
        alerts = detect(events)
        assert [a.rule for a in alerts] == [RULE_COVERT_STREAM]

    def test_two_wide_frames_quiet(self):
        events = [ev(t, "spy", "12:00:01:02:03") for t in range(2)]
        assert detect(events) == []

    def test_narrow_data_frames_quiet(self):
        # single-operand frames look like feature aborts, not payload
        events = [ev(t, "spy", "12:00:05") for t in range(10)]
        assert detect(events) == []

    def test_stream_fires_once(self):
        events = [ev(t, "spy", "12:00:01:02:03") for t in range(30)]
        assert len(detect(events)) == 1


# ---------------------------------------------------------------------------
# Streaming equals offline; tap filtering
# ---------------------------------------------------------------------------

class TestDetectorPlumbing:
    def _mixed_events(self):
        events = [ev(t, "spy", "%x%x" % (t, t)) for t in range(8)]
        events += [ev(20 + t, "pc", "12:00:01:02:03") for t in range(3)]
        events.append(ev(30, "pc", "aa:aa:aa:aa"))
        return events

    def test_streaming_equals_offline(self):
        events = self._mixed_events()
        streamed = []
        detector = Detector()
        for event in events:
            streamed.extend(detector.feed(event))
        assert streamed == detect(events)

    def test_tap_sees_only_observed_frames(self):
        on_tap = [ev(t, "spy", "%x%x" % (t, t), observers=("tap", "spy")) for t in range(8)]
        off_tap = [ev(t, "spy", "%x%x" % (t, t), observers=("spy",)) for t in range(8)]
        assert [a.rule for a in detect(on_tap, tap="tap")] == [RULE_SCAN_BURST]
        assert detect(off_tap, tap="tap") == []

    def test_no_tap_sees_everything(self):
        events = [ev(t, "spy", "%x%x" % (t, t), observers=("spy",)) for t in range(8)]
        assert [a.rule for a in detect(events)] == [RULE_SCAN_BURST]

    def test_alert_json_fields(self):
        alerts = detect(self._mixed_events())
        import json

        for alert in alerts:
            parsed = json.loads(alert.to_json())
            assert set(parsed) == {"rule", "window", "subject", "evidence"}

    @given(st.integers(1, 30), st.integers(2, 60))
    @settings(deadline=None, max_examples=20)
    def test_config_thresholds_respected(self, count, window):
        config = RuleConfig(scan_distinct_addresses=count, scan_window=window)
        events = [ev(t % window, "spy", "%x%x" % (t % 15, t % 15)) for t in range(count - 1)]
        alerts = [a for a in detect(events, config) if a.rule == RULE_SCAN_BURST]
        assert alerts == []

    def test_config_rejects_nonsense(self):
        with pytest.raises(ValueError):
            RuleConfig(scan_window=0)
        with pytest.raises(ValueError):
            RuleConfig.from_dict({"bogus_knob": 3})

    def test_config_from_dict(self):
        config = RuleConfig.from_dict({"churn_count": 9})
        assert config.churn_count == 9
        assert config.scan_window == 50


# ---------------------------------------------------------------------------
# Mitigations
# ---------------------------------------------------------------------------

class TestMitigations:
    def test_strip_edge_clones(self):
        original = build_testbed()
        patched = apply_mitigation(original, StripEdge("tv", "switch"))
        assert any(
            not e.cec_propagates for e in patched.edges if e.child == "switch"
        )
        assert all(e.cec_propagates for e in original.edges)

    def test_strip_unknown_edge(self):
        with pytest.raises(TopologyError):
            apply_mitigation(build_testbed(), StripEdge("tv", "hub"))

    def test_disable_control(self):
        patched = apply_mitigation(build_testbed(), DisableControl("tv"))
        node = patched.nodes["tv"]
        assert not node.cec_control_enabled
        assert node.cec_info_reporting_enabled

    def test_disable_cec_end_to_end(self):
        patched = apply_mitigation(build_testbed(), DisableCecEndToEnd("client"))
        node = patched.nodes["client"]
        assert not node.cec_control_enabled
        assert not node.cec_info_reporting_enabled

    def test_unknown_device(self):
        with pytest.raises(TopologyError):
            apply_mitigation(build_testbed(), DisableControl("ghost"))

    @pytest.mark.parametrize(
        "raw, expected_type",
        [
            ({"type": "strip_edge", "parent": "tv", "child": "switch"}, StripEdge),
            ({"type": "disable_control", "device": "tv"}, DisableControl),
            ({"type": "disable_cec", "device": "tv"}, DisableCecEndToEnd),
        ],
    )
    def test_parse_forms(self, raw, expected_type):
        assert isinstance(parse_mitigation(raw), expected_type)

    def test_parse_unknown_type(self):
        with pytest.raises(ValueError):
            parse_mitigation({"type": "unplug_everything"})

    def test_fully_disabled_device_vanishes_from_census(self):
        from cecsim.attacks import ScanWalk

        patched = apply_mitigation(build_testbed(), DisableCecEndToEnd("chromecast"))
        sim = Simulator(patched)
        sim.start()
        walk = ScanWalk("listener")
        sim.add_actor(walk)
        walk.start(sim)
        sim.run(until=130)
        report = sim.artifacts.scan_reports[-1]
        assert sim.logical["chromecast"] not in report.entries

    def test_control_disabled_device_still_in_census(self):
        from cecsim.attacks import ScanWalk

        patched = apply_mitigation(build_testbed(), DisableControl("tv"))
        sim = Simulator(patched)
        sim.start()
        walk = ScanWalk("listener")
        sim.add_actor(walk)
        walk.start(sim)
        sim.run(until=130)
        report = sim.artifacts.scan_reports[-1]
        assert 0 in report.entries

    def test_control_disabled_device_immune_to_standby(self):
        patched = apply_mitigation(build_testbed(), DisableControl("tv"))
        sim = Simulator(patched)
        sim.start()
        from cecsim.bus import Transmit

        sim.schedule(2, Transmit("listener", CecFrame(1, 0, 0x36)))
        sim.run(until=5)
        assert sim.device_states["tv"].power.value == "on"
