"""Trace serialization: stable line format, header metadata, round-trips."""

import pytest

from reentryguard.model import (
    ActionKind,
    Decision,
    Event,
    EventKind,
    PayloadFacets,
    Reason,
    SchemaKind,
    TaintLabel,
    Trace,
)
from reentryguard.tracelog import (
    COLUMN_ROW,
    MISSING,
    TraceFormatError,
    TraceMeta,
    event_to_line,
    parse_event_line,
    parse_trace,
    render_trace,
)


def minimal_meta() -> TraceMeta:
    return TraceMeta(
        scenario="toy",
        seed=1,
        ticks=4,
        flags={"rtw": False, "seal": False, "memgate": False, "attenuation": False},
        guard="deny",
        attacker="attacker",
    )


class TestEventLines:
    def test_write_line_shape(self):
        event = Event(
            tick=3,
            agent="a1",
            kind=EventKind.WRITE,
            carrier_id=7,
            label=TaintLabel.TAINTED,
            facets=PayloadFacets.full(),
            decision=Decision.allow(),
        )
        assert event_to_line(event) == "3|a1|write:1111|7|tainted|allow|ok"

    def test_missing_fields_render_as_dash(self):
        event = Event(tick=0, agent="a1", kind=EventKind.HEARTBEAT)
        assert event_to_line(event) == f"0|a1|heartbeat|{MISSING}|{MISSING}|{MISSING}|{MISSING}"

    def test_exfil_send_token(self):
        event = Event(
            tick=2,
            agent="a1",
            kind=EventKind.MSG_SEND,
            channel="c0",
            facets=PayloadFacets.from_token("0110"),
            exfil=True,
            decision=Decision.deny(Reason.ATTENUATED_HIGHRISK),
        )
        line = event_to_line(event)
        assert "msg_send:c0:0110:exfil" in line
        assert line.endswith("deny|attenuated-highrisk")

    def test_line_round_trip_per_kind(self):
        samples = [
            Event(tick=1, agent="a1", kind=EventKind.WRITE, carrier_id=2,
                  label=TaintLabel.CLEAN, facets=PayloadFacets.none(), decision=Decision.allow()),
            Event(tick=1, agent="a1", kind=EventKind.HIGH_RISK, action=ActionKind.INVOKE_SHELL,
                  decision=Decision.deny(Reason.ATTENUATED_HIGHRISK)),
            Event(tick=1, agent="a1", kind=EventKind.MSG_RECV, channel="c1",
                  facets=PayloadFacets.full(), sender="a2"),
            Event(tick=1, agent="a1", kind=EventKind.PROMOTE, carrier_id=4,
                  schema=SchemaKind.TYPED_FACT, facets=PayloadFacets.none(),
                  decision=Decision.deny(Reason.PROMOTION_REJECTED)),
            Event(tick=1, agent="a1", kind=EventKind.INJECT, channel="c0",
                  facets=PayloadFacets.full()),
        ]
        for event in samples:
            parsed = parse_event_line(event_to_line(event))
            assert parsed.tick == event.tick
            assert parsed.agent == event.agent
            assert parsed.kind is event.kind
            assert parsed.facets == (event.facets or PayloadFacets.none())
            assert parsed.channel == event.channel
            assert parsed.action == event.action
            assert parsed.schema == event.schema
            assert parsed.sender == event.sender
            assert parsed.exfil == event.exfil


class TestParseErrors:
    def test_wrong_column_count(self):
        with pytest.raises(TraceFormatError):
            parse_event_line("1|a1|write:1111|7|tainted|allow")

    def test_unknown_kind(self):
        with pytest.raises(TraceFormatError):
            parse_event_line("1|a1|teleport:1111|7|tainted|allow|ok")

    def test_bad_tick(self):
        with pytest.raises(TraceFormatError):
            parse_event_line("x|a1|heartbeat|-|-|-|-")

    def test_bad_label(self):
        with pytest.raises(TraceFormatError):
            parse_event_line("1|a1|write:1111|7|sparkly|allow|ok")

    def test_bad_facet_token(self):
        with pytest.raises(TraceFormatError):
            parse_event_line("1|a1|write:11|7|tainted|allow|ok")

    def test_event_line_before_column_row_rejected(self):
        text = "1|a1|heartbeat|-|-|-|-\n" + COLUMN_ROW + "\n"
        with pytest.raises(TraceFormatError):
            parse_trace(text)


class TestTraceRoundTrip:
    def test_synthetic_trace(self):
        trace = Trace()
        trace.append_event(Event(tick=0, agent="attacker", kind=EventKind.INJECT,
                                 channel="c0", facets=PayloadFacets.full()))
        trace.append_event(Event(tick=1, agent="a1", kind=EventKind.WRITE, carrier_id=1,
                                 label=TaintLabel.TAINTED_DERIVED, facets=PayloadFacets.full(),
                                 decision=Decision.allow()))
        text = render_trace(trace, minimal_meta())
        meta, events = parse_trace(text)
        assert meta.scenario == "toy"
        assert meta.seed == 1
        assert meta.guard == "deny"
        assert len(events) == 2
        assert events[0].kind is EventKind.INJECT
        assert events[1].label is TaintLabel.TAINTED_DERIVED

    def test_full_run_round_trip(self, bundled):
        """parse -> rebuild -> render reproduces every event line of a real run."""
        from reentryguard.model import Verdict
        from reentryguard.tracelog import LogEvent

        def rebuild(parsed: LogEvent) -> Event:
            if parsed.verdict is None:
                decision = None
            elif parsed.verdict is Verdict.ALLOW:
                decision = Decision.allow(parsed.reason) if parsed.reason else Decision.allow()
            elif parsed.verdict is Verdict.DENY:
                decision = Decision.deny(parsed.reason)
            else:
                decision = Decision.guard(parsed.reason)
            return Event(
                tick=parsed.tick,
                agent=parsed.agent,
                kind=parsed.kind,
                carrier_id=parsed.carrier_id,
                label=parsed.label,
                facets=parsed.facets,
                channel=parsed.channel,
                action=parsed.action,
                schema=parsed.schema,
                procedure=parsed.procedure,
                sender=parsed.sender,
                exfil=parsed.exfil,
                decision=decision,
            )

        result = bundled("fwA")
        meta, events = parse_trace(result.trace_text)
        assert meta.scenario == "fwA"
        assert len(events) == len(result.trace.events)
        assert len(meta.agents) == 3
        assert meta.carriers, "carrier metadata must survive the round trip"
        original_lines = [
            line for line in result.trace_text.splitlines() if line and not line.startswith("#")
        ][1:]  # drop the column row
        assert original_lines == [event_to_line(rebuild(p)) for p in events]

    def test_header_flags_round_trip(self, bundled):
        meta, _ = parse_trace(bundled("fwA", enforce="rtw,seal").trace_text)
        assert meta.flags == {"rtw": True, "seal": True, "memgate": False, "attenuation": False}

    def test_carrier_metadata_fields(self, bundled):
        meta, _ = parse_trace(bundled("fwA").trace_text)
        by_name = {c.name: c for c in meta.carriers}
        heartbeat = by_name["a1.taskfile"]
        assert heartbeat.owner == "a1"
        assert heartbeat.cls == "workspace_file"
        assert heartbeat.autoload == "heartbeat"
        assert heartbeat.label0 == "clean"
