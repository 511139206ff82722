"""Taint engine: initial labels, write propagation, contamination, declassification."""

import pytest

from reentryguard.model import (
    ActionKind,
    Authorizer,
    CarrierClass,
    DeclassProcedure,
    Privilege,
    Provenance,
    TaintLabel,
)
from reentryguard.taint import (
    AgentDecisionState,
    attenuate_capabilities,
    context_reset,
    declassify,
    declassify_carrier,
    declassify_state,
    default_capabilities,
    fresh_state,
    initial_label,
    mark_contamination,
    propagate_on_write,
    restore_capabilities,
)
from tests.test_model import make_carrier


def clean_state(agent: str = "a1") -> AgentDecisionState:
    return fresh_state(agent, Privilege.HIGH)


def dirty_state(agent: str = "a1") -> AgentDecisionState:
    return mark_contamination(clean_state(agent), 7)


class TestInitialLabel:
    def test_signed_baseline_is_clean(self):
        assert initial_label(CarrierClass.STATIC_CONFIG, Provenance.SIGNED_BASELINE) is TaintLabel.CLEAN

    def test_external_provenance_variants(self):
        for prov in (Provenance.USER_PROVIDED, Provenance.DOWNLOADED, Provenance.EXTERNAL_SYNC):
            assert initial_label(CarrierClass.WORKSPACE_FILE, prov) is TaintLabel.EXTERNAL

    def test_agent_written_tracks_writer_state(self):
        assert initial_label(CarrierClass.WORKSPACE_FILE, Provenance.AGENT_WRITTEN) is TaintLabel.CLEAN
        assert (
            initial_label(CarrierClass.WORKSPACE_FILE, Provenance.AGENT_WRITTEN, writer_contaminated=True)
            is TaintLabel.TAINTED_DERIVED
        )


class TestPropagateOnWrite:
    # rule table: contaminated writer always emits tainted_derived; a clean
    # writer relaying untrusted content emits tainted; clean-on-clean leaves
    # the target label alone (overwrite never cleanses)
    def _expected(self, contaminated: bool, origin: TaintLabel, target_label: TaintLabel) -> TaintLabel:
        if contaminated:
            return TaintLabel.TAINTED_DERIVED
        if origin is not TaintLabel.CLEAN:
            return TaintLabel.TAINTED
        return target_label

    def test_clean_writer_clean_content_keeps_target_label(self):
        target = make_carrier()
        assert propagate_on_write(clean_state(), target, TaintLabel.CLEAN) is TaintLabel.CLEAN

    def test_contaminated_writer_always_tainted_derived(self):
        target = make_carrier()
        for origin in TaintLabel:
            assert propagate_on_write(dirty_state(), target, origin) is TaintLabel.TAINTED_DERIVED

    def test_clean_writer_relaying_external_taints(self):
        target = make_carrier()
        assert propagate_on_write(clean_state(), target, TaintLabel.EXTERNAL) is TaintLabel.TAINTED

    def test_overwrite_is_not_declassification(self):
        tainted = make_carrier(label=TaintLabel.TAINTED)
        assert propagate_on_write(clean_state(), tainted, TaintLabel.CLEAN) is TaintLabel.TAINTED

    def test_full_writer_origin_target_matrix(self):
        """Exhaustive 2 x 4 x 4 sweep against the independently stated rule."""
        for contaminated in (False, True):
            writer = dirty_state() if contaminated else clean_state()
            for origin in TaintLabel:
                for target_label in TaintLabel:
                    target = make_carrier(label=target_label)
                    got = propagate_on_write(writer, target, origin)
                    assert got is self._expected(contaminated, origin, target_label)


class TestContamination:
    def test_clean_source_does_not_contaminate(self):
        # the caller marks only on untrusted reads; this checks no implicit flip
        state = clean_state()
        assert not state.contaminated

    def test_mark_contamination_records_source(self):
        state = mark_contamination(clean_state(), 42)
        assert state.contaminated
        assert 42 in state.contamination_sources

    def test_no_self_clearing(self):
        state = dirty_state()
        again = mark_contamination(state, None)
        assert again.contaminated

    def test_context_reset_clears_contamination_and_restores_caps(self):
        state = attenuate_capabilities(dirty_state())
        assert not state.any_high_cap
        fresh = context_reset(state)
        assert not fresh.contaminated
        assert fresh.contamination_sources == frozenset()
        assert fresh.any_high_cap

    def test_attenuate_then_restore(self):
        state = clean_state()
        down = attenuate_capabilities(state)
        assert not down.any_high_cap
        up = restore_capabilities(down)
        assert up.high_cap == state.high_cap


class TestCapabilities:
    def test_low_privilege_excludes_shell_and_network(self):
        caps = default_capabilities(Privilege.LOW)
        assert ActionKind.INVOKE_SHELL not in caps
        assert ActionKind.INVOKE_NETWORK not in caps

    def test_high_privilege_adds_shell_and_network(self):
        caps = default_capabilities(Privilege.HIGH)
        assert ActionKind.INVOKE_SHELL in caps
        assert ActionKind.INVOKE_NETWORK in caps


class TestDeclassify:
    def test_runtime_validation_clears(self):
        assert declassify(Authorizer.RUNTIME, DeclassProcedure.DETERMINISTIC_VALIDATION).cleared

    def test_operator_review_clears(self):
        assert declassify(Authorizer.OPERATOR, DeclassProcedure.HUMAN_REVIEW).cleared

    def test_agent_self_refused(self):
        result = declassify(Authorizer.AGENT_SELF, DeclassProcedure.DETERMINISTIC_VALIDATION)
        assert not result.cleared
        assert result.reason == "llm-origin"

    def test_declassify_carrier_resets_label(self):
        carrier = make_carrier(label=TaintLabel.TAINTED)
        result = declassify_carrier(carrier, Authorizer.RUNTIME, DeclassProcedure.DETERMINISTIC_VALIDATION)
        assert result.cleared
        assert carrier.label is TaintLabel.CLEAN

    def test_refused_declassify_leaves_carrier_alone(self):
        carrier = make_carrier(label=TaintLabel.TAINTED)
        result = declassify_carrier(carrier, Authorizer.AGENT_SELF, DeclassProcedure.DETERMINISTIC_VALIDATION)
        assert not result.cleared
        assert carrier.label is TaintLabel.TAINTED

    def test_declassify_state_via_reset_path(self):
        state, result = declassify_state(dirty_state(), Authorizer.RUNTIME, DeclassProcedure.CONTEXT_RESET)
        assert result.cleared
        assert not state.contaminated

    def test_declassify_state_refused_keeps_contamination(self):
        state, result = declassify_state(dirty_state(), Authorizer.AGENT_SELF, DeclassProcedure.CONTEXT_RESET)
        assert not result.cleared
        assert state.contaminated


class TestTraceLevelProperties:
    def test_derived_taint_closure(self, bundled):
        """Every effective write by a contaminated agent lands as tainted_derived."""
        from reentryguard.model import EventKind, Verdict
        from reentryguard.tracelog import parse_trace
        from reentryguard.verifier import _contaminated_before

        for name in ("fwA", "fwB", "fwC", "cross_framework"):
            meta, events = parse_trace(bundled(name).trace_text)
            contaminated = _contaminated_before(events, meta)
            seen = 0
            for i, ev in enumerate(events):
                if ev.kind is EventKind.WRITE and ev.verdict is Verdict.ALLOW and contaminated[i]:
                    assert ev.label is TaintLabel.TAINTED_DERIVED
                    seen += 1
            assert seen > 0

    def test_trust_monotonicity(self, bundled):
        """Read events record the carrier label at read time. Once a carrier is
        observed untrusted, later reads never observe clean again unless the
        carrier was declassified in between."""
        from reentryguard.model import EventKind, Verdict
        from reentryguard.tracelog import parse_trace

        reads = (EventKind.EXPOSED_READ, EventKind.OPAQUE_READ)
        for name in ("fwA", "fwB", "cross_framework"):
            meta, events = parse_trace(bundled(name).trace_text)
            dirty: set[int] = set()
            for ev in events:
                if ev.carrier_id is None:
                    continue
                if ev.kind is EventKind.DECLASSIFY and ev.verdict is Verdict.ALLOW:
                    dirty.discard(ev.carrier_id)
                    continue
                if ev.kind not in reads or ev.label is None:
                    continue
                if ev.carrier_id in dirty:
                    assert ev.label.untrusted, f"{name}: carrier {ev.carrier_id} self-cleansed"
                if ev.label.untrusted:
                    dirty.add(ev.carrier_id)
