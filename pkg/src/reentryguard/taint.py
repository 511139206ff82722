"""Taint engine: label assignment, propagation on write, contamination.

Propagation is deliberately over-conservative. Once an agent's decision
state has been exposed to untrusted content, everything it writes is
labeled tainted_derived, whether or not the payload survived. The agent
itself can never clear this: declassification requires runtime or operator
authority, and a context reset is a runtime operation. Precision is traded
away so that no semantic judgement about "did the instruction survive the
paraphrase" is ever load-bearing.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .model import (
    ActionKind,
    Authorizer,
    Carrier,
    CarrierClass,
    DeclassProcedure,
    Privilege,
    Provenance,
    TaintLabel,
)


@dataclass(frozen=True)
class AgentDecisionState:
    """Per-agent security state between turns.

    high_cap maps each high-risk action kind to whether this decision
    context currently retains it. Attenuation zeroes the map; a context
    reset restores base_caps. The base set encodes both privilege tier and
    any scenario-level capability restrictions, so "no messaging" deployments
    simply never have SEND_MESSAGE in base_caps.
    """

    agent: str
    contaminated: bool = False
    high_cap: dict[ActionKind, bool] = field(default_factory=dict)
    base_caps: frozenset[ActionKind] = frozenset()
    contamination_sources: frozenset[int] = frozenset()

    @property
    def any_high_cap(self) -> bool:
        return any(self.high_cap.values())


def fresh_state(
    agent: str,
    privilege: Privilege,
    capabilities: frozenset[ActionKind] | None = None,
) -> AgentDecisionState:
    if capabilities is None:
        capabilities = default_capabilities(privilege)
    return AgentDecisionState(
        agent=agent,
        contaminated=False,
        high_cap={kind: True for kind in sorted(capabilities, key=lambda k: k.value)},
        base_caps=frozenset(capabilities),
    )


def default_capabilities(privilege: Privilege) -> frozenset[ActionKind]:
    low = {
        ActionKind.WRITE_AUTOLOADED,
        ActionKind.WRITE_TRUSTED_MEMORY,
        ActionKind.WRITE_CONFIG,
        ActionKind.SEND_MESSAGE,
        ActionKind.COMMIT_CROSS_SESSION,
    }
    if privilege is Privilege.HIGH:
        return frozenset(low | {ActionKind.INVOKE_SHELL, ActionKind.INVOKE_NETWORK})
    return frozenset(low)


# ---------------------------------------------------------------------------
# labels
# ---------------------------------------------------------------------------


def initial_label(
    cls: CarrierClass,
    provenance: Provenance,
    writer_contaminated: bool = False,
) -> TaintLabel:
    """Label for a carrier at creation time, before any mediated write."""
    if provenance is Provenance.SIGNED_BASELINE:
        return TaintLabel.CLEAN
    if provenance in (Provenance.USER_PROVIDED, Provenance.DOWNLOADED, Provenance.EXTERNAL_SYNC):
        return TaintLabel.EXTERNAL
    if provenance is Provenance.AGENT_WRITTEN:
        return TaintLabel.TAINTED_DERIVED if writer_contaminated else TaintLabel.CLEAN
    raise ValueError(f"unhandled provenance {provenance}")


def propagate_on_write(
    writer: AgentDecisionState,
    target: Carrier,
    content_origin: TaintLabel,
) -> TaintLabel:
    """Label the target carrier takes after an allowed write.

    Contaminated writer: tainted_derived, regardless of what was written.
    Clean writer relaying untrusted content: tainted (the relay is itself
    a write, so downstream re-entry checks must see it). Clean writer,
    clean content: the target label is unchanged; overwriting a tainted
    carrier with clean bytes is not a declassification.
    """
    if writer.contaminated:
        return TaintLabel.TAINTED_DERIVED
    if content_origin.untrusted:
        return TaintLabel.TAINTED
    return target.label


def mark_contamination(state: AgentDecisionState, source_carrier: int | None) -> AgentDecisionState:
    sources = state.contamination_sources
    if source_carrier is not None:
        sources = sources | {source_carrier}
    return replace(state, contaminated=True, contamination_sources=sources)


def attenuate_capabilities(state: AgentDecisionState) -> AgentDecisionState:
    return replace(state, high_cap={kind: False for kind in state.high_cap})


def restore_capabilities(state: AgentDecisionState) -> AgentDecisionState:
    return replace(
        state,
        high_cap={kind: True for kind in sorted(state.base_caps, key=lambda k: k.value)},
    )


def context_reset(state: AgentDecisionState) -> AgentDecisionState:
    """Runtime-initiated reset: contamination cleared, capabilities restored.
    Carrier labels are untouched; a reset wipes the decision state, not disk."""
    cleared = replace(state, contaminated=False, contamination_sources=frozenset())
    return restore_capabilities(cleared)


# ---------------------------------------------------------------------------
# declassification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeclassResult:
    cleared: bool
    reason: str = ""


def declassify(
    authorizer: Authorizer,
    procedure: DeclassProcedure,
) -> DeclassResult:
    """Whether a declassification request is honored.

    Only runtime or operator authority can clear a label or a contamination
    flag. A request originating from the agent itself is refused no matter
    what it claims about the content: a contaminated decision state arguing
    for its own trustworthiness is the exact failure mode this exists to
    stop.
    """
    if authorizer is Authorizer.AGENT_SELF:
        return DeclassResult(cleared=False, reason="llm-origin")
    if procedure not in (
        DeclassProcedure.HUMAN_REVIEW,
        DeclassProcedure.DETERMINISTIC_VALIDATION,
        DeclassProcedure.CONTEXT_RESET,
    ):
        return DeclassResult(cleared=False, reason="unknown-procedure")
    return DeclassResult(cleared=True)


def declassify_carrier(carrier: Carrier, authorizer: Authorizer, procedure: DeclassProcedure) -> DeclassResult:
    result = declassify(authorizer, procedure)
    if result.cleared:
        carrier.label = TaintLabel.CLEAN
        carrier.content = None
    return result


def declassify_state(
    state: AgentDecisionState, authorizer: Authorizer, procedure: DeclassProcedure
) -> tuple[AgentDecisionState, DeclassResult]:
    result = declassify(authorizer, procedure)
    if result.cleared:
        return context_reset(state), result
    return state, result
