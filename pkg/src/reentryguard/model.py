"""Core vocabulary: taint labels, carriers, payload facets, events, decisions.

Invariants that the rest of the package leans on:

* Labels attach to carrier ids, never to names or paths. Renaming a carrier
  must not change its trust state, so nothing in this module keys on `name`.
* Trust only decreases through ordinary operation. The only transitions back
  to CLEAN are explicit declassification or context reset, both of which are
  external to the writing/reading agent (see taint module).
* Event ticks are non-decreasing within a trace. Verification depends on
  trace order, so append_event refuses regressions instead of sorting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


ATTACKER = "attacker"


class ReentryGuardError(Exception):
    """Base class for errors raised by this package."""


class CarrierInvariantError(ReentryGuardError):
    """A carrier was constructed with an inconsistent class/autoload combo."""


class TraceOrderError(ReentryGuardError):
    """An event was appended with a tick earlier than the trace tail."""


# ---------------------------------------------------------------------------
# labels and carrier classification
# ---------------------------------------------------------------------------


class TaintLabel(str, Enum):
    CLEAN = "clean"
    EXTERNAL = "external"
    TAINTED = "tainted"
    TAINTED_DERIVED = "tainted_derived"

    @property
    def untrusted(self) -> bool:
        return self is not TaintLabel.CLEAN


class Provenance(str, Enum):
    SIGNED_BASELINE = "signed_baseline"
    USER_PROVIDED = "user_provided"
    DOWNLOADED = "downloaded"
    EXTERNAL_SYNC = "external_sync"
    AGENT_WRITTEN = "agent_written"


class CarrierClass(str, Enum):
    STATIC_CONFIG = "static_config"
    TASK_LOCAL_STATE = "task_local_state"
    TRUSTED_MEMORY = "trusted_memory"
    CANDIDATE_MEMORY = "candidate_memory"
    WORKSPACE_FILE = "workspace_file"
    SHARED_CHANNEL_LOG = "shared_channel_log"
    EXTERNAL_SOURCE = "external_source"


class InjectionPosition(str, Enum):
    SYSTEM_PROMPT = "system_prompt"
    USER_PROMPT = "user_prompt"
    NOT_INJECTED = "not_injected"


class AutoloadPolicy(str, Enum):
    SESSION_START = "session_start"
    HEARTBEAT = "heartbeat"
    ON_DEMAND = "on_demand"
    NEVER = "never"


class CarrierScope(str, Enum):
    AGENT_LOCAL = "agent_local"
    SHARED_CROSS_AGENT = "shared_cross_agent"


class Privilege(str, Enum):
    LOW = "low"
    HIGH = "high"


class ActionKind(str, Enum):
    """High-risk action classification. Every variant is high-risk; low-risk
    operations (plain reads, formatting, local computation) never appear here
    and are never mediated as actions."""

    WRITE_AUTOLOADED = "write_autoloaded"
    WRITE_TRUSTED_MEMORY = "write_trusted_memory"
    WRITE_CONFIG = "write_config"
    WRITE_EXECUTABLE = "write_executable"
    SEND_MESSAGE = "send_message"
    INVOKE_SHELL = "invoke_shell"
    INVOKE_NETWORK = "invoke_network"
    MODIFY_POLICY = "modify_policy"
    COMMIT_CROSS_SESSION = "commit_cross_session"


class DeclassProcedure(str, Enum):
    HUMAN_REVIEW = "human_review"
    DETERMINISTIC_VALIDATION = "deterministic_validation"
    CONTEXT_RESET = "context_reset"


class Authorizer(str, Enum):
    RUNTIME = "runtime"
    OPERATOR = "operator"
    AGENT_SELF = "agent_self"


# memory gate vocabulary lives here because promote attempts are events and
# the event record carries the candidate schema


class SchemaKind(str, Enum):
    TYPED_PREFERENCE = "typed_preference"
    TYPED_FACT = "typed_fact"
    TYPED_TASK_NOTE = "typed_task_note"
    FREE_FORM_INSTRUCTION = "free_form_instruction"
    TOOL_PERMISSION = "tool_permission"
    POLICY_UPDATE = "policy_update"
    CROSS_USER_RULE = "cross_user_rule"
    EXECUTABLE_COMMAND = "executable_command"
    EXTERNAL_COMM_RULE = "external_comm_rule"


class CandidateSource(str, Enum):
    USER_DIRECT = "user_direct"
    AGENT_SUMMARY = "agent_summary"
    TOOL_OUTPUT = "tool_output"
    EXTERNAL_CONTENT = "external_content"


class CandidateScope(str, Enum):
    SELF_SESSION = "self_session"
    SELF_PERSISTENT = "self_persistent"
    CROSS_AGENT = "cross_agent"


# ---------------------------------------------------------------------------
# payload facets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PayloadFacets:
    """What a payload can still do after zero or more lossy hops.

    persist   : can direct its own write into a persistent carrier
    propagate : can direct transmission toward other agents
    harm      : can direct a high-risk side effect
    verbatim  : survives copying byte-for-byte (first thing paraphrase kills)
    """

    persist: bool = False
    propagate: bool = False
    harm: bool = False
    verbatim: bool = False

    @classmethod
    def none(cls) -> "PayloadFacets":
        return cls()

    @classmethod
    def full(cls) -> "PayloadFacets":
        return cls(persist=True, propagate=True, harm=True, verbatim=True)

    @property
    def any(self) -> bool:
        return self.persist or self.propagate or self.harm or self.verbatim

    def union(self, other: "PayloadFacets") -> "PayloadFacets":
        return PayloadFacets(
            persist=self.persist or other.persist,
            propagate=self.propagate or other.propagate,
            harm=self.harm or other.harm,
            verbatim=self.verbatim or other.verbatim,
        )

    def issubset(self, other: "PayloadFacets") -> bool:
        return (
            (not self.persist or other.persist)
            and (not self.propagate or other.propagate)
            and (not self.harm or other.harm)
            and (not self.verbatim or other.verbatim)
        )

    def token(self) -> str:
        """Four-char bit string, order: persist, propagate, harm, verbatim."""
        bits = (self.persist, self.propagate, self.harm, self.verbatim)
        return "".join("1" if b else "0" for b in bits)

    @classmethod
    def from_token(cls, token: str) -> "PayloadFacets":
        if len(token) != 4 or any(ch not in "01" for ch in token):
            raise ValueError(f"bad facet token: {token!r}")
        return cls(
            persist=token[0] == "1",
            propagate=token[1] == "1",
            harm=token[2] == "1",
            verbatim=token[3] == "1",
        )


# ---------------------------------------------------------------------------
# decisions
# ---------------------------------------------------------------------------


class Verdict(str, Enum):
    ALLOW = "allow"
    DENY = "deny"
    GUARD = "guard"


class Reason(str, Enum):
    OK = "ok"
    SEALED_CONFIG = "sealed-config"
    RTW_RE_ENTRY = "rtw-re-entry"
    LEASE_EXPIRED = "lease-expired"
    PROMOTION_REJECTED = "promotion-rejected"
    ATTENUATED_HIGHRISK = "attenuated-highrisk"
    NOT_MEDIATED_LOWRISK = "not-mediated-lowrisk"


class Layer(str, Enum):
    SEAL = "seal"
    RTW = "rtw"
    MEMGATE = "memgate"
    ATTENUATION = "attenuation"
    NONE = "none"


# each deny/guard reason is owned by exactly one layer; reports rebuild the
# layer from the reason, so the trace line does not need a layer column
REASON_LAYER: dict[Reason, Layer] = {
    Reason.OK: Layer.NONE,
    Reason.SEALED_CONFIG: Layer.SEAL,
    Reason.RTW_RE_ENTRY: Layer.RTW,
    Reason.LEASE_EXPIRED: Layer.MEMGATE,
    Reason.PROMOTION_REJECTED: Layer.MEMGATE,
    Reason.ATTENUATED_HIGHRISK: Layer.ATTENUATION,
    Reason.NOT_MEDIATED_LOWRISK: Layer.NONE,
}


class GuardMode(str, Enum):
    DENY_ALL = "deny"
    APPROVE_ALL = "approve"


@dataclass(frozen=True)
class Decision:
    verdict: Verdict
    reason: Reason
    layer: Layer

    def __post_init__(self) -> None:
        # deny/guard must explain themselves; allow must not blame a layer
        if self.verdict is not Verdict.ALLOW and self.reason is Reason.OK:
            raise ValueError("deny/guard decisions need a non-ok reason")
        if REASON_LAYER[self.reason] is not self.layer:
            raise ValueError(f"reason {self.reason} does not belong to layer {self.layer}")

    @classmethod
    def allow(cls, reason: Reason = Reason.OK) -> "Decision":
        return cls(Verdict.ALLOW, reason, REASON_LAYER[reason])

    @classmethod
    def deny(cls, reason: Reason) -> "Decision":
        return cls(Verdict.DENY, reason, REASON_LAYER[reason])

    @classmethod
    def guard(cls, reason: Reason) -> "Decision":
        return cls(Verdict.GUARD, reason, REASON_LAYER[reason])

    def effective(self, guard_mode: GuardMode) -> bool:
        """Whether the mediated event takes effect under the given guard mode."""
        if self.verdict is Verdict.ALLOW:
            return True
        if self.verdict is Verdict.GUARD:
            return guard_mode is GuardMode.APPROVE_ALL
        return False


# ---------------------------------------------------------------------------
# carriers
# ---------------------------------------------------------------------------


@dataclass
class Carrier:
    id: int
    name: str
    cls: CarrierClass
    owner: str | None
    injection: InjectionPosition
    autoload: AutoloadPolicy
    scope: CarrierScope
    label: TaintLabel = TaintLabel.CLEAN
    content: PayloadFacets | None = None
    provenance: Provenance = Provenance.SIGNED_BASELINE

    def __post_init__(self) -> None:
        if self.cls is CarrierClass.STATIC_CONFIG and self.autoload is not AutoloadPolicy.SESSION_START:
            raise CarrierInvariantError(f"carrier {self.id}: static config must autoload at session start")
        if self.cls is CarrierClass.CANDIDATE_MEMORY and self.autoload is not AutoloadPolicy.NEVER:
            raise CarrierInvariantError(f"carrier {self.id}: candidate memory is never autoloaded")

    @property
    def autoloaded(self) -> bool:
        return self.autoload in (AutoloadPolicy.SESSION_START, AutoloadPolicy.HEARTBEAT)


# ---------------------------------------------------------------------------
# events and traces
# ---------------------------------------------------------------------------


class EventKind(str, Enum):
    WRITE = "write"
    EXPOSED_READ = "exposed_read"
    OPAQUE_READ = "opaque_read"
    HIGH_RISK = "high_risk"
    MSG_SEND = "msg_send"
    MSG_RECV = "msg_recv"
    PROMOTE = "promote"
    DECLASSIFY = "declassify"
    CONTEXT_RESET = "context_reset"
    HEARTBEAT = "heartbeat"
    INJECT = "inject"


# kinds that mutate shared state and therefore must carry a mediation decision
EFFECTFUL_KINDS = frozenset(
    {
        EventKind.WRITE,
        EventKind.EXPOSED_READ,
        EventKind.OPAQUE_READ,
        EventKind.HIGH_RISK,
        EventKind.MSG_SEND,
        EventKind.PROMOTE,
        EventKind.DECLASSIFY,
    }
)


@dataclass
class Event:
    tick: int
    agent: str
    kind: EventKind
    carrier_id: int | None = None
    label: TaintLabel | None = None
    facets: PayloadFacets | None = None
    channel: str | None = None
    action: ActionKind | None = None
    schema: SchemaKind | None = None
    procedure: DeclassProcedure | None = None
    sender: str | None = None
    exfil: bool = False
    decision: Decision | None = None

    def __post_init__(self) -> None:
        if self.tick < 0:
            raise ValueError("event tick must be non-negative")


@dataclass
class Trace:
    events: list[Event] = field(default_factory=list)

    def append_event(self, event: Event) -> None:
        if self.events and event.tick < self.events[-1].tick:
            raise TraceOrderError(
                f"tick regression: {event.tick} after {self.events[-1].tick}"
            )
        self.events.append(event)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)


def project_carrier(trace: Trace, carrier_id: int) -> list[Event]:
    """Per-carrier projection: writes and exposed reads of one carrier, in
    trace order. Opaque reads and events on other carriers are excluded."""
    keep = (EventKind.WRITE, EventKind.EXPOSED_READ)
    return [
        ev
        for ev in trace.events
        if ev.carrier_id == carrier_id and ev.kind in keep
    ]
