"""Policy engine: complete mediation through one entry point.

Every effectful event a simulated agent proposes goes through mediate()
before it takes effect. The carrier class fixes where its enforcement cut
sits; the four layers are independently toggleable, and a disabled layer
passes its events through untouched, which is exactly what makes single
layer ablation runs meaningful.

Layer ownership of denial reasons:

    seal        sealed-config         writes to static config
    rtw         rtw-re-entry          exposed reads of untrusted workspace
                                      and shared-log carriers
    memgate     lease-expired         task-local writes outside a lease
                promotion-rejected    gate bypass or failed promotion
    attenuation attenuated-highrisk   high-risk actions (including high-risk
                                      writes) from a contaminated context

mediate() raising on an event kind it does not know is a feature: an
unmediated effectful kind is an incomplete-mediation bug, and failing loud
beats silently allowing it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .memgate import Lease, MemoryStores, PromotionPolicy, check_lease_write, promote
from .model import (
    ActionKind,
    AutoloadPolicy,
    Carrier,
    CarrierClass,
    CarrierScope,
    Decision,
    Event,
    EventKind,
    GuardMode,
    Reason,
    ReentryGuardError,
    TaintLabel,
)
from .rtw import enforce_exposed_read, enforce_opaque_read
from .taint import AgentDecisionState


class MediationError(ReentryGuardError):
    """An effectful event kind reached mediate() without a dispatch rule."""


# ---------------------------------------------------------------------------
# enforcement configuration
# ---------------------------------------------------------------------------

LAYER_NAMES = ("rtw", "seal", "memgate", "attenuation")


@dataclass(frozen=True)
class EnforcementConfig:
    rtw: bool = False
    seal: bool = False
    memgate: bool = False
    attenuation: bool = False
    guard_mode: GuardMode = GuardMode.DENY_ALL

    @classmethod
    def all_enabled(cls, guard_mode: GuardMode = GuardMode.DENY_ALL) -> "EnforcementConfig":
        return cls(rtw=True, seal=True, memgate=True, attenuation=True, guard_mode=guard_mode)

    @classmethod
    def none(cls) -> "EnforcementConfig":
        return cls()

    @classmethod
    def from_names(cls, spec: str, guard_mode: GuardMode = GuardMode.DENY_ALL) -> "EnforcementConfig":
        """Parse a comma list of layer names; 'all' and 'none' are shorthands."""
        spec = spec.strip().lower()
        if spec == "all":
            return cls.all_enabled(guard_mode)
        if spec == "none" or spec == "":
            return cls(guard_mode=guard_mode)
        cfg = cls(guard_mode=guard_mode)
        for name in spec.split(","):
            name = name.strip()
            if name not in LAYER_NAMES:
                raise ValueError(f"unknown enforcement layer {name!r}; valid: {', '.join(LAYER_NAMES)}, all, none")
            cfg = replace(cfg, **{name: True})
        return cfg

    def flags(self) -> dict[str, bool]:
        return {
            "rtw": self.rtw,
            "seal": self.seal,
            "memgate": self.memgate,
            "attenuation": self.attenuation,
        }


# ---------------------------------------------------------------------------
# cut points
# ---------------------------------------------------------------------------


class CutPoint(str, Enum):
    WRITE_TIME = "write_time"
    EXPOSED_READ_TIME = "exposed_read_time"
    PROMOTION_TIME = "promotion_time"
    POST_READ_ATTENUATION = "post_read_attenuation"


_CUT_POINTS: dict[CarrierClass, CutPoint] = {
    CarrierClass.STATIC_CONFIG: CutPoint.WRITE_TIME,
    CarrierClass.WORKSPACE_FILE: CutPoint.EXPOSED_READ_TIME,
    CarrierClass.SHARED_CHANNEL_LOG: CutPoint.EXPOSED_READ_TIME,
    CarrierClass.TRUSTED_MEMORY: CutPoint.PROMOTION_TIME,
    CarrierClass.CANDIDATE_MEMORY: CutPoint.PROMOTION_TIME,
    CarrierClass.TASK_LOCAL_STATE: CutPoint.PROMOTION_TIME,
    CarrierClass.EXTERNAL_SOURCE: CutPoint.POST_READ_ATTENUATION,
}


def cut_point_for(cls: CarrierClass) -> CutPoint:
    """Total map from carrier class to the point where its flow is cut.
    Unavoidable external sources cannot be cut at read time at all, which is
    why their cut sits after the read, on the actions of the reader."""
    return _CUT_POINTS[cls]


# ---------------------------------------------------------------------------
# attenuation
# ---------------------------------------------------------------------------


def classify_write(carrier: Carrier) -> ActionKind | None:
    """High-risk classification for a write, or None for an ordinary output
    write. Ordinary writes stay allowed for usability and are only labeled."""
    if carrier.cls is CarrierClass.STATIC_CONFIG:
        return ActionKind.WRITE_CONFIG
    if carrier.cls is CarrierClass.TRUSTED_MEMORY:
        return ActionKind.WRITE_TRUSTED_MEMORY
    if carrier.autoload in (AutoloadPolicy.SESSION_START, AutoloadPolicy.HEARTBEAT):
        return ActionKind.WRITE_AUTOLOADED
    if carrier.scope is CarrierScope.SHARED_CROSS_AGENT:
        return ActionKind.COMMIT_CROSS_SESSION
    return None


def attenuate(state: AgentDecisionState, action: ActionKind, config: EnforcementConfig) -> Decision:
    """Post-contamination gate on high-risk actions. With the layer enabled,
    a contaminated context gets deny (or a guard escalation, depending on
    guard mode) for every high-risk action, whatever its capability map said
    before contamination."""
    del action  # every ActionKind is high-risk by construction
    if config.attenuation and state.contaminated:
        if config.guard_mode is GuardMode.APPROVE_ALL:
            return Decision.guard(Reason.ATTENUATED_HIGHRISK)
        return Decision.deny(Reason.ATTENUATED_HIGHRISK)
    return Decision.allow()


# ---------------------------------------------------------------------------
# mediation
# ---------------------------------------------------------------------------


@dataclass
class MediationContext:
    """Lookups mediate() needs. The simulator owns the mutable state and
    hands in views; mediate only reads."""

    carriers: dict[int, Carrier]
    states: dict[str, AgentDecisionState]
    stores: dict[str, MemoryStores]
    leases: list[Lease]
    promotion_policy: PromotionPolicy


def _mediate_write(event: Event, ctx: MediationContext, config: EnforcementConfig) -> Decision:
    carrier = ctx.carriers[event.carrier_id]
    writer = ctx.states[event.agent]

    if carrier.cls is CarrierClass.STATIC_CONFIG and config.seal:
        # sealed runtime constant: write weight zero while the session runs
        return Decision.deny(Reason.SEALED_CONFIG)
    if carrier.cls is CarrierClass.TASK_LOCAL_STATE and config.memgate:
        if not check_lease_write(carrier.id, event.tick, ctx.leases):
            return Decision.deny(Reason.LEASE_EXPIRED)
    if carrier.cls is CarrierClass.TRUSTED_MEMORY and config.memgate:
        # trusted memory only grows through promotion; a direct write is a
        # gate bypass no matter who asks
        return Decision.deny(Reason.PROMOTION_REJECTED)

    risk = classify_write(carrier)
    if risk is not None:
        verdict = attenuate(writer, risk, config)
        if verdict.verdict.value != "allow":
            return verdict
    return Decision.allow()


def _mediate_exposed_read(event: Event, ctx: MediationContext, config: EnforcementConfig) -> Decision:
    carrier = ctx.carriers[event.carrier_id]
    reader = ctx.states[event.agent]
    label = event.label if event.label is not None else carrier.label

    if carrier.cls in (CarrierClass.WORKSPACE_FILE, CarrierClass.SHARED_CHANNEL_LOG) and config.rtw:
        return enforce_exposed_read(label, reader)
    # external sources are unavoidable reads: cut sits after the read;
    # memory, task state and config carriers have their cuts at promotion
    # and write time respectively
    return Decision.allow()


def _mediate_promote(event: Event, ctx: MediationContext, config: EnforcementConfig) -> Decision:
    if not config.memgate:
        return Decision.allow()
    store = ctx.stores[event.agent]
    candidate = store.candidates[event.carrier_id]
    if promote(candidate, ctx.promotion_policy):
        return Decision.allow()
    return Decision.deny(Reason.PROMOTION_REJECTED)


def mediate(event: Event, ctx: MediationContext, config: EnforcementConfig) -> Decision:
    """Single mediation entry point. Dispatch is by event kind; carrier
    classes select the layer inside each branch. Raises MediationError for
    kinds outside the table so a missed call site cannot slip through as an
    implicit allow."""
    kind = event.kind
    if kind is EventKind.WRITE:
        return _mediate_write(event, ctx, config)
    if kind is EventKind.EXPOSED_READ:
        return _mediate_exposed_read(event, ctx, config)
    if kind is EventKind.OPAQUE_READ:
        carrier = ctx.carriers[event.carrier_id]
        return enforce_opaque_read(carrier.label)
    if kind is EventKind.PROMOTE:
        return _mediate_promote(event, ctx, config)
    if kind in (EventKind.HIGH_RISK, EventKind.MSG_SEND):
        action = event.action if event.action is not None else ActionKind.SEND_MESSAGE
        return attenuate(ctx.states[event.agent], action, config)
    if kind is EventKind.DECLASSIFY:
        # declassification events are runtime-initiated; authorization is
        # checked by the taint engine before the event is even proposed
        return Decision.allow()
    raise MediationError(f"event kind {kind.value} has no mediation rule")


def effective_label_after_read(label: TaintLabel | None, carrier: Carrier) -> TaintLabel:
    return label if label is not None else carrier.label
