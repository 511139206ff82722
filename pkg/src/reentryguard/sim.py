"""Deterministic multi-agent ecosystem simulator.

Time is a logical tick counter. Within a tick the order is fixed: scheduled
resets and declassifications, message deliveries (channels sorted, messages
FIFO, receivers sorted), the attacker injection if due, then heartbeat turns
for every agent whose period divides the tick. Tick 0 is setup: session-start
reads plus the injection when it is scheduled at 0. Two runs of the same
scenario must serialize byte-identical traces; the only randomness is the
seeded draw behind Bernoulli compliance policies.

Agent behavior is a fixed policy, not a model call. On facet-bearing content
the agent complies with (per the injection position of where the content
arrived), it proposes: a write of the facets into its heartbeat carrier while
still fresh from clean state, and once contaminated, a config overwrite, a
one-time free-form memory promotion, message sends on its channels, and a
shell invocation when it holds high privilege. Every proposal passes mediate()
and takes effect only when the decision says so.

Messages between agents lose facets per channel hop through transform_payload;
the attacker's own injected message is placed verbatim (nothing paraphrased
it). Carrier persistence is what survives unmodified between turns.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from . import verifier as verifier_mod
from .memgate import Lease, MemoryCandidate, MemoryStores, PromotionPolicy, default_policy
from .model import (
    ATTACKER,
    ActionKind,
    Authorizer,
    AutoloadPolicy,
    CandidateScope,
    CandidateSource,
    Carrier,
    CarrierClass,
    CarrierScope,
    DeclassProcedure,
    Event,
    EventKind,
    InjectionPosition,
    PayloadFacets,
    Privilege,
    Provenance,
    ReentryGuardError,
    SchemaKind,
    TaintLabel,
    Trace,
)
from .policy import EnforcementConfig, MediationContext, mediate
from .taint import (
    AgentDecisionState,
    attenuate_capabilities,
    context_reset,
    declassify_carrier,
    fresh_state,
    mark_contamination,
    propagate_on_write,
)
from .tracelog import AgentMeta, CarrierMeta, TraceMeta, render_trace


class ScenarioError(ReentryGuardError):
    """A scenario definition is internally inconsistent."""


# ---------------------------------------------------------------------------
# payload transformation
# ---------------------------------------------------------------------------

# fixed drop order: cheapest-to-lose first. Paraphrase kills byte fidelity
# before it kills intent; persistence directives survive the longest.
FACET_DROP_ORDER = ("verbatim", "harm", "propagate", "persist")
PERSIST_DROP_STRENGTH = len(FACET_DROP_ORDER)


def transform_payload(facets: PayloadFacets, strength: int, seed: int | None = None) -> PayloadFacets:
    """Lossy per-hop transformation. Strength k clears the first k facets in
    FACET_DROP_ORDER; 0 is the identity. Deterministic given (facets,
    strength); the seed parameter is accepted for signature stability and
    unused by the fixed-order pipeline."""
    del seed
    if strength < 0:
        raise ValueError("transform strength must be non-negative")
    if strength == 0:
        return facets
    dropped = {name: False for name in FACET_DROP_ORDER[: min(strength, PERSIST_DROP_STRENGTH)]}
    return replace(facets, **dropped)


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompliancePolicy:
    """Whether content arriving at an injection position drives behavior."""

    kind: str  # always | never | bernoulli
    p: float = 0.0

    def decide(self, rng: random.Random) -> bool:
        if self.kind == "always":
            return True
        if self.kind == "never":
            return False
        if self.kind == "bernoulli":
            return rng.random() < self.p
        raise ScenarioError(f"unknown compliance kind {self.kind!r}")


ALWAYS = CompliancePolicy("always")
NEVER = CompliancePolicy("never")


def bernoulli(p: float) -> CompliancePolicy:
    return CompliancePolicy("bernoulli", p)


class Capability:
    FILE_WRITE = "file_write"
    MESSAGING = "messaging"
    SHELL = "shell"
    NETWORK = "network"
    ALL = frozenset({FILE_WRITE, MESSAGING, SHELL, NETWORK})


CAPABILITY_PRESETS: dict[str, frozenset[str]] = {
    "full": Capability.ALL,
    "messaging_disabled": Capability.ALL - {Capability.MESSAGING},
    "file_write_disabled": Capability.ALL - {Capability.FILE_WRITE},
    "minimal": frozenset(),
}


def _base_action_caps(privilege: Privilege, capabilities: frozenset[str]) -> frozenset[ActionKind]:
    caps: set[ActionKind] = set()
    if Capability.FILE_WRITE in capabilities:
        caps |= {
            ActionKind.WRITE_AUTOLOADED,
            ActionKind.WRITE_TRUSTED_MEMORY,
            ActionKind.WRITE_CONFIG,
            ActionKind.COMMIT_CROSS_SESSION,
        }
    if Capability.MESSAGING in capabilities:
        caps.add(ActionKind.SEND_MESSAGE)
    if privilege is Privilege.HIGH:
        if Capability.SHELL in capabilities:
            caps.add(ActionKind.INVOKE_SHELL)
        if Capability.NETWORK in capabilities:
            caps.add(ActionKind.INVOKE_NETWORK)
    return frozenset(caps)


@dataclass(frozen=True)
class AgentProfile:
    id: str
    framework: str
    privilege: Privilege
    heartbeat_period: int
    channels: tuple[str, ...]
    compliance: dict[InjectionPosition, CompliancePolicy] = field(
        default_factory=lambda: {
            InjectionPosition.USER_PROMPT: ALWAYS,
            InjectionPosition.SYSTEM_PROMPT: NEVER,
        }
    )
    capabilities: frozenset[str] = Capability.ALL

    def complies(self, position: InjectionPosition, rng: random.Random) -> bool:
        policy = self.compliance.get(position, NEVER)
        return policy.decide(rng)


# ---------------------------------------------------------------------------
# framework templates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrameworkProfile:
    """Carrier surface one deployed agent of this framework exposes.
    system/user counts fix the template shape; the functional slots
    (config, heartbeat task file, task state, memory store) are always
    present, padded with inert on-demand workspace files."""

    name: str
    system_carriers: int
    user_carriers: int
    memory_position: InjectionPosition


FRAMEWORKS: dict[str, FrameworkProfile] = {
    "A": FrameworkProfile("A", system_carriers=2, user_carriers=9, memory_position=InjectionPosition.SYSTEM_PROMPT),
    "B": FrameworkProfile("B", system_carriers=2, user_carriers=10, memory_position=InjectionPosition.SYSTEM_PROMPT),
    "C": FrameworkProfile("C", system_carriers=1, user_carriers=7, memory_position=InjectionPosition.USER_PROMPT),
}


@dataclass
class AgentCarrierSet:
    config_id: int
    heartbeat_id: int
    task_id: int
    memory_id: int
    all_ids: list[int]


# ---------------------------------------------------------------------------
# scenario definition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Injection:
    channel: str
    tick: int
    facets: PayloadFacets


@dataclass(frozen=True)
class SeededCarrier:
    """Optional pre-poisoned carrier slot for stress scenarios: marks one of
    an agent's workspace/task carriers as externally sourced content."""

    agent: str
    slot: str  # "heartbeat" | "task" | "ondemand"
    facets: PayloadFacets
    provenance: Provenance = Provenance.EXTERNAL_SYNC


@dataclass
class Scenario:
    name: str
    seed: int
    max_ticks: int
    enforcement: EnforcementConfig
    agents: list[AgentProfile]
    channels: list[str]
    injection: Injection | None
    transform_default: int = 0
    transform_strength: dict[str, int] = field(default_factory=dict)
    promotion_policy: PromotionPolicy = field(default_factory=default_policy)
    task_leases: dict[str, tuple[int, int]] = field(default_factory=dict)
    exfil_channel: str | None = None
    resets: list[tuple[str, int]] = field(default_factory=list)
    declassify_carrier_of: list[tuple[str, int]] = field(default_factory=list)  # (agent, tick): clear heartbeat carrier
    seeded_carriers: list[SeededCarrier] = field(default_factory=list)
    heartbeat_log_channels: list[str] = field(default_factory=list)  # channels whose log is heartbeat-autoloaded

    def validate(self) -> None:
        if self.max_ticks < 1:
            raise ScenarioError("max_ticks must be at least 1")
        if not self.agents:
            raise ScenarioError("scenario needs at least one agent")
        ids = [a.id for a in self.agents]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate agent ids")
        if ATTACKER in ids:
            raise ScenarioError(f"agent id {ATTACKER!r} is reserved")
        if len(set(self.channels)) != len(self.channels):
            raise ScenarioError("duplicate channel names")
        known = set(self.channels)
        for a in self.agents:
            if a.heartbeat_period < 1:
                raise ScenarioError(f"agent {a.id}: heartbeat period must be >= 1")
            missing = set(a.channels) - known
            if missing:
                raise ScenarioError(f"agent {a.id}: unknown channels {sorted(missing)}")
            if a.framework not in FRAMEWORKS:
                raise ScenarioError(f"agent {a.id}: unknown framework {a.framework!r}")
        if self.injection is not None:
            if self.injection.channel not in known:
                raise ScenarioError(f"injection channel {self.injection.channel!r} unknown")
            if not (0 <= self.injection.tick <= self.max_ticks):
                raise ScenarioError("injection tick outside the run")
        for ch, strength in self.transform_strength.items():
            if ch not in known:
                raise ScenarioError(f"transform strength for unknown channel {ch!r}")
            if not (0 <= strength <= PERSIST_DROP_STRENGTH):
                raise ScenarioError("transform strength out of range")
        if not (0 <= self.transform_default <= PERSIST_DROP_STRENGTH):
            raise ScenarioError("transform strength out of range")
        if self.exfil_channel is not None and self.exfil_channel not in known:
            raise ScenarioError(f"exfil channel {self.exfil_channel!r} unknown")
        for ch in self.heartbeat_log_channels:
            if ch not in known:
                raise ScenarioError(f"heartbeat log for unknown channel {ch!r}")
        agent_set = set(ids)
        for agent, _tick in self.resets:
            if agent not in agent_set:
                raise ScenarioError(f"reset for unknown agent {agent!r}")
        for sc in self.seeded_carriers:
            if sc.agent not in agent_set:
                raise ScenarioError(f"seeded carrier for unknown agent {sc.agent!r}")

    def strength_for(self, channel: str) -> int:
        return self.transform_strength.get(channel, self.transform_default)


@dataclass
class Message:
    sender: str
    channel: str
    facets: PayloadFacets
    label: TaintLabel
    exfil: bool = False
    from_inject: bool = False


# ---------------------------------------------------------------------------
# ecosystem
# ---------------------------------------------------------------------------


def _content_label(writer: AgentDecisionState, origin: TaintLabel) -> TaintLabel:
    """Label of content an agent emits: conservative writer rule."""
    if writer.contaminated:
        return TaintLabel.TAINTED_DERIVED
    if origin.untrusted:
        return TaintLabel.TAINTED
    return TaintLabel.CLEAN


@dataclass
class _TurnSource:
    facets: PayloadFacets
    position: InjectionPosition
    label: TaintLabel


class Ecosystem:
    def __init__(self, scenario: Scenario):
        scenario.validate()
        self.scenario = scenario
        self.config = scenario.enforcement
        self.rng = random.Random(scenario.seed)
        self.trace = Trace()
        self.agents: dict[str, AgentProfile] = {a.id: a for a in scenario.agents}
        self.agent_order = sorted(self.agents)
        self.states: dict[str, AgentDecisionState] = {}
        self.stores: dict[str, MemoryStores] = {}
        self.carriers: dict[int, Carrier] = {}
        self.carrier_sets: dict[str, AgentCarrierSet] = {}
        self.channel_source: dict[str, int] = {}
        self.channel_log: dict[str, int] = {}
        self.leases: list[Lease] = []
        self.queued: dict[str, list[Message]] = {ch: [] for ch in scenario.channels}
        self.candidate_submitted: set[str] = set()
        self._next_carrier = 1
        self._build()

    # -- construction -------------------------------------------------------

    def _add_carrier(self, carrier: Carrier) -> int:
        self.carriers[carrier.id] = carrier
        return carrier.id

    def _new_id(self) -> int:
        cid = self._next_carrier
        self._next_carrier += 1
        return cid

    def _build(self) -> None:
        seeded = {(sc.agent, sc.slot): sc for sc in self.scenario.seeded_carriers}
        for agent_id in self.agent_order:
            profile = self.agents[agent_id]
            fw = FRAMEWORKS[profile.framework]
            ids: list[int] = []

            config_id = self._add_carrier(
                Carrier(
                    id=self._new_id(),
                    name=f"{agent_id}.identity",
                    cls=CarrierClass.STATIC_CONFIG,
                    owner=agent_id,
                    injection=InjectionPosition.SYSTEM_PROMPT,
                    autoload=AutoloadPolicy.SESSION_START,
                    scope=CarrierScope.AGENT_LOCAL,
                )
            )
            ids.append(config_id)

            memory_id = self._add_carrier(
                Carrier(
                    id=self._new_id(),
                    name=f"{agent_id}.memory",
                    cls=CarrierClass.TRUSTED_MEMORY,
                    owner=agent_id,
                    injection=fw.memory_position,
                    autoload=AutoloadPolicy.HEARTBEAT,
                    scope=CarrierScope.AGENT_LOCAL,
                )
            )
            ids.append(memory_id)

            hb_seed = seeded.get((agent_id, "heartbeat"))
            heartbeat_id = self._add_carrier(
                Carrier(
                    id=self._new_id(),
                    name=f"{agent_id}.taskfile",
                    cls=CarrierClass.WORKSPACE_FILE,
                    owner=agent_id,
                    injection=InjectionPosition.USER_PROMPT,
                    autoload=AutoloadPolicy.HEARTBEAT,
                    scope=CarrierScope.AGENT_LOCAL,
                    label=TaintLabel.EXTERNAL if hb_seed else TaintLabel.CLEAN,
                    content=hb_seed.facets if hb_seed else None,
                    provenance=hb_seed.provenance if hb_seed else Provenance.SIGNED_BASELINE,
                )
            )
            ids.append(heartbeat_id)

            task_seed = seeded.get((agent_id, "task"))
            task_id = self._add_carrier(
                Carrier(
                    id=self._new_id(),
                    name=f"{agent_id}.taskstate",
                    cls=CarrierClass.TASK_LOCAL_STATE,
                    owner=agent_id,
                    injection=InjectionPosition.USER_PROMPT,
                    autoload=AutoloadPolicy.HEARTBEAT,
                    scope=CarrierScope.AGENT_LOCAL,
                    label=TaintLabel.EXTERNAL if task_seed else TaintLabel.CLEAN,
                    content=task_seed.facets if task_seed else None,
                    provenance=task_seed.provenance if task_seed else Provenance.SIGNED_BASELINE,
                )
            )
            ids.append(task_id)

            # pad with inert on-demand workspace files so the injectable
            # surface matches the framework shape
            pad = fw.system_carriers + fw.user_carriers - len(ids)
            for i in range(pad):
                od_seed = seeded.get((agent_id, "ondemand")) if i == 0 else None
                ids.append(
                    self._add_carrier(
                        Carrier(
                            id=self._new_id(),
                            name=f"{agent_id}.notes{i}",
                            cls=CarrierClass.WORKSPACE_FILE,
                            owner=agent_id,
                            injection=InjectionPosition.USER_PROMPT,
                            autoload=AutoloadPolicy.ON_DEMAND,
                            scope=CarrierScope.AGENT_LOCAL,
                            label=TaintLabel.EXTERNAL if od_seed else TaintLabel.CLEAN,
                            content=od_seed.facets if od_seed else None,
                            provenance=od_seed.provenance if od_seed else Provenance.SIGNED_BASELINE,
                        )
                    )
                )

            self.carrier_sets[agent_id] = AgentCarrierSet(
                config_id=config_id,
                heartbeat_id=heartbeat_id,
                task_id=task_id,
                memory_id=memory_id,
                all_ids=ids,
            )
            self.states[agent_id] = fresh_state(
                agent_id,
                profile.privilege,
                _base_action_caps(profile.privilege, profile.capabilities),
            )
            self.stores[agent_id] = MemoryStores()
            lease = self.scenario.task_leases.get(agent_id)
            if lease is not None:
                self.leases.append(Lease(carrier_id=task_id, t0=lease[0], t1=lease[1]))

        for ch in self.scenario.channels:
            self.channel_source[ch] = self._add_carrier(
                Carrier(
                    id=self._new_id(),
                    name=f"{ch}.feed",
                    cls=CarrierClass.EXTERNAL_SOURCE,
                    owner=None,
                    injection=InjectionPosition.USER_PROMPT,
                    autoload=AutoloadPolicy.NEVER,
                    scope=CarrierScope.SHARED_CROSS_AGENT,
                    label=TaintLabel.EXTERNAL,
                    provenance=Provenance.EXTERNAL_SYNC,
                )
            )
            self.channel_log[ch] = self._add_carrier(
                Carrier(
                    id=self._new_id(),
                    name=f"{ch}.log",
                    cls=CarrierClass.SHARED_CHANNEL_LOG,
                    owner=None,
                    injection=InjectionPosition.USER_PROMPT,
                    autoload=(
                        AutoloadPolicy.HEARTBEAT
                        if ch in self.scenario.heartbeat_log_channels
                        else AutoloadPolicy.NEVER
                    ),
                    scope=CarrierScope.SHARED_CROSS_AGENT,
                )
            )

    # -- mediation plumbing --------------------------------------------------

    def _ctx(self) -> MediationContext:
        return MediationContext(
            carriers=self.carriers,
            states=self.states,
            stores=self.stores,
            leases=self.leases,
            promotion_policy=self.scenario.promotion_policy,
        )

    def _record(self, event: Event) -> None:
        self.trace.append_event(event)

    def _mediated(self, event: Event) -> bool:
        """Mediate, record, and report whether the event takes effect."""
        event.decision = mediate(event, self._ctx(), self.config)
        self.trace.append_event(event)
        return event.decision.effective(self.config.guard_mode)

    # -- state transitions ---------------------------------------------------

    def _contaminate(self, agent: str, source_carrier: int | None) -> None:
        state = mark_contamination(self.states[agent], source_carrier)
        if self.config.attenuation:
            state = attenuate_capabilities(state)
        self.states[agent] = state

    def _apply_write(self, agent: str, carrier: Carrier, facets: PayloadFacets | None, origin: TaintLabel) -> None:
        carrier.label = propagate_on_write(self.states[agent], carrier, origin)
        if facets is not None and facets.any:
            carrier.content = facets

    def _queue_message(self, msg: Message) -> None:
        self.queued[msg.channel].append(msg)
        log = self.carriers[self.channel_log[msg.channel]]
        if msg.label.untrusted and not log.label.untrusted:
            log.label = TaintLabel.TAINTED if msg.from_inject else TaintLabel.TAINTED_DERIVED
        if msg.facets.any:
            log.content = (log.content or PayloadFacets.none()).union(msg.facets)

    # -- agent turns ---------------------------------------------------------

    def _exposed_read(self, tick: int, agent: str, carrier: Carrier, label: TaintLabel) -> bool:
        ev = Event(tick=tick, agent=agent, kind=EventKind.EXPOSED_READ, carrier_id=carrier.id, label=label)
        if not self._mediated(ev):
            return False
        if label.untrusted:
            self._contaminate(agent, carrier.id)
        return True

    def _message_turn(self, tick: int, agent: str, msg: Message, delivered: PayloadFacets) -> None:
        profile = self.agents[agent]
        src = self.carriers[self.channel_source[msg.channel]]
        self._record(
            Event(
                tick=tick,
                agent=agent,
                kind=EventKind.MSG_RECV,
                channel=msg.channel,
                facets=delivered,
                label=msg.label,
                sender=msg.sender,
            )
        )
        was_clean = not self.states[agent].contaminated
        if not self._exposed_read(tick, agent, src, msg.label):
            return
        if not profile.complies(InjectionPosition.USER_PROMPT, self.rng):
            return
        self._act_on_payload(tick, agent, was_clean, delivered, msg.label)

    def _heartbeat_reads(self, tick: int, agent: str) -> list[_TurnSource]:
        sources: list[_TurnSource] = []
        cset = self.carrier_sets[agent]
        store = self.stores[agent]
        read_ids = [
            cid
            for cid in cset.all_ids
            if self.carriers[cid].autoload is AutoloadPolicy.HEARTBEAT
        ]
        for ch in self.agents[agent].channels:
            log = self.carriers[self.channel_log[ch]]
            if log.autoload is AutoloadPolicy.HEARTBEAT:
                read_ids.append(log.id)
        for cid in sorted(read_ids):
            carrier = self.carriers[cid]
            if cid == cset.memory_id:
                if self.config.memgate:
                    entries = store.live_entries(tick)
                    if not entries:
                        continue
                    if not self._exposed_read(tick, agent, carrier, carrier.label):
                        continue
                    # gated render: typed projection only, facets never surface
                    store.render_projection(tick)
                    sources.append(
                        _TurnSource(PayloadFacets.none(), carrier.injection, carrier.label)
                    )
                else:
                    raw = store.raw_render()
                    if not raw:
                        continue
                    if not self._exposed_read(tick, agent, carrier, carrier.label):
                        continue
                    facets = PayloadFacets.none()
                    for cand in raw:
                        if cand.content is not None:
                            facets = facets.union(cand.content)
                    sources.append(_TurnSource(facets, carrier.injection, carrier.label))
                continue
            if not self._exposed_read(tick, agent, carrier, carrier.label):
                continue
            facets = carrier.content if carrier.content is not None else PayloadFacets.none()
            sources.append(_TurnSource(facets, carrier.injection, carrier.label))
        return sources

    def _heartbeat_turn(self, tick: int, agent: str) -> None:
        profile = self.agents[agent]
        cset = self.carrier_sets[agent]
        self._record(Event(tick=tick, agent=agent, kind=EventKind.HEARTBEAT))

        # routine config validity probe: opaque, so any label is fine and
        # nothing enters the decision context
        config_carrier = self.carriers[cset.config_id]
        self._mediated(
            Event(
                tick=tick,
                agent=agent,
                kind=EventKind.OPAQUE_READ,
                carrier_id=config_carrier.id,
                label=config_carrier.label,
            )
        )

        was_clean = not self.states[agent].contaminated
        sources = self._heartbeat_reads(tick, agent)

        # routine task bookkeeping under lease; a compromised agent's turn is
        # payload-driven, so only clean agents keep their routine
        if Capability.FILE_WRITE in profile.capabilities and not self.states[agent].contaminated:
            task = self.carriers[cset.task_id]
            ev = Event(
                tick=tick,
                agent=agent,
                kind=EventKind.WRITE,
                carrier_id=task.id,
                label=TaintLabel.CLEAN,
            )
            if self._mediated(ev):
                self._apply_write(agent, task, None, TaintLabel.CLEAN)

        complied: list[_TurnSource] = []
        decided: dict[InjectionPosition, bool] = {}
        for source in sources:
            if not source.facets.any:
                continue
            if source.position not in decided:
                decided[source.position] = profile.complies(source.position, self.rng)
            if decided[source.position]:
                complied.append(source)
        if not complied:
            return
        facets = PayloadFacets.none()
        origin = TaintLabel.CLEAN
        for source in complied:
            facets = facets.union(source.facets)
            if origin is TaintLabel.CLEAN and source.label.untrusted:
                origin = source.label
        self._act_on_payload(tick, agent, was_clean, facets, origin)

    def _act_on_payload(
        self,
        tick: int,
        agent: str,
        was_clean: bool,
        facets: PayloadFacets,
        origin: TaintLabel,
    ) -> None:
        if not facets.any:
            return
        profile = self.agents[agent]
        state = self.states[agent]
        cset = self.carrier_sets[agent]
        can_write = Capability.FILE_WRITE in profile.capabilities
        can_send = Capability.MESSAGING in profile.capabilities

        if facets.persist and was_clean and can_write:
            target = self.carriers[cset.heartbeat_id]
            ev = Event(
                tick=tick,
                agent=agent,
                kind=EventKind.WRITE,
                carrier_id=target.id,
                facets=facets,
                label=_content_label(state, origin),
            )
            if self._mediated(ev):
                self._apply_write(agent, target, facets, origin)

        state = self.states[agent]
        if not state.contaminated:
            return

        if facets.persist and can_write:
            config_carrier = self.carriers[cset.config_id]
            ev = Event(
                tick=tick,
                agent=agent,
                kind=EventKind.WRITE,
                carrier_id=config_carrier.id,
                facets=facets,
                label=_content_label(state, origin),
            )
            if self._mediated(ev):
                self._apply_write(agent, config_carrier, facets, origin)

        # persistent memory lives in storage too: without the file-write
        # permission there is nothing to admit into
        if facets.persist and can_write and agent not in self.candidate_submitted:
            self.candidate_submitted.add(agent)
            store = self.stores[agent]
            candidate = MemoryCandidate(
                id=store.new_candidate_id(),
                schema=SchemaKind.FREE_FORM_INSTRUCTION,
                source=CandidateSource.AGENT_SUMMARY,
                scope=CandidateScope.CROSS_AGENT,
                authority=self.scenario.promotion_policy.authority_max + 1,
                ttl=self.scenario.promotion_policy.ttl_max + 1,
                value="standing-directive",
                content=facets,
            )
            store.submit_candidate(candidate)
            ev = Event(
                tick=tick,
                agent=agent,
                kind=EventKind.PROMOTE,
                carrier_id=candidate.id,
                schema=candidate.schema,
                facets=facets,
                label=_content_label(state, origin),
            )
            if self._mediated(ev):
                store.admit(candidate.id, tick)
                memory_carrier = self.carriers[cset.memory_id]
                memory_carrier.label = _content_label(state, origin)

        if facets.propagate and can_send:
            for ch in sorted(profile.channels):
                ev = Event(
                    tick=tick,
                    agent=agent,
                    kind=EventKind.MSG_SEND,
                    channel=ch,
                    facets=facets,
                    label=_content_label(state, origin),
                    action=ActionKind.SEND_MESSAGE,
                )
                if self._mediated(ev):
                    self._queue_message(
                        Message(sender=agent, channel=ch, facets=facets, label=ev.label)
                    )

        if facets.harm and profile.privilege is Privilege.HIGH:
            if Capability.SHELL in profile.capabilities:
                ev = Event(
                    tick=tick,
                    agent=agent,
                    kind=EventKind.HIGH_RISK,
                    action=ActionKind.INVOKE_SHELL,
                    label=_content_label(state, origin),
                )
                self._mediated(ev)
            exfil_ch = self.scenario.exfil_channel
            if exfil_ch is not None and exfil_ch in profile.channels and can_send:
                config_carrier = self.carriers[cset.config_id]
                self._exposed_read(tick, agent, config_carrier, config_carrier.label)
                ev = Event(
                    tick=tick,
                    agent=agent,
                    kind=EventKind.MSG_SEND,
                    channel=exfil_ch,
                    facets=facets,
                    label=_content_label(self.states[agent], origin),
                    action=ActionKind.SEND_MESSAGE,
                    exfil=True,
                )
                if self._mediated(ev):
                    self._queue_message(
                        Message(sender=agent, channel=exfil_ch, facets=facets, label=ev.label, exfil=True)
                    )

    # -- per-tick schedule ----------------------------------------------------

    def _session_start(self) -> None:
        for agent in self.agent_order:
            for cid in self.carrier_sets[agent].all_ids:
                carrier = self.carriers[cid]
                if carrier.autoload is AutoloadPolicy.SESSION_START:
                    self._exposed_read(0, agent, carrier, carrier.label)

    def _inject(self, tick: int) -> None:
        injection = self.scenario.injection
        assert injection is not None
        facets = injection.facets
        self._record(
            Event(
                tick=tick,
                agent=ATTACKER,
                kind=EventKind.INJECT,
                channel=injection.channel,
                facets=facets,
                label=TaintLabel.TAINTED,
            )
        )
        self._queue_message(
            Message(
                sender=ATTACKER,
                channel=injection.channel,
                facets=facets,
                label=TaintLabel.TAINTED,
                from_inject=True,
            )
        )

    def _deliver(self, tick: int) -> None:
        to_deliver = {ch: msgs for ch, msgs in self.queued.items() if msgs}
        self.queued = {ch: [] for ch in self.scenario.channels}
        for ch in sorted(to_deliver):
            strength = self.scenario.strength_for(ch)
            for msg in to_deliver[ch]:
                delivered = msg.facets if msg.from_inject else transform_payload(msg.facets, strength)
                for agent in self.agent_order:
                    if agent == msg.sender:
                        continue
                    if ch in self.agents[agent].channels:
                        self._message_turn(tick, agent, msg, delivered)

    def _scheduled_maintenance(self, tick: int) -> None:
        for agent, when in self.scenario.resets:
            if when == tick:
                self._record(Event(tick=tick, agent=agent, kind=EventKind.CONTEXT_RESET))
                self.states[agent] = context_reset(self.states[agent])
        for agent, when in self.scenario.declassify_carrier_of:
            if when == tick:
                carrier = self.carriers[self.carrier_sets[agent].heartbeat_id]
                ev = Event(
                    tick=tick,
                    agent=agent,
                    kind=EventKind.DECLASSIFY,
                    carrier_id=carrier.id,
                    label=carrier.label,
                    procedure=DeclassProcedure.DETERMINISTIC_VALIDATION,
                )
                if self._mediated(ev):
                    declassify_carrier(carrier, Authorizer.RUNTIME, DeclassProcedure.DETERMINISTIC_VALIDATION)

    def step(self, tick: int) -> None:
        """Advance one tick: scheduled maintenance, delivery of last tick's
        queue, injection when due, then heartbeat turns in agent order."""
        injection = self.scenario.injection
        self._scheduled_maintenance(tick)
        self._deliver(tick)
        if injection is not None and injection.tick == tick:
            self._inject(tick)
        for agent in self.agent_order:
            if tick % self.agents[agent].heartbeat_period == 0:
                self._heartbeat_turn(tick, agent)

    def run(self) -> Trace:
        injection = self.scenario.injection
        self._session_start()
        if injection is not None and injection.tick == 0:
            self._inject(0)
        for tick in range(1, self.scenario.max_ticks + 1):
            self.step(tick)
        return self.trace

    def trace_meta(self) -> TraceMeta:
        agents = [
            AgentMeta(
                id=a,
                privilege=self.agents[a].privilege.value,
                period=self.agents[a].heartbeat_period,
                channels=list(self.agents[a].channels),
            )
            for a in self.agent_order
        ]
        carriers = [
            CarrierMeta(
                id=c.id,
                name=c.name,
                owner=c.owner,
                cls=c.cls.value,
                autoload=c.autoload.value,
                position=c.injection.value,
                scope=c.scope.value,
                label0=c.label.value,
            )
            for c in (self.carriers[cid] for cid in sorted(self.carriers))
        ]
        return TraceMeta(
            scenario=self.scenario.name,
            seed=self.scenario.seed,
            ticks=self.scenario.max_ticks,
            flags=self.config.flags(),
            guard=self.config.guard_mode.value,
            attacker=ATTACKER,
            agents=agents,
            carriers=carriers,
        )


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    trace: Trace
    trace_text: str
    report: "verifier_mod.Report"


def run_scenario(scenario: Scenario) -> RunResult:
    """Run to the tick budget, serialize, and verify. The report is computed
    from the serialized text, never from live simulator state, so everything
    in it is reproducible from the trace file alone."""
    eco = Ecosystem(scenario)
    # the initial-label snapshot must be taken before the run mutates labels
    meta = eco.trace_meta()
    trace = eco.run()
    text = render_trace(trace, meta)
    report = verifier_mod.build_report(text)
    return RunResult(trace=trace, trace_text=text, report=report)
