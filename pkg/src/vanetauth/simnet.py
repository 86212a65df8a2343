"""Deterministic discrete-event network hosting TA, RSU and OBU roles.

One virtual millisecond clock drives everything.  RSU<->TA links are the
secure channel and are invisible to the adversary; OBU<->RSU and OBU<->OBU
traffic is wireless, recorded in the transcript, subject to seeded drops,
and open to replay, tampering and injection.
"""

from __future__ import annotations

import difflib
import hashlib
import heapq
import itertools
import json
import random
import statistics
from collections import Counter
from dataclasses import dataclass, field

from . import errors
from .baseline import (
    BaselineAuthRequest,
    BaselineAuthResponse,
    BaselineForward,
    BaselinePending,
    BaselineTA,
    baseline_obu_complete,
    baseline_obu_request,
    baseline_rsu_forward,
    baseline_setup,
)
from .primitives import keypair_generate
from .proposed import (
    AuthRequest,
    Notification,
    OnBoardUnit,
    PeerStatus,
    RoadSideUnit,
    RsuAuthResponse,
    SmartCard,
    TaAuthResponse,
    TrafficMessage,
    TrustedAuthority,
    envelope,
    open_envelope,
)
from .wire import (
    TAG_AUTH_REQUEST,
    TAG_BASELINE_FORWARD,
    TAG_BASELINE_REQUEST,
    TAG_BASELINE_RESPONSE,
    TAG_NOTIFICATION,
    TAG_RSU_AUTH_RESPONSE,
    TAG_SECURE_ENVELOPE,
    TAG_TRAFFIC_MESSAGE,
    frame_type,
)

WIRELESS = "wireless"
SECURE = "secure"


@dataclass
class SimConfig:
    seed: int = 0
    wireless_latency_ms: tuple[int, int] = (2, 10)
    wireless_drop_rate: float = 0.0
    secure_latency_ms: tuple[int, int] = (1, 5)
    freshness_window_ms: int = 500
    notification_period_ms: int = 300
    auth_ttl_ms: int = 600_000
    retry_limit: int = 3
    retry_timeout_ms: int | None = None
    fp_target: float = 0.01
    modulus_bits: int = 32

    def __post_init__(self):
        self.wireless_latency_ms = tuple(int(v) for v in self.wireless_latency_ms)
        self.secure_latency_ms = tuple(int(v) for v in self.secure_latency_ms)
        for name in ("wireless_latency_ms", "secure_latency_ms"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise ValueError(f"{name} must be a non-negative (lo, hi) range")
        if not 0.0 <= self.wireless_drop_rate <= 1.0:
            raise ValueError("wireless_drop_rate must lie in [0, 1]")
        if self.freshness_window_ms < 0 or self.notification_period_ms < 0:
            raise ValueError("durations must be non-negative")
        if self.retry_limit < 1:
            raise ValueError("retry_limit must be >= 1")

    @property
    def retry_timeout(self) -> int:
        if self.retry_timeout_ms is not None:
            return self.retry_timeout_ms
        # full OBU -> RSU -> TA -> RSU -> OBU round trip at worst-case latency
        return 2 * (self.wireless_latency_ms[1] + self.secure_latency_ms[1])


@dataclass(order=True)
class SimEvent:
    at: int
    seq: int
    kind: str = field(compare=False)  # deliver | timer | command | adversary
    src: str = field(compare=False, default="")
    dst: str = field(compare=False, default="")
    payload: bytes = field(compare=False, default=b"")
    channel: str = field(compare=False, default="")
    args: dict = field(compare=False, default_factory=dict)


@dataclass(frozen=True)
class Frame:
    time: int
    channel: str
    src: str
    dst: str
    raw: bytes

    @property
    def type(self) -> str:
        return frame_type(self.raw)

    def to_json(self) -> dict:
        return {"time": self.time, "channel": self.channel, "src": self.src,
                "dst": self.dst, "type": self.type, "raw": self.raw.hex()}


class Transcript(list):
    """Frames observed on insecure channels, in transmission order."""

    def to_jsonl(self) -> str:
        return "".join(json.dumps(f.to_json(), sort_keys=True) + "\n" for f in self)

    def select(self, src=None, dst=None, type=None) -> list[int]:
        return [i for i, f in enumerate(self)
                if (src is None or f.src == src) and (dst is None or f.dst == dst)
                and (type is None or f.type == type)]


@dataclass(frozen=True)
class ErrorRecord:
    time: int
    entity: str
    label: str
    detail: str

    def to_json(self) -> dict:
        return {"time": self.time, "entity": self.entity, "error": self.label, "detail": self.detail}


@dataclass
class SimStats:
    deliveries: int = 0
    drops: int = 0
    auth_success: Counter = field(default_factory=Counter)
    auth_failure: Counter = field(default_factory=Counter)
    messages_validated: Counter = field(default_factory=Counter)
    messages_rejected: Counter = field(default_factory=Counter)
    peer_valid: Counter = field(default_factory=Counter)
    notifications: Counter = field(default_factory=Counter)

    def copy(self) -> SimStats:
        return SimStats(self.deliveries, self.drops,
                        *(Counter(getattr(self, f)) for f in (
                            "auth_success", "auth_failure", "messages_validated",
                            "messages_rejected", "peer_valid", "notifications")))

    def to_json(self) -> dict:
        out = {"deliveries": self.deliveries, "drops": self.drops}
        for name in ("auth_success", "auth_failure", "messages_validated",
                     "messages_rejected", "peer_valid", "notifications"):
            out[name] = dict(sorted(getattr(self, name).items()))
        return out


@dataclass
class _TaNode:
    name: str
    ta: TrustedAuthority
    baseline: BaselineTA | None = None
    baseline_keys: dict = field(default_factory=dict)


@dataclass
class _RsuNode:
    name: str
    rsu: RoadSideUnit
    routes: dict = field(default_factory=dict)
    obus: list = field(default_factory=list)


@dataclass
class _ObuNode:
    name: str
    rsu: str
    scheme: str
    card: SmartCard | None = None
    obu: OnBoardUnit | None = None
    bcard: object = None
    bpending: BaselinePending | None = None
    attempts: int = 0
    epoch: int = 0
    awaiting: bool = False
    session_keys: list = field(default_factory=list)
    inbox: list = field(default_factory=list)
    verified: list = field(default_factory=list)


class Simulator:
    def __init__(self, config: SimConfig | None = None):
        self.config = config or SimConfig()
        self.now = 0
        self._queue: list[SimEvent] = []
        self._seq = itertools.count()
        self._net_rng = random.Random(self.config.seed)
        self.nodes: dict = {}
        self.ta_name: str | None = None
        self.transcript = Transcript()
        self.trace: list[tuple] = []
        self.errors: list[ErrorRecord] = []
        self.stats = SimStats()
        self.rsu_pubkeys: dict[bytes, bytes] = {}

    def rng(self, purpose: str) -> random.Random:
        """Independent seeded stream per purpose so streams never interleave."""
        return random.Random(f"{self.config.seed}/{purpose}")

    # -- construction ---------------------------------------------------------

    def _claim(self, name: str) -> None:
        if name in self.nodes:
            raise ValueError(f"entity {name!r} already exists")

    def add_ta(self, name: str = "ta", master_secret: bytes | None = None,
               baseline: tuple | None = None) -> str:
        if self.ta_name is not None:
            raise errors.DuplicateTa(f"simulation already has TA {self.ta_name!r}")
        self._claim(name)
        rng = self.rng("ta")
        ta = TrustedAuthority(master_secret or rng.randbytes(32), self.config.freshness_window_ms, rng)
        node = _TaNode(name, ta)
        if baseline is not None:
            node.baseline = BaselineTA(*baseline, self.config.freshness_window_ms, self.rng("baseline-ta"))
        self.nodes[name] = node
        self.ta_name = name
        return name

    @property
    def ta(self) -> TrustedAuthority:
        return self._ta_node().ta

    def _ta_node(self) -> _TaNode:
        if self.ta_name is None:
            raise ValueError("simulation has no TA")
        return self.nodes[self.ta_name]

    def baseline_ta(self) -> BaselineTA:
        node = self._ta_node()
        if node.baseline is None:
            params, secrets = baseline_setup(self.config.modulus_bits, self.rng("baseline-setup"))
            node.baseline = BaselineTA(params, secrets, self.config.freshness_window_ms,
                                       self.rng("baseline-ta"))
        return node.baseline

    def add_rsu(self, name: str, keypair=None) -> str:
        self._claim(name)
        keypair = keypair or keypair_generate(self.rng(f"rsu-key/{name}"))
        rsu = RoadSideUnit(name.encode(), keypair, self.config.freshness_window_ms,
                           self.config.auth_ttl_ms)
        self.nodes[name] = _RsuNode(name, rsu)
        self.rsu_pubkeys[rsu.rsu_id] = keypair.public
        # RSU keys are provisioned out of band to every vehicle
        for n in self.nodes.values():
            if isinstance(n, _ObuNode) and n.obu is not None:
                n.obu.known_rsu_pubkeys[rsu.rsu_id] = keypair.public
        if self.config.notification_period_ms > 0:
            self._push(self.now + self.config.notification_period_ms, "timer", dst=name,
                       args={"timer": "notify"})
        return name

    def add_obu(self, name: str, id: bytes, pw: bytes, rsu: str, scheme: str = "proposed") -> str:
        self._claim(name)
        if not isinstance(self.nodes.get(rsu), _RsuNode):
            raise ValueError(f"unknown RSU {rsu!r}")
        node = _ObuNode(name, rsu, scheme)
        if scheme == "proposed":
            card, prov = self.ta.register(id, pw)
            node.card = card
            node.obu = OnBoardUnit.provision(prov, self.rsu_pubkeys)
        elif scheme == "baseline":
            node.bcard = self.baseline_ta().register(id)
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        self.nodes[name] = node
        self.nodes[rsu].obus.append(name)
        return name

    def entities(self) -> list[str]:
        return list(self.nodes)

    def links(self) -> list[tuple[str, str, str]]:
        out = []
        rsus = [n for n in self.nodes.values() if isinstance(n, _RsuNode)]
        if self.ta_name is not None:
            out += [(r.name, self.ta_name, SECURE) for r in rsus]
        for r in rsus:
            out += [(o, r.name, WIRELESS) for o in r.obus]
            out += [(a, b, WIRELESS) for a, b in itertools.combinations(r.obus, 2)]
        return out

    def channel(self, src: str, dst: str) -> str:
        kinds = {type(self.nodes[src]), type(self.nodes[dst])}
        if kinds == {_RsuNode, _TaNode}:
            return SECURE
        if _TaNode in kinds:
            raise errors.SecureChannelViolation(f"no wireless path to the TA ({src} -> {dst})")
        return WIRELESS

    # -- scheduling -----------------------------------------------------------

    def _push(self, at: int, kind: str, **kw) -> None:
        if at < self.now:
            raise ValueError(f"cannot schedule at {at}, clock is already {self.now}")
        heapq.heappush(self._queue, SimEvent(at, next(self._seq), kind, **kw))

    def schedule(self, at: int, action: str, **args) -> None:
        self._push(at, "command", args={"action": action, **args})

    def run_until(self, t: int) -> SimStats:
        if t < self.now:
            raise ValueError(f"run_until({t}) is before the current time {self.now}")
        while self._queue and self._queue[0].at <= t:
            self._execute(heapq.heappop(self._queue))
        self.now = t
        return self.stats.copy()

    def _execute(self, ev: SimEvent) -> None:
        self.now = ev.at
        self.trace.append((ev.at, ev.seq, ev.kind, ev.src, ev.dst, ev.channel,
                           ev.payload.hex(), json.dumps(ev.args, sort_keys=True, default=str)))
        getattr(self, f"_do_{ev.kind}")(ev)

    def step(self, deadline: int) -> bool:
        """Execute the next event if it is due by ``deadline``."""
        if not self._queue or self._queue[0].at > deadline:
            return False
        ev = heapq.heappop(self._queue)
        self._execute(ev)
        return True

    def run_for(self, dt: int) -> SimStats:
        return self.run_until(self.now + dt)

    def trace_digest(self) -> str:
        return hashlib.sha256(repr(self.trace).encode()).hexdigest()

    def _transmit(self, src: str, dst: str, raw: bytes) -> None:
        ch = self.channel(src, dst)
        lo, hi = self.config.secure_latency_ms if ch == SECURE else self.config.wireless_latency_ms
        if ch == WIRELESS:
            self.transcript.append(Frame(self.now, ch, src, dst, raw))
            if self._net_rng.random() < self.config.wireless_drop_rate:
                self.stats.drops += 1
                return
        self._push(self.now + self._net_rng.randint(lo, hi), "deliver",
                   src=src, dst=dst, payload=raw, channel=ch)

    def _log(self, entity: str, exc: Exception) -> None:
        label = exc.label if isinstance(exc, errors.VanetError) else type(exc).__name__
        self.errors.append(ErrorRecord(self.now, entity, label, str(exc)))

    def errors_for(self, entity: str) -> list[str]:
        return [e.label for e in self.errors if e.entity == entity]

    # -- adversary ------------------------------------------------------------

    def adversary_capture(self) -> Transcript:
        return Transcript(self.transcript)

    def _frame(self, index: int) -> Frame:
        if not 0 <= index < len(self.transcript):
            raise errors.IndexOutOfRange(f"transcript index {index} outside 0..{len(self.transcript) - 1}")
        return self.transcript[index]

    def adversary_replay(self, index: int, at: int, dst: str | None = None) -> None:
        f = self._frame(index)
        self.adversary_inject(f.raw, dst or f.dst, at)

    def adversary_tamper(self, index: int, offset: int, new_byte: int, at: int,
                         dst: str | None = None) -> None:
        f = self._frame(index)
        if not 0 <= offset < len(f.raw):
            raise errors.IndexOutOfRange(f"byte offset {offset} outside frame of {len(f.raw)} bytes")
        raw = bytearray(f.raw)
        raw[offset] = new_byte & 0xFF
        self.adversary_inject(bytes(raw), dst or f.dst, at)

    def adversary_inject(self, raw: bytes, dst: str, at: int) -> None:
        if dst not in self.nodes:
            raise ValueError(f"unknown entity {dst!r}")
        if isinstance(self.nodes[dst], _TaNode):
            raise errors.SecureChannelViolation("the RSU<->TA channel is not reachable by the adversary")
        self._push(at, "adversary", src="adversary", dst=dst, payload=bytes(raw), channel=WIRELESS)

    # -- event handlers -------------------------------------------------------

    def _do_adversary(self, ev: SimEvent) -> None:
        self.transcript.append(Frame(self.now, WIRELESS, ev.src, ev.dst, ev.payload))
        self._do_deliver(ev)

    def _do_deliver(self, ev: SimEvent) -> None:
        self.stats.deliveries += 1
        node = self.nodes[ev.dst]
        try:
            if isinstance(node, _TaNode):
                self._ta_receive(node, ev)
            elif isinstance(node, _RsuNode):
                self._rsu_receive(node, ev)
            else:
                self._obu_receive(node, ev)
        except errors.ProtocolError as exc:
            self._log(ev.dst, exc)

    def _do_timer(self, ev: SimEvent) -> None:
        node = self.nodes[ev.dst]
        if ev.args["timer"] == "notify":
            if node.rsu.pending_notification_count:
                self._emit_notification(node)
            self._push(self.now + self.config.notification_period_ms, "timer", dst=ev.dst,
                       args={"timer": "notify"})
        elif ev.args["timer"] == "auth_retry":
            if not node.awaiting or node.epoch != ev.args["epoch"]:
                return
            if node.attempts >= self.config.retry_limit:
                node.awaiting = False
                if node.obu is not None:
                    node.obu.pending = None
                self.stats.auth_failure[node.name] += 1
                self._log(node.name, errors.AuthTimeout(f"{node.attempts} attempts"))
                return
            self._send_auth(node)

    def _do_command(self, ev: SimEvent) -> None:
        args = dict(ev.args)
        action = args.pop("action")
        try:
            getattr(self, f"_cmd_{action}")(**args)
        except errors.ProtocolError as exc:
            self._log(args.get("obu") or args.get("rsu") or self.ta_name, exc)

    # -- commands -------------------------------------------------------------

    def _cmd_login(self, obu: str, pw: bytes) -> None:
        node = self.nodes[obu]
        if node.obu is not None:
            node.obu.login(node.card, pw)

    def _cmd_authenticate(self, obu: str) -> None:
        node = self.nodes[obu]
        node.attempts = 0
        node.awaiting = True
        self._send_auth(node)

    def _send_auth(self, node: _ObuNode) -> None:
        node.attempts += 1
        node.epoch += 1
        if node.scheme == "proposed":
            raw = node.obu.auth_request(self.now).to_bytes()
        else:
            req, node.bpending = baseline_obu_request(node.bcard, self.rng(f"alpha/{node.name}/{node.epoch}"),
                                                      self.now)
            raw = req.to_bytes(node.bcard.params)
        self._push(self.now + self.config.retry_timeout, "timer", dst=node.name,
                   args={"timer": "auth_retry", "epoch": node.epoch})
        self._transmit(node.name, node.rsu, raw)

    def _cmd_send_message(self, obu: str, m: bytes) -> None:
        node = self.nodes[obu]
        if node.obu is None:
            raise errors.NoSession("baseline vehicles have no data phase")
        raw = node.obu.sign_message(m, self.now).to_bytes()
        self._transmit(obu, node.rsu, raw)
        for peer in self.nodes[node.rsu].obus:
            if peer != obu:
                self._transmit(obu, peer, raw)

    def _cmd_revoke(self, id: bytes) -> None:
        self.ta.revoke(id)

    def _cmd_emit_notification(self, rsu: str) -> None:
        self._emit_notification(self.nodes[rsu])

    def _emit_notification(self, node: _RsuNode) -> None:
        note = node.rsu.emit_notification(self.now, self.config.fp_target)
        self.stats.notifications[node.name] += 1
        raw = note.to_bytes()
        for obu in node.obus:
            self._transmit(node.name, obu, raw)

    # -- role receive paths ---------------------------------------------------

    def _ta_receive(self, node: _TaNode, ev: SimEvent) -> None:
        tag = ev.payload[:1]
        try:
            if tag == bytes([TAG_SECURE_ENVELOPE]):
                rsu_id, inner = open_envelope(ev.payload)
                resp = node.ta.handle_auth(AuthRequest.from_bytes(inner), self.now)
                self._transmit(node.name, ev.src, envelope(rsu_id, resp.to_bytes()))
            elif tag == bytes([TAG_BASELINE_FORWARD]):
                fwd = BaselineForward.from_bytes(ev.payload)
                resp, k_s = self.baseline_ta().handle(fwd, self.now)
                node.baseline_keys[resp.aid] = k_s
                self._transmit(node.name, ev.src, resp.to_bytes(self.baseline_ta().params))
            else:
                raise errors.UnexpectedMessage(frame_type(ev.payload))
        except errors.ProtocolError:
            self.stats.auth_failure[node.name] += 1
            raise

    def _rsu_receive(self, node: _RsuNode, ev: SimEvent) -> None:
        raw, tag = ev.payload, ev.payload[:1]
        if ev.channel == SECURE:
            if tag == bytes([TAG_SECURE_ENVELOPE]):
                _, inner = open_envelope(raw)
                resp = TaAuthResponse.from_bytes(inner)
                out = node.rsu.handle_ta_response(resp, self.now)
                dst = node.routes.get(resp.aid)
                if dst is not None:
                    self._transmit(node.name, dst, out.to_bytes())
            elif tag == bytes([TAG_BASELINE_RESPONSE]):
                resp = BaselineAuthResponse.from_bytes(raw)
                dst = node.routes.get(resp.aid)
                if dst is not None:
                    self._transmit(node.name, dst, raw)
            else:
                raise errors.UnexpectedMessage(frame_type(raw))
            return
        if tag == bytes([TAG_AUTH_REQUEST]):
            req = AuthRequest.from_bytes(raw)
            if ev.src in self.nodes:
                node.routes[req.aid] = ev.src
            self._transmit(node.name, self.ta_name, envelope(node.rsu.rsu_id, raw))
        elif tag == bytes([TAG_BASELINE_REQUEST]):
            req = BaselineAuthRequest.from_bytes(raw)
            fwd = baseline_rsu_forward(req, node.rsu.rsu_id, self.now, self.config.freshness_window_ms)
            if ev.src in self.nodes:
                node.routes[req.aid] = ev.src
            self._transmit(node.name, self.ta_name, fwd.to_bytes(self.baseline_ta().params))
        elif tag == bytes([TAG_TRAFFIC_MESSAGE]):
            try:
                node.rsu.verify_message(TrafficMessage.from_bytes(raw), self.now)
            except errors.ProtocolError:
                self.stats.messages_rejected[node.name] += 1
                raise
            self.stats.messages_validated[node.name] += 1
        else:
            raise errors.UnexpectedMessage(f"{frame_type(raw)} on the wireless channel")

    def _obu_receive(self, node: _ObuNode, ev: SimEvent) -> None:
        raw, tag = ev.payload, ev.payload[:1]
        if tag == bytes([TAG_RSU_AUTH_RESPONSE]) and node.obu is not None:
            try:
                k_s = node.obu.complete_auth(RsuAuthResponse.from_bytes(raw))
            except errors.ProtocolError:
                self.stats.auth_failure[node.name] += 1
                raise
            self._auth_done(node, k_s)
        elif tag == bytes([TAG_BASELINE_RESPONSE]) and node.bcard is not None:
            try:
                k_s = baseline_obu_complete(node.bcard, node.bpending if node.awaiting else None,
                                            BaselineAuthResponse.from_bytes(raw))
            except errors.ProtocolError:
                self.stats.auth_failure[node.name] += 1
                raise
            node.bpending = None
            self._auth_done(node, k_s)
        elif tag == bytes([TAG_TRAFFIC_MESSAGE]) and node.obu is not None:
            node.inbox.append(TrafficMessage.from_bytes(raw))
        elif tag == bytes([TAG_NOTIFICATION]) and node.obu is not None:
            note = Notification.from_bytes(raw)
            waiting = []
            for i, tm in enumerate(node.inbox):
                try:
                    status = node.obu.verify_peer_message(tm, note)
                except errors.ProtocolError:
                    node.inbox = node.inbox[i:] + waiting
                    raise
                if status is PeerStatus.VALID:
                    node.verified.append(tm)
                    self.stats.peer_valid[node.name] += 1
                else:
                    waiting.append(tm)
            node.inbox = waiting
        elif node.bcard is not None and tag in (bytes([TAG_TRAFFIC_MESSAGE]), bytes([TAG_NOTIFICATION])):
            return
        else:
            raise errors.UnexpectedMessage(frame_type(raw))

    def _auth_done(self, node: _ObuNode, k_s: bytes) -> None:
        node.awaiting = False
        node.session_keys.append(k_s)
        self.stats.auth_success[node.name] += 1

    # -- inspection -----------------------------------------------------------

    def obu(self, name: str) -> OnBoardUnit:
        return self.nodes[name].obu

    def obu_node(self, name: str) -> _ObuNode:
        return self.nodes[name]

    def rsu(self, name: str) -> RoadSideUnit:
        return self.nodes[name].rsu

    def persisted_lists(self) -> dict[str, list[dict]]:
        out = {"registration.jsonl": self.ta.dump_records() if self.ta_name else []}
        for n in self.nodes.values():
            if isinstance(n, _RsuNode):
                out[f"auth_list.{n.name}.jsonl"] = n.rsu.dump_auth_list()
                out[f"message_log.{n.name}.jsonl"] = n.rsu.dump_message_log()
        return out


def sim_new(config: SimConfig | None = None) -> Simulator:
    return Simulator(config)


# -- linkability ------------------------------------------------------------

@dataclass
class LinkabilityReport:
    sessions_per_obu: int
    sessions: dict[str, list[dict]]
    field_equalities: list[dict]
    cross_session_matrix: dict[str, dict[tuple[int, int], list[str]]]
    lcs_same_obu: dict
    lcs_cross_obu: dict

    @property
    def repeated_values(self) -> int:
        return len(self.field_equalities)

    def to_json(self) -> dict:
        return {
            "sessions_per_obu": self.sessions_per_obu,
            "session_counts": {k: len(v) for k, v in self.sessions.items()},
            "field_equalities": self.field_equalities,
            "cross_session_matrix": {
                obu: [{"i": i, "j": j, "equal_fields": f} for (i, j), f in sorted(m.items())]
                for obu, m in self.cross_session_matrix.items()
            },
            "lcs_same_obu": self.lcs_same_obu,
            "lcs_cross_obu": self.lcs_cross_obu,
        }


_PROBE_FIELDS = ("aid", "uac", "sigma")


def _lcs(a: bytes, b: bytes) -> int:
    return difflib.SequenceMatcher(None, a, b, autojunk=False).find_longest_match(
        0, len(a), 0, len(b)).size


def _summary(values: list[int]) -> dict:
    if not values:
        return {"pairs": 0}
    return {"pairs": len(values), "min": min(values), "max": max(values),
            "mean": round(statistics.fmean(values), 3), "median": statistics.median(values)}


def linkability_probe(sim: Simulator, obu_a: str, obu_b: str, sessions_per_obu: int,
                      payload: bytes = b"traffic: road clear", max_pairs: int = 200) -> LinkabilityReport:
    """Drive both OBUs through authentication + message rounds and compare transcripts.

    Each session's observable bytes are the OBU's AuthRequest, the RSU's
    response to it, and the OBU's TrafficMessage.  Longest-common-substring
    statistics are computed on a seeded sample of at most ``max_pairs``
    pairs per group.
    """
    cfg = sim.config
    settle = cfg.retry_timeout * cfg.retry_limit + 1
    msg_settle = cfg.wireless_latency_ms[1] + 1
    sessions: dict[str, list[dict]] = {obu_a: [], obu_b: []}
    for _ in range(sessions_per_obu):
        for name in (obu_a, obu_b):
            start = len(sim.transcript)
            sim.schedule(sim.now + 1, "authenticate", obu=name)
            sim.run_until(sim.now + 1 + settle)
            sim.schedule(sim.now + 1, "send_message", obu=name, m=payload)
            sim.run_until(sim.now + 1 + msg_settle)
            rec = {"aid": None, "uac": None, "sigma": None, "raw": b""}
            for f in sim.transcript[start:]:
                if f.src == name and f.type == "AuthRequest":
                    req = AuthRequest.from_bytes(f.raw)
                    rec["aid"], rec["uac"] = req.aid.hex(), req.uac.hex()
                    rec["raw"] += f.raw
                elif f.dst == name and f.type == "RsuAuthResponse":
                    rec["raw"] += f.raw
                elif f.src == name and f.type == "TrafficMessage" and rec["sigma"] is None:
                    # the same frame goes to the RSU and every peer; count it once
                    rec["sigma"] = TrafficMessage.from_bytes(f.raw).sigma.hex()
                    rec["raw"] += f.raw
            sessions[name].append(rec)

    seen: dict[tuple[str, str], list[tuple[str, int]]] = {}
    for obu, recs in sessions.items():
        for i, rec in enumerate(recs):
            for fld in _PROBE_FIELDS:
                if rec[fld] is not None:
                    seen.setdefault((fld, rec[fld]), []).append((obu, i))
    equalities = [{"field": fld, "value": val, "sessions": where}
                  for (fld, val), where in seen.items() if len(where) > 1]

    matrix: dict[str, dict[tuple[int, int], list[str]]] = {}
    for obu, recs in sessions.items():
        matrix[obu] = {}
        for i, j in itertools.combinations(range(len(recs)), 2):
            matrix[obu][(i, j)] = [f for f in _PROBE_FIELDS
                                   if recs[i][f] is not None and recs[i][f] == recs[j][f]]

    rng = sim.rng("linkability")
    same = [(sessions[o][i]["raw"], sessions[o][j]["raw"])
            for o in (obu_a, obu_b) for i, j in itertools.combinations(range(len(sessions[o])), 2)]
    cross = [(a["raw"], b["raw"]) for a in sessions[obu_a] for b in sessions[obu_b]]
    if len(same) > max_pairs:
        same = rng.sample(same, max_pairs)
    if len(cross) > max_pairs:
        cross = rng.sample(cross, max_pairs)
    return LinkabilityReport(
        sessions_per_obu, {k: [{f: r[f] for f in _PROBE_FIELDS} for r in v] for k, v in sessions.items()},
        equalities, matrix,
        _summary([_lcs(a, b) for a, b in same]), _summary([_lcs(a, b) for a, b in cross]),
    )
