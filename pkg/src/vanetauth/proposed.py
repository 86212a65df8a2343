"""Registration-list ASC scheme: TA, RSU and OBU role state machines.

Hash-chain pseudonyms ``AID_i = h(k_r, i)`` authenticate an OBU to the TA
through an RSU; the TA hands back a session key encrypted under ``k_r``.
Data messages carry ``sigma = h(T2, m, K_s)`` and are validated by the RSU
against its authentication list, then advertised to peers in a signed
bloom-filter notification.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field

from . import errors
from .primitives import (
    DIGEST_LEN,
    KEY_LEN,
    BloomFilter,
    Ciphertext,
    OpCounter,
    SignatureKeyPair,
    bloom_sized,
    default_rng,
    h,
    is_fresh,
    sign,
    sym_decrypt,
    sym_encrypt,
    ts_bytes,
    u64,
    verify,
    xor_bytes,
)
from .wire import (
    TAG_AUTH_REQUEST,
    TAG_NOTIFICATION,
    TAG_RSU_AUTH_RESPONSE,
    TAG_SECURE_ENVELOPE,
    TAG_TA_AUTH_RESPONSE,
    TAG_TRAFFIC_MESSAGE,
    Reader,
    Writer,
)

DEFAULT_WINDOW_MS = 60_000
DEFAULT_AUTH_TTL_MS = 600_000


# -- wire messages ---------------------------------------------------------

@dataclass(frozen=True)
class AuthRequest:
    aid: bytes
    t: int
    uac: bytes

    def to_bytes(self) -> bytes:
        return Writer(TAG_AUTH_REQUEST).raw(self.aid).u64(self.t).raw(self.uac).done()

    @classmethod
    def from_bytes(cls, data: bytes) -> AuthRequest:
        r = Reader(data, TAG_AUTH_REQUEST)
        msg = cls(r.take(DIGEST_LEN), r.u64(), r.take(DIGEST_LEN))
        r.finish()
        return msg


@dataclass(frozen=True)
class TaAuthResponse:
    """TA -> RSU over the secure channel; carries plaintext K_s and ID_r."""

    aid: bytes
    k_s: bytes
    k_s_enc: Ciphertext
    a_i: bytes
    id: bytes

    def to_bytes(self) -> bytes:
        return (Writer(TAG_TA_AUTH_RESPONSE).raw(self.aid).raw(self.k_s)
                .var(self.k_s_enc.to_bytes()).raw(self.a_i).var(self.id).done())

    @classmethod
    def from_bytes(cls, data: bytes) -> TaAuthResponse:
        r = Reader(data, TAG_TA_AUTH_RESPONSE)
        msg = cls(r.take(DIGEST_LEN), r.take(KEY_LEN), Ciphertext.from_bytes(r.var()),
                  r.take(DIGEST_LEN), r.var())
        r.finish()
        return msg

    def for_obu(self) -> RsuAuthResponse:
        return RsuAuthResponse(self.aid, self.k_s_enc, self.a_i)


@dataclass(frozen=True)
class RsuAuthResponse:
    aid: bytes
    k_s_enc: Ciphertext
    a_i: bytes

    def to_bytes(self) -> bytes:
        return (Writer(TAG_RSU_AUTH_RESPONSE).raw(self.aid)
                .var(self.k_s_enc.to_bytes()).raw(self.a_i).done())

    @classmethod
    def from_bytes(cls, data: bytes) -> RsuAuthResponse:
        r = Reader(data, TAG_RSU_AUTH_RESPONSE)
        msg = cls(r.take(DIGEST_LEN), Ciphertext.from_bytes(r.var()), r.take(DIGEST_LEN))
        r.finish()
        return msg


@dataclass(frozen=True)
class TrafficMessage:
    t2: int
    m: bytes
    sigma: bytes

    def to_bytes(self) -> bytes:
        return Writer(TAG_TRAFFIC_MESSAGE).u64(self.t2).var(self.m).raw(self.sigma).done()

    @classmethod
    def from_bytes(cls, data: bytes) -> TrafficMessage:
        r = Reader(data, TAG_TRAFFIC_MESSAGE)
        msg = cls(r.u64(), r.var(), r.take(DIGEST_LEN))
        r.finish()
        return msg


@dataclass(frozen=True)
class Notification:
    rsu_id: bytes
    issued_at: int
    filter: BloomFilter
    signature: bytes

    @staticmethod
    def signed_payload(rsu_id: bytes, issued_at: int, filter_bytes: bytes) -> bytes:
        return Writer().var(rsu_id).u64(issued_at).var(filter_bytes).done()

    def to_bytes(self) -> bytes:
        return (Writer(TAG_NOTIFICATION).var(self.rsu_id).u64(self.issued_at)
                .var(self.filter.to_bytes()).var(self.signature).done())

    @classmethod
    def from_bytes(cls, data: bytes) -> Notification:
        r = Reader(data, TAG_NOTIFICATION)
        msg = cls(r.var(), r.u64(), BloomFilter.from_bytes(r.var()), r.var())
        r.finish()
        return msg


def envelope(rsu_id: bytes, inner: bytes) -> bytes:
    """RSU <-> TA secure-channel frame."""
    return Writer(TAG_SECURE_ENVELOPE).var(rsu_id).var(inner).done()


def open_envelope(data: bytes) -> tuple[bytes, bytes]:
    r = Reader(data, TAG_SECURE_ENVELOPE)
    rsu_id, inner = r.var(), r.var()
    r.finish()
    return rsu_id, inner


def message_digest(t2: int, m: bytes, ops: OpCounter | None = None) -> bytes:
    """Notification filter key for a validated message."""
    return h(ts_bytes(t2), m, ops=ops)


# -- state records ---------------------------------------------------------

@dataclass
class RegistrationRecord:
    id: bytes
    expected_aid: bytes
    counter: int = 1
    prev_aid: bytes | None = None
    revoked: bool = False
    # timestamp of the last accepted request; guards the prev_aid lookback against replay
    last_t: int | None = None

    def to_json(self) -> dict:
        return {
            "id": self.id.hex(),
            "expected_aid": self.expected_aid.hex(),
            "prev_aid": self.prev_aid.hex() if self.prev_aid else None,
            "counter": self.counter,
            "revoked": self.revoked,
            "last_t": self.last_t,
        }

    @classmethod
    def from_json(cls, d: dict) -> RegistrationRecord:
        return cls(
            id=bytes.fromhex(d["id"]),
            expected_aid=bytes.fromhex(d["expected_aid"]),
            counter=int(d["counter"]),
            prev_aid=bytes.fromhex(d["prev_aid"]) if d.get("prev_aid") else None,
            revoked=bool(d["revoked"]),
            last_t=d.get("last_t"),
        )


@dataclass
class SmartCard:
    id: bytes
    pw: bytes


@dataclass(frozen=True)
class ObuProvision:
    id: bytes
    k_r: bytes
    z_r: bytes

    def to_json(self) -> dict:
        return {"id": self.id.hex(), "k_r": self.k_r.hex(), "z_r": self.z_r.hex()}


@dataclass
class AuthListEntry:
    id: bytes
    aid: bytes
    k_s: bytes
    expires_at: int

    def to_json(self) -> dict:
        return {"id": self.id.hex(), "aid": self.aid.hex(), "k_s": self.k_s.hex(),
                "expires_at": self.expires_at}

    @classmethod
    def from_json(cls, d: dict) -> AuthListEntry:
        return cls(bytes.fromhex(d["id"]), bytes.fromhex(d["aid"]),
                   bytes.fromhex(d["k_s"]), int(d["expires_at"]))


@dataclass
class MessageLogEntry:
    t2: int
    m: bytes
    id: bytes

    def to_json(self) -> dict:
        return {"t2": self.t2, "m": self.m.hex(), "id": self.id.hex()}

    @classmethod
    def from_json(cls, d: dict) -> MessageLogEntry:
        return cls(int(d["t2"]), bytes.fromhex(d["m"]), bytes.fromhex(d["id"]))


class PeerStatus(enum.Enum):
    VALID = "Valid"
    UNKNOWN = "Unknown"


# -- trusted authority -----------------------------------------------------

class TrustedAuthority:
    def __init__(self, master_secret: bytes, freshness_window_ms: int = DEFAULT_WINDOW_MS,
                 rng: random.Random | None = None):
        if len(master_secret) != 32:
            raise ValueError("master secret must be 32 bytes")
        self._s = master_secret
        self.window = freshness_window_ms
        self.rng = rng or default_rng()
        self.ops = OpCounter()
        self.records: dict[bytes, RegistrationRecord] = {}
        self._by_aid: dict[bytes, bytes] = {}

    def __repr__(self) -> str:
        return f"TrustedAuthority(records={len(self.records)})"

    def long_term_key(self, id: bytes, ops: OpCounter | None = None) -> bytes:
        return h(id, self._s, ops=ops)

    def register(self, id: bytes, pw: bytes) -> tuple[SmartCard, ObuProvision]:
        rec = self.records.get(id)
        if rec is not None:
            if rec.revoked:
                raise errors.RevokedIdentity(id.hex())
            raise errors.DuplicateIdentity(id.hex())
        k_r = self.long_term_key(id, self.ops)
        z_r = xor_bytes(k_r, h(pw, ops=self.ops), self.ops)
        rec = RegistrationRecord(id, h(k_r, u64(1), ops=self.ops))
        self._insert(rec)
        return SmartCard(id, pw), ObuProvision(id, k_r, z_r)

    def handle_auth(self, req: AuthRequest, now: int) -> TaAuthResponse:
        if not is_fresh(req.t, now, self.window):
            raise errors.StaleTimestamp(f"t={req.t} now={now}")
        id = self._by_aid.get(req.aid)
        if id is None:
            raise errors.UnknownPseudonym(req.aid.hex()[:16])
        rec = self.records[id]
        if rec.revoked:
            raise errors.Revoked(req.aid.hex()[:16])
        k_r = self.long_term_key(rec.id, self.ops)
        uac = h(k_r, req.aid, ts_bytes(req.t), ops=self.ops)
        if uac != req.uac:
            raise errors.BadAuthenticator("UAC mismatch")
        if rec.last_t is not None and req.t <= rec.last_t:
            raise errors.BadAuthenticator("request already consumed")
        on_prev = req.aid != rec.expected_aid

        k_s = self.rng.randbytes(KEY_LEN)
        k_s_enc = sym_encrypt(k_r, k_s, self.rng, self.ops)
        a_i = h(k_r, ts_bytes(req.t), k_s_enc.to_bytes(), ops=self.ops)

        # a retry on prev_aid recomputes the same successor instead of stepping twice
        if on_prev:
            rec.expected_aid = h(k_r, u64(rec.counter), ops=self.ops)
        else:
            self._by_aid.pop(rec.prev_aid, None)
            rec.prev_aid = rec.expected_aid
            rec.counter += 1
            rec.expected_aid = h(k_r, u64(rec.counter), ops=self.ops)
            self._by_aid[rec.expected_aid] = rec.id
        rec.last_t = req.t
        return TaAuthResponse(req.aid, k_s, k_s_enc, a_i, rec.id)

    def revoke(self, id: bytes) -> None:
        rec = self.records.get(id)
        if rec is None:
            raise errors.NotRegistered(id.hex())
        rec.revoked = True

    def lookup(self, id: bytes) -> RegistrationRecord:
        try:
            return self.records[id]
        except KeyError:
            raise errors.NotRegistered(id.hex()) from None

    def _insert(self, rec: RegistrationRecord) -> None:
        self.records[rec.id] = rec
        self._by_aid[rec.expected_aid] = rec.id
        if rec.prev_aid is not None:
            self._by_aid[rec.prev_aid] = rec.id

    def dump_records(self) -> list[dict]:
        return [r.to_json() for r in self.records.values()]

    def load_records(self, rows: list[dict]) -> None:
        self.records.clear()
        self._by_aid.clear()
        for row in rows:
            self._insert(RegistrationRecord.from_json(row))


# -- road side unit --------------------------------------------------------

class RoadSideUnit:
    def __init__(self, rsu_id: bytes, keypair: SignatureKeyPair,
                 freshness_window_ms: int = DEFAULT_WINDOW_MS,
                 auth_ttl_ms: int = DEFAULT_AUTH_TTL_MS):
        self.rsu_id = rsu_id
        self.keypair = keypair
        self.window = freshness_window_ms
        self.auth_ttl = auth_ttl_ms
        self.ops = OpCounter()
        self.l_auth: list[AuthListEntry] = []
        self.l_m: list[MessageLogEntry] = []
        self._l_m_index: dict[tuple[int, bytes], MessageLogEntry] = {}
        self._buffer: list[bytes] = []

    def __repr__(self) -> str:
        return f"RoadSideUnit({self.rsu_id!r}, l_auth={len(self.l_auth)}, l_m={len(self.l_m)})"

    @property
    def public_key(self) -> bytes:
        return self.keypair.public

    def handle_ta_response(self, resp: TaAuthResponse, now: int = 0) -> RsuAuthResponse:
        self.l_auth.append(AuthListEntry(resp.id, resp.aid, resp.k_s, now + self.auth_ttl))
        return resp.for_obu()

    def expire(self, now: int) -> None:
        self.l_auth = [e for e in self.l_auth if e.expires_at > now]

    def verify_message(self, tm: TrafficMessage, now: int) -> bytes:
        """Validate a traffic message and return the sender's real identity."""
        if not is_fresh(tm.t2, now, self.window):
            raise errors.StaleTimestamp(f"t2={tm.t2} now={now}")
        self.expire(now)
        t2 = ts_bytes(tm.t2)
        for entry in self.l_auth:
            if h(t2, tm.m, entry.k_s, ops=self.ops) == tm.sigma:
                break
        else:
            raise errors.NoMatchingSession("no session key satisfies sigma")
        key = (tm.t2, tm.m)
        if key in self._l_m_index:
            raise errors.DuplicateMessage(f"t2={tm.t2}")
        log = MessageLogEntry(tm.t2, tm.m, entry.id)
        self.l_m.append(log)
        self._l_m_index[key] = log
        self._buffer.append(message_digest(tm.t2, tm.m, self.ops))
        return entry.id

    @property
    def pending_notification_count(self) -> int:
        return len(self._buffer)

    def emit_notification(self, now: int, fp_target: float = 0.01) -> Notification:
        bf = bloom_sized(len(self._buffer), fp_target)
        for d in self._buffer:
            bf.insert(d)
        self._buffer.clear()
        payload = Notification.signed_payload(self.rsu_id, now, bf.to_bytes())
        return Notification(self.rsu_id, now, bf, sign(self.keypair.secret, payload))

    def report_malicious(self, t2: int, m: bytes) -> bytes:
        entry = self._l_m_index.get((t2, m))
        if entry is None:
            raise errors.NotFound(f"t2={t2}")
        return entry.id

    def dump_auth_list(self) -> list[dict]:
        return [e.to_json() for e in self.l_auth]

    def dump_message_log(self) -> list[dict]:
        return [e.to_json() for e in self.l_m]

    def load_lists(self, auth_rows: list[dict], log_rows: list[dict]) -> None:
        self.l_auth = [AuthListEntry.from_json(r) for r in auth_rows]
        self.l_m = [MessageLogEntry.from_json(r) for r in log_rows]
        self._l_m_index = {(e.t2, e.m): e for e in self.l_m}


# -- on-board unit ---------------------------------------------------------

@dataclass
class _Pending:
    counter: int
    t: int
    aid: bytes


@dataclass
class OnBoardUnit:
    """Vehicle-side state.  The password itself is never stored here."""

    id: bytes
    k_r: bytes = field(repr=False)
    z_r: bytes = field(repr=False)
    counter: int = 1
    session_key: bytes | None = field(default=None, repr=False)
    logged_in: bool = False
    known_rsu_pubkeys: dict[bytes, bytes] = field(default_factory=dict, repr=False)
    ops: OpCounter = field(default_factory=OpCounter, repr=False)
    pending: _Pending | None = field(default=None, repr=False)

    @classmethod
    def provision(cls, p: ObuProvision, rsu_pubkeys: dict[bytes, bytes] | None = None) -> OnBoardUnit:
        return cls(p.id, p.k_r, p.z_r, known_rsu_pubkeys=dict(rsu_pubkeys or {}))

    def _check_password(self, pw: bytes) -> None:
        if xor_bytes(self.z_r, self.k_r) != h(pw, ops=self.ops):
            raise errors.PasswordMismatch("smart card returned fail")

    def login(self, card: SmartCard, pw_input: bytes) -> bool:
        if card.id != self.id:
            raise errors.IdentityMismatch("card does not belong to this OBU")
        self.logged_in = False
        self._check_password(pw_input)
        self.logged_in = True
        return True

    def auth_request(self, now: int) -> AuthRequest:
        if not self.logged_in:
            raise errors.NotLoggedIn()
        aid = h(self.k_r, u64(self.counter), ops=self.ops)
        uac = h(self.k_r, aid, ts_bytes(now), ops=self.ops)
        self.pending = _Pending(self.counter, now, aid)
        return AuthRequest(aid, now, uac)

    def complete_auth(self, resp: RsuAuthResponse) -> bytes:
        p = self.pending
        if p is None or resp.aid != p.aid:
            raise errors.NoPendingRequest()
        a_i = h(self.k_r, ts_bytes(p.t), resp.k_s_enc.to_bytes(), ops=self.ops)
        if a_i != resp.a_i:
            raise errors.BadResponseTag("a_i mismatch")
        try:
            k_s = sym_decrypt(self.k_r, resp.k_s_enc, self.ops)
        except errors.AuthenticationFailure:
            raise errors.BadResponseTag("session key failed to decrypt") from None
        self.session_key = k_s
        self.counter = p.counter + 1
        self.pending = None
        return k_s

    def sign_message(self, m: bytes, now: int) -> TrafficMessage:
        if self.session_key is None:
            raise errors.NoSession()
        return TrafficMessage(now, m, h(ts_bytes(now), m, self.session_key, ops=self.ops))

    def verify_peer_message(self, tm: TrafficMessage, note: Notification) -> PeerStatus:
        pub = self.known_rsu_pubkeys.get(note.rsu_id)
        if pub is None:
            raise errors.UnknownRsu(note.rsu_id.hex())
        payload = Notification.signed_payload(note.rsu_id, note.issued_at, note.filter.to_bytes())
        if not verify(pub, payload, note.signature):
            raise errors.BadNotificationSignature(note.rsu_id.hex())
        if note.filter.contains(message_digest(tm.t2, tm.m, self.ops)):
            return PeerStatus.VALID
        return PeerStatus.UNKNOWN

    def change_password(self, card: SmartCard, id: bytes, old_pw: bytes, new_pw: bytes) -> SmartCard:
        if id != self.id or card.id != self.id:
            raise errors.IdentityMismatch("identity does not match this OBU")
        self._check_password(old_pw)
        self.z_r = xor_bytes(self.k_r, h(new_pw, ops=self.ops))
        card.pw = new_pw
        return card
