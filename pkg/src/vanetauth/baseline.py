"""Diffie-Hellman based smart-card scheme used as the comparison baseline.

Registration, and the four-step authentication: the OBU masks its identity
under ``H0(y^alpha)``, the TA unmasks it with ``D^x``, and both derive the
session key ``H1(g^(alpha*beta))``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import gmpy2

from . import errors
from .primitives import (
    DIGEST_LEN,
    OpCounter,
    default_rng,
    h0,
    h1,
    is_fresh,
    modexp,
    ts_bytes,
    xor_bytes,
)
from .wire import (
    TAG_BASELINE_FORWARD,
    TAG_BASELINE_REQUEST,
    TAG_BASELINE_RESPONSE,
    Reader,
    Writer,
)

ID_WIDTH = 32

# RFC 3526 group 14 (2048-bit MODP safe prime, generator 2)
RFC3526_2048_P = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF",
    16,
)
KNOWN_GROUPS = {2048: (RFC3526_2048_P, 2)}


@dataclass(frozen=True)
class SystemParams:
    p: int
    g: int
    y: int

    @property
    def width(self) -> int:
        return (self.p.bit_length() + 7) // 8

    def elem(self, v: int) -> bytes:
        """Fixed-width big-endian encoding of a group element."""
        return v.to_bytes(self.width, "big")

    def to_json(self) -> dict:
        return {"p": hex(self.p), "g": hex(self.g), "y": hex(self.y)}

    @classmethod
    def from_json(cls, d: dict) -> SystemParams:
        return cls(int(d["p"], 16), int(d["g"], 16), int(d["y"], 16))


@dataclass(frozen=True)
class BaselineTaSecrets:
    x: int = field(repr=False)
    s: bytes = field(repr=False)

    def to_json(self) -> dict:
        return {"x": hex(self.x), "s": self.s.hex()}

    @classmethod
    def from_json(cls, d: dict) -> BaselineTaSecrets:
        return cls(int(d["x"], 16), bytes.fromhex(d["s"]))


@dataclass(frozen=True)
class BaselineCard:
    id: bytes
    k: bytes
    params: SystemParams


@dataclass(frozen=True)
class BaselineAuthRequest:
    d: int
    aid: bytes
    didv: bytes
    cv: bytes
    t: int

    def to_bytes(self, params: SystemParams) -> bytes:
        return (Writer(TAG_BASELINE_REQUEST).var(params.elem(self.d)).raw(self.aid)
                .raw(self.didv).raw(self.cv).u64(self.t).done())

    @classmethod
    def from_bytes(cls, data: bytes) -> BaselineAuthRequest:
        r = Reader(data, TAG_BASELINE_REQUEST)
        msg = cls(int.from_bytes(r.var(), "big"), r.take(ID_WIDTH), r.take(DIGEST_LEN),
                  r.take(DIGEST_LEN), r.u64())
        r.finish()
        return msg


@dataclass(frozen=True)
class BaselineForward:
    req: BaselineAuthRequest
    rsu_id: bytes

    def to_bytes(self, params: SystemParams) -> bytes:
        return Writer(TAG_BASELINE_FORWARD).var(self.req.to_bytes(params)).var(self.rsu_id).done()

    @classmethod
    def from_bytes(cls, data: bytes) -> BaselineForward:
        r = Reader(data, TAG_BASELINE_FORWARD)
        msg = cls(BaselineAuthRequest.from_bytes(r.var()), r.var())
        r.finish()
        return msg


@dataclass(frozen=True)
class BaselineAuthResponse:
    aid: bytes
    c: bytes
    g_beta: int

    def to_bytes(self, params: SystemParams) -> bytes:
        return (Writer(TAG_BASELINE_RESPONSE).raw(self.aid).raw(self.c)
                .var(params.elem(self.g_beta)).done())

    @classmethod
    def from_bytes(cls, data: bytes) -> BaselineAuthResponse:
        r = Reader(data, TAG_BASELINE_RESPONSE)
        msg = cls(r.take(ID_WIDTH), r.take(DIGEST_LEN), int.from_bytes(r.var(), "big"))
        r.finish()
        return msg


@dataclass
class BaselinePending:
    alpha: int = field(repr=False)
    e: int = field(repr=False)
    aid: bytes = b""


def pad_id(id: bytes) -> bytes:
    return id[:ID_WIDTH].ljust(ID_WIDTH, b"\x00")


def random_safe_prime(bits: int, rng: random.Random) -> int:
    if bits < 16:
        raise ValueError("modulus must be at least 16 bits")
    while True:
        q = rng.getrandbits(bits - 1) | (1 << (bits - 2)) | 1
        if not gmpy2.is_prime(q, 25):
            continue
        p = 2 * q + 1
        if gmpy2.is_prime(p, 25):
            return p


def baseline_setup(bits: int = 2048, rng: random.Random | None = None, *,
                   p: int | None = None, g: int | None = None, x: int | None = None,
                   random_prime: bool = False) -> tuple[SystemParams, BaselineTaSecrets]:
    """Choose group parameters and TA secrets.

    A caller-supplied ``p``/``g`` pair (toy groups in tests) takes priority.
    For sizes with a standard safe-prime group the standard group is used
    unless ``random_prime`` is set; otherwise a random safe prime is drawn.
    """
    rng = rng or default_rng()
    if p is None:
        if bits in KNOWN_GROUPS and not random_prime:
            p, g = KNOWN_GROUPS[bits]
        else:
            p = random_safe_prime(bits, rng)
            # squares generate the prime-order subgroup of size (p-1)/2
            while g is None or g in (1, p - 1):
                g = pow(rng.randrange(2, p - 1), 2, p)
    elif g is None:
        raise ValueError("a caller-supplied p needs a generator g")
    if not 1 < g < p:
        raise ValueError("generator out of range")
    if x is None:
        x = rng.randint(1, p - 2)
    params = SystemParams(p, g, pow(g, x, p))
    return params, BaselineTaSecrets(x, rng.randbytes(32))


class BaselineTA:
    def __init__(self, params: SystemParams, secrets: BaselineTaSecrets,
                 freshness_window_ms: int = 60_000, rng: random.Random | None = None):
        self.params = params
        self._sec = secrets
        self.window = freshness_window_ms
        self.rng = rng or default_rng()
        self.ops = OpCounter()
        self.registered: set[bytes] = set()

    def register(self, id: bytes) -> BaselineCard:
        key = pad_id(id)
        if key in self.registered:
            raise errors.DuplicateIdentity(id.hex())
        self.registered.add(key)
        return BaselineCard(id, h0(xor_bytes(key, self._sec.s)), self.params)

    def card_key(self, id: bytes) -> bytes:
        return h0(xor_bytes(pad_id(id), self._sec.s))

    def handle(self, fwd: BaselineForward, now: int, beta: int | None = None) -> tuple[BaselineAuthResponse, bytes]:
        req, pp, ops = fwd.req, self.params, self.ops
        if not is_fresh(req.t, now, self.window):
            raise errors.StaleTimestamp(f"t={req.t} now={now}")
        if not 1 < req.d < pp.p:
            raise errors.BadDIDV("D out of range")
        e = modexp(req.d, self._sec.x, pp.p, ops)
        e_b = pp.elem(e)
        masked = xor_bytes(req.aid, h0(e_b, ops=ops), ops)
        k = h0(xor_bytes(masked, self._sec.s, ops), ops=ops)
        if h0(k, e_b, ops=ops) != req.didv:
            raise errors.BadDIDV("DIDV mismatch")
        if h0(req.aid, req.didv, e_b, ts_bytes(req.t), ops=ops) != req.cv:
            raise errors.BadCV("CV mismatch")
        if beta is None:
            beta = self.rng.randint(1, pp.p - 2)
        g_beta = modexp(pp.g, beta, pp.p, ops)
        shared = pp.elem(modexp(req.d, beta, pp.p, ops))
        k_s = h1(shared, ops=ops)
        c = h1(shared, e_b, k, ops=ops)
        return BaselineAuthResponse(req.aid, c, g_beta), k_s


def baseline_obu_request(card: BaselineCard, rng: random.Random | None, now: int,
                         ops: OpCounter | None = None, alpha: int | None = None
                         ) -> tuple[BaselineAuthRequest, BaselinePending]:
    pp = card.params
    if alpha is None:
        alpha = (rng or default_rng()).randint(1, pp.p - 2)
    d = modexp(pp.g, alpha, pp.p, ops)
    e = modexp(pp.y, alpha, pp.p, ops)
    e_b = pp.elem(e)
    aid = xor_bytes(pad_id(card.id), h0(e_b, ops=ops), ops)
    didv = h0(card.k, e_b, ops=ops)
    cv = h0(aid, didv, e_b, ts_bytes(now), ops=ops)
    return BaselineAuthRequest(d, aid, didv, cv, now), BaselinePending(alpha, e, aid)


def baseline_rsu_forward(req: BaselineAuthRequest, rsu_id: bytes, now: int,
                         window: int = 60_000) -> BaselineForward:
    if not is_fresh(req.t, now, window):
        raise errors.StaleTimestamp(f"t={req.t} now={now}")
    return BaselineForward(req, rsu_id)


def baseline_obu_complete(card: BaselineCard, pending: BaselinePending | None,
                          resp: BaselineAuthResponse, ops: OpCounter | None = None) -> bytes:
    pp = card.params
    if pending is None or resp.aid != pending.aid:
        raise errors.NoPendingRequest()
    if not 1 < resp.g_beta < pp.p:
        raise errors.BadConfirmation("G out of range")
    shared = pp.elem(modexp(resp.g_beta, pending.alpha, pp.p, ops))
    if h1(shared, pp.elem(pending.e), card.k, ops=ops) != resp.c:
        raise errors.BadConfirmation("C mismatch")
    return h1(shared, ops=ops)
