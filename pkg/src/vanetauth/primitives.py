"""Cryptographic and utility primitives shared by both schemes.

All counted operations take an optional ``ops`` argument: the
:class:`OpCounter` of the role performing the work.  Passing ``None``
performs the operation uncounted (used for bookkeeping such as bloom
filter indexing and key derivation at setup time).
"""

from __future__ import annotations

import hashlib
import math
import random
import secrets
from dataclasses import dataclass, field, fields

import gmpy2
from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import AuthenticationFailure, MalformedMessage

DIGEST_LEN = 32
KEY_LEN = 32
NONCE_LEN = 12
TAG_LEN = 16

# one 256-bit primitive, three hash functions by domain tag
DOMAIN_H = 0x00
DOMAIN_H0 = 0x01
DOMAIN_H1 = 0x02
DOMAIN_BLOOM = 0x03


def default_rng() -> random.Random:
    return secrets.SystemRandom()


@dataclass
class OpCounter:
    hash_ops: int = 0
    exp_ops: int = 0
    ecc_mul_ops: int = 0
    enc_ops: int = 0
    xor_ops: int = 0

    def reset(self) -> None:
        for f in fields(self):
            setattr(self, f.name, 0)

    def snapshot(self) -> OpCounter:
        return OpCounter(**self.as_dict())

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def __add__(self, other: OpCounter) -> OpCounter:
        return OpCounter(**{k: v + getattr(other, k) for k, v in self.as_dict().items()})

    def __sub__(self, other: OpCounter) -> OpCounter:
        return OpCounter(**{k: v - getattr(other, k) for k, v in self.as_dict().items()})


def counter_reset(c: OpCounter) -> None:
    c.reset()


def counter_snapshot(c: OpCounter) -> OpCounter:
    return c.snapshot()


# -- hashing ---------------------------------------------------------------

def encode_parts(parts, domain: int = DOMAIN_H) -> bytes:
    """Canonical hash preimage: domain byte, then (u64 length, bytes) per part."""
    out = bytearray([domain])
    for p in parts:
        out += len(p).to_bytes(8, "big")
        out += p
    return bytes(out)


def hash_parts(parts, domain: int = DOMAIN_H, ops: OpCounter | None = None) -> bytes:
    if ops is not None:
        ops.hash_ops += 1
    return hashlib.sha256(encode_parts(parts, domain)).digest()


def h(*parts: bytes, ops: OpCounter | None = None) -> bytes:
    return hash_parts(parts, DOMAIN_H, ops)


def h0(*parts: bytes, ops: OpCounter | None = None) -> bytes:
    return hash_parts(parts, DOMAIN_H0, ops)


def h1(*parts: bytes, ops: OpCounter | None = None) -> bytes:
    return hash_parts(parts, DOMAIN_H1, ops)


def ts_bytes(ms: int) -> bytes:
    """8-byte big-endian millisecond timestamp."""
    return int(ms).to_bytes(8, "big")


def u64(n: int) -> bytes:
    return int(n).to_bytes(8, "big")


def xor_bytes(a: bytes, b: bytes, ops: OpCounter | None = None) -> bytes:
    if len(a) != len(b):
        raise ValueError(f"xor of unequal widths {len(a)} and {len(b)}")
    if ops is not None:
        ops.xor_ops += 1
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(len(a), "big")


def modexp(base: int, exponent: int, modulus: int, ops: OpCounter | None = None) -> int:
    if ops is not None:
        ops.exp_ops += 1
    return int(gmpy2.powmod(base, exponent, modulus))


# -- symmetric encryption --------------------------------------------------

@dataclass(frozen=True)
class Ciphertext:
    nonce: bytes
    body: bytes
    tag: bytes

    def to_bytes(self) -> bytes:
        return self.nonce + self.body + self.tag

    @classmethod
    def from_bytes(cls, data: bytes) -> Ciphertext:
        if len(data) < NONCE_LEN + TAG_LEN:
            raise MalformedMessage(f"ciphertext too short ({len(data)} bytes)")
        return cls(data[:NONCE_LEN], data[NONCE_LEN:-TAG_LEN], data[-TAG_LEN:])

    def __len__(self) -> int:
        return len(self.nonce) + len(self.body) + len(self.tag)


def _check_key(key: bytes) -> None:
    if len(key) != KEY_LEN:
        raise ValueError(f"symmetric key must be {KEY_LEN} bytes, got {len(key)}")


def sym_encrypt(key: bytes, plaintext: bytes, rng: random.Random | None = None,
                ops: OpCounter | None = None) -> Ciphertext:
    """AES-256-GCM with a fresh nonce drawn from ``rng``."""
    _check_key(key)
    rng = rng or default_rng()
    nonce = rng.randbytes(NONCE_LEN)
    sealed = AESGCM(key).encrypt(nonce, plaintext, None)
    if ops is not None:
        ops.enc_ops += 1
    return Ciphertext(nonce, sealed[:-TAG_LEN], sealed[-TAG_LEN:])


def sym_decrypt(key: bytes, ct: Ciphertext, ops: OpCounter | None = None) -> bytes:
    _check_key(key)
    if ops is not None:
        ops.enc_ops += 1
    if len(ct.nonce) != NONCE_LEN or len(ct.tag) != TAG_LEN:
        raise AuthenticationFailure("malformed ciphertext")
    try:
        return AESGCM(key).decrypt(ct.nonce, ct.body + ct.tag, None)
    except InvalidTag:
        raise AuthenticationFailure("ciphertext failed authentication") from None


# -- signatures ------------------------------------------------------------

@dataclass(frozen=True)
class SignatureKeyPair:
    secret: bytes = field(repr=False)
    public: bytes


def keypair_generate(rng: random.Random | None = None) -> SignatureKeyPair:
    rng = rng or default_rng()
    sk = Ed25519PrivateKey.from_private_bytes(rng.randbytes(32))
    return keypair_from_secret(sk.private_bytes_raw())


def keypair_from_secret(secret: bytes) -> SignatureKeyPair:
    sk = Ed25519PrivateKey.from_private_bytes(secret)
    return SignatureKeyPair(secret, sk.public_key().public_bytes_raw())


def sign(secret: bytes, msg: bytes) -> bytes:
    return Ed25519PrivateKey.from_private_bytes(secret).sign(msg)


def verify(public: bytes, msg: bytes, signature: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public).verify(signature, msg)
    except (InvalidSignature, ValueError):
        return False
    return True


# -- bloom filter ----------------------------------------------------------

@dataclass
class BloomFilter:
    m: int
    hash_count: int
    bits: bytearray
    inserted: int = 0

    def _positions(self, item: bytes):
        for i in range(self.hash_count):
            d = hash_parts((item, i.to_bytes(4, "big")), DOMAIN_BLOOM)
            yield int.from_bytes(d[:8], "big") % self.m

    def insert(self, item: bytes) -> None:
        for pos in self._positions(item):
            self.bits[pos >> 3] |= 1 << (pos & 7)
        self.inserted += 1

    def contains(self, item: bytes) -> bool:
        return all(self.bits[pos >> 3] & (1 << (pos & 7)) for pos in self._positions(item))

    __contains__ = contains

    def to_bytes(self) -> bytes:
        return (self.m.to_bytes(4, "big") + bytes([self.hash_count])
                + self.inserted.to_bytes(4, "big") + bytes(self.bits))

    @classmethod
    def from_bytes(cls, data: bytes) -> BloomFilter:
        if len(data) < 9:
            raise MalformedMessage("bloom filter header truncated")
        m = int.from_bytes(data[:4], "big")
        k = data[4]
        inserted = int.from_bytes(data[5:9], "big")
        if m < 8 or not 1 <= k <= 16:
            raise MalformedMessage(f"bloom filter parameters out of range (m={m}, k={k})")
        bits = data[9:]
        if len(bits) != (m + 7) // 8:
            raise MalformedMessage("bloom filter bit array length does not match m")
        return cls(m, k, bytearray(bits), inserted)


def bloom_new(m: int, k: int) -> BloomFilter:
    if m < 8:
        raise ValueError("bloom filter needs m >= 8")
    if not 1 <= k <= 16:
        raise ValueError("bloom filter needs 1 <= k <= 16")
    return BloomFilter(m, k, bytearray((m + 7) // 8))


def bloom_insert(bf: BloomFilter, item: bytes) -> None:
    bf.insert(item)


def bloom_contains(bf: BloomFilter, item: bytes) -> bool:
    return bf.contains(item)


def bloom_sized(n: int, fp_target: float, min_bits: int = 64) -> BloomFilter:
    """Filter sized for ``n`` items at false-positive probability ``fp_target``."""
    if not 0.0 < fp_target < 1.0:
        raise ValueError("fp_target must lie in (0, 1)")
    if n == 0:
        return bloom_new(min_bits, 1)
    m = max(min_bits, math.ceil(-n * math.log(fp_target) / math.log(2) ** 2))
    k = min(16, max(1, round(m / n * math.log(2))))
    return bloom_new(m, k)


# -- freshness -------------------------------------------------------------

def is_fresh(t: int, now: int, window: int) -> bool:
    return now - window <= t <= now + window
