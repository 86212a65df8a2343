"""Binary framing helpers.

Frames are a 1-byte type tag followed by fields in fixed order.  Fixed
width fields are written raw; variable fields carry a 4-byte big-endian
length prefix.  Timestamps are 8-byte big-endian milliseconds.
"""

from __future__ import annotations

from .errors import MalformedMessage

TAG_AUTH_REQUEST = 0x01
TAG_RSU_AUTH_RESPONSE = 0x02
TAG_TRAFFIC_MESSAGE = 0x03
TAG_NOTIFICATION = 0x04
TAG_SECURE_ENVELOPE = 0x10
TAG_TA_AUTH_RESPONSE = 0x11
TAG_BASELINE_REQUEST = 0x21
TAG_BASELINE_FORWARD = 0x22
TAG_BASELINE_RESPONSE = 0x23

TAG_NAMES = {
    TAG_AUTH_REQUEST: "AuthRequest",
    TAG_RSU_AUTH_RESPONSE: "RsuAuthResponse",
    TAG_TRAFFIC_MESSAGE: "TrafficMessage",
    TAG_NOTIFICATION: "Notification",
    TAG_SECURE_ENVELOPE: "SecureEnvelope",
    TAG_TA_AUTH_RESPONSE: "TaAuthResponse",
    TAG_BASELINE_REQUEST: "BaselineAuthRequest",
    TAG_BASELINE_FORWARD: "BaselineForward",
    TAG_BASELINE_RESPONSE: "BaselineAuthResponse",
}

MAX_FIELD = 1 << 20


def frame_type(raw: bytes) -> str:
    if not raw:
        return "empty"
    return TAG_NAMES.get(raw[0], f"unknown(0x{raw[0]:02x})")


class Writer:
    def __init__(self, tag: int | None = None):
        self.buf = bytearray()
        if tag is not None:
            self.buf.append(tag)

    def raw(self, b: bytes) -> Writer:
        self.buf += b
        return self

    def var(self, b: bytes) -> Writer:
        self.buf += len(b).to_bytes(4, "big")
        self.buf += b
        return self

    def u64(self, n: int) -> Writer:
        self.buf += int(n).to_bytes(8, "big")
        return self

    def done(self) -> bytes:
        return bytes(self.buf)


class Reader:
    def __init__(self, data: bytes, tag: int | None = None):
        self.data = bytes(data)
        self.pos = 0
        if tag is not None:
            got = self.take(1)[0]
            if got != tag:
                raise MalformedMessage(f"expected {TAG_NAMES.get(tag, tag)} tag, got 0x{got:02x}")

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MalformedMessage("frame truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def var(self) -> bytes:
        n = int.from_bytes(self.take(4), "big")
        if n > MAX_FIELD:
            raise MalformedMessage("field length out of range")
        return self.take(n)

    def u64(self) -> int:
        return int.from_bytes(self.take(8), "big")

    def finish(self) -> None:
        if self.pos != len(self.data):
            raise MalformedMessage(f"{len(self.data) - self.pos} trailing bytes")
