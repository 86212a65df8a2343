"""Exception hierarchy.

Every protocol-level rejection is a :class:`ProtocolError` subclass whose
class name is the stable error label written to simulator logs, scenario
reports and CLI stderr.
"""


class VanetError(Exception):
    """Root of all errors raised by this package."""

    @property
    def label(self) -> str:
        return type(self).__name__


class ProtocolError(VanetError):
    """A message or request was rejected by a protocol role."""


# primitives
class AuthenticationFailure(ProtocolError):
    pass


class MalformedMessage(ProtocolError):
    pass


# proposed scheme
class DuplicateIdentity(ProtocolError):
    pass


class RevokedIdentity(ProtocolError):
    pass


class PasswordMismatch(ProtocolError):
    pass


class IdentityMismatch(ProtocolError):
    pass


class NotLoggedIn(ProtocolError):
    pass


class StaleTimestamp(ProtocolError):
    pass


class UnknownPseudonym(ProtocolError):
    pass


class Revoked(ProtocolError):
    pass


class BadAuthenticator(ProtocolError):
    pass


class NoPendingRequest(ProtocolError):
    pass


class BadResponseTag(ProtocolError):
    pass


class NoSession(ProtocolError):
    pass


class NoMatchingSession(ProtocolError):
    pass


class DuplicateMessage(ProtocolError):
    pass


class BadNotificationSignature(ProtocolError):
    pass


class UnknownRsu(ProtocolError):
    pass


class NotFound(ProtocolError):
    pass


class NotRegistered(ProtocolError):
    pass


# baseline scheme
class BadDIDV(ProtocolError):
    pass


class BadCV(ProtocolError):
    pass


class BadConfirmation(ProtocolError):
    pass


# simulator
class DuplicateTa(VanetError):
    pass


class SecureChannelViolation(VanetError):
    pass


class IndexOutOfRange(VanetError, IndexError):
    pass


class UnexpectedMessage(ProtocolError):
    """A frame of a valid type arrived at a role that never accepts it."""


class AuthTimeout(ProtocolError):
    """An OBU exhausted its authentication retries."""


# cli / scenario
class ConfigError(VanetError):
    pass


class StateExists(VanetError):
    pass


class IoFailure(VanetError):
    pass


class UnknownList(VanetError):
    pass


class ScenarioParseError(VanetError):
    pass


class AssertionFailed(VanetError):
    pass
