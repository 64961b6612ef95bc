"""Exception hierarchy shared by every component.

Errors cross the gateway as ``{"type": <class name>, "message": ..., "details": ...}``
and are rebuilt on the client side with :func:`from_wire`, so callers see the
same exception classes whether they talk to a component in-process or over JSON.
"""

from __future__ import annotations

from typing import Any


class SSIError(Exception):
    """Base class for all framework errors."""

    def __init__(self, message: str = "", **details: Any) -> None:
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__
        self.details = details

    def to_wire(self) -> dict[str, Any]:
        return {"type": type(self).__name__, "message": self.message, "details": _jsonable(self.details)}


def _jsonable(details: dict[str, Any]) -> dict[str, Any]:
    out = {}
    for key, value in details.items():
        if isinstance(value, (str, int, float, bool)) or value is None:
            out[key] = value
        elif isinstance(value, (list, tuple)):
            out[key] = [v if isinstance(v, (str, int, float, bool)) else str(v) for v in value]
        else:
            out[key] = str(value)
    return out


# -- crypto -------------------------------------------------------------------
class CryptoError(SSIError):
    pass


class UnsupportedAlgorithm(CryptoError):
    pass


class MalformedKey(CryptoError):
    pass


class MalformedSignature(CryptoError):
    pass


class DecryptionFailure(CryptoError):
    pass


class InvalidThreshold(CryptoError):
    pass


class InsufficientShares(CryptoError):
    pass


class InconsistentShares(CryptoError):
    pass


class ThresholdNotMet(CryptoError):
    pass


class InvalidPartial(CryptoError):
    pass


# -- ledger -------------------------------------------------------------------
class LedgerError(SSIError):
    pass


class Unauthorized(LedgerError):
    pass


class LedgerUnavailable(LedgerError):
    pass


class MasterUnavailable(LedgerError):
    pass


class UnknownBundle(LedgerError):
    pass


# -- registry -----------------------------------------------------------------
class RegistryError(SSIError):
    pass


class AuthenticationFailed(RegistryError):
    pass


class DuplicateDid(RegistryError):
    pass


class DuplicateCredential(RegistryError):
    pass


class InvalidDocument(RegistryError):
    pass


class SubjectMismatch(RegistryError):
    pass


class UnrecognizedIssuer(RegistryError):
    pass


class InvalidIssuerProof(RegistryError):
    pass


class SubjectNotFound(RegistryError):
    pass


class SubjectRevoked(RegistryError):
    pass


class AlreadyRevoked(RegistryError):
    pass


# -- wallet -------------------------------------------------------------------
class WalletError(SSIError):
    pass


class WalletLocked(WalletError):
    pass


class WalletLockedOut(WalletLocked):
    pass


class KeyMismatch(WalletError):
    pass


class NotSubject(WalletError):
    pass


class UnknownCredential(WalletError):
    pass


class RemoteUnavailable(WalletError):
    pass


# -- endorsement --------------------------------------------------------------
class EndorsementError(SSIError):
    pass


class ReviewRejected(EndorsementError):
    pass


class PolicyNotSatisfied(EndorsementError):
    pass


class SigningFailure(EndorsementError):
    pass


class UnknownEntity(EndorsementError):
    pass


class DuplicateApproval(EndorsementError):
    pass


class InvalidMaterial(EndorsementError):
    pass


class UnknownRequest(EndorsementError):
    pass


class RequestClosed(EndorsementError):
    pass


# -- verification -------------------------------------------------------------
class VerificationError(SSIError):
    pass


class RegistryUnreachable(VerificationError):
    pass


class NameServiceUnreachable(VerificationError):
    pass


class StaleNonce(VerificationError):
    pass


class UnknownConsumer(VerificationError):
    pass


class UnknownSession(VerificationError):
    pass


# -- platform -----------------------------------------------------------------
class PlatformError(SSIError):
    pass


class SpecSyntaxError(PlatformError):
    pass


class SchemaError(PlatformError):
    def __init__(self, message: str = "", diagnostics: list | None = None, **details: Any) -> None:
        super().__init__(message, **details)
        self.diagnostics = list(diagnostics or [])

    def to_wire(self) -> dict[str, Any]:
        wire = super().to_wire()
        wire["diagnostics"] = [d.to_json() for d in self.diagnostics]
        return wire


class DuplicateService(PlatformError):
    pass


class BuildFailure(PlatformError):
    pass


class UnknownService(PlatformError):
    pass


class ChannelViolation(PlatformError):
    pass


class Unauthenticated(PlatformError):
    pass


class NotFound(PlatformError):
    pass


class MigrationFailure(PlatformError):
    pass


class BadRequest(PlatformError):
    pass


def _collect(cls: type) -> dict[str, type]:
    found = {cls.__name__: cls}
    for sub in cls.__subclasses__():
        found.update(_collect(sub))
    return found


def from_wire(wire: dict[str, Any]) -> SSIError:
    """Rebuild an exception received over the gateway."""
    registry = _collect(SSIError)
    cls = registry.get(wire.get("type", ""), SSIError)
    details = dict(wire.get("details") or {})
    if cls is SchemaError:
        from ssiaas.platform.spec import Diagnostic

        diags = [Diagnostic.from_json(d) for d in wire.get("diagnostics", [])]
        return SchemaError(wire.get("message", ""), diagnostics=diags, **details)
    return cls(wire.get("message", ""), **details)
