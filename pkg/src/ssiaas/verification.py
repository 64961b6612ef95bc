"""Verifier agent for credentials and presentations.

Verification is split into two phases so the same code serves both
deployment modes. ``begin`` runs the status check and prepares holder
challenges; ``complete`` takes the holder's answers and runs the remaining
checks. In host mode :class:`Verifier` drives both phases in-process with a
holder channel callback. In service mode :class:`VerificationService` exposes
the phases as JSON operations and :class:`ServiceVerifierClient` drives them
over any transport, answering challenges on the client side.

Reports contain no session ids, nonces or timestamps, so the two modes
produce byte-identical report JSON for the same inputs.
"""

from __future__ import annotations

import enum
import itertools
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from ssiaas.crypto import b64decode, b64encode, canonical_json, encode_challenge, new_nonce
from ssiaas.crypto.encoding import hex_decode
from ssiaas.errors import (
    InvalidDocument,
    LedgerUnavailable,
    NameServiceUnreachable,
    NotFound,
    RegistryUnreachable,
    StaleNonce,
    SubjectNotFound,
    SubjectRevoked,
    UnknownService,
    UnknownSession,
)
from ssiaas.ledger import LogicalClock, SubjectStatus
from ssiaas.vdr import VerifiableCredential, check_issuer_proof
from ssiaas.wallet import VerifiablePresentation

REPORT_VERSION = 1
NONCE_TTL = 60
SESSION_TTL = 60

HolderChannel = Callable[[str, bytes], bytes]


class VerifierMode(str, enum.Enum):
    SERVICE = "service"
    HOST = "host"


class Check(str, enum.Enum):
    STATUS = "status"
    HOLDER_AUTH = "holder_auth"
    ISSUER_EXISTENCE = "issuer_existence"
    INTEGRITY = "integrity"


class PresentationCheck(str, enum.Enum):
    HOLDER_SIGNATURE = "holder_signature"
    SUBJECT_BINDING = "subject_binding"


class Outcome(str, enum.Enum):
    VALID = "Valid"
    INVALID = "Invalid"


class Result(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    SKIPPED = "skipped"


@dataclass(frozen=True)
class CheckOutcome:
    name: str
    result: Result
    detail: str = ""

    def to_json(self) -> dict:
        return {"check": self.name, "result": self.result.value, "detail": self.detail}

    @classmethod
    def from_json(cls, obj: dict) -> "CheckOutcome":
        return cls(obj["check"], Result(obj["result"]), obj.get("detail", ""))


@dataclass(frozen=True)
class VerificationReport:
    outcome: Outcome
    checks: tuple[CheckOutcome, ...]
    subject: str
    credentials: tuple["VerificationReport", ...] = ()

    @property
    def valid(self) -> bool:
        return self.outcome is Outcome.VALID

    @property
    def failed_check(self) -> str | None:
        for check in self.checks:
            if check.result is Result.FAIL:
                return check.name
        for report in self.credentials:
            if report.failed_check:
                return report.failed_check
        return None

    def to_json(self) -> dict:
        out = {
            "version": REPORT_VERSION,
            "outcome": self.outcome.value,
            "subject": self.subject,
            "checks": [c.to_json() for c in self.checks],
        }
        if self.credentials:
            out["credentials"] = [r.to_json() for r in self.credentials]
        return out

    def to_bytes(self) -> bytes:
        return canonical_json(self.to_json())

    @classmethod
    def from_json(cls, obj: dict) -> "VerificationReport":
        return cls(
            Outcome(obj["outcome"]),
            tuple(CheckOutcome.from_json(c) for c in obj["checks"]),
            obj["subject"],
            tuple(cls.from_json(r) for r in obj.get("credentials", [])),
        )


def _finish(checks: list[CheckOutcome], order: list[str], subject: str) -> VerificationReport:
    done = {c.name for c in checks}
    failed = any(c.result is Result.FAIL for c in checks)
    full = list(checks) + [CheckOutcome(name, Result.SKIPPED) for name in order if name not in done]
    return VerificationReport(Outcome.INVALID if failed else Outcome.VALID, tuple(full), subject)


VC_ORDER = [c.value for c in Check]
VP_ORDER = [c.value for c in PresentationCheck]


@dataclass
class VerifierConfig:
    """``registry`` and ``name_service`` are local objects or gateway clients."""

    registry: Any
    name_service: Any
    mode: VerifierMode = VerifierMode.HOST
    nonce_ttl: int = NONCE_TTL
    trusted_keys: Mapping[str, bytes] | None = None
    clock: LogicalClock | None = None

    def __post_init__(self) -> None:
        self.mode = VerifierMode(self.mode)
        if self.registry is None or self.name_service is None:
            raise ValueError("verifier needs a registry and a name service")


@dataclass(frozen=True)
class PendingChallenge:
    vc_id: str
    subject_did: str
    encoded: bytes

    def to_json(self) -> dict:
        return {"vc_id": self.vc_id, "subject_did": self.subject_did, "encoded": b64encode(self.encoded)}

    @classmethod
    def from_json(cls, obj: dict) -> "PendingChallenge":
        return cls(obj["vc_id"], obj["subject_did"], b64decode(obj["encoded"]))


@dataclass
class _Item:
    vc: VerifiableCredential
    checks: list[CheckOutcome] = field(default_factory=list)
    nonce: bytes | None = None


@dataclass
class _Session:
    subject: str
    items: list[_Item]
    presentation_checks: list[CheckOutcome] | None
    expires_at: int


@dataclass(frozen=True)
class Begun:
    """Result of the first phase: either a final report or challenges to answer."""

    session_id: str | None
    challenges: tuple[PendingChallenge, ...]
    report: VerificationReport | None = None

    def to_json(self) -> dict:
        return {
            "session_id": self.session_id,
            "challenges": [c.to_json() for c in self.challenges],
            "report": self.report.to_json() if self.report else None,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Begun":
        report = VerificationReport.from_json(obj["report"]) if obj.get("report") else None
        return cls(obj.get("session_id"), tuple(PendingChallenge.from_json(c) for c in obj["challenges"]), report)


class Verifier:
    def __init__(self, config: VerifierConfig) -> None:
        self.config = config
        self.clock = config.clock or getattr(config.registry, "clock", None) or LogicalClock()
        self._nonces: dict[bytes, int] = {}
        self._sessions: dict[str, _Session] = {}
        self._ids = itertools.count(1)
        self._lock = threading.Lock()

    # -- infrastructure wrappers --------------------------------------------------
    def _registry(self, method: str, *args: Any):
        try:
            return getattr(self.config.registry, method)(*args)
        except (LedgerUnavailable, UnknownService, ConnectionError) as exc:
            raise RegistryUnreachable(f"registry unreachable: {exc}") from exc

    def _consumer(self, consumer_id: str):
        try:
            return self.config.name_service.resolve_consumer(consumer_id)
        except NotFound:
            return None
        except (NameServiceUnreachable, ConnectionError) as exc:
            raise NameServiceUnreachable(f"name service unreachable: {exc}") from exc

    # -- nonces for presentations ----------------------------------------------------
    def presentation_nonce(self) -> bytes:
        nonce = new_nonce()
        with self._lock:
            self._nonces[nonce] = self.clock.now + self.config.nonce_ttl
        return nonce

    def _consume_nonce(self, nonce: bytes) -> None:
        with self._lock:
            expires = self._nonces.pop(bytes(nonce), None)
            now = self.clock.now
            for stale in [n for n, e in self._nonces.items() if e < now]:
                del self._nonces[stale]
        if expires is None:
            raise StaleNonce("presentation nonce was not issued by this verifier or was already used")
        if self.clock.now > expires:
            raise StaleNonce("presentation nonce expired")

    # -- individual checks --------------------------------------------------------------
    def _check_status(self, vc: VerifiableCredential) -> CheckOutcome:
        name = Check.STATUS.value
        resolution = self._registry("resolve", vc.vc_id)
        if resolution.status is None:
            return CheckOutcome(name, Result.FAIL, "credential is not registered")
        if resolution.status is SubjectStatus.REVOKED:
            return CheckOutcome(name, Result.FAIL, "credential carries a revoking mark")
        if resolution.payload_digest != vc.credential_digest():
            return CheckOutcome(name, Result.FAIL, "credential digest differs from the registered digest")
        return CheckOutcome(name, Result.PASS, "registered and not revoked")

    def _holder_key(self, did: str) -> tuple[bytes | None, str]:
        try:
            return self._registry("resolve_document", did).subject_public_key, ""
        except SubjectRevoked:
            return None, "holder DID is revoked"
        except (SubjectNotFound, InvalidDocument):
            return None, "holder DID does not resolve"

    def _prepare_challenge(self, item: _Item) -> PendingChallenge | None:
        key, why = self._holder_key(item.vc.subject_did)
        if key is None:
            item.checks.append(CheckOutcome(Check.HOLDER_AUTH.value, Result.FAIL, why))
            return None
        item.nonce = new_nonce()
        return PendingChallenge(item.vc.vc_id, item.vc.subject_did, encode_challenge(item.nonce, key))

    def _check_holder(self, item: _Item, response: bytes | None) -> CheckOutcome:
        name = Check.HOLDER_AUTH.value
        if response is None:
            return CheckOutcome(name, Result.FAIL, "holder did not answer the challenge")
        if bytes(response) != item.nonce:
            return CheckOutcome(name, Result.FAIL, "challenge response does not match")
        return CheckOutcome(name, Result.PASS, "holder proved possession of the subject key")

    def _check_issuer(self, vc: VerifiableCredential):
        name = Check.ISSUER_EXISTENCE.value
        record = self._consumer(vc.issuer_id)
        if record is None:
            return CheckOutcome(name, Result.FAIL, "issuer is not a registered service consumer"), None
        if record.signing_key != vc.issuer_public_key:
            return CheckOutcome(name, Result.FAIL, "issuer key differs from the name service record"), None
        trusted = (self.config.trusted_keys or {}).get(vc.issuer_id)
        if trusted is not None and trusted != vc.issuer_public_key:
            return CheckOutcome(name, Result.FAIL, "issuer key differs from the trusted key source"), None
        return CheckOutcome(name, Result.PASS, "issuer key matches the name service record"), record

    def _check_integrity(self, vc: VerifiableCredential, record) -> CheckOutcome:
        name = Check.INTEGRITY.value
        if check_issuer_proof(vc, vc.proof, record):
            return CheckOutcome(name, Result.PASS, "issuer proof verifies")
        return CheckOutcome(name, Result.FAIL, "issuer proof does not verify")

    # -- phases ---------------------------------------------------------------------------
    def _open_session(self, session: _Session) -> str:
        with self._lock:
            session_id = f"vs-{next(self._ids)}"
            self._sessions[session_id] = session
        return session_id

    def _begin_items(self, items: list[_Item]) -> list[PendingChallenge]:
        challenges = []
        for item in items:
            status = self._check_status(item.vc)
            item.checks.append(status)
            if status.result is Result.FAIL:
                continue
            challenge = self._prepare_challenge(item)
            if challenge is not None:
                challenges.append(challenge)
        return challenges

    def begin_vc(self, vc: VerifiableCredential) -> Begun:
        items = [_Item(vc)]
        challenges = self._begin_items(items)
        session = _Session(vc.vc_id, items, None, self.clock.now + SESSION_TTL)
        if not challenges:
            return Begun(None, (), self._report(session, {}))
        return Begun(self._open_session(session), tuple(challenges))

    def begin_presentation(self, vp: VerifiablePresentation) -> Begun:
        if not vp.credentials:
            raise InvalidDocument("presentation discloses no credentials")
        self._consume_nonce(vp.verifier_nonce)
        subject = vp.digest().hex()
        pres: list[CheckOutcome] = []
        key, why = self._holder_key(vp.holder_did)
        if key is None:
            pres.append(CheckOutcome(PresentationCheck.HOLDER_SIGNATURE.value, Result.FAIL, why))
        elif not vp.signature_valid(key):
            pres.append(CheckOutcome(PresentationCheck.HOLDER_SIGNATURE.value, Result.FAIL,
                                     "holder signature does not verify"))
        else:
            pres.append(CheckOutcome(PresentationCheck.HOLDER_SIGNATURE.value, Result.PASS,
                                     "holder signature binds the credentials and nonce"))
            if all(vc.subject_did == vp.holder_did for vc in vp.credentials):
                pres.append(CheckOutcome(PresentationCheck.SUBJECT_BINDING.value, Result.PASS,
                                         "every credential names the holder"))
            else:
                pres.append(CheckOutcome(PresentationCheck.SUBJECT_BINDING.value, Result.FAIL,
                                         "a disclosed credential names another subject"))
        items = [_Item(vc) for vc in vp.credentials]
        session = _Session(subject, items, pres, self.clock.now + SESSION_TTL)
        if any(c.result is Result.FAIL for c in pres):
            return Begun(None, (), self._report(session, {}))
        challenges = self._begin_items(items)
        if not challenges:
            return Begun(None, (), self._report(session, {}))
        return Begun(self._open_session(session), tuple(challenges))

    def complete(self, session_id: str, responses: Mapping[str, bytes | None]) -> VerificationReport:
        with self._lock:
            session = self._sessions.pop(session_id, None)
        if session is None:
            raise UnknownSession(f"unknown or finished verification session {session_id!r}")
        if self.clock.now > session.expires_at:
            raise StaleNonce("verification session expired")
        return self._report(session, responses)

    def _finish_item(self, item: _Item, responses: Mapping[str, bytes | None]) -> VerificationReport:
        checks = item.checks
        if not any(c.result is Result.FAIL for c in checks):
            checks.append(self._check_holder(item, responses.get(item.vc.vc_id)))
        if not any(c.result is Result.FAIL for c in checks):
            outcome, record = self._check_issuer(item.vc)
            checks.append(outcome)
            if record is not None:
                checks.append(self._check_integrity(item.vc, record))
        return _finish(checks, VC_ORDER, item.vc.vc_id)

    def _report(self, session: _Session, responses: Mapping[str, bytes | None]) -> VerificationReport:
        if session.presentation_checks is None:
            return self._finish_item(session.items[0], responses)
        pres = _finish(session.presentation_checks, VP_ORDER, session.subject)
        if not pres.valid:
            reports = tuple(_finish([], VC_ORDER, item.vc.vc_id) for item in session.items)
        else:
            reports = tuple(self._finish_item(item, responses) for item in session.items)
        valid = pres.valid and all(r.valid for r in reports)
        return VerificationReport(Outcome.VALID if valid else Outcome.INVALID, pres.checks, session.subject, reports)

    # -- one-call forms --------------------------------------------------------------------
    def verify_vc(self, vc: VerifiableCredential, holder_channel: HolderChannel | None) -> VerificationReport:
        begun = self.begin_vc(vc)
        if begun.report is not None:
            return begun.report
        return self.complete(begun.session_id, answer_challenges(begun.challenges, holder_channel))

    def verify_presentation(self, vp: VerifiablePresentation, holder_channel: HolderChannel | None) -> VerificationReport:
        begun = self.begin_presentation(vp)
        if begun.report is not None:
            return begun.report
        return self.complete(begun.session_id, answer_challenges(begun.challenges, holder_channel))


def answer_challenges(challenges, holder_channel: HolderChannel | None) -> dict[str, bytes | None]:
    answers: dict[str, bytes | None] = {}
    for challenge in challenges:
        if holder_channel is None:
            answers[challenge.vc_id] = None
            continue
        try:
            answers[challenge.vc_id] = bytes(holder_channel(challenge.subject_did, challenge.encoded))
        except Exception:
            answers[challenge.vc_id] = None
    return answers


class VerificationService:
    """JSON operations for a hosted verifier."""

    OPERATIONS = ("verify-begin", "verify-complete", "presentation-nonce")

    def __init__(self, verifier: Verifier) -> None:
        self.verifier = verifier

    def handle(self, operation: str, payload: Mapping[str, Any]) -> dict:
        if operation == "presentation-nonce":
            return {"nonce": self.verifier.presentation_nonce().hex()}
        if operation == "verify-begin":
            if "presentation" in payload:
                begun = self.verifier.begin_presentation(VerifiablePresentation.from_json(payload["presentation"]))
            else:
                begun = self.verifier.begin_vc(VerifiableCredential.from_json(payload["credential"]))
            return begun.to_json()
        if operation == "verify-complete":
            responses = {k: (b64decode(v) if v is not None else None) for k, v in payload["responses"].items()}
            return {"report": self.verifier.complete(payload["session_id"], responses).to_json()}
        raise NotFound(f"unknown verification operation {operation!r}")


class ServiceVerifierClient:
    """Client for a hosted verifier; ``transport(operation, payload)`` returns the JSON reply."""

    def __init__(self, transport: Callable[[str, dict], dict]) -> None:
        self.transport = transport

    def presentation_nonce(self) -> bytes:
        return hex_decode(self.transport("presentation-nonce", {})["nonce"])

    def _run(self, payload: dict, holder_channel: HolderChannel | None) -> VerificationReport:
        begun = Begun.from_json(self.transport("verify-begin", payload))
        if begun.report is not None:
            return begun.report
        answers = answer_challenges(begun.challenges, holder_channel)
        reply = self.transport("verify-complete", {
            "session_id": begun.session_id,
            "responses": {k: (b64encode(v) if v is not None else None) for k, v in answers.items()},
        })
        return VerificationReport.from_json(reply["report"])

    def verify_vc(self, vc: VerifiableCredential, holder_channel: HolderChannel | None) -> VerificationReport:
        return self._run({"credential": vc.to_json()}, holder_channel)

    def verify_presentation(self, vp: VerifiablePresentation, holder_channel: HolderChannel | None) -> VerificationReport:
        return self._run({"presentation": vp.to_json()}, holder_channel)
