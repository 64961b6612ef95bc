"""Verifiable data registry: DID and credential registration over any ledger.

The registry enforces the server side of both registration protocols and
keeps the ledger minimal: only subject identifiers and digests are appended.
DID documents are held off-ledger in a content-addressed store so that the
current document of a DID is always the one whose digest is on the ledger.
"""

from __future__ import annotations

import hmac
import itertools
import re
import threading
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Any, Callable, Mapping, Union

from ssiaas.crypto import (
    Digest,
    KeyPair,
    Signature,
    SignatureSet,
    canonical_json,
    digest,
    encode_challenge,
    new_nonce,
    sign,
    verify,
    verify_signature_set,
)
from ssiaas.crypto.encoding import b64decode, b64encode, hex_decode
from ssiaas.crypto.primitives import _load_public
from ssiaas.errors import (
    AlreadyRevoked,
    AuthenticationFailed,
    DuplicateCredential,
    DuplicateDid,
    InvalidDocument,
    InvalidIssuerProof,
    MalformedKey,
    MalformedSignature,
    MasterUnavailable,
    NotFound,
    SubjectMismatch,
    SubjectNotFound,
    SubjectRevoked,
    Unauthorized,
    UnrecognizedIssuer,
)
from ssiaas.ledger import EventKind, Ledger, LedgerRecord, SubjectStatus, SubLedger

if TYPE_CHECKING:
    from ssiaas.platform.nameservice import ConsumerRecord, NameService

DID_PATTERN = re.compile(r"^did:([a-z0-9]+):([A-Za-z0-9._%-]+(?::[A-Za-z0-9._%-]+)*)$")
CHALLENGE_TTL = 60
CREDENTIAL_TTL = 60

Proof = Union[Signature, SignatureSet]


def parse_did(did: str) -> tuple[str, str]:
    match = DID_PATTERN.match(did or "")
    if not match:
        raise InvalidDocument(f"malformed DID {did!r}")
    return match.group(1), match.group(2)


def is_did(subject_id: str) -> bool:
    return subject_id.startswith("did:")


def well_formed_key(public_key: bytes) -> bool:
    try:
        _load_public(bytes(public_key))
    except MalformedKey:
        return False
    return True


# -- documents ----------------------------------------------------------------
@dataclass(frozen=True)
class VerificationMethod:
    id: str
    type: str
    controller: str
    public_key: bytes

    def to_json(self) -> dict:
        return {"id": self.id, "type": self.type, "controller": self.controller, "publicKeyHex": self.public_key.hex()}

    @classmethod
    def from_json(cls, obj: dict) -> "VerificationMethod":
        return cls(obj["id"], obj["type"], obj["controller"], hex_decode(obj["publicKeyHex"]))


@dataclass(frozen=True)
class DidDocument:
    did: str
    subject_public_key: bytes
    controller: str
    verification_methods: tuple[VerificationMethod, ...] = ()

    @property
    def method(self) -> str:
        return parse_did(self.did)[0]

    def to_json(self) -> dict:
        return {
            "id": self.did,
            "subjectPublicKey": self.subject_public_key.hex(),
            "controller": self.controller,
            "verificationMethod": [m.to_json() for m in self.verification_methods],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DidDocument":
        try:
            return cls(
                obj["id"],
                hex_decode(obj["subjectPublicKey"]),
                obj["controller"],
                tuple(VerificationMethod.from_json(m) for m in obj.get("verificationMethod", [])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidDocument(f"bad DID document: {exc}") from exc

    def digest(self) -> Digest:
        return digest(canonical_json(self.to_json()))


def proof_to_json(proof: Proof | None) -> dict | None:
    if proof is None:
        return None
    if isinstance(proof, SignatureSet):
        return {"type": "signature-set", **proof.to_json()}
    return {"type": "signature", **proof.to_json()}


def proof_from_json(obj: dict | None) -> Proof | None:
    if obj is None:
        return None
    if obj.get("type") == "signature-set":
        return SignatureSet.from_json(obj)
    if obj.get("type") == "signature":
        return Signature.from_json(obj)
    raise MalformedSignature(f"unknown proof type {obj.get('type')!r}")


@dataclass(frozen=True)
class VerifiableCredential:
    vc_id: str
    subject_did: str
    claims: Mapping[str, Any]
    issuer_id: str
    issuer_public_key: bytes
    proof: Proof | None = None

    def body_json(self) -> dict:
        return {
            "id": self.vc_id,
            "credentialSubject": {"id": self.subject_did, "claims": dict(self.claims)},
            "issuer": {"id": self.issuer_id, "publicKey": self.issuer_public_key.hex()},
        }

    def to_json(self) -> dict:
        return {**self.body_json(), "proof": proof_to_json(self.proof)}

    @classmethod
    def from_json(cls, obj: dict) -> "VerifiableCredential":
        try:
            return cls(
                obj["id"],
                obj["credentialSubject"]["id"],
                dict(obj["credentialSubject"]["claims"]),
                obj["issuer"]["id"],
                hex_decode(obj["issuer"]["publicKey"]),
                proof_from_json(obj.get("proof")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidDocument(f"bad credential: {exc}") from exc

    def signing_digest(self) -> Digest:
        """Digest of the credential without its proof; what issuer and holder sign."""
        return digest(canonical_json(self.body_json()))

    def credential_digest(self) -> Digest:
        """Digest of the full credential, proof included; what the ledger stores."""
        return digest(canonical_json(self.to_json()))

    def with_proof(self, proof: Proof) -> "VerifiableCredential":
        return replace(self, proof=proof)


def compute_vc_id(subject_did: str, claims: Mapping[str, Any], issuer_id: str, issuer_public_key: bytes) -> str:
    body = {
        "credentialSubject": {"id": subject_did, "claims": dict(claims)},
        "issuer": {"id": issuer_id, "publicKey": issuer_public_key.hex()},
    }
    return digest(canonical_json(body)).hex()


def draft_credential(subject_did: str, claims: Mapping[str, Any], issuer_id: str, issuer_public_key: bytes) -> VerifiableCredential:
    return VerifiableCredential(
        compute_vc_id(subject_did, claims, issuer_id, issuer_public_key), subject_did, dict(claims),
        issuer_id, issuer_public_key,
    )


def check_issuer_proof(vc: VerifiableCredential, proof: Proof | None, issuer: "ConsumerRecord") -> bool:
    """Verify a credential proof against the issuer's registered keys."""
    message = vc.signing_digest()
    try:
        if isinstance(proof, SignatureSet):
            if issuer.entity_threshold is None:
                return False
            return verify_signature_set(proof, message, issuer.entity_keys, issuer.entity_threshold)
        if isinstance(proof, Signature):
            return verify(issuer.signing_key, message, proof)
    except (MalformedKey, MalformedSignature):
        return False
    return False


# -- protocol messages --------------------------------------------------------
@dataclass(frozen=True)
class RegistrationReceipt:
    record: LedgerRecord
    finalized: bool

    def to_json(self) -> dict:
        return {"record": self.record.to_json(), "finalized": self.finalized}

    @classmethod
    def from_json(cls, obj: dict) -> "RegistrationReceipt":
        return cls(LedgerRecord.from_json(obj["record"]), bool(obj["finalized"]))


@dataclass(frozen=True)
class Challenge:
    challenge_id: str
    subject_did: str
    encoded: bytes
    expires_at: int

    def to_json(self) -> dict:
        return {"challenge_id": self.challenge_id, "subject_did": self.subject_did,
                "encoded": b64encode(self.encoded), "expires_at": self.expires_at}

    @classmethod
    def from_json(cls, obj: dict) -> "Challenge":
        return cls(obj["challenge_id"], obj["subject_did"], b64decode(obj["encoded"]), int(obj["expires_at"]))


@dataclass(frozen=True)
class ChallengeResponse:
    challenge_id: str
    response: bytes

    def to_json(self) -> dict:
        return {"type": "challenge", "challenge_id": self.challenge_id, "response": b64encode(self.response)}


@dataclass(frozen=True)
class DelegatedSignature:
    signature: Signature

    def to_json(self) -> dict:
        return {"type": "delegated", "signature": self.signature.to_json()}


Auth = Union[ChallengeResponse, DelegatedSignature, None]


def auth_from_json(obj: dict | None) -> Auth:
    if obj is None:
        return None
    if obj.get("type") == "challenge":
        return ChallengeResponse(obj["challenge_id"], b64decode(obj["response"]))
    if obj.get("type") == "delegated":
        return DelegatedSignature(Signature.from_json(obj["signature"]))
    raise AuthenticationFailed(f"unknown auth type {obj.get('type')!r}")


def auth_to_json(auth: Auth) -> dict | None:
    return None if auth is None else auth.to_json()


@dataclass(frozen=True)
class ConsumerCredentials:
    """A service consumer's signed authorization of one management action."""

    consumer_id: str
    action: str
    subject_id: str
    payload: str
    issued_at: int
    signature: Signature

    @staticmethod
    def message(consumer_id: str, action: str, subject_id: str, payload: str, issued_at: int) -> bytes:
        return canonical_json({"consumer": consumer_id, "action": action, "subject": subject_id,
                               "payload": payload, "issued_at": issued_at})

    @classmethod
    def create(cls, consumer_id: str, key: KeyPair, action: str, subject_id: str, payload: str, issued_at: int):
        sig = sign(key.secret_key, cls.message(consumer_id, action, subject_id, payload, issued_at))
        return cls(consumer_id, action, subject_id, payload, issued_at, sig)

    def to_json(self) -> dict:
        return {"consumer_id": self.consumer_id, "action": self.action, "subject_id": self.subject_id,
                "payload": self.payload, "issued_at": self.issued_at, "signature": self.signature.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "ConsumerCredentials":
        return cls(obj["consumer_id"], obj["action"], obj["subject_id"], obj["payload"], int(obj["issued_at"]),
                   Signature.from_json(obj["signature"]))


@dataclass(frozen=True)
class SubjectResolution:
    status: SubjectStatus | None
    payload_digest: Digest | None
    history: tuple[LedgerRecord, ...] = ()

    def to_json(self) -> dict:
        return {
            "status": self.status.value if self.status else None,
            "payload_digest": self.payload_digest.hex() if self.payload_digest else None,
            "history": [r.to_json() for r in self.history],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SubjectResolution":
        return cls(
            SubjectStatus(obj["status"]) if obj.get("status") else None,
            Digest.from_hex(obj["payload_digest"]) if obj.get("payload_digest") else None,
            tuple(LedgerRecord.from_json(r) for r in obj.get("history", [])),
        )


class ChallengeStore:
    """Single-use nonces with an expiry, keyed by challenge id."""

    def __init__(self, ttl: int = CHALLENGE_TTL) -> None:
        self.ttl = ttl
        self._pending: dict[str, tuple[str, bytes, bytes, int]] = {}
        self._ids = itertools.count(1)
        self._lock = threading.Lock()

    def issue(self, subject_did: str, public_key: bytes, now: int) -> Challenge:
        nonce = new_nonce()
        encoded = encode_challenge(nonce, public_key)
        with self._lock:
            challenge_id = f"ch-{next(self._ids)}-{new_nonce(4).hex()}"
            self._pending[challenge_id] = (subject_did, public_key, nonce, now + self.ttl)
        return Challenge(challenge_id, subject_did, encoded, now + self.ttl)

    def check(self, response: ChallengeResponse, subject_did: str, public_key: bytes, now: int) -> None:
        with self._lock:
            entry = self._pending.pop(response.challenge_id, None)
        if entry is None:
            raise AuthenticationFailed("unknown or already used challenge")
        did, key, nonce, expires = entry
        if now > expires:
            raise AuthenticationFailed("challenge expired")
        if did != subject_did or key != public_key:
            raise AuthenticationFailed("challenge was issued for a different subject")
        if not hmac.compare_digest(nonce, response.response):
            raise AuthenticationFailed("challenge response does not match")


# -- registry -----------------------------------------------------------------
@dataclass
class RegistryExport:
    records: list[LedgerRecord]
    documents: list[DidDocument]
    controllers: dict[str, str]


class Registry:
    def __init__(
        self,
        ledger: Ledger,
        writer_key: KeyPair,
        name_service: "NameService",
        *,
        did_method: str | None = None,
        challenge_ttl: int = CHALLENGE_TTL,
        credential_ttl: int = CREDENTIAL_TTL,
        on_event: Callable[[str, dict], None] | None = None,
    ) -> None:
        self.ledger = ledger
        self.clock = ledger.clock
        self.writer = ledger.connect(writer_key)
        self.name_service = name_service
        self.did_method = did_method or ledger.config.did_method
        self.credential_ttl = credential_ttl
        self.challenges = ChallengeStore(challenge_ttl)
        self.on_event = on_event
        self._documents: dict[Digest, DidDocument] = {}
        self._controllers: dict[str, str] = {}
        self._lock = threading.RLock()

    @property
    def writer_fingerprint(self) -> str:
        return self.writer.fingerprint

    # -- helpers --------------------------------------------------------------
    def _emit(self, kind: str, detail: dict) -> None:
        if self.on_event is not None:
            self.on_event(kind, detail)

    def _append(self, kind: EventKind, subject_id: str, payload: Digest) -> RegistrationReceipt:
        record = self.writer.append(kind, subject_id, payload)
        self._emit("LedgerAppend", {"event_kind": kind.value, "subject_id": subject_id,
                                    "sequence": record.sequence, "submitter": record.submitter})
        self._anchor()
        return RegistrationReceipt(record, True)

    def _anchor(self, drain: bool = False) -> None:
        """Send the next full bundle; with ``drain``, every pending record including a short tail."""
        if not isinstance(self.ledger, SubLedger):
            return
        sent = []
        try:
            while (bundle := self.ledger.anchor_pending()) is not None and bundle not in sent:
                sent.append(bundle)
                if not drain:
                    break
            if drain and (bundle := self.ledger.anchor_pending(force=True)) is not None and bundle not in sent:
                sent.append(bundle)
        except MasterUnavailable as exc:
            self._emit("NodeStatus", {"anchor_healthy": False, "detail": str(exc)})
        for bundle in sent:
            self._emit("Anchor", {"bundle_id": bundle.bundle_id, "covered_range": list(bundle.covered_range),
                                  "master_receipt": bundle.master_receipt})

    def _consumer(self, consumer_id: str) -> "ConsumerRecord":
        try:
            return self.name_service.resolve_consumer(consumer_id)
        except NotFound:
            raise Unauthorized(f"unknown service consumer {consumer_id!r}") from None

    def _authenticate(self, did: str, public_key: bytes, auth: Auth, delegated_message: bytes) -> None:
        if isinstance(auth, ChallengeResponse):
            self.challenges.check(auth, did, public_key, self.clock.now)
        elif isinstance(auth, DelegatedSignature):
            try:
                ok = verify(public_key, delegated_message, auth.signature)
            except (MalformedKey, MalformedSignature):
                ok = False
            if not ok:
                raise AuthenticationFailed("delegated signature does not verify under the subject key")
        else:
            raise AuthenticationFailed("no authentication supplied")

    def _check_consumer_credentials(self, subject_id: str, action: str, payload: str,
                                    credentials: ConsumerCredentials) -> None:
        controller = self._controllers.get(subject_id)
        if controller is None or credentials.consumer_id != controller:
            raise Unauthorized(f"{credentials.consumer_id!r} does not control {subject_id}")
        if (credentials.action, credentials.subject_id, credentials.payload) != (action, subject_id, payload):
            raise Unauthorized("credentials were issued for a different action")
        if not 0 <= self.clock.now - credentials.issued_at <= self.credential_ttl:
            raise Unauthorized("consumer credentials are stale")
        consumer = self._consumer(credentials.consumer_id)
        message = ConsumerCredentials.message(credentials.consumer_id, action, subject_id, payload,
                                              credentials.issued_at)
        try:
            ok = verify(consumer.management_key, message, credentials.signature)
        except (MalformedKey, MalformedSignature):
            ok = False
        if not ok:
            raise Unauthorized("consumer credentials do not verify")

    # -- challenges -------------------------------------------------------------
    def request_challenge(self, did: str, document: DidDocument | None = None) -> Challenge:
        """Issue a single-use challenge for ``did``.

        For a DID that is not registered yet the caller supplies the document
        being registered; otherwise the current on-ledger document is used.
        """
        if document is None:
            document = self.resolve_document(did)
        elif document.did != did:
            raise InvalidDocument("document does not describe this DID")
        return self.challenges.issue(did, document.subject_public_key, self.clock.now)

    # -- registration -------------------------------------------------------------
    def did_registration(self, did: str, document: DidDocument, auth: Auth) -> RegistrationReceipt:
        method, _ = parse_did(did)
        if document.did != did:
            raise InvalidDocument("document id differs from the DID being registered")
        if method != self.did_method:
            raise InvalidDocument(f"DID method {method!r} does not belong to this registry ({self.did_method!r})")
        if not well_formed_key(document.subject_public_key):
            raise InvalidDocument("subject public key is malformed")
        try:
            self.name_service.resolve_consumer(document.controller)
        except NotFound:
            raise InvalidDocument(f"controller {document.controller!r} is not a known consumer") from None
        self._authenticate(did, document.subject_public_key, auth, did.encode())
        with self._lock:
            latest = self.ledger.query_latest(did)
            if latest is not None and latest.status is SubjectStatus.ACTIVE:
                raise DuplicateDid(f"{did} is already registered")
            payload = document.digest()
            receipt = self._append(EventKind.DID_REGISTERED, did, payload)
            self._documents[payload] = document
            self._controllers[did] = document.controller
        return receipt

    def vc_registration(
        self,
        did: str,
        vc: VerifiableCredential,
        issuer_proof: Proof,
        holder_sig: Signature,
        auth: Auth = None,
    ) -> RegistrationReceipt:
        document = self.resolve_document(did)
        if vc.proof is not None and vc.proof != issuer_proof:
            raise InvalidIssuerProof("proof attached to the credential differs from the submitted proof")
        vc = vc.with_proof(issuer_proof)
        # holder authentication: challenge when supplied, and the holder signature always
        if auth is not None:
            self._authenticate(did, document.subject_public_key, auth, b"")
        try:
            holder_ok = verify(document.subject_public_key, vc.signing_digest(), holder_sig)
        except (MalformedKey, MalformedSignature):
            holder_ok = False
        if not holder_ok:
            raise AuthenticationFailed("holder signature over the credential does not verify")
        if vc.subject_did != did:
            raise SubjectMismatch(f"credential subject {vc.subject_did} is not the authenticated {did}")
        issuer = self.name_service.consumer_by_key(vc.issuer_public_key)
        if issuer is None:
            raise UnrecognizedIssuer("issuer public key points to an unrecognized service consumer")
        if not check_issuer_proof(vc, issuer_proof, issuer):
            raise InvalidIssuerProof("issuer proof does not verify under the registered issuer keys")
        if vc.vc_id != compute_vc_id(vc.subject_did, vc.claims, vc.issuer_id, vc.issuer_public_key):
            raise InvalidDocument("credential id is not derived from its content")
        with self._lock:
            latest = self.ledger.query_latest(vc.vc_id)
            if latest is not None and latest.status is SubjectStatus.ACTIVE:
                raise DuplicateCredential(f"credential {vc.vc_id} is already registered")
            receipt = self._append(EventKind.VC_REGISTERED, vc.vc_id, vc.credential_digest())
            self._controllers[vc.vc_id] = issuer.consumer_id
        return receipt

    # -- management -----------------------------------------------------------
    def update_subject(
        self,
        subject_id: str,
        new_payload_digest: Digest,
        credentials: ConsumerCredentials,
        document: DidDocument | None = None,
    ) -> RegistrationReceipt:
        with self._lock:
            latest = self.ledger.query_latest(subject_id)
            if latest is None:
                raise SubjectNotFound(f"{subject_id} is not registered")
            self._check_consumer_credentials(subject_id, "update", new_payload_digest.hex(), credentials)
            if latest.status is SubjectStatus.REVOKED:
                raise SubjectRevoked(f"{subject_id} is revoked")
            if document is not None:
                if document.did != subject_id or document.digest() != new_payload_digest:
                    raise InvalidDocument("document does not match the new digest")
                self._documents[new_payload_digest] = document
            kind = EventKind.DID_UPDATED if is_did(subject_id) else EventKind.VC_UPDATED
            return self._append(kind, subject_id, Digest(new_payload_digest))

    def revoke_subject(self, subject_id: str, credentials: ConsumerCredentials) -> RegistrationReceipt:
        with self._lock:
            latest = self.ledger.query_latest(subject_id)
            if latest is None:
                raise SubjectNotFound(f"{subject_id} is not registered")
            self._check_consumer_credentials(subject_id, "revoke", "", credentials)
            if latest.status is SubjectStatus.REVOKED:
                raise AlreadyRevoked(f"{subject_id} is already revoked")
            return self._append(EventKind.REVOKED, subject_id, latest.latest.payload_digest)

    def controller_of(self, subject_id: str) -> str | None:
        return self._controllers.get(subject_id)

    # -- queries --------------------------------------------------------------
    def resolve(self, subject_id: str) -> SubjectResolution:
        history = tuple(self.ledger.history(subject_id))
        if not history:
            return SubjectResolution(None, None, ())
        latest = self.ledger.query_latest(subject_id)
        return SubjectResolution(latest.status, latest.latest.payload_digest, history)

    def resolve_document(self, did: str) -> DidDocument:
        latest = self.ledger.query_latest(did)
        if latest is None:
            raise SubjectNotFound(f"{did} is not registered")
        if latest.status is SubjectStatus.REVOKED:
            raise SubjectRevoked(f"{did} is revoked")
        document = self._documents.get(latest.latest.payload_digest)
        if document is None or document.digest() != latest.latest.payload_digest or document.did != did:
            raise InvalidDocument(f"no document matching the on-ledger digest of {did}")
        return document

    # -- migration ------------------------------------------------------------
    def export_state(self) -> RegistryExport:
        records = [r for r in self.ledger.records()
                   if r.submitter == self.writer_fingerprint and r.event_kind is not EventKind.ANCHOR_BUNDLE]
        return RegistryExport(records, list(self._documents.values()), dict(self._controllers))

    def replay(self, export: RegistryExport, on_progress: Callable[[int], None] | None = None) -> int:
        """Append every exported event in order; returns the count replayed."""
        with self._lock:
            for doc in export.documents:
                self._documents[doc.digest()] = doc
            self._controllers.update(export.controllers)
            last = None
            for position, record in enumerate(export.records):
                if on_progress is not None:
                    on_progress(position)
                last = self.writer.submit(record.event_kind, record.subject_id, record.payload_digest)
            if last is not None:
                self.ledger.wait_for(last)
                self._emit("LedgerAppend", {"event_kind": "Replay", "count": len(export.records)})
                self._anchor(drain=True)
        return len(export.records)
