"""Issuer agent: request review, DID generation and credential signing.

An issuer is either one entity holding PK_s/SK_s, or a group of entities
under one of two controllers:

``MULTISIGNATURE(t, n)``
    every entity holds its own keypair; a credential proof is the set of at
    least t+1 valid entity signatures over the credential digest, checked
    against the entity keys advertised for the consumer.

``SECRET_SHARING(t, n)``
    SK_s exists only encrypted under a key-encryption key whose Shamir shares
    are held by the entities. Any t shares rebuild the key-encryption key,
    SK_s is decrypted into a scratch buffer for exactly one signature and
    then overwritten. Verifiers see an ordinary signature under PK_s.
"""

from __future__ import annotations

import enum
import itertools
import os
import random
import threading
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping, Protocol

from ssiaas.crypto import (
    DEFAULT_ALGORITHM,
    Algorithm,
    Digest,
    KeyPair,
    Share,
    Signature,
    aggregate_signatures,
    canonical_json,
    decrypt,
    digest,
    encrypt,
    generate_keypair,
    reconstruct_secret,
    sign,
    split_secret,
    verify,
)
from ssiaas.crypto.encoding import hex_decode
from ssiaas.crypto.primitives import key_algorithm
from ssiaas.errors import (
    AuthenticationFailed,
    DecryptionFailure,
    DuplicateApproval,
    InconsistentShares,
    InsufficientShares,
    InvalidMaterial,
    InvalidThreshold,
    MalformedKey,
    MalformedSignature,
    PolicyNotSatisfied,
    RequestClosed,
    ReviewRejected,
    SigningFailure,
    UnknownEntity,
    UnknownRequest,
)
from ssiaas.ledger import LogicalClock
from ssiaas.vdr import (
    Challenge,
    ChallengeResponse,
    ChallengeStore,
    ConsumerCredentials,
    DidDocument,
    Proof,
    RegistrationReceipt,
    VerifiableCredential,
    VerificationMethod,
    draft_credential,
    is_did,
)
from ssiaas.platform.nameservice import ConsumerRecord

SINGLE_ENTITY = "issuer"
KEY_TYPES = {
    Algorithm.ECDSA_P256: "EcdsaSecp256r1VerificationKey2019",
    Algorithm.ECDSA_SECP256K1: "EcdsaSecp256k1VerificationKey2019",
}


class ControllerMode(str, enum.Enum):
    SINGLE = "single"
    MULTISIGNATURE = "multisignature"
    SECRET_SHARING = "secret-sharing"


class RequestKind(str, enum.Enum):
    DID_ISSUE = "DidIssue"
    VC_ISSUE = "VcIssue"


class RequestStatus(str, enum.Enum):
    PENDING = "pending"
    APPROVED = "approved"
    REJECTED = "rejected"
    ISSUED = "issued"


def required_approvals(mode: ControllerMode, threshold: int | None) -> int:
    if mode is ControllerMode.MULTISIGNATURE:
        return threshold + 1
    if mode is ControllerMode.SECRET_SHARING:
        return threshold
    return 1


@dataclass(frozen=True)
class IssuerProfile:
    consumer_id: str
    signing_public_key: bytes
    mode: ControllerMode = ControllerMode.SINGLE
    threshold: int | None = None
    total: int | None = None
    entity_ids: tuple[str, ...] = (SINGLE_ENTITY,)
    entity_keys: tuple[bytes, ...] = ()
    issues_dids: bool = True
    issues_vcs: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", ControllerMode(self.mode))
        if self.mode is ControllerMode.SINGLE:
            return
        t, n = self.threshold, self.total
        if t is None or n is None or not 1 <= t <= n:
            raise InvalidThreshold(f"controller needs 1 <= t <= n, got t={t} n={n}")
        if self.mode is ControllerMode.MULTISIGNATURE and t + 1 > n:
            raise InvalidThreshold(f"multisignature needs t+1 <= n signers, got t={t} n={n}")
        if len(self.entity_ids) != n or len(set(self.entity_ids)) != n:
            raise InvalidThreshold("entity list does not match n")

    @property
    def required(self) -> int:
        return required_approvals(self.mode, self.threshold)

    def to_json(self) -> dict:
        return {
            "consumer_id": self.consumer_id,
            "signing_public_key": self.signing_public_key.hex(),
            "mode": self.mode.value,
            "threshold": self.threshold,
            "total": self.total,
            "entity_ids": list(self.entity_ids),
            "entity_keys": [k.hex() for k in self.entity_keys],
            "issues_dids": self.issues_dids,
            "issues_vcs": self.issues_vcs,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "IssuerProfile":
        return cls(
            obj["consumer_id"], hex_decode(obj["signing_public_key"]), ControllerMode(obj["mode"]),
            obj.get("threshold"), obj.get("total"), tuple(obj["entity_ids"]),
            tuple(hex_decode(k) for k in obj.get("entity_keys", [])),
            obj.get("issues_dids", True), obj.get("issues_vcs", True),
        )


@dataclass
class Approval:
    entity_id: str
    decision: bool
    material: Signature | Share | None = None


@dataclass
class ReviewRequest:
    request_id: str
    kind: RequestKind
    payload: dict[str, Any]
    message: bytes
    reviewers: tuple[str, ...]
    subject_public_key: bytes | None = None
    draft: VerifiableCredential | None = None
    approvals: dict[str, Approval] = field(default_factory=dict)
    status: RequestStatus = RequestStatus.PENDING

    def to_json(self) -> dict:
        return {
            "request_id": self.request_id,
            "kind": self.kind.value,
            "payload": self.payload,
            "message": self.message.hex(),
            "reviewers": list(self.reviewers),
            "status": self.status.value,
            "draft": self.draft.to_json() if self.draft else None,
        }


@dataclass(frozen=True)
class ApprovalState:
    request_id: str
    status: RequestStatus
    approvals: int
    rejections: int
    required: int

    @property
    def satisfied(self) -> bool:
        return self.approvals >= self.required

    def to_json(self) -> dict:
        return {"request_id": self.request_id, "status": self.status.value, "approvals": self.approvals,
                "rejections": self.rejections, "required": self.required}


# -- review policies ------------------------------------------------------------
class ReviewPolicy(Protocol):
    def review(self, entity_id: str, request: ReviewRequest) -> bool: ...


class AutoApprove:
    def review(self, entity_id: str, request: ReviewRequest) -> bool:
        return True


class ScriptedPolicy:
    """Decisions looked up by entity id, optionally per request kind."""

    def __init__(self, decisions: Mapping[Any, bool] | Callable[[str, ReviewRequest], bool], default: bool = True):
        self.decisions = decisions
        self.default = default

    def review(self, entity_id: str, request: ReviewRequest) -> bool:
        if callable(self.decisions):
            return bool(self.decisions(entity_id, request))
        for key in ((entity_id, request.kind), (entity_id, request.kind.value), entity_id, request.kind):
            if key in self.decisions:
                return bool(self.decisions[key])
        return self.default


@dataclass
class EntityAgent:
    """One member of a multi-entity issuer, with its own material and policy."""

    entity_id: str
    keypair: KeyPair | None = None
    share: Share | None = None
    policy: ReviewPolicy = field(default_factory=AutoApprove)

    def respond(self, request: ReviewRequest) -> tuple[bool, Signature | Share | None]:
        if not self.policy.review(self.entity_id, request):
            return False, None
        if self.keypair is not None:
            return True, sign(self.keypair.secret_key, request.message)
        return True, self.share


def subject_did_for(method: str, subject_public_key: bytes, consumer_id: str, request_id: str) -> str:
    seed = subject_public_key + b"\x00" + consumer_id.encode() + b"\x00" + request_id.encode()
    return f"did:{method}:{digest(seed)[:16].hex()}"


class Issuer:
    """Issuer agent for one service consumer.

    ``registry`` is anything exposing the VDR methods (a local registry or a
    gateway client); it is used to authenticate subjects and to manage issued
    subjects. ``signing_keypair`` is PK_s/SK_s and ``management_keypair``
    signs consumer credentials for update and revoke.
    """

    def __init__(
        self,
        profile: IssuerProfile,
        *,
        registry: Any,
        did_method: str,
        management_keypair: KeyPair,
        signing_keypair: KeyPair | None = None,
        entities: Mapping[str, EntityAgent] | None = None,
        encrypted_signing_key: bytes | None = None,
        split_id: str | None = None,
        policy: ReviewPolicy | None = None,
        clock: LogicalClock | None = None,
        seed: int | None = None,
    ) -> None:
        self.profile = profile
        self.registry = registry
        self.did_method = did_method
        self.clock = clock or getattr(registry, "clock", None) or LogicalClock()
        self._management = management_keypair
        self._signing = signing_keypair if profile.mode is ControllerMode.SINGLE else None
        self.entities = dict(entities or {})
        self._encrypted_signing_key = encrypted_signing_key
        self._split_id = split_id
        self.policy = policy or AutoApprove()
        self._rng = random.Random(seed)
        self._requests: dict[str, ReviewRequest] = {}
        self._ids = itertools.count(1)
        self._challenges = ChallengeStore()
        self._lock = threading.RLock()
        self.last_key_buffer: bytearray | None = None

    # -- construction -----------------------------------------------------------
    @classmethod
    def create(
        cls,
        consumer_id: str,
        *,
        registry: Any,
        did_method: str,
        mode: ControllerMode | str = ControllerMode.SINGLE,
        threshold: int | None = None,
        total: int | None = None,
        algorithm: Algorithm | str = DEFAULT_ALGORITHM,
        seed: int | None = None,
        policy: ReviewPolicy | None = None,
        entity_policies: Mapping[str, ReviewPolicy] | None = None,
        clock: LogicalClock | None = None,
    ) -> "Issuer":
        """Generate all issuer key material for ``mode``."""
        mode = ControllerMode(mode)
        key_seed = None if seed is None else f"{consumer_id}/{seed}".encode()

        def keygen(label: str) -> KeyPair:
            return generate_keypair(algorithm, seed=None if key_seed is None else key_seed + b"/" + label.encode())

        signing = keygen("signing")
        management = keygen("management")
        entity_policies = dict(entity_policies or {})
        entities: dict[str, EntityAgent] = {}
        encrypted = split_id = None
        entity_keys: tuple[bytes, ...] = ()
        if mode is ControllerMode.SINGLE:
            entity_ids: tuple[str, ...] = (SINGLE_ENTITY,)
        else:
            if total is None:
                raise InvalidThreshold("multi-entity issuers need n")
            entity_ids = tuple(f"entity-{i}" for i in range(1, total + 1))
        if mode is ControllerMode.MULTISIGNATURE:
            pairs = [keygen(e) for e in entity_ids]
            entity_keys = tuple(p.public_key for p in pairs)
            for eid, pair in zip(entity_ids, pairs):
                entities[eid] = EntityAgent(eid, keypair=pair, policy=entity_policies.get(eid, AutoApprove()))
        elif mode is ControllerMode.SECRET_SHARING:
            if threshold is None or not 1 <= threshold <= total:
                raise InvalidThreshold(f"controller needs 1 <= t <= n, got t={threshold} n={total}")
            kek = os.urandom(32) if key_seed is None else digest(key_seed + b"/kek")
            encrypted = encrypt(bytes(kek), signing.secret_key, consumer_id.encode())
            randbelow = None if seed is None else random.Random(key_seed).randrange
            shares = split_secret(bytes(kek), threshold, total, randbelow=randbelow)
            split_id = shares[0].split_id
            for eid, share in zip(entity_ids, shares):
                entities[eid] = EntityAgent(eid, share=share, policy=entity_policies.get(eid, AutoApprove()))
            signing = KeyPair(signing.public_key, b"", signing.algorithm)
        profile = IssuerProfile(consumer_id, signing.public_key, mode, threshold, total, entity_ids, entity_keys)
        return cls(
            profile, registry=registry, did_method=did_method, management_keypair=management,
            signing_keypair=signing if mode is ControllerMode.SINGLE else None, entities=entities,
            encrypted_signing_key=encrypted, split_id=split_id, policy=policy, clock=clock, seed=seed,
        )

    def consumer_record(self, did: str | None = None, **meta: Any) -> ConsumerRecord:
        """Name Service record advertising this issuer's keys."""
        p = self.profile
        return ConsumerRecord(
            consumer_id=p.consumer_id,
            did=did or f"did:{self.did_method}:consumer-{p.consumer_id}",
            signing_key=p.signing_public_key,
            management_key=self._management.public_key,
            entity_keys=p.entity_keys,
            entity_threshold=p.threshold if p.mode is ControllerMode.MULTISIGNATURE else None,
            controller_mode=p.mode.value,
            meta=dict(meta),
        )

    @property
    def management_public_key(self) -> bytes:
        return self._management.public_key

    # -- requests ---------------------------------------------------------------
    def _select_reviewers(self) -> tuple[str, ...]:
        ids = list(self.profile.entity_ids)
        self._rng.shuffle(ids)
        return tuple(ids)

    def _open(self, kind: RequestKind, payload: dict, message: bytes, **extra: Any) -> ReviewRequest:
        with self._lock:
            request_id = f"req-{next(self._ids)}"
            request = ReviewRequest(request_id, kind, payload, message, self._select_reviewers(), **extra)
            self._requests[request_id] = request
            return request

    def request_did(self, subject_public_key: bytes, proof_documents: Mapping[str, Any] | None = None) -> ReviewRequest:
        if not self.profile.issues_dids:
            raise ReviewRejected("this issuer does not issue DIDs")
        payload = {"public_key": bytes(subject_public_key).hex(), "proof_documents": dict(proof_documents or {})}
        message = digest(canonical_json({"kind": RequestKind.DID_ISSUE.value, **payload}))
        return self._open(RequestKind.DID_ISSUE, payload, message, subject_public_key=bytes(subject_public_key))

    def vc_challenge(self, subject_did: str) -> Challenge:
        """First half of subject authentication: a nonce sealed to PK_u in R(D_u)."""
        document = self.registry.resolve_document(subject_did)
        return self._challenges.issue(subject_did, document.subject_public_key, self.clock.now)

    def request_vc(
        self,
        subject_did: str,
        claims: Mapping[str, Any],
        auth: ChallengeResponse | Callable[[str, bytes], bytes],
    ) -> ReviewRequest:
        """Open a credential request after authenticating the subject.

        ``auth`` is either the response to :meth:`vc_challenge` or a holder
        channel callable that answers the challenge directly.
        """
        if not self.profile.issues_vcs:
            raise ReviewRejected("this issuer does not issue credentials")
        document = self.registry.resolve_document(subject_did)
        if callable(auth):
            challenge = self._challenges.issue(subject_did, document.subject_public_key, self.clock.now)
            try:
                answer = auth(subject_did, challenge.encoded)
            except Exception as exc:
                raise AuthenticationFailed(f"holder did not answer the challenge: {exc}") from exc
            auth = ChallengeResponse(challenge.challenge_id, answer)
        self._challenges.check(auth, subject_did, document.subject_public_key, self.clock.now)
        draft = draft_credential(subject_did, claims, self.profile.consumer_id, self.profile.signing_public_key)
        payload = {"subject_did": subject_did, "claims": dict(claims)}
        return self._open(RequestKind.VC_ISSUE, payload, draft.signing_digest(), draft=draft)

    def _request(self, request_id: str) -> ReviewRequest:
        request = self._requests.get(request_id)
        if request is None:
            raise UnknownRequest(f"unknown request {request_id!r}")
        return request

    def _state(self, request: ReviewRequest) -> ApprovalState:
        yes = sum(1 for a in request.approvals.values() if a.decision)
        return ApprovalState(request.request_id, request.status, yes, len(request.approvals) - yes,
                             self.profile.required)

    def status(self, request_id: str) -> ApprovalState:
        with self._lock:
            return self._state(self._request(request_id))

    def request(self, request_id: str) -> ReviewRequest:
        return self._request(request_id)

    def _check_material(self, request: ReviewRequest, entity_id: str, material: Any) -> None:
        mode = self.profile.mode
        if mode is ControllerMode.MULTISIGNATURE:
            key = self.profile.entity_keys[self.profile.entity_ids.index(entity_id)]
            try:
                ok = isinstance(material, Signature) and verify(key, request.message, material)
            except (MalformedKey, MalformedSignature):
                ok = False
            if not ok:
                raise InvalidMaterial(f"partial signature of {entity_id} does not verify", entity=entity_id)
        elif mode is ControllerMode.SECRET_SHARING:
            index = self.profile.entity_ids.index(entity_id) + 1
            if not isinstance(material, Share) or (
                material.index, material.threshold, material.total, material.split_id
            ) != (index, self.profile.threshold, self.profile.total, self._split_id):
                raise InvalidMaterial(f"share of {entity_id} does not belong to this issuer", entity=entity_id)

    def collect_approval(self, request_id: str, entity_id: str, decision: bool, material: Any = None) -> ApprovalState:
        with self._lock:
            request = self._request(request_id)
            if request.status in (RequestStatus.ISSUED, RequestStatus.REJECTED):
                raise RequestClosed(f"request {request_id} is {request.status.value}")
            if entity_id not in self.profile.entity_ids:
                raise UnknownEntity(f"{entity_id!r} is not an entity of {self.profile.consumer_id}")
            if entity_id in request.approvals:
                raise DuplicateApproval(f"{entity_id} already decided on {request_id}")
            if decision:
                self._check_material(request, entity_id, material)
            request.approvals[entity_id] = Approval(entity_id, bool(decision), material if decision else None)
            state = self._state(request)
            if state.satisfied:
                request.status = RequestStatus.APPROVED
            elif len(self.profile.entity_ids) - state.rejections < state.required:
                request.status = RequestStatus.REJECTED
            return self._state(request)

    def run_review(self, request_id: str) -> ApprovalState:
        """Dispatch the request to reviewers in their selected order until decided."""
        request = self._request(request_id)
        state = self.status(request_id)
        for entity_id in request.reviewers:
            if state.status is not RequestStatus.PENDING:
                break
            if entity_id in request.approvals:
                continue
            if self.profile.mode is ControllerMode.SINGLE:
                decision, material = self.policy.review(entity_id, request), None
            else:
                decision, material = self.entities[entity_id].respond(request)
            state = self.collect_approval(request_id, entity_id, decision, material)
        return state

    def _close(self, request_id: str, kind: RequestKind) -> ReviewRequest:
        with self._lock:
            request = self._request(request_id)
            if request.kind is not kind:
                raise UnknownRequest(f"{request_id} is a {request.kind.value} request")
            if request.status is RequestStatus.ISSUED:
                raise RequestClosed(f"request {request_id} was already issued")
            if request.status is RequestStatus.REJECTED:
                raise ReviewRejected(f"request {request_id} was rejected by its reviewers")
            state = self._state(request)
            if not state.satisfied:
                raise PolicyNotSatisfied(
                    f"{state.approvals} approvals, {state.required} required", approvals=state.approvals,
                    required=state.required,
                )
            request.status = RequestStatus.ISSUED
            return request

    # -- issuance -------------------------------------------------------------------
    def issue_did(self, request_id: str) -> tuple[str, DidDocument]:
        request = self._close(request_id, RequestKind.DID_ISSUE)
        pk = request.subject_public_key
        did = subject_did_for(self.did_method, pk, self.profile.consumer_id, request.request_id)
        method = VerificationMethod(f"{did}#key-1", KEY_TYPES[key_algorithm(pk)], did, pk)
        return did, DidDocument(did, pk, self.profile.consumer_id, (method,))

    def issue_vc(self, request_id: str) -> tuple[VerifiableCredential, Proof]:
        with self._lock:
            request = self._close(request_id, RequestKind.VC_ISSUE)
            try:
                proof = self._sign(request)
            except Exception:
                request.status = RequestStatus.APPROVED
                raise
        return request.draft.with_proof(proof), proof

    def _sign(self, request: ReviewRequest) -> Proof:
        mode = self.profile.mode
        approved = [a for a in request.approvals.values() if a.decision]
        if mode is ControllerMode.SINGLE:
            return sign(self._signing.secret_key, request.message)
        if mode is ControllerMode.MULTISIGNATURE:
            keys = dict(zip(self.profile.entity_ids, self.profile.entity_keys))
            partials = [(keys[a.entity_id], a.material) for a in approved]
            return aggregate_signatures(request.message, partials, self.profile.threshold)
        return self._sign_with_shares([a.material for a in approved], request.message)

    def _sign_with_shares(self, shares: list[Share], message: bytes) -> Signature:
        try:
            kek = bytearray(reconstruct_secret(shares))
        except (InsufficientShares, InconsistentShares) as exc:
            raise SigningFailure(f"secret reconstruction failed: {exc}") from exc
        buffer = bytearray()
        try:
            try:
                buffer = bytearray(decrypt(bytes(kek), self._encrypted_signing_key, self.profile.consumer_id.encode()))
            except DecryptionFailure as exc:
                raise SigningFailure("reconstructed key does not open the signing key") from exc
            return sign(buffer, message)
        finally:
            for buf in (kek, buffer):
                for i in range(len(buf)):
                    buf[i] = 0
            self.last_key_buffer = buffer

    # -- convenience flows -------------------------------------------------------------
    def endorse_did(self, subject_public_key: bytes, proof_documents: Mapping[str, Any] | None = None):
        request = self.request_did(subject_public_key, proof_documents)
        self.run_review(request.request_id)
        return self.issue_did(request.request_id)

    def endorse_vc(self, subject_did: str, claims: Mapping[str, Any], holder_channel: Callable[[str, bytes], bytes]):
        request = self.request_vc(subject_did, claims, holder_channel)
        self.run_review(request.request_id)
        return self.issue_vc(request.request_id)

    # -- management -------------------------------------------------------------------
    def credentials_for(self, action: str, subject_id: str, payload: str = "") -> ConsumerCredentials:
        return ConsumerCredentials.create(self.profile.consumer_id, self._management, action, subject_id, payload,
                                          self.clock.now)

    def manage_subject(
        self,
        subject_id: str,
        action: str,
        new_payload: VerifiableCredential | DidDocument | bytes | None = None,
    ) -> RegistrationReceipt:
        action = action.lower()
        if action == "revoke":
            return self.registry.revoke_subject(subject_id, self.credentials_for("revoke", subject_id))
        if action != "update":
            raise ValueError(f"unknown management action {action!r}")
        document = None
        if isinstance(new_payload, DidDocument):
            document, payload_digest = new_payload, new_payload.digest()
        elif isinstance(new_payload, VerifiableCredential):
            payload_digest = new_payload.credential_digest()
        elif new_payload is not None:
            payload_digest = Digest(new_payload)
        else:
            raise ValueError("update needs a new payload")
        creds = self.credentials_for("update", subject_id, payload_digest.hex())
        if is_did(subject_id):
            return self.registry.update_subject(subject_id, payload_digest, creds, document)
        return self.registry.update_subject(subject_id, payload_digest, creds)

    def amend_vc(self, vc: VerifiableCredential, claims: Mapping[str, Any]) -> tuple[VerifiableCredential, Proof]:
        """Sign new claims under an existing credential id.

        The result is what :meth:`manage_subject` records with ``update``; the
        holder replaces its stored copy with it.
        """
        draft = replace(vc, claims=dict(claims), proof=None)
        request = self._open(RequestKind.VC_ISSUE, {"subject_did": vc.subject_did, "claims": dict(claims)},
                             draft.signing_digest(), draft=draft)
        self.run_review(request.request_id)
        return self.issue_vc(request.request_id)
