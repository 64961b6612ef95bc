"""Client-side proxies that talk to hosted services through a gateway transport.

Each proxy mirrors the method names of the in-process object it stands in
for, so wallets, issuers and verifiers accept either one.
"""

from __future__ import annotations

from typing import Any, Callable, Mapping

from ssiaas.crypto import Digest, Share, Signature
from ssiaas.ledger import LogicalClock
from ssiaas.platform.nameservice import ConsumerRecord
from ssiaas.vdr import (
    Challenge,
    ChallengeResponse,
    ConsumerCredentials,
    DidDocument,
    Proof,
    RegistrationReceipt,
    SubjectResolution,
    VerifiableCredential,
    auth_to_json,
    proof_from_json,
    proof_to_json,
)
from ssiaas.verification import ServiceVerifierClient


class _ServiceProxy:
    def __init__(self, transport, service_id: str, token: str | None = None) -> None:
        self.transport = transport
        self.service_id = service_id
        self.token = token

    def _call(self, operation: str, payload: dict | None = None) -> Any:
        return self.transport.call("external", self.service_id, operation, payload or {}, self.token)


class RegistryClient(_ServiceProxy):
    """Stand-in for :class:`ssiaas.vdr.Registry` on a hosted service."""

    clock: LogicalClock | None = None

    def request_challenge(self, did: str, document: DidDocument | None = None) -> Challenge:
        payload = {"did": did, "document": document.to_json() if document else None}
        return Challenge.from_json(self._call("request-challenge", payload))

    def did_registration(self, did: str, document: DidDocument, auth) -> RegistrationReceipt:
        reply = self._call("register-did", {"did": did, "document": document.to_json(), "auth": auth_to_json(auth)})
        return RegistrationReceipt.from_json(reply)

    def vc_registration(self, did: str, vc: VerifiableCredential, issuer_proof: Proof, holder_sig: Signature,
                        auth=None) -> RegistrationReceipt:
        reply = self._call("register-vc", {
            "did": did, "credential": vc.to_json(), "issuer_proof": proof_to_json(issuer_proof),
            "holder_signature": holder_sig.to_json(), "auth": auth_to_json(auth),
        })
        return RegistrationReceipt.from_json(reply)

    def update_subject(self, subject_id: str, new_payload_digest: Digest, credentials: ConsumerCredentials,
                       document: DidDocument | None = None) -> RegistrationReceipt:
        reply = self._call("update-subject", {
            "subject_id": subject_id, "payload_digest": bytes(new_payload_digest).hex(),
            "credentials": credentials.to_json(), "document": document.to_json() if document else None,
        })
        return RegistrationReceipt.from_json(reply)

    def revoke_subject(self, subject_id: str, credentials: ConsumerCredentials) -> RegistrationReceipt:
        reply = self._call("revoke-subject", {"subject_id": subject_id, "credentials": credentials.to_json()})
        return RegistrationReceipt.from_json(reply)

    def resolve(self, subject_id: str) -> SubjectResolution:
        return SubjectResolution.from_json(self._call("resolve", {"subject_id": subject_id}))

    def resolve_document(self, did: str) -> DidDocument:
        return DidDocument.from_json(self._call("resolve-document", {"did": did}))


class IssuerClient(_ServiceProxy):
    """Holder and entity side of a hosted issuer."""

    def request_did(self, public_key: bytes, proof_documents: Mapping[str, Any] | None = None) -> dict:
        return self._call("request-did", {"public_key": public_key.hex(), "proof_documents": dict(proof_documents or {})})

    def endorse_did(self, public_key: bytes, proof_documents: Mapping[str, Any] | None = None) -> tuple[str, DidDocument]:
        reply = self._call("endorse-did", {"public_key": public_key.hex(),
                                           "proof_documents": dict(proof_documents or {})})
        return reply["did"], DidDocument.from_json(reply["document"])

    def vc_challenge(self, subject_did: str) -> Challenge:
        return Challenge.from_json(self._call("vc-challenge", {"subject_did": subject_did}))

    def endorse_vc(self, subject_did: str, claims: Mapping[str, Any],
                   holder_channel: Callable[[str, bytes], bytes]) -> tuple[VerifiableCredential, Proof]:
        challenge = self.vc_challenge(subject_did)
        response = ChallengeResponse(challenge.challenge_id, holder_channel(subject_did, challenge.encoded))
        reply = self._call("endorse-vc", {"subject_did": subject_did, "claims": dict(claims),
                                          "auth": response.to_json()})
        return VerifiableCredential.from_json(reply["credential"]), proof_from_json(reply["proof"])

    def approve(self, request_id: str, entity_id: str, decision: bool, material: Signature | Share | None) -> dict:
        encoded = None
        if isinstance(material, Signature):
            encoded = {"kind": "signature", **material.to_json()}
        elif isinstance(material, Share):
            encoded = {"kind": "share", **material.to_json()}
        return self._call("approve", {"request_id": request_id, "entity_id": entity_id,
                                      "decision": bool(decision), "material": encoded})

    def status(self, request_id: str) -> dict:
        return self._call("issuer-status", {"request_id": request_id})

    def amend_vc(self, vc: VerifiableCredential, claims: Mapping[str, Any]) -> VerifiableCredential:
        """Re-sign ``vc`` with new claims and record the update; returns the amended credential."""
        reply = self._call("amend-vc", {"credential": vc.to_json(), "claims": dict(claims)})
        return VerifiableCredential.from_json(reply["credential"])

    def manage_subject(self, subject_id: str, action: str,
                       new_payload: VerifiableCredential | DidDocument | bytes | None = None) -> RegistrationReceipt:
        payload: dict[str, Any] = {"subject_id": subject_id, "action": action}
        if isinstance(new_payload, VerifiableCredential):
            payload["credential"] = new_payload.to_json()
        elif isinstance(new_payload, DidDocument):
            payload["document"] = new_payload.to_json()
        elif new_payload is not None:
            payload["payload_digest"] = bytes(new_payload).hex()
        return RegistrationReceipt.from_json(self._call("manage-subject", payload))


class NameServiceClient:
    """Read-only Name Service lookups over the external channel."""

    def __init__(self, transport) -> None:
        self.transport = transport

    def resolve_consumer(self, consumer_id: str) -> ConsumerRecord:
        reply = self.transport.call("external", "name-service", "resolve-consumer", {"consumer_id": consumer_id})
        return ConsumerRecord.from_json(reply)

    def resolve_service(self, service_id: str) -> str:
        return self.transport.call("external", "name-service", "resolve-service", {"service_id": service_id})["address"]


def hosted_verifier(transport, service_id: str) -> ServiceVerifierClient:
    """Verifier client for a service whose verification runs in service mode."""
    return ServiceVerifierClient(lambda op, payload: transport.call("external", service_id, op, payload))


def decode_material(obj: dict | None) -> Signature | Share | None:
    if obj is None:
        return None
    kind = obj.get("kind")
    body = {k: v for k, v in obj.items() if k != "kind"}
    if kind == "signature":
        return Signature.from_json(body)
    if kind == "share":
        return Share.from_json(body)
    raise ValueError(f"unknown approval material {kind!r}")


__all__ = ["IssuerClient", "NameServiceClient", "RegistryClient", "decode_material", "hosted_verifier"]
