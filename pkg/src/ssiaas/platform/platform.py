"""The management plane: builds, runs, migrates and stops SSI services.

A :class:`Platform` owns one logical clock, the Name Service, the Monitor,
the Gateway and the shared ledgers. The permissionless public ledger is
shared by every permissionless service and is also the master that
sub-ledgers anchor to; the consortium ledger is shared by every CDL service
under one global authorization system. Private ledgers and sub-ledgers are
created per service.
"""

from __future__ import annotations

import enum
import itertools
import random
import secrets
import threading
from dataclasses import dataclass, field
from typing import Any, Callable

from ssiaas.crypto import Digest, KeyPair, Signature, generate_keypair
from ssiaas.endorsement import Issuer, ReviewPolicy
from ssiaas.errors import (
    BadRequest,
    BuildFailure,
    DuplicateService,
    MigrationFailure,
    NotFound,
    SchemaError,
    SpecSyntaxError,
    SSIError,
    Unauthenticated,
    UnknownConsumer,
    UnknownService,
)
from ssiaas.ledger import AuthorizationSystem, Ledger, LedgerConfig, LedgerPattern, LogicalClock, SubLedger
from ssiaas.platform.clients import decode_material
from ssiaas.platform.gateway import Channel, Gateway, LocalTransport, Principal
from ssiaas.platform.monitor import Monitor, MonitorKind
from ssiaas.platform.nameservice import ConsumerRecord, NameService
from ssiaas.platform.spec import Diagnostic, ServiceSpec, parse_spec
from ssiaas.vdr import (
    ConsumerCredentials,
    DidDocument,
    Registry,
    RegistryExport,
    VerifiableCredential,
    auth_from_json,
    proof_from_json,
    proof_to_json,
)
from ssiaas.verification import VerificationService, Verifier, VerifierConfig

PUBLIC_DID_METHOD = "ssipl"
PRIVILEGED_OPERATIONS = frozenset({"manage-subject", "amend-vc", "export"})


class ServiceStatus(str, enum.Enum):
    BUILDING = "Building"
    RUNNING = "Running"
    STOPPED = "Stopped"
    UNHEALTHY = "Unhealthy"


@dataclass
class ServiceInstance:
    service_id: str
    spec: ServiceSpec
    address: str
    writer_key: KeyPair
    ledger: Ledger | None = None
    registry: Registry | None = None
    issuer: Issuer | None = None
    verifier: Verifier | None = None
    verification_service: VerificationService | None = None
    status: ServiceStatus = ServiceStatus.BUILDING
    steps: list[str] = field(default_factory=list)

    @property
    def running(self) -> bool:
        return self.status is ServiceStatus.RUNNING

    def probes(self, name_service: NameService) -> dict[str, bool]:
        try:
            addressed = name_service.resolve_service(self.service_id) == self.address
        except SSIError:
            addressed = False
        return {
            "ledger": bool(self.ledger is not None and self.ledger.available),
            "registry": self.registry is not None,
            "issuer": self.issuer is not None,
            "verifier": self.verifier is not None,
            "address": addressed,
        }

    def client_config(self) -> dict:
        """Configuration bundles handed to wallet and verifier applications."""
        s = self.spec
        return {
            "service_id": self.service_id,
            "did_method": s.did_method,
            "data_pattern": s.data_pattern,
            "wallet": {"pattern": s.wallet_pattern, "encryption": s.wallet_encryption, "backend": s.wallet_backend},
            "endorsement": {"mode": s.endorsement_mode, "threshold": s.threshold, "entities": s.entities,
                            "consumer_id": s.consumer_id},
            "verifier": {"mode": s.verification_mode, "nonce_ttl": s.nonce_ttl},
        }

    def describe(self) -> dict:
        return {"service_id": self.service_id, "service_name": self.spec.service_name,
                "consumer_id": self.spec.consumer_id, "status": self.status.value, "address": self.address,
                "steps": list(self.steps), "config": self.client_config()}

    # -- external operations -----------------------------------------------------
    def handle(self, operation: str, payload: dict, principal: Principal | None) -> Any:
        handler = _SERVICE_OPERATIONS.get(operation)
        if handler is None:
            raise NotFound(f"unknown service operation {operation!r}")
        if operation in PRIVILEGED_OPERATIONS and not _owns(principal, self.spec.consumer_id):
            raise Unauthenticated(f"{operation} needs the token of {self.spec.consumer_id}")
        return handler(self, payload)


def _owns(principal: Principal | None, consumer_id: str) -> bool:
    return principal is not None and (principal.role == "provider" or principal.consumer_id == consumer_id)


def _doc(obj: dict | None) -> DidDocument | None:
    return DidDocument.from_json(obj) if obj else None


def _op_manage(s: ServiceInstance, p: dict) -> dict:
    digest_hex = p.get("payload_digest")
    payload = Digest.from_hex(digest_hex) if digest_hex else None
    if p.get("document"):
        payload = DidDocument.from_json(p["document"])
    elif p.get("credential"):
        payload = VerifiableCredential.from_json(p["credential"])
    return s.issuer.manage_subject(p["subject_id"], p["action"], payload).to_json()


def _op_amend_vc(s: ServiceInstance, p: dict) -> dict:
    vc, proof = s.issuer.amend_vc(VerifiableCredential.from_json(p["credential"]), p["claims"])
    receipt = s.issuer.manage_subject(vc.vc_id, "update", vc)
    return {"credential": vc.to_json(), "proof": proof_to_json(proof), "receipt": receipt.to_json()}


def _op_verify(operation: str) -> Callable[[ServiceInstance, dict], dict]:
    def run(s: ServiceInstance, p: dict) -> dict:
        if s.verification_service is None:
            raise NotFound("verification for this service runs in host mode")
        return s.verification_service.handle(operation, p)
    return run


def _op_endorse_vc(s: ServiceInstance, p: dict) -> dict:
    request = s.issuer.request_vc(p["subject_did"], p["claims"], auth_from_json(p["auth"]))
    s.issuer.run_review(request.request_id)
    vc, proof = s.issuer.issue_vc(request.request_id)
    return {"credential": vc.to_json(), "proof": proof_to_json(proof)}


def _op_issue_vc(s: ServiceInstance, p: dict) -> dict:
    vc, proof = s.issuer.issue_vc(p["request_id"])
    return {"credential": vc.to_json(), "proof": proof_to_json(proof)}


def _op_issue_did(s: ServiceInstance, p: dict) -> dict:
    did, document = s.issuer.issue_did(p["request_id"])
    return {"did": did, "document": document.to_json()}


def _op_endorse_did(s: ServiceInstance, p: dict) -> dict:
    did, document = s.issuer.endorse_did(bytes.fromhex(p["public_key"]), p.get("proof_documents"))
    return {"did": did, "document": document.to_json()}


_SERVICE_OPERATIONS: dict[str, Callable[[ServiceInstance, dict], Any]] = {
    # data component
    "request-challenge": lambda s, p: s.registry.request_challenge(p["did"], _doc(p.get("document"))).to_json(),
    "register-did": lambda s, p: s.registry.did_registration(
        p["did"], DidDocument.from_json(p["document"]), auth_from_json(p.get("auth"))).to_json(),
    "register-vc": lambda s, p: s.registry.vc_registration(
        p["did"], VerifiableCredential.from_json(p["credential"]), proof_from_json(p["issuer_proof"]),
        Signature.from_json(p["holder_signature"]), auth_from_json(p.get("auth"))).to_json(),
    "update-subject": lambda s, p: s.registry.update_subject(
        p["subject_id"], Digest.from_hex(p["payload_digest"]), ConsumerCredentials.from_json(p["credentials"]),
        _doc(p.get("document"))).to_json(),
    "revoke-subject": lambda s, p: s.registry.revoke_subject(
        p["subject_id"], ConsumerCredentials.from_json(p["credentials"])).to_json(),
    "resolve": lambda s, p: s.registry.resolve(p["subject_id"]).to_json(),
    "resolve-document": lambda s, p: s.registry.resolve_document(p["did"]).to_json(),
    "export": lambda s, p: {"ndjson": s.ledger.export_ndjson(submitter=s.writer_key.fingerprint)},
    # endorsement component
    "request-did": lambda s, p: s.issuer.request_did(bytes.fromhex(p["public_key"]), p.get("proof_documents")).to_json(),
    "endorse-did": _op_endorse_did,
    "vc-challenge": lambda s, p: s.issuer.vc_challenge(p["subject_did"]).to_json(),
    "request-vc": lambda s, p: s.issuer.request_vc(p["subject_did"], p["claims"], auth_from_json(p["auth"])).to_json(),
    "endorse-vc": _op_endorse_vc,
    "approve": lambda s, p: s.issuer.collect_approval(
        p["request_id"], p["entity_id"], bool(p["decision"]), decode_material(p.get("material"))).to_json(),
    "review": lambda s, p: s.issuer.run_review(p["request_id"]).to_json(),
    "issuer-status": lambda s, p: s.issuer.status(p["request_id"]).to_json(),
    "issue-did": _op_issue_did,
    "issue-vc": _op_issue_vc,
    "manage-subject": _op_manage,
    "amend-vc": _op_amend_vc,
    # verification component
    "verify-begin": _op_verify("verify-begin"),
    "verify-complete": _op_verify("verify-complete"),
    "presentation-nonce": _op_verify("presentation-nonce"),
    "info": lambda s, p: s.client_config(),
}
SERVICE_OPERATIONS = tuple(sorted(_SERVICE_OPERATIONS))


@dataclass(frozen=True)
class BuildStep:
    name: str
    run: Callable[[], None]


class Platform:
    def __init__(
        self,
        *,
        seed: int | None = None,
        clock: LogicalClock | None = None,
        monitor_path: str | None = None,
        monitor_capacity: int = 100_000,
        provider_token: str | None = None,
    ) -> None:
        self.clock = clock or LogicalClock()
        self.seed = seed
        self._rng = random.Random(seed) if seed is not None else None
        self.name_service = NameService()
        self.monitor = Monitor(monitor_capacity, monitor_path, clock=self.clock)
        self.provider_token = provider_token or self._token()
        self._consumer_tokens: dict[str, str] = {}
        self.gateway = Gateway(self.name_service, self.monitor, self._authenticate)
        self.transport = LocalTransport(self.gateway)
        self.public_ledger = Ledger(LedgerConfig(LedgerPattern.PERMISSIONLESS, PUBLIC_DID_METHOD), self.clock,
                                    name="public")
        self.cdl_authorization = AuthorizationSystem(scope="global")
        self.cdl_ledger: Ledger | None = None
        self.services: dict[str, ServiceInstance] = {}
        self._names: dict[str, str] = {}
        self._primary: dict[str, str] = {}
        self._issued_ids: set[str] = set()
        self._addresses = itertools.count(1)
        self._lock = threading.RLock()
        self.gateway.mount("parser", Channel.INTERNAL, self._parser_module)
        self.gateway.mount("monitor", Channel.INTERNAL, self._monitor_module)
        self.gateway.mount("consumers", Channel.INTERNAL, self._consumers_module)
        self.gateway.mount("name-service", Channel.EXTERNAL, self._name_service_module)

    # -- identity of callers ---------------------------------------------------------
    def _token(self) -> str:
        if self._rng is not None:
            return f"tok-{self._rng.getrandbits(128):032x}"
        return f"tok-{secrets.token_hex(16)}"

    def _seed_bytes(self, label: str) -> bytes | None:
        if self._rng is None:
            return None
        return f"{self.seed}/{label}/{self._rng.getrandbits(64)}".encode()

    def _authenticate(self, token: str | None) -> Principal | None:
        if not token:
            return None
        if secrets.compare_digest(token, self.provider_token):
            return Principal("provider")
        consumer_id = self._consumer_tokens.get(token)
        return Principal("consumer", consumer_id) if consumer_id else None

    def register_consumer(self, consumer_id: str, meta: dict | None = None) -> str:
        """Subscribe a service consumer; returns its API token."""
        with self._lock:
            if consumer_id in self.name_service.consumers():
                raise BadRequest(f"consumer {consumer_id!r} is already registered")
            self.name_service.register_consumer(ConsumerRecord(
                consumer_id, f"did:{PUBLIC_DID_METHOD}:consumer-{consumer_id}", meta=dict(meta or {})))
            token = self._token()
            self._consumer_tokens[token] = consumer_id
            return token

    # -- building --------------------------------------------------------------------
    def _new_service_id(self) -> str:
        while True:
            if self._rng is not None:
                service_id = f"svc-{self._rng.getrandbits(64):016x}"
            else:
                service_id = f"svc-{secrets.token_hex(8)}"
            if service_id not in self._issued_ids:
                self._issued_ids.add(service_id)
                return service_id

    def _new_address(self) -> str:
        return f"node-{next(self._addresses)}.ssiaas.internal"

    def _make_ledger(self, spec: ServiceSpec, instance: ServiceInstance) -> Ledger:
        pattern = LedgerPattern(spec.data_pattern)
        fp = instance.writer_key.fingerprint
        if pattern in (LedgerPattern.PERMISSIONLESS, LedgerPattern.PERMISSIONED_CDL):
            if spec.block_latency is not None:
                raise ValueError(f"the shared {pattern.value} ledger has a fixed block latency")
        if pattern is LedgerPattern.PERMISSIONLESS:
            return self.public_ledger
        if pattern is LedgerPattern.PERMISSIONED_CDL:
            self.cdl_authorization.authorize(fp)
            if self.cdl_ledger is None:
                self.cdl_ledger = Ledger(LedgerConfig(pattern, "ssicdl"), self.clock, self.cdl_authorization,
                                         name="consortium")
            return self.cdl_ledger
        config = LedgerConfig(pattern, spec.did_method, spec.block_latency,
                              spec.anchor_period or 8, authorized_writers={fp})
        if pattern is LedgerPattern.PERMISSIONED_PDL:
            return Ledger(config, self.clock, name=f"pdl-{instance.service_id}")
        communicator = generate_keypair(seed=self._seed_bytes("communicator"))
        return SubLedger(config, self.public_ledger, self.clock, name=f"sub-{instance.service_id}",
                         communicator=communicator)

    def _on_event(self, service_id: str) -> Callable[[str, dict], None]:
        def record(kind: str, detail: dict) -> None:
            self.monitor.record(service_id, MonitorKind(kind), detail)
        return record

    def _make_registry(self, spec: ServiceSpec, instance: ServiceInstance) -> Registry:
        return Registry(instance.ledger, instance.writer_key, self.name_service, did_method=spec.did_method,
                        on_event=self._on_event(instance.service_id))

    def _make_verifier(self, spec: ServiceSpec, instance: ServiceInstance) -> None:
        instance.verifier = Verifier(VerifierConfig(instance.registry, self.name_service, spec.verification_mode,
                                                    spec.nonce_ttl, clock=self.clock))
        if spec.verification_mode == "service":
            instance.verification_service = VerificationService(instance.verifier)

    def build_plan(self, spec: ServiceSpec, instance: ServiceInstance, *, policy: ReviewPolicy | None = None,
                   entity_policies: dict[str, ReviewPolicy] | None = None) -> list[BuildStep]:
        """Ordered construction steps for ``spec``; executing them builds ``instance``."""

        def ledger() -> None:
            instance.ledger = self._make_ledger(spec, instance)

        def registry() -> None:
            instance.registry = self._make_registry(spec, instance)

        def issuer() -> None:
            seed = spec.endorsement_seed
            if seed is None and self._rng is not None:
                seed = self._rng.getrandbits(32)
            instance.issuer = Issuer.create(
                spec.consumer_id, registry=instance.registry, did_method=spec.did_method,
                mode=spec.endorsement_mode, threshold=spec.threshold, total=spec.entities,
                algorithm=spec.algorithm, seed=seed, policy=policy, entity_policies=entity_policies,
                clock=self.clock,
            )

        def consumer_keys() -> None:
            record = instance.issuer.consumer_record()
            current = self.name_service.resolve_consumer(spec.consumer_id)
            self.name_service.update_consumer(
                spec.consumer_id, signing_key=record.signing_key, management_key=record.management_key,
                entity_keys=record.entity_keys, entity_threshold=record.entity_threshold,
                controller_mode=record.controller_mode,
                service_ids=tuple(dict.fromkeys(current.service_ids + (instance.service_id,))),
            )

        def verifier() -> None:
            self._make_verifier(spec, instance)

        def address() -> None:
            self.name_service.register_service(instance.service_id, instance.address)
            self.gateway.attach(instance.address, instance)

        def health() -> None:
            failing = [name for name, ok in instance.probes(self.name_service).items() if not ok]
            if failing:
                raise RuntimeError(f"health probes failing: {', '.join(failing)}")

        return [BuildStep("ledger", ledger), BuildStep("registry", registry), BuildStep("issuer", issuer),
                BuildStep("consumer-keys", consumer_keys), BuildStep("verifier", verifier),
                BuildStep("address", address), BuildStep("health", health)]

    def build_service(self, spec: ServiceSpec | str, *, policy: ReviewPolicy | None = None,
                      entity_policies: dict[str, ReviewPolicy] | None = None) -> ServiceInstance:
        if isinstance(spec, str):
            spec = parse_spec(spec)
        with self._lock:
            if spec.service_name in self._names:
                raise DuplicateService(f"service name {spec.service_name!r} is taken",
                                       service_id=self._names[spec.service_name])
            try:
                self.name_service.resolve_consumer(spec.consumer_id)
            except NotFound:
                raise BuildFailure(f"consumer {spec.consumer_id!r} is not registered", step="consumer") from None
            if spec.consumer_id in self._primary:
                raise DuplicateService(f"consumer {spec.consumer_id!r} already runs a service",
                                       service_id=self._primary[spec.consumer_id])
            instance = ServiceInstance(self._new_service_id(), spec, self._new_address(),
                                       generate_keypair(seed=self._seed_bytes("writer")))
            for step in self.build_plan(spec, instance, policy=policy, entity_policies=entity_policies):
                try:
                    step.run()
                except Exception as exc:
                    self._rollback(instance)
                    raise BuildFailure(f"build step {step.name!r} failed: {exc}", step=step.name,
                                       reason=str(exc)) from exc
                instance.steps.append(step.name)
            instance.status = ServiceStatus.RUNNING
            self.services[instance.service_id] = instance
            self._names[spec.service_name] = instance.service_id
            self._primary[spec.consumer_id] = instance.service_id
        self.monitor.record(instance.service_id, MonitorKind.NODE_STATUS,
                            {"status": instance.status.value, "address": instance.address})
        return instance

    def _rollback(self, instance: ServiceInstance) -> None:
        instance.status = ServiceStatus.STOPPED
        self.gateway.detach(instance.address)
        if self.services.get(instance.service_id) is None:
            self.name_service.unregister_service(instance.service_id)

    def service(self, service_id: str) -> ServiceInstance:
        instance = self.services.get(service_id)
        if instance is None:
            raise UnknownService(f"unknown service {service_id!r}")
        return instance

    def service_for(self, consumer_id: str) -> ServiceInstance:
        service_id = self._primary.get(consumer_id)
        if service_id is None:
            raise UnknownConsumer(f"consumer {consumer_id!r} has no running service")
        return self.services[service_id]

    def stop_service(self, service_id: str) -> ServiceInstance:
        with self._lock:
            instance = self.service(service_id)
            instance.status = ServiceStatus.STOPPED
            self.gateway.detach(instance.address)
            self.name_service.unregister_service(service_id)
            self._names.pop(instance.spec.service_name, None)
            if self._primary.get(instance.spec.consumer_id) == service_id:
                del self._primary[instance.spec.consumer_id]
        self.monitor.record(service_id, MonitorKind.NODE_STATUS, {"status": instance.status.value})
        return instance

    # -- verification endpoints ----------------------------------------------------------
    def serve_verification(self, consumer_id: str) -> dict:
        """Host a verification endpoint for ``consumer_id``'s service."""
        try:
            self.name_service.resolve_consumer(consumer_id)
        except NotFound:
            raise UnknownConsumer(f"consumer {consumer_id!r} is not subscribed") from None
        instance = self.service_for(consumer_id)
        if instance.verification_service is None:
            instance.verification_service = VerificationService(instance.verifier)
        return {"service_id": instance.service_id, "address": self.name_service.resolve_service(instance.service_id)}

    # -- migration ----------------------------------------------------------------------
    def migrate_service(self, service_id: str, new_spec: ServiceSpec | str) -> ServiceInstance:
        """Move a running service onto the architecture of ``new_spec``.

        The service id, issuer agent and ledger writer key are kept; the
        ledger history written by this service is replayed into the new data
        component and the Name Service address is switched last.
        """
        if isinstance(new_spec, str):
            new_spec = parse_spec(new_spec)
        with self._lock:
            source = self.service(service_id)
            if not source.running:
                raise MigrationFailure(f"service {service_id} is not running", position=0)
            old = source.spec
            if new_spec.consumer_id != old.consumer_id:
                raise MigrationFailure("a service cannot change consumer", position=0)
            keep = ("endorsement_mode", "threshold", "entities", "algorithm")
            if any(getattr(new_spec, k) != getattr(old, k) for k in keep):
                raise MigrationFailure("issuer keys are kept, so the endorsement settings must not change",
                                       position=0)
            if new_spec.service_name != old.service_name and new_spec.service_name in self._names:
                raise DuplicateService(f"service name {new_spec.service_name!r} is taken")
            target = ServiceInstance(service_id, new_spec, self._new_address(), source.writer_key)
            position = 0
            try:
                target.ledger = self._make_ledger(new_spec, target)
                target.registry = self._make_registry(new_spec, target)
                export = source.registry.export_state()
                if target.ledger is source.ledger:
                    export = RegistryExport([], export.documents, export.controllers)

                def progress(i: int) -> None:
                    nonlocal position
                    position = i

                target.registry.replay(export, on_progress=progress)
            except Exception as exc:
                raise MigrationFailure(f"replay failed at position {position}: {exc}", position=position,
                                       service_id=service_id) from exc
            target.issuer = source.issuer
            target.issuer.registry = target.registry
            target.issuer.did_method = new_spec.did_method
            self._make_verifier(new_spec, target)
            if source.verification_service is not None and target.verification_service is None:
                target.verification_service = VerificationService(target.verifier)
            target.steps = ["ledger", "registry", "replay", "issuer", "verifier", "address"]
            target.status = ServiceStatus.RUNNING
            self.gateway.attach(target.address, target)
            self.name_service.register_service(service_id, target.address)
            self.gateway.detach(source.address)
            source.status = ServiceStatus.STOPPED
            self.services[service_id] = target
            self._names.pop(old.service_name, None)
            self._names[new_spec.service_name] = service_id
        self.monitor.record(service_id, MonitorKind.NODE_STATUS,
                            {"status": "Migrated", "from": old.data_pattern, "to": new_spec.data_pattern})
        return target

    # -- internal modules -----------------------------------------------------------------
    def _require_owner(self, principal: Principal, consumer_id: str) -> None:
        if not _owns(principal, consumer_id):
            raise Unauthenticated(f"token does not belong to {consumer_id!r}")

    def _parser_module(self, operation: str, payload: dict, principal: Principal) -> Any:
        if operation == "validate":
            try:
                parse_spec(payload["yaml"])
            except SpecSyntaxError as exc:
                return {"valid": False, "diagnostics": [Diagnostic("", "valid YAML", exc.message).to_json()]}
            except SchemaError as exc:
                return {"valid": False, "diagnostics": [d.to_json() for d in exc.diagnostics]}
            return {"valid": True, "diagnostics": []}
        if operation == "build":
            spec = parse_spec(payload["yaml"])
            self._require_owner(principal, spec.consumer_id)
            return self.build_service(spec).describe()
        if operation == "list":
            return [s.describe() for s in self.services.values() if _owns(principal, s.spec.consumer_id)]
        if operation == "serve-verification":
            self._require_owner(principal, payload["consumer_id"])
            return self.serve_verification(payload["consumer_id"])
        if operation in ("migrate", "stop", "describe"):
            instance = self.service(payload["service_id"])
            self._require_owner(principal, instance.spec.consumer_id)
            if operation == "migrate":
                return self.migrate_service(instance.service_id, parse_spec(payload["yaml"])).describe()
            if operation == "stop":
                return self.stop_service(instance.service_id).describe()
            return instance.describe()
        raise NotFound(f"unknown parser operation {operation!r}")

    def _monitor_module(self, operation: str, payload: dict, principal: Principal) -> Any:
        service_id = payload.get("service_id")
        if principal.role != "provider":
            owned = set(self.name_service.resolve_consumer(principal.consumer_id).service_ids)
            if service_id is None or service_id not in owned:
                raise Unauthenticated("consumers may only read events of their own services")
        if operation == "tail":
            return [e.to_json() for e in self.monitor.tail(int(payload.get("n", 20)), service_id)]
        if operation == "query":
            events = self.monitor.query(service_id, payload.get("kinds"), payload.get("since"), payload.get("until"))
            return [e.to_json() for e in events]
        if operation == "summary":
            return {"counts": dict(self.monitor.counts(service_id)),
                    "writers": self.monitor.writer_summary(service_id)}
        raise NotFound(f"unknown monitor operation {operation!r}")

    def _consumers_module(self, operation: str, payload: dict, principal: Principal) -> Any:
        if operation == "register":
            if principal.role != "provider":
                raise Unauthenticated("only the provider registers consumers")
            return {"consumer_id": payload["consumer_id"],
                    "token": self.register_consumer(payload["consumer_id"], payload.get("meta"))}
        if operation == "list":
            if principal.role != "provider":
                raise Unauthenticated("only the provider lists consumers")
            return self.name_service.consumers()
        if operation == "resolve":
            return self.name_service.resolve_consumer(payload["consumer_id"]).to_json()
        raise NotFound(f"unknown consumers operation {operation!r}")

    def _name_service_module(self, operation: str, payload: dict, principal: Principal | None) -> Any:
        if operation == "resolve-consumer":
            return self.name_service.resolve_consumer(payload["consumer_id"]).to_json()
        if operation == "resolve-service":
            return {"address": self.name_service.resolve_service(payload["service_id"])}
        raise NotFound(f"unknown name-service operation {operation!r}")

    # -- convenience -------------------------------------------------------------------------
    def route(self, request: dict) -> dict:
        return self.gateway.route(request)
