"""Platform-level scenario drivers shared by the platform and acceptance tests.

Everything here talks to a running service through gateway clients, the way
an external wallet or verifier application would.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from conftest import FAST_KDF
from ssiaas.platform import (
    IssuerClient,
    NameServiceClient,
    Platform,
    RegistryClient,
    hosted_verifier,
    make_spec,
)
from ssiaas.verification import Verifier, VerifierConfig
from ssiaas.wallet import RemoteStore, Wallet

DATA_PATTERNS = ("permissionless", "permissioned-cdl", "permissioned-pdl", "sub-ledger")
WALLET_PATTERNS = ("online", "offline")
ENDORSEMENT_MODES = ("single", "multisignature", "secret-sharing")
VERIFICATION_MODES = ("service", "host")
COMBINATIONS = list(itertools.product(DATA_PATTERNS, WALLET_PATTERNS, ENDORSEMENT_MODES, VERIFICATION_MODES))


@dataclass
class Tenant:
    platform: Platform
    consumer_id: str
    token: str
    service_id: str

    @property
    def spec(self):
        return self.platform.service(self.service_id).spec

    @property
    def registry(self) -> RegistryClient:
        return RegistryClient(self.platform.transport, self.service_id)

    @property
    def issuer(self) -> IssuerClient:
        return IssuerClient(self.platform.transport, self.service_id, self.token)

    def verifier(self, mode: str | None = None):
        mode = mode or self.spec.verification_mode
        if mode == "service":
            self.platform.serve_verification(self.consumer_id)
            return hosted_verifier(self.platform.transport, self.service_id)
        return Verifier(VerifierConfig(self.registry, NameServiceClient(self.platform.transport),
                                       clock=self.platform.clock))

    def wallet(self, pattern: str | None = None, seed: bytes | None = None) -> Wallet:
        return Wallet(pattern or self.spec.wallet_pattern, "correct horse", clock=self.platform.clock,
                      seed=seed, kdf_n=FAST_KDF)

    def enroll(self, wallet: Wallet, claims: dict | None = None):
        """Register a fresh DID for ``wallet`` and, with ``claims``, one credential."""
        did, doc = self.issuer.endorse_did(wallet.create_identity().public_key)
        wallet.register_did(self.registry, did, doc)
        vc = None
        if claims is not None:
            vc, proof = self.issuer.endorse_vc(did, claims, wallet.respond)
            wallet.register_vc(self.registry, vc, proof)
            vc = wallet.credential(vc.vc_id)
        return did, vc


def tenant(platform: Platform, consumer_id: str, data: str = "permissioned-pdl", wallet: str = "offline",
           endorsement: str = "single", verification: str = "host", **spec_kwargs) -> Tenant:
    token = platform.register_consumer(consumer_id)
    spec = make_spec(f"{consumer_id}-svc", consumer_id, data, wallet, endorsement, verification, **spec_kwargs)
    return Tenant(platform, consumer_id, token, platform.build_service(spec).service_id)


def honest_lifecycle(platform: Platform, index: int, data: str, wallet_pattern: str, endorsement: str,
                     verification: str):
    """Register DID, issue and register a VC, present it and verify; returns the presentation report."""
    t = tenant(platform, f"c{index}", data, wallet_pattern, endorsement, verification)
    wallet = t.wallet()
    did, vc = t.enroll(wallet, {"member": index})
    if wallet_pattern == "online":
        wallet.sync_online(RemoteStore())
    verifier = t.verifier()
    vp = wallet.compose_presentation([vc.vc_id], verifier.presentation_nonce())
    return verifier.verify_presentation(vp, wallet.respond)


def check_sequence(report) -> list[tuple[str, str]]:
    """Flattened (check, result) pairs of a report, nested credentials included."""
    out = [(c.name, c.result.value) for c in report.checks]
    for sub in report.credentials:
        out.extend(check_sequence(sub))
    return out


def mixed_population(t: Tenant, holders: int = 12):
    """Holders in four states: active, updated credential, revoked credential, revoked DID.

    Returns ``(subjects, wallets)`` where ``subjects`` maps each DID and
    credential id to the wallet that holds it.
    """
    subjects: dict[str, Wallet] = {}
    wallets = []
    for i in range(holders):
        wallet = t.wallet(seed=f"holder-{i}".encode())
        did, vc = t.enroll(wallet, {"member": i, "tier": "basic"})
        state = i % 4
        if state == 1:
            wallet.store_credential(t.issuer.amend_vc(vc, {"member": i, "tier": "gold"}))
        elif state == 2:
            t.issuer.manage_subject(vc.vc_id, "revoke")
        elif state == 3:
            t.issuer.manage_subject(did, "revoke")
        subjects[did] = subjects[vc.vc_id] = wallet
        wallets.append(wallet)
    return subjects, wallets


def subject_reports(t: Tenant, subjects: dict) -> dict[str, bytes]:
    """A verification report per credential and a status snapshot per DID."""
    verifier = t.verifier("host")
    out = {}
    for subject_id, wallet in sorted(subjects.items()):
        if subject_id.startswith("did:"):
            resolution = t.registry.resolve(subject_id)
            out[subject_id] = f"{resolution.status.value}/{bytes(resolution.payload_digest).hex()}".encode()
        else:
            out[subject_id] = verifier.verify_vc(wallet.credential(subject_id), wallet.respond).to_bytes()
    return out
