from __future__ import annotations

import contextlib
import time
from dataclasses import dataclass, field
from pathlib import Path

import pytest

from ssiaas.crypto import KeyPair, digest, generate_keypair, sign
from ssiaas.endorsement import Issuer
from ssiaas.ledger import EventKind, Ledger, LedgerConfig, LedgerPattern, LogicalClock, SubLedger
from ssiaas.platform.nameservice import ConsumerRecord, NameService
from ssiaas.vdr import Registry, draft_credential
from ssiaas.verification import Verifier, VerifierConfig
from ssiaas.wallet import Wallet

DATA = Path(__file__).parent / "data"
FAST_KDF = 2**10
ACCEPTANCE_LINES: list[str] = []


@dataclass
class Deployment:
    """One registry, one issuer and a name service on a shared clock."""

    clock: LogicalClock
    name_service: NameService
    ledger: Ledger
    registry: Registry
    issuer: Issuer
    writer: KeyPair
    master: Ledger | None = None
    events: list = field(default_factory=list)

    def wallet(self, pattern: str = "offline", **kwargs) -> Wallet:
        return Wallet(pattern, "correct horse", clock=self.clock, kdf_n=FAST_KDF, **kwargs)

    def verifier(self, **kwargs) -> Verifier:
        return Verifier(VerifierConfig(self.registry, self.name_service, clock=self.clock, **kwargs))

    def add_issuer(self, consumer_id: str, **kwargs) -> Issuer:
        issuer = Issuer.create(consumer_id, registry=self.registry, did_method=self.registry.did_method, **kwargs)
        self.name_service.register_consumer(issuer.consumer_record())
        return issuer

    def holder(self, pattern: str = "offline", claims: dict | None = None):
        """A wallet holding one registered DID and, with ``claims``, one registered VC."""
        wallet = self.wallet(pattern)
        did, doc = self.issuer.endorse_did(wallet.create_identity().public_key)
        wallet.register_did(self.registry, did, doc)
        vc = None
        if claims is not None:
            vc, proof = self.issuer.endorse_vc(did, claims, wallet.respond)
            wallet.register_vc(self.registry, vc, proof)
            vc = wallet.credential(vc.vc_id)
        return wallet, did, vc


def deploy(
    pattern: str = "permissioned-pdl",
    mode: str = "single",
    threshold: int | None = None,
    total: int | None = None,
    consumer_id: str = "acme",
    seed: int | None = 1,
    **issuer_kwargs,
) -> Deployment:
    clock = LogicalClock()
    ns = NameService()
    writer = generate_keypair()
    pattern = LedgerPattern(pattern)
    master = None
    method = {"permissionless": "pl", "permissioned-cdl": "cdl", "permissioned-pdl": "pdl", "sub-ledger": "sub"}[pattern.value]
    if pattern is LedgerPattern.PERMISSIONLESS:
        ledger = Ledger(LedgerConfig(pattern, method), clock)
    elif pattern is LedgerPattern.SUB_LEDGER:
        master = Ledger(LedgerConfig(LedgerPattern.PERMISSIONLESS, "master"), clock)
        ledger = SubLedger(LedgerConfig(pattern, method, anchor_period=4, authorized_writers={writer.fingerprint}),
                           master, clock)
    else:
        ledger = Ledger(LedgerConfig(pattern, method, authorized_writers={writer.fingerprint}), clock)
    events: list = []
    registry = Registry(ledger, writer, ns, on_event=lambda kind, detail: events.append((kind, detail)))
    issuer = Issuer.create(consumer_id, registry=registry, did_method=method, mode=mode, threshold=threshold,
                           total=total, seed=seed, **issuer_kwargs)
    ns.register_consumer(issuer.consumer_record())
    return Deployment(clock, ns, ledger, registry, issuer, writer, master, events)


@pytest.fixture
def deployment() -> Deployment:
    return deploy()


def run_script(script, block_latency: int = 1, writer: KeyPair | None = None):
    """Apply a random ledger script; returns the ledger and the record snapshot after every step."""
    writer = writer or generate_keypair()
    clock = LogicalClock()
    ledger = Ledger(LedgerConfig(LedgerPattern.PERMISSIONLESS, "t", block_latency=block_latency), clock)
    session = ledger.connect(writer)
    snapshots = []
    for i, (kind, subject, advance) in enumerate(script):
        session.submit(EventKind(kind), subject, digest(f"{subject}/{i}".encode()))
        clock.advance(advance)
        snapshots.append(ledger.records())
    clock.advance(block_latency)
    snapshots.append(ledger.records())
    return ledger, snapshots


def register_attacker(dep: Deployment, consumer_id: str = "mallory") -> KeyPair:
    """A legitimately subscribed consumer whose key the attacker controls."""
    key = generate_keypair()
    dep.name_service.register_consumer(ConsumerRecord(consumer_id, f"did:x:{consumer_id}", signing_key=key.public_key,
                                                      management_key=key.public_key))
    return key


def masquerade(attacker: KeyPair, subject_did: str, claims: dict, impersonated: str = "acme"):
    """A credential claiming to come from ``impersonated`` but signed with the attacker's own key."""
    draft = draft_credential(subject_did, claims, impersonated, attacker.public_key)
    return draft, sign(attacker.secret_key, draft.signing_digest())


def forge(subject_did: str, claims: dict, issuer_id: str = "acme"):
    """Holder-made credential under a self-generated, unregistered issuer key."""
    key = generate_keypair()
    draft = draft_credential(subject_did, claims, issuer_id, key.public_key)
    return draft, sign(key.secret_key, draft.signing_digest())


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion.

    Usage: ``with criterion(3, "revocation") as measured: ...`` where the
    body may store figures in ``measured`` for the report line.
    """
    terminal = request.config.pluginmanager.get_plugin("terminalreporter")

    @contextlib.contextmanager
    def run(number: int, title: str):
        measured: dict = {}
        start = time.perf_counter()
        status = "FAIL"
        try:
            yield measured
            status = "PASS"
        except BaseException as exc:
            measured.setdefault("failure", f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
            raise
        finally:
            measured["seconds"] = round(time.perf_counter() - start, 2)
            detail = ", ".join(f"{k}={v}" for k, v in measured.items())
            line = f"ACCEPTANCE {number} {status}: {title} ({detail})"
            ACCEPTANCE_LINES.append(line)
            if terminal is not None:
                terminal.write_line("")
                terminal.write_line(line)

    return run


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda text: int(text.split()[1])):
            terminalreporter.write_line(line)
