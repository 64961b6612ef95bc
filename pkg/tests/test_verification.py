import dataclasses
import json

import pytest

from conftest import deploy, masquerade, register_attacker
from ssiaas.crypto import generate_keypair, sign
from ssiaas.errors import (
    InvalidDocument,
    NameServiceUnreachable,
    RegistryUnreachable,
    StaleNonce,
    UnknownSession,
)
from ssiaas.verification import (
    REPORT_VERSION,
    Outcome,
    Result,
    ServiceVerifierClient,
    VerificationReport,
    VerificationService,
)
from ssiaas.wallet import VerifiablePresentation, presentation_digest


def service_client(verifier):
    service = VerificationService(verifier)

    def transport(operation, payload):
        # serialize both ways so nothing but JSON crosses the boundary
        reply = service.handle(operation, json.loads(json.dumps(payload)))
        return json.loads(json.dumps(reply))

    return ServiceVerifierClient(transport)


def results(report):
    return [(c.name, c.result) for c in report.checks]


@pytest.fixture
def dep():
    return deploy()


# -- single credentials --------------------------------------------------------------
def test_honest_credential_passes_all_checks(dep):
    wallet, _, vc = dep.holder(claims={"degree": "BSc"})
    report = dep.verifier().verify_vc(vc, wallet.respond)
    assert report.outcome is Outcome.VALID and report.failed_check is None
    assert results(report) == [("status", Result.PASS), ("holder_auth", Result.PASS),
                                ("issuer_existence", Result.PASS), ("integrity", Result.PASS)]


def test_masquerade_fails_issuer_existence(dep):
    attacker = register_attacker(dep)
    wallet, did, _ = dep.holder()
    draft, proof = masquerade(attacker, did, {"degree": "MD"})
    wallet.register_vc(dep.registry, draft, proof)
    report = dep.verifier().verify_vc(wallet.credential(draft.vc_id), wallet.respond)
    assert report.outcome is Outcome.INVALID
    assert report.failed_check == "issuer_existence"
    assert results(report)[-1] == ("integrity", Result.SKIPPED)


def test_revoked_credential_fails_status_and_skips_rest(dep):
    wallet, _, vc = dep.holder(claims={"degree": "BSc"})
    dep.issuer.manage_subject(vc.vc_id, "revoke")
    report = dep.verifier().verify_vc(vc, wallet.respond)
    assert results(report) == [("status", Result.FAIL), ("holder_auth", Result.SKIPPED),
                                ("issuer_existence", Result.SKIPPED), ("integrity", Result.SKIPPED)]


def test_revoked_holder_did_fails_holder_auth(dep):
    wallet, did, vc = dep.holder(claims={"degree": "BSc"})
    dep.issuer.manage_subject(did, "revoke")
    assert dep.verifier().verify_vc(vc, wallet.respond).failed_check == "holder_auth"


@pytest.mark.parametrize("channel", ["absent", "wrong-wallet", "garbage"])
def test_holder_cannot_answer(dep, channel):
    wallet, _, vc = dep.holder(claims={"degree": "BSc"})
    other, _, _ = dep.holder()
    holder_channel = {
        "absent": None,
        "wrong-wallet": other.respond,
        "garbage": lambda did, encoded: b"\x00" * 32,
    }[channel]
    report = dep.verifier().verify_vc(vc, holder_channel)
    assert report.failed_check == "holder_auth"


def test_issuer_key_rotation_invalidates(dep):
    wallet, _, vc = dep.holder(claims={"degree": "BSc"})
    dep.name_service.update_consumer("acme", signing_key=generate_keypair().public_key)
    assert dep.verifier().verify_vc(vc, wallet.respond).failed_check == "issuer_existence"


def test_trusted_keys_are_a_second_source(dep):
    wallet, _, vc = dep.holder(claims={"degree": "BSc"})
    good = dep.verifier(trusted_keys={"acme": vc.issuer_public_key})
    assert good.verify_vc(vc, wallet.respond).valid
    pinned = dep.verifier(trusted_keys={"acme": generate_keypair().public_key})
    assert pinned.verify_vc(vc, wallet.respond).failed_check == "issuer_existence"


def mutations(vc, other_key):
    stranger = generate_keypair()
    yield "claims", dataclasses.replace(vc, claims={**vc.claims, "degree": "PhD"})
    yield "extra claim", dataclasses.replace(vc, claims={**vc.claims, "honours": True})
    yield "issuer key", dataclasses.replace(vc, issuer_public_key=other_key)
    yield "issuer id", dataclasses.replace(vc, issuer_id="globex")
    yield "subject", dataclasses.replace(vc, subject_did=vc.subject_did + "x")
    yield "vc id", dataclasses.replace(vc, vc_id="0" * 64)
    yield "proof", dataclasses.replace(vc, proof=sign(stranger.secret_key, vc.signing_digest()))
    yield "no proof", dataclasses.replace(vc, proof=None)


def test_single_field_mutations_are_invalid(dep):
    wallet, _, vc = dep.holder(claims={"degree": "BSc"})
    verifier = dep.verifier()
    assert verifier.verify_vc(vc, wallet.respond).valid
    for name, mutated in mutations(vc, generate_keypair().public_key):
        report = verifier.verify_vc(mutated, wallet.respond)
        assert report.outcome is Outcome.INVALID, name


def test_registry_and_name_service_outages(dep):
    wallet, _, vc = dep.holder(claims={"degree": "BSc"})
    verifier = dep.verifier()
    dep.ledger.available = False
    with pytest.raises(RegistryUnreachable):
        verifier.verify_vc(vc, wallet.respond)
    dep.ledger.available = True
    dep.name_service.available = False
    with pytest.raises(NameServiceUnreachable):
        verifier.verify_vc(vc, wallet.respond)


def test_sessions_are_single_use(dep):
    wallet, _, vc = dep.holder(claims={"degree": "BSc"})
    verifier = dep.verifier()
    begun = verifier.begin_vc(vc)
    verifier.complete(begun.session_id, {})
    with pytest.raises(UnknownSession):
        verifier.complete(begun.session_id, {})


def test_report_json_round_trip(dep):
    wallet, _, vc = dep.holder(claims={"degree": "BSc"})
    report = dep.verifier().verify_vc(vc, wallet.respond)
    obj = json.loads(report.to_bytes())
    assert obj["version"] == REPORT_VERSION
    assert VerificationReport.from_json(obj) == report


# -- presentations ------------------------------------------------------------------------
def test_presentation_of_two_credentials(dep):
    wallet, did, vc1 = dep.holder(claims={"degree": "BSc"})
    vc2, proof = dep.issuer.endorse_vc(did, {"degree": "MSc"}, wallet.respond)
    wallet.register_vc(dep.registry, vc2, proof)
    verifier = dep.verifier()
    vp = wallet.compose_presentation([vc1.vc_id, vc2.vc_id], verifier.presentation_nonce())
    report = verifier.verify_presentation(vp, wallet.respond)
    assert report.valid and len(report.credentials) == 2
    assert [c.name for c in report.checks] == ["holder_signature", "subject_binding"]


def test_presentation_revoked_member_is_invalid(dep):
    wallet, did, vc1 = dep.holder(claims={"degree": "BSc"})
    vc2, proof = dep.issuer.endorse_vc(did, {"degree": "MSc"}, wallet.respond)
    wallet.register_vc(dep.registry, vc2, proof)
    dep.issuer.manage_subject(vc2.vc_id, "revoke")
    verifier = dep.verifier()
    vp = wallet.compose_presentation([vc1.vc_id, vc2.vc_id], verifier.presentation_nonce())
    report = verifier.verify_presentation(vp, wallet.respond)
    assert report.outcome is Outcome.INVALID
    assert [r.valid for r in report.credentials] == [True, False]


def test_presentation_with_foreign_credential(dep):
    alice, alice_did, alice_vc = dep.holder(claims={"degree": "BSc"})
    _, _, bob_vc = dep.holder(claims={"degree": "PhD"})
    verifier = dep.verifier()
    nonce = verifier.presentation_nonce()
    creds = (alice_vc, bob_vc)
    sig = sign(alice._keypair_for_did(alice_did).secret_key, presentation_digest(alice_did, creds, nonce))
    report = verifier.verify_presentation(VerifiablePresentation(alice_did, creds, nonce, sig), alice.respond)
    assert report.failed_check == "subject_binding"


def test_presentation_signature_tamper(dep):
    wallet, _, vc = dep.holder(claims={"degree": "BSc"})
    other, _, _ = dep.holder()
    verifier = dep.verifier()
    vp = wallet.compose_presentation([vc.vc_id], verifier.presentation_nonce())
    forged = dataclasses.replace(vp, holder_signature=sign(generate_keypair().secret_key, vp.digest()))
    assert verifier.verify_presentation(forged, wallet.respond).failed_check == "holder_signature"


def test_presentation_nonce_replay_and_expiry(dep):
    wallet, _, vc = dep.holder(claims={"degree": "BSc"})
    verifier = dep.verifier(nonce_ttl=10)
    vp = wallet.compose_presentation([vc.vc_id], verifier.presentation_nonce())
    assert verifier.verify_presentation(vp, wallet.respond).valid
    with pytest.raises(StaleNonce):
        verifier.verify_presentation(vp, wallet.respond)
    with pytest.raises(StaleNonce):
        verifier.verify_presentation(wallet.compose_presentation([vc.vc_id], b"\x01" * 16), wallet.respond)
    late = wallet.compose_presentation([vc.vc_id], verifier.presentation_nonce())
    dep.clock.advance(11)
    with pytest.raises(StaleNonce):
        verifier.verify_presentation(late, wallet.respond)


def test_empty_presentation_rejected(dep):
    wallet, did, vc = dep.holder(claims={"degree": "BSc"})
    verifier = dep.verifier()
    vp = wallet.compose_presentation([vc.vc_id], verifier.presentation_nonce())
    with pytest.raises(InvalidDocument):
        verifier.verify_presentation(dataclasses.replace(vp, credentials=()), wallet.respond)


# -- service and host parity ---------------------------------------------------------------
def test_service_and_host_reports_are_identical(dep):
    attacker = register_attacker(dep)
    wallet, did, vc = dep.holder(claims={"degree": "BSc"})
    draft, proof = masquerade(attacker, did, {"degree": "MD"})
    wallet.register_vc(dep.registry, draft, proof)
    revoked, proof = dep.issuer.endorse_vc(did, {"degree": "MSc"}, wallet.respond)
    wallet.register_vc(dep.registry, revoked, proof)
    dep.issuer.manage_subject(revoked.vc_id, "revoke")

    host = dep.verifier()
    service = service_client(dep.verifier())
    cases = [wallet.credential(vc.vc_id), wallet.credential(draft.vc_id), wallet.credential(revoked.vc_id),
             dataclasses.replace(vc, claims={"degree": "PhD"})]
    for case in cases:
        for channel in (wallet.respond, None):
            assert host.verify_vc(case, channel).to_bytes() == service.verify_vc(case, channel).to_bytes()
    for ids in ([vc.vc_id], [vc.vc_id, draft.vc_id]):
        a = host.verify_presentation(wallet.compose_presentation(ids, host.presentation_nonce()), wallet.respond)
        b = service.verify_presentation(wallet.compose_presentation(ids, service.presentation_nonce()),
                                        wallet.respond)
        # the presentation subject is its digest, which covers the nonce; compare everything else
        assert a.outcome == b.outcome and a.checks == b.checks and a.credentials == b.credentials
