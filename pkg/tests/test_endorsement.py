import itertools
import threading

import pytest

from conftest import deploy
from ssiaas.crypto import (
    Share,
    Signature,
    SignatureSet,
    generate_keypair,
    reconstruct_secret,
    respond_challenge,
    sign,
    verify,
)
from ssiaas.endorsement import (
    ControllerMode,
    IssuerProfile,
    RequestStatus,
    ScriptedPolicy,
    required_approvals,
    subject_did_for,
)
from ssiaas.errors import (
    AuthenticationFailed,
    DuplicateApproval,
    InsufficientShares,
    InvalidMaterial,
    InvalidThreshold,
    PolicyNotSatisfied,
    RequestClosed,
    ReviewRejected,
    SigningFailure,
    Unauthorized,
    UnknownEntity,
    UnknownRequest,
)
from ssiaas.ledger import SubjectStatus
from ssiaas.vdr import ChallengeResponse, DelegatedSignature, check_issuer_proof


def holder(dep):
    """Registered subject key and DID without a wallet."""
    key = generate_keypair()
    did, doc = dep.issuer.endorse_did(key.public_key)
    dep.registry.did_registration(did, doc, DelegatedSignature(sign(key.secret_key, did.encode())))
    return key, did, lambda _did, encoded: respond_challenge(key.secret_key, encoded)


def approve(issuer, request, entity_ids):
    for eid in entity_ids:
        decision, material = issuer.entities[eid].respond(request)
        issuer.collect_approval(request.request_id, eid, decision, material)


# -- profiles ----------------------------------------------------------------------------------
def test_required_approvals():
    assert required_approvals(ControllerMode.SINGLE, None) == 1
    assert required_approvals(ControllerMode.MULTISIGNATURE, 2) == 3
    assert required_approvals(ControllerMode.SECRET_SHARING, 2) == 2


@pytest.mark.parametrize("mode,t,n", [("multisignature", 0, 3), ("multisignature", 3, 3),
                                      ("secret-sharing", 4, 3), ("secret-sharing", None, 3)])
def test_invalid_profiles(mode, t, n):
    with pytest.raises(InvalidThreshold):
        IssuerProfile("acme", b"\x01" * 33, mode, t, n, tuple(f"e{i}" for i in range(n)))


def test_profile_json_round_trip():
    dep = deploy(mode="multisignature", threshold=1, total=3)
    profile = dep.issuer.profile
    assert IssuerProfile.from_json(profile.to_json()) == profile


# -- DID issuance ---------------------------------------------------------------------------------
def test_single_mode_did():
    dep = deploy()
    key = generate_keypair()
    did, doc = dep.issuer.endorse_did(key.public_key, {"passport": "X"})
    assert did.startswith("did:pdl:") and len(did.split(":")[2]) == 32
    assert doc.subject_public_key == key.public_key and doc.controller == "acme"
    assert doc.verification_methods[0].controller == did
    assert did == subject_did_for("pdl", key.public_key, "acme", "req-1")


def test_multisig_2_of_5_needs_three():
    dep = deploy(mode="multisignature", threshold=2, total=5)
    request = dep.issuer.request_did(generate_keypair().public_key)
    approve(dep.issuer, request, ["entity-1", "entity-2"])
    with pytest.raises(PolicyNotSatisfied):
        dep.issuer.issue_did(request.request_id)
    approve(dep.issuer, request, ["entity-3"])
    did, _ = dep.issuer.issue_did(request.request_id)
    assert did.startswith("did:pdl:")


def test_rejected_identity_proofs():
    dep = deploy(policy=ScriptedPolicy(lambda eid, req: req.payload["proof_documents"].get("ok", False)))
    request = dep.issuer.request_did(generate_keypair().public_key, {"ok": False})
    assert dep.issuer.run_review(request.request_id).status is RequestStatus.REJECTED
    with pytest.raises(ReviewRejected):
        dep.issuer.issue_did(request.request_id)
    assert len(dep.ledger) == 0


def test_request_kind_and_reissue():
    dep = deploy()
    request = dep.issuer.request_did(generate_keypair().public_key)
    dep.issuer.run_review(request.request_id)
    with pytest.raises(UnknownRequest):
        dep.issuer.issue_vc(request.request_id)
    dep.issuer.issue_did(request.request_id)
    with pytest.raises(RequestClosed):
        dep.issuer.issue_did(request.request_id)
    with pytest.raises(UnknownRequest):
        dep.issuer.status("req-99")


# -- VC issuance ------------------------------------------------------------------------------------
def test_single_mode_vc_verifies():
    dep = deploy()
    _, did, channel = holder(dep)
    vc, proof = dep.issuer.endorse_vc(did, {"grade": "A"}, channel)
    assert isinstance(proof, Signature)
    assert verify(dep.issuer.profile.signing_public_key, vc.signing_digest(), proof)


def test_vc_requires_subject_authentication():
    dep = deploy()
    _, did, _ = holder(dep)
    impostor = generate_keypair()
    with pytest.raises(AuthenticationFailed):
        dep.issuer.request_vc(did, {"grade": "A"}, lambda d, enc: respond_challenge(impostor.secret_key, enc))
    challenge = dep.issuer.vc_challenge(did)
    with pytest.raises(AuthenticationFailed):
        dep.issuer.request_vc(did, {}, ChallengeResponse(challenge.challenge_id, bytes(32)))


def test_multisig_1_of_3_with_two_partials():
    dep = deploy(mode="multisignature", threshold=1, total=3)
    _, did, channel = holder(dep)
    request = dep.issuer.request_vc(did, {"grade": "B"}, channel)
    approve(dep.issuer, request, ["entity-3", "entity-1"])
    vc, proof = dep.issuer.issue_vc(request.request_id)
    assert isinstance(proof, SignatureSet)
    # oracle: verify every partial independently, then count against t+1
    keys = dict(zip(dep.issuer.profile.entity_ids, dep.issuer.profile.entity_keys))
    valid = [pk for pk, sig in proof.partials if pk in keys.values() and verify(pk, vc.signing_digest(), sig)]
    assert len(valid) >= 1 + 1
    assert check_issuer_proof(vc, proof, dep.name_service.resolve_consumer("acme"))


def test_secret_sharing_3_of_5_signs_and_zeroizes():
    dep = deploy(mode="secret-sharing", threshold=3, total=5)
    _, did, channel = holder(dep)
    request = dep.issuer.request_vc(did, {"grade": "C"}, channel)
    approve(dep.issuer, request, ["entity-2", "entity-4", "entity-5"])
    vc, proof = dep.issuer.issue_vc(request.request_id)
    assert verify(dep.issuer.profile.signing_public_key, vc.signing_digest(), proof)
    buffer = dep.issuer.last_key_buffer
    assert buffer is not None and len(buffer) > 0 and not any(buffer)


def test_secret_sharing_bad_reconstruction_is_signing_failure():
    dep = deploy(mode="secret-sharing", threshold=2, total=3)
    _, did, channel = holder(dep)
    request = dep.issuer.request_vc(did, {"grade": "C"}, channel)
    approve(dep.issuer, request, ["entity-1", "entity-2"])
    dep.issuer._encrypted_signing_key = b"\x00" * 64
    with pytest.raises(SigningFailure):
        dep.issuer.issue_vc(request.request_id)
    assert dep.issuer.status(request.request_id).status is RequestStatus.APPROVED


# -- approvals --------------------------------------------------------------------------------------
def test_collect_approval_errors():
    dep = deploy(mode="multisignature", threshold=1, total=3)
    issuer = dep.issuer
    request = issuer.request_did(generate_keypair().public_key)
    _, sig = issuer.entities["entity-2"].respond(request)
    state = issuer.collect_approval(request.request_id, "entity-2", True, sig)
    assert (state.approvals, state.required) == (1, 2)
    with pytest.raises(DuplicateApproval):
        issuer.collect_approval(request.request_id, "entity-2", True, sig)
    with pytest.raises(UnknownEntity):
        issuer.collect_approval(request.request_id, "entity-9", True, sig)
    with pytest.raises(InvalidMaterial) as info:
        issuer.collect_approval(request.request_id, "entity-1", True, sign(generate_keypair().secret_key,
                                                                            request.message))
    assert "entity-1" in str(info.value)
    with pytest.raises(UnknownRequest):
        issuer.collect_approval("req-404", "entity-1", True, sig)


def test_share_from_another_split_is_invalid():
    a = deploy(mode="secret-sharing", threshold=2, total=3, seed=1)
    b = deploy(mode="secret-sharing", threshold=2, total=3, seed=2)
    request = a.issuer.request_did(generate_keypair().public_key)
    with pytest.raises(InvalidMaterial):
        a.issuer.collect_approval(request.request_id, "entity-1", True, b.issuer.entities["entity-1"].share)
    with pytest.raises(InvalidMaterial):  # right split, wrong slot
        a.issuer.collect_approval(request.request_id, "entity-1", True, a.issuer.entities["entity-2"].share)


def test_rejections_close_the_request():
    dep = deploy(mode="multisignature", threshold=1, total=3,
                 entity_policies={"entity-1": ScriptedPolicy({}, default=False),
                                  "entity-2": ScriptedPolicy({}, default=False)})
    request = dep.issuer.request_did(generate_keypair().public_key)
    state = dep.issuer.run_review(request.request_id)
    assert state.status is RequestStatus.REJECTED
    with pytest.raises(RequestClosed):
        dep.issuer.collect_approval(request.request_id, "entity-3", True,
                                    dep.issuer.entities["entity-3"].respond(request)[1])


def test_reviewer_order_is_seeded():
    orders = [deploy(mode="multisignature", threshold=2, total=5, seed=4).issuer
              .request_did(b"\x02" + bytes(32)).reviewers for _ in range(2)]
    assert orders[0] == orders[1]
    assert sorted(orders[0]) == [f"entity-{i}" for i in range(1, 6)]


def test_racing_final_approvals_issue_once():
    dep = deploy(mode="multisignature", threshold=1, total=5)
    request = dep.issuer.request_did(generate_keypair().public_key)
    results = []

    def work(eid):
        _, sig = dep.issuer.entities[eid].respond(request)
        try:
            dep.issuer.collect_approval(request.request_id, eid, True, sig)
            dep.issuer.issue_did(request.request_id)
            results.append("issued")
        except (PolicyNotSatisfied, RequestClosed):
            results.append("no")

    threads = [threading.Thread(target=work, args=(f"entity-{i}",)) for i in range(1, 6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert results.count("issued") == 1


# -- threshold soundness (exhaustive) ---------------------------------------------------------------------
@pytest.mark.parametrize("t,n", [(t, n) for n in range(2, 7) for t in range(1, n)])
def test_multisig_subsets(t, n):
    dep = deploy(mode="multisignature", threshold=t, total=n)
    record = dep.name_service.resolve_consumer("acme")
    _, did, channel = holder(dep)
    ids = dep.issuer.profile.entity_ids
    for size in range(0, n + 1):
        for subset in itertools.combinations(ids, size):
            request = dep.issuer.request_vc(did, {"s": list(subset)}, channel)
            approve(dep.issuer, request, subset)
            if size >= t + 1:
                vc, proof = dep.issuer.issue_vc(request.request_id)
                assert check_issuer_proof(vc, proof, record)
            else:
                with pytest.raises(PolicyNotSatisfied):
                    dep.issuer.issue_vc(request.request_id)


@pytest.mark.parametrize("t,n", [(t, n) for n in range(2, 7) for t in range(1, n)])
def test_secret_sharing_subsets(t, n):
    dep = deploy(mode="secret-sharing", threshold=t, total=n)
    record = dep.name_service.resolve_consumer("acme")
    _, did, channel = holder(dep)
    ids = dep.issuer.profile.entity_ids
    shares = {eid: dep.issuer.entities[eid].share for eid in ids}
    for size in range(0, n + 1):
        for subset in itertools.combinations(ids, size):
            if size == t - 1 and size > 0:
                with pytest.raises(InsufficientShares):
                    reconstruct_secret([shares[e] for e in subset])
            request = dep.issuer.request_vc(did, {"s": list(subset)}, channel)
            approve(dep.issuer, request, subset)
            if size >= t:
                vc, proof = dep.issuer.issue_vc(request.request_id)
                assert check_issuer_proof(vc, proof, record)
            else:
                with pytest.raises(PolicyNotSatisfied):
                    dep.issuer.issue_vc(request.request_id)


def test_shares_are_shares():
    dep = deploy(mode="secret-sharing", threshold=2, total=3)
    assert all(isinstance(a.share, Share) for a in dep.issuer.entities.values())


# -- management ---------------------------------------------------------------------------------------
def test_manage_subject_update_and_revoke():
    dep = deploy()
    key, did, channel = holder(dep)
    vc, proof = dep.issuer.endorse_vc(did, {"grade": "A"}, channel)
    dep.registry.vc_registration(did, vc, proof, sign(key.secret_key, vc.signing_digest()))
    amended, new_proof = dep.issuer.amend_vc(vc, {"grade": "A+"})
    assert amended.vc_id == vc.vc_id and amended.claims == {"grade": "A+"}
    assert verify(dep.issuer.profile.signing_public_key, amended.signing_digest(), new_proof)
    dep.issuer.manage_subject(vc.vc_id, "update", amended)
    assert dep.registry.resolve(vc.vc_id).payload_digest == amended.credential_digest()
    dep.issuer.manage_subject(vc.vc_id, "revoke")
    assert dep.registry.resolve(vc.vc_id).status is SubjectStatus.REVOKED
    with pytest.raises(ValueError):
        dep.issuer.manage_subject(did, "suspend")


def test_manage_subject_of_other_consumer():
    dep = deploy()
    other = dep.add_issuer("globex", seed=5)
    _, did, _ = holder(dep)
    with pytest.raises(Unauthorized):
        other.manage_subject(did, "revoke")
