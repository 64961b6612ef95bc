"""Byte stability of keys, signatures, digests and identifiers.

Values were produced by ``golden_values.py`` and frozen; each is also
re-derived here by an independent route where one exists.
"""

import hashlib
import json

import pytest
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec, utils
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from conftest import DATA
from golden_values import compute
from ssiaas.crypto import b64decode, digest

GOLDEN = json.loads((DATA / "golden.json").read_text())
CURVES = {"ecdsa-p256": (1, ec.SECP256R1()), "ecdsa-secp256k1": (2, ec.SECP256K1())}


@pytest.fixture(scope="module")
def current():
    return compute()


def test_all_values_are_frozen(current):
    assert current == GOLDEN


@pytest.mark.parametrize("algorithm", sorted(CURVES))
def test_keys_rederived_independently(algorithm):
    tag, curve = CURVES[algorithm]
    scalar = int.from_bytes(hashlib.sha256(b"ssiaas/keygen" + bytes([tag, 0]) + b"golden").digest(), "big")
    public = ec.derive_private_key(scalar % curve_order(algorithm), curve).public_key()
    expected = bytes([tag]) + public.public_bytes(Encoding.X962, PublicFormat.CompressedPoint)
    assert GOLDEN[algorithm]["public_key"] == expected.hex()
    assert GOLDEN[algorithm]["fingerprint"] == hashlib.sha256(expected).hexdigest()[:32]


def curve_order(algorithm):
    return {
        "ecdsa-p256": 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551,
        "ecdsa-secp256k1": 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141,
    }[algorithm]


@pytest.mark.parametrize("algorithm", sorted(CURVES))
def test_frozen_signatures_verify_with_the_library(algorithm):
    _, curve = CURVES[algorithm]
    public = ec.EllipticCurvePublicKey.from_encoded_point(curve, bytes.fromhex(GOLDEN[algorithm]["public_key"])[1:])
    raw = b64decode(GOLDEN[algorithm]["signature"]["value"])
    der = utils.encode_dss_signature(int.from_bytes(raw[:32], "big"), int.from_bytes(raw[32:], "big"))
    public.verify(der, hashlib.sha256(b"golden message").digest(), ec.ECDSA(hashes.SHA256()))


def test_canonical_json_matches_stdlib():
    obj = {"b": [1, "é"], "a": {"z": None, "y": True}}
    assert GOLDEN["canonical_json"] == json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def test_vc_id_is_the_digest_of_its_body():
    body = {"credentialSubject": {"id": GOLDEN["did"], "claims": {"degree": "BSc"}},
            "issuer": {"id": "acme", "publicKey": GOLDEN["issuer_signing_key"]}}
    text = json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()
    assert GOLDEN["vc_id"] == digest(text).hex() == hashlib.sha256(text).hexdigest()
