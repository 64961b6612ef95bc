"""Deterministic artifacts whose bytes are frozen in data/golden.json.

Run this module directly to print the current values; the golden test
compares them against the frozen file.
"""

import json
import random

from conftest import FAST_KDF, deploy
from ssiaas.crypto import canonical_json, digest, generate_keypair, sign
from ssiaas.crypto.shamir import split_secret
from ssiaas.wallet import Wallet


def compute() -> dict:
    out: dict = {}
    message = digest(b"golden message")
    for algorithm in ("ecdsa-p256", "ecdsa-secp256k1"):
        pair = generate_keypair(algorithm, seed=b"golden")
        out[algorithm] = {
            "public_key": pair.public_key.hex(),
            "fingerprint": pair.fingerprint,
            "signature": sign(pair.secret_key, message).to_json(),
        }
    out["canonical_json"] = canonical_json({"b": [1, "é"], "a": {"z": None, "y": True}}).decode()
    rng = random.Random(3)
    shares = split_secret(b"golden", 2, 3, randbelow=rng.randrange)
    out["shares"] = [s.value.hex() for s in shares]

    dep = deploy("permissioned-pdl", seed=5)
    wallet = Wallet("offline", "pw", clock=dep.clock, seed=b"golden-holder", kdf_n=FAST_KDF)
    did, document = dep.issuer.endorse_did(wallet.create_identity().public_key)
    wallet.register_did(dep.registry, did, document)
    vc, proof = dep.issuer.endorse_vc(did, {"degree": "BSc"}, wallet.respond)
    out["issuer_signing_key"] = dep.issuer.profile.signing_public_key.hex()
    out["did"] = did
    out["document_digest"] = document.digest().hex()
    out["vc_id"] = vc.vc_id
    out["credential_digest"] = vc.credential_digest().hex()
    out["issuer_proof"] = proof.to_json()
    return out


if __name__ == "__main__":
    print(json.dumps(compute(), indent=2, sort_keys=True))
