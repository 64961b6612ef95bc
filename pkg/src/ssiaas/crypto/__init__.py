from ssiaas.crypto.encoding import b64decode, b64encode, canonical_json
from ssiaas.crypto.multisig import SignatureSet, aggregate_signatures, verify_signature_set
from ssiaas.crypto.primitives import (
    DEFAULT_ALGORITHM,
    Algorithm,
    Digest,
    KeyPair,
    Signature,
    decrypt,
    digest,
    encode_challenge,
    encrypt,
    fingerprint,
    generate_keypair,
    new_nonce,
    open_sealed,
    public_from_secret,
    respond_challenge,
    seal,
    sign,
    verify,
)
from ssiaas.crypto.shamir import GF256, BinaryField, Share, reconstruct_secret, split_secret

__all__ = [
    "Algorithm", "BinaryField", "DEFAULT_ALGORITHM", "Digest", "GF256", "KeyPair", "Share",
    "Signature", "SignatureSet", "aggregate_signatures", "b64decode", "b64encode",
    "canonical_json", "decrypt", "digest", "encode_challenge", "encrypt", "fingerprint",
    "generate_keypair", "new_nonce", "open_sealed", "public_from_secret", "reconstruct_secret",
    "respond_challenge", "seal", "sign", "split_secret", "verify", "verify_signature_set",
]
