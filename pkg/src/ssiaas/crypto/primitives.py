"""Keypairs, signatures, digests and challenge encoding.

Keys are self-describing byte strings: one algorithm tag byte followed by the
raw key (a 33-byte compressed point for public keys, a 32-byte big-endian
scalar for secret keys). Signatures are deterministic ECDSA (RFC 6979) in raw
``r || s`` form, so equal inputs always give equal bytes.
"""

from __future__ import annotations

import enum
import functools
import hashlib
import os
import secrets
from dataclasses import dataclass, field
from typing import Any

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec, utils
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from ssiaas.crypto.encoding import b64decode, b64encode, hex_decode
from ssiaas.errors import (
    DecryptionFailure,
    MalformedKey,
    MalformedSignature,
    UnsupportedAlgorithm,
)

DIGEST_SIZE = 32
MIN_CHALLENGE_BYTES = 16
CHALLENGE_BYTES = 32


class Algorithm(str, enum.Enum):
    ECDSA_P256 = "ecdsa-p256"
    ECDSA_SECP256K1 = "ecdsa-secp256k1"


DEFAULT_ALGORITHM = Algorithm.ECDSA_P256

_TAGS = {Algorithm.ECDSA_P256: 0x01, Algorithm.ECDSA_SECP256K1: 0x02}
_BY_TAG = {v: k for k, v in _TAGS.items()}
_CURVES = {Algorithm.ECDSA_P256: ec.SECP256R1, Algorithm.ECDSA_SECP256K1: ec.SECP256K1}
_ORDERS = {
    Algorithm.ECDSA_P256: 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551,
    Algorithm.ECDSA_SECP256K1: 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141,
}
_SIG_ALGO = ec.ECDSA(hashes.SHA256(), deterministic_signing=True)


class Digest(bytes):
    """A 32-byte SHA-256 digest."""

    def __new__(cls, data: bytes) -> "Digest":
        if len(data) != DIGEST_SIZE:
            raise ValueError(f"digest must be {DIGEST_SIZE} bytes, got {len(data)}")
        return super().__new__(cls, data)

    @classmethod
    def from_hex(cls, text: str) -> "Digest":
        return cls(hex_decode(text))

    def __repr__(self) -> str:
        return f"Digest({self.hex()[:16]}...)"


def digest(data: bytes) -> Digest:
    return Digest(hashlib.sha256(data).digest())


def fingerprint(public_key: bytes) -> str:
    """Short stable identifier of a public key (hex, 32 chars)."""
    return hashlib.sha256(public_key).digest()[:16].hex()


@dataclass(frozen=True)
class KeyPair:
    public_key: bytes
    secret_key: bytes = field(repr=False)
    algorithm: Algorithm = DEFAULT_ALGORITHM

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.public_key)


@dataclass(frozen=True)
class Signature:
    data: bytes
    signer_hint: str = ""

    def to_json(self) -> dict[str, str]:
        return {"value": b64encode(self.data), "signer": self.signer_hint}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "Signature":
        try:
            return cls(b64decode(obj["value"]), obj.get("signer", ""))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedSignature(f"bad signature encoding: {exc}") from exc


def _algorithm(algorithm: Algorithm | str) -> Algorithm:
    try:
        return Algorithm(algorithm)
    except ValueError:
        raise UnsupportedAlgorithm(f"unsupported signature algorithm {algorithm!r}") from None


def key_algorithm(key: bytes) -> Algorithm:
    if not key or key[0] not in _BY_TAG:
        raise MalformedKey("unknown key tag")
    return _BY_TAG[key[0]]


def generate_keypair(algorithm: Algorithm | str = DEFAULT_ALGORITHM, seed: bytes | None = None) -> KeyPair:
    """Fresh keypair; with ``seed`` the key is derived deterministically."""
    algo = _algorithm(algorithm)
    curve = _CURVES[algo]()
    if seed is None:
        private = ec.generate_private_key(curve)
    else:
        order = _ORDERS[algo]
        counter = 0
        while True:
            material = hashlib.sha256(b"ssiaas/keygen" + bytes([_TAGS[algo], counter]) + seed).digest()
            scalar = int.from_bytes(material, "big") % order
            if scalar:
                break
            counter += 1
        private = ec.derive_private_key(scalar, curve)
    return _pair_from_private(algo, private)


def _pair_from_private(algo: Algorithm, private: ec.EllipticCurvePrivateKey) -> KeyPair:
    tag = bytes([_TAGS[algo]])
    scalar = private.private_numbers().private_value.to_bytes(32, "big")
    point = private.public_key().public_bytes(Encoding.X962, PublicFormat.CompressedPoint)
    return KeyPair(public_key=tag + point, secret_key=tag + scalar, algorithm=algo)


@functools.lru_cache(maxsize=4096)
def _load_public(public_key: bytes) -> ec.EllipticCurvePublicKey:
    if not isinstance(public_key, (bytes, bytearray)) or len(public_key) != 34:
        raise MalformedKey("public key must be 34 bytes (tag + compressed point)")
    algo = key_algorithm(bytes(public_key))
    try:
        return ec.EllipticCurvePublicKey.from_encoded_point(_CURVES[algo](), bytes(public_key[1:]))
    except ValueError as exc:
        raise MalformedKey(f"invalid curve point: {exc}") from exc


def _load_secret(secret_key: bytes) -> ec.EllipticCurvePrivateKey:
    if not isinstance(secret_key, (bytes, bytearray)) or len(secret_key) != 33:
        raise MalformedKey("secret key must be 33 bytes (tag + scalar)")
    algo = key_algorithm(bytes(secret_key[:1]))
    scalar = int.from_bytes(secret_key[1:], "big")
    if not 0 < scalar < _ORDERS[algo]:
        raise MalformedKey("secret scalar out of range")
    return ec.derive_private_key(scalar, _CURVES[algo]())


def _public_bytes(tag: bytes, private: ec.EllipticCurvePrivateKey) -> bytes:
    return tag + private.public_key().public_bytes(Encoding.X962, PublicFormat.CompressedPoint)


def public_from_secret(secret_key: bytes) -> bytes:
    return _public_bytes(bytes(secret_key[:1]), _load_secret(secret_key))


def sign(secret_key: bytes, message: bytes) -> Signature:
    # secret keys are deliberately not cached; bytearray input is accepted so
    # callers can overwrite their buffer after signing
    private = _load_secret(secret_key)
    der = private.sign(message, _SIG_ALGO)
    r, s = utils.decode_dss_signature(der)
    hint = fingerprint(_public_bytes(bytes(secret_key[:1]), private))
    return Signature(r.to_bytes(32, "big") + s.to_bytes(32, "big"), hint)


def verify(public_key: bytes, message: bytes, sig: Signature | bytes) -> bool:
    key = _load_public(bytes(public_key))
    raw = sig.data if isinstance(sig, Signature) else sig
    if not isinstance(raw, (bytes, bytearray)) or len(raw) != 64:
        raise MalformedSignature("signature must be 64 bytes (r || s)")
    der = utils.encode_dss_signature(int.from_bytes(raw[:32], "big"), int.from_bytes(raw[32:], "big"))
    try:
        key.verify(der, message, _SIG_ALGO)
    except InvalidSignature:
        return False
    return True


# -- sealed boxes (ECIES: ephemeral ECDH + HKDF-SHA256 + AES-256-GCM) ---------
def _box_key(shared: bytes, ephemeral: bytes, recipient: bytes) -> bytes:
    return HKDF(algorithm=hashes.SHA256(), length=32, salt=None, info=b"ssiaas/seal" + ephemeral + recipient).derive(shared)


def seal(public_key: bytes, plaintext: bytes) -> bytes:
    """Encrypt to ``public_key``; output is ephemeral key || nonce || ciphertext."""
    recipient = _load_public(bytes(public_key))
    algo = key_algorithm(bytes(public_key))
    eph = ec.generate_private_key(_CURVES[algo]())
    eph_pub = eph.public_key().public_bytes(Encoding.X962, PublicFormat.CompressedPoint)
    key = _box_key(eph.exchange(ec.ECDH(), recipient), eph_pub, bytes(public_key))
    nonce = os.urandom(12)
    return eph_pub + nonce + AESGCM(key).encrypt(nonce, plaintext, None)


def open_sealed(secret_key: bytes, blob: bytes) -> bytes:
    private = _load_secret(secret_key)
    if len(blob) < 33 + 12 + 16:
        raise DecryptionFailure("sealed blob too short")
    eph_pub, nonce, body = blob[:33], blob[33:45], blob[45:]
    try:
        eph = ec.EllipticCurvePublicKey.from_encoded_point(private.curve, eph_pub)
    except ValueError as exc:
        raise DecryptionFailure("ephemeral key not on the recipient curve") from exc
    key = _box_key(private.exchange(ec.ECDH(), eph), eph_pub, _public_bytes(bytes(secret_key[:1]), private))
    try:
        return AESGCM(key).decrypt(nonce, body, None)
    except InvalidTag as exc:
        raise DecryptionFailure("sealed blob does not open under this key") from exc


def new_nonce(size: int = CHALLENGE_BYTES) -> bytes:
    return secrets.token_bytes(size)


def encode_challenge(message: bytes, public_key: bytes) -> bytes:
    if len(message) < MIN_CHALLENGE_BYTES:
        raise ValueError(f"challenge nonce must be at least {MIN_CHALLENGE_BYTES} bytes")
    return seal(public_key, message)


def respond_challenge(secret_key: bytes, encoded: bytes) -> bytes:
    return open_sealed(secret_key, encoded)


# -- symmetric content encryption --------------------------------------------
def encrypt(key: bytes, plaintext: bytes, aad: bytes = b"") -> bytes:
    nonce = os.urandom(12)
    return nonce + AESGCM(key).encrypt(nonce, plaintext, aad or None)


def decrypt(key: bytes, blob: bytes, aad: bytes = b"") -> bytes:
    if len(blob) < 12 + 16:
        raise DecryptionFailure("ciphertext too short")
    try:
        return AESGCM(key).decrypt(blob[:12], blob[12:], aad or None)
    except InvalidTag as exc:
        raise DecryptionFailure("ciphertext does not open under this key") from exc
