"""Holder agent: key custody, DID/VC storage and presentations.

Both wallet patterns keep every entry encrypted at rest and gate all custody
operations on a password unlock. They differ in where the content key comes
from and where ciphertext may go:

* ``OFFLINE``: the content key is derived from the password; entries live only
  in the local store (plus explicit exports).
* ``ONLINE``: the content key is independent key material, kept locally
  wrapped under the password; entries are synced as ciphertext to a
  :class:`RemoteStore` and can be restored from it with the same key material.
  With ``ASYMMETRIC`` encryption the key material is a keypair and remote
  blobs are sealed to its public key.
"""

from __future__ import annotations

import enum
import hashlib
import hmac
import json
import logging
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from ssiaas.crypto import (
    DEFAULT_ALGORITHM,
    Algorithm,
    KeyPair,
    Signature,
    b64decode,
    b64encode,
    canonical_json,
    decrypt,
    digest,
    encrypt,
    fingerprint,
    generate_keypair,
    open_sealed,
    public_from_secret,
    respond_challenge,
    seal,
    sign,
    verify,
)
from ssiaas.crypto.encoding import hex_decode
from ssiaas.errors import (
    AuthenticationFailed,
    KeyMismatch,
    MalformedKey,
    MalformedSignature,
    NotSubject,
    RemoteUnavailable,
    UnknownCredential,
    WalletError,
    WalletLocked,
    WalletLockedOut,
)
from ssiaas.ledger import LogicalClock
from ssiaas.vdr import (
    ChallengeResponse,
    DelegatedSignature,
    DidDocument,
    Proof,
    RegistrationReceipt,
    VerifiableCredential,
)

logger = logging.getLogger(__name__)

EXPORT_VERSION = 1
UNLOCK_ATTEMPTS = 5
LOCKOUT_TICKS = 60
KDF_N = 2**14


class WalletPattern(str, enum.Enum):
    ONLINE = "online"
    OFFLINE = "offline"


class OnlineEncryption(str, enum.Enum):
    SYMMETRIC = "symmetric"
    ASYMMETRIC = "asymmetric"


class RemoteBackend(str, enum.Enum):
    CLOUD_LIKE = "cloud"
    DECENTRALIZED_LIKE = "decentralized"


class RemoteStore:
    """In-memory stand-in for cloud or decentralized storage.

    A decentralized store has no access control: anyone holding an id can
    read the blob, which is why only ciphertext is ever written to it.
    """

    def __init__(self, backend: RemoteBackend | str = RemoteBackend.CLOUD_LIKE) -> None:
        self.backend = RemoteBackend(backend)
        self.available = True
        self._blobs: dict[str, bytes] = {}

    def _check(self) -> None:
        if not self.available:
            raise RemoteUnavailable(f"{self.backend.value} store is unreachable")

    def put(self, entry_id: str, blob: bytes) -> None:
        self._check()
        self._blobs[entry_id] = bytes(blob)

    def get(self, entry_id: str) -> bytes:
        self._check()
        return self._blobs[entry_id]

    def list(self) -> list[str]:
        self._check()
        return sorted(self._blobs)


class DirectoryRemoteStore(RemoteStore):
    """Remote store backed by files in a directory (one file per entry)."""

    def __init__(self, path: str | os.PathLike, backend: RemoteBackend | str = RemoteBackend.CLOUD_LIKE) -> None:
        super().__init__(backend)
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)

    def _file(self, entry_id: str) -> Path:
        return self.path / (hashlib.sha256(entry_id.encode()).hexdigest() + ".blob")

    def put(self, entry_id: str, blob: bytes) -> None:
        self._check()
        self._file(entry_id).write_text(json.dumps({"id": entry_id, "blob": b64encode(blob)}))

    def get(self, entry_id: str) -> bytes:
        self._check()
        f = self._file(entry_id)
        if not f.exists():
            raise KeyError(entry_id)
        return b64decode(json.loads(f.read_text())["blob"])

    def list(self) -> list[str]:
        self._check()
        return sorted(json.loads(f.read_text())["id"] for f in self.path.glob("*.blob"))


@dataclass(frozen=True)
class IdentityRequest:
    """What a holder sends an issuer to obtain a DID."""

    public_key: bytes
    proof_documents: Mapping[str, Any] = field(default_factory=dict)

    @property
    def key_id(self) -> str:
        return fingerprint(self.public_key)

    def to_json(self) -> dict:
        return {"public_key": self.public_key.hex(), "proof_documents": dict(self.proof_documents)}

    @classmethod
    def from_json(cls, obj: dict) -> "IdentityRequest":
        return cls(hex_decode(obj["public_key"]), dict(obj.get("proof_documents", {})))


def presentation_digest(holder_did: str, credentials: Iterable[VerifiableCredential], nonce: bytes):
    return digest(canonical_json({
        "holder": holder_did,
        "credentials": [vc.credential_digest().hex() for vc in credentials],
        "nonce": nonce.hex(),
    }))


@dataclass(frozen=True)
class VerifiablePresentation:
    holder_did: str
    credentials: tuple[VerifiableCredential, ...]
    verifier_nonce: bytes
    holder_signature: Signature

    def digest(self):
        return presentation_digest(self.holder_did, self.credentials, self.verifier_nonce)

    def signature_valid(self, holder_public_key: bytes) -> bool:
        try:
            return verify(holder_public_key, self.digest(), self.holder_signature)
        except (MalformedKey, MalformedSignature):
            return False

    def to_json(self) -> dict:
        return {
            "holder": self.holder_did,
            "verifiableCredential": [vc.to_json() for vc in self.credentials],
            "nonce": self.verifier_nonce.hex(),
            "proof": self.holder_signature.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "VerifiablePresentation":
        return cls(
            obj["holder"],
            tuple(VerifiableCredential.from_json(v) for v in obj["verifiableCredential"]),
            hex_decode(obj["nonce"]),
            Signature.from_json(obj["proof"]),
        )


def _derive(password: str, salt: bytes, n: int) -> tuple[bytes, bytes]:
    material = hashlib.scrypt(password.encode("utf-8"), salt=salt, n=n, r=8, p=1, dklen=64)
    return material[:32], hashlib.sha256(material[32:]).digest()


class Wallet:
    def __init__(
        self,
        pattern: WalletPattern | str,
        password: str,
        *,
        key_material: bytes | None = None,
        encryption: OnlineEncryption | str = OnlineEncryption.SYMMETRIC,
        remote: RemoteStore | None = None,
        clock: LogicalClock | None = None,
        algorithm: Algorithm | str = DEFAULT_ALGORITHM,
        seed: bytes | None = None,
        max_attempts: int = UNLOCK_ATTEMPTS,
        lockout_ticks: int = LOCKOUT_TICKS,
        kdf_n: int = KDF_N,
    ) -> None:
        self.pattern = WalletPattern(pattern)
        self.encryption = OnlineEncryption(encryption)
        self.remote = remote
        self.clock = clock or LogicalClock()
        self.algorithm = Algorithm(algorithm)
        self.max_attempts = max_attempts
        self.lockout_ticks = lockout_ticks
        self._seed = seed
        self._key_counter = 0
        self._kdf_n = kdf_n
        self._salt = os.urandom(16)
        password_key, self._check_value = _derive(password, self._salt, kdf_n)
        self._wrapped_material: bytes | None = None
        if self.pattern is WalletPattern.ONLINE:
            if key_material is None:
                if self.encryption is OnlineEncryption.ASYMMETRIC:
                    key_material = generate_keypair(self.algorithm).secret_key
                else:
                    key_material = os.urandom(32)
            self._wrapped_material = encrypt(password_key, key_material, b"key-material")
        self._entries: dict[str, bytes] = {}
        self._failures = 0
        self._locked_until = -1
        self._lock = threading.RLock()
        self._content_key: bytes | None = None
        self._material: bytes | None = None
        self._open(password_key)

    # -- lock state -----------------------------------------------------------
    def _open(self, password_key: bytes) -> None:
        if self.pattern is WalletPattern.OFFLINE:
            self._content_key = password_key
        else:
            self._material = decrypt(password_key, self._wrapped_material, b"key-material")
            if self.encryption is OnlineEncryption.SYMMETRIC:
                self._content_key = self._material
            else:
                self._content_key = hashlib.sha256(b"ssiaas/wallet-local" + self._material).digest()

    @property
    def locked(self) -> bool:
        return self._content_key is None

    def lock(self) -> None:
        with self._lock:
            self._content_key = None
            self._material = None

    def unlock(self, password: str) -> bool:
        with self._lock:
            if self.clock.now < self._locked_until:
                raise WalletLockedOut(f"too many failed attempts; locked until tick {self._locked_until}")
            password_key, check = _derive(password, self._salt, self._kdf_n)
            if not hmac.compare_digest(check, self._check_value):
                self._failures += 1
                if self._failures >= self.max_attempts:
                    self._locked_until = self.clock.now + self.lockout_ticks
                    self._failures = 0
                logger.info("wallet unlock failed")
                raise AuthenticationFailed("wrong wallet password")
            self._failures = 0
            self._open(password_key)
            return True

    def _require_unlocked(self) -> bytes:
        key = self._content_key
        if key is None:
            raise WalletLocked("wallet is locked")
        return key

    # -- entry storage ----------------------------------------------------------
    def _put(self, entry_id: str, value: dict) -> None:
        key = self._require_unlocked()
        self._entries[entry_id] = encrypt(key, canonical_json(value), entry_id.encode())

    def _get(self, entry_id: str) -> dict:
        key = self._require_unlocked()
        return json.loads(decrypt(key, self._entries[entry_id], entry_id.encode()))

    def _ids(self, prefix: str) -> list[str]:
        self._require_unlocked()
        return sorted(i[len(prefix):] for i in self._entries if i.startswith(prefix))

    def _keypair(self, fp: str) -> KeyPair:
        entry = self._get(f"key:{fp}")
        return KeyPair(hex_decode(entry["public"]), hex_decode(entry["secret"]), Algorithm(entry["algorithm"]))

    def _keypair_for_public(self, public_key: bytes) -> KeyPair:
        fp = fingerprint(public_key)
        if f"key:{fp}" not in self._entries:
            raise KeyMismatch("public key is not held by this wallet")
        return self._keypair(fp)

    def _keypair_for_did(self, did: str) -> KeyPair:
        if f"did:{did}" not in self._entries:
            raise NotSubject(f"{did} is not held by this wallet")
        return self._keypair(self._get(f"did:{did}")["key"])

    # -- identities ---------------------------------------------------------------
    def create_identity(self, proof_documents: Mapping[str, Any] | None = None) -> IdentityRequest:
        with self._lock:
            self._require_unlocked()
            seed = None
            if self._seed is not None:
                seed = self._seed + self._key_counter.to_bytes(4, "big")
                self._key_counter += 1
            pair = generate_keypair(self.algorithm, seed=seed)
            self._put(f"key:{pair.fingerprint}", {
                "algorithm": pair.algorithm.value, "public": pair.public_key.hex(), "secret": pair.secret_key.hex(),
            })
            logger.info("created identity key %s", pair.fingerprint)
            return IdentityRequest(pair.public_key, dict(proof_documents or {}))

    def public_keys(self) -> list[bytes]:
        return [hex_decode(self._get(f"key:{fp}")["public"]) for fp in self._ids("key:")]

    def dids(self) -> list[str]:
        return self._ids("did:")

    def document(self, did: str) -> DidDocument:
        if f"did:{did}" not in self._entries:
            raise NotSubject(f"{did} is not held by this wallet")
        return DidDocument.from_json(self._get(f"did:{did}")["document"])

    def sign_delegation(self, did: str, document: DidDocument) -> DelegatedSignature:
        """Sig_u over the DID, for a third party registering on the holder's behalf."""
        pair = self._keypair_for_public(document.subject_public_key)
        return DelegatedSignature(sign(pair.secret_key, did.encode()))

    def register_did(self, registry, did: str, document: DidDocument, *, delegated: bool = False) -> RegistrationReceipt:
        with self._lock:
            pair = self._keypair_for_public(document.subject_public_key)
            if delegated:
                auth = DelegatedSignature(sign(pair.secret_key, did.encode()))
            else:
                challenge = registry.request_challenge(did, document)
                auth = ChallengeResponse(challenge.challenge_id, respond_challenge(pair.secret_key, challenge.encoded))
            receipt = registry.did_registration(did, document, auth)
            self._put(f"did:{did}", {"document": document.to_json(), "receipt": receipt.to_json(),
                                     "key": pair.fingerprint})
            logger.info("registered %s at sequence %d", did, receipt.record.sequence)
            return receipt

    # -- credentials --------------------------------------------------------------
    def register_vc(self, registry, vc: VerifiableCredential, issuer_proof: Proof, *, delegated: bool = False) -> RegistrationReceipt:
        with self._lock:
            self._require_unlocked()
            if f"did:{vc.subject_did}" not in self._entries:
                raise NotSubject(f"credential subject {vc.subject_did} is not held by this wallet")
            pair = self._keypair_for_did(vc.subject_did)
            vc = vc.with_proof(issuer_proof)
            holder_sig = sign(pair.secret_key, vc.signing_digest())
            auth = None
            if not delegated:
                challenge = registry.request_challenge(vc.subject_did)
                auth = ChallengeResponse(challenge.challenge_id, respond_challenge(pair.secret_key, challenge.encoded))
            receipt = registry.vc_registration(vc.subject_did, vc, issuer_proof, holder_sig, auth)
            self._put(f"vc:{vc.vc_id}", {"vc": vc.to_json(), "receipt": receipt.to_json()})
            return receipt

    def store_credential(self, vc: VerifiableCredential) -> None:
        """Replace a held credential, e.g. after the issuer updated it."""
        with self._lock:
            old = self._get(f"vc:{vc.vc_id}") if f"vc:{vc.vc_id}" in self._entries else {}
            self._put(f"vc:{vc.vc_id}", {"vc": vc.to_json(), "receipt": old.get("receipt")})

    def credential_ids(self) -> list[str]:
        return self._ids("vc:")

    def credential(self, vc_id: str) -> VerifiableCredential:
        if f"vc:{vc_id}" not in self._entries:
            raise UnknownCredential(f"credential {vc_id} is not held")
        return VerifiableCredential.from_json(self._get(f"vc:{vc_id}")["vc"])

    def receipt(self, subject_id: str) -> RegistrationReceipt:
        key = f"did:{subject_id}" if subject_id.startswith("did:") else f"vc:{subject_id}"
        return RegistrationReceipt.from_json(self._get(key)["receipt"])

    # -- presentations ------------------------------------------------------------
    def respond(self, did: str, encoded: bytes) -> bytes:
        """Holder side of a challenge; usable as a verifier's holder channel."""
        with self._lock:
            return respond_challenge(self._keypair_for_did(did).secret_key, encoded)

    def compose_presentation(self, credential_ids: Iterable[str], verifier_nonce: bytes) -> VerifiablePresentation:
        with self._lock:
            self._require_unlocked()
            ids = list(credential_ids)
            if not ids:
                raise UnknownCredential("a presentation needs at least one credential")
            if len(set(ids)) != len(ids):
                raise UnknownCredential("duplicate credential in selection")
            credentials = tuple(self.credential(i) for i in ids)
            holders = {vc.subject_did for vc in credentials}
            if len(holders) != 1:
                raise WalletError("selected credentials belong to different DIDs")
            holder_did = holders.pop()
            pair = self._keypair_for_did(holder_did)
            sig = sign(pair.secret_key, presentation_digest(holder_did, credentials, verifier_nonce))
            return VerifiablePresentation(holder_did, credentials, bytes(verifier_nonce), sig)

    # -- online sync and backups ----------------------------------------------------
    def _remote_blob(self, entry_id: str) -> bytes:
        plaintext = decrypt(self._require_unlocked(), self._entries[entry_id], entry_id.encode())
        if self.encryption is OnlineEncryption.ASYMMETRIC:
            return seal(public_from_secret(self._material), plaintext)
        return self._entries[entry_id]

    def sync_online(self, remote: RemoteStore | None = None) -> int:
        if self.pattern is not WalletPattern.ONLINE:
            raise WalletError("only online wallets sync to remote storage")
        remote = remote or self.remote
        if remote is None:
            raise RemoteUnavailable("no remote store configured")
        with self._lock:
            self._require_unlocked()
            if not remote.available:
                raise RemoteUnavailable(f"{remote.backend.value} store is unreachable")
            blobs = {entry_id: self._remote_blob(entry_id) for entry_id in self._entries}
            for entry_id, blob in blobs.items():
                remote.put(entry_id, blob)
            return len(blobs)

    @classmethod
    def restore(
        cls,
        remote: RemoteStore,
        key_material: bytes,
        password: str,
        *,
        encryption: OnlineEncryption | str = OnlineEncryption.SYMMETRIC,
        **kwargs: Any,
    ) -> "Wallet":
        """Rebuild an online wallet from remote ciphertext and its key material."""
        wallet = cls(WalletPattern.ONLINE, password, key_material=key_material, encryption=encryption,
                     remote=remote, **kwargs)
        for entry_id in remote.list():
            blob = remote.get(entry_id)
            if wallet.encryption is OnlineEncryption.ASYMMETRIC:
                plaintext = open_sealed(key_material, blob)
                wallet._entries[entry_id] = encrypt(wallet._content_key, plaintext, entry_id.encode())
            else:
                decrypt(key_material, blob, entry_id.encode())  # authenticity check
                wallet._entries[entry_id] = blob
        wallet._key_counter = len(wallet._ids("key:"))
        return wallet

    def export_key_material(self, password: str) -> bytes:
        """Online key material for recovery; requires the password again."""
        if self.pattern is not WalletPattern.ONLINE:
            raise WalletError("offline wallets have no separate key material")
        password_key, check = _derive(password, self._salt, self._kdf_n)
        if not hmac.compare_digest(check, self._check_value):
            raise AuthenticationFailed("wrong wallet password")
        return decrypt(password_key, self._wrapped_material, b"key-material")

    def export(self) -> dict:
        """Encrypted container: every entry stays ciphertext."""
        return {
            "version": EXPORT_VERSION,
            "pattern": self.pattern.value,
            "encryption": self.encryption.value,
            "algorithm": self.algorithm.value,
            "kdf": {"name": "scrypt", "salt": b64encode(self._salt), "n": self._kdf_n, "r": 8, "p": 1},
            "check": self._check_value.hex(),
            "wrapped_key": b64encode(self._wrapped_material) if self._wrapped_material else None,
            "key_counter": self._key_counter,
            "entries": {entry_id: b64encode(blob) for entry_id, blob in sorted(self._entries.items())},
        }

    @classmethod
    def from_export(cls, container: Mapping[str, Any], clock: LogicalClock | None = None, **kwargs: Any) -> "Wallet":
        """Load an exported container; the result is locked until :meth:`unlock`."""
        if container.get("version") != EXPORT_VERSION:
            raise WalletError(f"unsupported wallet export version {container.get('version')!r}")
        wallet = cls.__new__(cls)
        wallet.pattern = WalletPattern(container["pattern"])
        wallet.encryption = OnlineEncryption(container["encryption"])
        wallet.remote = kwargs.get("remote")
        wallet.clock = clock or LogicalClock()
        wallet.algorithm = Algorithm(container.get("algorithm", DEFAULT_ALGORITHM.value))
        wallet.max_attempts = kwargs.get("max_attempts", UNLOCK_ATTEMPTS)
        wallet.lockout_ticks = kwargs.get("lockout_ticks", LOCKOUT_TICKS)
        wallet._seed = kwargs.get("seed")
        wallet._key_counter = int(container.get("key_counter", 0))
        wallet._kdf_n = int(container["kdf"]["n"])
        wallet._salt = b64decode(container["kdf"]["salt"])
        wallet._check_value = bytes.fromhex(container["check"])
        wallet._wrapped_material = b64decode(container["wrapped_key"]) if container.get("wrapped_key") else None
        wallet._entries = {k: b64decode(v) for k, v in container["entries"].items()}
        wallet._failures = 0
        wallet._locked_until = -1
        wallet._lock = threading.RLock()
        wallet._content_key = None
        wallet._material = None
        return wallet
