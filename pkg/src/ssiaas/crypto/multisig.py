"""Threshold multisignatures as verified partial-signature aggregation.

A ``t``-threshold set is accepted when at least ``t + 1`` distinct signers
produced valid signatures over the same message. The aggregate is the list of
partials itself, so verification needs the participating keys, which must be a
subset of a known entity key set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Collection, Iterable

from ssiaas.crypto.encoding import hex_decode
from ssiaas.crypto.primitives import Signature, fingerprint, verify
from ssiaas.errors import InvalidPartial, MalformedKey, MalformedSignature, ThresholdNotMet


@dataclass(frozen=True)
class SignatureSet:
    threshold: int
    partials: tuple[tuple[bytes, Signature], ...]

    @property
    def signers(self) -> frozenset[bytes]:
        return frozenset(pk for pk, _ in self.partials)

    def to_json(self) -> dict:
        return {
            "threshold": self.threshold,
            "partials": [{"public_key": pk.hex(), "signature": sig.to_json()} for pk, sig in self.partials],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SignatureSet":
        try:
            partials = tuple(
                (hex_decode(p["public_key"]), Signature.from_json(p["signature"])) for p in obj["partials"]
            )
            return cls(int(obj["threshold"]), partials)
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedSignature(f"bad signature set encoding: {exc}") from exc


def _partial_ok(public_key: bytes, message: bytes, sig: Signature) -> bool:
    try:
        return verify(public_key, message, sig)
    except (MalformedKey, MalformedSignature):
        return False


def aggregate_signatures(
    message: bytes, partials: Iterable[tuple[bytes, Signature]], threshold: int
) -> SignatureSet:
    seen: set[bytes] = set()
    accepted = []
    for public_key, sig in partials:
        if public_key in seen:
            raise InvalidPartial("duplicate signer", signer=fingerprint(public_key))
        if not _partial_ok(public_key, message, sig):
            raise InvalidPartial(f"partial from {fingerprint(public_key)} does not verify",
                                 signer=fingerprint(public_key))
        seen.add(public_key)
        accepted.append((public_key, sig))
    if len(accepted) < threshold + 1:
        raise ThresholdNotMet(f"{len(accepted)} valid partials, need {threshold + 1}",
                              have=len(accepted), need=threshold + 1)
    accepted.sort(key=lambda item: item[0])
    return SignatureSet(threshold, tuple(accepted))


def verify_signature_set(
    sigset: SignatureSet, message: bytes, allowed_keys: Collection[bytes], threshold: int | None = None
) -> bool:
    """True iff enough distinct allowed signers signed ``message``.

    ``threshold`` is the externally trusted policy; when given, the set's own
    claimed threshold must not undercut it.
    """
    required = sigset.threshold if threshold is None else threshold
    if sigset.threshold < required:
        return False
    allowed = set(allowed_keys)
    signers = [pk for pk, _ in sigset.partials]
    if len(set(signers)) != len(signers) or not set(signers) <= allowed:
        return False
    if len(signers) < required + 1:
        return False
    return all(_partial_ok(pk, message, sig) for pk, sig in sigset.partials)
