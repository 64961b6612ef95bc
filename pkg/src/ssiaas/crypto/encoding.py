"""Canonical byte encodings.

Keys and digests travel as lowercase hex, signatures as standard base64, and
every hashed JSON structure is serialized with sorted keys and no whitespace.
"""

from __future__ import annotations

import base64
import binascii
import json
from typing import Any


def canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def b64encode(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def b64decode(text: str) -> bytes:
    try:
        return base64.b64decode(text.encode("ascii"), validate=True)
    except (binascii.Error, ValueError, UnicodeEncodeError) as exc:
        raise ValueError(f"invalid base64: {exc}") from exc


def hex_decode(text: str) -> bytes:
    try:
        return bytes.fromhex(text)
    except (ValueError, TypeError) as exc:
        raise ValueError(f"invalid hex: {exc}") from exc
