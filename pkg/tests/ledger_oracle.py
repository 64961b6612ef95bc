"""Reference implementations used as oracles by the ledger tests.

They deliberately share no code with ``ssiaas.ledger``: each answer comes
from a full scan over plain tuples.
"""

from __future__ import annotations

import hashlib
import json
import random

KINDS = ["DidRegistered", "VcRegistered", "DidUpdated", "VcUpdated", "Revoked"]
REGISTRATION_KINDS = {"DidRegistered", "VcRegistered"}


def naive_latest(rows, subject_id):
    """rows: iterable of (sequence, timestamp, kind, subject_id).

    Returns (status, sequence_of_latest) or None.
    """
    mine = [r for r in rows if r[3] == subject_id]
    if not mine:
        return None
    mine.sort(key=lambda r: (r[1], r[0]))
    latest = mine[-1]
    last_registration = max((i for i, r in enumerate(mine) if r[2] in REGISTRATION_KINDS), default=-1)
    revoked = any(r[2] == "Revoked" for r in mine[last_registration + 1:])
    return ("Revoked" if revoked else "Active", latest[0])


def naive_history(rows, subject_id):
    mine = [r for r in rows if r[3] == subject_id]
    return [r[0] for r in sorted(mine, key=lambda r: (r[1], r[0]), reverse=True)]


def random_history(rng: random.Random, subjects: int = 4, length: int | None = None):
    """A random script of (kind, subject, ticks_to_advance_after) steps."""
    length = length if length is not None else rng.randint(1, 24)
    return [(rng.choice(KINDS), f"s{rng.randrange(subjects)}", rng.choice([0, 0, 1, 2])) for _ in range(length)]


def recompute_bundle_digest(record_dicts) -> bytes:
    """sha256 over canonical JSON of the covered records."""
    body = json.dumps(list(record_dicts), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(body.encode()).digest()
