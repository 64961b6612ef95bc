"""Simulated append-only ledgers behind one interface.

Consensus is not implemented: a record becomes final ``block_latency`` ticks
of a shared :class:`LogicalClock` after submission, and only final records are
visible to queries. Four data patterns are available:

* permissionless: anyone may write; slow finality.
* permissioned CDL: one consortium ledger shared by many services, gated by a
  global :class:`AuthorizationSystem`.
* permissioned PDL: a private ledger per service with its own authorization.
* sub-ledger: a permissioned ledger that periodically anchors bundles of its
  records onto a permissionless master.

Ledgers store identifiers and digests only; documents and credentials never
reach them.
"""

from __future__ import annotations

import enum
import json
import threading
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

from ssiaas.crypto import Digest, KeyPair, canonical_json, digest, generate_keypair, new_nonce, sign, verify
from ssiaas.errors import LedgerUnavailable, MasterUnavailable, Unauthorized, UnknownBundle


class LogicalClock:
    """Monotone tick counter shared by every ledger of a deployment."""

    def __init__(self, start: int = 0) -> None:
        self._now = start
        self._lock = threading.Lock()

    @property
    def now(self) -> int:
        return self._now

    def advance(self, ticks: int = 1) -> int:
        if ticks < 0:
            raise ValueError("time only moves forward")
        with self._lock:
            self._now += ticks
            return self._now

    def advance_to(self, tick: int) -> int:
        with self._lock:
            self._now = max(self._now, tick)
            return self._now


class LedgerPattern(str, enum.Enum):
    PERMISSIONLESS = "permissionless"
    PERMISSIONED_CDL = "permissioned-cdl"
    PERMISSIONED_PDL = "permissioned-pdl"
    SUB_LEDGER = "sub-ledger"

    @property
    def permissioned(self) -> bool:
        return self is not LedgerPattern.PERMISSIONLESS


class EventKind(str, enum.Enum):
    DID_REGISTERED = "DidRegistered"
    VC_REGISTERED = "VcRegistered"
    DID_UPDATED = "DidUpdated"
    VC_UPDATED = "VcUpdated"
    REVOKED = "Revoked"
    ANCHOR_BUNDLE = "AnchorBundle"


REGISTRATIONS = frozenset({EventKind.DID_REGISTERED, EventKind.VC_REGISTERED})

DEFAULT_BLOCK_LATENCY = {
    LedgerPattern.PERMISSIONLESS: 6,
    LedgerPattern.PERMISSIONED_CDL: 1,
    LedgerPattern.PERMISSIONED_PDL: 1,
    LedgerPattern.SUB_LEDGER: 1,
}
DEFAULT_ANCHOR_PERIOD = 8


class SubjectStatus(str, enum.Enum):
    ACTIVE = "Active"
    REVOKED = "Revoked"


@dataclass(frozen=True)
class LedgerRecord:
    sequence: int
    timestamp: int
    event_kind: EventKind
    subject_id: str
    payload_digest: Digest
    submitter: str

    def to_json(self) -> dict:
        return {
            "sequence": self.sequence,
            "timestamp": self.timestamp,
            "event_kind": self.event_kind.value,
            "subject_id": self.subject_id,
            "payload_digest": self.payload_digest.hex(),
            "submitter": self.submitter,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LedgerRecord":
        return cls(
            int(obj["sequence"]),
            int(obj["timestamp"]),
            EventKind(obj["event_kind"]),
            obj["subject_id"],
            Digest.from_hex(obj["payload_digest"]),
            obj["submitter"],
        )


@dataclass(frozen=True)
class LedgerConfig:
    pattern: LedgerPattern
    did_method: str
    block_latency: int | None = None
    anchor_period: int = DEFAULT_ANCHOR_PERIOD
    authorized_writers: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "pattern", LedgerPattern(self.pattern))
        object.__setattr__(self, "authorized_writers", frozenset(self.authorized_writers))
        if self.block_latency is None:
            object.__setattr__(self, "block_latency", DEFAULT_BLOCK_LATENCY[self.pattern])
        if not self.did_method:
            raise ValueError("did_method must be non-empty")
        if self.block_latency < 0:
            raise ValueError("block_latency must be >= 0")
        if self.anchor_period < 1:
            raise ValueError("anchor_period must be >= 1")


@dataclass(frozen=True)
class Resolution:
    status: SubjectStatus
    latest: LedgerRecord


@dataclass(frozen=True)
class PendingRecord:
    sequence: int
    ready_at: int


@dataclass(frozen=True)
class AnchorBundle:
    bundle_id: int
    covered_range: tuple[int, int]
    bundle_digest: Digest
    master_receipt: int


class AuthorizationSystem:
    """Set of writer fingerprints allowed on a permissioned ledger."""

    def __init__(self, writers: Iterable[str] = (), scope: str = "local") -> None:
        self.scope = scope
        self._writers = set(writers)
        self._lock = threading.Lock()

    def authorize(self, fp: str) -> None:
        with self._lock:
            self._writers.add(fp)

    def revoke(self, fp: str) -> None:
        with self._lock:
            self._writers.discard(fp)

    def is_authorized(self, fp: str) -> bool:
        with self._lock:
            return fp in self._writers

    def __len__(self) -> int:
        return len(self._writers)


def bundle_digest(records: Iterable[LedgerRecord]) -> Digest:
    return digest(canonical_json([r.to_json() for r in records]))


def latest_of(records: Iterable[LedgerRecord], subject_id: str) -> Resolution | None:
    """Newest-first linear scan over final records."""
    latest = None
    revoked = False
    for record in sorted(records, key=lambda r: (r.timestamp, r.sequence), reverse=True):
        if record.subject_id != subject_id:
            continue
        if latest is None:
            latest = record
        if record.event_kind is EventKind.REVOKED:
            revoked = True
        if record.event_kind in REGISTRATIONS:
            break
    if latest is None:
        return None
    return Resolution(SubjectStatus.REVOKED if revoked else SubjectStatus.ACTIVE, latest)


class Ledger:
    def __init__(
        self,
        config: LedgerConfig,
        clock: LogicalClock | None = None,
        authorization: AuthorizationSystem | None = None,
        name: str | None = None,
    ) -> None:
        self.config = config
        self.clock = clock or LogicalClock()
        self.name = name or config.did_method
        self.available = True
        if config.pattern.permissioned:
            self.authorization = authorization or AuthorizationSystem(config.authorized_writers)
            if not len(self.authorization):
                raise ValueError("permissioned ledgers need at least one authorized writer")
        else:
            self.authorization = None
        self._records: list[LedgerRecord] = []
        self._pending: list[tuple[int, LedgerRecord]] = []
        self._next_sequence = 1
        self._lock = threading.RLock()
        self._listeners: list[Callable[[LedgerRecord], None]] = []

    # -- writers ------------------------------------------------------------
    def connect(self, keypair: KeyPair) -> "LedgerWriter":
        """Open a writer session after a proof-of-possession exchange."""
        nonce = new_nonce()
        if not verify(keypair.public_key, nonce, sign(keypair.secret_key, nonce)):
            raise Unauthorized("proof of possession failed")
        self._check_writer(keypair.fingerprint)
        return LedgerWriter(self, keypair.fingerprint)

    def _check_writer(self, fp: str) -> None:
        if self.authorization is not None and not self.authorization.is_authorized(fp):
            raise Unauthorized(f"writer {fp} is not authorized on {self.name}", submitter=fp)

    def _check_available(self) -> None:
        if not self.available:
            raise LedgerUnavailable(f"ledger {self.name} is unavailable")

    def _submit(self, kind: EventKind, subject_id: str, payload_digest: Digest, submitter: str) -> PendingRecord:
        with self._lock:
            self._check_available()
            self._check_writer(submitter)
            ready = self.clock.now + self.config.block_latency
            record = LedgerRecord(self._next_sequence, ready, EventKind(kind), subject_id,
                                  Digest(payload_digest), submitter)
            self._next_sequence += 1
            self._pending.append((ready, record))
            pending = PendingRecord(record.sequence, ready)
        self._promote()
        return pending

    def wait_for(self, pending: PendingRecord) -> LedgerRecord:
        """Advance the clock until ``pending`` is final and return it."""
        self.clock.advance_to(pending.ready_at)
        self._promote()
        record = self.record_at(pending.sequence)
        if record is None:
            raise LedgerUnavailable(f"record {pending.sequence} was not finalized")
        return record

    def _promote(self) -> None:
        now = self.clock.now
        fresh = []
        with self._lock:
            if not self._pending:
                return
            keep = []
            for ready, record in self._pending:
                if ready <= now:
                    fresh.append(record)
                else:
                    keep.append((ready, record))
            self._pending = keep
            fresh.sort(key=lambda r: r.sequence)
            self._records.extend(fresh)
        for record in fresh:
            for listener in list(self._listeners):
                listener(record)

    def subscribe(self, listener: Callable[[LedgerRecord], None]) -> None:
        self._listeners.append(listener)

    # -- reads --------------------------------------------------------------
    def records(self) -> tuple[LedgerRecord, ...]:
        self._check_available()
        self._promote()
        with self._lock:
            return tuple(self._records)

    def __iter__(self) -> Iterator[LedgerRecord]:
        return iter(self.records())

    def __len__(self) -> int:
        return len(self.records())

    @property
    def pending_count(self) -> int:
        with self._lock:
            return len(self._pending)

    def record_at(self, sequence: int) -> LedgerRecord | None:
        with self._lock:
            # sequences are dense in submission order but finalization may interleave
            for record in reversed(self._records):
                if record.sequence == sequence:
                    return record
        return None

    def query_latest(self, subject_id: str) -> Resolution | None:
        return latest_of(self.records(), subject_id)

    def history(self, subject_id: str) -> list[LedgerRecord]:
        matching = [r for r in self.records() if r.subject_id == subject_id]
        return sorted(matching, key=lambda r: (r.timestamp, r.sequence), reverse=True)

    # -- snapshots ----------------------------------------------------------
    def export_ndjson(self, submitter: str | None = None) -> str:
        lines = [
            json.dumps(r.to_json(), sort_keys=True)
            for r in self.records()
            if submitter is None or r.submitter == submitter
        ]
        return "".join(line + "\n" for line in lines)

    @classmethod
    def from_ndjson(cls, text: str, config: LedgerConfig, clock: LogicalClock | None = None, **kwargs) -> "Ledger":
        ledger = cls(config, clock, **kwargs)
        records = parse_ndjson(text)
        last = 0
        for record in records:
            if record.sequence <= last:
                raise ValueError(f"sequence {record.sequence} out of order in snapshot")
            last = record.sequence
        ledger._records = list(records)
        ledger._next_sequence = last + 1
        if records:
            ledger.clock.advance_to(max(r.timestamp for r in records))
        return ledger


def parse_ndjson(text: str) -> list[LedgerRecord]:
    return [LedgerRecord.from_json(json.loads(line)) for line in text.splitlines() if line.strip()]


@dataclass
class LedgerWriter:
    ledger: Ledger
    fingerprint: str

    def submit(self, kind: EventKind, subject_id: str, payload_digest: Digest) -> PendingRecord:
        return self.ledger._submit(kind, subject_id, payload_digest, self.fingerprint)

    def append(self, kind: EventKind, subject_id: str, payload_digest: Digest) -> LedgerRecord:
        """Submit and wait for finality."""
        return self.ledger.wait_for(self.submit(kind, subject_id, payload_digest))


class SubLedger(Ledger):
    """Permissioned ledger that anchors bundles of its records on a master."""

    def __init__(
        self,
        config: LedgerConfig,
        master: Ledger,
        clock: LogicalClock | None = None,
        authorization: AuthorizationSystem | None = None,
        name: str | None = None,
        communicator: KeyPair | None = None,
    ) -> None:
        if config.pattern is not LedgerPattern.SUB_LEDGER:
            raise ValueError("SubLedger requires the sub-ledger pattern")
        super().__init__(config, clock or master.clock, authorization, name)
        self.master = master
        self._communicator = communicator or generate_keypair()
        self._master_writer: LedgerWriter | None = None
        self.bundles: list[AnchorBundle] = []
        self._retry: list[tuple[int, tuple[int, int], Digest]] = []
        self._covered_through = 0
        self.anchor_failures = 0

    @property
    def anchor_healthy(self) -> bool:
        return self.anchor_failures == 0 and not self._retry

    @property
    def covered_through(self) -> int:
        return self._covered_through

    def _master_subject(self, bundle_id: int, first: int, last: int) -> str:
        return f"anchor:{self.name}:{bundle_id}:{first}-{last}"

    def _send(self, bundle_id: int, span: tuple[int, int], bdigest: Digest) -> AnchorBundle:
        if self._master_writer is None:
            self._master_writer = self.master.connect(self._communicator)
        pending = self._master_writer.submit(EventKind.ANCHOR_BUNDLE, self._master_subject(bundle_id, *span), bdigest)
        bundle = AnchorBundle(bundle_id, span, bdigest, pending.sequence)
        self.bundles.append(bundle)
        return bundle

    def anchor_pending(self, force: bool = False) -> AnchorBundle | None:
        """Package the next ``anchor_period`` unanchored records onto the master.

        With ``force`` a short trailing bundle is flushed as well. Bundles that
        the master refuses are kept and retried on the next call.
        """
        sent = None
        while self._retry:
            bundle_id, span, bdigest = self._retry[0]
            try:
                sent = self._send(bundle_id, span, bdigest)
            except (LedgerUnavailable, Unauthorized) as exc:
                self.anchor_failures += 1
                raise MasterUnavailable(f"master refused bundle {bundle_id}: {exc}") from exc
            self._retry.pop(0)
            self.anchor_failures = 0
        records = [r for r in self.records() if r.sequence > self._covered_through]
        period = self.config.anchor_period
        if len(records) < period and not (force and records):
            return sent
        chunk = records[:period]
        span = (chunk[0].sequence, chunk[-1].sequence)
        bdigest = bundle_digest(chunk)
        bundle_id = len(self.bundles) + len(self._retry) + 1
        self._covered_through = span[1]
        try:
            sent = self._send(bundle_id, span, bdigest)
        except (LedgerUnavailable, Unauthorized) as exc:
            self._retry.append((bundle_id, span, bdigest))
            self.anchor_failures += 1
            raise MasterUnavailable(f"master refused bundle {bundle_id}: {exc}") from exc
        self.anchor_failures = 0
        return sent

    def anchor_all(self) -> list[AnchorBundle]:
        """Run anchoring to quiescence, flushing the trailing partial bundle."""
        out = []
        while (bundle := self.anchor_pending()) is not None and bundle not in out:
            out.append(bundle)
        if (bundle := self.anchor_pending(force=True)) is not None and bundle not in out:
            out.append(bundle)
        return out

    def anchored_through(self) -> int:
        """Highest sub-ledger sequence whose bundle is final on the master."""
        self.master._promote()
        final = [b.covered_range[1] for b in self.bundles if self.master.record_at(b.master_receipt)]
        return max(final, default=0)


def verify_anchor(sub_ledger: SubLedger, master: Ledger, bundle_id: int) -> bool:
    prefix = f"anchor:{sub_ledger.name}:{bundle_id}:"
    anchored = [r for r in master.records() if r.event_kind is EventKind.ANCHOR_BUNDLE and r.subject_id.startswith(prefix)]
    if not anchored:
        raise UnknownBundle(f"bundle {bundle_id} of {sub_ledger.name} is not on the master")
    first, last = (int(x) for x in anchored[-1].subject_id[len(prefix):].split("-"))
    covered = [r for r in sub_ledger.records() if first <= r.sequence <= last]
    if len(covered) != last - first + 1:
        return False
    return bundle_digest(covered) == anchored[-1].payload_digest


def measure_write_latency(pattern: LedgerPattern | str, records: int = 64) -> float:
    """Mean ticks per record until durable, for a sequential client.

    The client waits for each write to finalize before sending the next one,
    as the registration protocols do. For the sub-ledger pattern a record is
    durable once its bundle is final on the master; anchoring runs alongside
    the client and does not block it.
    """
    pattern = LedgerPattern(pattern)
    clock = LogicalClock()
    writer_key = generate_keypair()
    fp = writer_key.fingerprint
    master = Ledger(LedgerConfig(LedgerPattern.PERMISSIONLESS, "master"), clock)
    if pattern is LedgerPattern.SUB_LEDGER:
        ledger: Ledger = SubLedger(LedgerConfig(pattern, "sub", authorized_writers={fp}), master, clock)
    elif pattern is LedgerPattern.PERMISSIONLESS:
        ledger = master
    else:
        ledger = Ledger(LedgerConfig(pattern, "perm", authorized_writers={fp}), clock)
    writer = ledger.connect(writer_key)
    start = clock.now
    for i in range(records):
        writer.append(EventKind.DID_REGISTERED, f"did:x:{i}", digest(str(i).encode()))
        if isinstance(ledger, SubLedger):
            ledger.anchor_pending()
    if isinstance(ledger, SubLedger):
        ledger.anchor_all()
        last_master = max(b.master_receipt for b in ledger.bundles)
        while master.record_at(last_master) is None:
            clock.advance()
            master._promote()
        assert ledger.anchored_through() == records
    return (clock.now - start) / records
