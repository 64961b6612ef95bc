"""Service telemetry: a bounded in-memory ring with an optional NDJSON file."""

from __future__ import annotations

import enum
import json
import os
import threading
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Any, Iterable


class MonitorKind(str, enum.Enum):
    REQUEST = "Request"
    LEDGER_APPEND = "LedgerAppend"
    ANCHOR = "Anchor"
    ERROR = "Error"
    NODE_STATUS = "NodeStatus"


@dataclass(frozen=True)
class MonitorEvent:
    sequence: int
    timestamp: int
    service_id: str
    kind: MonitorKind
    payload: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"sequence": self.sequence, "timestamp": self.timestamp, "service_id": self.service_id,
                "kind": self.kind.value, "payload": self.payload}

    @classmethod
    def from_json(cls, obj: dict) -> "MonitorEvent":
        return cls(int(obj["sequence"]), int(obj["timestamp"]), obj["service_id"], MonitorKind(obj["kind"]),
                   dict(obj.get("payload", {})))


class Monitor:
    def __init__(self, capacity: int = 100_000, path: str | os.PathLike | None = None, clock=None) -> None:
        self.capacity = capacity
        self.path = path
        self.clock = clock
        self._ring: deque[MonitorEvent] = deque(maxlen=capacity)
        self._next = 1
        self._lock = threading.Lock()

    def record(self, service_id: str, kind: MonitorKind | str, payload: dict | None = None,
               timestamp: int | None = None) -> MonitorEvent:
        if timestamp is None:
            timestamp = self.clock.now if self.clock is not None else 0
        with self._lock:
            event = MonitorEvent(self._next, timestamp, service_id, MonitorKind(kind), dict(payload or {}))
            self._next += 1
            self._ring.append(event)
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(event.to_json(), sort_keys=True) + "\n")
        return event

    def query(
        self,
        service_id: str | None = None,
        kinds: Iterable[MonitorKind | str] | None = None,
        since: int | None = None,
        until: int | None = None,
    ) -> list[MonitorEvent]:
        wanted = {MonitorKind(k) for k in kinds} if kinds is not None else None
        with self._lock:
            events = list(self._ring)
        return [
            e for e in events
            if (service_id is None or e.service_id == service_id)
            and (wanted is None or e.kind in wanted)
            and (since is None or e.timestamp >= since)
            and (until is None or e.timestamp <= until)
        ]

    def tail(self, n: int = 20, service_id: str | None = None) -> list[MonitorEvent]:
        return self.query(service_id)[-n:] if n > 0 else []

    def counts(self, service_id: str | None = None) -> Counter:
        return Counter(e.kind.value for e in self.query(service_id))

    def writer_summary(self, service_id: str | None = None) -> dict[str, dict[str, int]]:
        """Appends per ledger writer and event kind, for permissioned-ledger audits."""
        summary: dict[str, Counter] = {}
        for e in self.query(service_id, [MonitorKind.LEDGER_APPEND]):
            writer = e.payload.get("submitter")
            if writer is None:
                continue
            summary.setdefault(writer, Counter())[e.payload.get("event_kind", "?")] += 1
        return {w: dict(c) for w, c in sorted(summary.items())}

    @staticmethod
    def read_file(path: str | os.PathLike) -> list[MonitorEvent]:
        with open(path, encoding="utf-8") as fh:
            return [MonitorEvent.from_json(json.loads(line)) for line in fh if line.strip()]
