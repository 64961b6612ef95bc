"""Directory of service consumers and service addresses."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from typing import Any

from ssiaas.crypto.encoding import hex_decode
from ssiaas.errors import NameServiceUnreachable, NotFound


@dataclass(frozen=True)
class ConsumerRecord:
    consumer_id: str
    did: str
    signing_key: bytes | None = None
    management_key: bytes | None = None
    entity_keys: tuple[bytes, ...] = ()
    entity_threshold: int | None = None
    controller_mode: str = "single"
    service_ids: tuple[str, ...] = ()
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def public_keys(self) -> dict[str, Any]:
        return {"signing": self.signing_key, "management": self.management_key, "entities": self.entity_keys}

    def to_json(self) -> dict:
        return {
            "consumer_id": self.consumer_id,
            "did": self.did,
            "signing_key": self.signing_key.hex() if self.signing_key else None,
            "management_key": self.management_key.hex() if self.management_key else None,
            "entity_keys": [k.hex() for k in self.entity_keys],
            "entity_threshold": self.entity_threshold,
            "controller_mode": self.controller_mode,
            "service_ids": list(self.service_ids),
            "meta": dict(self.meta),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ConsumerRecord":
        return cls(
            obj["consumer_id"],
            obj["did"],
            hex_decode(obj["signing_key"]) if obj.get("signing_key") else None,
            hex_decode(obj["management_key"]) if obj.get("management_key") else None,
            tuple(hex_decode(k) for k in obj.get("entity_keys", [])),
            obj.get("entity_threshold"),
            obj.get("controller_mode", "single"),
            tuple(obj.get("service_ids", [])),
            dict(obj.get("meta", {})),
        )


class NameService:
    """Consumer identities and service-id to address mapping.

    Reads may run concurrently with writes; every write replaces whole
    records under one lock so a resolve after a write always sees it.
    """

    def __init__(self) -> None:
        self._consumers: dict[str, ConsumerRecord] = {}
        self._by_key: dict[bytes, str] = {}
        self._addresses: dict[str, str] = {}
        self._lock = threading.RLock()
        self.available = True

    def _check(self) -> None:
        if not self.available:
            raise NameServiceUnreachable("name service is unavailable")

    # -- consumers ----------------------------------------------------------
    def register_consumer(self, record: ConsumerRecord) -> ConsumerRecord:
        with self._lock:
            old = self._consumers.get(record.consumer_id)
            if old is not None and old.signing_key:
                self._by_key.pop(old.signing_key, None)
            self._consumers[record.consumer_id] = record
            if record.signing_key:
                self._by_key[record.signing_key] = record.consumer_id
        return record

    def update_consumer(self, consumer_id: str, **changes: Any) -> ConsumerRecord:
        with self._lock:
            return self.register_consumer(replace(self.resolve_consumer(consumer_id), **changes))

    def resolve_consumer(self, consumer_id: str) -> ConsumerRecord:
        self._check()
        with self._lock:
            record = self._consumers.get(consumer_id)
        if record is None:
            raise NotFound(f"unknown consumer {consumer_id!r}")
        return record

    def consumer_by_key(self, signing_key: bytes) -> ConsumerRecord | None:
        self._check()
        with self._lock:
            consumer_id = self._by_key.get(bytes(signing_key))
            return self._consumers.get(consumer_id) if consumer_id else None

    def consumers(self) -> list[str]:
        with self._lock:
            return sorted(self._consumers)

    # -- services -----------------------------------------------------------
    def register_service(self, service_id: str, address: str) -> None:
        with self._lock:
            self._addresses[service_id] = address

    def unregister_service(self, service_id: str) -> None:
        with self._lock:
            self._addresses.pop(service_id, None)

    def resolve_service(self, service_id: str) -> str:
        self._check()
        with self._lock:
            address = self._addresses.get(service_id)
        if address is None:
            raise NotFound(f"unknown service {service_id!r}")
        return address
