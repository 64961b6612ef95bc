"""Request routing between clients, platform modules and service instances.

Two channels exist. The internal channel carries management traffic to the
platform's own modules and requires a consumer or provider token. The
external channel carries identity traffic addressed by opaque service id,
plus read-only Name Service lookups. A request on the wrong channel for its
target is refused before any handler runs.
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol

from ssiaas.errors import (
    BadRequest,
    ChannelViolation,
    NotFound,
    SSIError,
    Unauthenticated,
    UnknownService,
    from_wire,
)
from ssiaas.platform.monitor import Monitor, MonitorKind
from ssiaas.platform.nameservice import NameService

INTERNAL_MODULES = ("parser", "monitor", "consumers")
EXTERNAL_MODULES = ("name-service",)


class Channel(str, enum.Enum):
    INTERNAL = "internal"
    EXTERNAL = "external"


@dataclass(frozen=True)
class GatewayRequest:
    channel: Channel
    target: str
    operation: str
    payload: dict[str, Any] = field(default_factory=dict)
    token: str | None = None

    def to_json(self) -> dict:
        return {"channel": self.channel.value, "target": self.target, "operation": self.operation,
                "payload": self.payload, "token": self.token}

    @classmethod
    def from_json(cls, obj: dict) -> "GatewayRequest":
        try:
            channel = Channel(obj["channel"])
            target, operation = obj["target"], obj["operation"]
        except (KeyError, TypeError, ValueError) as exc:
            raise BadRequest(f"malformed gateway request: {exc}") from None
        payload = obj.get("payload") or {}
        if not isinstance(target, str) or not isinstance(operation, str) or not isinstance(payload, dict):
            raise BadRequest("target and operation must be strings and payload a mapping")
        return cls(channel, target, operation, payload, obj.get("token"))


@dataclass(frozen=True)
class Principal:
    role: str  # "provider" or "consumer"
    consumer_id: str | None = None


class ServiceHandler(Protocol):
    running: bool

    def handle(self, operation: str, payload: dict, principal: Principal | None) -> Any: ...


ModuleHandler = Callable[[str, dict, "Principal | None"], Any]


class Gateway:
    def __init__(self, name_service: NameService, monitor: Monitor,
                 authenticate: Callable[[str | None], Principal | None]) -> None:
        self.name_service = name_service
        self.monitor = monitor
        self._authenticate = authenticate
        self._modules: dict[str, tuple[Channel, ModuleHandler]] = {}
        self._nodes: dict[str, ServiceHandler] = {}
        self._lock = threading.RLock()

    def mount(self, name: str, channel: Channel, handler: ModuleHandler) -> None:
        self._modules[name] = (Channel(channel), handler)

    def attach(self, address: str, service: ServiceHandler) -> None:
        with self._lock:
            self._nodes[address] = service

    def detach(self, address: str) -> None:
        with self._lock:
            self._nodes.pop(address, None)

    def module_channel(self, target: str) -> Channel | None:
        entry = self._modules.get(target)
        return entry[0] if entry else None

    # -- dispatch ---------------------------------------------------------------
    def _dispatch(self, request: GatewayRequest) -> Any:
        module = self._modules.get(request.target)
        if module is not None:
            channel, handler = module
            if request.channel is not channel:
                raise ChannelViolation(
                    f"{request.target!r} is reachable only on the {channel.value} channel",
                    target=request.target, channel=request.channel.value,
                )
            principal = self._authenticate(request.token)
            if channel is Channel.INTERNAL and principal is None:
                raise Unauthenticated("internal requests need a valid consumer or provider token")
            return handler(request.operation, request.payload, principal)
        if request.channel is Channel.INTERNAL:
            raise ChannelViolation("service instances are reachable only on the external channel",
                                   target=request.target, channel=request.channel.value)
        try:
            address = self.name_service.resolve_service(request.target)
        except NotFound:
            raise UnknownService(f"no running service {request.target!r}") from None
        with self._lock:
            service = self._nodes.get(address)
        if service is None or not service.running:
            raise UnknownService(f"service {request.target!r} is not running")
        return service.handle(request.operation, request.payload, self._authenticate(request.token))

    def route(self, raw: GatewayRequest | dict) -> dict:
        """Route one request and return the response envelope.

        Exactly one Request event is recorded per call, after the handler's
        effects are visible.
        """
        request = None
        try:
            request = raw if isinstance(raw, GatewayRequest) else GatewayRequest.from_json(raw)
            result = self._dispatch(request)
            envelope = {"ok": True, "result": result}
        except SSIError as exc:
            envelope = {"ok": False, "error": exc.to_wire()}
        except (KeyError, TypeError, ValueError) as exc:
            envelope = {"ok": False, "error": BadRequest(f"bad payload: {exc!r}").to_wire()}
        target = request.target if request else str(raw.get("target", "?")) if isinstance(raw, dict) else "?"
        detail = {
            "channel": request.channel.value if request else None,
            "operation": request.operation if request else None,
            "ok": envelope["ok"],
        }
        if not envelope["ok"]:
            detail["error"] = envelope["error"]["type"]
        self.monitor.record(target, MonitorKind.REQUEST, detail)
        return envelope

    def call(self, channel: Channel | str, target: str, operation: str, payload: dict | None = None,
             token: str | None = None) -> Any:
        envelope = self.route(GatewayRequest(Channel(channel), target, operation, payload or {}, token))
        return unwrap(envelope)


def unwrap(envelope: dict) -> Any:
    if envelope.get("ok"):
        return envelope.get("result")
    raise from_wire(envelope["error"])


class LocalTransport:
    """In-process transport onto a :class:`Gateway`."""

    def __init__(self, gateway: Gateway) -> None:
        self.gateway = gateway

    def call(self, channel: str, target: str, operation: str, payload: dict | None = None,
             token: str | None = None) -> Any:
        return self.gateway.call(channel, target, operation, payload, token)
