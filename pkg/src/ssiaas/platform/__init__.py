"""Management plane: parser, gateway, name service, monitor.

Names are resolved lazily so that component modules can import
``ssiaas.platform.nameservice`` without pulling in the whole platform.
"""

import importlib

_EXPORTS = {
    "IssuerClient": "clients", "NameServiceClient": "clients", "RegistryClient": "clients",
    "hosted_verifier": "clients",
    "Channel": "gateway", "Gateway": "gateway", "GatewayRequest": "gateway", "LocalTransport": "gateway",
    "Principal": "gateway",
    "HttpTransport": "http", "PlatformServer": "http",
    "Monitor": "monitor", "MonitorEvent": "monitor", "MonitorKind": "monitor",
    "ConsumerRecord": "nameservice", "NameService": "nameservice",
    "SERVICE_OPERATIONS": "platform", "Platform": "platform", "ServiceInstance": "platform",
    "ServiceStatus": "platform",
    "Diagnostic": "spec", "ServiceSpec": "spec", "make_spec": "spec", "parse_spec": "spec",
}

__all__ = sorted(_EXPORTS)


def __getattr__(name):
    module = _EXPORTS.get(name)
    if module is None:
        raise AttributeError(f"module 'ssiaas.platform' has no attribute {name!r}")
    return getattr(importlib.import_module(f"ssiaas.platform.{module}"), name)
