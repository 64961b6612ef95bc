"""Service description YAML: parsing, validation and diagnostics."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any

import yaml
from jsonschema import Draft202012Validator

from ssiaas.errors import SchemaError, SpecSyntaxError

SPEC_VERSION = 1

DATA_PATTERNS = ["permissionless", "permissioned-cdl", "permissioned-pdl", "sub-ledger"]
WALLET_PATTERNS = ["online", "offline"]
ENDORSEMENT_MODES = ["single", "multisignature", "secret-sharing"]
VERIFICATION_MODES = ["service", "host"]

DEFAULT_DID_METHODS = {
    "permissionless": "ssipl",
    "permissioned-cdl": "ssicdl",
    "permissioned-pdl": "ssipdl",
    "sub-ledger": "ssisub",
}

_NAME = {"type": "string", "pattern": "^[A-Za-z0-9][A-Za-z0-9._-]{0,63}$"}
_POSITIVE = {"type": "integer", "minimum": 1}

SCHEMA: dict = {
    "type": "object",
    "additionalProperties": False,
    "required": ["spec_version", "service", "consumer", "data", "wallet", "endorsement", "verification"],
    "properties": {
        "spec_version": {"const": SPEC_VERSION},
        "service": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {"name": _NAME, "description": {"type": "string"}},
        },
        "consumer": {
            "type": "object",
            "additionalProperties": False,
            "required": ["id"],
            "properties": {"id": _NAME},
        },
        "data": {
            "type": "object",
            "additionalProperties": False,
            "required": ["pattern"],
            "properties": {
                "pattern": {"enum": DATA_PATTERNS},
                "did_method": {"type": "string", "pattern": "^[a-z0-9]+$"},
                "block_latency": {"type": "integer", "minimum": 0},
                "anchor_period": _POSITIVE,
            },
            "allOf": [
                {
                    "if": {"properties": {"pattern": {"const": "sub-ledger"}}, "required": ["pattern"]},
                    "then": {"required": ["anchor_period"]},
                },
                {
                    "if": {"properties": {"pattern": {"enum": DATA_PATTERNS[:3]}}, "required": ["pattern"]},
                    "then": {"not": {"required": ["anchor_period"]}},
                },
            ],
        },
        "wallet": {
            "type": "object",
            "additionalProperties": False,
            "required": ["pattern"],
            "properties": {
                "pattern": {"enum": WALLET_PATTERNS},
                "encryption": {"enum": ["symmetric", "asymmetric"]},
                "backend": {"enum": ["cloud", "decentralized"]},
            },
        },
        "endorsement": {
            "type": "object",
            "additionalProperties": False,
            "required": ["mode"],
            "properties": {
                "mode": {"enum": ENDORSEMENT_MODES},
                "threshold": _POSITIVE,
                "entities": _POSITIVE,
                "seed": {"type": "integer"},
                "algorithm": {"enum": ["ecdsa-p256", "ecdsa-secp256k1"]},
            },
            "allOf": [
                {
                    "if": {"properties": {"mode": {"const": "single"}}, "required": ["mode"]},
                    "then": {"not": {"anyOf": [{"required": ["threshold"]}, {"required": ["entities"]}]}},
                    "else": {"required": ["threshold", "entities"]},
                }
            ],
        },
        "verification": {
            "type": "object",
            "additionalProperties": False,
            "required": ["mode"],
            "properties": {"mode": {"enum": VERIFICATION_MODES}, "nonce_ttl": _POSITIVE},
        },
        "parameters": {"type": "object"},
    },
}

_VALIDATOR = Draft202012Validator(SCHEMA)


@dataclass(frozen=True)
class Diagnostic:
    path: str
    expected: str
    found: str

    def to_json(self) -> dict:
        return {"path": self.path, "expected": self.expected, "found": self.found}

    @classmethod
    def from_json(cls, obj: dict) -> "Diagnostic":
        return cls(obj["path"], obj["expected"], obj["found"])

    def __str__(self) -> str:
        return f"{self.path or '<root>'}: expected {self.expected}, found {self.found}"


@dataclass(frozen=True)
class ServiceSpec:
    service_name: str
    consumer_id: str
    data_pattern: str
    did_method: str
    block_latency: int | None
    anchor_period: int | None
    wallet_pattern: str
    wallet_encryption: str
    wallet_backend: str
    endorsement_mode: str
    threshold: int | None
    entities: int | None
    endorsement_seed: int | None
    algorithm: str
    verification_mode: str
    nonce_ttl: int
    parameters: dict[str, Any] = field(default_factory=dict)

    def to_document(self) -> dict:
        """The YAML document form; ``parse_spec(dump(to_document()))`` round-trips."""
        data: dict[str, Any] = {"pattern": self.data_pattern, "did_method": self.did_method}
        if self.block_latency is not None:
            data["block_latency"] = self.block_latency
        if self.anchor_period is not None:
            data["anchor_period"] = self.anchor_period
        endorsement: dict[str, Any] = {"mode": self.endorsement_mode, "algorithm": self.algorithm}
        if self.endorsement_mode != "single":
            endorsement.update(threshold=self.threshold, entities=self.entities)
        if self.endorsement_seed is not None:
            endorsement["seed"] = self.endorsement_seed
        return {
            "spec_version": SPEC_VERSION,
            "service": {"name": self.service_name},
            "consumer": {"id": self.consumer_id},
            "data": data,
            "wallet": {"pattern": self.wallet_pattern, "encryption": self.wallet_encryption,
                       "backend": self.wallet_backend},
            "endorsement": endorsement,
            "verification": {"mode": self.verification_mode, "nonce_ttl": self.nonce_ttl},
            "parameters": dict(self.parameters),
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_document(), sort_keys=False)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "ServiceSpec":
        return cls(**obj)


def _join(path) -> str:
    out = ""
    for part in path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out


def _describe(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return f"boolean {str(value).lower()}"
    if isinstance(value, (int, float)):
        return f"number {value}"
    if isinstance(value, str):
        return f"string {value!r}"
    if isinstance(value, list):
        return f"list of {len(value)}"
    if isinstance(value, dict):
        return "mapping"
    return type(value).__name__


def _diagnostics_for(error, schema_root: dict) -> list[Diagnostic]:
    path = list(error.absolute_path)
    kind = error.validator
    if kind == "required":
        missing = [name for name in error.validator_value if name not in error.instance]
        return [Diagnostic(_join(path + [name]), "required key", "missing") for name in missing]
    if kind == "additionalProperties":
        allowed = set(error.schema.get("properties", {}))
        return [Diagnostic(_join(path + [k]), "one of " + ", ".join(sorted(allowed)), "unknown key")
                for k in sorted(set(error.instance) - allowed)]
    if kind == "not":
        forbidden = [name for sub in _required_in(error.validator_value) for name in sub if name in error.instance]
        return [Diagnostic(_join(path + [name]), "absent for this pattern", "key present")
                for name in dict.fromkeys(forbidden)]
    if kind == "enum":
        expected = "one of " + ", ".join(map(str, error.validator_value))
    elif kind == "const":
        expected = repr(error.validator_value)
    elif kind == "type":
        expected = f"type {error.validator_value}"
    elif kind in ("minimum", "maximum"):
        expected = f"{kind} {error.validator_value}"
    elif kind == "pattern":
        expected = f"text matching {error.validator_value}"
    else:
        expected = error.message
    return [Diagnostic(_join(path), expected, _describe(error.instance))]


def _required_in(schema: dict) -> list[list[str]]:
    if "required" in schema:
        return [schema["required"]]
    return [r for sub in schema.get("anyOf", []) for r in _required_in(sub)]


def _leaf_errors(errors):
    for error in errors:
        if error.validator in ("allOf", "if") and error.context:
            yield from _leaf_errors(error.context)
        else:
            yield error


def _semantic(doc: dict) -> list[Diagnostic]:
    out = []
    endorsement = doc.get("endorsement", {})
    t, n, mode = endorsement.get("threshold"), endorsement.get("entities"), endorsement.get("mode")
    if isinstance(t, int) and isinstance(n, int):
        if mode == "multisignature" and t + 1 > n:
            out.append(Diagnostic("endorsement.threshold", f"at most {n - 1} (t+1 signers out of {n})",
                                  f"number {t}"))
        if mode == "secret-sharing" and t > n:
            out.append(Diagnostic("endorsement.threshold", f"at most {n}", f"number {t}"))
    if mode == "secret-sharing" and isinstance(n, int) and n > 255:
        out.append(Diagnostic("endorsement.entities", "at most 255", f"number {n}"))
    return out


def validate_document(doc: Any) -> list[Diagnostic]:
    if not isinstance(doc, dict):
        return [Diagnostic("", "mapping", _describe(doc))]
    diagnostics: list[Diagnostic] = []
    for error in _leaf_errors(_VALIDATOR.iter_errors(doc)):
        diagnostics.extend(_diagnostics_for(error, SCHEMA))
    if not diagnostics:
        diagnostics.extend(_semantic(doc))
    unique = list(dict.fromkeys(diagnostics))
    return sorted(unique, key=lambda d: d.path)


def _duplicate_keys(node: yaml.Node, path: list) -> list[Diagnostic]:
    out = []
    if isinstance(node, yaml.MappingNode):
        seen = set()
        for key_node, value_node in node.value:
            key = key_node.value
            if key in seen:
                out.append(Diagnostic(_join(path + [key]), "unique key",
                                      f"duplicate key at line {key_node.start_mark.line + 1}"))
            seen.add(key)
            out.extend(_duplicate_keys(value_node, path + [key]))
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            out.extend(_duplicate_keys(item, path + [i]))
    return out


def load_yaml(text: str) -> tuple[Any, list[Diagnostic]]:
    """Parse YAML, reporting duplicate mapping keys instead of silently merging them."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise SpecSyntaxError(f"invalid YAML{where}: {getattr(exc, 'problem', None) or exc}") from exc
    return doc, (_duplicate_keys(root, []) if root is not None else [])


def parse_spec(yaml_text: str) -> ServiceSpec:
    """Validate ``yaml_text`` and build a :class:`ServiceSpec`.

    Raises :class:`SpecSyntaxError` when the text is not YAML and
    :class:`SchemaError` carrying every diagnostic otherwise.
    """
    doc, duplicates = load_yaml(yaml_text)
    diagnostics = duplicates + validate_document(doc)
    if diagnostics:
        raise SchemaError(f"{len(diagnostics)} problem(s) in service spec", diagnostics)
    data, wallet, endorsement, verification = doc["data"], doc["wallet"], doc["endorsement"], doc["verification"]
    return ServiceSpec(
        service_name=doc["service"]["name"],
        consumer_id=doc["consumer"]["id"],
        data_pattern=data["pattern"],
        did_method=data.get("did_method", DEFAULT_DID_METHODS[data["pattern"]]),
        block_latency=data.get("block_latency"),
        anchor_period=data.get("anchor_period"),
        wallet_pattern=wallet["pattern"],
        wallet_encryption=wallet.get("encryption", "symmetric"),
        wallet_backend=wallet.get("backend", "cloud"),
        endorsement_mode=endorsement["mode"],
        threshold=endorsement.get("threshold"),
        entities=endorsement.get("entities"),
        endorsement_seed=endorsement.get("seed"),
        algorithm=endorsement.get("algorithm", "ecdsa-p256"),
        verification_mode=verification["mode"],
        nonce_ttl=verification.get("nonce_ttl", 60),
        parameters=dict(doc.get("parameters") or {}),
    )


def make_spec(
    service_name: str,
    consumer_id: str,
    data_pattern: str = "permissionless",
    wallet_pattern: str = "offline",
    endorsement_mode: str = "single",
    verification_mode: str = "host",
    *,
    threshold: int | None = None,
    entities: int | None = None,
    anchor_period: int | None = None,
    **extra: Any,
) -> ServiceSpec:
    """Build a spec from keyword arguments, validated exactly like YAML input."""
    data: dict[str, Any] = {"pattern": data_pattern}
    if data_pattern == "sub-ledger":
        data["anchor_period"] = anchor_period or 8
    endorsement: dict[str, Any] = {"mode": endorsement_mode}
    if endorsement_mode != "single":
        endorsement["threshold"] = threshold if threshold is not None else (1 if endorsement_mode == "multisignature" else 2)
        endorsement["entities"] = entities if entities is not None else 3
    for key in ("seed", "algorithm"):
        if key in extra:
            endorsement[key] = extra.pop(key)
    for key in ("did_method", "block_latency"):
        if key in extra:
            data[key] = extra.pop(key)
    doc = {
        "spec_version": SPEC_VERSION,
        "service": {"name": service_name},
        "consumer": {"id": consumer_id},
        "data": data,
        "wallet": {"pattern": wallet_pattern},
        "endorsement": endorsement,
        "verification": {"mode": verification_mode},
        "parameters": dict(extra.pop("parameters", {})),
    }
    if extra:
        raise TypeError(f"unexpected spec fields: {sorted(extra)}")
    return parse_spec(yaml.safe_dump(doc))
