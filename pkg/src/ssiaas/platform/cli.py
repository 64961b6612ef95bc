"""Command line client for a running platform, plus ``platform start`` to run one.

Connection settings come from ``--url``/``--token`` or the ``SSIAAS_URL`` and
``SSIAAS_TOKEN`` environment variables. Wallet commands operate on an
exported wallet file; the password comes from ``--password``,
``SSIAAS_WALLET_PASSWORD`` or an interactive prompt.
"""

from __future__ import annotations

import argparse
import getpass
import json
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from ssiaas.errors import SchemaError, SpecSyntaxError, SSIError
from ssiaas.ledger import LogicalClock

DEFAULT_URL = "http://127.0.0.1:8765"


def _print(obj: Any) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _transport(args):
    from ssiaas.platform.http import HttpTransport

    return HttpTransport(args.url, args.token)


def _internal(args, target: str, operation: str, payload: dict | None = None) -> Any:
    return _transport(args).call("internal", target, operation, payload or {})


# -- platform / consumer / service / monitor ---------------------------------------
def cmd_platform_start(args) -> int:
    from ssiaas.platform.http import PlatformServer
    from ssiaas.platform.platform import Platform

    platform = Platform(seed=args.seed, monitor_path=args.monitor_file, provider_token=args.provider_token)
    server = PlatformServer(platform, args.host, args.port)
    _print({"url": server.url, "provider_token": platform.provider_token})
    sys.stdout.flush()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.httpd.server_close()
    return 0


def cmd_consumer_register(args) -> int:
    meta = dict(kv.split("=", 1) for kv in args.meta)
    _print(_internal(args, "consumers", "register", {"consumer_id": args.consumer_id, "meta": meta}))
    return 0


def cmd_service_build(args) -> int:
    _print(_internal(args, "parser", "build", {"yaml": Path(args.spec).read_text()}))
    return 0


def cmd_service_migrate(args) -> int:
    _print(_internal(args, "parser", "migrate", {"service_id": args.service_id, "yaml": Path(args.spec).read_text()}))
    return 0


def cmd_service_stop(args) -> int:
    _print(_internal(args, "parser", "stop", {"service_id": args.service_id}))
    return 0


def cmd_service_list(args) -> int:
    _print(_internal(args, "parser", "list"))
    return 0


def cmd_service_serve_verification(args) -> int:
    _print(_internal(args, "parser", "serve-verification", {"consumer_id": args.consumer_id}))
    return 0


def cmd_spec_validate(args) -> int:
    from ssiaas.platform.spec import parse_spec

    status = 0
    for path in args.specs:
        try:
            parse_spec(Path(path).read_text())
        except SpecSyntaxError as exc:
            print(f"{path}: {exc.message}")
            status = 1
        except SchemaError as exc:
            for d in exc.diagnostics:
                print(f"{path}: {d}")
            status = 1
        else:
            print(f"{path}: ok")
    return status


def cmd_monitor_tail(args) -> int:
    payload = {"n": args.n}
    if args.service:
        payload["service_id"] = args.service
    for event in _internal(args, "monitor", "tail", payload):
        print(json.dumps(event, sort_keys=True))
    return 0


# -- wallet ---------------------------------------------------------------------------
def _password(args) -> str:
    return args.password or os.environ.get("SSIAAS_WALLET_PASSWORD") or getpass.getpass("wallet password: ")


def _load_wallet(args):
    from ssiaas.wallet import Wallet

    wallet = Wallet.from_export(json.loads(Path(args.file).read_text()), clock=LogicalClock())
    wallet.unlock(_password(args))
    return wallet


def _save_wallet(args, wallet) -> None:
    tmp = Path(args.file).with_suffix(".tmp")
    tmp.write_text(json.dumps(wallet.export(), indent=2, sort_keys=True))
    tmp.replace(args.file)


def cmd_wallet_create(args) -> int:
    from ssiaas.wallet import Wallet

    if Path(args.file).exists():
        print(f"error: {args.file} already exists", file=sys.stderr)
        return 1
    wallet = Wallet(args.pattern, _password(args), encryption=args.encryption)
    _save_wallet(args, wallet)
    _print({"file": args.file, "pattern": args.pattern})
    return 0


def cmd_wallet_unlock(args) -> int:
    _load_wallet(args)
    _print({"unlocked": True})
    return 0


def cmd_wallet_list(args) -> int:
    wallet = _load_wallet(args)
    _print({"public_keys": [k.hex() for k in wallet.public_keys()], "dids": wallet.dids(),
            "credentials": [{"id": i, "subject": wallet.credential(i).subject_did,
                             "issuer": wallet.credential(i).issuer_id} for i in wallet.credential_ids()]})
    return 0


def cmd_wallet_register_did(args) -> int:
    from ssiaas.platform.clients import IssuerClient, RegistryClient

    wallet = _load_wallet(args)
    transport = _transport(args)
    proofs = dict(kv.split("=", 1) for kv in args.proof)
    request = wallet.create_identity(proofs)
    did, document = IssuerClient(transport, args.service).endorse_did(request.public_key, proofs)
    receipt = wallet.register_did(RegistryClient(transport, args.service), did, document)
    _save_wallet(args, wallet)
    _print({"did": did, "receipt": receipt.to_json()})
    return 0


def cmd_wallet_register_vc(args) -> int:
    from ssiaas.platform.clients import IssuerClient, RegistryClient

    wallet = _load_wallet(args)
    transport = _transport(args)
    did = args.did or (wallet.dids() or [None])[0]
    if did is None:
        print("error: wallet holds no DID; run register-did first", file=sys.stderr)
        return 1
    vc, proof = IssuerClient(transport, args.service).endorse_vc(did, json.loads(args.claims), wallet.respond)
    receipt = wallet.register_vc(RegistryClient(transport, args.service), vc, proof)
    _save_wallet(args, wallet)
    _print({"vc_id": vc.vc_id, "receipt": receipt.to_json()})
    return 0


def cmd_wallet_present(args) -> int:
    from ssiaas.platform.clients import NameServiceClient, RegistryClient, hosted_verifier
    from ssiaas.verification import Verifier, VerifierConfig

    wallet = _load_wallet(args)
    transport = _transport(args)
    if args.verifier == "service":
        verifier = hosted_verifier(transport, args.service)
    else:
        verifier = Verifier(VerifierConfig(RegistryClient(transport, args.service), NameServiceClient(transport)))
    ids = args.vc or wallet.credential_ids()
    vp = wallet.compose_presentation(ids, verifier.presentation_nonce())
    report = verifier.verify_presentation(vp, wallet.respond)
    _print(report.to_json())
    return 0 if report.valid else 3


def cmd_wallet_sync(args) -> int:
    from ssiaas.wallet import DirectoryRemoteStore

    wallet = _load_wallet(args)
    count = wallet.sync_online(DirectoryRemoteStore(args.remote, args.backend))
    _print({"synced": count, "remote": args.remote})
    return 0


# -- parser ------------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssiaas", description="Self-sovereign identity as a service.")
    parser.add_argument("--url", default=os.environ.get("SSIAAS_URL", DEFAULT_URL), help="platform API base URL")
    parser.add_argument("--token", default=os.environ.get("SSIAAS_TOKEN"), help="consumer or provider token")
    groups = parser.add_subparsers(dest="group", required=True)

    plat = groups.add_parser("platform", help="run the platform").add_subparsers(dest="command", required=True)
    start = plat.add_parser("start", help="serve the JSON API in the foreground")
    start.add_argument("--host", default="127.0.0.1")
    start.add_argument("--port", type=int, default=8765)
    start.add_argument("--seed", type=int, default=None, help="deterministic ids, tokens and keys")
    start.add_argument("--monitor-file", default=None, help="append monitor events to this NDJSON file")
    start.add_argument("--provider-token", default=os.environ.get("SSIAAS_PROVIDER_TOKEN"))
    start.set_defaults(func=cmd_platform_start)

    consumer = groups.add_parser("consumer", help="service consumers").add_subparsers(dest="command", required=True)
    register = consumer.add_parser("register", help="subscribe a consumer (provider token)")
    register.add_argument("consumer_id")
    register.add_argument("--meta", action="append", default=[], metavar="KEY=VALUE")
    register.set_defaults(func=cmd_consumer_register)

    service = groups.add_parser("service", help="service lifecycle").add_subparsers(dest="command", required=True)
    build = service.add_parser("build", help="build a service from a YAML spec")
    build.add_argument("spec")
    build.set_defaults(func=cmd_service_build)
    migrate = service.add_parser("migrate", help="move a service to a new spec")
    migrate.add_argument("service_id")
    migrate.add_argument("spec")
    migrate.set_defaults(func=cmd_service_migrate)
    stop = service.add_parser("stop", help="stop a service")
    stop.add_argument("service_id")
    stop.set_defaults(func=cmd_service_stop)
    service.add_parser("list", help="list visible services").set_defaults(func=cmd_service_list)
    serve = service.add_parser("serve-verification", help="host a verification endpoint")
    serve.add_argument("consumer_id")
    serve.set_defaults(func=cmd_service_serve_verification)

    spec = groups.add_parser("spec", help="service specs").add_subparsers(dest="command", required=True)
    validate = spec.add_parser("validate", help="check spec files offline")
    validate.add_argument("specs", nargs="+")
    validate.set_defaults(func=cmd_spec_validate)

    monitor = groups.add_parser("monitor", help="telemetry").add_subparsers(dest="command", required=True)
    tail = monitor.add_parser("tail", help="print recent events as NDJSON")
    tail.add_argument("-n", type=int, default=20)
    tail.add_argument("--service", default=None)
    tail.set_defaults(func=cmd_monitor_tail)

    wallet = groups.add_parser("wallet", help="holder wallet").add_subparsers(dest="command", required=True)

    def wallet_cmd(name: str, func, help_text: str) -> argparse.ArgumentParser:
        sub = wallet.add_parser(name, help=help_text)
        sub.add_argument("--file", required=True, help="exported wallet file")
        sub.add_argument("--password", default=None)
        sub.set_defaults(func=func)
        return sub

    create = wallet_cmd("create", cmd_wallet_create, "create an empty wallet file")
    create.add_argument("--pattern", choices=["online", "offline"], default="offline")
    create.add_argument("--encryption", choices=["symmetric", "asymmetric"], default="symmetric")
    wallet_cmd("unlock", cmd_wallet_unlock, "check the wallet password")
    wallet_cmd("list", cmd_wallet_list, "list keys, DIDs and credentials")
    rd = wallet_cmd("register-did", cmd_wallet_register_did, "obtain and register a DID")
    rd.add_argument("--service", required=True)
    rd.add_argument("--proof", action="append", default=[], metavar="KEY=VALUE")
    rv = wallet_cmd("register-vc", cmd_wallet_register_vc, "obtain and register a credential")
    rv.add_argument("--service", required=True)
    rv.add_argument("--did", default=None)
    rv.add_argument("--claims", required=True, help="claims as a JSON object")
    pr = wallet_cmd("present", cmd_wallet_present, "present credentials to a verifier")
    pr.add_argument("--service", required=True)
    pr.add_argument("--vc", action="append", default=[])
    pr.add_argument("--verifier", choices=["host", "service"], default="host")
    sy = wallet_cmd("sync", cmd_wallet_sync, "upload encrypted entries to a remote directory")
    sy.add_argument("--remote", required=True)
    sy.add_argument("--backend", choices=["cloud", "decentralized"], default="cloud")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SSIError as exc:
        print(f"error: {type(exc).__name__}: {exc.message}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
