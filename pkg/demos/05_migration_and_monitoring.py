"""
Moving a running service to another ledger
==========================================

A bank starts on a public chain, then asks the provider to move it to a
private sub-ledger. Holders keep their wallets and credentials; the monitor
shows what happened along the way.
"""

# %%
import json
import tempfile
from pathlib import Path

from ssiaas.platform import IssuerClient, Monitor, NameServiceClient, Platform, RegistryClient, make_spec
from ssiaas.verification import Verifier, VerifierConfig
from ssiaas.wallet import Wallet

workdir = Path(tempfile.mkdtemp())
platform = Platform(seed=11, monitor_path=str(workdir / "monitor.ndjson"))
token = platform.register_consumer("bank")
service_id = platform.build_service(make_spec("kyc", "bank", "permissionless")).service_id

registry = RegistryClient(platform.transport, service_id)
issuer = IssuerClient(platform.transport, service_id, token)
verifier = Verifier(VerifierConfig(registry, NameServiceClient(platform.transport), clock=platform.clock))

# %%
# Six customers. Numbers 2 and 3 get an upgraded credential, 4 and 5 lose theirs.
customers = []
for i in range(6):
    wallet = Wallet("offline", f"pin-{i}", clock=platform.clock)
    did, doc = issuer.endorse_did(wallet.create_identity().public_key)
    wallet.register_did(registry, did, doc)
    vc, proof = issuer.endorse_vc(did, {"kyc": "basic", "customer": i}, wallet.respond)
    wallet.register_vc(registry, vc, proof)
    if i in (2, 3):
        wallet.store_credential(issuer.amend_vc(vc, {"kyc": "enhanced", "customer": i}))
    elif i in (4, 5):
        issuer.manage_subject(vc.vc_id, "revoke")
    customers.append((wallet, vc.vc_id))


def outcomes():
    return [verifier.verify_vc(w.credential(vc_id), w.respond).outcome.value for w, vc_id in customers]


before = outcomes()
print("before:", before, "| clock", platform.clock.now)

# %%
# Migration replays this service's ledger history onto the new data layer and
# moves the service to a fresh address. The service id stays the same.
old_address = platform.name_service.resolve_service(service_id)
platform.migrate_service(service_id, make_spec("kyc", "bank", "sub-ledger", anchor_period=4))
print("moved", old_address, "->", platform.name_service.resolve_service(service_id))
after = outcomes()
print("after: ", after, "| unchanged:", before == after)

# %%
# What the monitor saw. Consumers can only read events of their own services.
print(json.dumps(dict(sorted(platform.monitor.counts(service_id).items())), indent=2))
print("ledger writes by kind:", platform.monitor.writer_summary(service_id))

on_disk = Monitor.read_file(workdir / "monitor.ndjson")
print(f"{len(on_disk)} events persisted to {workdir / 'monitor.ndjson'}")
