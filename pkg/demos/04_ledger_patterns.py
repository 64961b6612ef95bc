"""
Four ways to keep the registry
==============================

The data layer can be a public chain, a consortium chain run by the
provider or by the consumer, or a private sub-ledger that periodically
anchors digests of its records on a public master. This script compares their
write latency, then audits a sub-ledger export against the master.
"""

# %%
# Latency is measured in logical ticks: a sequential client waits for each
# record to become final before writing the next.
from ssiaas.crypto import digest
from ssiaas.crypto import generate_keypair
from ssiaas.ledger import (
    EventKind,
    Ledger,
    LedgerConfig,
    LedgerPattern,
    LogicalClock,
    SubLedger,
    bundle_digest,
    measure_write_latency,
    parse_ndjson,
)

for pattern in LedgerPattern:
    print(f"{pattern.value:17} {measure_write_latency(pattern):6.3f} ticks/record")

# %%
# A sub-ledger anchored every 8 records on a permissionless master.
clock = LogicalClock()
master = Ledger(LedgerConfig(LedgerPattern.PERMISSIONLESS, "master"), clock)
writer = generate_keypair()
sub = SubLedger(LedgerConfig(LedgerPattern.SUB_LEDGER, "campus", anchor_period=8,
                             authorized_writers={writer.fingerprint}), master, clock)
session = sub.connect(writer)
for i in range(20):
    session.append(EventKind.DID_REGISTERED, f"did:campus:{i}", digest(f"doc {i}".encode()))
session.append(EventKind.REVOKED, "did:campus:3", digest(b"revoked"))

bundles = sub.anchor_all()
clock.advance(master.config.block_latency)
print(f"{len(sub.records())} records in {len(bundles)} bundles, anchored through #{sub.anchored_through()}")
print("did:campus:3 is", sub.query_latest("did:campus:3").status.value)


# %%
# An auditor gets the NDJSON export and reads the master independently.
def audit(export: str) -> list[int]:
    records = {r.sequence: r for r in parse_ndjson(export)}
    anchored = {r.subject_id: r.payload_digest for r in master.records() if r.event_kind is EventKind.ANCHOR_BUNDLE}
    bad = []
    for bundle in bundles:
        first, last = bundle.covered_range
        covered = [records[s] for s in range(first, last + 1) if s in records]
        subject = f"anchor:{sub.name}:{bundle.bundle_id}:{first}-{last}"
        if len(covered) != last - first + 1 or bundle_digest(covered) != anchored[subject]:
            bad.append(bundle.bundle_id)
    return bad


export = sub.export_ndjson()
print("honest export, failing bundles:", audit(export))

# Someone quietly drops the revocation from the copy they hand over.
lines = export.splitlines(keepends=True)
doctored = "".join(line for line in lines if '"Revoked"' not in line)
print("doctored export, failing bundles:", audit(doctored))
