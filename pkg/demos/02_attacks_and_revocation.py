"""
What the checks catch
=====================

Two attacks on the credential flow and one revocation, each run against a
small in-process deployment.
"""

# %%
from ssiaas.crypto import generate_keypair, sign
from ssiaas.endorsement import Issuer
from ssiaas.errors import UnrecognizedIssuer
from ssiaas.ledger import Ledger, LedgerConfig, LedgerPattern, LogicalClock
from ssiaas.platform.nameservice import ConsumerRecord, NameService
from ssiaas.vdr import Registry, draft_credential
from ssiaas.verification import Verifier, VerifierConfig
from ssiaas.wallet import Wallet

clock = LogicalClock()
names = NameService()
writer = generate_keypair()
ledger = Ledger(LedgerConfig(LedgerPattern.PERMISSIONED_PDL, "demo", authorized_writers={writer.fingerprint}), clock)
registry = Registry(ledger, writer, names)
acme = Issuer.create("acme", registry=registry, did_method="demo", seed=1)
names.register_consumer(acme.consumer_record())

holder = Wallet("offline", "pw", clock=clock)
did, doc = acme.endorse_did(holder.create_identity().public_key)
holder.register_did(registry, did, doc)
verifier = Verifier(VerifierConfig(registry, names, clock=clock))

# %%
# Forgery: the holder signs a credential with a key nobody registered.
rogue = generate_keypair()
fake = draft_credential(did, {"degree": "PhD"}, "acme", rogue.public_key)
try:
    holder.register_vc(registry, fake, sign(rogue.secret_key, fake.signing_digest()))
except UnrecognizedIssuer as exc:
    print("forgery refused at registration:", exc.message)

# %%
# Masquerade: a real subscriber signs with its own key but claims to be acme.
# Registration accepts it because the key is known; verification compares the
# key against acme's record and refuses.
mallory = generate_keypair()
names.register_consumer(ConsumerRecord("mallory", "did:x:mallory", signing_key=mallory.public_key,
                                       management_key=mallory.public_key))
posing = draft_credential(did, {"degree": "MD"}, "acme", mallory.public_key)
holder.register_vc(registry, posing, sign(mallory.secret_key, posing.signing_digest()))
report = verifier.verify_vc(holder.credential(posing.vc_id), holder.respond)
print("masquerade:", report.outcome.value, "at", report.failed_check)

# %%
# Revocation: the issuer marks a credential; the very next check sees it.
vc, proof = acme.endorse_vc(did, {"degree": "BSc"}, holder.respond)
holder.register_vc(registry, vc, proof)
print("before revocation:", verifier.verify_vc(vc, holder.respond).outcome.value)
acme.manage_subject(vc.vc_id, "revoke")
report = verifier.verify_vc(vc, holder.respond)
print("after revocation:", report.outcome.value, "at", report.failed_check)
