"""
Issuers controlled by several people
====================================

A multisignature issuer needs t+1 entity signatures. A secret-sharing issuer
needs t shares to rebuild its signing key just long enough to sign. Both
requests here are approved by hand, one entity at a time.
"""

# %%
from ssiaas.crypto import generate_keypair
from ssiaas.endorsement import Issuer, ScriptedPolicy
from ssiaas.errors import PolicyNotSatisfied, ReviewRejected
from ssiaas.ledger import Ledger, LedgerConfig, LedgerPattern, LogicalClock
from ssiaas.platform import NameService
from ssiaas.vdr import Registry
from ssiaas.verification import Verifier, VerifierConfig
from ssiaas.wallet import Wallet

clock = LogicalClock()
names = NameService()
writer = generate_keypair()
ledger = Ledger(LedgerConfig(LedgerPattern.PERMISSIONED_CDL, "board", authorized_writers={writer.fingerprint}), clock)
registry = Registry(ledger, writer, names)
verifier = Verifier(VerifierConfig(registry, names, clock=clock))

# %%
# A board of four with threshold 2: three signatures make a credential.
board = Issuer.create("board", registry=registry, did_method=registry.did_method, mode="multisignature",
                      threshold=2, total=4, seed=7)
names.register_consumer(board.consumer_record())
print("board entities:", ", ".join(board.profile.entity_ids), "| required:", board.profile.required)

holder = Wallet("offline", "pw", clock=clock)
did, doc = board.endorse_did(holder.create_identity().public_key)
holder.register_did(registry, did, doc)

request = board.request_vc(did, {"role": "auditor"}, holder.respond)
for entity_id in board.profile.entity_ids[:2]:
    agent = board.entities[entity_id]
    decision, signature = agent.respond(request)
    state = board.collect_approval(request.request_id, entity_id, decision, signature)
    print(f"  {entity_id} approves -> {state.approvals}/{state.required}")
try:
    board.issue_vc(request.request_id)
except PolicyNotSatisfied as exc:
    print("too early:", exc.message)

third = board.profile.entity_ids[2]
board.collect_approval(request.request_id, third, *board.entities[third].respond(request))
vc, proof = board.issue_vc(request.request_id)
holder.register_vc(registry, vc, proof)
print("issued with", len(proof.partials), "partial signatures:", verifier.verify_vc(vc, holder.respond).outcome.value)

# %%
# Secret sharing, 2 of 3. Two of the three shareholders are cautious and
# refuse anything mentioning a "root" role.
def cautious(entity_id, request):
    return request.payload.get("claims", {}).get("role") != "root"


vault = Issuer.create("vault", registry=registry, did_method=registry.did_method, mode="secret-sharing", threshold=2,
                      total=3, seed=9, entity_policies={"entity-1": ScriptedPolicy(cautious),
                                                        "entity-2": ScriptedPolicy(cautious)})
names.register_consumer(vault.consumer_record())
did, doc = vault.endorse_did(holder.create_identity().public_key)
holder.register_did(registry, did, doc)

vc, proof = vault.endorse_vc(did, {"role": "operator"}, holder.respond)
holder.register_vc(registry, vc, proof)
print("operator credential:", verifier.verify_vc(vc, holder.respond).outcome.value)
print("key buffer wiped after signing:", not any(vault.last_key_buffer))

try:
    vault.endorse_vc(did, {"role": "root"}, holder.respond)
except ReviewRejected as exc:
    print("root credential:", exc.message)
