"""
A university issues diplomas through a hosted SSI service
=========================================================

The provider runs a platform; the university subscribes as a service
consumer and describes the service it wants in YAML. A student then
registers a DID, receives a diploma credential and presents it to an
employer's verifier.
"""

# %%
# The provider side: one platform, one subscribed consumer.
from ssiaas.platform import IssuerClient, NameServiceClient, Platform, RegistryClient, hosted_verifier
from ssiaas.verification import Verifier, VerifierConfig
from ssiaas.wallet import Wallet

platform = Platform(seed=2024)
token = platform.register_consumer("uni", {"name": "Example University"})

spec_yaml = """
spec_version: 1
service: {name: diplomas}
consumer: {id: uni}
data: {pattern: permissioned-pdl}
wallet: {pattern: offline}
endorsement: {mode: multisignature, threshold: 1, entities: 3}
verification: {mode: service}
"""
service = platform.build_service(spec_yaml)
print("service", service.service_id, "is", service.status.value, "at", service.address)
print("build steps:", " -> ".join(service.steps))

# %%
# The student talks to the service only through the gateway.
transport = platform.transport
registry = RegistryClient(transport, service.service_id)
issuer = IssuerClient(transport, service.service_id, token)

student = Wallet("offline", "a long passphrase", clock=platform.clock)
request = student.create_identity({"student_card": "S-1042"})
did, document = issuer.endorse_did(request.public_key, request.proof_documents)
student.register_did(registry, did, document)
print("registered", did)

# With three review entities and threshold 1, two approvals sign the diploma.
diploma, proof = issuer.endorse_vc(did, {"degree": "BSc Computer Science", "year": 2024}, student.respond)
student.register_vc(registry, diploma, proof)
print("diploma", diploma.vc_id[:16], "signed by", len(proof.partials), "entities")

# %%
# An employer verifies a presentation with the hosted verifier.
platform.serve_verification("uni")
employer = hosted_verifier(transport, service.service_id)
vp = student.compose_presentation([diploma.vc_id], employer.presentation_nonce())
report = employer.verify_presentation(vp, student.respond)
print("hosted verifier says", report.outcome.value)
for line in report.credentials[0].checks:
    print(f"  {line.name:17} {line.result.value}")

# %%
# The same check in host mode gives the same answer.
local = Verifier(VerifierConfig(registry, NameServiceClient(transport), clock=platform.clock))
vp = student.compose_presentation([diploma.vc_id], local.presentation_nonce())
print("host verifier says", local.verify_presentation(vp, student.respond).outcome.value)
