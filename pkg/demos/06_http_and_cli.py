"""
Driving the platform from outside the process
=============================================

The platform speaks JSON over HTTP. Here it runs in a background thread and
everything else goes through the ``ssiaas`` command line tool, exactly as
a consumer's operator and a holder would use it from a shell.
"""

# %%
import json
import os
import subprocess
import sys
import tempfile
from pathlib import Path

from ssiaas.platform import Platform, PlatformServer, make_spec

workdir = Path(tempfile.mkdtemp())
platform = Platform(seed=3, provider_token="provider-secret")
server = PlatformServer(platform).start()
print("platform listening on", server.url)

env = {**os.environ, "SSIAAS_URL": server.url, "SSIAAS_WALLET_PASSWORD": "hunter22"}


def ssiaas(*argv, token=None):
    """Run one CLI command and return its parsed JSON output (or text)."""
    extra = {"SSIAAS_TOKEN": token} if token else {}
    done = subprocess.run([sys.executable, "-m", "ssiaas.platform.cli", *argv], env={**env, **extra},
                          capture_output=True, text=True)
    print("$ ssiaas", " ".join(argv), f"(exit {done.returncode})")
    if done.returncode:
        print("  " + done.stderr.strip())
        return None
    try:
        return json.loads(done.stdout)
    except json.JSONDecodeError:
        return done.stdout.strip()


# %%
# The provider subscribes a consumer; the consumer checks and builds its spec.
token = ssiaas("consumer", "register", "clinic", "--meta", "sector=health", token="provider-secret")["token"]
spec_file = workdir / "clinic.yaml"
spec_file.write_text(make_spec("vaccination", "clinic", "permissioned-pdl", "online", "secret-sharing",
                               "service", threshold=2, entities=3).to_yaml())
print(" ", ssiaas("spec", "validate", str(spec_file)))
service_id = ssiaas("service", "build", str(spec_file), token=token)["service_id"]
ssiaas("service", "serve-verification", "clinic", token=token)

# %%
# A patient's wallet lives in a file encrypted under their password.
wallet = str(workdir / "patient.json")
ssiaas("wallet", "create", "--file", wallet, "--pattern", "online")
did = ssiaas("wallet", "register-did", "--file", wallet, "--service", service_id)
print("  DID:", did["did"] if isinstance(did, dict) else did)
ssiaas("wallet", "register-vc", "--file", wallet, "--service", service_id, "--claims", '{"vaccine": "MMR"}')
report = ssiaas("wallet", "present", "--file", wallet, "--service", service_id, "--verifier", "service")
print("  presentation:", report["outcome"], [f"{c['check']}={c['result']}" for c in report["checks"]])
ssiaas("wallet", "sync", "--file", wallet, "--remote", str(workdir / "backup"), "--backend", "decentralized")

# %%
# Wrong password, then what the clinic's operator sees in the monitor.
env["SSIAAS_WALLET_PASSWORD"] = "guess"
ssiaas("wallet", "list", "--file", wallet)
print(ssiaas("monitor", "tail", "-n", "4", "--service", service_id, token=token))

server.stop()
