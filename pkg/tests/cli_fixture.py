"""End-to-end CLI fixture: a fixed command sequence with fixed seeds and timestamps."""

from __future__ import annotations

import json
from pathlib import Path

from click.testing import CliRunner

from newschain.cli import cli

AUTH_SEEDS = ["a1" * 32, "a2" * 32, "a3" * 32]
ORG_SEED = "0a" * 32
PUBLISHER_SEEDS = {"Daily Ledger": "b1" * 32, "Newcomer": "b2" * 32}


def invoke(workspace, *args, expect=0):
    result = CliRunner().invoke(cli, ["--workspace", str(workspace), *args])
    if expect is not None:
        assert result.exit_code == expect, (args, result.stdout, result.stderr, result.exception)
    return result


def out(result):
    return json.loads(result.stdout)


def run_e2e(root: Path) -> dict:
    """Build a workspace under ``root`` and return the intermediate payloads."""
    root.mkdir(parents=True, exist_ok=True)
    ws = root / "ws"
    keys = root / "keys"
    auth = [out(invoke(ws, "keygen", "--seed", s, "--out", str(keys / f"auth{i}.json")))["public_key"] for i, s in enumerate(AUTH_SEEDS)]
    org = out(invoke(ws, "keygen", "--seed", ORG_SEED, "--out", str(keys / "org.json")))["public_key"]
    (root / "genesis.json").write_text(json.dumps({"mode": "PoA", "authorities": auth}))
    (root / "directory.json").write_text(json.dumps({"Daily Ledger": org}))
    invoke(ws, "init", "--genesis", str(root / "genesis.json"), "--directory", str(root / "directory.json"))
    for i in range(len(AUTH_SEEDS)):
        (ws / "keys" / f"auth{i}.json").write_text((keys / f"auth{i}.json").read_text())

    nonce = out(invoke(ws, "challenge", "--name", "Daily Ledger"))["nonce"]
    sig = out(invoke(ws, "sign", "--key-file", str(keys / "org.json"), "--message", nonce))["signature"]
    verified = out(invoke(ws, "enroll", "--name", "Daily Ledger", "--challenge-sig", sig, "--seed", PUBLISHER_SEEDS["Daily Ledger"]))
    plain = out(invoke(ws, "enroll", "--name", "Newcomer", "--seed", PUBLISHER_SEEDS["Newcomer"]))
    for name, seed in PUBLISHER_SEEDS.items():
        invoke(ws, "keygen", "--seed", seed, "--out", str(keys / f"{name}.json"))

    stories = [
        ("Daily Ledger", "Harbor bridge reopens after seismic retrofit", 100),
        ("Newcomer", "Harbor bridge reopens after seismic retrofit work", 101),
        ("Daily Ledger", "Council approves light rail budget", 102),
    ]
    digests = []
    for name, text, ts in stories:
        payload = out(invoke(ws, "publish", "--key-file", str(keys / f"{name}.json"), "--text", text, "--timestamp", str(ts)))
        digests.append(payload["digest"])
    mined = [out(invoke(ws, "mine", "--timestamp", "110"))]
    invoke(ws, "publish", "--key-file", str(keys / "Newcomer.json"), "--text", "Late story", "--timestamp", "111")
    mined.append(out(invoke(ws, "mine", "--timestamp", "111")))
    cert = out(invoke(ws, "pot", "--digest", digests[1]))
    (root / "cert.json").write_text(json.dumps(cert))
    pot_ok = out(invoke(ws, "pot-verify", "--cert", str(root / "cert.json")))
    return {
        "workspace": ws,
        "keys": keys,
        "verified": verified,
        "plain": plain,
        "digests": digests,
        "mined": mined,
        "cert": root / "cert.json",
        "pot_ok": pot_ok,
        "chain_bytes": (ws / "chain.jsonl").read_bytes(),
    }
