"""Command-line interface over a file-based workspace.

Workspace layout: genesis.json, chain.jsonl, registry.json,
trust_directory.json, pending.jsonl and keys/. Every stdout payload is JSON;
failures print one JSON object ``{"error": ..., "rule": ...}`` to stderr.
"""

from __future__ import annotations

import fcntl
import functools
import json
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import click

from . import crypto
from .consensus import GenesisConfig, Mode, mine_block, produce_poa_block, slot_producer, validate_block
from .crypto import KEY_SIZE, SEED_SIZE, SIGNATURE_SIZE, KeyPair, from_hex
from .errors import InvalidArgument, NewsChainError
from .ledger import (
    Chain,
    PoTCertificate,
    dump_json,
    proof_of_truthfulness,
    verify_chain,
    verify_chain_file,
    verify_truthfulness,
)
from .network_sim import SimConfig, run_simulation, scenario_illustration, tamper_tool
from .news import NewsRecord, create_news, validate_news
from .registry import Registry, TrustDirectory, revoke_message, update_message

ENV_WORKSPACE = "NEWSCHAIN_WORKSPACE"


class Workspace:
    def __init__(self, root):
        self.root = Path(root)
        self.genesis_path = self.root / "genesis.json"
        self.chain_path = self.root / "chain.jsonl"
        self.registry_path = self.root / "registry.json"
        self.directory_path = self.root / "trust_directory.json"
        self.pending_path = self.root / "pending.jsonl"
        self.keys_dir = self.root / "keys"
        self.lock_path = self.root / ".lock"

    def require(self):
        if not self.chain_path.exists():
            raise InvalidArgument(f"{self.root} is not an initialized workspace (run init)")
        return self

    @contextmanager
    def locked(self):
        self.root.mkdir(parents=True, exist_ok=True)
        with open(self.lock_path, "w") as fh:
            try:
                fcntl.flock(fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
            except BlockingIOError:
                raise NewsChainError(f"workspace {self.root} is in use by another command", rule="locked") from None
            try:
                yield self
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)

    def genesis(self) -> GenesisConfig:
        return GenesisConfig.from_dict(json.loads(self.genesis_path.read_text()))

    def directory(self) -> TrustDirectory:
        return TrustDirectory.from_json(json.loads(self.directory_path.read_text()))

    def registry(self) -> Registry:
        data = json.loads(self.registry_path.read_text())
        return Registry.from_json(data, self.directory(), self.genesis().policy)

    def save_registry(self, registry: Registry):
        self.registry_path.write_text(json.dumps(registry.to_json(), indent=1) + "\n")

    def chain(self) -> Chain:
        return Chain.load(self.chain_path)

    def append_block(self, block):
        with open(self.chain_path, "a", encoding="ascii") as fh:
            fh.write(block.to_line() + "\n")

    def pending(self) -> list[NewsRecord]:
        if not self.pending_path.exists():
            return []
        lines = self.pending_path.read_text().splitlines()
        return [NewsRecord.from_dict(json.loads(line)) for line in lines if line]

    def save_pending(self, records):
        self.pending_path.write_text("".join(dump_json(r.to_dict()) + "\n" for r in records))

    def authority_keys(self) -> list[KeyPair]:
        keys = []
        if self.keys_dir.is_dir():
            for path in sorted(self.keys_dir.glob("*.json")):
                try:
                    keys.append(load_keypair(path))
                except (ValueError, KeyError, NewsChainError):
                    continue
        return keys


def load_keypair(path) -> KeyPair:
    return KeyPair.from_dict(json.loads(Path(path).read_text()))


def emit(obj):
    click.echo(json.dumps(obj, indent=2))


def fail(message: str, rule=None, code: int = 1):
    payload = {"error": message}
    if rule is not None:
        payload["rule"] = rule
    click.echo(json.dumps(payload), err=True)
    sys.exit(code)


def json_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except NewsChainError as exc:
            fail(str(exc) or type(exc).__name__, exc.rule)
        except (OSError, ValueError, KeyError) as exc:
            fail(f"{type(exc).__name__}: {exc}")

    return wrapper


def hex_arg(length):
    def convert(ctx, param, value):
        if value is None:
            return None
        try:
            return from_hex(value, length)
        except InvalidArgument as exc:
            raise click.BadParameter(str(exc)) from exc

    return convert


@click.group()
@click.option(
    "--workspace",
    envvar=ENV_WORKSPACE,
    default=".",
    type=click.Path(file_okay=False),
    help=f"Workspace directory (overrides ${ENV_WORKSPACE}; default: current directory).",
)
@click.pass_context
def cli(ctx, workspace):
    """Tamper-evident news ledger."""
    ctx.obj = Workspace(workspace)


@cli.command()
@click.option("--genesis", "genesis_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--directory", "directory_file", type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
@json_errors
def init(ws: Workspace, genesis_file, directory_file):
    """Create a workspace and write the genesis block."""
    with ws.locked():
        if ws.chain_path.exists():
            raise InvalidArgument(f"workspace {ws.root} already has a chain")
        genesis = GenesisConfig.from_dict(json.loads(Path(genesis_file).read_text())).validate()
        directory = TrustDirectory.from_json(json.loads(Path(directory_file).read_text())) if directory_file else TrustDirectory()
        ws.keys_dir.mkdir(parents=True, exist_ok=True)
        ws.genesis_path.write_text(json.dumps(genesis.to_dict(), indent=1) + "\n")
        ws.directory_path.write_text(json.dumps(directory.to_json(), indent=1) + "\n")
        registry = Registry(directory, genesis.policy)
        ws.save_registry(registry)
        ws.save_pending([])
        block = genesis.genesis()
        ws.chain_path.write_text(block.to_line() + "\n")
    emit({"workspace": str(ws.root), "genesis_hash": block.hash().hex(), "mode": genesis.mode.value})


@cli.command()
@click.option("--seed", required=True, callback=hex_arg(SEED_SIZE), help="32-byte seed, hex.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@json_errors
def keygen(seed, out):
    """Derive an Ed25519 keypair from a seed and write it as a key file."""
    kp = crypto.generate_keypair(seed)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_text(json.dumps(kp.to_dict(), indent=1) + "\n")
    emit({"public_key": kp.public_key.hex(), "key_file": str(out)})


@cli.command()
@click.option("--key-file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--message", "message_hex", help="Raw message, hex (e.g. a challenge nonce).")
@click.option("--update-label", help="Sign an alias request for this label.")
@click.option("--revoke", is_flag=True, help="Sign a voluntary revocation of this key.")
@json_errors
def sign(key_file, message_hex, update_label, revoke):
    """Produce the signatures that challenge, alias and revoke expect."""
    kp = load_keypair(key_file)
    chosen = [x is not None and x is not False for x in (message_hex, update_label, revoke)]
    if sum(chosen) != 1:
        raise InvalidArgument("choose exactly one of --message, --update-label, --revoke")
    if message_hex is not None:
        message = from_hex(message_hex)
    elif update_label is not None:
        message = update_message(kp.public_key, update_label)
    else:
        message = revoke_message(kp.public_key)
    emit({"public_key": kp.public_key.hex(), "signature": kp.sign(message).hex()})


@cli.command()
@click.option("--name", required=True)
@click.pass_obj
@json_errors
def challenge(ws: Workspace, name):
    """Issue an enrollment challenge nonce for an applicant."""
    with ws.require().locked():
        registry = ws.registry()
        ch = registry.issue_challenge(name, height=ws.chain().height)
        ws.save_registry(registry)
    emit(ch.to_dict())


@cli.command()
@click.option("--name", required=True)
@click.option("--challenge-sig", callback=hex_arg(SIGNATURE_SIZE), help="Signature over the challenge nonce.")
@click.option("--seed", required=True, callback=hex_arg(SEED_SIZE), help="Seed of the assigned system keypair.")
@click.pass_obj
@json_errors
def enroll(ws: Workspace, name, challenge_sig, seed):
    """Enroll a publisher (Verified with a valid directory proof, else NonVerified)."""
    with ws.require().locked():
        registry = ws.registry()
        pub = registry.enroll(name, challenge_sig, seed, height=ws.chain().height)
        ws.save_registry(registry)
    emit(pub.to_dict())


@cli.command()
@click.option("--key", required=True, callback=hex_arg(KEY_SIZE), help="Existing public key.")
@click.option("--label", required=True)
@click.option("--proof", required=True, callback=hex_arg(SIGNATURE_SIZE))
@click.option("--seed", required=True, callback=hex_arg(SEED_SIZE), help="Seed of the new alias keypair.")
@click.pass_obj
@json_errors
def alias(ws: Workspace, key, label, proof, seed):
    """Add an alias identity to an existing publisher."""
    with ws.require().locked():
        registry = ws.registry()
        pub = registry.update_identity(key, proof, label, seed)
        ws.save_registry(registry)
    emit(pub.to_dict())


@cli.command()
@click.option("--key", required=True, callback=hex_arg(KEY_SIZE))
@click.option("--sig", required=True, callback=hex_arg(SIGNATURE_SIZE))
@click.pass_obj
@json_errors
def revoke(ws: Workspace, key, sig):
    """Voluntarily revoke a publisher (all of its aliases)."""
    with ws.require().locked():
        registry = ws.registry()
        pub = registry.revoke_identity(key, signature=sig, height=ws.chain().height)
        ws.save_registry(registry)
    emit(pub.to_dict())


@cli.command()
@click.option("--key-file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--text", required=True)
@click.option("--timestamp", type=click.IntRange(min=0))
@click.pass_obj
@json_errors
def publish(ws: Workspace, key_file, text, timestamp):
    """Sign a news record and add it to the pending pool."""
    with ws.require().locked():
        kp = load_keypair(key_file)
        registry = ws.registry()
        pub = registry.owner(kp.public_key)
        if pub is None:
            raise InvalidArgument("key is not enrolled to any publisher")
        record = create_news(kp, pub, text, int(time.time()) if timestamp is None else timestamp)
        pending = ws.pending()
        if any(r.digest == record.digest for r in pending):
            raise InvalidArgument("identical record is already pending")
        ws.save_pending(pending + [record])
    emit({"record": record.to_dict(), "digest": record.digest.hex()})


@cli.command()
@click.option("--pow", "use_pow", is_flag=True, help="Mine a proof-of-work block (genesis must be PoW).")
@click.option("--key-file", type=click.Path(exists=True, dir_okay=False), help="Authority key (PoA).")
@click.option("--timestamp", type=click.IntRange(min=0))
@click.option("--max-iterations", type=click.IntRange(min=1), default=1 << 24, show_default=True)
@click.pass_obj
@json_errors
def mine(ws: Workspace, use_pow, key_file, timestamp, max_iterations):
    """Produce the next block from the pending pool and append it."""
    with ws.require().locked():
        genesis = ws.genesis()
        if use_pow != (genesis.mode is Mode.POW):
            raise InvalidArgument(f"genesis mode is {genesis.mode.value}; --pow {'required' if genesis.mode is Mode.POW else 'not allowed'}")
        chain = ws.chain()
        report = verify_chain(chain, genesis.pow_target if genesis.mode is Mode.POW else None)
        if not report.ok:
            raise NewsChainError(f"refusing to extend a broken chain (height {report.height})", rule=report.rule)
        registry = ws.registry()
        parent = chain.head.header
        ts = max(parent.timestamp, int(time.time()) if timestamp is None else timestamp)
        selected, leftover = [], []
        for record in ws.pending():
            if record.digest in chain.index:
                continue
            if len(selected) < genesis.max_block_records and validate_news(record, registry)[0]:
                selected.append(record)
            else:
                leftover.append(record)
        if not selected:
            raise InvalidArgument("no valid pending records to mine")
        if genesis.mode is Mode.POW:
            block = mine_block(parent, selected, ts, genesis.pow_target, max_iterations)
        else:
            producer = slot_producer(parent.height + 1, parent.timestamp, ts, genesis.authorities, genesis.skip_timeout)
            candidates = [load_keypair(key_file)] if key_file else ws.authority_keys()
            kp = next((k for k in candidates if k.public_key == producer), None)
            if kp is None:
                raise InvalidArgument(f"no key available for slot authority {producer.hex()}")
            block = produce_poa_block(parent, selected, ts, kp)
        verdict = validate_block(block, parent, registry, genesis, chain.index)
        if not verdict:
            raise NewsChainError(verdict.reason, rule=verdict.rule)
        chain.append(block, lambda b, p: verdict)
        ws.append_block(block)
        epoch = None
        if block.height % genesis.policy.epoch_E == 0:
            epoch = registry.epoch_update(chain).to_dict()
            ws.save_registry(registry)
        ws.save_pending([r for r in leftover if validate_news(r, registry)[0]])
    emit({"height": block.height, "hash": block.hash().hex(), "records": len(block.records), "nonce": block.header.nonce, "epoch": epoch})


@cli.command("verify-chain")
@click.pass_obj
@json_errors
def verify_chain_cmd(ws: Workspace):
    """Verify every hash pointer, merkle root and signature. Exit 0 iff intact."""
    ws.require()
    genesis = ws.genesis()
    report = verify_chain_file(ws.chain_path, genesis.pow_target if genesis.mode is Mode.POW else None)
    emit(report.to_dict())
    sys.exit(0 if report.ok else 1)


@cli.command()
@click.option("--digest", "record_digest", required=True, callback=hex_arg(32))
@click.pass_obj
@json_errors
def pot(ws: Workspace, record_digest):
    """Issue a proof-of-truthfulness certificate for an on-chain record."""
    cert = proof_of_truthfulness(ws.require().chain(), record_digest)
    emit(cert.to_dict())


@cli.command("pot-verify")
@click.option("--cert", "cert_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--digest", "record_digest", callback=hex_arg(32), help="Defaults to the digest in the certificate.")
@click.pass_obj
@json_errors
def pot_verify(ws: Workspace, cert_file, record_digest):
    """Check a certificate against this workspace's chain. Exit 0 iff valid."""
    cert = PoTCertificate.from_dict(json.loads(Path(cert_file).read_text()))
    trusted = ws.require().chain().header_hashes()
    ok = verify_truthfulness(cert, record_digest or cert.record_digest, trusted)
    emit(ok)
    sys.exit(0 if ok else 1)


@cli.command()
@click.option("--publisher")
@click.pass_obj
@json_errors
def reputation(ws: Workspace, publisher):
    """Show reputation scores and statuses."""
    registry = ws.require().registry()
    emit(registry.get(publisher).to_dict() if publisher else registry.snapshot())


@cli.command()
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--preset", type=click.Choice(["illustration"]), help="Run a built-in scenario instead of --config.")
@click.option("--report", "report_file", required=True, type=click.Path(dir_okay=False))
@click.option("--events", "events_file", type=click.Path(dir_okay=False), help="Also write the event log as JSON lines.")
@json_errors
def simulate(config_file, preset, report_file, events_file):
    """Run a network simulation. Exit 0 iff honest nodes agree and no tampering landed."""
    if (config_file is None) == (preset is None):
        raise InvalidArgument("give exactly one of --config and --preset")
    config = SimConfig.load(config_file) if config_file else scenario_illustration()
    report = run_simulation(config)
    Path(report_file).write_text(report.to_json() + "\n")
    if events_file:
        Path(events_file).write_text(report.events_jsonl())
    good = report.agreement and report.tampered_records_on_canonical == 0
    emit(
        {
            "agreement": report.agreement,
            "quiescent": report.quiescent,
            "tampered_records_on_canonical": report.tampered_records_on_canonical,
            "heights": [n["height"] for n in report.nodes],
        }
    )
    sys.exit(0 if good else 1)


@cli.command()
@click.option("--height", required=True, type=click.IntRange(min=0))
@click.option("--offset", required=True, type=click.IntRange(min=0), help="Byte offset within the block's line.")
@click.option("--byte", "new_byte", required=True, callback=hex_arg(1), help="Replacement byte, two hex digits.")
@click.option("--out", type=click.Path(dir_okay=False), help="Write a mutated copy instead of editing in place.")
@click.pass_obj
@json_errors
def tamper(ws: Workspace, height, offset, new_byte, out):
    """TEST UTILITY, DESTRUCTIVE: overwrite one byte of chain.jsonl."""
    with ws.require().locked():
        path = tamper_tool(ws.chain_path, height, offset, new_byte[0], out)
    emit({"written": str(path), "height": height, "offset": offset, "byte": new_byte.hex()})


def main(argv=None):
    try:
        code = cli.main(args=argv, prog_name="newschain", standalone_mode=False)
    except click.ClickException as exc:
        fail(exc.format_message(), code=exc.exit_code)
    except click.Abort:
        fail("aborted")
    sys.exit(code or 0)


if __name__ == "__main__":
    main()
