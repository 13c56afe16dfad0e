"""Deterministic round-based P2P simulation of publishers, miners and verifiers.

Each round: due messages are delivered, scripted publishers sign and broadcast
news, then any eligible miner proposes a block. Every node keeps its own block
tree and derives its registry from its own chain; chain states are memoized by
block hash, which is sound because the state after a block is a pure function
of its ancestry.
"""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional

from . import crypto
from .consensus import (
    GenesisConfig,
    Mode,
    fork_choice,
    mine_block,
    produce_poa_block,
    slot_producer,
    validate_block,
)
from .crypto import SIGNATURE_SIZE, seed_from_label
from .errors import ConfigError, InvalidArgument, NotOnChain, RevokedError
from .ledger import Block, Chain, build_block, dump_json, proof_of_truthfulness, verify_truthfulness
from .news import NewsRecord, Status, create_news, sign_news, validate_news
from .registry import Registry, TrustDirectory


class Role(str, Enum):
    PUBLISHER = "Publisher"
    MINER = "Miner"
    VERIFIER = "Verifier"


class Behavior(str, Enum):
    HONEST = "Honest"
    TAMPER = "Tamper"
    FORGE_SIG = "ForgeSig"
    EQUIVOCATE = "Equivocate"
    WITHHOLD = "Withhold"
    OUT_OF_TURN = "OutOfTurn"


@dataclass
class NodeSpec:
    role: Role
    behavior: Behavior = Behavior.HONEST
    key_seed: str = ""
    name: Optional[str] = None  # publisher name; defaults to key_seed

    @property
    def label(self) -> str:
        return self.name or self.key_seed

    def to_dict(self) -> dict:
        return {"role": self.role.value, "behavior": self.behavior.value, "key_seed": self.key_seed, "name": self.name}

    @classmethod
    def from_dict(cls, d: dict) -> "NodeSpec":
        return cls(Role(d["role"]), Behavior(d.get("behavior", "Honest")), str(d["key_seed"]), d.get("name"))


@dataclass
class LinkSpec:
    drop_probability: float = 0.0
    delay_rounds: int = 1


@dataclass
class PublishEvent:
    round: int
    publisher: str
    text: str


@dataclass
class Script:
    events: list[PublishEvent] = field(default_factory=list)
    directory: list[str] = field(default_factory=list)  # publishers listed in the trust directory
    pot_queries: list[int] = field(default_factory=list)  # event indices to certify at the end


@dataclass
class SimConfig:
    rng_seed: int = 0
    num_rounds: int = 0
    nodes: list[NodeSpec] = field(default_factory=list)
    link: LinkSpec = field(default_factory=LinkSpec)
    genesis: GenesisConfig = field(default_factory=GenesisConfig)
    script: Script = field(default_factory=Script)

    def to_dict(self) -> dict:
        return {
            "rng_seed": self.rng_seed,
            "num_rounds": self.num_rounds,
            "nodes": [n.to_dict() for n in self.nodes],
            "link": {"drop_probability": self.link.drop_probability, "delay_rounds": self.link.delay_rounds},
            "genesis": self.genesis.to_dict(),
            "script": {
                "events": [{"round": e.round, "publisher": e.publisher, "text": e.text} for e in self.script.events],
                "directory": list(self.script.directory),
                "pot_queries": list(self.script.pot_queries),
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        try:
            link = d.get("link", {})
            script = d.get("script", {})
            return cls(
                int(d.get("rng_seed", 0)),
                int(d.get("num_rounds", 0)),
                [NodeSpec.from_dict(n) for n in d.get("nodes", [])],
                LinkSpec(float(link.get("drop_probability", 0.0)), int(link.get("delay_rounds", 1))),
                GenesisConfig.from_dict(d.get("genesis", {})),
                Script(
                    [PublishEvent(int(e["round"]), e["publisher"], e["text"]) for e in script.get("events", [])],
                    list(script.get("directory", [])),
                    [int(i) for i in script.get("pot_queries", [])],
                ),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad simulation config: {exc}") from exc

    @classmethod
    def load(cls, path) -> "SimConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class SimReport:
    nodes: list[dict]
    agreement: bool
    quiescent: bool
    registry_agreement: bool
    tampered_records_on_canonical: int
    rounds_executed: int
    registry: list[dict]
    reputation: dict[str, list[dict]]
    pot: list[dict]
    events: list[dict]

    def to_dict(self) -> dict:
        return {
            "nodes": self.nodes,
            "agreement": self.agreement,
            "quiescent": self.quiescent,
            "registry_agreement": self.registry_agreement,
            "tampered_records_on_canonical": self.tampered_records_on_canonical,
            "rounds_executed": self.rounds_executed,
            "registry": self.registry,
            "reputation": self.reputation,
            "pot": self.pot,
            "events": self.events,
        }

    def to_json(self) -> str:
        return dump_json(self.to_dict())

    def events_jsonl(self) -> str:
        return "".join(dump_json(e) + "\n" for e in self.events)


class _State:
    """Chain state after a block: registry view and record index of that branch."""

    __slots__ = ("block", "hash", "parent", "registry", "index", "epoch_report")

    def __init__(self, block, parent, registry, index, epoch_report=None):
        self.block = block
        self.hash = block.hash()
        self.parent = parent
        self.registry = registry
        self.index = index
        self.epoch_report = epoch_report


class _Node:
    def __init__(self, idx: int, spec: NodeSpec):
        self.idx = idx
        self.spec = spec
        self.keypair = crypto.generate_keypair(seed_from_label(spec.key_seed))
        self.blocks: set[bytes] = set()
        self.rejected: set[bytes] = set()
        self.orphans: dict[bytes, list[Block]] = {}
        self.head: bytes = b""
        self.pending: dict[bytes, NewsRecord] = {}
        self.seen_records: set[bytes] = set()
        self.slots: dict[tuple[int, bytes], bytes] = {}

    @property
    def honest(self) -> bool:
        return self.spec.behavior is Behavior.HONEST

    @property
    def is_miner(self) -> bool:
        return self.spec.role is Role.MINER


def _tamper_text(text: str, pos: int) -> str:
    ch = text[pos]
    return text[:pos] + ("X" if ch != "X" else "Y") + text[pos + 1 :]


class Simulation:
    def __init__(self, config: SimConfig):
        self.config = config
        self._check_config()
        self.genesis_config = self._resolved_genesis()
        self.rng = random.Random(config.rng_seed)
        self.nodes = [_Node(i, spec) for i, spec in enumerate(config.nodes)]
        self.miners = [n for n in self.nodes if n.is_miner]
        self.publishers = {n.spec.label: n for n in self.nodes if n.spec.role is Role.PUBLISHER}
        self.queue: list = []
        self._seq = 0
        self.round = 0
        self.events: list[dict] = []
        self.legit: set[bytes] = set()
        self.event_digests: dict[int, bytes] = {}
        self._last_active: Optional[int] = None

        genesis = self.genesis_config.genesis()
        self.states: dict[bytes, _State] = {}
        root = _State(genesis, None, self._initial_registry(), {})
        self.states[root.hash] = root
        self.genesis_hash = root.hash
        for node in self.nodes:
            node.blocks.add(root.hash)
            node.head = root.hash

    # -- setup ----------------------------------------------------------

    def _check_config(self):
        c = self.config
        if c.num_rounds < 0:
            raise ConfigError("num_rounds must be non-negative")
        if not 0.0 <= c.link.drop_probability <= 1.0:
            raise ConfigError("drop_probability must lie in [0, 1]")
        if c.link.delay_rounds < 1:
            raise ConfigError("delay_rounds must be at least 1")
        if not any(n.role is Role.MINER for n in c.nodes):
            raise ConfigError("the simulation needs at least one miner")
        labels = [n.label for n in c.nodes if n.role is Role.PUBLISHER]
        if len(set(labels)) != len(labels):
            raise ConfigError("publisher names must be unique")
        seeds = [n.key_seed for n in c.nodes]
        if len(set(seeds)) != len(seeds):
            raise ConfigError("key seeds must be unique")
        for e in c.script.events:
            if e.publisher not in labels:
                raise ConfigError(f"script event names unknown publisher {e.publisher!r}")
        for name in c.script.directory:
            if name not in labels:
                raise ConfigError(f"directory lists unknown publisher {name!r}")
        for i in c.script.pot_queries:
            if not 0 <= i < len(c.script.events):
                raise ConfigError(f"pot query {i} is not a script event index")

    def _resolved_genesis(self) -> GenesisConfig:
        g = self.config.genesis
        miner_keys = tuple(
            crypto.generate_keypair(seed_from_label(n.key_seed)).public_key
            for n in self.config.nodes
            if n.role is Role.MINER
        )
        if g.mode is Mode.POA:
            if not g.authorities:
                g = GenesisConfig(g.mode, miner_keys, g.pow_target, g.max_block_records, g.skip_timeout, g.policy)
            elif tuple(g.authorities) != miner_keys:
                raise ConfigError("PoA authority set must equal the miner node keys")
        return g.validate()

    def _initial_registry(self) -> Registry:
        directory = TrustDirectory()
        org_keys = {}
        for name in self.config.script.directory:
            spec = self.publishers[name].spec
            org = crypto.generate_keypair(seed_from_label("org:" + spec.key_seed))
            directory[name] = org.public_key
            org_keys[name] = org
        reg = Registry(directory, self.genesis_config.policy)
        for name, node in self.publishers.items():
            seed = seed_from_label(node.spec.key_seed)
            if name in org_keys:
                challenge = reg.issue_challenge(name, 0, self.rng.randbytes(32))
                reg.enroll(name, org_keys[name].sign(challenge.nonce), seed, 0)
            else:
                reg.enroll(name, None, seed, 0)
        return reg

    # -- plumbing -------------------------------------------------------

    def log(self, kind: str, **fields):
        entry = {"round": self.round, "type": kind}
        entry.update(fields)
        self.events.append(entry)

    def _active(self):
        self._last_active = self.round

    def send(self, src: _Node, dst: _Node, kind: str, payload):
        if dst is src:
            return
        if kind != "status":
            self._active()
        p = self.config.link.drop_probability
        if p > 0 and self.rng.random() < p:
            return
        self._seq += 1
        heapq.heappush(self.queue, (self.round + self.config.link.delay_rounds, self._seq, dst.idx, kind, payload, src.idx))

    def broadcast(self, src: _Node, kind: str, payload, targets=None):
        for dst in targets if targets is not None else self.nodes:
            self.send(src, dst, kind, payload)

    def state_for(self, block: Block) -> _State:
        h = block.hash()
        state = self.states.get(h)
        if state is not None:
            return state
        parent = self.states[block.header.prev_hash]
        registry = parent.registry.copy()
        index = dict(parent.index)
        for pos, record in enumerate(block.records):
            index[record.digest] = (block.height, pos)
        state = _State(block, parent, registry, index)
        self.states[h] = state
        if block.height % self.genesis_config.policy.epoch_E == 0:
            report = registry.epoch_update(self.chain_to(h))
            state.epoch_report = report
            if not report.empty:
                self.log("epoch", block=h.hex(), **report.to_dict())
        return state

    def chain_to(self, head: bytes) -> Chain:
        blocks = []
        state = self.states[head]
        while state is not None:
            blocks.append(state.block)
            state = state.parent
        return Chain(reversed(blocks))

    # -- node behavior --------------------------------------------------

    def handle_block(self, node: _Node, block: Block, src: Optional[_Node]):
        h = block.hash()
        if h in node.blocks:
            return
        cid = block.content_id()
        if cid in node.rejected:
            return
        parent_hash = block.header.prev_hash
        if parent_hash not in node.blocks:
            node.orphans.setdefault(parent_hash, []).append(block)
            if src is not None:
                self.send(node, src, "get_block", parent_hash)
            return
        parent = self.states[parent_hash]
        verdict = validate_block(
            block, parent.block.header, parent.registry, self.genesis_config, parent.index, now=self.round
        )
        if not verdict:
            node.rejected.add(cid)
            self.log("reject", node=node.idx, block=cid.hex(), height=block.height, rule=verdict.rule, reason=verdict.reason)
            return
        self.state_for(block)
        node.blocks.add(h)
        self.log("accept", node=node.idx, block=cid.hex(), height=block.height)
        slot = (block.height, block.header.producer_key)
        if self.genesis_config.mode is Mode.POA:
            if slot in node.slots and node.slots[slot] != h:
                self.log("equivocation", node=node.idx, height=block.height, producer=block.header.producer_key.hex(), rule=6)
            node.slots.setdefault(slot, h)
        if node.honest:
            self.broadcast(node, "block", block, [n for n in self.nodes if n is not src])
        current = self.states[node.head].block.header
        if fork_choice([current, block.header]) is block.header:
            node.head = h
            if node.honest:
                self._active()
        for child in node.orphans.pop(h, []):
            self.handle_block(node, child, src)

    def handle_record(self, node: _Node, record: NewsRecord):
        d = record.digest
        if d in node.seen_records:
            return
        node.seen_records.add(d)
        if node.is_miner:
            node.pending[d] = record
        if node.honest:
            self.broadcast(node, "record", record, self.miners)

    def deliver(self, node: _Node, kind: str, payload, src: _Node):
        if kind == "block":
            self.handle_block(node, payload, src)
        elif kind == "record":
            self.handle_record(node, payload)
        elif kind == "status":
            if payload not in node.blocks and payload not in node.orphans:
                self.send(node, src, "get_block", payload)
        elif kind == "get_block":
            if payload in node.blocks:
                self.send(node, src, "block", self.states[payload].block)

    def publish(self, idx: int, event: PublishEvent):
        node = self.publishers[event.publisher]
        registry = self.states[node.head].registry
        pub = registry.get(event.publisher)
        try:
            record = create_news(node.keypair, pub, event.text, self.round)
            self.log("publish", node=node.idx, event=idx, record=record.digest.hex(), status=record.publisher_status.value)
        except RevokedError:
            # a revoked outlet can still sign and broadcast; miners must refuse it
            record = sign_news(node.keypair, pub.name, Status.NON_VERIFIED, event.text, self.round)
            self.log("publish_after_revocation", node=node.idx, event=idx, record=record.digest.hex())
        self.legit.add(record.digest)
        self.event_digests[idx] = record.digest
        node.seen_records.add(record.digest)
        self.broadcast(node, "record", record, self.miners)

    def _select(self, node: _Node, state: _State) -> list[NewsRecord]:
        out = []
        for d, record in node.pending.items():
            if d in state.index:
                continue
            if validate_news(record, state.registry)[0]:
                out.append(record)
                if len(out) == self.genesis_config.max_block_records:
                    break
        return out

    def _make_block(self, node: _Node, parent, records, nonce: int = 0) -> Block:
        if self.genesis_config.mode is Mode.POA:
            block = build_block(parent, records, self.round, nonce)
            return Block(block.header.signed_by(node.keypair), block.records)
        return mine_block(parent, records, self.round, self.genesis_config.pow_target)

    def propose(self, node: _Node, pow_winner: Optional[_Node]):
        g = self.genesis_config
        state = self.states[node.head]
        parent = state.block.header
        behavior = node.spec.behavior
        if g.mode is Mode.POA:
            producer = slot_producer(parent.height + 1, parent.timestamp, self.round, g.authorities, g.skip_timeout)
            eligible = producer == node.keypair.public_key
        else:
            eligible = node is pow_winner or behavior is Behavior.OUT_OF_TURN
        if behavior is Behavior.OUT_OF_TURN and not eligible:
            records = self._select(node, state)
            if records:
                block = produce_poa_block(parent, records, self.round, node.keypair)
                self._announce_proposal(node, block)
                self.broadcast(node, "block", block)
            return
        if not eligible:
            return
        records = self._select(node, state)
        if not records:
            return
        if behavior is Behavior.WITHHOLD:
            self.log("withhold", node=node.idx, height=parent.height + 1)
            return
        block = self._make_block(node, parent, records)
        if behavior in (Behavior.HONEST, Behavior.OUT_OF_TURN):
            self._announce_proposal(node, block)
            self.handle_block(node, block, None)
            self.broadcast(node, "block", block)
        elif behavior is Behavior.EQUIVOCATE:
            twin = self._make_block(node, parent, records, nonce=1) if g.mode is Mode.POA else self._make_block(
                node, parent, list(reversed(records))
            )
            self._announce_proposal(node, block)
            self._announce_proposal(node, twin)
            self.handle_block(node, block, None)
            others = [n for n in self.nodes if n is not node]
            half = len(others) // 2
            self.broadcast(node, "block", block, others[:half])
            self.broadcast(node, "block", twin, others[half:])
        elif behavior is Behavior.TAMPER:
            records = list(records)
            i = self.rng.randrange(len(records))
            victim = records[i]
            pos = self.rng.randrange(len(victim.news_text))
            records[i] = NewsRecord(
                victim.publisher_name,
                victim.publisher_status,
                victim.publisher_key,
                victim.timestamp,
                _tamper_text(victim.news_text, pos),
                victim.signature,
            )
            if self.rng.random() < 0.5:
                bad = self._make_block(node, parent, records)  # consistent root, bad record
            else:
                bad = Block(block.header, tuple(records))  # stale root
            self._announce_proposal(node, bad)
            self.broadcast(node, "block", bad)
        elif behavior is Behavior.FORGE_SIG:
            forged_sig = self.rng.randbytes(SIGNATURE_SIZE)
            if g.mode is Mode.POW or self.rng.random() < 0.5:
                records = list(records)
                i = self.rng.randrange(len(records))
                v = records[i]
                records[i] = NewsRecord(v.publisher_name, v.publisher_status, v.publisher_key, v.timestamp, v.news_text, forged_sig)
                bad = self._make_block(node, parent, records)
            else:
                bad = Block(replace(block.header, producer_sig=forged_sig), block.records)
            self._announce_proposal(node, bad)
            self.broadcast(node, "block", bad)

    def _announce_proposal(self, node: _Node, block: Block):
        self._active()
        self.log(
            "propose",
            node=node.idx,
            behavior=node.spec.behavior.value,
            block=block.content_id().hex(),
            height=block.height,
            records=len(block.records),
        )

    # -- main loop ------------------------------------------------------

    def _step(self, publishing: bool):
        r = self.round
        while self.queue and self.queue[0][0] <= r:
            _, _, dst, kind, payload, src = heapq.heappop(self.queue)
            self.deliver(self.nodes[dst], kind, payload, self.nodes[src])
        if publishing:
            for idx, event in enumerate(self.config.script.events):
                if event.round == r:
                    self.publish(idx, event)
        pow_winner = None
        if self.genesis_config.mode is Mode.POW:
            pow_winner = self.miners[self.rng.randrange(len(self.miners))]
        for node in self.miners:
            self.propose(node, pow_winner)
        # head announcements only carry information when links can lose messages
        if self.config.link.drop_probability > 0:
            for node in self.nodes:
                if node.honest:
                    self.broadcast(node, "status", node.head)

    def _quiet(self) -> bool:
        if any(kind != "status" for _, _, _, kind, _, _ in self.queue):
            return False
        if any(n.orphans for n in self.nodes if n.honest):
            return False
        if self._last_active is None:
            return True
        return self.round - self._last_active >= self.config.link.delay_rounds + 1

    def run(self) -> SimReport:
        for r in range(1, self.config.num_rounds + 1):
            self.round = r
            self._step(publishing=True)
        max_drain = 20 + 10 * (len(self.miners) + 1) * self.genesis_config.skip_timeout
        quiescent = self._quiet()
        drained = 0
        while not quiescent and drained < max_drain:
            self.round += 1
            drained += 1
            self._step(publishing=False)
            quiescent = self._quiet()
        return self._report(quiescent)

    # -- reporting ------------------------------------------------------

    def _report(self, quiescent: bool) -> SimReport:
        honest = [n for n in self.nodes if n.honest]
        heads = {n.head for n in honest}
        snapshots = {self.states[n.head].registry.snapshot_json() for n in honest}
        tampered = set()
        for head in heads:
            for d in self.states[head].index:
                if d not in self.legit:
                    tampered.add(d)
        reference = honest[0] if honest else self.nodes[0]
        ref_state = self.states[reference.head]
        return SimReport(
            nodes=[
                {
                    "node": n.idx,
                    "role": n.spec.role.value,
                    "behavior": n.spec.behavior.value,
                    "name": n.spec.label,
                    "head": n.head.hex(),
                    "height": self.states[n.head].block.height,
                }
                for n in self.nodes
            ],
            agreement=quiescent and len(heads) <= 1,
            quiescent=quiescent,
            registry_agreement=len(snapshots) <= 1,
            tampered_records_on_canonical=len(tampered),
            rounds_executed=self.round,
            registry=ref_state.registry.snapshot(),
            reputation=self._trajectories(reference.head),
            pot=self._pot(reference),
            events=self.events,
        )

    def _trajectories(self, head: bytes) -> dict[str, list[dict]]:
        states = []
        state = self.states[head]
        while state is not None:
            states.append(state)
            state = state.parent
        out: dict[str, list[dict]] = {}
        for state in reversed(states):
            if state.block.height != 0 and state.epoch_report is None:
                continue
            for pub in state.registry.publishers.values():
                out.setdefault(pub.name, []).append(
                    {
                        "height": state.block.height,
                        "reputation": pub.reputation,
                        "status": pub.status.value,
                    }
                )
        return out

    def _pot(self, issuer: _Node) -> list[dict]:
        results = []
        if not self.config.script.pot_queries:
            return results
        chain = self.chain_to(issuer.head)
        checkers = [n for n in self.nodes if n.spec.role is Role.VERIFIER and n.honest] or [
            n for n in self.nodes if n.honest
        ]
        for idx in self.config.script.pot_queries:
            d = self.event_digests.get(idx)
            entry = {"event": idx, "record_digest": None if d is None else d.hex()}
            try:
                cert = proof_of_truthfulness(chain, d) if d is not None else None
            except NotOnChain:
                cert = None
            entry["on_chain"] = cert is not None
            if cert is not None:
                entry["certificate"] = cert.to_dict()
                entry["verified_by"] = {
                    str(n.idx): verify_truthfulness(cert, d, self.chain_to(n.head).header_hashes()) for n in checkers
                }
            results.append(entry)
        return results


def run_simulation(config: SimConfig) -> SimReport:
    return Simulation(config).run()


# -- presets --------------------------------------------------------------

_HEADLINES = [
    "City council approves expanded light rail budget downtown",
    "Regional hospital opens pediatric cardiac surgery wing",
    "Drought forces farmers to delay spring wheat planting",
    "Central bank holds interest rate steady amid inflation worries",
    "Museum returns looted bronze sculptures to museum origin nation",
    "Wildfire near northern valley prompts evacuation of villages",
    "University researchers unveil low cost water purification membrane",
    "National football squad qualifies for continental championship final",
    "Parliament passes sweeping overhaul of pension contributions",
    "Storm knocks out electricity across coastal provinces overnight",
    "Tech startup recalls faulty smartwatch batteries after overheating",
    "Supreme court strikes down controversial mining concession law",
    "Volcano eruption grounds flights throughout island archipelago",
    "Teachers union announces nationwide strike over salary freeze",
    "Astronomers detect unusual radio bursts from distant galaxy",
    "Port authority completes dredging of deepwater shipping channel",
    "Health ministry launches measles vaccination drive in schools",
    "Automaker unveils hydrogen truck prototype at trade fair",
    "Flooding submerges rice paddies along southern river delta",
    "Orchestra cancels tour after conductor suffers sudden illness",
    "Police arrest smuggling ring trafficking rare parrots",
    "Census reveals rapid population growth in suburban districts",
    "Airline orders forty fuel efficient jets from manufacturer",
    "Archaeologists uncover ancient mosaic beneath parking garage",
    "Government subsidizes rooftop solar panels for rural households",
    "Marathon champion shatters course record despite heavy rain",
    "Cyberattack disrupts ticketing systems at major railway stations",
    "Coral reef survey finds bleaching slowed this summer",
    "Bridge reopens after two year seismic retrofit project",
    "Chess prodigy becomes youngest grandmaster in country history",
    "Mayor proposes congestion charge for crowded central avenues",
    "Fishermen protest new quota limits on cod catches",
]

_JUNK = [
    "Secret lizard cabal controls weather satellites insiders whisper",
    "Miracle onion cure erases baldness overnight doctors furious",
    "Moon base hidden behind clouds leaked blueprints prove",
    "Drinking seawater boosts intelligence claims anonymous forum guru",
]

VERIFIED_OUTLET = "Daily Ledger"
ECHO_OUTLET = "Echo Gazette"
JUNK_OUTLET = "Rumor Mill"


def echo_text(text: str) -> str:
    return f"{text} (via {VERIFIED_OUTLET})"


def scenario_illustration() -> SimConfig:
    """Preset walkthrough: a verified outlet, an echoing newcomer, a junk outlet.

    Timeline (one block per round, record of round r lands at height r):
    rounds 1-30 the verified outlet publishes headline r; the echo outlet
    copies headlines 1-5 at once, stays silent until its promotion at height
    10 is visible (round 12), then copies headline r and re-covers headline
    r-11 each round up to 22, headline r alone afterwards. The junk outlet
    posts three rumors in rounds 1-3, is revoked at height 30, and tries once
    more in round 32.
    """
    nodes = [NodeSpec(Role.MINER, key_seed=f"miner-{i}") for i in range(4)]
    nodes += [
        NodeSpec(Role.PUBLISHER, key_seed="publisher-ledger", name=VERIFIED_OUTLET),
        NodeSpec(Role.PUBLISHER, key_seed="publisher-echo", name=ECHO_OUTLET),
        NodeSpec(Role.PUBLISHER, key_seed="publisher-rumor", name=JUNK_OUTLET),
        NodeSpec(Role.VERIFIER, key_seed="verifier-0"),
    ]
    events = []
    for r in range(1, 31):
        events.append(PublishEvent(r, VERIFIED_OUTLET, _HEADLINES[r - 1]))
        if r <= 5 or r >= 12:
            events.append(PublishEvent(r, ECHO_OUTLET, echo_text(_HEADLINES[r - 1])))
        if 12 <= r <= 22:
            events.append(PublishEvent(r, ECHO_OUTLET, echo_text(_HEADLINES[r - 12])))
        if r <= 3:
            events.append(PublishEvent(r, JUNK_OUTLET, _JUNK[r - 1]))
    events.append(PublishEvent(32, JUNK_OUTLET, _JUNK[3]))
    return SimConfig(
        rng_seed=2019,
        num_rounds=34,
        nodes=nodes,
        genesis=GenesisConfig(mode=Mode.POA),
        script=Script(events, [VERIFIED_OUTLET], [0]),
    )


def standard_config(
    n_miners: int = 4,
    behaviors: dict[int, Behavior] | None = None,
    n_publishers: int = 3,
    num_rounds: int = 30,
    rng_seed: int = 0,
    drop_probability: float = 0.0,
    mode: Mode = Mode.POA,
    publish_every: int = 1,
) -> SimConfig:
    """Generic workload: publishers post seeded random stories every few rounds.

    The first two publishers are directory-verified and run the same wire
    story, so they corroborate each other and stay live; the rest post
    unrelated stories and are eventually revoked. ``behaviors`` maps miner
    index to adversary behavior.
    """
    behaviors = behaviors or {}
    rng = random.Random(rng_seed)
    vocab = sorted({w.lower() for line in _HEADLINES for w in line.split()})
    nodes = [NodeSpec(Role.MINER, behaviors.get(i, Behavior.HONEST), f"miner-{i}") for i in range(n_miners)]
    names = [f"outlet-{j}" for j in range(n_publishers)]
    nodes += [NodeSpec(Role.PUBLISHER, key_seed=f"pub-{j}", name=names[j]) for j in range(n_publishers)]
    nodes.append(NodeSpec(Role.VERIFIER, key_seed="verifier-0"))
    verified = names[:2]
    events = []
    for r in range(1, num_rounds + 1):
        wire = " ".join(rng.sample(vocab, 8))
        for j, name in enumerate(names):
            if name in verified:
                if r % publish_every == 0:
                    events.append(PublishEvent(r, name, wire))
            elif (r + j) % publish_every == 0:
                events.append(PublishEvent(r, name, " ".join(rng.sample(vocab, 8))))
    return SimConfig(
        rng_seed=rng_seed,
        num_rounds=num_rounds + 2,
        nodes=nodes,
        link=LinkSpec(drop_probability, 1),
        genesis=GenesisConfig(mode=mode, pow_target=2**250),
        script=Script(events, verified, [0] if events else []),
    )


# -- tamper utility -------------------------------------------------------


def tamper_tool(chain_file, height: int, byte_offset: int, new_byte: int, out=None) -> Path:
    """Overwrite one byte of the serialized block at ``height``.

    ``byte_offset`` counts from the start of that block's line; the offset
    equal to the line length addresses its newline. Writes to ``out``
    (default: in place) and returns the written path.
    """
    src = Path(chain_file)
    data = bytearray(src.read_bytes())
    lines = bytes(data).split(b"\n")[:-1] if data.endswith(b"\n") else bytes(data).split(b"\n")
    if not 0 <= height < len(lines):
        raise InvalidArgument(f"height {height} outside the file ({len(lines)} blocks)")
    if not 0 <= byte_offset <= len(lines[height]):
        raise InvalidArgument(f"offset {byte_offset} outside block {height} ({len(lines[height])} bytes)")
    if not 0 <= new_byte <= 255:
        raise InvalidArgument("new byte must be in [0, 255]")
    start = sum(len(line) + 1 for line in lines[:height])
    if start + byte_offset >= len(data):
        raise InvalidArgument("offset addresses a byte past the end of the file")
    data[start + byte_offset] = new_byte
    dest = Path(out) if out is not None else src
    dest.write_bytes(bytes(data))
    return dest
