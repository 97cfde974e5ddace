"""Cluster assembly, end-to-end runs, and the blockchain-problem checker."""
from __future__ import annotations

import json
import logging
import threading
import time
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

from ..core import HashAlgo, Transaction, block_hash, encode_block, tx_hash, verify_signature
from .byzantine import Strategy, make_behavior
from .client import ClientSession, TxRecord
from .network import LinkModel, Network
from .node import Node, NodeConfig
from .scheduler import ExploringScheduler, SimScheduler, ThreadedLoop, next_schedule

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Submission:
    offset: float  # seconds after the run starts
    tx: Transaction


@dataclass(frozen=True)
class ClusterConfig:
    n: int = 4
    f: int = 0  # nodes that actually misbehave
    seed: int = 0
    gst: float = 0.0
    delta: float = 0.01
    drop_rate: float = 0.0
    pre_gst_delay: float = 0.05
    strategy: Strategy = Strategy.SILENT
    byzantine_ids: Optional[tuple] = None  # default: the last f nodes
    client_targets: int = 1
    node: NodeConfig = NodeConfig()
    budget: float = 120.0  # virtual seconds (event mode) or wall seconds
    poll_interval: float = 0.01
    resubmit_after: Optional[float] = None
    mode: str = "event"  # or "wallclock"
    trace_messages: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one node")
        if self.f < 0 or 3 * self.f >= self.n:
            raise ValueError(f"f={self.f} byzantine nodes violates f < n/3 for n={self.n}")
        if not 1 <= self.client_targets <= self.tolerance + 1:
            raise ValueError("clients may target between 1 and f+1 nodes")
        if self.mode not in ("event", "wallclock"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.byzantine_ids is not None and len(set(self.byzantine_ids)) != self.f:
            raise ValueError("byzantine_ids must name exactly f distinct nodes")

    @property
    def tolerance(self) -> int:
        """Largest f the quorums are sized for."""
        return (self.n - 1) // 3

    @property
    def faulty(self) -> tuple:
        if self.byzantine_ids is not None:
            return tuple(sorted(self.byzantine_ids))
        return tuple(range(self.n - self.f, self.n))


@dataclass
class RunTranscript:
    config: ClusterConfig
    correct: tuple
    faulty: tuple
    chains: dict  # node -> list[Block], sealed and executed
    superblocks: dict  # node -> {instance: digest}
    metrics: dict  # node -> counter dict
    commits: dict  # node -> list[CommitEvent]
    state_roots: dict
    records: list[TxRecord]
    events: list[dict]
    messages: dict
    end_time: float
    completed: bool
    genesis_total: int = 0
    balances_plus_burned: dict = field(default_factory=dict)

    @property
    def algo(self) -> HashAlgo:
        return self.config.node.hash_algo

    def counter_total(self, name: str, nodes: Optional[Iterable[int]] = None) -> int:
        nodes = self.metrics.keys() if nodes is None else nodes
        return sum(self.metrics[i][name] for i in nodes)

    def chain_digests(self, node: int) -> list[bytes]:
        return [HashAlgo.KECCAK256.digest(encode_block(b)) for b in self.chains[node]]

    def fingerprint(self) -> str:
        """Digest over everything deterministic in the run (used for replay checks)."""
        h = HashAlgo.KECCAK256
        parts = []
        for i in sorted(self.chains):
            parts += self.chain_digests(i)
            parts += [bytes([k % 256]) + v for k, v in sorted(self.superblocks[i].items())]
            parts.append(json.dumps(self.metrics[i], sort_keys=True).encode())
        for r in self.records:
            parts.append(repr((r.hash.hex(), r.send_time, r.confirm_time, sorted(r.outcomes.items()))).encode())
        parts.append(json.dumps(self.events, sort_keys=True).encode())
        return h.digest(b"".join(parts)).hex()

    def write_jsonl(self, path: str):
        with open(path, "w") as fh:
            for ev in self.events:
                fh.write(json.dumps(ev, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# running


def _group_by_sender(submissions: Sequence[Submission], algo: HashAlgo):
    groups: dict[bytes, list] = {}
    for s in submissions:
        groups.setdefault(s.tx.sender, []).append((s.offset, s.tx, tx_hash(s.tx, algo).digest))
    return groups


class Cluster:
    def __init__(self, config: ClusterConfig, genesis: dict, submissions: Sequence[Submission],
                 contracts: Sequence[bytes] = (), scheduler: Optional[SimScheduler] = None):
        self.config = config
        self.genesis = dict(genesis)
        self.contracts = tuple(contracts)
        self.events: list[dict] = []
        self._ev_lock = threading.Lock()
        n = config.n
        if config.mode == "event":
            self.sched = scheduler if scheduler is not None else SimScheduler()
            self.loops = [self.sched] * n
            self.client_loop = self.sched
        else:
            epoch = time.monotonic()
            self.sched = None
            self.loops = [ThreadedLoop(f"node-{i}", epoch) for i in range(n)]
            self.client_loop = ThreadedLoop("clients", epoch)
        faulty = set(config.faulty)
        self.correct = tuple(i for i in range(n) if i not in faulty)
        self.faulty = tuple(sorted(faulty))
        link = LinkModel(config.gst, config.delta, config.drop_rate, config.pre_gst_delay)
        self.network = Network(n, lambda i: self.loops[i], [None] * n, link, seed=config.seed,
                               on_send=self._trace_send if config.trace_messages else None)
        victims = sorted(self.genesis)
        self.nodes: list[Node] = []
        for i in range(n):
            behavior = None
            if i in faulty:
                behavior = make_behavior(config.strategy, i, n, config.node.hash_algo, victims)
                self.network.interceptors[i] = behavior.intercept
            node = Node(i, n, config.tolerance, config.node, self.genesis, self.contracts,
                        self.loops[i], self.network, behavior, self._record)
            self.network.receivers[i] = node.receive
            self.nodes.append(node)
        self.clients: list[ClientSession] = []
        for k, (sender, txs) in enumerate(_group_by_sender(submissions, config.node.hash_algo).items()):
            targets = tuple((k + j) % n for j in range(config.client_targets))
            self.clients.append(ClientSession(sender, txs, targets, self.nodes, self.client_loop,
                                              config.poll_interval, config.resubmit_after))
        self.completed = False

    def _now(self) -> float:
        return self.client_loop.now()

    def _record(self, node: int, event: str, digest: str):
        with self._ev_lock:
            self.events.append({"t": round(self._now(), 6), "node": node, "event": event,
                                "digest": digest})

    def _trace_send(self, src, dst, msg):
        self._record(src, f"send:{msg.kind.name}->{dst}", msg.digest_hex())

    def settled(self) -> bool:
        """Every transaction is confirmed, rejected or ignored, and committed everywhere correct."""
        correct = [self.nodes[i] for i in self.correct]
        for c in self.clients:
            for rec in c.records:
                if rec.send_time is None or len(rec.outcomes) < len(rec.targets):
                    return False
                ok_correct = [i for i in rec.accepted_by if i in self.correct]
                if not ok_correct:
                    continue
                if rec.confirm_time is None:
                    return False
                if any(rec.hash not in node.committed for node in correct):
                    return False
        return True

    def _monitor(self):
        if self.settled():
            self.completed = True
            self.sched.stop()
            return
        self.sched.after(0.05, self._monitor)

    def run(self) -> RunTranscript:
        cfg = self.config
        for node in self.nodes:
            node.start()
        for c in self.clients:
            c.start()
        if cfg.mode == "event":
            self.sched.after(0.05, self._monitor)
            self.sched.run(until=cfg.budget)
            end = self.sched.now()
        else:
            for loop in self.loops + [self.client_loop]:
                loop.start()
            deadline = time.monotonic() + cfg.budget
            try:
                while time.monotonic() < deadline:
                    errors = [lp.error for lp in self.loops if lp.error is not None]
                    if errors:
                        raise errors[0]
                    if self.settled():
                        self.completed = True
                        break
                    time.sleep(0.02)
            finally:
                end = self._now()
                for loop in self.loops + [self.client_loop]:
                    loop.stop()
                for loop in self.loops + [self.client_loop]:
                    loop.join(5.0)
        for node in self.nodes:
            node.stop()
        return self.transcript(end)

    def transcript(self, end: float) -> RunTranscript:
        nodes = self.nodes
        records = [r for c in self.clients for r in c.records]
        return RunTranscript(
            config=self.config,
            correct=self.correct,
            faulty=self.faulty,
            chains={n.id: list(n.blocks) for n in nodes},
            superblocks={n.id: dict(n.superblocks) for n in nodes},
            metrics={n.id: n.metrics.counters() for n in nodes},
            commits={n.id: list(n.metrics.commits) for n in nodes},
            state_roots={n.id: n.state.root() for n in nodes},
            records=records,
            events=list(self.events),
            messages={k.name: v for k, v in sorted(self.network.sent.items())},
            end_time=end,
            completed=self.completed,
            genesis_total=sum(self.genesis.values()),
            balances_plus_burned={n.id: n.state.total_balance() + n.executor.burned for n in nodes},
        )


def run(config: ClusterConfig, genesis: dict, submissions: Sequence[Submission],
        contracts: Sequence[bytes] = (), scheduler: Optional[SimScheduler] = None) -> RunTranscript:
    return Cluster(config, genesis, submissions, contracts, scheduler).run()


# ---------------------------------------------------------------------------
# the blockchain problem: safety, validity, liveness


@dataclass(frozen=True)
class Violation:
    prop: str  # "safety" | "validity" | "liveness"
    where: str
    nodes: tuple
    detail: str


@dataclass
class BlockchainReport:
    violations: list[Violation] = field(default_factory=list)

    def failed(self, prop: str) -> list[Violation]:
        return [v for v in self.violations if v.prop == prop]

    @property
    def safety(self) -> bool:
        return not self.failed("safety")

    @property
    def validity(self) -> bool:
        return not self.failed("validity")

    @property
    def liveness(self) -> bool:
        return not self.failed("liveness")

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        lines = [f"safety={self.safety} validity={self.validity} liveness={self.liveness}"]
        lines += [f"  {v.prop} at {v.where} nodes={v.nodes}: {v.detail}" for v in self.violations[:20]]
        return "\n".join(lines)


def _check_safety(tr: RunTranscript, out: list):
    digests = {i: tr.chain_digests(i) for i in tr.correct}
    ids = list(tr.correct)
    for a_pos, a in enumerate(ids):
        for b in ids[a_pos + 1:]:
            da, db = digests[a], digests[b]
            for k, (x, y) in enumerate(zip(da, db)):
                if x != y:
                    out.append(Violation("safety", f"block {k + 1}", (a, b), "chains diverge"))
                    break
            sa, sb = tr.superblocks[a], tr.superblocks[b]
            for inst in sorted(set(sa) & set(sb)):
                if sa[inst] != sb[inst]:
                    out.append(Violation("safety", f"instance {inst}", (a, b),
                                         "different superblocks"))
                    break


def _check_validity(tr: RunTranscript, out: list):

    for i in tr.correct:
        nonces: dict[bytes, int] = defaultdict(int)
        parent = None
        for k, blk in enumerate(tr.chains[i]):
            where = f"block {blk.number}"
            if blk.number != k + 1:
                out.append(Violation("validity", where, (i,), f"expected number {k + 1}"))
            if parent is not None and blk.parent_hash != block_hash(parent, tr.algo):
                out.append(Violation("validity", where, (i,), "parent hash does not link"))
            if parent is not None and blk.timestamp < parent.timestamp:
                out.append(Violation("validity", where, (i,), "timestamp goes backwards"))
            for tx in blk.transactions:
                if not verify_signature(tx):
                    out.append(Violation("validity", where, (i,), "unsigned transaction persisted"))
                if tx.nonce != nonces[tx.sender]:
                    out.append(Violation("validity", where, (i,),
                                         f"nonce {tx.nonce} but expected {nonces[tx.sender]}"))
                nonces[tx.sender] = tx.nonce + 1
            parent = blk


def _check_liveness(tr: RunTranscript, out: list):
    committed = {i: {tx_hash(tx, tr.algo).digest for b in tr.chains[i] for tx in b.transactions}
                 for i in tr.correct}
    for rec in tr.records:
        if not any(i in tr.correct for i in rec.accepted_by):
            continue
        missing = tuple(i for i in tr.correct if rec.hash not in committed[i])
        if missing:
            out.append(Violation("liveness", f"tx {rec.hash.hex()[:16]}", missing,
                                 "accepted by a correct node but never committed"))


def assert_blockchain_problem(tr: RunTranscript) -> BlockchainReport:
    report = BlockchainReport()
    _check_safety(tr, report.violations)
    _check_validity(tr, report.violations)
    _check_liveness(tr, report.violations)
    return report


# ---------------------------------------------------------------------------
# bounded exhaustive exploration


@dataclass
class ExplorationResult:
    runs: int = 0
    exhausted: bool = False
    violations: list = field(default_factory=list)  # (choices, report)


def explore(config: ClusterConfig, genesis: dict, submissions: Sequence[Submission],
            depth: int = 8, branching: int = 2, max_runs: int = 10_000,
            contracts: Sequence[bytes] = ()) -> ExplorationResult:
    """Depth-first walk over every delivery order of the first ``depth`` events."""
    res = ExplorationResult()
    choices: Optional[list[int]] = []
    while choices is not None and res.runs < max_runs:
        sched = ExploringScheduler(choices, depth, branching)
        tr = run(replace(config, mode="event"), genesis, submissions, contracts, scheduler=sched)
        res.runs += 1
        report = assert_blockchain_problem(tr)
        if not report.ok:
            res.violations.append((list(choices), report))
        choices = next_schedule(choices, sched.fanout)
    res.exhausted = choices is None
    return res
