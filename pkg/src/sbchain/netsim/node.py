"""One replica: pool + consensus + executor + state + chain store on one event loop."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

from ..consensus import ConsensusEngine
from ..consensus.messages import Kind, Message
from ..core import (
    Block,
    HashAlgo,
    Superblock,
    Transaction,
    decode_transaction,
    canonical_encode,
    encode_superblock,
    tx_hash,
)
from ..executor import ExecConfig, Executor, TimestampRule
from ..metrics import NodeMetrics
from ..state import WorldState
from ..statetrie import DEFAULT_FLUSH_THRESHOLD
from ..storage import ChainStore, KeyMode, KVStore
from ..txmgr import DEFAULT_THRESHOLD, DEFAULT_TICK_MS, TxPool, ValidationOutcome
from .byzantine import Behavior

log = logging.getLogger(__name__)

EPOCH_MS = 1_700_000_000_000
GENESIS_TIMESTAMP = EPOCH_MS - 1000


@dataclass(frozen=True)
class NodeConfig:
    """Per-node toggles. Every optimisation can be switched off for A/B runs."""

    hash_algo: HashAlgo = HashAlgo.KECCAK256
    caches_on: bool = True
    per_sub_block: bool = True
    key_mode: KeyMode = KeyMode.SRBB_NUMBER
    eager_once: bool = True  # False: gossip every tx, validate at every node
    timestamp_rule: TimestampRule = TimestampRule.NON_STRICT
    threshold: int = DEFAULT_THRESHOLD
    tick: float = DEFAULT_TICK_MS / 1000
    body_capacity: int = 1024
    receipt_capacity: int = 8192
    flush_threshold: int = DEFAULT_FLUSH_THRESHOLD
    kv_read_latency_us: float = 0.0
    kv_write_latency_us: float = 0.0
    bc_timeout: float = 0.05


class Node:
    def __init__(self, node_id: int, n: int, f: int, config: NodeConfig, genesis: dict,
                 contracts, loop, network, behavior: Optional[Behavior] = None,
                 record: Optional[Callable[[int, str, str], None]] = None):
        self.id = node_id
        self.n = n
        self.config = config
        self.loop = loop
        self.network = network
        self.behavior = behavior
        self.byzantine = behavior is not None
        self.record = record or (lambda node, event, digest: None)
        self.metrics = NodeMetrics()
        algo = config.hash_algo
        self.algo = algo
        self.kv = KVStore(read_latency_us=config.kv_read_latency_us,
                          write_latency_us=config.kv_write_latency_us, metrics=self.metrics)
        self.chain = ChainStore(self.kv, config.key_mode, config.caches_on, config.body_capacity,
                                config.receipt_capacity, algo, self.metrics)
        self.state = WorldState.from_genesis(genesis, contracts, algo=algo, kv=self.kv,
                                             flush_threshold=config.flush_threshold)
        self.pool = TxPool(self.state, config.threshold, metrics=self.metrics, algo=algo,
                           proposer_id=node_id, clock=self.clock_ms)
        self.executor = Executor(
            self.state, self.chain,
            ExecConfig(config.per_sub_block, config.timestamp_rule),
            self.metrics, eager_seen=self.pool.validated, clock=loop.now,
            genesis_timestamp=GENESIS_TIMESTAMP,
        )
        self.blocks: list[Block] = []
        self.committed: set[bytes] = set()  # hashes of executed transactions
        self.executor.on_persist.append(self._persisted)
        self.superblocks: dict[int, bytes] = {}
        self.engine = ConsensusEngine(node_id, n, f, self, self.pool.block_queue,
                                      self._on_superblock, algo, config.bc_timeout)
        self.running = False

    # -- transport used by the consensus engine ------------------------------

    def broadcast(self, msg: Message):
        self.network.broadcast(self.id, msg)

    def set_timer(self, delay: float, cb):
        self.loop.after(delay, cb)

    def clock_ms(self) -> int:
        return EPOCH_MS + int(self.loop.now() * 1000)

    # -- lifecycle -----------------------------------------------------------

    def start(self):
        self.running = True
        self.loop.after(self.config.tick, self._tick)

    def stop(self):
        self.running = False

    def _tick(self):
        if not self.running:
            return
        if self.behavior is not None:
            self.behavior.on_tick(self)
        if self.pool.maybe_build_proposal(tick=True) is not None:
            self.record(self.id, "propose", "")
        self.engine.poke()
        self.loop.after(self.config.tick, self._tick)

    def receive(self, msg: Message):
        if msg.kind is Kind.TX_GOSSIP:
            self.metrics.incr("tx_gossip_received")
            if msg.payload is not None and not (self.behavior and self.behavior.silent):
                self.pool.accept_remote(decode_transaction(msg.payload))
            return
        self.engine.handle(msg)

    # -- client API ------------------------------------------------------------

    def submit(self, tx: Transaction) -> Optional[ValidationOutcome]:
        """A client hands over a transaction; ``None`` means the node ignored it."""
        if self.behavior is not None and self.behavior.silent:
            return None
        outcome = self.pool.submit(tx)
        if outcome.accepted:
            self.record(self.id, "submit", tx_hash(tx, self.algo).hex()[:16])
            if not self.config.eager_once:
                payload = canonical_encode(tx)
                for dst in range(self.n):
                    if dst != self.id:
                        self.metrics.incr("tx_gossip_sent")
                        self.network.send(self.id, dst, Message(Kind.TX_GOSSIP, self.id, 0, 0,
                                                                payload=payload))
            if self.pool.maybe_build_proposal() is not None:
                self.record(self.id, "propose", "")
            self.engine.poke()
        return outcome

    def get_receipt(self, h: bytes):
        return self.chain.get_receipt(h)

    # -- commit path -------------------------------------------------------------

    def _persisted(self, block: Block, receipts):
        self.blocks.append(block)
        self.committed.update(r.tx_hash for r in receipts)

    def _on_superblock(self, sb: Superblock, own: Optional[Block]):
        digest = HashAlgo.KECCAK256.digest(encode_superblock(sb))
        self.superblocks[sb.consensus_index] = digest
        self.record(self.id, "superblock", digest.hex()[:16])
        self.executor.commit_superblock(sb)
        self.pool.on_commit(own)
        if self.pool.maybe_build_proposal() is not None:
            self.record(self.id, "propose", "")
