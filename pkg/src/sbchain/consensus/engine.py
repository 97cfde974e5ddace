"""Superblock consensus: all-to-all reliable broadcast + one binary instance per slot.

Instances run strictly one after the other at every node. A node joins the
next instance as soon as it has something to propose or hears from a peer
that already did; a node with an empty queue joins without broadcasting.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..core import Block, DecodeError, HashAlgo, Superblock, decode_block, encode_block
from .binary import BinaryAgreement, DBFTBinary, Transport
from .messages import BC_KINDS, RB_KINDS, Message
from .rbc import ReliableBroadcast

log = logging.getLogger(__name__)


@dataclass
class ConsensusInstance:
    index: int
    n: int
    blocks: list = field(default_factory=list)
    dec_blocks: list = field(default_factory=list)
    dec_count: int = 0
    started: bool = False
    proposed_own: Optional[Block] = None
    first_true: bool = False
    emitted: bool = False

    def __post_init__(self):
        self.blocks = [None] * self.n
        self.dec_blocks = [None] * self.n

    def ready(self) -> bool:
        if self.dec_count < self.n:
            return False
        return all(self.blocks[j] is not None for j in range(self.n) if self.dec_blocks[j])


class ConsensusEngine:
    """One node's consensus loop.

    ``block_queue`` is shared with the transaction pool. Its head is proposed
    when an instance starts and is dequeued only if the decided superblock
    includes it, otherwise it is proposed again at the next instance.
    """

    def __init__(
        self,
        node_id: int,
        n: int,
        f: int,
        transport: Transport,
        block_queue: deque,
        on_superblock: Callable[[Superblock, Optional[Block]], None],
        algo: HashAlgo = HashAlgo.KECCAK256,
        base_timeout: float = 0.05,
        binary: Optional[Callable[..., BinaryAgreement]] = None,
    ):
        self.node_id = node_id
        self.n = n
        self.f = f
        self.transport = transport
        self.block_queue = block_queue
        self.on_superblock = on_superblock
        self.index = 0  # last instance this node started
        self.emitted = 0  # last instance whose superblock was emitted
        self.instances: dict[int, ConsensusInstance] = {}
        self.rb = ReliableBroadcast(node_id, n, f, transport.broadcast, self._rb_deliver, algo)
        factory = binary or DBFTBinary
        self.bc = factory(node_id, n, f, transport, self._decided, base_timeout=base_timeout)

    def instance(self, i: int) -> ConsensusInstance:
        inst = self.instances.get(i)
        if inst is None:
            inst = self.instances[i] = ConsensusInstance(i, self.n)
        return inst

    # -- driving -----------------------------------------------------------

    def poke(self):
        """Start the next instance if the previous one is done and we have a proposal."""
        if self.index == self.emitted and self.block_queue:
            self.start_new_consensus()

    def start_new_consensus(self):
        self.index += 1
        inst = self.instance(self.index)
        inst.started = True
        if self.block_queue:
            self.consensus_propose(inst, self.block_queue[0])
        # catch up with deliveries and decisions that arrived early
        for j, blk in enumerate(inst.blocks):
            if blk is not None:
                self._propose(inst, j, True)
        if inst.first_true:
            self._propose_false_rest(inst)
        self._try_emit()

    def consensus_propose(self, inst: ConsensusInstance, block: Block):
        inst.proposed_own = block
        self.rb.start(inst.index, encode_block(block))

    def handle(self, msg: Message):
        if msg.kind in RB_KINDS:
            self.rb.handle(msg)
        elif msg.kind in BC_KINDS:
            if 0 <= msg.slot < self.n:
                self.bc.handle(msg)
        else:
            return
        # a peer is already running the next instance: join it
        if msg.instance == self.emitted + 1 and self.index == self.emitted:
            self.start_new_consensus()

    # -- callbacks from the sub-protocols -----------------------------------

    def _propose(self, inst: ConsensusInstance, slot: int, bit: bool):
        if not self.bc.has_proposed(inst.index, slot):
            self.bc.propose(inst.index, slot, bit)

    def _propose_false_rest(self, inst: ConsensusInstance):
        for j in range(self.n):
            if inst.blocks[j] is None:
                self._propose(inst, j, False)

    def _rb_deliver(self, instance: int, slot: int, payload: bytes):
        try:
            block = decode_block(payload)
        except DecodeError:
            log.info("instance %d slot %d: undecodable proposal ignored", instance, slot)
            return
        if block.proposer_id != slot or not block.transactions:
            log.info("instance %d slot %d: malformed proposal ignored", instance, slot)
            return
        inst = self.instance(instance)
        inst.blocks[slot] = block
        if inst.started:
            self._propose(inst, slot, True)
            self._try_emit()

    def _decided(self, instance: int, slot: int, bit: bool):
        inst = self.instance(instance)
        if inst.dec_blocks[slot] is not None:
            return
        inst.dec_blocks[slot] = bit
        inst.dec_count += 1
        if bit and not inst.first_true:
            inst.first_true = True
            if inst.started:
                self._propose_false_rest(inst)
        self._try_emit()

    # -- output --------------------------------------------------------------

    def _try_emit(self):
        while True:
            i = self.emitted + 1
            inst = self.instances.get(i)
            if inst is None or not inst.started or inst.emitted or not inst.ready():
                return
            subs = tuple((j, inst.blocks[j]) for j in range(self.n) if inst.dec_blocks[j])
            sb = Superblock(i, subs)
            inst.emitted = True
            self.emitted = i
            own = None
            if inst.proposed_own is not None and inst.dec_blocks[self.node_id]:
                if self.block_queue and self.block_queue[0] is inst.proposed_own:
                    own = self.block_queue.popleft()
            self.on_superblock(sb, own)
            nxt = self.instances.get(i + 1)
            if self.block_queue or nxt is not None:
                self.start_new_consensus()
            else:
                return
