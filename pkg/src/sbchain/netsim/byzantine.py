"""Byzantine behaviours as message-level interceptors on a node's outbox."""
from __future__ import annotations

import enum
from dataclasses import replace
from typing import Sequence

from ..core import Block, DecodeError, HashAlgo, KeyPair, Transaction, decode_block, encode_block, sign
from ..consensus.messages import Kind, Message


class Strategy(enum.Enum):
    SILENT = "silent"
    EQUIVOCATE_RB = "equivocate-rb"
    INVALID_TX_PROPOSER = "invalid-tx"
    CONFLICTING_BIN_VOTES = "conflicting-bin"

    @classmethod
    def parse(cls, name: str) -> "Strategy":
        key = name.strip().lower().replace("_", "-")
        for s in cls:
            if key in (s.value, s.name.lower().replace("_", "-")):
                return s
        raise ValueError(f"unknown byzantine strategy {name!r}")


class Behavior:
    """Honest by default; subclasses override what they corrupt."""

    silent = False

    def __init__(self, node_id: int, n: int, algo: HashAlgo):
        self.node_id = node_id
        self.n = n
        self.algo = algo

    def intercept(self, dst: int, msg: Message) -> list[Message]:
        return [msg]

    def on_tick(self, node) -> None:
        pass


class Silent(Behavior):
    silent = True

    def intercept(self, dst, msg):
        return []


class EquivocateRB(Behavior):
    """Shows one proposal to the lower half of the nodes and a twin to the upper half."""

    def __init__(self, node_id, n, algo):
        super().__init__(node_id, n, algo)
        self._twins: dict[bytes, tuple[bytes, bytes]] = {}

    def _twin(self, digest: bytes, payload):
        if digest not in self._twins and payload is not None:
            try:
                blk = decode_block(payload)
                alt = encode_block(replace(blk, timestamp=blk.timestamp + 1))
            except (DecodeError, ValueError):
                alt = payload + b"\x00"
            self._twins[digest] = (self.algo.digest(alt), alt)
        return self._twins.get(digest)

    def intercept(self, dst, msg):
        if msg.kind not in (Kind.RB_SEND, Kind.RB_ECHO, Kind.RB_READY) or msg.slot != self.node_id:
            return [msg]
        twin = self._twin(msg.digest, msg.payload)
        if twin is None or dst < self.n // 2:
            return [msg]
        digest, alt = twin
        return [replace(msg, digest=digest, payload=alt if msg.payload is not None else None)]


class InvalidTxProposer(Behavior):
    """Keeps proposing blocks whose transactions no honest pool would accept."""

    def __init__(self, node_id, n, algo, victims: Sequence[bytes] = ()):
        super().__init__(node_id, n, algo)
        self.victims = list(victims)
        self.key = KeyPair.from_seed(b"byzantine-%d" % node_id)
        self.counter = 0

    def forge_block(self, node) -> Block:
        self.counter += 1
        txs = []
        for victim in self.victims[:4]:
            # claims a funded sender at its current nonce, signed by the wrong key
            forged = sign(Transaction(victim, self.key.address, node.state.nonce(victim),
                                      1, 21000, 1), self.key)
            txs.append(replace(forged, sender=victim))
        # self-signed but far from the committed nonce, and unfunded
        txs.append(sign(Transaction(self.key.address, self.key.address, 10**6 + self.counter,
                                    10**9, 21000, 1), self.key))
        return Block(self.node_id, node.clock_ms(), tuple(txs))

    def on_tick(self, node):
        if not node.pool.block_queue:
            node.pool.block_queue.append(self.forge_block(node))
            node.engine.poke()


class ConflictingBinVotes(Behavior):
    """Sends opposite binary votes to even and odd destinations."""

    def intercept(self, dst, msg):
        if msg.kind in (Kind.BC_EST, Kind.BC_COORD):
            return [replace(msg, value=dst % 2)]
        if msg.kind is Kind.BC_AUX:
            return [replace(msg, value=1 if dst % 2 == 0 else 2)]
        return [msg]


def make_behavior(strategy: Strategy, node_id: int, n: int, algo: HashAlgo,
                  victims: Sequence[bytes] = ()) -> Behavior:
    if strategy is Strategy.SILENT:
        return Silent(node_id, n, algo)
    if strategy is Strategy.EQUIVOCATE_RB:
        return EquivocateRB(node_id, n, algo)
    if strategy is Strategy.INVALID_TX_PROPOSER:
        return InvalidTxProposer(node_id, n, algo, victims)
    if strategy is Strategy.CONFLICTING_BIN_VOTES:
        return ConflictingBinVotes(node_id, n, algo)
    raise ValueError(strategy)
