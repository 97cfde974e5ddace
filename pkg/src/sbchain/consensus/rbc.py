"""Bracha reliable broadcast, one state machine per (instance, proposer)."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..core import HashAlgo
from .messages import Kind, Message


class Phase(enum.IntEnum):
    INIT = 0
    ECHOED = 1
    READIED = 2
    DELIVERED = 3


@dataclass
class RBState:
    phase: Phase = Phase.INIT
    values: dict[bytes, bytes] = field(default_factory=dict)
    echoes: dict[int, bytes] = field(default_factory=dict)
    readies: dict[int, bytes] = field(default_factory=dict)
    ready_sent: bool = False
    delivered: Optional[bytes] = None

    def count(self, votes: dict[int, bytes], digest: bytes) -> int:
        return sum(1 for d in votes.values() if d == digest)


class ReliableBroadcast:
    """Echo/ready quorums for n >= 3f + 1.

    A sender's first ECHO (or READY) for a slot is the only one counted, so an
    equivocating peer cannot vote twice. Delivery waits for 2f+1 matching
    READYs and the value itself, which arrives with SEND or any ECHO.
    """

    def __init__(self, node_id: int, n: int, f: int,
                 broadcast: Callable[[Message], None],
                 deliver: Callable[[int, int, bytes], None],
                 algo: HashAlgo = HashAlgo.KECCAK256):
        self.node_id = node_id
        self.n = n
        self.f = f
        self.broadcast = broadcast
        self.deliver = deliver
        self.algo = algo
        self.echo_quorum = (n + f) // 2 + 1
        self.states: dict[tuple[int, int], RBState] = {}

    def state(self, instance: int, proposer: int) -> RBState:
        key = (instance, proposer)
        st = self.states.get(key)
        if st is None:
            st = self.states[key] = RBState()
        return st

    def start(self, instance: int, payload: bytes):
        digest = self.algo.digest(payload)
        self.broadcast(Message(Kind.RB_SEND, self.node_id, instance, self.node_id,
                               digest=digest, payload=payload))

    def handle(self, msg: Message):
        st = self.state(msg.instance, msg.slot)
        if msg.payload is not None:
            if self.algo.digest(msg.payload) != msg.digest:
                return  # malformed: payload does not match its name
            st.values.setdefault(msg.digest, msg.payload)

        if msg.kind is Kind.RB_SEND:
            if msg.sender != msg.slot:
                return  # only the proposer may SEND for its slot
            if st.phase is Phase.INIT:
                st.phase = Phase.ECHOED
                self.broadcast(Message(Kind.RB_ECHO, self.node_id, msg.instance, msg.slot,
                                       digest=msg.digest, payload=msg.payload))
        elif msg.kind is Kind.RB_ECHO:
            if msg.sender in st.echoes:
                return
            st.echoes[msg.sender] = msg.digest
            if st.count(st.echoes, msg.digest) >= self.echo_quorum:
                self._ready(msg.instance, msg.slot, st, msg.digest)
        elif msg.kind is Kind.RB_READY:
            if msg.sender in st.readies:
                return
            st.readies[msg.sender] = msg.digest
            if st.count(st.readies, msg.digest) >= self.f + 1:
                self._ready(msg.instance, msg.slot, st, msg.digest)
        self._try_deliver(msg.instance, msg.slot, st)

    def _ready(self, instance: int, slot: int, st: RBState, digest: bytes):
        if st.ready_sent:
            return
        st.ready_sent = True
        st.phase = max(st.phase, Phase.READIED)
        self.broadcast(Message(Kind.RB_READY, self.node_id, instance, slot, digest=digest))

    def _try_deliver(self, instance: int, slot: int, st: RBState):
        if st.delivered is not None:
            return
        for digest in dict.fromkeys(st.readies.values()):
            if st.count(st.readies, digest) >= 2 * self.f + 1 and digest in st.values:
                st.delivered = digest
                st.phase = Phase.DELIVERED
                self.deliver(instance, slot, st.values[digest])
                return
