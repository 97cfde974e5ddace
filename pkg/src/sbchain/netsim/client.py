"""Simulated clients: send signed transactions, then poll receipts for confirmation."""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from ..core import Transaction


@dataclass
class TxRecord:
    hash: bytes
    sender: bytes
    nonce: int
    offset: float
    targets: tuple
    send_time: Optional[float] = None
    outcomes: dict = field(default_factory=dict)  # node -> reason value, None if ignored
    confirm_time: Optional[float] = None
    confirm_node: Optional[int] = None
    confirm_kv_reads: Optional[int] = None
    confirm_wall: Optional[float] = None  # seconds spent in the confirming poll
    status: Optional[bool] = None

    @property
    def accepted_by(self) -> list[int]:
        return sorted(n for n, r in self.outcomes.items() if r == "ok")

    @property
    def rejected(self) -> bool:
        return len(self.outcomes) == len(self.targets) and not self.accepted_by

    @property
    def latency(self) -> Optional[float]:
        if self.confirm_time is None or self.send_time is None:
            return None
        return self.confirm_time - self.send_time


class ClientSession:
    """One sending account, pinned to the same target nodes for all its nonces."""

    def __init__(self, sender: bytes, txs: list[tuple[float, Transaction, bytes]], targets: tuple,
                 nodes: list, loop, poll_interval: float = 0.01,
                 resubmit_after: Optional[float] = None):
        self.sender = sender
        self.targets = tuple(targets)
        self.nodes = nodes
        self.loop = loop
        self.poll_interval = poll_interval
        self.resubmit_after = resubmit_after
        self.txs = {h: tx for _, tx, h in txs}
        self.records = [TxRecord(h, tx.sender, tx.nonce, off, self.targets) for off, tx, h in txs]
        self._outstanding: deque[TxRecord] = deque(self.records)
        self._sent = 0
        self.done = not self.records

    def start(self):
        for rec in self.records:
            self.loop.after(rec.offset, lambda rec=rec: self._send(rec))
        if self.records:
            self.loop.after(self.poll_interval, self._poll)

    def _send(self, rec: TxRecord, targets=None):
        if rec.send_time is None:
            rec.send_time = self.loop.now()
            self._sent += 1
        for t in targets or rec.targets:
            node = self.nodes[t]
            node.loop.after(0.0, lambda node=node, rec=rec: self._deliver(node, rec))
        if self.resubmit_after is not None and targets is None:
            self.loop.after(self.resubmit_after, lambda: self._maybe_resubmit(rec))

    def _deliver(self, node, rec: TxRecord):
        outcome = node.submit(self.txs[rec.hash])
        rec.outcomes[node.id] = None if outcome is None else outcome.reason.value

    def _maybe_resubmit(self, rec: TxRecord):
        if rec.confirm_time is not None:
            return
        others = [i for i in range(len(self.nodes)) if i not in rec.outcomes]
        if others:
            rec.targets = rec.targets + (others[0],)
            self._send(rec, targets=(others[0],))

    def _poll(self):
        while self._outstanding:
            rec = self._outstanding[0]
            if rec.send_time is None:
                break
            if rec.rejected:
                self._outstanding.popleft()
                continue
            accepted = rec.accepted_by
            if not accepted:
                break
            node = self.nodes[accepted[0]]
            t0 = time.perf_counter()
            receipt, reads = node.chain.get_receipt_traced(rec.hash)
            wall = time.perf_counter() - t0
            if receipt is None:
                break
            rec.confirm_time = self.loop.now()
            rec.confirm_node = node.id
            rec.confirm_kv_reads = reads
            rec.confirm_wall = wall
            rec.status = receipt.status
            self._outstanding.popleft()
        if self._outstanding:
            self.loop.after(self.poll_interval, self._poll)
        else:
            self.done = True
