"""Transaction server and pool.

A submitted transaction is eagerly validated once, by the node that receives
it, and then only ever travels to peers inside a proposed block. The pool
reserves nonces and balance for everything it has accepted but not yet seen
committed, so one proposal window cannot double-spend.
"""
from __future__ import annotations

import enum
import logging
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional, Protocol

from .core import (
    MAX_TX_SIZE,
    U128_MAX,
    Block,
    HashAlgo,
    Transaction,
    canonical_encode,
    intrinsic_gas,
    tx_hash,
    verify_signature,
)
from .metrics import NodeMetrics

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 100
DEFAULT_TICK_MS = 50
DEFAULT_BLOCK_GAS_LIMIT = 30_000_000
DEFAULT_POOL_CAP = 100_000


class Reason(enum.Enum):
    OK = "ok"
    TooLarge = "too-large"
    NegativeValue = "negative-value"
    GasExceedsBlockLimit = "gas-exceeds-block-limit"
    BadSignature = "bad-signature"
    NonceGap = "nonce-gap"
    InsufficientBalance = "insufficient-balance"
    InsufficientGas = "insufficient-gas"
    Duplicate = "duplicate"
    PoolFull = "pool-full"


@dataclass(frozen=True)
class ValidationOutcome:
    accepted: bool
    reason: Reason

    def __post_init__(self):
        if self.accepted != (self.reason is Reason.OK):
            raise ValueError("accepted iff reason is OK")


OK = ValidationOutcome(True, Reason.OK)


class StateView(Protocol):
    def nonce(self, address: bytes) -> int: ...
    def balance(self, address: bytes) -> int: ...


def eager_validate(
    tx: Transaction,
    view: StateView,
    block_gas_limit: int = DEFAULT_BLOCK_GAS_LIMIT,
    metrics: Optional[NodeMetrics] = None,
) -> ValidationOutcome:
    """Full reception-time check; the first failing check decides the reason."""
    if metrics is not None:
        metrics.incr("eager_validations")

    def fail(reason):
        return ValidationOutcome(False, reason)

    if len(canonical_encode(tx)) > MAX_TX_SIZE or tx.value > U128_MAX:
        return fail(Reason.TooLarge)
    if tx.value < 0:
        return fail(Reason.NegativeValue)
    if tx.gas_limit > block_gas_limit:
        return fail(Reason.GasExceedsBlockLimit)
    if metrics is not None:
        metrics.incr("signature_checks")
    if not verify_signature(tx):
        return fail(Reason.BadSignature)
    if tx.nonce != view.nonce(tx.sender):
        return fail(Reason.NonceGap)
    if view.balance(tx.sender) < tx.max_cost:
        return fail(Reason.InsufficientBalance)
    if tx.gas_limit < intrinsic_gas(tx):
        return fail(Reason.InsufficientGas)
    return OK


class TxPool:
    """Pending validated transactions plus the proposal queue of one node.

    ``committed`` is the node's read-only view of committed state. Every
    transaction the pool has accepted stays *reserved* until a commit shows its
    nonce consumed or its block was committed; reservations shift the nonce and
    balance that the next eager validation sees.
    """

    def __init__(
        self,
        committed: StateView,
        threshold: int = DEFAULT_THRESHOLD,
        block_gas_limit: int = DEFAULT_BLOCK_GAS_LIMIT,
        cap: int = DEFAULT_POOL_CAP,
        metrics: Optional[NodeMetrics] = None,
        algo: HashAlgo = HashAlgo.KECCAK256,
        proposer_id: int = 0,
        clock: Callable[[], int] = lambda: 0,
    ):
        if threshold < 1:
            raise ValueError("threshold must be positive")
        self.committed = committed
        self.threshold = threshold
        self.block_gas_limit = block_gas_limit
        self.cap = cap
        self.metrics = metrics if metrics is not None else NodeMetrics()
        self.algo = algo
        self.proposer_id = proposer_id
        self.clock = clock
        self.pending: dict[tuple[bytes, int], Transaction] = {}
        self.block_queue: deque[Block] = deque()
        self.validated: set[bytes] = set()  # hashes this node eagerly accepted
        self._known: set[bytes] = set()
        self._reserved: dict[bytes, dict[int, Transaction]] = {}

    # -- reservation-aware view -------------------------------------------

    def nonce(self, sender: bytes) -> int:
        n = self.committed.nonce(sender)
        held = self._reserved.get(sender, {})
        while n in held:
            n += 1
        return n

    def balance(self, sender: bytes) -> int:
        base = self.committed.nonce(sender)
        held = self._reserved.get(sender, {})
        spent = sum(t.max_cost for nonce, t in held.items() if nonce >= base)
        return self.committed.balance(sender) - spent

    def _reserve(self, tx: Transaction):
        self._reserved.setdefault(tx.sender, {})[tx.nonce] = tx

    def _release(self, tx: Transaction):
        held = self._reserved.get(tx.sender)
        if held is not None and held.get(tx.nonce) is tx:
            del held[tx.nonce]
            if not held:
                del self._reserved[tx.sender]

    # -- intake ------------------------------------------------------------

    def __len__(self):
        return len(self.pending)

    def validate(self, tx: Transaction) -> ValidationOutcome:
        h = tx_hash(tx, self.algo).digest
        if h in self._known:
            return ValidationOutcome(False, Reason.Duplicate)
        if len(self.pending) >= self.cap:
            return ValidationOutcome(False, Reason.PoolFull)
        return eager_validate(tx, self, self.block_gas_limit, self.metrics)

    def submit(self, tx: Transaction) -> ValidationOutcome:
        """Validate and keep ``tx`` for a future proposal. Never forwards it."""
        outcome = self.validate(tx)
        if not outcome.accepted:
            log.debug("rejected tx from %s: %s", tx.sender.hex(), outcome.reason.value)
            return outcome
        h = tx_hash(tx, self.algo).digest
        self._known.add(h)
        self.validated.add(h)
        self.pending[(tx.sender, tx.nonce)] = tx
        self._reserve(tx)
        return outcome

    def accept_remote(self, tx: Transaction) -> ValidationOutcome:
        """Gossiped transaction (compatibility baseline): validate and reserve, never propose."""
        outcome = self.validate(tx)
        if outcome.accepted:
            h = tx_hash(tx, self.algo).digest
            self._known.add(h)
            self.validated.add(h)
            self._reserve(tx)
        return outcome

    # -- proposals ---------------------------------------------------------

    def maybe_build_proposal(self, tick: bool = False) -> Optional[Block]:
        """Cut a block when the threshold is reached, or on a tick with a non-empty pool."""
        if not self.pending or (len(self.pending) < self.threshold and not tick):
            return None
        keys = sorted(self.pending)[: self.threshold]
        txs = tuple(self.pending.pop(k) for k in keys)
        block = Block(self.proposer_id, self.clock(), txs)
        self.block_queue.append(block)
        return block

    def on_commit(self, own_block_included: Optional[Block] = None):
        """Drop reservations that committed state has made obsolete.

        Transactions of an own block that consensus included are released even
        if execution dropped them.
        """
        if own_block_included is not None:
            for tx in own_block_included.transactions:
                self._release(tx)
        for sender in list(self._reserved):
            base = self.committed.nonce(sender)
            held = self._reserved[sender]
            for nonce in [n for n in held if n < base]:
                del held[nonce]
            if not held:
                del self._reserved[sender]
        for key in [k for k in self.pending if k[1] < self.committed.nonce(k[0])]:
            del self.pending[key]
