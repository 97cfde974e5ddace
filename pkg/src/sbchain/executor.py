"""Commit path: superblock -> lazy validation -> execution -> tries -> persistence."""
from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .core import (
    MAX_TX_SIZE,
    U128_MAX,
    Account,
    Block,
    DecodeError,
    HashAlgo,
    Receipt,
    Superblock,
    Transaction,
    block_hash,
    canonical_encode,
    contract_address,
    decode_ops,
    encode_block,
    encode_receipt,
    intrinsic_gas,
    tx_hash,
    verify_signature,
)
from .metrics import CommitEvent, NodeMetrics
from .state import WorldState
from .statetrie import build_block_tries
from .storage import ChainStore

log = logging.getLogger(__name__)


class TimestampRule(enum.Enum):
    NON_STRICT = "non-strict"  # equal consecutive timestamps allowed
    STRICT = "strict"  # geth behaviour: child must be strictly newer


class TimestampError(ValueError):
    """Raised under STRICT when a block is not newer than its parent."""


@dataclass(frozen=True)
class ExecConfig:
    per_sub_block: bool = True
    timestamp_rule: TimestampRule = TimestampRule.NON_STRICT


@dataclass
class ExecutionResult:
    block_number: int
    block_hash: bytes
    executed: list[bytes]
    dropped: list[tuple[bytes, str]]
    gas_used_total: int
    state_root: bytes
    tx_root: bytes
    receipt_root: bytes
    receipts: list[Receipt] = field(default_factory=list, repr=False)


def check_timestamp(ts: int, parent_ts: int, rule: TimestampRule, number: int):
    if rule is TimestampRule.STRICT and ts <= parent_ts:
        raise TimestampError(
            f"invalid timestamp for block {number}: header.Time {ts} <= parent.Time {parent_ts}"
        )
    if ts < parent_ts:
        raise TimestampError(
            f"invalid timestamp for block {number}: header.Time {ts} < parent.Time {parent_ts}"
        )


@dataclass(frozen=True)
class Numbering:
    number: int
    timestamp: int


class Executor:
    """Sequential commit loop of one node.

    ``eager_seen`` holds hashes this node itself eagerly validated; those skip
    the signature check at lazy validation, every other transaction is
    re-verified since its proposer may be byzantine.
    """

    def __init__(
        self,
        state: WorldState,
        chain: ChainStore,
        config: ExecConfig = ExecConfig(),
        metrics: Optional[NodeMetrics] = None,
        eager_seen: Optional[set] = None,
        clock: Callable[[], float] = time.monotonic,
        genesis_timestamp: int = 0,
    ):
        self.state = state
        self.chain = chain
        self.config = config
        self.metrics = metrics if metrics is not None else chain.metrics
        self.eager_seen = eager_seen if eager_seen is not None else set()
        self.clock = clock
        self.algo: HashAlgo = state.algo
        self.last_index = 0
        self.burned = 0
        self.parent_hash = b"\x00" * 32
        self.parent_timestamp = genesis_timestamp
        self.on_persist: list[Callable[[Block, list[Receipt]], None]] = []

    # -- validation and execution -----------------------------------------

    def lazy_validate(self, tx: Transaction, h: Optional[bytes] = None) -> bool:
        self.metrics.incr("lazy_validations")
        if tx.value < 0 or tx.value > U128_MAX:
            return False
        if tx.gas_limit < intrinsic_gas(tx) or len(canonical_encode(tx)) > MAX_TX_SIZE:
            return False
        acct = self.state.account(tx.sender)
        if tx.nonce != acct.nonce or acct.balance < tx.max_cost:
            return False
        h = h if h is not None else tx_hash(tx, self.algo).digest
        if h not in self.eager_seen:
            self.metrics.incr("signature_checks")
            if not verify_signature(tx):
                return False
        return True

    def execute_tx(self, tx: Transaction, cumulative_gas: int = 0,
                   h: Optional[bytes] = None) -> Receipt:
        """Apply a lazily-validated tx. Failures revert everything but nonce and fee."""
        st = self.state
        gas_used = intrinsic_gas(tx)
        fee = gas_used * tx.gas_price
        sender = st.account(tx.sender)
        st.set_account(tx.sender, Account(sender.nonce + 1, sender.balance - fee, sender.storage_root))
        self.burned += fee
        cp = st.checkpoint()
        created = None
        logs: list[bytes] = []
        status = True
        try:
            writes = decode_ops(tx.payload) if tx.payload else []
            target = tx.recipient
            if target is None:
                created = target = contract_address(tx.sender, tx.nonce)
            payer = st.account(tx.sender)
            if payer.balance < tx.value:
                raise ValueError("insufficient funds for value transfer")
            st.set_account(tx.sender, Account(payer.nonce, payer.balance - tx.value, payer.storage_root))
            dest = st.account(target)
            st.set_account(target, Account(dest.nonce, dest.balance + tx.value, dest.storage_root))
            for k, v in writes:
                st.set_storage(target, k, v)
                logs.append(k + v)
        except (ValueError, DecodeError) as e:
            log.debug("tx execution failed, reverting: %s", e)
            st.revert(cp)
            status, created, logs = False, None, []
        return Receipt(
            status=status,
            block_hash=b"",
            block_number=0,
            tx_hash=h if h is not None else tx_hash(tx, self.algo).digest,
            sender=tx.sender,
            recipient=tx.recipient,
            contract_address=created,
            cumulative_gas_used=cumulative_gas + gas_used,
            gas_used=gas_used,
            logs=tuple(logs),
        )

    # -- superblocks --------------------------------------------------------

    def assign_block_numbers(self, sb: Superblock) -> list[Numbering]:
        """Consecutive chain numbers and timestamps for each sub-block, in slot order.

        Timestamps never go backwards: a sub-block older than its parent takes
        the parent's timestamp, which is where equal consecutive timestamps come
        from. Parent hashes are linked during execution, once each state root is known.
        """
        out = []
        number, ts = self.chain.height, self.parent_timestamp
        for _, block in sb.sub_blocks:
            number += 1
            ts = max(block.timestamp, ts)
            out.append(Numbering(number, ts))
        return out

    def commit_superblock(self, sb: Superblock, config: Optional[ExecConfig] = None) -> list[ExecutionResult]:
        cfg = config or self.config
        if sb.consensus_index != self.last_index + 1:
            raise ValueError(f"superblock {sb.consensus_index} after {self.last_index}")
        rule = cfg.timestamp_rule
        numbering = self.assign_block_numbers(sb)
        parent_ts = self.parent_timestamp
        for nb in numbering:
            check_timestamp(nb.timestamp, parent_ts, rule, nb.number)
            parent_ts = nb.timestamp

        results: list[ExecutionResult] = []
        buffered: list[tuple[Block, list[Receipt]]] = []
        buffered_bytes = 0
        for (pid, block), nb in zip(sb.sub_blocks, numbering):
            sealed, receipts, result = self._process(block, nb)
            results.append(result)
            buffered.append((sealed, receipts))
            buffered_bytes += len(encode_block(sealed)) + sum(len(encode_receipt(r)) for r in receipts)
            if cfg.per_sub_block:
                self._persist(buffered, buffered_bytes)
                buffered, buffered_bytes = [], 0
        if buffered:
            self._persist(buffered, buffered_bytes)
        self.last_index = sb.consensus_index
        return results

    def _process(self, block: Block, nb: Numbering):
        valid: list[tuple[Transaction, bytes]] = []
        dropped: list[tuple[bytes, str]] = []
        receipts: list[Receipt] = []
        gas = 0
        for tx in block.transactions:
            h = tx_hash(tx, self.algo).digest
            if not self.lazy_validate(tx, h):
                dropped.append((h, "lazy-validation"))
                continue
            r = self.execute_tx(tx, gas, h)
            gas = r.cumulative_gas_used
            receipts.append(r)
            valid.append((tx, h))
        txs = [tx for tx, _ in valid]
        tx_root, receipt_root = build_block_tries(txs, receipts, self.algo)
        sealed = replace(
            block,
            transactions=tuple(txs),
            number=nb.number,
            timestamp=nb.timestamp,
            parent_hash=self.parent_hash,
            state_root=self.state.root(),
            tx_root=tx_root,
            receipt_root=receipt_root,
        )
        bhash = block_hash(sealed, self.algo)
        receipts = [replace(r, block_hash=bhash, block_number=nb.number) for r in receipts]
        self.parent_hash = bhash
        self.parent_timestamp = nb.timestamp
        result = ExecutionResult(
            nb.number, bhash, [h for _, h in valid], dropped, gas,
            sealed.state_root, tx_root, receipt_root, receipts,
        )
        return sealed, receipts, result

    def _persist(self, buffered, buffered_bytes: int):
        if buffered_bytes > self.metrics.max_buffered_bytes:
            self.metrics.max_buffered_bytes = buffered_bytes
        for block, receipts in buffered:
            self.chain.persist_block(block, receipts)
            self.metrics.commits.append(CommitEvent(block.number, len(block.transactions), self.clock()))
            for cb in self.on_persist:
                cb(block, receipts)
        flushed = self.state.flush_if_needed(self.chain.kv)
        if flushed:
            self.metrics.incr("bytes_flushed", flushed)
