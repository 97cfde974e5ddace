"""Analytical model of the eager-validation reduction, and a harness that measures its input.

With eager-once, each of n nodes eagerly validates only k/n of the k
transactions, so a node's time drops from beta + delta to beta + delta/n,
where delta is the time one node spends eagerly validating all k and beta is
everything else. The relative improvement is

    S(n) = (delta - delta/n) / (beta + delta/n),   with   S(inf) = delta / beta.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Sequence

from ..core import MAX_TX_SIZE, U128_MAX, Transaction, canonical_encode, intrinsic_gas, verify_signature
from ..txmgr import DEFAULT_BLOCK_GAS_LIMIT, StateView


@dataclass(frozen=True)
class ValidationModel:
    delta: float  # seconds spent eagerly validating k txs at one node
    total: float  # end-to-end time without the optimisation
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0 <= self.delta < self.total:
            raise ValueError("need 0 <= delta < total")

    @property
    def beta(self) -> float:
        return self.total - self.delta

    @property
    def reduced_total(self) -> float:
        return self.beta + self.delta / self.n

    @property
    def speedup(self) -> float:
        """S(n) in percent."""
        return 100.0 * (self.delta - self.delta / self.n) / self.reduced_total

    @property
    def limit(self) -> float:
        """S as n grows without bound, in percent."""
        return 100.0 * self.delta / self.beta


def validation_model_eval(delta: float, total: float, n: int) -> dict:
    m = ValidationModel(delta, total, n)
    return {"S": m.speedup, "S_inf": m.limit, "beta": m.beta, "reduced_total": m.reduced_total}


@dataclass(frozen=True)
class DeltaBreakdown:
    """Seconds spent in each part of eager validation over a batch of txs."""

    count: int
    encode_and_size: float
    value_and_gas: float
    signature: float
    state_lookup: float

    @property
    def total(self) -> float:
        return self.encode_and_size + self.value_and_gas + self.signature + self.state_lookup

    def shares(self) -> dict:
        t = self.total or 1.0
        return {
            "encode_and_size": self.encode_and_size / t,
            "value_and_gas": self.value_and_gas / t,
            "signature": self.signature / t,
            "state_lookup": self.state_lookup / t,
        }


def measure_delta(txs: Sequence[Transaction], view: StateView,
                  block_gas_limit: int = DEFAULT_BLOCK_GAS_LIMIT) -> DeltaBreakdown:
    """Time each eager check separately so that the model input is transparent.

    Encodings are measured on fresh copies so memoisation does not hide the cost.
    """
    fresh = [replace(tx) for tx in txs]
    t0 = time.perf_counter()
    for tx in fresh:
        _ = len(canonical_encode(tx)) <= MAX_TX_SIZE
    t1 = time.perf_counter()
    for tx in txs:
        _ = (0 <= tx.value <= U128_MAX and tx.gas_limit <= block_gas_limit
             and tx.gas_limit >= intrinsic_gas(tx))
    t2 = time.perf_counter()
    for tx in txs:
        verify_signature(tx)
    t3 = time.perf_counter()
    for tx in txs:
        _ = view.nonce(tx.sender) == tx.nonce and view.balance(tx.sender) >= tx.max_cost
    t4 = time.perf_counter()
    return DeltaBreakdown(len(txs), t1 - t0, t2 - t1, t3 - t2, t4 - t3)
