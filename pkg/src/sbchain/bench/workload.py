"""Deterministic transaction streams: uniform payments, hot-key contention, trace replay."""
from __future__ import annotations

import enum
import json
import math
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..core import (
    GAS_PAYMENT,
    HashAlgo,
    KeyPair,
    Transaction,
    contract_address,
    encode_ops,
    intrinsic_gas,
    sign,
)
from ..netsim.cluster import Submission

INITIAL_BALANCE = 10**18


class WorkloadKind(enum.Enum):
    UNIFORM_PAY = "uniform"
    HOT_KEYS = "hot"
    TRACE_REPLAY = "trace"


class TraceError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"trace line {line}: {msg}")
        self.line = line


@dataclass(frozen=True)
class TraceEntry:
    offset: float
    symbol: str
    op: str


@dataclass(frozen=True)
class Workload:
    kind: WorkloadKind = WorkloadKind.UNIFORM_PAY
    tx_count: int = 1000
    send_rate: float = 1000.0  # tx per second; ignored for trace replay
    accounts: int = 16
    hot_fraction: float = 0.8
    hot_keys: int = 4
    trace_path: Optional[str] = None
    gas_price: int = 1

    @classmethod
    def parse(cls, spec: str, **kw) -> "Workload":
        """CLI form: ``uniform``, ``hot`` or ``trace:FILE``."""
        if spec.startswith("trace:"):
            return cls(WorkloadKind.TRACE_REPLAY, trace_path=spec[len("trace:"):], **kw)
        return cls(WorkloadKind(spec), **kw)


@dataclass
class Generated:
    genesis: dict
    contracts: tuple
    keys: list
    submissions: list[Submission] = field(default_factory=list)

    @property
    def txs(self) -> list[Transaction]:
        return [s.tx for s in self.submissions]


def read_trace(path: str) -> list[TraceEntry]:
    out: list[TraceEntry] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                entry = TraceEntry(float(rec["offset"]), str(rec["symbol"]), str(rec["op"]))
            except (ValueError, KeyError, TypeError) as e:
                raise TraceError(lineno, f"malformed record ({e})") from None
            if entry.offset < 0 or not math.isfinite(entry.offset):
                raise TraceError(lineno, "offset must be a finite non-negative number")
            if out and entry.offset < out[-1].offset:
                raise TraceError(lineno, "offsets must be non-decreasing")
            out.append(entry)
    return out


def write_trace(path: str, entries: Sequence[TraceEntry]):
    with open(path, "w") as fh:
        for e in entries:
            fh.write(json.dumps({"offset": e.offset, "symbol": e.symbol, "op": e.op}) + "\n")


def synthetic_trace(symbols: Sequence[str], duration: float, peak_rate: float,
                    base_rate: float, decay: float, seed: int = 0) -> list[TraceEntry]:
    """Opening-burst arrivals: rate(t) = base + (peak - base) * exp(-t / decay).

    Arrivals come from a thinned Poisson process, so the burst is random but
    reproducible for a seed.
    """
    rng = random.Random(seed)
    out = []
    t = 0.0
    while True:
        t += rng.expovariate(peak_rate)
        if t >= duration:
            return out
        rate = base_rate + (peak_rate - base_rate) * math.exp(-t / decay)
        if rng.random() * peak_rate <= rate:
            out.append(TraceEntry(round(t, 6), rng.choice(list(symbols)),
                                  rng.choice(("buy", "sell"))))


def _keys(count: int, seed: int) -> list[KeyPair]:
    return [KeyPair.from_seed(b"account/%d/%d" % (seed, i)) for i in range(count)]


def symbol_slot(symbol: str) -> bytes:
    return HashAlgo.KECCAK256.digest(b"symbol:" + symbol.encode())


def _payment(rng, key, nonce, recipients, gas_price) -> Transaction:
    tx = Transaction(key.address, rng.choice(recipients), nonce, rng.randint(1, 1000),
                     GAS_PAYMENT, gas_price)
    return sign(tx, key)


def _op(key, nonce, contract, writes, gas_price) -> Transaction:
    payload = encode_ops(writes)
    draft = Transaction(key.address, contract, nonce, 0, 1, gas_price, payload)
    return sign(Transaction(key.address, contract, nonce, 0, intrinsic_gas(draft), gas_price,
                            payload), key)


def generate(workload: Workload, seed: int = 0) -> Generated:
    rng = random.Random(seed)
    keys = _keys(workload.accounts, seed)
    if len(keys) < 2:
        raise ValueError("need at least two accounts")
    genesis = {k.address: INITIAL_BALANCE for k in keys}
    addresses = [k.address for k in keys]
    contract = contract_address(b"\x00" * 20, seed)
    nonces = [0] * len(keys)
    subs: list[Submission] = []

    if workload.kind is WorkloadKind.TRACE_REPLAY:
        if workload.trace_path is None:
            raise ValueError("trace replay needs a trace file")
        entries = read_trace(workload.trace_path)
        for i, e in enumerate(entries):
            s = i % len(keys)
            key, nonce = keys[s], nonces[s]
            value = HashAlgo.KECCAK256.digest(f"{e.op}:{i}".encode())
            subs.append(Submission(e.offset, _op(key, nonce, contract, [(symbol_slot(e.symbol), value)],
                                                 workload.gas_price)))
            nonces[s] += 1
        return Generated(genesis, (contract,), keys, subs)

    hot_slots = [HashAlgo.KECCAK256.digest(b"hot:%d" % j) for j in range(workload.hot_keys)]
    for i in range(workload.tx_count):
        s = rng.randrange(len(keys))
        key, nonce = keys[s], nonces[s]
        offset = i / workload.send_rate
        if workload.kind is WorkloadKind.HOT_KEYS and rng.random() < workload.hot_fraction:
            slot = rng.choice(hot_slots)
            tx = _op(key, nonce, contract, [(slot, rng.randbytes(32))], workload.gas_price)
        else:
            others = addresses[:s] + addresses[s + 1:]
            tx = _payment(rng, key, nonce, others, workload.gas_price)
        subs.append(Submission(offset, tx))
        nonces[s] += 1
    contracts = (contract,) if workload.kind is WorkloadKind.HOT_KEYS else ()
    return Generated(genesis, contracts, keys, subs)
