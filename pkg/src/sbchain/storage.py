"""Key-value store, chain store and the write-time block body / receipt caches.

Key layout::

    h + number            header
    b + number            body            (KeyMode.SRBB_NUMBER)
    H + number -> hash    canonical hash  (KeyMode.ETH_RLP)
    rlp([b, number, hash]) body           (KeyMode.ETH_RLP)
    r + txHash            receipt
    <32-byte digest>      trie node
"""
from __future__ import annotations

import enum
import logging
import os
import struct
import threading
import time
from collections import OrderedDict
from dataclasses import replace
from typing import Hashable, Iterable, Optional

from .core import (
    Block,
    HashAlgo,
    Reader,
    Receipt,
    Transaction,
    block_hash,
    decode_body,
    decode_receipt,
    encode_body,
    encode_header,
    encode_receipt,
)
from .metrics import NodeMetrics

log = logging.getLogger(__name__)


class KVError(IOError):
    pass


class KVStore:
    """In-memory map with optional append-only file log and simulated latency."""

    def __init__(
        self,
        path: Optional[str] = None,
        read_latency_us: float = 0.0,
        write_latency_us: float = 0.0,
        metrics: Optional[NodeMetrics] = None,
    ):
        self.path = path
        self.read_latency_us = read_latency_us
        self.write_latency_us = write_latency_us
        self.metrics = metrics
        self.reads = 0
        self.writes = 0
        self.bytes_read = 0
        self.bytes_written = 0
        self._lock = threading.RLock()
        self._mem: dict[bytes, bytes] = {}
        self._index: dict[bytes, tuple[int, int]] = {}
        self._fh = None
        if path is not None:
            self._open_log(path)

    # file log: records are  u32 klen | u32 vlen | key | value
    def _open_log(self, path: str):
        self._fh = open(path, "a+b")
        self._fh.seek(0)
        data = self._fh.read()
        pos = 0
        while pos + 8 <= len(data):
            klen, vlen = struct.unpack_from(">II", data, pos)
            end = pos + 8 + klen + vlen
            if end > len(data):
                log.warning("ignoring torn record at offset %d in %s", pos, path)
                break
            key = data[pos + 8:pos + 8 + klen]
            self._index[key] = (pos + 8 + klen, vlen)
            pos = end
        self._fh.seek(0, os.SEEK_END)

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    @staticmethod
    def _delay(us: float):
        if us > 0:
            time.sleep(us / 1e6)

    def get(self, key: bytes) -> Optional[bytes]:
        self._delay(self.read_latency_us)
        with self._lock:
            self.reads += 1
            value = self.peek(key)
            if value is not None:
                self.bytes_read += len(value)
        if self.metrics is not None:
            self.metrics.incr("kv_reads")
        return value

    def peek(self, key: bytes) -> Optional[bytes]:
        """Read without latency or counters."""
        with self._lock:
            if self._fh is None:
                return self._mem.get(key)
            loc = self._index.get(key)
            if loc is None:
                return None
            self._fh.flush()
            with open(self.path, "rb") as fh:
                fh.seek(loc[0])
                return fh.read(loc[1])

    def __contains__(self, key: bytes) -> bool:
        with self._lock:
            return key in (self._mem if self._fh is None else self._index)

    def put(self, key: bytes, value: bytes):
        self.write_batch([(key, value)])

    def write_batch(self, items: Iterable[tuple[bytes, bytes]]):
        """Apply all writes or none; readers never observe a partial batch."""
        items = list(items)
        self._delay(self.write_latency_us * len(items))
        with self._lock:
            if self._fh is None:
                self._mem.update(items)
            else:
                base = self._fh.tell()
                buf = bytearray()
                locs = []
                for k, v in items:
                    buf += struct.pack(">II", len(k), len(v)) + k
                    locs.append((k, base + len(buf), len(v)))
                    buf += v
                self._fh.write(bytes(buf))
                self._fh.flush()
                for k, off, n in locs:
                    self._index[k] = (off, n)
            self.writes += len(items)
            self.bytes_written += sum(len(v) for _, v in items)
        if self.metrics is not None:
            self.metrics.incr("kv_writes", len(items))


class FifoCache:
    """Bounded map with FIFO eviction and hit/miss counters."""

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ValueError("capacity must be non-negative")
        self.capacity = capacity
        self.hits = 0
        self.misses = 0
        self._data: OrderedDict = OrderedDict()
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._data)

    def __contains__(self, key):
        return key in self._data

    def get(self, key: Hashable):
        with self._lock:
            if key in self._data:
                self.hits += 1
                return self._data[key]
            self.misses += 1
            return None

    def peek(self, key: Hashable):
        return self._data.get(key)

    def put(self, key: Hashable, value) -> bool:
        """Insert; returns False if the key was already present (value replaced)."""
        if self.capacity == 0:
            return False
        with self._lock:
            fresh = key not in self._data
            self._data[key] = value
            while len(self._data) > self.capacity:
                self._data.popitem(last=False)
            return fresh

    def pop(self, key: Hashable):
        with self._lock:
            return self._data.pop(key, None)


class KeyMode(enum.Enum):
    SRBB_NUMBER = "number"
    ETH_RLP = "rlp"


def _rlp(item) -> bytes:
    if isinstance(item, bytes):
        if len(item) == 1 and item[0] < 0x80:
            return item
        return _rlp_len(len(item), 0x80) + item
    body = b"".join(_rlp(x) for x in item)
    return _rlp_len(len(body), 0xC0) + body


def _rlp_len(n: int, offset: int) -> bytes:
    if n < 56:
        return bytes([offset + n])
    b = n.to_bytes((n.bit_length() + 7) // 8, "big")
    return bytes([offset + 55 + len(b)]) + b


def _num(n: int) -> bytes:
    return n.to_bytes(8, "big")


def header_key(number: int) -> bytes:
    return b"h" + _num(number)


def canonical_hash_key(number: int) -> bytes:
    return b"H" + _num(number)


def body_key(mode: KeyMode, number: int, bhash: Optional[bytes] = None) -> bytes:
    if mode is KeyMode.SRBB_NUMBER:
        return b"b" + _num(number)
    if bhash is None:
        raise ValueError("ETH_RLP body keys need the block hash")
    number_bytes = number.to_bytes((number.bit_length() + 7) // 8, "big")
    return _rlp([b"b", number_bytes, bhash])


def receipt_key(txhash: bytes) -> bytes:
    return b"r" + txhash


class ChainStore:
    """Persists executed blocks and serves confirmation reads.

    With ``caches_on`` bodies and receipts enter their caches before the KV
    write. Either way, reads that miss fill the cache from the KV (read-through),
    which is the only caching a baseline store does.
    """

    def __init__(
        self,
        kv: Optional[KVStore] = None,
        key_mode: KeyMode = KeyMode.SRBB_NUMBER,
        caches_on: bool = True,
        body_capacity: int = 1024,
        receipt_capacity: int = 8192,
        algo: HashAlgo = HashAlgo.KECCAK256,
        metrics: Optional[NodeMetrics] = None,
    ):
        self.metrics = metrics if metrics is not None else NodeMetrics()
        self.kv = kv if kv is not None else KVStore(metrics=self.metrics)
        self.key_mode = key_mode
        self.caches_on = caches_on
        self.algo = algo
        self.body_cache = FifoCache(body_capacity)
        self.receipt_cache = FifoCache(receipt_capacity)
        self.hashes: list[bytes] = []
        self.headers: list[Block] = []
        self._lock = threading.Lock()

    @property
    def height(self) -> int:
        return len(self.hashes)

    def persist_block(self, block: Block, receipts: list[Receipt]):
        if block.number != self.height + 1:
            raise ValueError(f"block {block.number} does not extend height {self.height}")
        bhash = block_hash(block, self.algo)
        body_bytes = encode_body(block.transactions)
        inserted: list[tuple[FifoCache, Hashable]] = []
        if self.caches_on:
            if self.body_cache.put(block.number, block.transactions):
                inserted.append((self.body_cache, block.number))
            for r in receipts:
                if self.receipt_cache.put(r.tx_hash, r):
                    inserted.append((self.receipt_cache, r.tx_hash))
        items = [
            (header_key(block.number), encode_header(block)),
            (body_key(self.key_mode, block.number, bhash), body_bytes),
        ]
        if self.key_mode is KeyMode.ETH_RLP:
            items.append((canonical_hash_key(block.number), bhash))
        items.extend((receipt_key(r.tx_hash), encode_receipt(r)) for r in receipts)
        try:
            self.kv.write_batch(items)
        except Exception:
            for cache, key in inserted:
                cache.pop(key)
            raise
        with self._lock:
            self.hashes.append(bhash)
            self.headers.append(replace(block, transactions=()))

    def block_hash_at(self, number: int) -> Optional[bytes]:
        if 1 <= number <= len(self.hashes):
            return self.hashes[number - 1]
        return None

    def get_body(self, number: int) -> Optional[tuple[Transaction, ...]]:
        cached = self.body_cache.get(number)
        if cached is not None:
            self.metrics.incr("body_cache_hits")
            return cached
        self.metrics.incr("body_cache_misses")
        if self.key_mode is KeyMode.ETH_RLP:
            bhash = self.kv.get(canonical_hash_key(number))
            if bhash is None:
                return None
            key = body_key(self.key_mode, number, bhash)
        else:
            key = body_key(self.key_mode, number)
        raw = self.kv.get(key)
        if raw is None:
            return None
        body = decode_body(raw)
        self.body_cache.put(number, body)
        return body

    def get_receipt(self, txhash: bytes) -> Optional[Receipt]:
        return self.get_receipt_traced(txhash)[0]

    def get_receipt_traced(self, txhash: bytes) -> tuple[Optional[Receipt], int]:
        """Receipt lookup that also reports how many KV reads it cost."""
        cached = self.receipt_cache.get(txhash)
        if cached is not None:
            self.metrics.incr("receipt_cache_hits")
            return cached, 0
        self.metrics.incr("receipt_cache_misses")
        raw = self.kv.get(receipt_key(txhash))
        if raw is None:
            return None, 1
        receipt = decode_receipt(raw)
        self.receipt_cache.put(txhash, receipt)
        return receipt, 1

    def raw_body(self, number: int) -> Optional[bytes]:
        """KV copy of a body, bypassing caches and counters (coherence checks)."""
        if self.key_mode is KeyMode.ETH_RLP:
            bhash = self.kv.peek(canonical_hash_key(number))
            if bhash is None:
                return None
            return self.kv.peek(body_key(self.key_mode, number, bhash))
        return self.kv.peek(body_key(self.key_mode, number))


def header_fields(raw: bytes) -> dict:
    r = Reader(raw)
    keys = ("proposer_id", "number", "timestamp")
    out = {k: r.int() for k in keys}
    for k in ("parent_hash", "state_root", "tx_root", "receipt_root"):
        out[k] = r.raw()
    out["tx_count"] = r.int()
    return out
