"""Per-node counters and commit events."""
from __future__ import annotations

import threading
from dataclasses import dataclass, field, fields


@dataclass
class CommitEvent:
    block_number: int
    tx_count: int
    time: float


@dataclass
class NodeMetrics:
    eager_validations: int = 0
    lazy_validations: int = 0
    signature_checks: int = 0
    tx_gossip_sent: int = 0
    tx_gossip_received: int = 0
    body_cache_hits: int = 0
    body_cache_misses: int = 0
    receipt_cache_hits: int = 0
    receipt_cache_misses: int = 0
    kv_reads: int = 0
    kv_writes: int = 0
    bytes_flushed: int = 0
    max_buffered_bytes: int = 0
    commits: list[CommitEvent] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def incr(self, name: str, k: int = 1):
        with self._lock:
            setattr(self, name, getattr(self, name) + k)

    def counters(self) -> dict[str, int]:
        return {
            f.name: getattr(self, f.name)
            for f in fields(self)
            if f.type in ("int", int) and not f.name.startswith("_")
        }
