"""Throughput and latency metrics computed from a run transcript."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..netsim.cluster import RunTranscript

COUNTERS = (
    "eager_validations",
    "lazy_validations",
    "signature_checks",
    "tx_gossip_sent",
    "receipt_cache_hits",
    "receipt_cache_misses",
    "body_cache_hits",
    "body_cache_misses",
    "kv_reads",
    "kv_writes",
    "bytes_flushed",
)


def per_second(times: Sequence[float], counts: Sequence[int], horizon: Optional[float] = None) -> list[int]:
    """Bucket event counts into whole seconds starting at t=0."""
    last = max(times, default=0.0)
    if horizon is not None:
        last = max(last, horizon)
    series = [0] * (int(math.floor(last)) + 1)
    for t, c in zip(times, counts):
        series[int(math.floor(t))] += c
    return series


def smooth(series: Sequence[float], window: int = 3) -> list[float]:
    """Centred moving average; the window is truncated at both ends."""
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd number")
    half = window // 2
    out = []
    for t in range(len(series)):
        lo, hi = max(0, t - half), min(len(series), t + half + 1)
        out.append(sum(series[lo:hi]) / (hi - lo))
    return out


@dataclass
class MetricsReport:
    submitted: int
    committed: int
    rejected: int
    unconfirmed: int
    latencies: list[float]
    throughput: list[int]
    smoothed: list[float]
    counters: dict
    confirm_kv_reads: int = 0
    confirm_path_mean: Optional[float] = None  # mean seconds spent in confirming polls
    max_buffered_bytes: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def mean_latency(self) -> Optional[float]:
        return sum(self.latencies) / len(self.latencies) if self.latencies else None

    @property
    def peak_throughput(self) -> float:
        return max(self.smoothed, default=0.0)

    @property
    def mean_throughput(self) -> float:
        return sum(self.throughput) / len(self.throughput) if self.throughput else 0.0

    def cdf(self) -> list[tuple[float, float]]:
        """(latency, fraction of *all submitted* txs confirmed within it)."""
        if not self.submitted:
            return []
        return [(lat, (i + 1) / self.submitted) for i, lat in enumerate(sorted(self.latencies))]

    def summary(self) -> str:
        mean = self.mean_latency
        lines = [
            f"submitted    {self.submitted}",
            f"committed    {self.committed}",
            f"rejected     {self.rejected}",
            f"unconfirmed  {self.unconfirmed}",
            f"mean latency {'n/a' if mean is None else f'{mean:.4f} s'}",
            f"peak tps     {self.peak_throughput:.1f} (3 s window)",
            f"mean tps     {self.mean_throughput:.1f}",
            f"confirm-path KV reads {self.confirm_kv_reads}",
        ]
        if self.confirm_path_mean is not None:
            lines.append(f"confirm-path mean {self.confirm_path_mean * 1e6:.1f} us")
        lines += [f"{k:<22} {v}" for k, v in sorted(self.counters.items())]
        return "\n".join(lines)


def measure(tr: RunTranscript, reference: Optional[int] = None) -> MetricsReport:
    """Latency from the sending client's view; throughput from one correct node's commits."""
    ref = tr.correct[0] if reference is None else reference
    records = tr.records
    confirmed = [r for r in records if r.confirm_time is not None]
    rejected = [r for r in records if r.confirm_time is None and r.rejected]
    events = tr.commits[ref]
    raw = per_second([e.time for e in events], [e.tx_count for e in events])
    counters = {k: tr.counter_total(k, tr.correct) for k in COUNTERS}
    # poll wall time is host noise under the virtual clock; keep event-mode output reproducible
    walls = []
    if tr.config.mode == "wallclock":
        walls = [r.confirm_wall for r in confirmed if r.confirm_wall is not None]
    return MetricsReport(
        submitted=len(records),
        committed=len(confirmed),
        rejected=len(rejected),
        unconfirmed=len(records) - len(confirmed) - len(rejected),
        latencies=[r.latency for r in confirmed],
        throughput=raw,
        smoothed=smooth(raw),
        counters=counters,
        confirm_kv_reads=sum(r.confirm_kv_reads or 0 for r in confirmed),
        confirm_path_mean=sum(walls) / len(walls) if walls else None,
        max_buffered_bytes=max(tr.metrics[i]["max_buffered_bytes"] for i in tr.correct),
    )
