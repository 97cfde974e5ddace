"""A/B runs: flip one optimisation at a time on the same seed and workload."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from ..core import HashAlgo
from ..netsim.cluster import Cluster, ClusterConfig
from ..storage import FifoCache, KeyMode
from .report import MetricsReport, measure
from .workload import Generated

# toggle -> (field, optimised value, baseline value)
TOGGLES = {
    "caches": ("caches_on", True, False),
    "perSubBlock": ("per_sub_block", True, False),
    "hashAlgo": ("hash_algo", HashAlgo.BLAKE3, HashAlgo.KECCAK256),
    "eagerOnce": ("eager_once", True, False),
    "keyMode": ("key_mode", KeyMode.SRBB_NUMBER, KeyMode.ETH_RLP),
}


@dataclass
class RunResult:
    report: MetricsReport
    state_roots: dict
    body_scan_reads: int
    eager_total: int
    completed: bool


@dataclass
class ABRow:
    toggle: str
    on: RunResult
    off: RunResult
    direction_ok: Optional[bool]  # None: reported only, no direction asserted
    detail: str = ""
    deltas: dict = field(default_factory=dict)


def body_scan_reads(node) -> int:
    """KV reads needed to fetch every body once with a cold body cache."""
    chain = node.chain
    chain.body_cache = FifoCache(chain.body_cache.capacity)
    before = chain.kv.reads
    for number in range(1, chain.height + 1):
        chain.get_body(number)
    return chain.kv.reads - before


def run_once(config: ClusterConfig, gen: Generated) -> RunResult:
    cluster = Cluster(config, gen.genesis, gen.submissions, gen.contracts)
    tr = cluster.run()
    ref = cluster.nodes[cluster.correct[0]]
    return RunResult(
        report=measure(tr),
        state_roots={i: tr.state_roots[i] for i in tr.correct},
        body_scan_reads=body_scan_reads(ref),
        eager_total=tr.counter_total("eager_validations"),
        completed=tr.completed,
    )


def with_toggle(config: ClusterConfig, name: str, on: bool) -> ClusterConfig:
    fld, opt, base = TOGGLES[name]
    return replace(config, node=replace(config.node, **{fld: opt if on else base}))


def _judge(name: str, on: RunResult, off: RunResult, k: int, n: int) -> tuple[Optional[bool], str]:
    if name == "caches":
        ok = on.report.confirm_kv_reads < off.report.confirm_kv_reads
        return ok, f"confirm-path KV reads {on.report.confirm_kv_reads} vs {off.report.confirm_kv_reads}"
    if name == "perSubBlock":
        same = on.state_roots == off.state_roots
        ok = same and on.report.max_buffered_bytes <= off.report.max_buffered_bytes
        return ok, (f"roots equal={same}, peak buffered "
                    f"{on.report.max_buffered_bytes} vs {off.report.max_buffered_bytes} bytes")
    if name == "eagerOnce":
        ok = on.eager_total == k and off.eager_total == n * k
        return ok, f"eager validations {on.eager_total} vs {off.eager_total}"
    if name == "keyMode":
        ok = on.body_scan_reads < off.body_scan_reads
        return ok, f"cold body-scan KV reads {on.body_scan_reads} vs {off.body_scan_reads}"
    return None, "cluster-level throughput reported only; see the hashing micro-benchmark"


def ab_sweep(base: ClusterConfig, gen: Generated, toggles: Sequence[str] = tuple(TOGGLES),
             mode: str = "wallclock") -> list[ABRow]:
    rows = []
    cfg = replace(base, mode=mode)
    for name in toggles:
        if name not in TOGGLES:
            raise ValueError(f"unknown toggle {name!r}; choose from {sorted(TOGGLES)}")
        on = run_once(with_toggle(cfg, name, True), gen)
        off = run_once(with_toggle(cfg, name, False), gen)
        ok, detail = _judge(name, on, off, len(gen.submissions), cfg.n)
        deltas = {}
        if off.report.mean_throughput:
            deltas["throughput_pct"] = 100.0 * (on.report.mean_throughput / off.report.mean_throughput - 1)
        if on.report.mean_latency and off.report.mean_latency:
            deltas["latency_pct"] = 100.0 * (on.report.mean_latency / off.report.mean_latency - 1)
        rows.append(ABRow(name, on, off, ok, detail, deltas))
    return rows


def format_table(rows: Sequence[ABRow]) -> str:
    out = [f"{'toggle':<12} {'direction':<9} {'tps on':>8} {'tps off':>8} {'lat on':>8} {'lat off':>8}  detail"]
    for r in rows:
        d = {True: "ok", False: "WRONG", None: "-"}[r.direction_ok]
        lat_on = r.on.report.mean_latency or 0.0
        lat_off = r.off.report.mean_latency or 0.0
        out.append(f"{r.toggle:<12} {d:<9} {r.on.report.mean_throughput:8.1f} "
                   f"{r.off.report.mean_throughput:8.1f} {lat_on:8.3f} {lat_off:8.3f}  {r.detail}")
    return "\n".join(out)
