"""Command-line benchmark: one cluster run, written out as CSV/JSON/text."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from typing import Optional, Sequence

from ..core import HashAlgo
from ..netsim.byzantine import Strategy
from ..netsim.cluster import ClusterConfig, assert_blockchain_problem, run
from ..netsim.node import NodeConfig
from ..storage import KeyMode
from .report import measure
from .workload import Workload, generate


def _onoff(v: str) -> bool:
    if v not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return v == "on"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sbchain-bench", description=__doc__)
    p.add_argument("--nodes", type=int, default=4)
    p.add_argument("--byzantine", type=int, default=0)
    p.add_argument("--strategy", type=Strategy.parse, default=Strategy.SILENT,
                   help="silent | equivocate-rb | invalid-tx | conflicting-bin")
    p.add_argument("--workload", default="uniform", help="uniform | hot | trace:FILE")
    p.add_argument("--txs", type=int, default=1000)
    p.add_argument("--rate", type=float, default=1000.0, help="tx/s")
    p.add_argument("--accounts", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--caches", type=_onoff, default=True)
    p.add_argument("--subblock", type=_onoff, default=True)
    p.add_argument("--hash", choices=("keccak", "blake3"), default="keccak")
    p.add_argument("--keymode", choices=("number", "rlp"), default="number")
    p.add_argument("--eager", choices=("once", "all"), default="once")
    p.add_argument("--mode", choices=("event", "wallclock"), default="event")
    p.add_argument("--targets", type=int, default=1, help="nodes each client sends to")
    p.add_argument("--kv-read-us", type=float, default=None,
                   help="simulated KV read latency (default: 0 in event mode, 50 in wallclock)")
    p.add_argument("--budget", type=float, default=300.0)
    p.add_argument("--out", default="bench-out")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> ClusterConfig:
    kv_us = args.kv_read_us
    if kv_us is None:
        kv_us = 50.0 if args.mode == "wallclock" else 0.0
    node = NodeConfig(
        hash_algo=HashAlgo.parse(args.hash),
        caches_on=args.caches,
        per_sub_block=args.subblock,
        key_mode=KeyMode(args.keymode),
        eager_once=args.eager == "once",
        kv_read_latency_us=kv_us,
    )
    return ClusterConfig(n=args.nodes, f=args.byzantine, seed=args.seed, strategy=args.strategy,
                         client_targets=args.targets, node=node, budget=args.budget,
                         mode=args.mode)


def write_outputs(out: str, tr, report, check) -> None:
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "metrics.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["second", "committed", "smoothed_3s"])
        for t, (raw, sm) in enumerate(zip(report.throughput, report.smoothed)):
            w.writerow([t, raw, f"{sm:.6f}"])
    with open(os.path.join(out, "latency.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tx_hash", "sender", "nonce", "send_time", "confirm_time", "latency", "status",
                    "confirm_kv_reads"])
        for r in tr.records:
            w.writerow([r.hash.hex(), r.sender.hex(), r.nonce, r.send_time, r.confirm_time,
                        r.latency, r.status, r.confirm_kv_reads])
    counters = {
        "per_node": {str(i): c for i, c in tr.metrics.items()},
        "correct_total": report.counters,
        "messages": tr.messages,
    }
    with open(os.path.join(out, "counters.json"), "w") as fh:
        json.dump(counters, fh, indent=2, sort_keys=True)
    with open(os.path.join(out, "summary.txt"), "w") as fh:
        fh.write(report.summary() + "\n")
        fh.write(check.summary() + "\n")
    tr.write_jsonl(os.path.join(out, "events.jsonl"))


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    cfg = config_from_args(args)
    wl = Workload.parse(args.workload, tx_count=args.txs, send_rate=args.rate,
                        accounts=args.accounts)
    gen = generate(wl, args.seed)
    tr = run(cfg, gen.genesis, gen.submissions, gen.contracts)
    report = measure(tr)
    check = assert_blockchain_problem(tr)
    write_outputs(args.out, tr, report, check)
    print(report.summary())
    print(check.summary())
    return 0 if check.ok else 1


if __name__ == "__main__":
    sys.exit(main())
