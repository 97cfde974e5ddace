"""Flip each optimisation on/off on one seed and workload and print the comparison.

    python scripts/ab_sweep.py --txs 3000 --mode wallclock --out sweep.csv
"""
import argparse
import csv

from sbchain.bench.sweep import TOGGLES, ab_sweep, format_table
from sbchain.bench.workload import Workload, generate
from sbchain.netsim import ClusterConfig, NodeConfig


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--txs", type=int, default=3000)
    p.add_argument("--rate", type=float, default=1000.0)
    p.add_argument("--accounts", type=int, default=256)
    p.add_argument("--workload", default="uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("event", "wallclock"), default="wallclock")
    p.add_argument("--kv-read-us", type=float, default=50.0)
    p.add_argument("--toggles", nargs="*", default=list(TOGGLES))
    p.add_argument("--out", default=None, help="optional CSV with one row per toggle")
    args = p.parse_args()

    gen = generate(Workload.parse(args.workload, tx_count=args.txs, send_rate=args.rate,
                                  accounts=args.accounts), args.seed)
    kv_us = args.kv_read_us if args.mode == "wallclock" else 0.0
    base = ClusterConfig(n=4, seed=args.seed, budget=600.0, node=NodeConfig(kv_read_latency_us=kv_us))
    rows = ab_sweep(base, gen, args.toggles, mode=args.mode)
    print(format_table(rows))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["toggle", "direction_ok", "tps_on", "tps_off", "lat_on", "lat_off",
                        "throughput_pct", "latency_pct", "detail"])
            for r in rows:
                w.writerow([r.toggle, r.direction_ok, r.on.report.mean_throughput,
                            r.off.report.mean_throughput, r.on.report.mean_latency,
                            r.off.report.mean_latency, r.deltas.get("throughput_pct"),
                            r.deltas.get("latency_pct"), r.detail])


if __name__ == "__main__":
    main()
