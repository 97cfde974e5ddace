"""Measure the eager-validation share of a run and feed it to the reduction model.

delta is the time one node spends eagerly validating all k transactions
(broken down by check); total is the wall-clock time for a gossip-mode cluster
(every node validates every tx) to commit them.
"""
import argparse
import time

from sbchain.bench.model import ValidationModel, measure_delta
from sbchain.bench.workload import Workload, generate
from sbchain.netsim import ClusterConfig, NodeConfig, run
from sbchain.state import WorldState


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--txs", type=int, default=2000)
    p.add_argument("--rate", type=float, default=2000.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nodes", type=int, nargs="*", default=[1, 2, 4, 8, 16, 64, 200])
    args = p.parse_args()

    print("worked example  delta=4.27 s total=17.87 s")
    for n in (4, 10**9):
        m = ValidationModel(4.27, 17.87, n)
        print(f"  n={n:<10} S={m.speedup:6.2f}%   limit={m.limit:6.2f}%")

    gen = generate(Workload.parse("uniform", tx_count=args.txs, send_rate=args.rate,
                                  accounts=256), args.seed)
    view = WorldState.from_genesis(gen.genesis)
    d = measure_delta(gen.txs, view)
    print(f"\ndelta over {d.count} txs: {d.total:.4f} s")
    for part, share in d.shares().items():
        print(f"  {part:<16} {share * 100:5.1f}%")

    cfg = ClusterConfig(n=4, seed=args.seed, mode="wallclock", budget=600.0,
                        node=NodeConfig(eager_once=False))
    t0 = time.perf_counter()
    tr = run(cfg, gen.genesis, gen.submissions, gen.contracts)
    total = time.perf_counter() - t0
    print(f"\ngossip-mode wall time for {args.txs} txs: {total:.2f} s (completed={tr.completed})")
    for n in args.nodes:
        m = ValidationModel(d.total, total, n)
        print(f"  n={n:<4} S={m.speedup:6.2f}%")
    print(f"  limit {ValidationModel(d.total, total, 1).limit:.2f}%")


if __name__ == "__main__":
    main()
