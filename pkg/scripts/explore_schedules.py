"""Byzantine stress: many seeded runs per strategy, then bounded exhaustive exploration."""
import argparse
import random
from collections import Counter

from sbchain.bench.workload import Workload, generate
from sbchain.netsim import ClusterConfig, Strategy, assert_blockchain_problem, explore, run


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--branching", type=int, default=2)
    args = p.parse_args()

    fails = Counter()
    for seed in range(args.runs):
        rng = random.Random(seed)
        strategy = list(Strategy)[seed % 4]
        gen = generate(Workload.parse("uniform", tx_count=rng.randint(4, 20), send_rate=500.0,
                                      accounts=rng.randint(2, 6)), seed)
        late = seed % 3 == 0
        cfg = ClusterConfig(n=4, f=1, seed=seed, strategy=strategy, client_targets=2,
                            byzantine_ids=(rng.randrange(4),),
                            gst=0.2 if late else 0.0, drop_rate=0.4 if late else 0.0)
        rep = assert_blockchain_problem(run(cfg, gen.genesis, gen.submissions, gen.contracts))
        if not rep.ok:
            fails[strategy.value] += 1
            print(f"seed {seed} ({strategy.value}):\n{rep.summary()}")
    print(f"{args.runs} seeded runs, failures by strategy: {dict(fails) or 'none'}")

    gen = generate(Workload.parse("uniform", tx_count=6, send_rate=1000.0, accounts=2), 0)
    for strategy in Strategy:
        cfg = ClusterConfig(n=4, f=1, strategy=strategy, client_targets=2, budget=30.0)
        res = explore(cfg, gen.genesis, gen.submissions, args.depth, args.branching,
                      contracts=gen.contracts)
        print(f"{strategy.value:<16} schedules={res.runs:<5} exhausted={res.exhausted} "
              f"violations={len(res.violations)}")


if __name__ == "__main__":
    main()
