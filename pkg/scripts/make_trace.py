"""Write a synthetic exchange trace (JSON lines) with a burst at market open."""
import argparse

from sbchain.bench.workload import synthetic_trace, write_trace


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("out")
    p.add_argument("--symbols", nargs="*", default=["AAPL", "MSFT", "AMZN", "GOOG", "TSLA"])
    p.add_argument("--duration", type=float, default=30.0, help="seconds")
    p.add_argument("--peak", type=float, default=2000.0, help="tx/s at t=0")
    p.add_argument("--base", type=float, default=100.0, help="tx/s long after open")
    p.add_argument("--decay", type=float, default=5.0, help="seconds")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    entries = synthetic_trace(args.symbols, args.duration, args.peak, args.base, args.decay, args.seed)
    write_trace(args.out, entries)
    print(f"{len(entries)} entries over {args.duration:g} s -> {args.out}")


if __name__ == "__main__":
    main()
