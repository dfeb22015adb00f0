"""Event throughput of the simulator for each builtin model."""
import argparse
import math
import time

from blockmeasures.dynamics import simulate
from blockmeasures.model import builtin
from blockmeasures.state import Configuration

CASES = [
    ("asep", {}),
    ("k_exclusion", {"K": 3}),
    ("zrp_rate1", {"ell": -20, "r": 0}),
    ("independent_walkers", {"ell": -20, "r": 0}),
    ("q_zrp", {"qhat": 0.5, "ell": -20, "r": 0}),
    ("are_you_alone", {"eps": 0.3, "delta": 0.1, "ell": -20, "r": 0}),
    ("bricklayers", {"beta": math.log(2), "ell": -10, "r": 10}),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--events", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print("model,events,seconds,events_per_second,final_window")
    for name, kw in CASES:
        m = builtin(name, 0.7, **kw)
        t = time.perf_counter()
        tr = simulate(m, Configuration.ground(m), max_events=args.events, seed=args.seed)
        dt = time.perf_counter() - t
        print(f"{name},{tr.events},{dt:.3f},{tr.events / dt:.0f},{tr.final.hi - tr.final.lo + 1}")


if __name__ == "__main__":
    main()
