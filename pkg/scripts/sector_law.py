"""Empirical law of the conserved quantity N under mu^c against the discrete Gaussian."""
import argparse

import numpy as np
from scipy import stats

from blockmeasures.measures import SectorWeight, sample_conserved_n, sector_weight
from blockmeasures.model import builtin


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, default=0.7)
    ap.add_argument("--c", type=float, default=0.0)
    ap.add_argument("--draws", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--nmax", type=int, default=5)
    args = ap.parse_args()

    model = builtin("asep", args.p)
    ns = sample_conserved_n(model, args.c, args.draws, np.random.Generator(np.random.PCG64(args.seed)))
    sw = SectorWeight(args.p, args.c)
    cells = range(-args.nmax, args.nmax + 1)
    obs = np.array([np.sum(ns == n) for n in cells], dtype=float)
    exp = np.array([args.draws * sector_weight(sw, n) for n in cells])
    print("n,observed,expected,z")
    for n, o, e in zip(cells, obs, exp):
        print(f"{n},{int(o)},{e:.2f},{(o - e) / np.sqrt(e):+.3f}")
    keep = exp >= 5
    chi2 = float(np.sum((obs[keep] - exp[keep]) ** 2 / exp[keep]))
    dof = int(keep.sum()) - 1
    print(f"# chi2={chi2:.3f} dof={dof} p={stats.chi2.sf(chi2, dof):.4f} mean(N)={ns.mean():+.4f}")


if __name__ == "__main__":
    main()
