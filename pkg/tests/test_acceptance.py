"""One test per acceptance criterion; each prints a PASS/FAIL line with its numbers."""
import math
import time

import numpy as np
import pytest
from scipy import stats

from blockmeasures.dynamics import ConservedObserver, OccupationObserver, simulate
from blockmeasures.measures import SectorWeight, sample_conserved_n, sample_sector, sector_weight
from blockmeasures.model import builtin
from blockmeasures.standup import (EXCLUSION_ALPHABET, EXCLUSION_LATTICE, HALF_LINE, STACKS, lay_down,
                                   move_correspondence, stand_up)
from blockmeasures.state import Configuration, apply_move, conserved_n
from blockmeasures.verify import (check_combi, check_combi_ground, check_detailed_balance, check_meq,
                                  check_sector_decomposition, check_shift_identity, compare_stationary,
                                  enumerate_chain, random_half_line, sector_marginals)
from blockmeasures.verify.jacobi import jacobi_grid

P_GRID = (0.55, 0.7, 0.9)
C_GRID = (-1.0, 0.0, 1.0)


def gen(seed):
    return np.random.Generator(np.random.PCG64(seed))


def test_criterion_01_jacobi(verdict):
    t = time.perf_counter()
    reps = jacobi_grid(eps=1e-10)
    elapsed = time.perf_counter() - t
    worst = max(r.residual - r.tail_budget for r in reps)
    ok = len(reps) == 25 and all(r.passed for r in reps) and elapsed < 1.0
    assert verdict(1, ok, f"25 grid points, worst residual-minus-budget {worst:.2e}, {elapsed:.3f} s")


# the seven finite instances; ``closed`` marks chains with no occupancy cap
INSTANCES = [
    ("asep", dict(ell=-2, r=3, c=0.0), None, True),
    ("k_exclusion", dict(K=3, ell=-1, r=2), None, True),
    ("zrp_rate1", dict(ell=-3, r=0), 12, False),
    ("independent_walkers", dict(ell=-2, r=0), 12, False),
    ("q_zrp", dict(qhat=0.5, ell=-2, r=0), 12, False),
    ("are_you_alone", dict(eps=0.3, delta=0.1, ell=-2, r=0), 12, False),
    ("bricklayers", dict(beta=math.log(2), ell=0, r=1), (-4, 5), False),
]


@pytest.fixture(scope="module")
def chains():
    t = time.perf_counter()
    out = []
    for name, kw, cap, closed in INSTANCES:
        m = builtin(name, 0.7, **kw)
        assert m.validate().ok
        out.append((name, enumerate_chain(m, occupancy_cap=cap), closed))
    return out, time.perf_counter() - t


def test_criterion_02_detailed_balance(chains, verdict):
    built, t_build = chains
    t = time.perf_counter()
    worst, parts = 0.0, []
    for name, chain, _ in built:
        rep = check_detailed_balance(chain)
        worst = max(worst, rep.residual)
        parts.append(f"{name}[{chain.n_states}]={rep.residual:.1e}")
    elapsed = t_build + time.perf_counter() - t
    ok = worst < 1e-12 and elapsed < 30.0
    assert verdict(2, ok, f"max residual {worst:.2e} over {', '.join(parts)}; {elapsed:.1f} s")


def test_criterion_03_stationary_solve(chains, verdict):
    built, _ = chains
    worst, names = 0.0, []
    for name, chain, closed in built:
        if closed:
            rep = compare_stationary(chain, eps=1e-10)
            worst = max(worst, rep.residual)
            names.append(name)
    ok = worst < 1e-10 and len(names) == 2
    assert verdict(3, ok, f"max relative deviation {worst:.2e} on {', '.join(names)}")


def test_criterion_04_shift_identity(verdict):
    rng = gen(4)
    worst = 0.0
    for model in (builtin("asep", 0.7), builtin("k_exclusion", 0.7, K=2)):
        top = int(model.omega_max)
        for _ in range(1000):
            lo = int(rng.integers(-8, 4))
            vals = tuple(int(v) for v in rng.integers(0, top + 1, size=int(rng.integers(0, 12))))
            z = Configuration(lo, vals, model.lattice, model.occupancy)
            c = float(rng.uniform(-1.5, 1.5))
            j = int(rng.integers(-4, 5))
            worst = max(worst, check_shift_identity(model, c, z, j).residual)
    assert verdict(4, worst < 1e-12, f"max |lhs - rhs| {worst:.2e} over 2000 (z, j)")


def test_criterion_05_sector_law(verdict):
    asep = builtin("asep", 0.7)
    draws = 100_000
    ns = sample_conserved_n(asep, 0.0, draws, gen(5))
    sw = SectorWeight(0.7, 0.0)
    cells = list(range(-5, 6))
    observed = [int(np.sum(ns == n)) for n in cells]
    expected = [draws * sector_weight(sw, n) for n in cells]
    # |n| > 5 is pooled into one tail cell so the counts sum to the draws
    observed.append(draws - sum(observed))
    expected.append(draws - sum(expected))
    # merge sparse cells (expected < 5) into their neighbours toward the centre
    obs, exp = [], []
    for o, e in zip(observed, expected):
        obs.append(o)
        exp.append(e)
    while min(exp) < 5:
        k = int(np.argmin(exp))
        tgt = k - 1 if k > 0 else k + 1
        obs[tgt] += obs.pop(k)
        exp[tgt] += exp.pop(k)
    chi2 = sum((o - e) ** 2 / e for o, e in zip(obs, exp))
    dof = len(obs) - 1
    pval = stats.chi2.sf(chi2, dof)
    assert verdict(5, pval > 1e-3, f"chi2={chi2:.2f} dof={dof} p={pval:.3f} over {draws} draws")


def test_criterion_06_decomposition(verdict):
    rep = check_sector_decomposition(0.7, 0.0, window=6)
    assert verdict(6, rep.passed, f"residual {rep.residual:.2e} vs budget {rep.tail_budget + rep.eps:.2e}, "
                                  f"{rep.details['states']} states")


def random_exclusion(rng):
    lo = int(rng.integers(-12, 6))
    vals = tuple(int(v) for v in rng.integers(0, 2, size=int(rng.integers(0, 18))))
    return Configuration(lo, vals, EXCLUSION_LATTICE, EXCLUSION_ALPHABET)


def test_criterion_07_stand_up(verdict):
    rng = gen(7)
    bad = 0
    for _ in range(10_000):
        z = random_half_line(rng)
        n = int(rng.integers(-5, 6))
        bad += stand_up(lay_down(z, n)) != z
        a = random_exclusion(rng)
        bad += lay_down(stand_up(a), conserved_n(a)) != a

    # coupled dynamics: a ZRP path drives the exclusion path through the move map
    zrp = builtin("zrp_rate1", 0.7, r=0)
    mismatches, events = 0, 0
    for seed, n in ((71, 0), (72, 3), (73, -2)):
        h = random_half_line(gen(seed))
        z0 = Configuration(h.lo, h.values, zrp.lattice, zrp.occupancy)
        tr = simulate(zrp, z0, max_events=1000, seed=seed, record=True)
        z, a = h, lay_down(h, n)
        for i, j in tr.moves:
            x, y = move_correspondence(z, (int(i), int(j)), n)
            w = apply_move(Configuration(z.lo, z.values, zrp.lattice, zrp.occupancy), int(i), int(j))
            z = Configuration(w.lo, w.values, HALF_LINE, STACKS)
            a = apply_move(a, x, y)
            mismatches += lay_down(z, n) != a
            events += 1
        mismatches += Configuration(z.lo, z.values, zrp.lattice, zrp.occupancy) != tr.final
    ok = bad == 0 and mismatches == 0 and events == 3000
    assert verdict(7, ok, f"{bad} round-trip failures in 2x10^4, {mismatches} coupled mismatches "
                          f"over {events} events")


def test_criterion_08_meq_combi(verdict):
    worst, count = 0.0, 0
    for p in P_GRID:
        for c in C_GRID:
            rng = gen(int(1000 * p) + int(c) + 8)
            for _ in range(100):
                z = random_half_line(rng)
                n = int(rng.integers(-4, 5))
                worst = max(worst, check_meq(p, c, z, n).residual, check_combi(p, c, z).residual)
                count += 1
            worst = max(worst, check_combi_ground(p, c).residual)
    assert verdict(8, worst < 1e-9, f"max residual {worst:.2e} over {count} instances plus 9 ground cases")


@pytest.mark.slow
def test_criterion_09_conservation(verdict):
    asep = builtin("asep", 0.7)
    z0 = sample_sector(asep, 0.0, 2, gen(9))
    obs = ConservedObserver()
    tr = simulate(asep, z0, max_events=1_000_000, seed=9, observers=[obs], max_window=10**6)
    ok = obs.checks == 1_000_000 and obs.violations == 0 and conserved_n(tr.final) == 2
    assert verdict(9, ok, f"{obs.checks} events checked, {obs.violations} violations, N={conserved_n(tr.final)}")


@pytest.mark.slow
def test_criterion_10_monte_carlo(verdict):
    p, t_max, sites = 0.7, 1e4, list(range(-5, 6))
    asep = builtin("asep", p)
    z0 = sample_sector(asep, 0.0, 0, gen(1))
    obs = OccupationObserver(sites, t_max, n_batches=50)
    simulate(asep, z0, t_max=t_max, seed=1, observers=[obs])
    exact = sector_marginals(p, 0, sites, window=16, method="enumerate")
    z = (obs.means() - np.array([exact[i] for i in sites])) / obs.standard_errors()
    worst = float(np.max(np.abs(z)))
    k = int(np.argmax(np.abs(z)))
    ok = worst < 3.0
    assert verdict(10, ok, f"max |z| {worst:.2f} at site {sites[k]} (3 sigma per site, 50 batch means)")
