import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from blockmeasures.model import builtin
from blockmeasures.measures import sample_blocking
from blockmeasures.standup import (EXCLUSION_ALPHABET, EXCLUSION_LATTICE, HALF_LINE, STACKS,
                                   exclusion_rate, lay_down, move_correspondence, particle_positions,
                                   stand_up)
from blockmeasures.state import Configuration, ContractError, apply_move, conserved_n, shift
from blockmeasures.verify.identities import sector_marginals


def half(sites):
    return Configuration.from_sites(HALF_LINE, sites, STACKS)


def exclusion(values, lo):
    return Configuration(lo, tuple(values), EXCLUSION_LATTICE, EXCLUSION_ALPHABET)


half_lines = st.dictionaries(st.integers(-10, 0), st.integers(0, 4), max_size=8).map(half)
exclusions = st.builds(lambda lo, v: exclusion(v, lo), st.integers(-12, 6),
                       st.lists(st.integers(0, 1), max_size=16))


def particles(a, lo=-30, hi=30):
    return [i for i in range(lo, hi + 1) if a.at(i) == 1]


def test_lay_down_example():
    z = half({-1: 1, 0: 2})
    assert particle_positions(z, 0, extra=2)[:5] == [-2, 1, 3, 4, 5]
    a = lay_down(z, 0)
    assert particles(a, -6, 8) == [-2, 1, 3, 4, 5, 6, 7, 8]
    assert conserved_n(a) == 0
    assert lay_down(z, 2) == shift(a, -2)
    assert conserved_n(lay_down(z, 2)) == 2


def test_ground_cases():
    g = half({})
    assert particles(lay_down(g, 0), -5, 6) == [1, 2, 3, 4, 5, 6]
    assert stand_up(Configuration.ground(builtin("asep", 0.7))) == g


def test_stand_up_example():
    a = exclusion([1, 0, 0, 1, 0, 1, 1], -2)
    z = stand_up(a)
    assert (z.at(0), z.at(-1)) == (2, 1)
    assert all(z.at(i) == 0 for i in range(-10, -1))


def test_figure_style_move():
    z = half({-5: 1, -3: 2, -1: 1, 0: 2})
    x, y = move_correspondence(z, (-3, -2))
    r = particle_positions(z, 0, extra=4)
    assert (x, y) == (r[3], r[3] + 1)


def test_boundary_moves():
    z = half({0: 2, -1: 1})
    r0 = particle_positions(z, 0)[0]
    assert move_correspondence(z, (0, 1)) == (r0, r0 + 1)
    assert move_correspondence(z, (1, 0)) == (r0, r0 - 1)
    with pytest.raises(ContractError):
        move_correspondence(half({}), (0, 1))
    with pytest.raises(ContractError):
        move_correspondence(z, (-3, -1))


@given(half_lines, st.integers(-5, 5))
def test_round_trip_from_half_line(z, n):
    a = lay_down(z, n)
    assert conserved_n(a) == n
    assert stand_up(a) == z


@given(exclusions)
def test_round_trip_from_exclusion(a):
    n = conserved_n(a)
    assert lay_down(stand_up(a), n) == a


@given(half_lines, st.integers(-3, 3), st.data())
def test_moves_commute_and_rates_match(z, n, data):
    p = 0.7
    zrp = builtin("zrp_rate1", p, r=0)
    a = lay_down(z, n)
    moves = [(i, i + 1) for i in range(-10, 1) if z.at(i) > 0]
    moves += [(i, i - 1) for i in range(-9, 1) if z.at(i) > 0]
    moves.append((1, 0))
    move = data.draw(st.sampled_from(moves))
    i, j = move
    target = zrp.lattice
    if i == 1:
        rate = zrp.q_r(z.at(0))
    elif j == 1:
        rate = zrp.p_r(z.at(0))
    elif j == i + 1:
        rate = zrp.bulk_rate_p(z.at(i), z.at(j))
    else:
        rate = zrp.bulk_rate_q(z.at(j), z.at(i))
    x, y = move_correspondence(z, move, n)
    assert exclusion_rate(p, a, (x, y)) == pytest.approx(rate)
    w = apply_move(Configuration(z.lo, z.values, target, zrp.occupancy), i, j)
    w = Configuration(w.lo, w.values, HALF_LINE, STACKS)
    assert lay_down(w, n) == apply_move(a, x, y)


def test_blocking_measure_lays_down_to_sector_law():
    """mu of the half-line ZRP, laid down with n = 0, is nu^0 of ASEP."""
    p = 0.7
    zrp = builtin("zrp_rate1", p, r=0)
    rng = np.random.Generator(np.random.PCG64(2024))
    sites = list(range(-4, 5))
    count = 20_000
    occ = np.zeros(len(sites))
    for _ in range(count):
        a = lay_down(sample_blocking(zrp, None, 1e-12, rng), 0)
        occ += [a.at(i) for i in sites]
    exact = sector_marginals(p, 0, sites, window=14)
    for k, i in enumerate(sites):
        rho = exact[i]
        sd = math.sqrt(rho * (1 - rho) / count)
        assert abs(occ[k] / count - rho) < 4 * sd, (i, occ[k] / count, rho)
