import pytest
from hypothesis import given, strategies as st

from blockmeasures.model import INF, DomainError, LatticeSpec, OccupancyInterval, builtin
from blockmeasures.state import (Configuration, ContractError, apply_move, conserved_n,
                                 configurations_in_window, count_holes, count_particles, shift)

ASEP = builtin("asep", 0.7)
K2 = builtin("k_exclusion", 0.7, K=2)
ZRP = builtin("zrp_rate1", 0.7)


def windowed(model, max_len=10):
    """Random configurations of a doubly infinite model with a window near the origin."""
    top = int(model.omega_max)
    return st.builds(
        lambda lo, vals: Configuration(lo, tuple(vals), model.lattice, model.occupancy),
        st.integers(-8, 4),
        st.lists(st.integers(0, top), max_size=max_len))


def test_counts_examples():
    assert count_particles(Configuration.from_sites(ASEP, {-2: 1})) == 1
    assert count_particles(Configuration.from_sites(ZRP, {-1: 1, 0: 2})) == 3
    assert count_holes(Configuration.ground(ASEP)) == 0
    assert count_holes(Configuration.from_sites(ASEP, {3: 0})) == 1
    assert count_holes(Configuration.from_sites(K2, {1: 1, 2: 0})) == 3


def test_conserved_n_examples():
    g = Configuration.ground(ASEP)
    assert conserved_n(g) == 0
    assert conserved_n(shift(g, 1)) == -1
    assert conserved_n(Configuration.from_sites(ASEP, {-2: 1, 3: 0})) == 0


def test_count_particles_undefined_for_unbounded_left():
    m = builtin("bricklayers", 0.7)
    z = Configuration.ground(m)
    assert count_particles(z) == INF
    lat = LatticeSpec(-INF, 0)
    with pytest.raises(DomainError):
        Configuration(0, (0,), lat, OccupancyInterval(-INF, INF))


def test_apply_move_examples():
    z = Configuration.from_sites(ASEP, {-5: 0, 0: 1, 1: 0})
    w = apply_move(z, 0, 1)
    assert w.at(0) == 0 and w.at(1) == 1
    half = builtin("zrp_rate1", 0.7, r=0)
    z = Configuration.from_sites(half, {0: 2})
    w = apply_move(z, 0, 1)
    assert w.at(0) == 1 and w.hi == 0
    with pytest.raises(ContractError):
        apply_move(Configuration.ground(ASEP), 3, 4)
    with pytest.raises(ContractError):
        apply_move(Configuration.ground(ASEP), 0, 2)


def test_shift_zero_and_k2_example():
    z = Configuration.from_sites(K2, {-1: 2, 0: 1, 2: 0})
    assert shift(z, 0) == z
    assert conserved_n(shift(z, 3)) == conserved_n(z) - 6


def test_equality_ignores_window_padding():
    a = Configuration(0, (0, 0, 1, 0, 1, 1), ASEP.lattice, ASEP.occupancy)
    b = Configuration(2, (1, 0), ASEP.lattice, ASEP.occupancy)
    assert a == b and hash(a) == hash(b)
    assert Configuration.ground(ASEP) == Configuration(-3, (0, 0, 0, 0, 1), ASEP.lattice, ASEP.occupancy)


def test_finite_window_must_match_ends():
    m = builtin("asep", 0.7, ell=-2, r=3)
    with pytest.raises(DomainError):
        Configuration(-1, (0, 0, 0, 0, 0), m.lattice, m.occupancy)
    with pytest.raises(DomainError):
        Configuration(-2, (0, 2, 0, 0, 0, 0), m.lattice, m.occupancy)


def test_window_enumeration_counts():
    assert len(list(configurations_in_window(ASEP, -2, 2))) == 32
    assert sum(1 for _ in configurations_in_window(ASEP, -2, 2, n=0)) == 10


@given(windowed(ASEP), st.integers(-6, 6))
def test_shift_moves_n(z, j):
    assert conserved_n(shift(z, j)) == conserved_n(z) - j


@given(windowed(K2), st.integers(-4, 4))
def test_shift_moves_n_k2(z, j):
    assert conserved_n(shift(z, j)) == conserved_n(z) - 2 * j


@given(windowed(ASEP), st.integers(-6, 6))
def test_shift_inverse(z, j):
    assert shift(shift(z, j), -j) == z


@given(windowed(K2), st.integers(-12, 12), st.sampled_from([-1, 1]))
def test_bulk_moves_conserve_n(z, i, d):
    occ = z.occupancy
    if z.at(i) > occ.omega_min and z.at(i + d) < occ.omega_max:
        assert conserved_n(apply_move(z, i, i + d)) == conserved_n(z)
    else:
        with pytest.raises(ContractError):
            apply_move(z, i, i + d)


@given(windowed(K2))
def test_text_round_trip(z):
    assert Configuration.from_text(z.to_text()) == z
    assert Configuration.from_text(z.to_text()).to_text() == z.to_text()


def test_text_round_trip_finite_and_half_line():
    for m in (builtin("asep", 0.7, ell=-2, r=3), builtin("zrp_rate1", 0.7, r=0),
              builtin("bricklayers", 0.7)):
        z = Configuration.ground(m)
        assert Configuration.from_text(z.to_text()) == z


def test_malformed_text():
    with pytest.raises(DomainError):
        Configuration.from_text("0 1 1 | - - ; -inf inf 0 1")
    with pytest.raises(DomainError):
        Configuration.from_text("garbage")


def test_shifted_ground_is_a_distinct_state():
    g = Configuration.ground(ASEP)
    s = shift(g, 2)
    assert s != g and not s.values
    assert (s.at(-2), s.at(-1)) == (0, 1)
    assert conserved_n(s) == -2
    assert s.normalized() == s and s.expanded(-4, 4).normalized().lo == s.lo


@given(windowed(ASEP))
def test_normalization_preserves_every_site(z):
    n = z.normalized()
    assert all(n.at(i) == z.at(i) for i in range(-20, 21))
