"""Lay-down / stand-up maps between half-line stacks and 0-1 configurations.

A half-line configuration ``z`` (sites ``i <= 0``, unbounded occupancies)
is read as the gaps between consecutive particles of an exclusion
configuration.  With ``r_0 = n - N_p(z) + 1`` and
``r_{m+1} = r_m + z_{-m} + 1`` the particles sit at ``r_0 < r_1 < ...``; the
result has conserved quantity ``N = n``.
"""

from __future__ import annotations

from typing import List, Tuple

from .model import INF, LatticeSpec, OccupancyInterval
from .state import Configuration, ContractError, count_particles

EXCLUSION_LATTICE = LatticeSpec(-INF, INF)
EXCLUSION_ALPHABET = OccupancyInterval(0, 1)
HALF_LINE = LatticeSpec(-INF, 0)
STACKS = OccupancyInterval(0, INF)

Move = Tuple[int, int]


def _check_half_line(z: Configuration):
    if z.lattice != HALF_LINE or z.occupancy != STACKS:
        raise ContractError("expected a configuration on (-inf, 0] with occupancies in [0, inf)")


def _check_exclusion(a: Configuration):
    if a.lattice != EXCLUSION_LATTICE or a.occupancy != EXCLUSION_ALPHABET:
        raise ContractError("expected a 0-1 configuration on the whole line")


def particle_positions(z: Configuration, n: int, extra: int = 0) -> List[int]:
    """``r_0, ..., r_M`` where ``M`` covers the window of ``z`` plus ``extra`` more."""
    _check_half_line(z)
    depth = -z.lo + 1 if z.values else 0
    r = [n - count_particles(z) + 1]
    for m in range(depth + extra):
        r.append(r[-1] + z.at(-m) + 1)
    return r


def lay_down(z: Configuration, n: int) -> Configuration:
    """The exclusion configuration with particles at ``r_0 < r_1 < ...``."""
    r = particle_positions(z, n)
    lo, hi = r[0], r[-1]
    vals = [0] * (hi - lo + 1)
    for x in r:
        vals[x - lo] = 1
    return Configuration(lo, tuple(vals), EXCLUSION_LATTICE, EXCLUSION_ALPHABET)


def _particles(a: Configuration) -> List[int]:
    """Explicit particle positions of ``a`` followed by the first site of the all-ones tail."""
    _check_exclusion(a)
    b = a.normalized()
    if not b.values:
        return [1]
    pos = [b.lo + k for k, v in enumerate(b.values) if v == 1]
    pos.append(b.hi + 1)
    return pos


def stand_up(a: Configuration) -> Configuration:
    """Inverse of :func:`lay_down`: ``U(a)_i = R_{1-i} - R_{-i} - 1`` for ``i <= 0``."""
    R = _particles(a)
    gaps = [R[m + 1] - R[m] - 1 for m in range(len(R) - 1)]
    while gaps and gaps[-1] == 0:
        gaps.pop()
    if not gaps:
        return Configuration(1, (), HALF_LINE, STACKS)
    vals = tuple(reversed(gaps))
    return Configuration(-(len(vals) - 1), vals, HALF_LINE, STACKS)


def move_correspondence(z: Configuration, move: Move, n: int = 0) -> Move:
    """The exclusion move that mirrors a move of the stacks.

    Removal through the right end (``0 -> 1``) moves ``r_0`` right, injection
    (``1 -> 0``) moves it left; a bulk move ``-m -> -m+1`` moves ``r_m`` right
    and its reverse moves ``r_m`` left.
    """
    _check_half_line(z)
    i, j = move
    if abs(i - j) != 1 or max(i, j) > 1:
        raise ContractError(f"{move} is not a move of the half line")
    if i <= 0 and z.at(i) <= 0:
        raise ContractError(f"site {i} is empty")
    m = 0 if max(i, j) == 1 else -min(i, j)
    r = particle_positions(z, n, extra=m + 1)
    x = r[m]
    step = 1 if j > i else -1
    return (x, x + step)


def exclusion_rate(p: float, a: Configuration, move: Move) -> float:
    """ASEP rate of ``move`` in ``a``: ``p`` to the right, ``q`` to the left, if allowed."""
    i, j = move
    if a.at(i) != 1 or a.at(j) != 0:
        return 0.0
    return p if j == i + 1 else 1.0 - p
