"""Blocking configurations with a finite deviation window.

Outside the explicit window a configuration equals ``omega_min`` to the left
(when ``ell = -inf``) and ``omega_max`` to the right (when ``r = +inf``).
That is exactly the countable state space: finitely many particles left of
1/2 and finitely many holes right of it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple

from .model import (INF, DomainError, ExtInt, LatticeSpec, ModelSpec,
                    OccupancyInterval, finite)


class ContractError(ValueError):
    """An operation was asked to do something its preconditions forbid."""


@dataclass(frozen=True, eq=False)
class Configuration:
    lo: int
    values: Tuple[int, ...]
    lattice: LatticeSpec
    occupancy: OccupancyInterval

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "lo", int(self.lo))
        lat, occ = self.lattice, self.occupancy
        if not finite(lat.ell) and not finite(occ.omega_min):
            raise DomainError("ell = -inf needs a finite omega_min")
        if not finite(lat.r) and not finite(occ.omega_max):
            raise DomainError("r = +inf needs a finite omega_max")
        if finite(lat.ell) and self.lo != lat.ell:
            raise DomainError("window must start at a finite left end")
        if finite(lat.r) and self.hi != lat.r:
            raise DomainError("window must end at a finite right end")
        if vals and not (lat.ell <= self.lo and self.hi <= lat.r):
            raise DomainError("window leaves the lattice")
        for v in vals:
            if v not in occ:
                raise DomainError(f"occupancy {v} outside I")

    @property
    def hi(self) -> int:
        return self.lo + len(self.values) - 1

    @property
    def left_fill(self) -> Optional[int]:
        return None if finite(self.lattice.ell) else int(self.occupancy.omega_min)

    @property
    def right_fill(self) -> Optional[int]:
        return None if finite(self.lattice.r) else int(self.occupancy.omega_max)

    def at(self, i: int) -> int:
        if i < self.lo:
            if i < self.lattice.ell:
                raise DomainError(f"site {i} outside the lattice")
            return self.left_fill
        if i > self.hi:
            if i > self.lattice.r:
                raise DomainError(f"site {i} outside the lattice")
            return self.right_fill
        return self.values[i - self.lo]

    def __getitem__(self, i: int) -> int:
        return self.at(i)

    def expanded(self, lo: int, hi: int) -> "Configuration":
        """Same configuration with the window widened to contain ``[lo, hi]``."""
        lo, hi = min(lo, self.lo), max(hi, self.hi)
        lo = max(lo, self.lattice.ell)
        hi = min(hi, self.lattice.r)
        return Configuration(lo, tuple(self.at(i) for i in range(lo, hi + 1)),
                             self.lattice, self.occupancy)

    def normalized(self) -> "Configuration":
        """Minimal window: fill-valued edge sites on infinite sides are dropped."""
        vals = list(self.values)
        lo = self.lo
        lf, rf = self.left_fill, self.right_fill
        while vals and lf is not None and vals[0] == lf:
            vals.pop(0)
            lo += 1
        while vals and rf is not None and vals[-1] == rf:
            vals.pop()
        return Configuration(lo, tuple(vals), self.lattice, self.occupancy)

    def _key(self):
        n = self.normalized()
        return (n.lo, n.values, self.lattice, self.occupancy)

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def deviation_window(self) -> Tuple[int, int]:
        n = self.normalized()
        return n.lo, n.hi

    def as_dict(self) -> Dict[int, int]:
        return {self.lo + k: v for k, v in enumerate(self.values)}

    def __repr__(self):
        return f"Configuration({self.to_text()!r})"

    # -- text format: "lo hi v_lo ... v_hi | left_fill right_fill ; ell r omega_min omega_max"

    def to_text(self) -> str:
        def ext(x):
            return "-" if x is None else ("inf" if x == INF else "-inf" if x == -INF else str(int(x)))
        body = " ".join(str(v) for v in self.values)
        head = f"{self.lo} {self.hi}" + (f" {body}" if body else "")
        lat, occ = self.lattice, self.occupancy
        return (f"{head} | {ext(self.left_fill)} {ext(self.right_fill)} ; "
                f"{ext(lat.ell)} {ext(lat.r)} {ext(occ.omega_min)} {ext(occ.omega_max)}")

    @classmethod
    def from_text(cls, text: str) -> "Configuration":
        try:
            window, rest = text.split("|")
            fills, extents = rest.split(";")
            w = window.split()
            lo, hi = int(w[0]), int(w[1])
            vals = tuple(int(v) for v in w[2:])
            ell, r, omin, omax = (_parse_ext(t) for t in extents.split())
        except (ValueError, IndexError) as exc:
            raise DomainError(f"malformed configuration text {text!r}") from exc
        if hi - lo + 1 != len(vals):
            raise DomainError("window bounds do not match the number of values")
        z = cls(lo, vals, LatticeSpec(ell, r), OccupancyInterval(omin, omax))
        lf, rf = (None if t == "-" else int(t) for t in fills.split())
        if (lf, rf) != (z.left_fill, z.right_fill):
            raise DomainError("fills are inconsistent with the lattice and alphabet")
        return z

    # -- constructors

    @classmethod
    def ground(cls, model_or_lattice, occupancy: Optional[OccupancyInterval] = None) -> "Configuration":
        """All sites at their fill (or ``omega_min``/``omega_max`` split at 1/2 on finite ends)."""
        lat, occ = _lat_occ(model_or_lattice, occupancy)
        if lat.doubly_infinite:
            return cls(1, (), lat, occ)
        lo = int(lat.ell) if finite(lat.ell) else 0
        hi = int(lat.r) if finite(lat.r) else 1
        vals = []
        for i in range(lo, hi + 1):
            v = occ.omega_min if i <= 0 else occ.omega_max
            if not finite(v):
                v = 0
            vals.append(int(v))
        return cls(lo, tuple(vals), lat, occ)

    @classmethod
    def from_sites(cls, model_or_lattice, sites: Dict[int, int],
                   occupancy: Optional[OccupancyInterval] = None) -> "Configuration":
        """Ground configuration with the given sites overwritten."""
        lat, occ = _lat_occ(model_or_lattice, occupancy)
        base = cls.ground(lat, occ)
        if not sites:
            return base
        # the window must reach the 0|1 interface, where the fills switch
        lo = min(min(sites), 1) if not finite(lat.ell) else int(lat.ell)
        hi = max(max(sites), 0) if not finite(lat.r) else int(lat.r)
        lo, hi = max(lo, lat.ell), min(hi, lat.r)
        if base.values:
            lo, hi = min(lo, base.lo), max(hi, base.hi)
        vals = [sites.get(i, base.at(i)) for i in range(lo, hi + 1)]
        return cls(lo, tuple(vals), lat, occ)


def _parse_ext(t: str) -> ExtInt:
    if t in ("inf", "+inf"):
        return INF
    if t == "-inf":
        return -INF
    return int(t)


def _lat_occ(model_or_lattice, occupancy):
    if isinstance(model_or_lattice, ModelSpec):
        return model_or_lattice.lattice, model_or_lattice.occupancy
    if occupancy is None:
        raise TypeError("need an OccupancyInterval with a bare LatticeSpec")
    return model_or_lattice, occupancy


# -- conserved quantities -------------------------------------------------------

def count_particles(z: Configuration) -> ExtInt:
    """Sum over ``ell <= i <= 0`` of ``z_i - omega_min``."""
    omin = z.occupancy.omega_min
    lat = z.lattice
    if not finite(omin):
        if not finite(lat.ell):
            raise DomainError("N_p undefined with ell = -inf and omega_min = -inf")
        return INF
    lo = int(lat.ell) if finite(lat.ell) else min(z.lo, 1)
    return sum(z.at(i) - int(omin) for i in range(lo, 1))


def count_holes(z: Configuration) -> ExtInt:
    """Sum over ``1 <= i <= r`` of ``omega_max - z_i``."""
    omax = z.occupancy.omega_max
    lat = z.lattice
    if not finite(omax):
        if not finite(lat.r):
            raise DomainError("N_h undefined with r = +inf and omega_max = +inf")
        return INF
    hi = int(lat.r) if finite(lat.r) else max(z.hi, 0)
    return sum(int(omax) - z.at(i) for i in range(1, hi + 1))


def conserved_n(z: Configuration) -> int:
    """``N = N_h - N_p``, conserved by the bulk dynamics on the doubly infinite lattice."""
    if not z.lattice.doubly_infinite:
        raise DomainError("N is defined on the doubly infinite lattice only")
    return count_holes(z) - count_particles(z)


# -- moves ----------------------------------------------------------------------

def apply_move(z: Configuration, i: int, j: int) -> Configuration:
    """Move one particle from site ``i`` to neighbouring site ``j``.

    A site outside the lattice stands for a reservoir: its change is not
    recorded, so boundary moves only touch the real edge site.
    """
    lat, occ = z.lattice, z.occupancy
    if abs(i - j) != 1:
        raise ContractError("moves are nearest neighbour")
    in_i, in_j = i in lat, j in lat
    if not (in_i or in_j):
        raise ContractError("a move needs at least one site in the lattice")
    if in_i and not z.at(i) > occ.omega_min:
        raise ContractError(f"site {i} holds omega_min; nothing to move")
    if in_j and not z.at(j) < occ.omega_max:
        raise ContractError(f"site {j} holds omega_max; no room")
    sites = [k for k in (i, j) if k in lat]
    w = z.expanded(min(sites), max(sites))
    vals = list(w.values)
    if in_i:
        vals[i - w.lo] -= 1
    if in_j:
        vals[j - w.lo] += 1
    return Configuration(w.lo, tuple(vals), lat, occ)


def shift(z: Configuration, j: int) -> Configuration:
    """``(tau^j z)_i = z_{i+j}`` on the doubly infinite lattice."""
    if not z.lattice.doubly_infinite:
        raise DomainError("shift needs the doubly infinite lattice")
    return Configuration(z.lo - j, z.values, z.lattice, z.occupancy)


def configurations_in_window(model: ModelSpec, lo: int, hi: int,
                             n: Optional[int] = None) -> Iterable[Configuration]:
    """Every configuration whose deviations lie in ``[lo, hi]`` (finite alphabet only)."""
    import itertools

    occ = model.occupancy
    alphabet = occ.values()
    for vals in itertools.product(alphabet, repeat=hi - lo + 1):
        z = Configuration(lo, vals, model.lattice, occ)
        if n is None or conserved_n(z) == n:
            yield z
