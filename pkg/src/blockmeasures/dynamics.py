"""Event-driven continuous-time simulation of bulk plus reservoir dynamics.

The direct (Gillespie) method over a binary sum tree of event rates.
Slots 0-3 hold the reservoir events, then each bond ``(i, i+1)`` of the
stored window owns two slots for its right and left jump.  Only bonds
touching a changed site are refreshed after an event.
"""

from __future__ import annotations

import json
import math
import os
from array import array
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .model import DomainError, ModelSpec, finite
from .state import Configuration, conserved_n

RNG_ALGORITHM = "numpy.PCG64"
RNG_VERSION = 1

LEFT_IN, LEFT_OUT, RIGHT_OUT, RIGHT_IN = range(4)
_N_BOUNDARY = 4


class WindowOverflow(RuntimeError):
    """The stored window outgrew the configured cap."""


class InvariantViolation(AssertionError):
    pass


# -- sum tree -------------------------------------------------------------------------

class EventTable:
    """Rates of all events indexed by slot, with O(log n) update and selection."""

    def __init__(self, n_slots: int):
        size = 1
        while size < max(n_slots, 2):
            size *= 2
        self.size = size
        self.tree = [0.0] * (2 * size)

    @property
    def total(self) -> float:
        return self.tree[1]

    def get(self, slot: int) -> float:
        return self.tree[self.size + slot]

    def set(self, slot: int, rate: float):
        tree = self.tree
        k = self.size + slot
        tree[k] = rate
        k >>= 1
        while k:
            tree[k] = tree[2 * k] + tree[2 * k + 1]
            k >>= 1

    def fill(self, rates: Sequence[float]):
        tree, size = self.tree, self.size
        tree[size:size + len(rates)] = list(rates)
        for k in range(size - 1, 0, -1):
            tree[k] = tree[2 * k] + tree[2 * k + 1]

    def select(self, u: float) -> int:
        """Slot whose cumulative interval contains ``u * total``."""
        tree, size = self.tree, self.size
        x = u * tree[1]
        k = 1
        while k < size:
            left = tree[2 * k]
            if x < left or tree[2 * k + 1] <= 0.0:
                k = 2 * k
            else:
                x -= left
                k = 2 * k + 1
        return k - size

    def leaves(self) -> List[float]:
        return self.tree[self.size:]


# -- observers ------------------------------------------------------------------------

class Observer:
    """Pull-style accumulator.  ``advance`` sees the sojourn in the current state."""

    def start(self, sim: "Simulator"):
        pass

    def advance(self, sim: "Simulator", dt: float):
        pass

    def jumped(self, sim: "Simulator", i: int, j: int):
        pass

    def summary(self) -> dict:
        return {}


class OccupationObserver(Observer):
    """Time-averaged occupations over ``sites`` with equal-time batch means."""

    def __init__(self, sites: Sequence[int], t_total: float, n_batches: int = 50):
        self.sites = list(sites)
        self.t_total = float(t_total)
        self.n_batches = n_batches
        self.batch_len = self.t_total / n_batches if n_batches and t_total > 0 else math.inf
        self.batches = np.zeros((max(n_batches, 1), len(self.sites)))
        self.totals = np.zeros(len(self.sites))
        self.elapsed = 0.0

    def advance(self, sim, dt):
        dt = min(dt, self.t_total - self.elapsed)
        if dt <= 0:
            return
        occ = np.array([sim.at(i) for i in self.sites], dtype=float)
        self.totals += occ * dt
        t = self.elapsed
        end = t + dt
        while t < end:
            b = min(int(t / self.batch_len), self.n_batches - 1)
            stop = min(end, (b + 1) * self.batch_len) if b < self.n_batches - 1 else end
            if stop <= t:
                stop = end
            self.batches[b] += occ * (stop - t)
            t = stop
        self.elapsed = end

    def means(self) -> np.ndarray:
        return self.totals / self.elapsed if self.elapsed > 0 else np.full(len(self.sites), np.nan)

    def batch_means(self) -> np.ndarray:
        return self.batches / self.batch_len

    def standard_errors(self) -> np.ndarray:
        bm = self.batch_means()
        return bm.std(axis=0, ddof=1) / math.sqrt(self.n_batches)

    def summary(self):
        return {"sites": self.sites, "mean": self.means().tolist(),
                "stderr": self.standard_errors().tolist(), "time": self.elapsed}


class ConservedObserver(Observer):
    """Recomputes ``N`` from the stored window after every event and compares to the start."""

    def __init__(self, strict: bool = True):
        self.strict = strict
        self.initial: Optional[int] = None
        self.checks = 0
        self.violations = 0

    def start(self, sim):
        self.initial = sim.conserved_n()

    def jumped(self, sim, i, j):
        self.checks += 1
        n = sim.conserved_n()
        if n != self.initial:
            self.violations += 1
            if self.strict:
                raise InvariantViolation(f"N changed from {self.initial} to {n} after move {i}->{j}")

    def summary(self):
        return {"initial": self.initial, "checks": self.checks, "violations": self.violations}


class CurrentObserver(Observer):
    """Net number of jumps across the bond ``(bond, bond+1)`` and through each reservoir."""

    def __init__(self, bond: int = 0):
        self.bond = bond
        self.net = 0
        self.left_in = self.left_out = self.right_in = self.right_out = 0

    def jumped(self, sim, i, j):
        if (i, j) == (self.bond, self.bond + 1):
            self.net += 1
        elif (i, j) == (self.bond + 1, self.bond):
            self.net -= 1
        lat = sim.model.lattice
        if finite(lat.ell) and min(i, j) == lat.ell - 1:
            if j == lat.ell:
                self.left_in += 1
            else:
                self.left_out += 1
        if finite(lat.r) and max(i, j) == lat.r + 1:
            if j == lat.r + 1:
                self.right_out += 1
            else:
                self.right_in += 1

    def summary(self):
        return {"bond": self.bond, "net": self.net, "left_in": self.left_in, "left_out": self.left_out,
                "right_in": self.right_in, "right_out": self.right_out}


# -- simulator ------------------------------------------------------------------------

@dataclass
class Trajectory:
    initial: Configuration
    final: Configuration
    seed: int
    t: float
    events: int
    absorbed: bool
    spec_hash: str
    times: Optional[np.ndarray] = None
    moves: Optional[np.ndarray] = None
    window_growth: List[Tuple[float, int, int]] = field(default_factory=list)
    observers: List[Observer] = field(default_factory=list)

    def metadata(self) -> dict:
        return {"seed": self.seed, "spec_hash": self.spec_hash, "events": self.events,
                "t": self.t, "absorbed": self.absorbed, "rng": RNG_ALGORITHM,
                "rng_version": RNG_VERSION, "window_growth": len(self.window_growth),
                "final": self.final.to_text()}

    def metadata_json(self) -> str:
        return json.dumps(self.metadata(), sort_keys=True)


class Simulator:
    """Mutable simulation state: stored window, rate table and RNG stream.

    ``audit_rate`` is the fraction of events after which the incremental
    table is compared against a rebuild (drawn from a separate stream, so
    auditing never changes the trajectory).
    """

    PAD = 8

    def __init__(self, model: ModelSpec, z0: Configuration, seed: int = 0,
                 max_window: int = 200_000, audit_rate: float = 0.0, buffer: int = 8192):
        if z0.lattice != model.lattice or z0.occupancy != model.occupancy:
            raise DomainError("initial configuration does not match the model")
        self.model = model
        self.seed = int(seed)
        self.max_window = max_window
        self.rng = np.random.Generator(np.random.PCG64(self.seed))
        self._buf = np.empty(0)
        self._pos = 0
        self._buffer = buffer
        self.audit_rate = audit_rate
        self._audit_rng = np.random.Generator(np.random.PCG64([self.seed, 0x5EED]))
        self.time = 0.0
        self.events = 0
        self.window_growth: List[Tuple[float, int, int]] = []
        lat = model.lattice
        self._ell_fin, self._r_fin = finite(lat.ell), finite(lat.r)
        self._ell = int(lat.ell) if self._ell_fin else None
        self._r = int(lat.r) if self._r_fin else None
        self._pcache: Dict[Tuple[int, int], float] = {}
        self._qcache: Dict[Tuple[int, int], float] = {}
        self._load(z0)

    # -- storage

    def _load(self, z: Configuration):
        lo, hi = z.lo, z.hi
        if not self._ell_fin:
            lo -= self.PAD
        if not self._r_fin:
            hi += self.PAD
        if self._ell_fin:
            lo = self._ell
        if self._r_fin:
            hi = self._r
        if hi - lo + 1 > self.max_window:
            raise WindowOverflow(f"window of {hi - lo + 1} sites exceeds cap {self.max_window}")
        self.lo = lo
        self.vals = [z.at(i) for i in range(lo, hi + 1)]
        self._rebuild()

    @property
    def hi(self) -> int:
        return self.lo + len(self.vals) - 1

    def at(self, i: int) -> int:
        k = i - self.lo
        if 0 <= k < len(self.vals):
            return self.vals[k]
        if k < 0:
            return int(self.model.omega_min)
        return int(self.model.omega_max)

    def configuration(self) -> Configuration:
        return Configuration(self.lo, tuple(self.vals), self.model.lattice, self.model.occupancy)

    def conserved_n(self) -> int:
        m = self.model
        if not m.lattice.doubly_infinite or not (finite(m.omega_min) and finite(m.omega_max)):
            raise DomainError("N is defined for bounded occupancies on the doubly infinite lattice")
        k0 = min(max(0 - self.lo + 1, 0), len(self.vals))
        omin, omax = int(m.omega_min), int(m.omega_max)
        n_p = sum(self.vals[:k0]) - omin * k0
        n_h = omax * (len(self.vals) - k0) - sum(self.vals[k0:])
        return n_h - n_p

    # -- rates

    def _rate_p(self, y, z):
        key = (y, z)
        r = self._pcache.get(key)
        if r is None:
            r = self._pcache[key] = self.model.bulk_rate_p(y, z)
        return r

    def _rate_q(self, y, z):
        key = (y, z)
        r = self._qcache.get(key)
        if r is None:
            r = self._qcache[key] = self.model.bulk_rate_q(y, z)
        return r

    def _boundary_rates(self) -> List[float]:
        m = self.model
        out = [0.0] * _N_BOUNDARY
        if self._ell_fin:
            y = self.vals[0]
            out[LEFT_IN], out[LEFT_OUT] = m.p_ell(y), m.q_ell(y)
        if self._r_fin:
            y = self.vals[-1]
            out[RIGHT_OUT], out[RIGHT_IN] = m.p_r(y), m.q_r(y)
        return out

    def _all_rates(self) -> List[float]:
        rates = self._boundary_rates()
        v = self.vals
        for k in range(len(v) - 1):
            rates.append(self._rate_p(v[k], v[k + 1]))
            rates.append(self._rate_q(v[k], v[k + 1]))
        return rates

    def _rebuild(self):
        rates = self._all_rates()
        self.table = EventTable(len(rates))
        self.table.fill(rates)

    def _refresh(self, k: int):
        """Refresh the bonds touching stored index ``k`` and, at an end, the reservoir slots."""
        v, t = self.vals, self.table
        last = len(v) - 1
        for b in (k - 1, k):
            if 0 <= b < last:
                y, z = v[b], v[b + 1]
                t.set(_N_BOUNDARY + 2 * b, self._rate_p(y, z))
                t.set(_N_BOUNDARY + 2 * b + 1, self._rate_q(y, z))
        if (k == 0 and self._ell_fin) or (k == last and self._r_fin):
            for slot, r in enumerate(self._boundary_rates()):
                if t.get(slot) != r:
                    t.set(slot, r)

    def _grow(self, side: int):
        z = self.configuration()
        old = len(self.vals)
        pad = max(self.PAD, old // 2)
        lo = self.lo - pad if side < 0 else self.lo
        hi = self.hi + pad if side > 0 else self.hi
        if hi - lo + 1 > self.max_window:
            raise WindowOverflow(f"window of {hi - lo + 1} sites exceeds cap {self.max_window} "
                                 f"at t = {self.time:g} after {self.events} events")
        self.lo = lo
        self.vals = [z.at(i) for i in range(lo, hi + 1)]
        self.window_growth.append((self.time, lo, hi))
        self._rebuild()

    def _uniform(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self.rng.random(self._buffer)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return float(u)

    # -- events

    def event_of_slot(self, slot: int) -> Tuple[int, int]:
        if slot == LEFT_IN:
            return self._ell - 1, self._ell
        if slot == LEFT_OUT:
            return self._ell, self._ell - 1
        if slot == RIGHT_OUT:
            return self._r, self._r + 1
        if slot == RIGHT_IN:
            return self._r + 1, self._r
        b = (slot - _N_BOUNDARY) // 2
        i = self.lo + b
        return (i, i + 1) if (slot - _N_BOUNDARY) % 2 == 0 else (i + 1, i)

    def eligible_events(self) -> List[Tuple[Tuple[int, int], float]]:
        leaves = self.table.leaves()
        return [(self.event_of_slot(s), r) for s, r in enumerate(leaves) if r > 0.0]

    def apply(self, i: int, j: int):
        """Apply the move ``i -> j`` in place and refresh the affected rates."""
        lo = self.lo
        last = len(self.vals) - 1
        changed = []
        for site, delta in ((i, -1), (j, 1)):
            k = site - lo
            if 0 <= k <= last:
                self.vals[k] += delta
                changed.append(k)
        for k in changed:
            self._refresh(k)
        if changed:
            kmin, kmax = min(changed), max(changed)
            if kmin == 0 and not self._ell_fin:
                self._grow(-1)
            elif kmax == last and not self._r_fin:
                self._grow(+1)

    def step(self) -> Tuple[float, Optional[Tuple[int, int]]]:
        """One event: returns ``(dt, (i, j))``, or ``(inf, None)`` in an absorbing state."""
        total = self.table.total
        if not total > 0.0:
            return math.inf, None
        dt = -math.log1p(-self._uniform()) / total
        slot = self.table.select(self._uniform())
        i, j = self.event_of_slot(slot)
        self.apply(i, j)
        self.time += dt
        self.events += 1
        if self.audit_rate and self._audit_rng.random() < self.audit_rate:
            self.audit()
        return dt, (i, j)

    def audit(self):
        """Compare the incremental table with a rebuild from the current window."""
        expected = self._all_rates()
        got = self.table.leaves()[:len(expected)]
        if any(a != b for a, b in zip(expected, got)):
            raise InvariantViolation(f"rate table drifted from a rebuild after {self.events} events")
        total = math.fsum(expected)
        if not math.isfinite(self.table.total) or abs(self.table.total - total) > 1e-9 * max(1.0, total):
            raise InvariantViolation("total rate inconsistent with its leaves")


def step(sim: Simulator) -> Tuple[float, Optional[Tuple[int, int]]]:
    return sim.step()


def simulate(model: ModelSpec, z0: Configuration, t_max: float = math.inf,
             observers: Sequence[Observer] = (), seed: int = 0, max_events: Optional[int] = None,
             record: bool = False, max_window: int = 200_000, audit_rate: float = 0.0) -> Trajectory:
    """Run until time ``t_max`` or ``max_events`` events, whichever comes first.

    The final sojourn is cut at ``t_max``; observers see it truncated.
    """
    if t_max == math.inf and max_events is None:
        raise ValueError("need t_max or max_events")
    sim = Simulator(model, z0, seed, max_window=max_window, audit_rate=audit_rate)
    for ob in observers:
        ob.start(sim)
    times = array("d") if record else None
    moves = array("q") if record else None
    limit = math.inf if max_events is None else max_events
    absorbed = False
    while sim.events < limit:
        total = sim.table.total
        if not total > 0.0:
            absorbed = True
            rest = t_max - sim.time
            if rest > 0 and math.isfinite(rest):
                for ob in observers:
                    ob.advance(sim, rest)
                sim.time = t_max
            break
        dt = -math.log1p(-sim._uniform()) / total
        if sim.time + dt > t_max:
            for ob in observers:
                ob.advance(sim, t_max - sim.time)
            sim.time = t_max
            break
        for ob in observers:
            ob.advance(sim, dt)
        slot = sim.table.select(sim._uniform())
        i, j = sim.event_of_slot(slot)
        sim.apply(i, j)
        sim.time += dt
        sim.events += 1
        if record:
            times.append(sim.time)
            moves.extend((i, j))
        for ob in observers:
            ob.jumped(sim, i, j)
        if sim.audit_rate and sim._audit_rng.random() < sim.audit_rate:
            sim.audit()
    return Trajectory(
        initial=z0, final=sim.configuration(), seed=sim.seed, t=sim.time, events=sim.events,
        absorbed=absorbed, spec_hash=model.spec_hash(),
        times=np.frombuffer(times, dtype=float).copy() if record else None,
        moves=np.frombuffer(moves, dtype=np.int64).reshape(-1, 2).copy() if record else None,
        window_growth=sim.window_growth, observers=list(observers))


def occupation_csv(obs: OccupationObserver) -> str:
    from .measures import to_csv
    rows = [[i, m, s] for i, m, s in zip(obs.sites, obs.means(), obs.standard_errors())]
    return to_csv(["site", "mean", "stderr"], rows)


# -- stationarity drift -------------------------------------------------------------

@dataclass
class DriftReport:
    sites: List[int]
    exact_mean: List[float]
    empirical_mean: List[float]
    stderr: List[float]
    z_scores: List[float]
    tv: List[float]
    threshold: float
    passed: bool
    replicas: int

    @property
    def max_abs_z(self) -> float:
        return max(abs(z) for z in self.z_scores)

    def to_dict(self) -> dict:
        return dict(self.__dict__, max_abs_z=self.max_abs_z)


def familywise_threshold(m: int, sigmas: float = 3.0) -> float:
    """Per-site z threshold whose family-wise level over ``m`` sites equals a two-sided ``sigmas`` test."""
    from scipy.stats import norm
    alpha = 2 * norm.sf(sigmas)
    return float(norm.isf(alpha / (2 * m)))


def _replica(args):
    model, c, sector, sites, t_burn, t_measure, seed, values = args
    from .measures import sample_blocking, sample_sector
    rng = np.random.Generator(np.random.PCG64(seed))
    if sector is None:
        z0 = sample_blocking(model, c, 1e-12, rng)
    else:
        z0 = sample_sector(model, c, sector, rng)
    sim_seed = int(rng.integers(2**63))
    traj = simulate(model, z0, t_max=t_burn, seed=sim_seed)
    hist = _HistogramObserver(sites, values, t_measure)
    simulate(model, traj.final, t_max=t_measure, observers=[hist], seed=sim_seed + 1)
    return hist.hist / t_measure


class _HistogramObserver(Observer):
    def __init__(self, sites, values, t_total):
        self.sites = list(sites)
        self.index = {v: k for k, v in enumerate(values)}
        self.hist = np.zeros((len(self.sites), len(values) + 1))
        self.t_total = t_total
        self.elapsed = 0.0

    def advance(self, sim, dt):
        dt = min(dt, self.t_total - self.elapsed)
        for a, i in enumerate(self.sites):
            self.hist[a, self.index.get(sim.at(i), -1)] += dt
        self.elapsed += dt


def worker_count(n_tasks: int) -> int:
    env = os.environ.get("BM_THREADS")
    cap = int(env) if env and env.isdigit() and int(env) > 0 else 1
    return max(1, min(cap, n_tasks, os.cpu_count() or 1))


def stationarity_drift(model: ModelSpec, c: Optional[float], n_samples: int, t_burn: float,
                       t_measure: float, seed: int, sites: Optional[Sequence[int]] = None,
                       sector: Optional[int] = None, exact: Optional[Dict[int, Dict[int, float]]] = None,
                       sigmas: float = 3.0) -> DriftReport:
    """Compare replica time averages with exact marginals.

    Replicas start from the blocking measure (or from ``nu^sector``), burn in
    for ``t_burn`` and then accumulate occupation histograms for
    ``t_measure``.  ``exact`` maps site to pmf; by default the product
    marginals are used, or the sector marginals from the exact oracle when
    ``sector`` is given.  Replicas are independent, so the standard error of
    each site mean comes from their spread.
    """
    from .measures import site_law
    lat = model.lattice
    if sites is None:
        sites = list(lat.sites()) if lat.is_finite else list(range(-5, 6))
    sites = list(sites)
    if exact is None:
        if sector is not None:
            from .verify.identities import sector_marginals
            p1 = sector_marginals(model.p, sector, sites)
            exact = {i: {0: 1 - p1[i], 1: p1[i]} for i in sites}
        else:
            exact = {}
            for i in sites:
                law = site_law(model, c, i)
                exact[i] = {int(v): float(w) for v, w in zip(law.values, law.pmf_table) if w > 1e-15}
    values = sorted({v for d in exact.values() for v in d})
    seeds = np.random.SeedSequence(seed).generate_state(n_samples, dtype=np.uint64)
    tasks = [(model, c, sector, sites, t_burn, t_measure, int(s), values) for s in seeds]
    workers = worker_count(n_samples)
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as ex:
            hists = list(ex.map(_replica, tasks))
    else:
        hists = [_replica(t) for t in tasks]
    H = np.stack(hists)
    vals = np.array(values + [0], dtype=float)
    means = (H[:, :, :-1] * vals[:-1]).sum(axis=2)
    exact_mean = np.array([sum(v * w for v, w in exact[i].items()) for i in sites])
    emp = means.mean(axis=0)
    se = means.std(axis=0, ddof=1) / math.sqrt(n_samples) if n_samples > 1 else np.full(len(sites), np.nan)
    se = np.maximum(se, 1e-12)
    z = (emp - exact_mean) / se
    ex_tab = np.array([[exact[i].get(v, 0.0) for v in values] for i in sites])
    tv = 0.5 * (np.abs(H[:, :, :-1].mean(axis=0) - ex_tab).sum(axis=1) + H[:, :, -1].mean(axis=0))
    thr = familywise_threshold(len(sites), sigmas)
    return DriftReport(sites, exact_mean.tolist(), emp.tolist(), se.tolist(), z.tolist(), tv.tolist(),
                       thr, bool(np.all(np.abs(z) < thr)), n_samples)
