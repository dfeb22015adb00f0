"""Product blocking measures, their single-site marginals and the discrete Gaussian sector law.

Everything is computed in the log domain.  Infinite sums (partition
functions over an infinite alphabet, products over infinitely many sites)
are truncated with an explicit bound on what was dropped.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .logmath import adaptive_gaussian_series, log1pexp, logsumexp
from .model import (INF, DomainError, IncompatibleVolumeError, ModelError, ModelSpec,
                    finite)
from .state import Configuration, conserved_n

TAIL_TARGET = 1e-17


class SamplingError(RuntimeError):
    def __init__(self, msg, acceptance_rate=None, tries=0):
        super().__init__(msg)
        self.acceptance_rate = acceptance_rate
        self.tries = tries


# -- generalized factorial -------------------------------------------------------

def log_f_factorial(model: ModelSpec, z: int) -> float:
    """``ln f(z)!`` with ``f(z)! = f(z) f(z-1)!`` and ``f(0)! = 1``."""
    if z not in model.occupancy:
        raise DomainError(f"occupancy {z} outside I")
    tab = model._cache.setdefault("logfact", {"pos": [0.0], "neg": [0.0]})
    if z >= 0:
        pos = tab["pos"]
        while len(pos) <= z:
            k = len(pos)
            fk = model.f(k)
            if fk <= 0.0:
                raise DomainError(f"f({k}) = 0 makes f({z})! vanish")
            pos.append(pos[-1] + math.log(fk))
        return pos[z]
    neg = tab["neg"]
    while len(neg) <= -z:
        k = len(neg)
        fy = model.f(1 - k)
        if fy <= 0.0:
            raise DomainError(f"f({1 - k}) = 0 in the denominator of f({z})!")
        neg.append(neg[-1] - math.log(fy))
    return neg[-z]


def f_factorial(model: ModelSpec, z: int) -> float:
    return math.exp(log_f_factorial(model, z))


# -- single-site law ---------------------------------------------------------------

class MarginalLaw:
    """The single-site law ``mu^theta(z) = e^{theta z} / (Z(theta) f(z)!)``.

    For an infinite alphabet the support table is grown until the dropped
    mass is certified below ``tol`` (relative to the partition function),
    using that the term ratio ``e^theta / f(z+1)`` is non-increasing in ``z``.
    The dropped mass is kept in :attr:`tail`.
    """

    def __init__(self, model: ModelSpec, theta: float, site: Optional[int] = None,
                 tol: float = TAIL_TARGET, max_support: int = 2_000_000):
        tmin, tmax = model.theta_bounds()
        if not (tmin < theta < tmax) or math.isnan(theta):
            raise DomainError(f"theta = {theta!r} outside ({tmin}, {tmax}); the partition sum diverges")
        self.model = model
        self.theta = float(theta)
        self.site = site
        occ = model.occupancy
        lo = hi = 0
        logw = {0: self._logw(0)}
        acc = logw[0]

        up_done = finite(occ.omega_max)
        down_done = finite(occ.omega_min)
        if up_done:
            for y in range(1, int(occ.omega_max) + 1):
                logw[y] = self._logw(y)
            hi = int(occ.omega_max)
        if down_done:
            for y in range(int(occ.omega_min), 0):
                logw[y] = self._logw(y)
            lo = int(occ.omega_min)
        acc = logsumexp(logw.values())
        tail_up = tail_down = 0.0
        chunk = 16
        while not (up_done and down_done):
            if hi - lo > max_support:
                raise DomainError(f"support for theta = {theta} exceeds {max_support} values")
            if not up_done:
                new = [self._logw(y) for y in range(hi + 1, hi + 1 + chunk)]
                for k, v in enumerate(new):
                    logw[hi + 1 + k] = v
                hi += chunk
                acc = logsumexp([acc] + new)
                log_rho = self.theta - math.log(model.f(hi + 1))
                if log_rho < 0:
                    tail_up = math.exp(logw[hi] - acc + log_rho - _log1mexp(log_rho))
                    up_done = tail_up < tol / 2
            if not down_done:
                new = [self._logw(y) for y in range(lo - chunk, lo)]
                for k, v in enumerate(new):
                    logw[lo - chunk + k] = v
                lo -= chunk
                acc = logsumexp([acc] + new)
                fl = model.f(lo)
                log_sig = (math.log(fl) if fl > 0 else -INF) - self.theta
                if log_sig < 0:
                    tail_down = math.exp(logw[lo] - acc + log_sig - _log1mexp(log_sig)) if fl > 0 else 0.0
                    down_done = tail_down < tol / 2
            chunk = min(2 * chunk, 1 << 16)

        self.values = np.arange(lo, hi + 1, dtype=np.int64)
        lw = np.array([logw[y] for y in range(lo, hi + 1)])
        self.log_Z = logsumexp(lw.tolist())
        self.tail = tail_up + tail_down
        self.log_pmf_table = lw - self.log_Z
        self.pmf_table = np.exp(self.log_pmf_table)
        self._cdf = None

    def _logw(self, y: int) -> float:
        return self.theta * y - log_f_factorial(self.model, y)

    @property
    def partition(self) -> float:
        return math.exp(self.log_Z)

    def log_pmf(self, z: int) -> float:
        if z not in self.model.occupancy:
            raise DomainError(f"occupancy {z} outside I")
        lo = int(self.values[0])
        if lo <= z <= int(self.values[-1]):
            return float(self.log_pmf_table[z - lo])
        return self._logw(z) - self.log_Z

    def pmf(self, z: int) -> float:
        return math.exp(self.log_pmf(z))

    def log_pmf_forms(self, z: int) -> Tuple[Optional[float], Optional[float]]:
        """The marginal written relative to ``omega_min`` and to ``omega_max``.

        Either entry is ``None`` when the corresponding bound is infinite.
        """
        occ, th = self.model.occupancy, self.theta
        out = []
        for ref, sign in ((occ.omega_min, 1.0), (occ.omega_max, -1.0)):
            if not finite(ref):
                out.append(None)
                continue
            ref = int(ref)
            if sign > 0:
                terms = [th * (y - ref) - log_f_factorial(self.model, int(y)) for y in self.values]
                num = th * (z - ref)
            else:
                terms = [-th * (ref - y) - log_f_factorial(self.model, int(y)) for y in self.values]
                num = -th * (ref - z)
            out.append(num - log_f_factorial(self.model, z) - logsumexp(terms))
        return out[0], out[1]

    def mean(self) -> float:
        return float(np.dot(self.values, self.pmf_table))

    def sample(self, rng: np.random.Generator, size=None):
        """Inverse-CDF draws; the certified tail mass is never returned."""
        if self._cdf is None:
            self._cdf = np.cumsum(self.pmf_table)
        u = rng.random(size) * self._cdf[-1]
        idx = np.searchsorted(self._cdf, u, side="right")
        idx = np.minimum(idx, len(self.values) - 1)
        out = self.values[idx]
        return int(out) if size is None else out


def _log1mexp(x: float) -> float:
    from .logmath import log1mexp
    return log1mexp(x)


def marginal_law(model: ModelSpec, theta: float) -> MarginalLaw:
    """Cached :class:`MarginalLaw` for ``theta``."""
    cache = model._cache.setdefault("laws", {})
    law = cache.get(theta)
    if law is None:
        law = cache[theta] = MarginalLaw(model, theta)
    return law


def partition(model: ModelSpec, theta: float) -> float:
    return marginal_law(model, theta).partition


def marginal_pmf(law: MarginalLaw, z: int) -> float:
    return law.pmf(z)


def sample_marginal(law: MarginalLaw, rng: np.random.Generator) -> int:
    return law.sample(rng)


# -- theta sequence ---------------------------------------------------------------

def _anchor(model: ModelSpec, c: Optional[float]) -> float:
    c = model.c if c is None else c
    if c is None:
        raise ModelError("the blocking measure needs an anchor c")
    if model.c is not None and not model.lattice.doubly_infinite and abs(c - model.c) > 1e-12 * max(1, abs(c)):
        raise IncompatibleVolumeError(f"reservoirs of this model are tied to c = {model.c!r}, got {c!r}")
    return float(c)


def theta_sequence(model: ModelSpec, c: Optional[float], i: int) -> float:
    """``theta_i = c + i (ln p - ln q)``, checked against the theta bounds."""
    if i not in model.lattice:
        raise IncompatibleVolumeError(f"site {i} is not in the lattice")
    c = model.c if c is None else c
    th = model.theta(i, c)
    tmin, tmax = model.theta_bounds()
    if not tmin < th < tmax:
        raise IncompatibleVolumeError(f"theta_{i} = {th!r} outside ({tmin}, {tmax})")
    return th


def half_line_theta(model: ModelSpec, i: int) -> float:
    """``theta_i = theta_max + (i - 1)(ln p - ln q)`` for the half line ending at 0."""
    _, tmax = model.theta_bounds()
    if not finite(tmax):
        raise ModelError("half-line theta sequence needs a finite theta_max")
    return tmax + (i - 1) * model.log_ratio


def site_law(model: ModelSpec, c: Optional[float], i: int) -> MarginalLaw:
    return marginal_law(model, theta_sequence(model, c, i))


# -- densities ----------------------------------------------------------------------

def _log_site_weight(model: ModelSpec, theta: float, y: int) -> float:
    return theta * y - log_f_factorial(model, y)


def blocking_log_density_ratio(model: ModelSpec, c: Optional[float], z: Configuration,
                               w: Configuration) -> float:
    """``ln mu^c(z) - ln mu^c(w)`` as a finite sum; normalizations cancel site by site."""
    c = _anchor(model, c)
    if z.lattice != model.lattice or w.lattice != model.lattice:
        raise DomainError("configurations belong to a different lattice")
    # an empty window still marks where the fills switch, so it spans [lo, lo - 1]
    lo = min(z.lo, w.lo)
    hi = max(z.hi, w.hi)
    terms = []
    for i in range(lo, hi + 1):
        a, b = z.at(i), w.at(i)
        if a != b:
            th = model.theta(i, c)
            terms.append(th * (a - b) - log_f_factorial(model, a) + log_f_factorial(model, b))
    return math.fsum(terms)


def _a_bound(model: ModelSpec, theta: float) -> float:
    """Upper bound on ``mu^theta{z > omega_min}``."""
    return math.exp(theta) / model.f(int(model.omega_min) + 1)


def _b_bound(model: ModelSpec, theta: float) -> float:
    """Upper bound on ``mu^theta{z < omega_max}``."""
    return math.exp(-theta) * model.f(int(model.omega_max))


def _geometric_rate(model: ModelSpec) -> float:
    return math.exp(-model.log_ratio)


def log_blocking_density(model: ModelSpec, c: Optional[float], z: Configuration,
                         tol: float = TAIL_TARGET) -> Tuple[float, float]:
    """Absolute ``ln mu^c(z)``; returns ``(value, tail)``.

    Sites outside the window contribute ``ln mu_i(fill)``; the infinitely
    many of them are summed until the rest is bounded by ``tol`` using
    ``-ln(1 - a) <= a / (1 - a)`` and the geometric decay of ``a_i``.
    """
    c = _anchor(model, c)
    lat = model.lattice
    lo, hi = z.lo, z.hi
    terms = [site_law(model, c, i).log_pmf(z.at(i)) for i in range(lo, hi + 1)]
    tail = 0.0
    g = _geometric_rate(model)
    if not finite(lat.ell):
        omin = int(model.omega_min)
        i = lo - 1
        while True:
            a = _a_bound(model, model.theta(i, c))
            if a < 0.5 and (a / (1 - a)) / (1 - g) < tol:
                tail += (a / (1 - a)) / (1 - g)
                break
            terms.append(site_law(model, c, i).log_pmf(omin))
            i -= 1
    if not finite(lat.r):
        omax = int(model.omega_max)
        i = hi + 1
        while True:
            b = _b_bound(model, model.theta(i, c))
            if b < 0.5 and (b / (1 - b)) / (1 - g) < tol:
                tail += (b / (1 - b)) / (1 - g)
                break
            terms.append(site_law(model, c, i).log_pmf(omax))
            i += 1
    return math.fsum(terms), tail


def shift_identity_rhs(model: ModelSpec, c: Optional[float], z: Configuration, j: int) -> float:
    """Predicted ``ln mu^c(tau^j z) - ln mu^c(z)``."""
    c = _anchor(model, c)
    width = model.omega_max - model.omega_min
    n = conserved_n(z)
    expo = width * (j * j - j) // 2 - n * j
    return -expo * model.log_ratio + c * width * j


# -- sector law ---------------------------------------------------------------------

@dataclass
class SectorWeight:
    """Discrete Gaussian law ``(q/p)^{(n^2+n)/2} e^{-cn} / K^c`` of ``N`` under the ASEP blocking measure."""

    p: float
    c: float = 0.0
    tol: float = TAIL_TARGET
    log_K: float = field(init=False)
    tail: float = field(init=False)
    j_max: int = field(init=False)

    def __post_init__(self):
        if not 0.5 < self.p < 1.0:
            raise DomainError(f"sector law needs 1/2 < p < 1, got {self.p}")
        a = 0.5 * self._log_qp
        self.log_K, self.tail, self.j_max = adaptive_gaussian_series(a, a - self.c, self.tol)

    @property
    def _log_qp(self) -> float:
        return math.log1p(-self.p) - math.log(self.p)

    @property
    def K(self) -> float:
        return math.exp(self.log_K)

    def log_weight(self, n: int) -> float:
        return 0.5 * (n * n + n) * self._log_qp - self.c * n - self.log_K

    def weight(self, n: int) -> float:
        return math.exp(self.log_weight(n))

    def table(self, ns: Iterable[int]) -> List[Tuple[int, float]]:
        return [(n, self.weight(n)) for n in ns]


def sector_weight(sw: SectorWeight, n: int) -> float:
    return sw.weight(n)


# -- samplers -------------------------------------------------------------------------

def blocking_window(model: ModelSpec, c: Optional[float], tail_eps: float) -> Tuple[int, int]:
    """Smallest window outside which any deviation has probability below ``tail_eps``.

    The budget is split equally between the two sides when both are infinite.
    """
    c = _anchor(model, c)
    if not tail_eps > 0:
        raise DomainError("tail_eps must be positive")
    lat = model.lattice
    sides = (not finite(lat.ell)) + (not finite(lat.r))
    eps = tail_eps / max(sides, 1)
    g = _geometric_rate(model)
    limit = 1_000_000
    if finite(lat.ell):
        lo = int(lat.ell)
    else:
        lo = min(0, int(lat.r)) if finite(lat.r) else 0
        while _a_bound(model, model.theta(lo - 1, c)) / (1 - g) >= eps:
            lo -= 1
            if -lo > limit:
                raise DomainError("tail_eps not achievable within the window limit")
    if finite(lat.r):
        hi = int(lat.r)
    else:
        hi = max(1, int(lat.ell)) if finite(lat.ell) else 1
        while _b_bound(model, model.theta(hi + 1, c)) / (1 - g) >= eps:
            hi += 1
            if hi > limit:
                raise DomainError("tail_eps not achievable within the window limit")
    return lo, hi


def sample_blocking_array(model: ModelSpec, c: Optional[float], size: int, rng: np.random.Generator,
                          tail_eps: float = 1e-12) -> Tuple[int, np.ndarray]:
    """``size`` independent draws from ``mu^c``, as ``(lo, values)`` with ``values.shape == (size, W)``."""
    c = _anchor(model, c)
    lo, hi = blocking_window(model, c, tail_eps)
    out = np.empty((size, hi - lo + 1), dtype=np.int64)
    for k, i in enumerate(range(lo, hi + 1)):
        out[:, k] = site_law(model, c, i).sample(rng, size)
    return lo, out


def conserved_n_array(model: ModelSpec, lo: int, values: np.ndarray) -> np.ndarray:
    """Row-wise ``N`` of windowed samples on the doubly infinite lattice."""
    if not model.lattice.doubly_infinite:
        raise DomainError("N is defined on the doubly infinite lattice only")
    sites = np.arange(lo, lo + values.shape[1])
    left = sites <= 0
    n_p = (values[:, left] - int(model.omega_min)).sum(axis=1)
    n_h = (int(model.omega_max) - values[:, ~left]).sum(axis=1)
    return n_h - n_p


def sample_blocking(model: ModelSpec, c: Optional[float], tail_eps: float,
                    rng: np.random.Generator) -> Configuration:
    lo, vals = sample_blocking_array(model, c, 1, rng, tail_eps)
    return Configuration(lo, tuple(int(v) for v in vals[0]), model.lattice, model.occupancy)


def sample_conserved_n(model: ModelSpec, c: Optional[float], size: int, rng: np.random.Generator,
                       tail_eps: float = 1e-12, chunk: int = 20_000) -> np.ndarray:
    """``N`` of ``size`` independent blocking-measure draws."""
    out = []
    left = size
    while left > 0:
        m = min(chunk, left)
        lo, vals = sample_blocking_array(model, c, m, rng, tail_eps)
        out.append(conserved_n_array(model, lo, vals))
        left -= m
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def sample_sector_many(model: ModelSpec, c: Optional[float], n: int, count: int,
                       rng: np.random.Generator, max_tries: int = 10_000_000,
                       tail_eps: float = 1e-12, batch: int = 1024) -> Tuple[List[Configuration], int]:
    """``count`` draws from ``nu^n`` by rejection; returns the draws and the number of proposals."""
    accepted: List[Configuration] = []
    tries = 0
    while len(accepted) < count:
        if tries >= max_tries:
            rate = len(accepted) / tries if tries else 0.0
            raise SamplingError(f"sector {n}: {len(accepted)} of {count} accepted in {tries} tries "
                                f"(acceptance rate {rate:.3g})", rate, tries)
        m = min(batch, max_tries - tries)
        lo, vals = sample_blocking_array(model, c, m, rng, tail_eps)
        ns = conserved_n_array(model, lo, vals)
        hits = np.flatnonzero(ns == n)
        need = count - len(accepted)
        if len(hits) >= need:
            tries += int(hits[need - 1]) + 1
            hits = hits[:need]
        else:
            tries += m
        for h in hits:
            accepted.append(Configuration(lo, tuple(int(v) for v in vals[h]), model.lattice,
                                          model.occupancy))
    return accepted, tries


def sample_sector(model: ModelSpec, c: Optional[float], n: int, rng: np.random.Generator,
                  max_tries: int = 1_000_000, tail_eps: float = 1e-12) -> Configuration:
    """One draw from ``nu^n = mu^c( . | N = n)`` by rejection from :func:`sample_blocking`."""
    got, _ = sample_sector_many(model, c, n, 1, rng, max_tries, tail_eps, batch=64)
    return got[0]


# -- tables ---------------------------------------------------------------------------

def marginal_table(model: ModelSpec, c: Optional[float], sites: Sequence[int],
                   values: Optional[Sequence[int]] = None) -> Tuple[List[str], List[list]]:
    """Rows ``site, theta, pmf(v) ...`` over the requested sites."""
    c = _anchor(model, c)
    laws = [(i, site_law(model, c, i)) for i in sites]
    if values is None:
        if model.occupancy.is_finite:
            values = list(model.occupancy.values())
        else:
            lo = min(int(law.values[np.argmax(law.pmf_table > 1e-12)]) for _, law in laws)
            hi = max(int(law.values[len(law.values) - 1 - np.argmax(law.pmf_table[::-1] > 1e-12)])
                     for _, law in laws)
            values = list(range(lo, hi + 1))
    header = ["site", "theta"] + [f"pmf_{v}" for v in values]
    rows = [[i, law.theta] + [law.pmf(v) for v in values] for i, law in laws]
    return header, rows


def to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_number(x) for x in row])
    return buf.getvalue()


def format_number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)
