"""Checks of the shift identity, the sector law and the ZRP/ASEP product identities.

Two independent routes to sector quantities are kept here:

* a dynamic programme over sites (Poisson-binomial convolution of the
  particle count left of the origin and the hole count right of it), and
* brute-force enumeration of all 0-1 configurations whose deviations lie
  in a window.

Both use only the Bernoulli marginals ``rho_k = e^{theta_k} / (1 + e^{theta_k})``.
"""

from __future__ import annotations

import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..logmath import log1pexp
from ..measures import (SectorWeight, blocking_log_density_ratio, log_blocking_density,
                        shift_identity_rhs)
from ..model import DomainError, ModelSpec, builtin
from ..standup import lay_down
from ..state import Configuration, conserved_n, count_particles, shift
from .report import IdentityReport


def _lr(p: float) -> float:
    return math.log(p) - math.log1p(-p)


def _rho(p: float, c: float, k: int) -> float:
    return 1.0 / (1.0 + math.exp(-(c + k * _lr(p))))


def _depth(p: float, c: float, tol: float) -> int:
    """Sites per side after which the summed deviation probability is below ``tol``."""
    g = math.exp(-_lr(p))
    M = 1
    while math.exp(abs(c) - M * _lr(p)) / (1 - g) >= tol:
        M += 1
    return M


# -- dynamic programme -------------------------------------------------------------

def _poisson_binomial(probs: Sequence[float]) -> np.ndarray:
    dist = np.array([1.0])
    for pr in probs:
        nxt = np.zeros(len(dist) + 1)
        nxt[:-1] += dist * (1.0 - pr)
        nxt[1:] += dist * pr
        dist = nxt
    return dist


def _sector_from_sides(left: np.ndarray, right: np.ndarray, n: int) -> float:
    """``sum_a P(N_p = a) P(N_h = a + n)``."""
    total = []
    for a in range(len(left)):
        b = a + n
        if 0 <= b < len(right):
            total.append(left[a] * right[b])
    return math.fsum(total)


class SectorDP:
    """Sector masses ``mu^c{N = n}`` of the ASEP blocking measure by convolution.

    ``tail`` bounds the probability that any site beyond the ``depth``
    sites kept on each side deviates from its fill.
    """

    def __init__(self, p: float, c: float = 0.0, tol: float = 1e-30):
        if not 0.5 < p < 1.0:
            raise DomainError(f"need 1/2 < p < 1, got {p}")
        self.p, self.c = p, c
        self.depth = _depth(p, c, tol)
        g = math.exp(-_lr(p))
        self.tail = 2 * math.exp(abs(c) - (self.depth + 1) * _lr(p)) / (1 - g)
        self.left_sites = list(range(0, -self.depth - 1, -1))
        self.right_sites = list(range(1, self.depth + 1))
        self.left = _poisson_binomial([_rho(p, c, k) for k in self.left_sites])
        self.right = _poisson_binomial([1 - _rho(p, c, k) for k in self.right_sites])

    def mass(self, n: int) -> float:
        return _sector_from_sides(self.left, self.right, n)

    def log_mass(self, n: int) -> float:
        return math.log(self.mass(n))

    def relative_tail(self, n: int) -> float:
        """Bound on the relative error of :meth:`mass` from the dropped sites."""
        return self.tail / self.mass(n)

    def marginal(self, n: int, site: int) -> float:
        """``nu^n(eta_site = 1)``."""
        p, c = self.p, self.c
        r = _rho(p, c, site)
        if site <= 0:
            probs = [_rho(p, c, k) for k in self.left_sites if k != site]
            left = _poisson_binomial(probs)
            joint = r * _sector_from_sides(left, self.right, n + 1)
        else:
            probs = [1 - _rho(p, c, k) for k in self.right_sites if k != site]
            right = _poisson_binomial(probs)
            joint = r * _sector_from_sides(self.left, right, n)
        return joint / self.mass(n)


# -- enumeration ------------------------------------------------------------------

def _side_tables(p: float, c: float, sites: Sequence[int], holes: bool):
    """All 0-1 patterns on ``sites``: counts, log weights and the bit matrix."""
    m = len(sites)
    masks = np.arange(1 << m, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(m)) & 1).astype(np.int8)
    th = np.array([c + k * _lr(p) for k in sites])
    log_one = -np.logaddexp(0.0, -th)
    log_zero = -np.logaddexp(0.0, th)
    logw = (bits * log_one + (1 - bits) * log_zero).sum(axis=1)
    count = (1 - bits).sum(axis=1) if holes else bits.sum(axis=1)
    return count, logw, bits


def enumerate_window(p: float, c: float, window: int):
    """Every 0-1 configuration with deviations in ``[-window, window]``.

    Returns ``(sites, eta, n, log_weight_in_window)``: ``eta`` has one row per
    configuration, ``n`` is its conserved quantity.
    """
    sites = list(range(-window, window + 1))
    m = len(sites)
    if m > 24:
        raise DomainError("window too large for enumeration")
    masks = np.arange(1 << m, dtype=np.int64)
    eta = ((masks[:, None] >> np.arange(m)) & 1).astype(np.int8)
    s = np.array(sites)
    th = c + s * _lr(p)
    logw = (eta * -np.logaddexp(0.0, -th) + (1 - eta) * -np.logaddexp(0.0, th)).sum(axis=1)
    n = (1 - eta[:, s > 0]).sum(axis=1) - eta[:, s <= 0].sum(axis=1)
    return sites, eta, n, logw


def sector_marginals(p: float, n: int, sites: Sequence[int], c: float = 0.0,
                     window: int = 16, method: str = "enumerate") -> Dict[int, float]:
    """``nu^n(eta_i = 1)`` for each requested site.

    ``method="enumerate"`` sums over all patterns with deviations in
    ``[-window, window]``, one side at a time; ``"dp"`` uses :class:`SectorDP`.
    """
    if method == "dp":
        dp = SectorDP(p, c)
        return {i: dp.marginal(n, i) for i in sites}
    left_sites = list(range(-window, 1))
    right_sites = list(range(1, window + 1))
    a, lwa, ba = _side_tables(p, c, left_sites, holes=False)
    b, lwb, bb = _side_tables(p, c, right_sites, holes=True)
    shift_ = max(lwa.max(), lwb.max())
    wa, wb = np.exp(lwa - lwa.max()), np.exp(lwb - lwb.max())
    A = np.bincount(a, weights=wa, minlength=len(left_sites) + 1)
    B = np.bincount(b, weights=wb, minlength=len(right_sites) + 1)
    del shift_

    def pair(Avec, Bvec):
        tot = []
        for k in range(len(Avec)):
            if 0 <= k + n < len(Bvec):
                tot.append(Avec[k] * Bvec[k + n])
        return math.fsum(tot)

    Z = pair(A, B)
    out = {}
    for i in sites:
        if i <= 0:
            if i < -window:
                out[i] = 0.0
                continue
            col = left_sites.index(i)
            Ai = np.bincount(a, weights=wa * ba[:, col], minlength=len(A))
            out[i] = pair(Ai, B) / Z
        else:
            if i > window:
                out[i] = 1.0
                continue
            col = right_sites.index(i)
            Bi = np.bincount(b, weights=wb * bb[:, col], minlength=len(B))
            out[i] = pair(A, Bi) / Z
    return out


# -- identity checks ----------------------------------------------------------------

def _asep(p: float) -> ModelSpec:
    return builtin("asep", p)


def check_shift_identity(model: ModelSpec, c: float, z: Configuration, j: int,
                         eps: float = 1e-12) -> IdentityReport:
    lhs = blocking_log_density_ratio(model, c, shift(z, j), z)
    rhs = shift_identity_rhs(model, c, z, j)
    return IdentityReport("shift-identity", {"model": model.name, "c": c, "j": j, "N": conserved_n(z)},
                          abs(lhs - rhs), 0.0, eps, {"lhs": lhs, "rhs": rhs, "z": z.to_text()})


def check_sector_law(p: float, c: float, n_range: Iterable[int], eps: float = 1e-12) -> IdentityReport:
    """Sector masses by convolution against the discrete Gaussian, in log units."""
    dp = SectorDP(p, c)
    sw = SectorWeight(p, c)
    worst, tail = 0.0, 0.0
    rows = []
    for n in n_range:
        a, b = dp.log_mass(n), sw.log_weight(n)
        worst = max(worst, abs(a - b))
        tail = max(tail, dp.relative_tail(n))
        rows.append([n, a, b])
    return IdentityReport("sector-law", {"p": p, "c": c}, worst, tail + sw.tail, eps,
                          {"rows": rows, "K": sw.K})


def check_mucn(p: float, c: float, n: int, j: int, eps: float = 1e-12) -> IdentityReport:
    """``ln mu{N = n-j} - ln mu{N = n}`` against ``((j^2-j)/2 - nj) ln(q/p) + cj``."""
    dp = SectorDP(p, c)
    lhs = dp.log_mass(n - j) - dp.log_mass(n)
    rhs = -((j * j - j) / 2 - n * j) * _lr(p) + c * j
    tail = dp.relative_tail(n) + dp.relative_tail(n - j)
    return IdentityReport("sector-shift", {"p": p, "c": c, "n": n, "j": j}, abs(lhs - rhs), tail, eps,
                          {"lhs": lhs, "rhs": rhs})


def log_nu(p: float, c: float, z: Configuration, dp: Optional[SectorDP] = None) -> Tuple[float, float]:
    """``ln nu^{N(z)}(z)`` computed from ``mu^c``; returns ``(value, tail)``."""
    model = _asep(p)
    dp = dp or SectorDP(p, c)
    n = conserved_n(z)
    lm, t = log_blocking_density(model, c, z)
    return lm - dp.log_mass(n), t + dp.relative_tail(n)


def check_nuinv(p: float, c: float, z: Configuration, j: int, eps: float = 1e-12) -> IdentityReport:
    dp = SectorDP(p, c)
    a, ta = log_nu(p, c, shift(z, j), dp)
    b, tb = log_nu(p, c, z, dp)
    return IdentityReport("conditional-shift", {"p": p, "c": c, "j": j, "N": conserved_n(z)},
                          abs(a - b), ta + tb, eps, {"lhs": a, "rhs": b})


def check_c_independence(p: float, c1: float, c2: float, z: Configuration,
                         eps: float = 1e-12) -> IdentityReport:
    a, ta = log_nu(p, c1, z)
    b, tb = log_nu(p, c2, z)
    return IdentityReport("conditional-c-independence", {"p": p, "c1": c1, "c2": c2},
                          abs(a - b), ta + tb, eps, {"c1": a, "c2": b})


def check_sector_decomposition(p: float, c: float, n_range: Optional[Iterable[int]] = None,
                               window: int = 6, eps: float = 1e-10) -> IdentityReport:
    """``mu^c(z) = nu^n(z) pi^c{N=n}`` on every configuration inside the window.

    The left side is the product measure at ``c``.  On the right, ``nu^n``
    is computed from the product measure at ``c + 1`` divided by its sector
    mass (convolution), and ``pi^c{N = n}`` is the discrete Gaussian.
    """
    c_ref = c + 1.0
    sites, eta, ns, logw = enumerate_window(p, c, window)
    _, _, _, logw_ref = enumerate_window(p, c_ref, window)
    model = _asep(p)
    ground = Configuration(-window, tuple([0] * (window + 1) + [1] * window), model.lattice,
                           model.occupancy)
    # mass of the fills outside the window, once per anchor
    out_c, t_c = log_blocking_density(model, c, ground)
    out_ref, t_ref = log_blocking_density(model, c_ref, ground)
    in_c = math.fsum(-log1pexp(c + k * _lr(p)) if k <= 0 else -log1pexp(-(c + k * _lr(p)))
                     for k in sites)
    in_ref = math.fsum(-log1pexp(c_ref + k * _lr(p)) if k <= 0 else -log1pexp(-(c_ref + k * _lr(p)))
                       for k in sites)
    outside_c, outside_ref = out_c - in_c, out_ref - in_ref

    sw = SectorWeight(p, c)
    dp = SectorDP(p, c_ref)
    if n_range is None:
        n_range = range(-window, window + 1)
    n_set = sorted(set(n_range))
    mask = np.isin(ns, n_set)
    lhs = logw[mask] + outside_c
    ref_mass = {n: dp.log_mass(n) for n in n_set}
    log_pi = {n: sw.log_weight(n) for n in n_set}
    rhs = (logw_ref[mask] + outside_ref - np.array([ref_mass[n] for n in ns[mask]])
           + np.array([log_pi[n] for n in ns[mask]]))
    res = np.abs(lhs - rhs)
    k = int(np.argmax(res))
    tail = t_c + t_ref + max(dp.relative_tail(n) for n in n_set) + sw.tail
    norm = math.fsum(sw.weight(n) for n in range(-sw.j_max - 1, sw.j_max + 1))
    return IdentityReport(
        "decomposition", {"p": p, "c": c, "window": window, "n_range": [n_set[0], n_set[-1]]},
        float(res[k]), tail, eps,
        {"states": int(mask.sum()), "worst_state": eta[mask][k].tolist(),
         "worst_n": int(ns[mask][k]), "weights_sum": norm, "c_ref": c_ref})


# -- ZRP / ASEP identities ------------------------------------------------------------

def _zrp(p: float) -> ModelSpec:
    return builtin("zrp_rate1", p, r=0)


def check_meq(p: float, c: float, z: Configuration, n: int, eps: float = 1e-9) -> IdentityReport:
    """``ln mu(z) = ln K^c + ((n^2+n)/2) ln(p/q) + cn + ln pi^c(L^n z)``."""
    zrp, asep = _zrp(p), _asep(p)
    if z.lattice != zrp.lattice or z.occupancy != zrp.occupancy:
        raise DomainError("meq needs a half-line configuration")
    lhs, t1 = log_blocking_density(zrp, None, z)
    a = lay_down(z, n)
    lpi, t2 = log_blocking_density(asep, c, a)
    sw = SectorWeight(p, c)
    rhs = sw.log_K + 0.5 * (n * n + n) * _lr(p) + c * n + lpi
    return IdentityReport("meq", {"p": p, "c": c, "n": n, "z": z.to_text()}, abs(lhs - rhs),
                          t1 + t2 + sw.tail, eps, {"lhs": lhs, "rhs": rhs})


def _geom_tail(first: float, ratio: float) -> float:
    return first / (1.0 - ratio)


def combi_sides(p: float, c: float, z: Configuration, tol: float = 1e-18) -> Tuple[float, float, float]:
    """Both sides of the expanded product identity in log form, with ``n = N_p(z)``.

    Returns ``(lhs, rhs, tail)``.  The left side runs over sites ``i <= 0``
    with Geometric marginals; on the right the empty sites ``k <= 0``, the
    particles at ``r_m`` (``r_0 = 1``) and the empty sites between
    consecutive particles are multiplied out.
    """
    lr = _lr(p)
    g = math.exp(-lr)
    n = count_particles(z)
    depth = -z.lo + 1 if z.values else 0

    lhs = []
    i = 0
    while True:
        x = math.exp((i - 1) * lr)
        if i < -depth and x < 0.5 and _geom_tail(x / (1 - x), g) < tol:
            t_lhs = _geom_tail(x / (1 - x), g)
            break
        lhs.append((i - 1) * z.at(i) * lr + math.log1p(-x))
        i -= 1

    rhs = [0.5 * (n * n + n) * lr + c * n]
    k = 0
    while True:
        x = math.exp(c + k * lr)
        if _geom_tail(x, g) < tol:
            t_empty = _geom_tail(x, g)
            break
        rhs.append(-log1pexp(c + k * lr))
        k -= 1
    r = 1
    m = 0
    while True:
        x = math.exp(-c - r * lr)
        if m > depth and _geom_tail(x, g) < tol:
            t_part = _geom_tail(x, g)
            break
        rhs.append(-log1pexp(-c - r * lr))
        nxt = r + z.at(-m) + 1 if -m >= z.lo else r + 1
        for kk in range(r + 1, nxt):
            rhs.append(-log1pexp(c + kk * lr))
        r = nxt
        m += 1
    sw = SectorWeight(p, c)
    return math.fsum(lhs), sw.log_K + math.fsum(rhs), t_lhs + t_empty + t_part + sw.tail


def check_combi(p: float, c: float, z: Configuration, eps: float = 1e-9) -> IdentityReport:
    lhs, rhs, tail = combi_sides(p, c, z)
    return IdentityReport("combi", {"p": p, "c": c, "z": z.to_text(), "n": count_particles(z)},
                          abs(lhs - rhs), tail, eps, {"lhs": lhs, "rhs": rhs})


def check_combi_ground(p: float, c: float, eps: float = 1e-10, tol: float = 1e-18) -> IdentityReport:
    """The all-empty special case, evaluated from its own three products."""
    lr = _lr(p)
    g = math.exp(-lr)
    lhs, rhs = [], []
    i = 0
    while True:
        x = math.exp(-(i + 1) * lr)
        if x < 0.5 and _geom_tail(x / (1 - x), g) < tol:
            t1 = _geom_tail(x / (1 - x), g)
            break
        lhs.append(math.log1p(-x))
        i += 1
    k = 0
    while True:
        x = math.exp(c - k * lr)
        if _geom_tail(x, g) < tol:
            t2 = _geom_tail(x, g)
            break
        rhs.append(-log1pexp(c - k * lr))
        k += 1
    i = 0
    while True:
        x = math.exp(-c - (i + 1) * lr)
        if _geom_tail(x, g) < tol:
            t3 = _geom_tail(x, g)
            break
        rhs.append(-log1pexp(-c - (i + 1) * lr))
        i += 1
    sw = SectorWeight(p, c)
    a, b = math.fsum(lhs), sw.log_K + math.fsum(rhs)
    return IdentityReport("combi-ground", {"p": p, "c": c}, abs(a - b), t1 + t2 + t3 + sw.tail, eps,
                          {"lhs": a, "rhs": b})


def random_half_line(rng: np.random.Generator, depth: int = 8, mean: float = 1.0) -> Configuration:
    """A half-line configuration with Geometric stacks on the last ``depth`` sites."""
    from ..standup import HALF_LINE, STACKS
    d = int(rng.integers(0, depth + 1))
    if d == 0:
        return Configuration(1, (), HALF_LINE, STACKS)
    vals = rng.geometric(1.0 / (1.0 + mean), size=d) - 1
    return Configuration(-(d - 1), tuple(int(v) for v in vals), HALF_LINE, STACKS)
