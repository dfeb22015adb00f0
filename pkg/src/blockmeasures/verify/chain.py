"""Exhaustive finite-chain oracle for models on a finite lattice.

States are all occupancy vectors over ``[ell, r]`` with values in the
alphabet (or a cap range).  Each move kind (a bond jump or a reservoir
event) is stored as a vector of rates and target indices over all states,
so checks reduce to array arithmetic.  Moves that would leave the cap
range are dropped; the truncated chain is again reversible with respect to
the restricted measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..measures import site_law
from ..model import DomainError, ModelSpec, finite
from .report import IdentityReport

Cap = Union[None, int, Tuple[int, int]]


class ChainTooLarge(RuntimeError):
    pass


@dataclass
class MoveKind:
    name: str
    group: str
    reverse: str
    src: np.ndarray
    dst: np.ndarray
    rate: np.ndarray


@dataclass
class FiniteChain:
    model: ModelSpec
    sites: List[int]
    alphabet: Tuple[int, int]
    states: np.ndarray
    moves: Dict[str, MoveKind]
    log_measure: np.ndarray
    capped: bool
    interior: np.ndarray
    _Q: Optional[sp.csr_matrix] = field(default=None, repr=False)

    @property
    def n_states(self) -> int:
        return len(self.states)

    def index(self, config) -> int:
        lo = self.alphabet[0]
        base = self.alphabet[1] - lo + 1
        k = 0
        for v in config:
            k = k * base + (int(v) - lo)
        return k

    def generator(self) -> sp.csr_matrix:
        """Sparse generator ``Q`` with ``Q[s, t] = rate(s -> t)`` and zero row sums."""
        if self._Q is None:
            S = self.n_states
            rows, cols, vals = [], [], []
            for mk in self.moves.values():
                keep = mk.rate > 0
                rows.append(mk.src[keep])
                cols.append(mk.dst[keep])
                vals.append(mk.rate[keep])
            r = np.concatenate(rows)
            c = np.concatenate(cols)
            v = np.concatenate(vals)
            off = sp.csr_matrix((v, (r, c)), shape=(S, S))
            out = np.asarray(off.sum(axis=1)).ravel()
            self._Q = (off - sp.diags(out)).tocsr()
        return self._Q

    def out_rates(self) -> np.ndarray:
        out = np.zeros(self.n_states)
        for mk in self.moves.values():
            out += mk.rate
        return out

    def normalized_measure(self) -> np.ndarray:
        lm = self.log_measure - self.log_measure.max()
        w = np.exp(lm)
        return w / math.fsum(w)


def _resolve_cap(model: ModelSpec, cap: Cap) -> Tuple[Tuple[int, int], bool]:
    occ = model.occupancy
    if cap is None:
        if not occ.is_finite:
            raise DomainError("infinite alphabet needs an occupancy cap")
        return (int(occ.omega_min), int(occ.omega_max)), False
    if isinstance(cap, int):
        lo = int(occ.omega_min) if finite(occ.omega_min) else -cap
        hi = min(cap, occ.omega_max) if finite(occ.omega_max) else cap
        rng = (lo, int(hi))
    else:
        rng = (max(int(cap[0]), occ.omega_min), min(int(cap[1]), occ.omega_max))
        rng = (int(rng[0]), int(rng[1]))
    capped = rng != (occ.omega_min, occ.omega_max)
    return rng, capped


def _table(fn: Callable[[int, int], float], lo: int, hi: int) -> np.ndarray:
    vals = range(lo, hi + 1)
    return np.array([[fn(y, z) for z in vals] for y in vals])


def enumerate_chain(spec: ModelSpec, occupancy_cap: Cap = None, max_states: int = 10**6,
                    c: Optional[float] = None) -> FiniteChain:
    """Enumerate the chain on the finite lattice of ``spec``.

    ``occupancy_cap`` is an upper cap (an integer, applied symmetrically when
    the alphabet is unbounded below) or an explicit ``(lo, hi)`` range.
    """
    lat = spec.lattice
    if not lat.is_finite:
        raise DomainError("enumeration needs a finite lattice")
    (lo, hi), capped = _resolve_cap(spec, occupancy_cap)
    sites = list(range(int(lat.ell), int(lat.r) + 1))
    m = len(sites)
    base = hi - lo + 1
    S = base ** m
    if S > max_states:
        raise ChainTooLarge(f"{S} states exceed the limit {max_states}")
    idx = np.arange(S, dtype=np.int64)
    states = np.empty((S, m), dtype=np.int64)
    rem = idx.copy()
    for k in range(m - 1, -1, -1):
        states[:, k] = rem % base + lo
        rem //= base
    stride = base ** np.arange(m - 1, -1, -1, dtype=np.int64)

    P = _table(spec.bulk_rate_p, lo, hi)
    Qt = _table(spec.bulk_rate_q, lo, hi)
    moves: Dict[str, MoveKind] = {}

    def add(name, group, reverse, rate, delta, ok):
        rate = np.where(ok, rate, 0.0)
        dst = np.where(ok, idx + delta, idx)
        moves[name] = MoveKind(name, group, reverse, idx, dst, rate)

    for k in range(m - 1):
        y, z = states[:, k] - lo, states[:, k + 1] - lo
        ok_r = (states[:, k] > lo) & (states[:, k + 1] < hi)
        ok_l = (states[:, k + 1] > lo) & (states[:, k] < hi)
        add(f"p{k}", "bulk", f"q{k}", P[y, z], stride[k + 1] - stride[k], ok_r)
        add(f"q{k}", "bulk", f"p{k}", Qt[y, z], stride[k] - stride[k + 1], ok_l)
    first, last = states[:, 0], states[:, -1]
    vec = np.vectorize
    add("left_in", "left", "left_out", vec(spec.p_ell, otypes=[float])(first), stride[0], first < hi)
    add("left_out", "left", "left_in", vec(spec.q_ell, otypes=[float])(first), -stride[0], first > lo)
    add("right_out", "right", "right_in", vec(spec.p_r, otypes=[float])(last), -stride[-1], last > lo)
    add("right_in", "right", "right_out", vec(spec.q_r, otypes=[float])(last), stride[-1], last < hi)

    cval = spec.c if c is None else c
    logm = np.zeros(S)
    for k, i in enumerate(sites):
        law = site_law(spec, cval, i)
        tab = np.array([law.log_pmf(v) for v in range(lo, hi + 1)])
        logm += tab[states[:, k] - lo]

    occ = spec.occupancy
    at_cap = np.zeros(S, dtype=bool)
    if capped:
        if lo > occ.omega_min:
            at_cap |= (states == lo).any(axis=1)
        if hi < occ.omega_max:
            at_cap |= (states == hi).any(axis=1)
    return FiniteChain(spec, sites, (lo, hi), states, moves, logm, capped, ~at_cap)


def check_detailed_balance(chain: FiniteChain, log_measure: Optional[np.ndarray] = None,
                           eps: float = 1e-12) -> IdentityReport:
    """``max |ln mu(s) + ln r(s->t) - ln mu(t) - ln r(t->s)|`` over all positive-rate pairs.

    Pairs with a positive forward rate and a zero reverse rate are counted
    separately as structural violations and make the check fail.
    """
    lm = chain.log_measure if log_measure is None else np.asarray(log_measure)
    per_group = {"bulk": 0.0, "left": 0.0, "right": 0.0}
    pairs = {"bulk": 0, "left": 0, "right": 0}
    structural = []
    worst = None
    for mk in chain.moves.values():
        pos = np.flatnonzero(mk.rate > 0)
        if len(pos) == 0:
            continue
        rev = chain.moves[mk.reverse]
        t = mk.dst[pos]
        back = rev.rate[t]
        bad = back <= 0
        if bad.any():
            for s in pos[bad][:5]:
                structural.append({"move": mk.name, "state": chain.states[s].tolist()})
        good = ~bad
        s, t, back = pos[good], t[good], back[good]
        res = np.abs(lm[s] + np.log(mk.rate[s]) - lm[t] - np.log(back))
        pairs[mk.group] += len(s)
        if len(res):
            k = int(np.argmax(res))
            if res[k] > per_group[mk.group]:
                per_group[mk.group] = float(res[k])
                if worst is None or res[k] > worst[0]:
                    worst = (float(res[k]), mk.name, chain.states[s[k]].tolist())
    residual = max(per_group.values())
    if structural:
        residual = math.inf
    return IdentityReport(
        "detailed-balance",
        {"model": chain.model.name, "sites": len(chain.sites), "alphabet": list(chain.alphabet),
         "states": chain.n_states},
        residual, 0.0, eps,
        {"per_group": per_group, "pairs": pairs, "structural_violations": structural,
         "worst": worst})


def check_stationarity(chain: FiniteChain, log_measure: Optional[np.ndarray] = None,
                       eps: float = 1e-10, interior_only: Optional[bool] = None) -> IdentityReport:
    """Per-state net flux relative to the total flux through the state.

    Computed in ratio form: ``sum_t e^{ln mu(t) - ln mu(s)} r(t->s) - out(s)``
    over ``max(in, out)``, so no state's weight underflows.
    """
    lm = chain.log_measure if log_measure is None else np.asarray(log_measure)
    S = chain.n_states
    inflow = np.zeros(S)
    out = np.zeros(S)
    for mk in chain.moves.values():
        pos = np.flatnonzero(mk.rate > 0)
        t = mk.dst[pos]
        out[pos] += mk.rate[pos]
        np.add.at(inflow, t, np.exp(lm[pos] - lm[t]) * mk.rate[pos])
    scale = np.maximum(np.maximum(inflow, out), 1e-300)
    rel = np.abs(inflow - out) / scale
    if interior_only is None:
        interior_only = chain.capped
    mask = chain.interior if interior_only else np.ones(S, dtype=bool)
    residual = float(rel[mask].max()) if mask.any() else 0.0
    return IdentityReport(
        "stationarity", {"model": chain.model.name, "states": S, "interior_only": bool(interior_only)},
        residual, 0.0, eps,
        {"all_states_residual": float(rel.max()), "checked_states": int(mask.sum())})


def stationary_gth(Q) -> np.ndarray:
    """Stationary vector by Grassmann-Taksar-Heyman elimination (no subtractions)."""
    A = np.array(Q.toarray() if sp.issparse(Q) else Q, dtype=float)
    n = len(A)
    np.fill_diagonal(A, 0.0)
    for k in range(n - 1, 0, -1):
        s = A[k, :k].sum()
        if s <= 0:
            raise ValueError("chain is not irreducible")
        A[:k, k] /= s
        A[:k, :k] += np.outer(A[:k, k], A[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ A[:k, k]
    return pi / pi.sum()


def stationary_sparse(Q) -> np.ndarray:
    """Solve ``pi Q = 0``, ``sum(pi) = 1`` by replacing one balance equation."""
    A = sp.csr_matrix(Q).T.tolil()
    n = A.shape[0]
    A[n - 1, :] = np.ones(n)
    b = np.zeros(n)
    b[-1] = 1.0
    pi = spla.spsolve(A.tocsc(), b)
    return pi / pi.sum()


def stationary_vector(chain: FiniteChain, method: str = "auto") -> np.ndarray:
    Q = chain.generator()
    if method == "gth" or (method == "auto" and chain.n_states <= 600):
        return stationary_gth(Q)
    return stationary_sparse(Q)


def compare_stationary(chain: FiniteChain, eps: float = 1e-10, method: str = "auto") -> IdentityReport:
    """State-by-state relative gap between the solved stationary vector and the product measure."""
    pi = stationary_vector(chain, method)
    mu = chain.normalized_measure()
    rel = np.abs(pi - mu) / mu
    k = int(np.argmax(rel))
    return IdentityReport(
        "stationary-solve", {"model": chain.model.name, "states": chain.n_states, "method": method},
        float(rel[k]), 0.0, eps, {"worst_state": chain.states[k].tolist()})
