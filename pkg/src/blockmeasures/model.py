"""Misanthrope-type model family on a one dimensional lattice.

A model fixes the lattice ``Lambda = {ell, ..., r}`` (either end may be
infinite), the single-site alphabet ``I = {omega_min, ..., omega_max}``, the
asymmetry ``p = 1 - q`` and factorized bulk rates

    p(y, z) = p * s(y, z + 1) * f(y),      q(y, z) = q * s(y + 1, z) * f(z),

together with reservoir rates at finite lattice ends.  Infinite values are
represented by ``math.inf``; everything else is a Python ``int``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

ExtInt = Union[int, float]
INF = math.inf

RateFn = Callable[[int], float]


class ModelError(ValueError):
    """Invalid model structure or parameters."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class IncompatibleVolumeError(ModelError):
    """The theta sequence leaves (theta_min, theta_max) somewhere on the lattice."""


def _is_int(x) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def _check_ext(x, name):
    if _is_int(x) or (isinstance(x, float) and math.isinf(x)):
        return int(x) if _is_int(x) else x
    raise ModelError(f"{name} must be an integer or +-inf, got {x!r}")


def finite(x: ExtInt) -> bool:
    return not (isinstance(x, float) and math.isinf(x))


@dataclass(frozen=True)
class OccupancyInterval:
    omega_min: ExtInt = 0
    omega_max: ExtInt = 1

    def __post_init__(self):
        object.__setattr__(self, "omega_min", _check_ext(self.omega_min, "omega_min"))
        object.__setattr__(self, "omega_max", _check_ext(self.omega_max, "omega_max"))
        if not (self.omega_min <= 0 < self.omega_max):
            raise ModelError("need omega_min <= 0 < omega_max")

    def __contains__(self, z) -> bool:
        return _is_int(z) and self.omega_min <= z <= self.omega_max

    @property
    def width(self) -> ExtInt:
        return self.omega_max - self.omega_min

    @property
    def is_finite(self) -> bool:
        return finite(self.omega_min) and finite(self.omega_max)

    def values(self, lo: Optional[int] = None, hi: Optional[int] = None) -> range:
        """Alphabet values in ``[lo, hi]``; both ends must end up finite."""
        a = self.omega_min if lo is None else max(self.omega_min, lo)
        b = self.omega_max if hi is None else min(self.omega_max, hi)
        if not (finite(a) and finite(b)):
            raise DomainError("infinite alphabet needs an explicit range")
        return range(int(a), int(b) + 1)


@dataclass(frozen=True)
class LatticeSpec:
    ell: ExtInt = -INF
    r: ExtInt = INF

    def __post_init__(self):
        object.__setattr__(self, "ell", _check_ext(self.ell, "ell"))
        object.__setattr__(self, "r", _check_ext(self.r, "r"))
        if not (self.ell <= 0 <= self.r):
            raise ModelError("need ell <= 0 <= r")

    def __contains__(self, i) -> bool:
        return _is_int(i) and self.ell <= i <= self.r

    @property
    def doubly_infinite(self) -> bool:
        return not finite(self.ell) and not finite(self.r)

    @property
    def is_finite(self) -> bool:
        return finite(self.ell) and finite(self.r)

    def sites(self) -> range:
        if not self.is_finite:
            raise DomainError("lattice is infinite")
        return range(int(self.ell), int(self.r) + 1)


@dataclass(frozen=True)
class RateKernel:
    """Asymmetry and the rate factors ``f`` and ``s``.

    ``f_limits`` optionally declares ``(lim_{z->-inf} f(z), lim_{z->inf} f(z))``
    exactly; without it the limits are read off at a finite horizon.
    """

    p: float
    f: Callable[[int], float]
    s: Callable[[int, int], float]
    f_limits: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if not (0.5 < self.p <= 1.0):
            raise ModelError(f"need 1/2 < p <= 1, got {self.p}")

    @property
    def q(self) -> float:
        return 1.0 - self.p


@dataclass(frozen=True)
class BoundaryRates:
    p_ell: Optional[RateFn] = None
    q_ell: Optional[RateFn] = None
    p_r: Optional[RateFn] = None
    q_r: Optional[RateFn] = None


@dataclass(frozen=True)
class Violation:
    check: str
    args: tuple
    detail: str = ""


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)
    check_range: Optional[Tuple[int, int]] = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def checks(self) -> set:
        return {v.check for v in self.violations}

    def add(self, check, *args, detail=""):
        self.violations.append(Violation(check, args, detail))

    def extend(self, other: "ValidationReport"):
        self.violations.extend(other.violations)


def _f_limit(kernel: RateKernel, direction: int, horizon: int) -> float:
    if kernel.f_limits is not None:
        return kernel.f_limits[0 if direction < 0 else 1]
    return float(kernel.f(direction * horizon))


def _theta_bounds(occ: OccupancyInterval, kernel: RateKernel, horizon: int) -> Tuple[float, float]:
    if finite(occ.omega_min):
        lo = -INF
    else:
        lim = _f_limit(kernel, -1, horizon)
        lo = math.log(lim) if lim > 0 else -INF
    if finite(occ.omega_max):
        hi = INF
    else:
        lim = _f_limit(kernel, +1, horizon)
        hi = math.log(lim) if lim > 0 else -INF
    return lo, hi


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A fully specified model.  Immutable; the rate functions must be pure.

    ``c`` anchors the theta sequence ``theta_i = c + i ln(p/q)``.  It is
    required whenever a lattice end is finite, because the reservoir rates
    are tied to it; on the doubly infinite lattice it may be left ``None``
    and passed to the measure functions instead.
    """

    name: str
    lattice: LatticeSpec
    occupancy: OccupancyInterval
    kernel: RateKernel
    boundary: BoundaryRates = BoundaryRates()
    c: Optional[float] = None
    params: Dict[str, object] = field(default_factory=dict)
    horizon: int = 10**6
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        lat, occ, b = self.lattice, self.occupancy, self.boundary
        if not finite(lat.ell) and not finite(occ.omega_min):
            raise ModelError("ell = -inf requires a finite omega_min (countable state space)")
        if not finite(lat.r) and not finite(occ.omega_max):
            raise ModelError("r = +inf requires a finite omega_max (countable state space)")
        for end, pair, side in ((lat.ell, (b.p_ell, b.q_ell), "left"), (lat.r, (b.p_r, b.q_r), "right")):
            present = [fn is not None for fn in pair]
            if finite(end) and not all(present):
                raise ModelError(f"finite {side} end needs both {side} boundary rates")
            if not finite(end) and any(present):
                raise ModelError(f"infinite {side} end takes no boundary rates")

    # -- elementary accessors -------------------------------------------------

    @property
    def p(self) -> float:
        return self.kernel.p

    @property
    def q(self) -> float:
        return self.kernel.q

    @property
    def log_ratio(self) -> float:
        """ln p - ln q, the increment of the theta sequence."""
        if self.q == 0.0:
            return INF
        return math.log(self.p) - math.log(self.q)

    @property
    def omega_min(self) -> ExtInt:
        return self.occupancy.omega_min

    @property
    def omega_max(self) -> ExtInt:
        return self.occupancy.omega_max

    def _require(self, z):
        if z not in self.occupancy:
            raise DomainError(f"occupancy {z!r} outside I = [{self.omega_min}, {self.omega_max}]")

    def f(self, z: int) -> float:
        self._require(z)
        return float(self.kernel.f(z))

    def s_ext(self, y: int, z: int) -> float:
        """``s`` extended by zero at ``omega_max + 1``."""
        if y > self.omega_max or z > self.omega_max:
            return 0.0
        return float(self.kernel.s(y, z))

    def bulk_rate_p(self, y: int, z: int) -> float:
        """Rate of a jump from a site holding ``y`` to its right neighbour holding ``z``."""
        self._require(y)
        self._require(z)
        return self.p * self.s_ext(y, z + 1) * float(self.kernel.f(y))

    def bulk_rate_q(self, y: int, z: int) -> float:
        """Rate of a jump from the right site (holding ``z``) to the left one (holding ``y``)."""
        self._require(y)
        self._require(z)
        return self.q * self.s_ext(y + 1, z) * float(self.kernel.f(z))

    def _boundary(self, name: str, z: int) -> float:
        fn = getattr(self.boundary, name)
        if fn is None:
            raise DomainError(f"model has no {name} boundary rate")
        self._require(z)
        return float(fn(z))

    def p_ell(self, z: int) -> float:
        """Injection rate from the left reservoir into site ``ell``."""
        return self._boundary("p_ell", z)

    def q_ell(self, z: int) -> float:
        """Removal rate from site ``ell`` into the left reservoir."""
        return self._boundary("q_ell", z)

    def p_r(self, z: int) -> float:
        """Removal rate from site ``r`` into the right reservoir."""
        return self._boundary("p_r", z)

    def q_r(self, z: int) -> float:
        """Injection rate from the right reservoir into site ``r``."""
        return self._boundary("q_r", z)

    # -- limits and theta ----------------------------------------------------

    def f_limit(self, direction: int) -> float:
        """``lim f(z)`` as ``z -> direction * inf``.

        Declared limits are used verbatim.  Otherwise ``f`` is evaluated at the
        horizon; monotonicity of ``f`` makes that value a one-sided bound.
        """
        return _f_limit(self.kernel, direction, self.horizon)

    def theta_bounds(self) -> Tuple[float, float]:
        return _theta_bounds(self.occupancy, self.kernel, self.horizon)

    def theta(self, i: int, c: Optional[float] = None) -> float:
        c = self.c if c is None else c
        if c is None:
            raise ModelError("theta sequence needs an anchor c")
        if i == 0:
            return float(c)
        return c + i * self.log_ratio

    def check_range(self, check_range: Optional[Tuple[int, int]] = None) -> Tuple[int, int]:
        """Finite occupancy range used for exhaustive rate checks."""
        lo, hi = self.omega_min, self.omega_max
        if check_range is not None:
            lo, hi = max(lo, check_range[0]), min(hi, check_range[1])
        if finite(lo) and finite(hi):
            return int(lo), int(hi)
        if finite(lo):
            return int(lo), int(lo) + 63
        if finite(hi):
            return int(hi) - 63, int(hi)
        return -32, 31

    def validate(self, check_range: Optional[Tuple[int, int]] = None) -> ValidationReport:
        key = ("validate", check_range)
        if key not in self._cache:
            self._cache[key] = validate(self, check_range)
        return self._cache[key]

    def spec_hash(self) -> str:
        payload = {
            "name": self.name,
            "params": {k: repr(v) for k, v in sorted(self.params.items())},
            "lattice": [repr(self.lattice.ell), repr(self.lattice.r)],
            "occupancy": [repr(self.omega_min), repr(self.omega_max)],
            "p": repr(self.p),
            "c": repr(self.c),
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


bulk_rate_p = ModelSpec.bulk_rate_p
bulk_rate_q = ModelSpec.bulk_rate_q
theta_bounds = ModelSpec.theta_bounds


# -- validation ---------------------------------------------------------------

_TOL = 1e-12


def _less(a: float, b: float) -> bool:
    """``a < b`` beyond rounding noise."""
    return a < b - _TOL * max(abs(a), abs(b), 1e-300)


def validate_attractivity(spec: ModelSpec, check_range=None) -> ValidationReport:
    """All eight monotonicity inequalities plus monotone ``f`` on a finite range."""
    lo, hi = spec.check_range(check_range)
    rep = ValidationReport(check_range=(lo, hi))
    vals = range(lo, hi + 1)
    P = {(y, z): spec.bulk_rate_p(y, z) for y in vals for z in vals}
    Q = {(y, z): spec.bulk_rate_q(y, z) for y in vals for z in vals}
    for y in vals:
        for z in range(lo, hi):
            if _less(P[z + 1, y], P[z, y]):
                rep.add("p-first-nondecreasing", y, z)
            if _less(P[y, z], P[y, z + 1]):
                rep.add("p-second-nonincreasing", y, z)
            if _less(Q[y, z + 1], Q[y, z]):
                rep.add("q-second-nondecreasing", y, z)
            if _less(Q[z, y], Q[z + 1, y]):
                rep.add("q-first-nonincreasing", y, z)
    for z in range(lo, hi):
        if _less(spec.kernel.f(z + 1), spec.kernel.f(z)):
            rep.add("monotone-f", None, z)
        b = spec.boundary
        if b.p_ell is not None:
            if _less(b.p_ell(z), b.p_ell(z + 1)):
                rep.add("p_ell-nonincreasing", None, z)
            if _less(b.q_ell(z + 1), b.q_ell(z)):
                rep.add("q_ell-nondecreasing", None, z)
        if b.p_r is not None:
            if _less(b.p_r(z + 1), b.p_r(z)):
                rep.add("p_r-nondecreasing", None, z)
            if _less(b.q_r(z), b.q_r(z + 1)):
                rep.add("q_r-nonincreasing", None, z)
    return rep


def validate_vanishing(spec: ModelSpec, check_range=None) -> ValidationReport:
    """Rates that must vanish at the alphabet edges, and positivity of all others."""
    lo, hi = spec.check_range(check_range)
    rep = ValidationReport(check_range=(lo, hi))
    omin, omax = spec.omega_min, spec.omega_max
    if finite(omin) and spec.kernel.f(int(omin)) != 0:
        rep.add("f-min-zero", omin)
    for y in range(lo, hi + 1):
        for z in range(lo, hi + 1):
            pr, qr = spec.bulk_rate_p(y, z), spec.bulk_rate_q(y, z)
            p_must_vanish = y == omin or z == omax
            q_must_vanish = y == omax or z == omin
            if p_must_vanish and pr != 0:
                rep.add("bulk-vanishing-p", y, z)
            if q_must_vanish and qr != 0:
                rep.add("bulk-vanishing-q", y, z)
            if not p_must_vanish and not pr > 0:
                rep.add("positive-p", y, z)
            if not q_must_vanish and not qr > 0:
                rep.add("positive-q", y, z)
    b = spec.boundary
    for z in range(lo, hi + 1):
        if b.p_ell is not None:
            if z == omax and b.p_ell(z) != 0:
                rep.add("left-vanishing-p", z)
            if z == omin and b.q_ell(z) != 0:
                rep.add("left-vanishing-q", z)
            if z != omax and not b.p_ell(z) > 0:
                rep.add("positive-p_ell", z)
            if z != omin and not b.q_ell(z) > 0:
                rep.add("positive-q_ell", z)
        if b.p_r is not None:
            if z == omin and b.p_r(z) != 0:
                rep.add("right-vanishing-p", z)
            if z == omax and b.q_r(z) != 0:
                rep.add("right-vanishing-q", z)
            if z != omin and not b.p_r(z) > 0:
                rep.add("positive-p_r", z)
            if z != omax and not b.q_r(z) > 0:
                rep.add("positive-q_r", z)
    return rep


def validate_reservoirs(spec: ModelSpec, c: Optional[float] = None, check_range=None) -> ValidationReport:
    """Reservoir balance conditions at finite ends and theta_i inside the bounds on Lambda.

    The conditions are checked cross-multiplied,
    ``q_ell(z+1) e^{theta_ell} = p_ell(z) f(z+1)`` and
    ``p_r(z+1) e^{theta_r} = q_r(z) f(z+1)``, for ``z != omega_max``.
    """
    rep = ValidationReport()
    c = spec.c if c is None else c
    lat = spec.lattice
    if c is None:
        if lat.doubly_infinite:
            return rep
        rep.add("anchor-missing")
        return rep
    tmin, tmax = spec.theta_bounds()
    if not tmin < tmax:
        rep.add("theta-interval", tmin, tmax)
    for end, far in ((lat.ell, tmin), (lat.r, tmax)):
        if finite(end):
            th = spec.theta(int(end), c)
            if not tmin < th < tmax:
                rep.add("theta-in-bounds", int(end), th)
        elif not math.isinf(far):
            rep.add("finite-end-required", far)
    lo, hi = spec.check_range(check_range)
    for z in range(lo, hi):
        if z == spec.omega_max:
            continue
        fz = spec.kernel.f(z + 1)
        if finite(lat.ell):
            e = math.exp(spec.theta(int(lat.ell), c))
            a, b = spec.q_ell(z + 1) * e, spec.p_ell(z) * fz
            if abs(a - b) > 1e-12 * max(abs(a), abs(b), 1e-300):
                rep.add("lcond", z, detail=f"{a!r} != {b!r}")
        if finite(lat.r):
            e = math.exp(spec.theta(int(lat.r), c))
            a, b = spec.p_r(z + 1) * e, spec.q_r(z) * fz
            if abs(a - b) > 1e-12 * max(abs(a), abs(b), 1e-300):
                rep.add("rcond", z, detail=f"{a!r} != {b!r}")
    return rep


def validate(spec: ModelSpec, check_range=None) -> ValidationReport:
    rep = validate_vanishing(spec, check_range)
    rep.extend(validate_attractivity(spec, check_range))
    rep.extend(validate_reservoirs(spec, None, check_range))
    rep.check_range = spec.check_range(check_range)
    return rep


# -- reservoirs ---------------------------------------------------------------

def fugacity_reservoir(kernel: RateKernel, occupancy: OccupancyInterval, side: str,
                       theta_out: float) -> Tuple[RateFn, RateFn]:
    """Reservoir acting like a neighbour with fugacity ``exp(theta_out)``.

    Left side returns ``(p_ell, q_ell)`` with ``p_ell(z) = p e^{theta_out} 1{z < omega_max}``
    and ``q_ell(z) = q f(z)``; the right side mirrors it.  With ``theta_out``
    equal to theta at the virtual site ``ell - 1`` (resp. ``r + 1``) the
    reservoir balance condition holds and attractivity is inherited from ``f``.
    """
    p, q, f = kernel.p, kernel.q, kernel.f
    omax = occupancy.omega_max
    inflow = math.exp(theta_out)
    if side == "left":
        return (lambda z: p * inflow if z < omax else 0.0), (lambda z: q * f(z))
    if side == "right":
        return (lambda z: p * f(z)), (lambda z: q * inflow if z < omax else 0.0)
    raise ValueError(side)


def natural_reservoir(kernel: RateKernel, occupancy: OccupancyInterval, side: str,
                      horizon: int, f_limit: float) -> Tuple[RateFn, RateFn]:
    """Boundary rates as limits of the bulk rates with a far neighbour.

    Right: ``p_r(y) = lim_z p(y, z)``, ``q_r(y) = lim_z q(y, z)``;
    left: ``p_ell(z) = lim_y p(y, z)``, ``q_ell(z) = lim_y q(y, z)``.
    ``s`` is read at the horizon, ``f`` at its declared limit.
    """
    p, q, f, s = kernel.p, kernel.q, kernel.f, kernel.s
    omax = occupancy.omega_max
    H = horizon

    def s_ext(y, z):
        return 0.0 if (y > omax or z > omax) else s(y, z)

    if side == "right":
        return (lambda y: p * s_ext(y, H) * f(y)), (lambda y: q * s_ext(y + 1, H) * f_limit)
    if side == "left":
        return (lambda z: p * s_ext(-H, z + 1) * f_limit), (lambda z: q * s_ext(-H + 1, z) * f(z))
    raise ValueError(side)


# -- built-in models ----------------------------------------------------------

BUILTINS = ("asep", "k_exclusion", "zrp_rate1", "independent_walkers", "q_zrp",
            "are_you_alone", "bricklayers")


def _kernel_for(name: str, p: float, params: dict) -> Tuple[OccupancyInterval, RateKernel, dict]:
    if name == "asep":
        occ = OccupancyInterval(0, 1)
        kern = RateKernel(p, lambda y: float(y), lambda y, z: 1.0 if (y <= 1 and z <= 1) else 0.0)
        return occ, kern, {}
    if name == "k_exclusion":
        K = params.get("K", 2)
        if not _is_int(K) or K < 2:
            raise ModelError(f"K-exclusion needs an integer K >= 2, got {K!r}")
        K = int(K)
        occ = OccupancyInterval(0, K)
        kern = RateKernel(p, lambda y: 1.0 if y >= 1 else 0.0,
                          lambda y, z: 1.0 if (y <= K and z <= K) else 0.0)
        return occ, kern, {"K": K}
    if name == "zrp_rate1":
        occ = OccupancyInterval(0, INF)
        kern = RateKernel(p, lambda y: 1.0 if y > 0 else 0.0, lambda y, z: 1.0, f_limits=(0.0, 1.0))
        return occ, kern, {}
    if name == "independent_walkers":
        occ = OccupancyInterval(0, INF)
        kern = RateKernel(p, lambda y: float(y), lambda y, z: 1.0, f_limits=(0.0, INF))
        return occ, kern, {}
    if name == "q_zrp":
        qhat = float(params.get("qhat", 0.5))
        if not 0.0 <= qhat < 1.0:
            raise ModelError(f"q-ZRP needs 0 <= qhat < 1, got {qhat}")
        occ = OccupancyInterval(0, INF)
        kern = RateKernel(p, lambda y: 1.0 - qhat ** y if y > 0 else 0.0, lambda y, z: 1.0,
                          f_limits=(0.0, 1.0))
        return occ, kern, {"qhat": qhat}
    if name == "are_you_alone":
        eps = float(params.get("eps", 0.3))
        delta = float(params.get("delta", 0.0))
        if not (0.0 <= eps < 1.0) or abs(delta) > eps:
            raise ModelError(f"are-you-alone needs |delta| <= eps < 1, got eps={eps}, delta={delta}")
        s11 = (1.0 - delta) / (1.0 - eps)
        s22 = (1.0 + delta) / (1.0 + eps)

        def s(y, z):
            y, z = max(y, 1), max(z, 1)
            if y == 1 and z == 1:
                return s11
            if y == 1 or z == 1:
                return 1.0
            return s22

        def f(y):
            return 0.0 if y <= 0 else (1.0 - eps if y == 1 else 1.0 + eps)

        occ = OccupancyInterval(0, INF)
        return occ, RateKernel(p, f, s, f_limits=(0.0, 1.0 + eps)), {"eps": eps, "delta": delta}
    if name == "bricklayers":
        beta = float(params.get("beta", math.log(2.0)))
        if not beta > 0:
            raise ModelError(f"bricklayers needs beta > 0, got {beta}")

        def f(z):
            return math.exp(beta * (z - 0.5))

        def s(y, z):
            return 1.0 + 1.0 / (f(y) * f(z))

        occ = OccupancyInterval(-INF, INF)
        return occ, RateKernel(p, f, s, f_limits=(0.0, INF)), {"beta": beta}
    raise ModelError(f"unknown model {name!r}; expected one of {', '.join(BUILTINS)}")


_DEFAULT_EXTENT = {
    "asep": (-INF, INF),
    "k_exclusion": (-INF, INF),
    "zrp_rate1": (-INF, 0),
    "independent_walkers": (-INF, 0),
    "q_zrp": (-INF, 0),
    "are_you_alone": (-INF, 0),
    "bricklayers": (0, 1),
}


def _ext(v) -> ExtInt:
    if isinstance(v, str):
        v = float(v)
    if isinstance(v, float):
        if math.isinf(v):
            return v
        if v.is_integer():
            return int(v)
        raise ModelError(f"lattice extent must be integral, got {v}")
    return v


def builtin(name: str, p: float = None, *, ell=None, r=None, c: Optional[float] = None,
            boundary: Optional[str] = None, **params) -> ModelSpec:
    """Construct and validate one of the built-in models.

    Parameters beyond ``p``: ``K`` (k_exclusion), ``qhat`` (q_zrp), ``eps`` and
    ``delta`` (are_you_alone), ``beta`` (bricklayers, ``f(z) = e^{beta(z-1/2)}``).

    Finite ends get reservoirs.  Where the theta bound on that side is finite
    the default is the limit of the bulk rates (``boundary="natural"``), which
    pins ``c`` so that the bound is the next term of the theta sequence;
    otherwise (or with ``boundary="reservoir"``) a fugacity reservoir matched
    to ``c`` is used, ``c`` defaulting to 0.
    """
    if p is None:
        raise ModelError("p is required")
    p = float(p)
    occ, kern, extra = _kernel_for(name, p, params)
    d_ell, d_r = _DEFAULT_EXTENT[name]
    ell = d_ell if ell is None else _ext(ell)
    r = d_r if r is None else _ext(r)
    lat = LatticeSpec(ell, r)
    if boundary not in (None, "natural", "reservoir"):
        raise ModelError(f"unknown boundary mode {boundary!r}")

    horizon = 10**6
    tmin, tmax = _theta_bounds(occ, kern, horizon)
    if not tmin < tmax:
        raise ModelError("empty theta interval")
    if finite(tmax) and not finite(lat.r):
        raise IncompatibleVolumeError(f"theta_max = {tmax:g} < inf forces a finite right end r")
    if finite(tmin) and not finite(lat.ell):
        raise IncompatibleVolumeError(f"theta_min = {tmin:g} > -inf forces a finite left end ell")

    lr = math.log(p) - math.log(1.0 - p) if p < 1.0 else INF
    right_natural = finite(lat.r) and finite(tmax) and boundary != "reservoir"
    left_natural = finite(lat.ell) and finite(tmin) and boundary != "reservoir"
    c_nat = None
    if right_natural:
        c_nat = tmax - (lat.r + 1) * lr
    if left_natural:
        c_l = tmin - (lat.ell - 1) * lr
        if c_nat is not None and abs(c_nat - c_l) > 1e-12 * max(1.0, abs(c_l)):
            raise IncompatibleVolumeError("natural reservoirs at both ends need an arithmetic fit")
        c_nat = c_l
    if c_nat is not None:
        if c is not None and abs(c - c_nat) > 1e-12 * max(1.0, abs(c_nat)):
            raise IncompatibleVolumeError(
                f"natural reservoir fixes c = {c_nat!r}; got c = {c!r} (use boundary='reservoir')")
        c = c_nat
    elif c is None and not lat.doubly_infinite:
        c = 0.0

    b = {}
    if finite(lat.ell):
        th = c + (lat.ell - 1) * lr
        if left_natural:
            b["p_ell"], b["q_ell"] = natural_reservoir(kern, occ, "left", horizon, _f_limit(kern, -1, horizon))
        else:
            b["p_ell"], b["q_ell"] = fugacity_reservoir(kern, occ, "left", th)
    if finite(lat.r):
        th = c + (lat.r + 1) * lr
        if right_natural:
            b["p_r"], b["q_r"] = natural_reservoir(kern, occ, "right", horizon, _f_limit(kern, +1, horizon))
        else:
            b["p_r"], b["q_r"] = fugacity_reservoir(kern, occ, "right", th)

    stored = dict(extra)
    stored["p"] = p
    if boundary is not None:
        stored["boundary"] = boundary
    spec = ModelSpec(name, lat, occ, kern, BoundaryRates(**b), c, stored)
    rng = (-20, 20) if not occ.is_finite else None
    rep = spec.validate(rng)
    if not rep.ok:
        first = rep.violations[0]
        if first.check in ("theta-in-bounds", "finite-end-required"):
            raise IncompatibleVolumeError(f"{name}: {first}")
        raise ModelError(f"{name}: validation failed: {rep.violations[:5]}")
    return spec

