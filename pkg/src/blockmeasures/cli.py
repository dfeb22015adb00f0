"""Command line: ``blockmeasures {simulate, verify, sample}``.

Exit codes: 0 pass, 1 a check failed, 2 usage or domain error.
A ``--config`` file of ``key = value`` lines supplies defaults for any
flag; flags given on the command line win.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .model import BUILTINS, DomainError, ModelError, _kernel_for, _theta_bounds, builtin, finite
from .state import Configuration

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

VERIFY_CHECKS = ("detailed-balance", "stationarity", "shift-identity", "decomposition", "meq",
                 "combi", "jacobi")
SAMPLE_KINDS = ("marginals", "sector", "weights", "blocking")


# -- config files --------------------------------------------------------------------

@dataclass
class RunConfig:
    """A command and its options, as read from or written to a config file."""

    command: Optional[str] = None
    subcommand: Optional[str] = None
    options: Dict[str, str] = field(default_factory=dict)

    def to_text(self) -> str:
        lines = []
        if self.command:
            lines.append(f"command = {self.command}")
        if self.subcommand:
            lines.append(f"subcommand = {self.subcommand}")
        lines += [f"{k} = {v}" for k, v in sorted(self.options.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        cfg = cls()
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line {n}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("_", "-")
            if key == "command":
                cfg.command = value
            elif key == "subcommand":
                cfg.subcommand = value
            else:
                cfg.options[key] = value
        return cfg

    def argv(self) -> List[str]:
        out = []
        for k, v in self.options.items():
            if v.lower() in ("true", "yes", "on"):
                out.append(f"--{k}")
            elif v.lower() in ("false", "no", "off"):
                continue
            else:
                out.append(f"--{k}={v}")
        return out


def _merge_config(argv: List[str]) -> List[str]:
    """Splice the options of ``--config FILE`` in front of the command-line flags."""
    if "--config" not in argv and not any(a.startswith("--config=") for a in argv):
        return argv
    rest, path = [], None
    it = iter(argv)
    for a in it:
        if a == "--config":
            path = next(it, None)
        elif a.startswith("--config="):
            path = a.split("=", 1)[1]
        else:
            rest.append(a)
    if path is None:
        raise UsageError("--config needs a file")
    with open(path) as fh:
        cfg = RunConfig.from_text(fh.read())
    head = []
    pos = [a for a in rest if not a.startswith("-")]
    if cfg.command and (not pos or pos[0] != cfg.command):
        head.append(cfg.command)
    if cfg.subcommand and cfg.subcommand not in pos:
        head.append(cfg.subcommand)
    cmd = (head + rest)
    # positional command words first, then file options, then the user's flags
    words = []
    for a in cmd:
        if a.startswith("-"):
            break
        words.append(a)
    return words + cfg.argv() + cmd[len(words):]


class UsageError(Exception):
    pass


# -- argument types ------------------------------------------------------------------

def int_range(text: str) -> Tuple[int, int]:
    """``a..b`` inclusive, or a single integer."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or a range a..b, got {text!r}")
    if hi < lo:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return lo, hi


def extent(text: str):
    t = text.strip().lower()
    if t in ("inf", "+inf"):
        return math.inf
    if t == "-inf":
        return -math.inf
    try:
        return int(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or +-inf, got {text!r}")


def fmt(x) -> str:
    from .measures import format_number
    return format_number(x)


# -- model construction ----------------------------------------------------------------

def _model_params(args) -> dict:
    out = {}
    for key in ("K", "qhat", "eps", "delta", "beta"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = v
    return out


def _lattice_for_sites(name: str, p: float, k: int, params: dict):
    """A ``k``-site lattice: ending at 0 when theta_max is finite, centred otherwise."""
    occ, kern, _ = _kernel_for(name, p, params)
    if finite(_theta_bounds(occ, kern, 10**6)[1]):
        return -(k - 1), 0
    ell = -((k - 1) // 2)
    return ell, ell + k - 1


def make_model(args, sites: Optional[int] = None):
    params = _model_params(args)
    ell, r = getattr(args, "ell", None), getattr(args, "r", None)
    if sites is not None:
        if sites < 1:
            raise UsageError("--sites must be positive")
        ell, r = _lattice_for_sites(args.model, args.p, sites, params)
    c = getattr(args, "c", None)
    boundary = getattr(args, "boundary", None)
    try:
        return builtin(args.model, args.p, ell=ell, r=r, c=c, boundary=boundary, **params)
    except ModelError as exc:
        if c is not None and "natural reservoir fixes c" in str(exc) and boundary is None:
            return builtin(args.model, args.p, ell=ell, r=r, c=c, boundary="reservoir", **params)
        raise


# -- commands -----------------------------------------------------------------------

def _emit(text: str, path: Optional[str], out):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        out.write(text)


def cmd_simulate(args, out) -> int:
    from .dynamics import ConservedObserver, CurrentObserver, OccupationObserver, occupation_csv, simulate
    from .measures import sample_blocking, sample_sector
    model = make_model(args)
    c = args.c if args.c is not None else (model.c if model.c is not None else 0.0)
    rng = np.random.Generator(np.random.PCG64(args.seed))
    if args.init:
        z0 = Configuration.from_text(args.init)
    elif args.sector is not None:
        z0 = sample_sector(model, c, args.sector, rng)
    elif args.start == "blocking":
        z0 = sample_blocking(model, c, 1e-12, rng)
    else:
        z0 = Configuration.ground(model)
    lat = model.lattice
    if args.sites:
        lo, hi = args.sites
    elif lat.is_finite and len(lat.sites()) <= 64:
        lo, hi = int(lat.ell), int(lat.r)
    else:
        lo = max(-5, lat.ell) if finite(lat.ell) else -5
        hi = min(5, lat.r) if finite(lat.r) else 5
    t_max = args.t_max if args.t_max is not None else math.inf
    if t_max == math.inf and args.max_events is None:
        raise UsageError("need --t-max or --max-events")
    obs_t = t_max if math.isfinite(t_max) else 1.0
    occ = OccupationObserver(range(int(lo), int(hi) + 1), obs_t, n_batches=args.batches)
    observers = [occ, CurrentObserver(0 if lat.doubly_infinite else int(lo))]
    if lat.doubly_infinite:
        observers.append(ConservedObserver())
    traj = simulate(model, z0, t_max=t_max, observers=observers, seed=args.seed,
                    max_events=args.max_events, max_window=args.max_window)
    meta = traj.metadata()
    meta["model"] = model.name
    meta["initial"] = z0.to_text()
    meta["observers"] = {type(o).__name__: o.summary() for o in observers[1:]}
    csv_text = occupation_csv(occ) if math.isfinite(t_max) else "site,mean,stderr\n"
    js = json.dumps(meta, sort_keys=True) + "\n"
    if args.csv or args.json:
        _emit(csv_text, args.csv, out)
        _emit(js, args.json, out)
    else:
        out.write(csv_text)
        out.write(js)
    return EXIT_PASS


def _verify_reports(args) -> List:
    from . import verify as V
    from .measures import sample_blocking
    check = args.check
    if check == "jacobi":
        if args.grid:
            return V.jacobi_grid(eps=args.tol)
        if args.x is None or args.y is None:
            raise UsageError("jacobi needs --x and --y (or --grid)")
        return [V.check_jacobi(args.x, args.y, args.terms, args.j_max, eps=args.tol)]
    if args.p is None:
        raise UsageError(f"{check} needs --p")
    if check in ("detailed-balance", "stationarity"):
        model = make_model(args, sites=args.sites)
        cap = args.cap
        if cap is not None and cap[0] == cap[1]:
            cap = cap[1]
        chain = V.enumerate_chain(model, cap)
        if check == "detailed-balance":
            return [V.check_detailed_balance(chain, eps=args.tol)]
        reps = [V.check_stationarity(chain, eps=args.tol)]
        if not chain.capped and args.solve:
            reps.append(V.compare_stationary(chain, eps=args.tol))
        return reps
    rng = np.random.Generator(np.random.PCG64(args.seed))
    c = args.c if args.c is not None else 0.0
    if check == "shift-identity":
        model = make_model(args)
        reps = []
        for _ in range(args.count):
            z = sample_blocking(model, c, 1e-12, rng)
            j = int(rng.integers(-5, 6))
            reps.append(V.check_shift_identity(model, c, z, j, eps=args.tol))
        return reps
    if check == "decomposition":
        lo, hi = args.n if args.n else (-args.window, args.window)
        return [V.check_sector_decomposition(args.p, c, range(lo, hi + 1), args.window, eps=args.tol)]
    from .verify.identities import random_half_line
    if check == "meq":
        reps = []
        for _ in range(args.count):
            z = random_half_line(rng)
            n = int(rng.integers(-5, 6))
            reps.append(V.check_meq(args.p, c, z, n, eps=args.tol))
        return reps
    if check == "combi":
        reps = [V.check_combi_ground(args.p, c, eps=args.tol)]
        for _ in range(args.count):
            reps.append(V.check_combi(args.p, c, random_half_line(rng), eps=args.tol))
        return reps
    raise UsageError(f"unknown check {check}")


def cmd_verify(args, out) -> int:
    reports = _verify_reports(args)
    ok = all(r.passed for r in reports)
    worst = max((r.residual for r in reports), default=0.0)
    payload = {"check": args.check, "pass": ok, "max_residual": worst if math.isfinite(worst) else "inf",
               "reports": [r.to_dict() for r in reports]}
    text = json.dumps(payload, sort_keys=True, default=float) + "\n"
    _emit(text, args.json, out)
    sys.stderr.write(f"{'PASS' if ok else 'FAIL'} {args.check}: {len(reports)} report(s), "
                     f"max residual {fmt(worst)}\n")
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_sample(args, out) -> int:
    from .measures import (SectorWeight, marginal_table, sample_blocking_array, sample_sector_many,
                           to_csv)
    kind = args.kind
    meta = {"kind": kind, "seed": None, "tries": None, "tail": None}
    if kind == "weights":
        if args.p is None:
            raise UsageError("weights needs --p")
        c = args.c if args.c is not None else 0.0
        sw = SectorWeight(args.p, c)
        lo, hi = args.n if args.n else (-8, 8)
        rows = [[n, w] for n, w in sw.table(range(lo, hi + 1))]
        text = to_csv(["n", "weight"], rows)
        meta["tail"] = sw.tail
    else:
        if args.p is None:
            raise UsageError(f"{kind} needs --p")
        model = make_model(args)
        c = args.c if args.c is not None else (model.c if model.c is not None else 0.0)
        if kind == "marginals":
            if args.sites:
                lo, hi = args.sites
            elif model.lattice.is_finite:
                lo, hi = int(model.lattice.ell), int(model.lattice.r)
            else:
                lo, hi = -10, 10
            header, rows = marginal_table(model, c, range(lo, hi + 1))
            text = to_csv(header, rows)
        else:
            rng = np.random.Generator(np.random.PCG64(args.seed))
            meta["seed"] = args.seed
            if kind == "sector":
                if args.n is None:
                    raise UsageError("sector needs --n")
                n = args.n[0]
                configs, tries = sample_sector_many(model, c, n, args.count, rng, tail_eps=args.tail_eps)
                meta["tries"] = tries
            else:
                lo, vals = sample_blocking_array(model, c, args.count, rng, args.tail_eps)
                configs = [Configuration(lo, tuple(int(v) for v in row), model.lattice, model.occupancy)
                           for row in vals]
            meta["tail"] = args.tail_eps
            text = "index,configuration\n" + "".join(
                f"{k},{z.normalized().to_text()}\n" for k, z in enumerate(configs))
    meta["rows"] = text.count("\n") - 1
    _emit(text, args.csv, out)
    if args.json:
        _emit(json.dumps(meta, sort_keys=True) + "\n", args.json, out)
    return EXIT_PASS


# -- parser -------------------------------------------------------------------------

def _model_flags(p: argparse.ArgumentParser, require_model: bool = True):
    p.add_argument("--model", choices=BUILTINS, default="asep" if not require_model else None,
                   required=require_model)
    p.add_argument("--p", type=float, help="right-jump probability, 1/2 < p <= 1")
    p.add_argument("--c", type=float, help="anchor of the theta sequence")
    p.add_argument("--ell", type=extent)
    p.add_argument("--r", type=extent)
    p.add_argument("--boundary", choices=("natural", "reservoir"))
    p.add_argument("--K", type=int)
    p.add_argument("--qhat", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--beta", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blockmeasures", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="key = value file mirroring the flags")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the dynamics and report time averages")
    _model_flags(sim)
    sim.add_argument("--t-max", type=float)
    sim.add_argument("--max-events", type=int)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--sector", type=int, help="start from the conditioned measure of this sector")
    sim.add_argument("--start", choices=("ground", "blocking"), default="ground")
    sim.add_argument("--init", help="initial configuration in text form")
    sim.add_argument("--sites", type=int_range, help="observed sites a..b")
    sim.add_argument("--batches", type=int, default=50)
    sim.add_argument("--max-window", type=int, default=200_000)
    sim.add_argument("--csv")
    sim.add_argument("--json")

    ver = sub.add_parser("verify", help="exact checks")
    ver.add_argument("check", choices=VERIFY_CHECKS)
    _model_flags(ver, require_model=False)
    ver.add_argument("--sites", type=int, default=4, help="number of lattice sites")
    ver.add_argument("--cap", type=int_range, help="occupancy cap k or range a..b")
    ver.add_argument("--solve", action="store_true", help="also compare with a linear stationary solve")
    ver.add_argument("--x", type=float)
    ver.add_argument("--y", type=float)
    ver.add_argument("--terms", type=int)
    ver.add_argument("--j-max", type=int)
    ver.add_argument("--grid", action="store_true")
    ver.add_argument("--window", type=int, default=6)
    ver.add_argument("--n", type=int_range)
    ver.add_argument("--count", type=int, default=100)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--tol", type=float, default=None)
    ver.add_argument("--json")

    sam = sub.add_parser("sample", help="draw configurations or print exact tables")
    sam.add_argument("kind", choices=SAMPLE_KINDS)
    _model_flags(sam, require_model=False)
    sam.add_argument("--sites", type=int_range)
    sam.add_argument("--n", type=int_range)
    sam.add_argument("--count", type=int, default=10)
    sam.add_argument("--seed", type=int, default=0)
    sam.add_argument("--tail-eps", type=float, default=1e-12)
    sam.add_argument("--csv")
    sam.add_argument("--json")
    return ap


RANGE_FLAGS = ("--sites", "--n", "--cap")


def _join_negative_ranges(argv: List[str]) -> List[str]:
    """``--sites -10..10`` would read as a flag; rewrite it as ``--sites=-10..10``."""
    out = []
    k = 0
    while k < len(argv):
        a = argv[k]
        if a in RANGE_FLAGS and k + 1 < len(argv) and argv[k + 1].startswith("-") and ".." in argv[k + 1]:
            out.append(f"{a}={argv[k + 1]}")
            k += 2
            continue
        out.append(a)
        k += 1
    return out


DEFAULT_TOL = {"detailed-balance": 1e-12, "stationarity": 1e-10, "shift-identity": 1e-12,
               "decomposition": 1e-10, "meq": 1e-9, "combi": 1e-9, "jacobi": 1e-10}


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _merge_config(argv)
    except (OSError, ValueError, UsageError) as exc:
        parser.error(str(exc))
    args = parser.parse_args(_join_negative_ranges(argv))
    if args.command == "simulate" and args.p is None:
        parser.error("simulate needs --p")
    if args.command == "verify" and args.tol is None:
        args.tol = DEFAULT_TOL[args.check]
    try:
        if args.command == "simulate":
            return cmd_simulate(args, out)
        if args.command == "verify":
            return cmd_verify(args, out)
        return cmd_sample(args, out)
    except UsageError as exc:
        parser.error(str(exc))
    except (ModelError, DomainError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
