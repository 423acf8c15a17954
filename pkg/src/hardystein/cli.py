"""Experiment runner.

    hardystein {verify,krickeberg,littlewood-paley,sample,suite} --config FILE
               [--out DIR] [--seed N] [--jobs N] [--format csv|json] [--timing]

Experiment files are TOML with `schema_version = 1`, an optional [defaults] table and a
list of [[experiment]] tables; see README.md for the keys.  Exit codes: 0 when every
report passes its budget, 1 on a failed or numerically flagged report (reports are still
written), 2 on an invalid configuration (nothing is run).
"""
from __future__ import annotations

import argparse
import math
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .core import BallDomain, DomainError, IdentityReport, QuadratureSpec, StableParams
from .engine import CLASSICAL, NONLOCAL, IdentitySpec, SpecError, verify
from .harmonic import (ExteriorData, classical_harmonic, constant_function, martin_combination,
                       poisson_extension)
from .report import emit_report, write_plots

SCHEMA_VERSION = 1

SUBCOMMANDS = {
    "verify": NONLOCAL + CLASSICAL,
    "krickeberg": ("krickeberg",),
    "littlewood-paley": ("littlewood-paley",),
    "sample": ("exit-law",),
}
SUBCOMMANDS["suite"] = tuple(i for ids in SUBCOMMANDS.values() for i in ids)

TOP_KEYS = {"schema_version", "defaults", "experiment"}
DEFAULT_KEYS = {"seed", "out", "rel_tol", "abs_tol", "outer_rel_tol", "outer_abs_tol", "exhaustion_depth",
                "mc_n", "format"}
EXPERIMENT_KEYS = {"id", "identity", "d", "alpha", "p", "domain", "sub_ball", "x0", "u", "h", "lhs_method",
                   "mc_n", "seed", "exhaustion_depth", "green_method", "rel_tol", "abs_tol", "outer_rel_tol",
                   "outer_abs_tol", "n", "method", "ks_tol"}
BALL_KEYS = {"center", "radius"}
FUNCTION_KEYS = {
    "poisson-extension": {"kind", "pieces", "tail"},
    "martin": {"kind", "atoms", "x0"},
    "constant": {"kind", "value"},
    "monomial-re": {"kind", "n"},
    "poisson-profile": {"kind", "zeta"},
}
EXIT_LAW_METHODS = ("exact-ball", "walk-on-spheres")


class ConfigError(Exception):
    def __init__(self, line: int, msg: str):
        super().__init__(msg)
        self.line = line
        self.msg = msg


class _Locator:
    """Line numbers of tables and keys in the raw TOML text, for error messages."""

    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.blocks = [i + 1 for i, ln in enumerate(self.lines) if re.match(r"\s*\[\[\s*experiment\s*\]\]", ln)]
        self.defaults = next((i + 1 for i, ln in enumerate(self.lines)
                              if re.match(r"\s*\[\s*defaults\s*\]", ln)), 1)

    def _span(self, k: Optional[int]):
        if k is None:
            start = self.defaults
            later = [b for b in self.blocks if b > start]
            return start, (later[0] - 1 if later else len(self.lines))
        start = self.blocks[k]
        stop = self.blocks[k + 1] - 1 if k + 1 < len(self.blocks) else len(self.lines)
        return start, stop

    def key(self, k: Optional[int], key: str) -> int:
        start, stop = self._span(k)
        pat = re.compile(r"(^|[\s{,])" + re.escape(key) + r"\s*=")
        for i in range(start - 1, stop):
            if pat.search(self.lines[i].split("#", 1)[0]):
                return i + 1
        return start

    def block(self, k: int) -> int:
        return self.blocks[k] if k < len(self.blocks) else 1


@dataclass
class Job:
    """A validated experiment: the raw table plus the resolved settings."""
    index: int
    entry: dict
    identity: str
    experiment_id: str
    seed: int
    settings: dict = field(default_factory=dict)


# ------------------------------------------------------------------ building

def _floats(v, what):
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.ndim != 1 or not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} must be a finite number or list of numbers")
    return tuple(float(x) for x in arr)


def _ball(tbl, what):
    if not isinstance(tbl, dict):
        raise ValueError(f"{what} must be a table with center and radius")
    unknown = set(tbl) - BALL_KEYS
    if unknown:
        raise KeyError(sorted(unknown)[0])
    if "center" not in tbl or "radius" not in tbl:
        raise ValueError(f"{what} needs center and radius")
    return BallDomain(_floats(tbl["center"], f"{what}.center"), float(tbl["radius"]))


def _function(tbl, what, sp, domain, classical):
    if not isinstance(tbl, dict) or "kind" not in tbl:
        raise ValueError(f"{what} must be a table with a kind")
    kind = tbl["kind"]
    if kind not in FUNCTION_KEYS:
        raise ValueError(f"{what}: unknown kind {kind!r} (expected one of {', '.join(FUNCTION_KEYS)})")
    unknown = set(tbl) - FUNCTION_KEYS[kind]
    if unknown:
        raise KeyError(sorted(unknown)[0])
    if kind == "constant":
        return constant_function(float(tbl.get("value", 1.0)), None if classical else sp, domain)
    if classical:
        if kind == "monomial-re":
            return classical_harmonic("monomial-re", int(tbl.get("n", 1)), domain)
        if kind == "poisson-profile":
            return classical_harmonic("poisson-profile", _floats(tbl["zeta"], f"{what}.zeta"), domain)
        raise ValueError(f"{what}: {kind} is not a classical function")
    if kind == "poisson-extension":
        pieces = [tuple(float(x) for x in piece) for piece in tbl.get("pieces", [])]
        if any(len(piece) != 3 for piece in pieces):
            raise ValueError(f"{what}.pieces must be [lo, hi, value] triples")
        data = ExteriorData.step(pieces, tail_value=float(tbl.get("tail", 0.0)))
        return poisson_extension(sp, domain, data)
    if kind == "martin":
        atoms = []
        for atom in tbl.get("atoms", []):
            if not isinstance(atom, (list, tuple)) or len(atom) != 2:
                raise ValueError(f"{what}.atoms must be [pole, weight] pairs")
            atoms.append((_floats(atom[0], f"{what} pole"), float(atom[1])))
        x0 = _floats(tbl.get("x0", domain.center), f"{what}.x0")
        return martin_combination(sp, domain, atoms, x0)
    raise ValueError(f"{what}: {kind} is not an alpha-harmonic function")


def build_spec(job: Job) -> IdentitySpec:
    e, s = job.entry, job.settings
    iid = job.identity
    classical = iid in CLASSICAL or iid == "littlewood-paley"
    if "domain" not in e:
        raise ValueError("missing domain")
    domain = _ball(e["domain"], "domain")
    d = int(e.get("d", domain.d))
    if d != domain.d:
        raise ValueError("d does not match the domain center")
    sp = None
    if not classical:
        if "alpha" not in e:
            raise ValueError(f"{iid} needs alpha")
        sp = StableParams(d, float(e["alpha"]))
    elif "alpha" in e:
        raise ValueError(f"{iid} is classical; drop alpha")
    sub = _ball(e["sub_ball"], "sub_ball") if "sub_ball" in e else None
    if "u" not in e:
        raise ValueError("missing u")
    u = _function(e["u"], "u", sp, domain, classical)
    h = _function(e["h"], "h", sp, domain, classical) if "h" in e else None
    lhs_method = e.get("lhs_method", "exact-kernel-integral")
    mc = (int(s["mc_n"]), job.seed) if lhs_method == "monte-carlo" else None
    quad = QuadratureSpec(rel_tol=float(s["rel_tol"]), abs_tol=float(s["abs_tol"]))
    outer = QuadratureSpec(rel_tol=float(s["outer_rel_tol"]), abs_tol=float(s["outer_abs_tol"]))
    x0 = _floats(e["x0"], "x0") if "x0" in e else None
    return IdentitySpec(iid, domain, u, float(e.get("p", 2.0)), x0=x0, sp=sp, sub_ball=sub, h=h,
                        lhs_method=lhs_method, quad=quad, outer=outer, mc=mc,
                        exhaustion_depth=int(s["exhaustion_depth"]), experiment_id=job.experiment_id,
                        green_method=e.get("green_method", "quadrature"))


@dataclass
class ExitLawSpec:
    experiment_id: str
    sp: StableParams
    domain: BallDomain
    x0: tuple
    n: int
    seed: int
    method: str
    ks_tol: float
    stream: int = 0


def build_exit_law(job: Job) -> ExitLawSpec:
    e = job.entry
    for key in ("alpha", "domain", "n"):
        if key not in e:
            raise ValueError(f"exit-law needs {key}")
    domain = _ball(e["domain"], "domain")
    sp = StableParams(domain.d, float(e["alpha"]))
    x0 = _floats(e.get("x0", domain.center), "x0")
    if len(x0) != domain.d or not bool(domain.contains(np.asarray(x0))):
        raise ValueError("x0 must be an interior point of the domain")
    method = e.get("method", "exact-ball" if np.allclose(x0, domain.center) else "walk-on-spheres")
    if method not in EXIT_LAW_METHODS:
        raise ValueError(f"unknown method {method!r}")
    if method == "exact-ball" and not np.allclose(x0, domain.center):
        raise ValueError("exact-ball sampling starts at the center")
    centered = bool(np.allclose(x0, domain.center))
    if not centered and not (domain.d == 1 and sp.alpha == 1.0):
        raise ValueError("no closed-form exit law to compare with for this start")
    n = int(e["n"])
    if n < 100:
        raise ValueError("n must be >= 100")
    return ExitLawSpec(job.experiment_id, sp, domain, x0, n, job.seed, method, float(e.get("ks_tol", 0.01)),
                       stream=job.index)


# ------------------------------------------------------------------ config

def load_config(path: Path, subcommand: str, seed_override: Optional[int]):
    """Parse and validate everything; returns (defaults, jobs).  Raises ConfigError."""
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(0, f"cannot read config: {exc.strerror}")
    try:
        cfg = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(int(m.group(1)) if m else 1, f"invalid TOML: {exc}")
    loc = _Locator(text)
    for key in cfg:
        if key not in TOP_KEYS:
            raise ConfigError(_top_line(loc, key), f"unknown key {key!r}")
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(_top_line(loc, "schema_version"),
                          f"schema_version must be {SCHEMA_VERSION}, got {cfg.get('schema_version')!r}")
    defaults = dict(seed=0, out="results", rel_tol=1e-6, abs_tol=1e-10, outer_rel_tol=1e-5, outer_abs_tol=1e-10,
                    exhaustion_depth=6, mc_n=100_000, format="csv")
    given = cfg.get("defaults", {})
    if not isinstance(given, dict):
        raise ConfigError(loc.defaults, "defaults must be a table")
    for key in given:
        if key not in DEFAULT_KEYS:
            raise ConfigError(loc.key(None, key), f"unknown key {key!r} in [defaults]")
    defaults.update(given)
    if seed_override is not None:
        defaults["seed"] = seed_override
    entries = cfg.get("experiment", [])
    if not isinstance(entries, list) or not entries:
        raise ConfigError(len(loc.lines) or 1, "no [[experiment]] entries")
    jobs, ids = [], set()
    for k, e in enumerate(entries):
        head = loc.block(k)
        for key in e:
            if key not in EXPERIMENT_KEYS:
                raise ConfigError(loc.key(k, key), f"unknown key {key!r} in experiment #{k + 1}")
        iid = e.get("identity")
        if iid is None:
            raise ConfigError(head, f"experiment #{k + 1} has no identity")
        if iid not in SUBCOMMANDS["suite"]:
            raise ConfigError(loc.key(k, "identity"), f"unknown identity {iid!r}")
        if iid not in SUBCOMMANDS[subcommand]:
            raise ConfigError(loc.key(k, "identity"), f"identity {iid!r} is not run by '{subcommand}'")
        eid = str(e.get("id", f"{iid}-{k + 1}"))
        if eid in ids:
            raise ConfigError(loc.key(k, "id"), f"duplicate experiment id {eid!r}")
        ids.add(eid)
        settings = {key: e.get(key, defaults[key]) for key in
                    ("rel_tol", "abs_tol", "outer_rel_tol", "outer_abs_tol", "exhaustion_depth", "mc_n")}
        seed = int(defaults["seed"]) if seed_override is not None else int(e.get("seed", defaults["seed"]))
        job = Job(k, e, iid, eid, seed, settings)
        try:
            build_exit_law(job) if iid == "exit-law" else build_spec(job)
        except KeyError as exc:
            key = exc.args[0]
            raise ConfigError(loc.key(k, key), f"unknown key {key!r} in experiment #{k + 1}")
        except (SpecError, DomainError, ValueError, TypeError) as exc:
            raise ConfigError(_blame(loc, k, e, str(exc)), f"experiment #{k + 1} ({eid}): {exc}")
        jobs.append(job)
    if defaults["format"] not in ("csv", "json"):
        raise ConfigError(loc.key(None, "format"), "format must be csv or json")
    return defaults, jobs


def _top_line(loc: _Locator, key: str) -> int:
    pat = re.compile(r"^\s*" + re.escape(key) + r"\s*=")
    for i, ln in enumerate(loc.lines):
        if pat.match(ln):
            return i + 1
    return 1


def _blame(loc: _Locator, k: int, entry: dict, msg: str) -> int:
    """The line of the first key of the entry mentioned in the message, else the table header."""
    for key in entry:
        if re.search(r"\b" + re.escape(key) + r"\b", msg):
            return loc.key(k, key)
    return loc.block(k)


# ------------------------------------------------------------------ execution

def run_exit_law(spec: ExitLawSpec, outdir: Path) -> IdentityReport:
    from scipy.stats import kstest
    from .kernels import radial_exit_sf
    from .sim import RngStream, exit_cdf_line, sample_exit_ball, wos_stable_exit

    t0 = time.perf_counter()
    rng = RngStream(spec.seed, spec.stream)
    if spec.method == "exact-ball":
        pts = sample_exit_ball(spec.sp, spec.domain, rng, spec.n)
        steps = np.ones(spec.n, dtype=np.int64)
    else:
        pts, steps = wos_stable_exit(spec.sp, spec.domain, spec.x0, rng, spec.n)
    c, r = spec.domain.c, spec.domain.radius
    rad = np.linalg.norm(pts - c, axis=1) / r
    if np.allclose(spec.x0, spec.domain.center):
        stat = kstest(rad, lambda t: 1.0 - radial_exit_sf(spec.sp.alpha, np.maximum(t, 1.0))).statistic
        compared = "radius |Y - c| / r"
    else:
        stat = kstest(pts[:, 0], lambda t: exit_cdf_line(spec.sp, spec.domain, t, spec.x0[0])).statistic
        compared = "position"
    tail = float(np.mean(rad > 2.0))
    details = {"ks_statistic": float(stat), "compared": compared, "p_radius_above_2": tail,
               "mean_steps": float(np.mean(steps)), "max_steps": int(np.max(steps)), "method": spec.method}
    with open(outdir / f"{spec.experiment_id}_samples.csv", "w") as fh:
        cols = ",".join(f"y{i + 1}" for i in range(pts.shape[1]))
        fh.write(f"{cols},steps\n")
        for row, st in zip(pts, steps):
            fh.write(",".join(repr(float(v)) for v in row) + f",{int(st)}\n")
    return IdentityReport.from_sides("exit-law", float(stat), 0.0, "monte-carlo", [("ks-tolerance", spec.ks_tol)],
                                     seed=spec.seed, experiment_id=spec.experiment_id, d=spec.domain.d,
                                     alpha=spec.sp.alpha, runtime_ms=(time.perf_counter() - t0) * 1e3,
                                     details=details)


def _flagged(job: Job, exc: BaseException) -> IdentityReport:
    e = job.entry
    alpha = float(e["alpha"]) if "alpha" in e else None
    d = len(np.atleast_1d(e["domain"]["center"]))
    return IdentityReport(job.identity, math.nan, math.nan, math.nan, math.nan,
                          e.get("lhs_method", "monte-carlo" if job.identity == "exit-law" else "exact-kernel-integral"),
                          [], seed=job.seed, experiment_id=job.experiment_id, d=d, alpha=alpha,
                          p=float(e["p"]) if "p" in e else None,
                          details={"error": f"{type(exc).__name__}: {exc}"})


def run_job(job: Job, outdir: str) -> IdentityReport:
    try:
        if job.identity == "exit-law":
            return run_exit_law(build_exit_law(job), Path(outdir))
        return verify(build_spec(job))
    except (ArithmeticError, RuntimeError, DomainError) as exc:
        return _flagged(job, exc)


def execute(jobs, outdir: Path, n_workers: int):
    if n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as ex:
            return list(ex.map(run_job, jobs, [str(outdir)] * len(jobs)))
    return [run_job(j, str(outdir)) for j in jobs]


def _summary(rep: IdentityReport) -> str:
    status = "PASS" if rep.passed else "FAIL"
    msg = f"{status} {rep.experiment_id} [{rep.identity_id}] lhs={rep.lhs:.10g} rhs={rep.rhs:.10g} " \
          f"abs_err={rep.abs_err:.3g} budget={rep.budget:.3g}"
    if "error" in rep.details:
        msg += f" ({rep.details['error']})"
    return msg


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hardystein", description="Numerical checks of Hardy-Stein identities.")
    ap.add_argument("subcommand", choices=sorted(SUBCOMMANDS))
    ap.add_argument("--config", required=True, type=Path, help="experiment file (TOML)")
    ap.add_argument("--out", type=Path, help="output directory (default: [defaults].out)")
    ap.add_argument("--seed", type=int, help="override every experiment's seed")
    ap.add_argument("--jobs", type=int, default=1, help="experiments run in parallel")
    ap.add_argument("--format", choices=("csv", "json"), help="report format (default: [defaults].format)")
    ap.add_argument("--timing", action="store_true", help="fill runtime_ms (off keeps output reproducible)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("--jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        defaults, jobs = load_config(args.config, args.subcommand, args.seed)
    except ConfigError as exc:
        print(f"{args.config}:{exc.line}: {exc.msg}", file=sys.stderr)
        return 2
    outdir = args.out or Path(defaults["out"])
    fmt = args.format or defaults["format"]
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create {outdir}: {exc.strerror}", file=sys.stderr)
        return 2
    reports = execute(jobs, outdir, args.jobs)
    for rep in reports:
        print(_summary(rep))
    path = emit_report(reports, fmt, outdir / f"{args.subcommand}.{fmt}", timing=args.timing)
    write_plots(reports, outdir)
    print(f"wrote {path}")
    return 0 if all(r.passed for r in reports) else 1


if __name__ == "__main__":
    sys.exit(main())
