"""Command-line interface: render, pcf, verify, heights, gamma, capacity.

Exit codes: 0 success, 1 computational failure, 2 usage error.  Every run
records its resolved RunConfig (in the sidecar or the JSON output), and
``--config FILE`` replays a recorded run.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import random
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import __version__
from .errors import Per1Error
from .exact.scalars import is_exact, parse_scalar, to_complex

log = logging.getLogger("per1lab")

THREADS_ENV = "PER1LAB_THREADS"
SUBCOMMANDS = ("render", "pcf", "verify", "heights", "gamma", "capacity")


class UsageError(Exception):
    pass


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass
class RunConfig:
    subcommand: str
    lam: str | None = None
    t: str | None = None
    window: str | None = None
    resolution: int | None = None
    n: int | None = None
    m: int | None = None
    sign: str = "+"
    tol: float = 1e-12
    out: str | None = None
    threads: int = 1
    seed: int = 0
    options: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


# -- helpers ------------------------------------------------------------------------

def _lam(cfg: RunConfig, exact: bool = False):
    if cfg.lam is None:
        raise UsageError("--lambda is required")
    try:
        x = parse_scalar(cfg.lam)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad --lambda {cfg.lam!r}: {exc}") from None
    if exact and not is_exact(x):
        raise UsageError("this command needs an exact lambda (integer or p/q)")
    if x == 0:
        raise UsageError("lambda must be nonzero")
    return x


def _rational(x, what: str) -> Fraction:
    if not isinstance(x, Fraction):
        raise UsageError(f"{what} must be rational here")
    return x


def _signs(cfg: RunConfig) -> list[int]:
    s = cfg.sign
    if s == "both":
        return [1, -1]
    if s in ("+", "plus", "1"):
        return [1]
    if s in ("-", "minus", "-1"):
        return [-1]
    raise UsageError(f"sign must be +, - or both, got {s!r}")


def _emit(obj: dict, cfg: RunConfig):
    obj = dict(obj, config=dataclasses.asdict(cfg))
    text = json.dumps(obj, indent=2, default=_jsonable)
    if cfg.out:
        Path(cfg.out).write_text(text + "\n")
    print(text)


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, Fraction):
        return str(x)
    if hasattr(x, "tolist"):
        return x.tolist()
    return str(x)


# -- subcommands ------------------------------------------------------------------------

def cmd_render(cfg: RunConfig) -> int:
    from .imaging import write_image, write_sidecar
    from .measure import OVERLAY_PALETTE, Window, measure_density, overlay_indices, render_bifurcation

    lam = to_complex(_lam(cfg))
    try:
        win = Window.parse(cfg.window or "-3:3:-3:3")
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    res = cfg.resolution or 512
    if res < 2:
        raise UsageError("--res must be at least 2")
    out = Path(cfg.out or "render.png")
    opts = cfg.options
    mode = opts.get("mode", "locus")
    written = []
    if mode == "density":
        import numpy as np

        for s in _signs(cfg):
            d = measure_density(lam, win, res, s, opts.get("density_tol", 1e-8), cfg.threads)
            v = np.clip(d.values, 0, None)
            top = float(np.quantile(v, 0.999)) or 1.0
            img = (255 - np.clip(255 * v / top, 0, 255)).astype(np.uint8)
            p = write_image(out.with_name(f"{out.stem}{'_plus' if s > 0 else '_minus'}{out.suffix}"), img)
            write_sidecar(p, {**d.sidecar(), "config": dataclasses.asdict(cfg)})
            written.append(str(p))
            log.info("mass %.6g, negative cells %d", d.meta["mass"], d.meta["negative_cells"])
    elif mode == "locus":
        renders = {}
        for s in _signs(cfg):
            r = render_bifurcation(lam, win, res, s, opts.get("max_period", 20), opts.get("budget", 1000),
                                   threads=cfg.threads)
            renders[s] = r
            p = write_image(out.with_name(f"{out.stem}{'_plus' if s > 0 else '_minus'}{out.suffix}"), r.image)
            meta = r.field.sidecar()
            meta.update(undetected=int((r.period == 0).sum()), mask_cells=int(r.mask.sum()),
                        config=dataclasses.asdict(cfg))
            write_sidecar(p, meta)
            written.append(str(p))
        if len(renders) == 2:
            p = write_image(out.with_name(f"{out.stem}_overlay{out.suffix}"),
                            overlay_indices(renders[1], renders[-1]), OVERLAY_PALETTE)
            both = renders[1].mask & renders[-1].mask
            write_sidecar(p, {"window": str(win), "resolution": [res, res], "overlap_cells": int(both.sum()),
                              "palette": {"252": "plus", "253": "minus", "254": "both"},
                              "config": dataclasses.asdict(cfg)})
            written.append(str(p))
    else:
        raise UsageError(f"unknown render mode {mode!r}")
    for w in written:
        print(w)
    return 0


def cmd_pcf(cfg: RunConfig) -> int:
    from .pcf import build_pcf_equation, solve_all_roots

    if cfg.n is None or cfg.m is None:
        raise UsageError("--n and --m are required")
    if not (0 <= cfg.m < cfg.n):
        raise UsageError("need 0 <= m < n")
    lam = _lam(cfg, exact=True)
    (s,) = _signs(cfg) if cfg.sign != "both" else (None,)
    if s is None:
        raise UsageError("pcf takes a single sign")
    eq = build_pcf_equation(lam, cfg.n, cfg.m, s)
    rs = solve_all_roots(eq, seed=cfg.seed)
    fmt = cfg.options.get("format", "csv")
    text = rs.to_csv() if fmt == "csv" else json.dumps(
        dict(json.loads(rs.to_json()), degree=eq.degree, config=dataclasses.asdict(cfg)), indent=2)
    if cfg.out:
        Path(cfg.out).write_text(text)
        Path(cfg.out).with_suffix(".config.json").write_text(cfg.to_json() + "\n")
    sys.stdout.write(text)
    return 0


# verify checks: each returns (passed, detail)

def _check_h12(lam_text):
    from .measure import verify_H12

    lams = [to_complex(parse_scalar(lam_text))] if lam_text else [2, -4, 3, 1.1j, -2]
    worst = [0.0, 0.0]
    for lam in lams:
        r = verify_H12(lam)
        worst = [max(worst[0], r["dev_plus"]), max(worst[1], r["dev_minus"])]
    return worst[0] < 1e-8 and worst[1] < 1e-6, f"max deviations {worst[0]:.2e}, {worst[1]:.2e}"


def _check_symmetry(lam_text, seed=0):
    from .core import MapParams, escape_rate

    rng = random.Random(seed)
    worst = 0.0
    for _ in range(100):
        r, a = rng.uniform(0.2, 5), rng.uniform(0, 2 * math.pi)
        # the unit circle is excluded apart from lambda = 1
        lam = 1.0 if abs(r - 1) < 0.02 else r * complex(math.cos(a), math.sin(a))
        t = complex(rng.uniform(-6, 6), rng.uniform(-6, 6))
        hm = escape_rate(MapParams(lam, t), -1, 1e-12).value
        hp = escape_rate(MapParams(lam, -t), 1, 1e-12).value
        worst = max(worst, abs(hm - hp))
    return worst < 1e-9, f"max |H-(t) - H+(-t)| = {worst:.2e} over 100 samples"


def _check_resultant(lam_text):
    from .exact.family import iterate_param_poly, resultant_recursive
    from .exact.resultant import sylvester_resultant

    lams = [parse_scalar(lam_text)] if lam_text else [Fraction(2), Fraction(-2), Fraction(1, 2), Fraction(5, 3)]
    for lam in lams:
        if not is_exact(lam):
            return False, "resultant check needs an exact lambda"
        for n in range(1, 6):
            P, Q = iterate_param_poly(lam, n)
            d = 2 ** (n - 1)
            if sylvester_resultant(P, Q, d, d) != resultant_recursive(lam, n):
                return False, f"mismatch at lambda={lam}, n={n}"
    return True, f"exact equality for n <= 5 at {len(lams)} lambda values"


def _check_global(lam_text):
    from .adelic import global_gamma_sum, global_log_capacity_sum

    lams = [parse_scalar(lam_text)] if lam_text else [Fraction(1), Fraction(2), Fraction(3, 2)]
    worst = 0.0
    for lam in lams:
        for g in (global_gamma_sum(lam, 60), global_log_capacity_sum(lam, 60)):
            bound = g.tail_bound + rounding_bound(g)
            if not (abs(g.total) <= bound <= 1e-10):
                return False, f"lambda={lam}: |sum| {abs(g.total):.2e} vs bound {bound:.2e}"
            worst = max(worst, abs(g.total))
    return True, f"max |sum_v| = {worst:.2e}"


def rounding_bound(g) -> float:
    """Floating-point error allowance for a sum of per-place values."""
    mag = sum(abs(v) for v in g.per_place.values())
    return 4 * len(g.per_place) * sys.float_info.epsilon * max(mag, 1.0)


def _check_period3(lam_text):
    from .core import MapParams, eval_map
    from .pcf import ell_at_two_sqrt3, period3_witness

    w = period3_witness()
    p = MapParams(-2, w.t0)
    z = 1.0
    for _ in range(3):
        z = eval_map(p, z)
    ok = (2 * math.sqrt(3) < w.t0 < 10 and w.residual < 1e-10 and abs(z - 1) < 1e-8
          and abs(eval_map(p, 1.0) - 1) > 1e-6 and ell_at_two_sqrt3() == 16)
    return ok, f"t0 = {w.t0:.15g}, |l(t0)| = {w.residual:.1e}, |f^3(1) - 1| = {abs(z - 1):.1e}"


def _check_claim2(lam_text):
    from .measure import claim2_minimum, claim2_profile

    best, args = claim2_minimum()
    targets = [math.pi / 3, math.pi, 5 * math.pi / 3]
    ok = abs(best - 2) < 1e-9 and len(args) == 3 and all(abs(a - b) < 1e-5 for a, b in zip(args, targets))
    for k in range(100):
        claim2_profile(math.pi / 3 + k * (4 * math.pi / 3) / 99)
    return ok, f"min {best:.12f} at {[round(a, 6) for a in args]}"


CHECKS = {
    "h12": _check_h12,
    "symmetry": _check_symmetry,
    "resultant": _check_resultant,
    "global": _check_global,
    "period3": _check_period3,
    "claim2": _check_claim2,
}


def cmd_verify(cfg: RunConfig) -> int:
    names = cfg.options.get("checks") or list(CHECKS)
    bad = [c for c in names if c not in CHECKS]
    if bad:
        raise UsageError(f"unknown checks {bad}; choose from {sorted(CHECKS)}")
    failed = 0
    rows = []
    for name in names:
        try:
            ok, detail = CHECKS[name](cfg.lam)
        except (Per1Error, AssertionError, ArithmeticError) as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        failed += not ok
        rows.append({"check": name, "passed": ok, "detail": detail})
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    if cfg.out:
        Path(cfg.out).write_text(json.dumps({"checks": rows, "config": dataclasses.asdict(cfg)}, indent=2) + "\n")
    return 1 if failed else 0


def cmd_heights(cfg: RunConfig) -> int:
    from .adelic import height_report

    lam = _rational(_lam(cfg, exact=True), "lambda")
    if cfg.t is None:
        raise UsageError("--t is required")
    t = _rational(parse_scalar(cfg.t), "t")
    (s,) = _signs(cfg) if cfg.sign != "both" else (None,)
    if s is None:
        raise UsageError("heights takes a single sign")
    _emit(height_report(lam, t, s, cfg.tol), cfg)
    return 0


def cmd_gamma(cfg: RunConfig) -> int:
    from .adelic import Place, gamma_v_result, global_gamma_sum

    lam = _rational(_lam(cfg, exact=True), "lambda")
    try:
        places = [Place.parse(p) for p in cfg.options.get("places", "inf").split(",") if p]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = []
    for v in places:
        r = gamma_v_result(lam, v, cfg.tol)
        rows.append({"place": str(v), "gamma_v": r.value, "terms": r.terms, "tail": r.tail_bound})
    g = global_gamma_sum(lam, cfg.options.get("truncation", 60))
    _emit({"lambda": str(lam), "places": rows,
           "global_sum": {"total": g.total, "tail_bound": g.tail_bound,
                          "rounding_bound": rounding_bound(g), "truncation": g.truncation,
                          "per_place": {str(k): v for k, v in g.per_place.items()}}}, cfg)
    return 0


def cmd_capacity(cfg: RunConfig) -> int:
    from .exact.family import iterate_param_poly, log_capacity_closed, log_capacity_resultant, resultant_mod_check

    mode = cfg.options.get("mode", "closed-form")
    if mode not in ("closed-form", "resultant-limit", "both"):
        raise UsageError(f"unknown capacity mode {mode!r}")
    out = {"lambda": cfg.lam}
    if mode in ("closed-form", "both"):
        lam = to_complex(_lam(cfg)) if not is_exact(_lam(cfg)) else _lam(cfg)
        r = log_capacity_closed(lam, cfg.tol)
        out["closed_form"] = {"capacity": r.value, "log_capacity": r.log_value, "terms": r.terms,
                              "tail_bound": r.tail_bound}
    if mode in ("resultant-limit", "both"):
        lam = _lam(cfg, exact=True)
        n = cfg.n or 12
        r = log_capacity_resultant(lam, n)
        entry = {"capacity": r.value, "log_capacity": r.log_value, "n": n}
        if isinstance(lam, Fraction) and cfg.options.get("certify", True):
            entry["modular_certificate"] = {str(p): ok for p, ok in
                                            resultant_mod_check(lam, n, polys=iterate_param_poly(lam, n)).items()}
        out["resultant_limit"] = entry
    if mode == "both":
        out["gap"] = abs(out["closed_form"]["log_capacity"] - out["resultant_limit"]["log_capacity"])
    _emit(out, cfg)
    cert = out.get("resultant_limit", {}).get("modular_certificate", {})
    return 1 if cert and not all(cert.values()) else 0


COMMANDS = {"render": cmd_render, "pcf": cmd_pcf, "verify": cmd_verify, "heights": cmd_heights,
            "gamma": cmd_gamma, "capacity": cmd_capacity}


# -- argument parsing --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="per1lab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def common(p, sign_default="+"):
        p.add_argument("--lambda", dest="lam", help="integer, p/q, a+bi or decimal")
        p.add_argument("--sign", default=sign_default)
        p.add_argument("--tol", type=float, default=1e-12)
        p.add_argument("--out")
        p.add_argument("--threads", type=int, default=None, help=f"default from ${THREADS_ENV} or 1")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", help="replay a recorded RunConfig JSON")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("render", help="bifurcation loci or measure density image")
    common(p)
    p.add_argument("--window", default="-3:3:-3:3", help="xmin:xmax:ymin:ymax")
    p.add_argument("--res", dest="resolution", type=int, default=512)
    p.add_argument("--mode", choices=["locus", "density"], default="locus")
    p.add_argument("--max-period", type=int, default=20)
    p.add_argument("--budget", type=int, default=1000)

    p = sub.add_parser("pcf", help="roots of f_t^n(c) = f_t^m(c)")
    common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--format", choices=["csv", "json"], default="csv")

    p = sub.add_parser("verify", help="run the identity and consistency checks")
    common(p)
    p.add_argument("--check", action="append", choices=sorted(CHECKS), help="repeatable; default all")

    p = sub.add_parser("heights", help="local heights and the canonical height")
    common(p)
    p.add_argument("--t", required=False)

    p = sub.add_parser("gamma", help="per-place gamma values and the global sum")
    common(p)
    p.add_argument("--places", default="inf", help="comma list of primes and inf")
    p.add_argument("--truncation", type=int, default=60)

    p = sub.add_parser("capacity", help="homogeneous capacity")
    common(p)
    p.add_argument("--mode", choices=["closed-form", "resultant-limit", "both"], default="closed-form")
    p.add_argument("--n", type=int)
    return ap


_OPTION_KEYS = {
    "render": ("mode", "max_period", "budget"),
    "pcf": ("format",),
    "verify": ("check",),
    "gamma": ("places", "truncation"),
    "capacity": ("mode",),
    "heights": (),
}


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    if getattr(ns, "config", None):
        try:
            text = Path(ns.config).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        data = json.loads(text)
        # a sidecar carries the config under "config"
        cfg = RunConfig.from_json(json.dumps(data.get("config", data)))
        if cfg.subcommand != ns.subcommand:
            raise UsageError(f"config is for {cfg.subcommand!r}, not {ns.subcommand!r}")
        return cfg
    opts = {}
    for k in _OPTION_KEYS[ns.subcommand]:
        v = getattr(ns, k, None)
        if v is not None:
            opts["checks" if k == "check" else k] = v
    return RunConfig(
        subcommand=ns.subcommand, lam=ns.lam, t=getattr(ns, "t", None), window=getattr(ns, "window", None),
        resolution=getattr(ns, "resolution", None), n=getattr(ns, "n", None), m=getattr(ns, "m", None),
        sign=ns.sign, tol=ns.tol, out=ns.out,
        threads=ns.threads if ns.threads is not None else default_threads(), seed=ns.seed, options=opts)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(ns)
        if cfg.threads < 1:
            raise UsageError("--threads must be >= 1")
        return COMMANDS[cfg.subcommand](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (Per1Error, ArithmeticError) as exc:
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
