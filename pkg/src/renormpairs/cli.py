"""Command-line driver: deterministic experiments with file outputs.

Subcommands: rho, pair, renorm, fixed-point, spectrum, partition, renorm2d,
attractor, staircase. Configuration comes from an optional JSON file plus
flags (flags win). Exit codes: 0 ok, 2 configuration error, 3 numerical
failure (module error name on stderr), 4 precision insufficient.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, arnold, contfrac, hyper1d, microscope, pairs
from . import renorm1d, twodim
from .errors import ConfigError, PrecisionError, RenormError

KNOWN_KEYS = {
    "a", "omega", "eps", "level", "n", "depth", "maxDepth", "levels", "N",
    "Nx", "Ny", "tol", "iterations", "out", "dim", "omega_lo", "omega_hi",
    "points", "fixed_point", "target",
}


def _load_config(args):
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        unknown = set(cfg) - KNOWN_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key, val in vars(args).items():
        if key in KNOWN_KEYS and val is not None:
            cfg[key] = val
    return cfg


def _out_path(cfg, default):
    return Path(cfg.get("out", default))


def _write(path, text):
    Path(path).write_text(text)
    print(f"wrote {path}")


def _golden_terms(cfg, count=40):
    target = cfg.get("target", "golden")
    if target == "golden":
        return [1] * count
    if isinstance(target, list):
        return [int(t) for t in target]
    raise ConfigError(f"unsupported target {target!r}")


def cmd_rho(cfg):
    lift = arnold.CircleLift(cfg.get("a", 0.0), cfg.get("omega", 0.25))
    rep = arnold.rotation_number_lift(lift, cfg.get("iterations", 100_000),
                                      refine=True)
    print(f"rho = {rep.value!r}  bracket [{rep.low!r}, {rep.high!r}]")
    return 0


def cmd_pair(cfg):
    a = cfg.get("a", 1.0)
    terms = _golden_terms(cfg)
    omega = cfg.get("omega")
    if omega is None:
        omega = arnold.tune_omega(a, terms, tol=cfg.get("tol", 1e-10))
    p = arnold.extract_pair(arnold.CircleLift(a, omega), cfg.get("level", 0),
                            cf_terms=terms, degree=cfg.get("N", 40))
    defect = pairs.commutator_defect(p)
    rep = pairs.rotation_number_heights(p, cfg.get("maxDepth", 10))
    record = {
        "pair": p.to_record(),
        "omega": omega,
        "commutatorDefect": list(map(float, defect)),
        "rotation": rep.to_record(),
    }
    _write(_out_path(cfg, "pair.json"), json.dumps(record, indent=1))
    print(f"critical={p.critical} heights={rep.terms}")
    return 0


def cmd_renorm(cfg):
    a = cfg.get("a", 1.0)
    terms = _golden_terms(cfg)
    omega = cfg.get("omega") or arnold.tune_omega(a, terms, tol=1e-10)
    p = arnold.extract_pair(arnold.CircleLift(a, omega), cfg.get("level", 0),
                            cf_terms=terms, degree=cfg.get("N", 40))
    orbit = renorm1d.renormalize_n(p, cfg.get("n", 8))
    rows = ["step,height,lambda,eta0,producer"]
    for k, s in enumerate(orbit.steps):
        rows.append(f"{k},{s.r},{s.lam!r},{s.result.eta0!r},"
                    f"renormpairs {__version__}")
    _write(_out_path(cfg, "renorm.csv"), "\n".join(rows) + "\n")
    return 0


def cmd_fixed_point(cfg):
    a = cfg.get("a", 1.0)
    terms = _golden_terms(cfg)
    omega = cfg.get("omega") or arnold.tune_omega(a, terms, tol=1e-11)
    p = arnold.extract_pair(arnold.CircleLift(a, omega), 0, cf_terms=terms,
                            degree=cfg.get("N", 40))
    for _ in range(12):
        p = hyper1d.renorm_step_ac(p)
    zstar = hyper1d.newton_fixed_point(p, tol=cfg.get("tol", 1e-9))
    res = zstar.meta["newton_residual"]
    _write(_out_path(cfg, "fixed_point.json"),
           json.dumps(zstar.to_record(), indent=1))
    print(f"residual = {res:.3e}  eta*(0) = {zstar.eta0!r}")
    return 0


def cmd_spectrum(cfg):
    fp = cfg.get("fixed_point")
    if not fp or not Path(fp).exists():
        raise ConfigError("spectrum needs --fixed-point pointing at a "
                          "fixed_point.json produced by `fixed-point`")
    zstar = pairs.Pair.from_record(json.loads(Path(fp).read_text()))
    if cfg.get("dim", 1) == 2:
        rep, n_used = twodim.spectrum_2d(zstar, n=cfg.get("n", 6),
                                         degrees=(cfg.get("Nx", 26),
                                                  cfg.get("Ny", 3)))
        rec = rep.to_record()
        rec["renormDepth"] = n_used
    else:
        rep = hyper1d.jacobian_spectrum(zstar, compute_drift=False)
        rec = rep.to_record()
    _write(_out_path(cfg, "spectrum.json"), json.dumps(rec, indent=1))
    mods = np.abs(rep.eigenvalues)
    print(f"unstable count {rep.unstable_count}; top moduli "
          + " ".join(f"{m:.6f}" for m in mods[:4]))
    return 0


def cmd_partition(cfg):
    a = cfg.get("a", 1.0)
    terms = _golden_terms(cfg)
    omega = cfg.get("omega") or arnold.tune_omega(a, terms, tol=1e-10)
    p = arnold.extract_pair(arnold.CircleLift(a, omega), 0, cf_terms=terms)
    atlas = renorm1d.dynamical_partition(p, cfg.get("n", 6))
    base = _out_path(cfg, "partition.csv")
    _write(base, atlas.to_csv())
    _write(base.with_suffix(".svg"), atlas.to_svg())
    print(f"elements={len(atlas.elements)} maxdiam={atlas.max_diameter:.6f}")
    return 0


def cmd_renorm2d(cfg):
    a = cfg.get("a", 1.0)
    eps = cfg.get("eps", 1e-3)
    terms = _golden_terms(cfg, 30)
    omega = cfg.get("omega") or arnold.tune_omega_2d(a, eps, terms)
    amap = arnold.AnnulusMap2D(a, omega, eps)
    Z = arnold.extract_pair_2d(amap, cfg.get("level", 2), cf_terms=terms)
    step = twodim.renormalize_2d(Z, n=cfg.get("n", 6), eps_tube=0.2)
    _write(_out_path(cfg, "renorm2d.json"),
           json.dumps({"metrics": step.metrics, "n": step.n,
                       "kind": step.kind, "projected": step.projected},
                      indent=1, default=float))
    print(f"ell={step.ell!r} outYdep={step.result.ydep_norm:.3e}")
    return 0


def cmd_attractor(cfg):
    a = cfg.get("a", 1.0)
    eps = cfg.get("eps", 1e-3)
    terms = _golden_terms(cfg, 30)
    omega = cfg.get("omega") or arnold.tune_omega_2d(a, eps, terms,
                                                     max_depth=24)
    amap = arnold.AnnulusMap2D(a, omega, eps)
    Z = arnold.extract_pair_2d(amap, cfg.get("level", 2), cf_terms=terms)
    curve = microscope.build_attractor(Z, cfg.get("levels", 4),
                                       n=cfg.get("n", 3))
    base = _out_path(cfg, "attractor.csv")
    _write(base, curve.to_csv())
    _write(base.with_suffix(".svg"), curve.to_svg())
    hold = microscope.holder_estimate(curve)
    metrics = {
        "points": len(curve.ts),
        "maxDiameter": curve.max_diameter,
        "conjugacyDefect": curve.conjugacy_defect,
        "gluingDefect": curve.gluing_defect,
        "holderSlope": hold.slope,
        "holderCI": [hold.ci_low, hold.ci_high],
    }
    _write(base.with_suffix(".json"), json.dumps(metrics, indent=1))
    print(f"points={len(curve.ts)} maxdiam={curve.max_diameter:.5f} "
          f"defect={curve.conjugacy_defect:.5f} slope={hold.slope:.4f}")
    return 0


def cmd_staircase(cfg):
    a = cfg.get("a", 1.0)
    lo = cfg.get("omega_lo", 0.0)
    hi = cfg.get("omega_hi", 1.0)
    count = cfg.get("points", 101)
    omegas = np.linspace(lo, hi, count)
    rep = arnold.staircase(a, omegas, iterations=cfg.get("iterations", 20_000))
    rows = ["omega,rho,bracket,producer"]
    for w, r, b in zip(rep.omegas, rep.rhos, rep.brackets):
        rows.append(f"{w!r},{r!r},{b!r},renormpairs {__version__}")
    base = _out_path(cfg, "staircase.csv")
    _write(base, "\n".join(rows) + "\n")
    px = (rep.omegas - lo) / max(hi - lo, 1e-12) * 780 + 10
    py = 390 - rep.rhos * 380
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(px, py))
    _write(base.with_suffix(".svg"),
           f'<svg xmlns="http://www.w3.org/2000/svg" width="800" '
           f'height="400">\n<polyline points="{pts}" fill="none" '
           f'stroke="#cc6677" stroke-width="1"/>\n</svg>\n')
    print(f"{count} points, {len(rep.plateaus)} plateaus detected")
    return 0


COMMANDS = {
    "rho": cmd_rho,
    "pair": cmd_pair,
    "renorm": cmd_renorm,
    "fixed-point": cmd_fixed_point,
    "spectrum": cmd_spectrum,
    "partition": cmd_partition,
    "renorm2d": cmd_renorm2d,
    "attractor": cmd_attractor,
    "staircase": cmd_staircase,
}


def _parser():
    p = argparse.ArgumentParser(
        prog="renormpairs",
        description="circle-map renormalization laboratory")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON config file (flags override)")
    p.add_argument("--a", type=float)
    p.add_argument("--omega", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--level", type=int)
    p.add_argument("--levels", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--Nx", type=int)
    p.add_argument("--Ny", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--depth", type=int)
    p.add_argument("--maxDepth", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--points", type=int)
    p.add_argument("--omega-lo", dest="omega_lo", type=float)
    p.add_argument("--omega-hi", dest="omega_hi", type=float)
    p.add_argument("--fixed-point", dest="fixed_point")
    p.add_argument("--out")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PrecisionError as exc:
        print(f"PrecisionError: {exc}", file=sys.stderr)
        return 4
    except RenormError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
