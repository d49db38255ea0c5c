"""Command-line entry point: ``heatchain <command> --config run.toml --out DIR``.

Every run writes its CSV outputs and a manifest.json (resolved config, seed,
package version and a hash of the package sources) into --out. A manifest can
be passed back as --config to repeat the run.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .chain import ChainParams, ValidationError
from .selfconsistent import NonConvergence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("heatchain")

COMMANDS = ("simulate", "selfconsistent", "ou-check", "polymer-eval", "kp-cert", "oracle-compare",
            "conductivity-sweep")


def source_hash() -> str:
    h = hashlib.sha256()
    root = Path(__file__).parent
    for f in sorted(root.rglob("*.py")):
        h.update(f.relative_to(root).as_posix().encode())
        h.update(f.read_bytes())
    return h.hexdigest()


def load_config(path: str | None) -> tuple[dict, int | None]:
    if path is None:
        return {}, None
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"config file {path} not found")
    if p.suffix == ".json":
        man = json.loads(p.read_text())
        return man["config"], man.get("seed")
    with p.open("rb") as fh:
        return tomllib.load(fh), None


def _need(section: dict, key: str, name: str):
    if key not in section:
        raise ValidationError(f"[{name}] needs '{key}'")
    return section[key]


def _section(cfg: dict, name: str) -> dict:
    sec = cfg.get(name)
    if sec is None:
        raise ValidationError(f"config needs a [{name}] section")
    return sec


def _chain(cfg: dict) -> ChainParams:
    c = _section(cfg, "chain")
    N = int(_need(c, "N", "chain"))
    if "temps" in c:
        temps = c["temps"]
    else:
        temps = np.linspace(float(_need(c, "T1", "chain")), float(_need(c, "TN", "chain")), N)
    return ChainParams.uniform(N=N, M=_need(c, "M", "chain"), lam=float(_need(c, "lam", "chain")),
                               zeta=_need(c, "zeta", "chain"), temps=temps, J=float(c.get("J", 0.0)),
                               p=float(c.get("p", 2.0)), range=c.get("range"))


def _sim(cfg: dict, seed: int, workers: int):
    from .langevin import SimConfig
    s = _section(cfg, "sim")
    return SimConfig(dt=float(_need(s, "dt", "sim")), n_steps=int(_need(s, "n_steps", "sim")),
                     burn_in=int(s.get("burn_in", 0)), seed=seed, batch_count=int(s.get("batch_count", 20)),
                     scheme=s.get("scheme", "splitting"), replicas=int(s.get("replicas", 1)), workers=workers)


def _polymer(cfg: dict):
    from .polymer import PolymerParams
    c = _section(cfg, "polymer")
    T = c.get("T", 1.0)
    return PolymerParams(N=int(_need(c, "N", "polymer")), zeta=float(_need(c, "zeta", "polymer")),
                         M=float(_need(c, "M", "polymer")), lam=float(_need(c, "lam", "polymer")),
                         J=float(_need(c, "J", "polymer")), T=tuple(T) if isinstance(T, list) else float(T),
                         p=float(c.get("p", 2.0)), c1=float(c.get("c1", 0.0)), range=c.get("range"))


# ---------------------------------------------------------------- commands

def cmd_simulate(cfg, seed, workers, out: Path) -> dict:
    from .langevin import run
    params = _chain(cfg)
    stats = run(params, _sim(cfg, seed, workers))
    (out / "observables.csv").write_text(stats.to_csv())
    return {"observables.csv": "per-site steady-state estimates"}


def cmd_selfconsistent(cfg, seed, workers, out: Path) -> dict:
    from .selfconsistent import ScSolveConfig, solve_profile
    params = _chain(cfg)
    s = cfg.get("selfconsistent", {})
    sc = ScSolveConfig(sim=_sim(cfg, seed, workers), eta=float(s.get("eta", 0.5)), tol=float(s.get("tol", 1e-2)),
                       max_outer=int(s.get("max_outer", 20)), min_outer=int(s.get("min_outer", 1)))
    try:
        res = solve_profile(params, sc)
    except NonConvergence as exc:
        from .selfconsistent import trace_csv
        (out / "trace.csv").write_text(trace_csv(exc.trace))
        raise
    (out / "trace.csv").write_text(res.trace_csv())
    (out / "observables.csv").write_text(res.stats.to_csv())
    return {"trace.csv": "iteration trace", "observables.csv": "final-iteration estimates"}


def cmd_ou_check(cfg, seed, workers, out: Path) -> dict:
    from . import ou
    c = _section(cfg, "ou")
    if "alpha" in c:
        par = ou.OuParams(alpha=float(c["alpha"]), M=float(_need(c, "M", "ou")), T=float(c.get("T", 1.0)))
    else:
        par = ou.OuParams.from_zeta(float(_need(c, "zeta", "ou")), float(_need(c, "M", "ou")), float(c.get("T", 1.0)))
    rows = [("# ou audit, eps = 1/zeta = %r" % (1.0 / par.zeta)), "quantity,value,reference,abs_diff"]
    C = ou.stationary_covariance(par)
    Cq = ou.covariance_by_quadrature(par)
    for (i, k), name in zip([(0, 0), (0, 1), (1, 1)], ["C_qq", "C_qp", "C_pp"]):
        rows.append(f"{name},{float(Cq[i, k])!r},{float(C[i, k])!r},{float(abs(Cq[i, k] - C[i, k]))!r}")
    for p0 in (0.0, 0.5, 1.0, math.pi):
        a, b = ou.dhat_numeric(p0, par), float(ou.dhat_exact(p0, par))
        rows.append(f"dhat({p0!r}),{a!r},{b!r},{abs(a - b)!r}")
    audit = ou.offdiagonal_audit(par)
    rows.append(f"max_offdiag_ratio,{float(audit['max_offdiag_ratio'])!r},,")
    rows.append(f"decay_rate_bound,{float(ou.decay_rate_bound(par))!r},,")
    (out / "ou_check.csv").write_text("\n".join(rows) + "\n")
    return {"ou_check.csv": "covariance, kernel and decay audits"}


def cmd_polymer_eval(cfg, seed, workers, out: Path) -> dict:
    from .polymer import Cell, Lattice, PolymerEngine, log_partition_series, two_point_series
    params = _polymer(cfg)
    c = cfg["polymer"]
    lat = Lattice(int(c.get("n_times", 2)), params.N)
    eng = PolymerEngine(params, lat)
    max_n, max_size = int(c.get("max_n", 3)), int(c.get("max_size", 3))
    lines = [f"# polymer activities, eps = 1/zeta = {params.eps!r}", "cells,activity,quad_error"]
    for R in eng.polymers(max_size):
        v, e = eng.activity(R)
        lines.append('"%s",%r,%r' % (" ".join(f"({x.t};{x.j})" for x in R), v, e))
    (out / "activities.csv").write_text("\n".join(lines) + "\n")
    ls = log_partition_series(eng, max_n, max_size)
    lines = ["# truncated series", "quantity,value,quad_error,truncation_error," +
             ",".join(f"order_{k + 1}" for k in range(max_n))]
    lines.append("log_xi,%r,%r,%r," % (ls.value, ls.quad_error, ls.truncation_error) +
                 ",".join(repr(float(v)) for v in ls.per_order))
    x0 = Cell(*c.get("x", [1, 0]))
    obs = tuple(c.get("observable", ["q", "q"]))
    for y in lat.cells:
        if y.t != x0.t:
            continue
        s = two_point_series(eng, x0, y, obs, max_n, max_size)
        lines.append("S2[(%d;%d)-(%d;%d)],%r,%r,%r," % (x0.t, x0.j, y.t, y.j, s.value, s.quad_error,
                                                       s.truncation_error) +
                     ",".join(repr(float(v)) for v in s.per_order))
    (out / "series.csv").write_text("\n".join(lines) + "\n")
    return {"activities.csv": "polymer activities", "series.csv": "log Xi and S2 series"}


def cmd_kp_cert(cfg, seed, workers, out: Path) -> dict:
    from .polymer import kp_check
    params = _polymer(cfg)
    grid = cfg.get("kp", {}).get("lam_grid")
    lams = [float(x) for x in grid] if grid else [params.lam]
    lines = ["# convergence certificate scan, eps = 1/zeta = %r" % params.eps, "lambda,eps_K,kp_sum,pass,reason"]
    last = None
    for lam in lams:
        cert = kp_check(params.replace(lam=lam))
        lines.append("%r,%r,%r,%d,%s" % (lam, float(cert.eps_K), float(cert.kp_sum), int(cert.passed), cert.reason))
        last = cert
    (out / "kp_scan.csv").write_text("\n".join(lines) + "\n")
    (out / "certificate.csv").write_text(last.to_csv())
    (out / "certificate.txt").write_text(last.report() + "\n")
    return {"kp_scan.csv": "certificate per lambda", "certificate.csv": "last certificate detail"}


def cmd_oracle_compare(cfg, seed, workers, out: Path, cells: int | None = None) -> dict:
    from .oracle import Comparison, comparison_csv, direct_two_point
    from .polymer import Lattice, PolymerEngine, two_point_series
    params = _polymer(cfg)
    c = cfg.get("oracle", {})
    n_cells = cells or int(c.get("cells", 2))
    shapes = [(nt, n_cells // nt) for nt in range(1, n_cells + 1) if n_cells % nt == 0]
    max_n = int(c.get("max_n", 4))
    rows = []
    for nt, N in shapes:
        p = params.replace(N=N)
        lat = Lattice(nt, N)
        eng = PolymerEngine(p, lat)
        x = lat.cells[0]
        for y in lat.cells:
            s = two_point_series(eng, x, y, ("q", "q"), max_n, len(lat))
            d = direct_two_point(x, y, lat, p)
            rows.append(Comparison(f"{nt}x{N}:S2[({x.t};{x.j})-({y.t};{y.j})]", float(s.value), s.error,
                                   d.value, d.error))
    (out / "oracle_compare.csv").write_text(comparison_csv(rows))
    if not all(r.passed for r in rows):
        log.warning("some engine/oracle rows are outside tolerance")
    return {"oracle_compare.csv": "engine vs brute force"}


def cmd_conductivity_sweep(cfg, seed, workers, out: Path) -> dict:
    from .conductivity import SweepConfig, run_sweep
    s = dict(_section(cfg, "sweep"))
    Ts = [float(t) for t in s.pop("T", [2, 4, 8, 16])]
    for key in ("N", "M", "J", "lam", "zeta"):
        _need(s, key, "sweep")
    s.pop("seed", None)
    sc = SweepConfig(**s, seed=seed)
    res = run_sweep(Ts, sc, workers=workers)
    (out / "sweep.csv").write_text(res.to_csv())
    if res.fit is not None:
        (out / "fit.txt").write_text(res.fit.report() + "\n")
    return {"sweep.csv": "per-temperature flux and conductivity", "fit.txt": "exponent fit"}


HANDLERS = {
    "simulate": cmd_simulate, "selfconsistent": cmd_selfconsistent, "ou-check": cmd_ou_check,
    "polymer-eval": cmd_polymer_eval, "kp-cert": cmd_kp_cert, "oracle-compare": cmd_oracle_compare,
    "conductivity-sweep": cmd_conductivity_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="heatchain", description="Anharmonic chain heat-transport experiments")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="TOML config, or a manifest.json from an earlier run")
        sp.add_argument("--seed", type=int, default=None, help="64-bit seed (overrides the manifest)")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out", default="out")
        if name == "oracle-compare":
            sp.add_argument("--cells", type=int, default=None, choices=(1, 2, 3))
    return ap


def run_command(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg, man_seed = load_config(args.config)
        seed = args.seed if args.seed is not None else (man_seed if man_seed is not None else 0)
        if not 0 <= seed < 2 ** 64:
            raise ValidationError("seed must be an unsigned 64-bit integer")
        if args.workers < 1:
            raise ValidationError("--workers must be >= 1")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        handler = HANDLERS[args.command]
        kw = {"cells": args.cells} if args.command == "oracle-compare" else {}
        artifacts = handler(cfg, seed, args.workers, out, **kw)
        manifest = {"command": args.command, "config": cfg, "seed": seed, "version": __version__,
                    "source_sha256": source_hash(), "artifacts": artifacts}
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FloatingPointError, NonConvergence, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
