"""Command-line front end.

Every subcommand writes its table to ``--output`` (CSV or JSON) with a
provenance header, and a short human-readable summary to stdout.  Exit
status 2 means a configuration error, 3 a numerical failure.

CSV column orders:

    count        spin, m, count
    sweep        lambda, total, near_zero, m_max_used, grid_delta
    functionals  name, value, error, divergent
    kernels      lambda, bs_count
    verify       lambda, count, rhs_shape
    hardy        spin, m, side, variant, constant, c, negative_inertia
                 (--pair classical: variant, constant, max_ratio, violations)
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DomainError, FactorizationError, IntegrationError, TruncationError
from .field_models import INTEGER_TOL, field_from_json, zero_field
from .functionals import DIVERGENCE_CAP
from .potential_models import potential_from_json
from .radial_spectra import PIVOT_TOL
from .bound_suite import STABILITY_RTOL

SUBCOMMANDS = ("count", "sweep", "functionals", "kernels", "verify", "hardy")
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

TOLERANCES = {
    "integer_flux": INTEGER_TOL,
    "pivot": PIVOT_TOL,
    "divergence_cap": DIVERGENCE_CAP,
    "psd_relative": 1e-10,
    "hardy_slack": 1e-9,
    "stability_rtol": STABILITY_RTOL,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _common(p: argparse.ArgumentParser, field=True, potential=True, lambdas=True):
    p.add_argument("--config", help="JSON file with option defaults")
    if field:
        p.add_argument("--field", default=None,
                       help="field spec: inline 'gaussian:alpha=0.3', JSON text or a JSON file")
    if potential:
        p.add_argument("--potential", default=None,
                       help="potential spec: inline 'disk:r=1', JSON text or a JSON file")
    if lambdas:
        p.add_argument("--lambda", dest="lam", type=float, default=None, help="single coupling")
        p.add_argument("--lambda-range", nargs=3, type=float, metavar=("MIN", "MAX", "POINTS"),
                       default=None,
                       help="geometric coupling range")
        p.add_argument("--lambdas", default=None, help="comma-separated couplings")
    p.add_argument("--grid-rmin", type=float, default=None)
    p.add_argument("--grid-rmax", type=float, default=None)
    p.add_argument("--grid-n", type=int, default=None)
    p.add_argument("--output", default=None, help="output file (default: none)")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None,
                   help="worker count (fallback: CLR_MAGCOUNT_THREADS)")
    p.add_argument("--timestamps", action="store_true", help="stamp the provenance header")
    p.add_argument("--plot", default=None, metavar="PREFIX",
                   help="write PREFIX.dat for gnuplot (and PREFIX.png with --png)")
    p.add_argument("--png", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="clr-magcount", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="subcommand", parser_class=_Parser)

    p = sub.add_parser("count", help="counting function at one coupling")
    _common(p)
    p.add_argument("--operator", default="pauli",
                   choices=("pauli", "h_plus", "h_minus", "schrodinger"))
    p.add_argument("--refine", action="store_true", help="also count on a doubled grid")

    p = sub.add_parser("sweep", help="counting function over a coupling range")
    _common(p)
    p.add_argument("--operator", default="pauli",
                   choices=("pauli", "h_plus", "h_minus", "schrodinger"))
    p.add_argument("--refine", action="store_true")

    p = sub.add_parser("functionals", help="norms and functionals of a potential")
    _common(p, field=False, lambdas=False)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--a", type=float, default=1.0)

    p = sub.add_parser("kernels", help="Birman-Schwinger kernel checks")
    _common(p, field=False)
    p.add_argument("--kernel", default=None, help="e.g. 't0_limit:alpha=1'")
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--nodes", type=int, default=256)

    p = sub.add_parser("verify", help="sweep the oracle against a bound")
    _common(p)
    p.add_argument("--case", default=None,
                   help="theorem name, or one of weak, strong, comparison")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--fit-window", type=float, default=1.0, help="decades used by exponent fits")

    p = sub.add_parser("hardy", help="weighted Hardy inequality checks")
    _common(p, potential=False, lambdas=False)
    p.add_argument("--pair", default="channels", choices=("classical", "channels"))
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--spins", default="minus", help="comma list of minus, plus")
    return ap


# -- configuration ----------------------------------------------------------

def _spec_text(value):
    """Inline spec, JSON text, or the contents of a JSON file."""
    if value is None:
        return None
    if isinstance(value, dict):
        return value
    s = str(value)
    if not s.lstrip().startswith("{") and ":" not in s and os.path.exists(s):
        return json.loads(Path(s).read_text())
    if s.endswith(".json"):
        path = Path(s)
        if not path.exists():
            raise ConfigError(f"spec file {s} not found")
        return json.loads(path.read_text())
    return s


def _merge_config(args) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file {path} not found")
        try:
            cfg = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
    out = dict(cfg)
    for k, v in vars(args).items():
        if k == "config":
            continue
        if v is not None and v is not False:
            out[k] = v
        else:
            out.setdefault(k, v)
    out["subcommand"] = args.subcommand
    return out


def _lambdas(cfg) -> list[float]:
    if cfg.get("lambdas") is not None:
        raw = cfg["lambdas"]
        items = raw if isinstance(raw, list) else [x for x in str(raw).split(",") if x.strip()]
        lams = [float(x) for x in items]
        if not lams:
            raise ConfigError("empty lambda list")
        return _check_lams(lams)
    if cfg.get("lambda_range") is not None:
        lo, hi, n = cfg["lambda_range"]
        lo, hi, n = float(lo), float(hi), int(float(n))
        if n < 1:
            raise ConfigError("lambda range needs at least one point")
        if not (0 < lo <= hi):
            raise ConfigError("lambda range needs 0 < min <= max")
        if n == 1:
            return [lo]
        return _check_lams([float(x) for x in np.geomspace(lo, hi, n)])
    if cfg.get("lam") is not None:
        return _check_lams([float(cfg["lam"])])
    raise ConfigError("no coupling given (use --lambda, --lambda-range or --lambdas)")


def _check_lams(lams):
    if any(not math.isfinite(x) or x < 0 for x in lams):
        raise ConfigError("couplings must be finite and nonnegative")
    return lams


def _grid(cfg):
    from .radial_spectra import RadialGrid

    g = RadialGrid()
    try:
        return RadialGrid(cfg.get("grid_rmin") or g.r_min, cfg.get("grid_rmax") or g.r_max,
                          int(cfg.get("grid_n") or g.N))
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def _field(cfg):
    spec = _spec_text(cfg.get("field"))
    if spec is None:
        return zero_field()
    return field_from_json(spec)


def _potential(cfg, required=True):
    spec = _spec_text(cfg.get("potential"))
    if spec is None:
        if required:
            raise ConfigError("--potential is required")
        return None
    return potential_from_json(spec)


# -- output -----------------------------------------------------------------

def _g17(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    return v


def provenance(cfg, grid=None) -> dict:
    echo = {k: v for k, v in sorted(cfg.items()) if k not in ("timestamps",)}
    out = {"tool": "clr-magcount", "version": __version__, "config": echo,
           "tolerances": TOLERANCES}
    if grid is not None:
        out["grid"] = {"r_min": grid.r_min, "r_max": grid.r_max, "N": grid.N}
    if cfg.get("timestamps"):
        out["timestamp"] = datetime.now(timezone.utc).isoformat()
    return _jsonable(out)


def render_csv(columns, rows, prov) -> str:
    buf = io.StringIO()
    buf.write("# provenance: " + json.dumps(prov, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_g17(v) for v in row])
    return buf.getvalue()


def render_json(columns, rows, prov, extra=None) -> str:
    doc = {"provenance": prov, "columns": list(columns),
           "rows": [_jsonable(list(r)) for r in rows]}
    if extra is not None:
        doc["result"] = _jsonable(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _emit(cfg, columns, rows, prov, extra=None):
    out = cfg.get("output")
    if not out:
        return
    fmt = cfg.get("format") or ("json" if str(out).endswith(".json") else "csv")
    text = render_json(columns, rows, prov, extra) if fmt == "json" else render_csv(columns, rows, prov)
    Path(out).write_text(text)


def _plot(cfg, columns, rows, xcol, ycols, ylabel):
    prefix = cfg.get("plot")
    if not prefix:
        return
    from .plotting import write_dat, write_png

    write_dat(f"{prefix}.dat", columns, rows, comment=f"clr-magcount {cfg['subcommand']}")
    if cfg.get("png"):
        ix = columns.index(xcol)
        x = [r[ix] for r in rows]
        ys = {c: [r[columns.index(c)] for r in rows] for c in ycols}
        write_png(f"{prefix}.png", x, ys, xcol, ylabel)


# -- subcommands --------------------------------------------------------------

def _cmd_count(cfg, out):
    from .radial_spectra import count_total

    grid = _grid(cfg)
    lams = _lambdas(cfg)
    if len(lams) != 1:
        raise ConfigError("count takes a single coupling; use sweep for ranges")
    rep = count_total(_field(cfg), _potential(cfg), lams[0], cfg.get("operator") or "pauli",
                      grid, refine=bool(cfg.get("refine")), threads=cfg.get("threads"))
    out.write(f"total {rep.total}\n")
    out.write(f"{'spin':<12} {'m':>5} {'count':>7}\n")
    rows = []
    for spin, m, c in rep.per_channel:
        out.write(f"{spin:<12} {m:>5d} {c:>7d}\n")
        rows.append((spin, m, c))
    if rep.grid_delta is not None:
        out.write(f"grid_delta {rep.grid_delta}\n")
    _emit(cfg, ("spin", "m", "count"), rows, provenance(cfg, grid), rep.to_dict())
    return 0


def _cmd_sweep(cfg, out):
    from .radial_spectra import sweep_lambda

    grid = _grid(cfg)
    lams = _lambdas(cfg)
    reps = sweep_lambda(_field(cfg), _potential(cfg), cfg.get("operator") or "pauli", lams, grid,
                        refine=bool(cfg.get("refine")), threads=cfg.get("threads"))
    cols = ("lambda", "total", "near_zero", "m_max_used", "grid_delta")
    rows = [(r.lam, r.total, r.near_zero, r.m_max_used, r.grid_delta) for r in reps]
    for r in rows:
        out.write(f"{_g17(r[0]):>24} {r[1]:>8d}\n")
    _emit(cfg, cols, rows, provenance(cfg, grid))
    _plot(cfg, list(cols[:2]), [r[:2] for r in rows], "lambda", ["total"], "N(lambda)")
    return 0


def _cmd_functionals(cfg, out):
    from .functionals import functional_report

    V = _potential(cfg)
    rep = functional_report(V, float(cfg.get("p") or 2.0), float(cfg.get("a") or 1.0))
    rows = []
    for name in ("mixed_norm", "log_local", "log_global", "bracket_a", "l1_norm", "weyl"):
        v = getattr(rep, name)
        rows.append((name, float(v), v.error, v.divergent))
        flag = "  DIVERGENT" if v.divergent else ""
        out.write(f"{name:<12} {_g17(float(v)):>24}{flag}\n")
    _emit(cfg, ("name", "value", "error", "divergent"), rows, provenance(cfg), rep.to_dict())
    return 0


def _cmd_kernels(cfg, out):
    from .birman_schwinger import (DEFAULT_SEED, bs_count, bs_trace, check_positive_definite,
                                   kernel_spec_from_string)

    ks = cfg.get("kernel")
    if not ks:
        raise ConfigError("--kernel is required")
    spec = kernel_spec_from_string(ks)
    V = _potential(cfg)
    seed = int(cfg.get("seed") if cfg.get("seed") is not None else DEFAULT_SEED)
    psd = check_positive_definite(spec, V, int(cfg.get("samples") or 256), seed)
    tr = bs_trace(spec, V)
    out.write(f"kernel {ks}\n")
    out.write(f"psd {'pass' if psd.passed else 'FAIL'} min_eig {_g17(psd.min_eigenvalue)} "
              f"max_diag {_g17(psd.max_diagonal)}\n")
    out.write(f"trace {_g17(float(tr))}{' DIVERGENT' if tr.divergent else ''}\n")
    rows = []
    have_lams = any(cfg.get(k) is not None for k in ("lam", "lambda_range", "lambdas"))
    if have_lams:
        nodes = int(cfg.get("nodes") or 256)
        for lam in _lambdas(cfg):
            n = bs_count(spec, V, lam, nodes)
            rows.append((lam, n))
            out.write(f"{_g17(lam):>24} {n:>8d}\n")
    extra = {"psd": psd.to_dict(), "trace": float(tr), "trace_divergent": tr.divergent}
    _emit(cfg, ("lambda", "bs_count"), rows, provenance(cfg), extra)
    return 0


def _cmd_verify(cfg, out):
    from . import bound_suite as bs

    case = cfg.get("case")
    if not case:
        raise ConfigError("--case is required")
    grid = _grid(cfg)
    lams = _lambdas(cfg)
    fm = _field(cfg)
    V = _potential(cfg)
    th = cfg.get("threads")
    prov = provenance(cfg, grid)
    if case == "weak":
        v = bs.verify_weak_coupling(fm, V, lams, grid, th)
        rows = list(zip(lams, v.pauli_counts, v.schrodinger_counts))
        out.write("| lambda | pauli | schrodinger |\n|---|---|---|\n")
        for r in rows:
            out.write(f"| {_g17(r[0])} | {r[1]} | {r[2]} |\n")
        out.write(f"\nm(alpha) = {v.m_alpha}; pauli matches: {v.pauli_matches}; "
                  f"schrodinger zero: {v.schrodinger_zero}\n")
        _emit(cfg, ("lambda", "pauli", "schrodinger"), rows, prov, v.to_dict())
        return 0
    if case == "strong":
        v = bs.verify_strong_coupling(fm, V, lams, None, grid, th, float(cfg.get("fit_window") or 1.0))
        rows = list(zip(v.lambdas, v.counts))
        out.write("| lambda | count |\n|---|---|\n")
        for r in rows:
            out.write(f"| {_g17(r[0])} | {r[1]} |\n")
        out.write(f"\nfitted exponent {v.fitted_exponent}; expected {v.expected_exponent}; "
                  f"prefactor {v.prefactor}; reference {v.reference_prefactor}\n")
        _emit(cfg, ("lambda", "count"), rows, prov, v.to_dict())
        _plot(cfg, ["lambda", "count"], rows, "lambda", ["count"], "N(lambda)")
        return 0
    if case == "comparison":
        v = bs.comparison_inequality(fm, V, lams, grid, th)
        rows = list(zip(v.lambdas, v.schrodinger_counts, v.h_plus_counts))
        out.write("| lambda | schrodinger(lambda) | h_plus(2 lambda) |\n|---|---|---|\n")
        for r in rows:
            out.write(f"| {_g17(r[0])} | {r[1]} | {r[2]} |\n")
        out.write(f"\nholds: {v.holds}\n")
        _emit(cfg, ("lambda", "schrodinger", "h_plus_2lambda"), rows, prov, v.to_dict())
        return 0
    bc = bs.assemble_case(fm, V, case, float(cfg.get("p") or 2.0), cfg.get("a"))
    if not bc.applicable:
        out.write(f"case {case} inapplicable: {bc.reason}\n")
        _emit(cfg, ("lambda", "count", "rhs_shape"), [], prov, bc.to_dict())
        return 0
    sw = bs.run_sweep(bc, lams, grid, th, float(cfg.get("fit_window") or 1.0))
    rows = list(zip(sw.lambdas, sw.counts, sw.rhs_shape))
    out.write("| lambda | N | rhs_shape | (N - m)/rhs |\n|---|---|---|---|\n")
    for lam, n, s in rows:
        q = (n - bc.m_alpha_term) / s if s > 0 else float("nan")
        out.write(f"| {_g17(lam)} | {n} | {_g17(s)} | {_g17(q)} |\n")
    out.write(f"\nempirical constant {_g17(sw.empirical_constant)} at lambda {sw.lambda_at_sup}; "
              f"fitted exponent {sw.fitted_exponent}\n")
    _emit(cfg, ("lambda", "count", "rhs_shape"), rows, prov,
          {"case": bc.to_dict(), "sweep": sw.to_dict()})
    _plot(cfg, ["lambda", "count", "rhs_shape"], rows, "lambda", ["count", "rhs_shape"], "value")
    return 0


def _cmd_hardy(cfg, out):
    from . import hardy_toolkit as hk

    seed = int(cfg.get("seed") if cfg.get("seed") is not None else hk.DEFAULT_SEED)
    if cfg.get("pair") == "classical":
        case = hk.HardyCase(U=lambda t: np.ones_like(t), W=lambda t: 0.25 / t ** 2,
                            variant="origin_side", name="classical")
        rep = hk.verify_hardy(case, int(cfg.get("trials") or 100), seed,
                              threads=cfg.get("threads"))
        out.write(f"constant {_g17(rep.constant)} max_ratio {_g17(rep.max_ratio)} "
                  f"violations {rep.violations}\n")
        _emit(cfg, ("variant", "constant", "max_ratio", "violations"),
              [(rep.variant, rep.constant, rep.max_ratio, rep.violations)], provenance(cfg),
              rep.to_dict())
        return 0
    grid = _grid(cfg)
    spins = tuple(s.strip() for s in str(cfg.get("spins") or "minus").split(",") if s.strip())
    bad = [s for s in spins if s not in ("minus", "plus")]
    if bad:
        raise ConfigError(f"unknown spin(s) {bad}")
    res = hk.operator_hardy_check(_field(cfg), spins, grid=grid)
    cols = ("spin", "m", "side", "variant", "constant", "c", "negative_inertia")
    rows = [tuple(getattr(r, c) for c in cols) for r in res]
    for r in rows:
        out.write(" ".join(_g17(v) for v in r) + "\n")
    _emit(cfg, cols, rows, provenance(cfg, grid), [r.to_dict() for r in res])
    return 0


_COMMANDS = {
    "count": _cmd_count, "sweep": _cmd_sweep, "functionals": _cmd_functionals,
    "kernels": _cmd_kernels, "verify": _cmd_verify, "hardy": _cmd_hardy,
}


def run(cfg: dict, out=None) -> int:
    """Execute a merged configuration; returns the exit status."""
    out = out or sys.stdout
    sub = cfg.get("subcommand")
    if sub not in _COMMANDS:
        raise ConfigError(f"unknown subcommand {sub!r}")
    return _COMMANDS[sub](cfg, out)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if not args.subcommand:
            ap.print_help(sys.stderr)
            return EXIT_CONFIG
        cfg = _merge_config(args)
        return run(cfg)
    except (ConfigError, DomainError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"clr-magcount: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, FactorizationError, TruncationError) as exc:
        print(f"clr-magcount: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
