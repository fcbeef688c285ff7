"""Command-line front end.

Every run writes its tables (CSV/JSON), optional figures and a
``<command>_manifest.json`` with the config echo and file checksums.
Values come from an optional strict JSON config; command-line flags
override them.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .besov import norm_profile
from .dynamics import DEFAULT_DT, MochParams, solve
from .errors import MochError
from .estimates import (
    COMMUTATOR_IDS,
    PRODUCT_IDS,
    ScalingTable,
    inflation_csv,
    fit_exponent,
    lemma212_scaling_sweep,
    run_ensemble,
    run_inflation,
)
from .grid import RealField, make_grid
from .initial_data import CORRECTORS, auto_grid_points, build_gamma0
from .littlewood_paley import bernstein_check, block, build_partition
from .persist import (
    SnapshotError,
    atomic_write,
    build_manifest,
    dump_json,
    read_snapshot,
    table_csv,
    write_snapshot,
)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_CONFIG_PARSE = 3
EXIT_CONFIG_KEY = 4
EXIT_CONFIG_VALUE = 5
EXIT_INPUT_NOT_FOUND = 6
EXIT_OUTPUT = 7
EXIT_NUMERICAL = 8
EXIT_CHECK_FAILED = 9

COMMANDS = ("lp-check", "norms", "gen-init", "solve", "estimates", "sweep-212", "inflate")
GLOBAL_KEYS = ("command", "out_dir", "svg", "seed", "threads")
COMMAND_KEYS = {
    "lp-check": ("points", "count"),
    "norms": ("init",),
    "gen-init": ("N", "corrector", "points", "out"),
    "solve": ("init", "lambda", "dt", "T", "dealias", "record_every", "out_prefix", "flow"),
    "estimates": ("lemma", "ensemble", "points", "lambda"),
    "sweep-212": ("N", "corrector"),
    "inflate": ("N", "lambda", "dt", "records", "flow_upto", "corrector"),
}
DEFAULTS = {
    "out_dir": ".",
    "svg": False,
    "seed": 0,
    "threads": 1,
    "points": None,
    "count": 200,
    "corrector": "regular",
    "lambda": 1.0,
    "dt": DEFAULT_DT,
    "dealias": True,
    "record_every": 1,
    "flow": False,
    "lemma": "2.13",
    "ensemble": 100,
    "records": 40,
    "flow_upto": 0,
}


class CliError(MochError):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# -- config ------------------------------------------------------------------------


def _int(name, v, lo=None):
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
        raise CliError(f"{name} must be an integer, got {v!r}", EXIT_CONFIG_VALUE)
    if lo is not None and v < lo:
        raise CliError(f"{name} must be >= {lo}, got {v}", EXIT_CONFIG_VALUE)
    return int(v)


def _float(name, v, positive=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise CliError(f"{name} must be a finite number, got {v!r}", EXIT_CONFIG_VALUE)
    if positive and v <= 0:
        raise CliError(f"{name} must be positive, got {v}", EXIT_CONFIG_VALUE)
    return float(v)


def _pow2(name, v):
    v = _int(name, v, 8)
    if v & (v - 1):
        raise CliError(f"{name} must be a power of two, got {v}", EXIT_CONFIG_VALUE)
    return v


def _n_list(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, list) or not v:
        raise CliError("N must be a non-empty list of integers", EXIT_CONFIG_VALUE)
    return sorted({_int("N", x, 1) for x in v})


def _validate(cfg: dict) -> dict:
    cmd = cfg.get("command")
    if cmd not in COMMANDS:
        raise CliError(f"unknown command {cmd!r}; choose from {', '.join(COMMANDS)}", EXIT_USAGE)
    allowed = set(GLOBAL_KEYS) | set(COMMAND_KEYS[cmd])
    for key in cfg:
        if key not in allowed:
            raise CliError(f"unknown key {key!r} for command {cmd}", EXIT_CONFIG_KEY)
    out = {k: DEFAULTS[k] for k in allowed if k in DEFAULTS}
    out.update({k: v for k, v in cfg.items() if v is not None})
    if "lambda" in out:
        lam = _float("lambda", out["lambda"])
        if lam == 0.0:
            raise CliError("λ must be nonzero", EXIT_CONFIG_VALUE)
        out["lambda"] = lam
    for key in ("dt", "T"):
        if key in out:
            out[key] = _float(key, out[key], positive=True)
    if cmd == "solve":
        if "T" not in out:
            raise CliError("solve needs T", EXIT_CONFIG_VALUE)
        if out["dt"] >= out["T"]:
            raise CliError("dt must be smaller than T", EXIT_CONFIG_VALUE)
    if "N" in out:
        out["N"] = _n_list(out["N"]) if cmd in ("sweep-212", "inflate") else _int("N", out["N"], 1)
    elif cmd in ("gen-init", "sweep-212", "inflate"):
        raise CliError(f"{cmd} needs N", EXIT_CONFIG_VALUE)
    if out.get("points") is not None:
        out["points"] = _pow2("points", out["points"])
    if "corrector" in out and out["corrector"] not in CORRECTORS:
        raise CliError(f"corrector must be one of {CORRECTORS}", EXIT_CONFIG_VALUE)
    if "lemma" in out and str(out["lemma"]) not in ("2.13", "2.14"):
        raise CliError("lemma must be 2.13 or 2.14", EXIT_CONFIG_VALUE)
    if "lemma" in out:
        out["lemma"] = str(out["lemma"])
    for key, lo in (("count", 1), ("ensemble", 1), ("record_every", 1), ("records", 2),
                    ("flow_upto", 0), ("threads", 1), ("seed", 0)):
        if key in out:
            out[key] = _int(key, out[key], lo)
    for key in ("svg", "dealias", "flow"):
        if key in out and not isinstance(out[key], bool):
            raise CliError(f"{key} must be true or false", EXIT_CONFIG_VALUE)
    if cmd in ("norms", "solve") and "init" not in out:
        raise CliError(f"{cmd} needs init", EXIT_CONFIG_VALUE)
    if cmd == "gen-init" and "out" not in out:
        raise CliError("gen-init needs out", EXIT_CONFIG_VALUE)
    if cmd == "solve" and "out_prefix" not in out:
        out["out_prefix"] = "solve"
    return out


def load_config(path) -> dict:
    """Parse and validate a JSON config file.

    Raises
    ------
    CliError
        Missing file, malformed JSON, unknown key or out-of-range value,
        each with its own exit code.
    """
    p = Path(path)
    if not p.is_file():
        raise CliError(f"input not found: {p}", EXIT_INPUT_NOT_FOUND)
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"config parse error: {exc}", EXIT_CONFIG_PARSE) from exc
    if not isinstance(raw, dict):
        raise CliError("config parse error: top level must be an object", EXIT_CONFIG_PARSE)
    return _validate(raw)


# -- argument parsing ------------------------------------------------------------------


def _n_arg(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--config", default=S, help="JSON config file")
    common.add_argument("--out-dir", dest="out_dir", default=S)
    common.add_argument("--threads", type=int, default=S, help="parallel sweep members")
    common.add_argument("--svg", action="store_const", const=True, default=S, help="figures as SVG")
    common.add_argument("--seed", type=int, default=S)

    parser = argparse.ArgumentParser(prog="mochlab", parents=[common], description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("lp-check", parents=[common], help="partition, reconstruction and Bernstein checks")
    p.add_argument("--points", type=int, default=S)
    p.add_argument("--count", type=int, default=S)

    p = sub.add_parser("norms", parents=[common], help="block profile of a snapshot")
    p.add_argument("--init", default=S)

    p = sub.add_parser("gen-init", parents=[common], help="build the inflation datum")
    p.add_argument("--N", type=int, default=S)
    p.add_argument("--corrector", choices=CORRECTORS, default=S)
    p.add_argument("--points", type=int, default=S)
    p.add_argument("--out", default=S)

    p = sub.add_parser("solve", parents=[common], help="integrate from a snapshot")
    p.add_argument("--init", default=S)
    p.add_argument("--lambda", dest="lambda", type=float, default=S)
    p.add_argument("--dt", type=float, default=S)
    p.add_argument("--T", type=float, default=S)
    p.add_argument("--no-dealias", dest="dealias", action="store_const", const=False, default=S)
    p.add_argument("--record-every", dest="record_every", type=int, default=S)
    p.add_argument("--flow", action="store_const", const=True, default=S)
    p.add_argument("--out-prefix", dest="out_prefix", default=S)

    p = sub.add_parser("estimates", parents=[common], help="product/commutator ensembles")
    p.add_argument("--lemma", choices=("2.13", "2.14"), default=S)
    p.add_argument("--ensemble", type=int, default=S)
    p.add_argument("--points", type=int, default=S)
    p.add_argument("--lambda", dest="lambda", type=float, default=S)

    p = sub.add_parser("sweep-212", parents=[common], help="datum norm scalings")
    p.add_argument("--N", type=_n_arg, default=S)
    p.add_argument("--corrector", choices=CORRECTORS, default=S)

    p = sub.add_parser("inflate", parents=[common], help="inflation runs")
    p.add_argument("--N", type=_n_arg, default=S)
    p.add_argument("--lambda", dest="lambda", type=float, default=S)
    p.add_argument("--dt", type=float, default=S)
    p.add_argument("--records", type=int, default=S)
    p.add_argument("--flow-upto", dest="flow_upto", type=int, default=S)
    p.add_argument("--corrector", choices=CORRECTORS, default=S)
    return parser


def resolve_config(argv) -> dict:
    ns = vars(build_parser().parse_args(argv))
    cfg = {}
    path = ns.pop("config", None)
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise CliError(f"input not found: {p}", EXIT_INPUT_NOT_FOUND)
        try:
            cfg = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise CliError(f"config parse error: {exc}", EXIT_CONFIG_PARSE) from exc
        if not isinstance(cfg, dict):
            raise CliError("config parse error: top level must be an object", EXIT_CONFIG_PARSE)
    cmd = ns.pop("command", None)
    if cmd and cfg.get("command") and cfg["command"] != cmd:
        raise CliError(
            f"config command {cfg['command']!r} conflicts with subcommand {cmd!r}", EXIT_USAGE
        )
    if cmd:
        cfg["command"] = cmd
    if "command" not in cfg:
        raise CliError("no command given", EXIT_USAGE)
    cfg.update(ns)
    return _validate(cfg)


# -- commands ---------------------------------------------------------------------------


class _Run:
    def __init__(self, cfg):
        self.cfg = cfg
        self.out_dir = Path(cfg["out_dir"])
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise CliError(f"output not writable: {self.out_dir} ({exc})", EXIT_OUTPUT) from exc
        self.files = []
        self.fig_ext = ".svg" if cfg["svg"] else ".png"

    def write(self, name, data):
        path = self.out_dir / name
        try:
            atomic_write(path, data)
        except OSError as exc:
            raise CliError(f"output not writable: {path} ({exc})", EXIT_OUTPUT) from exc
        self.files.append(path)
        return path

    def figure(self, fn, obj, stem):
        path = self.out_dir / (stem + self.fig_ext)
        try:
            fn(obj, path)
        except OSError as exc:
            raise CliError(f"output not writable: {path} ({exc})", EXIT_OUTPUT) from exc
        self.files.append(path)

    def pmap(self, fn, items):
        if self.cfg["threads"] > 1 and len(items) > 1:
            with ThreadPoolExecutor(self.cfg["threads"]) as ex:
                return list(ex.map(fn, items))
        return [fn(x) for x in items]


def _load_init(path) -> RealField:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"input not found: {p}", EXIT_INPUT_NOT_FOUND)
    try:
        return read_snapshot(p)
    except SnapshotError as exc:
        raise CliError(f"bad snapshot {p}: {exc}", EXIT_CONFIG_VALUE) from exc


def cmd_lp_check(run: _Run) -> int:
    cfg = run.cfg
    n = cfg["points"] or 4096
    grid = make_grid(n)
    part = build_partition(grid)
    mult = np.vstack([part.chi, part.phis])
    coverage = float(np.max(np.abs(mult.sum(axis=0) - 1.0)))
    overlap = 0.0
    for i in range(mult.shape[0]):
        for k in range(i + 2, mult.shape[0]):
            overlap = max(overlap, float(np.max(mult[i] * mult[k])))
    rng = np.random.default_rng(cfg["seed"])
    recon = 0.0
    for _ in range(cfg["count"]):
        u = RealField(grid, rng.standard_normal(n))
        total = sum(block(part, u, j).samples for j in part.j_values)
        recon = max(recon, float(np.max(np.abs(total - u.samples)) / u.max_abs()))
    j = 5
    r1 = bernstein_check(part, RealField.from_function(grid, lambda x: np.cos(2.0**j * x)), j, 1).ratio
    r2 = bernstein_check(part, RealField.from_function(grid, lambda x: np.cos(1.5 * 2.0**j * x)), j, 1).ratio
    rows = [
        ("coverage", coverage, 1e-12, coverage <= 1e-12),
        ("disjointness", overlap, 1e-12, overlap <= 1e-12),
        ("reconstruction", recon, 1e-10, recon <= 1e-10),
        ("bernstein_pure_1", abs(r1 - 1.0), 1e-12, abs(r1 - 1.0) <= 1e-12),
        ("bernstein_pure_3_2", abs(r2 - 1.5), 1e-12, abs(r2 - 1.5) <= 1e-12),
    ]
    lines = ["check,value,threshold,pass"]
    lines += [f"{name},{v:.17g},{t:g},{int(ok)}" for name, v, t, ok in rows]
    run.write("lp_check.csv", "\n".join(lines) + "\n")
    return EXIT_OK if all(r[3] for r in rows) else EXIT_CHECK_FAILED


def cmd_norms(run: _Run) -> int:
    from .plotting import plot_profile

    u = _load_init(run.cfg["init"])
    part = build_partition(u.grid)
    prof = norm_profile(part, u)
    run.write("norm_profile.csv", prof.to_csv())
    summary = {"B0inf1": prof.b0_inf_1(), "weighted": prof.weighted().value,
               "weighted_argmax_j": prof.weighted().argmax_j, "num_points": u.grid.num_points}
    run.write("norms.json", dump_json(summary))
    run.figure(plot_profile, prof, "norm_profile")
    return EXIT_OK


def cmd_gen_init(run: _Run) -> int:
    cfg = run.cfg
    N = cfg["N"]
    n = cfg["points"] or auto_grid_points(N)
    part = build_partition(make_grid(n))
    d = build_gamma0(part, N, cfg["corrector"])
    out = Path(cfg["out"])
    try:
        write_snapshot(out, d.gamma0)
    except OSError as exc:
        raise CliError(f"output not writable: {out} ({exc})", EXIT_OUTPUT) from exc
    run.files.append(out)
    run.write(f"gen_init_N{N}.json", dump_json(d.report()))
    return EXIT_OK


def cmd_solve(run: _Run) -> int:
    cfg = run.cfg
    u = _load_init(cfg["init"])
    params = MochParams(
        lam=cfg["lambda"], dt=cfg["dt"], t_final=cfg["T"],
        dealias_on=cfg["dealias"], record_every=cfg["record_every"],
    )
    part = build_partition(u.grid)
    tr = solve(u, part, params, track_flow=cfg["flow"], keep_states=False)
    prefix = cfg["out_prefix"]
    run.write(f"{prefix}_norms.csv", tr.norm_csv())
    snap = run.out_dir / f"{prefix}_final.snap"
    write_snapshot(snap, tr.final.gamma)
    run.files.append(snap)
    summary = {"truncated": tr.truncated, "t_last": tr.t_last, "message": tr.message,
               "steps": params.num_steps, "dt": params.step}
    if tr.flow is not None:
        summary["y_xi_min"] = float(min(f.y_xi.min() for f in tr.flow))
        summary["y_xi_max"] = float(max(f.y_xi.max() for f in tr.flow))
    run.write(f"{prefix}_summary.json", dump_json(summary))
    return EXIT_OK


def cmd_estimates(run: _Run) -> int:
    from .plotting import plot_ensemble

    cfg = run.cfg
    n = cfg["points"] or 256
    s = run_ensemble(cfg["lemma"], cfg["ensemble"], cfg["seed"], n, cfg["lambda"])
    tag = cfg["lemma"].replace(".", "_")
    rows = [(r.lemma_id, r.lhs, r.rhs, r.ratio, r.ensemble_id) for r in s.reports]
    lines = ["lemma_id,lhs,rhs,ratio,ensemble_id"]
    lines += [f"{a},{b:.17g},{c:.17g},{d:.17g},{e}" for a, b, c, d, e in rows]
    run.write(f"estimates_{tag}.csv", "\n".join(lines) + "\n")
    ids = PRODUCT_IDS if cfg["lemma"] == "2.13" else COMMUTATOR_IDS
    run.write(f"estimates_{tag}_summary.json",
              dump_json({"seed": cfg["seed"], "size": cfg["ensemble"],
                         "max_ratio": {i: s.max_ratio(i) for i in ids}}))
    run.figure(plot_ensemble, [s], f"estimates_{tag}")
    return EXIT_OK


def cmd_sweep(run: _Run) -> int:
    from .plotting import plot_scaling

    cfg = run.cfg
    rows = run.pmap(lambda N: lemma212_scaling_sweep([N], cfg["corrector"]).rows[0], cfg["N"])
    ns = [r[0] for r in rows]
    table = ScalingTable(rows, {})
    if len(ns) > 1:
        exps = {name: fit_exponent(ns, table.column(name))
                for name in ("norm_B0inf1", "norm_weighted", "norm_square_B0inf1", "ratio")}
        table = ScalingTable(rows, exps)
    run.write("sweep_212.csv", table.to_csv())
    run.write("sweep_212_summary.json", dump_json({"exponents": table.exponents, "N": ns}))
    run.figure(plot_scaling, table, "sweep_212")
    return EXIT_OK


def cmd_inflate(run: _Run) -> int:
    from .plotting import plot_norm_trajectories

    cfg = run.cfg
    reports = run.pmap(
        lambda N: run_inflation(N, cfg["lambda"], cfg["dt"], cfg["records"],
                                track_flow=N <= cfg["flow_upto"], corrector=cfg["corrector"]),
        cfg["N"],
    )
    run.write("inflation.csv", inflation_csv(reports))
    for r in reports:
        rows = [(t, *row) for t, row in zip(r.times, r.norm_series)]
        run.write(f"inflation_N{r.N}_norms.csv",
                  table_csv(("t", "B0inf1", "B0infinf1_weighted", "Linf"), rows))
    amps = [r.amplification for r in reports]
    summary = {
        "N": [r.N for r in reports],
        "amplification_increasing": bool(np.all(np.diff(amps) > 0)),
        "slope_exponent": fit_exponent([r.N for r in reports], [r.initial_slope for r in reports])
        if len(reports) > 1 else None,
        "ceiling_over_N_pow_1_9": [r.weighted_ceiling / r.N**1.9 for r in reports],
        "ln_N_reached": [r.ln_N_reached for r in reports],
        "truncated": [r.truncated for r in reports],
    }
    run.write("inflation_summary.json", dump_json(summary))
    run.figure(plot_norm_trajectories, reports, "inflation_norms")
    return EXIT_OK


HANDLERS = {
    "lp-check": cmd_lp_check,
    "norms": cmd_norms,
    "gen-init": cmd_gen_init,
    "solve": cmd_solve,
    "estimates": cmd_estimates,
    "sweep-212": cmd_sweep,
    "inflate": cmd_inflate,
}


def dispatch(cfg: dict) -> int:
    """Run a validated config; write the manifest; return the exit status."""
    start = time.perf_counter()
    run = _Run(cfg)
    status = HANDLERS[cfg["command"]](run)
    manifest = build_manifest(cfg, run.files, __version__, time.perf_counter() - start)
    run.write(f"{cfg['command']}_manifest.json", dump_json(manifest))
    return status


def main(argv=None) -> int:
    try:
        cfg = resolve_config(sys.argv[1:] if argv is None else argv)
        return dispatch(cfg)
    except CliError as exc:
        print(f"mochlab: error: {exc}", file=sys.stderr)
        return exc.code
    except MochError as exc:
        print(f"mochlab: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SystemExit as exc:  # argparse
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
