"""Command-line front end.

Usage: ``gwlagrange <command> [options]`` with commands ``apex``, ``coeffs``,
``extinction``, ``progeny``, ``simulate``, ``enumerate``, ``asymptotics`` and
``conditional``.

Options may also come from ``--config FILE``: one ``key = value`` per line,
``#`` starts a comment, keys are the long option names (``t``, ``N``, ``seed``,
``budget``, ...).  Options given on the command line win.  Defaults: ``seed=0``,
``budget=10000``, ``N=256``, ``trees=10000``, ``workers=1``.

Reports are CSV (with ``#`` metadata lines) or JSON (schema ``"v1"``); both
embed the resolved configuration and the library version.  Exit status is 2 for
invalid input and 1 for numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, asym, gw, lagrange, trees
from .errors import (
    ApexPointError, ConvergenceError, GWError, NoApexError, TailTooLargeError,
)
from .family import OffspringSpec, classify, variance
from .series import DEFAULT_N, EXACT, FLOAT

SCHEMA = "v1"
APEX_NUDGE = 1e-9
COMMANDS = ("apex", "coeffs", "extinction", "progeny", "simulate", "enumerate",
            "asymptotics", "conditional")
PRESETS = {"exp": OffspringSpec.exp, "planetree": OffspringSpec.geometric}
DEFAULTS = {"N": DEFAULT_N, "seed": 0, "budget": gw.DEFAULT_BUDGET, "trees": 10000,
            "workers": 1, "format": "csv", "pred": "all", "n": None, "t": None,
            "preset": None, "coeffs": None, "radius": None, "out": None, "exact": False}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (stop excluded), ``a,b,c`` or a single value."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = (Fraction(p) for p in parts)
        if step <= 0:
            raise UsageError("range step must be positive")
        count = math.ceil((stop - start) / step)
        if count <= 0:
            raise UsageError(f"range {text!r} is empty")
        return [float(start + k * step) for k in range(count)]
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"cannot parse t grid {text!r}") from None


def read_config(path: str) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in DEFAULTS and key != "command":
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def load_spec(preset: str | None, coeffs: str | None, radius: str | None) -> OffspringSpec:
    if (preset is None) == (coeffs is None):
        raise UsageError("give exactly one of --preset or --coeffs")
    if preset is not None:
        if preset not in PRESETS:
            raise UsageError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        return PRESETS[preset]()
    text = Path(coeffs).read_text().strip()
    if text.startswith("{"):
        d = json.loads(text)
        if radius is not None:
            d["radius"] = radius
        if "kind" not in d:
            d["kind"] = "explicit-coeffs" if radius is not None or "radius" in d else "polynomial"
        return OffspringSpec.from_dict(d)
    values = [v for v in text.replace(",", " ").split() if v]
    if not values:
        raise UsageError(f"{coeffs}: no coefficients")
    if radius is None:
        return OffspringSpec.polynomial(values)
    return OffspringSpec.explicit(values, float(radius))


@dataclass
class RunConfig:
    spec: OffspringSpec
    command: str
    t_grid: list[float] = field(default_factory=list)
    nudged: list[bool] = field(default_factory=list)
    N: int = DEFAULT_N
    seed: int = 0
    budget: int = gw.DEFAULT_BUDGET
    trees: int = 10000
    workers: int = 1
    n: int | None = None
    pred: str = "all"
    exact: bool = False
    output: str = "csv"
    out_path: str | None = None

    def record(self) -> dict:
        return {
            "command": self.command,
            "spec": self.spec.to_dict(),
            "t_grid": self.t_grid,
            "nudged": self.nudged,
            "N": self.N,
            "seed": self.seed,
            "budget": self.budget,
            "trees": self.trees,
            "n": self.n,
            "pred": self.pred,
            "exact": self.exact,
        }


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--preset", choices=sorted(PRESETS), default=S)
    common.add_argument("--coeffs", metavar="FILE", default=S,
                        help="JSON spec or whitespace/comma separated b_0, b_1, ...")
    common.add_argument("--radius", default=S, help="radius of convergence for --coeffs")
    common.add_argument("--t", metavar="GRID", default=S, help="start:stop:step, a,b,c or a value")
    common.add_argument("-N", type=int, default=S, help="truncation order (default 256)")
    common.add_argument("-n", type=int, default=S, help="tree size for enumerate/conditional")
    common.add_argument("--seed", type=int, default=S, help="RNG seed (default 0)")
    common.add_argument("--budget", type=int, default=S, help="node budget per tree (default 10000)")
    common.add_argument("--trees", type=int, default=S, help="trees per t value (default 10000)")
    common.add_argument("--workers", type=int, default=S, help="simulation threads (default 1)")
    common.add_argument("--pred", default=S, help="subclass predicate (default all)")
    common.add_argument("--exact", action="store_true", default=S, help="rational arithmetic")
    common.add_argument("--format", choices=("csv", "json"), default=S)
    common.add_argument("--out", metavar="PATH", default=S)
    common.add_argument("--config", metavar="FILE", default=S, help="key = value option file")

    p = argparse.ArgumentParser(prog="gwlagrange", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"gwlagrange {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def _as_int(name, value):
    try:
        return int(value)
    except (TypeError, ValueError):
        raise UsageError(f"{name} must be an integer, got {value!r}") from None


def resolve(ns: argparse.Namespace) -> RunConfig:
    opts = dict(DEFAULTS)
    given = {k: v for k, v in vars(ns).items() if k != "command"}
    if "config" in given:
        opts.update(read_config(given.pop("config")))
    opts.update(given)
    spec = load_spec(opts["preset"], opts["coeffs"], opts["radius"])

    cfg = RunConfig(spec, ns.command)
    cfg.N = _as_int("N", opts["N"])
    cfg.seed = _as_int("seed", opts["seed"])
    cfg.budget = _as_int("budget", opts["budget"])
    cfg.trees = _as_int("trees", opts["trees"])
    cfg.workers = _as_int("workers", opts["workers"])
    cfg.n = None if opts["n"] is None else _as_int("n", opts["n"])
    cfg.pred = str(opts["pred"])
    cfg.exact = opts["exact"] in (True, "1", "true", "yes", "on")
    cfg.output = str(opts["format"])
    cfg.out_path = opts["out"]
    if cfg.output not in ("csv", "json"):
        raise UsageError(f"format must be csv or json, got {cfg.output!r}")
    if cfg.N < 1:
        raise UsageError("N must be >= 1")
    if cfg.budget < 1 or cfg.trees < 1 or cfg.workers < 1:
        raise UsageError("budget, trees and workers must be >= 1")
    if opts["t"] is not None:
        grid = parse_grid(str(opts["t"]))
        for t in grid:
            if not 0 <= t < spec.radius:
                raise UsageError(f"t={t} outside [0, R={spec.radius})")
        cfg.t_grid, cfg.nudged = _nudge(spec, grid)
    return cfg


def _nudge(spec: OffspringSpec, grid: list[float]):
    tau = classify(spec).tau
    out, flags = [], []
    for t in grid:
        if tau is not None and abs(t - tau) < APEX_NUDGE:
            out.append(tau - APEX_NUDGE)
            flags.append(True)
        else:
            out.append(t)
            flags.append(False)
    return out, flags


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class Report:
    columns: list[str]
    rows: list[list]
    summary: dict = field(default_factory=dict)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def _json_value(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


def render(cfg: RunConfig, rep: Report) -> str:
    if cfg.output == "json":
        doc = {
            "schema": SCHEMA,
            "version": __version__,
            "config": cfg.record(),
            "columns": rep.columns,
            "rows": rep.rows,
            "summary": rep.summary,
        }
        return json.dumps(_json_value(doc), indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    buf.write(f"# gwlagrange {__version__} schema {SCHEMA}\n")
    buf.write("# config " + json.dumps(_json_value(cfg.record()), sort_keys=True) + "\n")
    for k, v in rep.summary.items():
        buf.write(f"# {k} {json.dumps(_json_value(v), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(rep.columns)
    for row in rep.rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _grid(cfg: RunConfig) -> list[float]:
    if not cfg.t_grid:
        raise UsageError(f"{cfg.command} needs --t")
    return cfg.t_grid


def _solve(cfg: RunConfig, backend=FLOAT):
    return lagrange.solve(cfg.spec, cfg.N, backend)


def cmd_apex(cfg: RunConfig) -> Report:
    spec = cfg.spec
    cls = classify(spec)
    tau = cls.tau
    rho = lagrange.radius(spec, cls)
    sigma = math.sqrt(variance(spec, tau)) if tau is not None else None
    return Report(["spec", "class", "M", "tau", "rho", "Q", "sigma_tau"],
                  [[spec.name, cls.label, cls.M, tau, rho, spec.Q, sigma]])


def cmd_coeffs(cfg: RunConfig) -> Report:
    sol = _solve(cfg, EXACT if cfg.exact else FLOAT)
    A, arn = sol.A, sol.A_rho_n
    rows = []
    for n in range(1, sol.N + 1):
        a = A[n]
        if cfg.exact:
            a = str(a)
        rows.append([n, a, sol.log_A[n], arn[n]])
    return Report(["n", "A_n", "log_A_n", "A_n_rho_n"], rows,
                  {"rho": sol.rho, "tau": sol.tau, "Q": sol.Q})


def cmd_extinction(cfg: RunConfig) -> Report:
    sol = _solve(cfg)
    rows = []
    for t, flag in zip(_grid(cfg), cfg.nudged):
        e = gw.extinction(sol, t)
        try:
            fp = gw.extinction_fixed_point(cfg.spec, t, max_iter=10 ** 5)
        except ConvergenceError:
            fp = None
        rows.append([t, e.value, e.method, e.tail_bound, fp, flag])
    return Report(["t", "q", "method", "tail_bound", "q_fixed_point", "nudged"], rows,
                  {"tau": sol.tau})


def cmd_progeny(cfg: RunConfig) -> Report:
    sol = _solve(cfg)
    rows, per_t = [], []
    for t in _grid(cfg):
        law = gw.progeny_law(sol, t)
        rows.extend([t, n, law.probs[n]] for n in range(1, law.N + 1))
        per_t.append({"t": t, "q": law.q, "survival": law.survival_mass,
                      "tail_finite": law.tail_finite, "q_method": law.q_method})
    return Report(["t", "n", "prob"], rows, {"laws": per_t})


def cmd_simulate(cfg: RunConfig) -> Report:
    sol = _solve(cfg)
    rows = []
    for t in _grid(cfg):
        r = gw.estimate_extinction(sol, t, cfg.trees, cfg.budget, cfg.seed, cfg.workers).as_record()
        rows.append([t, r["trees"], r["trees"] - r["censored"], r["censored"], r["q_mc"],
                     r["mc_sigma"], r["mc_ci"][0], r["mc_ci"][1], r["q_reference"],
                     r["reference_method"], r["censoring_bound"]])
    return Report(["t", "trees", "extinct", "censored", "q_mc", "sigma", "ci3_lo", "ci3_hi",
                   "q_reference", "reference_method", "censoring_bound"], rows)


def cmd_enumerate(cfg: RunConfig) -> Report:
    if cfg.n is None:
        raise UsageError("enumerate needs -n")
    pred = trees.parse_predicate(cfg.pred)
    rows, total, accepted = [], Fraction(0), Fraction(0)
    for i, a in enumerate(trees.enumerate_trees(cfg.n)):
        w = trees.weight(a, cfg.spec)
        ok = pred(a)
        total += w
        accepted += w if ok else 0
        rows.append([i, a.to_parens(), str(w), ok])
    return Report(["index", "tree", "weight", "accepted"], rows,
                  {"count": len(rows), "weight_sum": str(total),
                   "accepted_weight_sum": str(accepted)})


def cmd_asymptotics(cfg: RunConfig) -> Report:
    sol = _solve(cfg)
    prof = asym.profile(cfg.spec, sol)
    ns, ratios = asym.an_ratio_check(sol, prof, sol.N)
    rows = [[int(n), r * prof.C, r] for n, r in zip(ns, ratios)]
    return Report(["n", "A_n_rho_n_n32", "ratio"], rows,
                  {"C": prof.C, "K": prof.K, "tau": prof.tau, "sigma_tau": prof.sigma_tau,
                   "rho": prof.rho, "Q": prof.Q, "bound": asym.BOUND_LABEL})


def cmd_conditional(cfg: RunConfig) -> Report:
    if cfg.n is None:
        raise UsageError("conditional needs -n")
    pred = trees.parse_predicate(cfg.pred)
    exact = gw.conditional_size_prob(pred, cfg.spec, cfg.n)
    rows = []
    for t in cfg.t_grid:
        est = gw.conditional_size_mc(pred, cfg.spec, t, cfg.n, cfg.trees, cfg.seed, cfg.workers)
        lo, hi = est.interval
        rows.append([t, est.trials, est.point, est.sigma, lo, hi, float(exact), 0.0])
    return Report(["t", "trees_of_size_n", "p_mc", "sigma", "ci3_lo", "ci3_hi", "p_exact",
                   "censoring_bound"], rows, {"exact": str(exact), "exact_float": float(exact)})


HANDLERS = {
    "apex": cmd_apex, "coeffs": cmd_coeffs, "extinction": cmd_extinction,
    "progeny": cmd_progeny, "simulate": cmd_simulate, "enumerate": cmd_enumerate,
    "asymptotics": cmd_asymptotics, "conditional": cmd_conditional,
}


def run(cfg: RunConfig) -> str:
    text = render(cfg, HANDLERS[cfg.command](cfg))
    if cfg.out_path:
        Path(cfg.out_path).write_text(text)
    return text


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve(ns)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            text = run(cfg)
    except (NoApexError, ConvergenceError, TailTooLargeError, ApexPointError) as exc:
        print(f"gwlagrange: {exc}", file=sys.stderr)
        return 1
    except (UsageError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"gwlagrange: {exc}", file=sys.stderr)
        return 2
    except GWError as exc:
        print(f"gwlagrange: {exc}", file=sys.stderr)
        return 1
    if not cfg.out_path:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
