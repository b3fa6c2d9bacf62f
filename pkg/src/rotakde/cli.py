"""Command-line front door.

Exit codes: 0 success; 1 usage error (message on stderr, nothing on
stdout); 2 numeric/validation failure, with a machine-readable JSON error
object on stderr.  CSV is the universal tabular output ('.' decimals,
line feeds only, headers always present).  Angles are degrees on the CLI
and in config files, radians internally.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from .errors import ConfigError, NumericError
from .estimators import auxiliary_estimate, product_estimate
from .kernels import build_kernel, kernel_moment
from .models import (Model, gaussian_marginal, holder_certify, make_model,
                     make_perturbed_marginal)
from .risk import EstimatorSpec, rate_study
from .rotation import build_net, rotation_from_angle
from .selectors import adaptive_select, minimax_select

DEFAULT_SEED = 1234
SEED_ENV = "ROTAKDE_SEED"
THREADS_ENV = "ROTAKDE_THREADS"
MOMENT_CHECK_TOL = 1e-8


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _csv_writer(stream):
    return csv.writer(stream, lineterminator="\n")


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _write_rows(stream, header, rows):
    w = _csv_writer(stream)
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])


def _read_points(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if i == 0:
                    continue  # header line
                raise UsageError(f"{path}:{i + 1}: expected two numeric columns")
    if not rows:
        raise UsageError(f"{path}: no data rows")
    return np.asarray(rows)


def _parse_xy(text) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 2:
        raise UsageError(f"expected 'a,b' for a point, got {text!r}")
    return np.array([float(parts[0]), float(parts[1])])


# ---------------------------------------------------------------------------
# subcommands


def _cmd_kernel(args, out):
    kernel = build_kernel(args.order)
    w = _csv_writer(out)
    w.writerow(["field", "value"])
    w.writerow(["order_floor", kernel.order_floor])
    w.writerow(["support", _fmt(kernel.support)])
    w.writerow(["sup_norm", _fmt(kernel.sup_norm)])
    w.writerow(["l1_norm", _fmt(kernel.l1_norm)])
    w.writerow(["l2_norm_sq", _fmt(kernel.l2_norm_sq)])
    for i, c in enumerate(kernel.coeffs):
        w.writerow([f"coeff_{i}", _fmt(c)])
    if args.check:
        out.write("\n")
        w.writerow(["j", "moment", "tolerance", "pass"])
        ok = True
        for j in range(0, 2 * kernel.order_floor + 1):
            m = kernel_moment(kernel, j)
            target = 1.0 if j == 0 else 0.0
            good = abs(m - target) <= MOMENT_CHECK_TOL
            ok = ok and good
            w.writerow([j, _fmt(m), _fmt(MOMENT_CHECK_TOL),
                        "pass" if good else "fail"])
        if not ok:
            raise NumericError("kernel moment verification failed")
    return 0


def _cmd_net(args, out):
    if not 0.0 < args.delta < 1.0:
        raise UsageError(f"--delta must lie in (0, 1), got {args.delta}")
    net = build_net(args.delta)
    w = _csv_writer(out)
    w.writerow(["index", "theta", "q1", "q2"])
    for i, q in enumerate(net.members):
        w.writerow([i, _fmt(math.degrees(q.theta)), _fmt(q.q1), _fmt(q.q2)])
    w.writerow(["cardinality", len(net), "", ""])
    w.writerow(["capacity", _fmt(net.capacity), "", ""])
    return 0


def _marginal_from_config(cfg, beta, L, keypath):
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError(f"{keypath} must be an object with a 'kind'",
                          key=keypath)
    kind = cfg["kind"]
    if kind == "gaussian":
        return gaussian_marginal(float(cfg.get("sigma", 1.0)))
    if kind == "perturbed_gaussian":
        if "eps" not in cfg:
            raise ConfigError(f"{keypath}.eps is required for "
                              "perturbed_gaussian", key=f"{keypath}.eps")
        return make_perturbed_marginal(beta, L, float(cfg["eps"]))
    raise ConfigError(f"unknown marginal kind {kind!r}", key=f"{keypath}.kind")


def model_from_config(cfg) -> Model:
    for key in ("marginal1", "marginal2", "theta", "beta", "L"):
        if key not in cfg:
            raise ConfigError(f"model.{key} is required", key=f"model.{key}")
    beta, big_l = cfg["beta"], cfg["L"]
    if not isinstance(beta, (int, float)) or beta <= 0:
        raise ConfigError("model.beta must be a positive number",
                          key="model.beta")
    if not isinstance(big_l, (int, float)) or big_l <= 0:
        raise ConfigError("model.L must be a positive number", key="model.L")
    m1 = _marginal_from_config(cfg["marginal1"], beta, big_l, "model.marginal1")
    m2 = _marginal_from_config(cfg["marginal2"], beta, big_l, "model.marginal2")
    rot = rotation_from_angle(math.radians(float(cfg["theta"])))
    return make_model(m1, m2, rot, float(beta), float(big_l))


def _cmd_model(args, out):
    with open(args.config) as fh:
        cfg = json.load(fh)
    model = model_from_config(cfg)
    if args.check:
        w = _csv_writer(out)
        w.writerow(["component", "beta", "L", "certified", "reason"])
        for name, marg in (("marginal1", model.marginal1),
                           ("marginal2", model.marginal2)):
            res = holder_certify(marg, model.beta, model.L)
            w.writerow([name, _fmt(model.beta), _fmt(model.L),
                        "pass" if res.ok else "fail", res.reason])
    return 0


def _cmd_estimate(args, out):
    pts = _read_points(args.input)
    x = _parse_xy(args.x)
    kernel = build_kernel(args.order)
    d_rot = rotation_from_angle(math.radians(args.theta_d))
    if args.theta_q is None:
        val = product_estimate(pts, x, args.h, d_rot, kernel)
    else:
        q_rot = rotation_from_angle(math.radians(args.theta_q))
        val = auxiliary_estimate(pts, x, args.h, d_rot, q_rot, kernel,
                                 mode=args.mode)
    out.write(repr(float(val)) + "\n")
    return 0


def _cmd_select(args, out):
    pts = _read_points(args.input)
    x = _parse_xy(args.x)
    kernel = build_kernel(args.order)
    if not 0.0 < args.delta < 1.0:
        raise UsageError(f"--delta must lie in (0, 1), got {args.delta}")
    net = build_net(args.delta)
    if args.rule == "adaptive":
        if args.b_mult is not None:
            raise UsageError("--b-mult applies to the minimax rule only")
        res = adaptive_select(pts, x, net, kernel,
                              a_mult=args.a_mult or 1.0, p=args.p)
    else:
        if args.a_mult is not None:
            raise UsageError("--a-mult applies to the adaptive rule only")
        if args.beta is None or args.L is None:
            raise UsageError("--beta and --L are required for the minimax rule")
        res = minimax_select(pts, x, net, kernel, args.beta, args.L,
                             b_mult=args.b_mult or 1.0, p=args.p,
                             no_split=args.no_split)
    if args.diagnostics:
        with open(args.diagnostics, "w", newline="") as fh:
            _write_rows(fh, ["rule", "stage", "theta_q", "h", "r_value",
                             "criterion", "chosen"],
                        [[r["rule"], r["stage"],
                          math.degrees(r["theta_q"]), r["h"], r["r_value"],
                          r["criterion"], r["chosen"]]
                         for r in res.diagnostics_rows()])
    _write_rows(out, ["rule", "h", "theta_q", "estimate"],
                [[res.rule, res.h_hat, math.degrees(res.q_hat.theta),
                  res.estimate]])
    return 0


def load_experiment(path):
    """Load, validate, and default-fill an experiment config.

    Returns (resolved config dict, Model, EstimatorSpec).  Validation is
    eager: the model is built (and certified) here.
    """
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError("experiment config must be a JSON object")
    for key in ("model", "estimator", "n_grid"):
        if key not in cfg:
            raise ConfigError(f"{key} is required", key=key)
    est = cfg["estimator"]
    if not isinstance(est, dict) or "kind" not in est:
        raise ConfigError("estimator must be an object with a 'kind'",
                          key="estimator.kind")
    if est["kind"] not in ("oracle", "isotropic", "adaptive", "minimax"):
        raise ConfigError(f"unknown estimator kind {est['kind']!r}",
                          key="estimator.kind")
    n_grid = cfg["n_grid"]
    if (not isinstance(n_grid, list) or len(n_grid) < 3
            or any(not isinstance(v, int) or v < 2 for v in n_grid)):
        raise ConfigError("n_grid must be a list of >= 3 integer sample sizes",
                          key="n_grid")
    resolved = {
        "model": cfg["model"],
        "estimator": {"kind": est["kind"], "params": est.get("params", {})},
        "x": cfg.get("x", [0.0, 0.0]),
        "n_grid": n_grid,
        "p": cfg.get("p", 2),
        "reps": cfg.get("reps", 200),
        "seed": cfg.get("seed", int(os.environ.get(SEED_ENV, DEFAULT_SEED))),
    }
    if (not isinstance(resolved["x"], list) or len(resolved["x"]) != 2):
        raise ConfigError("x must be a two-element list", key="x")
    if not isinstance(resolved["reps"], int) or resolved["reps"] < 2:
        raise ConfigError("reps must be an integer >= 2", key="reps")
    if resolved["p"] < 1:
        raise ConfigError("p must be >= 1", key="p")
    model = model_from_config(resolved["model"])
    spec = EstimatorSpec(kind=resolved["estimator"]["kind"],
                         params=dict(resolved["estimator"]["params"]))
    return resolved, model, spec


def write_report_csv(path, report, resolved_config):
    buf = io.StringIO()
    w = _csv_writer(buf)
    w.writerow(["n", "risk", "stderr", "reps", "estimator_id"])
    for row in report.rows():
        w.writerow([row["n"], _fmt(row["risk"]), _fmt(row["stderr"]),
                    row["reps"], row["estimator_id"]])
    w.writerow(["slope", "" if report.slope is None else _fmt(report.slope)])
    w.writerow(["slope_stderr",
                "" if report.slope_stderr is None else _fmt(report.slope_stderr)])
    if report.degenerate:
        w.writerow(["degenerate", "true"])
    w.writerow(["config", json.dumps(resolved_config, sort_keys=True,
                                     separators=(",", ":"))])
    data = buf.getvalue()
    with open(path, "w", newline="") as fh:
        fh.write(data)
    return data


def embedded_config(path):
    """Recover the resolved config embedded in a report CSV."""
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if row and row[0] == "config":
                return json.loads(row[1])
    raise ConfigError(f"no embedded config found in {path}")


def _plot_report(report_path, svg_path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ns, risks, errs, est_id = [], [], [], ""
    with open(report_path, newline="") as fh:
        rows = list(csv.reader(fh))
    for row in rows[1:]:
        if row and row[0].isdigit():
            ns.append(int(row[0]))
            risks.append(float(row[1]))
            errs.append(float(row[2]))
            est_id = row[4]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.errorbar(ns, risks, yerr=errs, marker="o", capsize=3, label=est_id)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("pointwise risk")
    ax.legend()
    fig.tight_layout()
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _cmd_risk(args, out):
    resolved, model, spec = load_experiment(args.config)
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1"))
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    report = rate_study(model, spec, np.asarray(resolved["x"], dtype=float),
                        resolved["n_grid"], resolved["p"], resolved["reps"],
                        resolved["seed"], threads=threads)
    write_report_csv(args.out, report, resolved)
    if args.plot:
        _plot_report(args.out, args.plot)
    out.write(f"report written to {args.out}\n")
    return 0


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> _Parser:
    parser = _Parser(prog="rotakde", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", help="print kernel coefficients and norms")
    k.add_argument("--order", type=int, required=True)
    k.add_argument("--check", action="store_true")

    n = sub.add_parser("net", help="emit a separated rotation net as CSV")
    n.add_argument("--delta", type=float, required=True)

    m = sub.add_parser("model", help="validate a model configuration")
    m.add_argument("--config", required=True)
    m.add_argument("--check", action="store_true")

    e = sub.add_parser("estimate", help="evaluate one estimator at a point")
    e.add_argument("--input", required=True)
    e.add_argument("--x", required=True)
    e.add_argument("--h", type=float, required=True)
    e.add_argument("--theta-d", type=float, required=True)
    e.add_argument("--theta-q", type=float, default=None)
    e.add_argument("--mode", choices=["naive", "pruned"], default="pruned")
    e.add_argument("--order", type=int, default=2)

    s = sub.add_parser("select", help="run a selection rule on a point set")
    s.add_argument("--input", required=True)
    s.add_argument("--x", required=True)
    s.add_argument("--rule", choices=["adaptive", "minimax"], required=True)
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--beta", type=float, default=None)
    s.add_argument("--L", type=float, default=None)
    s.add_argument("--a-mult", type=float, default=None)
    s.add_argument("--b-mult", type=float, default=None)
    s.add_argument("--no-split", action="store_true")
    s.add_argument("--order", type=int, default=2)
    s.add_argument("--p", type=float, default=2)
    s.add_argument("--diagnostics", default=None)

    r = sub.add_parser("risk", help="run a Monte Carlo risk experiment")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--plot", default=None)
    r.add_argument("--threads", type=int, default=None)

    return parser


_COMMANDS = {
    "kernel": _cmd_kernel,
    "net": _cmd_net,
    "model": _cmd_model,
    "estimate": _cmd_estimate,
    "select": _cmd_select,
    "risk": _cmd_risk,
}


def run(argv, out=None, err=None) -> int:
    """Parse and execute; returns the process exit code."""
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args, out)
    except UsageError as exc:
        err.write(f"usage error: {exc}\n")
        return 1
    except ValueError as exc:
        err.write(f"usage error: {exc}\n")
        return 1
    except NumericError as exc:
        err.write(json.dumps(exc.payload(), sort_keys=True) + "\n")
        return 2
    except OSError as exc:
        err.write(f"usage error: {exc}\n")
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))
