"""Batch driver: ``netident <pipeline> --config cfg.json --out DIR``.

Exit codes: 0 success, 2 configuration or schema error, 3 identification
failure (including violated assumptions and infeasible anchors), 4 oracle or
numeric error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import math
import os
import platform
import sys
import time
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from .dgp import DgpSpec, as_point, simulate_network
from .errors import IdentificationError, NetIdentError, OracleError, UsageError
from .oracle import Oracle, OracleConfig
from .recovery import NormalizationAnchors, recover_model

PIPELINES = ("simulate", "recover", "recover-parametric", "recover-cubic",
             "recover-nonseparable", "sparse-study", "bounded-recover", "equivalence-check")

EXIT_OK, EXIT_CONFIG, EXIT_IDENT, EXIT_ORACLE = 0, 2, 3, 4


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

def load_schema():
    text = resources.files("netident").joinpath("config_schema.json").read_text()
    return json.loads(text)


def validate_config(cfg):
    """Schema check plus the cross-field rules the schema cannot state."""
    jsonschema.validate(cfg, load_schema())
    anchors = cfg.get("anchors", {})
    alpha = anchors.get("alpha", 0.25)
    beta = anchors.get("beta", 1.0 - alpha)
    if not alpha < beta:
        raise UsageError(f"anchors need alpha < beta (got alpha={alpha}, beta={beta})")
    ladder = cfg.get("params", {}).get("n_ladder")
    if ladder is not None and any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise UsageError("n_ladder must be strictly increasing")


def apply_overrides(cfg, args):
    cfg = copy.deepcopy(cfg)
    if args.seed is not None:
        cfg["seed"] = args.seed
        cfg.setdefault("oracle", {})["seed"] = args.seed
    if args.alpha is not None:
        cfg.setdefault("anchors", {})["alpha"] = args.alpha
    if args.beta is not None:
        cfg.setdefault("anchors", {})["beta"] = args.beta
    if args.depth_L is not None:
        cfg.setdefault("params", {})["L"] = args.depth_L
    if args.depth_M is not None:
        cfg.setdefault("params", {})["M"] = args.depth_M
    if args.tol is not None:
        cfg.setdefault("oracle", {})["tol"] = args.tol
    if args.out is not None:
        cfg["output_dir"] = args.out
    return cfg


def _canonical(cfg):
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# writers
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if isinstance(v, tuple):
        return ";".join(_fmt(x) for x in v) if len(v) > 1 else _fmt(v[0])
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([_fmt(v) for v in r])


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    return str(obj)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {(k if isinstance(k, str) else _fmt(k)): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(json.dumps(_jsonable(obj), indent=2, sort_keys=True, default=_json_default))
        fh.write("\n")


class Run:
    """Output directory bookkeeping and the per-stage summary lines."""

    def __init__(self, out_dir, reveal=False):
        self.out = out_dir
        self.reveal = reveal
        self.files = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name):
        self.files.append(name)
        return os.path.join(self.out, name)

    @staticmethod
    def stage(name, msg):
        print(f"[{name}] {msg}")


# ---------------------------------------------------------------------------
# shared emitters
# ---------------------------------------------------------------------------

def _reveal_many(oracle, handles):
    # fixture-only path: latent values never reach the recovery modules
    from .testing import reveal_many
    return reveal_many(oracle, handles)


def _f_reference(dgp, anchors):
    if dgp.coupling.family != "LinearSum" or dgp.index is not None or dgp.sparsity.sparse:
        return None
    q_a = float(dgp.shocks.quantile(anchors.alpha))
    iqr = float(dgp.shocks.quantile(anchors.beta)) - q_a
    return lambda t: dgp.shocks.cdf(q_a + np.asarray(t) * iqr)


def _w_reference(dgp, anchors, base):
    if dgp.coupling.family != "LinearSum" or dgp.index is not None or dgp.sparsity.sparse:
        return None
    iqr = float(dgp.shocks.quantile(anchors.beta)) - float(dgp.shocks.quantile(anchors.alpha))
    theta = dgp.homophily.evaluate(base, base)
    return lambda x1, x2: (dgp.homophily.evaluate(x1, x2) - theta) / iqr


def emit_model(run, model, oracle, dgp=None, reference=True):
    """f_hat.csv, labels.csv, w_hat.csv, diagnostics.json and the plot files."""
    f = model.f_hat
    write_csv(run.path("f_hat.csv"), ["t", "F_hat"], zip(f.t, f.values))
    rows = model.labels.rows()
    header = ["handle_id", "covariate", "label"]
    if run.reveal:
        header.append("a_hidden")
        hid = {h.id: h for x in model.labels.covariates() for h in model.labels.group(x).values()}
        vals = _reveal_many(oracle, [hid[r[0]] for r in rows]) if rows else []
        rows = [r + (float(v),) for r, v in zip(rows, vals)]
    write_csv(run.path("labels.csv"), header, rows)
    w_rows = sorted(model.w_rows(), key=lambda r: (r[0], r[1]))
    write_csv(run.path("w_hat.csv"), ["x1", "x2", "w_hat"], w_rows)
    write_json(run.path("diagnostics.json"), model.diagnostics)
    emit_plotdata(run, model, dgp if reference else None)


def emit_plotdata(run, model, dgp=None):
    f = model.f_hat
    base = model.state.base if model.state is not None else None
    f_ref = _f_reference(dgp, model.anchors) if dgp is not None else None
    if f_ref is None:
        write_csv(run.path("plot_f.csv"), ["t", "F_hat"], zip(f.t, f.values))
    else:
        ref = f_ref(f.t)
        write_csv(run.path("plot_f.csv"), ["t", "F_hat", "F_ref", "abs_err"],
                  zip(f.t, f.values, ref, np.abs(f.values - ref)))
    w_rows = sorted(model.w_rows(), key=lambda r: (r[0], r[1]))
    w_ref = _w_reference(dgp, model.anchors, base) if (dgp is not None and base is not None) else None
    if w_ref is None:
        write_csv(run.path("plot_w.csv"), ["x1", "x2", "w_hat"], w_rows)
    else:
        out = []
        for x1, x2, v in w_rows:
            r = w_ref(x1, x2)
            out.append((x1, x2, v, r, abs(v - r)))
        write_csv(run.path("plot_w.csv"), ["x1", "x2", "w_hat", "w_ref", "abs_err"], out)


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------

def _covs(params):
    c = params.get("covariates")
    return None if c is None else [as_point(x) for x in c]


def run_simulate(cfg, dgp, oracle, anchors, params, run):
    n = int(params.get("n", 200))
    net = simulate_network(dgp, n, int(cfg.get("seed", 0)))
    write_csv(run.path("edges.csv"), ["i", "j"], net.edges().tolist())
    deg = net.degrees()
    header = ["node", "covariate", "degree"]
    rows = [(i, net.covariates[i], int(deg[i])) for i in range(n)]
    if run.reveal:
        header.append("a_hidden")
        rows = [r + (float(a),) for r, a in zip(rows, net._latent)]
    write_csv(run.path("nodes.csv"), header, rows)
    run.stage("simulate", f"n={n} edges={len(net.edges())}")


def run_recover(cfg, dgp, oracle, anchors, params, run):
    model = recover_model(oracle, _covs(params), anchors, L=params.get("L", 10),
                          M=params.get("M", 4), delta=params.get("delta"))
    run.stage("recover", f"knots={model.f_hat.t.size} labels={len(model.labels)} "
                         f"f_domain=[{model.f_hat.domain[0]:g}, {model.f_hat.domain[1]:g}]")
    emit_model(run, model, oracle, dgp, params.get("reference", True))
    return model


def run_parametric(cfg, dgp, oracle, anchors, params, run):
    from .parametric import ParametricDesign, recover_beta
    model = run_recover(cfg, dgp, oracle, anchors, params, run)
    pmap = params.get("pairwise_map") or dgp.homophily.pairwise_map
    if pmap is None:
        raise UsageError("recover-parametric needs a pairwise_map")
    pairs = params.get("probe_pairs")
    if not pairs:
        raise UsageError("recover-parametric needs probe_pairs")
    k = params.get("k", len(pairs))
    fit = recover_beta(oracle, model, ParametricDesign(k, pmap, tuple(map(tuple, pairs))))
    with open(run.path("beta_hat.json"), "w") as fh:
        fh.write(fit.to_json() + "\n")
    run.stage("parametric", "beta_hat=" + ",".join("%.10g" % b for b in fit.beta))


def run_cubic(cfg, dgp, oracle, anchors, params, run):
    from .coupling import recover_model_cubic
    search = {}
    if "theta_grid" in params:
        search["grid"] = tuple(params["theta_grid"])
    if "refine_iters" in params:
        search["refine_iters"] = params["refine_iters"]
    if "eps" in params:
        search["eps"] = params["eps"]
    model = recover_model_cubic(oracle, _covs(params), L=params.get("L", 6), M=params.get("M", 4),
                                per_covariate=params.get("per_covariate", False),
                                anchors=anchors, theta_search=search)
    scan = model.diagnostics.pop("theta_scan", [])
    write_csv(run.path("theta_scan.csv"), ["a0", "D"], scan)
    write_json(run.path("theta_hat.json"), {"theta_hat": model.diagnostics["theta_hat"],
                                           "D": model.diagnostics["D_at_theta"]})
    run.stage("cubic", "theta_hat=" + ",".join(f"{k}:{v:.8g}"
                                                for k, v in model.diagnostics["theta_hat"].items()))
    emit_model(run, model, oracle, None, False)


def run_nonseparable(cfg, dgp, oracle, anchors, params, run):
    from .extensions.nonseparable import default_t_grid, recover_nonseparable, resimulate_check
    tab = recover_nonseparable(oracle, _covs(params), default_t_grid(params.get("t_grid_size", 99)))
    write_csv(run.path("phi_hat.csv"), ["x1", "x2", "t1", "t2", "phi_hat"], tab.rows())
    diag = dict(tab.diagnostics)
    if run.reveal:
        diag["resimulate_max_dev"] = resimulate_check(tab, dgp)
    write_json(run.path("diagnostics.json"), diag)
    run.stage("nonseparable", f"grid={tab.t.size} covariates={len(tab.covariates)}")


def run_sparse(cfg, dgp, oracle, anchors, params, run):
    from .extensions.sparse import sparse_study
    ladder = params.get("n_ladder")
    if not ladder:
        raise UsageError("sparse-study needs n_ladder")
    study = sparse_study(oracle, ladder, params.get("probe", "pair"), params.get("n_ref"),
                         params.get("heterogeneous", False), params.get("saturation_tol", 1e-12),
                         L=params.get("L", 10), M=params.get("M", 4), anchors=anchors)
    write_json(run.path("sparse_fit.json"), study.to_dict())
    run.stage("sparse", f"kappa_hat={study.kappa.kappa_hat:.12g}")
    emit_model(run, study.fit.model, oracle, None, False)


def run_bounded(cfg, dgp, oracle, anchors, params, run):
    from .extensions.bounded import bounded_recover
    model, state = bounded_recover(oracle, _covs(params), anchors, L=params.get("L", 6),
                                   M=params.get("M", 3), max_rounds=params.get("max_rounds", 10))
    write_json(run.path("bounded_trace.json"), state.to_dict())
    run.stage("bounded", f"rounds={len(state.trace)} f_domain=[{state.f_domain[0]:.10g}, "
                         f"{state.f_domain[1]:.10g}] exhausted={state.exhausted}")
    emit_model(run, model, oracle, dgp, params.get("reference", True))


def run_equivalence(cfg, dgp, oracle, anchors, params, run):
    from .coupling import witness_dgp
    from .equivalence import (AffineTransform, assert_observational_equivalence, normalize_dgp,
                              transform_dgp)
    Q = params.get("Q", 1000)
    tol = params.get("equivalence_tol", 1e-10)
    seed = int(cfg.get("seed", 0))
    n = cfg.get("oracle", {}).get("n")
    report = {}
    transforms = params.get("transforms")
    if transforms is None and dgp.coupling.family == "LinearSum" and dgp.index is None:
        transforms = [{"a": 1.0, "b": -2.0, "c": 3.0}]
    for i, t in enumerate(transforms or []):
        tr = AffineTransform(t.get("a", 0.0), t.get("b", 0.0), t["c"])
        rep = assert_observational_equivalence(dgp, transform_dgp(dgp, tr), Q, tol, seed, n)
        report[f"transform_{i}"] = dict(rep.to_dict(), a=tr.a, b=tr.b, c=tr.c)
    if dgp.coupling.family == "LinearSum" and dgp.index is None:
        once = normalize_dgp(dgp, anchors.alpha, anchors.beta)
        twice = normalize_dgp(once, anchors.alpha, anchors.beta)
        rep = assert_observational_equivalence(once, twice, Q, tol, seed, n)
        report["normalization_idempotent"] = dict(rep.to_dict(),
                                                  spec_equal=once.to_json() == twice.to_json())
    for i, w in enumerate(params.get("witness", [])):
        other = witness_dgp(dgp, w["kind"], w["param"])
        rep = assert_observational_equivalence(dgp, other, Q, tol, seed, n)
        report[f"witness_{i}"] = dict(rep.to_dict(), kind=w["kind"], param=w["param"])
    if not report:
        raise UsageError("nothing to check: give transforms or witness entries")
    write_json(run.path("equivalence_report.json"), report)
    passed = all(r["passed"] for r in report.values())
    run.stage("equivalence", f"checks={len(report)} all_passed={passed}")


RUNNERS = {
    "simulate": run_simulate,
    "recover": run_recover,
    "recover-parametric": run_parametric,
    "recover-cubic": run_cubic,
    "recover-nonseparable": run_nonseparable,
    "sparse-study": run_sparse,
    "bounded-recover": run_bounded,
    "equivalence-check": run_equivalence,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="netident", description="Identification experiments for "
                                "dyadic network formation models.")
    p.add_argument("pipeline", choices=PIPELINES)
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap; results do not depend on it")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--depth-L", dest="depth_L", type=int)
    p.add_argument("--depth-M", dest="depth_M", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--reveal-latents", action="store_true",
                   help="add hidden fixed effects to outputs (test fixtures only)")
    return p


def _versions():
    from importlib.metadata import version
    return {"netident": __version__, "python": platform.python_version(),
            "numpy": version("numpy"), "scipy": version("scipy"), "jsonschema": version("jsonschema")}


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    t0 = time.perf_counter()
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
        cfg = apply_overrides(raw, args)
        validate_config(cfg)
        if cfg.get("pipeline", args.pipeline) != args.pipeline:
            raise UsageError(f"config pipeline {cfg['pipeline']!r} does not match {args.pipeline!r}")
        dgp = DgpSpec.from_dict(cfg["dgp"])
        ocfg = OracleConfig(**cfg.get("oracle", {}))
        anchors = NormalizationAnchors(**cfg.get("anchors", {}))
    except (OSError, json.JSONDecodeError, jsonschema.ValidationError, UsageError, TypeError,
            ValueError) as exc:
        msg = exc.message if isinstance(exc, jsonschema.ValidationError) else str(exc)
        print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = cfg.get("output_dir", "netident_out")
    params = cfg.get("params", {})
    try:
        rn = Run(out_dir, reveal=args.reveal_latents)
        oracle = Oracle(dgp, ocfg)
        RUNNERS[args.pipeline](cfg, dgp, oracle, anchors, params, rn)
    except IdentificationError as exc:
        print(f"identification error: {exc}", file=sys.stderr)
        return EXIT_IDENT
    except (OracleError, FloatingPointError, ArithmeticError) as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (UsageError, NetIdentError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = {"pipeline": args.pipeline, "config_sha256": hashlib.sha256(
                    _canonical(cfg).encode()).hexdigest(),
                "seed": cfg.get("seed", 0), "versions": _versions(),
                "outputs": sorted(rn.files), "wall_time_s": time.perf_counter() - t0}
    write_json(os.path.join(out_dir, "run_manifest.json"), manifest)
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
