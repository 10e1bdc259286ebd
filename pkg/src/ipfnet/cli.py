"""Command-line front end: ingestion, inference, repair, baselines, experiments.

Subcommands: ingest, check, run, repair, gravity-fit, gravity-infer,
baseline, simulate, evaluate, diagnose, experiment.  All structured output
is JSON (schema_version "1") or CSV; networks and marginals use the triplet
and one-value-per-line text formats of the core module.

Exit codes: 0 success, 2 infeasible input that the repair subcommand could
fix (or a balancing run that did not converge), 3 input/usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, experiments, synth
from .core import (
    MarginalPair,
    SparseNetwork,
    read_marginal,
    read_network,
    validate_pair,
    write_marginal,
    write_network,
)
from .engine import IpfConfig, IpfStatus, l1_marginal_error, run_ipf, scaled_matrix
from .errors import (
    InfeasibleError,
    IpfnetError,
    NonConvergenceError,
    StructuralInfeasibilityError,
    ValidationError,
)
from .feasibility import check_feasibility, find_blocking_set
from .ingest import ingest_trips
from .repair import RepairConfig, RepairObjective, Tiebreak, conv_ipf, fill_all_zeros
from .stats import (
    ScalingParameters,
    bipartite_laplacian_fiedler,
    error_bound,
    finite_mle_condition,
    fit_diagnostics,
    stationarity_check,
)

SCHEMA_VERSION = "1"

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_INPUT = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors, which collides with the
    infeasible-input code; remap usage errors to 3."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def _default_seed():
    env = os.environ.get("IPFNET_SEED")
    return int(env) if env else 0


def _emit(payload, path, args):
    doc = {"schema_version": SCHEMA_VERSION}
    doc.update(payload)
    if not args.no_meta:
        doc["meta"] = {
            "created": datetime.now(timezone.utc).isoformat(),
            "tool": f"ipfnet {__version__}",
        }
    text = json.dumps(doc, indent=2, sort_keys=True, allow_nan=True)
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _load_pair(args):
    network = read_network(args.network)
    p = read_marginal(args.p, expected_len=network.m)
    q = read_marginal(args.q, expected_len=network.n)
    return network, validate_pair(network, MarginalPair(p, q))


def _float_list(vec):
    return [float(x) for x in np.asarray(vec)]


def _reconcile(p, q, rel_tol=1e-6):
    """Total-reconciled MarginalPair for commands that carry no network."""
    sp = p.sum()
    sq = q.sum()
    if sp <= 0 or sq <= 0:
        raise ValidationError("marginal totals must be positive")
    if abs(sp - sq) > rel_tol * sp:
        raise ValidationError(
            f"marginal totals disagree beyond tolerance: sum p = {sp!r}, sum q = {sq!r}"
        )
    return MarginalPair(p, q if sq == sp else q * (sp / sq))


# ---------------------------------------------------------------- ingest


def _cmd_ingest(args):
    start = datetime.fromisoformat(args.start)
    end = datetime.fromisoformat(args.end)
    with open(args.trips, newline="", encoding="utf-8") as fh:
        report = ingest_trips(fh, start, end)
    out = Path(args.out_dir)
    (out / "slices").mkdir(parents=True, exist_ok=True)
    (out / "marginals").mkdir(parents=True, exist_ok=True)
    (out / "stations.txt").write_text(
        "".join(name + "\n" for name in report.stations), encoding="utf-8"
    )
    write_network(report.aggregated, out / "aggregate.net")
    for label, sl, marg in zip(report.hours, report.series.slices, report.hourly_marginals):
        write_network(sl, out / "slices" / f"{label}.net")
        write_marginal(marg.p, out / "marginals" / f"{label}.p")
        write_marginal(marg.q, out / "marginals" / f"{label}.q")
    _emit(
        {
            "stations": len(report.stations),
            "hours": list(report.hours),
            "kept_trips": report.kept_trips,
            "same_hour_trips": report.same_hour_trips,
            "midpoint_trips": report.midpoint_trips,
            "skipped_rows": report.skipped_rows,
            "aggregate_total": report.aggregated.total(),
            "out_dir": str(out),
        },
        args.json,
        args,
    )
    return EXIT_OK


# ----------------------------------------------------------------- check


def _blocking_payload(diag):
    return {
        "rows": list(diag.rows),
        "neighbor_cols": list(diag.neighbor_cols),
        "p_sum": diag.p_sum,
        "q_sum": diag.q_sum,
        "delta": diag.delta,
    }


def _cmd_check(args):
    network, marg = _load_pair(args)
    flow = check_feasibility(network, marg)
    payload = {
        "feasible": flow.feasible,
        "max_flow": flow.max_flow_value,
        "marginal_total": marg.total,
    }
    if not flow.feasible:
        payload["blocking_set"] = _blocking_payload(find_blocking_set(network, marg, flow))
        payload["hint"] = "run `ipfnet repair` to restore feasibility"
    _emit(payload, args.json, args)
    return EXIT_OK


# ------------------------------------------------------------------- run


def _repair_payload(report):
    return {
        "rounds": report.rounds,
        "total_edges_added": report.total_edges_added,
        "exact_dlambda1": report.exact_dlambda1,
        "round_details": [
            {
                "blocking_set": _blocking_payload(r.diagnosis),
                "edges": [list(e) for e in r.addition.edges],
                "weight": r.addition.weight,
                "estimated_dlambda1": r.addition.estimated_dlambda1,
            }
            for r in report.round_details
        ],
    }


def _result_payload(res, network, marg, include_trace):
    xhat = scaled_matrix(network, res.d0, res.d1)
    payload = {
        "status": res.status.value,
        "iterations": res.iterations,
        "d0": _float_list(res.d0),
        "d1": _float_list(res.d1),
        "l1_marginal_error": l1_marginal_error(xhat, marg),
    }
    if include_trace:
        payload["l1_trace"] = _float_list(res.l1_trace)
    return payload, xhat


def _repair_config(args):
    objective = (
        RepairObjective.MIN_EDGES
        if args.objective == "min-edges"
        else RepairObjective.MIN_LAMBDA1
    )
    tiebreak = (
        Tiebreak.SMALLEST_P if args.tiebreak == "smallest-p" else Tiebreak.LARGEST_P
    )
    return RepairConfig(
        objective=objective,
        tiebreak=tiebreak,
        edge_weight_rule=args.edge_weight_multiplier,
        knapsack_resolution=args.knapsack_resolution,
        max_rounds=args.max_rounds,
    )


def _cmd_run(args):
    network, marg = _load_pair(args)
    cfg = IpfConfig(
        tolerance=args.tolerance,
        max_iterations=args.max_iterations,
        record_trace=not args.no_trace,
    )
    payload = {}
    repaired = False
    if args.repair:
        network, report = conv_ipf(network, marg, _repair_config(args))
        payload["repair"] = _repair_payload(report)
        repaired = True
    try:
        res = run_ipf(network, marg, cfg)
    except StructuralInfeasibilityError as exc:
        _emit(
            {
                "error": str(exc),
                "hint": "run `ipfnet repair` or pass --repair",
            },
            args.json,
            args,
        )
        return EXIT_INFEASIBLE
    body, xhat = _result_payload(res, network, marg, include_trace=not args.no_trace)
    payload.update(body)
    if args.out:
        write_network(xhat, args.out)
        payload["out"] = args.out
    ok = res.status is IpfStatus.CONVERGED or repaired
    if not ok:
        payload["error"] = (
            f"balancing stopped with status {res.status.value}; "
            "run `ipfnet repair` or pass --repair"
        )
    _emit(payload, args.json, args)
    return EXIT_OK if ok else EXIT_INFEASIBLE


def _cmd_run_batch(args):
    network = read_network(args.network)
    mdir = Path(args.marginals_dir)
    labels = sorted(f.stem for f in mdir.glob("*.p"))
    if not labels:
        raise ValidationError(f"no .p marginal files under {mdir}")
    out = Path(args.out_dir) if args.out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    cfg = IpfConfig(
        tolerance=args.tolerance,
        max_iterations=args.max_iterations,
        record_trace=False,
    )

    def one(label):
        p = read_marginal(mdir / f"{label}.p", expected_len=network.m)
        q = read_marginal(mdir / f"{label}.q", expected_len=network.n)
        if p.sum() <= 0:
            return label, {"status": "Empty", "iterations": 0}
        marg = validate_pair(network, MarginalPair(p, q))
        try:
            res = run_ipf(network, marg, cfg)
        except StructuralInfeasibilityError as exc:
            return label, {"status": "StructurallyInfeasible", "error": str(exc)}
        xhat = scaled_matrix(network, res.d0, res.d1)
        if out:
            write_network(xhat, out / f"{label}.net")
        return label, {
            "status": res.status.value,
            "iterations": res.iterations,
            "l1_marginal_error": l1_marginal_error(xhat, marg),
        }

    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        rows = dict(pool.map(one, labels))
    _emit({"hours": rows, "network": args.network}, args.json, args)
    return EXIT_OK


# ---------------------------------------------------------------- repair


def _cmd_repair(args):
    network, marg = _load_pair(args)
    if args.fill_all_zeros:
        eps = args.fill_value
        if eps is None:
            eps = 0.01 * network.min_positive()
        fixed = fill_all_zeros(network, marg, eps)
        payload = {
            "method": "fill-all-zeros",
            "fill_value": eps,
            "edges_added": fixed.nnz - network.nnz,
        }
    else:
        fixed, report = conv_ipf(network, marg, _repair_config(args))
        payload = _repair_payload(report)
        payload["method"] = args.objective
    if args.out:
        write_network(fixed, args.out)
        payload["out"] = args.out
    _emit(payload, args.json, args)
    return EXIT_OK


# --------------------------------------------------------------- gravity


def _load_distances(path):
    d = np.loadtxt(path, dtype=np.float64)
    if d.ndim == 1:
        d = d[None, :]
    return d


def _cmd_gravity_fit(args):
    network = read_network(args.network)
    distances = _load_distances(args.distances)
    gm = synth.fit_gravity(network, distances, bin_width=args.bin_width)
    _emit({"alpha": gm.alpha, "beta": gm.beta, "bin_width": args.bin_width}, args.json, args)
    return EXIT_OK


def _cmd_gravity_infer(args):
    distances = synth.effective_distances(_load_distances(args.distances))
    gm = synth.GravityModel(alpha=args.alpha, beta=args.beta, distances=distances)
    p = read_marginal(args.p, expected_len=distances.shape[0])
    q = read_marginal(args.q, expected_len=distances.shape[1])
    marg = _reconcile(p, q)
    try:
        xhat = synth.gravity_infer(gm, marg)
    except NonConvergenceError as exc:
        _emit({"error": str(exc)}, args.json, args)
        return EXIT_INFEASIBLE
    if args.out:
        write_network(xhat, args.out)
    _emit(
        {
            "alpha": args.alpha,
            "beta": args.beta,
            "total": xhat.total(),
            "l1_marginal_error": l1_marginal_error(xhat, marg),
            "out": args.out,
        },
        args.json,
        args,
    )
    return EXIT_OK


# -------------------------------------------------------------- baseline


def _cmd_baseline(args):
    if args.method == "rank1":
        p = read_marginal(args.p)
        q = read_marginal(args.q)
        est = synth.baseline_rank1(_reconcile(p, q))
    elif args.method == "row-share":
        network = read_network(args.network)
        est = synth.baseline_row_share(network, read_marginal(args.p, expected_len=network.m))
    elif args.method == "col-share":
        network = read_network(args.network)
        est = synth.baseline_col_share(network, read_marginal(args.q, expected_len=network.n))
    else:
        network = read_network(args.network)
        if args.total is None:
            raise ValidationError("baseline scale needs --total")
        est = synth.baseline_scale(network, args.total)
    if args.out:
        write_network(est, args.out)
    _emit({"method": args.method, "total": est.total(), "out": args.out}, args.json, args)
    return EXIT_OK


# -------------------------------------------------------------- simulate


def _make_model(args, rng):
    if args.model == "poisson":
        return synth.Poisson()
    if args.model == "exponential":
        return synth.Exponential()
    if args.model == "negbinom":
        return synth.NegBinom(args.gamma)
    positions_r = synth.uniform_positions(args.m, rng)
    positions_c = synth.uniform_positions(args.n, rng)
    return synth.Interaction(args.alpha, args.beta, positions_r, positions_c)


def _cmd_simulate(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = synth.SynthConfig(
        m=args.m,
        n=args.n,
        sparsity=args.sparsity,
        param_low=args.param_low,
        param_high=args.param_high,
        base_low=args.base_low,
        base_high=args.base_high,
        seed=0,
    )
    metrics_path = out / "metrics.csv"
    fields = ["trial", "seed", "status", "iterations", "l2", "cosine"]
    with open(metrics_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for t in range(args.trials):
            seed = synth.trial_seed(args.seed, t)
            model = _make_model(args, np.random.default_rng(synth.trial_seed(args.seed, t, 1)))
            cfg = replace(base, seed=seed)
            inst = synth.generate_instance(cfg, model)
            write_network(inst.Xbar, out / f"trial_{t}_aggregate.net")
            write_network(inst.Y, out / f"trial_{t}_sample.net")
            write_marginal(inst.marg.p, out / f"trial_{t}.p")
            write_marginal(inst.marg.q, out / f"trial_{t}.q")
            res = run_ipf(inst.Xbar, inst.marg, IpfConfig(record_trace=False))
            xhat = scaled_matrix(inst.Xbar, res.d0, res.d1)
            writer.writerow(
                {
                    "trial": t,
                    "seed": seed,
                    "status": res.status.value,
                    "iterations": res.iterations,
                    "l2": synth.l2_param_error(res.d0, res.d1, inst.truth),
                    "cosine": synth.cosine_similarity(xhat, inst.Y),
                }
            )
    _emit({"trials": args.trials, "out_dir": str(out), "metrics": str(metrics_path)}, args.json, args)
    return EXIT_OK


# -------------------------------------------------------------- evaluate


def _cmd_evaluate(args):
    est = read_network(args.est)
    truth = read_network(args.truth)
    if (est.m, est.n) != (truth.m, truth.n):
        raise ValidationError("estimate and truth dims disagree")
    union = {}
    for net, slot in ((est, 0), (truth, 1)):
        for i, j, v in zip(net.row, net.col, net.val):
            union.setdefault((int(i), int(j)), [0.0, 0.0])[slot] = float(v)
    diff2 = sum((a - b) ** 2 for a, b in union.values())
    tnorm = float(np.linalg.norm(truth.val))
    payload = {
        "cosine": synth.cosine_similarity(est, truth),
        "rel_frobenius": float(np.sqrt(diff2)) / tnorm if tnorm else float("inf"),
        "est_total": est.total(),
        "truth_total": truth.total(),
    }
    if args.p and args.q:
        p = read_marginal(args.p, expected_len=est.m)
        q = read_marginal(args.q, expected_len=est.n)
        payload["l1_marginal_error"] = l1_marginal_error(est, MarginalPair(p, q))
    _emit(payload, args.json, args)
    return EXIT_OK


# -------------------------------------------------------------- diagnose


def _residual_percentiles(diag):
    vals = np.array(list(diag.pearson_residuals.values()))
    return {str(k): float(np.percentile(vals, k)) for k in (5, 25, 50, 75, 95)}


def _cmd_diagnose(args):
    network, marg = _load_pair(args)
    payload = {"fiedler": bipartite_laplacian_fiedler(network).lambda2}
    flow = check_feasibility(network, marg)
    payload["feasible"] = flow.feasible
    if not flow.feasible:
        payload["blocking_set"] = _blocking_payload(find_blocking_set(network, marg, flow))
        payload["hint"] = "run `ipfnet repair` before fitting"
        _emit(payload, args.json, args)
        return EXIT_OK
    res = run_ipf(network, marg)
    with np.errstate(divide="ignore"):
        params = ScalingParameters(np.log(res.d0), -np.log(res.d1))
    finite = np.concatenate(
        [params.u[np.isfinite(params.u)], params.v[np.isfinite(params.v)]]
    )
    B = args.B if args.B is not None else float(np.abs(finite).max()) if finite.size else 0.0
    bound = error_bound(network, params, B)
    cond, lam2_star = finite_mle_condition(network, params)
    payload.update(
        {
            "ipf_status": res.status.value,
            "iterations": res.iterations,
            "error_bound": {
                "kappa": bound.kappa,
                "B": bound.B,
                "lambda2": bound.lambda2,
                "bound": bound.bound,
                "M": bound.M,
                "disconnected": bound.disconnected,
            },
            "finite_mle": {"condition": cond, "lambda2_star": lam2_star},
        }
    )
    if args.observed:
        Y = read_network(args.observed)
        xhat = scaled_matrix(network, res.d0, res.d1)
        diag = fit_diagnostics(Y, xhat, network.m, network.n)
        payload["dispersion"] = diag.dispersion
        payload["observations"] = diag.observation_count
        payload["residual_percentiles"] = _residual_percentiles(diag)
    if args.series_dir:
        mdir = Path(args.series_dir)
        labels = sorted(f.stem for f in mdir.glob("*.p"))
        results = []
        for label in labels:
            p = read_marginal(mdir / f"{label}.p", expected_len=network.m)
            q = read_marginal(mdir / f"{label}.q", expected_len=network.n)
            if p.sum() <= 0 or q.sum() <= 0:
                continue
            results.append(run_ipf(network, validate_pair(network, MarginalPair(p, q))))
        if len(results) >= 2:
            summary = stationarity_check(results, network)
            payload["stationarity"] = {
                "percentiles": {str(k): v for k, v in summary.percentiles.items()},
                "timesteps": summary.timesteps,
            }
    _emit(payload, args.json, args)
    return EXIT_OK


# ------------------------------------------------------------ experiment


def _cmd_experiment(args):
    base = synth.SynthConfig(m=args.m, n=args.n, seed=0)
    if args.kind == "sparsity":
        grid = [float(x) for x in args.r_grid.split(",")]
        rows = experiments.experiment_sparsity(
            base, grid, args.trials, args.seed, workers=args.workers
        )
        key = "r"
    else:
        models = [
            ("poisson", synth.Poisson()),
            ("negbinom_0.8", synth.NegBinom(0.8)),
            ("negbinom_0.5", synth.NegBinom(0.5)),
            ("exponential", synth.Exponential()),
            ("negbinom_0.2", synth.NegBinom(0.2)),
        ]
        rows = experiments.experiment_misspec(
            base, models, args.trials, args.seed, workers=args.workers
        )
        key = "model"
    if args.out:
        fields = [key] + [c for c in rows[0] if c != key]
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            writer.writerows(rows)
    _emit({"kind": args.kind, "rows": rows, "out": args.out}, args.json, args)
    return EXIT_OK


# ------------------------------------------------------------------ main


def _add_common(sp):
    sp.add_argument("--json", help="write the JSON report here instead of stdout")
    sp.add_argument(
        "--no-meta",
        action="store_true",
        help="omit timestamps so reruns are byte-identical",
    )


def _add_pair_inputs(sp):
    sp.add_argument("--network", required=True, help="triplet network file")
    sp.add_argument("--p", required=True, help="row marginal file")
    sp.add_argument("--q", required=True, help="column marginal file")


def _add_repair_flags(sp):
    sp.add_argument(
        "--objective",
        choices=["min-edges", "min-lambda1"],
        default="min-lambda1",
    )
    sp.add_argument(
        "--tiebreak", choices=["largest-p", "smallest-p"], default="largest-p"
    )
    sp.add_argument("--edge-weight-multiplier", type=float, default=0.01)
    sp.add_argument("--knapsack-resolution", type=int, default=10**6)
    sp.add_argument("--max-rounds", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ipfnet", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ipfnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("ingest", help="bucket trip records into hourly networks")
    sp.add_argument("--trips", required=True, help="trip CSV")
    sp.add_argument("--start", required=True, help="window start, ISO-8601")
    sp.add_argument("--end", required=True, help="window end, ISO-8601 (exclusive)")
    sp.add_argument("--out-dir", required=True)
    _add_common(sp)
    sp.set_defaults(func=_cmd_ingest)

    sp = sub.add_parser("check", help="feasibility diagnosis for (network, marginals)")
    _add_pair_inputs(sp)
    _add_common(sp)
    sp.set_defaults(func=_cmd_check)

    sp = sub.add_parser("run", help="balance a network to marginals")
    sp.add_argument("--network", required=True)
    sp.add_argument("--p")
    sp.add_argument("--q")
    sp.add_argument("--marginals-dir", help="batch mode: directory of <label>.p/.q files")
    sp.add_argument("--out", help="write the inferred network here")
    sp.add_argument("--out-dir", help="batch mode: write per-hour networks here")
    sp.add_argument("--tolerance", type=float, default=1e-8)
    sp.add_argument("--max-iterations", type=int, default=10000)
    sp.add_argument("--no-trace", action="store_true")
    sp.add_argument("--repair", action="store_true", help="repair infeasible input first")
    sp.add_argument("--workers", type=int, default=4, help="batch-mode thread count")
    _add_repair_flags(sp)
    _add_common(sp)
    sp.set_defaults(func=None)

    sp = sub.add_parser("repair", help="add minimal edges until feasible")
    _add_pair_inputs(sp)
    sp.add_argument("--out", help="write the repaired network here")
    sp.add_argument(
        "--fill-all-zeros",
        action="store_true",
        help="use the fill-every-zero baseline instead of the repair loop",
    )
    sp.add_argument("--fill-value", type=float, default=None)
    _add_repair_flags(sp)
    _add_common(sp)
    sp.set_defaults(func=_cmd_repair)

    sp = sub.add_parser("gravity-fit", help="fit distance-kernel exponents to a network")
    sp.add_argument("--network", required=True)
    sp.add_argument("--distances", required=True, help="whitespace-separated matrix file")
    sp.add_argument("--bin-width", type=float, default=0.001)
    _add_common(sp)
    sp.set_defaults(func=_cmd_gravity_fit)

    sp = sub.add_parser("gravity-infer", help="balance a fitted distance kernel")
    sp.add_argument("--distances", required=True)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--p", required=True)
    sp.add_argument("--q", required=True)
    sp.add_argument("--out")
    _add_common(sp)
    sp.set_defaults(func=_cmd_gravity_infer)

    sp = sub.add_parser("baseline", help="ablation estimators")
    sp.add_argument(
        "--method",
        choices=["rank1", "row-share", "col-share", "scale"],
        required=True,
    )
    sp.add_argument("--network")
    sp.add_argument("--p")
    sp.add_argument("--q")
    sp.add_argument("--total", type=float)
    sp.add_argument("--out")
    _add_common(sp)
    sp.set_defaults(func=_cmd_baseline)

    sp = sub.add_parser("simulate", help="draw synthetic instances and score them")
    sp.add_argument(
        "--model",
        choices=["poisson", "exponential", "negbinom", "interaction"],
        default="poisson",
    )
    sp.add_argument("--gamma", type=float, default=0.5)
    sp.add_argument("--alpha", type=float, default=-0.5)
    sp.add_argument("--beta", type=float, default=2.0)
    sp.add_argument("--sparsity", type=float, default=0.0)
    sp.add_argument("--m", type=int, default=100)
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--param-low", type=float, default=0.0)
    sp.add_argument("--param-high", type=float, default=4.0)
    sp.add_argument("--base-low", type=float, default=0.0)
    sp.add_argument("--base-high", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=_default_seed())
    sp.add_argument("--trials", type=int, default=1)
    sp.add_argument("--out-dir", required=True)
    _add_common(sp)
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("evaluate", help="compare an estimate against a reference")
    sp.add_argument("--est", required=True)
    sp.add_argument("--truth", required=True)
    sp.add_argument("--p")
    sp.add_argument("--q")
    _add_common(sp)
    sp.set_defaults(func=_cmd_evaluate)

    sp = sub.add_parser("diagnose", help="spectral, bound, and residual diagnostics")
    _add_pair_inputs(sp)
    sp.add_argument("--B", type=float, default=None, help="parameter magnitude bound")
    sp.add_argument("--observed", help="observed network for dispersion diagnostics")
    sp.add_argument("--series-dir", help="hourly marginals for the stationarity check")
    _add_common(sp)
    sp.set_defaults(func=_cmd_diagnose)

    sp = sub.add_parser("experiment", help="Monte-Carlo sweeps")
    sp.add_argument("--kind", choices=["sparsity", "misspec"], required=True)
    sp.add_argument("--m", type=int, default=100)
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--seed", type=int, default=_default_seed())
    sp.add_argument(
        "--r-grid",
        default="0,0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9",
    )
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--out", help="summary CSV path")
    _add_common(sp)
    sp.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        if args.marginals_dir:
            args.func = _cmd_run_batch
        else:
            if not (args.p and args.q):
                parser.error("run needs --p and --q (or --marginals-dir)")
            args.func = _cmd_run
    try:
        return args.func(args)
    except (InfeasibleError, StructuralInfeasibilityError) as exc:
        print(f"ipfnet: infeasible input: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (IpfnetError, OSError) as exc:
        print(f"ipfnet: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
