"""Command-line interface.

Subcommands: fit, simulate, study, residuals, envelope, dist. Human-readable
summaries print four decimals; machine outputs (JSON, CSV) carry full float
precision so re-parsing reproduces every number exactly. `fit` exits 0 only
when the optimizer converged.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import Dataset, load_csv, write_csv
from .diagnostics import (
    envelope_csv,
    envelope_svg,
    gcs_residuals,
    residuals_csv,
    rq_residuals,
    simulated_envelope,
)
from .distribution import (
    LbsParams,
    QlbsParams,
    lbs_cdf,
    lbs_moments,
    lbs_pdf,
    lbs_quantile,
    lbs_sf,
    quantile_gap,
    theta_from_q,
)
from .model import (
    FitResult,
    ModelSpec,
    ParamVector,
    bootstrap_ci,
    conf_intervals,
    fit,
)
from .numerics import RngStream
from .study import (
    StudyConfig,
    report_params_csv,
    report_residuals_csv,
    report_text,
    run_study,
    simulate_dataset,
)


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _csv_names(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="input CSV (header row required)")
    p.add_argument("--response", default="t", help="response column name (default: t)")
    p.add_argument("--q-cols", type=_csv_names, default=[], metavar="A,B,...",
                   help="covariate columns for the quantile-scale sub-model")
    p.add_argument("--alpha-cols", type=_csv_names, default=[], metavar="A,B,...",
                   help="covariate columns for the shape sub-model")
    p.add_argument("--tau", type=float, default=0.5, help="quantile level (default: 0.5)")
    p.add_argument("--link-q", default="log", choices=["log", "sqrt", "identity"])
    p.add_argument("--link-alpha", default="log", choices=["log", "sqrt", "identity"])
    p.add_argument("--no-q-intercept", action="store_true")
    p.add_argument("--no-alpha-intercept", action="store_true")


def _build_spec(args, data: Dataset) -> tuple[ModelSpec, np.ndarray]:
    t = data.column(args.response)
    n = data.n

    def _design(cols: list[str], with_intercept: bool):
        blocks = []
        names = []
        if with_intercept:
            blocks.append(np.ones((n, 1)))
            names.append("intercept")
        if cols:
            blocks.append(data.matrix(cols))
            names.extend(cols)
        if not blocks:
            raise ValueError("a sub-model needs an intercept or at least one covariate")
        return np.hstack(blocks), tuple(names)

    X, q_names = _design(args.q_cols, not args.no_q_intercept)
    W, a_names = _design(args.alpha_cols, not args.no_alpha_intercept)
    spec = ModelSpec(
        X=X, W=W, link_q=args.link_q, link_alpha=args.link_alpha,
        tau=args.tau, q_names=q_names, alpha_names=a_names,
    )
    return spec, t


def _fit_report_dict(spec: ModelSpec, result: FitResult, level: float,
                     boot=None) -> dict:
    report = {
        "model": {
            "tau": spec.tau,
            "link_q": spec.link_q.name,
            "link_alpha": spec.link_alpha.name,
            "q_terms": list(spec.q_names),
            "alpha_terms": list(spec.alpha_names),
        },
        "n": result.n_obs,
        "converged": result.converged,
        "iterations": result.iterations,
        "gradient_norm": result.gradient_norm,
        "message": result.message,
        "loglik": result.loglik,
        "aic": result.aic,
        "bic": result.bic,
        "interval_level": level,
        "coefficients": [],
    }
    flat = result.delta_hat.concat()
    cis = conf_intervals(result, gamma=1.0 - level) if result.converged else None
    for j, name in enumerate(result.param_names):
        entry = {"name": name, "estimate": float(flat[j])}
        if result.std_errors is not None:
            entry["std_error"] = float(result.std_errors[j])
        if cis is not None:
            entry["ci_lower"] = cis[j].lo
            entry["ci_upper"] = cis[j].hi
        if boot is not None:
            entry["bootstrap_lower"] = boot.intervals[j].lo
            entry["bootstrap_upper"] = boot.intervals[j].hi
        report["coefficients"].append(entry)
    if boot is not None:
        report["bootstrap"] = {"replicates": boot.attempted, "failed": boot.failed}
    return report


def _fit_report_text(spec: ModelSpec, result: FitResult, level: float, boot=None) -> str:
    lines = []
    pct = 100.0 * level
    lines.append(
        f"quantile-scale regression  tau={spec.tau}  n={result.n_obs}  "
        f"links: Q~{spec.link_q.name}, alpha~{spec.link_alpha.name}"
    )
    status = "converged" if result.converged else f"NOT CONVERGED ({result.message})"
    lines.append(
        f"{status} in {result.iterations} iterations, max |score| = {result.gradient_norm:.3e}"
    )
    lines.append(
        f"loglik = {result.loglik:.4f}   AIC = {result.aic:.4f}   BIC = {result.bic:.4f}"
    )
    flat = result.delta_hat.concat()
    p = len(spec.q_names)
    cis = conf_intervals(result, gamma=1.0 - level) if result.converged else None
    header = f"  {'term':<14} {'estimate':>10} {'std.err':>10}   {pct:.0f}% interval"
    for label, lo, hi in (("quantile-scale component", 0, p),
                          ("shape component", p, len(flat))):
        lines.append(label)
        lines.append(header)
        for j in range(lo, hi):
            name = (spec.q_names + spec.alpha_names)[j]
            se = f"{result.std_errors[j]:>10.4f}" if result.std_errors is not None else f"{'-':>10}"
            ci = f"({cis[j].lo:.4f}; {cis[j].hi:.4f})" if cis is not None else "-"
            row = f"  {name:<14} {flat[j]:>10.4f} {se}   {ci}"
            if boot is not None:
                row += f"   boot ({boot.intervals[j].lo:.4f}; {boot.intervals[j].hi:.4f})"
            lines.append(row)
    return "\n".join(lines) + "\n"


def cmd_fit(args) -> int:
    data = load_csv(args.data)
    spec, t = _build_spec(args, data)
    result = fit(spec, t)
    boot = None
    if args.bootstrap > 0 and result.converged:
        boot = bootstrap_ci(spec, t, B=args.bootstrap, gamma=1.0 - args.level,
                            rng=RngStream(args.seed))
    text = _fit_report_text(spec, result, args.level, boot)
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.with_suffix(".json").write_text(
            json.dumps(_fit_report_dict(spec, result, args.level, boot), indent=2) + "\n"
        )
        out.with_suffix(".txt").write_text(text)
    return 0 if result.converged else 1


def cmd_simulate(args) -> int:
    delta = ParamVector(beta=np.asarray(args.beta), rho=np.asarray(args.rho))
    rng = RngStream(args.seed, stream_id=args.stream)
    spec, t = simulate_dataset(args.n, args.tau, delta, rng)
    p, q = spec.X.shape[1], spec.W.shape[1]
    cols = ["t"] + [f"x{j}" for j in range(1, p)] + [f"w{j}" for j in range(1, q)]
    rows = np.column_stack([t] + [spec.X[:, j] for j in range(1, p)]
                           + [spec.W[:, j] for j in range(1, q)])
    write_csv(args.out, cols, rows)
    sys.stdout.write(f"wrote {args.n} rows to {args.out}\n")
    return 0


def cmd_study(args) -> int:
    config = StudyConfig.from_json(Path(args.config).read_text())
    if args.fast:
        config = StudyConfig(
            n_grid=config.n_grid, tau_grid=config.tau_grid, replications=200,
            beta=config.beta, rho=config.rho, seed=config.seed,
            covariate_law=config.covariate_law,
        )
    report = run_study(config, workers=args.workers)
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    Path(f"{prefix}_params.csv").write_text(report_params_csv(report))
    Path(f"{prefix}_residuals.csv").write_text(report_residuals_csv(report))
    text = report_text(report)
    Path(f"{prefix}_tables.txt").write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_residuals(args) -> int:
    data = load_csv(args.data)
    spec, t = _build_spec(args, data)
    result = fit(spec, t)
    if not result.converged:
        sys.stderr.write(f"error: fit did not converge ({result.message})\n")
        return 1
    gcs = gcs_residuals(result, spec, t)
    rq = rq_residuals(result, spec, t)
    out = Path(args.out)
    out.with_suffix(".csv").write_text(residuals_csv(gcs, rq))
    meta = {
        "gcs": {
            "definition": "-log(S(t_i)) with S the fitted survival probability",
            "reference": "unit exponential",
            "cap": "values above -log(1e-300) are capped",
            "flagged_rows": [int(i) + 1 for i in gcs.flagged],
        },
        "rq": {
            "definition": "norm_quantile(S(t_i)) with S the fitted survival probability",
            "reference": "standard normal",
            "sign_convention": "argument is the survival probability, not the CDF",
            "saturation": "values are clipped to +/-8.2",
            "flagged_rows": [int(i) + 1 for i in rq.flagged],
        },
    }
    out.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    sys.stdout.write(f"wrote {out.with_suffix('.csv')} and {out.with_suffix('.meta.json')}\n")
    return 0


def cmd_envelope(args) -> int:
    data = load_csv(args.data)
    spec, t = _build_spec(args, data)
    result = fit(spec, t)
    if not result.converged:
        sys.stderr.write(f"error: fit did not converge ({result.message})\n")
        return 1
    kinds = ["gcs", "rq"] if args.kind == "both" else [args.kind]
    rng = RngStream(args.seed)
    for kind in kinds:
        band = simulated_envelope(result, spec, kind=kind, R=args.reps,
                                  level=1.0 - args.level, rng=rng)
        observed = (gcs_residuals if kind == "gcs" else rq_residuals)(result, spec, t).values
        base = Path(f"{args.out}_{kind}")
        base.with_suffix(".csv").write_text(envelope_csv(band, observed))
        base.with_suffix(".svg").write_text(envelope_svg(band, observed))
        inside = np.mean(
            (np.sort(observed) >= band.lower) & (np.sort(observed) <= band.upper)
        )
        sys.stdout.write(
            f"{kind}: {band.replicates} replicates, {100 * inside:.1f}% of points inside "
            f"the {100 * args.level:.0f}% band -> {base.with_suffix('.csv')}, "
            f"{base.with_suffix('.svg')}\n"
        )
    return 0


def cmd_dist(args) -> int:
    if args.q is not None:
        if args.alpha is None:
            raise ValueError("--q requires --alpha")
        params = theta_from_q(QlbsParams(alpha=args.alpha, q_tau=args.q, tau=args.tau))
    elif args.op != "quantile-gap":
        if args.alpha is None or args.theta is None:
            raise ValueError("provide --alpha with --theta (or --q with --tau)")
        params = LbsParams(alpha=args.alpha, theta=args.theta)

    if args.op == "quantile-gap":
        if args.alpha is None:
            raise ValueError("quantile-gap requires --alpha (and --tau)")
        sys.stdout.write(f"{quantile_gap(args.tau, args.alpha)!r}\n")
        return 0
    if args.op in ("mean", "variance"):
        mean, var = lbs_moments(params)
        sys.stdout.write(f"{mean!r}\n" if args.op == "mean" else f"{var!r}\n")
        return 0
    if not args.at:
        raise ValueError(f"--at is required for op {args.op!r}")
    fn = {"pdf": lbs_pdf, "cdf": lbs_cdf, "sf": lbs_sf, "quantile": lbs_quantile}[args.op]
    for v in args.at:
        sys.stdout.write(f"{float(fn(v, params))!r}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qlbs",
        description="Quantile-scale regression for length-biased Birnbaum-Saunders responses",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the regression model to a CSV dataset")
    _add_model_args(p)
    p.add_argument("--level", type=float, default=0.95, help="interval level (default 0.95)")
    p.add_argument("--bootstrap", type=int, default=0, metavar="B",
                   help="add percentile bootstrap intervals from B case resamples")
    p.add_argument("--seed", type=int, default=0, help="rng seed for the bootstrap")
    p.add_argument("--out", default=None, help="output prefix for .json and .txt reports")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="draw a synthetic dataset from the model")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--beta", type=_csv_floats, required=True, metavar="B0,B1,...")
    p.add_argument("--rho", type=_csv_floats, required=True, metavar="R0,R1,...")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("study", help="run a Monte Carlo study from a JSON config")
    p.add_argument("--config", required=True, help="JSON config path (see README)")
    p.add_argument("--out", required=True, help="output prefix for CSV/text reports")
    p.add_argument("--fast", action="store_true", help="override replications to 200")
    p.add_argument("--workers", type=int, default=None,
                   help="process count (default: QLBS_WORKERS env var, then 1)")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("residuals", help="fit and write both residual kinds")
    _add_model_args(p)
    p.add_argument("--out", required=True, help="output prefix for .csv and .meta.json")
    p.set_defaults(func=cmd_residuals)

    p = sub.add_parser("envelope", help="fit and write simulated envelope bands")
    _add_model_args(p)
    p.add_argument("--kind", choices=["gcs", "rq", "both"], default="both")
    p.add_argument("--reps", type=int, default=100, help="envelope replicates (default 100)")
    p.add_argument("--level", type=float, default=0.95, help="band level (default 0.95)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output prefix for per-kind .csv/.svg")
    p.set_defaults(func=cmd_envelope)

    p = sub.add_parser("dist", help="evaluate distribution functions at given parameters")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--q", type=float, default=None, help="quantile-scale parameter Q_tau")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--op", required=True,
                   choices=["pdf", "cdf", "sf", "quantile", "mean", "variance", "quantile-gap"])
    p.add_argument("--at", type=_csv_floats, default=[], metavar="V1,V2,...",
                   help="evaluation points (required for pdf/cdf/sf/quantile)")
    p.set_defaults(func=cmd_dist)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
