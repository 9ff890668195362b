"""Monte Carlo study harness for the quantile-scale regression estimator.

The default protocol regresses both sub-models on a single uniform covariate
with log links: x1, w1 ~ U(-1, 1) redrawn each replication,

    log Q_tau_i = beta0 + beta1 x1_i,   log alpha_i = rho0 + rho1 w1_i,

and reports per-cell (n, tau) estimator summaries (mean, bias, MSE, coverage
of 95% asymptotic intervals) plus residual-moment calibration for both
residual kinds.

Determinism: replication b always uses RngStream(seed, stream_id=b), and
aggregation runs in replication order, so reports are byte-identical for a
given config regardless of the worker count (QLBS_WORKERS, default 1).

Residual moments are aggregated two ways and both are reported: the mean over
replications of per-replication sample moments (the calibration view: its
small-sample bias shrinks visibly as n grows) and moments of the pooled
residuals across the cell (computed exactly from per-replication power sums).
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import gcs_residuals, residual_moments, rq_residuals
from .distribution import _kappa_vec, _quantile_vec
from .model import (
    ModelSpec,
    ParamVector,
    SingularInformationError,
    fit,
)
from .numerics import RngStream, norm_quantile

COVARIATE_LAWS = ("uniform",)
_Z975 = norm_quantile(0.975)
FAILURE_FLAG_RATE = 0.05


@dataclass(frozen=True)
class StudyConfig:
    """Study design: sample-size and quantile grids, truth, replication count."""

    n_grid: tuple[int, ...]
    tau_grid: tuple[float, ...]
    replications: int
    beta: tuple[float, ...]
    rho: tuple[float, ...]
    seed: int
    covariate_law: str = "uniform"

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "tau_grid", tuple(float(t) for t in self.tau_grid))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        object.__setattr__(self, "rho", tuple(float(r) for r in self.rho))
        if not self.n_grid or not self.tau_grid:
            raise ValueError("n_grid and tau_grid must be non-empty")
        if len(self.beta) < 1 or len(self.rho) < 1:
            raise ValueError("beta and rho need at least an intercept")
        p, q = len(self.beta), len(self.rho)
        for n in self.n_grid:
            if n <= p + q:
                raise ValueError(f"sample size {n} is too small for p+q={p + q}")
        for tau in self.tau_grid:
            if not 0.0 < tau < 1.0:
                raise ValueError(f"tau must lie strictly inside (0, 1), got {tau}")
        if self.replications < 1:
            raise ValueError("replications must be positive")
        if self.covariate_law not in COVARIATE_LAWS:
            raise ValueError(
                f"unknown covariate law {self.covariate_law!r}; available: {COVARIATE_LAWS}"
            )

    @classmethod
    def from_json(cls, text: str) -> "StudyConfig":
        """Parse the documented JSON schema (see README: study configs)."""
        raw = json.loads(text)
        known = {"n_grid", "tau_grid", "replications", "beta", "rho", "seed", "covariate_law"}
        extra = set(raw) - known
        if extra:
            raise ValueError(f"unknown study config keys: {sorted(extra)}")
        missing = {"n_grid", "tau_grid", "replications", "beta", "rho", "seed"} - set(raw)
        if missing:
            raise ValueError(f"missing study config keys: {sorted(missing)}")
        return cls(
            n_grid=tuple(raw["n_grid"]),
            tau_grid=tuple(raw["tau_grid"]),
            replications=int(raw["replications"]),
            beta=tuple(raw["beta"]),
            rho=tuple(raw["rho"]),
            seed=int(raw["seed"]),
            covariate_law=str(raw.get("covariate_law", "uniform")),
        )


def simulate_dataset(
    n: int, tau: float, delta_star: ParamVector, rng: RngStream
) -> tuple[ModelSpec, np.ndarray]:
    """One synthetic dataset under the study protocol (log links, U(-1,1) covariates).

    Draw order is fixed (X slopes, W slopes, then response uniforms) so a given
    stream always produces the same dataset.
    """
    n = int(n)
    p = delta_star.beta.size
    q = delta_star.rho.size
    if n <= p + q:
        raise ValueError(f"sample size {n} is too small for p+q={p + q}")
    X = np.ones((n, p))
    if p > 1:
        X[:, 1:] = rng.uniform(-1.0, 1.0, size=(n, p - 1))
    W = np.ones((n, q))
    if q > 1:
        W[:, 1:] = rng.uniform(-1.0, 1.0, size=(n, q - 1))
    Q = np.exp(X @ delta_star.beta)
    alpha = np.exp(W @ delta_star.rho)
    theta = 4.0 * Q / _kappa_vec(tau, alpha)
    u = np.clip(rng.uniform(size=n), 2.0**-53, None)
    t = _quantile_vec(u, alpha, theta)
    spec = ModelSpec(
        X=X,
        W=W,
        link_q="log",
        link_alpha="log",
        tau=tau,
        q_names=("intercept",) + tuple(f"x{j}" for j in range(1, p)),
        alpha_names=("intercept",) + tuple(f"w{j}" for j in range(1, q)),
    )
    return spec, t


@dataclass(frozen=True)
class ParamCellStats:
    name: str
    true_value: float
    mean: float
    bias: float
    mse: float
    cp: float


@dataclass(frozen=True)
class ResidualCellStats:
    kind: str
    mean: float
    sd: float
    cs: float
    ck: float
    pooled_mean: float
    pooled_sd: float
    pooled_cs: float
    pooled_ck: float


@dataclass(frozen=True)
class CellReport:
    n: int
    tau: float
    replications: int
    failures: int
    flagged: bool
    q_fraction: float
    params: tuple[ParamCellStats, ...]
    residuals: tuple[ResidualCellStats, ...]


@dataclass(frozen=True)
class StudyReport:
    config: StudyConfig
    cells: tuple[CellReport, ...] = field(default_factory=tuple)


def _replicate(args) -> dict | None:
    """One replication: simulate, fit, summarize. Returns None on failure."""
    n, tau, beta, rho, seed, b = args
    delta_star = ParamVector(beta=np.asarray(beta), rho=np.asarray(rho))
    rng = RngStream(seed, stream_id=b)
    spec, t = simulate_dataset(n, tau, delta_star, rng)
    try:
        result = fit(spec, t)
    except (ValueError, SingularInformationError, np.linalg.LinAlgError):
        return None
    if not result.converged or result.std_errors is None:
        return None
    est = result.delta_hat.concat()
    truth = delta_star.concat()
    cover = np.abs(est - truth) <= _Z975 * result.std_errors

    Q_true = np.exp(spec.X @ delta_star.beta)
    frac = float(np.mean(t <= Q_true))

    moments = {}
    for kind, res in (
        ("gcs", gcs_residuals(result, spec, t)),
        ("rq", rq_residuals(result, spec, t)),
    ):
        mean, sd, cs, ck = residual_moments(res.values)
        v = res.values
        moments[kind] = (
            mean,
            sd,
            cs,
            ck,
            float(np.sum(v)),
            float(np.sum(v**2)),
            float(np.sum(v**3)),
            float(np.sum(v**4)),
            v.size,
        )
    return {"est": est, "cover": cover, "frac": frac, "moments": moments}


def _pooled_from_sums(s1, s2, s3, s4, count) -> tuple[float, float, float, float]:
    mean = s1 / count
    m2 = s2 / count - mean**2
    m3 = s3 / count - 3.0 * mean * s2 / count + 2.0 * mean**3
    m4 = (
        s4 / count
        - 4.0 * mean * s3 / count
        + 6.0 * mean**2 * s2 / count
        - 3.0 * mean**4
    )
    sd = math.sqrt(max(s2 - count * mean**2, 0.0) / (count - 1))
    return mean, sd, m3 / m2**1.5, m4 / (m2 * m2)


def _cell_report(config: StudyConfig, n: int, tau: float, records: list) -> CellReport:
    truth = np.concatenate([config.beta, config.rho])
    names = [f"q:intercept"] + [f"q:x{j}" for j in range(1, len(config.beta))]
    names += [f"alpha:intercept"] + [f"alpha:w{j}" for j in range(1, len(config.rho))]

    ok = [r for r in records if r is not None]
    failures = len(records) - len(ok)
    if not ok:
        raise RuntimeError(f"all {len(records)} replications failed in cell n={n}, tau={tau}")
    est = np.asarray([r["est"] for r in ok])
    cover = np.asarray([r["cover"] for r in ok], dtype=float)

    params = []
    for j, name in enumerate(names):
        mean = float(np.mean(est[:, j]))
        params.append(
            ParamCellStats(
                name=name,
                true_value=float(truth[j]),
                mean=mean,
                bias=mean - float(truth[j]),
                mse=float(np.mean((est[:, j] - truth[j]) ** 2)),
                cp=100.0 * float(np.mean(cover[:, j])),
            )
        )

    residuals = []
    for kind in ("gcs", "rq"):
        rows = np.asarray([r["moments"][kind][:4] for r in ok])
        sums = np.sum(np.asarray([r["moments"][kind][4:8] for r in ok]), axis=0)
        count = int(np.sum([r["moments"][kind][8] for r in ok]))
        pooled = _pooled_from_sums(*sums, count)
        residuals.append(
            ResidualCellStats(
                kind=kind,
                mean=float(np.mean(rows[:, 0])),
                sd=float(np.mean(rows[:, 1])),
                cs=float(np.mean(rows[:, 2])),
                ck=float(np.mean(rows[:, 3])),
                pooled_mean=pooled[0],
                pooled_sd=pooled[1],
                pooled_cs=pooled[2],
                pooled_ck=pooled[3],
            )
        )

    return CellReport(
        n=n,
        tau=tau,
        replications=len(records),
        failures=failures,
        flagged=failures > FAILURE_FLAG_RATE * len(records),
        q_fraction=float(np.mean([r["frac"] for r in ok])),
        params=tuple(params),
        residuals=tuple(residuals),
    )


def run_study(config: StudyConfig, workers: int | None = None) -> StudyReport:
    """Run every (n, tau) cell of the study.

    ``workers`` defaults to the QLBS_WORKERS environment variable (itself
    defaulting to 1). Replication b of any cell uses RngStream(seed, b), and
    results reduce in replication order, so the report does not depend on the
    worker count.
    """
    if workers is None:
        workers = int(os.environ.get("QLBS_WORKERS", "1"))
    if workers < 1:
        raise ValueError("workers must be >= 1")

    cells = []
    for tau in config.tau_grid:
        for n in config.n_grid:
            args = [
                (n, tau, config.beta, config.rho, config.seed, b)
                for b in range(config.replications)
            ]
            if workers == 1:
                records = [_replicate(a) for a in args]
            else:
                chunk = max(1, len(args) // (workers * 4))
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    records = list(pool.map(_replicate, args, chunksize=chunk))
            cells.append(_cell_report(config, n, tau, records))
    return StudyReport(config=config, cells=tuple(cells))


# ---------------------------------------------------------------------------
# report serialization
# ---------------------------------------------------------------------------

def report_params_csv(report: StudyReport) -> str:
    """Machine-readable per-parameter summaries (full float precision)."""
    lines = ["n,tau,parameter,true,mean,bias,mse,cp,failures,flagged"]
    for cell in report.cells:
        for p in cell.params:
            lines.append(
                f"{cell.n},{cell.tau!r},{p.name},{p.true_value!r},{p.mean!r},"
                f"{p.bias!r},{p.mse!r},{p.cp!r},{cell.failures},{int(cell.flagged)}"
            )
    return "\n".join(lines) + "\n"


def report_residuals_csv(report: StudyReport) -> str:
    """Machine-readable residual-moment summaries, both aggregations."""
    lines = ["n,tau,kind,aggregation,mean,sd,cs,ck"]
    for cell in report.cells:
        for r in cell.residuals:
            lines.append(
                f"{cell.n},{cell.tau!r},{r.kind},per_replication,"
                f"{r.mean!r},{r.sd!r},{r.cs!r},{r.ck!r}"
            )
            lines.append(
                f"{cell.n},{cell.tau!r},{r.kind},pooled,"
                f"{r.pooled_mean!r},{r.pooled_sd!r},{r.pooled_cs!r},{r.pooled_ck!r}"
            )
    return "\n".join(lines) + "\n"


def report_text(report: StudyReport) -> str:
    """Human-readable tables, one block per quantile level."""
    out = []
    cfg = report.config
    out.append(
        f"Monte Carlo study: B={cfg.replications}, seed={cfg.seed}, "
        f"beta*={list(cfg.beta)}, rho*={list(cfg.rho)}"
    )
    for tau in cfg.tau_grid:
        out.append("")
        out.append(f"tau = {tau}")
        out.append(f"  {'n':>5}  {'parameter':<18} {'mean':>10} {'bias':>10} {'MSE':>10} {'CP%':>7}")
        for cell in report.cells:
            if cell.tau != tau:
                continue
            for p in cell.params:
                out.append(
                    f"  {cell.n:>5}  {p.name:<18} {p.mean:>10.4f} {p.bias:>10.4f} "
                    f"{p.mse:>10.4f} {p.cp:>7.2f}"
                )
            note = f" [failures={cell.failures}{' FLAGGED' if cell.flagged else ''}]" if cell.failures else ""
            out.append(
                f"  {cell.n:>5}  fraction t <= Q_tau: {cell.q_fraction:.4f}{note}"
            )
        out.append(f"  residual moments (mean over replications of per-replication moments)")
        out.append(f"  {'n':>5}  {'kind':<5} {'mean':>9} {'sd':>9} {'cs':>9} {'ck':>9}")
        for cell in report.cells:
            if cell.tau != tau:
                continue
            for r in cell.residuals:
                out.append(
                    f"  {cell.n:>5}  {r.kind:<5} {r.mean:>9.4f} {r.sd:>9.4f} "
                    f"{r.cs:>9.4f} {r.ck:>9.4f}"
                )
    return "\n".join(out) + "\n"
