"""Residual diagnostics and goodness-of-fit tooling.

Two residual kinds, both driven by the fitted survival probabilities
S_i = 1 - F(t_i; alpha_i_hat, theta_i_hat):

* generalized Cox-Snell, r_i = -log S_i, unit exponential under a correct
  model;
* randomized-quantile style, r_i = Phi^{-1}(S_i), standard normal under a
  correct model. Note the argument is the survival probability (not the CDF),
  which flips the sign relative to the Phi^{-1}(F) convention; the two kinds
  are linked exactly by r_RQ = Phi^{-1}(exp(-r_GCS)).

The simulated envelope refits the model to datasets drawn from the fitted law
itself, so the band reflects both sampling and estimation noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distribution import _cdf_sf, _kappa_vec, _quantile_vec
from .model import FitResult, ModelSpec, _check_response, _predictors, fit
from .numerics import RngStream, norm_quantile

GCS_CAP = -math.log(1e-300)
RQ_SATURATION = 8.2


class EnvelopeError(RuntimeError):
    """Too many envelope replicates failed to refit."""


@dataclass(frozen=True)
class ResidualSet:
    """Residuals of one kind plus the indices of capped/saturated values."""

    kind: str
    values: np.ndarray
    flagged: np.ndarray

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class EnvelopeBand:
    """Pointwise simulated envelope for sorted residuals.

    ``theoretical`` holds reference-distribution quantiles at plotting
    positions (i - 0.5)/n; lower/median/upper are percentiles across the
    replicate order statistics.
    """

    kind: str
    theoretical: np.ndarray
    lower: np.ndarray
    median: np.ndarray
    upper: np.ndarray
    level: float
    replicates: int


def _fitted_survival(result: FitResult, spec: ModelSpec, t: np.ndarray) -> np.ndarray:
    pred = _predictors(spec, result.delta_hat.concat())
    if pred is None:
        raise ValueError("fitted coefficients are inadmissible for this spec")
    Q, alpha = pred
    theta = 4.0 * Q / _kappa_vec(spec.tau, alpha)
    _, S = _cdf_sf(t, alpha, theta)
    return S


def gcs_residuals(result: FitResult, spec: ModelSpec, t) -> ResidualSet:
    """Generalized Cox-Snell residuals -log S_i (unit exponential reference)."""
    t = _check_response(spec, t)
    S = _fitted_survival(result, spec, t)
    flagged = np.flatnonzero(S <= 0.0)
    with np.errstate(divide="ignore"):
        r = -np.log(S)
    r = np.minimum(r, GCS_CAP)
    return ResidualSet(kind="gcs", values=r, flagged=flagged)


def rq_residuals(result: FitResult, spec: ModelSpec, t) -> ResidualSet:
    """Quantile residuals Phi^{-1}(S_i) (standard normal reference)."""
    t = _check_response(spec, t)
    S = _fitted_survival(result, spec, t)
    tiny = np.nextafter(0.0, 1.0)
    top = np.nextafter(1.0, 0.0)
    r = norm_quantile(np.clip(S, tiny, top))
    flagged = np.flatnonzero(np.abs(r) > RQ_SATURATION)
    r = np.clip(r, -RQ_SATURATION, RQ_SATURATION)
    return ResidualSet(kind="rq", values=r, flagged=flagged)


def residual_moments(values) -> tuple[float, float, float, float]:
    """(mean, sd, skewness, kurtosis): sd uses n-1; cs = m3/m2^1.5 and
    ck = m4/m2^2 use central moments with divisor n (ck is not excess)."""
    y = np.asarray(values, dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise ValueError("residual_moments needs a 1-D sample of size >= 2")
    mean = float(np.mean(y))
    centered = y - mean
    m2 = float(np.mean(centered**2))
    m3 = float(np.mean(centered**3))
    m4 = float(np.mean(centered**4))
    sd = float(np.std(y, ddof=1))
    cs = m3 / m2**1.5
    ck = m4 / (m2 * m2)
    return mean, sd, cs, ck


def simulated_envelope(
    result: FitResult,
    spec: ModelSpec,
    kind: str = "gcs",
    R: int = 100,
    level: float = 0.05,
    rng: RngStream | None = None,
) -> EnvelopeBand:
    """Pointwise envelope from R refitted simulations of the fitted model.

    Each replicate redraws the response from the fitted per-observation laws
    (same X and W), refits, and contributes its sorted residuals; the band is
    the (level/2, 1 - level/2) percentile range at each order statistic.
    Replicates that fail to refit are dropped; more than 20% failures aborts.
    """
    if kind not in ("gcs", "rq"):
        raise ValueError("kind must be 'gcs' or 'rq'")
    if R < 19:
        raise ValueError("envelope needs R >= 19 replicates")
    if not (0.0 < level < 1.0):
        raise ValueError("level must lie strictly inside (0, 1)")
    if rng is None:
        raise ValueError("simulated_envelope requires an explicit rng")
    pred = _predictors(spec, result.delta_hat.concat())
    if pred is None:
        raise ValueError("fitted coefficients are inadmissible for this spec")
    Q, alpha = pred
    theta = 4.0 * Q / _kappa_vec(spec.tau, alpha)
    n = spec.n_obs

    sorted_rows = []
    failed = 0
    for child in rng.spawn(int(R)):
        u = np.clip(child.uniform(size=n), 2.0**-53, None)
        t_sim = _quantile_vec(u, alpha, theta)
        try:
            refit = fit(spec, t_sim, start=result.delta_hat, compute_se=False)
        except (ValueError, np.linalg.LinAlgError):
            failed += 1
            continue
        if not refit.converged:
            failed += 1
            continue
        res = gcs_residuals(refit, spec, t_sim) if kind == "gcs" else rq_residuals(refit, spec, t_sim)
        sorted_rows.append(np.sort(res.values))
    if failed > 0.2 * R:
        raise EnvelopeError(f"{failed} of {R} envelope replicates failed to refit")

    mat = np.asarray(sorted_rows)
    lower = np.quantile(mat, level / 2.0, axis=0)
    median = np.quantile(mat, 0.5, axis=0)
    upper = np.quantile(mat, 1.0 - level / 2.0, axis=0)
    pp = (np.arange(1, n + 1) - 0.5) / n
    theoretical = -np.log1p(-pp) if kind == "gcs" else norm_quantile(pp)
    return EnvelopeBand(
        kind=kind,
        theoretical=theoretical,
        lower=lower,
        median=median,
        upper=upper,
        level=level,
        replicates=mat.shape[0],
    )


@dataclass(frozen=True)
class DescriptiveStats:
    minimum: float
    q25: float
    median: float
    q75: float
    maximum: float
    mean: float
    sd: float
    cv_percent: float
    cs: float
    n: int


def descriptive_stats(values) -> DescriptiveStats:
    """Summary statistics: quartiles by linear interpolation (numpy default,
    the common 'type 7' convention), sd with n-1, CV = 100 sd/mean."""
    y = np.asarray(values, dtype=float)
    if y.ndim != 1 or y.size < 1:
        raise ValueError("descriptive_stats needs a non-empty 1-D sample")
    q25, med, q75 = np.quantile(y, [0.25, 0.5, 0.75])
    mean = float(np.mean(y))
    sd = float(np.std(y, ddof=1)) if y.size > 1 else 0.0
    centered = y - mean
    m2 = float(np.mean(centered**2))
    m3 = float(np.mean(centered**3))
    cs = m3 / m2**1.5 if m2 > 0.0 else 0.0
    return DescriptiveStats(
        minimum=float(np.min(y)),
        q25=float(q25),
        median=float(med),
        q75=float(q75),
        maximum=float(np.max(y)),
        mean=mean,
        sd=sd,
        cv_percent=100.0 * sd / mean if mean != 0.0 else math.inf,
        cs=cs,
        n=y.size,
    )


# ---------------------------------------------------------------------------
# serialization: CSV and a minimal SVG scatter for quick inspection
# ---------------------------------------------------------------------------

def envelope_csv(band: EnvelopeBand, observed) -> str:
    """CSV text (index, theoretical, observed, lower, median, upper)."""
    obs = np.sort(np.asarray(observed, dtype=float))
    if obs.size != band.theoretical.size:
        raise ValueError("observed residuals do not match the envelope length")
    lines = ["index,theoretical,observed,lower,median,upper"]
    for i in range(obs.size):
        lines.append(
            f"{i + 1},{float(band.theoretical[i])!r},{float(obs[i])!r},"
            f"{float(band.lower[i])!r},{float(band.median[i])!r},{float(band.upper[i])!r}"
        )
    return "\n".join(lines) + "\n"


def residuals_csv(gcs: ResidualSet, rq: ResidualSet) -> str:
    """CSV text with both residual kinds, one row per observation."""
    if len(gcs) != len(rq):
        raise ValueError("residual sets have different lengths")
    lines = ["index,gcs,rq"]
    for i in range(len(gcs)):
        lines.append(f"{i + 1},{float(gcs.values[i])!r},{float(rq.values[i])!r}")
    return "\n".join(lines) + "\n"


def _svg_scale(values, lo_px: float, hi_px: float):
    vmin = float(np.min(values))
    vmax = float(np.max(values))
    span = vmax - vmin or 1.0
    return lambda v: lo_px + (np.asarray(v, dtype=float) - vmin) / span * (hi_px - lo_px)


def envelope_svg(band: EnvelopeBand, observed) -> str:
    """Minimal SVG scatter of sorted residuals with the envelope band."""
    obs = np.sort(np.asarray(observed, dtype=float))
    width, height, pad = 640, 480, 50
    all_y = np.concatenate([obs, band.lower, band.upper, band.median])
    sx = _svg_scale(band.theoretical, pad, width - pad)
    sy_raw = _svg_scale(all_y, pad, height - pad)
    sy = lambda v: height - sy_raw(v)  # noqa: E731 - flip so larger is higher

    def _poly(ys):
        pts = " ".join(f"{float(sx(x)):.2f},{float(sy(y)):.2f}" for x, y in zip(band.theoretical, ys))
        return pts

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<polyline points="{_poly(band.lower)}" fill="none" stroke="#888" stroke-width="1"/>',
        f'<polyline points="{_poly(band.upper)}" fill="none" stroke="#888" stroke-width="1"/>',
        f'<polyline points="{_poly(band.median)}" fill="none" stroke="#444" '
        f'stroke-width="1" stroke-dasharray="4 3"/>',
    ]
    for x, y in zip(band.theoretical, obs):
        parts.append(f'<circle cx="{float(sx(x)):.2f}" cy="{float(sy(y)):.2f}" r="2.4" fill="#1f4e8c"/>')
    label = "unit exponential" if band.kind == "gcs" else "standard normal"
    parts.append(
        f'<text x="{width / 2:.0f}" y="{height - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{label} quantiles '
        f'({band.kind}, {band.replicates} replicates, {100 * (1 - band.level):.0f}% band)</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
