"""Quantile-scale regression for the length-biased Birnbaum-Saunders law.

Two sub-models share the likelihood: g1(Q_tau_i) = x_i' beta for the quantile
scale and g2(alpha_i) = w_i' rho for the shape. Writing theta_i = 4 Q_i /
kappa_tau(alpha_i), A_i = sqrt(t_i/theta_i), B_i = sqrt(theta_i/t_i), and
a_i = (A_i - B_i)/alpha_i, the per-observation log-density is

    -log sqrt(2 pi) - log(alpha_i^3 + 2 alpha_i) - a_i^2 / 2
        + log(A_i + B_i) - log theta_i.

The score has closed-form weights once m_i = d log kappa_tau / d alpha_i is
available (a one-dimensional total derivative, taken numerically because
u_tau(alpha) is only defined implicitly):

    d l / d beta = X' diag(1/g1'(Q)) z,
    z_i = (A_i^2 - B_i^2)/(2 alpha_i^2 Q_i)
          - (A_i - B_i)/(2 Q_i (A_i + B_i)) - 1/Q_i,

    d l / d rho = W' diag(1/g2'(alpha)) c,
    c_i = -(3 alpha_i^2 + 2)/(alpha_i^3 + 2 alpha_i) + (A_i - B_i)^2/alpha_i^3
          - m_i (A_i^2 - B_i^2)/(2 alpha_i^2)
          + m_i (A_i - B_i)/(2 (A_i + B_i)) + m_i.

Standard errors come from the finite-difference Jacobian of this score (the
numeric observed information); an analytic Hessian assembled from the same
weights is kept as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .distribution import _kappa_and_logderiv, _kappa_logderiv_vec, _kappa_vec
from .links import Link, get_link
from .numerics import Interval, RngStream, norm_quantile

ALPHA_FLOOR = 1e-4
_RANK_TOL = 1e-10


class RankDeficiencyError(ValueError):
    """A design matrix is numerically rank deficient."""


class SingularInformationError(RuntimeError):
    """The observed information matrix could not be inverted to a covariance."""


class NotConvergedError(RuntimeError):
    """An operation required a converged fit and did not get one."""


class BootstrapError(RuntimeError):
    """Too many bootstrap replicates failed to converge."""


def _as_design(name: str, M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError(f"{name} must be a 2-D design matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0 or s[-1] <= _RANK_TOL * s[0]:
        raise RankDeficiencyError(
            f"{name} is rank deficient at tolerance {_RANK_TOL} * largest singular value"
        )
    return M


@dataclass(eq=False)
class ModelSpec:
    """Design matrices, links, and quantile level for one model."""

    X: np.ndarray
    W: np.ndarray
    link_q: Link | str = "log"
    link_alpha: Link | str = "log"
    tau: float = 0.5
    q_names: tuple[str, ...] | None = None
    alpha_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        self.X = _as_design("X", self.X)
        self.W = _as_design("W", self.W)
        if self.X.shape[0] != self.W.shape[0]:
            raise ValueError("X and W must have the same number of rows")
        if isinstance(self.link_q, str):
            self.link_q = get_link(self.link_q)
        if isinstance(self.link_alpha, str):
            self.link_alpha = get_link(self.link_alpha)
        if not (math.isfinite(self.tau) and 0.0 < self.tau < 1.0):
            raise ValueError(f"tau must lie strictly inside (0, 1), got {self.tau!r}")
        n, p = self.X.shape
        q = self.W.shape[1]
        if n <= p + q:
            raise ValueError(f"need n > p + q, got n={n}, p={p}, q={q}")
        if self.q_names is None:
            self.q_names = tuple(f"q[{j}]" for j in range(p))
        if self.alpha_names is None:
            self.alpha_names = tuple(f"alpha[{j}]" for j in range(q))
        if len(self.q_names) != p or len(self.alpha_names) != q:
            raise ValueError("coefficient name lengths must match design columns")

    @property
    def n_obs(self) -> int:
        return self.X.shape[0]

    @property
    def n_params(self) -> int:
        return self.X.shape[1] + self.W.shape[1]

    def param_names(self) -> list[str]:
        return [f"q:{s}" for s in self.q_names] + [f"alpha:{s}" for s in self.alpha_names]


@dataclass(frozen=True)
class ParamVector:
    """Coefficient pair (beta for the quantile scale, rho for the shape)."""

    beta: np.ndarray
    rho: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=float)))
        object.__setattr__(self, "rho", np.atleast_1d(np.asarray(self.rho, dtype=float)))
        if not (np.all(np.isfinite(self.beta)) and np.all(np.isfinite(self.rho))):
            raise ValueError("coefficients must be finite")

    def concat(self) -> np.ndarray:
        return np.concatenate([self.beta, self.rho])

    @classmethod
    def from_flat(cls, delta: np.ndarray, p: int) -> "ParamVector":
        delta = np.asarray(delta, dtype=float)
        return cls(beta=delta[:p], rho=delta[p:])


@dataclass
class FitResult:
    """Maximum-likelihood fit summary."""

    delta_hat: ParamVector
    std_errors: np.ndarray | None
    covariance: np.ndarray | None
    loglik: float
    aic: float
    bic: float
    iterations: int
    converged: bool
    gradient_norm: float
    message: str
    n_obs: int
    param_names: list[str] = field(default_factory=list)


def _check_response(spec: ModelSpec, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or t.shape[0] != spec.n_obs:
        raise ValueError("t must be a 1-D response aligned with the design rows")
    if np.any(~np.isfinite(t)) or np.any(t <= 0.0):
        raise ValueError("t must be finite and strictly positive")
    return t


def _predictors(spec: ModelSpec, delta: np.ndarray):
    """(Q, alpha) from a flat parameter vector, or None when inadmissible.

    Besides positivity, each linear predictor must sit on the link's own
    branch (fwd(inv(eta)) == eta): the sqrt link would otherwise silently
    fold negative eta onto positive parameters, flipping the score's sign.
    """
    p = spec.X.shape[1]
    eta_q = spec.X @ delta[:p]
    eta_a = spec.W @ delta[p:]
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        Q = spec.link_q.inv(eta_q)
        alpha = spec.link_alpha.inv(eta_a)
        ok = (
            np.all(np.isfinite(Q)) and np.all(Q > 0.0)
            and np.all(np.isfinite(alpha)) and np.all(alpha > 0.0)
            and np.allclose(spec.link_q.fwd(Q), eta_q, rtol=1e-6, atol=1e-12)
            and np.allclose(spec.link_alpha.fwd(alpha), eta_a, rtol=1e-6, atol=1e-12)
        )
    return (Q, alpha) if ok else None


def _loglik_flat(spec: ModelSpec, logt: np.ndarray, delta: np.ndarray) -> float:
    pred = _predictors(spec, delta)
    if pred is None:
        return -np.inf
    Q, alpha = pred
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        kap = _kappa_vec(spec.tau, alpha)
        log_theta = np.log(4.0 * Q) - np.log(kap)
        d = logt - log_theta
        a = 2.0 * np.sinh(0.5 * d) / alpha
        log_apb = 0.5 * np.abs(d) + np.log1p(np.exp(-np.abs(d)))
        terms = (
            -0.5 * math.log(2.0 * math.pi)
            - np.log(alpha**3 + 2.0 * alpha)
            - 0.5 * a * a
            + log_apb
            - log_theta
        )
    total = float(np.sum(terms))
    return total if math.isfinite(total) else -np.inf


def _score_flat(
    spec: ModelSpec, logt: np.ndarray, delta: np.ndarray, total_kappa_deriv: bool = True
) -> np.ndarray:
    pred = _predictors(spec, delta)
    if pred is None:
        return np.full(spec.n_params, np.nan)
    Q, alpha = pred
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        kap, m = _kappa_and_logderiv(spec.tau, alpha, total=total_kappa_deriv)
        log_theta = np.log(4.0 * Q) - np.log(kap)
        d = logt - log_theta
        A = np.exp(0.5 * d)
        B = np.exp(-0.5 * d)
        z = (A * A - B * B) / (2.0 * alpha * alpha * Q) - (A - B) / (
            2.0 * Q * (A + B)
        ) - 1.0 / Q
        c = (
            -(3.0 * alpha * alpha + 2.0) / (alpha**3 + 2.0 * alpha)
            + (A - B) ** 2 / alpha**3
            - m * (A * A - B * B) / (2.0 * alpha * alpha)
            + m * (A - B) / (2.0 * (A + B))
            + m
        )
        a_link = 1.0 / spec.link_q.deriv(Q)
        b_link = 1.0 / spec.link_alpha.deriv(alpha)
        grad = np.concatenate([spec.X.T @ (z * a_link), spec.W.T @ (c * b_link)])
    return grad


def loglik(delta: ParamVector, spec: ModelSpec, t) -> float:
    """Log-likelihood at delta. Non-finite (-inf) signals an inadmissible point."""
    t = _check_response(spec, t)
    return _loglik_flat(spec, np.log(t), delta.concat())


def score(delta: ParamVector, spec: ModelSpec, t, total_kappa_deriv: bool = True) -> np.ndarray:
    """Analytic gradient of the log-likelihood at delta (order: beta, rho)."""
    t = _check_response(spec, t)
    return _score_flat(spec, np.log(t), delta.concat(), total_kappa_deriv)


def _hessian_numeric_flat(
    spec: ModelSpec, logt: np.ndarray, delta: np.ndarray, h: float = 1e-5
) -> np.ndarray:
    k = delta.size
    H = np.empty((k, k))
    for j in range(k):
        step = h * max(1.0, abs(delta[j]))
        up = delta.copy()
        dn = delta.copy()
        up[j] += step
        dn[j] -= step
        H[:, j] = (_score_flat(spec, logt, up) - _score_flat(spec, logt, dn)) / (2.0 * step)
    return H


def hessian_numeric(delta: ParamVector, spec: ModelSpec, t, h: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of the analytic score (observed second derivatives)."""
    t = _check_response(spec, t)
    return _hessian_numeric_flat(spec, np.log(t), delta.concat(), h=h)


def _c_weights(spec: ModelSpec, logt: np.ndarray, Q: np.ndarray, alpha) -> np.ndarray:
    """Shape-block score weights c_i at the given alpha vector (Q, t held fixed)."""
    alpha = np.asarray(alpha, dtype=float)
    kap = _kappa_vec(spec.tau, alpha)
    log_theta = np.log(4.0 * Q) - np.log(kap)
    d = logt - log_theta
    A = np.exp(0.5 * d)
    B = np.exp(-0.5 * d)
    m = _kappa_logderiv_vec(spec.tau, alpha)
    return (
        -(3.0 * alpha * alpha + 2.0) / (alpha**3 + 2.0 * alpha)
        + (A - B) ** 2 / alpha**3
        - m * (A * A - B * B) / (2.0 * alpha * alpha)
        + m * (A - B) / (2.0 * (A + B))
        + m
    )


def hessian_analytic(delta: ParamVector, spec: ModelSpec, t) -> np.ndarray:
    """Closed-form Hessian blocks (shape-block second derivative by differencing c_i).

    Kept as a cross-check against hessian_numeric; the numeric variant is the
    covariance source in fit().
    """
    t = _check_response(spec, t)
    logt = np.log(t)
    flat = delta.concat()
    pred = _predictors(spec, flat)
    if pred is None:
        raise ValueError("hessian_analytic requires an admissible parameter point")
    Q, alpha = pred
    kap = _kappa_vec(spec.tau, alpha)
    log_theta = np.log(4.0 * Q) - np.log(kap)
    d = logt - log_theta
    A = np.exp(0.5 * d)
    B = np.exp(-0.5 * d)
    m = _kappa_logderiv_vec(spec.tau, alpha)

    z = (A * A - B * B) / (2.0 * alpha * alpha * Q) - (A - B) / (2.0 * Q * (A + B)) - 1.0 / Q
    # d z / d Q; the trailing +1 differentiates the -1/Q term of z.
    z_prime = (
        -(A * A) / (alpha * alpha)
        + 1.0 / (A + B) ** 2
        + (A - B) / (2.0 * (A + B))
        + 1.0
    ) / (Q * Q)
    k_mix = (
        m * (A * A + B * B) / (2.0 * alpha * alpha)
        - (A * A - B * B) / alpha**3
        - m / (A + B) ** 2
    ) / Q
    c = _c_weights(spec, logt, Q, alpha)
    h_c = 1e-5 * np.maximum(1.0, alpha)
    c_prime = (
        _c_weights(spec, logt, Q, alpha + h_c) - _c_weights(spec, logt, Q, alpha - h_c)
    ) / (2.0 * h_c)

    g1 = spec.link_q
    g2 = spec.link_alpha
    a_link = 1.0 / g1.deriv(Q)
    d_link = -g1.deriv2(Q) / g1.deriv(Q) ** 2
    b_link = 1.0 / g2.deriv(alpha)
    e_link = -g2.deriv2(alpha) / g2.deriv(alpha) ** 2

    v = z_prime * a_link**2 + z * d_link * a_link
    h_cross = k_mix * b_link * a_link
    u_diag = c_prime * b_link**2 + c * e_link * b_link

    X, W = spec.X, spec.W
    H11 = X.T @ (v[:, None] * X)
    H12 = X.T @ (h_cross[:, None] * W)
    H22 = W.T @ (u_diag[:, None] * W)
    top = np.hstack([H11, H12])
    bottom = np.hstack([H12.T, H22])
    return np.vstack([top, bottom])


def initial_values(spec: ModelSpec, t) -> ParamVector:
    """Least-squares starting values.

    beta0 regresses g1(t) on X; the implied fitted scale theta_i0 then yields
    moment-style shape guesses alpha_i0 = sqrt(t_i/theta_i0 + theta_i0/t_i - 2),
    floored at 1e-4, which are regressed through g2 on W for rho0.
    """
    t = _check_response(spec, t)
    beta0, *_ = np.linalg.lstsq(spec.X, spec.link_q.fwd(t), rcond=None)
    with np.errstate(over="ignore", invalid="ignore"):
        theta0 = spec.link_q.inv(spec.X @ beta0)
    # Identity/sqrt links can produce non-positive fitted scales; keep the
    # shape guess well defined without disturbing admissible cases.
    theta0 = np.where(np.isfinite(theta0) & (theta0 > 0.0), theta0, np.median(t))
    ratio = np.maximum(t / theta0 + theta0 / t - 2.0, 0.0)
    alpha0 = np.maximum(np.sqrt(ratio), ALPHA_FLOOR)
    rho0, *_ = np.linalg.lstsq(spec.W, spec.link_alpha.fwd(alpha0), rcond=None)
    return ParamVector(beta=beta0, rho=rho0)


def _covariance_from_hessian(H: np.ndarray):
    info = -0.5 * (H + H.T)
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise SingularInformationError(str(exc)) from None
    diag = np.diag(cov)
    if np.any(~np.isfinite(cov)) or np.any(diag <= 0.0):
        raise SingularInformationError("observed information is not positive definite")
    return cov, np.sqrt(diag)


def fit(
    spec: ModelSpec,
    t,
    start: ParamVector | None = None,
    gtol: float = 1e-6,
    ftol: float = 1e-10,
    max_iter: int = 500,
    compute_se: bool = True,
) -> FitResult:
    """Maximize the log-likelihood by BFGS with backtracking.

    Inadmissible trial points (non-finite log-likelihood) are handled by step
    halving; a line-search failure triggers one gradient-free simplex restart
    before giving up. After convergence the estimate is polished with a few
    Newton steps off the numeric Hessian, which also supplies the covariance.
    Non-convergence is reported through the result flags, not raised.
    """
    t = _check_response(spec, t)
    logt = np.log(t)
    p = spec.X.shape[1]
    k = spec.n_params

    x = (start if start is not None else initial_values(spec, t)).concat()
    if x.size != k:
        raise ValueError("start has the wrong number of coefficients")
    f = -_loglik_flat(spec, logt, x)
    if not math.isfinite(f):
        return FitResult(
            delta_hat=ParamVector.from_flat(x, p),
            std_errors=None,
            covariance=None,
            loglik=-np.inf,
            aic=np.nan,
            bic=np.nan,
            iterations=0,
            converged=False,
            gradient_norm=np.nan,
            message="initial values are inadmissible for these links",
            n_obs=spec.n_obs,
            param_names=spec.param_names(),
        )
    g = -_score_flat(spec, logt, x)

    Hinv = np.eye(k)
    first_update = True
    restarted = False
    converged = False
    message = "maximum iterations reached"
    iterations = 0

    for iterations in range(1, max_iter + 1):
        if np.max(np.abs(g)) <= gtol:
            converged = True
            message = "gradient norm below tolerance"
            break
        direction = -Hinv @ g
        slope = float(direction @ g)
        if not math.isfinite(slope) or slope >= 0.0:
            Hinv = np.eye(k)
            first_update = True
            direction = -g
            slope = float(direction @ g)

        step = 1.0
        x_new = f_new = None
        for _ in range(60):
            cand = x + step * direction
            f_cand = -_loglik_flat(spec, logt, cand)
            if math.isfinite(f_cand) and f_cand <= f + 1e-4 * step * slope:
                x_new, f_new = cand, f_cand
                break
            step *= 0.5
        if x_new is None:
            if restarted:
                message = "line search failed after simplex restart"
                break
            restarted = True
            res = optimize.minimize(
                lambda v: -_loglik_flat(spec, logt, v),
                x,
                method="Nelder-Mead",
                options={"maxiter": 200 * k, "fatol": 1e-12, "xatol": 1e-10},
            )
            if math.isfinite(res.fun) and res.fun < f:
                x, f = res.x, float(res.fun)
                g = -_score_flat(spec, logt, x)
            Hinv = np.eye(k)
            first_update = True
            continue

        g_new = -_score_flat(spec, logt, x_new)
        if np.any(~np.isfinite(g_new)):
            message = "non-finite gradient at an accepted point"
            break
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            if first_update:
                Hinv = np.eye(k) * (sy / float(y @ y))
                first_update = False
            rho_sy = 1.0 / sy
            V = np.eye(k) - rho_sy * np.outer(s, y)
            Hinv = V @ Hinv @ V.T + rho_sy * np.outer(s, s)
        f_drop = f - f_new
        x, f, g = x_new, f_new, g_new
        if f_drop <= ftol * (1.0 + abs(f)):
            converged = True
            message = "log-likelihood change below tolerance"
            break

    # Newton polish off the numeric Hessian: tightens the gradient by several
    # orders so refits of permuted data land on identical estimates, and the
    # Hessian is needed for the covariance anyway.
    H = None
    if converged:
        for _ in range(3):
            if np.max(np.abs(g)) <= 1e-9:
                break
            H = _hessian_numeric_flat(spec, logt, x)
            try:
                newton = np.linalg.solve(-0.5 * (H + H.T), -g)
            except np.linalg.LinAlgError:
                break
            improved = False
            scale = 1.0
            for _ in range(8):
                cand = x + scale * newton
                f_cand = -_loglik_flat(spec, logt, cand)
                if math.isfinite(f_cand) and f_cand <= f + 1e-12 * (1.0 + abs(f)):
                    g_cand = -_score_flat(spec, logt, cand)
                    if np.all(np.isfinite(g_cand)) and np.max(np.abs(g_cand)) < np.max(np.abs(g)):
                        x, f, g = cand, f_cand, g_cand
                        improved = True
                    break
                scale *= 0.5
            H = None  # stale after a move
            if not improved:
                break

    ll = -f
    delta_hat = ParamVector.from_flat(x, p)
    aic = -2.0 * ll + 2.0 * k
    bic = -2.0 * ll + k * math.log(spec.n_obs)
    grad_norm = float(np.max(np.abs(g)))

    std_errors = covariance = None
    if converged and compute_se:
        if H is None:
            H = _hessian_numeric_flat(spec, logt, x)
        covariance, std_errors = _covariance_from_hessian(H)

    return FitResult(
        delta_hat=delta_hat,
        std_errors=std_errors,
        covariance=covariance,
        loglik=ll,
        aic=aic,
        bic=bic,
        iterations=iterations,
        converged=converged,
        gradient_norm=grad_norm,
        message=message,
        n_obs=spec.n_obs,
        param_names=spec.param_names(),
    )


def conf_intervals(result: FitResult, gamma: float = 0.05) -> list[Interval]:
    """Asymptotic (1 - gamma) confidence intervals delta_j +/- z_{1-gamma/2} SE_j."""
    if not (math.isfinite(gamma) and 0.0 < gamma < 1.0):
        raise ValueError(f"gamma must lie strictly inside (0, 1), got {gamma!r}")
    if not result.converged or result.std_errors is None:
        raise NotConvergedError("confidence intervals require a converged fit with standard errors")
    z = norm_quantile(1.0 - gamma / 2.0)
    flat = result.delta_hat.concat()
    return [Interval(est - z * se, est + z * se) for est, se in zip(flat, result.std_errors)]


@dataclass(frozen=True)
class BootstrapResult:
    """Percentile case-resampling intervals plus replicate accounting."""

    intervals: list[Interval]
    attempted: int
    failed: int


def bootstrap_ci(
    spec: ModelSpec, t, B: int = 500, gamma: float = 0.05, rng: RngStream | None = None
) -> BootstrapResult:
    """Percentile bootstrap over case resamples (rows of X, W, t resampled jointly).

    Replicates whose refit fails or does not converge are dropped and counted;
    more than 20% failures aborts with diagnostics.
    """
    if B < 100:
        raise ValueError("bootstrap needs B >= 100 replicates")
    if not (math.isfinite(gamma) and 0.0 < gamma < 1.0):
        raise ValueError(f"gamma must lie strictly inside (0, 1), got {gamma!r}")
    if rng is None:
        raise ValueError("bootstrap_ci requires an explicit rng")
    t = _check_response(spec, t)
    base = fit(spec, t)
    if not base.converged:
        raise NotConvergedError("bootstrap requires a converged fit on the original data")
    n = spec.n_obs
    estimates = []
    failed = 0
    for _ in range(int(B)):
        idx = np.asarray(rng.integers(0, n, size=n))
        try:
            spec_b = ModelSpec(
                X=spec.X[idx],
                W=spec.W[idx],
                link_q=spec.link_q,
                link_alpha=spec.link_alpha,
                tau=spec.tau,
                q_names=spec.q_names,
                alpha_names=spec.alpha_names,
            )
            res = fit(spec_b, t[idx], start=base.delta_hat, compute_se=False)
        except (ValueError, SingularInformationError, np.linalg.LinAlgError):
            failed += 1
            continue
        if res.converged:
            estimates.append(res.delta_hat.concat())
        else:
            failed += 1
    if failed > 0.2 * B:
        raise BootstrapError(f"{failed} of {B} bootstrap refits failed to converge")
    est = np.asarray(estimates)
    lo = np.quantile(est, gamma / 2.0, axis=0)
    hi = np.quantile(est, 1.0 - gamma / 2.0, axis=0)
    return BootstrapResult(
        intervals=[Interval(float(a), float(b)) for a, b in zip(lo, hi)],
        attempted=int(B),
        failed=failed,
    )
