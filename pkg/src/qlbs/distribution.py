"""Length-biased Birnbaum-Saunders distribution and its quantile parameterization.

The length-biased Birnbaum-Saunders (LBS) law is the size-biased version of a
Birnbaum-Saunders baseline Y with shape alpha and scale theta:

    f_T(t) = t f_Y(t) / E(Y),   E(Y) = theta (alpha^2 + 2) / 2,

which works out to the closed form

    f_T(t) = phi(a_t) [sqrt(t/theta) + sqrt(theta/t)] / (theta (alpha^3 + 2 alpha)),
    a_t    = (sqrt(t/theta) - sqrt(theta/t)) / alpha.

Two structural facts drive everything here. First, U = (T/theta + theta/T - 2)
/ alpha^2 follows a two-component gamma mixture, pi * Gamma(1/2, 2) +
(1 - pi) * Gamma(3/2, 2) with pi = 2 / (alpha^2 + 2), whose component CDFs have
normal closed forms (chi-square with 1 and 3 degrees of freedom). Second,
inverting the positive root of that transformation at the mixture quantile
u_tau gives the reparameterization

    Q_tau = (theta / 4) kappa_tau(alpha),
    kappa_tau(alpha) = (alpha sqrt(u_tau) + sqrt(alpha^2 u_tau + 4))^2,

so (alpha, Q_tau) can replace (alpha, theta) as the parameter pair. Q_tau is a
scale parameter carrying quantile-like units; it is NOT the tau-quantile of T
(only the positive root is kept), and `quantile_gap` reports the difference
lbs_cdf(Q_tau) - tau rather than anyone asserting it is zero.

All kernels broadcast over numpy arrays and are overflow-safe: ratios t/theta
live in log space (a_t = 2 sinh(d/2)/alpha with d = log(t/theta), a single
rounding, so joint scaling of t and theta by a power of two is exact) and the
CDF's exp(2/alpha^2) factor is paired with a log-scale normal tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .numerics import Interval, RngStream, find_root, norm_pdf, norm_quantile

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _validate_positive(name: str, value: float) -> None:
    if not (math.isfinite(value) and value > 0.0):
        raise ValueError(f"{name} must be finite and positive, got {value!r}")


@dataclass(frozen=True)
class LbsParams:
    """Shape/scale pair (alpha, theta) of the length-biased law."""

    alpha: float
    theta: float

    def __post_init__(self) -> None:
        _validate_positive("alpha", self.alpha)
        _validate_positive("theta", self.theta)


@dataclass(frozen=True)
class QlbsParams:
    """Quantile parameterization (alpha, Q_tau) at level tau."""

    alpha: float
    q_tau: float
    tau: float

    def __post_init__(self) -> None:
        _validate_positive("alpha", self.alpha)
        _validate_positive("q_tau", self.q_tau)
        if not (math.isfinite(self.tau) and 0.0 < self.tau < 1.0):
            raise ValueError(f"tau must lie strictly inside (0, 1), got {self.tau!r}")


@dataclass(frozen=True)
class UMixture:
    """Gamma mixture followed by U = (T/theta + theta/T - 2)/alpha^2."""

    pi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.pi) and 0.0 < self.pi < 1.0):
            raise ValueError(f"mixing weight must lie inside (0, 1), got {self.pi!r}")

    @classmethod
    def from_alpha(cls, alpha: float) -> "UMixture":
        _validate_positive("alpha", alpha)
        return cls(pi=2.0 / (alpha * alpha + 2.0))


# ---------------------------------------------------------------------------
# gamma mixture: closed-form CDF/density and quantiles
# ---------------------------------------------------------------------------

def _umix_cdf(u, alpha):
    """Mixture CDF, broadcasting; closed normal forms for both components.

    Gamma(1/2, 2) is chi-square(1): F1(u) = 2 Phi(sqrt(u)) - 1.
    Gamma(3/2, 2) is chi-square(3): F3(u) = F1(u) - 2 sqrt(u) phi(sqrt(u)).
    """
    u = np.asarray(u, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    s = np.sqrt(u)
    f1 = 2.0 * special.ndtr(s) - 1.0
    pi = 2.0 / (alpha * alpha + 2.0)
    return f1 - (1.0 - pi) * 2.0 * s * norm_pdf(s)


def _umix_pdf(u, alpha):
    """Mixture density pi*f1 + (1-pi)*f3 = phi(sqrt(u)) (pi/sqrt(u) + (1-pi) sqrt(u))."""
    u = np.asarray(u, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    s = np.sqrt(u)
    pi = 2.0 / (alpha * alpha + 2.0)
    with np.errstate(divide="ignore"):
        return norm_pdf(s) * (pi / s + (1.0 - pi) * s)


def u_mixture_cdf(u, alpha: float):
    """CDF of the gamma mixture for shape alpha, elementwise in u (u >= 0)."""
    _validate_positive("alpha", alpha)
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0.0) or np.any(~np.isfinite(arr)):
        raise ValueError("u must be finite and non-negative")
    out = _umix_cdf(arr, alpha)
    return out if arr.ndim else float(out)


def u_mixture_pdf(u, alpha: float):
    """Density of the gamma mixture (diverges like u**-1/2 at the origin)."""
    _validate_positive("alpha", alpha)
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0.0) or np.any(~np.isfinite(arr)):
        raise ValueError("u must be finite and non-negative")
    out = _umix_pdf(arr, alpha)
    return out if arr.ndim else float(out)


@lru_cache(maxsize=256)
def _chi2_3_quantile(tau: float) -> float:
    """tau-quantile of chi-square(3) from its closed-form CDF."""
    f1_root = norm_quantile(0.5 * (1.0 + tau)) ** 2  # chi-square(1) quantile
    def f(u):
        s = math.sqrt(u)
        return 2.0 * float(special.ndtr(s)) - 1.0 - 2.0 * s * float(norm_pdf(s)) - tau
    hi = max(4.0, f1_root + 4.0)
    while f(hi) < 0.0:
        hi *= 2.0
    return find_root(f, Interval(f1_root, hi), tol=1e-14)


def _u_quantile_vec(tau: float, alpha) -> np.ndarray:
    """Vectorized mixture quantile: solves F_U(u; alpha) = tau per element.

    The root is bracketed by the chi-square(1) and chi-square(3) quantiles
    (the mixture CDF is sandwiched between the component CDFs); a safeguarded
    Newton iteration then converges to near machine precision. Converged
    elements are frozen and dropped from the working set, so stragglers do
    not force full-vector re-evaluation.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    p1 = norm_quantile(0.5 * (1.0 + tau)) ** 2
    p3 = _chi2_3_quantile(tau)
    pi = 2.0 / (alpha * alpha + 2.0)
    u = np.clip(pi * p1 + (1.0 - pi) * p3, p1, p3)
    lo = np.full(alpha.shape, p1)
    hi = np.full(alpha.shape, p3 + 1e-12)
    idx = np.arange(alpha.size)
    ua, aa, la, ha = u.copy(), alpha.copy(), lo, hi
    log_norm = -0.5 * math.log(2.0 * math.pi)
    for _ in range(100):
        # inline mixture CDF/density; u >= p1 > 0 so all terms are safe
        s = np.sqrt(ua)
        phi = np.exp(-0.5 * ua + log_norm)
        pia = 2.0 / (aa * aa + 2.0)
        f = 2.0 * special.ndtr(s) - 1.0 - (1.0 - pia) * 2.0 * s * phi - tau
        done = np.abs(f) <= 1e-14
        if done.any():
            u[idx[done]] = ua[done]
            keep = ~done
            if not keep.any():
                break
            idx, ua, aa = idx[keep], ua[keep], aa[keep]
            la, ha, f = la[keep], ha[keep], f[keep]
            s, phi, pia = s[keep], phi[keep], pia[keep]
        la = np.where(f < 0.0, ua, la)
        ha = np.where(f > 0.0, ua, ha)
        dens = phi * (pia / s + (1.0 - pia) * s)
        cand = ua - f / dens
        bad = ~np.isfinite(cand) | (cand <= la) | (cand >= ha)
        ua = np.where(bad, 0.5 * (la + ha), cand)
    else:
        u[idx] = ua
    return u


def u_quantile(tau: float, alpha: float) -> float:
    """Quantile of the gamma mixture at level tau for shape alpha."""
    if not (math.isfinite(tau) and 0.0 < tau < 1.0):
        raise ValueError(f"tau must lie strictly inside (0, 1), got {tau!r}")
    _validate_positive("alpha", alpha)
    return float(_u_quantile_vec(tau, alpha)[0])


# ---------------------------------------------------------------------------
# kappa and the quantile reparameterization
# ---------------------------------------------------------------------------

def _kappa_from_u(alpha, u):
    alpha = np.asarray(alpha, dtype=float)
    u = np.asarray(u, dtype=float)
    root = alpha * np.sqrt(u) + np.sqrt(alpha * alpha * u + 4.0)
    return root * root


def _kappa_vec(tau: float, alpha) -> np.ndarray:
    return _kappa_from_u(alpha, _u_quantile_vec(tau, alpha))


def kappa(tau: float, alpha: float) -> float:
    """Scale factor kappa_tau(alpha) = (alpha sqrt(u_tau) + sqrt(alpha^2 u_tau + 4))^2."""
    if not (math.isfinite(tau) and 0.0 < tau < 1.0):
        raise ValueError(f"tau must lie strictly inside (0, 1), got {tau!r}")
    _validate_positive("alpha", alpha)
    return float(_kappa_vec(tau, np.asarray([alpha]))[0])


def _kappa_logderiv_vec(tau: float, alpha, h: float | None = None, total: bool = True) -> np.ndarray:
    """d log kappa_tau / d alpha by central differences, elementwise.

    total=True recomputes u_tau at alpha +/- h (the exact derivative of the
    composed map); total=False freezes u_tau at alpha, keeping only the partial
    dependence through the kappa expression. Step: h = 1e-5 * max(1, alpha).
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    step = np.full(alpha.shape, h) if h is not None else 1e-5 * np.maximum(1.0, alpha)
    up = alpha + step
    dn = alpha - step
    if total:
        k_up = _kappa_vec(tau, up)
        k_dn = _kappa_vec(tau, dn)
    else:
        u = _u_quantile_vec(tau, alpha)
        k_up = _kappa_from_u(up, u)
        k_dn = _kappa_from_u(dn, u)
    return (np.log(k_up) - np.log(k_dn)) / (2.0 * step)


def _kappa_and_logderiv(tau: float, alpha, total: bool = True):
    """(kappa, d log kappa / d alpha) in a single stacked quantile solve.

    Gives exactly the same floats as _kappa_vec plus _kappa_logderiv_vec at
    the default step; fitting code calls this to avoid three separate solves.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    n = alpha.size
    step = 1e-5 * np.maximum(1.0, alpha)
    up = alpha + step
    dn = alpha - step
    if total:
        u = _u_quantile_vec(tau, np.concatenate([alpha, up, dn]))
        kap = _kappa_from_u(alpha, u[:n])
        k_up = _kappa_from_u(up, u[n:2 * n])
        k_dn = _kappa_from_u(dn, u[2 * n:])
    else:
        u = _u_quantile_vec(tau, alpha)
        kap = _kappa_from_u(alpha, u)
        k_up = _kappa_from_u(up, u)
        k_dn = _kappa_from_u(dn, u)
    m = (np.log(k_up) - np.log(k_dn)) / (2.0 * step)
    return kap, m


def kappa_logderiv(tau: float, alpha: float, h: float | None = None, total: bool = True) -> float:
    """Logarithmic derivative of kappa_tau at alpha (see _kappa_logderiv_vec)."""
    if not (math.isfinite(tau) and 0.0 < tau < 1.0):
        raise ValueError(f"tau must lie strictly inside (0, 1), got {tau!r}")
    _validate_positive("alpha", alpha)
    if h is not None:
        _validate_positive("h", h)
        if h >= alpha:
            raise ValueError("step h must be smaller than alpha")
    return float(_kappa_logderiv_vec(tau, np.asarray([alpha]), h=h, total=total)[0])


def theta_from_q(q: QlbsParams) -> LbsParams:
    """Map (alpha, Q_tau, tau) back to the native scale: theta = 4 Q_tau / kappa."""
    return LbsParams(alpha=q.alpha, theta=4.0 * q.q_tau / kappa(q.tau, q.alpha))


def q_from_theta(p: LbsParams, tau: float) -> QlbsParams:
    """Map (alpha, theta) to the quantile parameterization at level tau."""
    return QlbsParams(alpha=p.alpha, q_tau=p.theta * kappa(tau, p.alpha) / 4.0, tau=tau)


# ---------------------------------------------------------------------------
# density, CDF, survival (broadcasting kernels + validated public wrappers)
# ---------------------------------------------------------------------------

def _check_t(t) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError("t must be finite and strictly positive")
    return arr


def _logpdf_unit(d, alpha):
    """Log-density kernel in d = log(t/theta); the 1/theta factor is separate."""
    a = 2.0 * np.sinh(0.5 * d) / alpha
    # log(A + B) = log(2 cosh(d/2)), computed overflow-free.
    log_apb = 0.5 * np.abs(d) + np.log1p(np.exp(-np.abs(d)))
    return -_LOG_SQRT_2PI - 0.5 * a * a - np.log(alpha**3 + 2.0 * alpha) + log_apb


def _logpdf(t, alpha, theta):
    t = np.asarray(t, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    theta = np.asarray(theta, dtype=float)
    return _logpdf_unit(np.log(t / theta), alpha) - np.log(theta)


def _pdf(t, alpha, theta):
    # dividing outside the exponential keeps joint power-of-two scaling exact
    t = np.asarray(t, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    theta = np.asarray(theta, dtype=float)
    return np.exp(_logpdf_unit(np.log(t / theta), alpha)) / theta


def _cdf_sf(t, alpha, theta):
    """Stable (CDF, survival) pair sharing one tail kernel.

    F = Phi(a) - w [G + phi(a)(a + x)],  S = Phi(-a) + w [G + phi(a)(a + x)],
    w = alpha^2/(2 + alpha^2), x = sqrt(4 + alpha^2 a^2)/alpha, and
    G = exp(2/alpha^2) Phi(-x) evaluated in log space. Every bracketed term is
    non-negative, so S carries no cancellation in the right tail.
    """
    t = np.asarray(t, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    theta = np.asarray(theta, dtype=float)
    d = np.log(t / theta)
    a = 2.0 * np.sinh(0.5 * d) / alpha
    x = np.sqrt(4.0 + alpha * alpha * a * a) / alpha
    w = alpha * alpha / (2.0 + alpha * alpha)
    G = np.exp(2.0 / (alpha * alpha) + special.log_ndtr(-x))
    core = G + norm_pdf(a) * (a + x)
    F = special.ndtr(a) - w * core
    S = special.ndtr(-a) + w * core
    return np.clip(F, 0.0, 1.0), np.clip(S, 0.0, 1.0)


def lbs_pdf(t, p: LbsParams):
    """Density of the length-biased law, elementwise in t (t > 0)."""
    arr = _check_t(t)
    out = _pdf(arr, p.alpha, p.theta)
    return out if arr.ndim else float(out)


def lbs_cdf(t, p: LbsParams):
    """CDF of the length-biased law, elementwise in t (t > 0)."""
    arr = _check_t(t)
    out, _ = _cdf_sf(arr, p.alpha, p.theta)
    return out if arr.ndim else float(out)


def lbs_sf(t, p: LbsParams):
    """Survival function 1 - CDF, computed directly (right-tail accurate)."""
    arr = _check_t(t)
    _, out = _cdf_sf(arr, p.alpha, p.theta)
    return out if arr.ndim else float(out)


def lbs_moments(p: LbsParams) -> tuple[float, float]:
    """(mean, variance) in closed form.

    mean = theta (2 + 4 a^2 + 3 a^4) / (2 + a^2)
    var  = theta^2 a^2 (4 + 17 a^2 + 24 a^4 + 6 a^6) / (2 + a^2)^2
    """
    a2 = p.alpha * p.alpha
    mean = p.theta * (2.0 + 4.0 * a2 + 3.0 * a2 * a2) / (2.0 + a2)
    var = (
        p.theta * p.theta * a2
        * (4.0 + 17.0 * a2 + 24.0 * a2 * a2 + 6.0 * a2 * a2 * a2)
        / (2.0 + a2) ** 2
    )
    return mean, var


def _quantile_vec(prob, alpha, theta) -> np.ndarray:
    """Vectorized quantile: solves F(t) = prob in log-t with bracket safeguards."""
    prob = np.atleast_1d(np.asarray(prob, dtype=float))
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), prob.shape).copy()
    theta = np.broadcast_to(np.asarray(theta, dtype=float), prob.shape).copy()

    log10 = math.log(10.0)
    lo = np.log(theta) - log10
    hi = np.log(theta) + log10
    # Expand each side geometrically (x10 in t) until it brackets.
    for _ in range(80):
        f_lo, _ = _cdf_sf(np.exp(lo), alpha, theta)
        need = f_lo >= prob
        if not np.any(need):
            break
        lo = np.where(need, lo - log10, lo)
    for _ in range(80):
        f_hi, _ = _cdf_sf(np.exp(hi), alpha, theta)
        need = f_hi <= prob
        if not np.any(need):
            break
        hi = np.where(need, hi + log10, hi)

    s = 0.5 * (lo + hi)
    for _ in range(200):
        t = np.exp(s)
        F, _ = _cdf_sf(t, alpha, theta)
        f = F - prob
        if np.all(np.abs(f) <= 1e-12):
            break
        below = f < 0.0
        lo = np.where(below, s, lo)
        hi = np.where(~below, s, hi)
        deriv = t * _pdf(t, alpha, theta)  # dF/d log t
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = s - f / deriv
        bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
        s = np.where(bad, 0.5 * (lo + hi), cand)
    return np.exp(s)


def lbs_quantile(prob: float, p: LbsParams) -> float:
    """Quantile of the length-biased law (numeric CDF inversion)."""
    if not (math.isfinite(prob) and 0.0 < prob < 1.0):
        raise ValueError(f"prob must lie strictly inside (0, 1), got {prob!r}")
    return float(_quantile_vec(prob, p.alpha, p.theta)[0])


def lbs_sample(n: int, p: LbsParams, rng: RngStream) -> np.ndarray:
    """n independent draws by inverse-CDF applied to uniforms from ``rng``."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    u = np.clip(rng.uniform(size=int(n)), 2.0**-53, None)
    return _quantile_vec(u, p.alpha, p.theta)


# ---------------------------------------------------------------------------
# quantile-parameterized forms (exact composition with theta_from_q)
# ---------------------------------------------------------------------------

def qlbs_pdf(t, q: QlbsParams):
    """Density under the (alpha, Q_tau) parameterization."""
    return lbs_pdf(t, theta_from_q(q))


def qlbs_cdf(t, q: QlbsParams):
    """CDF under the (alpha, Q_tau) parameterization."""
    return lbs_cdf(t, theta_from_q(q))


def qlbs_moments(q: QlbsParams) -> tuple[float, float]:
    """(mean, variance) under the (alpha, Q_tau) parameterization."""
    return lbs_moments(theta_from_q(q))


def quantile_gap(tau: float, alpha: float) -> float:
    """Diagnostic: lbs_cdf(Q_tau) - tau at unit scale.

    Positive in general: the reparameterization keeps only the positive root
    of the U transformation, so Q_tau sits above the distributional
    tau-quantile by the mass of the negative branch. Scale-free in theta.
    """
    q = QlbsParams(alpha=alpha, q_tau=kappa(tau, alpha) / 4.0, tau=tau)
    return float(qlbs_cdf(q.q_tau, q)) - tau
