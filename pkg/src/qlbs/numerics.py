"""Low-level numerical kernels shared across the package.

Standard-normal functions are thin wrappers over scipy.special's erf-based
routines (absolute error well under 1e-15). Root finding, quadrature, and
finite differences are implemented here directly so their failure modes
(bracket violations, subdivision limits, non-finite evaluations) are explicit
and testable rather than buried in library defaults.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special


class BracketError(ValueError):
    """The supplied interval does not bracket a sign change."""


class ConvergenceError(RuntimeError):
    """An iterative routine hit its iteration or subdivision budget."""


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] with finite endpoints, lo <= hi.

    Degenerate intervals (lo == hi) are allowed; they arise naturally from
    percentile intervals over identical replicates. Routines that need a
    genuine bracket (find_root) check strictness themselves.
    """

    lo: float
    hi: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("interval endpoints must be finite")
        if self.lo > self.hi:
            raise ValueError(f"interval endpoints out of order: ({self.lo}, {self.hi})")

    @property
    def width(self) -> float:
        return self.hi - self.lo


_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def norm_pdf(z):
    """Standard normal density, elementwise."""
    z = np.asarray(z, dtype=float)
    out = np.exp(-0.5 * z * z - _LOG_SQRT_2PI)
    return out if out.ndim else float(out)


def norm_cdf(z):
    """Standard normal CDF, elementwise (erf-based, |abs err| <= 1e-15)."""
    z = np.asarray(z, dtype=float)
    out = special.ndtr(z)
    return out if np.ndim(out) else float(out)


def norm_logcdf(z):
    """log of the standard normal CDF, elementwise; accurate deep in the tail."""
    z = np.asarray(z, dtype=float)
    out = special.log_ndtr(z)
    return out if np.ndim(out) else float(out)


def norm_quantile(p):
    """Standard normal quantile. Domain error outside (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise ValueError("norm_quantile requires probabilities strictly inside (0, 1)")
    out = special.ndtri(arr)
    return out if arr.ndim else float(out)


def find_root(f, bracket: Interval, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Locate a root of ``f`` inside ``bracket``.

    Regula falsi with Illinois damping (the stale endpoint's weight is halved
    whenever the same side is retained twice running, which prevents the
    classic one-sided stagnation), safeguarded by bisection; every iterate
    stays inside the current sign-change bracket. Terminates when
    |f(x)| <= tol or the bracket width falls below tol.

    Raises BracketError when f(lo) and f(hi) have the same sign, and
    ConvergenceError when max_iter is exhausted.
    """
    lo, hi = float(bracket.lo), float(bracket.hi)
    if not lo < hi:
        raise BracketError("find_root requires a strict bracket (lo < hi)")
    flo = float(f(lo))
    if flo == 0.0:
        return lo
    fhi = float(f(hi))
    if fhi == 0.0:
        return hi
    if not (np.isfinite(flo) and np.isfinite(fhi)):
        raise ValueError("find_root: non-finite function value at a bracket endpoint")
    if np.sign(flo) == np.sign(fhi):
        raise BracketError(f"no sign change on [{lo}, {hi}]")

    x, fx = (lo, flo) if abs(flo) <= abs(fhi) else (hi, fhi)
    side = 0
    for _ in range(max_iter):
        # Interpolation step off the current bracket endpoints, safeguarded
        # by falling back to the midpoint whenever it leaves the bracket.
        denom = fhi - flo
        if denom != 0.0:
            cand = hi - fhi * (hi - lo) / denom
        else:
            cand = 0.5 * (lo + hi)
        if not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        fcand = float(f(cand))
        if not np.isfinite(fcand):
            raise ValueError("find_root: non-finite function value inside bracket")
        x, fx = cand, fcand
        if abs(fx) <= tol:
            return x
        if np.sign(fcand) == np.sign(flo):
            lo, flo = cand, fcand
            if side == -1:
                fhi *= 0.5  # sign-preserving: only the secant slope changes
            side = -1
        else:
            hi, fhi = cand, fcand
            if side == 1:
                flo *= 0.5
            side = 1
        if hi - lo <= tol:
            return x
    raise ConvergenceError(f"find_root: no convergence in {max_iter} iterations")


def integrate(f, lo: float, hi: float, tol: float = 1e-10, max_depth: int = 48) -> float:
    """Adaptive Simpson quadrature of ``f`` over [lo, hi], absolute error <= tol.

    Exact (single panel) on polynomials up to degree three. Reversed limits
    negate the result. Infinite-support integrands are the caller's problem:
    truncate to a finite window first. Raises ConvergenceError when the
    subdivision depth limit is hit.
    """
    lo = float(lo)
    hi = float(hi)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("integrate requires finite limits")
    if lo == hi:
        return 0.0
    if lo > hi:
        return -integrate(f, hi, lo, tol=tol, max_depth=max_depth)

    def _simpson(a, fa, m, fm, b, fb):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def _eval(x):
        v = float(f(x))
        if not math.isfinite(v):
            raise ValueError(f"integrate: non-finite integrand at x={x}")
        return v

    a, b = lo, hi
    fa, fb = _eval(a), _eval(b)
    m = 0.5 * (a + b)
    fm = _eval(m)
    whole = _simpson(a, fa, m, fm, b, fb)
    # Explicit stack of (a, fa, m, fm, b, fb, S, tol, depth).
    stack = [(a, fa, m, fm, b, fb, whole, tol, 0)]
    total = 0.0
    while stack:
        a, fa, m, fm, b, fb, S, seg_tol, depth = stack.pop()
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm = _eval(lm)
        frm = _eval(rm)
        Sl = _simpson(a, fa, lm, flm, m, fm)
        Sr = _simpson(m, fm, rm, frm, b, fb)
        err = Sl + Sr - S
        if abs(err) <= 15.0 * seg_tol:
            total += Sl + Sr + err / 15.0
            continue
        if depth >= max_depth:
            raise ConvergenceError(
                f"integrate: subdivision depth {max_depth} exceeded near x={m}"
            )
        half = 0.5 * seg_tol
        stack.append((a, fa, lm, flm, m, fm, Sl, half, depth + 1))
        stack.append((m, fm, rm, frm, b, fb, Sr, half, depth + 1))
    return total


def fd_gradient(f, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x``.

    Coordinate j uses step h * max(1, |x_j|). Raises on non-finite values.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("fd_gradient expects a 1-D point")
    grad = np.empty_like(x)
    for j in range(x.size):
        step = h * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += step
        xm[j] -= step
        fp = float(f(xp))
        fm = float(f(xm))
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise ValueError(f"fd_gradient: non-finite evaluation at coordinate {j}")
        grad[j] = (fp - fm) / (2.0 * step)
    return grad


class RngStream:
    """Deterministic random source keyed by (seed, stream_id).

    Backed by numpy's counter-based Philox generator with the key set directly
    to (seed, stream_id): equal keys reproduce identical sequences, distinct
    keys give statistically independent streams, and replication r of a study
    can simply use stream_id = r.
    """

    def __init__(self, seed: int, stream_id: int = 0) -> None:
        seed = int(seed)
        stream_id = int(stream_id)
        if not (0 <= seed < 2**64 and 0 <= stream_id < 2**64):
            raise ValueError("seed and stream_id must fit in an unsigned 64-bit word")
        self.seed = seed
        self.stream_id = stream_id
        key = np.array([seed, stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low: int, high: int | None = None, size=None):
        return self._gen.integers(low, high, size)

    def spawn(self, n: int) -> list["RngStream"]:
        """Derive n child streams by drawing fresh Philox keys from this one."""
        keys = self._gen.integers(0, 2**64, size=(int(n), 2), dtype=np.uint64)
        return [RngStream(int(k0), int(k1)) for k0, k1 in keys]
