"""Unit tests for the numerical kernels.

Normal-function reference values are cross-checked against scipy.stats.norm,
which goes through a different code path (distribution machinery) than the
scipy.special primitives wrapped by the package.
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from qlbs.numerics import (
    BracketError,
    ConvergenceError,
    Interval,
    RngStream,
    fd_gradient,
    find_root,
    integrate,
    norm_cdf,
    norm_logcdf,
    norm_pdf,
    norm_quantile,
)

# frozen reference values
PHI_AT_2 = 0.05399096651318806          # standard normal density at 2
Z_975 = 1.959963984540054               # 97.5% normal quantile
CBRT_2 = 1.2599210498948732             # 2**(1/3)


class TestInterval:
    def test_width_and_coercion(self):
        iv = Interval(np.float64(1.0), np.float64(3.5))
        assert isinstance(iv.lo, float) and isinstance(iv.hi, float)
        assert iv.width == 2.5

    def test_degenerate_allowed(self):
        assert Interval(2.0, 2.0).width == 0.0

    def test_out_of_order_rejected(self):
        with pytest.raises(ValueError):
            Interval(1.0, 0.0)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            Interval(0.0, math.inf)
        with pytest.raises(ValueError):
            Interval(math.nan, 1.0)


class TestNormalFunctions:
    def test_pdf_values(self):
        assert norm_pdf(0.0) == pytest.approx(1.0 / math.sqrt(2.0 * math.pi), rel=1e-15)
        assert norm_pdf(2.0) == pytest.approx(PHI_AT_2, rel=1e-14)
        assert norm_pdf(-2.0) == norm_pdf(2.0)

    def test_cdf_against_scipy(self):
        z = np.linspace(-6.0, 6.0, 41)
        assert_allclose(norm_cdf(z), stats.norm.cdf(z), rtol=0.0, atol=1e-15)
        assert norm_cdf(0.0) == 0.5

    def test_logcdf_deep_tail(self):
        # asymptotic: log Phi(-x) ~ -x^2/2 - log(x sqrt(2 pi)) for large x
        x = 40.0
        approx = -0.5 * x * x - math.log(x * math.sqrt(2.0 * math.pi))
        assert norm_logcdf(-x) == pytest.approx(approx, abs=1e-3)
        assert norm_logcdf(-x) == pytest.approx(stats.norm.logcdf(-x), rel=1e-14)

    def test_quantile_round_trip(self):
        assert norm_quantile(0.975) == pytest.approx(Z_975, rel=1e-14)
        p = np.array([1e-10, 0.01, 0.3, 0.5, 0.7, 0.99, 1.0 - 1e-10])
        assert_allclose(norm_cdf(norm_quantile(p)), p, rtol=1e-12)

    def test_quantile_domain(self):
        for bad in (0.0, 1.0, -0.1, 1.1, math.nan):
            with pytest.raises(ValueError):
                norm_quantile(bad)

    def test_scalar_in_scalar_out(self):
        assert isinstance(norm_pdf(1.0), float)
        assert isinstance(norm_cdf(1.0), float)
        assert isinstance(norm_quantile(0.5), float)
        assert isinstance(norm_pdf(np.array([1.0, 2.0])), np.ndarray)


class TestFindRoot:
    def test_cube_root(self):
        root = find_root(lambda x: x**3 - 2.0, Interval(0.0, 4.0))
        assert root == pytest.approx(CBRT_2, rel=1e-12)

    def test_endpoint_root_returned_directly(self):
        assert find_root(lambda x: x, Interval(0.0, 1.0)) == 0.0

    def test_stays_inside_bracket(self):
        seen = []

        def f(x):
            seen.append(x)
            return math.tan(x) - 1.0  # poles outside the bracket

        root = find_root(f, Interval(0.0, 1.5))
        assert root == pytest.approx(math.pi / 4.0, rel=1e-10)
        assert all(0.0 <= x <= 1.5 for x in seen)

    def test_no_sign_change(self):
        with pytest.raises(BracketError):
            find_root(lambda x: x * x + 1.0, Interval(-1.0, 1.0))

    def test_degenerate_bracket(self):
        with pytest.raises(BracketError):
            find_root(lambda x: x, Interval(1.0, 1.0))

    def test_iteration_budget(self):
        with pytest.raises(ConvergenceError):
            find_root(lambda x: x**3 - 2.0, Interval(0.0, 4.0), tol=1e-15, max_iter=2)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            find_root(lambda x: math.nan, Interval(0.0, 1.0))


class TestIntegrate:
    def test_cubic_is_exact(self):
        # Simpson's rule integrates cubics exactly; no refinement error at all
        assert integrate(lambda x: x**3, 0.0, 1.0) == pytest.approx(0.25, abs=1e-15)

    def test_sine(self):
        assert integrate(math.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-12)

    def test_exponential(self):
        assert integrate(math.exp, 0.0, 1.0) == pytest.approx(math.e - 1.0, rel=1e-12)

    def test_normal_density_mass(self):
        val = integrate(lambda x: float(norm_pdf(x)), -8.0, 8.0, tol=1e-12)
        assert val == pytest.approx(1.0, abs=1e-10)

    def test_reversed_limits(self):
        assert integrate(math.sin, math.pi, 0.0) == pytest.approx(-2.0, abs=1e-12)
        assert integrate(math.sin, 1.0, 1.0) == 0.0

    def test_non_finite_integrand(self):
        with pytest.raises(ValueError):
            integrate(lambda x: math.inf if x == 0.0 else 1.0 / x, -1.0, 1.0)

    def test_depth_budget(self):
        # near-singular integrand: the error estimate stays above tol at depth 3
        with pytest.raises(ConvergenceError):
            integrate(lambda x: 1.0 / math.sqrt(x + 1e-12), 0.0, 1.0,
                      tol=1e-14, max_depth=3)


class TestFdGradient:
    def test_quadratic(self):
        A = np.array([[2.0, 0.5], [0.5, 1.0]])

        def f(x):
            return 0.5 * float(x @ A @ x)

        x0 = np.array([0.3, -1.1])
        assert_allclose(fd_gradient(f, x0), A @ x0, rtol=1e-8, atol=1e-9)

    def test_step_scales_with_coordinate(self):
        # step grows with |x_j|, so a fixed relative accuracy holds across scales
        x0 = np.array([100.0, 1.0])
        g = fd_gradient(lambda x: float(np.sum(x * x)), x0)
        assert_allclose(g, 2.0 * x0, rtol=1e-6)


class TestRngStream:
    def test_matches_direct_philox_construction(self):
        # the stream is exactly numpy's Philox keyed by (seed, stream_id)
        ours = RngStream(123, 7).uniform(size=5)
        key = np.array([123, 7], dtype=np.uint64)
        ref = np.random.Generator(np.random.Philox(key=key)).uniform(size=5)
        assert_allclose(ours, ref, rtol=0.0, atol=0.0)

    def test_reproducible(self):
        a = RngStream(9, 1).uniform(size=10_000)
        b = RngStream(9, 1).uniform(size=10_000)
        assert np.array_equal(a, b)
        assert abs(a.mean() - 0.5) < 0.02
        assert abs(a.var() - 1.0 / 12.0) < 0.01

    def test_streams_differ(self):
        a = RngStream(9, 1).uniform(size=100)
        b = RngStream(9, 2).uniform(size=100)
        c = RngStream(10, 1).uniform(size=100)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_spawn_deterministic(self):
        kids1 = RngStream(5).spawn(3)
        kids2 = RngStream(5).spawn(3)
        for k1, k2 in zip(kids1, kids2):
            assert (k1.seed, k1.stream_id) == (k2.seed, k2.stream_id)
            assert np.array_equal(k1.uniform(size=4), k2.uniform(size=4))
        seen = {(k.seed, k.stream_id) for k in kids1}
        assert len(seen) == 3

    def test_integers_bounds(self):
        draws = RngStream(0).integers(0, 10, size=1000)
        assert draws.min() >= 0 and draws.max() <= 9

    def test_seed_validation(self):
        with pytest.raises(ValueError):
            RngStream(-1)
        with pytest.raises(ValueError):
            RngStream(2**64)
        with pytest.raises(ValueError):
            RngStream(0, 2**64)
