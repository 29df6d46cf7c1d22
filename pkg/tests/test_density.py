import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lcproj import density as D
from lcproj.density import PiecewiseLogLinearDensity as PLD

mp.mp.dps = 50

U = D.uniform_density(-1.0, 1.0)
C_TENT = -math.log(2 * (math.e - 1))


def j_reference(a, b, length):
    a, b, length = mp.mpf(a), mp.mpf(b), mp.mpf(length)
    if a == b:
        return length * mp.e ** a
    return length * mp.e ** a * mp.expm1(b - a) / (b - a)


def moments_reference(a, b):
    a, b = mp.mpf(a), mp.mpf(b)
    return [mp.quad(lambda u: u ** k * mp.e ** ((1 - u) * a + u * b), [0, 1]) for k in range(3)]


@st.composite
def concave_densities(draw, max_knots=7):
    m = draw(st.integers(2, max_knots))
    gaps = draw(st.lists(st.floats(0.05, 3.0), min_size=m - 1, max_size=m - 1))
    knots = np.concatenate(([draw(st.floats(-4, 4))], np.cumsum(gaps)))
    knots[1:] += knots[0]
    slopes = sorted(draw(st.lists(st.floats(-6, 6), min_size=m - 1, max_size=m - 1)), reverse=True)
    phi = np.concatenate(([0.0], np.cumsum(np.asarray(slopes) * np.diff(knots))))
    return D.normalize(PLD(knots, phi))


class TestJIntegral:
    def test_examples(self):
        assert D.j_integral(0, 0, 1) == 1.0
        assert D.j_integral(0, 1, 1) == pytest.approx(math.e - 1, rel=1e-15)
        assert abs(D.j_integral(0, 1e-9, 1) / (1 + 5e-10) - 1) <= 1e-15

    @pytest.mark.parametrize("a,b,length", [
        (0, 1e-9, 1), (0, 1e-6, 1), (0, 1.0000001e-6, 1), (-3, -3 + 5e-7, 2.5),
        (10, -20, 0.1), (-700, -699, 1), (0.3, 0.3, 4), (5, 5 - 1e-3, 1), (-1e-8, 1e-8, 7)])
    def test_against_50_digit_reference(self, a, b, length):
        ref = j_reference(a, b, length)
        assert abs(D.j_integral(a, b, length) / float(ref) - 1) <= 1e-12

    @given(st.floats(-50, 50), st.floats(-1e-3, 1e-3), st.floats(0.01, 10))
    def test_relative_error_property(self, a, d, length):
        b = a + d
        ref = float(j_reference(a, b, length))
        assert abs(D.j_integral(a, b, length) / ref - 1) <= 1e-12

    def test_branch_continuity(self):
        s = D.TAYLOR_SWITCH
        for a in (-5.0, 0.0, 3.0):
            below = D.j_integral(a, a + s * (1 - 1e-9), 1)
            above = D.j_integral(a, a + s * (1 + 1e-9), 1)
            assert abs(above / below - 1) <= 1e-12

    @pytest.mark.parametrize("bad", [(np.nan, 0, 1), (0, np.inf, 1), (0, 1, np.inf)])
    def test_rejects_nonfinite(self, bad):
        with pytest.raises(ValueError):
            D.j_integral(*bad)

    def test_vectorized(self):
        out = D.j_integral([0, 0], [0, 1], [1, 1])
        assert out.shape == (2,)


class TestSegmentMoments:
    @pytest.mark.parametrize("a,b", [(0, 0), (0, 1e-9), (0, 0.5), (1, -0.5), (0, -3),
                                     (-2, 4), (3, -40), (0, 1.0), (0, -1.0)])
    def test_against_quadrature(self, a, b):
        ours = D.segment_moments(a, b)
        for got, ref in zip(ours, moments_reference(a, b)):
            assert abs(float(got[0]) / float(ref) - 1) <= 1e-12


class TestEvaluation:
    def test_uniform(self):
        assert D.integral(U) == pytest.approx(1.0, abs=1e-15)
        assert D.eval_density(U, 0.5) == pytest.approx(0.5)
        assert D.eval_density(U, 2.0) == 0.0
        assert D.log_eval(U, 2.0) == -math.inf

    def test_tent(self):
        f = D.normalize(PLD([-1, 0, 1], [0, 1, 0]))
        assert D.integral(f) == pytest.approx(1.0, abs=1e-10)
        assert f.logvals[0] == pytest.approx(C_TENT, abs=1e-12)

    def test_callable_and_json(self):
        f = PLD.from_json(U.to_json())
        assert f.normalized and np.array_equal(f.knots, U.knots)
        assert f(0.0) == pytest.approx(0.5)

    def test_rejects_convex(self):
        with pytest.raises(ValueError):
            PLD([-1, 0, 1], [0, -1, 0])

    def test_rejects_unsorted_knots(self):
        with pytest.raises(ValueError):
            PLD([0, 0, 1], [0, 0, 0])


class TestNormalize:
    def test_examples(self):
        assert np.allclose(D.normalize(U).logvals, U.logvals, atol=1e-15)
        f = D.normalize(PLD([-1, 1], [0, 0]))
        assert np.allclose(f.logvals, [-math.log(2)] * 2, atol=1e-15)

    @given(concave_densities())
    def test_idempotent(self, f):
        g = D.normalize(f)
        assert np.max(np.abs(g.logvals - f.logvals)) <= 1e-12
        assert D.integral(g) == pytest.approx(1.0, abs=1e-10)


class TestMoments:
    def test_uniform(self):
        assert D.mean(U) == pytest.approx(0.0, abs=1e-15)
        assert D.variance(U) == pytest.approx(1 / 3, rel=1e-12)
        V = D.uniform_density(0, 2)
        assert D.mean(V) == pytest.approx(1.0, rel=1e-12)
        assert D.variance(V) == pytest.approx(1 / 3, rel=1e-12)

    def test_truncated_exponential(self):
        f = D.normalize(PLD([0, 40], [0, -40]))
        exact = 1 - 40 * math.exp(-40) / -math.expm1(-40)
        assert D.mean(f) == pytest.approx(exact, abs=1e-12)
        assert abs(D.mean(f) - 1) <= 1e-6

    @given(concave_densities())
    def test_against_quadrature(self, f):
        xs = np.linspace(f.knots[0], f.knots[-1], 200_001)
        px = D.eval_density(f, xs)
        m = np.trapezoid(xs * px, xs) if hasattr(np, "trapezoid") else np.trapz(xs * px, xs)
        assert D.mean(f) == pytest.approx(m, abs=1e-6 * (1 + abs(m)))

    @given(concave_densities())
    def test_variance_nonnegative(self, f):
        assert D.variance(f) >= 0

    @given(concave_densities(), st.floats(-5, 5), st.floats(-0.5, 0.5))
    def test_expectations_agree_with_refinement(self, f, c, s):
        g = D.refine(f, [c, c + 0.37])
        assert D.integral(g) == pytest.approx(D.integral(f), rel=1e-12)
        assert D.abs_moment(f, c) >= abs(D.mean(f) - c) - 1e-12
        assert D.exp_moment(f, s) >= math.exp(s * D.mean(f)) * (1 - 1e-12)

    def test_symmetric_mean(self):
        f = D.normalize(PLD([-2, -0.5, 0.5, 2], [-3, 0, 0, -3]))
        assert abs(D.mean(f)) <= 1e-10


class TestLevels:
    def test_max_log(self):
        assert D.max_log(U) == (pytest.approx(-math.log(2)), (-1.0, 1.0))
        tent = PLD([-1, 0, 1], [0, 1, 0])
        assert D.max_log(tent) == (1.0, (0.0, 0.0))
        mono = PLD([0, 1, 2], [0, 0.5, 0.7])
        assert D.max_log(mono)[1] == (2.0, 2.0)

    def test_superlevel(self):
        assert D.superlevel(U, -math.log(2)) == (-1.0, 1.0)
        assert D.superlevel(U, 0.0) is None
        lo, hi = D.superlevel(PLD([-1, 0, 1], [0, 1, 0]), 0.5)
        assert (lo, hi) == (pytest.approx(-0.5), pytest.approx(0.5))

    @given(concave_densities(), st.floats(0, 1))
    def test_superlevel_is_the_set(self, f, frac):
        lo_v, hi_v = float(f.logvals.min()), float(f.logvals.max())
        t = lo_v + frac * (hi_v - lo_v)
        lo, hi = D.superlevel(f, t)
        xs = np.linspace(f.knots[0], f.knots[-1], 2001)
        inside = D.log_eval(f, xs) >= t + 1e-9
        assert np.all(xs[inside] >= lo - 1e-9) and np.all(xs[inside] <= hi + 1e-9)
        assert D.log_eval(f, lo) >= t - 1e-9 and D.log_eval(f, hi) >= t - 1e-9


class TestAffinity:
    def test_self(self):
        assert D.hellinger_affinity(U, U) == pytest.approx(1.0, abs=1e-15)

    def test_nested_uniforms(self):
        n = 4
        f = D.uniform_density(-1 / n, 1 / n)
        g = D.uniform_density(-1 / n ** 2, 1 / n ** 2)
        assert D.hellinger_affinity(f, g) == pytest.approx(n ** -0.5, abs=1e-12)

    def test_disjoint(self):
        assert D.hellinger_affinity(D.uniform_density(0, 1), D.uniform_density(2, 3)) == 0.0

    @given(concave_densities(), concave_densities())
    def test_symmetric_and_bounded(self, f, g):
        a, b = D.hellinger_affinity(f, g), D.hellinger_affinity(g, f)
        assert abs(a - b) <= 1e-14
        assert 0.0 <= a <= 1.0

    @given(concave_densities(), st.floats(0, 0.45), st.floats(0.55, 1), st.floats(-1, 1))
    def test_kl_dominates_hellinger(self, g, s, t, tilt):
        # f: g restricted to a subinterval and tilted, so supp f lies inside supp g
        lo, hi = g.knots[0], g.knots[-1]
        a, b = lo + s * (hi - lo), lo + t * (hi - lo)
        r = D.refine(g, [a, b])
        keep = (r.knots >= a - 1e-12) & (r.knots <= b + 1e-12)
        f = D.normalize(PLD(r.knots[keep], r.logvals[keep] + tilt * r.knots[keep]))
        kl = D.kl_divergence(f, g)
        assert math.isfinite(kl)
        assert kl >= (2 - 2 * D.hellinger_affinity(f, g)) - 1e-9

    def test_kl_infinite_off_support(self):
        assert D.kl_divergence(D.uniform_density(-2, 2), U) == math.inf
        assert D.kl_divergence(U, D.uniform_density(-2, 2)) == pytest.approx(math.log(2))


class TestAffineImage:
    @given(concave_densities(), st.sampled_from([-2.0, -0.5, 0.5, 3.0]), st.floats(-3, 3))
    def test_moments_transform(self, f, a, b):
        g = D.affine_image(f, a, b)
        assert D.integral(g) == pytest.approx(1.0, abs=1e-10)
        assert D.mean(g) == pytest.approx(a * D.mean(f) + b, abs=1e-9)
        assert D.variance(g) == pytest.approx(a * a * D.variance(f), rel=1e-9, abs=1e-12)
