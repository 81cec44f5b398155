import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from l1rates import piecewise as pw
from l1rates.errors import CapacityError, InvalidInputError


class TestConstruction:
    def test_breakpoints_reduce(self):
        g = pw.PiecewisePoly([(0, 0), (2, 2), (1, 0)], [[1.0], [2.0]])
        assert g.breakpoints == [(0, 0), (1, 1), (1, 0)]

    def test_rejects_non_increasing(self):
        with pytest.raises(InvalidInputError):
            pw.PiecewisePoly([(0, 0), (1, 1), (1, 1), (1, 0)], [[1.0], [1.0], [1.0]])

    def test_must_cover_unit_interval(self):
        with pytest.raises(InvalidInputError):
            pw.PiecewisePoly([(0, 0), (1, 1)], [[1.0]])

    def test_degree_cap(self):
        g = pw.PiecewisePoly([(0, 0), (1, 0)], [[0.0, 0.0, 0.0, 1.0]], max_degree=3)
        with pytest.raises(CapacityError):
            pw.antiderivative(g)

    def test_right_limit_at_breakpoint(self):
        g = pw.haar_element(2)
        assert g(0.5) == -1.0 and g(0.49) == 1.0

    def test_json_roundtrip(self):
        g = pw.haar_synthesis(np.arange(1.0, 9.0))
        assert pw.PiecewisePoly.from_json(g.to_json()).allclose(g, atol=0.0)


class TestHaar:
    @pytest.mark.parametrize("k,lj", [(2, (0, 0)), (3, (1, 0)), (4, (1, 1)), (5, (2, 0)), (8, (2, 3))])
    def test_indexing(self, k, lj):
        assert pw.haar_index(k) == lj

    def test_index_one_is_constant(self):
        with pytest.raises(InvalidInputError):
            pw.haar_index(1)
        assert pw.haar_element(1).allclose(pw.constant(1.0))

    def test_orthonormal(self):
        G = pw.gram_matrix([pw.haar_element(k) for k in range(1, 33)])
        assert np.max(np.abs(G - np.eye(32))) < 1e-14

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=64))
    @settings(max_examples=50)
    def test_synthesis_analysis_roundtrip(self, coeffs):
        c = np.array(coeffs)
        back = pw.haar_analysis(pw.haar_synthesis(c), c.size)
        assert np.allclose(back, c, atol=1e-12)

    def test_synthesis_matches_sum(self, rng):
        c = rng.normal(size=10)
        direct = pw.constant(0.0)
        for k, ck in enumerate(c, 1):
            direct = direct + pw.haar_element(k) * ck
        assert pw.haar_synthesis(c).allclose(direct, atol=1e-13)


class TestCalculus:
    def test_antiderivative_of_constant(self):
        F = pw.antiderivative(pw.constant(3.0))
        assert F(0.0) == 0.0 and F(0.5) == pytest.approx(1.5)

    def test_co_antiderivative(self):
        g = pw.haar_element(2)
        H = pw.co_antiderivative(g)
        # int_s^1 psi_00 = -(s) for s<1/2, s - 1 after
        for s in (0.0, 0.25, 0.75):
            assert H(s) == pytest.approx(-s if s < 0.5 else s - 1.0)

    def test_derivative_inverts_antiderivative(self, rng):
        g = pw.haar_synthesis(rng.normal(size=16))
        assert pw.derivative(pw.antiderivative(g)).allclose(g, atol=1e-12)

    def test_inner_product_of_ramps(self):
        ramp = pw.antiderivative(pw.constant(1.0))
        assert pw.inner_l2(ramp, ramp) == pytest.approx(1.0 / 3.0, abs=1e-15)
        assert ramp.l2 == pytest.approx(3 ** -0.5, abs=1e-15)

    def test_multiply(self):
        ramp = pw.antiderivative(pw.constant(1.0))
        sq = pw.multiply(ramp, ramp)
        assert sq(0.5) == pytest.approx(0.25)

    def test_gram_matches_pairwise(self, rng):
        funcs = [pw.antiderivative(pw.haar_synthesis(rng.normal(size=8))) for _ in range(4)]
        G = pw.gram_matrix(funcs)
        for i in range(4):
            for j in range(4):
                assert G[i, j] == pytest.approx(pw.inner_l2(funcs[i], funcs[j]), abs=1e-13)
