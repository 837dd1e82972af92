import numpy as np
import numpy.polynomial.legendre as npleg
import pytest

from fraccolloc import (
    CollocationScheme,
    PointFamily,
    build_matrices,
    check_laxmilgram_loworder,
    eval_poly,
    eval_poly_deriv,
    make_points,
)

ALL_FAMILIES = [
    PointFamily.EQUIDISTANT_INTERIOR,
    PointFamily.EQUIDISTANT_WITH_ZERO,
    PointFamily.GAUSS_LEGENDRE,
    PointFamily.GAUSS_LOBATTO,
]


def family_degrees(family):
    return range(1 if family == PointFamily.GAUSS_LOBATTO else 0, 9)


class TestMakePoints:
    def test_equidistant_interior_m1(self):
        assert np.allclose(
            make_points(PointFamily.EQUIDISTANT_INTERIOR, 1), [1 / 3, 2 / 3]
        )

    def test_right_endpoint(self):
        assert make_points(PointFamily.RIGHT_ENDPOINT, 0) == pytest.approx([1.0])
        with pytest.raises(ValueError):
            make_points(PointFamily.RIGHT_ENDPOINT, 1)

    def test_gauss_legendre_against_root_finder(self):
        # oracle: the numpy Gauss-Legendre nodes, affinely mapped to [0, 1]
        for m in range(0, 9):
            oracle = 0.5 * (npleg.leggauss(m + 1)[0] + 1.0)
            got = make_points(PointFamily.GAUSS_LEGENDRE, m)
            assert np.max(np.abs(got - oracle)) < 1e-14

    def test_gauss_legendre_m1_value(self):
        want = 0.5 - 0.5 / np.sqrt(3.0)
        got = make_points(PointFamily.GAUSS_LEGENDRE, 1)
        assert got[0] == pytest.approx(want, abs=1e-15)
        assert got[1] == pytest.approx(1.0 - want, abs=1e-15)

    def test_gauss_lobatto_endpoints_and_oracle(self):
        # interior Lobatto nodes are the roots of the Legendre derivative
        for m in range(1, 9):
            got = make_points(PointFamily.GAUSS_LOBATTO, m)
            assert got[0] == 0.0 and got[-1] == 1.0
            if m >= 2:
                deriv = npleg.Legendre.basis(m).deriv()
                oracle = 0.5 * (np.sort(deriv.roots()) + 1.0)
                assert np.max(np.abs(got[1:-1] - oracle)) < 1e-13

    def test_gauss_lobatto_m0_rejected(self):
        with pytest.raises(ValueError):
            make_points(PointFamily.GAUSS_LOBATTO, 0)

    @pytest.mark.parametrize("family", ALL_FAMILIES)
    def test_strictly_increasing_inside_unit_interval(self, family):
        for m in family_degrees(family):
            theta = make_points(family, m)
            assert theta[0] >= 0.0 and theta[-1] <= 1.0
            assert np.all(np.diff(theta) > 0.0)

    def test_gauss_legendre_symmetry(self):
        for m in range(0, 9):
            theta = make_points(PointFamily.GAUSS_LEGENDRE, m)
            assert np.max(np.abs(theta + theta[::-1] - 1.0)) < 1e-13

    def test_degree_cap(self):
        with pytest.raises(ValueError):
            make_points(PointFamily.GAUSS_LEGENDRE, 13)


class TestScheme:
    def test_continuity_flag(self):
        lob = CollocationScheme.from_family(PointFamily.GAUSS_LOBATTO, 3)
        assert lob.continuous and lob.reduced
        leg = CollocationScheme.from_family(PointFamily.GAUSS_LEGENDRE, 3)
        assert not leg.continuous and not leg.reduced
        ezero = CollocationScheme.from_family(PointFamily.EQUIDISTANT_WITH_ZERO, 3)
        assert ezero.reduced and not ezero.continuous

    def test_custom_points_ordering_enforced(self):
        with pytest.raises(ValueError):
            CollocationScheme.from_points([0.2, 0.2, 0.8])
        with pytest.raises(ValueError):
            CollocationScheme.from_points([0.5, 0.3])
        scheme = CollocationScheme.from_points([0.25, 0.75])
        assert scheme.family == PointFamily.CUSTOM and scheme.m == 1


class TestBuildMatrices:
    def test_vandermonde_rows_m1(self):
        scheme = CollocationScheme.from_points([1 / 3, 2 / 3])
        mats = build_matrices(scheme, 0.7)
        assert np.allclose(mats.W, [[1, 1 / 3], [1, 2 / 3]])

    def test_m0_right_endpoint_gamma_factor(self):
        import math

        scheme = CollocationScheme.from_family(PointFamily.RIGHT_ENDPOINT, 0)
        mats = build_matrices(scheme, 0.5)
        # oracle: c_0 = 1/Gamma(1.5)
        assert mats.D2[0, 0] == pytest.approx(1.0 / math.gamma(1.5), rel=1e-14)

    def test_reduced_matrices_m2(self):
        scheme = CollocationScheme.from_points([0.0, 0.5, 1.0])
        mats = build_matrices(scheme, 0.5)
        assert mats.reduced
        assert np.allclose(mats.W_hat, [[1.0, 0.5], [1.0, 1.0]])
        assert np.allclose(np.diag(mats.D3_hat), [0.5, 1.0])

    @pytest.mark.parametrize("family", ALL_FAMILIES)
    def test_determinant_is_node_difference_product(self, family):
        for m in family_degrees(family):
            theta = make_points(family, m)
            mats = build_matrices(CollocationScheme.from_family(family, m), 0.5)
            prod = np.prod(
                [theta[i] - theta[j] for i in range(m + 1) for j in range(i)]
            )
            det = np.linalg.det(mats.W)
            assert abs(det - prod) <= 1e-10 * abs(prod)

    def test_classical_limit_coefficients(self):
        for m in range(0, 9):
            mats = build_matrices(
                CollocationScheme.from_family(PointFamily.EQUIDISTANT_INTERIOR, m), 1.0
            )
            cj = np.diag(mats.D2)
            assert np.max(np.abs(cj - 1.0 / (np.arange(m + 1) + 1.0))) < 1e-13

    def test_coefficients_positive_decreasing(self):
        for alpha in (0.2, 0.5, 0.9):
            mats = build_matrices(
                CollocationScheme.from_family(PointFamily.GAUSS_LEGENDRE, 8), alpha
            )
            cj = np.diag(mats.D2)
            assert np.all(cj > 0.0) and np.all(np.diff(cj) < 0.0)

    def test_reduced_factorisation(self):
        for family in (PointFamily.GAUSS_LOBATTO, PointFamily.EQUIDISTANT_WITH_ZERO):
            for m in range(1, 9):
                scheme = CollocationScheme.from_family(family, m)
                mats = build_matrices(scheme, 0.37)
                w_tilde = mats.W[1:, 1:]
                assert np.max(np.abs(w_tilde - mats.D3_hat @ mats.W_hat)) < 1e-14


class TestEvalPoly:
    def test_endpoint_values(self):
        block = np.array([[1.0], [2.0]])
        assert eval_poly(block, 0.0) == pytest.approx([1.0])
        assert eval_poly(block, 1.0) == pytest.approx([3.0])

    def test_quadratic_midpoint(self):
        block = np.array([[0.0], [0.0], [1.0]])
        assert eval_poly(block, 0.5) == pytest.approx([0.25])

    def test_derivative(self, rng):
        block = rng.standard_normal((5, 3))
        sigma = 0.37
        h = 1e-6
        fd = (eval_poly(block, sigma + h) - eval_poly(block, sigma - h)) / (2 * h)
        assert np.max(np.abs(eval_poly_deriv(block, sigma) - fd)) < 1e-8

    def test_outside_interval_rejected(self):
        with pytest.raises(ValueError):
            eval_poly(np.ones((2, 1)), 1.5)


class TestLaxMilgramLowOrder:
    def test_equidistant_m1(self):
        scheme = CollocationScheme.from_points([1 / 3, 2 / 3])
        assert check_laxmilgram_loworder(scheme, 0.5) is True

    def test_tight_ratio_fails(self):
        scheme = CollocationScheme.from_points([0.9, 1.0])
        assert check_laxmilgram_loworder(scheme, 0.5) is False

    def test_m0_always_true(self):
        scheme = CollocationScheme.from_family(PointFamily.RIGHT_ENDPOINT, 0)
        for alpha in (0.1, 0.5, 1.0):
            assert check_laxmilgram_loworder(scheme, alpha) is True

    def test_reduced_m2(self):
        scheme = CollocationScheme.from_points([0.0, 0.3, 0.9])
        assert check_laxmilgram_loworder(scheme, 0.5) is True
        tight = CollocationScheme.from_points([0.0, 0.8, 0.9])
        assert check_laxmilgram_loworder(tight, 0.5) is False

    def test_not_applicable(self):
        scheme = CollocationScheme.from_family(PointFamily.GAUSS_LEGENDRE, 3)
        assert check_laxmilgram_loworder(scheme, 0.5) is None
