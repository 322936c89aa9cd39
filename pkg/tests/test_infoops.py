import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bpnm.chebbasis import BasisSet, SeriesState
from bpnm.infoops import (
    Functional,
    InequalityConstraint,
    InformationOperator,
    ThresholdGradientError,
    check_inequalities,
    eval_functional,
    jacobian_row,
    painleve_operator,
    poisson_design,
    poisson_operator,
    residual,
    residual_norm_and_grad,
)
from bpnm.infoops import painleve_negative_slope

LINE = BasisSet.line(9, 0.0, 10.0)
coef = arrays(np.float64, 10, elements=st.floats(-2, 2))


def _state(u, basis=LINE, offset=0.0):
    return SeriesState(basis, u, offset)


class TestFunctional:
    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            Functional("integral", 0.5)

    def test_bad_kappa_and_sign(self):
        with pytest.raises(ValueError):
            Functional.pde_interior((0.5, 0.5), kappa=0.0)
        with pytest.raises(ValueError):
            Functional.neumann((0.0, 0.5), axis=0, sign=2.0)

    def test_point_outside_domain(self):
        with pytest.raises(ValueError):
            eval_functional(Functional.point_eval(11.0), _state(np.zeros(10)))

    def test_painleve_needs_1d(self):
        with pytest.raises(ValueError):
            Functional.painleve((0.5, 0.5)).rows(BasisSet.triangle(2))

    @given(coef, st.floats(0, 10))
    @settings(max_examples=30)
    def test_painleve_residual(self, u, t):
        x = _state(u, offset=0.3)
        expected = x([t], 2)[0] - x([t])[0] ** 2
        assert eval_functional(Functional.painleve(t), x) == pytest.approx(expected, abs=1e-9)

    @given(coef, st.floats(0.5, 9.5))
    @settings(max_examples=30)
    def test_jacobian_row_by_finite_difference(self, u, t):
        f = Functional.painleve(t)
        x = _state(u)
        h = 1e-6
        fd = [(eval_functional(f, _state(u + h * e)) - eval_functional(f, _state(u - h * e))) / (2 * h)
              for e in np.eye(10)]
        np.testing.assert_allclose(jacobian_row(f, x), fd, rtol=1e-5, atol=1e-4)

    def test_linear_kinds(self):
        assert Functional.point_eval(1.0).is_linear
        assert not Functional.painleve(1.0).is_linear

    def test_pde_and_neumann_on_known_function(self):
        # x(t) = t1^2 + t2 has laplacian 2 and d/dt1 = 2 t1
        b = BasisSet.triangle(2)
        pts = np.array([[0.2, 0.3], [0.7, 0.1], [0.5, 0.9], [0.1, 0.6], [0.8, 0.8], [0.4, 0.2]])
        target = pts[:, 0] ** 2 + pts[:, 1]
        u = np.linalg.solve(b.design(pts), target)
        x = SeriesState(b, u)
        assert eval_functional(Functional.pde_interior((0.4, 0.4), kappa=3.0), x) == pytest.approx(-6.0)
        assert eval_functional(Functional.neumann((1.0, 0.5), axis=0, sign=-1), x) == pytest.approx(-2.0)

    @pytest.mark.parametrize("f", [Functional.point_eval(0.3), Functional.deriv_eval((0.1, 0.2), (1, 1)),
                                   Functional.pde_interior((0.5, 0.5), 2.0), Functional.neumann((0, 0.3), 1, -1)])
    def test_dict_round_trip(self, f):
        assert Functional.from_dict(f.to_dict()) == f

    def test_derivative_terms(self):
        assert Functional.pde_interior((0.5, 0.5), 2.0).derivative_terms(2) == [(-2.0, (2, 0)), (-2.0, (0, 2))]
        with pytest.raises(ValueError):
            Functional.painleve(0.0).derivative_terms(1)


class TestInformationOperator:
    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            InformationOperator((Functional.point_eval(0.0),), [0.0, 1.0])

    def test_fingerprint_changes_with_data(self):
        A = painleve_operator(5)
        assert A.fingerprint() == painleve_operator(5).fingerprint()
        assert A.fingerprint() != A.with_observed(A.observed + 1).fingerprint()

    @given(arrays(np.float64, (3, 10), elements=st.floats(-2, 2)))
    @settings(max_examples=25)
    def test_compiled_matches_scalar_path(self, U):
        A = painleve_operator(6)
        comp = A.compile(LINE, 0.5)
        vals = comp.values(U)
        for u, v in zip(U, vals):
            x = _state(u, offset=0.5)
            np.testing.assert_allclose(v, [eval_functional(f, x) for f in A.functionals], atol=1e-9)
            np.testing.assert_allclose(comp.jacobian(u), [jacobian_row(f, x) for f in A.functionals], atol=1e-9)

    @given(coef, arrays(np.float64, 8, elements=st.floats(-3, 3)))
    @settings(max_examples=25)
    def test_vjp_matches_jacobian(self, u, w):
        comp = painleve_operator(6).compile(LINE)
        np.testing.assert_allclose(comp.vjp(u, w), w @ comp.jacobian(u), atol=1e-8)

    def test_threshold_scales_to_ball(self):
        A = InformationOperator((Functional.point_eval(0.0), Functional.point_eval(10.0)), [0, 0], threshold=1.0)
        comp = A.compile(LINE)
        vals, active = comp.thresholded(np.array([[3.0, 4.0], [0.3, 0.4]]))
        np.testing.assert_allclose(vals, [[0.6, 0.8], [0.3, 0.4]])
        np.testing.assert_array_equal(active, [True, False])

    def test_gradient_unavailable_when_threshold_active(self):
        A = InformationOperator((Functional.point_eval(0.0),), [0.0], threshold=1e-3)
        with pytest.raises(ThresholdGradientError):
            residual_norm_and_grad(A, _state(np.ones(10)))

    @given(coef)
    @settings(max_examples=25)
    def test_residual_norm_gradient(self, u):
        A = painleve_operator(5, threshold=None)
        r, g = residual_norm_and_grad(A, _state(u))
        h = 1e-6
        fd = [(np.linalg.norm(residual(A, _state(u + h * e))) - np.linalg.norm(residual(A, _state(u - h * e))))
              / (2 * h) for e in np.eye(10)]
        assert r == pytest.approx(np.linalg.norm(residual(A, _state(u))))
        np.testing.assert_allclose(g, fd, rtol=1e-4, atol=1e-4)

    def test_empty_operator(self):
        A = InformationOperator((), [])
        assert residual(A, _state(np.zeros(10))).size == 0
        r, g = residual_norm_and_grad(A, _state(np.zeros(10)))
        assert r == 0.0 and not np.any(g)


class TestDesigns:
    def test_painleve_layout(self):
        A = painleve_operator(15)
        assert len(A) == 17
        np.testing.assert_allclose(A.observed[:15], -np.linspace(0, 10, 15))
        np.testing.assert_allclose(A.observed[15:], [0.0, np.sqrt(10.0)])

    @pytest.mark.parametrize("n,split", [(16, (4, 8, 4)), (25, (9, 10, 6)), (36, (16, 12, 8))])
    def test_poisson_split(self, n, split):
        parts = poisson_design(n)
        assert tuple(len(p) for p in parts) == split
        assert sum(split) == n == len(poisson_operator(n))

    def test_poisson_unknown_n(self):
        with pytest.raises(ValueError):
            poisson_design(20)

    def test_poisson_observed_values(self):
        _, dirichlet, _ = poisson_design(16)
        A = poisson_operator(16)
        a = A.observed[4:12]
        np.testing.assert_allclose(a, np.where(dirichlet[:, 1] == 0.0, dirichlet[:, 0], 1.0 - dirichlet[:, 0]))

    def test_negative_slope_constraint(self):
        c = painleve_negative_slope()
        down = np.zeros(10)
        down[1] = -1.0
        assert check_inequalities([c], _state(down))
        assert not check_inequalities([c], _state(-down))
        assert check_inequalities([InequalityConstraint(c.functional, "ge")], _state(-down))
        with pytest.raises(ValueError):
            InequalityConstraint(c.functional, "lt")
