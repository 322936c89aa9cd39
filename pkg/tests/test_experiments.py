import json

import numpy as np
import pytest
from scipy.integrate import solve_bvp

from bpnm.chebbasis import points_grid
from bpnm.conjugate import KernelSpec, collocation_posterior
from bpnm.experiments import (
    PainleveReference,
    coefficient_posterior,
    linear_toy,
    load_painleve_references,
    painleve_problem,
    painleve_references,
    poisson_closed_form,
    poisson_fd_reference,
    poisson_problem,
    trapezoid_l2,
    write_painleve_references,
)
from bpnm.infoops import Functional


def _laplace_series(t1, t2, terms=20_000):
    """Cosine series for the mixed problem: x = t1 on t2 = 0, 1 - t1 on t2 = 1, zero flux at t1 = 0, 1."""
    k = np.pi * np.arange(1, 2 * terms, 2)[:, None]

    def ratio(s):  # sinh(k s) / sinh(k), overflow-free
        return np.exp(k * (s - 1)) * (1 - np.exp(-2 * k * s)) / (1 - np.exp(-2 * k))

    return 0.5 + np.sum(4 / k**2 * np.cos(k * t1) * (ratio(t2) - ratio(1 - t2)), axis=0)


class TestPoissonReference:
    def test_finite_differences_match_series_solution(self):
        h, U = poisson_fd_reference(101)
        T1, T2 = np.meshgrid(h[::5], h[::5], indexing="ij")
        ref = _laplace_series(T1.ravel(), T2.ravel())
        # largest errors sit at the corners where the boundary type changes
        np.testing.assert_allclose(U[::5, ::5].ravel(), ref, atol=5e-4)

    def test_boundary_rows(self):
        h, U = poisson_fd_reference(21)
        np.testing.assert_allclose(U[:, 0], h)
        np.testing.assert_allclose(U[:, -1], 1 - h)

    def test_closed_form_posterior_near_reference(self):
        prior, A, post = poisson_closed_form()
        assert prior.n_terms == 45 and len(A) == 16
        h, U = poisson_fd_reference(101)
        B = prior.basis.design(points_grid((0, 0), (1, 1), 21))
        err = np.abs(B @ post.mean + prior.offset - U[::5, ::5].ravel()).max()
        assert err < 0.1


@pytest.fixture(scope="module")
def refs():
    return load_painleve_references()


class TestPainleveReferences:
    def test_stored_fixture_matches_solver(self, refs):
        fresh = painleve_references()
        t = np.linspace(0, 10, 201)
        for k in ("positive", "negative"):
            np.testing.assert_allclose(refs[k](t), fresh[k](t), atol=1e-10)

    @pytest.mark.parametrize("name", ["positive", "negative"])
    def test_independent_boundary_value_solver(self, refs, name):
        t = np.linspace(0, 10, 2001)
        g = refs[name](t) + 0.2 * np.sin(np.pi * t / 10)
        sol = solve_bvp(lambda s, y: np.vstack([y[1], y[0] ** 2 - s]),
                        lambda a, b: np.array([a[0], b[0] - np.sqrt(10.0)]),
                        t, np.vstack([g, np.gradient(g, t)]), tol=1e-9, max_nodes=1_000_000)
        assert sol.status == 0
        tt = np.linspace(0, 10, 201)
        np.testing.assert_allclose(sol.sol(tt)[0], refs[name](tt), atol=1e-8)

    def test_branches(self, refs):
        pos, neg = refs["positive"], refs["negative"]
        assert pos.slope_at_zero > 0 > neg.slope_at_zero
        t = np.linspace(0, 10, 101)
        np.testing.assert_allclose(pos(t, 2) - pos(t) ** 2 + t, 0.0, atol=1e-8)
        assert trapezoid_l2(pos, neg) > 1.0

    def test_round_trip(self, tmp_path):
        path = tmp_path / "ref.json"
        write_painleve_references(path, n=40)
        d = json.loads(path.read_text())
        r = PainleveReference("positive", np.array(d["coefficients"]["positive"]))
        assert r(10.0) == pytest.approx(np.sqrt(10.0), abs=1e-8)


def test_trapezoid_l2():
    assert trapezoid_l2(lambda t: t, lambda t: 0 * t, 0, 1, 10_001) == pytest.approx(np.sqrt(1 / 3), abs=1e-6)


class TestProblems:
    def test_linear_toy_matches_collocation(self):
        toy = linear_toy()
        q = [Functional.point_eval(t) for t in (0.1, 0.6)]
        post = collocation_posterior(KernelSpec.series(toy.prior), toy.A, q)
        np.testing.assert_allclose(toy.prior.basis.design([0.1, 0.6]) @ toy.mean, post.mean, atol=1e-8)
        assert np.all(toy.sd > 0)

    def test_kappa_does_not_change_the_posterior(self):
        a, b = linear_toy(kappa=0.1), linear_toy(kappa=1.0)
        np.testing.assert_allclose(a.mean, b.mean, atol=1e-8)

    def test_coefficient_posterior_interpolates(self):
        prior, A = poisson_problem(16)
        post = coefficient_posterior(prior, A)
        comp = A.compile(prior.basis, prior.offset)
        np.testing.assert_allclose(comp.values(post.mean), A.observed, atol=1e-6)

    def test_painleve_problem(self):
        prior, A, cons = painleve_problem(15, "cauchy", negative=True)
        assert prior.n_terms == 40 and len(A) == 17 and len(cons) == 1
        assert prior.family == "cauchy"
