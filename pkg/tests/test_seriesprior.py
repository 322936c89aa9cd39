import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from bpnm.chebbasis import BasisSet
from bpnm.seriesprior import ScaleSequence, SeriesPrior, UnsupportedFamilyError, make_rng


class TestScaleSequence:
    def test_power(self):
        np.testing.assert_allclose(ScaleSequence.power(1.0, 2.0).values(4), [1, 1 / 4, 1 / 9, 1 / 16])

    def test_geometric(self):
        np.testing.assert_allclose(ScaleSequence.geometric(8.0, 1.5).values(3), [8, 8 / 1.5, 8 / 2.25])

    @pytest.mark.parametrize("kind,rate", [("power", 1.0), ("geometric", 1.0), ("cubic", 2.0)])
    def test_invalid(self, kind, rate):
        with pytest.raises(ValueError):
            ScaleSequence(kind, 1.0, rate)

    def test_negative_alpha(self):
        with pytest.raises(ValueError):
            ScaleSequence.power(-1.0)

    @given(st.sampled_from(["power", "geometric"]), st.floats(0.1, 10), st.floats(1.1, 4))
    def test_dict_round_trip(self, kind, alpha, rate):
        s = ScaleSequence(kind, alpha, rate)
        assert ScaleSequence.from_dict(s.to_dict()) == s


def _prior(family, n=6):
    return SeriesPrior(family, ScaleSequence.power(1.0, 2.0), BasisSet.line(n - 1, 0.0, 1.0))


class TestSeriesPrior:
    def test_unknown_family(self):
        with pytest.raises(ValueError):
            _prior("laplace")

    @pytest.mark.parametrize("family,dist", [("gaussian", stats.norm), ("cauchy", stats.cauchy),
                                             ("uniform", stats.uniform(-1, 2))])
    def test_standardised_draws_have_the_right_law(self, family, dist):
        p = _prior(family)
        u = p.sample_coefficients(make_rng(3), 20_000)
        z = (u / p.gammas).ravel()
        assert stats.kstest(z, dist.cdf).pvalue > 1e-3

    @pytest.mark.parametrize("family,dist", [("gaussian", stats.norm), ("cauchy", stats.cauchy),
                                             ("uniform", stats.uniform(-1, 2))])
    def test_log_density_matches_scipy(self, family, dist):
        p = _prior(family)
        u = 0.5 * p.gammas * np.linspace(-1.5, 1.5, p.n_terms)
        ref = np.sum(dist.logpdf(u / p.gammas) - np.log(p.gammas))
        assert p.log_density(u) == pytest.approx(ref)

    def test_uniform_outside_support(self):
        p = _prior("uniform")
        u = np.zeros(p.n_terms)
        u[2] = 2 * p.gammas[2]
        assert p.log_density(u) == -math.inf

    @pytest.mark.parametrize("family", ["gaussian", "cauchy"])
    def test_gradient_by_finite_difference(self, family):
        p = _prior(family)
        u = make_rng(1).normal(size=p.n_terms) * p.gammas
        h = 1e-6
        fd = np.array([(p.log_density(u + h * e) - p.log_density(u - h * e)) / (2 * h) for e in np.eye(p.n_terms)])
        np.testing.assert_allclose(p.grad_log_density(u), fd, rtol=1e-5, atol=1e-6)

    def test_uniform_has_no_gradient(self):
        with pytest.raises(UnsupportedFamilyError):
            _prior("uniform").grad_log_density(np.zeros(6))

    def test_vectorised_log_density(self):
        p = _prior("gaussian")
        u = make_rng(0).normal(size=(4, 6))
        np.testing.assert_allclose(p.log_density(u), [p.log_density(r) for r in u])

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            _prior("gaussian").log_density(np.zeros(3))

    def test_sample_is_deterministic(self):
        p = _prior("cauchy")
        np.testing.assert_array_equal(p.sample(5).coefficients, p.sample(5).coefficients)
        assert not np.array_equal(p.sample(5).coefficients, p.sample(6).coefficients)

    def test_zero_scale_gives_point_mass(self):
        p = SeriesPrior("gaussian", ScaleSequence.power(0.0), BasisSet.line(3), 1.0)
        np.testing.assert_array_equal(p.sample_coefficients(make_rng(0), 5), 0.0)


class TestRng:
    def test_streams_are_keyed(self):
        a = make_rng(7, 1, 2).random(4)
        np.testing.assert_array_equal(a, make_rng(7, 1, 2).random(4))
        assert not np.array_equal(a, make_rng(7, 2, 1).random(4))
        assert not np.array_equal(a, make_rng(8, 1, 2).random(4))

    def test_generator_passthrough(self):
        g = np.random.default_rng(0)
        assert make_rng(g) is g

    @given(st.integers(0, 2**32))
    @settings(max_examples=20)
    def test_any_seed(self, seed):
        assert 0 <= make_rng(seed).random() < 1
