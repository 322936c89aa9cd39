import math

import numpy as np
import pytest
from scipy import stats

from bpnm.disintegration import MalaConfig, RelaxationKernel, RungRecord, TemperatureSchedule, smc_nd
from bpnm.evidence import (
    ComparisonError,
    EvidenceUnavailableError,
    bayes_factor,
    estimate_log_evidence,
    log_bayes_factor,
)
from bpnm.experiments import linear_toy


def _marginal(toy):
    comp = toy.A.compile(toy.prior.basis, toy.prior.offset)
    S = (comp.lin * toy.prior.gammas**2) @ comp.lin.T
    return comp.const, S, toy.A.observed


def _log_z(toy, beta):
    """``log E_prior exp(-beta ||r||^2 / 2)`` in closed form."""
    m, S, a = _marginal(toy)
    n = a.size
    return stats.multivariate_normal(m, S + np.eye(n) / beta).logpdf(a) + 0.5 * n * math.log(2 * math.pi / beta)


def _exact_records(toy, deltas):
    """Rung records carrying the exact tilted mean of ``||r||^2``.

    With ``S = V diag(lam) V^T`` and ``c = V^T (a - m)``, ``-2 d log Z / d beta``
    is ``sum c^2 / (1 + beta lam)^2 + sum lam / (1 + beta lam)``.
    """
    m, S, a = _marginal(toy)
    lam, V = np.linalg.eigh(S)
    c2 = (V.T @ (a - m)) ** 2
    out = []
    for i, d in enumerate(deltas):
        q = 1 + lam / d**2
        out.append(RungRecord(i, float(d), 1.0, 1.0, float(np.sum(c2 / q**2 + lam / q)), 0.01, 0.0, 1.0))
    return out


@pytest.fixture(scope="module")
def toy():
    return linear_toy()


class TestEstimator:
    def test_tilted_moment_oracle(self, toy):
        beta, h = 50.0, 1e-4
        fd = -2 * (_log_z(toy, beta + h) - _log_z(toy, beta - h)) / (2 * h)
        assert _exact_records(toy, [beta**-0.5])[0].mean_sq_residual == pytest.approx(fd, rel=1e-6)

    def test_exact_moments_recover_marginal_density(self, toy):
        m, S, a = _marginal(toy)
        ref = stats.multivariate_normal(m, S + 1e-4 * np.eye(5)).logpdf(a)
        errs = []
        for rungs in (3000, 6000):
            sch = TemperatureSchedule.log_uniform(100.0, 1e-2, rungs)
            est = estimate_log_evidence(_exact_records(toy, sch.array), sch, n_obs=5)
            assert est.log_density - est.log_evidence == pytest.approx(ref - _log_z(toy, 1e4))
            errs.append(est.log_density - ref)
        # the right-endpoint sum has a bias of order 1 / rungs
        assert abs(errs[0]) < 0.1
        assert errs[1] / errs[0] == pytest.approx(0.5, abs=0.05)

    def test_single_rung_formula(self):
        rec = [RungRecord(0, 2.0, 1.0, 1.0, 3.0, 0.5, 0.0, 1.0)]
        est = estimate_log_evidence(rec, [2.0], n_obs=3)
        assert est.log_evidence == pytest.approx(-0.5 * 0.25 * 3.0)
        assert est.volume_correction == pytest.approx(-1.5 * math.log(2 * math.pi * 4.0))
        assert est.standard_error == pytest.approx(0.5 * 0.25 * 0.5)
        d = est.to_dict()
        assert d["rungs"][0]["delta"] == 2.0 and d["log_density"] == pytest.approx(est.log_density)

    def test_length_mismatch(self):
        rec = [RungRecord(0, 2.0, 1.0, 1.0, 3.0, 0.5, 0.0, 1.0)]
        with pytest.raises(EvidenceUnavailableError):
            estimate_log_evidence(rec, [2.0, 1.0], n_obs=1)

    def test_nonfinite_rung(self):
        rec = [RungRecord(0, 2.0, 1.0, 1.0, 3.0, 0.5, 0.0, 1.0), RungRecord(1, 1.0, 1.0, 1.0, np.nan, 0, 0, 1)]
        with pytest.raises(EvidenceUnavailableError) as exc:
            estimate_log_evidence(rec, [2.0, 1.0], n_obs=1)
        assert exc.value.rung == 1


class TestFromSampler:
    def test_smc_estimate_close_to_closed_form(self, toy):
        sch = TemperatureSchedule.log_uniform(20.0, 1e-2, 400)
        res = smc_nd(toy.prior, toy.A, RelaxationKernel.sqexp(), sch, 1000, MalaConfig(tau0="auto", steps=30),
                     seed=1)
        est = estimate_log_evidence(res)
        # same schedule with exact rung moments, so only sampling error remains; the
        # quoted error treats rungs as independent and is too small to set the tolerance
        ref = estimate_log_evidence(_exact_records(toy, sch.array), sch, n_obs=5)
        assert est.log_density == pytest.approx(ref.log_density, abs=0.15)
        assert 0 < est.standard_error < 0.1
        assert est.fingerprint == toy.A.fingerprint()

    def test_failed_run(self, toy):
        res = smc_nd(toy.prior, toy.A, RelaxationKernel.indicator(), TemperatureSchedule.explicit([1e-8]), 10,
                     MalaConfig(steps=0))
        with pytest.raises(ValueError):
            estimate_log_evidence(res)


class TestBayesFactor:
    def _est(self, logz, fp="a", dm=0.1):
        rec = [RungRecord(0, dm, 1.0, 1.0, -2 * logz * dm**2, 0.0, 0.0, 1.0)]
        est = estimate_log_evidence(rec, [dm], n_obs=2)
        object.__setattr__(est, "fingerprint", fp)
        return est

    def test_ratio(self):
        e1, e2 = self._est(-1.0), self._est(-3.0)
        assert log_bayes_factor(e1, e2) == pytest.approx(2.0)
        assert bayes_factor(e1, e2) == pytest.approx(math.e**2)

    def test_reciprocal(self):
        e1, e2 = self._est(-1.25), self._est(-3.5)
        assert bayes_factor(e1, e2) * bayes_factor(e2, e1) == pytest.approx(1.0, rel=1e-15)

    def test_incomparable(self):
        with pytest.raises(ComparisonError):
            log_bayes_factor(self._est(-1.0, "a"), self._est(-1.0, "b"))
        with pytest.raises(ComparisonError):
            log_bayes_factor(self._est(-1.0, dm=0.1), self._est(-1.0, dm=0.2))
