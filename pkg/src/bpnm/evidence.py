"""Model evidence by thermodynamic integration over the bandwidth schedule.

With ``phi(r) = exp(-r**2 / 2)`` and ``beta = 1 / delta**2`` the relaxed
normaliser ``Z(beta) = int exp(-beta r**2 / 2) dmu`` satisfies
``d log Z / d beta = -E_beta[r**2] / 2``.  A right-endpoint Riemann sum over
the schedule gives

    log Z(beta_m) ~= -sum_i (beta_i - beta_{i-1}) / 2 * E_i[r**2],   beta_0 = 0.

This is the usual discretised identity written for ``exp(-r**2)`` with the
bandwidth rescaled by ``sqrt(2)``.  The density of the information at ``a``
is ``Z(beta) / (2 pi / beta)**(n/2)`` as ``beta -> inf``, so the reported log
evidence adds the kernel-volume term ``-(n/2) log(2 pi delta_m**2)``.  That
term depends only on ``n`` and ``delta_m`` and cancels in Bayes factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["EvidenceEstimate", "EvidenceUnavailableError", "ComparisonError", "estimate_log_evidence",
           "bayes_factor", "log_bayes_factor"]


class EvidenceUnavailableError(RuntimeError):
    def __init__(self, rung: int):
        super().__init__(f"sampler ensemble failed at temperature index {rung}; evidence unavailable")
        self.rung = rung


class ComparisonError(ValueError):
    """Evidence estimates refer to different information."""


@dataclass(frozen=True)
class EvidenceEstimate:
    """Thermodynamic-integration evidence.

    ``log_evidence`` is the discretised sum ``-sum(rung_contributions)``;
    ``log_density`` adds ``volume_correction`` and estimates the density of
    the information at the observed value.
    """

    log_evidence: float
    rung_contributions: np.ndarray
    rung_standard_errors: np.ndarray
    volume_correction: float
    deltas: np.ndarray
    fingerprint: str | None = None

    @property
    def standard_error(self) -> float:
        """Standard error of the sum assuming independent rung estimates."""
        return float(np.sqrt(np.sum(self.rung_standard_errors**2)))

    @property
    def log_density(self) -> float:
        return self.log_evidence + self.volume_correction

    def to_dict(self) -> dict:
        return {
            "log_evidence": self.log_evidence,
            "log_density": self.log_density,
            "volume_correction": self.volume_correction,
            "standard_error": self.standard_error,
            "fingerprint": self.fingerprint,
            "rungs": [
                {"delta": float(d), "contribution": float(c), "standard_error": float(s)}
                for d, c, s in zip(self.deltas, self.rung_contributions, self.rung_standard_errors)
            ],
        }


def estimate_log_evidence(history, schedule=None, n_obs: int | None = None) -> EvidenceEstimate:
    """Evidence from a sampler history.

    ``history`` is an :class:`~bpnm.disintegration.SMCResult` or
    :class:`~bpnm.disintegration.PTResult` (or a list of rung records, in
    which case ``n_obs`` is required).  ``schedule`` defaults to the one
    stored with the result.
    """
    fingerprint = getattr(history, "fingerprint", None)
    relaxation = getattr(history, "relaxation", "sqexp")
    if relaxation != "sqexp":
        raise ValueError("evidence is defined for the squared-exponential relaxation only")
    ens = getattr(history, "ensemble", None)
    if ens is not None and ens.failed:
        raise EvidenceUnavailableError(ens.failed_at)
    if n_obs is None:
        n_obs = history.n_obs
    if schedule is None:
        schedule = history.schedule
    records = history.history if hasattr(history, "history") else list(history)
    deltas = np.asarray(schedule.deltas if hasattr(schedule, "deltas") else schedule, dtype=float)
    if len(records) != deltas.size:
        raise EvidenceUnavailableError(len(records))
    means = np.array([r.mean_sq_residual for r in records], dtype=float)
    ses = np.array([r.sq_residual_se for r in records], dtype=float)
    if not np.all(np.isfinite(means)):
        bad = int(np.flatnonzero(~np.isfinite(means))[0])
        raise EvidenceUnavailableError(bad)
    beta = 1.0 / deltas**2
    dbeta = np.diff(np.concatenate([[0.0], beta]))
    contrib = 0.5 * dbeta * means
    contrib_se = 0.5 * dbeta * np.nan_to_num(ses)
    volume = -0.5 * n_obs * math.log(2.0 * math.pi * deltas[-1] ** 2) if n_obs else 0.0
    return EvidenceEstimate(float(-contrib.sum()), contrib, contrib_se, volume, deltas, fingerprint)


def log_bayes_factor(e1: EvidenceEstimate, e2: EvidenceEstimate) -> float:
    if e1.fingerprint is not None and e2.fingerprint is not None and e1.fingerprint != e2.fingerprint:
        raise ComparisonError("evidence estimates were computed against different information")
    if not np.isclose(e1.deltas[-1], e2.deltas[-1], rtol=1e-12):
        raise ComparisonError("evidence estimates use different final bandwidths")
    return (e1.log_evidence + e1.volume_correction) - (e2.log_evidence + e2.volume_correction)


def bayes_factor(e1: EvidenceEstimate, e2: EvidenceEstimate) -> float:
    """``exp(log p_1(a) - log p_2(a))``."""
    return math.exp(log_bayes_factor(e1, e2))
