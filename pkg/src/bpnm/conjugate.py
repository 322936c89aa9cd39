"""Closed-form Gaussian conditioning on linear information.

Covers Bayesian quadrature against Lebesgue measure on an interval,
symmetric-collocation conditioning for linear differential functionals, and
the closed-form log evidence of the linear-Gaussian model.  These serve both
as methods in their own right and as oracles for the samplers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermeval
from numpy.polynomial.legendre import leggauss
from scipy import linalg
from scipy.special import erf

from .infoops import Functional, InformationOperator
from .seriesprior import SeriesPrior

__all__ = [
    "ConditioningError",
    "LinearityError",
    "KernelSpec",
    "GaussianPosterior",
    "bq_posterior",
    "bq_weights",
    "collocation_posterior",
    "gaussian_evidence",
    "kernel_mean",
    "kernel_double_integral",
]

NUGGET = 1e-10


class ConditioningError(np.linalg.LinAlgError):
    """Gram matrix could not be factorised even after the nugget."""

    def __init__(self, msg: str, condition: float):
        super().__init__(f"{msg} (condition estimate {condition:.3e})")
        self.condition = condition


class LinearityError(ValueError):
    """A nonlinear functional was passed to a Gaussian conditioning routine."""


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian prior described by a covariance kernel and a constant mean.

    kind
        ``"wiener"`` (``min(s, t)``), ``"integrated_wiener"`` (once-integrated
        Wiener process, ``min**3/3 + |s - t| min**2 / 2``), ``"sqexp"``
        (``exp(-|s - t|**2 / (2 l**2))``) or ``"series"`` (the finite-rank
        kernel ``sum_i gamma_i**2 phi_i(s) phi_i(t)`` of a Gaussian series prior).
    """

    kind: str
    lengthscale: float = 1.0
    mean: float = 0.0
    prior: SeriesPrior | None = None

    def __post_init__(self):
        if self.kind not in ("wiener", "integrated_wiener", "sqexp", "series"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "sqexp" and self.lengthscale <= 0:
            raise ValueError("lengthscale must be positive")
        if self.kind == "series":
            if self.prior is None or self.prior.family != "gaussian":
                raise ValueError("series kernel needs a Gaussian series prior")
            object.__setattr__(self, "mean", self.prior.offset)

    @classmethod
    def wiener(cls) -> "KernelSpec":
        return cls("wiener")

    @classmethod
    def integrated_wiener(cls) -> "KernelSpec":
        return cls("integrated_wiener")

    @classmethod
    def sqexp(cls, lengthscale: float, mean: float = 0.0) -> "KernelSpec":
        return cls("sqexp", lengthscale, mean)

    @classmethod
    def series(cls, prior: SeriesPrior) -> "KernelSpec":
        return cls("series", prior=prior)

    def __call__(self, s, t) -> np.ndarray:
        """Kernel matrix between point sets ``s`` and ``t`` (1D: shape (n,))."""
        if self.kind == "series":
            b = self.prior.basis
            g2 = self.prior.gammas**2
            return (b.design(s) * g2) @ b.design(t).T
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.kind == "sqexp":
            s2 = s.reshape(len(s), -1)
            t2 = t.reshape(len(t), -1)
            d2 = np.sum((s2[:, None, :] - t2[None, :, :]) ** 2, axis=-1)
            return np.exp(-0.5 * d2 / self.lengthscale**2)
        s = s.reshape(-1)[:, None]
        t = t.reshape(-1)[None, :]
        lo = np.minimum(s, t)
        if self.kind == "wiener":
            return lo
        return lo**3 / 3.0 + np.abs(s - t) * lo**2 / 2.0

    # -- linear functionals --------------------------------------------
    def _sqexp_deriv(self, p: np.ndarray, q: np.ndarray, alpha, beta) -> np.ndarray:
        """``d^alpha_s d^beta_t k(s, t)`` for point arrays ``p`` (n, d), ``q`` (m, d)."""
        ell = self.lengthscale
        out = np.ones((len(p), len(q)))
        for ax, (a, b) in enumerate(zip(alpha, beta)):
            r = (p[:, ax][:, None] - q[:, ax][None, :]) / ell
            m = a + b
            coef = np.zeros(m + 1)
            coef[m] = 1.0
            # d^m/dr^m exp(-r^2/2) = (-1)^m He_m(r) exp(-r^2/2); d/dt = -d/dr
            out = out * ((-1.0) ** m * (-1.0) ** b * ell ** (-m) * hermeval(r, coef)) * np.exp(-0.5 * r**2)
        return out

    def functional_mean(self, fs: Sequence[Functional]) -> np.ndarray:
        _require_linear(fs)
        if self.kind == "series":
            return np.array([f.rows(self.prior.basis, self.prior.offset)[1] for f in fs], dtype=float)
        return np.array([self.mean if f.kind == "point" or (f.kind == "deriv" and np.sum(f.order) == 0)
                         else 0.0 for f in fs])

    def functional_cov(self, fs1: Sequence[Functional], fs2: Sequence[Functional]) -> np.ndarray:
        """Cross-covariance ``[L_i L'_j k]`` between two lists of linear functionals."""
        _require_linear(fs1)
        _require_linear(fs2)
        if len(fs1) == 0 or len(fs2) == 0:
            return np.zeros((len(fs1), len(fs2)))
        if self.kind == "series":
            b = self.prior.basis
            r1 = np.array([f.rows(b)[0] for f in fs1])
            r2 = np.array([f.rows(b)[0] for f in fs2])
            return (r1 * self.prior.gammas**2) @ r2.T
        if self.kind in ("wiener", "integrated_wiener"):
            if any(f.kind != "point" for f in list(fs1) + list(fs2)):
                raise ValueError(f"{self.kind} kernel supports point evaluations only")
            return self([f.point[0] for f in fs1], [f.point[0] for f in fs2])
        dim = len(fs1[0].point)
        out = np.zeros((len(fs1), len(fs2)))
        p1 = np.array([f.point for f in fs1])
        p2 = np.array([f.point for f in fs2])
        terms1 = [f.derivative_terms(dim) for f in fs1]
        terms2 = [f.derivative_terms(dim) for f in fs2]
        # group by derivative multi-index so each kernel derivative is evaluated once
        keys1 = sorted({mi for ts in terms1 for _, mi in ts})
        keys2 = sorted({mi for ts in terms2 for _, mi in ts})
        c1 = {k: np.array([sum(c for c, mi in ts if mi == k) for ts in terms1]) for k in keys1}
        c2 = {k: np.array([sum(c for c, mi in ts if mi == k) for ts in terms2]) for k in keys2}
        for ka in keys1:
            for kb in keys2:
                out += c1[ka][:, None] * self._sqexp_deriv(p1, p2, ka, kb) * c2[kb][None, :]
        return out


def _require_linear(fs):
    bad = [f.kind for f in fs if not f.is_linear]
    if bad:
        raise LinearityError(f"nonlinear functional(s) {sorted(set(bad))} cannot be conditioned in closed form")


@dataclass(frozen=True)
class GaussianPosterior:
    """Gaussian over a scalar or vector quantity."""

    mean: np.ndarray | float
    cov: np.ndarray | float

    @property
    def is_scalar(self) -> bool:
        return np.ndim(self.mean) == 0

    @property
    def var(self):
        return self.cov if self.is_scalar else np.diag(self.cov)

    @property
    def std(self):
        return np.sqrt(np.maximum(self.var, 0.0))

    def sample(self, rng: np.random.Generator, size: int | None = None):
        if self.is_scalar:
            return self.mean + math.sqrt(max(self.cov, 0.0)) * rng.standard_normal(size)
        cov = np.atleast_2d(self.cov)
        w, v = np.linalg.eigh(cov)
        root = v * np.sqrt(np.maximum(w, 0.0))
        z = rng.standard_normal((size or 1, len(w)))
        out = np.asarray(self.mean) + z @ root.T
        return out if size is not None else out[0]


# ---------------------------------------------------------------------------
# factorisation


def _factor(K: np.ndarray):
    n = K.shape[0]
    scale = np.trace(K) / max(n, 1)
    Kn = K + NUGGET * max(scale, 1e-300) * np.eye(n)
    try:
        return linalg.cho_factor(Kn, lower=True), Kn
    except linalg.LinAlgError:
        raise ConditioningError("Gram matrix is not positive definite", float(np.linalg.cond(K))) from None


def _condition(mean_q, K_q, G, K, resid):
    """Standard Gaussian conditioning; returns posterior mean and covariance."""
    if K.shape[0] == 0:
        return mean_q, K_q
    cf, _ = _factor(K)
    mean = mean_q + G.T @ linalg.cho_solve(cf, resid)
    cov = K_q - G.T @ linalg.cho_solve(cf, G)
    return mean, 0.5 * (cov + cov.T)


# ---------------------------------------------------------------------------
# Bayesian quadrature


def _gl_pieces(breaks, n_nodes=24):
    """Gauss-Legendre nodes/weights on each sub-interval between sorted ``breaks``."""
    x, w = leggauss(n_nodes)
    nodes, weights = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi <= lo:
            continue
        nodes.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
        weights.append(0.5 * (hi - lo) * w)
    if not nodes:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(nodes), np.concatenate(weights)


def kernel_mean(kernel: KernelSpec, t, interval=(0.0, 1.0)) -> np.ndarray:
    """``z(t) = int_I k(s, t) ds`` for points ``t`` (1D)."""
    a, b = map(float, interval)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if kernel.kind == "wiener":
        inside = (t**2 - a**2) / 2.0 + t * (b - t)
        return np.where(t <= a, t * (b - a), np.where(t >= b, (b**2 - a**2) / 2.0, inside))
    if kernel.kind == "sqexp":
        c = math.sqrt(2.0) * kernel.lengthscale
        return kernel.lengthscale * math.sqrt(math.pi / 2.0) * (erf((b - t) / c) - erf((a - t) / c))
    out = np.empty(t.size)
    for i, ti in enumerate(t):
        nodes, w = _gl_pieces(np.array([a, min(max(ti, a), b), b]))
        out[i] = w @ kernel(nodes, np.array([ti]))[:, 0]
    return out


def kernel_double_integral(kernel: KernelSpec, I=(0.0, 1.0), J=(0.0, 1.0)) -> float:
    """``int_I int_J k(s, t) dt ds``."""
    a, b = map(float, I)
    c, d = map(float, J)
    if kernel.kind == "wiener" and (a, b) == (c, d):
        return (b**3 - a**3) / 3.0 - a**2 * (b - a)
    if kernel.kind == "sqexp" and (a, b) == (c, d):
        ell = kernel.lengthscale
        L = b - a
        return 2.0 * ell**2 * (math.exp(-(L**2) / (2 * ell**2)) - 1.0) + math.sqrt(2 * math.pi) * ell * L * erf(
            L / (math.sqrt(2.0) * ell)
        )
    breaks = np.unique(np.clip([a, b, c, d], a, b))
    nodes, w = _gl_pieces(breaks)
    return float(w @ kernel_mean(kernel, nodes, J))


def bq_weights(kernel: KernelSpec, knots, interval=(0.0, 1.0)) -> np.ndarray:
    """Linear weights ``K^{-1} z`` of the posterior-mean quadrature rule."""
    knots = np.asarray(knots, dtype=float)
    K = kernel(knots, knots)
    cf, _ = _factor(K)
    return linalg.cho_solve(cf, kernel_mean(kernel, knots, interval))


def bq_posterior(kernel: KernelSpec, knots, values, interval=(0.0, 1.0)) -> GaussianPosterior:
    """Posterior over ``int_I x(t) dt`` given ``x(knots) = values``."""
    knots = np.asarray(knots, dtype=float).reshape(-1)
    values = np.asarray(values, dtype=float).reshape(-1)
    if knots.size != values.size:
        raise ValueError("knots and values differ in length")
    if np.unique(knots).size != knots.size:
        raise ValueError("knots must be distinct")
    a, b = map(float, interval)
    z0 = kernel_double_integral(kernel, interval, interval)
    prior_mean = kernel.mean * (b - a)
    if knots.size == 0:
        return GaussianPosterior(prior_mean, z0)
    z = kernel_mean(kernel, knots, interval)
    K = kernel(knots, knots)
    mean, var = _condition(np.array([prior_mean]), np.array([[z0]]), z[:, None], K, values - kernel.mean)
    return GaussianPosterior(float(mean[0]), float(var[0, 0]))


# ---------------------------------------------------------------------------
# collocation


def collocation_posterior(kernel: KernelSpec, A: InformationOperator, query: Sequence[Functional],
                          observed=None) -> GaussianPosterior:
    """Joint Gaussian over ``query`` functionals given linear information ``A``."""
    a = A.observed if observed is None else np.asarray(observed, dtype=float)
    fs = list(A.functionals)
    _require_linear(fs)
    _require_linear(query)
    K = kernel.functional_cov(fs, fs)
    G = kernel.functional_cov(fs, query)
    Kq = kernel.functional_cov(query, query)
    mq = kernel.functional_mean(query)
    mA = kernel.functional_mean(fs) if fs else np.zeros(0)
    mean, cov = _condition(mq, Kq, G, K, a - mA)
    return GaussianPosterior(mean, cov)


def gaussian_evidence(kernel: KernelSpec, A: InformationOperator, observed=None) -> float:
    """``log N(a; m_A, K_A)``, the marginal density of the information."""
    a = A.observed if observed is None else np.asarray(observed, dtype=float)
    fs = list(A.functionals)
    if not fs:
        return 0.0
    K = kernel.functional_cov(fs, fs)
    resid = a - kernel.functional_mean(fs)
    (L, lower), _ = _factor(K)
    alpha = linalg.solve_triangular(L, resid, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return float(-0.5 * alpha @ alpha - 0.5 * logdet - 0.5 * len(fs) * math.log(2 * math.pi))
