"""Bayes risk of numerical methods under a Gaussian prior.

The running example is integration of a Wiener path on [0, 1] from point
evaluations with squared loss.  A linear rule ``sum_i w_i x(t_i)`` has risk

    1/3 - 2 sum_i w_i (t_i - t_i**2 / 2) + sum_ij w_i w_j min(t_i, t_j),

which for fixed knots is minimised by ``w = K^{-1} z``.  The module also
enumerates a small discrete problem exactly to show that the information
minimising the risk of the Bayes rule and that minimising the risk of the
full posterior can differ.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import linalg
from scipy.optimize import minimize

from .conjugate import GaussianPosterior, KernelSpec, bq_posterior, kernel_double_integral, kernel_mean
from .seriesprior import make_rng

__all__ = [
    "RiskReport",
    "OptimizationError",
    "wce1_risk",
    "optimal_trapezium",
    "mc_bayes_risk",
    "risk_ratio",
    "wiener_path_risk",
    "discrete_counterexample",
]

_MC = 53
_PATHS = 59


@dataclass(frozen=True)
class RiskReport:
    bayes_risk: float
    standard_error: float
    loss: str
    method: str
    n_draws: int = 0

    def __post_init__(self):
        if self.loss == "squared" and self.bayes_risk < 0:
            raise ValueError("squared-loss risk must be nonnegative")


class OptimizationError(RuntimeError):
    def __init__(self, msg: str, best):
        super().__init__(msg)
        self.best = best


def wce1_risk(knots, weights) -> float:
    """Mean squared error of ``sum_i w_i x(t_i)`` for ``int_0^1 x`` under the Wiener prior."""
    t = np.asarray(knots, dtype=float).reshape(-1)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if t.size != w.size:
        raise ValueError("knots and weights differ in length")
    if np.any((t < 0) | (t > 1)):
        raise ValueError("knots must lie in [0, 1]")
    return float(1.0 / 3.0 - 2.0 * w @ (t - 0.5 * t**2) + w @ np.minimum.outer(t, t) @ w)


def _inner(t):
    """Optimal weights and risk for fixed knots, with the gradient of the risk in the knots."""
    K = np.minimum.outer(t, t)
    z = t - 0.5 * t**2
    w = linalg.solve(K, z, assume_a="pos")
    risk = 1.0 / 3.0 - z @ w
    # d/dt_k of z^T K^{-1} z is 2 w_k z_k' - w^T (dK/dt_k) w
    later = np.array([w[t > tk].sum() for tk in t])
    grad = -(2.0 * w * (1.0 - t) - (w**2 + 2.0 * w * later))
    return w, risk, grad


def optimal_trapezium(n: int, starts: int = 20, seed=0):
    """Minimise the average error over knots and weights for ``n`` knots.

    Weights are solved exactly for each knot set, so the search runs over
    knots only, from ``starts`` random sorted starting points.  Returns
    ``(knots, weights, risk)`` with knots sorted.
    """
    if not 1 <= n <= 6:
        raise ValueError("n must be in 1..6")
    rng = make_rng(seed, _MC, n)
    eps = 1e-6

    def f(t):
        if np.unique(t).size < t.size:
            return 1.0, np.zeros_like(t)
        _, r, g = _inner(t)
        return r, g

    best = None
    for _ in range(starts):
        t0 = np.sort(rng.uniform(0.05, 1.0, n))
        res = minimize(f, t0, jac=True, method="L-BFGS-B", bounds=[(eps, 1.0)] * n,
                       options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 2000})
        if best is None or res.fun < best.fun:
            best = res
    t = np.sort(best.x)
    w, r, g = _inner(t)
    if np.max(np.abs(g)) > 1e-6:
        raise OptimizationError(f"knot search did not converge (gradient {np.max(np.abs(g)):.2e})", (t, w, r))
    return t, w, float(r)


# ---------------------------------------------------------------------------
# Monte Carlo risk


def _joint_draws(kernel: KernelSpec, knots, interval, n_draws, rng):
    """Exact draws of ``(x(knots), int_I x)`` under the Gaussian prior."""
    knots = np.asarray(knots, dtype=float)
    n = knots.size
    S = np.empty((n + 1, n + 1))
    S[:n, :n] = kernel(knots, knots)
    S[:n, n] = S[n, :n] = kernel_mean(kernel, knots, interval)
    S[n, n] = kernel_double_integral(kernel, interval, interval)
    w, v = np.linalg.eigh(S)
    root = v * np.sqrt(np.maximum(w, 0.0))
    y = rng.standard_normal((n_draws, n + 1)) @ root.T
    mean = kernel.mean * np.concatenate([np.ones(n), [interval[1] - interval[0]]])
    y = y + mean
    return y[:, :n], y[:, n]


def _posterior_rule(kernel, knots, interval):
    """Posterior mean as a linear map of the data, plus the (data-free) posterior variance."""
    knots = np.asarray(knots, dtype=float)
    n = knots.size
    if n == 0:
        post = bq_posterior(kernel, knots, [], interval)
        return np.zeros(0), post.mean, post.cov
    base = bq_posterior(kernel, knots, np.zeros(n), interval)
    w = np.array([bq_posterior(kernel, knots, e, interval).mean - base.mean for e in np.eye(n)])
    return w, base.mean, base.cov


def mc_bayes_risk(kernel: KernelSpec, method: str, knots, interval=(0.0, 1.0), n_draws: int = 100_000,
                  seed=0) -> RiskReport:
    """Squared-loss Bayes risk of a quadrature method by simulation from the prior.

    ``method="bpnm"`` scores the posterior by its expected loss
    (variance plus squared error of the mean); ``"bayes_rule"`` scores the
    posterior mean; ``"prior_mean"`` ignores the data.
    """
    if method not in ("bpnm", "bayes_rule", "prior_mean"):
        raise ValueError(f"unknown method {method!r}")
    rng = make_rng(seed, _MC)
    data, q = _joint_draws(kernel, knots, interval, n_draws, rng)
    if method == "prior_mean":
        loss = (q - kernel.mean * (interval[1] - interval[0])) ** 2
    else:
        w, c, var = _posterior_rule(kernel, knots, interval)
        err2 = (data @ w + c - q) ** 2
        loss = err2 + var if method == "bpnm" else err2
    return RiskReport(float(loss.mean()), float(loss.std(ddof=1) / math.sqrt(n_draws)), "squared", method, n_draws)


def risk_ratio(kernel: KernelSpec, knots, interval=(0.0, 1.0), n_draws: int = 100_000, seed=0):
    """``R(posterior) / R(posterior mean)`` on common draws, with a delta-method standard error."""
    rng = make_rng(seed, _MC)
    data, q = _joint_draws(kernel, knots, interval, n_draws, rng)
    w, c, var = _posterior_rule(kernel, knots, interval)
    err2 = (data @ w + c - q) ** 2
    m = err2.mean()
    se_m = err2.std(ddof=1) / math.sqrt(n_draws)
    ratio = (var + m) / m
    return float(ratio), float(var * se_m / m**2)


def wiener_path_risk(knots, weights, n_paths: int = 100_000, resolution: int = 1024, seed=0,
                     batch: int = 5000) -> RiskReport:
    """Squared error of a linear rule on simulated Wiener paths.

    Paths are Gaussian random walks on ``resolution`` equal steps with the
    knots inserted into the grid, so values at the knots are exact; the
    integral is taken by the trapezoid rule on the refined grid.
    """
    t = np.asarray(knots, dtype=float)
    w = np.asarray(weights, dtype=float)
    grid = np.union1d(np.linspace(0.0, 1.0, resolution + 1), t)
    dt = np.diff(grid)
    pos = np.searchsorted(grid, t)
    tw = np.zeros(grid.size)
    tw[:-1] += 0.5 * dt
    tw[1:] += 0.5 * dt
    rng = make_rng(seed, _PATHS)
    losses = []
    done = 0
    while done < n_paths:
        b = min(batch, n_paths - done)
        x = np.zeros((b, grid.size))
        x[:, 1:] = np.cumsum(rng.standard_normal((b, dt.size)) * np.sqrt(dt), axis=1)
        losses.append((x[:, pos] @ w - x @ tw) ** 2)
        done += b
    loss = np.concatenate(losses)
    return RiskReport(float(loss.mean()), float(loss.std(ddof=1) / math.sqrt(n_paths)), "squared", "linear rule",
                      n_paths)


# ---------------------------------------------------------------------------
# discrete counterexample


def _zero_one(q, q2) -> Fraction:
    return Fraction(int(q != q2))


def discrete_counterexample() -> dict:
    """Exact 0-1 risks on four equally likely states with ``Q(x) = 1[x = s0]`` and ``A(x) = 1[x in S]``.

    Returns a table keyed by ``(kind, S)`` with ``kind`` in
    ``{"classical", "bpnm"}``; classical entries are minimised over the four
    deterministic decision rules ``a -> c_a``.
    """
    states = ("spade", "diamond", "heart", "club")
    prior = {x: Fraction(1, 4) for x in states}

    def Q(x):
        return int(x == "spade")

    out = {}
    for S in (("spade", "diamond"), ("spade", "diamond", "heart")):
        def A(x, S=S):
            return int(x in S)

        rules = []
        for c0, c1 in itertools.product((0, 1), repeat=2):
            c = {0: c0, 1: c1}
            rules.append(sum(prior[x] * _zero_one(c[A(x)], Q(x)) for x in states))
        out[("classical", S)] = min(rules)
        risk = Fraction(0)
        for x in states:
            fibre = [y for y in states if A(y) == A(x)]
            mass = sum(prior[y] for y in fibre)
            post = {y: prior[y] / mass for y in fibre}
            risk += prior[x] * sum(p * _zero_one(Q(y), Q(x)) for y, p in post.items())
        out[("bpnm", S)] = risk
    return out
