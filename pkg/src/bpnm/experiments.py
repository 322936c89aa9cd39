"""Problem set-ups and deterministic reference solvers for the experiments.

* ``linear_toy``: a small 1D linear-Gaussian collocation problem with a
  closed-form posterior, used to check the samplers and the evidence.
* ``poisson_problem`` and ``poisson_fd_reference``: the mixed
  Dirichlet/Neumann Laplace problem on the unit square and a second-order
  finite-difference solution of it.
* ``painleve_problem`` and ``painleve_references``: the boundary-value
  problem ``x'' = x**2 - t``, ``x(0) = 0``, ``x(10) = sqrt(10)``, which has a
  positive and a negative solution; both are found by Chebyshev collocation
  with Newton iterations from two different initial guesses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spl
from numpy.polynomial import chebyshev as C
from scipy.optimize import root

from .chebbasis import BasisSet
from .conjugate import GaussianPosterior, KernelSpec, _condition, collocation_posterior
from .infoops import (Functional, InformationOperator, painleve_negative_slope, painleve_operator,
                      poisson_operator)
from .seriesprior import ScaleSequence, SeriesPrior

__all__ = [
    "LinearToy",
    "linear_toy",
    "poisson_problem",
    "poisson_fd_reference",
    "painleve_problem",
    "painleve_references",
    "solve_painleve",
    "load_painleve_references",
    "PainleveReference",
    "trapezoid_l2",
    "coefficient_posterior",
    "poisson_closed_form",
    "write_painleve_references",
    "gaussian_oracle_query",
]

PAINLEVE_T_MAX = 10.0


# ---------------------------------------------------------------------------
# linear-Gaussian toy


@dataclass(frozen=True)
class LinearToy:
    prior: SeriesPrior
    A: InformationOperator
    mean: np.ndarray
    cov: np.ndarray

    @property
    def sd(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))


def linear_toy(degree: int = 6, kappa: float = 0.1) -> LinearToy:
    """``x(0) = 0``, ``x(1) = 1`` and ``-kappa x'' = 0`` at 1/4, 1/2, 3/4.

    The prior is Gaussian with ``gamma_i = (i + 1)**-2`` on a degree-``degree``
    Chebyshev basis of [0, 1].  ``kappa`` weights the interior rows so that all
    five rows have comparable size; it does not change the conditional law.
    The exact conditional law of the coefficients is returned alongside.
    """
    basis = BasisSet.line(degree, 0.0, 1.0)
    prior = SeriesPrior("gaussian", ScaleSequence.power(1.0, 2.0), basis, 0.0)
    fs = [Functional.point_eval(0.0), Functional.point_eval(1.0)]
    fs += [Functional.pde_interior(t, kappa) for t in (0.25, 0.5, 0.75)]
    A = InformationOperator(tuple(fs), [0.0, 1.0, 0.0, 0.0, 0.0])
    post = coefficient_posterior(prior, A)
    return LinearToy(prior, A, post.mean, post.cov)


def coefficient_posterior(prior: SeriesPrior, A: InformationOperator):
    """Conditional law of the coefficients of a Gaussian series prior given linear ``A``."""
    # each coefficient u_i = <x, C_i> is a linear functional of x under the series kernel;
    # conditioning the coefficient vector directly is the same computation in coordinates
    comp = A.compile(prior.basis, prior.offset)
    g2 = prior.gammas**2
    K = (comp.lin * g2) @ comp.lin.T
    G = comp.lin * g2
    mean, cov = _condition(np.zeros(prior.n_terms), np.diag(g2), G, K, A.observed - comp.const)
    return GaussianPosterior(mean, cov)


# ---------------------------------------------------------------------------
# Poisson


def poisson_problem(n: int = 16, family: str = "gaussian", degree: int = 8, threshold=None):
    """Series prior (offset 1, ``gamma_i = (i+1)**-2``) and information for the Poisson problem."""
    basis = BasisSet.triangle(degree)
    prior = SeriesPrior(family, ScaleSequence.power(1.0, 2.0), basis, 1.0)
    return prior, poisson_operator(n, threshold)


def poisson_fd_reference(n: int = 101):
    """Five-point finite-difference solution on an ``n x n`` grid.

    Dirichlet rows at ``t_2 = 0, 1``; zero-flux sides ``t_1 = 0, 1`` use
    mirrored ghost points.  Returns ``(grid, values)`` with ``values[i, j]``
    at ``(grid[i], grid[j])``.
    """
    h = np.linspace(0.0, 1.0, n)
    N = n * n

    def idx(i, j):
        return i * n + j

    rows, cols, vals = [], [], []
    b = np.zeros(N)
    for i in range(n):
        for j in range(n):
            k = idx(i, j)
            if j == 0 or j == n - 1:
                rows.append(k)
                cols.append(k)
                vals.append(1.0)
                b[k] = h[i] if j == 0 else 1.0 - h[i]
                continue
            il = i - 1 if i > 0 else 1
            ir = i + 1 if i < n - 1 else n - 2
            for c, v in ((k, -4.0), (idx(i, j - 1), 1.0), (idx(i, j + 1), 1.0), (idx(il, j), 1.0),
                         (idx(ir, j), 1.0)):
                rows.append(k)
                cols.append(c)
                vals.append(v)
    M = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    return h, spl.spsolve(M, b).reshape(n, n)


def poisson_closed_form(n: int = 16, degree: int = 8):
    """Closed-form Gaussian posterior mean coefficients for the Poisson problem."""
    prior, A = poisson_problem(n, "gaussian", degree)
    return prior, A, coefficient_posterior(prior, A)


# ---------------------------------------------------------------------------
# Painleve


def painleve_problem(m: int = 15, family: str = "gaussian", n_terms: int = 40, negative: bool = False,
                     threshold: float | None = 1e6):
    """Prior ``gamma_i = 8 * 1.5**-i`` on [0, 10] and information with ``m`` residual points."""
    basis = BasisSet.line(n_terms - 1, 0.0, PAINLEVE_T_MAX)
    prior = SeriesPrior(family, ScaleSequence.geometric(8.0, 1.5), basis, 0.0)
    A = painleve_operator(m, PAINLEVE_T_MAX, threshold)
    cons = (painleve_negative_slope(),) if negative else ()
    return prior, A, cons


@dataclass(frozen=True)
class PainleveReference:
    """Solution stored as Chebyshev-T coefficients in ``s = t/5 - 1``."""

    name: str
    coefficients: np.ndarray

    def __call__(self, t, order: int = 0) -> np.ndarray:
        s = np.asarray(t, dtype=float) / 5.0 - 1.0
        c = self.coefficients if order == 0 else C.chebder(self.coefficients, order)
        return C.chebval(s, c) * (0.2**order)

    @property
    def slope_at_zero(self) -> float:
        return float(self(0.0, 1))


def solve_painleve(guess, n: int = 80, tol: float = 1e-13) -> np.ndarray:
    """Collocation at ``n + 1`` Chebyshev points with Newton-type root finding."""
    s = np.cos(np.pi * np.arange(n + 1) / n)
    t = 5.0 * (s + 1.0)

    def resid(c):
        x = C.chebval(s, c)
        r = C.chebval(s, C.chebder(c, 2)) * 0.04 - x**2 + t
        r[0] = C.chebval(1.0, c) - np.sqrt(PAINLEVE_T_MAX)
        r[-1] = C.chebval(-1.0, c)
        return r

    c0 = C.chebfit(s, guess(t), n)
    sol = root(resid, c0, method="hybr", tol=tol)
    if not sol.success or np.max(np.abs(resid(sol.x))) > 1e-8:
        raise RuntimeError(f"collocation solve did not converge: {sol.message}")
    return sol.x


def painleve_references(n: int = 80) -> dict:
    """Positive and negative solutions keyed by name."""
    pos = solve_painleve(np.sqrt, n)
    neg = solve_painleve(lambda t: np.sqrt(t) - 4.0 * t * np.exp(-t / 2.0), n)
    return {"positive": PainleveReference("positive", pos), "negative": PainleveReference("negative", neg)}


def load_painleve_references() -> dict:
    """Stored reference solutions shipped with the package."""
    blob = resources.files("bpnm").joinpath("data/painleve_reference.json").read_text()
    d = json.loads(blob)
    return {k: PainleveReference(k, np.array(v)) for k, v in d["coefficients"].items()}


def write_painleve_references(path, n: int = 80) -> None:
    refs = painleve_references(n)
    d = {
        "description": "x'' = x^2 - t on [0, 10], x(0) = 0, x(10) = sqrt(10); Chebyshev-T coefficients in s = t/5 - 1",
        "collocation_points": n + 1,
        "coefficients": {k: v.coefficients.tolist() for k, v in refs.items()},
        "slope_at_zero": {k: v.slope_at_zero for k, v in refs.items()},
    }
    with open(path, "w") as fh:
        json.dump(d, fh, indent=1)


def trapezoid_l2(f, g, lower: float = 0.0, upper: float = PAINLEVE_T_MAX, n: int = 201) -> float:
    """L2 distance of two callables by the trapezoid rule on ``n`` equispaced points."""
    t = np.linspace(lower, upper, n)
    return float(np.sqrt(np.trapezoid((f(t) - g(t)) ** 2, t)))


def gaussian_oracle_query(prior: SeriesPrior, A: InformationOperator, query):
    """Convenience wrapper: conditional law of ``query`` functionals under a Gaussian series prior."""
    return collocation_posterior(KernelSpec.series(prior), A, query)
