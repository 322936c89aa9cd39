"""Truncated series priors over Chebyshev coefficients.

A draw is ``u_i = gamma_i * xi_i`` with ``xi_i`` i.i.d. standard Gaussian,
standard Cauchy or Uniform(-1, 1), for ``i = 0..N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chebbasis import BasisSet, SeriesState

__all__ = ["ScaleSequence", "SeriesPrior", "UnsupportedFamilyError", "FAMILIES", "make_rng"]

FAMILIES = ("gaussian", "cauchy", "uniform")

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class UnsupportedFamilyError(ValueError):
    pass


def make_rng(seed, *key: int) -> np.random.Generator:
    """Counter-based generator for the stream identified by ``(seed, *key)``.

    Streams with distinct keys are statistically independent, so results do
    not depend on the order in which workers request them.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class ScaleSequence:
    """Decaying coefficient scales.

    ``kind="power"``: ``gamma_i = alpha * (i + 1) ** -p`` (needs ``p > 1``);
    ``kind="geometric"``: ``gamma_i = alpha * beta ** -i`` (needs ``beta > 1``).
    ``alpha = 0`` is accepted to obtain the degenerate point-mass prior.
    """

    kind: str
    alpha: float
    rate: float

    def __post_init__(self):
        if self.kind not in ("power", "geometric"):
            raise ValueError(f"unknown scale kind {self.kind!r}")
        if self.alpha < 0:
            raise ValueError("alpha must be positive")
        if self.kind == "power" and self.rate <= 1:
            raise ValueError("power decay needs p > 1 for summable scales")
        if self.kind == "geometric" and self.rate <= 1:
            raise ValueError("geometric decay needs beta > 1")

    @classmethod
    def power(cls, alpha: float, p: float = 2.0) -> "ScaleSequence":
        return cls("power", alpha, p)

    @classmethod
    def geometric(cls, alpha: float, beta: float) -> "ScaleSequence":
        return cls("geometric", alpha, beta)

    def values(self, n_terms: int) -> np.ndarray:
        i = np.arange(n_terms, dtype=float)
        if self.kind == "power":
            return self.alpha * (i + 1.0) ** (-self.rate)
        return self.alpha * self.rate ** (-i)

    def to_dict(self) -> dict:
        key = "p" if self.kind == "power" else "beta"
        return {"kind": self.kind, "alpha": self.alpha, key: self.rate}

    @classmethod
    def from_dict(cls, d: dict) -> "ScaleSequence":
        if d["kind"] == "power":
            return cls.power(d["alpha"], d.get("p", 2.0))
        return cls.geometric(d["alpha"], d["beta"])


@dataclass(frozen=True)
class SeriesPrior:
    """Prior ``mu_N`` on ``offset + sum_{i<=N} gamma_i xi_i phi_i``."""

    family: str
    scales: ScaleSequence
    basis: BasisSet
    offset: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")

    @property
    def n_terms(self) -> int:
        return self.basis.size

    @property
    def gammas(self) -> np.ndarray:
        return self.scales.values(self.n_terms)

    def _standard_draws(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.family == "gaussian":
            return rng.standard_normal(shape)
        if self.family == "cauchy":
            return rng.standard_cauchy(shape)
        return rng.uniform(-1.0, 1.0, shape)

    def sample_coefficients(self, rng, size: int | None = None) -> np.ndarray:
        """Coefficient draws, shape ``(n_terms,)`` or ``(size, n_terms)``."""
        rng = make_rng(rng)
        shape = (self.n_terms,) if size is None else (size, self.n_terms)
        return self.gammas * self._standard_draws(rng, shape)

    def sample(self, seed) -> SeriesState:
        """One prior draw as a :class:`SeriesState`; deterministic given ``seed``."""
        return SeriesState(self.basis, self.sample_coefficients(seed), self.offset)

    def log_density(self, u) -> np.ndarray | float:
        """Log density of coefficient vector(s) along the last axis."""
        u = np.asarray(u, dtype=float)
        g = self.gammas
        if u.shape[-1] != g.size:
            raise ValueError(f"expected {g.size} coefficients, got {u.shape[-1]}")
        z = u / g
        if self.family == "gaussian":
            terms = -0.5 * z**2 - _LOG_SQRT_2PI
        elif self.family == "cauchy":
            terms = -np.log1p(z**2) - math.log(math.pi)
        else:
            terms = np.where(np.abs(u) <= g, -math.log(2.0), -np.inf)
        out = np.sum(terms - np.log(g), axis=-1)
        return float(out) if out.ndim == 0 else out

    def grad_log_density(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        g = self.gammas
        if self.family == "gaussian":
            return -u / g**2
        if self.family == "cauchy":
            return -2.0 * u / (g**2 + u**2)
        raise UnsupportedFamilyError("uniform prior has no usable gradient")

    def to_dict(self) -> dict:
        return {"family": self.family, "scales": self.scales.to_dict(), "offset": self.offset}
