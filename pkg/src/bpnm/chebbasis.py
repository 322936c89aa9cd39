"""Normalised Chebyshev bases on affine-mapped boxes.

Basis functions are first-kind Chebyshev polynomials scaled to be
orthonormal under the weight ``1/sqrt(1 - s**2)`` on the reference interval:
``C_0 = T_0 / sqrt(pi)`` and ``C_n = sqrt(2/pi) T_n`` for ``n >= 1``.  In two
dimensions a basis function is the tensor product ``C_j(s_1) C_k(s_2)`` and
the index set is the triangle ``j + k <= N_C``, ordered by total degree and
then lexicographically.

All derivatives are analytic: ``T_n' = n U_{n-1}`` and the second derivative
is obtained by differentiating the second-kind recurrence.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "OutsideDomainWarning",
    "UnsupportedOrderError",
    "DomainMap",
    "BasisSet",
    "SeriesState",
    "chebyshev_table",
    "eval_basis",
    "eval_basis_deriv",
    "eval_series",
    "project",
]

_C0 = 1.0 / math.sqrt(math.pi)
_CN = math.sqrt(2.0 / math.pi)


class OutsideDomainWarning(UserWarning):
    """Raised (as a warning) when a basis is evaluated outside its domain."""


class UnsupportedOrderError(ValueError):
    """Derivative order above two was requested."""


def _norm_constants(degree: int) -> np.ndarray:
    c = np.full(degree + 1, _CN)
    c[0] = _C0
    return c


def chebyshev_table(s, degree: int, order: int = 0) -> np.ndarray:
    """Derivative of order ``order`` of ``T_0..T_degree`` at reference points.

    Returns an array of shape ``s.shape + (degree + 1,)``.  Orders 0, 1, 2
    are supported; ``T_n'`` uses ``n U_{n-1}`` and ``T_n''`` uses ``n U_{n-1}'``.
    """
    if order not in (0, 1, 2):
        raise UnsupportedOrderError(f"derivative order {order} not supported (max 2)")
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape + (degree + 1,))
    if order == 0:
        out[..., 0] = 1.0
        if degree >= 1:
            out[..., 1] = s
        for n in range(2, degree + 1):
            out[..., n] = 2.0 * s * out[..., n - 1] - out[..., n - 2]
        return out
    # second-kind polynomials U_0..U_{degree-1} and their derivatives
    u = np.zeros(s.shape + (max(degree, 1),))
    du = np.zeros_like(u)
    u[..., 0] = 1.0
    if degree >= 2:
        u[..., 1] = 2.0 * s
        du[..., 1] = 2.0
    for k in range(2, degree):
        u[..., k] = 2.0 * s * u[..., k - 1] - u[..., k - 2]
        du[..., k] = 2.0 * u[..., k - 1] + 2.0 * s * du[..., k - 1] - du[..., k - 2]
    n = np.arange(1, degree + 1, dtype=float)
    src = u if order == 1 else du
    out[..., 1:] = n * src[..., :degree]
    return out


@dataclass(frozen=True)
class DomainMap:
    """Affine map from the box ``[lower, upper]`` onto ``[-1, 1]^d``."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or len(lo) not in (1, 2):
            raise ValueError("domain bounds must be 1D or 2D and of equal length")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError(f"need lower < upper on every axis, got {lo}, {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def scale(self) -> np.ndarray:
        """Chain-rule factor ``ds/dt = 2 / (upper - lower)`` per axis."""
        return 2.0 / (np.asarray(self.upper) - np.asarray(self.lower))

    def to_reference(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        if self.dim == 1 and (t.ndim == 0 or t.shape[-1] != 1):
            return (2.0 * t - (lo[0] + hi[0])) / (hi[0] - lo[0])
        return (2.0 * t - (lo + hi)) / (hi - lo)

    def contains(self, t, tol: float = 1e-12) -> np.ndarray:
        s = self.to_reference(t)
        inside = np.abs(s) <= 1.0 + tol
        if self.dim == 2:
            inside = np.all(inside, axis=-1)
        return inside


def _as_points(t, dim: int) -> np.ndarray:
    """Points as an array of shape (npts,) in 1D or (npts, 2) in 2D."""
    t = np.asarray(t, dtype=float)
    if dim == 1:
        return t.reshape(-1)
    return t.reshape(-1, 2)


@dataclass(frozen=True)
class BasisSet:
    """Ordered Chebyshev basis on a (1D or 2D) box.

    ``indices`` are integer degrees in 1D and ``(j, k)`` pairs in 2D.
    """

    indices: tuple
    domain_map: DomainMap
    _lookup: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        idx = tuple(self.indices)
        if self.domain_map.dim == 2:
            idx = tuple((int(j), int(k)) for j, k in idx)
        else:
            idx = tuple(int(i) for i in idx)
        if len(set(idx)) != len(idx):
            raise ValueError("basis indices must be unique")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "_lookup", {v: i for i, v in enumerate(idx)})

    @classmethod
    def line(cls, degree: int, lower: float = -1.0, upper: float = 1.0) -> "BasisSet":
        """Degrees ``0..degree`` on ``[lower, upper]``."""
        return cls(tuple(range(degree + 1)), DomainMap((lower,), (upper,)))

    @classmethod
    def triangle(cls, max_degree: int, lower=(0.0, 0.0), upper=(1.0, 1.0)) -> "BasisSet":
        """Tensor products ``C_j C_k`` with ``j + k <= max_degree``."""
        idx = [(j, d - j) for d in range(max_degree + 1) for j in range(d + 1)]
        return cls(tuple(idx), DomainMap(tuple(lower), tuple(upper)))

    @property
    def dimension(self) -> int:
        return self.domain_map.dim

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def max_degree(self) -> int:
        if self.dimension == 1:
            return max(self.indices)
        return max(max(j, k) for j, k in self.indices)

    def position(self, index) -> int:
        key = tuple(index) if self.dimension == 2 else int(index)
        try:
            return self._lookup[key]
        except KeyError:
            raise IndexError(f"basis index {index!r} not in basis") from None

    def truncate(self, n: int) -> "BasisSet":
        """Basis made of the first ``n + 1`` functions."""
        return BasisSet(self.indices[: n + 1], self.domain_map)

    def _check_domain(self, pts):
        if not np.all(self.domain_map.contains(pts)):
            warnings.warn("basis evaluated outside its domain", OutsideDomainWarning, stacklevel=3)

    def design(self, t, order=0) -> np.ndarray:
        """Matrix of basis (derivative) values, shape ``(npts, size)``.

        ``order`` is 0, 1 or 2 in 1D, a pair ``(a, b)`` with ``a + b <= 2`` in
        2D, or the string ``"laplacian"`` (either dimension).
        """
        pts = _as_points(t, self.dimension)
        self._check_domain(pts)
        if isinstance(order, str):
            if order != "laplacian":
                raise ValueError(f"unknown derivative spec {order!r}")
            if self.dimension == 1:
                return self.design(pts, 2)
            return self.design(pts, (2, 0)) + self.design(pts, (0, 2))
        s = self.domain_map.to_reference(pts)
        scale = self.domain_map.scale
        deg = self.max_degree
        if self.dimension == 1:
            order = int(np.sum(order))
            tab = chebyshev_table(s, deg, order) * _norm_constants(deg) * scale[0] ** order
            return tab[:, list(self.indices)]
        if np.ndim(order) == 0:
            if int(order) != 0:
                raise ValueError("2D derivatives need a multi-index (a, b)")
            order = (0, 0)
        a, b = (int(o) for o in order)
        if a + b > 2 or a < 0 or b < 0:
            raise UnsupportedOrderError(f"derivative order {order} not supported (total max 2)")
        norm = _norm_constants(deg)
        t1 = chebyshev_table(s[:, 0], deg, a) * norm * scale[0] ** a
        t2 = chebyshev_table(s[:, 1], deg, b) * norm * scale[1] ** b
        j = np.fromiter((i[0] for i in self.indices), int)
        k = np.fromiter((i[1] for i in self.indices), int)
        return t1[:, j] * t2[:, k]


def eval_basis(b: BasisSet, index, t) -> float:
    """Value of a single normalised basis function at one point."""
    col = b.position(index)
    return float(b.design(t)[0, col])


def eval_basis_deriv(b: BasisSet, index, t, order) -> float:
    """Analytic derivative of a single basis function at one point."""
    if isinstance(order, (int, np.integer)) and order > 2:
        raise UnsupportedOrderError(f"derivative order {order} not supported (max 2)")
    col = b.position(index)
    return float(b.design(t, order)[0, col])


@dataclass(frozen=True)
class SeriesState:
    """Truncated expansion ``x = offset + sum_i u_i phi_i``.

    ``offset`` is a constant function; all experiments use 0 or 1.
    """

    basis: BasisSet
    coefficients: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        u = np.array(self.coefficients, dtype=float).reshape(-1)
        if u.size != self.basis.size:
            raise ValueError(f"expected {self.basis.size} coefficients, got {u.size}")
        u.setflags(write=False)
        object.__setattr__(self, "coefficients", u)
        object.__setattr__(self, "offset", float(self.offset))

    def __call__(self, t, order=0) -> np.ndarray:
        vals = self.basis.design(t, order) @ self.coefficients
        if order == 0 or (not isinstance(order, str) and np.sum(order) == 0):
            vals = vals + self.offset
        return vals


def eval_series(x: SeriesState, t) -> float | np.ndarray:
    """``x_0(t) + sum_i u_i phi_i(t)``; scalar for a single point."""
    vals = x(t)
    return float(vals[0]) if vals.size == 1 else vals


def project(x: SeriesState, n: int) -> SeriesState:
    """Keep the first ``n + 1`` coefficients (the projection ``P_n``)."""
    if not 0 <= n <= x.basis.size - 1:
        raise ValueError(f"projection level {n} outside 0..{x.basis.size - 1}")
    return SeriesState(x.basis.truncate(n), x.coefficients[: n + 1], x.offset)


def points_grid(lower: Sequence[float], upper: Sequence[float], n: int) -> np.ndarray:
    """Tensor grid of ``n`` points per axis, flattened to shape (n**d, d)."""
    axes = [np.linspace(l, u, n) for l, u in zip(lower, upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)
