"""Information operators: scalar functionals of a series state.

Every supported functional has the form

    value(u) = lin . u + const - quad * (val . u + offset) ** 2

where ``lin`` and ``val`` are rows of basis (derivative) values at the
evaluation point.  Linear kinds have ``quad = 0``; the Painleve residual
``x''(t) - x(t)**2`` has ``quad = 1``.  Compiling an operator against a basis
stacks these rows so values and Jacobians are evaluated for a whole particle
ensemble at once.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .chebbasis import BasisSet, SeriesState

__all__ = [
    "Functional",
    "InformationOperator",
    "InequalityConstraint",
    "CompiledOperator",
    "ThresholdGradientError",
    "eval_functional",
    "jacobian_row",
    "residual",
    "residual_norm_and_grad",
    "check_inequalities",
    "painleve_operator",
    "poisson_design",
    "poisson_operator",
]

KINDS = ("point", "deriv", "painleve", "pde_interior", "neumann")
LINEAR_KINDS = ("point", "deriv", "pde_interior", "neumann")
DEFAULT_LAMBDA_MAX = 1e6


class ThresholdGradientError(ValueError):
    """Gradient requested where the threshold map is active."""


@dataclass(frozen=True)
class Functional:
    """A scalar functional of ``x`` evaluated at ``point``.

    kind
        ``"point"``: ``x(t)``; ``"deriv"``: a derivative of ``x`` (``order`` is
        1 or 2 in 1D, a multi-index in 2D); ``"painleve"``: ``x''(t) - x(t)**2``;
        ``"pde_interior"``: ``-kappa * laplacian(x)(t)``; ``"neumann"``:
        ``sign * dx/dt_axis (t)``.
    """

    kind: str
    point: tuple
    order: tuple | int = 0
    kappa: float = 1.0
    axis: int = 0
    sign: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}")
        pt = tuple(float(v) for v in np.atleast_1d(self.point))
        object.__setattr__(self, "point", pt)
        if isinstance(self.order, (list, tuple)):
            object.__setattr__(self, "order", tuple(int(o) for o in self.order))
        if self.kind == "pde_interior" and self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.kind == "neumann" and self.sign not in (1.0, -1.0, 1, -1):
            raise ValueError("neumann sign must be +1 or -1")

    @property
    def is_linear(self) -> bool:
        return self.kind in LINEAR_KINDS

    # factories -------------------------------------------------------
    @classmethod
    def point_eval(cls, t) -> "Functional":
        return cls("point", t)

    @classmethod
    def deriv_eval(cls, t, order) -> "Functional":
        return cls("deriv", t, order=order)

    @classmethod
    def painleve(cls, t) -> "Functional":
        return cls("painleve", t)

    @classmethod
    def pde_interior(cls, t, kappa: float = 1.0) -> "Functional":
        return cls("pde_interior", t, kappa=kappa)

    @classmethod
    def neumann(cls, t, axis: int, sign: float = 1.0) -> "Functional":
        return cls("neumann", t, axis=axis, sign=float(sign))

    # rows ------------------------------------------------------------
    def _where(self, basis: BasisSet):
        pt = self.point[0] if basis.dimension == 1 else self.point
        if len(self.point) != basis.dimension:
            raise ValueError(f"point {self.point} has wrong dimension for basis")
        if not bool(np.all(basis.domain_map.contains(np.array(pt)))):
            raise ValueError(f"evaluation point {self.point} outside the domain")
        return np.array([pt]) if basis.dimension == 1 else np.array([pt])

    def _first_deriv_order(self, basis: BasisSet):
        if basis.dimension == 1:
            return 1
        o = [0, 0]
        o[self.axis] = 1
        return tuple(o)

    def rows(self, basis: BasisSet, offset: float = 0.0):
        """``(lin, const, quad, val)`` describing this functional on ``basis``."""
        pts = self._where(basis)
        zero = np.zeros(basis.size)
        if self.kind == "point":
            return basis.design(pts)[0], offset, 0.0, zero
        if self.kind == "deriv":
            order = self.order
            if np.sum(order) == 0:
                return basis.design(pts)[0], offset, 0.0, zero
            return basis.design(pts, order)[0], 0.0, 0.0, zero
        if self.kind == "pde_interior":
            return -self.kappa * basis.design(pts, "laplacian")[0], 0.0, 0.0, zero
        if self.kind == "neumann":
            return self.sign * basis.design(pts, self._first_deriv_order(basis))[0], 0.0, 0.0, zero
        if basis.dimension != 1:
            raise ValueError("the Painleve residual is defined for 1D bases only")
        return basis.design(pts, 2)[0], 0.0, 1.0, basis.design(pts)[0]

    def derivative_terms(self, dim: int):
        """Linear functional as ``[(coef, multi_index), ...]`` of derivative evaluations."""
        if not self.is_linear:
            raise ValueError(f"functional kind {self.kind!r} is not linear")
        zero = (0,) * dim
        if self.kind == "point":
            return [(1.0, zero)]
        if self.kind == "deriv":
            if dim == 1:
                return [(1.0, (int(np.sum(self.order)),))]
            return [(1.0, tuple(self.order))]
        if self.kind == "pde_interior":
            terms = []
            for a in range(dim):
                mi = [0] * dim
                mi[a] = 2
                terms.append((-self.kappa, tuple(mi)))
            return terms
        mi = [0] * dim
        mi[self.axis] = 1
        return [(self.sign, tuple(mi))]

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "point": list(self.point)}
        if self.kind == "deriv":
            d["order"] = list(self.order) if isinstance(self.order, tuple) else self.order
        if self.kind == "pde_interior":
            d["kappa"] = self.kappa
        if self.kind == "neumann":
            d["axis"] = self.axis
            d["sign"] = self.sign
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Functional":
        kw = {k: d[k] for k in ("order", "kappa", "axis", "sign") if k in d}
        if isinstance(kw.get("order"), list):
            kw["order"] = tuple(kw["order"])
        return cls(d["kind"], tuple(d["point"]), **kw)


@dataclass(frozen=True)
class InequalityConstraint:
    """``functional(x) <= 0`` (``direction="le"``) or ``>= 0`` (``"ge"``)."""

    functional: Functional
    direction: str = "le"

    def __post_init__(self):
        if self.direction not in ("le", "ge"):
            raise ValueError("direction must be 'le' or 'ge'")


@dataclass(frozen=True)
class InformationOperator:
    """Ordered functionals with observed values ``a`` and optional threshold."""

    functionals: tuple
    observed: np.ndarray
    threshold: float | None = None

    def __post_init__(self):
        fs = tuple(self.functionals)
        a = np.array(self.observed, dtype=float).reshape(-1)
        if len(fs) != a.size:
            raise ValueError(f"{len(fs)} functionals but {a.size} observed values")
        if self.threshold is not None and self.threshold <= 0:
            raise ValueError("threshold must be positive")
        a.setflags(write=False)
        object.__setattr__(self, "functionals", fs)
        object.__setattr__(self, "observed", a)

    def __len__(self) -> int:
        return len(self.functionals)

    @property
    def is_linear(self) -> bool:
        return all(f.is_linear for f in self.functionals)

    def with_observed(self, a) -> "InformationOperator":
        return InformationOperator(self.functionals, a, self.threshold)

    def compile(self, basis: BasisSet, offset: float = 0.0) -> "CompiledOperator":
        return CompiledOperator.build(self, basis, offset)

    def fingerprint(self) -> str:
        """Stable hash of the functionals and observed values."""
        blob = json.dumps(
            {"f": [f.to_dict() for f in self.functionals], "a": self.observed.tolist()},
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {
            "functionals": [f.to_dict() for f in self.functionals],
            "observed": self.observed.tolist(),
            "threshold": self.threshold,
        }


@dataclass(frozen=True)
class CompiledOperator:
    """Row-stacked form of an operator on a fixed basis; vectorised over ensembles."""

    lin: np.ndarray
    const: np.ndarray
    quad: np.ndarray
    val: np.ndarray
    offset: float
    observed: np.ndarray
    threshold: float | None
    nonlinear: bool = field(default=False)

    @classmethod
    def build(cls, op: InformationOperator, basis: BasisSet, offset: float = 0.0):
        d = basis.size
        n = len(op)
        lin = np.zeros((n, d))
        val = np.zeros((n, d))
        const = np.zeros(n)
        quad = np.zeros(n)
        for i, f in enumerate(op.functionals):
            lin[i], const[i], quad[i], val[i] = f.rows(basis, offset)
        return cls(lin, const, quad, val, float(offset), op.observed.copy(), op.threshold,
                   bool(np.any(quad)))

    @property
    def n(self) -> int:
        return self.lin.shape[0]

    def values(self, u) -> np.ndarray:
        """Raw ``A(x)`` for coefficient array(s) ``u`` of shape (..., d)."""
        out = u @ self.lin.T + self.const
        if self.nonlinear:
            xv = u @ self.val.T + self.offset
            out = out - self.quad * xv**2
        return out

    def jacobian(self, u) -> np.ndarray:
        """``dA/du`` with shape (..., n, d)."""
        u = np.asarray(u, dtype=float)
        if not self.nonlinear:
            return np.broadcast_to(self.lin, u.shape[:-1] + self.lin.shape)
        xv = u @ self.val.T + self.offset
        return self.lin - 2.0 * (self.quad * xv)[..., None] * self.val

    def vjp(self, u, w) -> np.ndarray:
        """``w @ dA/du`` without forming the Jacobian."""
        out = w @ self.lin
        if self.nonlinear:
            xv = np.asarray(u, dtype=float) @ self.val.T + self.offset
            out = out - 2.0 * (w * self.quad * xv) @ self.val
        return out

    def thresholded(self, values) -> tuple[np.ndarray, np.ndarray]:
        """Threshold map applied to ``A(x)``; also returns the active mask."""
        if self.threshold is None or self.n == 0:
            return values, np.zeros(values.shape[:-1], dtype=bool)
        norm = np.linalg.norm(values, axis=-1)
        active = norm > self.threshold
        scale = np.where(active, self.threshold / np.where(active, norm, 1.0), 1.0)
        return values * scale[..., None], active

    def residual(self, u) -> np.ndarray:
        vals, _ = self.thresholded(self.values(u))
        return vals - self.observed

    def residual_norm(self, u) -> np.ndarray:
        return np.linalg.norm(self.residual(u), axis=-1)

    def residual_and_grad_sq(self, u):
        """``(res, grad of 0.5*||res||^2)``; raises if the threshold is active."""
        vals = self.values(u)
        _, active = self.thresholded(vals)
        if np.any(active):
            raise ThresholdGradientError("threshold map active; gradient unavailable")
        res = vals - self.observed
        return res, self.vjp(u, res)


def eval_functional(f: Functional, x: SeriesState) -> float:
    lin, const, quad, val = f.rows(x.basis, x.offset)
    u = x.coefficients
    return float(lin @ u + const - quad * (val @ u + x.offset) ** 2)


def jacobian_row(f: Functional, x: SeriesState) -> np.ndarray:
    lin, _, quad, val = f.rows(x.basis, x.offset)
    return lin - 2.0 * quad * (val @ x.coefficients + x.offset) * val


def residual(A: InformationOperator, x: SeriesState) -> np.ndarray:
    """``A~(x) - a`` with the threshold map applied when configured."""
    if len(A) == 0:
        return np.zeros(0)
    return A.compile(x.basis, x.offset).residual(x.coefficients)


def residual_norm_and_grad(A: InformationOperator, x: SeriesState):
    """``(||A(x) - a||, d/du ||A(x) - a||)``; gradient 0 at an exact fit."""
    if len(A) == 0:
        return 0.0, np.zeros(x.basis.size)
    comp = A.compile(x.basis, x.offset)
    res, g = comp.residual_and_grad_sq(x.coefficients)
    r = float(np.linalg.norm(res))
    if r == 0.0:
        return 0.0, np.zeros_like(g)
    return r, g / r


def check_inequalities(cs: Sequence[InequalityConstraint], x: SeriesState) -> bool:
    for c in cs:
        v = eval_functional(c.functional, x)
        if c.direction == "le" and not v <= 0.0:
            return False
        if c.direction == "ge" and not v >= 0.0:
            return False
    return True


class CompiledConstraints:
    """Vectorised inequality check for an ensemble."""

    def __init__(self, cs: Sequence[InequalityConstraint], basis: BasisSet, offset: float = 0.0):
        self.empty = len(cs) == 0
        if self.empty:
            return
        op = InformationOperator(tuple(c.functional for c in cs), np.zeros(len(cs)))
        self.comp = op.compile(basis, offset)
        self.sign = np.array([1.0 if c.direction == "le" else -1.0 for c in cs])

    def satisfied(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.empty:
            return np.ones(u.shape[:-1], dtype=bool)
        return np.all(self.sign * self.comp.values(u) <= 0.0, axis=-1)


# ---------------------------------------------------------------------------
# experiment designs


def painleve_operator(m: int, t_max: float = 10.0, threshold: float | None = DEFAULT_LAMBDA_MAX):
    """ODE residuals at ``m`` equispaced points plus the two boundary values."""
    ts = np.linspace(0.0, t_max, m)
    fs = [Functional.painleve(t) for t in ts]
    fs += [Functional.point_eval(0.0), Functional.point_eval(t_max)]
    a = np.concatenate([-ts, [0.0, np.sqrt(t_max)]])
    return InformationOperator(tuple(fs), a, threshold)


def painleve_negative_slope() -> InequalityConstraint:
    """``x'(0) <= 0``, selecting the negative solution branch."""
    return InequalityConstraint(Functional.deriv_eval(0.0, 1), "le")


def poisson_design(n: int):
    """Interior, Dirichlet and Neumann points for ``n`` in {16, 25, 36}.

    Interior points sit on a centred square grid; Dirichlet points are
    equispaced along ``t_2 = 0`` and ``t_2 = 1`` (corners included); Neumann
    points are equispaced in the open sides ``t_1 = 0`` and ``t_1 = 1``.
    ``n = 16`` gives 4 interior, 8 Dirichlet and 4 Neumann points.
    """
    layouts = {16: (2, 4, 2), 25: (3, 5, 3), 36: (4, 6, 4)}
    if n not in layouts:
        raise ValueError(f"no Poisson design for n={n}; choose 16, 25 or 36")
    k_int, k_dir, k_neu = layouts[n]
    g = (np.arange(k_int) + 1.0) / (k_int + 1.0)
    interior = np.array([(a, b) for a in g for b in g])
    e = np.linspace(0.0, 1.0, k_dir)
    dirichlet = np.array([(s, 0.0) for s in e] + [(s, 1.0) for s in e])
    ne = (np.arange(k_neu) + 1.0) / (k_neu + 1.0)
    neumann = np.array([(0.0, s) for s in ne] + [(1.0, s) for s in ne])
    return interior, dirichlet, neumann


def poisson_operator(n: int = 16, threshold: float | None = DEFAULT_LAMBDA_MAX):
    """Laplace interior, Dirichlet ``x=t_1`` / ``x=1-t_1`` and zero-flux sides."""
    interior, dirichlet, neumann = poisson_design(n)
    fs = [Functional.pde_interior(p) for p in interior]
    a = [0.0] * len(interior)
    for p in dirichlet:
        fs.append(Functional.point_eval(p))
        a.append(p[0] if p[1] == 0.0 else 1.0 - p[0])
    for p in neumann:
        fs.append(Functional.neumann(p, axis=0, sign=1.0))
        a.append(0.0)
    return InformationOperator(tuple(fs), np.array(a), threshold)
