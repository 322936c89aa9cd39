"""Numerical disintegration by tempering a relaxed constraint.

The relaxed target on coefficients is

    pi_delta(u)  propto  phi(||A(x_u) - a|| / delta) * q(u)

with ``q`` the series-prior density.  Two samplers drive ``delta`` down a
decreasing schedule: sequential Monte Carlo (re-weight, re-sample, move) and
parallel tempering with adjacent swaps.  Both use a diagonally preconditioned
MALA kernel.

Random numbers come from counter-based streams keyed by
``(seed, stage, rung, chunk)``.  Particles are processed in chunks of a fixed
size, so the worker count only changes scheduling and never the output.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .infoops import CompiledConstraints, InequalityConstraint, InformationOperator
from .seriesprior import SeriesPrior, make_rng

__all__ = [
    "RelaxationKernel",
    "TemperatureSchedule",
    "MalaConfig",
    "ParticleEnsemble",
    "RungRecord",
    "SMCResult",
    "PTResult",
    "RelaxedTarget",
    "SamplerFailure",
    "UnsupportedConfigurationError",
    "relaxed_log_target",
    "mala_kernel",
    "mala_log_accept",
    "smc_nd",
    "pt_nd",
    "pt_swap_log_ratio",
    "moment_ratio_constant",
    "effective_sample_size",
    "batch_means_se",
]

# stream identifiers
_SMC_INIT, _SMC_MOVE, _SMC_RESAMPLE, _PT_INIT, _PT_MOVE, _PT_SWAP = range(6)


class UnsupportedConfigurationError(ValueError):
    """The requested kernel needs a gradient that does not exist."""


class SamplerFailure(RuntimeError):
    def __init__(self, msg: str, rung: int):
        super().__init__(f"{msg} (temperature index {rung})")
        self.rung = rung


@dataclass(frozen=True)
class RelaxationKernel:
    """``phi(r) = exp(-r**2 / 2)`` (``"sqexp"``) or ``1[r < 1]`` (``"indicator"``)."""

    kind: str = "sqexp"

    def __post_init__(self):
        if self.kind not in ("sqexp", "indicator"):
            raise ValueError(f"unknown relaxation kernel {self.kind!r}")

    @classmethod
    def sqexp(cls):
        return cls("sqexp")

    @classmethod
    def indicator(cls):
        return cls("indicator")

    @property
    def differentiable(self) -> bool:
        return self.kind == "sqexp"

    def log_phi(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == "sqexp":
            return -0.5 * r**2
        return np.where(r < 1.0, 0.0, -np.inf)

    def __call__(self, r):
        return np.exp(self.log_phi(r))


@dataclass(frozen=True)
class TemperatureSchedule:
    """Strictly decreasing positive bandwidths ``delta_1 > ... > delta_m``."""

    deltas: tuple
    spacing: str = "explicit"

    def __post_init__(self):
        d = tuple(float(v) for v in np.atleast_1d(self.deltas))
        if len(d) == 0:
            raise ValueError("schedule needs at least one temperature")
        if not all(v > 0 and math.isfinite(v) for v in d):
            raise ValueError("schedule bandwidths must be positive and finite")
        if any(b >= a for a, b in zip(d[:-1], d[1:])):
            raise ValueError("schedule bandwidths must be strictly decreasing")
        object.__setattr__(self, "deltas", d)

    @classmethod
    def log_uniform(cls, start: float, stop: float, m: int) -> "TemperatureSchedule":
        if m < 1:
            raise ValueError("m must be at least 1")
        if m == 1:
            return cls((float(stop),), "log-uniform")
        return cls(tuple(np.geomspace(start, stop, m)), "log-uniform")

    @classmethod
    def explicit(cls, deltas) -> "TemperatureSchedule":
        return cls(tuple(deltas), "explicit")

    def __len__(self) -> int:
        return len(self.deltas)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.deltas)

    def bisect(self) -> "TemperatureSchedule":
        """Insert the geometric midpoint between each adjacent pair."""
        d = self.array
        mids = np.sqrt(d[:-1] * d[1:])
        out = np.empty(2 * d.size - 1)
        out[0::2] = d
        out[1::2] = mids
        return TemperatureSchedule(tuple(out), self.spacing)

    def to_dict(self) -> dict:
        return {"spacing": self.spacing, "deltas": list(self.deltas)}


@dataclass(frozen=True)
class MalaConfig:
    """Preconditioned MALA settings.

    tau0
        Base step.  A number gives ``tau_i = tau0 * min(1, delta_i**2)``;
        ``"auto"`` sets ``tau_i = scale / lambda_max`` where ``lambda_max`` is
        the largest eigenvalue of the preconditioned Hessian of ``-log pi_i``
        at the prior mean.
    taus
        Explicit per-temperature steps; overrides ``tau0``.
    steps
        MALA iterations per kernel application.
    preconditioner
        ``"gamma"`` uses ``diag(gamma)``; ``"gamma2"`` uses ``diag(gamma**2)``,
        which matches the prior covariance for Gaussian coefficients.
    """

    tau0: float | str = 1.0
    steps: int = 10
    taus: tuple | None = None
    preconditioner: str = "gamma"
    scale: float = 0.5
    chunk: int = 1024

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        if self.preconditioner not in ("gamma", "gamma2"):
            raise ValueError("preconditioner must be 'gamma' or 'gamma2'")
        if isinstance(self.tau0, str):
            if self.tau0 != "auto":
                raise ValueError("tau0 must be positive or 'auto'")
        elif not self.tau0 > 0:
            raise ValueError("tau0 must be positive")
        if self.taus is not None:
            taus = tuple(float(t) for t in self.taus)
            if not all(t > 0 for t in taus):
                raise ValueError("step sizes must be positive")
            object.__setattr__(self, "taus", taus)
        if self.chunk < 1:
            raise ValueError("chunk must be positive")

    def precond(self, prior: SeriesPrior) -> np.ndarray:
        g = prior.gammas
        out = g if self.preconditioner == "gamma" else g**2
        if not np.all(out > 0):
            raise ValueError("preconditioner entries must be positive")
        return out

    def step_sizes(self, target: "RelaxedTarget", deltas) -> np.ndarray:
        deltas = np.asarray(deltas, dtype=float)
        if self.taus is not None:
            if len(self.taus) != deltas.size:
                raise ValueError("need one step size per temperature")
            return np.asarray(self.taus)
        if self.tau0 == "auto":
            return np.array([self.scale / target.curvature(d, self.precond(target.prior)) for d in deltas])
        return self.tau0 * np.minimum(1.0, deltas**2)


@dataclass
class ParticleEnsemble:
    states: np.ndarray
    weights: np.ndarray
    temperature_index: int
    ess: list = field(default_factory=list)
    acceptance: list = field(default_factory=list)
    failed: bool = False
    failed_at: int | None = None

    def __post_init__(self):
        if self.states.ndim != 2 or self.states.shape[0] < 1:
            raise ValueError("states must have shape (P, d) with P >= 1")

    @property
    def size(self) -> int:
        return self.states.shape[0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.states

    def cov(self) -> np.ndarray:
        c = self.states - self.mean()
        return (c * self.weights[:, None]).T @ c


@dataclass(frozen=True)
class RungRecord:
    """Summary of the ensemble targeting one bandwidth."""

    index: int
    delta: float
    ess: float
    acceptance: float
    mean_sq_residual: float
    sq_residual_se: float
    potential_min: float
    potential_max: float
    n_survivors: int | None = None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class SMCResult:
    ensemble: ParticleEnsemble
    history: list
    schedule: TemperatureSchedule
    n_obs: int
    fingerprint: str
    relaxation: str

    @property
    def failed(self) -> bool:
        return self.ensemble.failed


@dataclass
class PTResult:
    """Cold-chain output of (possibly replicated) parallel tempering.

    ``chains`` has shape ``(kept iterations, replicas, d)``.
    """

    chains: np.ndarray
    states: np.ndarray
    swap_attempts: np.ndarray
    swap_accepts: np.ndarray
    acceptance: np.ndarray
    history: list
    schedule: TemperatureSchedule
    n_obs: int
    fingerprint: str
    relaxation: str = "sqexp"

    @property
    def trace(self) -> np.ndarray:
        """Cold-chain samples flattened to ``(n, d)``, iteration-major."""
        return self.chains.reshape(-1, self.chains.shape[-1])

    @property
    def swap_rate(self) -> np.ndarray:
        return self.swap_accepts / np.maximum(self.swap_attempts, 1)

    def mean(self) -> np.ndarray:
        return self.trace.mean(axis=0)

    def std(self) -> np.ndarray:
        return self.trace.std(axis=0, ddof=1)

    def mean_se(self) -> np.ndarray:
        """Between-replica standard error, or batch means for a single ladder."""
        return _trace_se(self.chains)


# ---------------------------------------------------------------------------
# target


class RelaxedTarget:
    """Vectorised relaxed log density and MALA drift over coefficient arrays."""

    def __init__(self, prior: SeriesPrior, A: InformationOperator, phi: RelaxationKernel,
                 constraints: Sequence[InequalityConstraint] = ()):
        self.prior = prior
        self.A = A
        self.phi = phi
        self.n_obs = len(A)
        self.comp = A.compile(prior.basis, prior.offset) if len(A) else None
        self.cons = CompiledConstraints(list(constraints), prior.basis, prior.offset)
        g = prior.gammas
        self._g2 = g**2
        self._inv_g2 = 1.0 / g**2
        if prior.family == "gaussian":
            self._lp_const = float(-np.sum(np.log(g)) - 0.5 * g.size * math.log(2 * math.pi))
        elif prior.family == "cauchy":
            self._lp_const = float(np.sum(np.log(g)) - g.size * math.log(math.pi))
        else:
            self._lp_const = 0.0

    def residual(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.comp is None:
            return np.zeros(u.shape[:-1] + (0,))
        return self.comp.residual(u)

    def residual_norm(self, u) -> np.ndarray:
        return np.linalg.norm(self.residual(u), axis=-1)

    def log_density(self, u, delta) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        lp = np.asarray(self.prior.log_density(u), dtype=float)
        r = self.residual_norm(u)
        out = self.phi.log_phi(r / delta) + lp
        return np.where(self.cons.satisfied(u), out, -np.inf)

    def evaluate(self, u, delta, need_grad: bool = True):
        """``(log pi, drift gradient, squared residual norm)``.

        Where the threshold map is active the residual term is locally flat
        in direction but not differentiable in closed form; there the drift
        falls back to the prior gradient alone.  The MH correction uses the
        same drift for forward and reverse moves, so the kernel stays exact.
        """
        u = np.asarray(u, dtype=float)
        lp, gp = self._prior_terms(u, need_grad)
        delta = np.asarray(delta, dtype=float)
        if self.comp is None:
            r2 = np.zeros(u.shape[:-1])
            logp = lp
            gl = 0.0
        else:
            raw = self.comp.values(u) - self.comp.observed
            if self.comp.threshold is None:
                active = None
                r2 = np.einsum("...i,...i->...", raw, raw)
            else:
                tv, active = self.comp.thresholded(raw + self.comp.observed)
                res = tv - self.comp.observed
                r2 = np.einsum("...i,...i->...", res, res)
            if self.phi.kind == "sqexp":
                logp = lp - 0.5 * r2 / delta**2
            else:
                logp = lp + self.phi.log_phi(np.sqrt(r2) / delta)
            gl = 0.0
            if need_grad and self.phi.differentiable:
                gsq = self.comp.vjp(u, raw)
                gl = -gsq / (delta**2)[..., None] if delta.ndim else -gsq / delta**2
                if active is not None and active.any():
                    gl = np.where(active[..., None], 0.0, gl)
        if not self.cons.empty:
            logp = np.where(self.cons.satisfied(u), logp, -np.inf)
        if not need_grad:
            return logp, None, r2
        return logp, gp + gl, r2

    def _prior_terms(self, u, need_grad):
        fam = self.prior.family
        if fam == "gaussian":
            lp = -0.5 * ((u * u) @ self._inv_g2) + self._lp_const
            return lp, (-u * self._inv_g2 if need_grad else None)
        if fam == "cauchy":
            s = self._g2 + u * u
            lp = -np.sum(np.log(s), axis=-1) + self._lp_const
            return lp, (-2.0 * u / s if need_grad else None)
        lp = np.asarray(self.prior.log_density(u), dtype=float)
        return lp, (np.zeros_like(u) if need_grad else None)

    def curvature(self, delta: float, precond: np.ndarray) -> float:
        """Largest eigenvalue of the preconditioned Hessian of ``-log pi`` at the prior mean."""
        g = self.prior.gammas
        hp = (2.0 if self.prior.family == "cauchy" else 1.0) / g**2
        H = np.diag(hp)
        if self.comp is not None and self.phi.differentiable:
            J = self.comp.jacobian(np.zeros(self.prior.n_terms))
            H = H + J.T @ J / delta**2
        s = np.sqrt(precond)
        return float(np.linalg.eigvalsh(s[:, None] * H * s[None, :])[-1])


def relaxed_log_target(phi: RelaxationKernel, delta: float, A: InformationOperator, prior: SeriesPrior,
                       cs: Sequence[InequalityConstraint], u) -> float:
    """Unnormalised ``log phi(||A(x_u) - a|| / delta) + log q(u)``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    out = RelaxedTarget(prior, A, phi, cs).log_density(np.asarray(u, dtype=float), delta)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# MALA


def _log_q(to, frm, grad_frm, tau, G):
    """Log proposal density (up to a constant shared by both directions)."""
    mean = frm + (tau * G) * grad_frm
    return -np.sum((to - mean) ** 2 / (4.0 * tau * G), axis=-1)


def mala_log_accept(target: RelaxedTarget, delta, tau, G, u, v) -> np.ndarray:
    """Log MH ratio for a MALA move ``u -> v``."""
    lu, gu, _ = target.evaluate(u, delta)
    lv, gv, _ = target.evaluate(v, delta)
    tau = np.asarray(tau, dtype=float)
    t = tau[..., None] if tau.ndim else tau
    return lv - lu + _log_q(u, v, gv, t, G) - _log_q(v, u, gu, t, G)


def _check_gradient(target: RelaxedTarget):
    if target.prior.family == "uniform":
        raise UnsupportedConfigurationError("MALA needs a prior gradient; the uniform family has none")


def mala_kernel(target: RelaxedTarget, delta, tau, steps: int, u, rng, G: np.ndarray | None = None):
    """``steps`` preconditioned MALA iterations applied to every row of ``u``.

    ``delta`` and ``tau`` may be scalars or arrays matching ``u.shape[:-1]``
    (parallel tempering moves all chains at once).  Returns the final states
    and the number of accepted proposals per row.
    """
    _check_gradient(target)
    u = np.array(u, dtype=float)
    if u.ndim == 1:
        out, acc = mala_kernel(target, delta, tau, steps, u[None, :], rng, G)
        return out[0], int(acc[0])
    if G is None:
        G = target.prior.gammas
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise ValueError("step sizes must be positive")
    t = tau[..., None] if tau.ndim else tau
    tG = t * G
    noise_sd = np.sqrt(2.0 * tG)
    inv4 = 1.0 / (4.0 * tG)
    rng = make_rng(rng)
    logp, grad, _ = target.evaluate(u, delta)
    accepted = np.zeros(u.shape[:-1], dtype=np.int64)
    shape, rows = u.shape, u.shape[:-1]
    for _ in range(steps):
        z = rng.standard_normal(shape)
        logu = np.log(rng.random(rows))
        v = u + tG * grad + noise_sd * z
        lv, gv, _ = target.evaluate(v, delta)
        back = u - v - tG * gv
        # log q(u | v) - log q(v | u); the forward term is -|z|^2 / 2
        with np.errstate(invalid="ignore"):
            log_alpha = lv - logp - np.sum(back * back * inv4, axis=-1) + 0.5 * np.sum(z * z, axis=-1)
        acc = logu < log_alpha
        u[acc] = v[acc]
        logp[acc] = lv[acc]
        grad[acc] = gv[acc]
        accepted += acc
    return u, accepted


def _mala_chunks(target, delta, tau, steps, u, G, seed, key, chunk, workers):
    """Apply MALA chunk-wise with one stream per chunk."""
    P = u.shape[0]
    starts = list(range(0, P, chunk))

    def run(c):
        sl = slice(starts[c], starts[c] + chunk)
        return mala_kernel(target, delta, tau, steps, u[sl], make_rng(seed, *key, c), G)

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, range(len(starts))))
    else:
        parts = [run(c) for c in range(len(starts))]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


# ---------------------------------------------------------------------------
# diagnostics


def effective_sample_size(weights) -> float:
    w = np.asarray(weights, dtype=float)
    s = w.sum()
    if s <= 0:
        return 0.0
    w = w / s
    return float(1.0 / np.sum(w**2))


def batch_means_se(x, n_batches: int = 20) -> np.ndarray:
    """Batch-means standard error of the mean of a (correlated) trace along axis 0."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    b = max(1, min(n_batches, n))
    size = n // b
    if size < 1:
        return np.full(x.shape[1:], np.nan)
    means = x[: b * size].reshape((b, size) + x.shape[1:]).mean(axis=1)
    if b < 2:
        return np.full(x.shape[1:], np.nan)
    return means.std(axis=0, ddof=1) / math.sqrt(b)


def _init_from_prior(prior, cons, P, seed, stage, max_rounds: int = 1000):
    """Prior draws, restricted to the constraint set by rejection."""
    rng = make_rng(seed, stage)
    u = prior.sample_coefficients(rng, P)
    if cons.empty:
        return u
    ok = cons.satisfied(u)
    for _ in range(max_rounds):
        if ok.all():
            return u
        bad = np.flatnonzero(~ok)
        u[bad] = prior.sample_coefficients(rng, bad.size)
        ok[bad] = cons.satisfied(u[bad])
    raise SamplerFailure("could not draw prior samples inside the constraint set", 0)


# ---------------------------------------------------------------------------
# SMC


def smc_nd(prior: SeriesPrior, A: InformationOperator, phi: RelaxationKernel, schedule: TemperatureSchedule,
           P: int, cfg: MalaConfig, seed=0, constraints: Sequence[InequalityConstraint] = (),
           workers: int = 1, keep_states: bool = False) -> SMCResult:
    """Sequential Monte Carlo over the bandwidth schedule.

    Each iteration moves the particles with a kernel invariant for the
    current target, re-weights by ``phi(r / delta_i) / phi(r / delta_{i-1})``
    and re-samples.  The prior-level move is skipped (particles start as exact
    prior draws) and a final move at ``delta_m`` decorrelates the output.
    The indicator relaxation keeps particles inside the new bandwidth and
    redraws the others uniformly from those survivors.
    """
    if P < 2:
        raise ValueError("P must be at least 2")
    if phi.differentiable or cfg.steps:
        _check_gradient_if_moving(prior, cfg)
    target = RelaxedTarget(prior, A, phi, constraints)
    G = cfg.precond(prior)
    deltas = schedule.array
    taus = cfg.step_sizes(target, deltas)
    u = _init_from_prior(prior, target.cons, P, seed, _SMC_INIT)
    _, _, r2 = target.evaluate(u, deltas[0], need_grad=False)
    history: list[RungRecord] = []
    states: list[np.ndarray] = []
    ens = ParticleEnsemble(u, np.full(P, 1.0 / P), 0)
    prev = math.inf
    for i, d in enumerate(deltas):
        # move with a kernel invariant for the previous bandwidth
        acc_rate = float("nan")
        if i > 0 and cfg.steps:
            u, acc = _mala_chunks(target, prev, taus[i - 1], cfg.steps, u, G, seed, (_SMC_MOVE, i), cfg.chunk,
                                  workers)
            acc_rate = float(acc.sum()) / (P * cfg.steps)
            _, _, r2 = target.evaluate(u, d, need_grad=False)
        r = np.sqrt(r2)
        n_surv = None
        if phi.kind == "sqexp":
            logw = -0.5 * r2 * (1.0 / d**2 - (0.0 if math.isinf(prev) else 1.0 / prev**2))
            pot = np.exp(logw)
            if not np.any(pot > 0):
                ens = ParticleEnsemble(u, np.zeros(P), i, ens.ess, ens.acceptance, True, i)
                return SMCResult(ens, history, schedule, len(A), A.fingerprint(), phi.kind)
            w = np.exp(logw - logsumexp(logw))
            ess = effective_sample_size(w)
            idx = make_rng(seed, _SMC_RESAMPLE, i).choice(P, size=P, p=w)
        else:
            alive = r < d
            n_surv = int(alive.sum())
            pot = alive.astype(float)
            if n_surv == 0:
                ens = ParticleEnsemble(u, np.zeros(P), i, ens.ess, ens.acceptance, True, i)
                return SMCResult(ens, history, schedule, len(A), A.fingerprint(), phi.kind)
            ess = float(n_surv)
            surv = np.flatnonzero(alive)
            idx = np.arange(P)
            dead = np.flatnonzero(~alive)
            idx[dead] = surv[make_rng(seed, _SMC_RESAMPLE, i).integers(0, n_surv, dead.size)]
        w_est = pot / pot.sum() if phi.kind == "indicator" else w
        msr = float(w_est @ r2)
        se = float(math.sqrt(np.sum(w_est**2 * (r2 - msr) ** 2)))
        u = u[idx]
        r2 = r2[idx]
        ens.ess.append(ess)
        ens.acceptance.append(acc_rate)
        if i == len(deltas) - 1 and cfg.steps:
            u, acc = _mala_chunks(target, d, taus[i], cfg.steps, u, G, seed, (_SMC_MOVE, len(deltas)), cfg.chunk,
                                  workers)
            ens.acceptance.append(float(acc.sum()) / (P * cfg.steps))
        history.append(RungRecord(i, float(d), ess, acc_rate, msr, se, float(pot.min()), float(pot.max()), n_surv))
        if keep_states:
            states.append(u.copy())
        prev = d
    ens = ParticleEnsemble(u, np.full(P, 1.0 / P), len(deltas) - 1, ens.ess, ens.acceptance)
    res = SMCResult(ens, history, schedule, len(A), A.fingerprint(), phi.kind)
    if keep_states:
        res.states = states
    return res


def _check_gradient_if_moving(prior, cfg):
    if cfg.steps and prior.family == "uniform":
        raise UnsupportedConfigurationError("MALA needs a prior gradient; the uniform family has none")


# ---------------------------------------------------------------------------
# parallel tempering


def pt_swap_log_ratio(target: RelaxedTarget, d_q: float, d_q1: float, x_q, x_q1) -> float:
    """``log [pi_q(x^{q+1}) pi_{q+1}(x^q)] - log [pi_q(x^q) pi_{q+1}(x^{q+1})]``."""
    num = target.log_density(x_q1, d_q) + target.log_density(x_q, d_q1)
    den = target.log_density(x_q, d_q) + target.log_density(x_q1, d_q1)
    if np.isneginf(den):
        return math.inf if np.isfinite(num) else 0.0
    return float(num - den)


def pt_nd(prior: SeriesPrior, A: InformationOperator, phi: RelaxationKernel, schedule: TemperatureSchedule,
          iterations: int, cfg: MalaConfig, seed=0, constraints: Sequence[InequalityConstraint] = (),
          burn_in: int = 0, thin: int = 1, replicas: int = 1) -> PTResult:
    """Parallel tempering with one chain per bandwidth and one adjacent swap per iteration.

    ``replicas`` independent ladders are advanced in lockstep; each proposes
    its own swap.  Their cold chains give independent estimates, which is
    what the reported standard errors use when ``replicas > 1``.
    """
    if iterations < 1:
        raise ValueError("iterations must be positive")
    if replicas < 1:
        raise ValueError("replicas must be positive")
    if not phi.differentiable:
        raise UnsupportedConfigurationError("parallel tempering uses MALA and needs the squared-exponential kernel")
    target = RelaxedTarget(prior, A, phi, constraints)
    _check_gradient(target)
    G = cfg.precond(prior)
    deltas = schedule.array
    m = deltas.size
    R = replicas
    taus = cfg.step_sizes(target, deltas)
    d_all = np.broadcast_to(deltas, (R, m))
    t_all = np.broadcast_to(taus, (R, m))
    x = _init_from_prior(prior, target.cons, R * m, seed, _PT_INIT).reshape(R, m, -1)
    rng = make_rng(seed, _PT_MOVE)
    swap_rng = make_rng(seed, _PT_SWAP)
    attempts = np.zeros(max(m - 1, 0), dtype=np.int64)
    accepts = np.zeros_like(attempts)
    acc_tot = np.zeros(m, dtype=np.int64)
    rows = np.arange(R)
    chains, kept_r2 = [], []
    for j in range(iterations):
        x, acc = mala_kernel(target, d_all, t_all, cfg.steps, x, rng, G)
        acc_tot += acc.sum(axis=0)
        if m > 1:
            q = swap_rng.integers(0, m - 1, size=R)
            logu = np.log(swap_rng.random(R))
            xq, xq1 = x[rows, q], x[rows, q + 1]
            dq, dq1 = deltas[q], deltas[q + 1]
            num = target.log_density(xq1, dq) + target.log_density(xq, dq1)
            den = target.log_density(xq, dq) + target.log_density(xq1, dq1)
            with np.errstate(invalid="ignore"):
                ok = logu < num - den
            np.add.at(attempts, q, 1)
            np.add.at(accepts, q[ok], 1)
            x[rows[ok], q[ok]], x[rows[ok], q[ok] + 1] = xq1[ok], xq[ok]
        if j >= burn_in and (j - burn_in) % thin == 0:
            chains.append(x[:, -1].copy())
            kept_r2.append(np.sum(target.residual(x) ** 2, axis=-1))
    chains = np.array(chains).reshape(-1, R, prior.n_terms)
    kept_r2 = np.array(kept_r2).reshape(-1, R, m)
    acc_rate = acc_tot / max(iterations * cfg.steps * R, 1)
    history = []
    for i in range(m):
        r2 = kept_r2[:, :, i]
        se = _trace_se(r2)
        history.append(RungRecord(i, float(deltas[i]), float(r2.size), float(acc_rate[i]),
                                  float(r2.mean()) if r2.size else float("nan"), float(se), 1.0, 1.0))
    return PTResult(chains, x, attempts, accepts, acc_rate, history, schedule, len(A), A.fingerprint())


def _trace_se(t: np.ndarray):
    """SE of the grand mean of a (iterations, replicas, ...) trace."""
    if t.shape[0] < 2:
        return np.full(t.shape[2:], np.nan) if t.ndim > 2 else float("nan")
    if t.shape[1] > 1:
        return t.mean(axis=0).std(axis=0, ddof=1) / math.sqrt(t.shape[1])
    return batch_means_se(t[:, 0])


# ---------------------------------------------------------------------------
# moment constants


def moment_ratio_constant(phi: RelaxationKernel, alpha: float, n: int) -> float:
    """``int r^(alpha+n-1) phi(r) dr / int r^(n-1) phi(r) dr``.

    For the indicator this is ``n / (alpha + n)``.  For ``exp(-r**2/2)`` it is
    the ``alpha``-th moment of a chi distribution with ``n`` degrees of freedom,
    ``2**(alpha/2) Gamma((alpha+n)/2) / Gamma(n/2)``; integer ``alpha`` only.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if phi.kind == "indicator":
        return n / (alpha + n)
    if float(alpha) != int(alpha):
        raise UnsupportedConfigurationError("the squared-exponential constant is tabulated for integer alpha only")
    a = int(alpha)
    return float(math.exp(0.5 * a * math.log(2.0) + gammaln((a + n) / 2.0) - gammaln(n / 2.0)))


def with_steps(cfg: MalaConfig, steps: int) -> MalaConfig:
    return replace(cfg, steps=steps)
