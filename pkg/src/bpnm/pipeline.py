"""Pipelines of probabilistic numerical methods.

A pipeline is a bipartite DAG alternating information nodes and method
nodes.  Method node ``i`` reads its in-edges (labelled ``1..m(i)``) as the
components of its information operator and writes a single child node, its
quantity of interest.  This module validates such graphs, extracts the
dependence graph over information nodes, checks the conditional-independence
("coherence") requirements against declarations or a Gaussian witness, and
executes the pipeline either in closed form (Gaussian nodes only) or by
ancestral sampling.

Labels may be any hashable; information and method labels share one
namespace.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Hashable, Mapping, Sequence

import numpy as np

from .conjugate import GaussianPosterior, KernelSpec, bq_posterior, kernel_double_integral, kernel_mean
from .seriesprior import make_rng

__all__ = [
    "PipelineStructureError",
    "ModeError",
    "RedundancyWarning",
    "PipelineGraph",
    "Slot",
    "MethodSpec",
    "ConjugateGaussian",
    "Disintegration",
    "DeterministicMap",
    "SumCombiner",
    "Violation",
    "CompatibilityReport",
    "check_compatibility",
    "DependenceGraph",
    "dependence_graph",
    "CIStatement",
    "GaussianWitness",
    "CoherenceDeclaration",
    "CoherenceReport",
    "check_coherence",
    "EmpiricalDistribution",
    "execute",
    "distributed_integration",
    "distributed_integration_sources",
    "distributed_integration_witness",
    "joint_quadrature",
]

_ANCESTRAL = 41


class PipelineStructureError(ValueError):
    """The graph violates the structural rules of a pipeline."""


class ModeError(ValueError):
    """A method cannot run in the requested execution mode."""


class RedundancyWarning(UserWarning):
    """The same information component enters through more than one node."""


# ---------------------------------------------------------------------------
# graph


@dataclass(frozen=True)
class PipelineGraph:
    """Bipartite pipeline.

    info_nodes, method_nodes
        Node labels; must be disjoint and unique.
    edges
        ``(source, target, label)`` triples.  Edges into a method node carry
        its slot index ``1..m(i)``; edges out of a method node carry ``None``.
    terminal
        The information node holding the principal quantity of interest.
    method_order
        Optional ordering of method nodes; the last one must feed the terminal.
        Defaults to ``method_nodes``.
    """

    info_nodes: tuple
    method_nodes: tuple
    edges: tuple
    terminal: Hashable

    def __post_init__(self):
        object.__setattr__(self, "info_nodes", tuple(self.info_nodes))
        object.__setattr__(self, "method_nodes", tuple(self.method_nodes))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        self._validate()

    def _validate(self):
        info, meth = set(self.info_nodes), set(self.method_nodes)
        if len(info) != len(self.info_nodes) or len(meth) != len(self.method_nodes):
            raise PipelineStructureError("node labels must be unique")
        if info & meth:
            raise PipelineStructureError(f"labels used for both node kinds: {sorted(map(str, info & meth))}")
        if not self.method_nodes:
            raise PipelineStructureError("a pipeline needs at least one method node")
        if self.terminal not in info:
            raise PipelineStructureError(f"terminal {self.terminal!r} is not an information node")
        for e in self.edges:
            if len(e) != 3:
                raise PipelineStructureError(f"edge {e!r} must be (source, target, label)")
            s, t, _ = e
            if s in info and t in meth:
                continue
            if s in meth and t in info:
                continue
            raise PipelineStructureError(f"edge {s!r} -> {t!r} does not alternate information and method nodes")
        for mnode in self.method_nodes:
            kids = self.children(mnode)
            if len(kids) != 1:
                raise PipelineStructureError(f"method node {mnode!r} must have exactly one child, has {len(kids)}")
            labels = sorted(lab for _, lab in self.inputs(mnode))
            if labels != list(range(1, len(labels) + 1)):
                raise PipelineStructureError(f"in-edges of method node {mnode!r} must be labelled 1..m, got {labels}")
        for inode in self.info_nodes:
            writers = [s for s, t, _ in self.edges if t == inode]
            if len(writers) > 1:
                raise PipelineStructureError(f"information node {inode!r} is written by several methods")
        last = self.method_nodes[-1]
        if self.children(last) != [self.terminal]:
            raise PipelineStructureError(f"terminal must be the child of the last method node {last!r}")
        if self.children(self.terminal):
            raise PipelineStructureError("terminal node must have no out-edges")
        self.topological_order()

    def children(self, node) -> list:
        return [t for s, t, _ in self.edges if s == node]

    def inputs(self, method) -> list:
        """``(info_node, slot)`` pairs for a method node, ordered by slot."""
        return sorted(((s, lab) for s, t, lab in self.edges if t == method), key=lambda p: p[1])

    def output(self, method):
        return self.children(method)[0]

    def writer(self, info_node):
        for s, t, _ in self.edges:
            if t == info_node:
                return s
        return None

    @property
    def sources(self) -> tuple:
        return tuple(n for n in self.info_nodes if self.writer(n) is None)

    def topological_order(self) -> list:
        """All nodes in an order compatible with the edges (Kahn, stable in declaration order)."""
        nodes = list(self.info_nodes) + list(self.method_nodes)
        indeg = {n: 0 for n in nodes}
        for _, t, _ in self.edges:
            indeg[t] += 1
        ready = [n for n in nodes if indeg[n] == 0]
        out = []
        while ready:
            n = ready.pop(0)
            out.append(n)
            for c in self.children(n):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(out) != len(nodes):
            raise PipelineStructureError("pipeline contains a cycle")
        return out

    def to_dict(self) -> dict:
        return {
            "info_nodes": list(self.info_nodes),
            "method_nodes": list(self.method_nodes),
            "edges": [list(e) for e in self.edges],
            "terminal": self.terminal,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PipelineGraph":
        return cls(tuple(d["info_nodes"]), tuple(d["method_nodes"]), tuple(tuple(e) for e in d["edges"]),
                   d["terminal"])


# ---------------------------------------------------------------------------
# methods


@dataclass(frozen=True)
class Slot:
    """One information component ``A_{i,j}``: a name identifying the map and its output dimension."""

    name: str
    dim: int = 1


class ConjugateGaussian:
    """Closed-form Gaussian update ``inputs -> GaussianPosterior``.

    ``update`` receives one array per slot.  In analytic mode the inputs must
    be deterministic, since a general conjugate updater does not push a
    distribution forward in closed form.
    """

    kind = "conjugate"

    def __init__(self, update: Callable[[list], GaussianPosterior], description: str = "conjugate"):
        self.update = update
        self.description = description

    def analytic(self, inputs: Sequence[GaussianPosterior]) -> GaussianPosterior:
        if any(not _is_dirac(d) for d in inputs):
            raise ModeError(f"{self.description}: cannot consume distributional inputs in analytic mode; "
                            "use ancestral mode")
        return self.update([np.atleast_1d(d.mean) for d in inputs])

    def sample(self, inputs: Sequence[np.ndarray], rng) -> np.ndarray:
        S = inputs[0].shape[0] if inputs else 1
        if all(np.ptp(x, axis=0).max(initial=0.0) == 0.0 for x in inputs):
            post = self.update([x[0] for x in inputs])
            return _as_rows(post.sample(rng, S), S)
        out = [_as_rows(self.update([x[s] for x in inputs]).sample(rng, 1), 1)[0] for s in range(S)]
        return np.array(out)


class Disintegration:
    """Sampling-based update; ``draw(inputs, rng)`` returns one QoI draw for fixed inputs."""

    kind = "disintegration"

    def __init__(self, draw: Callable[[list, np.random.Generator], np.ndarray], description: str = "disintegration"):
        self.draw = draw
        self.description = description

    def analytic(self, inputs):
        raise ModeError(f"{self.description}: sampling-based updates run in ancestral mode only")

    def sample(self, inputs: Sequence[np.ndarray], rng) -> np.ndarray:
        S = inputs[0].shape[0] if inputs else 1
        return np.array([np.atleast_1d(self.draw([x[s] for x in inputs], rng)) for s in range(S)])


class DeterministicMap:
    """Classical method ``B(mu, a) = delta(b(a))``."""

    kind = "deterministic"

    def __init__(self, fn: Callable[..., np.ndarray], description: str = "deterministic map"):
        self.fn = fn
        self.description = description

    def analytic(self, inputs: Sequence[GaussianPosterior]) -> GaussianPosterior:
        if any(not _is_dirac(d) for d in inputs):
            raise ModeError(f"{self.description}: only Dirac inputs can be mapped in analytic mode; "
                            "use ancestral mode")
        v = np.atleast_1d(np.asarray(self.fn(*[np.atleast_1d(d.mean) for d in inputs]), dtype=float))
        return _dirac(v)

    def sample(self, inputs, rng) -> np.ndarray:
        S = inputs[0].shape[0] if inputs else 1
        return np.array([np.atleast_1d(self.fn(*[x[s] for x in inputs])) for s in range(S)])


class SumCombiner:
    """``delta(a_1 + ... + a_m)``; pushes independent Gaussian inputs forward exactly."""

    kind = "sum"
    description = "sum"

    def analytic(self, inputs: Sequence[GaussianPosterior]) -> GaussianPosterior:
        mean = sum(np.atleast_1d(d.mean) for d in inputs)
        cov = sum(np.atleast_2d(d.cov) for d in inputs)
        if mean.size == 1:
            return GaussianPosterior(float(mean[0]), float(cov[0, 0]))
        return GaussianPosterior(mean, cov)

    def sample(self, inputs, rng) -> np.ndarray:
        return np.sum(inputs, axis=0)


@dataclass(frozen=True)
class MethodSpec:
    """Information components (one per in-edge, in slot order), updater and QoI dimension."""

    slots: tuple
    updater: object
    qoi_dim: int = 1
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(s if isinstance(s, Slot) else Slot(*s) for s in self.slots))


def _is_dirac(d: GaussianPosterior) -> bool:
    return bool(np.all(np.asarray(d.cov) == 0.0))


def _dirac(v) -> GaussianPosterior:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.size == 1:
        return GaussianPosterior(float(v[0]), 0.0)
    return GaussianPosterior(v, np.zeros((v.size, v.size)))


def _as_rows(x, S) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(S, -1)


# ---------------------------------------------------------------------------
# compatibility


@dataclass(frozen=True)
class Violation:
    rule: str
    method: Hashable
    edge: int | None
    node: Hashable
    message: str


@dataclass
class CompatibilityReport:
    violations: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def compatible(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.compatible:
            return "compatible"
        return "\n".join(f"rule ({v.rule}) method {v.method} edge {v.edge}: {v.message}" for v in self.violations)


def check_compatibility(P: PipelineGraph, methods: Mapping | Sequence) -> CompatibilityReport:
    """Check that the methods fit the pipeline.

    Rule (i): method nodes reading the same information node must bind the
    same component (name and dimension).  Rule (ii): a method's QoI dimension
    must equal the dimension of every slot its output node feeds.  Missing
    specs and slot-count mismatches are reported under rule ``"arity"``.
    Distinct source nodes carrying the same component name are reported as
    redundancy warnings only.
    """
    methods = _method_map(P, methods)
    rep = CompatibilityReport()
    for mnode in P.method_nodes:
        spec = methods.get(mnode)
        if spec is None:
            rep.violations.append(Violation("arity", mnode, None, mnode, f"no method spec for node {mnode!r}"))
            continue
        n_in = len(P.inputs(mnode))
        if len(spec.slots) != n_in:
            rep.violations.append(Violation("arity", mnode, None, mnode,
                                            f"{len(spec.slots)} information components for {n_in} in-edges"))
    for inode in P.info_nodes:
        readers = [(t, lab) for s, t, lab in P.edges if s == inode]
        bound = [(t, lab, _slot(methods, t, lab)) for t, lab in readers]
        bound = [b for b in bound if b[2] is not None]
        # rule (i)
        for (t0, l0, s0), (t1, l1, s1) in zip(bound, bound[1:]):
            if s0 != s1:
                rep.violations.append(Violation(
                    "i", t1, l1, inode,
                    f"node {inode!r} binds {s0.name}[{s0.dim}] for method {t0} edge {l0} "
                    f"but {s1.name}[{s1.dim}] for method {t1} edge {l1}"))
        # rule (ii)
        w = P.writer(inode)
        if w is not None and w in methods:
            q = methods[w].qoi_dim
            for t, lab, s in bound:
                if s.dim != q:
                    rep.violations.append(Violation(
                        "ii", t, lab, inode,
                        f"method {w} outputs dimension {q} but method {t} edge {lab} expects {s.dim}"))
    seen: dict = {}
    for inode in P.sources:
        for t, lab in [(t, lab) for s, t, lab in P.edges if s == inode]:
            s = _slot(methods, t, lab)
            if s is None:
                continue
            other = seen.setdefault(s.name, inode)
            if other != inode:
                rep.warnings.append(f"component {s.name} enters through nodes {other!r} and {inode!r}")
    for msg in dict.fromkeys(rep.warnings):
        warnings.warn(msg, RedundancyWarning, stacklevel=2)
    return rep


def _method_map(P, methods) -> dict:
    if isinstance(methods, Mapping):
        return dict(methods)
    methods = list(methods)
    if len(methods) != len(P.method_nodes):
        raise ValueError("need one method spec per method node")
    return dict(zip(P.method_nodes, methods))


def _slot(methods, mnode, lab):
    spec = methods.get(mnode)
    if spec is None or lab is None or not 1 <= lab <= len(spec.slots):
        return None
    return spec.slots[lab - 1]


# ---------------------------------------------------------------------------
# dependence graph and coherence


@dataclass(frozen=True)
class DependenceGraph:
    """DAG over information nodes; ``nodes`` are topologically ordered, sources first, terminal last."""

    nodes: tuple
    edges: frozenset
    n_sources: int

    def parents(self, node) -> tuple:
        return tuple(n for n in self.nodes if (n, node) in self.edges)

    @property
    def sources(self) -> tuple:
        return self.nodes[: self.n_sources]

    @property
    def terminal(self):
        return self.nodes[-1]

    def index(self, node) -> int:
        """1-based position in the topological order."""
        return self.nodes.index(node) + 1


def dependence_graph(P: PipelineGraph) -> DependenceGraph:
    """Drop method nodes, replacing each information -> method -> information motif by a direct edge."""
    edges = set()
    for mnode in P.method_nodes:
        out = P.output(mnode)
        for src, _ in P.inputs(mnode):
            edges.add((src, out))
    sources = [n for n in P.info_nodes if not any(t == n for _, t in edges)]
    indeg = {n: sum(1 for _, t in edges if t == n) for n in P.info_nodes}
    ready = list(sources)
    order = []
    while ready:
        n = ready.pop(0)
        order.append(n)
        for s, t in sorted(edges, key=lambda e: P.info_nodes.index(e[1])):
            if s == n:
                indeg[t] -= 1
                if indeg[t] == 0:
                    ready.append(t)
    if len(order) != len(P.info_nodes):
        raise PipelineStructureError("dependence graph contains a cycle")
    if order[-1] != P.terminal:
        order.remove(P.terminal)
        order.append(P.terminal)
    return DependenceGraph(tuple(order), frozenset(edges), len(sources))


@dataclass(frozen=True)
class CIStatement:
    """``Y_target`` independent of ``Y_others`` given ``Y_given``."""

    target: Hashable
    others: frozenset
    given: frozenset

    def __str__(self) -> str:
        def fmt(s):
            return "{" + ",".join(f"Y{x}" for x in sorted(s, key=str)) + "}"
        return f"Y{self.target} _||_ {fmt(self.others)} | {fmt(self.given)}"


@dataclass(frozen=True)
class GaussianWitness:
    """Joint covariance of all node variables; ``blocks`` maps node labels to index lists."""

    cov: np.ndarray
    blocks: Mapping

    def partial_cov(self, a, b, given) -> np.ndarray:
        ia = self._idx([a]) if not isinstance(a, (set, frozenset)) else self._idx(a)
        ib = self._idx(b)
        ic = self._idx(given)
        S = self.cov
        if not ib.size:
            return np.zeros((ia.size, 0))
        out = S[np.ix_(ia, ib)]
        if ic.size:
            Scc = S[np.ix_(ic, ic)]
            out = out - S[np.ix_(ia, ic)] @ np.linalg.pinv(Scc, rcond=1e-13, hermitian=True) @ S[np.ix_(ic, ib)]
        return out

    def _idx(self, labels) -> np.ndarray:
        idx = [i for lab in sorted(labels, key=str) for i in self.blocks[lab]]
        return np.asarray(idx, dtype=int)


@dataclass(frozen=True)
class CoherenceDeclaration:
    statements: tuple = ()
    witness: GaussianWitness | None = None


@dataclass
class CoherenceReport:
    required: list
    verified: list
    incoherent: list
    undeclared: list

    @property
    def coherent(self) -> bool:
        return not self.incoherent and not self.undeclared

    @property
    def status(self) -> str:
        if self.incoherent:
            return "incoherent"
        return "undeclared" if self.undeclared else "coherent"


def required_statements(G: DependenceGraph) -> list:
    """Non-trivial conditional independences needed for coherence, in topological order."""
    out = []
    for j in range(G.n_sources, len(G.nodes)):
        node = G.nodes[j]
        pa = frozenset(G.parents(node))
        rest = frozenset(G.nodes[:j]) - pa
        if rest:
            out.append(CIStatement(node, rest, pa))
    return out


def check_coherence(G: DependenceGraph, decl: CoherenceDeclaration, tol: float = 1e-8) -> CoherenceReport:
    """Each required statement is accepted if declared, else tested against the witness.

    With a witness, independence holds when every entry of the partial
    covariance is below ``tol`` in absolute value.
    """
    declared = set(decl.statements)
    for s in declared:
        for lab in {s.target} | set(s.others) | set(s.given):
            if lab not in G.nodes:
                raise ValueError(f"declared statement {s} refers to unknown node {lab!r}")
    req = required_statements(G)
    verified, bad, undeclared = [], [], []
    for s in req:
        if s in declared:
            verified.append(s)
        elif decl.witness is not None:
            pc = decl.witness.partial_cov(s.target, s.others, s.given)
            (verified if np.max(np.abs(pc), initial=0.0) <= tol else bad).append(s)
        else:
            undeclared.append(s)
    return CoherenceReport(req, verified, bad, undeclared)


# ---------------------------------------------------------------------------
# execution


@dataclass(frozen=True)
class EmpiricalDistribution:
    samples: np.ndarray

    @property
    def mean(self):
        m = self.samples.mean(axis=0)
        return float(m[0]) if m.size == 1 else m

    @property
    def var(self):
        v = self.samples.var(axis=0, ddof=1)
        return float(v[0]) if v.size == 1 else v

    @property
    def mean_se(self):
        se = np.sqrt(self.samples.var(axis=0, ddof=1) / self.samples.shape[0])
        return float(se[0]) if se.size == 1 else se

    @property
    def var_se(self):
        """Standard error of the sample variance (fourth-moment formula)."""
        x = self.samples - self.samples.mean(axis=0)
        n = x.shape[0]
        m4 = np.mean(x**4, axis=0)
        m2 = np.mean(x**2, axis=0)
        se = np.sqrt(np.maximum(m4 - m2**2, 0.0) / n)
        return float(se[0]) if se.size == 1 else se


def execute(P: PipelineGraph, methods, sources: Mapping, mode: str = "analytic", n_samples: int = 10_000,
            seed=0):
    """Run the pipeline.

    ``sources`` maps each source node to its value.  Analytic mode returns a
    :class:`GaussianPosterior` over the terminal QoI; parents feed their
    outputs as independent inputs.  Ancestral mode draws ``n_samples`` paths
    and returns an :class:`EmpiricalDistribution`.
    """
    methods = _method_map(P, methods)
    rep = check_compatibility(P, methods)
    if not rep.compatible:
        raise ValueError(f"methods are not compatible with the pipeline:\n{rep}")
    missing = [s for s in P.sources if s not in sources]
    if missing:
        raise ValueError(f"no values for source nodes {missing}")
    order = [n for n in P.topological_order() if n in set(P.method_nodes)]
    if mode == "analytic":
        dists = {s: _dirac(sources[s]) for s in P.sources}
        for mnode in order:
            spec = methods[mnode]
            dists[P.output(mnode)] = spec.updater.analytic([dists[n] for n, _ in P.inputs(mnode)])
        return dists[P.terminal]
    if mode != "ancestral":
        raise ValueError(f"unknown mode {mode!r}")
    if n_samples < 2:
        raise ValueError("ancestral mode needs at least two paths")
    vals = {s: np.tile(np.atleast_1d(np.asarray(sources[s], dtype=float)), (n_samples, 1)) for s in P.sources}
    for k, mnode in enumerate(order):
        spec = methods[mnode]
        rng = make_rng(seed, _ANCESTRAL, k)
        vals[P.output(mnode)] = _as_rows(spec.updater.sample([vals[n] for n, _ in P.inputs(mnode)], rng), n_samples)
    return EmpiricalDistribution(vals[P.terminal])


# ---------------------------------------------------------------------------
# distributed integration


def _knots(m: int) -> np.ndarray:
    return np.arange(1, 2 * m + 1) / (2.0 * m)


def _quadrature_update(kernel: KernelSpec, knots: np.ndarray, interval):
    def update(inputs):
        return bq_posterior(kernel, knots, np.concatenate([np.atleast_1d(x) for x in inputs]), interval)
    return update


def distributed_integration(m: int, kernel: KernelSpec | None = None):
    """Split ``int_0^1 x`` at 1/2 over knots ``t_i = i/(2m)``, ``i = 1..2m``.

    Sources 1, 2, 3 hold ``x(t_1..t_{m-1})``, ``x(t_m)`` and
    ``x(t_{m+1}..t_{2m})``; methods ``M1`` and ``M2`` are quadrature rules
    on the two halves writing nodes 4 and 5; ``M3`` sums them into node 6.
    ``t_0 = 0`` is not a knot: under the Wiener prior ``x(0) = 0`` already.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    kernel = kernel or KernelSpec.wiener()
    t = _knots(m)
    info = (1, 2, 3, 4, 5, 6)
    meth = ("M1", "M2", "M3")
    edges = ((1, "M1", 1), (2, "M1", 2), (2, "M2", 1), (3, "M2", 2),
             ("M1", 4, None), ("M2", 5, None), (4, "M3", 1), (5, "M3", 2), ("M3", 6, None))
    P = PipelineGraph(info, meth, edges, 6)
    s1 = Slot(f"x(t_1..t_{m - 1})", m - 1)
    s2 = Slot(f"x(t_{m})", 1)
    s3 = Slot(f"x(t_{m + 1}..t_{2 * m})", m)
    methods = {
        "M1": MethodSpec((s1, s2), ConjugateGaussian(_quadrature_update(kernel, t[:m], (0.0, 0.5)), "M1"), 1, "M1"),
        "M2": MethodSpec((s2, s3), ConjugateGaussian(_quadrature_update(kernel, t[m - 1:], (0.5, 1.0)), "M2"), 1,
                         "M2"),
        "M3": MethodSpec((Slot("int_0^0.5 x", 1), Slot("int_0.5^1 x", 1)), SumCombiner(), 1, "M3"),
    }
    return P, methods


def distributed_integration_sources(m: int, values) -> dict:
    """Split ``x(t_1..t_{2m})`` into the three source nodes."""
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size != 2 * m:
        raise ValueError(f"expected {2 * m} knot values")
    return {1: v[: m - 1], 2: v[m - 1: m], 3: v[m:]}


def joint_quadrature(m: int, kernel: KernelSpec, values) -> GaussianPosterior:
    """Single quadrature rule on ``[0, 1]`` using all ``2m`` knots."""
    return bq_posterior(kernel, _knots(m), values, (0.0, 1.0))


def distributed_integration_witness(m: int, kernel: KernelSpec) -> GaussianWitness:
    """Joint prior covariance of the six node variables of :func:`distributed_integration`."""
    t = _knots(m)
    halves = [(0.0, 0.5), (0.5, 1.0)]
    n_pts = 2 * m
    S = np.zeros((n_pts + 3, n_pts + 3))
    S[:n_pts, :n_pts] = kernel(t, t)
    z = [kernel_mean(kernel, t, I) for I in halves]
    S[:n_pts, n_pts] = S[n_pts, :n_pts] = z[0]
    S[:n_pts, n_pts + 1] = S[n_pts + 1, :n_pts] = z[1]
    S[:n_pts, n_pts + 2] = S[n_pts + 2, :n_pts] = z[0] + z[1]
    II = np.array([[kernel_double_integral(kernel, I, J) for J in halves] for I in halves])
    II = 0.5 * (II + II.T)
    S[n_pts:n_pts + 2, n_pts:n_pts + 2] = II
    S[n_pts + 2, n_pts:n_pts + 2] = S[n_pts:n_pts + 2, n_pts + 2] = II.sum(axis=1)
    S[n_pts + 2, n_pts + 2] = II.sum()
    blocks = {1: list(range(m - 1)), 2: [m - 1], 3: list(range(m, n_pts)), 4: [n_pts], 5: [n_pts + 1],
              6: [n_pts + 2]}
    return GaussianWitness(S, blocks)
