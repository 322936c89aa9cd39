import numpy as np
import pytest

from bpnm.conjugate import GaussianPosterior, KernelSpec
from bpnm.pipeline import (
    CIStatement,
    CoherenceDeclaration,
    ConjugateGaussian,
    DeterministicMap,
    Disintegration,
    MethodSpec,
    ModeError,
    PipelineGraph,
    PipelineStructureError,
    RedundancyWarning,
    Slot,
    SumCombiner,
    check_coherence,
    check_compatibility,
    dependence_graph,
    distributed_integration,
    distributed_integration_sources,
    distributed_integration_witness,
    execute,
    joint_quadrature,
)


def _values(m):
    t = np.arange(1, 2 * m + 1) / (2.0 * m)
    return np.sin(3 * t) + t


def _single():
    P = PipelineGraph(("a", "q"), ("M",), (("a", "M", 1), ("M", "q", None)), "q")
    return P, {"M": MethodSpec((Slot("a", 1),), DeterministicMap(lambda a: 2 * a), 1)}


def _chain():
    P = PipelineGraph(("a", "b", "q"), ("M1", "M2"),
                      (("a", "M1", 1), ("M1", "b", None), ("b", "M2", 1), ("M2", "q", None)), "q")
    methods = {"M1": MethodSpec((Slot("a", 1),), DeterministicMap(lambda a: a + 1)),
               "M2": MethodSpec((Slot("b", 1),), DeterministicMap(lambda b: 3 * b))}
    return P, methods


class TestGraph:
    def test_overlapping_labels(self):
        with pytest.raises(PipelineStructureError):
            PipelineGraph(("a", "M"), ("M",), (("a", "M", 1), ("M", "a", None)), "a")

    def test_non_alternating_edge(self):
        with pytest.raises(PipelineStructureError, match="alternate"):
            PipelineGraph(("a", "b", "q"), ("M",), (("a", "b", None), ("a", "M", 1), ("M", "q", None)), "q")

    def test_method_needs_one_child(self):
        with pytest.raises(PipelineStructureError, match="exactly one child"):
            PipelineGraph(("a", "q", "r"), ("M",), (("a", "M", 1), ("M", "q", None), ("M", "r", None)), "q")

    def test_slot_labels(self):
        with pytest.raises(PipelineStructureError, match="labelled"):
            PipelineGraph(("a", "q"), ("M",), (("a", "M", 2), ("M", "q", None)), "q")

    def test_terminal_must_be_information(self):
        with pytest.raises(PipelineStructureError):
            PipelineGraph(("a", "q"), ("M",), (("a", "M", 1), ("M", "q", None)), "M")

    def test_cycle(self):
        edges = (("a", "M1", 1), ("M1", "b", None), ("b", "M2", 1), ("M2", "a", None), ("b", "M3", 1),
                 ("M3", "q", None))
        with pytest.raises(PipelineStructureError):
            PipelineGraph(("a", "b", "q"), ("M1", "M2", "M3"), edges, "q")

    def test_dict_round_trip(self):
        P, _ = distributed_integration(3)
        assert PipelineGraph.from_dict(P.to_dict()) == P
        assert P.sources == (1, 2, 3)


class TestCompatibility:
    def test_distributed_integration_is_compatible(self):
        P, methods = distributed_integration(3)
        rep = check_compatibility(P, methods)
        assert rep.compatible and str(rep) == "compatible" and not rep.warnings

    def test_single_method(self):
        assert check_compatibility(*_single()).compatible

    def test_rule_ii_names_method_and_edge(self):
        P, methods = distributed_integration(3)
        m3 = methods["M3"]
        methods["M3"] = MethodSpec((m3.slots[0], Slot("int_0.5^1 x", 2)), m3.updater)
        rep = check_compatibility(P, methods)
        assert not rep.compatible
        v = [v for v in rep.violations if v.rule == "ii"]
        assert len(v) == 1 and v[0].method == "M3" and v[0].edge == 2 and v[0].node == 5

    def test_rule_i_shared_node(self):
        P, methods = distributed_integration(3)
        m2 = methods["M2"]
        methods["M2"] = MethodSpec((Slot("other", 1), m2.slots[1]), m2.updater)
        rep = check_compatibility(P, methods)
        assert [v.rule for v in rep.violations] == ["i"]
        assert rep.violations[0].node == 2

    def test_arity(self):
        P, methods = distributed_integration(2)
        methods["M3"] = MethodSpec((Slot("int_0^0.5 x", 1),), SumCombiner())
        rep = check_compatibility(P, methods)
        assert any(v.rule == "arity" and v.method == "M3" for v in rep.violations)
        del methods["M3"]
        assert not check_compatibility(P, methods).compatible

    def test_redundant_sources_warn(self):
        P = PipelineGraph(("a", "b", "q"), ("M",), (("a", "M", 1), ("b", "M", 2), ("M", "q", None)), "q")
        methods = {"M": MethodSpec((Slot("x(0.5)", 1), Slot("x(0.5)", 1)), SumCombiner())}
        with pytest.warns(RedundancyWarning):
            rep = check_compatibility(P, methods)
        assert rep.compatible and len(rep.warnings) == 1


class TestDependenceGraph:
    def test_distributed_integration_edges(self):
        P, _ = distributed_integration(3)
        G = dependence_graph(P)
        assert G.edges == {(1, 4), (2, 4), (2, 5), (3, 5), (4, 6), (5, 6)}
        assert G.sources == (1, 2, 3) and G.terminal == 6
        assert G.parents(5) == (2, 3) and G.index(6) == 6

    def test_single_method_is_a_star(self):
        P = PipelineGraph(("a", "b", "c", "q"), ("M",),
                          (("a", "M", 1), ("b", "M", 2), ("c", "M", 3), ("M", "q", None)), "q")
        G = dependence_graph(P)
        assert G.edges == {("a", "q"), ("b", "q"), ("c", "q")}

    def test_chain_is_a_path(self):
        G = dependence_graph(_chain()[0])
        assert G.nodes == ("a", "b", "q") and G.edges == {("a", "b"), ("b", "q")}

    def test_invariant_under_method_relabelling(self):
        P, _ = distributed_integration(2)
        rename = {"M1": "X", "M2": "Y", "M3": "Z"}
        edges = tuple((rename.get(s, s), rename.get(t, t), lab) for s, t, lab in P.edges)
        Q = PipelineGraph(P.info_nodes, ("X", "Y", "Z"), edges, P.terminal)
        a, b = dependence_graph(P), dependence_graph(Q)
        assert a.nodes == b.nodes and a.edges == b.edges


class TestCoherence:
    @pytest.mark.parametrize("m", [2, 3, 5])
    def test_wiener_witness_is_coherent(self, m):
        P, _ = distributed_integration(m)
        rep = check_coherence(dependence_graph(P), CoherenceDeclaration(
            witness=distributed_integration_witness(m, KernelSpec.wiener())))
        assert rep.coherent and rep.status == "coherent"
        assert len(rep.verified) == len(rep.required) == 3

    def test_integrated_wiener_names_failing_statement(self):
        P, _ = distributed_integration(3)
        rep = check_coherence(dependence_graph(P), CoherenceDeclaration(
            witness=distributed_integration_witness(3, KernelSpec.integrated_wiener())))
        assert rep.status == "incoherent"
        assert CIStatement(4, frozenset({3}), frozenset({1, 2})) in rep.incoherent
        assert str(CIStatement(4, frozenset({3}), frozenset({1, 2}))) == "Y4 _||_ {Y3} | {Y1,Y2}"

    def test_single_method_vacuous(self):
        rep = check_coherence(dependence_graph(_single()[0]), CoherenceDeclaration())
        assert rep.required == [] and rep.coherent

    def test_declarations(self):
        G = dependence_graph(distributed_integration(2)[0])
        rep = check_coherence(G, CoherenceDeclaration())
        assert rep.status == "undeclared" and len(rep.undeclared) == 3
        rep = check_coherence(G, CoherenceDeclaration(tuple(rep.undeclared)))
        assert rep.coherent
        with pytest.raises(ValueError):
            check_coherence(G, CoherenceDeclaration((CIStatement(9, frozenset({1}), frozenset()),)))


class TestExecute:
    @pytest.mark.parametrize("m", [2, 3, 5])
    def test_coherent_pipeline_matches_joint_posterior(self, m):
        P, methods = distributed_integration(m)
        v = _values(m)
        out = execute(P, methods, distributed_integration_sources(m, v))
        ref = joint_quadrature(m, KernelSpec.wiener(), v)
        assert out.mean == pytest.approx(ref.mean, abs=1e-8)
        assert out.cov == pytest.approx(ref.cov, abs=1e-8)

    def test_incoherent_pipeline_differs(self):
        k = KernelSpec.integrated_wiener()
        gaps = []
        for m in range(2, 6):
            P, methods = distributed_integration(m, k)
            out = execute(P, methods, distributed_integration_sources(m, _values(m)))
            gaps.append(abs(out.cov - joint_quadrature(m, k, _values(m)).cov))
        assert max(gaps) > 1e-6

    def test_analytic_is_sum_of_halves(self):
        P, methods = distributed_integration(2)
        src = distributed_integration_sources(2, _values(2))
        a = methods["M1"].updater.analytic([GaussianPosterior(float(src[1][0]), 0.0),
                                            GaussianPosterior(float(src[2][0]), 0.0)])
        b = methods["M2"].updater.analytic([GaussianPosterior(float(src[2][0]), 0.0),
                                            GaussianPosterior(src[3], np.zeros((2, 2)))])
        out = execute(P, methods, src)
        assert out.mean == pytest.approx(a.mean + b.mean) and out.cov == pytest.approx(a.cov + b.cov)

    def test_ancestral_matches_analytic(self):
        P, methods = distributed_integration(3)
        src = distributed_integration_sources(3, _values(3))
        exact = execute(P, methods, src)
        emp = execute(P, methods, src, mode="ancestral", n_samples=100_000, seed=4)
        assert abs(emp.mean - exact.mean) < 3 * emp.mean_se
        assert abs(emp.var - exact.cov) < 3 * emp.var_se

    def test_ancestral_is_reproducible(self):
        P, methods = distributed_integration(2)
        src = distributed_integration_sources(2, _values(2))
        a = execute(P, methods, src, mode="ancestral", n_samples=50, seed=1)
        b = execute(P, methods, src, mode="ancestral", n_samples=50, seed=1)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_sum_of_diracs(self):
        P = PipelineGraph(("a", "b", "q"), ("M",), (("a", "M", 1), ("b", "M", 2), ("M", "q", None)), "q")
        methods = [MethodSpec((Slot("a", 1), Slot("b", 1)), SumCombiner())]
        out = execute(P, methods, {"a": 1.5, "b": 2.0})
        assert out.mean == 3.5 and out.cov == 0.0

    def test_chain(self):
        P, methods = _chain()
        assert execute(P, methods, {"a": 1.0}).mean == 6.0

    def test_distribution_into_conjugate_needs_ancestral(self):
        P, methods = _chain()
        methods["M1"] = MethodSpec((Slot("a", 1),), ConjugateGaussian(
            lambda x: GaussianPosterior(float(x[0][0]), 1.0)))
        methods["M2"] = MethodSpec((Slot("b", 1),), ConjugateGaussian(
            lambda x: GaussianPosterior(float(x[0][0]), 1.0), "second"))
        with pytest.raises(ModeError, match="ancestral"):
            execute(P, methods, {"a": 0.0})
        emp = execute(P, methods, {"a": 0.0}, mode="ancestral", n_samples=20_000)
        assert emp.var == pytest.approx(2.0, rel=0.05)

    def test_disintegration_is_ancestral_only(self):
        P, _ = _single()
        methods = {"M": MethodSpec((Slot("a", 1),), Disintegration(lambda x, rng: x[0] + rng.standard_normal()))}
        with pytest.raises(ModeError):
            execute(P, methods, {"a": 1.0})
        emp = execute(P, methods, {"a": 1.0}, mode="ancestral", n_samples=20_000)
        assert emp.mean == pytest.approx(1.0, abs=0.05)

    def test_errors(self):
        P, methods = _single()
        with pytest.raises(ValueError, match="source"):
            execute(P, methods, {})
        with pytest.raises(ValueError, match="mode"):
            execute(P, methods, {"a": 1.0}, mode="exact")
        with pytest.raises(ValueError):
            distributed_integration_sources(2, [1.0, 2.0])
