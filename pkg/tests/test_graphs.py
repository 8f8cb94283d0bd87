import json

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from generators import THREE_SPECIES_A, three_species_system, random_system
from lvig import LVSystem, gass, invasion_scheme
from lvig.errors import NotADAG
from lvig.graphs import (
    AttractorGraph,
    Edge,
    GraphKind,
    Provenance,
    analyze_graphs,
    build_ig,
    build_is,
    compare_graphs,
    export_graph,
    find_gass_map,
    graph_from_json,
    merge_graphs,
    topological_order,
)
from lvig.stability import residual_hyperplanes

THREE_SPECIES_EDGES = {
    ((), (0,)), ((), (2,)), ((), (0, 2)),
    ((0,), (0, 1)), ((0,), (0, 2)), ((0,), (0, 1, 2)),
    ((2,), (0, 2)),
    ((0, 1), (0, 1, 2)), ((0, 2), (0, 1, 2)),
}


@pytest.fixture(scope="module")
def graphs():
    return analyze_graphs(three_species_system())


def test_three_species_ig(graphs):
    _, ig, _, _ = graphs
    assert ig.edge_set() == THREE_SPECIES_EDGES
    assert ((2,), (0, 2)) in ig.edge_set()
    assert ((2,), (0, 1, 2)) not in ig.edge_set()
    assert all(e.provenance is Provenance.IG_RULE for e in ig.edges)


def test_three_species_is(graphs):
    _, _, is_, diff = graphs
    assert is_.edge_set() == THREE_SPECIES_EDGES
    assert not is_.anomalies
    assert diff.empty and diff.describe() == "IG and IS coincide"
    assert not is_.successors((0, 1, 2))


def test_find_gass_map():
    sys = three_species_system()
    m = find_gass_map(sys)
    assert len(m) == 8
    assert m[(1,)].community == () and np.array_equal(m[(1,)].u_star, np.zeros(3))
    assert np.allclose(m[(0, 2)].u_star, [0.2362255, 0, 0.4122863], atol=1e-7)
    assert np.allclose(m[(0, 1, 2)].u_star, gass(sys.A, sys.b).u_star)


def test_single_species():
    sys = LVSystem([[-1.0]], [2.0])
    _, ig, is_, diff = analyze_graphs(sys)
    assert ig.edge_set() == {((), (0,))} and diff.empty
    assert topological_order(ig) == [(), (0,)]


def test_merge_marks_both(graphs):
    _, ig, is_, _ = graphs
    g = merge_graphs(ig, is_)
    assert g.kind is GraphKind.MERGED
    assert all(e.provenance is Provenance.BOTH for e in g.edges)


def test_compare_reports_differences():
    nodes = [(), (0,), (1,)]
    a = AttractorGraph(nodes, [Edge((), (0,), Provenance.IG_RULE)], GraphKind.IG)
    b = AttractorGraph(nodes, [Edge((), (1,), Provenance.IS_RULE)], GraphKind.IS)
    diff = compare_graphs(a, b)
    assert diff.only_in_ig == [((), (0,))] and diff.only_in_is == [((), (1,))]
    assert "only in IG: {} -> {1}" in diff.describe()


def test_nonhyperbolic_system_reports_only():
    # b moved onto the plane r_1({2}) = 0
    h = next(p for p in residual_hyperplanes(THREE_SPECIES_A).hyperplanes
             if p.community == (1,) and p.species == 0)
    b = np.array([0.43, 0.2, 0.28])
    b[0] = -(h.value(b) - h.normal[0] * b[0]) / h.normal[0]
    sys = LVSystem(THREE_SPECIES_A, b)
    scheme, ig, is_, diff = analyze_graphs(sys)
    assert (1,) in scheme.nonhyperbolic
    assert isinstance(diff.empty, bool)


def test_topological_order(graphs):
    _, ig, _, _ = graphs
    order = topological_order(ig)
    assert order == [(), (0,), (2,), (0, 1), (0, 2), (0, 1, 2)]
    lone = AttractorGraph([(0,)], [], GraphKind.IG)
    assert topological_order(lone) == [(0,)]
    pair = AttractorGraph([(2,), (0,)], [], GraphKind.IG)
    assert topological_order(pair) == [(0,), (2,)]


def test_topological_order_cycle():
    g = AttractorGraph([(0,), (1,)], [Edge((0,), (1,), Provenance.IG_RULE),
                                      Edge((1,), (0,), Provenance.IG_RULE)], GraphKind.IG)
    with pytest.raises(NotADAG) as info:
        topological_order(g)
    assert set(info.value.cycle) == {(0,), (1,)}


def test_dot_export(graphs):
    _, ig, is_, _ = graphs
    dot = export_graph(merge_graphs(ig, is_), "dot")
    assert dot.startswith('digraph "Merged" {')
    assert 'c_3 -> c_1_3 [provenance="Both"];' in dot
    assert "peripheries=2" in dot and "GASS" in dot
    empty = export_graph(AttractorGraph([()], [], GraphKind.IG), "dot")
    assert "c_empty" in empty and "->" not in empty
    with pytest.raises(ValueError):
        export_graph(ig, "svg")


def test_json_round_trip(graphs):
    _, ig, is_, _ = graphs
    g = merge_graphs(ig, is_)
    text = export_graph(g, "json")
    back = graph_from_json(text)
    assert back == g
    assert export_graph(back, "json") == text
    data = json.loads(text)
    assert data["nodes"][-1]["is_gass"] is True
    assert {"src": [3], "dst": [1, 3], "provenance": "Both", "multiplicity": 1} in data["edges"]


def test_networkx_view(graphs):
    _, ig, _, _ = graphs
    G = ig.to_networkx()
    assert nx.is_directed_acyclic_graph(G) and G.number_of_edges() == 9


def _ig_conditions_hold(scheme, src, dst):
    gained = [i for i in dst if i not in src]
    lost = [i for i in src if i not in dst]
    return all(scheme.sign(src, i) > 0 for i in gained) and all(scheme.sign(dst, i) < 0 for i in lost)


@settings(max_examples=150, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_graph_properties(n, seed):
    sys = random_system(np.random.default_rng(seed), n)
    scheme, ig, is_, diff = analyze_graphs(sys)
    assert diff.empty
    for e in is_.edges:
        assert _ig_conditions_hold(scheme, e.src, e.dst)
    G = ig.to_networkx()
    assert nx.is_directed_acyclic_graph(G)
    sinks = [c for c in ig.nodes if G.out_degree(c) == 0]
    gass_c = sys.catalog().gass.community
    assert sinks == [gass_c]
    assert G.in_degree(()) == 0
    assert find_gass_map(sys)[tuple(range(n))].community == gass(sys.A, sys.b).community
    order = topological_order(ig)
    assert order[0] == () and order[-1] == gass_c
