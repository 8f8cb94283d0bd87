"""Invasion Graph and Information Structure of a Lotka-Volterra system.

The Invasion Graph (IG) is read off the invasion scheme by sign rules.  The
Information Structure (IS) is built independently from the GASS of every
subcommunity, computed by LCP.  For VL-stable systems with all equilibria
hyperbolic the two graphs coincide.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace

import networkx as nx
import numpy as np

from .community import EMPTY, Community, all_subsets, community, label, sort_key
from .equilibria import Equilibrium, InvasionScheme, LVSystem, invasion_scheme
from .errors import MultipleSolutions, NoSolution, NotADAG, VLAssumptionViolated
from .lcp import solve_lcp
from .matrix_analysis import DEFAULT_TOL


class Provenance(str, enum.Enum):
    IG_RULE = "IGRule"
    IS_RULE = "ISRule"
    BOTH = "Both"
    ODE_VERIFIED = "ODEVerified"


class GraphKind(str, enum.Enum):
    IG = "IG"
    IS = "IS"
    MERGED = "Merged"


@dataclass(frozen=True)
class Edge:
    src: Community
    dst: Community
    provenance: Provenance
    # number of subcommunities K whose GASS produced this IS edge
    multiplicity: int = 1

    @property
    def key(self) -> tuple[Community, Community]:
        return (self.src, self.dst)


@dataclass(eq=False)
class AttractorGraph:
    nodes: list[Community]
    edges: list[Edge]
    kind: GraphKind
    equilibria: dict[Community, Equilibrium] = field(default_factory=dict)
    anomalies: list[tuple[Community, Community]] = field(default_factory=list)

    def edge_set(self) -> set[tuple[Community, Community]]:
        return {e.key for e in self.edges}

    def successors(self, c: Community) -> list[Community]:
        return [e.dst for e in self.edges if e.src == c]

    def to_networkx(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(self.edge_set())
        return g

    def __eq__(self, other) -> bool:
        if not isinstance(other, AttractorGraph):
            return NotImplemented
        if self.kind != other.kind or self.nodes != other.nodes or self.edges != other.edges:
            return False
        if self.equilibria.keys() != other.equilibria.keys():
            return False
        for c, eq in self.equilibria.items():
            o = other.equilibria[c]
            if (eq.hyperbolic, eq.is_gass) != (o.hyperbolic, o.is_gass):
                return False
            if not np.array_equal(eq.u_star, o.u_star):
                return False
        return True


def _sorted_edges(edges) -> list[Edge]:
    return sorted(edges, key=lambda e: (sort_key(e.src), sort_key(e.dst)))


def _node_equilibria(sys: LVSystem | None, scheme: InvasionScheme, tol: float):
    if sys is None:
        return {}
    catalog = sys.catalog(tol)
    return {c: catalog[c] for c in scheme.communities}


def build_ig(scheme: InvasionScheme, sys: LVSystem | None = None,
             tol: float = DEFAULT_TOL) -> AttractorGraph:
    """Edge I -> J iff r_i(I) > 0 on J minus I and r_i(J) < 0 on I minus J."""
    nodes = sorted(scheme.communities, key=sort_key)
    edges = []
    for I in nodes:
        sI = scheme.signs[I]
        for J in nodes:
            if I == J:
                continue
            sJ = scheme.signs[J]
            gained = [i for i in J if i not in I]
            lost = [i for i in I if i not in J]
            if all(sI[i] > 0 for i in gained) and all(sJ[i] < 0 for i in lost):
                edges.append(Edge(I, J, Provenance.IG_RULE))
    return AttractorGraph(nodes, _sorted_edges(edges), GraphKind.IG,
                          _node_equilibria(sys, scheme, tol))


def find_gass_map(sys: LVSystem, tol: float = DEFAULT_TOL) -> dict[Community, Equilibrium]:
    """GASS of every subcommunity J, each from LCP(-A(J), -b(J)).

    Follows the memoized top-down recursion from the full community; the
    returned map is ordered by (cardinality, lexicographic).
    """
    n = sys.n
    memo: dict[Community, Equilibrium] = {}

    def find(J: Community) -> Equilibrium:
        if J in memo:
            return memo[J]
        u = np.zeros(n)
        support: Community = EMPTY
        if J:
            idx = list(J)
            try:
                sol = solve_lcp(-sys.A[np.ix_(idx, idx)], -sys.b[idx], tol)
            except (NoSolution, MultipleSolutions) as exc:
                raise VLAssumptionViolated(f"LCP failed on {label(J)}: {exc}", J) from exc
            u[idx] = sol.x
            support = tuple(J[k] for k in sol.support)
        memo[J] = Equilibrium(support, u, admissible=True, is_gass=(len(J) == n))
        for i in J:
            find(tuple(j for j in J if j != i))
        return memo[J]

    find(tuple(range(n)))
    return {J: memo[J] for J in all_subsets(range(n))}


def build_is(sys: LVSystem, gass_map: dict[Community, Equilibrium],
             scheme: InvasionScheme, tol: float = DEFAULT_TOL) -> AttractorGraph:
    """For each admissible I and each K with I < K <= I + invaders(I), draw
    I -> support(GASS(K)).  Self-edges are dropped and kept as anomalies."""
    nodes = sorted(scheme.communities, key=sort_key)
    counts: dict[tuple[Community, Community], int] = {}
    anomalies: list[tuple[Community, Community]] = []
    for I in nodes:
        invaders = [i for i in range(sys.n) if scheme.signs[I][i] > 0]
        for extra in all_subsets(invaders):
            if not extra:
                continue
            K = community(I + extra)
            target = gass_map[K].community
            if target == I:
                anomalies.append((I, K))
                continue
            counts[(I, target)] = counts.get((I, target), 0) + 1
    edges = [Edge(s, d, Provenance.IS_RULE, m) for (s, d), m in counts.items()]
    return AttractorGraph(nodes, _sorted_edges(edges), GraphKind.IS,
                          _node_equilibria(sys, scheme, tol), anomalies)


@dataclass(frozen=True)
class GraphDiff:
    only_in_ig: list[tuple[Community, Community]]
    only_in_is: list[tuple[Community, Community]]
    node_mismatch: bool = False

    @property
    def empty(self) -> bool:
        return not (self.only_in_ig or self.only_in_is or self.node_mismatch)

    def describe(self) -> str:
        if self.empty:
            return "IG and IS coincide"
        lines = []
        if self.node_mismatch:
            lines.append("node sets differ")
        lines += [f"only in IG: {label(s)} -> {label(d)}" for s, d in self.only_in_ig]
        lines += [f"only in IS: {label(s)} -> {label(d)}" for s, d in self.only_in_is]
        return "\n".join(lines)


def compare_graphs(ig: AttractorGraph, is_: AttractorGraph) -> GraphDiff:
    a, b = ig.edge_set(), is_.edge_set()
    key = lambda e: (sort_key(e[0]), sort_key(e[1]))
    return GraphDiff(sorted(a - b, key=key), sorted(b - a, key=key),
                     set(ig.nodes) != set(is_.nodes))


def merge_graphs(ig: AttractorGraph, is_: AttractorGraph) -> AttractorGraph:
    by_key: dict[tuple[Community, Community], Edge] = {e.key: e for e in ig.edges}
    for e in is_.edges:
        if e.key in by_key:
            by_key[e.key] = replace(e, provenance=Provenance.BOTH)
        else:
            by_key[e.key] = e
    nodes = sorted(set(ig.nodes) | set(is_.nodes), key=sort_key)
    equilibria = {**is_.equilibria, **ig.equilibria}
    return AttractorGraph(nodes, _sorted_edges(by_key.values()), GraphKind.MERGED,
                          equilibria, list(is_.anomalies))


def analyze_graphs(sys: LVSystem, sign_tol: float = DEFAULT_TOL, tol: float = DEFAULT_TOL):
    """Scheme, IG, IS and their diff for one system."""
    scheme = invasion_scheme(sys, sign_tol, tol)
    ig = build_ig(scheme, sys, tol)
    is_ = build_is(sys, find_gass_map(sys, tol), scheme, tol)
    return scheme, ig, is_, compare_graphs(ig, is_)


def topological_order(g: AttractorGraph) -> list[Community]:
    """Topological order with ties broken by (cardinality, lexicographic)."""
    G = g.to_networkx()
    try:
        return list(nx.lexicographical_topological_sort(G, key=sort_key))
    except nx.NetworkXUnfeasible:
        raise NotADAG([u for u, _ in nx.find_cycle(G)]) from None


def _node_id(c: Community) -> str:
    return "c_" + ("_".join(str(i + 1) for i in c) if c else "empty")


def _to_dot(g: AttractorGraph) -> str:
    lines = [f'digraph "{g.kind.value}" {{', "  rankdir=BT;"]
    for c in g.nodes:
        text = label(c)
        attrs = []
        eq = g.equilibria.get(c)
        if eq is not None:
            text += "\\n(" + ", ".join(f"{x:.6f}" for x in eq.u_star) + ")"
            if eq.is_gass:
                text += "\\nGASS"
                attrs.append("peripheries=2")
                attrs.append("color=red")
        attrs.insert(0, f'label="{text}"')
        lines.append(f"  {_node_id(c)} [{', '.join(attrs)}];")
    for e in g.edges:
        lines.append(f'  {_node_id(e.src)} -> {_node_id(e.dst)} [provenance="{e.provenance.value}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _members(c: Community) -> list[int]:
    return [i + 1 for i in c]


def _to_json(g: AttractorGraph) -> str:
    nodes = []
    for c in g.nodes:
        eq = g.equilibria.get(c)
        nodes.append({
            "community": _members(c),
            "u_star": None if eq is None else [float(x) for x in eq.u_star],
            "hyperbolic": None if eq is None else eq.hyperbolic,
            "is_gass": None if eq is None else eq.is_gass,
        })
    edges = [{"src": _members(e.src), "dst": _members(e.dst), "provenance": e.provenance.value,
              "multiplicity": e.multiplicity} for e in g.edges]
    return json.dumps({"kind": g.kind.value, "nodes": nodes, "edges": edges}, indent=2) + "\n"


def export_graph(g: AttractorGraph, fmt: str = "dot") -> str:
    fmt = fmt.lower()
    if fmt == "dot":
        return _to_dot(g)
    if fmt == "json":
        return _to_json(g)
    raise ValueError(f"unknown graph format {fmt!r}")


def graph_from_json(text: str) -> AttractorGraph:
    data = json.loads(text)
    nodes, equilibria = [], {}
    for item in data["nodes"]:
        c = community(i - 1 for i in item["community"])
        nodes.append(c)
        if item.get("u_star") is not None:
            equilibria[c] = Equilibrium(c, np.array(item["u_star"], dtype=float), True,
                                        item.get("hyperbolic"), bool(item.get("is_gass")))
    edges = [Edge(community(i - 1 for i in e["src"]), community(i - 1 for i in e["dst"]),
                  Provenance(e["provenance"]), int(e.get("multiplicity", 1)))
             for e in data["edges"]]
    return AttractorGraph(nodes, edges, GraphKind(data.get("kind", "Merged")), equilibria)
