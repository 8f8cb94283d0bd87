"""Global attractor structure of Lotka-Volterra systems: equilibria, invasion
graphs, information structures and their structural stability."""
from .community import Community, community, label, parse_label
from .equilibria import (
    Catalog,
    Equilibrium,
    InvasionScheme,
    Linearization,
    LVSystem,
    enumerate_admissible,
    hyperbolicity_report,
    invasion_rate,
    invasion_scheme,
    linearize,
)
from .graphs import (
    AttractorGraph,
    Edge,
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
from .lcp import LCPSolution, gass, solve_lcp
from .matrix_analysis import (
    VLCertificate,
    certify_vl_stability,
    d_stability_falsifier,
    is_stable,
    principal_submatrix,
    quasidominance_weights,
    spectrum,
)

__version__ = "0.1.0"
