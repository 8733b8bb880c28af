"""Cache-blocked CSR graph kernels with trace-driven cache simulation."""

from gcb.graph import (
    CsrGraph,
    GraphCapacityError,
    GraphFormatError,
    GraphGenSpec,
    from_edges,
    generate,
    load_edge_list,
    load_graph,
    load_matrix_market,
    transpose,
    write_edge_list,
)

__version__ = "0.1.0"
