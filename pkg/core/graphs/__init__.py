from core.graphs.adjacency import AdjacencyMatrix, LocalCausalGraph
from core.graphs.decoder import GraphDecoder, l1_penalty, rows_to_adjacency, sample_graph

__all__ = ["AdjacencyMatrix", "LocalCausalGraph", "GraphDecoder", "l1_penalty", "rows_to_adjacency", "sample_graph"]
