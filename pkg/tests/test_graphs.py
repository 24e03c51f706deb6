import numpy as np
import pytest

from core.autodiff.rng import Stream, make_rng
from core.autodiff.tensor import Tensor
from core.errors import DimensionError, ParameterError
from core.graphs import AdjacencyMatrix
from core.graphs.decoder import GraphDecoder, l1_penalty, rows_to_adjacency, sample_graph


def test_decoder_output_width():
    dec = GraphDecoder(4, 3, 1, make_rng(0))
    logits = dec.decode_logits(np.zeros((2, 4)))
    assert logits.shape == (2, 12)
    assert set(dec.named_parameters()) == {
        "net.layers.0.weight",
        "net.layers.0.bias",
        "net.layers.1.weight",
        "net.layers.1.bias",
    }


def test_eval_threshold_is_strict():
    graph = sample_graph(Tensor([[0.0, 1e-9, -1e-9, 50.0]]), 1.0, None, "eval")
    assert graph.data.tolist() == [[0.0, 1.0, 0.0, 1.0]]


def test_large_logits_always_sampled_in_train_mode():
    rng = make_rng(0, Stream.GUMBEL)
    graph = sample_graph(Tensor(np.full((3, 6), 50.0)), 1.0, rng, "train")
    assert np.all(graph.data == 1.0)
    graph = sample_graph(Tensor(np.full((3, 6), -50.0)), 1.0, rng, "train")
    assert np.all(graph.data == 0.0)


def test_train_mode_needs_rng_and_positive_temperature():
    with pytest.raises(ParameterError):
        sample_graph(Tensor([[0.0]]), 1.0, None, "train")
    with pytest.raises(ParameterError):
        sample_graph(Tensor([[0.0]]), 0.0, make_rng(0), "train")


def test_l1_penalty_counts_edges_per_row():
    pen = l1_penalty(Tensor([[1.0, 0.0, 1.0], [0.0, 0.0, 0.0]]))
    assert pen.data.tolist() == [[2.0], [0.0]]


def test_flat_order_is_row_major():
    g = AdjacencyMatrix.from_edges(2, 1, [(2, 0), (0, 1)])
    assert g.flat().tolist() == [0.0, 1.0, 0.0, 0.0, 1.0, 0.0]
    assert AdjacencyMatrix.from_flat(g.flat(), 2, 1) == g
    assert rows_to_adjacency(np.stack([g.flat(), g.flat()]), 2, 1) == [g, g]


def test_text_format_round_trip(tmp_path):
    g = AdjacencyMatrix.from_edges(3, 1, [(0, 0), (0, 1), (3, 2)])
    assert g.to_text().splitlines()[0] == "3 1"
    path = tmp_path / "g.txt"
    g.save(path)
    assert AdjacencyMatrix.load(path) == g


def test_malformed_text_is_rejected():
    with pytest.raises(ParameterError):
        AdjacencyMatrix.from_text("2 1\n0 1\n1 0\n")
    with pytest.raises(ParameterError):
        AdjacencyMatrix.from_text("")


def test_validation():
    with pytest.raises(DimensionError):
        AdjacencyMatrix(np.zeros((2, 2), dtype=np.int8), 2, 1)
    with pytest.raises(ParameterError):
        AdjacencyMatrix(np.full((3, 2), 2, dtype=np.int8), 2, 1)


def test_subset_and_parents():
    full = AdjacencyMatrix.full(2, 1)
    g = AdjacencyMatrix.from_edges(2, 1, [(2, 1)])
    assert g.issubset(full) and not full.issubset(g)
    assert g.parents(1) == [2]
    assert full.edge_count() == 6
