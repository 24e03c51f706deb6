from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from core.autodiff.layers import MLP, Dense, Module, prefixed
from core.autodiff.rng import Stream, make_rng
from core.autodiff.tensor import (
    Tensor,
    add,
    categorical_nll,
    concat,
    gaussian_nll,
    mul,
    relu,
    repeat_cols,
    stop_gradient,
    take_cols,
)
from core.config import Method, ModelConfig
from core.dynamics.layout import FactoredLayout, VariableKind
from core.errors import ParameterError
from core.graphs.adjacency import AdjacencyMatrix
from core.graphs.decoder import GraphDecoder, SampleMode, sample_graph
from core.vq.codebook import Codebook, straight_through

# Methods whose heads read masked per-variable features.
MASKED_METHODS = ("fcdl", "modular", "oracle-graph", "ncd")


@dataclass
class HeadOutput:
    kind: VariableKind
    logits: Tensor | None = None
    mean: Tensor | None = None
    log_std: Tensor | None = None


@dataclass
class Inference:
    """Everything the model decides about a batch before prediction."""

    features: Tensor | None
    h: Tensor | None
    z: np.ndarray
    e: np.ndarray | None
    graph_logits: Tensor | None
    graph: Tensor | None


def one_hot(z: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((len(z), k))
    out[np.arange(len(z)), z] = 1.0
    return out


class DynamicsModel(Module):
    """
    p̂(s'|s, a; A, z): one head per state variable.

    Every input variable (state and action) goes through its own Dense+ReLU feature
    layer. Head j sees the concatenated features, each block scaled by the matching
    entry of column j of the adjacency, plus a one-hot of the subgroup index z.
    The encoder reads the same features, so it shares the first layer with the heads.
    """

    def __init__(
        self,
        layout: FactoredLayout,
        cfg: ModelConfig,
        method: Method = "fcdl",
        seed: int = 0,
        global_graph: AdjacencyMatrix | None = None,
    ):
        self.layout = layout
        self.cfg = cfg
        self.method = method
        self.k = cfg.codebook_size if method == "fcdl" else 1
        n, m = layout.n_state, layout.n_action
        self.n_entries = (n + m) * n
        hidden = [cfg.hidden_dim] * cfg.hidden_layers

        if method == "oracle-graph":
            if global_graph is None:
                raise ParameterError("oracle-graph needs the environment's global causal graph")
            if global_graph.shape != (n + m, n):
                raise ParameterError(f"global graph shape {global_graph.shape} does not fit the layout")
        self.global_graph = global_graph

        # Separate init streams per component keep the heads identical across methods for one seed.
        self.features: List[Dense] = []
        self.heads: List[MLP] = []
        self.encoder: MLP | None = None
        self.decoder: GraphDecoder | None = None
        self.codebook: Codebook | None = None
        self.dense: MLP | None = None

        if method == "dense":
            widths = sum(v.head_width for v in layout.state)
            self.dense = MLP([layout.state_dim + layout.action_dim, *hidden, widths], make_rng(seed, Stream.INIT, 4))
            return

        feat_rng = make_rng(seed, Stream.INIT, 0)
        self.features = [Dense(v.size, cfg.feature_dim, feat_rng) for v in layout.inputs]
        head_rng = make_rng(seed, Stream.INIT, 1)
        head_in = len(layout.inputs) * cfg.feature_dim + self.k
        self.heads = [MLP([head_in, *hidden, v.head_width], head_rng) for v in layout.state]

        if method in ("fcdl", "ncd"):
            enc_sizes = [len(layout.inputs) * cfg.feature_dim, *cfg.encoder_hidden, cfg.code_dim]
            self.encoder = MLP(enc_sizes, make_rng(seed, Stream.INIT, 2))
            self.decoder = GraphDecoder(cfg.code_dim, n, m, make_rng(seed, Stream.INIT, 3), hidden=cfg.decoder_hidden)
        if method == "fcdl":
            self.codebook = Codebook.create(
                self.k, cfg.code_dim, make_rng(seed, Stream.CODEBOOK), decay=cfg.ema_decay, eps=cfg.ema_eps
            )

    # --- parameters -----------------------------------------------------------

    def named_parameters(self) -> Dict[str, Tensor]:
        out: Dict[str, Tensor] = {}
        for i, layer in enumerate(self.features):
            out.update(prefixed(f"features.{i}", layer.named_parameters()))
        if self.encoder is not None:
            out.update(prefixed("encoder", self.encoder.named_parameters()))
        if self.decoder is not None:
            out.update(prefixed("decoder", self.decoder.named_parameters()))
        for j, head in enumerate(self.heads):
            out.update(prefixed(f"heads.{j}", head.named_parameters()))
        if self.dense is not None:
            out.update(prefixed("dense", self.dense.named_parameters()))
        return out

    def parameter_groups(self) -> Dict[str, List[Tensor]]:
        groups: Dict[str, List[Tensor]] = {}
        for name, p in self.named_parameters().items():
            groups.setdefault(name.split(".", 1)[0], []).append(p)
        return groups

    def state_dict(self) -> Dict[str, np.ndarray]:
        blobs = super().state_dict()
        if self.codebook is not None:
            blobs.update({f"codebook.{k}": v for k, v in self.codebook.state_dict().items()})
        return blobs

    def load_state_dict(self, blobs: Dict[str, np.ndarray]) -> None:
        super().load_state_dict(blobs)
        if self.codebook is not None:
            self.codebook.load_state_dict(
                {k.split(".", 1)[1]: v for k, v in blobs.items() if k.startswith("codebook.")}
            )

    @property
    def graph_frozen(self) -> bool:
        return self.cfg.graph_logit_override is not None

    # --- forward pieces -------------------------------------------------------

    def extract_features(self, states, actions) -> Tensor:
        parts = self.layout.split_inputs(states, actions)
        return concat([relu(layer(Tensor(x))) for layer, x in zip(self.features, parts)])

    def encode(self, states, actions, features: Tensor | None = None) -> Tensor:
        """Latent embedding h (B×D) of each (s, a) pair."""
        if self.encoder is None:
            raise ParameterError(f"method {self.method!r} has no encoder")
        feats = self.extract_features(states, actions) if features is None else features
        # A frozen graph leaves the encoder nothing to steer, so it must not move the shared features.
        return self.encoder(stop_gradient(feats) if self.graph_frozen else feats)

    def infer(
        self,
        states,
        actions,
        mode: SampleMode = "eval",
        rng: np.random.Generator | None = None,
        track: bool = True,
    ) -> Inference:
        states, actions = self.layout.check_batch(states, actions)
        batch = states.shape[0]
        zeros = np.zeros(batch, dtype=np.int64)
        if self.method == "dense":
            return Inference(None, None, zeros, None, None, None)

        feats = self.extract_features(states, actions)
        if self.method == "modular":
            return Inference(feats, None, zeros, None, None, Tensor(np.ones((batch, self.n_entries))))
        if self.method == "oracle-graph":
            flat = np.tile(self.global_graph.flat(), (batch, 1))  # type: ignore[union-attr]
            return Inference(feats, None, zeros, None, None, Tensor(flat))

        h = self.encode(states, actions, features=feats)
        if self.method == "ncd":
            logits = self.decoder.decode_logits(h)  # type: ignore[union-attr]
            return Inference(feats, h, zeros, None, logits, sample_graph(logits, self.cfg.temperature, rng, mode))

        z, e = self.codebook.quantize(h.data, track=track)  # type: ignore[union-attr]
        if self.graph_frozen:
            logits = Tensor(np.full((batch, self.n_entries), float(self.cfg.graph_logit_override)))
        else:
            logits = self.decoder.decode_logits(straight_through(h, e))  # type: ignore[union-attr]
        return Inference(feats, h, z, e, logits, sample_graph(logits, self.cfg.temperature, rng, mode))

    def _as_graph(self, graph, batch: int) -> Tensor:
        if isinstance(graph, AdjacencyMatrix):
            if graph.shape != (self.layout.n_state + self.layout.n_action, self.layout.n_state):
                raise ParameterError(f"adjacency shape {graph.shape} does not fit the layout")
            return Tensor(np.tile(graph.flat(), (batch, 1)))
        graph = graph if isinstance(graph, Tensor) else Tensor(graph)
        if graph.shape[1] != self.n_entries or graph.shape[0] not in (1, batch):
            raise ParameterError(f"graph batch shape {graph.shape} does not fit ({batch}, {self.n_entries})")
        return graph

    def _check_z(self, z, batch: int) -> np.ndarray:
        z = np.asarray(z, dtype=np.int64)
        z = np.full(batch, int(z)) if z.ndim == 0 else z
        if z.shape != (batch,) or np.any(z < 0) or np.any(z >= self.k):
            raise ParameterError(f"subgroup index must lie in [0, {self.k}) for every row")
        return z

    def heads_from_features(self, feats: Tensor, graph, z) -> List[HeadOutput]:
        batch = feats.shape[0]
        graph = self._as_graph(graph, batch)
        code = Tensor(one_hot(self._check_z(z, batch), self.k))
        n, fdim = self.layout.n_state, self.cfg.feature_dim
        rows = len(self.layout.inputs)
        outputs = []
        for j, (head, spec) in enumerate(zip(self.heads, self.layout.state)):
            column = take_cols(graph, [i * n + j for i in range(rows)])
            masked = mul(feats, repeat_cols(column, fdim))
            outputs.append(self._split(spec.kind, spec.size, head(concat([masked, code]))))
        return outputs

    def _split(self, kind: VariableKind, size: int, out: Tensor) -> HeadOutput:
        if kind == "categorical":
            return HeadOutput(kind, logits=out)
        return HeadOutput(kind, mean=take_cols(out, range(size)), log_std=take_cols(out, range(size, 2 * size)))

    def _dense_heads(self, states: np.ndarray, actions: np.ndarray) -> List[HeadOutput]:
        out = self.dense(Tensor(np.concatenate([states, actions], axis=1)))  # type: ignore[misc]
        outputs, pos = [], 0
        for spec in self.layout.state:
            block = take_cols(out, range(pos, pos + spec.head_width))
            outputs.append(self._split(spec.kind, spec.size, block))
            pos += spec.head_width
        return outputs

    def predict(self, states, actions, graph, z) -> List[HeadOutput]:
        """Per-variable distribution parameters under an explicit adjacency and subgroup index."""
        states, actions = self.layout.check_batch(states, actions)
        if self.method == "dense":
            return self._dense_heads(states, actions)
        return self.heads_from_features(self.extract_features(states, actions), graph, z)

    def forward(
        self,
        states,
        actions,
        mode: SampleMode = "train",
        rng: np.random.Generator | None = None,
        track: bool = True,
    ) -> tuple[Inference, List[HeadOutput]]:
        states, actions = self.layout.check_batch(states, actions)
        inf = self.infer(states, actions, mode=mode, rng=rng, track=track)
        if self.method == "dense":
            return inf, self._dense_heads(states, actions)
        return inf, self.heads_from_features(inf.features, inf.graph, inf.z)  # type: ignore[arg-type]

    # --- likelihood -----------------------------------------------------------

    def targets(self, next_states: np.ndarray, states: np.ndarray | None, j: int) -> np.ndarray:
        block = np.atleast_2d(next_states)[:, self.layout.state_slice(j)]
        if self.cfg.predict_delta and not self.layout.state[j].is_categorical:
            if states is None:
                raise ParameterError("delta targets need the current states")
            block = block - np.atleast_2d(states)[:, self.layout.state_slice(j)]
        return block

    def per_variable_nll(self, heads: Sequence[HeadOutput], next_states, states=None) -> List[Tensor]:
        next_states = np.atleast_2d(np.asarray(next_states, dtype=np.float64))
        terms = []
        for j, out in enumerate(heads):
            if out.kind == "categorical":
                terms.append(categorical_nll(out.logits, self.layout.class_targets(next_states, j)))
            else:
                terms.append(gaussian_nll(out.mean, out.log_std, self.targets(next_states, states, j)))
        return terms

    def nll(self, heads: Sequence[HeadOutput], next_states, states=None) -> Tensor:
        """Σ_j −log p̂(s'_j | ·) per row; B×1."""
        terms = self.per_variable_nll(heads, next_states, states)
        total = terms[0]
        for t in terms[1:]:
            total = add(total, t)
        return total

    # --- deterministic use (planning, evaluation) -----------------------------

    def point_prediction(self, heads: Sequence[HeadOutput], states: np.ndarray) -> np.ndarray:
        """Mode of categorical heads, mean of Gaussian heads, as a flat next-state batch."""
        states = np.atleast_2d(states)
        out = np.zeros((states.shape[0], self.layout.state_dim))
        for j, (spec, head) in enumerate(zip(self.layout.state, heads)):
            sl = self.layout.state_slice(j)
            if spec.is_categorical:
                out[np.arange(len(out)), sl.start + np.argmax(head.logits.data, axis=1)] = 1.0  # type: ignore[union-attr]
            else:
                mean = head.mean.data  # type: ignore[union-attr]
                out[:, sl] = mean + states[:, sl] if self.cfg.predict_delta else mean
        return out

    def predict_next(self, states, actions) -> np.ndarray:
        states, actions = self.layout.check_batch(states, actions)
        _, heads = self.forward(states, actions, mode="eval", track=False)
        return self.point_prediction(heads, states)

    def assign(self, states, actions) -> tuple[np.ndarray, np.ndarray]:
        """Eval-mode (z, flat graph) per row, without touching usage counters."""
        inf = self.infer(states, actions, mode="eval", track=False)
        batch = len(inf.z)
        if inf.graph is None:
            return inf.z, np.ones((batch, self.n_entries))
        return inf.z, np.broadcast_to(inf.graph.data, (batch, self.n_entries)).copy()

    def code_graph(self, code: int) -> AdjacencyMatrix:
        """Eval LCG decoded from one codebook entry."""
        if self.codebook is None:
            raise ParameterError(f"method {self.method!r} has no codebook")
        if not 0 <= code < self.k:
            raise ParameterError(f"code index {code} outside [0, {self.k})")
        if self.graph_frozen:
            logits = Tensor(np.full((1, self.n_entries), float(self.cfg.graph_logit_override)))
        else:
            logits = self.decoder.decode_logits(self.codebook.codes[code : code + 1])  # type: ignore[union-attr]
        graph = sample_graph(logits, self.cfg.temperature, None, "eval")
        return AdjacencyMatrix.from_flat(graph.data[0], self.layout.n_state, self.layout.n_action)
