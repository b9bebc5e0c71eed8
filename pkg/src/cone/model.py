"""The community-oriented embedding model: encoder, random-walk mixing, softmax head.

A node's content sequence goes through ``d`` independent LSTM cells (or a
feedforward stack over the bag of tokens), the cell outputs are mean-pooled
into a content embedding ``H``, and ``H`` is mixed along k-step random-walk
transitions, ``S = H @ T^k``.  A softmax layer over ``S`` is trained against
the example communities with full-batch AdaGrad.  Only ``S`` is used
downstream, for clustering.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from . import nn
from .communities import CommunitySet
from .graph import Graph, TransitionMatrix, k_step, transition_matrix
from .seeding import stage_rng

log = logging.getLogger(__name__)

ENCODERS = ("lstm", "feedforward")
ROLES = ("content", "regularized")


class DivergenceError(FloatingPointError):
    pass


class VocabularyMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class ConeConfig:
    """Model and training settings.

    ``p`` is the LSTM hidden size; with the feedforward encoder the
    embedding size is the last entry of ``hidden``.
    """

    encoder: str = "lstm"
    k: int = 2
    p: int = 16
    d: int = 2
    token_dim: int = 16
    hidden: tuple = (64, 32, 16)
    rho: float = 0.1
    epochs: int = 300
    max_len: int = 512
    seed: int = 0
    init_scale: float = nn.INIT_SCALE

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.encoder not in ENCODERS:
            raise ValueError(f"encoder must be one of {ENCODERS}, got {self.encoder!r}")
        for name in ("p", "d", "token_dim", "max_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.k < 0 or self.epochs < 0:
            raise ValueError("k and epochs must be >= 0")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if not self.hidden or min(self.hidden) < 1:
            raise ValueError("hidden widths must be positive")

    @property
    def embedding_size(self) -> int:
        return self.p if self.encoder == "lstm" else self.hidden[-1]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ConeConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass(eq=False)
class EmbeddingMatrix:
    """``p x n`` embedding; column ``i`` is node ``i``."""

    values: np.ndarray
    role: str = "regularized"
    ids: tuple = ()

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("embedding matrix must be 2-D")
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("embedding has non-finite entries")
        self.ids = tuple(self.ids)
        if self.ids and len(self.ids) != self.n:
            raise ValueError(f"{len(self.ids)} ids for {self.n} columns")

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def points(self) -> np.ndarray:
        """Node-major view, one row per node."""
        return self.values.T

    def column(self, i: int) -> np.ndarray:
        return self.values[:, i]


@dataclass(eq=False)
class LabelMatrix:
    values: np.ndarray  # (n, K)
    mask: np.ndarray  # supervised node indices, ascending

    @property
    def K(self) -> int:
        return self.values.shape[1]


def label_matrix(communities: CommunitySet, n: int) -> LabelMatrix:
    """Soft targets: a node in ``m`` training communities gets ``1/m`` on each.

    Nodes outside every training community are left out of the mask.
    """
    K = len(communities)
    L = np.zeros((n, K))
    for k, c in enumerate(communities):
        for i in c.members:
            if not 0 <= i < n:
                raise ValueError(f"community {c.id!r} member {i} outside [0, {n})")
            L[i, k] = 1.0
    counts = L.sum(axis=1)
    mask = np.flatnonzero(counts > 0)
    L[mask] /= counts[mask, None]
    return LabelMatrix(L, mask)


@dataclass(eq=False)
class ConeModel:
    config: ConeConfig
    vocab_size: int
    n_communities: int
    tables: list = field(default_factory=list)  # per-cell token tables, (V + 1, token_dim)
    cells: list = field(default_factory=list)
    stack: nn.DenseStack | None = None
    W: nn.Parameter | None = None
    trace: list = field(default_factory=list)
    final_embedding: EmbeddingMatrix | None = None

    @property
    def K(self) -> int:
        return self.n_communities

    @property
    def embedding_size(self) -> int:
        return self.config.embedding_size

    def parameters(self) -> list:
        out = []
        for table, cell in zip(self.tables, self.cells):
            out.append(table)
            out += cell.parameters()
        if self.stack is not None:
            out += self.stack.parameters()
        out.append(self.W)
        return out

    def named_parameters(self) -> dict:
        return {p.name: p for p in self.parameters()}


def init_model(config: ConeConfig, vocab_size: int, n_communities: int) -> ConeModel:
    """Fresh model.

    Recurrent, dense and token-table weights are uniform in
    ``[-init_scale, init_scale]``, forget-gate biases start at 1 and the
    softmax weights at 0.
    """
    if n_communities < 1:
        raise ValueError("need at least one training community")
    if vocab_size < 0:
        raise ValueError("vocab_size must be >= 0")
    rng = stage_rng(config.seed, "init")
    s = config.init_scale
    model = ConeModel(config, vocab_size, n_communities)
    if config.encoder == "lstm":
        for j in range(config.d):
            table = nn.uniform_init(rng, (vocab_size + 1, config.token_dim), s)
            table[0] = 0.0
            model.tables.append(nn.Parameter(table, name=f"cell{j}.tokens"))
            model.cells.append(nn.LSTMCell.init(rng, config.token_dim, config.p, f"cell{j}.", s))
    else:
        model.stack = nn.DenseStack.init(rng, vocab_size, config.hidden, "ff.", s)
    model.W = nn.Parameter(np.zeros((n_communities, config.embedding_size)), name="softmax.W")
    return model


# -- forward pieces -----------------------------------------------------------


@dataclass(eq=False)
class EncoderInput:
    """Sequences prepared once for repeated forward passes."""

    tokens: np.ndarray
    lengths: np.ndarray
    bag: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.tokens.shape[0]


def prepare_inputs(model: ConeModel, sequences: Sequence) -> EncoderInput:
    seqs = [tuple(getattr(s, "tokens", s))[: model.config.max_len] for s in sequences]
    tokens, lengths = nn.pad_sequences(seqs)
    V = model.vocab_size
    if tokens.size and (tokens.max() > V or tokens.min() < 0):
        bad = int(tokens.max()) if tokens.max() > V else int(tokens.min())
        raise VocabularyMismatchError(f"token index {bad} outside the model vocabulary [1, {V}]")
    bag = None
    if model.config.encoder == "feedforward":
        bag = np.zeros((len(seqs), V))
        for r, s in enumerate(seqs):
            for t in s:
                bag[r, t - 1] += 1.0
    return EncoderInput(tokens, lengths, bag)


def _content_rows(model: ConeModel, inputs: EncoderInput) -> nn.Tensor:
    if model.config.encoder == "feedforward":
        return nn.dense_relu_stack(inputs.bag, model.stack)
    outs = [
        nn.lstm_encode(inputs.tokens, inputs.lengths, cell, table)
        for cell, table in zip(model.cells, model.tables)
    ]
    return outs[0] if len(outs) == 1 else nn.mean_pool(outs)


def propagation_matrix(graph: Graph | TransitionMatrix, k: int):
    """``T^k`` for a graph (``None`` when ``k == 0``)."""
    if k == 0:
        return None
    t = graph if isinstance(graph, TransitionMatrix) else transition_matrix(graph)
    if t.steps == k:
        return t
    return k_step(t, k)


def _regularized_rows(h_rows: nn.Tensor, tk: TransitionMatrix | None) -> nn.Tensor:
    if tk is None:
        return h_rows
    if tk.n != h_rows.value.shape[0]:
        raise ValueError(f"embedding has {h_rows.value.shape[0]} nodes, transition matrix {tk.n}")
    return nn.propagate(h_rows, tk.matrix)


def _loss(model: ConeModel, s_rows: nn.Tensor, labels: LabelMatrix) -> nn.Tensor:
    if len(labels.mask) == 0:
        raise ValueError("no supervised nodes in the label matrix")
    if labels.K != model.K:
        raise ValueError(f"labels have {labels.K} communities, model {model.K}")
    logits = nn.linear(s_rows, model.W)
    return nn.softmax_xent_rows(logits, labels.values, labels.mask)


def pipeline_loss(model: ConeModel, inputs: EncoderInput, tk, labels: LabelMatrix) -> nn.Tensor:
    """Encoder through loss; the closure used for training and gradient checks."""
    return _loss(model, _regularized_rows(_content_rows(model, inputs), tk), labels)


# -- public operations ----------------------------------------------------------


def encode_contents(model: ConeModel, sequences: Sequence, ids=()) -> EmbeddingMatrix:
    """Content embeddings ``H`` (mean of the ``d`` cell outputs per node)."""
    rows = _content_rows(model, prepare_inputs(model, sequences))
    return EmbeddingMatrix(rows.value.T.copy(), role="content", ids=ids)


def regularize(h: EmbeddingMatrix, t: TransitionMatrix | Graph, k: int) -> EmbeddingMatrix:
    """``S = H @ T^k``; ``k == 0`` returns ``H`` unchanged.

    ``t`` may be a one-step matrix, an already-powered matrix with
    ``steps == k``, or a graph.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return EmbeddingMatrix(h.values.copy(), role="regularized", ids=h.ids)
    tk = propagation_matrix(t, k)
    if tk.n != h.n:
        raise ValueError(f"embedding has {h.n} columns, transition matrix is {tk.n} x {tk.n}")
    rows = nn.propagate(h.points, tk.matrix)
    return EmbeddingMatrix(rows.value.T.copy(), role="regularized", ids=h.ids)


def forward_loss(model: ConeModel, s: EmbeddingMatrix, labels: LabelMatrix) -> float:
    """Mean softmax cross-entropy of ``W s_i`` over the supervised nodes."""
    return float(_loss(model, nn.Tensor(s.points), labels).value)


def train(
    graph: Graph,
    sequences: Sequence,
    train_communities: CommunitySet,
    config: ConeConfig = ConeConfig(),
    vocab_size: int | None = None,
):
    """Fit a model to the example communities.

    Returns ``(model, trace)`` where ``trace[e]`` is the loss evaluated at
    the start of epoch ``e``.  ``model.final_embedding`` holds ``S`` from a
    forward pass after the last update.
    """
    if len(train_communities) < 1:
        raise ValueError("need at least one training community")
    if len(sequences) != graph.n:
        raise ValueError(f"{len(sequences)} content sequences for {graph.n} nodes")
    if vocab_size is None:
        vocab_size = max((max(getattr(s, "tokens", s), default=0) for s in sequences), default=0)
    model = init_model(config, vocab_size, len(train_communities))
    labels = label_matrix(train_communities, graph.n)
    tk = propagation_matrix(graph, config.k)
    inputs = prepare_inputs(model, sequences)
    params = model.parameters()

    trace = []
    for epoch in range(config.epochs):
        try:
            with nn.Tape() as tape:
                loss = pipeline_loss(model, inputs, tk, labels)
                tape.backward(loss)
        except FloatingPointError as exc:
            raise DivergenceError(f"epoch {epoch}: {exc}") from exc
        value = float(loss.value)
        if not np.isfinite(value):
            raise DivergenceError(f"epoch {epoch}: loss is {value}")
        trace.append(value)
        nn.adagrad_step(params, config.rho)
        if epoch % 50 == 0:
            log.debug("epoch %d loss %.6f", epoch, value)

    model.trace = trace
    s_rows = _regularized_rows(_content_rows(model, inputs), tk)
    model.final_embedding = EmbeddingMatrix(s_rows.value.T.copy(), role="regularized", ids=graph.ids)
    return model, trace


def embed(model: ConeModel, graph: Graph, sequences: Sequence) -> EmbeddingMatrix:
    """Out-of-sample embeddings ``S`` for any graph sharing the token space."""
    if len(sequences) != graph.n:
        raise ValueError(f"{len(sequences)} content sequences for {graph.n} nodes")
    inputs = prepare_inputs(model, sequences)
    tk = propagation_matrix(graph, model.config.k)
    rows = _regularized_rows(_content_rows(model, inputs), tk)
    return EmbeddingMatrix(rows.value.T.copy(), role="regularized", ids=graph.ids)


def with_config(config: ConeConfig, **changes) -> ConeConfig:
    return replace(config, **changes)
