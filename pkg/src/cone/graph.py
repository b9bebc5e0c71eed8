"""Graph storage, random-walk transition matrices and their powers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

# Tk is kept dense once its fill ratio passes this.
DENSE_FILL_RATIO = 0.25


class GraphFormatError(ValueError):
    """Raised for malformed, negative-weight or duplicate edge records."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable weighted graph over contiguous node indices ``0..n-1``.

    ``src``, ``dst`` and ``weight`` hold each edge once.  Undirected graphs
    expose every edge in both directions through :attr:`adjacency`.
    """

    ids: tuple
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    directed: bool = False
    index: dict = field(init=False, repr=False, compare=False)
    adjacency: sp.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {v: i for i, v in enumerate(self.ids)})
        n = len(self.ids)
        if self.directed:
            rows, cols, vals = self.src, self.dst, self.weight
        else:
            rows = np.concatenate([self.src, self.dst])
            cols = np.concatenate([self.dst, self.src])
            vals = np.concatenate([self.weight, self.weight])
        adj = sp.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=np.float64)
        adj.sort_indices()
        object.__setattr__(self, "adjacency", adj)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.ids == other.ids
            and self.directed == other.directed
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and np.array_equal(self.weight, other.weight)
        )

    __hash__ = None

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def num_edges(self) -> int:
        return len(self.src)

    @property
    def degrees(self) -> np.ndarray:
        """Weighted out-degree ``d_i = sum_j w_ij``."""
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    def neighbors(self, i: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[i]:a.indptr[i + 1]]

    def has_edge(self, i: int, j: int) -> bool:
        return j in self.neighbors(i)

    def edges(self):
        """Iterate ``(src_id, dst_id, weight)`` in stored order."""
        for s, d, w in zip(self.src, self.dst, self.weight):
            yield self.ids[s], self.ids[d], float(w)


def build_graph(
    edge_list: Iterable[Sequence],
    directed: bool = False,
    nodes: Iterable[Hashable] | None = None,
    symmetrize: bool = False,
    line_numbers: Sequence[int] | None = None,
) -> Graph:
    """Build a :class:`Graph` from ``(src, dst[, weight])`` records.

    Node IDs are reindexed in first-appearance order, with the optional
    ``nodes`` list taking precedence (this is the only way to declare
    isolated nodes).  Self-loops and zero-weight edges are dropped.  A
    repeated pair raises :class:`GraphFormatError`; for undirected graphs
    ``(a, b)`` and ``(b, a)`` are the same pair.  ``symmetrize`` adds the
    reverse of every directed edge that is not already present.
    ``line_numbers`` relabels records in error messages with file lines.
    """
    where = (lambda k: f"line {line_numbers[k - 1]}") if line_numbers else (lambda k: f"record {k}")
    index: dict = {}
    ids: list = []

    def intern(v):
        if v not in index:
            index[v] = len(ids)
            ids.append(v)
        return index[v]

    for v in nodes or ():
        intern(v)

    seen: dict = {}
    src, dst, wts = [], [], []
    for lineno, rec in enumerate(edge_list, start=1):
        rec = tuple(rec)
        if len(rec) not in (2, 3):
            raise GraphFormatError(f"{where(lineno)}: expected 2 or 3 fields, got {len(rec)}")
        a, b = rec[0], rec[1]
        try:
            w = float(rec[2]) if len(rec) == 3 else 1.0
        except (TypeError, ValueError):
            raise GraphFormatError(f"{where(lineno)}: bad weight {rec[2]!r}") from None
        if not math.isfinite(w):
            raise GraphFormatError(f"{where(lineno)}: non-finite weight {w}")
        if w < 0:
            raise GraphFormatError(f"{where(lineno)}: negative weight {w} on ({a}, {b})")
        i, j = intern(a), intern(b)
        if i == j or w == 0:
            continue
        key = (i, j) if directed else (min(i, j), max(i, j))
        if key in seen:
            raise GraphFormatError(
                f"{where(lineno)}: duplicate edge ({a}, {b}), first seen at {where(seen[key])}"
            )
        seen[key] = lineno
        src.append(i)
        dst.append(j)
        wts.append(w)

    if directed and symmetrize:
        for i, j, w in list(zip(src, dst, wts)):
            if (j, i) not in seen:
                seen[(j, i)] = 0
                src.append(j)
                dst.append(i)
                wts.append(w)

    return Graph(
        ids=tuple(ids),
        src=np.asarray(src, dtype=np.int64),
        dst=np.asarray(dst, dtype=np.int64),
        weight=np.asarray(wts, dtype=np.float64),
        directed=directed,
    )


def parse_edge_lines(lines: Iterable[str]):
    """Yield ``(lineno, src, dst, weight)`` from ``src dst [weight]`` lines.

    Blank lines and ``#`` comments are skipped; errors carry the 1-based
    line number.
    """
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphFormatError(f"line {lineno}: expected 'src dst [weight]', got {line!r}")
        w = 1.0
        if len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise GraphFormatError(f"line {lineno}: bad weight {parts[2]!r}") from None
            if w < 0:
                raise GraphFormatError(f"line {lineno}: negative weight in {line!r}")
        yield lineno, parts[0], parts[1], w


def read_edge_file(path, directed: bool = False, nodes=None, symmetrize: bool = False) -> Graph:
    with open(path, encoding="utf-8") as fh:
        recs = list(parse_edge_lines(fh))
    return build_graph(
        [r[1:] for r in recs],
        directed=directed,
        nodes=nodes,
        symmetrize=symmetrize,
        line_numbers=[r[0] for r in recs],
    )


def write_edge_file(g: Graph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a, b, w in g.edges():
            fh.write(f"{a} {b}\n" if w == 1.0 else f"{a} {b} {w!r}\n")


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic random-walk matrix ``T`` raised to power ``steps``.

    ``matrix`` is either a CSR matrix or a dense ndarray, depending on fill.
    """

    matrix: sp.csr_matrix | np.ndarray
    steps: int = 1

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_dense(self) -> bool:
        return isinstance(self.matrix, np.ndarray)

    def toarray(self) -> np.ndarray:
        return self.matrix.copy() if self.is_dense else self.matrix.toarray()

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()


def _maybe_densify(m):
    if sp.issparse(m):
        n = m.shape[0]
        if n and m.nnz > DENSE_FILL_RATIO * n * n:
            return m.toarray()
        m = m.tocsr()
        m.sort_indices()
    return m


def transition_matrix(g: Graph) -> TransitionMatrix:
    """One-step transitions ``t_ij = w_ij / d_i`` over out-edges.

    Nodes with no out-edges get a self-transition of 1 so every row stays
    stochastic.
    """
    adj = g.adjacency
    deg = g.degrees
    dangling = deg == 0
    inv = np.zeros_like(deg)
    inv[~dangling] = 1.0 / deg[~dangling]
    t = sp.diags(inv) @ adj
    if dangling.any():
        t = t + sp.diags(dangling.astype(np.float64))
    return TransitionMatrix(_maybe_densify(sp.csr_matrix(t)), steps=1)


def k_step(t: TransitionMatrix, k: int) -> TransitionMatrix:
    """Return ``T^k`` by repeated multiplication (``k >= 1``)."""
    if t.steps != 1:
        raise ValueError(f"k_step expects a one-step matrix, got steps={t.steps}")
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    base = t.matrix
    out = base
    for _ in range(int(k) - 1):
        out = out @ base
        if sp.issparse(out):
            out = _maybe_densify(out)
            if isinstance(out, np.ndarray) and sp.issparse(base):
                base = base.toarray()
        else:
            out = np.asarray(out)
    return TransitionMatrix(out, steps=int(k))
