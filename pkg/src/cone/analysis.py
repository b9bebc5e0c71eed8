"""Edge-density and content-homogeneity diagnostics for community sets.

These reproduce the motivating histograms: apply :func:`density` and
:func:`homogeneity` to every community, then bin with :func:`distribution`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .communities import Community, CommunitySet
from .encoding import NodeAttributes
from .graph import Graph


class UndefinedMetricError(ValueError):
    """The metric needs at least two members."""


class DegenerateContentError(ValueError):
    """Network-wide average pair similarity is zero."""


def half_sigmoid(t):
    """``(1 - e^-t) / (1 + e^-t)``, i.e. ``tanh(t / 2)``."""
    return np.tanh(np.asarray(t, dtype=np.float64) / 2.0)


def _members(c) -> np.ndarray:
    members = c.members if isinstance(c, Community) else c
    return np.fromiter(sorted(members), dtype=np.int64)


def density(c, g: Graph) -> float:
    """``2|E_C| / (|V_C|(|V_C|-1))`` over induced edges.

    For directed graphs a pair counts once if linked in either direction.
    """
    idx = _members(c)
    k = len(idx)
    if k < 2:
        raise UndefinedMetricError(f"density undefined for community of size {k}")
    sub = g.adjacency[idx][:, idx]
    sub = (sub + sub.T) if g.directed else sub
    pairs = sp_upper_nnz(sub)
    return 2.0 * pairs / (k * (k - 1))


def sp_upper_nnz(m) -> int:
    coo = m.tocoo()
    return int(np.count_nonzero((coo.row < coo.col) & (coo.data != 0)))


@dataclass(frozen=True)
class PairSimilarity:
    """Average of ``a_i . a_j`` over ordered pairs ``i != j``."""

    value: float
    pairs: int


def average_similarity(attrs: NodeAttributes) -> PairSimilarity:
    """Exact network-wide average dot product over ordered pairs.

    Uses ``sum_{i != j} a_i . a_j = |sum_i a_i|^2 - sum_i |a_i|^2`` so the
    cost is linear in the size of the attribute matrix.
    """
    a = attrs.values
    n = a.shape[0]
    if n < 2:
        raise UndefinedMetricError("need at least two nodes for a pair average")
    total = a.sum(axis=0)
    s = float(total @ total - np.einsum("ij,ij->", a, a))
    pairs = n * (n - 1)
    return PairSimilarity(s / pairs, pairs)


def homogeneity(c, g: Graph, attrs: NodeAttributes, avg: float | PairSimilarity | None = None) -> float:
    """Mean of ``half_sigmoid(a_i . a_j / avg)`` over ordered member pairs.

    ``avg`` should be cached by the caller when scoring many communities;
    it is computed from ``attrs`` when omitted.  ``g`` is accepted for
    symmetry with :func:`density` and only used to bound-check members.
    """
    idx = _members(c)
    k = len(idx)
    if k < 2:
        raise UndefinedMetricError(f"homogeneity undefined for community of size {k}")
    if idx[-1] >= g.n or idx[0] < 0:
        raise ValueError("community members outside the graph")
    if avg is None:
        avg = average_similarity(attrs)
    avg = avg.value if isinstance(avg, PairSimilarity) else float(avg)
    if avg == 0:
        raise DegenerateContentError("average pair similarity is zero")
    a = attrs.values[idx]
    sims = a @ a.T
    off = ~np.eye(k, dtype=bool)
    return float(half_sigmoid(sims[off] / avg).mean())


@dataclass
class AnalysisReport:
    values: list = field(default_factory=list)  # (community id, value)
    bin_edges: np.ndarray = field(default_factory=lambda: np.zeros(0))
    counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    excluded: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def write_values(self, path, header="value"):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["community_id", header])
            for cid, v in self.values:
                w.writerow([cid, repr(float(v))])

    def write_histogram(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_lo", "bin_hi", "count"])
            for lo, hi, c in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts):
                w.writerow([repr(float(lo)), repr(float(hi)), int(c)])


def distribution(values, bins: int) -> AnalysisReport:
    """Equal-width histogram over ``[0, 1]``.

    Bins are ``[lo, hi)`` except the last, which is closed; so a value on
    an inner edge lands in the upper bin.  ``values`` may be plain numbers
    or ``(id, value)`` pairs.
    """
    if bins < 1:
        raise ValueError("bins must be positive")
    pairs = [v if isinstance(v, tuple) else (str(i), v) for i, v in enumerate(values)]
    x = np.array([float(v) for _, v in pairs], dtype=np.float64)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("distribution values must lie in [0, 1]")
    # floor(x * bins) rather than np.histogram: linspace edges like
    # 0.6000000000000001 would push 0.6 into the lower bin.
    idx = np.minimum(np.floor(x * bins).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins) if len(x) else np.zeros(bins, dtype=np.int64)
    edges = np.arange(bins + 1) / bins
    return AnalysisReport(values=pairs, bin_edges=edges, counts=counts)


def analyze(communities: CommunitySet, g: Graph, attrs: NodeAttributes | None = None, bins: int = 10):
    """Density and (when attributes are given) homogeneity reports.

    Communities with fewer than two members are skipped and listed in each
    report's ``excluded``.
    """
    small = [c.id for c in communities if len(c) < 2]
    usable = [c for c in communities if len(c) >= 2]
    dens = distribution([(c.id, density(c, g)) for c in usable], bins)
    dens.excluded = small
    reports = {"density": dens}
    if attrs is not None and attrs.m > 0:
        avg = average_similarity(attrs)
        hom = distribution([(c.id, homogeneity(c, g, attrs, avg)) for c in usable], bins)
        hom.excluded = small
        hom.notes = {"avg_similarity": avg.value, "pairs": avg.pairs}
        reports["homogeneity"] = hom
    return reports

