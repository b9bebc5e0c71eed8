"""Dataset loading (generic text files, SNAP ego networks) and planted benchmarks."""

from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .communities import Community, CommunitySet, read_communities, write_communities
from .encoding import (
    DEFAULT_MAX_LEN,
    NodeAttributes,
    attribute_sequences,
    read_attribute_file,
    write_attribute_file,
)
from .graph import Graph, build_graph, read_edge_file, write_edge_file

log = logging.getLogger(__name__)

PATTERNS = ("star", "co-star", "bridge")
EDGES_FILE, ATTRS_FILE, COMMUNITIES_FILE = "edges.txt", "attrs.txt", "communities.txt"


@dataclass(eq=False)
class Dataset:
    graph: Graph
    attrs: NodeAttributes
    communities: CommunitySet
    name: str = "dataset"

    def __post_init__(self):
        if self.attrs.n != self.graph.n:
            raise ValueError(f"{self.attrs.n} attribute rows for {self.graph.n} nodes")
        self.communities.check_nodes(self.graph.n)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.graph == other.graph
            and self.attrs == other.attrs
            and [(c.id, c.members) for c in self.communities]
            == [(c.id, c.members) for c in other.communities]
        )

    __hash__ = None

    def sequences(self, max_len: int = DEFAULT_MAX_LEN) -> list:
        return attribute_sequences(self.attrs, max_len)

    def stats(self) -> dict:
        return {
            "nodes": self.graph.n,
            "communities": len(self.communities),
            "links": self.graph.num_edges,
            "attributes": self.attrs.m,
        }


def load_generic(edge_file, attr_file=None, community_file=None, directed: bool = False, name=None) -> Dataset:
    """Edge list plus optional sparse attribute and community files.

    Without an attribute file every node has empty content (structure-only
    mode).  IDs in the attribute or community file that do not occur in the
    edge list raise ``ValueError``.
    """
    g = read_edge_file(edge_file, directed=directed)
    attrs = NodeAttributes.empty(g.n) if attr_file is None else read_attribute_file(attr_file, g.index)
    comms = read_communities(community_file, g.index) if community_file else CommunitySet()
    return Dataset(g, attrs, comms, name or Path(edge_file).stem)


def write_dataset(ds: Dataset, directory) -> dict:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {"edges": d / EDGES_FILE, "attrs": d / ATTRS_FILE, "communities": d / COMMUNITIES_FILE}
    write_edge_file(ds.graph, paths["edges"])
    write_attribute_file(ds.attrs, paths["attrs"], ds.graph.ids)
    write_communities(ds.communities, paths["communities"], ds.graph.ids)
    return paths


def read_dataset(directory, directed: bool = False) -> Dataset:
    d = Path(directory)
    return load_generic(d / EDGES_FILE, d / ATTRS_FILE, d / COMMUNITIES_FILE, directed=directed, name=d.name)


# -- SNAP ego networks --------------------------------------------------------

EGO_SUFFIXES = (".edges", ".feat", ".egofeat", ".circles", ".featnames")


def _ego_key(name: str):
    return (0, int(name), "") if name.isdigit() else (1, 0, name)


def _read_featnames(path) -> list:
    names = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.strip():
                idx, _, name = line.partition(" ")
                names.append(name.strip() or idx)
    return names


def _read_rows(path, width, has_id=True):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            node, vals = (parts[0], parts[1:]) if has_id else (None, parts)
            if len(vals) != width:
                raise ValueError(f"{path}: line {lineno}: {len(vals)} features, featnames lists {width}")
            rows.append((node, np.array([float(v) for v in vals])))
    return rows


def load_ego_dataset(directory, directed: bool = False, egos=None, namespace: bool = False, per_ego: bool = False):
    """Merge SNAP-style ego networks into one :class:`Dataset`.

    Each ego contributes its alter edges, an edge from the ego to every
    alter, its circles as communities (ID ``ego:circle``), and feature rows
    aligned on the union of feature names.  Node IDs are global unless
    ``namespace`` prefixes them with the ego ID.  Egos with missing files
    are skipped with a warning.  ``per_ego`` returns ``{ego: Dataset}``.
    """
    root = Path(directory)
    found = sorted({p.stem for p in root.iterdir() if p.suffix in EGO_SUFFIXES}, key=_ego_key)
    if egos is not None:
        wanted = {str(e) for e in egos}
        found = [e for e in found if e in wanted]
    if per_ego:
        return {e: load_ego_dataset(root, directed, [e], namespace) for e in found}

    feat_index: dict = {}
    node_feats: dict = {}
    edges: dict = {}
    order: dict = {}
    circles = []

    def nid(ego, v):
        return f"{ego}/{v}" if namespace else v

    def touch(v):
        order.setdefault(v, len(order))

    def add_edge(a, b):
        if a == b:
            return
        key = (a, b) if directed else tuple(sorted((a, b), key=lambda x: order[x]))
        edges.setdefault(key, None)

    for ego in found:
        paths = {s: root / f"{ego}{s}" for s in EGO_SUFFIXES}
        missing = [str(p.name) for p in paths.values() if not p.exists()]
        if missing:
            warnings.warn(f"skipping ego {ego}: missing {', '.join(missing)}", stacklevel=2)
            continue
        names = _read_featnames(paths[".featnames"])
        cols = []
        for name in names:
            cols.append(feat_index.setdefault(name, len(feat_index)))
        cols = np.array(cols, dtype=np.int64)
        ego_id = nid(ego, ego)
        touch(ego_id)
        rows = _read_rows(paths[".feat"], len(names))
        ego_rows = _read_rows(paths[".egofeat"], len(names), has_id=False)
        for (_, vals) in ego_rows[:1]:
            node_feats.setdefault(ego_id, {}).update({int(c): v for c, v in zip(cols, vals) if v})
        for v, vals in rows:
            v = nid(ego, v)
            touch(v)
            feats = node_feats.setdefault(v, {})
            for c, x in zip(cols, vals):
                if x:
                    feats[int(c)] = max(feats.get(int(c), 0.0), x)
        with open(paths[".edges"], encoding="utf-8") as fh:
            for line in fh:
                parts = line.split()
                if len(parts) < 2:
                    continue
                a, b = nid(ego, parts[0]), nid(ego, parts[1])
                touch(a)
                touch(b)
                add_edge(a, b)
        for v, _ in rows:
            add_edge(ego_id, nid(ego, v))
        with open(paths[".circles"], encoding="utf-8") as fh:
            for line in fh:
                parts = line.split()
                if len(parts) < 2:
                    continue
                members = [nid(ego, m) for m in parts[1:]]
                for m in members:
                    touch(m)
                circles.append((f"{ego}:{parts[0]}", members))

    ids = sorted(order, key=order.get)
    g = build_graph([(a, b) for a, b in edges], directed=directed, nodes=ids)
    values = np.zeros((g.n, len(feat_index)))
    for v, feats in node_feats.items():
        i = g.index[v]
        for c, x in feats.items():
            values[i, c] = x
    names = sorted(feat_index, key=feat_index.get)
    comms = CommunitySet([Community(cid, frozenset(g.index[m] for m in ms)) for cid, ms in circles if ms])
    return Dataset(g, NodeAttributes(values, tuple(names)), comms, root.name)


# -- planted benchmarks -------------------------------------------------------


@dataclass(frozen=True)
class PlantedLayout:
    """Attribute column ranges used by :func:`generate_planted`."""

    center: range
    bridge: range
    blocks: tuple
    noise: range

    @property
    def width(self) -> int:
        return self.noise.stop


def generate_planted(
    pattern: str = "co-star",
    num_communities: int = 6,
    community_size: int = 8,
    noise_edges: int = 0,
    attr_signature_size: int = 4,
    seed: int = 0,
    block_size: int | None = None,
    node_noise: int = 2,
    noise_pool: int = 20,
) -> Dataset:
    """Synthetic communities sharing one social pattern.

    ``star``: one center linked to every member.  ``co-star``: two linked
    centers, each linked to every other member.  ``bridge``: communities
    are stars taken in pairs, each pair joined by an extra bridge node
    linked to both centers and belonging to neither community.

    Content: every node of community ``c`` carries a block of
    ``block_size`` attributes unique to ``c``; centers additionally carry
    ``attr_signature_size`` role attributes which no member has (the same
    role columns in every community).  Every community node also gets
    ``node_noise`` attributes drawn from a pool of ``noise_pool`` shared
    noise columns.  ``noise_edges`` random links are
    added between nodes of different communities.
    """
    if pattern not in PATTERNS:
        raise ValueError(f"pattern must be one of {PATTERNS}")
    min_size = 4 if pattern == "co-star" else 3
    if community_size < min_size:
        raise ValueError(f"{pattern} communities need size >= {min_size}, got {community_size}")
    if num_communities < 1:
        raise ValueError("num_communities must be >= 1")
    if pattern == "bridge" and num_communities % 2:
        raise ValueError("bridge pattern needs an even number of communities")
    if noise_edges < 0 or attr_signature_size < 0 or node_noise < 0 or noise_pool < 0:
        raise ValueError("counts must be non-negative")
    if node_noise > noise_pool:
        raise ValueError("node_noise cannot exceed noise_pool")
    block_size = attr_signature_size if block_size is None else block_size
    rng = np.random.default_rng(seed)

    n_bridges = num_communities // 2 if pattern == "bridge" else 0
    sig = attr_signature_size
    center = range(0, sig)
    bridge = range(sig, sig + (sig if n_bridges else 0))
    start = bridge.stop
    blocks = tuple(range(start + c * block_size, start + (c + 1) * block_size) for c in range(num_communities))
    start += num_communities * block_size
    layout = PlantedLayout(center, bridge, blocks, range(start, start + noise_pool))

    ids, rows, edges, comms = [], [], [], []
    n_centers = 2 if pattern == "co-star" else 1

    def new_node(name, active):
        ids.append(name)
        row = np.zeros(layout.width)
        row[list(active)] = 1.0
        if node_noise:
            row[rng.choice(list(layout.noise), size=node_noise, replace=False)] = 1.0
        rows.append(row)
        return len(ids) - 1

    centers_of = []
    for c in range(num_communities):
        centers = [new_node(f"c{c}h{j}", [*layout.center, *layout.blocks[c]]) for j in range(n_centers)]
        members = [new_node(f"c{c}m{j}", layout.blocks[c]) for j in range(community_size - n_centers)]
        if n_centers == 2:
            edges.append((centers[0], centers[1]))
        for h in centers:
            edges.extend((h, m) for m in members)
        centers_of.append(centers)
        comms.append(Community(f"c{c}", frozenset(centers + members)))

    for b in range(n_bridges):
        x = new_node(f"b{b}", layout.bridge)
        edges.append((centers_of[2 * b][0], x))
        edges.append((centers_of[2 * b + 1][0], x))

    if noise_edges:
        owner = np.full(len(ids), -1)
        for k, c in enumerate(comms):
            owner[list(c.members)] = k
        present = {frozenset(e) for e in edges}
        candidates = [
            (i, j)
            for i, j in itertools.combinations(range(len(ids)), 2)
            if owner[i] != owner[j] and owner[i] >= 0 and owner[j] >= 0 and frozenset((i, j)) not in present
        ]
        if noise_edges > len(candidates):
            raise ValueError(
                f"{noise_edges} noise edges requested but only {len(candidates)} distinct cross-community pairs exist"
            )
        pick = rng.choice(len(candidates), size=noise_edges, replace=False)
        edges.extend(candidates[p] for p in sorted(pick))

    g = build_graph([(ids[a], ids[b]) for a, b in edges], nodes=ids)
    return Dataset(g, NodeAttributes(np.array(rows)), CommunitySet(comms), f"planted-{pattern}")
