"""End-to-end helpers shared by the command line, demos and acceptance runs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clustering import Clustering, aggregate_score, default_candidates, kmeans, select_k
from .communities import CommunitySet
from .datasets import Dataset, generate_planted
from .model import ConeConfig, ConeModel, EmbeddingMatrix, embed, train
from .seeding import stage_rng, stage_seed


class SplitError(ValueError):
    pass


def split_communities(communities: CommunitySet, train_fraction: float, seed: int):
    """Uniform random split over communities.

    ``round(f * N)`` (halves rounded up) communities go to the training
    side; both sides must end up non-empty.
    """
    if not 0 < train_fraction < 1:
        raise SplitError(f"train fraction must lie in (0, 1), got {train_fraction}")
    n = len(communities)
    n_train = math.floor(train_fraction * n + 0.5)
    if n_train < 1 or n_train > n - 1:
        raise SplitError(f"fraction {train_fraction} of {n} communities leaves an empty side")
    order = stage_rng(seed, "split").permutation(n)
    train_idx, test_idx = sorted(order[:n_train]), sorted(order[n_train:])
    return (
        CommunitySet([communities[i] for i in train_idx], "train"),
        CommunitySet([communities[i] for i in test_idx], "test"),
    )


@dataclass
class Detection:
    communities: CommunitySet
    k: int
    clustering: Clustering
    selected: bool  # whether k came from select_k


def detect(
    s: EmbeddingMatrix,
    train_communities: CommunitySet | None = None,
    k_clusters: int | None = None,
    candidates=None,
    seed: int = 0,
    n_init: int = 10,
    min_size: int = 1,
    exclude_train: bool = False,
    folds: int = 5,
) -> Detection:
    """Cluster ``S`` into communities.

    The count comes from ``k_clusters`` or from :func:`select_k` over
    ``candidates`` (default ``{ceil(M/2), M, 2M}``).  With
    ``exclude_train`` only nodes outside every training community are
    clustered, and a selected count is reduced by the ``M`` training
    communities it accounts for.
    """
    M = len(train_communities) if train_communities is not None else 0
    selected = k_clusters is None
    if selected:
        if train_communities is None or M == 0:
            raise ValueError("select_k needs training communities; pass k_clusters instead")
        cands = default_candidates(M) if candidates is None else list(candidates)
        if not cands:
            raise ValueError("empty candidate list and no cluster count given")
        k_clusters = select_k(s, train_communities, cands, folds=folds, seed=stage_seed(seed, "select_k"), n_init=n_init)
        if exclude_train:
            k_clusters = max(1, k_clusters - M)
    nodes = None
    points = s.points
    if exclude_train:
        if train_communities is None:
            raise ValueError("exclude_train needs training communities")
        held = train_communities.nodes()
        nodes = np.array([i for i in range(s.n) if i not in held], dtype=np.int64)
        if len(nodes) == 0:
            raise ValueError("every node belongs to a training community")
        points = points[nodes]
    k_clusters = min(k_clusters, len(points))
    cl = kmeans(points, k_clusters, seed=stage_seed(seed, "kmeans"), n_init=n_init)
    return Detection(cl.communities(nodes=nodes, min_size=min_size), k_clusters, cl, selected)


# -- planted transfer ----------------------------------------------------------

PLANTED_DEFAULTS = dict(pattern="co-star", num_communities=6, community_size=8, noise_edges=12, attr_signature_size=4)
NOISY_SIGNATURES = dict(attr_signature_size=12, node_noise=6, noise_pool=200)


@dataclass
class TransferResult:
    score: float
    trace: list
    model: ConeModel
    train: CommunitySet
    test: CommunitySet
    detected: CommunitySet


def planted_transfer(
    seed: int,
    config: ConeConfig | None = None,
    n_train: int = 2,
    metric: str = "f1",
    dataset: Dataset | None = None,
    **planted,
) -> TransferResult:
    """Train on ``n_train`` planted communities, detect among the rest.

    Nodes of the training communities are set aside; the remaining nodes
    are clustered into as many clusters as there are held-out
    communities and scored against them.
    """
    if dataset is None:
        dataset = generate_planted(**{**PLANTED_DEFAULTS, **planted, "seed": seed})
    config = config or ConeConfig(seed=seed)
    comms = dataset.communities
    if not 0 < n_train < len(comms):
        raise ValueError(f"n_train must lie in [1, {len(comms) - 1}]")
    order = stage_rng(seed, "split").permutation(len(comms))
    tr = CommunitySet([comms[i] for i in sorted(order[:n_train])], "train")
    te = CommunitySet([comms[i] for i in sorted(order[n_train:])], "test")
    model, trace = train(dataset.graph, dataset.sequences(config.max_len), tr, config)
    found = detect(model.final_embedding, tr, k_clusters=len(te), seed=seed, exclude_train=True)
    return TransferResult(aggregate_score(found.communities, te, metric), trace, model, tr, te, found.communities)


def embed_dataset(model: ConeModel, dataset: Dataset) -> EmbeddingMatrix:
    return embed(model, dataset.graph, dataset.sequences(model.config.max_len))
