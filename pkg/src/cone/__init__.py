"""Community-oriented network embedding and community detection.

Train an encoder on a few example communities, embed every node from its
content and neighbourhood, then cluster the embeddings into communities.
"""

from .analysis import analyze, average_similarity, density, distribution, half_sigmoid, homogeneity
from .archive import load_embeddings, load_model, save_embeddings, save_model
from .clustering import Clustering, aggregate_score, kmeans, pair_f1, pair_jaccard, select_k
from .communities import Community, CommunitySet, read_communities, write_communities
from .datasets import Dataset, generate_planted, load_ego_dataset, load_generic
from .encoding import NodeAttributes, Vocabulary, attrs_to_sequence, text_to_sequence
from .graph import Graph, TransitionMatrix, build_graph, k_step, transition_matrix
from .model import ConeConfig, ConeModel, EmbeddingMatrix, embed, encode_contents, regularize, train
from .pipeline import detect, planted_transfer, split_communities

__version__ = "0.1.0"

__all__ = [
    "Clustering", "Community", "CommunitySet", "ConeConfig", "ConeModel", "Dataset", "EmbeddingMatrix",
    "Graph", "NodeAttributes", "TransitionMatrix", "Vocabulary", "aggregate_score", "analyze",
    "attrs_to_sequence", "average_similarity", "build_graph", "density", "detect", "distribution", "embed",
    "encode_contents", "generate_planted", "half_sigmoid", "homogeneity", "k_step", "kmeans",
    "load_ego_dataset", "load_embeddings", "load_generic", "load_model", "pair_f1", "pair_jaccard",
    "planted_transfer", "read_communities", "regularize", "save_embeddings", "save_model", "select_k",
    "split_communities", "text_to_sequence", "train", "transition_matrix", "write_communities",
]
