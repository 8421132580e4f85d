"""Semantic category discovery: name image collections from an open
vocabulary by clustering vision-language embeddings, voting on names, and
iteratively refining a zero-shot classifier."""

from .clustering import (
    ClusterAssignment,
    ClusterConfig,
    ConstrainedKMeans,
    build_flow_network,
    css_kmeans,
    kmeans,
    ss_kmeans,
)
from .metrics import EvalReport, clustering_acc, evaluate, name_set_iou, sacc, soft_sacc, split_acc
from .naming import (
    NamingConfig,
    NamingResult,
    SemanticNamer,
    VoteTable,
    ZeroShotNamer,
    build_classifier,
    dedup_assign,
    partially_supervised_pin,
    refine_loop,
    topm_vote,
    vote_cluster_names,
    zero_shot_assign,
)
from .solvers import FlowArc, FlowNetwork, hungarian, solve_mcf
from .store import (
    EmbeddingMatrix,
    InstanceMeta,
    Vocabulary,
    load_embeddings,
    load_meta,
    load_vocabulary,
    normalize_rows,
    save_embeddings,
)
from .synthgen import PlantedSpec, gen_planted, gen_taxonomy_fixture
from .taxonomy import TaxonomyGraph, lcs_similarity, parse_wordnet_noun, shortest_path_len

__version__ = "0.1.0"

__all__ = [
    "ClusterAssignment",
    "ClusterConfig",
    "ConstrainedKMeans",
    "EmbeddingMatrix",
    "EvalReport",
    "FlowArc",
    "FlowNetwork",
    "InstanceMeta",
    "NamingConfig",
    "NamingResult",
    "PlantedSpec",
    "SemanticNamer",
    "TaxonomyGraph",
    "VoteTable",
    "Vocabulary",
    "ZeroShotNamer",
    "build_classifier",
    "build_flow_network",
    "clustering_acc",
    "css_kmeans",
    "dedup_assign",
    "evaluate",
    "gen_planted",
    "gen_taxonomy_fixture",
    "hungarian",
    "kmeans",
    "lcs_similarity",
    "load_embeddings",
    "load_meta",
    "load_vocabulary",
    "name_set_iou",
    "normalize_rows",
    "parse_wordnet_noun",
    "partially_supervised_pin",
    "refine_loop",
    "sacc",
    "save_embeddings",
    "shortest_path_len",
    "soft_sacc",
    "solve_mcf",
    "split_acc",
    "ss_kmeans",
    "topm_vote",
    "vote_cluster_names",
    "zero_shot_assign",
]
