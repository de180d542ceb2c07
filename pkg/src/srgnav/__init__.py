"""Object-goal navigation over a spatial relational graph of rooms and objects.

The pipeline: generate grid houses, extract region sequences along shortest
paths, count region/object co-occurrence into a weighted graph, embed its
nodes with a graph convolutional network, and navigate by choosing the
visible room whose embedding is closest to the target object's.
"""
from .categories import DEFAULT_SPACE, CategorySpace
from .world import Pose, Scene, SceneGenConfig, build_scene, generate_scene
from .graph import SRG, build_srg, extract_scene_graph, prune_srg
from .trajectories import Trajectory, generate_corpus, generate_valid_trajectory
from .gcn import EmbeddingTable, GcnModel, TrainConfig, train
from .bayes import RegionEstimator, region_posterior, visible_regions
from .navigator import EpisodeConfig, Policy, run_episode, sample_episodes
from .metrics import compare_policies, soft_spl, spl, success_rate

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_SPACE", "CategorySpace", "Pose", "Scene", "SceneGenConfig", "build_scene", "generate_scene",
    "SRG", "build_srg", "extract_scene_graph", "prune_srg", "Trajectory", "generate_corpus",
    "generate_valid_trajectory", "EmbeddingTable", "GcnModel", "TrainConfig", "train",
    "RegionEstimator", "region_posterior", "visible_regions", "EpisodeConfig", "Policy", "run_episode",
    "sample_episodes", "compare_policies", "soft_spl", "spl", "success_rate",
]
