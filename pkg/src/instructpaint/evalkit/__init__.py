from .metrics import (
    CENTER,
    Detection,
    PRF1Accumulator,
    SceneGraph,
    build_scene_graph,
    match_counts,
    prf1,
    prf1_from_counts,
    rsim,
    scene_graph_from_detections,
    scene_graph_from_scene,
)
from .localizer import GridNet, Localizer, exact_match, localizer_from_state, train_localizer
from .evaluate import evaluate_checkpoint, evaluate_episodes, oracle_detector

__all__ = [
    "CENTER", "Detection", "PRF1Accumulator", "SceneGraph",
    "build_scene_graph", "match_counts", "prf1", "prf1_from_counts", "rsim",
    "scene_graph_from_detections", "scene_graph_from_scene",
    "GridNet", "Localizer", "exact_match", "localizer_from_state", "train_localizer",
    "evaluate_checkpoint", "evaluate_episodes", "oracle_detector",
]
