from .scene import ObjectInstance, Scene, Episode, EpisodeStep
from .render import render_scene, empty_canvas, to_unit, from_unit
from .grammar import realize_instruction, oracle_parse_instruction, ParsedInstruction, GrammarError
from .episodes import sample_episode, GenerationError
from .dataset import export_dataset, load_dataset, DatasetError, split_episode_ids

__all__ = [
    "ObjectInstance", "Scene", "Episode", "EpisodeStep",
    "render_scene", "empty_canvas", "to_unit", "from_unit",
    "realize_instruction", "oracle_parse_instruction", "ParsedInstruction", "GrammarError",
    "sample_episode", "GenerationError",
    "export_dataset", "load_dataset", "DatasetError", "split_episode_ids",
]
