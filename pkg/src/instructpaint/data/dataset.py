"""On-disk dataset: manifest.json + per-episode meta.json and step PNGs.

Layout:
    <root>/manifest.json
    <root>/episodes/<id>/meta.json
    <root>/episodes/<id>/step<t>.png
"""

import hashlib
import json
from pathlib import Path

import numpy as np
from PIL import Image

from ..config import GenConfig, config_to_dict, gen_config_from_dict
from .render import render_scene
from .scene import Episode, EpisodeStep, ObjectInstance, Scene

FORMAT_VERSION = 1


class DatasetError(RuntimeError):
    pass


def episode_id(index: int) -> str:
    return f"ep{index:05d}"


def split_episode_ids(n_episodes: int, fractions=(0.8, 0.1, 0.1)) -> dict[str, list[str]]:
    """Deterministic contiguous 80/10/10 split by episode id."""
    ids = [episode_id(i) for i in range(n_episodes)]
    n_train = int(round(fractions[0] * n_episodes))
    n_val = int(round(fractions[1] * n_episodes))
    return {
        "train": ids[:n_train],
        "val": ids[n_train:n_train + n_val],
        "test": ids[n_train + n_val:],
    }


def _scene_to_dict(scene: Scene) -> dict:
    return {
        "canvas_size": scene.canvas_size,
        "objects": [
            {"shape": o.shape, "color": o.color, "x": o.x, "y": o.y, "size": o.size}
            for o in scene.objects
        ],
    }


def _scene_from_dict(d: dict) -> Scene:
    objs = tuple(
        ObjectInstance(o["shape"], o["color"], o["x"], o["y"], o["size"])
        for o in d["objects"]
    )
    return Scene(objs, d["canvas_size"])


def export_dataset(
    episodes: dict[str, Episode],
    path,
    config: GenConfig,
    seed: int,
    splits: dict[str, list[str]] | None = None,
) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    splits = splits or split_episode_ids(len(episodes))
    manifest = {
        "format_version": FORMAT_VERSION,
        "seed": seed,
        "steps": config.steps,
        "episode_count": len(episodes),
        "config": config_to_dict(config),
        "splits": splits,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    for eid, ep in episodes.items():
        ep_dir = root / "episodes" / eid
        ep_dir.mkdir(parents=True, exist_ok=True)
        meta = {
            "id": eid,
            "seed": ep.seed,
            "steps": [
                {"instruction": s.instruction, "scene": _scene_to_dict(s.scene)}
                for s in ep.steps
            ],
        }
        (ep_dir / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
        for t, step in enumerate(ep.steps):
            img = render_scene(step.scene, palette=config.palette)
            Image.fromarray(img).save(ep_dir / f"step{t}.png")
    return root


def load_dataset(path) -> tuple[dict[str, Episode], GenConfig, dict]:
    """Load a dataset directory; returns (episodes by id, config, manifest)."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise DatasetError(f"not a dataset directory: missing {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        raise DatasetError(f"corrupt manifest {manifest_path}: {e}") from e
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DatasetError(
            f"unsupported dataset format {manifest.get('format_version')!r} in {manifest_path}"
        )
    config = gen_config_from_dict(manifest["config"])
    episodes: dict[str, Episode] = {}
    for i in range(manifest["episode_count"]):
        eid = episode_id(i)
        meta_path = root / "episodes" / eid / "meta.json"
        if not meta_path.is_file():
            raise DatasetError(f"missing episode metadata: {meta_path}")
        meta = json.loads(meta_path.read_text())
        steps = tuple(
            EpisodeStep(s["instruction"], _scene_from_dict(s["scene"]))
            for s in meta["steps"]
        )
        episodes[eid] = Episode(steps, meta["seed"])
    return episodes, config, manifest


def load_step_image(root, eid: str, t: int) -> np.ndarray:
    p = Path(root) / "episodes" / eid / f"step{t}.png"
    if not p.is_file():
        raise DatasetError(f"missing step image: {p}")
    return np.asarray(Image.open(p).convert("RGB"))


def manifest_hash(path) -> str:
    data = (Path(path) / "manifest.json").read_bytes()
    return hashlib.sha256(data).hexdigest()
