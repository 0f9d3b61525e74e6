"""Episode-level evaluation: roll the model on its own outputs, detect objects
on every generated step, and report micro P/R/F1 plus relational similarity."""

import json
import logging
from pathlib import Path

import numpy as np
from PIL import Image

from ..config import GenConfig, config_to_dict
from ..data.render import render_scene
from ..rollout import rollout_episode
from ..text import Vocabulary
from .metrics import (
    Detection,
    PRF1Accumulator,
    match_counts,
    prf1_from_counts,
    rsim,
    scene_graph_from_detections,
    scene_graph_from_scene,
)

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1


def oracle_detector(image_u8, scene) -> list[Detection]:
    """Reads detections straight off the symbolic scene (metric upper bound)."""
    return [Detection(o.shape, o.color, o.x, o.y, 1.0) for o in scene.objects]


def localizer_detector(localizer):
    def detect(image_u8, scene):
        return localizer.detect(image_u8)
    return detect


def _image_recall(detections, scene) -> float:
    tp, _, fn = match_counts(detections, scene)
    return tp / (tp + fn) if tp + fn else 1.0


def evaluate_episodes(model, vocab: Vocabulary, gen_cfg: GenConfig, episodes,
                      detector, *, identity_generator: bool = False,
                      tau: float | None = None, sheets_dir=None, ids=None) -> dict:
    """Evaluate a set of episodes.

    `detector` is either a trained localizer or a callable
    (image_u8, truth_scene) -> detections. With `identity_generator` the
    ground-truth renders stand in for generated images (oracle upper bound).
    """
    if hasattr(detector, "detect"):
        detector = localizer_detector(detector)
    if tau is None:
        tau = 0.5 / 8.0  # half a detector grid cell
    acc = PRF1Accumulator()
    per_episode = []
    steps = max(len(ep) for ep in episodes)
    rsim_per_step = [[] for _ in range(steps)]
    ids = ids or [f"episode{i}" for i in range(len(episodes))]

    for eid, ep in zip(ids, episodes):
        if identity_generator:
            frames = [render_scene(s.scene, gen_cfg.canvas_size, gen_cfg.palette)
                      for s in ep.steps]
        else:
            frames = rollout_episode(model, vocab, gen_cfg, ep.instructions)
        ep_acc = PRF1Accumulator()
        final_rsim = 0.0
        for t, (frame, step) in enumerate(zip(frames, ep.steps)):
            detections = detector(frame, step.scene)
            acc.add(detections, step.scene)
            ep_acc.add(detections, step.scene)
            value = rsim(
                scene_graph_from_scene(step.scene, tau),
                scene_graph_from_detections(detections, tau),
                recall=_image_recall(detections, step.scene),
            )
            rsim_per_step[t].append(value)
            if t == len(ep.steps) - 1:
                final_rsim = value
        p, r, f1 = ep_acc.results()
        per_episode.append({
            "id": eid, "precision": p, "recall": r, "f1": f1, "rsim": final_rsim,
        })
        if sheets_dir is not None:
            _contact_sheet(Path(sheets_dir), eid, ep, frames, gen_cfg)

    precision, recall, f1 = acc.results()
    final_rsims = [e["rsim"] for e in per_episode]
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "global": {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "rsim": float(np.mean(final_rsims)) if final_rsims else 0.0,
            "rsim_per_step": [float(np.mean(r)) if r else 0.0 for r in rsim_per_step],
        },
        "episodes": per_episode,
        "config": {"gen": config_to_dict(gen_cfg), "tau": tau,
                   "identity_generator": identity_generator},
    }
    return report


def _contact_sheet(out_dir: Path, eid: str, episode, frames, gen_cfg: GenConfig):
    """Ground truth on the top row, generated images below."""
    out_dir.mkdir(parents=True, exist_ok=True)
    size = gen_cfg.canvas_size
    pad = 2
    t_count = len(frames)
    sheet = np.full((2 * size + 3 * pad, t_count * (size + pad) + pad, 3), 255, dtype=np.uint8)
    for t, (frame, step) in enumerate(zip(frames, episode.steps)):
        gt = render_scene(step.scene, size, gen_cfg.palette)
        x0 = pad + t * (size + pad)
        sheet[pad:pad + size, x0:x0 + size] = gt
        sheet[2 * pad + size:2 * pad + 2 * size, x0:x0 + size] = frame
    Image.fromarray(sheet).save(out_dir / f"{eid}.png")


def evaluate_checkpoint(checkpoint_path, data_dir, split: str = "test",
                        report_path=None, sheets_dir=None, limit: int | None = None) -> dict:
    """CLI entry: load a checkpoint bundle and evaluate a dataset split."""
    from ..data import load_dataset
    from ..service.checkpoint import load_checkpoint

    bundle = load_checkpoint(checkpoint_path)
    episodes, gen_cfg, manifest = load_dataset(data_dir)
    if split not in manifest["splits"]:
        raise ValueError(f"unknown split {split!r}; have {sorted(manifest['splits'])}")
    ids = manifest["splits"][split]
    if limit:
        ids = ids[:limit]
    model = bundle.build_model()
    vocab = bundle.build_vocab()
    localizer = bundle.build_localizer()
    if localizer is None:
        raise ValueError("checkpoint carries no localizer; train one first")
    report = evaluate_episodes(
        model, vocab, gen_cfg, [episodes[i] for i in ids],
        localizer, sheets_dir=sheets_dir, ids=ids)
    report["config"]["checkpoint"] = str(checkpoint_path)
    report["config"]["split"] = split
    if report_path:
        Path(report_path).write_text(json.dumps(report, indent=2, sort_keys=True))
    return report
