"""Episode sampler: grows a scene one object per step and realizes a matching
instruction for each addition. Pure function of (seed, config)."""

import numpy as np

from ..config import GenConfig, ConfigError
from .grammar import realize_instruction
from .render import SUPPORTED_SHAPES
from .scene import Episode, EpisodeStep, ObjectInstance, Scene


class GenerationError(RuntimeError):
    pass


def _bounds(cfg: GenConfig) -> tuple[float, float]:
    lo = cfg.margin + cfg.object_size
    return lo, 1.0 - lo


def _cue_region(cue: str, cfg: GenConfig):
    lo, hi = _bounds(cfg)
    band = 0.15
    regions = {
        "center": ((0.5 - 0.06, 0.5 + 0.06), (0.5 - 0.06, 0.5 + 0.06)),
        "left": ((lo, lo + band), (lo, hi)),
        "right": ((hi - band, hi), (lo, hi)),
        "top": ((lo, hi), (lo, lo + band)),
        "bottom": ((lo, hi), (hi - band, hi)),
    }
    return regions[cue]


def _relation_band(relations: frozenset[str], ax: float, ay: float, cfg: GenConfig):
    """Feasible (x, y) intervals that satisfy every stated relation with margin."""
    lo, hi = _bounds(cfg)
    m = cfg.relation_margin
    x_lo, x_hi, y_lo, y_hi = lo, hi, lo, hi
    if "left" in relations:
        x_hi = ax - m
    if "right" in relations:
        x_lo = ax + m
    if "above" in relations:
        y_hi = ay - m
    if "below" in relations:
        y_lo = ay + m
    if x_lo > x_hi or y_lo > y_hi:
        return None
    return (x_lo, x_hi), (y_lo, y_hi)


def _separated(x: float, y: float, scene: Scene, min_sep: float) -> bool:
    for o in scene.objects:
        if (x - o.x) ** 2 + (y - o.y) ** 2 < min_sep ** 2:
            return False
    return True


def relation_holds(relations, new_obj: ObjectInstance, anchor: ObjectInstance) -> bool:
    checks = {
        "left": new_obj.x < anchor.x,
        "right": new_obj.x > anchor.x,
        "above": new_obj.y < anchor.y,
        "below": new_obj.y > anchor.y,
    }
    return all(checks[r] for r in relations)


def sample_episode(seed: int, config: GenConfig) -> Episode:
    """Sample a full episode deterministically from the seed.

    Every step adds one object with a unique (shape, color) pair; the
    instruction names that pair, plus an absolute cue at step 0 or the spatial
    relation to an existing anchor afterwards.
    """
    bad = [s for s in config.shapes if s not in SUPPORTED_SHAPES]
    if bad:
        raise ConfigError(f"shapes without a rasterizer: {bad}")
    if config.pair_count() < config.steps:
        raise ConfigError(
            f"catalog exhausted: {config.pair_count()} (shape, color) pairs "
            f"cannot cover {config.steps} steps"
        )
    rng = np.random.default_rng(seed)
    pairs = [(s, c) for s in config.shapes for c in config.colors]
    chosen = [pairs[i] for i in rng.choice(len(pairs), size=config.steps, replace=False)]

    scene = Scene((), config.canvas_size)
    steps: list[EpisodeStep] = []
    sep = config.effective_separation
    for t, (shape, color) in enumerate(chosen):
        placed = False
        for _ in range(config.max_attempts):
            if t == 0:
                cue = ("center", "left", "right", "top", "bottom")[rng.integers(5)]
                (x_lo, x_hi), (y_lo, y_hi) = _cue_region(cue, config)
                relations: frozenset[str] = frozenset()
                anchor_idx = None
            else:
                if len(scene) > 1 and rng.random() >= config.anchor_last_prob:
                    anchor_idx = int(rng.integers(len(scene) - 1))
                else:
                    anchor_idx = len(scene) - 1
                anchor = scene.objects[anchor_idx]
                vert = (None, "above", "below")[rng.integers(1, 3)]
                horiz = (None, "left", "right")[rng.integers(1, 3)]
                if rng.random() < config.combo_prob:
                    relations = frozenset({vert, horiz})
                else:
                    relations = frozenset({vert if rng.random() < 0.5 else horiz})
                band = _relation_band(relations, anchor.x, anchor.y, config)
                if band is None:
                    continue
                (x_lo, x_hi), (y_lo, y_hi) = band
                cue = None
            x = rng.uniform(x_lo, x_hi)
            y = rng.uniform(y_lo, y_hi)
            if not _separated(x, y, scene, sep):
                continue
            obj = ObjectInstance(shape, color, float(x), float(y), config.object_size)
            if t == 0:
                text = realize_instruction(shape, color, cue=cue)
            else:
                anchor = scene.objects[anchor_idx]
                use_it = anchor_idx == len(scene) - 1 and rng.random() < config.pronoun_prob
                text = realize_instruction(
                    shape, color, relations=relations,
                    anchor="it" if use_it else anchor.key,
                )
            scene = scene.with_object(obj)
            steps.append(EpisodeStep(text, scene))
            placed = True
            break
        if not placed:
            raise GenerationError(
                f"could not place object {t} after {config.max_attempts} attempts (seed {seed})"
            )
    return Episode(tuple(steps), seed)
