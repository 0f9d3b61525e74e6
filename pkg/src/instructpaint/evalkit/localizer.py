"""Grid-cell object localizer trained on ground-truth renders.

The canvas is divided into GxG cells; each cell predicts objectness, a class
distribution over (shape, color) pairs, and the center offset within the cell.
"""

import logging

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..config import GenConfig, LocalizerConfig
from ..data.render import empty_canvas, render_scene, to_unit
from .metrics import Detection

logger = logging.getLogger(__name__)


class GridNet(nn.Module):
    def __init__(self, n_classes: int, resolution: int, grid: int, base: int):
        super().__init__()
        stages = (resolution // grid).bit_length() - 1
        if grid * (2 ** stages) != resolution:
            raise ValueError(f"resolution {resolution} must be grid {grid} * 2^k")
        convs, norms = [], []
        in_ch = 3
        for i in range(stages):
            out_ch = base * (i + 1)
            convs.append(nn.Conv2d(in_ch, out_ch, 3, padding=1))
            norms.append(nn.BatchNorm2d(out_ch))
            in_ch = out_ch
        self.convs = nn.ModuleList(convs)
        self.norms = nn.ModuleList(norms)
        self.head = nn.Conv2d(in_ch, 1 + n_classes + 2, 1)

    def forward(self, x):
        h = x
        for conv, norm in zip(self.convs, self.norms):
            h = F.avg_pool2d(F.relu(norm(conv(h))), 2)
        return self.head(h)


class Localizer:
    """Trained grid detector plus its class catalog and decoding logic."""

    def __init__(self, net: GridNet, classes: list[tuple[str, str]],
                 resolution: int, cfg: LocalizerConfig):
        self.net = net
        self.classes = classes
        self.resolution = resolution
        self.cfg = cfg

    def detect(self, image_u8: np.ndarray) -> list[Detection]:
        """Thresholded, per-class-deduplicated detections on one image."""
        self.net.eval()
        x = torch.from_numpy(to_unit(image_u8)).unsqueeze(0)
        with torch.no_grad():
            out = self.net(x).squeeze(0).numpy()
        grid = out.shape[-1]
        obj = 1.0 / (1.0 + np.exp(-out[0]))
        cls = out[1:1 + len(self.classes)]
        off = 1.0 / (1.0 + np.exp(-out[-2:]))
        best: dict[tuple[str, str], Detection] = {}
        for gy, gx in zip(*np.nonzero(obj >= self.cfg.detect_threshold)):
            shape, color = self.classes[int(np.argmax(cls[:, gy, gx]))]
            det = Detection(
                shape, color,
                x=(gx + off[0, gy, gx]) / grid,
                y=(gy + off[1, gy, gx]) / grid,
                confidence=float(obj[gy, gx]),
            )
            prev = best.get(det.key)
            if prev is None or det.confidence > prev.confidence:
                best[det.key] = det
        return sorted(best.values(), key=lambda d: -d.confidence)

    def state(self) -> dict:
        return {
            "net": {k: v.numpy() for k, v in self.net.state_dict().items()},
            "classes": self.classes,
            "resolution": self.resolution,
            "config": self.cfg,
        }


def _targets(scene, grid: int, n_classes: int, class_index: dict):
    obj = np.zeros((grid, grid), dtype=np.float32)
    cls = np.zeros((grid, grid), dtype=np.int64)
    off = np.zeros((2, grid, grid), dtype=np.float32)
    for o in scene.objects:
        gx = min(int(o.x * grid), grid - 1)
        gy = min(int(o.y * grid), grid - 1)
        obj[gy, gx] = 1.0
        cls[gy, gx] = class_index[o.key]
        off[0, gy, gx] = o.x * grid - gx
        off[1, gy, gx] = o.y * grid - gy
    return obj, cls, off


def exact_match(detections, scene, grid: int) -> bool:
    """Type sets equal and every matched position within 1.5 cells."""
    truth = {o.key: o for o in scene.objects}
    if {d.key for d in detections} != set(truth):
        return False
    limit = 1.5 / grid
    for d in detections:
        o = truth[d.key]
        if (d.x - o.x) ** 2 + (d.y - o.y) ** 2 > limit ** 2:
            return False
    return True


def train_localizer(episodes, gen_cfg: GenConfig,
                    cfg: LocalizerConfig | None = None) -> Localizer:
    """Train the grid detector to a validation exact-match plateau."""
    cfg = cfg or LocalizerConfig()
    classes = [(s, c) for s in gen_cfg.shapes for c in gen_cfg.colors]
    class_index = {k: i for i, k in enumerate(classes)}
    size = gen_cfg.canvas_size

    scenes = []
    for i, ep in enumerate(episodes):
        scenes.extend(step.scene for step in ep.steps)
        if i % 10 == 0:
            from ..data.scene import Scene
            scenes.append(Scene((), size))
    if len(scenes) < cfg.min_images:
        raise ValueError(
            f"dataset too small for localizer training: {len(scenes)} images < {cfg.min_images}")

    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(scenes))
    n_val = max(1, len(scenes) // 10)
    val_idx, train_idx = order[:n_val], order[n_val:]

    images = np.stack([
        to_unit(render_scene(s, size, gen_cfg.palette)) if len(s) else
        to_unit(empty_canvas(size, gen_cfg.palette))
        for s in scenes
    ])
    targets = [_targets(s, cfg.grid, len(classes), class_index) for s in scenes]
    obj_t = np.stack([t[0] for t in targets])
    cls_t = np.stack([t[1] for t in targets])
    off_t = np.stack([t[2] for t in targets])

    net = GridNet(len(classes), size, cfg.grid, cfg.base_channels)
    opt = torch.optim.Adam(net.parameters(), lr=cfg.lr)
    loc = Localizer(net, classes, size, cfg)

    best_score, best_state, patience = -1.0, None, 0
    for epoch in range(cfg.max_epochs):
        net.train()
        rng.shuffle(train_idx)
        for start in range(0, len(train_idx), cfg.batch_size):
            idx = train_idx[start:start + cfg.batch_size]
            x = torch.from_numpy(images[idx])
            obj = torch.from_numpy(obj_t[idx])
            cls = torch.from_numpy(cls_t[idx])
            off = torch.from_numpy(off_t[idx])
            out = net(x)
            obj_logit = out[:, 0]
            # positive cells are rare (<= max_objects out of grid^2)
            loss = F.binary_cross_entropy_with_logits(
                obj_logit, obj, pos_weight=torch.tensor(8.0))
            mask = obj > 0.5
            if mask.any():
                cls_logits = out[:, 1:1 + len(classes)].permute(0, 2, 3, 1)[mask]
                loss = loss + F.cross_entropy(cls_logits, cls[mask])
                off_pred = torch.sigmoid(out[:, -2:]).permute(0, 2, 3, 1)[mask]
                off_true = off.permute(0, 2, 3, 1)[mask]
                loss = loss + F.mse_loss(off_pred, off_true)
            opt.zero_grad()
            loss.backward()
            opt.step()

        hits = sum(
            exact_match(loc.detect(_render_u8(scenes[i], size, gen_cfg.palette)),
                        scenes[i], cfg.grid)
            for i in val_idx)
        score = hits / len(val_idx)
        logger.info("localizer epoch %d: val exact-match %.4f", epoch + 1, score)
        if score > best_score:
            best_score, patience = score, 0
            best_state = {k: v.clone() for k, v in net.state_dict().items()}
        else:
            patience += 1
            if patience >= cfg.patience:
                break
        if score == 1.0:
            break
    if best_state is not None:
        net.load_state_dict(best_state)
    logger.info("localizer trained: best val exact-match %.4f", best_score)
    return loc


def _render_u8(scene, size, palette):
    return render_scene(scene, size, palette) if len(scene) else empty_canvas(size, palette)


def localizer_from_state(state: dict) -> Localizer:
    cfg = state["config"]
    net = GridNet(len(state["classes"]), state["resolution"], cfg.grid, cfg.base_channels)
    net.load_state_dict({k: torch.from_numpy(np.asarray(v)) for k, v in state["net"].items()})
    return Localizer(net, [tuple(c) for c in state["classes"]], state["resolution"], cfg)
