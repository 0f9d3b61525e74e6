"""Detection matching, scene-graph construction, and relational similarity."""

from dataclasses import dataclass

CENTER = "center"
EDGE_LABELS = ("left-of", "right-of", "above", "below")


@dataclass(frozen=True)
class Detection:
    shape: str
    color: str
    x: float
    y: float
    confidence: float

    @property
    def key(self) -> tuple[str, str]:
        return (self.shape, self.color)


@dataclass(frozen=True)
class SceneGraph:
    """Vertices are (shape, color) labels plus the canvas center; edges are the
    induced directed spatial relations."""

    positions: tuple  # ((label, (x, y)), ...)
    edges: frozenset  # {(u_label, relation, v_label)}

    @property
    def labels(self) -> set:
        return {label for label, _ in self.positions}


def build_scene_graph(items, tau: float = 1.0 / 16.0) -> SceneGraph:
    """items: iterable of (label, (x, y)) with unique labels; the center vertex
    at (0.5, 0.5) is always added. Pairs tied within tau on an axis get no edge
    on that axis."""
    entries = list(items) + [(CENTER, (0.5, 0.5))]
    labels = [label for label, _ in entries]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate vertex labels: {labels}")
    edges = set()
    for u_label, (ux, uy) in entries:
        for v_label, (vx, vy) in entries:
            if u_label == v_label:
                continue
            if ux < vx - tau:
                edges.add((u_label, "left-of", v_label))
            elif ux > vx + tau:
                edges.add((u_label, "right-of", v_label))
            if uy < vy - tau:
                edges.add((u_label, "above", v_label))
            elif uy > vy + tau:
                edges.add((u_label, "below", v_label))
    return SceneGraph(tuple(entries), frozenset(edges))


def scene_graph_from_scene(scene, tau: float = 1.0 / 16.0) -> SceneGraph:
    return build_scene_graph([(o.key, (o.x, o.y)) for o in scene.objects], tau)


def scene_graph_from_detections(detections, tau: float = 1.0 / 16.0) -> SceneGraph:
    return build_scene_graph([(d.key, (d.x, d.y)) for d in detections], tau)


def rsim(gt_graph: SceneGraph, gen_graph: SceneGraph, recall: float) -> float:
    """recall x (shared relations / ground-truth relations), restricted to
    vertices present in both graphs (matched by label; center always shared).

    Conventions: an empty restricted ground-truth edge set scores 0 unless the
    only common vertex is the center, which scores the full ratio of 1.
    """
    if not 0.0 <= recall <= 1.0:
        raise ValueError(f"recall must be in [0, 1], got {recall}")
    common = gt_graph.labels & gen_graph.labels
    gt_edges = {e for e in gt_graph.edges if e[0] in common and e[2] in common}
    gen_edges = {e for e in gen_graph.edges if e[0] in common and e[2] in common}
    if not gt_edges:
        ratio = 1.0 if common == {CENTER} else 0.0
    else:
        ratio = len(gt_edges & gen_edges) / len(gt_edges)
    return recall * ratio


def match_counts(detections, truth_scene, positional_gate: bool = False,
                 max_dist: float = 2.0 / 8.0) -> tuple[int, int, int]:
    """(tp, fp, fn) matching detections to scene objects by (shape, color);
    the optional positional gate additionally requires center distance below
    max_dist (in normalized units)."""
    truth = {o.key: o for o in truth_scene.objects}
    tp = fp = 0
    matched = set()
    for det in detections:
        obj = truth.get(det.key)
        if obj is not None and det.key not in matched:
            if positional_gate and (det.x - obj.x) ** 2 + (det.y - obj.y) ** 2 > max_dist ** 2:
                fp += 1
                continue
            tp += 1
            matched.add(det.key)
        else:
            fp += 1
    fn = len(truth) - len(matched)
    return tp, fp, fn


def prf1_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def prf1(detections, truth_scene, positional_gate: bool = False):
    """Per-image precision/recall/F1 on (shape, color) identity."""
    return prf1_from_counts(*match_counts(detections, truth_scene, positional_gate))


class PRF1Accumulator:
    """Micro-averaged counts over many images."""

    def __init__(self, positional_gate: bool = False):
        self.tp = self.fp = self.fn = 0
        self.positional_gate = positional_gate

    def add(self, detections, truth_scene):
        tp, fp, fn = match_counts(detections, truth_scene, self.positional_gate)
        self.tp += tp
        self.fp += fp
        self.fn += fn

    def results(self) -> tuple[float, float, float]:
        return prf1_from_counts(self.tp, self.fp, self.fn)
