"""Symbolic scene state: typed, colored objects at 2-D positions on a unit canvas."""

from dataclasses import dataclass, field


@dataclass(frozen=True)
class ObjectInstance:
    shape: str
    color: str
    x: float  # [0, 1], left to right
    y: float  # [0, 1], top to bottom
    size: float  # half-extent, fraction of canvas

    @property
    def key(self) -> tuple[str, str]:
        return (self.shape, self.color)


@dataclass(frozen=True)
class Scene:
    objects: tuple[ObjectInstance, ...] = ()
    canvas_size: int = 64

    def keys(self) -> list[tuple[str, str]]:
        return [o.key for o in self.objects]

    def with_object(self, obj: ObjectInstance) -> "Scene":
        return Scene(self.objects + (obj,), self.canvas_size)

    def __len__(self) -> int:
        return len(self.objects)


@dataclass(frozen=True)
class EpisodeStep:
    instruction: str
    scene: Scene


@dataclass(frozen=True)
class Episode:
    steps: tuple[EpisodeStep, ...]
    seed: int

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def instructions(self) -> list[str]:
        return [s.instruction for s in self.steps]

    @property
    def scenes(self) -> list[Scene]:
        return [s.scene for s in self.steps]
