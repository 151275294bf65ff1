"""Synthetic scene generator with ground-truth annotations.

Scenes are deterministic in (config, seed): the object classes, poses,
stacks, attributes and the derived free-space grid all come from one
seeded RNG. Geometry is quantized to 0.01 m at creation so generated
scenes survive the canonical file round-trip bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import PlacementError
from .scene import FreeSpaceGrid, ObjectAttributes, Scene, SceneObject


@dataclass(frozen=True)
class ClassSpec:
    """Extent ranges (half-sizes, meters) and placement behavior."""

    extent_lo: tuple[float, float, float]
    extent_hi: tuple[float, float, float]
    base: bool = False      # other objects may rest on it
    top: bool = False       # may be stacked on a base
    hover: tuple[float, float] | None = None  # altitude range for wall-ish objects


DEFAULT_CLASSES: dict[str, ClassSpec] = {
    "chair": ClassSpec((0.20, 0.20, 0.35), (0.30, 0.30, 0.50)),
    "table": ClassSpec((0.40, 0.30, 0.35), (0.80, 0.60, 0.40), base=True),
    "desk": ClassSpec((0.50, 0.30, 0.36), (0.80, 0.40, 0.38), base=True),
    "bed": ClassSpec((0.80, 0.45, 0.25), (1.00, 0.60, 0.30), base=True),
    "sofa": ClassSpec((0.70, 0.35, 0.35), (1.00, 0.45, 0.45), base=True),
    "shelf": ClassSpec((0.40, 0.12, 0.80), (0.60, 0.20, 1.00)),
    "door": ClassSpec((0.45, 0.05, 1.00), (0.50, 0.08, 1.05)),
    "window": ClassSpec((0.40, 0.05, 0.50), (0.60, 0.08, 0.60), hover=(0.9, 1.4)),
    "lamp": ClassSpec((0.10, 0.10, 0.50), (0.15, 0.15, 0.80), top=True),
    "box": ClassSpec((0.10, 0.10, 0.10), (0.40, 0.40, 0.40), top=True),
    "plant": ClassSpec((0.12, 0.12, 0.30), (0.25, 0.25, 0.60), top=True),
    "trash can": ClassSpec((0.12, 0.12, 0.25), (0.20, 0.20, 0.40)),
    "monitor": ClassSpec((0.25, 0.04, 0.20), (0.35, 0.08, 0.30), top=True),
    "pillow": ClassSpec((0.15, 0.10, 0.06), (0.30, 0.20, 0.12), top=True),
    "book": ClassSpec((0.08, 0.05, 0.02), (0.15, 0.12, 0.05), top=True),
}

GEN_COLORS = ("red", "blue", "green", "yellow", "black", "white", "brown", "gray")
GEN_MATERIALS = ("wooden", "metal", "plastic", "fabric", "leather")
GEN_SHAPES = ("square", "round", "rectangular", "cylindrical", "oval")
GEN_MODIFIERS = ("tall", "short", "big", "small", "wide", "narrow")


@dataclass(frozen=True)
class GeneratorConfig:
    n_objects: tuple[int, int] = (5, 20)
    room: tuple[float, float] = (8.0, 8.0)
    margin: float = 0.1
    resolution: float = 0.1
    agent_radius: float = 0.3
    max_class_kinds: int = 7
    stack_fraction: float = 0.25
    hover_gap: tuple[float, float] = (0.30, 0.80)
    stack_gap: tuple[float, float] = (0.03, 0.10)
    color_prob: float = 0.9
    material_prob: float = 0.8
    shape_prob: float = 0.5
    modifier_prob: float = 0.2
    caption_all: bool = True
    max_attempts: int = 200
    classes: dict[str, ClassSpec] = field(default_factory=lambda: dict(DEFAULT_CLASSES))


@dataclass(frozen=True)
class ObjectAnnotation:
    label: str
    attributes: ObjectAttributes
    stacked_on: int | None = None
    hovers_over: int | None = None


@dataclass(frozen=True)
class SceneAnnotations:
    objects: dict[int, ObjectAnnotation]

    def attribute_of(self, object_id: int, name: str):
        return getattr(self.objects[object_id].attributes, name)


def _q2(value: float) -> float:
    return round(float(value), 2)


def _sample_extent(rng, spec: ClassSpec) -> np.ndarray:
    lo = np.array(spec.extent_lo)
    hi = np.array(spec.extent_hi)
    return np.array([_q2(v) for v in rng.uniform(lo, hi)])


def _caption(label: str, attrs: ObjectAttributes) -> str:
    descriptors = [v for v in (attrs.color, attrs.material, attrs.shape) if v]
    name = " ".join([*attrs.extra, label])
    if not descriptors:
        descriptors = ["plain"]
    return f"The {name} is {', '.join(descriptors)}"


def _sample_attributes(rng, config: GeneratorConfig) -> ObjectAttributes:
    color = str(rng.choice(GEN_COLORS)) if rng.random() < config.color_prob else None
    material = str(rng.choice(GEN_MATERIALS)) if rng.random() < config.material_prob else None
    shape = str(rng.choice(GEN_SHAPES)) if rng.random() < config.shape_prob else None
    extra = (str(rng.choice(GEN_MODIFIERS)),) if rng.random() < config.modifier_prob else ()
    return ObjectAttributes(color, material, shape, extra)


def _place_floor(rng, config, spec, extent, centers, extents):
    room_x, room_y = config.room
    if 2 * extent[0] > room_x or 2 * extent[1] > room_y:
        raise PlacementError(f"object footprint {extent[:2].tolist()} exceeds the room")
    for _ in range(config.max_attempts):
        cx = _q2(rng.uniform(extent[0], room_x - extent[0]))
        cy = _q2(rng.uniform(extent[1], room_y - extent[1]))
        if spec.hover is not None:
            cz = _q2(rng.uniform(*spec.hover))
        else:
            cz = _q2(extent[2])
        center = np.array([cx, cy, cz])
        if not kernels.aabb_conflicts(centers, extents, center, extent, config.margin):
            return center
    raise PlacementError("could not place object within the retry budget (room too crowded)")


def _place_on_base(rng, config, extent, base_center, base_extent, gap_range,
                   centers, extents, skip_index: int):
    """Stack within the base footprint; conflict check ignores the base."""
    others_c = np.delete(centers, skip_index, axis=0)
    others_e = np.delete(extents, skip_index, axis=0)
    slack = base_extent[:2] - extent[:2]
    for _ in range(config.max_attempts):
        dx = rng.uniform(-slack[0], slack[0]) if slack[0] > 0 else 0.0
        dy = rng.uniform(-slack[1], slack[1]) if slack[1] > 0 else 0.0
        gap = _q2(rng.uniform(*gap_range))
        center = np.array(
            [
                _q2(base_center[0] + dx),
                _q2(base_center[1] + dy),
                _q2(base_center[2] + base_extent[2] + gap + extent[2]),
            ]
        )
        if not kernels.aabb_conflicts(others_c, others_e, center, extent, config.margin):
            return center
    return None


def generate_scene(config: GeneratorConfig, seed: int,
                   scene_id: str | None = None) -> tuple[Scene, SceneAnnotations]:
    """Build a non-overlapping scene plus its ground-truth annotations."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(config.n_objects[0], config.n_objects[1] + 1))
    names = sorted(config.classes)
    kinds = rng.choice(names, size=min(config.max_class_kinds, len(names)), replace=False)
    labels = [str(rng.choice(kinds)) for _ in range(n)]

    order = sorted(range(n), key=lambda i: not config.classes[labels[i]].base)
    centers = np.zeros((0, 3))
    extents = np.zeros((0, 3))
    placed: list[tuple[int, str, np.ndarray, np.ndarray]] = []
    notes: dict[int, tuple[int | None, int | None]] = {}

    for idx in order:
        label = labels[idx]
        spec = config.classes[label]
        extent = _sample_extent(rng, spec)
        stacked_on = hovers_over = None
        center = None
        bases = [
            (j, placed[j])
            for j in range(len(placed))
            if config.classes[placed[j][1]].base
            and np.all(placed[j][3][:2] >= extent[:2])
        ]
        if spec.top and bases and rng.random() < config.stack_fraction:
            j, (base_idx, _, bc, be) = bases[int(rng.integers(len(bases)))]
            hover = rng.random() < 0.4
            gap_range = config.hover_gap if hover else config.stack_gap
            center = _place_on_base(rng, config, extent, bc, be, gap_range, centers, extents, j)
            if center is not None:
                if hover:
                    hovers_over = base_idx
                else:
                    stacked_on = base_idx
        if center is None:
            center = _place_floor(rng, config, spec, extent, centers, extents)
        centers = np.vstack([centers, center])
        extents = np.vstack([extents, extent])
        placed.append((idx, label, center, extent))
        notes[idx] = (stacked_on, hovers_over)

    objects = []
    annotations: dict[int, ObjectAnnotation] = {}
    id_of = {idx: oid for oid, (idx, *_rest) in enumerate(placed)}
    for oid, (idx, label, center, extent) in enumerate(placed):
        attrs = _sample_attributes(rng, config)
        caption = _caption(label, attrs) if config.caption_all else None
        objects.append(SceneObject(id=oid, label=label, center=center, extent=extent, caption=caption))
        stacked_on, hovers_over = notes[idx]
        annotations[oid] = ObjectAnnotation(
            label=label,
            attributes=attrs,
            stacked_on=id_of[stacked_on] if stacked_on is not None else None,
            hovers_over=id_of[hovers_over] if hovers_over is not None else None,
        )

    grid = _free_space(config, centers, extents)
    scene = Scene(
        scene_id=scene_id or f"gen-{seed:06d}",
        objects=tuple(objects),
        free_space=grid,
    )
    return scene, SceneAnnotations(annotations)


def _free_space(config: GeneratorConfig, centers: np.ndarray, extents: np.ndarray) -> FreeSpaceGrid:
    """Room area minus object footprints dilated by the agent radius."""
    room_x, room_y = config.room
    res = config.resolution
    width = int(np.ceil(room_x / res))
    height = int(np.ceil(room_y / res))
    cells = np.ones((height, width), dtype=np.bool_)
    xs = (np.arange(width) + 0.5) * res
    ys = (np.arange(height) + 0.5) * res
    for center, extent in zip(centers, extents):
        r = config.agent_radius
        col_hit = (xs >= center[0] - extent[0] - r) & (xs <= center[0] + extent[0] + r)
        row_hit = (ys >= center[1] - extent[1] - r) & (ys <= center[1] + extent[1] + r)
        cells[np.ix_(row_hit, col_hit)] = False
    return FreeSpaceGrid(origin=np.zeros(2), resolution=res, cells=cells)
