"""Scene data model and file ingestion.

A scene is an immutable collection of axis-aligned objects plus a 2D
free-space occupancy grid. World up is fixed +z; scenes captured with a
different convention must be rotated before ingest.

The on-disk form is canonical: objects sorted by id, coordinates rounded
to 0.01 m, grid cells packed as a base64 bitset. ``load_scene`` /
``save_scene`` round-trip byte-exactly on this form. Geometry stays at
full float precision in memory; rounding happens only at serialization.
"""

from __future__ import annotations

import base64
import json
import re
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import (
    MissingGridError,
    SceneParseError,
    SceneValidationError,
    UnknownObjectError,
)
from .lexicon import vocabulary

SIZE_RTOL = 1e-9


def _freeze(arr, shape, dtype=np.float64):
    out = np.asarray(arr, dtype=dtype).reshape(shape)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ObjectAttributes:
    """Attributes extracted from a caption or a referring expression."""

    color: str | None = None
    material: str | None = None
    shape: str | None = None
    extra: tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("color", "material", "shape"):
            value = getattr(self, name)
            if value is not None and (not value or value != value.lower()):
                raise SceneValidationError(f"attribute {name}={value!r} must be lowercase and non-empty")
        object.__setattr__(self, "extra", tuple(self.extra))

    def is_empty(self) -> bool:
        return self.color is None and self.material is None and self.shape is None and not self.extra

    def to_dict(self) -> dict:
        out = {}
        for name in ("color", "material", "shape"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        if self.extra:
            out["extra"] = list(self.extra)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ObjectAttributes":
        return cls(
            color=data.get("color"),
            material=data.get("material"),
            shape=data.get("shape"),
            extra=tuple(data.get("extra", ())),
        )


@dataclass(frozen=True)
class SceneObject:
    """One detected object: id, class label, optional caption, AABB.

    ``extent`` holds half-sizes; ``size`` is the AABB volume
    ``8 * ex * ey * ez`` and is recomputed when not supplied.
    """

    id: int
    label: str
    center: np.ndarray
    extent: np.ndarray
    caption: str | None = None
    size: float | None = None

    def __post_init__(self):
        if not self.label:
            raise SceneValidationError(f"object {self.id}: empty label")
        object.__setattr__(self, "label", self.label.lower())
        object.__setattr__(self, "center", _freeze(self.center, (3,)))
        object.__setattr__(self, "extent", _freeze(self.extent, (3,)))
        if not np.all(self.extent > 0):
            raise SceneValidationError(f"object {self.id}: extent must be positive, got {self.extent.tolist()}")
        volume = float(8.0 * self.extent[0] * self.extent[1] * self.extent[2])
        if self.size is None:
            object.__setattr__(self, "size", volume)
        elif abs(self.size - volume) > SIZE_RTOL * max(abs(volume), 1e-300):
            raise SceneValidationError(
                f"object {self.id}: stored size {self.size} does not match extent volume {volume}"
            )

    @property
    def top(self) -> float:
        return float(self.center[2] + self.extent[2])

    @property
    def bottom(self) -> float:
        return float(self.center[2] - self.extent[2])

    def with_caption(self, caption: str | None) -> "SceneObject":
        return replace(self, caption=caption)


@dataclass(frozen=True)
class FreeSpaceGrid:
    """Row-major boolean traversability grid over the floor plane."""

    origin: np.ndarray
    resolution: float
    cells: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", _freeze(self.origin, (2,)))
        cells = np.asarray(self.cells, dtype=np.bool_)
        if cells.ndim != 2:
            raise SceneValidationError(f"grid cells must be 2D, got shape {cells.shape}")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        if self.resolution <= 0:
            raise SceneValidationError(f"grid resolution must be > 0, got {self.resolution}")

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def traversable_count(self) -> int:
        return int(self.cells.sum())

    def cell_center(self, row: int, col: int) -> np.ndarray:
        return self.origin + (np.array([col, row], dtype=np.float64) + 0.5) * self.resolution


UP_AXIS = _freeze([0.0, 0.0, 1.0], (3,))


@dataclass(frozen=True)
class Scene:
    """Immutable object collection plus free space; safe to share."""

    scene_id: str
    objects: tuple[SceneObject, ...]
    free_space: FreeSpaceGrid
    up_axis: np.ndarray = field(default=UP_AXIS)

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "up_axis", _freeze(self.up_axis, (3,)))
        if not np.array_equal(self.up_axis, UP_AXIS):
            raise SceneValidationError(f"up_axis must be +z, got {self.up_axis.tolist()}")
        if not self.objects:
            raise SceneValidationError("scene has no objects")
        seen: set[int] = set()
        for obj in self.objects:
            if obj.id in seen:
                raise SceneValidationError(f"duplicate object id {obj.id}")
            seen.add(obj.id)

    @cached_property
    def by_id(self) -> dict[int, SceneObject]:
        return {obj.id: obj for obj in self.objects}

    def object(self, object_id: int) -> SceneObject:
        try:
            return self.by_id[object_id]
        except KeyError:
            raise UnknownObjectError(object_id) from None

    def ids(self) -> set[int]:
        return set(self.by_id)

    def with_objects(self, objects) -> "Scene":
        return Scene(self.scene_id, tuple(objects), self.free_space, self.up_axis)

    def without_captions(self) -> "Scene":
        return self.with_objects(obj.with_caption(None) for obj in self.objects)


# ---------------------------------------------------------------------------
# caption attribute extraction

_TEMPLATE = re.compile(r"^the\s+(?P<name>.+?)\s+is\s+(?P<props>.+?)\.?$")


def _classify(word: str, attrs: dict, extra: list[str]) -> None:
    vocab = vocabulary()
    if word in vocab["colors"] and attrs["color"] is None:
        attrs["color"] = word
    elif word in vocab["materials"] and attrs["material"] is None:
        attrs["material"] = word
    elif word in vocab["shapes"] and attrs["shape"] is None:
        attrs["shape"] = word
    elif word and word not in extra:
        extra.append(word)


def parse_caption_attributes(caption: str | None) -> ObjectAttributes:
    """Extract color/material/shape from a template-style caption.

    Captions follow "The <name> is <descriptor>, <descriptor>, ...".
    Descriptors are classified against the closed vocabularies; adjectives
    embedded in the name part ("tall recycling bin") and any descriptor
    outside the vocabularies land in ``extra``. Never raises: anything
    off-template yields all-absent attributes.
    """
    if not caption:
        return ObjectAttributes()
    m = _TEMPLATE.match(caption.strip().lower())
    if not m:
        return ObjectAttributes()
    vocab = vocabulary()
    attrs: dict = {"color": None, "material": None, "shape": None}
    extra: list[str] = []
    known = vocab["colors"] | vocab["materials"] | vocab["shapes"] | vocab["modifiers"]
    for token in m.group("name").split():
        if token in known:
            _classify(token, attrs, extra)
    for phrase in re.split(r",|\band\b", m.group("props")):
        phrase = phrase.strip().strip(".")
        if not phrase:
            continue
        if phrase in known:
            _classify(phrase, attrs, extra)
        else:
            for word in phrase.split():
                _classify(word, attrs, extra)
    return ObjectAttributes(attrs["color"], attrs["material"], attrs["shape"], tuple(extra))


# ---------------------------------------------------------------------------
# serialization

def _round2(values) -> list[float]:
    return [round(float(v), 2) for v in values]


def _encode_cells(cells: np.ndarray) -> str:
    packed = np.packbits(cells.reshape(-1).astype(np.uint8))
    return base64.b64encode(packed.tobytes()).decode("ascii")


def _decode_cells(data, width: int, height: int) -> np.ndarray:
    count = width * height
    if isinstance(data, str):
        raw = np.frombuffer(base64.b64decode(data), dtype=np.uint8)
        bits = np.unpackbits(raw)
        if len(bits) < count:
            raise SceneValidationError("free_space cells bitset shorter than width*height")
        flat = bits[:count].astype(np.bool_)
    else:
        flat = np.asarray(data)
        if flat.ndim == 2:
            flat = flat.reshape(-1)
        if flat.size != count:
            raise SceneValidationError(
                f"free_space cells count {flat.size} != width*height {count}"
            )
        flat = flat.astype(np.bool_)
    return flat.reshape(height, width)


def scene_to_dict(scene: Scene) -> dict:
    grid = scene.free_space
    return {
        "scene_id": scene.scene_id,
        "up_axis": [0, 0, 1],
        "objects": [
            {
                "id": obj.id,
                "label": obj.label,
                "caption": obj.caption,
                "center": _round2(obj.center),
                "extent": _round2(obj.extent),
            }
            for obj in sorted(scene.objects, key=lambda o: o.id)
        ],
        "free_space": {
            "origin": _round2(grid.origin),
            "resolution": float(grid.resolution),
            "width": grid.width,
            "height": grid.height,
            "cells": _encode_cells(grid.cells),
        },
    }


def scene_from_dict(data: dict) -> Scene:
    if not isinstance(data, dict):
        raise SceneParseError("scene document is not a JSON object")
    if "free_space" not in data or data["free_space"] is None:
        raise MissingGridError(f"scene {data.get('scene_id')!r} has no free_space grid")
    try:
        objects = tuple(
            SceneObject(
                id=int(entry["id"]),
                label=entry["label"],
                caption=entry.get("caption"),
                center=entry["center"],
                extent=entry["extent"],
            )
            for entry in data["objects"]
        )
        fs = data["free_space"]
        grid = FreeSpaceGrid(
            origin=fs["origin"],
            resolution=float(fs["resolution"]),
            cells=_decode_cells(fs["cells"], int(fs["width"]), int(fs["height"])),
        )
        return Scene(
            scene_id=str(data["scene_id"]),
            objects=objects,
            free_space=grid,
            up_axis=data.get("up_axis", [0, 0, 1]),
        )
    except (KeyError, TypeError) as exc:
        raise SceneParseError(f"malformed scene document: {exc!r}") from exc


def load_scene(path: str | Path) -> Scene:
    path = Path(path)
    try:
        data = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise SceneParseError(f"{path}: invalid JSON ({exc})") from exc
    return scene_from_dict(data)


def save_scene(scene: Scene, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=1) + "\n", "utf-8")


def load_caption_sidecar(path: str | Path) -> dict[int, str]:
    """Read a ``{"<id>": "<caption>"}`` sidecar file."""
    try:
        raw = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise SceneParseError(f"{path}: invalid JSON ({exc})") from exc
    try:
        return {int(key): str(value) for key, value in raw.items()}
    except (ValueError, AttributeError) as exc:
        raise SceneParseError(f"{path}: caption sidecar must map ids to strings") from exc


def attach_captions(scene: Scene, captions: dict[int, str]) -> Scene:
    """Return a scene with captions set on the referenced objects."""
    unknown = set(captions) - scene.ids()
    if unknown:
        raise UnknownObjectError(unknown)
    if not captions:
        return scene
    return scene.with_objects(
        obj.with_caption(captions[obj.id]) if obj.id in captions else obj
        for obj in scene.objects
    )
