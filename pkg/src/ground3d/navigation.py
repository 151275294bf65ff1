"""Turn grounded objects into navigation waypoints and actions.

A waypoint is the center of the traversable grid cell closest to the
object's floor projection (ties: lowest row, then column), which is the
integration point toward a grid-based planner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import GroundingError, NoTraversableCellError
from .reasoner import GroundingResult
from .scene import Scene


@dataclass(frozen=True)
class NavAction:
    """go_near carries one waypoint, go_between exactly two."""

    kind: str
    waypoints: tuple[tuple[float, float], ...]
    source_ids: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in ("go_near", "go_between"):
            raise GroundingError(f"bad action kind {self.kind!r}")
        expected = 1 if self.kind == "go_near" else 2
        if len(self.waypoints) != expected:
            raise GroundingError(f"{self.kind} needs {expected} waypoint(s), got {len(self.waypoints)}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "waypoints": [[float(x), float(y)] for x, y in self.waypoints],
            "source_ids": list(self.source_ids),
        }


def object_to_waypoint(scene: Scene, object_id: int) -> np.ndarray:
    """Center of the traversable cell nearest the object's 2D projection."""
    obj = scene.object(object_id)
    grid = scene.free_space
    flat = kernels.grid_nearest_cell(
        grid.cells,
        float(grid.origin[0]),
        float(grid.origin[1]),
        float(grid.resolution),
        float(obj.center[0]),
        float(obj.center[1]),
    )
    if flat < 0:
        raise NoTraversableCellError("free-space grid has no traversable cell")
    row, col = divmod(int(flat), grid.width)
    return grid.cell_center(row, col)


def make_action(result: GroundingResult, scene: Scene, mode: str = "near",
                second_id: int | None = None) -> NavAction:
    """Wrap grounded object(s) into a navigation action."""
    if result.target_id is None:
        raise GroundingError("grounding result has no target id")
    if mode == "near":
        wp = object_to_waypoint(scene, result.target_id)
        return NavAction("go_near", ((float(wp[0]), float(wp[1])),), (result.target_id,))
    if mode == "between":
        if second_id is None:
            raise GroundingError("between mode needs a second grounded id")
        wp_a = object_to_waypoint(scene, result.target_id)
        wp_b = object_to_waypoint(scene, second_id)
        return NavAction(
            "go_between",
            ((float(wp_a[0]), float(wp_a[1])), (float(wp_b[0]), float(wp_b[1]))),
            (result.target_id, second_id),
        )
    raise GroundingError(f"unknown action mode {mode!r}")
