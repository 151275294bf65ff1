"""Spatial-relation ranking functions over scene objects.

Every relation takes a candidate set and anchor objects and returns the
full candidate set ordered by how well each candidate satisfies the
relation (best first, ties broken by ascending id). Rankings never drop
or invent ids, so they compose into set union/intersection problems.

Distance between objects is the gap between AABB surfaces (per-axis
clamped), falling back to center distance when the boxes overlap; this
keeps large anchors such as doors from distorting closest/near queries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    ArityError,
    EmptyCandidatesError,
    NoFeasibleViewpointError,
    OrdinalRangeError,
)
from .parser import ObjectDescriptor, Relation
from .scene import Scene, SceneObject, parse_caption_attributes


@dataclass(frozen=True)
class ToolboxConfig:
    """Geometry tolerances; defaults sized for indoor furniture."""

    near_radius: float = 1.5
    contact_tol: float = 0.15
    gap_eps: float = 0.05
    between_alpha: float = 2.0
    standoff: float = 0.5
    viewpoint_search_radius: float = -1.0  # negative: unbounded
    floor_shift: float = 1e6
    floor_score: float = -1e9


DEFAULT_CONFIG = ToolboxConfig()


@dataclass
class ToolCall:
    """One executed tool invocation, the unit of the trace."""

    tool: str
    args: dict
    result_ids: list[int] = field(default_factory=list)
    scores: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "tool": self.tool,
            "args": self.args,
            "result_ids": list(self.result_ids),
            "scores": [float(s) for s in self.scores],
        }


@dataclass(frozen=True)
class RankedCandidates:
    """Ordered (id, score) pairs, score descending then id ascending."""

    entries: tuple[tuple[int, float], ...]
    provenance: ToolCall | None = None

    def ids(self) -> list[int]:
        return [i for i, _ in self.entries]

    def scores(self) -> list[float]:
        return [s for _, s in self.entries]

    @property
    def top1(self) -> int | None:
        return self.entries[0][0] if self.entries else None

    def margin(self) -> float:
        """Score gap between the best and second-best entry."""
        if len(self.entries) < 2:
            return math.inf
        return self.entries[0][1] - self.entries[1][1]

    def without(self, object_id: int) -> "RankedCandidates":
        return RankedCandidates(
            tuple(e for e in self.entries if e[0] != object_id), self.provenance
        )


@dataclass(frozen=True)
class Viewpoint:
    """An observer pose on the free-space grid: 2D position + unit forward."""

    position: np.ndarray
    forward: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64))
        object.__setattr__(self, "forward", np.asarray(self.forward, dtype=np.float64))

    def to_dict(self) -> dict:
        return {"position": self.position.tolist(), "forward": self.forward.tolist()}


def _sorted_candidates(candidates) -> list[SceneObject]:
    objs = sorted(candidates, key=lambda o: o.id)
    if not objs:
        raise EmptyCandidatesError("relation called with no candidates")
    return objs


def _check_arity(anchors, expected: int, tool: str):
    if len(anchors) != expected:
        raise ArityError(f"{tool} needs {expected} anchor(s), got {len(anchors)}")


def _stack(objs: list[SceneObject]):
    centers = np.ascontiguousarray([o.center for o in objs], dtype=np.float64)
    extents = np.ascontiguousarray([o.extent for o in objs], dtype=np.float64)
    return centers, extents


def _ranked(objs, scores, tool: str, args: dict) -> RankedCandidates:
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError(f"{tool} produced non-finite scores")
    order = sorted(range(len(objs)), key=lambda i: (-scores[i], objs[i].id))
    entries = tuple((objs[i].id, float(scores[i])) for i in order)
    call = ToolCall(tool, args, [e[0] for e in entries], [e[1] for e in entries])
    return RankedCandidates(entries, call)


def _base_args(objs, anchors) -> dict:
    return {
        "candidate_ids": [o.id for o in objs],
        "anchor_ids": [a.id for a in anchors],
    }


def _anchor_distances(objs, anchor: SceneObject) -> np.ndarray:
    centers, extents = _stack(objs)
    return kernels.box_gap_distances(
        centers, extents, np.ascontiguousarray(anchor.center), np.ascontiguousarray(anchor.extent)
    )


# ---------------------------------------------------------------------------
# proximity relations

def rank_closest(candidates, anchors, scene: Scene, config: ToolboxConfig = DEFAULT_CONFIG):
    objs = _sorted_candidates(candidates)
    _check_arity(anchors, 1, "rank_closest")
    d = _anchor_distances(objs, anchors[0])
    return _ranked(objs, -d, "rank_closest", _base_args(objs, anchors))


def rank_near(candidates, anchors, scene: Scene, config: ToolboxConfig = DEFAULT_CONFIG):
    """Hinge score ``max(0, radius - distance)``: zero outside the radius."""
    objs = _sorted_candidates(candidates)
    _check_arity(anchors, 1, "rank_near")
    d = _anchor_distances(objs, anchors[0])
    scores = np.maximum(0.0, config.near_radius - d)
    return _ranked(objs, scores, "rank_near", _base_args(objs, anchors))


def rank_farthest(candidates, anchors, scene: Scene, config: ToolboxConfig = DEFAULT_CONFIG):
    objs = _sorted_candidates(candidates)
    _check_arity(anchors, 1, "rank_farthest")
    d = _anchor_distances(objs, anchors[0])
    return _ranked(objs, d, "rank_farthest", _base_args(objs, anchors))


def rank_ordinal_closest(k: int, candidates, anchors, scene: Scene,
                         config: ToolboxConfig = DEFAULT_CONFIG):
    """k-th nearest first; the k-1 nearer entries rotate to the tail.

    Scores are positional (0, -1, -2, ...) so the permutation contract and
    the descending-score invariant both hold.
    """
    objs = _sorted_candidates(candidates)
    _check_arity(anchors, 1, "rank_ordinal_closest")
    if k < 1 or k > len(objs):
        raise OrdinalRangeError(f"ordinal k={k} out of range for {len(objs)} candidates")
    d = _anchor_distances(objs, anchors[0])
    order = sorted(range(len(objs)), key=lambda i: (d[i], objs[i].id))
    rotated = order[k - 1 :] + order[: k - 1]
    args = {**_base_args(objs, anchors), "k": k}
    entries = tuple((objs[i].id, 0.0 - pos) for pos, i in enumerate(rotated))
    call = ToolCall("rank_ordinal_closest", args, [e[0] for e in entries], [e[1] for e in entries])
    return RankedCandidates(entries, call)


def rank_between(candidates, anchors, scene: Scene, config: ToolboxConfig = DEFAULT_CONFIG):
    """Negative lateral distance to the anchor segment, plus a weighted
    penalty for overshooting the segment ends."""
    objs = _sorted_candidates(candidates)
    _check_arity(anchors, 2, "rank_between")
    centers, _ = _stack(objs)
    scores = kernels.between_scores(
        centers,
        np.ascontiguousarray(anchors[0].center),
        np.ascontiguousarray(anchors[1].center),
        config.between_alpha,
    )
    return _ranked(objs, scores, "rank_between", _base_args(objs, anchors))


# ---------------------------------------------------------------------------
# vertical relations

def _horizontal_offset(objs, anchor: SceneObject) -> np.ndarray:
    centers, _ = _stack(objs)
    delta = centers[:, :2] - anchor.center[:2]
    return np.sqrt(np.sum(delta * delta, axis=1))


def rank_above(candidates, anchors, scene: Scene, config: ToolboxConfig = DEFAULT_CONFIG):
    objs = _sorted_candidates(candidates)
    _check_arity(anchors, 1, "rank_above")
    anchor = anchors[0]
    offset = _horizontal_offset(objs, anchor)
    passes = np.array([o.bottom >= anchor.top - config.gap_eps for o in objs])
    scores = np.where(passes, -offset, config.floor_score)
    return _ranked(objs, scores, "rank_above", _base_args(objs, anchors))


def rank_below(candidates, anchors, scene: Scene, config: ToolboxConfig = DEFAULT_CONFIG):
    objs = _sorted_candidates(candidates)
    _check_arity(anchors, 1, "rank_below")
    anchor = anchors[0]
    offset = _horizontal_offset(objs, anchor)
    passes = np.array([o.top <= anchor.bottom + config.gap_eps for o in objs])
    scores = np.where(passes, -offset, config.floor_score)
    return _ranked(objs, scores, "rank_below", _base_args(objs, anchors))


def rank_on_top_of(candidates, anchors, scene: Scene, config: ToolboxConfig = DEFAULT_CONFIG):
    """Above gate tightened to contact: vertical gap <= contact_tol and
    overlapping xy footprints."""
    objs = _sorted_candidates(candidates)
    _check_arity(anchors, 1, "rank_on_top_of")
    anchor = anchors[0]
    offset = _horizontal_offset(objs, anchor)
    passes = []
    for o in objs:
        gap_ok = (o.bottom >= anchor.top - config.gap_eps) and (
            o.bottom - anchor.top <= config.contact_tol
        )
        foot_ok = (
            abs(o.center[0] - anchor.center[0]) <= o.extent[0] + anchor.extent[0]
            and abs(o.center[1] - anchor.center[1]) <= o.extent[1] + anchor.extent[1]
        )
        passes.append(gap_ok and foot_ok)
    scores = np.where(np.array(passes), -offset, config.floor_score)
    return _ranked(objs, scores, "rank_on_top_of", _base_args(objs, anchors))


# ---------------------------------------------------------------------------
# view-dependent relations

def sample_viewpoint(scene: Scene, view_anchor: SceneObject | None, target_region,
                     config: ToolboxConfig = DEFAULT_CONFIG) -> Viewpoint:
    """Anchor an observer pose in free space.

    With a view anchor ("facing the door"), stand on the traversable cell
    nearest the anchor at standoff >= d_min, facing the anchor; otherwise
    stand near ``target_region`` facing it. When no cell meets the
    standoff the nearest-feasible cell is used best-effort; only a grid
    with no traversable cell in range raises.
    """
    grid = scene.free_space
    focus = np.asarray(view_anchor.center[:2] if view_anchor is not None else target_region[:2],
                       dtype=np.float64)
    flat = kernels.grid_standoff_cell(
        grid.cells,
        float(grid.origin[0]),
        float(grid.origin[1]),
        float(grid.resolution),
        float(focus[0]),
        float(focus[1]),
        config.standoff,
        config.viewpoint_search_radius,
    )
    if flat < 0:
        raise NoFeasibleViewpointError("no traversable cell within the viewpoint search radius")
    row, col = divmod(int(flat), grid.width)
    position = grid.cell_center(row, col)
    direction = focus - position
    norm = float(np.sqrt(np.sum(direction * direction)))
    forward = direction / norm if norm > 1e-12 else np.array([1.0, 0.0])
    return Viewpoint(position, forward)


_DIRECTIONAL_TOOL = {
    Relation.LEFT_OF: "rank_left_of",
    Relation.RIGHT_OF: "rank_right_of",
    Relation.IN_FRONT_OF: "rank_in_front_of",
    Relation.BEHIND: "rank_behind",
}


def rank_directional(direction: Relation, candidates, anchors, scene: Scene,
                     viewpoint: Viewpoint, config: ToolboxConfig = DEFAULT_CONFIG):
    """Rank by signed projection in the observer frame.

    Frame: f = forward lifted to 3D, u = world up, r = f x u (observer's
    right). The relative vector runs from the anchor center (or from the
    viewpoint when no anchor is given) to each candidate. Wrong-half-space
    candidates keep their ordering but are shifted below every
    correct-side candidate instead of being dropped.
    """
    tool = _DIRECTIONAL_TOOL[direction]
    objs = _sorted_candidates(candidates)
    if len(anchors) > 1:
        raise ArityError(f"{tool} takes at most 1 anchor, got {len(anchors)}")
    f = np.array([viewpoint.forward[0], viewpoint.forward[1], 0.0])
    r = np.array([f[1], -f[0], 0.0])  # f x u with u = +z
    if anchors:
        origin = anchors[0].center
    else:
        origin = np.array([viewpoint.position[0], viewpoint.position[1], 0.0])
    centers, _ = _stack(objs)
    v = centers - origin
    if direction is Relation.LEFT_OF:
        raw = -(v @ r)
    elif direction is Relation.RIGHT_OF:
        raw = v @ r
    elif direction is Relation.IN_FRONT_OF:
        raw = v @ f
    else:
        raw = -(v @ f)
    scores = np.where(raw < 0.0, raw - config.floor_shift, raw)
    args = {**_base_args(objs, anchors), "viewpoint": viewpoint.to_dict()}
    return _ranked(objs, scores, tool, args)


# ---------------------------------------------------------------------------
# attribute filtering and composition

def filter_by_attributes(candidates, descriptor: ObjectDescriptor):
    """Keep candidates whose caption attributes match the descriptor.

    Soft-fails per attribute: a stated attribute that matches nothing
    leaves the pool unchanged and flips the returned flag, so downstream
    reasoning can still recover. Returns (kept, soft_failed).
    """
    pool = sorted(candidates, key=lambda o: o.id)
    soft_failed = False
    want = descriptor.attributes
    for name in ("color", "material", "shape"):
        value = getattr(want, name)
        if value is None:
            continue
        matching = [o for o in pool if getattr(parse_caption_attributes(o.caption), name) == value]
        if matching:
            pool = matching
        else:
            soft_failed = True
    comparative = descriptor.size_comparative
    if comparative and pool:
        sizes = [o.size for o in pool]
        if comparative == "largest":
            best = max(sizes)
            pool = [o for o in pool if o.size == best]
        elif comparative == "smallest":
            best = min(sizes)
            pool = [o for o in pool if o.size == best]
        elif comparative == "larger":
            subset = [o for o in pool if o.size > min(sizes)]
            if subset:
                pool = subset
            else:
                soft_failed = True
        elif comparative == "smaller":
            subset = [o for o in pool if o.size < max(sizes)]
            if subset:
                pool = subset
            else:
                soft_failed = True
    return tuple(pool), soft_failed


def _rank_normalized(ranking: RankedCandidates) -> dict[int, float]:
    n = len(ranking.entries)
    if n == 1:
        return {ranking.entries[0][0]: 1.0}
    return {oid: 1.0 - pos / (n - 1) for pos, (oid, _) in enumerate(ranking.entries)}


def compose(results: list[RankedCandidates], combinator: str = "intersect") -> RankedCandidates:
    """Set-combine rankings: intersect sums rank-normalized scores over
    inputs, union takes the max. A single input passes through unchanged."""
    if not results:
        raise EmptyCandidatesError("compose called with no rankings")
    if combinator not in ("intersect", "union"):
        raise ValueError(f"bad combinator {combinator!r}")
    args = {
        "combinator": combinator,
        "inputs": [{"ids": r.ids(), "scores": r.scores()} for r in results],
    }
    if len(results) == 1:
        entries = results[0].entries
        call = ToolCall("compose", args, [e[0] for e in entries], [e[1] for e in entries])
        return RankedCandidates(entries, call)
    norms = [_rank_normalized(r) for r in results]
    if combinator == "intersect":
        keep = set(norms[0])
        for n in norms[1:]:
            keep &= set(n)
        combined = {oid: sum(n[oid] for n in norms) for oid in keep}
    else:
        combined: dict[int, float] = {}
        for n in norms:
            for oid, score in n.items():
                combined[oid] = max(combined.get(oid, -math.inf), score)
    entries = tuple(
        (oid, float(combined[oid]))
        for oid in sorted(combined, key=lambda o: (-combined[o], o))
    )
    call = ToolCall("compose", args, [e[0] for e in entries], [e[1] for e in entries])
    return RankedCandidates(entries, call)
