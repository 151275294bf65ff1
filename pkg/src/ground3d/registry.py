"""Name-based tool dispatch for the external protocol and trace replay.

Tools address objects by id and return a ToolCall record, which makes
every call serializable, mockable and re-executable: replaying a recorded
trace against the same scene must reproduce the recorded result ids.
"""

from __future__ import annotations

import numpy as np

from . import toolbox
from .errors import GroundingError
from .parser import ObjectDescriptor, Relation
from .relevance import filter_scene
from .scene import ObjectAttributes, Scene
from .toolbox import DEFAULT_CONFIG, RankedCandidates, ToolCall, ToolboxConfig, Viewpoint

_RANK_SIMPLE = {
    "rank_near": toolbox.rank_near,
    "rank_closest": toolbox.rank_closest,
    "rank_farthest": toolbox.rank_farthest,
    "rank_between": toolbox.rank_between,
    "rank_above": toolbox.rank_above,
    "rank_below": toolbox.rank_below,
    "rank_on_top_of": toolbox.rank_on_top_of,
}

_RANK_DIRECTIONAL = {
    "rank_left_of": Relation.LEFT_OF,
    "rank_right_of": Relation.RIGHT_OF,
    "rank_in_front_of": Relation.IN_FRONT_OF,
    "rank_behind": Relation.BEHIND,
}


def tool_names() -> list[str]:
    return sorted(
        [
            *_RANK_SIMPLE,
            *_RANK_DIRECTIONAL,
            "rank_ordinal_closest",
            "sample_viewpoint",
            "filter_by_attributes",
            "filter_scene",
            "compose",
            "intersect_ids",
            "union_ids",
        ]
    )


def _objects(scene: Scene, ids) -> list:
    return [scene.object(int(i)) for i in ids]


def _descriptor_from_args(args: dict) -> ObjectDescriptor:
    return ObjectDescriptor(
        class_name=args.get("class_name", "object"),
        attributes=ObjectAttributes(
            color=args.get("color"),
            material=args.get("material"),
            shape=args.get("shape"),
            extra=tuple(args.get("extra", ())),
        ),
        size_comparative=args.get("size_comparative"),
    )


def _viewpoint_for(scene: Scene, args: dict, candidates, config: ToolboxConfig) -> Viewpoint:
    if "viewpoint" in args and args["viewpoint"]:
        vp = args["viewpoint"]
        return Viewpoint(np.asarray(vp["position"]), np.asarray(vp["forward"]))
    view_anchor = None
    if args.get("view_anchor_id") is not None:
        view_anchor = scene.object(int(args["view_anchor_id"]))
    centers = np.array([o.center for o in candidates])
    return toolbox.sample_viewpoint(scene, view_anchor, centers.mean(axis=0), config)


def execute_tool(scene: Scene, tool: str, args: dict,
                 config: ToolboxConfig = DEFAULT_CONFIG) -> ToolCall:
    """Run one named tool against the scene and return its call record."""
    if tool in _RANK_SIMPLE:
        candidates = _objects(scene, args["candidate_ids"])
        anchors = _objects(scene, args["anchor_ids"])
        return _RANK_SIMPLE[tool](candidates, anchors, scene, config).provenance
    if tool in _RANK_DIRECTIONAL:
        candidates = _objects(scene, args["candidate_ids"])
        anchors = _objects(scene, args.get("anchor_ids", ()))
        viewpoint = _viewpoint_for(scene, args, candidates, config)
        return toolbox.rank_directional(
            _RANK_DIRECTIONAL[tool], candidates, anchors, scene, viewpoint, config
        ).provenance
    if tool == "rank_ordinal_closest":
        candidates = _objects(scene, args["candidate_ids"])
        anchors = _objects(scene, args["anchor_ids"])
        return toolbox.rank_ordinal_closest(int(args["k"]), candidates, anchors, scene, config).provenance
    if tool == "sample_viewpoint":
        view_anchor = None
        if args.get("view_anchor_id") is not None:
            view_anchor = scene.object(int(args["view_anchor_id"]))
        region = np.asarray(args["target_region"], dtype=np.float64)
        toolbox.sample_viewpoint(scene, view_anchor, region, config)
        return ToolCall(tool, args, [], [])
    if tool == "filter_by_attributes":
        candidates = _objects(scene, args["candidate_ids"])
        kept, _ = toolbox.filter_by_attributes(candidates, _descriptor_from_args(args))
        return ToolCall(tool, args, [o.id for o in kept], [])
    if tool == "filter_scene":
        mentions = [_descriptor_from_args(m) for m in args["mentions"]]
        report = filter_scene(scene, mentions)
        return ToolCall(tool, args, sorted(report.kept_ids), [])
    if tool == "compose":
        rankings = [
            RankedCandidates(tuple((int(i), float(s)) for i, s in zip(entry["ids"], entry["scores"])))
            for entry in args["inputs"]
        ]
        return toolbox.compose(rankings, args.get("combinator", "intersect")).provenance
    if tool == "intersect_ids":
        lists = [set(map(int, ids)) for ids in args["id_lists"]]
        out = set.intersection(*lists) if lists else set()
        return ToolCall(tool, args, sorted(out), [])
    if tool == "union_ids":
        lists = [set(map(int, ids)) for ids in args["id_lists"]]
        out = set.union(*lists) if lists else set()
        return ToolCall(tool, args, sorted(out), [])
    raise GroundingError(f"unknown tool {tool!r}")


def replay_trace(scene: Scene, trace: list[dict],
                 config: ToolboxConfig = DEFAULT_CONFIG) -> bool:
    """Re-execute recorded tool calls; True when every result matches."""
    for record in trace:
        executed = execute_tool(scene, record["tool"], record["args"], config)
        if list(executed.result_ids) != list(record["result_ids"]):
            return False
    return True


def describe_tools() -> str:
    """Human/LLM-readable tool inventory for the prompt."""
    lines = [
        'rank_closest(candidate_ids, anchor_ids) -> candidates ordered nearest-to-anchor first',
        'rank_near(candidate_ids, anchor_ids) -> like rank_closest but scores drop to zero beyond the proximity radius',
        'rank_farthest(candidate_ids, anchor_ids) -> candidates ordered farthest-from-anchor first',
        'rank_ordinal_closest(candidate_ids, anchor_ids, k) -> the k-th closest candidate first',
        'rank_between(candidate_ids, anchor_ids) -> candidates ordered by closeness to the segment between the two anchors',
        'rank_above(candidate_ids, anchor_ids) -> candidates above the anchor first, nearer footprints first',
        'rank_below(candidate_ids, anchor_ids) -> candidates below the anchor first',
        'rank_on_top_of(candidate_ids, anchor_ids) -> candidates resting on the anchor first',
        'rank_left_of(candidate_ids, anchor_ids, view_anchor_id?) -> candidates left of the anchor from a feasible viewpoint; omit anchor_ids to rank relative to the viewpoint',
        'rank_right_of(candidate_ids, anchor_ids, view_anchor_id?) -> right-of ordering',
        'rank_in_front_of(candidate_ids, anchor_ids, view_anchor_id?) -> in-front ordering',
        'rank_behind(candidate_ids, anchor_ids, view_anchor_id?) -> behind ordering',
        'filter_by_attributes(candidate_ids, color?, material?, shape?, size_comparative?) -> ids whose caption matches',
        'intersect_ids(id_lists) -> ids present in every list',
        'union_ids(id_lists) -> ids present in any list',
    ]
    return "\n".join(f"- {line}" for line in lines)
