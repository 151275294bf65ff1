"""Resolve relation programs to object ids.

Two paths share the toolbox and the trace format. The deterministic path
executes a parsed program as a fixed sequence of tool calls; the external
path assembles a prompt (tool inventory, one in-context example, the
filtered object rows, the utterance) and loops over strict-JSON tool
calls from a chat-completion endpoint until it answers.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import toolbox
from .errors import (
    AnchorNotFoundError,
    AnswerIdError,
    ConfigError,
    EmptyCandidatesError,
    EndpointError,
    MalformedToolCallError,
    RoundLimitError,
)
from .lexicon import classes_match
from .parser import DIRECTIONAL, ObjectDescriptor, Relation, RelationProgram, RelationTerm
from .registry import execute_tool
from .relevance import extract_mentions, filter_scene
from .scene import Scene, SceneObject
from .toolbox import (
    DEFAULT_CONFIG,
    RankedCandidates,
    ToolCall,
    ToolboxConfig,
)


@dataclass
class GroundingResult:
    """Outcome of grounding one statement."""

    target_id: int | None
    ranked: RankedCandidates
    trace: list[ToolCall]
    path: str  # "deterministic" or "external"
    kept_ids: frozenset[int] = frozenset()
    low_confidence: bool = False

    def to_dict(self) -> dict:
        return {
            "target_id": self.target_id,
            "ranked_ids": self.ranked.ids(),
            "scores": self.ranked.scores(),
            "path": self.path,
            "kept_ids": sorted(self.kept_ids),
            "low_confidence": self.low_confidence,
            "trace": [call.to_dict() for call in self.trace],
        }


def descriptor_args(desc: ObjectDescriptor) -> dict:
    """Serialize a descriptor into tool-call args (wire format)."""
    out: dict = {"class_name": desc.class_name}
    out.update(desc.attributes.to_dict())
    if desc.size_comparative:
        out["size_comparative"] = desc.size_comparative
    return out


# ---------------------------------------------------------------------------
# deterministic path

def _match_class(objs, class_name: str) -> list[SceneObject]:
    return sorted((o for o in objs if classes_match(o.label, class_name)), key=lambda o: o.id)


def _select_anchors(term: RelationTerm, pool, exclude_ids: set[int]):
    """Pick concrete anchor objects for a term's descriptors.

    Objects outside the candidate set are preferred; several descriptors
    of the same class pick distinct objects in id order.
    """
    chosen: list[SceneObject] = []
    used: set[int] = set()
    for desc in term.anchors:
        matches = _match_class(pool, desc.class_name)
        matches, _ = toolbox.filter_by_attributes(matches, desc)
        preferred = [o for o in matches if o.id not in exclude_ids and o.id not in used]
        fallback = [o for o in matches if o.id not in used]
        pick = (preferred or fallback)
        if not pick:
            raise AnchorNotFoundError(f"no object matches anchor {desc}")
        chosen.append(pick[0])
        used.add(pick[0].id)
    return chosen


def _resolve_view_anchor(term: RelationTerm, pool) -> SceneObject | None:
    if term.view_anchor is None:
        return None
    matches = _match_class(pool, term.view_anchor.class_name)
    matches, _ = toolbox.filter_by_attributes(matches, term.view_anchor)
    if not matches:
        raise AnchorNotFoundError(f"no object matches view anchor {term.view_anchor}")
    return matches[0]


def _run_term(term: RelationTerm, candidates, pool, scene: Scene,
              config: ToolboxConfig, trace: list[ToolCall]) -> RankedCandidates:
    exclude = {o.id for o in candidates}
    anchors = _select_anchors(term, pool, exclude)
    if term.relation in DIRECTIONAL:
        view_obj = _resolve_view_anchor(term, pool)
        centers = np.array([o.center for o in candidates])
        region = centers.mean(axis=0)
        viewpoint = toolbox.sample_viewpoint(scene, view_obj, region, config)
        trace.append(
            ToolCall(
                "sample_viewpoint",
                {
                    "view_anchor_id": view_obj.id if view_obj is not None else None,
                    "target_region": [float(x) for x in region],
                },
            )
        )
        result = toolbox.rank_directional(term.relation, candidates, anchors, scene, viewpoint, config)
    elif term.relation is Relation.ORDINAL_CLOSEST:
        result = toolbox.rank_ordinal_closest(term.k, candidates, anchors, scene, config)
    elif term.relation is Relation.BETWEEN:
        result = toolbox.rank_between(candidates, anchors, scene, config)
    elif term.relation is Relation.NEAR:
        result = toolbox.rank_near(candidates, anchors, scene, config)
    elif term.relation is Relation.CLOSEST:
        result = toolbox.rank_closest(candidates, anchors, scene, config)
    elif term.relation is Relation.FARTHEST:
        result = toolbox.rank_farthest(candidates, anchors, scene, config)
    elif term.relation is Relation.ABOVE:
        result = toolbox.rank_above(candidates, anchors, scene, config)
    elif term.relation is Relation.BELOW:
        result = toolbox.rank_below(candidates, anchors, scene, config)
    elif term.relation is Relation.ON_TOP_OF:
        result = toolbox.rank_on_top_of(candidates, anchors, scene, config)
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unhandled relation {term.relation}")
    trace.append(result.provenance)
    return result


def resolve(program: RelationProgram, scene: Scene,
            config: ToolboxConfig = DEFAULT_CONFIG, *,
            use_filter: bool = True) -> GroundingResult:
    """Ground a parsed program deterministically.

    Pipeline: relevance filter, class + attribute candidate selection,
    one ranking per relation term, set composition, subtraction of each
    negated term's best match. Pure function of its inputs.
    """
    trace: list[ToolCall] = []
    if use_filter:
        mentions = extract_mentions(program)
        kept_ids = filter_scene(scene, mentions).kept_ids
    else:
        mentions = []  # an empty mention list keeps the whole scene
        kept_ids = frozenset(scene.ids())
    trace.append(
        ToolCall(
            "filter_scene",
            {"mentions": [descriptor_args(m) for m in mentions]},
            sorted(kept_ids),
            [],
        )
    )
    pool = [o for o in scene.objects if o.id in kept_ids]

    class_matches = _match_class(pool, program.target.class_name)
    if not class_matches:
        raise EmptyCandidatesError(
            f"no object of class {program.target.class_name!r} in the filtered scene"
        )
    candidates, soft_failed = toolbox.filter_by_attributes(class_matches, program.target)
    trace.append(
        ToolCall(
            "filter_by_attributes",
            {
                "candidate_ids": [o.id for o in class_matches],
                **descriptor_args(program.target),
            },
            [o.id for o in candidates],
            [],
        )
    )

    low_confidence = soft_failed
    rankings = [_run_term(term, candidates, pool, scene, config, trace) for term in program.terms]
    if rankings:
        combined = toolbox.compose(rankings, program.combinator)
        trace.append(combined.provenance)
        if not combined.entries:
            combined = rankings[0]
            low_confidence = True
    else:
        combined = RankedCandidates(tuple((o.id, 0.0) for o in candidates))
    for term in program.negated_terms:
        negated = _run_term(term, candidates, pool, scene, config, trace)
        worst = negated.top1
        if worst is not None and any(oid != worst for oid in combined.ids()):
            combined = combined.without(worst)
    return GroundingResult(
        target_id=combined.top1,
        ranked=combined,
        trace=trace,
        path="deterministic",
        kept_ids=frozenset(kept_ids),
        low_confidence=low_confidence,
    )


# ---------------------------------------------------------------------------
# external-reasoner protocol

@dataclass
class ExternalReasonerConfig:
    """Connection and conversation settings for an LLM backend."""

    base_url: str | None = None
    model: str = "gpt-4o"
    temperature: float = 0.0
    max_rounds: int = 8
    api_key_env: str = "GROUND3D_API_KEY"
    timeout: float = 60.0
    max_concurrency: int = 4
    example_path: str | None = None
    replay_path: str | None = None

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "ExternalReasonerConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})


def prompt_row(obj: SceneObject) -> dict:
    """Serialized per-object prompt line; coordinates discretized to 1 cm."""
    row: dict = {"id": obj.id, "name": obj.label}
    if obj.caption:
        row["caption"] = obj.caption
    row["c_x"] = round(float(obj.center[0]), 2)
    row["c_y"] = round(float(obj.center[1]), 2)
    row["c_z"] = round(float(obj.center[2]), 2)
    row["size"] = round(float(obj.size), 3)
    return row


def _default_example() -> str:
    return resources.files("ground3d.data").joinpath("incontext_example.txt").read_text("utf-8")


def build_prompt(scene: Scene, utterance: str, kept_ids,
                 example: str | None = None) -> str:
    """Assemble the full prompt for the external reasoner (byte-stable)."""
    if not kept_ids:
        raise EmptyCandidatesError("build_prompt needs a non-empty kept set")
    from .registry import describe_tools

    rows = [
        json.dumps(prompt_row(scene.object(i)), separators=(", ", ": "))
        for i in sorted(kept_ids)
    ]
    example_text = example if example is not None else _default_example()
    return (
        "You are grounding a referring expression to a single object id in a 3D scene.\n"
        "Coordinates are meters, +z is up, size is the bounding-box volume.\n"
        "Do not do coordinate math yourself; call the spatial tools instead.\n"
        "Reply with strict JSON only: either\n"
        '{"tool_calls": [{"tool": "<name>", "args": {...}}]} to call tools, or\n'
        '{"answer": <id>} for the final answer. Short reasoning text may precede the JSON.\n'
        "\nTools:\n" + describe_tools() + "\n"
        "\nExample:\n" + example_text.rstrip() + "\n"
        "\nObjects:\n" + "\n".join(rows) + "\n"
        f'\nStatement: "{utterance}"\n'
    )


class ReplayClient:
    """Scripted stand-in for a chat endpoint; replies come from a fixture."""

    def __init__(self, replies: list[str]):
        self._replies = list(replies)
        self.requests: list[list[dict]] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayClient":
        data = json.loads(Path(path).read_text("utf-8"))
        return cls(data["replies"])

    def chat(self, messages: list[dict]) -> str:
        self.requests.append([dict(m) for m in messages])
        if not self._replies:
            raise EndpointError("replay script exhausted")
        return self._replies.pop(0)


class HttpChatClient:
    """Minimal chat-completions client over HTTP."""

    def __init__(self, config: ExternalReasonerConfig):
        if not config.base_url:
            raise ConfigError("external reasoner needs a base_url")
        self.config = config
        self.token = os.environ.get(config.api_key_env, "")

    def chat(self, messages: list[dict]) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        try:
            response = requests.post(
                self.config.base_url.rstrip("/") + "/chat/completions",
                json={
                    "model": self.config.model,
                    "messages": messages,
                    "temperature": self.config.temperature,
                },
                headers=headers,
                timeout=self.config.timeout,
            )
            response.raise_for_status()
            data = response.json()
            return data["choices"][0]["message"]["content"]
        except Exception as exc:
            raise EndpointError(f"chat endpoint failed: {exc}") from exc


def make_client(config: ExternalReasonerConfig):
    if config.replay_path:
        return ReplayClient.from_file(config.replay_path)
    return HttpChatClient(config)


_FENCE = re.compile(r"^```(?:json)?\s*|\s*```$", re.MULTILINE)


def _parse_reply(content: str) -> dict:
    """Extract the strict-JSON payload from a reply."""
    text = _FENCE.sub("", content.strip()).strip()
    start = text.find("{")
    if start < 0:
        raise ValueError("reply contains no JSON object")
    payload = json.loads(text[start:])
    if not isinstance(payload, dict):
        raise ValueError("reply JSON is not an object")
    if "answer" in payload:
        if not isinstance(payload["answer"], int):
            raise ValueError("answer must be an integer id")
        return payload
    if "tool_calls" in payload:
        calls = payload["tool_calls"]
        if not isinstance(calls, list) or not calls:
            raise ValueError("tool_calls must be a non-empty list")
        for call in calls:
            if not isinstance(call, dict) or "tool" not in call or "args" not in call:
                raise ValueError("each tool call needs 'tool' and 'args'")
        return payload
    raise ValueError("reply JSON needs 'answer' or 'tool_calls'")


def run_external(config: ExternalReasonerConfig, scene: Scene, utterance: str,
                 client=None, toolbox_config: ToolboxConfig = DEFAULT_CONFIG) -> GroundingResult:
    """Ground an utterance through the external tool-calling protocol.

    One reprompt is granted after a malformed reply; the conversation
    fails after ``max_rounds`` client calls without a final answer.
    """
    if client is None:
        client = make_client(config)
    mentions = extract_mentions(utterance, scene)
    report = filter_scene(scene, mentions)
    example = None
    if config.example_path:
        example = Path(config.example_path).read_text("utf-8")
    prompt = build_prompt(scene, utterance, report.kept_ids, example)
    messages = [{"role": "user", "content": prompt}]
    trace: list[ToolCall] = []
    reprompted = False
    for _ in range(config.max_rounds):
        content = client.chat(messages)
        messages.append({"role": "assistant", "content": content})
        try:
            payload = _parse_reply(content)
        except (ValueError, json.JSONDecodeError) as exc:
            if reprompted:
                raise MalformedToolCallError(f"malformed reply after reprompt: {exc}") from exc
            reprompted = True
            messages.append(
                {
                    "role": "user",
                    "content": f"Error: {exc}. Reply with strict JSON: "
                    '{"tool_calls": [...]} or {"answer": <id>}.',
                }
            )
            continue
        if "answer" in payload:
            answer = payload["answer"]
            if answer not in scene.by_id:
                raise AnswerIdError(f"answer id {answer} is not in the scene")
            return GroundingResult(
                target_id=answer,
                ranked=RankedCandidates(((answer, 0.0),)),
                trace=trace,
                path="external",
                kept_ids=report.kept_ids,
            )
        results = []
        for call in payload["tool_calls"]:
            try:
                executed = execute_tool(scene, call["tool"], call["args"], toolbox_config)
                trace.append(executed)
                results.append(
                    {
                        "tool": executed.tool,
                        "result_ids": executed.result_ids,
                        "scores": executed.scores,
                    }
                )
            except Exception as exc:
                results.append({"tool": call.get("tool"), "error": str(exc)})
        messages.append({"role": "user", "content": "Tool results:\n" + json.dumps(results)})
    raise RoundLimitError(f"no answer within {config.max_rounds} rounds")
