"""Statement records, JSONL IO and the benchmark statement generator.

The generator constructs a relation program against a scene, renders it
as an English utterance, then verifies end-to-end that the utterance
parses back to the same program and that the deterministic reasoner
resolves it to a unique answer with at least the configured score margin.
Only statements passing that check are emitted, so the recorded target id
is ground truth by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import toolbox
from .errors import (
    GroundingError,
    InfeasibleMixError,
    NoUnambiguousStatementError,
)
from .generator import SceneAnnotations
from .lexicon import pluralize
from .parser import (
    DIRECTIONAL,
    ObjectDescriptor,
    Relation,
    RelationProgram,
    RelationTerm,
    parse,
)
from .reasoner import resolve
from .scene import ObjectAttributes, Scene
from .toolbox import DEFAULT_CONFIG, ToolboxConfig

EASY, HARD = "easy", "hard"
VIEW_DEP, VIEW_IND = "view_dep", "view_ind"


@dataclass(frozen=True)
class Statement:
    scene_id: str
    utterance: str
    target_id: int
    tags: tuple[str, ...]
    skip: bool = False

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "utterance": self.utterance,
            "target_id": self.target_id,
            "tags": list(self.tags),
            "skip": self.skip,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Statement":
        return cls(
            scene_id=str(data["scene_id"]),
            utterance=str(data["utterance"]),
            target_id=int(data["target_id"]),
            tags=tuple(data.get("tags", ())),
            skip=bool(data.get("skip", False)),
        )


def write_statements(statements, path: str | Path) -> None:
    lines = [json.dumps(s.to_dict(), sort_keys=True) for s in statements]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), "utf-8")


def read_statements(path: str | Path) -> tuple[list[Statement], list[tuple[int, str]]]:
    """Parse a JSONL statement file; malformed lines are collected, not fatal."""
    statements: list[Statement] = []
    errors: list[tuple[int, str]] = []
    text = Path(path).read_text("utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            statements.append(Statement.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            errors.append((lineno, f"{type(exc).__name__}: {exc}"))
    return statements, errors


# ---------------------------------------------------------------------------
# statement generation

@dataclass(frozen=True)
class StatementConfig:
    ambiguity_margin: float = 0.3
    relations: tuple[Relation, ...] = tuple(Relation)
    view_dep_share: float = 0.25
    hard_share: float = 0.4
    attribute_share: float = 0.2
    skip_fraction: float = 0.0
    max_attempts: int = 80


_ORDINAL_WORD = {2: "second", 3: "third", 4: "fourth", 5: "fifth"}

_TEMPLATES: dict[Relation, tuple[str, ...]] = {
    Relation.NEAR: ("the {t} near the {a}", "the {t} next to the {a}", "the {t} close to the {a}"),
    Relation.CLOSEST: ("the {t} closest to the {a}", "the {t} nearest to the {a}"),
    Relation.FARTHEST: ("the {t} farthest from the {a}", "the {t} furthest from the {a}"),
    Relation.ABOVE: ("the {t} above the {a}", "the {t} over the {a}"),
    Relation.BELOW: ("the {t} below the {a}", "the {t} under the {a}", "the {t} beneath the {a}"),
    Relation.ON_TOP_OF: ("the {t} on top of the {a}", "the {t} on the {a}"),
}

_DIR_WORD = {
    Relation.LEFT_OF: "left",
    Relation.RIGHT_OF: "right",
}


def _descriptor_text(desc: ObjectDescriptor) -> str:
    return " ".join(desc.words())


def _render(rng, program: RelationProgram) -> str:
    term = program.terms[0]
    t = _descriptor_text(program.target)
    relation = term.relation
    if relation is Relation.ORDINAL_CLOSEST:
        return f"the {_ORDINAL_WORD[term.k]} {t} from the {_descriptor_text(term.anchors[0])}"
    if relation is Relation.BETWEEN:
        a, b = term.anchors
        if a == b:
            words = a.class_name.split()
            words[-1] = pluralize(words[-1])
            return f"the {t} between the {' '.join(words)}"
        return f"the {t} between the {_descriptor_text(a)} and the {_descriptor_text(b)}"
    if relation in DIRECTIONAL:
        view = term.view_anchor
        if relation in _DIR_WORD:
            side = _DIR_WORD[relation]
            if term.anchors:
                body = f"the {t} to the {side} of the {_descriptor_text(term.anchors[0])}"
            else:
                body = rng.choice(
                    [f"the {t} on the {side}", f"the {t} to the {side}"]
                )
        else:
            phrase = "in front of" if relation is Relation.IN_FRONT_OF else "behind"
            body = f"the {t} {phrase} the {_descriptor_text(term.anchors[0])}"
        if view is not None:
            tail = rng.choice(
                [
                    f"if you are facing the {_descriptor_text(view)}",
                    f"when facing the {_descriptor_text(view)}",
                ]
            )
            return f"{body} {tail}"
        return body
    template = rng.choice(_TEMPLATES[relation])
    return template.format(t=t, a=_descriptor_text(term.anchors[0]))


def _class_groups(scene: Scene) -> dict[str, list[int]]:
    groups: dict[str, list[int]] = {}
    for obj in scene.objects:
        groups.setdefault(obj.label, []).append(obj.id)
    return groups


def _unique_anchor_classes(groups: dict[str, list[int]], exclude: str) -> list[str]:
    return sorted(label for label, ids in groups.items() if label != exclude and len(ids) == 1)


def _distance_gaps_ok(scene: Scene, candidate_ids, anchor_id, k, margin, config) -> bool:
    """Ordinal statements need margin-wide gaps around the k-th distance."""
    objs = [scene.object(i) for i in candidate_ids]
    anchor = scene.object(anchor_id)
    ranking = toolbox.rank_closest(objs, [anchor], scene, config)
    d = sorted(-s for s in ranking.scores())
    if k >= 2 and d[k - 1] - d[k - 2] < margin:
        return False
    if k < len(d) and d[k] - d[k - 1] < margin:
        return False
    return True


def _target_descriptor(rng, scene, ann, groups, label, cfg) -> ObjectDescriptor:
    """Plain class descriptor, or color-qualified when requested and useful."""
    if rng.random() < cfg.attribute_share and len(groups[label]) >= 2:
        colors = [ann.objects[i].attributes.color for i in groups[label]]
        unique = sorted(c for c in set(colors) if c is not None and colors.count(c) == 1)
        if unique:
            color = unique[int(rng.integers(len(unique)))]
            return ObjectDescriptor(label, ObjectAttributes(color=color))
    return ObjectDescriptor(label)


def _attempt(rng, scene: Scene, ann: SceneAnnotations, cfg: StatementConfig,
             tcfg: ToolboxConfig, relation: Relation,
             want_hard: bool | None) -> Statement | None:
    groups = _class_groups(scene)
    labels = sorted(groups)
    if want_hard is True:
        labels = [l for l in labels if len(groups[l]) >= 3]
    elif want_hard is False:
        labels = [l for l in labels if len(groups[l]) <= 2]
    if not labels:
        return None
    label = labels[int(rng.integers(len(labels)))]
    anchor_classes = _unique_anchor_classes(groups, label)
    if not anchor_classes:
        return None

    target_desc = _target_descriptor(rng, scene, ann, groups, label, cfg)

    def pick_anchor() -> ObjectDescriptor:
        return ObjectDescriptor(anchor_classes[int(rng.integers(len(anchor_classes)))])

    if relation is Relation.BETWEEN:
        pair_classes = sorted(
            l for l, ids in groups.items() if l != label and len(ids) == 2
        )
        if pair_classes and rng.random() < 0.5:
            a = ObjectDescriptor(pair_classes[int(rng.integers(len(pair_classes)))])
            term = RelationTerm(relation, (a, a))
        else:
            if len(anchor_classes) < 2:
                return None
            i, j = rng.choice(len(anchor_classes), size=2, replace=False)
            term = RelationTerm(
                relation,
                (ObjectDescriptor(anchor_classes[i]), ObjectDescriptor(anchor_classes[j])),
            )
    elif relation is Relation.ORDINAL_CLOSEST:
        n = len(groups[label])
        if n < 2 or target_desc.attributes.color is not None:
            return None
        k = int(rng.integers(2, min(n, 5) + 1))
        term = RelationTerm(relation, (pick_anchor(),), k=k)
    elif relation in DIRECTIONAL:
        style = rng.random()
        if style < 0.4 and relation in _DIR_WORD:
            term = RelationTerm(relation, (), view_anchor=pick_anchor())
        elif style < 0.7:
            anchor = pick_anchor()
            others = [c for c in anchor_classes if c != anchor.class_name]
            if not others:
                return None
            view = ObjectDescriptor(others[int(rng.integers(len(others)))])
            term = RelationTerm(relation, (anchor,), view_anchor=view)
        else:
            term = RelationTerm(relation, (pick_anchor(),))
    else:
        term = RelationTerm(relation, (pick_anchor(),))

    program = RelationProgram(target_desc, (term,))
    utterance = _render(rng, program)
    try:
        reparsed = parse(utterance)
        if reparsed != program:
            return None
        result = resolve(program, scene, tcfg)
    except GroundingError:
        return None
    if result.target_id is None or result.low_confidence:
        return None

    if relation is Relation.ORDINAL_CLOSEST:
        candidate_ids = result.ranked.ids()
        anchor_obj = next(
            o for o in scene.objects
            if o.label == term.anchors[0].class_name and o.id not in candidate_ids
        )
        if not _distance_gaps_ok(
            scene, candidate_ids, anchor_obj.id, term.k, cfg.ambiguity_margin, tcfg
        ):
            return None
    elif result.ranked.margin() < cfg.ambiguity_margin:
        return None

    target = scene.object(result.target_id)
    distractors = len(groups[target.label]) - 1
    if want_hard is True and distractors <= 1:
        return None
    if want_hard is False and distractors > 1:
        return None
    tags = (
        HARD if distractors > 1 else EASY,
        VIEW_DEP if relation in DIRECTIONAL else VIEW_IND,
    )
    return Statement(scene.scene_id, utterance, result.target_id, tags)


def generate_statement(scene: Scene, ground_truth: SceneAnnotations, rng_seed: int,
                       config: StatementConfig = StatementConfig(),
                       toolbox_config: ToolboxConfig = DEFAULT_CONFIG,
                       want_view_dep: bool | None = None,
                       want_hard: bool | None = None) -> tuple[str, int, set[str]]:
    """Emit one verified statement; raises after the bounded search fails."""
    rng = np.random.default_rng(rng_seed)
    statement = _search(rng, scene, ground_truth, config, toolbox_config, want_view_dep, want_hard)
    if statement is None:
        raise NoUnambiguousStatementError(
            f"no unambiguous statement found for scene {scene.scene_id}"
        )
    return statement.utterance, statement.target_id, set(statement.tags)


def _search(rng, scene, ann, cfg: StatementConfig, tcfg: ToolboxConfig,
            want_view_dep: bool | None, want_hard: bool | None,
            relation: Relation | None = None) -> Statement | None:
    pool = [
        r
        for r in cfg.relations
        if want_view_dep is None or (r in DIRECTIONAL) == want_view_dep
    ]
    if not pool:
        raise InfeasibleMixError("no enabled relation matches the requested view split")
    for attempt in range(cfg.max_attempts):
        r = relation if relation is not None and attempt < cfg.max_attempts // 2 else None
        if r is None or (want_view_dep is not None and (r in DIRECTIONAL) != want_view_dep):
            r = pool[int(rng.integers(len(pool)))]
        statement = _attempt(rng, scene, ann, cfg, tcfg, r, want_hard)
        if statement is not None:
            return statement
    return None


# ---------------------------------------------------------------------------
# suites

def build_statement_suite(scenes: list[tuple[Scene, SceneAnnotations]], n_statements: int,
                          seed: int, config: StatementConfig = StatementConfig(),
                          toolbox_config: ToolboxConfig = DEFAULT_CONFIG) -> list[Statement]:
    """Stratified statement sampling matching the requested split mix.

    View-dependent and hard quotas are drawn up front from the configured
    shares; relations cycle so the suite covers every enabled relation.
    """
    if config.view_dep_share > 0 and not any(r in DIRECTIONAL for r in config.relations):
        raise InfeasibleMixError("view_dep share requested but no directional relation enabled")
    rng = np.random.default_rng(seed)
    n_vd = round(n_statements * config.view_dep_share)
    n_hard = round(n_statements * config.hard_share)
    wants = [(i < n_vd, i < n_hard) for i in range(n_statements)]
    rng.shuffle(wants)
    relations = [r for r in config.relations]
    out: list[Statement] = []
    scene_order = rng.permutation(len(scenes))
    cursor = 0
    for i, (want_vd, want_hard) in enumerate(wants):
        preferred = relations[i % len(relations)]
        if want_vd != (preferred in DIRECTIONAL):
            preferred = None
        statement = None
        for _ in range(len(scenes)):
            scene, ann = scenes[scene_order[cursor % len(scenes)]]
            cursor += 1
            statement = _search(rng, scene, ann, config, toolbox_config, want_vd, want_hard, preferred)
            if statement is not None:
                break
        if statement is None:
            # soften the hardness requirement rather than fail the suite
            for _ in range(len(scenes)):
                scene, ann = scenes[scene_order[cursor % len(scenes)]]
                cursor += 1
                statement = _search(rng, scene, ann, config, toolbox_config, want_vd, None)
                if statement is not None:
                    break
        if statement is None:
            raise NoUnambiguousStatementError(
                f"could not fill the requested mix (statement {i + 1}/{n_statements})"
            )
        if config.skip_fraction > 0 and rng.random() < config.skip_fraction:
            statement = Statement(
                statement.scene_id, statement.utterance, statement.target_id,
                statement.tags, skip=True,
            )
        out.append(statement)
    return out


def build_ablation_suite(scenes: list[tuple[Scene, SceneAnnotations]], n_statements: int,
                         seed: int, hard_share: float = 0.7,
                         toolbox_config: ToolboxConfig = DEFAULT_CONFIG) -> list[Statement]:
    """Attribute-disambiguation suite for the captions on/off experiment.

    Hard statements are bare color descriptors ("the red chair") whose
    color uniquely identifies the target among >= 2 same-class
    distractors, so stripping captions makes them unresolvable; easy
    statements name a singleton class and survive either way.
    """
    rng = np.random.default_rng(seed)
    n_hard = round(n_statements * hard_share)
    out: list[Statement] = []
    attempts = 0
    while len(out) < n_statements:
        attempts += 1
        if attempts > 200 * n_statements:
            raise NoUnambiguousStatementError("ablation suite generation stalled")
        scene, ann = scenes[int(rng.integers(len(scenes)))]
        groups = _class_groups(scene)
        if len(out) < n_hard:
            candidates = []
            for label, ids in groups.items():
                if len(ids) < 3:
                    continue
                colors = [ann.objects[i].attributes.color for i in ids]
                for oid, color in zip(ids, colors):
                    if color is not None and colors.count(color) == 1:
                        candidates.append((label, color, oid))
            if not candidates:
                continue
            label, color, oid = candidates[int(rng.integers(len(candidates)))]
            program = RelationProgram(ObjectDescriptor(label, ObjectAttributes(color=color)))
            utterance = f"the {color} {label}"
            tags = (HARD, VIEW_IND)
        else:
            singles = sorted(l for l, ids in groups.items() if len(ids) == 1)
            if not singles:
                continue
            label = singles[int(rng.integers(len(singles)))]
            oid = groups[label][0]
            program = RelationProgram(ObjectDescriptor(label))
            utterance = f"the {label}"
            tags = (EASY, VIEW_IND)
        try:
            if parse(utterance) != program:
                continue
            result = resolve(program, scene, toolbox_config)
        except GroundingError:
            continue
        if result.target_id != oid or len(result.ranked.entries) != 1:
            continue
        out.append(Statement(scene.scene_id, utterance, oid, tags))
    return out
