"""Shrink the scene to the objects a query actually mentions.

Mention extraction works on parsed programs (target + anchors) and on raw
utterances (n-gram matching against the scene's labels and the synonym
table), so both the deterministic and the external-reasoner paths get the
same relevance contract. Filtering is recall-oriented: it widens to
substring matching, then to the whole scene, before it would ever drop
the answer.
"""

from __future__ import annotations

from dataclasses import dataclass

from .lexicon import (
    ARTICLES,
    classes_match,
    singularize_phrase,
    synonym_groups,
)
from .parser import ObjectDescriptor, RelationProgram, _classify_adjective, _new_state, _state_to_descriptor, _tokenize
from .scene import Scene


@dataclass(frozen=True)
class FilterReport:
    mentioned: tuple[ObjectDescriptor, ...]
    kept_ids: frozenset[int]
    dropped_count: int


def _program_mentions(program: RelationProgram) -> list[ObjectDescriptor]:
    out = [program.target]
    for term in (*program.terms, *program.negated_terms):
        out.extend(term.anchors)
        if term.view_anchor is not None:
            out.append(term.view_anchor)
    seen: set[str] = set()
    unique = []
    for desc in out:
        key = str(desc)
        if key not in seen:
            seen.add(key)
            unique.append(desc)
    return unique


def _known_phrases(scene: Scene | None) -> list[tuple[str, ...]]:
    phrases = {singularize_phrase(p) for p in synonym_groups()}
    if scene is not None:
        phrases |= {singularize_phrase(o.label) for o in scene.objects}
    return sorted((tuple(p.split()) for p in phrases if p), key=len, reverse=True)


def _utterance_mentions(utterance: str, scene: Scene | None) -> list[ObjectDescriptor]:
    toks = _tokenize(utterance.lower())
    phrases = _known_phrases(scene)
    out: list[ObjectDescriptor] = []
    state = _new_state()
    i = 0
    while i < len(toks):
        word = toks.at(i)
        if word in ARTICLES:
            state = _new_state()
            i += 1
            continue
        if _classify_adjective(word, state):
            i += 1
            continue
        matched = None
        for phrase in phrases:
            window = toks.words[i : i + len(phrase)]
            if len(window) == len(phrase) and tuple(singularize_phrase(" ".join(window)).split()) == phrase:
                matched = phrase
                break
        if matched:
            out.append(_state_to_descriptor(state, " ".join(matched)))
            i += len(matched)
        else:
            i += 1
        state = _new_state()
    seen: set[str] = set()
    unique = []
    for desc in out:
        key = str(desc)
        if key not in seen:
            seen.add(key)
            unique.append(desc)
    return unique


def extract_mentions(source: RelationProgram | str, scene: Scene | None = None) -> list[ObjectDescriptor]:
    """List the object classes (with attributes) a query refers to."""
    if isinstance(source, RelationProgram):
        return _program_mentions(source)
    return _utterance_mentions(source, scene)


def filter_scene(scene: Scene, mentions: list[ObjectDescriptor]) -> FilterReport:
    """Keep objects whose label matches any mention.

    Per-mention fallbacks: synonym/head-noun matching first, substring
    matching second; a mention that still matches nothing keeps the whole
    scene so the answer can never be filtered away.
    """
    total = len(scene.objects)
    if not mentions:
        return FilterReport((), frozenset(scene.ids()), 0)
    kept: set[int] = set()
    for mention in mentions:
        name = mention.class_name
        matches = {o.id for o in scene.objects if classes_match(o.label, name)}
        if not matches:
            matches = {
                o.id
                for o in scene.objects
                if name in singularize_phrase(o.label) or singularize_phrase(o.label) in name
            }
        if not matches:
            return FilterReport(tuple(mentions), frozenset(scene.ids()), 0)
        kept |= matches
    return FilterReport(tuple(mentions), frozenset(kept), total - len(kept))
