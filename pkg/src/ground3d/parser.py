"""Template referring-expression grammar and the relation-program IR.

``parse`` covers statements of the shape "the <descriptor> <relation>
<anchor> [when facing the <object>] [NOT <clause>]" with conjunction and
disjunction between relation clauses. Anything outside the grammar raises
:class:`OutOfGrammarError`, which is the router's signal to hand the
utterance to an external reasoner instead.

``format_program`` renders an IR canonically ("chair | closest(door)");
``parse`` accepts that rendering back, so format/parse round-trips.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum

from .errors import OutOfGrammarError
from .lexicon import (
    ARTICLES,
    SIZE_COMPARATIVES,
    is_plural,
    ordinal_value,
    singularize_phrase,
    vocabulary,
)
from .scene import ObjectAttributes


class Relation(str, Enum):
    NEAR = "near"
    CLOSEST = "closest"
    FARTHEST = "farthest"
    ORDINAL_CLOSEST = "ordinal_closest"
    BETWEEN = "between"
    ABOVE = "above"
    BELOW = "below"
    ON_TOP_OF = "on_top_of"
    LEFT_OF = "left_of"
    RIGHT_OF = "right_of"
    IN_FRONT_OF = "in_front_of"
    BEHIND = "behind"


DIRECTIONAL = frozenset(
    {Relation.LEFT_OF, Relation.RIGHT_OF, Relation.IN_FRONT_OF, Relation.BEHIND}
)

_COMPARATIVES = ("largest", "smallest", "larger", "smaller")


@dataclass(frozen=True)
class ObjectDescriptor:
    """A mentioned object: class plus any disambiguating attributes."""

    class_name: str
    attributes: ObjectAttributes = ObjectAttributes()
    size_comparative: str | None = None

    def __post_init__(self):
        if not self.class_name:
            raise ValueError("descriptor needs a class name")
        if self.size_comparative is not None and self.size_comparative not in _COMPARATIVES:
            raise ValueError(f"bad size comparative {self.size_comparative!r}")

    def words(self) -> list[str]:
        out = []
        if self.size_comparative:
            out.append(self.size_comparative)
        for value in (self.attributes.color, self.attributes.material, self.attributes.shape):
            if value:
                out.append(value)
        out.extend(self.attributes.extra)
        out.append(self.class_name)
        return out

    def __str__(self) -> str:
        return " ".join(self.words())


@dataclass(frozen=True)
class RelationTerm:
    """One relation clause: relation, anchor descriptor(s), view anchor.

    ``between`` carries exactly two anchors, directional relations may
    carry zero (the observer viewpoint is the implicit anchor), everything
    else exactly one. ``k`` is set for ordinal_closest only, k >= 2.
    """

    relation: Relation
    anchors: tuple[ObjectDescriptor, ...] = ()
    k: int | None = None
    view_anchor: ObjectDescriptor | None = None

    def __post_init__(self):
        object.__setattr__(self, "anchors", tuple(self.anchors))
        n = len(self.anchors)
        if self.relation is Relation.BETWEEN:
            if n != 2:
                raise ValueError(f"between needs 2 anchors, got {n}")
        elif self.relation in DIRECTIONAL:
            if n > 1:
                raise ValueError(f"{self.relation.value} takes at most 1 anchor, got {n}")
        elif n != 1:
            raise ValueError(f"{self.relation.value} needs exactly 1 anchor, got {n}")
        if self.relation is Relation.ORDINAL_CLOSEST:
            if self.k is None or self.k < 2:
                raise ValueError(f"ordinal_closest needs k >= 2, got {self.k}")
        elif self.k is not None:
            raise ValueError(f"{self.relation.value} does not take k")


@dataclass(frozen=True)
class RelationProgram:
    """Parsed IR: target descriptor, relation terms, set combinator."""

    target: ObjectDescriptor
    terms: tuple[RelationTerm, ...] = ()
    combinator: str = "intersect"
    negated_terms: tuple[RelationTerm, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "negated_terms", tuple(self.negated_terms))
        if self.combinator not in ("intersect", "union"):
            raise ValueError(f"bad combinator {self.combinator!r}")

    @property
    def is_bare(self) -> bool:
        return not self.terms and not self.negated_terms


# ---------------------------------------------------------------------------
# grammar tables

_ANCHORED = True
_UNANCHORED = False

# (token tuple, relation, takes anchor); longest phrases matched first.
_PHRASES: list[tuple[tuple[str, ...], Relation, bool]] = [
    (("farthest", "away", "from"), Relation.FARTHEST, _ANCHORED),
    (("furthest", "away", "from"), Relation.FARTHEST, _ANCHORED),
    (("on", "the", "left", "side", "of"), Relation.LEFT_OF, _ANCHORED),
    (("on", "the", "right", "side", "of"), Relation.RIGHT_OF, _ANCHORED),
    (("to", "the", "left", "of"), Relation.LEFT_OF, _ANCHORED),
    (("to", "the", "right", "of"), Relation.RIGHT_OF, _ANCHORED),
    (("on", "the", "left", "of"), Relation.LEFT_OF, _ANCHORED),
    (("on", "the", "right", "of"), Relation.RIGHT_OF, _ANCHORED),
    (("in", "front", "of"), Relation.IN_FRONT_OF, _ANCHORED),
    (("on", "top", "of"), Relation.ON_TOP_OF, _ANCHORED),
    (("to", "the", "left"), Relation.LEFT_OF, _UNANCHORED),
    (("to", "the", "right"), Relation.RIGHT_OF, _UNANCHORED),
    (("on", "the", "left"), Relation.LEFT_OF, _UNANCHORED),
    (("on", "the", "right"), Relation.RIGHT_OF, _UNANCHORED),
    (("on", "your", "left"), Relation.LEFT_OF, _UNANCHORED),
    (("on", "your", "right"), Relation.RIGHT_OF, _UNANCHORED),
    (("in", "front"), Relation.IN_FRONT_OF, _UNANCHORED),
    (("closest", "to"), Relation.CLOSEST, _ANCHORED),
    (("nearest", "to"), Relation.CLOSEST, _ANCHORED),
    (("farthest", "from"), Relation.FARTHEST, _ANCHORED),
    (("furthest", "from"), Relation.FARTHEST, _ANCHORED),
    (("next", "to"), Relation.NEAR, _ANCHORED),
    (("close", "to"), Relation.NEAR, _ANCHORED),
    (("adjacent", "to"), Relation.NEAR, _ANCHORED),
    (("beside",), Relation.NEAR, _ANCHORED),
    (("near",), Relation.NEAR, _ANCHORED),
    (("by",), Relation.NEAR, _ANCHORED),
    (("between",), Relation.BETWEEN, _ANCHORED),
    (("above",), Relation.ABOVE, _ANCHORED),
    (("over",), Relation.ABOVE, _ANCHORED),
    (("below",), Relation.BELOW, _ANCHORED),
    (("beneath",), Relation.BELOW, _ANCHORED),
    (("underneath",), Relation.BELOW, _ANCHORED),
    (("under",), Relation.BELOW, _ANCHORED),
    (("behind",), Relation.BEHIND, _ANCHORED),
    (("on",), Relation.ON_TOP_OF, _ANCHORED),
    (("from",), Relation.ORDINAL_CLOSEST, _ANCHORED),
]

_FACING = [
    ("if", "you", "are", "facing"),
    ("when", "you", "are", "facing"),
    ("while", "you", "are", "facing"),
    ("when", "facing"),
    ("while", "facing"),
    ("if", "facing"),
    ("facing",),
]

_CONJ = {"and", "or"}
_GLUE = {"that", "is", "which"}
_STOP = ARTICLES | _CONJ | _GLUE | {"not"}

_TOKEN_RE = re.compile(r"[a-z0-9][a-z0-9'-]*")
_MAX_CLASS_WORDS = 4


class _Failure(Exception):
    def __init__(self, index: int, reason: str):
        self.index = index
        self.reason = reason


@dataclass
class _Tokens:
    words: list[str]
    starts: list[int]

    def __len__(self):
        return len(self.words)

    def at(self, i: int) -> str:
        return self.words[i] if i < len(self.words) else ""


def _tokenize(text: str) -> _Tokens:
    words, starts = [], []
    for m in _TOKEN_RE.finditer(text):
        words.append(m.group(0))
        starts.append(m.start())
    return _Tokens(words, starts)


def _match_phrase(toks: _Tokens, i: int):
    for phrase, relation, anchored in _PHRASES:
        if tuple(toks.words[i : i + len(phrase)]) == phrase:
            return phrase, relation, anchored
    return None


def _match_facing(toks: _Tokens, i: int):
    for phrase in _FACING:
        if tuple(toks.words[i : i + len(phrase)]) == phrase:
            return phrase
    return None


def _classify_adjective(word: str, state: dict) -> bool:
    vocab = vocabulary()
    if word in SIZE_COMPARATIVES and state["size"] is None:
        state["size"] = SIZE_COMPARATIVES[word]
        return True
    if word in vocab["colors"] and state["color"] is None:
        state["color"] = word
        return True
    if word in vocab["materials"] and state["material"] is None:
        state["material"] = word
        return True
    if word in vocab["shapes"] and state["shape"] is None:
        state["shape"] = word
        return True
    if word in vocab["modifiers"] or word in vocab["colors"] | vocab["materials"] | vocab["shapes"]:
        if word not in state["extra"]:
            state["extra"].append(word)
        return True
    return False


def _new_state() -> dict:
    return {"color": None, "material": None, "shape": None, "size": None, "extra": []}


def _state_to_descriptor(state: dict, class_name: str) -> ObjectDescriptor:
    return ObjectDescriptor(
        class_name=class_name,
        attributes=ObjectAttributes(
            state["color"], state["material"], state["shape"], tuple(state["extra"])
        ),
        size_comparative=state["size"],
    )


def _parse_descriptor(toks: _Tokens, i: int, allow_ordinal: bool = False):
    """Returns (descriptor, next index, had_article, pending ordinal k, plural)."""
    had_article = False
    if toks.at(i) in ARTICLES:
        had_article = True
        i += 1
    state = _new_state()
    pending_k = None
    while i < len(toks):
        word = toks.at(i)
        if allow_ordinal and pending_k is None:
            k = ordinal_value(word)
            if k is not None:
                pending_k = k
                i += 1
                continue
        if _classify_adjective(word, state):
            i += 1
            continue
        break
    class_words: list[str] = []
    while i < len(toks) and len(class_words) < _MAX_CLASS_WORDS:
        word = toks.at(i)
        if word in _STOP or _match_phrase(toks, i) or _match_facing(toks, i):
            break
        class_words.append(word)
        i += 1
    if not class_words:
        raise _Failure(i, "expected an object class")
    plural = is_plural(class_words[-1])
    return (
        _state_to_descriptor(state, singularize_phrase(" ".join(class_words))),
        i,
        had_article,
        pending_k,
        plural,
    )


def _skip_glue(toks: _Tokens, i: int) -> int:
    while toks.at(i) in _GLUE:
        i += 1
    return i


def _parse_clause(toks: _Tokens, i: int):
    """Parse one clause: descriptor + relation terms + optional facing."""
    target, i, had_article, pending_k, _ = _parse_descriptor(toks, i, allow_ordinal=True)
    terms: list[RelationTerm] = []
    union = False
    view: ObjectDescriptor | None = None
    while i < len(toks):
        i = _skip_glue(toks, i)
        if i >= len(toks):
            break
        word = toks.at(i)
        if word in _CONJ:
            if word == "or":
                union = True
            i = _skip_glue(toks, i + 1)
        facing = _match_facing(toks, i)
        if facing:
            view, i, _, _, _ = _after_facing(toks, i + len(facing))
            continue
        matched = _match_phrase(toks, i)
        if not matched:
            raise _Failure(i, f"expected a relation phrase, got {word!r}")
        phrase, relation, anchored = matched
        i += len(phrase)
        if relation is Relation.ORDINAL_CLOSEST:
            if pending_k is None:
                raise _Failure(i - len(phrase), "'from' without a leading ordinal")
            k, pending_k = pending_k, None
            if k < 1:
                raise _Failure(i - len(phrase), "ordinal must be at least 1")
            anchor, i, _, _, _ = _parse_descriptor(toks, i)
            if k == 1:
                terms.append(RelationTerm(Relation.CLOSEST, (anchor,)))
            else:
                terms.append(RelationTerm(Relation.ORDINAL_CLOSEST, (anchor,), k=k))
            continue
        if relation is Relation.BETWEEN:
            first, i, _, _, plural = _parse_descriptor(toks, i)
            if toks.at(i) == "and":
                second, i2, _, _, _ = _parse_descriptor(toks, i + 1)
                terms.append(RelationTerm(Relation.BETWEEN, (first, second)))
                i = i2
            elif plural:
                terms.append(RelationTerm(Relation.BETWEEN, (first, first)))
            else:
                raise _Failure(i, "between needs two anchors or a plural anchor")
            continue
        if anchored:
            at_end = i >= len(toks) or _match_facing(toks, i) is not None
            if at_end and relation in DIRECTIONAL:
                terms.append(RelationTerm(relation))
                continue
            anchor, i, _, _, _ = _parse_descriptor(toks, i)
            terms.append(RelationTerm(relation, (anchor,)))
        else:
            terms.append(RelationTerm(relation))
    if pending_k is not None:
        raise _Failure(len(toks), "ordinal without a 'from' clause")
    if not terms and not had_article:
        raise _Failure(0, "bare descriptor must start with an article")
    if view is not None:
        if not terms:
            raise _Failure(len(toks), "facing clause without a relation")
        terms = [replace(t, view_anchor=view) for t in terms]
    return target, tuple(terms), "union" if union else "intersect"


def _after_facing(toks: _Tokens, i: int):
    return _parse_descriptor(toks, i)


def parse(utterance: str) -> RelationProgram:
    """Parse an utterance into a RelationProgram or raise OutOfGrammarError."""
    if "|" in utterance:
        return _parse_canonical(utterance)
    text = utterance.lower()
    neg_match = re.search(r"\bnot\b", text)
    main_text = text[: neg_match.start()] if neg_match else text
    toks = _tokenize(main_text)
    if not len(toks):
        raise OutOfGrammarError(utterance, 0, "empty statement")
    try:
        target, terms, combinator = _parse_clause(toks, 0)
    except _Failure as f:
        pos = toks.starts[f.index] if f.index < len(toks) else len(main_text)
        raise OutOfGrammarError(utterance, pos, f.reason) from None
    negated: tuple[RelationTerm, ...] = ()
    if neg_match:
        offset = neg_match.end()
        neg_toks = _tokenize(text[offset:])
        try:
            _, negated, _ = _parse_clause(neg_toks, 0)
        except _Failure as f:
            pos = offset + (neg_toks.starts[f.index] if f.index < len(neg_toks) else 0)
            raise OutOfGrammarError(utterance, pos, f.reason) from None
        if not negated:
            raise OutOfGrammarError(utterance, offset, "negated clause has no relation")
    return RelationProgram(target, terms, combinator, negated)


# ---------------------------------------------------------------------------
# canonical rendering

_CANON_TERM = re.compile(
    r"^(?P<name>[a-z_]+)(?:#(?P<k>\d+))?\((?P<args>[^)]*)\)(?:\s+facing\((?P<view>[^)]+)\))?$"
)


def _descriptor_from_words(text: str) -> ObjectDescriptor:
    words = text.split()
    state = _new_state()
    while words and _classify_adjective(words[0], state):
        words.pop(0)
    if not words:
        raise ValueError(f"no class in descriptor {text!r}")
    return _state_to_descriptor(state, singularize_phrase(" ".join(words)))


def _term_from_canonical(text: str) -> RelationTerm:
    m = _CANON_TERM.match(text.strip())
    if not m:
        raise ValueError(f"bad canonical term {text!r}")
    relation = Relation(m.group("name"))
    args = m.group("args").strip()
    anchors = tuple(_descriptor_from_words(a.strip()) for a in args.split(",")) if args else ()
    view = _descriptor_from_words(m.group("view")) if m.group("view") else None
    k = int(m.group("k")) if m.group("k") else None
    return RelationTerm(relation, anchors, k=k, view_anchor=view)


def _parse_canonical(text: str) -> RelationProgram:
    try:
        desc_part, _, rest = text.partition("|")
        target = _descriptor_from_words(desc_part.strip().lower())
        rest = rest.strip().lower()
        if not rest:
            return RelationProgram(target)
        chunks = re.split(r"(?:^|\s)!\s+", rest)
        positive = chunks[0].strip()
        combinator = "union" if " + " in positive else "intersect"
        separator = " + " if combinator == "union" else " & "
        terms = tuple(_term_from_canonical(t) for t in positive.split(separator)) if positive else ()
        negated = tuple(_term_from_canonical(t) for t in chunks[1:])
        return RelationProgram(target, terms, combinator, negated)
    except (ValueError, KeyError) as exc:
        raise OutOfGrammarError(text, 0, f"bad canonical program: {exc}") from None


def _format_term(term: RelationTerm) -> str:
    name = term.relation.value
    if term.k is not None:
        name += f"#{term.k}"
    body = ", ".join(str(a) for a in term.anchors)
    out = f"{name}({body})"
    if term.view_anchor is not None:
        out += f" facing({term.view_anchor})"
    return out


def format_program(program: RelationProgram) -> str:
    """Canonical one-line rendering; ``parse`` accepts it back."""
    separator = " + " if program.combinator == "union" else " & "
    pieces = []
    if program.terms:
        pieces.append(separator.join(_format_term(t) for t in program.terms))
    pieces.extend(f"! {_format_term(t)}" for t in program.negated_terms)
    return f"{program.target} | " + " ".join(pieces) if pieces else f"{program.target} |"
