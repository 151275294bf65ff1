"""Word-level resources: attribute vocabularies, class synonyms, ordinals.

The vocabularies ship as JSON data files so the caption extractor and the
statement grammar stay auditable; loading is cached at module level.
"""

from __future__ import annotations

import json
import re
from functools import lru_cache
from importlib import resources

ARTICLES = {"the", "a", "an"}

SIZE_COMPARATIVES = {
    "largest": "largest",
    "biggest": "largest",
    "smallest": "smallest",
    "tiniest": "smallest",
    "larger": "larger",
    "bigger": "larger",
    "smaller": "smaller",
}

_ORDINAL_WORDS = {
    "first": 1, "second": 2, "third": 3, "fourth": 4, "fifth": 5,
    "sixth": 6, "seventh": 7, "eighth": 8, "ninth": 9, "tenth": 10,
    "eleventh": 11, "twelfth": 12,
}

_IRREGULAR_SINGULAR = {
    "shelves": "shelf",
    "bookshelves": "bookshelf",
    "knives": "knife",
    "leaves": "leaf",
    "feet": "foot",
    "children": "child",
    "people": "person",
    "benches": "bench",
    "couches": "couch",
    "boxes": "box",
    "glasses": "glasses",
}


def _load_data(name: str) -> dict:
    text = resources.files("ground3d.data").joinpath(name).read_text("utf-8")
    return json.loads(text)


@lru_cache(maxsize=1)
def vocabulary() -> dict[str, frozenset[str]]:
    """Closed attribute vocabularies: colors, materials, shapes, modifiers."""
    raw = _load_data("vocabulary.json")
    return {key: frozenset(words) for key, words in raw.items()}


@lru_cache(maxsize=1)
def synonym_groups() -> dict[str, int]:
    """Map each known class phrase to a synonym-group id."""
    raw = _load_data("synonyms.json")
    groups: dict[str, int] = {}
    for gid, (canon, alts) in enumerate(sorted(raw.items())):
        for phrase in [canon, *alts]:
            groups[normalize_phrase(phrase)] = gid
    return groups


def normalize_phrase(text: str) -> str:
    """Lowercase and collapse whitespace; strip leading articles."""
    words = text.lower().split()
    while words and words[0] in ARTICLES:
        words = words[1:]
    return " ".join(words)


def singularize(word: str) -> str:
    word = word.lower()
    if word in _IRREGULAR_SINGULAR:
        return _IRREGULAR_SINGULAR[word]
    if len(word) > 3 and word.endswith("ies"):
        return word[:-3] + "y"
    if len(word) > 3 and word.endswith(("ches", "shes", "sses", "xes", "zes")):
        return word[:-2]
    if len(word) > 2 and word.endswith("s") and not word.endswith(("ss", "us", "is")):
        return word[:-1]
    return word


def is_plural(word: str) -> bool:
    return singularize(word) != word.lower()


_IRREGULAR_PLURAL = {v: k for k, v in _IRREGULAR_SINGULAR.items() if v != k}


def pluralize(word: str) -> str:
    word = word.lower()
    if word in _IRREGULAR_PLURAL:
        return _IRREGULAR_PLURAL[word]
    if word.endswith(("ch", "sh", "ss", "x", "z", "s")):
        return word + "es"
    if len(word) > 2 and word.endswith("y") and word[-2] not in "aeiou":
        return word[:-1] + "ies"
    return word + "s"


def singularize_phrase(phrase: str) -> str:
    """Singularize only the head noun of a multi-word class."""
    words = normalize_phrase(phrase).split()
    if not words:
        return ""
    words[-1] = singularize(words[-1])
    return " ".join(words)


def head_noun(phrase: str) -> str:
    words = singularize_phrase(phrase).split()
    return words[-1] if words else ""


def classes_match(a: str, b: str) -> bool:
    """True when two class phrases refer to the same kind of object.

    Matching is exact after singularization, then via the shipped synonym
    table, then by shared head noun (``closet door`` vs ``door``).
    """
    a = singularize_phrase(a)
    b = singularize_phrase(b)
    if not a or not b:
        return False
    if a == b:
        return True
    groups = synonym_groups()
    ga, gb = groups.get(a), groups.get(b)
    if ga is not None and ga == gb:
        return True
    return head_noun(a) == head_noun(b)


def ordinal_value(token: str) -> int | None:
    """Parse 'second' or '2nd' style ordinals; None when not an ordinal."""
    token = token.lower()
    if token in _ORDINAL_WORDS:
        return _ORDINAL_WORDS[token]
    m = re.fullmatch(r"(\d+)(st|nd|rd|th)", token)
    if m:
        return int(m.group(1))
    return None
