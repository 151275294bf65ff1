import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ground3d.errors import OutOfGrammarError
from ground3d.parser import (
    ObjectDescriptor,
    Relation,
    RelationProgram,
    RelationTerm,
    format_program,
    parse,
)
from ground3d.scene import ObjectAttributes


def desc(name, **kwargs):
    return ObjectDescriptor(name, **kwargs)


def test_closest_example():
    program = parse("the chair closest to the closet door")
    assert program.target == desc("chair")
    assert program.terms == (RelationTerm(Relation.CLOSEST, (desc("closet door"),)),)
    assert program.combinator == "intersect"
    assert not program.negated_terms


def test_ordinal_example():
    program = parse("the second chair from the window")
    assert program.target == desc("chair")
    assert program.terms == (RelationTerm(Relation.ORDINAL_CLOSEST, (desc("window"),), k=2),)


def test_negation_example():
    program = parse("the lamp to the left of the desk. NOT the lamp between the beds")
    assert program.target == desc("lamp")
    assert program.terms == (RelationTerm(Relation.LEFT_OF, (desc("desk"),)),)
    assert program.negated_terms == (
        RelationTerm(Relation.BETWEEN, (desc("bed"), desc("bed"))),
    )


def test_view_anchor_example():
    program = parse("the tall recycling bin to the left if you are facing the door")
    assert program.target == desc("recycling bin", attributes=ObjectAttributes(extra=("tall",)))
    (term,) = program.terms
    assert term.relation is Relation.LEFT_OF
    assert term.anchors == ()
    assert term.view_anchor == desc("door")


def test_out_of_grammar_example():
    with pytest.raises(OutOfGrammarError) as excinfo:
        parse("pick up the keys")
    assert excinfo.value.position >= 0


def test_bare_descriptor_is_valid():
    program = parse("the red chair")
    assert program.is_bare
    assert program.target == desc("chair", attributes=ObjectAttributes(color="red"))


def test_size_comparatives():
    assert parse("the largest box").target.size_comparative == "largest"
    assert parse("the smaller blue box").target == desc(
        "box", attributes=ObjectAttributes(color="blue"), size_comparative="smaller"
    )


def test_union_combinator():
    program = parse("the chair near the table or next to the desk")
    assert program.combinator == "union"
    assert [t.relation for t in program.terms] == [Relation.NEAR, Relation.NEAR]


def test_first_reduces_to_closest():
    program = parse("the first chair from the window")
    assert program.terms == (RelationTerm(Relation.CLOSEST, (desc("window"),)),)


def test_canonical_renderings_are_pinned():
    assert format_program(parse("the chair closest to the door")) == "chair | closest(door)"
    assert format_program(parse("the lamp between the beds")) == "lamp | between(bed, bed)"


@pytest.mark.parametrize(
    "phrase,relation",
    [
        ("next to", Relation.NEAR),
        ("close to", Relation.NEAR),
        ("beside", Relation.NEAR),
        ("near", Relation.NEAR),
        ("closest to", Relation.CLOSEST),
        ("nearest to", Relation.CLOSEST),
        ("farthest from", Relation.FARTHEST),
        ("furthest from", Relation.FARTHEST),
        ("above", Relation.ABOVE),
        ("over", Relation.ABOVE),
        ("below", Relation.BELOW),
        ("beneath", Relation.BELOW),
        ("under", Relation.BELOW),
        ("underneath", Relation.BELOW),
        ("on top of", Relation.ON_TOP_OF),
        ("on", Relation.ON_TOP_OF),
        ("to the left of", Relation.LEFT_OF),
        ("to the right of", Relation.RIGHT_OF),
        ("in front of", Relation.IN_FRONT_OF),
        ("behind", Relation.BEHIND),
    ],
)
def test_synonym_table_is_total(phrase, relation):
    program = parse(f"the chair {phrase} the table")
    assert program.terms[0].relation is relation
    assert program.terms[0].anchors == (desc("table"),)


def test_unknown_relation_never_silently_misparses():
    with pytest.raises(OutOfGrammarError):
        parse("the chair inside the box")


def test_between_requires_two_anchors():
    with pytest.raises(OutOfGrammarError):
        parse("the chair between the bed")


def test_plural_between():
    program = parse("the lamp between the shelves")
    assert program.terms[0].anchors == (desc("shelf"), desc("shelf"))


def test_error_position_is_longest_prefix():
    text = "the chair near the table the lamp"
    err = pytest.raises(OutOfGrammarError, parse, text).value
    # everything up to the trailing article parses; the error points there
    assert err.position == text.rindex("the lamp")


def test_term_invariants():
    with pytest.raises(ValueError):
        RelationTerm(Relation.BETWEEN, (desc("bed"),))
    with pytest.raises(ValueError):
        RelationTerm(Relation.ORDINAL_CLOSEST, (desc("window"),), k=1)
    with pytest.raises(ValueError):
        RelationTerm(Relation.CLOSEST, ())
    with pytest.raises(ValueError):
        RelationProgram(desc("chair"), combinator="xor")


# ---------------------------------------------------------------------------
# round-trips and fuzz

_COLORS = ["red", "blue", "green", None]
_CLASSES = ["chair", "table", "closet door", "recycling bin", "lamp", "bed"]


def _random_descriptor(rng):
    color = _COLORS[rng.integers(len(_COLORS))]
    attrs = ObjectAttributes(color=color) if color else ObjectAttributes()
    comparative = [None, "largest", "smallest"][rng.integers(3)]
    return ObjectDescriptor(str(rng.choice(_CLASSES)), attrs, comparative)


def _random_term(rng):
    relation = list(Relation)[rng.integers(len(Relation))]
    if relation is Relation.BETWEEN:
        return RelationTerm(relation, (_random_descriptor(rng), _random_descriptor(rng)))
    if relation is Relation.ORDINAL_CLOSEST:
        return RelationTerm(relation, (_random_descriptor(rng),), k=int(rng.integers(2, 6)))
    from ground3d.parser import DIRECTIONAL

    if relation in DIRECTIONAL and rng.random() < 0.4:
        return RelationTerm(relation, (), view_anchor=_random_descriptor(rng))
    return RelationTerm(relation, (_random_descriptor(rng),))


def test_ir_format_parse_roundtrip():
    rng = np.random.default_rng(0)
    for _ in range(500):
        n_terms = int(rng.integers(0, 3))
        terms = tuple(_random_term(rng) for _ in range(n_terms))
        combinator = "union" if (n_terms > 1 and rng.random() < 0.4) else "intersect"
        negated = tuple(_random_term(rng) for _ in range(rng.integers(0, 2)))
        program = RelationProgram(_random_descriptor(rng), terms, combinator, negated)
        assert parse(format_program(program)) == program


@settings(max_examples=500, deadline=None)
@given(st.text(max_size=120))
def test_parse_never_panics(text):
    try:
        parse(text)
    except OutOfGrammarError:
        pass
