import pytest
from hypothesis import given, settings

from kitgi.model import Concept, ConceptSet, KnowledgeBundle, Relation, RelationType
from kitgi.prompting import (
    DEFAULT_TEMPLATE,
    ForeignConceptError,
    MalformedKnowledgeText,
    PromptTemplate,
    UNKNOWN_WEIGHT,
    build_prompt,
    load_template,
    parse_relations,
    render_knowledge,
)

from .strategies import bundled_sets


def one_concept_bundle(surface, rels):
    head = Concept(surface)
    return KnowledgeBundle(
        {
            head: tuple(
                Relation.build(head, RelationType(label), tail, 3.0 - 0.1 * rank, rank)
                for rank, (label, tail) in enumerate(rels)
            )
        }
    )


def shape(bundle):
    return {
        concept.surface: [(r.rank, r.rel_type.label, r.tail) for r in rels]
        for concept, rels in bundle.per_concept.items()
    }


def test_render_single_relation_matches_dataset_shape():
    bundle = one_concept_bundle("look", [("RelatedTo", "see")])
    assert render_knowledge(bundle) == "look relations are: 0. RelatedTo see."


def test_render_two_relations():
    bundle = one_concept_bundle("watch", [("RelatedTo", "time"), ("RelatedTo", "wrist")])
    assert render_knowledge(bundle) == "watch relations are: 0. RelatedTo time. 1. RelatedTo wrist."


def test_render_empty_bundle():
    assert render_knowledge(KnowledgeBundle({})) == ""


def test_render_full_worked_example(lww_bundle):
    text = render_knowledge(lww_bundle)
    assert text.startswith(
        "look relations are: 0. RelatedTo see. 1. RelatedTo glance. 2. RelatedTo eyes. "
        "3. RelatedTo seeing. 4. RelatedTo view. watch relations are:"
    )
    assert text.endswith("3. RelatedTo house. 4. RelatedTo wall.")


def test_parse_single():
    bundle = parse_relations("look relations are: 0. RelatedTo see.")
    assert shape(bundle) == {"look": [(0, "RelatedTo", "see")]}
    assert bundle.relations()[0].weight == UNKNOWN_WEIGHT


def test_parse_rejects_malformed():
    with pytest.raises(MalformedKnowledgeText):
        parse_relations("look relations: bogus")
    with pytest.raises(MalformedKnowledgeText):
        parse_relations("look relations are: 0. not-a-label tail.")
    with pytest.raises(MalformedKnowledgeText):
        parse_relations("stray. look relations are: 0. RelatedTo see.")


def test_unbroken_leading_text_reads_as_multiword_concept():
    # Space-rendered multiword concepts make this the only consistent reading.
    bundle = parse_relations("stray text look relations are: 0. RelatedTo see.")
    assert [c.surface for c in bundle.concepts()] == ["stray_text_look"]


def test_build_prompt_without_knowledge():
    cset = ConceptSet.build(["dog", "pull", "race"])
    assert build_prompt(cset) == "generate a sentence with: dog pull race"


def test_build_prompt_with_knowledge_ends_with_block(lww_set, lww_bundle):
    prompt = build_prompt(lww_set, lww_bundle)
    assert prompt.startswith("generate a sentence with: look watch window look relations are:")
    assert prompt.endswith("4. RelatedTo wall.")


def test_build_prompt_rejects_foreign_concept():
    cset = ConceptSet.build(["a", "b", "c"])
    bundle = one_concept_bundle("d", [("RelatedTo", "x")])
    with pytest.raises(ForeignConceptError):
        build_prompt(cset, bundle)


def test_multiword_terms_render_with_spaces_and_round_trip():
    bundle = one_concept_bundle("wrist_watch", [("RelatedTo", "time_piece")])
    text = render_knowledge(bundle)
    assert text == "wrist watch relations are: 0. RelatedTo time piece."
    assert shape(parse_relations(text)) == {"wrist_watch": [(0, "RelatedTo", "time_piece")]}


def test_header_phrase_inside_tail_is_escaped():
    bundle = one_concept_bundle("look", [("RelatedTo", "odd_relations_are:_tail")])
    text = render_knowledge(bundle)
    assert "relations are\\:" in text
    assert shape(parse_relations(text)) == {"look": [(0, "RelatedTo", "odd_relations_are:_tail")]}


def test_rank_gaps_survive_round_trip():
    head = Concept("look")
    bundle = KnowledgeBundle(
        {
            head: (
                Relation.build(head, RelationType("RelatedTo"), "glance", 3.0, 1),
                Relation.build(head, RelationType("RelatedTo"), "view", 2.0, 4),
            )
        }
    )
    text = render_knowledge(bundle)
    assert text == "look relations are: 1. RelatedTo glance. 4. RelatedTo view."
    assert shape(parse_relations(text)) == {"look": [(1, "RelatedTo", "glance"), (4, "RelatedTo", "view")]}


def test_custom_template_round_trip(tmp_path, lww_bundle):
    path = tmp_path / "template.json"
    path.write_text(
        '{"task_prefix": "concepts:", "concept_join": ", ",'
        ' "knowledge_header": "{concept} has edges:", "relation_line": "{rank}) {rel_type} -> {tail};"}'
    )
    template = load_template(path)
    text = render_knowledge(lww_bundle, template)
    assert text.startswith("look has edges: 0) RelatedTo -> see;")
    assert shape(parse_relations(text, template)) == shape(lww_bundle)


def test_template_validation():
    with pytest.raises(ValueError):
        PromptTemplate(knowledge_header="no placeholder")
    with pytest.raises(ValueError):
        PromptTemplate(relation_line="{rel_type} {tail}.")


@given(bundled_sets())
@settings(max_examples=150)
def test_render_parse_round_trip_property(pair):
    _, bundle = pair
    assert shape(parse_relations(render_knowledge(bundle))) == shape(bundle)


@given(bundled_sets())
@settings(max_examples=100)
def test_prompt_determinism(pair):
    cset, bundle = pair
    assert build_prompt(cset, bundle) == build_prompt(cset, bundle)
