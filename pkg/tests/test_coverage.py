from hypothesis import given, settings
from hypothesis import strategies as st

from kitgi.coverage import check_coverage, format_rule_table, stem, tokenize
from kitgi.model import ConceptSet

WORDS = st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=12)

# One golden case per rule-table row, plus the trickier interior cases.
RULE_GOLDENS = [
    ("parties", "party"),
    ("agreed", "agree"),
    ("races", "race"),
    ("boxes", "box"),
    ("houses", "house"),
    ("watches", "watch"),
    ("dishes", "dish"),
    ("glasses", "glass"),
    ("dogs", "dog"),
    ("eyes", "eye"),
    ("trees", "tree"),
    ("running", "run"),
    ("racing", "race"),
    ("looking", "look"),
    ("pulling", "pull"),
    ("seeing", "see"),
    ("hoping", "hope"),
    ("playing", "play"),
    ("speeding", "speed"),
    ("stopped", "stop"),
    ("raced", "race"),
    ("jumped", "jump"),
    ("snowed", "snow"),
    ("day", "day"),
    ("cries", "cry"),
    ("carries", "carry"),
    ("sitting", "sit"),
    ("flies", "fly"),
]


def test_stem_goldens():
    for word, expected in RULE_GOLDENS:
        assert stem(word) == expected, f"stem({word!r}) = {stem(word)!r}, expected {expected!r}"


@given(WORDS)
@settings(max_examples=300)
def test_stem_idempotent(word):
    assert stem(stem(word)) == stem(word)


def test_tokenize_splits_on_non_letters():
    assert tokenize("A snow-covered hill, isn't it?") == [
        "a", "snow", "covered", "hill", "isn", "t", "it",
    ]


def _cover(sentence, *concepts):
    return check_coverage(sentence, ConceptSet.build(list(concepts)))


def test_benchmark_pair_dog_pull_race():
    result = _cover("A dog is racing against another dog in a race.", "dog", "pull", "race")
    assert [c.surface for c in result.missing] == ["pull"]
    assert result.bit == 0


def test_benchmark_pair_look_watch_window():
    result = _cover("A man is looking at a window.", "look", "watch", "window")
    assert [c.surface for c in result.missing] == ["watch"]
    assert result.bit == 0
    assert result.matches[[c for c in result.covered if c.surface == "look"][0]] == "looking"


def test_benchmark_pair_boat_sail_day():
    result = _cover("Boats sail on a sunny day.", "boat", "sail", "day")
    assert result.missing == []
    assert result.bit == 1
    assert result.matches[result.covered[0]] == "boats"


def test_covered_and_missing_partition_the_set():
    result = _cover("the dog barks", "dog", "pull", "race")
    surfaces = {c.surface for c in result.covered} | {c.surface for c in result.missing}
    assert surfaces == {"dog", "pull", "race"}
    assert not ({c.surface for c in result.covered} & {c.surface for c in result.missing})


def test_multiword_requires_adjacent_in_order():
    hit = check_coverage(
        "a wrist watch gleams", ConceptSet.build(["wrist_watch", "dog", "race"])
    )
    assert hit.matches[hit.covered[0]] == "wrist watch"
    miss = check_coverage(
        "the watch on his wrist", ConceptSet.build(["wrist_watch", "dog", "race"])
    )
    assert [c.surface for c in miss.missing] == ["wrist_watch", "dog", "race"]


def test_exact_token_always_counts():
    result = _cover("the bus stops here", "bus", "dog", "race")
    assert "bus" in {c.surface for c in result.covered}


@given(
    st.lists(WORDS, min_size=3, max_size=5, unique=True),
    st.lists(WORDS, min_size=0, max_size=6),
    st.lists(WORDS, min_size=0, max_size=4),
)
@settings(max_examples=200)
def test_appending_tokens_never_uncovers(concepts, base_tokens, extra_tokens):
    cset = ConceptSet.build(concepts)
    before = check_coverage(" ".join(["it"] + base_tokens), cset)
    after = check_coverage(" ".join(["it"] + base_tokens + extra_tokens), cset)
    covered_before = {c.surface for c in before.covered}
    covered_after = {c.surface for c in after.covered}
    assert covered_before <= covered_after


@given(st.lists(WORDS, min_size=3, max_size=5, unique=True), st.lists(WORDS, min_size=1, max_size=8))
@settings(max_examples=200)
def test_reported_matches_are_sound(concepts, tokens):
    cset = ConceptSet.build(concepts)
    result = check_coverage(" ".join(tokens), cset)
    for concept, token in result.matches.items():
        if "_" not in concept.surface:
            assert token == concept.surface or stem(token) == stem(concept.surface)


def test_rule_table_prints():
    table = format_rule_table()
    assert "ies->y" in table and "example" in table
