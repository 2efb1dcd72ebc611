import json

import pytest

from numina.errors import (
    AmbiguousBinding,
    CountOutOfRange,
    NoCountableNoun,
    PromptError,
)
from numina.prompt import (
    bind_to_tokens,
    load_lexicon,
    parse_count_spec,
    singularize,
)


def entries(prompt, **kw):
    return [(e.noun, e.count) for e in parse_count_spec(prompt, **kw).entries]


def test_word_numerals_bind_nouns():
    assert entries("three cats and two dogs playing") == [("cat", 3), ("dog", 2)]


def test_indefinite_article():
    assert entries("a dog runs") == [("dog", 1)]
    assert entries("an apple on the table") == [("apple", 1)]


def test_digits():
    assert entries("5 birds flying over 3 cars") == [("bird", 5), ("car", 3)]


def test_all_counts_one_to_eight_expressible():
    words = ["one", "two", "three", "four", "five", "six", "seven", "eight"]
    for k, word in enumerate(words, start=1):
        assert entries(f"{word} cats sleeping") == [("cat", k)]
        assert entries(f"{k} cats sleeping") == [("cat", k)]


def test_count_above_max_rejected():
    with pytest.raises(CountOutOfRange):
        parse_count_spec("12 cats sleeping")
    with pytest.raises(CountOutOfRange):
        parse_count_spec("nine cats", lexicon={"nine": 9})


def test_no_countable_noun():
    with pytest.raises(NoCountableNoun):
        parse_count_spec("the weather is nice")
    with pytest.raises(NoCountableNoun):
        parse_count_spec("   ")


def test_ambiguous_binding():
    with pytest.raises(AmbiguousBinding):
        parse_count_spec("cats seven")


def test_duplicate_noun_rejected():
    with pytest.raises(PromptError):
        parse_count_spec("two cats and three cats")


def test_case_insensitive_and_deterministic():
    a = entries("Three CATS and Two dogs")
    b = entries("three cats and two dogs")
    assert a == b == [("cat", 3), ("dog", 2)]


def test_plural_singular_canonicalization():
    assert singularize("cats") == "cat"
    assert singularize("boxes") == "box"
    assert singularize("puppies") == "puppy"
    assert singularize("grass") == "grass"
    # same canonical noun from either surface form
    assert entries("three cats playing")[0][0] == "cat"


def test_binding_window():
    # plural surface forms beat nearer adjectives; stop words never bind
    assert entries("three small cats") == [("cat", 3)]
    assert entries("three of the cats") == [("cat", 3)]
    # nothing bindable inside the three-token window
    with pytest.raises(AmbiguousBinding):
        parse_count_spec("three and of the cats")


def test_countbench_template_shape():
    # "N <noun-plural> <verb-phrase>" yields exactly one entry per numeral
    for prompt in ["four dogs chase a ball", "seven lamps glowing dimly"]:
        spec = parse_count_spec(prompt)
        numerals = [e for e in spec.entries if e.count > 1]
        assert len(numerals) == 1


def test_token_index_points_at_noun():
    spec = parse_count_spec("three cats and two dogs playing")
    assert spec.entries[0].token_index == 1
    assert spec.entries[1].token_index == 4


def test_custom_lexicon(tmp_path):
    path = tmp_path / "lex.json"
    path.write_text(json.dumps({"trio": 3}))
    lex = load_lexicon(path)
    assert entries("a trio of cats", lexicon=lex) == [("cat", 3)]


def test_bind_to_tokens_subwords():
    spec = parse_count_spec("three cats and two dogs")
    bound = bind_to_tokens(spec, ["<s>", "three", "cat", "s", "and", "two", "dog", "s"])
    assert bound.entries[0].token_index == 2
    assert bound.entries[1].token_index == 6


def test_bind_to_tokens_missing():
    spec = parse_count_spec("three cats")
    with pytest.raises(PromptError):
        bind_to_tokens(spec, ["<s>", "three", "dogs"])
