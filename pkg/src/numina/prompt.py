"""Numeral-count extraction from text prompts.

Parsing is rule-based and deterministic: a numeral lexicon maps count words,
digits, and the indefinite articles to integers; each numeral binds to the
nearest following noun-like token within a three-token window.  Plural and
singular surface forms collapse to one canonical noun.
"""

import json
import re
from dataclasses import dataclass

from .errors import (
    AmbiguousBinding,
    CountOutOfRange,
    NoCountableNoun,
    PromptError,
)

DEFAULT_LEXICON = {
    "a": 1, "an": 1,
    "one": 1, "two": 2, "three": 3, "four": 4,
    "five": 5, "six": 6, "seven": 7, "eight": 8,
    "1": 1, "2": 2, "3": 3, "4": 4, "5": 5, "6": 6, "7": 7, "8": 8,
}

_ARTICLES = frozenset({"a", "an"})

# tokens never treated as noun heads
_STOP_WORDS = frozenset({
    "the", "of", "and", "or", "with", "in", "on", "at", "by", "to", "for",
    "is", "are", "was", "were", "some", "few", "several", "many",
    "other", "more", "another",
})

_TOKEN_RE = re.compile(r"[a-z0-9]+")

DEFAULT_MAX_COUNT = 8
_BIND_WINDOW = 3


@dataclass(frozen=True)
class CountEntry:
    noun: str            # canonical (singular) form
    token_index: int     # position of the noun in the tokenized prompt
    count: int


@dataclass
class CountSpec:
    entries: list

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def targets(self) -> dict:
        return {e.noun: e.count for e in self.entries}


def load_lexicon(path) -> dict:
    """User lexicons are JSON word -> integer maps layered over the default."""
    with open(path) as fh:
        user = json.load(fh)
    merged = dict(DEFAULT_LEXICON)
    merged.update({str(k).lower(): int(v) for k, v in user.items()})
    return merged


def singularize(word: str) -> str:
    """Cheap plural folding; enough for benchmark-style prompts."""
    if len(word) > 4 and word.endswith("ies"):
        return word[:-3] + "y"
    if len(word) > 3 and word.endswith("es") and word[-3] in "sxz":
        return word[:-2]
    if len(word) > 4 and (word.endswith("ches") or word.endswith("shes")):
        return word[:-2]
    if len(word) > 2 and word.endswith("s") and not word.endswith("ss"):
        return word[:-1]
    return word


def tokenize(prompt: str) -> list:
    return _TOKEN_RE.findall(prompt.lower())


def _numeral_value(token: str, lexicon: dict):
    if token in lexicon:
        return int(lexicon[token])
    if token.isdigit():
        return int(token)
    return None


def _is_noun_candidate(token: str, lexicon: dict) -> bool:
    return (
        token.isalpha()
        and token not in lexicon
        and token not in _STOP_WORDS
        and not token.isdigit()
    )


def parse_count_spec(prompt: str, lexicon: dict = None,
                     max_count: int = DEFAULT_MAX_COUNT) -> CountSpec:
    """Extract (noun, count) constraints from a prompt.

    Every numeral word or digit binds to the nearest following noun candidate
    within a three-token window; bare articles produce count 1.  Counts above
    ``max_count`` are rejected (never clamped).  Raises NoCountableNoun when
    nothing is found and AmbiguousBinding when a true numeral cannot bind.
    """
    if not prompt or not prompt.strip():
        raise NoCountableNoun("empty prompt")
    lex = dict(DEFAULT_LEXICON) if lexicon is None else dict(lexicon)
    tokens = tokenize(prompt)
    entries = []
    seen = {}
    for i, tok in enumerate(tokens):
        value = _numeral_value(tok, lex)
        if value is None:
            continue
        if not 1 <= value <= max_count:
            raise CountOutOfRange(
                f"count {value} for numeral {tok!r} outside 1..{max_count}")
        # articles only ever bind the very next token; real numerals search
        # the full window
        span = 1 if tok in _ARTICLES else _BIND_WINDOW
        window = [
            j for j in range(i + 1, min(i + 1 + span, len(tokens)))
            if _is_noun_candidate(tokens[j], lex)
        ]
        noun_idx = None
        if window:
            if value >= 2:
                # plural-looking surface forms beat nearer adjectives
                plural = [j for j in window if tokens[j] != singularize(tokens[j])]
                noun_idx = plural[0] if plural else window[0]
            else:
                noun_idx = window[0]
        if noun_idx is None:
            if tok in _ARTICLES:
                continue
            raise AmbiguousBinding(f"numeral {tok!r} has no noun within "
                                   f"{_BIND_WINDOW} tokens")
        noun = singularize(tokens[noun_idx])
        if noun in seen:
            raise PromptError(f"noun {noun!r} is counted twice in the prompt")
        seen[noun] = value
        entries.append(CountEntry(noun=noun, token_index=noun_idx, count=value))
    if not entries:
        raise NoCountableNoun(f"no countable noun in {prompt!r}")
    return CountSpec(entries=entries)


def _normalize_model_token(token: str) -> str:
    # strip common subword markers before matching
    return re.sub(r"[^a-z0-9]", "", token.lower().lstrip("▁Ġ#"))


def bind_to_tokens(spec: CountSpec, tokens: list) -> CountSpec:
    """Rebase each entry's token index onto a model tokenizer's token list.

    A noun matches the first token whose normalized form equals the noun, its
    plural surface, or a leading subword of at least three characters.
    """
    norm = [_normalize_model_token(t) for t in tokens]
    entries = []
    for entry in spec.entries:
        idx = None
        for j, tok in enumerate(norm):
            if not tok:
                continue
            if tok == entry.noun or singularize(tok) == entry.noun:
                idx = j
                break
            if len(tok) >= 3 and entry.noun.startswith(tok):
                idx = j
                break
        if idx is None:
            raise PromptError(f"noun {entry.noun!r} not found in token list")
        entries.append(CountEntry(noun=entry.noun, token_index=idx,
                                  count=entry.count))
    return CountSpec(entries=entries)
