"""Machine suggestions for LID and POS so annotators correct tags instead
of labelling from scratch.

The local engine is a deterministic lexicon/rule cascade; a remote
recommender can be configured per deployment and is consulted over HTTP
with a hard timeout, falling back to the local engine whenever the remote
reply is late, malformed, or fails tagset validation.  Suggestions are
computed once at import time and cached with the sentence.
"""
from __future__ import annotations

import json
import logging
import re
import urllib.error
import urllib.request
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from importlib import resources

from commentator.domain import (
    LID_TAGSET,
    LID_UNIDENTIFIED,
    POS_TAGS,
    POS_TAGSET,
    TASK_LID,
    TASK_POS,
)

log = logging.getLogger(__name__)

DEFAULT_REMOTE_TIMEOUT_MS = 2000

# Closed classes are consulted in this fixed precedence; a word listed in
# several classes resolves to the first.
CLOSED_CLASS_ORDER = ("PRON", "PRON_WH", "DET", "ADP", "CONJ", "PART", "PART_NEG")

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_NUMBER_RE = re.compile(r"[+-]?\d[\d.,:/]*%?")


class EmptyLexiconError(ValueError):
    """Tagging requested while both lexicons are empty."""


class LexiconFormatError(ValueError):
    """A lexicon or rule file line that does not parse."""


@dataclass(frozen=True)
class Lexicon:
    """Frequency list for one language: lowercase word -> positive count."""

    language: str
    entries: dict

    @cached_property
    def total(self) -> int:
        return sum(self.entries.values())

    def frequency(self, word: str) -> float:
        """Relative frequency of ``word`` (0.0 when absent)."""
        total = self.total
        if total == 0:
            return 0.0
        return self.entries.get(word, 0) / total

    @classmethod
    def from_file(cls, language: str, path) -> "Lexicon":
        """Load a ``word<TAB>count`` file (UTF-8, # comments allowed)."""
        entries = {}
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise LexiconFormatError(
                        f"{path}:{lineno}: expected 'word<TAB>count', got {line!r}")
                word, raw_count = parts
                try:
                    count = int(raw_count)
                except ValueError:
                    raise LexiconFormatError(
                        f"{path}:{lineno}: count {raw_count!r} is not an integer") from None
                if count <= 0:
                    raise LexiconFormatError(f"{path}:{lineno}: count must be positive")
                entries[word.lower()] = count
        return cls(language=language, entries=entries)


@dataclass(frozen=True)
class RuleTables:
    """Closed-class wordlists and suffix rules for the POS cascade.

    ``closed`` maps language -> POS tag -> word set; ``suffixes`` maps
    language -> ordered (suffix, tag) list, first match wins.
    """

    closed: dict
    suffixes: dict

    @classmethod
    def from_file(cls, path) -> "RuleTables":
        """Load a rule file with tab-separated lines:

        ``closed<TAB>lang<TAB>TAG<TAB>word word ...``
        ``suffix<TAB>lang<TAB>suffix<TAB>TAG``

        Blank lines and # comments are ignored.
        """
        closed: dict = {}
        suffixes: dict = {}
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.rstrip("\n")
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                parts = line.split("\t")
                kind = parts[0]
                if kind == "closed" and len(parts) == 4:
                    _, lang, tag, words = parts
                    if tag not in POS_TAGS:
                        raise LexiconFormatError(f"{path}:{lineno}: unknown POS tag {tag!r}")
                    bucket = closed.setdefault(lang, {}).setdefault(tag, set())
                    bucket.update(w for w in words.lower().split() if w)
                elif kind == "suffix" and len(parts) == 4:
                    _, lang, suffix, tag = parts
                    if tag not in POS_TAGS:
                        raise LexiconFormatError(f"{path}:{lineno}: unknown POS tag {tag!r}")
                    suffixes.setdefault(lang, []).append((suffix.lower(), tag))
                else:
                    raise LexiconFormatError(f"{path}:{lineno}: unparseable rule {line!r}")
        return cls(closed=closed, suffixes=suffixes)


@dataclass(frozen=True)
class RecommenderConfig:
    """Where suggestions come from.

    ``local`` uses only the shipped engine; ``remote`` asks the configured
    endpoint first and falls back to the local engine on any failure.
    """

    mode: str = "local"
    remote_endpoint: str | None = None
    timeout_ms: int = DEFAULT_REMOTE_TIMEOUT_MS

    def __post_init__(self):
        if self.mode not in ("local", "remote"):
            raise ValueError(f"unknown recommender mode: {self.mode!r}")
        if (self.mode == "remote") != (self.remote_endpoint is not None):
            raise ValueError("remote_endpoint must be set exactly when mode is 'remote'")


@dataclass(frozen=True)
class Suggestion:
    task: str
    tags: tuple[str, ...]
    source: str  # "local" | "remote"


def is_platform_token(surface: str) -> bool:
    """Mentions, hashtags and URLs."""
    return ((surface.startswith("@") or surface.startswith("#")) and len(surface) > 1
            or _URL_RE.fullmatch(surface) is not None)


def is_language_independent(surface: str) -> bool:
    """Tokens that carry no language: platform tokens, numbers, punctuation."""
    if is_platform_token(surface):
        return True
    if _NUMBER_RE.fullmatch(surface):
        return True
    return bool(surface) and all(not ch.isalnum() for ch in surface)


def lid_tag(tokens, lexicons) -> list[str]:
    """One language tag per token via the deterministic cascade:
    language-independent pattern -> un; in exactly one lexicon -> that
    language; in both -> higher relative frequency, ties to en; in
    neither -> un.
    """
    hi_lex, en_lex = lexicons
    if not hi_lex.entries and not en_lex.entries:
        raise EmptyLexiconError("both lexicons are empty")
    tags = []
    for token in tokens:
        surface = token.surface
        if is_language_independent(surface):
            tags.append(LID_UNIDENTIFIED)
            continue
        word = surface.lower()
        in_hi = word in hi_lex.entries
        in_en = word in en_lex.entries
        if in_hi and in_en:
            tags.append("hi" if hi_lex.frequency(word) > en_lex.frequency(word) else "en")
        elif in_hi:
            tags.append("hi")
        elif in_en:
            tags.append("en")
        else:
            tags.append(LID_UNIDENTIFIED)
    return tags


def pos_tag(tokens, lid_tags, rules: RuleTables) -> list[str]:
    """One POS tag per token; the first matching rule wins.

    Order: number -> NUM; platform token or un language -> X; the
    language's closed-class lists; the language's suffix rules; a
    capitalized non-initial token -> PROPN; default NOUN.
    """
    if len(lid_tags) != len(tokens):
        raise ValueError(
            f"lid tags length {len(lid_tags)} does not match token count {len(tokens)}")
    tags = []
    for token, lang in zip(tokens, lid_tags):
        surface = token.surface
        if _NUMBER_RE.fullmatch(surface):
            tags.append("NUM")
            continue
        if is_platform_token(surface) or lang == LID_UNIDENTIFIED:
            tags.append("X")
            continue
        word = surface.lower()
        tag = None
        lang_closed = rules.closed.get(lang, {})
        for cls in CLOSED_CLASS_ORDER:
            if word in lang_closed.get(cls, ()):
                tag = cls
                break
        if tag is None:
            for suffix, suffix_tag in rules.suffixes.get(lang, ()):
                if len(word) > len(suffix) and word.endswith(suffix):
                    tag = suffix_tag
                    break
        if tag is None and token.index > 0 and surface[:1].isupper():
            tag = "PROPN"
        tags.append(tag or "NOUN")
    return tags


def _data_path(name: str):
    return resources.files("commentator").joinpath("data", name)


class PreannotationEngine:
    """Loaded lexicons and rule tables, instrumented with call counters.

    State is immutable after load, so one engine can serve any number of
    threads; the counters exist so tests can prove that serving cached
    suggestions performs no recomputation.
    """

    def __init__(self, hi_lexicon: Lexicon, en_lexicon: Lexicon, rules: RuleTables):
        self.hi_lexicon = hi_lexicon
        self.en_lexicon = en_lexicon
        self.rules = rules
        self.calls = Counter()

    @classmethod
    def load(cls, lexicon_hi=None, lexicon_en=None, pos_rules=None) -> "PreannotationEngine":
        """Engine from explicit file paths, defaulting to the shipped demo
        lexicons and rule tables."""
        return cls(
            hi_lexicon=Lexicon.from_file("hi", lexicon_hi or _data_path("lexicon_hi.tsv")),
            en_lexicon=Lexicon.from_file("en", lexicon_en or _data_path("lexicon_en.tsv")),
            rules=RuleTables.from_file(pos_rules or _data_path("pos_rules.tsv")),
        )

    def lid_tags(self, tokens) -> list[str]:
        self.calls["lid"] += 1
        return lid_tag(tokens, (self.hi_lexicon, self.en_lexicon))

    def pos_tags(self, tokens, lid_tags=None) -> list[str]:
        self.calls["pos"] += 1
        if lid_tags is None:
            lid_tags = lid_tag(tokens, (self.hi_lexicon, self.en_lexicon))
        return pos_tag(tokens, lid_tags, self.rules)

    def suggest(self, tokens, task: str) -> list[str]:
        if task == TASK_LID:
            return self.lid_tags(tokens)
        if task == TASK_POS:
            return self.pos_tags(tokens)
        raise ValueError(f"no machine suggestions for task {task!r}")

    def call_count(self) -> int:
        return sum(self.calls.values())


def _fetch_remote_tags(sentence, task: str, config: RecommenderConfig) -> list[str]:
    body = json.dumps({
        "text": sentence.text,
        "tokens": sentence.surfaces,
        "task": task,
    }).encode("utf-8")
    request = urllib.request.Request(
        config.remote_endpoint, data=body,
        headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(request, timeout=config.timeout_ms / 1000.0) as response:
        reply = json.loads(response.read().decode("utf-8"))
    tags = reply["tags"]
    if not isinstance(tags, list):
        raise ValueError("remote reply 'tags' is not a list")
    return [str(t) for t in tags]


def _tags_valid(tags, token_count: int, task: str) -> bool:
    if len(tags) != token_count:
        return False
    tagset = LID_TAGSET if task == TASK_LID else POS_TAGSET
    return all(t in tagset for t in tags)


def recommend(sentence, task: str, config: RecommenderConfig,
              engine: PreannotationEngine) -> Suggestion:
    """Suggestion for one sentence and task.

    Remote mode issues a single request; a reply that arrives within the
    timeout and validates against the tagset wins, anything else degrades
    to the local engine silently (logged, never surfaced to annotators).
    """
    if config.mode == "remote":
        try:
            tags = _fetch_remote_tags(sentence, task, config)
            if _tags_valid(tags, len(sentence.tokens), task):
                return Suggestion(task=task, tags=tuple(tags), source="remote")
            log.warning("remote recommender returned invalid tags for sentence %s/%s; "
                        "falling back to local engine", sentence.id, task)
        except (urllib.error.URLError, OSError, ValueError, KeyError) as exc:
            log.warning("remote recommender failed for sentence %s/%s (%s); "
                        "falling back to local engine", sentence.id, task, exc)
    return Suggestion(task=task, tags=tuple(engine.suggest(sentence.tokens, task)),
                      source="local")


def precompute(sentences, config: RecommenderConfig,
               engine: PreannotationEngine) -> dict:
    """Suggestion caches for every sentence: id -> {"lid": [...], "pos": [...]}.

    Idempotent in local mode (re-running reproduces identical caches); at
    most one remote request is in flight per sentence and task.
    """
    caches = {}
    for sentence in sentences:
        caches[sentence.id] = {
            TASK_LID: list(recommend(sentence, TASK_LID, config, engine).tags),
            TASK_POS: list(recommend(sentence, TASK_POS, config, engine).tags),
        }
    return caches
