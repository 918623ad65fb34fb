import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest
from hypothesis import given
from hypothesis import strategies as st

from commentator.domain import (
    LID_TAGSET,
    POS_TAGSET,
    Sentence,
    TokenAnnotation,
    tokenize,
    validate_annotation,
)
from commentator.preannotation import (
    EmptyLexiconError,
    Lexicon,
    LexiconFormatError,
    PreannotationEngine,
    RecommenderConfig,
    RuleTables,
    lid_tag,
    pos_tag,
    precompute,
    recommend,
)


class StubRecommender:
    """Configurable remote endpoint: 'echo' valid tags, 'invalid' tags
    outside the tagset, 'sleep' past the client timeout."""

    def __init__(self, behavior="echo", delay=0.0):
        self.behavior = behavior
        self.delay = delay
        self.requests = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length))
                stub.requests.append(body)
                if stub.delay:
                    time.sleep(stub.delay)
                if stub.behavior == "invalid":
                    tags = ["fr"] * len(body["tokens"])
                elif stub.behavior == "short":
                    tags = ["hi"]
                else:
                    tags = ["hi" if body["task"] == "lid" else "NOUN"] * len(body["tokens"])
                payload = json.dumps({"tags": tags}).encode()
                try:
                    self.send_response(200)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(payload)))
                    self.end_headers()
                    self.wfile.write(payload)
                except (BrokenPipeError, ConnectionResetError):
                    pass  # client gave up (timeout tests)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    @property
    def endpoint(self):
        return f"http://127.0.0.1:{self.server.server_address[1]}/recommend"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def stub_factory():
    stubs = []

    def make(**kwargs):
        stub = StubRecommender(**kwargs)
        stubs.append(stub)
        return stub

    yield make
    for stub in stubs:
        stub.close()


def toy_lexicons():
    # 'foo' has relative frequency 0.01 in hi and 0.001 in en.
    hi = Lexicon("hi", {"foo": 1, "bhara": 99})
    en = Lexicon("en", {"foo": 1, "filler": 999})
    return hi, en


class TestLexicon:
    def test_load_shipped_lexicons(self, engine):
        assert engine.hi_lexicon.entries["thand"] > 0
        assert engine.en_lexicon.entries["feeling"] > 0

    def test_format_errors(self, tmp_path):
        bad = tmp_path / "lex.tsv"
        bad.write_text("word without count\n", encoding="utf-8")
        with pytest.raises(LexiconFormatError):
            Lexicon.from_file("hi", bad)
        bad.write_text("word\tNaN\n", encoding="utf-8")
        with pytest.raises(LexiconFormatError):
            Lexicon.from_file("hi", bad)
        bad.write_text("word\t0\n", encoding="utf-8")
        with pytest.raises(LexiconFormatError):
            Lexicon.from_file("hi", bad)

    def test_comments_and_blank_lines_ignored(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("# header\n\nChai\t3\n", encoding="utf-8")
        lexicon = Lexicon.from_file("hi", path)
        assert lexicon.entries == {"chai": 3}


class TestLidTag:
    def test_motivating_example_with_shipped_lexicons(self, engine):
        tokens = tokenize("I am feeling very thand today")
        assert engine.lid_tags(tokens) == ["en", "en", "en", "en", "hi", "en"]

    def test_platform_tokens_are_unidentified(self, engine):
        tokens = tokenize("@user #tag 123")
        assert engine.lid_tags(tokens) == ["un", "un", "un"]

    def test_urls_and_punctuation(self, engine):
        tokens = tokenize("https://example.com www.example.com !!! 3.14")
        assert engine.lid_tags(tokens) == ["un", "un", "un", "un"]

    def test_relative_frequency_prefers_hi(self):
        tags = lid_tag(tokenize("foo"), toy_lexicons())
        assert tags == ["hi"]

    def test_tie_breaks_to_en(self):
        hi = Lexicon("hi", {"foo": 1, "x": 9})
        en = Lexicon("en", {"foo": 1, "y": 9})
        assert lid_tag(tokenize("foo"), (hi, en)) == ["en"]

    def test_unknown_word_is_unidentified(self, engine):
        assert engine.lid_tags(tokenize("zzyzx"))[0] == "un"

    def test_single_lexicon_membership(self):
        hi, en = toy_lexicons()
        assert lid_tag(tokenize("bhara filler"), (hi, en)) == ["hi", "en"]

    def test_empty_lexicons_error(self):
        empty = (Lexicon("hi", {}), Lexicon("en", {}))
        with pytest.raises(EmptyLexiconError):
            lid_tag(tokenize("kuch"), empty)

    def test_case_insensitive_lookup(self, engine):
        assert engine.lid_tags(tokenize("FEELING Thand")) == ["en", "hi"]


class TestPosTag:
    def test_number_is_num_regardless_of_lid(self, engine):
        assert engine.pos_tags(tokenize("123"), ["un"]) == ["NUM"]
        assert engine.pos_tags(tokenize("123"), ["hi"]) == ["NUM"]

    def test_hashtag_is_x(self, engine):
        assert engine.pos_tags(tokenize("#yolo"), ["un"]) == ["X"]

    def test_unidentified_language_is_x(self, engine):
        assert engine.pos_tags(tokenize("zzyzx"), ["un"]) == ["X"]

    def test_en_suffix_rules(self, engine):
        tokens = tokenize("walking quickly famous")
        assert engine.pos_tags(tokens, ["en", "en", "en"]) == ["VERB", "ADV", "ADJ"]

    def test_closed_class_beats_suffix(self, engine):
        # "the" ends in nothing special but "this" is DET before any suffix rule.
        assert engine.pos_tags(tokenize("this"), ["en"]) == ["DET"]
        assert engine.pos_tags(tokenize("mein"), ["hi"]) == ["ADP"]

    def test_hi_suffix_verbs(self, engine):
        tokens = tokenize("karna hota milti karke")
        assert engine.pos_tags(tokens, ["hi"] * 4) == ["VERB", "VERB", "VERB", "VERB"]

    def test_capitalized_non_initial_is_propn(self, engine):
        tokens = tokenize("kal Rahul aayega")
        tags = engine.pos_tags(tokens, ["hi", "hi", "hi"])
        assert tags[1] == "PROPN"

    def test_initial_capital_is_not_propn(self, engine):
        tags = engine.pos_tags(tokenize("Chalo ghar"), ["hi", "hi"])
        assert tags[0] != "PROPN"

    def test_default_is_noun(self, engine):
        assert engine.pos_tags(tokenize("ghar"), ["hi"]) == ["NOUN"]

    def test_length_mismatch_error(self, engine):
        with pytest.raises(ValueError):
            pos_tag(tokenize("a b"), ["en"], engine.rules)

    def test_closed_class_precedence_order(self, tmp_path):
        rules_file = tmp_path / "rules.tsv"
        rules_file.write_text("closed\ten\tDET\tword\nclosed\ten\tPRON\tword\n",
                              encoding="utf-8")
        rules = RuleTables.from_file(rules_file)
        # PRON precedes DET in the fixed class order even though DET came first.
        assert pos_tag(tokenize("word"), ["en"], rules) == ["PRON"]


class TestRuleTables:
    def test_shipped_rules_parse(self, engine):
        assert "en" in engine.rules.closed and "hi" in engine.rules.closed
        assert ("ly", "ADV") in engine.rules.suffixes["en"]

    def test_bad_rule_line(self, tmp_path):
        path = tmp_path / "rules.tsv"
        path.write_text("closed\ten\tNOPE\tword\n", encoding="utf-8")
        with pytest.raises(LexiconFormatError):
            RuleTables.from_file(path)
        path.write_text("frobnicate\ten\n", encoding="utf-8")
        with pytest.raises(LexiconFormatError):
            RuleTables.from_file(path)


class TestPropertyInvariants:
    @given(st.lists(st.text(alphabet=st.characters(blacklist_categories=("Z", "C")),
                            min_size=1, max_size=12), min_size=1, max_size=10))
    def test_outputs_validate_against_tagsets(self, words):
        engine = _shared_engine()
        sentence = Sentence.create(1, " ".join(words))
        lid_tags = engine.lid_tags(sentence.tokens)
        pos_tags = engine.pos_tags(sentence.tokens, lid_tags)
        assert len(lid_tags) == len(sentence.tokens)
        assert len(pos_tags) == len(sentence.tokens)
        lid_ann = TokenAnnotation(1, 1, "lid", tuple(lid_tags))
        pos_ann = TokenAnnotation(1, 1, "pos", tuple(pos_tags))
        assert validate_annotation(lid_ann, sentence, LID_TAGSET) == []
        assert validate_annotation(pos_ann, sentence, POS_TAGSET) == []

    @given(st.lists(st.text(alphabet="abc@#1", min_size=1, max_size=6),
                    min_size=1, max_size=8))
    def test_deterministic(self, words):
        engine = _shared_engine()
        tokens = tokenize(" ".join(words))
        if not tokens:
            return
        assert engine.lid_tags(tokens) == engine.lid_tags(tokens)


_ENGINE_CACHE = []


def _shared_engine():
    if not _ENGINE_CACHE:
        _ENGINE_CACHE.append(PreannotationEngine.load())
    return _ENGINE_CACHE[0]


def _sentence(text="I am feeling very thand today", sid=1):
    return Sentence.create(sid, text)


class TestRecommend:
    def test_local_mode_delegates(self, engine):
        suggestion = recommend(_sentence(), "lid", RecommenderConfig(), engine)
        assert suggestion.source == "local"
        assert list(suggestion.tags) == ["en", "en", "en", "en", "hi", "en"]

    def test_remote_success(self, engine, stub_factory):
        stub = stub_factory(behavior="echo")
        config = RecommenderConfig(mode="remote", remote_endpoint=stub.endpoint)
        suggestion = recommend(_sentence(), "lid", config, engine)
        assert suggestion.source == "remote"
        assert set(suggestion.tags) == {"hi"}
        assert stub.requests[0]["tokens"] == ["I", "am", "feeling", "very", "thand", "today"]
        assert stub.requests[0]["task"] == "lid"

    def test_remote_invalid_tags_fall_back(self, engine, stub_factory):
        stub = stub_factory(behavior="invalid")
        config = RecommenderConfig(mode="remote", remote_endpoint=stub.endpoint)
        suggestion = recommend(_sentence(), "lid", config, engine)
        assert suggestion.source == "local"
        assert list(suggestion.tags) == ["en", "en", "en", "en", "hi", "en"]

    def test_remote_length_mismatch_falls_back(self, engine, stub_factory):
        stub = stub_factory(behavior="short")
        config = RecommenderConfig(mode="remote", remote_endpoint=stub.endpoint)
        assert recommend(_sentence(), "lid", config, engine).source == "local"

    def test_unreachable_endpoint_falls_back(self, engine):
        config = RecommenderConfig(mode="remote",
                                   remote_endpoint="http://127.0.0.1:1/nothing")
        suggestion = recommend(_sentence(), "lid", config, engine)
        assert suggestion.source == "local"

    def test_timeout_falls_back_within_budget(self, engine, stub_factory):
        stub = stub_factory(behavior="echo", delay=1.0)
        config = RecommenderConfig(mode="remote", remote_endpoint=stub.endpoint,
                                   timeout_ms=150)
        started = time.monotonic()
        suggestion = recommend(_sentence(), "lid", config, engine)
        elapsed = time.monotonic() - started
        assert suggestion.source == "local"
        assert elapsed < 0.9  # timeout + local computation, well under the delay

    def test_config_invariants(self):
        with pytest.raises(ValueError):
            RecommenderConfig(mode="remote")
        with pytest.raises(ValueError):
            RecommenderConfig(mode="local", remote_endpoint="http://x")

    def test_mli_has_no_machine_suggestions(self, engine):
        with pytest.raises(ValueError):
            engine.suggest(_sentence().tokens, "mli")


class TestPrecompute:
    def test_counts_sentences(self, engine):
        sentences = [_sentence(sid=i, text=f"sentence number {i}") for i in (1, 2, 3)]
        caches = precompute(sentences, RecommenderConfig(), engine)
        assert len(caches) == 3
        for sid, cache in caches.items():
            assert set(cache) == {"lid", "pos"}

    def test_empty_corpus(self, engine):
        assert precompute([], RecommenderConfig(), engine) == {}

    def test_idempotent_in_local_mode(self, engine):
        sentences = [_sentence(sid=i, text=f"aaj din number {i} hai") for i in (1, 2, 3)]
        first = precompute(sentences, RecommenderConfig(), engine)
        second = precompute(sentences, RecommenderConfig(), engine)
        assert json.dumps(first, sort_keys=True) == json.dumps(second, sort_keys=True)

    def test_engine_counters_track_calls(self, engine):
        before = engine.call_count()
        precompute([_sentence()], RecommenderConfig(), engine)
        assert engine.call_count() == before + 2  # one lid + one pos
