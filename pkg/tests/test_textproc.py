import json
import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anchorsum import textproc
from anchorsum.textproc import (EOM_ID, ContextResponsePair, Transcript,
                                TranscriptFormatError, Vocabulary,
                                VocabularyError, clean_text, detokenize,
                                load_transcripts, save_transcripts,
                                split_pairs, tokenize)


def _reference_clean(raw):
    """Character-level scanner used as the oracle for clean_text."""
    out = []
    for ch in raw:
        if ch.isspace():
            if out and out[-1] == " ":
                continue
            out.append(" ")
        elif ch in string.punctuation and out and out[-1] == ch:
            continue
        else:
            out.append(ch)
    return "".join(out).strip()


class TestCleanText:
    def test_collapses_spaces_and_punct(self):
        assert clean_text("um  ,, yeah") == "um , yeah"

    def test_identity_on_clean(self):
        assert clean_text("hello") == "hello"

    def test_mixed_runs_match_reference_scanner(self):
        raw = "a..  b  !!c"
        assert _reference_clean(raw) == "a. b !c"
        assert clean_text(raw) == "a. b !c"

    def test_different_punct_marks_not_collapsed(self):
        assert clean_text("a.!b") == "a.!b"
        assert clean_text("a. . b") == "a. . b"

    @given(st.text(max_size=200))
    @settings(max_examples=300, deadline=None)
    def test_matches_reference_scanner(self, raw):
        assert clean_text(raw) == _reference_clean(raw)

    @given(st.text(max_size=200))
    @settings(max_examples=200, deadline=None)
    def test_idempotent(self, raw):
        once = clean_text(raw)
        assert clean_text(once) == once


class TestVocabulary:
    def test_empty_input_tokenizes_to_nothing(self):
        v = Vocabulary.build(["the cat"])
        assert tokenize("", v) == []

    def test_round_trip_two_tokens(self):
        v = Vocabulary.build(["the cat"])
        ids = tokenize("the cat", v)
        assert len(ids) == 2
        assert detokenize(ids, v) == "the cat"

    def test_round_trip_synthetic_corpus(self):
        import numpy as np

        rng = np.random.default_rng(0)
        words = [f"w{i}" for i in range(50)]
        sentences = [
            " ".join(words[i] for i in rng.integers(0, 50, size=rng.integers(1, 12)))
            for _ in range(1000)
        ]
        v = Vocabulary.build(sentences)
        for s in sentences:
            assert detokenize(tokenize(s, v), v) == s

    def test_closed_vocab_overflow(self):
        v = Vocabulary.build(["the cat"])
        with pytest.raises(VocabularyError):
            v.encode("the dog")

    def test_reserved_never_produced_from_text(self):
        v = Vocabulary.build(["the [EOM] cat"])
        assert EOM_ID not in v.encode("the cat")
        with pytest.raises(VocabularyError):
            v.encode("the [EOM] cat")

    def test_vocab_file_round_trip(self, tmp_path):
        v = Vocabulary.build(["alpha beta", "gamma"])
        v.to_file(tmp_path / "vocab.json")
        v2 = Vocabulary.from_file(tmp_path / "vocab.json")
        assert v2.token_of == v.token_of


def _toy_transcript(m, tokens_per_sentence=3):
    v = Vocabulary.build([f"s{i} t{j}" for i in range(m) for j in range(tokens_per_sentence)])
    sentences = []
    offset = 0
    for i in range(m):
        text = " ".join(f"t{j}" for j in range(tokens_per_sentence))
        toks = v.encode(text)
        sentences.append(textproc.Sentence(i, "spk", text, toks, (offset, offset + len(toks))))
        offset += len(toks)
    return Transcript("toy", sentences), v


class TestSplitPairs:
    def test_m4_w2_layout(self):
        t, _ = _toy_transcript(4)
        pairs = split_pairs(t, 2)
        assert len(pairs) == 4
        assert [p.context_sentences for p in pairs] == [[0], [0, 1], [1, 2], [2, 3]]
        assert [p.response for p in pairs] == [1, 2, 3, None]

    def test_window_clamped_at_start(self):
        t, _ = _toy_transcript(2)
        pairs = split_pairs(t, 8)
        assert [p.context_sentences for p in pairs] == [[0], [0, 1]]
        assert pairs[-1].is_eom

    def test_context_membership_bounded_by_window(self):
        t, _ = _toy_transcript(60)
        pairs = split_pairs(t, 8)
        # brute-force pair membership count per sentence
        counts = {i: 0 for i in range(60)}
        for p in pairs:
            for si in p.context_sentences:
                counts[si] += 1
        assert max(counts.values()) <= 8
        responses = [p.response for p in pairs if not p.is_eom]
        assert responses == list(range(1, 60))

    def test_rejects_tiny_transcripts(self):
        t, _ = _toy_transcript(1)
        with pytest.raises(ValueError):
            split_pairs(t, 4)

    @given(st.integers(2, 40), st.integers(1, 12))
    @settings(max_examples=60, deadline=None)
    def test_pair_count_is_m(self, m, w):
        t, _ = _toy_transcript(m, tokens_per_sentence=1)
        pairs = split_pairs(t, w)
        assert len(pairs) == m
        # every sentence except the first responds exactly once
        responded = [p.response for p in pairs if not p.is_eom]
        assert sorted(responded) == list(range(1, m))

    def test_eom_pair_response_tokens(self):
        t, _ = _toy_transcript(3)
        pairs = split_pairs(t, 2)
        ids, positions = textproc.pair_response(t, pairs[-1])
        assert ids == [EOM_ID]
        assert positions is None


class TestTranscriptIO:
    def _write(self, path, records):
        with open(path, "w", encoding="utf-8") as fh:
            for r in records:
                fh.write(json.dumps(r) + "\n")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "t.jsonl"
        path.write_text("")
        assert load_transcripts(path) == []

    def test_single_meeting(self, tmp_path):
        path = tmp_path / "t.jsonl"
        self._write(path, [{"meeting_id": "m1", "sentences": [
            {"speaker": "a", "text": "hello there"},
            {"speaker": "b", "text": "hi"},
        ]}])
        out = load_transcripts(path)
        assert len(out) == 1 and out[0].meeting_id == "m1"
        assert out[0].n_tokens == sum(len(s.tokens) for s in out[0].sentences)

    def test_malformed_record_names_line_and_field(self, tmp_path):
        path = tmp_path / "t.jsonl"
        self._write(path, [
            {"meeting_id": "ok", "sentences": [{"speaker": "a", "text": "x"}, {"speaker": "b", "text": "y"}]},
            {"meeting_id": "bad", "sentences": [{"speaker": "a"}]},
        ])
        with pytest.raises(TranscriptFormatError) as err:
            load_transcripts(path)
        assert err.value.line_no == 2
        assert "text" in err.value.field

    def test_empty_sentences_dropped_and_reindexed(self, tmp_path):
        path = tmp_path / "t.jsonl"
        self._write(path, [{"meeting_id": "m", "sentences": [
            {"speaker": "a", "text": "one two"},
            {"speaker": "b", "text": "   \t  "},
            {"speaker": "c", "text": "three"},
        ]}])
        (t,) = load_transcripts(path)
        assert [s.index for s in t.sentences] == [0, 1]
        assert t.sentences[1].text == "three"

    def test_write_then_read_structural_equality(self, tmp_path):
        import numpy as np

        rng = np.random.default_rng(7)
        words = [f"w{i}" for i in range(30)]
        records = []
        for k in range(20):
            records.append({
                "meeting_id": f"m{k}",
                "sentences": [
                    {"speaker": f"s{int(rng.integers(0, 3))}",
                     "text": " ".join(words[i] for i in rng.integers(0, 30, size=rng.integers(1, 9)))}
                    for _ in range(int(rng.integers(2, 12)))
                ],
            })
        path = tmp_path / "t.jsonl"
        self._write(path, records)
        first = load_transcripts(path)
        save_transcripts(tmp_path / "copy.jsonl", first)
        second = load_transcripts(tmp_path / "copy.jsonl")
        assert first == second

    def test_token_spans_contiguous(self, tmp_path):
        path = tmp_path / "t.jsonl"
        self._write(path, [{"meeting_id": "m", "sentences": [
            {"speaker": "a", "text": "one two"},
            {"speaker": "b", "text": "three four five"},
        ]}])
        (t,) = load_transcripts(path)
        offset = 0
        for s in t.sentences:
            assert s.token_span == (offset, offset + len(s.tokens))
            offset = s.token_span[1]
        assert t.n_tokens == offset
