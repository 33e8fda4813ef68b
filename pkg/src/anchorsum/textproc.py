"""Transcript ingestion: cleaning, tokenization, and context-response pairing.

A meeting transcript is a list of speaker-attributed sentences. Reconstruction
works on windows: each sentence is paired with the `w` sentences before it, and
one extra pair at the end asks the model to predict the end-of-meeting marker.
All operations here are pure value transformations and safe to run concurrently
on distinct transcripts.
"""

from __future__ import annotations

import json
import logging
import re
import string
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

PAD, BOS, EOS, EOM = "<pad>", "<bos>", "<eos>", "[EOM]"
RESERVED_TOKENS = (PAD, BOS, EOS, EOM)
PAD_ID, BOS_ID, EOS_ID, EOM_ID = 0, 1, 2, 3

_PUNCT_RUN = re.compile(r"([%s])\1+" % re.escape(string.punctuation))
_WS_RUN = re.compile(r"\s+")


class TranscriptFormatError(ValueError):
    """Malformed transcript record; carries the offending line and field."""

    def __init__(self, line_no, field_name, message):
        super().__init__(f"line {line_no}, field {field_name!r}: {message}")
        self.line_no = line_no
        self.field = field_name


class VocabularyError(ValueError):
    pass


def clean_text(raw: str) -> str:
    """Collapse whitespace runs to one space and same-punctuation runs to one
    mark, then strip. Total and idempotent."""
    out = _PUNCT_RUN.sub(r"\1", raw)
    out = _WS_RUN.sub(" ", out)
    return out.strip()


class Vocabulary:
    """Closed word vocabulary over whitespace tokens.

    Ids 0..3 are reserved for the pad/bos/eos/end-of-meeting markers; natural
    text can never produce them (a surface form colliding with a reserved
    token is excluded from the vocabulary at build time, so encoding it
    reports an overflow instead).
    """

    def __init__(self, tokens: list[str]):
        self.token_of = list(RESERVED_TOKENS) + [
            t for t in tokens if t not in RESERVED_TOKENS
        ]
        self.id_of = {t: i for i, t in enumerate(self.token_of)}

    @classmethod
    def build(cls, texts) -> "Vocabulary":
        words = set()
        for text in texts:
            words.update(text.split())
        words -= set(RESERVED_TOKENS)
        return cls(sorted(words))

    def __len__(self):
        return len(self.token_of)

    def encode(self, text: str) -> list[int]:
        ids = []
        for word in text.split():
            wid = self.id_of.get(word)
            if wid is None or word in RESERVED_TOKENS:
                raise VocabularyError(
                    f"token {word!r} not in the closed vocabulary "
                    f"({len(self)} entries)"
                )
            ids.append(wid)
        return ids

    def decode(self, ids) -> str:
        return " ".join(self.token_of[i] for i in ids)

    def to_file(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"tokens": self.token_of[len(RESERVED_TOKENS):]}, fh)

    @classmethod
    def from_file(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls(payload["tokens"])


def tokenize(text: str, vocab: Vocabulary) -> list[int]:
    """Deterministic, reversible tokenization of cleaned text."""
    return vocab.encode(text)


def detokenize(ids, vocab: Vocabulary) -> str:
    return vocab.decode(ids)


@dataclass
class Sentence:
    index: int
    speaker: str
    text: str
    tokens: list[int]
    token_span: tuple[int, int]


@dataclass
class Transcript:
    meeting_id: str
    sentences: list[Sentence]

    @property
    def n_tokens(self) -> int:
        return sum(len(s.tokens) for s in self.sentences)

    def flat_tokens(self) -> list[int]:
        out = []
        for s in self.sentences:
            out.extend(s.tokens)
        return out


@dataclass
class ContextResponsePair:
    """Window of context sentence indices plus the response sentence index.

    response is None for the final pair, whose response is the end-of-meeting
    marker rather than a real sentence.
    """

    pair_index: int
    context_sentences: list[int]
    response: int | None
    window: int

    @property
    def is_eom(self) -> bool:
        return self.response is None


def split_pairs(t: Transcript, w: int) -> list[ContextResponsePair]:
    """Emit the m context-response pairs of a transcript with m sentences:
    ({S[max(0,i-w)..i-1]}, S_i) for i in 1..m-1, then the end-of-meeting pair
    with context S[max(0,m-w)..m-1]."""
    m = len(t.sentences)
    if w < 1:
        raise ValueError(f"window must be >= 1, got {w}")
    if m < 2:
        raise ValueError(
            f"transcript {t.meeting_id!r} has {m} sentence(s); need >= 2"
        )
    pairs = []
    for i in range(1, m):
        pairs.append(
            ContextResponsePair(i - 1, list(range(max(0, i - w), i)), i, w)
        )
    pairs.append(
        ContextResponsePair(m - 1, list(range(max(0, m - w), m)), None, w)
    )
    return pairs


def pair_context(t: Transcript, pair: ContextResponsePair):
    """Token ids of the pair's context plus their flat transcript positions."""
    ids, positions = [], []
    for si in pair.context_sentences:
        s = t.sentences[si]
        ids.extend(s.tokens)
        positions.extend(range(s.token_span[0], s.token_span[1]))
    return ids, positions


def pair_response(t: Transcript, pair: ContextResponsePair):
    """Token ids of the response; positions is None for the [EOM] pair."""
    if pair.is_eom:
        return [EOM_ID], None
    s = t.sentences[pair.response]
    return list(s.tokens), list(range(s.token_span[0], s.token_span[1]))


def _sentence_source(speaker: str, text: str, prepend_speaker: bool) -> str:
    return f"{speaker}: {text}" if prepend_speaker else text


def _read_records(path):
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TranscriptFormatError(line_no, "<json>", str(exc)) from exc
            if not isinstance(obj.get("meeting_id"), str):
                raise TranscriptFormatError(line_no, "meeting_id", "missing or not a string")
            sentences = obj.get("sentences")
            if not isinstance(sentences, list):
                raise TranscriptFormatError(line_no, "sentences", "missing or not a list")
            for k, s in enumerate(sentences):
                if not isinstance(s, dict) or not isinstance(s.get("speaker"), str):
                    raise TranscriptFormatError(line_no, f"sentences[{k}].speaker", "missing or not a string")
                if not isinstance(s.get("text"), str):
                    raise TranscriptFormatError(line_no, f"sentences[{k}].text", "missing or not a string")
            records.append((line_no, obj))
    return records


def _assemble(obj, vocab: Vocabulary, prepend_speaker: bool) -> Transcript:
    sentences = []
    offset = 0
    for s in obj["sentences"]:
        text = clean_text(s["text"])
        if not text:
            log.warning(
                "dropping empty sentence in meeting %s (speaker %s)",
                obj["meeting_id"], s["speaker"],
            )
            continue
        tokens = vocab.encode(_sentence_source(s["speaker"], text, prepend_speaker))
        sentences.append(
            Sentence(
                index=len(sentences),
                speaker=s["speaker"],
                text=text,
                tokens=tokens,
                token_span=(offset, offset + len(tokens)),
            )
        )
        offset += len(tokens)
    return Transcript(meeting_id=obj["meeting_id"], sentences=sentences)


def corpus_texts(path, prepend_speaker: bool = True):
    """All cleaned sentence source strings of a transcript file, for
    vocabulary building."""
    texts = []
    for _, obj in _read_records(path):
        for s in obj["sentences"]:
            text = clean_text(s["text"])
            if text:
                texts.append(_sentence_source(s["speaker"], text, prepend_speaker))
    return texts


def load_transcripts(path, vocab: Vocabulary | None = None,
                     prepend_speaker: bool = True) -> list[Transcript]:
    """Load a JSONL transcript file. With vocab=None a vocabulary is built
    from the file itself; otherwise encoding is closed-vocabulary."""
    records = _read_records(path)
    if vocab is None:
        vocab = Vocabulary.build(corpus_texts(path, prepend_speaker))
    out = []
    for line_no, obj in records:
        t = _assemble(obj, vocab, prepend_speaker)
        if not t.sentences:
            log.warning("meeting %s empty after cleaning (line %d)", obj["meeting_id"], line_no)
        out.append(t)
    return out


def save_transcripts(path, transcripts: list[Transcript]):
    with open(path, "w", encoding="utf-8") as fh:
        for t in transcripts:
            fh.write(json.dumps({
                "meeting_id": t.meeting_id,
                "sentences": [{"speaker": s.speaker, "text": s.text} for s in t.sentences],
            }) + "\n")


def load_summaries(path) -> dict:
    """Gold summaries: JSONL {"meeting_id", "summary"} -> cleaned text map."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if not isinstance(obj.get("meeting_id"), str):
                raise TranscriptFormatError(line_no, "meeting_id", "missing or not a string")
            if not isinstance(obj.get("summary"), str):
                raise TranscriptFormatError(line_no, "summary", "missing or not a string")
            out[obj["meeting_id"]] = clean_text(obj["summary"])
    return out


def load_split_manifest(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    for key in ("train", "dev", "test"):
        if not isinstance(manifest.get(key), list):
            raise TranscriptFormatError(0, key, "split manifest needs train/dev/test id lists")
    return manifest


def save_split_manifest(path, manifest: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
