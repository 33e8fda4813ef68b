"""Planted-saliency synthetic meeting corpus.

Each meeting is mostly filler chatter, with a few planted decision sentences
whose topic words are echoed by the following sentence. The echoes make the
planted tokens genuinely predictive during reconstruction (they drive the
interaction), and the gold summary is exactly the planted decision sentences
in order, so summarization quality directly measures whether the pipeline
kept the planted content through compression.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

TOPIC_WORDS = (
    "alpha bravo charlie delta echo foxtrot golf hotel india juliett kilo "
    "lima mike november oscar papa quebec romeo sierra tango uniform victor "
    "whiskey xray yankee zulu beta gamma epsilon zeta eta theta iota kappa "
    "lambda mu nu xi omicron pi rho sigma tau upsilon phi chi psi omega"
).split()

# disjoint from the plant/echo cue words (decision, okay, yes, right, sure)
FILLER_WORDS = (
    "yeah well um so i think we maybe could should really just like "
    "the a and it that was were is are on for with about going to talk "
    "more less budget room time slide note point item board marker coffee "
    "pause quick short long next last first second agenda minute hour "
    "question answer fine good bad new old big small team group folks "
    "everyone anyone someone nothing something update status report draft "
    "version copy file page line word number detail issue thing stuff "
    "work plan idea case side part"
).split()

SPEAKER_NAMES = ("alice", "bob", "carol", "dave", "erin", "frank")

PLANT_LEAD = "decision"
ECHO_LEADS = ("okay", "yes", "indeed")
ECHO_TAILS = ("right", "sure", "agreed")


@dataclass
class SynthSpec:
    meetings_train: int = 100
    meetings_dev: int = 20
    meetings_test: int = 20
    sentences: int = 60
    filler_vocab: int = 80
    topic_vocab: int = 24
    plants: int = 4
    topics_per_plant: int = 4
    echoes_per_plant: int = 2
    speakers: int = 4
    filler_len: tuple[int, int] = (5, 9)
    # plants live in this fraction of the sentence range; salient content is
    # scattered through the later part of the meeting, so no single
    # truncation window can cover it (long-meeting geometry at desk scale)
    plant_span: tuple[float, float] = (0.3, 0.95)
    seed: int = 0

    def __post_init__(self):
        if self.topic_vocab > len(TOPIC_WORDS):
            raise ValueError(f"at most {len(TOPIC_WORDS)} topic words available")
        if self.filler_vocab > len(FILLER_WORDS):
            raise ValueError(f"at most {len(FILLER_WORDS)} filler words available")
        if self.speakers > len(SPEAKER_NAMES):
            raise ValueError(f"at most {len(SPEAKER_NAMES)} speaker names available")
        if self.plants * self.topics_per_plant > self.topic_vocab:
            raise ValueError("plants * topics_per_plant exceeds the topic vocabulary")
        if self.echoes_per_plant > len(ECHO_LEADS):
            raise ValueError(f"at most {len(ECHO_LEADS)} echoes per plant")
        if self.sentences < (2 + self.echoes_per_plant) * self.plants + 2:
            raise ValueError("not enough sentences to spread the plants")


def _plant_slots(rng, spec: SynthSpec) -> list[int]:
    """Plant sentence indices, one per stratum of the plant span, each
    followed by free slots for its echoes and separated by at least one
    filler."""
    gap = spec.echoes_per_plant + 2
    lo = max(1, int(spec.plant_span[0] * (spec.sentences - 1)))
    hi = min(spec.sentences - spec.echoes_per_plant - 1,
             int(spec.plant_span[1] * (spec.sentences - 1)))
    if hi - lo < spec.plants * gap:
        lo, hi = 1, spec.sentences - spec.echoes_per_plant - 1
    edges = np.linspace(lo, hi, spec.plants + 1).astype(int)
    while True:
        slots = []
        ok = True
        for a, b in zip(edges[:-1], edges[1:]):
            pick = int(rng.integers(a, max(a + 1, b - spec.echoes_per_plant)))
            if slots and pick - slots[-1] < gap:
                ok = False
                break
            slots.append(pick)
        if ok:
            return slots


def generate_meeting(meeting_id: str, spec: SynthSpec, rng) -> dict:
    fillers = FILLER_WORDS[: spec.filler_vocab]
    topics = TOPIC_WORDS[: spec.topic_vocab]
    speakers = SPEAKER_NAMES[: spec.speakers]
    lens = spec.filler_len

    def filler_sentence():
        k = int(rng.integers(lens[0], lens[1] + 1))
        return " ".join(fillers[i] for i in rng.integers(0, len(fillers), size=k))

    sentences = [
        {"speaker": speakers[int(rng.integers(0, len(speakers)))],
         "text": filler_sentence()}
        for _ in range(spec.sentences)
    ]
    plant_slots = _plant_slots(rng, spec)
    # topics are distinct across the whole meeting, so every echo has exactly
    # one plant to copy from
    drawn = rng.choice(len(topics), size=spec.plants * spec.topics_per_plant,
                       replace=False)
    plant_texts, echo_slots = [], []
    for p, slot in enumerate(plant_slots):
        words = [
            topics[i]
            for i in drawn[p * spec.topics_per_plant : (p + 1) * spec.topics_per_plant]
        ]
        plant = f"{PLANT_LEAD} " + " ".join(words)
        sentences[slot]["text"] = plant
        for e in range(spec.echoes_per_plant):
            echo = f"{ECHO_LEADS[e]} " + " ".join(words) + f" {ECHO_TAILS[e]}"
            sentences[slot + 1 + e]["text"] = echo
            echo_slots.append(slot + 1 + e)
        plant_texts.append(plant)
    return {
        "meeting_id": meeting_id,
        "sentences": sentences,
        "summary": " ".join(plant_texts),
        "plant_sentences": plant_slots,
        "echo_sentences": echo_slots,
    }


def generate_corpus(spec: SynthSpec):
    """Returns (meetings, split manifest); deterministic given spec.seed."""
    rng = np.random.default_rng(spec.seed)
    total = spec.meetings_train + spec.meetings_dev + spec.meetings_test
    meetings = [
        generate_meeting(f"synth-{i:04d}", spec, rng) for i in range(total)
    ]
    ids = [m["meeting_id"] for m in meetings]
    split = {
        "train": ids[: spec.meetings_train],
        "dev": ids[spec.meetings_train : spec.meetings_train + spec.meetings_dev],
        "test": ids[spec.meetings_train + spec.meetings_dev :],
    }
    return meetings, split


def write_corpus(out_dir, spec: SynthSpec):
    """Write transcripts.jsonl, summaries.jsonl, plants.jsonl, split.json."""
    import os

    meetings, split = generate_corpus(spec)
    os.makedirs(out_dir, exist_ok=True)

    def dump(name, rows):
        path = os.path.join(out_dir, name)
        tmp = f"{path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")
        os.replace(tmp, path)

    dump("transcripts.jsonl", (
        {"meeting_id": m["meeting_id"], "sentences": m["sentences"]}
        for m in meetings
    ))
    dump("summaries.jsonl", (
        {"meeting_id": m["meeting_id"], "summary": m["summary"]}
        for m in meetings
    ))
    dump("plants.jsonl", (
        {"meeting_id": m["meeting_id"], "plant_sentences": m["plant_sentences"],
         "echo_sentences": m["echo_sentences"]}
        for m in meetings
    ))
    path = os.path.join(out_dir, "split.json")
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(split, fh, indent=1)
    os.replace(tmp, path)
    return meetings, split


def load_plants(path) -> dict[str, list[int]]:
    """meeting_id -> plant sentence indices."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                out[obj["meeting_id"]] = obj["plant_sentences"]
    return out


def planted_token_positions(transcript, plant_sentence_indices,
                            skip_first_token: bool = True) -> list[int]:
    """Flat token positions of the planted sentences; the leading token (the
    speaker prefix, when present) is skipped by default."""
    positions = []
    for si in plant_sentence_indices:
        lo, hi = transcript.sentences[si].token_span
        positions.extend(range(lo + (1 if skip_first_token else 0), hi))
    return positions
