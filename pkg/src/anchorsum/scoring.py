"""Token importance scoring and anchor selection.

Each context-response pair rates the tokens it saw as context (or, for the
token-wise loss indicator, the response's own tokens). A token inside the
window of w responses therefore collects up to w ratings; the two aggregation
strategies (mean over ratings, or per-pair top nominations unioned) turn the
rating matrix into a fixed-size anchor set.

score_pair calls across pairs are independent; aggregation is a single
reduction over the finished matrix.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import textproc
from .seq2seq import (ReconstructionOutput, Seq2SeqModel,
                      backward_scaled_attention, forward_teacher_forced)

log = logging.getLogger(__name__)

INDICATORS = ("scaled_attention", "attention", "gradient", "tokenwise_loss", "random")
AGGREGATIONS = ("average", "vote")


class IndicatorError(ValueError):
    pass


@dataclass
class AnchorSet:
    """Selected anchor token positions with their aggregated scores.

    scores[i] is the mean rating of positions[i] regardless of the
    aggregation that selected it, so descending-score orderings are canonical.
    """

    positions: list[int]
    scores: list[float]
    ratio: float = 0.0
    indicator: str = ""
    aggregation: str = ""
    meeting_id: str = ""

    def __post_init__(self):
        if len(self.positions) != len(self.scores):
            raise ValueError("positions and scores lengths differ")
        if any(b <= a for a, b in zip(self.positions, self.positions[1:])):
            raise ValueError("anchor positions must be strictly increasing")

    def __len__(self):
        return len(self.positions)


class TokenScoreMatrix:
    """Per-pair ratings of flat token positions."""

    def __init__(self):
        self.rows: dict[int, list[tuple[int, float]]] = {}

    def add_row(self, pair_index: int, positions, scores):
        self.rows[pair_index] = [(int(p), float(s)) for p, s in zip(positions, scores)]

    @property
    def n_pairs(self) -> int:
        return len(self.rows)

    def ratings_by_position(self) -> dict[int, list[float]]:
        out: dict[int, list[float]] = {}
        for row in self.rows.values():
            for pos, score in row:
                out.setdefault(pos, []).append(score)
        return out

    def mean_scores(self) -> dict[int, float]:
        return {
            pos: sum(r) / len(r) for pos, r in self.ratings_by_position().items()
        }

    def scale(self, factor: float):
        for idx in self.rows:
            self.rows[idx] = [(p, s * factor) for p, s in self.rows[idx]]


def score_pair(output: ReconstructionOutput | None, indicator: str,
               context_positions, response_positions=None, rng=None):
    """Rate one pair's tokens. Returns (positions, scores) aligned lists.

    The attention-family indicators reduce over heads and response tokens
    (elementwise product first for scaled attention) and rate the context;
    tokenwise_loss rates the response tokens by their own generation loss;
    random draws uniform scores from the supplied generator.
    """
    if indicator not in INDICATORS:
        raise IndicatorError(f"unknown indicator {indicator!r}")
    if indicator == "random":
        if rng is None:
            raise IndicatorError("random indicator needs a seeded generator")
        return list(context_positions), rng.random(len(context_positions)).tolist()
    if indicator == "tokenwise_loss":
        if output is None or output.token_losses is None:
            raise IndicatorError("tokenwise_loss needs a forward pass")
        if response_positions is None:
            return [], []  # virtual end-of-meeting response has no positions
        return list(response_positions), output.token_losses.tolist()
    if output is None or not output.traces:
        raise IndicatorError(f"indicator {indicator!r} needs attention traces")
    weights = np.stack([t.weights for t in output.traces])  # [h, r, ctx]
    if indicator == "attention":
        per_context = weights.sum(axis=(0, 1))
    else:
        if any(t.grads is None for t in output.traces):
            raise IndicatorError(
                f"indicator {indicator!r} needs gradients; "
                "run backward_scaled_attention first"
            )
        grads = np.stack([t.grads for t in output.traces])
        per_context = (
            (weights * grads) if indicator == "scaled_attention" else grads
        ).sum(axis=(0, 1))
    if per_context.shape[0] != len(context_positions):
        raise IndicatorError(
            f"trace covers {per_context.shape[0]} context tokens, "
            f"pair has {len(context_positions)}"
        )
    return list(context_positions), per_context.tolist()


def build_score_matrix(transcript, model: Seq2SeqModel, window: int,
                       indicator: str, seed: int = 0) -> TokenScoreMatrix:
    """Run reconstruction over all pairs of a transcript and collect ratings."""
    rng = np.random.default_rng(seed)
    matrix = TokenScoreMatrix()
    for pair in textproc.split_pairs(transcript, window):
        ctx_ids, ctx_positions = textproc.pair_context(transcript, pair)
        resp_ids, resp_positions = textproc.pair_response(transcript, pair)
        output = None
        if indicator != "random":
            output = forward_teacher_forced(
                model, ctx_ids, resp_ids, pair_index=pair.pair_index
            )
            if indicator in ("scaled_attention", "gradient"):
                backward_scaled_attention(output)
        positions, scores = score_pair(
            output, indicator, ctx_positions, resp_positions, rng=rng
        )
        if positions:
            matrix.add_row(pair.pair_index, positions, scores)
    return matrix


def _clamp_k(k: int, available: int) -> int:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > available:
        log.warning("k=%d exceeds the %d rated positions; clamping", k, available)
        return available
    return k


def _to_anchor_set(selected, means) -> AnchorSet:
    positions = sorted(selected)
    return AnchorSet(positions=positions, scores=[means[p] for p in positions])


def aggregate_average(matrix: TokenScoreMatrix, k: int) -> AnchorSet:
    """Mean of each token's ratings; top-k means win, earlier position on ties."""
    means = matrix.mean_scores()
    k = _clamp_k(k, len(means))
    ranked = sorted(means, key=lambda p: (-means[p], p))
    return _to_anchor_set(ranked[:k], means)


def aggregate_multiview_vote(matrix: TokenScoreMatrix, k: int) -> AnchorSet:
    """Each pair nominates its top-ceil(k/P) tokens; the deduplicated union is
    trimmed by weakest max-nomination or padded by best mean score to k."""
    if matrix.n_pairs == 0:
        raise ValueError("no rated pairs")
    means = matrix.mean_scores()
    k = _clamp_k(k, len(means))
    quota = math.ceil(k / matrix.n_pairs)
    nominated: dict[int, float] = {}
    for pair_index in sorted(matrix.rows):
        row = sorted(matrix.rows[pair_index], key=lambda ps: (-ps[1], ps[0]))
        for pos, score in row[:quota]:
            if pos not in nominated or score > nominated[pos]:
                nominated[pos] = score
    members = sorted(nominated, key=lambda p: (-nominated[p], p))
    if len(members) > k:
        members = members[:k]
    elif len(members) < k:
        pool = sorted(
            (p for p in means if p not in nominated),
            key=lambda p: (-means[p], p),
        )
        members.extend(pool[: k - len(members)])
    return _to_anchor_set(members, means)


def select_anchors(transcript, model: Seq2SeqModel, indicator: str = "scaled_attention",
                   aggregation: str = "vote", ratio: float = 0.064,
                   window: int = 8, seed: int = 0) -> AnchorSet:
    """Full scoring pipeline for one transcript: pairs, reconstruction,
    rating, aggregation, with k = max(1, round(ratio * n_tokens))."""
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"anchor ratio must be in (0, 1], got {ratio}")
    if aggregation not in AGGREGATIONS:
        raise ValueError(f"unknown aggregation {aggregation!r}")
    matrix = build_score_matrix(transcript, model, window, indicator, seed=seed)
    k = max(1, round(ratio * transcript.n_tokens))
    agg = aggregate_average if aggregation == "average" else aggregate_multiview_vote
    anchors = agg(matrix, k)
    anchors.ratio = ratio
    anchors.indicator = indicator
    anchors.aggregation = aggregation
    anchors.meeting_id = transcript.meeting_id
    return anchors


# serialization -----------------------------------------------------------
def save_scores(path, entries):
    """entries: iterable of (meeting_id, TokenScoreMatrix). One JSON line per
    rated pair."""
    import os

    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        for meeting_id, matrix in entries:
            for pair_index in sorted(matrix.rows):
                row = matrix.rows[pair_index]
                fh.write(json.dumps({
                    "meeting_id": meeting_id,
                    "pair_index": pair_index,
                    "positions": [p for p, _ in row],
                    "scores": [s for _, s in row],
                }) + "\n")
    os.replace(tmp, path)


def load_scores(path):
    out: dict[str, TokenScoreMatrix] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            matrix = out.setdefault(obj["meeting_id"], TokenScoreMatrix())
            matrix.add_row(obj["pair_index"], obj["positions"], obj["scores"])
    return out


def save_anchors(path, anchor_sets: list[AnchorSet]):
    import os

    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        for a in anchor_sets:
            fh.write(json.dumps(asdict(a)) + "\n")
    os.replace(tmp, path)


def load_anchors(path) -> dict[str, AnchorSet]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                a = AnchorSet(**json.loads(line))
                out[a.meeting_id] = a
    return out
