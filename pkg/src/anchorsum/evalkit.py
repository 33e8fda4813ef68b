"""Evaluation harness: ROUGE, anchor ablations, truncation baselines, anchor
ratio sweeps, heatmap export, and the complexity benchmark.

Evaluation runs are independent per meeting and per setting; report rows are
emitted in a stable order (meeting id, then setting) so reruns with the same
seeds are byte-identical. Timing data never enters pipeline reports, only the
bench report and its sidecar.
"""

from __future__ import annotations

import copy
import json
import math
import os
import platform
import re
import time
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from . import autodiff as ad
from .scoring import AnchorSet
from .seq2seq import Seq2SeqModel, cross_attention, forward_teacher_forced

_WORD = re.compile(r"[a-z0-9]+")
_SENT_SPLIT = re.compile(r"[.!?\n]+")

TRUNCATION_SIDES = ("left", "right", "middle", "random", "hard_anchor")
HARD_ANCHOR_FRACTION = 0.3
HIGH_FREQUENCY_POOL = 50


# ROUGE --------------------------------------------------------------------
@dataclass
class RougeScore:
    r1: float
    r2: float
    rl: float
    with_sentence_split: bool = False


def _metric_tokens(text: str) -> list[str]:
    return _WORD.findall(text.lower())


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _f1(match: float, n_cand: int, n_ref: int) -> float:
    if match == 0 or n_cand == 0 or n_ref == 0:
        return 0.0
    p, r = match / n_cand, match / n_ref
    return 2 * p * r / (p + r)


def rouge_n_f1(cand_tokens, ref_tokens, n: int) -> float:
    cand, ref = _ngrams(cand_tokens, n), _ngrams(ref_tokens, n)
    match = sum(min(c, ref[g]) for g, c in cand.items())
    return _f1(match, sum(cand.values()), sum(ref.values()))


def _lcs_table(a, b):
    dp = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a)):
        for j in range(len(b)):
            if a[i] == b[j]:
                dp[i + 1][j + 1] = dp[i][j] + 1
            else:
                dp[i + 1][j + 1] = max(dp[i][j + 1], dp[i + 1][j])
    return dp


def lcs_len(a, b) -> int:
    return _lcs_table(a, b)[-1][-1]


def _lcs_candidate_positions(ref_tokens, cand_tokens) -> set[int]:
    """Candidate indices matched by one (deterministic) LCS backtrace."""
    dp = _lcs_table(ref_tokens, cand_tokens)
    i, j, hits = len(ref_tokens), len(cand_tokens), set()
    while i > 0 and j > 0:
        if ref_tokens[i - 1] == cand_tokens[j - 1] and dp[i][j] == dp[i - 1][j - 1] + 1:
            hits.add(j - 1)
            i -= 1
            j -= 1
        elif dp[i - 1][j] >= dp[i][j - 1]:
            i -= 1
        else:
            j -= 1
    return hits


def rouge_l_f1(cand_tokens, ref_tokens) -> float:
    return _f1(lcs_len(cand_tokens, ref_tokens), len(cand_tokens), len(ref_tokens))


def _rouge_l_split(candidate: str, reference: str) -> float:
    """Summary-level LCS: per reference sentence, union the candidate
    positions its LCS hits; the union size is the match count."""
    cand_tokens = _metric_tokens(candidate)
    ref_sentences = [
        _metric_tokens(s) for s in _SENT_SPLIT.split(reference) if _metric_tokens(s)
    ]
    ref_total = sum(len(s) for s in ref_sentences)
    matched: set[int] = set()
    for sent in ref_sentences:
        matched |= _lcs_candidate_positions(sent, cand_tokens)
    return _f1(len(matched), len(cand_tokens), ref_total)


def rouge(candidate: str, reference: str, sentence_split: bool = False) -> RougeScore:
    """ROUGE-1/2 (clipped n-gram F1) and ROUGE-L (LCS F1, beta=1).

    No stemming or stopword removal. Raises on an empty reference; an empty
    candidate scores zero.
    """
    ref_tokens = _metric_tokens(reference)
    if not ref_tokens:
        raise ValueError("empty reference summary")
    cand_tokens = _metric_tokens(candidate)
    rl = (
        _rouge_l_split(candidate, reference)
        if sentence_split
        else rouge_l_f1(cand_tokens, ref_tokens)
    )
    return RougeScore(
        r1=rouge_n_f1(cand_tokens, ref_tokens, 1),
        r2=rouge_n_f1(cand_tokens, ref_tokens, 2),
        rl=rl,
        with_sentence_split=sentence_split,
    )


# anchor ablations -----------------------------------------------------------
@dataclass
class AblationSpec:
    kind: str  # "substitution" | "deletion"
    variant: str  # "random" | "high_frequency" | "sorted_fraction"
    ratio: float = 0.0
    window: tuple[float, float] | None = None  # sorted-fraction lo..hi in [0,1]
    seed: int = 0

    def label(self) -> str:
        if self.variant == "sorted_fraction":
            lo, hi = self.window
            return f"deletion_sorted_{int(lo * 100)}_{int(hi * 100)}"
        return f"{self.kind}_{self.variant}_{int(self.ratio * 100)}"


def corpus_token_counts(transcripts) -> Counter:
    counts = Counter()
    for t in transcripts:
        counts.update(t.flat_tokens())
    return counts


def _set_flat_token(transcript, position: int, token_id: int):
    for s in transcript.sentences:
        lo, hi = s.token_span
        if lo <= position < hi:
            s.tokens[position - lo] = token_id
            return
    raise IndexError(f"flat position {position} outside the transcript")


def _pick_different(rng, pool, current):
    for _ in range(64):
        cand = int(pool[rng.integers(0, len(pool))])
        if cand != current:
            return cand
    for cand in pool:  # degenerate pool; keep determinism
        if int(cand) != current:
            return int(cand)
    return current


def ablate_anchors(transcript, anchors: AnchorSet, spec: AblationSpec,
                   token_counts: Counter | None = None):
    """Apply one substitution/deletion setting; returns new (transcript,
    anchors) without touching the inputs.

    Substitution rewrites ceil(ratio*|anchors|) anchor token ids in the
    transcript (always to a different id); deletion removes anchors from the
    set. sorted_fraction removes descending-score indices
    [floor(lo*N), ceil(hi*N)).
    """
    rng = np.random.default_rng(spec.seed)
    n_anchors = len(anchors)
    if spec.kind == "substitution":
        count = math.ceil(spec.ratio * n_anchors)
        chosen = sorted(rng.choice(n_anchors, size=count, replace=False).tolist())
        new_t = copy.deepcopy(transcript)
        flat = transcript.flat_tokens()
        if spec.variant == "random":
            pool = flat
        elif spec.variant == "high_frequency":
            if token_counts is None:
                raise ValueError("high_frequency substitution needs corpus token counts")
            from .textproc import RESERVED_TOKENS
            pool = [
                tok for tok, _ in token_counts.most_common()
                if tok >= len(RESERVED_TOKENS)
            ][:HIGH_FREQUENCY_POOL]
        else:
            raise ValueError(f"unknown substitution variant {spec.variant!r}")
        for idx in chosen:
            pos = anchors.positions[idx]
            _set_flat_token(new_t, pos, _pick_different(rng, pool, flat[pos]))
        return new_t, anchors
    if spec.kind == "deletion":
        if spec.variant == "random":
            count = math.ceil(spec.ratio * n_anchors)
            drop = set(rng.choice(n_anchors, size=count, replace=False).tolist())
        elif spec.variant == "sorted_fraction":
            lo, hi = spec.window
            if not (0.0 <= lo < hi <= 1.0):
                raise ValueError(f"fraction window {spec.window} outside [0, 1]")
            order = sorted(
                range(n_anchors),
                key=lambda i: (-anchors.scores[i], anchors.positions[i]),
            )
            drop = set(order[math.floor(lo * n_anchors): math.ceil(hi * n_anchors)])
        else:
            raise ValueError(f"unknown deletion variant {spec.variant!r}")
        kept = [i for i in range(n_anchors) if i not in drop]
        new_anchors = AnchorSet(
            positions=[anchors.positions[i] for i in kept],
            scores=[anchors.scores[i] for i in kept],
            ratio=anchors.ratio, indicator=anchors.indicator,
            aggregation=anchors.aggregation, meeting_id=anchors.meeting_id,
        )
        return transcript, new_anchors
    raise ValueError(f"unknown ablation kind {spec.kind!r}")


# truncation -----------------------------------------------------------------
def truncate_input(token_ids, limit: int, side: str,
                   anchors: AnchorSet | None = None, seed: int = 0):
    """Positional truncations keep min(limit, n) tokens; hard_anchor keeps the
    top-30% anchors by score, in position order. Returns (ids, positions)."""
    if limit < 1:
        raise ValueError(f"truncation limit must be >= 1, got {limit}")
    if side not in TRUNCATION_SIDES:
        raise ValueError(f"unknown truncation side {side!r}")
    n = len(token_ids)
    if side == "hard_anchor":
        if anchors is None:
            raise ValueError("hard_anchor truncation needs an anchor set")
        keep_n = math.floor(HARD_ANCHOR_FRACTION * len(anchors))
        order = sorted(
            range(len(anchors)),
            key=lambda i: (-anchors.scores[i], anchors.positions[i]),
        )[:keep_n]
        positions = sorted(anchors.positions[i] for i in order)
    elif n <= limit:
        positions = list(range(n))
    elif side == "right":
        positions = list(range(limit))
    elif side == "left":
        positions = list(range(n - limit, n))
    elif side == "middle":
        head = math.ceil(limit / 2)
        positions = list(range(head)) + list(range(n - (limit - head), n))
    else:  # random contiguous window
        offset = int(np.random.default_rng(seed).integers(0, n - limit + 1))
        positions = list(range(offset, offset + limit))
    return [token_ids[p] for p in positions], positions


# heatmap --------------------------------------------------------------------
def pair_heatmap(output, indicator: str) -> np.ndarray:
    """[response x context] score matrix, reduced over heads only."""
    weights = np.stack([t.weights for t in output.traces])
    if indicator == "attention":
        return weights.sum(axis=0)
    grads = np.stack([t.grads for t in output.traces])
    if indicator == "gradient":
        return grads.sum(axis=0)
    if indicator == "scaled_attention":
        return (weights * grads).sum(axis=0)
    raise ValueError(f"heatmaps exist for attention-family indicators, not {indicator!r}")


def export_heatmap(path, response_tokens: list[str], context_tokens: list[str],
                   scores: np.ndarray):
    """CSV rows (response_token, context_token, score), one per matrix cell."""
    if scores.shape != (len(response_tokens), len(context_tokens)):
        raise ValueError(
            f"score matrix {scores.shape} does not match "
            f"{len(response_tokens)}x{len(context_tokens)} tokens"
        )
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("response_token,context_token,score\n")
        for i, rt in enumerate(response_tokens):
            for j, ct in enumerate(context_tokens):
                fh.write(f"{rt},{ct},{scores[i, j]:.10g}\n")
    os.replace(tmp, path)


# evaluation and sweeps ---------------------------------------------------------
def evaluate_summaries(generated: dict[str, str], gold: dict[str, str],
                       sentence_split: bool = False):
    """Per-meeting ROUGE rows (meeting_id, r1, r2, rl) plus the mean row."""
    rows = []
    for meeting_id in sorted(gold):
        if meeting_id not in generated:
            raise KeyError(f"no generated summary for meeting {meeting_id}")
        score = rouge(generated[meeting_id], gold[meeting_id], sentence_split)
        rows.append((meeting_id, score.r1, score.r2, score.rl))
    if not rows:
        raise ValueError("nothing to evaluate")
    means = [float(np.mean([r[i] for r in rows])) for i in (1, 2, 3)]
    rows.append(("MEAN", *means))
    return rows


def planted_recall(anchors: AnchorSet, planted_positions) -> float:
    planted = set(planted_positions)
    if not planted:
        return 0.0
    return len(planted & set(anchors.positions)) / len(planted)


def sweep_anchor_ratio(transcripts, gold, recon_model, summarizer, vocab,
                       ratios, indicators, window: int = 8, seed: int = 0,
                       plants: dict | None = None, max_len: int = 32):
    """One row per (ratio, indicator): anchors are re-selected at that setting
    and the trained summarizer is re-evaluated (no retraining; the sidecar of
    the sweep report flags the protocol). Rows: ratio, indicator, mean r1,
    mean r2, mean rl, mean planted-token recall (-1 when no plant metadata).
    """
    from .scoring import select_anchors
    from .textproc import detokenize

    rows = []
    for ratio in ratios:
        for indicator in indicators:
            scores, recalls = [], []
            for t in transcripts:
                anchors = select_anchors(
                    t, recon_model, indicator=indicator, aggregation="vote",
                    ratio=ratio, window=window, seed=seed,
                )
                summary_ids = summarizer.generate(
                    t.flat_tokens(), anchors.positions, max_len=max_len
                )
                score = rouge(detokenize(summary_ids, vocab), gold[t.meeting_id])
                scores.append((score.r1, score.r2, score.rl))
                if plants is not None:
                    recalls.append(planted_recall(anchors, plants[t.meeting_id]))
            means = [float(np.mean([s[i] for s in scores])) for i in range(3)]
            recall = float(np.mean(recalls)) if recalls else -1.0
            rows.append((ratio, indicator, *means, recall))
    return rows


# complexity benchmark ---------------------------------------------------------
def _time_call(fn, repeats: int):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), times


def fit_power_law(ns, ts) -> float:
    """Least-squares exponent of t ~ n^k on a log-log scale."""
    return float(np.polyfit(np.log(np.asarray(ns, dtype=float)),
                            np.log(np.asarray(ts, dtype=float)), 1)[0])


def benchmark_complexity(vocab_size: int = 64, d_model: int = 32,
                         sizes=(512, 1024, 2048, 4096), c: int = 512,
                         attention_sizes=(192, 256, 384, 512),
                         recon_pairs: int = 8, context_len: int = 128,
                         repeats: int = 5, seed: int = 0):
    """Wall-clock of (a) reconstruction over r pairs, (b) the compressed
    encoder at fixed c for growing n (attention stage timed separately from
    the linear embed+pool stage), and (c) a raw attention forward at length n.

    The exponent fit uses attention_sizes, which should stay inside the
    machine's cache-friendly range: once the n x n weight matrix spills out of
    cache, per-element cost rises and the fit drifts above the true quadratic.

    Returns (rows, summary) where rows are (stage, n, c, seconds) tuples and
    summary carries the fitted exponents and noise diagnostics.
    """
    from .seq2seq import ModelConfig
    from .summarizer import Summarizer, SummarizerConfig

    rng = np.random.default_rng(seed)
    rows, noisy = [], []
    cfg = ModelConfig(vocab_size=vocab_size, d_model=d_model,
                      max_positions=max(*sizes, *attention_sizes) * 2, seed=seed)

    # (a) reconstruction cost over r pairs
    model = Seq2SeqModel(cfg)
    pairs = [
        (rng.integers(4, vocab_size, size=context_len).tolist(),
         rng.integers(4, vocab_size, size=12).tolist())
        for _ in range(recon_pairs)
    ]

    def run_recon():
        for ctx, resp in pairs:
            out = forward_teacher_forced(model, ctx, resp)
            out._y_hat.backward()

    t, samples = _time_call(run_recon, repeats)
    rows.append(("reconstruction_pairs", recon_pairs * context_len, context_len, t))
    noisy.append(max(samples) / max(t, 1e-12))

    # (b) compressed encoder: pooling stage vs attention stage
    summ = Summarizer(SummarizerConfig(backbone=cfg, bucket_budget=c))
    compressed_attention = {}
    for n in sizes:
        ids = rng.integers(4, vocab_size, size=n).tolist()
        anchor_count = max(1, min(int(0.064 * n), c // 4))
        anchor_positions = np.linspace(0, n - 1, anchor_count).astype(int)
        anchor_positions = sorted(set(anchor_positions.tolist()))
        from .bucketing import assign_buckets
        assignment = assign_buckets(n, anchor_positions, c)
        with ad.no_grad():
            emb = summ.model.embed(ids, with_positions=False)

            def run_pool():
                kernels.pool_contiguous(emb.data, assignment.bucket_of,
                                        assignment.n_buckets)

            t_pool, _ = _time_call(run_pool, repeats)
            pooled = kernels.pool_contiguous(emb.data, assignment.bucket_of,
                                             assignment.n_buckets)
            from .seq2seq import sinusoidal_positions
            x = ad.Tensor(pooled + sinusoidal_positions(assignment.n_buckets, d_model))

            def run_enc():
                summ.model.encode_states(x)

            t_enc, samples = _time_call(run_enc, repeats)
        rows.append(("compressed_embed_pool", n, c, t_pool))
        rows.append(("compressed_encoder_attention", n, c, t_enc))
        compressed_attention[n] = t_enc
        noisy.append(max(samples) / max(t_enc, 1e-12))

    # (c) raw attention forward at length n
    attention_times = []
    for n in attention_sizes:
        q = rng.standard_normal((n, d_model))
        k = rng.standard_normal((n, d_model))
        v = rng.standard_normal((n, d_model))
        with ad.no_grad():

            def run_attn():
                cross_attention(ad.Tensor(q), ad.Tensor(k), ad.Tensor(v))

            t, samples = _time_call(run_attn, repeats)
        rows.append(("uncompressed_attention", n, 0, t))
        attention_times.append(t)
        noisy.append(max(samples) / max(t, 1e-12))

    doubling = [
        compressed_attention[b] / compressed_attention[a]
        for a, b in zip(sizes[:-1], sizes[1:])
        if b == 2 * a and compressed_attention[a] > 0
    ]
    summary = {
        "attention_exponent": fit_power_law(attention_sizes, attention_times),
        "compressed_attention_doubling_ratios": doubling,
        "sizes": list(sizes),
        "attention_sizes": list(attention_sizes),
        "bucket_budget": c,
        "d_model": d_model,
        "repeats": repeats,
        "max_noise_ratio": max(noisy),
        "machine": machine_descriptor(),
    }
    if summary["max_noise_ratio"] > 3.0:
        summary["advice"] = (
            "timing spread exceeded 3x between repeats; rerun the benchmark "
            "on an idle machine"
        )
    return rows, summary


def benchmark_kernels(sizes=(1_000, 10_000, 100_000), d_model: int = 64,
                      repeats: int = 5, seed: int = 0):
    """Compiled-vs-fallback kernel comparison rows (stage, path, n, seconds)."""
    rng = np.random.default_rng(seed)
    rows = []
    for n in sizes:
        rel = rng.integers(-n, n, size=n)
        emb = rng.standard_normal((n, d_model))
        n_buckets = max(2, n // 16)
        bucket_of = np.sort(rng.integers(0, n_buckets, size=n))
        bucket_of = np.unique(bucket_of, return_inverse=True)[1].astype(np.int64)
        occupied = int(bucket_of[-1]) + 1
        for name, impl in kernels.implementations():
            t, _ = _time_call(lambda: impl.bucket_ids(rel, 64, n), repeats)
            rows.append(("kernel_bucket_ids", name, n, t))
            t, _ = _time_call(
                lambda: impl.pool_contiguous(emb, bucket_of, occupied), repeats
            )
            rows.append(("kernel_pool", name, n, t))
    return rows


def machine_descriptor() -> dict:
    return {
        "cpu_count": os.cpu_count(),
        "platform": platform.platform(),
        "python": platform.python_version(),
        "frequency_note": "wall-clock timings; absolute numbers are machine-dependent",
        "compiled_kernels": kernels.HAVE_COMPILED,
    }


# report writing ---------------------------------------------------------------
def write_report(path, header: list[str], rows, sidecar: dict):
    """CSV plus a JSON sidecar (same path with .json); both written atomically.

    Floats are fixed-format so identical runs are byte-identical.
    """

    def fmt(x):
        if isinstance(x, float):
            return f"{x:.6f}"
        return str(x)

    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(x) for x in row) + "\n")
    os.replace(tmp, path)
    sidecar_path = f"{path}.json"
    tmp = f"{sidecar_path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=1, sort_keys=True)
    os.replace(tmp, sidecar_path)
