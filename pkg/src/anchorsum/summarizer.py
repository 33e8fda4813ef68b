"""Summarization over compressed inputs.

The only change to the plain backbone is a compression stage between the
embedding layer and the first attention layer: all n token embeddings are
pooled into min(c, n) buckets around the anchors, fresh positional encodings
0..n_buckets-1 are added to the pooled rows, and the encoder runs on the
compressed sequence. With an all-singleton assignment (n <= c) the stack is
numerically identical to the plain backbone.

Generation with a shared parameter snapshot is read-only; training holds
exclusive write access to the parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from . import autodiff as ad
from .bucketing import BucketAssignment, assign_buckets
from .seq2seq import (AdamState, ModelConfig, Seq2SeqModel, TrainResult,
                      sinusoidal_positions)
from .textproc import BOS_ID, EOS_ID


@dataclass
class SummarizerConfig:
    backbone: ModelConfig
    bucket_budget: int = 1024
    init_from_reconstructor: bool = False

    def __post_init__(self):
        if self.bucket_budget > self.backbone.max_positions:
            raise ValueError(
                f"bucket budget {self.bucket_budget} exceeds the backbone's "
                f"max_positions {self.backbone.max_positions}"
            )


@dataclass
class SummarySample:
    """One training/eval item: full input token ids, that transcript's anchor
    positions (None triggers the uniform fallback), and the gold summary ids
    (EOS-terminated)."""

    input_ids: list
    anchor_positions: list | None
    target_ids: list
    meeting_id: str = ""


class Summarizer:
    """Encoder-decoder over RPB-compressed inputs (or plain inputs when
    compress=False, the truncation baselines' path)."""

    def __init__(self, config: SummarizerConfig, compress: bool = True,
                 reconstructor_params: dict | None = None):
        self.config = config
        self.compress = compress
        self.model = Seq2SeqModel(config.backbone)
        if config.init_from_reconstructor and reconstructor_params is not None:
            self.model.copy_params_from(reconstructor_params)

    def encode_compressed(self, input_ids, anchor_positions):
        """Embed all n tokens, pool into buckets, re-position, encode.

        Returns (encoder states, BucketAssignment).
        """
        n = len(input_ids)
        assignment = assign_buckets(
            n, anchor_positions or [], self.config.bucket_budget
        )
        emb = self.model.embed(input_ids, with_positions=False)
        pooled = ad.segment_mean(
            emb, assignment.bucket_of, assignment.n_buckets, kernels.pool_contiguous
        )
        x = pooled + ad.Tensor(
            sinusoidal_positions(assignment.n_buckets, self.config.backbone.d_model)
        )
        return self.model.encode_states(x), assignment

    def encode_plain(self, input_ids):
        return self.model.encode(input_ids), None

    def encode(self, sample: SummarySample):
        if self.compress:
            return self.encode_compressed(sample.input_ids, sample.anchor_positions)
        return self.encode_plain(sample.input_ids)

    def forward_loss(self, sample: SummarySample):
        """Teacher-forced loss node on the gold summary."""
        enc_out, assignment = self.encode(sample)
        dec_in = [BOS_ID] + list(sample.target_ids[:-1])
        logits, _ = self.model.decode(enc_out, dec_in)
        nll = ad.token_nll(logits, sample.target_ids)
        return ad.tmean(nll), assignment

    def generate(self, input_ids, anchor_positions=None, max_len: int = 32):
        """Greedy decoding until the end token or max_len."""
        out: list[int] = []
        if max_len < 1:
            return out
        with ad.no_grad():
            if self.compress:
                enc_out, _ = self.encode_compressed(input_ids, anchor_positions)
            else:
                enc_out, _ = self.encode_plain(input_ids)
            for _ in range(max_len):
                dec_in = [BOS_ID] + out
                logits, _ = self.model.decode(enc_out, dec_in)
                nxt = int(np.argmax(logits.data[-1]))
                if nxt == EOS_ID:
                    break
                out.append(nxt)
        return out


def train_summarizer(summ: Summarizer, samples: list[SummarySample], steps: int,
                     lr: float, batch_size: int = 8, seed: int = 0) -> TrainResult:
    """Adam over teacher-forced summary loss; deterministic given the seed."""
    if not samples:
        raise ValueError("empty summarization corpus")
    rng = np.random.default_rng(seed)
    opt = AdamState(summ.model.params, lr)
    curve = []
    for step in range(steps):
        batch = rng.integers(0, len(samples), size=min(batch_size, len(samples)))
        summ.model.zero_grad()
        batch_loss = 0.0
        for j in batch:
            loss, _ = summ.forward_loss(samples[j])
            loss.backward()
            batch_loss += float(loss.data)
        batch_loss /= len(batch)
        if not math.isfinite(batch_loss):
            raise RuntimeError(
                f"summarizer training diverged at step {step}; lower lr (lr={lr})"
            )
        for p in summ.model.params.values():
            if p.grad is not None:
                p.grad /= len(batch)
        opt.step(summ.model.params)
        curve.append((step, batch_loss))
    return TrainResult(loss_curve=curve)
