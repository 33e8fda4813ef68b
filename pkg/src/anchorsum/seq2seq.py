"""Small encoder-decoder transformer with exact attention attribution.

The decoder's last cross-attention layer is the observation point: a forward
pass under teacher forcing retains the post-softmax weight matrices of every
head, and backward_scaled_attention() then produces the exact gradient of the
prediction scalar with respect to each weight. The prediction scalar is the
summed log-probability of the gold response tokens, i.e. the negated
teacher-forcing objective, so its gradients exist for every weight entry.

One model instance must not run forward/backward concurrently with itself;
distinct instances (or per-worker instances sharing copied parameters) are
independent. train() holds exclusive write access to the parameters.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .textproc import BOS_ID

CHECKPOINT_FORMAT = "anchorsum-ckpt-v1"


@dataclass
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 0  # 0 means 4 * d_model
    max_positions: int = 2048
    seed: int = 0

    def __post_init__(self):
        if self.d_ff == 0:
            self.d_ff = 4 * self.d_model
        if min(self.vocab_size, self.d_model, self.n_layers, self.n_heads,
               self.d_ff, self.max_positions) < 1:
            raise ValueError("all model dimensions must be >= 1")
        if self.d_model % self.n_heads != 0:
            raise ValueError(
                f"d_model={self.d_model} must equal n_heads*d_k "
                f"(n_heads={self.n_heads})"
            )

    @property
    def d_k(self) -> int:
        return self.d_model // self.n_heads


@dataclass
class AttentionTrace:
    layer: int
    head: int
    weights: np.ndarray
    grads: np.ndarray | None = None


@dataclass
class ReconstructionOutput:
    loss: float
    token_losses: np.ndarray
    traces: list[AttentionTrace]
    _loss_node: ad.Tensor = field(repr=False, default=None)
    _y_hat: ad.Tensor = field(repr=False, default=None)
    _a_node: ad.Tensor = field(repr=False, default=None)
    _consumed: bool = field(repr=False, default=False)


def sinusoidal_positions(n: int, d_model: int) -> np.ndarray:
    pe = np.zeros((n, d_model))
    pos = np.arange(n, dtype=np.float64)[:, None]
    idx = np.arange(0, d_model, 2, dtype=np.float64)[None, :]
    angle = pos * np.exp(-np.log(10000.0) * idx / d_model)
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle[:, : d_model // 2])
    return pe


def cross_attention(Q, K, V):
    """Scaled dot-product attention over the trailing two axes.

    Returns (output, weights); weights rows sum to 1 and stay on the tape so
    gradients with respect to them can be captured.
    """
    Q, K, V = ad.as_tensor(Q), ad.as_tensor(K), ad.as_tensor(V)
    if Q.shape[-1] != K.shape[-1]:
        raise ValueError(f"query width {Q.shape[-1]} != key width {K.shape[-1]}")
    if K.shape[-2] != V.shape[-2]:
        raise ValueError(f"{K.shape[-2]} keys vs {V.shape[-2]} values")
    d_k = Q.shape[-1]
    scores = ad.matmul(Q, ad.transpose(K, _swap_last(K.ndim))) * (1.0 / math.sqrt(d_k))
    a = ad.softmax(scores, axis=-1)
    return ad.matmul(a, V), a


def _swap_last(ndim):
    axes = list(range(ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return tuple(axes)


def _causal_mask(n: int) -> np.ndarray:
    mask = np.zeros((n, n))
    mask[np.triu_indices(n, k=1)] = -1e30
    return mask


class Seq2SeqModel:
    """Pre-norm transformer encoder-decoder over token id sequences."""

    def __init__(self, config: ModelConfig):
        self.config = config
        self.params: dict[str, ad.Tensor] = {}
        self._init_params()

    # parameter handling -------------------------------------------------
    def _param(self, name, array):
        t = ad.Tensor(array, requires_grad=True)
        self.params[name] = t
        return t

    def _init_params(self):
        cfg = self.config
        rng = np.random.default_rng(cfg.seed)

        def linear(name, fan_in, fan_out):
            std = 1.0 / math.sqrt(fan_in)
            self._param(f"{name}.w", rng.normal(0.0, std, size=(fan_in, fan_out)))
            self._param(f"{name}.b", np.zeros(fan_out))

        def ln(name):
            self._param(f"{name}.g", np.ones(cfg.d_model))
            self._param(f"{name}.b", np.zeros(cfg.d_model))

        def block(prefix, cross):
            ln(f"{prefix}.ln1")
            for proj in ("wq", "wk", "wv", "wo"):
                linear(f"{prefix}.self.{proj}", cfg.d_model, cfg.d_model)
            if cross:
                ln(f"{prefix}.ln2")
                for proj in ("wq", "wk", "wv", "wo"):
                    linear(f"{prefix}.cross.{proj}", cfg.d_model, cfg.d_model)
            ln(f"{prefix}.ln3")
            linear(f"{prefix}.ffn.fc1", cfg.d_model, cfg.d_ff)
            linear(f"{prefix}.ffn.fc2", cfg.d_ff, cfg.d_model)

        self._param("tok_emb", rng.normal(0.0, 1.0 / math.sqrt(cfg.d_model),
                                          size=(cfg.vocab_size, cfg.d_model)))
        for i in range(cfg.n_layers):
            block(f"enc{i}", cross=False)
        ln("enc.ln_f")
        for i in range(cfg.n_layers):
            block(f"dec{i}", cross=True)
        ln("dec.ln_f")
        linear("out", cfg.d_model, cfg.vocab_size)

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def copy_params_from(self, source: dict[str, np.ndarray]):
        """Overwrite every parameter whose name and shape match the source."""
        copied = 0
        for name, tensor in self.params.items():
            arr = source.get(name)
            if arr is not None and arr.shape == tensor.data.shape:
                tensor.data = np.array(arr, dtype=np.float64)
                copied += 1
        return copied

    # building blocks ----------------------------------------------------
    def _split_heads(self, x):
        n = x.shape[0]
        cfg = self.config
        return ad.transpose(ad.reshape(x, (n, cfg.n_heads, cfg.d_k)), (1, 0, 2))

    def _merge_heads(self, x):
        n = x.shape[1]
        return ad.reshape(ad.transpose(x, (1, 0, 2)), (n, self.config.d_model))

    def _attend(self, prefix, x, memory, mask=None, override=None):
        """Multi-head attention sublayer. Returns (output, weights node)."""
        p = self.params
        q = ad.matmul(x, p[f"{prefix}.wq.w"]) + p[f"{prefix}.wq.b"]
        k = ad.matmul(memory, p[f"{prefix}.wk.w"]) + p[f"{prefix}.wk.b"]
        v = ad.matmul(memory, p[f"{prefix}.wv.w"]) + p[f"{prefix}.wv.b"]
        Q, K, V = self._split_heads(q), self._split_heads(k), self._split_heads(v)
        scores = ad.matmul(Q, ad.transpose(K, (0, 2, 1))) * (1.0 / math.sqrt(self.config.d_k))
        if mask is not None:
            scores = scores + ad.Tensor(mask)
        a = ad.softmax(scores, axis=-1)
        if override is not None:
            a = ad.Tensor(override)
        ctx = self._merge_heads(ad.matmul(a, V))
        out = ad.matmul(ctx, p[f"{prefix}.wo.w"]) + p[f"{prefix}.wo.b"]
        return out, a

    def _ffn(self, prefix, x):
        p = self.params
        h = ad.relu(ad.matmul(x, p[f"{prefix}.fc1.w"]) + p[f"{prefix}.fc1.b"])
        return ad.matmul(h, p[f"{prefix}.fc2.w"]) + p[f"{prefix}.fc2.b"]

    def _ln(self, prefix, x):
        p = self.params
        return ad.layer_norm(x, p[f"{prefix}.g"], p[f"{prefix}.b"])

    # forward passes -----------------------------------------------------
    def embed(self, ids, with_positions=True):
        """Token embeddings scaled by sqrt(d_model) so content is not swamped
        by the positional signal; positional encodings are added (and the
        position budget enforced) unless the caller compresses first."""
        ids = np.asarray(ids, dtype=np.int64)
        x = ad.embedding(self.params["tok_emb"], ids) * math.sqrt(self.config.d_model)
        if with_positions:
            if ids.shape[0] > self.config.max_positions:
                raise ValueError(
                    f"sequence length {ids.shape[0]} exceeds max_positions "
                    f"{self.config.max_positions}"
                )
            x = x + ad.Tensor(sinusoidal_positions(ids.shape[0], self.config.d_model))
        return x

    def encode_states(self, x):
        """Encoder stack on prepared embeddings (positions already added)."""
        for i in range(self.config.n_layers):
            normed = self._ln(f"enc{i}.ln1", x)
            attn, _ = self._attend(f"enc{i}.self", normed, normed)
            x = x + attn
            x = x + self._ffn(f"enc{i}.ffn", self._ln(f"enc{i}.ln3", x))
        return self._ln("enc.ln_f", x)

    def encode(self, ids):
        return self.encode_states(self.embed(ids))

    def decode(self, enc_out, dec_ids, cross_override=None):
        """Decoder stack; returns (logits, last-layer cross-attention node)."""
        x = self.embed(dec_ids)
        n = x.shape[0]
        mask = _causal_mask(n)
        last_a = None
        for i in range(self.config.n_layers):
            normed = self._ln(f"dec{i}.ln1", x)
            attn, _ = self._attend(f"dec{i}.self", normed, normed, mask=mask)
            x = x + attn
            is_last = i == self.config.n_layers - 1
            attn, a = self._attend(
                f"dec{i}.cross", self._ln(f"dec{i}.ln2", x), enc_out,
                override=cross_override if is_last else None,
            )
            if is_last:
                last_a = a
            x = x + attn
            x = x + self._ffn(f"dec{i}.ffn", self._ln(f"dec{i}.ln3", x))
        x = self._ln("dec.ln_f", x)
        logits = ad.matmul(x, self.params["out.w"]) + self.params["out.b"]
        return logits, last_a


def forward_teacher_forced(model: Seq2SeqModel, context_ids, response_ids,
                           pair_index=None, cross_override=None) -> ReconstructionOutput:
    """Teacher-forced reconstruction of one context-response pair.

    The decoder consumes the gold response shifted right behind a BOS marker.
    cross_override, when given, replaces the last layer's post-softmax
    cross-attention weights with a constant [n_heads, resp_len, ctx_len]
    array (used by finite-difference checks).
    """
    if len(response_ids) < 1 or len(context_ids) < 1:
        raise ValueError(f"pair {pair_index}: empty context or response")
    limit = model.config.max_positions
    if len(context_ids) > limit or len(response_ids) > limit:
        raise ValueError(
            f"pair {pair_index}: input too long "
            f"({len(context_ids)} context / {len(response_ids)} response tokens, "
            f"max_positions={limit})"
        )
    enc_out = model.encode(context_ids)
    dec_in = [BOS_ID] + list(response_ids[:-1])
    logits, a = model.decode(enc_out, dec_in, cross_override=cross_override)
    nll = ad.token_nll(logits, response_ids)
    loss = ad.tmean(nll)
    y_hat = ad.tsum(nll) * -1.0
    n_heads = model.config.n_heads
    traces = [
        AttentionTrace(layer=model.config.n_layers - 1, head=h, weights=a.data[h])
        for h in range(n_heads)
    ]
    return ReconstructionOutput(
        loss=float(loss.data),
        token_losses=nll.data.copy(),
        traces=traces,
        _loss_node=loss,
        _y_hat=y_hat,
        _a_node=a,
    )


def backward_scaled_attention(output: ReconstructionOutput) -> np.ndarray:
    """Exact d(prediction scalar)/d(weights) for the retained cross-attention.

    Returns the stacked per-head gradient array and fills each trace's grads.
    """
    if output._y_hat is None or output._consumed:
        raise RuntimeError(
            "no retained forward pass; rerun forward_teacher_forced before "
            "backward_scaled_attention"
        )
    output._consumed = True
    output._y_hat.backward()
    a = output._a_node
    grads = a.grad if a.grad is not None else np.zeros_like(a.data)
    for trace in output.traces:
        trace.grads = grads[trace.head]
    return grads


@dataclass
class TrainResult:
    loss_curve: list  # (step, mean batch loss)

    @property
    def final_loss(self):
        return self.loss_curve[-1][1] if self.loss_curve else float("nan")


class AdamState:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.t = 0

    def step(self, params):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k, p in params.items():
            if p.grad is None:
                continue
            self.m[k] = b1 * self.m[k] + (1 - b1) * p.grad
            self.v[k] = b2 * self.v[k] + (1 - b2) * p.grad * p.grad
            mhat = self.m[k] / (1 - b1 ** self.t)
            vhat = self.v[k] / (1 - b2 ** self.t)
            p.data -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def train(model: Seq2SeqModel, pairs, steps: int, lr: float,
          batch_size: int = 8, seed: int = 0) -> TrainResult:
    """Adam training over (context_ids, response_ids) pairs.

    Deterministic given the seed. Raises on divergence (non-finite loss)
    with the step number in the message. steps=0 leaves parameters unchanged.
    """
    if not pairs:
        raise ValueError("empty training pair set")
    rng = np.random.default_rng(seed)
    opt = AdamState(model.params, lr)
    curve = []
    for step in range(steps):
        batch = rng.integers(0, len(pairs), size=min(batch_size, len(pairs)))
        model.zero_grad()
        batch_loss = 0.0
        for j in batch:
            ctx, resp = pairs[j]
            out = forward_teacher_forced(model, ctx, resp, pair_index=int(j))
            out._loss_node.backward()
            batch_loss += out.loss
        batch_loss /= len(batch)
        if not math.isfinite(batch_loss):
            tail = [f"{s}:{l:.4f}" for s, l in curve[-5:]]
            raise RuntimeError(
                f"training diverged at step {step} (loss={batch_loss}); "
                f"recent losses: {tail}; lower the learning rate (lr={lr})"
            )
        for p in model.params.values():
            if p.grad is not None:
                p.grad /= len(batch)
        opt.step(model.params)
        curve.append((step, batch_loss))
    return TrainResult(loss_curve=curve)


# checkpoints ------------------------------------------------------------
def save_checkpoint(path, model: Seq2SeqModel, step: int = 0, extra: dict | None = None):
    """Versioned binary container: JSON header + one array per parameter."""
    header = {
        "format": CHECKPOINT_FORMAT,
        "config": asdict(model.config),
        "seed": model.config.seed,
        "step": step,
    }
    if extra:
        header.update(extra)
    arrays = {f"param:{k}": p.data for k, p in model.params.items()}
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        np.savez(fh, __header__=np.frombuffer(
            json.dumps(header).encode("utf-8"), dtype=np.uint8), **arrays)
    os.replace(tmp, path)


def load_checkpoint(path):
    """Returns (model, header dict)."""
    with np.load(path) as payload:
        header = json.loads(bytes(payload["__header__"]).decode("utf-8"))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format in {path}")
        model = Seq2SeqModel(ModelConfig(**header["config"]))
        source = {k[len("param:"):]: payload[k] for k in payload.files
                  if k.startswith("param:")}
    copied = model.copy_params_from(source)
    if copied != len(model.params):
        raise ValueError(
            f"checkpoint {path} restored {copied}/{len(model.params)} parameters"
        )
    return model, header


def save_loss_curve(path, curve):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("step,loss\n")
        for step, loss in curve:
            fh.write(f"{step},{loss:.10f}\n")
    os.replace(tmp, path)
