"""Experiment configuration: flat keys, file plus CLI overrides, content hash.

The hash covers semantic keys only (paths excluded), so reports produced from
the same settings in different directories stay byte-identical. Every report
sidecar embeds the hash, the seed, and the package version string.
"""

from __future__ import annotations

import hashlib
import json
import os
from contextlib import contextmanager

from . import __version__

PATH_KEYS = ("data_dir", "checkpoint_dir", "report_dir")

DEFAULTS = {
    # paths
    "data_dir": "data",
    "checkpoint_dir": "checkpoints",
    "report_dir": "reports",
    # pipeline settings
    "seed": 0,
    "window": 8,
    "anchor_ratio": 0.064,
    "buckets": 1024,
    "indicator": "scaled_attention",
    "aggregation": "vote",
    "prepend_speaker": True,
    "summary_max_len": 32,
    # backbone
    "d_model": 64,
    "n_layers": 2,
    "n_heads": 4,
    "d_ff": 0,
    "max_positions": 4096,
    # reconstructor training
    "recon_steps": 800,
    "recon_lr": 1e-3,
    "recon_batch": 8,
    # summarizer training
    "summ_steps": 2000,
    "summ_lr": 1e-3,
    "summ_batch": 8,
    "init_from_reconstructor": False,
    # synthetic corpus
    "synth_meetings_train": 100,
    "synth_meetings_dev": 20,
    "synth_meetings_test": 20,
    "synth_sentences": 60,
    "synth_filler_vocab": 80,
    "synth_topic_vocab": 24,
    "synth_plants": 4,
    "synth_topics_per_plant": 4,
    "synth_echoes_per_plant": 2,
    "synth_speakers": 4,
}


class ConfigError(ValueError):
    pass


def load_config(path: str | None) -> dict:
    """Defaults overlaid with the flat JSON file at path (if given); unknown
    keys are rejected so typos cannot silently change an experiment."""
    cfg = dict(DEFAULTS)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                overrides = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(overrides, dict):
            raise ConfigError(f"config {path} must be a flat JSON object")
        unknown = sorted(set(overrides) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys in {path}: {unknown}")
        cfg.update(overrides)
    return cfg


def config_hash(cfg: dict) -> str:
    semantic = {k: v for k, v in cfg.items() if k not in PATH_KEYS}
    payload = json.dumps(semantic, sort_keys=True).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:16]


def version_string() -> str:
    return f"anchorsum/{__version__}"


def report_sidecar(cfg: dict, **extra) -> dict:
    sidecar = {
        "config_hash": config_hash(cfg),
        "seed": cfg["seed"],
        "version": version_string(),
    }
    sidecar.update(extra)
    return sidecar


def atomic_write_text(path, text: str):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


class CheckpointLockError(RuntimeError):
    pass


@contextmanager
def checkpoint_lock(directory):
    """Advisory lock: two processes must not share a checkpoint directory."""
    os.makedirs(directory, exist_ok=True)
    lock_path = os.path.join(directory, ".lock")
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise CheckpointLockError(
            f"checkpoint directory {directory} is locked by another run "
            f"(remove {lock_path} if that run is dead)"
        ) from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        try:
            os.unlink(lock_path)
        except OSError:
            pass
