"""Command-line entrypoint orchestrating the pipeline.

Commands: synth-data, preprocess, train-recon, score, compress, train-summ,
generate, evaluate, ablate, sweep, bench, pipeline. Every command echoes its
resolved configuration, writes artifacts atomically (temp file + rename), and
never mutates its inputs. Downstream commands report which command to run
first when an upstream artifact is missing.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import autodiff as ad
from . import bucketing, evalkit, scoring, synthdata, textproc
from .config import (CheckpointLockError, ConfigError, checkpoint_lock,
                     config_hash, load_config, report_sidecar)
from .seq2seq import (ModelConfig, Seq2SeqModel, load_checkpoint,
                      save_checkpoint, save_loss_curve, train)
from .summarizer import (Summarizer, SummarizerConfig, SummarySample,
                         train_summarizer)
from .textproc import EOS_ID, Vocabulary

INPUT_MODES = ("bucketing", "truncate_right", "truncate_left",
               "truncate_middle", "truncate_random", "truncate_hard_anchor")


class PipelineError(RuntimeError):
    pass


# paths and artifact loading -------------------------------------------------
def _data_path(cfg, name):
    return os.path.join(cfg["data_dir"], name)


def _ckpt_path(cfg, name):
    return os.path.join(cfg["checkpoint_dir"], name)


def _report_path(cfg, name):
    return os.path.join(cfg["report_dir"], name)


def _require(path, command):
    if not os.path.exists(path):
        raise PipelineError(f"missing artifact {path}; run `anchorsum {command}` first")
    return path


def _load_vocab(cfg) -> Vocabulary:
    return Vocabulary.from_file(_require(_data_path(cfg, "vocab.json"), "preprocess"))


def _load_corpus(cfg):
    vocab = _load_vocab(cfg)
    transcripts = textproc.load_transcripts(
        _require(_data_path(cfg, "transcripts.jsonl"), "synth-data"),
        vocab, prepend_speaker=cfg["prepend_speaker"],
    )
    split = textproc.load_split_manifest(
        _require(_data_path(cfg, "split.json"), "synth-data")
    )
    return transcripts, split, vocab


def _by_id(transcripts):
    return {t.meeting_id: t for t in transcripts}


def _split_transcripts(transcripts, split, part):
    index = _by_id(transcripts)
    missing = [mid for mid in split[part] if mid not in index]
    if missing:
        raise PipelineError(f"split {part} references unknown meetings: {missing[:3]}")
    return [index[mid] for mid in split[part]]


def _backbone_config(cfg, vocab, seed_offset=0) -> ModelConfig:
    return ModelConfig(
        vocab_size=len(vocab), d_model=cfg["d_model"], n_layers=cfg["n_layers"],
        n_heads=cfg["n_heads"], d_ff=cfg["d_ff"],
        max_positions=cfg["max_positions"], seed=cfg["seed"] + seed_offset,
    )


def _load_recon(cfg):
    model, _ = load_checkpoint(_require(_ckpt_path(cfg, "recon.npz"), "train-recon"))
    return model


def _load_summarizer(cfg, input_mode):
    path = _require(_ckpt_path(cfg, f"summ_{input_mode}.npz"),
                    f"train-summ --input {input_mode}")
    model, header = load_checkpoint(path)
    summ_cfg = SummarizerConfig(backbone=model.config,
                                bucket_budget=header["bucket_budget"])
    summ = Summarizer(summ_cfg, compress=header["compress"])
    summ.model = model
    return summ


def _prepare_input(cfg, transcript, anchors, input_mode, seed=0):
    """Input ids + anchor positions under the chosen input pipeline."""
    ids = transcript.flat_tokens()
    if input_mode == "bucketing":
        return ids, (anchors.positions if anchors is not None else None)
    side = input_mode.removeprefix("truncate_")
    ids, _ = evalkit.truncate_input(ids, cfg["buckets"], side,
                                    anchors=anchors, seed=seed)
    return ids, None


def _summary_samples(cfg, transcripts, gold, anchors_by_id, vocab, input_mode):
    samples = []
    for t in transcripts:
        if t.meeting_id not in gold:
            raise PipelineError(f"no gold summary for meeting {t.meeting_id}")
        anchors = anchors_by_id.get(t.meeting_id) if anchors_by_id else None
        ids, positions = _prepare_input(cfg, t, anchors, input_mode,
                                        seed=cfg["seed"])
        target = vocab.encode(gold[t.meeting_id]) + [EOS_ID]
        samples.append(SummarySample(input_ids=ids, anchor_positions=positions,
                                     target_ids=target, meeting_id=t.meeting_id))
    return samples


def _echo(cfg, command):
    resolved = dict(cfg)
    resolved["command"] = command
    resolved["config_hash"] = config_hash(cfg)
    print(json.dumps(resolved, sort_keys=True))


# commands --------------------------------------------------------------------
def cmd_synth_data(cfg, args):
    spec = synthdata.SynthSpec(
        meetings_train=cfg["synth_meetings_train"],
        meetings_dev=cfg["synth_meetings_dev"],
        meetings_test=cfg["synth_meetings_test"],
        sentences=cfg["synth_sentences"],
        filler_vocab=cfg["synth_filler_vocab"],
        topic_vocab=cfg["synth_topic_vocab"],
        plants=cfg["synth_plants"],
        topics_per_plant=cfg["synth_topics_per_plant"],
        echoes_per_plant=cfg["synth_echoes_per_plant"],
        speakers=cfg["synth_speakers"],
        seed=cfg["seed"],
    )
    meetings, split = synthdata.write_corpus(cfg["data_dir"], spec)
    print(f"wrote {len(meetings)} meetings to {cfg['data_dir']} "
          f"(train/dev/test = {len(split['train'])}/{len(split['dev'])}/{len(split['test'])})")


def cmd_preprocess(cfg, args):
    t_path = _require(_data_path(cfg, "transcripts.jsonl"), "synth-data")
    s_path = _require(_data_path(cfg, "summaries.jsonl"), "synth-data")
    texts = textproc.corpus_texts(t_path, prepend_speaker=cfg["prepend_speaker"])
    texts.extend(textproc.load_summaries(s_path).values())
    vocab = Vocabulary.build(texts)
    vocab.to_file(_data_path(cfg, "vocab.json"))
    transcripts = textproc.load_transcripts(t_path, vocab,
                                            prepend_speaker=cfg["prepend_speaker"])
    n_tokens = [t.n_tokens for t in transcripts]
    print(f"vocabulary: {len(vocab)} tokens; {len(transcripts)} meetings; "
          f"tokens per meeting min/mean/max = "
          f"{min(n_tokens)}/{sum(n_tokens) / len(n_tokens):.1f}/{max(n_tokens)}")


def cmd_train_recon(cfg, args):
    transcripts, split, vocab = _load_corpus(cfg)
    pairs = []
    for t in _split_transcripts(transcripts, split, "train"):
        for pair in textproc.split_pairs(t, cfg["window"]):
            ctx_ids, _ = textproc.pair_context(t, pair)
            resp_ids, _ = textproc.pair_response(t, pair)
            pairs.append((ctx_ids, resp_ids))
    model = Seq2SeqModel(_backbone_config(cfg, vocab))
    with checkpoint_lock(cfg["checkpoint_dir"]):
        result = train(model, pairs, steps=cfg["recon_steps"], lr=cfg["recon_lr"],
                       batch_size=cfg["recon_batch"], seed=cfg["seed"])
        save_checkpoint(_ckpt_path(cfg, "recon.npz"), model,
                        step=cfg["recon_steps"], extra={"role": "reconstructor"})
        save_loss_curve(_ckpt_path(cfg, "recon_loss.csv"), result.loss_curve)
    print(f"reconstructor trained on {len(pairs)} pairs; "
          f"final loss {result.final_loss:.4f}")


def cmd_score(cfg, args):
    transcripts, _, _ = _load_corpus(cfg)
    model = _load_recon(cfg)
    score_rows, anchor_sets = [], []
    for t in transcripts:
        matrix = scoring.build_score_matrix(
            t, model, cfg["window"], cfg["indicator"], seed=cfg["seed"] + 101
        )
        k = max(1, round(cfg["anchor_ratio"] * t.n_tokens))
        agg = (scoring.aggregate_average if cfg["aggregation"] == "average"
               else scoring.aggregate_multiview_vote)
        anchors = agg(matrix, k)
        anchors.ratio = cfg["anchor_ratio"]
        anchors.indicator = cfg["indicator"]
        anchors.aggregation = cfg["aggregation"]
        anchors.meeting_id = t.meeting_id
        score_rows.append((t.meeting_id, matrix))
        anchor_sets.append(anchors)
    scoring.save_scores(_data_path(cfg, "scores.jsonl"), score_rows)
    scoring.save_anchors(_data_path(cfg, "anchors.jsonl"), anchor_sets)
    sizes = [len(a) for a in anchor_sets]
    print(f"scored {len(anchor_sets)} meetings with {cfg['indicator']}; "
          f"anchors per meeting min/max = {min(sizes)}/{max(sizes)}")


def cmd_compress(cfg, args):
    os.makedirs(cfg["report_dir"], exist_ok=True)
    if args.n is not None:
        c = args.c if args.c is not None else cfg["buckets"]
        assignment = bucketing.assign_buckets(args.n, [], c)
        bucketing.save_assignment_csv(_report_path(cfg, "compress_demo.csv"), assignment)
        identity = "yes" if assignment.n_buckets == args.n else "no"
        print(f"n={args.n} c={c} -> {assignment.n_buckets} buckets; "
              f"identity compression: {identity}")
        return
    transcripts, split, _ = _load_corpus(cfg)
    anchors_by_id = scoring.load_anchors(_require(_data_path(cfg, "anchors.jsonl"), "score"))
    model = _load_recon(cfg)
    out_dir = _report_path(cfg, "compress")
    os.makedirs(out_dir, exist_ok=True)
    for t in _split_transcripts(transcripts, split, "test"):
        anchors = anchors_by_id[t.meeting_id]
        ids = t.flat_tokens()
        assignment = bucketing.assign_buckets(len(ids), anchors.positions, cfg["buckets"])
        emb = model.params["tok_emb"].data[np.asarray(ids)]
        comp = bucketing.compress_sequence(emb, assignment)
        bucketing.save_assignment_csv(
            os.path.join(out_dir, f"{t.meeting_id}.csv"), assignment)
        bucketing.save_compressed(
            os.path.join(out_dir, f"{t.meeting_id}.npz"), comp, anchors.positions)
        print(f"{t.meeting_id}: {len(ids)} tokens -> {assignment.n_buckets} buckets")


def cmd_train_summ(cfg, args):
    transcripts, split, vocab = _load_corpus(cfg)
    gold = textproc.load_summaries(_data_path(cfg, "summaries.jsonl"))
    anchors_by_id = None
    if args.input in ("bucketing", "truncate_hard_anchor"):
        anchors_by_id = scoring.load_anchors(
            _require(_data_path(cfg, "anchors.jsonl"), "score"))
    samples = _summary_samples(cfg, _split_transcripts(transcripts, split, "train"),
                               gold, anchors_by_id, vocab, args.input)
    recon_params = None
    if cfg["init_from_reconstructor"]:
        recon_params = {k: p.data for k, p in _load_recon(cfg).params.items()}
    summ_cfg = SummarizerConfig(
        backbone=_backbone_config(cfg, vocab, seed_offset=7),
        bucket_budget=cfg["buckets"],
        init_from_reconstructor=cfg["init_from_reconstructor"],
    )
    summ = Summarizer(summ_cfg, compress=(args.input == "bucketing"),
                      reconstructor_params=recon_params)
    with checkpoint_lock(cfg["checkpoint_dir"]):
        result = train_summarizer(summ, samples, steps=cfg["summ_steps"],
                                  lr=cfg["summ_lr"], batch_size=cfg["summ_batch"],
                                  seed=cfg["seed"] + 202)
        save_checkpoint(
            _ckpt_path(cfg, f"summ_{args.input}.npz"), summ.model,
            step=cfg["summ_steps"],
            extra={"role": "summarizer", "input_mode": args.input,
                   "bucket_budget": cfg["buckets"],
                   "compress": args.input == "bucketing"},
        )
        save_loss_curve(_ckpt_path(cfg, f"summ_{args.input}_loss.csv"),
                        result.loss_curve)
    print(f"summarizer[{args.input}] trained on {len(samples)} meetings; "
          f"final loss {result.final_loss:.4f}")


def _generate_split(cfg, input_mode, part):
    transcripts, split, vocab = _load_corpus(cfg)
    anchors_by_id = {}
    if input_mode in ("bucketing", "truncate_hard_anchor"):
        anchors_by_id = scoring.load_anchors(
            _require(_data_path(cfg, "anchors.jsonl"), "score"))
    summ = _load_summarizer(cfg, input_mode)
    rows = []
    for t in _split_transcripts(transcripts, split, part):
        anchors = anchors_by_id.get(t.meeting_id)
        ids, positions = _prepare_input(cfg, t, anchors, input_mode, seed=cfg["seed"])
        out_ids = summ.generate(ids, positions, max_len=cfg["summary_max_len"])
        if input_mode == "bucketing":
            assignment = bucketing.assign_buckets(
                len(ids), positions or [], cfg["buckets"])
            n_buckets = assignment.n_buckets
        else:
            n_buckets = len(ids)
        rows.append({
            "meeting_id": t.meeting_id,
            "summary": textproc.detokenize(out_ids, vocab),
            "n_tokens_in": t.n_tokens,
            "n_buckets": n_buckets,
        })
    return rows


def cmd_generate(cfg, args):
    rows = _generate_split(cfg, args.input, args.split)
    os.makedirs(cfg["report_dir"], exist_ok=True)
    path = _report_path(cfg, f"summaries_{args.input}_{args.split}.jsonl")
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    os.replace(tmp, path)
    print(f"generated {len(rows)} summaries -> {path}")


def cmd_evaluate(cfg, args):
    gen_path = _require(
        _report_path(cfg, f"summaries_{args.input}_{args.split}.jsonl"),
        f"generate --input {args.input} --split {args.split}",
    )
    generated = {}
    with open(gen_path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                generated[obj["meeting_id"]] = obj["summary"]
    gold = textproc.load_summaries(_data_path(cfg, "summaries.jsonl"))
    gold = {mid: text for mid, text in gold.items() if mid in generated}
    rows = evalkit.evaluate_summaries(generated, gold,
                                      sentence_split=args.sentence_split)
    path = _report_path(cfg, f"rouge_{args.input}_{args.split}.csv")
    evalkit.write_report(
        path, ["meeting_id", "rouge1", "rouge2", "rougeL"], rows,
        report_sidecar(cfg, input_mode=args.input, split=args.split,
                       sentence_split=args.sentence_split),
    )
    mean = rows[-1]
    print(f"ROUGE-1/2/L mean = {mean[1]:.4f}/{mean[2]:.4f}/{mean[3]:.4f} -> {path}")


def _ablation_grid():
    grid = []
    for ratio in (0.25, 0.5, 0.75):
        grid.append(evalkit.AblationSpec("substitution", "random", ratio=ratio))
        grid.append(evalkit.AblationSpec("substitution", "high_frequency", ratio=ratio))
        grid.append(evalkit.AblationSpec("deletion", "random", ratio=ratio))
    for lo, hi in ((0.0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1.0)):
        grid.append(evalkit.AblationSpec("deletion", "sorted_fraction", window=(lo, hi)))
    return grid


def cmd_ablate(cfg, args):
    transcripts, split, vocab = _load_corpus(cfg)
    gold = textproc.load_summaries(_data_path(cfg, "summaries.jsonl"))
    anchors_by_id = scoring.load_anchors(
        _require(_data_path(cfg, "anchors.jsonl"), "score"))
    summ = _load_summarizer(cfg, "bucketing")
    test = _split_transcripts(transcripts, split, args.split)
    counts = evalkit.corpus_token_counts(transcripts)
    grid = _ablation_grid() if args.setting == "all" else [_parse_setting(args)]
    rows = []
    for spec in grid:
        spec.seed = cfg["seed"] + 17
        scores = []
        for t in test:
            new_t, new_anchors = evalkit.ablate_anchors(
                t, anchors_by_id[t.meeting_id], spec, token_counts=counts)
            out_ids = summ.generate(new_t.flat_tokens(), new_anchors.positions,
                                    max_len=cfg["summary_max_len"])
            score = evalkit.rouge(textproc.detokenize(out_ids, vocab),
                                  gold[t.meeting_id])
            scores.append((score.r1, score.r2, score.rl))
        means = [float(np.mean([s[i] for s in scores])) for i in range(3)]
        rows.append((spec.label(), *means))
        print(f"{spec.label()}: ROUGE-1 {means[0]:.4f}")
    path = _report_path(cfg, f"ablation_{args.split}.csv")
    evalkit.write_report(
        path, ["setting", "rouge1", "rouge2", "rougeL"], rows,
        report_sidecar(cfg, split=args.split, protocol="reevaluate"),
    )
    print(f"ablation report -> {path}")


def _parse_setting(args):
    if args.setting.startswith("deletion_sorted"):
        if args.fraction_window is None:
            raise PipelineError("deletion_sorted needs --fraction-window lo-hi (percent)")
        lo, hi = (float(x) / 100 for x in args.fraction_window.split("-"))
        return evalkit.AblationSpec("deletion", "sorted_fraction", window=(lo, hi))
    kind, variant = args.setting.split("_", 1)
    return evalkit.AblationSpec(kind, variant, ratio=args.ratio)


def cmd_sweep(cfg, args):
    transcripts, split, vocab = _load_corpus(cfg)
    gold = textproc.load_summaries(_data_path(cfg, "summaries.jsonl"))
    recon = _load_recon(cfg)
    summ = _load_summarizer(cfg, "bucketing")
    test = _split_transcripts(transcripts, split, args.split)
    plants = None
    plants_path = _data_path(cfg, "plants.jsonl")
    if os.path.exists(plants_path):
        sentence_plants = synthdata.load_plants(plants_path)
        plants = {
            t.meeting_id: synthdata.planted_token_positions(
                t, sentence_plants[t.meeting_id])
            for t in test
        }
    ratios = [float(x) for x in args.ratios.split(",")]
    indicators = args.indicators.split(",")
    rows = evalkit.sweep_anchor_ratio(
        test, gold, recon, summ, vocab, ratios, indicators,
        window=cfg["window"], seed=cfg["seed"] + 101, plants=plants,
        max_len=cfg["summary_max_len"],
    )
    path = _report_path(cfg, f"sweep_{args.split}.csv")
    evalkit.write_report(
        path,
        ["ratio", "indicator", "rouge1", "rouge2", "rougeL", "planted_recall"],
        rows, report_sidecar(cfg, split=args.split, protocol="reevaluate"),
    )
    print(f"sweep report ({len(rows)} rows) -> {path}")


def cmd_bench(cfg, args):
    os.makedirs(cfg["report_dir"], exist_ok=True)
    sizes = tuple(int(x) for x in args.sizes.split(","))
    rows, summary = evalkit.benchmark_complexity(
        d_model=args.bench_d_model, sizes=sizes, c=args.bench_buckets,
        repeats=args.repeats, seed=cfg["seed"],
    )
    path = _report_path(cfg, "bench.csv")
    evalkit.write_report(path, ["stage", "n", "c", "seconds"], rows,
                         report_sidecar(cfg, **summary))
    kernel_rows = evalkit.benchmark_kernels(repeats=args.repeats, seed=cfg["seed"])
    kpath = _report_path(cfg, "bench_kernels.csv")
    evalkit.write_report(kpath, ["stage", "path", "n", "seconds"], kernel_rows,
                         report_sidecar(cfg, machine=evalkit.machine_descriptor()))
    print(f"attention exponent {summary['attention_exponent']:.2f}; "
          f"reports -> {path}, {kpath}")


def cmd_pipeline(cfg, args):
    if not os.path.exists(_data_path(cfg, "transcripts.jsonl")):
        cmd_synth_data(cfg, args)
    cmd_preprocess(cfg, args)
    cmd_train_recon(cfg, args)
    cmd_score(cfg, args)
    ns = argparse.Namespace(input="bucketing", split="test", sentence_split=False)
    cmd_train_summ(cfg, ns)
    cmd_generate(cfg, ns)
    cmd_evaluate(cfg, ns)


# parser ------------------------------------------------------------------------
def build_parser():
    parser = argparse.ArgumentParser(
        prog="anchorsum",
        description="anchor-guided compression and summarization pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="flat JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--window", type=int, default=None)
        p.add_argument("--anchor-ratio", type=float, default=None)
        p.add_argument("--buckets", type=int, default=None)
        p.add_argument("--indicator", choices=scoring.INDICATORS, default=None)
        p.add_argument("--aggregation", choices=scoring.AGGREGATIONS, default=None)
        p.add_argument("--out", default=None, help="override the report directory")
        return p

    common(sub.add_parser("synth-data", help="generate the planted-saliency corpus"))
    common(sub.add_parser("preprocess", help="clean, tokenize, build the vocabulary"))
    common(sub.add_parser("train-recon", help="train the reconstructor"))
    common(sub.add_parser("score", help="score tokens and select anchors"))

    p = common(sub.add_parser("compress", help="dump bucket assignments"))
    p.add_argument("--n", type=int, default=None, help="structural demo size")
    p.add_argument("--c", type=int, default=None, help="demo bucket budget")

    p = common(sub.add_parser("train-summ", help="train a summarizer"))
    p.add_argument("--input", choices=INPUT_MODES, default="bucketing")

    p = common(sub.add_parser("generate", help="greedy-decode summaries"))
    p.add_argument("--input", choices=INPUT_MODES, default="bucketing")
    p.add_argument("--split", choices=("train", "dev", "test"), default="test")

    p = common(sub.add_parser("evaluate", help="ROUGE against gold summaries"))
    p.add_argument("--input", choices=INPUT_MODES, default="bucketing")
    p.add_argument("--split", choices=("train", "dev", "test"), default="test")
    p.add_argument("--sentence-split", action="store_true")

    p = common(sub.add_parser("ablate", help="anchor substitution/deletion study"))
    p.add_argument("--setting", default="all",
                   help="all | substitution_random | substitution_high_frequency "
                        "| deletion_random | deletion_sorted")
    p.add_argument("--ratio", type=float, default=0.25)
    p.add_argument("--fraction-window", default=None,
                   help="sorted-fraction window, e.g. 0-25 (percent)")
    p.add_argument("--split", choices=("train", "dev", "test"), default="test")

    p = common(sub.add_parser("sweep", help="anchor-ratio sweep"))
    p.add_argument("--ratios", default="0.016,0.032,0.064,0.128")
    p.add_argument("--indicators", default="scaled_attention,random")
    p.add_argument("--split", choices=("train", "dev", "test"), default="test")

    p = common(sub.add_parser("bench", help="complexity and kernel benchmarks"))
    p.add_argument("--sizes", default="512,1024,2048,4096")
    p.add_argument("--bench-buckets", type=int, default=512)
    p.add_argument("--bench-d-model", type=int, default=32)
    p.add_argument("--repeats", type=int, default=5)

    common(sub.add_parser("pipeline", help="run the full pipeline end to end"))
    return parser


_OVERRIDES = {
    "seed": "seed",
    "window": "window",
    "anchor_ratio": "anchor_ratio",
    "buckets": "buckets",
    "indicator": "indicator",
    "aggregation": "aggregation",
}

COMMANDS = {
    "synth-data": cmd_synth_data,
    "preprocess": cmd_preprocess,
    "train-recon": cmd_train_recon,
    "score": cmd_score,
    "compress": cmd_compress,
    "train-summ": cmd_train_summ,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "sweep": cmd_sweep,
    "bench": cmd_bench,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        for attr, key in _OVERRIDES.items():
            value = getattr(args, attr, None)
            if value is not None:
                cfg[key] = value
        if args.out is not None:
            cfg["report_dir"] = args.out
        _echo(cfg, args.command)
        COMMANDS[args.command](cfg, args)
    except (PipelineError, ConfigError, CheckpointLockError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
