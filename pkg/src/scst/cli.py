"""Command-line entry point: ``scst <subcommand> [options]``.

Every option can also come from a ``key=value`` file passed with
``--config``; explicit command-line flags win over the file.
"""

import argparse
import json
import sys

from . import gradcheck
from .data import SynthConfig, load_corpus, save_corpus, split_corpus, synth_generate
from .decoding import beam_search
from .model import ModelConfig, load_checkpoint, save_checkpoint
from .rewards import reward_report
from .trainer import (
    TrainConfig,
    evaluate,
    format_table,
    run_experiment,
    train_ce,
    train_scst,
    write_table_csv,
)


def read_config_file(path):
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _train_args(p, phase):
    p.add_argument("--corpus", required=True, help="training corpus (JSON Lines)")
    p.add_argument("--valid", required=True, help="validation corpus (JSON Lines)")
    p.add_argument("--checkpoint", required=True, help="where to write the best checkpoint")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--learning-rate", type=float, default=0.002)
    p.add_argument("--optimizer", choices=["sgd", "adam"], default="adam")
    p.add_argument("--batch-size", type=int, default=1)
    p.add_argument("--eval-every", type=int, default=1)
    p.add_argument("--log", default="", help="append per-epoch records to this CSV")
    if phase == "scst":
        p.add_argument("--init", required=True, help="CE checkpoint to fine-tune")
        p.add_argument("--lambda", dest="lam", type=float, default=0.001)
        p.add_argument("--beam-size", type=int, default=5)
        p.add_argument("--reward-kind", choices=["I", "II"], default="I")


def build_parser():
    parser = argparse.ArgumentParser(prog="scst", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key=value file with default option values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic corpus")
    p.add_argument("--vocab-size", type=int, default=20)
    p.add_argument("--feature-dim", type=int, default=16)
    p.add_argument("--frames-per-token", type=int, default=2)
    p.add_argument("--noise-sigma", type=float, default=0.3)
    p.add_argument("--min-len", type=int, default=2)
    p.add_argument("--max-len", type=int, default=5)
    p.add_argument("--num-utterances", type=int, default=100)
    p.add_argument("--out", required=True, help="output path, or a prefix when --splits is given")
    p.add_argument("--splits", default="", help="comma-separated name:size pairs, e.g. train:2000,valid:200")

    p = sub.add_parser("train-ce", help="cross-entropy pretraining")
    _train_args(p, "ce")
    p.add_argument("--hidden-dim", type=int, default=32)
    p.add_argument("--embed-dim", type=int, default=16)
    p.add_argument("--max-decode-len", type=int, default=10)
    p.add_argument("--pool-segments", type=int, default=1,
                   help="number of frame segments whose means feed the encoder (1 = plain mean)")
    p.add_argument("--vocab-size", type=int, default=None, help="default: inferred from the corpus")

    p = sub.add_parser("train-scst", help="SCST fine-tuning of a CE checkpoint")
    _train_args(p, "scst")

    p = sub.add_parser("decode", help="write N-best lists as JSON Lines")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--beam-size", type=int, default=5)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--rewards", choices=["I", "II"], default=None, help="attach reward fields")
    p.add_argument("--out", default="-")

    p = sub.add_parser("evaluate", help="corpus WER of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--beam-size", type=int, default=5)
    p.add_argument("--json", dest="json_out", default="", help="write the summary as JSON")
    p.add_argument("--worst", type=int, default=5)

    sub.add_parser("grad-check", help="finite-difference gradient checks")

    p = sub.add_parser("run-experiment", help="SCST sweep over a shared CE baseline")
    p.add_argument("--baseline", required=True, help="CE checkpoint")
    p.add_argument("--corpus", required=True)
    p.add_argument("--valid", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--sweep", default="0:I,0.001:I,0.001:II",
                   help="comma-separated lambda:reward entries, one SCST run each")
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--learning-rate", type=float, default=0.0005)
    p.add_argument("--optimizer", choices=["sgd", "adam"], default="adam")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--beam-size", type=int, default=5)
    p.add_argument("--table-csv", default="")

    for sp in sub.choices.values():
        sp.add_argument("--seed", type=int, default=0)
    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        defaults = read_config_file(args.config)
        defaults = {{"lambda": "lam"}.get(k, k): v for k, v in defaults.items()}
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        typed = {}
        for key, value in defaults.items():
            if key not in known:
                parser.error(f"{args.config}: unknown option {key!r} for {args.command}")
            action = known[key]
            typed[key] = action.type(value) if action.type else value
        sub.set_defaults(**typed)
        args = parser.parse_args(argv)
    return args


def cmd_gen_data(args):
    cfg = SynthConfig(args.vocab_size, args.feature_dim, args.frames_per_token, args.noise_sigma,
                      args.min_len, args.max_len, args.num_utterances, args.seed)
    if not args.splits:
        corpus = synth_generate(cfg)
        save_corpus(corpus, args.out)
        print(f"wrote {len(corpus)} utterances to {args.out}")
        return 0
    splits = [(name, int(n)) for name, n in (s.split(":") for s in args.splits.split(","))]
    total = sum(n for _, n in splits)
    if total != cfg.num_utterances:
        cfg = SynthConfig(**{**cfg.__dict__, "num_utterances": total})
    parts = split_corpus(synth_generate(cfg), *(n for _, n in splits))
    for (name, _), part in zip(splits, parts):
        path = f"{args.out}{name}.jsonl"
        save_corpus(part, path)
        print(f"wrote {len(part)} utterances to {path}")
    return 0


def _train_config(args, phase):
    return TrainConfig(
        phase=phase, epochs=args.epochs, learning_rate=args.learning_rate, optimizer=args.optimizer,
        lam=getattr(args, "lam", 0.0), beam_size=getattr(args, "beam_size", 5),
        reward_kind=getattr(args, "reward_kind", "I"), seed=args.seed, eval_every=args.eval_every,
        batch_size=args.batch_size, corpus_path=args.corpus, valid_path=args.valid,
        checkpoint_path=args.checkpoint, log_path=args.log,
    )


def _print_log(log):
    for r in log.records:
        print(f"epoch {r.epoch:3d}  ce {r.ce_loss:8.4f}  scst {r.scst_loss:8.4f}  "
              f"valid WER {100 * r.valid_wer:6.2f}%  {r.wall_time:6.1f}s")


def cmd_train_ce(args):
    corpus, valid = load_corpus(args.corpus), load_corpus(args.valid)
    if not corpus or not valid:
        raise ValueError("training and validation corpora must be non-empty")
    vocab = args.vocab_size or max(max(u.reference) for u in corpus + valid) + 1
    model_config = ModelConfig(vocab, corpus[0].features.shape[1], args.hidden_dim,
                               args.embed_dim, args.max_decode_len, args.pool_segments)
    params, log = train_ce(_train_config(args, "ce"), model_config, corpus, valid)
    save_checkpoint(params, args.checkpoint)
    _print_log(log)
    print(f"best validation WER {100 * log.best.valid_wer:.2f}% at epoch {log.best.epoch}")
    return 0


def cmd_train_scst(args):
    corpus, valid = load_corpus(args.corpus), load_corpus(args.valid)
    params, log = train_scst(_train_config(args, "scst"), load_checkpoint(args.init), corpus, valid)
    save_checkpoint(params, args.checkpoint)
    _print_log(log)
    print(f"best validation WER {100 * log.best.valid_wer:.2f}% at epoch {log.best.epoch}")
    return 0


def cmd_decode(args):
    params = load_checkpoint(args.checkpoint)
    out = sys.stdout if args.out == "-" else open(args.out, "w")
    try:
        for utt in load_corpus(args.corpus):
            nbest = beam_search(params, utt.features, args.beam_size, args.max_len)
            hyps = [h.to_dict() for h in nbest]
            record = {"id": utt.id, "hypotheses": hyps}
            if args.rewards:
                report = reward_report(nbest, utt.reference, args.rewards)
                for h, r, steps, adv in zip(hyps, report.per_hypothesis_reward, report.step_rewards,
                                            report.advantages):
                    h.update(reward=r, step_rewards=steps, advantage=adv)
                record.update(reward_kind=args.rewards, baseline=report.baseline)
            out.write(json.dumps(record) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_evaluate(args):
    params = load_checkpoint(args.checkpoint)
    summary = evaluate(params, load_corpus(args.corpus), args.beam_size)
    print(f"utterances   {len(summary.per_utterance)}")
    print(f"edit ops     {summary.total_edit_ops}")
    print(f"ref tokens   {summary.total_ref_tokens}")
    print(f"WER          {100 * summary.wer:.2f}%")
    if args.worst:
        print("worst utterances:")
        for utt_id, ed, n in summary.worst(args.worst):
            print(f"  {utt_id:12s} {ed:3d}/{n:<3d} {100 * ed / n:6.1f}%")
    if args.json_out:
        with open(args.json_out, "w") as fh:
            fh.write(summary.to_json())
    return 0


def cmd_grad_check(args):
    failed = 0
    for r in gradcheck.run_suite(args.seed):
        status = "ok  " if r.ok else "FAIL"
        print(f"{status} {r.name:45s} max_rel={r.max_rel_err:.2e} max_abs={r.max_abs_err:.2e}")
        failed += not r.ok
    return 1 if failed else 0


def cmd_run_experiment(args):
    baseline = load_checkpoint(args.baseline)
    corpus, valid, test = load_corpus(args.corpus), load_corpus(args.valid), load_corpus(args.test)
    configs = []
    for entry in args.sweep.split(","):
        lam, kind = entry.split(":")
        configs.append(TrainConfig(phase="scst", epochs=args.epochs, learning_rate=args.learning_rate,
                                   optimizer=args.optimizer, lam=float(lam), beam_size=args.beam_size,
                                   reward_kind=kind, seed=args.seed, batch_size=args.batch_size))
    rows = run_experiment(configs, baseline, corpus, valid, test, args.beam_size)
    print(format_table(rows))
    if args.table_csv:
        write_table_csv(rows, args.table_csv)
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train-ce": cmd_train_ce,
    "train-scst": cmd_train_scst,
    "decode": cmd_decode,
    "evaluate": cmd_evaluate,
    "grad-check": cmd_grad_check,
    "run-experiment": cmd_run_experiment,
}


def main(argv=None):
    args = parse_args(sys.argv[1:] if argv is None else argv)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"scst {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
