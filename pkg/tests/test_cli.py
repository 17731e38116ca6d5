import json

import pytest

from scst.cli import build_parser, main, parse_args, read_config_file
from scst.data import load_corpus
from scst.model import load_checkpoint


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["gen-data", "--vocab-size", "8", "--feature-dim", "6", "--min-len", "1", "--max-len", "3",
                 "--seed", "2", "--out", str(d / "c_"), "--splits", "train:40,valid:15,test:15"]) == 0
    assert main(["train-ce", "--corpus", str(d / "c_train.jsonl"), "--valid", str(d / "c_valid.jsonl"),
                 "--checkpoint", str(d / "ce.ckpt"), "--epochs", "3", "--batch-size", "8",
                 "--hidden-dim", "10", "--embed-dim", "5", "--pool-segments", "2",
                 "--log", str(d / "ce.csv")]) == 0
    return d


def test_gen_data_splits(workdir):
    sizes = [len(load_corpus(workdir / f"c_{n}.jsonl")) for n in ("train", "valid", "test")]
    assert sizes == [40, 15, 15]


def test_gen_data_single_file(tmp_path):
    out = tmp_path / "all.jsonl"
    assert main(["gen-data", "--num-utterances", "7", "--out", str(out)]) == 0
    assert len(load_corpus(out)) == 7


def test_train_ce_writes_checkpoint_and_log(workdir, capsys):
    p = load_checkpoint(workdir / "ce.ckpt")
    assert p.config.vocab_size == 8 and p.config.pool_segments == 2
    assert (workdir / "ce.csv").read_text().startswith("phase,lambda,reward_kind")


def test_train_scst_and_run_experiment(workdir, capsys):
    args = ["--corpus", str(workdir / "c_train.jsonl"), "--valid", str(workdir / "c_valid.jsonl")]
    assert main(["train-scst", *args, "--init", str(workdir / "ce.ckpt"), "--checkpoint",
                 str(workdir / "scst.ckpt"), "--epochs", "1", "--beam-size", "3", "--reward-kind", "II",
                 "--lambda", "0.01", "--batch-size", "8"]) == 0
    assert "best validation WER" in capsys.readouterr().out
    assert main(["run-experiment", "--baseline", str(workdir / "ce.ckpt"), *args,
                 "--test", str(workdir / "c_test.jsonl"), "--epochs", "1", "--beam-size", "3",
                 "--sweep", "0:I,0.001:II", "--table-csv", str(workdir / "table.csv")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("model") and out[2].startswith("Baseline") and len(out) == 5
    assert len((workdir / "table.csv").read_text().splitlines()) == 4


def test_decode_jsonl_with_rewards(workdir):
    out = workdir / "nbest.jsonl"
    assert main(["decode", "--checkpoint", str(workdir / "ce.ckpt"), "--corpus", str(workdir / "c_test.jsonl"),
                 "--beam-size", "4", "--rewards", "II", "--out", str(out)]) == 0
    records = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(records) == 15
    rec = records[0]
    assert rec["reward_kind"] == "II" and "baseline" in rec
    h = rec["hypotheses"][0]
    assert {"tokens", "step_probs", "log_prob", "reward", "step_rewards", "advantage"} <= set(h)
    assert len(h["tokens"]) == len(h["step_probs"]) == len(h["step_rewards"])
    assert abs(sum(x["advantage"] for x in rec["hypotheses"])) < 1e-9


def test_evaluate_prints_and_writes_json(workdir, capsys):
    js = workdir / "eval.json"
    assert main(["evaluate", "--checkpoint", str(workdir / "ce.ckpt"), "--corpus", str(workdir / "c_test.jsonl"),
                 "--beam-size", "2", "--json", str(js)]) == 0
    assert "WER" in capsys.readouterr().out
    doc = json.loads(js.read_text())
    assert doc["wer"] == doc["total_edit_ops"] / doc["total_ref_tokens"]


def test_grad_check_passes(capsys):
    assert main(["grad-check", "--seed", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("ok") for line in lines)
    assert any("op:log_softmax" in line for line in lines)


def test_config_file_supplies_defaults(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nnum-utterances = 4\nnoise_sigma=0.0\nseed=9\n")
    assert read_config_file(cfg) == {"num_utterances": "4", "noise_sigma": "0.0", "seed": "9"}
    out = tmp_path / "c.jsonl"
    assert main(["--config", str(cfg), "gen-data", "--out", str(out)]) == 0
    assert len(load_corpus(out)) == 4
    # explicit flags win over the file
    assert main(["--config", str(cfg), "gen-data", "--out", str(out), "--num-utterances", "6"]) == 0
    assert len(load_corpus(out)) == 6


def test_config_file_lambda_alias(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("lambda = 0.5\nreward_kind = II\n")
    args = parse_args(["--config", str(cfg), "train-scst", "--corpus", "a", "--valid", "b",
                       "--checkpoint", "c", "--init", "d"])
    assert args.lam == 0.5 and args.reward_kind == "II"


def test_config_file_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    with pytest.raises(SystemExit):
        main(["--config", str(cfg), "gen-data", "--out", str(tmp_path / "x")])


def test_every_subcommand_has_seed():
    parser = build_parser()
    sub = parser._subparsers._group_actions[0]
    assert set(sub.choices) == {"gen-data", "train-ce", "train-scst", "decode", "evaluate", "grad-check",
                                "run-experiment"}
    for sp in sub.choices.values():
        assert any(a.dest == "seed" for a in sp._actions)


def test_errors_exit_with_code_two(tmp_path, capsys):
    assert main(["evaluate", "--checkpoint", str(tmp_path / "missing.ckpt"), "--corpus", "nope.jsonl"]) == 2
    assert "error" in capsys.readouterr().err
