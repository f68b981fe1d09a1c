import os
import subprocess

import pytest

from codeauthor.cli import main
from codeauthor.samples import read_samples


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def corpus(tmp_path, capsys):
    path = tmp_path / "samples.jsonl"
    assert run(capsys, "synth", "separable", "--out", path, "--seed", "3")[0] == 0
    return path


def test_pipeline(tmp_path, capsys, corpus):
    ctx, vocab, mask, model = (tmp_path / n for n in ("ctx.tsv", "vocab.tsv", "mask.txt", "model"))
    code, out, _ = run(capsys, "extract", "--set", f"samples={corpus}", "--out", ctx)
    assert code == 0 and "# seed = 0" in out and "#   max_path_length = 8" in out
    assert run(capsys, "vocab", "--contexts", ctx, "--out", vocab)[0] == 0
    code, out, _ = run(capsys, "select", "--contexts", ctx, "--vocab", vocab, "--out", mask)
    assert code == 0 and "kept" in out
    assert run(capsys, "train", "--contexts", ctx, "--out", model, "--set", "n_trees=10")[0] == 0
    code, out, _ = run(capsys, "predict", "--model", model, "--contexts", ctx)
    lines = [l for l in out.splitlines() if l and not l.startswith("#")]
    assert code == 0 and len(lines) == len(read_samples(corpus))
    assert "# accuracy = " in out


def test_predict_from_source(tmp_path, capsys, corpus):
    ctx, model = tmp_path / "ctx.tsv", tmp_path / "model"
    run(capsys, "extract", "--set", f"samples={corpus}", "--out", ctx)
    run(capsys, "train", "--contexts", ctx, "--out", model, "--set", "model=pbnn",
        "--set", "epochs=1", "--set", "embedding_dim=8")
    src = tmp_path / "A.java"
    src.write_text("int f(int a) { return a + 1; }")
    code, out, _ = run(capsys, "predict", "--model", model, "--source", src)
    assert code == 0 and [l for l in out.splitlines() if not l.startswith("#")][0].startswith(str(src))


def test_study_and_report(tmp_path, capsys, corpus):
    results, report = tmp_path / "results.csv", tmp_path / "report"
    code, out, _ = run(capsys, "study", "crossval", "--set", f"samples={corpus}", "--set", "n_trees=10",
                       "--set", "k=3", "--set", "keep_fraction=0.3", "--out", results)
    assert code == 0 and "mean accuracy" in out
    code, _, _ = run(capsys, "report", results, "--out", report, "--no-figures")
    assert code == 0 and (report / "summary.txt").exists()


def test_context_split_of_flat_corpus_fails_cleanly(tmp_path, capsys, corpus):
    # every author writes into one folder, so no depth-1 split exists
    code, _, err = run(capsys, "split", "context", "--set", f"samples={corpus}", "--set", "depths=1",
                       "--out", tmp_path / "plans")
    assert code == 1 and "error:" in err


def test_splits_written(tmp_path, capsys):
    drift = tmp_path / "drift.jsonl"
    run(capsys, "synth", "drift", "--out", drift)
    assert run(capsys, "split", "time", "--set", f"samples={drift}", "--out", tmp_path / "time.tsv")[0] == 0
    assert len((tmp_path / "time.tsv").read_text().splitlines()) == len(read_samples(drift))
    assert run(capsys, "split", "kfold", "--set", f"samples={drift}", "--out", tmp_path / "k.tsv")[0] == 0


def test_mine(tmp_path, capsys):
    repo = tmp_path / "repo"
    repo.mkdir()
    env = dict(os.environ, HOME=str(tmp_path), GIT_AUTHOR_NAME="Ann", GIT_AUTHOR_EMAIL="a@x",
               GIT_COMMITTER_NAME="Ann", GIT_COMMITTER_EMAIL="a@x",
               GIT_AUTHOR_DATE="1600000000 +0000", GIT_COMMITTER_DATE="1600000000 +0000")
    (repo / "C.java").write_text("class C { int f() { return 1; } }")
    for cmd in (["init", "-q"], ["add", "-A"], ["commit", "-q", "-m", "x"]):
        subprocess.run(["git", "-C", str(repo), *cmd], check=True, env=env)
    out_path = tmp_path / "mined.jsonl"
    code, out, _ = run(capsys, "mine", "--repo", repo, "--out", out_path, "--events", tmp_path / "ev.tsv")
    assert code == 0 and "# seed" in out
    (s,) = read_samples(out_path)
    assert s.author == "Ann" and "return 1" in s.source
    assert (tmp_path / "ev.tsv").read_text().startswith("creation\t")


def test_missing_samples_file(capsys):
    code, _, err = run(capsys, "extract", "--set", "samples=/nonexistent.jsonl", "--out", "/tmp/x")
    assert code == 1 and "not found" in err


def test_bad_override(capsys):
    code, _, err = run(capsys, "extract", "--set", "bogus=1", "--out", "/tmp/x")
    assert code == 1 and "bogus" in err
