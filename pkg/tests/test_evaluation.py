import hashlib
import json

import numpy as np

from codeauthor.config import ExperimentConfig
from codeauthor.evaluation import (RunRecord, RunResult, extract_contexts, fit, predict, run_context_study,
                                   run_crossval, run_study, run_time_study)
from codeauthor.samples import Sample
from codeauthor.synthetic import drift_corpus, planted_context_corpus, separable_corpus


def fast(**kw):
    base = dict(n_trees=20, keep_fraction=0.5)
    base.update(kw)
    return ExperimentConfig(**base)


def corpus_hash(samples):
    h = hashlib.sha256()
    for s in samples:
        h.update(json.dumps([s.sample_id, s.author, s.source, s.path, s.timestamp]).encode())
    return h.hexdigest()


def canary_corpus(n_authors=3, per_author=10, seed=0):
    """Every sample carries a unique method name that no other sample uses."""
    rng = np.random.default_rng(seed)
    out = []
    for a in range(n_authors):
        pool = [f"a{a}v{i}" for i in range(6)]
        for i in range(per_author):
            x, y = rng.choice(pool, 2, replace=False)
            sid = f"s{a}_{i}"
            out.append(Sample(sid, f"author{a}", f"int canary_{sid}(int {x}) {{ int {y} = {x} * 2; return {y}; }}",
                              f"p{a}/F{i}.java"))
    return out


class TestFitPredict:
    def test_labels_round_trip(self):
        samples = separable_corpus(n_authors=3, per_author=12)
        contexts = extract_contexts(samples, fast().limits())
        labels = np.array([int(s.author[-1]) * 7 for s in samples])  # sparse, non-dense labels
        fitted = fit(contexts, labels, fast(), 0)
        assert set(predict(fitted, contexts)) <= set(labels)

    def test_nn_path(self):
        samples = separable_corpus(n_authors=2, per_author=10)
        contexts = extract_contexts(samples, fast().limits())
        cfg = fast(model="pbnn", embedding_dim=8, epochs=2)
        fitted = fit(contexts, [s.author for s in samples], cfg, 0)
        assert fitted.mask is None and len(predict(fitted, contexts)) == 20


class TestCrossval:
    def test_deterministic(self):
        samples = separable_corpus(n_authors=3, per_author=10)
        a = run_crossval(fast(k=5), samples)
        b = run_crossval(fast(k=5), samples)
        assert [r.accuracy for r in a.records] == [r.accuracy for r in b.records]

    def test_leave_one_per_author_out(self):
        samples = separable_corpus(n_authors=3, per_author=5)
        res = run_crossval(fast(k=5), samples)
        assert len(res.records) == 5
        assert all(r.n_test == 3 and r.n_train == 12 for r in res.records)

    def test_canary_never_reaches_training_side(self):
        samples = canary_corpus()
        before = corpus_hash(samples)
        seen = []

        def hook(run, fitted, train, test):
            train_ids = {s.sample_id for s in train}
            assert not train_ids & {s.sample_id for s in test}
            for s in test:
                assert f"canary_{s.sample_id}" not in fitted.vocab.token_index
            for s in train:
                assert f"canary_{s.sample_id}" in fitted.vocab.token_index
            seen.append(run)

        run_crossval(fast(k=5), samples, on_fold=hook)
        assert len(seen) == 5
        assert corpus_hash(samples) == before


class TestContextStudy:
    def test_training_sizes_comparable(self):
        samples = planted_context_corpus(seed=2)
        res = run_context_study(fast(depths=(1, 2, 3)), samples)
        sizes = [r.n_train for r in res.records]
        assert (max(sizes) - min(sizes)) / max(sizes) < 0.03
        assert [r.depth for r in res.records] == [1, 2, 3]
        assert [x for x, _ in res.series()] == [1, 2, 3]

    def test_dispatch(self):
        samples = planted_context_corpus(seed=2)
        res = run_study(fast(split="context", depths=(2,)), samples)
        assert res.study == "context" and len(res.records) == 1


class TestTimeStudy:
    def test_forty_five_cells(self):
        samples = drift_corpus(n_authors=3, per_fold=3)
        before = corpus_hash(samples)
        res = run_time_study(fast(), samples)
        assert len(res.records) == 45
        assert sorted({r.distance for r in res.records}) == list(range(1, 10))
        assert [x for x, _ in res.series()] == list(range(1, 10))
        assert corpus_hash(samples) == before


class TestRunResult:
    def test_mean_and_population_std(self):
        res = RunResult("crossval", "pbrf", [RunRecord("a", 0.5, 1, 1), RunRecord("b", 1.0, 1, 1)])
        assert res.mean == 0.75 and res.std == 0.25
