import itertools
from collections import Counter, defaultdict

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from codeauthor.errors import ConfigurationError, EmptyCorpusError, FormatError
from codeauthor.splits import (FileTree, SampleRef, SplitConfig, SplitPlan, TimeFolds, build_context_splits,
                               context_similarity, per_author_ratios, random_split, split_author,
                               stratified_kfold, time_fold_split)
from codeauthor.synthetic import planted_context_corpus

from oracles import best_bipartition_ratio, greedy_outcomes


def refs_in_folders(sizes, author="a", depth_prefix="proj"):
    """One folder per entry of ``sizes``, each holding that many one-sample files."""
    out = []
    for f, n in enumerate(sizes):
        for i in range(n):
            out.append(SampleRef(f"{f}-{i}", author, f"{depth_prefix}/dir{f}/F{i}.java"))
    return out


class TestFileTree:
    def test_chain_compression(self):
        tree = FileTree(["plugins/src/main/A.java", "plugins/src/main/B.java", "plugins/src/test/C.java"])
        # root chain plugins/src is merged into the root
        assert tree.names[0] == "plugins/src"
        a = tree.node_of("plugins/src/main/A.java")
        assert tree.depth[a] == 2 and tree.depth[tree.parent[a]] == 1

    def test_inner_chain_compression(self):
        tree = FileTree(["a/x/y/z/F.java", "b/G.java"])
        f = tree.node_of("a/x/y/z/F.java")
        assert tree.names[tree.parent[f]] == "a/x/y/z" and tree.depth[f] == 2

    def test_unknown_file(self):
        with pytest.raises(KeyError):
            FileTree(["a/B.java"]).node_of("c/D.java")

    def test_path_of_round_trips(self):
        files = ["a/b/C.java", "a/D.java", "e/F.java"]
        tree = FileTree(files)
        assert sorted(tree.path_of(tree.node_of(f)) for f in files) == sorted(files)


class TestContextSimilarity:
    def test_same_folder(self):
        tree = FileTree(["p/q/A.java", "p/q/B.java", "r/C.java"])
        assert context_similarity("p/q/A.java", "p/q/B.java", tree) == tree.depth[tree.parent[tree.node_of("p/q/A.java")]]

    def test_different_top_level(self):
        tree = FileTree(["src/a/X.java", "src/b/Y.java"])
        assert context_similarity("src/a/X.java", "src/b/Y.java", tree) == 0

    def test_same_package_above_cross_package(self):
        files = ["api/a/Alpha.java", "api/a/Beta.java", "api/b/Gamma.java",
                 "impl/a/AlphaImpl.java", "impl/b/Other.java"]
        tree = FileTree(files)
        same = context_similarity("api/a/Alpha.java", "api/a/Beta.java", tree)
        cross = context_similarity("api/a/Alpha.java", "impl/a/AlphaImpl.java", tree)
        assert same == 2 and cross == 0

    def test_symmetric(self):
        tree = FileTree(["a/b/C.java", "a/D.java", "e/F.java"])
        for x, y in itertools.product(tree.files, repeat=2):
            assert context_similarity(x, y, tree) == context_similarity(y, x, tree)


class TestRandomSplit:
    def test_single_unit_is_degenerate(self):
        samples = [SampleRef(f"s{i}", "a", "proj/dir0/Only.java") for i in range(5)]
        tree = FileTree(s.path for s in samples)
        split = random_split(samples, 1, 0.25, tree, np.random.default_rng(0))
        assert split.degenerate and split.ratio in (0.0, 1.0)

    def test_two_equal_folders(self):
        samples = refs_in_folders([4, 4])
        tree = FileTree(s.path for s in samples)
        assert random_split(samples, 1, 0.25, tree, np.random.default_rng(0)).ratio == 0.5

    def test_needs_two_samples(self):
        samples = refs_in_folders([1])
        with pytest.raises(ValueError):
            random_split(samples, 1, 0.25, FileTree(["proj/dir0/F0.java"]), np.random.default_rng(0))

    def test_folder_atomicity_and_greedy_outcomes(self):
        sizes = [1, 2, 3, 5, 8, 2]
        samples = refs_in_folders(sizes)
        tree = FileTree(s.path for s in samples)
        allowed = greedy_outcomes(sizes, 0.25)
        rng = np.random.default_rng(11)
        for _ in range(1000):
            split = random_split(samples, 1, 0.25, tree, rng)
            assert split.ratio in allowed
            test_dirs = {sid.split("-")[0] for sid in split.test}
            train_dirs = {sid.split("-")[0] for sid in split.train}
            assert not test_dirs & train_dirs
            assert len(split.train) + len(split.test) == sum(sizes)


class TestSplitAuthor:
    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(1, 9), min_size=2, max_size=5), st.integers(0, 2**32 - 1))
    def test_against_bipartition_oracle(self, sizes, seed):
        samples = refs_in_folders(sizes)
        tree = FileTree(s.path for s in samples)
        config = SplitConfig(attempts=2000)
        split = split_author(samples, 1, tree, config, np.random.default_rng(seed))
        reachable = sorted((r for r in greedy_outcomes(sizes, config.test_ratio)
                            if config.min_ratio < r < config.max_ratio),
                           key=lambda r: abs(r - config.test_ratio))
        if not reachable:
            assert split is None
            return
        best_any = best_bipartition_ratio(sizes, config.min_ratio, config.max_ratio)
        assert abs(split.ratio - config.test_ratio) >= abs(best_any - config.test_ratio) - 1e-15
        # 2000 draws over at most 120 orders visit every reachable outcome
        assert abs(split.ratio - config.test_ratio) == pytest.approx(abs(reachable[0] - config.test_ratio))

    def test_no_valid_split(self):
        samples = refs_in_folders([3, 3])
        tree = FileTree(s.path for s in samples)
        assert split_author(samples, 1, tree, SplitConfig(), np.random.default_rng(0)) is None

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            SplitConfig(min_ratio=0.4, max_ratio=0.3)
        with pytest.raises(ConfigurationError):
            SplitConfig(attempts=0)


class TestBuildContextSplits:
    def corpus(self):
        return [s.ref() for s in planted_context_corpus(seed=1)]

    def test_composition(self):
        refs = self.corpus()
        plans = build_context_splits(refs, [1, 2, 3])
        author_of = {r.sample_id: r.author for r in refs}
        for plan in plans:
            assert set(plan.assignment) == {r.sample_id for r in refs if r.author in plan.retained_authors}
            for author, r in per_author_ratios(plan, author_of).items():
                assert 0.15 < r < 0.35 and r == plan.ratios[author]

    def test_cross_pairs_below_depth(self):
        refs = self.corpus()
        tree = FileTree(r.path for r in refs)
        by_id = {r.sample_id: r for r in refs}
        for plan in build_context_splits(refs, [1, 2, 3], tree=tree):
            by_author = defaultdict(lambda: ([], []))
            for sid, side in plan.assignment.items():
                by_author[by_id[sid].author][side == "test"].append(by_id[sid].path)
            for train, test in by_author.values():
                for a, b in itertools.product(train, test):
                    assert context_similarity(a, b, tree) < plan.depth

    def test_author_dropped_everywhere(self):
        refs = self.corpus()
        # an author confined to one file cannot be split at any depth
        refs += [SampleRef(f"lonely{i}", "zz-lonely", "top0/lonely/One.java") for i in range(6)]
        plans = build_context_splits(refs, [1, 2])
        assert all("zz-lonely" not in p.retained_authors for p in plans)
        assert plans[0].retained_authors == plans[1].retained_authors

    def test_all_dropped(self):
        refs = [SampleRef(f"s{i}", "a", "x/One.java") for i in range(4)]
        with pytest.raises(EmptyCorpusError):
            build_context_splits(refs, [1])

    def test_deterministic_and_round_trip(self):
        refs = self.corpus()
        a = build_context_splits(refs, [2], SplitConfig(seed=3))[0]
        b = build_context_splits(refs, [2], SplitConfig(seed=3))[0]
        assert a.assignment == b.assignment
        again = SplitPlan.loads(a.dumps())
        assert again.assignment == a.assignment and again.ratios == a.ratios
        assert (again.depth, again.seed) == (2, 3)

    def test_bad_plan_file(self):
        with pytest.raises(FormatError):
            SplitPlan.loads("# depth\t1\nx\tmaybe\n")
        with pytest.raises(FormatError):
            SplitPlan.loads("x\ttrain\n")


class TestTimeFolds:
    def refs(self, n, author="a", seed=0):
        rng = np.random.default_rng(seed)
        ts = rng.integers(0, n // 2 + 1, n)  # repeated timestamps exercise the id tie-break
        return [SampleRef(f"{author}{i:03d}", author, "f.java", int(t)) for i, t in enumerate(ts)]

    def test_twenty_samples(self):
        folds = time_fold_split(self.refs(20))
        assert Counter(folds.fold_of.values()) == {f: 2 for f in range(10)}

    def test_twenty_five_samples(self):
        folds = time_fold_split(self.refs(25))
        sizes = [Counter(folds.fold_of.values())[f] for f in range(10)]
        assert sizes == [3] * 5 + [2] * 5

    @given(st.integers(10, 60), st.integers(0, 2**32 - 1))
    def test_sort_oracle(self, n, seed):
        refs = self.refs(n, seed=seed)
        folds = time_fold_split(refs)
        ordered = [r.sample_id for r in sorted(refs, key=lambda r: (r.timestamp, r.sample_id))]
        got = [folds.fold_of[sid] for sid in ordered]
        assert got == sorted(got) and set(got) == set(range(10))
        sizes = Counter(got)
        assert max(sizes.values()) - min(sizes.values()) <= 1

    def test_too_few_samples(self):
        with pytest.raises(ValueError, match="'b'"):
            time_fold_split(self.refs(20) + self.refs(9, author="b"))

    def test_round_trip(self):
        folds = time_fold_split(self.refs(30))
        assert TimeFolds.loads(folds.dumps()).fold_of == folds.fold_of


class TestStratifiedKFold:
    def test_example(self):
        folds = stratified_kfold(["a"] * 4 + ["b"] * 6, 2, seed=0)
        assert Counter(folds[:4]) == {0: 2, 1: 2} and Counter(folds[4:]) == {0: 3, 1: 3}

    @given(st.lists(st.integers(0, 3), min_size=1, max_size=80), st.integers(2, 6), st.integers(0, 99))
    def test_per_class_balance(self, raw, k, seed):
        labels = [lab for lab in raw for _ in range(k)]  # every class has at least k members
        folds = stratified_kfold(labels, k, seed)
        for lab in set(labels):
            c = Counter(folds[[i for i, x in enumerate(labels) if x == lab]])
            assert set(c) == set(range(k)) and max(c.values()) - min(c.values()) <= 1

    def test_small_class(self):
        with pytest.raises(ValueError):
            stratified_kfold(["a"] * 5 + ["b"] * 2, 3)

    def test_bad_k(self):
        with pytest.raises(ValueError):
            stratified_kfold(["a", "b"], 1)
