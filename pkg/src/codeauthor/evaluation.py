"""Experiment drivers: cross-validation, context-split and time-split studies.

Every run fits its vocabulary, feature mask and model on the training side
alone; test samples are only ever indexed against the fitted vocabulary.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from codeauthor.config import ExperimentConfig
from codeauthor.errors import CodeAuthorError, ParseError
from codeauthor.forest import RandomForest, train_forest
from codeauthor.nn import train_nn
from codeauthor.representation import Vocabulary, build_vocabulary, index_bag, vectorize_corpus
from codeauthor.samples import Sample
from codeauthor.selection import FeatureMask, apply_mask, mutual_information, select_top
from codeauthor.splits import (SplitPlan, TimeFolds, build_context_splits, stratified_kfold,
                               time_fold_split)
from codeauthor.stats import accuracy
from codeauthor.syntax.frontends import parse_source
from codeauthor.syntax.paths import PathContext, PathLimits, enumerate_path_contexts

log = logging.getLogger(__name__)


def extract_contexts(samples: Sequence[Sample], limits: PathLimits) -> List[List[PathContext]]:
    out = []
    for s in samples:
        try:
            out.append(enumerate_path_contexts(parse_source(s.source, s.frontend), limits))
        except ParseError as exc:
            raise ParseError(f"sample {s.sample_id}: {exc}") from None
    return out


@dataclass
class FittedModel:
    vocab: Vocabulary
    model: object  # RandomForest | NnModel
    classes: np.ndarray  # model output index -> author label
    mask: Optional[FeatureMask] = None


def fit(contexts: Sequence[List[PathContext]], labels: Sequence[int], config: ExperimentConfig,
        seed: int) -> FittedModel:
    """Train the configured model on one training side."""
    labels = np.asarray(labels)
    classes, dense = np.unique(labels, return_inverse=True)
    vocab = build_vocabulary(contexts)
    bags = [index_bag(c, vocab, int(y)) for c, y in zip(contexts, dense)]
    if config.model == "pbrf":
        matrix = vectorize_corpus(bags, vocab)
        mask = select_top(mutual_information(matrix), config.selection())
        forest = train_forest(apply_mask(matrix, mask), replace(config.forest(), seed=seed))
        return FittedModel(vocab, forest, classes, mask)
    model, _ = train_nn(bags, replace(config.nn(), seed=seed), vocab.T, vocab.P, len(classes),
                        vocab_digest=vocab.digest())
    return FittedModel(vocab, model, classes)


def predict(fitted: FittedModel, contexts: Sequence[List[PathContext]]) -> np.ndarray:
    bags = [index_bag(c, fitted.vocab) for c in contexts]
    if isinstance(fitted.model, RandomForest):
        matrix = apply_mask(vectorize_corpus(bags, fitted.vocab), fitted.mask)
        out = fitted.model.predict(matrix.matrix)
    else:
        out = fitted.model.predict(bags)
    return fitted.classes[out]


@dataclass
class RunRecord:
    run: str
    accuracy: float
    n_train: int
    n_test: int
    fold: Optional[int] = None
    eval_fold: Optional[int] = None
    depth: Optional[int] = None

    @property
    def distance(self) -> Optional[int]:
        if self.fold is None or self.eval_fold is None:
            return None
        return self.eval_fold - self.fold


@dataclass
class RunResult:
    study: str  # crossval | context | time
    model: str
    records: List[RunRecord]
    metadata: Dict[str, str] = field(default_factory=dict)

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([r.accuracy for r in self.records])

    @property
    def mean(self) -> float:
        return float(self.accuracies.mean())

    @property
    def std(self) -> float:
        # population deviation over runs
        return float(self.accuracies.std())

    def series(self) -> List[Tuple[int, float]]:
        """Plot-ready (x, accuracy): depth for context studies, mean by distance for time studies."""
        if self.study == "context":
            return [(r.depth, r.accuracy) for r in self.records]
        if self.study == "time":
            by: Dict[int, List[float]] = {}
            for r in self.records:
                by.setdefault(r.distance, []).append(r.accuracy)
            return [(d, float(np.mean(v))) for d, v in sorted(by.items())]
        return [(r.fold, r.accuracy) for r in self.records]


FoldHook = Callable[[str, FittedModel, Sequence[Sample], Sequence[Sample]], None]


def _labels(samples: Sequence[Sample]) -> Tuple[np.ndarray, List[str]]:
    names = sorted({s.author for s in samples})
    index = {a: i for i, a in enumerate(names)}
    return np.array([index[s.author] for s in samples]), names


def _run_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence([seed, *key]).generate_state(1)[0])


def _evaluate(run: str, samples, contexts, labels, train_idx, test_idx, config, seed,
              on_fold: Optional[FoldHook]) -> Tuple[float, int, int]:
    if len(test_idx) == 0 or len(train_idx) == 0:
        raise CodeAuthorError(f"{run}: empty train or test side")
    try:
        fitted = fit([contexts[i] for i in train_idx], labels[train_idx], config, seed)
        pred = predict(fitted, [contexts[i] for i in test_idx])
    except CodeAuthorError as exc:
        raise type(exc)(f"{run}: {exc}") from exc
    except ValueError as exc:
        raise ValueError(f"{run}: {exc}") from exc
    if on_fold is not None:
        on_fold(run, fitted, [samples[i] for i in train_idx], [samples[i] for i in test_idx])
    acc = accuracy(pred.tolist(), labels[test_idx].tolist())
    log.info("%s: accuracy %.4f (%d train / %d test)", run, acc, len(train_idx), len(test_idx))
    return acc, len(train_idx), len(test_idx)


def _metadata(config: ExperimentConfig, samples, names) -> Dict[str, str]:
    return {"seed": str(config.seed), "n_samples": str(len(samples)), "n_authors": str(len(names)),
            "model": config.model}


def run_crossval(config: ExperimentConfig, samples: Sequence[Sample],
                 contexts: Optional[Sequence[List[PathContext]]] = None,
                 on_fold: Optional[FoldHook] = None) -> RunResult:
    """Stratified k-fold cross-validation."""
    if contexts is None:
        contexts = extract_contexts(samples, config.limits())
    labels, names = _labels(samples)
    folds = stratified_kfold(labels, config.k, config.seed)
    records = []
    for f in range(config.k):
        train_idx, test_idx = np.flatnonzero(folds != f), np.flatnonzero(folds == f)
        acc, ntr, nte = _evaluate(f"fold {f}", samples, contexts, labels, train_idx, test_idx, config,
                                  _run_seed(config.seed, f), on_fold)
        records.append(RunRecord(f"fold{f}", acc, ntr, nte, fold=f))
    return RunResult("crossval", config.model, records, _metadata(config, samples, names))


def run_context_study(config: ExperimentConfig, samples: Sequence[Sample],
                      contexts: Optional[Sequence[List[PathContext]]] = None,
                      plans: Optional[Sequence[SplitPlan]] = None,
                      on_fold: Optional[FoldHook] = None) -> RunResult:
    """Accuracy at each split depth over a common sample universe."""
    if contexts is None:
        contexts = extract_contexts(samples, config.limits())
    if plans is None:
        plans = build_context_splits([s.ref() for s in samples], config.depths, config.split_config())
    labels, names = _labels(samples)
    position = {s.sample_id: i for i, s in enumerate(samples)}
    records = []
    for plan in plans:
        train_idx = np.array(sorted(position[sid] for sid in plan.ids("train")), dtype=np.int64)
        test_idx = np.array(sorted(position[sid] for sid in plan.ids("test")), dtype=np.int64)
        acc, ntr, nte = _evaluate(f"depth {plan.depth}", samples, contexts, labels, train_idx, test_idx,
                                  config, _run_seed(config.seed, plan.depth), on_fold)
        records.append(RunRecord(f"depth{plan.depth}", acc, ntr, nte, depth=plan.depth))
    meta = _metadata(config, samples, names)
    meta["retained_authors"] = str(len(plans[0].retained_authors)) if plans else "0"
    return RunResult("context", config.model, records, meta)


def run_time_study(config: ExperimentConfig, samples: Sequence[Sample],
                   contexts: Optional[Sequence[List[PathContext]]] = None,
                   folds: Optional[TimeFolds] = None,
                   on_fold: Optional[FoldHook] = None) -> RunResult:
    """Train on each fold but the last, evaluate on every later fold."""
    if contexts is None:
        contexts = extract_contexts(samples, config.limits())
    if folds is None:
        folds = time_fold_split([s.ref() for s in samples])
    labels, names = _labels(samples)
    fold_idx = np.array([folds.fold_of[s.sample_id] for s in samples])
    records = []
    for i in range(folds.n_folds - 1):
        train_idx = np.flatnonzero(fold_idx == i)
        try:
            fitted = fit([contexts[t] for t in train_idx], labels[train_idx], config, _run_seed(config.seed, i))
        except CodeAuthorError as exc:
            raise type(exc)(f"train fold {i}: {exc}") from exc
        for j in range(i + 1, folds.n_folds):
            test_idx = np.flatnonzero(fold_idx == j)
            if on_fold is not None:
                on_fold(f"fold {i}->{j}", fitted, [samples[t] for t in train_idx], [samples[t] for t in test_idx])
            pred = predict(fitted, [contexts[t] for t in test_idx])
            acc = accuracy(pred.tolist(), labels[test_idx].tolist())
            records.append(RunRecord(f"fold{i}->{j}", acc, len(train_idx), len(test_idx), fold=i, eval_fold=j))
    return RunResult("time", config.model, records, _metadata(config, samples, names))


def run_study(config: ExperimentConfig, samples: Sequence[Sample], **kwargs) -> RunResult:
    runner = {"kfold": run_crossval, "context": run_context_study, "time": run_time_study}[config.split]
    return runner(config, samples, **kwargs)
