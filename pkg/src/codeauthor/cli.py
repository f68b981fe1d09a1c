"""Command-line front door: ``codeauthor <command> [options]``.

Every command accepts ``--config FILE`` and repeated ``--set key=value``
overrides, and prints the effective configuration before it runs.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from codeauthor.config import ExperimentConfig, load_config
from codeauthor.errors import CodeAuthorError
from codeauthor.evaluation import FittedModel, extract_contexts, fit, predict, run_study
from codeauthor.representation import (Vocabulary, build_vocabulary, index_bag, vectorize_corpus)
from codeauthor.samples import Sample, read_samples, write_samples
from codeauthor.selection import FeatureMask, mutual_information, select_top
from codeauthor.syntax.paths import PathContext, enumerate_path_contexts
from codeauthor.syntax.frontends import parse_source

log = logging.getLogger("codeauthor")


# -- shared helpers ---------------------------------------------------------------


def _configs(args) -> List[ExperimentConfig]:
    overrides = list(args.set or [])
    if getattr(args, "samples", None):
        overrides.append(f"samples = {args.samples}")
    configs = load_config(args.config, overrides)
    for i, cfg in enumerate(configs):
        header = f"# effective config ({i + 1}/{len(configs)})" if len(configs) > 1 else "# effective config"
        print(header)
        # comment-prefixed so data written to stdout stays machine-readable
        print("".join(f"#   {line}\n" for line in cfg.dumps().splitlines()), end="")
        print(f"# seed = {cfg.seed}")
    return configs


def _config(args) -> ExperimentConfig:
    configs = _configs(args)
    if len(configs) != 1:
        raise CodeAuthorError(f"'{args.command}' takes a single configuration, grid expands to {len(configs)}")
    return configs[0]


def write_contexts(path, samples: Sequence[Sample], contexts: Sequence[List[PathContext]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s, ctx in zip(samples, contexts):
            fh.write(json.dumps({"sample_id": s.sample_id, "author": s.author,
                                 "contexts": [list(c) for c in ctx]}, ensure_ascii=False) + "\n")


def read_contexts(path) -> Tuple[List[str], List[str], List[List[PathContext]]]:
    ids, authors, contexts = [], [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                ids.append(rec["sample_id"])
                authors.append(rec.get("author", ""))
                contexts.append([PathContext(*c) for c in rec["contexts"]])
    return ids, authors, contexts


def _model_paths(model: str) -> Tuple[Path, Path, Path]:
    base = Path(model)
    return base, base.with_suffix(base.suffix + ".authors"), base.with_suffix(base.suffix + ".json")


# -- commands -------------------------------------------------------------------


def cmd_synth(args) -> int:
    from codeauthor import synthetic
    make = {"separable": synthetic.separable_corpus, "context": synthetic.planted_context_corpus,
            "drift": synthetic.drift_corpus}[args.kind]
    print(f"# seed = {args.seed}")
    n = write_samples(make(seed=args.seed), args.out)
    print(f"wrote {n} samples to {args.out}")
    return 0


def cmd_extract(args) -> int:
    cfg = _config(args)
    if args.source:
        frontend = args.frontend or cfg.frontend
        for src in args.source:
            for c in enumerate_path_contexts(parse_source(Path(src).read_text(encoding="utf-8"), frontend),
                                             cfg.limits()):
                print("\t".join(c))
        return 0
    cfg.check_files()
    samples = read_samples(cfg.samples)
    contexts = extract_contexts(samples, cfg.limits())
    write_contexts(args.out, samples, contexts)
    print(f"wrote {sum(map(len, contexts))} contexts for {len(samples)} samples to {args.out}")
    return 0


def cmd_vocab(args) -> int:
    _config(args)
    _, _, contexts = read_contexts(args.contexts)
    vocab = build_vocabulary(contexts)
    Path(args.out).write_text(vocab.dumps(), encoding="utf-8")
    print(f"vocabulary: {vocab.T} tokens, {vocab.P} paths -> {args.out}")
    return 0


def _matrix(contexts, authors, vocab):
    names = sorted(set(authors))
    index = {a: i for i, a in enumerate(names)}
    bags = [index_bag(c, vocab, index[a]) for c, a in zip(contexts, authors)]
    return vectorize_corpus(bags, vocab, dict(enumerate(names))), names


def cmd_select(args) -> int:
    cfg = _config(args)
    _, authors, contexts = read_contexts(args.contexts)
    vocab = Vocabulary.loads(Path(args.vocab).read_text(encoding="utf-8"))
    matrix, _ = _matrix(contexts, authors, vocab)
    mi = mutual_information(matrix)
    mask = select_top(mi, cfg.selection())
    Path(args.out).write_text(mask.dumps(), encoding="utf-8")
    print(f"kept {len(mask)} of {mask.dimension} features -> {args.out}")
    for j in mask.kept[np.argsort(-mi[mask.kept], kind="stable")][:args.show]:
        print(f"  {mi[j]:.6f}\t{vocab.feature_name(int(j))}")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    _, authors, contexts = read_contexts(args.contexts)
    names = sorted(set(authors))
    labels = [names.index(a) for a in authors]
    fitted = fit(contexts, labels, cfg, cfg.seed)
    model_path, authors_path, extras_path = _model_paths(args.out)
    if cfg.model == "pbrf":
        fitted.model.save(model_path, fitted.vocab.digest(), fitted.mask.digest())
    else:
        fitted.model.save(model_path)
    authors_path.write_text("".join(f"{names[c]}\n" for c in fitted.classes), encoding="utf-8")
    extras = {"model": cfg.model, "vocab": fitted.vocab.dumps(),
              "mask": fitted.mask.dumps() if fitted.mask is not None else None}
    extras_path.write_text(json.dumps(extras), encoding="utf-8")
    print(f"trained {cfg.model} on {len(contexts)} samples, {len(names)} authors -> {model_path}")
    return 0


def load_fitted(model: str) -> Tuple[FittedModel, List[str]]:
    from codeauthor.forest import RandomForest
    from codeauthor.nn import NnModel
    model_path, authors_path, extras_path = _model_paths(model)
    extras = json.loads(extras_path.read_text(encoding="utf-8"))
    vocab = Vocabulary.loads(extras["vocab"])
    names = authors_path.read_text(encoding="utf-8").splitlines()
    if extras["model"] == "pbrf":
        mask = FeatureMask.loads(extras["mask"])
        m = RandomForest.load(model_path, vocab.digest(), mask.digest())
    else:
        mask = None
        m = NnModel.load(model_path, vocab.digest())
    return FittedModel(vocab, m, np.arange(len(names)), mask), names


def cmd_predict(args) -> int:
    cfg = _config(args)
    fitted, names = load_fitted(args.model)
    if args.contexts:
        ids, truth, contexts = read_contexts(args.contexts)
    else:
        ids = list(args.source)
        truth = [""] * len(ids)
        contexts = [enumerate_path_contexts(parse_source(Path(p).read_text(encoding="utf-8"),
                                                         args.frontend or cfg.frontend), cfg.limits())
                    for p in args.source]
    pred = predict(fitted, contexts)
    for sid, p in zip(ids, pred):
        print(f"{sid}\t{names[p]}")
    known = [(names[p], t) for p, t in zip(pred, truth) if t]
    if known:
        print(f"# accuracy = {sum(a == b for a, b in known) / len(known):.6f}")
    return 0


def cmd_split(args) -> int:
    from codeauthor.splits import build_context_splits, dump_folds, stratified_kfold, time_fold_split
    cfg = _config(args)
    cfg.check_files()
    samples = read_samples(cfg.samples)
    refs = [s.ref() for s in samples]
    out = Path(args.out)
    if args.kind == "kfold":
        folds = stratified_kfold([s.author for s in samples], cfg.k, cfg.seed)
        out.write_text(dump_folds([s.sample_id for s in samples], folds.tolist()), encoding="utf-8")
    elif args.kind == "time":
        out.write_text(time_fold_split(refs).dumps(), encoding="utf-8")
    else:
        out.mkdir(parents=True, exist_ok=True)
        for plan in build_context_splits(refs, cfg.depths, cfg.split_config()):
            (out / f"depth{plan.depth}.tsv").write_text(plan.dumps(), encoding="utf-8")
            print(f"depth {plan.depth}: {len(plan.ids('train'))} train / {len(plan.ids('test'))} test, "
                  f"{len(plan.retained_authors)} authors")
    print(f"wrote {args.kind} split -> {out}")
    return 0


def cmd_mine(args) -> int:
    from codeauthor import gitminer
    stubs = set(gitminer.DEFAULT_STUBS)
    if args.stub_list:
        stubs |= {line.strip() for line in Path(args.stub_list).read_text(encoding="utf-8").splitlines()}
    print(f"# repo = {args.repo}\n# branch = {args.branch}\n# frontend = {args.frontend}\n"
          f"# min_samples = {args.min_samples}\n# max_samples = {args.max_samples}\n# seed = none (deterministic)")
    events, groups = gitminer.mine_events(args.repo, args.branch, args.frontend, stubs)
    if args.events:
        store = gitminer.ContentStore(args.store or Path(args.events).with_suffix(".store"))
        gitminer.write_event_log(events, args.events, store)
        gitminer.write_groups(groups, Path(args.events).with_suffix(".groups.jsonl"))
    samples = gitminer.build_corpus(events, args.min_samples, args.max_samples, groups, args.frontend)
    write_samples(samples, args.out)
    kinds = {k: sum(e.kind == k for e in events) for k in ("creation", "deletion", "modification")}
    print(f"events: {kinds}; {len(groups)} author groups; {len(samples)} samples -> {args.out}")
    return 0


def cmd_study(args) -> int:
    from codeauthor.report import write_csv
    configs = _configs(args)
    results = []
    cache = {}
    for cfg in configs:
        if args.kind:
            cfg = replace(cfg, split={"crossval": "kfold"}.get(args.kind, args.kind))
        cfg.check_files()
        samples = read_samples(cfg.samples)
        key = (cfg.samples, cfg.max_path_length, cfg.max_path_width)
        if key not in cache:
            cache[key] = extract_contexts(samples, cfg.limits())
        res = run_study(cfg, samples, contexts=cache[key])
        res.metadata["config"] = cfg.dumps().strip().replace("\n", "; ")
        results.append(res)
        print(f"{res.study} {res.model}: mean accuracy {res.mean:.6f} (std {res.std:.6f})")
    write_csv(results, args.out)
    print(f"wrote {len(results)} result(s) -> {args.out}")
    return 0


def cmd_report(args) -> int:
    from codeauthor.report import emit_report, read_csv
    results = [r for path in args.results for r in read_csv(path)]
    written = emit_report(results, args.out, figures=not args.no_figures)
    for name, path in written.items():
        print(f"{name}\t{path}")
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="codeauthor", description="Source-code authorship attribution on AST paths.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, config=True):
        sp = sub.add_parser(name, help=help_text)
        if config:
            sp.add_argument("--config", help="experiment config file (key = value lines)")
            sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        sp.set_defaults(func=func)
        return sp

    sp = add("synth", cmd_synth, "generate a synthetic corpus", config=False)
    sp.add_argument("kind", choices=("separable", "context", "drift"))
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("extract", cmd_extract, "source -> path-contexts")
    sp.add_argument("--samples")
    sp.add_argument("--source", nargs="+", help="print contexts of source files instead")
    sp.add_argument("--frontend")
    sp.add_argument("--out")

    sp = add("vocab", cmd_vocab, "build a vocabulary from extracted contexts")
    sp.add_argument("--contexts", required=True)
    sp.add_argument("--out", required=True)

    sp = add("select", cmd_select, "rank features by mutual information and keep the top N")
    sp.add_argument("--contexts", required=True)
    sp.add_argument("--vocab", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--show", type=int, default=10, help="print the N best features")

    sp = add("train", cmd_train, "train a model on extracted contexts")
    sp.add_argument("--contexts", required=True)
    sp.add_argument("--out", required=True)

    sp = add("predict", cmd_predict, "attribute samples with a trained model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--contexts")
    sp.add_argument("--source", nargs="+")
    sp.add_argument("--frontend")

    sp = add("split", cmd_split, "write a k-fold, context or time split")
    sp.add_argument("kind", choices=("kfold", "context", "time"))
    sp.add_argument("--samples")
    sp.add_argument("--out", required=True)

    sp = add("mine", cmd_mine, "mine method-creation samples from a git repository", config=False)
    sp.add_argument("--repo", required=True)
    sp.add_argument("--branch", default="HEAD")
    sp.add_argument("--frontend", default="java")
    sp.add_argument("--min-samples", type=int, default=1)
    sp.add_argument("--max-samples", type=int)
    sp.add_argument("--stub-list", help="file with one extra stub name/email per line")
    sp.add_argument("--events", help="also write the event log here")
    sp.add_argument("--store", help="content store directory for event bodies")
    sp.add_argument("--out", required=True)

    sp = add("study", cmd_study, "run cross-validation, context or time studies")
    sp.add_argument("kind", nargs="?", choices=("crossval", "context", "time"),
                    help="study type (default: the config's split)")
    sp.add_argument("--samples")
    sp.add_argument("--out", required=True, help="results CSV")

    sp = add("report", cmd_report, "summaries, series files and figures from results CSVs", config=False)
    sp.add_argument("results", nargs="+")
    sp.add_argument("--out", required=True)
    sp.add_argument("--no-figures", action="store_true")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "command", None) == "extract" and not args.source and not args.out:
        print("extract: --out is required unless --source is given", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (CodeAuthorError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
