"""Write study results as CSV, a text summary, plot series and figures."""

import csv
import json
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from codeauthor.errors import FormatError  # noqa: E402
from codeauthor.evaluation import RunRecord, RunResult  # noqa: E402
from codeauthor.stats import WilcoxonResult, wilcoxon_signed_rank  # noqa: E402

COLUMNS = ("result", "study", "model", "run", "fold", "eval_fold", "depth", "distance",
           "accuracy", "n_train", "n_test", "metadata")

X_LABELS = {"context": "split depth", "time": "fold distance", "crossval": "fold"}


@dataclass
class Comparison:
    left: int
    right: int
    mean_difference: float
    test: Optional[WilcoxonResult]  # None when runs cannot be paired


def compare(a: RunResult, b: RunResult, left: int = 0, right: int = 1) -> Comparison:
    """Paired signed-rank test when both results cover the same runs, else means only."""
    diff = a.mean - b.mean
    if [r.run for r in a.records] == [r.run for r in b.records] and len(a.records) > 1:
        return Comparison(left, right, diff, wilcoxon_signed_rank(a.accuracies, b.accuracies))
    return Comparison(left, right, diff, None)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _int(text: str) -> Optional[int]:
    return int(text) if text else None


def write_csv(results: Sequence[RunResult], path: Union[str, Path]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for i, res in enumerate(results):
            meta = json.dumps(res.metadata, sort_keys=True)
            for r in res.records:
                writer.writerow([_cell(v) for v in (i, res.study, res.model, r.run, r.fold, r.eval_fold,
                                                     r.depth, r.distance, r.accuracy, r.n_train, r.n_test)]
                                + [meta])


def read_csv(path: Union[str, Path]) -> List[RunResult]:
    results: Dict[int, RunResult] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != COLUMNS:
            raise FormatError(f"{path}: unexpected header {header}")
        for row in reader:
            if len(row) != len(COLUMNS):
                raise FormatError(f"{path}: row has {len(row)} fields")
            rec = dict(zip(COLUMNS, row))
            idx = int(rec["result"])
            if idx not in results:
                results[idx] = RunResult(rec["study"], rec["model"], [], json.loads(rec["metadata"]))
            results[idx].records.append(RunRecord(rec["run"], float(rec["accuracy"]), int(rec["n_train"]),
                                                  int(rec["n_test"]), _int(rec["fold"]),
                                                  _int(rec["eval_fold"]), _int(rec["depth"])))
    return [results[i] for i in sorted(results)]


def summary_text(results: Sequence[RunResult], comparisons: Sequence[Comparison] = ()) -> str:
    lines = []
    for i, res in enumerate(results):
        lines.append(f"[result {i}] study={res.study} model={res.model} runs={len(res.records)}")
        for k, v in sorted(res.metadata.items()):
            lines.append(f"  {k} = {v}")
        for r in res.records:
            lines.append(f"  {r.run}\taccuracy={r.accuracy:.6f}\ttrain={r.n_train}\ttest={r.n_test}")
        lines.append(f"  mean = {res.mean:.6f}")
        lines.append(f"  std = {res.std:.6f}")
    for c in comparisons:
        if c.test is None:
            lines.append(f"[compare {c.left} vs {c.right}] mean difference = {c.mean_difference:+.6f} (unpaired)")
        else:
            flag = " degenerate" if c.test.degenerate else ""
            lines.append(f"[compare {c.left} vs {c.right}] mean difference = {c.mean_difference:+.6f} "
                         f"wilcoxon W = {c.test.statistic:g} p = {c.test.p_value:.6g} "
                         f"n = {c.test.n} ({c.test.method}{flag})")
    return "\n".join(lines) + "\n"


def _plot(res: RunResult, path: Path) -> None:
    xs, ys = zip(*res.series())
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(xs, ys, marker="o")
    ax.set_xlabel(X_LABELS[res.study])
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.02)
    ax.set_title(f"{res.model} {res.study}")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def emit_report(results: Sequence[RunResult], out_dir: Union[str, Path], figures: bool = True) -> Dict[str, Path]:
    """Write ``results.csv``, ``summary.txt``, one series file per result and, optionally, PNG figures.

    Results sharing a study type are compared pairwise.
    """
    if not results:
        raise ValueError("nothing to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {"csv": out / "results.csv", "summary": out / "summary.txt"}
    write_csv(results, written["csv"])
    comparisons = []
    for i, j in combinations(range(len(results)), 2):
        if results[i].study == results[j].study:
            comparisons.append(compare(results[i], results[j], i, j))
    written["summary"].write_text(summary_text(results, comparisons), encoding="utf-8")
    for i, res in enumerate(results):
        series = out / f"series_{i}_{res.study}_{res.model}.csv"
        with open(series, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(("x", "accuracy"))
            writer.writerows((x, repr(float(y))) for x, y in res.series())
        written[f"series_{i}"] = series
        if figures:
            png = out / f"figure_{i}_{res.study}_{res.model}.png"
            _plot(res, png)
            written[f"figure_{i}"] = png
    return written
