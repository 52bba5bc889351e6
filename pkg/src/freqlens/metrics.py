"""Scoring metrics: ROC/AUC, thresholded accuracies and the val/test protocol.

AUC is the rank statistic (probability a random fake outscores a random
real, ties at half weight). Accuracy predicts fake when score >= theta; the
greedy threshold scans the fixed grid {0, 0.01, ..., 1} and keeps the
smallest maximizer.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .config import DataError

THETA_GRID = np.arange(101) / 100.0


@dataclass
class ScoreSet:
    """Per-sample scores with labels and group ids (the video analog)."""

    ids: list
    groups: list
    labels: np.ndarray  # 1 = fake, 0 = real
    scores: np.ndarray  # in [0, 1]

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        n = len(self.scores)
        if not (len(self.ids) == len(self.groups) == len(self.labels) == n) or n == 0:
            raise DataError("score set fields must be non-empty and aligned")
        if not np.all(np.isfinite(self.scores)):
            raise DataError("scores must be finite")
        if self.scores.min() < 0.0 or self.scores.max() > 1.0:
            raise DataError("scores must lie in [0, 1]")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise DataError("labels must be 0 (real) or 1 (fake)")

    def __len__(self):
        return len(self.scores)


@dataclass
class EvalReport:
    auc: float
    acc_at_half: float
    acc_greedy: float
    theta_max: float
    roc: np.ndarray = field(repr=False, default=None)  # (n, 2) fpr, tpr

    def as_dict(self) -> dict:
        return {"auc": self.auc, "acc_at_half": self.acc_at_half,
                "acc_greedy": self.acc_greedy, "theta_max": self.theta_max}


def auc(scores: ScoreSet) -> float:
    """Rank-statistic AUC with averaged ties; needs both classes."""
    fake = scores.labels == 1
    n_fake = int(fake.sum())
    n_real = len(scores) - n_fake
    if n_fake == 0 or n_real == 0:
        raise DataError("AUC is undefined with a single class")
    ranks = rankdata(scores.scores, method="average")
    u = ranks[fake].sum() - n_fake * (n_fake + 1) / 2.0
    return u / (n_fake * n_real)


def accuracy_at(scores: ScoreSet, theta: float) -> float:
    """Fraction correct when predicting fake iff score >= theta."""
    predicted = (scores.scores >= theta).astype(np.int64)
    return float(np.mean(predicted == scores.labels))


def greedy_threshold(scores: ScoreSet):
    """(theta_max, accuracy): best grid threshold, smallest on ties."""
    accs = [accuracy_at(scores, t) for t in THETA_GRID]
    best = int(np.argmax(accs))  # argmax returns the first, hence smallest theta
    return float(THETA_GRID[best]), accs[best]


def roc_points(scores: ScoreSet) -> np.ndarray:
    """ROC polyline (fpr, tpr) from (0,0) to (1,1), one step per distinct score."""
    order = np.argsort(-scores.scores, kind="stable")
    s = scores.scores[order]
    y = scores.labels[order]
    n_fake = max(int(y.sum()), 1)
    n_real = max(len(y) - int(y.sum()), 1)
    distinct = np.nonzero(np.diff(s))[0]
    cut = np.concatenate([distinct, [len(s) - 1]])
    tps = np.cumsum(y)[cut]
    fps = cut + 1 - tps
    pts = np.column_stack([fps / n_real, tps / n_fake])
    return np.vstack([[0.0, 0.0], pts])


def group_average(scores: ScoreSet) -> ScoreSet:
    """One entry per group with the mean score; labels must agree per group."""
    buckets = {}
    for i, gid in enumerate(scores.groups):
        buckets.setdefault(gid, []).append(i)
    ids, groups, labels, means = [], [], [], []
    for gid in sorted(buckets, key=str):
        idx = buckets[gid]
        glabels = set(scores.labels[idx].tolist())
        if len(glabels) != 1:
            raise DataError(f"group {gid!r} mixes real and fake entries")
        ids.append(str(gid))
        groups.append(gid)
        labels.append(glabels.pop())
        means.append(float(np.mean(scores.scores[idx])))
    return ScoreSet(ids=ids, groups=groups, labels=np.array(labels), scores=np.array(means))


def val_test_protocol(val: ScoreSet, test: ScoreSet) -> EvalReport:
    """Fit theta on the validation set, report test metrics at that theta."""
    val_g = group_average(val)
    test_g = group_average(test)
    theta_max, _ = greedy_threshold(val_g)
    return EvalReport(
        auc=auc(test_g),
        acc_at_half=accuracy_at(test_g, 0.5),
        acc_greedy=accuracy_at(test_g, theta_max),
        theta_max=theta_max,
        roc=roc_points(test_g),
    )


def same_set_report(scores: ScoreSet) -> EvalReport:
    """Greedy threshold fitted and evaluated on the same set."""
    grouped = group_average(scores)
    theta_max, acc = greedy_threshold(grouped)
    return EvalReport(
        auc=auc(grouped),
        acc_at_half=accuracy_at(grouped, 0.5),
        acc_greedy=acc,
        theta_max=theta_max,
        roc=roc_points(grouped),
    )


def read_scores_csv(path) -> ScoreSet:
    """Read `id,group,label,score` rows; label is real/fake or 0/1."""
    ids, groups, labels, scores = [], [], [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["id", "group", "label", "score"]
        if reader.fieldnames != expected:
            raise DataError(f"scores header {reader.fieldnames} != {expected}")
        for row in reader:
            ids.append(row["id"])
            groups.append(row["group"])
            if row["label"] in ("real", "0"):
                labels.append(0)
            elif row["label"] in ("fake", "1"):
                labels.append(1)
            else:
                raise DataError(f"bad label {row['label']!r}")
            scores.append(float(row["score"]))
    return ScoreSet(ids=ids, groups=groups, labels=np.array(labels), scores=np.array(scores))


def write_scores_csv(path, scores: ScoreSet) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "group", "label", "score"])
        for i in range(len(scores)):
            label = "fake" if scores.labels[i] else "real"
            writer.writerow([scores.ids[i], scores.groups[i], label,
                             repr(float(scores.scores[i]))])


def write_roc_csv(path, roc: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr", "tpr"])
        for fpr, tpr in roc:
            writer.writerow([repr(float(fpr)), repr(float(tpr))])


def report_text(report: EvalReport, extra: dict = None) -> str:
    pairs = dict(report.as_dict())
    pairs.update(extra or {})
    return "".join(f"{k} = {pairs[k]}\n" for k in pairs)
