"""Positive-label prediction over a frozen memory bank.

Three predictors share the bank's rank lists:
  * threshold + cycle-consistency prediction (the main method),
  * plain top-K nearest neighbors,
  * similarity-score thresholding alone.

All of them return a MultiLabel: the anchor index plus the set of sample
indices treated as positive classes. During warmup the label is the singleton
{anchor}.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ParseError


@dataclass
class CandidateSet:
    """Rank-list prefix whose similarity scores clear the threshold."""

    anchor: int
    candidates: np.ndarray  # rank-list order preserved
    k: int
    threshold: float


@dataclass(frozen=True)
class MultiLabel:
    """Signed label vector over n classes, stored as the positive-index set."""

    anchor: int
    positives: tuple  # sorted ascending
    n: int

    def __post_init__(self):
        if self.anchor not in self.positives:
            raise ConfigError(f"anchor {self.anchor} missing from its positive set")

    def signed(self):
        """Dense +/-1 view of the label."""
        y = -np.ones(self.n)
        y[list(self.positives)] = 1.0
        return y

    def positive_array(self):
        return np.array(self.positives, dtype=np.intp)


def make_label(anchor, positives, n):
    pos = sorted(set(int(p) for p in positives) | {int(anchor)})
    return MultiLabel(anchor=int(anchor), positives=tuple(pos), n=n)


def singleton_label(anchor, n):
    """Initial single-class label: the sample is its own only positive."""
    return MultiLabel(anchor=int(anchor), positives=(int(anchor),), n=n)


def filter_by_threshold(rank, t):
    """Maximal rank-list prefix with similarity >= t.

    The threshold comparison is inclusive so a self-score exactly at t keeps
    the anchor in its own candidate set.
    """
    if not -1.0 < t < 1.0:
        raise ConfigError(f"similarity threshold must lie in (-1, 1), got {t}")
    k = int(np.sum(rank.scores >= t))
    return CandidateSet(
        anchor=rank.anchor, candidates=rank.order[:k].copy(), k=k, threshold=t
    )


def mplp_predict(bank, i, t):
    """Cycle-consistent positive-label prediction for anchor i.

    Candidates are the threshold-filtered rank-list prefix of size k. They are
    traversed in rank order; candidate j survives iff i appears among the top-k
    entries of j's own rank list (k is the anchor's candidate count). The
    traversal stops at the first rejection and the accepted prefix becomes the
    positive set.
    """
    rank = bank.rank_list(i)
    cand = filter_by_threshold(rank, t)
    accepted = []
    for j in cand.candidates:
        if i in bank.rank_list(int(j)).top(cand.k):
            accepted.append(int(j))
        else:
            break
    return make_label(i, accepted, bank.n)


def knn_predict(bank, i, k):
    """Fixed-size baseline: the k nearest samples (self included)."""
    if not 1 <= k <= bank.n:
        raise ConfigError(f"k={k} outside [1, {bank.n}]")
    rank = bank.rank_list(i)
    return make_label(i, rank.top(k), bank.n)


def similarity_score_predict(bank, i, t):
    """Threshold-only baseline: the candidate set with no cycle filtering."""
    rank = bank.rank_list(i)
    cand = filter_by_threshold(rank, t)
    return make_label(i, cand.candidates, bank.n)


def label_quality(pred, identities):
    """Precision/recall of a predicted positive set against true identities.

    The anchor counts in both numerator and denominators.
    """
    identities = np.asarray(identities)
    same = identities == identities[pred.anchor]
    pos = pred.positive_array()
    hits = int(np.sum(same[pos]))
    precision = hits / len(pos)
    recall = hits / int(np.sum(same))
    return precision, recall


# ---- labels file format --------------------------------------------------


def save_labels(labels, path):
    """One line per sample: `anchor: p1 p2 ...` with sorted positive indices."""
    with open(path, "w") as fh:
        for lab in labels:
            fh.write(f"{lab.anchor}: " + " ".join(str(p) for p in lab.positives) + "\n")


def load_labels(path, n):
    labels = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                head, tail = line.split(":", 1)
                anchor = int(head)
                positives = [int(p) for p in tail.split()]
            except ValueError as exc:
                raise ParseError(f"malformed label line: {line!r}", line=lineno) from exc
            labels.append(make_label(anchor, positives, n))
    return labels
