"""Memory bank: per-sample feature store doubling as a non-parametric classifier.

Each of the n rows holds a running, L2-normalized feature for one training
sample. Rows are updated with a momentum blend and renormalized; similarity
and rank lists are computed directly on the stored rows.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError, ParseError

ZERO_NORM_EPS = 1e-12


@dataclass
class RankList:
    """Full descending-similarity ordering of all rows against one anchor row.

    order[0] is the most similar sample index; scores are sorted to match.
    Ties are broken by ascending sample index, so the ordering is deterministic.
    """

    anchor: int
    order: np.ndarray
    scores: np.ndarray

    def top(self, k):
        return self.order[:k]


class MemoryBank:
    """n x d row store with momentum updates.

    Rows start at zero ("cold"); a cold row is skipped by renormalization and
    must not be used as a rank-list anchor.
    """

    def __init__(self, n, d, update_rate=0.5):
        if n < 1:
            raise ConfigError(f"memory bank needs n >= 1, got n={n}")
        if d < 1:
            raise ConfigError(f"memory bank needs d >= 1, got d={d}")
        self.features = np.zeros((n, d), dtype=np.float64)
        self.update_rate = float(update_rate)
        self.epoch = 0

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def _check_index(self, i):
        if not 0 <= i < self.n:
            raise IndexError(f"sample index {i} outside [0, {self.n})")

    def row_norm(self, i):
        self._check_index(i)
        return float(np.linalg.norm(self.features[i]))

    def update_row(self, i, f, alpha):
        """Blend row i towards f with rate alpha, then renormalize.

        new_row = alpha * f + (1 - alpha) * old_row, L2-normalized unless the
        blend has (near-)zero norm, in which case it is stored as-is.
        """
        self._check_index(i)
        f = np.asarray(f, dtype=np.float64)
        if f.shape != (self.d,):
            raise ConfigError(f"feature has shape {f.shape}, expected ({self.d},)")
        if not np.all(np.isfinite(f)):
            raise NumericError(f"non-finite feature for sample {i}")
        if not 0.0 <= alpha <= 1.0:
            raise ConfigError(f"update rate must be in [0, 1], got {alpha}")
        if alpha == 0.0:
            # identity blend; skip renormalization so the row is bitwise stable
            return
        blended = alpha * f + (1.0 - alpha) * self.features[i]
        norm = np.linalg.norm(blended)
        if norm > ZERO_NORM_EPS:
            blended = blended / norm
        self.features[i] = blended

    def overwrite_row(self, i, f):
        """Replace row i outright (used to bootstrap cold rows)."""
        self._check_index(i)
        f = np.asarray(f, dtype=np.float64)
        if not np.all(np.isfinite(f)):
            raise NumericError(f"non-finite feature for sample {i}")
        norm = np.linalg.norm(f)
        if norm > ZERO_NORM_EPS:
            f = f / norm
        self.features[i] = f

    def similarity(self, i, j):
        """Inner product of stored rows i and j."""
        self._check_index(i)
        self._check_index(j)
        return float(self.features[i] @ self.features[j])

    def rank_list(self, i):
        """All samples sorted by descending similarity to row i.

        Requires a warm (nonzero) anchor row; ranking against a zero row is
        meaningless before the bank has been filled.
        """
        self._check_index(i)
        if self.row_norm(i) <= ZERO_NORM_EPS:
            raise NumericError(f"rank list undefined for zero-norm row {i}")
        scores = self.features @ self.features[i]
        order = np.lexsort((np.arange(self.n), -scores))
        return RankList(anchor=i, order=order, scores=scores[order])

    def score_against_memory(self, f):
        """Classification scores of feature f against every stored row.

        Accepts a single (d,) vector or a (B, d) batch; returns (n,) or (B, n).
        """
        f = np.asarray(f, dtype=np.float64)
        if f.shape[-1] != self.d:
            raise ConfigError(
                f"feature dimension {f.shape[-1]} does not match bank d={self.d}"
            )
        return f @ self.features.T

    # ---- snapshot I/O ----------------------------------------------------

    def save(self, path):
        """Write the bank as CSV: one metadata line `n,d,epoch,alpha`, then
        one row per line with full double precision."""
        with open(path, "w") as fh:
            fh.write(f"{self.n},{self.d},{self.epoch},{self.update_rate!r}\n")
            for row in self.features:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if len(header) != 4:
                raise ParseError(f"bad bank header: {header!r}", line=1)
            n, d = int(header[0]), int(header[1])
            bank = cls(n, d, update_rate=float(header[3]))
            bank.epoch = int(header[2])
            for i in range(n):
                line = fh.readline()
                if not line:
                    raise ParseError("bank file truncated", line=i + 2)
                vals = np.array([float(v) for v in line.strip().split(",")])
                if vals.shape != (d,):
                    raise ParseError(
                        f"bank row has {vals.size} values, expected {d}", line=i + 2
                    )
                bank.features[i] = vals
        return bank
