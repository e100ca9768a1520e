"""KING-robust kinship from pairwise SNP configuration counts.

Only positions where both individuals are visible enter any count, so a
masked matrix yields the kinship a data owner would release as metadata.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import UndefinedKinshipError, ValidationError
from .genotype import HIDDEN, GenotypeMatrix

# KING inference cut-offs: 2^(-3/2), 2^(-5/2), 2^(-7/2)
DUPLICATE_CUTOFF = 2 ** -1.5
FIRST_CUTOFF = 2 ** -2.5
SECOND_CUTOFF = 2 ** -3.5


@dataclass(frozen=True)
class PairCounts:
    n11: int
    n02: int
    n20: int
    het_i: int
    het_k: int
    n_valid: int

    def __post_init__(self):
        vals = (self.n11, self.n02, self.n20, self.het_i, self.het_k, self.n_valid)
        if min(vals) < 0:
            raise ValidationError(f"negative count in {self}")
        if self.n11 > min(self.het_i, self.het_k):
            raise ValidationError("n11 cannot exceed either heterozygote count")
        if self.n11 + self.n02 + self.n20 > self.n_valid:
            raise ValidationError("configuration counts exceed visible positions")

    @property
    def opposite_homozygotes(self) -> int:
        return self.n02 + self.n20

    @property
    def het_small(self) -> int:
        return min(self.het_i, self.het_k)

    @property
    def het_big(self) -> int:
        return max(self.het_i, self.het_k)

    def swapped(self) -> "PairCounts":
        return PairCounts(self.n11, self.n20, self.n02, self.het_k, self.het_i, self.n_valid)

    def remove_double_hets(self, x: int) -> "PairCounts":
        """Counts after hiding ``x`` positions where both are heterozygous."""
        return PairCounts(
            self.n11 - x, self.n02, self.n20, self.het_i - x, self.het_k - x, self.n_valid - x
        )


def count_pair(gi: np.ndarray, gk: np.ndarray) -> PairCounts:
    """Configuration counts for two genotype vectors (``HIDDEN`` excluded)."""
    gi = np.asarray(gi)
    gk = np.asarray(gk)
    visible = (gi != HIDDEN) & (gk != HIDDEN)
    a, b = gi[visible], gk[visible]
    return PairCounts(
        n11=int(np.sum((a == 1) & (b == 1))),
        n02=int(np.sum((a == 0) & (b == 2))),
        n20=int(np.sum((a == 2) & (b == 0))),
        het_i=int(np.sum(a == 1)),
        het_k=int(np.sum(b == 1)),
        n_valid=int(visible.sum()),
    )


def pair_counts(matrix: GenotypeMatrix, i: str, k: str) -> PairCounts:
    return count_pair(matrix.row(i), matrix.row(k))


def kinship(counts: PairCounts) -> float:
    """KING-robust kinship, oriented so the smaller heterozygote count is the denominator.

    Raises:
        UndefinedKinshipError: if either individual has no visible heterozygous site.
    """
    small = counts.het_small
    if small == 0:
        raise UndefinedKinshipError(
            f"no visible heterozygous sites (het counts {counts.het_i}, {counts.het_k})"
        )
    numerator = (
        2 * counts.n11 - 4 * counts.opposite_homozygotes - counts.het_big + small
    )
    return numerator / (4 * small)


def kinship_or_none(counts: PairCounts) -> float | None:
    try:
        return kinship(counts)
    except UndefinedKinshipError:
        return None


def classify_degree(phi: float) -> str:
    if not math.isfinite(phi):
        raise ValidationError(f"kinship must be finite, got {phi}")
    if phi > DUPLICATE_CUTOFF:
        return "duplicate"
    if phi > FIRST_CUTOFF:
        return "first"
    if phi > SECOND_CUTOFF:
        return "second"
    return "unrelated"


class KinshipMatrix:
    """Pairwise kinship keyed by unordered pair; undefined pairs are absent."""

    def __init__(self, ids: Sequence[str], entries: dict, warnings: Sequence[str] = ()):
        self.ids = tuple(ids)
        self.entries = {_key(a, b): float(v) for (a, b), v in entries.items()}
        self.warnings = list(warnings)

    def __getitem__(self, pair) -> float:
        return self.entries[_key(*pair)]

    def get(self, a: str, b: str, default=None):
        return self.entries.get(_key(a, b), default)

    def __contains__(self, pair) -> bool:
        return _key(*pair) in self.entries

    def __len__(self):
        return len(self.entries)

    def degree(self, a: str, b: str) -> str:
        phi = self.get(a, b)
        return "unrelated" if phi is None else classify_degree(phi)

    def rows(self):
        for (a, b), phi in sorted(self.entries.items()):
            yield a, b, phi, classify_degree(phi)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id_a", "id_b", "phi", "degree"])
            for a, b, phi, degree in self.rows():
                w.writerow([a, b, repr(phi), degree])

    @classmethod
    def from_csv(cls, path) -> "KinshipMatrix":
        entries, ids = {}, []
        with Path(path).open(newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"id_a", "id_b", "phi"} - set(reader.fieldnames or ())
            if missing:
                raise ValidationError(f"kinship CSV missing columns {sorted(missing)}")
            for rec in reader:
                a, b = rec["id_a"], rec["id_b"]
                try:
                    entries[(a, b)] = float(rec["phi"])
                except ValueError:
                    raise ValidationError(f"bad phi value {rec['phi']!r}") from None
                ids += [x for x in (a, b) if x not in ids]
        return cls(ids, entries)


def _key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


def kinship_matrix(matrix: GenotypeMatrix, ids: Sequence[str] | None = None) -> KinshipMatrix:
    """All pairwise kinships among ``ids`` over the (possibly masked) matrix."""
    ids = list(matrix.individuals if ids is None else ids)
    rows = {i: matrix.row(i) for i in ids}
    entries, warnings = {}, []
    for n, a in enumerate(ids):
        for b in ids[n + 1:]:
            try:
                entries[(a, b)] = kinship(count_pair(rows[a], rows[b]))
            except UndefinedKinshipError as exc:
                warnings.append(f"{a},{b}: {exc}")
    return KinshipMatrix(ids, entries, warnings)
