"""Count queries over a (masked) genotype matrix with Laplace perturbation.

A hidden cell contributes nothing to the sum, but its owner is still counted
in ``q``: the querier cannot tell masked participants apart.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .genotype import HIDDEN, GenotypeMatrix, Pedigree

MECHANISMS = ("standard_lpm", "dependent_sensitivity", "none")
SENSITIVITY = 2.0


@dataclass(frozen=True)
class QuerySpec:
    position: str
    participants: tuple[str, ...]
    epsilon: float | None = None
    mechanism: str = "standard_lpm"

    def __post_init__(self):
        object.__setattr__(self, "participants", tuple(self.participants))
        if not self.participants:
            raise ValidationError("a query needs at least one participant")
        if self.mechanism not in MECHANISMS:
            raise ValidationError(f"unknown mechanism {self.mechanism!r}")
        if self.mechanism != "none" and not (self.epsilon is not None and self.epsilon > 0):
            raise ValidationError(f"epsilon must be > 0 for {self.mechanism}, got {self.epsilon}")


@dataclass(frozen=True)
class QueryAnswer:
    noisy_sum: float
    q: int
    position: str


def laplace_scale(epsilon: float) -> float:
    return SENSITIVITY / epsilon


def laplace_noise(scale: float, rng: np.random.Generator, size=None):
    """Laplace(0, scale) draws by inverting the CDF of a uniform stream."""
    if not scale > 0:
        raise ValidationError(f"Laplace scale must be > 0, got {scale}")
    u = rng.random(size)
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)  # keep log finite
    v = u - 0.5
    draw = -scale * np.sign(v) * np.log1p(-2.0 * np.abs(v))
    return float(draw) if size is None else draw


def participant_sums(matrix: GenotypeMatrix, participants: Sequence[str], cols=None) -> np.ndarray:
    """Per-position sums over ``participants`` with hidden cells counted as 0."""
    rows = np.vstack([matrix.row(p) for p in participants])
    if cols is not None:
        rows = rows[:, cols]
    return np.where(rows == HIDDEN, 0, rows).sum(axis=0).astype(np.int64)


def true_count(matrix: GenotypeMatrix, spec: QuerySpec) -> int:
    col = matrix.col_index(spec.position)
    return int(participant_sums(matrix, spec.participants, [col])[0])


def dependence_factor(participants: Sequence[str], pedigree: Pedigree | None) -> int:
    """Largest number of participants drawn from any single family (at least 1)."""
    if pedigree is None:
        return 1
    chosen = set(participants)
    return max([len(fam & chosen) for fam in pedigree.families()] + [1])


def noise_scale(spec: QuerySpec, pedigree: Pedigree | None = None) -> float:
    if spec.mechanism == "none":
        return 0.0
    scale = laplace_scale(spec.epsilon)
    if spec.mechanism == "dependent_sensitivity":
        scale *= dependence_factor(spec.participants, pedigree)
    return scale


def answer_query(matrix: GenotypeMatrix, spec: QuerySpec, pedigree: Pedigree | None, rng: np.random.Generator) -> QueryAnswer:
    total = true_count(matrix, spec)
    scale = noise_scale(spec, pedigree)
    noisy = float(total) + (laplace_noise(scale, rng) if scale > 0 else 0.0)
    return QueryAnswer(noisy, len(spec.participants), spec.position)


def maf_release(answer: QueryAnswer) -> float:
    if answer.q <= 0:
        raise ValidationError("q must be positive")
    return min(1.0, max(0.0, answer.noisy_sum / (2 * answer.q)))


# --- batch files ----------------------------------------------------------

def read_query_batch(path) -> list[QuerySpec]:
    specs = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"position", "participants", "epsilon", "mechanism"}
        missing = need - set(reader.fieldnames or ())
        if missing:
            raise ValidationError(f"query batch missing columns {sorted(missing)}")
        for lineno, rec in enumerate(reader, start=2):
            eps_text = rec["epsilon"].strip()
            try:
                eps = float(eps_text) if eps_text else None
            except ValueError:
                raise ValidationError(f"line {lineno}: bad epsilon {eps_text!r}") from None
            if eps is not None and math.isinf(eps):
                eps = None
            participants = tuple(p for p in rec["participants"].split(";") if p)
            try:
                specs.append(QuerySpec(rec["position"], participants, eps, rec["mechanism"].strip()))
            except ValidationError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from None
    return specs


def write_query_batch(specs: Sequence[QuerySpec], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["position", "participants", "epsilon", "mechanism"])
        for s in specs:
            w.writerow([s.position, ";".join(s.participants), "" if s.epsilon is None else repr(s.epsilon), s.mechanism])


def write_answers(answers: Sequence[QueryAnswer], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["position", "q", "noisy_sum"])
        for a in answers:
            w.writerow([a.position, a.q, repr(a.noisy_sum)])


def read_answers(path) -> list[QueryAnswer]:
    out = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"position", "q", "noisy_sum"} - set(reader.fieldnames or ())
        if missing:
            raise ValidationError(f"answers file missing columns {sorted(missing)}")
        for lineno, rec in enumerate(reader, start=2):
            try:
                out.append(QueryAnswer(float(rec["noisy_sum"]), int(rec["q"]), rec["position"]))
            except ValueError:
                raise ValidationError(f"line {lineno}: malformed answer row") from None
    return out
