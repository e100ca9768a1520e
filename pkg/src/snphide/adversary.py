"""Attribute inference on noisy count answers, with or without family dependencies.

The adversary sees only the noisy sum, the participant list, public MAFs and
the released kinship metadata. It reconstructs a pedigree from the metadata,
never from the true relations, and assumes every participant contributes
their genotype to the sum.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dp import QueryAnswer, laplace_scale
from .errors import ValidationError
from .inference import MAX_MODELED, PedigreeModel, convolve_batch, family_joint_array, hwe_array
from .kinship import KinshipMatrix

MODES = ("with_dependency", "without_dependency")


@dataclass(frozen=True)
class AdversaryKnowledge:
    memberships: tuple[str, ...]
    kinship_metadata: KinshipMatrix
    maf_table: Mapping[str, float]
    mode: str = "with_dependency"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"unknown adversary mode {self.mode!r}")
        object.__setattr__(self, "memberships", tuple(self.memberships))

    def with_mode(self, mode: str) -> "AdversaryKnowledge":
        return AdversaryKnowledge(self.memberships, self.kinship_metadata, self.maf_table, mode)


@dataclass(frozen=True)
class Posterior:
    probs: tuple[float, float, float]
    map_value: int
    map_prob: float

    @classmethod
    def from_probs(cls, probs) -> "Posterior":
        probs = np.asarray(probs, dtype=float)
        g = int(np.argmax(probs))  # first maximum: ties go to the smaller genotype
        return cls(tuple(float(x) for x in probs), g, float(probs[g]))


def reconstruct_pedigree(target: str, others: Sequence[str], metadata: KinshipMatrix) -> PedigreeModel:
    """Target-centred pedigree explaining the metadata degrees.

    First-degree relatives become the target's parents (then full siblings);
    second-degree relatives become siblings of whichever parent they are
    first-degree with, otherwise of a latent parent. Duplicates are treated as
    first-degree. Members that fit nowhere are left out of the model.
    """
    def degree(a, b):
        d = metadata.degree(a, b)
        return "first" if d == "duplicate" else d

    slots = ["_parent1", "_parent2"]  # latent until a relative fills them
    parents: dict[str, tuple[str, str]] = {}
    placed = [target]
    sibs = []
    first = [r for r in others if degree(target, r) == "first"]
    for r in first:
        if len(placed) >= MAX_MODELED:
            break
        free = [k for k, s in enumerate(slots) if s.startswith("_")]
        if free and all(degree(r, slots[k]) != "first" for k in range(2) if not slots[k].startswith("_")):
            slots[free[0]] = r
        else:
            sibs.append(r)
        placed.append(r)

    parents[target] = (slots[0], slots[1])
    for s in sibs:
        parents[s] = (slots[0], slots[1])

    rest = [r for r in others if r not in placed]
    for r in rest:
        if len(placed) >= MAX_MODELED:
            break
        d = degree(target, r)
        anchor = next((s for s in slots if not s.startswith("_") and degree(r, s) == "first"), None)
        if anchor is None and d == "second":
            anchor = next((s for s in slots if s.startswith("_")), slots[0])
        if anchor is None:
            continue
        if anchor not in parents:
            parents[anchor] = (f"_gp_{anchor}_1", f"_gp_{anchor}_2")
        parents[r] = parents[anchor]
        placed.append(r)
    return PedigreeModel(tuple(placed), parents)


def _relative_block(model: PedigreeModel, mafs: np.ndarray) -> np.ndarray:
    """P(target = g, sum of other modeled members = s), shape ``(m, 3, 2k + 1)``."""
    joint = family_joint_array(model, mafs)
    m = joint.shape[0]
    k = len(model.members) - 1
    flat = joint.reshape(m, 3, 3 ** k)
    sums = np.array([sum(t) for t in itertools.product(range(3), repeat=k)], dtype=int)
    onehot = np.zeros((3 ** k, 2 * k + 1))
    onehot[np.arange(3 ** k), sums] = 1.0
    return flat @ onehot


def _total_distribution(block: np.ndarray, unrelated: np.ndarray) -> np.ndarray:
    """Combine target/relative block with independent sums: ``(m, 3, n_total)``."""
    m, _, width = block.shape
    u = unrelated.shape[1]
    total = np.zeros((m, 3, 2 + width + u - 1))
    for g in range(3):
        for s in range(width):
            total[:, g, g + s:g + s + u] += block[:, g, s:s + 1] * unrelated
    return total


def posterior_matrix(
    knowledge: AdversaryKnowledge,
    mafs,
    noisy_sums,
    participants: Sequence[str],
    target: str,
    epsilon: float | None,
    model: PedigreeModel | None = None,
) -> np.ndarray:
    """Posterior over the target's genotype at each position, shape ``(m, 3)``.

    ``epsilon=None`` (or inf) means answers are exact sums.
    """
    participants = list(participants)
    if target not in participants:
        raise ValidationError(f"target {target!r} is not a query participant")
    mafs = np.atleast_1d(np.asarray(mafs, dtype=float))
    noisy = np.atleast_1d(np.asarray(noisy_sums, dtype=float))
    others = [p for p in participants if p != target]

    if knowledge.mode == "with_dependency":
        if model is None:
            model = reconstruct_pedigree(target, others, knowledge.kinship_metadata)
        modeled = set(model.members)
    else:
        model = PedigreeModel((target,))
        modeled = {target}
    independent = [p for p in others if p not in modeled]

    block = _relative_block(model, mafs)
    indep_probs = np.repeat(hwe_array(mafs)[:, None, :], len(independent), axis=1)
    unrelated = convolve_batch(indep_probs)
    total = _total_distribution(block, unrelated)
    support = np.arange(total.shape[2])

    if epsilon is None or math.isinf(epsilon):
        like = (np.abs(support[None, :] - noisy[:, None]) < 0.5).astype(float)
        loglike = np.where(like > 0, 0.0, -np.inf)
    else:
        b = laplace_scale(epsilon)
        loglike = -np.abs(noisy[:, None] - support[None, :]) / b
    finite = np.isfinite(loglike).any(axis=1)
    shift = np.where(finite, np.max(np.where(np.isfinite(loglike), loglike, -np.inf), axis=1), 0.0)
    weights = np.exp(loglike - shift[:, None])
    post = np.einsum("mgt,mt->mg", total, weights)
    mass = post.sum(axis=1, keepdims=True)
    prior = total.sum(axis=2)
    # an answer impossible under the model carries no information
    post = np.where(mass > 0, post / np.where(mass > 0, mass, 1.0), prior)
    return post / post.sum(axis=1, keepdims=True)


def infer_snp(
    knowledge: AdversaryKnowledge,
    answer: QueryAnswer,
    participants: Sequence[str],
    target: str,
    epsilon: float | None,
) -> Posterior:
    if answer.q != len(participants):
        raise ValidationError(f"answer reports q={answer.q} but {len(participants)} participants given")
    maf = knowledge.maf_table[answer.position]
    probs = posterior_matrix(knowledge, [maf], [answer.noisy_sum], participants, target, epsilon)[0]
    return Posterior.from_probs(probs)


def attack_sweep(
    knowledge: AdversaryKnowledge,
    answers: Sequence[QueryAnswer],
    participants: Sequence[str],
    target: str,
    epsilon: float | None,
) -> list[Posterior]:
    """One posterior per answered position; positions are treated independently."""
    if not answers:
        return []
    for a in answers:
        if a.q != len(participants):
            raise ValidationError(f"answer for {a.position} reports q={a.q}, expected {len(participants)}")
    try:
        mafs = [knowledge.maf_table[a.position] for a in answers]
    except KeyError as exc:
        raise ValidationError(f"no MAF for position {exc.args[0]!r}") from None
    probs = posterior_matrix(knowledge, mafs, [a.noisy_sum for a in answers], participants, target, epsilon)
    return [Posterior.from_probs(p) for p in probs]


def correctness(posteriors: Sequence[Posterior], truths: Sequence[int]) -> float:
    """Adversary success in [0, 1]: one minus the confidence-weighted genotype error."""
    if len(posteriors) != len(truths):
        raise ValidationError(f"{len(posteriors)} posteriors but {len(truths)} truths")
    if not posteriors:
        raise ValidationError("correctness needs at least one SNP")
    err = sum(p.map_prob * abs(int(t) - p.map_value) / 2 for p, t in zip(posteriors, truths))
    return 1.0 - err / len(posteriors)


def correctness_from_matrix(post: np.ndarray, truths) -> float:
    """Vectorized :func:`correctness` for a ``(m, 3)`` posterior array."""
    truths = np.asarray(truths)
    map_value = np.argmax(post, axis=1)
    map_prob = post[np.arange(len(post)), map_value]
    return float(1.0 - np.mean(map_prob * np.abs(truths - map_value) / 2))


def write_attack_report(positions, truths, posteriors: Sequence[Posterior], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["position", "true_value", "map_value", "map_prob", "p0", "p1", "p2"])
        for pos, t, p in zip(positions, truths, posteriors):
            w.writerow([pos, "" if t is None else int(t), p.map_value, repr(p.map_prob), *map(repr, p.probs)])
