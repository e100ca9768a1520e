"""Exact genotype distributions for small pedigrees and sums of independent genotypes.

Everything is vectorized over SNP positions: a leading axis of length ``m``
carries one MAF per position.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .genotype import _topological_order

MAX_MODELED = 6


@dataclass(frozen=True)
class GenotypeDist:
    probs: tuple[float, float, float]

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (3,) or (p < 0).any() or abs(p.sum() - 1) > 1e-12:
            raise ValidationError(f"not a genotype distribution: {self.probs}")
        object.__setattr__(self, "probs", tuple(float(x) for x in p))

    def __getitem__(self, g: int) -> float:
        return self.probs[g]

    def as_array(self) -> np.ndarray:
        return np.array(self.probs)


@dataclass(frozen=True)
class SumDist:
    """Distribution over consecutive integer sums starting at ``support_offset``."""

    support_offset: int
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if (p < -1e-15).any() or abs(p.sum() - 1) > 1e-9:
            raise ValidationError("sum distribution does not normalize")
        object.__setattr__(self, "probs", p)

    def pmf(self, s: int) -> float:
        k = s - self.support_offset
        return float(self.probs[k]) if 0 <= k < len(self.probs) else 0.0

    @property
    def support(self) -> range:
        return range(self.support_offset, self.support_offset + len(self.probs))


def hwe_array(mafs) -> np.ndarray:
    """Hardy-Weinberg genotype probabilities, shape ``mafs.shape + (3,)``."""
    p = np.asarray(mafs, dtype=float)
    return np.stack([(1 - p) ** 2, 2 * p * (1 - p), p ** 2], axis=-1)


def hwe_prior(maf: float) -> GenotypeDist:
    if not (0 < maf <= 0.5):
        raise ValidationError(f"maf must lie in (0, 0.5], got {maf}")
    return GenotypeDist(tuple(hwe_array(maf)))


def _build_transmission() -> np.ndarray:
    gamete = np.array([[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]])  # P(transmit major/minor | g)
    table = np.zeros((3, 3, 3))
    for f in range(3):
        for m in range(3):
            for a in range(2):
                for b in range(2):
                    table[f, m, a + b] += gamete[f, a] * gamete[m, b]
    return table


# TRANSMISSION[father, mother, child]
TRANSMISSION = _build_transmission()


def transmission(father: int, mother: int) -> GenotypeDist:
    if father not in (0, 1, 2) or mother not in (0, 1, 2):
        raise ValidationError("parent genotypes must be 0, 1 or 2")
    return GenotypeDist(tuple(TRANSMISSION[father, mother]))


@dataclass(frozen=True)
class PedigreeModel:
    """Modeled members plus parent links; parents absent from ``members`` are latent."""

    members: tuple[str, ...]
    parents: Mapping[str, tuple[str, str]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "parents", dict(self.parents))
        if len(set(self.members)) != len(self.members):
            raise ValidationError("duplicate modeled member")
        if len(self.members) > MAX_MODELED:
            raise ValidationError(f"at most {MAX_MODELED} modeled members supported")
        _topological_order(self.parents)

    @property
    def nodes(self) -> list[str]:
        order = _topological_order(self.parents)
        return order + [m for m in self.members if m not in order]

    @property
    def latent(self) -> list[str]:
        return [n for n in self.nodes if n not in self.members]


def family_joint_array(model: PedigreeModel, mafs) -> np.ndarray:
    """Joint genotype probabilities over ``model.members``, shape ``(m, 3, ..., 3)``.

    Latent ancestors are summed out by a single einsum contraction.
    """
    mafs = np.atleast_1d(np.asarray(mafs, dtype=float))
    nodes = model.nodes
    if len(nodes) > 25:
        raise ValidationError("pedigree too large for exact elimination")
    letter = dict(zip(nodes, string.ascii_letters))
    batch = "Z"
    prior = hwe_array(mafs)
    operands, subs = [], []
    for node in nodes:
        if node in model.parents:
            f, m = model.parents[node]
            operands.append(TRANSMISSION)
            subs.append(letter[f] + letter[m] + letter[node])
        else:
            operands.append(prior)
            subs.append(batch + letter[node])
    out = batch + "".join(letter[x] for x in model.members)
    expr = ",".join(subs) + "->" + out
    return np.einsum(expr, *operands, optimize=True)


def family_joint(model: PedigreeModel, maf: float) -> dict[tuple[int, ...], float]:
    """Exact joint distribution as a mapping genotype tuple -> probability."""
    joint = family_joint_array(model, [maf])[0]
    return {idx: float(joint[idx]) for idx in np.ndindex(joint.shape)}


def convolve_sums(dists: Sequence[GenotypeDist]) -> SumDist:
    probs = np.array([1.0])
    for d in dists:
        probs = np.convolve(probs, d.as_array())
    return SumDist(0, probs)


def convolve_batch(member_probs: np.ndarray) -> np.ndarray:
    """Sum distribution per position for independent members.

    Args:
        member_probs: array ``(m, k, 3)`` of genotype probabilities.

    Returns:
        Array ``(m, 2k + 1)``; column ``s`` is P(sum = s).
    """
    m, k, _ = member_probs.shape
    out = np.zeros((m, 2 * k + 1))
    out[:, 0] = 1.0
    for j in range(k):
        prev = out.copy()
        out[:] = 0.0
        width = 2 * j + 1
        for g in range(3):
            out[:, g:g + width] += prev[:, :width] * member_probs[:, j, g:g + 1]
    return out
