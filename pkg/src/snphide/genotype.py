"""Genotype and pedigree data model, file formats, and a Mendelian cohort generator.

Genotypes are minor-allele counts stored in an ``int8`` matrix; ``HIDDEN``
(-1) marks a cell masked by the defense. Masked cells are kept in place, not
dropped, so a masked participant still counts toward query sizes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import IngestionError, ValidationError

HIDDEN = -1
GENOTYPE_VALUES = (0, 1, 2)
DEGREES = ("first", "second")

_CELL_PARSE = {"0": 0, "1": 1, "2": 2, "H": HIDDEN}
_CELL_FORMAT = {0: "0", 1: "1", 2: "2", HIDDEN: "H"}


@dataclass(frozen=True)
class SnpMeta:
    position_id: str
    maf: float

    def __post_init__(self):
        if not (0.0 < self.maf <= 0.5):
            raise ValidationError(
                f"maf for {self.position_id!r} must lie in (0, 0.5], got {self.maf}"
            )


class GenotypeMatrix:
    """Individuals x SNPs matrix of minor-allele counts, with ``HIDDEN`` cells.

    Instances are treated as immutable: the backing array is flagged
    read-only and every transformation returns a new matrix.
    """

    def __init__(self, individuals, snps, values, labels=None):
        individuals = tuple(str(i) for i in individuals)
        snps = tuple(snps)
        values = np.array(values, dtype=np.int8, copy=True)
        if values.shape != (len(individuals), len(snps)):
            raise ValidationError(
                f"values shape {values.shape} does not match "
                f"{len(individuals)} individuals x {len(snps)} SNPs"
            )
        if len(set(individuals)) != len(individuals):
            raise ValidationError("individual ids must be unique")
        positions = [s.position_id for s in snps]
        if len(set(positions)) != len(positions):
            raise ValidationError("position ids must be unique")
        bad = ~np.isin(values, (0, 1, 2, HIDDEN))
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise ValidationError(
                f"cell ({individuals[r]}, {positions[c]}) has invalid value {values[r, c]}"
            )
        values.flags.writeable = False
        self.individuals = individuals
        self.snps = snps
        self.values = values
        self.labels = tuple(labels) if labels is not None else ("",) * len(individuals)
        self._row = {ind: k for k, ind in enumerate(individuals)}
        self._col = {pos: k for k, pos in enumerate(positions)}

    @property
    def positions(self) -> tuple[str, ...]:
        return tuple(s.position_id for s in self.snps)

    @property
    def mafs(self) -> np.ndarray:
        return np.array([s.maf for s in self.snps])

    @property
    def shape(self):
        return self.values.shape

    def row_index(self, individual: str) -> int:
        try:
            return self._row[individual]
        except KeyError:
            raise ValidationError(f"unknown individual {individual!r}") from None

    def col_index(self, position: str) -> int:
        try:
            return self._col[position]
        except KeyError:
            raise ValidationError(f"unknown position {position!r}") from None

    def row(self, individual: str) -> np.ndarray:
        return self.values[self.row_index(individual)]

    def cell(self, individual: str, position: str) -> int:
        return int(self.values[self.row_index(individual), self.col_index(position)])

    def with_values(self, values) -> "GenotypeMatrix":
        return GenotypeMatrix(self.individuals, self.snps, values, self.labels)

    def subset_positions(self, positions: Sequence[str]) -> "GenotypeMatrix":
        cols = [self.col_index(p) for p in positions]
        return GenotypeMatrix(
            self.individuals, [self.snps[c] for c in cols], self.values[:, cols], self.labels
        )

    def __eq__(self, other):
        if not isinstance(other, GenotypeMatrix):
            return NotImplemented
        return (
            self.individuals == other.individuals
            and self.snps == other.snps
            and self.labels == other.labels
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        n, m = self.shape
        hidden = int((self.values == HIDDEN).sum())
        return f"GenotypeMatrix({n} individuals x {m} SNPs, {hidden} hidden)"


@dataclass(frozen=True)
class Pedigree:
    """Declared relations among dataset members.

    ``relations`` holds canonical ``(a, b, degree)`` triples with ``a < b``;
    lookups through :meth:`degree` are symmetric. ``parents`` maps a child to
    ``(father, mother)`` and may reference latent ancestors that are not
    dataset members.
    """

    members: tuple[str, ...] = ()
    relations: frozenset = frozenset()
    parents: Mapping[str, tuple[str, str]] = field(default_factory=dict)

    def __post_init__(self):
        seen = {}
        canon = set()
        for a, b, degree in self.relations:
            if a == b:
                raise ValidationError(f"self-relation on {a!r}")
            if degree not in DEGREES:
                raise ValidationError(f"unknown degree {degree!r}")
            key = (min(a, b), max(a, b))
            if key in seen and seen[key] != degree:
                raise ValidationError(f"pair {key} declared with two degrees")
            seen[key] = degree
            canon.add((*key, degree))
        object.__setattr__(self, "relations", frozenset(canon))
        object.__setattr__(self, "parents", dict(self.parents))
        object.__setattr__(self, "members", tuple(self.members))
        _topological_order(self.parents)  # raises on cycles

    def degree(self, a: str, b: str) -> str | None:
        key = (min(a, b), max(a, b))
        for x, y, d in self.relations:
            if (x, y) == key:
                return d
        return None

    def relatives(self, individual: str) -> dict[str, str]:
        out = {}
        for a, b, d in self.relations:
            if a == individual:
                out[b] = d
            elif b == individual:
                out[a] = d
        return out

    def related_pairs(self) -> list[tuple[str, str, str]]:
        return sorted(self.relations)

    def related_members(self) -> set[str]:
        return {x for a, b, _ in self.relations for x in (a, b)}

    def families(self) -> list[set[str]]:
        """Connected components of the relation graph (singletons excluded)."""
        adj: dict[str, set[str]] = {}
        for a, b, _ in self.relations:
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)
        seen: set[str] = set()
        comps = []
        for start in sorted(adj):
            if start in seen:
                continue
            comp, stack = set(), [start]
            while stack:
                node = stack.pop()
                if node in comp:
                    continue
                comp.add(node)
                stack.extend(adj[node] - comp)
            seen |= comp
            comps.append(comp)
        return comps

    def to_json(self) -> dict:
        out = {"relations": [[a, b, d] for a, b, d in sorted(self.relations)]}
        if self.parents:
            out["parents"] = {c: list(p) for c, p in sorted(self.parents.items())}
        if self.members:
            out["members"] = list(self.members)
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "Pedigree":
        try:
            relations = frozenset((str(a), str(b), str(d)) for a, b, d in obj.get("relations", []))
            parents = {str(c): (str(p[0]), str(p[1])) for c, p in obj.get("parents", {}).items()}
        except (TypeError, ValueError, IndexError) as exc:
            raise ValidationError(f"malformed pedigree: {exc}") from None
        members = obj.get("members")
        if members is None:
            members = sorted({x for a, b, _ in relations for x in (a, b)})
        return cls(tuple(members), relations, parents)


@dataclass(frozen=True)
class MaskPlan:
    """Per-individual sets of hidden position ids."""

    hidden: Mapping[str, frozenset] = field(default_factory=dict)

    def __post_init__(self):
        clean = {str(k): frozenset(v) for k, v in self.hidden.items() if len(v)}
        object.__setattr__(self, "hidden", clean)

    def get(self, individual: str) -> frozenset:
        return self.hidden.get(individual, frozenset())

    def extend(self, individual: str, positions: Iterable[str]) -> "MaskPlan":
        new = dict(self.hidden)
        new[individual] = self.get(individual) | frozenset(positions)
        return MaskPlan(new)

    @property
    def total_cells(self) -> int:
        return sum(len(v) for v in self.hidden.values())

    @property
    def hidden_positions(self) -> frozenset:
        """Positions hidden for at least one individual."""
        return frozenset().union(*self.hidden.values()) if self.hidden else frozenset()

    def counts(self) -> dict[str, int]:
        return {k: len(v) for k, v in self.hidden.items()}

    def to_json(self) -> dict:
        return {k: sorted(v) for k, v in sorted(self.hidden.items())}

    @classmethod
    def from_json(cls, obj: Mapping) -> "MaskPlan":
        if not isinstance(obj, Mapping):
            raise ValidationError("mask plan must be a JSON object")
        return cls({str(k): frozenset(map(str, v)) for k, v in obj.items()})


@dataclass(frozen=True)
class CohortSpec:
    """Recipe for :func:`generate_cohort`.

    ``family_shape`` is ``"none"``, ``"parent-child"``, ``"trio"``,
    ``"trio-plus-aunt"``, or a mapping ``{"parents": {child: [father, mother]},
    "latent": [ids]}`` where latent ids are simulated but left out of the
    matrix. ``maf_sampler`` is ``("uniform", low, high)`` or ``("fixed", p)``.
    """

    n_unrelated: int = 60
    family_shape: object = "trio-plus-aunt"
    m_snps: int = 500
    maf_sampler: tuple = ("uniform", 0.05, 0.5)
    seed: int = 0

    def __post_init__(self):
        if self.n_unrelated < 0:
            raise ValidationError("n_unrelated must be >= 0")
        if self.m_snps < 1:
            raise ValidationError("m_snps must be >= 1")
        kind = self.maf_sampler[0]
        if kind == "uniform":
            _, lo, hi = self.maf_sampler
            if not (0 < lo <= hi <= 0.5):
                raise ValidationError("uniform MAF bounds must satisfy 0 < lo <= hi <= 0.5")
        elif kind == "fixed":
            if not (0 < self.maf_sampler[1] <= 0.5):
                raise ValidationError("fixed MAF must lie in (0, 0.5]")
        else:
            raise ValidationError(f"unknown maf sampler {kind!r}")
        _family_layout(self.family_shape)

    @classmethod
    def from_json(cls, obj: Mapping) -> "CohortSpec":
        kw = dict(obj)
        if "maf_sampler" in kw:
            kw["maf_sampler"] = tuple(kw["maf_sampler"])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ValidationError(str(exc)) from None

    def to_json(self) -> dict:
        return {
            "n_unrelated": self.n_unrelated,
            "family_shape": self.family_shape,
            "m_snps": self.m_snps,
            "maf_sampler": list(self.maf_sampler),
            "seed": self.seed,
        }


# Built-in family layouts: child -> (father, mother), plus latent ancestors.
_SHAPES = {
    "none": ({}, ()),
    "parent-child": ({"son": ("father_latent", "mother")}, ("father_latent",)),
    "trio": ({"son": ("father", "mother")}, ()),
    "trio-plus-aunt": (
        {
            "mother": ("grandfather", "grandmother"),
            "aunt": ("grandfather", "grandmother"),
            "son": ("father", "mother"),
        },
        ("grandfather", "grandmother"),
    ),
}


def _family_layout(shape) -> tuple[dict, tuple]:
    if isinstance(shape, str):
        if shape not in _SHAPES:
            raise ValidationError(f"unknown family shape {shape!r}")
        parents, latent = _SHAPES[shape]
        return dict(parents), tuple(latent)
    if isinstance(shape, Mapping):
        parents = {str(c): (str(p[0]), str(p[1])) for c, p in shape.get("parents", {}).items()}
        _topological_order(parents)
        return parents, tuple(shape.get("latent", ()))
    raise ValidationError(f"unsupported family shape {shape!r}")


def _topological_order(parents: Mapping[str, tuple[str, str]]) -> list[str]:
    """Ancestors-first ordering of everyone mentioned in ``parents``."""
    nodes = set(parents) | {p for pair in parents.values() for p in pair}
    order, state = [], {}

    def visit(node):
        mark = state.get(node)
        if mark == "done":
            return
        if mark == "active":
            raise ValidationError(f"cyclic parent links through {node!r}")
        state[node] = "active"
        for p in parents.get(node, ()):
            visit(p)
        state[node] = "done"
        order.append(node)

    for node in sorted(nodes):
        visit(node)
    return order


def expected_kinship(parents: Mapping[str, tuple[str, str]], a: str, b: str) -> float:
    """Pedigree kinship coefficient by the classic recursion (founders unrelated)."""
    order = {n: k for k, n in enumerate(_topological_order(parents))}

    @lru_cache(maxsize=None)
    def phi(x, y):
        if x == y:
            if x in parents:
                return 0.5 * (1 + phi(*parents[x]))
            return 0.5
        # recurse through whichever is later in the ancestry order
        if order.get(x, -1) < order.get(y, -1):
            x, y = y, x
        if x not in parents:
            return 0.0
        f, m = parents[x]
        return 0.5 * (phi(f, y) + phi(m, y))

    return phi(a, b)


def _degree_from_expected(phi: float) -> str | None:
    if phi > 3 / 16:
        return "first"
    if phi > 3 / 32:
        return "second"
    return None


def pedigree_from_parents(parents: Mapping[str, tuple[str, str]], members: Sequence[str]) -> Pedigree:
    """Derive first/second-degree relations among ``members`` from parent links."""
    relations = set()
    members = list(members)
    for i, a in enumerate(members):
        for b in members[i + 1:]:
            degree = _degree_from_expected(expected_kinship(parents, a, b))
            if degree:
                relations.add((a, b, degree))
    return Pedigree(tuple(members), frozenset(relations), dict(parents))


def sample_mafs(sampler: tuple, m: int, rng: np.random.Generator) -> np.ndarray:
    if sampler[0] == "uniform":
        return rng.uniform(sampler[1], sampler[2], size=m)
    return np.full(m, float(sampler[1]))


def founder_genotypes(mafs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One founder per call; two independent allele draws give Hardy-Weinberg proportions."""
    return rng.binomial(2, mafs).astype(np.int8)


def child_genotypes(father: np.ndarray, mother: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Each parent transmits the minor allele with probability genotype / 2."""
    from_father = rng.random(father.shape) < father / 2.0
    from_mother = rng.random(mother.shape) < mother / 2.0
    return (from_father.astype(np.int8) + from_mother.astype(np.int8))


def generate_cohort(spec: CohortSpec) -> tuple[GenotypeMatrix, Pedigree]:
    """Simulate unrelated founders plus one family, deterministically from ``spec.seed``.

    Unrelated ids are ``U000``, ``U001``, ...; family members use the role
    names of the chosen shape (``father``, ``mother``, ``son``, ``aunt``).
    Labels alternate case/control.
    """
    rng = np.random.default_rng(spec.seed)
    mafs = sample_mafs(spec.maf_sampler, spec.m_snps, rng)
    snps = [SnpMeta(f"rs{k:05d}", float(p)) for k, p in enumerate(mafs)]

    parents, latent = _family_layout(spec.family_shape)
    genomes = {}
    for node in _topological_order(parents):
        if node in parents:
            f, m = parents[node]
            genomes[node] = child_genotypes(genomes[f], genomes[m], rng)
        else:
            genomes[node] = founder_genotypes(mafs, rng)
    family = [n for n in _topological_order(parents) if n not in latent]

    width = max(3, len(str(max(spec.n_unrelated - 1, 0))))
    unrelated = [f"U{k:0{width}d}" for k in range(spec.n_unrelated)]
    rows = [founder_genotypes(mafs, rng) for _ in unrelated]
    rows += [genomes[n] for n in family]
    ids = unrelated + family
    labels = ["case" if k % 2 == 0 else "control" for k in range(len(ids))]
    values = np.vstack(rows) if rows else np.zeros((0, spec.m_snps), dtype=np.int8)
    matrix = GenotypeMatrix(ids, snps, values, labels)

    pedigree = pedigree_from_parents(parents, family)
    return matrix, pedigree


def apply_mask(matrix: GenotypeMatrix, plan: MaskPlan) -> GenotypeMatrix:
    """Return a copy of ``matrix`` with every planned cell set to ``HIDDEN``."""
    values = matrix.values.copy()
    for individual, positions in plan.hidden.items():
        r = matrix.row_index(individual)
        cols = [matrix.col_index(p) for p in positions]
        values[r, cols] = HIDDEN
    return matrix.with_values(values)


# --- file formats ---------------------------------------------------------

def ingest_genotype_csv(path) -> GenotypeMatrix:
    """Read the ``id,label,<pos>...`` genotype CSV with its ``#MAF`` row."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError("empty file", line=1) from None
        if len(header) < 3 or header[0] != "id" or header[1] != "label":
            raise IngestionError("header must start with 'id,label' and name at least one position", line=1)
        positions = header[2:]
        if len(set(positions)) != len(positions):
            raise IngestionError("duplicate position id in header", line=1)
        width = len(header)

        mafs = None
        ids, labels, rows = [], [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not x.strip() for x in rec):
                continue
            if len(rec) != width:
                raise IngestionError(f"expected {width} fields, got {len(rec)}", line=lineno)
            if rec[0] == "#MAF":
                if mafs is not None:
                    raise IngestionError("duplicate #MAF row", line=lineno)
                try:
                    mafs = [float(x) for x in rec[2:]]
                except ValueError:
                    raise IngestionError("non-numeric MAF", line=lineno) from None
                continue
            ind = rec[0].strip()
            if not ind:
                raise IngestionError("empty individual id", line=lineno)
            if ind in ids:
                raise IngestionError(f"duplicate individual id {ind!r}", line=lineno)
            try:
                row = [_CELL_PARSE[x.strip()] for x in rec[2:]]
            except KeyError as exc:
                raise IngestionError(f"invalid genotype cell {exc.args[0]!r} for {ind!r}", line=lineno) from None
            ids.append(ind)
            labels.append(rec[1])
            rows.append(row)

    if mafs is None:
        raise IngestionError("missing #MAF row")
    snps = [SnpMeta(p, m) for p, m in zip(positions, mafs)]
    values = np.array(rows, dtype=np.int8).reshape(len(rows), len(positions))
    return GenotypeMatrix(ids, snps, values, labels)


def write_genotype_csv(matrix: GenotypeMatrix, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "label", *matrix.positions])
        w.writerow(["#MAF", "", *(repr(s.maf) for s in matrix.snps)])
        for ind, label, row in zip(matrix.individuals, matrix.labels, matrix.values):
            w.writerow([ind, label, *(_CELL_FORMAT[int(v)] for v in row)])


def read_json(path):
    try:
        with Path(path).open() as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def write_json(obj, path) -> None:
    with Path(path).open("w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_pedigree(path) -> Pedigree:
    return Pedigree.from_json(read_json(path))


def read_mask_plan(path) -> MaskPlan:
    return MaskPlan.from_json(read_json(path))
