"""Privacy/utility sweeps over synthetic cohorts.

Each trial simulates a cohort, builds a mask per mechanism, releases
post-mask kinship metadata, answers one count query per attacked SNP and
runs the adversary. Rows come out in a fixed (trial, mechanism, epsilon,
mode) order so identical configs give byte-identical CSV.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .adversary import MODES, AdversaryKnowledge, correctness_from_matrix, posterior_matrix
from .dp import dependence_factor, laplace_noise, laplace_scale, participant_sums
from .errors import InfeasibleError, ValidationError
from .genotype import CohortSpec, MaskPlan, apply_mask, generate_cohort
from .kinship import kinship_matrix
from .masking import DEFAULT_PHI, random_mask, sequential_mask

FAMILY_SETS = {
    "MT": ("mother",),
    "FT": ("father",),
    "FMT": ("father", "mother"),
    "FMTA": ("father", "mother", "aunt"),
}
MECHANISMS = ("no_hiding", "random_hiding", "selective_hiding", "dependent_sensitivity")
ARRIVAL_ROLES = ("son", "father", "mother", "aunt")

ROW_FIELDS = (
    "mechanism", "adversary_mode", "epsilon", "family_set", "u", "trial",
    "correctness", "utility_loss", "hidden_cells", "feasible",
)


@dataclass(frozen=True)
class ExperimentConfig:
    cohort: CohortSpec = field(default_factory=CohortSpec)
    family_set: object = "FMT"
    u_nonrelatives: int = 0
    epsilon_grid: tuple = (0.1, 0.5, 1.0, 2.5, 5.0)
    mechanisms: tuple = MECHANISMS
    adversary_modes: tuple = MODES
    m_snps: int = 100
    trials: int = 50
    phi: float = DEFAULT_PHI
    seed: int = 0
    target: str = "son"

    def __post_init__(self):
        for name in ("epsilon_grid", "mechanisms", "adversary_modes"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if not self.epsilon_grid or not self.mechanisms or not self.adversary_modes:
            raise ValidationError("epsilon grid, mechanisms and adversary modes must be non-empty")
        if any(not (e > 0) for e in self.epsilon_grid):
            raise ValidationError("epsilon values must be > 0 (use inf for a noiseless release)")
        unknown = set(self.mechanisms) - set(MECHANISMS)
        if unknown:
            raise ValidationError(f"unknown mechanisms {sorted(unknown)}")
        unknown = set(self.adversary_modes) - set(MODES)
        if unknown:
            raise ValidationError(f"unknown adversary modes {sorted(unknown)}")
        if self.m_snps < 1 or self.m_snps > self.cohort.m_snps:
            raise ValidationError("m_snps must be between 1 and the cohort's SNP count")
        if self.u_nonrelatives > self.cohort.n_unrelated:
            raise ValidationError("u_nonrelatives exceeds the cohort's unrelated members")
        if isinstance(self.family_set, str) and self.family_set not in FAMILY_SETS:
            raise ValidationError(f"unknown family set {self.family_set!r}")

    @property
    def family_label(self) -> str:
        return self.family_set if isinstance(self.family_set, str) else "custom"

    @property
    def relatives(self) -> tuple[str, ...]:
        if isinstance(self.family_set, str):
            return FAMILY_SETS[self.family_set]
        return tuple(self.family_set)

    @classmethod
    def from_json(cls, obj) -> "ExperimentConfig":
        kw = dict(obj)
        if "cohort" in kw:
            kw["cohort"] = CohortSpec.from_json(kw["cohort"])
        if isinstance(kw.get("family_set"), list):
            kw["family_set"] = tuple(kw["family_set"])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ValidationError(str(exc)) from None

    def to_json(self) -> dict:
        out = dataclasses.asdict(self)
        out["cohort"] = self.cohort.to_json()
        for k in ("epsilon_grid", "mechanisms", "adversary_modes"):
            out[k] = list(out[k])
        if not isinstance(self.family_set, str):
            out["family_set"] = list(self.family_set)
        return out


@dataclass(frozen=True)
class MetricsRow:
    mechanism: str
    adversary_mode: str
    epsilon: float
    family_set: str
    u: int
    trial: int
    correctness: float
    utility_loss: float
    hidden_cells: int
    feasible: bool = True


def utility_loss(true_sums, released, q) -> float:
    """Mean absolute change of the allele-frequency statistic, sum / 2q."""
    true_sums = np.asarray(true_sums, dtype=float)
    released = np.asarray(released, dtype=float)
    if true_sums.shape != released.shape:
        raise ValidationError(f"{true_sums.size} true sums but {released.size} released values")
    q = np.broadcast_to(np.asarray(q, dtype=float), true_sums.shape)
    if (q <= 0).any():
        raise ValidationError("q must be positive")
    if true_sums.size == 0:
        raise ValidationError("utility loss needs at least one SNP")
    return float(np.mean(np.abs(true_sums / (2 * q) - released / (2 * q))))


def _arrival_order(pedigree, target):
    related = pedigree.related_members()
    order = [target] + [r for r in ARRIVAL_ROLES if r in related and r != target]
    return order + sorted(related - set(order))


def _run_trial(config: ExperimentConfig, trial: int) -> list[MetricsRow]:
    seq = np.random.SeedSequence([config.seed, trial])
    cohort_seed, mask_seq, pick_seq, noise_seq = seq.spawn(4)
    cohort = dataclasses.replace(config.cohort, seed=int(cohort_seed.generate_state(1)[0]))
    matrix, pedigree = generate_cohort(cohort)
    target = config.target
    relatives = list(config.relatives)
    for ind in [target, *relatives]:
        matrix.row_index(ind)

    unrelated_pool = [i for i in matrix.individuals if i not in pedigree.related_members()]
    pick = np.random.default_rng(pick_seq)
    chosen = sorted(pick.choice(unrelated_pool, size=config.u_nonrelatives, replace=False).tolist())
    participants = [target, *relatives, *chosen]
    q = len(participants)

    cols = list(range(config.m_snps))
    attacked = matrix.subset_positions([matrix.positions[c] for c in cols])
    mafs = attacked.mafs
    truths = attacked.row(target)
    true_sums = participant_sums(attacked, participants)

    plans: dict[str, MaskPlan] = {}
    feasible = True
    needs_selective = {"selective_hiding", "random_hiding"} & set(config.mechanisms)
    if needs_selective:
        mask_rng = np.random.default_rng(mask_seq)
        try:
            plans["selective_hiding"] = sequential_mask(
                matrix, pedigree, config.phi, _arrival_order(pedigree, target), mask_rng
            )
        except InfeasibleError:
            feasible = False
            plans["selective_hiding"] = MaskPlan()
        plans["random_hiding"] = random_mask(matrix, pedigree, plans["selective_hiding"], mask_rng)

    # one standard Laplace draw per (epsilon, SNP), shared by all mechanisms
    noise_rng = np.random.default_rng(noise_seq)
    unit_noise = {eps: laplace_noise(1.0, noise_rng, size=config.m_snps) for eps in config.epsilon_grid}
    dep = dependence_factor(participants, pedigree)

    rows = []
    for mech in config.mechanisms:
        plan = plans.get(mech, MaskPlan())
        ok = feasible or mech not in needs_selective
        released_matrix = apply_mask(matrix, plan) if plan.hidden else matrix
        metadata = kinship_matrix(released_matrix, participants)
        observed = participant_sums(released_matrix.subset_positions(attacked.positions), participants)
        knowledge = AdversaryKnowledge(tuple(matrix.individuals), metadata, dict(zip(attacked.positions, mafs)))
        for eps in config.epsilon_grid:
            if math.isinf(eps):
                noisy = observed.astype(float)
                adv_eps = None
            else:
                # the adversary knows the mechanism, hence the actual noise scale
                adv_eps = eps / dep if mech == "dependent_sensitivity" else eps
                noisy = observed + laplace_scale(adv_eps) * unit_noise[eps]
            loss = utility_loss(true_sums, noisy, q)
            for mode in config.adversary_modes:
                post = posterior_matrix(knowledge.with_mode(mode), mafs, noisy, participants, target, adv_eps)
                rows.append(MetricsRow(
                    mech, mode, float(eps), config.family_label, config.u_nonrelatives, trial,
                    correctness_from_matrix(post, truths) if ok else float("nan"),
                    loss if ok else float("nan"),
                    plan.total_cells, ok,
                ))
    return rows


def run_experiment(config: ExperimentConfig) -> list[MetricsRow]:
    rows = []
    for trial in range(config.trials):
        rows.extend(_run_trial(config, trial))
    return rows


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rows(rows: Sequence[MetricsRow], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROW_FIELDS)
        for r in rows:
            w.writerow([_fmt(getattr(r, f)) for f in ROW_FIELDS])


SUMMARY_KEYS = ("mechanism", "adversary_mode", "epsilon", "family_set", "u")
SUMMARY_FIELDS = SUMMARY_KEYS + (
    "n", "correctness_mean", "correctness_stderr",
    "utility_loss_mean", "utility_loss_stderr", "hidden_cells_mean",
)


def _mean_stderr(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    arr = arr[~np.isnan(arr)]
    if arr.size == 0:
        return float("nan"), float("nan")
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def summarize(rows: Sequence[MetricsRow]) -> list[dict]:
    """Mean and standard error per (mechanism, mode, epsilon, family set, u)."""
    if not rows:
        raise ValidationError("nothing to summarize")
    groups: dict[tuple, list[MetricsRow]] = {}
    for r in rows:
        groups.setdefault(tuple(getattr(r, k) for k in SUMMARY_KEYS), []).append(r)
    out = []
    for key, members in groups.items():
        c_mean, c_err = _mean_stderr([r.correctness for r in members])
        u_mean, u_err = _mean_stderr([r.utility_loss for r in members])
        out.append({
            **dict(zip(SUMMARY_KEYS, key)),
            "n": len(members),
            "correctness_mean": c_mean,
            "correctness_stderr": c_err,
            "utility_loss_mean": u_mean,
            "utility_loss_stderr": u_err,
            "hidden_cells_mean": float(np.mean([r.hidden_cells for r in members])),
        })
    return out


def write_summary(summary: Sequence[dict], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for rec in summary:
            w.writerow([_fmt(rec[f]) for f in SUMMARY_FIELDS])


def lookup(summary: Sequence[dict], **key) -> dict:
    """The single summary record matching every given key."""
    hits = [r for r in summary if all(r[k] == v for k, v in key.items())]
    if len(hits) != 1:
        raise KeyError(f"{len(hits)} summary rows match {key}")
    return hits[0]
