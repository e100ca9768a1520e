"""Minimal SNP hiding that caps kinship between related dataset members.

A newcomer's heterozygous positions are hidden until every constrained pair
(newcomer, earlier relative) has kinship at most the target ceiling. For a
single pair the answer has a closed form; for families the problem is an
integer program over SNP configuration counts, solved exactly here by
branch-and-bound.

Kinship is KING-robust over mutually visible positions. Hiding a position
from the newcomer ``b`` changes the counts of pair ``(a, b)`` in one of three
ways, depending on ``a``'s cell at that position:

* ``a`` heterozygous: n11, het_a and het_b all drop by one ("y" effect);
* ``a`` homozygous: only het_b drops ("z" effect);
* ``a`` already hidden: the pair never saw the position (no effect).

Constraints are evaluated from these effects exactly, with the ceiling held
as a ``Fraction`` so boundary cases do not depend on float rounding.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import InfeasibleError, UndefinedKinshipError, ValidationError
from .genotype import HIDDEN, GenotypeMatrix, MaskPlan, Pedigree, apply_mask
from .kinship import PairCounts, kinship, pair_counts

DEFAULT_PHI = 0.10
FEASIBILITY_TOL = 1e-9

_SYMBOL = {0: "0", 1: "1", 2: "2", HIDDEN: "H"}


def as_phi(phi) -> Fraction:
    """Exact rational form of a kinship ceiling in [0, 0.5)."""
    value = phi if isinstance(phi, Fraction) else Fraction(phi).limit_denominator(10**9)
    if not (0 <= value < Fraction(1, 2)):
        raise ValidationError(f"kinship ceiling must lie in [0, 0.5), got {float(value)}")
    return value


def _ceil_div(num: int, den: int) -> int:
    return -((-num) // den)


# --- single pair -----------------------------------------------------------

def closed_form_x11(counts: PairCounts, phi_target) -> int:
    """Fewest double-heterozygous positions to hide so the pair's kinship is <= ``phi_target``.

    Each hidden position lowers n11 and both heterozygote counts by one,
    which keeps the orientation fixed, so the requirement is linear in the
    number removed and the minimum is a ceiling.

    Raises:
        InfeasibleError: even hiding every double-heterozygous site leaves the
            pair above the ceiling, or would leave no heterozygous site.
    """
    phi = as_phi(phi_target)
    p, q = phi.numerator, phi.denominator
    small, big = counts.het_small, counts.het_big
    if small == 0:
        raise InfeasibleError(
            "kinship undefined before any hiding", [(("i", "k"), None)]
        )
    excess = (2 * counts.n11 - 4 * counts.opposite_homozygotes - big) * q + (q - 4 * p) * small
    x = max(0, _ceil_div(excess, 2 * q - 4 * p))
    if x > counts.n11 or x >= small:
        last = min(counts.n11, small - 1)
        residual = kinship(counts.remove_double_hets(last)) if last >= 0 else None
        raise InfeasibleError(
            f"needs {x} removals but only {counts.n11} double-heterozygous sites "
            f"(het counts {counts.het_i}, {counts.het_k})",
            [(("i", "k"), residual)],
        )
    return x


# --- configuration counts ----------------------------------------------------

@dataclass(frozen=True)
class FamilyConfigCounts:
    """Counts of joint SNP configurations across ``members``.

    Keys of ``counts`` are full configuration strings over ``0/1/2`` (and
    ``H`` for hidden cells when built with ``mark_hidden=True``). Lookups
    accept ``*`` as a wildcard and marginalize.
    """

    members: tuple[str, ...]
    counts: Mapping[str, int]
    alphabet: str = "012"

    def __getitem__(self, pattern: str) -> int:
        if len(pattern) != len(self.members):
            raise KeyError(pattern)
        if "*" not in pattern:
            return self.counts.get(pattern, 0)
        return sum(
            n for c, n in self.counts.items()
            if all(pc == "*" or pc == cc for pc, cc in zip(pattern, c))
        )

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def pair(self, a: int, b: int) -> PairCounts:
        """Pair counts for members ``a`` and ``b`` over positions visible to both."""
        n = Counter()
        for c, k in self.counts.items():
            ca, cb = c[a], c[b]
            if ca == "H" or cb == "H":
                continue
            n["valid"] += k
            n[ca + cb] += k
            if ca == "1":
                n["het_a"] += k
            if cb == "1":
                n["het_b"] += k
        return PairCounts(n["11"], n["02"], n["20"], n["het_a"], n["het_b"], n["valid"])


def family_config_counts(matrix: GenotypeMatrix, family: Sequence[str], mark_hidden: bool = False) -> FamilyConfigCounts:
    """Count configurations across ``family``.

    By default only positions visible for every member are counted. With
    ``mark_hidden`` every position is counted and hidden cells show as ``H``.
    """
    family = list(family)
    if len(family) < 2:
        raise ValidationError("a family needs at least two members")
    rows = np.vstack([matrix.row(m) for m in family])
    if not mark_hidden:
        rows = rows[:, (rows != HIDDEN).all(axis=0)]
    tally = Counter("".join(_SYMBOL[int(v)] for v in col) for col in rows.T)
    return FamilyConfigCounts(tuple(family), dict(tally), "012H" if mark_hidden else "012")


# --- integer program -----------------------------------------------------------

@dataclass(frozen=True)
class HidingSolution:
    """Optimal number of positions of each configuration to hide from the newest member."""

    removals: Mapping[str, int]
    objective: int
    nodes_explored: int = 0

    @property
    def is_zero(self) -> bool:
        return self.objective == 0


@dataclass
class _Pair:
    a: int
    n11: int
    opp: int
    het_a: int
    het_b: int
    p: int
    q: int

    def feasible(self, y: int, z: int) -> bool:
        ha, hb = self.het_a - y, self.het_b - y - z
        m = min(ha, hb)
        if m <= 0:
            return False
        num = 2 * (self.n11 - y) - 4 * self.opp - abs(ha - hb)
        return num * self.q <= 4 * self.p * m

    def min_y(self, z: int) -> int | None:
        """Smallest y making the pair feasible at this z, or None."""
        m0 = min(self.het_a, self.het_b - z)
        if m0 <= 0:
            return None
        num0 = 2 * self.n11 - 4 * self.opp - abs(self.het_a - self.het_b + z)
        y = max(0, _ceil_div(num0 * self.q - 4 * self.p * m0, 2 * self.q - 4 * self.p))
        return y if y < m0 else None

    def kinship_at(self, y: int, z: int) -> float | None:
        ha, hb = self.het_a - y, self.het_b - y - z
        m = min(ha, hb)
        if m <= 0:
            return None
        return (2 * (self.n11 - y) - 4 * self.opp - abs(ha - hb)) / (4 * m)


class _Problem:
    """Aggregated program: configurations sharing an effect vector are interchangeable."""

    def __init__(self, pairs: list[_Pair], types: list[tuple[str, ...]], caps: list[int]):
        self.pairs = pairs
        # most broadly useful types first: more "y" effects earlier
        order = sorted(range(len(types)), key=lambda t: (-types[t].count("y"), types[t]))
        self.types = [types[t] for t in order]
        self.caps = [caps[t] for t in order]
        n, k = len(self.types), len(pairs)
        self.ycap = [[0] * (n + 1) for _ in range(k)]
        self.zcap = [[0] * (n + 1) for _ in range(k)]
        for p in range(k):
            for d in range(n - 1, -1, -1):
                eff = self.types[d][p]
                self.ycap[p][d] = self.ycap[p][d + 1] + (self.caps[d] if eff == "y" else 0)
                self.zcap[p][d] = self.zcap[p][d + 1] + (self.caps[d] if eff == "z" else 0)
        self._lb_cache: dict = {}
        self.nodes = 0

    def pair_bound(self, p: int, d: int, y0: int, z0: int) -> float:
        key = (p, d, y0, z0)
        hit = self._lb_cache.get(key)
        if hit is not None:
            return hit
        pair = self.pairs[p]
        ycap, zcap = self.ycap[p][d], self.zcap[p][d]
        best = math.inf
        for dz in range(zcap + 1):
            if dz >= best:
                break
            y = pair.min_y(z0 + dz)
            if y is None:
                continue
            y = max(y, y0)
            if y - y0 > ycap or not pair.feasible(y, z0 + dz):
                continue
            best = min(best, dz + y - y0)
        self._lb_cache[key] = best
        return best

    def bound(self, d: int, ys, zs) -> float:
        return max(
            (self.pair_bound(p, d, ys[p], zs[p]) for p in range(len(self.pairs))),
            default=0,
        )

    def greedy(self) -> int | None:
        """Quick incumbent: repeatedly hide from the type helping most violated pairs."""
        k = len(self.pairs)
        ys, zs = [0] * k, [0] * k
        left = list(self.caps)
        total = 0
        while True:
            bad = [p for p in range(k) if not self.pairs[p].feasible(ys[p], zs[p])]
            if not bad:
                return total
            best, score = None, None
            for t, eff in enumerate(self.types):
                if not left[t]:
                    continue
                s = (sum(eff[p] == "y" for p in bad), -sum(eff[p] == "z" for p in bad))
                if s[0] and (score is None or s > score):
                    best, score = t, s
            if best is None:
                return None
            left[best] -= 1
            total += 1
            for p, e in enumerate(self.types[best]):
                if e == "y":
                    ys[p] += 1
                elif e == "z":
                    zs[p] += 1

    def solve(self, budget: int | None = None, first_only: bool = False) -> int | None:
        """Minimum total hides (<= budget if given), or None if none exists."""
        k = len(self.pairs)
        if budget is None:
            g = self.greedy()
            budget = g if g is not None else sum(self.caps)
        best = [budget + 1]
        found = [None]

        def dfs(d, cost, ys, zs):
            self.nodes += 1
            if cost + self.bound(d, ys, zs) >= best[0]:
                return
            if d == len(self.types):
                best[0] = cost
                found[0] = cost
                return
            eff = self.types[d]
            for v in range(min(self.caps[d], best[0] - cost - 1) + 1):
                nys = [ys[p] + (v if eff[p] == "y" else 0) for p in range(k)]
                nzs = [zs[p] + (v if eff[p] == "z" else 0) for p in range(k)]
                dfs(d + 1, cost + v, nys, nzs)
                if first_only and found[0] is not None:
                    return
                if cost + v + 1 >= best[0]:
                    break

        dfs(0, 0, [0] * k, [0] * k)
        return found[0]


def _effect(symbol: str) -> str:
    if symbol == "1":
        return "y"
    if symbol in "02":
        return "z"
    return "n"


def solve_hiding_ip(counts: FamilyConfigCounts, pairs: Sequence) -> HidingSolution:
    """Exact minimum-cardinality hiding from the newest (last) family member.

    Args:
        counts: configuration counts over the family; the newest member is last
            and has no hidden cells.
        pairs: sequence of ``((a, b), phi)`` index pairs with their ceilings.
            Pairs not involving the newest member must already satisfy their
            ceiling.

    Returns:
        The optimal solution; among optimal ones, the lexicographically
        smallest removal vector over sorted configuration strings.

    Raises:
        InfeasibleError: listing the pairs that cannot be satisfied.
    """
    f = len(counts.members)
    last = f - 1
    constrained: dict[int, Fraction] = {}
    violations = []
    for (a, b), phi in pairs:
        phi = as_phi(phi)
        if b != last:
            a, b = b, a
        if b != last:
            pc = counts.pair(a, b)
            try:
                value = kinship(pc)
            except UndefinedKinshipError:
                value = None
            if value is None or value > phi:
                violations.append(((a, b), value))
            continue
        if a == last:
            raise ValidationError("a pair must join two distinct members")
        constrained[a] = min(phi, constrained.get(a, phi))
    if violations:
        raise InfeasibleError("pairs between earlier members exceed the ceiling", violations)

    configs = sorted(
        c for c, n in counts.counts.items()
        if n > 0 and c[last] == "1" and "1" in c[:last]
    )
    earlier = sorted(constrained)
    built = []
    for a in earlier:
        pc = counts.pair(a, last)
        phi = constrained[a]
        built.append(_Pair(a, pc.n11, pc.opposite_homozygotes, pc.het_i, pc.het_k,
                           phi.numerator, phi.denominator))
    zero = {c: 0 for c in configs}
    if all(p.feasible(0, 0) for p in built):
        return HidingSolution(zero, 0, 0)

    effect_of = {c: tuple(_effect(c[p.a]) for p in built) for c in configs}

    def problem_for(suffix: Sequence[str]) -> _Problem:
        caps = Counter()
        for c in suffix:
            caps[effect_of[c]] += counts.counts[c]
        types = [t for t in caps if "y" in t]
        return _Problem(built, types, [caps[t] for t in types])

    root = problem_for(configs)
    optimum = root.solve()
    nodes = root.nodes
    if optimum is None:
        ys = [root.ycap[p][0] for p in range(len(built))]
        residual = []
        for pair, y in zip(built, ys):
            if pair.feasible(0, 0):
                continue
            best = None
            for yy in range(y, -1, -1):
                best = pair.kinship_at(yy, 0)
                if best is not None:
                    break
            residual.append(((pair.a, last), best))
        raise InfeasibleError("no hiding plan reaches the kinship ceiling", residual)

    # Fix configurations in lexicographic order, each at the smallest value
    # that still admits an optimal completion.
    removals = dict(zero)
    spent = 0
    shift = [(0, 0)] * len(built)
    for i, c in enumerate(configs):
        eff = effect_of[c]
        sub = problem_for(configs[i + 1:])
        for v in range(counts.counts[c] + 1):
            trial = [
                (y + (v if e == "y" else 0), z + (v if e == "z" else 0))
                for (y, z), e in zip(shift, eff)
            ]
            sub.nodes = 0
            ok = _completes(built, trial, sub, optimum - spent - v)
            nodes += sub.nodes
            if ok:
                removals[c] = v
                spent += v
                shift = trial
                break
        else:  # pragma: no cover - the optimum guarantees some value works
            raise RuntimeError("lexicographic reconstruction failed")
    return HidingSolution(removals, optimum, nodes)


def _completes(base: list[_Pair], offsets, sub: _Problem, budget: int) -> bool:
    """Whether the remaining configurations can finish the job within ``budget``."""
    if budget < 0:
        return False
    shifted = [
        _Pair(p.a, p.n11 - y, p.opp, p.het_a - y, p.het_b - y - z, p.p, p.q)
        for p, (y, z) in zip(base, offsets)
    ]
    if any(p.het_a < 0 or p.n11 < 0 for p in shifted):
        return False
    if all(p.feasible(0, 0) for p in shifted):
        return True
    sub.pairs = shifted
    sub._lb_cache.clear()
    return sub.solve(budget=budget, first_only=True) is not None


def brute_force_hiding(counts: FamilyConfigCounts, pairs: Sequence) -> int | None:
    """Exhaustive minimum over every removal vector; recomputes kinship from scratch.

    Independent of the branch-and-bound: each candidate vector is applied to a
    per-position expansion of the configurations and kinship is recounted.
    Intended for small instances only.
    """
    f = len(counts.members)
    last = f - 1
    configs = sorted(c for c, n in counts.counts.items() if n > 0 and c[last] == "1" and "1" in c[:last])
    ceilings = [((a, b), float(as_phi(phi))) for (a, b), phi in pairs]
    best = None
    for vec in itertools.product(*(range(counts.counts[c] + 1) for c in configs)):
        total = sum(vec)
        if best is not None and total >= best:
            continue
        new = dict(counts.counts)
        for c, x in zip(configs, vec):
            if x:
                new[c] -= x
                hidden = c[:last] + "H"
                new[hidden] = new.get(hidden, 0) + x
        trial = FamilyConfigCounts(counts.members, new, "012H")
        ok = True
        for (a, b), phi in ceilings:
            try:
                if kinship(trial.pair(a, b)) > phi + 1e-12:
                    ok = False
                    break
            except UndefinedKinshipError:
                ok = False
                break
        if ok:
            best = total
    return best


# --- position selection and protocol ------------------------------------------

def select_positions(
    matrix: GenotypeMatrix,
    family: Sequence[str],
    solution: HidingSolution,
    prior_plan: MaskPlan,
    seed=None,
    policy: str = "overlap",
    lookahead: Sequence[str] = (),
) -> MaskPlan:
    """Turn configuration counts into concrete positions hidden from ``family[-1]``.

    With ``policy="overlap"`` candidates already hidden for the most other
    members are taken first, then those where the most ``lookahead`` members
    (relatives whose data the owner holds, arrived or not) are heterozygous;
    remaining ties are broken by a seeded shuffle. ``policy="random"``
    ignores both and shuffles only.
    """
    if policy not in ("overlap", "random"):
        raise ValidationError(f"unknown selection policy {policy!r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if solution.objective == 0:
        return prior_plan
    masked = apply_mask(matrix, prior_plan)
    rows = np.vstack([masked.row(m) for m in family])
    keys = np.array(["".join(_SYMBOL[int(v)] for v in col) for col in rows.T])
    positions = matrix.positions

    overlap = np.zeros(len(positions), dtype=int)
    newcomer = family[-1]
    for ind, hidden in prior_plan.hidden.items():
        if ind == newcomer:
            continue
        for pos in hidden:
            overlap[matrix.col_index(pos)] += 1

    shared_het = np.zeros(len(positions), dtype=int)
    for ind in lookahead:
        if ind != newcomer:
            shared_het += matrix.row(ind) == 1

    chosen = []
    for config in sorted(solution.removals):
        x = solution.removals[config]
        if x == 0:
            continue
        candidates = np.flatnonzero(keys == config)
        if len(candidates) < x:
            raise ValidationError(
                f"solution hides {x} positions of configuration {config!r} "
                f"but only {len(candidates)} exist"
            )
        shuffled = candidates[rng.permutation(len(candidates))]
        if policy == "overlap":
            rank = np.lexsort((-shared_het[shuffled], -overlap[shuffled]))
            shuffled = shuffled[rank]
        chosen.extend(positions[k] for k in shuffled[:x])
    return prior_plan.extend(newcomer, chosen)


@dataclass(frozen=True)
class TraceRow:
    step: int
    member: str
    objective: int
    nodes_explored: int


def default_arrival_order(pedigree: Pedigree, first: str | None = None) -> list[str]:
    members = [m for m in pedigree.members if m in pedigree.related_members()] or sorted(pedigree.related_members())
    if first is not None:
        members = [first] + [m for m in members if m != first]
    return members


def sequential_mask(
    matrix: GenotypeMatrix,
    pedigree: Pedigree,
    phi=DEFAULT_PHI,
    arrival_order: Sequence[str] | None = None,
    seed=None,
    policy: str = "overlap",
    trace: list | None = None,
) -> MaskPlan:
    """Process family members one at a time, hiding just enough from each newcomer.

    At each arrival the newcomer is constrained against every earlier member
    it is related to; pairs among earlier members were handled at their own
    steps. The final plan is rechecked against every related pair.

    Raises:
        InfeasibleError: carrying the arrival step and member where it failed,
            or the pairs that fail the final recheck.
    """
    phi_f = as_phi(phi)
    related = pedigree.related_members()
    order = list(arrival_order) if arrival_order is not None else default_arrival_order(pedigree)
    missing = related - set(order)
    if missing:
        raise ValidationError(f"arrival order misses related members {sorted(missing)}")
    if len(set(order)) != len(order):
        raise ValidationError("arrival order repeats a member")
    for ind in order:
        matrix.row_index(ind)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    families = pedigree.families()
    plan = MaskPlan()
    arrived: list[str] = []
    for step, newcomer in enumerate(order):
        partners = [a for a in arrived if pedigree.degree(a, newcomer)]
        arrived.append(newcomer)
        if not partners:
            if trace is not None:
                trace.append(TraceRow(step, newcomer, 0, 0))
            continue
        family = partners + [newcomer]
        masked = apply_mask(matrix, plan)
        counts = family_config_counts(masked, family, mark_hidden=True)
        pairs = [((k, len(family) - 1), phi_f) for k in range(len(partners))]
        try:
            solution = solve_hiding_ip(counts, pairs)
        except InfeasibleError as exc:
            named = [((family[a], family[b]), r) for (a, b), r in exc.violations]
            raise InfeasibleError(
                f"step {step} ({newcomer}): {exc}", named, step=step, member=newcomer
            ) from None
        if trace is not None:
            trace.append(TraceRow(step, newcomer, solution.objective, solution.nodes_explored))
        kin = next((fam for fam in families if newcomer in fam), set())
        lookahead = [m for m in order if m in kin and m != newcomer]
        plan = select_positions(matrix, family, solution, plan, rng, policy, lookahead)

    violations = check_plan(matrix, pedigree, plan, phi_f)
    if violations:
        raise InfeasibleError("final recheck failed", violations, step=len(order))
    return plan


def check_plan(matrix: GenotypeMatrix, pedigree: Pedigree, plan: MaskPlan, phi) -> list:
    """Related pairs whose masked kinship exceeds ``phi`` (or is undefined)."""
    limit = float(as_phi(phi)) + FEASIBILITY_TOL
    masked = apply_mask(matrix, plan)
    bad = []
    for a, b, _ in pedigree.related_pairs():
        try:
            value = kinship(pair_counts(masked, a, b))
        except UndefinedKinshipError:
            bad.append(((a, b), None))
            continue
        if value > limit:
            bad.append(((a, b), value))
    return bad


def random_mask(matrix: GenotypeMatrix, pedigree: Pedigree, budget_plan, seed=None) -> MaskPlan:
    """Hide uniformly random positions with the same per-individual counts as ``budget_plan``.

    ``budget_plan`` is a :class:`MaskPlan` or a mapping id -> count.
    """
    budgets = budget_plan.counts() if isinstance(budget_plan, MaskPlan) else dict(budget_plan)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    m = len(matrix.positions)
    hidden = {}
    for ind in sorted(budgets):
        k = int(budgets[ind])
        if k == 0:
            continue
        matrix.row_index(ind)
        if k < 0 or k > m:
            raise ValidationError(f"budget {k} for {ind!r} exceeds {m} available positions")
        cols = rng.choice(m, size=k, replace=False)
        hidden[ind] = frozenset(matrix.positions[c] for c in cols)
    return MaskPlan(hidden)
