"""Command-line entry point: generate, mask, kinship, query, attack, evaluate.

Every failure prints one line ``ERROR <code>: <message>`` to stderr. Exit
codes: 0 success, 1 validation/usage error, 2 masking infeasible.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from . import dp
from .adversary import AdversaryKnowledge, Posterior, posterior_matrix, write_attack_report
from .errors import IngestionError, InfeasibleError, ValidationError
from .evaluation import ExperimentConfig, run_experiment, summarize, write_rows, write_summary
from .genotype import (
    CohortSpec, apply_mask, generate_cohort, ingest_genotype_csv,
    read_json, read_mask_plan, read_pedigree, write_genotype_csv, write_json,
)
from .kinship import KinshipMatrix, kinship_matrix
from .masking import DEFAULT_PHI, TraceRow, random_mask, sequential_mask

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_matrix(path, plan_path=None):
    matrix = ingest_genotype_csv(path)
    if plan_path:
        matrix = apply_mask(matrix, read_mask_plan(plan_path))
    return matrix


def _write_trace(rows: list[TraceRow], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "member", "objective", "nodes_explored"])
        for r in rows:
            w.writerow([r.step, r.member, r.objective, r.nodes_explored])


def cmd_generate(args) -> int:
    spec = CohortSpec.from_json(read_json(args.spec))
    matrix, pedigree = generate_cohort(spec)
    write_genotype_csv(matrix, args.out)
    write_json(pedigree.to_json(), args.pedigree)
    return EXIT_OK


def cmd_mask(args) -> int:
    matrix = ingest_genotype_csv(args.input)
    pedigree = read_pedigree(args.pedigree)
    rng = np.random.default_rng(args.seed)
    trace: list[TraceRow] = []
    plan = sequential_mask(matrix, pedigree, args.phi, seed=rng, trace=trace)
    if args.strategy == "random":
        plan = random_mask(matrix, pedigree, plan, rng)
    write_json(plan.to_json(), args.out)
    if args.trace:
        _write_trace(trace, args.trace)
    return EXIT_OK


def cmd_kinship(args) -> int:
    matrix = _load_matrix(args.input, args.plan)
    kin = kinship_matrix(matrix)
    kin.to_csv(args.out)
    for w in kin.warnings:
        print(f"WARNING undefined-kinship: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_query(args) -> int:
    matrix = _load_matrix(args.input, args.plan)
    pedigree = read_pedigree(args.pedigree) if args.pedigree else None
    specs = dp.read_query_batch(args.batch)
    if pedigree is None and any(s.mechanism == "dependent_sensitivity" for s in specs):
        raise ValidationError("dependent_sensitivity queries need --pedigree")
    rng = np.random.default_rng(args.seed)
    answers = [dp.answer_query(matrix, s, pedigree, rng) for s in specs]
    dp.write_answers(answers, args.out)
    return EXIT_OK


def _metadata_dependence(participants, metadata: KinshipMatrix) -> int:
    """Largest group of participants linked by released (non-unrelated) kinship."""
    group = {p: p for p in participants}

    def find(x):
        while group[x] != x:
            group[x] = group[group[x]]
            x = group[x]
        return x

    for i, a in enumerate(participants):
        for b in participants[i + 1:]:
            if metadata.degree(a, b) != "unrelated":
                group[find(a)] = find(b)
    sizes: dict[str, int] = {}
    for p in participants:
        sizes[find(p)] = sizes.get(find(p), 0) + 1
    return max(sizes.values())


def _attack_queries(args, answers):
    """(participants, epsilon) per answer, from --batch or --participants/--epsilon."""
    if args.batch:
        specs = {s.position: s for s in dp.read_query_batch(args.batch)}
        out = []
        for a in answers:
            if a.position not in specs:
                raise ValidationError(f"no batch entry for answered position {a.position!r}")
            out.append(specs[a.position])
        return out
    if not args.participants:
        raise ValidationError("attack needs --batch or --participants")
    participants = tuple(p for p in args.participants.split(";") if p)
    mech = "none" if args.epsilon is None else "standard_lpm"
    return [dp.QuerySpec(a.position, participants, args.epsilon, mech) for a in answers]


def cmd_attack(args) -> int:
    answers = dp.read_answers(args.answers)
    metadata = KinshipMatrix.from_csv(args.kin)
    cohort = ingest_genotype_csv(args.maf)
    maf_table = dict(zip(cohort.positions, cohort.mafs))
    mode = {"dep": "with_dependency", "indep": "without_dependency"}[args.mode]
    knowledge = AdversaryKnowledge(tuple(cohort.individuals), metadata, maf_table, mode)
    specs = _attack_queries(args, answers)

    posteriors = []
    for a, spec in zip(answers, specs):
        if a.q != len(spec.participants):
            raise ValidationError(f"answer for {a.position} reports q={a.q}, batch lists {len(spec.participants)}")
        if a.position not in maf_table:
            raise ValidationError(f"no MAF for position {a.position!r}")
        eps = None if spec.mechanism == "none" else spec.epsilon
        if eps is not None and spec.mechanism == "dependent_sensitivity":
            eps = eps / _metadata_dependence(list(spec.participants), metadata)
        probs = posterior_matrix(knowledge, [maf_table[a.position]], [a.noisy_sum], spec.participants, args.target, eps)
        posteriors.append(Posterior.from_probs(probs[0]))

    truths = []
    for a in answers:
        try:
            v = cohort.cell(args.target, a.position)
            truths.append(None if v < 0 else v)
        except ValidationError:
            truths.append(None)
    write_attack_report([a.position for a in answers], truths, posteriors, args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = ExperimentConfig.from_json(read_json(args.config))
    rows = run_experiment(config)
    write_rows(rows, args.out)
    if args.summary:
        write_summary(summarize(rows), args.summary)
    return EXIT_OK


def _epsilon(text: str) -> float:
    value = float(text)
    if not value > 0 or math.isnan(value):
        raise argparse.ArgumentTypeError(f"epsilon must be > 0, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="snphide", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="simulate a cohort with one family")
    p.add_argument("--spec", required=True, help="cohort spec JSON")
    p.add_argument("--out", required=True, help="genotype CSV to write")
    p.add_argument("--pedigree", required=True, help="pedigree JSON to write")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("mask", help="compute a hiding plan for the family")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--pedigree", required=True)
    p.add_argument("--phi", type=float, default=DEFAULT_PHI)
    p.add_argument("--strategy", choices=("selective", "random"), default="selective")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="per-step solver trace CSV")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("kinship", help="pairwise kinship of a (masked) cohort")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--plan")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_kinship)

    p = sub.add_parser("query", help="answer a batch of noisy count queries")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--plan")
    p.add_argument("--pedigree", help="needed for dependent_sensitivity")
    p.add_argument("--batch", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("attack", help="infer a target's genotypes from answers")
    p.add_argument("--answers", required=True)
    p.add_argument("--kin", required=True)
    p.add_argument("--maf", required=True, help="cohort CSV supplying MAFs (and truths, if present)")
    p.add_argument("--mode", choices=("dep", "indep"), required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--batch", help="query batch the answers came from")
    p.add_argument("--participants", help="';'-joined ids, instead of --batch")
    p.add_argument("--epsilon", type=_epsilon, help="with --participants; omit for exact answers")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("evaluate", help="run a privacy/utility sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--summary")
    p.set_defaults(func=cmd_evaluate)
    return parser


def _fail(code: str, message) -> None:
    text = " ".join(str(message).split())
    print(f"ERROR {code}: {text}", file=sys.stderr)


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        _fail("usage", exc)
        return EXIT_INVALID
    try:
        return args.func(args)
    except InfeasibleError as exc:
        _fail("infeasible", exc)
        return EXIT_INFEASIBLE
    except IngestionError as exc:
        _fail("ingestion", exc)
    except ValidationError as exc:
        _fail("validation", exc)
    except FileNotFoundError as exc:
        _fail("io", f"{exc.filename}: not found")
    except OSError as exc:
        _fail("io", exc)
    return EXIT_INVALID


def main() -> None:
    sys.exit(run())
