import csv
import json

import pytest

from snphide.cli import run


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def cohort(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"n_unrelated": 6, "family_shape": "trio", "m_snps": 400, "seed": 3}))
    code = run(["generate", "--spec", str(spec), "--out", str(tmp_path / "c.csv"), "--pedigree", str(tmp_path / "p.json")])
    assert code == 0
    return tmp_path


def test_generate_then_kinship(cohort):
    assert run(["kinship", "--in", str(cohort / "c.csv"), "--out", str(cohort / "k.csv")]) == 0
    fam = {(r["id_a"], r["id_b"]): r["degree"] for r in rows(cohort / "k.csv") if not r["id_a"].startswith("U")}
    assert fam[("father", "son")] == "first"
    assert fam[("mother", "son")] == "first"
    assert fam[("father", "mother")] == "unrelated"


def test_mask_then_kinship_meets_ceiling(cohort):
    d = cohort
    code = run(["mask", "--in", str(d / "c.csv"), "--pedigree", str(d / "p.json"), "--phi", "0.10",
                "--strategy", "selective", "--seed", "1", "--out", str(d / "plan.json"), "--trace", str(d / "t.csv")])
    assert code == 0
    assert run(["kinship", "--in", str(d / "c.csv"), "--plan", str(d / "plan.json"), "--out", str(d / "k.csv")]) == 0
    for r in rows(d / "k.csv"):
        if {r["id_a"], r["id_b"]} in ({"father", "son"}, {"mother", "son"}):
            assert float(r["phi"]) <= 0.10 + 1e-9
    trace = rows(d / "t.csv")
    assert list(trace[0]) == ["step", "member", "objective", "nodes_explored"]


def test_random_strategy_matches_budget(cohort):
    d = cohort
    base = ["mask", "--in", str(d / "c.csv"), "--pedigree", str(d / "p.json"), "--seed", "4"]
    assert run(base + ["--strategy", "selective", "--out", str(d / "s.json")]) == 0
    assert run(base + ["--strategy", "random", "--out", str(d / "r.json")]) == 0
    sel = json.loads((d / "s.json").read_text())
    rnd = json.loads((d / "r.json").read_text())
    assert {k: len(v) for k, v in sel.items()} == {k: len(v) for k, v in rnd.items()}


def write_batch(d, eps="1.0", mech="standard_lpm", n=6):
    header = next(csv.reader(open(d / "c.csv")))
    with open(d / "q.csv", "w") as fh:
        fh.write("position,participants,epsilon,mechanism\n")
        for pos in header[2:2 + n]:
            fh.write(f"{pos},son;father;mother;U000,{eps},{mech}\n")


def test_query_and_attack_pipeline(cohort):
    d = cohort
    write_batch(d)
    qargs = ["query", "--in", str(d / "c.csv"), "--batch", str(d / "q.csv"), "--seed", "9"]
    assert run(qargs + ["--out", str(d / "a1.csv")]) == 0
    assert run(qargs + ["--out", str(d / "a2.csv")]) == 0
    assert (d / "a1.csv").read_bytes() == (d / "a2.csv").read_bytes()
    assert run(["kinship", "--in", str(d / "c.csv"), "--out", str(d / "k.csv")]) == 0
    for mode in ("dep", "indep"):
        out = d / f"r_{mode}.csv"
        code = run(["attack", "--answers", str(d / "a1.csv"), "--kin", str(d / "k.csv"), "--maf", str(d / "c.csv"),
                    "--mode", mode, "--target", "son", "--batch", str(d / "q.csv"), "--out", str(out)])
        assert code == 0
        report = rows(out)
        assert len(report) == 6
        for r in report:
            probs = [float(r[k]) for k in ("p0", "p1", "p2")]
            assert abs(sum(probs) - 1) < 1e-9
            assert r["true_value"] in ("0", "1", "2")


def test_noiseless_attack_with_participants_flag(cohort):
    d = cohort
    write_batch(d, eps="", mech="none", n=3)
    assert run(["query", "--in", str(d / "c.csv"), "--batch", str(d / "q.csv"), "--seed", "0", "--out", str(d / "a.csv")]) == 0
    assert run(["kinship", "--in", str(d / "c.csv"), "--out", str(d / "k.csv")]) == 0
    code = run(["attack", "--answers", str(d / "a.csv"), "--kin", str(d / "k.csv"), "--maf", str(d / "c.csv"),
                "--mode", "dep", "--target", "son", "--participants", "son;father;mother;U000", "--out", str(d / "r.csv")])
    assert code == 0


def test_dependent_sensitivity_needs_pedigree(cohort, capsys):
    d = cohort
    write_batch(d, mech="dependent_sensitivity")
    args = ["query", "--in", str(d / "c.csv"), "--batch", str(d / "q.csv"), "--seed", "1", "--out", str(d / "a.csv")]
    assert run(args) == 1
    assert capsys.readouterr().err.startswith("ERROR validation:")
    assert run(args + ["--pedigree", str(d / "p.json")]) == 0


def test_unknown_flag_exits_1_without_output(cohort, capsys):
    out = cohort / "never.csv"
    assert run(["kinship", "--in", str(cohort / "c.csv"), "--out", str(out), "--frobnicate"]) == 1
    assert not out.exists()
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("ERROR usage:")


def test_missing_subcommand_and_file(tmp_path, capsys):
    assert run([]) == 1
    assert run(["kinship", "--in", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "k.csv")]) == 1
    assert "ERROR io:" in capsys.readouterr().err


def test_bad_genotype_file_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,label,a\n#MAF,,0.2\nx,case,7\n")
    assert run(["kinship", "--in", str(bad), "--out", str(tmp_path / "k.csv")]) == 1
    assert capsys.readouterr().err.startswith("ERROR ingestion: line 3:")


def test_infeasible_mask_exits_2(tmp_path, capsys):
    (tmp_path / "c.csv").write_text("id,label,a,b,c,d\n#MAF,,0.3,0.3,0.3,0.3\nx,case,1,1,1,0\ny,case,1,1,1,0\n")
    (tmp_path / "p.json").write_text(json.dumps({"relations": [["x", "y", "first"]]}))
    code = run(["mask", "--in", str(tmp_path / "c.csv"), "--pedigree", str(tmp_path / "p.json"),
                "--seed", "0", "--out", str(tmp_path / "plan.json")])
    assert code == 2
    assert capsys.readouterr().err.startswith("ERROR infeasible:")
    assert not (tmp_path / "plan.json").exists()


def test_evaluate_is_byte_identical(tmp_path):
    cfg = {
        "cohort": {"n_unrelated": 8, "family_shape": "trio-plus-aunt", "m_snps": 200},
        "family_set": "FMT", "u_nonrelatives": 2, "epsilon_grid": [0.5, 5.0],
        "m_snps": 20, "trials": 2, "seed": 3,
    }
    (tmp_path / "e.json").write_text(json.dumps(cfg))
    for name in ("r1", "r2"):
        assert run(["evaluate", "--config", str(tmp_path / "e.json"), "--out", str(tmp_path / f"{name}.csv"),
                    "--summary", str(tmp_path / f"{name}_s.csv")]) == 0
    assert (tmp_path / "r1.csv").read_bytes() == (tmp_path / "r2.csv").read_bytes()
    assert (tmp_path / "r1_s.csv").read_bytes() == (tmp_path / "r2_s.csv").read_bytes()


def test_inputs_not_modified(cohort):
    before = (cohort / "c.csv").read_bytes()
    run(["mask", "--in", str(cohort / "c.csv"), "--pedigree", str(cohort / "p.json"), "--seed", "2", "--out", str(cohort / "x.json")])
    run(["kinship", "--in", str(cohort / "c.csv"), "--plan", str(cohort / "x.json"), "--out", str(cohort / "k.csv")])
    assert (cohort / "c.csv").read_bytes() == before
