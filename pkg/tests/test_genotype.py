import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from snphide.errors import IngestionError, ValidationError
from snphide.genotype import (
    HIDDEN, CohortSpec, MaskPlan, Pedigree, SnpMeta, apply_mask, child_genotypes, expected_kinship,
    founder_genotypes, generate_cohort, ingest_genotype_csv, write_genotype_csv,
)
from snphide.kinship import kinship, pair_counts

from conftest import make_matrix

GOOD_CSV = "id,label,a,b,c\n#MAF,,0.1,0.2,0.5\nx,case,0,1,2\ny,control,H,2,1\n"


def test_ingest_small_file(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text(GOOD_CSV)
    g = ingest_genotype_csv(path)
    assert g.values.size == 6
    assert g.positions == ("a", "b", "c")
    assert g.cell("y", "a") == HIDDEN
    assert list(g.mafs) == [0.1, 0.2, 0.5]


def test_ingest_bad_cell_names_line(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text(GOOD_CSV.replace("y,control,H,2,1", "y,control,H,3,1"))
    with pytest.raises(IngestionError, match="line 4") as info:
        ingest_genotype_csv(path)
    assert info.value.line == 4


def test_ingest_rejects_maf_above_half(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text(GOOD_CSV.replace("0.5\n", "0.6\n"))
    with pytest.raises(ValidationError):
        ingest_genotype_csv(path)


@pytest.mark.parametrize("text", [
    "",
    "name,label,a\n#MAF,,0.1\n",
    "id,label,a\nx,case,1\n",
    "id,label,a,b\n#MAF,,0.1,0.2\nx,case,1\n",
    "id,label,a\n#MAF,,0.1\nx,case,1\nx,case,0\n",
])
def test_ingest_malformed(tmp_path, text):
    path = tmp_path / "g.csv"
    path.write_text(text)
    with pytest.raises(IngestionError):
        ingest_genotype_csv(path)


def test_csv_roundtrip(tmp_path, trio):
    matrix, _ = trio
    masked = apply_mask(matrix, MaskPlan({"son": {"rs00003", "rs00010"}}))
    write_genotype_csv(masked, tmp_path / "c.csv")
    assert ingest_genotype_csv(tmp_path / "c.csv") == masked


def test_matrix_is_read_only(trio):
    matrix, _ = trio
    with pytest.raises(ValueError):
        matrix.values[0, 0] = 2


def test_unknown_ids_rejected(trio):
    matrix, _ = trio
    with pytest.raises(ValidationError):
        matrix.row("nobody")
    with pytest.raises(ValidationError):
        matrix.col_index("rs99999")


@pytest.mark.parametrize("maf", [0.0, -0.1, 0.51])
def test_snp_meta_bounds(maf):
    with pytest.raises(ValidationError):
        SnpMeta("p", maf)


def test_pedigree_validation():
    with pytest.raises(ValidationError):
        Pedigree(("a",), frozenset({("a", "a", "first")}))
    with pytest.raises(ValidationError):
        Pedigree(("a", "b"), frozenset({("a", "b", "first"), ("b", "a", "second")}))
    with pytest.raises(ValidationError):
        Pedigree(("a", "b"), frozenset(), {"a": ("b", "x"), "b": ("a", "y")})


def test_pedigree_symmetric_and_json_roundtrip(corpas):
    _, ped = corpas
    assert ped.degree("son", "mother") == ped.degree("mother", "son") == "first"
    assert ped.degree("son", "aunt") == "second"
    assert ped.degree("aunt", "mother") == "first"
    assert ped.degree("father", "mother") is None
    assert ped.degree("father", "aunt") is None
    assert Pedigree.from_json(ped.to_json()) == ped
    assert ped.families() == [{"son", "father", "mother", "aunt"}]


def test_expected_kinship_recursion():
    parents = {"son": ("f", "m"), "m": ("g1", "g2"), "aunt": ("g1", "g2")}
    assert expected_kinship(parents, "son", "f") == 0.25
    assert expected_kinship(parents, "m", "aunt") == 0.25
    assert expected_kinship(parents, "son", "aunt") == 0.125
    assert expected_kinship(parents, "f", "m") == 0.0
    assert expected_kinship(parents, "son", "son") == 0.5


def test_empty_plan_is_identity(trio):
    matrix, _ = trio
    assert apply_mask(matrix, MaskPlan()) == matrix


def test_point_mask():
    g = make_matrix({"A": [0, 1, 2, 1], "B": [1, 1, 1, 1]})
    masked = apply_mask(g, MaskPlan({"A": {"p3"}}))
    diff = np.argwhere(masked.values != g.values)
    assert diff.tolist() == [[0, 3]]
    assert masked.cell("A", "p3") == HIDDEN


def test_mask_plan_json_roundtrip():
    plan = MaskPlan({"a": {"p2", "p1"}, "b": set()})
    assert plan.to_json() == {"a": ["p1", "p2"]}
    assert MaskPlan.from_json(plan.to_json()) == plan
    assert plan.extend("b", ["p1"]).hidden_positions == {"p1", "p2"}


def test_founders_follow_hardy_weinberg():
    rng = np.random.default_rng(0)
    draws = founder_genotypes(np.full(200_000, 0.5), rng)
    freq = np.bincount(draws, minlength=3) / draws.size
    assert np.allclose(freq, [0.25, 0.5, 0.25], atol=0.005)


def test_child_of_homozygous_major_parents():
    rng = np.random.default_rng(1)
    zeros = np.zeros(1000, dtype=np.int8)
    assert (child_genotypes(zeros, zeros, rng) == 0).all()
    twos = np.full(1000, 2, dtype=np.int8)
    assert (child_genotypes(twos, zeros, rng) == 1).all()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_children_are_mendelian(seed):
    matrix, _ = generate_cohort(CohortSpec(n_unrelated=0, family_shape="trio", m_snps=200, seed=seed))
    f, m, c = matrix.row("father"), matrix.row("mother"), matrix.row("son")
    # the child carries one allele from each parent
    assert ((c >= (f == 2).astype(int) + (m == 2).astype(int))).all()
    assert ((c <= (f > 0).astype(int) + (m > 0).astype(int))).all()


def test_generator_is_deterministic():
    spec = CohortSpec(n_unrelated=5, family_shape="trio-plus-aunt", m_snps=50, seed=42)
    a, ped_a = generate_cohort(spec)
    b, ped_b = generate_cohort(spec)
    assert a == b and ped_a == ped_b
    assert a.individuals == ("U000", "U001", "U002", "U003", "U004", "aunt", "father", "mother", "son")
    assert set(ped_a.members) == {"aunt", "father", "mother", "son"}


def test_parent_child_kinship_near_quarter():
    values = []
    for seed in range(100):
        g, _ = generate_cohort(CohortSpec(n_unrelated=0, family_shape="trio", m_snps=200, seed=seed))
        values.append(kinship(pair_counts(g, "son", "father")))
    assert 0.20 <= np.mean(values) <= 0.30


def test_custom_family_shape():
    shape = {"parents": {"kid": ["dad", "mum"]}, "latent": ["dad"]}
    g, ped = generate_cohort(CohortSpec(n_unrelated=2, family_shape=shape, m_snps=30, seed=0))
    assert "dad" not in g.individuals
    assert ped.related_pairs() == [("kid", "mum", "first")]


def test_cohort_spec_json_and_validation():
    spec = CohortSpec(maf_sampler=("fixed", 0.2))
    assert CohortSpec.from_json(spec.to_json()) == spec
    with pytest.raises(ValidationError):
        CohortSpec(family_shape="quads")
    with pytest.raises(ValidationError):
        CohortSpec(maf_sampler=("uniform", 0.1, 0.7))
    with pytest.raises(ValidationError):
        CohortSpec.from_json({"bogus": 1})
