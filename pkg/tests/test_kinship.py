import numpy as np
import pytest
from hypothesis import given, strategies as st

from snphide.errors import UndefinedKinshipError, ValidationError
from snphide.genotype import HIDDEN, CohortSpec, generate_cohort
from snphide.kinship import (
    KinshipMatrix, PairCounts, classify_degree, count_pair, kinship, kinship_matrix,
)

from conftest import make_matrix

cells = st.sampled_from([0, 1, 2, HIDDEN])


def loop_counts(gi, gk):
    """Position-by-position tally, independent of the vectorized counter."""
    n = dict(n11=0, n02=0, n20=0, het_i=0, het_k=0, n_valid=0)
    for a, b in zip(gi, gk):
        if a == HIDDEN or b == HIDDEN:
            continue
        n["n_valid"] += 1
        n["n11"] += a == 1 and b == 1
        n["n02"] += a == 0 and b == 2
        n["n20"] += a == 2 and b == 0
        n["het_i"] += a == 1
        n["het_k"] += b == 1
    return PairCounts(**n)


def test_hand_counted_pair():
    c = count_pair(np.array([1, 1, 2, 0]), np.array([1, 1, 0, 2]))
    assert c == PairCounts(n11=2, n02=1, n20=1, het_i=2, het_k=2, n_valid=4)
    assert kinship(c) == -0.5


def test_self_comparison():
    g = np.array([1, 0, 2, 1])
    c = count_pair(g, g)
    assert (c.n11, c.n02, c.n20, c.het_i, c.het_k) == (2, 0, 0, 2, 2)
    assert kinship(c) == 0.5


def test_hidden_exclusion():
    c = count_pair(np.array([1, HIDDEN, 1]), np.array([1, 1, HIDDEN]))
    assert c.n_valid == 1 and c.n11 == 1


def test_undefined_without_heterozygotes():
    with pytest.raises(UndefinedKinshipError):
        kinship(count_pair(np.array([0, 2, 0]), np.array([1, 1, 0])))


@pytest.mark.parametrize("phi,degree", [(0.25, "first"), (0.5, "duplicate"), (0.01, "unrelated"), (0.1, "second"), (-0.3, "unrelated")])
def test_classify(phi, degree):
    assert classify_degree(phi) == degree


def test_classify_rejects_nan():
    with pytest.raises(ValidationError):
        classify_degree(float("nan"))


@given(st.lists(st.tuples(cells, cells), min_size=1, max_size=60))
def test_counts_match_loop_oracle(pairs):
    gi = np.array([a for a, _ in pairs])
    gk = np.array([b for _, b in pairs])
    assert count_pair(gi, gk) == loop_counts(gi, gk)


@given(st.lists(st.tuples(cells, cells), min_size=1, max_size=60))
def test_kinship_symmetric_and_bounded(pairs):
    gi = np.array([a for a, _ in pairs])
    gk = np.array([b for _, b in pairs])
    try:
        forward = kinship(count_pair(gi, gk))
    except UndefinedKinshipError:
        with pytest.raises(UndefinedKinshipError):
            kinship(count_pair(gk, gi))
        return
    assert forward == kinship(count_pair(gk, gi))
    assert forward <= 0.5


@given(st.lists(st.sampled_from([0, 1, 2]), min_size=1, max_size=60))
def test_duplicate_is_half(g):
    g = np.array(g)
    if (g == 1).any():
        assert kinship(count_pair(g, g)) == 0.5


def test_parent_child_simulation():
    values = []
    for seed in range(20):
        g, _ = generate_cohort(CohortSpec(n_unrelated=0, family_shape="trio", m_snps=500, seed=seed))
        values.append(kinship(count_pair(g.row("son"), g.row("mother"))))
    assert abs(np.mean(values) - 0.25) < 0.05


def test_matrix_on_trio(trio):
    matrix, _ = trio
    kin = kinship_matrix(matrix)
    assert len(kin) == 7 * 6 // 2
    assert kin.degree("son", "father") == "first"
    assert kin.degree("mother", "son") == "first"
    assert kin.degree("father", "mother") == "unrelated"


def test_single_individual_matrix():
    g = make_matrix({"A": [0, 1, 2]})
    assert len(kinship_matrix(g)) == 0


def test_undefined_pairs_become_warnings():
    g = make_matrix({"A": [0, 2, 0], "B": [1, 1, 0], "C": [1, 0, 1]})
    kin = kinship_matrix(g)
    assert ("A", "B") not in kin and ("A", "C") not in kin
    assert ("B", "C") in kin
    assert len(kin.warnings) == 2
    assert kin.degree("A", "B") == "unrelated"


def test_csv_roundtrip(tmp_path, trio):
    matrix, _ = trio
    kin = kinship_matrix(matrix)
    kin.to_csv(tmp_path / "k.csv")
    back = KinshipMatrix.from_csv(tmp_path / "k.csv")
    assert back.entries == kin.entries
