import numpy as np
import pytest

from snphide.genotype import CohortSpec, GenotypeMatrix, SnpMeta, generate_cohort


def make_matrix(rows: dict, mafs=None) -> GenotypeMatrix:
    """Small matrix from ``{id: [genotypes]}``; MAFs default to 0.3."""
    ids = list(rows)
    m = len(next(iter(rows.values())))
    mafs = mafs or [0.3] * m
    snps = [SnpMeta(f"p{k}", mafs[k]) for k in range(m)]
    return GenotypeMatrix(ids, snps, np.array([rows[i] for i in ids], dtype=np.int8))


@pytest.fixture
def trio():
    return generate_cohort(CohortSpec(n_unrelated=4, family_shape="trio", m_snps=500, seed=11))


@pytest.fixture
def corpas():
    return generate_cohort(CohortSpec(n_unrelated=4, family_shape="trio-plus-aunt", m_snps=500, seed=5))


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
