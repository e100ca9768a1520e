"""Selective SNP hiding against kinship-aware inference on noisy genomic statistics."""

from .adversary import (
    AdversaryKnowledge, Posterior, attack_sweep, correctness, infer_snp, posterior_matrix,
    reconstruct_pedigree,
)
from .dp import QueryAnswer, QuerySpec, answer_query, laplace_noise, maf_release, true_count
from .errors import IngestionError, InfeasibleError, UndefinedKinshipError, ValidationError
from .evaluation import ExperimentConfig, MetricsRow, run_experiment, summarize, utility_loss
from .genotype import (
    CohortSpec, GenotypeMatrix, MaskPlan, Pedigree, SnpMeta, apply_mask, generate_cohort,
    ingest_genotype_csv,
)
from .inference import GenotypeDist, PedigreeModel, SumDist, convolve_sums, family_joint, hwe_prior, transmission
from .kinship import KinshipMatrix, PairCounts, classify_degree, kinship, kinship_matrix
from .masking import (
    closed_form_x11, family_config_counts, random_mask, select_positions, sequential_mask,
    solve_hiding_ip,
)

__version__ = "0.1.0"
