"""Consistency assessment for network meta-analysis.

Treats the inconsistency factors of a contrast-level network meta-analysis
as candidate covariates and runs spike-and-slab stochastic-search selection
over them, reporting per-comparison posterior inclusion probabilities and
the posterior odds of the consistency hypothesis.
"""

from .analysis import (
    ConsistencyReport,
    Diagnostics,
    PosteriorOdds,
    build_report,
    consistency_odds,
    convergence,
    evidence_label,
    median_probability_model,
    model_id,
    model_table_csv,
    pip,
    pips_csv,
    posterior_model_probs,
    reduce_dimension,
    split_rhat,
)
from .design import DesignMatrixX, build_design_matrix, contrast_row, linear_predictor, matrix_dump
from .graphs import (
    ComparisonGraph,
    Factor,
    InconsistencySpec,
    LoopSet,
    comparison_graph,
    find_bridges,
    independent_loops,
    place_design_by_treatment,
    place_factors,
    place_jackson,
    place_lu_ades,
    z_dump,
)
from .network import (
    ContrastObservation,
    EvidenceNetwork,
    SamplingCovariance,
    Study,
    Treatment,
    ValidationError,
    canonical_dump,
    load_network,
    multiarm_covariance,
    parse_canonical,
    prune_disconnected,
    read_network,
)
from .oracle import OracleResult, enumerate_exact
from .priors import (
    ConsistencyPrior,
    PilotResult,
    SpikeSlabConfig,
    correlated_significance_region,
    default_g,
    historical_consistency_prior,
    inclusion_probability,
    naive_consistency_probability,
    pilot_psi,
    prior_b_covariance,
    psi_from_threshold,
    resolve_config,
    xi,
)
from .sampler import (
    ChainOutput,
    HeterogeneityPrior,
    McmcConfig,
    ModelState,
    NumericalError,
    Workspace,
    run_selection,
    update_gamma,
    update_mu_b,
    update_pi_cons,
    update_sigma2,
    update_tau,
    write_trace,
)

__version__ = "0.1.0"
