"""Drug side-effect discovery via causal mediation on a knowledge graph.

The package turns a typed knowledge graph plus longitudinal cohort records
into tested drug/outcome hypotheses: candidate triples are generated from
graph structure or comorbidity mining, confounders are chosen on the causal
DAG, and each hypothesis gets a quasi-Bayesian mediation estimate with FDR
control across the batch. A synthetic-cohort module with a ground-truth
oracle backs the whole chain quantitatively.
"""

__version__ = "0.1.0"

from .adjustment import (
    AdjustmentSet,
    backdoor_sets,
    choose_backdoor_set,
    d_separated,
    disjunctive_cause_set,
    hypothesis_adjustment,
    prune_hierarchy,
)
from .cohort import (
    AnalysisSample,
    Cohort,
    PersonRecord,
    cooccurrence_counts,
    extension,
    index_date,
    load_cohort,
    probability,
    select_sample,
)
from .errors import CkgError
from .evaluation import (
    ReferenceSet,
    mann_whitney_u,
    prf,
    roc_auc,
    shared_indication_eval,
    similarity_matrix,
    tanimoto,
)
from .glm import (
    FitResult,
    cv_select_lambda,
    fit_lasso,
    fit_logistic,
    fit_ols,
    lambda_grid,
    lasso_union_selection,
)
from .hypotheses import (
    Hypothesis,
    availability_filter,
    causal_pairs,
    generate_hypotheses,
    mine_comorbidity_pairs,
    relative_risk,
)
from .kg import (
    CausalKnowledgeGraph,
    Edge,
    NodeId,
    causal_dag,
    disease,
    drug,
    isa_descendants,
    load_graph,
    write_graph,
)
from .mediation import (
    MediationConfig,
    MediationResult,
    bh_correct,
    estimate_acme,
    run_mediation_batch,
)
from .synth import ScmSpec, generate_cohort, parse_scm, true_acme

__all__ = [
    "__version__",
    "AdjustmentSet", "backdoor_sets", "choose_backdoor_set", "d_separated",
    "disjunctive_cause_set", "hypothesis_adjustment", "prune_hierarchy",
    "AnalysisSample", "Cohort", "PersonRecord", "cooccurrence_counts",
    "extension", "index_date", "load_cohort", "probability", "select_sample",
    "CkgError",
    "ReferenceSet", "mann_whitney_u", "prf", "roc_auc",
    "shared_indication_eval", "similarity_matrix", "tanimoto",
    "FitResult", "cv_select_lambda", "fit_lasso", "fit_logistic", "fit_ols",
    "lambda_grid", "lasso_union_selection",
    "Hypothesis", "availability_filter", "causal_pairs", "generate_hypotheses",
    "mine_comorbidity_pairs", "relative_risk",
    "CausalKnowledgeGraph", "Edge", "NodeId", "causal_dag", "disease", "drug",
    "isa_descendants", "load_graph", "write_graph",
    "MediationConfig", "MediationResult", "bh_correct", "estimate_acme",
    "run_mediation_batch",
    "ScmSpec", "generate_cohort", "parse_scm", "true_acme",
]
