"""Topic alignment across LDA models fitted at different resolutions.

Fit an ensemble of models over a range of K, align their topics with
inner-product or optimal-transport weights, and score each topic's
stability (paths, coherence, refinement).  Simulation generators and a
held-out perplexity baseline are included for benchmarking.
"""

from .alignment import (
    AlignmentGraph,
    TopicAlignment,
    align_ensemble,
    crossing_objective,
    normalize,
    product_weights,
    reorder_topics,
    transport_weights,
)
from .corpus import (
    CountMatrix,
    SeededRng,
    as_count_matrix,
    load_counts,
    load_ensemble,
    save_counts,
    save_ensemble,
)
from .diagnostics import (
    PathAssignment,
    Plateau,
    assign_paths,
    coherence,
    coherence_scores,
    detect_plateau,
    estimation_specificity,
    n_paths,
    refinement,
    refinement_scores,
)
from .lda import (
    GibbsConfig,
    GibbsLda,
    LdaHyperparams,
    ModelEnsemble,
    TopicModel,
    fit_ensemble,
    fit_lda,
    fold_in,
    perplexity,
)
from .measures import cosine_similarity, distinctiveness, jsd, kl
from .simulate import (
    BackgroundSimSpec,
    LdaSimSpec,
    StrainSwitchSpec,
    sim_background,
    sim_lda,
    sim_null,
    sim_strain_switching,
)
from .transport import TransportPlan, TransportProblem, lp_oracle, solve_exact

__version__ = "0.1.0"

__all__ = [
    "AlignmentGraph",
    "BackgroundSimSpec",
    "CountMatrix",
    "GibbsConfig",
    "GibbsLda",
    "LdaHyperparams",
    "LdaSimSpec",
    "ModelEnsemble",
    "PathAssignment",
    "Plateau",
    "SeededRng",
    "StrainSwitchSpec",
    "TopicAlignment",
    "TopicModel",
    "TransportPlan",
    "TransportProblem",
    "align_ensemble",
    "as_count_matrix",
    "assign_paths",
    "coherence",
    "coherence_scores",
    "cosine_similarity",
    "crossing_objective",
    "detect_plateau",
    "distinctiveness",
    "estimation_specificity",
    "fit_ensemble",
    "fit_lda",
    "fold_in",
    "jsd",
    "kl",
    "load_counts",
    "load_ensemble",
    "lp_oracle",
    "n_paths",
    "normalize",
    "perplexity",
    "product_weights",
    "refinement",
    "refinement_scores",
    "reorder_topics",
    "save_counts",
    "save_ensemble",
    "sim_background",
    "sim_lda",
    "sim_null",
    "sim_strain_switching",
    "solve_exact",
    "transport_weights",
]
