"""Knowledge tracing: biased matrix factorization, states, bands, cohorts."""

from .model import (Band, CohortSummary, FactorModel, Hyperparameters,
                    KnowledgeStateSnapshot, build_omega, cohort_distribution,
                    fit, knowledge_state, loss_and_grad, mastery_band, predict,
                    predict_matrix)

__all__ = [
    "Band", "CohortSummary", "FactorModel", "Hyperparameters",
    "KnowledgeStateSnapshot", "build_omega", "cohort_distribution", "fit",
    "knowledge_state", "loss_and_grad", "mastery_band", "predict",
    "predict_matrix",
]
