"""Bayesian comparison of systems scored by repeated k-fold cross-validation.

The package covers the whole pipeline: splitting a corpus into repeated
k-fold plans, running external systems and scoring their predictions,
pooling paired score differences across data sets with a hierarchical
model (or an analytic t posterior for a single data set), and turning the
posterior into left / practically-equivalent / right probabilities against
a region of practical equivalence.
"""

__version__ = "0.1.0"

from .decision import DecisionTriple, RopeInterval, rank, region_probs, simplex_coordinates, tally
from .errors import BayescvError
from .metrics import TaggedCorpus, Vocabulary, oov_accuracy, sentence_accuracy, token_accuracy
from .model import ModelConfig, PosteriorChains, TTestPosterior, correlated_ttest, fit, generate
from .scores import DifferenceSeries, ScoreMatrix, assemble_differences
from .splits import SplitPlan, fold_roles, make_splits
from .statcore import CompoundSymmetryCov, StudentT, cs_mvn_loglik, rng_fork, t_cdf, t_sample

__all__ = [
    "BayescvError",
    "CompoundSymmetryCov",
    "DecisionTriple",
    "DifferenceSeries",
    "ModelConfig",
    "PosteriorChains",
    "RopeInterval",
    "ScoreMatrix",
    "SplitPlan",
    "StudentT",
    "TaggedCorpus",
    "TTestPosterior",
    "Vocabulary",
    "assemble_differences",
    "correlated_ttest",
    "cs_mvn_loglik",
    "fit",
    "fold_roles",
    "generate",
    "make_splits",
    "oov_accuracy",
    "rank",
    "region_probs",
    "rng_fork",
    "sentence_accuracy",
    "simplex_coordinates",
    "t_cdf",
    "t_sample",
    "tally",
    "token_accuracy",
]
