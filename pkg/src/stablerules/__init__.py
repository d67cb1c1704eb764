"""Association-rule classification with decorrelating sample weights."""

__version__ = "0.1.0"

from .core import (FeatureMatrix, LabelVector, SampleWeights, SplitSpec, ValidatedDataset,
                   split_train_test, standardize, validate_dataset)
from .decorrelation import DecorConfig, decor_penalty, decor_penalty_and_grad, learn_weights, weighted_poly_fit
from .errors import DataError, NonConvergence, StableRulesError
from .evaluation import (beta_errors, classification_metrics, correlation_profile, regression_metrics,
                         spearman_consistency)
from .mining import Rule, RuleMatrix, build_rule_matrix, derive_rules, mine_frequent_itemsets, mine_rules
from .models import (LinearModel, SvmConfig, fit_dwr, fit_linear_baseline, fit_weighted_svm,
                     fit_weighted_svr, predict)
from .selection import SelectionBounds, item_reduce, rules_selection, score_rules
from .synthesis import BiasSpec, EnvSpec, make_environment

__all__ = [name for name in dir() if not name.startswith("_")]
