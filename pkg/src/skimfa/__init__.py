"""Sparse nonlinear regression with interactions via the SKIM-FA kernel.

The package fits kernel ridge regression models whose kernel is a weighted
sum of tensor-product interaction kernels with factorized weights
``theta_V = eta_{|V|}^2 * prod_{i in V} kappa_i^2``.  The factorization makes
a single kernel evaluation cost O(p * Q) through an elementary-symmetric
recursion over power sums, and exact zeros in ``kappa`` perform variable
selection in time linear in the number of covariates.

Main entry points
-----------------
``trainer.fit``
    Learn the kernel hyperparameters by gradient descent on a Monte Carlo
    cross-validation loss with an increasing truncation schedule, then solve
    the final ridge system.
``anova``
    Variable selection, exact extraction of orthogonal effect functions,
    variance decomposition, re-expression with respect to the joint covariate
    measure, and empirical product-measure decomposition of black boxes.
``synthbench``
    Synthetic scenario generation and selection/estimation metrics.
"""

from .basis import (
    BasisError,
    FeatureLibrary,
    OneHotSpec,
    PolynomialSpec,
    SplineSpec,
    build_library,
    eval_k1,
)
from .kernel import (
    SkimHyperParams,
    elementary_symmetric,
    eval_skim,
    eval_skim_bruteforce,
    gram_matrix,
)
from .ridge import FittedModel, WeightSpaceModel, predict, solve
from .trainer import TrainConfig, TrainTrace, cv_loss_grad, fit, mc_cv_loss, trunc_schedule
from .anova import (
    AnovaDecomposition,
    ChangeOfBasisCoefficients,
    change_basis,
    decompose,
    empirical_joint_sampler,
    empirical_product_anova,
    empirical_product_sampler,
    extract_effect,
    select,
    variance_decomposition,
)
from .synthbench import EvalReport, GroundTruth, Scenario, evaluate, generate

__version__ = "0.1.0"

__all__ = [
    "AnovaDecomposition",
    "BasisError",
    "ChangeOfBasisCoefficients",
    "EvalReport",
    "FeatureLibrary",
    "FittedModel",
    "GroundTruth",
    "OneHotSpec",
    "PolynomialSpec",
    "Scenario",
    "SkimHyperParams",
    "SplineSpec",
    "TrainConfig",
    "TrainTrace",
    "WeightSpaceModel",
    "build_library",
    "change_basis",
    "cv_loss_grad",
    "decompose",
    "elementary_symmetric",
    "empirical_joint_sampler",
    "empirical_product_anova",
    "empirical_product_sampler",
    "eval_k1",
    "eval_skim",
    "eval_skim_bruteforce",
    "evaluate",
    "extract_effect",
    "fit",
    "generate",
    "gram_matrix",
    "mc_cv_loss",
    "predict",
    "select",
    "solve",
    "trunc_schedule",
    "variance_decomposition",
]
