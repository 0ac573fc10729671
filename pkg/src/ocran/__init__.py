"""Rate regions for cloud radio access networks whose relays quantize and
forward without knowing the users' codebooks.

Subpackages:

* :mod:`ocran.core` - scenarios, subset algebra, rate regions, codebook sampler
* :mod:`ocran.gaussian` - Gaussian MIMO log-det region and matrix lemmas
* :mod:`ocran.discrete` - exact finite-alphabet constraint evaluation
* :mod:`ocran.sumrate` - sum-rate equivalence machinery (extreme points,
  time-shared successive Wyner-Ziv construction)
* :mod:`ocran.optimize` - quantizer search and Monte Carlo validation
* :mod:`ocran.verify` - randomized cross-module property suites
* :mod:`ocran.cli` - command-line interface
"""

__version__ = "0.1.0"

from .core import (
    CapacityError,
    CodebookEnsemble,
    RateRegion,
    Scenario,
    ScenarioError,
    SubsetPair,
    enumerate_constraint_pairs,
    load_scenario,
    sample_codebook_marginal,
    save_scenario,
)

__all__ = [
    "CapacityError",
    "CodebookEnsemble",
    "RateRegion",
    "Scenario",
    "ScenarioError",
    "SubsetPair",
    "enumerate_constraint_pairs",
    "load_scenario",
    "sample_codebook_marginal",
    "save_scenario",
    "__version__",
]
