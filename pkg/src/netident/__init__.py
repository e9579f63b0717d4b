"""Constructive identification of dyadic network formation models.

Links form as D_ij = 1{U_ij <= w(X_i, X_j) + phi(A_i, A_j)}.  The package
simulates such models, exposes their population moments through an oracle
that hides the fixed effects behind opaque handles, and recovers (w, A, F)
up to the normalization that fixes two quantiles of the shock law.
"""

__version__ = "0.1.0"

from .dgp import (CouplingSpec, DgpSpec, FixedEffectLaw, HomophilySpec, NonseparableSpec,
                  ShockDistribution, SparsitySpec, link_probability, logistic_fixture,
                  simulate_network)
from .errors import (AmbiguousConjecture, AssumptionViolated, BoundaryReached, DesignSingular,
                     DomainError, DomainExceeded, FeasibilityError, IdentificationError,
                     IdentificationFailure, NetIdentError, NumericError, OracleError,
                     OwnershipError, SaturationFailure, UnreachableTarget, UsageError)
from .oracle import SELF_PAIR, Against, FixedEffectHandle, Oracle, OracleConfig
from .recovery import NormalizationAnchors, RecoveredModel, recover_model

__all__ = [
    "__version__", "CouplingSpec", "DgpSpec", "FixedEffectLaw", "HomophilySpec",
    "NonseparableSpec", "ShockDistribution", "SparsitySpec", "link_probability",
    "logistic_fixture", "simulate_network", "AmbiguousConjecture", "AssumptionViolated",
    "BoundaryReached", "DesignSingular", "DomainError", "DomainExceeded", "FeasibilityError",
    "IdentificationError", "IdentificationFailure", "NetIdentError", "NumericError",
    "OracleError", "OwnershipError", "SaturationFailure", "UnreachableTarget", "UsageError",
    "SELF_PAIR", "Against", "FixedEffectHandle", "Oracle", "OracleConfig",
    "NormalizationAnchors", "RecoveredModel", "recover_model",
]
