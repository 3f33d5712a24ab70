"""Capsule assembly from layered item catalogs.

Selects small per-layer garment subsets whose cross-layer combinations are
both mutually compatible and stylistically versatile, scored by a generative
topic model over attribute bags.
"""

__version__ = "0.1.0"

from .catalog import (
    AttributeVocab,
    Capsule,
    Catalog,
    Garment,
    Outfit,
    build_outfit,
    capsule_outfits,
    incremental_outfits,
    load_catalog,
)
from .errors import BudgetExceededError, CapsuleWardrobeError, CatalogError, ValidationError
from .style import (
    DEFAULT_STEP_THRESHOLD,
    CorrelatedTopicModel,
    FitConfig,
    LatentDirichletGibbs,
    fit_style_model,
    load_model,
    user_preference,
)

__all__ = [
    "AttributeVocab",
    "BudgetExceededError",
    "Capsule",
    "CapsuleWardrobeError",
    "Catalog",
    "CatalogError",
    "CorrelatedTopicModel",
    "DEFAULT_STEP_THRESHOLD",
    "FitConfig",
    "Garment",
    "LatentDirichletGibbs",
    "Outfit",
    "ValidationError",
    "build_outfit",
    "capsule_outfits",
    "fit_style_model",
    "incremental_outfits",
    "load_catalog",
    "load_model",
    "user_preference",
]
