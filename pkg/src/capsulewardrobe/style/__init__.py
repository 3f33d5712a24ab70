"""Style topic models over attribute-bag documents."""

from dataclasses import dataclass

from ..errors import ValidationError
from .base import (
    DEFAULT_STEP_THRESHOLD,
    StyleModelBase,
    derive_seed,
    load_model,
    model_from_dict,
    user_preference,
)
from .ctm import CorrelatedTopicModel
from .lda import LatentDirichletGibbs


@dataclass
class FitConfig:
    """Knobs for fitting a style model from a corpus."""

    k: int = 30
    iterations: int = 200
    burn_in: int = 100
    sample_count: int = 8
    seed: int = 0
    variant: str = "ctm"
    alpha: float | None = None
    beta: float = 0.01

    def __post_init__(self):
        if self.variant not in ("lda", "ctm"):
            raise ValidationError(f"unknown variant: {self.variant!r}")
        if not (0 <= self.burn_in < self.iterations):
            raise ValidationError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.sample_count < 1:
            raise ValidationError("sample_count must be >= 1")


def fit_style_model(corpus, config, n_attributes=None):
    """Fit the configured model variant on a corpus of attribute multisets."""
    if config.variant == "lda":
        model = LatentDirichletGibbs(
            k=config.k,
            alpha=config.alpha,
            beta=config.beta,
            iterations=config.iterations,
            burn_in=config.burn_in,
            sample_count=config.sample_count,
            n_attributes=n_attributes,
            seed=config.seed,
        )
    else:
        # burn_in/sample_count are Gibbs notions; the variational fit
        # interprets iterations as EM sweeps and ignores the rest.
        model = CorrelatedTopicModel(
            k=config.k,
            beta=config.beta,
            iterations=config.iterations,
            n_attributes=n_attributes,
            seed=config.seed,
        )
    return model.fit(corpus)


__all__ = [
    "DEFAULT_STEP_THRESHOLD",
    "CorrelatedTopicModel",
    "FitConfig",
    "LatentDirichletGibbs",
    "StyleModelBase",
    "derive_seed",
    "fit_style_model",
    "load_model",
    "model_from_dict",
    "user_preference",
]
