"""The capsule objective: modular compatibility plus probabilistic coverage.

Compatibility of an outfit set is the sum of per-outfit step scores, so its
marginal gain never depends on what is already selected.  Versatility is a
coverage function over styles: each outfit covers style ``i`` with
probability ``theta_i``, a style counts as covered once at least one outfit
covers it, and the per-style value is ``1 - prod(1 - theta_i)``.  Expanding a
set therefore has diminishing returns, which is what the per-layer greedy
selection relies on.

``ObjectiveState`` is the incremental engine the solvers use: it maintains
the running compatibility sum and the per-style product of ``(1 - theta)``,
so the gain of a candidate outfit set costs one pass over the new outfits
plus O(K) arithmetic.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass
class ObjectiveConfig:
    """Scorer plus the knobs combining compatibility with coverage.

    ``weights`` switches coverage to its preference-weighted form;
    ``coverage_weight`` is the compatibility/versatility trade-off scalar
    (reported in outputs; 1.0 reproduces the plain sum).
    """

    scorer: object
    weights: np.ndarray | None = None
    coverage_weight: float = 1.0

    def __post_init__(self):
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != (self.scorer.n_styles,):
                raise ValidationError(
                    f"weights must have {self.scorer.n_styles} entries, got {w.shape}"
                )
            if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-9:
                raise ValidationError("weights must be non-negative and sum to 1")
            self.weights = w
        if self.coverage_weight < 0:
            raise ValidationError("coverage_weight must be non-negative")

    @property
    def n_styles(self):
        return self.scorer.n_styles

    def style_weights(self):
        if self.weights is not None:
            return self.weights
        return np.ones(self.n_styles)


def compatibility(outfits, config):
    """Sum of thresholded per-outfit compatibility scores; 0 for the empty set."""
    outfits = list(outfits)
    if not outfits:
        return 0.0
    return float(sum(s.compat for s in config.scorer.stats_many(outfits)))


def _style_coverage(outfits, config):
    remaining = np.ones(config.n_styles)
    for s in config.scorer.stats_many(list(outfits)):
        remaining *= 1.0 - s.theta
    return 1.0 - remaining


def coverage(outfits, config):
    """Uniform style coverage: sum over styles of 1 - prod(1 - theta)."""
    outfits = list(outfits)
    if not outfits:
        return 0.0
    return float(_style_coverage(outfits, config).sum())


def personalized_coverage(outfits, config):
    """Preference-weighted style coverage; requires configured weights."""
    if config.weights is None:
        raise ValidationError("personalized coverage needs configured weights")
    outfits = list(outfits)
    if not outfits:
        return 0.0
    return float((config.weights * _style_coverage(outfits, config)).sum())


def objective(outfits, config):
    """Compatibility plus (personalized) coverage of an outfit set."""
    outfits = list(outfits)
    cov = (
        personalized_coverage(outfits, config)
        if config.weights is not None
        else coverage(outfits, config)
    )
    return compatibility(outfits, config) + config.coverage_weight * cov


@dataclass
class CandidateAggregate:
    """Folded scores of one candidate's introduced outfit set: the
    compatibility increment and the per-style product of (1 - theta)."""

    compat: float
    remaining: np.ndarray
    count: int


class ObjectiveState:
    """Running objective over an incrementally grown outfit set."""

    def __init__(self, config):
        self.config = config
        self.compat_sum = 0.0
        self.remaining = np.ones(config.n_styles)
        self._w = config.style_weights()
        self._lam = config.coverage_weight

    def clone(self):
        fresh = ObjectiveState(self.config)
        fresh.compat_sum = self.compat_sum
        fresh.remaining = self.remaining.copy()
        return fresh

    def aggregate(self, outfits):
        """Score a candidate outfit set once; reusable across greedy steps."""
        outfits = list(outfits)
        stats = self.config.scorer.stats_many(outfits)
        remaining = np.ones(self.config.n_styles)
        total = 0.0
        for s in stats:
            total += s.compat
            remaining *= 1.0 - s.theta
        return CandidateAggregate(total, remaining, len(outfits))

    def gain(self, agg):
        """Objective increase from folding a candidate aggregate in."""
        covered = self.remaining * (1.0 - agg.remaining)
        return agg.compat + self._lam * float((self._w * covered).sum())

    def fold(self, agg):
        self.compat_sum += agg.compat
        self.remaining = self.remaining * agg.remaining

    def value(self):
        covered = 1.0 - self.remaining
        return self.compat_sum + self._lam * float((self._w * covered).sum())
