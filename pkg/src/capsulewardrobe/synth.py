"""Synthetic data: planted topic models, corpora, catalogs, labeled outfits.

Everything here is seed-deterministic so the whole test and benchmark suite
runs without external data.  Planted topic-attribute rows are block
structured (topic t owns an exclusive slice of the vocabulary plus a small
leak everywhere), which makes recovery and separation properties easy to
verify.
"""

import numpy as np

from .catalog import Catalog, AttributeVocab, make_garment
from .errors import ValidationError
from .style import CorrelatedTopicModel, LatentDirichletGibbs
from .style.base import derive_seed


def planted_phi(k, v, rng, leak=0.02, active_frac=0.85):
    """Block-structured topic-attribute matrix: topic t owns an exclusive
    block inside the first ``active_frac`` of the vocabulary.

    The remaining attributes carry only leak mass, so uniformly random
    token bags are visibly out-of-model for every topic mixture.
    """
    if v < k:
        raise ValidationError("need at least one attribute per topic")
    phi = np.full((k, v), leak / v)
    active = max(k, int(round(active_frac * v)))
    bounds = np.linspace(0, active, k + 1).astype(int)
    for t in range(k):
        block = slice(bounds[t], bounds[t + 1])
        width = bounds[t + 1] - bounds[t]
        weights = 1.0 + rng.random(width)
        phi[t, block] += (1.0 - leak) * weights / weights.sum()
    return phi / phi.sum(axis=1, keepdims=True)


def paired_covariance(k, rho=0.8, scale=2.0, cross=0.0):
    """Covariance with positively correlated topic pairs (0,1), (2,3), ...
    and optional negative correlation across pairs.

    Positive definite for the parameter ranges used here (|rho| < 1 and
    small |cross|); checked at construction.
    """
    sigma = np.full((k, k), cross)
    np.fill_diagonal(sigma, 1.0)
    for a in range(0, k - 1, 2):
        sigma[a, a + 1] = sigma[a + 1, a] = rho
    sigma *= scale
    if np.linalg.eigvalsh(sigma).min() <= 0:
        raise ValidationError("requested covariance is not positive definite")
    return sigma


def planted_ctm(k, v, seed=0, rho=0.8, scale=2.0, cross=0.0, leak=0.02, active_frac=0.85):
    """A fitted-looking logistic-normal model with planted parameters."""
    rng = np.random.default_rng(derive_seed(seed, "planted-ctm"))
    model = CorrelatedTopicModel(k=k, seed=seed)
    model._mark_fitted(
        planted_phi(k, v, rng, leak=leak, active_frac=active_frac),
        mu=np.zeros(k),
        sigma=paired_covariance(k, rho=rho, scale=scale, cross=cross),
    )
    return model


def planted_lda(k, v, seed=0, alpha=None, leak=0.02, active_frac=0.85):
    rng = np.random.default_rng(derive_seed(seed, "planted-lda"))
    model = LatentDirichletGibbs(k=k, seed=seed)
    alpha_vec = np.full(k, (1.0 / k) if alpha is None else float(alpha))
    model._mark_fitted(planted_phi(k, v, rng, leak=leak, active_frac=active_frac), alpha=alpha_vec)
    return model


def sample_theta(model, rng, size=1):
    """Draw style compositions from the model's own prior."""
    if model.variant == "ctm":
        etas = rng.multivariate_normal(model.mu_, model.sigma_, size=size)
        shifted = etas - etas.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)
    return rng.dirichlet(model.alpha_, size=size)


def sample_document(model, rng, length, theta=None):
    if theta is None:
        theta = sample_theta(model, rng)[0]
    topics = rng.choice(model.n_topics, size=length, p=theta)
    tokens = [int(rng.choice(model.vocab_size, p=model.phi_[t])) for t in topics]
    return tuple(sorted(tokens))


def sample_corpus(model, n_docs, seed=0, length_range=(8, 16)):
    rng = np.random.default_rng(derive_seed(seed, "corpus"))
    lo, hi = length_range
    return [
        sample_document(model, rng, int(rng.integers(lo, hi + 1)))
        for _ in range(n_docs)
    ]


def sample_topic_document(model, rng, length, topic):
    """A document drawn purely from one topic's attribute distribution."""
    tokens = [int(rng.choice(model.vocab_size, p=model.phi_[topic])) for _ in range(length)]
    return tuple(sorted(tokens))


def scrambled_document(model, rng, length):
    """Uniformly random attribute tokens (the in-model counterpart's foil)."""
    return tuple(sorted(int(t) for t in rng.integers(0, model.vocab_size, size=length)))


def paired_document(model, rng, length, pair):
    """Tokens split evenly between the two topics of one correlation pair."""
    a, b = 2 * pair, 2 * pair + 1
    half = length // 2
    doc = [int(rng.choice(model.vocab_size, p=model.phi_[a])) for _ in range(half)] + [
        int(rng.choice(model.vocab_size, p=model.phi_[b])) for _ in range(length - half)
    ]
    return tuple(sorted(doc))


def anticorrelated_document(model, rng, length):
    """Tokens split between two topics from different correlation pairs."""
    k = model.n_topics
    pair_a = int(rng.integers(0, k))
    others = [t for t in range(k) if t // 2 != pair_a // 2]
    pair_b = int(rng.choice(others)) if others else (pair_a + 1) % k
    half = length // 2
    doc = [
        int(rng.choice(model.vocab_size, p=model.phi_[pair_a])) for _ in range(half)
    ] + [
        int(rng.choice(model.vocab_size, p=model.phi_[pair_b]))
        for _ in range(length - half)
    ]
    return tuple(sorted(doc))


DEFAULT_META_LABELS = {
    "season": ("winter", "summer"),
    "occasion": ("work", "vacation"),
}


def _topic_meta(topic, k):
    """Meta labels keyed off the topic's correlation pair."""
    first_half = topic < (k + 1) // 2
    return {
        "season": "winter" if first_half else "summer",
        "occasion": "work" if first_half else "vacation",
    }


def synth_catalog(
    model,
    layers=3,
    per_layer=10,
    seed=0,
    bag_range=(4, 8),
    anchor=0.6,
    vocab_names=None,
):
    """Catalog whose garments carry topic-flavoured attribute bags.

    Each garment is anchored to one topic (tagged in its meta labels) with a
    prior-drawn composition mixed in; ``anchor`` sets how pure the bags are.
    """
    rng = np.random.default_rng(derive_seed(seed, "catalog"))
    k, v = model.n_topics, model.vocab_size
    if vocab_names is None:
        vocab_names = [f"a{i}" for i in range(v)]
    counts = [per_layer] * layers if np.isscalar(per_layer) else list(per_layer)
    garments = []
    lo, hi = bag_range
    for layer, n in enumerate(counts):
        for j in range(n):
            topic = int(rng.integers(0, k))
            theta = anchor * np.eye(k)[topic] + (1.0 - anchor) * sample_theta(model, rng)[0]
            bag = sample_document(model, rng, int(rng.integers(lo, hi + 1)), theta=theta)
            garments.append(
                make_garment(f"L{layer}g{j:03d}", layer, bag, _topic_meta(topic, k))
            )
    return Catalog(AttributeVocab(vocab_names), len(counts), garments)


def make_instance(
    seed,
    n=6,
    m=3,
    k=4,
    v=40,
    rho=0.5,
    scale=2.0,
    cross=-0.2,
    bag_range=(4, 8),
    anchor=0.6,
    threshold_quantile=0.5,
    probe_size=40,
):
    """One seeded synthetic capsule-selection instance.

    Returns ``(catalog, objective_config)``.  The step threshold is
    calibrated per instance to the given quantile of a probe sample of
    random outfits, so both step-score classes are populated.
    """
    from .objective import ObjectiveConfig
    from .scoring import StyleScorer

    model = planted_ctm(
        k, v, seed=derive_seed(seed, "instance-model"), rho=rho, scale=scale, cross=cross
    )
    catalog = synth_catalog(
        model,
        layers=m,
        per_layer=n,
        seed=derive_seed(seed, "instance-catalog"),
        bag_range=bag_range,
        anchor=anchor,
    )
    rng = np.random.default_rng(derive_seed(seed, "instance-probe"))
    from .catalog import Outfit

    probes = []
    for _ in range(probe_size):
        members = [
            layer[int(rng.integers(0, len(layer)))] for layer in catalog.layers if layer
        ]
        probes.append(Outfit(members))
    scorer = StyleScorer(model, threshold=0.0, seed=derive_seed(seed, "instance-scorer"))
    logliks = [s.loglik for s in scorer.stats_many(probes)]
    scorer.threshold = float(np.quantile(logliks, threshold_quantile))
    # probe scores were cached with the placeholder threshold; start clean
    fresh = StyleScorer(
        model, threshold=scorer.threshold, seed=derive_seed(seed, "instance-scorer")
    )
    return catalog, ObjectiveConfig(scorer=fresh)


def synth_positive_outfits(model, n_outfits, layers=3, seed=0, bag_range=(3, 5)):
    """Labeled positives: per outfit, all pieces share one planted topic.

    Returns a list of dicts compatible with the labeled-outfit JSON schema.
    """
    rng = np.random.default_rng(derive_seed(seed, "positives"))
    k = model.n_topics
    lo, hi = bag_range
    outfits = []
    for idx in range(n_outfits):
        topic = int(rng.integers(0, k))
        pieces = []
        for layer in range(layers):
            bag = sample_topic_document(model, rng, int(rng.integers(lo, hi + 1)), topic)
            pieces.append(
                {"id": f"o{idx:04d}p{layer}", "layer": layer, "attributes": list(bag)}
            )
        outfits.append(
            {"id": f"o{idx:04d}", "meta": _topic_meta(topic, k), "pieces": pieces}
        )
    return outfits
