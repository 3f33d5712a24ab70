"""Shared machinery for attribute-bag topic models.

Documents are multisets of attribute indices (any iterable of ints).  Both
model variants expose the same surface: ``fit`` on a corpus, ``infer_theta``
for a document's style composition, ``log_likelihood`` for the per-token
document likelihood, and JSON round-tripping.  Likelihoods are reported per
attribute token so documents of different lengths stay comparable.
"""

import hashlib
import json
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ..errors import ValidationError

#: Reference step threshold for binarising per-token log-likelihood scores.
DEFAULT_STEP_THRESHOLD = -4.69


def derive_seed(*parts):
    """Stable 63-bit seed from arbitrary string-able parts.

    Used to fan a single run seed out to modules and per-document draws
    without relying on Python's randomised ``hash``.
    """
    text = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def as_document(doc):
    """Validate and normalise one document to a sorted int token array."""
    tokens = np.asarray(sorted(int(t) for t in doc), dtype=np.int64)
    if tokens.size == 0:
        raise ValidationError("document is empty")
    if tokens[0] < 0:
        raise ValidationError("negative attribute index in document")
    return tokens

def as_corpus(corpus):
    if len(corpus) == 0:
        raise ValidationError("corpus is empty")
    return [as_document(d) for d in corpus]


def doc_token_counts(tokens, vocab_size):
    """Unique token ids and their counts, validated against the vocab size."""
    if tokens[-1] >= vocab_size:
        raise ValidationError(
            f"attribute index {int(tokens[-1])} outside vocabulary of size {vocab_size}"
        )
    ids, counts = np.unique(tokens, return_counts=True)
    return ids, counts.astype(np.float64)


def check_simplex(vec, what, tol=1e-9):
    vec = np.asarray(vec, dtype=np.float64)
    if np.any(vec < -tol):
        raise ValidationError(f"{what} has negative entries")
    if abs(float(vec.sum()) - 1.0) > tol:
        raise ValidationError(f"{what} does not sum to 1 (got {vec.sum()!r})")
    return vec


class StyleModelBase(BaseEstimator):
    """Common surface of the fitted style models.

    Subclasses set ``phi_`` (K x V row-stochastic topic-attribute matrix)
    plus their prior parameters during ``fit``.
    """

    variant = None  # "lda" | "ctm"

    def _check_fitted(self):
        if getattr(self, "phi_", None) is None:
            raise NotFittedError(
                f"{type(self).__name__} has not been fitted; call fit() first"
            )

    @property
    def n_topics(self):
        self._check_fitted()
        return self.phi_.shape[0]

    @property
    def vocab_size(self):
        self._check_fitted()
        return self.phi_.shape[1]

    def _doc_seed(self, tokens, seed, purpose):
        if seed is not None:
            return int(seed)
        return derive_seed(self.seed, purpose, tokens.tobytes())

    # -- surface implemented by subclasses ---------------------------------
    def fit(self, X, y=None):
        raise NotImplementedError

    def infer_theta(self, document, samples=None, seed=None):
        raise NotImplementedError

    def log_likelihood(self, document, draws=None, seed=None):
        raise NotImplementedError

    # -- shared conveniences ------------------------------------------------
    def transform(self, X):
        """Style compositions, one row per document."""
        self._check_fitted()
        return np.vstack([self.infer_theta(doc) for doc in X])

    def score_samples(self, X):
        """Per-token log-likelihood of each document."""
        self._check_fitted()
        return np.array([self.log_likelihood(doc) for doc in X])

    def compat_score(self, document, threshold=DEFAULT_STEP_THRESHOLD, seed=None):
        """Step-thresholded compatibility: 1 iff log-likelihood >= threshold."""
        return 1.0 if self.log_likelihood(document, seed=seed) >= threshold else 0.0

    # -- serialisation ------------------------------------------------------
    def _prior_to_dict(self):
        raise NotImplementedError

    def to_dict(self, vocab=None):
        self._check_fitted()
        if vocab is None:
            vocab = getattr(self, "vocab_", None)
        if vocab is None:
            vocab = [f"a{i}" for i in range(self.vocab_size)]
        out = {
            "variant": self.variant,
            "K": int(self.n_topics),
            "V": int(self.vocab_size),
            "phi": [float(x) for x in self.phi_.ravel()],
            "beta": float(self.beta),
            "vocab": list(vocab),
        }
        out.update(self._prior_to_dict())
        return out

    def save(self, path, vocab=None):
        Path(path).write_text(
            json.dumps(self.to_dict(vocab), sort_keys=True, indent=2) + "\n"
        )


def model_from_dict(raw):
    """Rebuild a fitted model from its JSON dict (see ``to_dict``)."""
    from .ctm import CorrelatedTopicModel
    from .lda import LatentDirichletGibbs

    variant = raw.get("variant")
    k, v = int(raw["K"]), int(raw["V"])
    phi = np.asarray(raw["phi"], dtype=np.float64).reshape(k, v)
    if variant == "lda":
        model = LatentDirichletGibbs(k=k, beta=raw["beta"])
        model._mark_fitted(phi, alpha=np.asarray(raw["alpha"], dtype=np.float64))
    elif variant == "ctm":
        model = CorrelatedTopicModel(k=k, beta=raw["beta"])
        model._mark_fitted(
            phi,
            mu=np.asarray(raw["mu"], dtype=np.float64),
            sigma=np.asarray(raw["sigma"], dtype=np.float64).reshape(k, k),
        )
    else:
        raise ValidationError(f"unknown model variant: {variant!r}")
    model.vocab_ = tuple(raw.get("vocab", ()))
    return model


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))


def user_preference(model, user_outfits):
    """Aggregate a user's outfits into per-style preference weights.

    The weight vector is the arithmetic mean of the outfits' style
    compositions; it is non-negative and sums to one.
    """
    if len(user_outfits) == 0:
        raise ValidationError("need at least one user outfit")
    thetas = np.vstack([model.infer_theta(doc) for doc in user_outfits])
    w = thetas.mean(axis=0)
    return w / w.sum()
