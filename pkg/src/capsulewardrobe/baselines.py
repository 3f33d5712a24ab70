"""Comparison selectors: MMR and k-medoids cluster centers.

Both operate on per-garment feature vectors.  Catalog features are
L2-normalised attribute count vectors (a stand-in for learned embeddings,
which are out of scope here); distances default to Euclidean on the
normalised vectors.
"""

import warnings

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator

from .catalog import Capsule
from .errors import ValidationError
from .style.base import derive_seed


class FeatureTable:
    """Per-garment vectors of one fixed dimension plus a distance metric."""

    METRICS = ("euclidean", "sqeuclidean", "cosine")

    def __init__(self, ids, matrix, metric="euclidean"):
        if metric not in self.METRICS:
            raise ValidationError(f"unknown metric {metric!r}; use one of {self.METRICS}")
        self.ids = tuple(str(i) for i in ids)
        self.matrix = np.asarray(matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.ids):
            raise ValidationError("feature matrix must be (n_garments, dim)")
        self.metric = metric
        self._row = {gid: i for i, gid in enumerate(self.ids)}

    @classmethod
    def from_catalog(cls, catalog, metric="euclidean", normalize=True):
        """Attribute-count vectors per garment, L2-normalised by default."""
        ids, rows = [], []
        v = len(catalog.vocab)
        for g in catalog.all_garments():
            vec = np.bincount(np.asarray(g.attributes), minlength=v).astype(np.float64)
            ids.append(g.id)
            rows.append(vec)
        matrix = np.vstack(rows)
        if normalize:
            norms = np.linalg.norm(matrix, axis=1, keepdims=True)
            matrix = matrix / np.maximum(norms, 1e-12)
        return cls(ids, matrix, metric=metric)

    @property
    def dim(self):
        return self.matrix.shape[1]

    def vector(self, gid):
        try:
            return self.matrix[self._row[gid]]
        except KeyError:
            raise ValidationError(f"no features for garment {gid!r}") from None

    def vectors(self, gids):
        return np.vstack([self.vector(g) for g in gids])

    def pairwise(self, a, b=None):
        b = a if b is None else b
        return cdist(a, b, metric=self.metric)


def document_vector(document, dim, normalize=True):
    """Count vector of an attribute multiset, optionally L2-normalised."""
    vec = np.bincount(np.asarray(list(document)), minlength=dim).astype(np.float64)
    if normalize:
        vec = vec / max(np.linalg.norm(vec), 1e-12)
    return vec


def _relevance_per_layer(garments, model, seed_tag="mmr-rel"):
    """Per-token bag likelihood, affinely rescaled to [0, 1] within the layer."""
    raw = np.array(
        [
            model.log_likelihood(g.attributes, seed=derive_seed(seed_tag, g.id))
            for g in garments
        ]
    )
    lo, hi = raw.min(), raw.max()
    if hi - lo < 1e-12:
        return np.full(len(garments), 0.5), raw
    return (raw - lo) / (hi - lo), raw


def mmr_select(catalog, features, model, lam, t):
    """Per layer, iteratively add the garment maximising
    ``lam * relevance + (1 - lam) * diversity``.

    Relevance is the garment's own-bag model likelihood rescaled to [0, 1]
    per layer; diversity is the minimum feature distance to the garments
    already selected in that layer.  Before anything is selected, diversity
    falls back to the distance to the farthest same-layer garment, so the
    lam=0 extreme starts from the most peripheral piece.  Nothing here
    depends on any seed outfit: for a fixed lam the capsule is always the
    same, which is this baseline's documented failure mode.
    """
    if not (0.0 <= lam <= 1.0):
        raise ValidationError("lambda must lie in [0, 1]")
    t_vec = _baseline_t(t, catalog)
    selections = []
    for layer, garments in enumerate(catalog.layers):
        need = t_vec[layer]
        if need == 0:
            selections.append(())
            continue
        if not garments:
            raise ValidationError(f"layer {layer} has no candidates")
        order = sorted(garments, key=lambda g: g.id)
        rel, _ = _relevance_per_layer(order, model)
        vecs = features.vectors([g.id for g in order])
        dist = features.pairwise(vecs)
        far = dist.max(axis=1)
        chosen = []
        remaining = list(range(len(order)))
        while len(chosen) < need:
            div = far if not chosen else dist[:, chosen].min(axis=1)
            best, best_score = None, None
            for idx in remaining:
                score = lam * rel[idx] + (1.0 - lam) * div[idx]
                if best_score is None or score > best_score:
                    best, best_score = idx, score
            chosen.append(best)
            remaining.remove(best)
        selections.append(tuple(order[i].id for i in chosen))
    return Capsule(tuple(selections))


def _baseline_t(t, catalog):
    counts = catalog.counts
    if np.isscalar(t):
        t_vec = [0 if n == 0 else int(t) for n in counts]
    else:
        t_vec = [int(x) for x in t]
        if len(t_vec) != catalog.n_layers:
            raise ValidationError(f"t has {len(t_vec)} entries for {catalog.n_layers} layers")
    for i, (ti, ni) in enumerate(zip(t_vec, counts)):
        if ti < 0 or ti > ni:
            raise ValidationError(f"layer {i}: cannot select {ti} of {ni}")
    return t_vec


def pam_kmedoids(dist, k, seed=0):
    """Classic PAM: greedy BUILD then best-improvement SWAP passes.

    Deterministic for a given distance matrix (ties resolve to the lowest
    index); the seed parameter is accepted for interface stability.  Returns
    (medoid indices, total distance history), the latter non-increasing.
    """
    n = dist.shape[0]
    if not (1 <= k <= n):
        raise ValidationError(f"k={k} outside 1..{n}")
    # BUILD
    medoids = [int(np.argmin(dist.sum(axis=1)))]
    while len(medoids) < k:
        current = dist[:, medoids].min(axis=1)
        gains = np.maximum(current[None, :] - dist, 0.0).sum(axis=1)
        gains[medoids] = -np.inf
        medoids.append(int(np.argmax(gains)))
    medoids = sorted(medoids)

    def cost(meds):
        return float(dist[:, meds].min(axis=1).sum())

    history = [cost(medoids)]
    improved = True
    while improved:
        improved = False
        best_cost = history[-1]
        best_swap = None
        in_set = set(medoids)
        for out_pos, out in enumerate(medoids):
            for cand in range(n):
                if cand in in_set:
                    continue
                trial = medoids[:out_pos] + [cand] + medoids[out_pos + 1 :]
                c = cost(trial)
                if c < best_cost - 1e-12:
                    best_cost, best_swap = c, (out_pos, cand)
        if best_swap is not None:
            out_pos, cand = best_swap
            medoids = sorted(medoids[:out_pos] + [cand] + medoids[out_pos + 1 :])
            history.append(best_cost)
            improved = True
    return medoids, history


def cluster_centers(catalog, features, t, seed=0):
    """k-medoids per layer with k = that layer's selection count."""
    t_vec = _baseline_t(t, catalog)
    selections = []
    for layer, garments in enumerate(catalog.layers):
        need = t_vec[layer]
        if need == 0:
            selections.append(())
            continue
        order = sorted(garments, key=lambda g: g.id)
        vecs = features.vectors([g.id for g in order])
        distinct = np.unique(vecs, axis=0).shape[0]
        if distinct < need:
            warnings.warn(
                f"layer {layer}: only {distinct} distinct feature vectors for "
                f"{need} medoids; duplicates resolved by id order"
            )
        dist = features.pairwise(vecs)
        medoids, _ = pam_kmedoids(dist, need, seed=seed)
        selections.append(tuple(order[i].id for i in medoids))
    return Capsule(tuple(selections))


class MmrSelector(BaseEstimator):
    """Estimator wrapper around :func:`mmr_select`."""

    def __init__(self, model=None, features=None, lam=0.5, t=4):
        self.model = model
        self.features = features
        self.lam = lam
        self.t = t

    def fit(self, X, y=None):
        features = self.features or FeatureTable.from_catalog(X)
        self.capsule_ = mmr_select(X, features, self.model, self.lam, self.t)
        return self


class KMedoidsSelector(BaseEstimator):
    """Estimator wrapper around :func:`cluster_centers`."""

    def __init__(self, features=None, t=4, seed=0):
        self.features = features
        self.t = t
        self.seed = seed

    def fit(self, X, y=None):
        features = self.features or FeatureTable.from_catalog(X)
        self.capsule_ = cluster_centers(X, features, self.t, seed=self.seed)
        return self
