"""Dirichlet-prior topic model fitted by collapsed Gibbs sampling.

The sampler state is classic: per-token topic assignments plus doc-topic and
topic-attribute count tables.  The topic-attribute matrix is averaged over a
few evenly spaced post-burn-in snapshots; smoothing by the Dirichlet
hyperparameter keeps every probability strictly positive, so no document can
receive zero likelihood.
"""

import numpy as np
from scipy.special import gammaln, logsumexp

from ..errors import ValidationError
from .base import StyleModelBase, as_corpus, as_document, derive_seed, doc_token_counts


def _log_dirichlet_pdf(x, alpha):
    return float(
        gammaln(alpha.sum()) - gammaln(alpha).sum() + ((alpha - 1.0) * np.log(x)).sum()
    )


class LatentDirichletGibbs(StyleModelBase):
    """Latent Dirichlet topic model with collapsed Gibbs fitting.

    Parameters
    ----------
    k : topic count.
    alpha : symmetric doc-topic Dirichlet hyperparameter; defaults to 1/k.
    beta : topic-attribute Dirichlet smoothing.
    iterations, burn_in : Gibbs sweeps in total / discarded before averaging.
    sample_count : post-burn-in snapshots averaged into the topic matrix.
    theta_samples, theta_burn_in : fold-in sweeps used for composition
        inference on new documents (posterior mean over the samples).
    likelihood_draws : importance-sampling draws for document likelihood.
    n_attributes : vocabulary size; inferred from the corpus when None.
    seed : base seed; all per-document draws are derived from it.
    """

    variant = "lda"

    def __init__(
        self,
        k=30,
        alpha=None,
        beta=0.01,
        iterations=200,
        burn_in=100,
        sample_count=8,
        theta_samples=200,
        theta_burn_in=50,
        likelihood_draws=64,
        n_attributes=None,
        seed=0,
    ):
        self.k = k
        self.alpha = alpha
        self.beta = beta
        self.iterations = iterations
        self.burn_in = burn_in
        self.sample_count = sample_count
        self.theta_samples = theta_samples
        self.theta_burn_in = theta_burn_in
        self.likelihood_draws = likelihood_draws
        self.n_attributes = n_attributes
        self.seed = seed

    # ------------------------------------------------------------------
    def _alpha_vec(self):
        base = (1.0 / self.k) if self.alpha is None else float(self.alpha)
        if base <= 0:
            raise ValidationError("alpha must be positive")
        return np.full(self.k, base, dtype=np.float64)

    def _check_config(self):
        if self.k < 1:
            raise ValidationError("need at least one topic")
        if not (0 <= self.burn_in < self.iterations):
            raise ValidationError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.sample_count < 1:
            raise ValidationError("sample_count must be >= 1")
        if float(self.beta) <= 0:
            raise ValidationError("beta must be positive")

    def fit(self, X, y=None):
        self._check_config()
        docs = as_corpus(X)
        v = self.n_attributes or int(max(d[-1] for d in docs)) + 1
        doc_tokens = []
        for d in docs:
            if d[-1] >= v:
                raise ValidationError(
                    f"attribute index {int(d[-1])} outside vocabulary of size {v}"
                )
            doc_tokens.append(d)
        k = self.k
        alpha = self._alpha_vec()
        beta = float(self.beta)
        rng = np.random.default_rng(derive_seed(self.seed, "lda-fit"))

        ndk = np.zeros((len(docs), k))
        nkw = np.zeros((k, v))
        nk = np.zeros(k)
        assign = []
        for d, tokens in enumerate(doc_tokens):
            z = rng.integers(0, k, size=tokens.size)
            assign.append(z)
            for t, topic in zip(tokens, z):
                ndk[d, topic] += 1
                nkw[topic, t] += 1
                nk[topic] += 1

        snap_iters = set(
            int(i)
            for i in np.linspace(
                self.burn_in,
                self.iterations - 1,
                min(self.sample_count, self.iterations - self.burn_in),
            ).round()
        )
        phi_acc = np.zeros((k, v))
        n_snaps = 0
        vbeta = v * beta
        for it in range(self.iterations):
            for d, tokens in enumerate(doc_tokens):
                z = assign[d]
                row = ndk[d]
                for pos in range(tokens.size):
                    w = tokens[pos]
                    old = z[pos]
                    row[old] -= 1
                    nkw[old, w] -= 1
                    nk[old] -= 1
                    p = (row + alpha) * (nkw[:, w] + beta) / (nk + vbeta)
                    cum = np.cumsum(p)
                    new = int(np.searchsorted(cum, rng.random() * cum[-1]))
                    z[pos] = new
                    row[new] += 1
                    nkw[new, w] += 1
                    nk[new] += 1
            if it in snap_iters:
                phi_acc += (nkw + beta) / (nk + vbeta)[:, None]
                n_snaps += 1

        self._mark_fitted(phi_acc / n_snaps, alpha=alpha)
        return self

    def _mark_fitted(self, phi, alpha):
        self.phi_ = np.asarray(phi, dtype=np.float64)
        self.alpha_ = np.asarray(alpha, dtype=np.float64)
        self.log_phi_ = np.log(self.phi_)

    # ------------------------------------------------------------------
    def _fold_in(self, tokens, samples, burn_in, rng):
        """Gibbs on one held-out document with the topic matrix fixed.

        Returns the posterior-mean composition and mean topic counts.
        """
        k = self.n_topics
        alpha = self.alpha_
        if k == 1:
            return np.ones(1), np.array([float(tokens.size)])
        z = rng.integers(0, k, size=tokens.size)
        nd = np.zeros(k)
        for topic in z:
            nd[topic] += 1
        theta_acc = np.zeros(k)
        count_acc = np.zeros(k)
        taken = 0
        denom = tokens.size + alpha.sum()
        for it in range(burn_in + samples):
            for pos in range(tokens.size):
                w = tokens[pos]
                old = z[pos]
                nd[old] -= 1
                p = (nd + alpha) * self.phi_[:, w]
                cum = np.cumsum(p)
                new = int(np.searchsorted(cum, rng.random() * cum[-1]))
                z[pos] = new
                nd[new] += 1
            if it >= burn_in:
                theta_acc += (nd + alpha) / denom
                count_acc += nd
                taken += 1
        return theta_acc / taken, count_acc / taken

    def infer_theta(self, document, samples=None, seed=None):
        self._check_fitted()
        tokens = as_document(document)
        doc_token_counts(tokens, self.vocab_size)
        samples = samples or self.theta_samples
        rng = np.random.default_rng(self._doc_seed(tokens, seed, "theta"))
        theta, _ = self._fold_in(tokens, samples, self.theta_burn_in, rng)
        return theta / theta.sum()

    def _importance_loglik(self, tokens, mean_counts, draws, rng):
        if self.n_topics == 1:
            return float(np.mean(self.log_phi_[0, tokens]))
        proposal = self.alpha_ + mean_counts
        thetas = rng.dirichlet(proposal, size=draws)
        thetas = np.clip(thetas, 1e-12, None)
        thetas /= thetas.sum(axis=1, keepdims=True)
        token_probs = thetas @ self.phi_[:, tokens]  # draws x L
        log_joint = np.log(token_probs).sum(axis=1)
        log_w = np.array(
            [
                _log_dirichlet_pdf(t, self.alpha_) - _log_dirichlet_pdf(t, proposal)
                for t in thetas
            ]
        )
        ll = logsumexp(log_joint + log_w) - np.log(draws)
        return float(ll / tokens.size)

    def log_likelihood(self, document, draws=None, seed=None):
        """Per-token log p(document | alpha, beta) by importance sampling.

        The proposal is the Dirichlet posterior implied by mean fold-in
        counts; single-topic models reduce to the exact product likelihood.
        """
        self._check_fitted()
        tokens = as_document(document)
        doc_token_counts(tokens, self.vocab_size)
        draws = draws or self.likelihood_draws
        rng = np.random.default_rng(self._doc_seed(tokens, seed, "loglik"))
        _, mean_counts = self._fold_in(
            tokens, max(20, self.theta_samples // 4), self.theta_burn_in, rng
        )
        return self._importance_loglik(tokens, mean_counts, draws, rng)

    def theta_and_loglik(self, document, draws=None, seed=None):
        """One fold-in run shared by composition and likelihood queries."""
        self._check_fitted()
        tokens = as_document(document)
        doc_token_counts(tokens, self.vocab_size)
        draws = draws or self.likelihood_draws
        rng = np.random.default_rng(self._doc_seed(tokens, seed, "loglik"))
        theta, mean_counts = self._fold_in(
            tokens, self.theta_samples, self.theta_burn_in, rng
        )
        theta = theta / theta.sum()
        return theta, self._importance_loglik(tokens, mean_counts, draws, rng)

    def _prior_to_dict(self):
        return {"alpha": [float(a) for a in self.alpha_]}
