"""Logistic-normal topic model fitted by variational EM.

Per document the posterior over the softmax-transformed Gaussian is
approximated by a diagonal Gaussian (mean ``gamma``, variances ``nu2``) plus
per-token topic responsibilities; the intractable normaliser is handled with
the standard scalar bound (``zeta``).  Every coordinate update is an exact or
line-searched ascent step, and the M-step maximises the same penalised
objective, so the tracked training objective is non-decreasing across sweeps.

The penalised objective adds the topic-matrix pseudo-count prior
(``beta * sum(log phi)``) and a trace penalty on the prior covariance whose
exact maximiser is the empirical covariance plus ``ridge`` on the diagonal;
both keep the model strictly positive / positive-definite without breaking
monotonicity.
"""

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp

from ..errors import ValidationError
from .base import StyleModelBase, as_corpus, as_document, derive_seed, doc_token_counts

_EXP_CAP = 700.0


def _softmax_rows(x):
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class _FlatCorpus:
    """Ragged (doc, attribute, count) triplets flattened for vector ops."""

    def __init__(self, parsed):
        ids, cnts, doc_idx, lengths = [], [], [], []
        for d, (i, c) in enumerate(parsed):
            ids.append(i)
            cnts.append(c)
            doc_idx.append(np.full(i.size, d, dtype=np.int64))
            lengths.append(c.sum())
        self.ids = np.concatenate(ids)
        self.cnts = np.concatenate(cnts)
        self.doc_idx = np.concatenate(doc_idx)
        self.lengths = np.asarray(lengths, dtype=np.float64)


class CorrelatedTopicModel(StyleModelBase):
    """Topic model whose style proportions follow a logistic-normal prior.

    Parameters
    ----------
    k : topic count.
    beta : pseudo-count smoothing for the topic-attribute matrix.
    iterations : EM sweeps.
    em_tol : relative improvement of the training objective below which
        fitting stops early.
    var_steps, newton_steps : inner per-document coordinate-ascent and
        Newton iteration caps.
    ridge : diagonal loading of the prior covariance M-step.
    likelihood_draws : importance-sampling draws for document likelihood.
    n_attributes : vocabulary size; inferred from the corpus when None.
    seed : base seed (topic-matrix initialisation and likelihood draws).
    """

    variant = "ctm"

    def __init__(
        self,
        k=30,
        beta=0.01,
        iterations=60,
        em_tol=1e-5,
        var_steps=12,
        newton_steps=12,
        ridge=1e-4,
        likelihood_draws=64,
        n_attributes=None,
        seed=0,
    ):
        self.k = k
        self.beta = beta
        self.iterations = iterations
        self.em_tol = em_tol
        self.var_steps = var_steps
        self.newton_steps = newton_steps
        self.ridge = ridge
        self.likelihood_draws = likelihood_draws
        self.n_attributes = n_attributes
        self.seed = seed

    # ------------------------------------------------------------------
    def _check_config(self):
        if self.k < 1:
            raise ValidationError("need at least one topic")
        if float(self.beta) <= 0:
            raise ValidationError("beta must be positive")
        if self.iterations < 1:
            raise ValidationError("need at least one EM sweep")

    def _mark_fitted(self, phi, mu, sigma):
        self.phi_ = np.asarray(phi, dtype=np.float64)
        self.mu_ = np.asarray(mu, dtype=np.float64)
        self.sigma_ = np.asarray(sigma, dtype=np.float64)
        self.log_phi_ = np.log(self.phi_)
        chol = cho_factor(self.sigma_, lower=True)
        self._chol = chol
        self.sigma_inv_ = cho_solve(chol, np.eye(self.sigma_.shape[0]))
        self._logdet = 2.0 * float(np.log(np.diag(chol[0])).sum())

    # -- batched variational ascent (rows are independent documents) ------
    def _batch_gamma_value(self, gammas, nu2s, zetas, s, lengths, mu, sigma_inv):
        diff = gammas - mu
        quad = np.einsum("dk,kl,dl->d", diff, sigma_inv, diff)
        expo = np.exp(np.clip(gammas + 0.5 * nu2s, -_EXP_CAP, _EXP_CAP)).sum(axis=1)
        return -0.5 * quad + (s * gammas).sum(axis=1) - (lengths / zetas) * expo

    def _batch_newton_gamma(self, gammas, nu2s, zetas, s, lengths, mu, sigma_inv):
        m, k = gammas.shape
        f0 = self._batch_gamma_value(gammas, nu2s, zetas, s, lengths, mu, sigma_inv)
        eye = np.arange(k)
        for _ in range(self.newton_steps):
            w = np.exp(np.clip(gammas + 0.5 * nu2s, -_EXP_CAP, _EXP_CAP))
            scale = (lengths / zetas)[:, None]
            grad = -(gammas - mu) @ sigma_inv + s - scale * w
            act = np.abs(grad).max(axis=1) > 1e-8
            if not act.any():
                break
            n_act = int(act.sum())
            hess = np.broadcast_to(sigma_inv, (n_act, k, k)).copy()
            hess[:, eye, eye] += scale[act] * w[act]
            direction = np.linalg.solve(hess, grad[act][:, :, None])[:, :, 0]
            cand = gammas[act] + direction
            f1 = self._batch_gamma_value(cand, nu2s[act], zetas[act], s[act], lengths[act], mu, sigma_inv)
            step = np.ones(n_act)
            base = gammas[act]
            f0a = f0[act]
            for _ in range(30):
                pending = np.flatnonzero(f1 < f0a)
                if pending.size == 0:
                    break
                step[pending] *= 0.5
                cand[pending] = base[pending] + step[pending, None] * direction[pending]
                f1[pending] = self._batch_gamma_value(
                    cand[pending], nu2s[act][pending], zetas[act][pending],
                    s[act][pending], lengths[act][pending], mu, sigma_inv,
                )
            accept = f1 >= f0a
            if not accept.any():
                break
            moved = np.flatnonzero(act)[accept]
            gammas[moved] = cand[accept]
            f0[moved] = f1[accept]
        return gammas

    def _batch_newton_nu2(self, nu2s, gammas, zetas, lengths, diag_inv):
        # coordinates are independent, so the line search is entrywise
        scale = (lengths / zetas)[:, None]

        def value(x):
            e = np.exp(x)
            w = np.exp(np.clip(gammas + 0.5 * e, -_EXP_CAP, _EXP_CAP))
            return -0.5 * diag_inv * e - scale * w + 0.5 * x

        x = np.log(nu2s)
        f0 = value(x)
        for _ in range(self.newton_steps):
            e = np.exp(x)
            w = np.exp(np.clip(gammas + 0.5 * e, -_EXP_CAP, _EXP_CAP))
            grad = -0.5 * diag_inv * e - 0.5 * scale * e * w + 0.5
            act = np.abs(grad) > 1e-8
            if not act.any():
                break
            hess = -0.5 * diag_inv * e - 0.5 * scale * (e + 0.5 * e * e) * w
            # entries at their optimum stay put, so results do not depend
            # on which documents happen to share the batch
            direction = np.where(act, -grad / hess, 0.0)
            step = np.ones_like(x)
            cand = x + direction
            f1 = value(cand)
            for _ in range(30):
                need = (f1 < f0) & (step > 1e-10)
                if not need.any():
                    break
                step = np.where(need, 0.5 * step, step)
                cand = np.where(need, x + step * direction, cand)
                f1 = np.where(need, value(cand), f1)
            accept = f1 >= f0
            if not accept.any():
                break
            x = np.where(accept, cand, x)
            f0 = np.where(accept, f1, f0)
        return np.exp(np.clip(x, -60.0, 60.0))

    def _batch_zeta(self, gammas, nu2s):
        return np.exp(np.clip(gammas + 0.5 * nu2s, -_EXP_CAP, _EXP_CAP)).sum(axis=1)

    def _batch_responsibilities(self, gammas, log_phi, flat):
        a = gammas[flat.doc_idx] + log_phi[:, flat.ids].T  # NT x K
        lam = _softmax_rows(a)
        return lam * flat.cnts[:, None]

    def _batch_ascent(self, gammas, nu2s, mu, sigma_inv, log_phi, flat):
        """Coordinate ascent on all rows; each row freezes once its own move
        falls below tolerance, so a document's trajectory does not depend on
        which other documents share the batch."""
        m, k = gammas.shape
        diag_inv = np.diag(sigma_inv)
        frozen = np.zeros(m, dtype=bool)
        for _ in range(self.var_steps):
            prev_g = gammas.copy()
            prev_n = nu2s.copy()
            zetas = self._batch_zeta(gammas, nu2s)
            weighted = self._batch_responsibilities(gammas, log_phi, flat)
            s = np.column_stack(
                [
                    np.bincount(flat.doc_idx, weights=weighted[:, t], minlength=m)
                    for t in range(k)
                ]
            )
            gammas = self._batch_newton_gamma(
                gammas, nu2s, zetas, s, flat.lengths, mu, sigma_inv
            )
            zetas = self._batch_zeta(gammas, nu2s)
            nu2s = self._batch_newton_nu2(nu2s, gammas, zetas, flat.lengths, diag_inv)
            if frozen.any():
                gammas[frozen] = prev_g[frozen]
                nu2s[frozen] = prev_n[frozen]
            frozen |= np.abs(gammas - prev_g).max(axis=1) < 1e-6
            if frozen.all():
                break
        return gammas, nu2s

    def _batch_elbo(self, gammas, nu2s, mu, sigma_inv, logdet, log_phi, flat):
        m, k = gammas.shape
        diff = gammas - mu
        quad = np.einsum("dk,kl,dl->d", diff, sigma_inv, diff)
        zetas = self._batch_zeta(gammas, nu2s)
        gauss = -0.5 * (logdet + (np.diag(sigma_inv) * nu2s).sum(axis=1) + quad)
        lse = logsumexp(gammas[flat.doc_idx] + log_phi[:, flat.ids].T, axis=1)
        token_term = np.bincount(flat.doc_idx, weights=flat.cnts * lse, minlength=m)
        token_term -= flat.lengths * np.log(zetas)
        entropy = 0.5 * np.log(nu2s).sum(axis=1) + 0.5 * k
        return float((gauss + token_term + entropy).sum())

    # ------------------------------------------------------------------
    def fit(self, X, y=None):
        self._check_config()
        docs = as_corpus(X)
        v = self.n_attributes or int(max(d[-1] for d in docs)) + 1
        k = self.k
        beta = float(self.beta)
        parsed = []
        for d in docs:
            ids, cnts = doc_token_counts(d, v)
            parsed.append((ids, cnts))
        m = len(parsed)
        flat = _FlatCorpus(parsed)
        rng = np.random.default_rng(derive_seed(self.seed, "ctm-fit"))

        # seed each topic from a handful of random documents
        perm = rng.permutation(m)
        phi = np.full((k, v), beta)
        for topic in range(k):
            for d in perm[topic::k][:8]:
                ids, cnts = parsed[d]
                phi[topic, ids] += cnts
        phi += 0.05 * rng.random((k, v))
        phi /= phi.sum(axis=1, keepdims=True)

        mu = np.zeros(k)
        sigma = np.eye(k)
        gammas = np.zeros((m, k))
        nu2s = np.ones((m, k))

        history = []
        for _ in range(self.iterations):
            log_phi = np.log(phi)
            chol = cho_factor(sigma, lower=True)
            sigma_inv = cho_solve(chol, np.eye(k))

            gammas, nu2s = self._batch_ascent(gammas, nu2s, mu, sigma_inv, log_phi, flat)
            weighted = self._batch_responsibilities(gammas, log_phi, flat)
            ss = np.vstack(
                [
                    np.bincount(flat.ids, weights=weighted[:, t], minlength=v)
                    for t in range(k)
                ]
            )

            phi = ss + beta
            phi /= phi.sum(axis=1, keepdims=True)
            mu = gammas.mean(axis=0)
            centred = gammas - mu
            sigma = (
                np.diag(nu2s.mean(axis=0))
                + centred.T @ centred / m
                + self.ridge * np.eye(k)
            )

            log_phi = np.log(phi)
            chol = cho_factor(sigma, lower=True)
            sigma_inv = cho_solve(chol, np.eye(k))
            logdet = 2.0 * float(np.log(np.diag(chol[0])).sum())
            bound = self._batch_elbo(gammas, nu2s, mu, sigma_inv, logdet, log_phi, flat)
            bound += beta * float(log_phi.sum()) - 0.5 * m * self.ridge * float(
                np.trace(sigma_inv)
            )
            history.append(float(bound))
            if len(history) > 1:
                prev, cur = history[-2], history[-1]
                if abs(cur - prev) < self.em_tol * (abs(prev) + 1.0):
                    break

        self.training_objective_ = tuple(history)
        self._mark_fitted(phi, mu, sigma)
        return self

    # ------------------------------------------------------------------
    def _variational_fit_many(self, token_lists):
        """Variational (gamma, nu2) rows for a batch of documents."""
        parsed = [doc_token_counts(t, self.vocab_size) for t in token_lists]
        flat = _FlatCorpus(parsed)
        m, k = len(parsed), self.n_topics
        gammas = np.tile(self.mu_, (m, 1))
        nu2s = np.tile(np.diag(self.sigma_), (m, 1))
        return self._batch_ascent(gammas, nu2s, self.mu_, self.sigma_inv_, self.log_phi_, flat)

    def _variational_fit(self, tokens):
        gammas, nu2s = self._variational_fit_many([tokens])
        return gammas[0], nu2s[0]

    def infer_theta(self, document, samples=None, seed=None):
        """Style composition at the variational optimum (deterministic)."""
        self._check_fitted()
        tokens = as_document(document)
        gamma, _ = self._variational_fit(tokens)
        return _softmax_rows(gamma)

    def _importance_loglik(self, tokens, gamma, nu2, draws, rng):
        length = tokens.size
        if self.n_topics == 1:
            return float(np.mean(self.log_phi_[0, tokens]))
        nu = np.sqrt(nu2)
        etas = gamma + nu * rng.standard_normal((draws, len(gamma)))
        diff = etas - self.mu_
        solved = cho_solve(self._chol, diff.T).T
        log_prior = -0.5 * (
            (diff * solved).sum(axis=1)
            + self._logdet
            + len(gamma) * np.log(2.0 * np.pi)
        )
        resid = (etas - gamma) / nu
        log_q = -0.5 * (
            (resid * resid).sum(axis=1)
            + np.log(nu2).sum()
            + len(gamma) * np.log(2.0 * np.pi)
        )
        thetas = _softmax_rows(etas)
        token_probs = thetas @ self.phi_[:, tokens]
        log_lik = np.log(token_probs).sum(axis=1)
        ll = logsumexp(log_prior + log_lik - log_q) - np.log(draws)
        return float(ll / length)

    def log_likelihood(self, document, draws=None, seed=None):
        """Per-token log p(document | mu, sigma, beta), importance-sampled
        from the document's variational posterior."""
        self._check_fitted()
        tokens = as_document(document)
        draws = draws or self.likelihood_draws
        rng = np.random.default_rng(self._doc_seed(tokens, seed, "loglik"))
        gamma, nu2 = self._variational_fit(tokens)
        return self._importance_loglik(tokens, gamma, nu2, draws, rng)

    def theta_and_loglik(self, document, draws=None, seed=None):
        """One variational fit shared by composition and likelihood queries."""
        self._check_fitted()
        tokens = as_document(document)
        draws = draws or self.likelihood_draws
        rng = np.random.default_rng(self._doc_seed(tokens, seed, "loglik"))
        gamma, nu2 = self._variational_fit(tokens)
        theta = _softmax_rows(gamma)
        return theta, self._importance_loglik(tokens, gamma, nu2, draws, rng)

    def theta_and_loglik_many(self, documents, draws=None, seeds=None):
        """Batched compositions and likelihoods; one ascent for the whole batch.

        Likelihood draws stay per-document (seeded individually) so values do
        not depend on how documents are grouped into batches.
        """
        self._check_fitted()
        token_lists = [as_document(d) for d in documents]
        draws = draws or self.likelihood_draws
        gammas, nu2s = self._variational_fit_many(token_lists)
        thetas = _softmax_rows(gammas)
        out = []
        for i, tokens in enumerate(token_lists):
            seed = None if seeds is None else seeds[i]
            rng = np.random.default_rng(self._doc_seed(tokens, seed, "loglik"))
            ll = self._importance_loglik(tokens, gammas[i], nu2s[i], draws, rng)
            out.append((thetas[i], ll))
        return out

    def _prior_to_dict(self):
        return {
            "mu": [float(x) for x in self.mu_],
            "sigma": [float(x) for x in self.sigma_.ravel()],
        }
