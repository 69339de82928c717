"""Exact reference answers for small factor counts.

With the heterogeneity sd held fixed, independent factor priors and a fixed
consistency probability, every one of the 2^p models has a closed-form
Gaussian marginal likelihood; enumerating them gives exact posterior model
probabilities against which the sampler is checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .priors import ConsistencyPrior, SpikeSlabConfig, inclusion_probability, resolve_config
from .sampler import MU_PRIOR_VARIANCE

MAX_EXACT_FACTORS = 10


@dataclass(frozen=True, eq=False)
class OracleResult:
    model_table: dict  # model id -> exact posterior probability
    log_marginals: dict  # model id -> log marginal likelihood
    theta_means: dict  # model id -> posterior mean of (mu, b)
    theta_covs: dict  # model id -> posterior covariance of (mu, b)

    def pip(self, ell: int) -> float:
        return sum(prob for mid, prob in self.model_table.items() if mid >> ell & 1)


def _marginal_covariance(network, tau: float) -> np.ndarray:
    # Sigma + Delta(tau), built directly from the block definitions
    n = network.n_contrasts
    out = np.zeros((n, n))
    at = 0
    for s, block in zip(network.studies, network.sigma.blocks):
        k = s.n_arms - 1
        delta = np.full((k, k), tau * tau / 2.0)
        np.fill_diagonal(delta, tau * tau)
        out[at : at + k, at : at + k] = block + delta
        at += k
    return out


def enumerate_exact(network, X: np.ndarray, Z: np.ndarray, ss_config: SpikeSlabConfig,
                    cprior: ConsistencyPrior, tau_fixed: float = 0.0) -> OracleResult:
    """Exact posterior model probabilities by full enumeration.

    Requires the independent-factor correlation mode, a fixed consistency
    probability and a fixed heterogeneity sd (default 0); p is capped at
    ``MAX_EXACT_FACTORS``.
    """
    p = Z.shape[1]
    if p > MAX_EXACT_FACTORS:
        raise ValueError(f"exact enumeration is limited to {MAX_EXACT_FACTORS} factors (got {p})")
    if ss_config.correlation != "identity":
        raise ValueError("exact enumeration needs the identity correlation mode")
    if cprior.kind != "fixed":
        raise ValueError("exact enumeration needs a fixed consistency probability")
    ss = resolve_config(ss_config, p, network.n_contrasts)
    psi = np.asarray(ss.psi, dtype=float)

    y = network.y_vector()
    n = y.shape[0]
    W = np.hstack([X, Z]) if p else np.asarray(X, dtype=float)
    V = _marginal_covariance(network, tau_fixed)
    k_mu = X.shape[1]

    pi = inclusion_probability(cprior.pi_cons, p) if p else 0.0
    log_pi = math.log(pi) if p else 0.0
    log_1m_pi = math.log1p(-pi) if p else 0.0

    log_marg = {}
    theta_means = {}
    theta_covs = {}
    log_post = {}
    for mid in range(2 ** p if p else 1):
        gamma = np.array([(mid >> ell) & 1 for ell in range(p)])
        b_sd = np.where(gamma == 1, ss.c * psi, psi)
        prior_var = np.concatenate([np.full(k_mu, MU_PRIOR_VARIANCE), b_sd * b_sd])
        C = V + (W * prior_var[None, :]) @ W.T
        try:
            L = np.linalg.cholesky(C)
        except np.linalg.LinAlgError:
            raise ValueError("marginal covariance is not positive definite") from None
        alpha = np.linalg.solve(L, y)
        lm = -0.5 * (n * math.log(2 * math.pi) + alpha @ alpha) - np.log(np.diagonal(L)).sum()
        log_marg[mid] = float(lm)
        k_active = int(gamma.sum())
        log_post[mid] = lm + k_active * log_pi + (p - k_active) * log_1m_pi

        A = W.T @ np.linalg.solve(V, W) + np.diag(1.0 / prior_var)
        cov = np.linalg.inv(A)
        theta_means[mid] = cov @ (W.T @ np.linalg.solve(V, y))
        theta_covs[mid] = cov

    top = max(log_post.values())
    weights = {mid: math.exp(v - top) for mid, v in log_post.items()}
    total = sum(weights.values())
    table = {mid: w / total for mid, w in weights.items()}
    return OracleResult(model_table=table, log_marginals=log_marg,
                        theta_means=theta_means, theta_covs=theta_covs)
