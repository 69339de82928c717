"""Gibbs-style sampler for the inconsistency-factor selection model.

The study random effects are integrated out exactly, so each sweep works
with the marginal model y ~ N(X mu + Z b, Sigma + tau^2 K), where K carries
the common-heterogeneity structure (tau^2 on the diagonal, tau^2/2 within
multi-arm blocks). A per-study generalized eigendecomposition whitens Sigma
once, after which every sweep reduces to small dense operations:

* (mu, b) - joint multivariate-normal conjugate draw;
* gamma   - componentwise Bernoulli draws from the spike/slab odds;
* tau     - random-walk Metropolis on log tau, step tuned during burn-in;
* sigma2  - inverse-gamma conjugate draw (g-prior mode);
* pi_cons - logit-scale random-walk Metropolis (Beta-prior mode).

Chains are reproducible bit-for-bit given the master seed and configuration.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import expit

from .priors import ConsistencyPrior, SpikeSlabConfig, calibrated_sigma2, resolve_config

MU_PRIOR_VARIANCE = 1e4
PILOT_B_PRIOR_VARIANCE = 1e4

_ADAPT_WINDOW = 100
_ADAPT_TARGET = 0.44


class NumericalError(RuntimeError):
    """Covariance factorization failure or non-finite state during sampling."""


@dataclass(frozen=True)
class HeterogeneityPrior:
    """Prior on the common heterogeneity sd tau."""

    kind: str  # "half-normal", "uniform" or "fixed"
    scale: float = 1.0
    upper: float = 5.0
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("half-normal", "uniform", "fixed"):
            raise ValueError(f"unknown heterogeneity prior {self.kind!r}")
        if self.kind == "half-normal" and not self.scale > 0:
            raise ValueError("half-normal scale must be positive")
        if self.kind == "uniform" and not self.upper > 0:
            raise ValueError("uniform upper bound must be positive")
        if self.kind == "fixed" and self.value < 0:
            raise ValueError("fixed tau must be nonnegative")

    @classmethod
    def half_normal(cls, scale: float = 1.0) -> "HeterogeneityPrior":
        return cls(kind="half-normal", scale=scale)

    @classmethod
    def uniform(cls, upper: float = 5.0) -> "HeterogeneityPrior":
        return cls(kind="uniform", upper=upper)

    @classmethod
    def fixed(cls, value: float) -> "HeterogeneityPrior":
        return cls(kind="fixed", value=value)

    def log_density(self, tau: float) -> float:
        if tau < 0:
            return -math.inf
        if self.kind == "half-normal":
            return -0.5 * (tau / self.scale) ** 2
        if self.kind == "uniform":
            return 0.0 if tau <= self.upper else -math.inf
        raise ValueError("fixed tau has no density to evaluate")


@dataclass(frozen=True)
class McmcConfig:
    chains: int = 2
    iterations: int = 300_000
    burn_in: int = 50_000
    seed: int = 1
    thinning: int = 1

    def __post_init__(self):
        if self.chains < 1:
            raise ValueError("need at least one chain")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn-in must be shorter than the run")
        if self.thinning < 1 or (self.iterations - self.burn_in) % self.thinning:
            raise ValueError("thinning must divide the post-burn-in draw count")

    @property
    def n_kept(self) -> int:
        return (self.iterations - self.burn_in) // self.thinning


@dataclass
class ModelState:
    """Current sampler position (study random effects stay marginalized)."""

    theta: np.ndarray  # concatenated (mu, b)
    gamma: np.ndarray
    tau: float
    sigma2: float
    pi_cons: float
    k_mu: int

    @property
    def mu(self) -> np.ndarray:
        return self.theta[: self.k_mu]

    @property
    def b(self) -> np.ndarray:
        return self.theta[self.k_mu :]


@dataclass
class ChainOutput:
    chain_index: int
    master_seed: int
    gamma: np.ndarray  # (n_kept, p) uint8
    b: np.ndarray  # (n_kept, p)
    tau: np.ndarray  # (n_kept,)
    sigma2: np.ndarray | None
    pi_cons: np.ndarray | None
    mu_half_n: np.ndarray  # (2,)
    mu_half_sum: np.ndarray  # (2, T-1)
    mu_half_sumsq: np.ndarray  # (2, T-1)
    iterations: int
    burn_in: int
    thinning: int
    accept: dict

    @property
    def n_draws(self) -> int:
        return self.tau.shape[0]

    @property
    def mu_mean(self) -> np.ndarray:
        return self.mu_half_sum.sum(axis=0) / self.mu_half_n.sum()

    @property
    def mu_sd(self) -> np.ndarray:
        n = self.mu_half_n.sum()
        mean = self.mu_mean
        var = self.mu_half_sumsq.sum(axis=0) / n - mean * mean
        return np.sqrt(np.maximum(var, 0.0) * n / (n - 1))


def heterogeneity_structure_blocks(network) -> list[np.ndarray]:
    """Per-study K blocks: Delta(tau) = tau^2 * K, K = (I + ones)/2."""
    out = []
    for s in network.studies:
        k = s.n_arms - 1
        out.append((np.eye(k) + np.ones((k, k))) / 2.0)
    return out


class Workspace:
    """Per-run precomputation: whitened design, eigenvalues, prior pieces."""

    def __init__(self, network, X: np.ndarray, Z: np.ndarray | None,
                 ss: SpikeSlabConfig | None, cprior: ConsistencyPrior | None,
                 tau_prior: HeterogeneityPrior, pilot: bool = False):
        self.network = network
        self.X = np.asarray(X, dtype=float)
        self.Z = np.asarray(Z, dtype=float) if Z is not None else np.zeros((self.X.shape[0], 0))
        self.k_mu = self.X.shape[1]
        self.p = self.Z.shape[1]
        self.q = self.k_mu + self.p
        self.n = self.X.shape[0]
        self.ss = ss
        self.cprior = cprior
        self.tau_prior = tau_prior
        self.pilot = pilot

        W = np.hstack([self.X, self.Z]) if self.p else self.X
        y = network.y_vector()
        lam = np.empty(self.n)
        Wtil = np.empty_like(W)
        ytil = np.empty(self.n)
        at = 0
        for s, sigma_block, k_block in zip(network.studies, network.sigma.blocks,
                                           heterogeneity_structure_blocks(network)):
            k = s.n_arms - 1
            sl = slice(at, at + k)
            if k == 1:
                lam[sl] = k_block[0, 0] / sigma_block[0, 0]
                phi = np.array([[1.0 / math.sqrt(sigma_block[0, 0])]])
            else:
                vals, phi = scipy.linalg.eigh(k_block, sigma_block)
                lam[sl] = vals
            Wtil[sl] = phi.T @ W[sl]
            ytil[sl] = phi.T @ y[sl]
            at += k
        self.lam = lam
        self.Wtil = Wtil
        self.ytil = ytil

        if pilot:
            self.prior_prec_const = np.concatenate([
                np.full(self.k_mu, 1.0 / MU_PRIOR_VARIANCE),
                np.full(self.p, 1.0 / PILOT_B_PRIOR_VARIANCE)])
        else:
            self.prior_prec_const = np.full(self.q, 0.0)
            self.prior_prec_const[: self.k_mu] = 1.0 / MU_PRIOR_VARIANCE
            psi = np.asarray(ss.psi, dtype=float)
            self.psi = psi
            self.c = ss.c
            self.log_c = math.log(ss.c)
            self.spike_prec = 1.0 / (psi * psi)
            self.slab_prec = self.spike_prec / (ss.c * ss.c)
            self.half_prec_diff = 0.5 * (self.spike_prec - self.slab_prec)
            if ss.correlation == "zellner":
                self.ZtZ = self.Z.T @ self.Z
                self.g = ss.g
                if ss.sigma2_prior == "calibrated":
                    self.sigma2_fixed = calibrated_sigma2(ss, self.Z)
                elif ss.sigma2_prior == "fixed":
                    self.sigma2_fixed = ss.sigma2_value
                else:
                    self.sigma2_fixed = None

        # fixed-tau runs can reuse the data part of the conditional
        if tau_prior.kind == "fixed":
            self._d_fixed = 1.0 / (1.0 + tau_prior.value ** 2 * lam)
            Wd = Wtil * self._d_fixed[:, None]
            self._A_data_fixed = Wtil.T @ Wd
            self._rhs_fixed = Wd.T @ ytil
        else:
            self._d_fixed = None

    def whitened_moments(self, tau: float) -> tuple[np.ndarray, np.ndarray]:
        """Data part of the (mu, b) conditional: W'V^-1 W and W'V^-1 y."""
        if self._d_fixed is not None and tau == self.tau_prior.value:
            return self._A_data_fixed.copy(), self._rhs_fixed
        d = 1.0 / (1.0 + tau * tau * self.lam)
        Wd = self.Wtil * d[:, None]
        return self.Wtil.T @ Wd, Wd.T @ self.ytil

    def prior_precision_b(self, gamma: np.ndarray, sigma2: float) -> np.ndarray:
        """Diagonal (identity mode) or full matrix (g-prior mode)."""
        if self.pilot:
            raise RuntimeError("pilot workspaces have a constant prior")
        if self.ss.correlation == "identity":
            return np.where(gamma == 1, self.slab_prec, self.spike_prec)
        inv_d = 1.0 / np.where(gamma == 1, self.c * self.psi, self.psi)
        return self.ZtZ * np.outer(inv_d, inv_d) / (self.g * sigma2)

    def log_marginal_likelihood(self, theta: np.ndarray, tau: float) -> float:
        """log N(y; W theta, Sigma + tau^2 K) up to a theta/tau-free constant."""
        t2l = tau * tau * self.lam
        resid = self.ytil - self.Wtil @ theta
        val = -0.5 * (np.log1p(t2l).sum() + (resid * resid / (1.0 + t2l)).sum())
        if not math.isfinite(val):
            raise NumericalError("non-finite likelihood value")
        return val


def inclusion_log_odds_prior(pi_cons: float, p: int) -> float:
    """log(pi / (1 - pi)) for pi = 1 - pi_cons^(1/p)."""
    log_one_minus_pi = math.log(pi_cons) / p
    pi = -math.expm1(log_one_minus_pi)
    return math.log(pi) - log_one_minus_pi


def update_mu_b(state: ModelState, ws: Workspace, rng: np.random.Generator,
                iteration: int = -1) -> None:
    """Joint conjugate draw of (mu, b) from the marginalized conditional."""
    A, rhs = ws.whitened_moments(state.tau)
    q = ws.q
    diag = np.einsum("ii->i", A)
    diag += ws.prior_prec_const
    if not ws.pilot and ws.p:
        prec_b = ws.prior_precision_b(state.gamma, state.sigma2)
        if prec_b.ndim == 1:
            diag[ws.k_mu :] += prec_b
        else:
            A[ws.k_mu :, ws.k_mu :] += prec_b
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise NumericalError(f"conditional precision factorization failed at iteration {iteration}") from None
    u = scipy.linalg.solve_triangular(L, rhs, lower=True, check_finite=False)
    z = rng.standard_normal(q)
    sol = scipy.linalg.solve_triangular(L.T, np.column_stack((u, z)), lower=False,
                                        check_finite=False)
    state.theta = sol[:, 0] + sol[:, 1]
    if not np.isfinite(state.theta).all():
        raise NumericalError(f"non-finite (mu, b) draw at iteration {iteration}")


def mu_b_conditional_moments(state: ModelState, ws: Workspace) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the (mu, b) full conditional (for checks)."""
    A, rhs = ws.whitened_moments(state.tau)
    diag = np.einsum("ii->i", A)
    diag += ws.prior_prec_const
    if not ws.pilot and ws.p:
        prec_b = ws.prior_precision_b(state.gamma, state.sigma2)
        if prec_b.ndim == 1:
            diag[ws.k_mu :] += prec_b
        else:
            A[ws.k_mu :, ws.k_mu :] += prec_b
    cov = np.linalg.inv(A)
    return cov @ rhs, cov


def update_gamma(state: ModelState, ws: Workspace, rng: np.random.Generator) -> None:
    """Componentwise Bernoulli draws; identity mode factorizes and vectorizes."""
    p = ws.p
    logit_pi = inclusion_log_odds_prior(state.pi_cons, p)
    b = state.b
    if ws.ss.correlation == "identity":
        log_odds = logit_pi - ws.log_c + b * b * ws.half_prec_diff
        state.gamma = (rng.random(p) < expit(log_odds)).astype(np.int8)
        return
    # g-prior mode: the joint density couples components; sweep in fixed order
    scale = 1.0 / (ws.g * state.sigma2)
    w = b / np.where(state.gamma == 1, ws.c * ws.psi, ws.psi)
    s = ws.ZtZ @ w
    gamma = state.gamma.copy()
    u = rng.random(p)
    for ell in range(p):
        w_cur = w[ell]
        w1 = b[ell] / (ws.c * ws.psi[ell])
        w0 = b[ell] / ws.psi[ell]
        d1 = w1 - w_cur
        d0 = w0 - w_cur
        qll = ws.ZtZ[ell, ell]
        quad_diff = (2.0 * d1 * s[ell] + d1 * d1 * qll) - (2.0 * d0 * s[ell] + d0 * d0 * qll)
        log_odds = logit_pi - ws.log_c - 0.5 * quad_diff * scale
        take = u[ell] < expit(log_odds)
        gamma[ell] = 1 if take else 0
        w_new = w1 if take else w0
        if w_new != w_cur:
            s += ws.ZtZ[:, ell] * (w_new - w_cur)
            w[ell] = w_new
    state.gamma = gamma


def update_tau(state: ModelState, ws: Workspace, rng: np.random.Generator,
               step: float) -> bool:
    """One random-walk Metropolis step on log tau; returns acceptance."""
    prior = ws.tau_prior
    tau = state.tau
    proposal = tau * math.exp(step * rng.standard_normal())
    log_prior_prop = prior.log_density(proposal)
    if log_prior_prop == -math.inf:
        return False
    current = ws.log_marginal_likelihood(state.theta, tau) + prior.log_density(tau) + math.log(tau)
    candidate = ws.log_marginal_likelihood(state.theta, proposal) + log_prior_prop + math.log(proposal)
    if math.log(rng.random()) < candidate - current:
        state.tau = proposal
        return True
    return False


def update_sigma2(state: ModelState, ws: Workspace, rng: np.random.Generator) -> None:
    """Conjugate inverse-gamma draw for a sampled g-prior scale parameter."""
    ss = ws.ss
    d = np.where(state.gamma == 1, ws.c * ws.psi, ws.psi)
    w = state.b / d
    quad = w @ ws.ZtZ @ w / ws.g
    if ss.sigma2_prior == "inverse-gamma":
        shape = ss.sigma2_shape + 0.5 * ws.p
        rate = ss.sigma2_scale + 0.5 * quad
    else:  # jeffreys
        shape = 0.5 * ws.p
        rate = 0.5 * quad
        if rate == 0.0:
            # degenerate b = 0: fall back to the prior truncated to a finite range
            state.sigma2 = math.exp(rng.uniform(math.log(1e-8), math.log(1e8)))
            return
    state.sigma2 = rate / rng.gamma(shape)


def _log_pi_cons_target(pi_cons: float, k_active: int, p: int,
                        alpha: float, beta: float) -> float:
    # Beta(alpha, beta) prior times Bernoulli(gamma | pi(pi_cons)) likelihood
    log_one_minus_pi = math.log(pi_cons) / p
    pi = -math.expm1(log_one_minus_pi)
    return ((alpha - 1.0) * math.log(pi_cons) + (beta - 1.0) * math.log1p(-pi_cons)
            + k_active * math.log(pi) + (p - k_active) * log_one_minus_pi)


def update_pi_cons(state: ModelState, ws: Workspace, rng: np.random.Generator,
                   step: float) -> bool:
    """Logit-scale random-walk Metropolis on the consistency probability."""
    cprior = ws.cprior
    if cprior.kind != "beta":
        return False
    pc = state.pi_cons
    x = math.log(pc) - math.log1p(-pc)
    x_new = x + step * rng.standard_normal()
    pc_new = 1.0 / (1.0 + math.exp(-x_new))
    if not 0.0 < pc_new < 1.0:
        return False
    k_active = int(state.gamma.sum())
    p = ws.p
    # Jacobian of the logit transform: log(pc (1 - pc))
    current = (_log_pi_cons_target(pc, k_active, p, cprior.alpha, cprior.beta)
               + math.log(pc) + math.log1p(-pc))
    candidate = (_log_pi_cons_target(pc_new, k_active, p, cprior.alpha, cprior.beta)
                 + math.log(pc_new) + math.log1p(-pc_new))
    if math.log(rng.random()) < candidate - current:
        state.pi_cons = pc_new
        return True
    return False


def _initial_state(ws: Workspace) -> ModelState:
    tau0 = ws.tau_prior.value if ws.tau_prior.kind == "fixed" else 0.2
    pi0 = 0.5 if ws.pilot else ws.cprior.mean
    return ModelState(theta=np.zeros(ws.q), gamma=np.zeros(ws.p, dtype=np.int8),
                      tau=tau0, sigma2=1.0, pi_cons=pi0, k_mu=ws.k_mu)


def _run_chain(ws: Workspace, cfg: McmcConfig, chain_index: int,
               seed_seq: np.random.SeedSequence, gamma_fixed: np.ndarray | None = None):
    rng = np.random.default_rng(seed_seq)
    state = _initial_state(ws)
    if gamma_fixed is not None:
        state.gamma = gamma_fixed.astype(np.int8)

    zellner = (not ws.pilot) and ws.ss.correlation == "zellner"
    sample_sigma2 = zellner and ws.sigma2_fixed is None
    if zellner and not sample_sigma2:
        state.sigma2 = ws.sigma2_fixed
    sample_pi = (not ws.pilot) and ws.cprior.kind == "beta"
    sample_tau = ws.tau_prior.kind != "fixed"
    sample_gamma = (not ws.pilot) and gamma_fixed is None

    n_kept = cfg.n_kept
    gamma_draws = np.empty((n_kept, ws.p), dtype=np.uint8)
    b_draws = np.empty((n_kept, ws.p))
    tau_draws = np.empty(n_kept)
    sigma2_draws = np.empty(n_kept) if sample_sigma2 else None
    pi_draws = np.empty(n_kept) if sample_pi else None
    mu_half_n = np.zeros(2)
    mu_half_sum = np.zeros((2, ws.k_mu))
    mu_half_sumsq = np.zeros((2, ws.k_mu))
    half_at = n_kept // 2

    step_tau, step_pi = 0.5, 0.8
    acc_tau = acc_pi = 0
    win_tau = win_pi = 0

    for t in range(cfg.iterations):
        update_mu_b(state, ws, rng, iteration=t)
        if sample_gamma:
            update_gamma(state, ws, rng)
        if sample_tau:
            accepted = update_tau(state, ws, rng, step_tau)
            if accepted:
                win_tau += 1
                if t >= cfg.burn_in:
                    acc_tau += 1
        if sample_sigma2:
            update_sigma2(state, ws, rng)
        if sample_pi:
            accepted = update_pi_cons(state, ws, rng, step_pi)
            if accepted:
                win_pi += 1
                if t >= cfg.burn_in:
                    acc_pi += 1

        if t < cfg.burn_in and (t + 1) % _ADAPT_WINDOW == 0:
            if sample_tau:
                rate = win_tau / _ADAPT_WINDOW
                step_tau = min(10.0, max(1e-3, step_tau * math.exp(rate - _ADAPT_TARGET)))
                win_tau = 0
            if sample_pi:
                rate = win_pi / _ADAPT_WINDOW
                step_pi = min(10.0, max(1e-3, step_pi * math.exp(rate - _ADAPT_TARGET)))
                win_pi = 0

        offset = t - cfg.burn_in
        if offset >= 0 and offset % cfg.thinning == 0:
            k = offset // cfg.thinning
            gamma_draws[k] = state.gamma
            b_draws[k] = state.b
            tau_draws[k] = state.tau
            if sample_sigma2:
                sigma2_draws[k] = state.sigma2
            if sample_pi:
                pi_draws[k] = state.pi_cons
            half = 0 if k < half_at else 1
            mu = state.mu
            mu_half_n[half] += 1
            mu_half_sum[half] += mu
            mu_half_sumsq[half] += mu * mu

    n_post = cfg.iterations - cfg.burn_in
    accept = {
        "tau_rate": acc_tau / n_post if sample_tau else None,
        "tau_step": step_tau if sample_tau else None,
        "pi_cons_rate": acc_pi / n_post if sample_pi else None,
        "pi_cons_step": step_pi if sample_pi else None,
    }
    return ChainOutput(chain_index=chain_index, master_seed=cfg.seed,
                       gamma=gamma_draws, b=b_draws, tau=tau_draws,
                       sigma2=sigma2_draws, pi_cons=pi_draws,
                       mu_half_n=mu_half_n, mu_half_sum=mu_half_sum,
                       mu_half_sumsq=mu_half_sumsq,
                       iterations=cfg.iterations, burn_in=cfg.burn_in,
                       thinning=cfg.thinning, accept=accept)


def _chain_job(args):
    ws, cfg, index, seed_seq, gamma_fixed = args
    return _run_chain(ws, cfg, index, seed_seq, gamma_fixed)


def run_selection(network, X: np.ndarray, spec, ss_config: SpikeSlabConfig,
                  consistency_prior: ConsistencyPrior, mcmc_config: McmcConfig,
                  tau_prior: HeterogeneityPrior | None = None,
                  parallel: bool = False) -> list[ChainOutput]:
    """Run the factor-selection sampler; one output per chain.

    A placement with no factors short-circuits: the network is consistent by
    construction and no chains are produced.
    """
    if spec.p == 0:
        return []
    tau_prior = tau_prior or HeterogeneityPrior.half_normal(1.0)
    ss = resolve_config(ss_config, spec.p, network.n_contrasts)
    stacked = np.hstack([X, spec.Z])
    if np.linalg.matrix_rank(stacked) != X.shape[1] + spec.p:
        raise ValueError("[X | Z] is rank deficient; placement invariant violated")
    ws = Workspace(network, X, spec.Z, ss, consistency_prior, tau_prior)
    seeds = np.random.SeedSequence(mcmc_config.seed).spawn(mcmc_config.chains)
    jobs = [(ws, mcmc_config, i, s, None) for i, s in enumerate(seeds)]
    if parallel and mcmc_config.chains > 1:
        try:
            with ProcessPoolExecutor(max_workers=mcmc_config.chains) as pool:
                return list(pool.map(_chain_job, jobs))
        except OSError:
            pass  # fall back to in-process execution
    return [_chain_job(j) for j in jobs]


def run_pilot(network, X: np.ndarray, Z: np.ndarray, pilot_config: McmcConfig,
              tau_prior: HeterogeneityPrior | None = None):
    """All-factors run with a vague coefficient prior; returns (b draws, rhat)."""
    from .analysis import split_rhat

    tau_prior = tau_prior or HeterogeneityPrior.half_normal(1.0)
    ws = Workspace(network, X, Z, None, None, tau_prior, pilot=True)
    seeds = np.random.SeedSequence(pilot_config.seed).spawn(pilot_config.chains)
    chains = [_run_chain(ws, pilot_config, i, s, gamma_fixed=np.ones(ws.p))
              for i, s in enumerate(seeds)]
    pooled = np.vstack([c.b for c in chains])
    rhat = np.array([split_rhat([c.b[:, j] for c in chains]) for j in range(ws.p)])
    return pooled, rhat


def write_trace(chain: ChainOutput, path) -> None:
    """Delimited per-chain draw log: iteration, gamma bitstring, b, tau."""
    p = chain.gamma.shape[1]
    with open(path, "w") as fh:
        cols = ["iteration", "gamma"] + [f"b{j + 1}" for j in range(p)] + ["tau"]
        fh.write(",".join(cols) + "\n")
        for k in range(chain.n_draws):
            it = chain.burn_in + k * chain.thinning
            bits = "".join(str(int(g)) for g in chain.gamma[k])
            bvals = ",".join(repr(float(v)) for v in chain.b[k])
            fh.write(f"{it},{bits},{bvals},{chain.tau[k]!r}\n")
