"""Spike-and-slab prior mathematics and tuning rules.

Covers the inclusion-probability calibration that pins the prior probability
of the no-factor model, the spike/slab intersection rule used to translate a
practical-significance threshold into spike scales, the unit-information
g default, and the prior covariance of the factor coefficients under the
independent and g-prior correlation structures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class SpikeSlabConfig:
    """Tuning of the two-component normal mixture on factor coefficients.

    ``c`` is the slab/spike scale ratio, ``omega`` the effect size judged
    practically significant, ``psi`` the per-factor spike standard deviations
    (filled from ``omega`` and ``c`` by :func:`resolve_config` when None).
    ``correlation`` selects independent factors ("identity") or the g-prior
    structure ("zellner", with ``g`` = total contrasts when None).

    ``sigma2_prior`` controls the g-prior scale: "calibrated" (default) pins
    sigma2 = p / (g * tr[(Z'Z)^-1]) so that g (Z'Z)^-1 sigma2 has trace p and
    plays the role of a correlation matrix, keeping the omega calibration of
    the spike sds; for p = 1 this reduces exactly to the identity mode.
    "jeffreys" and "inverse-gamma" sample sigma2 from its conditional given
    b instead; note that with sigma2 appearing only in the coefficient prior
    these make the implied marginal prior on b behave like |b|^-p, so the
    posterior is prior-dominated (Jeffreys is outright improper). "fixed"
    uses ``sigma2_value`` as given.
    """

    c: float = 10.0
    omega: float = 0.2
    psi: tuple[float, ...] | None = None
    correlation: str = "identity"
    g: float | None = None
    sigma2_prior: str = "calibrated"
    sigma2_shape: float = 1e-3
    sigma2_scale: float = 1e-3
    sigma2_value: float = 1.0

    def __post_init__(self):
        if not self.c > 1:
            raise ValueError(f"c must exceed 1 (got {self.c})")
        if not self.omega > 0:
            raise ValueError(f"omega must be positive (got {self.omega})")
        if self.correlation not in ("identity", "zellner"):
            raise ValueError(f"correlation must be 'identity' or 'zellner' (got {self.correlation!r})")
        if self.psi is not None and any(not (x > 0) for x in self.psi):
            raise ValueError("all spike standard deviations must be positive")
        if self.g is not None and not self.g > 0:
            raise ValueError(f"g must be positive (got {self.g})")
        if self.sigma2_prior not in ("calibrated", "jeffreys", "inverse-gamma", "fixed"):
            raise ValueError("sigma2_prior must be 'calibrated', 'jeffreys', "
                             f"'inverse-gamma' or 'fixed' (got {self.sigma2_prior!r})")
        if self.sigma2_prior == "fixed" and not self.sigma2_value > 0:
            raise ValueError(f"fixed sigma2 must be positive (got {self.sigma2_value})")


@dataclass(frozen=True)
class ConsistencyPrior:
    """Prior belief that the network is consistent: fixed value or Beta law."""

    kind: str  # "fixed" or "beta"
    pi_cons: float | None = None
    alpha: float | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.kind == "fixed":
            if self.pi_cons is None or not 0 < self.pi_cons < 1:
                raise ValueError(f"fixed consistency probability must lie in (0, 1) (got {self.pi_cons})")
        elif self.kind == "beta":
            if self.alpha is None or self.beta is None or self.alpha <= 0 or self.beta <= 0:
                raise ValueError("Beta prior needs positive alpha and beta")
        else:
            raise ValueError(f"kind must be 'fixed' or 'beta' (got {self.kind!r})")

    @classmethod
    def fixed(cls, pi_cons: float) -> "ConsistencyPrior":
        return cls(kind="fixed", pi_cons=pi_cons)

    @classmethod
    def from_beta(cls, alpha: float, beta: float) -> "ConsistencyPrior":
        return cls(kind="beta", alpha=alpha, beta=beta)

    @property
    def mean(self) -> float:
        if self.kind == "fixed":
            return self.pi_cons
        return self.alpha / (self.alpha + self.beta)

    @property
    def sd(self) -> float:
        if self.kind == "fixed":
            return 0.0
        a, b = self.alpha, self.beta
        return math.sqrt(a * b / ((a + b) ** 2 * (a + b + 1)))


def historical_consistency_prior(kind: str = "beta") -> ConsistencyPrior:
    """Consistency prior elicited from a review of published networks.

    Beta(157, 44): mean ~0.78, sd ~0.03. ``kind="fixed"`` gives the point
    alternative at 0.78.
    """
    if kind == "beta":
        return ConsistencyPrior.from_beta(157.0, 44.0)
    if kind == "fixed":
        return ConsistencyPrior.fixed(0.78)
    raise ValueError(f"kind must be 'beta' or 'fixed' (got {kind!r})")


def inclusion_probability(pi_cons: float, p: int) -> float:
    """Common per-factor inclusion probability pinning P(all excluded) = pi_cons."""
    if not 0 < pi_cons < 1:
        raise ValueError(f"pi_cons must lie in (0, 1) (got {pi_cons})")
    if p < 1:
        raise ValueError(f"p must be at least 1 (got {p})")
    return 1.0 - pi_cons ** (1.0 / p)


def naive_consistency_probability(pi: float, p: int) -> float:
    """P(no factor included) under iid Bernoulli(pi) indicators: (1 - pi)^p.

    Documents why a flat Bernoulli(0.5) choice is rejected: the no-factor
    model's prior probability collapses exponentially in p.
    """
    if not 0 <= pi <= 1:
        raise ValueError(f"pi must lie in [0, 1] (got {pi})")
    if p < 1:
        raise ValueError(f"p must be at least 1 (got {p})")
    return (1.0 - pi) ** p


def xi(c: float) -> float:
    """Squared number of spike sds at which spike and slab densities cross."""
    if not c > 1:
        raise ValueError(f"c must exceed 1 (got {c})")
    return 2.0 * c * c * math.log(c) / (c * c - 1.0)


def psi_from_threshold(omega: float, c: float) -> float:
    """Spike sd making the slab density win exactly beyond |b| = omega."""
    if not omega > 0:
        raise ValueError(f"omega must be positive (got {omega})")
    return omega / math.sqrt(xi(c))


def default_g(n_contrasts: int) -> float:
    """Unit-information choice for the g-prior scale: one over-all weight per contrast."""
    if n_contrasts < 1:
        raise ValueError(f"need at least one contrast (got {n_contrasts})")
    return float(n_contrasts)


def resolve_config(config: SpikeSlabConfig, p: int, n_contrasts: int) -> SpikeSlabConfig:
    """Fill psi (threshold rule) and g (unit information) when left to defaults."""
    out = config
    if out.psi is None:
        out = replace(out, psi=tuple([psi_from_threshold(out.omega, out.c)] * p))
    elif len(out.psi) != p:
        raise ValueError(f"psi has length {len(out.psi)} but there are {p} factors")
    if out.correlation == "zellner" and out.g is None:
        out = replace(out, g=default_g(n_contrasts))
    return out


def calibrated_sigma2(config: SpikeSlabConfig, Z: np.ndarray) -> float:
    """Scale pinning tr(g (Z'Z)^-1 sigma2) = p, i.e. R acts as a correlation."""
    p = Z.shape[1]
    trace = np.trace(np.linalg.inv(Z.T @ Z))
    return p / (config.g * trace)


def prior_b_covariance(config: SpikeSlabConfig, gamma: np.ndarray, Z: np.ndarray,
                       sigma2: float = 1.0) -> np.ndarray:
    """Covariance D_gamma R D_gamma of the factor coefficients given gamma."""
    gamma = np.asarray(gamma)
    psi = np.asarray(config.psi, dtype=float)
    if psi.shape[0] != gamma.shape[0]:
        raise ValueError("psi and gamma lengths differ")
    d = np.where(gamma == 1, config.c * psi, psi)
    if config.correlation == "identity":
        return np.diag(d * d)
    ztz = Z.T @ Z
    try:
        r = config.g * np.linalg.inv(ztz) * sigma2
    except np.linalg.LinAlgError:
        raise RuntimeError("Z'Z is singular; the placement rank invariant is broken") from None
    return (r * d[:, None]) * d[None, :]


def correlated_significance_region(b: np.ndarray, config: SpikeSlabConfig, Z: np.ndarray,
                                   sigma2: float = 1.0) -> bool:
    """True when b lies where the slab (inclusion) density dominates.

    Correlated analogue of the scalar |b| > omega rule: compares the spike
    Mahalanobis form against g * p * sigma2 * xi(c). The boundary itself is
    assigned to the spike.
    """
    if config.correlation != "zellner":
        raise ValueError("the correlated region is defined for the zellner mode")
    b = np.asarray(b, dtype=float)
    psi = np.asarray(config.psi, dtype=float)
    if b.shape[0] != psi.shape[0]:
        raise ValueError("b and psi lengths differ")
    u = b / psi
    quad = u @ (Z.T @ Z) @ u
    p = b.shape[0]
    return bool(quad > config.g * p * sigma2 * xi(config.c))


@dataclass(frozen=True)
class PilotResult:
    psi: tuple[float, ...]
    warnings: tuple[str, ...] = ()


def pilot_psi(network, X, Z, pilot_config, c: float = 10.0,
              tau_prior=None) -> PilotResult:
    """Spike sds from a pilot run of the all-factors model.

    Fits the model with every factor held in (vague prior on b), and returns
    the posterior sd of each coefficient divided by ``c``, so the slab scale
    c * psi matches the pilot spread. A convergence warning is attached when
    the split-chain statistic of any coefficient exceeds 1.05.
    """
    from .sampler import run_pilot  # deferred: sampler builds on this module

    draws_b, rhat = run_pilot(network, X, Z, pilot_config, tau_prior=tau_prior)
    sds = draws_b.std(axis=0, ddof=1)
    warnings = tuple(f"pilot split-chain statistic {r:.3f} > 1.05 for factor {i}"
                     for i, r in enumerate(rhat) if r > 1.05)
    return PilotResult(psi=tuple(sds / c), warnings=warnings)
