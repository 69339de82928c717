"""Decision quantities from chain output.

Posterior inclusion probabilities with Monte Carlo errors, the posterior
model table and the odds of the no-factor model, the median probability
model, the PIP-threshold dimension reduction, qualitative evidence labels,
and split-chain convergence statistics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

N_BATCHES = 50
RHAT_FLAG = 1.05
REDUCTION_THRESHOLD = 0.20


def split_rhat(sequences) -> float:
    """Potential scale reduction over split chains (two halves per chain)."""
    halves = []
    for seq in sequences:
        x = np.asarray(seq, dtype=float)
        h = x.shape[0] // 2
        if h < 2:
            raise ValueError("sequences are too short to split")
        halves.append(x[:h])
        halves.append(x[h : 2 * h])
    n = min(h.shape[0] for h in halves)
    data = np.vstack([h[:n] for h in halves])
    means = data.mean(axis=1)
    within = data.var(axis=1, ddof=1).mean()
    between = n * means.var(ddof=1)
    if within == 0.0:
        return 1.0 if between == 0.0 else math.inf
    var_plus = (n - 1) / n * within + between / n
    return float(math.sqrt(var_plus / within))


def _rhat_from_half_moments(counts, sums, sumsqs) -> float:
    # counts/sums/sumsqs: one entry per half-chain
    counts = np.asarray(counts, dtype=float)
    means = np.asarray(sums) / counts
    variances = (np.asarray(sumsqs) / counts - means * means) * counts / (counts - 1)
    within = variances.mean()
    n = counts.mean()
    between = n * means.var(ddof=1)
    if within == 0.0:
        return 1.0 if between == 0.0 else math.inf
    var_plus = (n - 1) / n * within + between / n
    return float(math.sqrt(var_plus / within))


def _batch_mean_variance(x: np.ndarray) -> np.ndarray:
    """Variance of the chain mean by non-overlapping batch means."""
    n = x.shape[0]
    nb = min(N_BATCHES, n)
    size = n // nb
    trimmed = x[: nb * size]
    batches = trimmed.reshape(nb, size, -1).mean(axis=1)
    return batches.var(axis=0, ddof=1) / nb


def pip(chains) -> tuple[np.ndarray, np.ndarray]:
    """Pooled posterior inclusion probabilities with batch-means MC errors."""
    if not chains:
        raise ValueError("no chains")
    chain_means = np.vstack([c.gamma.mean(axis=0) for c in chains])
    pooled = chain_means.mean(axis=0)
    variances = np.vstack([_batch_mean_variance(c.gamma.astype(float)) for c in chains])
    mcse = np.sqrt(variances.sum(axis=0)) / len(chains)
    return pooled, mcse


def model_id(gamma) -> int:
    """Binary model index: bit ell set when factor ell is included."""
    gamma = np.asarray(gamma)
    p = gamma.shape[0]
    if p > 62:
        raise ValueError(f"model ids need p <= 62 (got {p}); reduce the factor set first")
    return int(gamma.astype(np.int64) @ (np.int64(1) << np.arange(p, dtype=np.int64)))


def _draw_model_ids(chain) -> np.ndarray:
    p = chain.gamma.shape[1]
    weights = np.int64(1) << np.arange(p, dtype=np.int64)
    return chain.gamma.astype(np.int64) @ weights


def posterior_model_probs(chains) -> dict:
    """Empirical model frequencies pooled over chains."""
    if not chains:
        raise ValueError("no chains")
    if chains[0].gamma.shape[1] > 62:
        raise ValueError("model ids need p <= 62; reduce the factor set first")
    ids = np.concatenate([_draw_model_ids(c) for c in chains])
    values, counts = np.unique(ids, return_counts=True)
    total = counts.sum()
    return {int(v): float(cnt) / total for v, cnt in zip(values, counts)}


@dataclass(frozen=True)
class PosteriorOdds:
    """Odds value, or a finite one-sided bound when a count is empty."""

    value: float | None
    bound: str | None = None  # None, "lower" or "upper"

    def as_dict(self) -> dict:
        return {"value": self.value, "bound": self.bound}


def consistency_odds(model_table: dict, total_draws: int) -> PosteriorOdds:
    """Posterior odds of the no-factor model over all others."""
    if not model_table:
        raise ValueError("empty model table")
    p0 = model_table.get(0, 0.0)
    if p0 >= 1.0:
        return PosteriorOdds(value=float(total_draws), bound="lower")
    if p0 <= 0.0:
        return PosteriorOdds(value=1.0 / total_draws, bound="upper")
    return PosteriorOdds(value=p0 / (1.0 - p0))


def median_probability_model(pips) -> tuple[int, ...]:
    """Indices of factors with inclusion probability strictly above 0.5."""
    return tuple(int(i) for i, v in enumerate(np.asarray(pips)) if v > 0.5)


def reduce_dimension(pips, threshold: float = REDUCTION_THRESHOLD) -> tuple[int, ...]:
    """Factors retained after dropping inclusion probabilities below the cut."""
    return tuple(int(i) for i, v in enumerate(np.asarray(pips)) if v >= threshold)


def evidence_label(po: float) -> tuple[str, str | None]:
    """Qualitative band for the odds, with the favored hypothesis attached."""
    if not po > 0:
        raise ValueError(f"odds must be positive (got {po})")
    if po == 1.0:
        return "marginal", None
    direction = "consistency" if po > 1.0 else "inconsistency"
    k = po if po > 1.0 else 1.0 / po
    if k <= 3.0:
        label = "marginal"
    elif k <= 20.0:
        label = "positive/substantial"
    elif k <= 150.0:
        label = "strong"
    else:
        label = "very strong"
    return label, direction


@dataclass(frozen=True)
class Diagnostics:
    available: bool
    rhat: dict
    flagged: tuple[str, ...]
    note: str | None = None

    def as_dict(self) -> dict:
        return {"available": self.available, "rhat": self.rhat,
                "flagged": list(self.flagged), "note": self.note}


def convergence(chains, factor_labels=None, mu_labels=None) -> Diagnostics:
    """Split-chain scale reduction per continuous parameter and per PIP."""
    if len(chains) < 2:
        return Diagnostics(available=False, rhat={}, flagged=(),
                           note="diagnostics need at least two chains")
    p = chains[0].gamma.shape[1]
    factor_labels = list(factor_labels) if factor_labels is not None else [f"factor{j + 1}" for j in range(p)]
    k_mu = chains[0].mu_half_sum.shape[1]
    mu_labels = list(mu_labels) if mu_labels is not None else [f"mu{j + 1}" for j in range(k_mu)]

    rhat = {}
    for j in range(k_mu):
        counts = [c.mu_half_n[h] for c in chains for h in (0, 1)]
        sums = [c.mu_half_sum[h, j] for c in chains for h in (0, 1)]
        sumsqs = [c.mu_half_sumsq[h, j] for c in chains for h in (0, 1)]
        rhat[f"mu[{mu_labels[j]}]"] = _rhat_from_half_moments(counts, sums, sumsqs)
    for j in range(p):
        rhat[f"b[{factor_labels[j]}]"] = split_rhat([c.b[:, j] for c in chains])
        rhat[f"gamma[{factor_labels[j]}]"] = split_rhat([c.gamma[:, j] for c in chains])
    rhat["tau"] = split_rhat([c.tau for c in chains])
    if chains[0].sigma2 is not None:
        rhat["sigma2"] = split_rhat([c.sigma2 for c in chains])
    if chains[0].pi_cons is not None:
        rhat["pi_cons"] = split_rhat([c.pi_cons for c in chains])

    flagged = tuple(name for name, value in rhat.items() if value > RHAT_FLAG)
    return Diagnostics(available=True, rhat=rhat, flagged=flagged)


@dataclass(frozen=True)
class ConsistencyReport:
    method: str
    factor_labels: tuple[str, ...]
    pips: tuple[float, ...]
    pip_mcse: tuple[float, ...]
    model_table: dict
    consistent_prob: float
    po_consistency: PosteriorOdds
    evidence: str
    evidence_direction: str | None
    median_model: tuple[str, ...]
    reduced_factors: tuple[str, ...]
    diagnostics: Diagnostics
    total_draws: int
    n_chains: int
    consistent_by_construction: bool
    settings: dict

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "consistent_by_construction": self.consistent_by_construction,
            "factors": [
                {"label": lab, "pip": pip_, "mcse": mcse}
                for lab, pip_, mcse in zip(self.factor_labels, self.pips, self.pip_mcse)
            ],
            "model_table": {str(k): v for k, v in sorted(self.model_table.items())},
            "consistent_probability": self.consistent_prob,
            "posterior_odds_consistency": self.po_consistency.as_dict(),
            "evidence": {"label": self.evidence, "direction": self.evidence_direction},
            "median_probability_model": list(self.median_model),
            "reduced_factors": list(self.reduced_factors),
            "diagnostics": self.diagnostics.as_dict(),
            "total_draws": self.total_draws,
            "chains": self.n_chains,
            "settings": self.settings,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def build_report(spec, chains, settings: dict | None = None,
                 reduction_threshold: float = REDUCTION_THRESHOLD) -> ConsistencyReport:
    """Assemble the full report from chain output (or the no-factor shortcut)."""
    settings = dict(settings or {})
    labels = spec.labels
    if spec.p == 0 or not chains:
        if spec.p != 0:
            raise ValueError("no chains supplied for a model with factors")
        return ConsistencyReport(
            method=spec.method, factor_labels=(), pips=(), pip_mcse=(),
            model_table={0: 1.0}, consistent_prob=1.0,
            po_consistency=PosteriorOdds(value=None, bound="lower"),
            evidence="consistent by construction", evidence_direction="consistency",
            median_model=(), reduced_factors=(),
            diagnostics=Diagnostics(available=False, rhat={}, flagged=(),
                                    note="no factors to sample"),
            total_draws=0, n_chains=0, consistent_by_construction=True,
            settings=settings)

    pips, mcse = pip(chains)
    table = posterior_model_probs(chains)
    total = sum(c.n_draws for c in chains)
    p0 = table.get(0, 0.0)
    odds = consistency_odds(table, total)
    label, direction = evidence_label(odds.value)
    median = tuple(labels[i] for i in median_probability_model(pips))
    retained = tuple(labels[i] for i in reduce_dimension(pips, reduction_threshold))
    diag = convergence(chains, factor_labels=labels)
    return ConsistencyReport(
        method=spec.method, factor_labels=labels,
        pips=tuple(float(v) for v in pips), pip_mcse=tuple(float(v) for v in mcse),
        model_table=table, consistent_prob=p0, po_consistency=odds,
        evidence=label, evidence_direction=direction,
        median_model=median, reduced_factors=retained, diagnostics=diag,
        total_draws=total, n_chains=len(chains),
        consistent_by_construction=False, settings=settings)


def pips_csv(report: ConsistencyReport) -> str:
    lines = ["factor,pip,mcse"]
    for lab, v, e in zip(report.factor_labels, report.pips, report.pip_mcse):
        lines.append(f"{lab},{v!r},{e!r}")
    return "\n".join(lines) + "\n"


def model_table_csv(report: ConsistencyReport) -> str:
    lines = ["model_id,factors,probability"]
    for mid in sorted(report.model_table):
        members = [lab for j, lab in enumerate(report.factor_labels) if mid >> j & 1]
        lines.append(f"{mid},{'|'.join(members)},{report.model_table[mid]!r}")
    return "\n".join(lines) + "\n"
