"""Contrast-level evidence networks: loading, validation, canonical form.

A network holds, per study, the T_s - 1 observed treatment contrasts (effect
``y`` of ``t2`` relative to ``t1`` on an additive scale) together with the
block-diagonal sampling covariance. Everything downstream (design matrices,
factor placement, sampling) assumes the canonical form produced here:
treatments are indexed with the reference at 0 and the rest lexicographic,
every contrast is oriented so t1 precedes t2 canonically, and contrasts
within a study are sorted.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

CONTRAST_COLUMNS = ("study", "t1", "t2", "y", "se")
COV_COLUMNS = ("study", "row", "col", "cov")
ARM_COLUMNS = ("study", "treatment", "se_arm")

# Relative tolerance when cross-checking arm-level variances against the
# contrast standard errors supplied in the main table.
ARM_DIAG_RTOL = 1e-2


class ValidationError(ValueError):
    """Raised after eager validation; carries every problem found."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("invalid network input:\n" + "\n".join(f"  - {e}" for e in self.errors))


@dataclass(frozen=True)
class Treatment:
    id: str
    index: int


@dataclass(frozen=True)
class ContrastObservation:
    t1: str
    t2: str
    y: float
    se: float


@dataclass(frozen=True)
class Study:
    id: str
    design: tuple[str, ...]
    contrasts: tuple[ContrastObservation, ...]

    @property
    def n_arms(self) -> int:
        return len(self.design)


@dataclass(frozen=True, eq=False)
class SamplingCovariance:
    """Per-study symmetric PD blocks, aligned with the study list."""

    blocks: tuple[np.ndarray, ...]

    def full(self) -> np.ndarray:
        """Assemble the dense block-diagonal N x N matrix."""
        n = sum(b.shape[0] for b in self.blocks)
        out = np.zeros((n, n))
        at = 0
        for b in self.blocks:
            k = b.shape[0]
            out[at : at + k, at : at + k] = b
            at += k
        return out


@dataclass(frozen=True, eq=False)
class EvidenceNetwork:
    treatments: tuple[Treatment, ...]
    studies: tuple[Study, ...]
    sigma: SamplingCovariance
    reference: str

    @property
    def n_treatments(self) -> int:
        return len(self.treatments)

    @property
    def n_contrasts(self) -> int:
        return sum(s.n_arms - 1 for s in self.studies)

    @property
    def treatment_ids(self) -> tuple[str, ...]:
        return tuple(t.id for t in self.treatments)

    def index_of(self, treatment_id: str) -> int:
        return self._index_map()[treatment_id]

    def _index_map(self) -> dict[str, int]:
        return {t.id: t.index for t in self.treatments}

    def observations(self) -> list[tuple[Study, ContrastObservation]]:
        """All contrast rows in canonical (study, within-study) order."""
        return [(s, c) for s in self.studies for c in s.contrasts]

    def y_vector(self) -> np.ndarray:
        return np.array([c.y for _, c in self.observations()])


def multiarm_covariance(arm_ses: Mapping[str, float], anchor: str) -> np.ndarray:
    """Covariance block for anchored contrasts of one multi-arm study.

    ``arm_ses`` maps each arm to the standard error of its arm-level summary;
    the block covers the contrasts anchor-vs-other in sorted order of the
    non-anchor arms. Off-diagonals equal the anchor arm's variance, diagonals
    the sum of the two arm variances.
    """
    if len(arm_ses) < 3:
        raise ValueError("multi-arm covariance needs at least 3 arms")
    if anchor not in arm_ses:
        raise ValueError(f"anchor {anchor!r} is not one of the study arms")
    bad = [t for t, se in arm_ses.items() if not (se > 0)]
    if bad:
        raise ValueError(f"non-positive arm standard errors for {bad}")
    others = sorted(t for t in arm_ses if t != anchor)
    v_anchor = arm_ses[anchor] ** 2
    k = len(others)
    block = np.full((k, k), v_anchor)
    for i, t in enumerate(others):
        block[i, i] = v_anchor + arm_ses[t] ** 2
    return block


def _contrast_pair_covariance(pair_a: tuple[str, str], pair_b: tuple[str, str],
                              arm_vars: Mapping[str, float]) -> float:
    # cov(x_b - x_a, x_d - x_c) over independent arm summaries
    (a, b), (c, d) = pair_a, pair_b
    out = 0.0
    if b == d:
        out += arm_vars[b]
    if b == c:
        out -= arm_vars[b]
    if a == d:
        out -= arm_vars[a]
    if a == c:
        out += arm_vars[a]
    return out


def _parse_float(value, what: str, errors: list[str]) -> float | None:
    try:
        x = float(value)
    except (TypeError, ValueError):
        errors.append(f"{what}: not a number ({value!r})")
        return None
    if not math.isfinite(x):
        errors.append(f"{what}: not finite ({value!r})")
        return None
    return x


def _check_columns(rows: list[dict], expected: tuple[str, ...], what: str,
                   errors: list[str]) -> bool:
    if not rows:
        return True
    got = set(rows[0].keys())
    if got != set(expected):
        errors.append(f"{what}: columns must be exactly {','.join(expected)}, got {','.join(sorted(got))}")
        return False
    return True


def _spans_design(design: Sequence[str], pairs: Sequence[tuple[str, str]]) -> bool:
    # T_s - 1 distinct pairs span the arms iff they form a spanning tree
    parent = {t: t for t in design}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def load_network(records: Iterable[Mapping], cov_records: Iterable[Mapping] = (),
                 arm_records: Iterable[Mapping] = (), reference: str | None = None) -> EvidenceNetwork:
    """Build a canonical network from tabular records.

    ``records`` carry columns study,t1,t2,y,se. Optional ``cov_records``
    (study,row,col,cov; 1-based row/col into the study's input rows) supply
    multi-arm off-diagonals; optional ``arm_records`` (study,treatment,se_arm)
    are the fallback from which off-diagonals are derived. Validation is
    eager: every problem found is reported in a single ValidationError.
    """
    rows = [dict(r) for r in records]
    cov_rows = [dict(r) for r in cov_records]
    arm_rows = [dict(r) for r in arm_records]
    errors: list[str] = []

    if not _check_columns(rows, CONTRAST_COLUMNS, "contrast table", errors):
        raise ValidationError(errors)
    _check_columns(cov_rows, COV_COLUMNS, "covariance table", errors)
    _check_columns(arm_rows, ARM_COLUMNS, "arm table", errors)
    if not rows:
        errors.append("contrast table: no rows")
        raise ValidationError(errors)

    # Group contrast rows per study, keeping input order for cov indexing.
    per_study: dict[str, list[tuple[str, str, float, float]]] = {}
    for i, r in enumerate(rows):
        where = f"contrast row {i + 1}"
        study = str(r["study"]).strip()
        t1 = str(r["t1"]).strip()
        t2 = str(r["t2"]).strip()
        y = _parse_float(r["y"], f"{where}: y", errors)
        se = _parse_float(r["se"], f"{where}: se", errors)
        if not study or not t1 or not t2:
            errors.append(f"{where}: empty study or treatment id")
            continue
        if t1 == t2:
            errors.append(f"{where}: t1 equals t2 ({t1!r})")
            continue
        if se is not None and se <= 0:
            errors.append(f"{where}: se must be positive (got {se})")
        if y is None or se is None or se <= 0:
            continue
        per_study.setdefault(study, []).append((t1, t2, y, se))

    # Per-study structural checks.
    for sid in sorted(per_study):
        entries = per_study[sid]
        pairs = [frozenset((t1, t2)) for t1, t2, _, _ in entries]
        if len(set(pairs)) != len(pairs):
            dupes = sorted({"-".join(sorted(p)) for p in pairs if pairs.count(p) > 1})
            errors.append(f"study {sid}: duplicate contrast pair(s) {dupes}")
            continue
        design = sorted({t for t1, t2, _, _ in entries for t in (t1, t2)})
        if len(entries) != len(design) - 1:
            errors.append(
                f"study {sid}: {len(design)} arms require {len(design) - 1} contrasts, got {len(entries)}")
            continue
        if not _spans_design(design, [(t1, t2) for t1, t2, _, _ in entries]):
            errors.append(f"study {sid}: contrasts do not connect all arms")

    treatments_sorted = sorted({t for e in per_study.values() for t1, t2, _, _ in e for t in (t1, t2)})
    if reference is None:
        reference = treatments_sorted[0] if treatments_sorted else ""
    elif treatments_sorted and reference not in treatments_sorted:
        errors.append(f"reference treatment {reference!r} does not appear in the data")

    if errors:
        raise ValidationError(errors)

    order = [reference] + [t for t in treatments_sorted if t != reference]
    index = {t: i for i, t in enumerate(order)}

    # Covariance inputs, grouped per study.
    cov_by_study: dict[str, dict[tuple[int, int], float]] = {}
    for i, r in enumerate(cov_rows):
        where = f"covariance row {i + 1}"
        sid = str(r["study"]).strip()
        if sid not in per_study:
            errors.append(f"{where}: unknown study {sid!r}")
            continue
        ri = _parse_float(r["row"], f"{where}: row", errors)
        ci = _parse_float(r["col"], f"{where}: col", errors)
        cv = _parse_float(r["cov"], f"{where}: cov", errors)
        if ri is None or ci is None or cv is None:
            continue
        ri, ci = int(ri), int(ci)
        n_rows = len(per_study[sid])
        if not (1 <= ri <= n_rows and 1 <= ci <= n_rows):
            errors.append(f"{where}: row/col out of range for study {sid} (1..{n_rows})")
            continue
        if ri == ci:
            errors.append(f"{where}: diagonal entries come from se, not the covariance table")
            continue
        key = (min(ri, ci) - 1, max(ri, ci) - 1)
        if key in cov_by_study.setdefault(sid, {}):
            errors.append(f"{where}: duplicate covariance entry for study {sid} rows {ri},{ci}")
            continue
        cov_by_study[sid][key] = cv

    arm_by_study: dict[str, dict[str, float]] = {}
    for i, r in enumerate(arm_rows):
        where = f"arm row {i + 1}"
        sid = str(r["study"]).strip()
        tid = str(r["treatment"]).strip()
        se = _parse_float(r["se_arm"], f"{where}: se_arm", errors)
        if sid not in per_study:
            errors.append(f"{where}: unknown study {sid!r}")
            continue
        if se is None:
            continue
        if se <= 0:
            errors.append(f"{where}: se_arm must be positive (got {se})")
            continue
        design = {t for t1, t2, _, _ in per_study[sid] for t in (t1, t2)}
        if tid not in design:
            errors.append(f"{where}: treatment {tid!r} is not an arm of study {sid}")
            continue
        arm_by_study.setdefault(sid, {})[tid] = se ** 2

    # Assemble canonical studies and covariance blocks.
    studies: list[Study] = []
    blocks: list[np.ndarray] = []
    for sid in sorted(per_study):
        entries = per_study[sid]
        k = len(entries)
        design = tuple(sorted({t for t1, t2, _, _ in entries for t in (t1, t2)}, key=index.__getitem__))

        block = np.zeros((k, k))
        for i, (_, _, _, se) in enumerate(entries):
            block[i, i] = se ** 2

        if k > 1:
            given = cov_by_study.get(sid)
            arms = arm_by_study.get(sid)
            if given is not None:
                missing = [(i + 1, j + 1) for i in range(k) for j in range(i + 1, k)
                           if (i, j) not in given]
                if missing:
                    errors.append(f"study {sid}: missing covariance entries for row pairs {missing}")
                else:
                    for (i, j), cv in given.items():
                        block[i, j] = block[j, i] = cv
            elif arms is not None:
                missing_arms = sorted(set(design) - set(arms))
                if missing_arms:
                    errors.append(f"study {sid}: arm table lacks arms {missing_arms}")
                else:
                    for i, (a1, a2, _, se) in enumerate(entries):
                        implied = arms[a1] + arms[a2]
                        if abs(implied - se ** 2) > ARM_DIAG_RTOL * max(implied, se ** 2):
                            errors.append(
                                f"study {sid}: arm variances imply var {implied:.6g} for "
                                f"{a1}-{a2} but se gives {se ** 2:.6g}")
                    for i in range(k):
                        for j in range(i + 1, k):
                            pa = (entries[i][0], entries[i][1])
                            pb = (entries[j][0], entries[j][1])
                            cv = _contrast_pair_covariance(pa, pb, arms)
                            block[i, j] = block[j, i] = cv
            else:
                errors.append(
                    f"study {sid}: multi-arm study needs a covariance block or arm-level standard errors")

        # Canonical orientation and within-study ordering.
        signs = np.ones(k)
        oriented = []
        for i, (t1, t2, y, se) in enumerate(entries):
            if index[t1] > index[t2]:
                t1, t2, y = t2, t1, -y
                signs[i] = -1.0
            oriented.append((t1, t2, y, se))
        perm = sorted(range(k), key=lambda i: (index[oriented[i][0]], index[oriented[i][1]]))
        block = block * np.outer(signs, signs)
        block = block[np.ix_(perm, perm)]

        contrasts = tuple(ContrastObservation(*oriented[i]) for i in perm)
        try:
            np.linalg.cholesky(block)
        except np.linalg.LinAlgError:
            errors.append(f"study {sid}: covariance block is not positive definite")
        block.setflags(write=False)
        studies.append(Study(id=sid, design=design, contrasts=contrasts))
        blocks.append(block)

    if errors:
        raise ValidationError(errors)

    treatments = tuple(Treatment(id=t, index=i) for i, t in enumerate(order))
    return EvidenceNetwork(treatments=treatments, studies=tuple(studies),
                           sigma=SamplingCovariance(blocks=tuple(blocks)), reference=reference)


def read_network(data_path, cov_path=None, arms_path=None, reference: str | None = None) -> EvidenceNetwork:
    """Load a network from CSV files (see ``load_network`` for the schemas)."""

    def read_csv(path):
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))

    return load_network(read_csv(data_path),
                        read_csv(cov_path) if cov_path else (),
                        read_csv(arms_path) if arms_path else (),
                        reference=reference)


def direct_comparison_pairs(network: EvidenceNetwork) -> dict[tuple[int, int], set[str]]:
    """Treatment-index pairs compared within at least one study, with study ids."""
    pairs: dict[tuple[int, int], set[str]] = {}
    idx = network._index_map()
    for s in network.studies:
        arm_idx = sorted(idx[t] for t in s.design)
        for i in range(len(arm_idx)):
            for j in range(i + 1, len(arm_idx)):
                pairs.setdefault((arm_idx[i], arm_idx[j]), set()).add(s.id)
    return pairs


def prune_disconnected(network: EvidenceNetwork) -> tuple[EvidenceNetwork, tuple[str, ...]]:
    """Keep the component holding the reference; report removed treatments."""
    idx = network._index_map()
    adjacency: dict[int, set[int]] = {t.index: set() for t in network.treatments}
    for pair in direct_comparison_pairs(network):
        adjacency[pair[0]].add(pair[1])
        adjacency[pair[1]].add(pair[0])

    if not adjacency[0]:
        raise ValidationError([f"reference treatment {network.reference!r} has no comparisons"])

    seen = {0}
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in sorted(adjacency[u]):
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt

    removed = tuple(t.id for t in network.treatments if t.index not in seen)
    if not removed:
        return network, ()

    kept_ids = {t.id for t in network.treatments if t.index in seen}
    records = []
    for s in network.studies:
        if s.design[0] in kept_ids:  # a study's arms always share one component
            for c in s.contrasts:
                records.append({"study": s.id, "t1": c.t1, "t2": c.t2, "y": c.y, "se": c.se})
    cov_records = []
    for s, block in zip(network.studies, network.sigma.blocks):
        if s.design[0] in kept_ids:
            k = block.shape[0]
            for i in range(k):
                for j in range(i + 1, k):
                    cov_records.append({"study": s.id, "row": i + 1, "col": j + 1, "cov": block[i, j]})
    pruned = load_network(records, cov_records, reference=network.reference)
    return pruned, removed


def canonical_dump(network: EvidenceNetwork) -> str:
    """Deterministic structured-text dump; reloadable via ``parse_canonical``."""
    out = io.StringIO()
    out.write("# network\n")
    out.write(f"reference,{network.reference}\n")
    out.write("treatments," + ",".join(network.treatment_ids) + "\n")
    out.write("# contrasts\n")
    out.write(",".join(CONTRAST_COLUMNS) + "\n")
    for s in network.studies:
        for c in s.contrasts:
            out.write(f"{s.id},{c.t1},{c.t2},{c.y!r},{c.se!r}\n")
    out.write("# covariance\n")
    out.write(",".join(COV_COLUMNS) + "\n")
    for s, block in zip(network.studies, network.sigma.blocks):
        k = block.shape[0]
        for i in range(k):
            for j in range(i + 1, k):
                out.write(f"{s.id},{i + 1},{j + 1},{block[i, j]!r}\n")
    return out.getvalue()


def parse_canonical(text: str) -> EvidenceNetwork:
    """Reload a ``canonical_dump`` string."""
    lines = text.splitlines()
    try:
        i_contrasts = lines.index("# contrasts")
        i_cov = lines.index("# covariance")
    except ValueError as exc:
        raise ValidationError([f"canonical dump missing section marker: {exc}"]) from None
    reference = lines[1].split(",", 1)[1]
    contrast_rows = list(csv.DictReader(io.StringIO("\n".join(lines[i_contrasts + 1 : i_cov]))))
    cov_rows = list(csv.DictReader(io.StringIO("\n".join(lines[i_cov + 1 :]))))
    return load_network(contrast_rows, cov_rows, reference=reference)
