"""Design matrices for the contrast-level model y = X mu + Z b (+ noise).

X maps the T - 1 basic contrasts (reference vs each other treatment) onto the
observed comparisons: a comparison between non-reference treatments is the
difference of the two basic contrasts involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import EvidenceNetwork


@dataclass(frozen=True, eq=False)
class DesignMatrixX:
    entries: np.ndarray  # N x (T - 1), values in {-1, 0, 1}
    columns: tuple[str, ...]  # basic-contrast labels, reference first


def contrast_row(n_treatments: int, i1: int, i2: int) -> np.ndarray:
    """X row for the comparison of treatment index i2 relative to i1."""
    if i1 == i2:
        raise ValueError("a contrast needs two distinct treatments")
    row = np.zeros(n_treatments - 1)
    if i2 != 0:
        row[i2 - 1] += 1.0
    if i1 != 0:
        row[i1 - 1] -= 1.0
    return row


def build_design_matrix(network: EvidenceNetwork) -> DesignMatrixX:
    idx = {t.id: t.index for t in network.treatments}
    ids = network.treatment_ids
    rows = []
    for _, c in network.observations():
        if c.t1 not in idx or c.t2 not in idx:
            raise ValueError(f"contrast {c.t1}-{c.t2} references a treatment "
                             "absent from the network")
        rows.append(contrast_row(network.n_treatments, idx[c.t1], idx[c.t2]))
    entries = np.array(rows) if rows else np.zeros((0, network.n_treatments - 1))
    entries.setflags(write=False)
    columns = tuple(f"{ids[0]}-{t}" for t in ids[1:])
    return DesignMatrixX(entries=entries, columns=columns)


def linear_predictor(X: np.ndarray, mu: np.ndarray,
                     Z: np.ndarray | None = None, b: np.ndarray | None = None) -> np.ndarray:
    """Mean of y at (mu, b); random effects and errors are the sampler's."""
    mu = np.asarray(mu, dtype=float)
    if X.shape[1] != mu.shape[0]:
        raise ValueError(f"X has {X.shape[1]} columns but mu has length {mu.shape[0]}")
    out = X @ mu
    if Z is not None and Z.shape[1]:
        if b is None:
            raise ValueError("Z given without b")
        b = np.asarray(b, dtype=float)
        if Z.shape[0] != X.shape[0] or Z.shape[1] != b.shape[0]:
            raise ValueError(f"Z is {Z.shape} but X has {X.shape[0]} rows and b length {b.shape[0]}")
        out = out + Z @ b
    return out


def matrix_dump(entries: np.ndarray, columns: tuple[str, ...], row_labels) -> str:
    """Delimited text dump with labeled columns, for golden-file tests."""
    lines = ["row," + ",".join(columns)]
    for label, row in zip(row_labels, entries):
        lines.append(label + "," + ",".join(f"{int(v):d}" for v in row))
    return "\n".join(lines) + "\n"
