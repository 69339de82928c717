"""Comparison-graph structure and automatic inconsistency-factor placement.

Three placement methods produce an ``InconsistencySpec`` (labeled factors
plus the N x p index matrix Z):

* ``place_lu_ades`` - one factor per independent closed loop, attached to the
  loop's distinguishing non-tree edge;
* ``place_design_by_treatment`` - one factor per (design, duplicated
  comparison direction), covering loop and design inconsistency;
* ``place_jackson`` - one factor per design whose evidence duplicates what
  earlier designs already provide (design-level attachment).

All orderings are canonical (treatment index order, sorted designs), so two
runs on the same canonical network produce byte-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import build_design_matrix
from .network import EvidenceNetwork, direct_comparison_pairs


@dataclass(frozen=True, eq=False)
class ComparisonGraph:
    nodes: tuple[int, ...]
    # unordered index pair -> (study multiplicity, designs containing the pair)
    edges: dict

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, u: int) -> list[int]:
        out = [b if a == u else a for (a, b) in self.edges if u in (a, b)]
        return sorted(out)


def comparison_graph(network: EvidenceNetwork) -> ComparisonGraph:
    """Graph with one edge per treatment pair compared in at least one study."""
    pair_studies = direct_comparison_pairs(network)
    design_of = {s.id: s.design for s in network.studies}
    edges = {}
    for pair in sorted(pair_studies):
        studies = pair_studies[pair]
        designs = frozenset(design_of[sid] for sid in studies)
        edges[pair] = (len(studies), designs)
    return ComparisonGraph(nodes=tuple(range(network.n_treatments)), edges=edges)


def find_bridges(graph: ComparisonGraph) -> set[tuple[int, int]]:
    """Edges whose removal disconnects the graph (simple-graph cut edges)."""
    adjacency: dict[int, list[int]] = {u: [] for u in graph.nodes}
    for a, b in graph.edges:
        adjacency[a].append(b)
        adjacency[b].append(a)

    order = {}
    low = {}
    bridges: set[tuple[int, int]] = set()
    counter = 0
    for root in graph.nodes:
        if root in order:
            continue
        # iterative DFS, tracking the edge to the parent
        stack = [(root, None, iter(sorted(adjacency[root])))]
        order[root] = low[root] = counter
        counter += 1
        while stack:
            u, parent, it = stack[-1]
            advanced = False
            for v in it:
                if v not in order:
                    order[v] = low[v] = counter
                    counter += 1
                    stack.append((v, u, iter(sorted(adjacency[v]))))
                    advanced = True
                    break
                elif v != parent:
                    low[u] = min(low[u], order[v])
            if not advanced:
                stack.pop()
                if parent is not None:
                    low[parent] = min(low[parent], low[u])
                    if low[u] > order[parent]:
                        bridges.add((min(u, parent), max(u, parent)))
        # a repeated parent edge cannot occur: edges are simple
    return bridges


@dataclass(frozen=True)
class LoopSet:
    """Cycle basis of the comparison graph."""

    loops: tuple[tuple[int, ...], ...]
    chords: tuple[tuple[int, int], ...]  # distinguishing non-tree edge per loop

    def __len__(self) -> int:
        return len(self.loops)


def _bfs_tree(graph: ComparisonGraph, root: int) -> dict[int, int | None]:
    """Parent map of a BFS spanning tree, visiting neighbors in index order."""
    parent: dict[int, int | None] = {root: None}
    frontier = [root]
    while frontier:
        nxt = []
        for u in frontier:
            for v in graph.neighbors(u):
                if v not in parent:
                    parent[v] = u
                    nxt.append(v)
        frontier = nxt
    return parent


def _canonical_cycle(nodes: list[int]) -> tuple[int, ...]:
    # rotate to start at the smallest node, reflect toward the smaller neighbor
    k = len(nodes)
    start = nodes.index(min(nodes))
    rotated = nodes[start:] + nodes[:start]
    if rotated[1] > rotated[-1]:
        rotated = [rotated[0]] + rotated[1:][::-1]
    return tuple(rotated)


def independent_loops(graph: ComparisonGraph, root: int = 0) -> LoopSet:
    """Cycle basis from a BFS spanning tree; one loop per non-tree edge."""
    parent = _bfs_tree(graph, root)
    missing = [u for u in graph.nodes if u not in parent]
    if missing:
        raise ValueError(f"graph is not connected: nodes {missing} unreachable from {root}")
    tree_edges = {(min(u, p), max(u, p)) for u, p in parent.items() if p is not None}

    loops = []
    chords = []
    for edge in sorted(graph.edges):
        if edge in tree_edges:
            continue
        u, v = edge
        path_u = [u]
        while parent[path_u[-1]] is not None:
            path_u.append(parent[path_u[-1]])
        path_v = [v]
        while parent[path_v[-1]] is not None:
            path_v.append(parent[path_v[-1]])
        on_u = set(path_u)
        lca = next(x for x in path_v if x in on_u)
        cycle = path_u[: path_u.index(lca) + 1] + path_v[: path_v.index(lca)][::-1]
        loops.append(_canonical_cycle(cycle))
        chords.append(edge)
    return LoopSet(loops=tuple(loops), chords=tuple(chords))


@dataclass(frozen=True)
class Factor:
    """One inconsistency factor: a labeled column of Z."""

    label: str
    kind: str  # "loop" or "design"
    pair: tuple[str, str] | None = None
    loop: tuple[str, ...] | None = None
    design: tuple[str, ...] | None = None


@dataclass(frozen=True, eq=False)
class InconsistencySpec:
    method: str
    factors: tuple[Factor, ...]
    Z: np.ndarray  # N x p, entries in {-1, 0, 1}

    @property
    def p(self) -> int:
        return len(self.factors)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(f.label for f in self.factors)


def _multiarm_only_pairs(graph: ComparisonGraph) -> set[tuple[int, int]]:
    # comparisons whose evidence sits entirely inside a single multi-arm design
    out = set()
    for pair, (_, designs) in graph.edges.items():
        if len(designs) == 1 and len(next(iter(designs))) >= 3:
            out.add(pair)
    return out


def _loop_factor_column(network: EvidenceNetwork, pair: tuple[int, int],
                        two_arm_only: bool) -> np.ndarray:
    idx = {t.id: t.index for t in network.treatments}
    col = np.zeros(network.n_contrasts)
    for row, (s, c) in enumerate(network.observations()):
        if two_arm_only and s.n_arms > 2:
            continue
        if (idx[c.t1], idx[c.t2]) == pair:
            col[row] = 1.0
        elif (idx[c.t2], idx[c.t1]) == pair:
            col[row] = -1.0  # cannot occur on canonical networks
    return col


def _finalize(network: EvidenceNetwork, method: str, factors: list[Factor],
              columns: list[np.ndarray]) -> InconsistencySpec:
    p = len(factors)
    Z = np.column_stack(columns) if p else np.zeros((network.n_contrasts, 0))
    Z.setflags(write=False)
    X = build_design_matrix(network).entries
    expected = X.shape[1] + p
    got = np.linalg.matrix_rank(np.hstack([X, Z])) if p else np.linalg.matrix_rank(X)
    if got != expected:
        raise RuntimeError(f"placement produced a rank-deficient [X|Z]: rank {got} != {expected}")
    return InconsistencySpec(method=method, factors=tuple(factors), Z=Z)


def place_lu_ades(network: EvidenceNetwork) -> InconsistencySpec:
    """One factor per independent loop, on the loop's non-tree comparison.

    Comparisons evidenced only by a single multi-arm design are consistent by
    construction and never receive a factor; when a loop's distinguishing edge
    is such a comparison the factor falls back to the loop's next eligible
    non-reference comparison in canonical pair order. A loop with no eligible
    comparison contributes nothing. Factor columns carry +1 on the two-arm
    rows observing the chosen comparison (multi-arm trials stay internally
    consistent); a comparison observed only inside multi-arm designs falls
    back to whatever rows observe it.
    """
    graph = comparison_graph(network)
    loops = independent_loops(graph, root=0)
    excluded = _multiarm_only_pairs(graph)
    ids = network.treatment_ids

    factors: list[Factor] = []
    columns: list[np.ndarray] = []
    used: set[tuple[int, int]] = set()
    for loop, chord in zip(loops.loops, loops.chords):
        k = len(loop)
        loop_edges = sorted(tuple(sorted((loop[i], loop[(i + 1) % k]))) for i in range(k))
        candidates = [chord] + [e for e in loop_edges if e != chord]
        pair = col = None
        for edge in candidates:
            if 0 in edge or edge in excluded or edge in used:
                continue
            col = _loop_factor_column(network, edge, two_arm_only=True)
            if not col.any():
                col = _loop_factor_column(network, edge, two_arm_only=False)
            if col.any():
                pair = edge
                break
        if pair is None:
            continue
        used.add(pair)
        pair_ids = (ids[pair[0]], ids[pair[1]])
        loop_ids = tuple(ids[n] for n in loop)
        factors.append(Factor(label=f"loop:{'-'.join(loop_ids)}@{pair_ids[0]}-{pair_ids[1]}",
                              kind="loop", pair=pair_ids, loop=loop_ids))
        columns.append(col)
    return _finalize(network, "lu-ades", factors, columns)


def _direction_vector(n_treatments: int, a: int, b: int) -> np.ndarray:
    # comparison a->b in basic-parameter coordinates (reference column dropped)
    v = np.zeros(n_treatments - 1)
    if b != 0:
        v[b - 1] += 1.0
    if a != 0:
        v[a - 1] -= 1.0
    return v


class _Span:
    """Incremental span membership over comparison-direction vectors."""

    def __init__(self, dim: int):
        self.basis = np.zeros((0, dim))

    def contains(self, v: np.ndarray) -> bool:
        if self.basis.shape[0] == 0:
            return False
        residual = v - self.basis.T @ np.linalg.lstsq(self.basis.T, v, rcond=None)[0]
        return bool(np.linalg.norm(residual) < 1e-9)

    def add(self, v: np.ndarray) -> None:
        self.basis = np.vstack([self.basis, v])


def _design_rows(network: EvidenceNetwork) -> dict[tuple[str, ...], list[int]]:
    rows: dict[tuple[str, ...], list[int]] = {}
    for row, (s, _) in enumerate(network.observations()):
        rows.setdefault(s.design, []).append(row)
    return rows


def place_design_by_treatment(network: EvidenceNetwork) -> InconsistencySpec:
    """One factor per comparison direction a design duplicates.

    Designs are processed in canonical order; the first design evidencing a
    direction is the consistency baseline, every later design re-evidencing
    it (directly or through the directions it spans) gets a factor. Columns
    that do not extend the rank of [X | Z] are dropped.
    """
    idx = {t.id: t.index for t in network.treatments}
    ids = network.treatment_ids
    designs = sorted({s.design for s in network.studies},
                     key=lambda d: tuple(idx[t] for t in d))
    design_rows = _design_rows(network)
    obs = network.observations()

    X = build_design_matrix(network).entries
    span = _Span(network.n_treatments - 1)
    stacked = X
    factors: list[Factor] = []
    columns: list[np.ndarray] = []
    rank = np.linalg.matrix_rank(X)
    for design in designs:
        anchor = design[0]
        for other in design[1:]:
            v = _direction_vector(network.n_treatments, idx[anchor], idx[other])
            if not span.contains(v):
                span.add(v)
                continue
            col = np.zeros(network.n_contrasts)
            for row in design_rows[design]:
                _, c = obs[row]
                col[row] = (1.0 if c.t2 == other else 0.0) - (1.0 if c.t1 == other else 0.0)
            candidate = np.hstack([stacked, col[:, None]])
            new_rank = np.linalg.matrix_rank(candidate)
            if new_rank == rank:
                continue
            rank = new_rank
            stacked = candidate
            factors.append(Factor(label=f"design:{'-'.join(design)}@{anchor}-{other}",
                                  kind="design", pair=(anchor, other), design=design))
            columns.append(col)
    return _finalize(network, "dbt", factors, columns)


def place_jackson(network: EvidenceNetwork) -> InconsistencySpec:
    """One design-level factor per design duplicating earlier evidence.

    All rows of a flagged design share a single factor. Refuses two-arm-only
    networks, where the construction is identical to design-by-treatment.
    """
    if all(s.n_arms == 2 for s in network.studies):
        raise ValueError("all studies are two-arm: the design-level spec equals "
                         "design-by-treatment; use place_design_by_treatment")
    idx = {t.id: t.index for t in network.treatments}
    designs = sorted({s.design for s in network.studies},
                     key=lambda d: tuple(idx[t] for t in d))
    design_rows = _design_rows(network)

    X = build_design_matrix(network).entries
    span = _Span(network.n_treatments - 1)
    stacked = X
    rank = np.linalg.matrix_rank(X)
    factors: list[Factor] = []
    columns: list[np.ndarray] = []
    for design in designs:
        anchor = design[0]
        vs = [_direction_vector(network.n_treatments, idx[anchor], idx[other])
              for other in design[1:]]
        duplicates = any(span.contains(v) for v in vs)
        for v in vs:
            if not span.contains(v):
                span.add(v)
        if not duplicates:
            continue
        col = np.zeros(network.n_contrasts)
        col[design_rows[design]] = 1.0
        candidate = np.hstack([stacked, col[:, None]])
        new_rank = np.linalg.matrix_rank(candidate)
        if new_rank == rank:
            continue
        rank = new_rank
        stacked = candidate
        factors.append(Factor(label=f"design:{'-'.join(design)}", kind="design", design=design))
        columns.append(col)
    return _finalize(network, "jackson", factors, columns)


PLACEMENT_METHODS = {
    "lu-ades": place_lu_ades,
    "dbt": place_design_by_treatment,
    "jackson": place_jackson,
}


def place_factors(network: EvidenceNetwork, method: str) -> InconsistencySpec:
    try:
        fn = PLACEMENT_METHODS[method]
    except KeyError:
        raise ValueError(f"unknown placement method {method!r}; "
                         f"choose from {sorted(PLACEMENT_METHODS)}") from None
    return fn(network)


def z_dump(spec: InconsistencySpec, network: EvidenceNetwork) -> str:
    """Delimited dump of Z with factor-label header, for audits and goldens."""
    lines = ["row," + ",".join(spec.labels)]
    for row, (s, c) in enumerate(network.observations()):
        entries = ",".join(f"{int(v):d}" for v in spec.Z[row])
        lines.append(f"{s.id}:{c.t1}-{c.t2},{entries}")
    return "\n".join(lines) + "\n"
