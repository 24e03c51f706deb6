from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterator, List, Sequence, Tuple

import numpy as np

from core.errors import EnumerationRefused, FaithfulnessViolation, ParameterError
from core.graphs.adjacency import AdjacencyMatrix
from core.oracle.system import DiscreteCSSISystem

TIE_TOL = 1e-12
MAX_CELLS = 8
MAX_K = 3
MAX_GRAPH_SPACE = 4096

Cells = FrozenSet[int]


def _popcount(mask: int) -> int:
    return bin(mask).count("1")


def _mask_inputs(mask: int, n_inputs: int) -> List[int]:
    return [i for i in range(n_inputs) if mask >> i & 1]


def parents_to_adjacency(system: DiscreteCSSISystem, parents: Sequence[int]) -> AdjacencyMatrix:
    """Per-output parent bitmasks → adjacency with rows = inputs and columns = outputs."""
    n_out = system.n_outputs
    entries = np.zeros((system.n_inputs, n_out), dtype=np.int8)
    for j, mask in enumerate(parents):
        entries[_mask_inputs(mask, system.n_inputs), j] = 1
    return AdjacencyMatrix(entries, n_out, system.n_inputs - n_out)


def adjacency_to_parents(graph: AdjacencyMatrix | np.ndarray) -> Tuple[int, ...]:
    entries = graph.entries if isinstance(graph, AdjacencyMatrix) else np.asarray(graph)
    return tuple(sum(1 << int(i) for i in np.flatnonzero(entries[:, j])) for j in range(entries.shape[1]))


class LikelihoodCache:
    """
    Expected plug-in log-likelihood of one output given a parent set within a set
    of cells. Independent of λ, so one cache serves a whole sweep.
    """

    def __init__(self, system: DiscreteCSSISystem):
        self.system = system
        self._values: Dict[Tuple[Cells, int, int], float] = {}

    def __call__(self, cells: Cells, output: int, mask: int) -> float:
        key = (cells, output, mask)
        if key not in self._values:
            self._values[key] = self._compute(cells, output, mask)
        return self._values[key]

    def _compute(self, cells: Cells, output: int, mask: int) -> float:
        sys = self.system
        table = sys.tables[output]
        cols = _mask_inputs(mask, sys.n_inputs)
        groups: Dict[Tuple[int, ...], List[int]] = {}
        for c in sorted(cells):
            if sys.marginal[c] > 0:
                groups.setdefault(tuple(sys.cells[c, cols]), []).append(c)
        total = 0.0
        for members in groups.values():
            w = sys.marginal[members]
            q = (w @ table[members]) / w.sum()
            for c in members:
                p = table[c]
                pos = p > 0
                total += float(sys.marginal[c] * np.sum(p[pos] * np.log(q[pos])))
        return total


@dataclass
class ScoredHypothesis:
    """
    A decomposition of the input cells into subgroups (assignment[c] = z) with one
    graph per subgroup. `alternatives[z][j]` lists every parent set tied for the
    optimum of output j in subgroup z (filled by enumerate_optimum).
    """

    assignment: np.ndarray
    graphs: List[AdjacencyMatrix]
    score: float
    lam: float
    alternatives: List[List[Tuple[int, ...]]] = field(default_factory=list)

    def subgroups(self) -> List[Cells]:
        return [frozenset(np.flatnonzero(self.assignment == z).tolist()) for z in range(len(self.graphs))]

    def to_record(self, system: DiscreteCSSISystem) -> Dict:
        return {
            "kind": "hypothesis",
            "system": system.name,
            "lambda": self.lam,
            "score": self.score,
            "assignment": self.assignment.tolist(),
            "graphs": [g.entries.tolist() for g in self.graphs],
        }


def _check_hypothesis(system: DiscreteCSSISystem, assignment: np.ndarray, graphs: Sequence) -> None:
    if assignment.shape != (system.n_cells,):
        raise ParameterError(f"assignment must cover all {system.n_cells} cells")
    if assignment.min() < 0 or assignment.max() >= len(graphs):
        raise ParameterError("assignment labels must index the graph list")
    for g in graphs:
        shape = g.entries.shape if isinstance(g, AdjacencyMatrix) else np.shape(g)
        if shape != (system.n_inputs, system.n_outputs):
            raise ParameterError(f"graphs must be {system.n_inputs}x{system.n_outputs}, got {shape}")


def exact_score(
    system: DiscreteCSSISystem,
    assignment: Sequence[int],
    graphs: Sequence[AdjacencyMatrix | np.ndarray],
    lam: float,
    cache: LikelihoodCache | None = None,
) -> float:
    """
    Regularized likelihood of a hypothesis with the tabular MLE plugged in:
    Σ_z [Σ_j E log q_j(y_j | parents, z) − λ·p(E_z)·|G_z|]. Zero-mass subgroups add 0.
    """
    assignment = np.asarray(assignment, dtype=np.int64)
    _check_hypothesis(system, assignment, graphs)
    cache = cache or LikelihoodCache(system)
    total = 0.0
    for z, graph in enumerate(graphs):
        cells = frozenset(np.flatnonzero(assignment == z).tolist())
        mass = system.prob(sorted(cells))
        if mass <= 0:
            continue
        parents = adjacency_to_parents(graph)
        total += sum(cache(cells, j, mask) for j, mask in enumerate(parents))
        total -= lam * mass * sum(_popcount(m) for m in parents)
    return total


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------


def size_report(system: DiscreteCSSISystem, k: int) -> Dict[str, int]:
    return {
        "cells": system.n_cells,
        "max_cells": MAX_CELLS,
        "k": k,
        "max_k": MAX_K,
        "graph_space": 2 ** (system.n_inputs * system.n_outputs),
        "max_graph_space": MAX_GRAPH_SPACE,
    }


def assignments(n_cells: int, k: int) -> Iterator[Tuple[int, ...]]:
    """Every partition of the cells into at most k labelled-by-first-use subgroups."""

    def grow(prefix: List[int], used: int) -> Iterator[Tuple[int, ...]]:
        if len(prefix) == n_cells:
            yield tuple(prefix)
            return
        for label in range(min(used + 1, k)):
            prefix.append(label)
            yield from grow(prefix, max(used, label + 1))
            prefix.pop()

    yield from grow([], 0)


def _best_parent_sets(
    system: DiscreteCSSISystem, cells: Cells, lam: float, cache: LikelihoodCache
) -> Tuple[float, List[Tuple[int, ...]]]:
    """Best total over outputs and, per output, all tied parent bitmasks (fewest edges first)."""
    mass = system.prob(sorted(cells))
    masks = range(2**system.n_inputs)
    if mass <= 0:
        return 0.0, [tuple(masks) for _ in range(system.n_outputs)]
    total, ties = 0.0, []
    for j in range(system.n_outputs):
        values = {m: cache(cells, j, m) - lam * mass * _popcount(m) for m in masks}
        best = max(values.values())
        total += best
        ties.append(tuple(sorted((m for m, v in values.items() if v >= best - TIE_TOL), key=lambda m: (_popcount(m), m))))
    return total, ties


def enumerate_optimum(
    system: DiscreteCSSISystem, k: int, lam: float, cache: LikelihoodCache | None = None
) -> List[ScoredHypothesis]:
    """
    Exhaustive maximization of the regularized score over decompositions into at
    most k subgroups and per-subgroup graphs. The score separates over subgroups
    and outputs, so each subgroup's best graph is found independently.

    Returns every optimal decomposition (ties within 1e-12), one hypothesis per
    decomposition, up to relabeling of subgroup indices.
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    report = size_report(system, k)
    if report["cells"] > MAX_CELLS or k > MAX_K or report["graph_space"] > MAX_GRAPH_SPACE:
        raise EnumerationRefused(
            f"{system.name}: domain too large to enumerate ({report['cells']} cells, K={k}, "
            f"{report['graph_space']} graphs per subgroup)",
            report,
        )
    cache = cache or LikelihoodCache(system)
    per_subgroup: Dict[Cells, Tuple[float, List[Tuple[int, ...]]]] = {}
    scored: List[Tuple[float, Tuple[int, ...]]] = []
    for assign in assignments(system.n_cells, k):
        arr = np.array(assign)
        total = 0.0
        for z in range(max(assign) + 1):
            cells = frozenset(np.flatnonzero(arr == z).tolist())
            if cells not in per_subgroup:
                per_subgroup[cells] = _best_parent_sets(system, cells, lam, cache)
            total += per_subgroup[cells][0]
        scored.append((total, assign))

    best = max(s for s, _ in scored)
    optima = []
    for score, assign in scored:
        if score < best - TIE_TOL:
            continue
        arr = np.array(assign, dtype=np.int64)
        alternatives = [per_subgroup[frozenset(np.flatnonzero(arr == z).tolist())][1] for z in range(max(assign) + 1)]
        graphs = [parents_to_adjacency(system, [ties[0] for ties in alt]) for alt in alternatives]
        optima.append(ScoredHypothesis(arr, graphs, score, lam, alternatives))
    return optima


# ---------------------------------------------------------------------------
# Local independence
# ---------------------------------------------------------------------------


def _resolve_cells(system: DiscreteCSSISystem, context) -> List[int]:
    if context is None:
        return list(range(system.n_cells))
    if isinstance(context, str):
        return system.context_cells(context).tolist()
    return sorted(int(c) for c in context)


def valid_parent_sets(system: DiscreteCSSISystem, cells: Sequence[int], output: int) -> List[int]:
    """Parent bitmasks T for which p(y_j | cell) depends on the cell only through x_T."""
    live = [c for c in cells if system.marginal[c] > 0]
    table = system.tables[output]
    valid = []
    for mask in range(2**system.n_inputs):
        cols = _mask_inputs(mask, system.n_inputs)
        seen: Dict[Tuple[int, ...], np.ndarray] = {}
        ok = True
        for c in live:
            key = tuple(system.cells[c, cols])
            if key in seen and np.max(np.abs(seen[key] - table[c])) > TIE_TOL:
                ok = False
                break
            seen.setdefault(key, table[c])
        if ok:
            valid.append(mask)
    return valid


def minimal_parent_sets(system: DiscreteCSSISystem, cells: Sequence[int], output: int) -> List[int]:
    valid = valid_parent_sets(system, cells, output)
    return [m for m in valid if not any(o != m and o & m == o for o in valid)]


def true_lcg_from_distribution(system: DiscreteCSSISystem, context=None) -> AdjacencyMatrix:
    """
    True local causal graph on a context (a context name, a collection of cell
    indices, or None for the whole domain): for every output, the unique minimal
    input set that makes its conditional constant across the context.
    """
    cells = _resolve_cells(system, context)
    if system.prob(cells) <= 0:
        raise ParameterError("context has zero probability")
    parents = []
    for j in range(system.n_outputs):
        minimal = minimal_parent_sets(system, cells, j)
        if len(minimal) != 1:
            options = [[f"X{i + 1}" for i in _mask_inputs(m, system.n_inputs)] for m in minimal]
            raise FaithfulnessViolation(f"{system.name}: Y{j + 1} has several minimal parent sets {options}")
        parents.append(minimal[0])
    return parents_to_adjacency(system, parents)


def minimal_edge_count(system: DiscreteCSSISystem, cells: Sequence[int]) -> int:
    """Fewest edges of any graph under which the cells' conditionals are exact (no faithfulness needed)."""
    return sum(min(_popcount(m) for m in valid_parent_sets(system, cells, j)) for j in range(system.n_outputs))


def is_canonical(system: DiscreteCSSISystem, context: str) -> bool:
    """
    Finite-domain canonicity: fixing any input outside the context's parent sets
    to any value (with positive mass left) leaves the LCG unchanged.
    """
    cells = _resolve_cells(system, context)
    graph = true_lcg_from_distribution(system, cells)
    used = set(np.flatnonzero(graph.entries.any(axis=1)).tolist())
    for i in range(system.n_inputs):
        if i in used:
            continue
        for value in range(system.input_cards[i]):
            sub = [c for c in cells if system.cells[c, i] == value]
            if system.prob(sub) <= 0:
                continue
            if true_lcg_from_distribution(system, sub) != graph:
                return False
    return True
