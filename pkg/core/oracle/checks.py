from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence

import numpy as np

from core.errors import FaithfulnessViolation
from core.logging_utils import get_logger
from core.oracle.score import (
    LikelihoodCache,
    ScoredHypothesis,
    adjacency_to_parents,
    assignments,
    enumerate_optimum,
    is_canonical,
    minimal_edge_count,
    true_lcg_from_distribution,
)
from core.oracle.system import DiscreteCSSISystem

log = get_logger(__name__)

DEFAULT_LAMBDAS = (1e-4, 1e-3, 1e-2)


@dataclass
class LambdaVerdict:
    lam: float
    optima: List[ScoredHypothesis]
    refines_contexts: bool
    graphs_are_true_lcgs: bool
    sparsity_violations: int

    @property
    def passed(self) -> bool:
        return self.refines_contexts and self.graphs_are_true_lcgs and self.sparsity_violations == 0

    def to_record(self, system: DiscreteCSSISystem, k: int) -> Dict[str, Any]:
        return {
            "kind": "oracle",
            "system": system.name,
            "k": k,
            "lambda": self.lam,
            "optima": len(self.optima),
            "score": self.optima[0].score,
            "refines_contexts": self.refines_contexts,
            "graphs_are_true_lcgs": self.graphs_are_true_lcgs,
            "sparsity_violations": self.sparsity_violations,
            "passed": self.passed,
        }


@dataclass
class OracleReport:
    system: DiscreteCSSISystem
    k: int
    verdicts: List[LambdaVerdict]
    canonical: Dict[str, bool] = field(default_factory=dict)
    faithfulness_errors: List[str] = field(default_factory=list)

    @property
    def eta(self) -> float | None:
        """Largest tested λ (from the smallest upward, without a failure in between) that passes every check."""
        best = None
        for v in sorted(self.verdicts, key=lambda v: v.lam):
            if not v.passed:
                break
            best = v.lam
        return best

    def to_records(self) -> List[Dict[str, Any]]:
        rows = [v.to_record(self.system, self.k) for v in self.verdicts]
        rows.append(
            {
                "kind": "oracle_summary",
                "system": self.system.name,
                "k": self.k,
                "eta": self.eta,
                "canonical": self.canonical,
                "faithfulness_errors": self.faithfulness_errors,
            }
        )
        return rows


def refines_contexts(system: DiscreteCSSISystem, hyp: ScoredHypothesis) -> bool:
    """Every subgroup with positive mass lies inside one context, ignoring zero-mass cells."""
    if not system.contexts:
        return True
    labels = system.context_labels()
    for cells in hyp.subgroups():
        live = [c for c in cells if system.marginal[c] > 0]
        if len({int(labels[c]) for c in live}) > 1:
            return False
    return True


def graphs_are_true_lcgs(system: DiscreteCSSISystem, hyp: ScoredHypothesis) -> bool:
    """
    Each positive-mass subgroup's optimal parent sets are exactly its true LCG,
    with no tied alternative. A faithfulness violation on a subgroup fails the check.
    """
    for z, cells in enumerate(hyp.subgroups()):
        if system.prob(sorted(cells)) <= 0:
            continue
        try:
            truth = adjacency_to_parents(true_lcg_from_distribution(system, sorted(cells)))
        except FaithfulnessViolation:
            return False
        alternatives = hyp.alternatives[z] if hyp.alternatives else [(p,) for p in adjacency_to_parents(hyp.graphs[z])]
        if any(tuple(ties) != (truth[j],) for j, ties in enumerate(alternatives)):
            return False
    return True


def expected_edges(system: DiscreteCSSISystem, assignment: np.ndarray) -> float:
    """E[|G_z|] of a decomposition when every subgroup uses its sparsest exact graph."""
    total = 0.0
    for z in range(int(assignment.max()) + 1):
        cells = np.flatnonzero(assignment == z).tolist()
        mass = system.prob(cells)
        if mass > 0:
            total += mass * minimal_edge_count(system, cells)
    return total


def sparsity_violations(system: DiscreteCSSISystem, k: int, optimum: ScoredHypothesis) -> int:
    """Decompositions whose true-LCG expected edge count undercuts the optimum's."""
    weights = [system.prob(sorted(c)) for c in optimum.subgroups()]
    best = sum(w * int(g.entries.sum()) for w, g in zip(weights, optimum.graphs))
    return sum(
        1 for assign in assignments(system.n_cells, k) if expected_edges(system, np.array(assign)) < best - 1e-12
    )


def check_system(
    system: DiscreteCSSISystem,
    k: int | None = None,
    lambdas: Sequence[float] = DEFAULT_LAMBDAS,
) -> OracleReport:
    """
    Enumerate the optimum for each λ and check that its subgroups refine the
    contexts, that its graphs are the subgroups' true LCGs and that no alternative
    decomposition is sparser in expectation. K defaults to the number of contexts.
    """
    k = k or max(len(system.contexts), 1)
    cache = LikelihoodCache(system)
    report = OracleReport(system, k, [])
    for ctx in system.contexts:
        try:
            report.canonical[ctx.name] = is_canonical(system, ctx.name)
        except FaithfulnessViolation as err:
            report.canonical[ctx.name] = False
            report.faithfulness_errors.append(str(err))
        if ctx.canonical and not report.canonical[ctx.name]:
            log.warning("%s: context %s is flagged canonical but fails the check", system.name, ctx.name)
    try:
        true_lcg_from_distribution(system)
    except FaithfulnessViolation as err:
        report.faithfulness_errors.append(str(err))

    for lam in lambdas:
        optima = enumerate_optimum(system, k, lam, cache)
        verdict = LambdaVerdict(
            lam=lam,
            optima=optima,
            refines_contexts=all(refines_contexts(system, h) for h in optima),
            graphs_are_true_lcgs=all(graphs_are_true_lcgs(system, h) for h in optima),
            sparsity_violations=sparsity_violations(system, k, optima[0]),
        )
        log.info(
            "%s K=%d λ=%g: %d optima, refines=%s, true_lcgs=%s, sparser=%d",
            system.name,
            k,
            lam,
            len(optima),
            verdict.refines_contexts,
            verdict.graphs_are_true_lcgs,
            verdict.sparsity_violations,
        )
        report.verdicts.append(verdict)
    return report
