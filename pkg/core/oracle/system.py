from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from core.errors import SystemFormatError

SYSTEMS_DIR = Path(__file__).resolve().parent / "systems"
MAX_CARDINALITY = 4
_TOL = 1e-9


@dataclass(frozen=True)
class ContextDef:
    """A context given by fixed input values, e.g. {0: 1} for X1=1. Empty means the whole domain."""

    name: str
    fixed: Tuple[Tuple[int, int], ...]
    canonical: bool = False

    def contains(self, cell: Sequence[int]) -> bool:
        return all(cell[i] == v for i, v in self.fixed)


@dataclass
class DiscreteCSSISystem:
    """
    Tabular transition system over inputs X (state and action variables) and
    outputs Y (next-state variables), with an exact marginal over input cells.

    `tables[j][c]` is p(Y_j | cell c); cells enumerate X in row-major product order.
    """

    name: str
    input_cards: Tuple[int, ...]
    output_cards: Tuple[int, ...]
    marginal: np.ndarray
    tables: List[np.ndarray]
    contexts: Tuple[ContextDef, ...] = ()
    cells: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        cards = self.input_cards + self.output_cards
        if not self.input_cards or not self.output_cards:
            raise SystemFormatError(f"{self.name}: needs at least one input and one output")
        if any(c < 2 or c > MAX_CARDINALITY for c in cards):
            raise SystemFormatError(f"{self.name}: cardinalities must lie in [2, {MAX_CARDINALITY}]")
        if len(self.input_cards) < len(self.output_cards):
            raise SystemFormatError(f"{self.name}: inputs (state and action) must include every output variable")
        self.cells = np.array(list(itertools.product(*[range(c) for c in self.input_cards])), dtype=np.int64)
        n = len(self.cells)
        self.marginal = np.asarray(self.marginal, dtype=np.float64)
        if self.marginal.shape != (n,) or np.any(self.marginal < 0) or abs(self.marginal.sum() - 1.0) > _TOL:
            raise SystemFormatError(f"{self.name}: marginal must be {n} nonnegative values summing to 1")
        for j, (table, card) in enumerate(zip(self.tables, self.output_cards)):
            if table.shape != (n, card) or np.any(table < 0) or np.any(np.abs(table.sum(axis=1) - 1.0) > _TOL):
                raise SystemFormatError(f"{self.name}: table of Y{j + 1} must be {n}x{card} with rows summing to 1")
        if len(self.tables) != len(self.output_cards):
            raise SystemFormatError(f"{self.name}: one table per output required")
        if self.contexts:
            hits = np.array([[ctx.contains(c) for ctx in self.contexts] for c in self.cells])
            if np.any(hits.sum(axis=1) != 1):
                raise SystemFormatError(f"{self.name}: contexts must partition the input cells")

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_inputs(self) -> int:
        return len(self.input_cards)

    @property
    def n_outputs(self) -> int:
        return len(self.output_cards)

    def context(self, name: str) -> ContextDef:
        for ctx in self.contexts:
            if ctx.name == name:
                return ctx
        raise KeyError(name)

    def context_cells(self, name: str) -> np.ndarray:
        ctx = self.context(name)
        return np.array([i for i, c in enumerate(self.cells) if ctx.contains(c)], dtype=np.int64)

    def context_labels(self) -> np.ndarray:
        """Context index of every cell."""
        return np.array([next(k for k, ctx in enumerate(self.contexts) if ctx.contains(c)) for c in self.cells])

    def prob(self, cells: Sequence[int]) -> float:
        return float(self.marginal[list(cells)].sum()) if len(cells) else 0.0

    def expected_log_likelihood(self) -> float:
        """E[log p(s'|s,a)] under the true tables (Σ over outputs)."""
        total = 0.0
        for table in self.tables:
            with np.errstate(divide="ignore", invalid="ignore"):
                terms = np.where(table > 0, table * np.log(table), 0.0)
            total += float(self.marginal @ terms.sum(axis=1))
        return total


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------
#
#   name gated_copy
#   inputs 2 2                 cardinalities of X1..Xn
#   outputs 2                  cardinalities of Y1..Ym
#   marginal uniform           or one probability per cell, product order
#   context off canonical X1=0
#   context on canonical X1=1
#   cpd Y1 0 * : 0.5 0.5       input values per X ('*' matches any), then probabilities
#
# Later cpd lines override earlier ones; every cell must end up covered.


def _parse_fixed(tokens: Sequence[str], n_inputs: int, lineno: int) -> Tuple[Tuple[int, int], ...]:
    fixed = []
    for tok in tokens:
        var, eq, value = tok.partition("=")
        if not eq or not var.startswith("X") or not var[1:].isdigit():
            raise SystemFormatError(f"line {lineno}: expected Xi=v, got {tok!r}")
        idx = int(var[1:]) - 1
        if not 0 <= idx < n_inputs:
            raise SystemFormatError(f"line {lineno}: unknown input {var}")
        fixed.append((idx, int(value)))
    return tuple(fixed)


def parse_system(text: str, default_name: str = "system") -> DiscreteCSSISystem:
    name = default_name
    inputs: Tuple[int, ...] | None = None
    outputs: Tuple[int, ...] | None = None
    marginal_spec: List[str] | None = None
    contexts: List[ContextDef] = []
    cpds: List[Tuple[int, int, List[str], List[float]]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        try:
            if head == "name":
                name = rest[0]
            elif head == "inputs":
                inputs = tuple(int(t) for t in rest)
            elif head == "outputs":
                outputs = tuple(int(t) for t in rest)
            elif head == "marginal":
                marginal_spec = rest
            elif head == "context":
                if inputs is None:
                    raise SystemFormatError(f"line {lineno}: 'inputs' must come before contexts")
                canonical = len(rest) > 1 and rest[1] == "canonical"
                fixed = _parse_fixed(rest[2:] if canonical else rest[1:], len(inputs), lineno)
                contexts.append(ContextDef(rest[0], fixed, canonical))
            elif head == "cpd":
                var = rest[0]
                if not var.startswith("Y") or not var[1:].isdigit():
                    raise SystemFormatError(f"line {lineno}: expected an output name Yj, got {var!r}")
                cell_part, sep, prob_part = " ".join(rest[1:]).partition(":")
                if not sep:
                    raise SystemFormatError(f"line {lineno}: cpd needs ':' before the probabilities")
                cpds.append((lineno, int(var[1:]) - 1, cell_part.split(), [float(p) for p in prob_part.split()]))
            else:
                raise SystemFormatError(f"line {lineno}: unknown directive {head!r}")
        except (IndexError, ValueError) as err:
            if isinstance(err, SystemFormatError):
                raise
            raise SystemFormatError(f"line {lineno}: {err}") from err

    if inputs is None or outputs is None:
        raise SystemFormatError("system text needs 'inputs' and 'outputs' lines")
    cells = list(itertools.product(*[range(c) for c in inputs]))
    n = len(cells)

    if marginal_spec is None or marginal_spec == ["uniform"]:
        marginal = np.full(n, 1.0 / n)
    else:
        marginal = np.array([float(p) for p in marginal_spec])

    tables = [np.full((n, card), np.nan) for card in outputs]
    for lineno, j, pattern, probs in cpds:
        if not 0 <= j < len(outputs):
            raise SystemFormatError(f"line {lineno}: unknown output Y{j + 1}")
        if len(pattern) != len(inputs):
            raise SystemFormatError(f"line {lineno}: cell needs {len(inputs)} values, got {len(pattern)}")
        if len(probs) != outputs[j]:
            raise SystemFormatError(f"line {lineno}: Y{j + 1} needs {outputs[j]} probabilities")
        for i, cell in enumerate(cells):
            if all(p == "*" or int(p) == v for p, v in zip(pattern, cell)):
                tables[j][i] = probs
    for j, table in enumerate(tables):
        if np.isnan(table).any():
            raise SystemFormatError(f"{name}: Y{j + 1} has cells without a cpd line")

    return DiscreteCSSISystem(name, inputs, outputs, marginal, tables, tuple(contexts))


def to_text(system: DiscreteCSSISystem) -> str:
    lines = [
        f"name {system.name}",
        "inputs " + " ".join(map(str, system.input_cards)),
        "outputs " + " ".join(map(str, system.output_cards)),
        "marginal " + " ".join(repr(float(p)) for p in system.marginal),
    ]
    for ctx in system.contexts:
        fixed = " ".join(f"X{i + 1}={v}" for i, v in ctx.fixed)
        lines.append(f"context {ctx.name}{' canonical' if ctx.canonical else ''} {fixed}".rstrip())
    for j, table in enumerate(system.tables):
        for cell, row in zip(system.cells, table):
            lines.append(f"cpd Y{j + 1} {' '.join(map(str, cell))} : {' '.join(repr(float(p)) for p in row)}")
    return "\n".join(lines) + "\n"


def load_system(path: str | Path) -> DiscreteCSSISystem:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise SystemFormatError(f"cannot read system file {path}: {err}") from err
    return parse_system(text, default_name=path.stem)


def bundled_systems() -> Dict[str, Path]:
    return {p.stem: p for p in sorted(SYSTEMS_DIR.glob("*.txt"))}


def load_bundled(name: str) -> DiscreteCSSISystem:
    """Load a system shipped in core/oracle/systems (e.g. "gated_copy")."""
    paths = bundled_systems()
    if name not in paths:
        raise SystemFormatError(f"no bundled system {name!r}; available: {sorted(paths)}")
    return load_system(paths[name])


def empirical_system(system: DiscreteCSSISystem, draws: int, rng: np.random.Generator) -> DiscreteCSSISystem:
    """
    Plug-in system estimated from `draws` samples. Unvisited cells get zero mass
    and uniform tables.
    """
    cells = rng.choice(system.n_cells, size=draws, p=system.marginal)
    counts = np.bincount(cells, minlength=system.n_cells).astype(np.float64)
    tables = []
    for table, card in zip(system.tables, system.output_cards):
        est = np.full((system.n_cells, card), 1.0 / card)
        for c in np.flatnonzero(counts):
            ys = rng.choice(card, size=int(counts[c]), p=table[c])
            est[c] = np.bincount(ys, minlength=card) / counts[c]
        tables.append(est)
    return DiscreteCSSISystem(
        f"{system.name}@{draws}", system.input_cards, system.output_cards, counts / draws, tables, system.contexts
    )
