from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

import numpy as np

from core.errors import DimensionError, ParameterError


@dataclass(frozen=True)
class AdjacencyMatrix:
    """
    Bipartite graph from (S_1..S_N, A_1..A_M) at t to S'_1..S'_N at t+1.

    entries[i, j] = 1 iff row variable i is a parent of S'_j; column j is Pa(j).
    """

    entries: np.ndarray  # (N+M)×N, int8 in {0, 1}
    n_state: int
    n_action: int

    def __post_init__(self) -> None:
        e = np.asarray(self.entries)
        if e.shape != (self.n_state + self.n_action, self.n_state):
            raise DimensionError(
                f"adjacency must be {(self.n_state + self.n_action, self.n_state)}, got {e.shape}"
            )
        if not np.all((e == 0) | (e == 1)):
            raise ParameterError("adjacency entries must be 0 or 1")
        object.__setattr__(self, "entries", e.astype(np.int8))

    @classmethod
    def empty(cls, n_state: int, n_action: int) -> "AdjacencyMatrix":
        return cls(np.zeros((n_state + n_action, n_state), dtype=np.int8), n_state, n_action)

    @classmethod
    def full(cls, n_state: int, n_action: int) -> "AdjacencyMatrix":
        return cls(np.ones((n_state + n_action, n_state), dtype=np.int8), n_state, n_action)

    @classmethod
    def from_edges(cls, n_state: int, n_action: int, edges: List[Tuple[int, int]]) -> "AdjacencyMatrix":
        e = np.zeros((n_state + n_action, n_state), dtype=np.int8)
        for i, j in edges:
            e[i, j] = 1
        return cls(e, n_state, n_action)

    @classmethod
    def from_flat(cls, flat: np.ndarray, n_state: int, n_action: int) -> "AdjacencyMatrix":
        """Inverse of the decoder's row-major flattening (index i·N + j)."""
        return cls(np.asarray(flat).reshape(n_state + n_action, n_state).round().astype(np.int8), n_state, n_action)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.entries.shape  # type: ignore[return-value]

    def edges(self) -> List[Tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.entries))]

    def parents(self, j: int) -> List[int]:
        return [int(i) for i in np.flatnonzero(self.entries[:, j])]

    def edge_count(self) -> int:
        return int(self.entries.sum())

    def issubset(self, other: "AdjacencyMatrix") -> bool:
        return bool(np.all(self.entries <= other.entries))

    def flat(self) -> np.ndarray:
        return self.entries.reshape(-1).astype(np.float64)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AdjacencyMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.entries, other.entries))

    def __hash__(self) -> int:
        return hash((self.n_state, self.n_action, self.entries.tobytes()))

    # --- graph text format: "N M" then N+M rows of N space-separated {0,1} ----

    def to_text(self) -> str:
        lines = [f"{self.n_state} {self.n_action}"]
        lines += [" ".join(str(int(v)) for v in row) for row in self.entries]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "AdjacencyMatrix":
        rows = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
        if not rows or len(rows[0]) != 2:
            raise ParameterError("graph text must start with 'N M'")
        n, m = int(rows[0][0]), int(rows[0][1])
        body = rows[1:]
        if len(body) != n + m or any(len(r) != n for r in body):
            raise ParameterError(f"graph text body must be {n + m} rows of {n} entries")
        return cls(np.array([[int(v) for v in r] for r in body], dtype=np.int8), n, m)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "AdjacencyMatrix":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class LocalCausalGraph:
    context: str | int  # code index or named ground-truth context
    adjacency: AdjacencyMatrix

    def edges(self) -> List[Tuple[int, int]]:
        return self.adjacency.edges()
