from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from core.autodiff.tensor import Tensor, as_tensor, mul, square, stop_gradient, sub, sum as tsum
from core.errors import DimensionError, ParameterError


@dataclass
class Codebook:
    """
    K prototype vectors updated by exponential moving averages.

    Codes are plain arrays, not trainable tensors: the optimizer never sees them,
    they move only through `ema_update` (and `dead_code_restart`).
    """

    k: int
    dim: int
    codes: np.ndarray
    ema_counts: np.ndarray
    ema_sums: np.ndarray
    decay: float = 0.99
    eps: float = 1e-5
    usage: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    recent: np.ndarray | None = None  # last batch of embeddings, used to re-seed dead codes

    @classmethod
    def create(cls, k: int, dim: int, rng: np.random.Generator, decay: float = 0.99, eps: float = 1e-5) -> "Codebook":
        if k < 1:
            raise ParameterError(f"codebook needs K >= 1, got {k}")
        return cls(
            k=k,
            dim=dim,
            codes=rng.normal(0.0, 0.1, size=(k, dim)),
            ema_counts=np.zeros(k),
            ema_sums=np.zeros((k, dim)),
            decay=decay,
            eps=eps,
            usage=np.zeros(k, dtype=np.int64),
        )

    # --- quantization ---------------------------------------------------------

    def quantize(self, h: np.ndarray, track: bool = True) -> Tuple[np.ndarray, np.ndarray]:
        """Nearest code per row of h (B×D or D). Exact ties go to the lowest index."""
        h = np.asarray(h, dtype=np.float64)
        single = h.ndim == 1
        h2 = h.reshape(1, -1) if single else h
        if h2.shape[1] != self.dim:
            raise ParameterError(f"embedding dim {h2.shape[1]} does not match codebook dim {self.dim}")
        dist = ((h2[:, None, :] - self.codes[None, :, :]) ** 2).sum(axis=2)
        z = np.argmin(dist, axis=1)
        if track:
            self.usage += np.bincount(z, minlength=self.k)
        e = self.codes[z].copy()
        if single:
            return int(z[0]), e[0]  # type: ignore[return-value]
        return z, e

    def histogram(self, z: np.ndarray) -> np.ndarray:
        return np.bincount(np.asarray(z, dtype=np.int64), minlength=self.k)

    def perplexity(self, z: np.ndarray) -> float:
        p = self.histogram(z) / max(len(z), 1)
        p = p[p > 0]
        return float(np.exp(-(p * np.log(p)).sum()))

    # --- updates --------------------------------------------------------------

    def ema_update(self, h: np.ndarray, z: np.ndarray) -> None:
        """
        N ← γN + (1−γ)n; m ← γm + (1−γ)Σh; code ← m / max(N, ε) for codes assigned in
        this batch. Unassigned codes keep their value, even once N decays below ε.
        """
        h = np.atleast_2d(np.asarray(h, dtype=np.float64))
        z = np.asarray(z, dtype=np.int64)
        if np.any(z < 0) or np.any(z >= self.k):
            raise ParameterError("code index out of range in ema_update")
        n = np.bincount(z, minlength=self.k).astype(np.float64)
        sums = np.zeros((self.k, self.dim))
        np.add.at(sums, z, h)

        g = self.decay
        self.ema_counts = g * self.ema_counts + (1.0 - g) * n
        self.ema_sums = g * self.ema_sums + (1.0 - g) * sums
        fresh = n > 0
        self.codes[fresh] = self.ema_sums[fresh] / np.maximum(self.ema_counts[fresh], self.eps)[:, None]
        self.recent = h.copy()

    def usage_fractions(self) -> np.ndarray:
        total = self.usage.sum()
        return self.usage / total if total > 0 else np.zeros(self.k)

    def reset_usage(self) -> None:
        self.usage = np.zeros(self.k, dtype=np.int64)

    def dead_code_restart(self, threshold: float, rng: np.random.Generator) -> List[int]:
        """Re-seed codes used less than `threshold` of the time since the last check."""
        if self.usage.sum() == 0 or self.recent is None or len(self.recent) == 0:
            return []
        dead = [int(i) for i in np.flatnonzero(self.usage_fractions() < threshold)]
        for i in dead:
            self.codes[i] = self.recent[rng.integers(len(self.recent))]
            self.ema_counts[i] = 0.0
            self.ema_sums[i] = 0.0
        self.reset_usage()
        return dead

    # --- serialization --------------------------------------------------------

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {
            "codes": self.codes.copy(),
            "ema_counts": self.ema_counts.copy(),
            "ema_sums": self.ema_sums.copy(),
            "usage": self.usage.astype(np.float64),
        }

    def load_state_dict(self, blobs: Dict[str, np.ndarray]) -> None:
        codes = np.asarray(blobs["codes"], dtype=np.float64)
        if codes.shape != (self.k, self.dim):
            raise DimensionError(f"codebook blob shape {codes.shape} != {(self.k, self.dim)}")
        self.codes = codes.copy()
        self.ema_counts = np.asarray(blobs["ema_counts"], dtype=np.float64).reshape(self.k).copy()
        self.ema_sums = np.asarray(blobs["ema_sums"], dtype=np.float64).reshape(self.k, self.dim).copy()
        self.usage = np.asarray(blobs["usage"]).reshape(self.k).astype(np.int64)


def commitment_loss(h, e, beta: float) -> Tuple[Tensor, Tensor]:
    """
    Per-row (‖sg[h] − e‖², β·‖h − sg[e]‖²), each B×1.

    The first term reaches only e (relevant when codes are trained by gradient), the
    second only h.
    """
    h, e = as_tensor(h), as_tensor(e)
    if h.shape != e.shape:
        raise DimensionError(f"commitment_loss shapes differ: {h.shape} vs {e.shape}")
    codebook_term = tsum(square(sub(stop_gradient(h), e)), axis=1)
    commit_term = mul(tsum(square(sub(h, stop_gradient(e))), axis=1), beta)
    return codebook_term, commit_term


def straight_through(h, e) -> Tensor:
    """Forward value e; the gradient is copied unchanged to h and never reaches e."""
    h, e = as_tensor(h), as_tensor(e)
    if h.shape != e.shape:
        raise DimensionError(f"straight_through shapes differ: {h.shape} vs {e.shape}")
    return Tensor.from_op(e.data.copy(), (h,), lambda g: (g,), "straight_through")
