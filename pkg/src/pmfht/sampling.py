"""Bandlimited signals, sampling plans and reconstruction.

Spectral index k follows the row order of the transform, which is the
ascending-eigenvalue order of the harmonic basis (low to high frequency).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, RankDeficient, ValidationError
from .transform import FractionalSpectrum, ManifoldTransform, forward, inverse

__all__ = [
    "SamplingPlan",
    "bandlimit",
    "basis_matrix",
    "sigma_min",
    "make_plan",
    "reconstruct",
    "optimal_sampling",
    "optimal_sampling_exhaustive",
]

RANK_TOL = 1e-10


@dataclass(frozen=True)
class SamplingPlan:
    indices: np.ndarray
    bandwidth: int
    order: float
    basis: np.ndarray
    left_inverse: np.ndarray

    @property
    def interpolator(self) -> np.ndarray:
        """``basis @ left_inverse`` (N x K)."""
        return self.basis @ self.left_inverse

    def sample(self, f) -> np.ndarray:
        return np.asarray(f)[self.indices]


def _check_bandwidth(t, k_b):
    if not (isinstance(k_b, (int, np.integer)) and 1 <= k_b <= t.n):
        raise IndexOutOfRange(f"bandwidth {k_b!r} must be in [1, {t.n}]")
    return int(k_b)


def bandlimit(t: ManifoldTransform, alpha: float, f, k_b: int) -> np.ndarray:
    """Zero every coefficient with index >= ``k_b`` and return to the spatial domain."""
    k_b = _check_bandwidth(t, k_b)
    spec = forward(t, alpha, f)
    c = spec.coeffs.copy()
    c[k_b:] = 0
    return inverse(t, FractionalSpectrum(spec.order, c, None))


def basis_matrix(t: ManifoldTransform, alpha: float, k_b: int) -> np.ndarray:
    """``B^{-1/2}`` times the first ``k_b`` columns of ``F^(-alpha)``."""
    k_b = _check_bandwidth(t, k_b)
    phase = np.exp(-1j * float(alpha) * t.theta)
    cols = (t.V * phase[None, :]) @ t.V[:k_b].conj().T
    return cols * t.b_half_inv[:, None]


def sigma_min(A) -> float:
    """Smallest of the min(m, n) singular values."""
    A = np.atleast_2d(A)
    if A.size == 0:
        return 0.0
    return float(np.linalg.svd(A, compute_uv=False)[-1])


def _check_indices(t, indices):
    idx = np.asarray(indices, dtype=int).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= t.n):
        raise IndexOutOfRange(f"sample indices must lie in [0, {t.n})")
    if np.unique(idx).size != idx.size:
        raise ValidationError("sample indices must be distinct")
    return idx


def make_plan(t: ManifoldTransform, alpha: float, indices, k_b: int) -> SamplingPlan:
    """Build the interpolation operator for the given sample set.

    ``left_inverse`` is the Moore-Penrose pseudo-inverse of the sampled
    basis rows, the left inverse of smallest spectral norm.
    """
    k_b = _check_bandwidth(t, k_b)
    idx = _check_indices(t, indices)
    if idx.size < k_b:
        raise ValidationError(f"need at least {k_b} samples, got {idx.size}")
    V_kb = basis_matrix(t, alpha, k_b)
    A = V_kb[idx]
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] <= RANK_TOL * s[0]:
        ratio = s[-1] / s[0] if s[0] > 0 else 0.0
        raise RankDeficient(f"sampled basis has sigma_min/sigma_max = {ratio:.3e}")
    U = np.linalg.pinv(A)
    for arr in (idx, V_kb, U):
        arr.setflags(write=False)
    return SamplingPlan(indices=idx, bandwidth=k_b, order=float(alpha), basis=V_kb, left_inverse=U)


def reconstruct(plan: SamplingPlan, samples) -> np.ndarray:
    samples = np.asarray(samples)
    if samples.shape[0] != plan.indices.size:
        raise DimensionMismatch(f"expected {plan.indices.size} samples, got {samples.shape[0]}")
    return plan.basis @ (plan.left_inverse @ samples)


def optimal_sampling(t: ManifoldTransform, alpha: float, k_b: int, k: int) -> np.ndarray:
    """Greedy sample selection maximizing the smallest singular value.

    At each step the candidate row that maximizes sigma_min of the grown
    submatrix is added; ties go to the lowest index.
    """
    k_b = _check_bandwidth(t, k_b)
    if not (k_b <= k <= t.n):
        raise ValidationError(f"need bandwidth <= K <= N, got K={k}")
    V_kb = basis_matrix(t, alpha, k_b)
    chosen: list[int] = []
    available = np.ones(t.n, dtype=bool)
    for step in range(k):
        cands = np.flatnonzero(available)
        stack = np.empty((cands.size, step + 1, k_b), dtype=V_kb.dtype)
        stack[:, :step] = V_kb[chosen]
        stack[:, step] = V_kb[cands]
        s = np.linalg.svd(stack, compute_uv=False)[:, -1]
        best = int(cands[np.argmax(s)])
        chosen.append(best)
        available[best] = False
    sv = np.linalg.svd(V_kb[chosen], compute_uv=False)
    if sv[-1] <= RANK_TOL * sv[0]:
        raise RankDeficient("no admissible sampling set found")
    return np.asarray(chosen, dtype=int)


def optimal_sampling_exhaustive(t: ManifoldTransform, alpha: float, k_b: int, k: int) -> np.ndarray:
    """Exact maximizer by enumeration; only sensible for small N."""
    k_b = _check_bandwidth(t, k_b)
    if t.n > 16:
        raise ValidationError("exhaustive search is limited to N <= 16")
    V_kb = basis_matrix(t, alpha, k_b)
    best, best_s = None, -1.0
    for combo in itertools.combinations(range(t.n), k):
        s = sigma_min(V_kb[list(combo)])
        if s > best_s:
            best, best_s = combo, s
    return np.asarray(best, dtype=int)
