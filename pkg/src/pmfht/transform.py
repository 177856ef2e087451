"""Fractional powers of the normalized manifold harmonic matrix.

``F = H^T B^{1/2}`` is real orthogonal, so it is unitarily diagonalizable with
eigenvalues on the unit circle.  The decomposition is taken from the real
Schur form: for a normal matrix the Schur factor is block diagonal with 1x1
blocks (+-1) and 2x2 rotation blocks, each of which has a closed-form unitary
eigenbasis.  This keeps ``V`` unitary even inside degenerate clusters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, EigensolveFailure, NotOrthogonal
from .geometry import HarmonicBasis, LboPair

__all__ = [
    "ManifoldTransform",
    "FractionalSpectrum",
    "build_transform",
    "transform_from_orthogonal",
    "fractional_matrix",
    "forward",
    "inverse",
    "fused_energy",
    "transform_for_cloud",
]

_ORTHO_TOL = 1e-6


@dataclass(frozen=True)
class ManifoldTransform:
    """Eigen-factored orthogonal transform, ready for any real order.

    ``b_half`` is the diagonal of ``B^{1/2}``; ``theta`` holds the principal
    arguments of ``omega`` in (-pi, pi].
    """

    b_half: np.ndarray
    V: np.ndarray
    omega: np.ndarray
    theta: np.ndarray

    @property
    def n(self) -> int:
        return self.b_half.shape[0]

    @property
    def b_half_inv(self) -> np.ndarray:
        return 1.0 / self.b_half

    @property
    def mass(self) -> np.ndarray:
        return self.b_half**2

    @property
    def B_half(self) -> np.ndarray:
        return np.diag(self.b_half)

    @property
    def B_half_inv(self) -> np.ndarray:
        return np.diag(self.b_half_inv)

    def matrix(self) -> np.ndarray:
        """``F`` itself, rebuilt from the decomposition."""
        return fractional_matrix(self, 1.0)

    def apply(self, alpha: float, x: np.ndarray) -> np.ndarray:
        """``F^(alpha) @ x`` without forming the N x N matrix."""
        if alpha == 0:
            return np.array(x, dtype=complex)
        phase = np.exp(1j * alpha * self.theta)
        y = self.V.conj().T @ x
        y *= phase[:, None] if y.ndim == 2 else phase
        return self.V @ y


@dataclass(frozen=True)
class FractionalSpectrum:
    """Fractional-domain coefficients, one column per channel.

    ``mass_norm`` is the B-weighted energy of each input channel; by
    Parseval it equals the squared 2-norm of the matching column.
    """

    order: float
    coeffs: np.ndarray
    mass_norm: np.ndarray

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.coeffs.ndim == 1 else self.coeffs.shape[1]

    def fused(self) -> np.ndarray:
        return fused_energy(self.coeffs)


def fused_energy(coeffs) -> np.ndarray:
    """Per-row l2 norm across channels (the fused energy spectrum)."""
    c = np.asarray(coeffs)
    if c.ndim == 1:
        return np.abs(c)
    return np.sqrt(np.sum(np.abs(c) ** 2, axis=1))


def _decompose_orthogonal(F):
    n = F.shape[0]
    try:
        T, Z = scipy.linalg.schur(F, output="real")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolveFailure(str(exc)) from exc
    V = np.zeros((n, n), dtype=complex)
    theta = np.zeros(n)
    s2 = np.sqrt(0.5)
    k = 0
    while k < n:
        if k + 1 < n and T[k + 1, k] != 0.0:
            a = 0.5 * (T[k, k] + T[k + 1, k + 1])
            s = 0.5 * (T[k + 1, k] - T[k, k + 1])
            phi = np.arctan2(s, a)
            z1, z2 = Z[:, k], Z[:, k + 1]
            # rotation by phi maps (1, -i) to e^{i phi} (1, -i)
            V[:, k] = s2 * (z1 - 1j * z2)
            V[:, k + 1] = s2 * (z1 + 1j * z2)
            theta[k], theta[k + 1] = phi, -phi
            k += 2
        else:
            V[:, k] = Z[:, k]
            theta[k] = 0.0 if T[k, k] >= 0 else np.pi
            k += 1
    # -1 sits on the branch cut; pin it to +pi
    theta[theta <= -np.pi] = np.pi
    omega = np.exp(1j * theta)
    # exact +-1 for the real eigenvalues
    omega[theta == 0.0] = 1.0
    omega[theta == np.pi] = -1.0
    return V, omega, theta


def transform_from_orthogonal(F, b_half) -> ManifoldTransform:
    """Decompose an arbitrary real orthogonal ``F`` with the given ``B^{1/2}`` diagonal."""
    F = np.asarray(F, dtype=float)
    b_half = np.asarray(b_half, dtype=float)
    if F.ndim != 2 or F.shape[0] != F.shape[1] or F.shape[0] != b_half.shape[0]:
        raise DimensionMismatch(f"F {F.shape} and B^1/2 {b_half.shape} are inconsistent")
    resid = np.max(np.abs(F.T @ F - np.eye(F.shape[0]))) if F.size else 0.0
    if resid > _ORTHO_TOL:
        raise NotOrthogonal(f"orthogonality residual {resid:.3e} exceeds {_ORTHO_TOL:g}")
    V, omega, theta = _decompose_orthogonal(F)
    for arr in (b_half, V, omega, theta):
        arr.setflags(write=False)
    return ManifoldTransform(b_half=b_half, V=V, omega=omega, theta=theta)


def build_transform(basis: HarmonicBasis, lbo: LboPair) -> ManifoldTransform:
    """Form ``F = H^T B^{1/2}`` and diagonalize it."""
    b_half = np.sqrt(np.asarray(lbo.mass, dtype=float))
    H = np.asarray(basis.eigenvectors)
    if H.shape != (b_half.shape[0], b_half.shape[0]):
        raise DimensionMismatch(f"basis {H.shape} does not match mass of length {b_half.shape[0]}")
    F = H.T * b_half[None, :]
    return transform_from_orthogonal(F, b_half)


def fractional_matrix(t: ManifoldTransform, alpha: float) -> np.ndarray:
    """Dense ``V diag(exp(i alpha theta)) V^*``."""
    phase = np.exp(1j * float(alpha) * t.theta)
    return (t.V * phase[None, :]) @ t.V.conj().T


def _as_signal(t, signal):
    x = np.asarray(signal)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] != t.n:
        raise DimensionMismatch(f"signal with shape {np.shape(signal)} does not have {t.n} rows")
    if not np.all(np.isfinite(x)):
        raise DimensionMismatch("signal contains non-finite values")
    return x, squeeze


def forward(t: ManifoldTransform, alpha: float, signal) -> FractionalSpectrum:
    """Spectrum of order ``alpha``: ``F^(alpha) B^{1/2} signal``.

    1-D signals give 1-D coefficients; (N, C) signals are transformed
    column by column.
    """
    x, squeeze = _as_signal(t, signal)
    weighted = x * t.b_half[:, None]
    coeffs = t.apply(float(alpha), weighted.astype(complex))
    mass_norm = np.sum(np.abs(weighted) ** 2, axis=0)
    if squeeze:
        coeffs, mass_norm = coeffs[:, 0], mass_norm[0]
    return FractionalSpectrum(order=float(alpha), coeffs=coeffs, mass_norm=mass_norm)


def inverse(t: ManifoldTransform, spectrum: FractionalSpectrum, *, real: bool = False) -> np.ndarray:
    """Back to the spatial domain; ``real=True`` drops the imaginary residue."""
    c = np.asarray(spectrum.coeffs)
    squeeze = c.ndim == 1
    if squeeze:
        c = c[:, None]
    if c.ndim != 2 or c.shape[0] != t.n:
        raise DimensionMismatch(f"spectrum has {c.shape[0]} rows, transform has {t.n}")
    x = t.apply(-spectrum.order, c.astype(complex)) * t.b_half_inv[:, None]
    if squeeze:
        x = x[:, 0]
    return x.real if real else x


def transform_for_cloud(cloud, params=None) -> ManifoldTransform:
    """LBO, harmonic basis and decomposition for a cloud in one call."""
    from .geometry import build_lbo, solve_harmonic_basis

    lbo = build_lbo(cloud, params)
    return build_transform(solve_harmonic_basis(lbo), lbo)
