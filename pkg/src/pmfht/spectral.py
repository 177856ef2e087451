"""Translation, convolution and correlation in the fractional manifold domain.

Each operator is evaluated through its spectral-product form.  Translated and
convolved signals are complex in general; take ``.real`` if needed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange
from .transform import FractionalSpectrum, ManifoldTransform, forward, inverse

__all__ = [
    "ImpulseSpectrum",
    "impulse_spectrum",
    "translate",
    "convolve",
    "spectral_translate",
    "spectral_convolve",
    "correlate",
    "convolve_spatial",
]


@dataclass(frozen=True)
class ImpulseSpectrum:
    index: int
    order: float
    coeffs: np.ndarray


def _check_index(t, i, what="point index"):
    if not (isinstance(i, (int, np.integer)) and 0 <= i < t.n):
        raise IndexOutOfRange(f"{what} {i!r} out of range [0, {t.n})")
    return int(i)


def _spec(t, alpha, f):
    f = np.asarray(f)
    if f.shape[0] != t.n:
        raise DimensionMismatch(f"signal has {f.shape[0]} rows, transform has {t.n}")
    return forward(t, alpha, f).coeffs


def _column(t: ManifoldTransform, alpha: float, i: int) -> np.ndarray:
    # i-th column of F^(alpha) without forming the matrix
    phase = np.exp(1j * alpha * t.theta)
    return t.V @ (phase * t.V[i].conj())


def _broadcast(a, b):
    if a.ndim == 1 and b.ndim == 2:
        return a[:, None] * b
    if a.ndim == 2 and b.ndim == 1:
        return a * b[:, None]
    return a * b


def impulse_spectrum(t: ManifoldTransform, alpha: float, i: int) -> ImpulseSpectrum:
    """Spectrum of the unit impulse at point ``i``: ``sqrt(B_ii)`` times column i of ``F^(alpha)``."""
    i = _check_index(t, i)
    coeffs = t.b_half[i] * _column(t, float(alpha), i)
    return ImpulseSpectrum(index=i, order=float(alpha), coeffs=coeffs)


def translate(t: ManifoldTransform, alpha: float, f, i: int) -> np.ndarray:
    """Generalized translation of ``f`` toward point ``i``."""
    fh = _spec(t, alpha, f)
    dh = impulse_spectrum(t, alpha, i).coeffs
    return inverse(t, FractionalSpectrum(float(alpha), _broadcast(dh, fh), None))


def convolve(t: ManifoldTransform, alpha: float, f, g) -> np.ndarray:
    """``sum_i f(i) T_i g``, evaluated as the inverse of ``f_hat * g_hat``."""
    fh, gh = _spec(t, alpha, f), _spec(t, alpha, g)
    if fh.shape != gh.shape and not (fh.ndim == 1 or gh.ndim == 1):
        raise DimensionMismatch(f"channel counts differ: {fh.shape} vs {gh.shape}")
    return inverse(t, FractionalSpectrum(float(alpha), _broadcast(fh, gh), None))


def spectral_translate(t: ManifoldTransform, alpha: float, g, k: int) -> np.ndarray:
    """Spectrum of ``g`` modulated by the k-th spatial harmonic of order ``-alpha``."""
    k = _check_index(t, k, "frequency index")
    g = np.asarray(g)
    if g.shape[0] != t.n:
        raise DimensionMismatch(f"signal has {g.shape[0]} rows, transform has {t.n}")
    col = _column(t, -float(alpha), k)
    return t.apply(float(alpha), _broadcast(col, g).astype(complex))


def spectral_convolve(t: ManifoldTransform, alpha: float, f_hat, g) -> np.ndarray:
    """``sum_k f_hat(k) S_k g_hat``; equals the spectrum of ``f * g`` (pointwise)."""
    f_hat = np.asarray(f_hat)
    g = np.asarray(g)
    if f_hat.shape[0] != t.n or g.shape[0] != t.n:
        raise DimensionMismatch(f"inputs must have {t.n} rows")
    # sum_k f_hat(k) F^(-alpha)[:, k] is F^(-alpha) f_hat
    modulator = t.apply(-float(alpha), f_hat.astype(complex))
    return t.apply(float(alpha), _broadcast(modulator, g).astype(complex))


def correlate(t: ManifoldTransform, alpha: float, f, g) -> np.ndarray:
    """Cross-correlation: inverse of ``conj(f_hat) * g_hat``."""
    fh, gh = _spec(t, alpha, f), _spec(t, alpha, g)
    return inverse(t, FractionalSpectrum(float(alpha), _broadcast(np.conj(fh), gh), None))



def convolve_spatial(t: ManifoldTransform, alpha: float, f, g, *, weighted: bool = False) -> np.ndarray:
    """Direct O(N^2) sum of translated copies: ``sum_i w_i f(i) T_i g``.

    With ``w_i = 1`` this is the defining sum and agrees with :func:`convolve`.
    ``weighted=True`` uses ``w_i = sqrt(B_ii)``, which counts the impulse
    weight twice; it coincides with the unweighted sum only when ``B = I``.
    """
    f = np.asarray(f)
    g = np.asarray(g)
    if f.shape != (t.n,) or g.shape != (t.n,):
        raise DimensionMismatch(f"f and g must both have shape ({t.n},)")
    out = np.zeros(t.n, dtype=complex)
    for i in range(t.n):
        w = t.b_half[i] if weighted else 1.0
        out += w * f[i] * translate(t, alpha, g, i)
    return out
