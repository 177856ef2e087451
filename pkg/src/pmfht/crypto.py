"""Multi-order fractional-domain encryption of point clouds.

Each coordinate channel is taken to the fractional domain with its own
forward order, its spectrum is phase-scrambled by a Henon-map mask, and it
is brought back with a second, independent order.  Decryption needs the
transform of the original geometry (see :mod:`pmfht.io` for the geometry
token that carries it).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ChaosDiverged, DimensionMismatch, ValidationError
from .geometry import PointCloud
from .transform import FractionalSpectrum, ManifoldTransform, forward, inverse

__all__ = [
    "EncryptionKey",
    "EncryptedCloud",
    "DEFAULT_KEY",
    "henon_orbit",
    "henon_phases",
    "phase_masks",
    "encrypt",
    "decrypt",
    "relative_error",
]

FORMAT_VERSION = 1
STREAM_OFFSET = 1e-3
_DIVERGENCE = 1e6


@dataclass(frozen=True)
class EncryptionKey:
    alpha_fwd: tuple = (0.35, 0.72, 0.15)
    alpha_inv: tuple = (0.60, 0.20, 0.90)
    henon_a: float = 1.4
    henon_b: float = 0.3
    u0: float = 0.12
    v0: float = 0.1
    burn_in: int = 100

    def __post_init__(self):
        fwd = tuple(float(a) for a in self.alpha_fwd)
        inv = tuple(float(a) for a in self.alpha_inv)
        if len(fwd) != 3 or len(inv) != 3:
            raise ValidationError("alpha_fwd and alpha_inv must each hold 3 orders")
        object.__setattr__(self, "alpha_fwd", fwd)
        object.__setattr__(self, "alpha_inv", inv)
        scalars = (self.henon_a, self.henon_b, self.u0, self.v0)
        if not all(math.isfinite(x) for x in fwd + inv + scalars):
            raise ValidationError("key fields must be finite")
        if int(self.burn_in) != self.burn_in or self.burn_in < 0:
            raise ValidationError(f"burn_in must be a non-negative integer, got {self.burn_in}")

    def replace(self, **changes) -> "EncryptionKey":
        from dataclasses import replace

        return replace(self, **changes)


DEFAULT_KEY = EncryptionKey()


@dataclass(frozen=True)
class EncryptedCloud:
    coords: np.ndarray
    version: int = FORMAT_VERSION
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.coords.shape[0]


def henon_orbit(a: float, b: float, u0: float, v0: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """The first ``n`` iterates (u_1..u_n, v_1..v_n) of the Henon map."""
    u, v = float(u0), float(v0)
    us = np.empty(n)
    vs = np.empty(n)
    for k in range(n):
        u, v = 1.0 - a * u * u + v, b * u
        if not abs(u) <= _DIVERGENCE:
            raise ChaosDiverged(f"Henon orbit left the bounded regime at iterate {k + 1} (u={u:.3g})")
        us[k] = u
        vs[k] = v
    return us, vs


def henon_phases(key: EncryptionKey, n: int, stream: int = 0) -> np.ndarray:
    """Normalized phase sequence in [0, 1) for one channel.

    The channel tag shifts the initial ``u`` by ``tag * 1e-3``; ``burn_in``
    iterates are discarded and the rest is min-max scaled.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    us, _ = henon_orbit(key.henon_a, key.henon_b, key.u0 + stream * STREAM_OFFSET, key.v0, key.burn_in + n)
    seq = us[key.burn_in :]
    lo, hi = seq.min(), seq.max()
    if hi == lo:
        return np.zeros(n)
    # the maximum wraps to 0, which is the same phase
    return np.mod((seq - lo) / (hi - lo), 1.0)


def phase_masks(key: EncryptionKey, n: int) -> np.ndarray:
    """(n, 3) phase sequences for the x, y and z channels."""
    return np.column_stack([henon_phases(key, n, stream=d) for d in range(3)])


def _coords(cloud):
    if isinstance(cloud, PointCloud):
        return cloud.points
    return np.asarray(cloud)


def encrypt(cloud, t: ManifoldTransform, key: EncryptionKey, *, masks=None) -> EncryptedCloud:
    """Scramble the coordinates of ``cloud``; ``masks`` overrides the chaotic phases."""
    f = _coords(cloud)
    if f.shape != (t.n, 3):
        raise DimensionMismatch(f"cloud shape {f.shape} does not match transform size {t.n}")
    psi = phase_masks(key, t.n) if masks is None else np.asarray(masks, dtype=float)
    out = np.empty((t.n, 3), dtype=complex)
    for d in range(3):
        spec = forward(t, key.alpha_fwd[d], f[:, d])
        scrambled = spec.coeffs * np.exp(2j * np.pi * psi[:, d])
        out[:, d] = inverse(t, FractionalSpectrum(key.alpha_inv[d], scrambled, None))
    out.setflags(write=False)
    return EncryptedCloud(coords=out, meta={"n": t.n})


def decrypt(enc: EncryptedCloud, t: ManifoldTransform, key: EncryptionKey, *, masks=None, real: bool = True):
    """Undo :func:`encrypt`.  Returns a :class:`PointCloud` (or complex array with ``real=False``)."""
    c = np.asarray(enc.coords)
    if c.shape != (t.n, 3):
        raise DimensionMismatch(f"ciphertext shape {c.shape} does not match transform size {t.n}")
    psi = phase_masks(key, t.n) if masks is None else np.asarray(masks, dtype=float)
    out = np.empty((t.n, 3), dtype=complex)
    for d in range(3):
        spec = forward(t, key.alpha_inv[d], c[:, d])
        unscrambled = spec.coeffs * np.exp(-2j * np.pi * psi[:, d])
        out[:, d] = inverse(t, FractionalSpectrum(key.alpha_fwd[d], unscrambled, None))
    if not real:
        return out
    return PointCloud(out.real)


def relative_error(recovered, original) -> float:
    """Frobenius-norm relative error between two coordinate sets."""
    a = _coords(recovered)
    b = _coords(original)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))
