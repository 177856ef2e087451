"""Optimal fractional-domain filtering of radar point clouds.

A range x pulse echo matrix becomes a point cloud (range, pulse, power); the
power channel is the signal that gets filtered.  The filter is diagonal in
the fractional domain of order alpha and its coefficients minimize the
B-weighted squared error against a reference signal.

Expectations are sample means over realizations.  The transform (geometry)
is built once from a reference cube and reused for every realization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.signal
import scipy.sparse

from .errors import DimensionMismatch, EmptyCube, IndexOutOfRange, SingularSystem, ValidationError
from .geometry import PointCloud
from .transform import ManifoldTransform, fractional_matrix, transform_for_cloud

__all__ = [
    "RadarCube",
    "SteeringVector",
    "FilterDesign",
    "FilterProtocol",
    "CfarPolicy",
    "SweepResult",
    "ClutterSource",
    "reference_transform",
    "cube_to_cloud",
    "steering_vector",
    "inject_target",
    "estimate_reference",
    "design_filter",
    "apply_filter",
    "nmse",
    "synthetic_clutter",
    "sweep_alpha",
    "FilterRun",
    "run_filter",
    "monte_carlo_detection",
]


@dataclass(frozen=True)
class RadarCube:
    """Complex echoes, one row per range cell and one column per pulse."""

    echoes: np.ndarray
    prf_hz: float = 1075.0
    wavelength_m: float = 0.03
    range_labels: tuple | None = None

    def __post_init__(self):
        e = np.array(self.echoes, dtype=complex)
        if e.ndim != 2 or e.size == 0:
            raise EmptyCube(f"echo matrix must be a non-empty 2-D array, got shape {e.shape}")
        if e.shape[1] < 2:
            raise EmptyCube(f"need at least 2 pulses, got {e.shape[1]}")
        if not np.all(np.isfinite(e)):
            raise ValidationError("echo matrix contains non-finite values")
        if not self.prf_hz > 0 or not self.wavelength_m > 0:
            raise ValidationError("prf_hz and wavelength_m must be positive")
        e.setflags(write=False)
        object.__setattr__(self, "echoes", e)
        if self.range_labels is not None and len(self.range_labels) != e.shape[0]:
            raise DimensionMismatch("range_labels must have one entry per range cell")

    @property
    def shape(self):
        return self.echoes.shape

    @property
    def range_cells(self) -> int:
        return self.echoes.shape[0]

    @property
    def pulses(self) -> int:
        return self.echoes.shape[1]

    def segment(self, start: int, pulses: int) -> "RadarCube":
        if start < 0 or start + pulses > self.pulses:
            raise IndexOutOfRange(f"pulse window [{start}, {start + pulses}) outside [0, {self.pulses})")
        return replace(self, echoes=self.echoes[:, start : start + pulses])

    def rows(self, start: int, cells: int) -> "RadarCube":
        if start < 0 or start + cells > self.range_cells:
            raise IndexOutOfRange("range window outside the cube")
        labels = None if self.range_labels is None else tuple(self.range_labels[start : start + cells])
        return replace(self, echoes=self.echoes[start : start + cells], range_labels=labels)


@dataclass(frozen=True)
class SteeringVector:
    values: np.ndarray
    doppler_hz: float
    velocity: float


@dataclass(frozen=True)
class FilterDesign:
    """Optimal diagonal filter for one order.

    ``T`` is a dense matrix for the literal design and a sparse diagonal
    matrix for the fast path (the two agree: ``T`` is diagonal whenever the
    fractional matrix is unitary).
    """

    order: float
    h: np.ndarray
    T: object
    q: np.ndarray
    nmse: float
    method: str = "dense"

    @property
    def residual(self) -> float:
        return float(np.linalg.norm(self.T @ self.h - self.q))


@dataclass(frozen=True)
class FilterProtocol:
    """Experiment settings shared by the sweep and the detector.

    ``target_cell`` is a 0-based range index.  ``train_realizations``
    independent clutter segments (each ``pulses`` long) feed the sample
    means; a separate segment is held out for the NMSE.
    """

    range_cells: int = 10
    pulses: int = 251
    target_cell: int = 4
    velocity: float = 2.58
    scr_db: float = 0.0
    window: int = 3
    train_realizations: int = 4
    seed: int = 0
    method: str = "auto"


@dataclass(frozen=True)
class CfarPolicy:
    """Cell-averaging CFAR with an empirically calibrated multiplier.

    The multiplier is the (1 - pfa) quantile of the target-cell to
    mean-of-other-cells energy ratio over ``calibration_trials`` clutter-only
    trials, drawn from seeds disjoint from the detection trials.
    """

    pfa: float = 1e-2
    calibration_trials: int = 400
    seed_offset: int = 1_000_000


@dataclass(frozen=True)
class SweepResult:
    curve: list
    best_alpha: float
    residues: list = field(default_factory=list)


def cube_to_cloud(cube: RadarCube) -> PointCloud:
    """Range-major point cloud: x = range, y = pulse, z = power in dB, all scaled to [0, 1]."""
    R, M = cube.shape
    if R * M == 0:
        raise EmptyCube("cube has no samples")
    rr, mm = np.meshgrid(np.arange(R, dtype=float), np.arange(M, dtype=float), indexing="ij")
    power = np.abs(cube.echoes) ** 2
    tiny = np.finfo(float).tiny
    z = 10.0 * np.log10(np.maximum(power, tiny))
    pts = np.column_stack([_minmax(rr.ravel()), _minmax(mm.ravel()), _minmax(z.ravel())])
    return PointCloud(pts)


def _minmax(v):
    lo, hi = v.min(), v.max()
    # a spread at rounding level (e.g. |e^{jx}|^2 != 1 by an ulp) is a constant field
    if hi - lo <= 64 * np.finfo(float).eps * max(1.0, abs(hi), abs(lo)):
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def steering_vector(v: float, wavelength_m: float, prf_hz: float, M: int) -> SteeringVector:
    """Unit-energy Doppler steering vector for radial velocity ``v``."""
    if not wavelength_m > 0 or not prf_hz > 0:
        raise ValidationError("wavelength and PRF must be positive")
    fd = 2.0 * v / wavelength_m
    m = np.arange(M)
    p = np.exp(-2j * np.pi * m * fd / prf_hz) / math.sqrt(M)
    return SteeringVector(values=p, doppler_hz=fd, velocity=v)


def inject_target(cube: RadarCube, cell: int, scr_db: float | None, sv: SteeringVector, *, phase: float = 0.0) -> RadarCube:
    """Add ``A e^{j phase} p`` to one range cell; ``scr_db=None`` injects nothing (A = 0)."""
    if not 0 <= cell < cube.range_cells:
        raise IndexOutOfRange(f"range cell {cell} out of range [0, {cube.range_cells})")
    if sv.values.shape[0] != cube.pulses:
        raise DimensionMismatch("steering vector length must equal the number of pulses")
    if scr_db is None:
        return cube
    p_clutter = float(np.mean(np.abs(cube.echoes[cell]) ** 2))
    energy = float(np.sum(np.abs(sv.values) ** 2))
    amp = math.sqrt(p_clutter * 10.0 ** (scr_db / 10.0) / energy)
    echoes = cube.echoes.copy()
    echoes[cell] += amp * np.exp(1j * phase) * sv.values
    return replace(cube, echoes=echoes)


def estimate_reference(y_cloud, R: int, M: int, window: int = 3) -> np.ndarray:
    """Mean over ``window`` neighboring range cells at each pulse, edges clamped."""
    y = np.asarray(y_cloud)
    if y.shape[0] != R * M:
        raise DimensionMismatch(f"signal has {y.shape[0]} entries, expected {R}x{M}")
    if window < 1 or window % 2 == 0:
        raise ValidationError(f"window must be a positive odd integer, got {window}")
    grid = y.reshape(R, M, *y.shape[1:])
    half = window // 2
    out = np.zeros_like(grid, dtype=np.result_type(grid, float))
    for off in range(-half, half + 1):
        out += grid[np.clip(np.arange(R) + off, 0, R - 1)]
    return (out / window).reshape(y.shape)


def _realization_spectra(t, alpha, realizations):
    ys, xs = [], []
    for y, x in realizations:
        y, x = np.asarray(y), np.asarray(x)
        if y.shape != (t.n,) or x.shape != (t.n,):
            raise DimensionMismatch(f"realization signals must have shape ({t.n},)")
        ys.append(y * t.b_half)
        xs.append(x * t.b_half)
    if not ys:
        raise ValidationError("need at least one realization")
    return np.column_stack(ys).astype(complex), np.column_stack(xs).astype(complex)


def design_filter(
    t: ManifoldTransform, alpha: float, realizations: Sequence[tuple], *, method: str = "auto"
) -> FilterDesign:
    """Solve ``T h = q`` for the optimal diagonal fractional-domain filter.

    ``method="dense"`` builds ``S = [W_1 y, ..., W_N y]`` and the normal
    equations literally; ``"diagonal"`` uses the fact that ``S^H S`` is
    diagonal for a unitary transform.  ``"auto"`` picks dense for N <= 400.
    """
    Y, X = _realization_spectra(t, float(alpha), realizations)
    L = Y.shape[1]
    n = t.n
    if method == "auto":
        method = "dense" if n <= 400 else "diagonal"
    if method == "dense":
        Fp = fractional_matrix(t, alpha)
        Fm = fractional_matrix(t, -alpha)
        T = np.zeros((n, n), dtype=complex)
        q = np.zeros(n, dtype=complex)
        for k in range(L):
            S = Fm * (Fp @ Y[:, k])[None, :]
            T += S.conj().T @ S
            q += S.conj().T @ X[:, k]
        T /= L
        q /= L
        T = 0.5 * (T + T.conj().T)
        eps = 1e-10 * np.real(np.trace(T)) / n
        try:
            h = scipy.linalg.solve(T + eps * np.eye(n), q, assume_a="her")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
            raise SingularSystem(str(exc)) from exc
    elif method == "diagonal":
        Yh = t.apply(alpha, Y)
        Xh = t.apply(alpha, X)
        d = np.mean(np.abs(Yh) ** 2, axis=1)
        q = np.mean(np.conj(Yh) * Xh, axis=1)
        eps = 1e-10 * np.sum(d) / n
        h = q / (d + eps)
        T = scipy.sparse.diags(d.astype(complex))
    else:
        raise ValidationError(f"unknown design method {method!r}")
    qn = np.linalg.norm(q)
    if not np.all(np.isfinite(h)) or np.linalg.norm(T @ h - q) > 1e-6 * max(qn, np.finfo(float).tiny):
        raise SingularSystem("normal equations could not be solved to tolerance")
    err = 0.0
    ref = 0.0
    for y, x in realizations:
        out = apply_filter(t, FilterDesign(float(alpha), h, None, q, 0.0), y, real=False)
        err += float(np.sum(np.abs(out - x) ** 2))
        ref += float(np.sum(np.abs(np.asarray(x)) ** 2))
    return FilterDesign(order=float(alpha), h=h, T=T, q=q, nmse=err / ref if ref > 0 else 0.0, method=method)


def apply_filter(t: ManifoldTransform, design: FilterDesign, y, *, real: bool = True) -> np.ndarray:
    """``B^{-1/2} F^(-alpha) diag(h) F^(alpha) B^{1/2} y``."""
    y = np.asarray(y)
    if y.shape[0] != t.n or design.h.shape[0] != t.n:
        raise DimensionMismatch(f"signal and filter must both have {t.n} entries")
    col = y.ndim == 1
    Y = (y[:, None] if col else y) * t.b_half[:, None]
    Yh = t.apply(design.order, Y.astype(complex))
    out = t.apply(-design.order, design.h[:, None] * Yh) * t.b_half_inv[:, None]
    if col:
        out = out[:, 0]
    return out.real if real else out


def nmse(estimate, reference) -> float:
    reference = np.asarray(reference)
    return float(np.sum(np.abs(np.asarray(estimate) - reference) ** 2) / np.sum(np.abs(reference) ** 2))


def synthetic_clutter(
    R: int = 10,
    M: int = 251,
    *,
    shape: float = 1.5,
    correlation: float = 0.95,
    doppler_hz: float = 40.0,
    texture_block: int = 64,
    prf_hz: float = 1075.0,
    wavelength_m: float = 0.03,
    seed: int = 0,
) -> RadarCube:
    """Compound-Gaussian (K-distributed) sea-clutter stand-in.

    Gamma texture (unit mean, given shape) held over blocks of pulses,
    times AR(1) complex Gaussian speckle with a Doppler-shifted pole.
    """
    rng = np.random.default_rng(seed)
    blocks = -(-M // texture_block)
    tex = rng.gamma(shape, 1.0 / shape, size=(R, blocks))
    tex = np.repeat(tex, texture_block, axis=1)[:, :M]
    pole = correlation * np.exp(2j * np.pi * doppler_hz / prf_hz)
    w = (rng.normal(size=(R, M)) + 1j * rng.normal(size=(R, M))) / math.sqrt(2.0)
    # stationary start: s_0 = w_0, then s_m = pole s_{m-1} + sqrt(1 - rho^2) w_m
    innov = math.sqrt(1.0 - correlation**2)
    drive = innov * w
    drive[:, 0] = w[:, 0]
    s = scipy.signal.lfilter([1.0], [1.0, -pole], drive, axis=1)
    return RadarCube(np.sqrt(tex) * s, prf_hz=prf_hz, wavelength_m=wavelength_m)


# --- experiment drivers -------------------------------------------------


def _segments(cube: RadarCube, protocol: FilterProtocol, count: int, rng) -> list:
    """``count`` random pulse windows of the cube (distinct when possible)."""
    M = protocol.pulses
    if cube.pulses < M:
        raise DimensionMismatch(f"cube has {cube.pulses} pulses, protocol needs {M}")
    starts = np.arange(0, cube.pulses - M + 1, M)
    if starts.size >= count:
        picks = rng.choice(starts, size=count, replace=False)
    else:
        picks = rng.integers(0, cube.pulses - M + 1, size=count)
    return [cube.segment(int(s), M) for s in picks]


@dataclass
class ClutterSource:
    """Yields independent R x M clutter segments.

    Backed either by a long measured cube (random pulse windows) or by the
    synthetic generator (fresh seed per draw).
    """

    cube: RadarCube | None = None
    protocol: FilterProtocol = field(default_factory=FilterProtocol)
    synthetic: dict = field(default_factory=dict)

    def draw(self, seed: int) -> RadarCube:
        p = self.protocol
        if self.cube is None:
            return synthetic_clutter(p.range_cells, p.pulses, seed=seed, **self.synthetic)
        rng = np.random.default_rng(seed)
        return _segments(self.cube, p, 1, rng)[0]


def _observe(clutter: RadarCube, protocol: FilterProtocol, scr_db, phase):
    sv = steering_vector(protocol.velocity, clutter.wavelength_m, clutter.prf_hz, clutter.pulses)
    cube = inject_target(clutter, protocol.target_cell, scr_db, sv, phase=phase)
    y = cube_to_cloud(cube).points[:, 2]
    x = estimate_reference(y, cube.range_cells, cube.pulses, protocol.window)
    return y, x


def _realization(source: ClutterSource, seed: int, scr_db):
    rng = np.random.default_rng(seed)
    phase = float(rng.uniform(0.0, 2 * np.pi))
    return _observe(source.draw(seed), source.protocol, scr_db, phase)


def reference_transform(source: ClutterSource, t_builder: Callable | None = None) -> ManifoldTransform:
    """Transform of the held-out evaluation realization's cloud."""
    builder = t_builder or transform_for_cloud
    p = source.protocol
    clutter = source.draw(p.seed)
    sv = steering_vector(p.velocity, clutter.wavelength_m, clutter.prf_hz, clutter.pulses)
    cube = inject_target(clutter, p.target_cell, p.scr_db, sv, phase=0.0)
    return builder(cube_to_cloud(cube))


def sweep_alpha(
    t_builder: Callable | ManifoldTransform | None,
    cube: RadarCube | ClutterSource | None,
    alphas: Sequence[float],
    protocol: FilterProtocol | None = None,
) -> SweepResult:
    """NMSE of the optimal filter on a held-out realization for every order.

    Training realizations use seeds ``seed + 1 ... seed + train_realizations``;
    the evaluation realization uses ``seed``.
    """
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise ValidationError("alphas must be non-empty")
    source = cube if isinstance(cube, ClutterSource) else ClutterSource(cube=cube, protocol=protocol or FilterProtocol())
    if protocol is not None:
        source = replace(source, protocol=protocol)
    p = source.protocol
    if isinstance(t_builder, ManifoldTransform):
        t = t_builder
    else:
        t = reference_transform(source, t_builder)
    y_eval, x_eval = _realization(source, p.seed, p.scr_db)
    train = [_realization(source, p.seed + 1 + k, p.scr_db) for k in range(p.train_realizations)]
    curve, residues = [], []
    for a in alphas:
        design = design_filter(t, a, train, method=p.method)
        out = apply_filter(t, design, y_eval, real=False)
        residues.append(float(np.max(np.abs(out.imag))))
        curve.append((a, nmse(out.real, x_eval)))
    best = min(curve, key=lambda ab: ab[1])[0]
    return SweepResult(curve=curve, best_alpha=best, residues=residues)


@dataclass(frozen=True)
class FilterRun:
    transform: ManifoldTransform
    design: FilterDesign
    observed: np.ndarray
    reference: np.ndarray
    filtered: np.ndarray

    @property
    def nmse(self) -> float:
        return nmse(self.filtered, self.reference)


def run_filter(
    source: ClutterSource, alpha: float, *, transform: ManifoldTransform | None = None, t_builder: Callable | None = None
) -> FilterRun:
    """Design at ``alpha`` on the training realizations and filter the evaluation realization."""
    p = source.protocol
    t = transform if transform is not None else reference_transform(source, t_builder)
    y_eval, x_eval = _realization(source, p.seed, p.scr_db)
    train = [_realization(source, p.seed + 1 + k, p.scr_db) for k in range(p.train_realizations)]
    design = design_filter(t, alpha, train, method=p.method)
    return FilterRun(t, design, y_eval, x_eval, apply_filter(t, design, y_eval))


def _cell_energy(signal, R, M):
    return np.sum(np.asarray(signal).reshape(R, M) ** 2, axis=1)


def _cfar_ratio(signal, R, M, cell):
    e = _cell_energy(signal, R, M)
    others = np.delete(e, cell)
    return e[cell] / np.mean(others)


def monte_carlo_detection(
    cube: RadarCube | ClutterSource | None,
    scr_grid: Sequence[float | None],
    trials: int,
    alpha: float,
    threshold_policy: CfarPolicy | None = None,
    protocol: FilterProtocol | None = None,
    *,
    transform: ManifoldTransform | None = None,
    t_builder: Callable | None = None,
) -> list:
    """Empirical detection probability per SCR (``None`` in the grid means no target).

    The filter is designed once at ``protocol.scr_db`` from the training
    realizations, the CFAR multiplier is calibrated on clutter-only trials,
    and trial ``k`` at every SCR uses seed ``seed + 100 + k`` so curves are
    paired across SCR values.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    policy = threshold_policy or CfarPolicy()
    source = cube if isinstance(cube, ClutterSource) else ClutterSource(cube=cube, protocol=protocol or FilterProtocol())
    if protocol is not None:
        source = replace(source, protocol=protocol)
    p = source.protocol
    t = transform if transform is not None else reference_transform(source, t_builder)
    train = [_realization(source, p.seed + 1 + k, p.scr_db) for k in range(p.train_realizations)]
    design = design_filter(t, alpha, train, method=p.method)
    R, M = p.range_cells, p.pulses

    def stat(seed, scr):
        y, _ = _realization(source, seed, scr)
        return _cfar_ratio(apply_filter(t, design, y), R, M, p.target_cell)

    null = np.array([stat(p.seed + policy.seed_offset + k, None) for k in range(policy.calibration_trials)])
    multiplier = float(np.quantile(null, 1.0 - policy.pfa, method="higher"))
    results = []
    for scr in scr_grid:
        hits = sum(stat(p.seed + 100 + k, scr) > multiplier for k in range(trials))
        results.append((scr, hits / trials))
    return results
