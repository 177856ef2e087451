from functools import lru_cache

import numpy as np
import pytest
import scipy.sparse
from scipy.stats import binomtest

from oracles import dense_F, filter_normal_equations, filter_objective, rank_one_sum
from pmfht.clutter import (
    CfarPolicy,
    ClutterSource,
    FilterDesign,
    FilterProtocol,
    RadarCube,
    apply_filter,
    cube_to_cloud,
    design_filter,
    estimate_reference,
    inject_target,
    monte_carlo_detection,
    nmse,
    run_filter,
    steering_vector,
    sweep_alpha,
    synthetic_clutter,
)
from pmfht.errors import DimensionMismatch, EmptyCube, IndexOutOfRange, SingularSystem, ValidationError
from pmfht.transform import transform_for_cloud, transform_from_orthogonal

SMALL = FilterProtocol(range_cells=6, pulses=24, target_cell=2, train_realizations=3, seed=5)


@lru_cache(maxsize=None)
def radar_transform(R=6, M=24, seed=0):
    cube = synthetic_clutter(R, M, seed=seed)
    return cube, transform_for_cloud(cube_to_cloud(cube))


def random_transform(n, seed):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return transform_from_orthogonal(Q, rng.uniform(0.5, 2.0, n)), rng


def clutter_pairs(t, rng, L, scale=0.3):
    out = []
    for _ in range(L):
        x = rng.normal(size=t.n)
        out.append((x + scale * rng.normal(size=t.n), x))
    return out


# --- cube and cloud -----------------------------------------------------


def test_cube_to_cloud_constant_power():
    pts = cube_to_cloud(RadarCube(np.exp(1j * np.arange(4.0)).reshape(2, 2))).points
    assert pts.shape == (4, 3)
    assert np.all(pts[:, 2] == pts[0, 2])
    assert np.array_equal(pts[:, 0], [0, 0, 1, 1])
    assert np.array_equal(pts[:, 1], [0, 1, 0, 1])


def test_cube_to_cloud_size_and_scaling():
    pts = cube_to_cloud(synthetic_clutter(10, 251, seed=3)).points
    assert pts.shape == (2510, 3)
    for d in range(3):
        assert pts[:, d].min() == 0.0 and pts[:, d].max() == 1.0


def test_cube_to_cloud_range_major():
    e = np.ones((3, 4), dtype=complex)
    e[1, 2] = 10.0
    z = cube_to_cloud(RadarCube(e)).points[:, 2]
    assert np.argmax(z) == 1 * 4 + 2


def test_cube_validation():
    with pytest.raises(EmptyCube):
        RadarCube(np.zeros((0, 5)))
    with pytest.raises(EmptyCube):
        RadarCube(np.ones((3, 1)))
    with pytest.raises(ValidationError):
        RadarCube(np.full((2, 2), np.nan))
    with pytest.raises(ValidationError):
        RadarCube(np.ones((2, 2)), prf_hz=0.0)


def test_steering_vector():
    sv = steering_vector(2.58, 0.03, 1075.0, 251)
    assert sv.doppler_hz == pytest.approx(172.0, abs=1e-9)
    assert np.linalg.norm(sv.values) == pytest.approx(1.0, abs=1e-12)
    assert sv.values[1] == pytest.approx(np.exp(-2j * np.pi * 172.0 / 1075.0) / np.sqrt(251))
    still = steering_vector(0.0, 0.03, 1075.0, 9)
    assert np.allclose(still.values, np.ones(9) / 3.0, atol=1e-15)
    with pytest.raises(ValidationError):
        steering_vector(1.0, 0.0, 1075.0, 9)


def test_inject_target_amplitude():
    cube = synthetic_clutter(5, 40, seed=1)
    sv = steering_vector(2.58, cube.wavelength_m, cube.prf_hz, 40)
    out = inject_target(cube, 4, 6.0, sv)
    added = out.echoes - cube.echoes
    p_clutter = np.mean(np.abs(cube.echoes[4]) ** 2)
    assert 10 * np.log10(np.sum(np.abs(added[4]) ** 2) / p_clutter) == pytest.approx(6.0, abs=1e-10)
    assert np.all(added[:4] == 0)


def test_inject_nothing_and_bad_cell():
    cube = synthetic_clutter(5, 40, seed=1)
    sv = steering_vector(2.58, cube.wavelength_m, cube.prf_hz, 40)
    assert np.array_equal(inject_target(cube, 4, None, sv).echoes, cube.echoes)
    with pytest.raises(IndexOutOfRange):
        inject_target(cube, 5, 0.0, sv)
    with pytest.raises(DimensionMismatch):
        inject_target(cube, 1, 0.0, steering_vector(2.58, 0.03, 1075.0, 39))


def test_reference_window_one_is_self():
    y = np.random.default_rng(0).normal(size=30)
    assert np.array_equal(estimate_reference(y, 5, 6, window=1), y)


def test_reference_constant_field():
    assert np.allclose(estimate_reference(np.full(20, 0.7), 4, 5), 0.7)


def test_reference_ramp_clamps_edges():
    y = np.repeat([0.0, 1.0, 2.0], 4)
    ref = estimate_reference(y, 3, 4, window=3).reshape(3, 4)
    assert np.allclose(ref[0], 1.0 / 3.0)
    assert np.allclose(ref[1], 1.0)
    assert np.allclose(ref[2], 5.0 / 3.0)


def test_reference_validation():
    with pytest.raises(ValidationError):
        estimate_reference(np.zeros(12), 3, 4, window=2)
    with pytest.raises(DimensionMismatch):
        estimate_reference(np.zeros(11), 3, 4)


def test_synthetic_clutter_statistics():
    cube = synthetic_clutter(10, 4096, seed=2)
    e = cube.echoes
    assert np.mean(np.abs(e) ** 2) == pytest.approx(1.0, rel=0.15)
    lag1 = np.mean(e[:, 1:] * np.conj(e[:, :-1])) / np.mean(np.abs(e) ** 2)
    assert abs(lag1) == pytest.approx(0.95, abs=0.03)
    assert np.angle(lag1) == pytest.approx(2 * np.pi * 40.0 / 1075.0, abs=0.05)
    assert np.array_equal(synthetic_clutter(3, 20, seed=9).echoes, synthetic_clutter(3, 20, seed=9).echoes)


# --- design -------------------------------------------------------------


def test_clutter_free_design_is_perfect():
    _, t = radar_transform()
    x = cube_to_cloud(synthetic_clutter(6, 24, seed=11)).points[:, 2]
    d = design_filter(t, 0.5, [(x, x)])
    assert d.nmse <= 1e-8
    assert nmse(apply_filter(t, d, x), x) <= 1e-8


@pytest.mark.parametrize("alpha", [0.3, 1.0])
def test_small_design_matches_normal_equations(alpha):
    t, rng = random_transform(6, 1)
    pairs = clutter_pairs(t, rng, 4)
    d = design_filter(t, alpha, pairs, method="dense")
    ref = filter_normal_equations(t, alpha, pairs)
    assert np.linalg.norm(d.h - ref) <= 1e-8 * np.linalg.norm(ref)


def test_design_residual_invariant():
    _, t = radar_transform()
    rng = np.random.default_rng(3)
    pairs = clutter_pairs(t, rng, 3)
    for method in ("dense", "diagonal"):
        d = design_filter(t, 0.7, pairs, method=method)
        assert d.residual <= 1e-6 * np.linalg.norm(d.q)
        assert d.method == method


def test_order_one_system_is_diagonal():
    # at alpha = 1 (indeed at any order) S^H S is diagonal and h_i = q_i / T_ii
    t, rng = random_transform(10, 2)
    pairs = clutter_pairs(t, rng, 3)
    d = design_filter(t, 1.0, pairs, method="dense")
    off = d.T - np.diag(np.diag(d.T))
    assert np.max(np.abs(off)) <= 1e-12 * np.max(np.abs(d.T))
    assert np.allclose(d.h, d.q / np.diag(d.T), rtol=1e-8)
    # the diagonal entries are the per-mode harmonic powers
    yh = np.column_stack([t.apply(1.0, t.b_half * y) for y, _ in pairs])
    assert np.allclose(np.diag(d.T).real, np.mean(np.abs(yh) ** 2, axis=1))


def test_dense_and_diagonal_paths_agree():
    _, t = radar_transform()
    pairs = clutter_pairs(t, np.random.default_rng(4), 3)
    a = design_filter(t, 0.45, pairs, method="dense")
    b = design_filter(t, 0.45, pairs, method="diagonal")
    assert scipy.sparse.issparse(b.T)
    assert np.linalg.norm(a.h - b.h) <= 1e-6 * np.linalg.norm(a.h)
    assert a.nmse == pytest.approx(b.nmse, rel=1e-6)


def test_design_is_optimal_against_perturbations():
    rng = np.random.default_rng(5)
    for inst in range(5):
        t, _ = random_transform(12, 100 + inst)
        pairs = clutter_pairs(t, rng, 3, scale=0.5)
        alpha = rng.uniform(0.1, 1.9)
        h = design_filter(t, alpha, pairs).h
        best = filter_objective(t, alpha, h, pairs)
        for _ in range(100):
            delta = rng.normal(size=12) + 1j * rng.normal(size=12)
            delta *= 0.01 * np.linalg.norm(h) / np.linalg.norm(delta)
            assert best <= filter_objective(t, alpha, h + delta, pairs)


def test_singular_system_on_zero_data():
    t, _ = random_transform(6, 3)
    with pytest.raises(SingularSystem):
        design_filter(t, 0.5, [(np.zeros(6), np.ones(6))])


def test_design_validation():
    t, _ = random_transform(6, 3)
    with pytest.raises(ValidationError):
        design_filter(t, 0.5, [])
    with pytest.raises(DimensionMismatch):
        design_filter(t, 0.5, [(np.ones(5), np.ones(5))])
    with pytest.raises(ValidationError):
        design_filter(t, 0.5, [(np.ones(6), np.ones(6))], method="qr")


# --- application --------------------------------------------------------


def test_identity_and_zero_filters():
    _, t = radar_transform()
    y = np.random.default_rng(6).normal(size=t.n)
    ones = FilterDesign(0.6, np.ones(t.n, dtype=complex), None, None, 0.0)
    zeros = FilterDesign(0.6, np.zeros(t.n, dtype=complex), None, None, 0.0)
    assert np.max(np.abs(apply_filter(t, ones, y) - y)) <= 1e-10
    assert np.all(apply_filter(t, zeros, y) == 0)
    with pytest.raises(DimensionMismatch):
        apply_filter(t, ones, y[:-1])


def test_rank_one_sum_identity():
    rng = np.random.default_rng(7)
    for n in (5, 12, 20):
        t, _ = random_transform(n, n)
        alpha = rng.uniform(-2, 2)
        h = rng.normal(size=n) + 1j * rng.normal(size=n)
        lhs = dense_F(t, -alpha) @ np.diag(h) @ dense_F(t, alpha)
        assert np.max(np.abs(lhs - rank_one_sum(t, alpha, h))) <= 1e-9
        y = rng.normal(size=n)
        expected = rank_one_sum(t, alpha, h) @ (t.b_half * y) / t.b_half
        out = apply_filter(t, FilterDesign(alpha, h, None, None, 0.0), y, real=False)
        assert np.max(np.abs(out - expected)) <= 1e-9 * max(1.0, np.max(np.abs(expected)))


def test_contraction_does_not_gain_energy():
    _, t = radar_transform()
    rng = np.random.default_rng(8)
    for _ in range(10):
        h = rng.uniform(0, 1, t.n) * np.exp(2j * np.pi * rng.uniform(size=t.n))
        y = rng.normal(size=t.n)
        out = apply_filter(t, FilterDesign(0.8, h, None, None, 0.0), y, real=False)
        assert np.linalg.norm(t.b_half * out) <= np.linalg.norm(t.b_half * y) * (1 + 1e-12)


# --- experiment drivers -------------------------------------------------


def test_single_alpha_sweep():
    res = sweep_alpha(None, ClutterSource(protocol=SMALL), [0.4])
    assert res.best_alpha == 0.4
    assert len(res.curve) == 1


def test_sweep_argmin_not_worse_than_order_one():
    src = ClutterSource(protocol=SMALL)
    res = sweep_alpha(None, src, [0.1, 0.3, 0.5, 0.7, 1.0])
    values = dict(res.curve)
    assert values[res.best_alpha] == min(values.values())
    assert values[res.best_alpha] <= values[1.0]
    assert max(res.residues) < 1.0


def test_sweep_accepts_prebuilt_transform():
    src = ClutterSource(protocol=SMALL)
    run = run_filter(src, 0.5)
    again = sweep_alpha(run.transform, src, [0.5])
    assert again.curve[0][1] == pytest.approx(run.nmse, rel=1e-12)


def test_sweep_rejects_empty_grid():
    with pytest.raises(ValidationError):
        sweep_alpha(None, ClutterSource(protocol=SMALL), [])


def test_measured_cube_source_draws_windows():
    long = synthetic_clutter(6, 24 * 8, seed=4)
    src = ClutterSource(cube=long, protocol=SMALL)
    seg = src.draw(3)
    assert seg.shape == (6, 24)
    assert np.array_equal(seg.echoes, src.draw(3).echoes)
    with pytest.raises(DimensionMismatch):
        ClutterSource(cube=synthetic_clutter(6, 10, seed=4), protocol=SMALL).draw(0)


DETECT = FilterProtocol(range_cells=6, pulses=32, target_cell=2, train_realizations=2, seed=1)
POLICY = CfarPolicy(pfa=0.05, calibration_trials=200)


@lru_cache(maxsize=None)
def detection_curve():
    src = ClutterSource(protocol=DETECT)
    return dict(monte_carlo_detection(src, [None, 0.0, 10.0, 20.0, 40.0], 100, 0.5, POLICY))


def test_detection_strong_target():
    assert detection_curve()[40.0] >= 0.97


def test_detection_null_rate_matches_pfa():
    pd0 = detection_curve()[None]
    assert binomtest(round(pd0 * 100), 100, POLICY.pfa).pvalue > 0.01


def test_detection_monotone_within_bands():
    curve = detection_curve()
    pds = [curve[s] for s in (0.0, 10.0, 20.0, 40.0)]
    for lo, hi in zip(pds, pds[1:]):
        ci = binomtest(round(lo * 100), 100).proportion_ci(0.95)
        assert hi >= ci.low


def test_detection_validation():
    with pytest.raises(ValidationError):
        monte_carlo_detection(ClutterSource(protocol=DETECT), [0.0], 0, 0.5)
