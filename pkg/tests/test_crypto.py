import numpy as np
import pytest

from conftest import cloud_transform
from pmfht.errors import ChaosDiverged, DimensionMismatch, ValidationError
from pmfht.crypto import (
    DEFAULT_KEY,
    EncryptedCloud,
    EncryptionKey,
    decrypt,
    encrypt,
    henon_orbit,
    henon_phases,
    phase_masks,
    relative_error,
)
from pmfht.io import write_ciphertext

MODELS = ("blob", "torus", "swiss_roll")


@pytest.fixture(scope="module")
def blob200():
    cloud, lbo, _, t = cloud_transform("blob", 200, 7)
    return cloud, lbo, t


def round_trip(cloud, t, key, dkey=None):
    return relative_error(decrypt(encrypt(cloud, t, key), t, dkey or key), cloud)


def test_henon_first_iterate():
    u, v = henon_orbit(1.4, 0.3, 0.12, 0.1, 3)
    assert u[0] == pytest.approx(1.07984, abs=1e-12)
    assert v[0] == pytest.approx(0.036, abs=1e-12)
    assert u[1] == pytest.approx(1 - 1.4 * 1.07984**2 + 0.036, abs=1e-12)


def test_henon_zero_b_kills_v():
    _, v = henon_orbit(1.4, 0.0, 0.12, 0.1, 50)
    assert np.all(v == 0)


def test_henon_diverges_outside_regime():
    with pytest.raises(ChaosDiverged):
        henon_orbit(4.0, 0.3, 0.12, 0.1, 200)
    with pytest.raises(ChaosDiverged):
        henon_phases(DEFAULT_KEY.replace(henon_a=3.0), 50)


def test_phases_deterministic_and_in_range():
    a = henon_phases(DEFAULT_KEY, 500, stream=1)
    b = henon_phases(DEFAULT_KEY, 500, stream=1)
    assert np.array_equal(a, b)
    assert np.all((a >= 0) & (a < 1))


def test_streams_differ():
    m = phase_masks(DEFAULT_KEY, 300)
    assert m.shape == (300, 3)
    assert abs(np.corrcoef(m[:, 0], m[:, 1])[0, 1]) < 0.3
    assert not np.allclose(m[:, 0], m[:, 2])


def test_burn_in_shifts_sequence():
    us, _ = henon_orbit(1.4, 0.3, 0.12, 0.1, 110)
    seq = henon_phases(DEFAULT_KEY.replace(burn_in=100), 10)
    tail = us[100:]
    assert np.allclose(seq, np.mod((tail - tail.min()) / np.ptp(tail), 1.0))


def test_key_validation():
    with pytest.raises(ValidationError):
        EncryptionKey(alpha_fwd=(0.1, 0.2))
    with pytest.raises(ValidationError):
        EncryptionKey(u0=float("nan"))
    with pytest.raises(ValidationError):
        EncryptionKey(burn_in=-1)


def test_identity_with_zero_mask(blob200):
    cloud, _, t = blob200
    key = EncryptionKey(alpha_fwd=(0.4, 0.9, 1.3), alpha_inv=(0.4, 0.9, 1.3))
    enc = encrypt(cloud, t, key, masks=np.zeros((200, 3)))
    assert np.max(np.abs(enc.coords - cloud.points)) <= 1e-10 * np.max(np.abs(cloud.points))


def axis_correlations(cloud, enc):
    return np.array([np.corrcoef(enc[:, d].real, cloud.points[:, d])[0, 1] for d in range(3)])


def test_default_key_correlation_regression(blob200):
    cloud, _, t = blob200
    rho = axis_correlations(cloud, encrypt(cloud, t, DEFAULT_KEY).coords)
    assert np.allclose(rho, [0.08571267326459768, 0.2192704534439011, 0.034668202413644676], atol=1e-6)


def test_default_key_scrambles_on_average():
    # measured mean |rho| = 0.076 over these 45 axes; 93% of axes fall below 0.2
    rhos = []
    for model in MODELS:
        for seed in range(5):
            cloud, _, _, t = cloud_transform(model, 300, seed)
            rhos.extend(np.abs(axis_correlations(cloud, encrypt(cloud, t, DEFAULT_KEY).coords)))
    assert np.mean(rhos) < 0.1
    assert np.mean(np.array(rhos) < 0.2) >= 0.9


@pytest.mark.xfail(reason="a few low harmonics carry the coordinates, so single-axis rho reaches 0.2-0.35", strict=True)
def test_default_key_scrambles_every_axis(blob200):
    cloud, _, t = blob200
    assert np.all(np.abs(axis_correlations(cloud, encrypt(cloud, t, DEFAULT_KEY).coords)) < 0.2)


def test_energy_bookkeeping(blob200):
    cloud, lbo, t = blob200
    enc = encrypt(cloud, t, DEFAULT_KEY).coords
    m = np.sqrt(lbo.mass)
    for d in range(3):
        e0 = np.linalg.norm(m * cloud.points[:, d])
        assert abs(np.linalg.norm(m * enc[:, d]) - e0) <= 1e-9 * e0


def test_default_key_round_trip(blob200):
    cloud, _, t = blob200
    enc = encrypt(cloud, t, DEFAULT_KEY)
    raw = decrypt(enc, t, DEFAULT_KEY, real=False)
    assert np.max(np.abs(raw.imag)) <= 1e-9
    assert relative_error(decrypt(enc, t, DEFAULT_KEY), cloud) <= 1e-10


def test_wrong_order_key_fails(blob200):
    cloud, _, t = blob200
    wrong = DEFAULT_KEY.replace(alpha_inv=(0.10, 0.20, 0.90))
    assert round_trip(cloud, t, DEFAULT_KEY, wrong) > 0.1


def test_wrong_initial_state_fails(blob200):
    cloud, _, t = blob200
    assert round_trip(cloud, t, DEFAULT_KEY, DEFAULT_KEY.replace(u0=0.12 + 1e-10)) > 0.1
    assert round_trip(cloud, t, DEFAULT_KEY, DEFAULT_KEY.replace(v0=0.1 + 1e-9)) > 0.1


@pytest.mark.parametrize("model", MODELS)
def test_random_keys_round_trip(model):
    cloud, _, _, t = cloud_transform(model, 150, 3)
    rng = np.random.default_rng(99)
    for _ in range(20):
        key = EncryptionKey(
            alpha_fwd=tuple(rng.uniform(-2, 2, 3)),
            alpha_inv=tuple(rng.uniform(-2, 2, 3)),
            u0=rng.uniform(-0.3, 0.3),
            v0=rng.uniform(-0.2, 0.2),
        )
        assert round_trip(cloud, t, key) <= 1e-10


def test_order_perturbation_error_is_linear(blob200):
    # orders enter smoothly, so the mismatch error scales with the perturbation
    cloud, _, t = blob200
    errs = []
    for eps in (1e-6, 1e-4, 1e-2):
        wrong = DEFAULT_KEY.replace(alpha_inv=(0.60 + eps, 0.20, 0.90))
        errs.append(round_trip(cloud, t, DEFAULT_KEY, wrong))
    assert 10 ** 1.8 < errs[1] / errs[0] < 10 ** 2.2
    assert 10 ** 1.8 < errs[2] / errs[1] < 10 ** 2.2


@pytest.mark.xfail(reason="order mismatch error is linear in the perturbation, ~1e-6 at 1e-6", strict=True)
def test_order_perturbation_floor(blob200):
    cloud, _, t = blob200
    for d in range(3):
        for field in ("alpha_fwd", "alpha_inv"):
            orders = list(getattr(DEFAULT_KEY, field))
            orders[d] += 1e-6
            assert round_trip(cloud, t, DEFAULT_KEY, DEFAULT_KEY.replace(**{field: tuple(orders)})) > 0.05


def test_state_perturbation_floor(blob200):
    cloud, _, t = blob200
    for field in ("u0", "v0"):
        wrong = DEFAULT_KEY.replace(**{field: getattr(DEFAULT_KEY, field) + 1e-9})
        assert round_trip(cloud, t, DEFAULT_KEY, wrong) > 0.05


def test_ciphertext_file_bit_identical(blob200, tmp_path):
    cloud, _, t = blob200
    a, b = tmp_path / "a.enc", tmp_path / "b.enc"
    write_ciphertext(a, encrypt(cloud, t, DEFAULT_KEY))
    write_ciphertext(b, encrypt(cloud, t, DEFAULT_KEY))
    assert a.read_bytes() == b.read_bytes()


def test_shape_checks(blob200):
    cloud, _, t = blob200
    with pytest.raises(DimensionMismatch):
        encrypt(cloud.points[:10], t, DEFAULT_KEY)
    with pytest.raises(DimensionMismatch):
        decrypt(EncryptedCloud(np.zeros((10, 3), complex)), t, DEFAULT_KEY)
