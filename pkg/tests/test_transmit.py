import numpy as np
import pytest

from uavcsi.channel import generate_g2u
from uavcsi.config import ChannelConfig
from uavcsi.errors import ConfigurationError, DegenerateSignalError
from uavcsi.transmit import (build_superframe, compress, demap_qpsk,
                             despread_tx_check, draw_compression_matrix,
                             modulate_qpsk, remodulate, spread, superimpose,
                             walsh_matrix)

CH = ChannelConfig()


def test_compress_unit_vector_propagation():
    n = 4
    phi = np.zeros((4, n), dtype=complex)
    phi[0, 0] = 1.0
    h = np.zeros(4, dtype=complex)
    h[0] = 1.0
    z, z_norm = compress(h, phi)
    assert abs(z_norm - 0.5) < 1e-15  # ||e_1|| / sqrt(4)
    assert np.allclose(z, [2.0, 0, 0, 0])  # sqrt(N) e_1


def test_compress_output_norm_is_n():
    phi = draw_compression_matrix(12, 4, seed=3)
    rng = np.random.default_rng(0)
    h = rng.standard_normal(12) + 1j * rng.standard_normal(12)
    z, _ = compress(h, phi)
    assert abs(np.linalg.norm(z) ** 2 - 4.0) < 1e-12


def test_compress_roundtrip_reproduces_raw_product():
    # (x / a) * a is not IEEE bit-exact in general; 1e-14 relative instead
    phi = draw_compression_matrix(20, 5, seed=4)
    rng = np.random.default_rng(1)
    h = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    z, z_norm = compress(h, phi)
    raw = h @ phi.phi
    assert np.linalg.norm(z * z_norm - raw) / np.linalg.norm(raw) < 1e-14


def test_compress_zero_csi_rejected():
    phi = draw_compression_matrix(8, 4, seed=5)
    with pytest.raises(DegenerateSignalError):
        compress(np.zeros(8, dtype=complex), phi)


def test_compress_shape_mismatch_rejected():
    phi = draw_compression_matrix(8, 4, seed=6)
    with pytest.raises(ConfigurationError):
        compress(np.ones(7, dtype=complex), phi)


def test_spread_zero_gives_zero():
    q = walsh_matrix(8, 4)
    assert not spread(np.zeros(4, dtype=complex), q).any()


def test_spread_scalar_case():
    q = walsh_matrix(2, 1)  # [[1], [1]]
    s = spread(np.array([1.0 + 0.0j]), q)
    assert np.allclose(s, [1.0, 1.0])


def test_despread_inverts_spread():
    q = walsh_matrix(64, 16)
    rng = np.random.default_rng(2)
    z = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    s = spread(z, q)
    assert np.linalg.norm(despread_tx_check(s, q) - z) < 1e-12


@pytest.mark.parametrize("m,n", [(512, 64), (8, 8), (16, 5), (1, 1)])
def test_walsh_columns_orthogonal_exactly(m, n):
    q = walsh_matrix(m, n)
    assert q.dtype == np.int64
    assert np.array_equal(q.T @ q, m * np.eye(n, dtype=np.int64))


def test_walsh_rejects_bad_sizes():
    with pytest.raises(ConfigurationError):
        walsh_matrix(12, 4)
    with pytest.raises(ConfigurationError):
        walsh_matrix(8, 9)


def test_superimpose_extremes_exact():
    rng = np.random.default_rng(3)
    s = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    d = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    assert np.array_equal(superimpose(s, d, 0.0, 4.0), 2.0 * d)
    assert np.array_equal(superimpose(s, d, 1.0, 4.0), 2.0 * s)
    with pytest.raises(ConfigurationError):
        superimpose(s, d, 1.2, 1.0)
    with pytest.raises(ConfigurationError):
        superimpose(s, d, 0.5, 0.0)


def test_qpsk_gray_map_and_roundtrip():
    d = modulate_qpsk(np.array([0, 0, 1, 1, 0, 1, 1, 0]))
    r2 = 1.0 / np.sqrt(2.0)
    assert np.allclose(d, [r2 * (1 + 1j), r2 * (-1 - 1j), r2 * (1 - 1j), r2 * (-1 + 1j)])
    for bits in ([0, 0], [0, 1], [1, 0], [1, 1]):
        sym = modulate_qpsk(np.array(bits))
        assert np.array_equal(demap_qpsk(sym), np.array(bits))
    with pytest.raises(ConfigurationError):
        modulate_qpsk(np.array([0, 1, 0]))


def test_demap_zero_maps_to_bit_zero():
    assert np.array_equal(demap_qpsk(np.array([0.0 + 0.0j])), np.array([0, 0]))
    assert np.allclose(remodulate(np.array([0.0 + 0.0j])),
                       np.array([(1 + 1j) / np.sqrt(2.0)]))


def test_superframe_power_audit():
    # per-symbol average transmit power and the CSI share of it
    phi = draw_compression_matrix(CH.n_truncated * CH.n_antennas, CH.n_antennas, 7)
    q = walsh_matrix(128, CH.n_antennas)
    rho, eu = 0.15, 1.0
    tot = csi = 0.0
    n_frames = 10_000
    for i in range(n_frames):
        rng = np.random.default_rng(100 + i)
        h = generate_g2u(CH, bool(i % 2), rng).h
        fr = build_superframe(h, rng.integers(0, 2, size=2 * 128), phi, q, rho, eu)
        tot += np.mean(np.abs(fr.x) ** 2)
        csi += rho * eu * np.mean(np.abs(fr.s) ** 2)
    assert abs(tot / n_frames - eu) < 0.02 * eu
    assert abs(csi / tot - rho) < 0.02 * rho


def test_superframe_determinism():
    phi = draw_compression_matrix(CH.n_truncated * CH.n_antennas, CH.n_antennas, 7)
    q = walsh_matrix(128, CH.n_antennas)
    h = generate_g2u(CH, True, np.random.default_rng(5)).h
    bits = np.random.default_rng(6).integers(0, 2, size=256)
    a = build_superframe(h, bits, phi, q, 0.2, 1.0)
    b = build_superframe(h, bits, phi, q, 0.2, 1.0)
    assert np.array_equal(a.x, b.x)
    assert a.z_norm == b.z_norm


def test_compression_matrix_stats():
    phi = draw_compression_matrix(320, 64, seed=7)
    assert phi.phi.shape == (320, 64)
    var = np.mean(np.abs(phi.phi) ** 2)
    assert abs(var - 1.0 / 320.0) / (1.0 / 320.0) < 0.05
    again = draw_compression_matrix(320, 64, seed=7)
    assert np.array_equal(phi.phi, again.phi)
