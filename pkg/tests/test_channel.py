"""Array geometry, transform dictionaries, and channel synthesis.

Independent oracles (plain loops over the defining formulas) come first;
the library is then held to them.
"""
import numpy as np
import pytest

from hybridfield.channel import (angular_dictionary, dft_angles,
                                 element_distances, far_steering, los_channel,
                                 los_template, near_steering,
                                 polar_dictionary, polar_grid,
                                 rayleigh_distance, receive_pilots,
                                 synth_hybrid_channel, transform_dictionary)
from hybridfield.config import SystemConfig
from hybridfield.errors import ConfigError


def distances_oracle(theta, r, num, d):
    # law of cosines per element, scalar loop
    return np.array([np.sqrt(r**2 + (d * n) ** 2 - 2 * d * n * r * theta)
                     for n in range(num)])


def ring_lattice_oracle(cfg):
    """Double loop over (angle, ring): r = Z_beta(theta)/q, clamp to r_max,
    stop below r_min. Mirrors the documented lattice, independently."""
    pairs = []
    for theta in dft_angles(cfg.num_antennas):
        z = (cfg.num_antennas**2 * cfg.spacing**2 * (1 - theta**2)
             / (2 * cfg.ring_scale**2 * cfg.wavelength))
        for q in range(1, cfg.distance_rings + 1):
            r = z / q
            if r < cfg.r_min:
                break
            pairs.append((theta, min(r, cfg.r_max)))
    return pairs


# ---------------------------------------------------------------- geometry

def test_rayleigh_reference_values():
    assert rayleigh_distance(0.5, 0.003) == pytest.approx(166.7, abs=0.05)
    assert rayleigh_distance(0.1, 0.01) == pytest.approx(2.0, abs=1e-12)
    cfg = SystemConfig()
    assert cfg.aperture == pytest.approx(0.381)
    assert rayleigh_distance(cfg.aperture, cfg.wavelength) == pytest.approx(48.4, abs=0.05)


def test_rayleigh_rejects_nonpositive():
    with pytest.raises(ValueError):
        rayleigh_distance(0.0, 0.006)
    with pytest.raises(ValueError):
        rayleigh_distance(0.5, -1.0)


def test_far_steering_quarter_turn():
    got = far_steering(0.5, 4)
    np.testing.assert_allclose(got, np.array([1, -1j, -1, 1j]) / 2, atol=1e-15)


def test_far_steering_basics():
    np.testing.assert_allclose(far_steering(0.0, 4), np.full(4, 0.5), atol=1e-15)
    for theta in (-0.93, 0.2, 1.0):
        assert np.linalg.norm(far_steering(theta, 17)) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        far_steering(1.2, 8)


def test_element_distances_against_loop():
    d = 0.003
    for theta, r in [(0.0, 30.0), (-0.7, 5.0), (0.99, 0.4)]:
        got = element_distances(theta, r, 64, d)
        np.testing.assert_allclose(got, distances_oracle(theta, r, 64, d),
                                   rtol=1e-13)
    assert element_distances(0.3, 12.0, 8, d)[0] == 12.0


def test_element_distances_rejects_impossible_geometry():
    # |theta| > 1 can push the squared distance negative
    with pytest.raises(ValueError):
        element_distances(40.0, 0.01, 64, 0.003)


def test_near_steering_leading_entry_and_norm(default_cfg):
    for theta, r in [(0.0, 10.0), (0.5, 5.0), (-0.8, 47.0)]:
        col = near_steering(theta, r, default_cfg)
        assert col[0] == pytest.approx(1 / np.sqrt(128), abs=1e-15)
        assert np.linalg.norm(col) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        near_steering(0.1, 0.0, default_cfg)


def test_near_steering_far_field_limit(default_cfg):
    z = rayleigh_distance(default_cfg.aperture, default_cfg.wavelength)
    for theta in (-0.6, 0.0, 0.35, 0.9):
        near = near_steering(theta, 1e6 * z, default_cfg)
        far = far_steering(theta, default_cfg.num_antennas)
        assert np.abs(near - far).max() < 1e-3


# ------------------------------------------------------------ dictionaries

def test_dft_angle_grid():
    n = np.arange(1, 129)
    np.testing.assert_allclose(dft_angles(128), (2 * n - 129) / 128, atol=0)
    assert dft_angles(4).tolist() == [-0.75, -0.25, 0.25, 0.75]


def test_angular_dictionary_unitary():
    fa = angular_dictionary(128)
    gram = fa.conj().T @ fa
    assert np.linalg.norm(gram - np.eye(128)) < 1e-10
    np.testing.assert_allclose(angular_dictionary(1), [[1.0]], atol=1e-15)


def test_angular_columns_are_far_steering():
    fa = angular_dictionary(16)
    for i, theta in enumerate(dft_angles(16)):
        np.testing.assert_allclose(fa[:, i], far_steering(theta, 16), atol=1e-14)


def test_polar_grid_matches_lattice_oracle(default_cfg):
    thetas, dists = polar_grid(default_cfg)
    oracle = ring_lattice_oracle(default_cfg)
    assert len(dists) == len(oracle)
    np.testing.assert_allclose(thetas, [p[0] for p in oracle], atol=0)
    np.testing.assert_allclose(dists, [p[1] for p in oracle], rtol=1e-13)
    # lattice never exceeds the nominal N x Q grid and respects coverage
    assert 0 < len(dists) <= 128 * default_cfg.distance_rings
    assert dists.min() >= default_cfg.r_min and dists.max() <= default_cfg.r_max


def test_polar_grid_empty_ring_set_rejected():
    cfg = SystemConfig(num_antennas=16, pilot_len=8)   # Rayleigh ~ 0.2 m << r_min
    with pytest.raises(ConfigError):
        polar_grid(cfg)


def test_polar_dictionary_columns(default_cfg):
    fp = polar_dictionary(default_cfg)
    thetas, dists = polar_grid(default_cfg)
    assert fp.shape == (128, dists.size)
    norms = np.linalg.norm(fp, axis=0)
    np.testing.assert_allclose(norms, 1.0, atol=1e-12)
    # each column is near_steering at its lattice node
    for j in [0, 17, dists.size - 1]:
        np.testing.assert_allclose(
            fp[:, j], near_steering(thetas[j], dists[j], default_cfg), atol=1e-13)


def test_polar_dictionary_far_limit(small_cfg):
    cfg = small_cfg.with_updates(distance_rings=1)
    z = rayleigh_distance(cfg.aperture, cfg.wavelength)
    fp = polar_dictionary(cfg, distances=1e6 * z)
    fa = angular_dictionary(cfg.num_antennas)
    assert fp.shape == fa.shape
    assert np.abs(fp - fa).max() < 1e-3


def test_transform_dictionary_blocks(default_cfg):
    F, dists = transform_dictionary(default_cfg)
    assert F.shape == (128, 128 + dists.size)
    np.testing.assert_allclose(F[:, :128], angular_dictionary(128), atol=0)
    np.testing.assert_allclose(F[:, 128:], polar_dictionary(default_cfg), atol=0)
    np.testing.assert_allclose(np.linalg.norm(F, axis=0), 1.0, atol=1e-12)


# ------------------------------------------------------------- LoS channel

def test_los_channel_single_element():
    cfg = SystemConfig(num_antennas=1, pilot_len=1, r_min=4.0, r_max=60.0)
    r = 12.0
    got = los_channel(r, 0.3, cfg)
    # phase argument is ~1.3e4 rad, so ulp noise in k*r costs ~1e-12 relative
    want = (cfg.los_gain / r) * np.exp(-2j * np.pi * r / cfg.wavelength)
    np.testing.assert_allclose(got, [want], rtol=1e-10)


def test_los_channel_moduli_and_monotone_distances(default_cfg):
    r = 30.0
    h = los_channel(r, 0.0, default_cfg)
    rn = element_distances(0.0, r, 128, default_cfg.spacing)
    np.testing.assert_allclose(np.abs(h), abs(default_cfg.los_gain) / rn, rtol=1e-13)
    assert np.all(np.diff(rn) >= 0)


def test_los_channel_coverage_rejected(default_cfg):
    with pytest.raises(ValueError):
        los_channel(1.0, 0.0, default_cfg)
    with pytest.raises(ValueError):
        los_channel(100.0, 0.0, default_cfg)


def test_los_template_matches_loop(default_cfg):
    r, phi = 9.0, -0.4
    rn = distances_oracle(np.sin(phi), r, 128, default_cfg.spacing)
    want = np.exp(-2j * np.pi * rn / default_cfg.wavelength) / rn
    np.testing.assert_allclose(los_template(r, phi, default_cfg), want, rtol=1e-10)


# ---------------------------------------------------------------- synthesis

def test_synth_decomposition_identity(default_cfg):
    F, dists = transform_dictionary(default_cfg)
    for seed in range(5):
        chan = synth_hybrid_channel(default_cfg, np.random.default_rng(seed),
                                    (F, dists))
        resid = chan.h - (chan.h_los + F @ chan.sparse_coeffs)
        assert np.linalg.norm(resid) < 1e-10 * np.linalg.norm(chan.h)


def test_synth_support_counts_and_labels(default_cfg):
    F, dists = transform_dictionary(default_cfg)
    chan = synth_hybrid_channel(default_cfg, np.random.default_rng(3), (F, dists))
    nz = np.nonzero(chan.sparse_coeffs)[0]
    assert nz.size == default_cfg.num_paths
    np.testing.assert_array_equal(np.sort(nz), chan.support)
    assert (nz < 128).sum() == default_cfg.num_far
    assert (nz >= 128).sum() == default_cfg.num_near


def test_synth_energy_balance(default_cfg):
    F, dists = transform_dictionary(default_cfg)
    chan = synth_hybrid_channel(default_cfg, np.random.default_rng(11), (F, dists))
    scatter = F @ chan.sparse_coeffs
    assert np.linalg.norm(chan.h_los) == pytest.approx(
        np.linalg.norm(scatter), rel=1e-10)


def test_synth_los_only():
    cfg = SystemConfig(num_far=0, num_near=0)
    chan = synth_hybrid_channel(cfg, np.random.default_rng(0))
    assert np.all(chan.sparse_coeffs == 0)
    np.testing.assert_allclose(chan.h, chan.h_los, atol=0)
    # no balancing partner: the 1/sqrt(L+1) = 1 scaling stands
    assert chan.los_gain_eff == cfg.los_gain


def test_synth_coefficient_variance_moment():
    # fixed scatterer distance r ~ 10 and unit gain variance: coefficient
    # variance must come out at (N/(L+1)) / r^2 = (N/(L+1))/100
    cfg = SystemConfig(num_far=4, num_near=0, r_min=10.0, r_max=10.0 + 1e-6,
                       ring_scale=0.8)
    F, dists = transform_dictionary(cfg)
    vals = []
    for seed in range(2500):
        chan = synth_hybrid_channel(cfg, np.random.default_rng(seed), (F, dists))
        vals.append(chan.sparse_coeffs[chan.support])
    vals = np.concatenate(vals)          # 10^4 angular coefficients
    assert vals.size == 10000
    target = (128 / 5) / 100.0
    assert np.mean(np.abs(vals) ** 2) == pytest.approx(target, rel=0.05)


def test_synth_determinism(default_cfg):
    F, dists = transform_dictionary(default_cfg)
    a = synth_hybrid_channel(default_cfg, np.random.default_rng(42), (F, dists))
    b = synth_hybrid_channel(default_cfg, np.random.default_rng(42), (F, dists))
    np.testing.assert_array_equal(a.h, b.h)
    np.testing.assert_array_equal(a.support, b.support)


# ------------------------------------------------------------ measurements

def test_receive_pilots_noise_free(small_cfg, small_ensemble):
    rng = np.random.default_rng(0)
    chan = synth_hybrid_channel(small_cfg, rng,
                                (small_ensemble.F, small_ensemble.ring_dists))
    X = np.ones((small_cfg.pilot_len, small_cfg.num_antennas)) / np.sqrt(32)
    y = receive_pilots(chan.h, X, 0.0, rng)
    np.testing.assert_array_equal(y, X @ chan.h)


def test_receive_pilots_noise_moment():
    M, noise_var = 8, 0.37
    X = np.zeros((M, 4))
    h = np.zeros(4, dtype=complex)
    rng = np.random.default_rng(123)
    total = 0.0
    trials = 10000
    for _ in range(trials):
        y = receive_pilots(h, X, noise_var, rng)
        total += float(np.vdot(y, y).real)
    assert total / trials == pytest.approx(M * noise_var, rel=0.05)


def test_receive_pilots_seeded_repeatability(small_cfg, small_ensemble):
    chan = synth_hybrid_channel(small_cfg, np.random.default_rng(1),
                                (small_ensemble.F, small_ensemble.ring_dists))
    X = np.ones((8, 32)) / np.sqrt(32)
    y1 = receive_pilots(chan.h, X, 0.1, np.random.default_rng(9))
    y2 = receive_pilots(chan.h, X, 0.1, np.random.default_rng(9))
    np.testing.assert_array_equal(y1, y2)
