"""Geometric channel model for a uniform linear array.

Steering vectors, the angular (DFT) and polar (angle x distance ring)
dictionaries, and randomized hybrid-field channel synthesis with ground
truth. All angles theta are spatial frequencies sin(phi) in [-1, 1];
physical angles phi enter only through sin.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


def rayleigh_distance(aperture, wavelength):
    """Near/far-field boundary 2 D^2 / lambda of an aperture-D array."""
    if aperture <= 0 or wavelength <= 0:
        raise ValueError("aperture and wavelength must be positive")
    return 2.0 * aperture**2 / wavelength


def far_steering(theta, num_antennas):
    """Plane-wave array response, entry n = e^{-j pi n theta} / sqrt(N)."""
    if abs(theta) > 1:
        raise ValueError("theta must lie in [-1, 1]")
    n = np.arange(num_antennas)
    return np.exp(-1j * np.pi * n * theta) / np.sqrt(num_antennas)


def element_distances(theta, r, num_antennas, spacing):
    """Exact element-to-source distances r^{(n)} for a ULA anchored at element 1.

    r^{(n)} = sqrt(r^2 + d^2 (n-1)^2 - 2 d r (n-1) theta), n = 1..N.
    """
    n = np.arange(num_antennas)
    sq = r**2 + spacing**2 * n**2 - 2.0 * spacing * r * n * theta
    if np.any(sq < 0):
        raise ValueError("negative squared distance: source geometrically impossible")
    return np.sqrt(sq)


def near_steering(theta, r, cfg):
    """Spherical-wave array response at distance r.

    Entry n = e^{+j (2 pi / lambda) (r^{(n)} - r)} / sqrt(N): the listed
    e^{-j} phases sit under a Hermitian transpose, which conjugates them,
    same as the far-field response. The leading entry is exactly 1/sqrt(N),
    and the column converges entrywise to far_steering(theta) as r grows
    beyond the Rayleigh distance.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    rn = element_distances(theta, r, cfg.num_antennas, cfg.spacing)
    k = 2.0 * np.pi / cfg.wavelength
    return np.exp(1j * k * (rn - r)) / np.sqrt(cfg.num_antennas)


def dft_angles(num_antennas):
    """Angle grid theta_n = (2n - N - 1) / N, n = 1..N."""
    n = np.arange(1, num_antennas + 1)
    return (2.0 * n - num_antennas - 1) / num_antennas


def angular_dictionary(num_antennas):
    """Unitary DFT dictionary; column n is far_steering at theta_n."""
    thetas = dft_angles(num_antennas)
    n = np.arange(num_antennas)[:, None]
    return np.exp(-1j * np.pi * n * thetas[None, :]) / np.sqrt(num_antennas)


def polar_grid(cfg):
    """Angle/distance lattice behind the polar dictionary.

    For every DFT angle theta_n the distance axis is sampled at
    r = Z_beta(theta_n) / q for q = 1..Q, where
    Z_beta(theta) = N^2 d^2 (1 - theta^2) / (2 beta^2 lambda) controls the
    coherence between adjacent rings. Rings falling below r_min are
    dropped (their spherical wavefronts are indistinguishable from the
    floor ring at this aperture); rings beyond r_max are clamped. Angles
    whose Z_beta already sits below r_min contribute no polar columns.

    Returns (thetas, dists), one entry per kept column, angle-major.
    """
    N, d, lam = cfg.num_antennas, cfg.spacing, cfg.wavelength
    beta = cfg.ring_scale
    thetas, dists = [], []
    for theta in dft_angles(N):
        z = N**2 * d**2 * (1.0 - theta**2) / (2.0 * beta**2 * lam)
        for q in range(1, cfg.distance_rings + 1):
            r = z / q
            if r < cfg.r_min:
                break
            thetas.append(theta)
            dists.append(min(r, cfg.r_max))
    if not dists:
        raise ConfigError("empty distance ring set: r_min excludes every ring")
    return np.asarray(thetas), np.asarray(dists)


def _near_columns(thetas, dists, cfg):
    # vectorized near_steering over a list of (theta, r) columns
    n = np.arange(cfg.num_antennas)[:, None]
    d = cfg.spacing
    rr = dists[None, :]
    th = thetas[None, :]
    rn = np.sqrt(rr**2 + d**2 * n**2 - 2.0 * d * rr * n * th)
    k = 2.0 * np.pi / cfg.wavelength
    return np.exp(1j * k * (rn - rr)) / np.sqrt(cfg.num_antennas)


def polar_dictionary(cfg, distances=None):
    """Near-field dictionary; one column per kept (angle, ring) pair.

    distances overrides the sampled ring distances (scalar or per-column
    array) and suspends the r_min floor, keeping Q rings at every DFT
    angle; used for far-field limit checks where every ring is pushed
    beyond the Rayleigh distance.
    """
    if distances is not None:
        thetas = np.repeat(dft_angles(cfg.num_antennas), cfg.distance_rings)
        dists = np.broadcast_to(np.asarray(distances, dtype=float),
                                thetas.shape).copy()
    else:
        thetas, dists = polar_grid(cfg)
    return _near_columns(thetas, dists, cfg)


def transform_dictionary(cfg):
    """Full hybrid dictionary F = [F^A, F^P] plus the polar ring distances."""
    fa = angular_dictionary(cfg.num_antennas)
    thetas, dists = polar_grid(cfg)
    fp = _near_columns(thetas, dists, cfg)
    return np.concatenate([fa, fp], axis=1), dists


def los_template(r, phi, cfg):
    """Unit-gain LoS response, entry n = (1 / r^{(n)}) e^{-j 2 pi r^{(n)} / lambda}."""
    rn = element_distances(np.sin(phi), r, cfg.num_antennas, cfg.spacing)
    k = 2.0 * np.pi / cfg.wavelength
    return np.exp(-1j * k * rn) / rn


def los_channel(r, phi, cfg):
    """LoS channel vector g_LoS * los_template; r must lie inside coverage."""
    if not cfg.r_min <= r <= cfg.r_max:
        raise ValueError(f"r={r} outside coverage [{cfg.r_min}, {cfg.r_max}]")
    return cfg.los_gain * los_template(r, phi, cfg)


@dataclass
class HybridChannel:
    """Ground-truth channel: LoS parameters plus sparse scattering part."""

    los_distance: float
    los_angle: float
    los_gain_eff: complex           # effective gain after energy balancing
    h_los: np.ndarray               # dense LoS component, length N
    sparse_coeffs: np.ndarray       # h^{A,P}, length N' = N + (polar columns)
    support: np.ndarray             # active indices into h^{A,P}, sorted
    h: np.ndarray                   # dense channel h_los + F h^{A,P}
    path_gains: np.ndarray          # per-path g_l
    path_dists: np.ndarray          # per-path r_l
    path_thetas: np.ndarray         # per-path theta_l (post-snap)

    @property
    def num_angular(self):
        return self.h.shape[0]


def synth_hybrid_channel(cfg, rng, ensemble=None):
    """Draw a random hybrid-field channel and its exact sparse representation.

    Scatterer angles/distances are drawn uniformly over the coverage
    region, then snapped to the nearest dictionary atom so h^{A,P} is
    exactly L-sparse. Far-field coefficients are sqrt(N/(L+1)) g_l / r_l
    with g_l ~ CN(0, sigma_A^2); near-field likewise with sigma_P^2. The
    LoS component is drawn with scaling sqrt(1/(L+1)) and then rescaled so
    its energy equals the total scattered energy (skipped when L = 0).

    ensemble: optional (F, ring_dists) pair to avoid rebuilding the
    dictionary per call.
    """
    if ensemble is None:
        F, ring_dists = transform_dictionary(cfg)
    else:
        F, ring_dists = ensemble
    N = cfg.num_antennas
    n_dict = N + ring_dists.size
    L = cfg.num_paths
    if L > n_dict:
        raise ConfigError("more scatterers than dictionary atoms")

    grid = dft_angles(N)
    polar_th, polar_r = polar_grid(cfg)
    ring_angles = np.unique(polar_th)

    taken = set()

    def draw_far():
        while True:
            theta = np.sin(rng.uniform(cfg.phi_min, cfg.phi_max))
            idx = int(np.argmin(np.abs(grid - theta)))
            if idx not in taken:
                taken.add(idx)
                return idx, grid[idx]

    def draw_near():
        while True:
            theta = np.sin(rng.uniform(cfg.phi_min, cfg.phi_max))
            r = rng.uniform(cfg.r_min, cfg.r_max)
            # snap angle to the nearest ring-bearing grid angle, then snap
            # distance to that angle's nearest ring harmonically (in 1/r)
            a = ring_angles[np.argmin(np.abs(ring_angles - theta))]
            ring_idx = np.nonzero(polar_th == a)[0]
            j = ring_idx[np.argmin(np.abs(1 / polar_r[ring_idx] - 1 / r))]
            idx = N + int(j)
            if idx not in taken:
                taken.add(idx)
                return idx, a

    h_ap = np.zeros(n_dict, dtype=complex)
    gains, dists, thetas = [], [], []
    scale = np.sqrt(N / (L + 1.0))
    for _ in range(cfg.num_far):
        idx, theta = draw_far()
        g = np.sqrt(cfg.gain_var_far / 2) * (rng.standard_normal() + 1j * rng.standard_normal())
        r = rng.uniform(cfg.r_min, cfg.r_max)
        h_ap[idx] = scale * g / r
        gains.append(g)
        dists.append(r)
        thetas.append(theta)
    for _ in range(cfg.num_near):
        idx, theta = draw_near()
        g = np.sqrt(cfg.gain_var_near / 2) * (rng.standard_normal() + 1j * rng.standard_normal())
        r = ring_dists[idx - N]
        h_ap[idx] = scale * g / r
        gains.append(g)
        dists.append(r)
        thetas.append(theta)

    r_los = rng.uniform(cfg.r_min, cfg.r_max)
    phi_los = rng.uniform(cfg.phi_min, cfg.phi_max)
    h_scatter = F @ h_ap
    g_eff = cfg.los_gain * np.sqrt(1.0 / (L + 1.0))
    h_los = g_eff * los_template(r_los, phi_los, cfg)
    if L > 0:
        # energy balance: LoS power matches the summed scattering power
        ratio = np.linalg.norm(h_scatter) / np.linalg.norm(h_los)
        g_eff = g_eff * ratio
        h_los = h_los * ratio

    return HybridChannel(
        los_distance=r_los,
        los_angle=phi_los,
        los_gain_eff=g_eff,
        h_los=h_los,
        sparse_coeffs=h_ap,
        support=np.sort(np.fromiter(taken, dtype=int, count=len(taken))),
        h=h_los + h_scatter,
        path_gains=np.asarray(gains),
        path_dists=np.asarray(dists),
        path_thetas=np.asarray(thetas),
    )


def receive_pilots(h, X, noise_var, rng):
    """Measurement y = X h + w with circular complex noise, var sigma_w^2/entry."""
    M = X.shape[0]
    w = np.sqrt(noise_var / 2) * (rng.standard_normal(M) + 1j * rng.standard_normal(M))
    return X @ h + w
