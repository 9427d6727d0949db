"""Pilot design by ADMM minimization of sensing-matrix mutual coherence.

Solves min_X ||psi(X F)||_inf over pilot matrices whose rows carry fixed
power P_x, by splitting the coherence vector psi into an auxiliary xi
(exact infinity-norm prox), updating X with mini-batched Riemannian
gradient steps on the row-power manifold, and dual ascent. Also provides
the baseline pilot generators and a small binary pilot-file format.
"""
import json
from dataclasses import dataclass, field
from math import gcd

import numpy as np

from .errors import NumericalError


def _column_norms(Psi):
    norms = np.linalg.norm(Psi, axis=0)
    if np.any(norms == 0):
        bad = int(np.argmin(norms))
        raise ValueError(f"zero column {bad} in sensing matrix")
    return norms


def _pair_values(Psi, norms, rows, cols):
    """Normalized column correlations psi_uv for the given index pairs."""
    num = np.einsum("ij,ij->j", Psi[:, rows].conj(), Psi[:, cols])
    return num / (norms[rows] * norms[cols])


def mutual_coherence(Psi):
    """Max over u<v of |Psi_u^H Psi_v| / (||Psi_u|| ||Psi_v||)."""
    norms = _column_norms(Psi)
    Gn = np.abs((Psi / norms).conj().T @ (Psi / norms))
    np.fill_diagonal(Gn, 0.0)
    return float(Gn.max())


@dataclass
class CoherenceVector:
    """All C(N',2) normalized column correlations, lexicographic in (u,v)."""

    values: np.ndarray
    rows: np.ndarray   # u indices, u < v
    cols: np.ndarray   # v indices

    def max_modulus(self):
        return float(np.abs(self.values).max())


def coherence_vector(Psi):
    norms = _column_norms(Psi)
    rows, cols = np.triu_indices(Psi.shape[1], k=1)
    return CoherenceVector(_pair_values(Psi, norms, rows, cols), rows, cols)


def _project_l1_ball(z, radius=1.0):
    """Euclidean projection of a complex vector onto the l1 ball (moduli
    get the real simplex-style shrinkage, phases are preserved)."""
    m = np.abs(z)
    if m.sum() <= radius:
        return z.copy()
    u = np.sort(m)[::-1]
    cum = np.cumsum(u)
    k = np.arange(1, m.size + 1)
    idx = np.nonzero(u - (cum - radius) / k > 0)[0][-1]
    tau = (cum[idx] - radius) / (idx + 1.0)
    shrunk = np.maximum(m - tau, 0.0)
    out = np.zeros_like(z)
    nz = m > 0
    out[nz] = z[nz] * (shrunk[nz] / m[nz])
    return out


def prox_inf_norm(v, t):
    """Proximal point of t * ||.||_inf at v, via Moreau decomposition:
    prox_{t f}(v) = v - t * proj_{l1 ball}(v / t)."""
    if t <= 0:
        raise ValueError("t must be positive")
    v = np.asarray(v, dtype=complex)
    return v - t * _project_l1_ball(v / t)


def _pair_objective_grad(Psi, norms, F, rows, cols, c):
    """J = 1/2 sum |psi_uv - c_uv|^2 over the given pairs, and its
    conjugate-convention gradient with respect to X (descent = -grad).

    The per-pair contributions are accumulated into a sparse column-weight
    matrix S so that grad = (Psi @ S) @ F^H costs two dense products.
    """
    n_cols = Psi.shape[1]
    psi = _pair_values(Psi, norms, rows, cols)
    e = psi - c
    J = 0.5 * float(np.vdot(e, e).real)

    S = np.zeros((n_cols, n_cols), dtype=complex)
    nuv = norms[rows] * norms[cols]
    np.add.at(S, (cols, rows), e.conj() / nuv)
    np.add.at(S, (rows, cols), e / nuv)
    radial = (e.conj() * psi).real
    diag = np.zeros(n_cols)
    np.add.at(diag, rows, radial / norms[rows] ** 2)
    np.add.at(diag, cols, radial / norms[cols] ** 2)
    S[np.arange(n_cols), np.arange(n_cols)] -= diag
    grad = (Psi @ S) @ F.conj().T
    return J, grad


def coherence_objective_grad(X, F, c, pairs=None):
    """Gradient of 1/2 ||psi(X F) - c||^2 with respect to X.

    pairs: optional (rows, cols) restriction; defaults to all u < v.
    """
    Psi = X @ F
    norms = _column_norms(Psi)
    if pairs is None:
        rows, cols = np.triu_indices(Psi.shape[1], k=1)
    else:
        rows, cols = pairs
    _, grad = _pair_objective_grad(Psi, norms, F, rows, cols, c)
    return grad


def coherence_objective(X, F, c, pairs=None):
    """The scalar 1/2 ||psi(X F) - c||^2 (same pair convention as the grad)."""
    Psi = X @ F
    norms = _column_norms(Psi)
    if pairs is None:
        rows, cols = np.triu_indices(Psi.shape[1], k=1)
    else:
        rows, cols = pairs
    e = _pair_values(Psi, norms, rows, cols) - c
    return 0.5 * float(np.vdot(e, e).real)


def tangent_project(X, grad):
    """Remove from each gradient row its radial component along the
    corresponding row of X (real inner product on C^N as R^{2N})."""
    radial = np.einsum("ij,ij->i", X.conj(), grad).real
    scale = radial / np.einsum("ij,ij->i", X.conj(), X).real
    return grad - scale[:, None] * X


def riemannian_step(X, grad, step, pilot_power=1.0):
    """Descend along the tangent projection of grad and retract every row
    back to squared norm pilot_power."""
    Xn = X - step * tangent_project(X, grad)
    row_norms = np.linalg.norm(Xn, axis=1, keepdims=True)
    if np.any(row_norms == 0):
        raise NumericalError("zero pilot row after step: retraction undefined")
    return Xn * (np.sqrt(pilot_power) / row_norms)


@dataclass
class AdmmSchedule:
    """Solver hyperparameters. rho ramps geometrically from rho_start at
    iteration 0 to rho_end at iteration ramp-1 and stays there; the tail
    at the final penalty consolidates the xi = psi agreement."""

    outer: int = 150
    inner: int = 20              # gradient steps per X-update
    batch: int = 4096            # coherence pairs per stochastic step
    rho_start: float = 0.05
    rho_end: float = 2.0
    ramp: int = 110
    eta0: float = 1.0
    eta_cap: float = 64.0
    max_halvings: int = 30
    stop_residual: float = 0.05  # terminate once rho is at rho_end and
                                 # ||xi - psi|| drops below this

    def rho_at(self, iteration):
        frac = min(iteration, self.ramp - 1) / (self.ramp - 1)
        return self.rho_start * (self.rho_end / self.rho_start) ** frac


@dataclass
class AdmmState:
    """Terminal solver state plus per-iteration history."""

    X: np.ndarray
    xi: np.ndarray
    dual: np.ndarray
    rho: float
    iteration: int
    best_coherence: float
    residual: float
    history: dict = field(default_factory=dict)


def admm_pilot_design(F, cfg, schedule=None, rng=None):
    """Design a pilot X minimizing the mutual coherence of X F.

    Returns (X_best, AdmmState); X_best is the iterate with the smallest
    coherence seen (earliest iterate wins ties). history records, per
    outer iteration: coherence, best_coherence, max |xi|, the primal
    residual ||xi - psi||_2, and rho.
    """
    sched = schedule if schedule is not None else AdmmSchedule()
    if rng is None:
        rng = np.random.default_rng(0)
    M, N = cfg.pilot_len, cfg.num_antennas
    Px = cfg.pilot_power

    X = np.sqrt(Px / N) * np.exp(1j * rng.uniform(0, 2 * np.pi, (M, N)))
    Psi = X @ F
    norms = _column_norms(Psi)
    rows, cols = np.triu_indices(F.shape[1], k=1)
    n_pairs = rows.size
    psi = _pair_values(Psi, norms, rows, cols)
    dual = np.zeros(n_pairs, dtype=complex)
    xi = psi.copy()

    best_mu = float(np.abs(psi).max())
    best_X = X.copy()
    hist = {"coherence": [], "best_coherence": [], "max_xi": [],
            "residual": [], "rho": []}

    for it in range(sched.outer):
        rho = sched.rho_at(it)
        xi = prox_inf_norm(psi - dual / rho, 1.0 / rho)
        c = xi + dual / rho

        eta = sched.eta0
        for _ in range(sched.inner):
            sel = rng.integers(0, n_pairs, size=sched.batch)
            bu, bv = rows[sel], cols[sel]
            J0, grad = _pair_objective_grad(Psi, norms, F, bu, bv, c[sel])
            accepted = False
            for _ in range(sched.max_halvings):
                Xn = riemannian_step(X, grad, eta, Px)
                Psin = Xn @ F
                norms_n = np.linalg.norm(Psin, axis=0)
                if not np.all(norms_n > 0):
                    eta *= 0.5
                    continue
                en = _pair_values(Psin, norms_n, bu, bv) - c[sel]
                Jn = 0.5 * float(np.vdot(en, en).real)
                if Jn <= J0:
                    accepted = True
                    break
                eta *= 0.5
            if accepted:
                X, Psi, norms = Xn, Psin, norms_n
                eta = min(eta * 2.0, sched.eta_cap)

        psi = _pair_values(Psi, norms, rows, cols)
        mu = float(np.abs(psi).max())
        if not np.isfinite(mu):
            raise NumericalError(
                f"non-finite coherence at iteration {it} (rho={rho:.4g}, "
                f"max|xi|={np.abs(xi).max():.4g})")
        if mu < best_mu:
            best_mu = mu
            best_X = X.copy()
        dual = dual + rho * (xi - psi)

        residual = float(np.linalg.norm(xi - psi))
        hist["coherence"].append(mu)
        hist["best_coherence"].append(best_mu)
        hist["max_xi"].append(float(np.abs(xi).max()))
        hist["residual"].append(residual)
        hist["rho"].append(rho)
        if (sched.stop_residual is not None and it >= sched.ramp - 1
                and residual <= sched.stop_residual):
            break

    state = AdmmState(X=X, xi=xi, dual=dual, rho=hist["rho"][-1],
                      iteration=len(hist["rho"]), best_coherence=best_mu,
                      residual=hist["residual"][-1], history=hist)
    return best_X, state


def baseline_pilot(kind, cfg, rng=None, zc_root=25):
    """Reference pilot constructions for the coherence comparison.

    random_binary / unimodular_random_phase / zadoff_chu produce M x N
    pilots with per-row power P_x. gaussian returns an M x N' real
    standard normal matrix, N' the transform dictionary's column count,
    standing in for the sensing matrix itself (no row scaling; coherence
    is scale-invariant). A complex draw lands near 0.55 and never matches
    the reference comparison; the real one does.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    M, N, Px = cfg.pilot_len, cfg.num_antennas, cfg.pilot_power
    amp = np.sqrt(Px / N)
    if kind == "random_binary":
        return amp * (2.0 * rng.integers(0, 2, size=(M, N)) - 1.0) + 0j
    if kind == "unimodular_random_phase":
        return amp * np.exp(1j * rng.uniform(0, 2 * np.pi, (M, N)))
    if kind == "zadoff_chu":
        if gcd(zc_root, N) != 1:
            raise ValueError(f"zadoff_chu root {zc_root} not coprime with N={N}")
        k = np.arange(N)
        exponent = k * k if N % 2 == 0 else k * (k + 1)
        z = np.exp(-1j * np.pi * zc_root * exponent / N)
        shift = max(N // M, 1)
        return amp * np.stack([np.roll(z, -m * shift) for m in range(M)])
    if kind == "gaussian":
        from .channel import transform_dictionary
        width = transform_dictionary(cfg)[0].shape[1]
        return rng.standard_normal((M, width)) + 0j
    raise ValueError(f"unknown pilot kind {kind!r}")


PILOT_MAGIC = int.from_bytes(b"HFPILOT1", "little")
PILOT_VERSION = 1


def save_pilot(path, X, history=None):
    """Write X to a binary file: 8 little-endian uint64 header words
    (magic, version, rows, cols, 4 reserved) then interleaved re/im
    float64 entries, row-major. history, if given, lands in a JSON
    sidecar at path + '.json'."""
    X = np.ascontiguousarray(X, dtype=np.complex128)
    header = np.array([PILOT_MAGIC, PILOT_VERSION, X.shape[0], X.shape[1],
                       0, 0, 0, 0], dtype="<u8")
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(X.astype("<c16").tobytes())
    if history is not None:
        with open(f"{path}.json", "w") as fh:
            json.dump(history, fh, indent=1)
            fh.write("\n")


def load_pilot(path):
    with open(path, "rb") as fh:
        header = np.frombuffer(fh.read(64), dtype="<u8")
        if header.size != 8 or header[0] != PILOT_MAGIC:
            raise ValueError(f"{path} is not a pilot file")
        if header[1] != PILOT_VERSION:
            raise ValueError(f"unsupported pilot file version {header[1]}")
        rows, cols = int(header[2]), int(header[3])
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != rows * cols:
        raise ValueError(f"{path}: truncated pilot payload")
    return data.reshape(rows, cols).astype(np.complex128)
