"""Stage one of estimation: LoS (distance, angle) recovery.

On-grid coarse search over the coverage region followed by coordinate
gradient descent with numerically differenced gradients. The complex LoS
gain is profiled out in closed form at every candidate, so the objective
depends only on (r, phi).
"""
import logging
from dataclasses import dataclass

import numpy as np

from .channel import los_template

log = logging.getLogger(__name__)


@dataclass
class LosSearchConfig:
    grid_step_r: float = 2.0                    # meters
    grid_step_phi: float = np.pi / 180          # radians
    fd_step_r: float = 1e-3
    fd_step_phi: float = 1e-5
    eta_r: float = 1.0                          # initial learning rates
    eta_phi: float = 0.01
    rel_tol: float = 1e-6                       # stop at |dJ| < rel_tol ||y||
    max_iters: int = 200
    max_halvings: int = 40

    @classmethod
    def from_mapping(cls, raw):
        """Build from the `los` section of a config mapping."""
        section = raw.get("los", {}) if isinstance(raw, dict) else {}
        known = {k: v for k, v in section.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class LosEstimate:
    r_hat: float
    phi_hat: float
    gain_hat: complex
    h_los_hat: np.ndarray
    residual: np.ndarray        # y - X h_los_hat, input to stage two
    trace: np.ndarray           # objective per iteration, nonincreasing
    iterations: int
    clamped: bool = False


def los_objective(r, phi, y, X, cfg):
    """J(r, phi) = ||y - g* X u(r, phi)|| with the profiled LS gain
    g* = (X u)^H y / ||X u||^2. Returns (J, g*)."""
    t = X @ los_template(r, phi, cfg)
    power = float(np.vdot(t, t).real)
    if power == 0:
        raise ValueError("X u(r, phi) vanished: gain unidentifiable")
    gain = np.vdot(t, y) / power
    return float(np.linalg.norm(y - gain * t)), gain


def los_grid_axes(cfg, search=None):
    search = search or LosSearchConfig()
    r_axis = np.arange(cfg.r_min, cfg.r_max + 1e-9, search.grid_step_r)
    phi_axis = np.arange(cfg.phi_min, cfg.phi_max + 1e-12, search.grid_step_phi)
    return r_axis, phi_axis


@dataclass
class GridProjection:
    """Cache of X @ u over the whole coarse grid (r-major, phi fastest)."""

    r_axis: np.ndarray
    phi_axis: np.ndarray
    T: np.ndarray          # M x (len(r_axis) * len(phi_axis))
    power: np.ndarray      # squared column norms of T


def grid_projection(X, cfg, search=None):
    r_axis, phi_axis = los_grid_axes(cfg, search)
    n = np.arange(cfg.num_antennas)[:, None]
    d, lam = cfg.spacing, cfg.wavelength
    cols = []
    for r in r_axis:
        th = np.sin(phi_axis)[None, :]
        rn = np.sqrt(r**2 + d**2 * n**2 - 2.0 * d * r * n * th)
        cols.append(np.exp(-2j * np.pi * rn / lam) / rn)
    U = np.concatenate(cols, axis=1)
    T = X @ U
    power = np.einsum("ij,ij->j", T.conj(), T).real
    return GridProjection(r_axis, phi_axis, T, power)


def coarse_grid_search(y, X, cfg, search=None, projection=None):
    """Minimize J over the rectangular (r, phi) grid.

    Ties break to the smallest r, then smallest phi (the grid is laid out
    r-major with phi fastest, so the first minimum wins)."""
    proj = projection if projection is not None else grid_projection(X, cfg, search)
    match = np.abs(proj.T.conj().T @ y) ** 2
    # J^2 = ||y||^2 - |t^H y|^2 / ||t||^2; minimize via the matched term
    j2 = float(np.vdot(y, y).real) - match / np.maximum(proj.power, 1e-300)
    flat = int(np.argmin(j2))
    n_phi = proj.phi_axis.size
    return float(proj.r_axis[flat // n_phi]), float(proj.phi_axis[flat % n_phi])


def gradient_descent_los(y, X, r0, phi0, cfg, search=None):
    """Refine (r0, phi0) by monotone coordinate descent.

    Central finite differences supply the descent direction per
    coordinate; the step length starts at eta_r (meters) / eta_phi
    (radians) and halves until the objective strictly decreases, resetting
    every iteration. Iterates leaving the coverage region are clamped to
    the boundary (logged, never an error)."""
    search = search or LosSearchConfig()
    r, phi = float(r0), float(phi0)
    J, gain = los_objective(r, phi, y, X, cfg)
    eps = search.rel_tol * float(np.linalg.norm(y))
    trace = [J]
    clamped = False

    def clamp(rv, pv):
        nonlocal clamped
        rc = min(max(rv, cfg.r_min), cfg.r_max)
        pc = min(max(pv, cfg.phi_min), cfg.phi_max)
        if rc != rv or pc != pv:
            clamped = True
            log.debug("LoS iterate clamped to coverage: (%g, %g) -> (%g, %g)",
                      rv, pv, rc, pc)
        return rc, pc

    def descend_r():
        # central FD for the sign of dJ/dr; eta is the trial step in meters
        nonlocal r, J, gain
        jp, _ = los_objective(r + search.fd_step_r, phi, y, X, cfg)
        jm, _ = los_objective(max(r - search.fd_step_r, 1e-12), phi, y, X, cfg)
        direction = np.sign(jp - jm)
        if direction == 0:
            return
        eta = search.eta_r
        for _ in range(search.max_halvings):
            rc, _ = clamp(r - eta * direction, phi)
            Jc, gc = los_objective(rc, phi, y, X, cfg)
            if Jc < J:
                r, J, gain = rc, Jc, gc
                return
            eta *= 0.5

    def descend_phi():
        nonlocal phi, J, gain
        jp, _ = los_objective(r, phi + search.fd_step_phi, y, X, cfg)
        jm, _ = los_objective(r, phi - search.fd_step_phi, y, X, cfg)
        direction = np.sign(jp - jm)
        if direction == 0:
            return
        eta = search.eta_phi
        for _ in range(search.max_halvings):
            _, pc = clamp(r, phi - eta * direction)
            Jc, gc = los_objective(r, pc, y, X, cfg)
            if Jc < J:
                phi, J, gain = pc, Jc, gc
                return
            eta *= 0.5

    iterations = 0
    for _ in range(search.max_iters):
        iterations += 1
        J_prev = J
        descend_r()
        descend_phi()
        trace.append(J)
        if abs(J_prev - J) < eps:
            break

    h_los_hat = gain * los_template(r, phi, cfg)
    residual = y - X @ h_los_hat
    return LosEstimate(r_hat=r, phi_hat=phi, gain_hat=gain,
                       h_los_hat=h_los_hat, residual=residual,
                       trace=np.asarray(trace), iterations=iterations,
                       clamped=clamped)


def estimate_los(y, X, cfg, search=None, projection=None):
    """Coarse search then descent; the one-call stage-one entry point."""
    r0, phi0 = coarse_grid_search(y, X, cfg, search, projection)
    return gradient_descent_los(y, X, r0, phi0, cfg, search)
