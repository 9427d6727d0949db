"""Shared fixtures: a desk-scale geometry for fast unit tests and the
session-wide coherence-table pilot design (expensive, built once)."""
import time
from types import SimpleNamespace
from typing import NamedTuple

import numpy as np
import pytest

from hybridfield.channel import transform_dictionary
from hybridfield.config import SystemConfig
from hybridfield.pilot_design import AdmmSchedule, admm_pilot_design


@pytest.fixture(scope="session")
def default_cfg():
    return SystemConfig()


@pytest.fixture(scope="session")
def small_cfg():
    # 8 x 32 array: Rayleigh distance is centimeters, so the coverage and
    # ring floor move inside it to keep the polar lattice nonempty
    return SystemConfig(num_antennas=32, pilot_len=8, distance_rings=2,
                        r_min=0.05, r_max=2.0, noise_var=0.01)


class Ensemble(NamedTuple):
    F: np.ndarray
    ring_dists: np.ndarray


@pytest.fixture(scope="session")
def small_ensemble(small_cfg):
    return Ensemble(*transform_dictionary(small_cfg))


@pytest.fixture(scope="session")
def admm32(default_cfg):
    """Designed pilot at the coherence-table geometry (M=32, N=128, Q=4)."""
    cfg = default_cfg.with_updates(pilot_len=32)
    F, _ = transform_dictionary(cfg)
    rng = np.random.default_rng(0)
    t0 = time.monotonic()
    X, state = admm_pilot_design(F, cfg, AdmmSchedule(), rng)
    wall = time.monotonic() - t0
    return SimpleNamespace(cfg=cfg, F=F, X=X, state=state, wall=wall)
