"""System configuration: physical and simulation constants, YAML loading."""
from dataclasses import dataclass, replace

import numpy as np
import yaml

from .errors import ConfigError


@dataclass
class SystemConfig:
    """Physical and statistical constants of the uplink pilot scenario.

    Defaults correspond to the reference narrowband setup: a 128-element
    ULA at 50 GHz with half-wavelength spacing, 4 distance rings for the
    polar grid, unit pilot power, and 2 far-field + 2 near-field scatterers
    drawn uniformly over the coverage region.
    """

    num_antennas: int = 128
    pilot_len: int = 40
    distance_rings: int = 4
    wavelength: float = 0.006
    spacing: float = None          # defaults to wavelength / 2
    pilot_power: float = 1.0
    noise_var: float = 0.1
    gain_var_far: float = 1.0
    gain_var_near: float = 1.0
    prob_zero: float = None        # defaults to 1 - L / N' at point of use
    prob_active: float = None
    num_far: int = 2
    num_near: int = 2
    r_min: float = 4.0
    r_max: float = 60.0
    phi_min: float = -np.pi / 3
    phi_max: float = np.pi / 3
    los_gain: complex = 1.0 + 0.0j
    ring_scale: float = 1.2        # ring-density parameter of the polar grid

    def __post_init__(self):
        if self.spacing is None:
            self.spacing = self.wavelength / 2
        if self.prob_zero is None and self.prob_active is not None:
            self.prob_zero = 1.0 - self.prob_active
        if self.prob_active is None and self.prob_zero is not None:
            self.prob_active = 1.0 - self.prob_zero
        self.validate()

    def validate(self):
        if self.num_antennas < 1:
            raise ConfigError("num_antennas must be positive")
        if not 1 <= self.pilot_len <= self.num_antennas:
            raise ConfigError("pilot_len must satisfy 1 <= M <= N")
        if self.distance_rings < 1:
            raise ConfigError("distance_rings must be >= 1")
        if self.wavelength <= 0 or self.spacing <= 0:
            raise ConfigError("wavelength and spacing must be positive")
        if self.spacing > self.wavelength / 2 + 1e-12:
            raise ConfigError("spacing > wavelength/2 aliases the angle grid")
        if self.pilot_power <= 0:
            raise ConfigError("pilot_power must be positive")
        if self.noise_var < 0:
            raise ConfigError("noise_var must be nonnegative")
        if min(self.gain_var_far, self.gain_var_near) < 0:
            raise ConfigError("gain variances must be nonnegative")
        if not 0 < self.r_min < self.r_max:
            raise ConfigError("need 0 < r_min < r_max")
        if self.phi_min >= self.phi_max:
            raise ConfigError("need phi_min < phi_max")
        if self.num_far < 0 or self.num_near < 0:
            raise ConfigError("scatterer counts must be nonnegative")
        if self.prob_zero is not None:
            if not 0 <= self.prob_zero <= 1:
                raise ConfigError("prob_zero must lie in [0, 1]")
            if abs(self.prob_zero + self.prob_active - 1.0) > 1e-9:
                raise ConfigError("prob_zero + prob_active must equal 1")
        if self.ring_scale <= 0:
            raise ConfigError("ring_scale must be positive")

    @property
    def num_paths(self):
        return self.num_far + self.num_near

    @property
    def aperture(self):
        return (self.num_antennas - 1) * self.spacing

    def with_updates(self, **kw):
        return replace(self, **kw)

    def with_snr_db(self, snr_db):
        """Noise variance for a given pilot SNR = P_x / sigma_w^2 in dB."""
        return replace(self, noise_var=self.pilot_power * 10.0 ** (-snr_db / 10.0))


# YAML sections whose keys map directly onto SystemConfig fields.
_CONFIG_SECTIONS = ("system", "coverage", "scatterers", "pilot")
_CONFIG_FIELDS = set(SystemConfig.__dataclass_fields__)


def load_config_file(path):
    """Read a YAML config file; returns the raw (possibly sectioned) mapping."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping, got {type(raw).__name__}")
    return raw


def config_from_mapping(raw):
    """Build a SystemConfig from a raw mapping.

    Accepts either flat keys or the sectioned layout (system / coverage /
    scatterers / pilot); other sections (los, estimator, sweep, ...) are
    left for their consumers.
    """
    flat = {}
    for key, val in raw.items():
        if key in _CONFIG_SECTIONS and isinstance(val, dict):
            flat.update(val)
        elif key in _CONFIG_FIELDS:
            flat[key] = val
    unknown = set(flat) - _CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "los_gain" in flat and isinstance(flat["los_gain"], (list, tuple)):
        re_part, im_part = flat["los_gain"]
        flat["los_gain"] = complex(re_part, im_part)
    try:
        return SystemConfig(**flat)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
