"""System configuration, geometry and large-scale fading.

Positions and the deployment diameter share one arbitrary length unit equal to
the path-loss reference distance, which is fixed at 1. Distances are clamped
below at the reference distance before exponentiation so a user dropped on top
of an access point does not produce an infinite gain.
"""

import json
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import ConfigError

REFERENCE_DISTANCE = 1.0


@dataclass(frozen=True)
class SystemConfig:
    """All scalar parameters of one system instance.

    Powers are linear (not dB). ``n_sigma`` counts coherent blocks used for
    the received-signal covariance estimate, ``n_lambda`` coherent-block pairs
    used for the per-user covariance estimate; both live inside one
    stationarity window of ``stationarity_len`` coherent blocks.
    """

    num_aps: int
    antennas_per_ap: int
    num_users: int
    num_pilots: int
    pilot_len: int
    coherence_len: int
    stationarity_len: int
    tx_power: float
    noise_power: float
    pathloss_exponent: float
    area_diameter: float
    shadow_std_db: float
    n_sigma: int
    n_lambda: int
    master_seed: int

    @property
    def mn(self):
        """Total antenna count across all access points."""
        return self.num_aps * self.antennas_per_ap

    def validate(self, require_theory=False):
        """Check every documented invariant; raise ConfigError naming the first violation.

        ``require_theory=True`` additionally enforces n_sigma > M*N + 1, which
        the closed-form expressions need for finite Wishart inverse moments.
        """
        positive_ints = [
            ("num_aps", self.num_aps),
            ("antennas_per_ap", self.antennas_per_ap),
            ("num_users", self.num_users),
            ("num_pilots", self.num_pilots),
            ("pilot_len", self.pilot_len),
            ("coherence_len", self.coherence_len),
            ("stationarity_len", self.stationarity_len),
            ("n_sigma", self.n_sigma),
            ("n_lambda", self.n_lambda),
        ]
        for name, value in positive_ints:
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        positive_reals = [
            ("tx_power", self.tx_power),
            ("noise_power", self.noise_power),
            ("pathloss_exponent", self.pathloss_exponent),
            ("area_diameter", self.area_diameter),
        ]
        for name, value in positive_reals:
            if not value > 0:
                raise ConfigError(f"{name} must be positive, got {value!r}")
        if self.shadow_std_db < 0:
            raise ConfigError(f"shadow_std_db must be nonnegative, got {self.shadow_std_db!r}")
        if self.pilot_len < self.num_pilots:
            raise ConfigError(
                f"pilot_len >= num_pilots required ({self.num_pilots} orthogonal "
                f"sequences of length {self.pilot_len} cannot exist)"
            )
        if self.coherence_len <= self.pilot_len:
            raise ConfigError(
                f"coherence_len > pilot_len required, got {self.coherence_len} <= {self.pilot_len}"
            )
        if 2 * self.n_sigma > self.stationarity_len:
            raise ConfigError(
                f"2*n_sigma <= stationarity_len required, got 2*{self.n_sigma} > {self.stationarity_len}"
            )
        if 2 * self.n_lambda > self.stationarity_len:
            raise ConfigError(
                f"2*n_lambda <= stationarity_len required, got 2*{self.n_lambda} > {self.stationarity_len}"
            )
        if require_theory and self.n_sigma <= self.mn + 1:
            raise ConfigError(
                f"closed-form theory requires n_sigma > M*N + 1, got n_sigma={self.n_sigma} "
                f"with M*N={self.mn}"
            )
        return self

    @classmethod
    def from_dict(cls, data):
        """Build from a dict with exactly the snake_case field names; unknown keys are an error."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown SystemConfig fields: {', '.join(unknown)}")
        missing = sorted(known - set(data))
        if missing:
            raise ConfigError(f"missing SystemConfig fields: {', '.join(missing)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def replace(self, **kwargs):
        return replace(self, **kwargs)


@dataclass(frozen=True)
class LargeScaleProfile:
    """Geometry plus per-(user, AP) large-scale gains.

    ``gains[k, m]`` is the large-scale fading between user k and AP m. The
    per-user channel covariance is diagonal, diag(gains[k]) expanded by
    ``antennas_per_ap``; it is only ever stored as that length-MN diagonal.
    """

    gains: np.ndarray           # (K, M) positive reals
    ap_positions: np.ndarray    # (M, 2)
    user_positions: np.ndarray  # (K, 2)
    antennas_per_ap: int

    @property
    def num_users(self):
        return self.gains.shape[0]

    @property
    def num_aps(self):
        return self.gains.shape[1]

    @property
    def mn(self):
        return self.num_aps * self.antennas_per_ap

    def lam_diagonal(self, k):
        """Length-MN covariance diagonal of user k."""
        return np.repeat(self.gains[k], self.antennas_per_ap)

    def lam_all(self):
        """(K, MN) array whose row k is user k's covariance diagonal."""
        return np.repeat(self.gains, self.antennas_per_ap, axis=1)

    def with_antennas(self, antennas_per_ap):
        """Same geometry and gains, different per-AP antenna count."""
        return LargeScaleProfile(self.gains, self.ap_positions, self.user_positions,
                                 int(antennas_per_ap))


def place_uniform_disk(count, diameter, rng):
    """Area-uniform points in the disk of the given diameter centered at the origin.

    Returns an (count, 2) array; count=0 yields an empty (0, 2) array.
    """
    if diameter <= 0:
        raise ConfigError(f"diameter must be positive, got {diameter!r}")
    if count < 0:
        raise ConfigError(f"count must be nonnegative, got {count!r}")
    radius = 0.5 * diameter
    r = radius * np.sqrt(rng.random(count))
    phi = 2.0 * np.pi * rng.random(count)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def large_scale_gain(distance, shadow_db, zeta):
    """Path loss times shadow fading: max(distance, 1)^(-zeta) * 10^(shadow_db/10).

    Accepts scalars or arrays; the distance clamp keeps the gain finite below
    the reference distance.
    """
    if not zeta > 0:
        raise ConfigError(f"pathloss exponent must be positive, got {zeta!r}")
    d = np.maximum(np.asarray(distance, dtype=float), REFERENCE_DISTANCE)
    return d ** (-zeta) * 10.0 ** (np.asarray(shadow_db, dtype=float) / 10.0)


def build_profile(config, rng):
    """Drop APs and users uniformly in the disk and draw log-normal shadowing.

    Shadowing is N(0, shadow_std_db^2) in the dB domain, independent per
    (user, AP) link. Deterministic given the generator state.
    """
    ap = place_uniform_disk(config.num_aps, config.area_diameter, rng)
    users = place_uniform_disk(config.num_users, config.area_diameter, rng)
    dist = np.linalg.norm(users[:, None, :] - ap[None, :, :], axis=-1)
    shadow_db = rng.normal(0.0, config.shadow_std_db, size=dist.shape)
    gains = large_scale_gain(dist, shadow_db, config.pathloss_exponent)
    return LargeScaleProfile(gains, ap, users, config.antennas_per_ap)


def rho_for_median_snr(profile, noise_power, snr_db):
    """Transmit power that puts the median user's strongest-AP receive SNR at snr_db."""
    strongest = profile.gains.max(axis=1)
    median_gain = float(np.median(strongest))
    return 10.0 ** (snr_db / 10.0) * noise_power / median_gain
