"""Pilot assignment, random phase schedules, and received pilot observations.

Pilot sequences themselves are never materialized: the sequences are
orthonormal, so correlating the received training block with a conjugate
sequence reduces each group's observation to the despread forms implemented
here, with no loss of fidelity. Odd coherent blocks carry the plain pilot,
even blocks the phase-shifted pilot, and the two blocks of an adjacent
(plain, shifted) pair see the same channel realization but independent noise.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .streams import complex_normal


@dataclass(frozen=True)
class PilotPlan:
    """User-to-pilot assignment plus the per-pilot co-pilot groups."""

    assignment: np.ndarray       # (K,) pilot index per user, values in [0, P)
    groups: tuple                # P arrays of user indices, ascending

    @property
    def num_users(self):
        return self.assignment.shape[0]

    @property
    def num_pilots(self):
        return len(self.groups)

    def occupied(self):
        """Indices of pilots with at least one assigned user."""
        return [p for p, g in enumerate(self.groups) if len(g) > 0]


@dataclass(frozen=True)
class PhaseSchedule:
    """Random phases theta[k, n] in [0, 2*pi) for user k's n-th shifted block."""

    theta: np.ndarray  # (K, n_pairs)


def assign_pilots(num_users, num_pilots, policy="round_robin"):
    """Assign pilots, either one-per-user (orthogonal) or cyclically (round_robin)."""
    if num_users < 1 or num_pilots < 1:
        raise ConfigError("num_users and num_pilots must be >= 1")
    if policy == "orthogonal":
        if num_pilots < num_users:
            raise ConfigError(
                f"orthogonal assignment needs num_pilots >= num_users, "
                f"got P={num_pilots} < K={num_users}"
            )
        assignment = np.arange(num_users)
    elif policy == "round_robin":
        assignment = np.arange(num_users) % num_pilots
    else:
        raise ConfigError(f"unknown pilot policy {policy!r}")
    groups = tuple(np.flatnonzero(assignment == p) for p in range(num_pilots))
    return PilotPlan(assignment=assignment, groups=groups)


def phase_schedule(num_users, n_pairs, rng):
    """I.i.d. uniform phases on [0, 2*pi); known at the receiver side."""
    if n_pairs < 1:
        raise ConfigError(f"n_pairs must be >= 1, got {n_pairs}")
    theta = 2.0 * np.pi * rng.random((num_users, n_pairs))
    return PhaseSchedule(theta=theta)


def receive_pilot(channel, group, mode="plain", theta=None, rho=1.0, sigma2=1.0, rng=None):
    """Despread pilot observation for one co-pilot group.

    plain:   y_p = sqrt(rho) * sum_i g_i + n
    shifted: y_p = sqrt(rho) * sum_i g_i * exp(j*theta_i) + n

    with n ~ CN(0, sigma2 I). ``theta`` gives one phase per group member (in
    group order) and is required only in shifted mode. An empty group yields a
    pure noise vector.
    """
    g = channel.matrix
    mn = g.shape[0]
    group = np.asarray(group, dtype=int)
    if mode == "plain":
        signal = g[:, group].sum(axis=1) if group.size else np.zeros(mn, dtype=complex)
    elif mode == "shifted":
        if theta is None or len(theta) != group.size:
            raise ConfigError("shifted mode needs one phase per group member")
        rot = np.exp(1j * np.asarray(theta, dtype=float))
        signal = (g[:, group] * rot[None, :]).sum(axis=1) if group.size else np.zeros(mn, dtype=complex)
    else:
        raise ConfigError(f"unknown pilot mode {mode!r}")
    noise = complex_normal(rng, mn, var=sigma2)
    return np.sqrt(rho) * signal + noise


def derotate(y_shifted, theta_k):
    """Undo user k's phase shift; entrywise modulus is preserved."""
    return y_shifted * np.exp(-1j * theta_k)
