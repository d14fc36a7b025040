"""Covariance oracles and estimators.

Two estimators feed the receiver: the sample covariance of the plain-pilot
observations (one per co-pilot group) and the per-user individual covariance
built by cross-correlating each plain observation with the derotated
phase-shifted observation of the same coherent-block pair. The random phases
decorrelate co-pilot interference and noise, so the cross-correlation has mean
rho * Lambda_k; a finite-sample estimate is not Hermitian, so it is replaced
by the Frobenius-nearest Hermitian PSD matrix.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import EstimationError


def perfect_received_covariance(profile, group, rho, sigma2):
    """Diagonal of the exact received-signal covariance for one co-pilot group.

    Sigma_p = rho * (sum_{i in group} Lambda_i + (sigma2/rho) * I); returned as
    the length-MN diagonal since every Lambda_i is diagonal.
    """
    group = np.asarray(group, dtype=int)
    diag = np.full(profile.mn, float(sigma2))
    if group.size:
        diag = diag + rho * profile.lam_all()[group].sum(axis=0)
    return diag


def sample_covariance(observations):
    """(1/N) sum_n y_n y_n^H from the plain-pilot observations; exactly Hermitian."""
    y = np.asarray(observations, dtype=complex)
    if y.ndim == 1:
        y = y[None, :]
    if y.shape[0] < 1 or y.size == 0:
        raise EstimationError("sample_covariance needs at least one observation")
    s = (y.T @ y.conj()) / y.shape[0]
    return 0.5 * (s + s.conj().T)


def individual_covariance(pairs, rho):
    """Per-user covariance estimate from (plain, derotated shifted) observation pairs.

    Averages the Hermitian-symmetrized cross-correlation
    (1 / (2 N rho)) * sum_n (h1 h2^H + h2 h1^H) over the N pairs, then projects
    onto the Hermitian PSD cone (single projection, after averaging).
    """
    if rho <= 0:
        raise EstimationError(f"rho must be positive, got {rho!r}")
    if isinstance(pairs, tuple) and len(pairs) == 2 and np.ndim(pairs[0]) == 2:
        h1, h2 = (np.asarray(p, dtype=complex) for p in pairs)
    else:
        pairs = list(pairs)
        if not pairs:
            raise EstimationError("individual_covariance needs at least one pair")
        h1 = np.asarray([p[0] for p in pairs], dtype=complex)
        h2 = np.asarray([p[1] for p in pairs], dtype=complex)
    if h1.shape[0] < 1:
        raise EstimationError("individual_covariance needs at least one pair")
    cross = h1.T @ h2.conj()
    raw = (cross + cross.conj().T) / (2.0 * h1.shape[0] * rho)
    return psd_project(raw)


def psd_project(a):
    """Frobenius-nearest Hermitian PSD matrix to (A + A^H)/2.

    Symmetrize, eigendecompose, clip negative eigenvalues to zero and
    reassemble. Idempotent on Hermitian PSD inputs up to eigendecomposition
    round-off.
    """
    a = np.asarray(a, dtype=complex)
    herm = 0.5 * (a + a.conj().T)
    w, v = np.linalg.eigh(herm)
    proj = (v * np.clip(w, 0.0, None)) @ v.conj().T
    return 0.5 * (proj + proj.conj().T)


@dataclass
class CovarianceSet:
    """Per-pilot received-signal covariances plus per-user covariances.

    ``provenance`` records whether the matrices are the exact oracles or
    estimates, together with the sample counts actually used. Matrices are
    stored dense (MN x MN); oracle entries are diagonal by construction.
    """

    sigma_per_pilot: list       # P arrays, each (MN, MN) complex
    lambda_per_user: list       # K arrays, each (MN, MN) complex
    provenance: str             # "perfect" | "estimated"
    n_sigma: int
    n_lambda: int

    def save_npz(self, path):
        arrays = {}
        for p, s in enumerate(self.sigma_per_pilot):
            arrays[f"sigma_{p}"] = s
        for k, lam in enumerate(self.lambda_per_user):
            arrays[f"lambda_{k}"] = lam
        np.savez(
            path,
            provenance=np.asarray(self.provenance),
            n_sigma=np.asarray(self.n_sigma),
            n_lambda=np.asarray(self.n_lambda),
            num_pilots=np.asarray(len(self.sigma_per_pilot)),
            num_users=np.asarray(len(self.lambda_per_user)),
            **arrays,
        )

    @classmethod
    def load_npz(cls, path):
        with np.load(path) as data:
            num_pilots = int(data["num_pilots"])
            num_users = int(data["num_users"])
            return cls(
                sigma_per_pilot=[data[f"sigma_{p}"] for p in range(num_pilots)],
                lambda_per_user=[data[f"lambda_{k}"] for k in range(num_users)],
                provenance=str(data["provenance"]),
                n_sigma=int(data["n_sigma"]),
                n_lambda=int(data["n_lambda"]),
            )

    def to_json(self):
        """JSON text; matrices are row-major nested lists of [re, im] pairs."""
        def encode(m):
            return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]

        return json.dumps({
            "provenance": self.provenance,
            "n_sigma": self.n_sigma,
            "n_lambda": self.n_lambda,
            "sigma_per_pilot": [encode(s) for s in self.sigma_per_pilot],
            "lambda_per_user": [encode(l) for l in self.lambda_per_user],
        })

    @classmethod
    def from_json(cls, text):
        def decode(rows):
            return np.asarray([[complex(re, im) for re, im in row] for row in rows])

        data = json.loads(text)
        return cls(
            sigma_per_pilot=[decode(s) for s in data["sigma_per_pilot"]],
            lambda_per_user=[decode(l) for l in data["lambda_per_user"]],
            provenance=data["provenance"],
            n_sigma=data["n_sigma"],
            n_lambda=data["n_lambda"],
        )
