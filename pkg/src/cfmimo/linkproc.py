"""MMSE channel estimation, MRC/ZF combining, UatF SINR and achievable rate.

SINR convention: every SINR in this package is evaluated for the
pilot-normalized system, i.e. observations scaled by 1/sqrt(tx_power) so the
effective noise power is sigma2/rho. The use-and-then-forget SINR

    gamma_k = |E[w^H g_k]|^2
              / (sum_i E[|w^H g_i|^2] - |E[w^H g_k]|^2 + (sigma2/rho) E[w^H w])

is then invariant under joint scaling of (tx_power, noise_power), matches the
closed forms, and reduces to gamma = rho * ||g||^2 / sigma2 for a single user
with a deterministic known channel.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CombinerError, ConfigError, EstimationError

ZF_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class SinrEstimate:
    """Monte Carlo UatF SINR for one user.

    ``gamma = desired_power / (total_power - desired_power + noise_term)``
    exactly, with noise_term the effective-noise quadratic term
    (sigma2/rho) * E[w^H w].
    """

    user: int
    desired_power: float
    total_power: float
    noise_term: float
    gamma: float
    trials: int
    std_error: float = 0.0


@dataclass(frozen=True)
class EstimatedChannels:
    """All users' channel estimates plus the estimator matrices that formed them."""

    g_hat: np.ndarray          # (MN, K) complex, column k = g_hat_k
    w_per_user: list           # K arrays, each (MN, MN): W_k with g_hat_k = W_k y_p(k)
    covariance_provenance: str


def mmse_estimate_perfect(y_p, lam_diag, sigma_diag, rho):
    """MMSE estimate with the exact covariances: sqrt(rho) * Lambda_k Sigma_p^{-1} y_p.

    Both covariances are diagonal, so this is elementwise.
    """
    sigma_diag = np.asarray(sigma_diag, dtype=float)
    if np.any(sigma_diag <= 0):
        raise EstimationError("received-signal covariance is singular (nonpositive diagonal)")
    return np.sqrt(rho) * np.asarray(lam_diag) / sigma_diag * y_p


def mmse_estimate_imperfect(y_p, lambda_hat, sigma_hat):
    """Estimate with estimated covariances: W = Lambda_hat Sigma_hat^{-1}, g_hat = W y_p.

    Returns (g_hat, W). The sqrt(rho) of the perfect-covariance expression is
    absorbed by the individual-covariance estimator's 1/rho normalization.
    """
    sigma_hat = np.asarray(sigma_hat, dtype=complex)
    lambda_hat = np.asarray(lambda_hat, dtype=complex)
    try:
        w = np.linalg.solve(sigma_hat, lambda_hat.conj().T).conj().T
    except np.linalg.LinAlgError as exc:
        raise EstimationError(
            f"sample covariance is singular; n_sigma must be at least M*N={sigma_hat.shape[0]}"
        ) from exc
    return w @ y_p, w


def estimate_channels(y_per_group, cov_set, plan):
    """Reference estimation path: one MMSE estimate per user from its group observation.

    ``y_per_group[p]`` is the despread observation of pilot p. Uses the
    estimated-covariance expression for every user; the perfect-covariance
    oracle case is covered by passing exact matrices in ``cov_set``.
    """
    k_total = plan.num_users
    mn = np.asarray(y_per_group[plan.assignment[0]]).shape[0]
    g_hat = np.zeros((mn, k_total), dtype=complex)
    w_per_user = []
    for k in range(k_total):
        p = plan.assignment[k]
        g, w = mmse_estimate_imperfect(y_per_group[p], cov_set.lambda_per_user[k],
                                       cov_set.sigma_per_pilot[p])
        g_hat[:, k] = g
        w_per_user.append(w)
    return EstimatedChannels(g_hat=g_hat, w_per_user=w_per_user,
                             covariance_provenance=cov_set.provenance)


def combiner(g_hat, scheme):
    """Combining vectors as columns: MRC returns G_hat, ZF returns G_hat (G_hat^H G_hat)^{-1}."""
    if scheme == "MRC":
        return g_hat
    if scheme != "ZF":
        raise ConfigError(f"unknown combining scheme {scheme!r}")
    gram = g_hat.conj().T @ g_hat
    eigs = np.linalg.eigvalsh(gram)
    if eigs[0] <= 0 or eigs[-1] / eigs[0] > ZF_CONDITION_LIMIT:
        cond = np.inf if eigs[0] <= 0 else eigs[-1] / eigs[0]
        raise CombinerError(
            f"ZF Gram matrix is rank deficient: condition number {cond:.3e} "
            f"exceeds {ZF_CONDITION_LIMIT:.0e}"
        )
    return g_hat @ np.linalg.inv(gram)


def uatf_gamma(desired_mean, total_power, noise_quad, sigma2_eff):
    """Assemble the UatF SINR from its three expectations.

    desired_mean = E[w^H g_k] (complex), total_power = sum_i E[|w^H g_i|^2],
    noise_quad = E[w^H w]; sigma2_eff is the effective noise power sigma2/rho.
    """
    desired = abs(desired_mean) ** 2
    return desired / (total_power - desired + sigma2_eff * noise_quad)


def uatf_sinr_monte_carlo(config, profile, plan, scheme="MRC", cov_mode="estimated",
                          trials=1000, master_seed=None, stream_key=(), n_buckets=16):
    """Monte Carlo UatF SINR, one SinrEstimate per user.

    Each trial draws a fresh stationarity window (covariances re-estimated
    from n_sigma plain blocks and n_lambda block pairs when
    cov_mode="estimated") followed by one payload block; expectations run over
    channels, noise, phases and the estimation randomness jointly. Trial t
    uses the stream (master_seed, *stream_key, t), so results are independent
    of scheduling. ZF trials whose Gram matrix fails the condition check are
    skipped and counted; a skip rate above 1% raises SimulationError.
    """
    from ._mc.driver import run_uatf

    result = run_uatf(config, profile, plan, schemes=(scheme,), cov_modes=(cov_mode,),
                      trials=trials, master_seed=master_seed, stream_key=stream_key,
                      n_buckets=n_buckets)
    return result[(scheme, cov_mode)]


def achievable_rate(gamma, pilot_symbols, tau_c):
    """Rate lower bound (1 - pilot_symbols/tau_c) * log2(1 + gamma), bits/s/Hz."""
    if not 0 < pilot_symbols < tau_c:
        raise ConfigError(
            f"pilot_symbols must satisfy 0 < pilot_symbols < tau_c, "
            f"got {pilot_symbols} vs tau_c={tau_c}"
        )
    if np.any(np.asarray(gamma) < 0):
        raise ConfigError("gamma must be nonnegative")
    return (1.0 - pilot_symbols / tau_c) * np.log2(1.0 + np.asarray(gamma, dtype=float))
