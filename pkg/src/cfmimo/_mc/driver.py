"""Monte Carlo trial orchestration shared by both kernels.

One trial = one stationarity window (for estimated covariance) plus one
payload block. All randomness for trial t comes from the stream
(master_seed, TRIAL_DOMAIN, *stream_key, t); the payload block is drawn before
the window so perfect- and estimated-covariance modes share payload
randomness. Everything is evaluated in pilot-normalized units (unit transmit
power, effective noise sigma2/rho); see cfmimo.linkproc.
"""

import numpy as np

from . import kernel_module
from .kernels_py import STATUS_OK, STATUS_SINGULAR, STATUS_ZF_SKIP, combine_stats
from ..errors import ConfigError, EstimationError, SimulationError
from ..linkproc import ZF_CONDITION_LIMIT, SinrEstimate
from ..streams import TRIAL_DOMAIN, complex_normal, derive_rng

MAX_ZF_SKIP_RATE = 0.01


class _Accumulator:
    """Bucketed sums of the three UatF statistics for one (scheme, cov_mode)."""

    def __init__(self, n_buckets, num_users):
        self.a = np.zeros((n_buckets, num_users), dtype=complex)   # w^H g_k (own user)
        self.t = np.zeros((n_buckets, num_users))                  # sum_i |w^H g_i|^2
        self.n = np.zeros((n_buckets, num_users))                  # ||w||^2
        self.count = np.zeros(n_buckets, dtype=np.int64)
        self.skipped = 0

    def add(self, bucket, m, n):
        self.a[bucket] += np.diag(m)
        self.t[bucket] += (np.abs(m) ** 2).sum(axis=1)
        self.n[bucket] += n
        self.count[bucket] += 1

    def estimates(self, sigma2_eff, trials):
        total = int(self.count.sum())
        if total == 0:
            raise SimulationError("no successful trials")
        a_mean = self.a.sum(axis=0) / total
        t_mean = self.t.sum(axis=0) / total
        n_mean = self.n.sum(axis=0) / total
        desired = np.abs(a_mean) ** 2
        noise = sigma2_eff * n_mean
        gamma = desired / (t_mean - desired + noise)

        live = self.count > 0
        std_error = np.zeros(gamma.shape[0])
        if live.sum() >= 2:
            counts = self.count[live][:, None]
            ab = self.a[live] / counts
            tb = self.t[live] / counts
            nb = self.n[live] / counts
            db = np.abs(ab) ** 2
            gb = db / (tb - db + sigma2_eff * nb)
            std_error = gb.std(axis=0, ddof=1) / np.sqrt(live.sum())

        return [
            SinrEstimate(user=k, desired_power=float(desired[k]),
                         total_power=float(t_mean[k]), noise_term=float(noise[k]),
                         gamma=float(gamma[k]), trials=total,
                         std_error=float(std_error[k]))
            for k in range(gamma.shape[0])
        ]


def _group_layout(plan):
    """Occupied groups as CSR arrays plus each user's occupied-group index."""
    occ = plan.occupied()
    members = [np.asarray(plan.groups[p], dtype=np.int64) for p in occ]
    start = np.zeros(len(members) + 1, dtype=np.int64)
    start[1:] = np.cumsum([len(m) for m in members])
    flat = np.concatenate(members) if members else np.zeros(0, dtype=np.int64)
    pilot_to_occ = {p: j for j, p in enumerate(occ)}
    gidx = np.asarray([pilot_to_occ[p] for p in plan.assignment], dtype=np.int64)
    return members, start, flat, gidx


def run_uatf(config, profile, plan, schemes=("MRC",), cov_modes=("estimated",),
             trials=1000, master_seed=None, stream_key=(), n_buckets=16, kernel=None):
    """Run the UatF Monte Carlo; returns {(scheme, cov_mode): [SinrEstimate per user]}."""
    config.validate()
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    for s in schemes:
        if s not in ("MRC", "ZF"):
            raise ConfigError(f"unknown scheme {s!r}")
    for m in cov_modes:
        if m not in ("perfect", "estimated"):
            raise ConfigError(f"unknown cov_mode {m!r}")
    estimated = "estimated" in cov_modes
    perfect = "perfect" in cov_modes
    mn = config.mn
    if estimated and config.n_sigma < mn:
        raise ConfigError(
            f"estimated covariance needs n_sigma >= M*N for an invertible sample "
            f"covariance, got n_sigma={config.n_sigma} < {mn}"
        )
    if master_seed is None:
        master_seed = config.master_seed

    k_total = plan.num_users
    lam = profile.lam_all()
    sqrt_lam = np.sqrt(lam)
    members, start, flat, gidx = _group_layout(plan)
    n_occ = len(members)
    sigma2_eff = config.noise_power / config.tx_power
    want_zf = "ZF" in schemes
    n_buckets = max(1, min(n_buckets, trials))

    # Deterministic estimator matrix for the perfect-covariance mode (diagonal).
    if perfect:
        sig_occ = np.empty((n_occ, mn))
        for j, mem in enumerate(members):
            sig_occ[j] = lam[mem].sum(axis=0) + sigma2_eff
        wbar = lam / sig_occ[gidx]

    if estimated:
        n_pairs = max(config.n_sigma, config.n_lambda)
        kern_mod = kernel if kernel is not None else kernel_module()
        kern = kern_mod.TrialKernel(mn, k_total, start, flat, gidx,
                                    config.n_sigma, config.n_lambda,
                                    want_zf, ZF_CONDITION_LIMIT)

    accs = {key: _Accumulator(n_buckets, k_total)
            for key in ((s, m) for s in schemes for m in cov_modes)}
    m_est = np.empty((k_total, k_total), dtype=complex)
    n_est = np.empty(k_total)
    mzf_est = np.empty((k_total, k_total), dtype=complex)
    nzf_est = np.empty(k_total)
    m_perf = np.empty_like(m_est)
    n_perf = np.empty_like(n_est)
    mzf_perf = np.empty_like(m_est)
    nzf_perf = np.empty_like(n_est)

    for t in range(trials):
        rng = derive_rng(master_seed, TRIAL_DOMAIN, *stream_key, t)
        bucket = t % n_buckets

        # Payload block first: shared across covariance modes.
        g_pay = sqrt_lam * complex_normal(rng, (k_total, mn))
        n_pay = complex_normal(rng, (n_occ, mn), var=sigma2_eff)
        y_pay = np.empty((n_occ, mn), dtype=complex)
        for j, mem in enumerate(members):
            y_pay[j] = g_pay[mem].sum(axis=0) + n_pay[j]

        if perfect:
            ghat = wbar * y_pay[gidx]
            status = combine_stats(ghat, g_pay, want_zf, ZF_CONDITION_LIMIT,
                                   m_perf, n_perf, mzf_perf, nzf_perf)
            for s in schemes:
                if (s, "perfect") not in accs:
                    continue
                if s == "ZF":
                    if status == STATUS_ZF_SKIP:
                        accs[(s, "perfect")].skipped += 1
                    else:
                        accs[(s, "perfect")].add(bucket, mzf_perf, nzf_perf)
                else:
                    accs[(s, "perfect")].add(bucket, m_perf, n_perf)

        if estimated:
            g_win = sqrt_lam[None, :, :] * complex_normal(rng, (n_pairs, k_total, mn))
            n1 = complex_normal(rng, (n_pairs, n_occ, mn), var=sigma2_eff)
            n2 = complex_normal(rng, (config.n_lambda, n_occ, mn), var=sigma2_eff)
            rot = np.exp(2j * np.pi * rng.random((config.n_lambda, k_total)))
            y1 = np.empty((n_pairs, n_occ, mn), dtype=complex)
            y2 = np.empty((config.n_lambda, n_occ, mn), dtype=complex)
            for j, mem in enumerate(members):
                y1[:, j] = g_win[:, mem].sum(axis=1) + n1[:, j]
                y2[:, j] = (g_win[: config.n_lambda, mem]
                            * rot[:, mem, None]).sum(axis=1) + n2[:, j]
            status = kern.run(y1, y2, rot, g_pay, y_pay,
                              m_est, n_est, mzf_est, nzf_est)
            if status == STATUS_SINGULAR:
                raise EstimationError(
                    f"singular sample covariance in trial {t}; n_sigma must be "
                    f"at least M*N={mn}"
                )
            for s in schemes:
                if (s, "estimated") not in accs:
                    continue
                if s == "ZF":
                    if status == STATUS_ZF_SKIP:
                        accs[(s, "estimated")].skipped += 1
                    else:
                        accs[(s, "estimated")].add(bucket, mzf_est, nzf_est)
                else:
                    accs[(s, "estimated")].add(bucket, m_est, n_est)

    results = {}
    for key, acc in accs.items():
        if acc.skipped > MAX_ZF_SKIP_RATE * trials:
            raise SimulationError(
                f"{key[0]}/{key[1]}: {acc.skipped} of {trials} trials skipped "
                f"(rank-deficient combining); exceeds the {MAX_ZF_SKIP_RATE:.0%} limit"
            )
        results[key] = acc.estimates(sigma2_eff, trials)
    return results
