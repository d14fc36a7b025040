"""Closed-form SINR machinery.

Implements the complex Wishart inverse-moment identities, the mu inflation
factors they induce, the closed-form MRC SINR with its large-antenna limit,
the ZF interference matrix and the closed-form ZF SINR. Everything is
evaluated with the oracle (diagonal) covariances in pilot-normalized units
(unit transmit power, effective noise sigma2/rho; see cfmimo.linkproc), and
every trace is an O(MN) sum over diagonals, never a dense matrix product.

Notation used throughout: lam_k is user k's covariance diagonal, sig_p the
received-signal covariance diagonal of pilot group p (sum of member lam plus
effective noise), wbar_k = lam_k / sig_p the deterministic MMSE estimator
diagonal.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, TheoryError
from .streams import complex_normal


def wishart_moment(kind, n, m, a=None):
    """Closed-form inverse moments of a complex Wishart(n, I_m) matrix W.

    kind="tr_inv":     E[tr(W^{-1})]          = m / (n - m)            (n > m)
    kind="tr_inv_sq":  E[tr(W^{-2})]          = m n / ((n-m)^3 - (n-m)) (n > m+1)
    kind="quad_form":  E[|tr(W^{-1} A)|^2]    = (|tr A|^2 + tr(A A^H)/(n-m))
                                                / ((n-m)^2 - 1)         (n > m+1)
    """
    n, m = int(n), int(m)
    if kind == "tr_inv":
        if n <= m:
            raise TheoryError(f"tr_inv needs n > m, got n={n}, m={m}")
        return m / (n - m)
    if kind == "tr_inv_sq":
        if n <= m + 1:
            raise TheoryError(f"tr_inv_sq needs n > m + 1, got n={n}, m={m}")
        d = n - m
        return m * n / (d**3 - d)
    if kind == "quad_form":
        if n <= m + 1:
            raise TheoryError(f"quad_form needs n > m + 1, got n={n}, m={m}")
        if a is None:
            raise TheoryError("quad_form needs the matrix argument A")
        a = np.asarray(a)
        if a.shape != (m, m):
            raise TheoryError(f"A must be {m}x{m}, got {a.shape}")
        d = n - m
        tr = np.trace(a)
        return (abs(tr) ** 2 + np.trace(a @ a.conj().T).real / d) / (d**2 - 1)
    raise TheoryError(f"unknown Wishart moment kind {kind!r}")


def mu_factors(n_sigma, mn):
    """Inflation factors from inverting the sample covariance.

    mu1 = N_S^3 / (((N_S - MN)^2 - 1)(N_S - MN)), mu2 = N_S^2 / ((N_S - MN)^2 - 1);
    both tend to 1 as N_S grows. Requires n_sigma > mn + 1.
    """
    n_sigma, mn = int(n_sigma), int(mn)
    if n_sigma <= mn + 1:
        raise TheoryError(f"mu factors need n_sigma > M*N + 1, got {n_sigma} <= {mn + 1}")
    d = n_sigma - mn
    mu1 = n_sigma**3 / ((d**2 - 1) * d)
    mu2 = n_sigma**2 / (d**2 - 1)
    return mu1, mu2


def _layout(profile, plan, config):
    """Shared precomputation: per-user diagonals, group diagonals, constants."""
    config.validate(require_theory=True)
    lam = profile.lam_all()
    sigma2_eff = config.noise_power / config.tx_power
    sig = {}
    for p in plan.occupied():
        sig[p] = lam[plan.groups[p]].sum(axis=0) + sigma2_eff
    return lam, sig, sigma2_eff


@dataclass(frozen=True)
class MrcClosedForm:
    """Closed-form MRC SINR with its assembled pieces, one entry per user.

    ``desired`` is the mean estimate-channel correlation
    (N_S/(N_S-MN)) tr(Wbar_k^H Lambda_k); the SINR numerator is its square.
    ``i_ex[k]`` has one entry per user, ``i_in[k]`` one per co-pilot member.
    """

    desired: np.ndarray
    i_ex: list
    i_in: list
    noise: np.ndarray
    gamma: np.ndarray


def mrc_sinr_closed(profile, plan, config):
    """Closed-form MRC SINR under estimated covariances (finite N_S, N_L)."""
    lam, sig, sigma2_eff = _layout(profile, plan, config)
    mn = config.mn
    ns, nl = config.n_sigma, config.n_lambda
    mu1, mu2 = mu_factors(ns, mn)
    ratio = ns / (ns - mn)
    k_total = plan.num_users

    desired = np.empty(k_total)
    noise = np.empty(k_total)
    gamma = np.empty(k_total)
    i_ex_all, i_in_all = [], []
    for k in range(k_total):
        p = plan.assignment[k]
        group = plan.groups[p]
        s = sig[p]
        lam_k = lam[k]
        wbar_k = lam_k / s
        tr_wl = float(wbar_k @ lam_k)
        desired[k] = ratio * tr_wl

        i_ex = np.empty(k_total)
        for i in range(k_total):
            lam_i = lam[i]
            i_ex[i] = (mu1 * mn / (2 * nl) * float(lam_i @ s)
                       + mu1 / (2 * nl) * float(wbar_k.sum()) * float(lam_i @ lam_k)
                       + mu1 * float(wbar_k @ (lam_i * lam_k)))

        i_in = np.empty(len(group))
        for idx, i in enumerate(group):
            lam_i = lam[i]
            wbar_i = lam_i / s
            i_in[idx] = (
                mu1 / (2 * ns * nl) * float((lam_k / s**2).sum()) * float((lam_i**2) @ lam_k)
                + mu1 / ns * float((wbar_k**2) @ lam_i**2)
                + mu1 * mn / (2 * ns * nl) * float((1.0 / s).sum()) * float((lam_i**2) @ s)
                + mu2 * float(lam_k @ wbar_i) ** 2
                + mu2 / (2 * nl) * float((wbar_i**2) @ s**2)
                + mu2 / (2 * nl) * float((wbar_i**2) @ lam_k**2)
            )

        noise[k] = (mu1 * tr_wl + mu1 * mn / (2 * nl) * float(s.sum())
                    + mu1 / (2 * nl) * float(lam_k.sum()) * float(wbar_k.sum()))
        denom = i_ex.sum() + i_in.sum() - desired[k] ** 2 + sigma2_eff * noise[k]
        if denom <= 0:
            raise TheoryError(
                f"nonpositive MRC denominator for user {k}; n_sigma={ns} is too "
                f"small relative to M*N={mn}"
            )
        gamma[k] = desired[k] ** 2 / denom
        i_ex_all.append(i_ex)
        i_in_all.append(i_in)

    return MrcClosedForm(desired=desired, i_ex=i_ex_all, i_in=i_in_all,
                         noise=noise, gamma=gamma)


def mrc_sinr_limit(profile, plan, config):
    """Large-antenna limit of the MRC SINR (finite-sample covariance terms kept)."""
    lam, sig, _ = _layout(profile, plan, config)
    ns, nl = config.n_sigma, config.n_lambda
    k_total = plan.num_users

    gamma = np.empty(k_total)
    for k in range(k_total):
        p = plan.assignment[k]
        group = plan.groups[p]
        s = sig[p]
        lam_k = lam[k]
        wbar_k = lam_k / s
        d0 = float(wbar_k @ lam_k)

        den = -d0**2
        for i in group:
            lam_i = lam[i]
            den += float((lam_k * lam_i) @ s) ** 2
            den += (float((lam_i**2 * s**2) @ (s**2 + lam_k**2))
                    + float((1.0 / s).sum()) * float((lam_i**2) @ s)) / (2 * nl)
        for i in range(k_total):
            den += ns / (2 * nl) * float(lam[i] @ s)
        den += ns / (2 * nl) * float(s.sum())
        if den <= 0:
            raise TheoryError(f"nonpositive limit denominator for user {k}")
        gamma[k] = d0**2 / den
    return gamma


def zf_gamma_tilde(profile, plan, config, mode="deterministic", rng=None, samples=2000):
    """Residual-interference covariance for the ZF closed form, as an MN x MN matrix.

    deterministic: the sample-covariance inverse pair is replaced by its
    deterministic equivalent mu1 * Lambda_k Sigma_p^{-1} Lambda_k (diagonal
    result). sampled: that term is instead averaged over `samples` draws of
    the underlying Wishart matrix (dense result); used as a cross-check of the
    substitution.
    """
    lam, sig, sigma2_eff = _layout(profile, plan, config)
    mn = config.mn
    ns, nl = config.n_sigma, config.n_lambda
    mu1, _ = mu_factors(ns, mn)

    diag = np.full(mn, sigma2_eff)
    for k in range(plan.num_users):
        s = sig[plan.assignment[k]]
        lam_k = lam[k]
        diag = diag + lam_k - (mu1 / (2 * nl) * s**2 * float((1.0 / s).sum())
                               + mu1 / (2 * nl) * lam_k * s * float(lam_k.sum()))
    if mode == "deterministic":
        det = diag - sum(mu1 * lam[k] ** 2 / sig[plan.assignment[k]]
                         for k in range(plan.num_users))
        return np.diag(det).astype(complex)
    if mode != "sampled":
        raise ConfigError(f"unknown gamma_tilde mode {mode!r}")
    if rng is None:
        raise ConfigError("sampled mode needs a random generator")

    # Per occupied group, average N_S^2 * Sigma^{-1/2} Wi^{-1} Sigma^{-1} Wi^{-1} Sigma^{-1/2}
    # over Wishart(N_S, I) draws Wi; users of the group then scale it by their
    # lam diagonal on both sides.
    out = np.diag(diag).astype(complex)
    for p in plan.occupied():
        s = sig[p]
        inv_sqrt_s = 1.0 / np.sqrt(s)
        core = np.zeros((mn, mn), dtype=complex)
        for _ in range(samples):
            z = complex_normal(rng, (mn, ns))
            wi_inv = np.linalg.inv(z @ z.conj().T)
            core += wi_inv @ ((1.0 / s)[:, None] * wi_inv)
        core *= ns**2 / samples
        core = inv_sqrt_s[:, None] * core * inv_sqrt_s[None, :]
        for k in plan.groups[p]:
            out -= lam[k][:, None] * core * lam[k][None, :]
    return 0.5 * (out + out.conj().T)


@dataclass(frozen=True)
class ZfClosedForm:
    """Closed-form ZF SINR with the per-group deterministic-equivalent matrices."""

    xi: dict           # pilot -> (|U_p|, |U_p|) real symmetric
    xi_tilde: dict
    gamma_tilde: np.ndarray  # (MN, MN)
    gamma: np.ndarray        # (K,)


def zf_sinr_from_xi(n_antennas, xi, xi_tilde, q):
    """SINR of the q-th group member from the group matrices: N / [Xi^{-1} Xit Xi^{-1}]_qq."""
    try:
        xi_inv = np.linalg.inv(xi)
    except np.linalg.LinAlgError as exc:
        raise TheoryError(
            "rank-deficient co-pilot matrix; ZF performance is degenerate for this group"
        ) from exc
    b = xi_inv @ xi_tilde @ xi_inv
    return n_antennas / float(b[q, q].real)


def zf_sinr_closed(profile, plan, config, gamma_tilde_diag=None):
    """Closed-form ZF SINR under estimated covariances."""
    lam, sig, _ = _layout(profile, plan, config)
    mn = config.mn
    ns, nl = config.n_sigma, config.n_lambda
    mu1, _ = mu_factors(ns, mn)
    if gamma_tilde_diag is None:
        gt_full = zf_gamma_tilde(profile, plan, config)
        gt = np.diag(gt_full).real.copy()
    else:
        gt = np.asarray(gamma_tilde_diag, dtype=float)
        gt_full = np.diag(gt).astype(complex)

    gamma = np.empty(plan.num_users)
    xi_all, xit_all = {}, {}
    for p in plan.occupied():
        group = plan.groups[p]
        s = sig[p]
        size = len(group)
        xi = np.empty((size, size))
        xit = np.empty((size, size))
        for q, k in enumerate(group):
            lam_k = lam[k]
            for j, i in enumerate(group):
                lam_i = lam[i]
                xi[q, j] = (mu1 * float((lam_k * lam_i / s).sum())
                            + mu1 * mn / (2 * nl) * float(s.sum())
                            + mu1 / (2 * nl) * float(lam_k.sum()) * float((lam_i / s).sum()))
                xit[q, j] = (mu1 * float((lam_k * lam_i * gt / s).sum())
                             + mu1 * mn / (2 * nl) * float(s @ gt)
                             + mu1 / (2 * nl) * float(lam_k @ gt) * float((lam_i / s).sum()))
        # The entrywise forms are asymmetric in (k, i) through the finite-N_L
        # corrections; the quantity they approximate is a Gram-matrix limit,
        # so symmetrize.
        xi = 0.5 * (xi + xi.T)
        xit = 0.5 * (xit + xit.T)
        xi_all[p] = xi
        xit_all[p] = xit
        for q, k in enumerate(group):
            gamma[k] = zf_sinr_from_xi(config.antennas_per_ap, xi, xit, q)
    return ZfClosedForm(xi=xi_all, xi_tilde=xit_all, gamma_tilde=gt_full, gamma=gamma)


def lemma2_diagnostics(config, profile, plan, trials, antenna_values, master_seed=None):
    """Monte Carlo trend check of the Gram-matrix concentration behind the ZF form.

    For each per-AP antenna count, draws `trials` stationarity windows plus a
    payload block, forms the estimated channels, and records (a) the scaled
    cross-group Gram norms ||G_p^H G_i|| / MN (zero in the limit) and (b) the
    in-group deviation ||G_p^H G_p - Xi_p|| / MN with Xi_p evaluated at the
    realized covariance estimates. n_sigma is scaled with MN to keep the
    sample-covariance aspect ratio of the base config.
    """
    from .covariance import individual_covariance, sample_covariance
    from .linkproc import mmse_estimate_imperfect
    from .streams import CHECK_DOMAIN, derive_rng

    if master_seed is None:
        master_seed = config.master_seed
    ratio = config.n_sigma / config.mn
    occ = plan.occupied()
    sigma2_eff = config.noise_power / config.tx_power

    result = {"antennas": list(antenna_values), "mn": [], "cross_mean": [],
              "cross_stderr": [], "ingroup_mean": [], "ingroup_stderr": [],
              "trials": trials}
    for nv, n_ant in enumerate(antenna_values):
        prof = profile.with_antennas(n_ant)
        mn = prof.mn
        ns = max(int(round(ratio * mn)), mn + 2)
        nl = config.n_lambda
        n_pairs = max(ns, nl)
        lam = prof.lam_all()
        sqrt_lam = np.sqrt(lam)
        sig_oracle = {p: lam[plan.groups[p]].sum(axis=0) + sigma2_eff for p in occ}

        cross_vals = np.empty(trials)
        ingroup_vals = np.empty(trials)
        for t in range(trials):
            rng = derive_rng(master_seed, CHECK_DOMAIN, nv, t)
            g_win = sqrt_lam[None, :, :] * complex_normal(rng, (n_pairs, plan.num_users, mn))
            theta = 2.0 * np.pi * rng.random((nl, plan.num_users))
            sig_hat, lam_hat, ghat = {}, {}, {}
            g_pay = sqrt_lam * complex_normal(rng, (plan.num_users, mn))
            for p in occ:
                mem = plan.groups[p]
                y1 = g_win[:, mem].sum(axis=1) + complex_normal(rng, (n_pairs, mn), var=sigma2_eff)
                y2 = ((g_win[:nl, mem] * np.exp(1j * theta[:, mem, None])).sum(axis=1)
                      + complex_normal(rng, (nl, mn), var=sigma2_eff))
                sig_hat[p] = sample_covariance(y1[:ns])
                y_pay = g_pay[mem].sum(axis=0) + complex_normal(rng, mn, var=sigma2_eff)
                cols = []
                for k in mem:
                    h2 = y2 * np.exp(-1j * theta[:, k, None])
                    lam_hat[k] = individual_covariance((y1[:nl], h2), rho=1.0)
                    g, _ = mmse_estimate_imperfect(y_pay, lam_hat[k], sig_hat[p])
                    cols.append(g)
                ghat[p] = np.array(cols).T  # (mn, |U_p|)

            cross = []
            for ii, p in enumerate(occ):
                for pp in occ[ii + 1:]:
                    cross.append(np.linalg.norm(ghat[p].conj().T @ ghat[pp]) / mn)
            cross_vals[t] = np.mean(cross) if cross else np.nan

            devs = []
            for p in occ:
                mem = plan.groups[p]
                size = len(mem)
                xi = np.empty((size, size), dtype=complex)
                sinv = np.linalg.inv(sig_hat[p])
                for q, k in enumerate(mem):
                    for j, i in enumerate(mem):
                        xi[q, j] = np.trace(lam_hat[k] @ sinv @ sinv @ lam_hat[i]
                                            @ np.diag(sig_oracle[p]))
                gram = ghat[p].conj().T @ ghat[p]
                devs.append(np.linalg.norm(gram - xi) / mn)
            ingroup_vals[t] = np.mean(devs)

        result["mn"].append(mn)
        result["cross_mean"].append(float(np.nanmean(cross_vals)))
        result["cross_stderr"].append(float(np.nanstd(cross_vals, ddof=1) / np.sqrt(trials)))
        result["ingroup_mean"].append(float(ingroup_vals.mean()))
        result["ingroup_stderr"].append(float(ingroup_vals.std(ddof=1) / np.sqrt(trials)))
    return result
