"""Pure-numpy Monte Carlo trial kernel.

Mirrors the compiled kernel exactly: given one trial's window observations and
payload block, estimate the covariances, form the MMSE estimates, combine, and
write the UatF statistics. Kept as the reference implementation and the
fallback when the extension is not built.
"""

import numpy as np

BACKEND = "python"

STATUS_OK = 0
STATUS_ZF_SKIP = 1
STATUS_SINGULAR = 2


def combine_stats(ghat, g_pay, want_zf, cond_limit, out_m, out_n, out_mzf, out_nzf):
    """Fill combiner statistics for one trial.

    out_m[k, i] = w_k^H g_i for MRC (w = g_hat), out_n[k] = ||g_hat_k||^2;
    with want_zf the same pair for the ZF combiner. Returns STATUS_ZF_SKIP when
    the ZF Gram matrix fails the condition-number check (MRC outputs stay valid).
    """
    out_m[:] = ghat.conj() @ g_pay.T
    out_n[:] = np.einsum("ka,ka->k", ghat.conj(), ghat).real
    if not want_zf:
        return STATUS_OK
    gram = ghat.conj() @ ghat.T
    eigs = np.linalg.eigvalsh(gram)
    if eigs[0] <= 0.0 or eigs[-1] > cond_limit * eigs[0]:
        return STATUS_ZF_SKIP
    ginv = np.linalg.inv(gram)
    out_mzf[:] = ginv @ out_m
    out_nzf[:] = np.diag(ginv).real
    return STATUS_OK


class TrialKernel:
    """Per-trial estimated-covariance pipeline for a fixed system layout."""

    def __init__(self, mn, num_users, members_start, members_flat, gidx,
                 n_sigma, n_lambda, want_zf, cond_limit):
        self.mn = int(mn)
        self.num_users = int(num_users)
        self.members_start = np.asarray(members_start, dtype=np.int64)
        self.members_flat = np.asarray(members_flat, dtype=np.int64)
        self.gidx = np.asarray(gidx, dtype=np.int64)
        self.n_occ = len(self.members_start) - 1
        self.n_sigma = int(n_sigma)
        self.n_lambda = int(n_lambda)
        self.want_zf = bool(want_zf)
        self.cond_limit = float(cond_limit)

    def run(self, y1, y2, rot, g_pay, y_pay, out_m, out_n, out_mzf, out_nzf):
        ns, nl = self.n_sigma, self.n_lambda
        k_total = self.num_users

        # Sample covariance per occupied group, from the first n_sigma plain blocks.
        y1s = y1[:ns]
        sig = np.einsum("npa,npb->pab", y1s, y1s.conj()) / ns
        sig = 0.5 * (sig + sig.conj().transpose(0, 2, 1))
        try:
            siginv = np.linalg.inv(sig)
        except np.linalg.LinAlgError:
            return STATUS_SINGULAR

        # Individual covariance per user from the first n_lambda pairs, PSD-projected.
        lam_raw = np.empty((k_total, self.mn, self.mn), dtype=complex)
        y1l = y1[:nl]
        for k in range(k_total):
            j = self.gidx[k]
            h2 = y2[:, j, :] * rot[:, k : k + 1].conj()
            cross = y1l[:, j, :].T @ h2.conj()
            lam_raw[k] = (cross + cross.conj().T) / (2.0 * nl)
        w, v = np.linalg.eigh(lam_raw)
        lam_psd = (v * np.clip(w, 0.0, None)[:, None, :]) @ v.conj().transpose(0, 2, 1)

        # g_hat_k = Lambda_hat_k (Sigma_hat_p^{-1} y_pay_p).
        vp = np.einsum("pab,pb->pa", siginv, y_pay)
        ghat = np.einsum("kab,kb->ka", lam_psd, vp[self.gidx])
        return combine_stats(ghat, g_pay, self.want_zf, self.cond_limit,
                             out_m, out_n, out_mzf, out_nzf)
