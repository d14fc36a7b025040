# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Monte Carlo trial kernel.

Same contract as cfmimo._mc.kernels_py.TrialKernel, with the per-trial linear
algebra done in tight C loops and LAPACK (via scipy's exported wrappers).
Matrices are tiny (MN, K), so the win over numpy comes from fusing the
covariance accumulation and skipping per-call overhead, not from better BLAS.
"""

import numpy as np

from scipy.linalg.cython_lapack cimport zheevd, zpotrf, zpotri

BACKEND = "compiled"

STATUS_OK = 0
STATUS_ZF_SKIP = 1
STATUS_SINGULAR = 2

DEF _OK = 0
DEF _ZF_SKIP = 1
DEF _SINGULAR = 2


cdef inline double complex _conj(double complex x) noexcept nogil:
    return x.real - x.imag * 1j


cdef class TrialKernel:
    cdef int mn, num_users, n_occ, n_sigma, n_lambda
    cdef bint want_zf
    cdef double cond_limit
    cdef long long[::1] members_start
    cdef long long[::1] members_flat
    cdef long long[::1] gidx
    # Workspaces, allocated once.
    cdef double complex[:, :, ::1] siginv   # per-group sample covariance, then its inverse
    cdef double complex[:, ::1] lam         # one user's raw individual covariance
    cdef double complex[:, ::1] psd         # its PSD projection
    cdef double complex[:, ::1] ghat        # (K, mn) channel estimates
    cdef double complex[:, ::1] vp          # (n_occ, mn) siginv @ y_pay
    cdef double complex[::1] h2             # derotated shifted observation
    cdef double complex[::1] eig_a          # mn*mn eigendecomposition buffer
    cdef double[::1] eig_w
    cdef double complex[::1] gram
    cdef double complex[::1] gram_eig
    cdef double[::1] gram_w
    cdef double complex[::1] work
    cdef double[::1] rwork
    cdef int[::1] iwork
    cdef int lwork, lrwork, liwork

    def __init__(self, mn, num_users, members_start, members_flat, gidx,
                 n_sigma, n_lambda, want_zf, cond_limit):
        self.mn = mn
        self.num_users = num_users
        self.members_start = np.ascontiguousarray(members_start, dtype=np.int64)
        self.members_flat = np.ascontiguousarray(members_flat, dtype=np.int64)
        self.gidx = np.ascontiguousarray(gidx, dtype=np.int64)
        self.n_occ = len(members_start) - 1
        self.n_sigma = n_sigma
        self.n_lambda = n_lambda
        self.want_zf = want_zf
        self.cond_limit = cond_limit

        self.siginv = np.empty((self.n_occ, mn, mn), dtype=np.complex128)
        self.lam = np.empty((mn, mn), dtype=np.complex128)
        self.psd = np.empty((mn, mn), dtype=np.complex128)
        self.ghat = np.empty((num_users, mn), dtype=np.complex128)
        self.vp = np.empty((self.n_occ, mn), dtype=np.complex128)
        self.h2 = np.empty(mn, dtype=np.complex128)
        self.eig_a = np.empty(mn * mn, dtype=np.complex128)
        self.eig_w = np.empty(mn, dtype=np.float64)
        self.gram = np.empty(num_users * num_users, dtype=np.complex128)
        self.gram_eig = np.empty(num_users * num_users, dtype=np.complex128)
        self.gram_w = np.empty(num_users, dtype=np.float64)

        # One workspace sized for the larger of the two zheevd uses
        # (vectors at order mn, values-only at order K).
        cdef int n = mn
        cdef int info = 0
        cdef int lq = -1
        cdef char jobz = b'V'
        cdef char uplo = b'L'
        cdef double complex wkopt
        cdef double rwkopt
        cdef int iwkopt
        zheevd(&jobz, &uplo, &n, &self.eig_a[0], &n, &self.eig_w[0],
               &wkopt, &lq, &rwkopt, &lq, &iwkopt, &lq, &info)
        if info != 0:
            raise RuntimeError("zheevd workspace query failed")
        self.lwork = int(wkopt.real)
        self.lrwork = int(rwkopt)
        self.liwork = iwkopt

        cdef int kq = num_users
        jobz = b'N'
        lq = -1
        zheevd(&jobz, &uplo, &kq, &self.gram_eig[0], &kq, &self.gram_w[0],
               &wkopt, &lq, &rwkopt, &lq, &iwkopt, &lq, &info)
        if info != 0:
            raise RuntimeError("zheevd workspace query failed")
        self.lwork = max(self.lwork, int(wkopt.real))
        self.lrwork = max(self.lrwork, int(rwkopt))
        self.liwork = max(self.liwork, iwkopt)

        self.work = np.empty(self.lwork, dtype=np.complex128)
        self.rwork = np.empty(self.lrwork, dtype=np.float64)
        self.iwork = np.empty(self.liwork, dtype=np.intc)

    cdef int _invert_hpd(self, double complex* a, int n) noexcept nogil:
        # Row-major Hermitian buffer doubles as the column-major conjugate, so
        # potrf/potri work in place; afterwards the row-major upper triangle
        # holds the inverse and the lower triangle is filled by conjugation.
        cdef char uplo = b'L'
        cdef int info = 0
        cdef Py_ssize_t i, j
        zpotrf(&uplo, &n, a, &n, &info)
        if info != 0:
            return -1
        zpotri(&uplo, &n, a, &n, &info)
        if info != 0:
            return -1
        for i in range(n):
            for j in range(i):
                a[i * n + j] = _conj(a[j * n + i])
        return 0

    cdef int _psd_project(self) noexcept nogil:
        # Eigendecompose self.lam (Hermitian), clip negative eigenvalues,
        # rebuild into self.psd. The buffer passed to LAPACK is the conjugate
        # of lam, so its eigenvectors are the conjugates of lam's.
        cdef int n = self.mn
        cdef char jobz = b'V'
        cdef char uplo = b'L'
        cdef int info = 0
        cdef int lwork = self.lwork
        cdef int lrwork = self.lrwork
        cdef int liwork = self.liwork
        cdef Py_ssize_t a, b, j
        cdef double wj
        cdef double complex s
        for a in range(n):
            for b in range(n):
                self.eig_a[a * n + b] = self.lam[a, b]
        zheevd(&jobz, &uplo, &n, &self.eig_a[0], &n, &self.eig_w[0],
               &self.work[0], &lwork, &self.rwork[0], &lrwork,
               &self.iwork[0], &liwork, &info)
        if info != 0:
            return -1
        for a in range(n):
            for b in range(n):
                s = 0
                for j in range(n):
                    wj = self.eig_w[j]
                    if wj > 0:
                        s = s + wj * _conj(self.eig_a[a + j * n]) * self.eig_a[b + j * n]
                self.psd[a, b] = s
        return 0

    def run(self, double complex[:, :, ::1] y1, double complex[:, :, ::1] y2,
            double complex[:, ::1] rot, double complex[:, ::1] g_pay,
            double complex[:, ::1] y_pay, double complex[:, ::1] out_m,
            double[::1] out_n, double complex[:, ::1] out_mzf,
            double[::1] out_nzf):
        cdef int status = _OK
        with nogil:
            status = self._run(y1, y2, rot, g_pay, y_pay,
                               out_m, out_n, out_mzf, out_nzf)
        return status

    cdef int _run(self, double complex[:, :, ::1] y1, double complex[:, :, ::1] y2,
                  double complex[:, ::1] rot, double complex[:, ::1] g_pay,
                  double complex[:, ::1] y_pay, double complex[:, ::1] out_m,
                  double[::1] out_n, double complex[:, ::1] out_mzf,
                  double[::1] out_nzf) noexcept nogil:
        cdef int mn = self.mn
        cdef int kk = self.num_users
        cdef int ns = self.n_sigma
        cdef int nl = self.n_lambda
        cdef Py_ssize_t p, n, a, b, k, i, j
        cdef double complex ya, c, s
        cdef double inv_ns = 1.0 / ns
        cdef double inv_2nl = 1.0 / (2.0 * nl)
        cdef double wmin, wmax
        cdef char jobz
        cdef char uplo = b'L'
        cdef int info, kint, lwork, lrwork, liwork

        # Sample covariance per occupied group (upper triangle, then mirror),
        # inverted in place.
        for p in range(self.n_occ):
            for a in range(mn):
                for b in range(a, mn):
                    self.siginv[p, a, b] = 0
            for n in range(ns):
                for a in range(mn):
                    ya = y1[n, p, a]
                    for b in range(a, mn):
                        self.siginv[p, a, b] = self.siginv[p, a, b] + ya * _conj(y1[n, p, b])
            for a in range(mn):
                for b in range(a, mn):
                    self.siginv[p, a, b] = self.siginv[p, a, b] * inv_ns
                    if b > a:
                        self.siginv[p, b, a] = _conj(self.siginv[p, a, b])
            if self._invert_hpd(&self.siginv[p, 0, 0], mn) != 0:
                return _SINGULAR

        # vp = Sigma_hat^{-1} y_pay per group.
        for p in range(self.n_occ):
            for a in range(mn):
                s = 0
                for b in range(mn):
                    s = s + self.siginv[p, a, b] * y_pay[p, b]
                self.vp[p, a] = s

        # Per user: raw individual covariance, PSD projection, channel estimate.
        for k in range(kk):
            p = self.gidx[k]
            for a in range(mn):
                for b in range(a, mn):
                    self.lam[a, b] = 0
            for n in range(nl):
                c = _conj(rot[n, k])
                for a in range(mn):
                    self.h2[a] = y2[n, p, a] * c
                for a in range(mn):
                    ya = y1[n, p, a]
                    for b in range(a, mn):
                        self.lam[a, b] = self.lam[a, b] + ya * _conj(self.h2[b]) \
                            + self.h2[a] * _conj(y1[n, p, b])
            for a in range(mn):
                for b in range(a, mn):
                    self.lam[a, b] = self.lam[a, b] * inv_2nl
                    if b > a:
                        self.lam[b, a] = _conj(self.lam[a, b])
            if self._psd_project() != 0:
                return _SINGULAR
            for a in range(mn):
                s = 0
                for b in range(mn):
                    s = s + self.psd[a, b] * self.vp[p, b]
                self.ghat[k, a] = s

        # MRC statistics.
        for k in range(kk):
            for i in range(kk):
                s = 0
                for a in range(mn):
                    s = s + _conj(self.ghat[k, a]) * g_pay[i, a]
                out_m[k, i] = s
            s = 0
            for a in range(mn):
                s = s + _conj(self.ghat[k, a]) * self.ghat[k, a]
            out_n[k] = s.real

        if not self.want_zf:
            return _OK

        # ZF: Gram matrix, condition check, inverse, statistics.
        for k in range(kk):
            for i in range(kk):
                s = 0
                for a in range(mn):
                    s = s + _conj(self.ghat[k, a]) * self.ghat[i, a]
                self.gram[k * kk + i] = s
                self.gram_eig[k * kk + i] = s
        jobz = b'N'
        kint = kk
        info = 0
        lwork = self.lwork
        lrwork = self.lrwork
        liwork = self.liwork
        zheevd(&jobz, &uplo, &kint, &self.gram_eig[0], &kint, &self.gram_w[0],
               &self.work[0], &lwork, &self.rwork[0], &lrwork,
               &self.iwork[0], &liwork, &info)
        if info != 0:
            return _ZF_SKIP
        wmin = self.gram_w[0]
        wmax = self.gram_w[kk - 1]
        if wmin <= 0 or wmax > self.cond_limit * wmin:
            return _ZF_SKIP
        if self._invert_hpd(&self.gram[0], kk) != 0:
            return _ZF_SKIP
        for k in range(kk):
            for i in range(kk):
                s = 0
                for j in range(kk):
                    s = s + self.gram[k * kk + j] * out_m[j, i]
                out_mzf[k, i] = s
            out_nzf[k] = self.gram[k * kk + k].real
        return _OK
