# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled RK4 kernel; same contract as ``_kernels_py.rk4_affine``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport isfinite

cnp.import_array()


cdef inline void _affine(const double[:, ::1] A, const double[:, ::1] B,
                         const double[::1] z, const double[::1] u, double[::1] out,
                         Py_ssize_t N, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(N):
        acc = 0.0
        for j in range(N):
            acc += A[i, j] * z[j]
        for j in range(m):
            acc += B[i, j] * u[j]
        out[i] = acc


cdef inline void _quad(const double[:, :, ::1] Kq, const double[:, :, ::1] Lq,
                       const double[:, ::1] lq, const double[::1] z, const double[::1] u,
                       double[::1] out, Py_ssize_t N, Py_ssize_t m, Py_ssize_t nq) noexcept nogil:
    cdef Py_ssize_t r, i, j
    cdef double acc, row
    for r in range(nq):
        acc = 0.0
        for i in range(N):
            row = 0.0
            for j in range(N):
                row += Kq[r, i, j] * z[j]
            for j in range(m):
                row += Lq[r, i, j] * u[j]
            acc += z[i] * row
        for j in range(m):
            acc += lq[r, j] * u[j]
        out[r] = acc


cdef inline void _feedback(const double[:, ::1] F, const double[::1] z, const double[:, :, ::1] US,
                           Py_ssize_t k, Py_ssize_t s, double[::1] u,
                           Py_ssize_t N, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(m):
        acc = 0.0
        for j in range(N):
            acc += F[i, j] * z[j]
        u[i] = acc + US[k, s, i]


def rk4_affine(A, B, F, Kq, Lq, lq, z0, ustage, ufinal, double dt, Py_ssize_t nsteps,
               bint stagewise=False):
    cdef const double[:, ::1] Av = np.ascontiguousarray(A, dtype=np.float64)
    cdef const double[:, ::1] Bv = np.ascontiguousarray(B, dtype=np.float64)
    cdef const double[:, ::1] Fv = np.ascontiguousarray(F, dtype=np.float64)
    cdef const double[:, :, ::1] Kv = np.ascontiguousarray(Kq, dtype=np.float64)
    cdef const double[:, :, ::1] Lv = np.ascontiguousarray(Lq, dtype=np.float64)
    cdef const double[:, ::1] lv = np.ascontiguousarray(lq, dtype=np.float64)
    cdef const double[:, :, ::1] US = np.ascontiguousarray(ustage, dtype=np.float64)
    cdef const double[::1] uf = np.ascontiguousarray(ufinal, dtype=np.float64)
    cdef Py_ssize_t N = Av.shape[0], m = Bv.shape[1], nq = Kv.shape[0]
    Z_arr = np.zeros((nsteps + 1, N))
    U_arr = np.zeros((nsteps + 1, m))
    ACC_arr = np.zeros((nsteps + 1, nq))
    cdef double[:, ::1] Z = Z_arr
    cdef double[:, ::1] U = U_arr
    cdef double[:, ::1] ACC = ACC_arr
    Z_arr[0] = z0
    cdef double[::1] ub = np.zeros(m), u0 = np.zeros(m), u1 = np.zeros(m), u2 = np.zeros(m)
    cdef double[::1] k1 = np.zeros(N), k2 = np.zeros(N), k3 = np.zeros(N), k4 = np.zeros(N)
    cdef double[::1] zs = np.zeros(N)
    cdef double[::1] q1 = np.zeros(nq), q2 = np.zeros(nq), q3 = np.zeros(nq), q4 = np.zeros(nq)
    cdef double h2 = 0.5 * dt, h6 = dt / 6.0
    cdef Py_ssize_t k, i, j, r
    cdef double acc
    cdef bint ok
    cdef Py_ssize_t nvalid = nsteps + 1
    with nogil:
        for k in range(nsteps):
            for i in range(m):
                acc = 0.0
                for j in range(N):
                    acc += Fv[i, j] * Z[k, j]
                ub[i] = acc
                u0[i] = acc + US[k, 0, i]
                u1[i] = acc + US[k, 1, i]
                u2[i] = acc + US[k, 2, i]
            _affine(Av, Bv, Z[k], u0, k1, N, m)
            _quad(Kv, Lv, lv, Z[k], u0, q1, N, m, nq)
            for i in range(N):
                zs[i] = Z[k, i] + h2 * k1[i]
            if stagewise:
                _feedback(Fv, zs, US, k, 1, u1, N, m)
            _affine(Av, Bv, zs, u1, k2, N, m)
            _quad(Kv, Lv, lv, zs, u1, q2, N, m, nq)
            for i in range(N):
                zs[i] = Z[k, i] + h2 * k2[i]
            if stagewise:
                _feedback(Fv, zs, US, k, 1, u1, N, m)
            _affine(Av, Bv, zs, u1, k3, N, m)
            _quad(Kv, Lv, lv, zs, u1, q3, N, m, nq)
            for i in range(N):
                zs[i] = Z[k, i] + dt * k3[i]
            if stagewise:
                _feedback(Fv, zs, US, k, 2, u2, N, m)
            _affine(Av, Bv, zs, u2, k4, N, m)
            _quad(Kv, Lv, lv, zs, u2, q4, N, m, nq)
            for i in range(m):
                U[k, i] = u0[i]
            ok = True
            for i in range(N):
                Z[k + 1, i] = Z[k, i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not isfinite(Z[k + 1, i]):
                    ok = False
            for r in range(nq):
                ACC[k + 1, r] = ACC[k, r] + h6 * (q1[r] + 2.0 * q2[r] + 2.0 * q3[r] + q4[r])
                if not isfinite(ACC[k + 1, r]):
                    ok = False
            if not ok:
                nvalid = k + 1
                break
        if nvalid == nsteps + 1:
            for i in range(m):
                acc = 0.0
                for j in range(N):
                    acc += Fv[i, j] * Z[nsteps, j]
                U[nsteps, i] = acc + uf[i]
    return Z_arr, U_arr, ACC_arr, nvalid
