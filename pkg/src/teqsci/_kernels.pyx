# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the loops in ``_kernels_py``; same signatures."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, fabs
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil
    int __builtin_clzll(unsigned long long) nogil

cdef double complex[4] _PHASE
_PHASE[0] = 1
_PHASE[1] = 1j
_PHASE[2] = -1
_PHASE[3] = -1j


cdef inline double _sign(uint64_t v) noexcept nogil:
    return 1.0 - 2.0 * (__builtin_popcountll(v) & 1)


cdef void _rotate(double complex[::1] psi, uint64_t x, uint64_t z, int ny,
                  double angle) noexcept nogil:
    cdef double c = cos(angle), s = sin(angle)
    cdef Py_ssize_t n = psi.shape[0], mu, nu
    cdef uint64_t hb
    cdef double complex a, b, ph = _PHASE[ny & 3], mis = -1j * s
    if x == 0:
        for mu in range(n):
            if __builtin_popcountll(z & <uint64_t>mu) & 1:
                psi[mu] = psi[mu] * (c + 1j * s)
            else:
                psi[mu] = psi[mu] * (c - 1j * s)
        return
    hb = (<uint64_t>1) << (63 - __builtin_clzll(x))
    for mu in range(n):
        if <uint64_t>mu & hb:
            continue
        nu = <Py_ssize_t>(<uint64_t>mu ^ x)
        a = psi[mu]
        b = psi[nu]
        psi[mu] = c * a + mis * ph * _sign(z & <uint64_t>nu) * b
        psi[nu] = c * b + mis * ph * _sign(z & <uint64_t>mu) * a


def rotate(double complex[::1] psi, uint64_t x, uint64_t z, int ny, double angle):
    with nogil:
        _rotate(psi, x, z, ny, angle)


def trotter(double complex[::1] psi, xs, zs, coeffs, double dt, int n_step):
    cdef const cnp.uint64_t[::1] xv = np.ascontiguousarray(xs, dtype=np.uint64)
    cdef const cnp.uint64_t[::1] zv = np.ascontiguousarray(zs, dtype=np.uint64)
    cdef const double[::1] cv = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef Py_ssize_t t, j, nt = xv.shape[0]
    with nogil:
        for t in range(n_step):
            for j in range(nt):
                _rotate(psi, xv[j], zv[j], __builtin_popcountll(xv[j] & zv[j]) & 3,
                        cv[j] * dt)


def apply_sum(double complex[::1] psi, gx, offsets, zs, cs):
    cdef const cnp.uint64_t[::1] gxv = np.ascontiguousarray(gx, dtype=np.uint64)
    cdef const cnp.int64_t[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const cnp.uint64_t[::1] zv = np.ascontiguousarray(zs, dtype=np.uint64)
    cdef const double complex[::1] cv = np.ascontiguousarray(cs, dtype=np.complex128)
    cdef Py_ssize_t n = psi.shape[0], g, j, mu
    out_arr = np.zeros(n, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef double complex d
    with nogil:
        for g in range(gxv.shape[0]):
            for mu in range(n):
                if psi[mu] == 0:
                    continue
                d = 0
                for j in range(off[g], off[g + 1]):
                    d = d + cv[j] * _sign(zv[j] & <uint64_t>mu)
                out[<Py_ssize_t>(<uint64_t>mu ^ gxv[g])] += d * psi[mu]
    return out_arr


def assemble(members, gx, offsets, zs, cs, double tol=1e-12):
    m_arr = np.ascontiguousarray(members, dtype=np.int64)
    order_arr = np.argsort(m_arr, kind="stable")
    sorted_arr = m_arr[order_arr]
    cdef const cnp.int64_t[::1] mv = m_arr
    cdef const cnp.int64_t[::1] order = order_arr
    cdef const cnp.int64_t[::1] sm = sorted_arr
    cdef const cnp.uint64_t[::1] gxv = np.ascontiguousarray(gx, dtype=np.uint64)
    cdef const cnp.int64_t[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const cnp.uint64_t[::1] zv = np.ascontiguousarray(zs, dtype=np.uint64)
    cdef const double complex[::1] cv = np.ascontiguousarray(cs, dtype=np.complex128)
    cdef Py_ssize_t r = mv.shape[0], g, j, k, lo, hi, mid, cap, count = 0, n_leak = 0
    cdef int64_t target
    cdef uint64_t mu
    cdef double complex d
    cap = max(16, 4 * r)
    rows_arr = np.empty(cap, dtype=np.int64)
    cols_arr = np.empty(cap, dtype=np.int64)
    vals_arr = np.empty(cap, dtype=np.complex128)
    cdef cnp.int64_t[::1] rows = rows_arr
    cdef cnp.int64_t[::1] cols = cols_arr
    cdef double complex[::1] vals = vals_arr
    for g in range(gxv.shape[0]):
        for k in range(r):
            mu = <uint64_t>mv[k]
            d = 0
            for j in range(off[g], off[g + 1]):
                d = d + cv[j] * _sign(zv[j] & mu)
            if fabs(d.real) <= tol and fabs(d.imag) <= tol:
                continue
            target = <int64_t>(mu ^ gxv[g])
            lo = 0
            hi = r
            while lo < hi:
                mid = (lo + hi) >> 1
                if sm[mid] < target:
                    lo = mid + 1
                else:
                    hi = mid
            if lo == r or sm[lo] != target:
                n_leak += 1
                continue
            if count == cap:
                cap *= 2
                rows_arr = np.resize(rows_arr, cap)
                cols_arr = np.resize(cols_arr, cap)
                vals_arr = np.resize(vals_arr, cap)
                rows = rows_arr
                cols = cols_arr
                vals = vals_arr
            rows[count] = order[lo]
            cols[count] = k
            vals[count] = d
            count += 1
    return rows_arr[:count].copy(), cols_arr[:count].copy(), vals_arr[:count].copy(), n_leak
