# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for the sitewise merge operations and Kronecker chains.

Mirrors qlocal._kernels._pure; small complex matrix products are inlined
to avoid per-site numpy dispatch overhead.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


def kron_chain(cnp.complex128_t[:, :, ::1] mats):
    cdef Py_ssize_t w = mats.shape[0]
    cdef Py_ssize_t d = mats.shape[1]
    cdef Py_ssize_t cur = d, s, p, q, r, c
    cdef cnp.complex128_t v
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] out_arr
    cdef cnp.complex128_t[:, ::1] out, nxt, tmp

    out_arr = np.empty((d, d), dtype=np.complex128)
    out = out_arr
    out[:, :] = mats[0]
    for s in range(1, w):
        nxt = np.zeros((cur * d, cur * d), dtype=np.complex128)
        for p in range(cur):
            for q in range(cur):
                v = out[p, q]
                if v == 0:
                    continue
                for r in range(d):
                    for c in range(d):
                        nxt[p * d + r, q * d + c] = v * mats[s, r, c]
        out = nxt
        cur *= d
    return np.asarray(out)


cdef inline void _matmul(cnp.complex128_t[:, :, ::1] a, Py_ssize_t ia,
                         cnp.complex128_t[:, :, ::1] b, Py_ssize_t ib,
                         cnp.complex128_t[:, :, ::1] dst, Py_ssize_t k,
                         Py_ssize_t d) noexcept:
    cdef Py_ssize_t r, c, m
    cdef cnp.complex128_t acc
    for r in range(d):
        for c in range(d):
            acc = 0
            for m in range(d):
                acc = acc + a[ia, r, m] * b[ib, m, c]
            dst[k, r, c] = acc


def merge_mul(cnp.int64_t[::1] keys_a, cnp.complex128_t[:, :, ::1] mats_a,
              cnp.int64_t[::1] keys_b, cnp.complex128_t[:, :, ::1] mats_b):
    cdef Py_ssize_t na = keys_a.shape[0], nb = keys_b.shape[0]
    cdef Py_ssize_t d = mats_a.shape[1] if na else mats_b.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] keys_arr = np.empty(na + nb, dtype=np.int64)
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] mats_arr = np.empty((na + nb, d, d), dtype=np.complex128)
    cdef cnp.int64_t[::1] keys = keys_arr
    cdef cnp.complex128_t[:, :, ::1] mats = mats_arr
    cdef Py_ssize_t i = 0, j = 0, k = 0
    cdef cnp.int64_t ka, kb

    while i < na and j < nb:
        ka = keys_a[i]
        kb = keys_b[j]
        if ka == kb:
            keys[k] = ka
            _matmul(mats_a, i, mats_b, j, mats, k, d)
            i += 1
            j += 1
        elif ka < kb:
            keys[k] = ka
            mats[k] = mats_a[i]
            i += 1
        else:
            keys[k] = kb
            mats[k] = mats_b[j]
            j += 1
        k += 1
    while i < na:
        keys[k] = keys_a[i]
        mats[k] = mats_a[i]
        i += 1
        k += 1
    while j < nb:
        keys[k] = keys_b[j]
        mats[k] = mats_b[j]
        j += 1
        k += 1
    return keys_arr[:k].copy(), mats_arr[:k].copy()


def term_apply(cnp.int64_t[::1] keys_a, cnp.complex128_t[:, :, ::1] mats_a,
               cnp.int64_t[::1] keys_v, cnp.complex128_t[:, ::1] vecs_v,
               cnp.complex128_t[:, ::1] bg_a):
    cdef Py_ssize_t na = keys_a.shape[0], nv = keys_v.shape[0]
    cdef Py_ssize_t d = mats_a.shape[1] if na else vecs_v.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] keys_arr = np.empty(na + nv, dtype=np.int64)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] vecs_arr = np.empty((na + nv, d), dtype=np.complex128)
    cdef cnp.int64_t[::1] keys = keys_arr
    cdef cnp.complex128_t[:, ::1] vecs = vecs_arr
    cdef Py_ssize_t i = 0, j = 0, k = 0, r, m
    cdef cnp.int64_t ka, kv
    cdef cnp.complex128_t acc

    while i < na and j < nv:
        ka = keys_a[i]
        kv = keys_v[j]
        if ka == kv:
            keys[k] = ka
            for r in range(d):
                acc = 0
                for m in range(d):
                    acc = acc + mats_a[i, r, m] * vecs_v[j, m]
                vecs[k, r] = acc
            i += 1
            j += 1
        elif ka < kv:
            keys[k] = ka
            for r in range(d):
                acc = 0
                for m in range(d):
                    acc = acc + mats_a[i, r, m] * bg_a[i, m]
                vecs[k, r] = acc
            i += 1
        else:
            keys[k] = kv
            vecs[k] = vecs_v[j]
            j += 1
        k += 1
    while i < na:
        keys[k] = keys_a[i]
        for r in range(d):
            acc = 0
            for m in range(d):
                acc = acc + mats_a[i, r, m] * bg_a[i, m]
            vecs[k, r] = acc
        i += 1
        k += 1
    while j < nv:
        keys[k] = keys_v[j]
        vecs[k] = vecs_v[j]
        j += 1
        k += 1
    return keys_arr[:k].copy(), vecs_arr[:k].copy()


def pair_overlap(cnp.int64_t[::1] keys2, cnp.complex128_t[:, ::1] vecs2,
                 cnp.int64_t[::1] keys1, cnp.complex128_t[:, ::1] vecs1,
                 cnp.complex128_t[:, ::1] bg_at2, cnp.complex128_t[:, ::1] bg_at1):
    cdef Py_ssize_t n2 = keys2.shape[0], n1 = keys1.shape[0]
    cdef Py_ssize_t d = vecs2.shape[1] if n2 else vecs1.shape[1]
    cdef Py_ssize_t i = 0, j = 0, m
    cdef cnp.int64_t k2, k1
    cdef cnp.complex128_t out = 1.0, acc

    while i < n2 and j < n1:
        k2 = keys2[i]
        k1 = keys1[j]
        if k2 == k1:
            acc = 0
            for m in range(d):
                acc = acc + vecs2[i, m].conjugate() * vecs1[j, m]
            out = out * acc
            i += 1
            j += 1
        elif k2 < k1:
            acc = 0
            for m in range(d):
                acc = acc + vecs2[i, m].conjugate() * bg_at2[i, m]
            out = out * acc
            i += 1
        else:
            acc = 0
            for m in range(d):
                acc = acc + bg_at1[j, m].conjugate() * vecs1[j, m]
            out = out * acc
            j += 1
    while i < n2:
        acc = 0
        for m in range(d):
            acc = acc + vecs2[i, m].conjugate() * bg_at2[i, m]
        out = out * acc
        i += 1
    while j < n1:
        acc = 0
        for m in range(d):
            acc = acc + bg_at1[j, m].conjugate() * vecs1[j, m]
        out = out * acc
        j += 1
    return complex(out)
