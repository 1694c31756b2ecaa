"""Pure numpy implementations of the hot kernels.

Same signatures as the compiled Cython module; selected automatically
when the extension is unavailable (or when QLOCAL_PURE_KERNELS is set).
"""

import numpy as np

BACKEND = "pure"


def kron_chain(mats: np.ndarray) -> np.ndarray:
    """Iterated Kronecker product of a (w, d, d) stack, factor 0 most significant."""
    out = mats[0]
    for i in range(1, mats.shape[0]):
        out = np.kron(out, mats[i])
    return np.ascontiguousarray(out)


def merge_mul(keys_a, mats_a, keys_b, mats_b):
    """Sitewise product of two finitely supported operator patterns.

    keys_* are sorted int64 site keys, mats_* the matching (k, d, d)
    site matrices.  Where both patterns act on a site the matrices are
    composed (left operand first); elsewhere the lone matrix is kept.
    Returns sorted union keys and matrices.
    """
    na, nb = len(keys_a), len(keys_b)
    d = mats_a.shape[1] if na else mats_b.shape[1]
    keys = np.empty(na + nb, dtype=np.int64)
    mats = np.empty((na + nb, d, d), dtype=complex)
    i = j = k = 0
    while i < na and j < nb:
        ka, kb = keys_a[i], keys_b[j]
        if ka == kb:
            keys[k] = ka
            mats[k] = mats_a[i] @ mats_b[j]
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
    if i < na:
        r = na - i
        keys[k : k + r] = keys_a[i:]
        mats[k : k + r] = mats_a[i:]
        k += r
    if j < nb:
        r = nb - j
        keys[k : k + r] = keys_b[j:]
        mats[k : k + r] = mats_b[j:]
        k += r
    return keys[:k].copy(), mats[:k].copy()


def term_apply(keys_a, mats_a, keys_v, vecs_v, bg_a):
    """Apply an operator pattern to an override pattern of a product vector.

    bg_a[i] is the background state at keys_a[i]; it is consumed where
    the operator touches a site with no override.  Overrides outside the
    operator support pass through unchanged.
    """
    na, nv = len(keys_a), len(keys_v)
    d = mats_a.shape[1] if na else vecs_v.shape[1]
    keys = np.empty(na + nv, dtype=np.int64)
    vecs = np.empty((na + nv, d), dtype=complex)
    i = j = k = 0
    while i < na and j < nv:
        ka, kv = keys_a[i], keys_v[j]
        if ka == kv:
            keys[k] = ka
            vecs[k] = mats_a[i] @ vecs_v[j]
            i += 1
            j += 1
        elif ka < kv:
            keys[k] = ka
            vecs[k] = mats_a[i] @ bg_a[i]
            i += 1
        else:
            keys[k] = kv
            vecs[k] = vecs_v[j]
            j += 1
        k += 1
    while i < na:
        keys[k] = keys_a[i]
        vecs[k] = mats_a[i] @ bg_a[i]
        i += 1
        k += 1
    if j < nv:
        r = nv - j
        keys[k : k + r] = keys_v[j:]
        vecs[k : k + r] = vecs_v[j:]
        k += r
    return keys[:k].copy(), vecs[:k].copy()


def pair_overlap(keys2, vecs2, keys1, vecs1, bg_at2, bg_at1):
    """Product over the union support of <site2|site1> for a shared background.

    bg_at2[i] / bg_at1[j] are the common background states at keys2[i] /
    keys1[j]; they stand in for the missing side where only one pattern
    overrides a site.  Off-union sites contribute factor 1 by
    normalization.
    """
    n2, n1 = len(keys2), len(keys1)
    out = 1.0 + 0.0j
    i = j = 0
    while i < n2 and j < n1:
        k2, k1 = keys2[i], keys1[j]
        if k2 == k1:
            out *= np.vdot(vecs2[i], vecs1[j])
            i += 1
            j += 1
        elif k2 < k1:
            out *= np.vdot(vecs2[i], bg_at2[i])
            i += 1
        else:
            out *= np.vdot(bg_at1[j], vecs1[j])
            j += 1
    while i < n2:
        out *= np.vdot(vecs2[i], bg_at2[i])
        i += 1
    while j < n1:
        out *= np.vdot(bg_at1[j], vecs1[j])
        j += 1
    return complex(out)
