"""Finitely supported operators over the infinite lattice.

A ProductOperator acts with an explicit matrix on finitely many sites
and as the identity everywhere else.  A QuasiLocalOperator is a finite
complex linear combination of product operators; sums are kept as formal
term lists because a sum of tensor products is generally not a tensor
product.  Canonical form drops identity site factors, merges identical
patterns, and prunes coefficients below COEFF_TOL, so repeated
commutators do not grow without bound.

embed_dense realizes an operator as a dense matrix on an ordered finite
window (site 0 of the window is the most significant Kronecker factor);
it is the bridge to every dense computation in the package.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import CapExceeded, TruncationMismatch
from .lattice import (
    FockTruncation,
    GridIndex,
    as_site,
    check_site_matrix,
    pack_site,
    unpack_site,
)

COEFF_TOL = 1e-14

DEFAULT_EMBED_CAP = 4096


def _strip_identities(trunc, keys, mats):
    if len(keys) == 0:
        return keys, mats
    eye = np.eye(trunc.dim, dtype=complex)
    keep = np.array([not np.array_equal(mats[i], eye) for i in range(len(keys))])
    if keep.all():
        return keys, mats
    return keys[keep], mats[keep]


class ProductOperator:
    """Sitewise product pattern: finite map site -> matrix, identity elsewhere."""

    __slots__ = ("trunc", "keys", "mats")

    def __init__(self, trunc: FockTruncation, keys, mats, *, _canonical=False):
        self.trunc = trunc
        keys = np.asarray(keys, dtype=np.int64)
        mats = np.ascontiguousarray(mats, dtype=complex).reshape(-1, trunc.dim, trunc.dim)
        if not _canonical:
            order = np.argsort(keys)
            keys, mats = keys[order], mats[order]
            if len(keys) > 1 and np.any(np.diff(keys) == 0):
                raise ValueError("duplicate site in product operator")
            keys, mats = _strip_identities(trunc, keys, mats)
        self.keys = keys
        self.mats = mats

    @classmethod
    def from_sites(cls, trunc: FockTruncation, site_ops: Mapping) -> "ProductOperator":
        items = sorted((pack_site(as_site(i)), m) for i, m in site_ops.items())
        keys = np.array([k for k, _ in items], dtype=np.int64)
        mats = np.array(
            [check_site_matrix(trunc, m) for _, m in items], dtype=complex
        ).reshape(-1, trunc.dim, trunc.dim)
        keys, mats = _strip_identities(trunc, keys, mats)
        return cls(trunc, keys, mats, _canonical=True)

    @property
    def support(self) -> tuple[GridIndex, ...]:
        return tuple(unpack_site(k) for k in self.keys)

    def site_operator(self, index) -> np.ndarray:
        key = pack_site(as_site(index))
        pos = np.searchsorted(self.keys, key)
        if pos < len(self.keys) and self.keys[pos] == key:
            return self.mats[pos].copy()
        return np.eye(self.trunc.dim, dtype=complex)

    def pattern_key(self):
        return (self.keys.tobytes(), self.mats.tobytes())


class QuasiLocalOperator:
    """Finite linear combination of product operators (canonicalized)."""

    __slots__ = ("trunc", "terms")

    def __init__(self, trunc: FockTruncation, terms: Iterable = (), *, _canonical=False):
        self.trunc = trunc
        terms = tuple(terms)
        if not _canonical:
            terms = _canonicalize(trunc, terms)
        self.terms = terms

    # -- constructors ------------------------------------------------

    @classmethod
    def zero(cls, trunc: FockTruncation) -> "QuasiLocalOperator":
        return cls(trunc, (), _canonical=True)

    @classmethod
    def identity(cls, trunc: FockTruncation) -> "QuasiLocalOperator":
        unit = ProductOperator(trunc, [], [], _canonical=True)
        return cls(trunc, ((1.0 + 0.0j, unit),), _canonical=True)

    @classmethod
    def from_site(cls, trunc: FockTruncation, index, mat) -> "QuasiLocalOperator":
        return cls.from_product(trunc, {index: mat})

    @classmethod
    def from_product(cls, trunc: FockTruncation, site_ops: Mapping, coeff=1.0):
        return cls(trunc, ((complex(coeff), ProductOperator.from_sites(trunc, site_ops)),))

    # -- structure ---------------------------------------------------

    @property
    def support(self) -> tuple[GridIndex, ...]:
        keys = set()
        for _, p in self.terms:
            keys.update(p.keys.tolist())
        return tuple(unpack_site(k) for k in sorted(keys))

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def _check_compatible(self, other):
        if self.trunc != other.trunc:
            raise TruncationMismatch(
                f"operands built for different truncations: {self.trunc} vs {other.trunc}"
            )

    # -- algebra -----------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, QuasiLocalOperator):
            return NotImplemented
        self._check_compatible(other)
        return QuasiLocalOperator(self.trunc, self.terms + other.terms)

    def __sub__(self, other):
        if not isinstance(other, QuasiLocalOperator):
            return NotImplemented
        return self + (-other)

    def __neg__(self):
        return self.scale(-1.0)

    def scale(self, c) -> "QuasiLocalOperator":
        c = complex(c)
        return QuasiLocalOperator(
            self.trunc, tuple((c * cc, p) for cc, p in self.terms)
        )

    def __mul__(self, other):
        if isinstance(other, QuasiLocalOperator):
            self._check_compatible(other)
            out = []
            for ca, pa in self.terms:
                for cb, pb in other.terms:
                    keys, mats = _kernels.merge_mul(pa.keys, pa.mats, pb.keys, pb.mats)
                    keys, mats = _strip_identities(self.trunc, keys, mats)
                    out.append(
                        (ca * cb, ProductOperator(self.trunc, keys, mats, _canonical=True))
                    )
            return QuasiLocalOperator(self.trunc, out)
        if isinstance(other, (int, float, complex, np.number)):
            return self.scale(other)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return self.scale(other)
        return NotImplemented

    def adjoint(self) -> "QuasiLocalOperator":
        out = []
        for c, p in self.terms:
            mats = np.conj(np.swapaxes(p.mats, 1, 2))
            out.append(
                (np.conj(c), ProductOperator(self.trunc, p.keys.copy(), mats, _canonical=True))
            )
        return QuasiLocalOperator(self.trunc, out)

    def conjugate_entrywise(self) -> "QuasiLocalOperator":
        """Entrywise complex conjugation in the number basis (time reversal)."""
        out = []
        for c, p in self.terms:
            out.append(
                (
                    np.conj(c),
                    ProductOperator(self.trunc, p.keys.copy(), np.conj(p.mats), _canonical=True),
                )
            )
        return QuasiLocalOperator(self.trunc, out)

    # -- dense realization --------------------------------------------

    def embed_dense(self, window: Sequence, cap: int = DEFAULT_EMBED_CAP) -> np.ndarray:
        """Dense matrix on an ordered window of sites (must cover the support)."""
        sites = [as_site(w) for w in window]
        keys = [pack_site(s) for s in sites]
        if len(set(keys)) != len(keys):
            raise ValueError("window contains repeated sites")
        dim = self.trunc.dim ** len(sites)
        if dim > cap:
            raise CapExceeded(
                f"window dimension {self.trunc.dim}^{len(sites)} = {dim} exceeds cap {cap}"
            )
        pos = {k: i for i, k in enumerate(keys)}
        d = self.trunc.dim
        eye = np.eye(d, dtype=complex)
        out = np.zeros((dim, dim), dtype=complex)
        for c, p in self.terms:
            stack = np.broadcast_to(eye, (len(sites), d, d)).copy()
            for k, m in zip(p.keys.tolist(), p.mats):
                if k not in pos:
                    raise ValueError("window does not cover operator support")
                stack[pos[k]] = m
            out += c * _kernels.kron_chain(stack)
        return out


def _canonicalize(trunc, terms):
    merged: dict = {}
    for c, p in terms:
        c = complex(c)
        key = p.pattern_key()
        if key in merged:
            old_c, _ = merged[key]
            merged[key] = (old_c + c, p)
        else:
            merged[key] = (c, p)
    kept = [
        (c, p)
        for c, p in merged.values()
        if abs(c) > COEFF_TOL
    ]
    kept.sort(key=lambda cp: (len(cp[1].keys),) + cp[1].pattern_key())
    return tuple(kept)


# -- spec-level operation surface -------------------------------------


def add(a: QuasiLocalOperator, b: QuasiLocalOperator) -> QuasiLocalOperator:
    return a + b


def multiply(a: QuasiLocalOperator, b: QuasiLocalOperator) -> QuasiLocalOperator:
    return a * b


def adjoint(a: QuasiLocalOperator) -> QuasiLocalOperator:
    return a.adjoint()


def commutator(a: QuasiLocalOperator, b: QuasiLocalOperator) -> QuasiLocalOperator:
    return a * b - b * a


def support(a: QuasiLocalOperator) -> tuple[GridIndex, ...]:
    return a.support


def embed_dense(a: QuasiLocalOperator, window, cap: int = DEFAULT_EMBED_CAP):
    return a.embed_dense(window, cap=cap)
