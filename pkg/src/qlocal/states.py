"""Backgrounds, sectors, and the vectors obtained by finite overrides.

A Background assigns a normalized site state to every lattice site via a
total rule (uniform, periodic, or uniform-default-plus-finite-patch).  A
PureStateVector is a background plus finitely many per-site overrides; a
LocalVector is a finite formal linear combination of such vectors over
one shared background.  Inner products reduce to finite site products
because off-override background factors are 1.

Two backgrounds label the same sector exactly when their rules agree, up
to a per-site phase, at all but finitely many sites; SectorId implements
that test by reducing rules to a minimal-period canonical pattern with
phases fixed (first nonzero amplitude real positive).  Cross-sector
vectors are globally orthogonal; the partial product over growing boxes
exhibits the decay quantitatively.
"""

from __future__ import annotations

import math
from typing import Iterable, Mapping

import numpy as np

from . import _kernels
from .errors import SectorMismatch, TruncationMismatch
from .lattice import (
    FockTruncation,
    GridIndex,
    as_site,
    check_site_state,
    pack_site,
    site_inner,
    unpack_site,
)

NORM_TOL = 1e-12
PHASE_TOL = 1e-12
COEFF_TOL = 1e-14


def _canonical_phase(vec: np.ndarray) -> np.ndarray:
    """Rotate a site state so its first nonzero amplitude is real positive."""
    for x in vec:
        if abs(x) > PHASE_TOL:
            return vec * (np.conj(x) / abs(x))
    return vec.copy()


def _check_normalized(trunc, vec) -> np.ndarray:
    vec = check_site_state(trunc, vec)
    if abs(np.linalg.norm(vec) - 1.0) > NORM_TOL:
        raise ValueError("background site states must be normalized to 1")
    return vec


class Background:
    """Total site-state rule over the infinite lattice (all states normalized).

    kind is one of 'uniform', 'periodic', 'explicit'.  Periodic patterns
    are indexed by the absolute residues (i1 % p1, i2 % p2, i3 % p3);
    explicit rules are a uniform default plus a finite patch, so their
    tail behaviour is always decidable.
    """

    __slots__ = ("trunc", "dim", "kind", "pattern", "periods", "patch")

    def __init__(self, trunc, dim, kind, pattern, periods, patch):
        self.trunc = trunc
        self.dim = dim
        self.kind = kind
        self.pattern = pattern  # (P, site_dim) array, residue-lexicographic rows
        self.periods = periods  # 3-tuple, trailing 1s on unused axes
        self.patch = patch      # dict packed-key -> state (explicit only)
        if dim not in (1, 2, 3):
            raise ValueError("lattice dimension must be 1, 2 or 3")

    # -- constructors --------------------------------------------------

    @classmethod
    def uniform(cls, trunc: FockTruncation, state, dim: int = 1) -> "Background":
        state = _check_normalized(trunc, state)
        return cls(trunc, dim, "uniform", state[None, :].copy(), (1, 1, 1), {})

    @classmethod
    def periodic(cls, trunc: FockTruncation, pattern, periods, dim: int = 1) -> "Background":
        periods = tuple(int(p) for p in periods)
        if len(periods) > 3:
            raise ValueError("at most 3 period entries")
        periods = periods + (1,) * (3 - len(periods))
        if any(p < 1 for p in periods):
            raise ValueError("periods must be >= 1")
        if any(p > 1 for p in periods[dim:]):
            raise ValueError("period > 1 on an unused axis")
        rows = [_check_normalized(trunc, s) for s in pattern]
        if len(rows) != periods[0] * periods[1] * periods[2]:
            raise ValueError(
                f"pattern needs {periods[0] * periods[1] * periods[2]} entries, got {len(rows)}"
            )
        return cls(trunc, dim, "periodic", np.array(rows), periods, {})

    @classmethod
    def explicit(cls, trunc: FockTruncation, default, patch: Mapping, dim: int = 1) -> "Background":
        default = _check_normalized(trunc, default)
        packed = {
            pack_site(as_site(i)): _check_normalized(trunc, s) for i, s in patch.items()
        }
        return cls(trunc, dim, "explicit", default[None, :].copy(), (1, 1, 1), packed)

    # -- evaluation ----------------------------------------------------

    def _pattern_row(self, index: GridIndex) -> int:
        p1, p2, p3 = self.periods
        i1, i2, i3 = index
        return ((i1 % p1) * p2 + (i2 % p2)) * p3 + (i3 % p3)

    def site_state(self, index) -> np.ndarray:
        index = as_site(index)
        if self.patch:
            key = pack_site(index)
            if key in self.patch:
                return self.patch[key].copy()
        return self.pattern[self._pattern_row(index)].copy()

    def states_at_keys(self, keys: np.ndarray) -> np.ndarray:
        """Background states stacked at packed site keys (kernel helper)."""
        out = np.empty((len(keys), self.trunc.dim), dtype=complex)
        for i, k in enumerate(keys.tolist()):
            if self.patch and k in self.patch:
                out[i] = self.patch[k]
            else:
                out[i] = self.pattern[self._pattern_row(unpack_site(k))]
        return out

    # -- structure -----------------------------------------------------

    def conjugate(self) -> "Background":
        return Background(
            self.trunc,
            self.dim,
            self.kind,
            np.conj(self.pattern),
            self.periods,
            {k: np.conj(v) for k, v in self.patch.items()},
        )

    def sector_id(self) -> "SectorId":
        return SectorId.of(self)

    def literal_difference_sites(self, other: "Background"):
        """Finite set of packed keys where the two rules may literally differ.

        Returns None when the base rules differ somewhere outside any
        finite patch (hence at infinitely many sites).  Comparison is
        exact up to NORM_TOL with no phase freedom: vectors of the two
        backgrounds are only jointly usable when their tails agree
        literally.
        """
        if self.trunc != other.trunc or self.dim != other.dim:
            return None
        periods = tuple(
            _lcm(p, q) for p, q in zip(self.periods, other.periods)
        )
        for i1 in range(periods[0]):
            for i2 in range(periods[1]):
                for i3 in range(periods[2]):
                    idx = (i1, i2, i3)
                    a = self.pattern[self._pattern_row(idx)]
                    b = other.pattern[other._pattern_row(idx)]
                    if not np.allclose(a, b, rtol=0.0, atol=NORM_TOL):
                        return None
        return set(self.patch) | set(other.patch)


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


class SectorId:
    """Canonical label of the equivalence class of a background.

    Finite patches are dropped, per-site phases are fixed, and periodic
    patterns are reduced to their minimal period, so equality of labels
    decides 'rules agree up to phases at all but finitely many sites'.
    """

    __slots__ = ("trunc", "dim", "periods", "pattern")

    def __init__(self, trunc, dim, periods, pattern):
        self.trunc = trunc
        self.dim = dim
        self.periods = periods
        self.pattern = pattern

    @classmethod
    def of(cls, bg: Background) -> "SectorId":
        rows = np.array([_canonical_phase(r) for r in bg.pattern])
        periods, rows = _reduce_periods(bg.periods, rows)
        return cls(bg.trunc, bg.dim, periods, rows)

    def __eq__(self, other):
        if not isinstance(other, SectorId):
            return NotImplemented
        return (
            self.trunc == other.trunc
            and self.dim == other.dim
            and self.periods == other.periods
            and self.pattern.shape == other.pattern.shape
            and np.allclose(self.pattern, other.pattern, rtol=0.0, atol=10 * PHASE_TOL)
        )

    __hash__ = None

    def __repr__(self):
        return f"SectorId(dim={self.dim}, periods={self.periods}, rows={len(self.pattern)})"


def _reduce_periods(periods, rows):
    """Shrink each axis period to the smallest divisor the pattern respects."""
    grid = rows.reshape(periods + rows.shape[1:])
    for axis in range(3):
        p = grid.shape[axis]
        for q in sorted(_divisors(p)):
            if q == p:
                break
            reshaped = np.moveaxis(grid, axis, 0)
            blocks = reshaped.reshape((p // q, q) + reshaped.shape[1:])
            if np.allclose(blocks, blocks[0], rtol=0.0, atol=PHASE_TOL):
                grid = np.moveaxis(blocks[0], 0, axis)
                break
    new_periods = grid.shape[:3]
    return tuple(int(p) for p in new_periods), grid.reshape((-1,) + rows.shape[1:])


def _divisors(n: int):
    return [d for d in range(1, n + 1) if n % d == 0]


class PureStateVector:
    """One background plus finitely many (possibly unnormalized) overrides."""

    __slots__ = ("background", "keys", "vecs")

    def __init__(self, background: Background, overrides: Mapping = (), *, _packed=None):
        self.background = background
        if _packed is not None:
            self.keys, self.vecs = _packed
            return
        trunc = background.trunc
        items = sorted(
            (pack_site(as_site(i)), check_site_state(trunc, v))
            for i, v in dict(overrides).items()
        )
        items = [
            (k, v)
            for k, v in items
            if not np.array_equal(v, background.states_at_keys(np.array([k], dtype=np.int64))[0])
        ]
        self.keys = np.array([k for k, _ in items], dtype=np.int64)
        self.vecs = np.array([v for _, v in items], dtype=complex).reshape(
            -1, trunc.dim
        )

    @property
    def override_sites(self) -> tuple[GridIndex, ...]:
        return tuple(unpack_site(k) for k in self.keys)

    def site_state(self, index) -> np.ndarray:
        key = pack_site(as_site(index))
        pos = np.searchsorted(self.keys, key)
        if pos < len(self.keys) and self.keys[pos] == key:
            return self.vecs[pos].copy()
        return self.background.site_state(index)

    def pattern_key(self):
        return (self.keys.tobytes(), self.vecs.tobytes())

    def conjugate(self) -> "PureStateVector":
        return PureStateVector(
            self.background.conjugate(),
            (),
            _packed=(self.keys.copy(), np.conj(self.vecs)),
        )


class LocalVector:
    """Finite formal linear combination of PureStateVectors on one background."""

    __slots__ = ("background", "terms")

    def __init__(self, background: Background, terms: Iterable = (), *, _canonical=False):
        self.background = background
        terms = tuple(terms)
        if not _canonical:
            terms = _canonicalize_vec(terms)
        self.terms = terms

    @classmethod
    def from_background(cls, background: Background) -> "LocalVector":
        return cls(background, ((1.0 + 0.0j, PureStateVector(background)),), _canonical=True)

    @classmethod
    def from_overrides(cls, background, overrides: Mapping, coeff=1.0) -> "LocalVector":
        return cls(background, ((complex(coeff), PureStateVector(background, overrides)),))

    @property
    def trunc(self) -> FockTruncation:
        return self.background.trunc

    @property
    def override_sites(self) -> tuple[GridIndex, ...]:
        keys = set()
        for _, pv in self.terms:
            keys.update(pv.keys.tolist())
        return tuple(unpack_site(k) for k in sorted(keys))

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def sector_id(self) -> SectorId:
        return self.background.sector_id()

    def scale(self, c) -> "LocalVector":
        c = complex(c)
        return LocalVector(
            self.background, tuple((c * cc, pv) for cc, pv in self.terms), _canonical=True
        )

    def conjugate(self) -> "LocalVector":
        bg = self.background.conjugate()
        terms = tuple(
            (
                np.conj(c),
                PureStateVector(bg, (), _packed=(pv.keys.copy(), np.conj(pv.vecs))),
            )
            for c, pv in self.terms
        )
        return LocalVector(bg, terms, _canonical=True)


def _canonicalize_vec(terms):
    merged: dict = {}
    for c, pv in terms:
        c = complex(c)
        key = pv.pattern_key()
        if key in merged:
            old_c, _ = merged[key]
            merged[key] = (old_c + c, pv)
        else:
            merged[key] = (c, pv)
    kept = [(c, pv) for c, pv in merged.values() if abs(c) > COEFF_TOL]
    kept.sort(key=lambda cp: (len(cp[1].keys),) + cp[1].pattern_key())
    return tuple(kept)


def _rebase(v: LocalVector, background: Background) -> LocalVector:
    """Re-express v over an equivalent background differing at finitely many sites."""
    if v.background is background:
        return v
    diff = v.background.literal_difference_sites(background)
    if diff is None:
        raise SectorMismatch(
            "vectors do not share a common background representative"
        )
    if not diff:
        return LocalVector(
            background,
            tuple(
                (c, PureStateVector(background, (), _packed=(pv.keys, pv.vecs)))
                for c, pv in v.terms
            ),
            _canonical=True,
        )
    diff_sorted = sorted(diff)
    out = []
    for c, pv in v.terms:
        have = set(pv.keys.tolist())
        extra = np.array([k for k in diff_sorted if k not in have], dtype=np.int64)
        if len(extra):
            keys = np.concatenate([pv.keys, extra])
            vecs = np.concatenate([pv.vecs, v.background.states_at_keys(extra)])
            order = np.argsort(keys)
            keys, vecs = keys[order], vecs[order]
        else:
            keys, vecs = pv.keys, pv.vecs
        out.append((c, PureStateVector(background, (), _packed=(keys, vecs))))
    return LocalVector(background, out)


def _pair_overlap(bg: Background, pv2: PureStateVector, pv1: PureStateVector) -> complex:
    return _kernels.pair_overlap(
        pv2.keys,
        pv2.vecs,
        pv1.keys,
        pv1.vecs,
        bg.states_at_keys(pv2.keys),
        bg.states_at_keys(pv1.keys),
    )


def inner_product(v2: LocalVector, v1: LocalVector) -> complex:
    """Sector inner product, conjugate-linear in the first argument.

    Raises SectorMismatch when the arguments do not live over a common
    background representative (use global_inner_product for the total
    state-vector space, where cross-sector overlaps are exactly zero).
    """
    v1 = _rebase(v1, v2.background)
    bg = v2.background
    out = 0.0 + 0.0j
    for c2, pv2 in v2.terms:
        for c1, pv1 in v1.terms:
            out += np.conj(c2) * c1 * _pair_overlap(bg, pv2, pv1)
    return complex(out)


def global_inner_product(v2: LocalVector, v1: LocalVector) -> complex:
    """Inner product on the full state-vector space: exact 0 across sectors."""
    if v2.sector_id() != v1.sector_id():
        return 0.0 + 0.0j
    return inner_product(v2, v1)


def norm(v: LocalVector) -> float:
    val = inner_product(v, v)
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ArithmeticError(f"self inner product not real: {val}")
    return math.sqrt(max(val.real, 0.0))


def linear_combine(c, v1: LocalVector, d, v2: LocalVector) -> LocalVector:
    """Formal sum c*v1 + d*v2 (the operands must share a sector representative)."""
    v2 = _rebase(v2, v1.background)
    return LocalVector(
        v1.background,
        tuple((complex(c) * cc, pv) for cc, pv in v1.terms)
        + tuple((complex(d) * cc, pv) for cc, pv in v2.terms),
    )


def apply(A, v: LocalVector) -> LocalVector:
    """Act with a quasi-local operator on a local vector (sector preserving).

    Only the finitely many sites in the operator support are touched, so
    the result lives over the unchanged background by construction.
    """
    if A.trunc != v.trunc:
        raise TruncationMismatch(
            f"operator truncation {A.trunc} does not match state truncation {v.trunc}"
        )
    bg = v.background
    out = []
    for ca, p in A.terms:
        bg_a = bg.states_at_keys(p.keys)
        for cv, pv in v.terms:
            keys, vecs = _kernels.term_apply(p.keys, p.mats, pv.keys, pv.vecs, bg_a)
            out.append((ca * cv, PureStateVector(bg, (), _packed=(keys, vecs))))
    return LocalVector(bg, out)


def equivalent(v: PureStateVector, background: Background) -> bool:
    """Whether a pure state vector belongs to the sector of the background."""
    return v.background.sector_id() == background.sector_id()


def cross_sector_overlap_partial(bg1: Background, bg2: Background, n: int) -> complex:
    """Partial product of site overlaps over the centered box of radius n.

    The box covers all sites with |i_j| <= n on the active axes (unused
    coordinates stay 0), i.e. (2n+1)^dim sites.  The magnitude is
    non-increasing in n; uniform per-site overlap q < 1 gives exactly
    q^{sites(n)}.
    """
    if bg1.trunc != bg2.trunc:
        raise TruncationMismatch("backgrounds use different truncations")
    dim = max(bg1.dim, bg2.dim)
    span = range(-n, n + 1)
    out = 1.0 + 0.0j
    ranges = [span if ax < dim else (0,) for ax in range(3)]
    for i1 in ranges[0]:
        for i2 in ranges[1]:
            for i3 in ranges[2]:
                idx = (i1, i2, i3)
                out *= site_inner(bg2.site_state(idx), bg1.site_state(idx))
    return complex(out)
