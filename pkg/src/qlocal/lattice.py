"""Sites, per-site truncated Fock space, and single-site operators.

A site of the infinite lattice is addressed by three integers
``(i1, i2, i3)``; experiments in dimension d < 3 keep the unused trailing
coordinates at zero.  Each site carries the same truncated bosonic number
basis |0>, ..., |n_max>, and every composite object in the package is
built out of the plain complex matrices / vectors defined here.

Ladder operators are kept dimensionless; the grid-spacing factor enters
only through the field operators ``psi = dx**1.5 * a`` used by the
density builders, so commutators reproduce [psi, psi*] = dx^3 on the
untruncated block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GridIndex = tuple[int, int, int]

# Coordinates are packed into 21-bit fields of an int64 for the kernels;
# lexicographic order of sites is preserved by the packing.
COORD_BOUND = 1 << 20


def site(i1: int, i2: int = 0, i3: int = 0) -> GridIndex:
    """Normalize lattice coordinates to a canonical 3-tuple."""
    return (int(i1), int(i2), int(i3))


def as_site(value) -> GridIndex:
    """Coerce an int or a 1-3 element sequence to a GridIndex."""
    if isinstance(value, (int, np.integer)):
        return site(value)
    value = tuple(int(v) for v in value)
    if len(value) > 3:
        raise ValueError(f"grid index has more than 3 coordinates: {value}")
    return value + (0,) * (3 - len(value))


def shift(index: GridIndex, axis: int, step: int) -> GridIndex:
    """Neighbor index I + step * e_axis (axis in 0..2)."""
    out = list(index)
    out[axis] += step
    return tuple(out)


def pack_site(index: GridIndex) -> int:
    i1, i2, i3 = index
    if not all(-COORD_BOUND < c < COORD_BOUND for c in (i1, i2, i3)):
        raise ValueError(f"grid coordinates out of supported range: {index}")
    return (
        ((i1 + COORD_BOUND) << 42)
        | ((i2 + COORD_BOUND) << 21)
        | (i3 + COORD_BOUND)
    )


def unpack_site(key: int) -> GridIndex:
    key = int(key)
    mask = (1 << 21) - 1
    return (
        ((key >> 42) & mask) - COORD_BOUND,
        ((key >> 21) & mask) - COORD_BOUND,
        (key & mask) - COORD_BOUND,
    )


@dataclass(frozen=True)
class FockTruncation:
    """Per-site numerical parameters shared by a whole experiment.

    n_max is the largest retained occupation number (the paper-level
    site space is infinite dimensional; experiments are expected to
    re-run at n_max + 1 as a convergence check).  dx is the grid
    spacing, mass the particle mass.
    """

    n_max: int
    dx: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if self.dx <= 0:
            raise ValueError("dx must be positive")
        if self.mass <= 0:
            raise ValueError("mass must be positive")

    @property
    def dim(self) -> int:
        return self.n_max + 1

    @property
    def cell_volume(self) -> float:
        return self.dx**3


def ladder_ops(trunc: FockTruncation) -> tuple[np.ndarray, np.ndarray]:
    """Annihilation / creation pair on the truncated number basis.

    a|n> = sqrt(n)|n-1>, a_dag|n> = sqrt(n+1)|n+1> with a_dag|n_max> = 0;
    [a, a_dag] = 1 exactly on the n < n_max block, with defect -n_max in
    the truncation corner.
    """
    d = trunc.dim
    a = np.zeros((d, d), dtype=complex)
    for n in range(1, d):
        a[n - 1, n] = np.sqrt(n)
    return a, a.conj().T


def field_ops(trunc: FockTruncation) -> tuple[np.ndarray, np.ndarray]:
    """Lattice field pair psi, psi* = dx^{3/2} * (a, a_dag)."""
    a, adag = ladder_ops(trunc)
    s = trunc.dx**1.5
    return s * a, s * adag


def identity_op(trunc: FockTruncation) -> np.ndarray:
    return np.eye(trunc.dim, dtype=complex)


def number_op(trunc: FockTruncation) -> np.ndarray:
    """Dimensionless occupation operator diag(0, 1, ..., n_max)."""
    return np.diag(np.arange(trunc.dim, dtype=complex))


def number_basis_state(trunc: FockTruncation, n: int) -> np.ndarray:
    """Unit vector |n> of the per-site number basis."""
    if not 0 <= n <= trunc.n_max:
        raise ValueError(f"occupation {n} outside 0..{trunc.n_max}")
    v = np.zeros(trunc.dim, dtype=complex)
    v[n] = 1.0
    return v


def site_inner(x2: np.ndarray, x1: np.ndarray) -> complex:
    """Inner product <x2|x1>, conjugate-linear in the first slot."""
    return complex(np.vdot(x2, x1))


def site_conjugate(x: np.ndarray) -> np.ndarray:
    """Entrywise complex conjugation in the number basis.

    This is the single-site primitive behind the time-reversal map; it is
    an involution and distributes over matrix products.
    """
    return np.conj(x)


def check_site_matrix(trunc: FockTruncation, mat: np.ndarray) -> np.ndarray:
    mat = np.ascontiguousarray(mat, dtype=complex)
    if mat.shape != (trunc.dim, trunc.dim):
        raise TypeError(
            f"site operator shape {mat.shape} does not match truncation dim {trunc.dim}"
        )
    if not np.all(np.isfinite(mat.view(float))):
        raise ValueError("site operator has non-finite entries")
    return mat


def check_site_state(trunc: FockTruncation, vec: np.ndarray) -> np.ndarray:
    vec = np.ascontiguousarray(vec, dtype=complex).reshape(-1)
    if vec.shape != (trunc.dim,):
        raise TypeError(
            f"site state length {vec.shape[0]} does not match truncation dim {trunc.dim}"
        )
    if not np.all(np.isfinite(vec.view(float))):
        raise ValueError("site state has non-finite entries")
    return vec
