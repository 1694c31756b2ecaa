"""Anti-unitary time reversal: entrywise conjugation in the number basis.

For spinless bosons the map is plain complex conjugation of matrices,
states, and coefficients.  It fixes occupation operators and the
symmetrized hopping densities, flips the momentum density, and leaves
the commutator generator invariant for real Hamiltonians.  On
backgrounds it either stays inside the sector (per-site states
conjugation-invariant up to phase at all but finitely many sites) or
lands in a different sector; the classifier reports which, together
with the uniform per-site overlap bound driving the orthogonality decay.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import QuasiLocalOperator
from .dynamics import HamiltonianSpec, Window, window_hamiltonian
from .lattice import site_inner
from .states import Background, LocalVector

INVARIANCE_TOL = 1e-12


def reverse_operator(A: QuasiLocalOperator) -> QuasiLocalOperator:
    """T A = A* (coefficients conjugated, site matrices conjugated entrywise)."""
    return A.conjugate_entrywise()


def reverse_state(v: LocalVector) -> LocalVector:
    """Conjugate background rule, overrides, and coefficients (norm preserved)."""
    return v.conjugate()


def reverse_background(bg: Background) -> Background:
    return bg.conjugate()


@dataclass(frozen=True)
class ReversalVerdict:
    """Sector classification of a background under time reversal."""

    invariant: bool
    q: float  # largest per-site overlap magnitude among non-invariant classes (1.0 if invariant)
    per_class: tuple

    @property
    def verdict(self) -> str:
        return "invariant" if self.invariant else "jumped"


def sector_of_reversal(bg: Background) -> ReversalVerdict:
    """Classify whether conjugating the background leaves its sector.

    q(I) = |<phi(I), conj phi(I)>| equals 1 exactly when the site state
    is conjugation invariant up to a phase; any rule class with q < 1
    repeats at infinitely many sites, which forces a sector jump with
    partial overlaps bounded by q^(number of such sites).  Finite
    explicit patches never affect the verdict.
    """
    qs = []
    for row in bg.pattern:
        qs.append(abs(site_inner(row, np.conj(row))))
    qs = np.array(qs)
    jumped = qs < 1.0 - INVARIANCE_TOL
    if not jumped.any():
        return ReversalVerdict(True, 1.0, tuple(float(q) for q in qs))
    return ReversalVerdict(
        False, float(qs[jumped].max()), tuple(float(q) for q in qs)
    )


def liouville_superoperator(H: np.ndarray) -> np.ndarray:
    """Matrix of A -> [H, A] on row-major vectorized window operators."""
    d = H.shape[0]
    eye = np.eye(d, dtype=complex)
    return np.kron(H, eye) - np.kron(eye, H.T)


def check_TLT_equals_L(spec: HamiltonianSpec, window: Window, cap: int = 4096) -> float:
    """HS norm of T L T - L on a dense window.

    Conjugating the generator by entrywise conjugation replaces H by its
    conjugate, so the residual is the superoperator norm of
    [conj(H) - H, .]; it vanishes exactly for real Hamiltonians and is
    of order the hopping strength once a complex hopping phase is
    switched on.
    """
    H = window_hamiltonian(spec, window, cap=cap)
    L = liouville_superoperator(H)
    TLT = liouville_superoperator(np.conj(H))
    return float(np.linalg.norm(TLT - L))
