"""Local energy densities, the commutator generator, and windowed evolution.

The Hamiltonian is a formal infinite sum of local densities and is never
materialized; what the package uses is (a) the generator
``A -> [H, A]``, which is finite because only densities touching the
operator support contribute, and (b) dense window restrictions built
from the same density enumeration.

Sign conventions, fixed once for the whole package: the generator is
L A = [H, A] and the operator propagator is A(t) = exp(-iHt) A exp(+iHt)
(the solution of dA/dt = -i L A).  States then move with
v(t) = exp(+iHt) v so that both pictures report identical expectation
trajectories.  The textbook convention is recovered by t -> -t; none of
the conservation or confinement statements depend on the choice.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.linalg

from .algebra import DEFAULT_EMBED_CAP, QuasiLocalOperator
from .errors import CapExceeded, LeakageError, TruncationMismatch
from .lattice import (
    FockTruncation,
    GridIndex,
    as_site,
    field_ops,
    pack_site,
    shift,
    unpack_site,
)
from .states import Background, LocalVector, PureStateVector

PREFACTOR_STANDARD = "standard"
PREFACTOR_PAPER = "paper"


@dataclass(frozen=True)
class HamiltonianSpec:
    """Parameters of the local density builders.

    hopping_offset selects the +-1 or +-2 stencil; prefactor picks the
    effective Laplacian coefficient (-1/(4 m dx^2) per symmetrized term
    for 'standard', +1/(8 m dx^2) for 'paper').  g scales the
    density-density pair coupling within interaction_range.
    hopping_phase multiplies hopping by exp(+-i phi) (a time-reversal
    breaking knob used by negative controls); hopping_scale rescales the
    whole kinetic sector and is the swept coupling of the weak-coupling
    comparison.  tilt adds a linear one-body potential tilt * i1 * N(I)
    along the first axis; it commutes with all densities and is used to
    lift shell degeneracies so hopping transitions are off-resonant at
    desk scale.
    """

    trunc: FockTruncation
    dim: int = 1
    hopping_offset: int = 1
    prefactor: str = PREFACTOR_STANDARD
    g: float = 0.0
    interaction_range: int = 1
    hopping_phase: float = 0.0
    hopping_scale: float = 1.0
    tilt: float = 0.0

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3")
        if self.hopping_offset not in (1, 2):
            raise ValueError("hopping_offset must be 1 or 2")
        if self.prefactor not in (PREFACTOR_STANDARD, PREFACTOR_PAPER):
            raise ValueError(f"unknown prefactor convention {self.prefactor!r}")
        if self.interaction_range < 0:
            raise ValueError("interaction_range must be >= 0")

    @property
    def kinetic_prefactor(self) -> float:
        dx, m = self.trunc.dx, self.trunc.mass
        if self.prefactor == PREFACTOR_PAPER:
            return self.hopping_scale / (8.0 * m * dx * dx)
        return -self.hopping_scale / (4.0 * m * dx * dx)

    def with_coupling(self, hopping_scale: float) -> "HamiltonianSpec":
        return replace(self, hopping_scale=hopping_scale)


# -- density builders --------------------------------------------------


def number_density(spec: HamiltonianSpec, index) -> QuasiLocalOperator:
    """psi* psi at a site: dx^3 times the occupation operator."""
    psi, psid = field_ops(spec.trunc)
    return QuasiLocalOperator.from_site(spec.trunc, as_site(index), psid @ psi)


def momentum_density(spec: HamiltonianSpec, index, axis: int = 0) -> QuasiLocalOperator:
    """Hermitian symmetrized central-difference momentum density.

    (psi*_I (psi_{I+e} - psi_{I-e}) - (psi*_{I+e} - psi*_{I-e}) psi_I) / (4 i dx);
    self-adjoint by construction and odd under entrywise conjugation.
    """
    index = as_site(index)
    if not 0 <= axis < spec.dim:
        raise ValueError(f"axis {axis} outside lattice dimension {spec.dim}")
    trunc = spec.trunc
    psi, psid = field_ops(trunc)
    c = 1.0 / (4j * trunc.dx)
    plus, minus = shift(index, axis, 1), shift(index, axis, -1)
    terms = [
        QuasiLocalOperator.from_product(trunc, {index: psid, plus: psi}, c),
        QuasiLocalOperator.from_product(trunc, {index: psid, minus: psi}, -c),
        QuasiLocalOperator.from_product(trunc, {plus: psid, index: psi}, -c),
        QuasiLocalOperator.from_product(trunc, {minus: psid, index: psi}, c),
    ]
    return sum(terms[1:], terms[0])


def momentum_density_literal(spec: HamiltonianSpec, index, axis: int = 0) -> QuasiLocalOperator:
    """One-sided variant psi*_I (psi_{I+e} - psi_{I-e}) / (4 dx), kept for comparison.

    Not self-adjoint and not conjugation-odd; the symmetrized builder is
    the one used everywhere else.
    """
    index = as_site(index)
    trunc = spec.trunc
    psi, psid = field_ops(trunc)
    c = 1.0 / (4.0 * trunc.dx)
    plus, minus = shift(index, axis, 1), shift(index, axis, -1)
    return QuasiLocalOperator.from_product(
        trunc, {index: psid, plus: psi}, c
    ) + QuasiLocalOperator.from_product(trunc, {index: psid, minus: psi}, -c)


def kinetic_density(spec: HamiltonianSpec, index) -> QuasiLocalOperator:
    """Symmetrized discrete-Laplacian hopping density at a site.

    Two-term structure pref * [psi*_I (e^{i phi} psi_{I+o e_j} +
    e^{-i phi} psi_{I-o e_j} - 2 psi_I) + h.c.] summed over active axes.
    """
    index = as_site(index)
    trunc = spec.trunc
    psi, psid = field_ops(trunc)
    pref = spec.kinetic_prefactor
    o = spec.hopping_offset
    ph = np.exp(1j * spec.hopping_phase)
    terms = []
    for axis in range(spec.dim):
        plus, minus = shift(index, axis, o), shift(index, axis, -o)
        terms += [
            QuasiLocalOperator.from_product(trunc, {index: psid, plus: psi}, pref * ph),
            QuasiLocalOperator.from_product(trunc, {index: psid, minus: psi}, pref * np.conj(ph)),
            QuasiLocalOperator.from_product(trunc, {index: psid @ psi}, -2.0 * pref),
            QuasiLocalOperator.from_product(trunc, {plus: psid, index: psi}, pref * np.conj(ph)),
            QuasiLocalOperator.from_product(trunc, {minus: psid, index: psi}, pref * ph),
            QuasiLocalOperator.from_product(trunc, {index: psid @ psi}, -2.0 * pref),
        ]
    out = terms[0]
    for t in terms[1:]:
        out = out + t
    return out


def interaction_density(spec: HamiltonianSpec, index, other) -> QuasiLocalOperator:
    """Density-density pair coupling g N(I) N(J) for 0 < |I-J| <= range."""
    index, other = as_site(index), as_site(other)
    dist = np.linalg.norm(np.subtract(index, other))
    if not 0 < dist <= spec.interaction_range:
        raise ValueError(
            f"sites {index}, {other} not within interaction range {spec.interaction_range}"
        )
    psi, psid = field_ops(spec.trunc)
    n = psid @ psi
    return QuasiLocalOperator.from_product(spec.trunc, {index: n, other: n}, spec.g)


def _interaction_partners(spec: HamiltonianSpec, index: GridIndex):
    """Sites J != I with 0 < |I - J| <= range (Euclidean, active axes)."""
    S = spec.interaction_range
    if S == 0 or spec.g == 0.0:
        return
    span = range(-S, S + 1)
    for d1 in span:
        for d2 in span if spec.dim >= 2 else (0,):
            for d3 in span if spec.dim >= 3 else (0,):
                if d1 == d2 == d3 == 0:
                    continue
                if d1 * d1 + d2 * d2 + d3 * d3 <= S * S:
                    yield (index[0] + d1, index[1] + d2, index[2] + d3)


def hamiltonian_pieces(spec: HamiltonianSpec, near: Sequence, *, within=None):
    """Local pieces of H touching the given sites: density * cell volume.

    Kinetic densities are enumerated per site, pair interactions once
    per unordered pair.  With ``within`` set to a site collection, only
    pieces fully supported inside it are yielded (window restriction);
    otherwise every piece whose support intersects ``near`` is yielded
    (the generator path).
    """
    vol = spec.trunc.cell_volume
    sites = [as_site(s) for s in near]
    inside = None if within is None else {pack_site(as_site(s)) for s in within}
    o = spec.hopping_offset

    kin_centers = set()
    for s in sites:
        kin_centers.add(s)
        for axis in range(spec.dim):
            kin_centers.add(shift(s, axis, o))
            kin_centers.add(shift(s, axis, -o))
    for c in sorted(kin_centers):
        if inside is not None:
            stencil = [c] + [
                shift(c, axis, sgn * o) for axis in range(spec.dim) for sgn in (1, -1)
            ]
            if not all(pack_site(s) in inside for s in stencil):
                continue
        yield kinetic_density(spec, c).scale(vol)

    if spec.tilt != 0.0:
        for s in sorted(sites):
            if inside is not None and pack_site(s) not in inside:
                continue
            yield number_density(spec, s).scale(vol * spec.tilt * s[0])

    pairs = set()
    for s in sites:
        for j in _interaction_partners(spec, s):
            pairs.add((min(s, j), max(s, j)))
    for i, j in sorted(pairs):
        if inside is not None and not (
            pack_site(i) in inside and pack_site(j) in inside
        ):
            continue
        yield interaction_density(spec, i, j).scale(vol)


def liouville_apply(spec: HamiltonianSpec, A: QuasiLocalOperator) -> QuasiLocalOperator:
    """L A = [H, A]: finite sum of commutators with the densities near supp(A).

    Pieces whose support misses supp(A) commute with A and cancel
    exactly in canonical form, so the result support stays inside the
    support of A dilated by max(hopping offset, interaction range).
    """
    if A.trunc != spec.trunc:
        raise TruncationMismatch("operator truncation does not match spec")
    out = QuasiLocalOperator.zero(spec.trunc)
    for piece in hamiltonian_pieces(spec, A.support):
        out = out + (piece * A - A * piece)
    return out


def estimated_velocity(spec: HamiltonianSpec) -> float:
    """Crude operator-spreading speed bound used for buffer suggestions.

    Proportional to the strongest bond coefficient times the stencil
    offset; calibrated generously against buffer-growth measurements.
    """
    dx = spec.trunc.dx
    bond = abs(spec.kinetic_prefactor) * 2.0 * dx**6
    return 3.0 * bond * spec.hopping_offset * max(1, spec.trunc.n_max)


def suggested_buffer(spec: HamiltonianSpec, t: float) -> int:
    return int(np.ceil(estimated_velocity(spec) * abs(t))) + 1


# -- windows -----------------------------------------------------------


@dataclass(frozen=True)
class Window:
    """Contiguous box of sites; the arena for dense computations."""

    lo: GridIndex
    hi: GridIndex

    def __post_init__(self):
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"empty window box {self.lo}..{self.hi}")

    @classmethod
    def box(cls, lo, hi) -> "Window":
        return cls(as_site(lo), as_site(hi))

    @classmethod
    def chain(cls, n_sites: int, start: int = 0) -> "Window":
        return cls.box((start, 0, 0), (start + n_sites - 1, 0, 0))

    @classmethod
    def covering(cls, sites, buffer: int = 0, dim: int = 1) -> "Window":
        pts = np.array([as_site(s) for s in sites], dtype=int)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        for axis in range(dim):
            lo[axis] -= buffer
            hi[axis] += buffer
        return cls(tuple(int(x) for x in lo), tuple(int(x) for x in hi))

    @property
    def sites(self) -> tuple[GridIndex, ...]:
        out = []
        for i1 in range(self.lo[0], self.hi[0] + 1):
            for i2 in range(self.lo[1], self.hi[1] + 1):
                for i3 in range(self.lo[2], self.hi[2] + 1):
                    out.append((i1, i2, i3))
        return tuple(out)

    def __len__(self):
        return int(np.prod([h - l + 1 for l, h in zip(self.lo, self.hi)]))

    def interior(self, buffer: int) -> "Window":
        lo = tuple(
            l + buffer if h > l else l for l, h in zip(self.lo, self.hi)
        )
        hi = tuple(
            h - buffer if h > l else h for l, h in zip(self.lo, self.hi)
        )
        return Window(lo, hi)

    def boundary_positions(self, buffer: int) -> list[int]:
        """Positions (in self.sites order) of sites outside the interior box."""
        inner = self.interior(buffer)
        keep = []
        for pos, s in enumerate(self.sites):
            if not all(l <= c <= h for c, l, h in zip(s, inner.lo, inner.hi)):
                keep.append(pos)
        return keep

    def contains(self, index) -> bool:
        s = as_site(index)
        return all(l <= c <= h for c, l, h in zip(s, self.lo, self.hi))


def window_hamiltonian(
    spec: HamiltonianSpec, window: Window, cap: int = DEFAULT_EMBED_CAP
) -> np.ndarray:
    """Dense Hermitian restriction of H to the window (open boundaries).

    Sums the densities whose support lies fully inside the window; the
    background outside is frozen, so the restriction is exact for
    observables that stay clear of the boundary.
    """
    sites = window.sites
    dim = spec.trunc.dim ** len(sites)
    if dim > cap:
        raise CapExceeded(f"window Hilbert dimension {dim} exceeds cap {cap}")
    H = np.zeros((dim, dim), dtype=complex)
    for piece in hamiltonian_pieces(spec, sites, within=sites):
        H += piece.embed_dense(sites, cap=cap)
    return 0.5 * (H + H.conj().T)


# -- dense window evolution --------------------------------------------


class WindowEvolution:
    """Eigendecomposition-backed propagator on a fixed window."""

    def __init__(self, spec: HamiltonianSpec, window: Window, cap: int = DEFAULT_EMBED_CAP):
        self.spec = spec
        self.window = window
        self.cap = cap
        self.hamiltonian = window_hamiltonian(spec, window, cap=cap)
        self.energies, self.modes = np.linalg.eigh(self.hamiltonian)

    @property
    def sites(self):
        return self.window.sites

    def state_vector(self, v: LocalVector) -> np.ndarray:
        """Window factor of a local vector (background frozen outside)."""
        if v.trunc != self.spec.trunc:
            raise TruncationMismatch("state truncation does not match spec")
        for s in v.override_sites:
            if not self.window.contains(s):
                raise ValueError(f"override site {s} outside the window")
        d = self.spec.trunc.dim
        sites = self.sites
        psi = np.zeros(d ** len(sites), dtype=complex)
        for c, pv in v.terms:
            acc = pv.site_state(sites[0])
            for s in sites[1:]:
                acc = np.kron(acc, pv.site_state(s))
            psi += c * acc
        return psi

    def evolve_vec(self, psi: np.ndarray, t: float) -> np.ndarray:
        # states move with exp(+iHt); see the module docstring
        phases = np.exp(1j * self.energies * t)
        return self.modes @ (phases * (self.modes.conj().T @ psi))

    def heisenberg_dense(self, op: np.ndarray, t: float) -> np.ndarray:
        # operators move with exp(-iHt) . exp(+iHt)
        phases = np.exp(-1j * self.energies * t)
        U = self.modes @ (phases[:, None] * self.modes.conj().T)
        return U @ op @ U.conj().T

    def state_to_local_vector(self, psi: np.ndarray, background: Background) -> LocalVector:
        """Expand a window vector back into override form (pruning tiny terms)."""
        d = self.spec.trunc.dim
        sites = self.sites
        keys = np.array([pack_site(s) for s in sites], dtype=np.int64)
        order = np.argsort(keys)
        terms = []
        cutoff = 1e-14 * max(1.0, float(np.linalg.norm(psi)))
        eye = np.eye(d, dtype=complex)
        for flat in np.flatnonzero(np.abs(psi) > cutoff):
            digits = np.unravel_index(flat, (d,) * len(sites))
            vecs = np.array([eye[dig] for dig in digits], dtype=complex)
            terms.append(
                (
                    complex(psi[flat]),
                    PureStateVector(background, (), _packed=(keys[order], vecs[order])),
                )
            )
        return LocalVector(background, terms)

    def boundary_state_leakage(self, psi: np.ndarray, background: Background, buffer: int) -> float:
        """Probability weight off the frozen background on the boundary shell."""
        positions = self.window.boundary_positions(buffer)
        if not positions:
            return 0.0
        d = self.spec.trunc.dim
        w = len(self.sites)
        tens = psi.reshape((d,) * w)
        for pos in positions:
            bstate = background.site_state(self.sites[pos])
            inner = np.tensordot(np.conj(bstate), tens, axes=(0, pos))
            tens = np.moveaxis(np.multiply.outer(bstate, inner), 0, pos)
        nrm2 = float(np.vdot(psi, psi).real)
        kept = float(np.vdot(tens, tens).real)
        return max(0.0, 1.0 - kept / nrm2) if nrm2 > 0 else 0.0


def evolve_schrodinger(
    spec: HamiltonianSpec,
    v: LocalVector,
    t: float,
    window: Window | None = None,
    tol: float = 1e-9,
    buffer: int | None = None,
    cap: int = DEFAULT_EMBED_CAP,
) -> LocalVector:
    """Windowed state evolution; sector and norm preserving.

    The window factor is evolved unitarily with the background frozen
    outside; leakage of probability onto the boundary shell above tol is
    an error (enlarge the window or the buffer).
    """
    if buffer is None:
        buffer = suggested_buffer(spec, t)
    if window is None:
        anchors = v.override_sites or ((0, 0, 0),)
        window = Window.covering(anchors, buffer=buffer, dim=spec.dim)
    ev = WindowEvolution(spec, window, cap=cap)
    psi0 = ev.state_vector(v)
    psi_t = ev.evolve_vec(psi0, t)
    leak = ev.boundary_state_leakage(psi_t, v.background, buffer)
    if leak > tol:
        raise LeakageError(
            f"evolution leaked weight {leak:.3e} onto the window boundary (tol {tol:.1e})"
        )
    return ev.state_to_local_vector(psi_t, v.background)


def _identity_on_positions(mat: np.ndarray, positions, w: int, d: int) -> np.ndarray:
    """HS-orthogonal projection onto operators acting as identity at positions."""
    tens = mat.reshape((d,) * (2 * w))
    eye_over_d = np.eye(d) / d
    for pos in positions:
        tr = np.trace(tens, axis1=pos, axis2=w + pos)
        out = np.multiply.outer(tr, eye_over_d)
        tens = np.moveaxis(out, (2 * w - 2, 2 * w - 1), (pos, w + pos))
    return tens.reshape(mat.shape)


def dense_to_quasilocal(
    mat: np.ndarray, sites: Sequence, trunc: FockTruncation, tol: float = 1e-14
) -> QuasiLocalOperator:
    """Expand a dense window matrix into matrix-unit product terms."""
    sites = [as_site(s) for s in sites]
    d = trunc.dim
    w = len(sites)
    keys = np.array([pack_site(s) for s in sites], dtype=np.int64)
    order = np.argsort(keys)
    scale = max(1.0, float(np.abs(mat).max())) if mat.size else 1.0
    terms = []
    from .algebra import ProductOperator

    flat = mat.reshape(-1)
    for idx in np.flatnonzero(np.abs(flat) > tol * scale):
        row, col = divmod(int(idx), d**w)
        rdig = np.unravel_index(row, (d,) * w)
        cdig = np.unravel_index(col, (d,) * w)
        mats = np.zeros((w, d, d), dtype=complex)
        for i in range(w):
            mats[i, rdig[i], cdig[i]] = 1.0
        terms.append(
            (
                complex(flat[idx]),
                ProductOperator(trunc, keys[order], mats[order], _canonical=False),
            )
        )
    return QuasiLocalOperator(trunc, terms)


def evolve_heisenberg(
    spec: HamiltonianSpec,
    A: QuasiLocalOperator,
    t: float,
    window: Window | None = None,
    tol: float = 1e-9,
    buffer: int | None = None,
    cap: int = DEFAULT_EMBED_CAP,
) -> QuasiLocalOperator:
    """Windowed operator evolution A(t) = exp(-iHt) A exp(+iHt).

    The leakage diagnostic is the HS weight that moved onto the boundary
    shell (operators no longer acting as the identity there), relative
    to the HS norm of A; above tol it is an error.
    """
    if A.trunc != spec.trunc:
        raise TruncationMismatch("operator truncation does not match spec")
    if buffer is None:
        buffer = suggested_buffer(spec, t)
    if window is None:
        anchors = A.support or ((0, 0, 0),)
        window = Window.covering(anchors, buffer=buffer, dim=spec.dim)
    ev = WindowEvolution(spec, window, cap=cap)
    sites = ev.sites
    op0 = A.embed_dense(sites, cap=cap)
    op_t = ev.heisenberg_dense(op0, t)
    positions = ev.window.boundary_positions(buffer)
    d = spec.trunc.dim
    w = len(sites)
    base = float(np.linalg.norm(op0)) or 1.0
    if positions:
        proj_t = _identity_on_positions(op_t, positions, w, d)
        proj_0 = _identity_on_positions(op0, positions, w, d)
        leak = float(np.linalg.norm((op_t - proj_t) - (op0 - proj_0))) / base
        if leak > tol:
            raise LeakageError(
                f"operator weight {leak:.3e} moved onto the window boundary (tol {tol:.1e})"
            )
    return dense_to_quasilocal(op_t, sites, spec.trunc)
