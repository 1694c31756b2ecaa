"""Projection of the window generator onto slow observables.

The generator A -> [H, A] on a finite window is a Hermitian matrix in
the HS-orthonormal operator basis.  Projecting onto the span of a few
observables splits it into four blocks; the Q-space feedback enters the
projected resolvent through the self-energy

    E(z) = PLQ (z - QLQ)^(-1) QLP,

and the weak-coupling pole is estimated on the upper boundary of the
analyticity domain, z0(eta) = PLP + E(i eta).  Splitting z0 = xi - i theta
gives the Hermitian dispersion part

    xi = PLP - PLQ [lam/(lam^2+eta^2)] QLP

(a Lorentzian-regularized principal value over the eigens lam of QLQ)
and the positive-semidefinite dissipation part

    theta = PLQ [eta/(lam^2+eta^2)] QLP,

a Lorentzian-broadened energy-conservation kernel normalized so that
theta = -Im z0(eta) holds identically.  exp((-i xi - theta) t) is then a
one-parameter contraction semigroup on the observable span, defined for
t >= 0 only, and is compared directly against the projected exact
evolution at fixed (coupling^2 x time).

On a finite window the continuous-spectrum limit is replaced by an eta
plateau protocol: eta must sit above the Q-space level spacing and below
the bandwidth, and the pole estimate is required to be stationary over
a stretch of the eta schedule (a missing plateau is a hard diagnostic
failure, not a silent answer).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .algebra import QuasiLocalOperator
from .dynamics import HamiltonianSpec, Window, window_hamiltonian
from .errors import CapExceeded, NearSingularResolvent, PlateauNotFound
from .reversal import liouville_superoperator

DEFAULT_SUPER_CAP = 4096
GRAM_TOL = 1e-10


@dataclass(frozen=True)
class Superoperator:
    """Dense generator matrix on vectorized window operators."""

    matrix: np.ndarray  # (D^2, D^2), Hermitian
    hamiltonian: np.ndarray  # (D, D)
    window: Window
    spec: HamiltonianSpec


def build_superoperator(
    spec: HamiltonianSpec, window: Window, cap: int = DEFAULT_SUPER_CAP
) -> Superoperator:
    """Dense matrix of A -> [H_window, A]; Hermitian in the HS inner product."""
    D = spec.trunc.dim ** len(window)
    if D * D > cap:
        raise CapExceeded(
            f"superoperator dimension {D}^2 = {D * D} exceeds cap {cap}"
        )
    H = window_hamiltonian(spec, window, cap=max(cap, D))
    return Superoperator(liouville_superoperator(H), H, window, spec)


def _orthonormalize(columns: np.ndarray) -> np.ndarray:
    """QR with a deterministic sign convention; fails on rank deficiency."""
    q, r = np.linalg.qr(columns)
    diag = np.diag(r)
    if np.any(np.abs(diag) < 1e-12 * max(1.0, float(np.abs(r).max()))):
        raise ValueError("observable set is (numerically) linearly dependent")
    phases = diag / np.abs(diag)
    return q * np.conj(phases)[None, :]


@dataclass(frozen=True)
class ObservableBasis:
    """HS-orthonormal basis of the slow-observable span on a window."""

    operators: tuple
    labels: tuple
    window: Window
    matrix: np.ndarray  # (D^2, k), orthonormal columns

    @classmethod
    def build(cls, operators, window: Window, labels=None, cap: int = DEFAULT_SUPER_CAP):
        operators = tuple(operators)
        if labels is None:
            labels = tuple(f"b{i}" for i in range(len(operators)))
        sites = window.sites
        cols = []
        for op in operators:
            dense = op.embed_dense(sites, cap=cap)
            cols.append(dense.reshape(-1))
        matrix = _orthonormalize(np.stack(cols, axis=1))
        gram = matrix.conj().T @ matrix
        defect = float(np.abs(gram - np.eye(matrix.shape[1])).max())
        if defect > GRAM_TOL:
            raise ValueError(f"orthonormalization failed, Gram defect {defect:.2e}")
        return cls(operators, tuple(labels), window, matrix)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, window: Window, labels=None):
        gram = matrix.conj().T @ matrix
        if float(np.abs(gram - np.eye(matrix.shape[1])).max()) > GRAM_TOL:
            raise ValueError("columns are not HS-orthonormal")
        if labels is None:
            labels = tuple(f"b{i}" for i in range(matrix.shape[1]))
        return cls((), tuple(labels), window, np.asarray(matrix, dtype=complex))

    @property
    def size(self) -> int:
        return self.matrix.shape[1]


def density_basis(spec: HamiltonianSpec, window: Window) -> ObservableBasis:
    """Site occupation observables over the window."""
    from .dynamics import number_density

    ops = [number_density(spec, s) for s in window.sites]
    labels = [f"n{s}" for s in window.sites]
    return ObservableBasis.build(ops, window, labels)


def identity_density_basis(spec: HamiltonianSpec, window: Window) -> ObservableBasis:
    from .dynamics import number_density

    ops = [QuasiLocalOperator.identity(spec.trunc)]
    ops += [number_density(spec, s) for s in window.sites]
    labels = ["id"] + [f"n{s}" for s in window.sites]
    return ObservableBasis.build(ops, window, labels)


def current_basis(spec: HamiltonianSpec, window: Window) -> ObservableBasis:
    """Bond-current observables i (psi*_I psi_J - psi*_J psi_I) on window bonds."""
    from .lattice import field_ops, shift

    psi, psid = field_ops(spec.trunc)
    o = spec.hopping_offset
    ops, labels = [], []
    for s in window.sites:
        for axis in range(spec.dim):
            j = shift(s, axis, o)
            if window.contains(j):
                ops.append(
                    QuasiLocalOperator.from_product(spec.trunc, {s: psid, j: psi}, 1j)
                    + QuasiLocalOperator.from_product(spec.trunc, {j: psid, s: psi}, -1j)
                )
                labels.append(f"j{s}->{j}")
    if not ops:
        raise ValueError("window has no bonds for the current basis")
    return ObservableBasis.build(ops, window, labels)


BASIS_PRESETS = {
    "density": density_basis,
    "identity_density": identity_density_basis,
    "current": current_basis,
}


class ProjectionBlocks:
    """Four-block split of the generator relative to an observable span."""

    def __init__(self, sup: Superoperator, basis: ObservableBasis):
        L = sup.matrix
        B = basis.matrix
        C = scipy.linalg.null_space(B.conj().T)
        self.superoperator = sup
        self.basis = basis
        self.complement = C
        self.plp = B.conj().T @ L @ B
        self.plq = B.conj().T @ L @ C
        self.qlp = C.conj().T @ L @ B
        self.qlq = C.conj().T @ L @ C
        self._qlq_eig = None

    @property
    def size(self) -> int:
        return self.plp.shape[0]

    def qlq_eigensystem(self):
        if self._qlq_eig is None:
            self._qlq_eig = np.linalg.eigh(0.5 * (self.qlq + self.qlq.conj().T))
        return self._qlq_eig

    def reassembled(self) -> np.ndarray:
        """Rebuild the full generator from the four blocks (identity check)."""
        B, C = self.basis.matrix, self.complement
        return (
            B @ self.plp @ B.conj().T
            + B @ self.plq @ C.conj().T
            + C @ self.qlp @ B.conj().T
            + C @ self.qlq @ C.conj().T
        )


def project_split(sup: Superoperator, basis: ObservableBasis) -> ProjectionBlocks:
    return ProjectionBlocks(sup, basis)


def self_energy(blocks: ProjectionBlocks, z: complex, min_distance: float = 1e-9) -> np.ndarray:
    """E(z) = PLQ (z - QLQ)^(-1) QLP via the Q-space eigensystem."""
    lam, V = blocks.qlq_eigensystem()
    dist = float(np.min(np.abs(z - lam))) if len(lam) else np.inf
    if dist < min_distance:
        raise NearSingularResolvent(
            f"z = {z} is within {dist:.2e} of the Q-space spectrum"
        )
    W = blocks.plq @ V
    return (W * (1.0 / (z - lam))[None, :]) @ (V.conj().T @ blocks.qlp)


@dataclass(frozen=True)
class PoleReport:
    """Pole estimates over an eta schedule and the detected plateau."""

    etas: tuple
    z0: tuple  # matrices per eta
    plateau_eta: float
    plateau_z0: np.ndarray
    spread: float
    max_spread: float
    variations: tuple

    def to_dict(self):
        return {
            "etas": list(self.etas),
            "plateau_eta": self.plateau_eta,
            "spread": self.spread,
            "max_spread": self.max_spread,
            "variations": list(self.variations),
        }


def weak_coupling_pole(
    blocks: ProjectionBlocks,
    etas,
    max_spread: float = 0.25,
    plateau_window: int = 3,
) -> PoleReport:
    """z0(eta) = PLP + E(i eta) with a stationarity (plateau) requirement.

    The pole is approached from the upper boundary of the analyticity
    domain so its imaginary part is non-positive.  The plateau is the
    stretch of the schedule with the smallest relative variation; if
    even that stretch moves more than max_spread the extraction fails
    loudly.
    """
    etas = tuple(float(e) for e in etas)
    if len(etas) < 2:
        raise ValueError("eta schedule needs at least two values")
    if any(e <= 0 for e in etas):
        raise ValueError("eta values must be positive")
    z0s = [blocks.plp + self_energy(blocks, 1j * e) for e in etas]
    variations = []
    for i in range(len(etas) - 1):
        denom = max(float(np.linalg.norm(z0s[i])), 1e-30)
        variations.append(float(np.linalg.norm(z0s[i + 1] - z0s[i])) / denom)
    win = min(plateau_window, len(variations))
    best_i, best_v = 0, np.inf
    for i in range(len(variations) - win + 1):
        v = max(variations[i : i + win])
        if v < best_v:
            best_i, best_v = i, v
    if best_v > max_spread:
        raise PlateauNotFound(
            f"pole estimate never settled: best spread {best_v:.3g} > {max_spread:.3g} "
            f"over eta = {etas}"
        )
    pick = best_i + win // 2
    return PoleReport(
        etas=etas,
        z0=tuple(z0s),
        plateau_eta=etas[pick],
        plateau_z0=z0s[pick],
        spread=float(best_v),
        max_spread=float(max_spread),
        variations=tuple(variations),
    )


@dataclass(frozen=True)
class ProjectedGenerator:
    """Dispersion / dissipation pair on the observable span."""

    plp: np.ndarray
    xi: np.ndarray
    theta: np.ndarray
    eta: float
    labels: tuple
    diagnostics: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.plp.shape[0]

    def z0(self) -> np.ndarray:
        return self.xi - 1j * self.theta

    def to_dict(self):
        def cpairs(m):
            return [
                [[float(x.real), float(x.imag)] for x in row] for row in np.asarray(m)
            ]

        return {
            "labels": list(self.labels),
            "eta": self.eta,
            "plp": cpairs(self.plp),
            "xi": cpairs(self.xi),
            "theta": cpairs(self.theta),
            "xi_spectrum": [float(x) for x in np.linalg.eigvalsh(self.xi)],
            "theta_spectrum": [float(x) for x in np.linalg.eigvalsh(self.theta)],
            "diagnostics": {k: float(v) for k, v in self.diagnostics.items()},
        }


def dispersion_dissipation(blocks: ProjectionBlocks, eta: float) -> ProjectedGenerator:
    """Split z0(eta) into the Hermitian xi and PSD theta parts."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    lam, V = blocks.qlq_eigensystem()
    W = blocks.plq @ V
    Wd = V.conj().T @ blocks.qlp
    pv = lam / (lam * lam + eta * eta)
    lor = eta / (lam * lam + eta * eta)
    xi = blocks.plp - (W * pv[None, :]) @ Wd
    theta = (W * lor[None, :]) @ Wd
    herm_xi = float(np.abs(xi - xi.conj().T).max())
    herm_theta = float(np.abs(theta - theta.conj().T).max())
    xi = 0.5 * (xi + xi.conj().T)
    theta = 0.5 * (theta + theta.conj().T)
    theta_min = float(np.linalg.eigvalsh(theta).min()) if theta.size else 0.0
    return ProjectedGenerator(
        plp=blocks.plp,
        xi=xi,
        theta=theta,
        eta=float(eta),
        labels=blocks.basis.labels,
        diagnostics={
            "xi_hermiticity_defect": herm_xi,
            "theta_hermiticity_defect": herm_theta,
            "theta_min_eigenvalue": theta_min,
        },
    )


def semigroup_evolve(gen: ProjectedGenerator, t: float) -> np.ndarray:
    """T_p(t) = exp((-i xi - theta) t); defined for t >= 0 only."""
    if t < 0:
        raise ValueError("the dissipative semigroup is defined for t >= 0 only")
    return scipy.linalg.expm((-1j * gen.xi - gen.theta) * t)


def exact_projected_evolution(sup: Superoperator, basis: ObservableBasis, t: float) -> np.ndarray:
    """P exp(-iLt) P restricted to the observable span (k x k matrix)."""
    lam, V = np.linalg.eigh(sup.matrix)
    B = basis.matrix
    VB = V.conj().T @ B
    return VB.conj().T @ (np.exp(-1j * lam * t)[:, None] * VB)


@dataclass(frozen=True)
class ComparisonRow:
    coupling: float
    t: float
    gsq_t: float
    error: float


@dataclass(frozen=True)
class ComparisonTable:
    """Exact-vs-semigroup errors across couplings at matched coupling^2 x t."""

    rows: tuple
    base_times: tuple  # time grid attached to the first (largest) coupling
    ratios: dict  # base time -> successive error ratios across the coupling list
    eta: float
    plateau: dict  # coupling -> PoleReport dict


def compare_exact_vs_master(
    spec: HamiltonianSpec,
    window: Window,
    couplings,
    t_grid,
    eta: float | None = None,
    etas=None,
    basis_preset: str = "density",
    max_spread: float = 0.25,
    cap: int = DEFAULT_SUPER_CAP,
) -> ComparisonTable:
    """Sweep the hopping coupling and compare projected exact vs semigroup.

    The swept coupling scales the off-diagonal (hopping) sector of the
    window Hamiltonian while the density-density interaction stays
    fixed, so at zero coupling the density span is exactly invariant and
    the comparison error vanishes identically.  t_grid holds times for
    couplings[0]; other couplings are evaluated at rescaled times
    t * (couplings[0]/g)^2 so every column sits at the same value of
    coupling^2 x time, where the error is expected to shrink as the
    coupling is lowered.
    """
    couplings = [float(g) for g in couplings]
    t_grid = [float(x) for x in t_grid]
    if not couplings:
        raise ValueError("need at least one coupling")
    g0 = couplings[0]
    build_basis = BASIS_PRESETS[basis_preset]
    rows = []
    plateaus = {}
    eta_used = eta
    for g in couplings:
        spec_g = spec.with_coupling(g)
        sup = build_superoperator(spec_g, window, cap=cap)
        basis = build_basis(spec_g, window)
        blocks = project_split(sup, basis)
        if eta is None:
            if etas is None:
                raise ValueError("either eta or an eta schedule is required")
            report = weak_coupling_pole(blocks, etas, max_spread=max_spread)
            plateaus[g] = report.to_dict()
            eta_used = report.plateau_eta
        gen = dispersion_dissipation(blocks, eta_used)
        lam, V = np.linalg.eigh(sup.matrix)
        VB = V.conj().T @ basis.matrix
        for t0 in t_grid:
            t = t0 if g == 0.0 else t0 * (g0 / g) ** 2
            exact = VB.conj().T @ (np.exp(-1j * lam * t)[:, None] * VB)
            approx = semigroup_evolve(gen, t)
            rows.append(
                ComparisonRow(
                    coupling=g,
                    t=float(t),
                    gsq_t=float(g * g * t),
                    error=float(np.linalg.norm(exact - approx)),
                )
            )
    ratios = {}
    n_t = len(t_grid)
    for j, t0 in enumerate(t_grid):
        errs = [rows[i * n_t + j].error for i in range(len(couplings))]
        ratios[t0] = [
            errs[i + 1] / errs[i] if errs[i] > 0 else float("nan")
            for i in range(len(errs) - 1)
        ]
    return ComparisonTable(
        rows=tuple(rows),
        base_times=tuple(t_grid),
        ratios=ratios,
        eta=float(eta_used) if eta_used is not None else float("nan"),
        plateau=plateaus,
    )
