"""Off-diagonal geometric phase factors for pure, mixed and degenerate mixed states.

All three kinds share one recipe: transport the relevant states along the
path, multiply the transported operators in cyclic order and apply
``Phi[z] = z/|z|``.  Indices are 0-based; ``rho_n = W^n rho_0 W^{-n}`` with
``W`` the cyclic shift on the state's adapted basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .evolution import (
    GaugeFamily,
    TimeGrid,
    Trajectory,
    UnitaryPath,
    compute_trajectory,
    gauge_trajectories,
    level_projectors,
    parallel_transport_unitary,
)
from .linalg import (
    NODAL_TOL,
    Level,
    OrthonormalBasis,
    PhaseResult,
    SpectralDensity,
    cyclic_shift_unitary,
    dagger,
    density_root,
    phase_functional,
)


@dataclass(frozen=True)
class IndexTuple:
    """Distinct state labels ``j_1 ... j_l`` read cyclically (``j_{l+1} = j_1``)."""

    indices: tuple

    def __post_init__(self):
        idx = tuple(int(j) for j in self.indices)
        if not idx:
            raise ValidationError("index tuple must not be empty")
        if len(set(idx)) != len(idx):
            raise ValidationError(f"indices must be pairwise distinct, got {idx}")
        if min(idx) < 0:
            raise ValidationError(f"indices must be non-negative, got {idx}")
        object.__setattr__(self, "indices", idx)

    @property
    def order(self) -> int:
        return len(self.indices)

    def check(self, dim: int) -> "IndexTuple":
        if max(self.indices) >= dim:
            raise ValidationError(f"index {max(self.indices)} out of range for dimension {dim}")
        return self

    def rotated(self, k: int = 1) -> "IndexTuple":
        k %= self.order
        return IndexTuple(self.indices[k:] + self.indices[:k])

    def links(self):
        """Consecutive pairs ``(j_a, j_{a+1})`` including the wrap-around."""
        idx = self.indices
        return [(idx[a], idx[(a + 1) % len(idx)]) for a in range(len(idx))]


def _index_tuple(idx, dim: int) -> IndexTuple:
    if not isinstance(idx, IndexTuple):
        idx = IndexTuple(tuple(idx))
    return idx.check(dim)


def _trajectory(path, grid, trajectory) -> Trajectory:
    return trajectory if trajectory is not None else compute_trajectory(path, grid)


def pure_offdiagonal_phase(path: UnitaryPath, basis, idx, grid: TimeGrid | None = None,
                           nodal_tol: float = NODAL_TOL, *, trajectory: Trajectory | None = None) -> PhaseResult:
    """``prod_a Phi[<psi_a|U(tau)|psi_{a+1}>] exp(-integral <psi_a|U^+ dU/dt|psi_a> dt)``.

    Undefined as soon as one amplitude falls below ``nodal_tol``; the
    amplitudes are returned in ``links`` either way.
    """
    if not isinstance(basis, OrthonormalBasis):
        basis = OrthonormalBasis(basis)
    if basis.dim != path.dim:
        raise ValidationError(f"basis dimension {basis.dim} does not match path dimension {path.dim}")
    idx = _index_tuple(idx, path.dim)
    traj = _trajectory(path, grid, trajectory)
    b = basis.vectors
    u_in_basis = dagger(b) @ traj.final @ b
    d = np.exp(1j * traj.connection_phases(basis))
    links = tuple(complex(u_in_basis[ja, jb]) for ja, jb in idx.links())
    raw = np.prod([z * d[ja] for z, (ja, _) in zip(links, idx.links())])
    if min(abs(z) for z in links) < nodal_tol:
        return PhaseResult(complex("nan+nanj"), complex(raw), False, float(abs(raw)), links)
    phase = np.prod([z / abs(z) * d[ja] for z, (ja, _) in zip(links, idx.links())])
    return PhaseResult(complex(phase), complex(raw), True, float(abs(raw)), links)


def _shift_powers(basis: OrthonormalBasis, indices):
    w = cyclic_shift_unitary(basis)
    return {j: np.linalg.matrix_power(w, j) for j in set(indices)}


def mixed_offdiagonal_phase_nondeg(path: UnitaryPath, rho1: SpectralDensity, idx, grid: TimeGrid | None = None,
                                   nodal_tol: float = NODAL_TOL, *,
                                   trajectory: Trajectory | None = None) -> PhaseResult:
    """``Phi[Tr prod_a U_par(tau) rho_{j_a}^{1/l}]`` with one common transporter.

    ``rho1`` must have a simple nonzero spectrum; its adapted basis is the
    transport basis.
    """
    if rho1.dim != path.dim:
        raise ValidationError(f"state dimension {rho1.dim} does not match path dimension {path.dim}")
    if not rho1.is_nondegenerate():
        raise ValidationError("state has a degenerate nonzero eigenvalue; "
                              "use mixed_offdiagonal_phase_degenerate instead")
    idx = _index_tuple(idx, path.dim)
    traj = _trajectory(path, grid, trajectory)
    u_par = parallel_transport_unitary(path, rho1.basis, trajectory=traj)
    root = density_root(rho1, idx.order)
    powers = _shift_powers(rho1.basis, idx.indices)
    prod = np.eye(path.dim, dtype=complex)
    for j in idx.indices:
        wj = powers[j]
        prod = prod @ u_par @ (wj @ root @ dagger(wj))
    return phase_functional(np.trace(prod), nodal_tol)


def mixed_offdiagonal_phase_degenerate(path: UnitaryPath, rho1: SpectralDensity, idx,
                                       grid: TimeGrid | None = None, nodal_tol: float = NODAL_TOL, *,
                                       trajectory: Trajectory | None = None) -> PhaseResult:
    """``Phi[Tr prod_a U(tau) V_{j_a}(tau) rho_{j_a}^{1/l}]`` with one block transporter per state."""
    if rho1.dim != path.dim:
        raise ValidationError(f"state dimension {rho1.dim} does not match path dimension {path.dim}")
    idx = _index_tuple(idx, path.dim)
    traj = _trajectory(path, grid, trajectory)
    projectors0 = level_projectors(rho1)
    root = density_root(rho1, idx.order)
    powers = _shift_powers(rho1.basis, idx.indices)
    u_final = traj.final
    prod = np.eye(path.dim, dtype=complex)
    for j in idx.indices:
        wj = powers[j]
        wd = dagger(wj)
        v = traj.transport([wj @ p @ wd for p in projectors0])
        prod = prod @ u_final @ v @ (wj @ root @ wd)
    return phase_functional(np.trace(prod), nodal_tol)


def noninterference_check(rho1: SpectralDensity, j1: int, j2: int) -> float:
    """``|Tr(W^{j2-j1} rho_{j1})|``: vanishes when ``rho1`` is diagonal in its W basis."""
    if j1 == j2:
        raise ValidationError("noninterference needs two different labels")
    w = cyclic_shift_unitary(rho1.basis)
    w1 = np.linalg.matrix_power(w, j1 % rho1.dim)
    rho_j1 = w1 @ rho1.matrix() @ dagger(w1)
    return float(abs(np.trace(np.linalg.matrix_power(w, (j2 - j1) % rho1.dim) @ rho_j1)))


# -- gauge invariance ------------------------------------------------------


@dataclass(frozen=True)
class GaugeReport:
    max_deviation: float
    trials: int
    excluded: int
    reference: PhaseResult


def _gauge_blocks(target, idx: IndexTuple) -> tuple[OrthonormalBasis, list[list[int]]]:
    """Basis and groups of basis vectors a gauge may mix without changing any path."""
    if isinstance(target, OrthonormalBasis):
        return target, [[k] for k in range(target.dim)]
    n = target.dim
    labels0 = target.level_labels()
    keys = [tuple(int(labels0[(i - j) % n]) for j in idx.indices) for i in range(n)]
    groups: dict[tuple, list[int]] = {}
    for i, key in enumerate(keys):
        groups.setdefault(key, []).append(i)
    return target.basis, list(groups.values())


def _random_hermitian(rng, m: int, diagonal: bool) -> np.ndarray:
    if diagonal or m == 1:
        return np.diag(rng.uniform(-1, 1, m)).astype(complex)
    a = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    return (a + dagger(a)) / (2 * np.sqrt(m))


def random_gauge(basis: OrthonormalBasis, groups, duration: float, rng, *,
                 diagonal: bool = False, amplitude: float = 1.0) -> GaugeFamily:
    """``G(t) = exp(-i f1(t) S1) exp(-i f2(t) S2)`` with ``S1, S2`` block diagonal.

    With ``diagonal=True`` the generators are diagonal and ``G`` multiplies
    each basis vector by a phase ``exp(i theta_k(t))``.  ``f1, f2`` are smooth
    and vanish at ``t = 0``.
    """
    d = basis.dim
    b = basis.vectors
    gens = []
    for _ in range(2):
        s = np.zeros((d, d), dtype=complex)
        for g in groups:
            s[np.ix_(g, g)] = _random_hermitian(rng, len(g), diagonal)
        gens.append(b @ s @ dagger(b))
    s1, s2 = gens
    (lam1, v1), (lam2, v2) = np.linalg.eigh(s1), np.linalg.eigh(s2)
    a1, a2 = amplitude * rng.uniform(-1.5, 1.5, 2)
    w1, w2 = rng.uniform(0.5, 2.5, 2) / duration

    def expo(w, v, x):
        # exp(-i x S) for every x in the array
        return (v * np.exp(-1j * np.multiply.outer(x, w))[:, None, :]) @ dagger(v)

    def value(t):
        t = np.asarray(t, dtype=float)
        return expo(lam1, v1, a1 * np.sin(w1 * t)) @ expo(lam2, v2, a2 * (1 - np.cos(w2 * t)))

    def connection(t):
        t = np.asarray(t, dtype=float)
        e2 = expo(lam2, v2, a2 * (1 - np.cos(w2 * t)))
        dx1 = (a1 * w1 * np.cos(w1 * t))[:, None, None]
        dx2 = (a2 * w2 * np.sin(w2 * t))[:, None, None]
        return dagger(e2) @ (-1j * dx1 * s1) @ e2 - 1j * dx2 * s2

    return GaugeFamily(value, connection)


_KINDS = ("pure", "mixed", "degenerate")


def compute_phase(kind: str, path: UnitaryPath, target, idx, grid=None, nodal_tol: float = NODAL_TOL, *,
                  trajectory: Trajectory | None = None) -> PhaseResult:
    if kind == "pure":
        return pure_offdiagonal_phase(path, target, idx, grid, nodal_tol, trajectory=trajectory)
    if kind == "mixed":
        return mixed_offdiagonal_phase_nondeg(path, target, idx, grid, nodal_tol, trajectory=trajectory)
    if kind == "degenerate":
        return mixed_offdiagonal_phase_degenerate(path, target, idx, grid, nodal_tol, trajectory=trajectory)
    raise ValidationError(f"unknown phase kind {kind!r}; expected one of {_KINDS}")


def gauge_invariance_report(path: UnitaryPath, target, idx, n_trials: int = 20, seed: int = 0, *,
                            kind: str | None = None, gauge: str | None = None, grid: TimeGrid | None = None,
                            nodal_tol: float = NODAL_TOL, amplitude: float = 1.0) -> GaugeReport:
    """Largest change of a phase factor over random gauge families of the path.

    ``target`` is an :class:`OrthonormalBasis` (pure phases) or a
    :class:`SpectralDensity`.  ``gauge`` is ``"diagonal"`` (basis phases) or
    ``"block"`` (unitaries inside every common eigenspace of the states
    involved); the default is diagonal for pure and nondegenerate phases and
    block for degenerate ones.  Trial ``i`` draws from
    ``default_rng([seed, i])``, so results do not depend on evaluation order.
    """
    if n_trials < 1:
        raise ValidationError("n_trials must be at least 1")
    if kind is None:
        if isinstance(target, OrthonormalBasis):
            kind = "pure"
        else:
            kind = "mixed" if target.is_nondegenerate() else "degenerate"
    if gauge is None:
        gauge = "block" if kind == "degenerate" else "diagonal"
    if gauge not in ("diagonal", "block"):
        raise ValidationError(f"unknown gauge type {gauge!r}")
    idx = _index_tuple(idx, path.dim)
    reference = compute_phase(kind, path, target, idx, grid, nodal_tol)
    if not reference.defined:
        return GaugeReport(float("nan"), 0, n_trials, reference)
    basis, groups = _gauge_blocks(target, idx)
    families = [random_gauge(basis, groups, path.duration, np.random.default_rng([seed, trial]),
                             diagonal=(gauge == "diagonal"), amplitude=amplitude) for trial in range(n_trials)]
    worst, used, excluded = 0.0, 0, 0
    for family, traj in zip(families, gauge_trajectories(path, families, grid)):
        result = compute_phase(kind, path.with_gauge(family), target, idx, grid, nodal_tol, trajectory=traj)
        if not result.defined:
            excluded += 1
            continue
        used += 1
        worst = max(worst, result.distance(reference))
    return GaugeReport(worst, used, excluded, reference)


def as_pure_density(basis: OrthonormalBasis) -> SpectralDensity:
    """Rank-one state ``|psi_0><psi_0|`` on ``basis``, kernel kept as a zero level.

    Its shifted family is ``rho_j = |psi_j><psi_j|``, so the mixed-state
    phases of this family reduce to the pure-state ones.
    """
    p = basis.projector(0)
    levels = [Level(1.0, 1, p)]
    if basis.dim > 1:
        levels.append(Level(0.0, basis.dim - 1, np.eye(basis.dim) - p))
    return SpectralDensity(levels, basis)
