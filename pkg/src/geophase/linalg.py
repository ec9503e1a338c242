"""Dense complex linear algebra and the density-operator data model.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``; the
helpers here validate them and provide the few decompositions every other
module relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PhysicsError, ValidationError

MAX_DIM = 64
HERMITIAN_TOL = 1e-10
DEGENERACY_TOL = 1e-9
NODAL_TOL = 1e-10
ORTHONORMAL_TOL = 1e-12
DENSITY_TOL = 1e-12


def dagger(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose over the last two axes (works on stacks)."""
    return np.conj(np.swapaxes(a, -1, -2))


def max_norm(a) -> float:
    return float(np.max(np.abs(a))) if np.size(a) else 0.0


def as_matrix(a, name: str = "matrix", max_dim: int = MAX_DIM) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValidationError(f"{name} must be a non-empty square matrix, got shape {m.shape}")
    if m.shape[0] > max_dim:
        raise ValidationError(f"{name} has dimension {m.shape[0]} > configured maximum {max_dim}")
    return m


def check_hermitian(h: np.ndarray, name: str = "matrix", tol: float = HERMITIAN_TOL) -> np.ndarray:
    h = as_matrix(h, name)
    err = max_norm(h - dagger(h))
    if err > tol:
        raise PhysicsError(f"{name} is not Hermitian (max |H - H^+| = {err:.3e})")
    return h


def unitarity_residual(u: np.ndarray) -> float:
    """``max |U^+ U - I|`` over all entries (and over the stack, if any)."""
    u = np.asarray(u)
    eye = np.eye(u.shape[-1])
    return max_norm(dagger(u) @ u - eye)


@dataclass(frozen=True)
class PhaseResult:
    """Outcome of applying ``Phi[z] = z/|z|``.

    ``phase`` is NaN when ``defined`` is false; ``raw_trace`` always carries the
    pre-normalization value.  ``links`` holds per-link amplitudes for results
    built from a product of several ``Phi`` factors.
    """

    phase: complex
    raw_trace: complex
    defined: bool
    magnitude: float
    links: tuple = field(default=(), compare=False)

    def distance(self, other: "PhaseResult | complex") -> float:
        """Chordal distance ``|a - b|`` between two phase factors (at most 2)."""
        b = other.phase if isinstance(other, PhaseResult) else complex(other)
        return abs(self.phase - b)

    @property
    def angle(self) -> float:
        return float(np.angle(self.phase)) if self.defined else float("nan")


def phase_functional(z: complex, nodal_tol: float = NODAL_TOL) -> PhaseResult:
    if not nodal_tol > 0:
        raise ValidationError("nodal_tol must be positive")
    z = complex(z)
    mag = abs(z)
    if mag < nodal_tol:
        return PhaseResult(complex("nan+nanj"), z, False, mag)
    return PhaseResult(z / mag, z, True, mag)


@dataclass(frozen=True)
class OrthonormalBasis:
    """Basis vectors stored as the columns of ``vectors``."""

    vectors: np.ndarray

    def __post_init__(self):
        v = as_matrix(self.vectors, "basis")
        err = max_norm(dagger(v) @ v - np.eye(v.shape[0]))
        if err > ORTHONORMAL_TOL:
            raise ValidationError(f"basis is not orthonormal (residual {err:.3e})")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @classmethod
    def computational(cls, dim: int) -> "OrthonormalBasis":
        return cls(np.eye(dim, dtype=complex))

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    def ket(self, k: int) -> np.ndarray:
        return self.vectors[:, k]

    def projector(self, k: int) -> np.ndarray:
        v = self.vectors[:, k]
        return np.outer(v, v.conj())

    def diagonal_operator(self, values) -> np.ndarray:
        """``sum_k values[k] |psi_k><psi_k|``."""
        v = self.vectors
        return (v * np.asarray(values)) @ dagger(v)


@dataclass(frozen=True)
class Level:
    """One eigenvalue with its multiplicity and orthogonal projector."""

    value: float
    multiplicity: int
    projector: np.ndarray


def _cluster_eigenvalues(w: np.ndarray, degeneracy_tol: float) -> list[list[int]]:
    # w sorted descending; merge neighbours closer than tol * largest |w|
    scale = max(float(np.max(np.abs(w))), np.finfo(float).tiny) if w.size else 1.0
    groups: list[list[int]] = []
    for i, val in enumerate(w):
        if groups and abs(w[groups[-1][-1]] - val) <= degeneracy_tol * scale:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def hermitian_eig(h, degeneracy_tol: float = DEGENERACY_TOL, *, density: bool = False):
    """Decompose a Hermitian matrix into levels, largest eigenvalue first.

    Returns ``(levels, basis)`` where ``basis`` holds the eigenvectors as
    columns, grouped by level in the same order.  With ``density=True`` the
    input must also be positive semidefinite (down to -1e-10).
    """
    h = check_hermitian(h)
    w, v = np.linalg.eigh((h + dagger(h)) / 2)
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    if density and w.size and w[-1] < -HERMITIAN_TOL:
        raise PhysicsError(f"density operator has negative eigenvalue {w[-1]:.3e}")
    levels = []
    for group in _cluster_eigenvalues(w, degeneracy_tol):
        vecs = v[:, group]
        value = float(np.mean(w[group]))
        if density and value < 0:
            value = 0.0
        levels.append(Level(value, len(group), vecs @ dagger(vecs)))
    return levels, v


def reconstruct(levels) -> np.ndarray:
    return sum(lv.value * lv.projector for lv in levels)


class SpectralDensity:
    """Density operator stored as ``sum_k lambda_k P_k`` over distinct levels.

    ``basis`` is an orthonormal basis adapted to the levels (each vector lies
    in exactly one eigenspace).  Its column order defines the cyclic shift
    that generates the noninterfering family of states.
    """

    def __init__(self, levels, basis=None, *, tol: float = DENSITY_TOL):
        levels = [Level(float(lv.value), int(lv.multiplicity), as_matrix(lv.projector, "projector"))
                  for lv in levels]
        if not levels:
            raise ValidationError("a spectral density needs at least one level")
        dim = levels[0].projector.shape[0]
        for lv in levels:
            p = lv.projector
            if p.shape != (dim, dim):
                raise ValidationError("projectors have inconsistent dimensions")
            if lv.value < -tol:
                raise PhysicsError(f"negative eigenvalue {lv.value}")
            if lv.multiplicity < 1:
                raise ValidationError("multiplicity must be positive")
            if max_norm(p @ p - p) > 1e-10 or max_norm(p - dagger(p)) > 1e-10:
                raise ValidationError("level projector is not an orthogonal projector")
            if abs(np.trace(p).real - lv.multiplicity) > 1e-8:
                raise ValidationError("projector rank does not match multiplicity")
        for i in range(len(levels)):
            for j in range(i + 1, len(levels)):
                if max_norm(levels[i].projector @ levels[j].projector) > 1e-10:
                    raise ValidationError("level projectors are not mutually orthogonal")
                if levels[i].value == levels[j].value:
                    raise ValidationError("distinct levels must have distinct eigenvalues")
        total = sum(lv.value * lv.multiplicity for lv in levels)
        if abs(total - 1.0) > tol:
            raise PhysicsError(f"density operator trace is {total!r}, expected 1")
        self.dim = dim
        self.levels = tuple(sorted(levels, key=lambda lv: -lv.value))
        if basis is None:
            basis = self._adapted_basis()
        self.basis = basis if isinstance(basis, OrthonormalBasis) else OrthonormalBasis(basis)
        if self.basis.dim != dim:
            raise ValidationError("basis dimension does not match the density operator")
        for lv in self.levels:
            for k in range(dim):
                x = self.basis.ket(k)
                px = lv.projector @ x
                if max_norm(px) > 1e-8 and max_norm(px - x) > 1e-8:
                    raise ValidationError("basis is not adapted to the eigenspaces")

    @classmethod
    def from_matrix(cls, rho, basis=None, degeneracy_tol: float = DEGENERACY_TOL) -> "SpectralDensity":
        rho = as_matrix(rho, "density operator")
        levels, vecs = hermitian_eig(rho, degeneracy_tol, density=True)
        tr = np.trace(rho).real
        if abs(tr - 1) > DENSITY_TOL:
            raise PhysicsError(f"density operator trace is {tr!r}, expected 1")
        return cls(levels, vecs if basis is None else basis)

    @classmethod
    def diagonal(cls, eigenvalues, degeneracy_tol: float = DEGENERACY_TOL) -> "SpectralDensity":
        """State diagonal in the computational basis, which becomes its basis."""
        lam = np.asarray(eigenvalues, dtype=float)
        dim = lam.size
        order = np.argsort(-lam, kind="stable")
        levels = []
        for group in _cluster_eigenvalues(lam[order], degeneracy_tol):
            idx = order[group]
            p = np.zeros((dim, dim), dtype=complex)
            p[idx, idx] = 1.0
            levels.append(Level(float(np.mean(lam[idx])), len(idx), p))
        return cls(levels, np.eye(dim, dtype=complex))

    def matrix(self) -> np.ndarray:
        return reconstruct(self.levels)

    def eigenvalues_in_basis(self) -> np.ndarray:
        """Eigenvalue attached to each basis vector, in basis order."""
        out = np.empty(self.dim)
        rho = self.matrix()
        for k in range(self.dim):
            x = self.basis.ket(k)
            out[k] = np.real(np.vdot(x, rho @ x))
        return out

    def level_labels(self) -> np.ndarray:
        """Index of the level containing each basis vector."""
        labels = np.empty(self.dim, dtype=int)
        for k in range(self.dim):
            x = self.basis.ket(k)
            weights = [np.real(np.vdot(x, lv.projector @ x)) for lv in self.levels]
            labels[k] = int(np.argmax(weights))
        return labels

    def is_nondegenerate(self, zero_tol: float = DENSITY_TOL) -> bool:
        """True when every nonzero eigenvalue is simple."""
        return all(lv.multiplicity == 1 for lv in self.levels if lv.value > zero_tol)

    def conjugated(self, u: np.ndarray) -> "SpectralDensity":
        """``U rho U^+`` with projectors and basis carried along."""
        levels = [Level(lv.value, lv.multiplicity, u @ lv.projector @ dagger(u)) for lv in self.levels]
        return SpectralDensity(levels, u @ self.basis.vectors)

    def __repr__(self):
        body = ", ".join(f"({lv.value:.6g}, {lv.multiplicity})" for lv in self.levels)
        return f"SpectralDensity(dim={self.dim}, levels=[{body}])"


def cyclic_shift_unitary(basis) -> np.ndarray:
    """``W = |psi_1><psi_N| + |psi_N><psi_{N-1}| + ... + |psi_2><psi_1|``.

    In 0-based labels ``W |psi_k> = |psi_{k+1 mod N}>``.
    """
    b = basis.vectors if isinstance(basis, OrthonormalBasis) else OrthonormalBasis(basis).vectors
    n = b.shape[0]
    if n < 2:
        raise ValidationError("cyclic shift needs dimension >= 2")
    return np.roll(b, -1, axis=1) @ dagger(b)


def density_root(rho: SpectralDensity, l: int) -> np.ndarray:
    """Principal ``l``-th root, ``sum_k lambda_k**(1/l) P_k`` (0 maps to 0)."""
    if int(l) != l or l < 1:
        raise ValidationError(f"root order must be a positive integer, got {l!r}")
    return sum(max(lv.value, 0.0) ** (1.0 / l) * lv.projector for lv in rho.levels)


def expm_antihermitian(h, dt) -> np.ndarray:
    """``exp(-i H dt)`` for Hermitian ``H``.

    Accepts a single matrix or a stack ``(..., d, d)``; ``dt`` broadcasts over
    the stack.  Evaluated through the spectral decomposition of ``H`` so the
    result is unitary to machine precision.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim < 2 or h.shape[-1] != h.shape[-2]:
        raise ValidationError(f"generator must be square, got shape {h.shape}")
    err = max_norm(h - dagger(h))
    if err > HERMITIAN_TOL:
        raise PhysicsError(f"generator is not Hermitian (max |H - H^+| = {err:.3e})")
    w, v = np.linalg.eigh((h + dagger(h)) / 2)
    dt = np.asarray(dt, dtype=float)[..., None]
    return (v * np.exp(-1j * w * dt)[..., None, :]) @ dagger(v)
