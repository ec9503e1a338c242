"""Two-particle interferometry for the l = 2 off-diagonal phase.

A state ``rho_n`` is purified on system (x) ancilla.  One arm applies
``U_s (x) U_a``, the other ``V_s (x) V_a``, and the recombined intensity

    I(chi) = | U_s(chi) (x) U_a |Psi> + V_s (x) V_a |Psi> |^2
           = 2 + 2 Re(exp(-i chi) c)

is shifted by ``arg c``.  With ``U_s = exp(i chi) W^(m-n)``, ``U_a = W^(m-n)``,
``V_s = U_par`` and ``V_a = U_par^T`` the cross term ``c`` equals
``Tr(U_par sqrt(rho_n) U_par sqrt(rho_m))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .linalg import OrthonormalBasis, SpectralDensity, cyclic_shift_unitary, dagger, unitarity_residual
from .pseudopure import pseudopure_density

DEFAULT_CHI_POINTS = 64
FIT_DEGENERACY_TOL = 1e-12
_UNITARY_TOL = 1e-10

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


@dataclass(frozen=True)
class Purification:
    """Joint state ``sum_ij psi[i, j] |i>_s |j>_a`` stored as an ``N*N`` vector (system index major)."""

    N: int
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if a.size != self.N * self.N:
            raise ValidationError(f"expected {self.N * self.N} amplitudes, got {a.size}")
        if abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise ValidationError(f"purification is not normalized (norm {np.linalg.norm(a)!r})")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def matrix(self) -> np.ndarray:
        """Amplitudes as an ``N x N`` array, rows = system, columns = ancilla."""
        return self.amplitudes.reshape(self.N, self.N)

    def reduced_system(self) -> np.ndarray:
        m = self.matrix
        return m @ dagger(m)


@dataclass(frozen=True)
class InterferogramPoint:
    chi: float
    intensity: float


@dataclass(frozen=True)
class FitResult:
    shift: float
    visibility: float
    mean: float
    defined: bool

    def as_record(self) -> dict:
        return {"shift": self.shift, "visibility": self.visibility, "mean": self.mean, "defined": self.defined}


def purify_density(rho: SpectralDensity) -> Purification:
    """``sum_k sqrt(lambda_k) |psi_k> (x) |k>_a`` in the adapted basis of ``rho``."""
    lam = np.clip(rho.eigenvalues_in_basis(), 0.0, None)
    psi = rho.basis.vectors * np.sqrt(lam)[None, :]
    return Purification(rho.dim, psi.reshape(-1))


def purify_pseudopure(N: int, epsilon: float, n: int = 0) -> Purification:
    """Purification of ``(1 - eps)/N I + eps |n><n|`` with the computational ancilla basis."""
    pseudopure_density(N, epsilon, n)  # validates arguments
    coeffs = np.full(N, np.sqrt((1 - epsilon) / N))
    coeffs[n] = np.sqrt(epsilon + (1 - epsilon) / N)
    amp = np.diag(coeffs).astype(complex)
    return Purification(N, amp.reshape(-1) / np.linalg.norm(coeffs))


def _check_ops(purification: Purification, ops) -> list[np.ndarray]:
    out = []
    for name, op in zip(("U_s", "U_a", "V_s", "V_a"), ops):
        a = np.asarray(op, dtype=complex)
        if a.shape != (purification.N, purification.N):
            raise ValidationError(f"{name} has shape {a.shape}, expected {(purification.N, purification.N)}")
        if unitarity_residual(a) > _UNITARY_TOL:
            raise ValidationError(f"{name} is not unitary (residual {unitarity_residual(a):.3g})")
        out.append(a)
    return out


def _chi_grid(chis) -> np.ndarray:
    if chis is None:
        return np.linspace(0.0, 2 * np.pi, DEFAULT_CHI_POINTS, endpoint=False)
    return np.asarray(chis, dtype=float).reshape(-1)


def _apply(op_s, op_a, psi):
    # (A (x) B) vec(M) = vec(A M B^T) for row-major vec
    return op_s @ psi @ op_a.T


def interferogram(purification: Purification, u_s, u_a, v_s, v_a, chis=None) -> list[InterferogramPoint]:
    """Intensity of the two recombined arms; ``exp(i chi)`` multiplies the first arm."""
    u_s, u_a, v_s, v_a = _check_ops(purification, (u_s, u_a, v_s, v_a))
    psi = purification.matrix
    first = _apply(u_s, u_a, psi)
    second = _apply(v_s, v_a, psi)
    out = []
    for chi in _chi_grid(chis):
        amp = np.exp(1j * chi) * first + second
        out.append(InterferogramPoint(float(chi), float(np.vdot(amp, amp).real)))
    return out


def cross_term(purification: Purification, u_s, u_a, v_s, v_a) -> complex:
    """``c = <U_s U_a Psi | V_s V_a Psi>`` at ``chi = 0``."""
    u_s, u_a, v_s, v_a = _check_ops(purification, (u_s, u_a, v_s, v_a))
    psi = purification.matrix
    return complex(np.vdot(_apply(u_s, u_a, psi), _apply(v_s, v_a, psi)))


def conditional_circuit_readout(purification: Purification, u_s, u_a, v_s, v_a,
                                chis=None) -> list[InterferogramPoint]:
    """Probability of the ``00`` auxiliary outcome after H H, U_c, H H.

    ``U_c`` acts as ``U_s (x) U_a`` on ``|00>``, ``V_s (x) V_a`` on ``|11>``,
    ``+I`` on ``|01>`` and ``-I`` on ``|10>``.  The last two branches cancel
    in the ``00`` channel, whose probability is then ``I(chi) / 16``.
    """
    u_s, u_a, v_s, v_a = _check_ops(purification, (u_s, u_a, v_s, v_a))
    n = purification.N
    hh = np.kron(HADAMARD, HADAMARD)
    psi = purification.matrix
    out = []
    for chi in _chi_grid(chis):
        state = np.zeros((4, n, n), dtype=complex)
        state[0] = psi
        state = np.einsum("ab,bij->aij", hh, state)
        branches = (
            (np.exp(1j * chi) * u_s, u_a),
            (np.eye(n), np.eye(n)),
            (-np.eye(n), np.eye(n)),
            (v_s, v_a),
        )
        state = np.stack([_apply(s, a, state[k]) for k, (s, a) in enumerate(branches)])
        state = np.einsum("ab,bij->aij", hh, state)
        out.append(InterferogramPoint(float(chi), float(np.vdot(state[0], state[0]).real)))
    return out


def fit_interferogram(points) -> FitResult:
    """Least-squares fit of ``I = A + B cos(chi - phi)``, ``B >= 0``.

    Returns ``phi`` in ``(-pi, pi]`` as the shift and ``B/A`` as the
    visibility; the shift is undefined (NaN) when ``B/A < 1e-12``.
    """
    pts = list(points)
    if len(pts) < 8:
        raise ValidationError(f"need at least 8 interferogram points, got {len(pts)}")
    chi = np.array([p.chi for p in pts], dtype=float)
    y = np.array([p.intensity for p in pts], dtype=float)
    if np.ptp(np.mod(chi, 2 * np.pi)) < np.pi:
        raise ValidationError("chi grid must span at least one period")
    design = np.column_stack([np.ones_like(chi), np.cos(chi), np.sin(chi)])
    (a, c1, c2), *_ = np.linalg.lstsq(design, y, rcond=None)
    b = float(np.hypot(c1, c2))
    if a <= 0 or b / a < FIT_DEGENERACY_TOL:
        return FitResult(float("nan"), 0.0 if a > 0 else float("nan"), float(a), False)
    return FitResult(float(np.arctan2(c2, c1)), b / float(a), float(a), True)


def l2_arm_operators(u_par: np.ndarray, basis: OrthonormalBasis, n: int, m: int):
    """``(U_s, U_a, V_s, V_a)`` for the l = 2 measurement; ``exp(i chi)`` is applied by the interferogram.

    The system operators act in the basis ``basis`` that :func:`purify_density`
    pairs with the computational ancilla basis, so the ancilla shift and the
    transpose are taken in that pairing.
    """
    b = basis.vectors
    k = (m - n) % basis.dim
    w_sys = np.linalg.matrix_power(cyclic_shift_unitary(basis), k)
    w_anc = np.linalg.matrix_power(cyclic_shift_unitary(OrthonormalBasis.computational(basis.dim)), k)
    return w_sys, w_anc, u_par, (dagger(b) @ u_par @ b).T


def interferogram_csv(points, comments=()) -> str:
    lines = [f"# {c}" for c in comments] + ["chi,intensity"]
    lines += ["%.17g,%.17g" % (p.chi, p.intensity) for p in points]
    return "\n".join(lines) + "\n"
