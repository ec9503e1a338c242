"""Closed-form phases and nodal structure for pairs of pseudopure states.

The states are ``rho_n = (1 - eps)/N I + eps |n><n|`` evolving under a
unitary that acts only on ``span{|n>, |m>}``.  The path enters through two
numbers: the visibility ``eta = |<n|U|n>|`` and the geodesically closed solid
angle ``omega`` traced in that two-level subspace.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .errors import DomainError, SingularConfigurationError, ValidationError
from .linalg import NODAL_TOL, Level, PhaseResult, SpectralDensity, phase_functional


@dataclass(frozen=True)
class PseudopureParams:
    N: int
    epsilon: float
    eta: float
    omega: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValidationError(f"N must be an integer >= 2, got {self.N!r}")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValidationError(f"epsilon must lie in (0, 1], got {self.epsilon!r}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValidationError(f"eta must lie in [0, 1], got {self.eta!r}")
        object.__setattr__(self, "N", int(self.N))


@dataclass(frozen=True)
class NodalSolution:
    params: dict
    kind: str  # "l1" | "l2" | "common"
    residual: float


def pseudopure_density(N: int, epsilon: float, n: int = 0) -> SpectralDensity:
    """``(1 - eps)/N I + eps |n><n|`` in the computational basis.

    ``epsilon = 0`` gives the maximally mixed state as a single level.
    """
    if int(N) != N or N < 2:
        raise ValidationError(f"N must be an integer >= 2, got {N!r}")
    if not 0.0 <= epsilon <= 1.0:
        raise ValidationError(f"epsilon must lie in [0, 1], got {epsilon!r}")
    if not 0 <= n < N:
        raise ValidationError(f"pure component index {n} out of range for N={N}")
    eye = np.eye(N, dtype=complex)
    if epsilon == 0.0:
        return SpectralDensity([Level(1.0 / N, N, eye)], eye)
    p = np.zeros((N, N), dtype=complex)
    p[n, n] = 1.0
    levels = [Level((1 + (N - 1) * epsilon) / N, 1, p), Level((1 - epsilon) / N, N - 1, eye - p)]
    return SpectralDensity(levels, eye)


# -- l = 1 -----------------------------------------------------------------


def gamma1_argument(params: PseudopureParams) -> complex:
    """``(N-2)(1-eps) + eta(1+(N-1)eps) e^{-i omega/2} + eta(1-eps) e^{i omega/2}``."""
    N, eps, eta, om = params.N, params.epsilon, params.eta, params.omega
    return complex((N - 2) * (1 - eps)
                   + eta * (1 + (N - 1) * eps) * np.exp(-0.5j * om)
                   + eta * (1 - eps) * np.exp(0.5j * om))


def gamma1_closed(params: PseudopureParams, nodal_tol: float = NODAL_TOL, *, state: str = "n") -> PhaseResult:
    """l = 1 phase factor of ``rho_n`` (``state="n"``) or of ``rho_m`` (its conjugate)."""
    z = gamma1_argument(params)
    if state == "m":
        z = z.conjugate()
    elif state != "n":
        raise ValidationError(f"state must be 'n' or 'm', got {state!r}")
    return phase_functional(z, nodal_tol)


def gamma1_arctan(params: PseudopureParams) -> complex:
    """Arctangent form of the l = 1 factor; equals :func:`gamma1_closed` only
    where the denominator below is positive (principal branch)."""
    N, eps, eta, om = params.N, params.epsilon, params.eta, params.omega
    num = eta * N * eps * math.sin(om / 2)
    den = (N - 2) * (1 - eps) + eta * (2 + (N - 2) * eps) * math.cos(om / 2)
    return complex(np.exp(-1j * math.atan(num / den)))


def qubit_mixed_phase(epsilon: float, omega: float) -> complex:
    """``exp(-i arctan(eps tan(omega/2)))`` continued across ``omega = pi`` (mod 2 pi).

    Evaluated as ``Phi[cos(omega/2) - i eps sin(omega/2)]``, which agrees with
    the principal-branch arctangent whenever ``cos(omega/2) > 0``.
    """
    z = complex(math.cos(omega / 2), -epsilon * math.sin(omega / 2))
    return z / abs(z)


def l1_nodal_residual(params: PseudopureParams) -> float:
    N, eps, eta, om = params.N, params.epsilon, params.eta, params.omega
    re = (N - 2) * (1 - eps) + eta * (2 + (N - 2) * eps) * math.cos(om / 2)
    im = eta * N * eps * math.sin(om / 2)
    return re * re + im * im


def noise_lower_bound(N: int) -> float:
    """Smallest ``epsilon`` that admits an l = 1 nodal point (negative for N < 4)."""
    return (N - 4) / (2 * (N - 2))


def l1_nodal_eta(N: int, epsilon: float, *, tol: float = 1e-12) -> float | None:
    """Visibility of the l = 1 nodal point at ``omega = 2 pi`` (None if unphysical)."""
    if int(N) != N or N < 3:
        raise ValidationError("l1_nodal_eta needs N >= 3; for N = 2 the nodal set is eta = 0")
    if not 0.0 < epsilon <= 1.0:
        raise ValidationError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    eta = (N - 2) * (1 - epsilon) / (2 + (N - 2) * epsilon)
    if eta > 1.0 + tol:
        return None
    return min(eta, 1.0)


# -- l = 2 -----------------------------------------------------------------


def gamma2_argument(params: PseudopureParams) -> float:
    N, eps, eta, om = params.N, params.epsilon, params.eta, params.omega
    return ((N - 2) * (1 - eps)
            + (2 + (N - 2) * eps) * (eta * eta - 1)
            + 2 * eta * eta * math.sqrt((1 - eps) * (1 + (N - 1) * eps)) * math.cos(om))


def gamma2_closed(params: PseudopureParams, nodal_tol: float = NODAL_TOL) -> PhaseResult:
    """l = 2 phase factor; the argument is real so a defined result is exactly +1 or -1."""
    z = gamma2_argument(params)
    if abs(z) < nodal_tol:
        return PhaseResult(complex("nan+nanj"), complex(z), False, abs(z))
    return PhaseResult(complex(math.copysign(1.0, z)), complex(z), True, abs(z))


def l2_nodal_eta_squared(N: int, epsilon: float, omega: float, *, tol: float = 1e-12) -> float | None:
    """``eta**2`` on the l = 2 nodal surface, or None when there is no physical solution.

    A solution must lie in [0, 1] and, for ``cos(omega) < 0``, ``epsilon``
    must also fall inside :func:`l2_noise_window`.
    """
    if int(N) != N or N < 2:
        raise ValidationError(f"N must be an integer >= 2, got {N!r}")
    if not 0.0 < epsilon <= 1.0:
        raise ValidationError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    num = 2 * (N - 2) * epsilon - N + 4
    den = 2 + (N - 2) * epsilon + 2 * math.sqrt((1 - epsilon) * (1 + (N - 1) * epsilon)) * math.cos(omega)
    if abs(den) < 1e-14:
        raise SingularConfigurationError(f"nodal surface denominator vanishes at N={N}, eps={epsilon}, omega={omega}")
    if math.cos(omega) < 0:
        lo, hi = l2_noise_window(N, omega)
        if not lo - tol <= epsilon <= hi + tol:
            return None
    eta2 = num / den
    if eta2 < -tol or eta2 > 1.0 + tol:
        return None
    return min(max(eta2, 0.0), 1.0)


def l2_noise_window(N: int, omega: float) -> tuple[float, float]:
    """Range of ``epsilon`` admitting l = 2 nodal points when ``cos(omega) < 0``.

    For N = 2 there is no lower bound and the upper bound is negative.
    """
    c2 = math.cos(omega) ** 2
    lo = noise_lower_bound(N) if N > 2 else -math.inf
    return lo, ((N - 2) ** 2 - 4 * c2) / (4 * (N - 1) * c2 + (N - 2) ** 2)


# -- common nodal points ---------------------------------------------------


def f_eta(eta: float, N: int) -> float:
    """``eta^2 + eta - 1 + 2 eta^2/(N-2) sqrt(eta (N-2-eta))``: zero at common nodal points."""
    if int(N) != N or N < 3:
        raise ValidationError(f"f(eta, N) needs an integer N >= 3, got {N!r}")
    radicand = eta * (N - 2 - eta)
    if radicand < 0:
        raise DomainError(f"negative radicand for eta={eta}, N={N}; need 0 <= eta <= N - 2")
    return eta * eta + eta - 1 + 2 * eta * eta / (N - 2) * math.sqrt(radicand)


def sign_changes(values) -> list[int]:
    """Indices ``i`` with ``values[i]`` and ``values[i+1]`` of strictly opposite sign (or an exact zero at ``i``)."""
    v = np.asarray(values, dtype=float)
    s = np.sign(v)
    out = []
    for i in range(v.size - 1):
        if s[i] == 0 or s[i] * s[i + 1] < 0:
            out.append(i)
    return out


def bisect_root(func, lo: float, hi: float, xtol: float = 1e-12) -> float:
    """Bisection on a sign-changing bracket, run to (at least) ``xtol`` absolute."""
    flo, fhi = func(lo), func(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if flo * fhi > 0:
        raise ValidationError(f"no sign change on [{lo}, {hi}]")
    return float(scipy.optimize.bisect(func, lo, hi, xtol=min(xtol, 1e-15), rtol=4 * np.finfo(float).eps,
                                       maxiter=200))


def f_eta_roots(N: int, resolution: float = 1e-4) -> list[float]:
    """All roots of ``f(., N)`` on [0, 1] found by scanning at ``resolution`` and bisecting."""
    n = int(round(1.0 / resolution))
    grid = np.linspace(0.0, 1.0, n + 1)
    vals = [f_eta(x, N) for x in grid]
    roots = []
    for i in sign_changes(vals):
        roots.append(grid[i] if vals[i] == 0 else bisect_root(lambda x: f_eta(x, N), grid[i], grid[i + 1]))
    return roots


@dataclass(frozen=True)
class Figure1Table:
    rows: tuple  # (eta, N, f)
    roots: tuple  # (N, eta)

    def curve(self, N: int):
        return [(eta, f) for eta, n, f in self.rows if n == N]


def figure1_data(Ns=(3, 4, 5, 6), etas=None, resolution: float = 1e-4) -> Figure1Table:
    if etas is None:
        etas = np.linspace(0.0, 1.0, 101)
    etas = np.asarray(etas, dtype=float)
    if etas.size and (etas.min() < 0 or etas.max() > 1):
        raise ValidationError("eta grid must lie within [0, 1]")
    rows = tuple((float(e), int(N), f_eta(float(e), N)) for N in Ns for e in etas)
    roots = tuple((int(N), r) for N in Ns for r in f_eta_roots(N, resolution))
    return Figure1Table(rows, roots)


def _fmt(x: float) -> str:
    return "%.17g" % x


def figure1_csv(table: Figure1Table, comments=()) -> str:
    """CSV with header ``eta,N,f``; roots follow as ``# root N=<n> eta=<value>`` lines."""
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    buf.write("eta,N,f\n")
    for eta, n, f in table.rows:
        buf.write(f"{_fmt(eta)},{n},{_fmt(f)}\n")
    for n, r in table.roots:
        buf.write(f"# root N={n} eta={_fmt(r)}\n")
    return buf.getvalue()


def parse_figure1_csv(text: str) -> Figure1Table:
    rows, roots = [], []
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("root "):
                fields = dict(part.split("=", 1) for part in body[5:].split())
                roots.append((int(fields["N"]), float(fields["eta"])))
            continue
        if not header_seen:
            if line.strip() != "eta,N,f":
                raise ValidationError(f"line {lineno}: expected header 'eta,N,f', got {line!r}")
            header_seen = True
            continue
        eta, n, f = line.split(",")
        rows.append((float(eta), int(n), float(f)))
    if not header_seen:
        raise ValidationError("missing CSV header")
    return Figure1Table(tuple(rows), tuple(roots))


def common_nodal_points(N: int, resolution: float = 1e-4) -> list[NodalSolution]:
    """Points where both the l = 1 and l = 2 phases are undefined (``omega = 2 pi``)."""
    out = []
    for eta in f_eta_roots(N, resolution):
        # invert eta = (N-2)(1-eps)/(2+(N-2)eps) for eps
        eps = ((N - 2) - 2 * eta) / ((N - 2) * (1 + eta))
        if not 0 < eps <= 1:
            continue
        params = PseudopureParams(N, eps, eta, 2 * math.pi)
        res = max(l1_nodal_residual(params), abs(gamma2_argument(params)))
        out.append(NodalSolution({"N": N, "epsilon": eps, "eta": eta, "omega": 2 * math.pi}, "common", res))
    return out
