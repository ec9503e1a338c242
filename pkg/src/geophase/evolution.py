"""Unitary paths, connection integrals and parallel-transporting unitaries.

A path ``U(t)``, ``t in [0, tau]``, ``U(0) = I`` is either a generator
schedule (``dU/dt = -i H(t) U`` with ``H`` piecewise given, constant or
time dependent) or a grid of sampled unitaries.  Everything downstream works
on the Hermitian *connection generator*

    K(t) = i U^+(t) dU/dt(t)         (so that  U^+ dU/dt = -i K),

evaluated at the midpoint of every integration step.  Connection factors are
``exp(i * integral <psi|K|psi> dt)`` and block transporters are ordered
products of ``exp(i P K P dt)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import PhysicsError, ValidationError
from .linalg import (
    HERMITIAN_TOL,
    MAX_DIM,
    OrthonormalBasis,
    SpectralDensity,
    as_matrix,
    check_hermitian,
    dagger,
    expm_antihermitian,
    max_norm,
    unitarity_residual,
)

DEFAULT_STEPS = 10_000
_TIME_TOL = 1e-12
UNITARY_TOL = 1e-10


@dataclass(frozen=True)
class TimeGrid:
    nodes: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.nodes, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValidationError("a time grid needs at least two nodes")
        if t[0] != 0.0:
            raise ValidationError(f"time grid must start at 0, got {t[0]!r}")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("time grid nodes must be strictly increasing")
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "nodes", t)

    @classmethod
    def uniform(cls, duration: float, n_steps: int = DEFAULT_STEPS) -> "TimeGrid":
        if int(n_steps) != n_steps or n_steps < 1:
            raise ValidationError(f"n_steps must be a positive integer, got {n_steps!r}")
        t = np.linspace(0.0, float(duration), int(n_steps) + 1)
        t[-1] = float(duration)
        return cls(t)

    @property
    def n_steps(self) -> int:
        return self.nodes.size - 1

    @property
    def duration(self) -> float:
        return float(self.nodes[-1])


@dataclass(frozen=True)
class Segment:
    """Generator on ``[start, end]``: a Hermitian matrix or a callable ``t -> H(t)``."""

    start: float
    end: float
    generator: "np.ndarray | Callable[[float], np.ndarray]"

    @property
    def constant(self) -> bool:
        return not callable(self.generator)

    def at(self, t) -> np.ndarray:
        if self.constant:
            return self.generator
        return np.asarray(self.generator(t), dtype=complex)

    def at_many(self, ts: np.ndarray) -> np.ndarray:
        """Stack of ``H(t)`` for every ``t`` in ``ts``."""
        if getattr(self.generator, "vectorized", False):
            return np.asarray(self.generator(ts), dtype=complex)
        return np.stack([self.at(t) for t in ts])


def vectorized(func):
    """Mark a generator callable as accepting a 1-D time array and returning a ``(n, d, d)`` stack."""
    func.vectorized = True
    return func


@dataclass(frozen=True)
class GaugeFamily:
    """Right factor ``G(t)`` applied to a path, ``U(t) -> U(t) G(t)``, ``G(0) = I``.

    ``value(t)`` returns ``G(t)`` and ``connection(t)`` returns ``G^+ dG/dt``.
    Both take a 1-D array of times and return a stack of matrices.
    """

    value: Callable[[float], np.ndarray]
    connection: Callable[[float], np.ndarray]


class UnitaryPath:
    """One-parameter family of unitaries ``U(t)`` on ``[0, duration]``.

    Build with :meth:`from_schedule`, :meth:`constant` or :meth:`from_samples`.
    Sampled paths are evaluated only on their sample nodes unless
    ``interpolate=True``, which switches on geodesic interpolation between
    neighbouring samples.  ``derivative`` selects how sampled paths estimate
    ``dU/dt``: ``"central"`` finite differences or ``"geodesic"`` (matrix
    logarithm of each step ratio).
    """

    def __init__(self, dim, duration, *, segments=None, times=None, unitaries=None,
                 interpolate=False, derivative="central", gauge=None):
        self.dim = int(dim)
        self.duration = float(duration)
        if not 1 <= self.dim <= MAX_DIM:
            raise ValidationError(f"path dimension {self.dim} outside [1, {MAX_DIM}]")
        if not self.duration > 0:
            raise ValidationError("path duration must be positive")
        if (segments is None) == (times is None):
            raise ValidationError("give either a generator schedule or sampled unitaries")
        if derivative not in ("central", "geodesic"):
            raise ValidationError(f"unknown derivative rule {derivative!r}")
        self.segments = None if segments is None else tuple(segments)
        self.times = None if times is None else np.asarray(times, dtype=float)
        self.unitaries = None if unitaries is None else np.asarray(unitaries, dtype=complex)
        self.interpolate = bool(interpolate)
        self.derivative = derivative
        self.gauge = gauge

    @property
    def kind(self) -> str:
        return "generator" if self.segments is not None else "sampled"

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_schedule(cls, schedule: Sequence, dim: int | None = None) -> "UnitaryPath":
        """``schedule`` is a sequence of ``(t_start, t_end, H)`` tiling ``[0, tau]``."""
        if not schedule:
            raise ValidationError("empty generator schedule")
        segments = []
        prev_end = 0.0
        for i, item in enumerate(schedule):
            t0, t1, gen = item
            t0, t1 = float(t0), float(t1)
            label = f"interval {i} [{t0}, {t1}]"
            if not t1 > t0:
                raise ValidationError(f"{label} has non-positive length")
            if abs(t0 - prev_end) > _TIME_TOL * max(1.0, abs(t1)):
                kind = "overlaps" if t0 < prev_end else "leaves a gap after"
                raise ValidationError(f"{label} {kind} the previous interval ending at {prev_end}")
            if not callable(gen):
                gen = check_hermitian(gen, f"generator of {label}")
                if dim is None:
                    dim = gen.shape[0]
                if gen.shape[0] != dim:
                    raise ValidationError(f"generator of {label} has dimension {gen.shape[0]}, expected {dim}")
                gen = gen.copy()
                gen.setflags(write=False)
            segments.append(Segment(prev_end, t1, gen))
            prev_end = t1
        if dim is None:
            h0 = np.asarray(segments[0].generator(0.0))
            dim = h0.shape[0]
        return cls(dim, prev_end, segments=segments)

    @classmethod
    def constant(cls, h, duration: float) -> "UnitaryPath":
        return cls.from_schedule([(0.0, duration, h)])

    @classmethod
    def from_samples(cls, times, unitaries, *, interpolate=False, derivative="central") -> "UnitaryPath":
        t = np.asarray(times, dtype=float)
        u = np.asarray(unitaries, dtype=complex)
        if t.ndim != 1 or t.size < 3 or u.shape[0] != t.size or u.ndim != 3 or u.shape[1] != u.shape[2]:
            raise ValidationError("need at least three samples with matching (n, d, d) unitaries")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValidationError("sample times must start at 0 and increase strictly")
        if max_norm(u[0] - np.eye(u.shape[1])) != 0.0:
            raise ValidationError("the first sample must be exactly the identity")
        res = unitarity_residual(u)
        if res > UNITARY_TOL:
            raise PhysicsError(f"sampled operators are not unitary (residual {res:.3e})")
        return cls(u.shape[1], t[-1], times=t, unitaries=u, interpolate=interpolate, derivative=derivative)

    def with_gauge(self, gauge: GaugeFamily) -> "UnitaryPath":
        """Same path of states, realized by ``U(t) G(t)``."""
        if self.gauge is not None:
            raise ValidationError("path already carries a gauge factor")
        return UnitaryPath(self.dim, self.duration, segments=self.segments, times=self.times,
                           unitaries=self.unitaries, interpolate=self.interpolate,
                           derivative=self.derivative, gauge=gauge)

    def breakpoints(self) -> np.ndarray:
        if self.segments is None:
            return np.array([0.0, self.duration])
        return np.array([s.start for s in self.segments] + [self.segments[-1].end])

    def default_grid(self, n_steps: int = DEFAULT_STEPS) -> TimeGrid:
        if self.kind == "sampled" and not self.interpolate:
            return TimeGrid(self.times)
        return TimeGrid.uniform(self.duration, n_steps)

    def __repr__(self):
        if self.kind == "generator":
            return f"UnitaryPath(dim={self.dim}, duration={self.duration}, segments={len(self.segments)})"
        return f"UnitaryPath(dim={self.dim}, duration={self.duration}, samples={self.times.size})"


# -- ordered products ------------------------------------------------------


def prefix_products(steps: np.ndarray, start: np.ndarray) -> np.ndarray:
    """``[start, E0 start, E1 E0 start, ...]`` via a log-depth scan."""
    p = np.array(steps, dtype=complex, copy=True)
    n = p.shape[0]
    s = 1
    while s < n:
        p[s:] = p[s:] @ p[:-s]
        s *= 2
    out = np.empty((n + 1,) + start.shape, dtype=complex)
    out[0] = start
    out[1:] = p @ start
    return out


def ordered_product(steps: np.ndarray) -> np.ndarray:
    """``E_{n-1} ... E_1 E_0`` (later factors on the left)."""
    m = np.asarray(steps, dtype=complex)
    if m.shape[0] == 0:
        raise ValidationError("empty product")
    while m.shape[0] > 1:
        if m.shape[0] % 2:
            m = np.concatenate([m, np.eye(m.shape[-1])[None]], axis=0)
        m = m[1::2] @ m[0::2]
    return m[0]


def _log_unitary(u: np.ndarray) -> np.ndarray:
    """Principal logarithm of a unitary (anti-Hermitian result)."""
    t, z = scipy.linalg.schur(u, output="complex")
    return (z * (1j * np.angle(np.diag(t)))) @ dagger(z)


# -- trajectory ------------------------------------------------------------


@dataclass
class Trajectory:
    """Discretized path: unitaries at nodes plus midpoint connection generators.

    ``generators[e]`` is constant over ``weights[e]`` time, covering nodes
    ``spans[e, 0] .. spans[e, 1]``; entries for constant-generator segments are
    merged into one (the midpoint product is exact there).
    """

    nodes: np.ndarray
    grid_index: np.ndarray
    unitaries: np.ndarray
    generators: np.ndarray
    weights: np.ndarray
    spans: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.unitaries[-1]

    def connection_phases(self, basis: OrthonormalBasis | None = None) -> np.ndarray:
        """``theta_k = integral <psi_k|K|psi_k> dt`` for every basis vector."""
        return self._diag(basis) @ self.weights

    def _diag(self, basis):
        k = self.generators
        if basis is not None:
            b = basis.vectors
            k = dagger(b) @ k @ b
        return np.real(np.diagonal(k, axis1=-2, axis2=-1)).T  # (d, entries)

    def cumulative_connection_phases(self, basis: OrthonormalBasis | None = None) -> np.ndarray:
        """``theta_k(t)`` at every node, shape ``(nodes, d)``."""
        contrib = self._diag(basis) * self.weights
        out = np.zeros((self.nodes.size, contrib.shape[0]))
        acc = np.zeros(contrib.shape[0])
        for e, (i0, i1) in enumerate(self.spans):
            t0, t1 = self.nodes[i0], self.nodes[i1]
            frac = (self.nodes[i0 + 1:i1 + 1] - t0) / (t1 - t0)
            out[i0 + 1:i1 + 1] = acc + frac[:, None] * contrib[:, e]
            acc = acc + contrib[:, e]
        return out

    def transport(self, projectors) -> np.ndarray:
        """Ordered product of ``exp(i sum_k P_k K P_k dt)`` over the whole path."""
        k = self.generators
        pinched = sum(p @ k @ p for p in projectors)
        steps = expm_antihermitian(-pinched, self.weights)
        return ordered_product(steps)


def _effective_nodes(grid: TimeGrid, breaks: np.ndarray, duration: float) -> np.ndarray:
    t = np.array(grid.nodes)
    extra = [b for b in breaks[1:-1] if np.min(np.abs(t - b)) > _TIME_TOL * duration]
    if extra:
        t = np.sort(np.concatenate([t, extra]))
    return t


def _check_grid(path: UnitaryPath, grid: TimeGrid) -> TimeGrid:
    if grid is None:
        return path.default_grid()
    if abs(grid.duration - path.duration) > _TIME_TOL * path.duration:
        raise ValidationError(f"grid spans [0, {grid.duration}] but the path lives on [0, {path.duration}]")
    return grid


def _generator_trajectory(path: UnitaryPath, grid: TimeGrid, *, apply_gauge: bool = True,
                          per_step: bool = False) -> Trajectory:
    d = path.dim
    breaks = path.breakpoints()
    nodes = _effective_nodes(grid, breaks, path.duration)
    nodes[-1] = path.duration
    grid_index = np.searchsorted(nodes, grid.nodes - _TIME_TOL * path.duration)
    u = np.empty((nodes.size, d, d), dtype=complex)
    u[0] = np.eye(d)
    gens, weights, spans = [], [], []
    gauged = apply_gauge and path.gauge is not None
    per_step = per_step or gauged
    i0 = 0
    for s, seg in enumerate(path.segments):
        i1 = int(np.searchsorted(nodes, seg.end - _TIME_TOL * path.duration))
        i1 = max(i1, i0 + 1)
        t = nodes[i0:i1 + 1]
        if seg.constant:
            h = seg.generator
            w, v = np.linalg.eigh(h)
            prop = (v * np.exp(-1j * w * (t - t[0])[:, None])[:, None, :]) @ dagger(v)
            u[i0:i1 + 1] = prop @ u[i0]
            kc = dagger(u[i0]) @ h @ u[i0]
            if per_step:
                gens.append(np.broadcast_to(kc, (i1 - i0, d, d)))
                weights.append(np.diff(t))
                spans.append(np.stack([np.arange(i0, i1), np.arange(i0 + 1, i1 + 1)], axis=1))
            else:
                gens.append(kc[None])
                weights.append(np.array([t[-1] - t[0]]))
                spans.append(np.array([[i0, i1]]))
        else:
            dt = np.diff(t)
            mids = t[:-1] + dt / 2
            hm = seg.at_many(mids)
            if hm.shape[1:] != (d, d):
                raise ValidationError(f"generator of segment {s} returns shape {hm.shape[1:]}, expected {(d, d)}")
            steps = expm_antihermitian(hm, dt)
            u[i0:i1 + 1] = prefix_products(steps, u[i0])
            ul = u[i0:i1]
            gens.append(dagger(ul) @ hm @ ul)
            weights.append(dt)
            spans.append(np.stack([np.arange(i0, i1), np.arange(i0 + 1, i1 + 1)], axis=1))
        i0 = i1
    gens = np.concatenate(gens)
    weights = np.concatenate(weights)
    spans = np.concatenate(spans)
    traj = Trajectory(nodes, grid_index, u, gens, weights, spans)
    if gauged:
        traj = _apply_gauge(traj, path.gauge)
    return traj


def _apply_gauge(traj: Trajectory, gauge: GaugeFamily) -> Trajectory:
    nodes = traj.nodes
    g_nodes = gauge.value(nodes)
    mids = (nodes[traj.spans[:, 0]] + nodes[traj.spans[:, 1]]) / 2
    g_mid = gauge.value(mids)
    c_mid = gauge.connection(mids)
    gens = dagger(g_mid) @ traj.generators @ g_mid + 1j * c_mid
    gens = (gens + dagger(gens)) / 2
    return Trajectory(nodes, traj.grid_index, traj.unitaries @ g_nodes, gens, traj.weights, traj.spans)


def _sampled_unitaries(path: UnitaryPath, grid: TimeGrid) -> np.ndarray:
    ts, us = path.times, path.unitaries
    pos = np.searchsorted(ts, grid.nodes)
    pos = np.clip(pos, 0, ts.size - 1)
    hit = np.abs(ts[pos] - grid.nodes) <= _TIME_TOL * path.duration
    alt = np.clip(pos - 1, 0, ts.size - 1)
    hit_alt = np.abs(ts[alt] - grid.nodes) <= _TIME_TOL * path.duration
    pos = np.where(hit, pos, alt)
    hit = hit | hit_alt
    if np.all(hit):
        return us[pos]
    if not path.interpolate:
        missing = grid.nodes[~hit][:3]
        raise ValidationError(
            f"grid nodes {missing.tolist()} are not sample times; enable interpolation to evaluate them")
    out = np.empty((grid.nodes.size, path.dim, path.dim), dtype=complex)
    for i, t in enumerate(grid.nodes):
        if hit[i]:
            out[i] = us[pos[i]]
            continue
        j = int(np.searchsorted(ts, t)) - 1
        s = (t - ts[j]) / (ts[j + 1] - ts[j])
        log_step = _log_unitary(us[j + 1] @ dagger(us[j]))
        out[i] = scipy.linalg.expm(s * log_step) @ us[j]
    return out


def _central_generators(u: np.ndarray, t: np.ndarray) -> np.ndarray:
    du = np.gradient(u, t, axis=0, edge_order=2)
    a = dagger(u) @ du
    a = (a - dagger(a)) / 2
    return 1j * a


def _sampled_trajectory(path: UnitaryPath, grid: TimeGrid) -> Trajectory:
    u = _sampled_unitaries(path, grid)
    t = np.array(grid.nodes)
    dt = np.diff(t)
    if path.derivative == "central":
        k_nodes = _central_generators(u, t)
        gens = (k_nodes[:-1] + k_nodes[1:]) / 2
    else:
        gens = np.empty((dt.size, path.dim, path.dim), dtype=complex)
        for j in range(dt.size):
            h = 1j * _log_unitary(u[j + 1] @ dagger(u[j])) / dt[j]
            gens[j] = dagger(u[j]) @ h @ u[j]
        gens = (gens + dagger(gens)) / 2
    spans = np.stack([np.arange(dt.size), np.arange(1, dt.size + 1)], axis=1)
    traj = Trajectory(np.array(t), np.arange(t.size), u, gens, dt, spans)
    if path.gauge is not None:
        traj = _apply_gauge(traj, path.gauge)
    return traj


def compute_trajectory(path: UnitaryPath, grid: TimeGrid | None = None) -> Trajectory:
    grid = _check_grid(path, grid)
    if path.kind == "generator":
        return _generator_trajectory(path, grid)
    return _sampled_trajectory(path, grid)


def gauge_trajectories(path: UnitaryPath, gauges, grid: TimeGrid | None = None):
    """Trajectories of ``path.with_gauge(g)`` for each ``g``, sharing one integration of ``path``."""
    if path.gauge is not None:
        raise ValidationError("path already carries a gauge factor")
    grid = _check_grid(path, grid)
    if path.kind == "generator":
        base = _generator_trajectory(path, grid, per_step=True)
        for g in gauges:
            yield _apply_gauge(base, g)
    else:
        for g in gauges:
            yield _sampled_trajectory(path.with_gauge(g), grid)


# -- public operations -----------------------------------------------------


def evolve(path: UnitaryPath, grid: TimeGrid | None = None) -> np.ndarray:
    """``U(t)`` at every grid node, shape ``(n_steps + 1, d, d)``."""
    traj = compute_trajectory(path, grid)
    return traj.unitaries[traj.grid_index]


def _basis_or_default(basis, dim) -> OrthonormalBasis:
    if basis is None:
        return OrthonormalBasis.computational(dim)
    if not isinstance(basis, OrthonormalBasis):
        basis = OrthonormalBasis(basis)
    if basis.dim != dim:
        raise ValidationError(f"basis dimension {basis.dim} does not match path dimension {dim}")
    return basis


def _trapezoid_phases(path: UnitaryPath, grid: TimeGrid, basis: OrthonormalBasis) -> np.ndarray:
    grid = _check_grid(path, grid)
    if path.kind == "sampled":
        u = _sampled_unitaries(path, grid)
        k = _central_generators(u, grid.nodes)
        if path.gauge is not None:
            raise ValidationError("trapezoid rule is not available for gauged sampled paths")
        b = basis.vectors
        diag = np.real(np.diagonal(dagger(b) @ k @ b, axis1=-2, axis2=-1))
        dt = np.diff(grid.nodes)
        return ((diag[:-1] + diag[1:]) / 2 * dt[:, None]).sum(axis=0)
    traj = _generator_trajectory(path, grid, apply_gauge=False)
    nodes, u = traj.nodes, traj.unitaries
    breaks = path.breakpoints()
    b = basis.vectors
    total = np.zeros(path.dim)
    for j in range(nodes.size - 1):
        ta, tb = nodes[j], nodes[j + 1]
        s = min(int(np.searchsorted(breaks, (ta + tb) / 2, side="right")) - 1, len(path.segments) - 1)
        seg = path.segments[s]
        ka = dagger(u[j]) @ seg.at(ta) @ u[j]
        kb = dagger(u[j + 1]) @ seg.at(tb) @ u[j + 1]
        if path.gauge is not None:
            ga, gb = path.gauge.value(np.array([ta, tb]))
            ca, cb = path.gauge.connection(np.array([ta, tb]))
            ka = dagger(ga) @ ka @ ga + 1j * ca
            kb = dagger(gb) @ kb @ gb + 1j * cb
        total += np.real(np.diagonal(dagger(b) @ (ka + kb) @ b)) / 2 * (tb - ta)
    return total


def connection_factor(path: UnitaryPath, k: int, grid: TimeGrid | None = None, *,
                      basis=None, rule: str = "midpoint") -> complex:
    """``d_k = exp(-integral <psi_k|U^+ dU/dt|psi_k> dt)``, a unit-modulus number."""
    basis = _basis_or_default(basis, path.dim)
    if not 0 <= k < path.dim:
        raise ValidationError(f"basis index {k} outside [0, {path.dim})")
    if rule == "midpoint":
        theta = compute_trajectory(path, grid).connection_phases(basis)
    elif rule == "trapezoid":
        theta = _trapezoid_phases(path, grid, basis)
    else:
        raise ValidationError(f"unknown quadrature rule {rule!r}")
    return complex(np.exp(1j * theta[k]))


def parallel_transport_unitary(path: UnitaryPath, basis=None, grid: TimeGrid | None = None,
                               *, trajectory: Trajectory | None = None) -> np.ndarray:
    """``U(tau) sum_k d_k |psi_k><psi_k|``: the transported endpoint."""
    basis = _basis_or_default(basis, path.dim)
    traj = trajectory if trajectory is not None else compute_trajectory(path, grid)
    d = np.exp(1j * traj.connection_phases(basis))
    return traj.final @ basis.diagonal_operator(d)


def parallel_transport_path(path: UnitaryPath, basis=None, grid: TimeGrid | None = None) -> UnitaryPath:
    """The whole transported family ``U^par(t)`` as a sampled path on the grid."""
    basis = _basis_or_default(basis, path.dim)
    traj = compute_trajectory(path, grid)
    theta = traj.cumulative_connection_phases(basis)[traj.grid_index]
    b = basis.vectors
    frames = (b[None] * np.exp(1j * theta)[:, None, :]) @ dagger(b)[None]
    u = traj.unitaries[traj.grid_index] @ frames
    u[0] = np.eye(path.dim)
    return UnitaryPath.from_samples(traj.nodes[traj.grid_index], u)


def _check_projector(p, dim: int) -> np.ndarray:
    p = as_matrix(p, "projector")
    if p.shape[0] != dim:
        raise ValidationError(f"projector dimension {p.shape[0]} does not match path dimension {dim}")
    if max_norm(p @ p - p) > HERMITIAN_TOL or max_norm(p - dagger(p)) > HERMITIAN_TOL:
        raise ValidationError("operator is not an orthogonal projector (P^2 = P = P^+ violated)")
    return p


def subspace_parallel_transport(path: UnitaryPath, projector, grid: TimeGrid | None = None,
                                *, trajectory: Trajectory | None = None) -> np.ndarray:
    """Time-ordered ``P T exp(-integral P U^+ dU/dt P dt) P`` at ``t = tau``."""
    p = _check_projector(projector, path.dim)
    traj = trajectory if trajectory is not None else compute_trajectory(path, grid)
    v = traj.transport([p])
    return p @ v @ p


def level_projectors(rho: SpectralDensity) -> list[np.ndarray]:
    projectors = [lv.projector for lv in rho.levels]
    gap = max_norm(sum(projectors) - np.eye(rho.dim))
    if gap > 1e-10:
        raise ValidationError(f"level projectors do not resolve the identity (gap {gap:.3e})")
    return projectors


def build_parallel_family(path: UnitaryPath, rho: SpectralDensity, grid: TimeGrid | None = None,
                          *, trajectory: Trajectory | None = None):
    """``(U_par(tau), V_par(tau))`` with ``V_par = sum_k alpha_k`` over the levels of ``rho``.

    The kernel of ``rho`` is transported like any other level, so ``V_par`` is
    a full unitary.
    """
    if rho.dim != path.dim:
        raise ValidationError(f"state dimension {rho.dim} does not match path dimension {path.dim}")
    projectors = level_projectors(rho)
    traj = trajectory if trajectory is not None else compute_trajectory(path, grid)
    v = traj.transport(projectors)
    return traj.final @ v, v
