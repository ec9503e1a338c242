"""Named unitary paths: two-level rotations embedded in ``span{|n>, |m>}``.

Every preset acts as the identity outside the two-level subspace, i.e.
``U(t) = I - P_nm + U_nm(t)``.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .evolution import UnitaryPath, vectorized

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def axis_generator(axis) -> np.ndarray:
    """``(n . sigma) / 2`` for a (normalized) axis ``n``."""
    n = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(n)
    if n.shape != (3,) or norm == 0:
        raise ValidationError(f"rotation axis must be a non-zero 3-vector, got {axis!r}")
    n = n / norm
    return (n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z) / 2


def embed_two_level(h2, dim: int, n: int, m: int) -> np.ndarray:
    if n == m or not (0 <= n < dim and 0 <= m < dim):
        raise ValidationError(f"need two distinct levels below {dim}, got n={n}, m={m}")
    h = np.zeros((dim, dim), dtype=complex)
    sel = [n, m]
    h[np.ix_(sel, sel)] = h2
    return h


def block_rotation(axis, angle: float, dim: int = 2, n: int = 0, m: int = 1,
                   duration: float = 1.0) -> UnitaryPath:
    """Uniform rotation by ``angle`` about ``axis`` inside ``span{|n>, |m>}``."""
    h2 = (angle / duration) * axis_generator(axis)
    return UnitaryPath.constant(embed_two_level(h2, dim, n, m), duration)


def precession(theta: float, turns: float = 1.0, dim: int = 2, n: int = 0, m: int = 1,
               duration: float = 1.0, ramp: bool = False) -> UnitaryPath:
    """Full-cycle precession of ``|n>`` on a cone of polar angle ``theta``.

    The rotation axis sits at polar angle ``theta`` in the xz plane, so after
    an integer number of turns ``|n>`` returns to itself having enclosed the
    solid angle ``2 pi turns (1 - cos theta)``.  ``ramp=True`` sweeps the
    rotation angle as ``(t/duration)**3`` instead of uniformly, which gives a
    genuinely time-dependent generator with the same endpoint.
    """
    total = 2 * np.pi * turns
    g = axis_generator([np.sin(theta), 0.0, np.cos(theta)])
    if not ramp:
        return block_rotation([np.sin(theta), 0.0, np.cos(theta)], total, dim, n, m, duration)

    h = embed_two_level(g, dim, n, m)

    @vectorized
    def ramped(t):
        t = np.asarray(t, dtype=float)
        return (3 * total * t**2 / duration**3)[..., None, None] * h

    return UnitaryPath.from_schedule([(0.0, duration, ramped)], dim=dim)


def _ramped_leg(h, start: float, length: float):
    """``H(t) = 3 s^2 h`` on ``[start, start + length]`` with ``s = (t - start)/length``: same endpoint as ``h``."""

    @vectorized
    def gen(t):
        s = (np.asarray(t, dtype=float) - start) / length
        return (3 * s**2)[..., None, None] * h

    return gen


def block_loop(eta: float, omega: float, dim: int = 2, n: int = 0, m: int = 1,
               duration: float = 1.0, ramp: bool = False) -> UnitaryPath:
    """Path with visibility ``|<n|U(tau)|n>| = eta`` and geodesically closed solid angle ``omega``.

    For ``eta < 1``: tilt ``|n>`` along a meridian to polar angle
    ``beta = 2 arccos(eta)``, then precess about z by ``omega / (1 - cos beta)``.
    The loop closes along the same meridian, enclosing ``omega``.  For
    ``eta = 1`` a full cone precession with ``1 - cos(theta) = omega / 2 pi``
    (``omega`` taken mod ``4 pi``) is used.  ``ramp=True`` sweeps each leg as
    ``s**3`` instead of uniformly.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValidationError(f"visibility must lie in [0, 1], got {eta}")
    if eta > 1.0 - 1e-12:
        om = float(np.mod(omega, 4 * np.pi))
        theta = float(np.arccos(np.clip(1.0 - om / (2 * np.pi), -1.0, 1.0)))
        return precession(theta, 1.0, dim, n, m, duration, ramp=ramp)
    beta = 2 * np.arccos(eta)
    phi = omega / (1 - np.cos(beta))
    half = duration / 2
    h_tilt = embed_two_level((beta / half) * axis_generator([0, 1, 0]), dim, n, m)
    h_spin = embed_two_level((phi / half) * axis_generator([0, 0, 1]), dim, n, m)
    if ramp:
        return UnitaryPath.from_schedule([(0.0, half, _ramped_leg(h_tilt, 0.0, half)),
                                          (half, duration, _ramped_leg(h_spin, half, half))], dim=dim)
    return UnitaryPath.from_schedule([(0.0, half, h_tilt), (half, duration, h_spin)])


def random_hermitian(rng, dim: int, scale: float = 1.0, traceless: bool = False) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = (a + a.conj().T) / 2
    if traceless:
        h -= np.trace(h) / dim * np.eye(dim)
    return scale * h


def random_schedule(rng, dim: int, n_segments: int = 3, duration: float = 1.0,
                    scale: float = 1.0, traceless: bool = False) -> UnitaryPath:
    """Piecewise-constant path with random Hermitian generators and random breakpoints."""
    cuts = np.sort(rng.uniform(0.1, 0.9, n_segments - 1)) * duration
    edges = np.concatenate([[0.0], cuts, [duration]])
    return UnitaryPath.from_schedule(
        [(edges[i], edges[i + 1], random_hermitian(rng, dim, scale, traceless)) for i in range(n_segments)])


def random_block_path(rng, dim: int, n: int, m: int, n_segments: int = 3, duration: float = 1.0,
                      scale: float = 2.0) -> UnitaryPath:
    """Random SU(2) schedule acting inside ``span{|n>, |m>}`` only."""
    cuts = np.sort(rng.uniform(0.1, 0.9, n_segments - 1)) * duration
    edges = np.concatenate([[0.0], cuts, [duration]])
    return UnitaryPath.from_schedule(
        [(edges[i], edges[i + 1], embed_two_level(random_hermitian(rng, 2, scale, traceless=True), dim, n, m))
         for i in range(n_segments)])


def random_smooth_path(rng, dim: int, duration: float = 1.0, scale: float = 1.0) -> UnitaryPath:
    """``H(t) = A + sin(w t) B + cos(v t) C`` with random Hermitian ``A, B, C`` (non-commuting in general)."""
    a, b, c = (random_hermitian(rng, dim, scale) for _ in range(3))
    w, v = rng.uniform(0.5, 3.0, 2) / duration

    @vectorized
    def h(t):
        t = np.asarray(t, dtype=float)[..., None, None]
        return a + np.sin(w * t) * b + np.cos(v * t) * c

    return UnitaryPath.from_schedule([(0.0, duration, h)], dim=dim)
