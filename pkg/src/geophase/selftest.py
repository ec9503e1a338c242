"""Built-in verification suite run by ``geophase selftest``.

Each check compares two independent routes (numerical engine against a
closed form, one engine against another, or a circuit simulation against
the arm intensity) and reports the worst discrepancy next to its bound.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .evolution import TimeGrid, build_parallel_family, compute_trajectory, parallel_transport_unitary
from .interferometer import (conditional_circuit_readout, fit_interferogram, interferogram, l2_arm_operators,
                             purify_density, purify_pseudopure)
from .linalg import OrthonormalBasis, SpectralDensity, cyclic_shift_unitary, max_norm
from .paths import block_loop, precession, random_block_path, random_schedule, random_smooth_path
from .phases import (as_pure_density, gauge_invariance_report, mixed_offdiagonal_phase_degenerate,
                     mixed_offdiagonal_phase_nondeg, pure_offdiagonal_phase)
from .pseudopure import (PseudopureParams, f_eta, figure1_csv, figure1_data, gamma2_argument, l1_nodal_eta,
                         l2_nodal_eta_squared, parse_figure1_csv, pseudopure_density, qubit_mixed_phase,
                         sign_changes)


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    value: float
    bound: float
    detail: str
    seconds: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d} {self.name}: {self.detail} ({self.seconds:.2f} s)"


def angle_distance(a: float, b: float) -> float:
    return abs(math.remainder(a - b, 2 * math.pi))


def random_density(rng, dim: int, rank: int | None = None) -> SpectralDensity:
    rank = dim if rank is None else rank
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return SpectralDensity.from_matrix(rho / np.trace(rho).real)


def random_basis(rng, dim: int) -> OrthonormalBasis:
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    return OrthonormalBasis(q * (np.diag(r) / np.abs(np.diag(r)))[None, :])


def _timed(number, name, fn, *args, **kwargs) -> CriterionResult:
    t0 = time.perf_counter()
    passed, value, bound, detail = fn(*args, **kwargs)
    return CriterionResult(number, name, bool(passed), float(value), float(bound), detail,
                           time.perf_counter() - t0)


# -- individual criteria ---------------------------------------------------


def _qubit_pi_shift(seed: int, n_paths: int = 200, time_limit: float = 10.0):
    rng = np.random.default_rng([seed, 1])
    basis = OrthonormalBasis.computational(2)
    worst, accepted, t0 = 0.0, 0, time.perf_counter()
    while accepted < n_paths:
        path = random_block_path(rng, 2, 0, 1, n_segments=int(rng.integers(1, 5)))
        res = pure_offdiagonal_phase(path, basis, (0, 1))
        if abs(res.links[0]) <= 1e-6:
            continue
        accepted += 1
        worst = max(worst, abs(res.phase + 1))
    elapsed = time.perf_counter() - t0
    return (worst < 1e-8 and elapsed < time_limit, worst, 1e-8,
            f"{accepted} paths, max |gamma + 1| = {worst:.2e}, {elapsed:.2f} s of {time_limit:.0f} s")


def _random_mixture_freeze(seed: int, n_paths: int = 20):
    rng = np.random.default_rng([seed, 2])
    worst = 0.0
    for i in range(n_paths):
        dim = int(rng.integers(2, 6))
        path = random_smooth_path(rng, dim) if i % 2 else random_schedule(rng, dim, n_segments=3)
        rho = pseudopure_density(dim, 0.0)
        u_par, _ = build_parallel_family(path, rho)
        worst = max(worst, max_norm(u_par - np.eye(dim)))
    return worst < 1e-8, worst, 1e-8, f"{n_paths} paths, max |U_par - I| = {worst:.2e}"


def _bloch_closed_form(seed: int, n_steps: int = 10_000, eta: float = 0.8):
    # ramped legs make the step error first order in the enclosed solid angle
    eps_values = np.round(np.arange(1, 10) / 10, 10)
    omegas = np.round(np.arange(1, 31) * 0.2, 10)
    worst = 0.0
    branch_flips = 0
    for om in omegas:
        path = block_loop(eta, om, ramp=True)
        traj = compute_trajectory(path, TimeGrid.uniform(1.0, n_steps))
        for eps in eps_values:
            rho = SpectralDensity.diagonal([(1 + eps) / 2, (1 - eps) / 2])
            got = mixed_offdiagonal_phase_nondeg(path, rho, (0,), trajectory=traj).phase
            want = qubit_mixed_phase(eps, om)
            worst = max(worst, abs(got - want))
            if abs(want - np.exp(-1j * math.atan(eps * math.tan(om / 2)))) > 1e-6:
                branch_flips += 1
    ratios = []
    for eps, om in ((0.1, 1.0), (0.5, 3.0), (0.9, 5.0), (0.3, 6.0)):
        path = block_loop(eta, om, ramp=True)
        rho = SpectralDensity.diagonal([(1 + eps) / 2, (1 - eps) / 2])
        vals = [mixed_offdiagonal_phase_nondeg(path, rho, (0,), TimeGrid.uniform(1.0, n)).phase
                for n in (n_steps // 4, n_steps // 2, n_steps)]
        ratios.append(abs(vals[1] - vals[0]) / abs(vals[2] - vals[1]))
    conv_ok = all(3.0 <= r <= 4.5 for r in ratios)
    return (worst < 1e-6 and conv_ok, worst, 1e-6,
            f"max phase error {worst:.2e}; step-halving ratios {', '.join(f'{r:.3f}' for r in ratios)}; "
            f"{branch_flips} grid points beyond the principal arctan branch")


def _pure_limit(seed: int):
    worst = 0.0
    for theta in (math.pi / 6, math.pi / 3, math.pi / 2):
        omega = 2 * math.pi * (1 - math.cos(theta))
        want = np.exp(-0.5j * omega)
        for N in (2, 4):
            path = precession(theta, dim=N)
            rho = pseudopure_density(N, 1.0)
            engines = [mixed_offdiagonal_phase_degenerate(path, rho, (0,)).phase]
            if N == 2:
                engines.append(mixed_offdiagonal_phase_nondeg(path, rho, (0,)).phase)
            worst = max(worst, *(abs(g - want) for g in engines))
    return worst < 1e-6, worst, 1e-6, f"max |gamma - exp(-i Omega/2)| = {worst:.2e}"


def gauge_cases(seed: int):
    """Representative phases of every kind for the gauge-invariance check.

    All are kept away from nodal points (``|Tr| > 0.05``), where the
    discretization error of a phase factor grows like ``1/|Tr|``.
    """
    rng = np.random.default_rng([seed, 5])
    cases = []
    qubit = random_block_path(rng, 2, 0, 1)
    cases.append(("pure qubit (0,1)", qubit, OrthonormalBasis.computational(2), (0, 1)))
    smooth3 = random_smooth_path(rng, 3)
    basis3 = random_basis(rng, 3)
    cases.append(("pure N=3 (0,2,1)", smooth3, basis3, (0, 2, 1)))
    cases.append(("pure N=3 (1,)", smooth3, basis3, (1,)))
    rho3 = random_density(rng, 3)
    cases.append(("mixed N=3 (0,1)", smooth3, rho3, (0, 1)))
    cases.append(("mixed N=3 (2,)", smooth3, rho3, (2,)))
    loop = block_loop(0.7, 2.2, 4, 0, 1)
    pp = pseudopure_density(4, 0.5)
    cases.append(("pseudopure N=4 (0,1)", loop, pp, (0, 1)))
    cases.append(("pseudopure N=4 (0,)", loop, pp, (0,)))
    b4 = random_basis(rng, 4)
    rho4 = SpectralDensity.from_matrix(b4.diagonal_operator([0.4, 0.4, 0.2, 0.0]))
    cases.append(("degenerate N=4 (0,1)", random_smooth_path(rng, 4), rho4, (0, 1)))
    return cases


def _gauge_invariance(seed: int, n_trials: int = 20):
    worst, excluded = 0.0, 0
    for _, path, target, idx in gauge_cases(seed):
        for gauge in ("diagonal", "block"):
            rep = gauge_invariance_report(path, target, idx, n_trials, seed, gauge=gauge)
            if not rep.reference.defined:
                excluded += 1
                continue
            worst = max(worst, rep.max_deviation)
            excluded += rep.excluded
    detail = f"max deviation {worst:.2e} over {n_trials} diagonal + {n_trials} block gauges per phase"
    if excluded:
        detail += f"; {excluded} excluded as undefined"
    return worst < 1e-7, worst, 1e-7, detail


def _gamma2_sign_law(seed: int, N: int = 4):
    eps_grid = np.linspace(0.1, 1.0, 10)
    eta_grid = np.linspace(0.0, 1.0, 10)
    omega_grid = np.linspace(0.0, 2 * math.pi, 10)
    rhos = {eps: pseudopure_density(N, eps) for eps in eps_grid}
    worst_trace, worst_sign, checked, skipped = 0.0, 0.0, 0, 0
    for eta in eta_grid:
        for om in omega_grid:
            path = block_loop(eta, om, N, 0, 1)
            traj = compute_trajectory(path)
            for eps in eps_grid:
                arg = gamma2_argument(PseudopureParams(N, eps, eta, om))
                res = mixed_offdiagonal_phase_degenerate(path, rhos[eps], (0, 1), trajectory=traj)
                worst_trace = max(worst_trace, abs(N * res.raw_trace - arg))
                if abs(arg) < 1e-6:
                    skipped += 1
                    continue
                checked += 1
                worst_sign = max(worst_sign, abs(res.phase - math.copysign(1.0, arg)))
    worst = max(worst_trace, worst_sign)
    return (worst < 1e-6, worst, 1e-6,
            f"{checked} signed points, {skipped} near-nodal skipped; max |gamma - sign| = {worst_sign:.2e}, "
            f"max |N Tr - argument| = {worst_trace:.2e}")


def _nodal_bounds(seed: int):
    eps_grid = np.unique(np.concatenate([np.linspace(0.01, 1.0, 100), [1 / 6, 1 / 6 - 1e-9, 1 / 6 + 1e-9]]))
    mismatches = sum((l1_nodal_eta(5, e) is not None) != (e >= 1 / 6) for e in eps_grid)
    n2_found = 0
    for e in np.linspace(0.01, 1.0, 100):
        for om in np.linspace(math.pi / 2 + 1e-3, 3 * math.pi / 2 - 1e-3, 60):
            if l2_nodal_eta_squared(2, e, om) is not None:
                n2_found += 1
    bad = mismatches + n2_found
    return (bad == 0, bad, 0,
            f"N=5 threshold mismatches {mismatches}/{eps_grid.size}; N=2 cos(Omega)<0 nodal hits {n2_found}")


def _figure1(seed: int, time_limit: float = 1.0):
    t0 = time.perf_counter()
    problems = []
    for N in (3, 4, 5, 6):
        if f_eta(0.0, N) != -1.0:
            problems.append(f"f(0,{N}) != -1")
        if not f_eta(1.0, N) > 0:
            problems.append(f"f(1,{N}) <= 0")
    table = figure1_data((3, 4, 5, 6))
    parsed = parse_figure1_csv(figure1_csv(table))
    worst = 0.0
    for N in (3, 4, 5, 6):
        roots = [r for n, r in parsed.roots if n == N]
        if len(roots) != 1 or not 0 < roots[0] < 1:
            problems.append(f"N={N}: roots {roots}")
            continue
        worst = max(worst, abs(f_eta(roots[0], N)))
        if len(sign_changes([f for _, f in parsed.curve(N)])) != 1:
            problems.append(f"N={N}: curve does not change sign exactly once")
    elapsed = time.perf_counter() - t0
    ok = not problems and worst < 1e-12 and elapsed < time_limit
    detail = f"max root residual {worst:.1e}, {elapsed:.3f} s"
    if problems:
        detail += "; " + "; ".join(problems)
    return ok, worst, 1e-12, detail


def interferometer_cases(seed: int):
    """``(label, N, rho_0, path, n, m, epsilon)`` tuples; ``epsilon`` is None for random states."""
    rng = np.random.default_rng([seed, 9])
    out = []
    for N, eps in ((2, 1.0), (2, 0.6), (3, 0.5), (4, 0.5), (4, 0.2), (5, 0.8), (3, 1.0), (6, 0.35)):
        n, m = (int(x) for x in rng.choice(N, size=2, replace=False))
        path = random_block_path(rng, N, n, m)
        out.append((f"pseudopure N={N} eps={eps} ({n},{m})", N, pseudopure_density(N, eps), path, n, m, eps))
    for N in (3, 4):
        rho = random_density(rng, N)
        out.append((f"random N={N} (0,1)", N, rho, random_schedule(rng, N), 0, 1, None))
    return out


def _interferometry(seed: int):
    worst_shift, worst_circuit, qubit_shift = 0.0, 0.0, float("nan")
    cases = interferometer_cases(seed)
    for label, N, rho0, path, n, m, eps in cases:
        traj = compute_trajectory(path)
        w_family = rho0.conjugated(np.linalg.matrix_power(cyclic_shift_unitary(rho0.basis), n))
        if eps is not None:
            engine = mixed_offdiagonal_phase_degenerate(path, rho0, (n, m), trajectory=traj)
            u_par, _ = build_parallel_family(path, w_family, trajectory=traj)
            pur = purify_pseudopure(N, eps, n)
            basis = OrthonormalBasis.computational(N)
        else:
            engine = mixed_offdiagonal_phase_nondeg(path, rho0, (n, m), trajectory=traj)
            u_par = parallel_transport_unitary(path, w_family.basis, trajectory=traj)
            pur = purify_density(w_family)
            basis = w_family.basis
        ops = l2_arm_operators(u_par, basis, n, m)
        pts = interferogram(pur, *ops)
        circ = conditional_circuit_readout(pur, *ops)
        fit = fit_interferogram(pts)
        worst_shift = max(worst_shift, angle_distance(fit.shift, float(np.angle(engine.raw_trace))))
        i_arm = np.array([p.intensity for p in pts])
        i_circ = np.array([p.intensity for p in circ])
        scale = i_arm.sum() / i_circ.sum()
        worst_circuit = max(worst_circuit, float(np.max(np.abs(scale * i_circ - i_arm))))
        if label.startswith("pseudopure N=2 eps=1.0"):
            qubit_shift = angle_distance(fit.shift, math.pi)
    ok = worst_shift < 1e-4 and worst_circuit < 1e-10 and qubit_shift < 1e-4
    return (ok, max(worst_shift, qubit_shift), 1e-4,
            f"{len(cases)} configurations, max shift error {worst_shift:.2e}, qubit |shift - pi| = {qubit_shift:.2e}, "
            f"circuit vs arms {worst_circuit:.2e}")


def _reduction_chain(seed: int, n_cases: int = 10):
    rng = np.random.default_rng([seed, 10])
    worst_deg, worst_pure, worst_sym = 0.0, 0.0, 0.0
    for _ in range(n_cases):
        dim = int(rng.integers(2, 5))
        path = random_smooth_path(rng, dim) if rng.random() < 0.5 else random_schedule(rng, dim)
        traj = compute_trajectory(path)
        rho = random_density(rng, dim)
        basis = random_basis(rng, dim)
        pure = as_pure_density(basis)
        l = int(rng.integers(1, dim + 1))
        idx = tuple(int(i) for i in rng.choice(dim, size=l, replace=False))
        a = mixed_offdiagonal_phase_nondeg(path, rho, idx, trajectory=traj)
        b = mixed_offdiagonal_phase_degenerate(path, rho, idx, trajectory=traj)
        worst_deg = max(worst_deg, abs(a.raw_trace - b.raw_trace))
        p = pure_offdiagonal_phase(path, basis, idx, trajectory=traj)
        q = mixed_offdiagonal_phase_nondeg(path, pure, idx, trajectory=traj)
        if p.defined and q.defined:
            worst_pure = max(worst_pure, abs(p.phase - q.phase))
        nm = mixed_offdiagonal_phase_degenerate(path, rho, (0, 1), trajectory=traj)
        mn = mixed_offdiagonal_phase_degenerate(path, rho, (1, 0), trajectory=traj)
        worst_sym = max(worst_sym, abs(nm.raw_trace - mn.raw_trace))
    ok = worst_deg < 1e-8 and worst_pure < 1e-8 and worst_sym < 1e-12
    return (ok, max(worst_deg, worst_pure), 1e-8,
            f"degenerate vs nondegenerate {worst_deg:.1e}, nondegenerate vs pure {worst_pure:.1e}, "
            f"nm vs mn {worst_sym:.1e}")


CRITERIA = {
    1: ("qubit pi shift", _qubit_pi_shift),
    2: ("random mixture freeze", _random_mixture_freeze),
    3: ("qubit mixed closed form", _bloch_closed_form),
    4: ("pure limit", _pure_limit),
    5: ("gauge invariance", _gauge_invariance),
    6: ("l=2 sign law", _gamma2_sign_law),
    7: ("nodal bounds", _nodal_bounds),
    8: ("figure 1 roots", _figure1),
    9: ("interferometric consistency", _interferometry),
    10: ("reduction chain", _reduction_chain),
}

# wall-clock limits
TIMED_CRITERIA = (1, 8)


def run_criterion(number: int, seed: int = 0) -> CriterionResult:
    name, fn = CRITERIA[number]
    return _timed(number, name, fn, seed)


def run_selftest(criteria=None, seed: int = 0, workers: int = 1) -> list[CriterionResult]:
    """Run the requested criteria; results come back in criterion order.

    Criteria with a runtime bound always run alone, before the worker pool
    starts, so thread contention cannot inflate their wall-clock time.
    """
    numbers = sorted(CRITERIA) if criteria is None else sorted(criteria)
    if workers <= 1:
        return [run_criterion(k, seed) for k in numbers]
    results = {k: run_criterion(k, seed) for k in numbers if k in TIMED_CRITERIA}
    rest = [k for k in numbers if k not in results]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results.update(zip(rest, pool.map(lambda k: run_criterion(k, seed), rest)))
    return [results[k] for k in numbers]
