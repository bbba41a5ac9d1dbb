"""Acceptance checks: exact oracles plus statistical and dynamical property
suites, each pinned to its tolerance.

Every check is deterministic (fixed seeds) and returns a CheckResult; the CLI
``verify`` subcommand and the acceptance test module both run this registry.
Checks marked ``soft`` are reported but do not gate the exit status.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import chi2

from . import bands as bd
from . import dynamics as dyn
from . import field as fd
from . import fiber as fb
from . import sampling as sp
from .errors import ValidationError

__all__ = ["CheckResult", "CRITERIA", "run_all", "criterion_names"]

SUITE_SEEDS = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    details: str
    soft: bool = False


def _lattice_aligned_grid(half: float, h: float) -> fd.Grid1D:
    n = int(round(2.0 * half / h)) + 1
    return fd.Grid1D(-half, half, n)


# ---------------------------------------------------------------------------
# shared scenarios (built once, reused by several criteria)
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _landau_packet() -> dyn.FiberedWavePacket:
    # k-grid on the h-lattice keeps the discrete spectrum exactly k-independent
    grid = _lattice_aligned_grid(16.0, 0.0125)
    f = sp.sample_field(fd.Constant(1.0), grid)
    sw = bd.sweep_fibers(f, bd.KGrid(-2.0, 2.0, 161), 0, keep_vectors=True)
    return dyn.prepare_packet(sw, dyn.PacketSpec(k_center=0.0, sigma_k=0.25))


@lru_cache(maxsize=None)
def _snake_packet() -> dyn.FiberedWavePacket:
    grid = _lattice_aligned_grid(20.0, 0.02)
    f = sp.sample_field(fd.Step(-1.0, 1.0), grid)
    sw = bd.sweep_fibers(f, bd.KGrid(-4.0, 4.0, 121), 8, keep_vectors=True)
    return dyn.prepare_packet(sw, dyn.PacketSpec(
        k_center=0.0, sigma_k=0.5, profile="gaussian_x1", x1_sigma=1.0))


@lru_cache(maxsize=None)
def _poisson_packet() -> dyn.FiberedWavePacket:
    grid = _lattice_aligned_grid(20.0, 0.02)
    f = sp.sample_field(fd.Poisson(1.0, fd.BumpProfile(1.0, 0.5)), grid, seed=11)
    sw = bd.sweep_fibers(f, bd.KGrid(-4.0, 4.0, 121), 8, keep_vectors=True)
    return dyn.prepare_packet(sw, dyn.PacketSpec(
        k_center=0.0, sigma_k=0.5, profile="gaussian_x1", x1_sigma=1.0))


@lru_cache(maxsize=None)
def _tanh_packet() -> dyn.FiberedWavePacket:
    grid = _lattice_aligned_grid(20.0, 0.02)
    f = sp.sample_field(fd.Tanh(1.0, 3.0, 2.0), grid)
    sw = bd.sweep_fibers(f, bd.KGrid(-6.0, 6.0, 121), 5, keep_vectors=True)
    return dyn.prepare_packet(sw, dyn.PacketSpec(
        k_center=0.0, sigma_k=0.5, profile="gaussian_x1", x1_sigma=0.7))


def _field_suite() -> list[tuple[str, fd.FieldSpec, tuple[int | None, ...]]]:
    gauss = fd.Gaussian(1.0, fd.GaussianKernel(0.25, 1.0))
    return [
        ("constant", fd.Constant(1.0), (None,)),
        ("step", fd.Step(-1.0, 1.0), (None,)),
        ("tanh", fd.Tanh(1.0, 3.0, 2.0), (None,)),
        ("gaussian", gauss, SUITE_SEEDS),
        ("squared_gaussian",
         fd.SquaredGaussian(1.0, fd.Gaussian(0.5, fd.GaussianKernel(0.25, 1.0))),
         SUITE_SEEDS),
        ("poisson", fd.Poisson(1.0, fd.BumpProfile(1.0, 0.5)), SUITE_SEEDS),
    ]


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def check_landau_levels(threads: int | None = None) -> CheckResult:
    """Lowest six levels of the constant unit field at three wave numbers."""
    t0 = time.perf_counter()
    grid = fd.Grid1D(-30.0, 30.0, 6001)
    f = sp.sample_field(fd.Constant(1.0), grid)
    a = fd.vector_potential(f)
    exact = np.arange(6) + 0.5
    worst = 0.0
    for k in (-3.0, 0.0, 3.0):
        sol = fb.solve_fiber(fb.assemble_fiber(a, k), 5)
        worst = max(worst, float(np.max(np.abs(sol.eigenvalues - exact))))
    elapsed = time.perf_counter() - t0
    passed = worst <= 1e-3 and elapsed < 10.0
    return CheckResult(
        "landau_levels", passed,
        f"max |eps_n - (n+1/2)| = {worst:.2e} (tol 1e-3), runtime {elapsed:.2f}s (< 10s)")


def check_flatness_classification(threads: int | None = None) -> CheckResult:
    """Constant field: all bands flat; tanh field: none flat, band 0 wide."""
    grid = fd.Grid1D(-30.0, 30.0, 6001)
    f = sp.sample_field(fd.Constant(1.0), grid)
    funcs = bd.sweep(f, bd.KGrid(-3.0, 3.0, 101), 5, threads=threads)
    landau = bd.assemble_bands(funcs)
    landau_ok = all(b.flat for b in landau.intervals)

    grid2 = fd.Grid1D(-20.0, 20.0, 4001)
    f2 = sp.sample_field(fd.Tanh(1.0, 3.0, 2.0), grid2)
    funcs2 = bd.sweep(f2, bd.KGrid(-14.0, 40.0, 109), 3, threads=threads)
    iwa = bd.assemble_bands(funcs2)
    iwa_ok = not any(b.flat for b in iwa.intervals)
    width0 = iwa.intervals[0].bandwidth
    passed = landau_ok and iwa_ok and width0 >= 0.9
    return CheckResult(
        "flatness_classification", passed,
        f"constant-field flats {[b.flat for b in landau.intervals]}, "
        f"tanh flats {[b.flat for b in iwa.intervals]}, "
        f"tanh band-0 width {width0:.3f} (>= 0.9)")


def check_group_velocity_bound(threads: int | None = None) -> CheckResult:
    """(d eps/dk)^2 < 2 eps at every computed point of the whole field suite."""
    grid = fd.Grid1D(-15.0, 15.0, 3001)
    margins = []
    points = 0
    for name, spec, seeds in _field_suite():
        # the step field beyond k ~ 5 forms tunnelling doublets too close to
        # resolve; its window stays below that regime
        kg = (bd.KGrid(-6.0, 4.0, 21) if name == "step" else bd.KGrid(-8.0, 8.0, 21))
        for seed in seeds:
            f = sp.sample_field(spec, grid, seed)
            with warnings.catch_warnings():
                # wall-marginal fibers only raise energies (Dirichlet), which
                # cannot break this inequality; the discrete bound is exact
                warnings.simplefilter("ignore")
                sw = bd.sweep_fibers(f, kg, 5, threads=threads)
            margins.append(float(np.min(2.0 * sw.energies - sw.velocities**2)))
            points += sw.energies.size
    worst = min(margins)
    passed = worst >= fb.VELOCITY_GUARD
    return CheckResult(
        "group_velocity_bound", passed,
        f"min margin 2 eps - (d eps/dk)^2 = {worst:.3e} over {points} computed "
        f"(n, k) points (guard {fb.VELOCITY_GUARD:g}), zero violations required")


def check_feynman_hellmann(threads: int | None = None) -> CheckResult:
    """Diagonal matrix-element slope against the central finite difference."""
    grid = fd.Grid1D(-20.0, 20.0, 4001)
    delta = 1e-4
    worst = 0.0
    cases = [(fd.Tanh(1.0, 3.0, 2.0), None),
             (fd.Gaussian(1.0, fd.GaussianKernel(0.25, 1.0)), 3)]
    for spec, seed in cases:
        f = sp.sample_field(spec, grid, seed)
        a = fd.vector_potential(f)
        for k in (-2.0, 0.0, 1.5, 4.0):
            sol = fb.solve_fiber(fb.assemble_fiber(a, k), 5)
            fh = fb.fh_velocity(sol, a)
            ep = fb.solve_fiber(fb.assemble_fiber(a, k + delta), 5).eigenvalues
            em = fb.solve_fiber(fb.assemble_fiber(a, k - delta), 5).eigenvalues
            worst = max(worst, float(np.max(np.abs(fh - (ep - em) / (2 * delta)))))
    return CheckResult(
        "feynman_hellmann", worst <= 1e-4,
        f"max |FH - central difference| = {worst:.2e} (tol 1e-4, dk = {delta:g})")


def check_snake_analytic_point(threads: int | None = None) -> CheckResult:
    """Step field sign(x): ground energy and slope at k = 0.

    The fiber at k = 0 is exactly harmonic, so eps_0(0) = 1/2 and the slope is
    -<|x|> under the harmonic ground-state density, i.e. -1/sqrt(pi) =
    -0.564190 (quadrature oracle).  The stated target -sqrt(2/pi) = -0.797885
    instead evaluates <|x|> under a unit-variance Gaussian, which is not the
    ground-state density; it cannot be met by a correct solver.  The check
    asserts the stated target and is expected to fail; the oracle value is
    reported alongside.
    """
    grid = _lattice_aligned_grid(25.0, 0.00125)
    f = sp.sample_field(fd.Step(-1.0, 1.0), grid)
    a = fd.vector_potential(f)
    sol = fb.solve_fiber(fb.assemble_fiber(a, 0.0), 0)
    eps0 = float(sol.eigenvalues[0])
    vel0 = float(fb.fh_velocity(sol, a)[0])
    stated = -math.sqrt(2.0 / math.pi)
    oracle = -1.0 / math.sqrt(math.pi)
    energy_ok = abs(eps0 - 0.5) <= 1e-3
    stated_ok = abs(vel0 - stated) <= 1e-3
    oracle_dev = abs(vel0 - oracle)
    return CheckResult(
        "snake_analytic_point", energy_ok and stated_ok,
        f"eps0(0) = {eps0:.6f} (target 0.5 +- 1e-3: {'ok' if energy_ok else 'FAIL'}); "
        f"slope = {vel0:.6f} vs stated target {stated:.6f} "
        f"({'ok' if stated_ok else 'FAIL'}); quadrature oracle -1/sqrt(pi) = "
        f"{oracle:.6f} agrees to {oracle_dev:.1e}")


def check_sign_definite_lower_bound(threads: int | None = None) -> CheckResult:
    """eps_n >= (n + 1/2) b_minus for squared-Gaussian fields (b_minus = 1)."""
    spec = fd.SquaredGaussian(1.0, fd.Gaussian(0.5, fd.GaussianKernel(0.25, 1.0)))
    grid = fd.Grid1D(-15.0, 15.0, 3001)
    floor = (np.arange(6) + 0.5)[:, None]
    worst = np.inf
    for seed in SUITE_SEEDS:
        f = sp.sample_field(spec, grid, seed)
        with warnings.catch_warnings():
            # Dirichlet truncation only raises energies, never below the bound
            warnings.simplefilter("ignore")
            sw = bd.sweep_fibers(f, bd.KGrid(-8.0, 8.0, 41), 5, threads=threads)
        worst = min(worst, float(np.min(sw.energies - floor)))
    return CheckResult(
        "sign_definite_lower_bound", worst >= -1e-3,
        f"min margin eps_n - (n+1/2) = {worst:.4f} over {len(SUITE_SEEDS)} seeds (tol -1e-3)")


def check_shift_covariance(threads: int | None = None) -> CheckResult:
    """eps_n(k) of the shifted field against eps_n(k + a(z)) of the original."""
    grid = fd.Grid1D(-16.0, 16.0, 3201)
    f = sp.sample_field(fd.Poisson(1.0, fd.BumpProfile(1.0, 0.5)), grid, seed=5)
    dev = bd.verify_shift_covariance(f, 2.0, bd.KGrid(-3.0, 3.0, 25), 3,
                                     threads=threads)
    return CheckResult(
        "shift_covariance", dev <= 1e-3,
        f"max |eps_n(k)(shifted) - eps_n(k + a(z))| = {dev:.2e} at z = 2.0 (tol 1e-3)")


def check_sampler_statistics(threads: int | None = None) -> CheckResult:
    """Poisson mean identity, Poisson count law, circulant vs KL covariance."""
    notes = []
    ok = True

    # mean of b(0) over 2000 seeds vs rho * integral(u) = 1
    spec = fd.Poisson(1.0, fd.BumpProfile(1.0, 0.5))
    grid = fd.Grid1D(-4.0, 4.0, 161)
    i0 = grid.index_of(0.0)
    n_mean = 2000
    b0 = np.array([sp.sample_field(spec, grid, s).values[i0] for s in range(n_mean)])
    dev = abs(b0.mean() - spec.rho * spec.profile.integral)
    band = 3.0 * b0.std(ddof=1) / math.sqrt(n_mean)
    ok &= dev <= band
    notes.append(f"poisson mean dev {dev:.4f} <= 3 sigma band {band:.4f}")

    # counts in [-2, 2] over 1e4 seeds vs Poisson(4), chi-square at 1%
    lam = 4.0
    counts = np.array([
        np.count_nonzero(np.abs(sp.poisson_points_for(spec, grid, s)) <= 2.0)
        for s in range(10000)])
    kmax = int(counts.max())
    probs = np.array([lam**m / math.factorial(m) * math.exp(-lam)
                      for m in range(kmax + 1)])
    expected = probs * counts.size
    observed = np.bincount(counts, minlength=kmax + 1).astype(float)
    expected[-1] += counts.size * (1.0 - probs.sum())  # tail mass
    while expected[-1] < 5 and expected.size > 2:
        expected[-2] += expected[-1]
        observed[-2] += observed[-1]
        expected, observed = expected[:-1], observed[:-1]
    stat = float(np.sum((observed - expected) ** 2 / expected))
    crit = float(chi2.ppf(0.99, expected.size - 1))
    ok &= stat <= crit
    notes.append(f"poisson count chi2 {stat:.1f} <= {crit:.1f} (1% level)")

    # circulant vs KL covariance at 5 lags, joint 3 sigma
    gspec = fd.Gaussian(2.0, fd.GaussianKernel(1.0, 1.0))
    ggrid = fd.Grid1D(-8.0, 8.0, 257)
    interval, modes, n_mc = (-6.0, 6.0), 48, 10000
    basis = sp.mercer_eigenpairs(gspec.covariance, ggrid, interval, modes)
    j0 = ggrid.index_of(0.0)
    lag_idx = [ggrid.index_of(l) for l in (0.0, 0.5, 1.0, 2.0, 3.0)]
    pc = np.empty((n_mc, len(lag_idx)))
    pk = np.empty((n_mc, len(lag_idx)))
    for s in range(n_mc):
        bc = sp.sample_gaussian_circulant(gspec, ggrid, s).values
        bk = sp.sample_gaussian_kl(gspec, ggrid, interval, modes, s, basis=basis).values
        pc[s] = (bc[j0] - gspec.mu) * (bc[lag_idx] - gspec.mu)
        pk[s] = (bk[j0] - gspec.mu) * (bk[lag_idx] - gspec.mu)
    diff = np.abs(pc.mean(axis=0) - pk.mean(axis=0))
    joint = 3.0 * np.sqrt(pc.std(axis=0, ddof=1) ** 2 / n_mc
                          + pk.std(axis=0, ddof=1) ** 2 / n_mc)
    ok &= bool(np.all(diff <= joint))
    notes.append(f"circulant-vs-KL lag devs {np.array2string(diff, precision=4)} "
                 f"within 3 sigma {np.array2string(joint, precision=4)}")

    return CheckResult("sampler_statistics", bool(ok), "; ".join(notes))


def check_unitarity_energy(threads: int | None = None) -> CheckResult:
    """Norm and energy conservation of the band-space evolution."""
    packet = _snake_packet()
    e0 = dyn.energy_half_norm(packet)
    drift_n, drift_e = 0.0, 0.0
    for t in (0.5, 13.0, 50.0, 200.0):
        pt = dyn.evolve(packet, t)
        drift_n = max(drift_n, abs(dyn.packet_norm(pt) - 1.0))
        drift_e = max(drift_e, abs(dyn.energy_half_norm(pt) - e0) / e0)
    passed = drift_n <= 1e-10 and drift_e <= 1e-10
    return CheckResult(
        "unitarity_energy", passed,
        f"norm drift {drift_n:.2e}, energy drift {drift_e:.2e} over T = 200 (tol 1e-10)")


def check_dynamical_localization(threads: int | None = None) -> CheckResult:
    """sup_t ||Q1 psi_t|| below the conserved-quantity bound, two fields."""
    notes = []
    ok = True
    for name, packet in (("snake", _snake_packet()), ("poisson", _poisson_packet())):
        bound = dyn.localization_bound(packet)
        series = dyn.simulate(packet, horizon=200.0, n_times=32)
        sup_q1 = float(series.q1_moment.max())
        ok &= sup_q1 <= bound
        notes.append(f"{name}: sup ||Q1 psi_t|| = {sup_q1:.3f} <= bound {bound:.3f}")
    return CheckResult("dynamical_localization", bool(ok), "; ".join(notes))


def check_ballistic_transport(threads: int | None = None) -> CheckResult:
    """Interpolating-field packet moves linearly; constant-field residual decays as 1/t."""
    notes = []
    packet = _tanh_packet()
    vdata = dyn.velocity_operator_data(packet.sweep)
    ladder = [dyn.ballistic_residual(packet, t, vdata) for t in (10.0, 20.0, 40.0, 80.0)]
    decreasing = all(a > b for a, b in zip(ladder, ladder[1:]))
    notes.append("tanh residuals " + ", ".join(f"{r:.4f}" for r in ladder)
                 + f" strictly decreasing: {decreasing}")

    ts = np.linspace(50.0, 200.0, 31)
    q2_0 = dyn.q2_mean(packet)
    q2s = np.array([
        q2_0 + t * float((np.sum(np.conj(packet.coeffs)
                                 * dyn.time_averaged_velocity_apply(packet, float(t), vdata).coeffs)
                          * packet.dk).real)
        for t in ts])
    design = np.vstack([ts, np.ones_like(ts)]).T
    coef, rss, *_ = np.linalg.lstsq(design, q2s, rcond=None)
    ss_tot = float(np.sum((q2s - q2s.mean()) ** 2))
    r2 = 1.0 - (float(rss[0]) if len(rss) else 0.0) / ss_tot
    notes.append(f"<Q2>(t) linear fit slope {coef[0]:.4f}, R^2 = {r2:.6f} (> 0.99)")

    landau = _landau_packet()
    q2n = dyn.q2_norm(landau)
    landau_ok = True
    for t in (10.0, 20.0, 40.0, 80.0):
        landau_ok &= dyn.ballistic_residual(landau, t) <= q2n / t + 1e-6
    notes.append(f"constant-field residual <= ||Q2 psi0||/t + 1e-6: {landau_ok}")

    passed = decreasing and r2 > 0.99 and landau_ok
    return CheckResult("ballistic_transport", bool(passed), "; ".join(notes))


def check_velocity_operator_bound(threads: int | None = None) -> CheckResult:
    """||V_inf psi|| < sqrt(2) ||H^(1/2) psi|| for every prepared packet."""
    notes = []
    ok = True
    packets = [("landau", _landau_packet()), ("snake", _snake_packet()),
               ("poisson", _poisson_packet()), ("tanh", _tanh_packet())]
    for name, p in packets:
        v = dyn.packet_norm(dyn.asymptotic_velocity_apply(p))
        lim = math.sqrt(2.0) * dyn.energy_half_norm(p)
        ok &= v < lim
        notes.append(f"{name}: {v:.3e} < {lim:.3e}")
    v_landau = dyn.packet_norm(dyn.asymptotic_velocity_apply(_landau_packet()))
    ok &= v_landau <= 1e-8
    notes.append(f"constant-field ||V_inf psi|| = {v_landau:.1e} (<= 1e-8)")
    return CheckResult("velocity_operator_bound", bool(ok), "; ".join(notes))


def _inf_band0(field: fd.FieldRealization,
               carried: set[float]) -> tuple[float, set[float]]:
    a = fd.vector_potential(field)
    lo, hi = float(a.values.min()), float(a.values.max())
    ks = {float(k) for k in np.arange(math.ceil(lo), math.floor(hi) + 0.5, 2.0)}
    ks |= {k for k in carried if lo <= k <= hi}

    def e0(k: float) -> float:
        return float(fb.solve_fiber(fb.assemble_fiber(a, k), 0).eigenvalues[0])

    values = {k: e0(k) for k in sorted(ks)}
    best = min(values, key=values.get)
    for dk in (0.25, 0.05):
        for k in np.arange(best - 5 * dk, best + 5 * dk + dk / 2, dk):
            k = float(k)
            if lo <= k <= hi and k not in values:
                values[k] = e0(k)
        best = min(values, key=values.get)
    return min(values.values()), set(values)


def check_spectrum_filling_trend(threads: int | None = None) -> CheckResult:
    """Soft report: inf_k eps_0 does not increase as the window doubles.

    One realization per seed is drawn on the largest window and restricted,
    so the trend rides on Dirichlet domain monotonicity; the limit (spectrum
    down to zero) is not reproducible on a desk-scale box and not asserted.
    """
    spec = fd.Gaussian(1.0, fd.GaussianKernel(1.0, 1.0))
    h = 0.05
    halves = (25.0, 50.0, 100.0)
    mins = {half: [] for half in halves}
    for seed in range(10):
        big = fd.Grid1D(-halves[-1], halves[-1], int(round(2 * halves[-1] / h)) + 1)
        f_big = sp.sample_field(spec, big, seed)
        carried: set[float] = set()
        for half in halves:
            f = (fd.restrict_field(f_big, -half, half) if half < halves[-1] else f_big)
            m, ks = _inf_band0(f, carried)
            carried |= ks
            mins[half].append(m)
    series = [min(mins[half]) for half in halves]
    monotone = all(x >= y - 1e-9 for x, y in zip(series, series[1:]))
    return CheckResult(
        "spectrum_filling_trend", monotone,
        "min over 10 seeds of inf_k eps_0 at window lengths (50, 100, 200): "
        + ", ".join(f"{v:.4f}" for v in series)
        + f"; non-increasing: {monotone}",
        soft=True)


def check_discretization_order(threads: int | None = None) -> CheckResult:
    """Richardson ratio of the constant-field ground-energy error under h -> h/2."""
    def eps0(h: float) -> float:
        grid = _lattice_aligned_grid(12.0, h)
        f = sp.sample_field(fd.Constant(1.0), grid)
        a = fd.vector_potential(f)
        return float(fb.solve_fiber(fb.assemble_fiber(a, 0.0), 0).eigenvalues[0])

    err_h = eps0(0.02) - 0.5
    err_h2 = eps0(0.01) - 0.5
    ratio = err_h / err_h2
    return CheckResult(
        "discretization_order", 3.5 <= ratio <= 4.5,
        f"error ratio err(h)/err(h/2) = {ratio:.3f} (required in [3.5, 4.5]; "
        f"err(h) = {err_h:.2e})")


CRITERIA: list[tuple[str, object]] = [
    ("landau_levels", check_landau_levels),
    ("flatness_classification", check_flatness_classification),
    ("group_velocity_bound", check_group_velocity_bound),
    ("feynman_hellmann", check_feynman_hellmann),
    ("snake_analytic_point", check_snake_analytic_point),
    ("sign_definite_lower_bound", check_sign_definite_lower_bound),
    ("shift_covariance", check_shift_covariance),
    ("sampler_statistics", check_sampler_statistics),
    ("unitarity_energy", check_unitarity_energy),
    ("dynamical_localization", check_dynamical_localization),
    ("ballistic_transport", check_ballistic_transport),
    ("velocity_operator_bound", check_velocity_operator_bound),
    ("spectrum_filling_trend", check_spectrum_filling_trend),
    ("discretization_order", check_discretization_order),
]


def criterion_names() -> list[str]:
    return [name for name, _ in CRITERIA]


def run_all(names: list[str] | None = None,
            threads: int | None = None) -> list[CheckResult]:
    """Run the selected (default: all) checks in registry order."""
    table = dict(CRITERIA)
    selected = criterion_names() if names is None else names
    results = []
    for name in selected:
        if name not in table:
            raise ValidationError(f"unknown acceptance criterion {name!r}")
        results.append(table[name](threads=threads))
    return results
