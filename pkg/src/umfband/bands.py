"""Energy-band structure from a sweep of fiber solves over a k-grid.

The sweep is a parallel map over k-indices with a deterministic ordered
reduce: results are stored by index, so the outcome does not depend on worker
scheduling.  Band intervals are inner approximations (finite box, finite
k-window); the k-window used is recorded in the band metadata.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np

from .errors import ValidationError
from .fiber import (
    ADEQUACY_FACTOR,
    VELOCITY_GUARD,
    EigenSolution,
    assemble_fiber,
    fh_velocity,
    solve_fiber,
)
from .field import FieldRealization, VectorPotential, shift_field, restrict_field, vector_potential

__all__ = [
    "KGrid",
    "default_kgrid",
    "BandFunction",
    "BandInterval",
    "BandStructure",
    "SpectrumClassification",
    "SweepResult",
    "sweep_fibers",
    "sweep",
    "assemble_bands",
    "spectrum_sets",
    "velocity_bands",
    "check_velocity_bounds",
    "verify_shift_covariance",
]

#: default relative tolerance below which a band counts as flat
FLAT_TOL = 1e-6


@dataclass(frozen=True)
class KGrid:
    """Uniform wave-number grid k_j."""

    k_min: float
    k_max: float
    n_k: int

    def __post_init__(self) -> None:
        if not self.k_min < self.k_max:
            raise ValidationError("need k_min < k_max")
        if self.n_k < 2:
            raise ValidationError("need at least 2 k-points")

    @property
    def dk(self) -> float:
        return (self.k_max - self.k_min) / (self.n_k - 1)

    @cached_property
    def values(self) -> np.ndarray:
        k = np.linspace(self.k_min, self.k_max, self.n_k)
        k.setflags(write=False)
        return k


def default_kgrid(a: VectorPotential, target_energy: float, n_k: int = 101) -> KGrid:
    """k-window covering the range of a over the box plus a turning-point margin.

    Fibers with k outside range(a) by more than sqrt(2 * target_energy) have
    their potential minimum above the target and add nothing below it.
    """
    margin = math.sqrt(2.0 * target_energy)
    return KGrid(float(a.values.min()) - margin, float(a.values.max()) + margin, n_k)


@dataclass(frozen=True, eq=False)
class BandFunction:
    """k-resolved energies and group velocities of one band."""

    n: int
    kgrid: KGrid
    energies: np.ndarray
    velocities: np.ndarray


@dataclass(frozen=True)
class BandInterval:
    n: int
    lower: float
    upper: float
    bandwidth: float
    flat: bool


@dataclass(frozen=True, eq=False)
class BandStructure:
    intervals: tuple[BandInterval, ...]
    tol_flat: float
    metadata: dict = dc_field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class SpectrumClassification:
    """Computed ac intervals (merged) and pure-point energies."""

    ac_intervals: tuple[tuple[float, float], ...]
    pp_points: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Raw output of a fiber sweep; eigenvectors retained only on request."""

    field: FieldRealization
    potential: VectorPotential
    kgrid: KGrid
    n_max: int
    energies: np.ndarray           # (n_max + 1, n_k)
    velocities: np.ndarray         # (n_max + 1, n_k)
    eigenvectors: np.ndarray | None  # (n_k, n_points, n_max + 1)
    trusted: np.ndarray            # (n_k,) wall-adequacy flag per fiber

    def band_functions(self) -> list[BandFunction]:
        return [
            BandFunction(n, self.kgrid, self.energies[n].copy(), self.velocities[n].copy())
            for n in range(self.n_max + 1)
        ]

    def solution(self, j: int) -> EigenSolution:
        if self.eigenvectors is None:
            raise ValidationError("sweep was run without keep_vectors=True")
        return EigenSolution(self.field.grid, float(self.kgrid.values[j]),
                             self.energies[:, j].copy(), self.eigenvectors[j])


def sweep_fibers(field: FieldRealization, kgrid: KGrid, n_max: int,
                 threads: int | None = None, keep_vectors: bool = False) -> SweepResult:
    """Solve every fiber on the k-grid; deterministic regardless of thread count."""
    a = vector_potential(field)
    ks = kgrid.values
    n_bands = n_max + 1
    energies = np.empty((n_bands, kgrid.n_k))
    velocities = np.empty((n_bands, kgrid.n_k))
    vectors = (np.empty((kgrid.n_k, field.grid.n_points, n_bands))
               if keep_vectors else None)
    trusted = np.empty(kgrid.n_k, dtype=bool)

    def run(j: int) -> None:
        op = assemble_fiber(a, float(ks[j]))
        sol = solve_fiber(op, n_max)
        energies[:, j] = sol.eigenvalues
        velocities[:, j] = fh_velocity(sol, a)
        if vectors is not None:
            vectors[j] = sol.eigenvectors
        v_wall = min(op.diagonal[0], op.diagonal[-1]) - 1.0 / field.grid.h**2
        trusted[j] = v_wall >= ADEQUACY_FACTOR * sol.eigenvalues[-1]

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, range(kgrid.n_k)))
    else:
        for j in range(kgrid.n_k):
            run(j)

    if not np.all(trusted):
        bad = int(np.count_nonzero(~trusted))
        warnings.warn(
            f"{bad} of {kgrid.n_k} fibers are wall-marginal (edge potential below "
            f"{ADEQUACY_FACTOR:g}x the highest computed energy); band limits from "
            "those k-points are upper bounds",
            stacklevel=2,
        )
    return SweepResult(field, a, kgrid, n_max, energies, velocities, vectors, trusted)


def sweep(field: FieldRealization, kgrid: KGrid, n_max: int,
          threads: int | None = None) -> list[BandFunction]:
    """Band functions eps_n(k_j) and d eps_n/dk(k_j) for n <= n_max."""
    return sweep_fibers(field, kgrid, n_max, threads=threads).band_functions()


def assemble_bands(funcs: list[BandFunction], tol_flat: float = FLAT_TOL,
                   metadata: dict | None = None) -> BandStructure:
    """Band intervals [min_j eps_n, max_j eps_n] with relative flatness flags."""
    if not funcs:
        raise ValidationError("cannot assemble bands from an empty sweep")
    intervals = []
    for f in sorted(funcs, key=lambda f: f.n):
        lower = float(f.energies.min())
        upper = float(f.energies.max())
        width = upper - lower
        flat = width <= tol_flat * max(1.0, lower)
        intervals.append(BandInterval(f.n, lower, upper, width, flat))
    meta = dict(metadata or {})
    kg = funcs[0].kgrid
    meta.setdefault("kgrid", {"k_min": kg.k_min, "k_max": kg.k_max, "n_k": kg.n_k})
    meta.setdefault("note", "inner approximations over the recorded finite k-window")
    return BandStructure(tuple(intervals), tol_flat, meta)


def spectrum_sets(bs: BandStructure) -> SpectrumClassification:
    """Union of non-flat bands (ac part, overlaps merged) and flat-band energies."""
    ac_raw = sorted((b.lower, b.upper) for b in bs.intervals if not b.flat)
    merged: list[list[float]] = []
    for lo, hi in ac_raw:
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    pp = tuple(0.5 * (b.lower + b.upper) for b in bs.intervals if b.flat)
    return SpectrumClassification(tuple((lo, hi) for lo, hi in merged), pp)


def velocity_bands(funcs: list[BandFunction]) -> list[tuple[float, float]]:
    """Per-band range of the group velocity over the k-window."""
    return [(float(f.velocities.min()), float(f.velocities.max())) for f in funcs]


def check_velocity_bounds(result: SweepResult, guard: float = VELOCITY_GUARD) -> bool:
    """Strict group-velocity bound at every computed (n, k) point."""
    return bool(np.all(result.velocities**2 <= 2.0 * result.energies - guard))


def verify_shift_covariance(field: FieldRealization, z: float, kgrid: KGrid,
                            n_max: int, threads: int | None = None) -> float:
    """Max deviation of eps_n(k) for the shifted field from eps_n(k + a(z)).

    Both sides are solved on the identical shrunk window, so the residual
    mixes discretization and window-truncation effects only.
    """
    grid = field.grid
    a_full = vector_potential(field)
    a_z = float(a_full.values[grid.index_of(z)])
    shifted = shift_field(field, z)
    base = restrict_field(field, shifted.grid.x_min, shifted.grid.x_max)

    left = sweep_fibers(shifted, kgrid, n_max, threads=threads)
    right_kgrid = KGrid(kgrid.k_min + a_z, kgrid.k_max + a_z, kgrid.n_k)
    right = sweep_fibers(base, right_kgrid, n_max, threads=threads)
    return float(np.max(np.abs(left.energies - right.energies)))
