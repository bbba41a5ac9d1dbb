"""Discretized fiber Hamiltonians H(k) = (P^2 + (k - a(x))^2) / 2 on the box.

The kinetic term uses the three-point central difference with Dirichlet walls
just outside the box, giving a symmetric tridiagonal matrix with O(h^2)
eigenvalue error.  Eigenvectors are orthonormal under the quadrature weight h
and carry a fixed sign convention so downstream matrix elements are
reproducible.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import BoxAdequacyError, NumericalError, ValidationError
from .field import Grid1D, VectorPotential

__all__ = [
    "EffectivePotential",
    "FiberOperator",
    "EigenSolution",
    "effective_potential",
    "assemble_fiber",
    "solve_fiber",
    "fh_velocity",
    "velocity_matrix",
    "velocity_bound_check",
    "suggest_resolution",
    "dump_fiber_csv",
]

#: box endpoints must dominate the target energy by this factor to avoid warnings
ADEQUACY_FACTOR = 4.0
#: relative eigenvalue gap below which a spectrum counts as numerically degenerate
DEGENERACY_RTOL = 1e-9
#: guard band for the strict group-velocity inequality
VELOCITY_GUARD = 1e-8
#: magnitude threshold for the eigenvector sign convention
SIGN_THRESHOLD = 1e-8


@dataclass(frozen=True, eq=False)
class EffectivePotential:
    """v(x_i) = (k - a(x_i))^2 / 2; non-negative, zero only where a = k."""

    grid: Grid1D
    k: float
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class FiberOperator:
    """Symmetric tridiagonal matrix of the fiber at wave number k (Dirichlet)."""

    grid: Grid1D
    k: float
    diagonal: np.ndarray
    off_diagonal: np.ndarray


@dataclass(frozen=True, eq=False)
class EigenSolution:
    """Lowest eigenpairs of one fiber; eigenvectors h-orthonormal columns."""

    grid: Grid1D
    k: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n_max(self) -> int:
        return len(self.eigenvalues) - 1


def effective_potential(a: VectorPotential, k: float) -> EffectivePotential:
    return EffectivePotential(a.grid, k, 0.5 * (k - a.values) ** 2)


def assemble_fiber(a: VectorPotential, k: float,
                   target_energy: float | None = None) -> FiberOperator:
    """Build the tridiagonal fiber matrix at wave number ``k``.

    When ``target_energy`` is given, the effective potential at the box
    endpoints is checked against it: below the target is an error (states at
    that energy would touch the wall), below ``ADEQUACY_FACTOR`` times the
    target is a warning.
    """
    grid = a.grid
    v = 0.5 * (k - a.values) ** 2
    if target_energy is not None:
        v_wall = min(v[0], v[-1])
        if v_wall < target_energy:
            raise BoxAdequacyError(
                f"effective potential at the box edge ({v_wall:.3g}) is below the "
                f"target energy {target_energy:.3g} at k = {k:.6g}; enlarge the box"
            )
        if v_wall < ADEQUACY_FACTOR * target_energy:
            warnings.warn(
                f"box is marginal at k = {k:.6g}: v(edge) = {v_wall:.3g} < "
                f"{ADEQUACY_FACTOR:g} * target {target_energy:.3g}",
                stacklevel=2,
            )
    h = grid.h
    diagonal = 1.0 / h**2 + v
    off_diagonal = np.full(grid.n_points - 1, -0.5 / h**2)
    return FiberOperator(grid, k, diagonal, off_diagonal)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # first component of magnitude > SIGN_THRESHOLD is made positive
    for col in range(vectors.shape[1]):
        v = vectors[:, col]
        idx = np.argmax(np.abs(v) > SIGN_THRESHOLD)
        if v[idx] < 0:
            vectors[:, col] = -v
    return vectors


def solve_fiber(op: FiberOperator, n_max: int) -> EigenSolution:
    """Lowest ``n_max + 1`` eigenpairs of the fiber matrix.

    Eigenvalues must come out strictly increasing and strictly positive;
    a collision within DEGENERACY_RTOL indicates a discretization fault.
    """
    n = op.grid.n_points
    if n_max < 0 or n_max + 1 > n - 2:
        raise ValidationError(f"n_max = {n_max} needs n_points >= n_max + 3, got {n}")
    try:
        w, v = eigh_tridiagonal(op.diagonal, op.off_diagonal,
                                select="i", select_range=(0, n_max))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(
            f"tridiagonal eigensolver failed at k = {op.k:.6g} "
            f"(n = {n}, h = {op.grid.h:.3g}): {exc}"
        ) from exc
    if w[0] <= 0.0:
        raise NumericalError(f"fiber at k = {op.k:.6g} lost strict positivity: e0 = {w[0]:.3e}")
    gaps = np.diff(w) / np.maximum(np.abs(w[:-1]), 1e-300)
    if np.any(gaps < DEGENERACY_RTOL):
        raise NumericalError(
            f"near-degenerate fiber eigenvalues at k = {op.k:.6g} "
            f"(relative gap {gaps.min():.3e}); refine the grid"
        )
    vectors = _fix_signs(v) / np.sqrt(op.grid.h)
    return EigenSolution(op.grid, op.k, w, vectors)


def fh_velocity(sol: EigenSolution, a: VectorPotential) -> np.ndarray:
    """Band velocities d eps_n / dk = h * sum_i phi_n(x_i)^2 (k - a_i).

    For the discrete matrix this diagonal expectation value is the exact
    derivative of the eigenvalue with respect to k.
    """
    if sol.grid != a.grid:
        raise ValidationError("solution and vector potential live on different grids")
    weight = (sol.k - a.values) * sol.grid.h
    return np.einsum("in,i,in->n", sol.eigenvectors, weight, sol.eigenvectors)


def velocity_matrix(sol: EigenSolution, a: VectorPotential) -> np.ndarray:
    """Full band matrix M_nm = <phi_n, (k - a) phi_m>; real symmetric, its
    diagonal equals :func:`fh_velocity`."""
    if sol.grid != a.grid:
        raise ValidationError("solution and vector potential live on different grids")
    weight = (sol.k - a.values) * sol.grid.h
    m = sol.eigenvectors.T @ (weight[:, None] * sol.eigenvectors)
    return 0.5 * (m + m.T)


def velocity_bound_check(sol: EigenSolution, velocities: np.ndarray,
                         guard: float = VELOCITY_GUARD) -> np.ndarray:
    """Per-band truth of the strict bound (d eps/dk)^2 < 2 eps, with guard band."""
    velocities = np.asarray(velocities, dtype=float)
    if velocities.shape != sol.eigenvalues.shape:
        raise ValidationError("velocity array does not match the eigenvalue count")
    return velocities**2 <= 2.0 * sol.eigenvalues - guard


def suggest_resolution(b_bar: float, k_max: float,
                       target_energy: float) -> tuple[float, float]:
    """Default (h, half-length L) resolving the magnetic length and keeping
    turning points inside the box; callers may override freely."""
    if b_bar <= 0:
        raise ValidationError("need a positive field scale")
    h = 0.01 * min(1.0, 1.0 / np.sqrt(b_bar))
    half_length = (abs(k_max) + np.sqrt(2.0 * target_energy * ADEQUACY_FACTOR)) / b_bar
    return h, half_length


def dump_fiber_csv(path: str | Path, sol: EigenSolution,
                   potential: EffectivePotential) -> None:
    """Debug dump with columns x, v, phi0..phiN."""
    if sol.grid != potential.grid:
        raise ValidationError("solution and potential live on different grids")
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "v"] + [f"phi{n}" for n in range(sol.n_max + 1)])
        for i, (x, v) in enumerate(zip(sol.grid.points, potential.values)):
            writer.writerow([repr(float(x)), repr(float(v))]
                            + [repr(float(p)) for p in sol.eigenvectors[i]])
