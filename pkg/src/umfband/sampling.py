"""Drawing field realizations from deterministic and random specifications.

All sampling is a pure function of ``(spec, grid, seed)``: repeated calls with
the same arguments return bit-identical realizations.  Randomness comes from
the counter-based Philox generator keyed by ``(seed, stream)``; each sampler
documents which streams it consumes:

=======  =====================================================
stream   use
=======  =====================================================
0        field values (Gaussian noise, Poisson points, ...)
1        Karhunen-Loeve mode amplitudes
7        seed enumeration for ensembles (:func:`seed_sequence`)
=======  =====================================================

The stationary Gaussian sampler uses circulant embedding on the doubled grid
(exact in distribution when the embedding is non-negative); the alternative
Karhunen-Loeve sampler truncates the Mercer expansion of the covariance
operator on a sub-interval and is kept as an independent cross-check of the
same law.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import CovarianceError, ValidationError
from .field import (
    BumpProfile,
    Constant,
    CovarianceModel,
    FieldRealization,
    FieldSpec,
    Gaussian,
    Grid1D,
    LatticeIID,
    Poisson,
    SquaredGaussian,
    Step,
    Tanh,
)

__all__ = [
    "make_rng",
    "seed_sequence",
    "sample_field",
    "sample_gaussian_circulant",
    "mercer_eigenpairs",
    "sample_gaussian_kl",
    "poisson_points_for",
]

logger = logging.getLogger(__name__)

STREAM_FIELD = 0
STREAM_KL = 1
STREAM_SEEDS = 7

#: clipped negative spectral mass above this fraction of the total is an error
CLIP_FRACTION_LIMIT = 0.01


def make_rng(seed: int, stream: int = STREAM_FIELD) -> np.random.Generator:
    """Counter-based generator for the given (seed, stream) pair."""
    key = np.array([np.uint64(seed), np.uint64(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def seed_sequence(base_seed: int, count: int) -> list[int]:
    """Enumerable stream of per-realization seeds derived from a base seed."""
    rng = make_rng(base_seed, STREAM_SEEDS)
    return [int(s) for s in rng.integers(0, 2**63, size=count, dtype=np.int64)]


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def sample_field(spec: FieldSpec, grid: Grid1D, seed: int | None = None) -> FieldRealization:
    """Draw one realization of ``spec`` on ``grid``.

    Deterministic specs ignore the seed; random specs require one.  The
    Gaussian branch dispatches to :func:`sample_gaussian_circulant`.
    """
    if spec.is_random and seed is None:
        raise ValidationError(f"spec {spec.spec_id} is random and requires a seed")
    x = grid.points
    if isinstance(spec, Constant):
        return FieldRealization(grid, np.full(grid.n_points, spec.b0), spec.spec_id)
    if isinstance(spec, Step):
        values = np.where(x < 0.0, spec.b_left, spec.b_right)
        return FieldRealization(grid, values, spec.spec_id)
    if isinstance(spec, Tanh):
        mid = 0.5 * (spec.b_minus_inf + spec.b_plus_inf)
        amp = 0.5 * (spec.b_plus_inf - spec.b_minus_inf)
        return FieldRealization(grid, mid + amp * np.tanh(x / spec.width), spec.spec_id)
    if isinstance(spec, Gaussian):
        return sample_gaussian_circulant(spec, grid, seed)
    if isinstance(spec, SquaredGaussian):
        inner = sample_gaussian_circulant(spec.inner, grid, seed)
        values = spec.b_minus + inner.values**2
        assert np.min(values) >= spec.b_minus  # sign-definite by construction
        return FieldRealization(grid, values, spec.spec_id, seed)
    if isinstance(spec, Poisson):
        return _sample_poisson(spec, grid, seed)
    if isinstance(spec, LatticeIID):
        return _sample_lattice(spec, grid, seed)
    raise ValidationError(f"unsupported field spec {type(spec).__name__}")


# ---------------------------------------------------------------------------
# stationary Gaussian fields
# ---------------------------------------------------------------------------

def _embedding_eigenvalues(cov: CovarianceModel, n: int, h: float) -> np.ndarray:
    """Eigenvalues of the circulant embedding of the covariance on 2(n-1) points."""
    lags = np.arange(n) * h
    row = cov.at(lags)
    circ = np.concatenate([row, row[-2:0:-1]])
    lam = np.fft.fft(circ).real
    return lam


def _validated_eigenvalues(cov: CovarianceModel, n: int, h: float) -> np.ndarray:
    lam = _embedding_eigenvalues(cov, n, h)
    neg = lam[lam < 0.0]
    if neg.size:
        clipped = -float(neg.sum())
        total = float(np.abs(lam).sum())
        if total > 0 and clipped > CLIP_FRACTION_LIMIT * total:
            raise CovarianceError(
                "circulant embedding is not positive semi-definite: clipped "
                f"spectral mass {clipped:.3e} exceeds {CLIP_FRACTION_LIMIT:.0%} of "
                f"the total {total:.3e} (most negative eigenvalue {neg.min():.3e}); "
                "the covariance model is inconsistent with this grid"
            )
        if clipped > 1e-12 * max(total, 1.0):
            logger.warning(
                "clipping %d negative embedding eigenvalues (mass %.3e of %.3e)",
                neg.size, clipped, total,
            )
        lam = np.clip(lam, 0.0, None)
    return lam


def sample_gaussian_circulant(spec: Gaussian, grid: Grid1D,
                              seed: int | None) -> FieldRealization:
    """Exact stationary Gaussian sample via FFT of the embedded covariance.

    Draws complex white noise e = g1 + i*g2, colours it with sqrt(lambda) and
    keeps the real part of the first n points of its DFT; real and imaginary
    parts each carry the target covariance, only the real part is used.
    """
    if seed is None:
        raise ValidationError("Gaussian sampling requires a seed")
    n = grid.n_points
    lam = _validated_eigenvalues(spec.covariance, n, grid.h)
    if spec.covariance.variance == 0.0:
        return FieldRealization(grid, np.full(n, spec.mu), spec.spec_id, seed)
    n_emb = lam.size
    rng = make_rng(seed, STREAM_FIELD)
    noise = rng.normal(size=n_emb) + 1j * rng.normal(size=n_emb)
    spectrum = np.sqrt(lam / n_emb) * noise
    values = spec.mu + np.fft.fft(spectrum)[:n].real
    return FieldRealization(grid, values, spec.spec_id, seed)


def mercer_eigenpairs(cov: CovarianceModel, grid: Grid1D,
                      interval: tuple[float, float],
                      m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Largest ``m`` eigenpairs of the covariance operator on an interval.

    The integral operator with kernel c(x - y) is discretized as the symmetric
    matrix h * c(x_i - x_j) on the grid points inside ``interval``.  Returns
    (eigenvalues descending, eigenfunctions as columns orthonormal under the
    quadrature weight h, grid indices of the interval).
    """
    lo, hi = interval
    if not (grid.x_min - 1e-9 <= lo < hi <= grid.x_max + 1e-9):
        raise ValidationError("interval must lie inside the grid")
    x = grid.points
    idx = np.nonzero((x >= lo - 1e-9) & (x <= hi + 1e-9))[0]
    n_sub = idx.size
    if m < 1:
        raise ValidationError("need m >= 1 eigenpairs")
    if m > n_sub:
        raise ValidationError(f"m = {m} exceeds the {n_sub} grid points in the interval")
    xs = x[idx]
    kernel = cov.at(xs[:, None] - xs[None, :]) * grid.h
    eigenvalues, vectors = np.linalg.eigh(kernel)
    order = np.argsort(eigenvalues)[::-1][:m]
    c = eigenvalues[order]
    phi = vectors[:, order] / np.sqrt(grid.h)
    return c, phi, idx


def sample_gaussian_kl(spec: Gaussian, grid: Grid1D, interval: tuple[float, float],
                       m: int, seed: int | None,
                       basis: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
                       ) -> FieldRealization:
    """Karhunen-Loeve sample b = mu + sum_j gamma_j phi_j on ``interval``.

    The gamma_j are independent centred Gaussians with variances given by the
    Mercer eigenvalues.  Outside the interval the field is extended by the
    mean mu (the expansion is interval-local by construction).  Pass the
    output of :func:`mercer_eigenpairs` as ``basis`` to amortize the
    decomposition over many seeds; the draw itself is unchanged.
    """
    if seed is None:
        raise ValidationError("Gaussian sampling requires a seed")
    values = np.full(grid.n_points, spec.mu)
    if m > 0:
        c, phi, idx = (mercer_eigenpairs(spec.covariance, grid, interval, m)
                       if basis is None else basis)
        if len(c) != m:
            raise ValidationError(f"basis holds {len(c)} modes, expected {m}")
        rng = make_rng(seed, STREAM_KL)
        gamma = rng.normal(size=m) * np.sqrt(np.clip(c, 0.0, None))
        values[idx] += phi @ gamma
    return FieldRealization(grid, values, spec.spec_id, seed)


# ---------------------------------------------------------------------------
# Poisson and lattice shot noise
# ---------------------------------------------------------------------------

def poisson_points_for(spec: Poisson, grid: Grid1D, seed: int) -> np.ndarray:
    """Impurity positions used by :func:`sample_field` for this (spec, grid, seed).

    Points are drawn on the grid window enlarged by the profile support so
    impurities just outside the box still contribute; the count on any
    sub-window of the enlarged window is Poisson(rho * |window|).
    """
    s = spec.profile.support_halfwidth
    lo, hi = grid.x_min - s, grid.x_max + s
    rng = make_rng(seed, STREAM_FIELD)
    count = rng.poisson(spec.rho * (hi - lo))
    return lo + (hi - lo) * rng.random(count)


def _sample_poisson(spec: Poisson, grid: Grid1D, seed: int) -> FieldRealization:
    points = poisson_points_for(spec, grid, seed)
    x = grid.points
    values = np.zeros(grid.n_points)
    if isinstance(spec.profile, BumpProfile):
        # indicator bumps: add amplitude on the covered index ranges
        h = grid.h
        lo_idx = np.ceil((points - spec.profile.half_width - grid.x_min) / h - 1e-12)
        hi_idx = np.floor((points + spec.profile.half_width - grid.x_min) / h + 1e-12)
        lo_idx = np.clip(lo_idx, 0, grid.n_points - 1).astype(int)
        hi_idx = np.clip(hi_idx, -1, grid.n_points - 1).astype(int)
        for lo, hi in zip(lo_idx, hi_idx):
            if hi >= lo:
                values[lo:hi + 1] += spec.profile.amplitude
    else:
        for p in points:
            values += spec.profile.at(x - p)
    return FieldRealization(grid, values, spec.spec_id, seed)


def _sample_lattice(spec: LatticeIID, grid: Grid1D, seed: int) -> FieldRealization:
    s = spec.profile.support_halfwidth
    j_lo = int(np.floor(grid.x_min - s))
    j_hi = int(np.ceil(grid.x_max + s))
    sites = np.arange(j_lo, j_hi + 1)
    rng = make_rng(seed, STREAM_FIELD)
    couplings = spec.distribution.draw(rng, sites.size)
    x = grid.points
    values = np.zeros(grid.n_points)
    for j, g in zip(sites, couplings):
        values += g * spec.profile.at(x - j)
    return FieldRealization(grid, values, spec.spec_id, seed)
