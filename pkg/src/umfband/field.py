"""Magnetic-field profiles on a 1-D grid and the deterministic operations on them.

A field profile b(x) depends on a single coordinate only (the direction in
which the perpendicular magnetic field varies).  Everything downstream works
with three value objects defined here:

* ``Grid1D``            -- a uniform grid on a finite box containing x = 0,
* ``FieldRealization``  -- sampled values of b with provenance (spec id, seed),
* ``VectorPotential``   -- the anti-derivative a(x) = int_0^x b, anchored a(0) = 0.

Field specifications are small frozen dataclasses (``Constant``, ``Step``,
``Tanh``, ``Gaussian``, ``SquaredGaussian``, ``Poisson``, ``LatticeIID``);
the actual drawing of random realizations lives in :mod:`umfband.sampling`.

Units: hbar = m = e = 1, so b has dimension 1/length**2 and a has 1/length.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field as dc_field, fields as dc_fields
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ValidationError

__all__ = [
    "Grid1D",
    "FieldRealization",
    "VectorPotential",
    "FieldSpec",
    "Constant",
    "Step",
    "Tanh",
    "Gaussian",
    "SquaredGaussian",
    "Poisson",
    "LatticeIID",
    "CovarianceModel",
    "GaussianKernel",
    "ExponentialKernel",
    "TabulatedCovariance",
    "ProfileFunction",
    "BumpProfile",
    "TabulatedProfile",
    "DistributionModel",
    "NormalDistribution",
    "UniformDistribution",
    "vector_potential",
    "spatial_mean",
    "growth_rate",
    "field_metric",
    "metric_tail_bound",
    "shift_field",
    "restrict_field",
    "write_field_csv",
    "read_field_csv",
    "spec_to_dict",
    "spec_from_dict",
]


# ---------------------------------------------------------------------------
# grid and value objects
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid1D:
    """Uniform grid x_i = x_min + i*h on [x_min, x_max] with 0 inside the box."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self) -> None:
        if not self.x_min < self.x_max:
            raise ValidationError(f"grid needs x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if self.n_points < 3:
            raise ValidationError(f"grid needs at least 3 points, got {self.n_points}")
        if not (self.x_min <= 0.0 <= self.x_max):
            raise ValidationError("grid must contain x = 0 (vector-potential anchor)")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @cached_property
    def points(self) -> np.ndarray:
        x = np.linspace(self.x_min, self.x_max, self.n_points)
        x.setflags(write=False)
        return x

    @property
    def span(self) -> float:
        return self.x_max - self.x_min

    def index_nearest(self, x: float) -> int:
        i = int(round((x - self.x_min) / self.h))
        return min(max(i, 0), self.n_points - 1)

    def index_of(self, x: float, tol: float = 1e-9) -> int:
        """Index of the grid point equal to ``x``; error if x is off-lattice."""
        i = self.index_nearest(x)
        if abs(self.points[i] - x) > tol * max(1.0, abs(x)):
            raise ValidationError(f"x = {x} is not a grid point (h = {self.h})")
        return i


def _as_readonly(values: np.ndarray | list | tuple) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValidationError("field values must be one-dimensional")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FieldRealization:
    """One sampled field profile b(x_i) together with its provenance."""

    grid: Grid1D
    values: np.ndarray
    spec_id: str
    seed: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _as_readonly(self.values))
        if len(self.values) != self.grid.n_points:
            raise ValidationError(
                f"field has {len(self.values)} values for {self.grid.n_points} grid points"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("field values must all be finite")


@dataclass(frozen=True, eq=False)
class VectorPotential:
    """a(x_i) on the same grid as its field, with a = 0 at the point nearest 0."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _as_readonly(self.values))
        if len(self.values) != self.grid.n_points:
            raise ValidationError("vector potential length does not match grid")


# ---------------------------------------------------------------------------
# covariance models, profile functions, site distributions
# ---------------------------------------------------------------------------

class CovarianceModel:
    """Stationary covariance c(lag); subclasses implement ``at``.

    Every model exposes ``variance`` = c(0), as a field or a property.
    """

    def at(self, lags: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class GaussianKernel(CovarianceModel):
    variance: float
    correlation_length: float

    def __post_init__(self) -> None:
        if self.variance < 0:
            raise ValidationError("variance must be >= 0")
        if self.correlation_length <= 0:
            raise ValidationError("correlation_length must be > 0")

    def at(self, lags: np.ndarray) -> np.ndarray:
        u = np.asarray(lags, dtype=float) / self.correlation_length
        return self.variance * np.exp(-0.5 * u * u)


@dataclass(frozen=True)
class ExponentialKernel(CovarianceModel):
    variance: float
    correlation_length: float

    def __post_init__(self) -> None:
        if self.variance < 0:
            raise ValidationError("variance must be >= 0")
        if self.correlation_length <= 0:
            raise ValidationError("correlation_length must be > 0")

    def at(self, lags: np.ndarray) -> np.ndarray:
        return self.variance * np.exp(-np.abs(np.asarray(lags, dtype=float)) / self.correlation_length)


@dataclass(frozen=True, eq=False)
class TabulatedCovariance(CovarianceModel):
    """Covariance given at non-negative lags; even extension, zero beyond the table."""

    lags: np.ndarray
    covariances: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "lags", _as_readonly(self.lags))
        object.__setattr__(self, "covariances", _as_readonly(self.covariances))
        if len(self.lags) != len(self.covariances) or len(self.lags) < 2:
            raise ValidationError("tabulated covariance needs matching lag/value columns")
        if self.lags[0] != 0.0 or np.any(np.diff(self.lags) <= 0):
            raise ValidationError("lags must start at 0 and increase strictly")
        if np.any(np.abs(self.covariances) > self.covariances[0] + 1e-12):
            raise ValidationError("covariance must satisfy |c(x)| <= c(0)")

    def at(self, lags: np.ndarray) -> np.ndarray:
        return np.interp(np.abs(np.asarray(lags, dtype=float)), self.lags, self.covariances,
                         left=self.covariances[0], right=0.0)

    @property
    def variance(self) -> float:
        return float(self.covariances[0])

    @classmethod
    def from_csv(cls, path: str | Path) -> "TabulatedCovariance":
        lags, values = read_two_column_csv(path)
        return cls(lags, values)


class ProfileFunction:
    """Absolutely integrable single-impurity profile u(x)."""

    def at(self, offsets: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def integral(self) -> float:
        raise NotImplementedError

    @property
    def abs_integral(self) -> float:
        raise NotImplementedError

    @property
    def support_halfwidth(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class BumpProfile(ProfileFunction):
    """Indicator bump u(x) = amplitude * 1[|x| <= half_width]."""

    amplitude: float
    half_width: float

    def __post_init__(self) -> None:
        if self.half_width <= 0:
            raise ValidationError("half_width must be > 0")
        if self.amplitude == 0:
            raise ValidationError("amplitude must be non-zero (profile integral must not vanish)")

    def at(self, offsets: np.ndarray) -> np.ndarray:
        return self.amplitude * (np.abs(np.asarray(offsets, dtype=float)) <= self.half_width)

    @property
    def integral(self) -> float:
        return 2.0 * self.amplitude * self.half_width

    @property
    def abs_integral(self) -> float:
        return 2.0 * abs(self.amplitude) * self.half_width

    @property
    def support_halfwidth(self) -> float:
        return self.half_width


@dataclass(frozen=True, eq=False)
class TabulatedProfile(ProfileFunction):
    """Profile interpolated from samples; zero outside the tabulated offsets."""

    offsets: np.ndarray
    profile_values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "offsets", _as_readonly(self.offsets))
        object.__setattr__(self, "profile_values", _as_readonly(self.profile_values))
        if len(self.offsets) != len(self.profile_values) or len(self.offsets) < 2:
            raise ValidationError("tabulated profile needs matching offset/value columns")
        if np.any(np.diff(self.offsets) <= 0):
            raise ValidationError("offsets must increase strictly")
        if abs(self.integral) < 1e-14:
            raise ValidationError("profile integral must not vanish")

    def at(self, offsets: np.ndarray) -> np.ndarray:
        return np.interp(np.asarray(offsets, dtype=float), self.offsets, self.profile_values,
                         left=0.0, right=0.0)

    @property
    def integral(self) -> float:
        return float(np.trapezoid(self.profile_values, self.offsets))

    @property
    def abs_integral(self) -> float:
        return float(np.trapezoid(np.abs(self.profile_values), self.offsets))

    @property
    def support_halfwidth(self) -> float:
        return float(max(abs(self.offsets[0]), abs(self.offsets[-1])))

    @classmethod
    def from_csv(cls, path: str | Path) -> "TabulatedProfile":
        offsets, values = read_two_column_csv(path)
        return cls(offsets, values)


class DistributionModel:
    """Distribution of the i.i.d. site couplings of a lattice field."""

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    @property
    def mean(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class NormalDistribution(DistributionModel):
    loc: float
    scale: float

    def __post_init__(self) -> None:
        if self.scale < 0:
            raise ValidationError("scale must be >= 0")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.normal(self.loc, self.scale, size)

    @property
    def mean(self) -> float:
        return self.loc


@dataclass(frozen=True)
class UniformDistribution(DistributionModel):
    low: float
    high: float

    def __post_init__(self) -> None:
        if not self.low < self.high:
            raise ValidationError("need low < high")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.low, self.high, size)

    @property
    def mean(self) -> float:
        return 0.5 * (self.low + self.high)


# ---------------------------------------------------------------------------
# field specifications
# ---------------------------------------------------------------------------

class FieldSpec:
    """Base class of the field-specification union."""

    #: subclasses set this; random specs require a seed when sampled
    is_random: bool = False

    @property
    def spec_id(self) -> str:
        return json.dumps(spec_to_dict(self), sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class Constant(FieldSpec):
    b0: float

    def __post_init__(self) -> None:
        if self.b0 == 0:
            raise ValidationError("constant field strength must be non-zero")


@dataclass(frozen=True)
class Step(FieldSpec):
    """Two-valued field; the value at x = 0 is the right limit (tie convention)."""

    b_left: float
    b_right: float


@dataclass(frozen=True)
class Tanh(FieldSpec):
    """Smooth interpolation b(-inf) -> b(+inf) over the given width."""

    b_minus_inf: float
    b_plus_inf: float
    width: float

    def __post_init__(self) -> None:
        if self.width <= 0:
            raise ValidationError("width must be > 0")


@dataclass(frozen=True)
class Gaussian(FieldSpec):
    """Stationary Gaussian field with non-zero mean ``mu`` and covariance model."""

    mu: float
    covariance: CovarianceModel
    is_random = True

    def __post_init__(self) -> None:
        if self.mu == 0:
            raise ValidationError("Gaussian field requires a non-zero mean value")


@dataclass(frozen=True)
class SquaredGaussian(FieldSpec):
    """b = b_minus + g**2 with g a zero-or-nonzero-mean Gaussian field; b >= b_minus."""

    b_minus: float
    inner: Gaussian
    is_random = True

    def __post_init__(self) -> None:
        if self.b_minus <= 0:
            raise ValidationError("b_minus must be > 0")


@dataclass(frozen=True)
class Poisson(FieldSpec):
    """Shot noise b(x) = sum_p u(x - y_p) over Poisson points of density rho."""

    rho: float
    profile: ProfileFunction
    is_random = True

    def __post_init__(self) -> None:
        if self.rho <= 0:
            raise ValidationError("rho must be > 0")
        if abs(self.rho * self.profile.integral) < 1e-14:
            raise ValidationError("rho * integral(u) must be non-zero")


@dataclass(frozen=True)
class LatticeIID(FieldSpec):
    """b(x) = sum_j g_j u(x - j) with i.i.d. couplings g_j on the integer lattice."""

    distribution: DistributionModel
    profile: ProfileFunction
    is_random = True

    def __post_init__(self) -> None:
        if abs(self.distribution.mean * self.profile.integral) < 1e-14:
            raise ValidationError("lattice field requires a non-zero mean coupling")


# ---------------------------------------------------------------------------
# deterministic operations
# ---------------------------------------------------------------------------

def vector_potential(field: FieldRealization) -> VectorPotential:
    """Cumulative trapezoidal anti-derivative, zeroed at the grid point nearest 0.

    Linear in the field values; exact (a_i = b0 * x_i) for constant fields on
    grids containing x = 0.
    """
    b = field.values
    h = field.grid.h
    a = np.empty_like(b)
    a[0] = 0.0
    np.cumsum(0.5 * h * (b[1:] + b[:-1]), out=a[1:])
    a -= a[field.grid.index_nearest(0.0)]
    return VectorPotential(field.grid, a)


def spatial_mean(field: FieldRealization) -> float:
    """Trapezoid average of b over the box; estimates the ergodic mean value."""
    x = field.grid.points
    return float(np.trapezoid(field.values, x) / field.grid.span)


def growth_rate(potential: VectorPotential) -> float:
    """Estimate of the sublinear growth rate of |a|: min over box ends of |a(x)|/|x|.

    For ergodic fields this estimates the absolute mean value; for the step
    field sign(x)*b0 it returns b0 even though the spatial mean vanishes.
    """
    grid = potential.grid
    ends = []
    for i in (0, grid.n_points - 1):
        xi = grid.points[i]
        if abs(xi) >= 1.0:
            ends.append(abs(potential.values[i]) / abs(xi))
    if not ends:
        raise ValidationError("box too small to estimate the growth rate (need |x_end| >= 1)")
    return float(min(ends))


def _cell_edges(grid: Grid1D) -> tuple[np.ndarray, np.ndarray]:
    """Unit-cell labels j with [j, j+1] fully inside the grid, plus their indices."""
    j_first = math.ceil(grid.x_min - 1e-9)
    j_last = math.floor(grid.x_max + 1e-9) - 1
    if j_last < j_first:
        raise ValidationError("grid does not cover a full unit cell [j, j+1]")
    cells = np.arange(j_first, j_last + 1)
    idx = np.empty(len(cells) + 1, dtype=int)
    for m, j in enumerate(range(j_first, j_first + len(cells) + 1)):
        idx[m] = grid.index_of(float(j), tol=1e-6)
    return cells, idx


def field_metric(b: FieldRealization, b2: FieldRealization) -> float:
    """Locality metric sum_j 2**(-|j|) min{1, int_j^(j+1) |b - b2|}.

    Only unit cells [j, j+1] fully inside the common grid contribute; the
    neglected tail is bounded by :func:`metric_tail_bound`.  Integer cell
    boundaries must lie on the grid.
    """
    if b.grid != b2.grid:
        raise ValidationError("field_metric requires both fields on the same grid")
    grid = b.grid
    diff = np.abs(b.values - b2.values)
    cells, idx = _cell_edges(grid)
    total = 0.0
    for m, j in enumerate(cells):
        lo, hi = idx[m], idx[m + 1]
        cell_int = float(np.trapezoid(diff[lo:hi + 1], dx=grid.h))
        total += 2.0 ** (-abs(int(j))) * min(1.0, cell_int)
    return total


def metric_tail_bound(grid: Grid1D) -> float:
    """Upper bound on the metric mass of the cells outside the grid."""
    cells, _ = _cell_edges(grid)
    inside = float(np.sum(2.0 ** (-np.abs(cells.astype(float)))))
    return 3.0 - inside


def shift_field(field: FieldRealization, z: float) -> FieldRealization:
    """Shifted field (theta_z b)(x) = b(x + z) on the shrunk common window.

    ``z`` must be a grid-aligned multiple of h; the usable window shrinks by
    |z| and is recorded in the returned realization's grid.
    """
    grid = field.grid
    h = grid.h
    m = int(round(z / h))
    if abs(m * h - z) > 1e-9 * max(1.0, abs(z)):
        raise ValidationError(f"shift z = {z} is not a multiple of the grid spacing h = {h}")
    if abs(m) >= grid.n_points - 2:
        raise ValidationError("shift exceeds the representable window")
    if m >= 0:
        values = field.values[m:]
        new_grid = Grid1D(grid.x_min, grid.x_max - m * h, grid.n_points - m)
    else:
        values = field.values[:m]
        new_grid = Grid1D(grid.x_min - m * h, grid.x_max, grid.n_points + m)
    return FieldRealization(new_grid, values, f"shift({z})|{field.spec_id}", field.seed)


def restrict_field(field: FieldRealization, x_min: float, x_max: float) -> FieldRealization:
    """Restriction of the field to a grid-aligned sub-window [x_min, x_max]."""
    grid = field.grid
    i0 = grid.index_of(x_min)
    i1 = grid.index_of(x_max)
    if i1 - i0 < 2:
        raise ValidationError("restriction window too small")
    new_grid = Grid1D(grid.points[i0], grid.points[i1], i1 - i0 + 1)
    return FieldRealization(new_grid, field.values[i0:i1 + 1], field.spec_id, field.seed)


# ---------------------------------------------------------------------------
# serialization: CSV with header `x,b` plus a JSON sidecar
# ---------------------------------------------------------------------------

_SPEC_TYPES = {
    "constant": Constant,
    "step": Step,
    "tanh": Tanh,
    "gaussian": Gaussian,
    "squared_gaussian": SquaredGaussian,
    "poisson": Poisson,
    "lattice_iid": LatticeIID,
}
_COV_TYPES = {
    "gaussian_kernel": GaussianKernel,
    "exponential_kernel": ExponentialKernel,
    "tabulated": TabulatedCovariance,
}
_PROFILE_TYPES = {
    "bump": BumpProfile,
    "tabulated": TabulatedProfile,
}
_DIST_TYPES = {
    "normal": NormalDistribution,
    "uniform": UniformDistribution,
}


def _tag_of(obj, table: dict) -> str:
    for tag, cls in table.items():
        if type(obj) is cls:
            return tag
    raise ValidationError(f"unknown model type {type(obj).__name__}")


def _nested_to_dict(value):
    if isinstance(value, CovarianceModel):
        d = {"type": _tag_of(value, _COV_TYPES)}
    elif isinstance(value, ProfileFunction):
        d = {"type": _tag_of(value, _PROFILE_TYPES)}
    elif isinstance(value, DistributionModel):
        d = {"type": _tag_of(value, _DIST_TYPES)}
    elif isinstance(value, FieldSpec):
        return spec_to_dict(value)
    elif isinstance(value, np.ndarray):
        return [float(v) for v in value]
    else:
        return value
    for f in dc_fields(value):
        d[f.name] = _nested_to_dict(getattr(value, f.name))
    return d


def spec_to_dict(spec: FieldSpec) -> dict:
    """JSON-compatible dictionary encoding of a field specification."""
    d = {"type": _tag_of(spec, _SPEC_TYPES)}
    for f in dc_fields(spec):
        d[f.name] = _nested_to_dict(getattr(spec, f.name))
    return d


def _nested_from_dict(d, table: dict):
    kwargs = {k: v for k, v in d.items() if k != "type"}
    cls = table.get(d.get("type"))
    if cls is None:
        raise ValidationError(f"unknown model tag {d.get('type')!r}")
    return cls(**kwargs)


def spec_from_dict(d: dict) -> FieldSpec:
    """Inverse of :func:`spec_to_dict`."""
    tag = d.get("type")
    if tag not in _SPEC_TYPES:
        raise ValidationError(f"unknown field spec type {tag!r}")
    kwargs = {}
    for key, value in d.items():
        if key == "type":
            continue
        if key == "covariance":
            kwargs[key] = _nested_from_dict(value, _COV_TYPES)
        elif key == "profile":
            kwargs[key] = _nested_from_dict(value, _PROFILE_TYPES)
        elif key == "distribution":
            kwargs[key] = _nested_from_dict(value, _DIST_TYPES)
        elif key == "inner":
            kwargs[key] = spec_from_dict(value)
        else:
            kwargs[key] = value
    return _SPEC_TYPES[tag](**kwargs)


def write_field_csv(field: FieldRealization, path: str | Path,
                    spec: FieldSpec | None = None) -> None:
    """Write `x,b` rows at full float precision plus a `.json` sidecar."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "b"])
        for x, b in zip(field.grid.points, field.values):
            writer.writerow([repr(float(x)), repr(float(b))])
    sidecar = {
        "spec": spec_to_dict(spec) if spec is not None else field.spec_id,
        "seed": field.seed,
        "grid": {"x_min": field.grid.x_min, "x_max": field.grid.x_max,
                 "n_points": field.grid.n_points},
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n")


def read_field_csv(path: str | Path) -> FieldRealization:
    """Read a realization written by :func:`write_field_csv`."""
    path = Path(path)
    xs, bs = [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["x", "b"]:
            raise ValidationError(f"unexpected CSV header {header}")
        for row in reader:
            xs.append(float(row[0]))
            bs.append(float(row[1]))
    sidecar = json.loads(path.with_suffix(".json").read_text())
    g = sidecar["grid"]
    grid = Grid1D(g["x_min"], g["x_max"], g["n_points"])
    if grid.n_points != len(xs):
        raise ValidationError("sidecar grid does not match CSV row count")
    spec = sidecar["spec"]
    spec_id = (json.dumps(spec, sort_keys=True, separators=(",", ":"))
               if isinstance(spec, dict) else str(spec))
    return FieldRealization(grid, np.array(bs), spec_id, sidecar.get("seed"))


def read_two_column_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Generic two-column CSV reader for tabulated covariances and profiles."""
    first, second = [], []
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        for row in reader:
            if not row:
                continue
            try:
                a, b = float(row[0]), float(row[1])
            except ValueError:
                continue  # header line
            first.append(a)
            second.append(b)
    return np.array(first), np.array(second)
