"""Torus grids, real scalar fields and Fourier multipliers for P = 1 - Delta.

The flat torus T^d_L = (R / L Z)^d is discretized with N points per axis.
Frequencies are the centered integer cube scaled by 2*pi/L, so that with the
default period L = 2*pi the eigenvalues of P = 1 - Delta are
lambda_k = 1 + |k|^2 with integer frequency vectors k.

Fields carry a dual physical/spectral representation.  The spectral
coefficients follow the convention

    u(x) = sum_k c_k exp(i k . x),        c_k = fftn(u) / N^d,

so that real physical values correspond to Hermitian-symmetric coefficients
and Parseval reads  mean(u^2) = sum_k |c_k|^2.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

__all__ = [
    "Grid",
    "Field",
    "Multiplier",
    "apply_multiplier",
    "duhamel_step",
    "cubic",
    "dealiased_product",
    "gradient",
    "grad_dot",
    "save_field",
    "load_field",
]

_FIELD_MAGIC = b"PHI4FLD1"


@dataclass(frozen=True)
class Grid:
    """Uniform discretization of the flat torus T^d_L.

    Parameters
    ----------
    dim : spatial dimension, 1, 2 or 3.
    n : points per axis (a power of two).
    period : physical period L > 0 of every axis (default 2*pi).
    """

    dim: int
    n: int
    period: float = 2.0 * np.pi

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.n < 2 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 2, got {self.n}")
        if not (self.period > 0):
            raise ValueError(f"period must be positive, got {self.period}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def cell_count(self) -> int:
        return self.n**self.dim

    @property
    def cell_volume(self) -> float:
        return (self.period / self.n) ** self.dim

    @property
    def volume(self) -> float:
        return self.period**self.dim

    def axis_coordinates(self) -> np.ndarray:
        """Physical coordinates along one axis."""
        return np.arange(self.n) * (self.period / self.n)

    def coordinates(self) -> list[np.ndarray]:
        """Meshgrid (ij-indexed) of physical coordinates, one array per axis."""
        x = self.axis_coordinates()
        return list(np.meshgrid(*([x] * self.dim), indexing="ij"))

    def axis_frequencies(self) -> np.ndarray:
        """Physical frequencies 2*pi*k/L along one axis, FFT-ordered."""
        return sfft.fftfreq(self.n, d=1.0 / self.n) * (2.0 * np.pi / self.period)

    def frequency_mesh(self) -> list[np.ndarray]:
        k = self.axis_frequencies()
        return list(np.meshgrid(*([k] * self.dim), indexing="ij"))

    def k_squared(self) -> np.ndarray:
        """|k|^2 over the full FFT-ordered frequency cube."""
        mesh = self.frequency_mesh()
        out = np.zeros(self.shape)
        for km in mesh:
            out += km**2
        return out

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues lambda_k = 1 + |k|^2 of P = 1 - Delta."""
        return 1.0 + self.k_squared()

    def k_magnitude(self) -> np.ndarray:
        return np.sqrt(self.k_squared())

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.dim == other.dim
            and self.n == other.n
            and self.period == other.period
        )

    def __hash__(self):
        return hash((self.dim, self.n, self.period))


# Per-grid cache of eigenvalue arrays; grids are tiny immutable keys.
_EIGENVALUE_CACHE: dict[Grid, np.ndarray] = {}


def grid_eigenvalues(grid: Grid) -> np.ndarray:
    lam = _EIGENVALUE_CACHE.get(grid)
    if lam is None:
        lam = grid.eigenvalues()
        lam.setflags(write=False)
        _EIGENVALUE_CACHE[grid] = lam
    return lam


@dataclass
class Field:
    """Real scalar function on a Grid with an on-demand spectral representation.

    Fields are treated as immutable snapshots: operations return new Field
    instances.  The spectral coefficients c_k = fftn(values)/N^d are cached.
    """

    grid: Grid
    values: np.ndarray
    _spectral: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        self.values.setflags(write=False)

    @classmethod
    def from_spectral(cls, grid: Grid, coeffs: np.ndarray) -> "Field":
        """Build a field from spectral coefficients c_k (FFT-ordered).

        The imaginary part left over by a non-Hermitian input is discarded;
        callers are expected to pass Hermitian-symmetric coefficients.
        """
        values = sfft.ifftn(coeffs * grid.cell_count, workers=-1).real
        f = cls(grid, values)
        return f

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "Field":
        return cls(grid, np.full(grid.shape, float(c)))

    @property
    def spectral(self) -> np.ndarray:
        """Spectral coefficients c_k = fftn(values) / N^d."""
        if self._spectral is None:
            spec = sfft.fftn(self.values, workers=-1) / self.grid.cell_count
            spec.setflags(write=False)
            self._spectral = spec
        return self._spectral

    # -- arithmetic (pure, returns new fields) -----------------------------
    def _check(self, other: "Field"):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, self.values + other.values)
        return Field(self.grid, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, self.values - other.values)
        return Field(self.grid, self.values - other)

    def __rsub__(self, other):
        return Field(self.grid, other - self.values)

    def __mul__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, self.values * other.values)
        return Field(self.grid, self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)

    def mean(self) -> float:
        return float(self.values.mean())


@dataclass(frozen=True)
class Multiplier:
    """Fourier multiplier m(lambda_k) acting diagonally in frequency.

    The symbol maps the eigenvalue lambda_k = 1 + |k|^2 of P to a real
    weight.  Multipliers compose pointwise.
    """

    symbol: object  # callable lambda -> weight, vectorized over arrays
    name: str = "multiplier"

    def weights(self, grid: Grid) -> np.ndarray:
        w = np.asarray(self.symbol(grid_eigenvalues(grid)), dtype=np.float64)
        return w

    def __matmul__(self, other: "Multiplier") -> "Multiplier":
        """Pointwise composition of symbols."""
        return Multiplier(
            lambda lam, a=self.symbol, b=other.symbol: a(lam) * b(lam),
            name=f"{self.name}*{other.name}",
        )

    # -- standard symbols ---------------------------------------------------
    @staticmethod
    def identity() -> "Multiplier":
        return Multiplier(lambda lam: np.ones_like(lam), name="id")

    @staticmethod
    def P() -> "Multiplier":
        return Multiplier(lambda lam: lam, name="P")

    @staticmethod
    def P_inverse() -> "Multiplier":
        return Multiplier(lambda lam: 1.0 / lam, name="P^-1")

    @staticmethod
    def heat(t: float) -> "Multiplier":
        """e^{-tP}."""
        return Multiplier(lambda lam: np.exp(-t * lam), name=f"e^-{t}P")

    @staticmethod
    def laplacian() -> "Multiplier":
        """Delta = 1 - P."""
        return Multiplier(lambda lam: 1.0 - lam, name="Delta")


def apply_multiplier(f: Field, m: Multiplier) -> Field:
    """Apply a Fourier multiplier; the result is real-valued on the same grid."""
    w = m.weights(f.grid)
    if not np.all(np.isfinite(w)):
        raise ValueError(f"multiplier {m.name} takes a non-finite value on the grid")
    return Field.from_spectral(f.grid, f.spectral * w)


def duhamel_step(u: Field, nonlinearity: Field, dt: float) -> Field:
    """One exponential-Euler step of (d/dt + P) u = nonlinearity.

    Per Fourier mode:  u' = e^{-dt lam} u + (1 - e^{-dt lam}) / lam * nonlin,
    i.e. the Duhamel integral with the drift frozen at the step's start.
    """
    if not (dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    if nonlinearity.grid != u.grid:
        raise ValueError("fields live on different grids")
    lam = grid_eigenvalues(u.grid)
    decay = np.exp(-dt * lam)
    return Field.from_spectral(
        u.grid, decay * u.spectral + (1.0 - decay) / lam * nonlinearity.spectral
    )


def _pad_spectral(spec: np.ndarray, n: int, m: int, dim: int) -> np.ndarray:
    """Embed FFT-ordered coefficients of size n^dim into a zero-padded m^dim cube."""
    out = np.zeros((m,) * dim, dtype=spec.dtype)
    idx = sfft.fftfreq(n, d=1.0 / n).astype(int)  # signed frequencies
    sl = tuple(np.ix_(*([idx % m] * dim)))
    out[sl] = spec
    return out


def _truncate_spectral(spec: np.ndarray, m: int, n: int, dim: int) -> np.ndarray:
    """Restrict FFT-ordered coefficients of size m^dim to the centered n^dim cube."""
    idx = sfft.fftfreq(n, d=1.0 / n).astype(int)
    sl = tuple(np.ix_(*([idx % m] * dim)))
    return spec[sl]


def _to_padded_physical(f: Field, m: int) -> np.ndarray:
    grid = f.grid
    spec = _pad_spectral(f.spectral, grid.n, m, grid.dim)
    return sfft.ifftn(spec * (m**grid.dim), workers=-1).real


def _from_padded_physical(grid: Grid, vals: np.ndarray, m: int) -> Field:
    spec = sfft.fftn(vals, workers=-1) / (m**grid.dim)
    return Field.from_spectral(grid, _truncate_spectral(spec, m, grid.n, grid.dim))


def dealiased_product(*fields: Field) -> Field:
    """Pointwise product of fields with 2x zero-padding (aliasing-free for
    products of up to three factors)."""
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise ValueError("fields live on different grids")
    m = 2 * grid.n
    prod = _to_padded_physical(fields[0], m)
    for f in fields[1:]:
        prod = prod * _to_padded_physical(f, m)
    return _from_padded_physical(grid, prod, m)


def cubic(f: Field) -> Field:
    """Pointwise cube f^3 computed with full dealiasing (2x zero padding)."""
    return dealiased_product(f, f, f)


def gradient(f: Field) -> list[Field]:
    """Spectral gradient, one field per axis."""
    grid = f.grid
    mesh = grid.frequency_mesh()
    spec = f.spectral
    return [Field.from_spectral(grid, 1j * km * spec) for km in mesh]


def grad_dot(a: Field, b: Field, dealias: bool = True) -> Field:
    """grad a . grad b, with the products dealiased by default."""
    ga = gradient(a)
    gb = gradient(b)
    grid = a.grid
    out = Field.zeros(grid)
    for fa, fb in zip(ga, gb):
        out = out + (dealiased_product(fa, fb) if dealias else fa * fb)
    return out


# -- serialization ----------------------------------------------------------
#
# Byte layout (little endian), 32-byte header followed by the flat array:
#   bytes  0-7   magic "PHI4FLD1"
#   bytes  8-11  uint32 d     (dimension)
#   bytes 12-15  uint32 N     (points per axis)
#   bytes 16-23  float64 L    (period)
#   bytes 24-31  reserved (zeros)
#   bytes 32-    N^d float64 values, C order


def save_field(f: Field, path) -> None:
    header = _FIELD_MAGIC + struct.pack("<IId8x", f.grid.dim, f.grid.n, f.grid.period)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def load_field(path) -> Field:
    with open(path, "rb") as fh:
        header = fh.read(32)
        if len(header) != 32 or header[:8] != _FIELD_MAGIC:
            raise ValueError(f"{path}: not a PHI4FLD1 field file")
        dim, n, period = struct.unpack("<IId8x", header[8:])
        grid = Grid(dim, n, period)
        data = np.frombuffer(fh.read(8 * grid.cell_count), dtype="<f8")
        if data.size != grid.cell_count:
            raise ValueError(f"{path}: truncated field file")
        return Field(grid, data.reshape(grid.shape).copy())
