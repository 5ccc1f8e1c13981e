"""
Pseudospectral machinery on the 2-torus.

The torus is identified with the cube [-1/2, 1/2)^2 and sampled on an N x N
grid. Fields are stored as Fourier coefficients in the half-spectrum layout
of a real 2D FFT: axis 0 carries k1 (full range), axis 1 carries k2 >= 0,
with the last column holding the unpaired mode k2 = -N/2. Physical arrays
are indexed ``grid[i1, i2]``.

Coefficients follow the convention

    u(x) = sum_k u_hat(k) exp(2 pi i x.k),

so the fractional Laplacian has symbol |2 pi k|^(2r) and d/dx_j has symbol
2 pi i k_j.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Protocol

import numpy as np
import scipy.fft as sfft

SNAPSHOT_MAGIC = b"FSQG"
SNAPSHOT_VERSION = 1


class FourierLattice:
    """Truncated wavevector lattice k_j in {-N/2, ..., N/2 - 1}."""

    def __init__(self, N: int):
        N = int(N)
        if N % 2 or N < 16:
            raise ValueError(f"lattice size must be even and >= 16, got {N}")
        self.N = N

    def __repr__(self):
        return f"FourierLattice(N={self.N})"

    def __eq__(self, other):
        return isinstance(other, FourierLattice) and other.N == self.N

    def __hash__(self):
        return hash(("FourierLattice", self.N))

    @property
    def half_shape(self) -> tuple[int, int]:
        return (self.N, self.N // 2 + 1)

    @cached_property
    def x(self) -> np.ndarray:
        """Grid coordinates -1/2 + j/N."""
        return -0.5 + np.arange(self.N) / self.N

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(self.x, self.x, indexing="ij"))

    @cached_property
    def k1(self) -> np.ndarray:
        k = np.fft.fftfreq(self.N, 1.0 / self.N)
        return np.broadcast_to(k[:, None], self.half_shape)

    @cached_property
    def k2(self) -> np.ndarray:
        k = np.arange(self.N // 2 + 1, dtype=float)
        k[-1] = -self.N / 2
        return np.broadcast_to(k[None, :], self.half_shape)

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.hypot(self.k1, self.k2)

    @cached_property
    def phase(self) -> np.ndarray:
        # grid starts at -1/2, so each mode picks up (-1)^(k1 + k2)
        return np.where((self.k1 + self.k2) % 2 == 0, 1.0, -1.0)

    @cached_property
    def weights(self) -> np.ndarray:
        """Multiplicity of each half-spectrum entry in the full lattice."""
        w = np.full(self.half_shape, 2.0)
        w[:, 0] = 1.0
        w[:, -1] = 1.0
        return w

    @cached_property
    def derivative(self) -> tuple[np.ndarray, np.ndarray]:
        """
        Symbols 2 pi i k_j, zeroed on the unpaired Nyquist row and column so
        that derivatives of real fields stay real and div grad^perp vanishes
        mode by mode for the plain symbol 2 pi k.
        """
        half = self.N / 2
        nyq = (self.k1 == -half) | (self.k2 == -half)
        d1 = np.where(nyq, 0.0, 2j * np.pi * self.k1)
        d2 = np.where(nyq, 0.0, 2j * np.pi * self.k2)
        return d1, d2

    @cached_property
    def dealias(self) -> np.ndarray:
        """2/3-rule mask: keep max(|k1|, |k2|) <= N/3."""
        return (np.maximum(np.abs(self.k1), np.abs(self.k2)) <= self.N / 3).astype(float)

    @cached_property
    def descending_order(self) -> np.ndarray:
        """Flat indices of the half spectrum sorted by decreasing |k|."""
        return np.argsort(-self.kmag.ravel(), kind="stable")

    @cached_property
    def full_k(self) -> tuple[np.ndarray, np.ndarray]:
        k = np.fft.fftfreq(self.N, 1.0 / self.N)
        return tuple(np.meshgrid(k, k, indexing="ij"))

    # transforms on raw arrays with arbitrary leading batch axes
    def forward(self, grid: np.ndarray) -> np.ndarray:
        return sfft.rfft2(grid, axes=(-2, -1), norm="forward") * self.phase

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        return sfft.irfft2(coeffs * self.phase, s=(self.N, self.N), axes=(-2, -1),
                           norm="forward")


@dataclass(frozen=True, eq=False)
class SpectralField:
    """A real scalar field on the torus held as half-spectrum coefficients."""

    lattice: FourierLattice
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != self.lattice.half_shape:
            raise ValueError(f"coefficient array {self.coeffs.shape} does not match "
                             f"lattice {self.lattice.half_shape}")

    @classmethod
    def zeros(cls, lattice: FourierLattice) -> SpectralField:
        return cls(lattice, np.zeros(lattice.half_shape, complex))

    @classmethod
    def from_function(cls, lattice: FourierLattice, fn: Callable) -> SpectralField:
        """Sample ``fn(x1, x2)`` on the grid and transform."""
        x1, x2 = lattice.mesh
        return to_spectral(np.broadcast_to(fn(x1, x2), (lattice.N, lattice.N)), lattice)

    @classmethod
    def from_modes(cls, lattice: FourierLattice, modes: dict) -> SpectralField:
        """Build from ``{(k1, k2): amplitude}``; missing conjugate partners are filled in."""
        full = np.zeros((lattice.N, lattice.N), complex)
        N = lattice.N
        for (a, b), val in modes.items():
            full[a % N, b % N] = val
            if (-a, -b) not in modes:
                full[-a % N, -b % N] = np.conj(val)
        return cls(lattice, _half_from_full(_hermitian_project(full)))

    def full(self) -> np.ndarray:
        """Coefficients on the full N x N lattice, indexed [k1 % N, k2 % N]."""
        return _full_from_half(self.coeffs, self.lattice.N)

    def coeff(self, k1: int, k2: int) -> complex:
        return self.full()[k1 % self.lattice.N, k2 % self.lattice.N]

    def physical(self) -> np.ndarray:
        return to_physical(self)

    def mean(self) -> float:
        return float(self.coeffs[0, 0].real)

    def __add__(self, other):
        _check_same(self.lattice, other.lattice)
        return SpectralField(self.lattice, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _check_same(self.lattice, other.lattice)
        return SpectralField(self.lattice, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.lattice, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.lattice, -self.coeffs)


@dataclass(frozen=True, eq=False)
class VectorField:
    u1: SpectralField
    u2: SpectralField

    def divergence(self) -> np.ndarray:
        """Spectral divergence 2 pi i (k1 u1_hat + k2 u2_hat), half layout."""
        lat = self.u1.lattice
        return 2j * np.pi * (lat.k1 * self.u1.coeffs + lat.k2 * self.u2.coeffs)

    def physical(self) -> tuple[np.ndarray, np.ndarray]:
        return to_physical(self.u1), to_physical(self.u2)


def _check_same(a: FourierLattice, b: FourierLattice):
    if a != b:
        raise ValueError(f"lattice mismatch: {a} vs {b}")


def _full_from_half(half: np.ndarray, N: int) -> np.ndarray:
    full = np.empty((N, N), complex)
    full[:, : N // 2 + 1] = half
    # k2 < 0 columns (except -N/2, stored in the half layout) from symmetry
    neg_k1 = (-np.arange(N)) % N
    full[:, N // 2 + 1:] = np.conj(half[neg_k1][:, N // 2 - 1:0:-1])
    return full


def _half_from_full(full: np.ndarray) -> np.ndarray:
    N = full.shape[0]
    return full[:, : N // 2 + 1].copy()


def _hermitian_project(full: np.ndarray) -> np.ndarray:
    N = full.shape[0]
    idx = (-np.arange(N)) % N
    partner = np.conj(full[np.ix_(idx, idx)])
    return 0.5 * (full + partner)


def to_physical(field: SpectralField) -> np.ndarray:
    """Grid values of ``field`` at x = -1/2 + j/N."""
    return field.lattice.inverse(field.coeffs)


def to_spectral(grid: np.ndarray, lattice: FourierLattice | None = None) -> SpectralField:
    """Fourier coefficients of grid values; complex input is projected to its real part."""
    grid = np.asarray(grid)
    if grid.ndim != 2 or grid.shape[0] != grid.shape[1]:
        raise ValueError(f"expected a square 2D grid, got shape {grid.shape}")
    if lattice is None:
        lattice = FourierLattice(grid.shape[0])
    elif grid.shape != (lattice.N, lattice.N):
        raise ValueError(f"grid shape {grid.shape} does not match lattice N={lattice.N}")
    if np.iscomplexobj(grid):
        grid = grid.real
    return SpectralField(lattice, lattice.forward(np.asarray(grid, float)))


def oversampled_physical(coeffs: np.ndarray, lattice: FourierLattice, factor: int = 2
                         ) -> np.ndarray:
    """
    Values of the trigonometric interpolant on a ``factor * N`` grid, with
    the unpaired Nyquist modes dropped.

    The grid is not shifted to start at -1/2; means and L^q norms over the
    torus are unaffected, and with factor 2 the mean of a product of three
    fields is their exact integral.
    """
    N = lattice.N
    h = N // 2
    M = factor * N
    out = np.zeros((*coeffs.shape[:-2], M, M // 2 + 1), complex)
    out[..., :h, :h] = coeffs[..., :h, :h]
    out[..., M - h + 1:, :h] = coeffs[..., h + 1:, :h]
    return sfft.irfft2(out, s=(M, M), norm="forward", axes=(-2, -1))


def fractional_laplacian(field: SpectralField, r: float) -> SpectralField:
    """(-Delta)^r with symbol |2 pi k|^(2r); the mean is zeroed for r > 0."""
    if r < 0:
        raise ValueError("fractional_laplacian needs r >= 0; use apply_multiplier for "
                         "negative orders")
    if r == 0:
        return SpectralField(field.lattice, field.coeffs.copy())
    return SpectralField(field.lattice, laplacian_symbol(field.lattice, r) * field.coeffs)


def laplacian_symbol(lattice: FourierLattice, r: float) -> np.ndarray:
    return (2 * np.pi * lattice.kmag) ** (2 * r)


def sobolev_weights(lattice: FourierLattice, r: float, kind: str = "inhomogeneous") -> np.ndarray:
    k2 = lattice.kmag ** 2
    if kind == "inhomogeneous":
        w = (1.0 + k2) ** r
    elif kind == "homogeneous":
        with np.errstate(divide="ignore"):
            w = np.where(k2 > 0, k2 ** r, 0.0)
    else:
        raise ValueError(f"unknown Sobolev norm kind {kind!r}")
    return w * lattice.weights


def sobolev_sq(coeffs: np.ndarray, lattice: FourierLattice, r: float,
               kind: str = "inhomogeneous") -> np.ndarray:
    """Squared H^r norms of one or many half-spectrum arrays (leading axes kept)."""
    w = sobolev_weights(lattice, r, kind).ravel()
    order = lattice.descending_order
    terms = (w * np.abs(coeffs.reshape(*coeffs.shape[:-2], -1)) ** 2)[..., order]
    return terms.sum(axis=-1)


def sobolev_norm(field: SpectralField, r: float, kind: str = "inhomogeneous") -> float:
    return float(np.sqrt(sobolev_sq(field.coeffs, field.lattice, r, kind)))


# ---------------------------------------------------------------------------
# multipliers


class SymbolLike(Protocol):
    def values(self, lattice: FourierLattice) -> np.ndarray: ...

    def full_values(self, lattice: FourierLattice) -> np.ndarray: ...


class SymbolBoundError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MultiplierSpec:
    """
    Even, real Fourier multiplier of order -1.

    ``symbol(k1, k2)`` is evaluated on nonzero wavevectors only; the zero mode
    is pinned to 0. Construction checks ``c_lower/|k| <= m(k) <= c_upper/|k|``
    and evenness on a ``check_N`` lattice, and every further lattice the multiplier
    is used on is checked the first time it is seen.
    """

    symbol: Callable[[np.ndarray, np.ndarray], np.ndarray]
    c_lower: float
    c_upper: float
    name: str = "custom"
    check_N: int = 256
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not (0 < self.c_lower <= self.c_upper):
            raise SymbolBoundError("need 0 < c_lower <= c_upper")
        self.values(FourierLattice(self.check_N))

    @classmethod
    def riesz(cls, **kw) -> MultiplierSpec:
        """The SQG multiplier m(k) = 1/|k|."""
        return cls(lambda k1, k2: 1.0 / np.hypot(k1, k2), 1.0, 1.0, name="riesz", **kw)

    @classmethod
    def perturbed(cls, amplitude: float = 0.5, decay: float = 1.0, **kw) -> MultiplierSpec:
        """m(k) = |k|^-1 (1 + amplitude * exp(-decay |k|^2)), |amplitude| <= 1/2."""
        if not -0.5 < amplitude <= 0.5 or decay <= 0:
            raise SymbolBoundError("perturbation needs amplitude in (-1/2, 1/2] and decay > 0")

        def symbol(k1, k2):
            kk = k1 ** 2 + k2 ** 2
            return (1.0 + amplitude * np.exp(-decay * kk)) / np.sqrt(kk)

        return cls(symbol, 0.5, 1.5, name=f"perturbed(a={amplitude:g},d={decay:g})", **kw)

    @classmethod
    def from_table(cls, radii, values, **kw) -> MultiplierSpec:
        """
        Radial symbol from a table of (|k|, m) pairs.

        The bounded profile |k| m(|k|) is interpolated linearly and held constant
        beyond the table ends, so the bounds are the extreme tabulated profile values.
        """
        radii = np.asarray(radii, float)
        profile = radii * np.asarray(values, float)
        if radii.ndim != 1 or radii.size < 1 or np.any(np.diff(radii) <= 0):
            raise ValueError("table radii must be strictly increasing")
        lo, hi = float(profile.min()), float(profile.max())

        def symbol(k1, k2):
            kk = np.hypot(k1, k2)
            return np.interp(kk, radii, profile) / kk

        kw.setdefault("name", "table")
        return cls(symbol, lo, hi, **kw)

    def values(self, lattice: FourierLattice) -> np.ndarray:
        """Symbol on the half-spectrum layout, zero at k = 0."""
        hit = self._cache.get(lattice.N)
        if hit is None:
            hit = self._evaluate(lattice)
            self._cache[lattice.N] = hit
        return hit

    def full_values(self, lattice: FourierLattice) -> np.ndarray:
        K1, K2 = lattice.full_k
        return _eval_symbol(self.symbol, K1, K2)

    def _evaluate(self, lattice: FourierLattice) -> np.ndarray:
        full = self.full_values(lattice)
        K1, K2 = lattice.full_k
        kk = np.hypot(K1, K2)
        nz = kk > 0
        tol = 1e-12
        if np.any(full[nz] * kk[nz] < self.c_lower * (1 - tol)) or np.any(
                full[nz] * kk[nz] > self.c_upper * (1 + tol)):
            bad = np.argwhere(nz & ((full * kk < self.c_lower * (1 - tol))
                                    | (full * kk > self.c_upper * (1 + tol))))[0]
            raise SymbolBoundError(f"symbol {self.name} violates the order -1 bounds at "
                                   f"k index {tuple(bad)} on N={lattice.N}")
        N = lattice.N
        mirror = _eval_symbol(self.symbol, -K1, -K2)
        # -k is on the lattice unless a component equals -N/2
        on = (K1 != -N / 2) & (K2 != -N / 2)
        if not np.allclose(full[on], mirror[on], rtol=1e-14, atol=0):
            raise SymbolBoundError(f"symbol {self.name} is not even")
        return np.ascontiguousarray(full[:, : N // 2 + 1])

    def __sub__(self, other: SymbolLike) -> SymbolDifference:
        return SymbolDifference(self, other)


def _eval_symbol(symbol, K1, K2) -> np.ndarray:
    out = np.zeros(K1.shape)
    nz = (K1 != 0) | (K2 != 0)
    out[nz] = symbol(K1[nz], K2[nz])
    return out


@dataclass(frozen=True, eq=False)
class SymbolDifference:
    """m1 - m2 for two specs; exempt from the order -1 bound (may vanish)."""

    first: SymbolLike
    second: SymbolLike

    def values(self, lattice: FourierLattice) -> np.ndarray:
        return self.first.values(lattice) - self.second.values(lattice)

    def full_values(self, lattice: FourierLattice) -> np.ndarray:
        return self.first.full_values(lattice) - self.second.full_values(lattice)


def apply_multiplier(field: SpectralField, spec: SymbolLike) -> SpectralField:
    """The convolution K * field, computed as m(k) u_hat(k) with zero mean."""
    return SpectralField(field.lattice, spec.values(field.lattice) * field.coeffs)


def gradient(field: SpectralField) -> VectorField:
    d1, d2 = field.lattice.derivative
    return VectorField(SpectralField(field.lattice, d1 * field.coeffs),
                       SpectralField(field.lattice, d2 * field.coeffs))


def perp_gradient(field: SpectralField) -> VectorField:
    """(-d2, d1) applied to ``field``."""
    d1, d2 = field.lattice.derivative
    return VectorField(SpectralField(field.lattice, -d2 * field.coeffs),
                       SpectralField(field.lattice, d1 * field.coeffs))


def velocity(field: SpectralField, spec: SymbolLike) -> VectorField:
    """u = (-d2 K theta, d1 K theta); divergence-free mode by mode."""
    return perp_gradient(apply_multiplier(field, spec))


def kernel_physical(spec: SymbolLike, x, lattice: FourierLattice) -> np.ndarray | float:
    """
    Truncated kernel sum_{k != 0} m(k) exp(2 pi i x.k) over the lattice.

    ``x`` is one point or an array of shape (P, 2). Points at the origin (mod 1)
    are rejected because the untruncated kernel is singular there.
    """
    pts = np.atleast_2d(np.asarray(x, float))
    _reject_origin(pts)
    return _lattice_sum(spec.full_values(lattice), lattice, pts, np.asarray(x).ndim == 1)


def kernel_gradient_physical(spec: SymbolLike, x, j: int, lattice: FourierLattice):
    """d_j of the truncated kernel: sum 2 pi i k_j m(k) exp(2 pi i x.k)."""
    if j not in (1, 2):
        raise ValueError("axis must be 1 or 2")
    pts = np.atleast_2d(np.asarray(x, float))
    _reject_origin(pts)
    K = lattice.full_k[j - 1]
    return _lattice_sum(2j * np.pi * K * spec.full_values(lattice), lattice, pts,
                        np.asarray(x).ndim == 1)


def _reject_origin(pts):
    wrapped = pts - np.round(pts)
    if np.any(np.all(np.abs(wrapped) < 1e-15, axis=1)):
        raise ValueError("kernel evaluation at the origin is not allowed")


def _lattice_sum(weights_full, lattice, pts, scalar):
    K1, K2 = lattice.full_k
    nz = weights_full != 0
    w = weights_full[nz]
    k1, k2 = K1[nz], K2[nz]
    out = np.empty(len(pts))
    for i, (a, b) in enumerate(pts):
        out[i] = np.sum(w * np.exp(2j * np.pi * (a * k1 + b * k2))).real
    return float(out[0]) if scalar else out


def advection_coeffs(theta: np.ndarray, spec_values: np.ndarray, lattice: FourierLattice,
                     with_speed: bool = False):
    """
    Dealiased u.grad(theta) on raw half-spectrum arrays.

    Returns the coefficients (mean exactly zero) and, optionally, max |u| on the grid.
    """
    d1, d2 = lattice.derivative
    th = theta * lattice.dealias
    psi = spec_values * th
    stack = np.stack([-d2 * psi, d1 * psi, d1 * th, d2 * th])
    u1, u2, g1, g2 = lattice.inverse(stack)
    out = lattice.forward(u1 * g1 + u2 * g2) * lattice.dealias
    out[0, 0] = 0.0
    if with_speed:
        return out, float(np.sqrt((u1 * u1 + u2 * u2).max()))
    return out


def advection_term(theta: SpectralField, spec: SymbolLike) -> SpectralField:
    """u.grad(theta) with u the velocity of ``theta``; 2/3-rule dealiased."""
    lat = theta.lattice
    return SpectralField(lat, advection_coeffs(theta.coeffs, spec.values(lat), lat))


# ---------------------------------------------------------------------------
# binary snapshots


def write_snapshot(path, field: SpectralField) -> None:
    """FSQG v1: magic, version byte, u32 N, then N*N little-endian f64, row = x2 index."""
    grid = to_physical(field)
    N = field.lattice.N
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC + bytes([SNAPSHOT_VERSION]) + struct.pack("<I", N))
        fh.write(np.ascontiguousarray(grid.T, dtype="<f8").tobytes())


def read_snapshot(path) -> SpectralField:
    data = Path(path).read_bytes()
    if data[:4] != SNAPSHOT_MAGIC or data[4] != SNAPSHOT_VERSION:
        raise ValueError(f"{path}: not an FSQG v{SNAPSHOT_VERSION} snapshot")
    (N,) = struct.unpack("<I", data[5:9])
    body = np.frombuffer(data, dtype="<f8", offset=9)
    if body.size != N * N:
        raise ValueError(f"{path}: expected {N * N} values, found {body.size}")
    return to_spectral(body.reshape(N, N).T.astype(float), FourierLattice(N))
