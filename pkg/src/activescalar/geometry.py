"""Windows, cutoffs and compactly supported bumps on the torus."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .spectral import FourierLattice, SpectralField, to_spectral


def smoothstep3(t):
    """C^3 polynomial blend from 0 (t <= 0) to 1 (t >= 1)."""
    t = np.clip(t, 0.0, 1.0)
    return t ** 4 * (35 - 84 * t + 70 * t ** 2 - 20 * t ** 3)


def cinf_step(t):
    """C^infinity blend from 0 to 1 built from exp(-1/t)."""
    t = np.clip(np.asarray(t, float), 0.0, 1.0)
    a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def cinf_step_derivative(t):
    t = np.asarray(t, float)
    inside = (t > 0) & (t < 1)
    ts = np.where(inside, t, 0.5)
    a = np.exp(-1.0 / ts)
    b = np.exp(-1.0 / (1.0 - ts))
    da = a / ts ** 2
    db = -b / (1.0 - ts) ** 2
    d = (da * (a + b) - a * (da + db)) / (a + b) ** 2
    return np.where(inside, d, 0.0)


def periodic_offset(x1, x2, center):
    """Minimal-image displacement from ``center`` on the unit torus."""
    d1 = x1 - center[0]
    d2 = x2 - center[1]
    return d1 - np.round(d1), d2 - np.round(d2)


def torus_distance(a, b) -> float:
    d = np.asarray(a, float) - np.asarray(b, float)
    d -= np.round(d)
    return float(np.hypot(*d))


@dataclass(frozen=True)
class Window:
    """
    Observation window W: a disk with a smooth interior mask.

    ``mask`` is 1 for r <= radius/2, 0 for r >= radius. The exterior mask
    for the complement of the closed disk is 0 for r <= radius and 1 for
    r >= 3*radius/2. Both transitions use the C^3 polynomial blend.
    """

    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.1

    def __post_init__(self):
        if not 0 < self.radius < 0.25:
            raise ValueError(f"window radius must lie in (0, 1/4), got {self.radius}")
        c = tuple(float(v) for v in self.center)
        if any(not -0.5 <= v < 0.5 for v in c):
            raise ValueError(f"window center must lie in [-1/2, 1/2)^2, got {c}")
        object.__setattr__(self, "center", c)

    def distance(self, lattice: FourierLattice) -> np.ndarray:
        d1, d2 = periodic_offset(*lattice.mesh, self.center)
        return np.hypot(d1, d2)

    def mask(self, lattice: FourierLattice) -> np.ndarray:
        r = self.distance(lattice)
        half = self.radius / 2
        return 1.0 - smoothstep3((r - half) / half)

    def exterior_mask(self, lattice: FourierLattice) -> np.ndarray:
        r = self.distance(lattice)
        return smoothstep3((r - self.radius) / (self.radius / 2))

    def indicator(self, lattice: FourierLattice) -> np.ndarray:
        """Grid points inside the open disk."""
        return self.distance(lattice) < self.radius

    def supports(self, grid_values: np.ndarray, lattice: FourierLattice, tol=1e-12) -> bool:
        """True if ``grid_values`` vanish (to ``tol``) outside the disk."""
        outside = ~self.indicator(lattice)
        scale = max(1.0, float(np.abs(grid_values).max(initial=0.0)))
        return bool(np.abs(grid_values[..., outside]).max(initial=0.0) <= tol * scale)

    def avoids(self, grid_values: np.ndarray, lattice: FourierLattice, tol=1e-12) -> bool:
        """True if ``grid_values`` vanish on the closed disk."""
        inside = self.distance(lattice) <= self.radius
        scale = max(1.0, float(np.abs(grid_values).max(initial=0.0)))
        return bool(np.abs(grid_values[..., inside]).max(initial=0.0) <= tol * scale)

    def spectral_tail(self, lattice: FourierLattice) -> float:
        """Largest Fourier coefficient of either mask on the lattice boundary |k_j| = N/2."""
        out = 0.0
        for m in (self.mask(lattice), self.exterior_mask(lattice)):
            c = to_spectral(m, lattice).coeffs
            edge = (np.abs(lattice.k1) == lattice.N / 2) | (np.abs(lattice.k2) == lattice.N / 2)
            out = max(out, float(np.abs(c[edge]).max()))
        return out


@lru_cache(maxsize=None)
def _bump_mass_unit() -> float:
    val, _ = integrate.quad(lambda s: 2 * np.pi * s * np.exp(-1.0 / (1.0 - s * s)), 0.0, 1.0,
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def bump_profile(r, width):
    """exp(-1/(1 - (r/w)^2)) for r < w, normalised to unit mass on the plane."""
    s = np.asarray(r, float) / width
    inside = s < 1
    ss = np.where(inside, s, 0.0)
    vals = np.where(inside, np.exp(-1.0 / (1.0 - ss * ss)), 0.0)
    return vals / (_bump_mass_unit() * width ** 2)


def radial_bump(lattice: FourierLattice, center, width: float) -> SpectralField:
    """Unit-mass C^infinity bump of support radius ``width``."""
    if not 0 < width < 0.5:
        raise ValueError("bump width must lie in (0, 1/2)")
    d1, d2 = periodic_offset(*lattice.mesh, center)
    return to_spectral(bump_profile(np.hypot(d1, d2), width), lattice)


def bump_support(lattice: FourierLattice, center, width: float) -> np.ndarray:
    d1, d2 = periodic_offset(*lattice.mesh, center)
    return np.hypot(d1, d2) < width
