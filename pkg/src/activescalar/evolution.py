"""
Time integration: linear fractional diffusion, its backward dual, and the
nonlinear active scalar equation.

All solvers share one per-mode propagator. Over a step of length h, a mode
with decay rate lam = |2 pi k|^(2 alpha) evolves as

    u_{m+1} = E u_m + a F_m + b F_{m+1},    E = exp(-lam h),

where a and b integrate exp(-lam (h - s)) against the linear interpolant of
the forcing. The nonlinear solver adds the advection term through an
exponential Heun (ETD-RK2) correction on top of the same source increment,
so with vanishing advection it reproduces the linear solver bit for bit.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .geometry import Window
from .spectral import (FourierLattice, SpectralField, SymbolLike, advection_coeffs,
                       laplacian_symbol, oversampled_physical, read_snapshot, sobolev_sq,
                       write_snapshot)


class SolverError(RuntimeError):
    pass


class CFLError(SolverError):
    def __init__(self, step: int, courant: float):
        super().__init__(f"CFL condition violated at step {step}: max|u| dt N = {courant:.4g} > 1")
        self.step = step
        self.courant = courant


class BlowupError(SolverError):
    def __init__(self, step: int):
        super().__init__(f"non-finite values in solution at step {step}")
        self.step = step


@dataclass(frozen=True)
class TimeGrid:
    T: float
    M: int

    def __post_init__(self):
        if not self.T > 0 or int(self.M) != self.M or self.M < 1:
            raise ValueError(f"need T > 0 and integer M >= 1, got T={self.T}, M={self.M}")

    @property
    def dt(self) -> float:
        return self.T / self.M

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.M + 1) * self.dt

    def refined(self, factor: int = 2) -> TimeGrid:
        return TimeGrid(self.T, self.M * factor)

    def index(self, t: float) -> int:
        m = int(round(t / self.dt))
        if abs(m * self.dt - t) > 1e-9 * self.dt or not 0 <= m <= self.M:
            raise ValueError(f"t={t} is not a node of {self}")
        return m

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.M + 1, self.dt)
        w[0] = w[-1] = self.dt / 2
        return w


def check_alpha(alpha: float):
    if not 0.5 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (1/2, 1), got {alpha}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Solution states at every node of ``timegrid``, stored as half spectra."""

    timegrid: TimeGrid
    lattice: FourierLattice
    coeffs: np.ndarray

    def __post_init__(self):
        expect = (self.timegrid.M + 1, *self.lattice.half_shape)
        if self.coeffs.shape != expect:
            raise ValueError(f"trajectory array {self.coeffs.shape}, expected {expect}")

    def __len__(self):
        return self.timegrid.M + 1

    def __getitem__(self, m) -> SpectralField:
        return SpectralField(self.lattice, self.coeffs[m])

    @property
    def states(self) -> list[SpectralField]:
        return [self[m] for m in range(len(self))]

    @property
    def times(self) -> np.ndarray:
        return self.timegrid.times

    def physical(self) -> np.ndarray:
        return self.lattice.inverse(self.coeffs)

    def __sub__(self, other: Trajectory) -> Trajectory:
        _check_compatible(self, other)
        return Trajectory(self.timegrid, self.lattice, self.coeffs - other.coeffs)

    def __add__(self, other: Trajectory) -> Trajectory:
        _check_compatible(self, other)
        return Trajectory(self.timegrid, self.lattice, self.coeffs + other.coeffs)

    def __mul__(self, scalar) -> Trajectory:
        return Trajectory(self.timegrid, self.lattice, self.coeffs * float(scalar))

    __rmul__ = __mul__


def _check_compatible(a: Trajectory, b: Trajectory):
    if a.timegrid != b.timegrid or a.lattice != b.lattice:
        raise ValueError("trajectories live on different grids")


def temporal_bump(t, t_a: float, t_b: float):
    """exp(-1/(1 - tau^2)) on tau = (2t - t_a - t_b)/(t_b - t_a), zero outside."""
    tau = (2 * np.asarray(t, float) - t_a - t_b) / (t_b - t_a)
    inside = np.abs(tau) < 1
    ts = np.where(inside, tau, 0.0)
    return np.where(inside, np.exp(-1.0 / (1.0 - ts * ts)), 0.0)


class SourceTerm:
    """
    Forcing f(x, t), evaluated on demand at time nodes.

    ``sampler(times)`` returns half-spectrum coefficients with a leading time
    axis. Use :meth:`separable` for X(x) beta(t) sources and :meth:`sampled`
    for sources known only on a time grid (linear in time between nodes).
    """

    def __init__(self, lattice: FourierLattice, sampler: Callable[[np.ndarray], np.ndarray],
                 t_support: tuple[float, float] | None = None, window: Window | None = None,
                 label: str = ""):
        self.lattice = lattice
        self._sampler = sampler
        self.t_support = t_support
        self.window = window
        self.label = label

    @classmethod
    def separable(cls, spatial: SpectralField, t_support=None, profile=None,
                  window: Window | None = None, amplitude: float = 1.0, label: str = ""):
        """
        ``amplitude * spatial(x) * profile(t)``; the profile defaults to the
        compact bump on ``t_support`` and to a constant if no support is given.
        """
        if profile is None:
            if t_support is None:
                profile = np.ones_like
            else:
                t_a, t_b = t_support
                if not t_a < t_b:
                    raise ValueError("temporal support needs t_a < t_b")
                profile = lambda t: temporal_bump(t, t_a, t_b)  # noqa: E731
        C = spatial.coeffs * float(amplitude)
        if window is not None and not window.supports(spatial.physical(), spatial.lattice):
            raise ValueError("spatial pattern is not supported in the window")

        def sampler(times):
            return np.asarray(profile(np.asarray(times, float)), float)[:, None, None] * C

        return cls(spatial.lattice, sampler, t_support, window, label)

    @classmethod
    def sampled(cls, grid: TimeGrid, coeffs: np.ndarray, lattice: FourierLattice,
                window: Window | None = None, label: str = ""):
        coeffs = np.asarray(coeffs)
        if coeffs.shape != (grid.M + 1, *lattice.half_shape):
            raise ValueError(f"sampled source has shape {coeffs.shape}")
        nodes = grid.times

        def sampler(times):
            times = np.asarray(times, float)
            if times.shape == nodes.shape and np.allclose(times, nodes, rtol=0, atol=1e-12):
                return coeffs
            idx = np.clip(np.searchsorted(nodes, times, side="right") - 1, 0, grid.M - 1)
            w = ((times - nodes[idx]) / grid.dt)[:, None, None]
            return (1 - w) * coeffs[idx] + w * coeffs[idx + 1]

        return cls(lattice, sampler, (0.0, grid.T), window, label)

    @classmethod
    def zero(cls, lattice: FourierLattice):
        return cls(lattice, lambda t: np.zeros((len(np.atleast_1d(t)), *lattice.half_shape),
                                              complex), None, None, "zero")

    def sample(self, grid: TimeGrid) -> np.ndarray:
        return self._sampler(grid.times)

    def at(self, t: float) -> SpectralField:
        return SpectralField(self.lattice, self._sampler(np.array([t]))[0])

    def reversed(self, T: float) -> SourceTerm:
        """The source t -> f(T - t)."""
        inner = self._sampler
        sup = None if self.t_support is None else (T - self.t_support[1], T - self.t_support[0])
        return SourceTerm(self.lattice, lambda times: inner(T - np.asarray(times, float)),
                          sup, self.window, self.label)

    def __add__(self, other: SourceTerm) -> SourceTerm:
        if other.lattice != self.lattice:
            raise ValueError("sources live on different lattices")
        a, b = self._sampler, other._sampler
        return SourceTerm(self.lattice, lambda t: a(t) + b(t),
                          _hull(self.t_support, other.t_support),
                          self.window if self.window == other.window else None)

    def __mul__(self, scalar) -> SourceTerm:
        s = float(scalar)
        inner = self._sampler
        return SourceTerm(self.lattice, lambda t: s * inner(t), self.t_support, self.window,
                          self.label)

    __rmul__ = __mul__

    def __neg__(self):
        return -1.0 * self

    def __sub__(self, other):
        return self + (-1.0) * other


def _hull(a, b):
    if a is None or b is None:
        return None
    return (min(a[0], b[0]), max(a[1], b[1]))


def etd_weights(lam: np.ndarray, dt: float):
    """E = exp(-lam dt) and the trapezoid-in-Duhamel weights a, b."""
    z = np.asarray(lam, float) * dt
    E = np.exp(-z)
    small = z < 1e-2
    zs = np.where(small, 1.0, z)
    phi1 = -np.expm1(-zs) / zs
    phi2 = (zs + np.expm1(-zs)) / zs ** 2
    # Taylor series where cancellation bites; z = 0 gives a = b = dt/2
    zt = np.where(small, z, 0.0)
    t1 = np.zeros_like(zt)
    t2 = np.zeros_like(zt)
    fact = 1.0
    for n in range(10):
        fact_n1 = fact * (n + 1)
        t1 += (-zt) ** n / fact_n1
        t2 += (-zt) ** n / (fact_n1 * (n + 2))
        fact = fact_n1
    phi1 = np.where(small, t1, phi1)
    phi2 = np.where(small, t2, phi2)
    return E, dt * (phi1 - phi2), dt * phi2


def duhamel(F: np.ndarray, lam: np.ndarray, dt: float) -> np.ndarray:
    """Propagate u' = -lam u + F from u(0) = 0 over sampled forcing ``F``."""
    E, a, b = etd_weights(lam, dt)
    U = np.empty_like(F, dtype=complex)
    U[0] = 0.0
    for m in range(F.shape[0] - 1):
        U[m + 1] = E * U[m] + (a * F[m] + b * F[m + 1])
    return U


def solve_fractional_diffusion(f: SourceTerm, alpha: float, grid: TimeGrid) -> Trajectory:
    """Solve u_t + (-Delta)^alpha u = f, u(0) = 0."""
    check_alpha(alpha)
    lat = f.lattice
    U = duhamel(f.sample(grid), laplacian_symbol(lat, alpha), grid.dt)
    return Trajectory(grid, lat, U)


def solve_dual(g: SourceTerm, alpha: float, grid: TimeGrid) -> Trajectory:
    """Solve -v_t + (-Delta)^alpha v = g, v(T) = 0, by time reversal."""
    check_alpha(alpha)
    forward = solve_fractional_diffusion(g.reversed(grid.T), alpha, grid)
    return Trajectory(grid, g.lattice, forward.coeffs[::-1].copy())


def solve_active_scalar(f: SourceTerm, spec: SymbolLike, alpha: float, grid: TimeGrid,
                        courant_limit: float = 1.0) -> Trajectory:
    """
    Solve theta_t + u.grad(theta) + (-Delta)^alpha theta = f with u the
    velocity of theta under ``spec`` and theta(0) = 0.

    Raises CFLError when max|u| dt N exceeds ``courant_limit`` and
    BlowupError on non-finite values.
    """
    check_alpha(alpha)
    lat = f.lattice
    dt = grid.dt
    E, a, b = etd_weights(laplacian_symbol(lat, alpha), dt)
    ab = a + b
    mvals = spec.values(lat)
    F = f.sample(grid)
    theta = np.empty((grid.M + 1, *lat.half_shape), complex)
    theta[0] = 0.0
    for m in range(grid.M):
        th = theta[m]
        base = E * th + (a * F[m] + b * F[m + 1])
        adv, umax = advection_coeffs(th, mvals, lat, with_speed=True)
        courant = umax * dt * lat.N
        if courant > courant_limit:
            raise CFLError(m, courant)
        pred = base - ab * adv
        adv_pred = advection_coeffs(pred, mvals, lat)
        new = base - (a * adv + b * adv_pred)
        if not np.all(np.isfinite(new)):
            raise BlowupError(m + 1)
        theta[m + 1] = new
    return Trajectory(grid, lat, theta)


@dataclass
class LqReport:
    times: np.ndarray
    lq_norm: np.ndarray
    bound: np.ndarray
    passed: np.ndarray
    q: float
    reduced: bool

    @property
    def ok(self) -> bool:
        return bool(np.all(self.passed))


def q_admissible(q: float, alpha: float) -> bool:
    """0 < 1/q <= alpha - 1/2; the endpoint (e.g. q = 4 at alpha = 3/4) is accepted."""
    return q > 0 and 1.0 / q <= alpha - 0.5 + 1e-12


def lq_norm(grid_values: np.ndarray, q: float) -> np.ndarray:
    """L^q norms over the unit torus by grid quadrature (leading axes kept)."""
    return np.mean(np.abs(grid_values) ** q, axis=(-2, -1)) ** (1.0 / q)


def lq_series(coeffs: np.ndarray, lattice: FourierLattice, q: float, chunk: int = 64
              ) -> np.ndarray:
    """L^q norm of each state, by quadrature on the 2x oversampled grid."""
    out = np.empty(coeffs.shape[0])
    for s in range(0, coeffs.shape[0], chunk):
        out[s:s + chunk] = lq_norm(oversampled_physical(coeffs[s:s + chunk], lattice), q)
    return out


def lq_bound_check(traj: Trajectory, f: SourceTerm, q: float, alpha: float,
                   rtol: float = 1e-10) -> LqReport:
    """
    Check ||theta(t)||_{L^q} <= int_0^t ||f||_{L^q} at every node.

    Sources with nonzero spatial mean are reduced first: the mean is removed
    from f and its running time integral from theta.
    """
    check_alpha(alpha)
    if not q_admissible(q, alpha):
        raise ValueError(f"q={q} violates 0 < 1/q <= alpha - 1/2 = {alpha - 0.5:g}")
    grid = traj.timegrid
    lat = traj.lattice
    F = f.sample(grid).copy()
    Th = traj.coeffs.copy()
    scale = float(np.abs(F).max(initial=0.0))
    reduced = bool(np.any(np.abs(F[:, 0, 0]) > 1e-12 * scale))
    if reduced:
        F[:, 0, 0] = 0.0
        Th[:, 0, 0] = 0.0
    lhs = lq_series(Th, lat, q)
    fq = lq_series(F, lat, q)
    rhs = np.concatenate([[0.0], np.cumsum(0.5 * grid.dt * (fq[1:] + fq[:-1]))])
    slack = rtol * max(float(rhs.max()), 0.0)
    return LqReport(grid.times, lhs, rhs, lhs <= rhs + slack, q, reduced)


def l2_series(traj: Trajectory) -> np.ndarray:
    """||theta(t_m)||_{L^2} at every node (Parseval)."""
    return np.sqrt(sobolev_sq(traj.coeffs, traj.lattice, 0.0))


# ---------------------------------------------------------------------------
# trajectory dumps


def write_trajectory(directory, traj: Trajectory, **metadata) -> Path:
    """
    One FSQG snapshot per node, named t_%06d.bin, plus ``manifest.ini``
    recording T, M, N and any extra ``metadata`` (alpha, multiplier, ...).
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for m in range(len(traj)):
        write_snapshot(d / f"t_{m:06d}.bin", traj[m])
    cp = configparser.ConfigParser()
    cp["trajectory"] = {"T": repr(float(traj.timegrid.T)), "M": str(traj.timegrid.M),
                        "N": str(traj.lattice.N)}
    cp["metadata"] = {str(k): str(v) for k, v in sorted(metadata.items())}
    with open(d / "manifest.ini", "w") as fh:
        cp.write(fh)
    return d


def read_trajectory(directory) -> Trajectory:
    d = Path(directory)
    cp = configparser.ConfigParser()
    if not cp.read(d / "manifest.ini"):
        raise ValueError(f"{d}: no trajectory manifest")
    sec = cp["trajectory"]
    grid = TimeGrid(float(sec["T"]), int(sec["M"]))
    lat = FourierLattice(int(sec["N"]))
    coeffs = np.empty((grid.M + 1, *lat.half_shape), complex)
    for m in range(grid.M + 1):
        snap = read_snapshot(d / f"t_{m:06d}.bin")
        if snap.lattice != lat:
            raise ValueError(f"{d}: snapshot {m} has N={snap.lattice.N}")
        coeffs[m] = snap.coeffs
    return Trajectory(grid, lat, coeffs)
