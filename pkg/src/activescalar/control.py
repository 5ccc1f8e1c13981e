"""
Exterior approximation by interior sources.

Given a target g on the exterior of a window W, find a source supported in
W x (0, T) whose fractional-diffusion response matches g there. The
problem is solved as Tikhonov-regularised least squares

    J(c) = 1/2 ||chi_e u_{chi c} - g||^2 + lam/2 ||c||^2,

with chi the window mask, chi_e the exterior mask, and norms taken in
space-time L^2 (grid mean in space, trapezoid in time). The target g is
data on the exterior, so callers pass it already restricted there (e.g.
g = chi_e u_{f*}); the planted source f* then has zero misfit. The control
c lives on the interior time nodes; the applied source is f = chi c.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .evolution import (SourceTerm, TimeGrid, Trajectory, check_alpha, duhamel, etd_weights,
                        solve_dual)
from .geometry import Window
from .spectral import FourierLattice, laplacian_symbol


def _inner(x: np.ndarray, y: np.ndarray, tw: np.ndarray) -> float:
    return float(np.dot(tw, np.mean(x * y, axis=(-2, -1))))


def adjoint_duhamel(Y: np.ndarray, lam: np.ndarray, dt: float) -> np.ndarray:
    """
    Transpose of the forward propagator applied to ``Y`` (unweighted).

    For forcing and data vanishing at both end nodes this coincides with the
    time-reversed dual solve scaled by dt; otherwise it also carries the
    final-node contribution the trapezoid rule assigns.
    """
    E, a, b = etd_weights(lam, dt)
    M = Y.shape[0] - 1
    Z = np.empty_like(Y, dtype=complex)
    Q = Y[M].astype(complex)
    Z[M] = b * Q
    for j in range(M - 1, -1, -1):
        Q_next = Q
        Q = Y[j] + E * Q_next
        Z[j] = a * Q_next + (b * Q if j > 0 else 0.0)
    return Z


class _Operators:
    """Forward map c -> chi_e u_{chi c} and its adjoint on physical arrays."""

    def __init__(self, window: Window, lattice: FourierLattice, alpha: float, grid: TimeGrid):
        check_alpha(alpha)
        self.lattice = lattice
        self.grid = grid
        self.chi = window.mask(lattice)
        self.chi_e = window.exterior_mask(lattice)
        self.lam = laplacian_symbol(lattice, alpha)
        self.tw = grid.trapezoid_weights()
        self.ctrl_w = self.tw.copy()
        self.ctrl_w[0] = self.ctrl_w[-1] = 0.0
        E, a, b = etd_weights(self.lam, grid.dt)
        self._E, self._a, self._b = E, a, b

    def response(self, c: np.ndarray) -> np.ndarray:
        """Physical u for source chi c."""
        lat = self.lattice
        return lat.inverse(duhamel(lat.forward(self.chi * c), self.lam, self.grid.dt))

    def adjoint(self, s: np.ndarray) -> np.ndarray:
        """Riesz representer of c -> <s, u_{chi c}> on the control nodes."""
        lat = self.lattice
        Y = lat.forward(s * self.tw[:, None, None])
        Z = lat.inverse(adjoint_duhamel(Y, self.lam, self.grid.dt))
        del Y
        out = self.chi * Z
        out[1:-1] /= self.grid.dt
        out[0] = out[-1] = 0.0
        return out


def _project(c: np.ndarray) -> np.ndarray:
    c = np.array(c, float)
    c[0] = c[-1] = 0.0
    return c


def _physical_target(g, lattice: FourierLattice, grid: TimeGrid) -> np.ndarray:
    if isinstance(g, Trajectory):
        return g.physical()
    if isinstance(g, SourceTerm):
        return lattice.inverse(g.sample(grid))
    g = np.asarray(g, float)
    if g.shape != (grid.M + 1, lattice.N, lattice.N):
        raise ValueError(f"target has shape {g.shape}")
    return g


def _control_array(f, lattice: FourierLattice, grid: TimeGrid) -> np.ndarray:
    if isinstance(f, SourceTerm):
        return _project(lattice.inverse(f.sample(grid)))
    return _project(f)


def control_objective(f, g, window: Window, alpha: float, grid: TimeGrid, lam: float,
                      lattice: FourierLattice | None = None) -> float:
    """
    1/2 ||chi_e u_{chi f} - g||^2 + lam/2 ||f||^2 over space-time.

    ``f`` is the control before masking (a SourceTerm or physical array on
    the time nodes); its end-node values are dropped.
    """
    lattice = lattice or _lattice_of(f, g)
    ops = _Operators(window, lattice, alpha, grid)
    c = _control_array(f, lattice, grid)
    gp = _physical_target(g, lattice, grid)
    r = ops.chi_e * ops.response(c) - gp
    return 0.5 * _inner(r, r, ops.tw) + 0.5 * lam * _inner(c, c, ops.ctrl_w)


def control_gradient(f, g, window: Window, alpha: float, grid: TimeGrid, lam: float,
                     lattice: FourierLattice | None = None) -> SourceTerm:
    """
    Gradient of :func:`control_objective`: chi v + lam f, where v is the
    adjoint state driven by the exterior misfit (zero inside W).
    """
    lattice = lattice or _lattice_of(f, g)
    ops = _Operators(window, lattice, alpha, grid)
    c = _control_array(f, lattice, grid)
    gp = _physical_target(g, lattice, grid)
    misfit = ops.chi_e * ops.response(c) - gp
    grad = ops.adjoint(ops.chi_e * misfit) + lam * c
    grad[0] = grad[-1] = 0.0
    return SourceTerm.sampled(grid, lattice.forward(grad), lattice, label="gradient")


def dual_adjoint_state(misfit: SourceTerm, alpha: float, grid: TimeGrid) -> Trajectory:
    """Plain dual solve of the misfit; equals the adjoint state when it vanishes at t=0, T."""
    return solve_dual(misfit, alpha, grid)


def _lattice_of(*objs) -> FourierLattice:
    for o in objs:
        if isinstance(o, (SourceTerm, Trajectory)):
            return o.lattice
        if isinstance(o, np.ndarray) and o.ndim == 3:
            return FourierLattice(o.shape[-1])
    raise ValueError("cannot infer the lattice; pass lattice=")


@dataclass
class ControlResult:
    f_opt: SourceTerm
    control: np.ndarray
    objective: list[float] = field(default_factory=list)
    data_misfit: list[float] = field(default_factory=list)
    gradient_norm: list[float] = field(default_factory=list)
    relative_residual: float = np.nan
    converged: bool = False
    iterations: int = 0

    @property
    def residual_history(self) -> list[float]:
        return self.data_misfit

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "objective", "data_misfit", "gradient_norm"])
            for i, row in enumerate(zip(self.objective, self.data_misfit, self.gradient_norm)):
                w.writerow([i, *(repr(float(v)) for v in row)])


def approximate_control(g, window: Window, alpha: float, grid: TimeGrid, lam: float,
                        maxiter: int = 50, lattice: FourierLattice | None = None,
                        target_residual: float | None = None, gtol: float = 1e-12) -> ControlResult:
    """
    Minimise the regularised objective by conjugate gradients from f = 0.

    Stops when the relative exterior residual drops to ``target_residual``,
    when the gradient norm falls by ``gtol``, or after ``maxiter`` iterations;
    in the last case ``converged`` is False and the final (lowest-objective)
    iterate is returned.
    """
    if not lam > 0:
        raise ValueError("lam must be positive: the unregularised problem is ill-posed")
    lattice = lattice or _lattice_of(g)
    ops = _Operators(window, lattice, alpha, grid)
    gp = _physical_target(g, lattice, grid)
    tw, cw = ops.tw, ops.ctrl_w
    g_norm = np.sqrt(_inner(gp, gp, tw))
    if g_norm == 0:
        raise ValueError("target vanishes identically")

    c = np.zeros_like(gp)
    Ac = np.zeros_like(gp)              # chi_e u_{chi c}
    grad = -ops.adjoint(ops.chi_e * gp)  # gradient at c = 0
    p = -grad
    gg = _inner(grad, grad, cw)
    g0 = np.sqrt(gg)

    result = ControlResult(f_opt=None, control=c)

    def record():
        r = Ac - gp
        mis = 0.5 * _inner(r, r, tw)
        result.data_misfit.append(mis)
        result.objective.append(mis + 0.5 * lam * _inner(c, c, cw))
        result.gradient_norm.append(float(np.sqrt(gg)))
        return np.sqrt(2 * mis) / g_norm

    rel = record()
    converged = target_residual is not None and rel <= target_residual
    it = 0
    while not converged and it < maxiter and gg > 0:
        Ap = ops.chi_e * ops.response(p)
        Hp = ops.adjoint(ops.chi_e * Ap) + lam * p
        Hp[0] = Hp[-1] = 0.0
        curv = _inner(p, Hp, cw)
        if curv <= 0:
            break
        step = gg / curv
        c += step * p
        Ac += step * Ap
        grad += step * Hp
        del Ap, Hp
        gg_new = _inner(grad, grad, cw)
        p *= gg_new / gg
        p -= grad
        gg = gg_new
        it += 1
        rel = record()
        converged = (target_residual is not None and rel <= target_residual) or \
            np.sqrt(gg) <= gtol * g0

    result.iterations = it
    result.relative_residual = float(rel)
    result.converged = bool(converged)
    f_opt = ops.chi * c
    result.control = c
    result.f_opt = SourceTerm.sampled(grid, lattice.forward(f_opt), lattice, window=window,
                                      label="f_opt")
    return result
