"""
First- and second-order linearization of the active scalar equation.

For a source f and small eps, theta_{eps f} / eps approaches the linear
solution w = solve_fractional_diffusion(f), and the mixed second difference

    (theta_{eps(f1+f2)} - theta_{eps f1} - theta_{eps f2}) / eps^2

approaches the solution v of the linear equation driven by the symmetrised
bilinear advection -(u[w1].grad w2 + u[w2].grad w1). The functions here
measure both residuals in the norms the estimates are stated in and fit
log-log rates over an eps sweep.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .evolution import (SourceTerm, TimeGrid, Trajectory, solve_active_scalar,
                        solve_fractional_diffusion)
from .spectral import FourierLattice, SpectralField, SymbolLike, sobolev_sq

RESIDUAL_FLOOR = 1e-14

FIRST_ORDER_NORMS = ("L2_H2alpha", "Linf_Halpha")
SECOND_ORDER_NORMS = ("L2_Halpha", "C_L2")


def _check_eps(eps: float):
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")


def l2_time_norm(traj: Trajectory, r: float) -> float:
    """L^2(0,T; H^r) by the trapezoid rule over the trajectory nodes."""
    sq = sobolev_sq(traj.coeffs, traj.lattice, r)
    return float(np.sqrt(np.dot(traj.timegrid.trapezoid_weights(), sq)))


def sup_time_norm(traj: Trajectory, r: float) -> float:
    """max over nodes of the H^r norm."""
    return float(np.sqrt(sobolev_sq(traj.coeffs, traj.lattice, r).max()))


def first_order_norms(h: Trajectory, alpha: float) -> dict[str, float]:
    return {"L2_H2alpha": l2_time_norm(h, 2 * alpha), "Linf_Halpha": sup_time_norm(h, alpha)}


def second_order_norms(h: Trajectory, alpha: float) -> dict[str, float]:
    return {"L2_Halpha": l2_time_norm(h, alpha), "C_L2": sup_time_norm(h, 0.0)}


def first_linearization_residual(f: SourceTerm, eps: float, spec: SymbolLike, alpha: float,
                                 grid: TimeGrid, w: Trajectory | None = None) -> dict[str, float]:
    """Norms of theta_{eps f}/eps - w."""
    _check_eps(eps)
    if w is None:
        w = solve_fractional_diffusion(f, alpha, grid)
    theta = solve_active_scalar(eps * f, spec, alpha, grid)
    return first_order_norms(theta * (1.0 / eps) - w, alpha)


def cross_linearization_residual(f1: SourceTerm, f2: SourceTerm, j: int, eps: float,
                                 spec: SymbolLike, alpha: float, grid: TimeGrid) -> dict[str, float]:
    """Norms of (theta_{eps(f1+f2)} - theta_{eps f_j})/eps - w_{3-j}."""
    _check_eps(eps)
    if j not in (1, 2):
        raise ValueError("j must be 1 or 2")
    fj, other = (f1, f2) if j == 1 else (f2, f1)
    w_other = solve_fractional_diffusion(other, alpha, grid)
    both = solve_active_scalar(eps * (f1 + f2), spec, alpha, grid)
    single = solve_active_scalar(eps * fj, spec, alpha, grid)
    return first_order_norms((both - single) * (1.0 / eps) - w_other, alpha)


def bilinear_advection(a: np.ndarray, b: np.ndarray, spec_values: np.ndarray,
                       lattice: FourierLattice) -> np.ndarray:
    """Dealiased u[a].grad(b) on half-spectrum arrays (leading axes allowed)."""
    d1, d2 = lattice.derivative
    a = a * lattice.dealias
    b = b * lattice.dealias
    psi = spec_values * a
    u1 = lattice.inverse(-d2 * psi)
    u2 = lattice.inverse(d1 * psi)
    prod = u1 * lattice.inverse(d1 * b)
    prod += u2 * lattice.inverse(d2 * b)
    del u1, u2
    out = lattice.forward(prod) * lattice.dealias
    out[..., 0, 0] = 0.0
    return out


def second_order_source(w1: Trajectory, w2: Trajectory, spec: SymbolLike) -> np.ndarray:
    """-(u[w1].grad w2 + u[w2].grad w1) at every node, as half spectra."""
    if w1.timegrid != w2.timegrid or w1.lattice != w2.lattice:
        raise ValueError("w1 and w2 live on different grids")
    lat = w1.lattice
    mv = spec.values(lat)
    return -(bilinear_advection(w1.coeffs, w2.coeffs, mv, lat)
             + bilinear_advection(w2.coeffs, w1.coeffs, mv, lat))


def solve_second_linearization(w1: Trajectory, w2: Trajectory, spec: SymbolLike,
                               alpha: float) -> Trajectory:
    """Linear solve driven by the symmetrised bilinear advection of w1 and w2."""
    src = second_order_source(w1, w2, spec)
    grid, lat = w1.timegrid, w1.lattice
    return solve_fractional_diffusion(SourceTerm.sampled(grid, src, lat, label="bilinear"),
                                      alpha, grid)


def second_linearization_residual(f1: SourceTerm, f2: SourceTerm, eps: float, spec: SymbolLike,
                                  alpha: float, grid: TimeGrid,
                                  v: Trajectory | None = None) -> dict[str, float]:
    """Norms of (theta_{eps(f1+f2)} - theta_{eps f1} - theta_{eps f2})/eps^2 - v."""
    _check_eps(eps)
    if v is None:
        w1 = solve_fractional_diffusion(f1, alpha, grid)
        w2 = solve_fractional_diffusion(f2, alpha, grid)
        v = solve_second_linearization(w1, w2, spec, alpha)
    both = solve_active_scalar(eps * (f1 + f2), spec, alpha, grid)
    t1 = solve_active_scalar(eps * f1, spec, alpha, grid)
    t2 = solve_active_scalar(eps * f2, spec, alpha, grid)
    h = (both - t1 - t2) * (1.0 / eps ** 2) - v
    return second_order_norms(h, alpha)


@dataclass
class EpsSweep:
    epsilons: np.ndarray
    norms: dict[str, np.ndarray]
    label: str = ""

    def __post_init__(self):
        self.epsilons = np.asarray(self.epsilons, float)
        e = self.epsilons
        if e.ndim != 1 or len(e) == 0:
            raise ValueError("need a non-empty list of epsilons")
        if np.any(e <= 0) or np.any(e >= 1):
            raise ValueError("epsilons must lie in (0, 1)")
        if np.any(np.diff(e) >= 0):
            raise ValueError("epsilons must be strictly decreasing")
        self.norms = {k: np.asarray(v, float) for k, v in self.norms.items()}
        for k, v in self.norms.items():
            if v.shape != e.shape:
                raise ValueError(f"norm {k!r} has {v.shape[0]} values for {len(e)} epsilons")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epsilon", "norm_name", "residual"])
            for i, eps in enumerate(self.epsilons):
                for name, vals in self.norms.items():
                    w.writerow(["%.17g" % eps, name, "%.17g" % vals[i]])

    def write_json(self, path, config: dict | None = None) -> None:
        fits = {k: v.as_dict() for k, v in convergence_rate_fit(self).items()}
        with open(path, "w") as fh:
            json.dump({"label": self.label, "config": config or {}, "fits": fits}, fh,
                      indent=2, sort_keys=True)


@dataclass
class RateFit:
    slope: float
    intercept: float
    max_deviation: float
    n_points: int
    notes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"slope": _jsonable(self.slope), "intercept": _jsonable(self.intercept),
                "max_deviation": _jsonable(self.max_deviation), "n_points": self.n_points,
                "notes": list(self.notes)}


def _jsonable(x: float):
    return None if not np.isfinite(x) else float(x)


def convergence_rate_fit(sweep: EpsSweep, floor: float = RESIDUAL_FLOOR) -> dict[str, RateFit]:
    """
    Least-squares line through (log eps, log residual) for each norm.

    Residuals at or below ``floor`` are dropped with a note; if fewer than
    three points remain the slope is reported as NaN.
    """
    if len(sweep.epsilons) < 3:
        raise ValueError("rate fit needs at least 3 sweep points")
    out = {}
    for name, vals in sweep.norms.items():
        keep = vals > floor
        notes = [f"eps={e:g} excluded: residual {r:.3g} at floor"
                 for e, r in zip(sweep.epsilons[~keep], vals[~keep])]
        if keep.sum() < 3:
            out[name] = RateFit(np.nan, np.nan, np.nan, int(keep.sum()),
                                notes + ["fewer than 3 points above floor"])
            continue
        x = np.log(sweep.epsilons[keep])
        y = np.log(vals[keep])
        slope, intercept = np.polyfit(x, y, 1)
        dev = float(np.abs(y - (slope * x + intercept)).max())
        out[name] = RateFit(float(slope), float(intercept), dev, int(keep.sum()), notes)
    return out


def first_order_sweep(f: SourceTerm, spec: SymbolLike, alpha: float, grid: TimeGrid,
                      epsilons) -> EpsSweep:
    w = solve_fractional_diffusion(f, alpha, grid)
    rows = [first_linearization_residual(f, e, spec, alpha, grid, w=w) for e in epsilons]
    return EpsSweep(epsilons, {k: [r[k] for r in rows] for k in FIRST_ORDER_NORMS},
                    label="first-order")


def cross_sweep(f1: SourceTerm, f2: SourceTerm, j: int, spec: SymbolLike, alpha: float,
                grid: TimeGrid, epsilons) -> EpsSweep:
    rows = [cross_linearization_residual(f1, f2, j, e, spec, alpha, grid) for e in epsilons]
    return EpsSweep(epsilons, {k: [r[k] for r in rows] for k in FIRST_ORDER_NORMS},
                    label=f"cross-{j}")


def second_order_sweep(f1: SourceTerm, f2: SourceTerm, spec: SymbolLike, alpha: float,
                       grid: TimeGrid, epsilons) -> EpsSweep:
    w1 = solve_fractional_diffusion(f1, alpha, grid)
    w2 = solve_fractional_diffusion(f2, alpha, grid)
    v = solve_second_linearization(w1, w2, spec, alpha)
    rows = [second_linearization_residual(f1, f2, e, spec, alpha, grid, v=v) for e in epsilons]
    return EpsSweep(epsilons, {k: [r[k] for r in rows] for k in SECOND_ORDER_NORMS},
                    label="second-order")


def two_mode_sources(lattice: FourierLattice, amplitude: float = 10.0,
                     t_support=(0.05, 0.45)) -> tuple[SourceTerm, SourceTerm]:
    """A cross-mode pair: cos(2 pi x1) and sin(2 pi (x1 + 2 x2)), bump in time."""
    s1 = SpectralField.from_function(lattice, lambda x1, x2: np.cos(2 * np.pi * x1))
    s2 = SpectralField.from_function(lattice, lambda x1, x2: np.sin(2 * np.pi * (x1 + 2 * x2)))
    return (SourceTerm.separable(s1, t_support, amplitude=amplitude, label="f1"),
            SourceTerm.separable(s2, t_support, amplitude=amplitude, label="f2"))
