"""
Inverse-problem harness.

The source-to-solution map records (theta, u) on the window W. If two
multipliers give the same map, the second-order responses agree, which
forces the pairing

    I = int_0^T int [w2 (R1 - R2) w1 . grad phi + w1 (R1 - R2) w2 . grad phi] dx dt

to vanish for every phi supported off W. With time-independent bumps
phi1, phi2 on disjoint sets and phi a coordinate function on supp phi1,
the static version of I returns a mollified sample of grad(K1 - K2) at the
offset between the two bumps. This module evaluates all of these pairings
by exact quadrature of trigonometric polynomials and reconstructs
grad(K1 - K2) on a grid of offsets.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .evolution import (SourceTerm, TimeGrid, Trajectory, check_alpha, solve_active_scalar,
                        solve_fractional_diffusion)
from .geometry import Window, bump_profile, cinf_step, periodic_offset, radial_bump, torus_distance
from .linearization import second_order_source
from .spectral import (FourierLattice, SpectralField, SymbolLike, kernel_gradient_physical,
                       laplacian_symbol, oversampled_physical, to_spectral,
                       velocity)

# -----------------------------------------------------------------------------
# exact quadrature


def _mean(x: np.ndarray) -> np.ndarray:
    return x.mean(axis=(-2, -1))


def _pairing_terms(mdiff, lattice, a, b, phi):
    """
    int b (D a) . grad phi for D the velocity of symbol ``mdiff``;
    a, b, phi are half-spectrum arrays with matching leading axes.
    """
    d1, d2 = lattice.derivative
    psi = mdiff * a
    stack = np.stack([b, -d2 * psi, d1 * psi, d1 * phi, d2 * phi])
    B, U1, U2, G1, G2 = oversampled_physical(stack, lattice)
    return _mean(B * (U1 * G1 + U2 * G2))


# -----------------------------------------------------------------------------
# measurements


@dataclass(frozen=True, eq=False)
class Measurement:
    """theta and the velocity on W x (0, T), as masked trajectories."""

    theta_W: Trajectory
    u_W: tuple[Trajectory, Trajectory]
    window: Window

    def physical(self) -> np.ndarray:
        return np.stack([self.theta_W.physical(), self.u_W[0].physical(),
                         self.u_W[1].physical()])


def _check_source_in_window(f: SourceTerm, window: Window, grid: TimeGrid):
    vals = f.lattice.inverse(f.sample(grid))
    if not window.supports(vals, f.lattice, tol=1e-12):
        raise ValueError(f"source {f.label!r} is not supported in the window")


def source_to_solution(f: SourceTerm, spec: SymbolLike, window: Window, alpha: float,
                       grid: TimeGrid) -> Measurement:
    """Run the nonlinear solver and restrict (theta, u) to W by the window mask."""
    _check_source_in_window(f, window, grid)
    lat = f.lattice
    traj = solve_active_scalar(f, spec, alpha, grid)
    chi = window.mask(lat)
    mv = spec.values(lat)
    d1, d2 = lat.derivative
    theta = traj.coeffs
    out = []
    for arr in (theta, -d2 * mv * theta, d1 * mv * theta):
        out.append(Trajectory(grid, lat, lat.forward(chi * lat.inverse(arr))))
    return Measurement(out[0], (out[1], out[2]), window)


def measurement_deviation(a: Measurement, b: Measurement) -> float:
    return float(np.abs(a.physical() - b.physical()).max())


def maps_equal(spec1: SymbolLike, spec2: SymbolLike, sources, tol: float, window: Window,
               alpha: float, grid: TimeGrid) -> tuple[bool, float]:
    """Compare the two source-to-solution maps on ``sources`` in sup norm."""
    dev = 0.0
    for f in sources:
        m1 = source_to_solution(f, spec1, window, alpha, grid)
        m2 = m1 if spec2 is spec1 else source_to_solution(f, spec2, window, alpha, grid)
        dev = max(dev, measurement_deviation(m1, m2))
    return bool(dev <= tol), dev


# -----------------------------------------------------------------------------
# the integral identity


def second_order_identity_residual(spec1: SymbolLike, spec2: SymbolLike, f1: SourceTerm,
                                   f2: SourceTerm, varphi: SpectralField, alpha: float,
                                   grid: TimeGrid, window: Window | None = None,
                                   chunk: int = 64) -> float:
    """
    int_0^T int [w2 (R1-R2) w1 . grad phi + w1 (R1-R2) w2 . grad phi] dx dt,
    with w_j = solve_fractional_diffusion(f_j). Space is integrated exactly,
    time by the trapezoid rule. With ``window`` given, f_j must live in W and
    phi must vanish on the closed window.
    """
    check_alpha(alpha)
    lat = f1.lattice
    if window is not None:
        _check_source_in_window(f1, window, grid)
        _check_source_in_window(f2, window, grid)
        if not window.avoids(varphi.physical(), lat, tol=1e-12):
            raise ValueError("test function must vanish on the window")
    mdiff = (spec1 - spec2).values(lat)
    if not np.any(mdiff):
        return 0.0
    w1 = solve_fractional_diffusion(f1, alpha, grid).coeffs
    w2 = solve_fractional_diffusion(f2, alpha, grid).coeffs
    vals = np.empty(grid.M + 1)
    phi = np.broadcast_to(varphi.coeffs, (min(chunk, grid.M + 1), *lat.half_shape))
    for s in range(0, grid.M + 1, chunk):
        e = min(s + chunk, grid.M + 1)
        p = phi[: e - s]
        vals[s:e] = (_pairing_terms(mdiff, lat, w1[s:e], w2[s:e], p)
                     + _pairing_terms(mdiff, lat, w2[s:e], w1[s:e], p))
    return float(np.dot(grid.trapezoid_weights(), vals))


def identity_from_second_linearization(spec1: SymbolLike, spec2: SymbolLike, f1: SourceTerm,
                                       f2: SourceTerm, varphi: SpectralField, alpha: float,
                                       grid: TimeGrid) -> float:
    """
    The same pairing evaluated through dv = v1 - v2, the difference of the
    second linearizations under each multiplier:

        <phi, dv(T)> + int_0^T <(-Delta)^alpha phi, dv> dt.
    """
    lat = f1.lattice
    w1 = solve_fractional_diffusion(f1, alpha, grid)
    w2 = solve_fractional_diffusion(f2, alpha, grid)
    src = second_order_source(w1, w2, spec1) - second_order_source(w1, w2, spec2)
    dv = solve_fractional_diffusion(SourceTerm.sampled(grid, src, lat), alpha, grid).coeffs
    wts = lat.weights
    phi = varphi.coeffs
    final = float(np.sum(wts * (np.conj(phi) * dv[-1]).real))
    lphi = laplacian_symbol(lat, alpha) * phi
    per_node = np.sum(wts * (np.conj(lphi) * dv).real, axis=(-2, -1))
    return final + float(np.dot(grid.trapezoid_weights(), per_node))


def static_pairing(spec1: SymbolLike, spec2: SymbolLike, phi1: SpectralField,
                   phi2: SpectralField, varphi: SpectralField) -> float:
    """int [phi2 (R1-R2) phi1 . grad phi + phi1 (R1-R2) phi2 . grad phi] dx."""
    lat = phi1.lattice
    mdiff = (spec1 - spec2).values(lat)
    a, b, p = phi1.coeffs, phi2.coeffs, varphi.coeffs
    return float(_pairing_terms(mdiff, lat, a, b, p) + _pairing_terms(mdiff, lat, b, a, p))


def nabla_perp_pairing(spec1: SymbolLike, spec2: SymbolLike, phi1: SpectralField,
                       phi2: SpectralField, varphi: SpectralField) -> float:
    """
    int [(K1-K2)phi1 grad^perp phi2 . grad phi + (K1-K2)phi2 grad^perp phi1 . grad phi] dx.

    Integrating by parts against the static pairing gives
    static_pairing = -nabla_perp_pairing.
    """
    lat = phi1.lattice
    mdiff = (spec1 - spec2).values(lat)
    d1, d2 = lat.derivative
    a, b, p = phi1.coeffs, phi2.coeffs, varphi.coeffs
    stack = np.stack([mdiff * a, mdiff * b, -d2 * a, d1 * a, -d2 * b, d1 * b, d1 * p, d2 * p])
    Ka, Kb, Pa1, Pa2, Pb1, Pb2, G1, G2 = oversampled_physical(stack, lat)
    return float(_mean(Ka * (Pb1 * G1 + Pb2 * G2) + Kb * (Pa1 * G1 + Pa2 * G2)))


# -----------------------------------------------------------------------------
# probes and kernel samples

# keep every coordinate-probe support this far inside the cube faces
@dataclass(frozen=True, eq=False)
class ProbePair:
    """Unit-mass bumps phi1, phi2 on disjoint disks in the exterior of W."""

    phi1: SpectralField
    phi2: SpectralField
    center1: tuple[float, float]
    center2: tuple[float, float]
    width: float

    @classmethod
    def build(cls, lattice: FourierLattice, center1, center2, width: float = 0.05,
              window: Window | None = None) -> ProbePair:
        c1 = tuple(float(v) for v in center1)
        c2 = tuple(float(v) for v in center2)
        if torus_distance(c1, c2) <= 2 * width:
            raise ValueError("probe supports overlap")
        if window is not None:
            for c in (c1, c2):
                if torus_distance(c, window.center) < window.radius + width:
                    raise ValueError(f"probe at {c} meets the window")
        return cls(radial_bump(lattice, c1, width), radial_bump(lattice, c2, width), c1, c2,
                   float(width))

    @property
    def offset(self) -> np.ndarray:
        d = np.subtract(self.center1, self.center2)
        return d - np.round(d)

    def overlap(self) -> float:
        """max |phi1 phi2| over the grid, from the sampled profiles."""
        lat = self.phi1.lattice
        a, b = (bump_profile(np.hypot(*periodic_offset(*lat.mesh, c)), self.width)
                for c in (self.center1, self.center2))
        return float(np.abs(a * b).max())


@dataclass(frozen=True, eq=False)
class CoordinateProbe:
    """
    varphi = x_coord - center_coord on a disk of radius ``plateau`` around
    the first bump, cut off smoothly to zero at radius ``outer``.

    Measuring the coordinate from the center keeps the probe a translate of
    itself when the bump moves; the constant it drops multiplies the cutoff,
    whose gradient vanishes on both bumps.
    """

    varphi: SpectralField
    coord: int
    center: tuple[float, float]
    plateau: float
    outer: float

    @classmethod
    def build(cls, lattice: FourierLattice, center, coord: int, plateau: float,
              outer: float) -> CoordinateProbe:
        if coord not in (1, 2):
            raise ValueError("coordinate must be 1 or 2")
        if not 0 < plateau < outer:
            raise ValueError("need 0 < plateau < outer radius")
        if outer >= 0.5:
            raise ValueError("coordinate probe wraps around the torus")
        c = tuple(float(v) for v in center)
        d1, d2 = periodic_offset(*lattice.mesh, c)
        cut = 1.0 - cinf_step((np.hypot(d1, d2) - plateau) / (outer - plateau))
        coordinate = d1 if coord == 1 else d2
        return cls(to_spectral(coordinate * cut, lattice), coord, c, plateau, outer)

    @classmethod
    def for_sample(cls, probe: ProbePair, j: int, margin: float = 0.08) -> CoordinateProbe:
        """The probe that extracts d_j: x_{3-j} around phi1, clear of phi2."""
        gap = np.hypot(*probe.offset) - 2 * probe.width
        tau = min(margin, gap)
        return cls.build(probe.phi1.lattice, probe.center1, 3 - j, probe.width,
                         probe.width + tau)

    def residual_on(self, probe: ProbePair) -> float:
        """sup |varphi - (x_coord - center_coord)| over the support of phi1 (grid points)."""
        lat = self.varphi.lattice
        d1, d2 = periodic_offset(*lat.mesh, self.center)
        on = np.hypot(*periodic_offset(*lat.mesh, probe.center1)) < probe.width
        coordinate = d1 if self.coord == 1 else d2
        return float(np.abs(self.varphi.physical() - coordinate)[on].max())


def kernel_gradient_sample(spec1: SymbolLike, spec2: SymbolLike, probe: ProbePair, j: int,
                           coordinate_probe: CoordinateProbe | None = None) -> float:
    """
    int int d_j(K1 - K2)(x - y) phi2(y) phi1(x) dy dx.

    With varphi = x_2 near phi1 the static pairing equals the d_1 sample;
    with varphi = x_1 it equals minus the d_2 sample.
    """
    if j not in (1, 2):
        raise ValueError("axis must be 1 or 2")
    if probe.overlap() > 1e-12:
        raise ValueError("probe supports overlap")
    cp = coordinate_probe or CoordinateProbe.for_sample(probe, j)
    if cp.coord != 3 - j:
        raise ValueError(f"d_{j} needs the x_{3 - j} coordinate probe, got x_{cp.coord}")
    if torus_distance(cp.center, probe.center1) > 1e-12 or cp.plateau < probe.width:
        raise ValueError("coordinate probe does not cover the first bump")
    if torus_distance(cp.center, probe.center2) < cp.outer + probe.width:
        raise ValueError("coordinate probe reaches the second bump")
    val = static_pairing(spec1, spec2, probe.phi1, probe.phi2, cp.varphi)
    return val if j == 1 else -val


def kernel_gradient_truth(spec1: SymbolLike, spec2: SymbolLike, offset, j: int,
                          lattice: FourierLattice) -> float:
    """Point value of d_j(K1 - K2) by Fourier summation on the doubled lattice."""
    fine = FourierLattice(2 * lattice.N)
    return float(kernel_gradient_physical(spec1 - spec2, np.asarray(offset, float), j, fine))


def bump_transform(rho, width: float) -> np.ndarray:
    """Continuous Fourier transform of the unit-mass radial bump at |k| = rho."""
    rho = np.atleast_1d(np.asarray(rho, float))
    out = np.empty(rho.shape)
    for i, q in enumerate(rho):
        val, _ = integrate.quad(lambda r: bump_profile(r, width) * special.j0(2 * np.pi * q * r)
                                * 2 * np.pi * r, 0.0, width, epsabs=1e-14, epsrel=1e-11,
                                limit=200)
        out[i] = val
    return out


def mollified_truth(spec1: SymbolLike, spec2: SymbolLike, offset, j: int, width: float,
                    lattice: FourierLattice, kmax: float | None = None) -> float:
    """
    sum_k 2 pi i k_j (m1 - m2)(k) phî(k)^2 exp(2 pi i k . offset) with the
    exact (continuous) bump transform, over the doubled lattice.
    """
    fine = FourierLattice(2 * lattice.N)
    K1, K2 = fine.full_k
    m = (spec1 - spec2).full_values(fine)
    keep = m != 0
    if kmax is not None:
        keep &= np.hypot(K1, K2) <= kmax
    k1, k2, mk = K1[keep], K2[keep], m[keep]
    rho = np.hypot(k1, k2)
    uniq, inv = np.unique(np.round(rho, 12), return_inverse=True)
    ph = bump_transform(uniq, width)[inv]
    kj = k1 if j == 1 else k2
    d = np.asarray(offset, float)
    terms = 2j * np.pi * kj * mk * ph ** 2 * np.exp(2j * np.pi * (k1 * d[0] + k2 * d[1]))
    return float(terms.sum().real)


def offset_geometry(offset, width: float, R1: float = 0.28, margin: float = 0.08,
                    min_margin: float = 0.05, window: Window | None = None):
    """
    Centers realising ``offset`` = center1 - center2: center1 sits at distance
    R1 from the window center opposite the offset direction. Raises if the
    cutoff annulus between the bumps would be thinner than ``min_margin``.
    """
    d = np.asarray(offset, float)
    r = float(np.hypot(*d))
    if r == 0:
        raise ValueError("zero offset is not realisable")
    gap = r - 2 * width
    if min(margin, gap) < min_margin:
        raise ValueError(f"offset {tuple(d)} too short for width {width}: cutoff needs "
                         f"|offset| >= {2 * width + min_margin:g}")
    base = np.zeros(2) if window is None else np.asarray(window.center)
    c1 = base - R1 * d / r
    c2 = c1 - d
    c2 = c2 - np.round(c2)
    return tuple(c1), tuple(c2)


def polar_offsets(n_radii: int = 8, n_angles: int = 8, r_min: float = 0.2,
                  r_max: float = 0.4) -> np.ndarray:
    radii = np.linspace(r_min, r_max, n_radii)
    angles = 2 * np.pi * np.arange(n_angles) / n_angles
    return np.array([(r * np.cos(a), r * np.sin(a)) for r in radii for a in angles])


@dataclass
class KernelTable:
    offsets: np.ndarray
    axis: np.ndarray
    sampled: np.ndarray
    truth: np.ndarray
    width: float

    @property
    def abs_error(self) -> np.ndarray:
        return np.abs(self.sampled - self.truth)

    @property
    def relative_l2_error(self) -> float:
        den = np.linalg.norm(self.truth)
        num = np.linalg.norm(self.sampled - self.truth)
        if den == 0:
            return 0.0 if num == 0 else np.inf
        return float(num / den)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["offset_x", "offset_y", "axis", "sampled", "truth", "abs_error"])
            for (ox, oy), j, s, t, e in zip(self.offsets, self.axis, self.sampled, self.truth,
                                            self.abs_error):
                w.writerow(["%.17g" % ox, "%.17g" % oy, int(j), "%.17g" % s, "%.17g" % t,
                            "%.17g" % e])

    def summary(self, threshold: float = 0.10) -> dict:
        err = self.relative_l2_error
        scale = float(np.abs(self.truth).max(initial=0.0))
        passed = err <= threshold if scale > 0 else bool(self.abs_error.max() <= 1e-12)
        return {"relative_l2_error": err, "threshold": threshold, "passed": bool(passed),
                "width": self.width, "n_offsets": int(len(self.offsets) // 2),
                "max_abs_error": float(self.abs_error.max()), "truth_scale": scale}

    def write_json(self, path, threshold: float = 0.10, config: dict | None = None) -> None:
        with open(path, "w") as fh:
            json.dump({**self.summary(threshold), "config": config or {}}, fh, indent=2,
                      sort_keys=True)


def reconstruct_kernel_gradient(spec1: SymbolLike, spec2: SymbolLike, offsets, width: float,
                                lattice: FourierLattice, window: Window | None = None,
                                R1: float = 0.28) -> KernelTable:
    """Sample d_1 and d_2 of K1 - K2 at each offset and compare with the point values."""
    window = window or Window()
    rows_o, rows_j, rows_s, rows_t = [], [], [], []
    for d in np.atleast_2d(np.asarray(offsets, float)):
        c1, c2 = offset_geometry(d, width, R1=R1, window=window)
        probe = ProbePair.build(lattice, c1, c2, width, window=window)
        for j in (1, 2):
            cp = CoordinateProbe.for_sample(probe, j)
            if torus_distance(cp.center, window.center) < window.radius + cp.outer:
                raise ValueError(f"coordinate probe for offset {tuple(d)} meets the window")
            rows_o.append(d)
            rows_j.append(j)
            rows_s.append(kernel_gradient_sample(spec1, spec2, probe, j, cp))
            rows_t.append(kernel_gradient_truth(spec1, spec2, d, j, lattice))
    return KernelTable(np.array(rows_o), np.array(rows_j), np.array(rows_s), np.array(rows_t),
                       float(width))


def exterior_velocity_deviation(spec1: SymbolLike, spec2: SymbolLike, basket, window: Window
                                ) -> float:
    """max over the basket of |R1 g - R2 g| on the exterior of W (grid points)."""
    dev = 0.0
    for g in basket:
        lat = g.lattice
        if not window.avoids(g.physical(), lat, tol=1e-12):
            raise ValueError("test function must vanish on the window")
        out = window.distance(lat) > window.radius
        a1, a2 = velocity(g, spec1).physical()
        b1, b2 = velocity(g, spec2).physical()
        dev = max(dev, float(np.abs(a1 - b1)[out].max()), float(np.abs(a2 - b2)[out].max()))
    return dev
