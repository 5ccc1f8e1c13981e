import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activescalar.spectral import (FourierLattice, MultiplierSpec, SpectralField,
                                   SymbolBoundError, apply_multiplier, fractional_laplacian,
                                   gradient, kernel_gradient_physical, kernel_physical,
                                   oversampled_physical, read_snapshot, sobolev_norm,
                                   to_spectral, velocity, write_snapshot)

sizes = st.sampled_from([16, 32, 48, 64])
seeds = st.integers(0, 2 ** 32 - 1)


@settings(max_examples=25, deadline=None)
@given(N=sizes, seed=seeds)
def test_transform_round_trip(N, seed):
    lat = FourierLattice(N)
    g = np.random.default_rng(seed).standard_normal((N, N))
    assert np.allclose(lat.inverse(lat.forward(g)), g, atol=1e-13)


def test_grid_starts_at_minus_half():
    lat = FourierLattice(16)
    assert lat.x[0] == -0.5 and np.isclose(lat.x[-1], 0.5 - 1 / 16)


@pytest.mark.parametrize("k", [(1, 0), (0, 1), (2, -3), (5, 4)])
def test_single_mode_coefficient(k):
    lat = FourierLattice(32)
    f = SpectralField.from_function(
        lat, lambda x1, x2: np.cos(2 * np.pi * (k[0] * x1 + k[1] * x2)))
    a, b = k if k[1] >= 0 else (-k[0], -k[1])
    assert np.isclose(f.coeff(a, b), 0.5, atol=1e-14)
    # the half spectrum stores both +-k only on the k2 = 0 column
    assert np.isclose(np.sum(lat.weights * np.abs(f.coeffs)), 1.0, atol=1e-13)


def test_derivative_of_sine():
    lat = FourierLattice(32)
    f = SpectralField.from_function(lat, lambda x1, x2: np.sin(2 * np.pi * (3 * x1 - 2 * x2)))
    g = gradient(f)
    x1, x2 = lat.mesh
    c = np.cos(2 * np.pi * (3 * x1 - 2 * x2))
    assert np.allclose(g.u1.physical(), 6 * np.pi * c, atol=1e-11)
    assert np.allclose(g.u2.physical(), -4 * np.pi * c, atol=1e-11)


@settings(max_examples=20, deadline=None)
@given(N=sizes, seed=seeds, which=st.sampled_from(["riesz", "perturbed"]))
def test_velocity_divergence_free(N, seed, which):
    lat = FourierLattice(N)
    theta = to_spectral(np.random.default_rng(seed).standard_normal((N, N)), lat)
    spec = MultiplierSpec.riesz() if which == "riesz" else MultiplierSpec.perturbed()
    u = velocity(theta, spec)
    div = 2 * np.pi * (lat.k1 * u.u1.coeffs + lat.k2 * u.u2.coeffs)
    scale = max(np.abs(u.u1.coeffs).max(), np.abs(u.u2.coeffs).max())
    assert np.abs(div).max() <= 1e-12 * scale


def test_velocity_of_single_mode_is_closed_form():
    # theta = cos(2 pi x1): psi = cos/(1), u = (0, -2 pi sin(2 pi x1)) for the Riesz symbol
    lat = FourierLattice(32)
    theta = SpectralField.from_function(lat, lambda x1, x2: np.cos(2 * np.pi * x1))
    u1, u2 = velocity(theta, MultiplierSpec.riesz()).physical()
    x1, _ = lat.mesh
    assert np.abs(u1).max() < 1e-14
    assert np.allclose(u2, -2 * np.pi * np.sin(2 * np.pi * x1), atol=1e-12)


@pytest.mark.parametrize("r", [0.25, 0.5, 0.75, 1.0])
def test_fractional_laplacian_of_mode(r):
    lat = FourierLattice(16)
    f = SpectralField.from_function(lat, lambda x1, x2: np.cos(2 * np.pi * (x1 + x2)))
    out = fractional_laplacian(f, r).physical()
    assert np.allclose(out, (2 * np.pi * np.sqrt(2)) ** (2 * r) * f.physical(), atol=1e-11)


def test_multiplier_commutes_with_laplacian(rng):
    lat = FourierLattice(32)
    theta = to_spectral(rng.standard_normal((32, 32)), lat)
    spec = MultiplierSpec.perturbed(0.3, 0.5)
    a = apply_multiplier(fractional_laplacian(theta, 0.6), spec).coeffs
    b = fractional_laplacian(apply_multiplier(theta, spec), 0.6).coeffs
    assert np.abs(a - b).max() <= 1e-12 * np.abs(a).max()


def test_multiplier_bounds_enforced():
    with pytest.raises(SymbolBoundError):
        MultiplierSpec.perturbed(amplitude=0.8)
    with pytest.raises(SymbolBoundError):
        MultiplierSpec(lambda k1, k2: 1.0 / (k1 ** 2 + k2 ** 2), 0.5, 2.0)
    with pytest.raises(SymbolBoundError):
        MultiplierSpec(lambda k1, k2: (1 + 0.1 * np.sign(k1)) / np.hypot(k1, k2), 0.5, 2.0)


def test_multiplier_from_table_is_bounded():
    spec = MultiplierSpec.from_table([1, 4, 16], [1.0, 0.3, 0.1])
    m = spec.values(FourierLattice(32))
    assert m[0, 0] == 0
    assert np.isclose(m[1, 0], 1.0)
    # profile |k| m = 1, 1.2, 1.6 at the nodes
    assert spec.c_lower == pytest.approx(1.0) and spec.c_upper == pytest.approx(1.6)


def test_oversampled_quadrature_is_alias_free():
    # cos(10 pi x) cos(10 pi x) cos(12 pi x) integrates to zero, but 5 + 5 + 6 = 16
    # aliases to the mean on a 16-point grid
    lat = FourierLattice(16)
    a = SpectralField.from_function(lat, lambda x1, x2: np.cos(10 * np.pi * x1))
    c = SpectralField.from_function(lat, lambda x1, x2: np.cos(12 * np.pi * x1))
    plain = np.mean(a.physical() ** 2 * c.physical())
    fine = oversampled_physical(np.stack([a.coeffs, c.coeffs]), lat)
    assert abs(plain) > 0.1
    assert abs(np.mean(fine[0] ** 2 * fine[1])) < 1e-15


def test_sobolev_norm_of_mode():
    lat = FourierLattice(16)
    f = SpectralField.from_function(lat, lambda x1, x2: np.cos(2 * np.pi * x1))
    assert sobolev_norm(f, 0.0) == pytest.approx(np.sqrt(0.5), rel=1e-14)
    assert sobolev_norm(f, 1.0) == pytest.approx(np.sqrt(0.5 * 2.0), rel=1e-14)


def test_kernel_rejects_origin(riesz):
    lat = FourierLattice(16)
    with pytest.raises(ValueError):
        kernel_physical(riesz, (0.0, 1.0), lat)
    with pytest.raises(ValueError):
        kernel_gradient_physical(riesz, (0.3, 0.0), 3, lat)


def test_kernel_gradient_matches_finite_difference(riesz):
    lat = FourierLattice(32)
    x, h = np.array([0.27, -0.11]), 1e-6
    fd = (kernel_physical(riesz, x + (h, 0), lat)
          - kernel_physical(riesz, x - (h, 0), lat)) / (2 * h)
    assert kernel_gradient_physical(riesz, x, 1, lat) == pytest.approx(fd, rel=1e-6)


def test_snapshot_round_trip(tmp_path, rng):
    lat = FourierLattice(32)
    f = to_spectral(rng.standard_normal((32, 32)), lat)
    p = tmp_path / "s.bin"
    write_snapshot(p, f)
    data = p.read_bytes()
    assert data[:4] == b"FSQG" and data[4] == 1 and len(data) == 9 + 8 * 32 * 32
    assert np.allclose(read_snapshot(p).physical(), f.physical(), atol=1e-15)
    p.write_bytes(b"XXXX" + data[4:])
    with pytest.raises(ValueError):
        read_snapshot(p)


@pytest.mark.parametrize("N", [15, 8, 0])
def test_lattice_rejects_bad_size(N):
    with pytest.raises(ValueError):
        FourierLattice(N)


@pytest.mark.parametrize("k, factor", [((1, 0), 1.0), ((1, 1), 1 / np.sqrt(2)), ((0, 3), 1 / 3)])
def test_riesz_multiplier_on_modes(riesz, k, factor):
    lat = FourierLattice(32)
    f = SpectralField.from_function(
        lat, lambda x1, x2: np.cos(2 * np.pi * (k[0] * x1 + k[1] * x2)))
    assert np.allclose(apply_multiplier(f, riesz).physical(), factor * f.physical(), atol=1e-14)


def test_velocity_is_scaled_perpendicular_riesz_transform(riesz, rng):
    # R_j has symbol -i k_j/|k|; the velocity symbol 2 pi i k_j/|k| is -2 pi times that
    lat = FourierLattice(32)
    theta = to_spectral(rng.standard_normal((32, 32)), lat)
    nyq = (lat.k1 == -16) | (lat.k2 == -16)
    with np.errstate(invalid="ignore", divide="ignore"):
        R1, R2 = (np.where((lat.kmag > 0) & ~nyq, -1j * k / lat.kmag, 0.0)
                  for k in (lat.k1, lat.k2))
    u = velocity(theta, riesz)
    assert np.allclose(u.u1.coeffs, -2 * np.pi * (-R2 * theta.coeffs), atol=1e-13)
    assert np.allclose(u.u2.coeffs, -2 * np.pi * (R1 * theta.coeffs), atol=1e-13)


def test_kernel_difference_matches_finer_lattice(riesz, perturbed):
    # m1 - m2 decays like exp(-|k|^2), so the lattice sum has converged by N=32
    x = (0.25, 0.0)
    coarse = kernel_physical(riesz - perturbed, x, FourierLattice(32))
    fine = kernel_physical(riesz - perturbed, x, FourierLattice(256))
    assert coarse == pytest.approx(fine, rel=1e-13)
    assert abs(fine) > 0
