import numpy as np
import pytest

from activescalar.evolution import (CFLError, SourceTerm, TimeGrid, duhamel, etd_weights,
                                    l2_series, lq_bound_check, q_admissible, read_trajectory,
                                    solve_active_scalar, solve_dual,
                                    solve_fractional_diffusion, temporal_bump,
                                    write_trajectory)
from activescalar.experiments import (adjoint_identity_pairs, closed_form_amplitude,
                                      default_source_pair, refinement_study)
from activescalar.spectral import FourierLattice, SpectralField, laplacian_symbol

ALPHA = 0.75


def cos_source(lat, t_support=None, amplitude=1.0):
    X = SpectralField.from_function(lat, lambda x1, x2: np.cos(2 * np.pi * x1))
    return SourceTerm.separable(X, t_support, amplitude=amplitude)


@pytest.mark.parametrize("alpha", [0.55, 0.75, 0.95])
def test_constant_source_closed_form(alpha):
    lat = FourierLattice(16)
    grid = TimeGrid(0.5, 500)
    u = solve_fractional_diffusion(cos_source(lat), alpha, grid)
    amp = 2 * u.coeffs[:, 1, 0].real
    exact = closed_form_amplitude(grid.times, alpha)
    m = grid.index(0.1)
    assert abs(amp[m] - exact[m]) <= 1e-5 * exact[m]
    assert np.allclose(amp, exact, rtol=1e-10, atol=0)


def test_refinement_ratio_is_second_order():
    ref = refinement_study(ALPHA, 0.5, 500)
    assert 3.5 <= ref["ratio"] <= 4.5


def test_etd_weights_small_and_large_rates():
    lam = np.array([0.0, 1e-8, 1e-3, 1.0, 1e4])
    E, a, b = etd_weights(lam, 0.01)
    assert np.allclose(a[:2], 0.005) and np.allclose(b[:2], 0.005)
    # the weights integrate constants exactly: a + b = (1 - E)/lam
    nz = lam > 0
    assert np.allclose((a + b)[nz], -np.expm1(-lam[nz] * 0.01) / lam[nz], rtol=1e-13)


def test_duhamel_zero_forcing_stays_zero():
    F = np.zeros((11, 4, 3), complex)
    assert np.all(duhamel(F, np.ones((4, 3)), 0.1) == 0)


def test_adjoint_identity_small(rng):
    rows = adjoint_identity_pairs(FourierLattice(32), TimeGrid(0.5, 100), ALPHA, rng, n_pairs=3)
    assert max(r["rel_error"] for r in rows) <= 1e-6


def test_dual_terminal_condition(lat32, grid_small):
    v = solve_dual(cos_source(lat32, (0.1, 0.4)), ALPHA, grid_small)
    assert np.all(v.coeffs[-1] == 0)
    assert np.abs(v.coeffs[0]).max() > 0


def test_x1_only_source_nonlinear_matches_linear(lat32, grid_small, riesz):
    f = cos_source(lat32, (0.05, 0.45), amplitude=20.0)
    lin = solve_fractional_diffusion(f, ALPHA, grid_small).physical()
    non = solve_active_scalar(f, riesz, ALPHA, grid_small).physical()
    assert np.abs(lin - non).max() <= 1e-9


def test_nonlinear_small_source_close_to_linear(lat32, grid_small, riesz):
    X = SpectralField.from_function(
        lat32, lambda x1, x2: np.cos(2 * np.pi * x1) + np.sin(2 * np.pi * (x1 + 2 * x2)))
    f = SourceTerm.separable(X, (0.05, 0.45), amplitude=1e-3)
    lin = solve_fractional_diffusion(f, ALPHA, grid_small).coeffs
    non = solve_active_scalar(f, riesz, ALPHA, grid_small).coeffs
    rel = np.abs(lin - non).max() / np.abs(lin).max()
    assert 0 < rel < 1e-3


def test_cfl_violation_raises(lat32, riesz):
    X = SpectralField.from_function(lat32, lambda x1, x2: np.sin(2 * np.pi * (x1 + x2)))
    f = SourceTerm.separable(X, amplitude=1e5)
    with pytest.raises(CFLError):
        solve_active_scalar(f, riesz, ALPHA, TimeGrid(0.5, 10))


def test_q_admissibility():
    assert q_admissible(4.0, 0.75)
    assert q_admissible(5.0, 0.75)
    assert not q_admissible(3.0, 0.75)
    assert not q_admissible(-1.0, 0.75)


def test_lq_bound_holds_for_window_pair(lat64, window, riesz, grid_small):
    f1, f2 = default_source_pair(lat64, window)
    f = f1 + f2
    rep = lq_bound_check(solve_active_scalar(f, riesz, ALPHA, grid_small), f, 4.0, ALPHA)
    assert rep.ok and rep.reduced
    assert rep.lq_norm[0] == 0 and rep.bound[-1] > 0


def test_lq_bound_rejects_bad_q(lat32, grid_small, riesz):
    f = cos_source(lat32, (0.1, 0.4))
    traj = solve_fractional_diffusion(f, ALPHA, grid_small)
    with pytest.raises(ValueError):
        lq_bound_check(traj, f, 3.0, ALPHA)


def test_l2_decreases_after_support(lat32, grid_small, riesz):
    f = cos_source(lat32, (0.05, 0.3), amplitude=5.0)
    l2 = l2_series(solve_active_scalar(f, riesz, ALPHA, grid_small))
    after = grid_small.times > 0.3
    assert np.all(np.diff(l2[after]) < 0)


def test_temporal_bump_support():
    t = np.linspace(0, 1, 101)
    b = temporal_bump(t, 0.2, 0.6)
    assert np.all(b[(t <= 0.2) | (t >= 0.6)] == 0) and b.max() == pytest.approx(np.exp(-1))


def test_source_window_check(lat32, window):
    X = SpectralField.from_function(lat32, lambda x1, x2: np.cos(2 * np.pi * x1))
    with pytest.raises(ValueError):
        SourceTerm.separable(X, window=window)


def test_sampled_source_interpolates(lat32):
    grid = TimeGrid(1.0, 4)
    C = np.zeros((5, *lat32.half_shape), complex)
    C[:, 1, 0] = np.arange(5.0)
    f = SourceTerm.sampled(grid, C, lat32)
    assert f.at(0.375).coeff(1, 0) == pytest.approx(1.5)


def test_time_grid_index():
    grid = TimeGrid(0.5, 500)
    assert grid.index(0.1) == 100
    with pytest.raises(ValueError):
        grid.index(0.1005)
    assert grid.trapezoid_weights().sum() == pytest.approx(0.5)


def test_trajectory_dump_round_trip(tmp_path, lat32, riesz):
    grid = TimeGrid(0.5, 10)
    traj = solve_active_scalar(cos_source(lat32, (0.0, 0.5)), riesz, ALPHA, grid)
    d = write_trajectory(tmp_path / "traj", traj, alpha=ALPHA, multiplier="riesz")
    names = sorted(p.name for p in d.iterdir())
    assert names[0] == "manifest.ini" and names[1] == "t_000000.bin" and len(names) == 12
    back = read_trajectory(d)
    assert back.timegrid == grid and back.lattice == lat32
    assert np.allclose(back.physical(), traj.physical(), atol=1e-14)


def test_linear_solver_decay_rate(lat32):
    # with no forcing after t_b every mode decays at exactly exp(-lam dt)
    grid = TimeGrid(0.5, 100)
    u = solve_fractional_diffusion(cos_source(lat32, (0.0, 0.2)), ALPHA, grid)
    lam = laplacian_symbol(lat32, ALPHA)[1, 0]
    m = grid.index(0.3)
    ratio = u.coeffs[m + 1, 1, 0] / u.coeffs[m, 1, 0]
    assert ratio.real == pytest.approx(np.exp(-lam * grid.dt), rel=1e-12)
