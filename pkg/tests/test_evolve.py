"""Time grids, propagators, semiclassical transform, Duhamel solver."""

import numpy as np
import pytest
import scipy.integrate

from obslab import (AliasedGrid, ConfigError, evolution_samples,
                    halfwave_propagate, random_state, save_trajectory,
                    schrodinger_propagate, semiclassical_fourier,
                    solve_inhomogeneous, source_to_initial_weights, time_grid)
from obslab.evolve import _phase_moments, halfwave_frequencies


# ---------------------------------------------------------------------------
# quadrature grids

def test_grid_weights_sum_to_span():
    for kind in ("trapezoid", "simpson", "gauss"):
        grid = time_grid(0.0, 2.0, 8, kind=kind)
        assert abs(grid.weights.sum() - 2.0) < 1e-13
        assert grid.weights.min() > 0
        assert grid.span == 2.0


def test_grid_guards():
    with pytest.raises(ConfigError):
        time_grid(0.0, 1.0, 7, kind="simpson")    # odd step count
    with pytest.raises(ConfigError):
        time_grid(0.0, 1.0, 1)
    with pytest.raises(ConfigError):
        time_grid(1.0, 0.0, 4)
    with pytest.raises(ConfigError):
        time_grid(0.0, 1.0, 4, kind="midpoint")


def test_simpson_exact_on_cubics():
    grid = time_grid(0.0, 1.0, 2)
    quad = float(grid.weights @ grid.t ** 3)
    assert abs(quad - 0.25) < 1e-15


def test_gauss_panels_exact_to_degree_seven():
    grid = time_grid(0.0, 1.0, 2, kind="gauss")
    quad = float(grid.weights @ grid.t ** 7)
    assert abs(quad - 0.125) < 1e-15
    with pytest.raises(ConfigError):
        grid.dt                                    # no uniform step


# ---------------------------------------------------------------------------
# free propagators

def test_propagator_unitary_group(basis16):
    state = random_state(basis16, np.random.default_rng(0))
    for prop in (schrodinger_propagate, halfwave_propagate):
        moved = prop(state, 0.37)
        assert abs(moved.norm() - state.norm()) < 1e-13
        two_step = prop(prop(state, 0.2), 0.17)
        assert np.abs(two_step.coeffs - moved.coeffs).max() < 1e-13
        frozen = prop(state, 0.0)
        assert np.array_equal(frozen.coeffs, state.coeffs)


def test_schrodinger_phase_sign(basis16):
    # u_j(t) = e^{-i lambda_j t} u_j(0): the phase must decrease
    state = basis16.state(np.eye(16)[5])
    t = 1e-3
    moved = schrodinger_propagate(state, t)
    measured = np.angle(moved.coeffs[5] / state.coeffs[5])
    assert abs(measured + basis16.lambdas[5] * t) < 1e-9


def test_halfwave_zero_mode_clipped(basis16):
    freq = halfwave_frequencies(basis16.lambdas)
    assert freq[0] == 0.0
    assert np.allclose(freq[1:] ** 2, basis16.lambdas[1:], rtol=1e-12)
    const = basis16.state(np.eye(16)[0])
    moved = halfwave_propagate(const, 5.0)
    assert np.array_equal(moved.coeffs, const.coeffs)


def test_evolution_samples_and_alias_guard(basis16):
    state = random_state(basis16, np.random.default_rng(1))
    grid = time_grid(0.0, 1.0, 2048)
    samples = evolution_samples(state, grid)
    expected = np.exp(-1j * np.outer(grid.t, basis16.lambdas)) * state.coeffs
    assert np.abs(samples - expected).max() < 1e-14
    coarse = time_grid(0.0, 1.0, 10)               # lambda_max dt >> pi
    with pytest.raises(AliasedGrid):
        evolution_samples(state, coarse)


# ---------------------------------------------------------------------------
# semiclassical Fourier transform

def test_fourier_parseval_and_peak():
    h = 0.05
    grid = time_grid(-8.0, 8.0, 4000, kind="trapezoid")
    phi = np.exp(-0.5 * grid.t ** 2) * np.exp(1j * 0.7 * grid.t / h)
    tau, transform = semiclassical_fourier(phi, grid, h)
    lhs = np.sum(np.abs(transform) ** 2) * (tau[1] - tau[0])
    rhs = 2.0 * np.pi * h * float(grid.weights @ np.abs(phi) ** 2)
    assert abs(lhs / rhs - 1.0) < 1e-10
    peak = tau[np.argmax(np.abs(transform))]
    assert abs(peak - 0.7) < tau[1] - tau[0]


def test_fourier_guards():
    grid = time_grid(0.0, 1.0, 100, kind="trapezoid")
    phi = np.ones(grid.n_nodes, dtype=complex)
    with pytest.raises(ConfigError):
        semiclassical_fourier(phi, grid, -0.1)
    nyquist = np.pi * 0.1 / grid.dt
    with pytest.raises(AliasedGrid):
        semiclassical_fourier(phi, grid, 0.1, tau=np.array([2.0 * nyquist]))
    gauss = time_grid(0.0, 1.0, 10, kind="gauss")
    with pytest.raises(ConfigError):
        semiclassical_fourier(np.ones(gauss.n_nodes), gauss, 0.1)


def test_phase_moments_against_quad():
    zs = np.array([0.0, 0.3j, 2.0 + 1.5j, 40j, -25.0 + 3j])
    moments = _phase_moments(zs, m_max=3)
    for i, z in enumerate(zs):
        for m in range(4):
            re = scipy.integrate.quad(
                lambda x: (x ** m * np.exp(z * x)).real, 0.0, 1.0)[0]
            im = scipy.integrate.quad(
                lambda x: (x ** m * np.exp(z * x)).imag, 0.0, 1.0)[0]
            assert abs(moments[m, i] - (re + 1j * im)) < 1e-12


# ---------------------------------------------------------------------------
# Duhamel solver

def test_inhomogeneous_solver_exact_on_constant_source(basis16):
    # u0 = 0, F_j constant: u_j(T) = -c_j (1 - e^{-i lambda T}) / lambda
    rng = np.random.default_rng(2)
    c = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    grid = time_grid(0.0, 1.0, 64)
    source = np.tile(c, (grid.n_nodes, 1))
    traj = solve_inhomogeneous(basis16, source, grid, direction="forward")
    lam = basis16.lambdas
    safe = np.where(lam > 1e-6, lam, 1.0)
    expected = np.where(lam > 1e-6,
                        -c * (1.0 - np.exp(-1j * lam)) / safe,
                        -1j * c)
    assert np.abs(traj[-1] - expected).max() < 1e-12


def test_inhomogeneous_solver_grid_independent_on_cubic_sources(basis16):
    # the cubic stencils reproduce any polynomial source of degree <= 3
    # exactly, so two different step counts must give the same answer
    rng = np.random.default_rng(5)
    coeff = rng.standard_normal((4, 16)) + 1j * rng.standard_normal((4, 16))

    def solve(n_steps, direction):
        grid = time_grid(0.0, 1.0, n_steps)
        tt = grid.t[:, None]
        source = sum(coeff[m] * tt ** m for m in range(4))
        traj = solve_inhomogeneous(basis16, source, grid, direction=direction)
        return traj[-1] if direction == "forward" else traj[0]

    assert np.abs(solve(64, "forward") - solve(128, "forward")).max() < 1e-12
    assert np.abs(solve(64, "backward") - solve(128, "backward")).max() < 1e-12


def test_inhomogeneous_solver_fourth_order(basis16):
    # smooth non-polynomial source: halving the step divides the terminal
    # error by about sixteen
    rng = np.random.default_rng(3)
    profile = rng.standard_normal(16) + 1j * rng.standard_normal(16)

    def terminal(n_steps):
        grid = time_grid(0.0, 1.0, n_steps)
        envelope = np.exp(np.sin(2.0 * np.pi * grid.t))[:, None]
        source = envelope * profile[None, :]
        traj = solve_inhomogeneous(basis16, source, grid, direction="forward")
        return traj[-1]

    reference = terminal(8192)
    errs = [float(np.linalg.norm(terminal(n) - reference))
            for n in (256, 512, 1024)]
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    assert all(10.0 < r < 25.0 for r in ratios)


def test_inhomogeneous_solver_guards(basis16):
    grid = time_grid(0.0, 1.0, 64)
    source = np.zeros((grid.n_nodes, 16), dtype=complex)
    with pytest.raises(ConfigError):
        solve_inhomogeneous(basis16, source, grid, direction="sideways")
    with pytest.raises(ValueError):
        solve_inhomogeneous(basis16, source[:, :3], grid)
    with pytest.raises(ConfigError):
        solve_inhomogeneous(basis16, source[:3], time_grid(0.0, 1.0, 2))
    gauss = time_grid(0.0, 1.0, 16, kind="gauss")
    with pytest.raises(ConfigError):
        solve_inhomogeneous(basis16, np.zeros((gauss.n_nodes, 16)), gauss)


def test_source_weights_match_backward_solve(basis16):
    rng = np.random.default_rng(4)
    grid = time_grid(0.0, 1.0, 256)
    source = (rng.standard_normal((grid.n_nodes, 16))
              + 1j * rng.standard_normal((grid.n_nodes, 16)))
    w = source_to_initial_weights(basis16, grid)
    direct = solve_inhomogeneous(basis16, source, grid, direction="backward")
    via_weights = np.einsum("jt,tj->j", w, source)
    assert np.abs(via_weights - direct[0]).max() < 1e-12


def test_save_trajectory_format(tmp_path, basis16):
    grid = time_grid(0.0, 1.0, 4)
    traj = np.zeros((grid.n_nodes, 2), dtype=complex)
    traj[0, 0] = 1.0 + 2.0j
    path = tmp_path / "trajectory.csv"
    save_trajectory(path, grid, traj)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# t_start=")
    assert lines[1] == "t,mode_index,re,im"
    assert lines[2] == "0.0,0,1.0,2.0"
    assert len(lines) == 2 + grid.n_nodes * 2
