"""1D Klein-Gordon solver tests: exact modal evolution, retarded integrals
against a manufactured solution, and the independent leapfrog oracle.
"""

import numpy as np
import pytest

from vkglab.errors import (
    BoundaryContaminationWarning,
    ConfigurationError,
    DomainCoverageError,
)
from vkglab.field1d import (
    FieldHistory,
    InitialFieldData,
    SpatialGrid1D,
    dx_u_inhomogeneous,
    dx_u_inhomogeneous_grid,
    fd_reference_solve,
    periodic_grid,
    solve_homogeneous,
    u_inhomogeneous,
    u_inhomogeneous_grid,
    ut_inhomogeneous_grid,
)


def manufactured(n_x, length=20.0):
    """u* = exp(-x^2) cos(t); residual source rho* = (4x^2-2) exp(-x^2) cos(t)."""
    grid = periodic_grid(-length / 2.0, length, n_x)
    x = grid.nodes
    rho = lambda t: (4.0 * x * x - 2.0) * np.exp(-x * x) * np.cos(t)
    u_star = lambda t: np.exp(-x * x) * np.cos(t)
    data = InitialFieldData(grid, u_star(0.0), np.zeros(n_x))
    return grid, data, rho, u_star


def filled_history(grid, rho, horizon, dt):
    hist = FieldHistory(grid)
    for t in np.arange(0.0, horizon + dt / 2.0, dt):
        hist.add_slice(t, rho(t))
    return hist


def test_grid_validation():
    with pytest.raises(ConfigurationError):
        SpatialGrid1D(1.0, 0.0, 64)
    with pytest.raises(ConfigurationError):
        SpatialGrid1D(0.0, 1.0, 1)


def test_homogeneous_zero_data():
    grid = SpatialGrid1D(-5.0, 5.0, 128)
    data = InitialFieldData(grid, np.zeros(128), np.zeros(128))
    for t in (0.0, 1.0, 3.7):
        u, ut, ux = solve_homogeneous(data, t)
        assert not u.any() and not ut.any() and not ux.any()


@pytest.mark.parametrize("k_mode", [1, 2, 4])
def test_homogeneous_dispersion_cosine_u1(k_mode):
    grid = periodic_grid(-8.0 * np.pi, 16.0 * np.pi, 512)
    data = InitialFieldData(grid, np.cos(k_mode * grid.nodes), np.zeros(512))
    omega = np.sqrt(1.0 + k_mode ** 2)
    t = 1.37
    u, _, _ = solve_homogeneous(data, t)
    assert np.abs(u - np.cos(omega * t) * np.cos(k_mode * grid.nodes)).max() < 1e-10


@pytest.mark.parametrize("k_mode", [1, 2, 4])
def test_homogeneous_dispersion_cosine_u2(k_mode):
    grid = periodic_grid(-8.0 * np.pi, 16.0 * np.pi, 512)
    data = InitialFieldData(grid, np.zeros(512), np.cos(k_mode * grid.nodes))
    omega = np.sqrt(1.0 + k_mode ** 2)
    t = 0.83
    u, _, _ = solve_homogeneous(data, t)
    target = np.sin(omega * t) / omega * np.cos(k_mode * grid.nodes)
    assert np.abs(u - target).max() < 1e-10


def test_homogeneous_energy_conservation():
    grid = periodic_grid(-8.0 * np.pi, 16.0 * np.pi, 256)
    x = grid.nodes
    data = InitialFieldData(grid, np.cos(x) + 0.3 * np.cos(3 * x),
                            0.5 * np.cos(2 * x))
    dx = 16.0 * np.pi / 256

    def energy(t):
        u, ut, ux = solve_homogeneous(data, t)
        return float(np.sum(ut ** 2 + ux ** 2 + u ** 2) * dx)

    e0 = energy(0.0)
    for t in (0.4, 1.9, 4.4):
        assert abs(energy(t) / e0 - 1.0) < 1e-10


def test_homogeneous_finite_propagation_speed():
    grid = SpatialGrid1D(-20.0, 20.0, 1024)
    x = grid.nodes
    bump = np.maximum(1.0 - x * x, 0.0) ** 3
    data = InitialFieldData(grid, bump, 0.5 * bump)
    t = 3.0
    u, ut, ux = solve_homogeneous(data, t)
    outside = np.abs(x) > 1.0 + t + 2 * grid.dx
    assert np.abs(u[outside]).max() < 1e-12
    assert np.abs(ut[outside]).max() < 1e-12


def test_homogeneous_boundary_warning():
    grid = SpatialGrid1D(-5.0, 5.0, 256)
    x = grid.nodes
    bump = np.maximum(1.0 - (np.abs(x) - 4.7) ** 2, 0.0) ** 2
    data = InitialFieldData(grid, bump, np.zeros_like(x))
    with pytest.warns(BoundaryContaminationWarning):
        solve_homogeneous(data, 1.0)


def test_u_inhomogeneous_zero_source():
    grid = SpatialGrid1D(-5.0, 5.0, 101)
    hist = filled_history(grid, lambda t: np.zeros(101), 1.0, 0.1)
    assert u_inhomogeneous(hist, 1.0, 0.3) == 0.0
    assert not u_inhomogeneous_grid(hist, 1.0).any()


def test_symmetry_even_source():
    grid = SpatialGrid1D(-10.0, 10.0, 401)
    x = grid.nodes
    hist = filled_history(grid, lambda t: np.exp(-x * x) * (1 + 0.2 * t), 1.5, 0.05)
    mid = 200
    assert abs(dx_u_inhomogeneous(hist, 1.5, 0.0)) < 1e-13
    assert abs(dx_u_inhomogeneous_grid(hist, 1.5)[mid]) < 1e-13


def test_pointwise_matches_grid_evaluator():
    grid = SpatialGrid1D(-10.0, 10.0, 257)
    x = grid.nodes
    hist = filled_history(grid, lambda t: np.exp(-x * x) * np.cos(t), 1.2, 0.05)
    ug = u_inhomogeneous_grid(hist, 1.2)
    dg = dx_u_inhomogeneous_grid(hist, 1.2)
    for i in (40, 128, 190):
        assert u_inhomogeneous(hist, 1.2, x[i]) == pytest.approx(ug[i], abs=1e-13)
        assert dx_u_inhomogeneous(hist, 1.2, x[i]) == pytest.approx(dg[i], abs=1e-13)


def test_manufactured_solution_reconstruction():
    # representation = homogeneous + retarded integral vs the exact field
    grid, data, rho, u_star = manufactured(512)
    dx = grid.dx
    n_steps = int(np.ceil(2.0 / (dx / 2.0)))
    dt = 2.0 / n_steps
    hist = filled_history(grid, rho, 2.0, dt)
    uh, _, _ = solve_homogeneous(data, 2.0)
    u_rep = uh + u_inhomogeneous_grid(hist, 2.0)
    exact = u_star(2.0)
    rel = np.linalg.norm(u_rep - exact) / np.linalg.norm(exact)
    assert rel < 1e-3


def test_dx_consistency_with_finite_difference():
    grid, data, rho, _ = manufactured(512)
    dt = 2.0 / int(np.ceil(2.0 / (grid.dx / 2.0)))
    hist = filled_history(grid, rho, 2.0, dt)
    x0 = grid.nodes[200]
    h = grid.dx
    fd = (u_inhomogeneous(hist, 2.0, x0 + h)
          - u_inhomogeneous(hist, 2.0, x0 - h)) / (2.0 * h)
    assert abs(fd - dx_u_inhomogeneous(hist, 2.0, x0)) < 1e-4


def test_ut_against_manufactured():
    grid, data, rho, _ = manufactured(512)
    dt = 2.0 / int(np.ceil(2.0 / (grid.dx / 2.0)))
    hist = filled_history(grid, rho, 2.0, dt)
    _, uth, _ = solve_homogeneous(data, 2.0)
    ut_rep = uth + ut_inhomogeneous_grid(hist, 2.0)
    exact = -np.exp(-grid.nodes ** 2) * np.sin(2.0)
    assert np.linalg.norm(ut_rep - exact) / np.linalg.norm(exact) < 2e-3


def test_u_inhomogeneous_linearity():
    grid = SpatialGrid1D(-10.0, 10.0, 201)
    x = grid.nodes
    r1 = lambda t: np.exp(-x * x) * (1 + t)
    r2 = lambda t: np.exp(-2 * (x - 1) ** 2) * np.cos(t)
    combo = lambda t: 2.0 * r1(t) - 0.5 * r2(t)
    h1 = filled_history(grid, r1, 1.0, 0.1)
    h2 = filled_history(grid, r2, 1.0, 0.1)
    hc = filled_history(grid, combo, 1.0, 0.1)
    u_combo = u_inhomogeneous_grid(hc, 1.0)
    u_linear = 2.0 * u_inhomogeneous_grid(h1, 1.0) - 0.5 * u_inhomogeneous_grid(h2, 1.0)
    assert np.abs(u_combo - u_linear).max() < 1e-13


def test_finite_propagation_speed_inhomogeneous():
    grid = SpatialGrid1D(-20.0, 20.0, 801)
    x = grid.nodes
    rho = lambda t: np.maximum(1.0 - x * x, 0.0) ** 2
    t_final = 2.0
    hist = filled_history(grid, rho, t_final, 0.05)
    u = u_inhomogeneous_grid(hist, t_final)
    outside = np.abs(x) > 1.0 + t_final + 2 * grid.dx
    assert np.abs(u[outside]).max() < 1e-12


def test_history_rejects_bad_slices():
    grid = SpatialGrid1D(-5.0, 5.0, 64)
    hist = FieldHistory(grid)
    hist.add_slice(0.0, np.zeros(64))
    with pytest.raises(ConfigurationError):
        hist.add_slice(0.0, np.zeros(64))  # not increasing
    boundary_rho = np.zeros(64)
    boundary_rho[0] = 1.0
    with pytest.raises(DomainCoverageError):
        hist.add_slice(1.0, boundary_rho)


def test_cone_coverage_error():
    grid = SpatialGrid1D(-5.0, 5.0, 256)
    x = grid.nodes
    rho = np.exp(-((x - 4.5) / 0.2) ** 2)
    rho[np.abs(rho) < 1e-13] = 0.0
    hist = FieldHistory(grid)
    hist.add_slice(0.0, rho)
    hist.add_slice(0.5, rho)
    hist.add_slice(1.0, rho)
    with pytest.raises(DomainCoverageError):
        u_inhomogeneous(hist, 1.0, 4.8)


def test_fd_reference_zero_everything():
    grid = SpatialGrid1D(-5.0, 5.0, 128)
    data = InitialFieldData(grid, np.zeros(128), np.zeros(128))
    times, traj = fd_reference_solve(data, lambda n: np.zeros(128), 1.0, 0.05)
    assert not traj.any()
    assert times[-1] == pytest.approx(1.0)


def test_fd_reference_cfl_guard():
    grid = SpatialGrid1D(-5.0, 5.0, 128)
    data = InitialFieldData(grid, np.zeros(128), np.zeros(128))
    with pytest.raises(ConfigurationError):
        fd_reference_solve(data, lambda n: np.zeros(128), 1.0, 2.0 * grid.dx)


def test_fd_reference_finite_propagation_speed():
    grid = SpatialGrid1D(-20.0, 20.0, 800)
    x = grid.nodes
    bump = np.maximum(1.0 - x * x, 0.0) ** 3
    data = InitialFieldData(grid, bump, np.zeros_like(x))
    dt = grid.dx / 2.0
    n = int(np.ceil(2.0 / dt))
    times, traj = fd_reference_solve(data, lambda k: np.zeros_like(x), n * dt, dt)
    outside = np.abs(x) > 1.0 + times[-1] + 2 * grid.dx
    assert np.abs(traj[-1][outside]).max() < 1e-12


def test_representation_vs_fd_cross_validation():
    # the module's central acceptance check, here at two resolutions
    rels = []
    for n_x in (256, 512):
        grid, data, rho, u_star = manufactured(n_x)
        dx = grid.dx
        n_steps = int(np.ceil(2.0 / (dx / 2.0)))
        dt = 2.0 / n_steps
        times = dt * np.arange(n_steps + 1)
        hist = filled_history(grid, rho, 2.0, dt)
        uh, _, _ = solve_homogeneous(data, 2.0)
        u_rep = uh + u_inhomogeneous_grid(hist, 2.0)
        _, traj = fd_reference_solve(data, lambda k: rho(times[k]), 2.0, dt)
        rels.append(np.linalg.norm(u_rep - traj[-1]) / np.linalg.norm(traj[-1]))
    assert rels[1] < 1e-2
    assert np.log2(rels[0] / rels[1]) > 1.8
