"""Semi-Lagrangian transport tests: density moments, max principle, mass
and support behavior, reversibility, and the characteristic source solver.
"""

import numpy as np
import pytest

from vkglab.errors import ConfigurationError, DomainCoverageError
from vkglab.field1d import SpatialGrid1D
from vkglab.vlasov1d import (
    InitialParticleData,
    PhaseGrid,
    compute_rho,
    measure_support,
    semi_lagrangian_step,
    solve_inhomogeneous_vlasov,
)

ZERO_FIELD = lambda t, x: np.zeros_like(x)


def bump_data(amplitude=0.5, r0=1.0, p0=1.0):
    def f0(x, v):
        gx = np.maximum(1.0 - (x / r0) ** 2, 0.0)
        gv = np.maximum(1.0 - (v / p0) ** 2, 0.0)
        return amplitude * gx * gx * gv * gv

    return InitialParticleData(f0, r0=r0, p0=p0)


def default_phase(n_x=256, n_v=256, x_half=6.0, v_half=3.0):
    grid = SpatialGrid1D(-x_half, x_half, n_x)
    return bump_data().sample(grid, -v_half, v_half, n_v)


def test_phase_grid_rejects_negative_values():
    grid = SpatialGrid1D(-1.0, 1.0, 16)
    with pytest.raises(ConfigurationError):
        PhaseGrid(grid, -1.0, 1.0, 16, -np.ones((16, 16)))


def test_compute_rho_zero():
    grid = SpatialGrid1D(-1.0, 1.0, 16)
    f = PhaseGrid(grid, -1.0, 1.0, 16, np.zeros((16, 16)))
    assert not compute_rho(f).any()


def test_compute_rho_aligned_indicator():
    # indicator of v in [-a, a] with a on grid nodes: trapezoid is exact
    grid = SpatialGrid1D(-1.0, 1.0, 8)
    n_v = 41
    v = np.linspace(-2.0, 2.0, n_v)
    a = 1.0  # node-aligned
    vals = np.tile((np.abs(v) <= a).astype(float), (8, 1))
    f = PhaseGrid(grid, -2.0, 2.0, n_v, vals)
    dv = f.dv
    # trapezoid of an aligned indicator: 2a minus the two half-cells at the jump
    assert np.allclose(compute_rho(f), 2.0 * a - dv)


def test_compute_rho_gaussian_against_quadrature_oracle():
    grid = SpatialGrid1D(-1.0, 1.0, 8)
    n_v = 201
    v = np.linspace(-6.0, 6.0, n_v)
    vals = np.tile(np.exp(-v * v), (8, 1))
    f = PhaseGrid(grid, -6.0, 6.0, n_v, vals)
    nodes, weights = np.polynomial.hermite.hermgauss(64)
    oracle = float(weights.sum())  # integral of exp(-v^2) over the line
    dv = f.dv
    assert np.abs(compute_rho(f) - oracle).max() < dv ** 2


def test_free_streaming_shift():
    f = default_phase()
    dt = 0.05
    stepped = semi_lagrangian_step(f, ZERO_FIELD, 0.0, dt)
    x = f.x_grid.nodes[:, None]
    v = f.v_nodes[None, :]
    exact = bump_data().f0(x - v / np.sqrt(1 + v * v) * dt, v)
    assert np.abs(stepped.values - exact).max() < 2e-4


def test_free_streaming_linear_exact():
    grid = SpatialGrid1D(-5.0, 5.0, 128)
    v = np.linspace(-2.0, 2.0, 64)
    vals = np.maximum(2.0 + 0.25 * grid.nodes[:, None] + 0.0 * v[None, :], 0.0)
    f = PhaseGrid(grid, -2.0, 2.0, 64, vals)
    dt = 0.1
    stepped = semi_lagrangian_step(f, ZERO_FIELD, 0.0, dt, on_exit="zero")
    vhat = v / np.sqrt(1 + v * v)
    exact = 2.0 + 0.25 * (grid.nodes[:, None] - vhat[None, :] * dt)
    interior = (np.abs(grid.nodes[:, None]) < 4.5) & (np.abs(v[None, :]) < 1.9)
    assert np.abs(stepped.values - exact)[interior].max() < 1e-13


def test_max_principle_and_mass():
    f = default_phase()
    f_inf0 = f.values.max()
    mass0 = compute_rho(f).sum() * f.x_grid.dx
    field = lambda t, x: 0.2 * np.sin(x)
    cur = f
    for n in range(20):
        cur = semi_lagrangian_step(cur, field, 0.05 * n, 0.05)
    assert cur.values.max() <= f_inf0 * (1.0 + 1e-3)
    mass = compute_rho(cur).sum() * f.x_grid.dx
    assert abs(mass / mass0 - 1.0) <= 1e-3


def test_mass_drift_improves_under_refinement():
    drifts = []
    for n in (128, 256):
        f = default_phase(n_x=n, n_v=n)
        mass0 = compute_rho(f).sum() * f.x_grid.dx
        cur = f
        for k in range(10):
            cur = semi_lagrangian_step(cur, ZERO_FIELD, 0.1 * k, 0.1)
        drifts.append(abs(compute_rho(cur).sum() * f.x_grid.dx / mass0 - 1.0))
    assert drifts[1] < drifts[0]


def test_measure_support():
    grid = SpatialGrid1D(-6.0, 6.0, 256)
    empty = PhaseGrid(grid, -3.0, 3.0, 128, np.zeros((256, 128)))
    assert measure_support(empty) == (0.0, 0.0)

    f = bump_data(r0=1.0, p0=2.0).sample(grid, -3.0, 3.0, 128)
    r, p = measure_support(f)
    assert abs(r - 1.0) <= grid.dx
    assert abs(p - 2.0) <= f.dv


def test_free_streaming_support_growth():
    f = default_phase()
    r0, p0 = measure_support(f)
    cur = f
    t = 0.0
    for n in range(16):
        cur = semi_lagrangian_step(cur, ZERO_FIELD, t, 0.1)
        t += 0.1
        r, p = measure_support(cur)
        assert r <= 1.0 + t + cur.x_grid.dx
        assert p == pytest.approx(p0, abs=cur.dv * 1e-10)


def test_rho_bound_by_momentum_support():
    f = default_phase()
    field = lambda t, x: 0.3 * np.cos(x)
    f_inf0 = f.values.max()
    cur = f
    for n in range(15):
        cur = semi_lagrangian_step(cur, field, 0.05 * n, 0.05)
        _, p = measure_support(cur)
        assert compute_rho(cur).max() <= 2.0 * f_inf0 * (1 + 1e-3) * p


def test_momentum_support_bound_by_field_integral():
    f = default_phase()
    field = lambda t, x: 0.4 * np.sin(x + 0.3 * t)
    _, p0 = measure_support(f)
    cur, t, integral = f, 0.0, 0.0
    g_prev = np.abs(field(0.0, f.x_grid.nodes)).max()
    for n in range(20):
        cur = semi_lagrangian_step(cur, field, t, 0.05)
        t += 0.05
        g_now = np.abs(field(t, f.x_grid.nodes)).max()
        integral += 0.05 * 0.5 * (g_prev + g_now)
        g_prev = g_now
        _, p = measure_support(cur)
        assert p - p0 <= integral + cur.dv


def test_reversibility():
    # forward then backward via the v -> -v conjugation of the frozen field
    f = default_phase()
    field = lambda t, x: 0.25 * np.sin(1.1 * x)
    dt = 0.1
    fwd = semi_lagrangian_step(f, field, 0.0, dt)
    flipped = fwd.copy()
    flipped.values = fwd.values[:, ::-1].copy()
    flipped.support_box = flipped._tight_box()
    lo_x, hi_x, lo_v, hi_v = fwd.flush_box
    flipped.flush_box = (lo_x, hi_x, -hi_v, -lo_v)
    back = semi_lagrangian_step(flipped, field, 0.0, dt)
    roundtrip = back.values[:, ::-1]

    # one-step interpolation error scale, measured on the analytic solution
    x = f.x_grid.nodes[:, None]
    v = f.v_nodes[None, :]
    exact = bump_data().f0(x - v / np.sqrt(1 + v * v) * dt, v)
    one_step = np.abs(
        semi_lagrangian_step(f, ZERO_FIELD, 0.0, dt).values - exact).max()
    assert np.abs(roundtrip - f.values).max() <= 2.0 * one_step


def test_domain_coverage_error_on_escape():
    grid = SpatialGrid1D(-2.0, 2.0, 64)
    f = bump_data(r0=1.0, p0=1.0).sample(grid, -2.0, 2.0, 64)
    with pytest.raises(DomainCoverageError):
        cur = f
        for n in range(40):
            cur = semi_lagrangian_step(cur, ZERO_FIELD, 0.1 * n, 0.1)


def test_source_free_reduces_to_step_composition():
    f = default_phase(n_x=128, n_v=128)
    traj = solve_inhomogeneous_vlasov(f, None, ZERO_FIELD, 0.3, 0.1)
    cur = f
    for n in range(3):
        cur = semi_lagrangian_step(cur, ZERO_FIELD, 0.1 * n, 0.1)
    assert np.array_equal(traj[-1][1], cur.values)


def test_source_constant_in_time_exact_interior():
    grid = SpatialGrid1D(-8.0, 8.0, 256)
    f0 = PhaseGrid(grid, -4.0, 4.0, 256, np.zeros((256, 256)))
    g = lambda t, x, v: np.exp(-v * v)
    traj = solve_inhomogeneous_vlasov(f0, g, ZERO_FIELD, 0.5, 0.05)
    t_end, vals = traj[-1]
    v = f0.v_nodes
    exact = t_end * np.exp(-v * v)[None, :] * np.ones((256, 1))
    interior = (np.abs(grid.nodes[:, None]) < 7.2) & (np.abs(v[None, :]) < 3.9)
    assert np.abs(vals - exact)[interior].max() < 1e-14


def test_source_solver_second_order_in_dt():
    grid = SpatialGrid1D(-8.0, 8.0, 512)
    f0 = PhaseGrid.from_callable(grid, -4.0, 4.0, 256,
                                 lambda x, v: np.exp(-2 * (x * x + v * v)))
    field = lambda t, x: 0.3 * np.sin(x) * np.cos(t)
    src = lambda t, x, v: 0.2 * np.exp(-x * x - v * v) * (1 + 0.5 * np.sin(2 * t))
    outs = {}
    for dt in (0.2, 0.1, 0.05):
        outs[dt] = solve_inhomogeneous_vlasov(f0, src, field, 1.0, dt)[-1][1]
    e1 = np.abs(outs[0.2] - outs[0.1]).max()
    e2 = np.abs(outs[0.1] - outs[0.05]).max()
    assert 1.7 < np.log2(e1 / e2) < 2.3


def test_clip_and_flush_accounting():
    f = default_phase()
    stepped = semi_lagrangian_step(f, ZERO_FIELD, 0.0, 0.05)
    # cubic interpolation of a C1 bump must clip a little, and the ledger
    # fields are cumulative and nonnegative
    assert stepped.clip_mass > 0.0
    assert stepped.flush_mass >= 0.0
    again = semi_lagrangian_step(stepped, ZERO_FIELD, 0.05, 0.05)
    assert again.clip_mass >= stepped.clip_mass
