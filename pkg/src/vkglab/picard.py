"""Coupled evolution of the Vlasov-Klein-Gordon system and the Picard
fixed-point iteration of its existence theory.

Both drivers share the identical per-step map so that the Picard fixed
point coincides with the direct coupled trajectory:

    1. transport f half a step with the field gradient frozen at t,
    2. append the midpoint density rho(t + dt/2) to the field history,
    3. evaluate u and dx u at t + dt (exact modal homogeneous part plus
       retarded integrals over the stored history),
    4. transport the second half step with the gradient frozen at t + dt.

In the coupled run the gradients in steps 1 and 4 come from the run's own
field history (self-consistent); in a Picard iterate they come from the
frozen previous iterate, which makes each iterate a linear transport
problem followed by a linear field solve.  Iterate zero holds the initial
data constant in time.  The sup-norm gaps between consecutive iterates
contract factorially on a short horizon, which `run_picard` monitors.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from vkglab.diagnostics import DiagnosticsTimeline, StepRecord
from vkglab.errors import ConfigurationError, DomainCoverageError
from vkglab.field1d import (
    FieldHistory,
    InitialFieldData,
    dx_u_inhomogeneous_grid,
    solve_homogeneous,
    u_inhomogeneous_grid,
    ut_inhomogeneous_grid,
)
from vkglab.vlasov1d import PhaseGrid, compute_rho, measure_support, semi_lagrangian_step

__all__ = [
    "ConvergenceReport",
    "CoupledResult",
    "IterateState",
    "MonitorStatus",
    "cauchy_gap",
    "continuation_monitor",
    "picard_iterate",
    "run_coupled",
    "run_picard",
]

MAX_PRINCIPLE_RTOL = 1e-3
MASS_DRIFT_RTOL = 1e-3


def _frozen(profile):
    def gradient(t, x):
        return profile
    return gradient


def _time_grid(T, dt):
    n_steps = int(round(T / dt))
    if n_steps < 1 or abs(n_steps * dt - T) > 1e-9 * max(1.0, T):
        raise ConfigurationError("T must be a positive integer multiple of dt")
    return n_steps, dt * np.arange(n_steps + 1)


def _flags_for_step(t, f_inf, f_inf0, mass, mass0, r_radius, p_radius,
                    rho_max, int_dxu, r0, p0, dx, dv):
    flags = {}
    if f_inf0 > 0:
        flags["max_principle"] = (
            "pass" if f_inf <= f_inf0 * (1.0 + MAX_PRINCIPLE_RTOL) else "fail")
    else:
        flags["max_principle"] = "n/a"
    if mass0 > 0:
        flags["mass_conservation"] = (
            "pass" if abs(mass / mass0 - 1.0) <= MASS_DRIFT_RTOL else "fail")
    else:
        flags["mass_conservation"] = "n/a"
    flags["support_x"] = "pass" if r_radius <= r0 + t + dx + 1e-12 else "fail"
    if f_inf0 > 0:
        flags["rho_bound"] = (
            "pass" if rho_max <= 2.0 * f_inf0 * p_radius + 1e-12 else "fail")
    else:
        flags["rho_bound"] = "n/a"
    flags["momentum_bound"] = (
        "pass" if p_radius - p0 <= int_dxu + dv + 1e-12 else "fail")
    return flags


@dataclass
class CoupledResult:
    """Trajectory of a coupled run on the shared time grid."""

    times: np.ndarray
    u: np.ndarray           # (n_t + 1, n_x)
    dxu: np.ndarray         # (n_t + 1, n_x)
    f_final: PhaseGrid
    timeline: DiagnosticsTimeline
    history: FieldHistory
    blew_up: bool = False
    f_values: np.ndarray | None = None   # (n_t + 1, n_x, n_v) if requested


def run_coupled(phase0: PhaseGrid, field_data: InitialFieldData, T, dt,
                field_method="representation", store_f=False,
                snapshot_callback=None):
    """March the coupled system to time T with Strang-type splitting.

    ``field_method`` selects the Klein-Gordon update: "representation"
    (exact homogeneous evolution plus retarded integrals, the default) or
    "fd" (leapfrog finite differences, the independent cross-check; needs
    dt <= dx).  Support escape from the grid sets ``blew_up`` and ends the
    run early instead of raising (the continuation monitor interprets it).

    ``snapshot_callback(step_index, t, phase, u, dxu)`` is invoked after
    every completed step when given.
    """
    if field_method not in ("representation", "fd"):
        raise ConfigurationError("field_method must be 'representation' or 'fd'")
    if phase0.x_grid is not field_data.grid and (
            phase0.x_grid.n_x != field_data.grid.n_x
            or abs(phase0.x_grid.x_min - field_data.grid.x_min) > 1e-12
            or abs(phase0.x_grid.x_max - field_data.grid.x_max) > 1e-12):
        raise ConfigurationError("phase grid and field grid must coincide")
    grid = phase0.x_grid
    dx = grid.dx
    if field_method == "fd" and dt > dx * (1.0 + 1e-12):
        raise ConfigurationError(f"CFL violation: dt={dt:g} exceeds dx={dx:g}")
    n_steps, times = _time_grid(T, dt)

    f = phase0.copy()
    f_inf0 = float(f.values.max())
    mass0 = float(compute_rho(f).sum() * dx)
    r0, p0 = measure_support(f)

    hist = FieldHistory(grid)
    hist.add_slice(0.0, compute_rho(f))

    n_x = grid.n_x
    u_traj = np.empty((n_steps + 1, n_x))
    dxu_traj = np.empty((n_steps + 1, n_x))
    u0, ut0, ux0 = solve_homogeneous(field_data, 0.0)
    u_traj[0] = u0
    dxu_traj[0] = ux0
    hist.u_current, hist.ut_current = u0.copy(), ut0.copy()
    f_store = None
    if store_f:
        f_store = np.empty((n_steps + 1, n_x, f.n_v))
        f_store[0] = f.values

    if field_method == "fd":
        def lap(u):
            return (np.roll(u, -1) - 2.0 * u + np.roll(u, 1)) / dx ** 2

        def ddx(u):
            return (np.roll(u, -1) - np.roll(u, 1)) / (2.0 * dx)

        # second-order start-up: acceleration from the PDE at t = 0
        u_prev = field_data.u1.copy()
        u_curr = (field_data.u1 + dt * field_data.u2
                  + 0.5 * dt * dt * (lap(field_data.u1) - field_data.u1
                                     - compute_rho(f)))

    timeline = DiagnosticsTimeline()
    int_dxu = 0.0
    g_inf_prev = float(np.abs(dxu_traj[0]).max())
    blew_up = False

    for n in range(n_steps):
        t = times[n]
        try:
            if field_method == "fd" and n >= 1:
                # leapfrog needs the full-step density, before transport
                rho_n = compute_rho(f)
                u_prev, u_curr = u_curr, (
                    2.0 * u_curr - u_prev
                    + dt * dt * (lap(u_curr) - u_curr - rho_n))
            f = semi_lagrangian_step(f, _frozen(dxu_traj[n]), t, dt / 2.0)
            hist.add_slice(t + dt / 2.0, compute_rho(f))
            if field_method == "representation":
                uh, _, uxh = solve_homogeneous(field_data, times[n + 1])
                u_new = uh + u_inhomogeneous_grid(hist, times[n + 1])
                dxu_new = uxh + dx_u_inhomogeneous_grid(hist, times[n + 1])
            else:
                u_new = u_curr
                dxu_new = ddx(u_curr)
            f = semi_lagrangian_step(f, _frozen(dxu_new), t + dt / 2.0, dt / 2.0)
        except DomainCoverageError:
            blew_up = True
            break

        u_traj[n + 1] = u_new
        dxu_traj[n + 1] = dxu_new
        hist.u_current = u_new.copy()
        if store_f:
            f_store[n + 1] = f.values

        g_inf = float(np.abs(dxu_new).max())
        int_dxu += dt / 2.0 * (g_inf_prev + g_inf)
        g_inf_prev = g_inf
        r_radius, p_radius = measure_support(f)
        rho_now = compute_rho(f)
        rec = StepRecord(
            t=times[n + 1], p_radius=p_radius, x_radius=r_radius,
            rho_l1=float(rho_now.sum() * dx), f_inf=float(f.values.max()),
            dxu_inf=g_inf, rho_max=float(rho_now.max()), int_dxu=int_dxu,
            flags=_flags_for_step(
                times[n + 1], float(f.values.max()), f_inf0,
                float(rho_now.sum() * dx), mass0, r_radius, p_radius,
                float(rho_now.max()), int_dxu, r0, p0, dx, f.dv))
        timeline.append(rec)
        if snapshot_callback is not None:
            if field_method == "representation":
                def ut_provider(tt=times[n + 1]):
                    _, uth, _ = solve_homogeneous(field_data, tt)
                    return uth + ut_inhomogeneous_grid(hist, tt)
            else:
                def ut_provider(a=u_curr, b=u_prev):
                    return (a - b) / dt   # first-order backward, export only
            snapshot_callback(n + 1, times[n + 1], f, u_new, dxu_new,
                              ut_provider)

    if blew_up:
        last = n
        return CoupledResult(times[:last + 1], u_traj[:last + 1],
                             dxu_traj[:last + 1], f, timeline, hist, True,
                             None if f_store is None else f_store[:last + 1])
    return CoupledResult(times, u_traj, dxu_traj, f, timeline, hist, False,
                         f_store)


# ---------------------------------------------------------------------------
# Picard iteration
# ---------------------------------------------------------------------------

@dataclass
class IterateState:
    """One Picard iterate: trajectories on the shared time grid.

    ``f_values`` has shape (n_t + 1, n_x, n_v); ``u``/``dxu`` are
    (n_t + 1, n_x).  ``p_of_t`` is the measured momentum-support radius
    (running max, nondecreasing) and ``dxu_inf`` the per-time sup norm of
    the field gradient.
    """

    index: int
    times: np.ndarray
    f_values: np.ndarray
    u: np.ndarray
    dxu: np.ndarray
    p_of_t: np.ndarray
    dxu_inf: np.ndarray
    blew_up: bool = False


@dataclass
class ConvergenceReport:
    """Pairwise gaps between consecutive iterates and bookkeeping.

    ``entries`` rows: {n, gap_dxu, gap_f, ratio}; ratios are
    gap(n)/gap(n-1) where defined.  ``q_running`` records the running max
    over iterates of max-over-time ||dx u^(n)||_inf (recorded only, no
    assertion is attached to it).
    """

    entries: list = dc_field(default_factory=list)
    q_running: list = dc_field(default_factory=list)

    def add(self, n, gap_dxu, gap_f):
        ratio = None
        if self.entries and self.entries[-1]["gap_dxu"] > 0:
            ratio = gap_dxu / self.entries[-1]["gap_dxu"]
        self.entries.append(
            {"n": n, "gap_dxu": gap_dxu, "gap_f": gap_f, "ratio": ratio})

    def gaps(self):
        return [e["gap_dxu"] for e in self.entries]

    def to_dict(self):
        return {"entries": self.entries, "q_running": self.q_running}


def iterate_zero(phase0: PhaseGrid, field_data: InitialFieldData, T, dt):
    """Iterate 0: the phase density and field held constant at their data."""
    n_steps, times = _time_grid(T, dt)
    n_x = phase0.x_grid.n_x
    u0, _, ux0 = solve_homogeneous(field_data, 0.0)
    f_values = np.broadcast_to(
        phase0.values, (n_steps + 1, n_x, phase0.n_v)).copy()
    r0, p0 = measure_support(phase0)
    return IterateState(
        index=0,
        times=times,
        f_values=f_values,
        u=np.tile(u0, (n_steps + 1, 1)),
        dxu=np.tile(ux0, (n_steps + 1, 1)),
        p_of_t=np.full(n_steps + 1, p0),
        dxu_inf=np.full(n_steps + 1, float(np.abs(ux0).max())),
    )


def picard_iterate(prev: IterateState, phase0: PhaseGrid,
                   field_data: InitialFieldData) -> IterateState:
    """One Picard update: linear transport in the frozen previous field,
    then the linear Klein-Gordon solve with the resulting density.

    Uses the same per-step map as `run_coupled` (half transport, midpoint
    density slice, field evaluation, half transport), with the transport
    gradients taken from ``prev``; the fixed point of this map is therefore
    the coupled trajectory itself.  Support escape marks ``blew_up`` on the
    returned iterate and truncates it instead of raising.
    """
    times = prev.times
    n_steps = times.size - 1
    dt = times[1] - times[0]
    grid = phase0.x_grid

    f = phase0.copy()
    hist = FieldHistory(grid)
    hist.add_slice(0.0, compute_rho(f))
    u0, _, ux0 = solve_homogeneous(field_data, 0.0)

    out = IterateState(
        index=prev.index + 1,
        times=times,
        f_values=np.empty_like(prev.f_values),
        u=np.empty_like(prev.u),
        dxu=np.empty_like(prev.dxu),
        p_of_t=np.empty(n_steps + 1),
        dxu_inf=np.empty(n_steps + 1),
    )
    out.f_values[0] = f.values
    out.u[0] = u0
    out.dxu[0] = ux0
    _, p0 = measure_support(f)
    out.p_of_t[0] = p0
    out.dxu_inf[0] = float(np.abs(ux0).max())

    for n in range(n_steps):
        t = times[n]
        try:
            f = semi_lagrangian_step(f, _frozen(prev.dxu[n]), t, dt / 2.0)
            hist.add_slice(t + dt / 2.0, compute_rho(f))
            f = semi_lagrangian_step(
                f, _frozen(prev.dxu[n + 1]), t + dt / 2.0, dt / 2.0)
        except DomainCoverageError:
            out.blew_up = True
            out.times = times[:n + 1]
            out.f_values = out.f_values[:n + 1]
            out.u = out.u[:n + 1]
            out.dxu = out.dxu[:n + 1]
            out.p_of_t = out.p_of_t[:n + 1]
            out.dxu_inf = out.dxu_inf[:n + 1]
            return out
        uh, _, uxh = solve_homogeneous(field_data, times[n + 1])
        out.u[n + 1] = uh + u_inhomogeneous_grid(hist, times[n + 1])
        out.dxu[n + 1] = uxh + dx_u_inhomogeneous_grid(hist, times[n + 1])
        out.f_values[n + 1] = f.values
        _, p_now = measure_support(f)
        out.p_of_t[n + 1] = p_now
        out.dxu_inf[n + 1] = float(np.abs(out.dxu[n + 1]).max())
    return out


def cauchy_gap(a: IterateState, b: IterateState):
    """Sup over time and space of the field-gradient and density gaps.

    Returns (gap_dxu, gap_f); raises ConfigurationError on mismatched time
    grids (gaps across different discretizations measure nothing useful).
    """
    if a.times.shape != b.times.shape or not np.allclose(a.times, b.times):
        raise ConfigurationError("iterates live on different time grids")
    gap_dxu = float(np.abs(a.dxu - b.dxu).max())
    gap_f = float(np.abs(a.f_values - b.f_values).max())
    return gap_dxu, gap_f


def run_picard(phase0: PhaseGrid, field_data: InitialFieldData, T0, dt,
               max_iter=25, rtol=1e-6):
    """Iterate to the fixed point on [0, T0].

    Stops when the field-gradient gap falls below ``rtol`` times the first
    gap, or after ``max_iter`` iterations.  Returns
    (final IterateState, ConvergenceReport, converged flag).
    """
    prev = iterate_zero(phase0, field_data, T0, dt)
    report = ConvergenceReport()
    report.q_running.append(float(prev.dxu_inf.max()))
    first_gap = None
    for _ in range(max_iter):
        cur = picard_iterate(prev, phase0, field_data)
        if cur.blew_up:
            report.q_running.append(float(cur.dxu_inf.max()))
            return cur, report, False
        gap_dxu, gap_f = cauchy_gap(cur, prev)
        report.add(cur.index, gap_dxu, gap_f)
        report.q_running.append(
            max(report.q_running[-1], float(cur.dxu_inf.max())))
        prev = cur
        if first_gap is None:
            first_gap = gap_dxu
            if first_gap == 0.0:
                return cur, report, True
        elif gap_dxu <= rtol * first_gap:
            return cur, report, True
    return prev, report, False


# ---------------------------------------------------------------------------
# continuation criterion monitor
# ---------------------------------------------------------------------------

@dataclass
class MonitorStatus:
    status: str              # "ok", "suspect", or "violation"
    messages: list

    @property
    def ok(self):
        return self.status == "ok"


def continuation_monitor(timeline: DiagnosticsTimeline, v_capacity=None,
                         x_capacity=None, capacity_fraction=0.9):
    """Couple the boundedness diagnostics of P(t) and ||dx u(t)||_inf.

    Asserts the one-directional bound P(t) - P(0-support) <= integral of
    ||dx u||_inf (it is recorded per step as the ``momentum_bound`` flag)
    and flags the run as suspect when the momentum or spatial support
    approaches the grid capacity, which is how an impending blow-up (or an
    undersized grid) announces itself at runtime.
    """
    if not timeline.records:
        raise ConfigurationError("timeline is empty")
    messages = []
    status = "ok"
    for rec in timeline.records:
        if rec.flags.get("momentum_bound") == "fail":
            status = "violation"
            messages.append(
                f"momentum bound violated at t={rec.t:g}: "
                f"P={rec.p_radius:g} vs integral {rec.int_dxu:g}")
            break
    if status == "ok":
        last = timeline.records[-1]
        if v_capacity is not None and last.p_radius > capacity_fraction * v_capacity:
            status = "suspect"
            messages.append(
                f"momentum support {last.p_radius:g} near grid capacity {v_capacity:g}")
        if x_capacity is not None and last.x_radius > capacity_fraction * x_capacity:
            status = "suspect"
            messages.append(
                f"spatial support {last.x_radius:g} near grid capacity {x_capacity:g}")
    if not messages:
        messages.append("P(t) and field gradient bounded; run can continue")
    return MonitorStatus(status, messages)
