"""Scenario orchestration: run a config, write diagnostics and snapshots,
and emit machine- plus human-readable summaries.

Every invariant tracked by the solvers surfaces as a named verdict in
``summary.json``; the process exit status is 0 when all verdicts pass,
1 when any fails, 2 for configuration errors.  Given the same config and
seed, reruns produce byte-identical ``diagnostics.csv``.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from vkglab import bessel_kernels as bk
from vkglab.diagnostics import DiagnosticsTimeline
from vkglab.errors import ConfigurationError
from vkglab.field1d import (
    FieldHistory,
    InitialFieldData,
    fd_reference_solve,
    periodic_grid,
    solve_homogeneous,
    u_inhomogeneous_grid,
)
from vkglab.picard import continuation_monitor, run_coupled, run_picard
from vkglab.scenarios import (
    ScenarioConfig,
    build_field_data,
    build_phase_grid,
    validate_config,
)
from vkglab.snapshots import (
    write_field_binary,
    write_field_csv,
    write_phase_binary,
    write_phase_csv,
)

__all__ = ["emit_report", "run_scenario"]

_FMT = "%.17g"

KERNEL_CANCELLATION_TOL = 1e-8
MOMENT_IDENTITY_RTOL = 1e-8
CROSSVAL_L2_TOL = 1e-2
CONVERGENCE_ORDER_MIN = 1.8
DISPERSION_SPECTRAL_RTOL = 1e-10


def _sample_momenta(rng, n, radius):
    out = []
    for _ in range(n):
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        out.append(u * radius * rng.random() ** (1.0 / 3.0))
    return out


def _second_order_kernel_names():
    names = [(k, l) for k in (1, 2, 3) for l in (1, 2, 3)]
    names += [("t", k) for k in (1, 2, 3)]
    names += [("t", "t")]
    return names


def _kernel_avg_row(v, order):
    """|sphere integral| of each second-order kernel at one momentum."""
    row = {}
    for k, l in _second_order_kernel_names():
        kern = lambda omega, kk=k, ll=l: bk.kernel_a_second(
            kk, ll, bk.KernelQuery(omega, v))
        row[f"a_{k}{l}"] = abs(bk.sphere_average(kern, v, order))
    return row


def _run_kernel_verify(config: ScenarioConfig, out_dir):
    rng = np.random.default_rng(config.seed)
    momenta = _sample_momenta(rng, config.kernel_samples, config.momentum_radius)
    order = config.sphere_order
    workers = config.workers or min(8, os.cpu_count() or 1)

    def work(v):
        return _kernel_avg_row(v, order), _kernel_avg_row(v, 2 * order)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(work, momenta))
    else:
        rows = [work(v) for v in momenta]

    names = [f"a_{k}{l}" for k, l in _second_order_kernel_names()]
    lines = ["sample,vx,vy,vz," + ",".join(
        [f"avg_{n}" for n in names] + [f"avg2_{n}" for n in names])]
    worst = worst2 = 0.0
    for i, (v, (r1, r2)) in enumerate(zip(momenta, rows)):
        worst = max(worst, max(r1.values()))
        worst2 = max(worst2, max(r2.values()))
        lines.append(",".join(
            [str(i)] + [_FMT % c for c in v]
            + [_FMT % r1[n] for n in names] + [_FMT % r2[n] for n in names]))
    with open(os.path.join(out_dir, "diagnostics.csv"), "w",
              encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")

    # moment identities of the four spatial-kernel pieces, 20 momenta
    targets_err = 0.0
    rng2 = np.random.default_rng(config.seed + 1)
    for v in _sample_momenta(rng2, 20, min(5.0, config.momentum_radius)):
        omega, w = bk.sphere_quadrature_nodes(v, order)
        q = bk.KernelQuery(omega, v)
        for k in (1, 2, 3):
            for l in (1, 2, 3):
                dkl = 1.0 if k == l else 0.0
                pieces = bk.kernel_a_second_pieces(k, l, q)
                targets = (24.0 * np.pi * v[k - 1] * v[l - 1],
                           -16.0 * np.pi * v[k - 1] * v[l - 1] - 4.0 * np.pi * dkl,
                           -8.0 * np.pi * v[k - 1] * v[l - 1],
                           4.0 * np.pi * dkl)
                for piece, target in zip(pieces, targets):
                    err = abs(w @ piece - target) / max(1.0, abs(target))
                    targets_err = max(targets_err, err)

    # pointwise denominator bound over 1e5 seeded samples, |v| <= 50
    rng3 = np.random.default_rng(config.seed + 2)
    n_pts = 100_000
    dirs = rng3.normal(size=(n_pts, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    vs = rng3.normal(size=(n_pts, 3))
    vs *= (50.0 * rng3.random(n_pts) ** (1.0 / 3.0)
           / np.linalg.norm(vs, axis=1))[:, None]
    denom = np.array([bk.one_plus_omega_dot_vhat(o, v)
                      for o, v in zip(dirs, vs)])
    bound_violations = int(np.sum(
        1.0 / denom > 2.0 * (1.0 + np.sum(vs * vs, axis=1)) * (1 + 1e-12)))

    verdicts = {
        "kernel_cancellation": worst <= KERNEL_CANCELLATION_TOL,
        "cancellation_decreases_with_order": worst2 < worst,
        "moment_identities": targets_err <= MOMENT_IDENTITY_RTOL,
        "denominator_bound": bound_violations == 0,
    }
    measurements = {
        "worst_sphere_average": worst,
        "worst_sphere_average_doubled_order": worst2,
        "worst_moment_identity_rel_error": targets_err,
        "denominator_bound_violations": bound_violations,
        "n_samples": config.kernel_samples,
        "sphere_order": order,
    }
    return verdicts, measurements


def _manufactured_case(n_x, horizon):
    """Manufactured solution u* = exp(-x^2) cos(t) for the cross-check.

    The residual source is rho* = (4 x^2 - 2) exp(-x^2) cos(t), obtained
    by applying -(d2/dt2 - d2/dx2 + 1) to u*.
    """
    grid = periodic_grid(-10.0, 20.0, n_x)
    x = grid.nodes

    def rho_star(t):
        return (4.0 * x * x - 2.0) * np.exp(-x * x) * np.cos(t)

    def u_star(t):
        return np.exp(-x * x) * np.cos(t)

    data = InitialFieldData(grid, u_star(0.0), np.zeros(n_x))
    return grid, data, rho_star, u_star


def _crossval_at(n_x, horizon):
    grid, data, rho_star, u_star = _manufactured_case(n_x, horizon)
    dx = grid.dx
    n_steps = int(np.ceil(horizon / (dx / 2.0)))
    dt = horizon / n_steps
    times = dt * np.arange(n_steps + 1)

    hist = FieldHistory(grid)
    for t in times:
        hist.add_slice(t, rho_star(t))
    uh, _, _ = solve_homogeneous(data, horizon)
    u_rep = uh + u_inhomogeneous_grid(hist, horizon)

    _, traj = fd_reference_solve(data, lambda n: rho_star(times[n]), horizon, dt)
    u_fd = traj[-1]
    exact = u_star(horizon)

    def rel(a, b):
        return float(np.linalg.norm(a - b) / np.linalg.norm(b))

    return rel(u_rep, exact), rel(u_fd, exact), rel(u_rep, u_fd)


def _measure_fd_dispersion(k_mode, n_x, period=16 * np.pi, horizon=2.0):
    grid = periodic_grid(-period / 2.0, period, n_x)
    x = grid.nodes
    dx = grid.dx
    n_steps = int(np.ceil(horizon / (dx / 2.0)))
    dt = horizon / n_steps
    data = InitialFieldData(grid, np.cos(k_mode * x), np.zeros(n_x))
    _, traj = fd_reference_solve(data, lambda n: np.zeros(n_x), horizon, dt)
    amp = traj @ np.cos(k_mode * x) * (2.0 / n_x)
    ratio = (amp[2:] + amp[:-2]) / (2.0 * amp[1:-1])
    good = np.abs(amp[1:-1]) > 0.3
    theta = np.arccos(np.clip(ratio[good], -1.0, 1.0))
    return float(np.median(theta) / dt)


def _run_field_crossval(config: ScenarioConfig, out_dir):
    horizon = config.horizon
    resolutions = [config.n_x, 2 * config.n_x, 4 * config.n_x]
    results = [_crossval_at(n, horizon) for n in resolutions]
    orders = [float(np.log2(a[2] / b[2]))
              for a, b in zip(results[:-1], results[1:])]

    lines = ["n_x,rep_vs_exact,fd_vs_exact,rep_vs_fd"]
    for n, r in zip(resolutions, results):
        lines.append(",".join([str(n)] + [_FMT % val for val in r]))
    with open(os.path.join(out_dir, "diagnostics.csv"), "w",
              encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")

    # dispersion: spectral is exact per mode, FD converges at second order
    spectral_err = 0.0
    for k_mode in (1, 2, 4):
        grid = periodic_grid(-8.0 * np.pi, 16.0 * np.pi, 512)
        data = InitialFieldData(grid, np.cos(k_mode * grid.nodes),
                                np.zeros(grid.n_x))
        t_probe = 1.37
        u, _, _ = solve_homogeneous(data, t_probe)
        omega = np.sqrt(1.0 + k_mode ** 2)
        target = np.cos(omega * t_probe) * np.cos(k_mode * grid.nodes)
        spectral_err = max(spectral_err, float(
            np.abs(u - target).max() / np.abs(target).max()))
    fd_orders = []
    for k_mode in (2, 4):
        errs = [abs(_measure_fd_dispersion(k_mode, n) - np.sqrt(1 + k_mode ** 2))
                / np.sqrt(1 + k_mode ** 2) for n in (256, 512, 1024)]
        fd_orders += [float(np.log2(errs[i] / errs[i + 1])) for i in range(2)]

    verdicts = {
        "crossval_l2": results[0][2] <= CROSSVAL_L2_TOL,
        "crossval_order": min(orders) >= CONVERGENCE_ORDER_MIN,
        "dispersion_spectral": spectral_err <= DISPERSION_SPECTRAL_RTOL,
        "dispersion_fd_order": min(fd_orders) >= CONVERGENCE_ORDER_MIN,
    }
    measurements = {
        "rep_vs_fd_default": results[0][2],
        "orders": orders,
        "spectral_dispersion_rel_error": spectral_err,
        "fd_dispersion_orders": fd_orders,
    }
    return verdicts, measurements


def _snapshot_writer(out_dir, config, field_data):
    snap_dir = os.path.join(out_dir, "snapshots")
    os.makedirs(snap_dir, exist_ok=True)

    def callback(step, t, phase, u, dxu, ut_provider):
        if config.snapshot_every <= 0 or step % config.snapshot_every:
            return
        ut = ut_provider()
        tag = f"{step:05d}"
        write_field_csv(os.path.join(snap_dir, f"field_{tag}.csv"),
                        phase.x_grid, t, u, ut, dxu)
        write_field_binary(os.path.join(snap_dir, f"field_{tag}.bin"),
                           phase.x_grid, t, u, ut, dxu)
        write_phase_csv(os.path.join(snap_dir, f"phase_{tag}.csv"), phase, t)
        write_phase_binary(os.path.join(snap_dir, f"phase_{tag}.bin"), phase, t)

    return callback


def _run_coupled_mode(config: ScenarioConfig, out_dir):
    phase0 = build_phase_grid(config)
    field_data = build_field_data(config)
    callback = (_snapshot_writer(out_dir, config, field_data)
                if config.snapshot_every > 0 else None)
    result = run_coupled(phase0, field_data, config.horizon, config.dt,
                         field_method=config.field_method,
                         snapshot_callback=callback)
    result.timeline.to_csv(os.path.join(out_dir, "diagnostics.csv"))
    result.timeline.to_json(os.path.join(out_dir, "timeline.json"))

    monitor = continuation_monitor(result.timeline, v_capacity=config.v_max,
                                   x_capacity=config.x_max)
    failed = result.timeline.failed_checks()
    verdicts = {name: name not in failed
                for name in ("max_principle", "mass_conservation", "support_x",
                             "rho_bound", "momentum_bound")}
    verdicts["no_blowup"] = not result.blew_up
    verdicts["continuation_monitor"] = monitor.status != "violation"
    measurements = result.timeline.summary()
    measurements["monitor_status"] = monitor.status
    measurements["monitor_messages"] = monitor.messages
    return verdicts, measurements


def _run_picard_mode(config: ScenarioConfig, out_dir):
    phase0 = build_phase_grid(config)
    field_data = build_field_data(config)
    final, report, converged = run_picard(
        phase0, field_data, config.horizon, config.dt,
        max_iter=config.picard_max_iter, rtol=config.picard_rtol)

    lines = ["n,gap_dxu,gap_f,ratio"]
    for e in report.entries:
        ratio = "" if e["ratio"] is None else _FMT % e["ratio"]
        lines.append(f"{e['n']},{_FMT % e['gap_dxu']},{_FMT % e['gap_f']},{ratio}")
    with open(os.path.join(out_dir, "diagnostics.csv"), "w",
              encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(os.path.join(out_dir, "convergence.json"), "w",
              encoding="ascii", newline="\n") as fh:
        json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")

    # consistency with the direct coupled run on the same grids
    coupled = run_coupled(phase0, field_data, config.horizon, config.dt,
                          field_method="representation")
    gap_vs_coupled = float(np.abs(final.dxu - coupled.dxu).max())

    gaps = report.gaps()
    monotone = all(gaps[i + 1] <= gaps[i] for i in range(2, len(gaps) - 1))
    verdicts = {
        "picard_converged": converged and not final.blew_up,
        "gaps_monotone_after_burnin": monotone,
    }
    measurements = {
        "n_iterations": len(gaps),
        "gaps": gaps,
        "gap_vs_coupled": gap_vs_coupled,
        "q_running": report.q_running,
    }
    return verdicts, measurements


def run_scenario(config: ScenarioConfig, output_dir, workers=None, seed=None,
                 snapshot_every=None):
    """Execute a validated config and write all artifacts to ``output_dir``.

    Returns the exit status: 0 all verdicts pass, 1 some verdict failed.
    Raises ConfigurationError for unrunnable configs (the CLI maps that to
    exit status 2).  Runs are deterministic given (config, seed).
    """
    if seed is not None:
        config.seed = int(seed)
    if workers is not None:
        config.workers = int(workers)
    if snapshot_every is not None:
        config.snapshot_every = int(snapshot_every)
    violations = validate_config(config)
    if violations:
        raise ConfigurationError("; ".join(violations))
    os.makedirs(output_dir, exist_ok=True)

    runner = {
        "kernel-verify-3d": _run_kernel_verify,
        "field-crossval-1d": _run_field_crossval,
        "coupled-1d": _run_coupled_mode,
        "picard-1d": _run_picard_mode,
    }[config.mode]
    verdicts, measurements = runner(config, output_dir)

    summary = {
        "mode": config.mode,
        "seed": config.seed,
        "verdicts": verdicts,
        "measurements": measurements,
        "all_pass": all(verdicts.values()),
        "config": config.to_dict(),
    }
    with open(os.path.join(output_dir, "summary.json"), "w",
              encoding="ascii", newline="\n") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True, default=float)
        fh.write("\n")
    return 0 if summary["all_pass"] else 1


def emit_report(timeline: DiagnosticsTimeline | None, convergence=None,
                summary=None):
    """Human-readable run report plus the machine payload.

    ``timeline`` may be None for modes without per-step records; the gap
    table is included when ``convergence`` (a dict with ``entries``) is
    given.  Returns (text, payload).
    """
    payload = {}
    lines = []
    if summary:
        payload["summary"] = summary
        verdicts = summary.get("verdicts", {})
        for name in sorted(verdicts):
            lines.append(f"{'PASS' if verdicts[name] else 'FAIL'}  {name}")
        failed = [n for n, ok in sorted(verdicts.items()) if not ok]
        lines.append("verdict: " + ("PASS" if not failed
                                    else "FAIL: " + ", ".join(failed)))
    if timeline is not None and timeline.records:
        ts = timeline.summary()
        payload["timeline"] = ts
        lines.append(f"steps: {ts['n_steps']}, final t = {ts['final_time']:g}")
        lines.append(f"max P(t) = {ts['max_P']:.6g}, max R(t) = {ts['max_R']:.6g}")
        if "mass_drift" in ts:
            lines.append(f"mass drift = {ts['mass_drift']:.3e}")
        if ts["failed_checks"]:
            lines.append("FAILED checks: " + ", ".join(ts["failed_checks"]))
        else:
            lines.append("all per-step checks passed")
    if convergence and convergence.get("entries"):
        payload["convergence"] = convergence
        lines.append("picard gap table (n, gap_dxu, ratio):")
        for e in convergence["entries"]:
            ratio = "" if e.get("ratio") is None else f"{e['ratio']:.3f}"
            lines.append(f"  {e['n']:3d}  {e['gap_dxu']:.6e}  {ratio}")
    return "\n".join(lines) + "\n", payload
