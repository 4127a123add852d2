"""Snapshot export: CSV with full-precision floats and a self-describing
binary dump shared by the field and phase-space solvers.

Binary layout (all little endian):

    magic   4 bytes  b"VKG1"
    version u32      currently 1
    kind    u32      1 = field snapshot, 2 = phase-space snapshot
    time    f64
    field:  x_min f64, x_max f64, n_x u64, then u, u_t, u_x rows (f64)
    phase:  x_min, x_max f64, n_x u64, v_min, v_max f64, n_v u64,
            then f row-major (n_x, n_v) f64
"""

from __future__ import annotations

import struct

import numpy as np

__all__ = [
    "read_binary_snapshot",
    "write_field_csv",
    "write_field_binary",
    "write_phase_csv",
    "write_phase_binary",
]

_MAGIC = b"VKG1"
_VERSION = 1
_FMT = "%.17g"


def write_field_csv(path, grid, t, u, ut, ux):
    """Columns x, u, u_t, u_x at 17 significant digits."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"# t = {_FMT % t}\n")
        fh.write("x,u,u_t,u_x\n")
        for row in zip(grid.nodes, u, ut, ux):
            fh.write(",".join(_FMT % val for val in row) + "\n")


def write_phase_csv(path, phase, t):
    """Columns x, v, f at 17 significant digits (row-major over the grid)."""
    x = phase.x_grid.nodes
    v = phase.v_nodes
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"# t = {_FMT % t}\n")
        fh.write("x,v,f\n")
        for i in range(x.size):
            for j in range(v.size):
                fh.write(f"{_FMT % x[i]},{_FMT % v[j]},{_FMT % phase.values[i, j]}\n")


def write_field_binary(path, grid, t, u, ut, ux):
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IId", _VERSION, 1, t))
        fh.write(struct.pack("<ddQ", grid.x_min, grid.x_max, grid.n_x))
        for arr in (u, ut, ux):
            fh.write(np.asarray(arr, dtype="<f8").tobytes())


def write_phase_binary(path, phase, t):
    g = phase.x_grid
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IId", _VERSION, 2, t))
        fh.write(struct.pack("<ddQ", g.x_min, g.x_max, g.n_x))
        fh.write(struct.pack("<ddQ", phase.v_min, phase.v_max, phase.n_v))
        fh.write(np.ascontiguousarray(phase.values, dtype="<f8").tobytes())


def read_binary_snapshot(path):
    """Read either snapshot kind; returns a dict with the header fields and
    arrays (keys u/u_t/u_x for fields, f plus v-grid spec for phase)."""
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not a vkglab snapshot file")
        version, kind, t = struct.unpack("<IId", fh.read(16))
        if version != _VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        x_min, x_max, n_x = struct.unpack("<ddQ", fh.read(24))
        out = {"kind": kind, "time": t, "x_min": x_min, "x_max": x_max,
               "n_x": int(n_x)}
        if kind == 1:
            for key in ("u", "u_t", "u_x"):
                out[key] = np.frombuffer(fh.read(8 * int(n_x)), dtype="<f8").copy()
        elif kind == 2:
            v_min, v_max, n_v = struct.unpack("<ddQ", fh.read(24))
            out.update(v_min=v_min, v_max=v_max, n_v=int(n_v))
            data = np.frombuffer(fh.read(8 * int(n_x) * int(n_v)), dtype="<f8")
            out["f"] = data.reshape(int(n_x), int(n_v)).copy()
        else:
            raise ValueError(f"unknown snapshot kind {kind}")
    return out
