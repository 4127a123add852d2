"""Relativistic velocity map and characteristic-flow integration.

The characteristic system of the Vlasov transport equation is

    dx/ds = vhat(v),    dv/ds = -g(s, x),

where ``vhat(v) = v / sqrt(1 + |v|^2)`` is the relativistic velocity of a
particle with momentum v (speed of light and rest mass set to one) and
``g`` is the spatial gradient of the field.  The flow map Z(s, t, z) sends
a phase point z = (x, v) at time t to its position at time s; this module
integrates Z and, on request, its variational (Jacobian) matrix d Z / d z
with a classical fixed-step RK4 scheme.

The flow satisfies the composition identity Z(s, t, z) = Z(s, r, Z(r, t, z))
and its Jacobian solves the first variational equation with identity
initial value; both are exercised by the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from vkglab.errors import FieldEvaluationError

__all__ = [
    "CharacteristicState",
    "FlowResult",
    "advance_characteristics",
    "flow_jacobian_fd_check",
    "hat_v",
    "hat_v_jacobian",
]


def hat_v(v):
    """Relativistic velocity ``v / sqrt(1 + |v|^2)`` of a momentum vector.

    Accepts a scalar (1D momentum) or a vector of dimension d; the result
    has Euclidean norm strictly below 1.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        return float(v) / np.sqrt(1.0 + float(v) ** 2)
    return v / np.sqrt(1.0 + v @ v)


def hat_v_jacobian(v):
    """Jacobian matrix ``d vhat_k / d v_j = (I - vhat vhat^T)/sqrt(1+|v|^2)``.

    Symmetric positive definite; its eigenvalue along v is
    ``(1 + |v|^2)^(-3/2)`` and ``(1 + |v|^2)^(-1/2)`` transversally.
    Scalar input is treated as a 1-vector and yields a 1x1 matrix.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    gamma2 = 1.0 + v @ v
    vh = v / np.sqrt(gamma2)
    return (np.eye(v.size) - np.outer(vh, vh)) / np.sqrt(gamma2)


@dataclass
class CharacteristicState:
    """A phase-space point z = (x, v) at time t.

    ``x`` and ``v`` are arrays of equal dimension d (d = 1 or 3 in
    practice; the integrator works for any d).
    """

    x: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float)).copy()
        self.v = np.atleast_1d(np.asarray(self.v, dtype=float)).copy()
        if self.x.shape != self.v.shape:
            raise ValueError("x and v must have the same dimension")

    @property
    def dim(self) -> int:
        return self.x.size


@dataclass
class FlowResult:
    """Endpoint of a characteristic integration.

    ``jacobian`` is the 2d x 2d variational matrix dZ(s, t, z)/dz, ordered
    as (x, v) blocks, or None when it was not requested.  At s = t it is
    the identity matrix.
    """

    z_end: CharacteristicState
    jacobian: np.ndarray | None = None
    n_steps: int = field(default=0)


def _gradient_jacobian_fd(field_gradient, t, x, h=1e-6):
    """Central-difference Jacobian of the field gradient with respect to x."""
    d = x.size
    jac = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h * max(1.0, abs(x[j]))
        jac[:, j] = (np.atleast_1d(field_gradient(t, x + e))
                     - np.atleast_1d(field_gradient(t, x - e))) / (2.0 * e[j])
    return jac


def advance_characteristics(z0, field_gradient, t0, t1, dt,
                            with_jacobian=False, field_gradient_jacobian=None):
    """Integrate the characteristic system from t0 to t1 with fixed-step RK4.

    Parameters
    ----------
    z0 : CharacteristicState
        Starting phase point.
    field_gradient : callable
        ``g(t, x) -> array`` returning the spatial field gradient; the force
        on the particle is ``-g``.
    t0, t1 : float
        Start and end times.  Backward integration (t1 < t0) is performed by
        negating the step, the vector field is never rewritten.
    dt : float
        Step size magnitude (> 0).  The number of steps is
        ``ceil(|t1 - t0| / dt)`` with the step shrunk to land on t1 exactly.
    with_jacobian : bool
        Also integrate the variational matrix (same RK4 scheme on the
        augmented system); start value is the identity.
    field_gradient_jacobian : callable, optional
        ``(t, x) -> (d, d) array`` with the x-Jacobian of ``field_gradient``.
        When omitted it is approximated by central differences.

    Raises
    ------
    FieldEvaluationError
        If the field callback returns a non-finite value; the error carries
        the offending (t, x).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    x = z0.x.copy()
    v = z0.v.copy()
    d = x.size
    jac = np.eye(2 * d) if with_jacobian else None

    span = t1 - t0
    if span == 0.0:
        return FlowResult(CharacteristicState(x, v, t1), jac, 0)
    n_steps = max(1, int(np.ceil(abs(span) / dt - 1e-12)))
    h = span / n_steps

    if field_gradient_jacobian is None:
        def grad_jac(t, xc):
            return _gradient_jacobian_fd(field_gradient, t, xc)
    else:
        grad_jac = field_gradient_jacobian

    def rhs(t, xc, vc, jc):
        g = np.atleast_1d(np.asarray(field_gradient(t, xc), dtype=float))
        if not np.all(np.isfinite(g)):
            raise FieldEvaluationError(t, xc.copy())
        dx = vc / np.sqrt(1.0 + vc @ vc)
        dv = -g
        if jc is None:
            return dx, dv, None
        a = np.zeros((2 * d, 2 * d))
        a[:d, d:] = hat_v_jacobian(vc)
        a[d:, :d] = -grad_jac(t, xc)
        return dx, dv, a @ jc

    t = t0
    for _ in range(n_steps):
        k1x, k1v, k1j = rhs(t, x, v, jac)
        k2x, k2v, k2j = rhs(t + h / 2, x + h / 2 * k1x, v + h / 2 * k1v,
                            None if jac is None else jac + h / 2 * k1j)
        k3x, k3v, k3j = rhs(t + h / 2, x + h / 2 * k2x, v + h / 2 * k2v,
                            None if jac is None else jac + h / 2 * k2j)
        k4x, k4v, k4j = rhs(t + h, x + h * k3x, v + h * k3v,
                            None if jac is None else jac + h * k3j)
        x = x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if jac is not None:
            jac = jac + h / 6 * (k1j + 2 * k2j + 2 * k3j + k4j)
        t += h

    return FlowResult(CharacteristicState(x, v, t1), jac, n_steps)


def flow_jacobian_fd_check(z0, field_gradient, t0, t1, dt=1e-3, h=1e-5,
                           field_gradient_jacobian=None):
    """Max deviation between the integrated variational matrix and a
    central-difference Jacobian of the flow endpoints.

    Returns ``max |J_integrated - J_fd|`` over all entries.  Useful as a
    self-check that the variational integration is wired to the same flow.
    """
    res = advance_characteristics(z0, field_gradient, t0, t1, dt,
                                  with_jacobian=True,
                                  field_gradient_jacobian=field_gradient_jacobian)
    d = z0.dim
    fd = np.empty((2 * d, 2 * d))
    base = np.concatenate([z0.x, z0.v])
    for j in range(2 * d):
        e = np.zeros(2 * d)
        e[j] = h
        zp = CharacteristicState((base + e)[:d], (base + e)[d:], z0.t)
        zm = CharacteristicState((base - e)[:d], (base - e)[d:], z0.t)
        rp = advance_characteristics(zp, field_gradient, t0, t1, dt)
        rm = advance_characteristics(zm, field_gradient, t0, t1, dt)
        fd[:, j] = (np.concatenate([rp.z_end.x, rp.z_end.v])
                    - np.concatenate([rm.z_end.x, rm.z_end.v])) / (2.0 * h)
    return float(np.abs(res.jacobian - fd).max())
