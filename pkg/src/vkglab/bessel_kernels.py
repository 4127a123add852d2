"""Bessel-ratio functions, retarded-derivative kernels, sphere quadrature,
and the characteristic/tangential derivative calculus.

The field representation formulas involve two families of special objects:

* ratios ``J_k(xi) / xi^k`` of Bessel functions of the first kind, which are
  entire functions of ``xi^2`` with value ``1 / (2^k k!)`` at the origin, and

* angular kernels ``a^k, a^t`` (first derivatives) and
  ``a^{kl}, a^{tk}, a^{tt}`` (second derivatives) defined on
  (unit sphere) x (momentum space).  The second-order kernels integrate to
  zero over the unit sphere for every momentum; this cancellation is what
  keeps the strongly singular part of the second-derivative representation
  integrable, and it is the main verification target of this module.

Numerical care: all kernels contain powers of ``1 / (1 + omega . vhat)``,
which approaches ``(1 - |vhat|)`` near the antipode ``omega = -vhat`` and
underflows catastrophically if evaluated naively for large momenta.  The
denominator is therefore computed in a conjugate form with no cancellation,
and the ``a^{tt}`` kernel in a factored form, see the function docstrings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special as _sp

from vkglab.errors import ConfigurationError

__all__ = [
    "BesselRatioTable",
    "KernelQuery",
    "bessel_ratio",
    "kernel_a_second",
    "kernel_a_second_pieces",
    "kernel_a_spatial",
    "kernel_a_time",
    "one_plus_omega_dot_vhat",
    "sphere_average",
    "sphere_quadrature_nodes",
    "st_decomposition_residual",
]

XI_SWITCH = 8.0
SERIES_TERMS = 30
MIN_SPHERE_ORDER = 2
DEFAULT_SPHERE_ORDER = 10


@dataclass(frozen=True)
class BesselRatioTable:
    """Evaluation parameters for ``J_k(xi)/xi^k``.

    ``xi_switch`` separates the ascending power series (below) from the
    library Bessel routine (above); evaluation is continuous across the
    switch to within 1e-12.
    """

    order: int
    xi_switch: float = XI_SWITCH
    series_terms: int = SERIES_TERMS

    def __post_init__(self):
        if self.order not in (0, 1, 2, 3):
            raise ValueError("order must be in {0, 1, 2, 3}")
        if self.xi_switch <= 0:
            raise ValueError("xi_switch must be positive")


@lru_cache(maxsize=8)
def _series_coefficients(k, terms):
    # J_k(xi)/xi^k = 2^-k * sum_m (-1)^m u^m / (m! (m+k)!),  u = xi^2/4
    coeffs = np.empty(terms)
    for m in range(terms):
        coeffs[m] = (-1.0) ** m / (math.factorial(m) * math.factorial(m + k))
    return coeffs / 2.0 ** k


def bessel_ratio(k, xi):
    """``J_k(xi) / xi^k`` for k in {0, 1, 2, 3}, continuous at xi = 0.

    The removable singularity at the origin is filled by the analytic limit
    ``1 / (2^k k!)``; for k = 0 this is plain ``J_0``.  Below ``XI_SWITCH``
    the ascending series (a polynomial in xi^2) is used, above it the
    library Bessel function divided by ``xi^k``.

    Raises ``ValueError`` for negative arguments.
    """
    if k not in (0, 1, 2, 3):
        raise ValueError("order k must be in {0, 1, 2, 3}")
    xi_arr = np.asarray(xi, dtype=float)
    if np.any(xi_arr < 0):
        raise ValueError("xi must be nonnegative")
    scalar = xi_arr.ndim == 0
    xi_arr = np.atleast_1d(xi_arr)
    out = np.empty_like(xi_arr)

    small = xi_arr < XI_SWITCH
    if np.any(small):
        u = (xi_arr[small] / 2.0) ** 2
        coeffs = _series_coefficients(k, SERIES_TERMS)
        acc = np.full_like(u, coeffs[-1])
        for c in coeffs[-2::-1]:
            acc = acc * u + c
        out[small] = acc
    if np.any(~small):
        xl = xi_arr[~small]
        out[~small] = _sp.jv(k, xl) / xl ** k
    return float(out[0]) if scalar else out


@dataclass
class KernelQuery:
    """A kernel evaluation point: unit direction(s) ``omega`` and momentum ``v``.

    ``omega`` has shape (3,) or (n, 3) and must be unit length to 1e-12;
    ``v`` has shape (3,).  Batched omegas evaluate all kernels vectorized.
    """

    omega: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.v.shape != (3,):
            raise ValueError("v must have shape (3,)")
        om = np.atleast_2d(self.omega)
        norms = np.linalg.norm(om, axis=-1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("omega must be a unit vector to 1e-12")


def one_plus_omega_dot_vhat(omega, v):
    """``1 + omega . vhat`` evaluated without cancellation.

    Writing s = sqrt(1 + |v|^2), the conjugate form

        s + omega . v = (1 + |v_perp|^2) / (s - omega . v),
        v_perp = component of v orthogonal to omega,

    has a positive numerator and denominator whenever ``omega . v < 0``, so
    the result keeps full relative accuracy even at the antipode
    ``omega ~ -vhat`` where the direct sum loses all significant digits.
    """
    omega = np.asarray(omega, dtype=float)
    v = np.asarray(v, dtype=float)
    s = np.sqrt(1.0 + v @ v)
    ov = omega @ v
    vperp2 = np.maximum(v @ v - ov * ov, 0.0)
    return np.where(ov < 0.0, (1.0 + vperp2) / (s - ov), s + ov) / s


def _query_parts(q: KernelQuery):
    om = np.atleast_2d(q.omega)
    gamma2 = 1.0 + q.v @ q.v
    vh = q.v / np.sqrt(gamma2)
    d = one_plus_omega_dot_vhat(om, q.v)
    return om, vh, gamma2, d


def _collapse(values, q: KernelQuery):
    return float(values[0]) if q.omega.ndim == 1 else values


def kernel_a_spatial(k, q: KernelQuery):
    """First-derivative spatial kernel, axis k in {1, 2, 3}:

        a^k = -vhat_k / (1 + omega.vhat)
              - omega_k / ((1 + |v|^2) (1 + omega.vhat)^2)
    """
    if k not in (1, 2, 3):
        raise ValueError("axis k must be 1, 2 or 3")
    om, vh, gamma2, d = _query_parts(q)
    i = k - 1
    val = -vh[i] / d - om[:, i] / (gamma2 * d * d)
    return _collapse(val, q)


def kernel_a_time(q: KernelQuery):
    """First-derivative time kernel:

        a^t = (|vhat|^2 + omega.vhat) / (1 + omega.vhat)^2
    """
    om, vh, gamma2, d = _query_parts(q)
    mu = d - 1.0
    val = (vh @ vh + mu) / (d * d)
    return _collapse(val, q)


def kernel_a_second_pieces(k, l, q: KernelQuery):
    """The four summands of the spatial-spatial second-derivative kernel.

    For axes 1 <= k, l <= 3 the kernel splits as a1 + a2 + a3 + a4 with

        a1 = -3 (omega_l vhat_k + omega_k vhat_l) / ((1+|v|^2)(1+omega.vhat)^3)
        a2 = -3 omega_k omega_l / ((1+|v|^2)^2 (1+omega.vhat)^4)
        a3 = -2 vhat_k vhat_l / (1+omega.vhat)^2
        a4 = delta_kl / ((1+|v|^2)(1+omega.vhat)^2)

    whose sphere integrals are, with momentum components v_k,

        24 pi v_k v_l,   -16 pi v_k v_l - 4 pi delta_kl,
        -8 pi v_k v_l,   4 pi delta_kl,

    summing to zero.  Returned as a tuple (a1, a2, a3, a4).
    """
    if k not in (1, 2, 3) or l not in (1, 2, 3):
        raise ValueError("axes k, l must be 1, 2 or 3")
    om, vh, gamma2, d = _query_parts(q)
    i, j = k - 1, l - 1
    dkl = 1.0 if k == l else 0.0
    a1 = -3.0 * (om[:, j] * vh[i] + om[:, i] * vh[j]) / (gamma2 * d ** 3)
    a2 = -3.0 * om[:, i] * om[:, j] / (gamma2 ** 2 * d ** 4)
    a3 = -2.0 * vh[i] * vh[j] / d ** 2
    a4 = dkl / (gamma2 * d ** 2)
    return tuple(_collapse(a, q) for a in (a1, a2, a3, a4))


def kernel_a_second(k, l, q: KernelQuery):
    """Second-derivative kernel, axes in {1, 2, 3, "t"}.

    Covers the spatial-spatial four-term sum, the mixed time-spatial kernel

        a^{tk} = 2 vhat_k (omega.vhat + |vhat|^2) / (1+omega.vhat)^3
                 + 3 omega_k (omega.vhat + |vhat|^2) / ((1+|v|^2)(1+omega.vhat)^4)
                 - vhat_k / ((1+|v|^2)(1+omega.vhat)^3)

    and the time-time kernel, evaluated in the cancellation-free factored
    form (q_t denotes the first-derivative time kernel a^t)

        a^{tt} = 3 q_t^2 - |vhat|^2 / (1+omega.vhat)^2,

    algebraically identical to the expanded numerator
    ``3|vhat|^4 - (omega.vhat)^2 |vhat|^2 - |vhat|^2 + 3 (omega.vhat)^2
    + 4 (omega.vhat) |vhat|^2`` over ``(1+omega.vhat)^4``.

    Every one of these kernels integrates to zero over the unit sphere.
    """
    spatial_k = k in (1, 2, 3)
    spatial_l = l in (1, 2, 3)
    if not spatial_k and k != "t":
        raise ValueError("axis k must be 1, 2, 3 or 't'")
    if not spatial_l and l != "t":
        raise ValueError("axis l must be 1, 2, 3 or 't'")

    if spatial_k and spatial_l:
        a1, a2, a3, a4 = kernel_a_second_pieces(k, l, q)
        return a1 + a2 + a3 + a4

    om, vh, gamma2, d = _query_parts(q)
    mu = d - 1.0
    w2 = vh @ vh
    if spatial_k != spatial_l:
        i = (k if spatial_k else l) - 1
        num = mu + w2
        val = (2.0 * vh[i] * num / d ** 3
               + 3.0 * om[:, i] * num / (gamma2 * d ** 4)
               - vh[i] / (gamma2 * d ** 3))
        return _collapse(val, q)
    qt = (w2 + mu) / (d * d)
    val = 3.0 * qt * qt - w2 / (d * d)
    return _collapse(val, q)


# ---------------------------------------------------------------------------
# sphere quadrature
# ---------------------------------------------------------------------------

def _orthonormal_frame(v):
    n = np.linalg.norm(v)
    e3 = v / n if n > 1e-14 else np.array([0.0, 0.0, 1.0])
    seed = np.array([1.0, 0.0, 0.0]) if abs(e3[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(e3, seed)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    return e1, e2, e3


def _polar_panel_bounds(vhat_norm):
    """Geometric grading of [-1, 1] toward the antipode cos(theta) = -1.

    Panel boundaries -1, -1 + 2^-K, ..., -1/2, 0, 1 where the depth K
    resolves the distance ``1 - |vhat|`` of the kernel pole from the
    interval.  For |vhat| -> 0 this degenerates to three plain panels.
    """
    k_depth = max(1, int(np.ceil(-np.log2(max(1.0 - vhat_norm, 1e-13)))))
    bounds = [-1.0] + [-1.0 + 2.0 ** (-j) for j in range(k_depth, -1, -1)] + [1.0]
    return bounds


def sphere_quadrature_nodes(v, order=DEFAULT_SPHERE_ORDER):
    """Quadrature nodes and weights on the unit sphere, adapted to ``v``.

    Product rule: per-panel Gauss-Legendre of the given order in
    cos(theta), on panels geometrically graded toward the direction
    antipodal to v (where the retarded kernels sharpen), crossed with a
    uniform trapezoid rule in the azimuth (``max(16, 4 * order)`` nodes,
    exact for the low-degree trigonometric dependence of the kernels).
    The polar axis of the grid is aligned with v.

    Returns ``(omega, weights)`` with omega of shape (n, 3); the weights
    sum to 4 pi.
    """
    if order < MIN_SPHERE_ORDER:
        raise ConfigurationError(
            f"sphere quadrature order must be >= {MIN_SPHERE_ORDER}, got {order}")
    v = np.asarray(v, dtype=float)
    e1, e2, e3 = _orthonormal_frame(v)
    w = np.linalg.norm(v) / np.sqrt(1.0 + v @ v)
    xi, wg = leggauss(order)
    bounds = _polar_panel_bounds(w)
    cs, ws = [], []
    for a, b in zip(bounds[:-1], bounds[1:]):
        cs.append((a + b) / 2.0 + (b - a) / 2.0 * xi)
        ws.append((b - a) / 2.0 * wg)
    c = np.concatenate(cs)
    wc = np.concatenate(ws)
    n_phi = max(16, 4 * order)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    cgrid, pgrid = np.meshgrid(c, phi, indexing="ij")
    s = np.sqrt(np.maximum((1.0 - cgrid) * (1.0 + cgrid), 0.0))
    omega = (cgrid[..., None] * e3
             + s[..., None] * (np.cos(pgrid)[..., None] * e1
                               + np.sin(pgrid)[..., None] * e2))
    weights = (wc[:, None] * (2.0 * np.pi / n_phi)) * np.ones_like(pgrid)
    return omega.reshape(-1, 3), weights.ravel()


def sphere_average(kernel, v, order=DEFAULT_SPHERE_ORDER):
    """Integral of ``kernel(omega)`` over the unit sphere (NOT divided by
    4 pi; the constant kernel integrates to 4 pi).

    ``kernel`` is called once with an (n, 3) array of unit vectors and must
    return n values.  ``v`` steers the pole-graded node placement; for all
    second-derivative kernels the result vanishes to quadrature accuracy.
    Raises ConfigurationError below the minimum order.
    """
    omega, weights = sphere_quadrature_nodes(v, order)
    values = np.asarray(kernel(omega), dtype=float)
    if values.shape != weights.shape:
        raise ValueError("kernel must return one value per omega node")
    return float(weights @ values)


# ---------------------------------------------------------------------------
# S/T derivative calculus
# ---------------------------------------------------------------------------

def st_decomposition_residual(g, v, omega, point, h):
    """Finite-difference residual of the S/T decomposition identities.

    With S = d_t + vhat . d_x (derivative along the characteristic) and
    T_j = -omega_j d_t + d_{x_j} (tangential to the backward cone), the
    partial derivatives decompose as

        d_{x_k} = omega_k / (1 + omega.vhat) S
                  + sum_j (delta_jk - omega_k vhat_j / (1 + omega.vhat)) T_j
        d_t     = (S - vhat . T) / (1 + omega.vhat)

    This evaluates both sides for a smooth test function ``g(t, x)`` at
    ``point = (t, x)``: the left sides by direct central differences with
    step h, the right sides from central-difference S g and T g.  Returns
    the maximum absolute discrepancy over the four identities; the
    decomposition itself is exact so the residual is O(h^2) from the
    differencing alone.
    """
    t0, x0 = point
    x0 = np.asarray(x0, dtype=float)
    v = np.asarray(v, dtype=float)
    omega = np.asarray(omega, dtype=float)
    vh = v / np.sqrt(1.0 + v @ v)
    denom = float(one_plus_omega_dot_vhat(omega, v))

    def ddir(dt_dir, dx_dir):
        return (g(t0 + h * dt_dir, x0 + h * dx_dir)
                - g(t0 - h * dt_dir, x0 - h * dx_dir)) / (2.0 * h)

    sg = ddir(1.0, vh)
    tg = np.array([ddir(-omega[j], np.eye(3)[j]) for j in range(3)])

    dt_direct = ddir(1.0, np.zeros(3))
    dt_decomp = (sg - vh @ tg) / denom
    residual = abs(dt_direct - dt_decomp)
    for k in range(3):
        dx_direct = ddir(0.0, np.eye(3)[k])
        dx_decomp = omega[k] / denom * sg + sum(
            ((1.0 if j == k else 0.0) - omega[k] * vh[j] / denom) * tg[j]
            for j in range(3))
        residual = max(residual, abs(dx_direct - dx_decomp))
    return float(residual)
