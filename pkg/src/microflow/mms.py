"""Manufactured solution on the square (-1,1)^2 and study bookkeeping.

The exact fields are

    u(x,y,t) = pi sin(t) (sin^2(pi x) sin(2 pi y), -sin(2 pi x) sin^2(pi y))
    p(x,y,t) = sin(t) cos(pi x) sin(pi y)
    w(x,y,t) = pi sin(t) sin^2(pi x) sin^2(pi y)

u is divergence-free, u and w vanish on the boundary of the square, p has
zero mean, and everything vanishes at t = 0.  The forcing terms are the
closed forms obtained by substituting these fields into the momentum and
angular-momentum equations (2D scalar angular velocity, so the grad-div
term drops out).

All functions are vectorized over numpy arrays of coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scheme import PhysParams

__all__ = [
    "velocity",
    "velocity_dt",
    "velocity_grad",
    "velocity_laplacian",
    "pressure",
    "pressure_grad",
    "angular",
    "angular_dt",
    "angular_grad",
    "angular_laplacian",
    "rot_velocity",
    "rot_angular",
    "exact",
    "force_linear",
    "force_angular",
    "forcings",
    "discrete_linf_norm",
    "discrete_l2_norm",
    "convergence_rate",
    "StudyRow",
    "StudyReport",
]

PI = np.pi


def velocity(t, x, y):
    s = np.sin(t)
    u1 = PI * s * np.sin(PI * x) ** 2 * np.sin(2 * PI * y)
    u2 = -PI * s * np.sin(2 * PI * x) * np.sin(PI * y) ** 2
    return np.stack(np.broadcast_arrays(u1, u2))


def velocity_dt(t, x, y):
    c = np.cos(t)
    u1 = PI * c * np.sin(PI * x) ** 2 * np.sin(2 * PI * y)
    u2 = -PI * c * np.sin(2 * PI * x) * np.sin(PI * y) ** 2
    return np.stack(np.broadcast_arrays(u1, u2))


def velocity_grad(t, x, y):
    """Jacobian of u, shape (2, 2) + shape; [i, j] = d u_i / d x_j."""
    s = np.sin(t)
    d11 = PI**2 * s * np.sin(2 * PI * x) * np.sin(2 * PI * y)
    d12 = 2 * PI**2 * s * np.sin(PI * x) ** 2 * np.cos(2 * PI * y)
    d21 = -2 * PI**2 * s * np.cos(2 * PI * x) * np.sin(PI * y) ** 2
    d22 = -(PI**2) * s * np.sin(2 * PI * x) * np.sin(2 * PI * y)
    d11, d12, d21, d22 = np.broadcast_arrays(d11, d12, d21, d22)
    return np.stack([np.stack([d11, d12]), np.stack([d21, d22])])


def velocity_laplacian(t, x, y):
    s = np.sin(t)
    l1 = 2 * PI**3 * s * np.sin(2 * PI * y) * (2 * np.cos(2 * PI * x) - 1)
    l2 = 2 * PI**3 * s * np.sin(2 * PI * x) * (1 - 2 * np.cos(2 * PI * y))
    return np.stack(np.broadcast_arrays(l1, l2))


def pressure(t, x, y):
    return np.sin(t) * np.cos(PI * x) * np.sin(PI * y)


def pressure_grad(t, x, y):
    s = np.sin(t)
    px = -PI * s * np.sin(PI * x) * np.sin(PI * y)
    py = PI * s * np.cos(PI * x) * np.cos(PI * y)
    return np.stack(np.broadcast_arrays(px, py))


def angular(t, x, y):
    return PI * np.sin(t) * np.sin(PI * x) ** 2 * np.sin(PI * y) ** 2


def angular_dt(t, x, y):
    return PI * np.cos(t) * np.sin(PI * x) ** 2 * np.sin(PI * y) ** 2


def angular_grad(t, x, y):
    s = np.sin(t)
    wx = PI**2 * s * np.sin(2 * PI * x) * np.sin(PI * y) ** 2
    wy = PI**2 * s * np.sin(PI * x) ** 2 * np.sin(2 * PI * y)
    return np.stack(np.broadcast_arrays(wx, wy))


def angular_laplacian(t, x, y):
    s = np.sin(t)
    return (
        2
        * PI**3
        * s
        * (
            np.cos(2 * PI * x) * np.sin(PI * y) ** 2
            + np.sin(PI * x) ** 2 * np.cos(2 * PI * y)
        )
    )


def rot_velocity(t, x, y):
    """Scalar curl of u: du2/dx - du1/dy."""
    g = velocity_grad(t, x, y)
    return g[1, 0] - g[0, 1]


def rot_angular(t, x, y):
    """Vector curl of the scalar w: (dw/dy, -dw/dx)."""
    g = angular_grad(t, x, y)
    return np.stack([g[1], -g[0]])


def exact(t, x, y):
    """Exact (u, p, w) at one time."""
    return velocity(t, x, y), pressure(t, x, y), angular(t, x, y)


def force_linear(t, x, y, params: PhysParams):
    """Momentum forcing f = u_t + (u.grad)u - nu0 lap u + grad p - 2 nu_r rot w."""
    u = velocity(t, x, y)
    g = velocity_grad(t, x, y)
    conv = np.stack(
        [u[0] * g[0, 0] + u[1] * g[0, 1], u[0] * g[1, 0] + u[1] * g[1, 1]]
    )
    return (
        velocity_dt(t, x, y)
        + conv
        - params.nu0 * velocity_laplacian(t, x, y)
        + pressure_grad(t, x, y)
        - 2 * params.nu_r * rot_angular(t, x, y)
    )


def force_angular(t, x, y, params: PhysParams):
    """Moment forcing g = j w_t + j u.grad w - c1 lap w + 4 nu_r w - 2 nu_r rot u."""
    u = velocity(t, x, y)
    gw = angular_grad(t, x, y)
    return (
        params.j * angular_dt(t, x, y)
        + params.j * (u[0] * gw[0] + u[1] * gw[1])
        - params.c1 * angular_laplacian(t, x, y)
        + 4 * params.nu_r * angular(t, x, y)
        - 2 * params.nu_r * rot_velocity(t, x, y)
    )


def forcings(t, x, y, params: PhysParams):
    """Both forcing terms of the manufactured problem."""
    return force_linear(t, x, y, params), force_angular(t, x, y, params)


# ---------------------------------------------------------------------------
# discrete space-time norms and rates
# ---------------------------------------------------------------------------


def discrete_linf_norm(per_step_values) -> float:
    """max over k = 0..K of the per-step values."""
    values = np.asarray(per_step_values, dtype=float)
    if values.size == 0:
        raise ValueError("empty per-step value list")
    return float(values.max())


def discrete_l2_norm(per_step_values, tau: float) -> float:
    """sqrt(tau * sum_{k=0}^{K} v_k^2), the k = 0 term included."""
    values = np.asarray(per_step_values, dtype=float)
    if values.size == 0:
        raise ValueError("empty per-step value list")
    return float(np.sqrt(tau * np.sum(values**2)))


def convergence_rate(e_coarse: float, e_fine: float) -> float:
    """Observed order log2(e_coarse / e_fine) under halved resolution."""
    if e_coarse <= 0.0 or e_fine <= 0.0:
        raise ValueError("errors must be positive to compute a rate")
    return float(np.log2(e_coarse / e_fine))


# ---------------------------------------------------------------------------
# study report
# ---------------------------------------------------------------------------


@dataclass
class StudyRow:
    """Error norms of one (tau, h) run; rates are None on the coarsest row."""

    tau: float
    h: float
    err_u_linf_l2: float
    err_u_l2_h1: float
    err_p_l2_l2: float
    err_w_linf_l2: float
    err_w_l2_h1: float
    rate_u: float | None = None
    rate_p: float | None = None
    rate_w: float | None = None


@dataclass
class StudyReport:
    rows: list[StudyRow]

    def attach_rates(self) -> None:
        """Fill rate columns from adjacent rows (refinement ratio 2)."""
        for prev, cur in zip(self.rows, self.rows[1:]):
            cur.rate_u = convergence_rate(prev.err_u_linf_l2, cur.err_u_linf_l2)
            cur.rate_p = convergence_rate(prev.err_p_l2_l2, cur.err_p_l2_l2)
            cur.rate_w = convergence_rate(prev.err_w_linf_l2, cur.err_w_linf_l2)
