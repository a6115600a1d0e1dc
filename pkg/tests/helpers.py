"""Shared helpers for the test suite: interpolants and small dense oracles."""

import numpy as np

from microflow import mms
from microflow.femops import FieldVector
from microflow.mesh import DofMap
from microflow.scheme import PhysParams


def interpolate(dofmap: DofMap, *component_funcs) -> FieldVector:
    """Nodal interpolant; pass one function per component, each f(x, y)."""
    if len(component_funcs) != dofmap.components:
        raise ValueError("one function per component required")
    ns = dofmap.num_scalar_dofs
    xs = dofmap.coords[:ns, 0]
    ys = dofmap.coords[:ns, 1]
    values = np.concatenate([np.asarray(f(xs, ys), dtype=float) for f in component_funcs])
    return FieldVector(values, dofmap)


def random_interior_field(dofmap: DofMap, rng) -> FieldVector:
    """Random coefficients with zeroed boundary dofs (a member of the H^1_0 space)."""
    values = rng.standard_normal(dofmap.num_dofs)
    values[dofmap.boundary_dofs] = 0.0
    return FieldVector(values, dofmap)


def dense(A) -> np.ndarray:
    return np.asarray(A.todense())


def h1_norm(field: FieldVector, mass, stiffness) -> float:
    v = field.values
    return float(np.sqrt(v @ (mass @ v) + v @ (stiffness @ v)))


def fd_forcings(t, x, y, params, step=1e-5):
    """PDE residual assembled from centered finite differences of the exact
    fields alone, independent of the closed-form derivative expressions."""
    h = step

    def u_at(tt, xx, yy):
        return mms.exact(tt, xx, yy)[0]

    def p_at(tt, xx, yy):
        return mms.exact(tt, xx, yy)[1]

    def w_at(tt, xx, yy):
        return mms.exact(tt, xx, yy)[2]

    def ddx(f):
        return (f(t, x + h, y) - f(t, x - h, y)) / (2 * h)

    def ddy(f):
        return (f(t, x, y + h) - f(t, x, y - h)) / (2 * h)

    def ddt(f):
        return (f(t + h, x, y) - f(t - h, x, y)) / (2 * h)

    def lap(f):
        return (
            f(t, x + h, y) + f(t, x - h, y) + f(t, x, y + h) + f(t, x, y - h)
            - 4.0 * f(t, x, y)
        ) / h**2

    u = u_at(t, x, y)
    w = w_at(t, x, y)
    ux, uy = ddx(u_at), ddy(u_at)
    f = (
        ddt(u_at)
        + u[0] * ux + u[1] * uy
        - params.nu0 * lap(u_at)
        + np.stack([ddx(p_at), ddy(p_at)])
        - 2.0 * params.nu_r * np.stack([ddy(w_at), -ddx(w_at)])
    )
    g = (
        params.j * ddt(w_at)
        + params.j * (u[0] * ddx(w_at) + u[1] * ddy(w_at))
        - params.c1 * lap(w_at)
        + 4.0 * params.nu_r * w
        - 2.0 * params.nu_r * (ux[1] - uy[0])
    )
    return f, g


def random_params(rng) -> PhysParams:
    """Positive material constants with c2 = c0 + cd - ca > 0 by construction."""
    ca = rng.uniform(0.2, 2.0)
    return PhysParams(
        j=rng.uniform(0.2, 2.0),
        nu=rng.uniform(0.2, 2.0),
        nu_r=rng.uniform(0.2, 2.0),
        c0=ca + rng.uniform(0.1, 2.0),
        ca=ca,
        cd=rng.uniform(0.2, 2.0),
    )
