"""The four-stage fractional time stepper for 2D micropolar flow.

One step advances (u, p, w) through pressure extrapolation, a linearized
velocity update with the extrapolated pressure gradient, a pressure-Poisson
update, and a decoupled angular-velocity update that convects with the new
velocity.  The implicit systems are solved iteratively; the velocity and
angular matrices are reassembled every step (the convection operator depends
on the current velocity) while their time-constant parts and preconditioners
are cached.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import femops
from .femops import FieldVector
from .mesh import Mesh, build_dof_map
from .sparsela import (
    SolverError,
    apply_dirichlet,
    cg_solve,
    enforce_zero_mean,
    gmres_solve,
    make_preconditioner,
)

__all__ = ["PhysParams", "TimeGrid", "TimeState", "FractionalStepSolver"]


@dataclass(frozen=True)
class PhysParams:
    """Material constants; the defaults are the unit set of the test problem.

    All six base constants must be positive and c2 = c0 + cd - ca must stay
    positive (c2 multiplies the grad-div term that vanishes for the 2D scalar
    angular velocity, but the constraint is part of the model).
    """

    j: float = 1.0
    nu: float = 1.0
    nu_r: float = 1.0
    c0: float = 1.0
    ca: float = 1.0
    cd: float = 1.0

    def __post_init__(self) -> None:
        for name in ("j", "nu", "nu_r", "c0", "ca", "cd"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"material constant {name} must be positive")
        if self.c2 <= 0.0:
            raise ValueError(f"c2 = c0 + cd - ca = {self.c2} must be positive")

    @property
    def nu0(self) -> float:
        return self.nu + self.nu_r

    @property
    def c1(self) -> float:
        return self.ca + self.cd

    @property
    def c2(self) -> float:
        return self.c0 + self.cd - self.ca


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of K steps on [0, T]."""

    T: float
    K: int

    def __post_init__(self) -> None:
        if self.K < 1:
            raise ValueError("step count must be >= 1")
        if self.T <= 0.0:
            raise ValueError("final time must be positive")

    @property
    def tau(self) -> float:
        return self.T / self.K

    def time(self, k: int) -> float:
        return self.T * k / self.K  # t_K == T exactly

    def times(self) -> np.ndarray:
        return self.T * np.arange(self.K + 1) / self.K


@dataclass
class TimeState:
    """Solver state after step k; p_prev equals p at k = 0."""

    k: int
    u: FieldVector
    w: FieldVector
    p: FieldVector
    p_prev: FieldVector


class FractionalStepSolver:
    """Discretization and stepping for one mesh/parameter/time-grid triple.

    Taylor-Hood Q2/Q1 velocity-pressure pair with continuous Q2 scalar
    angular velocity.  ``pc`` selects the preconditioner family for the
    velocity and angular solves; the incomplete factorization is built once
    from the time-constant operator part and reused across steps.
    """

    def __init__(
        self,
        mesh: Mesh,
        params: PhysParams,
        grid: TimeGrid,
        tol: float = 1e-10,
        maxit: int | None = None,
        pc: str = "ilu",
        gmres_restart: int = 60,
        orders: tuple[int, int] = (2, 1),
    ):
        if orders != (2, 1):
            raise NotImplementedError(
                f"only the (2, 1) velocity/pressure pair is supported, got {orders}"
            )
        self.mesh = mesh
        self.params = params
        self.grid = grid
        self.tol = tol
        self.maxit = maxit
        self.gmres_restart = gmres_restart

        self.vel_map = build_dof_map(mesh, order=orders[0], components=2)
        self.ang_map = build_dof_map(mesh, order=orders[0], components=1)
        self.pres_map = build_dof_map(mesh, order=orders[1], components=1)

        self.mass_s = femops.assemble_mass(self.ang_map)
        self.stiff_s = femops.assemble_stiffness(self.ang_map)
        self.mass_v = femops.assemble_mass(self.vel_map)
        self.stiff_v = femops.assemble_stiffness(self.vel_map)
        self.pres_stiff = femops.assemble_stiffness(self.pres_map)
        self.grad_p = femops.assemble_pressure_gradient(self.vel_map, self.pres_map)
        self.curl_sv = femops.assemble_curl_scalar_to_vector(self.vel_map, self.ang_map)
        self.curl_vs = femops.assemble_curl_vector_to_scalar(self.ang_map, self.vel_map)

        self._pres_nullspace = np.ones(self.pres_map.num_dofs)

        tau = grid.tau
        p = params
        vel_const = self.mass_v * (1.0 / tau) + self.stiff_v * p.nu0
        ang_const = self.mass_s * (p.j / tau + 4.0 * p.nu_r) + self.stiff_s * p.c1
        self._vel_pc = self._constant_part_pc(vel_const, self.vel_map, pc)
        self._ang_pc = self._constant_part_pc(ang_const, self.ang_map, pc)

    def _constant_part_pc(self, const_op, dofmap, pc: str):
        """Preconditioner from the Dirichlet-constrained time-constant part."""
        n = dofmap.num_dofs
        constrained, _ = apply_dirichlet(
            const_op, np.zeros(n), dofmap.boundary_dofs, 0.0
        )
        if pc != "ilu" or dofmap.components == 1:
            return make_preconditioner(constrained, pc)
        # the vector operator is block diagonal over components: factor the
        # scalar block once and apply it per component
        ns = dofmap.num_scalar_dofs
        block = constrained[:ns, :ns].tocsr()
        solve = make_preconditioner(block, pc)

        def apply(r: np.ndarray) -> np.ndarray:
            return np.concatenate((solve(r[:ns]), solve(r[ns:])))

        return apply

    # ------------------------------------------------------------------
    # stages
    # ------------------------------------------------------------------

    def initialize(
        self, u0: Callable, w0: Callable, p0: Callable
    ) -> TimeState:
        """L2-project initial data; u, w get zeroed boundary dofs, p zero mean.

        The initial pressure is not part of the PDE data and must be supplied
        by the caller (the manufactured-solution harness passes the exact
        one).
        """
        u = femops.l2_project(u0, self.vel_map)
        u.values[self.vel_map.boundary_dofs] = 0.0
        w = femops.l2_project(w0, self.ang_map)
        w.values[self.ang_map.boundary_dofs] = 0.0
        p = enforce_zero_mean(femops.l2_project(p0, self.pres_map), self.pres_map)
        return TimeState(k=0, u=u, w=w, p=p, p_prev=p.copy())

    def extrapolate_pressure(self, state: TimeState) -> np.ndarray:
        """p# = p^k for the first step, else 2 p^k - p^{k-1}."""
        if state.k == 0:
            return state.p.values.copy()
        return 2.0 * state.p.values - state.p_prev.values

    def velocity_step(
        self, state: TimeState, p_sharp: np.ndarray, f_next: Callable
    ) -> FieldVector:
        """Solve the linearized momentum equation for u^{k+1}."""
        tau = self.grid.tau
        p = self.params
        convection = femops.assemble_convection(state.u, self.vel_map)
        system = self.mass_v * (1.0 / tau) + convection + self.stiff_v * p.nu0
        rhs = (
            (self.mass_v @ state.u.values) / tau
            - self.grad_p @ p_sharp
            + 2.0 * p.nu_r * (self.curl_sv @ state.w.values)
            + femops.assemble_load(self.vel_map, f_next)
        )
        system, rhs = apply_dirichlet(system, rhs, self.vel_map.boundary_dofs, 0.0)
        x, report = gmres_solve(
            system,
            rhs,
            tol=self.tol,
            maxit=self.maxit,
            restart=self.gmres_restart,
            pc=self._vel_pc,
        )
        if not report.converged:
            raise SolverError(f"velocity step k={state.k}: {report}")
        return FieldVector(x, self.vel_map)

    def pressure_step(self, state: TimeState, u_next: FieldVector) -> FieldVector:
        """Pressure-Poisson update: p^{k+1} = p^k + dp with zero mean.

        The right-hand side <u^{k+1}, grad r> is orthogonal to constants for
        any u, so the deflated solve is well posed.
        """
        tau = self.grid.tau
        rhs = (self.grad_p.T @ u_next.values) / tau
        delta, report = cg_solve(
            self.pres_stiff,
            rhs,
            tol=self.tol,
            maxit=self.maxit,
            pc="jacobi",
            nullspace=self._pres_nullspace,
        )
        if not report.converged:
            raise SolverError(f"pressure step k={state.k}: {report}")
        p_new = FieldVector(state.p.values + delta, self.pres_map)
        return enforce_zero_mean(p_new, self.pres_map)

    def angular_step(
        self, state: TimeState, u_next: FieldVector, g_next: Callable
    ) -> FieldVector:
        """Solve the angular-momentum equation for w^{k+1} (convects with u^{k+1})."""
        tau = self.grid.tau
        p = self.params
        convection = femops.assemble_convection(u_next, self.ang_map)
        system = (
            self.mass_s * (p.j / tau + 4.0 * p.nu_r)
            + convection * p.j
            + self.stiff_s * p.c1
        )
        rhs = (
            (p.j / tau) * (self.mass_s @ state.w.values)
            + 2.0 * p.nu_r * (self.curl_vs @ u_next.values)
            + femops.assemble_load(self.ang_map, g_next)
        )
        system, rhs = apply_dirichlet(system, rhs, self.ang_map.boundary_dofs, 0.0)
        x, report = gmres_solve(
            system,
            rhs,
            tol=self.tol,
            maxit=self.maxit,
            restart=self.gmres_restart,
            pc=self._ang_pc,
        )
        if not report.converged:
            raise SolverError(f"angular step k={state.k}: {report}")
        return FieldVector(x, self.ang_map)

    def advance(self, state: TimeState, f: Callable, g: Callable) -> TimeState:
        """One full step: extrapolate, velocity, pressure, angular.

        ``f(t, x, y)`` and ``g(t, x, y)`` are evaluated at t_{k+1}.  The
        velocity step never sees w^{k+1} and the angular step only reads
        u^{k+1}; that decoupling order is part of the scheme.
        """
        if state.k >= self.grid.K:
            raise ValueError(f"state is already at the final step {self.grid.K}")
        t_next = self.grid.time(state.k + 1)
        p_sharp = self.extrapolate_pressure(state)
        u_next = self.velocity_step(state, p_sharp, lambda x, y: f(t_next, x, y))
        p_next = self.pressure_step(state, u_next)
        w_next = self.angular_step(state, u_next, lambda x, y: g(t_next, x, y))
        return TimeState(
            k=state.k + 1, u=u_next, w=w_next, p=p_next, p_prev=state.p
        )

    def energy(self, state: TimeState) -> float:
        """E^k = ||u||_L2^2 + j ||w||_L2^2 + tau^2 ||grad p||_L2^2."""
        tau = self.grid.tau
        u, w, p = state.u.values, state.w.values, state.p.values
        return float(
            u @ (self.mass_v @ u)
            + self.params.j * (w @ (self.mass_s @ w))
            + tau**2 * (p @ (self.pres_stiff @ p))
        )
