"""Method-of-lines evolution of u(t, x) on the unit interval.

Space is a uniform node grid with second-order central differences; time is
explicit Heun (two-stage, second order) under a diffusion CFL bound
dt = cfl_safety * dx^2 / max|diffusion_coeff|, re-evaluated every step since
degenerate coefficients move with the state.  Implicit stepping is
deliberately avoided: where the diffusion coefficient vanishes the Jacobian
is singular, and desk-scale grids make the explicit penalty affordable.

Dirichlet ends are pinned at the initial profile's end values (the
homogeneous case pins them at zero).  Robin ends u_x = b(u) close the
stencil with the mirrored ghost node u_{-1} = u_1 - 2 dx b(u_0), which makes
the central gradient at the end equal b(u) exactly.

The porous-medium family advances the divergence form (u^m)_xx with a
conservative stencil on u^m instead of the expanded product rule; the stencil
keeps nonnegative states nonnegative at desk scale, which the expanded form
does not.  Models opt in through params["divergence_form_m"].
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .models import ProblemSpec

__all__ = [
    "SolverError",
    "Grid1D",
    "StateFrame",
    "SolverControls",
    "SimulationResult",
    "pme_rhs",
    "evolution_rhs",
    "step",
    "simulate",
]


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid1D:
    n_cells: int

    def __post_init__(self):
        if self.n_cells < 8:
            raise ValueError(f"n_cells must be >= 8, got {self.n_cells}")

    @property
    def dx(self) -> float:
        return 1.0 / self.n_cells

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_cells + 1)


@dataclass(frozen=True)
class StateFrame:
    t: float
    u: np.ndarray
    ut: np.ndarray


@dataclass(frozen=True)
class SolverControls:
    cfl_safety: float = 0.4
    dt_max: Optional[float] = None
    dt_floor: float = 1e-12
    output_stride: int = 1


@dataclass(frozen=True)
class SimulationResult:
    frames: tuple
    n_steps: int
    dt_smallest: float
    dt_largest: float
    termination: str = "t_end_reached"

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    def __iter__(self):
        return iter(self.frames)


def _degenerate_power(u: np.ndarray, m: float) -> np.ndarray:
    if float(np.min(u)) < -1e-12:
        raise SolverError(
            f"negative state {float(np.min(u))!r} fed to the degenerate power u^{m}"
        )
    # Roundoff-level negatives are clipped so fractional powers stay real.
    return np.maximum(u, 0.0) ** m


def pme_rhs(u: np.ndarray, m: float, dx: float) -> np.ndarray:
    """Conservative stencil ((u^m)_{i+1} - 2(u^m)_i + (u^m)_{i-1}) / dx^2.

    Interior nodes only; the boundary entries are zero.  Negative input
    beyond roundoff is an error since u^m is not defined there.
    """
    v = _degenerate_power(np.asarray(u, dtype=float), m)
    out = np.zeros_like(v)
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (dx * dx)
    return out


def _robin_ghosts(spec: ProblemSpec, u: np.ndarray, dx: float):
    left = right = None
    if spec.bc_left.kind == "robin":
        left = u[1] - 2.0 * dx * float(spec.bc_left.robin_b(u[0]))
    if spec.bc_right.kind == "robin":
        right = u[-2] + 2.0 * dx * float(spec.bc_right.robin_b(u[-1]))
    return left, right


def evolution_rhs(spec: ProblemSpec, grid: Grid1D, u: np.ndarray) -> np.ndarray:
    """du/dt at every node; Dirichlet nodes report 0 (they are pinned)."""
    x = grid.nodes
    dx = grid.dx
    ut = np.zeros_like(u)
    ghost_left, ghost_right = _robin_ghosts(spec, u, dx)

    m = spec.params.get("divergence_form_m")
    if m is not None:
        v = _degenerate_power(u, float(m))
        ut[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (dx * dx)
        if ghost_left is not None:
            gv = _degenerate_power(np.array([ghost_left]), float(m))[0]
            ut[0] = (v[1] - 2.0 * v[0] + gv) / (dx * dx)
        if ghost_right is not None:
            gv = _degenerate_power(np.array([ghost_right]), float(m))[0]
            ut[-1] = (gv - 2.0 * v[-1] + v[-2]) / (dx * dx)
        return ut

    p = (u[2:] - u[:-2]) / (2.0 * dx)
    q = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (dx * dx)
    ut[1:-1] = spec.rhs(x[1:-1], u[1:-1], p, q)
    if ghost_left is not None:
        p0 = float(spec.bc_left.robin_b(u[0]))
        q0 = (u[1] - 2.0 * u[0] + ghost_left) / (dx * dx)
        ut[0] = float(spec.rhs(x[0], u[0], p0, q0))
    if ghost_right is not None:
        p1 = float(spec.bc_right.robin_b(u[-1]))
        q1 = (ghost_right - 2.0 * u[-1] + u[-2]) / (dx * dx)
        ut[-1] = float(spec.rhs(x[-1], u[-1], p1, q1))
    return ut


def _pin(spec: ProblemSpec, u: np.ndarray, pins) -> np.ndarray:
    if spec.bc_left.kind == "dirichlet":
        u[0] = pins[0]
    if spec.bc_right.kind == "dirichlet":
        u[-1] = pins[1]
    return u


def step(spec: ProblemSpec, grid: Grid1D, frame: StateFrame, dt: float,
         k1: Optional[np.ndarray] = None) -> StateFrame:
    """One Heun update.  ``k1`` may reuse the rhs already stored in the frame."""
    pins = (frame.u[0], frame.u[-1])
    if k1 is None:
        k1 = evolution_rhs(spec, grid, frame.u)
    mid = _pin(spec, frame.u + dt * k1, pins)
    k2 = evolution_rhs(spec, grid, mid)
    u_new = _pin(spec, frame.u + 0.5 * dt * (k1 + k2), pins)
    if not np.all(np.isfinite(u_new)):
        raise SolverError(f"non-finite state after step to t={frame.t + dt!r}")
    return StateFrame(frame.t + dt, u_new, evolution_rhs(spec, grid, u_new))


def _cfl_dt(spec: ProblemSpec, grid: Grid1D, u: np.ndarray, controls: SolverControls,
            dt_cap: float, t: float) -> float:
    p = np.gradient(u, grid.dx)
    with np.errstate(all="ignore"):
        coef = np.abs(np.asarray(spec.diffusion_coeff(grid.nodes, u, p), dtype=float))
    coef_max = float(np.max(coef)) if coef.size else 0.0
    if not math.isfinite(coef_max):
        raise SolverError(f"diffusion coefficient not finite at t={t!r}")
    dt = dt_cap
    if coef_max > 1e-30:
        dt = min(dt, controls.cfl_safety * grid.dx * grid.dx / coef_max)
    if dt < controls.dt_floor:
        raise SolverError(f"CFL time step {dt!r} fell below the floor at t={t!r}")
    return dt


def simulate(spec: ProblemSpec, u0, t_end: float, grid: Optional[Grid1D] = None,
             controls: SolverControls = SolverControls()) -> SimulationResult:
    """Advance u0 to t_end, storing every ``output_stride``-th frame.

    The returned frames always include the initial state and the final time.
    Each stored frame carries the rhs at its own state, so downstream energy
    monitors never re-derive u_t.
    """
    u = np.array(u0, dtype=float)
    if grid is None:
        grid = Grid1D(len(u) - 1)
    if len(u) != grid.n_cells + 1:
        raise ValueError(f"u0 has {len(u)} nodes, grid wants {grid.n_cells + 1}")
    if t_end <= 0.0:
        raise ValueError("t_end must be positive")
    if spec.params.get("divergence_form_m") is not None and float(np.min(u)) < 0.0:
        raise SolverError("degenerate power models need u0 >= 0")

    dt_cap = controls.dt_max if controls.dt_max is not None else t_end / 64.0
    frame = StateFrame(0.0, u, evolution_rhs(spec, grid, u))
    frames = [frame]
    n_steps = 0
    dt_smallest = math.inf
    dt_largest = 0.0

    while frame.t < t_end - 1e-14 * t_end:
        dt = _cfl_dt(spec, grid, frame.u, controls, dt_cap, frame.t)
        dt = min(dt, t_end - frame.t)
        frame = step(spec, grid, frame, dt, k1=frame.ut)
        n_steps += 1
        dt_smallest = min(dt_smallest, dt)
        dt_largest = max(dt_largest, dt)
        if n_steps % controls.output_stride == 0:
            frames.append(frame)

    if frames[-1] is not frame:
        frames.append(frame)
    return SimulationResult(tuple(frames), n_steps, dt_smallest, dt_largest)
