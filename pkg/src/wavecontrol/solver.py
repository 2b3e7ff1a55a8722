"""Explicit leapfrog solvers for the wave equation with a potential.

Scheme for y_tt - Lap y + A y = S with homogeneous Dirichlet data:

    y^{n+1} = 2 y^n - y^{n-1} + dt^2 (Lap_h y^n - A^n y^n + S^n),

second-order centered in space and time; the first step uses the
ghost-consistent update

    y^1 = y^0 + dt u1 + dt^2/2 (Lap_h y^0 - A^0 y^0 + S^0),

which keeps overall order two.  The discrete terminal velocity

    v_T(y) = (y^N - y^{N-1})/dt + dt/2 (Lap_h y^N - A^N y^N + S^N)

is the exact algebraic transpose of that initialization, so a backward
solve run as the time-reversed forward scheme pairs with the forward
solve through an exact discrete Green identity.  That identity is what
keeps the control Gramian symmetric to machine precision.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import BlowupError, ConfigError
from .fields import SpaceTimeField, StatePair
from .grids import SpaceTimeGrid


def laplacian_interior(grid: SpaceTimeGrid, values: np.ndarray) -> np.ndarray:
    """Centered second-difference Laplacian of a full spatial array, interior part."""
    if grid.dim == 1:
        (dx,) = grid.dx
        return (values[2:] - 2 * values[1:-1] + values[:-2]) / dx**2
    dx, dy = grid.dx
    core = values[1:-1, 1:-1]
    return ((values[2:, 1:-1] - 2 * core + values[:-2, 1:-1]) / dx**2
            + (values[1:-1, 2:] - 2 * core + values[1:-1, :-2]) / dy**2)


def _laplacian_levels(grid: SpaceTimeGrid, vals: np.ndarray) -> np.ndarray:
    """Laplacian of every time level at once, interior part."""
    if grid.dim == 1:
        (dx,) = grid.dx
        return (vals[:, 2:] - 2 * vals[:, 1:-1] + vals[:, :-2]) / dx**2
    dx, dy = grid.dx
    core = vals[:, 1:-1, 1:-1]
    return ((vals[:, 2:, 1:-1] - 2 * core + vals[:, :-2, 1:-1]) / dx**2
            + (vals[:, 1:-1, 2:] - 2 * core + vals[:, 1:-1, :-2]) / dy**2)


def _interior(grid, a):
    return a[(slice(1, -1),) * grid.dim]


def _accel(grid, level, A, S, n):
    """Lap_h y - A y + S at one time level, interior nodes."""
    acc = laplacian_interior(grid, level)
    if A is not None:
        acc = acc - _interior(grid, A[n]) * _interior(grid, level)
    if S is not None:
        acc = acc + _interior(grid, S[n])
    return acc


def solve_forward(grid: SpaceTimeGrid, potential: SpaceTimeField | None,
                  source: SpaceTimeField | None, init: StatePair) -> SpaceTimeField:
    """March the leapfrog scheme from t=0; raises BlowupError on nonfinite values."""
    _check_inputs(grid, potential, source)
    dt = grid.dt
    A = potential.values if potential is not None else None
    S = source.values if source is not None else None
    sl = (slice(1, -1),) * grid.dim

    y = np.zeros((grid.nt + 1,) + grid.shape)
    y[0] = init.position
    y[(1,) + sl] = (_interior(grid, init.position) + dt * _interior(grid, init.velocity)
                    + 0.5 * dt * dt * _accel(grid, y[0], A, S, 0))
    if not np.all(np.isfinite(y[1])):
        raise BlowupError(1)
    if grid.dim == 1:
        _march_1d(grid, y, A, S)
    else:
        _march_2d(grid, y, A, S)
    return SpaceTimeField(grid, y)


_CHECK_STRIDE = 32


def _blowup_scan(y, lo, hi):
    """Locate the first nonfinite level in (lo, hi]."""
    for n in range(lo, hi + 1):
        if not np.all(np.isfinite(y[n])):
            raise BlowupError(n)
    raise BlowupError(hi)


def _march_1d(grid, y, A, S):
    dt = grid.dt
    dt2 = dt * dt
    c = dt2 / grid.dx[0] ** 2
    nt = grid.nt
    buf = np.empty(grid.shape[0] - 2)
    # overflow is detected and reported, not raised by numpy
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, nt):
            yn = y[n]
            np.multiply(yn[1:-1], 2.0 - 2.0 * c, out=buf)
            buf += c * yn[2:]
            buf += c * yn[:-2]
            buf -= y[n - 1, 1:-1]
            if A is not None:
                buf -= dt2 * A[n, 1:-1] * yn[1:-1]
            if S is not None:
                buf += dt2 * S[n, 1:-1]
            y[n + 1, 1:-1] = buf
            if (n + 1) % _CHECK_STRIDE == 0 and not np.all(np.isfinite(buf)):
                _blowup_scan(y, n + 2 - _CHECK_STRIDE, n + 1)
    if not np.all(np.isfinite(y[nt])):
        _blowup_scan(y, max(1, nt + 1 - _CHECK_STRIDE), nt)


def _march_2d(grid, y, A, S):
    dt = grid.dt
    dt2 = dt * dt
    cx = dt2 / grid.dx[0] ** 2
    cy = dt2 / grid.dx[1] ** 2
    nt = grid.nt
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, nt):
            yn = y[n]
            core = yn[1:-1, 1:-1]
            buf = (2.0 - 2.0 * cx - 2.0 * cy) * core - y[n - 1, 1:-1, 1:-1]
            buf += cx * (yn[2:, 1:-1] + yn[:-2, 1:-1])
            buf += cy * (yn[1:-1, 2:] + yn[1:-1, :-2])
            if A is not None:
                buf -= dt2 * A[n, 1:-1, 1:-1] * core
            if S is not None:
                buf += dt2 * S[n, 1:-1, 1:-1]
            y[n + 1, 1:-1, 1:-1] = buf
            if (n + 1) % _CHECK_STRIDE == 0 and not np.all(np.isfinite(buf)):
                _blowup_scan(y, n + 2 - _CHECK_STRIDE, n + 1)
    if not np.all(np.isfinite(y[nt])):
        _blowup_scan(y, max(1, nt + 1 - _CHECK_STRIDE), nt)


def solve_backward(grid: SpaceTimeGrid, potential: SpaceTimeField | None,
                   terminal: StatePair) -> SpaceTimeField:
    """Homogeneous adjoint solve backward from terminal data at t=T.

    Equals the time reversal of a forward solve with time-reversed
    potential and velocity sign flipped (the scheme is reversible).
    """
    rev_potential = potential.time_reversed() if potential is not None else None
    rev_init = StatePair(grid, terminal.position, -terminal.velocity)
    return solve_forward(grid, rev_potential, None, rev_init).time_reversed()


def terminal_state(grid: SpaceTimeGrid, y: SpaceTimeField,
                   potential: SpaceTimeField | None = None,
                   source: SpaceTimeField | None = None) -> StatePair:
    """Scheme-exact (position, velocity) at t=T for a forward solve output."""
    A = potential.values if potential is not None else None
    S = source.values if source is not None else None
    v = ((_interior(grid, y.values[-1]) - _interior(grid, y.values[-2])) / grid.dt
         + 0.5 * grid.dt * _accel(grid, y.values[-1], A, S, grid.nt))
    full_v = np.zeros(grid.shape)
    full_v[(slice(1, -1),) * grid.dim] = v
    return StatePair(grid, y.values[-1].copy(), full_v)


def initial_state(grid: SpaceTimeGrid, y: SpaceTimeField,
                  potential: SpaceTimeField | None = None,
                  source: SpaceTimeField | None = None) -> StatePair:
    """Scheme-exact (position, velocity) at t=0; recovers the init data exactly."""
    A = potential.values if potential is not None else None
    S = source.values if source is not None else None
    v = ((_interior(grid, y.values[1]) - _interior(grid, y.values[0])) / grid.dt
         - 0.5 * grid.dt * _accel(grid, y.values[0], A, S, 0))
    full_v = np.zeros(grid.shape)
    full_v[(slice(1, -1),) * grid.dim] = v
    return StatePair(grid, y.values[0].copy(), full_v)


def residual_field(y: SpaceTimeField, f: SpaceTimeField | None, g, region=None) -> SpaceTimeField:
    """Discrete y_tt - Lap y + g(y) - f chi_omega, same stencils as the solver.

    Defined on stencil-complete time levels 1..nt-1; the end levels are
    set to zero, so a forward solve of the semilinear equation driven by
    f has residual zero identically.
    """
    grid = y.grid
    dt = grid.dt
    vals = y.values
    mid = (vals[2:] - 2 * vals[1:-1] + vals[:-2]) / (dt * dt)
    mid = _interior_levels(grid, mid) - _laplacian_levels(grid, vals[1:-1])
    if g is not None:
        mid = mid + _interior_levels(grid, g.g(vals[1:-1]))
    if f is not None:
        chi = region.weights if region is not None else 1.0
        mid = mid - _interior_levels(grid, f.values[1:-1] * chi)
    r = np.zeros_like(vals)
    r[(slice(1, -1),) + (slice(1, -1),) * grid.dim] = mid
    return SpaceTimeField(grid, r)


def _interior_levels(grid, a):
    return a[(slice(None),) + (slice(1, -1),) * grid.dim]


def discrete_energy(grid: SpaceTimeGrid, y: SpaceTimeField) -> np.ndarray:
    """Leapfrog-conserved energy at half levels (for the A=0, source=0 solve)."""
    w = float(np.prod(grid.dx))
    vals = y.values
    dt = grid.dt
    energies = []
    for n in range(grid.nt):
        vel = (_interior(grid, vals[n + 1]) - _interior(grid, vals[n])) / dt
        kinetic = 0.5 * w * float(np.sum(vel * vel))
        cross = -0.5 * w * float(np.sum(laplacian_interior(grid, vals[n + 1])
                                        * _interior(grid, vals[n])))
        energies.append(kinetic + cross)
    return np.asarray(energies)


def _check_inputs(grid, potential, source):
    for name, f in (("potential", potential), ("source", source)):
        if f is not None and f.grid != grid:
            raise ConfigError(f"{name} is defined on a different grid")
    if grid.dt > grid.cfl_factor * min(grid.dx) / math.sqrt(grid.dim) * (1 + 1e-12):
        raise ConfigError("CFL condition violated")
