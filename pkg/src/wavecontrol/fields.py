"""Space-time fields, state snapshots and discrete norms.

L^2 and L^p norms use trapezoidal quadrature in space and time.  The
H^1_0 and H^-1 norms are realized spectrally in the sine eigenbasis of
the Dirichlet Laplacian: for v = sum v_hat_k phi_k with phi_k
orthonormal in L^2,

    |v|_{H^1_0}^2 = sum mu_k v_hat_k^2,
    |v|_{H^-1}^2  = sum v_hat_k^2 / mu_k,

where mu_k are the continuous eigenvalues (k pi / L)^2 (summed per axis
in 2D).  The discrete sine transform is normalized so that Parseval
holds exactly against the interior-node L^2 sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft as sp_fft

from .errors import ConfigError
from .grids import SpaceTimeGrid


def _embed(grid: SpaceTimeGrid, interior: np.ndarray) -> np.ndarray:
    full = np.zeros(grid.shape)
    full[(slice(1, -1),) * grid.dim] = interior
    return full


@lru_cache(maxsize=32)
def _eigenvalues(lengths: tuple, shape: tuple) -> np.ndarray:
    """Dirichlet-Laplacian eigenvalues on the interior modes, grid-shaped."""
    per_axis = [((np.arange(1, n - 1) * np.pi / L) ** 2) for L, n in zip(lengths, shape)]
    if len(per_axis) == 1:
        return per_axis[0]
    return per_axis[0][:, None] + per_axis[1][None, :]


def eigenvalues(grid: SpaceTimeGrid) -> np.ndarray:
    return _eigenvalues(grid.lengths, grid.shape)


def sine_coefficients(grid: SpaceTimeGrid, values: np.ndarray) -> np.ndarray:
    """DST of a spatial array (full grid, boundary ignored), Parseval-normalized."""
    v = values[(slice(1, -1),) * grid.dim]
    scale = math.sqrt(math.prod(grid.dx))
    if grid.dim == 1:
        return scale * sp_fft.dst(v, type=1, norm="ortho")
    return scale * sp_fft.dstn(v, type=1, norm="ortho")


def from_sine_coefficients(grid: SpaceTimeGrid, coeffs: np.ndarray) -> np.ndarray:
    """Inverse of sine_coefficients, returns a full spatial array."""
    scale = math.sqrt(math.prod(grid.dx))
    if grid.dim == 1:
        v = sp_fft.idst(coeffs / scale, type=1, norm="ortho")
    else:
        v = sp_fft.idstn(coeffs / scale, type=1, norm="ortho")
    return _embed(grid, v)


def _space_weights(grid: SpaceTimeGrid) -> np.ndarray:
    ws = []
    for h, n in zip(grid.dx, grid.shape):
        w = np.full(n, h)
        w[0] = w[-1] = h / 2
        ws.append(w)
    if grid.dim == 1:
        return ws[0]
    return ws[0][:, None] * ws[1][None, :]


def _time_weights(grid: SpaceTimeGrid) -> np.ndarray:
    w = np.full(grid.nt + 1, grid.dt)
    w[0] = w[-1] = grid.dt / 2
    return w


@dataclass
class SpaceTimeField:
    """Scalar field sampled on the full space-time grid, time level first."""

    grid: SpaceTimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        expected = (self.grid.nt + 1,) + self.grid.shape
        if v.shape != expected:
            raise ConfigError(f"field shape {v.shape} does not match grid {expected}")
        if not np.all(np.isfinite(v)):
            bad = np.where(~np.isfinite(v).reshape(v.shape[0], -1).all(axis=1))[0]
            raise ConfigError(f"nonfinite field values, first bad time level {bad[0]}")
        v.setflags(write=False)
        self.values = v

    @classmethod
    def zeros(cls, grid: SpaceTimeGrid) -> "SpaceTimeField":
        return cls(grid, np.zeros((grid.nt + 1,) + grid.shape))

    @classmethod
    def from_function(cls, grid: SpaceTimeGrid, fn) -> "SpaceTimeField":
        """Sample fn(x[, y], t) on the grid."""
        coords = grid.meshgrid()
        levels = [fn(*coords, t) * np.ones(grid.shape) for t in grid.time_levels()]
        return cls(grid, np.stack(levels))

    @classmethod
    def constant(cls, grid: SpaceTimeGrid, value: float) -> "SpaceTimeField":
        return cls(grid, np.full((grid.nt + 1,) + grid.shape, float(value)))

    def time_reversed(self) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, self.values[::-1].copy())

    def to_binary(self, path):
        """Flat float64 dump, time level outer, node index (C order) inner."""
        np.ascontiguousarray(self.values).tofile(path)

    @classmethod
    def from_binary(cls, grid: SpaceTimeGrid, path) -> "SpaceTimeField":
        v = np.fromfile(path, dtype=np.float64)
        return cls(grid, v.reshape((grid.nt + 1,) + grid.shape))

    def to_csv(self, path):
        """One row per time level, nodes flattened in C order."""
        flat = self.values.reshape(self.grid.nt + 1, -1)
        with open(path, "w") as fh:
            fh.write("# rows: time levels 0..nt; columns: nodes, C order, shape="
                     + "x".join(str(n) for n in self.grid.shape) + "\n")
            for row in flat:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


@dataclass
class StatePair:
    """A (position, velocity) snapshot; position vanishes on the boundary."""

    grid: SpaceTimeGrid
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        pos = np.array(self.position, dtype=float)
        vel = np.array(self.velocity, dtype=float)
        if pos.shape != self.grid.shape or vel.shape != self.grid.shape:
            raise ConfigError("state components must match the spatial grid shape")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel))):
            raise ConfigError("nonfinite state values")
        scale = 1.0 + float(np.max(np.abs(pos)))
        if _boundary_max(pos, self.grid.dim) > 1e-9 * scale:
            raise ConfigError("position does not vanish on the boundary")
        _zero_boundary(pos, self.grid.dim)
        _zero_boundary(vel, self.grid.dim)
        pos.setflags(write=False)
        vel.setflags(write=False)
        self.position = pos
        self.velocity = vel

    @classmethod
    def zeros(cls, grid: SpaceTimeGrid) -> "StatePair":
        return cls(grid, np.zeros(grid.shape), np.zeros(grid.shape))

    def __add__(self, other: "StatePair") -> "StatePair":
        return StatePair(self.grid, self.position + other.position,
                         self.velocity + other.velocity)

    def __sub__(self, other: "StatePair") -> "StatePair":
        return StatePair(self.grid, self.position - other.position,
                         self.velocity - other.velocity)

    def scaled(self, a: float) -> "StatePair":
        return StatePair(self.grid, a * self.position, a * self.velocity)

    def is_zero(self, tol: float = 0.0) -> bool:
        return float(np.max(np.abs(self.position))) <= tol and \
            float(np.max(np.abs(self.velocity))) <= tol


def _boundary_max(a, dim):
    m = 0.0
    for ax in range(dim):
        m = max(m, float(np.max(np.abs(np.take(a, 0, axis=ax)))),
                float(np.max(np.abs(np.take(a, -1, axis=ax)))))
    return m


def _zero_boundary(a, dim):
    for ax in range(dim):
        sl = [slice(None)] * dim
        sl[ax] = 0
        a[tuple(sl)] = 0.0
        sl[ax] = -1
        a[tuple(sl)] = 0.0


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def space_l2(grid: SpaceTimeGrid, values: np.ndarray) -> float:
    return math.sqrt(float(np.sum(_space_weights(grid) * values * values)))


def space_lp(grid: SpaceTimeGrid, values: np.ndarray, p: float) -> float:
    return float(np.sum(_space_weights(grid) * np.abs(values) ** p)) ** (1.0 / p)


def l2_qt(f: SpaceTimeField, region=None) -> float:
    """L^2 norm over omega x (0, T); full Q_T when region is None."""
    chi = region.weights if region is not None else 1.0
    per_level = np.sum((_space_weights(f.grid) * chi) * f.values * f.values,
                       axis=tuple(range(1, f.values.ndim)))
    return math.sqrt(float(np.sum(_time_weights(f.grid) * per_level)))


def linf_lp(f: SpaceTimeField, p: float) -> float:
    """max over time of the spatial L^p norm."""
    w = _space_weights(f.grid)
    per_level = np.sum(w * np.abs(f.values) ** p, axis=tuple(range(1, f.values.ndim)))
    return float(np.max(per_level) ** (1.0 / p))


def linf_l1(f: SpaceTimeField) -> float:
    return linf_lp(f, 1.0)


def h10_norm(grid: SpaceTimeGrid, values: np.ndarray) -> float:
    c = sine_coefficients(grid, values)
    return math.sqrt(float(np.sum(eigenvalues(grid) * c * c)))


def hminus1_norm(grid: SpaceTimeGrid, values: np.ndarray) -> float:
    c = sine_coefficients(grid, values)
    return math.sqrt(float(np.sum(c * c / eigenvalues(grid))))


def v_norm(state: StatePair) -> float:
    """Norm of H^1_0 x L^2."""
    return math.sqrt(h10_norm(state.grid, state.position) ** 2
                     + space_l2(state.grid, state.velocity) ** 2)


def h_norm(state: StatePair) -> float:
    """Norm of L^2 x H^-1."""
    return math.sqrt(space_l2(state.grid, state.position) ** 2
                     + hminus1_norm(state.grid, state.velocity) ** 2)


def norms(obj, region=None, p: float | None = None) -> dict:
    """Norm summary for a field or a state pair."""
    if isinstance(obj, StatePair):
        return {"V_norm": v_norm(obj), "H_norm": h_norm(obj)}
    if isinstance(obj, SpaceTimeField):
        if p is None:
            p = obj.grid.dim + 1
        return {
            "L2_QT": l2_qt(obj),
            "L2_qT": l2_qt(obj, region) if region is not None else None,
            "Linf_L1": linf_l1(obj),
            "Linf_Lp": linf_lp(obj, p),
        }
    raise TypeError(f"no norms defined for {type(obj)!r}")


def velocity_levels(grid: SpaceTimeGrid, values: np.ndarray) -> np.ndarray:
    """Second-order time derivative of a field at every level (for logging)."""
    dt = grid.dt
    v = np.empty_like(values)
    v[1:-1] = (values[2:] - values[:-2]) / (2 * dt)
    v[0] = (-3 * values[0] + 4 * values[1] - values[2]) / (2 * dt)
    v[-1] = (3 * values[-1] - 4 * values[-2] + values[-3]) / (2 * dt)
    return v


def linf_v(f: SpaceTimeField) -> float:
    """max over time of the V-norm of (y, dy/dt)."""
    grid = f.grid
    vel = velocity_levels(grid, f.values)
    mu = eigenvalues(grid)
    best = 0.0
    for n in range(grid.nt + 1):
        cp = sine_coefficients(grid, f.values[n])
        cv = sine_coefficients(grid, vel[n])
        best = max(best, float(np.sum(mu * cp * cp) + np.sum(cv * cv)))
    return math.sqrt(best)
