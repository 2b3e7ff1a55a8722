"""Space-time grids, control regions and the geometric control condition.

The domain is an interval (0, L) or an axis-aligned rectangle
(0, Lx) x (0, Ly) with homogeneous Dirichlet boundary, discretized by
uniformly spaced nodes (boundary nodes included).  Time is discretized
with nt uniform steps over [0, T]; the explicit scheme requires
dt <= cfl_factor * min(dx) / sqrt(d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

SIDES_1D = ("left", "right")
SIDES_2D = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform tensor grid on Omega x (0, T)."""

    lengths: tuple          # (L,) or (Lx, Ly)
    shape: tuple            # nodes per axis, boundary included
    T: float
    nt: int
    cfl_factor: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(float(L) for L in self.lengths))
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        if len(self.lengths) not in (1, 2) or len(self.lengths) != len(self.shape):
            raise ConfigError("grid must be 1D or 2D with one node count per axis")
        if any(L <= 0 for L in self.lengths):
            raise ConfigError("domain lengths must be positive")
        if any(n < 3 for n in self.shape):
            raise ConfigError("need at least 3 nodes per axis")
        if self.T <= 0:
            raise ConfigError("time horizon T must be positive")
        if self.nt < 2:
            raise ConfigError("need at least 2 time steps")
        if not (0 < self.cfl_factor <= 0.95):
            raise ConfigError("cfl_factor must lie in (0, 0.95]")
        if self.dt > self.cfl_factor * min(self.dx) / math.sqrt(self.dim) * (1 + 1e-12):
            raise ConfigError(
                f"CFL violated: dt={self.dt:.3e} exceeds "
                f"{self.cfl_factor:.2f}*dx/sqrt(d)="
                f"{self.cfl_factor * min(self.dx) / math.sqrt(self.dim):.3e}"
            )

    @property
    def dim(self) -> int:
        return len(self.lengths)

    @property
    def dx(self) -> tuple:
        return tuple(L / (n - 1) for L, n in zip(self.lengths, self.shape))

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def n_time_levels(self) -> int:
        return self.nt + 1

    @property
    def interior_shape(self) -> tuple:
        return tuple(n - 2 for n in self.shape)

    def axis_nodes(self, axis: int) -> np.ndarray:
        return np.linspace(0.0, self.lengths[axis], self.shape[axis])

    def meshgrid(self):
        """Node coordinates, one array per axis, shaped like the spatial grid."""
        axes = [self.axis_nodes(a) for a in range(self.dim)]
        if self.dim == 1:
            return (axes[0],)
        return tuple(np.meshgrid(axes[0], axes[1], indexing="ij"))

    def time_levels(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nt + 1)

    @property
    def domain_measure(self) -> float:
        return math.prod(self.lengths)


@dataclass(frozen=True)
class ControlRegion:
    """Control support omega with per-node indicator weights in [0, 1].

    `kind` and `params` keep the geometric description so the geometric
    control condition can be checked against declared geometry rather
    than inferred from node weights.
    """

    grid: SpaceTimeGrid
    kind: str
    params: dict = field(compare=False)
    weights: np.ndarray = field(compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != self.grid.shape:
            raise ConfigError("region weights must match the spatial grid shape")
        if w.min() < 0 or w.max() > 1:
            raise ConfigError("region weights must lie in [0, 1]")
        interior = w[tuple(slice(1, -1) for _ in range(self.grid.dim))]
        if not np.any(interior == 1.0):
            raise ConfigError("region has empty interior: no interior node with weight 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def is_sharp(self) -> bool:
        return bool(np.all((self.weights == 0.0) | (self.weights == 1.0)))


def _smooth_ramp(dist_inside, cell):
    # one-cell linear ramp: 0 at the region edge, 1 one cell inside
    return np.clip(dist_inside / cell, 0.0, 1.0)


def interval_region(grid: SpaceTimeGrid, a: float, b: float, smoothing: bool = False) -> ControlRegion:
    """omega = (a, b) on a 1D grid."""
    if grid.dim != 1:
        raise ConfigError("interval_region requires a 1D grid")
    L = grid.lengths[0]
    if not (0.0 <= a < b <= L):
        raise ConfigError(f"interval ({a}, {b}) is not a subinterval of (0, {L})")
    x = grid.axis_nodes(0)
    if smoothing:
        w = np.minimum(_smooth_ramp(x - a, grid.dx[0]), _smooth_ramp(b - x, grid.dx[0]))
    else:
        w = ((x > a) & (x < b)).astype(float)
    return ControlRegion(grid, "interval", {"a": float(a), "b": float(b)}, w)


def rectangle_region(grid: SpaceTimeGrid, x0: float, x1: float, y0: float, y1: float,
                     smoothing: bool = False) -> ControlRegion:
    """Axis-aligned sub-rectangle (x0, x1) x (y0, y1) on a 2D grid."""
    if grid.dim != 2:
        raise ConfigError("rectangle_region requires a 2D grid")
    Lx, Ly = grid.lengths
    if not (0.0 <= x0 < x1 <= Lx and 0.0 <= y0 < y1 <= Ly):
        raise ConfigError("sub-rectangle must be contained in the domain")
    X, Y = grid.meshgrid()
    if smoothing:
        wx = np.minimum(_smooth_ramp(X - x0, grid.dx[0]), _smooth_ramp(x1 - X, grid.dx[0]))
        wy = np.minimum(_smooth_ramp(Y - y0, grid.dx[1]), _smooth_ramp(y1 - Y, grid.dx[1]))
        w = np.minimum(wx, wy)
    else:
        w = ((X > x0) & (X < x1) & (Y > y0) & (Y < y1)).astype(float)
    return ControlRegion(grid, "rectangle",
                         {"x0": float(x0), "x1": float(x1), "y0": float(y0), "y1": float(y1)}, w)


def sides_region(grid: SpaceTimeGrid, sides, eps: float, smoothing: bool = False) -> ControlRegion:
    """eps-neighborhood of selected rectangle sides, intersected with Omega."""
    if grid.dim != 2:
        raise ConfigError("sides_region requires a 2D grid")
    sides = tuple(sides)
    for s in sides:
        if s not in SIDES_2D:
            raise ConfigError(f"unknown side {s!r}; expected one of {SIDES_2D}")
    if not sides:
        raise ConfigError("sides_region needs at least one side")
    if eps <= 0:
        raise ConfigError("eps must be positive")
    Lx, Ly = grid.lengths
    X, Y = grid.meshgrid()
    dist = np.full(grid.shape, np.inf)
    if "left" in sides:
        dist = np.minimum(dist, X)
    if "right" in sides:
        dist = np.minimum(dist, Lx - X)
    if "bottom" in sides:
        dist = np.minimum(dist, Y)
    if "top" in sides:
        dist = np.minimum(dist, Ly - Y)
    if smoothing:
        w = _smooth_ramp(eps - dist, min(grid.dx))
    else:
        w = (dist < eps).astype(float)
    return ControlRegion(grid, "sides", {"sides": sides, "eps": float(eps)}, w)


@dataclass(frozen=True)
class GeometryReport:
    holds: bool
    T_min: float
    gamma0: tuple      # boundary parts seen from x0, as side names
    covered: bool      # region covers a neighborhood of gamma0
    time_ok: bool


def check_geometric_condition(grid: SpaceTimeGrid, region: ControlRegion, x0,
                              T: float | None = None) -> GeometryReport:
    """Check the multiplier geometric condition for an observation point x0.

    Gamma_0 is the part of the boundary where (x - x0) . nu > 0; the
    condition holds when T > 2 max_{x in closure(Omega)} |x - x0| and the
    region covers a neighborhood of Gamma_0 inside Omega.  x0 must lie
    strictly outside the closed domain.
    """
    T = grid.T if T is None else float(T)
    if grid.dim == 1:
        (L,) = grid.lengths
        x0 = float(np.asarray(x0).reshape(()))
        if 0.0 <= x0 <= L:
            raise ConfigError("x0 must lie strictly outside the closed domain")
        gamma0 = []
        if -(0.0 - x0) > 0:      # nu(0) = -1
            gamma0.append("left")
        if (L - x0) > 0:         # nu(L) = +1
            gamma0.append("right")
        T_min = 2.0 * max(abs(0.0 - x0), abs(L - x0))
        covered = _covers_1d(region, gamma0, L)
    else:
        Lx, Ly = grid.lengths
        x0 = tuple(float(v) for v in np.asarray(x0).reshape(2))
        if 0.0 <= x0[0] <= Lx and 0.0 <= x0[1] <= Ly:
            raise ConfigError("x0 must lie strictly outside the closed domain")
        gamma0 = []
        if x0[0] > 0:
            gamma0.append("left")
        if Lx - x0[0] > 0:
            gamma0.append("right")
        if x0[1] > 0:
            gamma0.append("bottom")
        if Ly - x0[1] > 0:
            gamma0.append("top")
        corners = [(0, 0), (Lx, 0), (0, Ly), (Lx, Ly)]
        T_min = 2.0 * max(math.hypot(cx - x0[0], cy - x0[1]) for cx, cy in corners)
        covered = _covers_2d(region, gamma0, Lx, Ly)
    time_ok = T > T_min
    return GeometryReport(holds=bool(time_ok and covered), T_min=float(T_min),
                          gamma0=tuple(gamma0), covered=bool(covered), time_ok=bool(time_ok))


def _covers_1d(region, gamma0, L, tol=1e-12):
    if region.kind != "interval":
        return False
    a, b = region.params["a"], region.params["b"]
    for side in gamma0:
        if side == "left" and a > tol:
            return False
        if side == "right" and b < L - tol:
            return False
    return True


def _covers_2d(region, gamma0, Lx, Ly, tol=1e-12):
    if region.kind == "sides":
        return all(s in region.params["sides"] for s in gamma0)
    if region.kind == "rectangle":
        p = region.params
        for side in gamma0:
            spans_y = p["y0"] <= tol and p["y1"] >= Ly - tol
            spans_x = p["x0"] <= tol and p["x1"] >= Lx - tol
            if side == "left" and not (p["x0"] <= tol and spans_y):
                return False
            if side == "right" and not (p["x1"] >= Lx - tol and spans_y):
                return False
            if side == "bottom" and not (p["y0"] <= tol and spans_x):
                return False
            if side == "top" and not (p["y1"] >= Ly - tol and spans_x):
                return False
        return True
    return False
