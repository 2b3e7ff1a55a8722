"""Named analytic data profiles for initial and target states.

Profiles keep experiment configurations human-writable and
resolution-independent: the same description samples onto any grid.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .fields import StatePair
from .grids import SpaceTimeGrid


def sample_profile(grid: SpaceTimeGrid, spec: dict) -> np.ndarray:
    """Sample one scalar profile onto the spatial grid.

    zero                   {}
    eigenmode              k (int, 1D) or [kx, ky]; amplitude
    bump                   center (float or [x, y]); width; amplitude
    """
    spec = dict(spec)
    name = spec.pop("profile", None)
    if name == "zero" or name is None:
        _reject_extras(name or "zero", spec)
        return np.zeros(grid.shape)
    if name == "eigenmode":
        amplitude = float(spec.pop("amplitude", 1.0))
        k = spec.pop("k", 1)
        _reject_extras(name, spec)
        ks = np.atleast_1d(np.asarray(k, dtype=float))
        if ks.size != grid.dim:
            raise ConfigError(f"eigenmode k must have {grid.dim} component(s)")
        out = np.ones(grid.shape) * amplitude
        coords = grid.meshgrid()
        for axis in range(grid.dim):
            out = out * np.sin(ks[axis] * np.pi * coords[axis] / grid.lengths[axis])
        return out
    if name == "bump":
        amplitude = float(spec.pop("amplitude", 1.0))
        width = float(spec.pop("width", 0.2))
        center = np.atleast_1d(np.asarray(spec.pop("center", [L / 2 for L in grid.lengths]),
                                          dtype=float))
        _reject_extras(name, spec)
        if center.size != grid.dim or width <= 0:
            raise ConfigError("bump needs a center per axis and a positive width")
        coords = grid.meshgrid()
        rho2 = np.zeros(grid.shape)
        for axis in range(grid.dim):
            rho2 = rho2 + ((coords[axis] - center[axis]) / width) ** 2
        out = np.zeros(grid.shape)
        inside = rho2 < 1.0
        out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - rho2[inside]))
        return out
    raise ConfigError(f"unknown profile {name!r}")


def _reject_extras(name, spec):
    if spec:
        raise ConfigError(f"unexpected keys for profile {name!r}: {sorted(spec)}")


def build_state(grid: SpaceTimeGrid, spec: dict) -> StatePair:
    """Build a StatePair from {"position": {...}, "velocity": {...}}."""
    spec = dict(spec)
    pos = sample_profile(grid, spec.pop("position", {"profile": "zero"}))
    vel = sample_profile(grid, spec.pop("velocity", {"profile": "zero"}))
    if spec:
        raise ConfigError(f"unexpected keys in state description: {sorted(spec)}")
    return StatePair(grid, pos, vel)
