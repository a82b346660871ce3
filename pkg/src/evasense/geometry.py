"""Planar sensing geometry.

Every access point (AP) carries a local coordinate frame: its uniform
linear array lies along the local x axis and broadside points along
local +y. ``kappa`` is the rotation from the local frame to the global
frame, so a global point ``p`` maps into the local frame through the
inverse rotation applied to ``p - position``.

The candidate maps translate a hypothesized target position into the
observables a monostatic AP sees, round-trip delay and the virtual
angle (cosine of the local azimuth). Their Jacobians feed the bound
computations in :mod:`evasense.crlb`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ZeroRange

SPEED_OF_LIGHT = 299_792_458.0  # m/s

# below this separation (meters) a point is treated as sitting on the AP
MIN_RANGE = 1e-9


def wrap_angle(theta: float) -> float:
    """Normalize an angle in radians to the interval (-pi, pi]."""
    r = math.remainder(theta, 2.0 * math.pi)
    if r <= -math.pi:
        r += 2.0 * math.pi
    return r


def rotation_matrix(kappa: float) -> np.ndarray:
    """Global-to-local frame rotation [[cos, sin], [-sin, cos]].

    Rows are the local axes expressed in global coordinates: an AP with
    orientation kappa has its array along (cos kappa, sin kappa) and its
    broadside along (-sin kappa, cos kappa). The local-to-global map is
    the transpose (equivalently the inverse).
    """
    c = math.cos(kappa)
    s = math.sin(kappa)
    return np.array([[c, s], [-s, c]])


@dataclass(frozen=True)
class ApGeometry:
    """A monostatic sensing AP.

    Parameters
    ----------
    position : array_like
        Global coordinates in meters, shape (2,).
    kappa : float
        Array orientation, radians. Stored wrapped to (-pi, pi].
    antenna_count : int
        Number of ULA elements, >= 1.
    antenna_spacing : float
        Element spacing in meters, > 0.
    """

    position: np.ndarray
    kappa: float
    antenna_count: int
    antenna_spacing: float

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        if pos.shape != (2,):
            raise ValueError(f"AP position must have shape (2,), got {pos.shape}")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "kappa", wrap_angle(float(self.kappa)))
        if self.antenna_count < 1:
            raise ValueError("antenna_count must be at least 1")
        if not self.antenna_spacing > 0:
            raise ValueError("antenna_spacing must be positive")


@dataclass(frozen=True)
class TargetTruth:
    """Ground-truth target state used by the simulator and for scoring."""

    position: np.ndarray  # (2,) m
    velocity: np.ndarray  # (2,) m/s
    rcs: float            # m^2

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        vel = np.asarray(self.velocity, dtype=float)
        if pos.shape != (2,) or vel.shape != (2,):
            raise ValueError("position and velocity must have shape (2,)")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "velocity", vel)
        if not self.rcs > 0:
            raise ValueError("rcs must be positive")


def _rel_and_range(points, ap: ApGeometry):
    rel = np.asarray(points, dtype=float) - ap.position
    rng = np.linalg.norm(rel, axis=-1)
    if np.any(rng < MIN_RANGE):
        raise ZeroRange(f"point coincides with AP at {ap.position}")
    return rel, rng


def to_local(points, ap: ApGeometry) -> np.ndarray:
    """Map global points, shape (..., 2), into the AP's local frame."""
    rel = np.asarray(points, dtype=float) - ap.position
    # local = T(kappa) @ rel for each point; batched as rel @ T^T
    return rel @ rotation_matrix(ap.kappa).T


def candidate_delay(points, ap: ApGeometry):
    """Round-trip delay 2 * range / c in seconds for hypothesized positions."""
    _, rng = _rel_and_range(points, ap)
    return 2.0 * rng / SPEED_OF_LIGHT


def local_unit_direction(points, ap: ApGeometry) -> np.ndarray:
    """Unit vector from the AP toward the point, in the AP's local frame."""
    loc = to_local(points, ap)
    rng = np.linalg.norm(loc, axis=-1)
    if np.any(rng < MIN_RANGE):
        raise ZeroRange(f"point coincides with AP at {ap.position}")
    return loc / rng[..., None]


def candidate_virtual_angle(points, ap: ApGeometry):
    """Virtual angle, the first component of the local unit direction.

    Equals cos(theta) with theta the azimuth measured from the array
    axis; always in [-1, 1].
    """
    return local_unit_direction(points, ap)[..., 0]


def global_virtual_angle(points, ap: ApGeometry):
    """(x - x_ap) / range, the orientation-free part of the virtual angle."""
    rel, rng = _rel_and_range(points, ap)
    return rel[..., 0] / rng


def delay_jacobian(points, ap: ApGeometry) -> np.ndarray:
    """d(delay)/d(position): 2 * (p - p_ap) / (c * range), shape (..., 2)."""
    rel, rng = _rel_and_range(points, ap)
    return 2.0 * rel / (SPEED_OF_LIGHT * rng[..., None])


def _angle_grad_of_rel(rel: np.ndarray, rng: np.ndarray, form: str) -> np.ndarray:
    dx = rel[..., 0]
    dy = rel[..., 1]
    r3 = rng**3
    if form == "printed":
        gx = dy**2 / r3
    elif form == "analytic":
        gx = 1.0 / rng - dx**2 / r3
    else:
        raise ValueError(f"unknown angle-gradient form {form!r}")
    return np.stack([gx, -dx * dy / r3], axis=-1)


def angle_jacobian(points, ap: ApGeometry, form: str = "analytic") -> np.ndarray:
    """Gradient of the global virtual angle w.r.t. position, shape (..., 2).

    ``form`` selects between the closed-form pair ((y-y_ap)^2/r^3,
    -(x-x_ap)(y-y_ap)/r^3) and the analytic gradient of (x-x_ap)/r;
    the two are algebraically identical since r^2 - dx^2 = dy^2, so the
    flag only changes rounding at the last digit.
    """
    rel, rng = _rel_and_range(points, ap)
    return _angle_grad_of_rel(rel, rng, form)


def local_angle_jacobian(points, ap: ApGeometry, form: str = "analytic") -> np.ndarray:
    """Gradient of the local (measured) virtual angle w.r.t. global position.

    The array senses the angle in its own rotated frame, so the global
    gradient is the frame gradient pulled back through the rotation:
    T(kappa)^T @ grad evaluated on local coordinates. Reduces to
    :func:`angle_jacobian` when kappa = 0.
    """
    rel, rng = _rel_and_range(points, ap)
    t = rotation_matrix(ap.kappa)
    loc = rel @ t.T
    return _angle_grad_of_rel(loc, rng, form) @ t
