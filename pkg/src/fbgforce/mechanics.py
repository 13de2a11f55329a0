"""Cantilever mechanics of one forceps prong and the planar force map.

The prong is a bent cantilever: sensors 1-2 read the planar force in the
first local frame (F_x1, F_y1), sensors 3-4 in the second (F_x2, F_y2).
The bend couples the instrument-frame axial force F_z into the second
frame's y component, which is what makes F_z observable from the
difference of the two y readings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .frames import ForceTrajectory

# 1/sin(alpha) = 4.1 with k_n*cos(alpha) = 1 reproduces the lumped
# z-estimator constant; alpha ~ 14.1 degrees.
DEFAULT_ALPHA_RAD = math.asin(1.0 / 4.1)
DEFAULT_K_N = 1.0 / math.cos(DEFAULT_ALPHA_RAD)


@dataclass(frozen=True)
class ProngModel:
    """Elastic and geometric constants of one prong."""

    youngs_modulus_pa: float = 1.048e9  # titanium alloy per the FEM material card
    poisson_ratio: float = 0.31
    length_m: float = 0.010
    inertia_m4: float = 1e-14
    cross_section_m2: float = 1e-7
    alpha_rad: float = DEFAULT_ALPHA_RAD
    k_n: float = DEFAULT_K_N

    def __post_init__(self):
        if self.youngs_modulus_pa <= 0:
            raise ValidationError("youngs_modulus_pa must be positive")
        if not 0 < self.poisson_ratio < 0.5:
            raise ValidationError("poisson_ratio must be in (0, 0.5)")
        if self.length_m <= 0 or self.inertia_m4 <= 0 or self.cross_section_m2 <= 0:
            raise ValidationError("length, inertia and cross-section must be positive")
        if not 0 < self.alpha_rad < math.pi:
            raise ValidationError("alpha_rad must be in (0, pi)")
        if self.k_n <= 0:
            raise ValidationError("k_n must be positive")


def beam_deflection(force_n, model: ProngModel):
    """Tip deflection of the prong under a transverse load, metres."""
    force = np.asarray(force_n, dtype=np.float64)
    if not np.all(np.isfinite(force)):
        raise ValidationError("force contains non-finite values")
    out = -force * model.length_m ** 3 / (3.0 * model.youngs_modulus_pa * model.inertia_m4)
    return out if out.ndim else float(out)


def axial_strain(force_z_n, model: ProngModel):
    """Strain of the prong in pure compression/tension along its axis."""
    force = np.asarray(force_z_n, dtype=np.float64)
    if not np.all(np.isfinite(force)):
        raise ValidationError("force contains non-finite values")
    out = force / (model.youngs_modulus_pa * model.cross_section_m2)
    return out if out.ndim else float(out)


def planar_forces(fx, fy, fz, k_n: float, alpha_rad: float):
    """Map instrument-frame forces to the two sensing frames.

    F_x1 = F_x2 = F_x, F_y1 = F_y, and the bend folds F_z into the second
    frame: F_y2 = k_n*F_y*cos(alpha) + F_z*sin(alpha). This is the exact
    algebraic inverse of the z estimator
    F_z = (F_y2 - k_n*F_y1*cos(alpha)) / sin(alpha).
    """
    fx = np.asarray(fx, dtype=np.float64)
    fy = np.asarray(fy, dtype=np.float64)
    fz = np.asarray(fz, dtype=np.float64)
    fy2 = k_n * fy * math.cos(alpha_rad) + fz * math.sin(alpha_rad)
    return fx.copy(), fy.copy(), fx.copy(), fy2


def planar_forces_from_trajectory(traj: ForceTrajectory, model: ProngModel):
    """Per-sample (F_x1, F_y1, F_x2, F_y2) for a trajectory, newtons."""
    return planar_forces(traj.fx, traj.fy, traj.fz, model.k_n, model.alpha_rad)
