"""Built-in map families used by the CLI, the scan engine and the tests."""

import numpy as np

from .dynamics import MapFamily
from .fourier import TrigSeries
from .frequency import GOLDEN


def locking_scalar(a, delta1, delta2):
    """g(x, y) = a + delta1 sin(2 pi x) + delta2 sin(2 pi y)."""
    return TrigSeries.from_modes(2, {(0, 0): a, (1, 0): delta1 / 2j, (0, 1): delta2 / 2j})


def locking_family(a=0.3, delta1=0.1, delta2=0.5, eps=0.02, alpha=1.0, omega=GOLDEN):
    """F(x, y) = (x, y) + alpha (omega, 1) + eps g(x, y) (omega, 1) on T^2."""
    return MapFamily("foliation", np.array([omega, 1.0]), alpha, eps,
                     [locking_scalar(a, delta1, delta2)])


def generic_locking_family(a=0.3, delta1=0.1, delta2=0.5, eps=0.02, alpha=1.0,
                           omega=GOLDEN, drift=0.2, drift_y=0.1):
    """Non-foliation analogue: the x-component gets an extra term
    drift + drift_y cos(2 pi y) that is not parallel to (omega, 1)."""
    g = locking_scalar(a, delta1, delta2)
    extra = TrigSeries.from_modes(2, {(0, 0): drift, (0, 1): drift_y / 2})
    fx = g * omega + extra
    return MapFamily("generic", np.array([omega, 1.0]), alpha, eps,
                     [TrigSeries.stack([fx, g])])


def locking_guard(a, delta1, delta2, omega=GOLDEN):
    """lambda = |delta2| sqrt(1 - (a/delta2)^2) and whether 2 omega |delta1| < lambda."""
    lam = abs(delta2) * np.sqrt(max(1.0 - (a / delta2) ** 2, 0.0))
    return float(lam), bool(2 * omega * abs(delta1) < lam)


def generic_toy_family(c=0.15, a=0.3, delta1=0.1, delta2=0.5, eps=0.02, alpha=1.0, omega=GOLDEN):
    """Generic-kind map with f = (cos(2 pi x) + c, a + delta1 sin(2 pi x) + delta2 sin(2 pi y))."""
    fx = TrigSeries.from_modes(2, {(0, 0): c, (1, 0): 0.5})
    return MapFamily("generic", np.array([omega, 1.0]), alpha, eps,
                     [TrigSeries.stack([fx, locking_scalar(a, delta1, delta2)])])
