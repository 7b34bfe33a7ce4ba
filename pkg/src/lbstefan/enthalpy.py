"""Enthalpy, temperature and liquid-fraction transfer functions (vectorised)."""

from __future__ import annotations

import numpy as np

__all__ = [
    "liquid_fraction_from_H",
    "temperature_from_H",
    "sharp_liquid_fraction",
    "enthalpy_sharp",
    "phi_delta",
    "phi_delta_prime",
    "enthalpy_regularized",
]


def _scalar(a):
    return a[()] if isinstance(a, np.ndarray) and a.ndim == 0 else a


def liquid_fraction_from_H(H, Ste):
    """0 below H=0, Ste*H on the mushy interval, 1 above H=1/Ste."""
    H = np.asarray(H, dtype=np.float64)
    return _scalar(np.clip(Ste * H, 0.0, 1.0))


def temperature_from_H(H, Ste):
    """Inverse of the sharp enthalpy: flat at 0 on the mushy plateau."""
    H = np.asarray(H, dtype=np.float64)
    out = np.where(H < 0.0, H, np.where(H > 1.0 / Ste, H - 1.0 / Ste, 0.0))
    return _scalar(out)


def sharp_liquid_fraction(theta):
    # theta == 0 counts as solid
    return _scalar(np.where(np.asarray(theta) > 0.0, 1.0, 0.0))


def enthalpy_sharp(theta, Ste):
    theta = np.asarray(theta, dtype=np.float64)
    return _scalar(theta + sharp_liquid_fraction(theta) / Ste)


def phi_delta(theta, delta):
    """Regularised liquid fraction ``(1 + tanh(theta/delta)) / 2``."""
    return _scalar(0.5 * (1.0 + np.tanh(np.asarray(theta, dtype=np.float64) / delta)))


def phi_delta_prime(theta, delta):
    """Derivative ``sech^2(theta/delta) / (2 delta)``, written with exp(-2|u|) so
    large arguments underflow to 0 instead of overflowing cosh."""
    u = np.abs(np.asarray(theta, dtype=np.float64) / delta)
    e = np.exp(-2.0 * u)
    return _scalar(2.0 * e / (delta * (1.0 + e) ** 2))


def enthalpy_regularized(theta, Ste, delta):
    return _scalar(np.asarray(theta) + phi_delta(theta, delta) / Ste)
