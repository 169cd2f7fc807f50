"""Orthonormal spherical-harmonic tables on Gauss latitude nodes.

Stores ``Pbar[l, m, j] = N_lm P_l^m(x_j)`` (Condon-Shortley phase, normalized
so that ``Y_lm = Pbar e^{im phi}`` has unit L2 norm on the sphere) together
with the theta-derivative tables needed to synthesize vector fields:
d/dtheta, d^2/dtheta^2, Pbar/sin(theta) and d/dtheta of the latter.
Negative orders follow from ``Pbar[l,-m] = (-1)^m Pbar[l,m]``.

Recurrences are the standard stable ones (diagonal then upward in degree);
fine without rescaling for the moderate degrees used here.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["AngularTables", "build_tables", "gauss_latitudes"]


@dataclass(frozen=True)
class AngularTables:
    l_max: int
    m_max: int
    x: np.ndarray          # cos(theta) nodes
    sin_t: np.ndarray
    P: np.ndarray          # (l_max+1, m_max+1, n)
    dP: np.ndarray         # d/dtheta
    d2P: np.ndarray        # d^2/dtheta^2
    Psin: np.ndarray       # P / sin(theta)   (zero for m = 0)
    dPsin: np.ndarray      # d/dtheta of Psin (zero for m = 0)


def gauss_latitudes(n_theta: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights in x = cos(theta); weights absorb sin dtheta."""
    return np.polynomial.legendre.leggauss(n_theta)


def build_tables(l_max: int, m_max: int, x: np.ndarray) -> AngularTables:
    if m_max > l_max:
        raise ValueError("azimuthal truncation cannot exceed the degree truncation")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) >= 1.0):
        raise ValueError("latitude nodes must be interior (sin(theta) > 0)")
    s = np.sqrt(1.0 - x * x)
    n = x.size
    P = np.zeros((l_max + 1, m_max + 1, n))
    dP = np.zeros_like(P)

    P[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    for m in range(1, m_max + 1):
        P[m, m] = -np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * P[m - 1, m - 1]
    for m in range(0, m_max + 1):
        if m + 1 <= l_max:
            P[m + 1, m] = np.sqrt(2.0 * m + 3.0) * x * P[m, m]
        for l in range(m + 2, l_max + 1):
            a = np.sqrt((2.0 * l - 1.0) * (2.0 * l + 1.0) / ((l - m) * (l + m)))
            b = np.sqrt(
                (2.0 * l + 1.0) * (l - 1.0 + m) * (l - 1.0 - m)
                / ((2.0 * l - 3.0) * (l - m) * (l + m))
            )
            P[l, m] = a * x * P[l - 1, m] - b * P[l - 2, m]

    for m in range(0, m_max + 1):
        for l in range(m, l_max + 1):
            if l == 0:
                continue
            c = np.sqrt((2.0 * l + 1.0) * (l * l - m * m) / (2.0 * l - 1.0))
            low = P[l - 1, m] if l - 1 >= m else 0.0
            dP[l, m] = (l * x * P[l, m] - c * low) / s

    # associated Legendre ODE gives the second derivative without new recurrences
    ll = np.arange(l_max + 1, dtype=float)[:, None, None]
    mm = np.arange(m_max + 1, dtype=float)[None, :, None]
    d2P = -(x / s) * dP - (ll * (ll + 1.0) - (mm / s) ** 2) * P

    Psin = np.zeros_like(P)
    dPsin = np.zeros_like(P)
    if m_max >= 1:
        Psin[:, 1:] = P[:, 1:] / s
        dPsin[:, 1:] = dP[:, 1:] / s - P[:, 1:] * x / s**2
    return AngularTables(l_max, m_max, x, s, P, dP, d2P, Psin, dPsin)
