"""Pressure recovery and rigid-body surface tractions.

The velocity basis is solenoidal, so pressure drops out of every weak
solve; it is reconstructed afterwards from the strong momentum balance.
Collect the non-gradient terms of the governing equation into a defect
field g (viscous Laplacian plus whatever grid terms the equation carries:
convection, frequency shifts, frame transport).  Then grad p = g fixes the
harmonic coefficients algebraically for l >= 1 through the tangential
balance p_lm(r) = r * gS_lm(r), while l = 0 integrates the radial balance
inward from the outer boundary.  The gauge constant is pinned by a zero
surface mean on |x| = r_out.

Force and torque on the sphere come out of the l = 1 coefficients alone:
integrating the traction t = q e_r - 2 D(u) e_r (normal pointing out of
the fluid, into the sphere) against a constant vector c uses
c.e_r = sum_m beta[c, m] Y_1m, and orthogonality kills every other degree.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as leg

from .discretization import CoupledField, Discretization

__all__ = ["PressureField", "recover_pressure", "surface_traction"]


@dataclass
class PressureField:
    """Scalar harmonic coefficients p_{l,m} sampled on the radial nodes."""

    d: Discretization
    modes: dict[tuple[int, int], np.ndarray]

    def copy(self) -> "PressureField":
        return PressureField(self.d, {k: v.copy() for k, v in self.modes.items()})

    def __add__(self, other: "PressureField") -> "PressureField":
        out = self.copy()
        for k, v in other.modes.items():
            out.modes[k] = out.modes.get(k, 0.0) + v
        return out

    def __mul__(self, a) -> "PressureField":
        return PressureField(self.d, {k: a * v for k, v in self.modes.items()})

    __rmul__ = __mul__

    def shift_constant(self, a) -> "PressureField":
        """Add the constant a (pure l = 0 shift, breaks the gauge on purpose)."""
        out = self.copy()
        c00 = a * np.sqrt(4.0 * np.pi)
        out.modes[(0, 0)] = out.modes.get((0, 0), 0.0) + c00
        return out

    def _series(self, l: int, m: int) -> np.ndarray:
        rad = self.d.radial
        vals = self.modes.get((l, m))
        if vals is None:
            return np.zeros(1, dtype=complex)
        k = np.arange(rad.n_quad)
        pv = leg.legvander(rad.x_q, rad.n_quad - 1)
        return (k + 0.5) * ((pv.T * rad.w_x) @ vals)

    def at_radius(self, l: int, m: int, r: float) -> complex:
        """Single coefficient p_{l,m}(r), interpolated off the nodes."""
        x = self.d.radial.x_of_r(r)
        return complex(leg.legval(x, self._series(l, m)))

    def surface_mean(self, r: float | None = None) -> complex:
        """Mean of p over the sphere |x| = r (default: the outer boundary)."""
        r = self.d.r_out if r is None else r
        return self.at_radius(0, 0, r) / np.sqrt(4.0 * np.pi)

    def sphere_values(self) -> np.ndarray:
        """p on the angular grid at r = 1, shape (n_theta, n_phi)."""
        d = self.d
        out = np.zeros((d.n_theta, d.n_phi), dtype=complex)
        for (l, m), _ in self.modes.items():
            plm = self.at_radius(l, m, 1.0)
            A = d._angular(l, m)[0]
            out += plm * A[:, None] * d.phase[m][None, :]
        return out

    def conj_symmetry_error(self) -> float:
        err = 0.0
        for (l, m), v in self.modes.items():
            w = self.modes.get((l, -m))
            if w is None:
                err = max(err, float(np.max(np.abs(v))))
                continue
            err = max(err, float(np.max(np.abs(v - (-1.0) ** m * np.conj(w)))))
        return err

    def conjugate(self) -> "PressureField":
        """Coefficients of the complex-conjugate scalar field."""
        modes = {
            (l, m): (-1.0) ** m * np.conj(self.modes[(l, -m)])
            for (l, m) in self.modes
            if (l, -m) in self.modes
        }
        return PressureField(self.d, modes)


def recover_pressure(
    f: CoupledField,
    d: Discretization,
    *,
    grid_defect: np.ndarray | None = None,
    lap_coef: float | complex = 1.0,
) -> PressureField:
    """Pressure with grad p = lap_coef * Laplacian(f) + grid_defect.

    The Laplacian of f is exact per mode (profile tables); grid_defect is any
    Cartesian field on d's grid and is analyzed into harmonics, so its content
    beyond the resolved band is dropped.  l = 0 exists only through the grid
    term and is integrated radially with gauge p_00(r_out) = 0.
    """
    coeffs = d.angular_coefficients(grid_defect) if grid_defect is not None else {}
    r = d.radial.r_q
    modes: dict[tuple[int, int], np.ndarray] = {}
    for m in d.m_list:
        for l in range(abs(m), d.l_max + 1):
            if l == 0:
                gr = coeffs[(0, 0)][0] if coeffs else np.zeros(d.n_q, dtype=complex)
                modes[(0, 0)] = -d.radial.integral_to_outer(gr)
                continue
            gS = np.zeros(d.n_q, dtype=complex)
            if lap_coef != 0.0:
                prof = l == 1 and m in d.beta
                Cs = f.data[d.blocks[(l, m)]]
                if prof:
                    Cs = np.concatenate(
                        [Cs, d._lift_amplitudes(m, f.data[:, None])[:, 0]]
                    )
                gS += lap_coef * (d.lap_slice_factors(l, prof)["S"] @ Cs)
            if coeffs:
                gS += coeffs[(l, m)][1]
            modes[(l, m)] = r * gS
    return PressureField(d, modes)


def viscous_traction(
    f: CoupledField, d: Discretization
) -> tuple[np.ndarray, np.ndarray]:
    """Force and torque of the deviatoric stress 2 D(u) n on the sphere.

    The pressure contribution is omitted; since x cross n vanishes at
    |x| = 1 the torque returned here is already the total one.  Complex
    arrays, no realification — callers combine this into larger complex
    systems.
    """
    if d.n_r < 4:
        raise ValueError("radial resolution too coarse for surface derivatives")
    F = np.zeros(3, dtype=complex)
    G = np.zeros(3, dtype=complex)
    fac = d._surface_slice_factors(1, True)
    for m in d.beta:
        Cs = np.concatenate(
            [f.data[d.blocks[(1, m)]], d._lift_amplitudes(m, f.data[:, None])[:, 0]]
        )
        Pr, dPr = fac["Pr"] @ Cs, fac["dPr"] @ Cs
        S, dS = fac["S"] @ Cs, fac["dS"] @ Cs
        T, dT = fac["T"] @ Cs, fac["dT"] @ Cs
        bc = np.conj(d.beta[m])
        F += bc * (-4.0 * (Pr + dPr) + 2.0 * (S - dS))
        G += 2.0 * bc * (T - dT)
    return F, G


def surface_traction(
    f: CoupledField, p: PressureField, d: Discretization
) -> tuple[np.ndarray, np.ndarray]:
    """Net force and torque of the Cauchy stress on the sphere surface.

    F = oint T(u, p) n dS and G = oint x cross T(u, p) n dS at |x| = 1 with n
    out of the fluid.  Evaluated by orthogonality: for each m the l = 1
    radial factors at r = 1 give the force through q - 4 (Pr + dPr) + 2 (S -
    dS) and the torque through 2 (T - dT); no other degree survives the
    integral.  Real arrays are returned for conjugate-symmetric input.
    """
    F, G = viscous_traction(f, d)
    for m in d.beta:
        F += np.conj(d.beta[m]) * p.at_radius(1, m, 1.0)
    scale = max(1.0, float(np.max(np.abs(f.data))))
    if f.conj_symmetry_error() < 1e-10 * scale and p.conj_symmetry_error() < 1e-10 * (
        1.0 + max((float(np.max(np.abs(v))) for v in p.modes.values()), default=0.0)
    ):
        return F.real.copy(), G.real.copy()
    return F, G
