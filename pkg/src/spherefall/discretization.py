"""Coupled solenoidal discretization of fluid + rigid-sphere velocity fields.

A velocity field on the truncated shell is stored as poloidal/toroidal
radial coefficients per spherical-harmonic mode (polar axis along e1, the
direction of gravity) plus the rigid translation chi and rotation sigma of
the sphere.  The representation is exactly divergence free, satisfies
u = chi + sigma x x on the unit sphere and u = 0 on the outer boundary by
construction: boundary conditions live in the basis (clamped poloidal /
Dirichlet toroidal radial modes, rigid motions entering through smooth
degree-one lift fields clamped at the outer wall).

Grid pipelines: ``synth`` (coefficients -> Cartesian velocity on the
quadrature grid) and ``synth_grad`` (-> all nine Cartesian derivatives) with
the exact adjoint ``dual`` (grid field -> Galerkin dual vector), so that
every nonlinear term is assembled as adjoint(weights * pointwise products)
and the discrete energy identities inherit quadrature accuracy.

Complex coefficients throughout; a real vector packing (m = 0 real parts,
m > 0 split into real/imaginary) is provided for real solves.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dfield

import numpy as np

from .radial import RadialGrid, cutoff_profile
from .sphharm import build_tables, gauss_latitudes

__all__ = ["Discretization", "CoupledField"]


@dataclass
class CoupledField:
    """Coefficient vector of one coupled field (fluid modes + chi + sigma)."""

    d: "Discretization"
    data: np.ndarray
    parity: str | None = None  # optional tag: 'even'/'odd' under x3 -> -x3

    @property
    def chi(self) -> np.ndarray:
        return self.data[self.d.chi_slice]

    @chi.setter
    def chi(self, val):
        self.data[self.d.chi_slice] = val

    @property
    def sigma(self) -> np.ndarray:
        return self.data[self.d.sigma_slice]

    @sigma.setter
    def sigma(self, val):
        self.data[self.d.sigma_slice] = val

    def coeffs(self, l: int, m: int, family: str) -> np.ndarray:
        return self.data[self.d.mode_slice(l, m, family)]

    def copy(self) -> "CoupledField":
        return CoupledField(self.d, self.data.copy(), self.parity)

    def conj_symmetry_error(self) -> float:
        """How far the coefficients are from representing a real field."""
        err = np.max(np.abs(self.chi.imag)) if self.d.m_max >= 0 else 0.0
        err = max(err, np.max(np.abs(self.sigma.imag)))
        for (l, m), sl in self.d.blocks.items():
            if m < 0:
                continue
            cm = self.data[sl]
            if m == 0:
                err = max(err, np.max(np.abs(cm.imag), initial=0.0))
            else:
                cneg = self.data[self.d.blocks[(l, -m)]]
                err = max(err, np.max(np.abs(cneg - (-1) ** m * np.conj(cm))))
        return err

    def conjugate(self) -> "CoupledField":
        """Coefficients of the complex-conjugate field.

        Conjugating the synthesized field swaps the +m and -m blocks with a
        (-1)^m factor and conjugates the rigid parts.
        """
        out = np.empty_like(self.data)
        for (l, m), sl in self.d.blocks.items():
            out[sl] = (-1) ** m * np.conj(self.data[self.d.blocks[(l, -m)]])
        v = CoupledField(self.d, out, self.parity)
        v.chi = np.conj(self.chi)
        v.sigma = np.conj(self.sigma)
        return v

    def __add__(self, other):
        return CoupledField(self.d, self.data + other.data)

    def __sub__(self, other):
        return CoupledField(self.d, self.data - other.data)

    def __mul__(self, a):
        return CoupledField(self.d, self.data * a)

    __rmul__ = __mul__

    def __neg__(self):
        return CoupledField(self.d, -self.data)


class Discretization:
    """Grids, tables, index maps and transform pipelines."""

    def __init__(
        self,
        l_max: int,
        m_max: int,
        n_r: int,
        r_out: float,
        *,
        n_theta: int | None = None,
        n_phi: int | None = None,
        n_quad: int | None = None,
    ):
        if l_max < 1:
            raise ValueError("need at least harmonic degree one for rigid coupling")
        if not 0 <= m_max <= l_max:
            raise ValueError("m_max must lie in [0, l_max]")
        self.l_max = int(l_max)
        self.m_max = int(m_max)
        self.n_r = int(n_r)
        self.r_out = float(r_out)

        self.radial = RadialGrid(self.n_r, self.r_out, n_quad)
        self.n_q = self.radial.n_quad

        self.n_theta = int(n_theta) if n_theta else (3 * self.l_max + 5) // 2 + 3
        self.x_t, self.w_t = gauss_latitudes(self.n_theta)
        self.sin_t = np.sqrt(1.0 - self.x_t**2)
        self.ang = build_tables(self.l_max, self.m_max, self.x_t)

        if n_phi is not None:
            self.n_phi = int(n_phi)
        else:
            self.n_phi = 1 if self.m_max == 0 else 2 * ((3 * self.m_max + 3) // 2)
        if self.n_phi < max(1, 2 * self.m_max + 1):
            raise ValueError("azimuthal grid cannot resolve the requested orders")
        self.phi = 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi
        self.w_phi = 2.0 * np.pi / self.n_phi

        # index maps ------------------------------------------------------
        self.m_list = list(range(-self.m_max, self.m_max + 1))
        self.blocks: dict[tuple[int, int], slice] = {}
        self.m_slices: dict[int, slice] = {}
        pos = 0
        for m in self.m_list:
            start_m = pos
            for l in range(max(1, abs(m)), self.l_max + 1):
                self.blocks[(l, m)] = slice(pos, pos + 2 * self.n_r)
                pos += 2 * self.n_r
            self.m_slices[m] = slice(start_m, pos)
        self.n_fluid = pos
        self.chi_slice = slice(pos, pos + 3)
        self.sigma_slice = slice(pos + 3, pos + 6)
        self.n_complex = pos + 6

        n0 = self.m_slices[0].stop - self.m_slices[0].start
        self.n_real = n0 + 2 * sum(
            self.m_slices[m].stop - self.m_slices[m].start
            for m in self.m_list
            if m > 0
        ) + 6

        # rigid lift amplitude factors per azimuthal order:
        # e_d . e_r = sum_m beta[d, m] Y_{1m}
        c0 = np.sqrt(4.0 * np.pi / 3.0)
        c1 = np.sqrt(2.0 * np.pi / 3.0)
        self.beta = {0: np.array([c0, 0.0, 0.0], dtype=complex)}
        if self.m_max >= 1:
            self.beta[1] = np.array([0.0, -c1, 1j * c1])
            self.beta[-1] = np.array([0.0, c1, 1j * c1])

        # geometry tables ---------------------------------------------------
        cp, sp = np.cos(self.phi), np.sin(self.phi)
        x, s = self.x_t, self.sin_t
        R = np.zeros((3, 3, self.n_theta, self.n_phi))
        R[0, 0] = x[:, None]
        R[0, 1] = -s[:, None]
        R[1, 0] = s[:, None] * cp[None, :]
        R[1, 1] = x[:, None] * cp[None, :]
        R[1, 2] = -sp[None, :]
        R[2, 0] = s[:, None] * sp[None, :]
        R[2, 1] = x[:, None] * sp[None, :]
        R[2, 2] = cp[None, :]
        self.rot = R

        self.phase = {m: np.exp(1j * m * self.phi) for m in self.m_list}
        r = self.radial.r_q
        self.w_slice = (self.radial.w_r * r**2)[:, None] * self.w_t[None, :] * 2 * np.pi
        self.w_vol = (self.radial.w_r * r**2)[:, None, None] * (
            self.w_t[:, None] * np.full(self.n_phi, self.w_phi)[None, :]
        )[None, :, :]

        self.lift_phi = cutoff_profile(r, self.r_out)

        self._cache: dict = {}

    # -- fields ---------------------------------------------------------------

    def zero_field(self) -> CoupledField:
        return CoupledField(self, np.zeros(self.n_complex, dtype=complex))

    def field_from(self, data: np.ndarray) -> CoupledField:
        data = np.asarray(data, dtype=complex)
        if data.shape != (self.n_complex,):
            raise ValueError("coefficient vector has the wrong length")
        return CoupledField(self, data)

    def mode_slice(self, l: int, m: int, family: str) -> slice:
        base = self.blocks[(l, m)]
        if family == "pol":
            return slice(base.start, base.start + self.n_r)
        if family == "tor":
            return slice(base.start + self.n_r, base.stop)
        raise ValueError(family)

    # -- per-mode radial factor stacks -----------------------------------------

    def _angular(self, l: int, m: int):
        am = abs(m)
        sgn = (-1.0) ** am if m < 0 else 1.0
        t = self.ang
        return (
            sgn * t.P[l, am],
            sgn * t.dP[l, am],
            sgn * t.d2P[l, am],
            sgn * t.Psin[l, am],
            sgn * t.dPsin[l, am],
        )

    def slice_radials(self, l: int, profiles: bool = False) -> dict[str, np.ndarray]:
        """Radial factors for all columns of a degree-l slice.

        Columns: n_r poloidal, n_r toroidal, then (if ``profiles`` and l == 1)
        one poloidal and one toroidal rigid-lift profile column.
        """
        key = ("slice_radials", l, profiles)
        if key in self._cache:
            return self._cache[key]
        rad = self.radial
        r = rad.r_q[:, None]
        v = rad.tables
        nc = 2 * self.n_r + (2 if (profiles and l == 1) else 0)
        Z = np.zeros((self.n_q, nc))
        out = {k: Z.copy() for k in ("Pr", "dPr", "S", "dS", "T", "dT")}
        p = slice(0, self.n_r)
        t = slice(self.n_r, 2 * self.n_r)
        V0, V1, V2 = v["pol"][0], v["pol"][1], v["pol"][2]
        out["Pr"][:, p] = V0 / r
        out["dPr"][:, p] = V1 / r - V0 / r**2
        out["S"][:, p] = V1 + V0 / r
        out["dS"][:, p] = V2 + V1 / r - V0 / r**2
        out["T"][:, t] = v["tor"][0]
        out["dT"][:, t] = v["tor"][1]
        if profiles and l == 1:
            phi0, dphi, d2phi, _ = self.lift_phi
            rq = rad.r_q
            out["Pr"][:, -2] = phi0 / 2.0
            out["dPr"][:, -2] = dphi / 2.0
            out["S"][:, -2] = phi0 + rq * dphi / 2.0
            out["dS"][:, -2] = 1.5 * dphi + rq * d2phi / 2.0
            out["T"][:, -1] = rq * phi0
            out["dT"][:, -1] = phi0 + rq * dphi
        self._cache[key] = out
        return out

    def lap_slice_factors(self, l: int, profiles: bool = False) -> dict[str, np.ndarray]:
        """Radial factors of the vector Laplacian of the slice columns.

        The Mie classes are closed under the Laplacian: a poloidal profile P
        maps to D_l P = P'' + 2P'/r - l(l+1)P/r^2, toroidal likewise.  Keys
        follow slice_radials ("Pr" = radial factor over l(l+1), "S", "T").
        """
        key = ("lap_slice", l, profiles)
        if key in self._cache:
            return self._cache[key]
        rad = self.radial
        r = rad.r_q[:, None]
        ll = l * (l + 1.0)
        nc = 2 * self.n_r + (2 if (profiles and l == 1) else 0)
        Z = np.zeros((self.n_q, nc))
        out = {k: Z.copy() for k in ("Pr", "S", "T")}
        p = slice(0, self.n_r)
        t = slice(self.n_r, 2 * self.n_r)
        V = rad.tables["pol"]
        W = rad.tables["tor"]
        DP = V[2] + 2.0 * V[1] / r - ll * V[0] / r**2
        dDP = V[3] + 2.0 * V[2] / r - 2.0 * V[1] / r**2 - ll * (V[1] / r**2 - 2.0 * V[0] / r**3)
        out["Pr"][:, p] = DP / r
        out["S"][:, p] = dDP + DP / r
        out["T"][:, t] = W[2] + 2.0 * W[1] / r - ll * W[0] / r**2
        if profiles and l == 1:
            rq = rad.r_q
            phi0, dphi, d2phi, d3phi = self.lift_phi
            P = [
                0.5 * rq * phi0,
                0.5 * (phi0 + rq * dphi),
                0.5 * (2.0 * dphi + rq * d2phi),
                0.5 * (3.0 * d2phi + rq * d3phi),
            ]
            DPl = P[2] + 2.0 * P[1] / rq - 2.0 * P[0] / rq**2
            dDPl = P[3] + 2.0 * P[2] / rq - 2.0 * P[1] / rq**2 - 2.0 * (
                P[1] / rq**2 - 2.0 * P[0] / rq**3
            )
            out["Pr"][:, -2] = DPl / rq
            out["S"][:, -2] = dDPl + DPl / rq
            T = [rq * phi0, phi0 + rq * dphi, 2.0 * dphi + rq * d2phi]
            out["T"][:, -1] = T[2] + 2.0 * T[1] / rq - 2.0 * T[0] / rq**2
        self._cache[key] = out
        return out

    def slice_values(self, l: int, m: int, profiles: bool = False, derivs: bool = False):
        """Frame velocity components of all slice columns on the (r, theta) grid.

        Returns U of shape (3, n_q, n_theta, ncols); with ``derivs`` also
        dU/dr and dU/dtheta of the same shape.
        """
        A, dA, d2A, As, dAs = self._angular(l, m)
        f = self.slice_radials(l, profiles)
        ll = l * (l + 1.0)
        im = 1j * m

        def fields(Pr, S, T, ang0, ang1, angs):
            u = np.empty((3, self.n_q, self.n_theta, Pr.shape[1]), dtype=complex)
            u[0] = ll * Pr[:, None, :] * ang0[None, :, None]
            u[1] = S[:, None, :] * ang1[None, :, None] + im * T[:, None, :] * angs[None, :, None]
            u[2] = im * S[:, None, :] * angs[None, :, None] - T[:, None, :] * ang1[None, :, None]
            return u

        U = fields(f["Pr"], f["S"], f["T"], A, dA, As)
        if not derivs:
            return U
        dUr = fields(f["dPr"], f["dS"], f["dT"], A, dA, As)
        dUt = fields(f["Pr"], f["S"], f["T"], dA, d2A, dAs)
        return U, dUr, dUt

    def slice_gradients(self, l: int, m: int, profiles: bool = False) -> np.ndarray:
        """Frame velocity-gradient tensor L[a, b] = (e_a . grad)(u) . e_b."""
        U, dUr, dUt = self.slice_values(l, m, profiles, derivs=True)
        r = self.radial.r_q[None, :, None, None]
        s = self.sin_t[None, None, :, None]
        x = self.x_t[None, None, :, None]
        im = 1j * m
        L = np.empty((3, 3) + U.shape[1:], dtype=complex)
        L[0] = dUr
        L[1, 0] = (dUt[0] - U[1]) / r
        L[1, 1] = (dUt[1] + U[0]) / r
        L[1, 2] = dUt[2] / r
        L[2, 0] = (im * U[0] / s - U[2]) / r
        L[2, 1] = (im * U[1] - x * U[2]) / (r * s)
        L[2, 2] = (im * U[2] / s + U[0] + x * U[1] / s) / r
        return L

    # -- rigid lift amplitudes ---------------------------------------------------

    def _lift_amplitudes(self, m: int, C: np.ndarray) -> np.ndarray:
        """Profile-column amplitudes (2, nbatch) for azimuthal order m."""
        chi = C[self.chi_slice]
        sig = C[self.sigma_slice]
        b = self.beta[m]
        return np.stack([b @ chi, b @ sig])

    # -- synthesis pipelines -----------------------------------------------------

    def _with_batch(self, C: np.ndarray) -> tuple[np.ndarray, bool]:
        C = np.asarray(C, dtype=complex)
        if C.ndim == 1:
            return C[:, None], True
        return C, False

    def synth(self, C: np.ndarray) -> np.ndarray:
        """Cartesian velocity on the grid: (3, n_q, n_theta, n_phi[, batch])."""
        C, squeeze = self._with_batch(C)
        nb = C.shape[1]
        out = np.zeros((3, self.n_q, self.n_theta, self.n_phi, nb), dtype=complex)
        for m in self.m_list:
            acc = np.zeros((3, self.n_q, self.n_theta, nb), dtype=complex)
            for l in range(max(1, abs(m)), self.l_max + 1):
                prof = l == 1 and m in self.beta
                U = self.slice_values(l, m, profiles=prof)
                Cs = C[self.blocks[(l, m)]]
                if prof:
                    Cs = np.concatenate([Cs, self._lift_amplitudes(m, C)])
                acc += np.einsum("aqtc,cb->aqtb", U, Cs, optimize=True)
            out += acc[:, :, :, None, :] * self.phase[m][None, None, None, :, None]
        res = np.einsum("ijtp,jqtpb->iqtpb", self.rot, out, optimize=True)
        return res[..., 0] if squeeze else res

    def synth_grad(self, C: np.ndarray) -> np.ndarray:
        """Cartesian gradient du_j/dx_i on the grid: (3, 3, n_q, n_theta, n_phi[, b])."""
        C, squeeze = self._with_batch(C)
        nb = C.shape[1]
        out = np.zeros((3, 3, self.n_q, self.n_theta, self.n_phi, nb), dtype=complex)
        for m in self.m_list:
            acc = np.zeros((3, 3, self.n_q, self.n_theta, nb), dtype=complex)
            for l in range(max(1, abs(m)), self.l_max + 1):
                prof = l == 1 and m in self.beta
                L = self.slice_gradients(l, m, profiles=prof)
                Cs = C[self.blocks[(l, m)]]
                if prof:
                    Cs = np.concatenate([Cs, self._lift_amplitudes(m, C)])
                acc += np.einsum("xyqtc,cb->xyqtb", L, Cs, optimize=True)
            out += acc[:, :, :, :, None, :] * self.phase[m][None, None, None, None, :, None]
        res = np.einsum("iatp,jbtp,abqtpn->ijqtpn", self.rot, self.rot, out, optimize=True)
        return res[..., 0] if squeeze else res

    def synth_lap(self, C: np.ndarray) -> np.ndarray:
        """Cartesian vector Laplacian on the grid: (3, n_q, n_theta, n_phi[, b]).

        Exact in the basis span: the Mie classes are closed under the
        Laplacian, so this evaluates lap_slice_factors rather than
        differencing synth.
        """
        C, squeeze = self._with_batch(C)
        nb = C.shape[1]
        out = np.zeros((3, self.n_q, self.n_theta, self.n_phi, nb), dtype=complex)
        for m in self.m_list:
            acc = np.zeros((3, self.n_q, self.n_theta, nb), dtype=complex)
            im = 1j * m
            for l in range(max(1, abs(m)), self.l_max + 1):
                prof = l == 1 and m in self.beta
                A, dA, _, As, _ = self._angular(l, m)
                g = self.lap_slice_factors(l, prof)
                ll = l * (l + 1.0)
                U = np.empty((3, self.n_q, self.n_theta, g["Pr"].shape[1]), dtype=complex)
                U[0] = ll * g["Pr"][:, None, :] * A[None, :, None]
                U[1] = g["S"][:, None, :] * dA[None, :, None] + im * g["T"][:, None, :] * As[None, :, None]
                U[2] = im * g["S"][:, None, :] * As[None, :, None] - g["T"][:, None, :] * dA[None, :, None]
                Cs = C[self.blocks[(l, m)]]
                if prof:
                    Cs = np.concatenate([Cs, self._lift_amplitudes(m, C)])
                acc += np.einsum("aqtc,cb->aqtb", U, Cs, optimize=True)
            out += acc[:, :, :, None, :] * self.phase[m][None, None, None, :, None]
        res = np.einsum("ijtp,jqtpb->iqtpb", self.rot, out, optimize=True)
        return res[..., 0] if squeeze else res

    def dual(self, Y: np.ndarray) -> np.ndarray:
        """Adjoint of synth: dual[g] = integral Y . conj(basis_g) dV.

        Y has shape (3, n_q, n_theta, n_phi[, batch]); the quadrature weights
        are applied here.
        """
        squeeze = Y.ndim == 4
        if squeeze:
            Y = Y[..., None]
        nb = Y.shape[-1]
        F = np.einsum("iatp,iqtpb->aqtpb", self.rot, np.asarray(Y, dtype=complex), optimize=True)
        Fw = F * self.w_vol[None, :, :, :, None]
        out = np.zeros((self.n_complex, nb), dtype=complex)
        for m in self.m_list:
            Fm = np.einsum("aqtpb,p->aqtb", Fw, np.conj(self.phase[m]), optimize=True)
            for l in range(max(1, abs(m)), self.l_max + 1):
                prof = l == 1 and m in self.beta
                U = self.slice_values(l, m, profiles=prof)
                dloc = np.einsum("aqtc,aqtb->cb", np.conj(U), Fm, optimize=True)
                if prof:
                    out[self.blocks[(l, m)]] += dloc[:-2]
                    b = self.beta[m]
                    out[self.chi_slice] += np.conj(b)[:, None] * dloc[-2][None, :]
                    out[self.sigma_slice] += np.conj(b)[:, None] * dloc[-1][None, :]
                else:
                    out[self.blocks[(l, m)]] += dloc
        return out[:, 0] if squeeze else out

    # -- grid transforms ---------------------------------------------------------

    def to_physical(self, u: CoupledField) -> np.ndarray:
        """Velocity on the grid; returns a real array for real fields."""
        g = self.synth(u.data)
        if u.conj_symmetry_error() < 1e-10 * max(1.0, np.max(np.abs(u.data))):
            return g.real
        return g

    def velocity_gradient(self, u: CoupledField) -> np.ndarray:
        g = self.synth_grad(u.data)
        if u.conj_symmetry_error() < 1e-10 * max(1.0, np.max(np.abs(u.data))):
            return g.real
        return g

    def strain_rate(self, u: CoupledField) -> np.ndarray:
        g = self.velocity_gradient(u)
        return 0.5 * (g + np.swapaxes(g, 0, 1))

    def divergence_max(self, u: CoupledField) -> float:
        g = self.synth_grad(u.data)
        return float(np.max(np.abs(g[0, 0] + g[1, 1] + g[2, 2])))

    def fluid_gram(self) -> np.ndarray:
        """Gram matrix of the coupled basis in L2 of the fluid shell."""
        if "fluid_gram" not in self._cache:
            from .assembly import mass_matrix

            self._cache["fluid_gram"] = mass_matrix(self)
        return self._cache["fluid_gram"]

    def to_spectral(self, grid: np.ndarray) -> CoupledField:
        """Least-squares projection of a grid velocity onto the coupled basis."""
        from scipy.linalg import cho_factor, cho_solve

        if "fluid_gram_cho" not in self._cache:
            self._cache["fluid_gram_cho"] = cho_factor(self.fluid_gram())
        rhs = self.dual(np.asarray(grid, dtype=complex))
        return self.field_from(cho_solve(self._cache["fluid_gram_cho"], rhs))

    def angular_coefficients(self, grid: np.ndarray):
        """Vector spherical-harmonic analysis of a Cartesian grid field.

        Returns ``{(l, m): (fr, fS, fT)}`` of radial-node arrays so that,
        within the resolved band, the field is fr Y e_r plus tangential parts
        with the same conventions as slice_values.  Unlike the velocity
        transforms this includes l = 0 (radial only, fS = fT = 0); content
        beyond (l_max, m_max) is discarded.
        """
        B = np.einsum("iatp,iqtp->aqtp", self.rot, np.asarray(grid, dtype=complex))
        out = {}
        for m in self.m_list:
            Bm = B @ (np.conj(self.phase[m]) / self.n_phi)
            im = 1j * m
            for l in range(abs(m), self.l_max + 1):
                A, dA, _, As, _ = self._angular(l, m)
                fr = 2.0 * np.pi * (Bm[0] @ (self.w_t * A))
                if l == 0:
                    out[(l, m)] = (fr, np.zeros_like(fr), np.zeros_like(fr))
                    continue
                ll = l * (l + 1.0)
                bt_dA = Bm[1] @ (self.w_t * dA)
                bt_As = Bm[1] @ (self.w_t * As)
                bp_dA = Bm[2] @ (self.w_t * dA)
                bp_As = Bm[2] @ (self.w_t * As)
                fS = (2.0 * np.pi / ll) * (bt_dA - im * bp_As)
                fT = (2.0 * np.pi / ll) * (-im * bt_As - bp_dA)
                out[(l, m)] = (fr, fS, fT)
        return out

    # -- surface quantities --------------------------------------------------------

    def _surface_tables(self):
        if "surface" in self._cache:
            return self._cache["surface"]
        rad = self.radial
        vp = rad.eval_basis("pol", np.array([1.0]), nderiv=2)
        vt = rad.eval_basis("tor", np.array([1.0]), nderiv=1)
        tabs = {
            "pol": [v[0] for v in vp],
            "tor": [v[0] for v in vt],
            "lift": cutoff_profile(np.array([1.0]), self.r_out),
        }
        self._cache["surface"] = tabs
        return tabs

    def _surface_slice_factors(self, l: int, profiles: bool):
        tabs = self._surface_tables()
        nc = 2 * self.n_r + (2 if (profiles and l == 1) else 0)
        z = np.zeros(nc)
        out = {k: z.copy() for k in ("Pr", "dPr", "S", "dS", "T", "dT")}
        p = slice(0, self.n_r)
        t = slice(self.n_r, 2 * self.n_r)
        V0, V1, V2 = tabs["pol"]
        out["Pr"][p] = V0
        out["dPr"][p] = V1 - V0
        out["S"][p] = V1 + V0
        out["dS"][p] = V2 + V1 - V0
        out["T"][t] = tabs["tor"][0]
        out["dT"][t] = tabs["tor"][1]
        if profiles and l == 1:
            # lift profiles P = r phi / 2, T = r phi evaluated at r = 1,
            # where phi = 1 and phi' = 0 pin the rigid trace
            phi0, dphi, d2phi, _ = (v[0] for v in tabs["lift"])
            out["Pr"][-2], out["dPr"][-2] = 0.5 * phi0, 0.5 * dphi
            out["S"][-2], out["dS"][-2] = phi0 + 0.5 * dphi, 1.5 * dphi + 0.5 * d2phi
            out["T"][-1], out["dT"][-1] = phi0, phi0 + dphi
        return out

    def surface_velocity_gradient(self, u: CoupledField):
        """(velocity, frame gradient) at r = 1 on the angular grid."""
        return self._surface_eval(u.data)

    def _surface_eval(self, C: np.ndarray):
        Uout = np.zeros((3, self.n_theta, self.n_phi), dtype=complex)
        Lout = np.zeros((3, 3, self.n_theta, self.n_phi), dtype=complex)
        s, x = self.sin_t, self.x_t
        for m in self.m_list:
            accU = np.zeros((3, self.n_theta), dtype=complex)
            accL = np.zeros((3, 3, self.n_theta), dtype=complex)
            im = 1j * m
            for l in range(max(1, abs(m)), self.l_max + 1):
                A, dA, d2A, As, dAs = self._angular(l, m)
                prof = l == 1 and m in self.beta
                f = self._surface_slice_factors(l, prof)
                Cs = C[self.blocks[(l, m)]]
                if prof:
                    Cs = np.concatenate([Cs, self._lift_amplitudes(m, C[:, None])[:, 0]])
                ll = l * (l + 1.0)
                cP = f["Pr"] @ Cs
                cdP = f["dPr"] @ Cs
                cS = f["S"] @ Cs
                cdS = f["dS"] @ Cs
                cT = f["T"] @ Cs
                cdT = f["dT"] @ Cs
                u = np.stack([
                    ll * cP * A,
                    cS * dA + im * cT * As,
                    im * cS * As - cT * dA,
                ])
                dur = np.stack([
                    ll * cdP * A,
                    cdS * dA + im * cdT * As,
                    im * cdS * As - cdT * dA,
                ])
                dut = np.stack([
                    ll * cP * dA,
                    cS * d2A + im * cT * dAs,
                    im * cS * dAs - cT * d2A,
                ])
                accU += u
                accL[0] += dur
                accL[1, 0] += dut[0] - u[1]
                accL[1, 1] += dut[1] + u[0]
                accL[1, 2] += dut[2]
                accL[2, 0] += im * ll * cP * As - u[2]
                accL[2, 1] += (im * u[1] - x * u[2]) / s
                accL[2, 2] += im * u[2] / s + u[0] + x * u[1] / s
            Uout += accU[:, :, None] * self.phase[m][None, None, :]
            Lout += accL[:, :, :, None] * self.phase[m][None, None, None, :]
        return Uout, Lout

    def traction_grid(self, u: CoupledField, q_surf: np.ndarray) -> np.ndarray:
        """Cauchy traction T(u, q) n at r = 1, n pointing into the sphere.

        ``q_surf`` is the pressure on the angular grid at r = 1.  Returned in
        Cartesian components, shape (3, n_theta, n_phi).  Pointwise route;
        the production force/torque path is pressure.surface_traction.
        """
        Us, Ls = self._surface_eval(u.data)
        D = 0.5 * (Ls + np.swapaxes(Ls, 0, 1))
        tf = np.asarray(q_surf, dtype=complex)[None] * np.array([1.0, 0, 0])[:, None, None] - 2.0 * D[:, 0]
        return np.einsum("iatp,atp->itp", self.rot, tf)

    def surface_force(self, traction: np.ndarray) -> np.ndarray:
        w = self.w_t[:, None] * self.w_phi
        return np.einsum("itp,tp->i", traction, w)

    def surface_torque(self, traction: np.ndarray) -> np.ndarray:
        er = self.rot[:, 0]  # unit radius vector in Cartesian components
        mom = np.cross(np.moveaxis(er, 0, -1), np.moveaxis(traction, 0, -1))
        w = self.w_t[:, None] * self.w_phi
        return np.einsum("tpi,tp->i", mom, w)

    # -- real packing -----------------------------------------------------------

    def pack_real(self, u: CoupledField) -> np.ndarray:
        out = np.empty(self.n_real)
        pos = 0
        sl0 = self.m_slices[0]
        n0 = sl0.stop - sl0.start
        out[pos : pos + n0] = u.data[sl0].real
        pos += n0
        for m in self.m_list:
            if m <= 0:
                continue
            sl = self.m_slices[m]
            n = sl.stop - sl.start
            out[pos : pos + n] = u.data[sl].real
            out[pos + n : pos + 2 * n] = u.data[sl].imag
            pos += 2 * n
        out[pos : pos + 3] = u.chi.real
        out[pos + 3 : pos + 6] = u.sigma.real
        return out

    def unpack_real(self, rho: np.ndarray) -> CoupledField:
        u = self.zero_field()
        pos = 0
        sl0 = self.m_slices[0]
        n0 = sl0.stop - sl0.start
        u.data[sl0] = rho[pos : pos + n0]
        pos += n0
        for m in self.m_list:
            if m <= 0:
                continue
            sl = self.m_slices[m]
            n = sl.stop - sl.start
            cm = rho[pos : pos + n] + 1j * rho[pos + n : pos + 2 * n]
            u.data[sl] = cm
            pos += 2 * n
            for l in range(max(1, m), self.l_max + 1):
                u.data[self.blocks[(l, -m)]] = (-1) ** m * np.conj(
                    u.data[self.blocks[(l, m)]]
                )
        u.chi = rho[pos : pos + 3]
        u.sigma = rho[pos + 3 : pos + 6]
        return u

    def unpack_complex(self, z: np.ndarray) -> CoupledField:
        """C-linear extension of unpack_real to complex packed vectors.

        Eigenvectors of the real-packed matrices live in the complexified
        space; filling the dependent -m blocks must not conjugate the
        computed values, so real and imaginary parts are unpacked separately.
        """
        z = np.asarray(z)
        u = self.unpack_real(np.real(z).astype(float))
        v = self.unpack_real(np.imag(z).astype(float))
        u.data += 1j * v.data
        return u

    def pack_dual(self, dual: np.ndarray) -> np.ndarray:
        """Real packing of a dual vector (pairing against real fields)."""
        out = np.empty(self.n_real)
        pos = 0
        sl0 = self.m_slices[0]
        n0 = sl0.stop - sl0.start
        out[pos : pos + n0] = dual[sl0].real
        pos += n0
        for m in self.m_list:
            if m <= 0:
                continue
            sl = self.m_slices[m]
            n = sl.stop - sl.start
            out[pos : pos + n] = 2.0 * dual[sl].real
            out[pos + n : pos + 2 * n] = 2.0 * dual[sl].imag
            pos += 2 * n
        out[pos : pos + 3] = dual[self.chi_slice].real
        out[pos + 3 : pos + 6] = dual[self.sigma_slice].real
        return out

    def real_matrix(self, A: np.ndarray) -> np.ndarray:
        """Real-packed matrix of a real operator given in complex coordinates."""
        out = np.empty((self.n_real, self.n_real))
        cols = np.zeros((self.n_complex, self.n_real), dtype=complex)
        pos = 0
        sl0 = self.m_slices[0]
        n0 = sl0.stop - sl0.start
        cols[sl0, pos : pos + n0] = np.eye(n0)
        pos += n0
        for m in self.m_list:
            if m <= 0:
                continue
            sl = self.m_slices[m]
            n = sl.stop - sl.start
            cols[sl, pos : pos + n] = np.eye(n)
            cols[sl, pos + n : pos + 2 * n] = 1j * np.eye(n)
            # dependent -m coefficients
            for l in range(max(1, m), self.l_max + 1):
                slp = self.blocks[(l, m)]
                sln = self.blocks[(l, -m)]
                loc = slice(pos + (slp.start - sl.start), pos + (slp.stop - sl.start))
                cols[sln, loc] = (-1) ** m * np.eye(slp.stop - slp.start)
                locI = slice(
                    pos + n + (slp.start - sl.start), pos + n + (slp.stop - sl.start)
                )
                cols[sln, locI] = -1j * (-1) ** m * np.eye(slp.stop - slp.start)
            pos += 2 * n
        cols[self.chi_slice, pos : pos + 3] = np.eye(3)
        cols[self.sigma_slice, pos + 3 : pos + 6] = np.eye(3)
        Y = A @ cols
        for j in range(self.n_real):
            out[:, j] = self.pack_dual(Y[:, j])
        return out

    # -- pointwise evaluation and symmetry diagnostics -----------------------------

    def evaluate_at_points(self, u: CoupledField, pts: np.ndarray) -> np.ndarray:
        """Velocity at arbitrary Cartesian points inside the shell (slow path)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        r = np.linalg.norm(pts, axis=1)
        if np.any(r < 1.0 - 1e-12) or np.any(r > self.r_out + 1e-12):
            raise ValueError("points must lie in the fluid shell")
        x1 = pts[:, 0] / r
        st = np.sqrt(np.clip(1.0 - x1**2, 1e-300, None))
        phi = np.arctan2(pts[:, 2], pts[:, 1])
        tabs = build_tables(self.l_max, self.m_max, np.clip(x1, -1 + 1e-14, 1 - 1e-14))
        vp = self.radial.eval_basis("pol", r, nderiv=1)
        vt = self.radial.eval_basis("tor", r, nderiv=0)
        phir, dphir = cutoff_profile(r, self.r_out)[:2]
        out = np.zeros((pts.shape[0], 3), dtype=complex)
        for (l, m), sl in self.blocks.items():
            am = abs(m)
            sgn = (-1.0) ** am if m < 0 else 1.0
            A = sgn * tabs.P[l, am]
            dA = sgn * tabs.dP[l, am]
            As = sgn * tabs.Psin[l, am]
            cp = u.data[sl][: self.n_r]
            ct = u.data[sl][self.n_r :]
            P = vp[0] @ cp
            S = (vp[1] + vp[0] / r[:, None]) @ cp
            T = vt[0] @ ct
            if l == 1 and m in self.beta:
                b = self.beta[m]
                P = P + (b @ u.chi) * r * phir / 2.0
                S = S + (b @ u.chi) * (phir + r * dphir / 2.0)
                T = T + (b @ u.sigma) * r * phir
            im = 1j * m
            ur = l * (l + 1.0) * P / r * A
            ut = S * dA + im * T * As
            up = im * S * As - T * dA
            ph = np.exp(1j * m * phi)
            er = np.stack([x1, st * np.cos(phi), st * np.sin(phi)], axis=1)
            et = np.stack([-st, x1 * np.cos(phi), x1 * np.sin(phi)], axis=1)
            ep = np.stack([np.zeros_like(phi), -np.sin(phi), np.cos(phi)], axis=1)
            out += (ur * ph)[:, None] * er + (ut * ph)[:, None] * et + (up * ph)[:, None] * ep
        return out

    def boundary_trace_error(self, u: CoupledField) -> float:
        """Max deviation of u at r = 1 from chi + sigma x x over the angular grid."""
        Us, _ = self._surface_eval(u.data)
        ucart = np.einsum("iatp,atp->itp", self.rot, Us)
        er = self.rot[:, 0]
        rigid = u.chi[:, None, None] + np.cross(
            u.sigma[None, None, :], np.moveaxis(er, 0, -1)
        ).transpose(2, 0, 1)
        return float(np.max(np.abs(ucart - rigid)))

    def reflection(self, u: CoupledField) -> CoupledField:
        """Field reflected through the plane x3 = 0."""
        v = self.zero_field()
        for (l, m), sl in self.blocks.items():
            src = self.blocks[(l, -m)]
            sgn = (-1.0) ** m
            v.data[sl.start : sl.start + self.n_r] = sgn * u.data[src.start : src.start + self.n_r]
            v.data[sl.start + self.n_r : sl.stop] = -sgn * u.data[src.start + self.n_r : src.stop]
        v.chi = u.chi * np.array([1.0, 1.0, -1.0])
        v.sigma = u.sigma * np.array([-1.0, -1.0, 1.0])
        return v
