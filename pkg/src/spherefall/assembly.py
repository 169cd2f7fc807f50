"""Galerkin matrices and linear solves for the coupled discretization.

All bilinear forms are azimuthally diagonal; per-order blocks carry two
extra columns for the rigid lift profiles (harmonic degree one), which the
expansion step maps onto the chi/sigma unknowns.  Convention throughout:
``A[row, col] = form(trial_col, conj(test_row))`` so that ``A @ c`` is the
dual vector of the form applied to the field ``c``.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .discretization import CoupledField, Discretization

__all__ = [
    "mass_blocks",
    "dissipation_blocks",
    "transport_blocks",
    "expand_blocks",
    "mass_matrix",
    "dissipation_matrix",
    "transport_matrix",
    "rigid_mass_matrix",
    "convection_dual",
    "linearized_convection",
    "OseenModeSolver",
]


def _has_profiles(d: Discretization, l: int, m: int) -> bool:
    return l == 1 and m in d.beta


def _block_cols(d: Discretization, m: int) -> list[tuple[int, slice, bool]]:
    """Column layout of the extended per-order block: (l, cols, has_prof)."""
    out = []
    pos = 0
    for l in range(max(1, abs(m)), d.l_max + 1):
        n = 2 * d.n_r + (2 if _has_profiles(d, l, m) else 0)
        out.append((l, slice(pos, pos + n), _has_profiles(d, l, m)))
        pos += n
    return out


def _block_size(d: Discretization, m: int) -> int:
    layout = _block_cols(d, m)
    return layout[-1][1].stop if layout else 0


def mass_blocks(d: Discretization) -> dict[int, np.ndarray]:
    """Per-order blocks of the fluid L2 inner product (shell only)."""
    if "mass_blocks" in d._cache:
        return d._cache["mass_blocks"]
    out = {}
    for m in d.m_list:
        n = _block_size(d, m)
        B = np.zeros((n, n), dtype=complex)
        for l, cols, prof in _block_cols(d, m):
            U = d.slice_values(l, m, profiles=prof)
            B[cols, cols] = np.einsum(
                "aqtc,qt,aqtd->cd", np.conj(U), d.w_slice, U, optimize=True
            )
        out[m] = B
    d._cache["mass_blocks"] = out
    return out


def dissipation_blocks(d: Discretization) -> dict[int, np.ndarray]:
    """Per-order blocks of 2 (D(u), D(w)) over the shell."""
    if "dissipation_blocks" in d._cache:
        return d._cache["dissipation_blocks"]
    out = {}
    for m in d.m_list:
        n = _block_size(d, m)
        B = np.zeros((n, n), dtype=complex)
        for l, cols, prof in _block_cols(d, m):
            L = d.slice_gradients(l, m, profiles=prof)
            D = 0.5 * (L + np.swapaxes(L, 0, 1))
            B[cols, cols] = 2.0 * np.einsum(
                "xyqtc,qt,xyqtd->cd", np.conj(D), d.w_slice, D, optimize=True
            )
        out[m] = B
    d._cache["dissipation_blocks"] = out
    return out


def transport_blocks(d: Discretization) -> dict[int, np.ndarray]:
    """Per-order blocks of (du/dx1, w) over the shell.

    The derivative along gravity couples degrees l and l +- 1 and, for
    m != 0, the two families at equal degree.
    """
    if "transport_blocks" in d._cache:
        return d._cache["transport_blocks"]
    r = d.radial.r_q
    w_cos = d.w_slice * d.x_t[None, :]
    w_sin_r = d.w_slice * (d.sin_t[None, :] / r[:, None])
    out = {}
    for m in d.m_list:
        n = _block_size(d, m)
        B = np.zeros((n, n), dtype=complex)
        layout = _block_cols(d, m)
        packs = {}
        for l, cols, prof in layout:
            packs[l] = (cols, d.slice_values(l, m, profiles=prof, derivs=True))
        for lt, colst, _ in layout:
            Ut = packs[lt][1][0]
            for lu, colsu, _ in layout:
                if abs(lt - lu) > 1:
                    continue
                U, dUr, dUt = packs[lu][1]
                blk = np.einsum(
                    "aqtc,qt,aqtd->cd", np.conj(Ut), w_cos, dUr, optimize=True
                )
                blk -= np.einsum(
                    "aqtc,qt,aqtd->cd", np.conj(Ut), w_sin_r, dUt, optimize=True
                )
                blk -= np.einsum(
                    "qtc,qt,qtd->cd", np.conj(Ut[1]), w_sin_r, U[0], optimize=True
                )
                blk += np.einsum(
                    "qtc,qt,qtd->cd", np.conj(Ut[0]), w_sin_r, U[1], optimize=True
                )
                B[colst, colsu] += blk
        out[m] = B
    d._cache["transport_blocks"] = out
    return out


def expand_blocks(
    d: Discretization,
    blocks: dict[int, np.ndarray],
    rigid_extra: np.ndarray | None = None,
) -> np.ndarray:
    """Full complex matrix over [fluid coefficients, chi, sigma].

    Profile rows/columns of the per-order blocks are folded onto the rigid
    unknowns through the lift amplitude factors; ``rigid_extra`` (6 x 6) is
    added to the rigid-rigid part.
    """
    N = d.n_complex
    A = np.zeros((N, N), dtype=complex)
    rig = slice(d.n_fluid, N)
    for m, B in blocks.items():
        layout = _block_cols(d, m)
        # map extended-block columns -> global columns
        for lt, colst, proft in layout:
            gt = d.blocks[(lt, m)]
            nt = 2 * d.n_r
            for lu, colsu, profu in layout:
                gu = d.blocks[(lu, m)]
                nu = 2 * d.n_r
                sub = B[colst, colsu]
                A[gt, gu] += sub[:nt, :nu]
                if profu:
                    T = _rigid_map(d, m)  # (2, 6)
                    A[gt, rig] += sub[:nt, nu:] @ T
                if proft:
                    T = _rigid_map(d, m)
                    A[rig, gu] += np.conj(T).T @ sub[nt:, :nu]
                if proft and profu:
                    T = _rigid_map(d, m)
                    A[rig, rig] += np.conj(T).T @ sub[nt:, nu:] @ T
    if rigid_extra is not None:
        A[rig, rig] += rigid_extra
    return A


def _rigid_map(d: Discretization, m: int) -> np.ndarray:
    """(2, 6) map from (chi, sigma) to the profile amplitudes at order m."""
    T = np.zeros((2, 6), dtype=complex)
    T[0, 0:3] = d.beta[m]
    T[1, 3:6] = d.beta[m]
    return T


def mass_matrix(d: Discretization) -> np.ndarray:
    key = ("mass_full",)
    if key not in d._cache:
        d._cache[key] = expand_blocks(d, mass_blocks(d))
    return d._cache[key]


def rigid_mass_matrix(mass_t: float, mass_r: float) -> np.ndarray:
    """Rigid-body contribution of the density-weighted inner product."""
    return np.diag([mass_t] * 3 + [mass_r] * 3).astype(complex)


def dissipation_matrix(d: Discretization) -> np.ndarray:
    key = "dissipation_matrix"
    if key not in d._cache:
        d._cache[key] = expand_blocks(d, dissipation_blocks(d))
    return d._cache[key]


def transport_matrix(d: Discretization, rigid_term: bool = False, mass_t: float = 0.0) -> np.ndarray:
    """Matrix of (du/dx1, w) over the shell.

    With ``rigid_term`` the density-weighted rigid part is added: transporting
    the rigid extension chi + sigma x x along e1 contributes
    mass_t (sigma x e1) . chi_w.
    """
    key = ("transport_matrix", rigid_term, mass_t)
    if key not in d._cache:
        extra = None
        if rigid_term:
            extra = np.zeros((6, 6), dtype=complex)
            # (sigma_u x e1) . chi_w = sigma_u . (e1 x chi_w)
            e1 = np.array([1.0, 0.0, 0.0])
            for j in range(3):
                ej = np.zeros(3)
                ej[j] = 1.0
                extra[0:3, 3 + j] = mass_t * np.cross(ej, e1)
        d._cache[key] = expand_blocks(d, transport_blocks(d), rigid_extra=extra)
    return d._cache[key]


# -- nonlinear terms -----------------------------------------------------------


def convection_grid(d: Discretization, v: CoupledField) -> np.ndarray:
    """(chi_v - v) . grad v on the grid, Cartesian components."""
    g = d.synth(v.data)
    G = d.synth_grad(v.data)
    adv = v.chi[:, None, None, None] - g
    return np.einsum("iqtp,ijqtp->jqtp", adv, G)


def convection_dual(d: Discretization, v: CoupledField) -> np.ndarray:
    """Dual vector of ((chi_v - v) . grad v, test) over the shell."""
    return d.dual(convection_grid(d, v))


def linearized_convection(
    d: Discretization,
    grad_base: np.ndarray,
    adv_base: np.ndarray,
    chi_coupling: bool = True,
    col_chunk: int = 64,
) -> np.ndarray:
    """Matrix of w -> dual[(chi_w - w) . grad_base + adv_base . grad w].

    ``grad_base`` is a (3, 3, grid) array (d base_j / dx_i), ``adv_base`` a
    (3, grid) advecting field; set ``chi_coupling`` False to drop the chi_w
    part (advection of the base by the rigid translation of w).
    """
    N = d.n_complex
    J = np.zeros((N, N), dtype=complex)
    eye = np.eye(N, dtype=complex)
    gb = np.asarray(grad_base, dtype=complex)
    ab = np.asarray(adv_base, dtype=complex)
    for start in range(0, N, col_chunk):
        cols = slice(start, min(start + col_chunk, N))
        C = eye[:, cols]
        U = d.synth(C)
        Gw = d.synth_grad(C)
        adv_w = -U
        if chi_coupling:
            chi_cols = C[d.chi_slice]  # (3, nb)
            adv_w = adv_w + chi_cols[:, None, None, None, :]
        b = np.einsum("iqtpb,ijqtp->jqtpb", adv_w, gb) + np.einsum(
            "iqtp,ijqtpb->jqtpb", ab, Gw
        )
        J[:, cols] = d.dual(b)
    return J


# -- shifted Oseen-type solves ---------------------------------------------------


class OseenModeSolver:
    """Per-order factorized solver for s u + tau . grad u - div T(u, q) = f.

    Parameters enter as the complex matrix ``s M + C + K`` restricted to the
    interior (zero trace) coefficients of each azimuthal order; prescribed
    rigid boundary traces are moved to the right-hand side through the lift
    columns.  ``extra`` allows adding further per-order matrices (e.g. a
    linearized convection restricted to one order).
    """

    def __init__(
        self,
        d: Discretization,
        shift: complex,
        transport_coef: float | complex,
        extra_blocks: dict[int, np.ndarray] | None = None,
    ):
        self.d = d
        self.shift = shift
        self.transport_coef = transport_coef
        mb = mass_blocks(d)
        kb = dissipation_blocks(d)
        cb = transport_blocks(d)
        self._lu = {}
        self._mats = {}
        for m in d.m_list:
            A = shift * mb[m] + transport_coef * cb[m] + kb[m]
            if extra_blocks is not None and m in extra_blocks:
                A = A + extra_blocks[m]
            self._mats[m] = A
            fi, _ = fluid_profile_indices(d, m)
            self._lu[m] = lu_factor(A[np.ix_(fi, fi)])

    def solve(self, rhs_dual: np.ndarray, chi: np.ndarray, sigma: np.ndarray) -> CoupledField:
        """Solve with prescribed rigid trace (chi, sigma) and dual forcing."""
        d = self.d
        u = d.zero_field()
        u.chi = np.asarray(chi, dtype=complex)
        u.sigma = np.asarray(sigma, dtype=complex)
        for m in d.m_list:
            fi, pi = fluid_profile_indices(d, m)
            rhs = np.asarray(rhs_dual[d.m_slices[m]], dtype=complex).copy()
            if pi is not None:
                amp = np.array([d.beta[m] @ u.chi, d.beta[m] @ u.sigma])
                rhs -= self._mats[m][np.ix_(fi, pi)] @ amp
            u.data[d.m_slices[m]] = lu_solve(self._lu[m], rhs)
        return u


def fluid_profile_indices(d: Discretization, m: int):
    """Positions of fluid vs profile columns inside the extended block."""
    key = ("fp_idx", m)
    if key in d._cache:
        return d._cache[key]
    fluid, prof = [], []
    for l, cols, has_prof in _block_cols(d, m):
        idx = np.arange(cols.start, cols.stop)
        if has_prof:
            fluid.append(idx[:-2])
            prof.extend(idx[-2:])
        else:
            fluid.append(idx)
    fi = np.concatenate(fluid)
    pi = np.asarray(prof) if prof else None
    d._cache[key] = (fi, pi)
    return fi, pi
