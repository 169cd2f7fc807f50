"""Radial discretization of the truncated shell 1 <= r <= r_out.

Chebyshev modes composed with an exponential map x in [-1, 1] ->
r = r_out**((x+1)/2), so collocation/quadrature nodes cluster at the inner
sphere where boundary layers live.  Two recombined mode families are used:

* ``pol`` -- clamped modes (value and slope vanish at both ends),
* ``tor`` -- Dirichlet modes (value vanishes at both ends).

Boundary conditions are exact properties of the basis, not equations.
Quadrature is Gauss-Legendre in the map variable; weights include the map
Jacobian so that ``sum(w_r * f(r_q))`` approximates ``int_1^rout f dr``.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np
from numpy.polynomial import chebyshev as cheb
from numpy.polynomial import legendre as leg

__all__ = ["RadialGrid", "cutoff_profile"]


def _dirichlet_rows(n: int) -> np.ndarray:
    """Chebyshev coefficients of phi_k = T_k - T_{k+2}, k = 0..n-1."""
    rows = np.zeros((n, n + 2))
    for k in range(n):
        rows[k, k] = 1.0
        rows[k, k + 2] = -1.0
    return rows


def _clamped_rows(n: int) -> np.ndarray:
    """Chebyshev coefficients of modes with phi(+-1) = phi'(+-1) = 0.

    phi_k = T_k - 2(k+2)/(k+3) T_{k+2} + (k+1)/(k+3) T_{k+4}.
    """
    rows = np.zeros((n, n + 4))
    for k in range(n):
        rows[k, k] = 1.0
        rows[k, k + 2] = -2.0 * (k + 2) / (k + 3)
        rows[k, k + 4] = (k + 1.0) / (k + 3)
    return rows


def _derivative_stack(rows: np.ndarray, nder: int) -> list[np.ndarray]:
    """Chebyshev coefficient matrices of the 0th..nder-th x-derivatives."""
    out = [rows]
    cur = rows
    for _ in range(nder):
        nxt = np.zeros_like(cur)
        for k in range(cur.shape[0]):
            d = cheb.chebder(cur[k])
            nxt[k, : d.size] = d
        out.append(nxt)
        cur = nxt
    return out


class RadialGrid:
    """Mapped-Chebyshev radial bases and quadrature on [1, r_out]."""

    def __init__(self, n_r: int, r_out: float, n_quad: int | None = None):
        if n_r < 2:
            raise ValueError("need at least two radial modes per family")
        if r_out <= 1.0:
            raise ValueError("outer radius must exceed the sphere radius 1")
        self.n_r = int(n_r)
        self.r_out = float(r_out)
        self.beta = 0.5 * np.log(self.r_out)
        self.n_quad = int(n_quad) if n_quad is not None else 2 * self.n_r + 25

        self.x_q, self.w_x = leg.leggauss(self.n_quad)
        self.r_q = self.r_of_x(self.x_q)
        # dr = beta * r dx
        self.w_r = self.w_x * self.beta * self.r_q

        self._rows = {
            "pol": _derivative_stack(_clamped_rows(self.n_r), 3),
            "tor": _derivative_stack(_dirichlet_rows(self.n_r), 2),
        }

    # -- map ---------------------------------------------------------------

    def r_of_x(self, x):
        return np.exp(self.beta * (1.0 + np.asarray(x, dtype=float)))

    def x_of_r(self, r):
        return np.log(np.asarray(r, dtype=float)) / self.beta - 1.0

    # -- basis evaluation ----------------------------------------------------

    def eval_basis(self, family: str, r, nderiv: int = 0) -> list[np.ndarray]:
        """Values and r-derivatives of all modes of a family at radii ``r``.

        Returns ``[V0, .., Vnderiv]`` with ``Vd[i, k] = d^d phi_k / dr^d (r_i)``.
        """
        stacks = self._rows[family]
        if nderiv >= len(stacks):
            raise ValueError(f"{family} basis tabulated up to order {len(stacks) - 1}")
        r = np.atleast_1d(np.asarray(r, dtype=float))
        x = self.x_of_r(r)
        vander = cheb.chebvander(x, stacks[0].shape[1] - 1)
        px = [vander @ s.T for s in stacks[: nderiv + 1]]

        out = [px[0]]
        if nderiv >= 1:
            rx = (self.beta * r)[:, None]  # dr/dx
            out.append(px[1] / rx)
        if nderiv >= 2:
            # r_xx = beta^2 r, r_xxx = beta^3 r
            rxx = (self.beta**2 * r)[:, None]
            out.append((px[2] - out[1] * rxx) / rx**2)
        if nderiv >= 3:
            rxxx = (self.beta**3 * r)[:, None]
            out.append((px[3] - 3.0 * out[2] * rx * rxx - out[1] * rxxx) / rx**3)
        return out

    @cached_property
    def tables(self) -> dict[str, list[np.ndarray]]:
        """Mode tables on the quadrature nodes, per family."""
        return {
            "pol": self.eval_basis("pol", self.r_q, 3),
            "tor": self.eval_basis("tor", self.r_q, 2),
        }

    # -- integration helpers --------------------------------------------------

    def integrate(self, vals: np.ndarray) -> complex | float:
        """int_1^rout f dr from node values (leading axis = nodes)."""
        return np.tensordot(self.w_r, vals, axes=(0, 0))

    def integral_to_outer(self, vals: np.ndarray) -> np.ndarray:
        """F(r_q) = int_{r_q}^{r_out} f dr, spectrally from node values."""
        g = vals * (self.beta * self.r_q)  # integrand in x
        k = np.arange(self.n_quad)
        # exact Legendre projection at the quadrature's own accuracy
        pv = leg.legvander(self.x_q, self.n_quad - 1)
        coef = (k + 0.5) * ((pv.T * self.w_x) @ g)
        anti = leg.legint(coef)
        return leg.legval(1.0, anti) - leg.legval(self.x_q, anti)


def cutoff_profile(r, r_out: float):
    """Clamped cutoff phi(r): phi(1) = 1, phi(r_out) = 0, phi' = 0 at both ends.

    A cubic Hermite step in the map variable, so rigid-lift integrands stay
    polynomial in x and the Gauss rule integrates them exactly (a cutoff that
    is constant near the sphere would have to be non-analytic, and its
    quadrature error leaks into the rigid force balance).  Returns
    (phi, phi', phi'', phi''').
    """
    beta = 0.5 * np.log(float(r_out))
    r = np.asarray(r, dtype=float)
    x = np.log(r) / beta - 1.0
    q = (x**3 - 3.0 * x + 2.0) / 4.0
    dq = 0.75 * (x**2 - 1.0)
    d2q = 1.5 * x
    d3q = 1.5
    # chain rule through x(r) = log(r)/beta - 1
    br = beta * r
    phi1 = dq / br
    phi2 = d2q / br**2 - dq / (beta * r**2)
    phi3 = d3q / br**3 - 3.0 * d2q / (beta**2 * r**3) + 2.0 * dq / (beta * r**3)
    return q, phi1, phi2, phi3
