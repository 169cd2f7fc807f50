"""Inner products, the coupled-space projection, and rigid lifting fields.

The coupled space pairs a solenoidal fluid field on the shell with the
rigid velocity (chi, sigma) it traces on the sphere.  Its natural inner
product weights the rigid part with the body's mass and moment of inertia;
``project_H`` maps an arbitrary (field, rigid) pair onto the coupled space
orthogonally in that product.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dfield

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .assembly import dissipation_matrix, mass_matrix
from .discretization import CoupledField, Discretization
from .radial import cutoff_profile

__all__ = [
    "PhysicalParams",
    "RawField",
    "gram_matrix",
    "inner_rigid",
    "inner_dissipation",
    "project_H",
    "rigid_lift",
]


@dataclass(frozen=True)
class PhysicalParams:
    """Galilei number, solid/liquid density ratio, and derived body constants."""

    galilei: float
    density_ratio: float
    e1: np.ndarray = dfield(default_factory=lambda: np.array([1.0, 0.0, 0.0]))

    def __post_init__(self):
        if self.galilei < 0.0:
            raise ValueError("Galilei number must be nonnegative")
        if self.density_ratio <= 0.0:
            raise ValueError("density ratio must be positive")
        e1 = np.asarray(self.e1, dtype=float)
        n = np.linalg.norm(e1)
        if not np.isclose(n, 1.0, rtol=1e-8):
            raise ValueError("gravity direction must be a unit vector")
        object.__setattr__(self, "e1", e1 / n)

    # mass and inertia follow from the density ratio alone
    @property
    def mass(self) -> float:
        return 4.0 * np.pi * self.density_ratio / 3.0

    @property
    def inertia(self) -> float:
        return 8.0 * np.pi * self.density_ratio / 15.0


@dataclass
class RawField:
    """A velocity sample on the grid plus an uncoupled rigid part.

    Unlike a CoupledField, the rigid components here need not match the
    fluid trace at the sphere; this is the discrete stand-in for a general
    square-integrable (fluid, body) pair.
    """

    d: Discretization
    grid: np.ndarray  # (3, n_q, n_theta, n_phi)
    chi: np.ndarray
    sigma: np.ndarray

    @classmethod
    def from_coupled(cls, u: CoupledField) -> "RawField":
        return cls(u.d, u.d.synth(u.data), u.chi.copy(), u.sigma.copy())


def gram_matrix(d: Discretization, p: PhysicalParams) -> np.ndarray:
    """Gram matrix of the coupled basis in the mass-weighted inner product."""
    key = ("gram", p.mass, p.inertia)
    if key not in d._cache:
        G = mass_matrix(d).copy()
        rig = np.arange(d.n_fluid, d.n_complex)
        G[rig, rig] += np.array([p.mass] * 3 + [p.inertia] * 3)
        d._cache[key] = G
    return d._cache[key]


def _check_pair(u, w):
    if u.d is not w.d:
        raise ValueError("fields live on different discretizations")


def inner_rigid(u, w, p: PhysicalParams) -> complex:
    """M chi_u . conj(chi_w) + I sigma_u . conj(sigma_w) + (u, w) over the shell.

    Accepts CoupledField or RawField arguments; coupled pairs go through the
    Gram matrix, anything involving a raw field through grid quadrature.
    """
    _check_pair(u, w)
    if isinstance(u, CoupledField) and isinstance(w, CoupledField):
        return complex(np.conj(w.data) @ (gram_matrix(u.d, p) @ u.data))
    if isinstance(u, CoupledField):
        u = RawField.from_coupled(u)
    if isinstance(w, CoupledField):
        w = RawField.from_coupled(w)
    fluid = np.sum(u.d.w_vol * np.einsum("i...,i...->...", u.grid, np.conj(w.grid)))
    rigid = p.mass * np.dot(u.chi, np.conj(w.chi)) + p.inertia * np.dot(
        u.sigma, np.conj(w.sigma)
    )
    return complex(fluid + rigid)


def inner_dissipation(u: CoupledField, w: CoupledField) -> complex:
    """Strain-rate inner product int_Omega D(u) : conj(D(w))."""
    _check_pair(u, w)
    return complex(0.5 * (np.conj(w.data) @ (dissipation_matrix(u.d) @ u.data)))


def _gram_factor(d: Discretization, p: PhysicalParams):
    key = ("gram_cho", p.mass, p.inertia)
    if key not in d._cache:
        d._cache[key] = cho_factor(gram_matrix(d, p))
    return d._cache[key]


def project_H(h: RawField | CoupledField, p: PhysicalParams) -> CoupledField:
    """Orthogonal projection onto the coupled space in the rigid inner product.

    Solves gram @ c = <h, basis> where the right-hand side carries the
    fluid L2 pairing plus the mass/inertia-weighted rigid pairing.
    """
    if isinstance(h, CoupledField):
        h = RawField.from_coupled(h)
    d = h.d
    rhs = d.dual(np.asarray(h.grid, dtype=complex))
    rhs[d.chi_slice] += p.mass * np.asarray(h.chi, dtype=complex)
    rhs[d.sigma_slice] += p.inertia * np.asarray(h.sigma, dtype=complex)
    c = cho_solve(_gram_factor(d, p), rhs)
    G = gram_matrix(d, p)
    defect = np.linalg.norm(G @ c - rhs)
    if defect > 1e-12 * max(1.0, np.linalg.norm(rhs)):
        raise RuntimeError(f"projection solve residual {defect:.2e} too large")
    return d.field_from(c)


def _smoothstep_c3(t: np.ndarray) -> np.ndarray:
    """1 -> 0 transition on [0, 1] with three vanishing end derivatives."""
    t = np.clip(t, 0.0, 1.0)
    return 1.0 - t**4 * (35.0 - 84.0 * t + 70.0 * t**2 - 20.0 * t**3)


def rigid_lift(kind: str, axis: int, d: Discretization) -> CoupledField:
    """Divergence-free lift of a unit rigid motion, compactly supported.

    ``kind`` is 'translation' or 'rotation', ``axis`` in {1, 2, 3}.  The
    trace at |x| = 1 is exactly e_axis (or e_axis cross x); beyond
    r = 2 r_cut the field is zero up to the radial fit error.
    """
    if kind not in ("translation", "rotation"):
        raise ValueError(f"unknown lift kind {kind!r}")
    if axis not in (1, 2, 3):
        raise ValueError("axis must be 1, 2 or 3")
    r_cut = min(2.0, (1.0 + d.r_out) / 4.0)
    if 2.0 * r_cut >= d.r_out:
        raise ValueError("cutoff support does not fit inside the shell")
    if axis != 1 and d.m_max < 1:
        raise ValueError("lateral lifts need azimuthal order one")

    u = d.zero_field()
    e = np.zeros(3)
    e[axis - 1] = 1.0
    if kind == "translation":
        u.chi = e
    else:
        u.sigma = e

    # fluid correction replacing the clamped basis profile by a compact one
    r = d.radial.r_q
    target = _smoothstep_c3((r - r_cut) / r_cut) - cutoff_profile(r, d.r_out)[0]
    w = np.sqrt(d.radial.w_r)
    if kind == "translation":
        fam, prof = "pol", 0.5 * r * target
    else:
        fam, prof = "tor", r * target
    V0 = d.radial.tables[fam][0]
    coef, *_ = np.linalg.lstsq(V0 * w[:, None], prof * w, rcond=None)
    for m, b in d.beta.items():
        u.data[d.mode_slice(1, m, fam)] = (b @ e) * coef
    return u
