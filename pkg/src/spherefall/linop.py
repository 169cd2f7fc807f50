"""Linearization about a steady fall: operators, resolvent, spectrum, crossing.

The operators act on the coupled space through two interchangeable routes: a
matrix-free strong route (grid Laplacian and transport plus the surface
tractions, followed by one projection) and an assembled weak route whose
matrices pair directly against the basis.  The transport term carries the
momentum-flux closure through the body, which makes its assembled matrix
exactly skew-Hermitian in the mass-weighted product; see transport_tail.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .assembly import dissipation_matrix, linearized_convection, transport_matrix
from .discretization import CoupledField, Discretization
from .pressure import viscous_traction
from .spaces import PhysicalParams, RawField, gram_matrix, inner_rigid, project_H
from .steady import SteadyState, steady_solve

__all__ = [
    "LinearOperatorHandle",
    "SpectrumResult",
    "CriticalPoint",
    "EigensolverError",
    "NoCrossingError",
    "TransversalityError",
    "ResonanceError",
    "MultipleCrossingError",
    "SpectrumSample",
    "apply_Delta_tilde",
    "apply_L0",
    "apply_K",
    "apply_L2",
    "operator_handle",
    "weak_matrix",
    "transport_tail",
    "resolvent_solve",
    "spectrum_near_axis",
    "find_critical",
]

_FLUX = 4.0 * np.pi / 3.0  # oint x_i x_j dS over the unit sphere = 4 pi/3 delta_ij


class EigensolverError(RuntimeError):
    """Eigenvalue iteration failed to converge to certified residuals."""


class NoCrossingError(RuntimeError):
    """min Re nu does not change sign on the requested Galilei interval."""


class TransversalityError(RuntimeError):
    """The crossing eigenvalue does not move across the axis with lambda."""


class ResonanceError(RuntimeError):
    """Some integer multiple of the crossing frequency meets the spectrum."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class MultipleCrossingError(RuntimeError):
    """More than one eigenpair sits on the axis within resolution."""


# -- index helpers ---------------------------------------------------------------


def _active_complex(d: Discretization) -> np.ndarray:
    """Complex coefficient positions of the representable unknowns.

    Mirrors the real-packed bookkeeping of the steady module: a rigid
    component without a lift (m_max = 0 lateral components) is a ghost
    coordinate and is excluded from solves.
    """
    key = "linop-active-complex"
    if key not in d._cache:
        keep = np.ones(d.n_complex, dtype=bool)
        for j in range(3):
            carried = any(abs(b[j]) > 1e-300 for b in d.beta.values())
            keep[d.n_fluid + j] = carried
            keep[d.n_fluid + 3 + j] = carried
        d._cache[key] = np.flatnonzero(keep)
    return d._cache[key]


def _active_real(d: Discretization) -> np.ndarray:
    from .steady import _active_indices

    return _active_indices(d)


# -- weak matrices ---------------------------------------------------------------


def transport_tail(d: Discretization, tau: np.ndarray) -> np.ndarray:
    """Rigid momentum-flux closure of the transport term tau . grad.

    Transport is skew only together with the flux of rigid momentum through
    the sphere surface: the dual pairing acquires (4 pi / 3)(sigma_w x tau)
    on the translation test components.  Returned as a full-size matrix with
    the 3 x 3 coupling in the rigid tail.
    """
    D = np.zeros((d.n_complex, d.n_complex), dtype=complex)
    t = np.asarray(tau, dtype=float)
    base = d.n_fluid
    for j in range(3):
        ej = np.zeros(3)
        ej[j] = 1.0
        D[base : base + 3, base + 3 + j] = _FLUX * np.cross(ej, t)
    return D


def _transport_full(d: Discretization, tau: np.ndarray) -> np.ndarray:
    """Dual matrix of w -> tau . grad w including the rigid flux tail."""
    t = np.asarray(tau, dtype=float)
    mag = float(np.linalg.norm(t))
    if mag == 0.0:
        return np.zeros((d.n_complex, d.n_complex), dtype=complex)
    ex = np.zeros(3)
    ex[0] = 1.0
    if np.linalg.norm(t - mag * ex) <= 1e-12 * mag:
        return mag * transport_matrix(d, rigid_term=True, mass_t=_FLUX)
    # off-axis direction: advect by the constant field tau
    zero_grad = np.zeros((3, 3, d.n_q, d.n_theta, d.n_phi))
    adv = np.broadcast_to(
        t[:, None, None, None], (3, d.n_q, d.n_theta, d.n_phi)
    ).copy()
    return linearized_convection(d, zero_grad, adv) + transport_tail(d, t)


def weak_matrix(kind: str, s_c: SteadyState, d: Discretization, p: PhysicalParams) -> np.ndarray:
    """Assembled dual-pairing matrix of L0, K, or L2 about the state s_c.

    Conventions: u^H (weak_matrix @ w) equals the mass-weighted inner
    product of the operator applied to w against u, so the L0 matrix is
    dissipation minus Galilei-scaled transport and its Hermitian part is
    exactly the dissipation.
    """
    lam = s_c.galilei
    if kind == "L0":
        return dissipation_matrix(d) - lam * _transport_full(d, s_c.tau0)
    if kind == "K":
        if lam == 0.0:
            return np.zeros((d.n_complex, d.n_complex), dtype=complex)
        grad = d.synth_grad(s_c.v0.data)
        base = d.synth(s_c.v0.data)
        # dual[(chi_w - w).(-lam grad v) + lam v . grad w]
        return linearized_convection(d, -lam * grad, lam * base)
    if kind == "L2":
        return weak_matrix("L0", s_c, d, p) + weak_matrix("K", s_c, d, p)
    raise ValueError(f"unknown operator kind {kind!r}")


# -- strong (matrix-free) routes ---------------------------------------------------


def apply_Delta_tilde(w: CoupledField, d: Discretization, p: PhysicalParams) -> RawField:
    """Negative Laplacian in the fluid with traction-driven rigid part.

    The rigid components are the mass- and inertia-scaled viscous force and
    torque on the sphere, so that the mass-weighted pairing against any
    coupled test field equals twice the strain-rate product (the boundary
    terms of the Green identity cancel against the tractions).
    """
    grid = -d.synth_lap(w.data)
    F, G = viscous_traction(w, d)
    return RawField(d, grid, F / p.mass, G / p.inertia)


def _l0_raw(w: CoupledField, lam: float, tau: np.ndarray, d: Discretization, p: PhysicalParams) -> RawField:
    raw = apply_Delta_tilde(w, d, p)
    if lam != 0.0 and np.linalg.norm(tau) > 0.0:
        g = d.synth_grad(w.data)
        raw.grid = raw.grid - lam * np.einsum(
            "i,ij...->j...", tau.astype(complex), g
        )
        # coefficient-space image of the rigid flux tail
        raw.chi = raw.chi - lam * np.cross(w.sigma, tau) / p.density_ratio
    return raw


def apply_L0(w: CoupledField, s_c: SteadyState, d: Discretization, p: PhysicalParams) -> CoupledField:
    """-lam tau . grad w plus the projected Stokes part, as a coupled field."""
    return project_H(_l0_raw(w, s_c.galilei, s_c.tau0, d, p), p)


def _k_raw(
    w: CoupledField,
    lam: float,
    base_grid: np.ndarray,
    base_grad: np.ndarray,
    d: Discretization,
) -> RawField:
    gw = d.synth_grad(w.data)
    wg = d.synth(w.data)
    adv = wg - w.chi[:, None, None, None]
    grid = lam * (
        np.einsum("i...,ij...->j...", base_grid, gw)
        + np.einsum("i...,ij...->j...", adv, base_grad)
    )
    return RawField(d, grid, np.zeros(3, dtype=complex), np.zeros(3, dtype=complex))


def apply_K(w: CoupledField, s_c: SteadyState, d: Discretization, p: PhysicalParams) -> CoupledField:
    """Projected convective coupling lam (v_c . grad w + (w - chi_w) . grad v_c)."""
    if s_c.galilei == 0.0:
        return d.zero_field()
    base_grid = d.synth(s_c.v0.data)
    base_grad = d.synth_grad(s_c.v0.data)
    return project_H(_k_raw(w, s_c.galilei, base_grid, base_grad, d), p)


def apply_L2(w: CoupledField, s_c: SteadyState, d: Discretization, p: PhysicalParams) -> CoupledField:
    """Full linearization: transport + Stokes + convective coupling, projected once."""
    raw = _l0_raw(w, s_c.galilei, s_c.tau0, d, p)
    if s_c.galilei != 0.0:
        kr = _k_raw(
            w, s_c.galilei, d.synth(s_c.v0.data), d.synth_grad(s_c.v0.data), d
        )
        raw.grid = raw.grid + kr.grid
    return project_H(raw, p)


@dataclass
class LinearOperatorHandle:
    """Matrix-free action of one linearized operator, with optional matrix.

    The handle pre-synthesizes the base-state grids so repeated applications
    avoid re-expanding the steady solution; ``matrix`` (when assembled) is
    the dual-pairing form, i.e. gram^-1 @ matrix reproduces the action.
    """

    kind: str
    galilei: float
    base_tag: str
    d: Discretization
    p: PhysicalParams
    action: Callable[[CoupledField], CoupledField]
    matrix: np.ndarray | None = None

    def __call__(self, w: CoupledField) -> CoupledField:
        return self.action(w)


def operator_handle(
    kind: str,
    s_c: SteadyState,
    d: Discretization,
    p: PhysicalParams,
    assemble: bool = False,
) -> LinearOperatorHandle:
    """Build a reusable handle for L0, K, or L2 about s_c."""
    lam = s_c.galilei
    tau = s_c.tau0
    need_base = kind in ("K", "L2") and lam != 0.0
    base_grid = d.synth(s_c.v0.data) if need_base else None
    base_grad = d.synth_grad(s_c.v0.data) if need_base else None

    def action(w: CoupledField) -> CoupledField:
        if kind == "L0":
            return project_H(_l0_raw(w, lam, tau, d, p), p)
        if kind == "K":
            if lam == 0.0:
                return d.zero_field()
            return project_H(_k_raw(w, lam, base_grid, base_grad, d), p)
        raw = _l0_raw(w, lam, tau, d, p)
        if lam != 0.0:
            raw.grid = raw.grid + _k_raw(w, lam, base_grid, base_grad, d).grid
        return project_H(raw, p)

    if kind not in ("L0", "K", "L2"):
        raise ValueError(f"unknown operator kind {kind!r}")
    mat = weak_matrix(kind, s_c, d, p) if assemble else None
    tag = f"galilei={s_c.galilei:.12g};residual={s_c.residual_norm:.3e}"
    return LinearOperatorHandle(kind, lam, tag, d, p, action, mat)


# -- resolvent ---------------------------------------------------------------------


def _dual_vector(rhs: CoupledField | RawField, d: Discretization, p: PhysicalParams) -> np.ndarray:
    """Weighted dual coefficients of a coupled or raw right-hand side."""
    if isinstance(rhs, CoupledField):
        return gram_matrix(d, p) @ rhs.data
    out = d.dual(np.asarray(rhs.grid, dtype=complex))
    out[d.chi_slice] += p.mass * np.asarray(rhs.chi, dtype=complex)
    out[d.sigma_slice] += p.inertia * np.asarray(rhs.sigma, dtype=complex)
    return out


def resolvent_solve(
    rhs: CoupledField | RawField,
    zeta: float,
    s_c: SteadyState,
    d: Discretization,
    p: PhysicalParams,
    *,
    rtol: float = 1e-10,
) -> CoupledField:
    """Solve (L0 + i zeta) u = rhs on the coupled space.

    A raw rhs is admitted through its projection (the weak problem only sees
    the coupled-space component).  The solve is certified: the relative
    residual in the operator norm must come out below ``rtol``.
    """
    if zeta == 0.0:
        raise ValueError("zeta must be nonzero; the shifted operator degenerates")
    G = gram_matrix(d, p)
    B0 = weak_matrix("L0", s_c, d, p)
    b = _dual_vector(rhs, d, p)
    ac = _active_complex(d)
    if len(ac) < d.n_complex:
        ghost = np.setdiff1d(np.arange(d.n_complex), ac)
        if np.max(np.abs(b[ghost]), initial=0.0) > 1e-12 * max(
            1.0, float(np.max(np.abs(b)))
        ):
            raise ValueError(
                "rhs has rigid components outside the representable space; "
                "raise m_max"
            )
    A = (B0 + 1j * zeta * G)[np.ix_(ac, ac)]
    sol = np.zeros(d.n_complex, dtype=complex)
    try:
        sol[ac] = sla.solve(A, b[ac])
    except sla.LinAlgError as exc:
        raise RuntimeError(f"resolvent solve failed at zeta={zeta:g}") from exc
    # residual of the operator equation, measured through gram^-1
    y = (B0 + 1j * zeta * G) @ sol - b
    cf = sla.cho_factor(G[np.ix_(ac, ac)])
    rnorm = np.sqrt(abs(np.conj(y[ac]) @ sla.cho_solve(cf, y[ac])))
    bnorm = np.sqrt(abs(np.conj(b[ac]) @ sla.cho_solve(cf, b[ac])))
    if rnorm > rtol * max(bnorm, 1e-300):
        raise RuntimeError(
            f"resolvent residual {rnorm / max(bnorm, 1e-300):.2e} exceeds {rtol:g}"
        )
    return d.field_from(sol)


# -- spectrum ----------------------------------------------------------------------


@dataclass
class SpectrumResult:
    """Eigenpairs of the full linearization nearest a complex shift."""

    eigs: list  # (nu: complex, w: CoupledField, residual: float)
    shift: complex
    galilei: float

    def eigenvalues(self) -> np.ndarray:
        return np.array([e[0] for e in self.eigs])

    def to_json(self, include_vectors: bool = False) -> dict:
        out = {
            "schema": "spectrum-v1",
            "galilei": self.galilei,
            "shift": [self.shift.real, self.shift.imag],
            "eigenvalues": [[e[0].real, e[0].imag] for e in self.eigs],
            "residuals": [e[2] for e in self.eigs],
        }
        if include_vectors:
            out["vectors"] = [
                {
                    "re": e[1].data.real.tolist(),
                    "im": e[1].data.imag.tolist(),
                }
                for e in self.eigs
            ]
        return out

    def save(self, path, include_vectors: bool = False) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(include_vectors), fh)


def _embed_active(d: Discretization, act: np.ndarray, v: np.ndarray) -> CoupledField:
    full = np.zeros(d.n_real, dtype=complex)
    full[act] = v
    return d.unpack_complex(full)


def _certify(Br, Gr, cf, nu, v) -> float:
    y = Br @ v - nu * (Gr @ v)
    r = np.sqrt(abs(np.conj(y) @ sla.cho_solve(cf, y)))
    n = np.sqrt(abs(np.conj(v) @ (Gr @ v)))
    return float(r / n)


def _assembled_real(s_c: SteadyState, d: Discretization, p: PhysicalParams):
    """Real-packed (B, G) restricted to the representable unknowns."""
    act = _active_real(d)
    Br = d.real_matrix(weak_matrix("L2", s_c, d, p))[np.ix_(act, act)]
    Gr = d.real_matrix(gram_matrix(d, p))[np.ix_(act, act)]
    return Br, Gr, act


def spectrum_near_axis(
    s_c: SteadyState,
    d: Discretization,
    p: PhysicalParams,
    shift: complex = 0.0,
    n_eigs: int = 10,
    *,
    method: str = "auto",
    res_tol: float = 1e-8,
    _mats=None,
) -> SpectrumResult:
    """Eigenpairs of the full linearization nearest ``shift``.

    Works on the real packing restricted to representable unknowns, so the
    spectrum comes closed under conjugation; eigenvectors come back as
    complex coupled fields normalized in the weighted norm.  Uses
    shift-inverted Arnoldi on large problems and dense QZ otherwise; every
    reported pair carries a certified residual.  ``_mats`` lets callers
    that scan several shifts reuse the assembled matrices.
    """
    Br, Gr, act = _mats if _mats is not None else _assembled_real(s_c, d, p)
    n = len(act)
    n_eigs = min(n_eigs, n - 2)
    cf = sla.cho_factor(Gr)
    if method == "auto":
        method = "arpack" if n > 900 and n_eigs < n // 4 else "dense"

    def dense_pairs():
        nus, V = sla.eig(Br, Gr)
        order = np.argsort(np.abs(nus - shift))[:n_eigs]
        return nus[order], V[:, order]

    if method == "dense":
        nus, V = dense_pairs()
    elif method == "arpack":
        try:
            nus, V = spla.eigs(
                Br.astype(complex), k=n_eigs, M=Gr.astype(complex), sigma=shift
            )
        except (spla.ArpackError, spla.ArpackNoConvergence):
            nus, V = dense_pairs()
            method = "dense"
    else:
        raise ValueError(f"unknown eigensolver method {method!r}")

    # close under conjugation; real matrices make the partner vector free
    pairs = [(complex(nu), V[:, j]) for j, nu in enumerate(nus)]
    have = np.array(nus, dtype=complex)
    for nu, v in list(pairs):
        if abs(nu.imag) > 1e-12 * max(1.0, abs(nu)):
            if np.min(np.abs(np.conj(nu) - have)) > 1e-10 * max(1.0, abs(nu)):
                pairs.append((np.conj(nu), np.conj(v)))
                have = np.append(have, np.conj(nu))

    resids = [_certify(Br, Gr, cf, nu, v) for nu, v in pairs]
    if max(resids) > res_tol:
        if method == "arpack":
            # recompute densely rather than patching single pairs
            return spectrum_near_axis(
                s_c, d, p, shift, n_eigs, method="dense", res_tol=res_tol,
                _mats=(Br, Gr, act),
            )
        bad = resids.index(max(resids))
        raise EigensolverError(
            f"eigenpair residual {max(resids):.2e} above {res_tol:g} "
            f"at nu={pairs[bad][0]:.6g}"
        )

    out = []
    for (nu, v), res in zip(pairs, resids):
        w = _embed_active(d, act, v)
        nrm = np.sqrt(inner_rigid(w, w, p).real)
        w.data /= nrm
        out.append((nu, w, res))
    out.sort(key=lambda e: abs(e[0].real))
    return SpectrumResult(out, complex(shift), s_c.galilei)


# -- critical-point search ----------------------------------------------------------


@dataclass
class SpectrumSample:
    """Eigenvalues and eigenvector columns from one spectrum evaluation."""

    nus: np.ndarray
    vecs: np.ndarray


@dataclass
class CriticalPoint:
    """A simple Hopf crossing of the linearized spectrum."""

    lambda_c: float
    zeta0: float
    w0: object  # CoupledField from the full pipeline; bare vector from injected providers
    dnu_dlambda: complex
    nonresonance_report: list
    simplicity_gap: float
    re_nu: float
    nu_bracket: tuple

    def to_json(self, include_vector: bool = False) -> dict:
        out = {
            "schema": "critical-point-v1",
            "lambda_c": self.lambda_c,
            "zeta0": self.zeta0,
            "dnu_dlambda": [self.dnu_dlambda.real, self.dnu_dlambda.imag],
            "nonresonance": self.nonresonance_report,
            "simplicity_gap": self.simplicity_gap,
            "re_nu_at_crossing": self.re_nu,
            "nu_bracket": [[z.real, z.imag] for z in self.nu_bracket],
        }
        if include_vector and isinstance(self.w0, CoupledField):
            out["w0"] = {
                "re": self.w0.data.real.tolist(),
                "im": self.w0.data.imag.tolist(),
            }
        elif include_vector:
            out["w0"] = {
                "re": np.real(self.w0).tolist(),
                "im": np.imag(self.w0).tolist(),
            }
        return out

    def save(self, path, include_vector: bool = False) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(include_vector), fh)


class _PipelineProvider:
    """Steady-solve plus spectrum at each Galilei number, with warm starts."""

    def __init__(self, p, d, n_eigs, shift_scan, method):
        self.p, self.d = p, d
        self.n_eigs = n_eigs
        self.shift_scan = shift_scan
        self.method = method
        self.states: dict[float, SteadyState] = {}
        self.act = _active_real(d)
        self.Gr = d.real_matrix(gram_matrix(d, p))[np.ix_(self.act, self.act)]

    def state(self, lam: float) -> SteadyState:
        if lam not in self.states:
            guess = None
            if self.states:
                guess = self.states[min(self.states, key=lambda x: abs(x - lam))]
            self.states[lam] = steady_solve(lam, self.p, self.d, guess)
        return self.states[lam]

    def overlap(self, v1: np.ndarray, v2: np.ndarray) -> float:
        return abs(np.conj(v1) @ (self.Gr @ v2))

    def _pack(self, w: CoupledField) -> np.ndarray:
        re = self.d.pack_real(CoupledField(self.d, w.data.real.astype(complex)))
        im = self.d.pack_real(CoupledField(self.d, w.data.imag.astype(complex)))
        return (re + 1j * im)[self.act]

    def __call__(self, lam: float, extra_shifts: tuple = ()) -> SpectrumSample:
        s = self.state(lam)
        mats = _assembled_real(s, self.d, self.p)
        scale = max(1.0, lam * float(np.linalg.norm(s.tau0)))
        shifts = [1j * h * scale for h in self.shift_scan]
        shifts += [complex(z) for z in extra_shifts]
        nus: list[complex] = []
        vecs: list[np.ndarray] = []
        for sh in shifts:
            res = spectrum_near_axis(
                s, self.d, self.p, sh, self.n_eigs, method=self.method, _mats=mats
            )
            for nu, w, _ in res.eigs:
                if nus and np.min(np.abs(nu - np.array(nus))) < 1e-8 * (1 + abs(nu)):
                    continue
                nus.append(nu)
                vecs.append(self._pack(w))
        return SpectrumSample(np.array(nus), np.column_stack(vecs))

    def to_field(self, v: np.ndarray) -> CoupledField:
        return _embed_active(self.d, self.act, v)


def _match(sample: SpectrumSample, vref: np.ndarray, overlap) -> int:
    scores = [overlap(vref, sample.vecs[:, j]) for j in range(sample.vecs.shape[1])]
    return int(np.argmax(scores))


def find_critical(
    lambda_lo: float,
    lambda_hi: float,
    p: PhysicalParams,
    d: Discretization,
    *,
    provider: Callable | None = None,
    overlap: Callable | None = None,
    to_field: Callable | None = None,
    n_eigs: int = 10,
    k_max: int = 5,
    xtol: float = 1e-9,
    gap_factor: float = 1e-3,
    transversality_threshold: float = 1e-6,
    h_factor: float = 1e-4,
    shift_scan: tuple = (0.0, 0.5, 1.0, 2.0),
    method: str = "auto",
) -> CriticalPoint:
    """Locate the Hopf crossing of min Re nu on a Galilei interval.

    Runs bisection/secant (Brent) on the tracked minimum real part, then
    certifies the crossing: simplicity gap, transversality by a centered
    difference with eigenvector-overlap continuation, and a nonresonance
    sweep of the multiples k zeta_0 for k = 2..k_max against the computed
    spectrum.  A synthetic ``provider`` may replace the steady-plus-spectrum
    pipeline (eigenvalue model oracles, coarse screening).
    """
    if provider is None:
        pipe = _PipelineProvider(p, d, n_eigs, shift_scan, method)
        provider = pipe
        overlap = pipe.overlap
        to_field = pipe.to_field
    if overlap is None:
        def overlap(a, b):
            return abs(np.vdot(a, b))
    if to_field is None:
        def to_field(v):
            return v

    memo: dict = {}

    def sample(lam: float, extra_shifts: tuple = ()) -> SpectrumSample:
        key = (lam, extra_shifts)
        if key not in memo:
            try:
                memo[key] = provider(lam, extra_shifts=extra_shifts)
            except TypeError:
                memo[key] = provider(lam)
        return memo[key]

    def min_re(lam: float) -> float:
        return float(np.min(sample(lam).nus.real))

    f_lo, f_hi = min_re(lambda_lo), min_re(lambda_hi)
    if f_lo <= 0.0:
        raise NoCrossingError(
            f"branch already unstable at lambda={lambda_lo:g} (min Re nu = {f_lo:.3e})"
        )
    if f_hi > 0.0:
        raise NoCrossingError(
            f"min Re nu stays positive on [{lambda_lo:g}, {lambda_hi:g}] "
            f"(endpoint value {f_hi:.3e})"
        )
    lam_c = float(brentq(min_re, lambda_lo, lambda_hi, xtol=xtol, rtol=8.9e-16))

    base = sample(lam_c)
    j0 = int(np.argmin(np.abs(base.nus.real)))
    nu0 = complex(base.nus[j0])
    if nu0.imag < 0.0:
        # canonical representative of the conjugate pair
        jc = int(np.argmin(np.abs(base.nus - np.conj(nu0))))
        if abs(base.nus[jc] - np.conj(nu0)) < 1e-8 * (1 + abs(nu0)):
            j0, nu0 = jc, complex(base.nus[jc])
    zeta0 = abs(nu0.imag)
    if zeta0 <= 1e-10 * max(1.0, abs(nu0)):
        raise NoCrossingError(
            f"crossing at lambda={lam_c:.6g} is steady-type (Im nu = {nu0.imag:.3e}); "
            "no Hopf pair on this interval"
        )
    v0 = base.vecs[:, j0]

    # simplicity: distance from nu0 to every other computed eigenvalue
    others = np.delete(base.nus, j0)
    gap = float(np.min(np.abs(others - nu0))) if len(others) else np.inf
    if gap <= 1e-6 * abs(nu0):
        raise MultipleCrossingError(
            f"eigenvalue gap {gap:.3e} at lambda={lam_c:.6g} below simplicity threshold"
        )
    # a second pair crossing within resolution
    mask = np.abs(others - np.conj(nu0)) > 1e-8 * (1 + abs(nu0))
    if np.any(np.abs(others.real[mask]) < max(1e-8, 1e-6 * abs(nu0))):
        raise MultipleCrossingError(
            f"second eigenpair on the axis at lambda={lam_c:.6g}"
        )

    h = h_factor * max(lam_c, 1.0)
    sm, sp = sample(lam_c - h), sample(lam_c + h)
    num = complex(sm.nus[_match(sm, v0, overlap)])
    nup = complex(sp.nus[_match(sp, v0, overlap)])
    dnu = (nup - num) / (2.0 * h)
    if abs(dnu.real) < transversality_threshold:
        raise TransversalityError(
            f"|Re dnu/dlambda| = {abs(dnu.real):.3e} below {transversality_threshold:g}"
        )
    if num.real * nup.real >= 0.0:
        raise TransversalityError(
            f"Re nu does not straddle zero across lambda_c: "
            f"{num.real:.3e}, {nup.real:.3e}"
        )

    # nonresonance of the frequency multiples against the spectrum near them
    extra = tuple(1j * k * zeta0 for k in range(2, k_max + 1))
    wide = sample(lam_c, extra_shifts=extra)
    all_nus = np.concatenate([wide.nus, np.conj(wide.nus)])
    report = []
    for k in range(2, k_max + 1):
        target = 1j * k * zeta0
        dist = float(np.min(np.abs(all_nus - target)))
        report.append({"k": k, "distance": dist, "ok": dist > gap_factor * zeta0})
    bad = [r for r in report if not r["ok"]]
    if bad:
        raise ResonanceError(
            f"k={bad[0]['k']} multiple of zeta0 within {bad[0]['distance']:.3e} "
            f"of the spectrum at lambda={lam_c:.6g}",
            report=report,
        )

    w0 = _fix_phase(to_field(v0), p)
    return CriticalPoint(
        lambda_c=lam_c,
        zeta0=zeta0,
        w0=w0,
        dnu_dlambda=dnu,
        nonresonance_report=report,
        simplicity_gap=gap,
        re_nu=float(nu0.real),
        nu_bracket=(num, nup),
    )


def _fix_phase(w0, p: PhysicalParams):
    """Normalize and rotate: largest rigid component real positive.

    Falls back to the largest field coefficient when the rigid part is
    negligible; bare vectors (injected providers) use the largest entry.
    """
    if isinstance(w0, CoupledField):
        w = w0.copy()
        nrm = np.sqrt(inner_rigid(w, w, p).real)
        w.data /= nrm
        rigid = np.concatenate([w.chi, w.sigma])
        j = int(np.argmax(np.abs(rigid)))
        pivot = rigid[j]
        if abs(pivot) <= 1e-12:
            pivot = w.data[int(np.argmax(np.abs(w.data)))]
        w.data *= np.conj(pivot) / abs(pivot)
        return w
    v = np.asarray(w0, dtype=complex)
    v = v / np.linalg.norm(v)
    pivot = v[int(np.argmax(np.abs(v)))]
    return v * (np.conj(pivot) / abs(pivot))
