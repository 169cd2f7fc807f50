"""Steady free falls and their continuation in the Galilei number.

A steady state is a real coupled field v solving the Galerkin system

    2 (D(v), D(phi)) - lam * chi_phi . e1 - lam * ((chi_v - v) . grad v, phi) = 0

for every coupled basis function phi, together with the pressure recovered
from the strong momentum balance grad p = lap v + lam (chi_v - v) . grad v.
Newton iteration with the exact Jacobian runs in the real packing; natural
continuation warm-starts each Galilei step, halves it when Newton stalls,
and monitors the smallest singular value of the steady linearization for
folds or symmetry-breaking branch points.

At m_max = 0 the rigid components orthogonal to the polar axis have no
boundary lift, so their columns in every operator vanish identically.  The
solver therefore works on the "active" real unknowns only; the excluded
components are pinned to zero, which is exactly the axisymmetric symmetry
class of the falling-sphere problem.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .assembly import (
    convection_dual,
    convection_grid,
    dissipation_matrix,
    linearized_convection,
)
from .discretization import CoupledField, Discretization
from .pressure import PressureField, recover_pressure
from .spaces import PhysicalParams

__all__ = [
    "SteadyState",
    "BranchPoint",
    "SteadyOperator",
    "ConvergenceError",
    "DegenerateStateError",
    "BranchTerminated",
    "steady_residual",
    "steady_solve",
    "steady_branch",
    "assemble_L1",
    "kappa_one",
    "save_state",
    "load_state",
]


class ConvergenceError(RuntimeError):
    """Newton failed to reach the residual tolerance.

    Carries the Galilei number, the last residual norm and the iteration
    count so continuation drivers can react (halve the step, report).
    """

    def __init__(self, galilei, residual_norm, iterations, message=None):
        self.galilei = galilei
        self.residual_norm = residual_norm
        self.iterations = iterations
        super().__init__(
            message
            or f"Newton stalled at lambda={galilei:g}: residual {residual_norm:.3e} "
            f"after {iterations} iterations"
        )


class DegenerateStateError(RuntimeError):
    """Solver produced tau = 0 at positive Galilei number (not a free fall)."""


class BranchTerminated(RuntimeError):
    """Continuation stopped early; carries the points computed so far."""

    def __init__(self, points, galilei, message, sigma_min=None):
        self.points = points
        self.galilei = galilei
        self.sigma_min = sigma_min
        super().__init__(message)


@dataclass
class SteadyState:
    """One converged steady free fall at a fixed Galilei number."""

    v0: CoupledField
    p0: PressureField
    tau0: np.ndarray
    omega0: np.ndarray
    galilei: float
    residual_norm: float
    energy_gap: float


@dataclass
class BranchPoint:
    """A branch sample: the state, its lambda-derivative, and diagnostics."""

    state: SteadyState
    tangent: CoupledField
    axis_aligned: bool
    sigma_min: float


@dataclass
class SteadyOperator:
    """Real-packed steady linearization on its active unknowns.

    ``indices`` maps rows/columns of ``matrix`` to positions in the real
    packing of the discretization.  When ``restricted`` the translation
    components orthogonal to the gravity direction are dropped as well,
    which realizes the symmetry subspace of axis-aligned falls.
    """

    d: Discretization
    galilei: float
    indices: np.ndarray
    matrix: np.ndarray
    garding_constant: float
    restricted: bool

    def apply(self, u: CoupledField) -> np.ndarray:
        """Real-packed dual of the linearization at u; dropped rows are zero."""
        rho = self.d.pack_real(u)
        out = np.zeros(self.d.n_real)
        out[self.indices] = self.matrix @ rho[self.indices]
        return out

    def sigma_min(self) -> float:
        return float(sla.svdvals(self.matrix)[-1])


# -- index bookkeeping ---------------------------------------------------------


def _active_indices(d: Discretization) -> np.ndarray:
    """Real-packing positions of the representable unknowns.

    A rigid component is active when some azimuthal lift carries it; the
    translation and rotation lifts share the same beta coefficient pattern.
    """
    key = "steady-active"
    if key not in d._cache:
        keep = np.ones(d.n_real, dtype=bool)
        base = d.n_real - 6
        for j in range(3):
            carried = any(abs(b[j]) > 1e-300 for b in d.beta.values())
            keep[base + j] = carried
            keep[base + 3 + j] = carried
        d._cache[key] = np.flatnonzero(keep)
    return d._cache[key]


def _gravity_dual(d: Discretization, e1: np.ndarray) -> np.ndarray:
    g = np.zeros(d.n_complex, dtype=complex)
    g[d.chi_slice] = e1
    return g


def _check_representable(d, e1, act):
    gr = d.pack_dual(_gravity_dual(d, e1))
    mask = np.ones(d.n_real, dtype=bool)
    mask[act] = False
    if np.any(np.abs(gr[mask]) > 1e-14):
        raise ValueError(
            "gravity direction has components outside the representable rigid "
            "space; raise m_max to at least 1 for off-axis directions"
        )


# -- residual and Jacobian -----------------------------------------------------


def steady_residual(v: CoupledField, lam: float, p: PhysicalParams) -> CoupledField:
    """Dual coefficients of the steady momentum balance at (v, lam).

    The returned CoupledField holds dual-pairing coefficients: its ``chi``
    entries are the rigid-translation test components, so at v = 0 they
    equal -lam * e1 and everything else vanishes.
    """
    d = v.d
    R = dissipation_matrix(d) @ v.data - lam * _gravity_dual(d, p.e1)
    if lam != 0.0:
        R -= lam * convection_dual(d, v)
    return CoupledField(d, R)


def _jacobian(d: Discretization, v: CoupledField, lam: float) -> np.ndarray:
    J = dissipation_matrix(d).astype(complex)
    if lam != 0.0:
        grad = d.synth_grad(v.data)
        adv = v.chi[:, None, None, None] - d.synth(v.data)
        J = J - lam * linearized_convection(d, grad, adv)
    return J


def kappa_one(d: Discretization, e1=(1.0, 0.0, 0.0)) -> float:
    """Sharp discrete constant in |chi_u . e1| <= kappa_1 ||D(u)||_2.

    Cauchy-Schwarz in the dissipation metric makes this the square root of
    2 g^T K^-1 g with g the gravity dual; equality holds for the Stokes
    solution, so steady states satisfy 2||D(v)|| <= lam * kappa_1.
    """
    e1 = np.asarray(e1, dtype=float)
    key = ("kappa1", tuple(np.round(e1, 14)))
    if key not in d._cache:
        act = _active_indices(d)
        _check_representable(d, e1, act)
        Kr = d.real_matrix(dissipation_matrix(d))[np.ix_(act, act)]
        g = d.pack_dual(_gravity_dual(d, e1))[act]
        cf = sla.cho_factor(Kr)
        d._cache[key] = float(np.sqrt(2.0 * g @ sla.cho_solve(cf, g)))
    return d._cache[key]


def _finalize(v, lam, p, d, residual_norm):
    """Postcondition checks, pressure recovery, and state packaging."""
    E = float(np.vdot(v.data, dissipation_matrix(d) @ v.data).real)
    tau = v.chi.real.copy()
    omega = v.sigma.real.copy()
    gap = abs(E - lam * float(tau @ p.e1))
    if gap > 1e-8 * (1.0 + lam**2):
        raise ConvergenceError(
            lam, residual_norm, 0, f"energy identity violated: gap {gap:.3e}"
        )
    bound = lam * kappa_one(d, p.e1)
    if np.sqrt(max(2.0 * E, 0.0)) > bound * (1.0 + 1e-8) + 1e-13:
        raise ConvergenceError(
            lam,
            residual_norm,
            0,
            f"a-priori dissipation bound violated: {np.sqrt(2 * E):.6e} > {bound:.6e}",
        )
    if lam > 0.0 and np.linalg.norm(tau) < 1e-12 * lam:
        raise DegenerateStateError(
            f"tau = 0 at lambda={lam:g}: not a free fall (zero-drag state)"
        )
    defect = lam * convection_grid(d, v) if lam != 0.0 else None
    p0 = recover_pressure(v, d, grid_defect=defect)
    return SteadyState(
        v0=v,
        p0=p0,
        tau0=tau,
        omega0=omega,
        galilei=float(lam),
        residual_norm=float(residual_norm),
        energy_gap=float(gap),
    )


def steady_solve(
    lam: float,
    p: PhysicalParams,
    d: Discretization,
    guess: SteadyState | CoupledField | None = None,
    *,
    tol: float = 1e-10,
    max_iter: int = 30,
) -> SteadyState:
    """Newton-solve the steady system at Galilei number lam.

    Starts from ``guess`` (a SteadyState or bare CoupledField) or from rest.
    The exact Jacobian K - lam * dN is assembled in the real packing each
    iteration; a simple residual-monotone backtracking line search guards
    the step.  Raises ConvergenceError when stalled and DegenerateStateError
    for a zero-drag outcome at lam > 0.
    """
    if lam < 0.0:
        raise ValueError("Galilei number must be nonnegative")
    act = _active_indices(d)
    _check_representable(d, p.e1, act)
    if lam == 0.0:
        return _finalize(d.zero_field(), 0.0, p, d, 0.0)

    if guess is None:
        v = d.zero_field()
    elif isinstance(guess, SteadyState):
        v = guess.v0.copy()
    else:
        v = guess.copy()

    K = dissipation_matrix(d)
    gvec = _gravity_dual(d, p.e1)

    def residual(f):
        return K @ f.data - lam * gvec - lam * convection_dual(d, f)

    R = residual(v)
    rn = float(np.linalg.norm(d.pack_dual(R)[act]))
    iterations = 0
    while rn >= tol:
        if iterations >= max_iter:
            raise ConvergenceError(lam, rn, iterations)
        Jr = d.real_matrix(_jacobian(d, v, lam))[np.ix_(act, act)]
        rhs = -d.pack_dual(R)[act]
        try:
            delta = sla.solve(Jr, rhs)
        except sla.LinAlgError as exc:
            raise ConvergenceError(
                lam, rn, iterations, f"singular Jacobian at lambda={lam:g}"
            ) from exc
        rho = d.pack_real(v)
        step = 1.0
        for _ in range(25):
            trial = rho.copy()
            trial[act] += step * delta
            v_try = d.unpack_real(trial)
            R_try = residual(v_try)
            rn_try = float(np.linalg.norm(d.pack_dual(R_try)[act]))
            if rn_try <= (1.0 - 0.25 * step) * rn or rn_try < tol:
                break
            step *= 0.5
        else:
            raise ConvergenceError(lam, rn, iterations, None)
        v, R, rn = v_try, R_try, rn_try
        iterations += 1
    return _finalize(v, lam, p, d, rn)


# -- linearization handle ------------------------------------------------------


def _aligned(tau: np.ndarray, e1: np.ndarray) -> bool:
    n = np.linalg.norm(tau)
    if n == 0.0:
        return True
    return bool(np.linalg.norm(tau - (tau @ e1) * e1) <= 1e-10 * n)


def assemble_L1(
    s: SteadyState,
    p: PhysicalParams,
    d: Discretization | None = None,
    *,
    restrict: bool | None = None,
) -> SteadyOperator:
    """Real-packed steady linearization about the converged state s.

    This is the exact derivative of the steady residual: dissipation minus
    lam times the linearized convection.  With ``restrict`` unset it drops
    the translation components orthogonal to gravity exactly when the state
    is axis-aligned, keeping the operator on the symmetric solution family;
    pass True/False to force either behaviour.

    The returned handle records a Garding constant C built from the grid
    maximum of |grad v| and the quadrature volume, for which the bound
    <L1 u, u> >= 2||D(u)||^2 - lam * C * ||u||^2 holds discretely.
    """
    if d is None:
        d = s.v0.d
    elif d is not s.v0.d:
        raise ValueError("state was computed on a different discretization")
    lam = s.galilei
    if restrict is None:
        restrict = _aligned(s.tau0, p.e1)
    keep = np.zeros(d.n_real, dtype=bool)
    keep[_active_indices(d)] = True
    if restrict:
        base = d.n_real - 6
        e1 = p.e1
        for j in range(3):
            if abs(e1[j]) < 1e-14:
                keep[base + j] = False
    idx = np.flatnonzero(keep)
    Jr = d.real_matrix(_jacobian(d, s.v0, lam))[np.ix_(idx, idx)]
    if lam != 0.0:
        gmax = float(np.max(np.linalg.norm(d.synth_grad(s.v0.data), axis=(0, 1))))
        vol = float(np.sum(d.w_vol))
        C = gmax * (np.sqrt(vol / p.mass) + 1.0)
    else:
        C = 0.0
    return SteadyOperator(
        d=d,
        galilei=lam,
        indices=idx,
        matrix=Jr,
        garding_constant=C,
        restricted=bool(restrict),
    )


# -- continuation --------------------------------------------------------------


def _branch_point(state, p, d, act, gvec):
    lam = state.galilei
    Jr = d.real_matrix(_jacobian(d, state.v0, lam))[np.ix_(act, act)]
    forcing = gvec.copy()
    if lam != 0.0:
        forcing = forcing + convection_dual(d, state.v0)
    rhs = d.pack_dual(forcing)[act]
    t_act = sla.solve(Jr, rhs)
    rho = np.zeros(d.n_real)
    rho[act] = t_act
    tangent = d.unpack_real(rho)
    aligned = _aligned(state.tau0, p.e1)
    op = assemble_L1(state, p, d, restrict=aligned)
    return BranchPoint(
        state=state, tangent=tangent, axis_aligned=aligned, sigma_min=op.sigma_min()
    )


def steady_branch(
    lambda_from: float,
    lambda_to: float,
    steps: int,
    p: PhysicalParams,
    d: Discretization,
    *,
    tol: float = 1e-10,
    collapse_ratio: float = 1e-4,
    max_halvings: int = 8,
) -> list[BranchPoint]:
    """Natural-parameter continuation of the steady branch.

    Returns steps+1 BranchPoints at equispaced Galilei numbers.  Each point
    warm-starts Newton from its predecessor; a failed solve halves the
    increment (up to max_halvings).  The smallest singular value of the
    linearization is recorded per point and compared against its value at
    the branch start: a collapse below collapse_ratio stops continuation
    with a fold-or-bifurcation diagnostic carrying the points so far.
    """
    if not lambda_from < lambda_to:
        raise ValueError("need lambda_from < lambda_to")
    if steps < 1:
        raise ValueError("need at least one continuation step")
    act = _active_indices(d)
    _check_representable(d, p.e1, act)
    gvec = _gravity_dual(d, p.e1)
    lams = np.linspace(lambda_from, lambda_to, steps + 1)

    state = steady_solve(lams[0], p, d, tol=tol)
    points = [_branch_point(state, p, d, act, gvec)]
    sigma_ref = points[0].sigma_min
    for target in lams[1:]:
        cur = state
        step = target - cur.galilei
        halvings = 0
        while cur.galilei < target - 1e-14 * max(1.0, target):
            remaining = target - cur.galilei
            trial_lam = target if step >= remaining else cur.galilei + step
            try:
                cur = steady_solve(trial_lam, p, d, guess=cur, tol=tol)
            except ConvergenceError as exc:
                halvings += 1
                step *= 0.5
                if halvings > max_halvings:
                    raise BranchTerminated(
                        points,
                        cur.galilei,
                        f"Newton failed beyond lambda={cur.galilei:g} "
                        f"after {halvings - 1} step halvings",
                    ) from exc
        state = cur
        pt = _branch_point(state, p, d, act, gvec)
        points.append(pt)
        if pt.sigma_min < collapse_ratio * sigma_ref:
            raise BranchTerminated(
                points,
                state.galilei,
                f"smallest singular value of the linearization collapsed at "
                f"lambda={state.galilei:g} ({pt.sigma_min:.3e} vs "
                f"{sigma_ref:.3e} at branch start): fold or steady bifurcation",
                sigma_min=pt.sigma_min,
            )
    return points


# -- checkpoints ---------------------------------------------------------------

_SCHEMA = "steady-state-v1"


def save_state(s: SteadyState, path) -> None:
    """Write a JSON checkpoint; the pressure is recomputed on load."""
    d = s.v0.d
    doc = {
        "schema": _SCHEMA,
        "galilei": s.galilei,
        "discretization": {
            "l_max": d.l_max,
            "m_max": d.m_max,
            "n_r": d.n_r,
            "r_out": d.r_out,
        },
        "coefficients": {
            "real": s.v0.data.real.tolist(),
            "imag": s.v0.data.imag.tolist(),
        },
        "tau0": s.tau0.tolist(),
        "omega0": s.omega0.tolist(),
        "residual_norm": s.residual_norm,
        "energy_gap": s.energy_gap,
    }
    Path(path).write_text(json.dumps(doc))


def load_state(path, d: Discretization | None = None) -> SteadyState:
    """Rebuild a SteadyState from a checkpoint written by save_state."""
    doc = json.loads(Path(path).read_text())
    if doc.get("schema") != _SCHEMA:
        raise ValueError(f"unrecognized checkpoint schema: {doc.get('schema')!r}")
    dims = doc["discretization"]
    if d is None:
        d = Discretization(
            l_max=int(dims["l_max"]),
            m_max=int(dims["m_max"]),
            n_r=int(dims["n_r"]),
            r_out=float(dims["r_out"]),
        )
    else:
        mine = {"l_max": d.l_max, "m_max": d.m_max, "n_r": d.n_r, "r_out": d.r_out}
        if any(mine[k] != type(mine[k])(dims[k]) for k in mine):
            raise ValueError("checkpoint discretization does not match")
    data = np.asarray(doc["coefficients"]["real"], dtype=float) + 1j * np.asarray(
        doc["coefficients"]["imag"], dtype=float
    )
    if data.shape != (d.n_complex,):
        raise ValueError("coefficient vector length does not match discretization")
    v = CoupledField(d, data.astype(complex))
    lam = float(doc["galilei"])
    defect = lam * convection_grid(d, v) if lam != 0.0 else None
    p0 = recover_pressure(v, d, grid_defect=defect)
    return SteadyState(
        v0=v,
        p0=p0,
        tau0=np.asarray(doc["tau0"], dtype=float),
        omega0=np.asarray(doc["omega0"], dtype=float),
        galilei=lam,
        residual_norm=float(doc["residual_norm"]),
        energy_gap=float(doc["energy_gap"]),
    )
