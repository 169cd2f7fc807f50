"""Fourier-mode machinery for the time-periodic linearized fall problem.

A 2*pi-periodic solution of the coupled fluid--body system splits into
temporal Fourier modes that never talk to each other, so the heavy lifting
happens one integer frequency k at a time: six Oseen solves with rigid
boundary data produce the frequency-dependent resistance matrices, a seventh
homogeneous-boundary solve absorbs the volume forcing, and a 6x6 system
returns the rigid response.  Superposing those seven fields yields the mode,
and stacking modes yields the periodic solution together with the
energy-type ledger that certifies it.

The transport direction is pinned to the polar axis e1 of the basis; general
directions are supported only at the level of the resistance matrices, which
rotate as tensors.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import svdvals

from .assembly import OseenModeSolver, dissipation_matrix, mass_matrix, transport_matrix
from .discretization import CoupledField, Discretization
from .linop import _dual_vector, apply_L0, apply_L2
from .pressure import PressureField, recover_pressure, surface_traction
from .spaces import PhysicalParams, RawField
from .steady import SteadyState

__all__ = [
    "AuxiliarySolution",
    "ResistanceMatrices",
    "ModeSolution",
    "PeriodicSolution",
    "SingularResponseError",
    "auxiliary_solve",
    "coupling_matrices",
    "grand_identity_residual",
    "mode_solve",
    "periodic_solve",
    "apply_Q",
    "apply_Q0",
    "write_matrix_csv",
]


class SingularResponseError(RuntimeError):
    """The 6x6 body-response system lost invertibility (discretization failure)."""


def _axis_vector(axis: int) -> np.ndarray:
    if axis not in (1, 2, 3):
        raise ValueError("axis must be 1, 2 or 3")
    e = np.zeros(3)
    e[axis - 1] = 1.0
    return e


def _tau_component(tau) -> float:
    """Signed transport speed along e1; rejects off-axis vectors.

    Field-returning operations only make sense in the frame whose polar axis
    carries the transport; callers with a tilted fall direction must rotate
    their data, or stay at the matrix level (coupling_matrices does the
    rotation for them).
    """
    t = np.asarray(tau, dtype=float)
    if t.ndim == 0:
        return float(t)
    if t.shape != (3,):
        raise ValueError("transport must be a scalar or a 3-vector")
    if np.hypot(t[1], t[2]) > 1e-10 * max(1.0, abs(t[0])):
        raise ValueError(
            "transport must point along the polar axis here; rotate the frame "
            "or use coupling_matrices for general directions"
        )
    return float(t[0])


def _alignment(tau):
    """(tau1, R) with R a proper rotation mapping e1 onto the transport axis."""
    t = np.asarray(tau, dtype=float)
    if t.ndim == 0:
        return float(t), None
    if t.shape != (3,):
        raise ValueError("transport must be a scalar or a 3-vector")
    nrm = float(np.linalg.norm(t))
    if nrm == 0.0:
        return 0.0, None
    u = t / nrm
    if abs(u[0] - 1.0) < 1e-12:
        return nrm, None
    if abs(u[0] + 1.0) < 1e-12:
        return -nrm, None
    w = np.array([0.0, -u[2], u[1]])  # e1 x u
    kx = np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])
    return nrm, np.eye(3) + kx + kx @ kx / (1.0 + u[0])


def _volume_forms(d: Discretization):
    """L2, strain and axial-advection Gram matrices of the fluid content."""
    return mass_matrix(d), dissipation_matrix(d), transport_matrix(d)


def _fluid_rows(d: Discretization) -> np.ndarray:
    mask = np.ones(d.n_complex, dtype=bool)
    mask[d.chi_slice] = False
    mask[d.sigma_slice] = False
    return mask


def _weak_residual(u: CoupledField, rhs_dual: np.ndarray, k: int, tau1: float, d) -> float:
    """Relative defect of the weak momentum rows (fluid tests only).

    Scaled against the individual term norms, not their sum: the homogeneous
    solves balance large terms to zero and would otherwise divide 0 by 0.
    """
    M, Kd, C = _volume_forms(d)
    fl = _fluid_rows(d)
    t_mass = 1j * k * (M @ u.data)
    t_tran = -tau1 * (C @ u.data)
    t_diss = Kd @ u.data
    res = np.linalg.norm((t_mass + t_tran + t_diss)[fl] - rhs_dual[fl])
    scale = max(
        np.linalg.norm(t_mass[fl]),
        np.linalg.norm(t_tran[fl]),
        np.linalg.norm(t_diss[fl]),
        np.linalg.norm(rhs_dual[fl]),
    )
    return float(res / scale) if scale > 0.0 else float(res)


def _mode_pressure(u: CoupledField, k: int, tau1: float, d, forcing_grid=None) -> PressureField:
    # grad q = lap u - ik u + tau d1 u + f, gauged to zero mean on the sphere
    g = d.synth_grad(u.data)
    defect = -1j * k * d.synth(u.data) + tau1 * g[0]
    if forcing_grid is not None:
        defect = defect + forcing_grid
    q = recover_pressure(u, d, grid_defect=defect, lap_coef=1.0)
    return q.shift_constant(-q.surface_mean(1.0))


def _norms_sq(u: CoupledField, d) -> tuple[float, float, float]:
    """(L2^2, strain-form, Laplacian^2) of the fluid content of u."""
    M, Kd, _ = _volume_forms(d)
    l2 = float(np.real(np.conj(u.data) @ (M @ u.data)))
    st = float(np.real(np.conj(u.data) @ (Kd @ u.data)))
    lap = d.synth_lap(u.data)
    l2lap = float(np.real(np.sum(d.w_vol * np.sum(lap * np.conj(lap), axis=0))))
    return l2, st, l2lap


@dataclass
class AuxiliarySolution:
    """One rigid-boundary Oseen mode: trace e_i (translation) or e_i x x (rotation).

    The chi/sigma slots of ``field`` encode the prescribed boundary trace, not
    a body unknown; every volume norm below weighs the fluid content only.
    ``force`` and ``torque`` are the deviatoric-plus-pressure surface
    tractions that feed the resistance matrices.
    """

    k: int
    kind: str
    axis: int
    tau: float
    field: CoupledField
    pressure: PressureField
    force: np.ndarray
    torque: np.ndarray
    residual: float

    def l2_norm(self) -> float:
        return float(np.sqrt(_norms_sq(self.field, self.field.d)[0]))

    def strain_norm(self) -> float:
        """sqrt of the strain form, i.e. sqrt(2) ||D(h)|| (gradient-norm proxy)."""
        return float(np.sqrt(_norms_sq(self.field, self.field.d)[1]))

    def lap_norm(self) -> float:
        """||Delta h||, the quadrature proxy for the second-derivative norm."""
        return float(np.sqrt(_norms_sq(self.field, self.field.d)[2]))

    def conjugate(self) -> "AuxiliarySolution":
        """The solution at frequency -k (conjugate the equation and the data)."""
        return AuxiliarySolution(
            -self.k,
            self.kind,
            self.axis,
            self.tau,
            self.field.conjugate(),
            self.pressure.conjugate(),
            np.conj(self.force),
            np.conj(self.torque),
            self.residual,
        )


def auxiliary_solve(k, kind, axis, tau, d, *, _solver=None) -> AuxiliarySolution:
    """Solve ik h + tau d1 h = div T(h, p) with rigid boundary data.

    ``kind`` selects the trace e_axis ('translation') or e_axis x x
    ('rotation'); the zero-frequency problem is steady-state territory and is
    rejected.  The returned residual is the relative weak-form defect on the
    fluid rows.
    """
    if not isinstance(k, (int, np.integer)) or k == 0:
        raise ValueError("frequency index must be a nonzero integer")
    if kind not in ("translation", "rotation"):
        raise ValueError("kind must be 'translation' or 'rotation'")
    e = _axis_vector(axis)
    if axis != 1 and d.m_max < 1:
        raise ValueError("lateral boundary data need m_max >= 1")
    tau1 = _tau_component(tau)
    solver = _solver if _solver is not None else OseenModeSolver(d, 1j * k, -tau1)
    zero = np.zeros(3)
    chi, sigma = (e, zero) if kind == "translation" else (zero, e)
    h = solver.solve(np.zeros(d.n_complex, dtype=complex), chi, sigma)
    q = _mode_pressure(h, k, tau1, d)
    force, torque = surface_traction(h, q, d)
    res = _weak_residual(h, np.zeros(d.n_complex, dtype=complex), k, tau1, d)
    return AuxiliarySolution(int(k), kind, axis, tau1, h, q, force, torque, res)


def _cmat_json(M: np.ndarray):
    return [[[float(x.real), float(x.imag)] for x in row] for row in M]


def _cmat_parse(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


@dataclass
class ResistanceMatrices:
    """Surface tractions of the six rigid boundary motions at one frequency.

    Columns are tractions of unit boundary data: K force per translation,
    P torque per translation, S force per rotation, A torque per rotation.
    The grand matrix couples the rigid response as force = K chi + S sigma,
    torque = P chi + A sigma; the volume/surface quadratic-form identity
    (see grand_identity_residual) pins that block order.
    """

    k: int
    tau: float
    K: np.ndarray
    A: np.ndarray
    P: np.ndarray
    S: np.ndarray

    @property
    def grand(self) -> np.ndarray:
        return np.block([[self.K, self.S], [self.P, self.A]])

    def body_matrix(self, p: PhysicalParams) -> np.ndarray:
        """ik diag(M, M, M, I, I, I) + grand: the 6x6 of the rigid mode response."""
        inert = np.diag([p.mass] * 3 + [p.inertia] * 3)
        return 1j * self.k * inert + self.grand

    def body_min_singular(self, p: PhysicalParams) -> float:
        return float(svdvals(self.body_matrix(p))[-1])

    def shifted_min_singular(self, mu: float) -> tuple[float, float]:
        """min singular values of K + i mu 1 and A + i mu 1 (invertibility scan)."""
        eye = 1j * mu * np.eye(3)
        return (
            float(svdvals(self.K + eye)[-1]),
            float(svdvals(self.A + eye)[-1]),
        )

    def condition(self) -> float:
        return float(np.linalg.cond(self.grand))

    def rotated(self, R: np.ndarray) -> "ResistanceMatrices":
        """Tensor-transform all four blocks into the frame R e1 = fall axis."""
        R = np.asarray(R, dtype=float)
        return ResistanceMatrices(
            self.k,
            self.tau,
            R @ self.K @ R.T,
            R @ self.A @ R.T,
            R @ self.P @ R.T,
            R @ self.S @ R.T,
        )

    def conjugate(self) -> "ResistanceMatrices":
        return ResistanceMatrices(
            -self.k, self.tau, np.conj(self.K), np.conj(self.A), np.conj(self.P), np.conj(self.S)
        )

    def to_json(self) -> dict:
        return {
            "schema": "resistance-v1",
            "k": self.k,
            "tau": self.tau,
            "K": _cmat_json(self.K),
            "A": _cmat_json(self.A),
            "P": _cmat_json(self.P),
            "S": _cmat_json(self.S),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ResistanceMatrices":
        return cls(
            int(obj["k"]),
            float(obj["tau"]),
            _cmat_parse(obj["K"]),
            _cmat_parse(obj["A"]),
            _cmat_parse(obj["P"]),
            _cmat_parse(obj["S"]),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @staticmethod
    def csv_header() -> list[str]:
        cols = ["k"]
        for name in ("K", "A", "P", "S"):
            for i in range(1, 4):
                for j in range(1, 4):
                    cols += [f"{name}{i}{j}_re", f"{name}{i}{j}_im"]
        return cols

    def csv_row(self) -> list[float]:
        row: list[float] = [float(self.k)]
        for mat in (self.K, self.A, self.P, self.S):
            for x in mat.ravel():
                row += [float(x.real), float(x.imag)]
        return row


def write_matrix_csv(mats, path) -> None:
    """One CSV row per frequency: k plus the 36 complex entries split re/im."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ResistanceMatrices.csv_header())
        for m in sorted(mats, key=lambda m: m.k):
            w.writerow(m.csv_row())


def coupling_matrices(k, tau, d, *, with_solutions=False, _solver=None):
    """Assemble the resistance matrices at frequency k from six boundary solves.

    ``tau`` may be a scalar (transport along e1) or a 3-vector; off-axis
    vectors are handled by solving in the aligned frame and rotating the
    matrices back, in which case the auxiliary fields themselves are not
    available and ``with_solutions`` is rejected.
    """
    if not isinstance(k, (int, np.integer)) or k == 0:
        raise ValueError("frequency index must be a nonzero integer")
    if d.m_max < 1:
        raise ValueError("resistance matrices need the lateral sector: m_max >= 1")
    tau1, R = _alignment(tau)
    if R is not None and with_solutions:
        raise ValueError(
            "fields are only available in the polar-axis frame; pass transport along e1"
        )
    solver = _solver if _solver is not None else OseenModeSolver(d, 1j * k, -tau1)
    K = np.zeros((3, 3), dtype=complex)
    P = np.zeros((3, 3), dtype=complex)
    S = np.zeros((3, 3), dtype=complex)
    A = np.zeros((3, 3), dtype=complex)
    sols = []
    for i in (1, 2, 3):
        a = auxiliary_solve(k, "translation", i, tau1, d, _solver=solver)
        K[:, i - 1] = a.force
        P[:, i - 1] = a.torque
        sols.append(a)
    for i in (1, 2, 3):
        b = auxiliary_solve(k, "rotation", i, tau1, d, _solver=solver)
        S[:, i - 1] = b.force
        A[:, i - 1] = b.torque
        sols.append(b)
    mats = ResistanceMatrices(int(k), tau1, K, A, P, S)
    if R is not None:
        mats = mats.rotated(R)
    return (mats, sols) if with_solutions else mats


def grand_identity_residual(mats: ResistanceMatrices, sols, *, n_probes=10, seed=0) -> float:
    """Worst relative defect of the volume/surface quadratic-form identity.

    For v built from the six auxiliary fields with coefficients z, the volume
    form ik ||v||^2 + strain(v, v) - tau (d1 v, v) must equal z* A6 z.  Random
    probes tie the field solves, the recovered tractions and the block order
    of the grand matrix together; this is the module's sharpest self-check.
    """
    d = sols[0].field.d
    M, Kd, C = _volume_forms(d)
    cols = [s.field.data for s in sols]
    A6 = mats.grand
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        z = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        v = sum(z[j] * cols[j] for j in range(6))
        lhs = (
            1j * mats.k * (np.conj(v) @ (M @ v))
            + np.conj(v) @ (Kd @ v)
            - mats.tau * (np.conj(v) @ (C @ v))
        )
        worst = max(worst, abs(lhs - np.conj(z) @ A6 @ z) / abs(lhs))
    return float(worst)


@dataclass
class ModeSolution:
    """One temporal Fourier mode of the periodic problem.

    ``field`` carries the rigid response in its trace slots, so chi and sigma
    are also available as plain vectors; ``residual`` is the worst of the
    fluid weak-form defect and the two rigid balance rows, all relative.
    """

    k: int
    tau: float
    field: CoupledField
    pressure: PressureField
    chi: np.ndarray
    sigma: np.ndarray
    residual: float
    forcing: object = None
    body_force: np.ndarray | None = None
    body_torque: np.ndarray | None = None

    @property
    def rigid(self) -> np.ndarray:
        return np.concatenate([self.chi, self.sigma])

    def conjugate(self) -> "ModeSolution":
        return ModeSolution(
            -self.k,
            self.tau,
            self.field.conjugate(),
            self.pressure.conjugate(),
            np.conj(self.chi),
            np.conj(self.sigma),
            self.residual,
            None,
            None if self.body_force is None else np.conj(self.body_force),
            None if self.body_torque is None else np.conj(self.body_torque),
        )


def _forcing_dual_and_grid(f, d, p):
    if f is None:
        return np.zeros(d.n_complex, dtype=complex), None
    if isinstance(f, CoupledField):
        return _dual_vector(f, d, p), d.synth(f.data)
    if isinstance(f, RawField):
        grid = np.asarray(f.grid, dtype=complex)
        return _dual_vector(f, d, p), grid
    raise TypeError("volume forcing must be a CoupledField, RawField or None")


def mode_solve(k, f, F, G, tau, p, d, *, resistances=None) -> ModeSolution:
    """Rigid response and fluid field of one forced frequency.

    The homogeneous-boundary solve absorbs the volume forcing f, its surface
    traction corrects the rigid data (F, G), and the 6x6 body matrix returns
    (chi, sigma); the mode is the superposition of that solve and the six
    auxiliary fields.  ``resistances`` accepts the (matrices, solutions) pair
    from coupling_matrices(..., with_solutions=True) to amortize repeated
    calls at one frequency.
    """
    if not isinstance(k, (int, np.integer)) or k == 0:
        raise ValueError("frequency index must be a nonzero integer")
    tau1 = _tau_component(tau)
    solver = OseenModeSolver(d, 1j * k, -tau1)
    if resistances is None:
        mats, sols = coupling_matrices(k, tau1, d, with_solutions=True, _solver=solver)
    else:
        mats, sols = resistances
        if mats.k != k or abs(mats.tau - tau1) > 1e-12 * max(1.0, abs(tau1)):
            raise ValueError("supplied resistance matrices belong to a different mode")
    F3 = np.zeros(3, dtype=complex) if F is None else np.asarray(F, dtype=complex)
    G3 = np.zeros(3, dtype=complex) if G is None else np.asarray(G, dtype=complex)
    if F3.shape != (3,) or G3.shape != (3,):
        raise ValueError("rigid forcing must be complex 3-vectors")

    rhs, f_grid = _forcing_dual_and_grid(f, d, p)
    z = solver.solve(rhs, np.zeros(3), np.zeros(3))
    r = _mode_pressure(z, k, tau1, d, forcing_grid=f_grid)
    Fz, Gz = surface_traction(z, r, d)

    B = mats.body_matrix(p)
    sv = svdvals(B)
    if sv[-1] < 1e-10 * sv[0]:
        raise SingularResponseError(
            f"body response at k={k} lost invertibility (min singular {sv[-1]:.2e})"
        )
    xi = np.linalg.solve(B, np.concatenate([F3 - Fz, G3 - Gz]))
    chi, sigma = xi[:3].copy(), xi[3:].copy()

    u = z
    q = r
    for j, s in enumerate(sols):
        u = u + xi[j] * s.field
        q = q + xi[j] * s.pressure

    # certification: fluid weak rows against the forcing dual, rigid rows
    # against an independent traction of the superposed pair
    wres = _weak_residual(u, rhs, k, tau1, d)
    Fu, Gu = surface_traction(u, q, d)
    fdef = 1j * k * p.mass * chi + Fu - F3
    gdef = 1j * k * p.inertia * sigma + Gu - G3
    fscale = max(np.linalg.norm(F3), np.linalg.norm(Fu), k * p.mass * np.linalg.norm(chi))
    gscale = max(np.linalg.norm(G3), np.linalg.norm(Gu), k * p.inertia * np.linalg.norm(sigma))
    res = wres
    if fscale > 0.0:
        res = max(res, float(np.linalg.norm(fdef) / fscale))
    if gscale > 0.0:
        res = max(res, float(np.linalg.norm(gdef) / gscale))
    return ModeSolution(int(k), tau1, u, q, chi, sigma, res, f, F3, G3)


@dataclass
class PeriodicSolution:
    """Zero-mean 2*pi-periodic solution as a stack of decoupled Fourier modes."""

    tau: float
    modes: dict[int, ModeSolution]
    bound: dict

    @property
    def k_values(self) -> list[int]:
        return sorted(self.modes)

    @property
    def k_max(self) -> int:
        return max((abs(k) for k in self.modes), default=0)

    def reconstruct(self, s: float) -> CoupledField:
        """Field at scaled time s (complex in general, real for paired data)."""
        ks = self.k_values
        if not ks:
            raise ValueError("no modes to reconstruct")
        d = self.modes[ks[0]].field.d
        out = d.zero_field()
        for k in ks:
            out = out + np.exp(1j * k * s) * self.modes[k].field
        return out

    def is_real(self, tol: float = 1e-10) -> bool:
        """Whether the mode stack satisfies conjugate pairing within tol."""
        scale = max(
            (float(np.max(np.abs(m.field.data))) for m in self.modes.values()), default=0.0
        )
        if scale == 0.0:
            return True
        for k, m in self.modes.items():
            partner = self.modes.get(-k)
            if partner is None:
                return False
            if np.max(np.abs(partner.field.data - m.field.conjugate().data)) > tol * scale:
                return False
        return True

    def mode_norms(self) -> dict[int, float]:
        return {
            k: float(np.sqrt(_norms_sq(m.field, m.field.d)[0])) for k, m in self.modes.items()
        }

    def worst_residual(self) -> float:
        return max((m.residual for m in self.modes.values()), default=0.0)


def _data_norm_sq(f, F, G, d) -> float:
    out = 0.0
    if f is not None:
        if isinstance(f, CoupledField):
            out += _norms_sq(f, d)[0]
        else:
            grid = np.asarray(f.grid, dtype=complex)
            out += float(np.real(np.sum(d.w_vol * np.sum(grid * np.conj(grid), axis=0))))
    if F is not None:
        out += float(np.linalg.norm(F) ** 2)
    if G is not None:
        out += float(np.linalg.norm(G) ** 2)
    return out


def periodic_solve(f, F, G, tau, p, d, *, k_max=None) -> PeriodicSolution:
    """Solve the time-periodic linear problem mode by mode.

    ``f``, ``F`` and ``G`` map nonzero integer frequencies to volume forcing
    fields and rigid force/torque vectors; missing keys mean zero, and a
    ``None`` container means no forcing of that type at all.  The zero mode
    is rejected (periodic solutions here are mean-free).  Auxiliary solves
    are shared between +k and -k through exact conjugation.
    """
    f = dict(f) if f else {}
    F = dict(F) if F else {}
    G = dict(G) if G else {}
    keys = sorted(set(f) | set(F) | set(G))
    for k in keys:
        if not isinstance(k, (int, np.integer)) or k == 0:
            raise ValueError("mode data must be keyed by nonzero integers")
        if k_max is not None and abs(k) > k_max:
            raise ValueError(f"mode {k} exceeds the requested k_max={k_max}")
    tau1 = _tau_component(tau)

    cache: dict[int, tuple] = {}
    modes: dict[int, ModeSolution] = {}
    sol_sq = 0.0
    data_sq = 0.0
    for k in keys:
        k = int(k)
        if k not in cache:
            if -k in cache:
                m0, s0 = cache[-k]
                cache[k] = (m0.conjugate(), [s.conjugate() for s in s0])
            else:
                cache[k] = coupling_matrices(k, tau1, d, with_solutions=True)
        ms = mode_solve(k, f.get(k), F.get(k), G.get(k), tau1, p, d, resistances=cache[k])
        modes[k] = ms
        l2, st, lap = _norms_sq(ms.field, d)
        sol_sq += (1 + k * k) * (l2 + float(np.linalg.norm(ms.rigid) ** 2)) + st + lap
        data_sq += _data_norm_sq(f.get(k), F.get(k), G.get(k), d)
    bound = {
        "solution_sq": sol_sq,
        "data_sq": data_sq,
        "ratio": sol_sq / data_sq if data_sq > 0.0 else 0.0,
    }
    return PeriodicSolution(tau1, modes, bound)


def _mode_fields(w) -> dict[int, CoupledField]:
    if isinstance(w, PeriodicSolution):
        fields = {k: m.field for k, m in w.modes.items()}
    elif isinstance(w, dict):
        fields = w
    else:
        raise TypeError("expected a PeriodicSolution or a {k: CoupledField} map")
    if 0 in fields:
        raise ValueError("zero-mean periodic fields have no k = 0 mode")
    return fields


def apply_Q(w, zeta0, s_c: SteadyState, p: PhysicalParams, d: Discretization, *, operator=None):
    """Mode-wise action of the periodic linearization zeta0 d_s + L2.

    ``w`` is a PeriodicSolution or a mapping of nonzero frequencies to
    CoupledFields; the result uses the same keys.  ``operator`` overrides the
    linearized spatial part (it defaults to the L2 of the supplied steady
    state), which keeps the temporal wiring testable on synthetic operators.
    """
    fields = _mode_fields(w)
    if operator is None:
        op = lambda u: apply_L2(u, s_c, d, p)  # noqa: E731
    else:
        op = operator
    return {k: (1j * k * zeta0) * u + op(u) for k, u in fields.items()}


def apply_Q0(w, zeta0, s_c: SteadyState, p: PhysicalParams, d: Discretization):
    """Mode-wise action of zeta0 d_s + L0 (the convection-free part)."""
    fields = _mode_fields(w)
    return {k: (1j * k * zeta0) * u + apply_L0(u, s_c, d, p) for k, u in fields.items()}
