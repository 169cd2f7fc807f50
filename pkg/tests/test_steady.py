"""Newton solver, branch continuation, and steady-state diagnostics."""
import numpy as np
import pytest

import oracles
from spherefall.assembly import dissipation_matrix
from spherefall.discretization import Discretization
from spherefall.pressure import surface_traction
from spherefall.spaces import PhysicalParams, inner_dissipation, inner_rigid
from spherefall.steady import (
    BranchTerminated,
    ConvergenceError,
    DegenerateStateError,
    SteadyState,
    assemble_L1,
    kappa_one,
    load_state,
    save_state,
    steady_branch,
    steady_residual,
    steady_solve,
)


@pytest.fixture(scope="module")
def params():
    return PhysicalParams(galilei=1.0, density_ratio=2.0)


@pytest.fixture(scope="module")
def coarse():
    return Discretization(l_max=3, m_max=0, n_r=10, r_out=20.0)


@pytest.fixture(scope="module")
def stokes_setup(params):
    """Well-resolved axisymmetric grid with the solve done once."""
    d = Discretization(l_max=4, m_max=0, n_r=40, r_out=200.0)
    s = steady_solve(1e-3, params, d)
    return d, s


def test_residual_zero_field(coarse, params):
    z = coarse.zero_field()
    assert np.max(np.abs(steady_residual(z, 0.0, params).data)) == 0.0
    # with forcing but no flow, only the rigid-translation rows survive
    R = steady_residual(z, 1.0, params)
    assert np.allclose(R.chi, -params.e1, atol=1e-15)
    mask = np.ones(coarse.n_complex, dtype=bool)
    mask[coarse.chi_slice] = False
    assert np.max(np.abs(R.data[mask])) == 0.0


def test_linearization_matches_divided_differences(params):
    # the convection is quadratic, so the centered difference of the residual
    # is the Jacobian action up to roundoff
    d = Discretization(l_max=2, m_max=1, n_r=6, r_out=10.0)
    rng = np.random.default_rng(7)
    v = d.unpack_real(rng.standard_normal(d.n_real))
    dv = d.unpack_real(rng.standard_normal(d.n_real))
    lam = 0.7
    fake = SteadyState(
        v0=v, p0=None, tau0=v.chi.real.copy(), omega0=v.sigma.real.copy(),
        galilei=lam, residual_norm=np.nan, energy_gap=np.nan,
    )
    op = assemble_L1(fake, params, restrict=False)
    eps = 1e-4
    rho = d.pack_real(v)
    Rp = steady_residual(d.unpack_real(rho + eps * d.pack_real(dv)), lam, params)
    Rm = steady_residual(d.unpack_real(rho - eps * d.pack_real(dv)), lam, params)
    fd = (d.pack_dual(Rp.data) - d.pack_dual(Rm.data)) / (2.0 * eps)
    an = op.apply(dv)
    assert np.linalg.norm(fd - an) < 1e-10 * np.linalg.norm(an)


def test_lambda_zero_is_rest(coarse, params):
    s = steady_solve(0.0, params, coarse)
    assert np.max(np.abs(s.v0.data)) == 0.0
    assert s.residual_norm == 0.0
    assert s.energy_gap == 0.0
    assert not s.p0.modes or all(np.max(np.abs(v)) == 0.0 for v in s.p0.modes.values())


def test_stokes_limit_drag(stokes_setup, params):
    d, s = stokes_setup
    lam = s.galilei
    assert s.residual_norm < 1e-10
    # falling along gravity, no rotation
    assert abs(s.tau0[1]) < 1e-16 and abs(s.tau0[2]) < 1e-16
    assert np.linalg.norm(s.omega0) < 1e-16
    # drag balance against the concentric closed form: lam = 4 pi b |tau|
    _, b, _, _ = oracles.translation_profile(d.r_out)
    tau_ref = lam / (4.0 * np.pi * b)
    assert abs(s.tau0[0] - tau_ref) < 1e-10 * tau_ref
    # unbounded-domain Stokes value within the wall correction budget
    assert abs(np.linalg.norm(s.tau0) - lam / (6.0 * np.pi)) < 0.02 * lam / (6.0 * np.pi)


def test_stokes_limit_energy(stokes_setup, params):
    d, s = stokes_setup
    lam = s.galilei
    E = float(np.vdot(s.v0.data, dissipation_matrix(d) @ s.v0.data).real)
    assert abs(E - lam**2 / (6.0 * np.pi)) < 0.05 * lam**2 / (6.0 * np.pi)
    assert s.energy_gap <= 1e-8 * (1.0 + lam**2)
    # sharp a-priori constant: equality characterizes the Stokes minimizer
    kap = kappa_one(d)
    b = oracles.translation_profile(d.r_out)[1]
    kap_ref = np.sqrt(2.0 / (4.0 * np.pi * b))
    assert abs(kap - kap_ref) < 1e-10 * kap_ref
    assert np.sqrt(2.0 * E) <= lam * kap * (1.0 + 1e-8)


def test_recovered_traction_balances_gravity(params):
    # net surface force must carry the weight, net torque must vanish:
    # an end-to-end check of solver, pressure recovery, and traction
    d = Discretization(l_max=6, m_max=0, n_r=32, r_out=60.0)
    lam = 0.05
    s = steady_solve(lam, params, d)
    F, G = surface_traction(s.v0, s.p0, d)
    assert np.linalg.norm(F - lam * params.e1) < 1e-8 * lam
    assert np.linalg.norm(G) < 1e-10 * lam


def test_branch_monotone_and_aligned(coarse, params):
    pts = steady_branch(0.0, 0.1, 10, params, coarse)
    assert len(pts) == 11
    assert np.max(np.abs(pts[0].state.v0.data)) == 0.0
    taus = [np.linalg.norm(q.state.tau0) for q in pts]
    assert all(a < bb for a, bb in zip(taus, taus[1:]))
    assert all(q.axis_aligned for q in pts)
    assert all(q.sigma_min > 0.0 for q in pts)
    # warm-started point agrees with a from-scratch solve
    scratch = steady_solve(pts[5].state.galilei, params, coarse)
    assert np.linalg.norm(scratch.v0.data - pts[5].state.v0.data) < 1e-12


def test_branch_tangent(coarse, params):
    pts = steady_branch(0.0, 0.1, 10, params, coarse)
    q = pts[5]
    lam = q.state.galilei
    # tangent against a centered difference of the solution path
    h = 5e-3
    sp = steady_solve(lam + h, params, coarse, guess=q.state)
    sm = steady_solve(lam - h, params, coarse, guess=q.state)
    fd = (sp.v0.data - sm.v0.data) / (2.0 * h)
    assert np.linalg.norm(fd - q.tangent.data) < 1e-4 * np.linalg.norm(fd)
    # the linearization applied to the tangent gives the forcing d/dlam removes
    forcing = (dissipation_matrix(coarse) @ q.state.v0.data
               - steady_residual(q.state.v0, lam, params).data) / lam
    op = assemble_L1(q.state, params)
    lhs = op.apply(q.tangent)[op.indices]
    rhs = coarse.pack_dual(forcing)[op.indices]
    assert np.linalg.norm(lhs - rhs) < 1e-10 * np.linalg.norm(rhs)


def test_axisymmetric_sector_stays_clean(coarse, params):
    # solving with m_max = 1 available must not populate the m != 0 sector
    d = Discretization(l_max=3, m_max=1, n_r=10, r_out=20.0)
    s = steady_solve(0.05, params, d)
    worst = 0.0
    for (l, m), sl in d.blocks.items():
        if m != 0:
            worst = max(worst, float(np.max(np.abs(s.v0.data[sl]), initial=0.0)))
    assert worst < 1e-10
    assert np.linalg.norm(s.omega0) < 1e-12
    s0 = steady_solve(0.05, params, coarse)
    assert abs(s.tau0[0] - s0.tau0[0]) < 1e-12 * abs(s0.tau0[0])


def test_zero_state_linearization_spd(coarse, params):
    s = steady_solve(0.0, params, coarse)
    op = assemble_L1(s, params)
    M = op.matrix
    assert np.max(np.abs(M - M.T)) < 1e-8
    assert np.linalg.eigvalsh(0.5 * (M + M.T)).min() > 0.0
    assert op.garding_constant == 0.0
    assert op.sigma_min() > 0.0


def test_garding_lower_bound(coarse, params):
    s = steady_solve(0.3, params, coarse)
    op = assemble_L1(s, params, restrict=False)
    rng = np.random.default_rng(23)
    for _ in range(3):
        rho = np.zeros(coarse.n_real)
        rho[op.indices] = rng.standard_normal(op.indices.size)
        u = coarse.unpack_real(rho)
        quad = float(rho @ op.apply(u))
        lower = (2.0 * inner_dissipation(u, u).real
                 - s.galilei * op.garding_constant * inner_rigid(u, u, params).real)
        assert quad >= lower - 1e-9 * abs(lower)


def test_solver_error_paths(coarse, params):
    with pytest.raises(ValueError):
        steady_solve(-0.5, params, coarse)
    with pytest.raises(ConvergenceError) as exc:
        steady_solve(0.5, params, coarse, max_iter=1)
    assert exc.value.galilei == 0.5
    assert exc.value.residual_norm > 0.0
    with pytest.raises(ValueError):
        steady_branch(0.2, 0.1, 5, params, coarse)
    with pytest.raises(ValueError):
        steady_branch(0.0, 0.1, 0, params, coarse)


def test_degenerate_zero_drag_rejected(coarse, params):
    from spherefall.steady import _finalize

    with pytest.raises(DegenerateStateError):
        _finalize(coarse.zero_field(), 1.0, params, coarse, 0.0)


def test_off_axis_gravity_needs_azimuthal_modes(coarse):
    tilted = PhysicalParams(
        galilei=1.0, density_ratio=2.0, e1=np.array([0.0, 0.0, 1.0])
    )
    with pytest.raises(ValueError):
        steady_solve(0.01, tilted, coarse)
    # with m_max = 1 the same direction is representable
    d = Discretization(l_max=2, m_max=1, n_r=8, r_out=15.0)
    s = steady_solve(0.01, tilted, d)
    assert abs(s.tau0[2]) > 0.0
    assert np.linalg.norm(s.tau0 - s.tau0[2] * tilted.e1) < 1e-12 * abs(s.tau0[2])


def test_branch_failure_carries_progress(coarse, params):
    # an unreachable tolerance exhausts the step halvings; the exception
    # reports the last Galilei number that did converge
    with pytest.raises(BranchTerminated) as exc:
        steady_branch(0.0, 0.1, 2, params, coarse, tol=0.0, max_halvings=1)
    assert exc.value.galilei == 0.0
    assert len(exc.value.points) == 1


def test_branch_collapse_diagnostic(coarse, params):
    # an absurd relative threshold forces the fold/bifurcation signal
    with pytest.raises(BranchTerminated) as exc:
        steady_branch(0.0, 0.1, 2, params, coarse, collapse_ratio=10.0)
    assert exc.value.sigma_min is not None
    assert len(exc.value.points) == 2


def test_checkpoint_roundtrip(tmp_path, coarse, params):
    s = steady_solve(0.05, params, coarse)
    path = tmp_path / "steady.json"
    save_state(s, path)
    back = load_state(path, coarse)
    assert np.array_equal(back.v0.data, s.v0.data)
    assert back.galilei == s.galilei
    assert np.array_equal(back.tau0, s.tau0)
    # pressure is recomputed, not stored
    for key, vals in s.p0.modes.items():
        assert np.allclose(back.p0.modes[key], vals, atol=1e-14)
    # a fresh discretization is rebuilt from the recorded dimensions
    fresh = load_state(path)
    assert fresh.v0.d.l_max == coarse.l_max
    assert np.array_equal(fresh.v0.data, s.v0.data)
    other = Discretization(l_max=2, m_max=0, n_r=10, r_out=20.0)
    with pytest.raises(ValueError):
        load_state(path, other)
    path.write_text('{"schema": "something-else"}')
    with pytest.raises(ValueError):
        load_state(path)
