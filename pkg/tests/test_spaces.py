"""Inner-product identities, projection, and lift contracts."""
import numpy as np
import pytest

import oracles
from spherefall.discretization import Discretization
from spherefall.spaces import (
    PhysicalParams,
    RawField,
    inner_dissipation,
    inner_rigid,
    project_H,
    rigid_lift,
)


@pytest.fixture(scope="module")
def disc():
    return Discretization(l_max=3, m_max=1, n_r=12, r_out=10.0)


@pytest.fixture(scope="module")
def params():
    return PhysicalParams(galilei=1.0, density_ratio=3.0)


def test_params_derived_constants(params):
    assert params.mass == pytest.approx(4.0 * np.pi)
    assert params.inertia == pytest.approx(8.0 * np.pi / 5.0)
    with pytest.raises(ValueError):
        PhysicalParams(galilei=-1.0, density_ratio=1.0)
    with pytest.raises(ValueError):
        PhysicalParams(galilei=1.0, density_ratio=0.0)
    with pytest.raises(ValueError):
        PhysicalParams(galilei=1.0, density_ratio=1.0, e1=np.array([1.0, 1.0, 0.0]))


def test_inner_rigid_pure_rigid_pairs(disc, params):
    zero = np.zeros((3, disc.n_q, disc.n_theta, disc.n_phi), dtype=complex)
    e1 = np.array([1.0, 0.0, 0.0])
    e3 = np.array([0.0, 0.0, 1.0])
    tr = RawField(disc, zero, e1, np.zeros(3))
    rot = RawField(disc, zero, np.zeros(3), e3)
    assert inner_rigid(tr, tr, params) == pytest.approx(params.mass, rel=1e-14)
    assert inner_rigid(rot, rot, params) == pytest.approx(params.inertia, rel=1e-14)
    assert inner_rigid(rot, tr, params) == pytest.approx(0.0, abs=1e-14)


def test_inner_rigid_symmetry(disc, params):
    rng = np.random.default_rng(11)
    u = disc.unpack_real(rng.standard_normal(disc.n_real))
    w = disc.unpack_real(rng.standard_normal(disc.n_real))
    a = inner_rigid(u, w, params)
    b = inner_rigid(w, u, params)
    assert abs(a - np.conj(b)) < 1e-13 * abs(a)
    assert abs(a.imag) < 1e-13 * abs(a)


def test_dissipation_stokes_oracle():
    R = 200.0
    d = Discretization(l_max=1, m_max=0, n_r=40, r_out=R)
    u, (a, b, c, dd) = oracles.translation_field(d)
    power = 2.0 * inner_dissipation(u, u).real
    # exact drag power between the spheres, and the wall bias stays O(1/R)
    assert power == pytest.approx(4.0 * np.pi * b, rel=1e-8)
    assert power == pytest.approx(6.0 * np.pi, rel=0.02)
    assert power > 6.0 * np.pi


def test_projection_idempotent_on_coupled(disc, params):
    rng = np.random.default_rng(12)
    u = disc.unpack_real(rng.standard_normal(disc.n_real))
    v = project_H(u, params)
    assert np.max(np.abs(v.data - u.data)) < 1e-11 * np.max(np.abs(u.data))


def test_projection_annihilates_gradients(disc, params):
    # p = f(r) x1 + g(r) x1 x2 with the matching rigid part projects to zero
    d = disc
    r = d.radial.r_q[:, None, None]
    er = d.rot[:, 0]  # components of x/|x|
    X = r[None] * er[:, None]
    f = np.exp(-0.3 * r) * (1.0 + r)
    fp = np.exp(-0.3 * r) * (1.0 - 0.3 * (1.0 + r))
    g = np.sin(r) / r
    gp = np.cos(r) / r - np.sin(r) / r**2
    e1 = np.array([1.0, 0.0, 0.0])[:, None, None, None]
    e2 = np.array([0.0, 1.0, 0.0])[:, None, None, None]
    xh = er[:, None]
    grad = (
        fp[None] * X[0] * xh
        + f[None] * e1
        + gp[None] * X[0] * X[1] * xh
        + g[None] * (X[1] * e1 + X[0] * e2)
    )
    f1 = np.exp(-0.3) * 2.0
    chi = (f1 * (4.0 * np.pi / 3.0) / params.mass) * np.array([1.0, 0.0, 0.0])
    h = RawField(d, grad.astype(complex), chi, np.zeros(3))
    Ph = project_H(h, params)
    num = np.sqrt(inner_rigid(Ph, Ph, params).real)
    den = np.sqrt(inner_rigid(h, h, params).real)
    assert num < 1e-9 * den
    # dropping the rigid compensation must leave a nonzero projection
    h_bad = RawField(d, grad.astype(complex), np.zeros(3), np.zeros(3))
    P_bad = project_H(h_bad, params)
    assert np.sqrt(inner_rigid(P_bad, P_bad, params).real) > 1e-3 * den


def test_projection_pythagoras_and_selfadjoint(disc, params):
    rng = np.random.default_rng(13)
    shape = (3, disc.n_q, disc.n_theta, disc.n_phi)
    h = RawField(disc, rng.standard_normal(shape) + 0j, rng.standard_normal(3), rng.standard_normal(3))
    g = RawField(disc, rng.standard_normal(shape) + 0j, rng.standard_normal(3), rng.standard_normal(3))
    Ph, Pg = project_H(h, params), project_H(g, params)
    norm2 = inner_rigid(h, h, params).real
    p2 = inner_rigid(Ph, Ph, params).real
    rem = RawField(
        disc, h.grid - disc.synth(Ph.data), h.chi - Ph.chi.real, h.sigma - Ph.sigma.real
    )
    r2 = inner_rigid(rem, rem, params).real
    assert norm2 == pytest.approx(p2 + r2, rel=1e-10)
    # <Ph, g> = <h, Pg> in the rigid product
    a = inner_rigid(RawField.from_coupled(Ph), g, params)
    b = inner_rigid(h, RawField.from_coupled(Pg), params)
    assert abs(a - b) < 1e-10 * max(1.0, abs(a))


def lift_tail(d, kind, axis):
    u = rigid_lift(kind, axis, d)
    g = d.synth(u.data)
    r_cut = min(2.0, (1.0 + d.r_out) / 4.0)
    outside = d.radial.r_q > 2.0 * r_cut + 0.5
    return u, float(np.max(np.abs(g[:, outside])))


@pytest.mark.parametrize("kind,axis", [("translation", 1), ("translation", 2), ("rotation", 3)])
def test_rigid_lift_contract(kind, axis):
    d = Discretization(l_max=1, m_max=1, n_r=48, r_out=10.0)
    u, tail = lift_tail(d, kind, axis)
    e = np.zeros(3)
    e[axis - 1] = 1.0
    if kind == "translation":
        assert np.allclose(u.chi, e) and np.allclose(u.sigma, 0.0)
    else:
        assert np.allclose(u.sigma, e) and np.allclose(u.chi, 0.0)
    assert d.boundary_trace_error(u) < 1e-12
    assert d.divergence_max(u) < 1e-9
    # support beyond 2 r_cut vanishes only up to the radial fit error,
    # which must shrink with resolution
    assert tail < 3e-3
    coarse = Discretization(l_max=1, m_max=1, n_r=12, r_out=10.0)
    assert tail < lift_tail(coarse, kind, axis)[1] / 10.0


def test_rigid_lift_errors(disc):
    with pytest.raises(ValueError):
        rigid_lift("shear", 1, disc)
    with pytest.raises(ValueError):
        rigid_lift("translation", 4, disc)
    axi = Discretization(l_max=2, m_max=0, n_r=8, r_out=8.0)
    with pytest.raises(ValueError):
        rigid_lift("translation", 2, axi)
