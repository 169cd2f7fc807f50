import numpy as np
import pytest

from spherefall.discretization import Discretization


@pytest.fixture(scope="module")
def disc():
    return Discretization(l_max=3, m_max=2, n_r=10, r_out=8.0)


def random_real_field(d, seed=0, amp=1.0):
    rng = np.random.default_rng(seed)
    u = d.unpack_real(rng.standard_normal(d.n_real) * amp)
    return u


def random_complex_field(d, seed=1):
    rng = np.random.default_rng(seed)
    u = d.zero_field()
    u.data[:] = rng.standard_normal(d.n_complex) + 1j * rng.standard_normal(d.n_complex)
    return u


def test_translation_lift_closed_form(disc):
    from spherefall.radial import cutoff_profile

    u = disc.zero_field()
    chi = np.array([0.3, -1.1, 0.7])
    u.chi = chi
    g = disc.to_physical(u)
    r = disc.radial.r_q
    phi, dphi = cutoff_profile(r, disc.r_out)[:2]
    er = disc.rot[:, 0]  # unit radial vector at the grid angles
    cn = np.einsum("i,itp->tp", chi, er)
    expect = (
        phi[:, None, None] * cn[None] * er[:, None]
        + (phi + r * dphi / 2.0)[None, :, None, None]
        * (chi[:, None, None, None] - cn[None, None] * er[:, None])
    )
    assert np.max(np.abs(g - expect)) < 1e-12
    assert disc.boundary_trace_error(u) < 1e-12
    assert disc.divergence_max(u) < 1e-11


def test_rotation_lift_closed_form(disc):
    from spherefall.radial import cutoff_profile

    u = disc.zero_field()
    sigma = np.array([0.5, 0.25, -1.0])
    u.sigma = sigma
    g = disc.to_physical(u)
    r = disc.radial.r_q
    phi = cutoff_profile(r, disc.r_out)[0]
    er = disc.rot[:, 0]
    X = r[:, None, None] * er[:, None, :, :]
    expect = phi[None, :, None, None] * np.moveaxis(
        np.cross(sigma[None, None, None, :], np.moveaxis(X, 0, -1)), -1, 0
    )
    assert np.max(np.abs(g - expect)) < 1e-12
    assert disc.boundary_trace_error(u) < 1e-12
    assert disc.divergence_max(u) < 1e-11


def test_divergence_and_trace_random(disc):
    u = random_real_field(disc, seed=2)
    scale = np.max(np.abs(disc.to_physical(u)))
    assert disc.divergence_max(u) < 1e-11 * scale
    assert disc.boundary_trace_error(u) < 1e-10 * scale
    # outer boundary: velocity vanishes
    pts = np.array([[disc.r_out, 0.0, 0.0], [0.0, -disc.r_out, 0.0]])
    vals = disc.evaluate_at_points(u, pts * (1 - 1e-13))
    assert np.max(np.abs(vals)) < 1e-8 * scale


def test_round_trip(disc):
    u = random_real_field(disc, seed=3)
    v = disc.to_spectral(disc.synth(u.data))
    assert np.allclose(v.data, u.data, atol=1e-8 * np.max(np.abs(u.data)))


def test_dual_is_adjoint(disc):
    rng = np.random.default_rng(4)
    c = rng.standard_normal(disc.n_complex) + 1j * rng.standard_normal(disc.n_complex)
    Y = rng.standard_normal((3, disc.n_q, disc.n_theta, disc.n_phi)) + 1j * rng.standard_normal(
        (3, disc.n_q, disc.n_theta, disc.n_phi)
    )
    lhs = np.vdot(disc.dual(Y), c)
    rhs = np.sum(np.conj(Y) * disc.synth(c) * disc.w_vol[None])
    assert abs(lhs - rhs) < 1e-12 * abs(rhs)


def test_gradient_pipeline_fd(disc):
    u = random_real_field(disc, seed=5)
    pts = np.array([[1.7, 0.4, -0.2], [0.1, -2.5, 1.0], [3.0, 2.0, 2.0]])
    G = np.empty((len(pts), 3, 3))
    h = 1e-6
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        G[:, i, :] = (
            disc.evaluate_at_points(u, pts + e) - disc.evaluate_at_points(u, pts - e)
        ).real / (2 * h)
    # the field is solenoidal everywhere, so the FD divergence must vanish
    div = G[:, 0, 0] + G[:, 1, 1] + G[:, 2, 2]
    assert np.max(np.abs(div)) < 1e-5


def test_synth_grad_matches_fd_on_grid(disc):
    u = random_real_field(disc, seed=6)
    Gg = disc.velocity_gradient(u)
    # pick a few grid points and FD the evaluate_at_points route
    iq, it, ip = 5, 2, 1
    r = disc.radial.r_q[iq]
    er = disc.rot[:, 0, it, ip]
    x0 = r * er
    h = 1e-6
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = (disc.evaluate_at_points(u, x0 + e) - disc.evaluate_at_points(u, x0 - e)).real[
            0
        ] / (2 * h)
        assert np.allclose(fd, Gg[i, :, iq, it, ip], atol=5e-5)


def test_evaluate_matches_grid(disc):
    u = random_real_field(disc, seed=7)
    g = disc.to_physical(u)
    iq, it, ip = 3, 4, 2
    r = disc.radial.r_q[iq]
    x0 = r * disc.rot[:, 0, it, ip]
    val = disc.evaluate_at_points(u, x0).real[0]
    assert np.allclose(val, g[:, iq, it, ip], atol=1e-11)


def test_real_packing_round_trip(disc):
    rng = np.random.default_rng(8)
    rho = rng.standard_normal(disc.n_real)
    u = disc.unpack_real(rho)
    assert u.conj_symmetry_error() < 1e-14
    assert np.allclose(disc.pack_real(u), rho)


def test_pack_dual_pairing(disc):
    rng = np.random.default_rng(9)
    u = disc.unpack_real(rng.standard_normal(disc.n_real))
    Y = rng.standard_normal((3, disc.n_q, disc.n_theta, disc.n_phi))  # real grid field
    dual = disc.dual(Y.astype(complex))
    direct = np.vdot(dual, u.data).real
    packed = disc.pack_dual(dual) @ disc.pack_real(u)
    assert abs(direct - packed) < 1e-10 * max(1.0, abs(direct))


def test_reflection_symmetry(disc):
    u = random_real_field(disc, seed=10)
    v = disc.reflection(u)
    gu = disc.to_physical(u)
    gv = disc.to_physical(v)
    # reflected field at phi equals transformed field at -phi; the uniform phi
    # grid maps j -> -j mod n
    idx = (-np.arange(disc.n_phi)) % disc.n_phi
    flip = np.array([1.0, 1.0, -1.0])
    expect = flip[:, None, None, None] * gu[:, :, :, idx]
    assert np.allclose(gv, expect, atol=1e-11 * np.max(np.abs(gu)))


def test_chunked_synth_batch(disc):
    rng = np.random.default_rng(11)
    C = rng.standard_normal((disc.n_complex, 4)) + 1j * rng.standard_normal(
        (disc.n_complex, 4)
    )
    full = disc.synth(C)
    for b in range(4):
        one = disc.synth(C[:, b])
        assert np.allclose(full[..., b], one)
