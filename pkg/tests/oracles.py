"""Closed-form Stokes flows between concentric spheres, shared by tests.

With a rigid trace at r = 1 and zero velocity at r = R the steady Stokes
profiles are elementary: translation has u_r = phi(r) (chi . x_hat) with
phi = a/r^3 + b/r + c + d r^2 clamped at both ends, rotation has
u = T(r) (sigma x x_hat) with T = a r + b/r^2 vanishing at R.  Drag is
4 pi b chi (which is also the dissipation power per |chi|^2), torque is
8 pi b sigma, and the translation pressure is (b/r^2 + 10 d r)(chi . x_hat).
"""
import numpy as np

from spherefall.radial import cutoff_profile


def translation_profile(R):
    """(a, b, c, d) of phi with phi(1) = 1, phi'(1) = 0, phi(R) = phi'(R) = 0."""
    A = np.array(
        [
            [1.0, 1.0, 1.0, 1.0],
            [-3.0, -1.0, 0.0, 2.0],
            [R**-3, R**-1, 1.0, R**2],
            [-3.0 * R**-4, -(R**-2), 0.0, 2.0 * R],
        ]
    )
    return np.linalg.solve(A, np.array([1.0, 0.0, 0.0, 0.0]))


def rotation_profile(R):
    """(a, b) of T = a r + b/r^2 with T(1) = 1, T(R) = 0."""
    b = R**3 / (R**3 - 1.0)
    return 1.0 - b, b


def _fit(d, family, target):
    w = np.sqrt(d.radial.w_r)
    V0 = d.radial.tables[family][0]
    coef, *_ = np.linalg.lstsq(V0 * w[:, None], target * w, rcond=None)
    return coef


def translation_field(d, chi=(1.0, 0.0, 0.0)):
    """Concentric-Stokes translation flow as a CoupledField, plus (a, b, c, d)."""
    coef = translation_profile(d.r_out)
    a, b, c, dd = coef
    r = d.radial.r_q
    phi = a / r**3 + b / r + c + dd * r**2
    target = 0.5 * r * (phi - cutoff_profile(r, d.r_out)[0])
    sol = _fit(d, "pol", target)
    u = d.zero_field()
    u.chi = np.asarray(chi, dtype=float)
    for m in d.beta:
        u.data[d.mode_slice(1, m, "pol")] = (d.beta[m] @ u.chi) * sol
    return u, coef


def rotation_field(d, sigma=(0.0, 0.0, 1.0)):
    """Concentric-Stokes rotation flow as a CoupledField, plus (a, b)."""
    a, b = rotation_profile(d.r_out)
    r = d.radial.r_q
    T = a * r + b / r**2
    target = T - r * cutoff_profile(r, d.r_out)[0]
    sol = _fit(d, "tor", target)
    u = d.zero_field()
    u.sigma = np.asarray(sigma, dtype=float)
    for m in d.beta:
        u.data[d.mode_slice(1, m, "tor")] = (d.beta[m] @ u.sigma) * sol
    return u, (a, b)


# Time-harmonic rigid motions in unbounded fluid (no transport) are also
# classical.  For a sphere translating as e^{iks} the velocity potential pair
# f = A/r + beta e^{-kappa (r - 1)}/r with kappa = sqrt(ik), Re kappa > 0,
# gives u_r = phi(r) (chi . x_hat) with phi = -2 f'/r, drag 6 pi (1 + kappa
# + kappa^2/9) chi; rotary oscillation has the toroidal profile
# k1(kappa r)/k1(kappa) built from the decaying spherical Bessel function
# k1(x) = e^{-x}(1/x + 1/x^2) and torque (8 pi/3)(kappa^2+3kappa+3)/(kappa+1).


def oscillating_constants(k):
    """(kappa, A, beta) of the translating-sphere potential pair at frequency k."""
    kappa = np.sqrt(1j * k)  # principal branch keeps Re kappa > 0
    beta = -1.5 / kappa**2
    A = (kappa**2 + 3.0 * kappa + 3.0) / (2.0 * kappa**2)
    return kappa, A, beta


def oscillating_drag(k):
    kappa = np.sqrt(1j * k)
    return 6.0 * np.pi * (1.0 + kappa + kappa**2 / 9.0)


def oscillating_torque(k):
    kappa = np.sqrt(1j * k)
    return (8.0 * np.pi / 3.0) * (kappa**2 + 3.0 * kappa + 3.0) / (kappa + 1.0)


def oscillating_translation_field(d, k, chi=(1.0, 0.0, 0.0)):
    """Oscillating-sphere translation flow at frequency k as a CoupledField."""
    kappa, A, beta = oscillating_constants(k)
    r = d.radial.r_q
    decay = np.exp(-kappa * (r - 1.0))
    phi = 2.0 * A / r**3 + 2.0 * beta * decay * (kappa / r**2 + 1.0 / r**3)
    target = 0.5 * r * (phi - cutoff_profile(r, d.r_out)[0])
    sol = _fit(d, "pol", target)
    u = d.zero_field()
    u.chi = np.asarray(chi, dtype=complex)
    for m in d.beta:
        u.data[d.mode_slice(1, m, "pol")] = (d.beta[m] @ u.chi) * sol
    return u


def oscillating_rotation_field(d, k, sigma=(1.0, 0.0, 0.0)):
    """Rotary-oscillation flow at frequency k as a CoupledField."""
    kappa, _, _ = oscillating_constants(k)
    r = d.radial.r_q

    def k1(x):
        return np.exp(-x) * (1.0 / x + 1.0 / x**2)

    T = k1(kappa * r) / k1(kappa)
    target = T - r * cutoff_profile(r, d.r_out)[0]
    sol = _fit(d, "tor", target)
    u = d.zero_field()
    u.sigma = np.asarray(sigma, dtype=complex)
    for m in d.beta:
        u.data[d.mode_slice(1, m, "tor")] = (d.beta[m] @ u.sigma) * sol
    return u
