"""Independent numerical references used across test modules."""

import warnings

import numpy as np
from scipy import integrate

from quditgates.chain import ModeSet


def alpha_quad(pulse, omega, eta=1.0):
    """alpha = -i eta int_0^tau g(t) exp(i omega t) dt by adaptive quadrature."""
    tau = pulse.duration
    kw = dict(limit=2000, epsabs=0.0, epsrel=1e-13)
    with warnings.catch_warnings():
        # quad flags roundoff when it reaches machine precision; that is the point here
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        re = integrate.quad(lambda t: pulse(t) * np.cos(omega * t), 0, tau, **kw)[0]
        im = integrate.quad(lambda t: pulse(t) * np.sin(omega * t), 0, tau, **kw)[0]
    return -1j * eta * (re + 1j * im)


def theta_ode(pulse, omega):
    """Theta = int_0^tau dt1 int_0^t1 dt2 g(t1) g(t2) sin(omega (t1 - t2)), adaptive ODE integration.

    With C(t) = int_0^t g cos(omega s) ds and S(t) likewise, the integrand of the
    outer integral is g(t) (sin(omega t) C(t) - cos(omega t) S(t)).
    """
    def rhs(t, y):
        g = pulse(t)
        c, s = np.cos(omega * t), np.sin(omega * t)
        return [g * c, g * s, g * (s * y[0] - c * y[1])]

    sol = integrate.solve_ivp(rhs, (0, pulse.duration), [0.0, 0.0, 0.0], method="DOP853",
                              rtol=1e-13, atol=1e-300)
    return sol.y[2, -1]


def random_modes(rng, n_modes, n_ions=2, f_lo=0.5, f_hi=6.0, scale=1.0):
    """Synthetic mode set: frequencies in cycles per unit time times 2 pi / scale."""
    freqs = np.sort(rng.uniform(f_lo, f_hi, n_modes))[::-1] * 2 * np.pi / scale
    b = np.linalg.qr(rng.normal(size=(max(n_modes, n_ions), max(n_modes, n_ions))))[0][:n_modes, :n_ions]
    eta = 0.05 * b
    return ModeSet(freqs, b, eta)
