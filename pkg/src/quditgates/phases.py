"""Closed-form Magnus quantities for MS and LS gates.

Conventions: hbar = 1, angular frequencies in rad/s, phases in radians.
The pulse is ``g(t) = sum_p Omega_p sin(mu_p t)`` with ``mu_p = 2 pi (n_min + p) / tau``,
so every tone completes an integer number of periods during the gate and
``g`` is anti-symmetric about ``tau / 2``.
"""

from dataclasses import dataclass
import logging
import math

import numpy as np

from ._divdiff import exp_moment

log = logging.getLogger(__name__)

ZERO_ORDER_TOL = 1e-3
_PHI_SERIES_RADIUS = 1.0
_PHI_TERMS = 30


# --- phi functions -------------------------------------------------------

def _phi_series(z, order, deriv):
    # sum_n z^n / (n + order)!  (deriv = 0) or its z-derivative (deriv = 1)
    out = np.zeros_like(z)
    for n in range(_PHI_TERMS - 1, -1, -1):
        if deriv:
            coeff = (n + 1) / math.factorial(n + 1 + order)
        else:
            coeff = 1.0 / math.factorial(n + order)
        out = out * z + coeff
    return out


def _phi(z, order, deriv=0):
    """phi_1(z) = (e^z - 1)/z and phi_2(z) = (e^z - 1 - z)/z^2, or their derivatives."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < _PHI_SERIES_RADIUS
    zs = np.where(small, 1.0, z)
    ez = np.exp(zs)
    if order == 1 and not deriv:
        big = np.expm1(zs) / zs
    elif order == 1:
        big = (ez * (zs - 1) + 1) / zs**2
    elif order == 2 and not deriv:
        big = (np.expm1(zs) - zs) / zs**2
    else:
        big = (ez * (zs - 2) + zs + 2) / zs**3
    if small.any():
        big = np.where(small, _phi_series(np.where(small, z, 0), order, deriv), big)
    return big


# --- pulse types -----------------------------------------------------------

@dataclass(frozen=True)
class PulseBasis:
    duration: float  # s
    num_tones: int
    n_min: int

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.num_tones < 1 or self.n_min < 1:
            raise ValueError("num_tones and n_min must be positive integers")

    @property
    def harmonics(self):
        return self.n_min + np.arange(self.num_tones)

    @property
    def detunings(self):
        return 2 * np.pi * self.harmonics / self.duration

    def covers(self, frequencies):
        mu = self.detunings
        return bool(mu[0] < np.min(frequencies) and mu[-1] > np.max(frequencies))


def default_basis(modes, duration, num_tones, margin=0.2):
    """Tone window centred on the mode band.

    Warns when the window does not reach ``margin`` times the band width
    beyond the outermost modes on both sides.
    """
    w = np.asarray(modes.frequencies)
    lo, hi = w.min(), w.max()
    unit = 2 * np.pi / duration
    centre = 0.5 * (lo + hi) / unit
    n_min = max(1, int(round(centre - (num_tones - 1) / 2)))
    basis = PulseBasis(duration, num_tones, n_min)
    pad = margin * max(hi - lo, unit)
    mu = basis.detunings
    if not (mu[0] <= lo - pad and mu[-1] >= hi + pad):
        log.warning("tone window [%.6g, %.6g] Hz does not cover the mode band with %d%% margin",
                    mu[0] / 2 / np.pi, mu[-1] / 2 / np.pi, int(100 * margin))
    return basis


@dataclass(frozen=True)
class PulseShape:
    basis: PulseBasis
    amplitudes: np.ndarray  # rad/s

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=float)
        if amps.shape != (self.basis.num_tones,):
            raise ValueError(f"expected {self.basis.num_tones} amplitudes, got {amps.shape}")
        object.__setattr__(self, "amplitudes", amps)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.sin(np.multiply.outer(t, self.basis.detunings)) @ self.amplitudes

    @property
    def duration(self):
        return self.basis.duration

    def power_norm(self):
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class MSPhaseSet:
    chi_11: float
    chi_12: float
    chi_22: float

    def as_array(self):
        return np.array([self.chi_11, self.chi_12, self.chi_22])


# --- displacements -------------------------------------------------------

def tone_overlaps(basis, omega):
    """``int_0^tau sin(mu_p t) exp(i omega t) dt`` for every tone, shape (len(omega), P)."""
    mu = basis.detunings
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    tau = basis.duration
    plus = exp_moment(mu[None, :] + omega[:, None], tau)
    minus = exp_moment(-mu[None, :] + omega[:, None], tau)
    return (plus - minus) / 2j


def displacements(pulse, modes):
    """All phase-space displacements alpha[l, j] at the end of the gate."""
    ov = tone_overlaps(pulse.basis, modes.frequencies) @ pulse.amplitudes
    return -1j * modes.lamb_dicke * ov[:, None]


def displacement_alpha(pulse, modes, mode, ion):
    n_modes, n_ions = modes.lamb_dicke.shape
    if not (0 <= mode < n_modes and 0 <= ion < n_ions):
        raise IndexError(f"mode {mode} / ion {ion} out of range")
    ov = tone_overlaps(pulse.basis, [modes.frequencies[mode]])[0] @ pulse.amplitudes
    return complex(-1j * modes.lamb_dicke[mode, ion] * ov)


# --- second-order kernels ----------------------------------------------

def _triangle_kernel(basis, omega, deriv=False):
    """Tone-pair kernel of the ordered double integral for one mode frequency.

    Returns ``D[n, m] = int_0^tau dt1 int_0^t1 dt2 sin(mu_n t2) sin(mu_m t1) sin(omega (t1 - t2))``
    or its derivative with respect to ``omega`` when ``deriv`` is set.

    Each sine product expands into exponentials whose simplex integral is
    ``tau^2 exp[0, z1, z2]``; because every ``mu_p tau`` is a multiple of 2 pi
    the divided difference collapses to phi-functions of the two reduced
    arguments, which keeps resonant tones exact.
    """
    mu = basis.detunings
    tau = basis.duration
    n = len(mu)
    total = np.zeros((n, n), dtype=complex)
    diag = np.arange(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        _accumulate(total, mu, tau, omega, deriv, diag)
    return -(tau**2 / 4) * total.imag


def _accumulate(total, mu, tau, omega, deriv, diag):
    for sig_m in (1, -1):  # t1 / column tone
        z1 = 1j * (sig_m * mu + omega) * tau  # depends on m only
        pz = _phi(z1, 1)
        for sig_n in (1, -1):  # t2 / row tone
            w = 1j * (sig_n * mu - omega) * tau  # depends on n only
            pw = _phi(-w, 1)
            use_w = np.abs(z1)[None, :] >= np.abs(w)[:, None]
            if not deriv:
                # exp[0, z1, z2] = phi1(-w) / z1 = -phi1(z1) / w
                val = np.where(use_w, pw[:, None] / z1[None, :], -pz[None, :] / w[:, None])
            else:
                # d/domega with dz1/domega = i tau, dw/domega = -i tau
                dpw = _phi(-w, 1, 1)
                dpz = _phi(z1, 1, 1)
                a = dpw[:, None] / z1[None, :] - pw[:, None] / (z1**2)[None, :]
                b = -dpz[None, :] / w[:, None] - pz[None, :] / (w**2)[:, None]
                val = 1j * tau * np.where(use_w, a, b)
            if sig_m == -sig_n:
                # z2 = 0 on the diagonal: exp[0, z1, 0] = phi2(z1)
                if not deriv:
                    val[diag, diag] = _phi(z1, 2)
                else:
                    val[diag, diag] = 1j * tau * _phi(z1, 2, 1)
            total += sig_m * sig_n * val


def phase_kernels(basis, frequencies, deriv=False):
    """Stack of per-mode kernels (or their frequency derivatives), shape (N, P, P)."""
    return np.stack([_triangle_kernel(basis, w, deriv) for w in frequencies])


def mode_integrals(pulse, modes):
    """Theta_l = Omega^T D_l Omega for each mode."""
    amps = pulse.amplitudes
    return np.array([amps @ _triangle_kernel(pulse.basis, w) @ amps for w in modes.frequencies])


def ms_phases(pulse, modes, ions):
    j, k = ions
    if j == k:
        raise ValueError("need two distinct ions")
    theta = mode_integrals(pulse, modes)
    eta = modes.lamb_dicke
    return MSPhaseSet(
        chi_11=float(np.sum(eta[:, j] ** 2 * theta)),
        chi_12=float(np.sum(eta[:, j] * eta[:, k] * theta)),
        chi_22=float(np.sum(eta[:, k] ** 2 * theta)),
    )


# --- evolution operators -----------------------------------------------

def _is_unitary(u, tol=1e-10):
    return np.max(np.abs(u.conj().T @ u - np.eye(len(u)))) < tol


def _exp_i_hermitian(gen):
    vals, vecs = np.linalg.eigh(gen)
    return (vecs * np.exp(1j * vals)) @ vecs.conj().T


def ms_generator(phases, d, ac_phases=None):
    """Hermitian G with U_MS = exp(i G) on the d x d two-qudit space."""
    if d < 2:
        raise ValueError("qudit dimension must be at least 2")
    sx = np.zeros((d, d))
    sx[0, 1] = sx[1, 0] = 1.0
    proj = np.zeros((d, d))
    proj[0, 0] = proj[1, 1] = 1.0
    ac = np.zeros(d) if ac_phases is None else np.asarray(ac_phases, dtype=float)
    if ac.shape != (d,):
        raise ValueError(f"expected {d} AC-Stark phases")
    eye = np.eye(d)
    single1 = phases.chi_11 * proj + np.diag(ac)
    single2 = phases.chi_22 * proj + np.diag(ac)
    return (2 * phases.chi_12 * np.kron(sx, sx)
            + np.kron(single1, eye) + np.kron(eye, single2))


def ms_evolution(phases, d, ac_phases=None):
    """Two-qudit MS evolution operator, basis index ``s * d + s'``."""
    return _exp_i_hermitian(ms_generator(phases, d, ac_phases))


@dataclass(frozen=True)
class LSAmplitudeProfile:
    theta: np.ndarray
    ac_phases: np.ndarray = None

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        if th.ndim != 1 or th.size < 2:
            raise ValueError("theta must be a vector of length d >= 2")
        if abs(abs(th[0]) - 1.0) > 1e-12:
            raise ValueError("theta must be normalised so that |theta_0| = 1")
        mags = np.abs(th)
        if np.any(np.diff(mags) > 1e-12):
            raise ValueError("theta must be sorted by descending magnitude")
        ac = np.zeros_like(th) if self.ac_phases is None else np.asarray(self.ac_phases, float)
        if ac.shape != th.shape:
            raise ValueError("ac_phases must have the same length as theta")
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "ac_phases", ac)

    @property
    def d(self):
        return self.theta.size


@dataclass(frozen=True)
class LSPhaseTable:
    """Diagonal LS gate data: entangling table and per-ion single-qudit phases."""

    entangling: np.ndarray  # (d, d)
    nonentangling: np.ndarray  # (2, d)
    zero_order: bool = False

    @property
    def d(self):
        return self.entangling.shape[0]

    def __add__(self, other):
        return LSPhaseTable(self.entangling + other.entangling,
                            self.nonentangling + other.nonentangling,
                            self.zero_order and other.zero_order)

    def state_phases(self):
        """Total diagonal phase of every |s s'> in one application."""
        return (self.entangling + self.nonentangling[0][:, None]
                + self.nonentangling[1][None, :])


def ls_phase_table(chi_12, chi_11, chi_22, profile, zero_order_tol=ZERO_ORDER_TOL):
    th = profile.theta
    ent = 2 * chi_12 * np.outer(th, th)
    single = np.vstack([chi_11 * th**2 + profile.ac_phases,
                        chi_22 * th**2 + profile.ac_phases])
    zero = bool(np.max(np.abs(th[1:])) < zero_order_tol)
    return LSPhaseTable(ent, single, zero)


def ls_evolution(table):
    return np.diag(np.exp(1j * table.state_phases().ravel()))
