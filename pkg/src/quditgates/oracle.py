"""Brute-force time integration of the MS and LS Hamiltonians.

The Hamiltonian in the interaction picture of both the qudits and the modes is

    H(t) = g(t) sum_l E_l (a_l exp(-i w_l t) + a_l^dag exp(i w_l t)),

with ``E_l = sum_j eta_lj sigma^j`` (MS, sigma = |0><1| + |1><0|) or
``E_l = sum_j eta_lj sum_s theta_s |s><s|_j`` (LS).  Every electronic basis
state is propagated with the modes in their ground state using fixed-step
RK4 on a Fock space truncated at ``n_max``; the result is projected back onto
the motional ground state.
"""

from dataclasses import dataclass
import logging
import math

import numpy as np
from scipy import sparse

from .chain import ModeSet

log = logging.getLogger(__name__)

LEAKAGE_THRESHOLD = 1e-6
UNITARITY_TOL = 1e-8


class CutoffError(RuntimeError):
    """Population reached the top of the truncated Fock space."""


@dataclass(frozen=True)
class OracleConfig:
    fock_cutoff: int = 8
    included_modes: tuple = (0, 1)
    steps_per_period: int = 20
    d: int = 2
    ions: tuple = (0, 1)
    leakage_threshold: float = LEAKAGE_THRESHOLD
    monitor_every: int = 10

    def __post_init__(self):
        if self.fock_cutoff < 4:
            raise ValueError("fock_cutoff must be at least 4")
        if self.d < 2:
            raise ValueError("qudit dimension must be at least 2")
        if self.steps_per_period < 1:
            raise ValueError("steps_per_period must be positive")
        if not self.included_modes:
            raise ValueError("include at least one mode")


@dataclass
class OracleResult:
    operator: np.ndarray  # d^2 x d^2 electronic block on the motional ground state
    leakage: float  # 1 - smallest singular value squared of the block
    max_truncation_population: float
    unitarity_error: float
    steps: int


def mode_subset(modes, indices):
    idx = list(indices)
    if any(not 0 <= i < modes.num_modes for i in idx):
        raise IndexError(f"mode indices {idx} out of range for {modes.num_modes} modes")
    return ModeSet(modes.frequencies[idx], modes.mode_matrix[idx], modes.lamb_dicke[idx],
                   modes.config)


def _lowering(n_max):
    return sparse.diags(np.sqrt(np.arange(1, n_max + 1)), 1, format="csr")


def _mode_operator(k, n_modes, n_max):
    ops = [sparse.identity(n_max + 1, format="csr")] * n_modes
    ops[k] = _lowering(n_max)
    out = ops[0]
    for op in ops[1:]:
        out = sparse.kron(out, op, format="csr")
    return out


def _ms_site(d):
    s = np.zeros((d, d))
    s[0, 1] = s[1, 0] = 1.0
    return s


def _couplings(site_ops, modes, cfg):
    """Electronic operator E_l for each included mode, on the d^2 space."""
    j, k = cfg.ions
    eye = np.eye(cfg.d)
    s1 = np.kron(site_ops, eye)
    s2 = np.kron(eye, site_ops)
    return [modes.lamb_dicke[l, j] * s1 + modes.lamb_dicke[l, k] * s2
            for l in range(modes.num_modes)]


def _integrate(pulse, modes, electronic, cfg):
    sub = mode_subset(modes, cfg.included_modes)
    n_modes = sub.num_modes
    n_max = cfg.fock_cutoff
    dim_m = (n_max + 1) ** n_modes
    d2 = cfg.d**2
    lower = [sparse.kron(sparse.csr_matrix(e), _mode_operator(k, n_modes, n_max), format="csr")
             for k, e in enumerate(electronic(sub))]
    raise_ = [op.conj().T.tocsr() for op in lower]
    w = sub.frequencies

    tau = pulse.duration
    fastest = (np.max(pulse.basis.detunings) + np.max(w)) / (2 * np.pi)
    steps = int(math.ceil(tau * fastest * cfg.steps_per_period))
    dt = tau / steps

    # initial states |e> (x) |0...0>, one column per electronic basis state
    psi = np.zeros((d2 * dim_m, d2), dtype=complex)
    psi[np.arange(d2) * dim_m, np.arange(d2)] = 1.0

    def rhs(t, y):
        g = pulse(t)
        if g == 0.0:
            return np.zeros_like(y)
        out = np.zeros_like(y)
        for lo, hi, wl in zip(lower, raise_, w):
            ph = np.exp(-1j * wl * t)
            out += ph * (lo @ y) + np.conj(ph) * (hi @ y)
        return -1j * g * out

    top = _top_levels_mask(n_modes, n_max)
    worst = 0.0
    for n in range(steps):
        t = n * dt
        k1 = rhs(t, psi)
        k2 = rhs(t + dt / 2, psi + dt / 2 * k1)
        k3 = rhs(t + dt / 2, psi + dt / 2 * k2)
        k4 = rhs(t + dt, psi + dt * k3)
        psi = psi + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if n % cfg.monitor_every == 0 or n == steps - 1:
            pops = np.abs(psi.reshape(d2, dim_m, d2)) ** 2
            worst = max(worst, float(pops[:, top, :].sum(axis=(0, 1)).max()))
            if worst > cfg.leakage_threshold:
                raise CutoffError(
                    f"population {worst:.2e} in the top two Fock levels at t = {t:.3e} s "
                    f"exceeds {cfg.leakage_threshold:.1e}; raise fock_cutoff above {n_max}")

    unit_err = float(np.max(np.abs(psi.conj().T @ psi - np.eye(d2))))
    if unit_err > UNITARITY_TOL:
        log.warning("propagated states lost orthonormality by %.2e; use more steps", unit_err)
    block = psi.reshape(d2, dim_m, d2)[:, 0, :]
    sv = np.linalg.svd(block, compute_uv=False)
    return OracleResult(block, float(1 - sv.min() ** 2), worst, unit_err, steps)


def _top_levels_mask(n_modes, n_max):
    levels = np.indices((n_max + 1,) * n_modes).reshape(n_modes, -1)
    return np.any(levels >= n_max - 1, axis=0)


def integrate_ms(pulse, modes, cfg):
    """Electronic MS operator on the motional ground state, basis index s * d + s'."""
    return _integrate(pulse, modes, lambda sub: _couplings(_ms_site(cfg.d), sub, cfg), cfg)


def integrate_ls(pulse, modes, profile, cfg):
    """Electronic LS operator; the force on level s is scaled by theta_s."""
    if profile.d != cfg.d:
        raise ValueError(f"profile has d = {profile.d} but the oracle uses d = {cfg.d}")
    site = np.diag(profile.theta)
    return _integrate(pulse, modes, lambda sub: _couplings(site, sub, cfg), cfg)


def operator_deviation(u, reference, align_phase=False):
    """Max entry-wise deviation, optionally after removing the best global phase."""
    phase = 1.0
    if align_phase:
        overlap = np.vdot(reference, u)
        phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.max(np.abs(u - phase * reference)))
