"""Linear ion chain in a harmonic trap: equilibrium, normal modes, Lamb-Dicke matrix."""

from dataclasses import dataclass, field
import logging

import numpy as np
from scipy import constants

log = logging.getLogger(__name__)

HBAR = constants.hbar
AMU = constants.atomic_mass

# Configuration defaults only; any species can be passed explicitly.
DEFAULT_MASS = 171 * AMU
DEFAULT_WAVEVECTOR = 2 * np.pi / 435e-9

NEWTON_MAXITER = 200
NEWTON_TOL = 1e-12


class SolverError(RuntimeError):
    """Equilibrium search did not converge."""


class InstabilityError(ValueError):
    """A normal-mode frequency came out imaginary (zig-zag transition)."""


@dataclass(frozen=True)
class TrapConfig:
    num_ions: int
    axial_freq: float  # Hz
    radial_freq: float  # Hz
    ion_mass: float = DEFAULT_MASS
    wavevector: float = DEFAULT_WAVEVECTOR
    branch: str = "radial"

    def __post_init__(self):
        if int(self.num_ions) != self.num_ions or self.num_ions < 1:
            raise ValueError(f"num_ions must be a positive integer, got {self.num_ions}")
        if not self.axial_freq > 0 or not self.radial_freq > 0:
            raise ValueError("trap frequencies must be positive")
        if self.branch not in ("axial", "radial"):
            raise ValueError(f"branch must be 'axial' or 'radial', got {self.branch!r}")
        if not self.ion_mass > 0:
            raise ValueError("ion_mass must be positive")

    def replace(self, **changes):
        values = {**self.__dict__, **changes}
        return TrapConfig(**values)


@dataclass(frozen=True)
class ModeSet:
    """Normal modes of one branch, sorted by descending frequency.

    ``frequencies`` are angular (rad/s); row ``l`` of ``mode_matrix`` is the
    participation vector of mode ``l``; ``lamb_dicke[l, j]`` couples ion ``j``
    to mode ``l``.
    """

    frequencies: np.ndarray
    mode_matrix: np.ndarray
    lamb_dicke: np.ndarray
    config: TrapConfig = field(repr=False, default=None)

    @property
    def num_modes(self):
        return len(self.frequencies)

    def to_csv(self, path):
        rows = []
        for w, eta in zip(self.frequencies, self.lamb_dicke):
            rows.append(",".join(repr(float(v)) for v in (w / (2 * np.pi), *eta)))
        n = self.lamb_dicke.shape[1]
        header = "freq_hz," + ",".join(f"eta_{j}" for j in range(n))
        with open(path, "w") as fh:
            fh.write(header + "\n" + "\n".join(rows) + "\n")


def _force(u):
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    return u - np.sum(np.sign(diff) / diff**2, axis=1)


def _coulomb_hessian(u):
    """Axial Hessian of the dimensionless trap + Coulomb potential."""
    diff = np.abs(u[:, None] - u[None, :])
    np.fill_diagonal(diff, np.inf)
    inv3 = 1.0 / diff**3
    hess = -2.0 * inv3
    np.fill_diagonal(hess, 1.0 + 2.0 * inv3.sum(axis=1))
    return hess


def equilibrium_positions(num_ions):
    """Dimensionless equilibrium positions, ascending, in units of (e^2/4 pi eps0 m w_z^2)^(1/3)."""
    n = int(num_ions)
    if n < 1:
        raise ValueError("need at least one ion")
    if n == 1:
        return np.zeros(1)
    idx = np.arange(1, n + 1)
    u = 3.94 * n**0.387 * np.sin(np.arcsin(1.75 * n**-0.982 * (idx - (n + 1) / 2)) / 3)
    res = _force(u)
    for _ in range(NEWTON_MAXITER):
        err = np.max(np.abs(res))
        if err < NEWTON_TOL:
            break
        step = np.linalg.solve(_coulomb_hessian(u), -res)
        lam = 1.0
        while True:
            trial = u + lam * step
            if np.all(np.diff(trial) > 0):
                trial_res = _force(trial)
                if np.max(np.abs(trial_res)) < err:
                    break
            lam *= 0.5
            if lam < 1e-8:
                raise SolverError(
                    f"equilibrium search for N={n} stalled, residual {err:.3e}")
        u, res = trial, trial_res
    else:
        raise SolverError(
            f"equilibrium search for N={n} stalled, residual {np.max(np.abs(res)):.3e}")
    u = 0.5 * (u - u[::-1])
    return u


def lamb_dicke_matrix(mode_matrix, frequencies, ion_mass, wavevector):
    scale = wavevector * np.sqrt(HBAR / (2 * ion_mass * np.asarray(frequencies)))
    return np.asarray(mode_matrix) * scale[:, None]


def _fix_signs(vecs):
    # rows are mode vectors; make the first non-negligible entry positive
    out = vecs.copy()
    for row in out:
        nz = np.flatnonzero(np.abs(row) > 1e-12)
        if nz.size and row[nz[0]] < 0:
            row *= -1
    return out


def normal_modes(cfg):
    """Normal modes of the configured branch."""
    n = cfg.num_ions
    u = equilibrium_positions(n)
    hess = _coulomb_hessian(u)
    if cfg.branch == "axial":
        kmat = hess
    else:
        beta2 = (cfg.radial_freq / cfg.axial_freq) ** 2
        kmat = beta2 * np.eye(n) - 0.5 * (hess - np.eye(n))
    evals, evecs = np.linalg.eigh(kmat)
    if evals.min() <= 0:
        bad = evals.min()
        raise InstabilityError(
            f"{cfg.branch} mode eigenvalue {bad:.6g} (units of nu_z^2) is not positive; "
            "the linear chain is unstable for this trap")
    freqs = 2 * np.pi * cfg.axial_freq * np.sqrt(evals)
    vecs = evecs.T
    dominant = np.argmax(np.abs(vecs), axis=1)
    order = np.lexsort((dominant, -freqs))
    freqs = freqs[order]
    vecs = _fix_signs(vecs[order])
    eta = lamb_dicke_matrix(vecs, freqs, cfg.ion_mass, cfg.wavevector)
    return ModeSet(freqs, vecs, eta, cfg)
