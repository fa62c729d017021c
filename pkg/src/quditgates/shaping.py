"""Power-optimal multi-tone MS pulses with drift stabilisation."""

from dataclasses import dataclass, field
import logging
import warnings

import numpy as np
from scipy import linalg, optimize

from ._divdiff import exp_moment
from .chain import normal_modes
from .phases import (MSPhaseSet, PulseBasis, PulseShape, displacements, ms_phases,
                     phase_kernels)

log = logging.getLogger(__name__)

PHASE_LABELS = ("11", "12", "22")
N_STARTS = 16
PHASE_RTOL = 1e-9
LINEAR_ATOL = 1e-8


class InfeasibleError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


def decoupling_matrix(basis, frequencies, order=0):
    """``d^k/domega^k`` of ``M[l, p] = int_0^tau sin(mu_p t) sin(omega_l (tau/2 - t)) dt``.

    Shifting time to the gate centre turns the integral into a difference of
    two sinc functions, whose derivatives are moments of ``exp(i x s)``.
    """
    mu = basis.detunings
    half = basis.duration / 2
    w = np.asarray(frequencies, dtype=float)[:, None]
    sign = np.where(basis.harmonics % 2 == 0, -1.0, 1.0)  # (-1)^(n+1)

    def sinc_deriv(x):
        return np.real(1j**order * exp_moment(x, 1.0, order))

    minus = (-half) ** order * sinc_deriv((mu - w) * half)
    plus = half**order * sinc_deriv((mu + w) * half)
    return sign * half * (minus - plus)


@dataclass
class CouplingMatrices:
    """Quadratic forms of the MS phases and their mode-frequency derivatives.

    ``S[jk]`` gives ``chi_jk = Omega^T S[jk] Omega``; ``Q(jk, l)`` is
    ``dS[jk]/domega_l`` including the ``omega_l^{-1/2}`` scaling of the
    Lamb-Dicke factors.
    """

    M: np.ndarray
    M_derivs: list
    S: dict
    kernels: np.ndarray = field(repr=False)
    kernel_derivs: np.ndarray = field(repr=False)
    lamb_dicke: np.ndarray = field(repr=False)
    frequencies: np.ndarray = field(repr=False)
    ions: tuple = (0, 1)

    def _weights(self, jk):
        j, k = self.ions
        pick = {"11": (j, j), "12": (j, k), "22": (k, k)}[jk]
        return self.lamb_dicke[:, pick[0]] * self.lamb_dicke[:, pick[1]]

    def Q(self, jk, l):
        wgt = self._weights(jk)[l]
        return wgt * (self.kernel_derivs[l] - self.kernels[l] / self.frequencies[l])


def _sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def build_coupling_matrices(basis, modes, ions, moment_order=0):
    j, k = ions
    if j == k:
        raise ValueError("need two distinct ions")
    if not basis.covers(modes.frequencies):
        log.warning("tone window does not bracket all mode frequencies")
    w = modes.frequencies
    kern = _sym(phase_kernels(basis, w))
    dkern = _sym(phase_kernels(basis, w, deriv=True))
    eta = modes.lamb_dicke
    mats = CouplingMatrices(
        M=decoupling_matrix(basis, w),
        M_derivs=[decoupling_matrix(basis, w, kk) for kk in range(1, moment_order + 1)],
        S={},
        kernels=kern,
        kernel_derivs=dkern,
        lamb_dicke=eta,
        frequencies=np.asarray(w),
        ions=(j, k),
    )
    for jk in PHASE_LABELS:
        mats.S[jk] = np.tensordot(mats._weights(jk), kern, axes=1)
    return mats


@dataclass(frozen=True)
class StabilizationConfig:
    projected_per_mode: int = 0
    phases: tuple = ("12",)
    moment_order: int = 0

    def __post_init__(self):
        if self.projected_per_mode < 0 or self.moment_order < 0:
            raise ValueError("projection and moment counts must be non-negative")
        bad = set(self.phases) - set(PHASE_LABELS)
        if bad:
            raise ValueError(f"unknown phase labels {sorted(bad)}")
        object.__setattr__(self, "phases", tuple(p for p in PHASE_LABELS if p in self.phases))

    def num_columns(self, num_modes):
        return (len(self.phases) * num_modes * self.projected_per_mode
                + num_modes * self.moment_order)

    def check(self, num_modes, num_tones):
        cols = self.num_columns(num_modes)
        n_eq = num_modes + 3
        limit = num_tones - n_eq - 1
        if cols > limit:
            raise InfeasibleError(
                f"{len(self.phases)} phases x {num_modes} modes x {self.projected_per_mode} "
                f"+ {num_modes} modes x K={self.moment_order} = {cols} projected columns "
                f"exceeds P - {n_eq} - 1 = {limit}")
        return cols


def _fix_sign(v):
    nz = np.flatnonzero(np.abs(v) > 1e-12 * np.max(np.abs(v)))
    return -v if nz.size and v[nz[0]] < 0 else v


def top_eigenvectors(mat, count):
    """``count`` eigenvectors of a symmetric matrix with the largest |eigenvalue|."""
    vals, vecs = np.linalg.eigh(mat)
    order = np.argsort(-np.abs(vals), kind="stable")[:count]
    cols = [_fix_sign(vecs[:, i]) for i in order]
    return vals[order], np.array(cols).T.reshape(mat.shape[0], len(order))


def projection_basis(mats, cfg):
    n_modes, n_tones = mats.M.shape
    cfg.check(n_modes, n_tones)
    cols = []
    for kk in range(cfg.moment_order):
        cols.append(mats.M_derivs[kk].T)
    if cfg.projected_per_mode:
        for jk in cfg.phases:
            for l in range(n_modes):
                cols.append(top_eigenvectors(mats.Q(jk, l), cfg.projected_per_mode)[1])
    if not cols:
        return np.zeros((n_tones, 0))
    return np.hstack(cols)


@dataclass
class OptimizationResult:
    pulse: PulseShape
    phases: MSPhaseSet
    residual_alpha: float
    power_norm: float
    max_rabi: float
    converged: bool
    iterations: int
    residuals: dict = field(default_factory=dict)
    nullspace_dim: int = 0


def _null_space(rows):
    scale = np.linalg.norm(rows, axis=1)
    scale[scale == 0] = 1.0
    return linalg.null_space(rows / scale[:, None], rcond=1e-13)


def _kkt_polish(y, mats, targets, iters=20):
    """Newton steps on the Lagrange conditions of min |y|^2 s.t. y^T B_i y = c_i."""
    n = len(y)
    for _ in range(iters):
        grads = np.array([2 * B @ y for B in mats])
        lam = np.linalg.lstsq(grads.T, 2 * y, rcond=None)[0]
        cons = np.array([y @ B @ y for B in mats]) - targets
        hess = 2 * np.eye(n) - 2 * sum(li * B for li, B in zip(lam, mats))
        jac = np.block([[hess, -grads.T], [grads, np.zeros((len(mats), len(mats)))]])
        rhs = -np.concatenate([2 * y - grads.T @ lam, cons])
        step = np.linalg.lstsq(jac, rhs, rcond=None)[0]
        y = y + step[:n]
        if np.max(np.abs(step[:n])) < 1e-15 * max(1.0, np.linalg.norm(y)):
            break
    return y


def _solve_reduced(B, target, rng, n_starts):
    """Multi-start trust-region SQP for min |y|^2 with y^T B[0] y = target, y^T B[1,2] y = 0."""
    n = B[0].shape[0]
    if np.max(np.abs(B[1] - B[2])) <= 1e-12 * np.max(np.abs(B[1])):
        B = B[:2]  # mirror-symmetric pair: the two single-ion constraints coincide
    targets = np.array([target, 0.0, 0.0])[:len(B)]
    vals, vecs = np.linalg.eigh(B[0])
    lead = vecs[:, -1] if target > 0 else vecs[:, 0]
    n_b = len(B)
    cons = optimize.NonlinearConstraint(
        lambda y: np.array([y @ Bi @ y for Bi in B]), targets, targets,
        jac=lambda y: np.array([2 * Bi @ y for Bi in B]),
        hess=lambda y, v: 2 * sum(v[i] * B[i] for i in range(n_b)))
    eye2 = 2 * np.eye(n)
    best, best_iters = None, 0
    fallback, fallback_err = None, np.inf
    for start in range(n_starts):
        y0 = rng.standard_normal(n)
        for _ in range(60):
            q = y0 @ B[0] @ y0
            if q * target > 0:
                break
            y0 = y0 + np.sign(target) * 2.0 * np.linalg.norm(y0) * lead
        y0 *= np.sqrt(abs(target) / abs(y0 @ B[0] @ y0))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", optimize.OptimizeWarning)
            res = optimize.minimize(lambda y: y @ y, y0, jac=lambda y: 2 * y,
                                    hess=lambda y: eye2, method="trust-constr",
                                    constraints=[cons],
                                    options={"maxiter": 3000, "gtol": 1e-12, "xtol": 1e-14})
        y = _kkt_polish(res.x, B, targets)
        err = np.array([y @ Bi @ y for Bi in B]) - targets
        ok = np.all(np.abs(err) <= PHASE_RTOL * abs(target) * 1e-2)
        log.debug("start %d: norm %.6g, constraint error %.3e, sqp %s",
                  start, np.linalg.norm(y), np.max(np.abs(err)), res.message)
        if ok and (best is None or y @ y < best @ best):
            best, best_iters = y, res.nit
        if np.max(np.abs(err)) < fallback_err:
            fallback, fallback_err = y, np.max(np.abs(err))
    return best, best_iters, fallback, fallback_err


def optimize_pulse(basis, modes, ions, target_chi, cfg=None, seed=0, n_starts=N_STARTS,
                   mats=None):
    """Minimise |Omega|^2 subject to the phase targets, decoupling and stabilisation."""
    cfg = cfg or StabilizationConfig()
    if modes.num_modes < 2 and target_chi != 0:
        log.warning("fewer than two modes: a compensated solution is not guaranteed")
    if mats is None:
        mats = build_coupling_matrices(basis, modes, ions, cfg.moment_order)
    R = projection_basis(mats, cfg)
    Z = _null_space(np.vstack([mats.M, R.T]))
    if Z.shape[1] < 4:
        raise InfeasibleError(f"null space of the linear constraints has dimension {Z.shape[1]}")
    if target_chi == 0:
        y = np.zeros(Z.shape[1])
        iters = 0
    else:
        B = [Z.T @ mats.S[jk] @ Z for jk in ("12", "11", "22")]
        scale = np.linalg.norm(B[0], 2)
        B = [Bi / scale for Bi in B]
        rng = np.random.default_rng(seed)
        y, iters, fallback, err = _solve_reduced(B, target_chi, rng, n_starts)
        if y is None:
            best = _summarise(PulseShape(basis, Z @ (fallback / np.sqrt(scale))), modes, ions,
                              target_chi, mats, R, 0, Z.shape[1])
            raise ConvergenceError(
                f"no start out of {n_starts} met the phase tolerances; "
                f"best constraint error {err / abs(target_chi):.3e} (relative)", best)
        y = y / np.sqrt(scale)
    amps = Z @ y
    pulse = PulseShape(basis, amps)
    return _summarise(pulse, modes, ions, target_chi, mats, R, iters, Z.shape[1])


def _summarise(pulse, modes, ions, target_chi, mats, R, iters, nulldim):
    amps = pulse.amplitudes
    phases = ms_phases(pulse, modes, ions)
    alpha = np.max(np.abs(displacements(pulse, modes)))
    quad = {jk: float(amps @ mats.S[jk] @ amps) for jk in PHASE_LABELS}
    ref = abs(target_chi) if target_chi else 1.0
    lin_scale = max(np.linalg.norm(amps), 1e-300)
    row_norm = np.linalg.norm(mats.M, axis=1).max()
    residuals = {
        "chi_12": abs(quad["12"] - target_chi) / ref,
        "chi_11": abs(quad["11"]) / ref,
        "chi_22": abs(quad["22"]) / ref,
        "decoupling": float(np.max(np.abs(mats.M @ amps)) / (row_norm * lin_scale)) if amps.any() else 0.0,
        "projection": float(np.max(np.abs(R.T @ amps)) / lin_scale) if R.size and amps.any() else 0.0,
        "max_alpha": float(alpha),
    }
    converged = (max(residuals["chi_12"], residuals["chi_11"], residuals["chi_22"]) < PHASE_RTOL
                 and residuals["decoupling"] < LINEAR_ATOL and residuals["projection"] < LINEAR_ATOL)
    return OptimizationResult(
        pulse=pulse,
        phases=phases,
        residual_alpha=float(alpha),
        power_norm=pulse.power_norm(),
        max_rabi=max_rabi(pulse),
        converged=bool(converged),
        iterations=int(iters),
        residuals=residuals,
        nullspace_dim=int(nulldim),
    )


def max_rabi(pulse, samples=None):
    """Largest |g(t)| over the gate, grid search then golden-section refinement."""
    n_tones = pulse.basis.num_tones
    samples = 20 * n_tones if samples is None else samples
    if samples < 10 * n_tones:
        raise ValueError(f"need at least {10 * n_tones} samples for {n_tones} tones")
    if not np.any(pulse.amplitudes):
        return 0.0
    tau = pulse.duration
    t = np.linspace(0.0, tau, samples + 1)
    vals = np.abs(pulse(t))
    dt = t[1] - t[0]
    peaks = np.flatnonzero((vals >= np.roll(vals, 1)) & (vals >= np.roll(vals, -1)))
    peaks = peaks[np.argsort(-vals[peaks])][:16]
    best = vals.max()
    for i in peaks:
        lo, hi = max(t[i] - dt, 0.0), min(t[i] + dt, tau)
        res = optimize.minimize_scalar(lambda x: -abs(pulse(x)), bounds=(lo, hi),
                                       method="bounded", options={"xatol": 1e-6 * dt})
        best = max(best, -res.fun)
    return float(best)


def existence_theta(modes, ions, target_chi, tol=1e-10):
    """Minimum-norm per-mode loop integrals Theta_l realising (chi, 0, 0)."""
    j, k = ions
    if modes.num_modes < 2:
        raise InfeasibleError("need at least two modes")
    eta = modes.lamb_dicke
    A = np.vstack([eta[:, j] * eta[:, k], eta[:, j] ** 2, eta[:, k] ** 2])
    b = np.array([target_chi, 0.0, 0.0])
    theta, *_ = np.linalg.lstsq(A, b, rcond=1e-12)
    resid = float(np.max(np.abs(A @ theta - b)))
    if resid > tol:
        raise InfeasibleError(f"compensation system is inconsistent, residual {resid:.3e}")
    return theta


def sensitivity_scan(pulse, trap, ions, offsets_hz, normalize=None):
    """Phase deviations and residual displacement as the secular frequency drifts.

    The whole branch is recomputed for every offset with the pulse held fixed.
    Returns an array with columns (offset_hz, |dchi_11|, |dchi_12|, |dchi_22|, max|alpha|).
    ``normalize`` divides the phase deviations by a reference phase.
    """
    key = "radial_freq" if trap.branch == "radial" else "axial_freq"
    nominal = ms_phases(pulse, normal_modes(trap), ions).as_array()
    rows = []
    for off in offsets_hz:
        shifted = normal_modes(trap.replace(**{key: getattr(trap, key) + off}))
        dev = np.abs(ms_phases(pulse, shifted, ions).as_array() - nominal)
        if normalize:
            dev = dev / abs(normalize)
        alpha = np.max(np.abs(displacements(pulse, shifted)))
        rows.append([off, *dev, alpha])
    return np.array(rows)


PULSE_HEADER = "tone,mu_hz,omega_hz"


def write_pulse_csv(pulse, path):
    """Tone table with shortest round-trip float formatting."""
    mu_hz = pulse.basis.harmonics / pulse.duration
    lines = [PULSE_HEADER]
    for p, (f, a) in enumerate(zip(mu_hz, pulse.amplitudes / (2 * np.pi))):
        lines.append(f"{p},{float(f)!r},{float(a)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_pulse_csv(path, basis=None):
    """Read a pulse written by :func:`write_pulse_csv`.

    Without ``basis`` the duration and first harmonic are inferred from the
    tone frequencies, which are integer multiples of ``1/tau``.
    """
    with open(path) as fh:
        header = fh.readline().strip()
        if header != PULSE_HEADER:
            raise ValueError(f"{path}: expected header {PULSE_HEADER!r}, got {header!r}")
        rows = [line.split(",") for line in fh if line.strip()]
    try:
        mu_hz = np.array([float(r[1]) for r in rows])
        amps = 2 * np.pi * np.array([float(r[2]) for r in rows])
    except (IndexError, ValueError) as exc:
        raise ValueError(f"{path}: malformed pulse row ({exc})") from None
    if basis is None:
        if len(mu_hz) < 2:
            raise ValueError(f"{path}: cannot infer the tone spacing from one tone")
        spacing = (mu_hz[-1] - mu_hz[0]) / (len(mu_hz) - 1)
        n_min = int(round(mu_hz[0] / spacing))
        basis = PulseBasis(1.0 / spacing, len(mu_hz), n_min)
    elif basis.num_tones != len(amps):
        raise ValueError(f"{path}: {len(amps)} tones but the basis has {basis.num_tones}")
    return PulseShape(basis, amps)


def result_metadata(result, target_chi):
    """Plain-data summary of an optimisation, stable under re-serialisation."""
    ph = result.phases
    return {
        "converged": result.converged,
        "iterations": result.iterations,
        "target_chi": float(target_chi),
        "chi_11": float(ph.chi_11),
        "chi_12": float(ph.chi_12),
        "chi_22": float(ph.chi_22),
        "max_alpha": float(result.residual_alpha),
        "power_norm": float(result.power_norm),
        "max_rabi_rad_s": float(result.max_rabi),
        "max_rabi_hz": float(result.max_rabi / (2 * np.pi)),
        "nullspace_dim": result.nullspace_dim,
        "residuals": {k: float(v) for k, v in sorted(result.residuals.items())},
        "tolerances": {"phase_rel": PHASE_RTOL, "linear_abs": LINEAR_ATOL},
    }
